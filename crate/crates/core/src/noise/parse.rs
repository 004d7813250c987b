//! Text form of a noise law, shared with the command line:
//! `bernoulli:p=0.75`, `gaussian:sigma=1.0`, `uniform:halfwidth=1.0`,
//! `degenerate`, `discrete:v1:p1,v2:p2,...`.

use std::fmt;
use std::str::FromStr;

use super::NoiseSpec;
use crate::error::{Error, Result};

fn number(text: &str, what: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("{what}: expected a number, got {text:?}")))
}

fn keyed(body: &str, key: &str) -> Result<f64> {
    let (k, v) = body
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("expected {key}=<value>, got {body:?}")))?;
    if k.trim() != key {
        return Err(Error::Parse(format!("expected key {key:?}, got {:?}", k.trim())));
    }
    number(v, key)
}

impl FromStr for NoiseSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, body) = match s.split_once(':') {
            Some((k, b)) => (k.trim(), Some(b)),
            None => (s, None),
        };
        match (kind.to_ascii_lowercase().as_str(), body) {
            ("degenerate", None) => Ok(NoiseSpec::Degenerate),
            ("bernoulli", Some(b)) => NoiseSpec::bernoulli(keyed(b, "p")?),
            ("gaussian", Some(b)) => NoiseSpec::gaussian(keyed(b, "sigma")?),
            ("uniform", Some(b)) => NoiseSpec::uniform(keyed(b, "halfwidth")?),
            ("discrete", Some(b)) => {
                let atoms = b
                    .split(',')
                    .map(|pair| {
                        let (v, p) = pair
                            .rsplit_once(':')
                            .ok_or_else(|| Error::Parse(format!("expected value:prob, got {pair:?}")))?;
                        Ok((number(v, "atom value")?, number(p, "atom probability")?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                NoiseSpec::discrete(atoms)
            }
            _ => Err(Error::Parse(format!(
                "unrecognised noise {s:?}; expected bernoulli:p=.., gaussian:sigma=.., \
                 uniform:halfwidth=.., degenerate or discrete:v:p,..."
            ))),
        }
    }
}

impl fmt::Display for NoiseSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NoiseSpec::Bernoulli { p } => write!(f, "bernoulli:p={p}"),
            NoiseSpec::Gaussian { sigma } => write!(f, "gaussian:sigma={sigma}"),
            NoiseSpec::Uniform { halfwidth } => write!(f, "uniform:halfwidth={halfwidth}"),
            NoiseSpec::Degenerate => write!(f, "degenerate"),
            NoiseSpec::Discrete { atoms } => {
                write!(f, "discrete:")?;
                for (i, (v, p)) in atoms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{v}:{p}")?;
                }
                Ok(())
            }
        }
    }
}
