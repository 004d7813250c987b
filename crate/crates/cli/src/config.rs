//! `--config FILE` support and the small argument grammars (grids, lists, priors).

use std::fs;
use std::path::Path;

/// Splice `key = value` lines from a config file into `args` as `--key value`,
/// skipping keys already given on the command line. Blank lines and `#`
/// comments are ignored.
pub fn merge_config(args: Vec<String>) -> Result<Vec<String>, ConfigError> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let mut args = args;
    let path = if let Some(p) = args[pos].strip_prefix("--config=") {
        let p = p.to_string();
        args.remove(pos);
        p
    } else {
        if pos + 1 >= args.len() {
            return Err(ConfigError::Usage("--config needs a file path".into()));
        }
        let p = args.remove(pos + 1);
        args.remove(pos);
        p
    };
    let text = fs::read_to_string(&path).map_err(|e| ConfigError::Io(format!("{path}: {e}")))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Usage(format!(
                "{path}:{}: expected key = value",
                lineno + 1
            )));
        };
        let flag = format!("--{}", key.trim());
        let given = args.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if !given {
            args.push(format!("{flag}={}", value.trim()));
        }
    }
    Ok(args)
}

#[derive(Debug, PartialEq)]
pub enum ConfigError {
    Usage(String),
    Io(String),
}

/// `start:stop:step`, a comma list, or an empty string.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, String> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad grid number {p:?}")))
            .collect::<Result<_, _>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if !step.is_finite() || step <= 0.0 {
            return Err(format!("grid step must be > 0, got {step}"));
        }
        if start.is_nan() || stop.is_nan() || start > stop {
            return Err(format!("grid start {start} exceeds stop {stop}"));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + i as f64 * step).collect());
    }
    if parts.len() != 1 {
        return Err(format!("grid {s:?} is neither start:stop:step nor a comma list"));
    }
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| format!("bad grid number {p:?}")))
        .collect()
}

pub fn parse_n_list(s: &str) -> Result<Vec<u32>, String> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<u32>()
                .map_err(|_| format!("bad replicate count {p:?}"))
        })
        .collect()
}

/// Prior file: `beta0,beta1,prob` per line, `#` comments allowed.
pub fn read_prior(path: &Path) -> Result<Vec<(f64, f64, f64)>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| ConfigError::Usage(format!("{}:{}: bad number", path.display(), lineno + 1)))?;
        let [b0, b1, w] = vals[..] else {
            return Err(ConfigError::Usage(format!(
                "{}:{}: expected beta0,beta1,prob",
                path.display(),
                lineno + 1
            )));
        };
        rows.push((b0, b1, w));
    }
    Ok(rows)
}
