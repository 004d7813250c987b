//! Mean-zero noise laws, the law of their replicate means, and the law of
//! the difference `eps1 - eps0` that drives selection.

mod parse;
pub mod quadrature;

use serde::Serialize;
use statrs::function::erf::erfc;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

/// Values closer than this are merged into one atom.
pub const MERGE_TOL: f64 = 1e-12;
/// Tolerance on total mass and on the mean of a user-supplied atom list.
pub const MASS_TOL: f64 = 1e-12;
/// Default Gauss rule order per axis for continuous laws.
pub const DEFAULT_QUADRATURE_ORDER: usize = 64;

/// Law of a single noise draw `eps_x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// `-1` with probability `p`, `d = p / (1 - p)` with probability `1 - p`; requires `p > 1/2`.
    Bernoulli {
        p: f64,
    },
    /// Finite mean-zero atom list `(value, prob)`.
    Discrete {
        atoms: Vec<(f64, f64)>,
    },
    Gaussian {
        sigma: f64,
    },
    /// Uniform on `[-halfwidth, halfwidth]`.
    Uniform {
        halfwidth: f64,
    },
    /// Zero noise.
    Degenerate,
}

impl NoiseSpec {
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(p > 0.5 && p < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "bernoulli p must lie in (1/2, 1) so that d = p/(1-p) > 1, got {p}"
            )));
        }
        Ok(Self::Bernoulli { p })
    }

    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("discrete noise needs at least one atom".into()));
        }
        for &(v, q) in &atoms {
            if !v.is_finite() || !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidParameter(format!("bad atom ({v}, {q})")));
            }
        }
        let mass: f64 = atoms.iter().map(|a| a.1).sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidParameter(format!(
                "atom probabilities sum to {mass}, not 1"
            )));
        }
        let mean: f64 = atoms.iter().map(|a| a.0 * a.1).sum();
        if mean.abs() > MASS_TOL {
            return Err(Error::InvalidParameter(format!(
                "discrete noise must have mean 0, got {mean}"
            )));
        }
        Ok(Self::Discrete { atoms })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "gaussian sigma must be > 0, got {sigma}"
            )));
        }
        Ok(Self::Gaussian { sigma })
    }

    pub fn uniform(halfwidth: f64) -> Result<Self> {
        if !(halfwidth.is_finite() && halfwidth > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "uniform halfwidth must be > 0, got {halfwidth}"
            )));
        }
        Ok(Self::Uniform { halfwidth })
    }

    /// True for laws with finitely many atoms.
    pub fn is_discrete(&self) -> bool {
        !matches!(self, Self::Gaussian { .. } | Self::Uniform { .. })
    }

    /// `d = p / (1 - p)` for the Bernoulli law.
    pub fn bernoulli_d(&self) -> Option<f64> {
        match self {
            Self::Bernoulli { p } => Some(p / (1.0 - p)),
            _ => None,
        }
    }

    /// Whether the law is symmetric about zero.
    pub fn is_symmetric(&self) -> bool {
        match self {
            Self::Bernoulli { .. } => false,
            Self::Gaussian { .. } | Self::Uniform { .. } | Self::Degenerate => true,
            Self::Discrete { atoms } => {
                let dist = DiscreteDistribution::from_atoms(atoms.clone());
                dist.atoms.iter().all(|a| {
                    dist.atoms
                        .iter()
                        .any(|b| (a.value + b.value).abs() <= MERGE_TOL && (a.prob - b.prob).abs() <= MASS_TOL)
                })
            }
        }
    }

    fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Self::Bernoulli { p } => Some(vec![(-1.0, *p), (p / (1.0 - p), 1.0 - p)]),
            Self::Discrete { atoms } => Some(atoms.clone()),
            Self::Degenerate => Some(vec![(0.0, 1.0)]),
            Self::Gaussian { .. } | Self::Uniform { .. } => None,
        }
    }

    /// `[P, E[eps; a<eps<b], E[eps^2; a<eps<b]]` for a continuous law.
    pub(crate) fn partial_moments(&self, a: f64, b: f64) -> Option<[f64; 3]> {
        if a >= b {
            return Some([0.0; 3]);
        }
        match *self {
            Self::Gaussian { sigma } => {
                let (lo, hi) = (a / sigma, b / sigma);
                let mass = normal_interval(lo, hi);
                let (phi_lo, phi_hi) = (std_normal_pdf(lo), std_normal_pdf(hi));
                let lo_phi = if lo.is_finite() { lo * phi_lo } else { 0.0 };
                let hi_phi = if hi.is_finite() { hi * phi_hi } else { 0.0 };
                Some([
                    mass,
                    sigma * (phi_lo - phi_hi),
                    sigma * sigma * (mass + lo_phi - hi_phi),
                ])
            }
            Self::Uniform { halfwidth: h } => {
                let lo = a.max(-h);
                let hi = b.min(h);
                if lo >= hi {
                    return Some([0.0; 3]);
                }
                let scale = 1.0 / (2.0 * h);
                Some([
                    (hi - lo) * scale,
                    0.5 * (hi * hi - lo * lo) * scale,
                    (hi * hi * hi - lo * lo * lo) / 3.0 * scale,
                ])
            }
            _ => None,
        }
    }
}

fn std_normal_pdf(z: f64) -> f64 {
    if z.is_finite() {
        (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
    } else {
        0.0
    }
}

/// `P(lo < Z < hi)` for a standard normal, evaluated on the tail that avoids cancellation.
fn normal_interval(lo: f64, hi: f64) -> f64 {
    let upper = |z: f64| 0.5 * erfc(z / std::f64::consts::SQRT_2);
    if lo >= 0.0 {
        upper(lo) - upper(hi)
    } else if hi <= 0.0 {
        upper(-hi) - upper(-lo)
    } else {
        1.0 - upper(-lo) - upper(hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

/// Finite law with atoms sorted by value and duplicates merged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDistribution {
    atoms: Vec<Atom>,
}

impl DiscreteDistribution {
    /// Sorts and merges atoms whose values lie within [`MERGE_TOL`]. Zero-mass atoms are dropped.
    pub fn from_atoms(mut raw: Vec<(f64, f64)>) -> Self {
        raw.retain(|a| a.1 > 0.0);
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut atoms: Vec<Atom> = Vec::with_capacity(raw.len());
        for (value, prob) in raw {
            match atoms.last_mut() {
                Some(last) if (value - last.value).abs() <= MERGE_TOL => last.prob += prob,
                _ => atoms.push(Atom { value, prob }),
            }
        }
        Self { atoms }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.prob).sum()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.value * a.prob).sum()
    }

    pub fn min(&self) -> f64 {
        self.atoms.first().map_or(0.0, |a| a.value)
    }

    pub fn max(&self) -> f64 {
        self.atoms.last().map_or(0.0, |a| a.value)
    }

    pub fn cdf(&self, z: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.value <= z).map(|a| a.prob).sum()
    }

    /// Point mass at `z` (within [`MERGE_TOL`]).
    pub fn pmf(&self, z: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|a| (a.value - z).abs() <= MERGE_TOL)
            .map(|a| a.prob)
            .sum()
    }
}

/// Law of `mean(eps1) - mean(eps0)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DifferenceDistribution {
    Discrete(DiscreteDistribution),
    /// `Normal(0, sd^2)`.
    Normal {
        sd: f64,
    },
    /// Triangular density on `[-2h, 2h]` (difference of two uniforms on `[-h, h]`).
    Triangular {
        halfwidth: f64,
    },
}

impl DifferenceDistribution {
    pub fn mean(&self) -> f64 {
        match self {
            Self::Discrete(d) => d.mean(),
            Self::Normal { .. } | Self::Triangular { .. } => 0.0,
        }
    }

    /// Density for continuous laws; point mass at `z` for discrete ones.
    pub fn pdf(&self, z: f64) -> f64 {
        match *self {
            Self::Discrete(ref d) => d.pmf(z),
            Self::Normal { sd } => std_normal_pdf(z / sd) / sd,
            Self::Triangular { halfwidth: h } => {
                let w = 2.0 * h;
                if z.abs() >= w {
                    0.0
                } else {
                    (w - z.abs()) / (w * w)
                }
            }
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match *self {
            Self::Discrete(ref d) => d.cdf(z),
            Self::Normal { sd } => 0.5 * erfc(-z / sd / std::f64::consts::SQRT_2),
            Self::Triangular { halfwidth: h } => {
                let w = 2.0 * h;
                if z <= -w {
                    0.0
                } else if z >= w {
                    1.0
                } else if z <= 0.0 {
                    (w + z).powi(2) / (2.0 * w * w)
                } else {
                    1.0 - (w - z).powi(2) / (2.0 * w * w)
                }
            }
        }
    }

    /// `P(z <= lo or z >= hi)` for `lo < hi`, both endpoints included.
    pub fn outside_prob(&self, lo: f64, hi: f64) -> f64 {
        match self {
            Self::Discrete(d) => d
                .atoms()
                .iter()
                .filter(|a| a.value <= lo || a.value >= hi)
                .map(|a| a.prob)
                .sum(),
            Self::Normal { sd } => {
                let upper = |z: f64| 0.5 * erfc(z / sd / std::f64::consts::SQRT_2);
                upper(-lo) + upper(hi)
            }
            Self::Triangular { .. } => self.cdf(lo) + (1.0 - self.cdf(hi)),
        }
    }
}

/// `P(K = k)` for `K ~ Binomial(n, p)`, `k = 0..=n`.
fn binomial_pmf(n: u32, p: f64) -> Vec<f64> {
    let q = 1.0 - p;
    if n <= 500 {
        // Direct products keep small cases exact (e.g. 0.75 * 0.75).
        let mut coef = 1.0;
        (0..=n)
            .map(|k| {
                if k > 0 {
                    coef = coef * f64::from(n - k + 1) / f64::from(k);
                }
                coef * p.powi(k as i32) * q.powi((n - k) as i32)
            })
            .collect()
    } else {
        let (lp, lq) = (p.ln(), q.ln());
        (0..=n)
            .map(|k| {
                let kf = f64::from(k);
                (ln_binomial(u64::from(n), u64::from(k)) + kf * lp + (f64::from(n) - kf) * lq).exp()
            })
            .collect()
    }
}

fn unsupported_continuous(spec: &NoiseSpec, n: u32) -> Error {
    Error::Unsupported(format!(
        "{spec} is continuous; exact replicate-mean laws are only available for discrete noise (n = {n})"
    ))
}

/// Exact law of the mean of `n` i.i.d. draws from a discrete `spec`.
pub fn sample_mean_distribution(spec: &NoiseSpec, n: u32) -> Result<DiscreteDistribution> {
    if n == 0 {
        return Err(Error::InvalidParameter("replicate count n must be >= 1".into()));
    }
    match *spec {
        NoiseSpec::Bernoulli { p } => {
            let d = p / (1.0 - p);
            let nf = f64::from(n);
            let atoms = (0..=n)
                .map(|k| {
                    let kf = f64::from(k);
                    ((nf - kf) * d - kf) / nf
                })
                .zip(binomial_pmf(n, p))
                .collect();
            Ok(DiscreteDistribution::from_atoms(atoms))
        }
        NoiseSpec::Gaussian { .. } | NoiseSpec::Uniform { .. } => Err(unsupported_continuous(spec, n)),
        _ => {
            let base = spec.atoms().expect("discrete spec has atoms");
            let mut sums = DiscreteDistribution::from_atoms(base.clone());
            for _ in 1..n {
                let mut next = Vec::with_capacity(sums.len() * base.len());
                for s in sums.atoms() {
                    for &(v, q) in &base {
                        next.push((s.value + v, s.prob * q));
                    }
                }
                sums = DiscreteDistribution::from_atoms(next);
            }
            let nf = f64::from(n);
            Ok(DiscreteDistribution::from_atoms(
                sums.atoms().iter().map(|a| (a.value / nf, a.prob)).collect(),
            ))
        }
    }
}

/// One joint outcome of the two replicate means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointOutcome {
    pub eps0: f64,
    pub eps1: f64,
    pub prob: f64,
}

/// Product of two independent copies of [`sample_mean_distribution`].
pub fn joint_support(spec: &NoiseSpec, n: u32) -> Result<Vec<JointOutcome>> {
    let marginal = sample_mean_distribution(spec, n)?;
    let mut out = Vec::with_capacity(marginal.len() * marginal.len());
    for a0 in marginal.atoms() {
        for a1 in marginal.atoms() {
            out.push(JointOutcome {
                eps0: a0.value,
                eps1: a1.value,
                prob: a0.prob * a1.prob,
            });
        }
    }
    Ok(out)
}

/// Law of `mean(eps1) - mean(eps0)`. Continuous laws are supported for `n = 1` only.
pub fn difference_distribution(spec: &NoiseSpec, n: u32) -> Result<DifferenceDistribution> {
    match *spec {
        NoiseSpec::Gaussian { sigma } if n == 1 => Ok(DifferenceDistribution::Normal {
            sd: sigma * std::f64::consts::SQRT_2,
        }),
        NoiseSpec::Uniform { halfwidth } if n == 1 => Ok(DifferenceDistribution::Triangular { halfwidth }),
        NoiseSpec::Gaussian { .. } | NoiseSpec::Uniform { .. } => Err(unsupported_continuous(spec, n)),
        _ => {
            let joint = joint_support(spec, n)?;
            Ok(DifferenceDistribution::Discrete(DiscreteDistribution::from_atoms(
                joint.iter().map(|o| (o.eps1 - o.eps0, o.prob)).collect(),
            )))
        }
    }
}

/// Gauss rule for expectations against a continuous noise density.
///
/// Gaussian laws use Hermite nodes, uniform laws Legendre nodes on the
/// support; weights sum to one and the rule is exact for polynomials of
/// degree up to `2 * order - 1`.
pub fn quadrature_nodes(spec: &NoiseSpec, order: usize) -> Result<Vec<(f64, f64)>> {
    if order < 1 {
        return Err(Error::InvalidParameter("quadrature order must be >= 1".into()));
    }
    match *spec {
        NoiseSpec::Gaussian { sigma } => Ok(quadrature::gauss_hermite_standard(order)
            .into_iter()
            .map(|(x, w)| (sigma * x, w))
            .collect()),
        NoiseSpec::Uniform { halfwidth } => Ok(quadrature::gauss_legendre(order)
            .into_iter()
            .map(|(x, w)| (halfwidth * x, 0.5 * w))
            .collect()),
        _ => Err(Error::Unsupported(format!("{spec} is discrete; use exact enumeration"))),
    }
}
