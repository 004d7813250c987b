//! Large-sample behaviour of the pivotal event under Bernoulli noise (`c1 = 0`).
//!
//! With `n` replicates per group, each replicate mean is determined by the
//! fraction of `-1` draws. A pair of replicates `(eps1, eps0)` falls in one of
//! four cells, written `mm, md, dm, dd` with the `eps1` value first (`m = -1`,
//! `d = p / (1 - p)`). The slope is selected when the fraction difference
//! `s_dm - s_md` is at least `theta_h` (or at most `theta_l`), and Sanov's
//! theorem puts the conditional limit at the KL projection of the cell law
//! onto that boundary.

use serde::Serialize;
use statrs::function::factorial::ln_binomial;

use crate::error::{Error, Result};

/// Cell law of one replicate pair under i.i.d. Bernoulli noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompositeDistribution {
    p: f64,
    pub pi_mm: f64,
    pub pi_md: f64,
    pub pi_dm: f64,
    pub pi_dd: f64,
}

impl CompositeDistribution {
    /// `p` is the probability of the `-1` atom.
    pub fn from_p(p: f64) -> Result<Self> {
        if !(p > 0.5 && p < 1.0) {
            return Err(Error::InvalidParameter(format!("p must lie in (0.5, 1), got {p}")));
        }
        let q = 1.0 - p;
        Ok(Self {
            p,
            pi_mm: p * p,
            pi_md: p * q,
            pi_dm: q * p,
            pi_dd: q * q,
        })
    }

    pub fn from_d(d: f64) -> Result<Self> {
        if !(d > 1.0 && d.is_finite()) {
            return Err(Error::InvalidParameter(format!("d must exceed 1, got {d}")));
        }
        Self::from_p(d / (d + 1.0))
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn d(&self) -> f64 {
        self.p / (1.0 - self.p)
    }

    pub fn cells(&self) -> [f64; 4] {
        [self.pi_mm, self.pi_md, self.pi_dm, self.pi_dd]
    }
}

/// Empirical cell frequencies, same cell order as [`CompositeDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalFrequencies {
    pub s_mm: f64,
    pub s_md: f64,
    pub s_dm: f64,
    pub s_dd: f64,
}

impl EmpiricalFrequencies {
    pub fn new(s_mm: f64, s_md: f64, s_dm: f64, s_dd: f64) -> Result<Self> {
        let cells = [s_mm, s_md, s_dm, s_dd];
        if cells.iter().any(|s| s.is_nan() || *s < 0.0) {
            return Err(Error::InvalidParameter("frequencies must be non-negative".into()));
        }
        let total: f64 = cells.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("frequencies sum to {total}, not 1")));
        }
        Ok(Self { s_mm, s_md, s_dm, s_dd })
    }

    pub fn cells(&self) -> [f64; 4] {
        [self.s_mm, self.s_md, self.s_dm, self.s_dd]
    }

    pub fn gap(&self) -> f64 {
        self.s_dm - self.s_md
    }

    /// `(eps0, eps1)` means implied by the frequencies.
    pub fn means(&self, d: f64) -> (f64, f64) {
        let eps0 = (self.s_md + self.s_dd) * (d + 1.0) - 1.0;
        let eps1 = (self.s_dm + self.s_dd) * (d + 1.0) - 1.0;
        (eps0, eps1)
    }
}

/// `KL(s || pi)` with `0 ln 0 = 0`.
pub fn kl_divergence(s: &EmpiricalFrequencies, pi: &CompositeDistribution) -> f64 {
    s.cells()
        .iter()
        .zip(pi.cells())
        .map(|(&si, pii)| if si > 0.0 { si * (si / pii).ln() } else { 0.0 })
        .sum()
}

const BISECTION_TOL: f64 = 1e-14;

/// Minimizer of `KL(s || pi)` subject to `s_dm - s_md = theta`.
///
/// Stationarity forces `s_mm = d^2 s_dd` and `s_md s_dm = s_mm s_dd`; with
/// `t = s_dd` the remaining condition is a single decreasing function of `t`,
/// solved by bisection.
pub fn min_kl_at_gap(pi: &CompositeDistribution, theta: f64) -> Result<EmpiricalFrequencies> {
    if theta.is_nan() || theta.abs() >= 1.0 {
        return Err(Error::Domain(format!("gap theta must lie in (-1, 1), got {theta}")));
    }
    let d = pi.d();
    let d2 = d * d;
    let u_of = |t: f64| 0.5 * (1.0 - theta - (1.0 + d2) * t);
    let f = |t: f64| {
        let u = u_of(t);
        u * (u + theta) - d2 * t * t
    };
    let (mut lo, mut hi) = (0.0, (1.0 - theta.abs()) / (1.0 + d2));
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let u = u_of(t);
    Ok(EmpiricalFrequencies {
        s_mm: d2 * t,
        s_md: u,
        s_dm: u + theta,
        s_dd: t,
    })
}

/// Gap thresholds on `s_dm - s_md` beyond which the slope is selected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapBounds {
    pub theta_l: f64,
    pub theta_h: f64,
}

pub fn gap_bounds(beta1: f64, c0: f64, d: f64) -> GapBounds {
    let root = (2.0 * c0).sqrt();
    GapBounds {
        theta_l: (-root - beta1) / (d + 1.0),
        theta_h: (root - beta1) / (d + 1.0),
    }
}

fn validate(beta1: f64, c0: f64, d: f64) -> Result<GapBounds> {
    if !(beta1 > 0.0 && beta1.is_finite()) {
        return Err(Error::Domain(format!("requires beta1 > 0, got {beta1}")));
    }
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(Error::Domain(format!("requires c0 > 0, got {c0}")));
    }
    if !(d > 1.0 && d.is_finite()) {
        return Err(Error::Domain(format!("requires d > 1, got {d}")));
    }
    let bounds = gap_bounds(beta1, c0, d);
    if bounds.theta_h.is_nan() || bounds.theta_h.abs() >= 1.0 {
        return Err(Error::Domain(format!(
            "requires theta_h = (sqrt(2 c0) - beta1) / (d + 1) in (-1, 1), got {}",
            bounds.theta_h
        )));
    }
    Ok(bounds)
}

/// Limiting `(E[eps0], E[eps1])` conditional on the pivotal event.
///
/// Closed form of the KL projection at `theta_h`. For `theta_h <= 0` the
/// event is not rare and this is still the projection, not the
/// unconditional mean.
pub fn limit_conditional_means(beta1: f64, c0: f64, d: f64) -> Result<(f64, f64)> {
    validate(beta1, c0, d)?;
    let q = (2.0 * c0).sqrt() - beta1;
    let m = d / (d - 1.0);
    let r = (q * q + 4.0 * m * m).sqrt();
    Ok((-q / 2.0 - m + r / 2.0, q / 2.0 - m + r / 2.0))
}

/// Limiting `E[b1 (eps0 + eps1 - beta1) | pivotal]`; positive means the
/// `x = 1` agent gains by misreporting.
pub fn limit_ic_statistic(beta1: f64, c0: f64, d: f64) -> Result<f64> {
    let (e0, e1) = limit_conditional_means(beta1, c0, d)?;
    Ok((2.0 * c0).sqrt() * (e0 + e1 - beta1))
}

/// `beta1` below which the limit violates incentive compatibility.
pub fn limit_violation_threshold(c0: f64, d: f64) -> f64 {
    c0 / ((2.0 * c0).sqrt() + 2.0 * d / (d - 1.0))
}

pub fn limit_ic_violated(beta1: f64, c0: f64, d: f64) -> Result<bool> {
    validate(beta1, c0, d)?;
    Ok(beta1 < limit_violation_threshold(c0, d))
}

/// Exact finite-`n` quantities for one replicate count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeRow {
    pub n: u32,
    pub pivot_prob: f64,
    pub upper_prob: f64,
    pub lower_prob: f64,
    pub cond_eps0: Option<f64>,
    pub cond_eps1: Option<f64>,
    pub upper_eps0: Option<f64>,
    pub upper_eps1: Option<f64>,
    /// `E[b1 (eps0 + eps1 - beta1) | pivotal]`.
    pub ic_statistic: Option<f64>,
    /// Expected loss of misreporting minus truth-telling for `x = 1`.
    pub loss_gap: f64,
    /// No outcome selects the slope.
    pub trivial: bool,
}

pub const MAX_PROBE_N: u32 = 10_000;

/// Slack so that lattice points on the selection boundary count as selected.
const TIE_SLACK: f64 = 1e-12;

struct LogAccumulator {
    max: f64,
    terms: Vec<(f64, f64, f64, f64)>,
}

impl LogAccumulator {
    fn new() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            terms: Vec::new(),
        }
    }

    fn push(&mut self, lw: f64, e0: f64, e1: f64, stat: f64) {
        self.max = self.max.max(lw);
        self.terms.push((lw, e0, e1, stat));
    }

    /// `(log mass, E[e0], E[e1], E[stat])`, conditional on this set.
    fn summarize(&self) -> Option<(f64, f64, f64, f64)> {
        if self.terms.is_empty() {
            return None;
        }
        let (mut w, mut s0, mut s1, mut ss) = (0.0, 0.0, 0.0, 0.0);
        for &(lw, e0, e1, stat) in &self.terms {
            let x = (lw - self.max).exp();
            w += x;
            s0 += x * e0;
            s1 += x * e1;
            ss += x * stat;
        }
        Some((self.max + w.ln(), s0 / w, s1 / w, ss / w))
    }
}

/// Exact enumeration of the pivotal event for each `n` in `n_list`.
pub fn finite_n_probe(beta1: f64, c0: f64, d: f64, n_list: &[u32]) -> Result<Vec<ProbeRow>> {
    validate(beta1, c0, d)?;
    let p = d / (d + 1.0);
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let root = (2.0 * c0).sqrt();
    let cut = root * (1.0 - TIE_SLACK);
    n_list
        .iter()
        .map(|&n| {
            if n == 0 || n > MAX_PROBE_N {
                return Err(Error::InvalidParameter(format!(
                    "n must lie in 1..={MAX_PROBE_N}, got {n}"
                )));
            }
            let nf = n as f64;
            let log_w: Vec<f64> = (0..=n)
                .map(|k| ln_binomial(n as u64, k as u64) + k as f64 * lp + (n - k) as f64 * lq)
                .collect();
            let mean = |k: u32| ((n - k) as f64 * d - k as f64) / nf;
            let mut upper = LogAccumulator::new();
            let mut lower = LogAccumulator::new();
            for k1 in 0..=n {
                let e1 = mean(k1);
                for k0 in 0..=n {
                    let e0 = mean(k0);
                    let diff = beta1 + e1 - e0;
                    let side = if diff >= cut {
                        &mut upper
                    } else if diff <= -cut {
                        &mut lower
                    } else {
                        continue;
                    };
                    side.push(
                        log_w[k0 as usize] + log_w[k1 as usize],
                        e0,
                        e1,
                        diff * (e0 + e1 - beta1),
                    );
                }
            }
            let up = upper.summarize();
            let lo = lower.summarize();
            let mut all = LogAccumulator::new();
            for (lm, e0, e1, st) in up.into_iter().chain(lo) {
                all.push(lm, e0, e1, st);
            }
            let full = all.summarize();
            let pivot_prob = full.map_or(0.0, |f| f.0.exp());
            let ic_statistic = full.map(|f| f.3);
            Ok(ProbeRow {
                n,
                pivot_prob,
                upper_prob: up.map_or(0.0, |u| u.0.exp()),
                lower_prob: lo.map_or(0.0, |l| l.0.exp()),
                cond_eps0: full.map(|f| f.1),
                cond_eps1: full.map(|f| f.2),
                upper_eps0: up.map(|u| u.1),
                upper_eps1: up.map(|u| u.2),
                ic_statistic,
                loss_gap: ic_statistic.map_or(0.0, |s| -pivot_prob * s),
                trivial: full.is_none(),
            })
        })
        .collect()
}

/// Largest coordinate difference between the probe's conditional means and
/// the limit.
pub fn limit_discrepancy(row: &ProbeRow, limit: (f64, f64)) -> Option<f64> {
    Some((row.cond_eps0? - limit.0).abs().max((row.cond_eps1? - limit.1).abs()))
}
