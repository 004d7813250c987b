//! The statistician's penalized two-point regression.
//!
//! With `n` replicates per design point the sum of squares splits into a
//! term in the per-point means and a within-point scatter term that does not
//! depend on `(b0, b1)`. Only the means enter here; the scatter term is a
//! constant offset on every objective value and cannot move the argmin.

use serde::Serialize;

use crate::error::{Error, Result};

/// L0 and L1 costs on the slope: `C(b1) = c0 * 1{b1 != 0} + c1 * |b1|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PenaltyParams {
    c0: f64,
    c1: f64,
}

impl PenaltyParams {
    pub fn new(c0: f64, c1: f64) -> Result<Self> {
        if !(c0.is_finite() && c0 >= 0.0) {
            return Err(Error::InvalidParameter(format!("c0 must be finite and >= 0, got {c0}")));
        }
        if !(c1.is_finite() && c1 >= 0.0) {
            return Err(Error::InvalidParameter(format!("c1 must be finite and >= 0, got {c1}")));
        }
        Ok(Self { c0, c1 })
    }

    /// No penalty at all; the fit interpolates the two means.
    pub const fn zero() -> Self {
        Self { c0: 0.0, c1: 0.0 }
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// Value of the penalty at slope `b1`.
    pub fn cost(&self, b1: f64) -> f64 {
        let l0 = if b1 != 0.0 { self.c0 } else { 0.0 };
        l0 + self.c1 * b1.abs()
    }
}

/// True coefficients: `f(0) = beta0`, `f(1) = beta0 + beta1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    pub beta0: f64,
    pub beta1: f64,
}

impl ModelParams {
    pub fn new(beta0: f64, beta1: f64) -> Result<Self> {
        if !(beta0.is_finite() && beta1.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "model coefficients must be finite, got ({beta0}, {beta1})"
            )));
        }
        Ok(Self { beta0, beta1 })
    }

    /// Ideal action `f(x)` for `x` in {0, 1}.
    pub fn ideal(&self, x: bool) -> f64 {
        if x {
            self.beta0 + self.beta1
        } else {
            self.beta0
        }
    }
}

/// Per-design-point sample means over `n` replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub ybar0: f64,
    pub ybar1: f64,
    n: u32,
}

impl Sample {
    pub fn new(ybar0: f64, ybar1: f64, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("replicate count n must be >= 1".into()));
        }
        if !(ybar0.is_finite() && ybar1.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sample means must be finite, got ({ybar0}, {ybar1})"
            )));
        }
        Ok(Self { ybar0, ybar1, n })
    }

    /// A single observation per design point.
    pub fn single(y0: f64, y1: f64) -> Result<Self> {
        Self::new(y0, y1, 1)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Observed difference `ybar1 - ybar0`.
    pub fn difference(&self) -> f64 {
        self.ybar1 - self.ybar0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub b0: f64,
    pub b1: f64,
    /// Whether the slope was selected (`b1 != 0` unless the shrunken slope is exactly zero).
    pub included: bool,
}

impl Estimate {
    /// Fitted value at report `r`.
    pub fn action(&self, r: bool) -> f64 {
        if r {
            self.b0 + self.b1
        } else {
            self.b0
        }
    }
}

/// `c* = sqrt(c1^2 + 2 c0)`. The closed-form fit includes the slope iff `|ybar1 - ybar0| >= c*`.
pub fn selection_threshold(penalty: &PenaltyParams) -> f64 {
    (penalty.c1 * penalty.c1 + 2.0 * penalty.c0).sqrt()
}

fn estimate_with_threshold(sample: &Sample, penalty: &PenaltyParams, threshold: f64) -> Estimate {
    let diff = sample.difference();
    let (b1, included) = if diff >= threshold {
        (diff - penalty.c1, true)
    } else if diff <= -threshold {
        (diff + penalty.c1, true)
    } else {
        (0.0, false)
    };
    Estimate {
        b0: 0.5 * (sample.ybar0 + sample.ybar1 - b1),
        b1,
        included,
    }
}

/// Closed-form estimator: soft-threshold the observed difference by `c1`
/// once it clears the selection threshold `c*` (ties include).
///
/// This is the selection rule the incentive analysis is built on. When both
/// `c0` and `c1` are positive it is not the exact minimizer of [`objective`]:
/// the exact rule also charges `c1 |b1|` against the fit improvement and
/// includes only when `|diff| >= c1 + sqrt(2 c0)` (see [`fit_exact`]).
pub fn fit(sample: &Sample, penalty: &PenaltyParams) -> Estimate {
    estimate_with_threshold(sample, penalty, selection_threshold(penalty))
}

/// Exact minimizer of [`objective`]. Identical to [`fit`] whenever `c0 == 0` or `c1 == 0`.
pub fn fit_exact(sample: &Sample, penalty: &PenaltyParams) -> Estimate {
    let threshold = penalty.c1 + (2.0 * penalty.c0).sqrt();
    estimate_with_threshold(sample, penalty, threshold)
}

/// Penalized least-squares objective in the replicate means, scaled by `n`.
pub fn objective(sample: &Sample, penalty: &PenaltyParams, b0: f64, b1: f64) -> f64 {
    let n = f64::from(sample.n);
    let r0 = sample.ybar0 - b0;
    let r1 = sample.ybar1 - b0 - b1;
    n * (r0 * r0 + r1 * r1) + n * penalty.cost(b1)
}

/// Drop in residual sum of squares (per replicate) from admitting the slope:
/// `diff^2 / 2 - c1^2 / 2`. The closed-form fit includes iff this is `>= c0`.
pub fn rss_gap(sample: &Sample, penalty: &PenaltyParams) -> f64 {
    let diff = sample.difference();
    0.5 * diff * diff - 0.5 * penalty.c1 * penalty.c1
}

/// Resolution of the brute-force minimizer in [`fit_oracle`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    step: f64,
}

impl GridSpec {
    pub fn new(step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidParameter(format!("grid step must be > 0, got {step}")));
        }
        Ok(Self { step })
    }

    pub fn step(&self) -> f64 {
        self.step
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { step: 1e-3 }
    }
}

/// Lattice `lo + i * step` for `i` in `0..len`.
struct Axis {
    lo: f64,
    step: f64,
    len: usize,
}

impl Axis {
    fn new(lo: f64, hi: f64, step: f64) -> Self {
        let len = ((hi - lo) / step).floor() as usize + 1;
        Self { lo, step, len }
    }

    fn at(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }
}

/// Brute-force minimizer of [`objective`] over a lattice.
///
/// The slope axis covers `[diff - 2(c1 + 1), diff + 2(c1 + 1)]` and the
/// intercept axis `[min(ybar) - 2, max(ybar) + 2]`, both at `grid.step()`.
/// Off `b1 = 0` the objective is convex, so the lattice is searched
/// coarse-to-fine with strides 256, 16, 1 and a window of four parent
/// strides around each incumbent. The excluded model (`b1 = 0`) is scanned
/// over every intercept lattice point. Inclusion wins ties.
pub fn fit_oracle(sample: &Sample, penalty: &PenaltyParams, grid: &GridSpec) -> Estimate {
    let step = grid.step;
    let diff = sample.difference();
    let half_width = 2.0 * (penalty.c1 + 1.0);
    let b1_axis = Axis::new(diff - half_width, diff + half_width, step);
    let lo_y = sample.ybar0.min(sample.ybar1);
    let hi_y = sample.ybar0.max(sample.ybar1);
    let b0_axis = Axis::new(lo_y - 2.0, hi_y + 2.0, step);

    // Included branch: objective with the L0 cost always charged, which is the
    // convex extension of the b1 != 0 piece.
    let included_obj = |i0: usize, i1: usize| {
        let b0 = b0_axis.at(i0);
        let b1 = b1_axis.at(i1);
        let n = f64::from(sample.n);
        let r0 = sample.ybar0 - b0;
        let r1 = sample.ybar1 - b0 - b1;
        n * (r0 * r0 + r1 * r1) + n * (penalty.c0 + penalty.c1 * b1.abs())
    };

    let mut window = (0, b0_axis.len - 1, 0, b1_axis.len - 1);
    let mut best = (0usize, 0usize, f64::INFINITY);
    for stride in [256usize, 16, 1] {
        let (lo0, hi0, lo1, hi1) = window;
        best.2 = f64::INFINITY;
        let mut i0 = lo0;
        while i0 <= hi0 {
            let mut i1 = lo1;
            while i1 <= hi1 {
                let v = included_obj(i0, i1);
                if v < best.2 {
                    best = (i0, i1, v);
                }
                i1 += stride;
            }
            i0 += stride;
        }
        let radius = 4 * stride;
        window = (
            best.0.saturating_sub(radius),
            (best.0 + radius).min(b0_axis.len - 1),
            best.1.saturating_sub(radius),
            (best.1 + radius).min(b1_axis.len - 1),
        );
    }
    let (inc_i0, inc_i1, inc_val) = best;

    let mut excl = (0usize, f64::INFINITY);
    for i0 in 0..b0_axis.len {
        let v = objective(sample, penalty, b0_axis.at(i0), 0.0);
        if v < excl.1 {
            excl = (i0, v);
        }
    }

    if inc_val <= excl.1 {
        Estimate {
            b0: b0_axis.at(inc_i0),
            b1: b1_axis.at(inc_i1),
            included: true,
        }
    } else {
        Estimate {
            b0: b0_axis.at(excl.0),
            b1: 0.0,
            included: false,
        }
    }
}
