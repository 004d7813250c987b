//! The agent's expected quadratic loss for each report, and the pivotal
//! event in which the slope is selected.
//!
//! Discrete noise is handled by exact enumeration of the joint law of the two
//! replicate means. Continuous noise (one replicate) is integrated with an
//! outer Gauss rule over `eps0`; for each outer node the `eps1` integral is
//! split at the two selection boundaries `beta1 + eps1 - eps0 = +-c*` and
//! done in closed form from the partial moments of the density.
//!
//! Every quantity here is invariant to `beta0`: the sample is evaluated with
//! `beta0` removed, which is exact because the fit is translation-equivariant.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{fit, selection_threshold, ModelParams, PenaltyParams, Sample};
use crate::noise::{self, quadrature, NoiseSpec, DEFAULT_QUADRATURE_ORDER};

/// True characteristic `x` and report `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReportPair {
    pub x: bool,
    pub r: bool,
}

impl ReportPair {
    pub fn truthful(x: bool) -> Self {
        Self { x, r: x }
    }

    pub fn deviation(x: bool) -> Self {
        Self { x, r: !x }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PivotalStats {
    /// `P(|beta1 + diff| >= c*)`, boundary included.
    pub pivot_prob: f64,
    /// `E[b1 | pivotal]`; `None` when the pivotal event has no mass.
    pub cond_mean_b1: Option<f64>,
    /// `E[-beta1^2 + 2 beta1 eps0 + eps1^2 - eps0^2 | pivotal]`; `None` when the pivotal event has no mass.
    pub cond_ic_statistic: Option<f64>,
}

/// Which branch of the closed-form estimator a noise draw falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    Upper,
    Lower,
    Excluded,
}

/// `k0 + k1 * e + k2 * e^2` in the `eps1` draw.
#[derive(Debug, Clone, Copy)]
struct Quadratic([f64; 3]);

impl Quadratic {
    fn product((a, b): (f64, f64), (c, d): (f64, f64)) -> Self {
        Self([a * c, a * d + b * c, b * d])
    }

    fn against(&self, moments: [f64; 3]) -> f64 {
        self.0[0] * moments[0] + self.0[1] * moments[1] + self.0[2] * moments[2]
    }
}

fn bit(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Slope as an affine function `(a, b)` of `eps1`, i.e. `b1 = a + b * eps1`, on a branch.
fn slope_affine(branch: Branch, beta1: f64, eps0: f64, c1: f64) -> (f64, f64) {
    match branch {
        Branch::Upper => (beta1 - eps0 - c1, 1.0),
        Branch::Lower => (beta1 - eps0 + c1, 1.0),
        Branch::Excluded => (0.0, 0.0),
    }
}

/// Outer nodes `(eps0, weight)` for a continuous law, split where the inner
/// selection boundaries cross the edge of a bounded support.
fn outer_rule(spec: &NoiseSpec, beta1: f64, cstar: f64, order: usize) -> Result<Vec<(f64, f64)>> {
    match *spec {
        NoiseSpec::Uniform { halfwidth: h } => {
            let mut cuts = vec![-h, h];
            for shift in [beta1 - cstar, beta1 + cstar] {
                for edge in [-h, h] {
                    let c = shift + edge;
                    if c > -h && c < h {
                        cuts.push(c);
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            let base = quadrature::gauss_legendre(order);
            let density = 1.0 / (2.0 * h);
            let mut rule = Vec::with_capacity(base.len() * (cuts.len() - 1));
            for piece in cuts.windows(2) {
                let (lo, hi) = (piece[0], piece[1]);
                let mid = 0.5 * (lo + hi);
                let half = 0.5 * (hi - lo);
                rule.extend(base.iter().map(|&(t, w)| (mid + half * t, w * half * density)));
            }
            Ok(rule)
        }
        _ => noise::quadrature_nodes(spec, order),
    }
}

/// `E[q_branch(eps0, eps1)]` where the integrand is quadratic in `eps1` on each branch.
fn expect_continuous<F>(spec: &NoiseSpec, beta1: f64, penalty: &PenaltyParams, integrand: F) -> Result<f64>
where
    F: Fn(Branch, f64) -> Quadratic,
{
    let cstar = selection_threshold(penalty);
    let mut total = 0.0;
    for (eps0, w) in outer_rule(spec, beta1, cstar, DEFAULT_QUADRATURE_ORDER)? {
        // Upper branch: eps1 >= eps0 - beta1 + c*; lower: eps1 <= eps0 - beta1 - c*.
        let upper_cut = eps0 - beta1 + cstar;
        let lower_cut = eps0 - beta1 - cstar;
        let pieces = [
            (Branch::Lower, f64::NEG_INFINITY, lower_cut),
            (Branch::Excluded, lower_cut, upper_cut),
            (Branch::Upper, upper_cut, f64::INFINITY),
        ];
        let mut inner = 0.0;
        for (branch, a, b) in pieces {
            let moments = spec.partial_moments(a, b).expect("continuous spec");
            inner += integrand(branch, eps0).against(moments);
        }
        total += w * inner;
    }
    Ok(total)
}

fn branch_of(z: f64, cstar: f64) -> Branch {
    if z >= cstar {
        Branch::Upper
    } else if z <= -cstar {
        Branch::Lower
    } else {
        Branch::Excluded
    }
}

fn require_replicates(n: u32) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("replicate count n must be >= 1".into()));
    }
    Ok(())
}

fn continuous_single(noise: &NoiseSpec, n: u32) -> Result<()> {
    if n != 1 {
        return Err(Error::Unsupported(format!(
            "{noise} is continuous; only n = 1 is supported (got n = {n})"
        )));
    }
    Ok(())
}

/// `E[(b0 + b1 r - f(x))^2]` over the noise, where `(b0, b1)` is the
/// closed-form fit to the replicate means.
pub fn expected_loss(
    pair: ReportPair,
    model: &ModelParams,
    noise: &NoiseSpec,
    penalty: &PenaltyParams,
    n: u32,
) -> Result<f64> {
    require_replicates(n)?;
    let beta1 = model.beta1;
    let target = beta1 * bit(pair.x);
    if noise.is_discrete() {
        let mut total = 0.0;
        for o in noise::joint_support(noise, n)? {
            let est = fit(&Sample::new(o.eps0, beta1 + o.eps1, n)?, penalty);
            let err = est.action(pair.r) - target;
            total += o.prob * err * err;
        }
        return Ok(total);
    }
    continuous_single(noise, n)?;
    let rho = bit(pair.r) - 0.5;
    let base = beta1 * (0.5 - bit(pair.x));
    let c1 = penalty.c1();
    expect_continuous(noise, beta1, penalty, |branch, eps0| {
        // err = base + (eps0 + eps1)/2 + rho * b1
        let (sa, sb) = slope_affine(branch, beta1, eps0, c1);
        let err = (base + 0.5 * eps0 + rho * sa, 0.5 + rho * sb);
        Quadratic::product(err, err)
    })
}

/// `expected_loss(x -> 1-x) - expected_loss(x -> x)`. Negative means the
/// misreport strictly helps at this `beta`.
pub fn loss_gap(x: bool, model: &ModelParams, noise: &NoiseSpec, penalty: &PenaltyParams, n: u32) -> Result<f64> {
    let deviation = expected_loss(ReportPair::deviation(x), model, noise, penalty, n)?;
    let truth = expected_loss(ReportPair::truthful(x), model, noise, penalty, n)?;
    Ok(deviation - truth)
}

/// Loss gap through the reduced pivotal-event form: `E[b1 (beta1 - S); pivotal]`
/// for `x = 1` and `E[b1 (beta1 + S); pivotal]` for `x = 0`, with `S = eps0 + eps1`.
pub fn loss_gap_reduced(
    x: bool,
    model: &ModelParams,
    noise: &NoiseSpec,
    penalty: &PenaltyParams,
    n: u32,
) -> Result<f64> {
    require_replicates(n)?;
    let beta1 = model.beta1;
    let sign = if x { -1.0 } else { 1.0 };
    if noise.is_discrete() {
        let mut total = 0.0;
        for o in noise::joint_support(noise, n)? {
            let est = fit(&Sample::new(o.eps0, beta1 + o.eps1, n)?, penalty);
            if est.included {
                total += o.prob * est.b1 * (beta1 + sign * (o.eps0 + o.eps1));
            }
        }
        return Ok(total);
    }
    continuous_single(noise, n)?;
    let c1 = penalty.c1();
    expect_continuous(noise, beta1, penalty, |branch, eps0| {
        let slope = slope_affine(branch, beta1, eps0, c1);
        Quadratic::product(slope, (beta1 + sign * eps0, sign))
    })
}

/// Probability that the slope is selected at this `beta1`, for any noise law.
pub fn pivot_probability(model: &ModelParams, noise: &NoiseSpec, penalty: &PenaltyParams, n: u32) -> Result<f64> {
    require_replicates(n)?;
    let cstar = selection_threshold(penalty);
    let diff = noise::difference_distribution(noise, n)?;
    Ok(diff.outside_prob(-cstar - model.beta1, cstar - model.beta1))
}

/// Pivot probability and conditional means on the pivotal event, by exact enumeration.
pub fn pivotal_stats(model: &ModelParams, noise: &NoiseSpec, penalty: &PenaltyParams, n: u32) -> Result<PivotalStats> {
    require_replicates(n)?;
    if !noise.is_discrete() {
        return Err(Error::Unsupported(format!(
            "pivotal statistics need discrete noise, got {noise}"
        )));
    }
    let beta1 = model.beta1;
    let cstar = selection_threshold(penalty);
    let (mut mass, mut b1_sum, mut stat_sum) = (0.0, 0.0, 0.0);
    for o in noise::joint_support(noise, n)? {
        let branch = branch_of(beta1 + o.eps1 - o.eps0, cstar);
        if branch == Branch::Excluded {
            continue;
        }
        let (sa, sb) = slope_affine(branch, beta1, o.eps0, penalty.c1());
        let stat = -beta1 * beta1 + 2.0 * beta1 * o.eps0 + o.eps1 * o.eps1 - o.eps0 * o.eps0;
        mass += o.prob;
        b1_sum += o.prob * (sa + sb * o.eps1);
        stat_sum += o.prob * stat;
    }
    let conditional = |sum: f64| (mass > 0.0).then(|| sum / mass);
    Ok(PivotalStats {
        pivot_prob: mass,
        cond_mean_b1: conditional(b1_sum),
        cond_ic_statistic: conditional(stat_sum),
    })
}

/// Seed used by [`monte_carlo_loss`] unless the caller picks one.
pub const DEFAULT_MC_SEED: u64 = 0x5e1_c0de;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: usize,
    pub seed: u64,
}

/// Simulated expected loss for one replicate per design point; a cross-check
/// on the quadrature path for continuous noise.
pub fn monte_carlo_loss(
    pair: ReportPair,
    model: &ModelParams,
    noise: &NoiseSpec,
    penalty: &PenaltyParams,
    draws: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if draws < 2 {
        return Err(Error::InvalidParameter("monte carlo needs at least 2 draws".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sampler: Box<dyn FnMut(&mut ChaCha8Rng) -> f64> = match noise {
        NoiseSpec::Gaussian { sigma } => {
            let d = Normal::new(0.0, *sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Box::new(move |rng| d.sample(rng))
        }
        NoiseSpec::Uniform { halfwidth } => {
            let d =
                Uniform::new_inclusive(-halfwidth, *halfwidth).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Box::new(move |rng| d.sample(rng))
        }
        discrete => {
            let marginal = noise::sample_mean_distribution(discrete, 1)?;
            let atoms = marginal.atoms().to_vec();
            let unit = Uniform::new(0.0, 1.0).expect("unit interval");
            Box::new(move |rng| {
                let u: f64 = unit.sample(rng);
                let mut acc = 0.0;
                for a in &atoms {
                    acc += a.prob;
                    if u < acc {
                        return a.value;
                    }
                }
                atoms.last().map_or(0.0, |a| a.value)
            })
        }
    };
    let target = model.beta1 * bit(pair.x);
    // Welford running moments.
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..draws {
        let eps0 = sampler(&mut rng);
        let eps1 = sampler(&mut rng);
        let est = fit(&Sample::single(eps0, model.beta1 + eps1)?, penalty);
        let err = est.action(pair.r) - target;
        let v = err * err;
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    let variance = m2 / (draws - 1) as f64;
    Ok(MonteCarloEstimate {
        mean,
        std_error: (variance / draws as f64).sqrt(),
        draws,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model(beta1: f64) -> ModelParams {
        ModelParams::new(0.0, beta1).unwrap()
    }

    fn pen(c0: f64, c1: f64) -> PenaltyParams {
        PenaltyParams::new(c0, c1).unwrap()
    }

    fn bern() -> NoiseSpec {
        NoiseSpec::bernoulli(0.75).unwrap()
    }

    /// Four-outcome hand enumeration for the Bernoulli(0.75) example with
    /// beta = (0, 1), c0 = 8, c1 = 0. Threshold c* = 4; only (eps0, eps1) =
    /// (-1, 3) has |1 + eps1 - eps0| >= 4.
    fn hand_enumerated_losses() -> (f64, f64) {
        let outcomes = [
            (-1.0, -1.0, 0.5625),
            (-1.0, 3.0, 0.1875),
            (3.0, -1.0, 0.1875),
            (3.0, 3.0, 0.0625),
        ];
        let (mut truth, mut lie) = (0.0, 0.0);
        for (e0, e1, p) in outcomes {
            let (y0, y1): (f64, f64) = (e0, 1.0 + e1);
            let b1 = if (y1 - y0).abs() >= 4.0 { y1 - y0 } else { 0.0 };
            let b0 = 0.5 * (y0 + y1 - b1);
            truth += p * (b0 + b1 - 1.0).powi(2);
            lie += p * (b0 - 1.0).powi(2);
        }
        (truth, lie)
    }

    #[test]
    fn bernoulli_example_losses() {
        let (truth, lie) = hand_enumerated_losses();
        assert_eq!(truth, 3.390625);
        assert_eq!(lie, 2.453125);
        let got = expected_loss(ReportPair::truthful(true), &model(1.0), &bern(), &pen(8.0, 0.0), 1).unwrap();
        assert!((got - 3.390625).abs() < 1e-12);
        let gap = loss_gap(true, &model(1.0), &bern(), &pen(8.0, 0.0), 1).unwrap();
        assert!((gap + 0.9375).abs() < 1e-12);
        let reduced = loss_gap_reduced(true, &model(1.0), &bern(), &pen(8.0, 0.0), 1).unwrap();
        assert!((reduced + 0.9375).abs() < 1e-12);
    }

    #[test]
    fn degenerate_noise_below_threshold() {
        // |beta1| < c*: slope excluded, b0 = beta0 + beta1/2.
        let b1 = 1.5;
        let loss = expected_loss(
            ReportPair::truthful(true),
            &model(b1),
            &NoiseSpec::Degenerate,
            &pen(2.0, 0.0),
            1,
        )
        .unwrap();
        assert_eq!(loss, (b1 / 2.0) * (b1 / 2.0));
    }

    #[test]
    fn zero_penalty_gap_is_beta1_squared() {
        let spec = NoiseSpec::discrete(vec![(-2.0, 0.2), (0.5, 0.8)]).unwrap();
        for b in [-2.0, 0.3, 1.0, 4.0] {
            for x in [false, true] {
                let gap = loss_gap(x, &model(b), &spec, &PenaltyParams::zero(), 1).unwrap();
                assert!((gap - b * b).abs() < 1e-10, "x={x} beta1={b}: {gap}");
            }
        }
    }

    #[test]
    fn pivotal_stats_bernoulli_example() {
        let stats = pivotal_stats(&model(1.0), &bern(), &pen(8.0, 0.0), 1).unwrap();
        assert_eq!(stats.pivot_prob, 0.1875);
        assert_eq!(stats.cond_ic_statistic, Some(5.0));
        assert_eq!(stats.cond_mean_b1, Some(5.0));
    }

    #[test]
    fn pivotal_stats_zero_penalty() {
        let spec = NoiseSpec::discrete(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        for b in [0.5, 2.0] {
            let stats = pivotal_stats(&model(b), &spec, &PenaltyParams::zero(), 1).unwrap();
            assert_eq!(stats.pivot_prob, 1.0);
            assert!((stats.cond_ic_statistic.unwrap() + b * b).abs() < 1e-12);
        }
        let stats = pivotal_stats(&model(1.0), &bern(), &PenaltyParams::zero(), 3).unwrap();
        assert!((stats.pivot_prob - 1.0).abs() < 1e-12);
        assert!((stats.cond_ic_statistic.unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pivotal_stats_empty_event() {
        // Max |beta1 + diff| = 1 + 4 = 5 < c* = 6.
        let stats = pivotal_stats(&model(1.0), &bern(), &pen(18.0, 0.0), 1).unwrap();
        assert_eq!(stats.pivot_prob, 0.0);
        assert_eq!(stats.cond_mean_b1, None);
        assert_eq!(stats.cond_ic_statistic, None);
        assert_eq!(loss_gap(true, &model(1.0), &bern(), &pen(18.0, 0.0), 1).unwrap(), 0.0);
        assert_eq!(
            loss_gap_reduced(true, &model(1.0), &bern(), &pen(18.0, 0.0), 1).unwrap(),
            0.0
        );
    }

    #[test]
    fn symmetric_noise_zero_slope_gives_zero_gap() {
        let spec = NoiseSpec::discrete(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        for p in [pen(0.0, 0.0), pen(1.0, 0.5), pen(0.1, 0.0)] {
            for x in [false, true] {
                assert_eq!(loss_gap_reduced(x, &model(0.0), &spec, &p, 1).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn continuous_rejects_replicates() {
        let g = NoiseSpec::gaussian(1.0).unwrap();
        assert!(matches!(
            expected_loss(ReportPair::truthful(true), &model(1.0), &g, &pen(1.0, 0.0), 2),
            Err(Error::Unsupported(_))
        ));
        assert!(pivotal_stats(&model(1.0), &g, &pen(1.0, 0.0), 1).is_err());
    }

    #[test]
    fn continuous_paths_agree() {
        for noise in [NoiseSpec::gaussian(1.0).unwrap(), NoiseSpec::uniform(1.5).unwrap()] {
            for (b, c0, c1) in [(0.0, 1.0, 0.5), (1.0, 1.0, 0.5), (2.5, 0.5, 0.0), (0.7, 2.0, 1.0)] {
                for x in [false, true] {
                    let full = loss_gap(x, &model(b), &noise, &pen(c0, c1), 1).unwrap();
                    let reduced = loss_gap_reduced(x, &model(b), &noise, &pen(c0, c1), 1).unwrap();
                    assert!(
                        (full - reduced).abs() < 1e-10,
                        "{noise} {b} {c0} {c1}: {full} vs {reduced}"
                    );
                }
            }
        }
    }

    #[test]
    fn continuous_zero_penalty_gap_is_beta1_squared() {
        for noise in [NoiseSpec::gaussian(0.8).unwrap(), NoiseSpec::uniform(1.0).unwrap()] {
            let gap = loss_gap(true, &model(1.3), &noise, &PenaltyParams::zero(), 1).unwrap();
            assert!((gap - 1.69).abs() < 1e-10, "{noise}: {gap}");
        }
    }

    #[test]
    fn continuous_unpenalized_loss_is_variance() {
        // No penalty: a - f(x) = eps_x on truthful reports.
        let g = NoiseSpec::gaussian(1.3).unwrap();
        let loss = expected_loss(ReportPair::truthful(true), &model(0.4), &g, &PenaltyParams::zero(), 1).unwrap();
        assert!((loss - 1.69).abs() < 1e-12);
        let u = NoiseSpec::uniform(1.5).unwrap();
        let loss = expected_loss(ReportPair::truthful(false), &model(0.4), &u, &PenaltyParams::zero(), 1).unwrap();
        assert!((loss - 0.75).abs() < 1e-12);
    }

    #[test]
    fn pivot_probability_matches_enumeration() {
        let p = pivot_probability(&model(1.0), &bern(), &pen(8.0, 0.0), 1).unwrap();
        assert_eq!(p, 0.1875);
        let g = pivot_probability(
            &model(0.0),
            &NoiseSpec::gaussian(1.0).unwrap(),
            &PenaltyParams::zero(),
            1,
        )
        .unwrap();
        assert!((g - 1.0).abs() < 1e-15);
    }

    fn discrete_noise() -> impl Strategy<Value = NoiseSpec> {
        (0.1f64..3.0, 0.1f64..3.0, 0.05f64..0.45, 0.05f64..0.45).prop_map(|(a, b, pa, pb)| {
            let neg = -(a * pa - b * pb) / (1.0 - pa - pb);
            NoiseSpec::discrete(vec![(a, pa), (-b, pb), (neg, 1.0 - pa - pb)]).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn reduced_path_matches_full(
            noise in discrete_noise(), beta1 in -4.0f64..4.0, c0 in 0.0f64..4.0, c1 in 0.0f64..1.0,
            n in 1u32..4, x in any::<bool>(),
        ) {
            let m = model(beta1);
            let p = pen(c0, c1);
            let full = loss_gap(x, &m, &noise, &p, n).unwrap();
            let reduced = loss_gap_reduced(x, &m, &noise, &p, n).unwrap();
            prop_assert!((full - reduced).abs() < 1e-10, "{} vs {}", full, reduced);
        }

        #[test]
        fn gaps_ignore_intercept(
            noise in discrete_noise(), beta0 in -50.0f64..50.0, beta1 in -4.0f64..4.0,
            c0 in 0.0f64..4.0, c1 in 0.0f64..1.0, x in any::<bool>(),
        ) {
            let p = pen(c0, c1);
            let a = loss_gap(x, &ModelParams::new(0.0, beta1).unwrap(), &noise, &p, 1).unwrap();
            let b = loss_gap(x, &ModelParams::new(beta0, beta1).unwrap(), &noise, &p, 1).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn unpenalized_gap_identity(noise in discrete_noise(), beta1 in -4.0f64..4.0, x in any::<bool>()) {
            let gap = loss_gap(x, &model(beta1), &noise, &PenaltyParams::zero(), 1).unwrap();
            prop_assert!((gap - beta1 * beta1).abs() < 1e-10);
        }

        #[test]
        fn no_noise_never_rewards_lying(
            beta1 in -6.0f64..6.0, c0 in 0.0f64..8.0, c1 in 0.0f64..2.0, x in any::<bool>(),
        ) {
            let gap = loss_gap(x, &model(beta1), &NoiseSpec::Degenerate, &pen(c0, c1), 1).unwrap();
            prop_assert!(gap >= 0.0);
        }
    }
}
