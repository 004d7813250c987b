//! Incentive-compatibility verdicts.
//!
//! A deviation is a misreport `x -> 1 - x`. Its margin is
//! `loss(deviation) - loss(truth)`; the deviation violates incentive
//! compatibility when the margin is below `-tolerance`, where the tolerance
//! depends on how the losses were computed.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{ModelParams, PenaltyParams};
use crate::noise::{NoiseSpec, MASS_TOL};
use crate::payoff::{expected_loss, pivot_probability, ReportPair};

/// How expected losses were evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Exact enumeration over a finite joint law.
    Exact,
    /// Boundary-split Gauss quadrature.
    Quadrature,
}

impl Backend {
    pub fn for_noise(noise: &NoiseSpec) -> Self {
        if noise.is_discrete() {
            Self::Exact
        } else {
            Self::Quadrature
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Self::Exact => 1e-12,
            Self::Quadrature => 1e-7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationRecord {
    pub x: bool,
    pub r: bool,
    pub loss_truth: f64,
    pub loss_deviation: f64,
    /// `loss_deviation - loss_truth`.
    pub margin: f64,
    pub violated: bool,
    /// The slope is never selected, so the report cannot move the action.
    pub trivial: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IcReport {
    pub backend: Backend,
    pub tolerance: f64,
    /// `x = 1 -> r = 0` first, then `x = 0 -> r = 1`.
    pub deviations: Vec<DeviationRecord>,
    pub ic: bool,
}

impl IcReport {
    fn from_records(backend: Backend, deviations: Vec<DeviationRecord>) -> Self {
        let ic = deviations.iter().all(|d| !d.violated);
        Self {
            backend,
            tolerance: backend.tolerance(),
            deviations,
            ic,
        }
    }

    pub fn deviation(&self, x: bool) -> &DeviationRecord {
        self.deviations
            .iter()
            .find(|d| d.x == x)
            .expect("report holds both deviations")
    }
}

const DEVIATION_ORDER: [bool; 2] = [true, false];

/// Both single-bit deviations at a fixed `beta`.
pub fn ic_at_beta(model: &ModelParams, noise: &NoiseSpec, penalty: &PenaltyParams, n: u32) -> Result<IcReport> {
    let backend = Backend::for_noise(noise);
    let tol = backend.tolerance();
    let trivial = pivot_probability(model, noise, penalty, n)? == 0.0;
    let mut records = Vec::with_capacity(2);
    for x in DEVIATION_ORDER {
        let loss_truth = expected_loss(ReportPair::truthful(x), model, noise, penalty, n)?;
        let loss_deviation = expected_loss(ReportPair::deviation(x), model, noise, penalty, n)?;
        let margin = if trivial { 0.0 } else { loss_deviation - loss_truth };
        records.push(DeviationRecord {
            x,
            r: !x,
            loss_truth,
            loss_deviation,
            margin,
            violated: margin < -tol,
            trivial,
        });
    }
    Ok(IcReport::from_records(backend, records))
}

/// Finite-support prior over the true coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorOverBeta {
    atoms: Vec<(ModelParams, f64)>,
}

impl PriorOverBeta {
    pub fn new(atoms: Vec<(ModelParams, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("prior must have at least one atom".into()));
        }
        if atoms.iter().any(|(_, w)| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidParameter("prior weights must lie in [0, 1]".into()));
        }
        let mass: f64 = atoms.iter().map(|(_, w)| w).sum();
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidParameter(format!("prior weights sum to {mass}, not 1")));
        }
        Ok(Self { atoms })
    }

    pub fn point_mass(model: ModelParams) -> Self {
        Self {
            atoms: vec![(model, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(ModelParams, f64)] {
        &self.atoms
    }
}

/// Deviations evaluated under the prior: every loss and margin is the prior-weighted
/// sum of its per-`beta` value.
pub fn ic_at_prior(prior: &PriorOverBeta, noise: &NoiseSpec, penalty: &PenaltyParams, n: u32) -> Result<IcReport> {
    let backend = Backend::for_noise(noise);
    let tol = backend.tolerance();
    let mut acc: Vec<DeviationRecord> = DEVIATION_ORDER
        .iter()
        .map(|&x| DeviationRecord {
            x,
            r: !x,
            loss_truth: 0.0,
            loss_deviation: 0.0,
            margin: 0.0,
            violated: false,
            trivial: true,
        })
        .collect();
    for (model, w) in &prior.atoms {
        let report = ic_at_beta(model, noise, penalty, n)?;
        for (total, d) in acc.iter_mut().zip(&report.deviations) {
            total.loss_truth += w * d.loss_truth;
            total.loss_deviation += w * d.loss_deviation;
            total.margin += w * d.margin;
            total.trivial &= d.trivial;
        }
    }
    for d in &mut acc {
        d.violated = d.margin < -tol;
    }
    Ok(IcReport::from_records(backend, acc))
}

/// Region of `(beta1, c0)` displayed for the Bernoulli(`d`) example with `c1 = 0`:
/// `-(d+1) < sqrt(2 c0) - beta1 < d+1` and `beta1 < d-1`.
///
/// Intended for `beta1 > 0`, `c0 > 0`, `d > 1`. This region is wider than the
/// set where the pivotal event is exactly `{(eps0, eps1) = (-1, d)}`; see
/// [`bernoulli_refined_region`].
pub fn bernoulli_paper_region(beta1: f64, c0: f64, d: f64) -> bool {
    let gap = (2.0 * c0).sqrt() - beta1;
    -(d + 1.0) < gap && gap < d + 1.0 && beta1 < d - 1.0
}

/// Parameters for which the only selected outcome is `eps1 = d, eps0 = -1`
/// (single replicate, `c1 = 0`) and the misreport pays: `diff = 0` and
/// `diff = -(d+1)` are both excluded, `diff = d+1` is included, and `beta1 < d - 1`.
pub fn bernoulli_refined_region(beta1: f64, c0: f64, d: f64) -> bool {
    let two_c0 = 2.0 * c0;
    let below = (d + 1.0 - beta1).powi(2);
    let top = (beta1 + d + 1.0).powi(2);
    two_c0 > (beta1 * beta1).max(below) && two_c0 <= top && beta1 < d - 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteWorst {
    pub beta1: f64,
    pub c0: f64,
    pub c1: f64,
    pub x: bool,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoiseSuiteSummary {
    pub noise: String,
    pub backend: Backend,
    pub tolerance: f64,
    pub points: usize,
    pub violations: usize,
    /// Smallest margin over all points and both deviations.
    pub worst: Option<SuiteWorst>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub per_noise: Vec<NoiseSuiteSummary>,
}

impl SuiteReport {
    pub fn total_violations(&self) -> usize {
        self.per_noise.iter().map(|s| s.violations).sum()
    }

    pub fn min_margin(&self) -> Option<f64> {
        self.per_noise
            .iter()
            .filter_map(|s| s.worst.as_ref().map(|w| w.margin))
            .min_by(f64::total_cmp)
    }
}

/// [`ic_at_beta`] over `noise_family x beta1_grid x penalty_grid` for
/// symmetric noise laws (single replicate). Asymmetric laws are rejected.
pub fn symmetric_suite(
    noise_family: &[NoiseSpec],
    beta1_grid: &[f64],
    penalty_grid: &[PenaltyParams],
) -> Result<SuiteReport> {
    if let Some(bad) = noise_family.iter().find(|s| !s.is_symmetric()) {
        return Err(Error::InvalidParameter(format!("{bad} is not symmetric about zero")));
    }
    let mut per_noise = Vec::with_capacity(noise_family.len());
    for noise in noise_family {
        let backend = Backend::for_noise(noise);
        let mut summary = NoiseSuiteSummary {
            noise: noise.to_string(),
            backend,
            tolerance: backend.tolerance(),
            points: 0,
            violations: 0,
            worst: None,
        };
        for &beta1 in beta1_grid {
            let model = ModelParams::new(0.0, beta1)?;
            for penalty in penalty_grid {
                let report = ic_at_beta(&model, noise, penalty, 1)?;
                summary.points += 1;
                for d in &report.deviations {
                    if d.violated {
                        summary.violations += 1;
                    }
                    if summary.worst.as_ref().is_none_or(|w| d.margin < w.margin) {
                        summary.worst = Some(SuiteWorst {
                            beta1,
                            c0: penalty.c0(),
                            c1: penalty.c1(),
                            x: d.x,
                            margin: d.margin,
                        });
                    }
                }
            }
        }
        per_noise.push(summary);
    }
    Ok(SuiteReport { per_noise })
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

    #[test]
    fn bernoulli_example_violates() {
        let report = ic_at_beta(&model(1.0), &bern(), &pen(8.0, 0.0), 1).unwrap();
        assert!(!report.ic);
        let dev = report.deviation(true);
        assert!(dev.violated);
        assert!((dev.margin + 0.9375).abs() < 1e-12);
        assert_eq!(report.backend, Backend::Exact);
    }

    #[test]
    fn gaussian_example_is_ic() {
        let report = ic_at_beta(&model(1.0), &NoiseSpec::gaussian(1.0).unwrap(), &pen(1.0, 0.5), 1).unwrap();
        assert!(report.ic);
        assert_eq!(report.tolerance, 1e-7);
    }

    #[test]
    fn degenerate_is_ic() {
        for (b, c0, c1) in [(5.0, 2.0, 1.0), (0.5, 3.0, 0.0), (-2.0, 0.0, 1.5)] {
            assert!(
                ic_at_beta(&model(b), &NoiseSpec::Degenerate, &pen(c0, c1), 1)
                    .unwrap()
                    .ic
            );
        }
    }

    #[test]
    fn trivial_when_never_selected() {
        let report = ic_at_beta(&model(1.0), &bern(), &pen(18.0, 0.0), 1).unwrap();
        assert!(report.ic);
        assert!(report.deviations.iter().all(|d| d.trivial && d.margin == 0.0));
    }

    #[test]
    fn point_mass_prior_matches_beta() {
        let m = model(1.0);
        let at_beta = ic_at_beta(&m, &bern(), &pen(8.0, 0.0), 1).unwrap();
        let at_prior = ic_at_prior(&PriorOverBeta::point_mass(m), &bern(), &pen(8.0, 0.0), 1).unwrap();
        assert_eq!(at_beta, at_prior);

        let dup = PriorOverBeta::new(vec![(m, 0.5), (m, 0.5)]).unwrap();
        let at_dup = ic_at_prior(&dup, &bern(), &pen(8.0, 0.0), 1).unwrap();
        for (a, b) in at_beta.deviations.iter().zip(&at_dup.deviations) {
            assert_eq!(a.margin, b.margin);
        }
    }

    #[test]
    fn two_point_prior() {
        // beta1 = 10: every outcome is selected (|10 + diff| >= 6 > 4), so the gap is beta1^2 = 100.
        let far = ic_at_beta(&model(10.0), &bern(), &pen(8.0, 0.0), 1).unwrap();
        assert!((far.deviation(true).margin - 100.0).abs() < 1e-12);
        let prior = PriorOverBeta::new(vec![(model(1.0), 0.5), (model(10.0), 0.5)]).unwrap();
        let report = ic_at_prior(&prior, &bern(), &pen(8.0, 0.0), 1).unwrap();
        assert!((report.deviation(true).margin - 49.53125).abs() < 1e-12);
        assert!(report.ic);
    }

    #[test]
    fn prior_validation() {
        assert!(PriorOverBeta::new(vec![]).is_err());
        assert!(PriorOverBeta::new(vec![(model(1.0), 0.4)]).is_err());
    }

    #[test]
    fn paper_region_examples() {
        assert!(bernoulli_paper_region(1.0, 8.0, 3.0));
        assert!(!bernoulli_paper_region(3.0, 8.0, 3.0));
        // Inside the displayed region, yet every diff is selected and the estimator is unpenalized.
        assert!(bernoulli_paper_region(1.5, 0.72, 3.0));
        let report = ic_at_beta(&model(1.5), &bern(), &pen(0.72, 0.0), 1).unwrap();
        assert!(report.ic);
        assert!((report.deviation(true).margin - 2.25).abs() < 1e-12);
    }

    #[test]
    fn refined_region_examples() {
        assert!(bernoulli_refined_region(1.0, 8.0, 3.0));
        assert!(!bernoulli_refined_region(1.0, 4.0, 3.0));
        assert!(!bernoulli_refined_region(1.0, 13.0, 3.0));
    }

    #[test]
    fn suite_rejects_asymmetric() {
        assert!(symmetric_suite(&[bern()], &[1.0], &[pen(1.0, 0.0)]).is_err());
    }

    #[test]
    fn suite_on_empty_grid() {
        let report = symmetric_suite(&[], &[], &[]).unwrap();
        assert!(report.per_noise.is_empty());
        let report = symmetric_suite(&[NoiseSpec::Degenerate], &[], &[]).unwrap();
        assert_eq!(report.per_noise[0].points, 0);
        assert_eq!(report.min_margin(), None);
    }

    #[test]
    fn suite_symmetric_discrete_has_no_violations() {
        let noise = NoiseSpec::discrete(vec![(-1.0, 0.5), (1.0, 0.5)]).unwrap();
        let betas: Vec<f64> = (0..=8).map(|i| 0.5 * f64::from(i)).collect();
        let penalties: Vec<PenaltyParams> = [0.0, 0.5, 1.0, 2.0]
            .iter()
            .flat_map(|&c0| [0.0, 0.5].map(|c1| pen(c0, c1)))
            .collect();
        let report = symmetric_suite(&[noise], &betas, &penalties).unwrap();
        assert_eq!(report.per_noise[0].points, 72);
        assert_eq!(report.total_violations(), 0);
        assert!(report.min_margin().unwrap() >= -1e-12);
    }

    fn symmetric_discrete() -> impl Strategy<Value = NoiseSpec> {
        (0.1f64..3.0, 0.1f64..3.0, 0.05f64..0.45)
            .prop_map(|(a, b, pa)| NoiseSpec::discrete(vec![(-a, pa), (a, pa), (-b, 0.5 - pa), (b, 0.5 - pa)]).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn refined_region_implies_violation(p in 0.55f64..0.95, u in 0.01f64..0.99, t in 0.001f64..1.0) {
            let noise = NoiseSpec::bernoulli(p).unwrap();
            let d = p / (1.0 - p);
            let beta1 = u * (d - 1.0);
            let lo = (beta1 * beta1).max((d + 1.0 - beta1).powi(2));
            let hi = (beta1 + d + 1.0).powi(2);
            let c0 = 0.5 * (lo + t * (hi - lo));
            prop_assume!(bernoulli_refined_region(beta1, c0, d));
            let report = ic_at_beta(&model(beta1), &noise, &pen(c0, 0.0), 1).unwrap();
            let margin = report.deviation(true).margin;
            let closed = -p * (1.0 - p) * (beta1 + d + 1.0) * (d - 1.0 - beta1);
            prop_assert!(report.deviation(true).violated);
            prop_assert!((margin - closed).abs() < 1e-10, "{} vs {}", margin, closed);
        }

        #[test]
        fn symmetric_discrete_never_violates(
            noise in symmetric_discrete(), beta1 in -4.0f64..4.0, c0 in 0.0f64..4.0, c1 in 0.0f64..1.0,
        ) {
            let report = ic_at_beta(&model(beta1), &noise, &pen(c0, c1), 1).unwrap();
            prop_assert!(report.ic, "{:?}", report);
        }

        #[test]
        fn sign_flip_swaps_deviations(
            noise in symmetric_discrete(), beta1 in 0.0f64..4.0, c0 in 0.0f64..4.0, c1 in 0.0f64..1.0,
        ) {
            let p = pen(c0, c1);
            let pos = ic_at_beta(&model(beta1), &noise, &p, 1).unwrap();
            let neg = ic_at_beta(&model(-beta1), &noise, &p, 1).unwrap();
            prop_assert!((pos.deviation(true).margin - neg.deviation(false).margin).abs() < 1e-12);
            prop_assert!((pos.deviation(false).margin - neg.deviation(true).margin).abs() < 1e-12);
        }
    }
}
