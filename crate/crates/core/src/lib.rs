//! Penalized two-point regression and the agent's incentive to misreport.
//!
//! A statistician fits `y = b0 + b1 x` to one (or `n`) noisy observations at
//! `x = 0` and `x = 1`, charging a fixed L0 cost `c0` and an L1 cost `c1` for
//! a nonzero slope. An agent who knows their own `x` reports `r` and receives
//! the action `b0 + b1 r`. The modules here compute the estimator, the exact
//! distribution of the noise it sees, the agent's expected quadratic loss for
//! every report, incentive-compatibility verdicts, and the large-sample
//! behaviour of the pivotal event in which the slope is selected.

pub mod asymptotics;
pub mod error;
pub mod estimator;
pub mod ic;
pub mod noise;
pub mod payoff;

pub use error::{Error, Result};
pub use estimator::{Estimate, GridSpec, ModelParams, PenaltyParams, Sample};
pub use noise::{DifferenceDistribution, DiscreteDistribution, NoiseSpec};
pub use payoff::{PivotalStats, ReportPair};
