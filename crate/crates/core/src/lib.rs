//! Structured noise for regression responses.
//!
//! Given a dataset (design matrix with intercept, response vector), this crate
//! builds an additive noise vector for the response whose direction is pinned
//! to the span of the OLS residual and a random vector orthogonalized against
//! both the design and the residual. Because the noise is orthogonal to the
//! design columns, the OLS coefficient vector of the perturbed response equals
//! the original one exactly; the amplitude parameter `a` and the mix parameter
//! `b` control what happens to the t-values and the coefficient of
//! determination. With `a = -2` both are preserved for every `b >= 0`, while
//! the correlation between the original and perturbed responses drops as `b`
//! shrinks. With `a = -1 + sqrt(b + 2)` the t-values shrink by `1/sqrt(2)`.
//!
//! The crate also carries the supporting machinery: closed-form predictions
//! for the perturbed statistics, a Chow test with a self-contained F
//! distribution, a Monte Carlo protocol that picks `b` by testing structural
//! stability on random subsamples, and a synthetic dataset generator shaped
//! like a hedonic housing regression for experiments and tests.

pub mod calibrate;
pub mod chow;
pub mod dataset;
pub mod error;
pub mod fdist;
pub mod noise;
pub mod regression;
pub mod seed;
pub mod synth;
pub mod theory;

// Downstream crates (the CLI) build DMatrix/DVector values to hand to this
// API; re-exporting nalgebra keeps them on the same version.
pub use nalgebra;

pub use calibrate::{
    recommend_b, run_calibration, CalibrationCell, CalibrationPlan, CalibrationReport, NoiseScope,
    PERCENTILE_LEVELS,
};
pub use chow::{chow_test, ChowResult};
pub use dataset::Dataset;
pub use error::{Error, Result};
pub use fdist::{f_cdf, f_quantile};
pub use noise::{
    draw_direction, make_noise, orthogonalize, pearson, perturb, NoiseSpec, PerturbedRelease,
    PositivityPolicy,
};
pub use regression::{fit_ols, residual_projector_apply, RegressionFit};
pub use synth::{generate_synthetic, SynthColumn, SynthSpec};
pub use theory::{
    correlation_grid, empirical_t_ratios, predict, reduced_accuracy_params, verify_release,
    TheoryPrediction, VerificationEntry, VerificationReport,
};
