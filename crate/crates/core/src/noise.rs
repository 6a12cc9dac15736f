//! The noise engine.
//!
//! For a fitted response `y = y_hat + e` the released value is `y + eps` with
//!
//! ```text
//! eps = (a ||e|| / (1 + b)) * (e / ||e|| + sqrt(b) * u / ||u||)
//! ```
//!
//! where `u` is a random vector orthogonalized against the design columns and
//! the residual. By construction `X' eps = 0`, so the coefficient vector of
//! the released response equals the original one for every admissible `(a, b)`.
//! `a = -2` additionally preserves every t-value and R^2. When `b = 0` the
//! engine takes the closed form `eps = a * e` and never touches `u`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::regression::{fit_ols, residual_projector_apply, RegressionFit};
use crate::seed::{derive_rng, Domain};

/// `||u|| <= DEGENERACY_TOL * ||v||` declares the orthogonalized direction
/// degenerate. A random v keeps O(1) of its norm; a v inside the span of the
/// design and the residual keeps O(eps). Anything near the threshold would
/// amplify rounding noise through the division by `||u||`.
const DEGENERACY_TOL: f64 = 1e-8;

/// Whether the perturbed response must stay strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PositivityPolicy {
    /// Require positivity exactly when every original response value is
    /// positive (prices stay prices; signed data stays unconstrained).
    #[default]
    Auto,
    Require,
    Off,
}

/// Parameters of one perturbation run.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    /// Amplitude. Nonzero. `-2` preserves t-values and R^2.
    pub a: f64,
    /// Randomness mix. Non-negative. Larger b moves the released response
    /// closer to the original; `b = 0` is the deterministic reflection.
    pub b: f64,
    pub seed: u64,
    pub positivity: PositivityPolicy,
    /// Budget shared by positivity rejections and degenerate directions.
    pub max_retries: u32,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        // b = 1 is the value the subsample calibration protocol recommends on
        // the reference housing data.
        Self {
            a: -2.0,
            b: 1.0,
            seed: 0,
            positivity: PositivityPolicy::Auto,
            max_retries: 100,
        }
    }
}

impl NoiseSpec {
    fn validate(&self) -> Result<()> {
        if !self.a.is_finite() || self.a == 0.0 {
            return Err(Error::InvalidParameters(format!(
                "amplitude a must be finite and nonzero, got {}",
                self.a
            )));
        }
        if !self.b.is_finite() || self.b < 0.0 {
            return Err(Error::InvalidParameters(format!(
                "mix b must be finite and non-negative, got {}",
                self.b
            )));
        }
        if self.max_retries == 0 {
            return Err(Error::InvalidParameters("max_retries must be at least 1".into()));
        }
        Ok(())
    }
}

/// A released response plus the diagnostics a data publisher wants on file.
/// Neither the random vector behind the noise nor the noise itself is stored.
#[derive(Debug, Clone)]
pub struct PerturbedRelease {
    pub y_perturbed: DVector<f64>,
    pub spec: NoiseSpec,
    /// Resolved positivity decision (`Auto` collapsed against the data).
    pub positivity_enforced: bool,
    /// Index of the accepted attempt; 0 means the first draw was accepted.
    pub retries_used: u32,
    /// From an independent refit on the released response.
    pub achieved_r_squared: f64,
    pub achieved_t_values: DVector<f64>,
    pub correlation_with_original: f64,
}

/// Draws an n-vector of iid standard normals from the given stream.
pub fn draw_direction<R: Rng>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Removes from `v` its components along the design columns and the residual:
/// `u = (I - X (X'X)^-1 X' - e e' / ||e||^2) v`, applied twice so the leftover
/// projections sit at machine precision.
pub fn orthogonalize(fit: &RegressionFit, data: &Dataset, v: &DVector<f64>) -> Result<DVector<f64>> {
    if fit.residual_is_negligible() {
        return Err(Error::DegenerateFit);
    }
    let mut u = v.clone();
    for _ in 0..2 {
        u = residual_projector_apply(fit, data, &u)?;
        let coef = fit.residual.dot(&u) / fit.rss;
        u -= coef * &fit.residual;
    }
    let norm = u.norm();
    let threshold = DEGENERACY_TOL * v.norm();
    if norm <= threshold {
        return Err(Error::DegenerateDirection { norm, threshold });
    }
    Ok(u)
}

/// Combines residual and orthogonal direction into the noise vector. `u` is
/// ignored when `b = 0` and required (nonzero) when `b > 0`.
pub fn make_noise(
    fit: &RegressionFit,
    u: Option<&DVector<f64>>,
    a: f64,
    b: f64,
) -> Result<DVector<f64>> {
    if !a.is_finite() || a == 0.0 {
        return Err(Error::InvalidParameters(format!(
            "amplitude a must be finite and nonzero, got {a}"
        )));
    }
    if !b.is_finite() || b < 0.0 {
        return Err(Error::InvalidParameters(format!(
            "mix b must be finite and non-negative, got {b}"
        )));
    }
    if fit.residual_is_negligible() {
        return Err(Error::DegenerateFit);
    }
    if b == 0.0 {
        return Ok(a * &fit.residual);
    }
    let u = match u {
        Some(u) if u.norm() > 0.0 => u,
        _ => return Err(Error::ZeroDirection),
    };
    if u.len() != fit.residual.len() {
        return Err(Error::DimensionMismatch(format!(
            "direction length {} but residual length {}",
            u.len(),
            fit.residual.len()
        )));
    }
    let e_norm = fit.residual_norm();
    let scale = a * e_norm / (1.0 + b);
    let unit_e = &fit.residual / e_norm;
    let unit_u = u / u.norm();
    Ok(scale * (unit_e + b.sqrt() * unit_u))
}

/// Runs the full release pipeline: fit, draw, orthogonalize, add, and keep
/// retrying with fresh streams while the positivity policy rejects the
/// candidate or the direction degenerates. Retry `k` draws from a stream
/// derived from `(seed, k)`, so a release is reproducible from the spec alone.
pub fn perturb(data: &Dataset, spec: &NoiseSpec) -> Result<PerturbedRelease> {
    spec.validate()?;
    let fit = fit_ols(data)?;
    if fit.residual_is_negligible() {
        return Err(Error::DegenerateFit);
    }
    let enforced = match spec.positivity {
        PositivityPolicy::Auto => data.y().iter().all(|&v| v > 0.0),
        PositivityPolicy::Require => true,
        PositivityPolicy::Off => false,
    };

    if spec.b == 0.0 {
        let eps = make_noise(&fit, None, spec.a, spec.b)?;
        let y_perturbed = data.y() + eps;
        let min = y_perturbed.min();
        if enforced && min <= 0.0 {
            // No randomness at b = 0: retrying cannot help.
            return Err(Error::PositivityUnachievable {
                best_min: min,
                attempts: 1,
            });
        }
        return finish(data, spec, enforced, 0, y_perturbed);
    }

    let mut best_min = f64::NEG_INFINITY;
    for attempt in 0..spec.max_retries {
        let mut rng = derive_rng(spec.seed, Domain::NoiseDirection, &[attempt as u64]);
        let v = draw_direction(data.n(), &mut rng);
        let u = match orthogonalize(&fit, data, &v) {
            Ok(u) => u,
            Err(Error::DegenerateDirection { .. }) => continue,
            Err(e) => return Err(e),
        };
        let eps = make_noise(&fit, Some(&u), spec.a, spec.b)?;
        let y_perturbed = data.y() + eps;
        let min = y_perturbed.min();
        if !enforced || min > 0.0 {
            return finish(data, spec, enforced, attempt, y_perturbed);
        }
        best_min = best_min.max(min);
    }
    Err(Error::PositivityUnachievable {
        best_min,
        attempts: spec.max_retries,
    })
}

fn finish(
    data: &Dataset,
    spec: &NoiseSpec,
    positivity_enforced: bool,
    retries_used: u32,
    y_perturbed: DVector<f64>,
) -> Result<PerturbedRelease> {
    let refit = fit_ols(&data.with_response(y_perturbed.clone())?)?;
    let correlation_with_original = pearson(data.y(), &y_perturbed);
    Ok(PerturbedRelease {
        y_perturbed,
        spec: spec.clone(),
        positivity_enforced,
        retries_used,
        achieved_r_squared: refit.r_squared,
        achieved_t_values: refit.t_values,
        correlation_with_original,
    })
}

/// Sample Pearson correlation.
pub fn pearson(x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    assert_eq!(x.len(), y.len(), "pearson: length mismatch");
    let mx = x.mean();
    let my = y.mean();
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - mx;
        let dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    sxy / (sxx.sqrt() * syy.sqrt())
}
