//! Closed-form predictions for the perturbed regression statistics, and a
//! verifier that holds a release against them.
//!
//! For noise parameters `(a, b)` applied to a fit with coefficient of
//! determination `r2`:
//!
//! ```text
//! t_scale     = sqrt((1 + b) / (1 + b + a(a+2)))
//! r2_new      = (1 + b) r2 / (1 + b + a(a+2)(1 - r2))
//! correlation = (1 + b + a(1 - r2)) / (sqrt(1+b) sqrt(1 + b + a(a+2)(1 - r2)))
//! ```
//!
//! `a = -2` gives `t_scale = 1` and `r2_new = r2` for every `b`, with
//! `correlation = 1 - 2(1 - r2)/(1 + b)`. `a = -1 + sqrt(b + 2)` gives
//! `t_scale = 1/sqrt(2)` and `r2_new = r2/(2 - r2)`.

use nalgebra::DVector;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::noise::pearson;
use crate::regression::fit_ols;

/// What the closed forms say a release with these parameters must look like.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryPrediction {
    pub a: f64,
    pub b: f64,
    pub r2_original: f64,
    /// Common ratio of every perturbed t-value to its original.
    pub t_scale: f64,
    pub r2_perturbed: f64,
    /// Correlation between original and perturbed responses.
    pub correlation: f64,
}

/// Evaluates the closed forms. Errors with `InvalidParameters` outside
/// `a != 0, b >= 0, 0 < r2 < 1` and with `UndefinedScale` when
/// `1 + b + a(a+2) <= 0` (perturbed residual collapses to zero).
pub fn predict(a: f64, b: f64, r2: f64) -> Result<TheoryPrediction> {
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
    if !r2.is_finite() || r2 <= 0.0 || r2 >= 1.0 {
        return Err(Error::InvalidParameters(format!(
            "r2 must lie strictly between 0 and 1, got {r2}"
        )));
    }
    let g = a * (a + 2.0);
    let scale_sq_denom = 1.0 + b + g;
    if scale_sq_denom <= 0.0 {
        return Err(Error::UndefinedScale(scale_sq_denom));
    }
    // With g exactly zero (a = -2) the ratios reduce symbolically to 1 and
    // r2; evaluating the general quotient instead would cost an ulp.
    let (t_scale, r2_perturbed) = if g == 0.0 {
        (1.0, r2)
    } else {
        (
            ((1.0 + b) / scale_sq_denom).sqrt(),
            (1.0 + b) * r2 / (1.0 + b + g * (1.0 - r2)),
        )
    };
    let denom = 1.0 + b + g * (1.0 - r2);
    let correlation = (1.0 + b + a * (1.0 - r2)) / ((1.0 + b).sqrt() * denom.sqrt());
    Ok(TheoryPrediction {
        a,
        b,
        r2_original: r2,
        t_scale,
        r2_perturbed,
        correlation,
    })
}

/// The two amplitudes that halve every squared t-value at the given mix:
/// `a = -1 +- sqrt(b + 2)`. Returned as (positive branch, negative branch).
pub fn reduced_accuracy_params(b: f64) -> Result<(f64, f64)> {
    if !b.is_finite() || b < 0.0 {
        return Err(Error::InvalidParameters(format!(
            "mix b must be finite and non-negative, got {b}"
        )));
    }
    let root = (b + 2.0).sqrt();
    Ok((-1.0 + root, -1.0 - root))
}

/// Grid of original/perturbed correlations for the t- and R^2-preserving
/// amplitude `a = -2`, one row per R^2, one column per b.
pub fn correlation_grid(r2_values: &[f64], b_values: &[f64]) -> Result<Vec<Vec<f64>>> {
    r2_values
        .iter()
        .map(|&r2| {
            b_values
                .iter()
                .map(|&b| predict(-2.0, b, r2).map(|p| p.correlation))
                .collect()
        })
        .collect()
}

/// One checked quantity inside a [`VerificationReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationEntry {
    pub quantity: String,
    pub expected: f64,
    pub actual: f64,
    pub abs_dev: f64,
    pub rel_dev: f64,
    pub pass: bool,
}

/// Release-vs-theory comparison, one entry per checked quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub entries: Vec<VerificationEntry>,
    pub tol: f64,
    pub pass: bool,
}

impl VerificationReport {
    /// Flat `key=value` lines, one per entry plus the verdict; consumed by the
    /// CLI and easy to grep.
    pub fn to_key_value_lines(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("tolerance={}\n", self.tol));
        for e in &self.entries {
            out.push_str(&format!(
                "{q}.expected={expected}\n{q}.actual={actual}\n{q}.abs_dev={abs}\n{q}.rel_dev={rel}\n{q}.pass={pass}\n",
                q = e.quantity,
                expected = e.expected,
                actual = e.actual,
                abs = e.abs_dev,
                rel = e.rel_dev,
                pass = e.pass,
            ));
        }
        out.push_str(&format!("pass={}\n", self.pass));
        out
    }
}

fn entry(quantity: &str, expected: f64, actual: f64, tol: f64) -> VerificationEntry {
    let abs_dev = (actual - expected).abs();
    let rel_dev = abs_dev / expected.abs().max(f64::MIN_POSITIVE);
    // Pass on the relative deviation, with an absolute floor so quantities
    // expected to be ~0 do not demand impossible precision.
    let pass = abs_dev <= tol * expected.abs().max(1.0);
    VerificationEntry {
        quantity: quantity.to_string(),
        expected,
        actual,
        abs_dev,
        rel_dev,
        pass,
    }
}

/// Refits the released response and compares mean, coefficients, t-ratios,
/// R^2, and the original/release correlation against [`predict`]. Needs only
/// the original data, the released values, and the declared (a, b); nothing
/// about the random direction or the release diagnostics is trusted.
pub fn verify_release(
    data: &Dataset,
    y_released: &DVector<f64>,
    a: f64,
    b: f64,
    tol: f64,
) -> Result<VerificationReport> {
    if y_released.len() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "release has {} rows, dataset has {}",
            y_released.len(),
            data.n()
        )));
    }
    let original = fit_ols(data)?;
    let perturbed = fit_ols(&data.with_response(y_released.clone())?)?;
    let prediction = predict(a, b, original.r_squared)?;

    let mut entries = Vec::new();
    entries.push(entry("mean", original.y_bar, y_released.mean(), tol));
    let beta_dev = (0..data.num_params())
        .map(|j| {
            (perturbed.beta_hat[j] - original.beta_hat[j]).abs()
                / original.beta_hat[j].abs().max(1.0)
        })
        .fold(0.0_f64, f64::max);
    entries.push(VerificationEntry {
        quantity: "beta_max_rel_dev".to_string(),
        expected: 0.0,
        actual: beta_dev,
        abs_dev: beta_dev,
        rel_dev: beta_dev,
        pass: beta_dev <= tol,
    });
    for j in 0..data.num_params() {
        entries.push(entry(
            &format!("t_ratio.{}", data.column_names()[j]),
            prediction.t_scale,
            perturbed.t_values[j] / original.t_values[j],
            tol,
        ));
    }
    entries.push(entry(
        "r_squared",
        prediction.r2_perturbed,
        perturbed.r_squared,
        tol,
    ));
    entries.push(entry(
        "correlation",
        prediction.correlation,
        pearson(data.y(), y_released),
        tol,
    ));

    let pass = entries.iter().all(|e| e.pass);
    Ok(VerificationReport { entries, tol, pass })
}

/// Convenience for tests and the CLI: the empirical per-coefficient t-ratios
/// of a release against the original fit.
pub fn empirical_t_ratios(data: &Dataset, y_perturbed: &DVector<f64>) -> Result<Vec<f64>> {
    let original = fit_ols(data)?;
    let perturbed = fit_ols(&data.with_response(y_perturbed.clone())?)?;
    Ok((0..data.num_params())
        .map(|j| perturbed.t_values[j] / original.t_values[j])
        .collect())
}
