//! OLS via Householder QR, with the derived quantities the noise machinery
//! needs: residuals, t-values, the diagonal of (X'X)^-1, and a way to apply
//! the residual-space projector without forming an n x n matrix.

use nalgebra::{DMatrix, DVector};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Fitted OLS model.
///
/// `t_values[j]` is the studentized statistic
/// `sqrt(n - p - 1) * beta_hat[j] / (sqrt(xtx_inv_diag[j]) * ||residual||)`.
/// On an exact fit (`rss == 0`) the t-values follow IEEE semantics
/// (infinite or NaN); callers that need noise reject that case anyway.
#[derive(Debug, Clone)]
pub struct RegressionFit {
    pub beta_hat: DVector<f64>,
    pub y_hat: DVector<f64>,
    pub residual: DVector<f64>,
    pub rss: f64,
    pub tss: f64,
    pub r_squared: f64,
    pub t_values: DVector<f64>,
    /// Diagonal of (X'X)^-1, one entry per design column.
    pub xtx_inv_diag: DVector<f64>,
    pub y_bar: f64,
    /// Thin Q factor of the design, kept for projector application.
    q: DMatrix<f64>,
}

impl RegressionFit {
    pub fn n(&self) -> usize {
        self.q.nrows()
    }

    pub fn num_params(&self) -> usize {
        self.q.ncols()
    }

    pub fn residual_norm(&self) -> f64 {
        self.rss.sqrt()
    }

    /// Residual degrees of freedom, `n - p - 1`.
    pub fn df_residual(&self) -> usize {
        self.n() - self.num_params()
    }

    /// True when the residual is indistinguishable from an exact fit at
    /// working precision. A literal `rss == 0` test misses this: a perfectly
    /// collinear response leaves rss around 1e-28 of factorization rounding,
    /// and noise built on that residual amplifies rounding, not data.
    pub fn residual_is_negligible(&self) -> bool {
        // ||y||^2 = ||y_hat||^2 + ||e||^2 by orthogonality.
        let y_norm = (self.y_hat.norm_squared() + self.rss).sqrt();
        self.residual_norm() <= 1e-12 * y_norm
    }
}

/// QR factorization with the rank gate shared by every fit path.
fn qr_parts(data: &Dataset) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = data.n();
    let m = data.num_params();
    let qr = data.x().clone().qr();
    let q = qr.q();
    let r = qr.r();

    let diag_max = (0..m).map(|j| r[(j, j)].abs()).fold(0.0_f64, f64::max);
    let threshold = n as f64 * f64::EPSILON * diag_max;
    for j in 0..m {
        let d = r[(j, j)].abs();
        if d <= threshold {
            return Err(Error::RankDeficient {
                column: j,
                diag: d,
                threshold,
            });
        }
    }
    Ok((q, r))
}

/// RSS alone, without the constant-response gate: a structural-stability test
/// does not care whether a group's response happens to be flat.
pub(crate) fn residual_sum_of_squares(data: &Dataset) -> Result<f64> {
    let (q, _) = qr_parts(data)?;
    let qty = q.transpose() * data.y();
    let residual = data.y() - &q * &qty;
    Ok(residual.norm_squared())
}

/// Fits OLS by Householder QR.
///
/// Errors with `RankDeficient` when the smallest |R[j,j]| falls below
/// `n * eps * max_j |R[j,j]|`, and with `ConstantResponse` when the response
/// has zero variance. Deterministic: identical input bits give identical
/// output bits.
pub fn fit_ols(data: &Dataset) -> Result<RegressionFit> {
    let y = data.y();
    let n = data.n();
    let m = data.num_params();

    let (q, r) = qr_parts(data)?;
    let qty = q.transpose() * y;
    let beta_hat = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Numerical("triangular solve failed".into()))?;
    // y_hat through Q keeps Q' * residual at machine-precision zero even when
    // the design columns are badly scaled.
    let y_hat = &q * &qty;
    let residual = y - &y_hat;
    let rss = residual.norm_squared();

    let y_bar = y.mean();
    let tss = y.iter().map(|v| (v - y_bar) * (v - y_bar)).sum::<f64>();
    let y_scale = y.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if tss <= n as f64 * (4.0 * f64::EPSILON * y_scale).powi(2) {
        return Err(Error::ConstantResponse);
    }
    let r_squared = 1.0 - rss / tss;

    // diag of (X'X)^-1 = squared row norms of R^-1.
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(m, m))
        .ok_or_else(|| Error::Numerical("triangular inversion failed".into()))?;
    let xtx_inv_diag = DVector::from_iterator(m, (0..m).map(|j| r_inv.row(j).norm_squared()));

    let df = (n - m) as f64;
    let e_norm = rss.sqrt();
    let t_values = DVector::from_iterator(
        m,
        (0..m).map(|j| df.sqrt() * beta_hat[j] / (xtx_inv_diag[j].sqrt() * e_norm)),
    );

    Ok(RegressionFit {
        beta_hat,
        y_hat,
        residual,
        rss,
        tss,
        r_squared,
        t_values,
        xtx_inv_diag,
        y_bar,
        q,
    })
}

/// Applies the annihilator `(I - X (X'X)^-1 X') w` through the stored thin Q
/// factor: `w - Q (Q' w)`.
pub fn residual_projector_apply(
    fit: &RegressionFit,
    data: &Dataset,
    w: &DVector<f64>,
) -> Result<DVector<f64>> {
    if fit.n() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "fit has {} rows, dataset has {}",
            fit.n(),
            data.n()
        )));
    }
    if w.len() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "vector length {} but dataset has {} rows",
            w.len(),
            data.n()
        )));
    }
    let qtw = fit.q.transpose() * w;
    Ok(w - &fit.q * qtw)
}
