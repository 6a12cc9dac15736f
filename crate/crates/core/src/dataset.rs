//! Regression dataset: design matrix with explicit intercept column plus a
//! response vector.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A dataset ready for OLS.
///
/// Invariants, enforced by the constructor:
/// - `x` is `n x (p+1)` with the first column exactly the ones vector,
/// - `n > p + 1`,
/// - `y` has length `n`,
/// - there are `p + 1` column labels (the first names the intercept),
/// - every value is finite.
///
/// Full column rank is not checked here; it is established (or refuted) by
/// the fit itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
    column_names: Vec<String>,
    response_name: String,
}

impl Dataset {
    pub fn new(
        x: DMatrix<f64>,
        y: DVector<f64>,
        column_names: Vec<String>,
        response_name: String,
    ) -> Result<Self> {
        let n = x.nrows();
        let cols = x.ncols();
        if cols < 1 {
            return Err(Error::InvalidDataset("design has no columns".into()));
        }
        if n <= cols {
            return Err(Error::InvalidDataset(format!(
                "need more rows than parameters: n = {n}, columns = {cols}"
            )));
        }
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "response length {} but design has {n} rows",
                y.len()
            )));
        }
        if column_names.len() != cols {
            return Err(Error::InvalidDataset(format!(
                "{} column labels for {cols} design columns",
                column_names.len()
            )));
        }
        for i in 0..n {
            if x[(i, 0)] != 1.0 {
                return Err(Error::InvalidDataset(format!(
                    "first design column must be all ones; row {i} holds {}",
                    x[(i, 0)]
                )));
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("design contains a non-finite value".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("response contains a non-finite value".into()));
        }
        Ok(Self {
            x,
            y,
            column_names,
            response_name,
        })
    }

    /// Builds a dataset from named explanatory columns, prepending the
    /// intercept.
    pub fn from_columns(
        explanatory: &[(String, Vec<f64>)],
        response_name: &str,
        response: Vec<f64>,
    ) -> Result<Self> {
        let n = response.len();
        for (name, col) in explanatory {
            if col.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "column '{name}' has {} rows, response has {n}",
                    col.len()
                )));
            }
        }
        let p = explanatory.len();
        let mut x = DMatrix::zeros(n, p + 1);
        for i in 0..n {
            x[(i, 0)] = 1.0;
        }
        for (j, (_, col)) in explanatory.iter().enumerate() {
            for i in 0..n {
                x[(i, j + 1)] = col[i];
            }
        }
        let mut names = Vec::with_capacity(p + 1);
        names.push("intercept".to_string());
        names.extend(explanatory.iter().map(|(name, _)| name.clone()));
        Self::new(x, DVector::from_vec(response), names, response_name.to_string())
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// Number of rows.
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    /// Number of explanatory variables, excluding the intercept.
    pub fn p(&self) -> usize {
        self.x.ncols() - 1
    }

    /// Number of fitted parameters, `p + 1`.
    pub fn num_params(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    /// Same design, different response. Used for perturbed releases.
    pub fn with_response(&self, y: DVector<f64>) -> Result<Self> {
        Self::new(
            self.x.clone(),
            y,
            self.column_names.clone(),
            self.response_name.clone(),
        )
    }

    /// Row subset in the given index order. Indices must be in range and the
    /// subset must still satisfy `n > p + 1`.
    pub fn subsample(&self, indices: &[usize]) -> Result<Self> {
        let n = self.n();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::DimensionMismatch(format!(
                "subsample index {bad} out of range for {n} rows"
            )));
        }
        let m = indices.len();
        let mut x = DMatrix::zeros(m, self.x.ncols());
        let mut y = DVector::zeros(m);
        for (row, &i) in indices.iter().enumerate() {
            x.set_row(row, &self.x.row(i));
            y[row] = self.y[i];
        }
        Self::new(
            x,
            y,
            self.column_names.clone(),
            self.response_name.clone(),
        )
    }

    /// Stacks the rows of two datasets sharing a design layout. Labels are
    /// taken from `self`.
    pub fn stack(&self, other: &Dataset) -> Result<Self> {
        if self.x.ncols() != other.x.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "cannot stack designs with {} and {} columns",
                self.x.ncols(),
                other.x.ncols()
            )));
        }
        let n = self.n() + other.n();
        let mut x = DMatrix::zeros(n, self.x.ncols());
        let mut y = DVector::zeros(n);
        for i in 0..self.n() {
            x.set_row(i, &self.x.row(i));
            y[i] = self.y[i];
        }
        for i in 0..other.n() {
            x.set_row(self.n() + i, &other.x.row(i));
            y[self.n() + i] = other.y[i];
        }
        Self::new(
            x,
            y,
            self.column_names.clone(),
            self.response_name.clone(),
        )
    }
}
