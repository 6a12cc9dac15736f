//! Chow test for structural stability between two groups sharing a design
//! layout.
//!
//! ```text
//! F = ((RSS_pooled - RSS_1 - RSS_2) / (p + 1)) / ((RSS_1 + RSS_2) / (n1 + n2 - 2(p + 1)))
//! ```
//!
//! The pooled regression stacks the rows of both groups into one model. The
//! test accepts (no structural break) when F stays below the upper-alpha
//! critical value of F(p + 1, n1 + n2 - 2(p + 1)).

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fdist::f_quantile;
use crate::regression::residual_sum_of_squares;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChowResult {
    pub f_value: f64,
    pub df1: u64,
    pub df2: u64,
    pub alpha: f64,
    pub critical_value: f64,
    /// `f_value < critical_value`: the two groups look like one model.
    pub accepted: bool,
}

pub fn chow_test(group1: &Dataset, group2: &Dataset, alpha: f64) -> Result<ChowResult> {
    if group1.num_params() != group2.num_params() {
        return Err(Error::DimensionMismatch(format!(
            "groups have {} and {} design columns",
            group1.num_params(),
            group2.num_params()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameters(format!(
            "alpha must lie strictly between 0 and 1, got {alpha}"
        )));
    }
    let k = group1.num_params();
    let n_total = group1.n() + group2.n();
    if n_total <= 2 * k {
        return Err(Error::InsufficientData(format!(
            "need n1 + n2 > 2(p + 1): {n_total} <= {}",
            2 * k
        )));
    }
    let df1 = k as u64;
    let df2 = (n_total - 2 * k) as u64;

    let pooled = group1.stack(group2)?;
    let rss_pooled = residual_sum_of_squares(&pooled)?;
    let rss1 = residual_sum_of_squares(group1)?;
    let rss2 = residual_sum_of_squares(group2)?;

    // The gap is non-negative in exact arithmetic; rounding can leave it a few
    // ulps under zero, which we clamp rather than report as a negative F.
    let gap = (rss_pooled - rss1 - rss2).max(0.0);
    let denom = (rss1 + rss2) / df2 as f64;
    let f_value = if denom == 0.0 {
        // Both groups fit exactly. Same model if the pooled fit is exact too,
        // otherwise an unbounded break.
        if gap == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (gap / df1 as f64) / denom
    };

    let critical_value = f_quantile(df1, df2, alpha)?;
    Ok(ChowResult {
        f_value,
        df1,
        df2,
        alpha,
        critical_value,
        accepted: f_value < critical_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_close(actual: f64, expected: f64, tol: f64, what: &str) {
        assert!(
            (actual - expected).abs() <= tol * 1.0_f64.max(expected.abs()),
            "{what}: actual {actual}, expected {expected}"
        );
    }

    fn line(seed: u64, n: usize, intercept: f64, slope: f64, noise: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&v| intercept + slope * v + rng.gen_range(-noise..noise))
            .collect();
        Dataset::from_columns(&[("x".into(), x)], "y", y).unwrap()
    }

    #[test]
    fn identical_groups_give_zero_f() {
        let g = line(1, 30, 1.0, 2.0, 0.5);
        let r = chow_test(&g, &g, 0.05).unwrap();
        assert!(r.f_value.abs() < 1e-10, "F = {}", r.f_value);
        assert!(r.accepted);
        assert_eq!(r.df1, 2);
        assert_eq!(r.df2, 56);
    }

    #[test]
    fn clear_break_is_rejected() {
        let g1 = line(2, 40, 1.0, 2.0, 0.3);
        let g2 = line(3, 40, 1.0, -2.0, 0.3);
        let r = chow_test(&g1, &g2, 0.05).unwrap();
        assert!(!r.accepted, "F = {} < {}", r.f_value, r.critical_value);
        assert!(r.f_value > r.critical_value);
    }

    #[test]
    fn same_process_is_accepted() {
        let g1 = line(4, 60, 1.0, 2.0, 1.0);
        let g2 = line(5, 60, 1.0, 2.0, 1.0);
        let r = chow_test(&g1, &g2, 0.05).unwrap();
        assert!(r.accepted, "F = {} >= {}", r.f_value, r.critical_value);
    }

    #[test]
    fn matches_dense_oracle_on_small_instance() {
        // n1 = n2 = 10, p = 1, slope shift; oracle computes all three RSS
        // through explicit normal equations.
        let g1 = line(6, 10, 0.5, 1.0, 0.4);
        let g2 = line(7, 10, 0.5, 1.8, 0.4);
        let r = chow_test(&g1, &g2, 0.05).unwrap();

        let dense_rss = |d: &Dataset| {
            let x = d.x();
            let beta = (x.transpose() * x).try_inverse().unwrap() * (x.transpose() * d.y());
            (d.y() - x * beta).norm_squared()
        };
        let pooled = g1.stack(&g2).unwrap();
        let (rp, r1, r2) = (dense_rss(&pooled), dense_rss(&g1), dense_rss(&g2));
        let expected = ((rp - r1 - r2) / 2.0) / ((r1 + r2) / (10.0 + 10.0 - 4.0));
        assert_close(r.f_value, expected, 1e-9, "F vs dense oracle");
    }

    #[test]
    fn dimension_and_alpha_guards() {
        let g1 = line(8, 20, 0.0, 1.0, 0.2);
        let g2 = Dataset::from_columns(
            &[
                ("x".into(), vec![0.0, 1.0, 2.0, 3.0]),
                ("z".into(), vec![1.0, 0.0, 1.0, 0.0]),
            ],
            "y",
            vec![0.1, 1.2, 1.9, 3.1],
        )
        .unwrap();
        assert!(matches!(
            chow_test(&g1, &g2, 0.05).unwrap_err(),
            Error::DimensionMismatch(_)
        ));
        assert!(matches!(
            chow_test(&g1, &g1, 0.0).unwrap_err(),
            Error::InvalidParameters(_)
        ));
    }

    #[test]
    fn constant_response_group_is_fine() {
        // Only RSS matters for the test; a flat group response is legal.
        let g1 = line(9, 25, 1.0, 2.0, 0.5);
        let x: Vec<f64> = (0..25).map(|i| i as f64 / 5.0).collect();
        let g2 = Dataset::from_columns(&[("x".into(), x)], "y", vec![4.0; 25]).unwrap();
        let r = chow_test(&g1, &g2, 0.05);
        assert!(r.is_ok(), "{r:?}");
    }

    #[test]
    fn rank_deficient_group_is_flagged() {
        let n = 12;
        let mut x = DMatrix::zeros(n, 3);
        for i in 0..n {
            x[(i, 0)] = 1.0;
            x[(i, 1)] = i as f64;
            x[(i, 2)] = 2.0 * i as f64;
        }
        let y = DVector::from_iterator(n, (0..n).map(|i| i as f64 + 0.3));
        let names = vec!["intercept".into(), "a".into(), "b".into()];
        let bad = Dataset::new(x, y, names, "y".into()).unwrap();
        assert!(matches!(
            chow_test(&bad, &bad, 0.05).unwrap_err(),
            Error::RankDeficient { .. }
        ));
    }
}
