//! F distribution from first principles: log-gamma, the regularized
//! incomplete beta function by Lentz's continued fraction, the F CDF through
//! it, and the upper-tail quantile by bracketed bisection. No statistical
//! tables, no distribution crate on this path.

use crate::error::{Error, Result};

/// Lanczos approximation, g = 7, 9 terms. Relative error below 1e-14 on the
/// positive axis.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection keeps the branch below 1/2 accurate.
        let pi = std::f64::consts::PI;
        (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = COEF[0];
        for (i, c) in COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Lentz's continued fraction for the incomplete beta; converges fast for
/// `x < (a + 1) / (a + b + 2)`, which the caller guarantees.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> Result<f64> {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let coef = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + coef * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + coef / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let coef = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + coef * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + coef / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::Numerical(format!(
        "incomplete beta continued fraction did not converge (a = {a}, b = {b}, x = {x})"
    )))
}

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !(b > 0.0) {
        return Err(Error::InvalidParameters(format!(
            "incomplete beta needs positive shape parameters, got a = {a}, b = {b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameters(format!(
            "incomplete beta argument must lie in [0, 1], got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_continued_fraction(a, b, x)? / a)
    } else {
        Ok(1.0 - front * beta_continued_fraction(b, a, 1.0 - x)? / b)
    }
}

/// P(F <= x) for an F variable with (df1, df2) degrees of freedom.
pub fn f_cdf(x: f64, df1: u64, df2: u64) -> Result<f64> {
    if df1 == 0 || df2 == 0 {
        return Err(Error::InvalidParameters(
            "F degrees of freedom must be at least 1".into(),
        ));
    }
    if !x.is_finite() && x > 0.0 {
        return Ok(1.0);
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    let d1 = df1 as f64;
    let d2 = df2 as f64;
    let t = d1 * x / (d1 * x + d2);
    regularized_incomplete_beta(d1 / 2.0, d2 / 2.0, t)
}

/// Upper-tail critical value: the x with P(F > x) = alpha. Bracketed
/// bisection on the CDF, driven to a relative interval of 1e-12 (well inside
/// the 1e-6 accuracy contract).
pub fn f_quantile(df1: u64, df2: u64, alpha: f64) -> Result<f64> {
    if df1 == 0 || df2 == 0 {
        return Err(Error::InvalidParameters(
            "F degrees of freedom must be at least 1".into(),
        ));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameters(format!(
            "tail probability must lie strictly between 0 and 1, got {alpha}"
        )));
    }
    let target = 1.0 - alpha;
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut guard = 0;
    while f_cdf(hi, df1, df2)? < target {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 2048 {
            return Err(Error::Numerical(format!(
                "failed to bracket F quantile (df1 = {df1}, df2 = {df2}, alpha = {alpha})"
            )));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_cdf(mid, df1, df2)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
