//! Choosing the mix parameter `b` by structural-stability testing.
//!
//! The protocol: for each grid value of `b` and each subsample fraction `q`,
//! repeatedly draw a random subsample of `floor(q n)` rows, perturb the
//! response, and Chow-test the original subsample against the perturbed one.
//! The acceptance rate per cell estimates how often a secondary analyst
//! working on that fraction of the released data would (correctly) see no
//! structural break. `b_star` per `q` is the smallest grid `b` whose
//! acceptance reaches `1 - alpha`; the recommended `b` is the largest
//! `b_star` across the examined fractions.
//!
//! By default the noise is generated from the full-data fit and the subsample
//! is taken from the released response, which is what a secondary analyst
//! actually experiences. Building the noise from the subsample's own fit is
//! also available; note that it makes the Chow F identically zero (the noise
//! is orthogonal to the subsample design, so the pooled fit coincides with
//! both group fits) and therefore measures nothing about `b`.

use rayon::prelude::*;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::fdist::f_quantile;
use crate::noise::{draw_direction, make_noise, orthogonalize, perturb, NoiseSpec, PositivityPolicy};
use crate::regression::fit_ols;
use crate::chow::chow_test;
use crate::seed::{derive_rng, Domain};

/// Which fit the per-trial noise is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseScope {
    /// Perturb the full response from the full-data fit, then subsample the
    /// release.
    #[default]
    FullFit,
    /// Fit and perturb the subsample itself. Degenerate for the Chow
    /// comparison (F = 0 identically); kept so the difference is observable.
    SubsampleFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationPlan {
    /// Ascending mix grid.
    pub b_grid: Vec<f64>,
    /// Subsample fractions, each in (0, 1].
    pub q_grid: Vec<f64>,
    pub trials: u32,
    pub alpha: f64,
    /// Noise amplitude, `-2` unless the release deliberately degrades
    /// accuracy.
    pub a: f64,
    pub master_seed: u64,
    pub noise_scope: NoiseScope,
    /// Reuse the same subsample stream across the b grid instead of redrawing
    /// per (b, q, trial).
    pub shared_subsamples: bool,
    /// Worker threads; `None` uses the global pool. Reports are byte-identical
    /// for every choice.
    pub workers: Option<usize>,
}

impl Default for CalibrationPlan {
    fn default() -> Self {
        Self {
            b_grid: vec![0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 2.0, 2.5],
            q_grid: vec![0.05, 0.10, 0.20, 0.30, 0.40, 0.50, 0.60, 0.70, 0.80, 0.90],
            trials: 1000,
            alpha: 0.05,
            a: -2.0,
            master_seed: 0,
            noise_scope: NoiseScope::FullFit,
            shared_subsamples: false,
            workers: None,
        }
    }
}

/// Per-(b, q) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationCell {
    /// Fraction of trials (over all trials, failures included) whose F stayed
    /// below the critical value.
    pub acceptance: f64,
    /// 5/10/50/90/95 percentiles of the successful trials' F values, by the
    /// order-statistic convention rank = ceil(percentile * count). NaN when
    /// every trial failed.
    pub f_percentiles: [f64; 5],
    /// Trials that errored (rank-deficient subsample, degenerate direction).
    pub failed_trials: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub b_grid: Vec<f64>,
    pub q_grid: Vec<f64>,
    pub trials: u32,
    pub alpha: f64,
    pub a: f64,
    pub master_seed: u64,
    pub noise_scope: NoiseScope,
    pub shared_subsamples: bool,
    pub n: usize,
    pub p: usize,
    /// Chow critical value per q (df depend only on the subsample size).
    pub critical_per_q: Vec<f64>,
    /// Indexed `[b][q]`.
    pub cells: Vec<Vec<CalibrationCell>>,
    /// Smallest grid b reaching acceptance >= 1 - alpha, per q.
    pub b_star_per_q: Vec<Option<f64>>,
    /// Largest b_star across q: adequate for every examined fraction.
    pub recommended_b: Option<f64>,
}

fn validate(data: &Dataset, plan: &CalibrationPlan) -> Result<()> {
    if plan.b_grid.is_empty() || plan.q_grid.is_empty() {
        return Err(Error::InvalidParameters("empty calibration grid".into()));
    }
    if plan.b_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameters("b grid must be strictly ascending".into()));
    }
    if plan.b_grid.iter().any(|&b| !b.is_finite() || b < 0.0) {
        return Err(Error::InvalidParameters("b grid values must be finite and >= 0".into()));
    }
    if plan.q_grid.iter().any(|&q| !q.is_finite() || q <= 0.0 || q > 1.0) {
        return Err(Error::InvalidParameters("q values must lie in (0, 1]".into()));
    }
    if plan.trials == 0 {
        return Err(Error::InvalidParameters("trials must be at least 1".into()));
    }
    if !(plan.alpha > 0.0 && plan.alpha < 1.0) {
        return Err(Error::InvalidParameters(format!(
            "alpha must lie strictly between 0 and 1, got {}",
            plan.alpha
        )));
    }
    if !plan.a.is_finite() || plan.a == 0.0 {
        return Err(Error::InvalidParameters(format!(
            "amplitude a must be finite and nonzero, got {}",
            plan.a
        )));
    }
    let k = data.num_params();
    for &q in &plan.q_grid {
        let m = subsample_size(q, data.n());
        if m <= 2 * k {
            return Err(Error::InsufficientData(format!(
                "q = {q} gives subsample size {m}, need more than 2(p + 1) = {}",
                2 * k
            )));
        }
    }
    Ok(())
}

fn subsample_size(q: f64, n: usize) -> usize {
    // floor(q n), with a one-ulp guard so fractions like 0.15 * 1320 land on
    // the intended integer.
    ((q * n as f64) + 1e-9).floor() as usize
}

/// The percentile levels reported per cell.
pub const PERCENTILE_LEVELS: [f64; 5] = [0.05, 0.10, 0.50, 0.90, 0.95];

fn percentiles(sorted: &[f64]) -> [f64; 5] {
    let mut out = [f64::NAN; 5];
    if sorted.is_empty() {
        return out;
    }
    let n = sorted.len();
    for (slot, &level) in out.iter_mut().zip(PERCENTILE_LEVELS.iter()) {
        let rank = ((level * n as f64).ceil() as usize).clamp(1, n);
        *slot = sorted[rank - 1];
    }
    out
}

pub fn run_calibration(data: &Dataset, plan: &CalibrationPlan) -> Result<CalibrationReport> {
    validate(data, plan)?;
    let n = data.n();
    let k = data.num_params();
    let full_fit = match plan.noise_scope {
        NoiseScope::FullFit => Some(fit_ols(data)?),
        NoiseScope::SubsampleFit => None,
    };

    let sizes: Vec<usize> = plan.q_grid.iter().map(|&q| subsample_size(q, n)).collect();
    let critical_per_q: Vec<f64> = sizes
        .iter()
        .map(|&m| f_quantile(k as u64, (2 * m - 2 * k) as u64, plan.alpha))
        .collect::<Result<_>>()?;

    let nb = plan.b_grid.len();
    let nq = plan.q_grid.len();
    let total = nb * nq * plan.trials as usize;

    let run_trial = |task: usize| -> std::result::Result<f64, Error> {
        let trial = (task % plan.trials as usize) as u64;
        let q_idx = (task / plan.trials as usize) % nq;
        let b_idx = task / (plan.trials as usize * nq);
        let b = plan.b_grid[b_idx];
        let m = sizes[q_idx];

        let subsample_path: Vec<u64> = if plan.shared_subsamples {
            vec![q_idx as u64, trial]
        } else {
            vec![b_idx as u64, q_idx as u64, trial]
        };
        let mut rng_s = derive_rng(plan.master_seed, Domain::Subsample, &subsample_path);
        let mut indices = rand::seq::index::sample(&mut rng_s, n, m).into_vec();
        indices.sort_unstable();
        let group1 = data.subsample(&indices)?;

        let noise_path = [b_idx as u64, q_idx as u64, trial];
        let group2 = match plan.noise_scope {
            NoiseScope::FullFit => {
                let fit = full_fit.as_ref().unwrap();
                let mut rng_v = derive_rng(plan.master_seed, Domain::TrialNoise, &noise_path);
                let v = draw_direction(n, &mut rng_v);
                let u = orthogonalize(fit, data, &v)?;
                let eps = make_noise(fit, Some(&u), plan.a, b)?;
                let released = data.y() + eps;
                let sub_y =
                    nalgebra::DVector::from_iterator(m, indices.iter().map(|&i| released[i]));
                group1.with_response(sub_y)?
            }
            NoiseScope::SubsampleFit => {
                let mut rng_seed = derive_rng(plan.master_seed, Domain::TrialNoise, &noise_path);
                let spec = NoiseSpec {
                    a: plan.a,
                    b,
                    seed: rand::Rng::gen::<u64>(&mut rng_seed),
                    positivity: PositivityPolicy::Off,
                    max_retries: 100,
                };
                let release = perturb(&group1, &spec)?;
                group1.with_response(release.y_perturbed)?
            }
        };
        Ok(chow_test(&group1, &group2, plan.alpha)?.f_value)
    };

    // Results land in task order regardless of the worker count, so the
    // report is byte-identical for 1 thread and for 40.
    let outcomes: Vec<std::result::Result<f64, Error>> = match plan.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Numerical(format!("worker pool: {e}")))?
            .install(|| (0..total).into_par_iter().map(run_trial).collect()),
        None => (0..total).into_par_iter().map(run_trial).collect(),
    };

    let mut cells = Vec::with_capacity(nb);
    for b_idx in 0..nb {
        let mut row = Vec::with_capacity(nq);
        for q_idx in 0..nq {
            let base = (b_idx * nq + q_idx) * plan.trials as usize;
            let mut f_values = Vec::with_capacity(plan.trials as usize);
            let mut failed = 0u32;
            for t in 0..plan.trials as usize {
                match &outcomes[base + t] {
                    Ok(f) => f_values.push(*f),
                    Err(_) => failed += 1,
                }
            }
            let accepted = f_values
                .iter()
                .filter(|&&f| f < critical_per_q[q_idx])
                .count();
            f_values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            row.push(CalibrationCell {
                acceptance: accepted as f64 / plan.trials as f64,
                f_percentiles: percentiles(&f_values),
                failed_trials: failed,
            });
        }
        cells.push(row);
    }

    let target = 1.0 - plan.alpha;
    let b_star_per_q: Vec<Option<f64>> = (0..nq)
        .map(|q_idx| {
            plan.b_grid
                .iter()
                .enumerate()
                .find(|(b_idx, _)| cells[*b_idx][q_idx].acceptance >= target)
                .map(|(_, &b)| b)
        })
        .collect();
    let recommended_b = if b_star_per_q.iter().all(|b| b.is_some()) {
        Some(
            b_star_per_q
                .iter()
                .map(|b| b.unwrap())
                .fold(f64::MIN, f64::max),
        )
    } else {
        None
    };

    Ok(CalibrationReport {
        b_grid: plan.b_grid.clone(),
        q_grid: plan.q_grid.clone(),
        trials: plan.trials,
        alpha: plan.alpha,
        a: plan.a,
        master_seed: plan.master_seed,
        noise_scope: plan.noise_scope,
        shared_subsamples: plan.shared_subsamples,
        n,
        p: data.p(),
        critical_per_q,
        cells,
        b_star_per_q,
        recommended_b,
    })
}

/// The b adequate for every examined q: the maximum of the per-q minima.
/// Ties across q resolve to that common (smaller) grid value by construction.
pub fn recommend_b(report: &CalibrationReport) -> Result<f64> {
    for (q_idx, b_star) in report.b_star_per_q.iter().enumerate() {
        if b_star.is_none() {
            return Err(Error::NoAdequateB {
                q: report.q_grid[q_idx],
                target: 1.0 - report.alpha,
            });
        }
    }
    report.recommended_b.ok_or(Error::NoAdequateB {
        q: f64::NAN,
        target: 1.0 - report.alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn instance(seed: u64, n: usize, p: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<(String, Vec<f64>)> = (0..p)
            .map(|j| {
                (
                    format!("x{j}"),
                    (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                )
            })
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                10.0 + cols
                    .iter()
                    .map(|(_, c)| c[i])
                    .sum::<f64>()
                    + rng.gen_range(-2.0..2.0)
            })
            .collect();
        Dataset::from_columns(&cols, "y", y).unwrap()
    }

    fn small_plan() -> CalibrationPlan {
        CalibrationPlan {
            b_grid: vec![0.5, 2.0],
            q_grid: vec![0.3],
            trials: 60,
            master_seed: 5,
            ..CalibrationPlan::default()
        }
    }

    #[test]
    fn full_sample_fraction_accepts_every_trial() {
        let d = instance(1, 120, 2);
        let plan = CalibrationPlan {
            b_grid: vec![1.0],
            q_grid: vec![1.0],
            trials: 25,
            master_seed: 9,
            ..CalibrationPlan::default()
        };
        let report = run_calibration(&d, &plan).unwrap();
        let cell = &report.cells[0][0];
        assert_eq!(cell.acceptance, 1.0);
        assert_eq!(cell.failed_trials, 0);
        // Full-sample invariance: F vanishes, so even the 95th percentile
        // sits at rounding level.
        assert!(cell.f_percentiles[4] < 1e-9, "{:?}", cell.f_percentiles);
    }

    #[test]
    fn median_f_decreases_with_b() {
        let d = instance(2, 160, 2);
        let report = run_calibration(&d, &small_plan()).unwrap();
        let median_small_b = report.cells[0][0].f_percentiles[2];
        let median_large_b = report.cells[1][0].f_percentiles[2];
        assert!(
            median_large_b <= median_small_b,
            "median F went up with b: {median_small_b} -> {median_large_b}"
        );
    }

    #[test]
    fn deterministic_and_worker_count_independent() {
        let d = instance(3, 140, 2);
        let mut plan = small_plan();
        plan.trials = 40;
        let r1 = run_calibration(&d, &plan).unwrap();
        let r2 = run_calibration(&d, &plan).unwrap();
        assert_eq!(r1, r2);
        plan.workers = Some(1);
        let serial = run_calibration(&d, &plan).unwrap();
        plan.workers = Some(4);
        let parallel = run_calibration(&d, &plan).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(r1, serial);
    }

    #[test]
    fn subsample_fit_scope_is_degenerate() {
        let d = instance(4, 140, 2);
        let plan = CalibrationPlan {
            noise_scope: NoiseScope::SubsampleFit,
            ..small_plan()
        };
        let report = run_calibration(&d, &plan).unwrap();
        for row in &report.cells {
            for cell in row {
                assert_eq!(cell.acceptance, 1.0);
                assert!(cell.f_percentiles[4] < 1e-9, "{:?}", cell.f_percentiles);
            }
        }
    }

    #[test]
    fn shared_subsamples_reuse_the_draw_across_b() {
        let d = instance(5, 140, 2);
        let plan = CalibrationPlan {
            shared_subsamples: true,
            ..small_plan()
        };
        // Same q and trial must pick identical subsamples for both b values:
        // with a = -2 under FullFit the released subsample differs, but the
        // row selection is the stream's job; verify via the degenerate scope
        // where identical subsample + noise seeds mean identical F.
        let report = run_calibration(&d, &plan).unwrap();
        assert_eq!(report.cells.len(), 2);
        // separate check below on the stream level
        let a = derive_rng(7, Domain::Subsample, &[0, 3]);
        let b = derive_rng(7, Domain::Subsample, &[0, 3]);
        let mut a = a;
        let mut b = b;
        assert_eq!(rand::Rng::gen::<u64>(&mut a), rand::Rng::gen::<u64>(&mut b));
    }

    #[test]
    fn insufficient_subsample_is_rejected() {
        let d = instance(6, 100, 2);
        let plan = CalibrationPlan {
            q_grid: vec![0.05], // floor(5) <= 2 * 3
            ..small_plan()
        };
        let err = run_calibration(&d, &plan).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)), "{err}");
    }

    #[test]
    fn plan_validation() {
        let d = instance(7, 100, 2);
        let bad_b = CalibrationPlan {
            b_grid: vec![1.0, 0.5],
            ..small_plan()
        };
        assert!(run_calibration(&d, &bad_b).is_err());
        let bad_q = CalibrationPlan {
            q_grid: vec![1.5],
            ..small_plan()
        };
        assert!(run_calibration(&d, &bad_q).is_err());
        let bad_trials = CalibrationPlan {
            trials: 0,
            ..small_plan()
        };
        assert!(run_calibration(&d, &bad_trials).is_err());
        let bad_a = CalibrationPlan {
            a: 0.0,
            ..small_plan()
        };
        assert!(run_calibration(&d, &bad_a).is_err());
    }

    fn handmade_report(acceptance: Vec<Vec<f64>>, b_grid: Vec<f64>, q_grid: Vec<f64>) -> CalibrationReport {
        let cells: Vec<Vec<CalibrationCell>> = acceptance
            .iter()
            .map(|row| {
                row.iter()
                    .map(|&a| CalibrationCell {
                        acceptance: a,
                        f_percentiles: [0.0; 5],
                        failed_trials: 0,
                    })
                    .collect()
            })
            .collect();
        let target = 0.95;
        let b_star_per_q: Vec<Option<f64>> = (0..q_grid.len())
            .map(|q| {
                b_grid
                    .iter()
                    .enumerate()
                    .find(|(bi, _)| cells[*bi][q].acceptance >= target)
                    .map(|(_, &b)| b)
            })
            .collect();
        let recommended_b = if b_star_per_q.iter().all(|b| b.is_some()) {
            Some(b_star_per_q.iter().map(|b| b.unwrap()).fold(f64::MIN, f64::max))
        } else {
            None
        };
        CalibrationReport {
            b_grid,
            q_grid: q_grid.clone(),
            trials: 100,
            alpha: 0.05,
            a: -2.0,
            master_seed: 0,
            noise_scope: NoiseScope::FullFit,
            shared_subsamples: false,
            n: 100,
            p: 2,
            critical_per_q: vec![1.7; q_grid.len()],
            cells,
            b_star_per_q,
            recommended_b,
        }
    }

    #[test]
    fn recommend_takes_max_of_per_q_minima() {
        // q1 reaches 0.95 at b = 0.5; q2 only at b = 1.0.
        let report = handmade_report(
            vec![vec![0.96, 0.90], vec![0.97, 0.95], vec![1.0, 1.0]],
            vec![0.5, 1.0, 1.5],
            vec![0.2, 0.4],
        );
        assert_eq!(report.b_star_per_q, vec![Some(0.5), Some(1.0)]);
        assert_eq!(recommend_b(&report).unwrap(), 1.0);
    }

    #[test]
    fn recommend_reports_inadequate_grid() {
        let report = handmade_report(
            vec![vec![0.96, 0.80], vec![0.97, 0.90]],
            vec![0.5, 1.0],
            vec![0.2, 0.4],
        );
        let err = recommend_b(&report).unwrap_err();
        match err {
            Error::NoAdequateB { q, .. } => assert_eq!(q, 0.4),
            other => panic!("expected NoAdequateB, got {other}"),
        }
    }

    #[test]
    fn percentile_convention_is_order_statistic() {
        let values: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let p = percentiles(&values);
        // rank = ceil(level * 100): 5th, 10th, 50th, 90th, 95th values.
        assert_eq!(p, [5.0, 10.0, 50.0, 90.0, 95.0]);
        let single = percentiles(&[2.5]);
        assert_eq!(single, [2.5; 5]);
        assert!(percentiles(&[]).iter().all(|v| v.is_nan()));
    }
}
