//! End-to-end acceptance suite. Each test prints one `criterion NN ...: PASS`
//! or `FAIL` line (run with `--nocapture` to see them all) and then asserts,
//! so a red run still names the criterion that broke. Tolerances are pinned
//! here, not read from anywhere else.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use regmask_core::nalgebra::{DMatrix, DVector};
use regmask_core::{
    chow_test, draw_direction, f_cdf, f_quantile, fit_ols, generate_synthetic, make_noise,
    orthogonalize, pearson, perturb, predict, run_calibration, CalibrationPlan, Dataset,
    NoiseSpec, PositivityPolicy, SynthSpec,
};

type Rng8 = rand_chacha::ChaCha8Rng;

fn criterion<F: FnOnce()>(number: u32, name: &str, body: F) {
    let outcome = catch_unwind(AssertUnwindSafe(body));
    println!(
        "criterion {number:>2} {name}: {}",
        if outcome.is_ok() { "PASS" } else { "FAIL" }
    );
    if let Err(payload) = outcome {
        std::panic::resume_unwind(payload);
    }
}

fn assert_rel(actual: f64, expected: f64, tol: f64, what: &str) {
    let scale = expected.abs().max(1e-300);
    assert!(
        (actual - expected).abs() <= tol * scale,
        "{what}: actual {actual}, expected {expected}, rel dev {}",
        (actual - expected).abs() / scale
    );
}

/// A random full-rank instance with strong signal, so t-ratios are
/// well-conditioned quotients.
fn instance(seed: u64, n: usize, p: usize) -> Dataset {
    let mut rng = Rng8::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, p + 1);
    for i in 0..n {
        x[(i, 0)] = 1.0;
        for j in 1..=p {
            x[(i, j)] = rng.gen_range(-3.0..3.0);
        }
    }
    let weights: Vec<f64> = (0..=p)
        .map(|_| {
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            sign * rng.gen_range(1.0..2.0)
        })
        .collect();
    let y = DVector::from_fn(n, |i, _| {
        let signal: f64 = (0..=p).map(|j| weights[j] * x[(i, j)]).sum();
        signal + rng.gen_range(-2.0..2.0)
    });
    let names = (0..=p)
        .map(|j| {
            if j == 0 {
                "intercept".to_string()
            } else {
                format!("x{j}")
            }
        })
        .collect();
    Dataset::new(x, y, names, "y".to_string()).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_regmask"))
}

// 1. Identity suite: on 200 random instances (n in [30, 500], p in [1, 13]),
//    the six construction identities hold to 1e-9 relative. Under 10 s.
#[test]
fn identity_suite() {
    criterion(1, "noise construction identities", || {
        let started = Instant::now();
        let tol = 1e-9;
        let a_cycle = [-3.0, -2.0, -1.0 + 3.0_f64.sqrt(), 1.0, 0.7, -0.5];
        let b_cycle = [0.0, 0.25, 0.5, 1.0, 2.0, 3.5];
        let mut rng = Rng8::seed_from_u64(20_260_814);
        for trial in 0..200u64 {
            let n = rng.gen_range(30..=500);
            let p = rng.gen_range(1..=13.min(n / 3));
            let data = instance(trial.wrapping_mul(7919).wrapping_add(1), n, p);
            let a = a_cycle[trial as usize % a_cycle.len()];
            let b = b_cycle[trial as usize % b_cycle.len()];
            let fit = fit_ols(&data).unwrap();
            let e = &fit.residual;
            let e_norm2 = e.norm_squared();

            // X'e = 0
            for j in 0..data.num_params() {
                let col = data.x().column(j);
                assert!(
                    col.dot(e).abs() <= tol * col.norm() * e.norm(),
                    "X'e at column {j}, trial {trial}"
                );
            }

            let u = if b > 0.0 {
                let v = draw_direction(n, &mut rng);
                let u = orthogonalize(&fit, &data, &v).unwrap();
                // X'u = 0 and e'u = 0
                for j in 0..data.num_params() {
                    let col = data.x().column(j);
                    assert!(
                        col.dot(&u).abs() <= tol * col.norm() * u.norm(),
                        "X'u at column {j}, trial {trial}"
                    );
                }
                assert!(
                    e.dot(&u).abs() <= tol * e.norm() * u.norm(),
                    "e'u, trial {trial}"
                );
                Some(u)
            } else {
                None
            };

            let eps = make_noise(&fit, u.as_ref(), a, b).unwrap();

            // X'eps = 0
            for j in 0..data.num_params() {
                let col = data.x().column(j);
                assert!(
                    col.dot(&eps).abs() <= tol * col.norm() * eps.norm(),
                    "X'eps at column {j}, trial {trial}"
                );
            }

            // e'eps and ||eps||^2
            assert_rel(
                e.dot(&eps),
                a * e_norm2 / (1.0 + b),
                tol,
                &format!("e'eps, trial {trial}"),
            );
            assert_rel(
                eps.norm_squared(),
                a * a * e_norm2 / (1.0 + b),
                tol,
                &format!("||eps||^2, trial {trial}"),
            );

            // deviation sum: ||y + eps - ybar 1||^2 = TSS + a(a+2)||e||^2/(1+b)
            let released = data.y() + &eps;
            let deviations = released.map(|v| v - fit.y_bar);
            let expected_tss = fit.tss + a * (a + 2.0) * e_norm2 / (1.0 + b);
            assert!(
                (deviations.norm_squared() - expected_tss).abs() <= tol * fit.tss,
                "deviation sum, trial {trial}"
            );

            // RSS after refit: RSS (1 + a(a+2)/(1+b))
            let refit = fit_ols(&data.with_response(released).unwrap()).unwrap();
            let expected_rss = fit.rss * (1.0 + a * (a + 2.0) / (1.0 + b));
            assert!(
                (refit.rss - expected_rss).abs() <= tol * fit.rss,
                "RSS formula, trial {trial}: got {}, want {expected_rss}",
                refit.rss
            );
        }
        let elapsed = started.elapsed();
        assert!(elapsed.as_secs_f64() < 10.0, "identity suite took {elapsed:?}");
    });
}

// 2. Closed forms: empirical t-ratios, R^2, and correlation from refitting
//    match the predictions to 1e-8 over a grid of (a, b).
#[test]
fn closed_form_predictions() {
    criterion(2, "closed-form statistics under refit", || {
        let tol = 1e-8;
        let data = instance(42, 160, 6);
        let original = fit_ols(&data).unwrap();
        let a_values = [-3.0, -2.0, -1.0 + 3.0_f64.sqrt(), 1.0];
        let b_values = [0.0, 0.5, 1.0, 2.0];
        let mut seed = 5000;
        for &a in &a_values {
            for &b in &b_values {
                seed += 1;
                // all 16 pairs sit inside the region where the scale is defined
                assert!(1.0 + b + a * (a + 2.0) > 0.0);
                let spec = NoiseSpec {
                    a,
                    b,
                    seed,
                    positivity: PositivityPolicy::Off,
                    max_retries: 10,
                };
                let release = perturb(&data, &spec).unwrap();
                let refit = fit_ols(&data.with_response(release.y_perturbed.clone()).unwrap())
                    .unwrap();
                let prediction = predict(a, b, original.r_squared).unwrap();
                for j in 0..data.num_params() {
                    assert_rel(
                        refit.t_values[j] / original.t_values[j],
                        prediction.t_scale,
                        tol,
                        &format!("t ratio, a={a} b={b} j={j}"),
                    );
                }
                assert_rel(
                    refit.r_squared,
                    prediction.r2_perturbed,
                    tol,
                    &format!("R^2, a={a} b={b}"),
                );
                assert_rel(
                    pearson(data.y(), &release.y_perturbed),
                    prediction.correlation,
                    tol,
                    &format!("correlation, a={a} b={b}"),
                );
            }
        }
    });
}

/// Rows R^2 = 0.4, 0.6, 0.8; columns b = 0, 0.25, ..., 2. Frozen reference
/// values, rounded to two decimals.
const REFERENCE_CORRELATION_GRID: [[f64; 9]; 3] = [
    [-0.2, 0.04, 0.2, 0.31, 0.4, 0.47, 0.52, 0.56, 0.6],
    [0.2, 0.36, 0.47, 0.54, 0.6, 0.64, 0.68, 0.71, 0.73],
    [0.6, 0.68, 0.73, 0.77, 0.8, 0.82, 0.84, 0.85, 0.87],
];

// 3. Exact preservation at a = -2, plus the emitted correlation table
//    matching the frozen 27-cell reference grid to +-0.005.
#[test]
fn exact_preservation_and_table() {
    criterion(3, "a = -2 exactness and correlation table", || {
        let tol = 1e-9;
        let data = instance(7, 200, 8);
        let original = fit_ols(&data).unwrap();
        for k in 0..=8u32 {
            let b = 0.25 * f64::from(k);
            let spec = NoiseSpec {
                a: -2.0,
                b,
                seed: 900 + u64::from(k),
                positivity: PositivityPolicy::Off,
                max_retries: 10,
            };
            let release = perturb(&data, &spec).unwrap();
            let refit =
                fit_ols(&data.with_response(release.y_perturbed.clone()).unwrap()).unwrap();
            for j in 0..data.num_params() {
                assert_rel(
                    refit.beta_hat[j],
                    original.beta_hat[j],
                    tol,
                    &format!("beta {j}, b={b}"),
                );
                assert_rel(
                    refit.t_values[j],
                    original.t_values[j],
                    tol,
                    &format!("t {j}, b={b}"),
                );
            }
            assert_rel(refit.r_squared, original.r_squared, tol, &format!("R^2, b={b}"));
            assert_rel(
                pearson(data.y(), &release.y_perturbed),
                1.0 - 2.0 * (1.0 - original.r_squared) / (1.0 + b),
                tol,
                &format!("correlation, b={b}"),
            );
        }

        // the emitted table
        let output = bin().arg("theory-table").output().unwrap();
        assert!(output.status.success());
        let stdout = String::from_utf8(output.stdout).unwrap();
        let rows: Vec<Vec<f64>> = stdout
            .lines()
            .filter(|line| !line.starts_with('#') && !line.starts_with("r2\\b"))
            .map(|line| {
                line.split_whitespace()
                    .map(|token| token.parse().unwrap())
                    .collect()
            })
            .collect();
        assert_eq!(rows.len(), 3, "table rows:\n{stdout}");
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), 10, "row {i} has a label plus 9 cells");
            for (j, cell) in row[1..].iter().enumerate() {
                assert!(
                    (cell - REFERENCE_CORRELATION_GRID[i][j]).abs() <= 0.005,
                    "cell ({i}, {j}): printed {cell}, reference {}",
                    REFERENCE_CORRELATION_GRID[i][j]
                );
            }
        }
    });
}

// 4. Quasi-set cross-correlation on housing-shaped data: original/release
//    correlation equals R^2 exactly at b = 1; release pairs stay in a
//    +-0.03 band around R^2 and match the direct expansion oracle.
#[test]
fn quasi_set_cross_correlation() {
    criterion(4, "cross-correlation of independent releases", || {
        let data = generate_synthetic(&SynthSpec::housing_shaped(1320, 4)).unwrap();
        let fit = fit_ols(&data).unwrap();
        let r2 = fit.r_squared;
        assert!((r2 - 0.78).abs() < 1e-9);

        let mut directions = Vec::new();
        let mut releases = Vec::new();
        for k in 0..4u64 {
            let mut rng = Rng8::seed_from_u64(1000 + k);
            let v = draw_direction(data.n(), &mut rng);
            let u = orthogonalize(&fit, &data, &v).unwrap();
            let eps = make_noise(&fit, Some(&u), -2.0, 1.0).unwrap();
            directions.push(u.normalize());
            releases.push(data.y() + eps);
        }
        for (k, release) in releases.iter().enumerate() {
            assert_rel(
                pearson(data.y(), release),
                r2,
                1e-9,
                &format!("original vs release {k}"),
            );
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                let actual = pearson(&releases[i], &releases[j]);
                assert!(
                    (actual - r2).abs() <= 0.03,
                    "release {i} vs {j}: {actual} outside {r2} +- 0.03"
                );
                // direct expansion: corr = R^2 + (1 - R^2) u_i'u_j
                let oracle = r2 + (1.0 - r2) * directions[i].dot(&directions[j]);
                assert_rel(actual, oracle, 1e-9, &format!("expansion, pair ({i}, {j})"));
            }
        }
    });
}

// 5. Full-sample Chow invariance: original vs release on the whole dataset
//    gives F < 1e-9 for 50 random instances.
#[test]
fn chow_full_sample_invariance() {
    criterion(5, "full-sample Chow F is zero", || {
        let b_cycle = [0.0, 0.3, 1.0, 1.7, 2.5];
        for trial in 0..50u64 {
            let mut rng = Rng8::seed_from_u64(60_000 + trial);
            let n = rng.gen_range(40..=200);
            let p = rng.gen_range(1..=8);
            let data = instance(90_000 + trial, n, p);
            let spec = NoiseSpec {
                a: -2.0,
                b: b_cycle[trial as usize % b_cycle.len()],
                seed: trial,
                positivity: PositivityPolicy::Off,
                max_retries: 10,
            };
            let release = perturb(&data, &spec).unwrap();
            let perturbed = data.with_response(release.y_perturbed).unwrap();
            let result = chow_test(&data, &perturbed, 0.05).unwrap();
            assert!(
                result.f_value < 1e-9,
                "trial {trial}: F = {}",
                result.f_value
            );
        }
    });
}

// 6. F quantile: the tabulated critical value and a CDF round trip.
#[test]
fn f_quantile_reference() {
    criterion(6, "F quantile reference and round trip", || {
        let q = f_quantile(14, 500, 0.05).unwrap();
        assert!((q - 1.71).abs() <= 0.005, "f_quantile(14, 500, 0.05) = {q}");
        for &(df1, df2, alpha) in &[
            (14u64, 500u64, 0.05),
            (1, 1, 0.5),
            (3, 7, 0.01),
            (10, 2, 0.25),
            (30, 120, 0.95),
        ] {
            let x = f_quantile(df1, df2, alpha).unwrap();
            let p = f_cdf(x, df1, df2).unwrap();
            assert!(
                (p - (1.0 - alpha)).abs() <= 1e-9,
                "round trip df=({df1}, {df2}), alpha={alpha}: cdf(quantile) = {p}"
            );
        }
    });
}

// 7. Calibration shape on housing-shaped data, q = 0.2, trials = 1000,
//    single-threaded under 5 minutes; reduced profile under 20 s.
#[test]
fn calibration_shape() {
    criterion(7, "calibration acceptance shape", || {
        let data = generate_synthetic(&SynthSpec::housing_shaped(1320, 0)).unwrap();
        let plan = CalibrationPlan {
            q_grid: vec![0.2],
            workers: Some(1),
            ..CalibrationPlan::default()
        };
        let started = Instant::now();
        let report = run_calibration(&data, &plan).unwrap();
        let elapsed = started.elapsed();
        assert!(
            elapsed.as_secs_f64() < 300.0,
            "full profile took {elapsed:?} single-threaded"
        );

        let acceptance: Vec<f64> = report.cells.iter().map(|row| row[0].acceptance).collect();
        let at_b1 = report
            .b_grid
            .iter()
            .position(|&b| b == 1.0)
            .expect("grid holds b = 1.0");
        assert!(
            (0.85..=1.0).contains(&acceptance[at_b1]),
            "acceptance at b = 1.0 is {}",
            acceptance[at_b1]
        );
        assert_eq!(
            *acceptance.last().unwrap(),
            1.0,
            "acceptance at the top of the grid"
        );
        for window in acceptance.windows(2) {
            assert!(
                window[1] >= window[0] - 0.02,
                "acceptance fell more than the slack: {} -> {}",
                window[0],
                window[1]
            );
        }

        // reduced profile for CI boxes
        let small = generate_synthetic(&SynthSpec::housing_shaped(200, 0)).unwrap();
        let reduced = CalibrationPlan {
            q_grid: vec![0.2],
            trials: 200,
            workers: Some(1),
            ..CalibrationPlan::default()
        };
        let started = Instant::now();
        run_calibration(&small, &reduced).unwrap();
        let elapsed = started.elapsed();
        assert!(elapsed.as_secs_f64() < 20.0, "reduced profile took {elapsed:?}");
    });
}

// 8. Reduced-accuracy mode: a = -1 + sqrt(b + 2) scales every t by 1/sqrt(2)
//    and maps R^2 to R^2/(2 - R^2).
#[test]
fn reduced_accuracy_mode() {
    criterion(8, "reduced-accuracy closed form", || {
        let tol = 1e-8;
        let data = instance(314, 180, 7);
        let original = fit_ols(&data).unwrap();
        for (k, &b) in [0.5f64, 1.0, 2.0].iter().enumerate() {
            let a = -1.0 + (b + 2.0).sqrt();
            let spec = NoiseSpec {
                a,
                b,
                seed: 7000 + k as u64,
                positivity: PositivityPolicy::Off,
                max_retries: 10,
            };
            let release = perturb(&data, &spec).unwrap();
            let refit =
                fit_ols(&data.with_response(release.y_perturbed).unwrap()).unwrap();
            for j in 0..data.num_params() {
                assert_rel(
                    refit.t_values[j] / original.t_values[j],
                    std::f64::consts::FRAC_1_SQRT_2,
                    tol,
                    &format!("t ratio, b={b} j={j}"),
                );
            }
            assert_rel(
                refit.r_squared,
                original.r_squared / (2.0 - original.r_squared),
                tol,
                &format!("reduced R^2, b={b}"),
            );
        }
    });
}

// 9. Determinism: perturb and calibrate produce byte-identical outputs
//    across repeated runs and across worker counts 1 and 4.
#[test]
fn byte_identical_outputs() {
    criterion(9, "byte-identical outputs", || {
        let dir = tempfile::tempdir().unwrap();
        let path = |name: &str| dir.path().join(name);
        let status = bin()
            .args(["synth", path("in.csv").to_str().unwrap(), "--n", "120", "--seed", "11"])
            .status()
            .unwrap();
        assert!(status.success());

        let run_perturb = |out: &str| {
            let status = bin()
                .args([
                    "perturb",
                    path("in.csv").to_str().unwrap(),
                    path(out).to_str().unwrap(),
                    "--a",
                    "-2",
                    "--b",
                    "1.0",
                    "--seed",
                    "42",
                    "--response",
                    "price",
                    "--disclose-seed",
                ])
                .status()
                .unwrap();
            assert!(status.success());
        };
        run_perturb("r1.csv");
        run_perturb("r2.csv");
        assert_eq!(
            std::fs::read(path("r1.csv")).unwrap(),
            std::fs::read(path("r2.csv")).unwrap(),
            "released CSVs differ between identical runs"
        );
        assert_eq!(
            std::fs::read(path("r1.meta")).unwrap(),
            std::fs::read(path("r2.meta")).unwrap(),
            "sidecars differ between identical runs"
        );

        let run_calibrate = |out: &str, workers: &str| {
            let status = bin()
                .args([
                    "calibrate",
                    path("in.csv").to_str().unwrap(),
                    "--response",
                    "price",
                    "--b",
                    "0.5,1.0,1.5",
                    "--q",
                    "0.4,0.6",
                    "--trials",
                    "120",
                    "--seed",
                    "5",
                    "--workers",
                    workers,
                    "--out",
                    path(out).to_str().unwrap(),
                ])
                .status()
                .unwrap();
            assert!(status.success());
        };
        run_calibrate("c1.txt", "1");
        run_calibrate("c2.txt", "4");
        run_calibrate("c3.txt", "4");
        let c1 = std::fs::read(path("c1.txt")).unwrap();
        assert_eq!(
            c1,
            std::fs::read(path("c2.txt")).unwrap(),
            "reports differ between 1 and 4 workers"
        );
        assert_eq!(
            c1,
            std::fs::read(path("c3.txt")).unwrap(),
            "reports differ between repeated runs"
        );
    });
}

// 10. Positivity policy: on data engineered so one row has yhat - e < 0,
//     perturb with b = 0.5 either succeeds with a positive release or exits
//     with code 5 and reports the best minimum it saw.
#[test]
fn positivity_policy() {
    criterion(10, "positivity retry-or-report", || {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("skewed.csv");
        // y = x/2 except the first row, whose response is hoisted far above
        // the line: that row's yhat - e lands below zero.
        let mut text = String::from("y,x\n");
        for x in 1..=9 {
            let y = if x == 1 { 6.0 } else { 0.5 * f64::from(x) };
            text.push_str(&format!("{y},{x}\n"));
        }
        std::fs::write(&input, text).unwrap();

        let output_path = dir.path().join("out.csv");
        let output = bin()
            .args([
                "perturb",
                input.to_str().unwrap(),
                output_path.to_str().unwrap(),
                "--b",
                "0.5",
                "--positivity",
                "require",
                "--seed",
                "7",
            ])
            .output()
            .unwrap();
        match output.status.code() {
            Some(0) => {
                let released = std::fs::read_to_string(&output_path).unwrap();
                let min = released
                    .lines()
                    .skip(1)
                    .map(|line| line.split(',').next().unwrap().parse::<f64>().unwrap())
                    .fold(f64::INFINITY, f64::min);
                assert!(min > 0.0, "accepted release has minimum {min}");
            }
            Some(5) => {
                let stderr = String::from_utf8(output.stderr).unwrap();
                assert!(
                    stderr.contains("best minimum"),
                    "exit 5 without the best-minimum report: {stderr}"
                );
                assert!(!output_path.exists(), "failed run left an output file");
            }
            other => panic!("expected exit 0 or 5, got {other:?}"),
        }
    });
}
