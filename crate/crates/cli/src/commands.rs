//! The seven subcommands. Each resolves its parameters (flag, then config
//! key, then default), echoes the resolution to stderr, and keeps stdout
//! machine-parsable: `key=value` lines or a whitespace-separated grid.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use regmask_core::nalgebra::DVector;
use regmask_core::{
    chow_test, correlation_grid, fit_ols, generate_synthetic, pearson, perturb, run_calibration,
    verify_release, CalibrationPlan, CalibrationReport, NoiseScope, NoiseSpec, PositivityPolicy,
    SynthSpec, PERCENTILE_LEVELS,
};

use crate::config::{parse_grid, Config};
use crate::csv_io::{read_table, write_atomic, write_table, ResponseFormat};
use crate::error::{CliError, CliResult};
use crate::schema::{build_dataset, default_schema, load_schema, resolve_schema, ColumnRole};
use crate::sidecar::{Sidecar, FORMAT_VERSION};

#[derive(Parser)]
#[command(
    name = "regmask",
    version,
    about = "Mask a regression response with structured noise that leaves OLS estimates intact",
    propagate_version = true
)]
pub struct Cli {
    /// Flat TOML config; flags override config keys, config overrides defaults
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Fit OLS and print coefficients, t-values, and fit statistics
    Fit(FitArgs),
    /// Write a perturbed copy of a dataset plus a metadata sidecar
    Perturb(PerturbArgs),
    /// Check a released file against its sidecar and the closed-form predictions
    Verify(VerifyArgs),
    /// Chow stability test between two datasets with the same columns
    Chow(ChowArgs),
    /// Sweep the noise mix b over subsample Chow tests and recommend a value
    Calibrate(CalibrateArgs),
    /// Generate a synthetic housing-shaped dataset
    Synth(SynthArgs),
    /// Print the original/release correlation grid at the exact-preserving amplitude
    TheoryTable(TheoryTableArgs),
}

fn emit_resolved(pairs: &[(&str, String)]) {
    for (key, value) in pairs {
        eprintln!("resolved.{key}={value}");
    }
}

fn parse_positivity(name: &str) -> CliResult<PositivityPolicy> {
    match name {
        "auto" => Ok(PositivityPolicy::Auto),
        "require" => Ok(PositivityPolicy::Require),
        "off" => Ok(PositivityPolicy::Off),
        other => Err(CliError::Usage(format!(
            "positivity must be auto, require, or off, got '{other}'"
        ))),
    }
}

fn resolve_string(flag: Option<String>, config: &Config, key: &str) -> CliResult<Option<String>> {
    Ok(flag.or(config.string(key)?))
}

fn resolve_f64(flag: Option<f64>, config: &Config, key: &str, default: f64) -> CliResult<f64> {
    Ok(flag.or(config.f64(key)?).unwrap_or(default))
}

fn resolve_flag(flag: bool, config: &Config, key: &str) -> CliResult<bool> {
    Ok(flag || config.bool(key)?.unwrap_or(false))
}

fn grid_to_string(grid: &[f64]) -> String {
    grid.iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

// ---------------------------------------------------------------- fit

#[derive(Args)]
pub struct FitArgs {
    /// Input CSV with a header row
    pub input: PathBuf,
    /// Response column (default: the first column)
    #[arg(long)]
    pub response: Option<String>,
    /// TOML schema assigning column kinds and roles
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,
}

pub fn run_fit(args: &FitArgs, config: &Config) -> CliResult<ExitCode> {
    let response = resolve_string(args.response.clone(), config, "response")?;
    let table = read_table(&args.input)?;
    let schema = resolve_schema(&table, args.schema.as_deref(), response.as_deref())?;
    let (data, _) = build_dataset(&table, &schema)?;
    emit_resolved(&[
        ("input", args.input.display().to_string()),
        ("response", data.response_name().to_string()),
    ]);
    let fit = fit_ols(&data)?;
    let mut out = String::new();
    out.push_str(&format!("n={}\n", data.n()));
    out.push_str(&format!("p={}\n", data.p()));
    out.push_str(&format!("response={}\n", data.response_name()));
    out.push_str(&format!("r_squared={}\n", fit.r_squared));
    out.push_str(&format!("rss={}\n", fit.rss));
    out.push_str(&format!("tss={}\n", fit.tss));
    out.push_str(&format!("y_mean={}\n", fit.y_bar));
    for (j, name) in data.column_names().iter().enumerate() {
        out.push_str(&format!("beta.{name}={}\n", fit.beta_hat[j]));
    }
    for (j, name) in data.column_names().iter().enumerate() {
        out.push_str(&format!("t_value.{name}={}\n", fit.t_values[j]));
    }
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- perturb

#[derive(Args)]
pub struct PerturbArgs {
    /// Input CSV
    pub input: PathBuf,
    /// Output CSV: same columns, response replaced
    pub output: PathBuf,
    /// Noise amplitude; -2 preserves coefficients, t-values, and R^2
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Noise mix >= 0; larger b keeps the release closer to the original
    #[arg(long)]
    pub b: Option<f64>,
    /// Master seed (default: fresh OS entropy, echoed to stderr)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Response column (default: the first column)
    #[arg(long)]
    pub response: Option<String>,
    /// TOML schema assigning column kinds and roles
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,
    /// auto (enforce when the original is all-positive), require, or off
    #[arg(long)]
    pub positivity: Option<String>,
    /// Retry budget for the positivity loop
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Round the released response to whole currency units. Breaks exact
    /// invariance; the sidecar records post-rounding statistics
    #[arg(long)]
    pub round_yen: bool,
    /// Record the seed in the sidecar. Seed plus parameters reconstructs the
    /// original response: disclose deliberately
    #[arg(long)]
    pub disclose_seed: bool,
    /// Sidecar path (default: the output path with extension "meta")
    #[arg(long, value_name = "FILE")]
    pub sidecar: Option<PathBuf>,
}

pub fn run_perturb(args: &PerturbArgs, config: &Config) -> CliResult<ExitCode> {
    let a = resolve_f64(args.a, config, "a", -2.0)?;
    let b = resolve_f64(args.b, config, "b", 1.0)?;
    let seed = match args.seed.or(config.u64("seed")?) {
        Some(s) => s,
        None => rand::random::<u64>(),
    };
    let positivity_name = resolve_string(args.positivity.clone(), config, "positivity")?
        .unwrap_or_else(|| "auto".to_string());
    let positivity = parse_positivity(&positivity_name)?;
    let max_retries = match args.max_retries {
        Some(v) => v,
        None => config.u32("max_retries")?.unwrap_or(100),
    };
    let round_yen = resolve_flag(args.round_yen, config, "round_yen")?;
    let disclose_seed = resolve_flag(args.disclose_seed, config, "disclose_seed")?;
    let response = resolve_string(args.response.clone(), config, "response")?;
    let sidecar_path = args
        .sidecar
        .clone()
        .unwrap_or_else(|| args.output.with_extension("meta"));

    let table = read_table(&args.input)?;
    let schema = resolve_schema(&table, args.schema.as_deref(), response.as_deref())?;
    let (data, response_idx) = build_dataset(&table, &schema)?;

    emit_resolved(&[
        ("input", args.input.display().to_string()),
        ("output", args.output.display().to_string()),
        ("sidecar", sidecar_path.display().to_string()),
        ("response", data.response_name().to_string()),
        ("a", a.to_string()),
        ("b", b.to_string()),
        ("seed", seed.to_string()),
        ("positivity", positivity_name.clone()),
        ("max_retries", max_retries.to_string()),
        ("round_yen", round_yen.to_string()),
        ("disclose_seed", disclose_seed.to_string()),
    ]);

    let spec = NoiseSpec {
        a,
        b,
        seed,
        positivity,
        max_retries,
    };
    let release = perturb(&data, &spec)?;

    let mut y_out: Vec<f64> = release.y_perturbed.iter().copied().collect();
    if round_yen {
        for v in &mut y_out {
            *v = v.round();
        }
    }
    let y_written = DVector::from_vec(y_out.clone());
    // The sidecar describes the file actually written, so a rounded release
    // is refit after rounding.
    let (achieved_r2, achieved_t, correlation) = if round_yen {
        let refit = fit_ols(&data.with_response(y_written.clone())?)?;
        let corr = pearson(data.y(), &y_written);
        (refit.r_squared, refit.t_values, corr)
    } else {
        (
            release.achieved_r_squared,
            release.achieved_t_values.clone(),
            release.correlation_with_original,
        )
    };
    let min = y_written.min();
    if round_yen && release.positivity_enforced && min <= 0.0 {
        return Err(CliError::Positivity(format!(
            "rounding drove the released minimum to {min}; rerun with a different seed or without --round-yen"
        )));
    }

    let mut meta = Sidecar::default();
    meta.push("format_version", FORMAT_VERSION);
    meta.push("command", "perturb");
    meta.push("original_file", args.input.display());
    meta.push("response", data.response_name());
    meta.push("n", data.n());
    meta.push("p", data.p());
    meta.push("a", a);
    meta.push("b", b);
    meta.push("positivity_policy", &positivity_name);
    meta.push("positivity_enforced", release.positivity_enforced);
    meta.push("retries_used", release.retries_used);
    meta.push("max_retries", max_retries);
    meta.push("rounded_to_integer", round_yen);
    meta.push("seed_disclosed", disclose_seed);
    if disclose_seed {
        meta.push("seed", seed);
    }
    meta.push("achieved.mean", y_written.mean());
    meta.push("achieved.min", min);
    meta.push("achieved.r_squared", achieved_r2);
    meta.push("achieved.correlation", correlation);
    for (j, name) in data.column_names().iter().enumerate() {
        meta.push(&format!("achieved.t_value.{name}"), achieved_t[j]);
    }

    let mut columns = table.columns.clone();
    columns[response_idx] = y_out;
    let format = if round_yen {
        ResponseFormat::WholeNumber
    } else {
        ResponseFormat::FullPrecision
    };
    write_table(&args.output, &table.headers, &columns, response_idx, format)?;
    write_atomic(&sidecar_path, &meta.render())?;

    println!("wrote={}", args.output.display());
    println!("sidecar={}", sidecar_path.display());
    println!("achieved.r_squared={achieved_r2}");
    println!("achieved.correlation={correlation}");
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- verify

#[derive(Args)]
pub struct VerifyArgs {
    /// Original CSV
    pub original: PathBuf,
    /// Released CSV
    pub release: PathBuf,
    /// Sidecar written by perturb (default: release path with extension "meta")
    #[arg(long, value_name = "FILE")]
    pub sidecar: Option<PathBuf>,
    /// Relative tolerance; loosen to about 1e-6 for integer-rounded releases
    #[arg(long)]
    pub tol: Option<f64>,
    /// TOML schema assigning column kinds and roles
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,
}

pub fn run_verify(args: &VerifyArgs, config: &Config) -> CliResult<ExitCode> {
    let tol = resolve_f64(args.tol, config, "tol", 1e-9)?;
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(CliError::Usage(format!(
            "tolerance must be a positive number, got {tol}"
        )));
    }
    let sidecar_path = args
        .sidecar
        .clone()
        .unwrap_or_else(|| args.release.with_extension("meta"));
    let meta = Sidecar::load(&sidecar_path)?;
    let response = meta.require("response")?.to_string();
    let a = meta.require_f64("a")?;
    let b = meta.require_f64("b")?;
    let rounded = meta.get("rounded_to_integer") == Some("true");

    emit_resolved(&[
        ("original", args.original.display().to_string()),
        ("release", args.release.display().to_string()),
        ("sidecar", sidecar_path.display().to_string()),
        ("response", response.clone()),
        ("a", a.to_string()),
        ("b", b.to_string()),
        ("tol", tol.to_string()),
    ]);
    if rounded && tol < 1e-7 {
        eprintln!(
            "note: the release is rounded to whole units; the exact identities \
             hold only to rounding error, so a tolerance near 1e-6 is realistic"
        );
    }

    let original = read_table(&args.original)?;
    let released = read_table(&args.release)?;
    if original.headers != released.headers {
        return Err(CliError::Data(
            "original and release have different columns".into(),
        ));
    }
    if original.n_rows != released.n_rows {
        return Err(CliError::Data(format!(
            "original has {} rows, release has {}",
            original.n_rows, released.n_rows
        )));
    }
    let schema = match args.schema.as_deref() {
        Some(path) => {
            let schema = load_schema(path)?;
            let named = schema
                .iter()
                .find(|c| c.role == ColumnRole::Response)
                .map(|c| c.name.clone())
                .unwrap_or_default();
            if named != response {
                return Err(CliError::Data(format!(
                    "schema names response '{named}' but the sidecar says '{response}'"
                )));
            }
            schema
        }
        None => default_schema(&original.headers, Some(&response))?,
    };
    let (data, response_idx) = build_dataset(&original, &schema)?;
    for (j, header) in original.headers.iter().enumerate() {
        if j == response_idx {
            continue;
        }
        if original.columns[j] != released.columns[j] {
            return Err(CliError::Data(format!(
                "column '{header}' differs between original and release"
            )));
        }
    }

    let y_released = DVector::from_vec(released.columns[response_idx].clone());
    let report = verify_release(&data, &y_released, a, b, tol)?;
    print!("{}", report.to_key_value_lines());

    // The recorded diagnostics must describe the released file.
    let refit = fit_ols(&data.with_response(y_released.clone())?)?;
    let mut checks: Vec<(String, f64)> = vec![
        ("achieved.mean".into(), y_released.mean()),
        ("achieved.min".into(), y_released.min()),
        ("achieved.r_squared".into(), refit.r_squared),
        ("achieved.correlation".into(), pearson(data.y(), &y_released)),
    ];
    for (j, name) in data.column_names().iter().enumerate() {
        checks.push((format!("achieved.t_value.{name}"), refit.t_values[j]));
    }
    let mut sidecar_ok = true;
    let mut out = String::new();
    for (key, actual) in checks {
        let recorded = meta.require_f64(&key)?;
        let ok = (actual - recorded).abs() <= tol * recorded.abs().max(1.0);
        sidecar_ok &= ok;
        out.push_str(&format!(
            "sidecar.{key}.recorded={recorded}\nsidecar.{key}.actual={actual}\nsidecar.{key}.pass={ok}\n"
        ));
    }
    print!("{out}");
    let pass = report.pass && sidecar_ok;
    println!("verified={pass}");
    Ok(if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

// ---------------------------------------------------------------- chow

#[derive(Args)]
pub struct ChowArgs {
    /// First group CSV
    pub group1: PathBuf,
    /// Second group CSV, same columns
    pub group2: PathBuf,
    /// Test size for the critical value
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Response column (default: the first column)
    #[arg(long)]
    pub response: Option<String>,
    /// TOML schema assigning column kinds and roles
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,
}

pub fn run_chow(args: &ChowArgs, config: &Config) -> CliResult<ExitCode> {
    let alpha = resolve_f64(args.alpha, config, "alpha", 0.05)?;
    let response = resolve_string(args.response.clone(), config, "response")?;
    let table1 = read_table(&args.group1)?;
    let table2 = read_table(&args.group2)?;
    if table1.headers != table2.headers {
        return Err(CliError::Data(
            "the two groups have different columns".into(),
        ));
    }
    let schema = resolve_schema(&table1, args.schema.as_deref(), response.as_deref())?;
    let (data1, _) = build_dataset(&table1, &schema)?;
    let (data2, _) = build_dataset(&table2, &schema)?;
    emit_resolved(&[
        ("group1", args.group1.display().to_string()),
        ("group2", args.group2.display().to_string()),
        ("response", data1.response_name().to_string()),
        ("alpha", alpha.to_string()),
    ]);
    let result = chow_test(&data1, &data2, alpha)?;
    println!("f_value={}", result.f_value);
    println!("df1={}", result.df1);
    println!("df2={}", result.df2);
    println!("alpha={}", result.alpha);
    println!("critical_value={}", result.critical_value);
    println!("accepted={}", result.accepted);
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- calibrate

#[derive(Args)]
pub struct CalibrateArgs {
    /// Input CSV
    pub input: PathBuf,
    /// b grid: comma list or lo:hi:step (a bare lo:hi steps by 0.1)
    #[arg(long, value_name = "GRID")]
    pub b: Option<String>,
    /// Subsample fractions, same grid syntax
    #[arg(long, value_name = "GRID")]
    pub q: Option<String>,
    /// Monte Carlo trials per (b, q) cell
    #[arg(long)]
    pub trials: Option<u32>,
    /// Chow test size
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Noise amplitude used inside the trials
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Master seed for the whole sweep
    #[arg(long)]
    pub seed: Option<u64>,
    /// full-fit (noise from the full-sample fit, then subsampled) or
    /// subsample-fit (noise rebuilt on each subsample's own fit)
    #[arg(long)]
    pub scope: Option<String>,
    /// Reuse one subsample stream across the whole b grid
    #[arg(long)]
    pub shared_subsamples: bool,
    /// Worker threads (default: all cores; the report does not depend on this)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Write the report here instead of stdout
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Response column (default: the first column)
    #[arg(long)]
    pub response: Option<String>,
    /// TOML schema assigning column kinds and roles
    #[arg(long, value_name = "FILE")]
    pub schema: Option<PathBuf>,
}

pub fn run_calibrate(args: &CalibrateArgs, config: &Config) -> CliResult<ExitCode> {
    let defaults = CalibrationPlan::default();
    let b_grid = match resolve_string(args.b.clone(), config, "b_grid")? {
        Some(text) => parse_grid(&text)?,
        None => defaults.b_grid,
    };
    let q_grid = match resolve_string(args.q.clone(), config, "q_grid")? {
        Some(text) => parse_grid(&text)?,
        None => defaults.q_grid,
    };
    let trials = match args.trials {
        Some(v) => v,
        None => config.u32("trials")?.unwrap_or(defaults.trials),
    };
    let alpha = resolve_f64(args.alpha, config, "alpha", defaults.alpha)?;
    let a = resolve_f64(args.a, config, "a", defaults.a)?;
    let seed = args.seed.or(config.u64("seed")?).unwrap_or(0);
    let scope_name = resolve_string(args.scope.clone(), config, "scope")?
        .unwrap_or_else(|| "full-fit".to_string());
    let noise_scope = match scope_name.as_str() {
        "full-fit" => NoiseScope::FullFit,
        "subsample-fit" => NoiseScope::SubsampleFit,
        other => {
            return Err(CliError::Usage(format!(
                "scope must be full-fit or subsample-fit, got '{other}'"
            )))
        }
    };
    let shared_subsamples = resolve_flag(args.shared_subsamples, config, "shared_subsamples")?;
    let workers = match args.workers {
        Some(w) => Some(w),
        None => config.usize("workers")?,
    };
    let response = resolve_string(args.response.clone(), config, "response")?;

    let table = read_table(&args.input)?;
    let schema = resolve_schema(&table, args.schema.as_deref(), response.as_deref())?;
    let (data, _) = build_dataset(&table, &schema)?;

    emit_resolved(&[
        ("input", args.input.display().to_string()),
        ("response", data.response_name().to_string()),
        ("b_grid", grid_to_string(&b_grid)),
        ("q_grid", grid_to_string(&q_grid)),
        ("trials", trials.to_string()),
        ("alpha", alpha.to_string()),
        ("a", a.to_string()),
        ("seed", seed.to_string()),
        ("scope", scope_name.clone()),
        ("shared_subsamples", shared_subsamples.to_string()),
        (
            "workers",
            workers.map_or_else(|| "all".to_string(), |w| w.to_string()),
        ),
    ]);

    let plan = CalibrationPlan {
        b_grid,
        q_grid,
        trials,
        alpha,
        a,
        master_seed: seed,
        noise_scope,
        shared_subsamples,
        workers,
    };
    let report = run_calibration(&data, &plan)?;
    let text = render_calibration(&report, &scope_name);
    match &args.out {
        Some(path) => {
            write_atomic(path, &text)?;
            println!("wrote={}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn render_calibration(report: &CalibrationReport, scope_name: &str) -> String {
    let mut out = String::new();
    out.push_str("# subsample Chow acceptance sweep\n");
    out.push_str(&format!(
        "# n={} p={} a={} alpha={} trials={} seed={} scope={} shared_subsamples={}\n",
        report.n,
        report.p,
        report.a,
        report.alpha,
        report.trials,
        report.master_seed,
        scope_name,
        report.shared_subsamples
    ));
    let critical = report
        .q_grid
        .iter()
        .zip(&report.critical_per_q)
        .map(|(q, c)| format!("q={q} F={c:.6}"))
        .collect::<Vec<_>>()
        .join("  ");
    out.push_str(&format!("# critical values: {critical}\n"));
    out.push_str("# acceptance rate by noise mix b (rows) and subsample fraction q (columns)\n");
    out.push_str("b\\q");
    for q in &report.q_grid {
        out.push_str(&format!(" {q:>7}"));
    }
    out.push('\n');
    for (bi, b) in report.b_grid.iter().enumerate() {
        out.push_str(&format!("{b}"));
        for cell in &report.cells[bi] {
            out.push_str(&format!(" {:>7.3}", cell.acceptance));
        }
        out.push('\n');
    }
    for (bi, b) in report.b_grid.iter().enumerate() {
        for (qi, q) in report.q_grid.iter().enumerate() {
            let cell = &report.cells[bi][qi];
            out.push_str(&format!("f_percentiles b={b} q={q}"));
            for (level, value) in PERCENTILE_LEVELS.iter().zip(&cell.f_percentiles) {
                out.push_str(&format!(" p{:02}={value:.6}", (level * 100.0).round() as u32));
            }
            out.push_str(&format!(" failed={}\n", cell.failed_trials));
        }
    }
    for (qi, q) in report.q_grid.iter().enumerate() {
        match report.b_star_per_q[qi] {
            Some(b) => out.push_str(&format!("b_star q={q} b={b}\n")),
            None => out.push_str(&format!("b_star q={q} b=none\n")),
        }
    }
    match report.recommended_b {
        Some(b) => out.push_str(&format!("recommended_b={b}\n")),
        None => out.push_str("recommended_b=none\n"),
    }
    out
}

// ---------------------------------------------------------------- synth

#[derive(Args)]
pub struct SynthArgs {
    /// Output CSV; the response lands in the first column
    pub output: PathBuf,
    /// Rows
    #[arg(long)]
    pub n: Option<usize>,
    /// Generator seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fitted R^2 the generator calibrates its error scale to
    #[arg(long, value_name = "R2", conflicts_with = "error_scale")]
    pub target_r2: Option<f64>,
    /// Fixed error scale instead of a calibrated R^2
    #[arg(long)]
    pub error_scale: Option<f64>,
}

pub fn run_synth(args: &SynthArgs, config: &Config) -> CliResult<ExitCode> {
    let n = match args.n {
        Some(v) => v,
        None => config.usize("n")?.unwrap_or(1320),
    };
    let seed = args.seed.or(config.u64("seed")?).unwrap_or(0);
    let target_r2 = args.target_r2.or(config.f64("target_r2")?);
    let error_scale = args.error_scale.or(config.f64("error_scale")?);
    let spec = match (target_r2, error_scale) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage(
                "--target-r2 and --error-scale are mutually exclusive".into(),
            ))
        }
        (None, Some(scale)) => {
            let mut spec = SynthSpec::housing_shaped(n, seed);
            spec.error_scale = scale;
            spec.target_r_squared = None;
            spec
        }
        (r2, None) => SynthSpec::housing_shaped_r2(n, seed, r2.unwrap_or(0.78))?,
    };
    emit_resolved(&[
        ("output", args.output.display().to_string()),
        ("n", n.to_string()),
        ("seed", seed.to_string()),
        (
            "target_r2",
            spec.target_r_squared
                .map_or_else(|| "none".to_string(), |v| v.to_string()),
        ),
        ("error_scale", spec.error_scale.to_string()),
    ]);
    let data = generate_synthetic(&spec)?;
    let mut headers = vec![data.response_name().to_string()];
    let mut columns: Vec<Vec<f64>> = vec![data.y().iter().copied().collect()];
    for (j, name) in data.column_names().iter().enumerate().skip(1) {
        headers.push(name.clone());
        columns.push(data.x().column(j).iter().copied().collect());
    }
    write_table(
        &args.output,
        &headers,
        &columns,
        0,
        ResponseFormat::FullPrecision,
    )?;
    let fit = fit_ols(&data)?;
    println!("wrote={}", args.output.display());
    println!("n={}", data.n());
    println!("p={}", data.p());
    println!("r_squared={}", fit.r_squared);
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- theory-table

#[derive(Args)]
pub struct TheoryTableArgs {
    /// R^2 rows: comma list or lo:hi:step
    #[arg(long, value_name = "GRID")]
    pub r2: Option<String>,
    /// b columns, same syntax
    #[arg(long, value_name = "GRID")]
    pub b: Option<String>,
}

pub fn run_theory_table(args: &TheoryTableArgs, config: &Config) -> CliResult<ExitCode> {
    let r2_grid = match resolve_string(args.r2.clone(), config, "r2_grid")? {
        Some(text) => parse_grid(&text)?,
        None => vec![0.4, 0.6, 0.8],
    };
    let b_grid = match resolve_string(args.b.clone(), config, "b_grid")? {
        Some(text) => parse_grid(&text)?,
        None => parse_grid("0:2:0.25")?,
    };
    emit_resolved(&[
        ("r2_grid", grid_to_string(&r2_grid)),
        ("b_grid", grid_to_string(&b_grid)),
    ]);
    let grid = correlation_grid(&r2_grid, &b_grid)?;
    let mut out = String::new();
    out.push_str("# correlation of original and released response at a = -2\n");
    out.push_str("r2\\b");
    for b in &b_grid {
        out.push_str(&format!(" {b:>6.2}"));
    }
    out.push('\n');
    for (i, r2) in r2_grid.iter().enumerate() {
        out.push_str(&format!("{r2:.2}"));
        for value in &grid[i] {
            out.push_str(&format!(" {value:>6.2}"));
        }
        out.push('\n');
    }
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}

// ---------------------------------------------------------------- dispatch

pub fn dispatch(cli: &Cli) -> CliResult<ExitCode> {
    let config = Config::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Fit(args) => run_fit(args, &config),
        Command::Perturb(args) => run_perturb(args, &config),
        Command::Verify(args) => run_verify(args, &config),
        Command::Chow(args) => run_chow(args, &config),
        Command::Calibrate(args) => run_calibrate(args, &config),
        Command::Synth(args) => run_synth(args, &config),
        Command::TheoryTable(args) => run_theory_table(args, &config),
    }
}
