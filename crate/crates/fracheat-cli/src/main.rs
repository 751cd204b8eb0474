//! `fracheat` — batch driver for the fractional heat toolkit.
//!
//! One subcommand per operation; inputs come from a JSON config file or a
//! named embedded preset, outputs (JSON report, CSV plot series, field
//! binaries) land in a chosen directory. Identical config + seed produces
//! byte-identical reports up to the `meta` block.
//!
//! Exit codes: `0` pass, `1` numerical failure or failed verification,
//! `2` configuration error. Thread count honours `FRACHEAT_THREADS`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use fracheat::config::{preset_names, RunConfig};
use fracheat::criticality::{
    barrier_probe, blowup_monitor, blowup_series, classify, r_star, rescaling_diagnostic,
    scaling_beta,
};
use fracheat::field::{Field, FieldKind};
use fracheat::grid::GridSpec;
use fracheat::nonlin::NonlinearitySpec;
use fracheat::operator::{apply_quadrature, apply_spectral, calibrate_cns};
use fracheat::planes::{monotonicity_sweep, symmetry_check};
use fracheat::report::Report;
use fracheat::solver::{decay_exponent, picard_solve, SolveOutcome, Trajectory};
use fracheat::weight::{WeightForm, WeightSpec};
use fracheat::{io, Error};

#[derive(Parser)]
#[command(
    name = "fracheat",
    version,
    about = "Fractional heat operator (∂t − Δ)^s: evaluation, mild solves, and qualitative diagnostics"
)]
struct Cli {
    /// Path to a JSON run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Name of an embedded preset configuration.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,

    /// Override the config's random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory for reports, CSV series, and fields.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the operator to the configured initial state (held constant in
    /// time) via the spectral route, cross-checked by quadrature probes.
    Apply,
    /// Run the mild-solution solver on the configured problem.
    Solve,
    /// Solve (or extend the initial state) and check reflection-deficit
    /// monotonicity across a sweep of planes.
    VerifyMonotone {
        /// Rightmost plane to sweep (default 0: scan from the far side up
        /// to the symmetry plane).
        #[arg(long)]
        lambda_max: Option<f64>,
        /// Deficit tolerance (default scales with the field).
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Solve (or extend the initial state) and check evenness in x₁.
    VerifySymmetry {
        /// Asymmetry tolerance.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Report the critical exponent and regime for the configured problem.
    Classify,
    /// Solve and test the rescaled-pairing identity over a range of radii.
    Rescale {
        /// Radii to probe (default: three below the admissible maximum).
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        radii: Option<Vec<f64>>,
    },
    /// Solve at the configured and a halved time resolution and monitor the
    /// energy-concavity blow-up certificate on both.
    Blowup,
    /// Check the separated subsolution bound for the configured order.
    Barrier {
        /// Exponent selector: the time profile uses β = 1/(2k+1).
        #[arg(long, default_value_t = 1)]
        k: u32,
        /// Time horizon (must exceed 1).
        #[arg(long, default_value_t = 4.0)]
        horizon: f64,
        /// Peak amplitude of the comparison field.
        #[arg(long, default_value_t = 1.0)]
        peak: f64,
    },
    /// Calibrate the quadrature normalisation against the spectral route.
    Calibrate,
}

/// Failures carry the exit code they map to.
enum Failure {
    /// Bad config, bad flags, unreadable files: exit 2.
    Config(String),
    /// The numerics ran and failed (or refused): exit 1.
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 1,
        }
    }
}

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

fn numeric_err(e: impl std::fmt::Display) -> Failure {
    Failure::Numerical(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("config error: {m}"),
                Failure::Numerical(m) => eprintln!("numerical failure: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}

fn init_threads() {
    if let Ok(text) = std::env::var("FRACHEAT_THREADS") {
        if let Ok(n) = text.trim().parse::<usize>() {
            if n >= 1 {
                // Ignore "already initialised" — tests may share a process.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let text = match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => {
            return Err(Failure::Config(
                "--config and --preset are mutually exclusive".into(),
            ))
        }
        (Some(path), None) => std::fs::read_to_string(path)
            .map_err(|e| Failure::Config(format!("reading {}: {e}", path.display())))?,
        (None, Some(name)) => fracheat::config::preset(name)
            .ok_or_else(|| {
                Failure::Config(format!(
                    "unknown preset {name:?}; available: {}",
                    preset_names().join(", ")
                ))
            })?
            .to_string(),
        (None, None) => {
            return Err(Failure::Config(
                "one of --config or --preset is required".into(),
            ))
        }
    };
    let mut cfg = RunConfig::from_json(&text).map_err(config_err)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: &RunConfig) -> Result<PathBuf, Failure> {
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fracheat-out"));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::Config(format!("creating {}: {e}", dir.display())))?;
    Ok(dir)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = load_config(&cli)?;
    let dir = out_dir(&cli, &cfg)?;
    let started = Instant::now();
    let (name, results, passed) = match &cli.command {
        Command::Apply => cmd_apply(&cfg, &dir)?,
        Command::Solve => cmd_solve(&cfg, &dir)?,
        Command::VerifyMonotone { lambda_max, tol } => {
            cmd_verify_monotone(&cfg, &dir, *lambda_max, *tol)?
        }
        Command::VerifySymmetry { tol } => cmd_verify_symmetry(&cfg, &dir, *tol)?,
        Command::Classify => cmd_classify(&cfg)?,
        Command::Rescale { radii } => cmd_rescale(&cfg, &dir, radii.clone())?,
        Command::Blowup => cmd_blowup(&cfg, &dir)?,
        Command::Barrier { k, horizon, peak } => cmd_barrier(&cfg, *k, *horizon, *peak)?,
        Command::Calibrate => cmd_calibrate(&cfg)?,
    };

    let mut report = Report::new(name, &results).map_err(numeric_err)?;
    report.meta.duration_ms = Some(started.elapsed().as_millis() as u64);
    report.meta.seed = Some(cfg.seed);
    report.meta.threads = Some(rayon::current_num_threads());
    let text = report.to_json_pretty().map_err(numeric_err)?;
    let path = dir.join(format!("{name}.report.json"));
    io::write_text(&path, &text).map_err(numeric_err)?;
    println!("{}", path.display());

    if passed {
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "{name}: verification failed (see {})",
            path.display()
        )))
    }
}

/// Echo of the fully resolved configuration for the report.
fn config_echo(cfg: &RunConfig) -> Result<serde_json::Value, Failure> {
    Ok(serde_json::json!({
        "config": cfg,
        "resolved": {
            "operator": cfg.operator_params().map_err(config_err)?,
            "solve": cfg.solve_params(),
        },
    }))
}

/// The initial slice extended constant in time (matching a frozen past).
fn constant_extension(cfg: &RunConfig) -> Result<Field, Failure> {
    let slice = cfg.initial_slice().map_err(config_err)?;
    let grid = cfg.grid.clone();
    let values: Vec<Complex64> = (0..=grid.mt)
        .flat_map(|_| slice.iter().map(|&v| Complex64::new(v, 0.0)))
        .collect();
    Field::from_values(grid, FieldKind::Real, values).map_err(numeric_err)
}

/// Neutral fill-ins: with neither weight nor nonlinearity the forcing is
/// zero; with only one of them the other defaults to the identity.
fn problem_terms(cfg: &RunConfig) -> Result<(WeightSpec, NonlinearitySpec), Failure> {
    let weight = match (&cfg.weight, &cfg.nonlin) {
        (None, None) => WeightSpec::constant(&cfg.grid, 0.0).map_err(config_err)?,
        (None, Some(_)) => WeightSpec::constant(&cfg.grid, 1.0).map_err(config_err)?,
        (Some(w), _) => w.clone(),
    };
    let nonlin = match &cfg.nonlin {
        Some(f) => f.clone(),
        None => NonlinearitySpec::power(1.0).map_err(config_err)?,
    };
    Ok((weight, nonlin))
}

fn solve_problem(cfg: &RunConfig) -> Result<Trajectory, Failure> {
    let (weight, nonlin) = problem_terms(cfg)?;
    let u0 = cfg.initial_slice().map_err(config_err)?;
    picard_solve(&cfg.grid, &u0, &weight, &nonlin, &cfg.solve_params()).map_err(numeric_err)
}

/// Trajectory when a problem is configured, constant extension otherwise.
fn field_under_test(cfg: &RunConfig) -> Result<(Field, Option<SolveOutcome>), Failure> {
    if cfg.nonlin.is_some() || cfg.weight.is_some() {
        let traj = solve_problem(cfg)?;
        Ok((traj.field, Some(traj.outcome)))
    } else {
        Ok((constant_extension(cfg)?, None))
    }
}

/// Interior probe nodes along the first axis (other axes centred).
fn probe_indices(grid: &GridSpec, count: usize) -> Vec<Vec<usize>> {
    let step = (grid.nx / count).max(1);
    (0..grid.nx)
        .step_by(step)
        .map(|j| {
            let mut idx = vec![grid.nx / 2; grid.n];
            idx[0] = j;
            idx
        })
        .collect()
}

type CommandOutput = (&'static str, serde_json::Value, bool);

fn cmd_apply(cfg: &RunConfig, dir: &Path) -> Result<CommandOutput, Failure> {
    let field = constant_extension(cfg)?;
    let params = cfg.operator_params().map_err(config_err)?;
    let out = apply_spectral(&field, params.s).map_err(numeric_err)?;
    io::write_field(&dir.join("apply"), &out).map_err(numeric_err)?;

    let m = cfg.grid.mt / 2;
    let scale = out.linf_norm(m).max(1e-12);
    let mut rows = Vec::new();
    let mut max_rel = 0.0f64;
    for idx in probe_indices(&cfg.grid, 8) {
        let qv =
            apply_quadrature(&field, &idx, m, &params, cfg.history).map_err(numeric_err)?;
        let flat = cfg.grid.flatten(&idx);
        let sp = out.real_at(m, flat);
        let rel = (qv.value - sp).abs() / sp.abs().max(0.05 * scale);
        max_rel = max_rel.max(rel);
        rows.push(vec![
            cfg.grid.axis_coord(idx[0]),
            sp,
            qv.value,
            rel,
            qv.near_residual,
            qv.tail_bound,
        ]);
    }
    io::write_csv(
        &dir.join("apply.probes.csv"),
        &["x1", "spectral", "quadrature", "rel_err", "near_residual", "tail_bound"],
        &rows,
    )
    .map_err(numeric_err)?;

    let passed = max_rel <= 5e-2;
    let results = serde_json::json!({
        "echo": config_echo(cfg)?,
        "sup_output": out.linf_norm_all(),
        "probe_level": m,
        "max_probe_rel_err": max_rel,
        "probes": rows.len(),
        "passed": passed,
    });
    Ok(("apply", results, passed))
}

fn cmd_solve(cfg: &RunConfig, dir: &Path) -> Result<CommandOutput, Failure> {
    let traj = solve_problem(cfg)?;
    io::write_field(&dir.join("solve"), &traj.field).map_err(numeric_err)?;

    let dt = cfg.grid.dt();
    let rows: Vec<Vec<f64>> = (0..traj.sup_norms.len())
        .map(|m| vec![m as f64 * dt, traj.sup_norms[m], traj.l2_norms[m]])
        .collect();
    io::write_csv(&dir.join("solve.norms.csv"), &["t", "sup", "l2"], &rows)
        .map_err(numeric_err)?;

    let valid = traj.frozen_from.unwrap_or(traj.sup_norms.len());
    let half = valid / 2;
    let times: Vec<f64> = (half..valid).map(|m| m as f64 * dt).collect();
    let tail_decay = decay_exponent(&times, &traj.sup_norms[half..valid]);

    let passed = !matches!(traj.outcome, SolveOutcome::MaxIterations { .. });
    let results = serde_json::json!({
        "echo": config_echo(cfg)?,
        "outcome": traj.outcome,
        "escape_level": traj.escape_level,
        "resolved_levels": valid,
        "final_sup": traj.sup_norms[valid.saturating_sub(1)],
        "final_l2": traj.l2_norms[valid.saturating_sub(1)],
        "tail_decay_exponent": tail_decay,
        "passed": passed,
    });
    Ok(("solve", results, passed))
}

fn cmd_verify_monotone(
    cfg: &RunConfig,
    dir: &Path,
    lambda_max: Option<f64>,
    tol: Option<f64>,
) -> Result<CommandOutput, Failure> {
    let (field, outcome) = field_under_test(cfg)?;
    let lambda_max = lambda_max.unwrap_or(0.0);
    let tol = tol.unwrap_or(1e-8 * field.linf_norm_all().max(1.0));
    let sweep = monotonicity_sweep(&field, lambda_max, tol).map_err(numeric_err)?;

    let rows: Vec<Vec<f64>> = sweep
        .planes
        .iter()
        .map(|p| {
            vec![
                p.lambda,
                p.min_deficit,
                p.window_points as f64,
                if p.passed { 1.0 } else { 0.0 },
            ]
        })
        .collect();
    io::write_csv(
        &dir.join("verify-monotone.margins.csv"),
        &["lambda", "min_deficit", "window_points", "passed"],
        &rows,
    )
    .map_err(numeric_err)?;

    let passed = sweep.passed;
    let results = serde_json::json!({
        "echo": config_echo(cfg)?,
        "solver_outcome": outcome,
        "tolerance": tol,
        "sweep": sweep,
        "passed": passed,
    });
    Ok(("verify-monotone", results, passed))
}

fn cmd_verify_symmetry(cfg: &RunConfig, dir: &Path, tol: f64) -> Result<CommandOutput, Failure> {
    let (field, outcome) = field_under_test(cfg)?;
    let check = symmetry_check(&field, 0.0, tol).map_err(numeric_err)?;
    io::write_csv(
        &dir.join("verify-symmetry.asymmetry.csv"),
        &["lambda", "sup_asymmetry"],
        &[vec![check.lambda, check.sup_asymmetry]],
    )
    .map_err(numeric_err)?;

    let passed = check.passed;
    let results = serde_json::json!({
        "echo": config_echo(cfg)?,
        "solver_outcome": outcome,
        "tolerance": tol,
        "check": check,
        "passed": passed,
    });
    Ok(("verify-symmetry", results, passed))
}

/// Growth exponent entering the critical-exponent formula.
fn weight_alpha(weight: Option<&WeightSpec>) -> f64 {
    match weight {
        None => 0.0,
        Some(w) => match &w.form {
            WeightForm::OddMonomial { k } => *k as f64,
            WeightForm::SignedPower { alpha } | WeightForm::MagnitudePower { alpha } => *alpha,
            WeightForm::Tabulated { .. } => w.growth_alpha,
        },
    }
}

fn cmd_classify(cfg: &RunConfig) -> Result<CommandOutput, Failure> {
    let s = cfg.operator.s;
    let n = cfg.grid.n;
    let alpha = weight_alpha(cfg.weight.as_ref());
    let r = match &cfg.nonlin {
        Some(NonlinearitySpec {
            form: fracheat::nonlin::NonlinForm::Power { r },
        }) => *r,
        Some(_) => {
            return Err(Failure::Config(
                "classify needs a power nonlinearity".into(),
            ))
        }
        None => {
            return Err(Failure::Config(
                "classify needs a nonlin section with a power form".into(),
            ))
        }
    };
    let rs = r_star(n, s, alpha).map_err(numeric_err)?;
    let class = classify(n, s, alpha, r).map_err(numeric_err)?;
    let results = serde_json::json!({
        "echo": config_echo(cfg)?,
        "n": n,
        "s": s,
        "alpha": alpha,
        "r": r,
        "r_star": rs,
        "regime": class,
        "scaling_beta": scaling_beta(n, s, r),
        "passed": true,
    });
    Ok(("classify", results, true))
}

fn default_radii(cfg: &RunConfig) -> Vec<f64> {
    let s = cfg.operator.s;
    let rmax = (0.9 * cfg.grid.l).min(cfg.grid.t.powf(1.0 / (2.0 * s)));
    [0.5, std::f64::consts::FRAC_1_SQRT_2, 1.0]
        .iter()
        .map(|c| c * rmax)
        .collect()
}

fn cmd_rescale(
    cfg: &RunConfig,
    dir: &Path,
    radii: Option<Vec<f64>>,
) -> Result<CommandOutput, Failure> {
    let traj = solve_problem(cfg)?;
    let (weight, nonlin) = problem_terms(cfg)?;
    let u0 = cfg.initial_slice().map_err(config_err)?;
    let params = cfg.operator_params().map_err(config_err)?;
    let radii = radii.unwrap_or_else(|| default_radii(cfg));
    let report = rescaling_diagnostic(&traj.field, &u0, &weight, &nonlin, &params, &radii)
        .map_err(numeric_err)?;

    let rows: Vec<Vec<f64>> = report
        .rows
        .iter()
        .map(|row| {
            vec![
                row.r.ln(),
                row.lhs.abs().max(1e-300).ln(),
                row.rhs.abs().max(1e-300).ln(),
                row.identity_rel_err,
            ]
        })
        .collect();
    io::write_csv(
        &dir.join("rescale.scaling.csv"),
        &["log_r", "log_lhs", "log_rhs", "identity_rel_err"],
        &rows,
    )
    .map_err(numeric_err)?;

    let passed = report.max_identity_err <= 5e-2;
    let results = serde_json::json!({
        "echo": config_echo(cfg)?,
        "solver_outcome": traj.outcome,
        "report": report,
        "passed": passed,
    });
    Ok(("rescale", results, passed))
}

fn cmd_blowup(cfg: &RunConfig, dir: &Path) -> Result<CommandOutput, Failure> {
    if cfg.grid.mt < 16 {
        return Err(Failure::Config(
            "blowup needs mt ≥ 16 so the halved resolution keeps 8 levels".into(),
        ));
    }
    let fine = solve_problem(cfg)?;
    let mut coarse_cfg = cfg.clone();
    coarse_cfg.grid =
        GridSpec::new(cfg.grid.n, cfg.grid.l, cfg.grid.nx, cfg.grid.t, cfg.grid.mt / 2)
            .map_err(config_err)?;
    let coarse = solve_problem(&coarse_cfg)?;

    let monitor = |traj: &Trajectory, dt: f64| {
        blowup_monitor(dt, &traj.l2_norms, traj.frozen_from)
    };
    let fine_mon = monitor(&fine, cfg.grid.dt()).map_err(numeric_err)?;
    let coarse_mon = monitor(&coarse, coarse_cfg.grid.dt()).map_err(numeric_err)?;

    let series = blowup_series(
        cfg.grid.dt(),
        &fine.l2_norms,
        fine.frozen_from,
    )
    .map_err(numeric_err)?;
    let rows: Vec<Vec<f64>> = series
        .iter()
        .map(|s| {
            vec![
                s.t,
                s.j,
                s.j_prime,
                s.j_second,
                s.margin.unwrap_or(f64::NAN),
            ]
        })
        .collect();
    io::write_csv(
        &dir.join("blowup.concavity.csv"),
        &["t", "j", "j_prime", "j_second", "margin"],
        &rows,
    )
    .map_err(numeric_err)?;

    let confirmed = fine_mon.blowup_indicated && coarse_mon.blowup_indicated;
    let consistent = fine_mon.blowup_indicated == coarse_mon.blowup_indicated;
    let results = serde_json::json!({
        "echo": config_echo(cfg)?,
        "fine": { "outcome": fine.outcome, "monitor": fine_mon },
        "coarse": { "mt": coarse_cfg.grid.mt, "outcome": coarse.outcome, "monitor": coarse_mon },
        "blowup_suspected": confirmed,
        "resolutions_agree": consistent,
        "passed": consistent,
    });
    Ok(("blowup", results, consistent))
}

fn cmd_barrier(cfg: &RunConfig, k: u32, horizon: f64, peak: f64) -> Result<CommandOutput, Failure> {
    let report = match barrier_probe(cfg.operator.s, k, horizon, peak) {
        Ok(r) => r,
        Err(e @ Error::BarrierExponent { .. }) => return Err(config_err(e)),
        Err(e) => return Err(numeric_err(e)),
    };
    let passed = report.passed;
    let results = serde_json::json!({
        "echo": config_echo(cfg)?,
        "report": report,
        "passed": passed,
    });
    Ok(("barrier", results, passed))
}

fn cmd_calibrate(cfg: &RunConfig) -> Result<CommandOutput, Failure> {
    let report = calibrate_cns(cfg.grid.n, cfg.operator.s).map_err(numeric_err)?;
    let rel_gap = (report.cns - report.analytic).abs() / report.analytic;
    let results = serde_json::json!({
        "echo": config_echo(cfg)?,
        "report": report,
        "closed_form_rel_gap": rel_gap,
        "passed": true,
    });
    Ok(("calibrate", results, true))
}
