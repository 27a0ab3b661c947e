//! Command-line front end: config ingestion and experiment orchestration.
//!
//! Exit codes: 0 success, 1 usage/config errors, 2 validation failure,
//! 3 numerical failure. Every failure prints a one-line JSON diagnostic to
//! stderr; structured results go to stdout as JSON (and CSV files via
//! `--out`). Verbosity is controlled by the `MFLQR_LOG` env var.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{load_config, ExperimentConfig};
use crate::gains::{consensus_coefficients, ConsensusForm, ConsensusStep, GainSchedule, GainStep};
use crate::linalg::to_nested;
use crate::model::{validate, Horizon};
use crate::oracle;
use crate::riccati::{self, RiccatiSolution};
use crate::sim::{
    self, evaluate_cost_direct, evaluate_cost_decomposed_for, simulate, SimulationTrace,
};
use crate::{Error, Result};

/// Bundled scalar leader/100-follower reference experiment.
pub const EXAMPLE1_JSON: &str = include_str!("../configs/example1.json");
/// Rollout length used by `reproduce-example1` (both variants).
pub const EXAMPLE1_STEPS: usize = 80;

#[derive(Parser, Debug)]
#[command(
    name = "mflqr",
    version,
    about = "Distributed LQ control of leader/follower mean-field teams"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check model assumptions and print one line per check.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve the Riccati equations and print the gain schedule as JSON.
    Gains {
        #[arg(long)]
        config: PathBuf,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Roll out the closed loop and report costs from both evaluators.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the trace here: `.json` gets the full trace as JSON, any
        /// other extension the per-stage CSV (runs beyond the first get a
        /// `_runK` suffix).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Rollout length for infinite-horizon configs (finite horizons use T).
        #[arg(long, default_value_t = 100)]
        steps: usize,
    },
    /// Compare the structured gains against the brute-force stacked solution.
    OracleCheck {
        #[arg(long)]
        config: PathBuf,
        /// Team size for the stacked comparison (defaults to the config's n).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Run the bundled reference experiment and write figure-ready CSV data.
    #[command(name = "reproduce-example1")]
    ReproduceExample1 {
        /// Use stationary gains from the discounted stationary solution
        /// (beta = 1) instead of the finite-horizon schedule.
        #[arg(long)]
        infinite: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for CSV and summary files.
        #[arg(long, default_value = "example1_out")]
        out: PathBuf,
    },
}

/// Run a parsed command line, returning the process exit code.
pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Validate { config } => cmd_validate(&config),
        Command::Gains { config, out } => cmd_gains(&config, out.as_deref()),
        Command::Simulate { config, seed, out, steps } => {
            cmd_simulate(&config, seed, out.as_deref(), steps)
        }
        Command::OracleCheck { config, n } => cmd_oracle_check(&config, n),
        Command::ReproduceExample1 { infinite, seed, out } => {
            cmd_reproduce_example1(infinite, seed, &out)
        }
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let diagnostic = json!({
                "error": error_category(&e),
                "message": e.to_string(),
            });
            eprintln!("{diagnostic}");
            exit_code_for(&e)
        }
    }
}

fn error_category(e: &Error) -> &'static str {
    match e {
        Error::Config { .. } => "config",
        Error::Io(_) => "io",
        Error::DimensionMismatch { .. } => "dimension",
        Error::TooLarge { .. } => "too_large",
        Error::TimeVarying => "time_varying",
        Error::LeaderlessMode(_) => "leaderless",
        Error::NotPsd { .. } => "not_psd",
        Error::SingularInnerMatrix { .. } => "singular_inner_matrix",
        Error::NotConverged { .. } => "not_converged",
        Error::Diverged { .. } => "diverged",
        Error::SingularGain { .. } => "singular_gain",
    }
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Config { .. }
        | Error::Io(_)
        | Error::DimensionMismatch { .. }
        | Error::TooLarge { .. }
        | Error::TimeVarying
        | Error::LeaderlessMode(_) => 1,
        Error::NotPsd { .. } => 2,
        Error::SingularInnerMatrix { .. }
        | Error::NotConverged { .. }
        | Error::Diverged { .. }
        | Error::SingularGain { .. } => 3,
    }
}

/// Validate, print the report, and fail with exit 2 when a check fails.
fn gate_assumptions(cfg: &ExperimentConfig, print_report: bool) -> Result<Option<i32>> {
    let report = validate(&cfg.model, &cfg.cost)?;
    if print_report {
        print!("{report}");
    }
    if report.all_passed() {
        Ok(None)
    } else {
        let diagnostic = json!({
            "error": "validation",
            "failed": report.failed_names(),
        });
        eprintln!("{diagnostic}");
        Ok(Some(2))
    }
}

fn cmd_validate(config: &Path) -> Result<i32> {
    let cfg = load_config(config)?;
    log::info!("validating {}", config.display());
    Ok(gate_assumptions(&cfg, true)?.unwrap_or(0))
}

fn mat_json(m: &nalgebra::DMatrix<f64>) -> Value {
    json!(to_nested(m))
}

fn gain_step_json(step: &GainStep) -> Value {
    let mut obj = json!({
        "l_dev": mat_json(&step.l_dev),
        "l21": mat_json(&step.l21),
        "l22": mat_json(&step.l22),
    });
    if let Some(row) = &step.leader {
        obj["l11"] = mat_json(&row.l11);
        obj["l12"] = mat_json(&row.l12);
    }
    obj
}

fn consensus_step_json(step: &ConsensusStep) -> Value {
    json!({
        "alpha": mat_json(&step.alpha),
        "beta": mat_json(&step.beta),
        "gamma": mat_json(&step.gamma),
        "mu": mat_json(&step.mu),
        "lambda": mat_json(&step.lambda),
    })
}

fn gains_json(
    cfg: &ExperimentConfig,
    riccati: &RiccatiSolution,
    gains: &GainSchedule,
) -> Value {
    let schedule = match gains {
        GainSchedule::Finite(steps) => json!({
            "kind": "finite",
            "stages": steps.iter().map(gain_step_json).collect::<Vec<_>>(),
        }),
        GainSchedule::Stationary(step) => json!({
            "kind": "stationary",
            "gain": gain_step_json(step),
        }),
    };
    let riccati_json = match riccati {
        RiccatiSolution::Finite { .. } => json!({
            "kind": "finite",
            "m_dev_initial": mat_json(riccati.m_dev_at(1)),
            "m_bar_initial": mat_json(riccati.m_bar_at(1)),
        }),
        RiccatiSolution::Stationary { m_dev, m_bar, dev_diagnostics, bar_diagnostics } => json!({
            "kind": "stationary",
            "m_dev": mat_json(m_dev),
            "m_bar": mat_json(m_bar),
            "deviation_iterations": dev_diagnostics.iterations,
            "deviation_residual": dev_diagnostics.residual,
            "augmented_iterations": bar_diagnostics.iterations,
            "augmented_residual": bar_diagnostics.residual,
        }),
    };
    let consensus = match consensus_coefficients(gains, cfg.model.dims.n) {
        Ok(ConsensusForm::Finite(steps)) => json!({
            "kind": "finite",
            "stages": steps.iter().map(consensus_step_json).collect::<Vec<_>>(),
        }),
        Ok(ConsensusForm::Stationary(step)) => json!({
            "kind": "stationary",
            "coefficients": consensus_step_json(&step),
        }),
        Err(e) => json!({ "unavailable": e.to_string() }),
    };
    json!({
        "leaderless": gains.is_leaderless(),
        "n": cfg.model.dims.n,
        "riccati": riccati_json,
        "schedule": schedule,
        "consensus": consensus,
    })
}

/// Solve the model and render the gain schedule, Riccati diagnostics, and
/// consensus coefficients as one JSON document.
pub fn gains_report(cfg: &ExperimentConfig) -> Result<Value> {
    let sol = riccati::solve(&cfg.model, &cfg.cost)?;
    let gains = crate::gains::compute_gains(&sol, &cfg.model, &cfg.cost)?;
    Ok(gains_json(cfg, &sol, &gains))
}

fn cmd_gains(config: &Path, out: Option<&Path>) -> Result<i32> {
    let cfg = load_config(config)?;
    if let Some(code) = gate_assumptions(&cfg, false)? {
        return Ok(code);
    }
    let payload = gains_report(&cfg)?;
    let text = serde_json::to_string_pretty(&payload).expect("gain schedule serializes");
    match out {
        Some(path) => {
            sim::write_text(path, &text)?;
            println!("{}", json!({"written": path.display().to_string()}));
        }
        None => println!("{text}"),
    }
    Ok(0)
}

fn run_summary(
    trace: &SimulationTrace,
    cfg: &ExperimentConfig,
    seed: u64,
    csv_path: Option<&Path>,
) -> Value {
    let direct = evaluate_cost_direct(trace, &cfg.cost);
    let decomposed = evaluate_cost_decomposed_for(trace, &cfg.model, &cfg.cost);
    let gap = (direct - decomposed).abs() / direct.abs().max(1.0);
    json!({
        "seed": seed,
        "steps": trace.steps,
        "cost_direct": direct,
        "cost_decomposed": decomposed,
        "cost_relative_gap": gap,
        "deviation_residual": sim::deviation_residual(trace, &cfg.model),
        "mean_abs_dev_initial": trace.mean_abs_deviation(1),
        "mean_abs_dev_final": trace.mean_abs_deviation(trace.steps),
        "csv": csv_path.map(|p| p.display().to_string()),
    })
}

fn with_run_suffix(path: &Path, run: usize, total: usize) -> PathBuf {
    if total == 1 {
        return path.to_path_buf();
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}_run{}.{ext}", run + 1))
}

fn cmd_simulate(
    config: &Path,
    seed_override: Option<u64>,
    out: Option<&Path>,
    steps_flag: usize,
) -> Result<i32> {
    let cfg = load_config(config)?;
    if let Some(code) = gate_assumptions(&cfg, false)? {
        return Ok(code);
    }
    let sol = riccati::solve(&cfg.model, &cfg.cost)?;
    let gains = crate::gains::compute_gains(&sol, &cfg.model, &cfg.cost)?;
    let steps = match cfg.cost.horizon {
        Horizon::Finite { t } => t,
        Horizon::Infinite { .. } => steps_flag,
    };
    let base_seed = seed_override.unwrap_or(cfg.seed);
    let mut runs = Vec::with_capacity(cfg.num_runs);
    for run in 0..cfg.num_runs {
        let seed = base_seed + run as u64;
        let trace = simulate(&cfg.model, &cfg.cost, &gains, steps, seed)?;
        let csv_path = out.map(|p| with_run_suffix(p, run, cfg.num_runs));
        if let Some(path) = &csv_path {
            let text = if path.extension().is_some_and(|e| e == "json") {
                serde_json::to_string_pretty(&sim::trace_to_json(&trace))
                    .expect("trace serializes")
            } else {
                sim::trace_to_csv(&trace)
            };
            sim::write_text(path, &text)?;
        }
        log::info!(
            "run {} (seed {seed}): cost {:.6}",
            run + 1,
            evaluate_cost_direct(&trace, &cfg.cost)
        );
        runs.push(run_summary(&trace, &cfg, seed, csv_path.as_deref()));
    }
    let payload = json!({
        "n": cfg.model.dims.n,
        "num_runs": cfg.num_runs,
        "runs": runs,
    });
    println!("{}", serde_json::to_string_pretty(&payload).expect("summary serializes"));
    Ok(0)
}

/// Compare the assembled mean-field strategy against the brute-force stacked
/// solution at team size `n`, in both gains and expected cost.
pub fn oracle_report(cfg: &ExperimentConfig, n: usize) -> Result<Value> {
    let sol = riccati::solve(&cfg.model, &cfg.cost)?;
    let gains = crate::gains::compute_gains(&sol, &cfg.model, &cfg.cost)?;
    let cp = oracle::build_centralized(&cfg.model, &cfg.cost, n)?;
    let brute = oracle::solve_centralized(&cp, cfg.cost.horizon)?;
    let stacked = oracle::assemble_meanfield_as_centralized(&gains, n)?;
    let diff = oracle::compare(&brute, &stacked)?;

    // Expected-cost comparison over the horizon (finite) or a fixed window
    // (stationary): the two strategies should price identically too.
    let (steps, beta) = match cfg.cost.horizon {
        Horizon::Finite { t } => (t, 1.0),
        Horizon::Infinite { beta } => (200, beta),
    };
    let (mean, init_cov, noise_cov) = oracle::stacked_moments(&cfg.model, n);
    let cost_structured =
        oracle::expected_cost(&cp, &stacked, &mean, &init_cov, &noise_cov, steps, beta)?;
    let cost_brute =
        oracle::expected_cost(&cp, &brute, &mean, &init_cov, &noise_cov, steps, beta)?;

    Ok(json!({
        "n": n,
        "stacked_dimension": (n + 1) * cfg.model.dims.d_x,
        "max_gain_difference": diff,
        "expected_cost_structured": cost_structured,
        "expected_cost_centralized": cost_brute,
        "expected_cost_steps": steps,
    }))
}

fn cmd_oracle_check(config: &Path, n_override: Option<usize>) -> Result<i32> {
    let cfg = load_config(config)?;
    if let Some(code) = gate_assumptions(&cfg, false)? {
        return Ok(code);
    }
    let payload = oracle_report(&cfg, n_override.unwrap_or(cfg.model.dims.n))?;
    println!("{}", serde_json::to_string_pretty(&payload).expect("summary serializes"));
    Ok(0)
}

/// The bundled experiment, as parsed config plus the requested horizon mode.
pub fn example1_config(infinite: bool, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = crate::config::parse_config(EXAMPLE1_JSON)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
        cfg.model.noise.seed = seed;
    }
    if infinite {
        cfg.model.dims.t_horizon = None;
        cfg.cost.horizon = Horizon::Infinite { beta: 1.0 };
    }
    Ok(cfg)
}

/// Strip the dynamics noise, keeping the random initial spread.
pub fn zero_noise_variant(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut out = cfg.clone();
    out.model.noise = crate::model::NoiseModel::zero(cfg.seed);
    out
}

fn cmd_reproduce_example1(infinite: bool, seed: Option<u64>, out_dir: &Path) -> Result<i32> {
    let cfg = example1_config(infinite, seed)?;
    if let Some(code) = gate_assumptions(&cfg, false)? {
        return Ok(code);
    }
    let prefix = if infinite { "infinite" } else { "finite" };
    std::fs::create_dir_all(out_dir)?;

    let mut variants = Vec::new();
    for (label, variant_cfg) in [
        ("noisy", cfg.clone()),
        ("zero_noise", zero_noise_variant(&cfg)),
    ] {
        let sol = riccati::solve(&variant_cfg.model, &variant_cfg.cost)?;
        let gains = crate::gains::compute_gains(&sol, &variant_cfg.model, &variant_cfg.cost)?;
        let trace = simulate(
            &variant_cfg.model,
            &variant_cfg.cost,
            &gains,
            EXAMPLE1_STEPS,
            variant_cfg.seed,
        )?;
        let trace_path = out_dir.join(format!("{prefix}_{label}_trace.csv"));
        let followers_path = out_dir.join(format!("{prefix}_{label}_followers.csv"));
        sim::write_text(&trace_path, &sim::trace_to_csv(&trace))?;
        sim::write_text(&followers_path, &sim::followers_to_csv(&trace))?;
        let mut summary = run_summary(&trace, &variant_cfg, variant_cfg.seed, Some(&trace_path));
        summary["variant"] = json!(label);
        summary["followers_csv"] = json!(followers_path.display().to_string());
        let initial = trace.mean_abs_deviation(1);
        let final_dev = trace.mean_abs_deviation(EXAMPLE1_STEPS);
        summary["deviation_ratio"] = json!(final_dev / initial);
        variants.push(summary);
    }

    let payload = json!({
        "experiment": "example1",
        "horizon": prefix,
        "n": cfg.model.dims.n,
        "steps": EXAMPLE1_STEPS,
        "variants": variants,
    });
    let text = serde_json::to_string_pretty(&payload).expect("summary serializes");
    sim::write_text(&out_dir.join(format!("{prefix}_summary.json")), &text)?;
    println!("{text}");
    Ok(0)
}
