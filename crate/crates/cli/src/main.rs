//! `phaseref`: sweeps, optimizations, reference-beam studies, Monte Carlo
//! checks and oracle validation from a flat TOML scenario file.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phaseref::scenario::output::{write_csv, write_outputs, Sidecar};
use phaseref::scenario::{self, Model, ScenarioConfig, SweepRow};
use phaseref::Error;

#[derive(Parser, Debug)]
#[command(name = "phaseref", version, about = "Phase-estimation bounds with and without an external phase reference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (flat TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// CSV output path; metadata goes to `<out>.meta.json`. Without it the CSV goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the cutoff guard band.
    #[arg(long, global = true)]
    cutoff_guard: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// One optimized row per (model, nbar).
    Sweep,
    /// Print the optimal (tau, squeezing fraction, metric) per (model, nbar).
    Optimize,
    /// Bound versus reference-beam amplitude over `beta_grid`.
    Refbeam,
    /// Monte Carlo check of the Cramer-Rao bound (model MC_SATURATION).
    Mc,
    /// Cross-check the numerics against analytic oracles.
    Validate,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::Optimize => "optimize",
            Command::Refbeam => "refbeam",
            Command::Mc => "mc",
            Command::Validate => "validate",
        }
    }
}

/// Failure with its exit code.
enum Failure {
    Config(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(m) => Failure::Config(m),
            other => Failure::Numerical(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("config error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ScenarioConfig, Failure> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Failure::Config("--config is required".into()))?;
    let mut cfg = ScenarioConfig::load(path)?;
    apply_overrides(cli, &mut cfg)?;
    Ok(cfg)
}

fn apply_overrides(cli: &Cli, cfg: &mut ScenarioConfig) -> Result<(), Failure> {
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(g) = cli.cutoff_guard {
        cfg.cutoff_guard = g;
    }
    cfg.validate()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Sweep => run_sweep(cli),
        Command::Optimize => run_optimize(cli),
        Command::Refbeam => run_refbeam(cli),
        Command::Mc => run_mc(cli),
        Command::Validate => run_validate(cli),
    }
}

fn emit<T: serde::Serialize>(out: Option<&Path>, rows: &[T], sidecar: &Sidecar) -> Result<(), Failure> {
    match out {
        Some(path) => write_outputs(path, rows, sidecar)?,
        None => {
            let stdout = std::io::stdout();
            write_csv(stdout.lock(), rows)?;
        }
    }
    Ok(())
}

fn report_failures(rows: &[SweepRow]) -> Result<(), Failure> {
    let mut failed = 0;
    for (i, r) in rows.iter().enumerate().filter(|(_, r)| !r.is_ok()) {
        eprintln!("row {i} ({} nbar={} beta={:?}): {}", r.model, r.nbar, r.beta, r.status);
        failed += 1;
    }
    if failed > 0 {
        return Err(Failure::Numerical(format!("{failed} row(s) failed")));
    }
    Ok(())
}

fn run_sweep(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let result = scenario::sweep(&cfg);
    let failed: Vec<usize> = result.failures().map(|(i, _)| i).collect();
    let sidecar = Sidecar::new(Command::Sweep.name(), &cfg, &SweepRow::HEADER, result.cutoffs.clone())
        .with_summary(serde_json::json!({ "rows": result.rows.len(), "failed_rows": failed }));
    emit(cli.out.as_deref(), &result.rows, &sidecar)?;
    report_failures(&result.rows)
}

#[derive(serde::Serialize)]
struct OptimizeRow {
    model: Model,
    nbar: f64,
    tau: Option<f64>,
    fraction: Option<f64>,
    metric: Option<f64>,
    status: String,
}

fn run_optimize(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let mut rows = Vec::new();
    let mut cutoffs = Vec::new();
    for &model in &cfg.model {
        for &nbar in &cfg.nbar {
            match scenario::optimize_inputs(&cfg, model, nbar) {
                Ok(o) => {
                    cutoffs.push(Some(o.cutoffs));
                    rows.push(OptimizeRow {
                        model,
                        nbar,
                        tau: Some(o.tau),
                        fraction: Some(o.fraction),
                        metric: Some(o.metric),
                        status: "ok".into(),
                    });
                }
                Err(e @ Error::Config(_)) => return Err(e.into()),
                Err(e) => {
                    eprintln!("{model} nbar={nbar}: {e}");
                    cutoffs.push(None);
                    rows.push(OptimizeRow {
                        model,
                        nbar,
                        tau: None,
                        fraction: None,
                        metric: None,
                        status: format!("error: {e}"),
                    });
                }
            }
        }
    }
    let columns = ["model", "nbar", "tau", "fraction", "metric", "status"];
    let sidecar = Sidecar::new(Command::Optimize.name(), &cfg, &columns, cutoffs);
    emit(cli.out.as_deref(), &rows, &sidecar)?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    if failed > 0 {
        return Err(Failure::Numerical(format!("{failed} optimization(s) failed")));
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct StudySummary {
    nbar: f64,
    tau: f64,
    fraction: f64,
    rho_delta_phi: f64,
    external_delta_phi: f64,
    non_increasing: bool,
    max_increase: f64,
    final_gap: f64,
}

fn run_refbeam(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let mut rows = Vec::new();
    let mut cutoffs = Vec::new();
    let mut summary = Vec::new();
    for &nbar in &cfg.nbar {
        let study = scenario::reference_beam_study(&cfg, nbar)?;
        summary.push(StudySummary {
            nbar,
            tau: study.optimum.tau,
            fraction: study.optimum.fraction,
            rho_delta_phi: study.rho_delta_phi,
            external_delta_phi: study.external_delta_phi,
            non_increasing: study.non_increasing,
            max_increase: study.max_increase,
            final_gap: study.final_gap,
        });
        rows.extend(study.rows);
        cutoffs.extend(study.cutoffs);
    }
    for s in &summary {
        eprintln!(
            "nbar={}: delta_phi from {:.6} (no reference) toward {:.6} (perfect reference), final gap {:.3e}, non-increasing: {}",
            s.nbar, s.rho_delta_phi, s.external_delta_phi, s.final_gap, s.non_increasing
        );
    }
    let sidecar = Sidecar::new(Command::Refbeam.name(), &cfg, &SweepRow::HEADER, cutoffs).with_summary(&summary);
    emit(cli.out.as_deref(), &rows, &sidecar)?;
    // rows beyond the feasible cutoff range are flagged, not fatal
    for (i, r) in rows.iter().enumerate().filter(|(_, r)| !r.is_ok()) {
        eprintln!("row {i} (beta={:?}) flagged: {}", r.beta, r.status);
    }
    Ok(())
}

fn run_mc(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let reports = scenario::run_mc_saturation(&cfg)?;
    let cutoffs = reports.iter().map(|r| Some(r.optimum.cutoffs)).collect();
    let columns = [
        "nbar", "tau", "alpha_sq", "sinh2_r", "phi", "repetitions", "trials", "seed", "cfi", "qfi_rho",
        "empirical_std", "crb_std", "quantum_std", "ratio", "bias", "bias_limit", "cutoff", "wall_time_s",
    ];
    let sidecar = Sidecar::new(Command::Mc.name(), &cfg, &columns, cutoffs);
    emit(cli.out.as_deref(), &reports, &sidecar)
}

fn run_validate(cli: &Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(_) => load_config(cli)?,
        None => {
            let mut c = ScenarioConfig::new(Model::FqRho, 1.0);
            apply_overrides(cli, &mut c)?;
            c
        }
    };
    let checks = scenario::validate(cfg.policy())?;
    {
        let stderr = std::io::stderr();
        let mut err = stderr.lock();
        for c in &checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(err, "{tag} {} (rel. error {:.2e}, tol {:.0e})", c.name, c.relative_error, c.tolerance);
        }
    }
    let columns = ["name", "value", "expected", "relative_error", "tolerance", "passed"];
    let sidecar = Sidecar::new(Command::Validate.name(), &cfg, &columns, Vec::new());
    emit(cli.out.as_deref(), &checks, &sidecar)?;
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(Failure::Numerical(format!("{failed} check(s) failed")));
    }
    Ok(())
}
