//! `qest` command-line front end: realizability reports, angle sweeps and
//! the built-in demos.
//!
//! Exit codes: 0 on success, 1 on model or solver errors (and failed demo
//! claims), 2 on usage and configuration errors.

pub mod config;
pub mod demo;
pub mod output;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use qest_core::care::SolveOptions;
use qest_core::estimation::{sweep, EstimationError, SweepResult};
use qest_core::qsys::{
    check_realizable_general, check_realizable_passive, CommutationKind, ModelError, QuantumSystem, Realizability,
};
use qest_core::ComplexMatrix;
use thiserror::Error;

use config::{parse_config, parse_model, ConfigError, RunConfig};
use demo::{DemoRegistry, DemoRun};
use output::{write_outputs, IoError};

/// Environment variable overriding the solver tolerance.
pub const TOL_ENV: &str = "QEST_TOL";

#[derive(Debug, Parser)]
#[command(name = "qest", version, about = "Coherent-classical estimation of linear quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Report physical realizability of a model file.
    Check { model: PathBuf },
    /// Sweep the homodyne angle as described by a config file.
    Sweep { config: PathBuf },
    /// Run a built-in experiment (`passive` or `squeezer`).
    Demo {
        name: String,
        /// CSV output path [default: <name>.csv]
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: {source}", .path.display())]
    Config { path: PathBuf, source: ConfigError },
    #[error("cannot read {}: {source}", .path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("estimation error: {0}")]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } | CliError::Read { .. } => 2,
            CliError::Model(_) | CliError::Estimation(_) | CliError::Io(_) | CliError::Failed(_) => 1,
        }
    }
}

/// Runs `qest` with the process's standard streams.
pub fn run_command<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let rendered = e.render().to_string();
            let _ = if code == 0 { out.write_all(rendered.as_bytes()) } else { err.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    let tol = std::env::var(TOL_ENV).ok();
    let res = match cli.command {
        Command::Check { model } => check(&model, out),
        Command::Sweep { config } => run_sweep(&config, tol.as_deref(), out),
        Command::Demo { name, csv, svg } => run_demo(&name, csv, svg, tol.as_deref(), out),
    };
    match res {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

fn solve_options(cfg: &RunConfig, tol_env: Option<&str>) -> Result<SolveOptions, CliError> {
    let mut opts = cfg.solve_options();
    if let Some(s) = tol_env {
        let tol: f64 = s.trim().parse().map_err(|_| CliError::Usage(format!("{TOL_ENV} is not a number: {s:?}")))?;
        if !(tol.is_finite() && tol > 0.0) {
            return Err(CliError::Usage(format!("{TOL_ENV} must be positive, got {tol}")));
        }
        opts.tol = tol;
    }
    Ok(opts)
}

fn fmt_complex(z: num_complex::Complex64) -> String {
    format!("{:.6}{:+.6}i", z.re, z.im)
}

fn fmt_matrix(m: &ComplexMatrix) -> String {
    (0..m.rows())
        .map(|i| {
            let row: Vec<String> = (0..m.cols()).map(|j| fmt_complex(m.get(i, j))).collect();
            format!("    [{}]", row.join(", "))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn report_realizability(
    out: &mut dyn Write,
    title: &str,
    kind: CommutationKind,
    r: &Realizability,
) -> std::io::Result<()> {
    match r {
        Realizability::Realizable(theta) => {
            writeln!(out, "{title}: realizable")?;
            writeln!(out, "  Theta =\n{}", fmt_matrix(theta.matrix()))?;
            if theta.is_structural_check_only() {
                writeln!(out, "  note: structural check only (Hermitian block form and inertia of Theta)")?;
            }
        }
        Realizability::Failed(f) => {
            writeln!(out, "{title}: NOT realizable")?;
            writeln!(out, "  failed condition {}", f.condition.label(kind))?;
            writeln!(out, "  {}", f.detail)?;
            writeln!(out, "  candidate Theta =\n{}", fmt_matrix(&f.candidate_theta))?;
        }
    }
    Ok(())
}

fn check(path: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let spec = parse_model(&read(path)?).map_err(|source| CliError::Config { path: path.to_path_buf(), source })?;
    // Always build unconstrained so violations surface as a failed condition.
    let sys = spec.build(Some(false))?;
    let mut ok = true;
    let general = check_realizable_general(&sys)?;
    ok &= general.is_realizable();
    let w = |e: std::io::Error| CliError::Failed(format!("cannot write report: {e}"));
    writeln!(out, "model: {} mode(s), {} channel(s)", sys.modes(), sys.channels()).map_err(w)?;
    report_realizability(out, "general (doubled) form", CommutationKind::General, &general).map_err(w)?;
    if let Some(p) = sys.passive_part() {
        let passive = check_realizable_passive(&p)?;
        ok &= passive.is_realizable();
        report_realizability(out, "annihilation-only form", CommutationKind::Passive, &passive).map_err(w)?;
    }
    if ok {
        Ok(())
    } else {
        Err(CliError::Failed("model is not physically realizable".into()))
    }
}

struct Prepared {
    plant: QuantumSystem,
    controller: Option<QuantumSystem>,
    opts: SolveOptions,
    result: SweepResult,
}

fn execute(cfg: &RunConfig, tol_env: Option<&str>) -> Result<Prepared, CliError> {
    let opts = solve_options(cfg, tol_env)?;
    let plant = cfg.build_plant()?;
    let controller = cfg.build_controller()?;
    let result = sweep(&plant, controller.as_ref(), &cfg.angles.points(), &opts)?;
    write_outputs(&result, cfg.outputs.csv_path.as_deref(), cfg.outputs.svg_path.as_deref())?;
    Ok(Prepared { plant, controller, opts, result })
}

fn summarize(out: &mut dyn Write, cfg: &RunConfig, result: &SweepResult) -> std::io::Result<()> {
    let best = |f: &dyn Fn(&qest_core::estimation::SweepRow) -> Option<f64>| {
        result.rows.iter().filter_map(|r| f(r).map(|v| (r.theta_deg, v))).fold(
            None,
            |acc: Option<(f64, f64)>, (t, v)| match acc {
                Some((_, b)) if b <= v => acc,
                _ => Some((t, v)),
            },
        )
    };
    writeln!(out, "angles: {} from {} to {} deg", result.rows.len(), cfg.angles.start_deg, cfg.angles.stop_deg)?;
    if let Some((t, v)) = best(&|r| Some(r.cost_classical)) {
        writeln!(out, "min classical cost: {v} at theta = {t} deg")?;
    }
    if let Some((t, v)) = best(&|r| r.cost_coherent) {
        writeln!(out, "min coherent cost:  {v} at theta = {t} deg")?;
    }
    for (label, p) in [("csv", &cfg.outputs.csv_path), ("svg", &cfg.outputs.svg_path)] {
        if let Some(p) = p {
            writeln!(out, "wrote {label}: {}", p.display())?;
        }
    }
    Ok(())
}

fn run_sweep(path: &Path, tol_env: Option<&str>, out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = parse_config(&read(path)?).map_err(|source| CliError::Config { path: path.to_path_buf(), source })?;
    let run = execute(&cfg, tol_env)?;
    summarize(out, &cfg, &run.result).map_err(|e| CliError::Failed(format!("cannot write report: {e}")))
}

fn run_demo(
    name: &str,
    csv: Option<PathBuf>,
    svg: Option<PathBuf>,
    tol_env: Option<&str>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let registry = DemoRegistry::builtin();
    let demo = registry.get(name).ok_or_else(|| {
        CliError::Usage(format!("unknown demo `{name}` (available: {})", registry.names().join(", ")))
    })?;
    let mut cfg = demo.config();
    cfg.outputs.csv_path = Some(csv.unwrap_or_else(|| PathBuf::from(format!("{name}.csv"))));
    cfg.outputs.svg_path = svg;
    let run = execute(&cfg, tol_env)?;
    let claims = demo.verify(&DemoRun {
        plant: &run.plant,
        controller: run.controller.as_ref(),
        result: &run.result,
        opts: &run.opts,
    })?;
    let w = |e: std::io::Error| CliError::Failed(format!("cannot write report: {e}"));
    writeln!(out, "demo {name}: {}", demo.description()).map_err(w)?;
    summarize(out, &cfg, &run.result).map_err(w)?;
    for c in &claims {
        writeln!(out, "[{}] {} ({})", if c.holds { "ok" } else { "FAILED" }, c.label, c.detail).map_err(w)?;
    }
    match claims.iter().filter(|c| !c.holds).count() {
        0 => Ok(()),
        n => Err(CliError::Failed(format!("{n} demo claim(s) did not hold"))),
    }
}
