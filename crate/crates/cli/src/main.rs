//! `flowtime` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 numerical failure,
//! 3 at least one bound audit failed.

mod config;
mod output;
mod workflows;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use flowtime::matterwave::Species;
use flowtime::three_level::{SweepSpec, ThreeLevelParams, DEFAULT_POINTS_PER_PERIOD};

use config::{load_config, AuditConfig, ConfigError, RunConfig, Table1Config, ThreeLevelConfig, ToaConfig};
use output::{write_json, AuditSummary, Format, RunReport};
use workflows::RunError;

const DEFAULT_SEED: u64 = 0;

#[derive(Parser, Debug)]
#[command(name = "flowtime", version, about = "Time-of-flow distributions, reconstruction and timing bounds")]
struct Cli {
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = "flowtime-out")]
    out: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Overrides the seed of stochastic workflows.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON run config; its payload must match the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Distribution and bound audits for a system given as matrices (needs --config).
    GenericTf,
    /// Driven three-level system: a single point or a parameter sweep.
    ThreeLevel(ThreeLevelArgs),
    /// Shot-based reconstruction from ensemble counts (needs --config).
    Protocol,
    /// Arrival-time distribution of a falling Gaussian packet.
    Toa(ToaArgs),
    /// Critical widths and timing resolutions of the reference species.
    Table1,
    /// Random-system audit of the timing bounds.
    Audit(AuditArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SweepKind {
    Omega1,
    Detuning,
}

#[derive(Args, Debug)]
struct ThreeLevelArgs {
    /// Default sweep to run when no point is given.
    #[arg(long, value_enum, conflicts_with = "omega1")]
    sweep: Option<SweepKind>,
    /// Run a single point with this Omega1 (rad/us).
    #[arg(long)]
    omega1: Option<f64>,
    #[arg(long, requires = "omega1")]
    omega2: Option<f64>,
    #[arg(long, requires = "omega1")]
    detuning: Option<f64>,
    /// Grid points over one Rabi period.
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args, Debug)]
struct ToaArgs {
    /// antihydrogen, k39, rb87 or cs133.
    #[arg(long, value_parser = parse_species)]
    species: Option<Species>,
    /// Packet width in m.
    #[arg(long)]
    sigma: Option<f64>,
    /// Detector distance below release in m; defaults to 50 sigma.
    #[arg(long)]
    detector: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
}

#[derive(Args, Debug)]
struct AuditArgs {
    /// Inclusive dimension range, e.g. 2..8.
    #[arg(long, value_parser = parse_dims)]
    dims: Option<(usize, usize)>,
    #[arg(long)]
    count: Option<usize>,
}

fn parse_species(s: &str) -> Result<Species, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
        .map_err(|_| format!("unknown species `{s}`; expected antihydrogen, k39, rb87 or cs133"))
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    let bad = || format!("expected a range like 2..8, got `{s}`");
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a, b.strip_prefix('=').unwrap_or(b)),
        None => (s, s),
    };
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

fn usage(message: impl std::fmt::Display) -> RunError {
    RunError::Config(ConfigError::new("", message))
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenericTf => "generic-tf",
            Command::ThreeLevel(_) => "three-level",
            Command::Protocol => "protocol",
            Command::Toa(_) => "toa",
            Command::Table1 => "table1",
            Command::Audit(_) => "audit",
        }
    }

    fn has_flags(&self) -> bool {
        match self {
            Command::ThreeLevel(a) => {
                a.sweep.is_some() || a.omega1.is_some() || a.omega2.is_some() || a.detuning.is_some() || a.points.is_some()
            }
            Command::Toa(a) => a.species.is_some() || a.sigma.is_some() || a.detector.is_some() || a.points.is_some(),
            Command::Audit(a) => a.dims.is_some() || a.count.is_some(),
            _ => false,
        }
    }

    /// Config assembled from command-line flags alone.
    fn to_config(&self, seed: Option<u64>) -> Result<RunConfig, RunError> {
        let cfg = match self {
            Command::GenericTf | Command::Protocol => {
                return Err(usage(format!("`{}` needs --config with the system matrices", self.name())))
            }
            Command::ThreeLevel(a) => {
                let trace_points = a.points.unwrap_or(DEFAULT_POINTS_PER_PERIOD);
                match a.omega1 {
                    Some(omega1) => RunConfig::ThreeLevel(ThreeLevelConfig {
                        point: Some(ThreeLevelParams {
                            omega1,
                            omega2: a.omega2.unwrap_or(1.0),
                            detuning: a.detuning.unwrap_or(0.0),
                        }),
                        sweep: None,
                        trace_values: Vec::new(),
                        trace_points,
                    }),
                    None => {
                        let mut sweep = match a.sweep.unwrap_or(SweepKind::Omega1) {
                            SweepKind::Omega1 => SweepSpec::omega1_default(),
                            SweepKind::Detuning => SweepSpec::detuning_default(),
                        };
                        sweep.grid_points_per_period = trace_points;
                        RunConfig::ThreeLevel(ThreeLevelConfig {
                            point: None,
                            sweep: Some(sweep),
                            trace_values: Vec::new(),
                            trace_points,
                        })
                    }
                }
            }
            Command::Toa(a) => RunConfig::Toa(ToaConfig {
                species: Some(a.species.unwrap_or(Species::Rb87)),
                sigma: Some(a.sigma.unwrap_or(1e-6)),
                particle: None,
                detector_x: a.detector,
                points: a.points,
            }),
            Command::Table1 => RunConfig::Table1(Table1Config {}),
            Command::Audit(a) => {
                let (dim_min, dim_max) = a.dims.unwrap_or((2, 8));
                RunConfig::Audit(AuditConfig {
                    dim_min,
                    dim_max,
                    count: a.count.unwrap_or(1000),
                    seed: seed.unwrap_or(DEFAULT_SEED),
                })
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, RunError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            if cli.command.has_flags() {
                return Err(usage("workflow flags cannot be combined with --config"));
            }
            let cfg = load_config(path)?;
            if cfg.workflow() != cli.command.name() {
                return Err(usage(format!(
                    "config holds a `{}` payload but the subcommand is `{}`",
                    cfg.workflow(),
                    cli.command.name()
                )));
            }
            cfg
        }
        None => cli.command.to_config(cli.seed)?,
    };
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<RunReport, RunError> {
    let started = Instant::now();
    let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let cfg = resolve_config(cli)?;
    let out = workflows::run(&cfg)?;

    fs::create_dir_all(&cli.out)?;
    let mut outputs = Vec::new();
    let config_path = cli.out.join("config.json");
    write_json(&config_path, &cfg)?;
    outputs.push(display(&config_path));
    for table in &out.tables {
        outputs.push(display(&table.write(&cli.out, cli.format)?));
    }
    let failed = out.failed_audits();
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION"),
        workflow: cfg.workflow(),
        seed: cfg.seed(),
        started_unix_s,
        wall_time_s: started.elapsed().as_secs_f64(),
        outputs,
        audit_summary: AuditSummary { total: out.audits.len(), passed: out.audits.len() - failed, failed },
        metrics: out.metrics,
        skipped: out.skipped,
        audits: out.audits,
    };
    write_json(&cli.out.join("report.json"), &report)?;
    Ok(report)
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(report) => {
            let s = &report.audit_summary;
            println!(
                "{}: wrote {} files to {}; audits {} passed, {} failed, {} skipped",
                report.workflow,
                report.outputs.len() + 1,
                cli.out.display(),
                s.passed,
                s.failed,
                report.skipped
            );
            for (k, v) in &report.metrics {
                println!("  {k} = {v:.6e}");
            }
            if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                for a in report.audits.iter().filter(|a| !a.audit.passed) {
                    eprintln!("audit failed: {} {} lhs={:e} rhs={:e}", a.context, a.audit.bound, a.audit.lhs, a.audit.rhs);
                }
                ExitCode::from(3)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
