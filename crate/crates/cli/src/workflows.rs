use std::fmt;

use flowtime::matterwave::{
    energy_spread, sigma_c, table1, toa_bounds, toa_distribution, toa_distribution_auto, toa_window,
};
use flowtime::protocol::{protocol_error, reconstruct_tf, run_protocol};
use flowtime::quantum::uncertainty;
use flowtime::tf::{
    audit_system, probability_trace, random_ensemble_audit, summarize, tf_distribution, timing_statistics, SystemAudit,
};
use flowtime::three_level::{point_trace, uncertainty_sweep, RowOutcome, SweepSpec, SweptParameter};
use flowtime::Error;

use crate::config::{
    AuditConfig, ConfigError, GenericTfConfig, ProtocolRunConfig, RunConfig, ThreeLevelConfig, ToaConfig,
};
use crate::output::{Cell, RunOutput, Table};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Compute(Error),
    Io(std::io::Error),
}

impl RunError {
    /// 1 for bad input, 2 for a numerical failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Io(_) => 1,
            RunError::Compute(e) if e.is_input_error() => 1,
            RunError::Compute(_) => 2,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => e.fmt(f),
            RunError::Compute(e) => e.fmt(f),
            RunError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Compute(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

type Result<T> = std::result::Result<T, RunError>;

pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    match cfg {
        RunConfig::GenericTf(c) => generic_tf(c),
        RunConfig::ThreeLevel(c) => three_level(c),
        RunConfig::Protocol(c) => protocol(c),
        RunConfig::Toa(c) => toa(c),
        RunConfig::Table1(_) => Ok(species_table()),
        RunConfig::Audit(c) => ensemble(c),
    }
}

fn generic_tf(c: &GenericTfConfig) -> Result<RunOutput> {
    let sys = c.system().build("/generic-tf")?;
    let mut out = RunOutput::default();
    let tf = match tf_distribution(&sys.h, &sys.rho0, &sys.m, &c.grid) {
        Ok(tf) => tf,
        Err(Error::NoPopulationFlow) => {
            // nothing flows, so only the flat detection probability is reported
            let trace = probability_trace(&sys.h, &sys.rho0, &sys.m, &c.grid)?;
            let mut table = Table::new("probability", &["t", "p"]);
            for (t, p) in c.grid.times().into_iter().zip(trace.p) {
                table.push(vec![t.into(), p.into()]);
            }
            out.tables.push(table);
            out.skipped = 1;
            return Ok(out);
        }
        Err(e) => return Err(e.into()),
    };
    let stats = timing_statistics(&tf)?;
    let samples = tf.samples.as_ref().ok_or_else(|| Error::Numerical("missing flow samples".into()))?;
    let mut table = Table::new("tf", &["t", "p", "rate", "density"]);
    for (k, t) in c.grid.times().into_iter().enumerate() {
        table.push(vec![t.into(), samples.probability[k].into(), samples.rate[k].into(), tf.density[k].into()]);
    }
    out.tables.push(table);
    out.metric("mean", stats.mean);
    out.metric("second_moment", stats.second_moment);
    out.metric("stddev", stats.stddev);
    out.metric("pi_max", stats.pi_max);
    out.metric("delta_theta", tf.delta_theta);
    out.metric("norm_const", tf.norm_const);
    out.metric("delta_h", uncertainty(&sys.rho0, sys.h.op())?);
    for a in audit_system(&sys.h, &sys.rho0, &sys.m, &c.grid)?.audits() {
        out.audit("system", a);
    }
    Ok(out)
}

fn sweep_table(name: &str) -> Table {
    Table::new(
        name,
        &["param", "omega", "window", "dT", "dH", "product", "bound", "delta_theta", "passed", "status"],
    )
}

fn three_level(c: &ThreeLevelConfig) -> Result<RunOutput> {
    let (spec, name) = match (&c.point, &c.sweep) {
        (Some(p), _) => (
            SweepSpec { swept: SweptParameter::Omega1, values: vec![p.omega1], fixed: *p, grid_points_per_period: c.trace_points },
            "point",
        ),
        (None, Some(s)) => (s.clone(), "sweep"),
        (None, None) => return Err(ConfigError::new("/three-level", "exactly one of `point` or `sweep` is required").into()),
    };
    let res = uncertainty_sweep(&spec)?;
    let mut out = RunOutput::default();
    let mut table = sweep_table(name);
    let mut audits = res.audits.iter();
    for row in &res.rows {
        let mut cells: Vec<Cell> = vec![row.param.into(), row.omega.into(), row.window.into()];
        match row.outcome {
            RowOutcome::Audited { dt, dh, product, bound, delta_theta, passed } => {
                cells.extend([dt.into(), dh.into(), product.into(), bound.into(), delta_theta.into(), passed.into()]);
                cells.push("audited".into());
                if let Some(a) = audits.next() {
                    out.audit(format!("param={}", row.param), *a);
                }
            }
            RowOutcome::SkippedStationary => {
                cells.extend(std::iter::repeat_n(Cell::Empty, 6));
                cells.push("skipped-stationary".into());
                out.skipped += 1;
            }
        }
        table.push(cells);
    }
    out.tables.push(table);

    let traced: Vec<f64> = match &c.point {
        Some(p) if out.skipped == 0 => vec![p.omega1],
        Some(_) => Vec::new(),
        None => c.trace_values.clone(),
    };
    for (i, &v) in traced.iter().enumerate() {
        let trace = point_trace(&spec.params_at(v), c.trace_points)?;
        let mut t = Table::new(if c.point.is_some() { "trace".to_string() } else { format!("trace_{i:03}") }, &["param", "t", "p2", "density"]);
        for k in 0..trace.t.len() {
            t.push(vec![v.into(), trace.t[k].into(), trace.p2[k].into(), trace.density[k].into()]);
        }
        out.tables.push(t);
    }
    Ok(out)
}

fn protocol(c: &ProtocolRunConfig) -> Result<RunOutput> {
    let sys = c.system().build("/protocol")?;
    let cfg = c.protocol();
    let counts = run_protocol(&sys.h, &sys.rho0, &sys.m, &cfg)?;
    let recon = reconstruct_tf(&counts)?;
    let exact = tf_distribution(&sys.h, &sys.rho0, &sys.m, &cfg.grid)?;
    // odd points of the refined grid are the reconstruction midpoints
    let fine = tf_distribution(&sys.h, &sys.rho0, &sys.m, &cfg.grid.refined())?;
    let p_exact = &exact.samples.as_ref().ok_or_else(|| Error::Numerical("missing flow samples".into()))?.probability;

    let mut out = RunOutput::default();
    let mut table = Table::new("counts", &["t", "count", "frequency", "p_exact"]);
    for (k, (t, f)) in cfg.grid.times().into_iter().zip(counts.frequencies()).enumerate() {
        table.push(vec![t.into(), counts.counts[k].into(), f.into(), p_exact[k].into()]);
    }
    out.tables.push(table);
    let mut table = Table::new("reconstruction", &["t_mid", "density", "exact_density"]);
    for (k, (&t, &d)) in recon.t_mid.iter().zip(&recon.density).enumerate() {
        table.push(vec![t.into(), d.into(), fine.density[2 * k + 1].into()]);
    }
    out.tables.push(table);
    out.metric("tv_error", protocol_error(&recon, &exact)?);
    out.metric("shots_per_time", cfg.shots_per_time as f64);
    Ok(out)
}

fn toa(c: &ToaConfig) -> Result<RunOutput> {
    let spec = c.particle("/toa")?;
    let x_d = c.detector(&spec);
    let dist = match c.points {
        Some(n) => toa_distribution(&spec, x_d, &toa_window(&spec, x_d, n)?)?,
        None => toa_distribution_auto(&spec, x_d)?,
    };
    let mut out = RunOutput::default();
    let mut table = Table::new("toa", &["t", "current", "density"]);
    for (k, t) in dist.grid().times().into_iter().enumerate() {
        table.push(vec![t.into(), dist.current[k].into(), dist.density()[k].into()]);
    }
    out.tables.push(table);
    let spread = energy_spread(&spec);
    out.metric("detector_x", x_d);
    out.metric("mean", dist.mean());
    out.metric("stddev", dist.stddev());
    out.metric("classical_arrival", (2.0 * x_d / spec.g).sqrt());
    out.metric("delta_theta", dist.delta_theta());
    out.metric("captured", dist.captured);
    out.metric("delta_h", spread.total);
    out.metric("delta_h_kinetic", spread.kinetic);
    out.metric("delta_h_potential", spread.potential);
    out.metric("sigma_c", sigma_c(&spec));
    for a in toa_bounds(&spec, x_d)? {
        out.audit(format!("x_d={x_d}"), a);
    }
    Ok(out)
}

fn species_table() -> RunOutput {
    let mut out = RunOutput::default();
    let mut table = Table::new("table1", &["species", "mass_kg", "sigma_c_um", "dT_min_us"]);
    for row in table1() {
        table.push(vec![row.name.as_str().into(), row.mass.into(), (row.sigma_c * 1e6).into(), (row.dt_min * 1e6).into()]);
    }
    out.tables.push(table);
    out
}

fn ensemble(c: &AuditConfig) -> Result<RunOutput> {
    let trials = random_ensemble_audit((c.dim_min, c.dim_max), c.count, c.seed)?;
    let mut out = RunOutput::default();
    let mut table = Table::new(
        "ensemble",
        &[
            "index",
            "dim",
            "projector_rank",
            "state_rank",
            "window",
            "status",
            "delta_theta",
            "chebyshev_ratio",
            "uniform_ratio",
            "time_energy_ratio",
            "passed",
        ],
    );
    for t in &trials {
        let mut cells: Vec<Cell> =
            vec![t.index.into(), t.dim.into(), t.projector_rank.into(), t.state_rank.into(), t.window.into()];
        match &t.outcome {
            SystemAudit::Audited { chebyshev, uniform, time_energy, delta_theta } => {
                let passed = t.outcome.audits().iter().all(|a| a.passed);
                cells.extend([
                    "audited".into(),
                    (*delta_theta).into(),
                    chebyshev.ratio().into(),
                    uniform.map(|u| u.ratio()).into(),
                    time_energy.ratio().into(),
                    passed.into(),
                ]);
                for a in t.outcome.audits() {
                    out.audit(format!("trial={}", t.index), a);
                }
            }
            SystemAudit::SkippedStationary => {
                cells.push("skipped-stationary".into());
                cells.extend(std::iter::repeat_n(Cell::Empty, 5));
                out.skipped += 1;
            }
        }
        table.push(cells);
    }
    out.tables.push(table);
    let s = summarize(&trials);
    out.metric("trials", s.trials as f64);
    out.metric("audited", s.audited as f64);
    out.metric("undefined_uniform", s.undefined_uniform as f64);
    out.metric("chebyshev_violations", s.chebyshev_violations as f64);
    out.metric("uniform_violations", s.uniform_violations as f64);
    out.metric("time_energy_violations", s.time_energy_violations as f64);
    out.metric("min_ratio_chebyshev", s.min_ratio_chebyshev);
    out.metric("min_ratio_uniform", s.min_ratio_uniform);
    out.metric("min_ratio_time_energy", s.min_ratio_time_energy);
    Ok(out)
}
