//! JSON run configuration.
//!
//! A config holds exactly one workflow payload keyed by its name, e.g.
//! `{"generic-tf": {...}}`. Unknown fields are rejected everywhere, and parse
//! errors carry a JSON-pointer path to the offending value.

use std::fmt;
use std::path::Path;

use flowtime::matterwave::{ParticleSpec, Species};
use flowtime::protocol::ProtocolConfig;
use flowtime::quantum::{DensityMatrix, Hamiltonian, Operator, Projector, UnitSystem, C64};
use flowtime::tf::TimeGrid;
use flowtime::three_level::{SweepSpec, ThreeLevelParams, DEFAULT_POINTS_PER_PERIOD};
use serde::{Deserialize, Serialize};

/// Detector distance used when none is given, in units of the packet width.
pub const DEFAULT_DETECTOR_SIGMAS: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// JSON pointer to the offending value; empty for the document root.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        Self { path: path.into(), message: message.to_string() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() {
            write!(f, "config error: {}", self.message)
        } else {
            write!(f, "config error at {}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexEntry {
    pub re: f64,
    pub im: f64,
}

/// Row-major complex matrix.
pub type ComplexMatrix = Vec<Vec<ComplexEntry>>;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunConfig {
    GenericTf(GenericTfConfig),
    ThreeLevel(ThreeLevelConfig),
    Protocol(ProtocolRunConfig),
    Toa(ToaConfig),
    Table1(Table1Config),
    Audit(AuditConfig),
}

impl RunConfig {
    pub fn workflow(&self) -> &'static str {
        match self {
            RunConfig::GenericTf(_) => "generic-tf",
            RunConfig::ThreeLevel(_) => "three-level",
            RunConfig::Protocol(_) => "protocol",
            RunConfig::Toa(_) => "toa",
            RunConfig::Table1(_) => "table1",
            RunConfig::Audit(_) => "audit",
        }
    }

    /// Seed actually used by the run, if the workflow is stochastic.
    pub fn seed(&self) -> Option<u64> {
        match self {
            RunConfig::Protocol(p) => Some(p.seed),
            RunConfig::Audit(a) => Some(a.seed),
            _ => None,
        }
    }

    /// Replaces the config seed; a no-op for deterministic workflows.
    pub fn override_seed(&mut self, seed: u64) {
        match self {
            RunConfig::Protocol(p) => p.seed = seed,
            RunConfig::Audit(a) => a.seed = seed,
            _ => {}
        }
    }

    /// Semantic checks beyond what deserialization enforces.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let root = format!("/{}", self.workflow());
        match self {
            RunConfig::GenericTf(c) => c.system().build(&root).map(|_| ()),
            RunConfig::Protocol(c) => {
                c.system().build(&root)?;
                c.protocol().validate().map_err(|e| ConfigError::new(format!("{root}/shots_per_time"), e))
            }
            RunConfig::ThreeLevel(c) => c.validate(&root),
            RunConfig::Toa(c) => c.particle(&root).map(|_| ()),
            RunConfig::Table1(_) => Ok(()),
            RunConfig::Audit(c) => c.validate(&root),
        }
    }
}

/// Quantum system given as explicit matrices.
#[derive(Debug, Clone, Copy)]
pub struct SystemConfig<'a> {
    pub hbar: f64,
    pub hamiltonian: &'a ComplexMatrix,
    pub rho0: &'a ComplexMatrix,
    pub projector: &'a ComplexMatrix,
}

pub struct System {
    pub h: Hamiltonian,
    pub rho0: DensityMatrix,
    pub m: Projector,
}

fn operator(rows: &ComplexMatrix, path: String) -> Result<Operator, ConfigError> {
    let rows: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|z| C64::new(z.re, z.im)).collect()).collect();
    Operator::from_rows(&rows).map_err(|e| ConfigError::new(path, e))
}

impl SystemConfig<'_> {
    pub fn build(&self, root: &str) -> Result<System, ConfigError> {
        let units = UnitSystem::new(self.hbar, "1", "hbar/1").map_err(|e| ConfigError::new(format!("{root}/hbar"), e))?;
        let h_path = format!("{root}/H");
        let h = Hamiltonian::new(operator(self.hamiltonian, h_path.clone())?, units)
            .map_err(|e| ConfigError::new(h_path, e))?;
        let rho_path = format!("{root}/rho0");
        let rho0 = DensityMatrix::new(operator(self.rho0, rho_path.clone())?).map_err(|e| ConfigError::new(rho_path.clone(), e))?;
        let m_path = format!("{root}/M");
        let m = Projector::new(operator(self.projector, m_path.clone())?).map_err(|e| ConfigError::new(m_path.clone(), e))?;
        if rho0.dim() != h.dim() {
            return Err(ConfigError::new(rho_path, format!("dimension {} does not match H ({})", rho0.dim(), h.dim())));
        }
        if m.dim() != h.dim() {
            return Err(ConfigError::new(m_path, format!("dimension {} does not match H ({})", m.dim(), h.dim())));
        }
        Ok(System { h, rho0, m })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenericTfConfig {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(rename = "H")]
    pub hamiltonian: ComplexMatrix,
    pub rho0: ComplexMatrix,
    #[serde(rename = "M")]
    pub projector: ComplexMatrix,
    pub grid: TimeGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolRunConfig {
    #[serde(default = "one")]
    pub hbar: f64,
    #[serde(rename = "H")]
    pub hamiltonian: ComplexMatrix,
    pub rho0: ComplexMatrix,
    #[serde(rename = "M")]
    pub projector: ComplexMatrix,
    pub grid: TimeGrid,
    pub shots_per_time: u64,
    pub seed: u64,
}

macro_rules! system_view {
    ($t:ty) => {
        impl $t {
            pub fn system(&self) -> SystemConfig<'_> {
                SystemConfig { hbar: self.hbar, hamiltonian: &self.hamiltonian, rho0: &self.rho0, projector: &self.projector }
            }
        }
    };
}

system_view!(GenericTfConfig);
system_view!(ProtocolRunConfig);

impl ProtocolRunConfig {
    pub fn protocol(&self) -> ProtocolConfig {
        ProtocolConfig { grid: self.grid, shots_per_time: self.shots_per_time, seed: self.seed }
    }
}

/// Either a single operating point or a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreeLevelConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<ThreeLevelParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    /// Sweep values for which a `(t, p2, density)` trace is also written.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace_values: Vec<f64>,
    #[serde(default = "default_trace_points")]
    pub trace_points: usize,
}

fn default_trace_points() -> usize {
    DEFAULT_POINTS_PER_PERIOD
}

impl ThreeLevelConfig {
    fn validate(&self, root: &str) -> Result<(), ConfigError> {
        match (&self.point, &self.sweep) {
            (Some(p), None) => {
                p.validate().map_err(|e| ConfigError::new(format!("{root}/point"), e))?;
                if !self.trace_values.is_empty() {
                    return Err(ConfigError::new(format!("{root}/trace_values"), "only valid together with a sweep"));
                }
            }
            (None, Some(s)) => {
                s.validate().map_err(|e| ConfigError::new(format!("{root}/sweep"), e))?;
                for (i, v) in self.trace_values.iter().enumerate() {
                    if !s.values.contains(v) {
                        return Err(ConfigError::new(format!("{root}/trace_values/{i}"), format!("{v} is not a sweep value")));
                    }
                }
            }
            _ => return Err(ConfigError::new(root, "exactly one of `point` or `sweep` is required")),
        }
        TimeGrid::new(0.0, 1.0, self.trace_points).map_err(|e| ConfigError::new(format!("{root}/trace_points"), e))?;
        Ok(())
    }
}

/// Falling packet at a detector. Give `species` with `sigma`, or a full `particle`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToaConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<Species>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub particle: Option<ParticleSpec>,
    /// Detector position below the release point; defaults to 50 packet widths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

impl ToaConfig {
    pub fn particle(&self, root: &str) -> Result<ParticleSpec, ConfigError> {
        let spec = match (self.species, self.sigma, &self.particle) {
            (Some(s), Some(sigma), None) => s.spec(sigma).map_err(|e| ConfigError::new(format!("{root}/sigma"), e))?,
            (Some(_), None, None) => return Err(ConfigError::new(root, "`species` needs `sigma`")),
            (None, None, Some(p)) => {
                p.validate().map_err(|e| ConfigError::new(format!("{root}/particle"), e))?;
                *p
            }
            _ => return Err(ConfigError::new(root, "give either `species` with `sigma`, or `particle`")),
        };
        if let Some(x) = self.detector_x {
            if !(x.is_finite() && x > 0.0) {
                return Err(ConfigError::new(format!("{root}/detector_x"), format!("must be positive, got {x}")));
            }
        }
        if let Some(n) = self.points {
            TimeGrid::new(0.0, 1.0, n).map_err(|e| ConfigError::new(format!("{root}/points"), e))?;
        }
        Ok(spec)
    }

    pub fn detector(&self, spec: &ParticleSpec) -> f64 {
        self.detector_x.unwrap_or(DEFAULT_DETECTOR_SIGMAS * spec.sigma)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Config {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub dim_min: usize,
    pub dim_max: usize,
    pub count: usize,
    pub seed: u64,
}

impl AuditConfig {
    fn validate(&self, root: &str) -> Result<(), ConfigError> {
        if !(2 <= self.dim_min && self.dim_min <= self.dim_max && self.dim_max <= 8) {
            return Err(ConfigError::new(
                format!("{root}/dim_min"),
                format!("need 2 <= dim_min <= dim_max <= 8, got {}..{}", self.dim_min, self.dim_max),
            ));
        }
        if self.count == 0 {
            return Err(ConfigError::new(format!("{root}/count"), "must be at least 1"));
        }
        Ok(())
    }
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = pointer(e.path());
        ConfigError::new(path, e.into_inner())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RABI: &str = r#"{"generic-tf": {
        "H": [[{"re": 0, "im": 0}, {"re": 0.5, "im": 0}], [{"re": 0.5, "im": 0}, {"re": 0, "im": 0}]],
        "rho0": [[{"re": 1, "im": 0}, {"re": 0, "im": 0}], [{"re": 0, "im": 0}, {"re": 0, "im": 0}]],
        "M": [[{"re": 0, "im": 0}, {"re": 0, "im": 0}], [{"re": 0, "im": 0}, {"re": 1, "im": 0}]],
        "grid": {"t0": 0, "tf": 3.14159, "n": 101}}}"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = parse_config(RABI).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&text).unwrap(), cfg);
    }

    #[test]
    fn unknown_field_has_a_path() {
        let bad = RABI.replace("\"n\": 101", "\"n\": 101, \"extra\": 1");
        let err = parse_config(&bad).unwrap_err();
        assert!(err.path.starts_with("/generic-tf/grid"), "{err}");
    }

    #[test]
    fn malformed_entry_path() {
        let bad = RABI.replacen("{\"re\": 0.5, \"im\": 0}", "{\"re\": 0.5}", 1);
        let err = parse_config(&bad).unwrap_err();
        assert_eq!(err.path, "/generic-tf/H/0/1", "{err}");
    }

    #[test]
    fn semantic_errors_point_at_the_matrix() {
        let bad = RABI.replacen("{\"re\": 0.5, \"im\": 0}", "{\"re\": 0.7, \"im\": 0}", 1);
        assert_eq!(parse_config(&bad).unwrap_err().path, "/generic-tf/H");
    }

    #[test]
    fn toa_needs_one_particle_source() {
        let cfg = ToaConfig { species: Some(Species::Rb87), sigma: None, particle: None, detector_x: None, points: None };
        assert!(cfg.particle("/toa").is_err());
        let ok = ToaConfig { sigma: Some(1e-6), ..cfg };
        assert!((ok.detector(&ok.particle("/toa").unwrap()) - 50e-6).abs() < 1e-18);
    }
}
