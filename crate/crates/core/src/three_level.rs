//! Detuned three-level system driven by two fields.
//!
//! Frequencies are angular, in rad/μs, and times in μs with `hbar = 1`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{uncertainty, DensityMatrix, Hamiltonian, Operator, Projector, UnitSystem};
use crate::tf::{audit_time_energy, tf_distribution, timing_statistics, BoundAudit, TimeGrid};

pub const DEFAULT_POINTS_PER_PERIOD: usize = 2001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreeLevelParams {
    pub omega1: f64,
    pub omega2: f64,
    pub detuning: f64,
}

impl ThreeLevelParams {
    pub fn new(omega1: f64, omega2: f64, detuning: f64) -> Result<Self> {
        let p = Self { omega1, omega2, detuning };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega1.is_finite() && self.omega2.is_finite() && self.detuning.is_finite()) {
            return Err(Error::Validation("three-level parameters must be finite".into()));
        }
        if self.omega1 < 0.0 || self.omega2 < 0.0 {
            return Err(Error::Validation(format!(
                "Rabi frequencies must be nonnegative, got omega1 = {}, omega2 = {}",
                self.omega1, self.omega2
            )));
        }
        if self.omega1 == 0.0 && self.omega2 == 0.0 {
            return Err(Error::Validation("omega1 and omega2 cannot both be zero".into()));
        }
        Ok(())
    }
}

/// `hbar [[0, W1/2, 0], [W1/2, D, W2/2], [0, W2/2, 0]]` in the basis `|0>, |1>, |2>`.
pub fn build_hamiltonian(p: &ThreeLevelParams, units: &UnitSystem) -> Result<Hamiltonian> {
    p.validate()?;
    let (a, b) = (0.5 * p.omega1, 0.5 * p.omega2);
    let op = Operator::from_real_rows(&[vec![0.0, a, 0.0], vec![a, p.detuning, b], vec![0.0, b, 0.0]])?;
    Hamiltonian::new(op.scaled(units.hbar), units.clone())
}

/// `sqrt(W1^2 + W2^2 + D^2)`.
pub fn generalized_rabi(p: &ThreeLevelParams) -> Result<f64> {
    p.validate()?;
    let omega = (p.omega1.powi(2) + p.omega2.powi(2) + p.detuning.powi(2)).sqrt();
    if omega == 0.0 {
        return Err(Error::DegenerateWindow);
    }
    Ok(omega)
}

/// One generalized Rabi period, `2 pi / Omega`.
pub fn rabi_window(p: &ThreeLevelParams) -> Result<f64> {
    Ok(2.0 * PI / generalized_rabi(p)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweptParameter {
    Omega1,
    Detuning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub swept: SweptParameter,
    pub values: Vec<f64>,
    /// Base parameters; the swept field is overwritten per row.
    pub fixed: ThreeLevelParams,
    #[serde(default = "default_points")]
    pub grid_points_per_period: usize,
}

fn default_points() -> usize {
    DEFAULT_POINTS_PER_PERIOD
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

impl SweepSpec {
    /// Left panel: `omega1` over `[0.1, 5]` with `omega2 = detuning = 1`.
    pub fn omega1_default() -> Self {
        Self {
            swept: SweptParameter::Omega1,
            values: linspace(0.1, 5.0, 50),
            fixed: ThreeLevelParams { omega1: 1.0, omega2: 1.0, detuning: 1.0 },
            grid_points_per_period: DEFAULT_POINTS_PER_PERIOD,
        }
    }

    /// Right panel: detuning over `[0, 5]` with `omega1 = omega2 = 1`.
    pub fn detuning_default() -> Self {
        Self {
            swept: SweptParameter::Detuning,
            values: linspace(0.0, 5.0, 50),
            fixed: ThreeLevelParams { omega1: 1.0, omega2: 1.0, detuning: 0.0 },
            grid_points_per_period: DEFAULT_POINTS_PER_PERIOD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::Validation("sweep values must be nonempty".into()));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Validation("sweep values must be finite and nonnegative".into()));
        }
        if self.values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Validation("sweep values must be ascending".into()));
        }
        // grid size is checked by TimeGrid itself
        TimeGrid::new(0.0, 1.0, self.grid_points_per_period)?;
        Ok(())
    }

    pub fn params_at(&self, value: f64) -> ThreeLevelParams {
        let mut p = self.fixed;
        match self.swept {
            SweptParameter::Omega1 => p.omega1 = value,
            SweptParameter::Detuning => p.detuning = value,
        }
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RowOutcome {
    Audited { dt: f64, dh: f64, product: f64, bound: f64, delta_theta: f64, passed: bool },
    SkippedStationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: f64,
    pub omega: f64,
    pub window: f64,
    pub outcome: RowOutcome,
}

impl SweepRow {
    pub fn passed(&self) -> Option<bool> {
        match self.outcome {
            RowOutcome::Audited { passed, .. } => Some(passed),
            RowOutcome::SkippedStationary => None,
        }
    }

    /// Product over bound, `None` for skipped rows or a vanishing bound.
    pub fn ratio(&self) -> Option<f64> {
        match self.outcome {
            RowOutcome::Audited { product, bound, .. } if bound > 0.0 => Some(product / bound),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub swept: SweptParameter,
    pub rows: Vec<SweepRow>,
    pub audits: Vec<BoundAudit>,
}

impl SweepResult {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed() != Some(false))
    }
}

/// Target-state population and timing density over one Rabi period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointTrace {
    pub t: Vec<f64>,
    pub p2: Vec<f64>,
    pub density: Vec<f64>,
}

fn system(p: &ThreeLevelParams) -> Result<(Hamiltonian, DensityMatrix, Projector)> {
    Ok((build_hamiltonian(p, &UnitSystem::rabi())?, DensityMatrix::basis_state(3, 0)?, Projector::onto_basis(3, &[2])?))
}

fn sweep_point(p: &ThreeLevelParams, value: f64, points: usize) -> Result<(SweepRow, Option<BoundAudit>)> {
    let omega = generalized_rabi(p)?;
    let window = 2.0 * PI / omega;
    let (h, rho0, m) = system(p)?;
    let grid = TimeGrid::new(0.0, window, points)?;
    let skipped = SweepRow { param: value, omega, window, outcome: RowOutcome::SkippedStationary };
    let tf = match tf_distribution(&h, &rho0, &m, &grid) {
        Ok(tf) => tf,
        Err(Error::NoPopulationFlow) => return Ok((skipped, None)),
        Err(e) => return Err(e),
    };
    let stats = timing_statistics(&tf)?;
    let dh = uncertainty(&rho0, h.op())?;
    let audit = audit_time_energy(&stats, dh, tf.delta_theta, h.units())?;
    let outcome = RowOutcome::Audited {
        dt: stats.stddev,
        dh,
        product: audit.lhs,
        bound: audit.rhs,
        delta_theta: tf.delta_theta,
        passed: audit.passed,
    };
    Ok((SweepRow { outcome, ..skipped }, Some(audit)))
}

/// Timing-energy product against its bound for each sweep value.
///
/// Rows come back in input order. Values with no flow into `|2>` are kept as
/// skipped rows.
pub fn uncertainty_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let points: Vec<(SweepRow, Option<BoundAudit>)> = spec
        .values
        .par_iter()
        .map(|&v| sweep_point(&spec.params_at(v), v, spec.grid_points_per_period))
        .collect::<Result<_>>()?;
    let (rows, audits): (Vec<_>, Vec<_>) = points.into_iter().unzip();
    Ok(SweepResult { swept: spec.swept, rows, audits: audits.into_iter().flatten().collect() })
}

/// Population of `|2>` and its timing density over one period.
pub fn point_trace(p: &ThreeLevelParams, points: usize) -> Result<PointTrace> {
    let (h, rho0, m) = system(p)?;
    let grid = TimeGrid::new(0.0, rabi_window(p)?, points)?;
    let tf = tf_distribution(&h, &rho0, &m, &grid)?;
    let p2 = tf.samples.as_ref().map(|s| s.probability.clone()).unwrap_or_default();
    Ok(PointTrace { t: grid.times(), p2, density: tf.density })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::spectral_decompose;

    #[test]
    fn resonant_spectrum() {
        let h = build_hamiltonian(&ThreeLevelParams::new(1.0, 1.0, 0.0).unwrap(), &UnitSystem::rabi()).unwrap();
        let ev = spectral_decompose(&h).unwrap().eigenvalues().to_vec();
        let s = 0.5f64.sqrt();
        for (a, b) in ev.iter().zip([-s, 0.0, s]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn decoupled_ground_state() {
        let h = build_hamiltonian(&ThreeLevelParams::new(0.0, 1.0, 0.3).unwrap(), &UnitSystem::rabi()).unwrap();
        let m = h.op().matrix();
        assert_eq!(m[(0, 1)].norm(), 0.0);
        assert_eq!(m[(0, 2)].norm(), 0.0);
    }

    #[test]
    fn rabi_frequency_examples() {
        let w = generalized_rabi(&ThreeLevelParams::new(1.0, 1.0, 0.0).unwrap()).unwrap();
        assert!((w - 2f64.sqrt()).abs() < 1e-15);
        assert!((rabi_window(&ThreeLevelParams::new(1.0, 1.0, 0.0).unwrap()).unwrap() - 4.4429).abs() < 1e-4);
        assert!((generalized_rabi(&ThreeLevelParams::new(1.0, 1.0, 1.0).unwrap()).unwrap() - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(generalized_rabi(&ThreeLevelParams::new(1.0, 0.0, 0.0).unwrap()).unwrap(), 1.0);
    }

    #[test]
    fn invalid_params() {
        assert!(ThreeLevelParams::new(-1.0, 1.0, 0.0).is_err());
        assert!(ThreeLevelParams::new(0.0, 0.0, 1.0).is_err());
        assert!(ThreeLevelParams::new(f64::NAN, 1.0, 0.0).is_err());
    }

    #[test]
    fn resonant_transfer_is_complete() {
        let p = ThreeLevelParams::new(1.0, 1.0, 0.0).unwrap();
        let trace = point_trace(&p, 401).unwrap();
        for (t, p2) in trace.t.iter().zip(&trace.p2) {
            let exact = 0.25 * (1.0 - (2f64.sqrt() * t / 2.0).cos()).powi(2);
            assert!((p2 - exact).abs() < 1e-12);
        }
        let (row, _) = sweep_point(&p, 0.0, 2001).unwrap();
        match row.outcome {
            RowOutcome::Audited { delta_theta, dh, passed, product, .. } => {
                assert!((delta_theta - 1.0).abs() < 1e-12);
                assert!((dh - 0.5).abs() < 1e-12);
                assert!(product >= 0.09623);
                assert!(passed);
            }
            RowOutcome::SkippedStationary => panic!("resonant point skipped"),
        }
    }

    #[test]
    fn energy_spread_is_half_omega1() {
        for (w1, w2, d) in [(0.3, 1.0, 2.0), (2.0, 0.5, 0.0), (4.0, 3.0, 5.0)] {
            let p = ThreeLevelParams::new(w1, w2, d).unwrap();
            let (h, rho0, _) = system(&p).unwrap();
            assert!((uncertainty(&rho0, h.op()).unwrap() - w1 / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn swap_symmetry_on_resonance() {
        let a = point_trace(&ThreeLevelParams::new(0.7, 1.9, 0.0).unwrap(), 201).unwrap();
        let b = point_trace(&ThreeLevelParams::new(1.9, 0.7, 0.0).unwrap(), 201).unwrap();
        for (x, y) in a.p2.iter().zip(&b.p2) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn unpopulated_target_is_skipped() {
        let spec = SweepSpec {
            swept: SweptParameter::Detuning,
            values: vec![0.0, 1.0],
            fixed: ThreeLevelParams { omega1: 1.0, omega2: 0.0, detuning: 0.0 },
            grid_points_per_period: 101,
        };
        let res = uncertainty_sweep(&spec).unwrap();
        assert!(res.rows.iter().all(|r| r.outcome == RowOutcome::SkippedStationary));
        assert!(res.audits.is_empty());
    }

    #[test]
    fn sweep_rows_keep_input_order() {
        let mut spec = SweepSpec::detuning_default();
        spec.grid_points_per_period = 201;
        let res = uncertainty_sweep(&spec).unwrap();
        let params: Vec<f64> = res.rows.iter().map(|r| r.param).collect();
        assert_eq!(params, spec.values);
        assert!(res.all_passed());
    }

    #[test]
    fn rejects_bad_sweeps() {
        let mut spec = SweepSpec::omega1_default();
        spec.values = vec![];
        assert!(spec.validate().is_err());
        spec.values = vec![1.0, 0.5];
        assert!(spec.validate().is_err());
        spec.values = vec![1.0];
        spec.grid_points_per_period = 5;
        assert!(spec.validate().is_err());
    }
}
