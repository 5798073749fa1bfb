use serde::{Deserialize, Serialize};

use super::TimeGrid;
use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;
use crate::quantum::{DensityMatrix, EigenFrame, Hamiltonian, Projector};

/// Integrated flow below which the detection probability counts as stationary.
pub const STATIONARY_FLOW: f64 = 1e-12;

const PROBABILITY_TOL: f64 = 1e-10;

/// Detection probability `p(t_k) = Tr(rho_{t_k} M)` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityTrace {
    pub grid: TimeGrid,
    pub p: Vec<f64>,
}

impl ProbabilityTrace {
    pub fn new(grid: TimeGrid, p: Vec<f64>) -> Result<Self> {
        if p.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: p.len() });
        }
        if let Some((k, v)) = p.iter().enumerate().find(|(_, v)| !(**v >= -PROBABILITY_TOL && **v <= 1.0 + PROBABILITY_TOL)) {
            return Err(Error::Numerical(format!("probability {v:.6e} at grid index {k} outside [0, 1]")));
        }
        Ok(Self { grid, p })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensitySource {
    AnalyticRate,
    FiniteDifference,
    ShotEstimate,
    /// Normalized absolute probability current at a detector.
    Current,
}

/// Probability and signed flow rate sampled alongside an analytic-rate density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSamples {
    pub probability: Vec<f64>,
    pub rate: Vec<f64>,
}

/// Normalized timing density on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TfDistribution {
    pub grid: TimeGrid,
    pub density: Vec<f64>,
    /// Normalization constant `N`, the inverse of the integrated absolute flow.
    pub norm_const: f64,
    pub delta_theta: f64,
    pub source: DensitySource,
    pub rule: QuadratureRule,
    pub samples: Option<FlowSamples>,
}

impl TfDistribution {
    /// Normalizes `|values|` over the grid. Fails when the integral vanishes.
    pub fn from_unnormalized(grid: TimeGrid, values: &[f64], delta_theta: f64, source: DensitySource) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        let rule = QuadratureRule::for_points(grid.len());
        let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        let integral = rule.integrate(&abs, grid.dt());
        if !(integral.is_finite() && integral > 0.0) {
            return Err(Error::NoPopulationFlow);
        }
        let density = abs.iter().map(|v| v / integral).collect();
        Ok(Self { grid, density, norm_const: 1.0 / integral, delta_theta, source, rule, samples: None })
    }

    /// Quadrature of the density; 1 up to rounding.
    pub fn total(&self) -> f64 {
        self.rule.integrate(&self.density, self.grid.dt())
    }

    pub fn pi_max(&self) -> f64 {
        self.density.iter().copied().fold(0.0, f64::max)
    }
}

/// Mean, second moment, spread and peak of a timing density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingStatistics {
    pub mean: f64,
    pub second_moment: f64,
    pub stddev: f64,
    pub pi_max: f64,
}

impl TimingStatistics {
    /// Moments of `density` with the given per-point weights.
    fn from_weighted(times: &[f64], density: &[f64], weights: &[f64]) -> Result<Self> {
        let mass: f64 = weights.iter().zip(density).map(|(w, p)| w * p).sum();
        let mean = weights.iter().zip(density).zip(times).map(|((w, p), t)| w * p * t).sum::<f64>() / mass;
        let second_moment = weights.iter().zip(density).zip(times).map(|((w, p), t)| w * p * t * t).sum::<f64>() / mass;
        let var = weights
            .iter()
            .zip(density)
            .zip(times)
            .map(|((w, p), t)| w * p * (t - mean) * (t - mean))
            .sum::<f64>()
            / mass;
        let scale = second_moment.abs().max(1.0);
        if var < -1e-12 * scale || !var.is_finite() {
            return Err(Error::Numerical(format!("negative timing variance {var:.3e}")));
        }
        let pi_max = density.iter().copied().fold(0.0, f64::max);
        Ok(Self { mean, second_moment, stddev: var.max(0.0).sqrt(), pi_max })
    }
}

/// `p_k` on every grid point, evaluated in the Hamiltonian eigenbasis.
pub fn probability_trace(h: &Hamiltonian, rho0: &DensityMatrix, m: &Projector, grid: &TimeGrid) -> Result<ProbabilityTrace> {
    let frame = EigenFrame::new(h, rho0, m)?;
    ProbabilityTrace::new(*grid, grid.times().into_iter().map(|t| frame.probability(t)).collect())
}

/// Time-of-flow distribution from the analytic commutator rate.
///
/// `density_k = |r(t_k)| / N^{-1}`, with `N^{-1}` the quadrature of `|r|`
/// and `delta_theta = |p(tf) - p(t0)|`.
pub fn tf_distribution(h: &Hamiltonian, rho0: &DensityMatrix, m: &Projector, grid: &TimeGrid) -> Result<TfDistribution> {
    let frame = EigenFrame::new(h, rho0, m)?;
    tf_distribution_in_frame(&frame, grid)
}

pub(crate) fn tf_distribution_in_frame(frame: &EigenFrame, grid: &TimeGrid) -> Result<TfDistribution> {
    let (probability, rate): (Vec<f64>, Vec<f64>) = grid.times().into_iter().map(|t| frame.probability_and_rate(t)).unzip();
    ProbabilityTrace::new(*grid, probability.clone())?;
    let rule = QuadratureRule::for_points(grid.len());
    let abs: Vec<f64> = rate.iter().map(|r| r.abs()).collect();
    if rule.integrate(&abs, grid.dt()) <= STATIONARY_FLOW {
        return Err(Error::NoPopulationFlow);
    }
    let delta_theta = (probability[grid.len() - 1] - probability[0]).abs();
    let mut tf = TfDistribution::from_unnormalized(*grid, &rate, delta_theta, DensitySource::AnalyticRate)?;
    tf.samples = Some(FlowSamples { probability, rate });
    Ok(tf)
}

/// Moments of a time-of-flow distribution, using the distribution's own quadrature rule.
pub fn timing_statistics(tf: &TfDistribution) -> Result<TimingStatistics> {
    let weights = tf.rule.weights(tf.grid.len(), tf.grid.dt());
    TimingStatistics::from_weighted(&tf.grid.times(), &tf.density, &weights)
}

/// Piecewise-constant density on grid midpoints, produced by differencing
/// a sampled detection signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepDensity {
    pub t_mid: Vec<f64>,
    pub dt: f64,
    pub density: Vec<f64>,
    pub source: DensitySource,
}

impl StepDensity {
    /// `density_k = |x_{k+1} - x_k| / (dt · sum_l |x_{l+1} - x_l|)` at interval midpoints.
    ///
    /// Multiplying every level by a common positive constant leaves the
    /// result unchanged.
    pub fn from_levels(grid: &TimeGrid, levels: &[f64], source: DensitySource) -> Result<Self> {
        if levels.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: levels.len() });
        }
        let diffs: Vec<f64> = levels.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let total: f64 = diffs.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(match source {
                DensitySource::ShotEstimate => Error::NoDetectedFlow,
                _ => Error::NoPopulationFlow,
            });
        }
        let dt = grid.dt();
        Ok(Self {
            t_mid: grid.midpoints(),
            dt,
            density: diffs.iter().map(|d| d / total / dt).collect(),
            source,
        })
    }

    /// Riemann sum of the density; 1 up to rounding.
    pub fn total(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.dt
    }

    pub fn statistics(&self) -> Result<TimingStatistics> {
        let weights = vec![self.dt; self.density.len()];
        TimingStatistics::from_weighted(&self.t_mid, &self.density, &weights)
    }
}

/// Finite-difference time-of-flow distribution from a probability trace.
pub fn finite_difference_tf(trace: &ProbabilityTrace) -> Result<StepDensity> {
    StepDensity::from_levels(&trace.grid, &trace.p, DensitySource::FiniteDifference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{Operator, UnitSystem};
    use std::f64::consts::PI;

    fn rabi() -> (Hamiltonian, DensityMatrix, Projector) {
        let h = Hamiltonian::new(Operator::from_real_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap(), UnitSystem::natural())
            .unwrap();
        (h, DensityMatrix::basis_state(2, 0).unwrap(), Projector::onto_basis(2, &[1]).unwrap())
    }

    #[test]
    fn rabi_trace_matches_closed_form() {
        let (h, rho0, m) = rabi();
        let grid = TimeGrid::new(0.0, PI, 101).unwrap();
        let trace = probability_trace(&h, &rho0, &m, &grid).unwrap();
        for (t, p) in grid.times().iter().zip(&trace.p) {
            assert!((p - (t / 2.0).sin().powi(2)).abs() <= 1e-12);
        }
    }

    #[test]
    fn stationary_state_gives_constant_trace_and_no_flow() {
        let (h, _, m) = rabi();
        let rho0 = DensityMatrix::maximally_mixed(2);
        let grid = TimeGrid::new(0.0, 10.0, 51).unwrap();
        let trace = probability_trace(&h, &rho0, &m, &grid).unwrap();
        assert!(trace.p.iter().all(|p| (p - trace.p[0]).abs() < 1e-15));
        assert_eq!(tf_distribution(&h, &rho0, &m, &grid).unwrap_err(), Error::NoPopulationFlow);
    }

    #[test]
    fn rabi_tf_density() {
        let (h, rho0, m) = rabi();
        let grid = TimeGrid::new(0.0, PI, 2001).unwrap();
        let tf = tf_distribution(&h, &rho0, &m, &grid).unwrap();
        assert_eq!(tf.rule, QuadratureRule::Simpson);
        assert!((1.0 / tf.norm_const - 1.0).abs() < 1e-12);
        assert!((tf.delta_theta - 1.0).abs() < 1e-14);
        for (t, d) in grid.times().iter().zip(&tf.density) {
            assert!((d - 0.5 * t.sin()).abs() < 1e-12);
        }
        assert!((tf.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_shift_leaves_density_unchanged() {
        let (h, rho0, m) = rabi();
        let grid = TimeGrid::new(0.0, 4.0, 201).unwrap();
        let a = tf_distribution(&h, &rho0, &m, &grid).unwrap();
        let b = tf_distribution(&h.shifted(3.7), &rho0, &m, &grid).unwrap();
        for (x, y) in a.density.iter().zip(&b.density) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn rabi_statistics() {
        let (h, rho0, m) = rabi();
        let grid = TimeGrid::new(0.0, PI, 2001).unwrap();
        let stats = timing_statistics(&tf_distribution(&h, &rho0, &m, &grid).unwrap()).unwrap();
        // closed forms of int t sin(t)/2 and int t^2 sin(t)/2 over [0, pi]
        assert!((stats.mean - PI / 2.0).abs() < 1e-9);
        assert!((stats.second_moment - (PI * PI - 4.0) / 2.0).abs() < 1e-9);
        assert!((stats.stddev - (PI * PI / 4.0 - 2.0).sqrt()).abs() < 1e-9);
        assert!((stats.pi_max - 0.5).abs() < 1e-12);
    }

    #[test]
    fn symmetric_density_has_centered_mean() {
        let grid = TimeGrid::new(-1.0, 3.0, 41).unwrap();
        let values: Vec<f64> = grid.times().iter().map(|t| (-(t - 1.0) * (t - 1.0)).exp()).collect();
        let tf = TfDistribution::from_unnormalized(grid, &values, 1.0, DensitySource::Current).unwrap();
        assert!((timing_statistics(&tf).unwrap().mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn spike_has_sub_grid_spread() {
        let grid = TimeGrid::new(0.0, 1.0, 101).unwrap();
        let mut values = vec![0.0; 101];
        values[40] = 1.0;
        let tf = TfDistribution::from_unnormalized(grid, &values, 1.0, DensitySource::Current).unwrap();
        let stats = timing_statistics(&tf).unwrap();
        assert!(stats.stddev < grid.dt());
        assert!((stats.mean - 0.4).abs() < 1e-12);
    }

    #[test]
    fn finite_difference_density_is_scale_invariant() {
        let (h, rho0, m) = rabi();
        let grid = TimeGrid::new(0.0, PI, 101).unwrap();
        let trace = probability_trace(&h, &rho0, &m, &grid).unwrap();
        let a = finite_difference_tf(&trace).unwrap();
        let scaled: Vec<f64> = trace.p.iter().map(|p| 123.0 * p).collect();
        let b = StepDensity::from_levels(&grid, &scaled, DensitySource::FiniteDifference).unwrap();
        assert!((a.total() - 1.0).abs() < 1e-12);
        for (x, y) in a.density.iter().zip(&b.density) {
            assert!((x - y).abs() < 1e-12);
        }
        // midpoint placement is second order: error against sin(t)/2 is O(dt^2)
        for (t, d) in a.t_mid.iter().zip(&a.density) {
            assert!((d - 0.5 * t.sin()).abs() < 1e-4);
        }
    }

    #[test]
    fn out_of_range_probability_is_rejected() {
        let grid = TimeGrid::new(0.0, 1.0, 11).unwrap();
        let mut p = vec![0.5; 11];
        p[3] = 1.1;
        assert!(matches!(ProbabilityTrace::new(grid, p), Err(Error::Numerical(_))));
    }
}
