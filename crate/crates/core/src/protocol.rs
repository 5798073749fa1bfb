//! Ensemble measurement meta-protocol.
//!
//! For each time `t_k` a fresh ensemble of `S` copies is prepared, evolved and
//! measured once, so no copy is ever measured twice. The detection count `N_k`
//! is therefore a binomial draw with `S` trials and success probability
//! `p(t_k)`, independent across `k`. Differencing the counts gives a
//! piecewise-constant estimate of the time-of-flow distribution.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{DensityMatrix, Hamiltonian, Projector};
use crate::rng::keyed_rng;
use crate::tf::{probability_trace, DensitySource, ProbabilityTrace, StepDensity, TfDistribution, TimeGrid};

/// Measurement schedule, ensemble size per time point, and RNG seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub grid: TimeGrid,
    pub shots_per_time: u64,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn new(grid: TimeGrid, shots_per_time: u64, seed: u64) -> Result<Self> {
        let cfg = Self { grid, shots_per_time, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots_per_time == 0 {
            return Err(Error::Validation("shots_per_time must be at least 1".into()));
        }
        Ok(())
    }
}

/// Detection counts `N_k` out of `shots` trials at each grid time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotCounts {
    pub grid: TimeGrid,
    pub counts: Vec<u64>,
    pub shots: u64,
}

impl ShotCounts {
    /// Per-time detection frequencies `N_k / S`, the consistent estimator of `p(t_k)`.
    pub fn frequencies(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.shots as f64).collect()
    }
}

/// Shot-estimated distribution on interval midpoints.
pub type ReconstructedTf = StepDensity;

/// Samples the protocol for a system: exact `p(t_k)`, then binomial counts.
pub fn run_protocol(h: &Hamiltonian, rho0: &DensityMatrix, m: &Projector, cfg: &ProtocolConfig) -> Result<ShotCounts> {
    cfg.validate()?;
    sample_counts(&probability_trace(h, rho0, m, &cfg.grid)?, cfg.shots_per_time, cfg.seed)
}

/// Binomial counts for an already computed probability trace.
///
/// Time point `k` draws from stream `k` of the seeded generator.
pub fn sample_counts(trace: &ProbabilityTrace, shots: u64, seed: u64) -> Result<ShotCounts> {
    if shots == 0 {
        return Err(Error::Validation("shots must be at least 1".into()));
    }
    let counts = trace
        .p
        .par_iter()
        .enumerate()
        .map(|(k, &p)| {
            let p = p.clamp(0.0, 1.0);
            let dist = Binomial::new(shots, p).map_err(|e| Error::Numerical(format!("binomial({shots}, {p}): {e}")))?;
            Ok(dist.sample(&mut keyed_rng(seed, k as u64)))
        })
        .collect::<Result<Vec<u64>>>()?;
    Ok(ShotCounts { grid: trace.grid, counts, shots })
}

/// Step-five estimator `(1/dt) |Delta N_k| / sum_l |Delta N_l|` at midpoints.
pub fn reconstruct_tf(counts: &ShotCounts) -> Result<ReconstructedTf> {
    let levels: Vec<f64> = counts.counts.iter().map(|&c| c as f64).collect();
    reconstruct_from_levels(&counts.grid, &levels)
}

/// Same estimator on real-valued counts, e.g. `S·p(t_k)` for the infinite-shot limit.
pub fn reconstruct_from_levels(grid: &TimeGrid, levels: &[f64]) -> Result<ReconstructedTf> {
    StepDensity::from_levels(grid, levels, DensitySource::ShotEstimate)
}

fn interpolate(grid: &TimeGrid, values: &[f64], t: f64) -> Option<f64> {
    let dt = grid.dt();
    let x = (t - grid.t0()) / dt;
    let last = (grid.len() - 1) as f64;
    // allow a few ulps of slack at the window edges
    if !(x >= -1e-9 && x <= last + 1e-9) {
        return None;
    }
    let x = x.clamp(0.0, last);
    let k = (x.floor() as usize).min(grid.len() - 2);
    let w = x - k as f64;
    Some(values[k] * (1.0 - w) + values[k + 1] * w)
}

/// Total-variation distance `1/2 sum_k |pi_hat_k - pi(t_k)| dt`, with the
/// exact density linearly interpolated to the estimator's midpoints.
pub fn protocol_error(recon: &ReconstructedTf, exact: &TfDistribution) -> Result<f64> {
    let mut acc = 0.0;
    for (&t, &d) in recon.t_mid.iter().zip(&recon.density) {
        let e = interpolate(&exact.grid, &exact.density, t).ok_or_else(|| {
            Error::Domain(format!(
                "estimator time {t} outside exact grid [{}, {}]",
                exact.grid.t0(),
                exact.grid.tf()
            ))
        })?;
        acc += (d - e).abs();
    }
    Ok((0.5 * acc * recon.dt).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{Operator, UnitSystem};
    use crate::tf::{finite_difference_tf, tf_distribution};
    use std::f64::consts::PI;

    fn rabi() -> (Hamiltonian, DensityMatrix, Projector) {
        let h = Hamiltonian::new(Operator::from_real_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap(), UnitSystem::natural())
            .unwrap();
        (h, DensityMatrix::basis_state(2, 0).unwrap(), Projector::onto_basis(2, &[1]).unwrap())
    }

    #[test]
    fn certain_outcomes_are_exact() {
        let grid = TimeGrid::new(0.0, 1.0, 11).unwrap();
        let zeros = ProbabilityTrace::new(grid, vec![0.0; 11]).unwrap();
        let ones = ProbabilityTrace::new(grid, vec![1.0; 11]).unwrap();
        assert!(sample_counts(&zeros, 500, 3).unwrap().counts.iter().all(|&c| c == 0));
        assert!(sample_counts(&ones, 500, 3).unwrap().counts.iter().all(|&c| c == 500));
    }

    #[test]
    fn orthogonal_detector_never_clicks() {
        // |2> is decoupled from the two-level dynamics of {|0>, |1>}
        let h = Hamiltonian::new(
            Operator::from_real_rows(&[vec![0.0, 0.5, 0.0], vec![0.5, 0.0, 0.0], vec![0.0, 0.0, 1.0]]).unwrap(),
            UnitSystem::natural(),
        )
        .unwrap();
        let cfg = ProtocolConfig::new(TimeGrid::new(0.0, PI, 21).unwrap(), 1000, 1).unwrap();
        let counts = run_protocol(&h, &DensityMatrix::basis_state(3, 0).unwrap(), &Projector::onto_basis(3, &[2]).unwrap(), &cfg)
            .unwrap();
        assert!(counts.counts.iter().all(|&c| c == 0));
        assert_eq!(reconstruct_tf(&counts).unwrap_err(), Error::NoDetectedFlow);
    }

    #[test]
    fn frequencies_track_probability() {
        let (h, rho0, m) = rabi();
        let shots = 100_000;
        let cfg = ProtocolConfig::new(TimeGrid::new(0.0, PI, 101).unwrap(), shots, 7).unwrap();
        let counts = run_protocol(&h, &rho0, &m, &cfg).unwrap();
        let mean_err: f64 = counts
            .frequencies()
            .iter()
            .zip(cfg.grid.times())
            .map(|(f, t)| (f - (t / 2.0).sin().powi(2)).abs())
            .sum::<f64>()
            / 101.0;
        assert!(mean_err < 3.0 / (shots as f64).sqrt(), "{mean_err}");
    }

    #[test]
    fn deterministic_for_seed() {
        let (h, rho0, m) = rabi();
        let cfg = ProtocolConfig::new(TimeGrid::new(0.0, PI, 51).unwrap(), 1000, 11).unwrap();
        assert_eq!(run_protocol(&h, &rho0, &m, &cfg).unwrap(), run_protocol(&h, &rho0, &m, &cfg).unwrap());
    }

    #[test]
    fn injected_exact_counts_match_finite_difference() {
        let (h, rho0, m) = rabi();
        let grid = TimeGrid::new(0.0, PI, 101).unwrap();
        let trace = probability_trace(&h, &rho0, &m, &grid).unwrap();
        let levels: Vec<f64> = trace.p.iter().map(|p| 1e5 * p).collect();
        let recon = reconstruct_from_levels(&grid, &levels).unwrap();
        let fd = finite_difference_tf(&trace).unwrap();
        for (a, b) in recon.density.iter().zip(&fd.density) {
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1.0));
        }
        assert!((recon.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_counts_are_rejected() {
        let grid = TimeGrid::new(0.0, 1.0, 11).unwrap();
        let counts = ShotCounts { grid, counts: vec![17; 11], shots: 100 };
        assert_eq!(reconstruct_tf(&counts).unwrap_err(), Error::NoDetectedFlow);
    }

    #[test]
    fn error_of_exact_estimate_is_small_and_disjoint_is_one() {
        let grid = TimeGrid::new(0.0, 2.0, 201).unwrap();
        // triangle on [0, 1], zero on [1, 2]
        let left: Vec<f64> = grid.times().iter().map(|&t| if t <= 1.0 { 1.0 - (2.0 * t - 1.0).abs() } else { 0.0 }).collect();
        let exact = TfDistribution::from_unnormalized(grid, &left, 1.0, DensitySource::AnalyticRate).unwrap();
        // cumulative of the right-hand triangle: all mass in [1, 2]
        let right_cdf: Vec<f64> = grid
            .times()
            .iter()
            .map(|&t| {
                let s = (t - 1.0).clamp(0.0, 1.0);
                if s <= 0.5 {
                    2.0 * s * s
                } else {
                    1.0 - 2.0 * (1.0 - s) * (1.0 - s)
                }
            })
            .collect();
        let recon = reconstruct_from_levels(&grid, &right_cdf).unwrap();
        assert!((protocol_error(&recon, &exact).unwrap() - 1.0).abs() < 1e-3);

        let left_cdf: Vec<f64> = right_cdf.iter().rev().map(|c| 1.0 - c).collect();
        let same = reconstruct_from_levels(&grid, &left_cdf).unwrap();
        assert!(protocol_error(&same, &exact).unwrap() < 1e-3);
    }

    #[test]
    fn error_against_misaligned_grid_fails() {
        let (h, rho0, m) = rabi();
        let exact = tf_distribution(&h, &rho0, &m, &TimeGrid::new(0.0, 1.0, 101).unwrap()).unwrap();
        let trace = probability_trace(&h, &rho0, &m, &TimeGrid::new(0.0, PI, 101).unwrap()).unwrap();
        let recon = reconstruct_from_levels(&trace.grid, &trace.p).unwrap();
        assert!(matches!(protocol_error(&recon, &exact), Err(Error::Domain(_))));
    }
}
