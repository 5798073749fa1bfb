//! Random-system stress harness for the three timing bounds.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::distribution::tf_distribution_in_frame;
use super::{audit_chebyshev, audit_time_energy, audit_uniform_bound, timing_statistics, BoundAudit, BoundId, TimeGrid};
use crate::error::{Error, Result};
use crate::quantum::{uncertainty, DensityMatrix, EigenFrame, Hamiltonian, Operator, Projector, Propagator, UnitSystem, C64};
use crate::rng::keyed_rng;

/// Grid points used for every ensemble trial.
pub const ENSEMBLE_GRID_POINTS: usize = 801;

/// Outcome of auditing one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SystemAudit {
    Audited {
        chebyshev: BoundAudit,
        /// `None` when the net transfer vanishes and the uniform cap is undefined.
        uniform: Option<BoundAudit>,
        time_energy: BoundAudit,
        delta_theta: f64,
    },
    SkippedStationary,
}

impl SystemAudit {
    pub fn audits(&self) -> Vec<BoundAudit> {
        match self {
            SystemAudit::Audited { chebyshev, uniform, time_energy, .. } => {
                let mut v = vec![*chebyshev];
                v.extend(uniform.iter().copied());
                v.push(*time_energy);
                v
            }
            SystemAudit::SkippedStationary => Vec::new(),
        }
    }
}

/// Builds the distribution for `(h, rho0, m)` on `grid` and runs the three audits.
pub fn audit_system(h: &Hamiltonian, rho0: &DensityMatrix, m: &Projector, grid: &TimeGrid) -> Result<SystemAudit> {
    let prop = Propagator::new(h)?;
    let frame = EigenFrame::from_propagator(&prop, rho0, m)?;
    audit_in_frame(h, rho0, &frame, grid)
}

fn audit_in_frame(h: &Hamiltonian, rho0: &DensityMatrix, frame: &EigenFrame, grid: &TimeGrid) -> Result<SystemAudit> {
    let tf = match tf_distribution_in_frame(frame, grid) {
        Ok(tf) => tf,
        Err(Error::NoPopulationFlow) => return Ok(SystemAudit::SkippedStationary),
        Err(e) => return Err(e),
    };
    let stats = timing_statistics(&tf)?;
    // the energy spread is conserved, so the initial state suffices
    let delta_h = uncertainty(rho0, h.op())?;
    let uniform = match audit_uniform_bound(&tf, delta_h, h.units()) {
        Ok(a) => Some(a),
        Err(Error::UndefinedBound) => None,
        Err(e) => return Err(e),
    };
    Ok(SystemAudit::Audited {
        chebyshev: audit_chebyshev(&stats, None)?,
        uniform,
        time_energy: audit_time_energy(&stats, delta_h, tf.delta_theta, h.units())?,
        delta_theta: tf.delta_theta,
    })
}

/// One randomly drawn system and its audit outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleTrial {
    pub index: u64,
    pub dim: usize,
    pub projector_rank: usize,
    pub state_rank: usize,
    pub window: f64,
    pub outcome: SystemAudit,
}

fn complex_gaussian<R: Rng>(rng: &mut R) -> C64 {
    // unit total variance split evenly between the two parts
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}

fn gaussian_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<C64> {
    (0..dim).map(|_| complex_gaussian(rng)).collect()
}

/// Gaussian-unitary-ensemble Hamiltonian `(A + A†) / 2`.
pub fn random_hamiltonian<R: Rng>(rng: &mut R, dim: usize) -> Result<Hamiltonian> {
    let a = DMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng));
    let h = (&a + a.adjoint()).scale(0.5);
    Hamiltonian::new(Operator::new(h)?, UnitSystem::natural())
}

/// Pure state with probability 1/2, otherwise a mixture of rank in `[2, dim]`.
pub fn random_state<R: Rng>(rng: &mut R, dim: usize) -> Result<(DensityMatrix, usize)> {
    if rng.random_bool(0.5) {
        return Ok((DensityMatrix::pure(&gaussian_vector(rng, dim))?, 1));
    }
    let rank = rng.random_range(2..=dim);
    let kets: Vec<Vec<C64>> = (0..rank).map(|_| gaussian_vector(rng, dim)).collect();
    let weights: Vec<f64> = (0..rank).map(|_| Exp1.sample(rng)).collect();
    Ok((DensityMatrix::mixture(&weights, &kets)?, rank))
}

/// Projector of rank in `[1, dim - 1]` onto a random frame.
pub fn random_projector<R: Rng>(rng: &mut R, dim: usize) -> Result<Projector> {
    let rank = rng.random_range(1..dim);
    let frame: Vec<Vec<C64>> = (0..rank).map(|_| gaussian_vector(rng, dim)).collect();
    Projector::onto_span(&frame)
}

fn run_trial(index: u64, dim_min: usize, dim_max: usize, seed: u64) -> Result<EnsembleTrial> {
    let mut rng = keyed_rng(seed, index);
    let dim = rng.random_range(dim_min..=dim_max);
    let h = random_hamiltonian(&mut rng, dim)?;
    let (rho0, state_rank) = random_state(&mut rng, dim)?;
    let m = random_projector(&mut rng, dim)?;

    let prop = Propagator::new(&h)?;
    let spread = prop.spectrum().spread();
    let skipped = |window| EnsembleTrial {
        index,
        dim,
        projector_rank: m.rank(),
        state_rank,
        window,
        outcome: SystemAudit::SkippedStationary,
    };
    if !(spread > 0.0) {
        return Ok(skipped(0.0));
    }
    let window = 2.0 * PI * h.hbar() * dim as f64 / spread;
    let grid = TimeGrid::new(0.0, window, ENSEMBLE_GRID_POINTS)?;
    let frame = EigenFrame::from_propagator(&prop, &rho0, &m)?;
    let outcome = audit_in_frame(&h, &rho0, &frame, &grid)?;
    Ok(EnsembleTrial { outcome, ..skipped(window) })
}

/// Audits `count` random systems with dimension drawn uniformly from `dims`.
///
/// Trial `i` draws exclusively from stream `i` of the seeded generator, so the
/// output is identical for any thread count.
pub fn random_ensemble_audit(dims: (usize, usize), count: usize, seed: u64) -> Result<Vec<EnsembleTrial>> {
    let (dim_min, dim_max) = dims;
    if !(2 <= dim_min && dim_min <= dim_max && dim_max <= 8) {
        return Err(Error::Domain(format!("dimension range must satisfy 2 <= dmin <= dmax <= 8, got {dim_min}..{dim_max}")));
    }
    if count == 0 {
        return Err(Error::Domain("trial count must be at least 1".into()));
    }
    (0..count as u64).into_par_iter().map(|i| run_trial(i, dim_min, dim_max, seed)).collect()
}

/// Counts over an ensemble run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub trials: usize,
    pub audited: usize,
    pub skipped_stationary: usize,
    pub undefined_uniform: usize,
    pub chebyshev_violations: usize,
    pub uniform_violations: usize,
    pub time_energy_violations: usize,
    /// Smallest `lhs / rhs` seen per bound.
    pub min_ratio_chebyshev: f64,
    pub min_ratio_uniform: f64,
    pub min_ratio_time_energy: f64,
}

impl EnsembleSummary {
    pub fn violations(&self) -> usize {
        self.chebyshev_violations + self.uniform_violations + self.time_energy_violations
    }
}

pub fn summarize(trials: &[EnsembleTrial]) -> EnsembleSummary {
    let mut s = EnsembleSummary {
        trials: trials.len(),
        audited: 0,
        skipped_stationary: 0,
        undefined_uniform: 0,
        chebyshev_violations: 0,
        uniform_violations: 0,
        time_energy_violations: 0,
        min_ratio_chebyshev: f64::INFINITY,
        min_ratio_uniform: f64::INFINITY,
        min_ratio_time_energy: f64::INFINITY,
    };
    for t in trials {
        match &t.outcome {
            SystemAudit::SkippedStationary => s.skipped_stationary += 1,
            SystemAudit::Audited { uniform, .. } => {
                s.audited += 1;
                if uniform.is_none() {
                    s.undefined_uniform += 1;
                }
                for a in t.outcome.audits() {
                    let (violations, ratio) = match a.bound {
                        BoundId::ChebyshevSpread => (&mut s.chebyshev_violations, &mut s.min_ratio_chebyshev),
                        BoundId::UniformRate => (&mut s.uniform_violations, &mut s.min_ratio_uniform),
                        _ => (&mut s.time_energy_violations, &mut s.min_ratio_time_energy),
                    };
                    if !a.passed {
                        *violations += 1;
                    }
                    *ratio = ratio.min(a.ratio());
                }
            }
        }
    }
    s
}
