//! Time-of-flow distributions on finite windows, their moments, and the
//! three timing bounds they satisfy.

mod audit;
mod distribution;
mod ensemble;
mod grid;

pub use audit::{
    audit_chebyshev, audit_time_energy, audit_uniform_bound, chebyshev_gamma, time_energy_constant, BoundAudit, BoundId,
    AUDIT_TOL,
};
pub use distribution::{
    finite_difference_tf, probability_trace, tf_distribution, timing_statistics, DensitySource, FlowSamples,
    ProbabilityTrace, StepDensity, TfDistribution, TimingStatistics, STATIONARY_FLOW,
};
pub use ensemble::{
    audit_system, random_ensemble_audit, random_hamiltonian, random_projector, random_state, summarize, EnsembleSummary,
    EnsembleTrial, SystemAudit, ENSEMBLE_GRID_POINTS,
};
pub use grid::{TimeGrid, MIN_POINTS};
