//! Free fall of a Gaussian matter wave and its time-of-arrival statistics.
//!
//! Coordinates point along the fall: the potential is `-m g x`, the packet
//! starts at rest centred on `x = 0`, and detectors sit at `x_d > 0`.

mod analytic;
mod solver;
mod toa;

pub use analytic::{analytic_observables, energy_spread, sigma_c, AnalyticPacket, EnergySpread, ParticleSpec};
pub use solver::{
    gaussian_state, grid_evolve, track_detector, DetectorTrace, Grid1D, GridState, ReducedSolver, LEAK_THRESHOLD,
    MIN_GRID_POINTS, NORM_TOL,
};
pub use toa::{
    species_row, table1, toa_bounds, toa_distribution, toa_distribution_auto, toa_window, toa_window_with_edge, Species, SpeciesRow,
    ToaDistribution, CAPTURE_TOL, TABLE_SIGMA, TOA_GRID_POINTS, WINDOW_EDGE, WINDOW_TAIL_LIMIT,
};

/// Reduced Planck constant in J·s.
pub const HBAR_SI: f64 = 1.054571817e-34;

/// Standard gravity in m/s².
pub const G_STANDARD: f64 = 9.81;
