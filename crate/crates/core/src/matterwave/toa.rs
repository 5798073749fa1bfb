use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use super::analytic::{energy_spread, sigma_c, AnalyticPacket, ParticleSpec};
use crate::error::{Error, Result};
use crate::tf::{
    time_energy_constant, timing_statistics, BoundAudit, BoundId, DensitySource, TfDistribution, TimeGrid,
    TimingStatistics,
};

/// Points in an automatically chosen arrival window.
pub const TOA_GRID_POINTS: usize = 8001;
/// Probability left outside each end of an automatic window.
pub const WINDOW_EDGE: f64 = 1e-12;
/// Largest `F_tf(x_d)` accepted at the end of a window.
pub const WINDOW_TAIL_LIMIT: f64 = 1e-3;
/// Largest fraction of the arriving probability a window may miss.
pub const CAPTURE_TOL: f64 = 1e-4;
/// Width at which the species table evaluates the energy spread.
pub const TABLE_SIGMA: f64 = 1e-6;

const MICROSECONDS: f64 = 1e6;

/// Arrival-time density `|j(x_d, t)| / int |j| dt` at a detector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToaDistribution {
    pub detector_x: f64,
    /// Density on the arrival window; `delta_theta` holds `F_0(x_d)`.
    pub tf: TfDistribution,
    pub current: Vec<f64>,
    pub stats: TimingStatistics,
    /// Share of `F_0(x_d)` that crosses the detector inside the window.
    pub captured: f64,
}

impl ToaDistribution {
    pub fn grid(&self) -> &TimeGrid {
        &self.tf.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.tf.density
    }

    pub fn delta_theta(&self) -> f64 {
        self.tf.delta_theta
    }

    pub fn mean(&self) -> f64 {
        self.stats.mean
    }

    pub fn stddev(&self) -> f64 {
        self.stats.stddev
    }
}

fn check_detector(spec: &ParticleSpec, x_d: f64) -> Result<AnalyticPacket> {
    if !(x_d.is_finite() && x_d > 0.0) {
        return Err(Error::Domain(format!("detector must sit at x_d > 0 along the fall, got {x_d}")));
    }
    AnalyticPacket::new(*spec)
}

fn bisect(mut lo: f64, mut hi: f64, below: impl Fn(f64) -> bool) -> f64 {
    // invariant: below(lo) and !below(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Window outside which at most [`WINDOW_EDGE`] of the probability arrives on either side.
pub fn toa_window(spec: &ParticleSpec, x_d: f64, n: usize) -> Result<TimeGrid> {
    toa_window_with_edge(spec, x_d, n, WINDOW_EDGE)
}

/// As [`toa_window`] with a custom edge probability.
pub fn toa_window_with_edge(spec: &ParticleSpec, x_d: f64, n: usize, edge: f64) -> Result<TimeGrid> {
    if !(edge > 0.0 && edge <= WINDOW_TAIL_LIMIT) {
        return Err(Error::Domain(format!("window edge must lie in (0, {WINDOW_TAIL_LIMIT}], got {edge}")));
    }
    let p = check_detector(spec, x_d)?;
    let f0 = p.cumulative(x_d, 0.0);
    let q0 = p.upper_tail(x_d, 0.0);
    let mut t_hi = (2.0 * x_d / spec.g).sqrt();
    while p.cumulative(x_d, t_hi) > edge {
        t_hi *= 2.0;
        if !t_hi.is_finite() {
            return Err(Error::Numerical("arrival window search diverged".into()));
        }
    }
    let t_hi = bisect(0.0, t_hi, |t| p.cumulative(x_d, t) > edge);
    // last time at which the arrived share is still negligible
    let arrived = |t: f64| p.upper_tail(x_d, t) - q0;
    let t_lo = if arrived(0.0) > edge * f0 {
        0.0
    } else {
        let first = bisect(0.0, t_hi, |t| arrived(t) <= edge * f0);
        let step = (t_hi - first) / (n.max(2) - 1) as f64;
        (first - step).max(0.0)
    };
    TimeGrid::new(t_lo, t_hi, n)
}

/// Arrival-time distribution on `grid` from the analytic current.
pub fn toa_distribution(spec: &ParticleSpec, x_d: f64, grid: &TimeGrid) -> Result<ToaDistribution> {
    let p = check_detector(spec, x_d)?;
    if grid.t0() < 0.0 {
        return Err(Error::Domain(format!("arrival window must start at t >= 0, got {}", grid.t0())));
    }
    let remaining = p.cumulative(x_d, grid.tf());
    if remaining > WINDOW_TAIL_LIMIT {
        return Err(Error::WindowTooShort { remaining, limit: WINDOW_TAIL_LIMIT });
    }
    let f0 = p.cumulative(x_d, 0.0);
    let captured = (p.upper_tail(x_d, grid.tf()) - p.upper_tail(x_d, grid.t0())) / f0;
    if captured < 1.0 - CAPTURE_TOL {
        return Err(Error::Domain(format!(
            "window [{}, {}] captures only {captured} of the probability arriving at {x_d}",
            grid.t0(),
            grid.tf()
        )));
    }
    let current: Vec<f64> = grid.times().iter().map(|&t| p.current(x_d, t)).collect();
    let tf = TfDistribution::from_unnormalized(*grid, &current, f0, DensitySource::Current)?;
    let stats = timing_statistics(&tf)?;
    Ok(ToaDistribution { detector_x: x_d, tf, current, stats, captured })
}

pub fn toa_distribution_auto(spec: &ParticleSpec, x_d: f64) -> Result<ToaDistribution> {
    toa_distribution(spec, x_d, &toa_window(spec, x_d, TOA_GRID_POINTS)?)
}

/// Arrival-time spread against the three energy bounds.
///
/// The first audit is dimensionless, `Delta T_x Delta H / hbar >= F_0(x_d) / (6 sqrt 3)`.
/// The far-field and wide-packet audits compare durations scaled by 1e6, i.e.
/// microseconds for SI specs. The wide-packet audit is only emitted for
/// `sigma >= sigma_c`.
pub fn toa_bounds(spec: &ParticleSpec, x_d: f64) -> Result<Vec<BoundAudit>> {
    let toa = toa_distribution_auto(spec, x_d)?;
    let dh = energy_spread(spec).total;
    let c = time_energy_constant();
    let dt = toa.stddev();
    let mut audits = vec![
        BoundAudit::new(BoundId::ToaEnergy, dt * dh / spec.hbar, c * toa.delta_theta()),
        BoundAudit::new(BoundId::FarFieldToa, dt * MICROSECONDS, c * spec.hbar / dh * MICROSECONDS),
    ];
    if spec.sigma >= sigma_c(spec) {
        let rhs = SQRT_2 * c * toa.delta_theta() * spec.hbar / (2.0 * spec.mass * spec.g * spec.sigma);
        audits.push(BoundAudit::new(BoundId::WidePacketToa, dt * MICROSECONDS, rhs * MICROSECONDS));
    }
    Ok(audits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Species {
    Antihydrogen,
    K39,
    Rb87,
    Cs133,
}

impl Species {
    pub const ALL: [Species; 4] = [Species::Antihydrogen, Species::K39, Species::Rb87, Species::Cs133];

    pub fn name(self) -> &'static str {
        match self {
            Species::Antihydrogen => "antihydrogen",
            Species::K39 => "K-39",
            Species::Rb87 => "Rb-87",
            Species::Cs133 => "Cs-133",
        }
    }

    /// Mass in kg.
    pub fn mass(self) -> f64 {
        match self {
            Species::Antihydrogen => 1.6735e-27,
            Species::K39 => 6.4703e-26,
            Species::Rb87 => 1.44316e-25,
            Species::Cs133 => 2.20695e-25,
        }
    }

    pub fn spec(self, sigma: f64) -> Result<ParticleSpec> {
        ParticleSpec::new(self.mass(), sigma)
    }
}

/// Critical width and far-field timing resolution of one species.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeciesRow {
    pub name: String,
    pub mass: f64,
    /// m
    pub sigma_c: f64,
    /// `hbar / (6 sqrt 3 Delta H)` at `sigma = 1 um`, in s.
    pub dt_min: f64,
}

pub fn species_row(species: Species) -> SpeciesRow {
    let spec = ParticleSpec { mass: species.mass(), g: super::G_STANDARD, sigma: TABLE_SIGMA, hbar: super::HBAR_SI };
    SpeciesRow {
        name: species.name().to_string(),
        mass: spec.mass,
        sigma_c: sigma_c(&spec),
        dt_min: time_energy_constant() * spec.hbar / energy_spread(&spec).total,
    }
}

pub fn table1() -> Vec<SpeciesRow> {
    Species::ALL.iter().map(|&s| species_row(s)).collect()
}
