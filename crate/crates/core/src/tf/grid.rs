use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible number of grid points.
pub const MIN_POINTS: usize = 11;

/// Uniform time grid `t_k = t0 + k·dt`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTimeGrid", into = "RawTimeGrid")]
pub struct TimeGrid {
    t0: f64,
    tf: f64,
    n: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTimeGrid {
    t0: f64,
    tf: f64,
    n: usize,
}

impl TryFrom<RawTimeGrid> for TimeGrid {
    type Error = Error;

    fn try_from(raw: RawTimeGrid) -> Result<Self> {
        TimeGrid::new(raw.t0, raw.tf, raw.n)
    }
}

impl From<TimeGrid> for RawTimeGrid {
    fn from(g: TimeGrid) -> Self {
        RawTimeGrid { t0: g.t0, tf: g.tf, n: g.n }
    }
}

impl TimeGrid {
    pub fn new(t0: f64, tf: f64, n: usize) -> Result<Self> {
        if !(t0.is_finite() && tf.is_finite()) || tf <= t0 {
            return Err(Error::Validation(format!("time grid needs finite tf > t0, got t0 = {t0}, tf = {tf}")));
        }
        if n < MIN_POINTS {
            return Err(Error::Validation(format!("time grid needs n >= {MIN_POINTS} points, got n = {n}")));
        }
        Ok(Self { t0, tf, n })
    }

    /// Grid starting at `t1` with spacing `dt` and `n` points.
    pub fn from_step(t1: f64, dt: f64, n: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Validation(format!("time step must be positive, got {dt}")));
        }
        Self::new(t1, t1 + dt * (n.max(1) - 1) as f64, n)
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn tf(&self) -> f64 {
        self.tf
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        (self.tf - self.t0) / (self.n - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k + 1 == self.n {
            self.tf
        } else {
            self.t0 + k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.time(k)).collect()
    }

    /// Midpoints `t_k + dt/2` of the `n - 1` intervals.
    pub fn midpoints(&self) -> Vec<f64> {
        let dt = self.dt();
        (0..self.n - 1).map(|k| self.t0 + (k as f64 + 0.5) * dt).collect()
    }

    /// Same number of points on `[t0 / s, tf / s]`.
    pub fn rescaled(&self, s: f64) -> Result<Self> {
        Self::new(self.t0 / s, self.tf / s, self.n)
    }

    /// Twice as many intervals on the same window.
    pub fn refined(&self) -> Self {
        Self { n: 2 * self.n - 1, ..*self }
    }
}
