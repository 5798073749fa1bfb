use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

use super::{G_STANDARD, HBAR_SI};
use crate::error::{Error, Result};

fn default_g() -> f64 {
    G_STANDARD
}

fn default_hbar() -> f64 {
    HBAR_SI
}

/// Mass, gravitational acceleration, initial position spread and the value of
/// `hbar` in the same unit system (SI unless overridden).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSpec {
    pub mass: f64,
    #[serde(default = "default_g")]
    pub g: f64,
    pub sigma: f64,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
}

impl ParticleSpec {
    /// SI spec with standard gravity.
    pub fn new(mass: f64, sigma: f64) -> Result<Self> {
        Self::with_constants(mass, G_STANDARD, sigma, HBAR_SI)
    }

    pub fn with_constants(mass: f64, g: f64, sigma: f64, hbar: f64) -> Result<Self> {
        let s = Self { mass, g, sigma, hbar };
        s.validate()?;
        Ok(s)
    }

    /// `hbar = 1, m = 1/2, g = 2`, for which the natural length and time units are both 1.
    pub fn nondimensional(sigma: f64) -> Result<Self> {
        Self::with_constants(0.5, 2.0, sigma, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mass", self.mass), ("g", self.g), ("sigma", self.sigma), ("hbar", self.hbar)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::with_constants(self.mass, self.g, sigma, self.hbar)
    }

    /// `(hbar^2 / (2 m^2 g))^(1/3)`.
    pub fn length_unit(&self) -> f64 {
        (self.hbar * self.hbar / (2.0 * self.mass * self.mass * self.g)).cbrt()
    }

    /// `(2 hbar / (m g^2))^(1/3)`.
    pub fn time_unit(&self) -> f64 {
        (2.0 * self.hbar / (self.mass * self.g * self.g)).cbrt()
    }
}

/// Closed-form density and current of the falling packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticPacket {
    pub spec: ParticleSpec,
}

impl AnalyticPacket {
    pub fn new(spec: ParticleSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn center(&self, t: f64) -> f64 {
        0.5 * self.spec.g * t * t
    }

    /// Position spread `sigma_t`.
    pub fn width(&self, t: f64) -> f64 {
        let s = &self.spec;
        let a = s.hbar * t / (2.0 * s.mass * s.sigma * s.sigma);
        s.sigma * (1.0 + a * a).sqrt()
    }

    pub fn density(&self, x: f64, t: f64) -> f64 {
        let w = self.width(t);
        let z = (x - self.center(t)) / w;
        (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * w)
    }

    /// Local velocity field `j / rho`.
    pub fn velocity(&self, x: f64, t: f64) -> f64 {
        let s = &self.spec;
        let w = self.width(t);
        let c = s.hbar * s.hbar * t / (4.0 * s.mass * s.mass * s.sigma * s.sigma * w * w);
        s.g * t + c * (x - self.center(t))
    }

    pub fn current(&self, x: f64, t: f64) -> f64 {
        self.density(x, t) * self.velocity(x, t)
    }

    /// Probability `F_t(x)` of finding the particle in `(-inf, x]`.
    pub fn cumulative(&self, x: f64, t: f64) -> f64 {
        let z = (x - self.center(t)) / (self.width(t) * SQRT_2);
        0.5 * libm::erfc(-z)
    }

    /// `1 - F_t(x)`, accurate where `F_t(x)` is close to one.
    pub fn upper_tail(&self, x: f64, t: f64) -> f64 {
        let z = (x - self.center(t)) / (self.width(t) * SQRT_2);
        0.5 * libm::erfc(z)
    }
}

/// `(rho(x, t), j(x, t))`.
pub fn analytic_observables(spec: &ParticleSpec, x: f64, t: f64) -> Result<(f64, f64)> {
    spec.validate()?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Domain(format!("time must be nonnegative and finite, got {t}")));
    }
    if !x.is_finite() {
        return Err(Error::Domain(format!("position must be finite, got {x}")));
    }
    let p = AnalyticPacket { spec: *spec };
    Ok((p.density(x, t), p.current(x, t)))
}

/// Energy standard deviation of the initial packet with its two independent parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergySpread {
    /// `hbar^2 / (4 sqrt 2 m sigma^2)`.
    pub kinetic: f64,
    /// `m g sigma`.
    pub potential: f64,
    pub total: f64,
}

pub fn energy_spread(spec: &ParticleSpec) -> EnergySpread {
    let kinetic = spec.hbar * spec.hbar / (4.0 * SQRT_2 * spec.mass * spec.sigma * spec.sigma);
    let potential = spec.mass * spec.g * spec.sigma;
    EnergySpread { kinetic, potential, total: kinetic.hypot(potential) }
}

/// Width at which kinetic and potential spreads are equal.
pub fn sigma_c(spec: &ParticleSpec) -> f64 {
    (spec.hbar * spec.hbar / (4.0 * SQRT_2 * spec.mass * spec.mass * spec.g)).cbrt()
}
