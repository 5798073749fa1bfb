use serde::{Deserialize, Serialize};

use super::{TfDistribution, TimingStatistics};
use crate::error::{Error, Result};
use crate::quantum::UnitSystem;

/// Relative slack granted to every audit, see [`BoundAudit::new`].
pub const AUDIT_TOL: f64 = 1e-9;

/// `1 / (6 sqrt 3)`: the constant of the time-energy relation.
pub fn time_energy_constant() -> f64 {
    1.0 / (6.0 * 3f64.sqrt())
}

/// Chebyshev concentration factor `(k^2 - 1) / (2 k^3)`, maximal at `k = sqrt 3`.
pub fn chebyshev_gamma(k: f64) -> f64 {
    (k * k - 1.0) / (2.0 * k * k * k)
}

/// Which inequality an audit checks. Every audit reads `lhs >= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundId {
    /// `Delta T >= gamma(k) / pi_max`.
    ChebyshevSpread,
    /// `2 Delta H / (hbar delta_theta) >= pi(t)` at every grid point.
    UniformRate,
    /// `Delta T · Delta H >= hbar delta_theta / (6 sqrt 3)`.
    TimeEnergy,
    /// Arrival-time form, `Delta T_x Delta H / hbar >= F_0(x) / (6 sqrt 3)`.
    ToaEnergy,
    /// Far-field form, `Delta T_x >= hbar / (6 sqrt 3 Delta H)`, in microseconds.
    FarFieldToa,
    /// Wide-packet form, valid for `sigma >= sigma_c`, in microseconds.
    WidePacketToa,
}

impl BoundId {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundId::ChebyshevSpread => "chebyshev-spread",
            BoundId::UniformRate => "uniform-rate",
            BoundId::TimeEnergy => "time-energy",
            BoundId::ToaEnergy => "toa-energy",
            BoundId::FarFieldToa => "far-field-toa",
            BoundId::WidePacketToa => "wide-packet-toa",
        }
    }
}

impl std::fmt::Display for BoundId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Both sides of one inequality and whether it held.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundAudit {
    pub bound: BoundId,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub passed: bool,
}

impl BoundAudit {
    /// Passes when `lhs - rhs >= -AUDIT_TOL · max(|lhs|, |rhs|, 1)`.
    pub fn new(bound: BoundId, lhs: f64, rhs: f64) -> Self {
        let margin = lhs - rhs;
        let slack = AUDIT_TOL * lhs.abs().max(rhs.abs()).max(1.0);
        Self { bound, lhs, rhs, margin, passed: margin >= -slack }
    }

    /// `lhs / rhs`; infinite when the right-hand side vanishes.
    pub fn ratio(&self) -> f64 {
        if self.rhs == 0.0 {
            f64::INFINITY
        } else {
            self.lhs / self.rhs
        }
    }
}

/// Spread lower bound from Chebyshev's inequality; `k` defaults to `sqrt 3`.
pub fn audit_chebyshev(stats: &TimingStatistics, k: Option<f64>) -> Result<BoundAudit> {
    let k = k.unwrap_or_else(|| 3f64.sqrt());
    if !(k >= 1.0) {
        return Err(Error::Domain(format!("Chebyshev parameter k must be >= 1, got {k}")));
    }
    if !(stats.pi_max > 0.0) {
        return Err(Error::Domain("peak density must be positive".into()));
    }
    Ok(BoundAudit::new(BoundId::ChebyshevSpread, stats.stddev, chebyshev_gamma(k) / stats.pi_max))
}

/// Uniform-in-time cap on the density, checked against the grid maximum.
pub fn audit_uniform_bound(tf: &TfDistribution, delta_h: f64, units: &UnitSystem) -> Result<BoundAudit> {
    if !(delta_h >= 0.0) {
        return Err(Error::Domain(format!("energy spread must be nonnegative, got {delta_h}")));
    }
    if tf.delta_theta == 0.0 {
        return Err(Error::UndefinedBound);
    }
    let cap = 2.0 * delta_h / (units.hbar * tf.delta_theta);
    Ok(BoundAudit::new(BoundId::UniformRate, cap, tf.pi_max()))
}

/// Product of timing and energy spreads against `hbar delta_theta / (6 sqrt 3)`.
pub fn audit_time_energy(
    stats: &TimingStatistics,
    delta_h: f64,
    delta_theta: f64,
    units: &UnitSystem,
) -> Result<BoundAudit> {
    if !(delta_h >= 0.0) {
        return Err(Error::Domain(format!("energy spread must be nonnegative, got {delta_h}")));
    }
    if !(0.0..=1.0 + 1e-10).contains(&delta_theta) {
        return Err(Error::Domain(format!("delta_theta must lie in [0, 1], got {delta_theta}")));
    }
    Ok(BoundAudit::new(
        BoundId::TimeEnergy,
        stats.stddev * delta_h,
        units.hbar * time_energy_constant() * delta_theta,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rabi_stats() -> TimingStatistics {
        let var = PI * PI / 4.0 - 2.0;
        TimingStatistics { mean: PI / 2.0, second_moment: var + PI * PI / 4.0, stddev: var.sqrt(), pi_max: 0.5 }
    }

    #[test]
    fn gamma_constants() {
        assert!((chebyshev_gamma(3f64.sqrt()) - 1.0 / (3.0 * 3f64.sqrt())).abs() < 1e-15);
        assert!((chebyshev_gamma(3f64.sqrt()) - 0.19245).abs() < 1e-5);
        assert_eq!(chebyshev_gamma(1.0), 0.0);
        assert!((time_energy_constant() - 0.09623).abs() < 1e-5);
    }

    #[test]
    fn sqrt3_maximizes_gamma_on_scan() {
        let (best_k, _) = (0..=90_000)
            .map(|i| 1.0 + i as f64 * 1e-4)
            .map(|k| (k, chebyshev_gamma(k)))
            .fold((1.0, f64::MIN), |acc, (k, g)| if g > acc.1 { (k, g) } else { acc });
        assert!((best_k - 3f64.sqrt()).abs() < 1e-4);
    }

    #[test]
    fn chebyshev_on_rabi() {
        let a = audit_chebyshev(&rabi_stats(), None).unwrap();
        assert!((a.rhs - 0.3849).abs() < 1e-4);
        assert!((a.lhs - 0.68367).abs() < 1e-5);
        assert!(a.passed);
        let trivial = audit_chebyshev(&rabi_stats(), Some(1.0)).unwrap();
        assert_eq!(trivial.rhs, 0.0);
        assert!(trivial.passed);
        assert!(matches!(audit_chebyshev(&rabi_stats(), Some(0.5)), Err(Error::Domain(_))));
    }

    #[test]
    fn time_energy_on_rabi() {
        let a = audit_time_energy(&rabi_stats(), 0.5, 1.0, &UnitSystem::natural()).unwrap();
        assert!((a.lhs - 0.34183).abs() < 1e-5);
        assert!((a.rhs - 0.09623).abs() < 1e-5);
        assert!(a.passed);
        let zero = audit_time_energy(&rabi_stats(), 0.5, 0.0, &UnitSystem::natural()).unwrap();
        assert_eq!(zero.rhs, 0.0);
        assert!(zero.passed);
        assert!(audit_time_energy(&rabi_stats(), -1.0, 1.0, &UnitSystem::natural()).is_err());
    }

    #[test]
    fn tolerance_rule() {
        assert!(BoundAudit::new(BoundId::TimeEnergy, 1.0, 1.0 + 5e-10).passed);
        assert!(!BoundAudit::new(BoundId::TimeEnergy, 1.0, 1.0 + 2e-9).passed);
        assert!(BoundAudit::new(BoundId::TimeEnergy, 1e3, 1e3 * (1.0 + 5e-10)).passed);
    }
}
