//! Fixed-rule quadrature on uniform grids.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    /// Composite Simpson; needs an even number of intervals.
    Simpson,
    /// Composite trapezoid; used when the interval count is odd.
    Trapezoid,
}

impl QuadratureRule {
    /// Simpson whenever the point count allows it.
    pub fn for_points(n: usize) -> Self {
        if n >= 3 && (n - 1).is_multiple_of(2) {
            QuadratureRule::Simpson
        } else {
            QuadratureRule::Trapezoid
        }
    }

    /// Quadrature weights for `n` points spaced `h` apart. All weights are positive.
    pub fn weights(self, n: usize, h: f64) -> Vec<f64> {
        match self {
            QuadratureRule::Simpson => (0..n)
                .map(|k| {
                    let w = if k == 0 || k == n - 1 {
                        1.0
                    } else if k % 2 == 1 {
                        4.0
                    } else {
                        2.0
                    };
                    w * h / 3.0
                })
                .collect(),
            QuadratureRule::Trapezoid => (0..n)
                .map(|k| if k == 0 || k == n - 1 { 0.5 * h } else { h })
                .collect(),
        }
    }

    pub fn integrate(self, values: &[f64], h: f64) -> f64 {
        // Accumulate in the same order for every call so equal inputs give equal bits.
        self.weights(values.len(), h).iter().zip(values).map(|(w, v)| w * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_selection() {
        assert_eq!(QuadratureRule::for_points(11), QuadratureRule::Simpson);
        assert_eq!(QuadratureRule::for_points(12), QuadratureRule::Trapezoid);
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let n = 11;
        let h = 0.2;
        let v: Vec<f64> = (0..n).map(|k| (k as f64 * h).powi(3) - 2.0 * k as f64 * h).collect();
        let exact = 2f64.powi(4) / 4.0 - 4.0;
        assert!((QuadratureRule::Simpson.integrate(&v, h) - exact).abs() < 1e-13);
    }

    #[test]
    fn trapezoid_is_exact_for_lines() {
        let v: Vec<f64> = (0..12).map(|k| 3.0 + 0.5 * k as f64).collect();
        let exact = 3.0 * 11.0 + 0.25 * 121.0;
        assert!((QuadratureRule::Trapezoid.integrate(&v, 1.0) - exact).abs() < 1e-12);
    }
}
