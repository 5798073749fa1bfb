//! Finite-dimensional quantum objects with validated physical invariants.
//!
//! Every type here is immutable once constructed. Tolerances are fixed
//! constants so that repeated audits never drift against each other.

mod dynamics;
mod spectral;

pub use dynamics::{evolve, expectation, flow_rate, uncertainty, variance, EigenFrame, Propagator};
pub use spectral::{spectral_decompose, SpectralDecomposition};

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Entrywise tolerance for `A == A†`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `Tr(rho) == 1`.
pub const TRACE_TOL: f64 = 1e-12;
/// Smallest admissible density-matrix eigenvalue.
pub const MIN_EIGENVALUE: f64 = -1e-10;
/// Entrywise tolerance for `M^2 == M`.
pub const IDEMPOTENCY_TOL: f64 = 1e-10;
/// Largest imaginary residue accepted when a trace should be real.
pub const IMAGINARY_TOL: f64 = 1e-10;

/// Scales an absolute tolerance by the magnitude of the data it guards,
/// never going below the absolute value.
pub(crate) fn scaled_tol(base: f64, scale: f64) -> f64 {
    base * scale.max(1.0)
}

/// Value of the reduced Planck constant plus labels for the unit system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitSystem {
    pub hbar: f64,
    pub time_unit: String,
    pub energy_unit: String,
}

impl UnitSystem {
    pub fn new(hbar: f64, time_unit: impl Into<String>, energy_unit: impl Into<String>) -> Result<Self> {
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(Error::Validation(format!("hbar must be positive and finite, got {hbar}")));
        }
        Ok(Self { hbar, time_unit: time_unit.into(), energy_unit: energy_unit.into() })
    }

    /// hbar = 1, dimensionless time and energy.
    pub fn natural() -> Self {
        Self { hbar: 1.0, time_unit: "1".into(), energy_unit: "hbar/1".into() }
    }

    /// Rabi-frequency convention: times in microseconds, energies in hbar·rad/μs.
    pub fn rabi() -> Self {
        Self { hbar: 1.0, time_unit: "us".into(), energy_unit: "hbar*rad/us".into() }
    }

    pub fn si() -> Self {
        Self { hbar: crate::matterwave::HBAR_SI, time_unit: "s".into(), energy_unit: "J".into() }
    }
}

impl Default for UnitSystem {
    fn default() -> Self {
        Self::natural()
    }
}

/// A square complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(DMatrix<C64>);

impl Operator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.nrows() != matrix.ncols() {
            return Err(Error::Validation(format!(
                "operator must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if let Some((idx, z)) = matrix.iter().enumerate().find(|(_, z)| !(z.re.is_finite() && z.im.is_finite())) {
            let d = matrix.nrows();
            // nalgebra storage is column-major
            return Err(Error::Validation(format!(
                "non-finite entry {z} at row {}, column {}",
                idx % d,
                idx / d
            )));
        }
        Ok(Self(matrix))
    }

    /// Builds an operator from row-major nested rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let d = rows.len();
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::Validation(format!("row {i} has {} entries, expected {d}", row.len())));
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn from_real_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|&x| C64::new(x, 0.0)).collect()).collect();
        Self::from_rows(&rows)
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    /// `|i><i|` in dimension `dim`.
    pub fn basis_projector(dim: usize, i: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(i, i)] = C64::new(1.0, 0.0);
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    /// Row-major copy of the entries.
    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        (0..self.dim()).map(|i| self.0.row(i).iter().copied().collect()).collect()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |A - A†|` over entries.
    pub fn hermiticity_error(&self) -> f64 {
        let d = self.dim();
        let mut err = 0.0f64;
        for i in 0..d {
            for j in i..d {
                err = err.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        err
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_error() <= scaled_tol(HERMITIAN_TOL, self.max_abs())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    fn hermitized(&self) -> DMatrix<C64> {
        (&self.0 + self.0.adjoint()).scale(0.5)
    }

    pub(crate) fn require_hermitian(&self, what: &str) -> Result<()> {
        let err = self.hermiticity_error();
        if err > scaled_tol(HERMITIAN_TOL, self.max_abs()) {
            return Err(Error::Validation(format!("{what} is not Hermitian: max |A - A^dagger| = {err:.3e}")));
        }
        Ok(())
    }

    /// `H + c·I`.
    pub fn shifted(&self, c: f64) -> Self {
        let d = self.dim();
        Self(&self.0 + DMatrix::<C64>::identity(d, d).scale(c))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }
}

/// A Hermitian generator of unitary dynamics together with its unit system.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    op: Operator,
    units: UnitSystem,
}

impl Hamiltonian {
    pub fn new(op: Operator, units: UnitSystem) -> Result<Self> {
        if op.dim() < 2 {
            return Err(Error::Validation(format!("Hamiltonian dimension must be at least 2, got {}", op.dim())));
        }
        op.require_hermitian("Hamiltonian")?;
        Ok(Self { op: Operator(op.hermitized()), units })
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn units(&self) -> &UnitSystem {
        &self.units
    }

    pub fn hbar(&self) -> f64 {
        self.units.hbar
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// `H + c·I`; leaves every observable of the dynamics unchanged.
    pub fn shifted(&self, c: f64) -> Self {
        Self { op: self.op.shifted(c), units: self.units.clone() }
    }

    /// `s·H`; the dynamics run `s` times faster.
    pub fn scaled(&self, s: f64) -> Self {
        Self { op: self.op.scaled(s), units: self.units.clone() }
    }
}

/// A positive semidefinite, unit-trace Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        op.require_hermitian("density matrix")?;
        let tr = op.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Validation(format!("density matrix trace must be 1, got {tr}")));
        }
        let m = op.hermitized();
        let min_eig = m.clone().symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if min_eig < MIN_EIGENVALUE {
            return Err(Error::Validation(format!(
                "density matrix is not positive semidefinite: min eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(Self { op: Operator(m) })
    }

    /// `|psi><psi|` for the normalized version of `amplitudes`.
    pub fn pure(amplitudes: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(amplitudes);
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Validation("pure state amplitudes must be finite and not all zero".into()));
        }
        let v = v.unscale(norm);
        Ok(Self { op: Operator(&v * v.adjoint()) })
    }

    /// `|i><i|`.
    pub fn basis_state(dim: usize, i: usize) -> Result<Self> {
        if i >= dim {
            return Err(Error::Validation(format!("basis index {i} out of range for dimension {dim}")));
        }
        Ok(Self { op: Operator::basis_projector(dim, i) })
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { op: Operator(DMatrix::identity(dim, dim).unscale(dim as f64)) }
    }

    /// Convex combination `sum_k w_k |v_k><v_k|` of normalized kets; weights are renormalized.
    pub fn mixture(weights: &[f64], kets: &[Vec<C64>]) -> Result<Self> {
        if weights.is_empty() || weights.len() != kets.len() {
            return Err(Error::Validation("mixture needs one weight per ket".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Validation("mixture weights must be nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::Validation("mixture weights sum to zero".into()));
        }
        let dim = kets[0].len();
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for (w, ket) in weights.iter().zip(kets) {
            if ket.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: ket.len() });
            }
            m += Self::pure(ket)?.op.0.scale(w / total);
        }
        Self::new(Operator(m))
    }

    /// Skips validation; used for states produced by exact unitary evolution.
    pub(crate) fn from_evolved(m: DMatrix<C64>) -> Self {
        let m = (&m + m.adjoint()).scale(0.5);
        Self { op: Operator(m) }
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.op.0
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.op.0.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// An orthogonal projector onto a proper, nonzero subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    op: Operator,
    rank: usize,
}

impl Projector {
    pub fn new(op: Operator) -> Result<Self> {
        op.require_hermitian("projector")?;
        let m = op.hermitized();
        let sq = &m * &m;
        let idem = (&sq - &m).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if idem > IDEMPOTENCY_TOL {
            return Err(Error::Validation(format!("projector is not idempotent: max |M^2 - M| = {idem:.3e}")));
        }
        let d = m.nrows();
        let rank = m.trace().re.round();
        if rank < 1.0 || rank >= d as f64 {
            return Err(Error::Validation(format!("projector rank must satisfy 1 <= rank < {d}, got {rank}")));
        }
        Ok(Self { op: Operator(m), rank: rank as usize })
    }

    /// Projector onto the span of the listed computational-basis states.
    pub fn onto_basis(dim: usize, indices: &[usize]) -> Result<Self> {
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for &i in indices {
            if i >= dim {
                return Err(Error::Validation(format!("basis index {i} out of range for dimension {dim}")));
            }
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        Self::new(Operator(m))
    }

    /// Projector onto the span of `vectors`, orthonormalized internally.
    pub fn onto_span(vectors: &[Vec<C64>]) -> Result<Self> {
        let Some(first) = vectors.first() else {
            return Err(Error::Validation("projector span needs at least one vector".into()));
        };
        let dim = first.len();
        let mut basis: Vec<DVector<C64>> = Vec::with_capacity(vectors.len());
        for v in vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: v.len() });
            }
            let mut w = DVector::from_column_slice(v);
            // modified Gram-Schmidt, applied twice for stability
            for _ in 0..2 {
                for b in &basis {
                    let c = b.dotc(&w);
                    w -= b * c;
                }
            }
            let n = w.norm();
            if n < 1e-12 {
                return Err(Error::Validation("projector span vectors are linearly dependent".into()));
            }
            basis.push(w.unscale(n));
        }
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for b in &basis {
            m += b * b.adjoint();
        }
        Self::new(Operator(m))
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.op.0
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }
}

pub(crate) fn require_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
