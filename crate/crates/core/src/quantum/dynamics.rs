use nalgebra::DMatrix;

use super::{
    require_same_dim, scaled_tol, spectral_decompose, DensityMatrix, Hamiltonian, Operator, Projector,
    SpectralDecomposition, C64, IMAGINARY_TOL,
};
use crate::error::{Error, Result};

/// Exact propagator `U_t = exp(-iHt/hbar)` built from the spectral decomposition.
#[derive(Debug, Clone)]
pub struct Propagator {
    hbar: f64,
    spectrum: SpectralDecomposition,
}

impl Propagator {
    pub fn new(h: &Hamiltonian) -> Result<Self> {
        Ok(Self { hbar: h.hbar(), spectrum: spectral_decompose(h)? })
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    pub fn unitary(&self, t: f64) -> DMatrix<C64> {
        let v = self.spectrum.eigenvectors();
        let mut phased = v.clone();
        for (j, &lambda) in self.spectrum.eigenvalues().iter().enumerate() {
            let phase = C64::from_polar(1.0, -lambda * t / self.hbar);
            phased.column_mut(j).iter_mut().for_each(|z| *z *= phase);
        }
        phased * v.adjoint()
    }

    pub fn evolve(&self, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
        require_same_dim(self.spectrum.eigenvalues().len(), rho0.dim())?;
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::Domain(format!("evolution time must be finite and nonnegative, got {t}")));
        }
        if t == 0.0 {
            return Ok(rho0.clone());
        }
        let u = self.unitary(t);
        Ok(DensityMatrix::from_evolved(&u * rho0.matrix() * u.adjoint()))
    }
}

/// `rho_t = U_t rho0 U_t†`.
pub fn evolve(h: &Hamiltonian, rho0: &DensityMatrix, t: f64) -> Result<DensityMatrix> {
    Propagator::new(h)?.evolve(rho0, t)
}

fn real_trace(z: C64, scale: f64, what: &str) -> Result<f64> {
    if z.im.abs() > scaled_tol(IMAGINARY_TOL, scale) {
        return Err(Error::Numerical(format!("{what} has imaginary part {:.3e}", z.im)));
    }
    Ok(z.re)
}

/// `Tr(rho A)` for Hermitian `A`.
pub fn expectation(rho: &DensityMatrix, a: &Operator) -> Result<f64> {
    require_same_dim(rho.dim(), a.dim())?;
    a.require_hermitian("observable")?;
    real_trace((rho.matrix() * a.matrix()).trace(), a.max_abs(), "expectation value")
}

/// `<A^2> - <A>^2`, evaluated as `Tr(rho (A - <A>)^2)` to avoid cancellation.
pub fn variance(rho: &DensityMatrix, a: &Operator) -> Result<f64> {
    let mean = expectation(rho, a)?;
    let d = a.dim();
    let centered = a.matrix() - DMatrix::<C64>::identity(d, d).scale(mean);
    let scale = a.max_abs();
    let var = real_trace((rho.matrix() * &centered * &centered).trace(), scale * scale, "variance")?;
    if var < 0.0 {
        if var < -scaled_tol(1e-12, scale * scale) {
            return Err(Error::Numerical(format!("negative variance {var:.3e}")));
        }
        return Ok(0.0);
    }
    Ok(var)
}

/// Standard deviation `Delta A = sqrt(variance)`.
pub fn uncertainty(rho: &DensityMatrix, a: &Operator) -> Result<f64> {
    variance(rho, a).map(f64::sqrt)
}

/// Population flow into the subspace of `m`: `-(i/hbar) Tr([H, rho] M)`.
pub fn flow_rate(h: &Hamiltonian, rho_t: &DensityMatrix, m: &Projector) -> Result<f64> {
    require_same_dim(h.dim(), rho_t.dim())?;
    require_same_dim(h.dim(), m.dim())?;
    let hm = h.op().matrix();
    let rho = rho_t.matrix();
    let commutator = hm * rho - rho * hm;
    let z = (commutator * m.matrix()).trace() * C64::new(0.0, -1.0 / h.hbar());
    real_trace(z, h.op().max_abs() / h.hbar(), "flow rate")
}

/// System, state and detector rotated into the Hamiltonian eigenbasis.
///
/// With `rho~ = V† rho0 V` and `M~ = V† M V`, the detection probability is
/// `p(t) = Re sum_ij rho~_ij M~_ji exp(-i w_ij t)` with `w_ij = (l_i - l_j)/hbar`,
/// and the flow rate is its exact time derivative. Each evaluation costs
/// `O(d^2)` instead of a full propagation.
#[derive(Debug, Clone)]
pub struct EigenFrame {
    frequencies: Vec<f64>,
    weights: Vec<C64>,
    dim: usize,
}

impl EigenFrame {
    pub fn new(h: &Hamiltonian, rho0: &DensityMatrix, m: &Projector) -> Result<Self> {
        Self::from_propagator(&Propagator::new(h)?, rho0, m)
    }

    pub fn from_propagator(prop: &Propagator, rho0: &DensityMatrix, m: &Projector) -> Result<Self> {
        let d = prop.spectrum.eigenvalues().len();
        require_same_dim(d, rho0.dim())?;
        require_same_dim(d, m.dim())?;
        let v = prop.spectrum.eigenvectors();
        let rho = v.adjoint() * rho0.matrix() * v;
        let det = v.adjoint() * m.matrix() * v;
        let lambda = prop.spectrum.eigenvalues();
        let mut frequencies = Vec::with_capacity(d * d);
        let mut weights = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                frequencies.push((lambda[i] - lambda[j]) / prop.hbar);
                weights.push(rho[(i, j)] * det[(j, i)]);
            }
        }
        Ok(Self { frequencies, weights, dim: d })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `(p(t), dp/dt)`.
    pub fn probability_and_rate(&self, t: f64) -> (f64, f64) {
        let mut p = 0.0;
        let mut r = 0.0;
        for (&w, &c) in self.frequencies.iter().zip(&self.weights) {
            let z = c * C64::from_polar(1.0, -w * t);
            p += z.re;
            // d/dt of z is -i w z, whose real part is w Im(z)
            r += w * z.im;
        }
        (p, r)
    }

    pub fn probability(&self, t: f64) -> f64 {
        self.probability_and_rate(t).0
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.probability_and_rate(t).1
    }
}
