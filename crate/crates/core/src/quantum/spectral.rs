use nalgebra::{DMatrix, SymmetricEigen};

use super::{Hamiltonian, C64};
use crate::error::{Error, Result};

const UNITARITY_TOL: f64 = 1e-10;
const RECONSTRUCTION_TOL: f64 = 1e-10;

/// Eigen-decomposition `H = U diag(lambda) U†` with ascending eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<C64>,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are eigenvectors, ordered like [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    /// `lambda_max - lambda_min`.
    pub fn spread(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1] - self.eigenvalues[0]
    }

    pub fn reconstruct(&self) -> DMatrix<C64> {
        let d = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for j in 0..d {
            let lambda = self.eigenvalues[j];
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= lambda);
        }
        scaled * self.eigenvectors.adjoint()
    }
}

/// Diagonalizes a Hamiltonian and verifies unitarity and reconstruction.
pub fn spectral_decompose(h: &Hamiltonian) -> Result<SpectralDecomposition> {
    let m = h.op().matrix();
    let d = m.nrows();
    let eig = SymmetricEigen::new(m.clone());

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);

    let decomposition = SpectralDecomposition { eigenvalues, eigenvectors };

    let gram = decomposition.eigenvectors.adjoint() * &decomposition.eigenvectors;
    let unitarity = (gram - DMatrix::<C64>::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if unitarity > UNITARITY_TOL {
        return Err(Error::Numerical(format!("eigenvector matrix not unitary: residual {unitarity:.3e}")));
    }
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let residual = (decomposition.reconstruct() - m).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if residual > RECONSTRUCTION_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!("spectral reconstruction residual {residual:.3e} exceeds tolerance")));
    }
    Ok(decomposition)
}
