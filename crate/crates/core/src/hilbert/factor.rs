//! Orthonormalisation of a Hermitian Gram matrix.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Condition estimate above which the triangular factor is abandoned.
pub const MAX_CONDITION: f64 = 1e12;
/// Eigenvalues below this fraction of the largest are discarded.
pub const DISCARD_RATIO: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorMethod {
    Diagonal,
    Cholesky,
    Eigen,
}

impl FactorMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            FactorMethod::Diagonal => "diagonal",
            FactorMethod::Cholesky => "cholesky",
            FactorMethod::Eigen => "eigen",
        }
    }
}

/// Whitening map `W` with `W (D G D) W^H = I` on the retained modes.
///
/// Orthonormal sections are `psi = W D e` where `e` are the raw basis
/// values and `D` the prescale.
#[derive(Debug, Clone)]
pub struct Factorization {
    pub method: FactorMethod,
    pub whitening: DMatrix<Complex64>,
    pub prescale: Vec<f64>,
    pub condition: f64,
    pub discarded: usize,
}

impl Factorization {
    pub fn retained(&self) -> usize {
        self.whitening.nrows()
    }
}

fn hermitian_part(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

/// Factorises `D G D`. Falls back from Cholesky to an eigendecomposition
/// when the factorisation fails or the condition estimate exceeds
/// [`MAX_CONDITION`].
pub fn orthonormalize(gram: &DMatrix<Complex64>, prescale: &[f64]) -> Result<Factorization> {
    let n = gram.nrows();
    if gram.ncols() != n || prescale.len() != n {
        return Err(Error::InvalidArgument(format!(
            "Gram is {}x{}, prescale has {} entries",
            n,
            gram.ncols(),
            prescale.len()
        )));
    }
    if let Some(i) = prescale.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
        return Err(Error::InvalidArgument(format!("prescale entry {i} is not positive")));
    }
    if n == 0 {
        return Ok(Factorization {
            method: FactorMethod::Cholesky,
            whitening: DMatrix::zeros(0, 0),
            prescale: vec![],
            condition: 1.0,
            discarded: 0,
        });
    }
    let asym = (gram - gram.adjoint()).norm();
    let scale = gram.norm().max(f64::MIN_POSITIVE);
    if asym > 1e-12 * scale {
        return Err(Error::InvalidArgument(format!(
            "Gram matrix is not Hermitian (relative asymmetry {:e})",
            asym / scale
        )));
    }
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        prescale.iter().map(|&x| Complex64::new(x, 0.0)),
    ));
    let scaled = hermitian_part(&(&d * gram * &d));

    let eig = SymmetricEigen::new(scaled.clone());
    let lmax = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lmax > 0.0) {
        return Err(Error::GramNotPositiveDefinite(format!(
            "largest eigenvalue {lmax:e}"
        )));
    }
    if lmin < -1e-8 * lmax {
        return Err(Error::GramNotPositiveDefinite(format!(
            "eigenvalue {lmin:e} against largest {lmax:e}"
        )));
    }
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };

    if condition <= MAX_CONDITION {
        if let Some(chol) = Cholesky::new(scaled.clone()) {
            let l = chol.l();
            if l.diagonal().iter().all(|p| p.re > 0.0) {
                let eye = DMatrix::<Complex64>::identity(n, n);
                if let Some(w) = l.solve_lower_triangular(&eye) {
                    return Ok(Factorization {
                        method: FactorMethod::Cholesky,
                        whitening: w,
                        prescale: prescale.to_vec(),
                        condition,
                        discarded: 0,
                    });
                }
            }
        }
    }

    let keep: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > DISCARD_RATIO * lmax)
        .collect();
    let mut w = DMatrix::<Complex64>::zeros(keep.len(), n);
    for (row, &i) in keep.iter().enumerate() {
        let lam = eig.eigenvalues[i];
        if !(lam > 0.0) {
            return Err(Error::GramNotPositiveDefinite(format!(
                "retained pivot {lam:e}"
            )));
        }
        let s = 1.0 / lam.sqrt();
        for j in 0..n {
            w[(row, j)] = eig.eigenvectors[(j, i)].conj() * s;
        }
    }
    Ok(Factorization {
        method: FactorMethod::Eigen,
        whitening: w,
        prescale: prescale.to_vec(),
        condition,
        discarded: n - keep.len(),
    })
}
