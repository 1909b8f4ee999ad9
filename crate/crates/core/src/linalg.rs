//! Hermitian eigendecomposition and the unitary flows built on it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::Operator;

/// Spectral decomposition `H = V diag(values) V†` with ascending eigenvalues.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    values: Vec<f64>,
    vectors: DMatrix<C64>,
}

impl HermitianEigen {
    pub fn new(op: &Operator) -> Result<Self> {
        if !op.is_hermitian() {
            return Err(Error::NotHermitian {
                deviation: op.hermitian_deviation(),
            });
        }
        let m = op.matrix();
        let n = m.nrows();

        let (values, vectors) = if is_diagonal(m) {
            let values: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
            (values, DMatrix::identity(n, n))
        } else {
            let eig = SymmetricEigen::new(m.clone());
            (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
        };

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let sorted_values = order.iter().map(|&i| values[i]).collect();
        let sorted_vectors = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
        Ok(Self {
            values: sorted_values,
            vectors: sorted_vectors,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column `k` is the eigenvector for `values()[k]`.
    pub fn vectors(&self) -> &DMatrix<C64> {
        &self.vectors
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `exp(-i t H)` as a dense matrix.
    pub fn exp_matrix(&self, t: f64) -> DMatrix<C64> {
        let n = self.dim();
        if t == 0.0 {
            return DMatrix::identity(n, n);
        }
        let phases = self.phases(t);
        let mut scaled = self.vectors.clone();
        for (c, ph) in phases.iter().enumerate() {
            for r in 0..n {
                scaled[(r, c)] *= ph;
            }
        }
        scaled * self.vectors.adjoint()
    }

    /// `exp(-i t H) v` without forming the exponential.
    pub fn exp_apply(&self, t: f64, v: &DVector<C64>) -> DVector<C64> {
        if t == 0.0 {
            return v.clone();
        }
        let mut coeffs = self.vectors.ad_mul(v);
        for (c, ph) in coeffs.iter_mut().zip(self.phases(t)) {
            *c *= ph;
        }
        &self.vectors * coeffs
    }

    fn phases(&self, t: f64) -> Vec<C64> {
        self.values
            .iter()
            .map(|&lambda| C64::from_polar(1.0, -t * lambda))
            .collect()
    }
}

fn is_diagonal(m: &DMatrix<C64>) -> bool {
    let n = m.nrows();
    (0..n).all(|c| (0..n).all(|r| r == c || m[(r, c)] == C64::new(0.0, 0.0)))
}
