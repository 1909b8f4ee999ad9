//! Truncated Fock space: configuration, kets, dense operators, ladder and
//! canonical operators, coherent states, moments and unitary evolution.
//!
//! Units are ħ = 1 with unit mass and unit frequency, so
//! `a = (Q + iP)/√2` and `H0 = N + 1/2`.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::HermitianEigen;

/// Entry-wise tolerance used to classify an operator as (anti-)Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Tolerance on `| ‖ψ‖² − 1 |` for a ket to count as normalized.
pub const NORM_TOL: f64 = 1e-10;

/// Default acceptable neglected norm for coherent-state truncation.
pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-12;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Size of the truncated meter space and the tolerances attached to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FockConfig {
    /// Number of Fock levels, `|0⟩ .. |D−1⟩`.
    pub dimension: usize,
    /// Acceptable neglected norm.
    pub truncation_tol: f64,
    /// Levels at the top of the space excluded from identity checks.
    pub interior_buffer: usize,
}

impl FockConfig {
    pub fn new(dimension: usize, truncation_tol: f64, interior_buffer: usize) -> Result<Self> {
        let cfg = Self {
            dimension,
            truncation_tol,
            interior_buffer,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Smallest configuration that holds coherent states up to `|z| = z_max`.
    ///
    /// The tail-safe size `max(32, ⌈|z|² + 8|z| + 10⌉)` is extended by the
    /// buffer `⌈4|z| + 8⌉`, so the interior block alone is tail-safe.
    pub fn auto(z_max: f64, truncation_tol: f64) -> Result<Self> {
        if !z_max.is_finite() || z_max < 0.0 {
            return Err(Error::InvalidConfig(format!("z_max must be finite and >= 0, got {z_max}")));
        }
        let tail_safe = 32usize.max((z_max * z_max + 8.0 * z_max + 10.0).ceil() as usize);
        let buffer = (4.0 * z_max + 8.0).ceil() as usize;
        Self::new(tail_safe + buffer, truncation_tol, buffer)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension < 2 {
            return Err(Error::InvalidConfig(format!(
                "dimension must be >= 2, got {}",
                self.dimension
            )));
        }
        if self.interior_buffer >= self.dimension {
            return Err(Error::InvalidConfig(format!(
                "interior buffer {} must be smaller than dimension {}",
                self.interior_buffer, self.dimension
            )));
        }
        if !(self.truncation_tol > 0.0 && self.truncation_tol.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "truncation_tol must be positive, got {}",
                self.truncation_tol
            )));
        }
        Ok(())
    }

    /// Number of levels in the interior block, `D − B`.
    pub fn interior(&self) -> usize {
        self.dimension - self.interior_buffer
    }
}

/// Which basis a ket's amplitudes refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Fock,
    System,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Unit,
    Unnormalized,
}

/// Complex amplitude vector in a fixed basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    amplitudes: DVector<C64>,
    basis: Basis,
    normalization: Normalization,
}

impl Ket {
    /// Builds a ket, tagging it as unit-norm when `‖ψ‖² = 1` within [`NORM_TOL`].
    pub fn new(amplitudes: DVector<C64>, basis: Basis) -> Self {
        let normalization = if (amplitudes.norm_squared() - 1.0).abs() < NORM_TOL {
            Normalization::Unit
        } else {
            Normalization::Unnormalized
        };
        Self {
            amplitudes,
            basis,
            normalization,
        }
    }

    /// A ket explicitly tagged unnormalized, whatever its norm happens to be.
    pub fn unnormalized(amplitudes: DVector<C64>, basis: Basis) -> Self {
        Self {
            amplitudes,
            basis,
            normalization: Normalization::Unnormalized,
        }
    }

    pub fn from_vec(amplitudes: Vec<C64>, basis: Basis) -> Self {
        Self::new(DVector::from_vec(amplitudes), basis)
    }

    /// `|n⟩` in a space of dimension `dim`.
    pub fn basis_state(n: usize, dim: usize, basis: Basis) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidInput(format!("level {n} outside dimension {dim}")));
        }
        let mut v = DVector::zeros(dim);
        v[n] = ONE;
        Ok(Self::new(v, basis))
    }

    /// Number state `|n⟩` of the meter.
    pub fn fock(n: usize, cfg: &FockConfig) -> Result<Self> {
        Self::basis_state(n, cfg.dimension, Basis::Fock)
    }

    pub fn vacuum(cfg: &FockConfig) -> Self {
        Self::basis_state(0, cfg.dimension, Basis::Fock).expect("dimension >= 2")
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.norm_squared()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Ket) -> Result<C64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn normalized(&self) -> Result<Ket> {
        let n2 = self.norm_sqr();
        if n2.is_nan() || n2 <= 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            amplitudes: self.amplitudes.unscale(n2.sqrt()),
            basis: self.basis,
            normalization: Normalization::Unit,
        })
    }

    /// Probability weight in levels `from..dim`, relative to the ket's norm.
    pub fn tail_population(&self, from: usize) -> f64 {
        let total = self.norm_sqr();
        if total == 0.0 {
            return 0.0;
        }
        let top: f64 = self.amplitudes.iter().skip(from).map(|c| c.norm_sqr()).sum();
        top / total
    }
}

/// Hermiticity classification of an [`Operator`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hermiticity {
    Hermitian,
    AntiHermitian,
    General,
}

/// Dense complex square matrix acting on a meter or system space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    matrix: DMatrix<C64>,
    hermiticity: Hermiticity,
}

impl Operator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || matrix.nrows() == 0 {
            return Err(Error::InvalidInput(format!(
                "operator must be a non-empty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self::classify(matrix))
    }

    fn classify(matrix: DMatrix<C64>) -> Self {
        let herm = max_deviation(&matrix, 1.0);
        let hermiticity = if herm < HERMITIAN_TOL {
            Hermiticity::Hermitian
        } else if max_deviation(&matrix, -1.0) < HERMITIAN_TOL {
            Hermiticity::AntiHermitian
        } else {
            Hermiticity::General
        };
        Self { matrix, hermiticity }
    }

    pub fn identity(dim: usize) -> Self {
        Self::classify(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: impl IntoIterator<Item = C64>) -> Result<Self> {
        let v: Vec<C64> = diag.into_iter().collect();
        Self::new(DMatrix::from_diagonal(&DVector::from_vec(v)))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn hermiticity(&self) -> Hermiticity {
        self.hermiticity
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity == Hermiticity::Hermitian
    }

    /// `max |M − M†|` over all entries.
    pub fn hermitian_deviation(&self) -> f64 {
        max_deviation(&self.matrix, 1.0)
    }

    pub fn adjoint(&self) -> Self {
        Self::classify(self.matrix.adjoint())
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self::classify(&self.matrix * c)
    }

    pub fn apply(&self, psi: &Ket) -> Result<Ket> {
        check_dim(self.dim(), psi.dim())?;
        Ok(Ket::unnormalized(&self.matrix * psi.amplitudes(), psi.basis()))
    }

    /// `AB − BA`.
    pub fn commutator(&self, other: &Operator) -> Self {
        Self::classify(&self.matrix * &other.matrix - &other.matrix * &self.matrix)
    }

    /// `AB + BA`.
    pub fn anticommutator(&self, other: &Operator) -> Self {
        Self::classify(&self.matrix * &other.matrix + &other.matrix * &self.matrix)
    }

    /// Splits `B = C + iD` into Hermitian `C = (B + B†)/2` and `D = (B − B†)/(2i)`.
    pub fn hermitian_parts(&self) -> (Operator, Operator) {
        let adj = self.matrix.adjoint();
        let c = (&self.matrix + &adj) * C64::new(0.5, 0.0);
        let d = (&self.matrix - &adj) * C64::new(0.0, -0.5);
        (Self::classify(c), Self::classify(d))
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        max_abs(&(&self.matrix - &other.matrix))
    }

    /// Largest entry magnitude with both indices below `n`.
    pub fn block_max_abs(&self, n: usize) -> f64 {
        let n = n.min(self.dim());
        max_abs(&self.matrix.view((0, 0), (n, n)).into_owned())
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.matrix)
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator::classify(&self.matrix + &rhs.matrix)
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator::classify(&self.matrix - &rhs.matrix)
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator::classify(&self.matrix * &rhs.matrix)
    }
}

fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// `max |M − sign·M†|`.
fn max_deviation(m: &DMatrix<C64>, sign: f64) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for r in 0..n {
        for c in r..n {
            let d = (m[(r, c)] - m[(c, r)].conj() * sign).norm();
            worst = worst.max(d);
        }
    }
    worst
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Annihilation and creation operators: `a|n⟩ = √n |n−1⟩`, `a† = (a)†`.
pub fn ladder_operators(cfg: &FockConfig) -> (Operator, Operator) {
    let d = cfg.dimension;
    let a = DMatrix::from_fn(d, d, |r, c| {
        if c == r + 1 {
            C64::new((c as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    });
    let a_dag = a.adjoint();
    (Operator::classify(a), Operator::classify(a_dag))
}

/// Position, momentum, number and oscillator Hamiltonian on the truncated space.
#[derive(Debug, Clone)]
pub struct Canonical {
    pub q: Operator,
    pub p: Operator,
    pub n: Operator,
    pub h0: Operator,
}

pub fn canonical_operators(cfg: &FockConfig) -> Canonical {
    let (a, a_dag) = ladder_operators(cfg);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let q = (a.matrix() + a_dag.matrix()) * C64::new(s, 0.0);
    let p = (a.matrix() - a_dag.matrix()) * C64::new(0.0, -s);
    let n = number_diagonal(cfg.dimension, 0.0);
    let h0 = number_diagonal(cfg.dimension, 0.5);
    Canonical {
        q: Operator::classify(q),
        p: Operator::classify(p),
        n,
        h0,
    }
}

fn number_diagonal(d: usize, offset: f64) -> Operator {
    Operator::classify(DMatrix::from_fn(d, d, |r, c| {
        if r == c {
            C64::new(r as f64 + offset, 0.0)
        } else {
            ZERO
        }
    }))
}

/// `Σ_{n ≥ dim} e^{−x} xⁿ / n!`, summed directly so tiny tails keep full precision.
pub fn poisson_tail(mean: f64, dim: usize) -> f64 {
    if mean <= 0.0 {
        return 0.0;
    }
    let ln_fact: f64 = (1..=dim).map(|k| (k as f64).ln()).sum();
    let mut term = (-mean + dim as f64 * mean.ln() - ln_fact).exp();
    let mut sum = 0.0;
    let mut n = dim;
    loop {
        sum += term;
        n += 1;
        term *= mean / n as f64;
        if (n as f64 > mean && term <= sum * 1e-18) || term == 0.0 {
            break;
        }
    }
    sum
}

/// Checks that a coherent state of amplitude `|z|` fits in `cfg`.
pub fn check_tail(z_abs: f64, cfg: &FockConfig) -> Result<()> {
    let tail = poisson_tail(z_abs * z_abs, cfg.dimension);
    if tail >= cfg.truncation_tol {
        return Err(Error::Truncation {
            z_abs,
            dimension: cfg.dimension,
            tail,
            tol: cfg.truncation_tol,
        });
    }
    Ok(())
}

/// Raw amplitudes `e^{−|z|²/2} zⁿ/√n!` for `n < dim`, without renormalization.
pub fn coherent_amplitudes(z: C64, dim: usize) -> DVector<C64> {
    let mut v = DVector::zeros(dim);
    let mut c = C64::new((-0.5 * z.norm_sqr()).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            c = c * z / (n as f64).sqrt();
        }
        v[n] = c;
    }
    v
}

/// Coherent state `|z⟩ = D[z]|0⟩`, renormalized after truncation.
pub fn coherent_ket(z: C64, cfg: &FockConfig) -> Result<Ket> {
    check_tail(z.norm(), cfg)?;
    let raw = coherent_amplitudes(z, cfg.dimension);
    let norm = raw.norm();
    Ok(Ket::new(raw.unscale(norm), Basis::Fock))
}

/// `⟨ψ|M|ψ⟩ / ⟨ψ|ψ⟩`; for `M = C + iD` the real and imaginary parts are `⟨C⟩` and `⟨D⟩`.
pub fn expectation(m: &Operator, psi: &Ket) -> Result<C64> {
    check_dim(m.dim(), psi.dim())?;
    let n2 = psi.norm_sqr();
    if n2.is_nan() || n2 <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let v = psi.amplitudes();
    Ok(v.dotc(&(m.matrix() * v)) / n2)
}

/// `⟨ψ|AB|ψ⟩ / ⟨ψ|ψ⟩` from two matrix-vector products.
pub fn product_expectation(a: &Operator, b: &Operator, psi: &Ket) -> Result<C64> {
    check_dim(a.dim(), b.dim())?;
    check_dim(a.dim(), psi.dim())?;
    let n2 = psi.norm_sqr();
    if n2.is_nan() || n2 <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let v = psi.amplitudes();
    Ok(a.matrix().ad_mul(v).dotc(&(b.matrix() * v)) / n2)
}

/// Quadratic dispersion `⟨M²⟩ − ⟨M⟩²`, clamped at zero.
pub fn variance(m: &Operator, psi: &Ket) -> Result<f64> {
    if !m.is_hermitian() {
        return Err(Error::NotHermitian {
            deviation: m.hermitian_deviation(),
        });
    }
    check_dim(m.dim(), psi.dim())?;
    let n2 = psi.norm_sqr();
    if n2.is_nan() || n2 <= 0.0 {
        return Err(Error::ZeroNorm);
    }
    let mv = m.matrix() * psi.amplitudes();
    let second = mv.norm_squared() / n2;
    let first = psi.amplitudes().dotc(&mv).re / n2;
    Ok((second - first * first).max(0.0))
}

/// `exp(−i s H)` via unitary diagonalization of Hermitian `H`.
pub fn evolve_unitary(h: &Operator, s: f64) -> Result<Operator> {
    let eig = HermitianEigen::new(h)?;
    Ok(Operator::classify(eig.exp_matrix(s)))
}
