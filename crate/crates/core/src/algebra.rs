//! Phase-plane transformations of the meter: the quadratic sl(2,ℝ)
//! generators, the fractional Fourier rotation, the displacement operator,
//! and residual checks of their commutation table.
//!
//! Generators:
//!
//! | kind | operator                     | flow                 |
//! |------|------------------------------|----------------------|
//! | `H0` | ½(Q² + P²) = N + ½           | rotation             |
//! | `G`  | ½(QP + PQ) = (i/2)(a†² − a²) | squeezing            |
//! | `K`  | ½(Q² − P²) = ½(a†² + a²)     | hyperbolic rotation  |
//!
//! With `X₁ ↦ −iK`, `X₂ ↦ −iH0`, `X₃ ↦ −iG` the commutators close as
//! `[H0,G] = 2iK`, `[H0,K] = −2iG`, `[G,K] = −2iH0`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{self, canonical_operators, check_dim, ladder_operators, FockConfig, Operator};

/// Default residual bound for the commutator table on the interior block.
pub const SL2_TOL: f64 = 1e-9;

/// Residual bound for the Fourier-operator checks.
pub const FOURIER_TOL: f64 = 1e-10;

/// Meter generator entering a coupling `ε Ô ⊗ R̂`.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorKind {
    Q,
    P,
    N,
    H0,
    G,
    K,
    Custom(Operator),
}

impl GeneratorKind {
    pub fn label(&self) -> &'static str {
        match self {
            GeneratorKind::Q => "Q",
            GeneratorKind::P => "P",
            GeneratorKind::N => "N",
            GeneratorKind::H0 => "H0",
            GeneratorKind::G => "G",
            GeneratorKind::K => "K",
            GeneratorKind::Custom(_) => "custom",
        }
    }
}

/// Hermitian matrix of the requested generator on the truncated space.
pub fn generator(kind: &GeneratorKind, cfg: &FockConfig) -> Result<Operator> {
    let can = canonical_operators(cfg);
    let half = C64::new(0.5, 0.0);
    Ok(match kind {
        GeneratorKind::Q => can.q,
        GeneratorKind::P => can.p,
        GeneratorKind::N => can.n,
        GeneratorKind::H0 => can.h0,
        GeneratorKind::G => can.q.anticommutator(&can.p).scaled(half),
        GeneratorKind::K => (&(&can.q * &can.q) - &(&can.p * &can.p)).scaled(half),
        GeneratorKind::Custom(op) => {
            check_dim(cfg.dimension, op.dim())?;
            if !op.is_hermitian() {
                return Err(Error::NonHermitianCustom {
                    deviation: op.hermitian_deviation(),
                });
            }
            op.clone()
        }
    })
}

/// Flow `exp(−i s R)` of a generator; squeezing for `G`, hyperbolic rotation for `K`.
pub fn generator_flow(kind: &GeneratorKind, s: f64, cfg: &FockConfig) -> Result<Operator> {
    fock::evolve_unitary(&generator(kind, cfg)?, s)
}

/// Fractional Fourier operator `F_θ = exp(+iθN)`; `θ = π/2` gives `F|n⟩ = iⁿ|n⟩`.
pub fn fractional_fourier(theta: f64, cfg: &FockConfig) -> Operator {
    Operator::from_diagonal((0..cfg.dimension).map(|n| C64::from_polar(1.0, theta * n as f64)))
        .expect("dimension >= 2")
}

/// Displacement `D[z] = exp(z a† − z̄ a)`.
pub fn displacement(z: C64, cfg: &FockConfig) -> Result<Operator> {
    fock::check_tail(z.norm(), cfg)?;
    let (a, a_dag) = ladder_operators(cfg);
    // z a† − z̄ a = −i H with H = i(z a† − z̄ a) Hermitian
    let exponent = &a_dag.scaled(z) - &a.scaled(z.conj());
    let h = exponent.scaled(C64::new(0.0, 1.0));
    let h = Operator::new(h.into_matrix())?;
    fock::evolve_unitary(&h, 1.0)
}

/// Outcome of one commutation-relation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgebraReport {
    pub relation: String,
    /// Largest entry of the mismatch on the checked block.
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl AlgebraReport {
    pub fn new(relation: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            relation: relation.into(),
            residual,
            tolerance,
            pass: residual < tolerance,
        }
    }
}

/// Checks `[A, B] = expected` on the leading `block × block` corner.
pub fn commutator_report(
    relation: &str,
    a: &Operator,
    b: &Operator,
    expected: &Operator,
    block: usize,
    tolerance: f64,
) -> AlgebraReport {
    let mismatch = &a.commutator(b) - expected;
    AlgebraReport::new(relation, mismatch.block_max_abs(block), tolerance)
}

/// The sl(2,ℝ) table plus the Heisenberg relation, on the interior block.
pub fn verify_sl2(cfg: &FockConfig) -> Vec<AlgebraReport> {
    verify_sl2_with_tolerance(cfg, SL2_TOL)
}

pub fn verify_sl2_with_tolerance(cfg: &FockConfig, tolerance: f64) -> Vec<AlgebraReport> {
    let can = canonical_operators(cfg);
    let h0 = can.h0.clone();
    let g = generator(&GeneratorKind::G, cfg).expect("built-in generator");
    let k = generator(&GeneratorKind::K, cfg).expect("built-in generator");
    let i = C64::new(0.0, 1.0);
    let block = cfg.interior();
    let ident = Operator::identity(cfg.dimension);

    vec![
        commutator_report("[H0,G] = 2iK", &h0, &g, &k.scaled(2.0 * i), block, tolerance),
        commutator_report("[H0,K] = -2iG", &h0, &k, &g.scaled(-2.0 * i), block, tolerance),
        commutator_report("[G,K] = -2iH0", &g, &k, &h0.scaled(-2.0 * i), block, tolerance),
        commutator_report("[Q,P] = iI", &can.q, &can.p, &ident.scaled(i), block, tolerance),
    ]
}

/// `F|n⟩ = iⁿ|n⟩` on the interior levels and `F⁴ = I` for `F = F_{π/2}`.
pub fn verify_fourier(cfg: &FockConfig) -> Vec<AlgebraReport> {
    let f = fractional_fourier(std::f64::consts::FRAC_PI_2, cfg);
    let mut worst = 0.0f64;
    for n in 0..cfg.interior() {
        let want = match n % 4 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        };
        let col = f.matrix().column(n);
        for (r, entry) in col.iter().enumerate() {
            let expected = if r == n { want } else { C64::new(0.0, 0.0) };
            worst = worst.max((entry - expected).norm());
        }
    }
    let f2 = &f * &f;
    let f4 = &f2 * &f2;
    let quartic = f4.max_abs_diff(&Operator::identity(cfg.dimension));
    vec![
        AlgebraReport::new("F|n> = i^n |n>", worst, FOURIER_TOL),
        AlgebraReport::new("F^4 = I", quartic, FOURIER_TOL),
    ]
}
