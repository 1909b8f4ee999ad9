//! Pre/post-selected von Neumann coupling of a finite system to the meter.
//!
//! The coupling is the delta-pulse unitary `U = exp(−iε Ô ⊗ R̂)`. It is
//! evaluated exactly through the spectral decomposition of `Ô`,
//!
//! ```text
//! U = Σ_j |o_j⟩⟨o_j| ⊗ exp(−iε o_j R̂)
//! ```
//!
//! so only meter-sized exponentials are needed. Projecting on the
//! post-selected `⟨β|` leaves the unnormalized meter state
//! `|φ_f⟩ = Σ_j ⟨β|o_j⟩⟨o_j|α⟩ exp(−iε o_j R̂)|φ_i⟩`, whose squared norm is
//! the post-selection probability.
//!
//! To first order in ε the normalized shift of a meter observable `M̂` is
//!
//! ```text
//! ΔM = ε [ Im(O_w)(⟨{M,R}⟩ − 2⟨R⟩⟨M⟩) − i Re(O_w) ⟨[M,R]⟩ ]
//! ```
//!
//! with `O_w = ⟨β|Ô|α⟩ / ⟨β|α⟩`. For a coherent pointer `|z⟩`, `R = N` and
//! `M = a` this collapses to `Δa = −iεzO_w`.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{generator, GeneratorKind};
use crate::error::{Error, Result};
use crate::fit::{loglog_slope, span_ratio};
use crate::fock::{
    canonical_operators, check_dim, expectation, ladder_operators, product_expectation,
    Basis, FockConfig, Ket, Normalization, Operator, DEFAULT_TRUNCATION_TOL,
};
use crate::linalg::HermitianEigen;

/// Below this `|⟨β|α⟩|` a weak value is flagged as near-orthogonal.
pub const OVERLAP_FLOOR: f64 = 1e-6;

/// `|⟨β|α⟩|` below this counts as exactly orthogonal.
pub const ORTHOGONAL_TOL: f64 = 1e-12;

/// Eigenvalues closer than this are merged into one measurement branch.
pub const DEGENERACY_TOL: f64 = 1e-9;

/// Branches with probability below this are dropped from ideal measurements.
pub const BRANCH_PROB_FLOOR: f64 = 1e-14;

/// Pre/post-selected finite system: observable `Ô`, `|α⟩` and `|β⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    observable: Operator,
    pre: Ket,
    post: Ket,
}

impl SystemSpec {
    pub fn new(observable: Operator, pre: Ket, post: Ket) -> Result<Self> {
        if !observable.is_hermitian() {
            return Err(Error::NotHermitian {
                deviation: observable.hermitian_deviation(),
            });
        }
        check_dim(observable.dim(), pre.dim())?;
        check_dim(observable.dim(), post.dim())?;
        for (name, ket) in [("pre-selected", &pre), ("post-selected", &post)] {
            if ket.normalization() != Normalization::Unit {
                return Err(Error::InvalidInput(format!(
                    "{name} state must have unit norm, has ‖ψ‖² = {}",
                    ket.norm_sqr()
                )));
            }
        }
        Ok(Self {
            observable,
            pre: retag(pre),
            post: retag(post),
        })
    }

    pub fn dim(&self) -> usize {
        self.observable.dim()
    }

    pub fn observable(&self) -> &Operator {
        &self.observable
    }

    pub fn pre(&self) -> &Ket {
        &self.pre
    }

    pub fn post(&self) -> &Ket {
        &self.post
    }

    /// `⟨β|α⟩`.
    pub fn overlap(&self) -> C64 {
        self.post.amplitudes().dotc(self.pre.amplitudes())
    }
}

fn retag(k: Ket) -> Ket {
    Ket::new(k.amplitudes().clone(), Basis::System)
}

/// A weak value together with the selection overlap it was divided by.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakValue {
    pub value: C64,
    pub overlap: C64,
}

impl WeakValue {
    /// First-order expansions are unreliable at any practical ε here.
    pub fn near_orthogonal(&self) -> bool {
        self.overlap.norm() < OVERLAP_FLOOR
    }
}

/// `O_w = ⟨β|Ô|α⟩ / ⟨β|α⟩`.
pub fn weak_value(sys: &SystemSpec) -> Result<WeakValue> {
    weak_value_of(sys.observable(), sys.pre(), sys.post())
}

/// Weak value of an arbitrary (not necessarily Hermitian) operator.
pub fn weak_value_of(op: &Operator, pre: &Ket, post: &Ket) -> Result<WeakValue> {
    check_dim(op.dim(), pre.dim())?;
    check_dim(op.dim(), post.dim())?;
    let overlap = post.amplitudes().dotc(pre.amplitudes());
    if overlap.norm() < ORTHOGONAL_TOL {
        return Err(Error::OrthogonalSelection {
            overlap: overlap.norm(),
        });
    }
    let numerator = post.amplitudes().dotc(&(op.matrix() * pre.amplitudes()));
    Ok(WeakValue {
        value: numerator / overlap,
        overlap,
    })
}

/// Coupling strength and meter generator for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpec {
    pub epsilon: f64,
    pub generator: GeneratorKind,
    /// Finite coupling for the ideal (strong) mode; overrides `epsilon` when set.
    pub lambda_strong: Option<f64>,
}

impl CouplingSpec {
    pub fn weak(epsilon: f64, generator: GeneratorKind) -> Self {
        Self {
            epsilon,
            generator,
            lambda_strong: None,
        }
    }

    pub fn strong(lambda: f64, generator: GeneratorKind) -> Self {
        Self {
            epsilon: 0.0,
            generator,
            lambda_strong: Some(lambda),
        }
    }

    /// The coefficient multiplying `Ô ⊗ R̂` in the exponent.
    pub fn strength(&self) -> f64 {
        self.lambda_strong.unwrap_or(self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        if let Some(l) = self.lambda_strong {
            if !l.is_finite() {
                return Err(Error::InvalidInput(format!("lambda_strong must be finite, got {l}")));
            }
        }
        Ok(())
    }
}

/// Meter observable whose expectation is read out.
#[derive(Debug, Clone, PartialEq)]
pub enum Readout {
    Q,
    P,
    N,
    /// The annihilation operator `a` (non-Hermitian).
    A,
    H0,
    G,
    K,
    Custom(Operator),
}

impl Readout {
    pub fn label(&self) -> &'static str {
        match self {
            Readout::Q => "Q",
            Readout::P => "P",
            Readout::N => "N",
            Readout::A => "A",
            Readout::H0 => "H0",
            Readout::G => "G",
            Readout::K => "K",
            Readout::Custom(_) => "custom",
        }
    }

    pub fn operator(&self, cfg: &FockConfig) -> Result<Operator> {
        match self {
            Readout::Q => generator(&GeneratorKind::Q, cfg),
            Readout::P => generator(&GeneratorKind::P, cfg),
            Readout::N => generator(&GeneratorKind::N, cfg),
            Readout::H0 => generator(&GeneratorKind::H0, cfg),
            Readout::G => generator(&GeneratorKind::G, cfg),
            Readout::K => generator(&GeneratorKind::K, cfg),
            Readout::A => Ok(ladder_operators(cfg).0),
            Readout::Custom(op) => {
                check_dim(cfg.dimension, op.dim())?;
                Ok(op.clone())
            }
        }
    }
}

/// Exact versus first-order shift of one readout at one coupling strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftReport {
    pub readout: String,
    pub epsilon: f64,
    pub exact_shift: C64,
    pub first_order: C64,
    /// `|exact_shift − first_order|`.
    pub residual: f64,
    /// `‖φ_f‖²`.
    pub post_prob: f64,
}

/// Spectral data reused across coupling strengths.
struct Coupler {
    /// `(o_j, ⟨β|o_j⟩⟨o_j|α⟩)` per eigenvector of `Ô`.
    branches: Vec<(f64, C64)>,
    generator: HermitianEigen,
}

impl Coupler {
    fn new(sys: &SystemSpec, generator_op: &Operator) -> Result<Self> {
        let obs = HermitianEigen::new(sys.observable())?;
        let vecs = obs.vectors();
        let branches = obs
            .values()
            .iter()
            .enumerate()
            .map(|(j, &o)| {
                let col = vecs.column(j);
                let to_alpha = col.dotc(sys.pre().amplitudes());
                let from_beta = sys.post().amplitudes().dotc(&col);
                (o, from_beta * to_alpha)
            })
            .collect();
        Ok(Self {
            branches,
            generator: HermitianEigen::new(generator_op)?,
        })
    }

    fn postselect(&self, meter: &Ket, strength: f64, cfg: &FockConfig) -> Result<Ket> {
        let mut out = nalgebra::DVector::zeros(meter.dim());
        for &(o, c) in &self.branches {
            if c == C64::new(0.0, 0.0) {
                continue;
            }
            out += self.generator.exp_apply(strength * o, meter.amplitudes()) * c;
        }
        let ket = Ket::unnormalized(out, Basis::Fock);
        check_leak(&ket, cfg)?;
        Ok(ket)
    }
}

fn check_leak(ket: &Ket, cfg: &FockConfig) -> Result<()> {
    let population = ket.tail_population(cfg.interior());
    if population > cfg.truncation_tol {
        return Err(Error::TruncationLeak {
            population,
            buffer: cfg.interior_buffer,
            tol: cfg.truncation_tol,
        });
    }
    Ok(())
}

fn check_meter(meter: &Ket, cfg: &FockConfig) -> Result<()> {
    check_dim(cfg.dimension, meter.dim())?;
    if meter.normalization() != Normalization::Unit {
        return Err(Error::InvalidInput(format!(
            "meter state must have unit norm, has ‖ψ‖² = {}",
            meter.norm_sqr()
        )));
    }
    Ok(())
}

/// Unnormalized post-selected meter state `(⟨β| ⊗ I) U (|α⟩ ⊗ |φ_i⟩)`.
pub fn couple_and_postselect(
    sys: &SystemSpec,
    meter: &Ket,
    coupling: &CouplingSpec,
    cfg: &FockConfig,
) -> Result<Ket> {
    coupling.validate()?;
    check_dim(cfg.dimension, meter.dim())?;
    let r = generator(&coupling.generator, cfg)?;
    Coupler::new(sys, &r)?.postselect(meter, coupling.strength(), cfg)
}

/// Normalized final expectation of `M` minus its initial expectation,
/// alongside the first-order prediction.
pub fn exact_shift(
    readout: &Readout,
    sys: &SystemSpec,
    meter: &Ket,
    coupling: &CouplingSpec,
    cfg: &FockConfig,
) -> Result<ShiftReport> {
    let experiment = ShiftExperiment::new(
        sys.clone(),
        meter.clone(),
        coupling.generator.clone(),
        readout.clone(),
        *cfg,
    )?;
    coupling.validate()?;
    experiment.shift(coupling.strength())
}

/// `ε[Im(O_w)(⟨{M,R}⟩ − 2⟨R⟩⟨M⟩) − i Re(O_w)⟨[M,R]⟩]` in the meter state.
pub fn first_order_shift(
    m: &Operator,
    r: &Operator,
    weak_value: C64,
    meter: &Ket,
    epsilon: f64,
) -> Result<C64> {
    check_dim(m.dim(), r.dim())?;
    check_dim(m.dim(), meter.dim())?;
    let mr = product_expectation(m, r, meter)?;
    let rm = product_expectation(r, m, meter)?;
    let (anti, comm) = (mr + rm, mr - rm);
    let mean_r = expectation(r, meter)?;
    let mean_m = expectation(m, meter)?;
    let i = C64::new(0.0, 1.0);
    Ok((weak_value.im * (anti - 2.0 * mean_r * mean_m) - i * weak_value.re * comm) * epsilon)
}

/// `Δa = ε[−iO_w⟨a⟩ + 2 Im(O_w)(⟨Na⟩ − ⟨N⟩⟨a⟩)]`.
pub fn annihilator_shift(
    weak_value: C64,
    meter: &Ket,
    epsilon: f64,
    cfg: &FockConfig,
) -> Result<C64> {
    check_dim(cfg.dimension, meter.dim())?;
    let (a, _) = ladder_operators(cfg);
    let n = canonical_operators(cfg).n;
    let mean_a = expectation(&a, meter)?;
    let mean_na = product_expectation(&n, &a, meter)?;
    let mean_n = expectation(&n, meter)?;
    let i = C64::new(0.0, 1.0);
    Ok((-i * weak_value * mean_a + 2.0 * weak_value.im * (mean_na - mean_n * mean_a)) * epsilon)
}

/// Closed-form `(ΔQ, ΔP) = ε√2|z| (Re O_w, Im O_w)` for a pointer `|i|z|⟩`.
///
/// # Panics
///
/// Panics if `z_mag` is negative.
pub fn symmetric_qp_shifts(z_mag: f64, epsilon: f64, weak_value: C64) -> (f64, f64) {
    assert!(z_mag >= 0.0, "z_mag must be non-negative");
    let scale = epsilon * std::f64::consts::SQRT_2 * z_mag;
    (scale * weak_value.re, scale * weak_value.im)
}

/// First-order position shift for a momentum coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JozsaShift {
    /// `ε[2 Im(O_w)(⟨g⟩ − ⟨P⟩⟨Q⟩) + Re(O_w)]`.
    pub delta_q: f64,
    /// `d/dt δ²Q = (2⟨g⟩ − 2⟨P⟩⟨Q⟩)/m` under free evolution, when a mass is given.
    pub dispersion_rate: Option<f64>,
    /// `ε[Re(O_w) + m Im(O_w) d/dt δ²Q]`, which must equal `delta_q`.
    pub delta_q_rate_form: Option<f64>,
}

pub fn jozsa_delta_q(
    weak_value: C64,
    meter: &Ket,
    epsilon: f64,
    mass: Option<f64>,
) -> Result<JozsaShift> {
    let cfg = FockConfig::new(meter.dim(), DEFAULT_TRUNCATION_TOL, 0)?;
    let can = canonical_operators(&cfg);
    let g = generator(&GeneratorKind::G, &cfg)?;
    let mean_g = expectation(&g, meter)?.re;
    let mean_p = expectation(&can.p, meter)?.re;
    let mean_q = expectation(&can.q, meter)?.re;
    let correlation = mean_g - mean_p * mean_q;
    let delta_q = epsilon * (2.0 * weak_value.im * correlation + weak_value.re);

    let (dispersion_rate, delta_q_rate_form) = match mass {
        Some(m) if m > 0.0 && m.is_finite() => {
            let rate = 2.0 * correlation / m;
            (Some(rate), Some(epsilon * (weak_value.re + m * weak_value.im * rate)))
        }
        Some(m) => return Err(Error::InvalidInput(format!("mass must be positive, got {m}"))),
        None => (None, None),
    };
    Ok(JozsaShift {
        delta_q,
        dispersion_rate,
        delta_q_rate_form,
    })
}

/// One outcome branch of an ideal (strong, unselected) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub eigenvalue: f64,
    pub probability: f64,
    /// Meter after the translation `exp(−iλ o_j P)`.
    pub meter: Ket,
}

/// Ideal von Neumann pre-measurement with the translation generator `P`.
pub fn ideal_measurement(
    observable: &Operator,
    pre: &Ket,
    meter: &Ket,
    lambda: f64,
    cfg: &FockConfig,
) -> Result<Vec<Branch>> {
    check_meter(meter, cfg)?;
    check_dim(observable.dim(), pre.dim())?;
    let eig = HermitianEigen::new(observable)?;
    let p = canonical_operators(cfg).p;
    let translation = HermitianEigen::new(&p)?;

    // group degenerate eigenvalues into eigenspaces
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for (j, &o) in eig.values().iter().enumerate() {
        let weight = eig.vectors().column(j).dotc(pre.amplitudes()).norm_sqr();
        match groups.last_mut() {
            Some((rep, w)) if (o - *rep).abs() <= DEGENERACY_TOL * (1.0 + rep.abs()) => *w += weight,
            _ => groups.push((o, weight)),
        }
    }

    let total: f64 = groups.iter().map(|g| g.1).sum();
    let mut branches = Vec::new();
    for (o, w) in groups {
        if w < BRANCH_PROB_FLOOR {
            continue;
        }
        let moved = translation.exp_apply(lambda * o, meter.amplitudes());
        let ket = Ket::new(moved, Basis::Fock);
        check_leak(&ket, cfg)?;
        branches.push(Branch {
            eigenvalue: o,
            probability: w / total,
            meter: ket,
        });
    }
    Ok(branches)
}

/// Everything needed to compare exact and first-order shifts over a sweep of ε.
#[derive(Debug, Clone)]
pub struct ShiftExperiment {
    pub system: SystemSpec,
    pub meter: Ket,
    pub generator: GeneratorKind,
    pub readout: Readout,
    pub cfg: FockConfig,
}

/// Result of a residual-order scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualScan {
    /// Fitted exponent of `|exact − first order|` against ε.
    pub slope: f64,
    pub points: Vec<ShiftReport>,
}

impl ShiftExperiment {
    pub fn new(
        system: SystemSpec,
        meter: Ket,
        generator: GeneratorKind,
        readout: Readout,
        cfg: FockConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        check_meter(&meter, &cfg)?;
        Ok(Self {
            system,
            meter,
            generator,
            readout,
            cfg,
        })
    }

    pub fn weak_value(&self) -> Result<WeakValue> {
        weak_value(&self.system)
    }

    /// Unnormalized post-selected meter at coupling strength `epsilon`.
    pub fn final_meter(&self, epsilon: f64) -> Result<Ket> {
        let r = generator(&self.generator, &self.cfg)?;
        Coupler::new(&self.system, &r)?.postselect(&self.meter, epsilon, &self.cfg)
    }

    pub fn shift(&self, epsilon: f64) -> Result<ShiftReport> {
        Ok(self.sweep(&[epsilon])?.remove(0))
    }

    /// Shift reports for every ε, evaluated concurrently.
    pub fn sweep(&self, epsilons: &[f64]) -> Result<Vec<ShiftReport>> {
        let w = self.weak_value()?;
        let r = generator(&self.generator, &self.cfg)?;
        let m = self.readout.operator(&self.cfg)?;
        let coupler = Coupler::new(&self.system, &r)?;
        let initial = expectation(&m, &self.meter)?;
        epsilons
            .par_iter()
            .map(|&eps| {
                let phi = coupler.postselect(&self.meter, eps, &self.cfg)?;
                let post_prob = phi.norm_sqr();
                // no coupling: the normalized final state is the initial one
                let exact = if eps == 0.0 {
                    C64::new(0.0, 0.0)
                } else {
                    expectation(&m, &phi)? - initial
                };
                let first = first_order_shift(&m, &r, w.value, &self.meter, eps)?;
                Ok(ShiftReport {
                    readout: self.readout.label().to_string(),
                    epsilon: eps,
                    exact_shift: exact,
                    first_order: first,
                    residual: (exact - first).norm(),
                    post_prob,
                })
            })
            .collect()
    }

    /// Magnitude below which a residual is indistinguishable from rounding.
    pub fn residual_floor(&self) -> Result<f64> {
        let m = self.readout.operator(&self.cfg)?;
        Ok(1e-12 * (1.0 + expectation(&m, &self.meter)?.norm()))
    }
}

/// Order-of-accuracy check: slope of `log|residual|` against `log ε`.
///
/// Requires at least four strengths spanning two decades. Returns
/// [`Error::DegenerateFit`] when the strengths do not span a range or a
/// residual sits at the floating-point floor.
pub fn residual_scan(experiment: &ShiftExperiment, epsilons: &[f64]) -> Result<ResidualScan> {
    let mut distinct: Vec<f64> = epsilons.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::DegenerateFit("epsilon values do not span a range".to_string()));
    }
    if epsilons.len() < 4 || span_ratio(epsilons) < 100.0 - 1e-9 {
        return Err(Error::InvalidInput(
            "residual scan needs at least 4 epsilon values spanning two decades".to_string(),
        ));
    }
    let points = experiment.sweep(epsilons)?;
    let floor = experiment.residual_floor()?;
    if let Some(p) = points.iter().find(|p| p.residual <= floor) {
        return Err(Error::DegenerateFit(format!(
            "residual {:.3e} at epsilon {} is at the floating-point floor",
            p.residual, p.epsilon
        )));
    }
    let eps: Vec<f64> = points.iter().map(|p| p.epsilon).collect();
    let res: Vec<f64> = points.iter().map(|p| p.residual).collect();
    Ok(ResidualScan {
        slope: loglog_slope(&eps, &res)?,
        points,
    })
}
