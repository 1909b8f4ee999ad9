//! Monte-Carlo realization of pre/post-selected pointer readout.
//!
//! # Random numbers
//!
//! Every shard draws from its own ChaCha20 stream (`rand_chacha::ChaCha20Rng`).
//! The 256-bit key is the little-endian bytes of `seed` followed by 24 zero
//! bytes, and the stream id is `part << 32 | shard`, where `part` is 0 for a
//! Hermitian readout and its real part, and 1 for the imaginary part of a
//! non-Hermitian one. A uniform variate is `(next_u64() >> 11) · 2⁻⁵³`.
//!
//! Shard `s` of `k` handles `n / k` trials plus one if `s < n mod k`. Each trial
//! draws `u`; it is accepted when `u < p_post`, and an accepted trial draws a
//! second `v` and reports the first pointer eigenvalue (ascending order) whose
//! cumulative probability exceeds `v`. Shard statistics are merged in shard
//! order, so results do not depend on thread scheduling.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::generator;
use crate::error::{Error, Result};
use crate::fit::{loglog_slope, span_ratio};
use crate::fock::{expectation, FockConfig, Ket, Operator};
use crate::linalg::HermitianEigen;
use crate::weak::{first_order_shift, ShiftExperiment};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub seed: u64,
    pub n_samples: u64,
    pub shards: u32,
}

impl SamplerConfig {
    pub fn new(seed: u64, n_samples: u64, shards: u32) -> Result<Self> {
        let s = Self {
            seed,
            n_samples,
            shards,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidInput("n_samples must be positive".into()));
        }
        if self.shards == 0 {
            return Err(Error::InvalidInput("shards must be positive".into()));
        }
        Ok(())
    }

    fn shard_len(&self, shard: u32) -> u64 {
        let k = u64::from(self.shards);
        self.n_samples / k + u64::from(u64::from(shard) < self.n_samples % k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    /// Readout label; `.re`/`.im` mark the Hermitian parts of a non-Hermitian readout.
    pub readout: String,
    pub epsilon: f64,
    pub attempted: u64,
    pub accepted: u64,
    pub acceptance_rate: f64,
    /// Binomial standard error of the acceptance rate.
    pub acceptance_stderr: f64,
    /// Exact post-selection probability used for the accept/reject draw.
    pub post_prob: f64,
    #[serde(rename = "mean_M_initial")]
    pub mean_m_initial: f64,
    #[serde(rename = "mean_M_final")]
    pub mean_m_final: f64,
    pub est_shift: f64,
    pub stderr: f64,
    /// First-order prediction.
    pub analytic_shift: f64,
    /// Shift of the exactly evolved, post-selected meter.
    pub exact_shift: f64,
    /// `(est_shift − analytic_shift) / stderr`; absent when `stderr` is zero
    /// and the difference is not.
    pub z_score: Option<f64>,
    /// `|analytic_shift|` over the single-trial standard deviation.
    pub single_shot_snr: Option<f64>,
}

/// Eigenbasis of a Hermitian readout, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct PointerBasis {
    eig: HermitianEigen,
}

impl PointerBasis {
    pub fn values(&self) -> &[f64] {
        self.eig.values()
    }

    pub fn vectors(&self) -> &DMatrix<C64> {
        self.eig.vectors()
    }

    /// Born probabilities of each eigenvalue for `psi`, normalized internally.
    pub fn probabilities(&self, psi: &Ket) -> Result<Vec<f64>> {
        let norm = psi.norm_sqr();
        if norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        if psi.dim() != self.eig.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.eig.dim(),
                found: psi.dim(),
            });
        }
        let amps: DVector<C64> = self.vectors().adjoint() * psi.amplitudes();
        Ok(amps.iter().map(|c| c.norm_sqr() / norm).collect())
    }
}

pub fn pointer_basis(m: &Operator, cfg: &FockConfig) -> Result<PointerBasis> {
    if m.dim() != cfg.dimension {
        return Err(Error::DimensionMismatch {
            expected: cfg.dimension,
            found: m.dim(),
        });
    }
    Ok(PointerBasis {
        eig: HermitianEigen::new(m)?,
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    accepted: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.accepted += 1;
        let d = x - self.mean;
        self.mean += d / self.accepted as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if other.accepted == 0 {
            return self;
        }
        if self.accepted == 0 {
            return other;
        }
        let n = self.accepted + other.accepted;
        let d = other.mean - self.mean;
        Moments {
            accepted: n,
            mean: self.mean + d * other.accepted as f64 / n as f64,
            m2: self.m2 + other.m2 + d * d * (self.accepted as f64 * other.accepted as f64) / n as f64,
        }
    }

    fn sample_std(&self) -> f64 {
        if self.accepted < 2 {
            0.0
        } else {
            (self.m2 / (self.accepted - 1) as f64).sqrt()
        }
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

fn uniform(rng: &mut ChaCha20Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

struct Draw<'a> {
    values: &'a [f64],
    cdf: Vec<f64>,
    post_prob: f64,
}

impl Draw<'_> {
    fn shard(&self, seed: u64, stream: u64, trials: u64, record: bool) -> (Moments, Vec<f64>) {
        let mut rng = rng_for(seed, stream);
        let mut m = Moments::default();
        let mut samples = Vec::new();
        for _ in 0..trials {
            if uniform(&mut rng) >= self.post_prob {
                continue;
            }
            let v = uniform(&mut rng);
            let k = self.cdf.partition_point(|c| *c <= v).min(self.values.len() - 1);
            let x = self.values[k];
            m.push(x);
            if record {
                samples.push(x);
            }
        }
        (m, samples)
    }
}

/// Samples the protocol for a Hermitian readout part `m`.
#[allow(clippy::too_many_arguments)]
fn sample_part(
    label: String,
    part: u64,
    m: &Operator,
    analytic: f64,
    experiment: &ShiftExperiment,
    phi: &Ket,
    epsilon: f64,
    sampler: &SamplerConfig,
    record: bool,
) -> Result<(EnsembleReport, Vec<f64>)> {
    let basis = pointer_basis(m, &experiment.cfg)?;
    let post_prob = phi.norm_sqr();
    let probs = basis.probabilities(phi)?;
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = cdf.last_mut() {
        *last = 1.0;
    }
    let draw = Draw {
        values: basis.values(),
        cdf,
        post_prob,
    };
    let shards: Vec<(Moments, Vec<f64>)> = (0..sampler.shards)
        .into_par_iter()
        .map(|s| {
            draw.shard(
                sampler.seed,
                part << 32 | u64::from(s),
                sampler.shard_len(s),
                record,
            )
        })
        .collect();
    let mut moments = Moments::default();
    let mut samples = Vec::new();
    for (mo, xs) in shards {
        moments = moments.merge(mo);
        samples.extend(xs);
    }
    if moments.accepted == 0 {
        return Err(Error::NoAcceptedSamples {
            attempted: sampler.n_samples,
        });
    }
    let initial = expectation(m, &experiment.meter)?.re;
    let exact = if epsilon == 0.0 {
        0.0
    } else {
        expectation(m, phi)?.re - initial
    };
    let std = moments.sample_std();
    let stderr = std / (moments.accepted as f64).sqrt();
    let est = moments.mean - initial;
    let z_score = if stderr > 0.0 {
        Some((est - analytic) / stderr)
    } else if est == analytic {
        Some(0.0)
    } else {
        None
    };
    let rate = moments.accepted as f64 / sampler.n_samples as f64;
    let report = EnsembleReport {
        readout: label,
        epsilon,
        attempted: sampler.n_samples,
        accepted: moments.accepted,
        acceptance_rate: rate,
        acceptance_stderr: (rate * (1.0 - rate) / sampler.n_samples as f64).sqrt(),
        post_prob,
        mean_m_initial: initial,
        mean_m_final: moments.mean,
        est_shift: est,
        stderr,
        analytic_shift: analytic,
        exact_shift: exact,
        z_score,
        single_shot_snr: (std > 0.0).then(|| analytic.abs() / std),
    };
    Ok((report, samples))
}

fn run_inner(
    experiment: &ShiftExperiment,
    epsilon: f64,
    sampler: &SamplerConfig,
    record: bool,
) -> Result<Vec<(EnsembleReport, Vec<f64>)>> {
    sampler.validate()?;
    let w = experiment.weak_value()?;
    let m = experiment.readout.operator(&experiment.cfg)?;
    let r = generator(&experiment.generator, &experiment.cfg)?;
    let phi = experiment.final_meter(epsilon)?;
    let first = first_order_shift(&m, &r, w.value, &experiment.meter, epsilon)?;
    let label = experiment.readout.label();
    if m.is_hermitian() {
        return Ok(vec![sample_part(
            label.to_string(),
            0,
            &m,
            first.re,
            experiment,
            &phi,
            epsilon,
            sampler,
            record,
        )?]);
    }
    let (c, d) = m.hermitian_parts();
    Ok(vec![
        sample_part(format!("{label}.re"), 0, &c, first.re, experiment, &phi, epsilon, sampler, record)?,
        sample_part(format!("{label}.im"), 1, &d, first.im, experiment, &phi, epsilon, sampler, record)?,
    ])
}

/// Ensemble estimate of the shift of a Hermitian readout at strength `epsilon`.
///
/// Returns [`Error::InvalidInput`] for a non-Hermitian readout; use
/// [`run_ensemble_parts`] for those.
pub fn run_ensemble(
    experiment: &ShiftExperiment,
    epsilon: f64,
    sampler: &SamplerConfig,
) -> Result<EnsembleReport> {
    if !experiment.readout.operator(&experiment.cfg)?.is_hermitian() {
        return Err(Error::InvalidInput(
            "ensemble readout must be Hermitian; use run_ensemble_parts".into(),
        ));
    }
    Ok(run_inner(experiment, epsilon, sampler, false)?.remove(0).0)
}

/// One report for a Hermitian readout, or two (real and imaginary Hermitian
/// parts) for a non-Hermitian one.
pub fn run_ensemble_parts(
    experiment: &ShiftExperiment,
    epsilon: f64,
    sampler: &SamplerConfig,
) -> Result<Vec<EnsembleReport>> {
    Ok(run_inner(experiment, epsilon, sampler, false)?
        .into_iter()
        .map(|(r, _)| r)
        .collect())
}

/// Like [`run_ensemble_parts`], also returning the accepted pointer values
/// of each part in shard order.
pub fn run_ensemble_recording(
    experiment: &ShiftExperiment,
    epsilon: f64,
    sampler: &SamplerConfig,
) -> Result<Vec<(EnsembleReport, Vec<f64>)>> {
    run_inner(experiment, epsilon, sampler, true)
}

/// Slope of `log stderr` against `log n` for a Hermitian readout.
///
/// Needs at least three sample sizes spanning two decades.
pub fn stderr_scaling(
    experiment: &ShiftExperiment,
    epsilon: f64,
    base: &SamplerConfig,
    n_list: &[u64],
) -> Result<f64> {
    let ns: Vec<f64> = n_list.iter().map(|&n| n as f64).collect();
    let mut distinct = ns.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::DegenerateFit("sample sizes do not span a range".into()));
    }
    if ns.len() < 3 || span_ratio(&ns) < 100.0 - 1e-9 {
        return Err(Error::InvalidInput(
            "stderr scaling needs at least 3 sample sizes spanning two decades".into(),
        ));
    }
    let mut errs = Vec::with_capacity(ns.len());
    for &n in n_list {
        let sampler = SamplerConfig {
            n_samples: n,
            ..base.clone()
        };
        let rep = run_ensemble(experiment, epsilon, &sampler)?;
        if rep.stderr <= 0.0 {
            return Err(Error::DegenerateFit(format!("stderr is zero at n = {n}")));
        }
        errs.push(rep.stderr);
    }
    loglog_slope(&ns, &errs)
}
