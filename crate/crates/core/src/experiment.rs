//! JSON experiment description and its resolution into computable objects.
//!
//! Complex numbers are `[re, im]` pairs and matrices are lists of rows.
//!
//! ```json
//! {
//!   "system": {
//!     "dim": 2,
//!     "observable": [[[0,0],[1,0]], [[1,0],[0,0]]],
//!     "alpha": [[1,0],[0,0]],
//!     "beta": [[0.5,0],[0.8660254037844386,0]]
//!   },
//!   "meter": {"kind": "coherent", "z": [0, 3]},
//!   "coupling": {"epsilon_list": [0.1, 0.03, 0.01, 0.003, 0.001], "generator": "N"},
//!   "readout": {"M": "A"},
//!   "fock": {"truncation_tol": 1e-12},
//!   "sampler": {"seed": 42, "n_samples": 100000, "shards": 8}
//! }
//! ```

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::algebra::GeneratorKind;
use crate::ensemble::SamplerConfig;
use crate::error::{Error, Result};
use crate::fock::{coherent_ket, Basis, FockConfig, Ket, Operator, DEFAULT_TRUNCATION_TOL};
use crate::husimi::Window;
use crate::weak::{Readout, ShiftExperiment, SystemSpec};

pub type ComplexPair = [f64; 2];
pub type MatrixRows = Vec<Vec<ComplexPair>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub system: SystemBlock,
    pub meter: MeterBlock,
    pub coupling: CouplingBlock,
    pub readout: ReadoutBlock,
    #[serde(default)]
    pub fock: FockBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub husimi: Option<HusimiBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemBlock {
    pub dim: usize,
    pub observable: MatrixRows,
    pub alpha: Vec<ComplexPair>,
    pub beta: Vec<ComplexPair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MeterBlock {
    Coherent { z: ComplexPair },
    Fock { n: usize },
    Custom { amplitudes: Vec<ComplexPair> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeneratorName {
    Q,
    P,
    N,
    H0,
    G,
    K,
    #[serde(rename = "custom")]
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_list: Option<Vec<f64>>,
    pub generator: GeneratorName,
    /// Required when `generator` is `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_matrix: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_strong: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReadoutName {
    Q,
    P,
    N,
    A,
    H0,
    G,
    K,
    #[serde(rename = "custom")]
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadoutBlock {
    #[serde(rename = "M")]
    pub m: ReadoutName,
    /// Required when `M` is `custom`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<MatrixRows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(default = "default_tol")]
    pub truncation_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interior_buffer: Option<usize>,
}

impl Default for FockBlock {
    fn default() -> Self {
        Self {
            dimension: None,
            truncation_tol: DEFAULT_TRUNCATION_TOL,
            interior_buffer: None,
        }
    }
}

fn default_tol() -> f64 {
    DEFAULT_TRUNCATION_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HusimiBlock {
    /// `[q_min, q_max, p_min, p_max]`; defaults to a window around the initial centroid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<usize>,
}

/// Whether the run couples weakly (ε sweep) or strongly (fixed λ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMode {
    Weak,
    Strong,
}

/// An [`ExperimentSpec`] turned into operators, kets and a Fock configuration.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub shift: ShiftExperiment,
    /// Coupling strengths to evaluate, in file order.
    pub strengths: Vec<f64>,
    pub mode: CouplingMode,
    pub sampler: Option<SamplerConfig>,
}

fn complex(p: &ComplexPair) -> C64 {
    C64::new(p[0], p[1])
}

fn matrix(rows: &MatrixRows, dim: usize, what: &str) -> Result<DMatrix<C64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidInput(format!("{what} must be a {dim}x{dim} matrix")));
    }
    Ok(DMatrix::from_fn(dim, dim, |r, c| complex(&rows[r][c])))
}

fn vector(items: &[ComplexPair]) -> DVector<C64> {
    DVector::from_iterator(items.len(), items.iter().map(complex))
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Coupling strengths in file order, and the coupling mode.
    pub fn strengths(&self) -> Result<(Vec<f64>, CouplingMode)> {
        let c = &self.coupling;
        if let Some(lambda) = c.lambda_strong {
            if c.epsilon.is_some() || c.epsilon_list.is_some() {
                return Err(Error::InvalidInput(
                    "lambda_strong cannot be combined with epsilon or epsilon_list".into(),
                ));
            }
            if !lambda.is_finite() {
                return Err(Error::InvalidInput(format!("lambda_strong must be finite, got {lambda}")));
            }
            return Ok((vec![lambda], CouplingMode::Strong));
        }
        let list = match (c.epsilon, &c.epsilon_list) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidInput(
                    "give either epsilon or epsilon_list, not both".into(),
                ))
            }
            (Some(e), None) => vec![e],
            (None, Some(l)) if !l.is_empty() => l.clone(),
            _ => return Err(Error::InvalidInput("coupling needs epsilon or epsilon_list".into())),
        };
        if let Some(bad) = list.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
            return Err(Error::InvalidInput(format!("epsilon must be finite and >= 0, got {bad}")));
        }
        Ok((list, CouplingMode::Weak))
    }

    fn system(&self) -> Result<SystemSpec> {
        let s = &self.system;
        if s.dim == 0 {
            return Err(Error::InvalidInput("system dim must be positive".into()));
        }
        if s.alpha.len() != s.dim || s.beta.len() != s.dim {
            return Err(Error::InvalidInput(format!(
                "alpha and beta must have {} amplitudes",
                s.dim
            )));
        }
        let obs = Operator::new(matrix(&s.observable, s.dim, "system observable")?)?;
        SystemSpec::new(
            obs,
            Ket::new(vector(&s.alpha), Basis::System),
            Ket::new(vector(&s.beta), Basis::System),
        )
    }

    /// Pointer amplitude scale used by the automatic dimension rule.
    fn meter_scale(&self) -> f64 {
        match &self.meter {
            MeterBlock::Coherent { z } => complex(z).norm(),
            MeterBlock::Fock { n } => (*n as f64).sqrt(),
            MeterBlock::Custom { amplitudes } => (amplitudes.len() as f64).sqrt(),
        }
    }

    /// Fock configuration, growing the automatic size to hold `|z| ≤ extra_z` too.
    pub fn fock_config(&self, extra_z: f64) -> Result<FockConfig> {
        let (strengths, _) = self.strengths()?;
        let mut z = self.meter_scale();
        if matches!(self.coupling.generator, GeneratorName::Q | GeneratorName::P) {
            // translations move the pointer by s·o_j/√2 in the z-plane
            let obs = self.system()?;
            let eig = crate::linalg::HermitianEigen::new(obs.observable())?;
            let o_max = eig.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let s_max = strengths.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            z += s_max * o_max / std::f64::consts::SQRT_2;
        }
        let z = z.max(extra_z);
        let tol = self.fock.truncation_tol;
        let auto = FockConfig::auto(z, tol)?;
        let mut dimension = self.fock.dimension.unwrap_or(auto.dimension);
        if let MeterBlock::Custom { amplitudes } = &self.meter {
            if self.fock.dimension.is_none() {
                dimension = dimension.max(amplitudes.len() + auto.interior_buffer);
            }
        }
        let buffer = self.fock.interior_buffer.unwrap_or(auto.interior_buffer);
        FockConfig::new(dimension, tol, buffer)
    }

    fn meter(&self, cfg: &FockConfig) -> Result<Ket> {
        match &self.meter {
            MeterBlock::Coherent { z } => coherent_ket(complex(z), cfg),
            MeterBlock::Fock { n } => Ket::fock(*n, cfg),
            MeterBlock::Custom { amplitudes } => {
                if amplitudes.len() > cfg.dimension {
                    return Err(Error::InvalidInput(format!(
                        "{} meter amplitudes exceed dimension {}",
                        amplitudes.len(),
                        cfg.dimension
                    )));
                }
                let mut v = DVector::zeros(cfg.dimension);
                for (i, a) in amplitudes.iter().enumerate() {
                    v[i] = complex(a);
                }
                let ket = Ket::new(v, Basis::Fock);
                if ket.normalization() != crate::fock::Normalization::Unit {
                    return Err(Error::InvalidInput(format!(
                        "custom meter must have unit norm, has ‖ψ‖² = {}",
                        ket.norm_sqr()
                    )));
                }
                Ok(ket)
            }
        }
    }

    fn generator(&self, cfg: &FockConfig) -> Result<GeneratorKind> {
        Ok(match self.coupling.generator {
            GeneratorName::Q => GeneratorKind::Q,
            GeneratorName::P => GeneratorKind::P,
            GeneratorName::N => GeneratorKind::N,
            GeneratorName::H0 => GeneratorKind::H0,
            GeneratorName::G => GeneratorKind::G,
            GeneratorName::K => GeneratorKind::K,
            GeneratorName::Custom => {
                let rows = self.coupling.generator_matrix.as_ref().ok_or_else(|| {
                    Error::InvalidInput("custom generator needs generator_matrix".into())
                })?;
                let op = Operator::new(matrix(rows, cfg.dimension, "generator_matrix")?)?;
                if !op.is_hermitian() {
                    return Err(Error::NonHermitianCustom {
                        deviation: op.hermitian_deviation(),
                    });
                }
                GeneratorKind::Custom(op)
            }
        })
    }

    fn readout(&self, cfg: &FockConfig) -> Result<Readout> {
        Ok(match self.readout.m {
            ReadoutName::Q => Readout::Q,
            ReadoutName::P => Readout::P,
            ReadoutName::N => Readout::N,
            ReadoutName::A => Readout::A,
            ReadoutName::H0 => Readout::H0,
            ReadoutName::G => Readout::G,
            ReadoutName::K => Readout::K,
            ReadoutName::Custom => {
                let rows = self.readout.matrix.as_ref().ok_or_else(|| {
                    Error::InvalidInput("custom readout needs matrix".into())
                })?;
                Readout::Custom(Operator::new(matrix(rows, cfg.dimension, "readout matrix")?)?)
            }
        })
    }

    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        self.resolve_with(0.0)
    }

    /// Resolves with a Fock space large enough for coherent states up to `extra_z`.
    pub fn resolve_with(&self, extra_z: f64) -> Result<ResolvedExperiment> {
        let (strengths, mode) = self.strengths()?;
        let cfg = self.fock_config(extra_z)?;
        let shift = ShiftExperiment::new(
            self.system()?,
            self.meter(&cfg)?,
            self.generator(&cfg)?,
            self.readout(&cfg)?,
            cfg,
        )?;
        if let Some(s) = &self.sampler {
            s.validate()?;
        }
        Ok(ResolvedExperiment {
            shift,
            strengths,
            mode,
            sampler: self.sampler.clone(),
        })
    }

    /// Explicit Husimi window from the file, if any.
    pub fn husimi_window(&self) -> Result<Option<Window>> {
        match self.husimi.as_ref().and_then(|h| h.window) {
            Some([q0, q1, p0, p1]) => Ok(Some(Window::new(q0, q1, p0, p1)?)),
            None => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAIN: &str = r#"{
        "system": {
            "dim": 2,
            "observable": [[[0,0],[1,0]], [[1,0],[0,0]]],
            "alpha": [[1,0],[0,0]],
            "beta": [[0.5,0],[0.8660254037844386,0]]
        },
        "meter": {"kind": "coherent", "z": [0, 3]},
        "coupling": {"epsilon_list": [0.1, 0.03, 0.01, 0.003, 0.001], "generator": "N"},
        "readout": {"M": "A"}
    }"#;

    #[test]
    fn parses_and_resolves_main_spec() {
        let spec = ExperimentSpec::from_json(MAIN).unwrap();
        let r = spec.resolve().unwrap();
        assert_eq!(r.strengths.len(), 5);
        assert_eq!(r.mode, CouplingMode::Weak);
        assert_eq!(r.shift.cfg.dimension, 63);
        assert_eq!(r.shift.cfg.interior_buffer, 20);
        let w = r.shift.weak_value().unwrap().value;
        assert!((w.re - 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(r.shift.readout, Readout::A);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_shapes() {
        let extra = MAIN.replace("\"readout\"", "\"bogus\": 1, \"readout\"");
        assert!(ExperimentSpec::from_json(&extra).is_err());
        let bad = MAIN.replace("[[1,0],[0,0]],\n            \"beta\"", "[[1,0]],\n            \"beta\"");
        let spec = ExperimentSpec::from_json(&bad).unwrap();
        assert!(matches!(spec.resolve(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_non_hermitian_observable() {
        let text = MAIN.replace("[[[0,0],[1,0]], [[1,0],[0,0]]]", "[[[0,0],[1,0]], [[0,0],[0,0]]]");
        let spec = ExperimentSpec::from_json(&text).unwrap();
        assert!(matches!(spec.resolve(), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn coupling_mode_rules() {
        let mut spec = ExperimentSpec::from_json(MAIN).unwrap();
        spec.coupling.epsilon = Some(0.1);
        assert!(spec.strengths().is_err());
        spec.coupling.epsilon_list = None;
        spec.coupling.lambda_strong = Some(0.2);
        assert!(spec.strengths().is_err());
        spec.coupling.epsilon = None;
        assert_eq!(spec.strengths().unwrap(), (vec![0.2], CouplingMode::Strong));
        spec.coupling.lambda_strong = None;
        spec.coupling.epsilon = Some(-1.0);
        assert!(spec.strengths().is_err());
    }

    #[test]
    fn explicit_dimension_too_small_for_meter() {
        let mut spec = ExperimentSpec::from_json(MAIN).unwrap();
        spec.fock.dimension = Some(12);
        spec.fock.interior_buffer = Some(2);
        assert!(matches!(spec.resolve(), Err(Error::Truncation { .. })));
    }

    #[test]
    fn custom_generator_checked_on_load() {
        let mut spec = ExperimentSpec::from_json(MAIN).unwrap();
        spec.fock.dimension = Some(2);
        spec.fock.interior_buffer = Some(0);
        spec.meter = MeterBlock::Fock { n: 0 };
        spec.coupling.generator = GeneratorName::Custom;
        spec.coupling.generator_matrix = Some(vec![vec![[0., 0.], [1., 0.]], vec![[0., 0.], [0., 0.]]]);
        assert!(matches!(spec.resolve(), Err(Error::NonHermitianCustom { .. })));
        spec.coupling.generator_matrix = None;
        assert!(matches!(spec.resolve(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn translation_coupling_grows_dimension() {
        let mut spec = ExperimentSpec::from_json(MAIN).unwrap();
        spec.meter = MeterBlock::Fock { n: 0 };
        spec.coupling.generator = GeneratorName::P;
        spec.coupling.epsilon_list = Some(vec![5.0]);
        let cfg = spec.fock_config(0.0).unwrap();
        assert!(cfg.dimension > FockConfig::auto(0.0, 1e-12).unwrap().dimension);
    }

    #[test]
    fn echo_roundtrip() {
        let spec = ExperimentSpec::from_json(MAIN).unwrap();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(ExperimentSpec::from_json(&text).unwrap(), spec);
    }
}
