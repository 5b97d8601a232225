use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ModulusSpec;
use crate::error::{Error, Result};
use crate::measure::JumpMeasure;
use crate::quad;

/// Coefficient evaluators of the SDE. Outputs are written into caller buffers:
/// `drift` and the jump functions fill a `d`-vector, `diffusion` fills a row-major
/// `d × m` matrix. Jump functions default to zero.
pub trait Coefficients: Send + Sync {
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]);

    fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]);

    fn jump_small(&self, _t: f64, _x: &[f64], _mark: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn jump_big(&self, _t: f64, _x: &[f64], _mark: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
}

type VecFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
type JumpFn = dyn Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync;

/// [`Coefficients`] assembled from closures.
pub struct FnCoefficients {
    drift: Box<VecFn>,
    diffusion: Box<VecFn>,
    small: Option<Box<JumpFn>>,
    big: Option<Box<JumpFn>>,
}

impl FnCoefficients {
    pub fn new(
        drift: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        diffusion: impl Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self { drift: Box::new(drift), diffusion: Box::new(diffusion), small: None, big: None }
    }

    pub fn jump_small(mut self, f: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.small = Some(Box::new(f));
        self
    }

    pub fn jump_big(mut self, f: impl Fn(f64, &[f64], &[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        self.big = Some(Box::new(f));
        self
    }
}

impl Coefficients for FnCoefficients {
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, out)
    }

    fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(t, x, out)
    }

    fn jump_small(&self, t: f64, x: &[f64], mark: &[f64], out: &mut [f64]) {
        match &self.small {
            Some(f) => f(t, x, mark, out),
            None => out.fill(0.0),
        }
    }

    fn jump_big(&self, t: f64, x: &[f64], mark: &[f64], out: &mut [f64]) {
        match &self.big {
            Some(f) => f(t, x, mark, out),
            None => out.fill(0.0),
        }
    }
}

/// Which jump integral an atom belongs to. An atom is in the support of at most
/// one of `f₁` (compensated) and `f₂` (uncompensated).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupportTag {
    F1,
    F2,
    None,
}

/// Deterministic envelope function of time (`g` or `f` in the growth and
/// monotonicity conditions).
#[derive(Clone)]
pub enum Envelope {
    Constant(f64),
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl Envelope {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Envelope::Constant(c) => *c,
            Envelope::Function(f) => f(t),
        }
    }

    /// `∫_a^b envelope(s) ds`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        match self {
            Envelope::Constant(c) => c * (b - a),
            Envelope::Function(f) => quad::integrate(|s| f(s), a, b, 1e-10),
        }
    }
}

impl fmt::Debug for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Envelope::Constant(c) => write!(f, "Constant({c})"),
            Envelope::Function(_) => write!(f, "Function(..)"),
        }
    }
}

/// A complete model: dimensions, coefficient evaluators, the jump measure with its
/// support tags, and metadata used by the checks and experiments.
#[derive(Clone)]
pub struct CoefficientSet {
    name: String,
    params: BTreeMap<String, f64>,
    dim_state: usize,
    dim_noise: usize,
    coefficients: Arc<dyn Coefficients>,
    measure: JumpMeasure,
    support: Vec<SupportTag>,
    small_atoms: Vec<usize>,
    time_homogeneous: bool,
    g: Envelope,
    f: Envelope,
    modulus: ModulusSpec,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("dim_state", &self.dim_state)
            .field("dim_noise", &self.dim_noise)
            .field("measure", &self.measure)
            .field("support", &self.support)
            .field("time_homogeneous", &self.time_homogeneous)
            .field("g", &self.g)
            .field("f", &self.f)
            .field("modulus", &self.modulus)
            .finish_non_exhaustive()
    }
}

impl CoefficientSet {
    /// A jump-free, time-homogeneous model with envelopes `g = f = 1` and modulus
    /// `LINEAR(1)`.
    pub fn new(name: impl Into<String>, dim_state: usize, dim_noise: usize, coefficients: impl Coefficients + 'static) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
            dim_state,
            dim_noise,
            coefficients: Arc::new(coefficients),
            measure: JumpMeasure::empty(),
            support: Vec::new(),
            small_atoms: Vec::new(),
            time_homogeneous: true,
            g: Envelope::Constant(1.0),
            f: Envelope::Constant(1.0),
            modulus: ModulusSpec::Linear { c: 1.0 },
        }
    }

    /// The model with every coefficient identically zero.
    pub fn zero(dim_state: usize, dim_noise: usize) -> Self {
        let mut set = Self::new(
            "zero",
            dim_state,
            dim_noise,
            FnCoefficients::new(|_, _, out| out.fill(0.0), |_, _, out| out.fill(0.0)),
        );
        set.g = Envelope::Constant(0.0);
        set.f = Envelope::Constant(0.0);
        set
    }

    pub fn with_jumps(mut self, measure: JumpMeasure, support: Vec<SupportTag>) -> Result<Self> {
        if support.len() != measure.len() {
            return Err(Error::Model(format!(
                "{} support tags for {} atoms",
                support.len(),
                measure.len()
            )));
        }
        self.small_atoms = support
            .iter()
            .enumerate()
            .filter(|(_, t)| **t == SupportTag::F1)
            .map(|(i, _)| i)
            .collect();
        self.measure = measure;
        self.support = support;
        Ok(self)
    }

    pub fn with_envelopes(mut self, g: Envelope, f: Envelope) -> Self {
        self.g = g;
        self.f = f;
        self
    }

    pub fn with_modulus(mut self, modulus: ModulusSpec) -> Self {
        self.modulus = modulus;
        self
    }

    pub fn with_params(mut self, params: BTreeMap<String, f64>) -> Self {
        self.params = params;
        self
    }

    pub fn time_dependent(mut self) -> Self {
        self.time_homogeneous = false;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    pub fn dim_state(&self) -> usize {
        self.dim_state
    }

    pub fn dim_noise(&self) -> usize {
        self.dim_noise
    }

    pub fn measure(&self) -> &JumpMeasure {
        &self.measure
    }

    pub fn support(&self) -> &[SupportTag] {
        &self.support
    }

    /// Indices of the atoms tagged [`SupportTag::F1`].
    pub fn small_atoms(&self) -> &[usize] {
        &self.small_atoms
    }

    pub fn is_time_homogeneous(&self) -> bool {
        self.time_homogeneous
    }

    pub fn g(&self) -> &Envelope {
        &self.g
    }

    pub fn f(&self) -> &Envelope {
        &self.f
    }

    /// Modulus `η_R` for which the pair condition holds with envelope `g`.
    pub fn modulus(&self) -> ModulusSpec {
        self.modulus
    }

    pub fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.coefficients.drift(t, x, out)
    }

    pub fn diffusion(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.coefficients.diffusion(t, x, out)
    }

    /// `f₁(t, x, u_atom)`; zero unless the atom is tagged `F1`.
    pub fn jump_small(&self, t: f64, x: &[f64], atom: usize, out: &mut [f64]) {
        if self.support[atom] == SupportTag::F1 {
            self.coefficients.jump_small(t, x, &self.measure.atoms()[atom].mark, out)
        } else {
            out.fill(0.0)
        }
    }

    /// `f₂(t, x, u_atom)`; zero unless the atom is tagged `F2`.
    pub fn jump_big(&self, t: f64, x: &[f64], atom: usize, out: &mut [f64]) {
        if self.support[atom] == SupportTag::F2 {
            self.coefficients.jump_big(t, x, &self.measure.atoms()[atom].mark, out)
        } else {
            out.fill(0.0)
        }
    }

    /// The jump applied when `atom` fires: `f₁` or `f₂` according to its tag.
    pub fn jump(&self, t: f64, x: &[f64], atom: usize, out: &mut [f64]) {
        match self.support[atom] {
            SupportTag::F1 => self.coefficients.jump_small(t, x, &self.measure.atoms()[atom].mark, out),
            SupportTag::F2 => self.coefficients.jump_big(t, x, &self.measure.atoms()[atom].mark, out),
            SupportTag::None => out.fill(0.0),
        }
    }

    /// `Σ_{F1 atoms} rate · f₁(t, x, u)`, the drift correction of the compensated
    /// integral. `scratch` must have length `d`.
    pub fn compensator_drift(&self, t: f64, x: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        out.fill(0.0);
        let atoms = self.measure.atoms();
        for &k in &self.small_atoms {
            self.coefficients.jump_small(t, x, &atoms[k].mark, scratch);
            for (o, v) in out.iter_mut().zip(scratch.iter()) {
                *o += atoms[k].rate * v;
            }
        }
    }
}
