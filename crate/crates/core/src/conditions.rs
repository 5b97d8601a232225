//! Sampled residual checks of the monotonicity, growth, ellipticity and
//! non-confluence hypotheses.
//!
//! Every check evaluates a residual `LHS − RHS` at each element of a [`SampleGrid`]
//! and reports the worst one. A positive residual is a violation; a report with
//! `satisfied = true` only means no violation was found on the grid.
//!
//! | id  | elements | residual |
//! |-----|----------|----------|
//! | C3  | pairs  | `‖Δσ‖² + 2⟨Δx, Δb⟩ + Σᵢ∫|Δfᵢ|²dν + 2∫⟨Δx, Δf₂⟩dν − g(t)·η(|Δx|²)` |
//! | C9  | pairs  | as C3 with weight 1 on both inner products |
//! | C10 | pairs  | `‖Δσ‖² − 2/(2K−1)⟨Δx, Δb⟩ + 1/(2K−1)∫(|Δf₂|² − |Δf₁|² + 2⟨Δx, Δf₂⟩)dν − η(|Δx|²)` |
//! | C11 | pairs  | `−min_u (|Δf₂|² + 2⟨Δx, Δf₂⟩)` |
//! | C5  | points | `‖σ‖² + 2⟨x, b⟩ + Σᵢ∫|fᵢ|²dν + 2∫⟨x, f₂⟩dν − f(t)(|x|²+1)` |
//! | C6  | points | `|σᵀx|² + Σᵢ∫(2⟨x, fᵢ⟩ + |fᵢ|²)²dν − f(t)(|x|²+1)²` |
//! | C7  | points | `‖σ‖² + Σᵢ∫|fᵢ|²dν + (∫|f₂|dν)² − f(t)(|x|^p+1)` |
//! | C8  | points | `‖σ⁺‖² − λ` |
//! | LIN | points | `‖σ‖²/(1+|x|²) − k` |

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::pseudo_inverse;
use crate::error::{Error, Result};
use crate::model::{CoefficientSet, Envelope, ModulusSpec};

/// Absolute tolerance below which a maximal residual counts as satisfied.
pub const SATISFACTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConditionId {
    C3,
    C5,
    C6,
    C7,
    C8,
    C9,
    C10,
    C11,
    LIN,
}

impl ConditionId {
    pub const ALL: [ConditionId; 9] = [
        ConditionId::C3,
        ConditionId::C5,
        ConditionId::C6,
        ConditionId::C7,
        ConditionId::C8,
        ConditionId::C9,
        ConditionId::C10,
        ConditionId::C11,
        ConditionId::LIN,
    ];

    pub fn is_pair_condition(self) -> bool {
        matches!(self, ConditionId::C3 | ConditionId::C9 | ConditionId::C10 | ConditionId::C11)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConditionId::C3 => "C3",
            ConditionId::C5 => "C5",
            ConditionId::C6 => "C6",
            ConditionId::C7 => "C7",
            ConditionId::C8 => "C8",
            ConditionId::C9 => "C9",
            ConditionId::C10 => "C10",
            ConditionId::C11 => "C11",
            ConditionId::LIN => "LIN",
        }
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConditionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        ConditionId::ALL.into_iter().find(|c| c.as_str() == up).ok_or_else(|| {
            let known: Vec<_> = ConditionId::ALL.iter().map(|c| c.as_str()).collect();
            Error::Usage(format!("unknown condition id '{s}', expected one of {{{}}}", known.join(", ")))
        })
    }
}

/// Points, pairs and times at which conditions are probed.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGrid {
    dim: usize,
    radius: f64,
    points: Vec<Vec<f64>>,
    pairs: Vec<(Vec<f64>, Vec<f64>)>,
    times: Vec<f64>,
}

const PRIMES: [u64; 32] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109,
    113, 127, 131,
];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Halton points of dimension `dim` mapped to the cube `[-radius, radius]^dim`, keeping
/// those whose blocks of `block` coordinates all lie in the ball.
fn halton_in_balls(count: usize, dim: usize, block: usize, radius: f64) -> Result<Vec<Vec<f64>>> {
    if dim > PRIMES.len() {
        return Err(Error::Parameter(format!("low-discrepancy sampling supports at most {} coordinates", PRIMES.len())));
    }
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    let limit = 1000 * (count as u64 + 1) * (1u64 << dim.min(20));
    while out.len() < count {
        if i > limit {
            return Err(Error::Parameter("ball rejection sampling did not converge".into()));
        }
        let v: Vec<f64> = PRIMES[..dim].iter().map(|&b| radius * (2.0 * radical_inverse(i, b) - 1.0)).collect();
        i += 1;
        if v.chunks(block).all(|c| norm(c) <= radius) {
            out.push(v);
        }
    }
    Ok(out)
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn pair_key(x: &[f64], y: &[f64]) -> (Vec<u64>, Vec<u64>) {
    let a: Vec<u64> = x.iter().map(|v| (v + 0.0).to_bits()).collect();
    let b: Vec<u64> = y.iter().map(|v| (v + 0.0).to_bits()).collect();
    if a <= b { (a, b) } else { (b, a) }
}

impl SampleGrid {
    /// Adversarial points: the origin, `±radius·eᵢ`, `±radius/2·eᵢ` and a cluster at
    /// radius `1e-6` around the origin.
    pub fn adversarial_points(dim: usize, radius: f64) -> Vec<Vec<f64>> {
        let mut pts = vec![vec![0.0; dim]];
        for scale in [radius, 0.5 * radius, 1e-6_f64.min(radius)] {
            for i in 0..dim {
                for sign in [1.0, -1.0] {
                    let mut e = vec![0.0; dim];
                    e[i] = sign * scale;
                    pts.push(e);
                }
            }
        }
        if dim >= 2 {
            let s = 1e-6_f64.min(radius) / (dim as f64).sqrt();
            pts.push(vec![s; dim]);
            pts.push(vec![-s; dim]);
        }
        pts
    }

    /// Deterministic grid: `n_points` Halton points and `n_pairs` Halton pairs in the
    /// ball of radius `radius`, followed by the adversarial points and all pairs
    /// among them. Times default to `{0}`.
    pub fn low_discrepancy(dim: usize, radius: f64, n_points: usize, n_pairs: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Parameter("grid dimension must be at least 1".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Parameter(format!("grid radius must be positive, got {radius}")));
        }
        let adv = Self::adversarial_points(dim, radius);
        let mut points = halton_in_balls(n_points, dim, dim, radius)?;
        points.extend(adv.iter().cloned());
        let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = halton_in_balls(n_pairs, 2 * dim, dim, radius)?
            .into_iter()
            .map(|v| (v[..dim].to_vec(), v[dim..].to_vec()))
            .collect();
        for (i, a) in adv.iter().enumerate() {
            for b in &adv[i + 1..] {
                pairs.push((a.clone(), b.clone()));
            }
        }
        Self::new(dim, radius, points, pairs, vec![0.0])
    }

    /// Explicit grid; duplicate unordered pairs are dropped and every element must lie
    /// in the closed ball.
    pub fn new(
        dim: usize,
        radius: f64,
        points: Vec<Vec<f64>>,
        pairs: Vec<(Vec<f64>, Vec<f64>)>,
        times: Vec<f64>,
    ) -> Result<Self> {
        let inside = |x: &Vec<f64>| -> Result<()> {
            if x.len() != dim {
                return Err(Error::Model(format!("grid point has dimension {}, expected {dim}", x.len())));
            }
            if !(norm(x) <= radius * (1.0 + 1e-12)) {
                return Err(Error::Parameter(format!("grid point {x:?} lies outside the ball of radius {radius}")));
            }
            Ok(())
        };
        for p in &points {
            inside(p)?;
        }
        let mut seen = HashSet::new();
        let mut unique = Vec::with_capacity(pairs.len());
        for (x, y) in pairs {
            inside(&x)?;
            inside(&y)?;
            if seen.insert(pair_key(&x, &y)) {
                unique.push((x, y));
            }
        }
        if times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Parameter("time set must be nonempty and nonnegative".into()));
        }
        Ok(Self { dim, radius, points, pairs: unique, times })
    }

    pub fn with_times(mut self, times: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(Error::Parameter("time set must be nonempty and nonnegative".into()));
        }
        self.times = times;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn pairs(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.pairs
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

/// Moduli, envelopes and constants the residuals are measured against.
#[derive(Clone)]
pub struct CheckParams {
    pub modulus: ModulusSpec,
    pub g: Envelope,
    pub f: Envelope,
    /// Growth exponent of C7.
    pub p: f64,
    /// Ellipticity bound of C8.
    pub lambda: f64,
    /// Constant `K` of C10.
    pub k: f64,
    /// Reference constant subtracted by the LIN probe.
    pub lin_k: f64,
}

impl fmt::Debug for CheckParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CheckParams")
            .field("modulus", &self.modulus)
            .field("p", &self.p)
            .field("lambda", &self.lambda)
            .field("k", &self.k)
            .field("lin_k", &self.lin_k)
            .finish_non_exhaustive()
    }
}

impl Default for CheckParams {
    fn default() -> Self {
        Self {
            modulus: ModulusSpec::Linear { c: 1.0 },
            g: Envelope::Constant(1.0),
            f: Envelope::Constant(1.0),
            p: 2.0,
            lambda: 10.0,
            k: 2.0,
            lin_k: 10.0,
        }
    }
}

impl CheckParams {
    /// Defaults taken from the model's modulus, envelopes and (if present) its `p`.
    pub fn for_model(model: &CoefficientSet) -> Self {
        Self {
            modulus: model.modulus(),
            g: model.g().clone(),
            f: model.f().clone(),
            p: model.params().get("p").copied().unwrap_or(2.0),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.modulus.validate()?;
        if !(self.p > 0.0) {
            return Err(Error::Parameter(format!("growth exponent p must be positive, got {}", self.p)));
        }
        if !(self.k > 0.5) {
            return Err(Error::Parameter(format!("K must exceed 1/2, got {}", self.k)));
        }
        if !self.lambda.is_finite() || !self.lin_k.is_finite() {
            return Err(Error::Parameter("λ and the LIN constant must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Witness {
    Point { t: f64, x: Vec<f64> },
    Pair { t: f64, x: Vec<f64>, y: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub condition_id: ConditionId,
    #[serde(with = "crate::stats::float_repr")]
    pub max_residual: f64,
    pub witness: Witness,
    pub satisfied: bool,
    pub grid_size: usize,
}

struct Scratch {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: Vec<f64>,
}

impl Scratch {
    fn new(model: &CoefficientSet) -> Self {
        let (d, m) = (model.dim_state(), model.dim_noise());
        let n = d * m.max(1);
        Self { a: vec![0.0; n], b: vec![0.0; n], c: vec![0.0; d], d: vec![0.0; d] }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sq(a: &[f64]) -> f64 {
    dot(a, a)
}

fn diff_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn diff_dot(dx: &[f64], a: &[f64], b: &[f64]) -> f64 {
    dx.iter().zip(a.iter().zip(b)).map(|(d, (x, y))| d * (x - y)).sum()
}

fn pair_residual(
    id: ConditionId,
    model: &CoefficientSet,
    params: &CheckParams,
    t: f64,
    x: &[f64],
    y: &[f64],
    s: &mut Scratch,
) -> f64 {
    let dx: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let r2 = sq(&dx);
    let atoms = model.measure().atoms();
    // per-atom f₁ and f₂ differences
    let mut f1_sq = 0.0;
    let mut f2_sq = 0.0;
    let mut f2_dot = 0.0;
    let mut c11_min = f64::INFINITY;
    for (k, atom) in atoms.iter().enumerate() {
        model.jump_small(t, x, k, &mut s.c);
        model.jump_small(t, y, k, &mut s.d);
        let a1 = diff_sq(&s.c, &s.d);
        model.jump_big(t, x, k, &mut s.c);
        model.jump_big(t, y, k, &mut s.d);
        let a2 = diff_sq(&s.c, &s.d);
        let i2 = diff_dot(&dx, &s.c, &s.d);
        f1_sq += atom.rate * a1;
        f2_sq += atom.rate * a2;
        f2_dot += atom.rate * i2;
        c11_min = c11_min.min(a2 + 2.0 * i2);
    }
    if id == ConditionId::C11 {
        return if atoms.is_empty() { 0.0 } else { 0.0 - c11_min + 0.0 };
    }
    model.diffusion(t, x, &mut s.a);
    model.diffusion(t, y, &mut s.b);
    let dsigma = diff_sq(&s.a, &s.b);
    model.drift(t, x, &mut s.c);
    model.drift(t, y, &mut s.d);
    let db = diff_dot(&dx, &s.c, &s.d);
    let eta = params.modulus.value(r2);
    match id {
        ConditionId::C3 => dsigma + 2.0 * db + f1_sq + f2_sq + 2.0 * f2_dot - params.g.eval(t) * eta,
        ConditionId::C9 => dsigma + db + f1_sq + f2_sq + f2_dot - params.g.eval(t) * eta,
        ConditionId::C10 => {
            let w = 1.0 / (2.0 * params.k - 1.0);
            dsigma - 2.0 * w * db + w * (f2_sq - f1_sq + 2.0 * f2_dot) - eta
        }
        _ => unreachable!("point condition evaluated on a pair"),
    }
}

fn point_residual(
    id: ConditionId,
    model: &CoefficientSet,
    params: &CheckParams,
    t: f64,
    x: &[f64],
    s: &mut Scratch,
) -> f64 {
    let (d, m) = (model.dim_state(), model.dim_noise());
    let x2 = sq(x);
    model.diffusion(t, x, &mut s.a);
    let sigma = &s.a[..d * m];
    match id {
        ConditionId::C8 => {
            let li = pseudo_inverse(sigma, d, m);
            if li.norm_sq.is_nan() { f64::INFINITY } else { li.norm_sq - params.lambda }
        }
        ConditionId::LIN => sq(sigma) / (1.0 + x2) - params.lin_k,
        _ => {
            let atoms = model.measure().atoms();
            let mut f_sq = 0.0;
            let mut f2_dot = 0.0;
            let mut f2_abs = 0.0;
            let mut quartic = 0.0;
            for (k, atom) in atoms.iter().enumerate() {
                model.jump_small(t, x, k, &mut s.c);
                model.jump_big(t, x, k, &mut s.d);
                let (n1, n2) = (sq(&s.c), sq(&s.d));
                let (i1, i2) = (dot(x, &s.c), dot(x, &s.d));
                f_sq += atom.rate * (n1 + n2);
                f2_dot += atom.rate * i2;
                f2_abs += atom.rate * n2.sqrt();
                quartic += atom.rate * ((2.0 * i1 + n1).powi(2) + (2.0 * i2 + n2).powi(2));
            }
            let ft = params.f.eval(t);
            match id {
                ConditionId::C5 => {
                    model.drift(t, x, &mut s.c);
                    sq(sigma) + 2.0 * dot(x, &s.c) + f_sq + 2.0 * f2_dot - ft * (x2 + 1.0)
                }
                ConditionId::C6 => {
                    // |σᵀx|², σ row-major d × m
                    let st_x: f64 = (0..m).map(|j| (0..d).map(|i| sigma[i * m + j] * x[i]).sum::<f64>().powi(2)).sum();
                    st_x + quartic - ft * (x2 + 1.0).powi(2)
                }
                ConditionId::C7 => sq(sigma) + f_sq + f2_abs * f2_abs - ft * (x2.sqrt().powf(params.p) + 1.0),
                _ => unreachable!("pair condition evaluated on a point"),
            }
        }
    }
}

fn check_shapes(id: ConditionId, model: &CoefficientSet, grid: &SampleGrid) -> Result<()> {
    if grid.dim() != model.dim_state() {
        return Err(Error::Model(format!(
            "grid dimension {} does not match model dimension {}",
            grid.dim(),
            model.dim_state()
        )));
    }
    if id == ConditionId::C8 && model.dim_noise() < model.dim_state() {
        return Err(Error::Shape(format!(
            "ellipticity needs m ≥ d, got d = {}, m = {}",
            model.dim_state(),
            model.dim_noise()
        )));
    }
    Ok(())
}

fn times_for<'g>(model: &CoefficientSet, grid: &'g SampleGrid) -> &'g [f64] {
    if model.is_time_homogeneous() { &[0.0] } else { grid.times() }
}

/// Residual of `id` at a single witness.
pub fn evaluate_residual(
    id: ConditionId,
    model: &CoefficientSet,
    params: &CheckParams,
    witness: &Witness,
) -> Result<f64> {
    params.validate()?;
    let mut s = Scratch::new(model);
    match (witness, id.is_pair_condition()) {
        (Witness::Pair { t, x, y }, true) => Ok(pair_residual(id, model, params, *t, x, y, &mut s)),
        (Witness::Point { t, x }, false) => Ok(point_residual(id, model, params, *t, x, &mut s)),
        _ => Err(Error::Usage(format!("witness kind does not match condition {id}"))),
    }
}

/// Worst residual of `id` over the grid.
pub fn check_condition(
    id: ConditionId,
    model: &CoefficientSet,
    params: &CheckParams,
    grid: &SampleGrid,
) -> Result<ConditionReport> {
    params.validate()?;
    check_shapes(id, model, grid)?;
    let times = times_for(model, grid);
    let n_elems = if id.is_pair_condition() { grid.pairs().len() } else { grid.points().len() };
    if n_elems == 0 {
        return Err(Error::Parameter(format!("grid has no {} for {id}", if id.is_pair_condition() { "pairs" } else { "points" })));
    }
    let total = n_elems * times.len();
    let residuals: Vec<f64> = (0..total)
        .into_par_iter()
        .map_init(
            || Scratch::new(model),
            |s, k| {
                let (ti, e) = (k / n_elems, k % n_elems);
                let t = times[ti];
                if id.is_pair_condition() {
                    let (x, y) = &grid.pairs()[e];
                    pair_residual(id, model, params, t, x, y, s)
                } else {
                    point_residual(id, model, params, t, &grid.points()[e], s)
                }
            },
        )
        .collect();
    // first occurrence of the maximum; NaN counts as a violation
    let mut best = 0usize;
    for (k, r) in residuals.iter().enumerate() {
        let cur = residuals[best];
        if !cur.is_nan() && (r.is_nan() || *r > cur) {
            best = k;
        }
    }
    let max_residual = residuals[best];
    let (ti, e) = (best / n_elems, best % n_elems);
    let t = times[ti];
    let witness = if id.is_pair_condition() {
        let (x, y) = &grid.pairs()[e];
        Witness::Pair { t, x: x.clone(), y: y.clone() }
    } else {
        Witness::Point { t, x: grid.points()[e].clone() }
    };
    Ok(ConditionReport {
        condition_id: id,
        max_residual,
        witness,
        satisfied: max_residual <= SATISFACTION_TOL,
        grid_size: total,
    })
}

/// `‖σ(r·e₁)‖² / (1 + r²)` for each radius.
pub fn linear_growth_profile(model: &CoefficientSet, radii: &[f64]) -> Vec<(f64, f64)> {
    let (d, m) = (model.dim_state(), model.dim_noise());
    let mut sigma = vec![0.0; d * m];
    radii
        .iter()
        .map(|&r| {
            let mut x = vec![0.0; d];
            x[0] = r;
            model.diffusion(0.0, &x, &mut sigma);
            (r, sq(&sigma) / (1.0 + r * r))
        })
        .collect()
}
