use std::collections::BTreeMap;

use super::{CoefficientSet, Coefficients, Envelope, ModulusSpec, SupportTag};
use crate::error::{Error, Result};
use crate::measure::{Atom, JumpMeasure};

/// A named built-in model with its parameter defaults.
pub struct ModelEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub defaults: &'static [(&'static str, f64)],
    build: fn(&BTreeMap<String, f64>) -> Result<CoefficientSet>,
}

/// Catalog of built-in models addressable by name.
pub struct Registry {
    entries: Vec<ModelEntry>,
}

pub fn build_registry() -> Registry {
    Registry {
        entries: vec![
            ModelEntry {
                name: "section4",
                description: "2-d jump-free model with superlinear diffusion and a strongly dissipative drift",
                defaults: &[("p", 3.0), ("K0", 4.0)],
                build: build_section4,
            },
            ModelEntry {
                name: "gbm_jump",
                description: "geometric Brownian motion with multiplicative jumps of size c·x at rate lambda",
                defaults: &[("mu", 0.1), ("s", 0.2), ("c", 0.5), ("lambda", 1.0)],
                build: build_gbm_jump,
            },
            ModelEntry {
                name: "bm",
                description: "standard d-dimensional Brownian motion",
                defaults: &[("d", 1.0)],
                build: build_bm,
            },
            ModelEntry {
                name: "ou_jump",
                description: "Ornstein-Uhlenbeck process with compensated jumps +a and -a_down",
                defaults: &[("theta", 1.0), ("s", 0.5), ("a", 0.5), ("a_down", 0.5), ("lambda", 1.0)],
                build: build_ou_jump,
            },
        ],
    }
}

impl Registry {
    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name).collect()
    }

    pub fn entries(&self) -> &[ModelEntry] {
        &self.entries
    }

    pub fn get(&self, name: &str) -> Result<&ModelEntry> {
        self.entries.iter().find(|e| e.name == name).ok_or_else(|| {
            Error::Model(format!("unknown model {name:?}; available: {{{}}}", self.names().join(", ")))
        })
    }

    /// Defaults overlaid with `overrides`. Unknown parameter names are rejected.
    pub fn resolve_params(&self, name: &str, overrides: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
        let entry = self.get(name)?;
        let mut params: BTreeMap<String, f64> =
            entry.defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        for (k, v) in overrides {
            match params.get_mut(k) {
                Some(slot) => *slot = *v,
                None => {
                    let known: Vec<_> = entry.defaults.iter().map(|(k, _)| *k).collect();
                    return Err(Error::Model(format!(
                        "model {name} has no parameter {k:?}; known: {{{}}}",
                        known.join(", ")
                    )));
                }
            }
        }
        Ok(params)
    }

    pub fn build(&self, name: &str, overrides: &BTreeMap<String, f64>) -> Result<CoefficientSet> {
        let params = self.resolve_params(name, overrides)?;
        let set = (self.get(name)?.build)(&params)?;
        Ok(set.with_params(params))
    }

    pub fn build_default(&self, name: &str) -> Result<CoefficientSet> {
        self.build(name, &BTreeMap::new())
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `σ(x)` rows `[x₁, x₂]/(1+|x|)` and `(1+|x|^{p/2−1})·[−x₂, x₁]`,
/// `b(x) = −K₀(1+|x|^{p−2})x`.
struct Section4 {
    p: f64,
    k0: f64,
}

impl Coefficients for Section4 {
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let r = norm(x);
        let k = -self.k0 * (1.0 + r.powf(self.p - 2.0));
        out[0] = k * x[0];
        out[1] = k * x[1];
    }

    fn diffusion(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let r = norm(x);
        let a = 1.0 / (1.0 + r);
        let c = 1.0 + r.powf(0.5 * self.p - 1.0);
        out[0] = a * x[0];
        out[1] = a * x[1];
        out[2] = -c * x[1];
        out[3] = c * x[0];
    }
}

// Envelopes: ‖σ(x)−σ(y)‖² + ⟨x−y, b(x)−b(y)⟩ ≤ 3|x−y|², so g = 3 with LINEAR(1);
// ‖σ‖² + 2⟨x,b⟩ ≤ 1 and ‖σ‖² ≤ 3(1+|x|^p), so f = 3 covers the growth conditions.
fn build_section4(p: &BTreeMap<String, f64>) -> Result<CoefficientSet> {
    let (exp, k0) = (p["p"], p["K0"]);
    if !(exp > 2.0 && exp < 4.0) {
        return Err(Error::Parameter(format!("section4 needs 2 < p < 4, got {exp}")));
    }
    if !(k0 >= 4.0 && k0.is_finite()) {
        return Err(Error::Parameter(format!("section4 needs K0 ≥ 4, got {k0}")));
    }
    Ok(CoefficientSet::new("section4", 2, 2, Section4 { p: exp, k0 })
        .with_envelopes(Envelope::Constant(3.0), Envelope::Constant(3.0))
        .with_modulus(ModulusSpec::Linear { c: 1.0 }))
}

/// `b = μx`, `σ = s·x`, `f₂(x, u) = c·x` on one atom of rate λ.
struct GbmJump {
    mu: f64,
    s: f64,
    c: f64,
}

impl Coefficients for GbmJump {
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.mu * x[0];
    }

    fn diffusion(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = self.s * x[0];
    }

    fn jump_big(&self, _t: f64, x: &[f64], _mark: &[f64], out: &mut [f64]) {
        out[0] = self.c * x[0];
    }
}

// Every condition is a multiple of |x|² or |x−y|² here:
// pair condition: (s² + 2μ + λc² + 2λc)|x−y|² → g with LINEAR(1);
// f covers C5 (same constant), C6 (s² + λ(2c + c²)²) and C7 at p = 2 (s² + λc² + λ²c²).
fn build_gbm_jump(p: &BTreeMap<String, f64>) -> Result<CoefficientSet> {
    let (mu, s, c, lambda) = (p["mu"], p["s"], p["c"], p["lambda"]);
    if !(c > -1.0) {
        return Err(Error::Parameter(format!("gbm_jump needs c > -1, got {c}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Parameter(format!("gbm_jump needs lambda ≥ 0, got {lambda}")));
    }
    let pair = s * s + 2.0 * mu + lambda * c * c + 2.0 * lambda * c;
    let growth = pair
        .max(s * s + lambda * (2.0 * c + c * c).powi(2))
        .max(s * s + lambda * c * c + (lambda * c).powi(2));
    let measure = JumpMeasure::new(vec![Atom::scalar(1.0, lambda)])?;
    CoefficientSet::new("gbm_jump", 1, 1, GbmJump { mu, s, c })
        .with_jumps(measure, vec![SupportTag::F2])
        .map(|set| {
            set.with_envelopes(Envelope::Constant(pair.max(0.0)), Envelope::Constant(growth.max(0.0)))
                .with_modulus(ModulusSpec::Linear { c: 1.0 })
        })
}

struct Brownian;

impl Coefficients for Brownian {
    fn drift(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }

    fn diffusion(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        let d = x.len();
        out.fill(0.0);
        for i in 0..d {
            out[i * d + i] = 1.0;
        }
    }
}

fn build_bm(p: &BTreeMap<String, f64>) -> Result<CoefficientSet> {
    let d = p["d"];
    if !(d >= 1.0 && d.fract() == 0.0 && d <= 64.0) {
        return Err(Error::Parameter(format!("bm needs an integer dimension 1 ≤ d ≤ 64, got {d}")));
    }
    let d = d as usize;
    Ok(CoefficientSet::new("bm", d, d, Brownian)
        .with_envelopes(Envelope::Constant(0.0), Envelope::Constant(d as f64)))
}

/// `b = −θx`, `σ = s`, `f₁(x, u) = u` on atoms `+a` and `−a_down`, both at rate λ.
struct OuJump {
    theta: f64,
    s: f64,
}

impl Coefficients for OuJump {
    fn drift(&self, _t: f64, x: &[f64], out: &mut [f64]) {
        out[0] = -self.theta * x[0];
    }

    fn diffusion(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out[0] = self.s;
    }

    fn jump_small(&self, _t: f64, _x: &[f64], mark: &[f64], out: &mut [f64]) {
        out[0] = mark[0];
    }
}

// Pair condition: −2θ|x−y|² ≤ 0, so g = 0 for θ ≥ 0. f bounds C5–C7 through
// (2|x||u| + u²)² ≤ (8u² + 2u⁴)(1 + |x|²)².
fn build_ou_jump(p: &BTreeMap<String, f64>) -> Result<CoefficientSet> {
    let (theta, s, a, a_down, lambda) = (p["theta"], p["s"], p["a"], p["a_down"], p["lambda"]);
    if !(lambda >= 0.0) {
        return Err(Error::Parameter(format!("ou_jump needs lambda ≥ 0, got {lambda}")));
    }
    let measure = JumpMeasure::new(vec![Atom::scalar(a, lambda), Atom::scalar(-a_down, lambda)])?;
    let growth = s * s + lambda * [a, a_down].iter().map(|u| 8.0 * u * u + 2.0 * u.powi(4)).sum::<f64>();
    let g = (-2.0 * theta).max(0.0);
    CoefficientSet::new("ou_jump", 1, 1, OuJump { theta, s })
        .with_jumps(measure, vec![SupportTag::F1, SupportTag::F1])
        .map(|set| {
            set.with_envelopes(Envelope::Constant(g), Envelope::Constant(growth))
                .with_modulus(ModulusSpec::Linear { c: 1.0 })
        })
}
