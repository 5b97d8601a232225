//! Monte Carlo harnesses: stochastic continuity, non-confluence, maximal moments,
//! the Girsanov bridge and irreducibility.
//!
//! Every path `i` draws its noise from the streams keyed by `(seed, i)`, paths run
//! in parallel, and per-path results are reduced in index order, so a summary does
//! not depend on the number of worker threads.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::engine::{self, dist_sq, drive, norm, pseudo_inverse, Flow, Integrator, DEFAULT_EXPLOSION_RADIUS};
use crate::error::{Error, Result};
use crate::measure::{NoiseRealization, TimeGrid, TIME_TOL};
use crate::model::{CoefficientSet, ModulusSpec, TestFunction};
use crate::quad;
use crate::stats::{clopper_pearson, float_repr};
pub use crate::stats::Estimate;

pub const SCHEMA_VERSION: u32 = 1;
/// Log-densities below this are recorded as density 0.
pub const LOG_DENSITY_FLOOR: f64 = -700.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    /// Base steps over the experiment horizon.
    pub n_steps: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Noise is drawn on a grid `noise_refine` times finer and summed down, so runs
    /// with `n_steps·noise_refine` fixed share one Brownian path.
    pub noise_refine: usize,
    pub explosion_radius: f64,
}

impl McConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64) -> Self {
        Self { n_paths, n_steps, seed, threads: None, noise_refine: 1, explosion_radius: DEFAULT_EXPLOSION_RADIUS }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    pub fn with_noise_refine(mut self, factor: usize) -> Self {
        self.noise_refine = factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::Parameter("n_paths must be at least 1".into()));
        }
        if self.n_steps == 0 || self.noise_refine == 0 {
            return Err(Error::Parameter("n_steps and noise_refine must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Parameter("thread count must be at least 1".into()));
        }
        if !(self.explosion_radius > 0.0) {
            return Err(Error::Parameter("explosion radius must be positive".into()));
        }
        Ok(())
    }

    fn metadata(&self) -> Value {
        json!({
            "n_steps": self.n_steps,
            "noise_refine": self.noise_refine,
            "explosion_radius": self.explosion_radius,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundComparison {
    pub name: String,
    #[serde(with = "float_repr")]
    pub empirical: f64,
    #[serde(with = "float_repr")]
    pub bound: f64,
    pub satisfied: bool,
    /// Informational comparisons carry estimated constants on the bound side.
    #[serde(default)]
    pub indicative: bool,
}

impl BoundComparison {
    fn upper(name: impl Into<String>, empirical: f64, bound: f64) -> Self {
        Self { name: name.into(), empirical, bound, satisfied: empirical <= bound, indicative: false }
    }

    fn indicative(mut self) -> Self {
        self.indicative = true;
        self
    }
}

/// Per-path statistics, written as CSV with a leading `path_id` column.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl PathTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "path_id,{}", self.columns.join(","))?;
        for (i, row) in self.rows.iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{i},{}", cells.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub experiment_id: String,
    pub model: String,
    pub estimates: BTreeMap<String, Estimate>,
    pub bound_comparisons: Vec<BoundComparison>,
    pub n_paths: usize,
    pub seed: u64,
    pub metadata: BTreeMap<String, Value>,
    #[serde(skip)]
    pub per_path: PathTable,
}

impl ExperimentSummary {
    fn new(id: &str, model: &CoefficientSet, mc: &McConfig) -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert("mc".to_string(), mc.metadata());
        metadata.insert("model_params".to_string(), json!(model.params()));
        Self {
            schema_version: SCHEMA_VERSION,
            experiment_id: id.to_string(),
            model: model.name().to_string(),
            estimates: BTreeMap::new(),
            bound_comparisons: Vec::new(),
            n_paths: mc.n_paths,
            seed: mc.seed,
            metadata,
            per_path: PathTable::default(),
        }
    }

    pub fn estimate(&self, key: &str) -> Option<Estimate> {
        self.estimates.get(key).copied()
    }

    pub fn comparison(&self, name: &str) -> Option<&BoundComparison> {
        self.bound_comparisons.iter().find(|c| c.name == name)
    }

    /// All non-indicative comparisons satisfied.
    pub fn all_satisfied(&self) -> bool {
        self.bound_comparisons.iter().filter(|c| !c.indicative).all(|c| c.satisfied)
    }

    fn put(&mut self, key: impl Into<String>, e: Estimate) {
        self.estimates.insert(key.into(), e);
    }

    fn meta(&mut self, key: &str, v: Value) {
        self.metadata.insert(key.to_string(), v);
    }
}

/// Runs `f(path)` for every path and returns the results in path order.
pub fn run_paths<T: Send>(mc: &McConfig, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    mc.validate()?;
    let job = || (0..mc.n_paths as u64).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match mc.threads {
        None => job(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Experiment(format!("cannot build thread pool: {e}")))?
            .install(job),
    }
}

/// Noise of one path on `[0, horizon]` with `mc.n_steps` base steps.
pub fn path_noise(model: &CoefficientSet, mc: &McConfig, horizon: f64, path: u64) -> Result<NoiseRealization> {
    let fine = TimeGrid::uniform(horizon, mc.n_steps * mc.noise_refine)?;
    let noise = NoiseRealization::generate(model.measure(), &fine, model.dim_noise(), mc.seed, path)?;
    if mc.noise_refine > 1 {
        noise.coarsen(mc.noise_refine)
    } else {
        Ok(noise)
    }
}

fn check_dim(model: &CoefficientSet, label: &str, x: &[f64]) -> Result<()> {
    if x.len() != model.dim_state() {
        return Err(Error::Model(format!("{label} has dimension {}, model has {}", x.len(), model.dim_state())));
    }
    Ok(())
}

fn positive(label: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Parameter(format!("{label} must be positive, got {v}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// stochastic continuity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuitySpec {
    pub x: Vec<f64>,
    /// Ladder of second initial values.
    pub ys: Vec<Vec<f64>>,
    pub t: f64,
    pub eps_dist: f64,
    /// Overrides `δ = |x − y|` on every rung.
    pub delta: Option<f64>,
    /// Defaults to the model's modulus.
    pub modulus: Option<ModulusSpec>,
}

/// `P(sup_{s ≤ t ∧ τ_R} |X_s(x) − X_s(y)| ≥ ε)` for each `y` on the ladder, against
/// `(δ + C_t)/φ_δ(ε²)` with `C_t = ∫₀ᵗ g`.
pub fn run_continuity(model: &CoefficientSet, spec: &ContinuitySpec, mc: &McConfig) -> Result<ExperimentSummary> {
    check_dim(model, "x", &spec.x)?;
    for y in &spec.ys {
        check_dim(model, "y", y)?;
    }
    if spec.ys.is_empty() {
        return Err(Error::Parameter("continuity ladder is empty".into()));
    }
    positive("t", spec.t)?;
    positive("eps_dist", spec.eps_dist)?;
    if let Some(d) = spec.delta {
        positive("delta", d)?;
    }
    let modulus = spec.modulus.unwrap_or_else(|| model.modulus());
    modulus.validate()?;
    let eps_sq = spec.eps_dist * spec.eps_dist;

    let hits: Vec<Vec<bool>> = run_paths(mc, |path| {
        let noise = path_noise(model, mc, spec.t, path)?;
        spec.ys
            .iter()
            .map(|y| {
                let mut states = vec![spec.x.clone(), y.clone()];
                let mut hit = false;
                drive(model, &noise, spec.t, 0.0, &mut states, mc.explosion_radius, |v| {
                    if v.exploded.iter().any(|e| *e) {
                        return Flow::Stop;
                    }
                    if dist_sq(&v.states[0], &v.states[1]) >= eps_sq {
                        hit = true;
                        return Flow::Stop;
                    }
                    Flow::Continue
                })?;
                Ok(hit)
            })
            .collect()
    })?;

    let mut s = ExperimentSummary::new("continuity", model, mc);
    let c_t = model.g().integral(0.0, spec.t);
    s.put("C_t", Estimate::exact(c_t));
    let mut rungs = Vec::new();
    let mut p_hats = Vec::new();
    for (k, y) in spec.ys.iter().enumerate() {
        let n_hit = hits.iter().filter(|h| h[k]).count();
        let p = Estimate::proportion(n_hit, mc.n_paths);
        s.put(format!("rung{k}.p_hat"), p);
        p_hats.push(p.value);
        let gap = dist_sq(&spec.x, y).sqrt();
        let delta = spec.delta.unwrap_or(gap);
        let mut rung = json!({ "y": y, "distance": gap, "delta": delta, "hits": n_hit });
        if delta > 0.0 {
            let phi = TestFunction::continuity(delta, modulus)?;
            let bound = (delta + c_t) / phi.eval(eps_sq)?;
            let printed = phi.inverse(eps_sq)? * (delta + c_t);
            s.put(format!("rung{k}.bound"), Estimate::exact(bound));
            s.put(format!("rung{k}.printed_bound"), Estimate::exact(printed));
            s.bound_comparisons.push(BoundComparison::upper(format!("rung{k}"), p.value, bound));
        } else {
            rung["bound"] = json!("undefined for δ = 0");
        }
        rungs.push(rung);
    }
    let nonincreasing = p_hats.windows(2).all(|w| w[1] <= w[0]);
    s.meta("rungs", json!(rungs));
    s.meta("modulus", json!(modulus.to_string()));
    s.meta("nonincreasing", json!(nonincreasing));
    s.per_path = PathTable {
        columns: (0..spec.ys.len()).map(|k| format!("hit_rung{k}")).collect(),
        rows: hits.iter().map(|h| h.iter().map(|&b| f64::from(u8::from(b))).collect()).collect(),
    };
    Ok(s)
}

// ---------------------------------------------------------------------------
// non-confluence

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonconfluenceSpec {
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub horizon: f64,
    pub k: f64,
    pub gamma: ModulusSpec,
    pub delta: f64,
    pub eps_levels: Vec<f64>,
}

impl NonconfluenceSpec {
    pub fn new(x0: Vec<f64>, y0: Vec<f64>, horizon: f64) -> Self {
        Self {
            x0,
            y0,
            horizon,
            k: 2.0,
            gamma: ModulusSpec::Linear { c: 1.0 },
            delta: 1e-4,
            eps_levels: vec![1e-2, 1e-4, 1e-6],
        }
    }
}

/// Minimum coupled distance before `τ ∧ τ_R ∧ T` (with `τ` the first time the distance
/// reaches `2|x₀ − y₀|`) and `E[φ_δ(ξ_{T∧τ∧τ_R})]` against `φ_δ(c₀)·e^{(2K−1)T}`.
pub fn run_nonconfluence(model: &CoefficientSet, spec: &NonconfluenceSpec, mc: &McConfig) -> Result<ExperimentSummary> {
    check_dim(model, "x0", &spec.x0)?;
    check_dim(model, "y0", &spec.y0)?;
    let c0 = dist_sq(&spec.x0, &spec.y0);
    if c0 == 0.0 {
        return Err(Error::Usage("x0 = y0: non-confluence is vacuous".into()));
    }
    positive("horizon", spec.horizon)?;
    positive("delta", spec.delta)?;
    spec.gamma.check_k(spec.k)?;
    let phi = TestFunction::confluence(spec.delta, c0, spec.gamma)?;
    let tau_sq = 4.0 * c0;

    // (min distance, ξ at the stopping time, stopped by τ)
    let per_path: Vec<(f64, f64, bool)> = run_paths(mc, |path| {
        let noise = path_noise(model, mc, spec.horizon, path)?;
        let mut states = vec![spec.x0.clone(), spec.y0.clone()];
        let mut min_sq = c0;
        let mut last = c0;
        let mut tau = false;
        drive(model, &noise, spec.horizon, 0.0, &mut states, mc.explosion_radius, |v| {
            if v.exploded.iter().any(|e| *e) {
                return Flow::Stop;
            }
            let xi = dist_sq(&v.states[0], &v.states[1]);
            last = xi;
            min_sq = min_sq.min(xi);
            if xi >= tau_sq {
                tau = true;
                return Flow::Stop;
            }
            Flow::Continue
        })?;
        Ok((min_sq.sqrt(), last, tau))
    })?;

    let mut s = ExperimentSummary::new("nonconfluence", model, mc);
    let mins: Vec<f64> = per_path.iter().map(|p| p.0).collect();
    let phis: Vec<f64> = per_path.iter().map(|p| phi.eval(p.1)).collect::<Result<_>>()?;
    s.put("min_distance.mean", Estimate::from_samples(&mins));
    s.put("min_distance.min", Estimate::exact(mins.iter().copied().fold(f64::INFINITY, f64::min)));
    let tau_frac = per_path.iter().filter(|p| p.2).count();
    s.put("tau_fraction", Estimate::proportion(tau_frac, mc.n_paths));
    for &eps in &spec.eps_levels {
        let below = mins.iter().filter(|&&m| m < eps).count();
        s.put(format!("below[{eps:e}]"), Estimate::proportion(below, mc.n_paths));
        let mut c = BoundComparison::upper(format!("paths_below[{eps:e}]"), below as f64, 0.0);
        c.satisfied = below == 0;
        s.bound_comparisons.push(c);
    }
    let phi_mean = Estimate::from_samples(&phis);
    s.put("phi_mean", phi_mean);
    let bound = phi.eval(c0)? * ((2.0 * spec.k - 1.0) * spec.horizon).exp();
    s.put("phi_bound", Estimate::exact(bound));
    s.bound_comparisons.push(BoundComparison::upper("phi_gronwall", phi_mean.value, bound * 1.1));
    s.meta("c0", json!(c0));
    s.meta("gamma", json!(spec.gamma.to_string()));
    s.meta("k", json!(spec.k));
    s.meta("delta", json!(spec.delta));
    s.per_path = PathTable {
        columns: vec!["min_distance".into(), "xi_stop".into(), "phi".into(), "tau_hit".into()],
        rows: per_path
            .iter()
            .zip(&phis)
            .map(|(p, f)| vec![p.0, p.1, *f, f64::from(u8::from(p.2))])
            .collect(),
    };
    Ok(s)
}

// ---------------------------------------------------------------------------
// maximal moments

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub x0: Vec<f64>,
    pub p: f64,
    pub t: f64,
}

/// Gronwall envelope `A·exp(B·∫₀ᵗ (f^{p/2} + f))` for `E[Y_t^p + 1]` with
/// `A = 1 + 2C|x₀|^p`, `B = C((C+1)t^{(p−2)/2} + p(C(8−2p))^{(4−p)/p}/4)` and `C = 1`.
pub fn moment_envelope(model: &CoefficientSet, x0: &[f64], p: f64, t: f64) -> f64 {
    let c = 1.0;
    let a = 1.0 + 2.0 * c * norm(x0).powf(p);
    let b = c * ((c + 1.0) * t.powf((p - 2.0) / 2.0) + p * (c * (8.0 - 2.0 * p)).powf((4.0 - p) / p) / 4.0);
    let f = model.f();
    let integral = quad::integrate(|s| f.eval(s).max(0.0).powf(p / 2.0) + f.eval(s), 0.0, t, 1e-10);
    a * (b * integral).exp()
}

/// `E[sup_{s≤t} |X_s|^p]`; an exploded path contributes `+∞`.
pub fn run_moments(model: &CoefficientSet, spec: &MomentSpec, mc: &McConfig) -> Result<ExperimentSummary> {
    check_dim(model, "x0", &spec.x0)?;
    if !(2.0..4.0).contains(&spec.p) {
        return Err(Error::Parameter(format!("moment exponent must lie in [2, 4), got {}", spec.p)));
    }
    positive("t", spec.t)?;
    let sups: Vec<f64> = run_paths(mc, |path| {
        let noise = path_noise(model, mc, spec.t, path)?;
        let mut states = vec![spec.x0.clone()];
        let mut sup: f64 = 0.0;
        let mut exploded = false;
        drive(model, &noise, spec.t, 0.0, &mut states, mc.explosion_radius, |v| {
            if v.exploded[0] {
                exploded = true;
                return Flow::Stop;
            }
            sup = sup.max(norm(&v.states[0]));
            Flow::Continue
        })?;
        Ok(if exploded { f64::INFINITY } else { sup.powf(spec.p) })
    })?;
    let mut s = ExperimentSummary::new("moments", model, mc);
    let est = if sups.iter().any(|v| v.is_infinite()) {
        Estimate { value: f64::INFINITY, se: f64::NAN }
    } else {
        Estimate::from_samples(&sups)
    };
    s.put("sup_moment", est);
    let envelope = moment_envelope(model, &spec.x0, spec.p, spec.t);
    s.put("envelope", Estimate::exact(envelope));
    s.bound_comparisons.push(BoundComparison::upper("gronwall_envelope", est.value + 1.0, envelope).indicative());
    s.meta("p", json!(spec.p));
    s.meta("exploded_paths", json!(sups.iter().filter(|v| v.is_infinite()).count()));
    s.per_path = PathTable { columns: vec!["sup_pow_p".into()], rows: sups.iter().map(|v| vec![*v]).collect() };
    Ok(s)
}

// ---------------------------------------------------------------------------
// Girsanov bridge

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeSpec {
    pub t1: f64,
    pub horizon: f64,
    pub y0: Vec<f64>,
    /// Truncation level: `X^ε = X·1{|X| ≤ 1/ε}`; `0` disables truncation.
    pub eps: f64,
    /// Hitting ball radius.
    pub r: f64,
    /// Exponent of the maximal moment entering the endpoint bound.
    pub p: f64,
}

impl BridgeSpec {
    pub fn new(t1: f64, horizon: f64, y0: Vec<f64>, eps: f64, r: f64) -> Self {
        Self { t1, horizon, y0, eps, r, p: 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t1 < self.horizon && self.horizon.is_finite()) {
            return Err(Error::Parameter(format!("need 0 < t1 < T, got t1 = {}, T = {}", self.t1, self.horizon)));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::Parameter(format!("truncation ε must be ≥ 0, got {}", self.eps)));
        }
        positive("r", self.r)?;
        if !(2.0..4.0).contains(&self.p) {
            return Err(Error::Parameter(format!("moment exponent must lie in [2, 4), got {}", self.p)));
        }
        Ok(())
    }

    fn truncate(&self, x: &[f64]) -> Vec<f64> {
        if self.eps > 0.0 && norm(x) > 1.0 / self.eps {
            vec![0.0; x.len()]
        } else {
            x.to_vec()
        }
    }
}

/// One controlled path of the bridge construction.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgePath {
    pub x_t1: Vec<f64>,
    pub y_end: Vec<f64>,
    pub log_density: f64,
    /// `σ` was singular somewhere on the deterministic bridge.
    pub singular: bool,
    pub exploded: bool,
    pub sup_norm: f64,
}

/// Simulates `X` on `[0, t₁]`, then the SDE with drift `b + h^ε` on `[t₁, T]` from
/// `X_{t₁}`, accumulating `log R_T^ε` by left-point sums along the same noise.
pub fn simulate_bridge_path(
    model: &CoefficientSet,
    x0: &[f64],
    spec: &BridgeSpec,
    noise: &NoiseRealization,
    explosion_radius: f64,
) -> Result<BridgePath> {
    engine::check_noise(model, noise, spec.horizon)?;
    let (d, m) = (model.dim_state(), model.dim_noise());
    let times = noise.times();
    if !times.iter().any(|&t| (t - spec.t1).abs() <= TIME_TOL) {
        return Err(Error::Grid(format!("t1 = {} is not a point of the simulation grid", spec.t1)));
    }
    let mut integ = Integrator::new(model);
    let mut x = x0.to_vec();
    let mut sup = norm(&x);
    let mut x_eps: Option<Vec<f64>> = None;
    let mut x_t1 = Vec::new();
    let mut log_r = 0.0;
    let mut singular = false;
    let mut exploded = false;
    let (mut b, mut sigma, mut h) = (vec![0.0; d], vec![0.0; d * m], vec![0.0; d]);
    let span = spec.horizon - spec.t1;
    for k in 0..times.len() - 1 {
        let (t, t_next) = (times[k], times[k + 1]);
        if t_next > spec.horizon + TIME_TOL {
            break;
        }
        let db = noise.increment(k);
        let dt = t_next - t;
        let control = match &x_eps {
            None => None,
            Some(xe) => {
                // deterministic bridge Y^ε and h^ε at the left point
                let w = (t - spec.t1) / span;
                let y_bridge: Vec<f64> = xe.iter().zip(&spec.y0).map(|(a, y)| (1.0 - w) * a + w * y).collect();
                model.drift(t, &y_bridge, &mut b);
                for i in 0..d {
                    h[i] = (spec.y0[i] - xe[i]) / span - b[i];
                }
                model.diffusion(t, &y_bridge, &mut sigma);
                let li = pseudo_inverse(&sigma, d, m);
                if li.singular {
                    singular = true;
                } else {
                    let theta = li.apply(&h);
                    log_r -= theta.iter().zip(db).map(|(a, w)| a * w).sum::<f64>();
                    log_r -= 0.5 * theta.iter().map(|a| a * a).sum::<f64>() * dt;
                }
                Some(h.as_slice())
            }
        };
        integ.step(t, dt, &mut x, db, control)?;
        for &e in noise.events_at(k + 1) {
            integ.jump(t_next, &mut x, noise.jump_events()[e].atom)?;
        }
        if !(norm(&x) <= explosion_radius) {
            exploded = true;
            break;
        }
        sup = sup.max(norm(&x));
        if x_eps.is_none() && (t_next - spec.t1).abs() <= TIME_TOL {
            x_t1 = x.clone();
            x_eps = Some(spec.truncate(&x));
        }
    }
    Ok(BridgePath { x_t1, y_end: x, log_density: log_r, singular, exploded, sup_norm: sup })
}

/// Mean Girsanov density, endpoint error `E|Y_T − y₀|²`, hitting fraction of
/// `B(y₀, r)` and the indicative endpoint bound.
pub fn run_girsanov_bridge(
    model: &CoefficientSet,
    x0: &[f64],
    spec: &BridgeSpec,
    mc: &McConfig,
) -> Result<ExperimentSummary> {
    spec.validate()?;
    check_dim(model, "x0", x0)?;
    check_dim(model, "y0", &spec.y0)?;
    if model.dim_noise() < model.dim_state() {
        return Err(Error::Shape(format!(
            "the bridge needs m ≥ d, got d = {}, m = {}",
            model.dim_state(),
            model.dim_noise()
        )));
    }
    let paths: Vec<BridgePath> = run_paths(mc, |path| {
        let noise = path_noise(model, mc, spec.horizon, path)?;
        simulate_bridge_path(model, x0, spec, &noise, mc.explosion_radius)
    })?;
    let regular: Vec<&BridgePath> = paths.iter().filter(|p| !p.singular).collect();
    if regular.is_empty() {
        return Err(Error::Experiment("σ is singular on every bridge path".into()));
    }
    let underflow = regular.iter().filter(|p| p.log_density < LOG_DENSITY_FLOOR).count();
    let densities: Vec<f64> = regular
        .iter()
        .map(|p| if p.log_density < LOG_DENSITY_FLOOR { 0.0 } else { p.log_density.exp() })
        .collect();
    let endpoint: Vec<f64> = paths
        .iter()
        .map(|p| if p.exploded { f64::INFINITY } else { dist_sq(&p.y_end, &spec.y0) })
        .collect();
    let hits = paths.iter().filter(|p| !p.exploded && dist_sq(&p.y_end, &spec.y0) < spec.r * spec.r).count();
    let trunc: Vec<f64> = paths.iter().map(|p| dist_sq(&p.x_t1, &spec.truncate(&p.x_t1))).collect();
    let sup_p: Vec<f64> = paths.iter().map(|p| p.sup_norm.powf(spec.p)).collect();

    let mut s = ExperimentSummary::new("girsanov", model, mc);
    let density = Estimate::from_samples(&densities);
    s.put("density_mean", density);
    let end = Estimate::from_samples(&endpoint);
    s.put("endpoint_sq", end);
    s.put("hit_fraction", Estimate::proportion(hits, mc.n_paths));
    let trunc_est = Estimate::from_samples(&trunc);
    s.put("truncation_sq", trunc_est);
    let sup_est = Estimate::from_samples(&sup_p);
    s.put("sup_moment", sup_est);
    // C(t₁,T,p) with the BDG-type constant set to 1
    let c = trunc_est.value
        + 2.0 * (sup_est.value + norm(&spec.y0).powf(spec.p) + 1.0) * model.f().integral(spec.t1, spec.horizon);
    let exponent = (-2.0 * (model.g().integral(spec.t1, spec.horizon) + (spec.horizon - spec.t1))).exp();
    let bound = c.powf(exponent);
    s.put("endpoint_bound", Estimate::exact(bound));
    s.bound_comparisons.push(BoundComparison::upper("endpoint_bound", end.value, bound).indicative());
    let mut unit = BoundComparison::upper("density_unit_mean", (density.value - 1.0).abs(), 3.0 * density.se);
    unit.satisfied = density.within(1.0, 3.0);
    s.bound_comparisons.push(unit);
    s.meta("flagged_fraction", json!((paths.len() - regular.len()) as f64 / paths.len() as f64));
    s.meta("density_underflow", json!(underflow));
    s.meta("exploded_paths", json!(paths.iter().filter(|p| p.exploded).count()));
    s.meta("spec", json!(spec));
    s.per_path = PathTable {
        columns: vec!["log_density".into(), "endpoint_sq".into(), "singular".into()],
        rows: paths
            .iter()
            .zip(&endpoint)
            .map(|(p, e)| vec![p.log_density, *e, f64::from(u8::from(p.singular))])
            .collect(),
    };
    Ok(s)
}

// ---------------------------------------------------------------------------
// irreducibility

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrreducibilitySpec {
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    pub r: f64,
    pub s: f64,
    pub t: f64,
}

/// Confidence level of the reported Clopper–Pearson interval.
pub const IRREDUCIBILITY_ALPHA: f64 = 0.05;

/// Fraction of paths with `X_t ∈ B(y₀, r)` given `X_s = x₀`, with a Clopper–Pearson
/// lower bound; positive lower bound (at least one hit) is evidence of irreducibility.
pub fn run_irreducibility(model: &CoefficientSet, spec: &IrreducibilitySpec, mc: &McConfig) -> Result<ExperimentSummary> {
    check_dim(model, "x0", &spec.x0)?;
    check_dim(model, "y0", &spec.y0)?;
    positive("r", spec.r)?;
    if !(spec.s >= 0.0 && spec.s < spec.t && spec.t.is_finite()) {
        return Err(Error::Parameter(format!("need 0 ≤ s < t, got s = {}, t = {}", spec.s, spec.t)));
    }
    let span = spec.t - spec.s;
    let offset = if model.is_time_homogeneous() { 0.0 } else { spec.s };
    let r_sq = spec.r * spec.r;
    let hit: Vec<bool> = run_paths(mc, |path| {
        let noise = path_noise(model, mc, span, path)?;
        let mut states = vec![spec.x0.clone()];
        let mut exploded = false;
        drive(model, &noise, span, offset, &mut states, mc.explosion_radius, |v| {
            if v.exploded[0] {
                exploded = true;
                return Flow::Stop;
            }
            Flow::Continue
        })?;
        Ok(!exploded && dist_sq(&states[0], &spec.y0) < r_sq)
    })?;
    let hits = hit.iter().filter(|h| **h).count();
    let mut s = ExperimentSummary::new("irreducibility", model, mc);
    s.put("p_hat", Estimate::proportion(hits, mc.n_paths));
    let (lo, hi) = clopper_pearson(hits, mc.n_paths, IRREDUCIBILITY_ALPHA);
    s.put("cp_lower", Estimate::exact(lo));
    s.put("cp_upper", Estimate::exact(hi));
    s.bound_comparisons.push(BoundComparison {
        name: "positive_lower_bound".into(),
        empirical: lo,
        bound: 0.0,
        satisfied: lo > 0.0,
        indicative: false,
    });
    s.meta("hits", json!(hits));
    s.meta("spec", json!(spec));
    s.per_path = PathTable { columns: vec!["hit".into()], rows: hit.iter().map(|&h| vec![f64::from(u8::from(h))]).collect() };
    Ok(s)
}
