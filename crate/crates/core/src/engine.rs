//! Euler integration with exact jump insertion and synchronous coupling.
//!
//! Between consecutive points of the noise grid the state moves by
//!
//! ```text
//! X ← X + [b(t, X) − Σ_{F1} rate·f₁(t, X, u)]·Δt + σ(t, X)·ΔB
//! ```
//!
//! and at a jump event of atom `u` it moves by `f₁(t, X₋, u)` or `f₂(t, X₋, u)`
//! according to the atom's support tag. A path whose norm first exceeds the
//! explosion radius is frozen there.

use std::io::{self, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{NoiseRealization, TimeGrid, TIME_TOL};
use crate::model::CoefficientSet;

pub const DEFAULT_EXPLOSION_RADIUS: f64 = 1e6;
/// Singular values below this make `σ` count as singular.
pub const SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: f64,
    pub steps: usize,
    pub explosion_radius: f64,
    pub x0: Vec<f64>,
    pub y0: Option<Vec<f64>>,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(horizon: f64, steps: usize, x0: Vec<f64>, seed: u64) -> Self {
        Self { horizon, steps, explosion_radius: DEFAULT_EXPLOSION_RADIUS, x0, y0: None, seed }
    }

    pub fn with_pair(mut self, y0: Vec<f64>) -> Self {
        self.y0 = Some(y0);
        self
    }

    pub fn with_explosion_radius(mut self, radius: f64) -> Self {
        self.explosion_radius = radius;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::Parameter(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.steps == 0 {
            return Err(Error::Parameter("step count must be at least 1".into()));
        }
        for (label, x) in std::iter::once(("x0", &self.x0)).chain(self.y0.as_ref().map(|y| ("y0", y))) {
            if x.len() != dim {
                return Err(Error::Model(format!("{label} has dimension {}, model has {dim}", x.len())));
            }
            if !(self.explosion_radius > norm(x)) {
                return Err(Error::Parameter(format!(
                    "explosion radius {} must exceed |{label}| = {}",
                    self.explosion_radius,
                    norm(x)
                )));
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.horizon, self.steps)
    }

    /// The noise realization of path `path` under this config's seed.
    pub fn noise(&self, model: &CoefficientSet, path: u64) -> Result<NoiseRealization> {
        NoiseRealization::generate(model.measure(), &self.grid()?, model.dim_noise(), self.seed, path)
    }
}

/// One simulated solution on the merged grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathRecord {
    pub dim: usize,
    pub times: Vec<f64>,
    /// Row-major states, one `dim`-vector per time (post-jump values at jump times).
    pub states: Vec<f64>,
    /// First jump event index landing on each time, if any.
    pub jump_markers: Vec<Option<usize>>,
    pub exploded: bool,
    pub explosion_time: Option<f64>,
}

impl PathRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.dim..(i + 1) * self.dim]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    /// `sup_s |X_s|` over the recorded grid up to the explosion time.
    pub fn sup_norm(&self) -> f64 {
        (0..self.len()).map(|i| norm(self.state(i))).fold(0.0, f64::max)
    }

    /// CSV with header `t,x_1,..,x_d,jump_flag`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let mut header = String::from("t");
        for i in 1..=self.dim {
            header.push_str(&format!(",x_{i}"));
        }
        writeln!(w, "{header},jump_flag")?;
        for i in 0..self.len() {
            write!(w, "{}", self.times[i])?;
            for v in self.state(i) {
                write!(w, ",{v}")?;
            }
            writeln!(w, ",{}", u8::from(self.jump_markers[i].is_some()))?;
        }
        Ok(())
    }
}

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Reusable Euler stepper for one model; holds the scratch buffers.
pub struct Integrator<'m> {
    model: &'m CoefficientSet,
    drift: Vec<f64>,
    sigma: Vec<f64>,
    comp: Vec<f64>,
    scratch: Vec<f64>,
}

impl<'m> Integrator<'m> {
    pub fn new(model: &'m CoefficientSet) -> Self {
        let (d, m) = (model.dim_state(), model.dim_noise());
        Self { model, drift: vec![0.0; d], sigma: vec![0.0; d * m], comp: vec![0.0; d], scratch: vec![0.0; d] }
    }

    pub fn model(&self) -> &'m CoefficientSet {
        self.model
    }

    /// One Euler step over `[t, t + dt]` with Brownian increment `db`; `control` is an
    /// extra drift added to `b`.
    pub fn step(&mut self, t: f64, dt: f64, x: &mut [f64], db: &[f64], control: Option<&[f64]>) -> Result<()> {
        let m = self.model.dim_noise();
        self.model.drift(t, x, &mut self.drift);
        self.model.diffusion(t, x, &mut self.sigma);
        let has_small = !self.model.small_atoms().is_empty();
        if has_small {
            self.model.compensator_drift(t, x, &mut self.comp, &mut self.scratch);
        }
        if !(all_finite(&self.drift) && all_finite(&self.sigma) && all_finite(&self.comp)) {
            return Err(Error::Numeric { t, x: x.to_vec() });
        }
        for (i, xi) in x.iter_mut().enumerate() {
            let mut a = self.drift[i];
            if has_small {
                a -= self.comp[i];
            }
            if let Some(c) = control {
                a += c[i];
            }
            let row = &self.sigma[i * m..(i + 1) * m];
            let noise: f64 = row.iter().zip(db).map(|(s, w)| s * w).sum();
            *xi += a * dt + noise;
        }
        Ok(())
    }

    /// Applies the jump of `atom` at time `t` to the left limit `x`.
    pub fn jump(&mut self, t: f64, x: &mut [f64], atom: usize) -> Result<()> {
        self.model.jump(t, x, atom, &mut self.scratch);
        if !all_finite(&self.scratch) {
            return Err(Error::Numeric { t, x: x.to_vec() });
        }
        for (xi, j) in x.iter_mut().zip(&self.scratch) {
            *xi += j;
        }
        Ok(())
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// What a [`drive`] visitor sees after each grid point.
pub struct Visit<'a> {
    pub index: usize,
    pub time: f64,
    pub states: &'a [Vec<f64>],
    /// Per path: whether it has left the explosion ball (its state is then frozen).
    pub exploded: &'a [bool],
    pub jumped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

/// Integrates several paths through the same noise on `[0, horizon]`.
///
/// `time_offset` is added to grid times when evaluating coefficients. The visitor
/// runs at the initial point and after every grid point (after jumps); returning
/// [`Flow::Stop`] ends integration.
pub fn drive(
    model: &CoefficientSet,
    noise: &NoiseRealization,
    horizon: f64,
    time_offset: f64,
    states: &mut [Vec<f64>],
    explosion_radius: f64,
    mut visit: impl FnMut(&Visit<'_>) -> Flow,
) -> Result<()> {
    check_noise(model, noise, horizon)?;
    for s in states.iter() {
        if s.len() != model.dim_state() {
            return Err(Error::Model(format!(
                "initial value has dimension {}, model has {}",
                s.len(),
                model.dim_state()
            )));
        }
    }
    let mut integ = Integrator::new(model);
    let mut exploded = vec![false; states.len()];
    let times = noise.times();
    let first = Visit { index: 0, time: times[0], states, exploded: &exploded, jumped: false };
    if visit(&first) == Flow::Stop {
        return Ok(());
    }
    for k in 0..times.len() - 1 {
        let (t, t_next) = (times[k], times[k + 1]);
        if t_next > horizon + TIME_TOL {
            break;
        }
        let db = noise.increment(k);
        let events = noise.events_at(k + 1);
        for (x, done) in states.iter_mut().zip(exploded.iter_mut()) {
            if *done {
                continue;
            }
            integ.step(time_offset + t, t_next - t, x, db, None)?;
            for &e in events {
                integ.jump(time_offset + t_next, x, noise.jump_events()[e].atom)?;
            }
            if !(norm(x) <= explosion_radius) {
                *done = true;
            }
        }
        let v = Visit { index: k + 1, time: t_next, states, exploded: &exploded, jumped: !events.is_empty() };
        if visit(&v) == Flow::Stop {
            break;
        }
    }
    Ok(())
}

pub(crate) fn check_noise(model: &CoefficientSet, noise: &NoiseRealization, horizon: f64) -> Result<()> {
    if noise.dim() != model.dim_noise() {
        return Err(Error::Model(format!(
            "noise has dimension {}, model expects {}",
            noise.dim(),
            model.dim_noise()
        )));
    }
    if noise.horizon() < horizon - TIME_TOL {
        return Err(Error::Grid(format!(
            "noise horizon {} is shorter than the simulation horizon {horizon}",
            noise.horizon()
        )));
    }
    if !noise.times().iter().any(|&t| (t - horizon).abs() <= TIME_TOL) {
        return Err(Error::Grid(format!("horizon {horizon} is not a point of the noise grid")));
    }
    Ok(())
}

struct Recorder {
    dim: usize,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    markers: Vec<Option<usize>>,
    explosion: Vec<Option<f64>>,
}

impl Recorder {
    fn new(dim: usize, paths: usize) -> Self {
        Self {
            dim,
            times: Vec::new(),
            states: vec![Vec::new(); paths],
            markers: Vec::new(),
            explosion: vec![None; paths],
        }
    }

    fn record(&mut self, v: &Visit<'_>, noise: &NoiseRealization) {
        self.times.push(v.time);
        self.markers.push(noise.events_at(v.index).first().copied());
        for (p, x) in v.states.iter().enumerate() {
            if v.exploded[p] && self.explosion[p].is_none() {
                self.explosion[p] = Some(v.time);
            }
            self.states[p].extend_from_slice(x);
        }
    }

    fn finish(self) -> Vec<PathRecord> {
        let Recorder { dim, times, states, markers, explosion } = self;
        states
            .into_iter()
            .zip(explosion)
            .map(|(states, explosion_time)| PathRecord {
                dim,
                times: times.clone(),
                states,
                jump_markers: markers.clone(),
                exploded: explosion_time.is_some(),
                explosion_time,
            })
            .collect()
    }
}

/// Simulates `X(x₀)` on `[0, cfg.horizon]` driven by `noise`.
pub fn simulate_path(model: &CoefficientSet, cfg: &SimConfig, noise: &NoiseRealization) -> Result<PathRecord> {
    cfg.validate(model.dim_state())?;
    let mut states = vec![cfg.x0.clone()];
    let mut rec = Recorder::new(model.dim_state(), 1);
    drive(model, noise, cfg.horizon, 0.0, &mut states, cfg.explosion_radius, |v| {
        rec.record(v, noise);
        Flow::Continue
    })?;
    Ok(rec.finish().pop().expect("one path"))
}

/// Two solutions driven by the same noise, with their squared distance process.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub x: PathRecord,
    pub y: PathRecord,
    /// `|X_t(x₀) − X_t(y₀)|²` on the merged grid, up to the first explosion of either path.
    pub xi: Vec<f64>,
    /// Minimum of `|X_t(x₀) − X_t(y₀)|` over the same points.
    pub min_distance: f64,
}

pub fn simulate_coupled_pair(model: &CoefficientSet, cfg: &SimConfig, noise: &NoiseRealization) -> Result<CoupledPair> {
    cfg.validate(model.dim_state())?;
    let y0 = cfg.y0.clone().ok_or_else(|| Error::Usage("coupled simulation needs y0".into()))?;
    let mut states = vec![cfg.x0.clone(), y0];
    let mut rec = Recorder::new(model.dim_state(), 2);
    let mut xi = Vec::new();
    drive(model, noise, cfg.horizon, 0.0, &mut states, cfg.explosion_radius, |v| {
        rec.record(v, noise);
        if !v.exploded.iter().any(|e| *e) {
            xi.push(dist_sq(&v.states[0], &v.states[1]));
        }
        Flow::Continue
    })?;
    let mut paths = rec.finish();
    let y = paths.pop().expect("two paths");
    let x = paths.pop().expect("two paths");
    let min_distance = xi.iter().copied().fold(f64::INFINITY, f64::min).sqrt();
    Ok(CoupledPair { x, y, xi, min_distance })
}

/// Minimal-norm inverse `σ⁺` of the `d × m` diffusion matrix (`m ≥ d`), so that
/// `σ σ⁺ = I_d` when `σ` has full rank.
#[derive(Debug, Clone, PartialEq)]
pub struct LeftInverse {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `m × d` entries; singular directions are zeroed.
    pub matrix: Vec<f64>,
    /// Squared Hilbert–Schmidt norm `Σ 1/s_i²`, infinite when singular.
    pub norm_sq: f64,
    pub singular: bool,
    pub min_singular_value: f64,
}

impl LeftInverse {
    /// `σ⁺ h` for a `d`-vector `h`.
    pub fn apply(&self, h: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.matrix[i * self.cols..(i + 1) * self.cols].iter().zip(h).map(|(a, b)| a * b).sum())
            .collect()
    }
}

pub fn left_inverse_sigma(model: &CoefficientSet, t: f64, x: &[f64]) -> Result<LeftInverse> {
    let (d, m) = (model.dim_state(), model.dim_noise());
    if m < d {
        return Err(Error::Shape(format!("left inverse needs m ≥ d, got d = {d}, m = {m}")));
    }
    let mut sigma = vec![0.0; d * m];
    model.diffusion(t, x, &mut sigma);
    if !all_finite(&sigma) {
        return Err(Error::Numeric { t, x: x.to_vec() });
    }
    Ok(pseudo_inverse(&sigma, d, m))
}

pub(crate) fn pseudo_inverse(sigma: &[f64], d: usize, m: usize) -> LeftInverse {
    let svd = DMatrix::from_row_slice(d, m, sigma).svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
    let s = &svd.singular_values;
    let min_sv = s.iter().copied().fold(f64::INFINITY, f64::min);
    let singular = !(min_sv >= SINGULAR_TOL);
    // σ⁺ = V S⁻¹ Uᵀ, skipping singular directions
    let mut matrix = vec![0.0; m * d];
    let mut norm_sq = 0.0;
    for (k, &sk) in s.iter().enumerate() {
        if !(sk >= SINGULAR_TOL) {
            continue;
        }
        norm_sq += 1.0 / (sk * sk);
        for i in 0..m {
            let vik = v_t[(k, i)] / sk;
            for j in 0..d {
                matrix[i * d + j] += vik * u[(j, k)];
            }
        }
    }
    LeftInverse {
        rows: m,
        cols: d,
        matrix,
        norm_sq: if singular { f64::INFINITY } else { norm_sq },
        singular,
        min_singular_value: min_sv,
    }
}
