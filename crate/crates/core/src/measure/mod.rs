//! Finite atomic jump measures and the noise they drive.

mod noise;

pub use noise::{sample_brownian, BrownianIncrements, NoiseRealization, TimeGrid, TIME_TOL};

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One atom of the jump measure: a mark in `U = ℝ^q` and its rate per unit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub mark: Vec<f64>,
    pub rate: f64,
}

impl Atom {
    pub fn new(mark: Vec<f64>, rate: f64) -> Self {
        Self { mark, rate }
    }

    pub fn scalar(mark: f64, rate: f64) -> Self {
        Self { mark: vec![mark], rate }
    }
}

/// A jump measure `ν = Σ rate_k δ_{mark_k}` with finite total mass.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JumpMeasure {
    atoms: Vec<Atom>,
    total_rate: f64,
    cumulative: Vec<f64>,
}

impl JumpMeasure {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if let Some(first) = atoms.first() {
            let q = first.mark.len();
            for (i, a) in atoms.iter().enumerate() {
                if a.mark.len() != q {
                    return Err(Error::Parameter(format!(
                        "atom {i} has mark dimension {}, expected {q}",
                        a.mark.len()
                    )));
                }
                if !(a.rate.is_finite() && a.rate >= 0.0) {
                    return Err(Error::Parameter(format!("atom {i} has invalid rate {}", a.rate)));
                }
                if a.mark.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Parameter(format!("atom {i} has a non-finite mark")));
                }
            }
        }
        let mut cumulative = Vec::with_capacity(atoms.len());
        let mut acc = 0.0;
        for a in &atoms {
            acc += a.rate;
            cumulative.push(acc);
        }
        Ok(Self { atoms, total_rate: acc, cumulative })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Dimension of the mark space, 0 for the empty measure.
    pub fn mark_dim(&self) -> usize {
        self.atoms.first().map_or(0, |a| a.mark.len())
    }

    /// The measure restricted to the atoms selected by `keep` (indices refer to `self`).
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> JumpMeasure {
        let atoms = self
            .atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| keep(*i))
            .map(|(_, a)| a.clone())
            .collect();
        // rates were validated on construction
        JumpMeasure::new(atoms).expect("restriction of a valid measure")
    }

    fn pick_atom(&self, u: f64) -> usize {
        let target = u * self.total_rate;
        let idx = self.cumulative.partition_point(|&c| c <= target);
        if idx < self.atoms.len() {
            idx
        } else {
            // u·total rounded up to the total; fall back to the last atom with mass
            self.atoms.iter().rposition(|a| a.rate > 0.0).unwrap_or(0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub atom: usize,
}

/// Samples the jump events of `measure` on `(0, horizon]`.
///
/// Arrival times are an exact Poisson clock of intensity `total_rate` (exponential
/// gaps); each arrival picks atom `k` with probability `rate_k / total_rate`.
pub fn sample_jump_events<R: Rng + ?Sized>(
    measure: &JumpMeasure,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<JumpEvent>> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
    }
    let mut events = Vec::new();
    if measure.total_rate <= 0.0 {
        return Ok(events);
    }
    let mean_gap = 1.0 / measure.total_rate;
    let mut t = 0.0;
    loop {
        let gap: f64 = Exp1.sample(rng);
        t += gap * mean_gap;
        if t > horizon {
            break;
        }
        let u: f64 = rng.random();
        events.push(JumpEvent { time: t, atom: measure.pick_atom(u) });
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.atom.cmp(&b.atom)));
    Ok(events)
}

/// `Σ_k rate_k · integrand(mark_k)` for a scalar integrand.
pub fn compensator_integral(measure: &JumpMeasure, mut integrand: impl FnMut(&[f64]) -> f64) -> f64 {
    measure.atoms.iter().map(|a| a.rate * integrand(&a.mark)).sum()
}

/// Vector-valued compensator integral; `integrand` writes its value into the buffer.
pub fn compensator_integral_vec(
    measure: &JumpMeasure,
    dim: usize,
    mut integrand: impl FnMut(&[f64], &mut [f64]),
) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    let mut buf = vec![0.0; dim];
    for a in &measure.atoms {
        integrand(&a.mark, &mut buf);
        for (o, v) in out.iter_mut().zip(&buf) {
            *o += a.rate * v;
        }
    }
    out
}
