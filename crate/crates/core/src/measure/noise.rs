use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{sample_jump_events, JumpEvent, JumpMeasure};
use crate::error::{Error, Result};
use crate::rng::{StreamKey, StreamRole};

/// Jump times closer than this to a grid point are attached to that point.
pub const TIME_TOL: f64 = 1e-12;

/// Strictly increasing time points starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        check_increasing(&points)?;
        if points[0] != 0.0 {
            return Err(Error::Grid(format!("grid must start at 0, starts at {}", points[0])));
        }
        Ok(Self { points })
    }

    /// `steps` equal intervals on `[0, horizon]`; the last point is exactly `horizon`.
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::Grid(format!("horizon must be positive, got {horizon}")));
        }
        if steps == 0 {
            return Err(Error::Grid("step count must be at least 1".into()));
        }
        let dt = horizon / steps as f64;
        let mut points: Vec<f64> = (0..steps).map(|i| i as f64 * dt).collect();
        points.push(horizon);
        Ok(Self { points })
    }

    /// Inserts extra points, skipping any within [`TIME_TOL`] of an existing one.
    pub fn with_points(&self, extra: &[f64]) -> Result<Self> {
        let mut points = self.points.clone();
        for &t in extra {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::Grid(format!("invalid extra time {t}")));
            }
            let pos = points.partition_point(|&p| p < t);
            let near = |i: usize| points.get(i).is_some_and(|&p| (p - t).abs() <= TIME_TOL);
            if near(pos) || (pos > 0 && near(pos - 1)) {
                continue;
            }
            points.insert(pos, t);
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn horizon(&self) -> f64 {
        *self.points.last().expect("grid is non-empty")
    }

    pub fn intervals(&self) -> usize {
        self.points.len() - 1
    }

    /// Index of the point within [`TIME_TOL`] of `t`.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points.iter().position(|&p| (p - t).abs() <= TIME_TOL)
    }
}

fn check_increasing(points: &[f64]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Grid("grid is empty".into()));
    }
    if points.iter().any(|t| !t.is_finite()) {
        return Err(Error::Grid("grid contains a non-finite time".into()));
    }
    if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Grid(format!(
            "grid is not strictly increasing at index {}: {} then {}",
            i + 1,
            points[i],
            points[i + 1]
        )));
    }
    Ok(())
}

/// Gaussian increments per grid interval, stored row-major with stride `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianIncrements {
    dim: usize,
    values: Vec<f64>,
}

impl BrownianIncrements {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.values.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn interval(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim.max(1))
    }

    /// Sum of all increments, i.e. `B_T − B_0`.
    pub fn total(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim];
        for inc in self.iter() {
            for (a, v) in acc.iter_mut().zip(inc) {
                *a += v;
            }
        }
        acc
    }
}

/// Independent centred Gaussian increments with covariance `Δt_i · I_m` per interval.
pub fn sample_brownian<R: Rng + ?Sized>(grid: &[f64], m: usize, rng: &mut R) -> Result<BrownianIncrements> {
    check_increasing(grid)?;
    let n = grid.len() - 1;
    let mut values = Vec::with_capacity(n * m);
    for w in grid.windows(2) {
        let scale = (w[1] - w[0]).sqrt();
        for _ in 0..m {
            let z: f64 = StandardNormal.sample(rng);
            values.push(scale * z);
        }
    }
    Ok(BrownianIncrements { dim: m, values })
}

/// One draw of the driving noise: Brownian increments and jump events on a grid that
/// contains every base grid point and every jump time.
///
/// Two solutions driven by the same realization are synchronously coupled.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRealization {
    times: Vec<f64>,
    base_index: Vec<Option<usize>>,
    increments: BrownianIncrements,
    jump_events: Vec<JumpEvent>,
    // CSR layout: events landing on point k are event_ids[event_ptr[k]..event_ptr[k + 1]]
    event_ptr: Vec<usize>,
    event_ids: Vec<usize>,
    seed_label: u64,
    path: u64,
}

impl NoiseRealization {
    /// Draws jumps from the `Jumps` stream and increments from the `Brownian` stream of
    /// path `path` under `seed`. Jump times do not depend on `base`, so refining the
    /// base grid only inserts points.
    pub fn generate(measure: &JumpMeasure, base: &TimeGrid, m: usize, seed: u64, path: u64) -> Result<Self> {
        let key = StreamKey::new(seed, path, StreamRole::Jumps);
        let events = sample_jump_events(measure, base.horizon(), &mut key.rng())?;
        let mut brownian = key.with_role(StreamRole::Brownian).rng();
        Self::assemble(base, events, seed, path, |times| sample_brownian(times, m, &mut brownian))
    }

    /// Builds a realization from given jump events, drawing increments from `rng`.
    pub fn from_events<R: Rng + ?Sized>(
        base: &TimeGrid,
        events: Vec<JumpEvent>,
        m: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Self::assemble(base, events, 0, 0, |times| sample_brownian(times, m, rng))
    }

    fn assemble(
        base: &TimeGrid,
        mut events: Vec<JumpEvent>,
        seed_label: u64,
        path: u64,
        draw: impl FnOnce(&[f64]) -> Result<BrownianIncrements>,
    ) -> Result<Self> {
        let horizon = base.horizon();
        events.sort_by(|a, b| a.time.total_cmp(&b.time).then(a.atom.cmp(&b.atom)));
        if let Some(e) = events.iter().find(|e| !(e.time > 0.0 && e.time <= horizon + TIME_TOL)) {
            return Err(Error::Grid(format!("jump time {} outside (0, {horizon}]", e.time)));
        }
        let (times, base_index, slot_of_event) = merge(base.points(), &events);
        let mut event_ptr = vec![0usize; times.len() + 1];
        for &slot in &slot_of_event {
            event_ptr[slot + 1] += 1;
        }
        for k in 0..times.len() {
            event_ptr[k + 1] += event_ptr[k];
        }
        // events are sorted, so slots are nondecreasing and ids come out in order
        let event_ids: Vec<usize> = (0..events.len()).collect();
        let increments = draw(&times)?;
        debug_assert_eq!(increments.len(), times.len() - 1);
        Ok(Self {
            times,
            base_index,
            increments,
            jump_events: events,
            event_ptr,
            event_ids,
            seed_label,
            path,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("non-empty grid")
    }

    pub fn increments(&self) -> &BrownianIncrements {
        &self.increments
    }

    pub fn increment(&self, interval: usize) -> &[f64] {
        self.increments.interval(interval)
    }

    pub fn jump_events(&self) -> &[JumpEvent] {
        &self.jump_events
    }

    /// Indices into [`Self::jump_events`] of the events at grid point `point`.
    pub fn events_at(&self, point: usize) -> &[usize] {
        &self.event_ids[self.event_ptr[point]..self.event_ptr[point + 1]]
    }

    /// Position of point `i` on the base grid, `None` for inserted jump times.
    pub fn base_index(&self, i: usize) -> Option<usize> {
        self.base_index[i]
    }

    pub fn dim(&self) -> usize {
        self.increments.dim
    }

    pub fn seed_label(&self) -> u64 {
        self.seed_label
    }

    pub fn path(&self) -> u64 {
        self.path
    }

    /// Number of events of atom `atom`.
    pub fn count_of(&self, atom: usize) -> usize {
        self.jump_events.iter().filter(|e| e.atom == atom).count()
    }

    /// Keeps every `factor`-th base point plus all jump points, summing increments in
    /// between. The result is the same Brownian path seen on a coarser grid.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(Error::Grid("coarsening factor must be at least 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let base_steps = self.base_index.iter().flatten().copied().max().unwrap_or(0);
        if base_steps % factor != 0 {
            return Err(Error::Grid(format!(
                "base step count {base_steps} is not divisible by {factor}"
            )));
        }
        let m = self.increments.dim;
        let mut times = vec![self.times[0]];
        let mut base_index = vec![Some(0)];
        let mut values = Vec::new();
        let mut acc = vec![0.0; m];
        let mut event_ptr = vec![0usize, 0];
        let mut event_ids = Vec::new();
        for k in 1..self.times.len() {
            for (a, v) in acc.iter_mut().zip(self.increments.interval(k - 1)) {
                *a += v;
            }
            let has_events = self.event_ptr[k + 1] > self.event_ptr[k];
            let keep_base = self.base_index[k].is_some_and(|j| j % factor == 0);
            if has_events || keep_base {
                times.push(self.times[k]);
                base_index.push(self.base_index[k].and_then(|j| (j % factor == 0).then_some(j / factor)));
                values.append(&mut acc);
                acc = vec![0.0; m];
                event_ids.extend_from_slice(self.events_at(k));
                event_ptr.push(event_ids.len());
            }
        }
        Ok(Self {
            times,
            base_index,
            increments: BrownianIncrements { dim: m, values },
            jump_events: self.jump_events.clone(),
            event_ptr,
            event_ids,
            seed_label: self.seed_label,
            path: self.path,
        })
    }
}

/// Merges sorted base points with sorted event times. Returns merged times, the base
/// index of each merged point and the merged slot of each event.
fn merge(base: &[f64], events: &[JumpEvent]) -> (Vec<f64>, Vec<Option<usize>>, Vec<usize>) {
    let mut times = Vec::with_capacity(base.len() + events.len());
    let mut base_index = Vec::with_capacity(base.len() + events.len());
    let mut slots = Vec::with_capacity(events.len());
    let mut e = 0;
    for (j, &b) in base.iter().enumerate() {
        while e < events.len() && events[e].time < b - TIME_TOL {
            let t = events[e].time;
            let dup = times.last().is_some_and(|&last: &f64| (t - last).abs() <= TIME_TOL);
            if !dup {
                times.push(t);
                base_index.push(None);
            }
            slots.push(times.len() - 1);
            e += 1;
        }
        times.push(b);
        base_index.push(Some(j));
        while e < events.len() && events[e].time <= b + TIME_TOL {
            slots.push(times.len() - 1);
            e += 1;
        }
    }
    debug_assert_eq!(e, events.len());
    (times, base_index, slots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::Atom;
    use crate::rng::{StreamKey, StreamRole};

    fn rng(path: u64) -> crate::rng::PathRng {
        StreamKey::new(77, path, StreamRole::Aux).rng()
    }

    #[test]
    fn degenerate_grid_has_no_increments() {
        let inc = sample_brownian(&[0.0], 3, &mut rng(0)).unwrap();
        assert!(inc.is_empty());
        assert_eq!(inc.len(), 0);
    }

    #[test]
    fn non_monotone_grid_is_rejected() {
        assert!(matches!(sample_brownian(&[0.0, 0.5, 0.5], 1, &mut rng(0)), Err(Error::Grid(_))));
        assert!(matches!(sample_brownian(&[0.0, 1.0, 0.3], 1, &mut rng(0)), Err(Error::Grid(_))));
        assert!(TimeGrid::new(vec![0.0, 2.0, 1.0]).is_err());
    }

    #[test]
    fn unit_interval_moments() {
        let n = 100_000;
        let mut r = rng(1);
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_brownian(&[0.0, 1.0], 1, &mut r).unwrap().interval(0)[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn brownian_scaling_per_interval() {
        // variances 0.25 and 0.75; SE of a sample variance ≈ v·sqrt(2/n)
        let n = 50_000;
        let mut r = rng(2);
        let mut sq = [[0.0f64; 2]; 2];
        for _ in 0..n {
            let inc = sample_brownian(&[0.0, 0.25, 1.0], 2, &mut r).unwrap();
            assert_eq!(inc.len(), 2);
            for i in 0..2 {
                for c in 0..2 {
                    sq[i][c] += inc.interval(i)[c].powi(2);
                }
            }
        }
        for (i, v) in [0.25, 0.75].into_iter().enumerate() {
            for c in 0..2 {
                let est = sq[i][c] / n as f64;
                let se = v * (2.0 / n as f64).sqrt();
                assert!((est - v).abs() < 5.0 * se, "interval {i} coord {c}: {est}");
            }
        }
    }

    #[test]
    fn uniform_grid_ends_on_horizon() {
        let g = TimeGrid::uniform(0.3, 7).unwrap();
        assert_eq!(g.points().len(), 8);
        assert_eq!(g.horizon(), 0.3);
        assert!(TimeGrid::uniform(1.0, 0).is_err());
        let g2 = g.with_points(&[0.1, 0.3 / 7.0 + 1e-14]).unwrap();
        assert_eq!(g2.points().len(), 9);
        assert!(g2.index_of(0.1).is_some());
    }

    #[test]
    fn realization_merges_jump_times() {
        let m = JumpMeasure::new(vec![Atom::scalar(1.0, 20.0)]).unwrap();
        let base = TimeGrid::uniform(1.0, 10).unwrap();
        let noise = NoiseRealization::generate(&m, &base, 2, 5, 0).unwrap();
        let n_ev = noise.jump_events().len();
        assert!(n_ev > 0);
        assert_eq!(noise.times().len(), 11 + n_ev);
        assert_eq!(noise.increments().len(), noise.times().len() - 1);
        let mut seen = 0;
        for k in 0..noise.times().len() {
            for &e in noise.events_at(k) {
                assert_eq!(noise.jump_events()[e].time, noise.times()[k]);
                seen += 1;
            }
        }
        assert_eq!(seen, n_ev);
    }

    #[test]
    fn jump_on_grid_point_is_attached() {
        let base = TimeGrid::uniform(1.0, 4).unwrap();
        let events = vec![JumpEvent { time: 0.5, atom: 0 }, JumpEvent { time: 0.6, atom: 1 }];
        let noise = NoiseRealization::from_events(&base, events, 1, &mut rng(3)).unwrap();
        assert_eq!(noise.times(), &[0.0, 0.25, 0.5, 0.6, 0.75, 1.0]);
        assert_eq!(noise.events_at(2), &[0]);
        assert_eq!(noise.events_at(3), &[1]);
        assert_eq!(noise.base_index(3), None);
    }

    #[test]
    fn refinement_keeps_jumps() {
        let m = JumpMeasure::new(vec![Atom::scalar(1.0, 3.0), Atom::scalar(-1.0, 2.0)]).unwrap();
        for path in 0..20 {
            let coarse = NoiseRealization::generate(&m, &TimeGrid::uniform(1.0, 10).unwrap(), 1, 8, path).unwrap();
            let fine = NoiseRealization::generate(&m, &TimeGrid::uniform(1.0, 40).unwrap(), 1, 8, path).unwrap();
            assert_eq!(coarse.jump_events(), fine.jump_events());
            assert!(coarse.times().iter().all(|t| fine.times().contains(t)));
        }
    }

    #[test]
    fn coarsen_preserves_brownian_path() {
        let m = JumpMeasure::new(vec![Atom::scalar(1.0, 4.0)]).unwrap();
        let fine = NoiseRealization::generate(&m, &TimeGrid::uniform(2.0, 12).unwrap(), 2, 1, 4).unwrap();
        let coarse = fine.coarsen(3).unwrap();
        assert_eq!(coarse.jump_events(), fine.jump_events());
        assert_eq!(coarse.times().len(), 5 + fine.jump_events().len());
        let (a, b) = (fine.increments().total(), coarse.increments().total());
        for c in 0..2 {
            assert!((a[c] - b[c]).abs() < 1e-12);
        }
        assert!(fine.coarsen(5).is_err());
        for k in 0..coarse.times().len() {
            for &e in coarse.events_at(k) {
                assert_eq!(coarse.jump_events()[e].time, coarse.times()[k]);
            }
        }
    }
}
