//! Cross-module properties: sampling laws, engine identities and experiment
//! invariants.

use std::collections::BTreeMap;

use jumpsde::experiments::{
    run_continuity, run_girsanov_bridge, run_irreducibility, run_moments, run_paths, ContinuitySpec,
    IrreducibilitySpec, MomentSpec,
};
use jumpsde::measure::{compensator_integral, sample_jump_events};
use jumpsde::quad::integrate;
use jumpsde::{
    build_registry, simulate_coupled_pair, simulate_path, Atom, BridgeSpec, CoefficientSet, Estimate, JumpMeasure,
    McConfig, ModulusSpec, NoiseRealization, SimConfig, StreamKey, StreamRole, TestFunction, TimeGrid,
};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn model(name: &str) -> CoefficientSet {
    build_registry().build_default(name).unwrap()
}

fn bm(d: usize) -> CoefficientSet {
    let p: BTreeMap<String, f64> = [("d".to_string(), d as f64)].into();
    build_registry().build("bm", &p).unwrap()
}

#[test]
fn superposition_matches_merged_single_atoms() {
    let both = JumpMeasure::new(vec![Atom::scalar(1.0, 1.0), Atom::scalar(2.0, 3.0)]).unwrap();
    let a = JumpMeasure::new(vec![Atom::scalar(1.0, 1.0)]).unwrap();
    let b = JumpMeasure::new(vec![Atom::scalar(2.0, 3.0)]).unwrap();
    let n = 20_000;
    let bins = 16;
    let mut hist = [vec![0f64; bins], vec![0f64; bins]];
    for i in 0..n {
        let mut r1 = StreamKey::new(1, i, StreamRole::Jumps).rng();
        let c1 = sample_jump_events(&both, 2.0, &mut r1).unwrap().len();
        let mut r2 = StreamKey::new(2, i, StreamRole::Jumps).rng();
        let mut r3 = StreamKey::new(3, i, StreamRole::Jumps).rng();
        let c2 = sample_jump_events(&a, 2.0, &mut r2).unwrap().len() + sample_jump_events(&b, 2.0, &mut r3).unwrap().len();
        hist[0][c1.min(bins - 1)] += 1.0;
        hist[1][c2.min(bins - 1)] += 1.0;
    }
    // two-sample chi-square homogeneity test over the pooled bins with enough mass
    let mut stat = 0.0;
    let mut dof = 0;
    for k in 0..bins {
        let total = hist[0][k] + hist[1][k];
        if total < 10.0 {
            continue;
        }
        let expect = total / 2.0;
        stat += (hist[0][k] - expect).powi(2) / expect + (hist[1][k] - expect).powi(2) / expect;
        dof += 1;
    }
    let p = 1.0 - ChiSquared::new((dof - 1) as f64).unwrap().cdf(stat);
    assert!(p > 0.001, "chi-square {stat} on {} dof, p = {p}", dof - 1);
}

#[test]
fn jump_sampling_is_deterministic() {
    let m = JumpMeasure::new(vec![Atom::scalar(0.5, 2.0), Atom::scalar(-1.0, 0.0), Atom::scalar(3.0, 1.5)]).unwrap();
    let draw = || sample_jump_events(&m, 5.0, &mut StreamKey::new(9, 3, StreamRole::Jumps).rng()).unwrap();
    let first = draw();
    assert_eq!(first, draw());
    assert!(first.iter().all(|e| e.atom != 1));
}

#[test]
fn compensation_identity_on_symmetric_jumps() {
    let ou = model("ou_jump");
    let mut comp = [0.0];
    let mut scratch = [0.0];
    ou.compensator_drift(0.0, &[0.7], &mut comp, &mut scratch);
    assert_eq!(comp[0], 0.0);
    let direct = compensator_integral(ou.measure(), |u| u[0]);
    assert_eq!(direct, 0.0);

    let (x0, theta, t) = (2.0, 1.0, 1.0);
    let mc = McConfig::new(20_000, 200, 10);
    let cfg = SimConfig::new(t, mc.n_steps, vec![x0], mc.seed);
    let ends = run_paths(&mc, |path| Ok(simulate_path(&ou, &cfg, &cfg.noise(&ou, path)?)?.final_state()[0])).unwrap();
    let est = Estimate::from_samples(&ends);
    // Euler mean is x₀(1 − θΔt)^n; the exact OU mean differs by O(Δt)
    let euler_mean = x0 * (1.0 - theta * t / mc.n_steps as f64).powi(mc.n_steps as i32);
    assert!(est.within(euler_mean, 3.0), "{est:?} vs {euler_mean}");
    assert!((euler_mean - x0 * (-theta * t).exp()).abs() < 2e-3);
}

#[test]
fn refinement_inserts_points_only() {
    let gbm = model("gbm_jump");
    for path in 0..10 {
        let coarse = NoiseRealization::generate(gbm.measure(), &TimeGrid::uniform(1.0, 50).unwrap(), 1, 5, path).unwrap();
        let fine = NoiseRealization::generate(gbm.measure(), &TimeGrid::uniform(1.0, 200).unwrap(), 1, 5, path).unwrap();
        assert_eq!(coarse.jump_events(), fine.jump_events());
        for t in coarse.times() {
            assert!(fine.times().iter().any(|s| (s - t).abs() <= 1e-12));
        }
    }
}

#[test]
fn gbm_coupled_ratio_is_two() {
    let gbm = model("gbm_jump");
    let cfg = SimConfig::new(1.0, 10_000, vec![1.0], 4).with_pair(vec![0.5]);
    for path in 0..5 {
        let pair = simulate_coupled_pair(&gbm, &cfg, &cfg.noise(&gbm, path).unwrap()).unwrap();
        for i in 0..pair.x.len() {
            let ratio = pair.x.state(i)[0] / pair.y.state(i)[0];
            assert!((ratio - 2.0).abs() < 1e-2, "ratio {ratio}");
        }
    }
}

#[test]
fn gbm_mean_at_desk_scale() {
    let gbm = model("gbm_jump");
    let mc = McConfig::new(20_000, 500, 21);
    let cfg = SimConfig::new(1.0, mc.n_steps, vec![1.0], mc.seed);
    let ends = run_paths(&mc, |path| Ok(simulate_path(&gbm, &cfg, &cfg.noise(&gbm, path)?)?.final_state()[0])).unwrap();
    let est = Estimate::from_samples(&ends);
    assert!((est.value - 0.6f64.exp()).abs() <= 3.0 * est.se + 2.0 / 500.0, "{est:?}");
}

#[test]
fn doubling_paths_stays_within_band() {
    let gbm = model("gbm_jump");
    let spec = MomentSpec { x0: vec![1.0], p: 2.0, t: 1.0 };
    let a = run_moments(&gbm, &spec, &McConfig::new(4000, 200, 14)).unwrap().estimate("sup_moment").unwrap();
    let b = run_moments(&gbm, &spec, &McConfig::new(8000, 200, 14)).unwrap().estimate("sup_moment").unwrap();
    assert!((a.value - b.value).abs() <= 4.0 * (a.se * a.se + b.se * b.se).sqrt(), "{a:?} {b:?}");
}

#[test]
fn continuity_ladder_monotone_within_noise() {
    let gbm = model("gbm_jump");
    let spec = ContinuitySpec {
        x: vec![1.0],
        ys: vec![vec![1.4], vec![1.2], vec![1.1], vec![1.05]],
        t: 1.0,
        eps_dist: 0.5,
        delta: None,
        modulus: None,
    };
    let s = run_continuity(&gbm, &spec, &McConfig::new(4000, 200, 15)).unwrap();
    let p: Vec<Estimate> = (0..4).map(|k| s.estimate(&format!("rung{k}.p_hat")).unwrap()).collect();
    for w in p.windows(2) {
        assert!(w[0].value >= w[1].value - 3.0 * (w[0].se + w[1].se), "{p:?}");
    }
    assert!(s.all_satisfied());
}

#[test]
fn irreducibility_matches_gaussian_mass() {
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    for (y0, r) in [(2.0, 0.5), (0.0, 0.25), (-1.0, 1.0)] {
        let spec = IrreducibilitySpec { x0: vec![0.0], y0: vec![y0], r, s: 0.0, t: 1.0 };
        let s = run_irreducibility(&bm(1), &spec, &McConfig::new(20_000, 5, 16)).unwrap();
        let oracle = integrate(pdf, y0 - r, y0 + r, 1e-12);
        let p = s.estimate("p_hat").unwrap();
        assert!(p.within(oracle, 3.0), "y0={y0}, r={r}: {p:?} vs {oracle}");
    }
}

#[test]
fn girsanov_density_section4_away_from_origin() {
    let s4 = model("section4");
    let spec = BridgeSpec::new(0.5, 1.0, vec![2.0, 2.0], 0.0, 0.5);
    let s = run_girsanov_bridge(&s4, &[2.0, 0.0], &spec, &McConfig::new(4000, 200, 17)).unwrap();
    let d = s.estimate("density_mean").unwrap();
    let flagged = s.metadata["flagged_fraction"].as_f64().unwrap();
    assert!(flagged < 1.0);
    assert!(d.within(1.0, 3.0), "{d:?}, flagged fraction {flagged}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn continuity_test_function_concave_nondecreasing(
        delta in 1e-3..1.0f64,
        a in 0.0..5.0f64,
        gap in 1e-3..5.0f64,
        which in 0usize..3,
    ) {
        let modulus = [ModulusSpec::Linear { c: 1.0 }, ModulusSpec::Linear { c: 3.0 }, ModulusSpec::XLog { r: 0.1 }][which];
        let phi = TestFunction::continuity(delta, modulus).unwrap();
        let b = a + gap;
        let (fa, fb, fm) = (phi.eval(a).unwrap(), phi.eval(b).unwrap(), phi.eval(0.5 * (a + b)).unwrap());
        prop_assert!(fb >= fa);
        prop_assert!(fm >= 0.5 * (fa + fb) - 1e-9 * fb.abs().max(1.0));
    }

    #[test]
    fn confluence_test_function_ode(delta in 1e-3..1.0f64, c0 in 0.1..4.0f64, x in 0.05..5.0f64, which in 0usize..3) {
        let modulus = [ModulusSpec::Linear { c: 1.0 }, ModulusSpec::LinearGamma { c: 2.0 }, ModulusSpec::XLog { r: 0.1 }][which];
        let phi = TestFunction::confluence(delta, c0, modulus).unwrap();
        let h = 1e-5 * x;
        let deriv = (phi.eval(x + h).unwrap() - phi.eval(x - h).unwrap()) / (2.0 * h);
        let expect = -phi.eval(x).unwrap() / (modulus.eval(x).unwrap() + delta);
        prop_assert!((deriv - expect).abs() <= 1e-6 * expect.abs().max(1e-12), "{deriv} vs {expect}");
        prop_assert!(phi.eval(x).unwrap() > 0.0);
    }

    #[test]
    fn compensator_additive(rates in prop::collection::vec(0.0..5.0f64, 1..6), split in 0usize..6) {
        let atoms: Vec<Atom> = rates.iter().enumerate().map(|(i, &r)| Atom::scalar(i as f64 - 2.0, r)).collect();
        let m = JumpMeasure::new(atoms).unwrap();
        let f = |u: &[f64]| u[0] * u[0] + 1.0;
        let whole = compensator_integral(&m, f);
        let left = compensator_integral(&m.restrict(|k| k < split), f);
        let right = compensator_integral(&m.restrict(|k| k >= split), f);
        prop_assert!((whole - left - right).abs() <= 1e-12 * whole.abs().max(1.0));
    }

    #[test]
    fn registry_evaluations_pure(x in prop::collection::vec(-50.0..50.0f64, 2)) {
        let s4 = model("section4");
        let (mut a, mut b) = ([0.0; 4], [0.0; 4]);
        s4.diffusion(0.0, &x, &mut a);
        s4.diffusion(0.0, &x, &mut b);
        prop_assert_eq!(a, b);
        let (mut u, mut v) = ([0.0; 2], [0.0; 2]);
        s4.drift(0.0, &x, &mut u);
        s4.drift(0.0, &x, &mut v);
        prop_assert_eq!(u, v);
    }
}
