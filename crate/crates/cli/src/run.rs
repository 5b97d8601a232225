use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use jumpsde::experiments::{
    run_continuity, run_girsanov_bridge, run_irreducibility, run_moments, run_nonconfluence, ContinuitySpec,
    IrreducibilitySpec, MomentSpec, NonconfluenceSpec, SCHEMA_VERSION,
};
use jumpsde::{
    build_registry, check_condition, simulate_coupled_pair, simulate_path, BridgeSpec, CheckParams, CoefficientSet,
    ConditionReport, Envelope, McConfig, PathRecord, SampleGrid, SimConfig,
};
use serde_json::json;

use crate::config::{Command, ExperimentKind, Format, RunConfig};
use crate::{CliError, EXIT_VIOLATION};

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    /// Lines meant for stdout.
    pub stdout: Vec<String>,
}

/// Runs `cfg`, writing the resolved config and all artifacts under its output
/// directory. Operational failures come back as `Err`; violated conditions come
/// back as `Ok` with exit code 2.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let out = cfg.out_dir();
    fs::create_dir_all(&out).map_err(|e| CliError::io(format!("cannot create output directory {}", out.display()), e))?;
    write_text(&out.join("resolved.conf"), &cfg.emit())?;
    let model = build_registry().build(cfg.model(), &cfg.params())?;
    match cfg.command {
        Command::Simulate => simulate(cfg, &model, &out),
        Command::Check => check(cfg, &model, &out),
        Command::Experiment(kind) => experiment(cfg, kind, &model, &out),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(format!("cannot write {}", path.display()), e))
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).map_err(|e| CliError::Config(format!("cannot serialize summary: {e}")))?;
    write_text(path, &(text + "\n"))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), CliError> {
    let ctx = || format!("cannot write {}", path.display());
    let file = File::create(path).map_err(|e| CliError::io(ctx(), e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(ctx(), e))
}

fn required_vec(cfg: &RunConfig, key: &str) -> Result<Vec<f64>, CliError> {
    cfg.vector(key).ok_or_else(|| CliError::Config(format!("missing required field '{key}'")))
}

fn float(cfg: &RunConfig, key: &str) -> f64 {
    cfg.float(key).unwrap_or_else(|| panic!("resolved config lacks '{key}'"))
}

fn uint(cfg: &RunConfig, key: &str) -> usize {
    cfg.uint(key).unwrap_or_else(|| panic!("resolved config lacks '{key}'")) as usize
}

fn path_summary(p: &PathRecord) -> serde_json::Value {
    json!({
        "n_points": p.len(),
        "n_jumps": p.jump_markers.iter().filter(|m| m.is_some()).count(),
        "exploded": p.exploded,
        "explosion_time": p.explosion_time,
        "final_state": p.final_state(),
        "sup_norm": p.sup_norm(),
    })
}

fn simulate(cfg: &RunConfig, model: &CoefficientSet, out: &Path) -> Result<Outcome, CliError> {
    let mut sim = SimConfig::new(float(cfg, "T"), uint(cfg, "n_steps"), required_vec(cfg, "x0")?, cfg.seed())
        .with_explosion_radius(float(cfg, "explosion_radius"));
    if let Some(y0) = cfg.vector("y0") {
        sim = sim.with_pair(y0);
    }
    let path = cfg.uint("path").unwrap_or(0);
    let noise = sim.noise(model, path)?;
    let csv = cfg.formats().contains(&Format::Csv);
    let mut summary = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "model": model.name(),
        "seed": cfg.seed(),
        "path": path,
    });
    if sim.y0.is_some() {
        let pair = simulate_coupled_pair(model, &sim, &noise)?;
        if csv {
            write_with(&out.join("path_x.csv"), |w| pair.x.write_csv(w))?;
            write_with(&out.join("path_y.csv"), |w| pair.y.write_csv(w))?;
        }
        summary["x"] = path_summary(&pair.x);
        summary["y"] = path_summary(&pair.y);
        summary["min_distance"] = json!(pair.min_distance);
    } else {
        let rec = simulate_path(model, &sim, &noise)?;
        if csv {
            write_with(&out.join("path.csv"), |w| rec.write_csv(w))?;
        }
        summary["x"] = path_summary(&rec);
    }
    write_json(&out.join("summary.json"), &summary)?;
    Ok(Outcome { exit_code: 0, stdout: vec![format!("wrote {}", out.display())] })
}

fn check(cfg: &RunConfig, model: &CoefficientSet, out: &Path) -> Result<Outcome, CliError> {
    let mut params = CheckParams::for_model(model);
    if let Some(m) = cfg.modulus("modulus") {
        params.modulus = m;
    }
    if let Some(g) = cfg.float("g") {
        params.g = Envelope::Constant(g);
    }
    if let Some(f) = cfg.float("f") {
        params.f = Envelope::Constant(f);
    }
    if let Some(p) = cfg.float("p") {
        params.p = p;
    }
    params.lambda = float(cfg, "lambda");
    params.k = float(cfg, "K");
    params.lin_k = float(cfg, "lin_k");
    params.validate()?;
    let grid = SampleGrid::low_discrepancy(
        model.dim_state(),
        float(cfg, "grid_radius"),
        uint(cfg, "grid_points"),
        uint(cfg, "grid_pairs"),
    )?
    .with_times(cfg.vector("times").unwrap_or_else(|| vec![0.0]))?;

    let mut reports: Vec<ConditionReport> = Vec::new();
    let mut stdout = Vec::new();
    for id in cfg.conditions() {
        let report = check_condition(id, model, &params, &grid)?;
        write_json(&out.join(format!("check_{}.json", id.as_str())), &report)?;
        stdout.push(serde_json::to_string(&report).map_err(|e| CliError::Config(e.to_string()))?);
        reports.push(report);
    }
    let all = reports.iter().all(|r| r.satisfied);
    let summary = json!({
        "schema_version": SCHEMA_VERSION,
        "command": "check",
        "model": model.name(),
        "seed": cfg.seed(),
        "all_satisfied": all,
        "reports": reports,
    });
    write_json(&out.join("summary.json"), &summary)?;
    Ok(Outcome { exit_code: if all { 0 } else { EXIT_VIOLATION }, stdout })
}

fn experiment(cfg: &RunConfig, kind: ExperimentKind, model: &CoefficientSet, out: &Path) -> Result<Outcome, CliError> {
    let mut mc = McConfig::new(uint(cfg, "n_paths"), uint(cfg, "n_steps"), cfg.seed())
        .with_noise_refine(uint(cfg, "noise_refine"));
    mc.explosion_radius = float(cfg, "explosion_radius");
    if let Some(k) = cfg.uint("threads") {
        mc = mc.with_threads(k as usize);
    }
    let horizon = float(cfg, "T");
    let x0 = required_vec(cfg, "x0")?;
    let summary = match kind {
        ExperimentKind::Continuity => {
            let spec = ContinuitySpec {
                x: x0,
                ys: cfg.ladder("ladder").unwrap_or_default(),
                t: horizon,
                eps_dist: float(cfg, "eps_dist"),
                delta: cfg.float("delta"),
                modulus: cfg.modulus("modulus"),
            };
            run_continuity(model, &spec, &mc)?
        }
        ExperimentKind::Nonconfluence => {
            let mut spec = NonconfluenceSpec::new(x0, required_vec(cfg, "y0")?, horizon);
            spec.k = float(cfg, "K");
            spec.gamma = cfg.modulus("gamma").unwrap_or(spec.gamma);
            spec.delta = float(cfg, "delta");
            spec.eps_levels = required_vec(cfg, "eps_levels")?;
            run_nonconfluence(model, &spec, &mc)?
        }
        ExperimentKind::Moments => {
            let spec = MomentSpec { x0, p: float(cfg, "p"), t: horizon };
            run_moments(model, &spec, &mc)?
        }
        ExperimentKind::Girsanov => {
            let mut spec =
                BridgeSpec::new(float(cfg, "t1"), horizon, required_vec(cfg, "y0")?, float(cfg, "eps"), float(cfg, "r"));
            spec.p = float(cfg, "p");
            run_girsanov_bridge(model, &x0, &spec, &mc)?
        }
        ExperimentKind::Irreducibility => {
            let spec = IrreducibilitySpec {
                x0,
                y0: required_vec(cfg, "y0")?,
                r: float(cfg, "r"),
                s: float(cfg, "s"),
                t: horizon,
            };
            run_irreducibility(model, &spec, &mc)?
        }
    };
    write_json(&out.join("summary.json"), &summary)?;
    if cfg.formats().contains(&Format::Csv) {
        write_with(&out.join("per_path.csv"), |w| summary.per_path.write_csv(w))?;
    }
    let line = format!(
        "{}: {} estimates, {} comparisons, all satisfied = {}",
        summary.experiment_id,
        summary.estimates.len(),
        summary.bound_comparisons.len(),
        summary.all_satisfied()
    );
    Ok(Outcome { exit_code: 0, stdout: vec![line] })
}
