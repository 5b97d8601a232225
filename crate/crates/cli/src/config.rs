//! Flat `key = value` run configuration.
//!
//! A config file holds one `key = value` per line; blank lines and lines starting
//! with `#` are ignored. Model parameters are written `param.<name> = <value>`.
//! Flags override file values, unknown or inapplicable keys are rejected, and
//! [`RunConfig::resolve`] materializes every default so that the emitted text is a
//! complete, reproducible description of the run.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use jumpsde::{build_registry, ConditionId, ModulusSpec};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    Continuity,
    Nonconfluence,
    Moments,
    Girsanov,
    Irreducibility,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::Continuity,
        ExperimentKind::Nonconfluence,
        ExperimentKind::Moments,
        ExperimentKind::Girsanov,
        ExperimentKind::Irreducibility,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Continuity => "continuity",
            ExperimentKind::Nonconfluence => "nonconfluence",
            ExperimentKind::Moments => "moments",
            ExperimentKind::Girsanov => "girsanov",
            ExperimentKind::Irreducibility => "irreducibility",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Simulate,
    Check,
    Experiment(ExperimentKind),
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Simulate => f.write_str("simulate"),
            Command::Check => f.write_str("check"),
            Command::Experiment(k) => write!(f, "experiment.{}", k.as_str()),
        }
    }
}

impl FromStr for Command {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.trim() {
            "simulate" => Ok(Command::Simulate),
            "check" => Ok(Command::Check),
            other => other
                .strip_prefix("experiment.")
                .and_then(|k| ExperimentKind::ALL.into_iter().find(|e| e.as_str() == k))
                .map(Command::Experiment)
                .ok_or_else(|| {
                    CliError::Config(format!(
                        "unknown command {other:?}; expected simulate, check or experiment.{{continuity, nonconfluence, moments, girsanov, irreducibility}}"
                    ))
                }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Str,
    Uint,
    Float,
    Vector,
    Ladder,
    FloatList,
    Modulus,
    Conditions,
    Formats,
    Path,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Kind::Str => "string",
            Kind::Uint => "unsigned integer",
            Kind::Float => "number",
            Kind::Vector => "comma-separated vector of numbers, e.g. 1,0",
            Kind::Ladder => "semicolon-separated list of vectors, e.g. 1.1;1.01",
            Kind::FloatList => "comma-separated list of numbers",
            Kind::Modulus => "modulus LINEAR(c), XLOG(r) or LINEAR_GAMMA(c)",
            Kind::Conditions => "comma-separated condition ids from {C3, C5, C6, C7, C8, C9, C10, C11, LIN}",
            Kind::Formats => "comma-separated subset of {csv, json}",
            Kind::Path => "path",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Uint(u64),
    Float(f64),
    Vector(Vec<f64>),
    Ladder(Vec<Vec<f64>>),
    FloatList(Vec<f64>),
    Modulus(ModulusSpec),
    Conditions(Vec<ConditionId>),
    Formats(Vec<Format>),
    Path(PathBuf),
}

fn join(v: &[f64], sep: &str) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => f.write_str(s),
            Value::Uint(n) => write!(f, "{n}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Vector(v) | Value::FloatList(v) => f.write_str(&join(v, ",")),
            Value::Ladder(l) => f.write_str(&l.iter().map(|v| join(v, ",")).collect::<Vec<_>>().join(";")),
            Value::Modulus(m) => write!(f, "{m}"),
            Value::Conditions(c) => f.write_str(&c.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(",")),
            Value::Formats(fs) => f.write_str(
                &fs.iter().map(|x| if *x == Format::Csv { "csv" } else { "json" }).collect::<Vec<_>>().join(","),
            ),
            Value::Path(p) => write!(f, "{}", p.display()),
        }
    }
}

fn parse_numbers(s: &str, sep: char) -> Option<Vec<f64>> {
    s.split(sep).map(|p| p.trim().parse::<f64>().ok()).collect()
}

fn parse_value(key: &str, kind: Kind, raw: &str) -> Result<Value, CliError> {
    let raw = raw.trim();
    let bad = || CliError::Config(format!("key '{key}': expected {}, got {raw:?}", kind.describe()));
    let v = match kind {
        Kind::Str => Value::Str(raw.trim_matches('"').to_string()),
        Kind::Path => Value::Path(PathBuf::from(raw.trim_matches('"'))),
        Kind::Uint => Value::Uint(raw.parse().map_err(|_| bad())?),
        Kind::Float => Value::Float(raw.parse().map_err(|_| bad())?),
        Kind::Vector | Kind::FloatList => {
            let v = parse_numbers(raw, ',').filter(|v| !v.is_empty()).ok_or_else(bad)?;
            if kind == Kind::Vector { Value::Vector(v) } else { Value::FloatList(v) }
        }
        Kind::Ladder => Value::Ladder(
            raw.split(';').map(|part| parse_numbers(part, ',')).collect::<Option<Vec<_>>>().ok_or_else(bad)?,
        ),
        Kind::Modulus => Value::Modulus(raw.parse().map_err(|_| bad())?),
        Kind::Conditions => Value::Conditions(
            raw.split(',').map(|c| c.parse::<ConditionId>()).collect::<Result<Vec<_>, _>>().map_err(|_| bad())?,
        ),
        Kind::Formats => Value::Formats(
            raw.split(',')
                .map(|f| match f.trim().to_ascii_lowercase().as_str() {
                    "csv" => Ok(Format::Csv),
                    "json" => Ok(Format::Json),
                    _ => Err(bad()),
                })
                .collect::<Result<Vec<_>, _>>()?,
        ),
    };
    Ok(v)
}

#[derive(Debug, Clone, Copy)]
enum Default {
    Required,
    Optional,
    Text(&'static str),
}

struct KeySpec {
    name: &'static str,
    kind: Kind,
    default: Default,
    applies: fn(Command) -> bool,
}

fn all(_: Command) -> bool {
    true
}
fn simulate(c: Command) -> bool {
    c == Command::Simulate
}
fn check(c: Command) -> bool {
    c == Command::Check
}
fn experiment(c: Command) -> bool {
    matches!(c, Command::Experiment(_))
}
fn sim_or_exp(c: Command) -> bool {
    simulate(c) || experiment(c)
}
fn kind_is(c: Command, ks: &[ExperimentKind]) -> bool {
    matches!(c, Command::Experiment(k) if ks.contains(&k))
}
fn continuity(c: Command) -> bool {
    kind_is(c, &[ExperimentKind::Continuity])
}
fn nonconfluence(c: Command) -> bool {
    kind_is(c, &[ExperimentKind::Nonconfluence])
}
fn girsanov(c: Command) -> bool {
    kind_is(c, &[ExperimentKind::Girsanov])
}
fn irreducibility(c: Command) -> bool {
    kind_is(c, &[ExperimentKind::Irreducibility])
}
fn y0_required(c: Command) -> bool {
    kind_is(c, &[ExperimentKind::Nonconfluence, ExperimentKind::Girsanov, ExperimentKind::Irreducibility])
}
fn p_key(c: Command) -> bool {
    kind_is(c, &[ExperimentKind::Moments, ExperimentKind::Girsanov])
}
fn k_key(c: Command) -> bool {
    check(c) || nonconfluence(c)
}
fn modulus_key(c: Command) -> bool {
    check(c) || continuity(c)
}
fn r_key(c: Command) -> bool {
    girsanov(c) || irreducibility(c)
}
const KEYS: &[KeySpec] = &[
    KeySpec { name: "model", kind: Kind::Str, default: Default::Required, applies: all },
    KeySpec { name: "seed", kind: Kind::Uint, default: Default::Text("0"), applies: all },
    KeySpec { name: "out", kind: Kind::Path, default: Default::Text("out"), applies: all },
    KeySpec { name: "formats", kind: Kind::Formats, default: Default::Optional, applies: all },
    KeySpec { name: "T", kind: Kind::Float, default: Default::Text("1"), applies: sim_or_exp },
    KeySpec { name: "n_steps", kind: Kind::Uint, default: Default::Text("1000"), applies: sim_or_exp },
    KeySpec { name: "x0", kind: Kind::Vector, default: Default::Required, applies: sim_or_exp },
    KeySpec { name: "explosion_radius", kind: Kind::Float, default: Default::Text("1e6"), applies: sim_or_exp },
    KeySpec { name: "path", kind: Kind::Uint, default: Default::Text("0"), applies: simulate },
    KeySpec { name: "y0", kind: Kind::Vector, default: Default::Optional, applies: simulate },
    KeySpec { name: "y0", kind: Kind::Vector, default: Default::Required, applies: y0_required },
    KeySpec { name: "n_paths", kind: Kind::Uint, default: Default::Text("1000"), applies: experiment },
    KeySpec { name: "threads", kind: Kind::Uint, default: Default::Optional, applies: experiment },
    KeySpec { name: "noise_refine", kind: Kind::Uint, default: Default::Text("1"), applies: experiment },
    KeySpec { name: "ladder", kind: Kind::Ladder, default: Default::Required, applies: continuity },
    KeySpec { name: "eps_dist", kind: Kind::Float, default: Default::Text("0.5"), applies: continuity },
    KeySpec { name: "delta", kind: Kind::Float, default: Default::Optional, applies: continuity },
    KeySpec { name: "delta", kind: Kind::Float, default: Default::Text("1e-4"), applies: nonconfluence },
    KeySpec { name: "modulus", kind: Kind::Modulus, default: Default::Optional, applies: modulus_key },
    KeySpec { name: "K", kind: Kind::Float, default: Default::Text("2"), applies: k_key },
    KeySpec { name: "gamma", kind: Kind::Modulus, default: Default::Text("LINEAR(1)"), applies: nonconfluence },
    KeySpec { name: "eps_levels", kind: Kind::FloatList, default: Default::Text("0.01,0.0001,0.000001"), applies: nonconfluence },
    KeySpec { name: "p", kind: Kind::Float, default: Default::Optional, applies: check },
    KeySpec { name: "p", kind: Kind::Float, default: Default::Text("2"), applies: p_key },
    KeySpec { name: "t1", kind: Kind::Float, default: Default::Optional, applies: girsanov },
    KeySpec { name: "eps", kind: Kind::Float, default: Default::Text("0"), applies: girsanov },
    KeySpec { name: "r", kind: Kind::Float, default: Default::Text("0.5"), applies: r_key },
    KeySpec { name: "s", kind: Kind::Float, default: Default::Text("0"), applies: irreducibility },
    KeySpec { name: "conditions", kind: Kind::Conditions, default: Default::Text("C3,C5,C6,C7,C8,C9,C10,C11,LIN"), applies: check },
    KeySpec { name: "grid_radius", kind: Kind::Float, default: Default::Text("10"), applies: check },
    KeySpec { name: "grid_points", kind: Kind::Uint, default: Default::Text("10000"), applies: check },
    KeySpec { name: "grid_pairs", kind: Kind::Uint, default: Default::Text("10000"), applies: check },
    KeySpec { name: "times", kind: Kind::FloatList, default: Default::Text("0"), applies: check },
    KeySpec { name: "g", kind: Kind::Float, default: Default::Optional, applies: check },
    KeySpec { name: "f", kind: Kind::Float, default: Default::Optional, applies: check },
    KeySpec { name: "lambda", kind: Kind::Float, default: Default::Text("10"), applies: check },
    KeySpec { name: "lin_k", kind: Kind::Float, default: Default::Text("10"), applies: check },
];

const PARAM_PREFIX: &str = "param.";

fn spec_for(key: &str, cmd: Command) -> Result<&'static KeySpec, CliError> {
    let mut known = false;
    for spec in KEYS {
        if spec.name == key {
            known = true;
            if (spec.applies)(cmd) {
                return Ok(spec);
            }
        }
    }
    Err(CliError::Config(if known {
        format!("key '{key}' does not apply to command {cmd}")
    } else {
        format!("unknown key '{key}'")
    }))
}

/// Parses flat `key = value` text into raw pairs, keeping the last value of a
/// repeated key.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected 'key = value', got {line:?}", lineno + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// A fully resolved run: every applicable key carries a value except optional keys
/// left unset.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    values: BTreeMap<String, Value>,
}

impl RunConfig {
    /// Merges `file` and `flags` (flags win) and materializes defaults. A `command`
    /// key in the file must agree with `command` when both are given.
    pub fn resolve(
        command: Option<Command>,
        file: &BTreeMap<String, String>,
        flags: &BTreeMap<String, String>,
    ) -> Result<Self, CliError> {
        let mut raw = file.clone();
        raw.extend(flags.iter().map(|(k, v)| (k.clone(), v.clone())));
        let file_cmd = raw.remove("command").map(|c| c.parse::<Command>()).transpose()?;
        let command = match (command, file_cmd) {
            (Some(a), Some(b)) if a != b => {
                return Err(CliError::Config(format!("config file is for command {b}, but {a} was requested")));
            }
            (Some(a), _) => a,
            (None, Some(b)) => b,
            (None, None) => return Err(CliError::Config("missing required field 'command'".into())),
        };

        let mut values = BTreeMap::new();
        let mut params = BTreeMap::new();
        for (k, v) in &raw {
            if let Some(name) = k.strip_prefix(PARAM_PREFIX) {
                let x: f64 = v.trim().parse().map_err(|_| {
                    CliError::Config(format!("key '{k}': expected {}, got {v:?}", Kind::Float.describe()))
                })?;
                params.insert(name.to_string(), x);
                continue;
            }
            let spec = spec_for(k, command)?;
            values.insert(k.clone(), parse_value(k, spec.kind, v)?);
        }
        for spec in KEYS {
            if values.contains_key(spec.name) || !std::ptr::eq(spec, spec_for(spec.name, command).unwrap_or(spec)) {
                continue;
            }
            if !(spec.applies)(command) {
                continue;
            }
            match spec.default {
                Default::Required => {
                    return Err(CliError::Config(format!("missing required field '{}' for command {command}", spec.name)))
                }
                Default::Optional => {}
                Default::Text(t) => {
                    values.insert(spec.name.to_string(), parse_value(spec.name, spec.kind, t)?);
                }
            }
        }
        if !values.contains_key("formats") {
            let f = if command == Command::Simulate { vec![Format::Csv, Format::Json] } else { vec![Format::Json] };
            values.insert("formats".into(), Value::Formats(f));
        }
        if girsanov(command) && !values.contains_key("t1") {
            let t = match values.get("T") {
                Some(Value::Float(t)) => *t,
                _ => 1.0,
            };
            values.insert("t1".into(), Value::Float(0.5 * t));
        }
        let Some(Value::Str(model)) = values.get("model") else {
            return Err(CliError::Config("missing required field 'model'".into()));
        };
        let registry = build_registry();
        let resolved = registry.resolve_params(model, &params)?;
        for (k, v) in resolved {
            values.insert(format!("{PARAM_PREFIX}{k}"), Value::Float(v));
        }
        Ok(Self { command, values })
    }

    /// Parses a complete config document (as written by [`Self::emit`]).
    pub fn parse(text: &str) -> Result<Self, CliError> {
        Self::resolve(None, &parse_pairs(text)?, &BTreeMap::new())
    }

    /// `key = value` lines, sorted, starting with the command.
    pub fn emit(&self) -> String {
        let mut s = format!("command = {}\n", self.command);
        for (k, v) in &self.values {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    pub fn model(&self) -> &str {
        match self.values.get("model") {
            Some(Value::Str(s)) => s,
            _ => unreachable!("model is required"),
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        self.values
            .iter()
            .filter_map(|(k, v)| match (k.strip_prefix(PARAM_PREFIX), v) {
                (Some(name), Value::Float(x)) => Some((name.to_string(), *x)),
                _ => None,
            })
            .collect()
    }

    pub fn float(&self, key: &str) -> Option<f64> {
        match self.values.get(key) {
            Some(Value::Float(x)) => Some(*x),
            _ => None,
        }
    }

    pub fn uint(&self, key: &str) -> Option<u64> {
        match self.values.get(key) {
            Some(Value::Uint(x)) => Some(*x),
            _ => None,
        }
    }

    pub fn vector(&self, key: &str) -> Option<Vec<f64>> {
        match self.values.get(key) {
            Some(Value::Vector(v)) | Some(Value::FloatList(v)) => Some(v.clone()),
            _ => None,
        }
    }

    pub fn ladder(&self, key: &str) -> Option<Vec<Vec<f64>>> {
        match self.values.get(key) {
            Some(Value::Ladder(l)) => Some(l.clone()),
            _ => None,
        }
    }

    pub fn modulus(&self, key: &str) -> Option<ModulusSpec> {
        match self.values.get(key) {
            Some(Value::Modulus(m)) => Some(*m),
            _ => None,
        }
    }

    pub fn conditions(&self) -> Vec<ConditionId> {
        match self.values.get("conditions") {
            Some(Value::Conditions(c)) => c.clone(),
            _ => Vec::new(),
        }
    }

    pub fn formats(&self) -> Vec<Format> {
        match self.values.get("formats") {
            Some(Value::Formats(f)) => f.clone(),
            _ => Vec::new(),
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        match self.values.get("out") {
            Some(Value::Path(p)) => p.clone(),
            _ => PathBuf::from("out"),
        }
    }

    pub fn seed(&self) -> u64 {
        self.uint("seed").unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flags(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn check_flags_map_to_fields() {
        let cfg = RunConfig::resolve(
            Some(Command::Check),
            &BTreeMap::new(),
            &flags(&[("model", "section4"), ("param.p", "3"), ("param.K0", "4"), ("conditions", "C9,C5,C8,LIN"), ("seed", "7")]),
        )
        .unwrap();
        assert_eq!(cfg.conditions(), vec![ConditionId::C9, ConditionId::C5, ConditionId::C8, ConditionId::LIN]);
        assert_eq!(cfg.seed(), 7);
        assert_eq!(cfg.params()["K0"], 4.0);
        assert_eq!(cfg.float("grid_radius"), Some(10.0));
    }

    #[test]
    fn flags_override_file() {
        let file = parse_pairs("command = experiment.moments\nmodel = bm\nx0 = 0\nn_paths = 10\n# note\n\np = 3\n").unwrap();
        let cfg = RunConfig::resolve(None, &file, &flags(&[("n_paths", "20")])).unwrap();
        assert_eq!(cfg.command, Command::Experiment(ExperimentKind::Moments));
        assert_eq!(cfg.uint("n_paths"), Some(20));
        assert_eq!(cfg.float("p"), Some(3.0));
    }

    #[test]
    fn errors_name_the_problem() {
        let err = |c: Command, f: &[(&str, &str)]| RunConfig::resolve(Some(c), &BTreeMap::new(), &flags(f)).unwrap_err().to_string();
        let e = err(Command::Check, &[("model", "sectoin4")]);
        assert!(e.contains("{section4, gbm_jump, bm, ou_jump}"), "{e}");
        let e = err(Command::Simulate, &[("model", "bm")]);
        assert!(e.contains("'x0'"), "{e}");
        let e = err(Command::Simulate, &[("model", "bm"), ("x0", "0"), ("n_steps", "ten")]);
        assert!(e.contains("'n_steps'") && e.contains("unsigned integer"), "{e}");
        let e = err(Command::Simulate, &[("model", "bm"), ("x0", "0"), ("colour", "red")]);
        assert!(e.contains("unknown key 'colour'"), "{e}");
        let e = err(Command::Simulate, &[("model", "bm"), ("x0", "0"), ("ladder", "1")]);
        assert!(e.contains("does not apply"), "{e}");
        let e = err(Command::Check, &[("model", "bm"), ("param.q", "1")]);
        assert!(e.contains("no parameter"), "{e}");
    }

    #[test]
    fn girsanov_defaults() {
        let cfg = RunConfig::resolve(
            Some(Command::Experiment(ExperimentKind::Girsanov)),
            &BTreeMap::new(),
            &flags(&[("model", "bm"), ("x0", "0"), ("y0", "2"), ("T", "2")]),
        )
        .unwrap();
        assert_eq!(cfg.float("t1"), Some(1.0));
        assert_eq!(cfg.float("p"), Some(2.0));
        assert_eq!(cfg.float("eps"), Some(0.0));
    }

    #[test]
    fn emit_parse_roundtrip_all_commands() {
        let cases: Vec<(Command, Vec<(&str, &str)>)> = vec![
            (Command::Simulate, vec![("model", "gbm_jump"), ("x0", "1"), ("y0", "0.5")]),
            (Command::Check, vec![("model", "section4"), ("modulus", "XLOG(0.1)"), ("g", "2.5"), ("times", "0,0.5")]),
            (Command::Experiment(ExperimentKind::Continuity), vec![("model", "gbm_jump"), ("x0", "1"), ("ladder", "1.1;1.01;1.001")]),
            (Command::Experiment(ExperimentKind::Nonconfluence), vec![("model", "section4"), ("x0", "1,0"), ("y0", "0,1"), ("threads", "2")]),
            (Command::Experiment(ExperimentKind::Moments), vec![("model", "gbm_jump"), ("x0", "1"), ("p", "3.9")]),
            (Command::Experiment(ExperimentKind::Girsanov), vec![("model", "bm"), ("param.d", "2"), ("x0", "0,0"), ("y0", "2,0")]),
            (Command::Experiment(ExperimentKind::Irreducibility), vec![("model", "bm"), ("x0", "0"), ("y0", "2"), ("formats", "csv,json")]),
        ];
        for (cmd, f) in cases {
            let cfg = RunConfig::resolve(Some(cmd), &BTreeMap::new(), &flags(&f)).unwrap();
            let text = cfg.emit();
            assert!(text.starts_with(&format!("command = {cmd}\n")));
            assert_eq!(RunConfig::parse(&text).unwrap(), cfg, "{text}");
        }
    }

    #[test]
    fn command_mismatch_rejected() {
        let file = parse_pairs("command = check\nmodel = bm").unwrap();
        assert!(RunConfig::resolve(Some(Command::Simulate), &file, &BTreeMap::new()).is_err());
        assert!(parse_pairs("no equals sign").is_err());
    }

    proptest::proptest! {
        #[test]
        fn roundtrip_random_experiment_configs(
            n_paths in 1u64..100_000,
            seed in proptest::prelude::any::<u64>(),
            t in 1e-3f64..1e3,
            x0 in proptest::collection::vec(-1e6f64..1e6, 2),
            y0 in proptest::collection::vec(-1e6f64..1e6, 2),
            delta in 1e-12f64..1.0,
            k in 0.51f64..100.0,
            kind in 0usize..3,
        ) {
            let cmd = Command::Experiment([ExperimentKind::Nonconfluence, ExperimentKind::Girsanov, ExperimentKind::Irreducibility][kind]);
            let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
            let mut f: BTreeMap<String, String> = [
                ("model", "section4".to_string()),
                ("n_paths", n_paths.to_string()),
                ("seed", seed.to_string()),
                ("T", t.to_string()),
                ("x0", join(&x0)),
                ("y0", join(&y0)),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect();
            if kind == 0 {
                f.insert("delta".into(), delta.to_string());
                f.insert("K".into(), k.to_string());
            }
            let cfg = RunConfig::resolve(Some(cmd), &BTreeMap::new(), &f).unwrap();
            proptest::prop_assert_eq!(RunConfig::parse(&cfg.emit()).unwrap(), cfg);
        }
    }
}
