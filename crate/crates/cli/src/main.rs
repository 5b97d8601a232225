use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use jumpsde_cli::{execute, parse_pairs, CliError, Command, ExperimentKind, RunConfig, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "jumpsde", version, about = "Simulate jump-diffusion SDEs, check coefficient conditions and run experiments")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Simulate one path (or a coupled pair when --y0 is given).
    Simulate(Common),
    /// Check coefficient conditions on a sampled grid. Exits 2 if any fails.
    Check(Common),
    /// Run a Monte Carlo experiment.
    Experiment {
        #[command(subcommand)]
        kind: Exp,
    },
}

#[derive(Subcommand)]
enum Exp {
    Continuity(Common),
    Nonconfluence(Common),
    Moments(Common),
    Girsanov(Common),
    Irreducibility(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// Model parameter, repeatable.
    #[arg(long = "param", value_name = "NAME=VALUE")]
    param: Vec<String>,
    /// Comma-separated model parameters.
    #[arg(long = "params", value_name = "NAME=VALUE,...")]
    params: Option<String>,
    #[arg(long)]
    n_paths: Option<String>,
    #[arg(long)]
    n_steps: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    y0: Option<String>,
    /// Time horizon.
    #[arg(long = "T")]
    horizon: Option<String>,
    #[arg(long)]
    conditions: Option<String>,
    /// Output formats, a subset of csv,json.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    /// Any other config key, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", allow_hyphen_values = true)]
    set: Vec<String>,
}

fn split_kv(s: &str) -> Result<(String, String), CliError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| CliError::Config(format!("expected KEY=VALUE, got {s:?}")))
}

impl Common {
    fn into_config(self, command: Command) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read {}: {e}", p.display())))?;
                parse_pairs(&text)?
            }
            None => BTreeMap::new(),
        };
        let mut flags = BTreeMap::new();
        let plain = [
            ("model", self.model),
            ("n_paths", self.n_paths),
            ("n_steps", self.n_steps),
            ("seed", self.seed),
            ("out", self.out),
            ("x0", self.x0),
            ("y0", self.y0),
            ("T", self.horizon),
            ("conditions", self.conditions),
            ("formats", self.format),
            ("threads", self.threads),
        ];
        for (k, v) in plain {
            if let Some(v) = v {
                flags.insert(k.to_string(), v);
            }
        }
        let listed = self.params.iter().flat_map(|p| p.split(',')).map(str::to_string);
        for kv in listed.chain(self.param) {
            let (k, v) = split_kv(&kv)?;
            flags.insert(format!("param.{k}"), v);
        }
        for kv in self.set {
            let (k, v) = split_kv(&kv)?;
            flags.insert(k, v);
        }
        RunConfig::resolve(Some(command), &file, &flags)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Sub::Simulate(c) => (Command::Simulate, c),
        Sub::Check(c) => (Command::Check, c),
        Sub::Experiment { kind } => match kind {
            Exp::Continuity(c) => (Command::Experiment(ExperimentKind::Continuity), c),
            Exp::Nonconfluence(c) => (Command::Experiment(ExperimentKind::Nonconfluence), c),
            Exp::Moments(c) => (Command::Experiment(ExperimentKind::Moments), c),
            Exp::Girsanov(c) => (Command::Experiment(ExperimentKind::Girsanov), c),
            Exp::Irreducibility(c) => (Command::Experiment(ExperimentKind::Irreducibility), c),
        },
    };
    let result = common.into_config(command).and_then(|cfg| execute(&cfg));
    match result {
        Ok(outcome) => {
            for line in outcome.stdout {
                println!("{line}");
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
