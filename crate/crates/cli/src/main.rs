mod args;
mod manifest;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::{Parser, ValueEnum};
use geohmm::GeoError;

use args::{Command, ReplayArgs};
use manifest::{RunManifest, Timing, MANIFEST_FORMAT};
use run::Outcome;

const EXIT_FAILURE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_IMPOSSIBLE: u8 = 3;
const EXIT_INCONSISTENT: u8 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "geohmm", version, about = "Learn hidden Markov models with odometric relations between states")]
struct Cli {
    /// Report format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Manifest path (default: next to the main output).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

fn execute(command: &Command) -> Result<Outcome> {
    match command {
        Command::LoopModel(a) => run::loop_model(a),
        Command::Simulate(a) => run::simulate(a),
        Command::Init(a) => run::init(a),
        Command::Learn(a) => run::learn(a),
        Command::EvalKl(a) => run::eval_kl(a),
        Command::Check(a) => run::check(a),
        Command::Render(a) => run::render(a),
        Command::Experiment(a) => run::experiment(a),
        Command::Replay(_) => bail!(GeoError::Input("a manifest cannot record a replay".into())),
    }
}

/// Runs `command` and records it in a manifest.
fn run_recorded(command: &Command, manifest_path: Option<PathBuf>, format: Format) -> Result<u8> {
    let started = manifest::now_secs();
    let clock = Instant::now();
    let outcome = execute(command)?;
    let code = if outcome.inconsistent { EXIT_INCONSISTENT } else { 0 };
    let path = manifest_path.unwrap_or_else(|| manifest::default_path(command, &outcome.inputs, &outcome.outputs));
    let m = RunManifest {
        format: MANIFEST_FORMAT.into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.name().into(),
        invocation: command.clone(),
        config: outcome.config,
        seed: outcome.seed,
        inputs: outcome.inputs,
        outputs: outcome.outputs,
        timing: Timing { started, elapsed_secs: clock.elapsed().as_secs_f64() },
        exit_code: code as i32,
        result: outcome.summary,
    };
    manifest::write(&path, &m)?;
    match format {
        Format::Text => print!("{}", outcome.text),
        Format::Json => println!("{}", serde_json::to_string_pretty(&m.result)?),
    }
    Ok(code)
}

fn replay(a: &ReplayArgs, manifest_path: Option<PathBuf>, format: Format) -> Result<u8> {
    let m = manifest::read(&a.manifest)?;
    if !a.verify {
        return run_recorded(&m.invocation, Some(manifest_path.unwrap_or(a.manifest.clone())), format);
    }
    let before: Vec<(PathBuf, Vec<u8>)> = m
        .outputs
        .iter()
        .map(|p| Ok((p.clone(), std::fs::read(p)?)))
        .collect::<std::io::Result<_>>()
        .map_err(GeoError::from)?;
    let outcome = execute(&m.invocation)?;
    let mut differing = Vec::new();
    for (path, old) in &before {
        let new = std::fs::read(path).map_err(GeoError::from)?;
        if &new != old {
            differing.push(path.clone());
            geohmm::io::write_atomic(path, old)?;
        }
    }
    if outcome.outputs != m.outputs {
        differing.extend(outcome.outputs.iter().filter(|p| !m.outputs.contains(p)).cloned());
    }
    let identical = differing.is_empty();
    match format {
        Format::Text if identical => println!("{} outputs reproduced byte for byte", before.len()),
        Format::Text => {
            for p in &differing {
                println!("differs: {}", p.display());
            }
        }
        Format::Json => println!("{}", serde_json::json!({ "identical": identical, "differing": differing })),
    }
    Ok(if identical { 0 } else { EXIT_FAILURE })
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<GeoError>() {
        Some(GeoError::ImpossibleSequence { .. }) => EXIT_IMPOSSIBLE,
        Some(_) => EXIT_INPUT,
        None => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Replay(a) => replay(a, cli.manifest.clone(), cli.format),
        other => run_recorded(other, cli.manifest.clone(), cli.format),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
