//! `robmaint`: condition signals to maintenance policies.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use commands::{EvaluateArgs, FractalArgs, InferArgs, PlanArgs, SimulateArgs, SolveArgs};
use config::Invalid;

#[derive(Parser, Debug)]
#[command(
    name = "robmaint",
    version,
    about = "Condition data to maintenance policies that hedge over posterior uncertainty"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sliding-window fractal values of a longitudinal level signal
    Fractal(FractalArgs),
    /// Synthetic condition dataset from known parameters
    Simulate(SimulateArgs),
    /// Posterior ensemble of a dataset by MCMC
    Infer(InferArgs),
    /// Robust and posterior-mean MDP policies of an ensemble
    Solve(SolveArgs),
    /// Belief trace of the robust Q_MDP planner in one environment
    Plan(PlanArgs),
    /// Monte Carlo comparison of the policy roster
    Evaluate(EvaluateArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Fractal(_) => "fractal",
            Command::Simulate(_) => "simulate",
            Command::Infer(_) => "infer",
            Command::Solve(_) => "solve",
            Command::Plan(_) => "plan",
            Command::Evaluate(_) => "evaluate",
        }
    }

    fn run(&self) -> anyhow::Result<()> {
        let env: Vec<(String, String)> = std::env::vars().collect();
        match self {
            Command::Fractal(a) => commands::fractal(a, env),
            Command::Simulate(a) => commands::simulate(a, env),
            Command::Infer(a) => commands::infer(a, env),
            Command::Solve(a) => commands::solve(a, env),
            Command::Plan(a) => commands::plan(a, env),
            Command::Evaluate(a) => commands::evaluate(a, env),
        }
    }
}

/// 1 for bad input, 2 for failures while running.
fn exit_status(err: &anyhow::Error) -> u8 {
    use robmaint::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<Invalid>().is_some() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io(_)
                | E::Csv(_)
                | E::Json(_)
                | E::Underflow { .. }
                | E::ImpossibleObservation
                | E::SparseSection { .. } => 2,
                _ => 1,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    tracing_subscriber::fmt()
        .json()
        .with_env_filter(EnvFilter::try_from_env("ROBMAINT_LOG").unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();

    let span = tracing::info_span!("run", subcommand = cli.command.name());
    let _guard = span.enter();
    tracing::info!("started");
    match cli.command.run() {
        Ok(()) => {
            tracing::info!("finished");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = exit_status(&e);
            tracing::error!(error = format!("{e:#}"), exit_code = code, "failed");
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
