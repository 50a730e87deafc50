//! `qrrt` command-line harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qrrt_core::harness::experiment::{compare_runs, run_experiment};
use qrrt_core::harness::{io, ExperimentConfig, Method};
use qrrt_core::learning::evaluate_greedy;
use qrrt_core::{Error, Mlp};

#[derive(Parser)]
#[command(
    name = "qrrt",
    version,
    about = "Quality-biased RRT planner and experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run quality-biased RRT for every configured seed.
    Plan(RunArgs),
    /// Run the goal-biased RRT baseline with the same settings.
    Baseline(RunArgs),
    /// Compare per-episode median returns of two output directories.
    Compare { dir_a: PathBuf, dir_b: PathBuf },
    /// Roll out a saved policy from the start state.
    EvalGreedy {
        /// Value and policy network checkpoints.
        #[arg(long, num_args = 2, value_names = ["VALUE_NET", "POLICY_NET"], required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        config: PathBuf,
        /// Write the rollout trajectory here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Run this single seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` settings applied after the config file.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Usage(Error),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownKey(_)
            | Error::ConfigSyntax { .. }
            | Error::ConfigValue { .. }
            | Error::InvalidParameter(_)
            | Error::Io { .. } => Failure::Usage(e),
            other => Failure::Runtime(other),
        }
    }
}

fn load(args: &RunArgs, method: Method) -> Result<ExperimentConfig, Failure> {
    let mut overrides = args.overrides.clone();
    overrides.push(format!("method={}", method.as_str()));
    if let Some(seed) = args.seed {
        overrides.push(format!("seeds={seed}"));
    }
    if let Some(out) = &args.out {
        overrides.push(format!("outputDir={}", out.display()));
    }
    Ok(ExperimentConfig::load_with_overrides(
        &args.config,
        &overrides,
    )?)
}

fn run(args: &RunArgs, method: Method) -> Result<(), Failure> {
    let config = load(args, method)?;
    let stats = run_experiment(&config).map_err(Failure::Runtime)?;
    println!("seed,episodes,iterations,tree_size,first_return,final_return");
    for r in &stats.runs {
        println!(
            "{},{},{},{},{},{}",
            r.seed,
            r.episodes,
            r.iterations,
            r.tree_size,
            io::fmt_real(r.first_return),
            io::fmt_real(r.final_return)
        );
    }
    eprintln!("wrote {}", config.output_dir.display());
    Ok(())
}

fn compare(a: &PathBuf, b: &PathBuf) -> Result<(), Failure> {
    let cmp = compare_runs(a, b)?;
    println!("episode,median_a,median_b,difference");
    for row in &cmp.rows {
        println!(
            "{},{},{},{}",
            row.episode,
            io::fmt_real(row.median_a),
            io::fmt_real(row.median_b),
            io::fmt_real(row.difference())
        );
    }
    let show = |o: Option<u64>| o.map_or_else(|| "none".to_string(), |e| e.to_string());
    eprintln!("a dominates from episode: {}", show(cmp.a_dominates_from));
    eprintln!("b dominates from episode: {}", show(cmp.b_dominates_from));
    Ok(())
}

fn eval_greedy(
    checkpoint: &[PathBuf],
    config: &PathBuf,
    out: Option<&PathBuf>,
) -> Result<(), Failure> {
    let config = ExperimentConfig::load(config)?;
    let system = config.build_system();
    // The value net is loaded to validate the checkpoint pair; rollouts only need the policy.
    let value = Mlp::load(&checkpoint[0])?;
    let policy = Mlp::load(&checkpoint[1])?;
    if value.input_dim() != system.state_dim()
        || policy.input_dim() != system.state_dim()
        || policy.output_dim() != system.action_dim()
    {
        return Err(Failure::Usage(Error::Checkpoint(format!(
            "networks do not match the {} system",
            system.name()
        ))));
    }
    let planner = config.planner_for(config.seeds[0]);
    let rollout = evaluate_greedy(
        &policy,
        system.as_ref(),
        &planner.learn,
        planner.greedy_max_steps,
    )?;
    println!("success,steps,return");
    println!(
        "{},{},{}",
        rollout.success,
        rollout.trajectory.steps(),
        io::fmt_real(rollout.score())
    );
    if let Some(path) = out {
        io::write_trajectory(path, &rollout.trajectory, system.action_dim())?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Plan(args) => run(args, Method::Qrrt),
        Command::Baseline(args) => run(args, Method::Baseline),
        Command::Compare { dir_a, dir_b } => compare(dir_a, dir_b),
        Command::EvalGreedy {
            checkpoint,
            config,
            out,
        } => eval_greedy(checkpoint, config, out.as_ref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
