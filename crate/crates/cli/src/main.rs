use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use loopinv_cli::agent::{agent_play, AgentConfig, Api};
use loopinv_cli::verify::{self, VerifyOptions};
use loopinv_core::engine::InvariantState;

#[derive(Parser)]
#[command(
    name = "loopinv",
    version,
    about = "Loop-invariant analysis from the command line"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Proposes each invariant in a file, in order, and reports whether the
    /// guarantee follows. Exits 0 iff solved.
    Verify {
        /// SIP source file, or a level JSON file.
        #[arg(long)]
        program: PathBuf,
        /// One expression per line; `#` starts a comment.
        #[arg(long)]
        invariants: PathBuf,
        /// Iterations for the bounded invariance check.
        #[arg(long)]
        unroll: Option<usize>,
        /// Prover timeout per query, in seconds.
        #[arg(long, default_value_t = 10.0)]
        timeout: f64,
        /// Prover command line.
        #[arg(long, default_value = "z3 -in")]
        prover: String,
        #[arg(long)]
        json: bool,
    },
    /// Plays a level through the service with enumerated template invariants.
    Agent {
        /// Service base URL, e.g. http://127.0.0.1:8080
        #[arg(long)]
        url: String,
        #[arg(long)]
        level: String,
        /// Maximum number of submissions.
        #[arg(long, default_value_t = 200)]
        budget: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
}

fn run_verify(
    program: PathBuf,
    invariants: PathBuf,
    opts: VerifyOptions,
    json: bool,
) -> Result<bool, String> {
    let target = verify::load_target(&program)?;
    let mut exprs: Vec<_> = target.program.annotation.iter().cloned().collect();
    exprs.extend(verify::load_invariants(&invariants, &target.program)?);
    let solver = verify::solver(&opts)?;
    let report = verify::verify_batch(&target, &exprs, &opts, &solver, &mut InvariantState::new());
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?
        );
    } else {
        print!("{}", verify::render(&report));
    }
    Ok(report.solved)
}

fn run_agent(url: &str, level: &str, cfg: AgentConfig, json: bool) -> Result<bool, String> {
    let api = Api::new(url, cfg.retries);
    let report = agent_play(&api, level, &cfg)?;
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?
        );
    } else {
        for s in &report.submissions {
            println!("{}  {}", s.expr, s.outcome);
        }
        println!(
            "{} candidates survived the traces; {} submitted; score {}; solved: {}",
            report.candidates,
            report.submissions.len(),
            report.score,
            if report.solved { "yes" } else { "no" }
        );
    }
    Ok(report.solved)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Verify {
            program,
            invariants,
            unroll,
            timeout,
            prover,
            json,
        } => {
            if unroll == Some(0) || !(timeout > 0.0 && timeout.is_finite()) {
                eprintln!("error: --unroll and --timeout must be positive");
                return ExitCode::from(2);
            }
            let opts = VerifyOptions {
                unroll,
                timeout: Duration::from_secs_f64(timeout),
                prover_command: prover.split_whitespace().map(String::from).collect(),
            };
            run_verify(program, invariants, opts, json)
        }
        Command::Agent {
            url,
            level,
            budget,
            seed,
            json,
        } => {
            let cfg = AgentConfig {
                budget,
                seed,
                ..AgentConfig::default()
            };
            run_agent(&url, &level, cfg, json)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
