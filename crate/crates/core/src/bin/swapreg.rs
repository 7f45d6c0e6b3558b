use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use swapreg::cli::{self, Plan, EXIT_CHECK_FAILED, EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION};
use swapreg::treeform::format::write_problem;
use swapreg::TreeFormProblem;

#[derive(Parser)]
#[command(name = "swapreg", version, about = "Swap-regret experiments on tree-form decision problems")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config and write CSV results.
    Run {
        config: PathBuf,
        /// Seed range `a..b` (half-open), overriding the config.
        #[arg(long)]
        seeds: Option<String>,
        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Write the Fig. 1 style problem with `d` rows and `n` columns.
    Fig1 {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: usize,
        /// Output file; `-` for stdout.
        #[arg(long, default_value = "-")]
        emit: PathBuf,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Args::parse().command {
        Command::Run {
            config,
            seeds,
            out,
            jobs,
        } => match cli::run_file(&config, seeds.as_deref(), out.as_deref(), jobs) {
            Ok(summary) => {
                println!("{} runs", summary.records.len());
                if summary.passed() {
                    code(EXIT_OK)
                } else {
                    cli::report_failures(&summary, std::io::stderr()).ok();
                    code(EXIT_CHECK_FAILED)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                code(e.exit_code())
            }
        },
        Command::Validate { config } => match cli::validate_file(&config, None, None) {
            Ok(v) => {
                let kind = match &v.plan {
                    Plan::Dynamics(_) => "dynamics",
                    Plan::Lowerbound(_) => "lowerbound",
                    Plan::Lemmas(_) => "lemmas",
                    Plan::Nfce(_) => "nfce",
                };
                println!("ok: kind {kind}, {} seeds, config hash {}", v.seeds.len(), v.hash);
                if let Plan::Lowerbound(cli::LowerBoundPlan { embedding: e, .. })
                | Plan::Lemmas(cli::LemmaPlan { embedding: e, .. }) = &v.plan
                {
                    println!("d = {}, n = {}, M = {}, eps = {}, delta = {}", e.d, e.n, e.spec.action_count(), e.eps, e.delta);
                }
                code(EXIT_OK)
            }
            Err(e) => {
                eprintln!("invalid config: {e}");
                code(EXIT_VALIDATION)
            }
        },
        Command::Fig1 { d, n, emit } => {
            let text = match TreeFormProblem::fig1(d, n) {
                Ok(p) => write_problem(&p),
                Err(e) => {
                    eprintln!("error: {e}");
                    return code(EXIT_VALIDATION);
                }
            };
            let written = if emit.as_os_str() == "-" {
                print!("{text}");
                Ok(())
            } else {
                std::fs::write(&emit, text)
            };
            match written {
                Ok(()) => code(EXIT_OK),
                Err(e) => {
                    eprintln!("error: {e}");
                    code(EXIT_RUNTIME)
                }
            }
        }
    }
}
