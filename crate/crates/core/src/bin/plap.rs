use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;
use rayon::prelude::*;

use plap::apps::{run_scenario, thresholds_scenario, write_artifacts, Overrides, RunOutcome, Scenario, Status};
use plap::report::to_json_string;

#[derive(Parser)]
#[command(name = "plap", version, about = "Sub/super-solution solvers for p-Laplacian Dirichlet problems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the full pipeline on one scenario.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Print the threshold report of a scenario.
    Thresholds {
        scenario: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Run every `*.json` scenario in a directory concurrently.
    Sweep {
        dir: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
}

#[derive(Args, Clone)]
struct Opts {
    /// Grid spacing (overrides the scenario).
    #[arg(long)]
    h: Option<f64>,
    /// Fixed-point tolerance (overrides the scenario).
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory for reports and field dumps.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed of the randomized probe starts.
    #[arg(long)]
    seed: Option<u64>,
}

impl Opts {
    fn overrides(&self) -> Overrides {
        Overrides { h: self.h, tol: self.tol, out: Some(self.out.clone()), seed: self.seed }
    }
}

fn emit(outcome: &RunOutcome, out: &Path) {
    if let Err(e) = write_artifacts(outcome, out) {
        error!("writing artifacts for {}: {e}", outcome.report.name);
    }
}

fn summary_line(o: &RunOutcome) -> String {
    let r = &o.report;
    let first = r.messages.first().map(String::as_str).unwrap_or("ok");
    format!("{:<32} exit {}  {first}", r.name, o.exit_code())
}

fn run_one(path: &Path, opts: &Opts) -> RunOutcome {
    let o = run_scenario(path, &opts.overrides());
    emit(&o, &opts.out);
    o
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let status = match &cli.cmd {
        Cmd::Run { scenario, opts } => {
            let o = run_one(scenario, opts);
            println!("{}", summary_line(&o));
            o.status()
        }
        Cmd::Thresholds { scenario, opts } => match Scenario::load(scenario) {
            Ok(mut s) => {
                opts.overrides().apply(&mut s);
                let o = thresholds_scenario(&s);
                match &o.report.thresholds {
                    Some(t) => println!("{}", to_json_string(t).unwrap_or_default()),
                    None => println!("{}", summary_line(&o)),
                }
                o.status()
            }
            Err(e) => {
                eprintln!("{e}");
                Status::Config
            }
        },
        Cmd::Sweep { dir, opts } => {
            let mut paths: Vec<PathBuf> = match std::fs::read_dir(dir) {
                Ok(rd) => rd
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|x| x == "json"))
                    .collect(),
                Err(e) => {
                    eprintln!("{}: {e}", dir.display());
                    return ExitCode::from(1);
                }
            };
            paths.sort();
            let outcomes: Vec<RunOutcome> = paths.par_iter().map(|p| run_one(p, opts)).collect();
            for o in &outcomes {
                println!("{}", summary_line(o));
            }
            outcomes.iter().map(RunOutcome::status).max().unwrap_or(Status::Pass)
        }
    };
    ExitCode::from(status.code() as u8)
}
