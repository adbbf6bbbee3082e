//! `qmemlab`: runs quantum-memory simulation scenarios and writes their results as text files.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 parse error, 3 validation error, 4 numeric failure,
//! 64 command-line usage error. With several scenarios the largest code wins.

mod catalog;
mod failure;
mod kinds;
mod output;
mod scenario;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use failure::Failure;
use kinds::Experiment;
use scenario::Scenario;

#[derive(Debug, Parser)]
#[command(name = "qmemlab", version, about = "Quantum-memory simulation scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the bundled scenarios.
    List,
    /// Print the text of a bundled scenario.
    Show { name: String },
    /// Parse and validate scenarios without running them.
    Validate {
        /// Scenario files or bundled scenario names.
        #[arg(required_unless_present = "all")]
        scenarios: Vec<String>,
        /// Use every bundled scenario.
        #[arg(long)]
        all: bool,
    },
    /// Run scenarios and write their results.
    Run {
        /// Scenario files or bundled scenario names.
        #[arg(required_unless_present = "all")]
        scenarios: Vec<String>,
        /// Use every bundled scenario.
        #[arg(long)]
        all: bool,
        /// Results go to <DIR>/<scenario name>, overriding `output_dir` in the files.
        #[arg(long, env = "QMEMLAB_OUTPUT_DIR", value_name = "DIR")]
        output_dir: Option<PathBuf>,
        /// Number of worker threads shared by all scenarios.
        #[arg(long, short, env = "QMEMLAB_JOBS", default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
    },
}

const DEFAULT_OUTPUT_ROOT: &str = "qmemlab-out";
const USAGE_EXIT: u8 = 64;

/// Resolves an argument to a scenario file or, failing that, a bundled scenario.
fn load(arg: &str) -> Result<Scenario, Failure> {
    let path = Path::new(arg);
    let (name, text) = if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Parse(format!("cannot read file: {e}")))?;
        let file = path.file_name().map_or_else(|| arg.to_string(), |f| f.to_string_lossy().into_owned());
        let name = file.strip_suffix(".scenario").unwrap_or(&file).to_string();
        (name, text)
    } else if let Some((name, text)) = catalog::find(arg) {
        (name.to_string(), text.to_string())
    } else {
        return Err(Failure::Parse("no such file or bundled scenario".into()));
    };
    Scenario::parse(name, &text)
}

struct Planned {
    scenario: Scenario,
    experiment: Box<dyn Experiment>,
    manifest: String,
}

fn prepare(arg: &str) -> Result<Planned, Failure> {
    let scenario = load(arg)?;
    let (experiment, resolved) = kinds::plan(&scenario)?;
    let manifest =
        output::manifest(&scenario.name, &scenario.kind, scenario.seed, scenario.description.as_deref(), &resolved);
    Ok(Planned { scenario, experiment, manifest })
}

fn arguments(scenarios: Vec<String>, all: bool) -> Vec<String> {
    let mut args: Vec<String> = if all { catalog::BUNDLED.iter().map(|(n, _)| n.to_string()).collect() } else { Vec::new() };
    args.extend(scenarios);
    args
}

/// Plans every argument; returns the plans only if all of them succeeded.
fn prepare_all(args: &[String]) -> Result<Vec<Planned>, u8> {
    let mut plans = Vec::new();
    let mut worst = 0;
    for arg in args {
        match prepare(arg) {
            Ok(p) => plans.push(p),
            Err(f) => {
                eprintln!("{}", f.report(arg));
                worst = worst.max(f.exit_code());
            }
        }
    }
    if worst > 0 {
        Err(worst)
    } else {
        Ok(plans)
    }
}

fn output_dir(scenario: &Scenario, root: Option<&Path>) -> PathBuf {
    match (root, &scenario.output_dir) {
        (Some(root), _) => root.join(&scenario.name),
        (None, Some(dir)) => dir.clone(),
        (None, None) => Path::new(DEFAULT_OUTPUT_ROOT).join(&scenario.name),
    }
}

fn list() -> u8 {
    for (name, text) in catalog::BUNDLED {
        match Scenario::parse(name.to_string(), text) {
            Ok(s) => println!("{name:<18} {:<18} {}", s.kind, s.description.unwrap_or_default()),
            Err(f) => {
                eprintln!("{}", f.report(name));
                return f.exit_code();
            }
        }
    }
    0
}

fn validate(args: &[String]) -> u8 {
    let mut worst = 0;
    for arg in args {
        match prepare(arg) {
            Ok(p) => println!("valid scenario={arg:?} kind={}", p.scenario.kind),
            Err(f) => {
                eprintln!("{}", f.report(arg));
                worst = worst.max(f.exit_code());
            }
        }
    }
    worst
}

fn run(args: &[String], root: Option<&Path>, jobs: usize) -> u8 {
    let plans = match prepare_all(args) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let mut targets: BTreeMap<PathBuf, &str> = BTreeMap::new();
    for (arg, p) in args.iter().zip(&plans) {
        if let Some(other) = targets.insert(output_dir(&p.scenario, root), arg) {
            let f = Failure::Validation(format!("writes to the same directory as {other:?}"));
            eprintln!("{}", f.report(arg));
            return f.exit_code();
        }
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("{}", Failure::Io(format!("cannot start worker pool: {e}")).report("-"));
            return 1;
        }
    };
    let results: Vec<_> = pool.install(|| plans.par_iter().map(|p| p.experiment.run(p.scenario.seed)).collect());

    let mut worst = 0;
    for ((arg, plan), result) in args.iter().zip(&plans).zip(results) {
        let dir = output_dir(&plan.scenario, root);
        match result.and_then(|artifacts| output::commit(&dir, &plan.manifest, &artifacts)) {
            Ok(()) => println!("ok scenario={arg:?} output={:?}", dir.display().to_string()),
            Err(f) => {
                eprintln!("{}", f.report(arg));
                worst = worst.max(f.exit_code());
            }
        }
    }
    worst
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE_EXIT } else { 0 });
        }
    };
    let code = match cli.command {
        Command::List => list(),
        Command::Show { name } => match catalog::find(&name) {
            Some((_, text)) => {
                print!("{text}");
                0
            }
            None => {
                eprintln!("{}", Failure::Parse("no such bundled scenario".into()).report(&name));
                2
            }
        },
        Command::Validate { scenarios, all } => validate(&arguments(scenarios, all)),
        Command::Run { scenarios, all, output_dir, jobs } => {
            run(&arguments(scenarios, all), output_dir.as_deref(), jobs as usize)
        }
    };
    ExitCode::from(code)
}
