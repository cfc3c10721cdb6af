//! `dnm`: run, calibrate and compare chain/reservoir scenarios.
//!
//! Exit codes: 0 success, 1 validation error (or differing runs for
//! `compare`), 2 solver failure, 3 calibration failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dnm_core::emit::{compare, emit};
use dnm_core::nonmarkovian::Backend;
use dnm_core::scenario::{calibrate_reservoir, run_scenario, Scenario};
use dnm_core::Error;

#[derive(Parser)]
#[command(name = "dnm", version, about = "Degree of non-Markovianity of XX qubit chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its tables and meta.toml.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario's backend.
        #[arg(long)]
        backend: Option<Backend>,
        /// Only check the scenario file.
        #[arg(long)]
        validate: bool,
    },
    /// Match one reservoir's first-qubit half-life to the Markovian reference.
    Calibrate {
        scenario: PathBuf,
        #[arg(long)]
        reservoir: String,
    },
    /// Diff the tables of two run directories.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

const VALIDATION: u8 = 1;
const SOLVER: u8 = 2;
const CALIBRATION: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidScenario(_)
        | Error::InvalidChain(_)
        | Error::InvalidReservoir(_)
        | Error::InvalidSettings(_)
        | Error::Format(_) => VALIDATION,
        Error::Calibration(_) => CALIBRATION,
        _ => SOLVER,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

fn load(path: &PathBuf) -> Result<Scenario, Error> {
    Scenario::load(path).map_err(|e| match e {
        // an unreadable scenario is a usage problem, not a solver one
        Error::Io { .. } => Error::InvalidScenario(e.to_string()),
        other => other,
    })
}

fn run(scenario: PathBuf, out: Option<PathBuf>, backend: Option<Backend>, validate: bool) -> ExitCode {
    let mut sc = match load(&scenario) {
        Ok(sc) => sc,
        Err(e) => return fail(e),
    };
    if let Some(b) = backend {
        sc.backend = b;
    }
    if validate {
        println!("{}: valid, hash {}", scenario.display(), sc.hash());
        return ExitCode::SUCCESS;
    }
    let Some(out) = out else {
        return fail(Error::InvalidScenario("--out is required unless --validate is given".into()));
    };
    let record = match run_scenario(&sc) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    if let Err(e) = emit(&record, &out) {
        return fail(e);
    }
    let mut failed = false;
    for r in &record.reservoirs {
        match &r.outcome {
            Ok(_) => println!("{}: ok", r.tag),
            Err(e) => {
                failed = true;
                eprintln!("{}: failed: {e}", r.tag);
            }
        }
    }
    println!("wrote {}", out.display());
    if failed {
        ExitCode::from(SOLVER)
    } else {
        ExitCode::SUCCESS
    }
}

fn calibrate(scenario: PathBuf, tag: String) -> ExitCode {
    let sc = match load(&scenario) {
        Ok(sc) => sc,
        Err(e) => return fail(e),
    };
    match calibrate_reservoir(&sc, &tag) {
        Ok((density, outcome)) => {
            println!(
                "# {} = {} (was {}), half-life {} against reference {}",
                outcome.parameter, outcome.value, outcome.initial_value, outcome.half_life, outcome.reference_half_life
            );
            let spec = dnm_core::scenario::ReservoirSpec { tag, density };
            print!("[[reservoirs]]\n{}", spec.to_toml());
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

fn diff(a: PathBuf, b: PathBuf, tol: f64) -> ExitCode {
    match compare(&a, &b, tol) {
        Ok(c) => {
            for p in &c.problems {
                println!("{p}");
            }
            println!(
                "{} tables compared, max |difference| {:e}, {} problems",
                c.tables,
                c.max_difference,
                c.problems.len()
            );
            if c.matches() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(VALIDATION)
            }
        }
        Err(e) => fail(e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            scenario,
            out,
            backend,
            validate,
        } => run(scenario, out, backend, validate),
        Command::Calibrate { scenario, reservoir } => calibrate(scenario, reservoir),
        Command::Compare { a, b, tol } => diff(a, b, tol),
    }
}
