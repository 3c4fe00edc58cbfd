use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use clfcbf::selftest;
use clfcbf::sim::{bundled, emit, run_scenario, Report, RunOptions, Scenario};
use clfcbf::Error;

const OUT_ENV: &str = "CLFCBF_OUT_DIR";

/// CLF-CBF quadratic-program controller analysis and simulation.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    /// Output directory; overrides the CLFCBF_OUT_DIR environment variable.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Q-functions, equilibria and compatibility of every barrier.
    Analyze { scenario: String },
    /// Compatible Hessians and their certificates.
    Compat { scenario: String },
    /// Closed-loop runs from the scenario's start set.
    Simulate {
        scenario: String,
        #[arg(long)]
        adaptive: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Regenerate the data behind a figure.
    Reproduce { figure: Figure },
    /// Run the randomized invariant suites.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Figure {
    Fig1,
    Fig2,
    Fig3,
}

enum Failure {
    Validation(String),
    Analysis(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Validation(_) | Error::Parse(_) | Error::InvalidInput(_) => Failure::Validation(e.to_string()),
            other => Failure::Analysis(other.to_string()),
        }
    }
}

/// A path to a scenario file, or the name of a bundled scenario.
fn load(arg: &str, seed: Option<u64>) -> Result<Scenario, Failure> {
    let path = Path::new(arg);
    if path.exists() {
        return Ok(Scenario::load(path, seed)?);
    }
    match bundled(arg) {
        Some(text) => Ok(Scenario::parse(text, seed)?),
        None => Err(Failure::Validation(format!("{arg}: no such file or bundled scenario"))),
    }
}

fn out_base(cli: &Option<PathBuf>) -> PathBuf {
    cli.clone()
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn write(report: &Report, s: &Scenario, dir: &Path) -> Result<(), Failure> {
    let files = emit(report, dir, s.qfunction_samples)?;
    println!("{}: wrote {} files to {}", s.name, files.len(), dir.display());
    let st = &report.statistics;
    if st.total > 0 {
        println!(
            "  {} runs: {} converged, {} other rest point, {} horizon, {} infeasible, {} shape degenerate",
            st.total, st.converged, st.converged_other, st.horizon_reached, st.infeasible, st.shape_degenerate
        );
    }
    for a in &report.barriers {
        let verdicts: Vec<String> =
            a.equilibria.iter().map(|e| format!("λ={:.4} {:?}", e.lambda_e, e.verdict)).collect();
        println!(
            "  barrier {}: {} [{}]",
            a.barrier + 1,
            if a.compatible { "compatible" } else { "not compatible" },
            verdicts.join(", ")
        );
    }
    for c in &report.compat {
        if let Some(sol) = &c.solution {
            println!("  H{} = {:?} (objective {:.4e})", c.barrier + 1, c.hessian, sol.objective);
        }
    }
    match report.errors.first() {
        None => Ok(()),
        Some(_) if report.errors.iter().all(|e| e.validation) => {
            Err(Failure::Validation(report.errors.iter().map(|e| e.message.clone()).collect::<Vec<_>>().join("; ")))
        }
        Some(_) => Err(Failure::Analysis(report.errors.iter().map(|e| e.message.clone()).collect::<Vec<_>>().join("; "))),
    }
}

fn run_one(name: &str, seed: Option<u64>, opts: RunOptions, dir: &Path) -> Result<(), Failure> {
    let s = load(name, seed)?;
    info!("running {} with {:?}", s.name, opts);
    let report = run_scenario(&s, opts);
    write(&report, &s, dir)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let base = out_base(&cli.out);
    match cli.command {
        Command::Analyze { scenario } => {
            let s = load(&scenario, None)?;
            run_one(&scenario, None, RunOptions::analyze(), &base.join(&s.name).join("analyze"))
        }
        Command::Compat { scenario } => {
            let s = load(&scenario, None)?;
            run_one(&scenario, None, RunOptions::compat(), &base.join(&s.name).join("compat"))
        }
        Command::Simulate { scenario, adaptive, seed } => {
            let s = load(&scenario, seed)?;
            let sub = if adaptive { "adaptive" } else { "static" };
            run_one(&scenario, seed, RunOptions::simulate(adaptive), &base.join(&s.name).join(sub))
        }
        Command::Reproduce { figure } => match figure {
            Figure::Fig1 => run_one("fig1_scenario", None, RunOptions::analyze(), &base.join("fig1")),
            Figure::Fig2 | Figure::Fig3 => {
                let (name, dir) = match figure {
                    Figure::Fig2 => ("fig2_scenario", base.join("fig2")),
                    _ => ("fig3_scenario", base.join("fig3")),
                };
                run_one(name, None, RunOptions::simulate(false), &dir.join("static"))?;
                run_one(name, None, RunOptions::simulate(true), &dir.join("adaptive"))
            }
        },
        Command::Selftest { seed } => {
            let results = selftest::run_all(seed);
            for r in &results {
                println!("{} {}: {} ({} checks)", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail, r.checks);
            }
            if results.iter().all(|r| r.passed) {
                Ok(())
            } else {
                Err(Failure::Analysis("self-test failures".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("validation error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Analysis(m)) => {
            eprintln!("analysis failure: {m}");
            ExitCode::from(3)
        }
    }
}
