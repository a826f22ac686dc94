//! `dispersive-lab`: batch runs of the numerical laboratory.
//!
//! Exit codes: 0 success, 1 configuration error, 2 a requested assertion failed.

mod args;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;
use serde_json::Value;

use args::*;
use run::{Failure, Job, Run, Table};

#[derive(Parser, Debug)]
#[command(name = "dispersive-lab", version, about = "Numerical laboratory for Airy-type dispersive estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate a Lebesgue, Morrey or hat-Morrey norm of a datum.
    Norm {
        #[command(flatten)]
        args: NormArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Exact exponent bookkeeping for the estimates and the well-posedness setting.
    Exponents {
        #[command(flatten)]
        args: ExponentsArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Sample the Airy flow of a datum or a region cutoff.
    Airy {
        #[command(flatten)]
        args: AiryArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Sweep an estimate over test families, or measure the lacunary gap.
    Verify {
        #[command(flatten)]
        args: VerifyArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Monte-Carlo overlap audit of a region family.
    Overlap {
        #[command(flatten)]
        args: OverlapArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Evolve the generalized KdV equation.
    Gkdv {
        #[command(flatten)]
        args: GkdvArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Bubble extraction and decoupling experiments.
    Bubble {
        #[command(flatten)]
        args: BubbleArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Re-emit the plot table of a saved JSON report as CSV.
    Plot(PlotArgs),
    /// Run a TOML or JSON config file.
    Run {
        /// Config file with `subcommand`, `[parameters]` and `[output]`.
        config: PathBuf,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    subcommand: String,
    #[serde(default = "empty_object")]
    parameters: Value,
    #[serde(default)]
    output: OutputArgs,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

fn read_config(path: &Path) -> Run<(Job, OutputArgs)> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let raw: Value = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
    } else {
        let t: toml::Value = toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        serde_json::to_value(t).map_err(|e| Failure::Config(e.to_string()))?
    };
    let cfg: RunConfig = serde_json::from_value(raw).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok((Job::from_config(&cfg.subcommand, cfg.parameters)?, cfg.output))
}

fn check_parent(path: &Path) -> Run<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => {
            Err(Failure::Config(format!("output directory {} does not exist", p.display())))
        }
        _ => Ok(()),
    }
}

fn write(path: &Path, contents: &str) -> Run<()> {
    std::fs::write(path, contents).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn execute(job: Job, out: OutputArgs) -> Run<()> {
    for p in out.json.iter().chain(&out.csv) {
        check_parent(p)?;
    }
    let outcome = job.report()?;
    let text = serde_json::to_string_pretty(&outcome.report).expect("report serialises");
    if let Some(csv) = &out.csv {
        let table = outcome.table.as_ref().ok_or_else(|| Failure::Config(format!("{} has no plot table", job.name())))?;
        write(csv, &table.to_csv())?;
    }
    match &out.json {
        Some(p) => write(p, &(text + "\n"))?,
        None => println!("{text}"),
    }
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Assertion(outcome.failures.join("; ")))
    }
}

fn plot(a: &PlotArgs) -> Run<()> {
    let text = std::fs::read_to_string(&a.report).map_err(|e| Failure::Config(format!("{}: {e}", a.report.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", a.report.display())))?;
    let plot = v.get("plot").cloned().ok_or_else(|| Failure::Config("report has no plot table".into()))?;
    let table: Table = serde_json::from_value(plot).map_err(|e| Failure::Config(format!("plot table: {e}")))?;
    match &a.out {
        Some(p) => {
            check_parent(p)?;
            write(p, &table.to_csv())
        }
        None => {
            print!("{}", table.to_csv());
            Ok(())
        }
    }
}

fn configure_threads() -> Run<()> {
    let Ok(v) = std::env::var("DISPERSIVE_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(format!("DISPERSIVE_LAB_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Config(e.to_string()))
}

fn dispatch(cli: Cli) -> Run<()> {
    configure_threads()?;
    match cli.command {
        Command::Norm { args, out } => execute(Job::Norm(args), out),
        Command::Exponents { args, out } => execute(Job::Exponents(args), out),
        Command::Airy { args, out } => execute(Job::Airy(args), out),
        Command::Verify { args, out } => execute(Job::Verify(args), out),
        Command::Overlap { args, out } => execute(Job::Overlap(args), out),
        Command::Gkdv { args, out } => execute(Job::Gkdv(args), out),
        Command::Bubble { args, out } => execute(Job::Bubble(args), out),
        Command::Plot(a) => plot(&a),
        Command::Run { config } => {
            let (job, out) = read_config(&config)?;
            execute(job, out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Assertion(m)) => {
            eprintln!("assertion failed: {m}");
            ExitCode::from(2)
        }
    }
}
