use std::fs;
use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use negassoc::dependence_check::EnumerationCaps;
use negassoc::discrete_laws::JointPmf;
use negassoc::harness::{
    run, DependenceKind, ExperimentConfig, ExperimentReport, OutputFormat, Scenario, StabilityKind,
};
use negassoc::multiaffine::{polarize, StabilityConfig, SubsetMeasure};
use negassoc::pointproc::{ProcessSpec, TauSpec};
use negassoc::Error;

/// Negative dependence checks for discrete laws and point-process count
/// vectors.
///
/// Inputs are a file path, `-` for stdin, or inline JSON. Exit status: 0 all
/// checks hold, 1 a check is violated, 2 usage or parse error, 3 a size guard
/// was exceeded.
#[derive(Parser)]
#[command(name = "negassoc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Seed for every random component.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo replications.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Violation tolerance for covariance and stability checks.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Write report.json / summary.csv here instead of printing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Subcommand)]
enum Command {
    /// ULC and PF2 of a count law (pmf array, {"probs": ..} or {"kind", "params"}).
    CheckUlc { input: String },
    /// Rayleigh property of a multi-affine measure ({"n", "entries"}).
    CheckRayleigh {
        input: String,
        #[command(flatten)]
        budget: Budget,
    },
    /// Strong Rayleigh property of a multi-affine measure.
    CheckSr {
        input: String,
        #[command(flatten)]
        budget: Budget,
    },
    /// Negative association of a joint law or of a process's count vector.
    CheckNa {
        input: String,
        #[command(flatten)]
        caps: Caps,
    },
    /// Negative association in sequence.
    CheckSna {
        input: String,
        #[command(flatten)]
        caps: Caps,
    },
    /// Polarization of a count law into a symmetric subset measure.
    Polarize { input: String },
    /// Exact count-vector law of a process spec.
    CountLaw { input: String },
    /// Comparison with the Poisson process of the same intensity.
    Dominate { input: String },
    /// Chebyshev / Chernoff tail bounds per cell, optionally the maximal
    /// inequality over the first `b.len()` cells.
    Concentrate {
        input: String,
        #[arg(long)]
        eps: f64,
        /// Chernoff parameters (repeatable).
        #[arg(long = "t")]
        t: Vec<f64>,
        /// Normalising sequence, comma separated.
        #[arg(long, value_delimiter = ',')]
        b: Option<Vec<f64>>,
        /// 1-based start index of the second maximal inequality.
        #[arg(long)]
        start: Option<usize>,
    },
    /// Draws count vectors and compares cell means with the exact ones.
    Sample {
        input: String,
        /// Include every drawn count vector in the report.
        #[arg(long)]
        emit_draws: bool,
    },
    /// Runs an experiment config file.
    Run { config: String },
}

#[derive(Args)]
struct Budget {
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    lines: Option<usize>,
    #[arg(long)]
    box_radius: Option<f64>,
}

impl Budget {
    fn config(&self) -> StabilityConfig {
        let mut c = StabilityConfig::default();
        if let Some(g) = self.grid_points {
            c.grid_points_per_pair = g;
        }
        if let Some(l) = self.lines {
            c.lines = l;
        }
        if let Some(r) = self.box_radius {
            c.box_radius = r;
        }
        c
    }
}

#[derive(Args)]
struct Caps {
    #[arg(long)]
    max_points: Option<usize>,
    #[arg(long)]
    max_up_sets: Option<u64>,
}

impl Caps {
    fn caps(&self) -> Option<EnumerationCaps> {
        if self.max_points.is_none() && self.max_up_sets.is_none() {
            return None;
        }
        let mut c = EnumerationCaps::default();
        if let Some(p) = self.max_points {
            c.max_points = p;
        }
        if let Some(u) = self.max_up_sets {
            c.max_up_sets = u;
        }
        Some(c)
    }
}

fn read_input(arg: &str) -> Result<String, Error> {
    let t = arg.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        return Ok(arg.to_string());
    }
    if arg == "-" {
        let mut s = String::new();
        std::io::stdin()
            .read_to_string(&mut s)
            .map_err(|e| Error::Config(format!("stdin: {e}")))?;
        return Ok(s);
    }
    fs::read_to_string(arg).map_err(|e| Error::Config(format!("{arg}: {e}")))
}

fn parse<T: serde::de::DeserializeOwned>(what: &str, arg: &str) -> Result<T, Error> {
    serde_json::from_str(&read_input(arg)?).map_err(|e| Error::Config(format!("{what}: {e}")))
}

/// A `{"probs": [...]}` object, or anything a count-law spec accepts.
fn parse_tau(arg: &str) -> Result<TauSpec, Error> {
    let v: serde_json::Value = parse("count law", arg)?;
    if let Some(probs) = v.as_object().filter(|o| !o.contains_key("kind")).and_then(|o| o.get("probs")) {
        return serde_json::from_value(probs.clone()).map_err(|e| Error::Config(format!("count law: {e}")));
    }
    serde_json::from_value(v).map_err(|e| Error::Config(format!("count law: {e}")))
}

fn parse_na_input(arg: &str) -> Result<(Option<ProcessSpec>, Option<JointPmf>), Error> {
    let v: serde_json::Value = parse("input", arg)?;
    if v.get("type").is_some() {
        let p = serde_json::from_value(v).map_err(|e| Error::Config(format!("process spec: {e}")))?;
        Ok((Some(p), None))
    } else {
        let l = serde_json::from_value(v).map_err(|e| Error::Config(format!("joint law: {e}")))?;
        Ok((None, Some(l)))
    }
}

fn print_json<T: Serialize>(x: &T) {
    println!("{}", serde_json::to_string_pretty(x).expect("output serialises"));
}

fn emit(report: &ExperimentReport, common: &Common, config_format: OutputFormat) -> Result<(), Error> {
    let format = common.format.unwrap_or(config_format);
    match common.out.as_ref().or(report.config.output.dir.as_ref()) {
        Some(dir) => {
            report.write(dir, format)?;
        }
        None => match format {
            OutputFormat::Json => print!("{}", report.to_json()),
            OutputFormat::Csv => print!("{}", report.to_csv()?),
            OutputFormat::Both => print!("{}{}", report.to_json(), report.to_csv()?),
        },
    }
    Ok(())
}

fn scenario_config(common: &Common, scenario: Scenario, caps: Option<EnumerationCaps>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(common.seed.unwrap_or(0), scenario);
    if let Some(r) = common.reps {
        cfg.reps = r;
    }
    cfg.tol = common.tol;
    cfg.caps = caps;
    cfg
}

fn execute(cli: Cli) -> Result<i32, Error> {
    let common = &cli.common;
    let scenario = match cli.command {
        Command::Polarize { input } => {
            let (pmf, _) = parse_tau(&input)?.build(negassoc::discrete_laws::DEFAULT_MASS_FLOOR)?;
            print_json(&polarize(&pmf)?);
            return Ok(0);
        }
        Command::CountLaw { input } => {
            let p = ProcessSpec::parse(&read_input(&input)?)?.build()?;
            print_json(&p.count_law()?);
            return Ok(0);
        }
        Command::Run { config } => {
            let mut cfg = ExperimentConfig::parse(&read_input(&config)?)?;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            if let Some(r) = common.reps {
                cfg.reps = r;
            }
            if let Some(t) = common.tol {
                cfg.tol = Some(t);
            }
            let report = run(&cfg)?;
            emit(&report, common, cfg.output.format)?;
            return Ok(report.exit_code());
        }
        Command::CheckUlc { input } => (Scenario::UlcCheck { tau: parse_tau(&input)? }, None),
        Command::CheckRayleigh { input, budget } => (
            Scenario::SrCheck {
                measure: parse::<SubsetMeasure>("measure", &input)?,
                check: StabilityKind::Rayleigh,
                stability: Some(budget.config()),
            },
            None,
        ),
        Command::CheckSr { input, budget } => (
            Scenario::SrCheck {
                measure: parse::<SubsetMeasure>("measure", &input)?,
                check: StabilityKind::Strong,
                stability: Some(budget.config()),
            },
            None,
        ),
        Command::CheckNa { input, caps } => {
            let (process, law) = parse_na_input(&input)?;
            (Scenario::NaCheck { process, law, check: DependenceKind::Na }, caps.caps())
        }
        Command::CheckSna { input, caps } => {
            let (process, law) = parse_na_input(&input)?;
            (Scenario::NaCheck { process, law, check: DependenceKind::Sna }, caps.caps())
        }
        Command::Dominate { input } => {
            (Scenario::Domination { process: ProcessSpec::parse(&read_input(&input)?)? }, None)
        }
        Command::Concentrate { input, eps, t, b, start } => (
            Scenario::Concentration {
                process: ProcessSpec::parse(&read_input(&input)?)?,
                eps,
                t_grid: (!t.is_empty()).then_some(t),
                b,
                start,
            },
            None,
        ),
        Command::Sample { input, emit_draws } => {
            (Scenario::Sample { process: ProcessSpec::parse(&read_input(&input)?)?, emit_draws }, None)
        }
    };
    let (scenario, caps) = scenario;
    let cfg = scenario_config(common, scenario, caps);
    let report = run(&cfg)?;
    let default = if common.out.is_some() { OutputFormat::Both } else { OutputFormat::Json };
    emit(&report, common, default)?;
    Ok(report.exit_code())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
