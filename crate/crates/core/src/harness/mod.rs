//! Experiment configuration, scenario dispatch and report emission.

pub mod concentration;
pub mod mc;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dependence_check::{is_na, is_sna, DependenceConfig, DependenceVerdict, EnumerationCaps, COV_TOL};
use crate::discrete_laws::{is_pf2, is_ulc, JointPmf};
use crate::error::{Error, Result};
use crate::multiaffine::{is_rayleigh, is_strongly_rayleigh, StabilityConfig, StabilityVerdict, StabilityWitness, SubsetMeasure};
use crate::ordering::{poisson_domination_report, BoundReport, BoundStatus, DominationReport};
use crate::pointproc::{ProcessSpec, TauSpec};
use crate::sturm::count_roots;

use concentration::{chebyshev_from_pmf, chernoff_from_pmf, kolmogorov_bound_check, CHERNOFF_T_GRID};
use mc::{mc_estimate, sample_counts, Functional};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_REPS: usize = 10_000;
/// Hard ceilings for user cap overrides.
pub const MAX_POINTS_CEILING: usize = 64;
pub const MAX_UP_SETS_CEILING: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Both,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DependenceKind {
    #[default]
    Na,
    Sna,
    Both,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityKind {
    Rayleigh,
    #[default]
    Strong,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scenario {
    UlcCheck {
        tau: TauSpec,
    },
    /// Either a process (checked through its count law) or a joint law.
    NaCheck {
        #[serde(default)]
        process: Option<ProcessSpec>,
        #[serde(default)]
        law: Option<JointPmf>,
        #[serde(default)]
        check: DependenceKind,
    },
    SrCheck {
        measure: SubsetMeasure,
        #[serde(default)]
        check: StabilityKind,
        #[serde(default)]
        stability: Option<StabilityConfig>,
    },
    Domination {
        process: ProcessSpec,
    },
    Concentration {
        process: ProcessSpec,
        eps: f64,
        #[serde(default)]
        t_grid: Option<Vec<f64>>,
        /// Normalising sequence for the maximal inequality over cells
        /// `0..b.len()`.
        #[serde(default)]
        b: Option<Vec<f64>>,
        /// 1-based start index of the second maximal inequality.
        #[serde(default)]
        start: Option<usize>,
    },
    Sample {
        process: ProcessSpec,
        #[serde(default)]
        emit_draws: bool,
    },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::UlcCheck { .. } => "ulc-check",
            Scenario::NaCheck { .. } => "na-check",
            Scenario::SrCheck { .. } => "sr-check",
            Scenario::Domination { .. } => "domination",
            Scenario::Concentration { .. } => "concentration",
            Scenario::Sample { .. } => "sample",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub caps: Option<EnumerationCaps>,
    pub scenario: Scenario,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_reps() -> usize {
    DEFAULT_REPS
}

impl ExperimentConfig {
    pub fn new(seed: u64, scenario: Scenario) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            name: None,
            seed,
            reps: DEFAULT_REPS,
            tol: None,
            caps: None,
            scenario,
            output: OutputConfig::default(),
        }
    }

    /// Parses and validates; serde diagnostics carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be >= 1".into()));
        }
        if let Some(t) = self.tol {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("tol = {t} must be a finite non-negative number")));
            }
        }
        if let Some(c) = self.caps {
            if c.max_points > MAX_POINTS_CEILING || c.max_up_sets > MAX_UP_SETS_CEILING {
                return Err(Error::Config(format!(
                    "caps exceed the hard ceilings (max_points <= {MAX_POINTS_CEILING}, max_up_sets <= {MAX_UP_SETS_CEILING})"
                )));
            }
        }
        let needs_mc = match &self.scenario {
            Scenario::Sample { .. } => true,
            Scenario::Concentration { b, .. } => b.is_some(),
            _ => false,
        };
        if needs_mc && self.reps < mc::MIN_REPLICATIONS {
            return Err(Error::Config(format!(
                "scenario {} needs reps >= {}",
                self.scenario.name(),
                mc::MIN_REPLICATIONS
            )));
        }
        Ok(())
    }

    fn dependence_config(&self) -> DependenceConfig {
        DependenceConfig { tol: self.tol.unwrap_or(COV_TOL), caps: self.caps.unwrap_or_default() }
    }
}

/// One line of the CSV summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check_name: String,
    pub lhs: Option<f64>,
    pub rhs: Option<f64>,
    pub slack: Option<f64>,
    pub status: BoundStatus,
}

impl CheckRow {
    fn bound(name: String, b: &BoundReport) -> Self {
        Self { check_name: name, lhs: Some(b.lhs), rhs: Some(b.rhs), slack: Some(b.slack), status: b.status }
    }

    fn flag(name: &str, holds: bool) -> Self {
        Self { check_name: name.into(), lhs: None, rhs: None, slack: None, status: status(holds) }
    }

    fn holds(&self) -> bool {
        self.status == BoundStatus::Holds
    }
}

fn status(holds: bool) -> BoundStatus {
    if holds {
        BoundStatus::Holds
    } else {
        BoundStatus::Violated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub name: Option<String>,
    pub scenario: String,
    pub seed: u64,
    pub reps: usize,
    pub pass: bool,
    pub checks: Vec<CheckRow>,
    pub details: Value,
    /// The configuration that produced this report, for replay.
    pub config: ExperimentConfig,
}

impl ExperimentReport {
    /// 0 when every check holds, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    /// `scenario,check_name,lhs,rhs,slack,status,seed,n`
    pub fn to_csv(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Line<'a> {
            scenario: &'a str,
            check_name: &'a str,
            lhs: Option<f64>,
            rhs: Option<f64>,
            slack: Option<f64>,
            status: BoundStatus,
            seed: u64,
            n: usize,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.checks.is_empty() {
            w.write_record(["scenario", "check_name", "lhs", "rhs", "slack", "status", "seed", "n"])
                .map_err(csv_err)?;
        }
        for c in &self.checks {
            w.serialize(Line {
                scenario: &self.scenario,
                check_name: &c.check_name,
                lhs: c.lhs,
                rhs: c.rhs,
                slack: c.slack,
                status: c.status,
                seed: self.seed,
                n: self.reps,
            })
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    /// Writes `report.json` and/or `summary.csv` into `dir`.
    pub fn write(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut written = Vec::new();
        if matches!(format, OutputFormat::Json | OutputFormat::Both) {
            let p = dir.join("report.json");
            fs::write(&p, self.to_json()).map_err(|e| io_err(&p, e))?;
            written.push(p);
        }
        if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
            let p = dir.join("summary.csv");
            fs::write(&p, self.to_csv()?).map_err(|e| io_err(&p, e))?;
            written.push(p);
        }
        Ok(written)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

fn io_err(p: &Path, e: std::io::Error) -> Error {
    Error::Config(format!("{}: {e}", p.display()))
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report parts serialise")
}

fn dependence_row(name: &str, v: &DependenceVerdict, tol: f64) -> CheckRow {
    CheckRow {
        check_name: name.into(),
        lhs: Some(v.max_value),
        rhs: Some(tol),
        slack: Some(tol - v.max_value),
        status: status(v.holds()),
    }
}

fn stability_row(name: &str, v: &StabilityVerdict) -> CheckRow {
    let (lhs, rhs) = match &v.witness {
        Some(StabilityWitness::Rayleigh { slack, .. }) => (Some(0.0), Some(*slack)),
        Some(StabilityWitness::Line { distinct_roots, distinct_real_roots, .. }) => {
            (Some(*distinct_roots as f64), Some(*distinct_real_roots as f64))
        }
        None => (None, None),
    };
    CheckRow {
        check_name: name.into(),
        lhs,
        rhs,
        slack: lhs.zip(rhs).map(|(l, r)| r - l),
        status: status(!v.violated()),
    }
}

fn cells_label(b: &BoundReport) -> String {
    let key = ["cells", "h"].into_iter().find(|k| b.context.contains_key(*k));
    match key {
        Some(k) => {
            let sign = match b.context.get("sign").and_then(Value::as_str) {
                Some("negative") => "-",
                Some("positive") => "+",
                _ => "",
            };
            format!("{}{sign}{}", b.name, b.context[k])
        }
        None => b.name.clone(),
    }
}

fn domination_rows(r: &DominationReport) -> Vec<CheckRow> {
    let mut rows: Vec<CheckRow> = r
        .cx_marginals
        .iter()
        .map(|c| CheckRow {
            check_name: format!("cx[{}]", c.cell),
            lhs: Some(0.0),
            rhs: Some(c.verdict.min_slack),
            slack: Some(c.verdict.min_slack),
            status: status(c.verdict.holds),
        })
        .collect();
    rows.extend(r.bounds().map(|b| CheckRow::bound(cells_label(b), b)));
    rows
}

/// Evaluates the configured scenario.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let seed = config.seed;
    let (checks, details) = match &config.scenario {
        Scenario::UlcCheck { tau } => {
            let (pmf, _) = tau.build(crate::discrete_laws::DEFAULT_MASS_FLOOR)?;
            let ulc = is_ulc(&pmf)?;
            let pf2 = is_pf2(&pmf);
            let roots = count_roots(pmf.probs());
            let rows = vec![CheckRow::flag("ulc", ulc.holds), CheckRow::flag("pf2", pf2.holds)];
            let details = json!({
                "pmf": pmf,
                "ulc": ulc,
                "pf2": pf2,
                "generating_polynomial": roots,
                "real_rooted": roots.real_rooted(),
            });
            (rows, details)
        }
        Scenario::NaCheck { process, law, check } => {
            let (law, truncation_mass) = match (process, law) {
                (Some(p), None) => {
                    let l = p.build()?.count_law()?;
                    (l.law, l.truncation_mass)
                }
                (None, Some(l)) => (l.clone(), 1.0),
                _ => return Err(Error::Config("na-check needs exactly one of `process` and `law`".into())),
            };
            let cfg = config.dependence_config();
            let mut rows = Vec::new();
            let mut details = serde_json::Map::new();
            details.insert("dim".into(), json!(law.dim()));
            details.insert("atoms".into(), json!(law.len()));
            details.insert("truncation_mass".into(), json!(truncation_mass));
            if matches!(check, DependenceKind::Na | DependenceKind::Both) {
                let v = is_na(&law, &cfg)?;
                rows.push(dependence_row("na", &v, cfg.tol));
                details.insert("na".into(), to_value(&v));
            }
            if matches!(check, DependenceKind::Sna | DependenceKind::Both) {
                let v = is_sna(&law, &cfg)?;
                rows.push(dependence_row("sna", &v, cfg.tol));
                details.insert("sna".into(), to_value(&v));
            }
            (rows, Value::Object(details))
        }
        Scenario::SrCheck { measure, check, stability } => {
            let mut sc = stability.clone().unwrap_or_default();
            sc.seed = seed;
            if let Some(t) = config.tol {
                sc.tol = t;
            }
            let (name, v) = match check {
                StabilityKind::Rayleigh => ("rayleigh", is_rayleigh(measure, &sc)?),
                StabilityKind::Strong => ("strongly_rayleigh", is_strongly_rayleigh(measure, &sc)?),
            };
            (vec![stability_row(name, &v)], json!({ "verdict": v, "stability": sc }))
        }
        Scenario::Domination { process } => {
            let r = poisson_domination_report(&process.build()?)?;
            (domination_rows(&r), to_value(&r))
        }
        Scenario::Concentration { process, eps, t_grid, b, start } => {
            let proc_ = process.build()?;
            let ts = t_grid.clone().unwrap_or_else(|| CHERNOFF_T_GRID.to_vec());
            let mut rows = Vec::new();
            let mut reports = Vec::new();
            for cell in 0..proc_.cells() {
                let count = proc_.cell_law(cell)?;
                let mut cell_reports = vec![chebyshev_from_pmf(&count, *eps)?];
                for &t in &ts {
                    cell_reports.extend(chernoff_from_pmf(&count, *eps, t)?);
                }
                for r in cell_reports {
                    let r = r.with("cell", json!(cell)).with("path", json!("exact"));
                    let label = match r.context.get("t") {
                        Some(t) => format!("{}[{cell}]@t={t}", r.name),
                        None => format!("{}[{cell}]", r.name),
                    };
                    rows.push(CheckRow::bound(label, &r));
                    reports.push(r);
                }
            }
            if let Some(b) = b {
                let mut variants = vec![None];
                if start.is_some() {
                    variants.push(*start);
                }
                for s in variants {
                    let r = kolmogorov_bound_check(&proc_, b, *eps, s, config.reps, seed)?;
                    rows.push(CheckRow::bound(r.name.clone(), &r));
                    reports.push(r);
                }
            }
            (rows, json!({ "reports": reports }))
        }
        Scenario::Sample { process, emit_draws } => {
            let proc_ = process.build()?;
            let n = config.reps;
            let mut rows = Vec::new();
            let mut estimates = Vec::new();
            for cell in 0..proc_.cells() {
                let est = mc_estimate(&proc_, &Functional::CountMean { cell }, n, seed)?;
                let exact = proc_.cell_law(cell)?.mean();
                let r = BoundReport::new(
                    format!("sample_mean[{cell}]"),
                    (est.estimate - exact).abs(),
                    4.0 * est.std_error,
                    [("exact_mean".to_string(), json!(exact)), ("estimate".into(), to_value(&est))].into(),
                );
                rows.push(CheckRow::bound(r.name.clone(), &r));
                estimates.push(r);
            }
            let mut details = json!({ "mean_checks": estimates });
            if *emit_draws {
                details["draws"] = to_value(&sample_counts(&proc_, n, seed)?);
            }
            (rows, details)
        }
    };
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        name: config.name.clone(),
        scenario: config.scenario.name().to_string(),
        seed,
        reps: config.reps,
        pass: checks.iter().all(CheckRow::holds),
        checks,
        details,
        config: config.clone(),
    })
}

/// Runs and writes the configured outputs (when an output directory is set).
pub fn run_to_dir(config: &ExperimentConfig) -> Result<(ExperimentReport, Vec<PathBuf>)> {
    let report = run(config)?;
    let written = match &config.output.dir {
        Some(dir) => report.write(dir, config.output.format)?,
        None => Vec::new(),
    };
    Ok((report, written))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn na_check_example() {
        let cfg = ExperimentConfig::parse(
            r#"{"schema_version":1,"seed":1,"scenario":{"kind":"na-check",
                "process":{"type":"mixed","tau":[0,1],"partition":[0.3,0.7]}}}"#,
        )
        .unwrap();
        let r = run(&cfg).unwrap();
        assert!(r.pass);
        assert_eq!(r.exit_code(), 0);
    }

    #[test]
    fn sr_check_example() {
        let cfg = ExperimentConfig::parse(
            r#"{"schema_version":1,"seed":1,"scenario":{"kind":"sr-check",
                "measure":{"n":2,"entries":[[0,0.5],[3,0.5]]},
                "stability":{"grid_points_per_pair":200,"lines":50}}}"#,
        )
        .unwrap();
        let r = run(&cfg).unwrap();
        assert!(!r.pass);
        assert_eq!(r.exit_code(), 1);
        let csv = r.to_csv().unwrap();
        assert!(csv.starts_with("scenario,check_name,lhs,rhs,slack,status,seed,n\n"));
        assert!(csv.contains("sr-check,strongly_rayleigh,"));
    }

    #[test]
    fn config_diagnostics() {
        let e = ExperimentConfig::parse("{\"schema_version\":1,\n\"seed\":1,\n\"bogus\":2}").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("bogus") && msg.contains("line 3"), "{msg}");
        assert!(ExperimentConfig::parse(r#"{"schema_version":2,"seed":1,"scenario":{"kind":"sample","process":{"type":"mixed","tau":[1],"partition":[1]}}}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"schema_version":1,"scenario":{"kind":"sample","process":{"type":"mixed","tau":[1],"partition":[1]}}}"#).is_err());
        assert!(ExperimentConfig::parse(r#"{"schema_version":1,"seed":1,"reps":0,"scenario":{"kind":"sample","process":{"type":"mixed","tau":[1],"partition":[1]}}}"#).is_err());
        let e = ExperimentConfig::parse(
            r#"{"schema_version":1,"seed":1,"scenario":{"kind":"domination","process":{"type":"mixed","tau":[1],"partition":[1]},"extra":0}}"#,
        )
        .unwrap_err();
        assert!(e.to_string().contains("extra"), "{e}");
    }

    #[test]
    fn reports_are_reproducible() {
        let cfg = ExperimentConfig::parse(
            r#"{"schema_version":1,"seed":3,"reps":2000,"scenario":{"kind":"concentration",
                "process":{"type":"mixed","tau":{"kind":"binomial","params":{"n":4,"p":0.5}},"partition":[0.25,0.25,0.25,0.25]},
                "eps":1.0,"b":[1,2,3,4],"start":2}}"#,
        )
        .unwrap();
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
        assert!(a.pass, "{}", a.to_csv().unwrap());
    }
}
