//! Experiment driver.
//!
//! An experiment is a grid of method × strategy × scenario × seed cells. Each
//! cell writes a JSON-lines trial log and a trajectory CSV named after its run
//! id; one `summary.csv` row per cell is written after the grid finishes.

pub mod report;

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value as Json};
use sha2::{Digest, Sha256};

use crate::baselines::{run_baseline, BaselineKind};
use crate::error::{Error, Result};
use crate::objective::population_variance;
use crate::optimizer::{self, Mode, OptimizerConfig};
use crate::portfolio::{PortfolioBlackbox, ScenarioKind, ScenarioSpec, StrategyKind, StrategySpec};
use crate::space::ParamSpace;
use crate::tpe::{History, TrialFlags};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_HEADER: [&str; 10] = [
    "method",
    "strategy",
    "scenario",
    "seed",
    "status",
    "max_f",
    "variance_f",
    "mean_f",
    "mean_step_time",
    "trial_log",
];

/// Offset between a run seed and the seed of its market scenario. Every method
/// sharing a run seed sees the same prices.
const SCENARIO_SEED_OFFSET: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    TpeAs,
    TpeConventional,
    RandomSearch,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::TpeAs => "tpe_as",
            Method::TpeConventional => "tpe_conventional",
            Method::RandomSearch => "random_search",
        }
    }

    /// Runs this method for `opt.budget` trials; `opt.mode` is overridden.
    pub fn run(
        self,
        opt: &OptimizerConfig,
        space: &ParamSpace,
        blackbox: &mut PortfolioBlackbox,
    ) -> Result<History> {
        match self {
            Method::TpeAs => optimizer::run(
                &OptimizerConfig {
                    mode: Mode::Adaptive,
                    ..opt.clone()
                },
                space,
                blackbox,
            ),
            Method::TpeConventional => {
                run_baseline(BaselineKind::TpeConventional, opt, space, blackbox)
            }
            Method::RandomSearch => run_baseline(BaselineKind::RandomSearch, opt, space, blackbox),
        }
    }
}

fn one_or_many<'de, D, T>(deserializer: D) -> Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(deserializer)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    })
}

/// Experiment description as read from JSON. `method`, `strategy` and
/// `scenario` take a single name or a list of names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(deserialize_with = "one_or_many")]
    pub method: Vec<String>,
    #[serde(deserialize_with = "one_or_many")]
    pub strategy: Vec<String>,
    #[serde(deserialize_with = "one_or_many")]
    pub scenario: Vec<String>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Resolves every name and checks the grid without running anything.
    pub fn plan(&self) -> Result<Plan> {
        fn resolve<T>(
            names: &[String],
            what: &str,
            f: impl Fn(&str) -> Option<T>,
        ) -> Result<Vec<T>> {
            if names.is_empty() {
                return Err(Error::Config(format!("no {what} given")));
            }
            names
                .iter()
                .map(|n| f(n).ok_or_else(|| Error::Config(format!("unknown {what} `{n}`"))))
                .collect()
        }
        let methods = resolve(&self.method, "method", |n| {
            [Method::TpeAs, Method::TpeConventional, Method::RandomSearch]
                .into_iter()
                .find(|m| m.name() == n)
        })?;
        let strategies = resolve(&self.strategy, "strategy", StrategyKind::from_name)?;
        let scenarios = resolve(&self.scenario, "scenario", ScenarioKind::from_name)?;

        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must not be empty".into()));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::Config(format!("seed {dup} is listed twice")));
        }
        if self.optimizer.seed != 0 {
            return Err(Error::Config(
                "`optimizer.seed` is not used; list run seeds in `seeds`".into(),
            ));
        }
        if self.optimizer.mode != Mode::Adaptive {
            return Err(Error::Config(
                "`optimizer.mode` is set by `method`; use method `tpe_conventional`".into(),
            ));
        }
        self.optimizer
            .validate()
            .map_err(|e| Error::Config(format!("optimizer: {e}")))?;

        let opt_hash = optimizer_hash(&self.optimizer)?;
        let mut cells = Vec::new();
        for &method in &methods {
            for &strategy in &strategies {
                for &scenario in &scenarios {
                    for &seed in &self.seeds {
                        cells.push(Cell {
                            method,
                            strategy,
                            scenario,
                            seed,
                            opt_hash: opt_hash.clone(),
                        });
                    }
                }
            }
        }
        Ok(Plan {
            optimizer: self.optimizer.clone(),
            cells,
        })
    }
}

/// First 8 hex digits of the SHA-256 of the optimizer settings.
pub fn optimizer_hash(opt: &OptimizerConfig) -> Result<String> {
    let digest = Sha256::digest(serde_json::to_vec(opt)?);
    Ok(digest.iter().take(4).map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub optimizer: OptimizerConfig,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cell {
    pub method: Method,
    pub strategy: StrategyKind,
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub opt_hash: String,
}

impl Cell {
    pub fn run_id(&self) -> String {
        format!(
            "{}__{}__{}__{}__seed{}",
            self.method.name(),
            self.strategy.name(),
            self.scenario.name(),
            self.opt_hash,
            self.seed
        )
    }

    pub fn trial_log_name(&self) -> String {
        format!("{}.trials.jsonl", self.run_id())
    }

    pub fn trajectory_name(&self) -> String {
        format!("{}.trajectory.csv", self.run_id())
    }

    pub fn scenario_spec(&self) -> ScenarioSpec {
        ScenarioSpec::preset(self.scenario, self.seed.wrapping_add(SCENARIO_SEED_OFFSET))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub strategy: StrategyKind,
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub status: RunStatus,
    pub max_f: Option<f64>,
    pub variance_f: Option<f64>,
    pub mean_f: Option<f64>,
    /// Wall-clock seconds per trial, proposal plus evaluation.
    pub mean_step_time: Option<f64>,
    /// Trial log file name, relative to the summary's directory.
    pub trial_log: String,
}

/// One line of a trial log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialLine {
    pub step: usize,
    pub config: Map<String, Json>,
    pub f: f64,
    pub j_score: f64,
    pub lambda: f64,
    /// `None` when the density overflows `f64`; the log form is always present.
    pub proposal_density: Option<f64>,
    pub log_proposal_density: f64,
    pub flags: TrialFlags,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces the config's `output_dir`.
    pub output_dir: Option<PathBuf>,
    /// Worker threads; `None` uses all cores.
    pub parallelism: Option<usize>,
    pub overwrite: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub output_dir: PathBuf,
    pub rows: Vec<SummaryRow>,
    /// `(run id, message)` for every failed cell.
    pub failures: Vec<(String, String)>,
}

impl ExperimentOutcome {
    pub fn summary_path(&self) -> PathBuf {
        self.output_dir.join(SUMMARY_FILE)
    }

    pub fn all_ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Runs the whole grid. Config errors and existing outputs (without
/// `overwrite`) are reported before any cell starts; a failing cell is
/// recorded in the summary and the rest of the grid proceeds.
pub fn run_experiment(
    config: &ExperimentConfig,
    options: &RunOptions,
) -> Result<ExperimentOutcome> {
    let plan = config.plan()?;
    let output_dir = options
        .output_dir
        .clone()
        .unwrap_or_else(|| config.output_dir.clone());
    if options.parallelism == Some(0) {
        return Err(Error::Config("parallelism must be at least 1".into()));
    }

    if !options.overwrite {
        let mut targets = vec![output_dir.join(SUMMARY_FILE)];
        for cell in &plan.cells {
            targets.push(output_dir.join(cell.trial_log_name()));
            targets.push(output_dir.join(cell.trajectory_name()));
        }
        if let Some(existing) = targets.iter().find(|p| p.exists()) {
            return Err(Error::Config(format!(
                "{} already exists; rerun with overwrite to replace it",
                existing.display()
            )));
        }
    }
    fs::create_dir_all(&output_dir)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = options.parallelism {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;

    let results: Vec<(SummaryRow, Option<String>)> = pool.install(|| {
        plan.cells
            .par_iter()
            .map(|cell| match run_cell(cell, &plan.optimizer, &output_dir) {
                Ok(row) => (row, None),
                Err(e) => (failed_row(cell), Some(e.to_string())),
            })
            .collect()
    });

    let mut writer =
        csv::Writer::from_path(output_dir.join(SUMMARY_FILE)).map_err(std::io::Error::from)?;
    let mut rows = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for ((row, failure), cell) in results.into_iter().zip(&plan.cells) {
        writer.serialize(&row).map_err(std::io::Error::from)?;
        if let Some(message) = failure {
            failures.push((cell.run_id(), message));
        }
        rows.push(row);
    }
    writer.flush()?;

    Ok(ExperimentOutcome {
        output_dir,
        rows,
        failures,
    })
}

fn failed_row(cell: &Cell) -> SummaryRow {
    SummaryRow {
        method: cell.method,
        strategy: cell.strategy,
        scenario: cell.scenario,
        seed: cell.seed,
        status: RunStatus::Failed,
        max_f: None,
        variance_f: None,
        mean_f: None,
        mean_step_time: None,
        trial_log: cell.trial_log_name(),
    }
}

/// Runs one cell and writes its trial log and trajectory.
pub fn run_cell(cell: &Cell, base: &OptimizerConfig, output_dir: &Path) -> Result<SummaryRow> {
    let mut blackbox =
        PortfolioBlackbox::new(StrategySpec::preset(cell.strategy), &cell.scenario_spec())?;
    let space = blackbox.space().clone();
    let opt = OptimizerConfig {
        seed: cell.seed,
        ..base.clone()
    };

    let start = Instant::now();
    let history = cell.method.run(&opt, &space, &mut blackbox)?;
    let elapsed = start.elapsed().as_secs_f64();

    let lines = trial_lines(&history, &space)?;
    write_trial_log(&output_dir.join(cell.trial_log_name()), &lines)?;
    write_trajectory(&output_dir.join(cell.trajectory_name()), &lines)?;

    let stats =
        FStats::from_lines(&lines).ok_or(Error::InsufficientHistory { needed: 1, got: 0 })?;
    Ok(SummaryRow {
        method: cell.method,
        strategy: cell.strategy,
        scenario: cell.scenario,
        seed: cell.seed,
        status: RunStatus::Ok,
        max_f: Some(stats.max_f),
        variance_f: Some(stats.variance_f),
        mean_f: Some(stats.mean_f),
        mean_step_time: Some(elapsed / history.len() as f64),
        trial_log: cell.trial_log_name(),
    })
}

pub fn trial_lines(history: &History, space: &ParamSpace) -> Result<Vec<TrialLine>> {
    history
        .iter()
        .map(|t| {
            let density = t.proposal_density();
            Ok(TrialLine {
                step: t.step,
                config: space.config_to_json(&t.config)?,
                f: t.f_value,
                j_score: t.j_score,
                lambda: t.lambda_used,
                proposal_density: density.is_finite().then_some(density),
                log_proposal_density: t.log_proposal_density,
                flags: t.flags,
            })
        })
        .collect()
}

pub fn write_trial_log(path: &Path, lines: &[TrialLine]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for line in lines {
        serde_json::to_writer(&mut out, line)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trial_log(path: &Path) -> Result<Vec<TrialLine>> {
    let reader = BufReader::new(File::open(path)?);
    let mut lines = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            lines.push(serde_json::from_str(&line)?);
        }
    }
    Ok(lines)
}

fn write_trajectory(path: &Path, lines: &[TrialLine]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(std::io::Error::from)?;
    writer
        .write_record(["step", "f", "j_score"])
        .map_err(std::io::Error::from)?;
    for line in lines {
        writer
            .write_record([
                line.step.to_string(),
                line.f.to_string(),
                line.j_score.to_string(),
            ])
            .map_err(std::io::Error::from)?;
    }
    writer.flush()?;
    Ok(())
}

/// Whole-run statistics of the observed `f` values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FStats {
    pub max_f: f64,
    pub mean_f: f64,
    pub variance_f: f64,
}

impl FStats {
    pub fn from_values(fs: &[f64]) -> Option<Self> {
        if fs.is_empty() {
            return None;
        }
        Some(Self {
            max_f: fs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_f: fs.iter().sum::<f64>() / fs.len() as f64,
            variance_f: population_variance(fs),
        })
    }

    pub fn from_lines(lines: &[TrialLine]) -> Option<Self> {
        Self::from_values(&lines.iter().map(|l| l.f).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditMismatch {
    pub trial_log: String,
    pub message: String,
}

/// Recomputes every successful summary row from its trial log. Returns the
/// rows that do not match bit for bit.
pub fn audit(summary_path: &Path) -> Result<Vec<AuditMismatch>> {
    let dir = summary_path.parent().unwrap_or(Path::new("."));
    let mut mismatches = Vec::new();
    for row in report::read_summary(summary_path)? {
        if row.status != RunStatus::Ok {
            continue;
        }
        let mismatch = |message: String| AuditMismatch {
            trial_log: row.trial_log.clone(),
            message,
        };
        let lines = match read_trial_log(&dir.join(&row.trial_log)) {
            Ok(lines) => lines,
            Err(e) => {
                mismatches.push(mismatch(e.to_string()));
                continue;
            }
        };
        let Some(stats) = FStats::from_lines(&lines) else {
            mismatches.push(mismatch("trial log is empty".into()));
            continue;
        };
        let fields = [
            ("max_f", row.max_f, stats.max_f),
            ("variance_f", row.variance_f, stats.variance_f),
            ("mean_f", row.mean_f, stats.mean_f),
        ];
        for (name, stored, recomputed) in fields {
            if stored.map(f64::to_bits) != Some(recomputed.to_bits()) {
                mismatches.push(mismatch(format!(
                    "{name}: summary {stored:?}, log {recomputed}"
                )));
            }
        }
    }
    Ok(mismatches)
}
