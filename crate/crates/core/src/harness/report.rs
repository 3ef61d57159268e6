//! Aggregation of summary rows into per-cell medians and IQRs.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::{Method, RunStatus, SummaryRow, SUMMARY_HEADER};
use crate::portfolio::{ScenarioKind, StrategyKind};

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| malformed(&e, 1))?;
    let headers = reader.headers().map_err(|e| malformed(&e, 1))?.clone();
    if headers.iter().ne(SUMMARY_HEADER) {
        return Err(Error::MalformedCsv {
            line: 1,
            message: format!("expected header `{}`", SUMMARY_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        rows.push(row.map_err(|e| malformed(&e, i as u64 + 2))?);
    }
    Ok(rows)
}

fn malformed(err: &csv::Error, fallback_line: u64) -> Error {
    if let csv::ErrorKind::Io(io) = err.kind() {
        if io.kind() == std::io::ErrorKind::NotFound {
            return Error::Io(std::io::Error::new(io.kind(), io.to_string()));
        }
    }
    Error::MalformedCsv {
        line: err.position().map_or(fallback_line, |p| p.line()),
        message: err.to_string(),
    }
}

/// Quantile with linear interpolation between order statistics. `sorted` must be
/// non-empty and ascending.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub median: f64,
    pub iqr: f64,
}

impl Spread {
    fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        Some(Self {
            median: quantile(&v, 0.5),
            iqr: quantile(&v, 0.75) - quantile(&v, 0.25),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    pub method: Method,
    pub strategy: StrategyKind,
    pub scenario: ScenarioKind,
    /// Successful runs contributing to the statistics.
    pub runs: usize,
    pub failed: usize,
    pub max_f: Option<Spread>,
    pub variance_f: Option<Spread>,
    /// Highest median `max_f` among methods on this strategy and scenario.
    pub best_max_f: bool,
    /// Lowest median `variance_f` among methods on this strategy and scenario.
    pub best_variance_f: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub lines: Vec<ReportLine>,
}

/// Groups rows by (method, strategy, scenario) in order of first appearance.
pub fn aggregate(rows: &[SummaryRow]) -> Report {
    let mut keys: Vec<(Method, StrategyKind, ScenarioKind)> = Vec::new();
    for r in rows {
        let key = (r.method, r.strategy, r.scenario);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    let mut lines: Vec<ReportLine> = keys
        .into_iter()
        .map(|(method, strategy, scenario)| {
            let group: Vec<&SummaryRow> = rows
                .iter()
                .filter(|r| (r.method, r.strategy, r.scenario) == (method, strategy, scenario))
                .collect();
            let ok: Vec<&SummaryRow> = group
                .iter()
                .copied()
                .filter(|r| r.status == RunStatus::Ok)
                .collect();
            ReportLine {
                method,
                strategy,
                scenario,
                runs: ok.len(),
                failed: group.len() - ok.len(),
                max_f: Spread::of(ok.iter().filter_map(|r| r.max_f)),
                variance_f: Spread::of(ok.iter().filter_map(|r| r.variance_f)),
                best_max_f: false,
                best_variance_f: false,
            }
        })
        .collect();

    for i in 0..lines.len() {
        let peers =
            |l: &ReportLine| l.strategy == lines[i].strategy && l.scenario == lines[i].scenario;
        let top_max = lines
            .iter()
            .filter(|l| peers(l))
            .filter_map(|l| l.max_f.map(|s| s.median))
            .fold(f64::NEG_INFINITY, f64::max);
        let low_var = lines
            .iter()
            .filter(|l| peers(l))
            .filter_map(|l| l.variance_f.map(|s| s.median))
            .fold(f64::INFINITY, f64::min);
        lines[i].best_max_f = lines[i].max_f.is_some_and(|s| s.median == top_max);
        lines[i].best_variance_f = lines[i].variance_f.is_some_and(|s| s.median == low_var);
    }
    Report { lines }
}

pub fn report(summary_path: &Path) -> Result<Report> {
    Ok(aggregate(&read_summary(summary_path)?))
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<18} {:<18} {:<18} {:>4} {:>6}  {:<24} {:<24}",
            "method",
            "strategy",
            "scenario",
            "runs",
            "failed",
            "max_f median [IQR]",
            "variance_f median [IQR]"
        )?;
        let cell = |s: Option<Spread>, best: bool| match s {
            Some(s) => format!(
                "{:.3} [{:.3}]{}",
                s.median,
                s.iqr,
                if best { " *" } else { "" }
            ),
            None => "-".to_string(),
        };
        for l in &self.lines {
            writeln!(
                f,
                "{:<18} {:<18} {:<18} {:>4} {:>6}  {:<24} {:<24}",
                l.method.name(),
                l.strategy.name(),
                l.scenario.name(),
                l.runs,
                l.failed,
                cell(l.max_f, l.best_max_f),
                cell(l.variance_f, l.best_variance_f),
            )?;
        }
        write!(f, "* best median on this strategy and scenario")
    }
}
