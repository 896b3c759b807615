//! The `run`, `batch`, `plotdata` and `validate` subcommands as library calls.

use std::fs;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rdv_core::config::ScenarioConfig;
use rdv_core::mission::Phase;
use rdv_core::sim::run_scenario;
use rdv_core::trace::{fmt3, RunSummary, RunTrace, TraceFormat};

use crate::diag::CliError;
use crate::scenarios;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "RDV_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "rdv-out";

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAILED_ENERGY: i32 = 2;

/// `--out` if given, else `$RDV_OUT_DIR`, else `./rdv-out`.
pub fn out_dir(explicit: Option<PathBuf>) -> PathBuf {
    explicit
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Process status for a finished run. A run that stopped short of a terminal
/// phase counts as an error.
pub fn exit_code(summary: &RunSummary) -> i32 {
    match summary.phase {
        Phase::CompletedSuccess | Phase::CompletedAborted | Phase::CompletedMiss => EXIT_OK,
        Phase::FailedEnergy => EXIT_FAILED_ENERGY,
        Phase::Gathering | Phase::CommittedRendezvous | Phase::CommittedAbort => EXIT_ERROR,
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn file_stem(cfg: &ScenarioConfig) -> String {
    let name = if cfg.name.is_empty() { "scenario" } else { cfg.name.as_str() };
    format!("{name}_seed{}", cfg.run.seed)
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: RunSummary,
    pub exit_code: i32,
}

/// Runs one scenario and writes `<name>_seed<k>.<ext>` plus
/// `<name>_seed<k>.summary.json` into `out`.
pub fn run_config(cfg: &ScenarioConfig, out: &Path, format: TraceFormat) -> Result<RunReport, CliError> {
    let trace = run_scenario(cfg)?;
    create_dir(out)?;
    let stem = file_stem(cfg);
    let trace_path = out.join(format!("{stem}.{}", format.extension()));
    let summary_path = out.join(format!("{stem}.summary.json"));
    write(&trace_path, &trace.encode(format))?;
    let summary_json = serde_json::to_string_pretty(&trace.summary).expect("summary serializes");
    write(&summary_path, &(summary_json + "\n"))?;
    Ok(RunReport {
        trace_path,
        summary_path,
        exit_code: exit_code(&trace.summary),
        summary: trace.summary,
    })
}

pub fn run(scenario: &str, seed: Option<u64>, out: &Path, format: TraceFormat) -> Result<RunReport, CliError> {
    let mut cfg = scenarios::load(scenario)?;
    if let Some(s) = seed {
        cfg.run.seed = s;
    }
    run_config(&cfg, out, format)
}

/// One line for stdout describing a finished run.
pub fn summary_line(s: &RunSummary) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), fmt3);
    format!(
        "phase={} decision={} decision_time={} final_time={} final_energy={} capture_error={} safe={}",
        s.phase,
        s.decision.map_or("-", |d| match d {
            rdv_core::risk::Decision::Proceed => "PROCEED",
            rdv_core::risk::Decision::Abort => "ABORT",
        }),
        opt(s.decision_time),
        fmt3(s.final_time),
        fmt3(s.final_energy),
        opt(s.capture_error),
        s.persistently_safe,
    )
}

/// `a..b` or `a..=b` (both inclusive) or a single seed.
pub fn parse_seeds(text: &str) -> Result<RangeInclusive<u64>, CliError> {
    let bad = || CliError::new("input", format!("invalid seed range {text:?}; expected a..b"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    let range = match text.split_once("..") {
        Some((a, b)) => num(a)?..=num(b.strip_prefix('=').unwrap_or(b))?,
        None => {
            let n = num(text)?;
            n..=n
        }
    };
    if range.is_empty() {
        return Err(bad());
    }
    Ok(range)
}

#[derive(Debug, Clone)]
pub struct BatchReport {
    pub runs: Vec<(u64, RunReport)>,
    pub table_path: PathBuf,
    pub exit_code: i32,
}

pub const BATCH_COLUMNS: [&str; 11] = [
    "seed",
    "phase",
    "decision",
    "decision_time",
    "final_time",
    "final_energy",
    "capture_error",
    "persistently_safe",
    "ticks",
    "solves",
    "trace",
];

/// Runs every seed (concurrently) and writes one trace per seed plus
/// `<name>_batch.csv`.
pub fn batch(
    scenario: &str,
    seeds: RangeInclusive<u64>,
    out: &Path,
    format: TraceFormat,
) -> Result<BatchReport, CliError> {
    let base = scenarios::load(scenario)?;
    create_dir(out)?;
    let seeds: Vec<u64> = seeds.collect();
    let runs: Vec<(u64, RunReport)> = seeds
        .par_iter()
        .map(|&seed| {
            let mut cfg = base.clone();
            cfg.run.seed = seed;
            run_config(&cfg, out, format).map(|r| (seed, r))
        })
        .collect::<Result<_, _>>()?;

    let name = if base.name.is_empty() { "scenario" } else { base.name.as_str() };
    let table_path = out.join(format!("{name}_batch.csv"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BATCH_COLUMNS).expect("in-memory write");
    let opt = |v: Option<f64>| v.map_or_else(String::new, fmt3);
    for (seed, r) in &runs {
        let s = &r.summary;
        let decision = s.decision.map(|d| serde_json::to_value(d).expect("decision serializes"));
        w.write_record([
            seed.to_string(),
            s.phase.to_string(),
            decision.and_then(|v| v.as_str().map(String::from)).unwrap_or_default(),
            opt(s.decision_time),
            fmt3(s.final_time),
            fmt3(s.final_energy),
            opt(s.capture_error),
            s.persistently_safe.to_string(),
            s.ticks.to_string(),
            s.solves.to_string(),
            r.trace_path.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        ])
        .expect("in-memory write");
    }
    let table = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 table");
    write(&table_path, &table)?;

    let exit_code = runs.iter().map(|(_, r)| r.exit_code).max().unwrap_or(EXIT_OK);
    Ok(BatchReport {
        runs,
        table_path,
        exit_code,
    })
}

/// Tally of terminal phases for a batch, in phase order.
pub fn phase_counts(runs: &[(u64, RunReport)]) -> Vec<(Phase, usize)> {
    Phase::ALL
        .iter()
        .map(|&p| (p, runs.iter().filter(|(_, r)| r.summary.phase == p).count()))
        .filter(|(_, n)| *n > 0)
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, fmt3)
}

/// One plot series: file suffix, column names, text cells.
pub struct PlotTable {
    pub suffix: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

fn table(suffix: &'static str, columns: Vec<&'static str>, rows: Vec<Vec<String>>) -> PlotTable {
    PlotTable { suffix, columns, rows }
}

/// Plot series derived from a trace.
pub fn plot_tables(trace: &RunTrace) -> Vec<PlotTable> {
    let rows = &trace.rows;
    let segment = rows
        .iter()
        .map(|r| {
            vec![
                fmt3(r.time),
                r.phase.to_string(),
                cell(r.e1),
                cell(r.e2),
                cell(r.e3),
                cell(r.e4),
            ]
        })
        .collect();
    let energy = rows.iter().map(|r| vec![fmt3(r.time), fmt3(r.energy)]).collect();
    let risk = rows
        .iter()
        .map(|r| vec![fmt3(r.time), cell(r.rho), cell(r.threshold), cell(r.rho_r)])
        .collect();
    let distance = rows.iter().map(|r| vec![fmt3(r.time), fmt3(r.distance)]).collect();
    vec![
        table("segment_energy", vec!["time", "phase", "e1", "e2", "e3", "e4"], segment),
        table("energy", vec!["time", "energy"], energy),
        table("risk", vec!["time", "rho", "threshold", "rho_r"], risk),
        table("distance", vec!["time", "distance"], distance),
    ]
}

/// Writes `<stem>.<series>.csv` for each plot series next to the trace, or
/// into `out` when given.
pub fn plotdata(trace_path: &Path, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let text = fs::read_to_string(trace_path).map_err(|e| CliError::io(trace_path, e))?;
    let trace = RunTrace::decode(&text)?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| trace_path.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    create_dir(&dir)?;
    let stem = trace_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".into());
    let mut written = Vec::new();
    for t in plot_tables(&trace) {
        let path = dir.join(format!("{stem}.{}.csv", t.suffix));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&t.columns).expect("in-memory write");
        for r in t.rows {
            w.write_record(&r).expect("in-memory write");
        }
        let body = String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 table");
        write(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}

/// Parses and checks a scenario; every problem is returned.
pub fn validate(scenario: &str) -> Result<ScenarioConfig, Vec<CliError>> {
    let text = scenarios::read(scenario).map_err(|e| vec![e])?;
    let cfg = scenarios::parse(&text).map_err(|e| vec![e])?;
    let issues = scenarios::issues(&cfg);
    if issues.is_empty() {
        Ok(cfg)
    } else {
        Err(issues)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("1..20").unwrap(), 1..=20);
        assert_eq!(parse_seeds("3..=5").unwrap(), 3..=5);
        assert_eq!(parse_seeds("7").unwrap(), 7..=7);
        assert!(parse_seeds("5..1").is_err());
        assert!(parse_seeds("a..b").is_err());
    }

    #[test]
    fn explicit_out_dir_wins() {
        assert_eq!(out_dir(Some(PathBuf::from("x"))), PathBuf::from("x"));
    }
}
