//! Run traces: a header echoing the scenario, one [`TelemetryRow`] per tick,
//! and a terminal [`RunSummary`], with CSV and JSONL encodings that decode to
//! identical records.
//!
//! Row values are rounded to three decimals when the row is built, so both
//! encodings carry exactly the same numbers. Non-finite values are written
//! as `inf`, `-inf` or `nan`; absent values are empty CSV cells or JSON `null`.
//!
//! CSV layout:
//!
//! ```text
//! # header={"format":"rdv-trace","version":"0.1.0","seed":1,"scenario":"..."}
//! tick,time,phase,decision,x,y,energy,...
//! 0,0.000,GATHERING,,500.000,0.000,5000.000,...
//! # summary={"phase":"COMPLETED_SUCCESS",...}
//! ```
//!
//! JSONL layout: one object per line tagged `"type": "header" | "row" | "summary"`.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{RdvError, Result};
use crate::mission::{MissionState, Phase, SafetyAudit, SolveStatus};
use crate::risk::Decision;

pub const FORMAT_NAME: &str = "rdv-trace";

/// Column order of the CSV encoding.
pub const COLUMNS: [&str; 29] = [
    "tick",
    "time",
    "phase",
    "decision",
    "x",
    "y",
    "energy",
    "time_left",
    "driver_theta",
    "theta_meas",
    "speed_meas",
    "hist_speed",
    "status",
    "t1",
    "t2",
    "t3",
    "t4",
    "e1",
    "e2",
    "e3",
    "e4",
    "t_rdv",
    "pred_theta",
    "rho_r",
    "rho",
    "threshold",
    "distance",
    "iterations",
    "solves",
];

/// Rounds to three decimals and clears negative zero.
pub fn round3(v: f64) -> f64 {
    if !v.is_finite() {
        return v;
    }
    let r = (v * 1000.0).round() / 1000.0;
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Three-decimal text form; non-finite values as `inf`, `-inf`, `nan`.
pub fn fmt3(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// JSON numbers that survive non-finite values as strings.
mod jnum {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => s.parse().map_err(E::custom),
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&super::fmt3(*v))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod opt {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Option::<Repr>::deserialize(d)?.map(from_repr).transpose()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: String,
    pub seed: u64,
    /// The scenario as TOML.
    pub scenario: String,
}

impl TraceHeader {
    pub fn new(cfg: &ScenarioConfig) -> Self {
        Self {
            format: FORMAT_NAME.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            seed: cfg.run.seed,
            scenario: cfg.to_toml_string(),
        }
    }

    pub fn scenario(&self) -> Result<ScenarioConfig> {
        ScenarioConfig::from_toml_str(&self.scenario)
    }
}

/// State at the start of one control tick, after planning and before motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRow {
    pub tick: u64,
    #[serde(with = "jnum")]
    pub time: f64,
    /// Phase when the tick began.
    pub phase: Phase,
    /// Set on the tick that commits.
    pub decision: Option<Decision>,
    #[serde(with = "jnum")]
    pub x: f64,
    #[serde(with = "jnum")]
    pub y: f64,
    #[serde(with = "jnum")]
    pub energy: f64,
    /// Seconds until the mission deadline.
    #[serde(with = "jnum")]
    pub time_left: f64,
    #[serde(with = "jnum")]
    pub driver_theta: f64,
    #[serde(with = "jnum")]
    pub theta_meas: f64,
    #[serde(with = "jnum")]
    pub speed_meas: f64,
    #[serde(with = "jnum")]
    pub hist_speed: f64,
    pub status: SolveStatus,
    #[serde(with = "jnum::opt")]
    pub t1: Option<f64>,
    #[serde(with = "jnum::opt")]
    pub t2: Option<f64>,
    #[serde(with = "jnum::opt")]
    pub t3: Option<f64>,
    #[serde(with = "jnum::opt")]
    pub t4: Option<f64>,
    #[serde(with = "jnum::opt")]
    pub e1: Option<f64>,
    #[serde(with = "jnum::opt")]
    pub e2: Option<f64>,
    #[serde(with = "jnum::opt")]
    pub e3: Option<f64>,
    #[serde(with = "jnum::opt")]
    pub e4: Option<f64>,
    #[serde(with = "jnum::opt")]
    pub t_rdv: Option<f64>,
    #[serde(with = "jnum::opt")]
    pub pred_theta: Option<f64>,
    #[serde(with = "jnum::opt")]
    pub rho_r: Option<f64>,
    #[serde(with = "jnum::opt")]
    pub rho: Option<f64>,
    #[serde(with = "jnum::opt")]
    pub threshold: Option<f64>,
    /// UAS to true driver position, m.
    #[serde(with = "jnum")]
    pub distance: f64,
    /// Solver outer iterations spent on this tick.
    pub iterations: u64,
    /// Solves so far, including this tick.
    pub solves: u64,
}

impl TelemetryRow {
    /// Rounds every real-valued field to three decimals.
    pub fn rounded(mut self) -> Self {
        for v in [
            &mut self.time,
            &mut self.x,
            &mut self.y,
            &mut self.energy,
            &mut self.time_left,
            &mut self.driver_theta,
            &mut self.theta_meas,
            &mut self.speed_meas,
            &mut self.hist_speed,
            &mut self.distance,
        ] {
            *v = round3(*v);
        }
        for v in [
            &mut self.t1,
            &mut self.t2,
            &mut self.t3,
            &mut self.t4,
            &mut self.e1,
            &mut self.e2,
            &mut self.e3,
            &mut self.e4,
            &mut self.t_rdv,
            &mut self.pred_theta,
            &mut self.rho_r,
            &mut self.rho,
            &mut self.threshold,
        ] {
            *v = v.map(round3);
        }
        self
    }

    fn cells(&self) -> Vec<String> {
        let o = |v: Option<f64>| v.map(fmt3).unwrap_or_default();
        vec![
            self.tick.to_string(),
            fmt3(self.time),
            self.phase.as_str().into(),
            self.decision.map(|d| decision_str(d).to_string()).unwrap_or_default(),
            fmt3(self.x),
            fmt3(self.y),
            fmt3(self.energy),
            fmt3(self.time_left),
            fmt3(self.driver_theta),
            fmt3(self.theta_meas),
            fmt3(self.speed_meas),
            fmt3(self.hist_speed),
            self.status.as_str().into(),
            o(self.t1),
            o(self.t2),
            o(self.t3),
            o(self.t4),
            o(self.e1),
            o(self.e2),
            o(self.e3),
            o(self.e4),
            o(self.t_rdv),
            o(self.pred_theta),
            o(self.rho_r),
            o(self.rho),
            o(self.threshold),
            fmt3(self.distance),
            self.iterations.to_string(),
            self.solves.to_string(),
        ]
    }

    fn from_cells(rec: &csv::StringRecord, line: usize) -> Result<Self> {
        if rec.len() != COLUMNS.len() {
            return Err(parse_err(line, format!("expected {} columns, found {}", COLUMNS.len(), rec.len())));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse::<f64>()
                .map_err(|e| parse_err(line, format!("column {}: {e}", COLUMNS[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            if rec[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let int = |i: usize| -> Result<u64> {
            rec[i]
                .parse::<u64>()
                .map_err(|e| parse_err(line, format!("column {}: {e}", COLUMNS[i])))
        };
        let decision = match &rec[3] {
            "" => None,
            "PROCEED" => Some(Decision::Proceed),
            "ABORT" => Some(Decision::Abort),
            other => return Err(parse_err(line, format!("unknown decision {other:?}"))),
        };
        Ok(Self {
            tick: int(0)?,
            time: num(1)?,
            phase: rec[2].parse().map_err(|e: RdvError| parse_err(line, e.to_string()))?,
            decision,
            x: num(4)?,
            y: num(5)?,
            energy: num(6)?,
            time_left: num(7)?,
            driver_theta: num(8)?,
            theta_meas: num(9)?,
            speed_meas: num(10)?,
            hist_speed: num(11)?,
            status: rec[12].parse().map_err(|e: RdvError| parse_err(line, e.to_string()))?,
            t1: opt(13)?,
            t2: opt(14)?,
            t3: opt(15)?,
            t4: opt(16)?,
            e1: opt(17)?,
            e2: opt(18)?,
            e3: opt(19)?,
            e4: opt(20)?,
            t_rdv: opt(21)?,
            pred_theta: opt(22)?,
            rho_r: opt(23)?,
            rho: opt(24)?,
            threshold: opt(25)?,
            distance: num(26)?,
            iterations: int(27)?,
            solves: int(28)?,
        })
    }
}

fn decision_str(d: Decision) -> &'static str {
    match d {
        Decision::Proceed => "PROCEED",
        Decision::Abort => "ABORT",
    }
}

fn parse_err(line: usize, msg: impl std::fmt::Display) -> RdvError {
    RdvError::Data {
        index: line,
        reason: msg.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub phase: Phase,
    pub decision: Option<Decision>,
    #[serde(with = "jnum::opt")]
    pub decision_time: Option<f64>,
    #[serde(with = "jnum")]
    pub final_time: f64,
    #[serde(with = "jnum")]
    pub final_x: f64,
    #[serde(with = "jnum")]
    pub final_y: f64,
    #[serde(with = "jnum")]
    pub final_energy: f64,
    /// Distance to the true driver at the rendezvous time, m.
    #[serde(with = "jnum::opt")]
    pub capture_error: Option<f64>,
    pub ticks: usize,
    pub solves: usize,
    pub nonconvergent_solves: usize,
    pub persistently_safe: bool,
    pub first_safety_violation: Option<usize>,
    /// Why the run ended without a terminal phase, if it did.
    pub stopped: Option<String>,
}

impl RunSummary {
    pub fn new(
        state: &MissionState,
        ticks: usize,
        audit: SafetyAudit,
        solves: usize,
        nonconvergent: usize,
        stopped: Option<String>,
    ) -> Self {
        Self {
            phase: state.phase,
            decision: state.decision,
            decision_time: state.decision_time.map(round3),
            final_time: round3(state.uas.clock),
            final_x: round3(state.uas.position.x),
            final_y: round3(state.uas.position.y),
            final_energy: round3(state.uas.energy),
            capture_error: state.capture_error.map(round3),
            ticks,
            solves,
            nonconvergent_solves: nonconvergent,
            persistently_safe: audit.safe,
            first_safety_violation: audit.first_violation,
            stopped,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub header: TraceHeader,
    pub rows: Vec<TelemetryRow>,
    pub summary: RunSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Jsonl,
}

impl TraceFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            TraceFormat::Csv => "csv",
            TraceFormat::Jsonl => "jsonl",
        }
    }
}

impl FromStr for TraceFormat {
    type Err = RdvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            "jsonl" => Ok(TraceFormat::Jsonl),
            other => Err(RdvError::Input(format!("unknown log format {other:?} (csv|jsonl)"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Header(TraceHeader),
    Row(TelemetryRow),
    Summary(RunSummary),
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("trace records serialize")
}

impl RunTrace {
    pub fn encode(&self, format: TraceFormat) -> String {
        match format {
            TraceFormat::Csv => self.to_csv(),
            TraceFormat::Jsonl => self.to_jsonl(),
        }
    }

    /// Decodes either format, detected from the first line.
    pub fn decode(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::from_jsonl(text)
        } else {
            Self::from_csv(text)
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# header={}", json(&self.header)).unwrap();
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(COLUMNS).unwrap();
        for r in &self.rows {
            w.write_record(r.cells()).unwrap();
        }
        out.push_str(std::str::from_utf8(&w.into_inner().unwrap()).expect("ascii rows"));
        writeln!(out, "# summary={}", json(&self.summary)).unwrap();
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut header = None;
        let mut summary = None;
        let mut body = String::new();
        let mut body_lines = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix("# header=") {
                header = Some(serde_json::from_str(rest).map_err(|e| parse_err(i + 1, e))?);
            } else if let Some(rest) = line.strip_prefix("# summary=") {
                summary = Some(serde_json::from_str(rest).map_err(|e| parse_err(i + 1, e))?);
            } else if !line.starts_with('#') && !line.is_empty() {
                body.push_str(line);
                body.push('\n');
                body_lines.push(i + 1);
            }
        }
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let cols = rdr.headers().map_err(|e| parse_err(1, e))?.clone();
        if cols.iter().ne(COLUMNS.iter().copied()) {
            return Err(parse_err(body_lines.first().copied().unwrap_or(0), "unexpected column header"));
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let line = body_lines.get(k + 1).copied().unwrap_or(0);
            let rec = rec.map_err(|e| parse_err(line, e))?;
            rows.push(TelemetryRow::from_cells(&rec, line)?);
        }
        Ok(Self {
            header: header.ok_or_else(|| parse_err(0, "missing header line"))?,
            rows,
            summary: summary.ok_or_else(|| parse_err(0, "missing summary line"))?,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{}", json(&Line::Header(self.header.clone()))).unwrap();
        for r in &self.rows {
            writeln!(out, "{}", json(&Line::Row(r.clone()))).unwrap();
        }
        writeln!(out, "{}", json(&Line::Summary(self.summary.clone()))).unwrap();
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut header = None;
        let mut summary = None;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            match serde_json::from_str::<Line>(line).map_err(|e| parse_err(i + 1, e))? {
                Line::Header(h) => header = Some(h),
                Line::Row(r) => rows.push(r),
                Line::Summary(s) => summary = Some(s),
            }
        }
        Ok(Self {
            header: header.ok_or_else(|| parse_err(0, "missing header line"))?,
            rows,
            summary: summary.ok_or_else(|| parse_err(0, "missing summary line"))?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_row(tick: u64) -> TelemetryRow {
        TelemetryRow {
            tick,
            time: tick as f64,
            phase: Phase::Gathering,
            decision: (tick == 2).then_some(Decision::Proceed),
            x: 500.0,
            y: -0.0004,
            energy: 4999.12345,
            time_left: 80.0 - tick as f64,
            driver_theta: 10.0 * tick as f64,
            theta_meas: 10.1 * tick as f64,
            speed_meas: 11.03,
            hist_speed: 10.0,
            status: if tick == 1 { SolveStatus::InfeasibleHover } else { SolveStatus::Optimal },
            t1: (tick != 1).then_some(30.0),
            t2: Some(12.5),
            t3: Some(20.0),
            t4: Some(33.3333),
            e1: Some(100.0),
            e2: Some(200.0),
            e3: Some(300.0),
            e4: Some(400.0),
            t_rdv: Some(42.0),
            pred_theta: Some(400.0),
            rho_r: Some(12.0),
            rho: Some(if tick == 0 { f64::INFINITY } else { 150.0 }),
            threshold: Some(200.0),
            distance: 12.3456,
            iterations: 17,
            solves: tick + 1,
        }
        .rounded()
    }

    fn sample_trace() -> RunTrace {
        let cfg = ScenarioConfig::default();
        RunTrace {
            header: TraceHeader::new(&cfg),
            rows: (0..3).map(sample_row).collect(),
            summary: RunSummary {
                phase: Phase::CompletedSuccess,
                decision: Some(Decision::Proceed),
                decision_time: Some(2.0),
                final_time: 60.0,
                final_x: 500.0,
                final_y: 0.0,
                final_energy: 1234.5,
                capture_error: Some(0.25),
                ticks: 3,
                solves: 3,
                nonconvergent_solves: 0,
                persistently_safe: true,
                first_safety_violation: None,
                stopped: None,
            },
        }
    }

    #[test]
    fn csv_and_jsonl_decode_identically() {
        let t = sample_trace();
        let from_csv = RunTrace::decode(&t.to_csv()).unwrap();
        let from_json = RunTrace::decode(&t.to_jsonl()).unwrap();
        assert_eq!(from_csv, t);
        assert_eq!(from_json, t);
    }

    #[test]
    fn csv_cells_have_three_decimals() {
        let csv = sample_trace().to_csv();
        let first = csv.lines().nth(2).unwrap();
        assert!(first.starts_with("0,0.000,GATHERING,,500.000,0.000,4999.123,"), "{first}");
        assert!(first.contains(",inf,"));
    }

    #[test]
    fn header_round_trips_scenario() {
        let t = sample_trace();
        assert_eq!(t.header.scenario().unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn malformed_row_reports_line() {
        let mut csv = sample_trace().to_csv();
        csv = csv.replacen("GATHERING", "FLYING", 1);
        match RunTrace::decode(&csv) {
            Err(RdvError::Data { index, .. }) => assert_eq!(index, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
