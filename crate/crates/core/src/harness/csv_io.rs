//! Aggregate and trace CSV files.
//!
//! Floats use Rust's shortest round-trip formatting, which is locale
//! independent. A run that stopped early ends with a `# failed: ...` line;
//! readers skip `#` lines.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AggregateRow, ExperimentReport};
use crate::error::{Error, Result};

pub const AGGREGATE_HEADER: [&str; 9] = [
    "experiment",
    "T",
    "tau",
    "M",
    "reps",
    "mean_regret",
    "stderr",
    "adversarial_ref",
    "stochastic_ref",
];

pub const TRACE_HEADER: [&str; 5] = ["experiment", "M", "rep", "t", "cum_regret"];

/// Prefix of the line marking an incomplete run.
pub const FAILURE_MARKER: &str = "# failed: ";

/// One line of the trace CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub experiment: String,
    #[serde(rename = "M")]
    pub window: usize,
    pub rep: usize,
    pub t: usize,
    pub cum_regret: f64,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn writer<W: Write>(sink: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(sink)
}

/// Writes the header and `rows` to `sink`.
pub fn write_aggregate<W: Write>(sink: W, rows: &[AggregateRow]) -> Result<W> {
    let mut w = writer(sink);
    w.write_record(AGGREGATE_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

pub fn write_traces<W: Write>(sink: W, rows: &[TraceRow]) -> Result<W> {
    let mut w = writer(sink);
    w.write_record(TRACE_HEADER)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
}

/// Flattens the stored traces of a report.
pub fn trace_rows(report: &ExperimentReport) -> Vec<TraceRow> {
    let name = report.config.experiment.name();
    let mut rows = Vec::new();
    for w in &report.windows {
        let mut outcomes: Vec<_> = w.outcomes.iter().collect();
        outcomes.sort_by_key(|o| o.rep);
        for o in outcomes {
            for (&t, &c) in o.trace.rounds.iter().zip(&o.trace.cum_regret) {
                rows.push(TraceRow {
                    experiment: name.to_string(),
                    window: w.row.window,
                    rep: o.rep,
                    t,
                    cum_regret: c,
                });
            }
        }
    }
    rows
}

fn append_failure<W: Write>(mut sink: W, failure: Option<&str>) -> std::io::Result<()> {
    if let Some(msg) = failure {
        let one_line = msg.replace(['\n', '\r'], " ");
        writeln!(sink, "{FAILURE_MARKER}{one_line}")?;
    }
    sink.flush()
}

/// Writes the report to `path`: traces when the report kept them,
/// otherwise the aggregate table. A failure marker is appended if the run
/// stopped early.
pub fn emit_report(report: &ExperimentReport, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let sink = std::io::BufWriter::new(file);
    let sink = if report.config.keep_traces {
        write_traces(sink, &trace_rows(report))?
    } else {
        write_aggregate(sink, &report.rows())?
    };
    append_failure(sink, report.failure.as_deref()).map_err(|e| io_err(path, e))
}

pub fn emit_aggregate(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let sink = write_aggregate(std::io::BufWriter::new(file), rows)?;
    append_failure(sink, None).map_err(|e| io_err(path, e))
}

pub fn emit_traces(rows: &[TraceRow], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let sink = write_traces(std::io::BufWriter::new(file), rows)?;
    append_failure(sink, None).map_err(|e| io_err(path, e))
}

/// Parsed file contents plus the failure message, if any.
#[derive(Clone, Debug, PartialEq)]
pub struct Parsed<R> {
    pub rows: Vec<R>,
    pub failure: Option<String>,
}

fn read_rows<R: for<'de> Deserialize<'de>>(text: &str, header: &[&str]) -> Result<Parsed<R>> {
    let failure = text
        .lines()
        .find_map(|l| l.strip_prefix(FAILURE_MARKER).map(str::to_string));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let found: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::Config(format!(
            "unexpected CSV header {found:?}, expected {header:?}"
        )));
    }
    let rows = reader.deserialize().collect::<std::result::Result<Vec<R>, _>>()?;
    Ok(Parsed { rows, failure })
}

pub fn parse_aggregate(text: &str) -> Result<Parsed<AggregateRow>> {
    read_rows(text, &AGGREGATE_HEADER)
}

pub fn parse_traces(text: &str) -> Result<Parsed<TraceRow>> {
    read_rows(text, &TRACE_HEADER)
}

pub fn read_aggregate(path: &Path) -> Result<Parsed<AggregateRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_aggregate(&text)
}

pub fn read_traces(path: &Path) -> Result<Parsed<TraceRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_traces(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> AggregateRow {
        AggregateRow {
            experiment: "dpmd_vs_M".into(),
            horizon: 100_000,
            tau: 200,
            window: 1000,
            reps: 1000,
            mean_regret: 812.25,
            stderr: 3.5,
            adversarial_ref: (2e7f64).sqrt(),
            stochastic_ref: (1e5f64).sqrt() + 200.0,
        }
    }

    #[test]
    fn empty_is_header_only() {
        let bytes = write_aggregate(Vec::new(), &[]).unwrap();
        assert_eq!(
            String::from_utf8(bytes).unwrap(),
            "experiment,T,tau,M,reps,mean_regret,stderr,adversarial_ref,stochastic_ref\n"
        );
        let bytes = write_traces(Vec::new(), &[]).unwrap();
        assert_eq!(String::from_utf8(bytes).unwrap(), "experiment,M,rep,t,cum_regret\n");
    }

    #[test]
    fn one_row_round_trips() {
        let r = row();
        let text = String::from_utf8(write_aggregate(Vec::new(), std::slice::from_ref(&r)).unwrap()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(!text.contains('\r'));
        let back = parse_aggregate(&text).unwrap();
        assert_eq!(back.rows, vec![r]);
        assert_eq!(back.failure, None);
    }

    #[test]
    fn failure_marker_is_read_back() {
        let mut bytes = write_aggregate(Vec::new(), &[row()]).unwrap();
        append_failure(&mut bytes, Some("M = 5, rep = 2: boom\nsecond")).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.ends_with("# failed: M = 5, rep = 2: boom second\n"));
        let back = parse_aggregate(&text).unwrap();
        assert_eq!(back.rows.len(), 1);
        assert_eq!(back.failure.as_deref(), Some("M = 5, rep = 2: boom second"));
    }

    #[test]
    fn wrong_header_rejected() {
        assert!(parse_aggregate("experiment,M,rep,t,cum_regret\n").is_err());
        assert!(parse_traces("a,b\n1,2\n").is_err());
    }

    #[test]
    fn trace_round_trip() {
        let rows = vec![
            TraceRow { experiment: "dpmd_trace".into(), window: 400, rep: 0, t: 100, cum_regret: -1.5e-3 },
            TraceRow { experiment: "dpmd_trace".into(), window: 400, rep: 0, t: 200, cum_regret: 17.0 },
        ];
        let text = String::from_utf8(write_traces(Vec::new(), &rows).unwrap()).unwrap();
        assert_eq!(parse_traces(&text).unwrap().rows, rows);
    }
}
