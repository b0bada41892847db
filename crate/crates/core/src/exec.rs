//! Workload execution, timing capture, and gain analysis.
//!
//! The executor runs a workload script against anything implementing
//! [`SqlSession`], records wall-clock timings per query and run, and
//! round-trips those timings through CSV. [`compute_gain`] then compares two
//! timing sets: the gain of a candidate configuration over a reference is
//!
//! ```text
//! gain = 1 - sum(candidate per-query means) / sum(reference per-query means)
//! ```
//!
//! the relative saving in total workload time. A positive gain means the
//! candidate is faster overall; the sign flips when it is slower. Reports
//! also carry a per-query mean-of-gains variant, which weights every query
//! equally instead of by its share of total time; the two can differ wildly
//! when a few queries dominate the clock, so they are labelled explicitly.
//!
//! Query failures are isolated: a failing statement is recorded with an
//! error status and execution moves on. Only a lost connection aborts the
//! run, returning the partial records gathered so far.

use std::fmt;
use std::io::{Read, Write};
use std::time::Instant;

use thiserror::Error;

use crate::workload::sql::check_grammar;
use crate::workload::{QueryId, QueryKind};

/// Errors a session can raise for one statement.
#[derive(Debug, Error)]
pub enum SessionError {
    /// The statement failed (syntax, unknown table, engine limits, ...).
    /// Execution continues with the next query.
    #[error("statement failed: {0}")]
    Statement(String),
    /// The session itself is gone; the run aborts.
    #[error("connection lost: {0}")]
    ConnectionLost(String),
}

/// A SQL execution target.
///
/// `execute` runs one statement and reports the number of result rows (or
/// affected rows). Result sets must be fully drained before returning so
/// measured time includes delivering the results, not just planning.
pub trait SqlSession {
    fn execute(&mut self, statement: &str) -> Result<u64, SessionError>;
}

/// Session that validates statements against the workload grammar instead
/// of executing them. Useful where no CUBE/ROLLUP-capable engine is
/// available: it checks every generated query is well-formed and gives the
/// executor a deterministic target.
#[derive(Debug, Default)]
pub struct GrammarSession;

impl SqlSession for GrammarSession {
    fn execute(&mut self, statement: &str) -> Result<u64, SessionError> {
        match check_grammar(statement) {
            Ok(_) => Ok(0),
            Err(e) => Err(SessionError::Statement(e.to_string())),
        }
    }
}

/// One query of a workload script.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadEntry {
    pub id: QueryId,
    pub kind: QueryKind,
    pub parent: Option<QueryId>,
    pub sql: String,
}

/// A parsed workload script: header metadata plus queries in file order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorkloadScript {
    pub seed: Option<u64>,
    pub schema_fingerprint: Option<String>,
    pub entries: Vec<WorkloadEntry>,
}

#[derive(Debug, Error)]
#[error("workload script line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

/// Parses a workload script as written by the emitter: header comments,
/// then one `-- Q<i>[.D<k>] kind=... parent=...` annotation per query
/// followed by its SQL statement terminated with `;`.
pub fn read_workload_script(text: &str) -> Result<WorkloadScript, ScriptError> {
    let mut script = WorkloadScript::default();
    let mut pending: Option<(WorkloadEntry, Vec<String>)> = None;

    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if let Some(comment) = trimmed.strip_prefix("--") {
            let comment = comment.trim();
            if pending.is_some() {
                return Err(ScriptError {
                    line: lineno,
                    message: "comment inside an unterminated statement".into(),
                });
            }
            if let Some(seed) = comment.strip_prefix("seed=") {
                script.seed = seed.parse().ok();
            } else if let Some(fp) = comment.strip_prefix("schema=") {
                script.schema_fingerprint = Some(fp.to_string());
            } else if comment.starts_with('Q') {
                let entry = parse_annotation(comment).map_err(|message| ScriptError {
                    line: lineno,
                    message,
                })?;
                pending = Some((entry, Vec::new()));
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let Some((_, lines)) = pending.as_mut() else {
            return Err(ScriptError {
                line: lineno,
                message: format!("statement text without a query annotation: {trimmed}"),
            });
        };
        if let Some(stripped) = trimmed.strip_suffix(';') {
            lines.push(stripped.to_string());
            let (mut entry, lines) = pending.take().unwrap();
            entry.sql = lines.join("\n");
            script.entries.push(entry);
        } else {
            lines.push(trimmed.to_string());
        }
    }

    if pending.is_some() {
        return Err(ScriptError {
            line: text.lines().count(),
            message: "unterminated statement at end of file".into(),
        });
    }
    Ok(script)
}

fn parse_annotation(comment: &str) -> Result<WorkloadEntry, String> {
    let mut parts = comment.split_whitespace();
    let id: QueryId = parts.next().ok_or("empty annotation")?.parse()?;
    let mut kind = None;
    let mut parent = None;
    for part in parts {
        if let Some(k) = part.strip_prefix("kind=") {
            kind = Some(k.parse::<QueryKind>()?);
        } else if let Some(p) = part.strip_prefix("parent=") {
            parent = match p {
                "none" => None,
                other => Some(other.parse::<QueryId>()?),
            };
        } else {
            return Err(format!("unknown annotation field {part}"));
        }
    }
    Ok(WorkloadEntry {
        id,
        kind: kind.ok_or("annotation missing kind=")?,
        parent,
        sql: String::new(),
    })
}

/// Outcome of one timed statement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimingStatus {
    Ok,
    Error(String),
}

impl TimingStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, TimingStatus::Ok)
    }
}

/// One timed execution of one query in one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRecord {
    pub query_id: QueryId,
    /// 1-based measured run number.
    pub run_index: u64,
    pub elapsed_ms: u64,
    pub status: TimingStatus,
}

/// All records of a workload execution.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadRun {
    pub records: Vec<TimingRecord>,
    /// True when the connection was lost and the run stopped early; the
    /// records gathered up to that point are kept.
    pub aborted: bool,
}

/// Executes a workload `runs` times after `warmup` unmeasured passes.
///
/// Warmup passes prime caches and are not recorded. Measured passes record
/// one [`TimingRecord`] per query per run; statement failures are recorded
/// with their message and execution continues. A lost connection stops
/// everything and flags the run as aborted.
pub fn run_workload(
    session: &mut dyn SqlSession,
    entries: &[WorkloadEntry],
    runs: u64,
    warmup: u64,
) -> WorkloadRun {
    let mut records = Vec::with_capacity((runs as usize) * entries.len());

    for _ in 0..warmup {
        for entry in entries {
            match session.execute(&entry.sql) {
                Ok(_) | Err(SessionError::Statement(_)) => {}
                Err(SessionError::ConnectionLost(_)) => {
                    return WorkloadRun {
                        records,
                        aborted: true,
                    };
                }
            }
        }
    }

    for run_index in 1..=runs {
        for entry in entries {
            let started = Instant::now();
            let result = session.execute(&entry.sql);
            let elapsed_ms = started.elapsed().as_millis() as u64;
            match result {
                Ok(_) => records.push(TimingRecord {
                    query_id: entry.id,
                    run_index,
                    elapsed_ms,
                    status: TimingStatus::Ok,
                }),
                Err(SessionError::Statement(message)) => records.push(TimingRecord {
                    query_id: entry.id,
                    run_index,
                    elapsed_ms,
                    status: TimingStatus::Error(message),
                }),
                Err(SessionError::ConnectionLost(message)) => {
                    records.push(TimingRecord {
                        query_id: entry.id,
                        run_index,
                        elapsed_ms,
                        status: TimingStatus::Error(format!("connection lost: {message}")),
                    });
                    return WorkloadRun {
                        records,
                        aborted: true,
                    };
                }
            }
        }
    }

    WorkloadRun {
        records,
        aborted: false,
    }
}

#[derive(Debug, Error)]
pub enum TimingIoError {
    #[error("timing CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("timing CSV line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Writes timing records as CSV with columns
/// `query_id,run_index,elapsed_ms,status`.
///
/// Records are sorted by workload position then run index, so exports are
/// stable however the records were gathered. Status is `ok` or
/// `error: <message>`.
pub fn export_timings(records: &[TimingRecord], writer: impl Write) -> Result<(), TimingIoError> {
    let mut sorted: Vec<&TimingRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.query_id, r.run_index));
    let mut csv_writer = csv::Writer::from_writer(writer);
    csv_writer.write_record(["query_id", "run_index", "elapsed_ms", "status"])?;
    for record in sorted {
        let status = match &record.status {
            TimingStatus::Ok => "ok".to_string(),
            TimingStatus::Error(message) => format!("error: {message}"),
        };
        csv_writer.write_record([
            record.query_id.to_string(),
            record.run_index.to_string(),
            record.elapsed_ms.to_string(),
            status,
        ])?;
    }
    csv_writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads timing records written by [`export_timings`]. The round trip is
/// exact: export then import returns the same records in sorted order.
pub fn import_timings(reader: impl Read) -> Result<Vec<TimingRecord>, TimingIoError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let mut records = Vec::new();
    for (i, row) in csv_reader.records().enumerate() {
        let line = i + 2; // header is line 1
        let row = row?;
        let malformed = |message: String| TimingIoError::Malformed { line, message };
        if row.len() != 4 {
            return Err(malformed(format!("expected 4 fields, got {}", row.len())));
        }
        let query_id = row[0].parse().map_err(malformed)?;
        let run_index = row[1]
            .parse()
            .map_err(|_| malformed(format!("bad run index {}", &row[1])))?;
        let elapsed_ms = row[2]
            .parse()
            .map_err(|_| malformed(format!("bad elapsed time {}", &row[2])))?;
        let status = match &row[3] {
            "ok" => TimingStatus::Ok,
            other => match other.strip_prefix("error: ") {
                Some(message) => TimingStatus::Error(message.to_string()),
                None => return Err(malformed(format!("bad status {other}"))),
            },
        };
        records.push(TimingRecord {
            query_id,
            run_index,
            elapsed_ms,
            status,
        });
    }
    Ok(records)
}

#[derive(Debug, Error)]
pub enum GainError {
    #[error("query {query_id} in the {side} set has an error status; gains need clean runs")]
    ErroredQuery {
        query_id: QueryId,
        side: &'static str,
    },
    #[error("timing sets cover different queries: {message}")]
    QuerySetMismatch { message: String },
    #[error("reference total time is zero; gain is undefined")]
    ZeroReferenceTime,
    #[error("timing set is empty")]
    Empty,
}

/// Per-query mean elapsed times in workload order.
fn per_query_means(
    records: &[TimingRecord],
    side: &'static str,
) -> Result<Vec<(QueryId, f64)>, GainError> {
    if records.is_empty() {
        return Err(GainError::Empty);
    }
    let mut order: Vec<QueryId> = Vec::new();
    let mut sums: std::collections::HashMap<QueryId, (f64, u64)> = std::collections::HashMap::new();
    for record in records {
        if let TimingStatus::Error(_) = record.status {
            return Err(GainError::ErroredQuery {
                query_id: record.query_id,
                side,
            });
        }
        let entry = sums.entry(record.query_id).or_insert_with(|| {
            order.push(record.query_id);
            (0.0, 0)
        });
        entry.0 += record.elapsed_ms as f64;
        entry.1 += 1;
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let (sum, count) = sums[&id];
            (id, sum / count as f64)
        })
        .collect())
}

fn matched_means(
    reference: &[TimingRecord],
    candidate: &[TimingRecord],
) -> Result<Vec<(QueryId, f64, f64)>, GainError> {
    let ref_means = per_query_means(reference, "reference")?;
    let cand_means = per_query_means(candidate, "candidate")?;
    let cand_map: std::collections::HashMap<QueryId, f64> = cand_means.iter().copied().collect();
    if ref_means.len() != cand_means.len() {
        return Err(GainError::QuerySetMismatch {
            message: format!(
                "reference has {} queries, candidate has {}",
                ref_means.len(),
                cand_means.len()
            ),
        });
    }
    let mut matched = Vec::with_capacity(ref_means.len());
    for (id, ref_mean) in ref_means {
        let Some(&cand_mean) = cand_map.get(&id) else {
            return Err(GainError::QuerySetMismatch {
                message: format!("query {id} is missing from the candidate set"),
            });
        };
        matched.push((id, ref_mean, cand_mean));
    }
    Ok(matched)
}

/// Gain of `candidate` over `reference`: the relative saving in total
/// workload time, `1 - total(candidate) / total(reference)`, using per-query
/// means when queries were run more than once.
///
/// Both sets must cover the same queries with clean (non-error) runs.
pub fn compute_gain(
    reference: &[TimingRecord],
    candidate: &[TimingRecord],
) -> Result<f64, GainError> {
    let matched = matched_means(reference, candidate)?;
    let ref_total: f64 = matched.iter().map(|(_, r, _)| r).sum();
    let cand_total: f64 = matched.iter().map(|(_, _, c)| c).sum();
    if ref_total == 0.0 {
        return Err(GainError::ZeroReferenceTime);
    }
    Ok(1.0 - cand_total / ref_total)
}

/// Mean of per-query gains: `mean over q of (1 - candidate_q / reference_q)`.
///
/// Weights every query equally, unlike [`compute_gain`] which weights by
/// time share. Reported alongside the total-time gain, never in its place.
pub fn compute_mean_per_query_gain(
    reference: &[TimingRecord],
    candidate: &[TimingRecord],
) -> Result<f64, GainError> {
    let matched = matched_means(reference, candidate)?;
    let mut sum = 0.0;
    for (_, ref_mean, cand_mean) in &matched {
        if *ref_mean == 0.0 {
            return Err(GainError::ZeroReferenceTime);
        }
        sum += 1.0 - cand_mean / ref_mean;
    }
    Ok(sum / matched.len() as f64)
}

/// One candidate column of a gain report.
#[derive(Debug, Clone, PartialEq)]
pub struct GainColumn {
    pub name: String,
    pub per_query_ms: Vec<f64>,
    pub total_ms: f64,
    /// Total-time gain versus the reference (fraction, 0.334 = 33.4%).
    pub gain: f64,
    /// Mean of per-query gains versus the reference.
    pub mean_per_query_gain: f64,
}

/// Comparison of one reference configuration against any number of
/// candidates over the same workload.
#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub query_ids: Vec<QueryId>,
    pub reference_name: String,
    pub reference_ms: Vec<f64>,
    pub reference_total_ms: f64,
    pub candidates: Vec<GainColumn>,
}

/// Builds a gain report from named timing sets.
pub fn build_gain_report(
    reference: (&str, &[TimingRecord]),
    candidates: &[(&str, &[TimingRecord])],
) -> Result<GainReport, GainError> {
    let ref_means = per_query_means(reference.1, "reference")?;
    let query_ids: Vec<QueryId> = ref_means.iter().map(|(id, _)| *id).collect();
    let reference_ms: Vec<f64> = ref_means.iter().map(|(_, ms)| *ms).collect();
    let reference_total_ms = reference_ms.iter().sum();

    let mut columns = Vec::with_capacity(candidates.len());
    for (name, records) in candidates {
        let matched = matched_means(reference.1, records)?;
        let per_query_ms: Vec<f64> = matched.iter().map(|(_, _, c)| *c).collect();
        columns.push(GainColumn {
            name: (*name).to_string(),
            total_ms: per_query_ms.iter().sum(),
            gain: compute_gain(reference.1, records)?,
            mean_per_query_gain: compute_mean_per_query_gain(reference.1, records)?,
            per_query_ms,
        });
    }

    Ok(GainReport {
        query_ids,
        reference_name: reference.0.to_string(),
        reference_ms,
        reference_total_ms,
        candidates: columns,
    })
}

fn format_ms(ms: f64) -> String {
    if (ms - ms.round()).abs() < 1e-9 {
        format!("{ms:.0}")
    } else {
        format!("{ms:.2}")
    }
}

fn format_percent(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

impl GainReport {
    /// Renders an aligned text table: per-query times, totals, the
    /// total-time gain, and the per-query mean gain as separate labelled
    /// rows.
    pub fn render_text(&self) -> String {
        let mut header = vec!["query".to_string(), self.reference_name.clone()];
        header.extend(self.candidates.iter().map(|c| c.name.clone()));

        let mut rows: Vec<Vec<String>> = Vec::new();
        for (i, id) in self.query_ids.iter().enumerate() {
            let mut row = vec![id.to_string(), format_ms(self.reference_ms[i])];
            row.extend(self.candidates.iter().map(|c| format_ms(c.per_query_ms[i])));
            rows.push(row);
        }
        let mut total = vec!["total".to_string(), format_ms(self.reference_total_ms)];
        total.extend(self.candidates.iter().map(|c| format_ms(c.total_ms)));
        rows.push(total);
        let mut gain = vec!["gain (total time)".to_string(), "-".to_string()];
        gain.extend(self.candidates.iter().map(|c| format_percent(c.gain)));
        rows.push(gain);
        let mut mean = vec!["gain (per-query mean)".to_string(), "-".to_string()];
        mean.extend(
            self.candidates
                .iter()
                .map(|c| format_percent(c.mean_per_query_gain)),
        );
        rows.push(mean);

        let mut widths: Vec<usize> = header.iter().map(String::len).collect();
        for row in &rows {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.len());
            }
        }
        let render_row = |row: &[String]| {
            row.iter()
                .enumerate()
                .map(|(i, cell)| {
                    if i == 0 {
                        format!("{cell:<width$}", width = widths[i])
                    } else {
                        format!("{cell:>width$}", width = widths[i])
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
        };

        let mut out = String::new();
        out.push_str(&render_row(&header));
        out.push('\n');
        out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        out.push('\n');
        for row in &rows {
            out.push_str(&render_row(row));
            out.push('\n');
        }
        out
    }

    /// Renders the same report as CSV. Gains are raw fractions for machine
    /// consumption; the reference column is empty on gain rows.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("query_id");
        out.push(',');
        out.push_str(&self.reference_name);
        for c in &self.candidates {
            out.push(',');
            out.push_str(&c.name);
        }
        out.push('\n');
        for (i, id) in self.query_ids.iter().enumerate() {
            out.push_str(&format!("{id},{}", self.reference_ms[i]));
            for c in &self.candidates {
                out.push_str(&format!(",{}", c.per_query_ms[i]));
            }
            out.push('\n');
        }
        out.push_str(&format!("total,{}", self.reference_total_ms));
        for c in &self.candidates {
            out.push_str(&format!(",{}", c.total_ms));
        }
        out.push('\n');
        out.push_str("gain_total_time,");
        for c in &self.candidates {
            out.push_str(&format!(",{}", c.gain));
        }
        out.push('\n');
        out.push_str("gain_per_query_mean,");
        for c in &self.candidates {
            out.push_str(&format!(",{}", c.mean_per_query_gain));
        }
        out.push('\n');
        out
    }
}

impl fmt::Display for GainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render_text())
    }
}
