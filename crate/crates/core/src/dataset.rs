//! The per-EV CSV contract: writing, reading and validation.

use std::io::{Read, Write};
use std::path::Path;

use crate::config::ChargerId;
use crate::report::{Finding, FindingCode, ValidationReport};
use crate::timeline::{EvHourRecord, EvState, HOURS_PER_DAY};

pub const HEADER: [&str; 9] = [
    "month",
    "hour",
    "day_type",
    "ev_state",
    "charger",
    "estimated_departure_time",
    "required_soc_departure",
    "estimated_arrival_time",
    "estimated_soc_arrival",
];

pub const NAN: &str = "nan";
pub const ROWS_PER_YEAR: usize = 365 * HOURS_PER_DAY;

/// Individual findings of one kind are capped so a badly broken file does not
/// produce a million lines; the last message reports how many were dropped.
const MAX_FINDINGS_PER_CODE: usize = 20;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("header mismatch: expected `{}`, found `{found}`", HEADER.join(","))]
    Header { found: String },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("records fail validation:\n{0}")]
    Invalid(ValidationReport),
}

/// Which total row count the validator accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowExpectation {
    /// Exactly this many rows, e.g. from a run manifest.
    Exact(usize),
    /// A whole number of 365-day years.
    WholeYears,
}

fn fmt_opt_u32(v: Option<u32>) -> String {
    v.map_or_else(|| NAN.to_string(), |x| x.to_string())
}

fn fmt_opt_soc(v: Option<f64>) -> String {
    v.map_or_else(|| NAN.to_string(), |x| format!("{x:.1}"))
}

/// The nine fields of a record as they appear in the file.
pub fn format_record(r: &EvHourRecord) -> [String; 9] {
    [
        r.month.to_string(),
        r.hour.to_string(),
        r.day_type.to_string(),
        r.ev_state.to_string(),
        r.charger.clone().unwrap_or_else(|| NAN.to_string()),
        fmt_opt_u32(r.est_departure),
        fmt_opt_soc(r.required_soc_departure),
        fmt_opt_u32(r.est_arrival),
        fmt_opt_soc(r.est_soc_arrival),
    ]
}

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .has_headers(false)
        .from_writer(out)
}

/// Writes a header and the records. Records are validated first (row count
/// excepted, since partial horizons are legitimate in tests).
pub fn write_records<W: Write>(records: &[EvHourRecord], out: W) -> Result<(), DatasetError> {
    let report = validate_dataset(records, RowExpectation::Exact(records.len()));
    if report.has_fatal() {
        return Err(DatasetError::Invalid(report));
    }
    let mut w = writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(format_record(r))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(records: &[EvHourRecord], path: &Path) -> Result<(), DatasetError> {
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_records(records, file)
}

fn parse_u32(field: &str, name: &str) -> Result<u32, String> {
    field
        .parse()
        .map_err(|_| format!("{name}: `{field}` is not an unsigned integer"))
}

fn parse_opt_u32(field: &str, name: &str) -> Result<Option<u32>, String> {
    if field == NAN {
        Ok(None)
    } else {
        parse_u32(field, name).map(Some)
    }
}

fn parse_opt_f64(field: &str, name: &str) -> Result<Option<f64>, String> {
    if field == NAN {
        return Ok(None);
    }
    match field.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(Some(x)),
        _ => Err(format!("{name}: `{field}` is not a finite number")),
    }
}

/// Parses one data row. Domain checks are left to the validator.
pub fn parse_record(fields: &csv::StringRecord) -> Result<EvHourRecord, String> {
    if fields.len() != HEADER.len() {
        return Err(format!("expected {} fields, found {}", HEADER.len(), fields.len()));
    }
    let f = |i: usize| &fields[i];
    Ok(EvHourRecord {
        month: parse_u32(f(0), HEADER[0])?,
        hour: parse_u32(f(1), HEADER[1])?,
        day_type: parse_u32(f(2), HEADER[2])?,
        ev_state: parse_u32(f(3), HEADER[3])?,
        charger: (f(4) != NAN).then(|| f(4).to_string()),
        est_departure: parse_opt_u32(f(5), HEADER[5])?,
        required_soc_departure: parse_opt_f64(f(6), HEADER[6])?,
        est_arrival: parse_opt_u32(f(7), HEADER[7])?,
        est_soc_arrival: parse_opt_f64(f(8), HEADER[8])?,
    })
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input)
}

/// Strict reader: the first problem is an error.
pub fn read_records<R: Read>(input: R) -> Result<Vec<EvHourRecord>, DatasetError> {
    let mut rows = reader(input).into_records();
    let header = rows.next().transpose()?.unwrap_or_default();
    if !header.iter().eq(HEADER) {
        return Err(DatasetError::Header {
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut out = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        out.push(parse_record(&row).map_err(|message| DatasetError::Parse { line, message })?);
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<Vec<EvHourRecord>, DatasetError> {
    read_records(std::io::BufReader::new(std::fs::File::open(path)?))
}

/// Lenient reader for the validator: header and parse problems become
/// findings, and unparseable rows are dropped from the returned records.
pub fn check_records<R: Read>(input: R, expect: RowExpectation) -> (Vec<EvHourRecord>, ValidationReport) {
    let mut report = ValidationReport::default();
    let mut sink = Sink::default();
    let mut rows = reader(input).into_records();
    match rows.next() {
        None => {
            report.push(Finding::fatal(FindingCode::Header, "file is empty"));
            return (Vec::new(), report);
        }
        Some(Err(e)) => {
            report.push(Finding::fatal(FindingCode::Parse, format!("unreadable header: {e}")));
            return (Vec::new(), report);
        }
        Some(Ok(h)) if !h.iter().eq(HEADER) => {
            report.push(Finding::fatal(
                FindingCode::Header,
                format!(
                    "expected header `{}`, found `{}`",
                    HEADER.join(","),
                    h.iter().collect::<Vec<_>>().join(",")
                ),
            ));
            return (Vec::new(), report);
        }
        Some(Ok(_)) => {}
    }
    let mut records = Vec::new();
    let mut total = 0usize;
    for row in rows {
        total += 1;
        match row {
            Ok(row) => match parse_record(&row) {
                Ok(r) => records.push(r),
                Err(msg) => {
                    let line = row.position().map_or(0, |p| p.line());
                    sink.fatal(FindingCode::Parse, format!("line {line}: {msg}"));
                }
            },
            Err(e) => sink.fatal(FindingCode::Parse, e.to_string()),
        }
    }
    check_row_count(total, expect, &mut sink);
    // transitions across a dropped row would be spurious
    if sink.count(FindingCode::Parse) == 0 {
        check_rows(&records, &mut sink);
    }
    sink.drain_into(&mut report);
    (records, report)
}

pub fn check_file(path: &Path, expect: RowExpectation) -> Result<ValidationReport, DatasetError> {
    let file = std::fs::File::open(path)?;
    Ok(check_records(std::io::BufReader::new(file), expect).1)
}

/// Every schema rule over an in-memory record sequence.
pub fn validate_dataset(records: &[EvHourRecord], expect: RowExpectation) -> ValidationReport {
    let mut sink = Sink::default();
    check_row_count(records.len(), expect, &mut sink);
    check_rows(records, &mut sink);
    let mut report = ValidationReport::default();
    sink.drain_into(&mut report);
    report
}

#[derive(Default)]
struct Sink {
    findings: Vec<Finding>,
    counts: std::collections::BTreeMap<FindingCode, usize>,
}

impl Sink {
    fn fatal(&mut self, code: FindingCode, message: String) {
        let n = self.counts.entry(code).or_default();
        *n += 1;
        if *n <= MAX_FINDINGS_PER_CODE {
            self.findings.push(Finding::fatal(code, message));
        }
    }

    fn count(&self, code: FindingCode) -> usize {
        self.counts.get(&code).copied().unwrap_or(0)
    }

    fn drain_into(self, report: &mut ValidationReport) {
        let mut findings = self.findings;
        for (code, n) in &self.counts {
            if *n > MAX_FINDINGS_PER_CODE {
                findings.push(Finding::fatal(
                    *code,
                    format!("{} further {code:?} findings suppressed", n - MAX_FINDINGS_PER_CODE),
                ));
            }
        }
        for f in findings {
            report.push(f);
        }
    }
}

fn check_row_count(rows: usize, expect: RowExpectation, sink: &mut Sink) {
    match expect {
        RowExpectation::Exact(n) if rows != n => {
            sink.fatal(FindingCode::RowCount, format!("expected {n} rows, found {rows}"));
        }
        RowExpectation::WholeYears if rows == 0 || !rows.is_multiple_of(ROWS_PER_YEAR) => {
            sink.fatal(
                FindingCode::RowCount,
                format!("{rows} rows is not a whole number of {ROWS_PER_YEAR}-row years"),
            );
        }
        _ => {}
    }
    if !rows.is_multiple_of(HOURS_PER_DAY) {
        sink.fatal(
            FindingCode::RowCount,
            format!("{rows} rows is not a whole number of days"),
        );
    }
}

fn valid_charger(s: &str) -> bool {
    s.parse::<ChargerId>().is_ok()
}

fn soc_ok(x: f64) -> bool {
    (0.0..=100.0).contains(&x)
}

fn check_rows(records: &[EvHourRecord], sink: &mut Sink) {
    for (i, r) in records.iter().enumerate() {
        let row = i + 1;
        let at = |what: &str| format!("row {row}: {what}");
        if !(1..=12).contains(&r.month) {
            sink.fatal(
                FindingCode::FieldDomain,
                at(&format!("month {} outside 1..=12", r.month)),
            );
        }
        if !(1..=24).contains(&r.hour) {
            sink.fatal(FindingCode::FieldDomain, at(&format!("hour {} outside 1..=24", r.hour)));
        }
        if !(1..=8).contains(&r.day_type) {
            sink.fatal(
                FindingCode::FieldDomain,
                at(&format!("day_type {} outside 1..=8", r.day_type)),
            );
        }
        let expected_hour = (i % HOURS_PER_DAY) as u32 + 1;
        if r.hour != expected_hour {
            sink.fatal(
                FindingCode::Sequence,
                at(&format!("hour {} where {expected_hour} was expected", r.hour)),
            );
        }
        if i % HOURS_PER_DAY != 0 {
            let prev = &records[i - 1];
            if prev.day_type != r.day_type || prev.month != r.month {
                sink.fatal(FindingCode::Sequence, at("month or day_type changes within a day"));
            }
        }
        if let Some(c) = &r.charger {
            if !valid_charger(c) {
                sink.fatal(FindingCode::FieldDomain, at(&format!("charger `{c}` is not EVC_b_n_p")));
            }
        }
        if let Some(d) = r.est_departure {
            if d < 1 {
                sink.fatal(FindingCode::FieldDomain, at("estimated_departure_time below 1"));
            }
        }
        if let Some(a) = r.est_arrival {
            if !(1..=24).contains(&a) {
                sink.fatal(
                    FindingCode::FieldDomain,
                    at(&format!("estimated_arrival_time {a} outside 1..=24")),
                );
            }
        }
        for (name, v) in [
            ("required_soc_departure", r.required_soc_departure),
            ("estimated_soc_arrival", r.est_soc_arrival),
        ] {
            if let Some(x) = v {
                if !soc_ok(x) {
                    sink.fatal(FindingCode::SocRange, at(&format!("{name} {x} outside [0, 100]")));
                }
            }
        }

        let Some(state) = r.state() else {
            sink.fatal(
                FindingCode::FieldDomain,
                at(&format!("ev_state {} outside {{1, 2, 3}}", r.ev_state)),
            );
            continue;
        };
        let connected = state == EvState::Connected;
        let incoming = state == EvState::Incoming;
        let presence = [
            ("charger", r.charger.is_some(), connected || incoming),
            ("estimated_departure_time", r.est_departure.is_some(), connected),
            ("required_soc_departure", r.required_soc_departure.is_some(), connected),
            ("estimated_arrival_time", r.est_arrival.is_some(), incoming),
            ("estimated_soc_arrival", r.est_soc_arrival.is_some(), incoming),
        ];
        for (name, present, wanted) in presence {
            if present != wanted {
                let verb = if wanted { "missing" } else { "present" };
                sink.fatal(
                    FindingCode::Presence,
                    at(&format!("{name} {verb} in state {}", r.ev_state)),
                );
            }
        }

        if i == 0 {
            continue;
        }
        let prev = &records[i - 1];
        let Some(prev_state) = prev.state() else { continue };
        if !state.can_follow(prev_state) {
            sink.fatal(
                FindingCode::Transition,
                at(&format!("illegal transition {} -> {}", prev.ev_state, r.ev_state)),
            );
            continue;
        }
        if prev_state == state && state != EvState::Away {
            if prev.charger != r.charger {
                sink.fatal(FindingCode::Countdown, at("charger changes within a run"));
            }
            let (pc, cc, ps, cs, what) = match state {
                EvState::Connected => (
                    prev.est_departure,
                    r.est_departure,
                    prev.required_soc_departure,
                    r.required_soc_departure,
                    "estimated_departure_time",
                ),
                _ => (
                    prev.est_arrival,
                    r.est_arrival,
                    prev.est_soc_arrival,
                    r.est_soc_arrival,
                    "estimated_arrival_time",
                ),
            };
            if let (Some(p), Some(c)) = (pc, cc) {
                if p != c + 1 {
                    sink.fatal(FindingCode::Countdown, at(&format!("{what} goes {p} -> {c}")));
                }
            }
            if ps != cs {
                sink.fatal(FindingCode::Countdown, at("SoC changes within a run"));
            }
        }
        // a run that ends before the file does must have counted down to 1
        if prev_state != state && prev_state != EvState::Away {
            let last = match prev_state {
                EvState::Connected => prev.est_departure,
                _ => prev.est_arrival,
            };
            if let Some(v) = last {
                if v != 1 {
                    sink.fatal(
                        FindingCode::Countdown,
                        format!("row {}: run ends with countdown {v} instead of 1", i),
                    );
                }
            }
        }
    }
}
