use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

use super::{BidRecord, Pubkey, SlotMode, SlotOutcome, SlotResult, TraceError, Wei};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Jsonl,
}

impl FromStr for TraceFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TraceFormat::Csv),
            "jsonl" | "ndjson" => Ok(TraceFormat::Jsonl),
            other => Err(format!("unknown trace format {other:?}")),
        }
    }
}

impl TraceFormat {
    /// Guesses the format from a file name, defaulting to CSV.
    pub fn from_path(path: &std::path::Path) -> TraceFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") | Some("json") => TraceFormat::Jsonl,
            _ => TraceFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LineErrorKind {
    #[error("negative value")]
    NegativeValue,
    #[error("bad hex: {0}")]
    BadHex(String),
    #[error("duplicate slot {0}")]
    DuplicateSlot(u64),
    #[error("slot {slot} out of order (after {previous})")]
    SlotOutOfOrder { slot: u64, previous: u64 },
    #[error("payment on non-PBS slot")]
    PaymentOnNonPbs,
    #[error("winner on non-PBS slot")]
    WinnerOnNonPbs,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("invalid `{field}`: {detail}")]
    InvalidField { field: &'static str, detail: String },
    #[error("unknown mode {0:?}")]
    UnknownMode(String),
    #[error("expected {expected} fields, found {found}")]
    FieldCount { expected: usize, found: usize },
    #[error("malformed JSON: {0}")]
    Json(String),
}

/// A rejected input line. `line` is the 1-based physical line in the file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: u64,
    pub kind: LineErrorKind,
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed<T> {
    pub records: Vec<T>,
    pub errors: Vec<LineError>,
}

impl<T> Default for Parsed<T> {
    fn default() -> Self {
        Parsed {
            records: Vec::new(),
            errors: Vec::new(),
        }
    }
}

const BID_COLUMNS: [&str; 5] = [
    "slot",
    "builder_pubkey",
    "relay_id",
    "value_wei",
    "received_at_ms",
];
const OUTCOME_COLUMNS: [&str; 4] = ["slot", "mode", "winner_pubkey", "payment_wei"];

enum Row<'a> {
    Csv {
        record: &'a csv::StringRecord,
        columns: &'a HashMap<String, usize>,
    },
    Json(&'a Map<String, Value>),
}

impl Row<'_> {
    /// Raw text of a field; `None` when absent, empty or JSON null.
    fn text(&self, field: &'static str) -> Result<Option<String>, LineErrorKind> {
        match self {
            Row::Csv { record, columns } => Ok(columns
                .get(field)
                .and_then(|&i| record.get(i))
                .filter(|s| !s.is_empty())
                .map(str::to_owned)),
            Row::Json(map) => match map.get(field) {
                None | Some(Value::Null) => Ok(None),
                Some(Value::String(s)) if s.is_empty() => Ok(None),
                Some(Value::String(s)) => Ok(Some(s.clone())),
                Some(Value::Number(n)) => Ok(Some(n.to_string())),
                Some(other) => Err(LineErrorKind::InvalidField {
                    field,
                    detail: format!("unexpected JSON value {other}"),
                }),
            },
        }
    }

    fn required(&self, field: &'static str) -> Result<String, LineErrorKind> {
        self.text(field)?.ok_or(LineErrorKind::MissingField(field))
    }
}

fn parse_uint(text: &str, field: &'static str) -> Result<u128, LineErrorKind> {
    let t = text.trim();
    if t.starts_with('-') {
        return Err(LineErrorKind::InvalidField {
            field,
            detail: "negative".into(),
        });
    }
    t.parse::<u128>().map_err(|e| LineErrorKind::InvalidField {
        field,
        detail: format!("{t:?}: {e}"),
    })
}

fn parse_u64(text: &str, field: &'static str) -> Result<u64, LineErrorKind> {
    let v = parse_uint(text, field)?;
    u64::try_from(v).map_err(|_| LineErrorKind::InvalidField {
        field,
        detail: "out of range".into(),
    })
}

fn parse_wei(text: &str, field: &'static str) -> Result<Wei, LineErrorKind> {
    if text.trim().starts_with('-') {
        return Err(LineErrorKind::NegativeValue);
    }
    parse_uint(text, field).map(Wei)
}

fn parse_pubkey(text: &str) -> Result<Pubkey, LineErrorKind> {
    Pubkey::parse(text.trim()).map_err(|e| LineErrorKind::BadHex(e.0))
}

fn bid_from_row(row: &Row<'_>) -> Result<BidRecord, LineErrorKind> {
    let slot = parse_u64(&row.required("slot")?, "slot")?;
    let builder_pubkey = parse_pubkey(&row.required("builder_pubkey")?)?;
    let relay_id = row.required("relay_id")?;
    let value = parse_wei(&row.required("value_wei")?, "value_wei")?;
    let received_at_ms = row
        .text("received_at_ms")?
        .map(|t| parse_u64(&t, "received_at_ms"))
        .transpose()?;
    Ok(BidRecord {
        slot,
        builder_pubkey,
        relay_id,
        value,
        received_at_ms,
    })
}

fn outcome_from_row(row: &Row<'_>) -> Result<SlotOutcome, LineErrorKind> {
    let slot = parse_u64(&row.required("slot")?, "slot")?;
    let mode_text = row.required("mode")?;
    let mode = SlotMode::from_str(&mode_text).map_err(|_| LineErrorKind::UnknownMode(mode_text))?;
    let winner = row.text("winner_pubkey")?;
    let payment = row.text("payment_wei")?;
    let result = match mode {
        SlotMode::Pbs => {
            let winner =
                parse_pubkey(&winner.ok_or(LineErrorKind::MissingField("winner_pubkey"))?)?;
            let payment = parse_wei(
                &payment.ok_or(LineErrorKind::MissingField("payment_wei"))?,
                "payment_wei",
            )?;
            SlotResult::Pbs { winner, payment }
        }
        SlotMode::Local | SlotMode::Missed => {
            if payment.is_some() {
                return Err(LineErrorKind::PaymentOnNonPbs);
            }
            if winner.is_some() {
                return Err(LineErrorKind::WinnerOnNonPbs);
            }
            if mode == SlotMode::Local {
                SlotResult::Local
            } else {
                SlotResult::Missed
            }
        }
    };
    Ok(SlotOutcome { slot, result })
}

/// Drives a row parser over either format, collecting per-line errors.
fn parse_rows<R, T>(
    reader: R,
    format: TraceFormat,
    columns: &[&str],
    required: &[&str],
    mut accept: impl FnMut(u64, &Row<'_>) -> Result<Option<T>, LineError>,
) -> Result<Parsed<T>, TraceError>
where
    R: Read,
{
    let mut out = Parsed::default();
    let mut push = |line: u64, row: &Row<'_>, out: &mut Parsed<T>| match accept(line, row) {
        Ok(Some(rec)) => out.records.push(rec),
        Ok(None) => {}
        Err(e) => out.errors.push(e),
    };
    match format {
        TraceFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(true)
                .flexible(true)
                .from_reader(reader);
            let header = rdr.headers().map_err(csv_error)?.clone();
            if header.is_empty() {
                return Ok(out);
            }
            let mut index = HashMap::new();
            for (i, name) in header.iter().enumerate() {
                let name = name.trim();
                if !columns.contains(&name) {
                    return Err(TraceError::Header(format!("unknown column {name:?}")));
                }
                if index.insert(name.to_owned(), i).is_some() {
                    return Err(TraceError::Header(format!("repeated column {name:?}")));
                }
            }
            if let Some(missing) = required.iter().find(|c| !index.contains_key(**c)) {
                return Err(TraceError::Header(format!("missing column {missing:?}")));
            }
            let mut record = csv::StringRecord::new();
            loop {
                match rdr.read_record(&mut record) {
                    Ok(true) => {}
                    Ok(false) => break,
                    Err(e) => return Err(csv_error(e)),
                }
                let line = record.position().map_or(0, |p| p.line());
                if record.len() != header.len() {
                    out.errors.push(LineError {
                        line,
                        kind: LineErrorKind::FieldCount {
                            expected: header.len(),
                            found: record.len(),
                        },
                    });
                    continue;
                }
                let row = Row::Csv {
                    record: &record,
                    columns: &index,
                };
                push(line, &row, &mut out);
            }
        }
        TraceFormat::Jsonl => {
            for (i, line) in BufReader::new(reader).lines().enumerate() {
                let line_no = i as u64 + 1;
                let text = line.map_err(|e| match e.kind() {
                    std::io::ErrorKind::InvalidData => TraceError::Utf8 { line: line_no },
                    _ => TraceError::Io(e),
                })?;
                if text.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<Value>(&text) {
                    Ok(Value::Object(map)) => push(line_no, &Row::Json(&map), &mut out),
                    Ok(_) => out.errors.push(LineError {
                        line: line_no,
                        kind: LineErrorKind::Json("expected an object".into()),
                    }),
                    Err(e) => out.errors.push(LineError {
                        line: line_no,
                        kind: LineErrorKind::Json(e.to_string()),
                    }),
                }
            }
        }
    }
    Ok(out)
}

fn csv_error(e: csv::Error) -> TraceError {
    match e.kind() {
        csv::ErrorKind::Utf8 { pos, .. } => TraceError::Utf8 {
            line: pos.as_ref().map_or(0, |p| p.line()),
        },
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => TraceError::Io(io),
            _ => unreachable!(),
        },
        _ => TraceError::Csv(e.to_string()),
    }
}

/// Parses relay bid records. Malformed lines are collected in
/// [`Parsed::errors`]; only I/O, encoding and header problems are fatal.
pub fn parse_bid_records<R: Read>(
    reader: R,
    format: TraceFormat,
) -> Result<Parsed<BidRecord>, TraceError> {
    parse_rows(
        reader,
        format,
        &BID_COLUMNS,
        &BID_COLUMNS[..4],
        |line, row| {
            bid_from_row(row)
                .map(Some)
                .map_err(|kind| LineError { line, kind })
        },
    )
}

/// Parses slot outcomes. On top of field validation, slots must be strictly
/// increasing: repeats are `DuplicateSlot`, regressions `SlotOutOfOrder`.
pub fn parse_slot_outcomes<R: Read>(
    reader: R,
    format: TraceFormat,
) -> Result<Parsed<SlotOutcome>, TraceError> {
    let mut seen = BTreeSet::new();
    let mut last: Option<u64> = None;
    parse_rows(
        reader,
        format,
        &OUTCOME_COLUMNS,
        &OUTCOME_COLUMNS[..2],
        |line, row| {
            let outcome = outcome_from_row(row).map_err(|kind| LineError { line, kind })?;
            if seen.contains(&outcome.slot) {
                return Err(LineError {
                    line,
                    kind: LineErrorKind::DuplicateSlot(outcome.slot),
                });
            }
            if let Some(previous) = last.filter(|&p| outcome.slot < p) {
                return Err(LineError {
                    line,
                    kind: LineErrorKind::SlotOutOfOrder {
                        slot: outcome.slot,
                        previous,
                    },
                });
            }
            seen.insert(outcome.slot);
            last = Some(outcome.slot);
            Ok(Some(outcome))
        },
    )
}

#[derive(Serialize)]
struct BidLine<'a> {
    slot: u64,
    builder_pubkey: String,
    relay_id: &'a str,
    value_wei: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    received_at_ms: Option<u64>,
}

#[derive(Serialize)]
struct OutcomeLine {
    slot: u64,
    mode: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    winner_pubkey: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    payment_wei: Option<u128>,
}

fn json_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> std::io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    w.write_all(b"\n")
}

pub fn write_bid_records<W: Write>(
    w: W,
    records: &[BidRecord],
    format: TraceFormat,
) -> std::io::Result<()> {
    match format {
        TraceFormat::Csv => {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(BID_COLUMNS)?;
            for r in records {
                out.write_record([
                    r.slot.to_string(),
                    r.builder_pubkey.to_string(),
                    r.relay_id.clone(),
                    r.value.to_string(),
                    r.received_at_ms.map(|t| t.to_string()).unwrap_or_default(),
                ])?;
            }
            out.flush()
        }
        TraceFormat::Jsonl => {
            let mut w = std::io::BufWriter::new(w);
            for r in records {
                json_line(
                    &mut w,
                    &BidLine {
                        slot: r.slot,
                        builder_pubkey: r.builder_pubkey.to_string(),
                        relay_id: &r.relay_id,
                        value_wei: r.value.0,
                        received_at_ms: r.received_at_ms,
                    },
                )?;
            }
            w.flush()
        }
    }
}

pub fn write_slot_outcomes<W: Write>(
    w: W,
    outcomes: &[SlotOutcome],
    format: TraceFormat,
) -> std::io::Result<()> {
    match format {
        TraceFormat::Csv => {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(OUTCOME_COLUMNS)?;
            for o in outcomes {
                out.write_record([
                    o.slot.to_string(),
                    o.mode().to_string(),
                    o.winner().map(ToString::to_string).unwrap_or_default(),
                    o.payment().map(|p| p.to_string()).unwrap_or_default(),
                ])?;
            }
            out.flush()
        }
        TraceFormat::Jsonl => {
            let mut w = std::io::BufWriter::new(w);
            for o in outcomes {
                json_line(
                    &mut w,
                    &OutcomeLine {
                        slot: o.slot,
                        mode: o.mode().as_str(),
                        winner_pubkey: o.winner().map(ToString::to_string),
                        payment_wei: o.payment().map(|p| p.0),
                    },
                )?;
            }
            w.flush()
        }
    }
}
