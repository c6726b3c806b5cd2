//! Tables behind every CLI output, rendered as CSV or JSON, and the metadata
//! sidecar that travels with each file.
//!
//! Money is always given twice: integer-rounded wei and decimal ETH.
//! Rendering is deterministic, so identical inputs give identical bytes.

use std::collections::BTreeMap;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::amm_momentum::ScenarioOutcome;
use crate::run_analysis::{escalation_index, QuartileStats, Run, RunHistogram};
use crate::run_expectation::{ComparisonRow, EntityExpectation, ExpectationCell, ExpectationTable};
use crate::trace_model::{MarketShare, Wei, WEI_PER_ETH};

/// Entity label for rows pooled across all entities.
pub const ALL_ENTITIES: &str = "ALL";
/// CSV spelling of an undefined value.
pub const NA: &str = "NA";
/// Decimal places for ETH columns (gwei resolution).
pub const ETH_DECIMALS: usize = 9;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i128),
    Float(f64),
    /// Fixed-point decimal already rendered, e.g. an ETH amount.
    Decimal(String),
    Text(String),
    Na,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Decimal(s) | Cell::Text(s) => s.clone(),
            Cell::Na => NA.to_owned(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Int(v) => Value::Number(v.to_string().parse().expect("integer literal")),
            Cell::Float(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::Decimal(s) => s
                .parse()
                .map_or_else(|_| Value::String(s.clone()), Value::Number),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Na => Value::Null,
        }
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v.into())
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i128)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Na, Cell::Float)
    }
}

/// Shortest round-tripping form; non-finite values become `NA`.
fn format_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        NA.to_owned()
    }
}

/// ETH with fixed decimals, from a (possibly fractional) wei amount.
pub fn eth_cell(wei: f64) -> Cell {
    Cell::Decimal(format!("{:.*}", ETH_DECIMALS, wei / WEI_PER_ETH as f64))
}

/// Wei rounded to the nearest integer.
pub fn wei_cell(wei: f64) -> Cell {
    Cell::Int(wei.round() as i128)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format {other:?}, expected csv or json")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Table {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    /// An array of objects keyed by column name.
    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, cell)| (c.to_string(), cell.json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&rows).expect("serializable");
        s.push('\n');
        s
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

pub fn runs_table(runs: &[Run]) -> Table {
    let mut t = Table::new(vec![
        "entity",
        "start_slot",
        "end_slot",
        "length",
        "payments_wei",
        "payments_eth",
    ]);
    for r in runs {
        let wei: Vec<String> = r.payments.iter().map(|p| p.0.to_string()).collect();
        let eth: Vec<String> = r.payments.iter().map(|p| p.to_eth_string()).collect();
        t.push(vec![
            r.entity.as_str().into(),
            r.start_slot.into(),
            r.end_slot().into(),
            r.length().into(),
            Cell::Text(wei.join(";")),
            Cell::Text(eth.join(";")),
        ]);
    }
    t
}

pub fn histogram_table(h: &RunHistogram) -> Table {
    let mut t = Table::new(vec!["entity", "k", "count"]);
    for (entity, counts) in &h.by_entity {
        for (&k, &c) in counts {
            t.push(vec![entity.as_str().into(), k.into(), c.into()]);
        }
    }
    t
}

/// Aggregate run counts per length, pooled over entities.
pub fn fig3_table(h: &RunHistogram) -> Table {
    let mut t = Table::new(vec!["k", "count"]);
    for (&k, &c) in &h.aggregate {
        t.push(vec![k.into(), c.into()]);
    }
    t
}

fn quartile_cells(q: &QuartileStats) -> Vec<Cell> {
    vec![
        q.n.into(),
        wei_cell(q.q25),
        wei_cell(q.median),
        wei_cell(q.q75),
        eth_cell(q.q25),
        eth_cell(q.median),
        eth_cell(q.q75),
    ]
}

const QUARTILE_COLUMNS: [&str; 7] = [
    "n",
    "q25_wei",
    "median_wei",
    "q75_wei",
    "q25_eth",
    "median_eth",
    "q75_eth",
];

/// Quartiles keyed by an integer (run length or position): pooled rows under
/// [`ALL_ENTITIES`] first, then one block per entity.
pub fn quartile_table(
    key: &'static str,
    pooled: &BTreeMap<usize, QuartileStats>,
    per_entity: &BTreeMap<(String, usize), QuartileStats>,
) -> Table {
    let mut columns = vec!["entity", key];
    columns.extend(QUARTILE_COLUMNS);
    let mut t = Table::new(columns);
    let rows = pooled
        .iter()
        .map(|(&k, q)| (ALL_ENTITIES, k, q))
        .chain(per_entity.iter().map(|((e, k), q)| (e.as_str(), *k, q)));
    for (entity, k, q) in rows {
        let mut row = vec![entity.into(), k.into()];
        row.extend(quartile_cells(q));
        t.push(row);
    }
    t
}

pub fn expected_table(table: &ExpectationTable) -> Table {
    let mut t = Table::new(vec!["entity", "p", "k", "expected", "stderr", "sd"]);
    for (entity, e) in &table.entities {
        for c in &e.cells {
            t.push(vec![
                entity.as_str().into(),
                e.p.into(),
                c.k.into(),
                c.expected.into(),
                c.stderr.into(),
                c.sd.into(),
            ]);
        }
    }
    t
}

pub fn compare_table(rows: &[ComparisonRow]) -> Table {
    let mut t = Table::new(vec![
        "entity", "k", "observed", "expected", "stderr", "sd", "ratio", "z",
    ]);
    for r in rows {
        t.push(vec![
            r.entity.as_str().into(),
            r.k.into(),
            r.observed.into(),
            r.expected.into(),
            r.stderr.into(),
            r.sd.into(),
            r.ratio.into(),
            r.z.into(),
        ]);
    }
    t
}

/// Escalation index of every run of length >= 2 that has a baseline for each
/// slot. Also returns how many such runs had to be skipped.
pub fn escalation_table(
    runs: &[Run],
    baselines: &BTreeMap<u64, Wei>,
    threshold: f64,
) -> (Table, usize) {
    let mut t = Table::new(vec!["entity", "start_slot", "length", "slope", "flagged"]);
    let mut skipped = 0;
    for r in runs.iter().filter(|r| r.length() >= 2) {
        match escalation_index(r, baselines, threshold) {
            Ok(e) => t.push(vec![
                r.entity.as_str().into(),
                r.start_slot.into(),
                r.length().into(),
                e.slope.into(),
                Cell::Text(e.flagged.to_string()),
            ]),
            Err(_) => skipped += 1,
        }
    }
    (t, skipped)
}

pub fn share_table(shares: &MarketShare) -> Table {
    let mut t = Table::new(vec!["entity", "wins", "share"]);
    for (entity, &wins) in &shares.wins {
        t.push(vec![
            entity.as_str().into(),
            wins.into(),
            shares.share(entity).into(),
        ]);
    }
    t
}

/// Per-slot block composition of a momentum run.
pub fn momentum_blocks_table(outcome: &ScenarioOutcome) -> Table {
    let mut t = Table::new(vec![
        "slot_offset",
        "position",
        "tx_id",
        "direction",
        "amount_in",
        "amount_out",
    ]);
    for b in &outcome.blocks {
        for (i, tx) in b.txs.iter().enumerate() {
            t.push(vec![
                b.slot_offset.into(),
                i.into(),
                tx.tx_id.as_str().into(),
                Cell::Text(tx.direction.to_string()),
                Cell::Text(tx.amount_in.clone()),
                Cell::Text(tx.amount_out.clone()),
            ]);
        }
    }
    t
}

/// Provenance written next to every output file.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Input path to SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    /// Free-form parameters (denominator mode, k_max, trials, slot range...).
    pub params: BTreeMap<String, Value>,
}

impl Metadata {
    pub fn new(tool: &str, version: &str, command: &str) -> Self {
        Metadata {
            tool: tool.to_owned(),
            version: version.to_owned(),
            command: command.to_owned(),
            ..Metadata::default()
        }
    }

    pub fn input(&mut self, path: &Path, contents: &[u8]) -> &mut Self {
        self.inputs
            .insert(path.display().to_string(), sha256_hex(contents));
        self
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.params.insert(key.to_owned(), value.into());
        self
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Path of the sidecar for `file`: `name.csv` -> `name.csv.meta.json`.
pub fn sidecar_path(file: &Path) -> PathBuf {
    let mut name = file.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    file.with_file_name(name)
}

/// Writes `contents` to `dir/name` with its sidecar. The sidecar records the
/// digest of the data file, so a reader can tell the pair belongs together.
pub fn write_with_sidecar(
    dir: &Path,
    name: &str,
    contents: &str,
    meta: &Metadata,
) -> io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    let mut doc = serde_json::to_value(meta).map_err(io::Error::other)?;
    if let Value::Object(obj) = &mut doc {
        obj.insert("file".into(), Value::String(name.to_owned()));
        obj.insert(
            "sha256".into(),
            Value::String(sha256_hex(contents.as_bytes())),
        );
    }
    let mut text = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(sidecar_path(&path), text)?;
    Ok(path)
}

/// Renders `table` as `dir/stem.<ext>` with a sidecar.
pub fn write_table(
    dir: &Path,
    stem: &str,
    table: &Table,
    format: OutputFormat,
    meta: &Metadata,
) -> io::Result<PathBuf> {
    let name = format!("{stem}.{}", format.extension());
    write_with_sidecar(dir, &name, &table.render(format), meta)
}

/// All tables of a full report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportBundle {
    pub expected: Option<Table>,
    pub histogram: Table,
    pub fig2: Table,
    pub fig3: Table,
    pub fig4: Table,
    pub comparison: Option<Table>,
    pub metadata: Metadata,
}

impl ReportBundle {
    /// Writes every table present and returns the data file paths.
    pub fn write(&self, dir: &Path, format: OutputFormat) -> io::Result<Vec<PathBuf>> {
        let mut tables = vec![
            ("histogram", Some(&self.histogram)),
            ("fig2", Some(&self.fig2)),
            ("fig3", Some(&self.fig3)),
            ("fig4", Some(&self.fig4)),
            ("expected", self.expected.as_ref()),
            ("compare", self.comparison.as_ref()),
        ];
        tables.retain(|(_, t)| t.is_some());
        tables
            .into_iter()
            .map(|(stem, t)| write_table(dir, stem, t.expect("retained"), format, &self.metadata))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: row {row}: {detail}")]
pub struct TableReadError {
    pub path: String,
    pub row: u64,
    pub detail: String,
}

fn read_rows(
    path: &Path,
    text: &str,
    need: &[&str],
) -> Result<Vec<BTreeMap<String, String>>, TableReadError> {
    let err = |row: u64, detail: String| TableReadError {
        path: path.display().to_string(),
        row,
        detail,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    if let Some(missing) = need.iter().find(|c| !headers.iter().any(|h| h == **c)) {
        return Err(err(1, format!("missing column `{missing}`")));
    }
    reader
        .records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| err(i as u64 + 2, e.to_string()))?;
            Ok(headers
                .iter()
                .map(str::to_owned)
                .zip(rec.iter().map(str::to_owned))
                .collect())
        })
        .collect()
}

fn field<T: FromStr>(
    row: &BTreeMap<String, String>,
    name: &str,
    path: &Path,
    i: usize,
) -> Result<T, TableReadError>
where
    T::Err: fmt::Display,
{
    row[name].parse().map_err(|e: T::Err| TableReadError {
        path: path.display().to_string(),
        row: i as u64 + 2,
        detail: format!("`{name}`: {e}"),
    })
}

/// Reads a `histogram.csv` (entity,k,count).
pub fn read_histogram_csv(path: &Path, text: &str) -> Result<RunHistogram, TableReadError> {
    let mut h = RunHistogram::default();
    for (i, row) in read_rows(path, text, &["entity", "k", "count"])?
        .iter()
        .enumerate()
    {
        h.add(
            &row["entity"],
            field(row, "k", path, i)?,
            field(row, "count", path, i)?,
        );
    }
    Ok(h)
}

/// Reads an `expected.csv`. `p` and `sd` are optional (default 0); cells of
/// one entity must list every `k` from 1 up.
pub fn read_expected_csv(path: &Path, text: &str) -> Result<ExpectationTable, TableReadError> {
    let rows = read_rows(path, text, &["entity", "k", "expected", "stderr"])?;
    let mut entities: BTreeMap<String, EntityExpectation> = BTreeMap::new();
    let mut k_max = 0;
    for (i, row) in rows.iter().enumerate() {
        let optional = |name: &str| -> Result<f64, TableReadError> {
            match row.get(name) {
                Some(v) if !v.is_empty() && v != NA => field(row, name, path, i),
                _ => Ok(0.0),
            }
        };
        let k: usize = field(row, "k", path, i)?;
        let e = entities
            .entry(row["entity"].clone())
            .or_insert_with(|| EntityExpectation {
                p: 0.0,
                seed: 0,
                trials: 0,
                n_slots: 0,
                cells: Vec::new(),
            });
        e.p = optional("p")?;
        if k != e.cells.len() + 1 {
            return Err(TableReadError {
                path: path.display().to_string(),
                row: i as u64 + 2,
                detail: format!("expected k = {}, found {k}", e.cells.len() + 1),
            });
        }
        e.cells.push(ExpectationCell {
            k,
            expected: field(row, "expected", path, i)?,
            stderr: field(row, "stderr", path, i)?,
            sd: optional("sd")?,
        });
        k_max = k_max.max(k);
    }
    Ok(ExpectationTable {
        n_slots: 0,
        k_max,
        trials: 0,
        seed: 0,
        entities,
    })
}
