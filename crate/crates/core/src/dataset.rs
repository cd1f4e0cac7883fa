//! Tabular datasets loaded from CSV.
//!
//! A [`Dataset`] is immutable once loaded. Every row carries a synthetic,
//! 0-based `id_` assigned in file order, and every column gets an inferred
//! [`ColumnType`].

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};
use thiserror::Error;

/// Largest accepted number of data rows.
pub const MAX_ROWS: usize = 100_000;
/// Largest accepted number of columns.
pub const MAX_COLUMNS: usize = 256;
/// Fraction of non-missing cells that must parse as numbers for a column to be numeric.
pub const NUMERIC_THRESHOLD: f64 = 0.95;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LoadError {
    #[error("file is empty or has no header row")]
    EmptyFile,
    #[error("duplicate column name {0:?}")]
    DuplicateHeader(String),
    #[error("column {0} has a blank name")]
    BlankHeader(usize),
    #[error("line {line} has {found} fields, expected {expected}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("input is not valid UTF-8 (byte offset {0})")]
    EncodingError(usize),
    #[error("dataset too large: {rows} rows x {columns} columns (limit {MAX_ROWS} x {MAX_COLUMNS})")]
    TooLarge { rows: usize, columns: usize },
    #[error("malformed CSV: {0}")]
    Malformed(String),
}

impl LoadError {
    /// Stable machine-readable code, used in API error bodies.
    pub fn code(&self) -> &'static str {
        match self {
            LoadError::EmptyFile => "empty_file",
            LoadError::DuplicateHeader(_) => "duplicate_header",
            LoadError::BlankHeader(_) => "blank_header",
            LoadError::RaggedRow { .. } => "ragged_row",
            LoadError::EncodingError(_) => "encoding_error",
            LoadError::TooLarge { .. } => "too_large",
            LoadError::Malformed(_) => "malformed_csv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ColumnType {
    Numeric,
    Text,
}

/// Interpretation of a single cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum Parsed {
    Number(f64),
    Text,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub raw: String,
    pub parsed: Parsed,
}

impl Cell {
    pub fn new(raw: impl Into<String>) -> Self {
        let raw = raw.into();
        let parsed = parse_cell(&raw);
        Cell { raw, parsed }
    }

    /// The cell's text with surrounding whitespace removed.
    pub fn text(&self) -> &str {
        self.raw.trim()
    }

    pub fn number(&self) -> Option<f64> {
        match self.parsed {
            Parsed::Number(n) => Some(n),
            _ => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self.parsed, Parsed::Missing)
    }
}

/// Parses a finite decimal number. Accepts an optional sign, digits with an
/// optional fractional part, and an optional exponent. Rejects `inf`, `nan`,
/// hex and thousands separators.
pub fn parse_decimal(s: &str) -> Option<f64> {
    let s = s.trim();
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], Some(&body[i + 1..])),
        None => (body, None),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().all(|b| b.is_ascii_digit()) || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if let Some(exp) = exponent {
        let digits = exp.strip_prefix(['+', '-']).unwrap_or(exp);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_cell(raw: &str) -> Parsed {
    if raw.trim().is_empty() {
        Parsed::Missing
    } else if let Some(n) = parse_decimal(raw) {
        Parsed::Number(n)
    } else {
        Parsed::Text
    }
}

/// Synthetic row key.
pub type RowId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub id_: RowId,
    pub cells: Vec<Cell>,
}

/// Hex-encoded SHA-256 content digest.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Digest(String);

impl Digest {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub(crate) fn from_hasher(hasher: Sha256) -> Self {
        Digest(hex::encode(hasher.finalize()))
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "DatasetRepr", into = "DatasetRepr")]
pub struct Dataset {
    name: String,
    headers: Vec<String>,
    rows: Vec<Row>,
    column_types: Vec<ColumnType>,
    index: HashMap<String, usize>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.headers == other.headers
            && self.rows == other.rows
            && self.column_types == other.column_types
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetRepr {
    name: String,
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl From<DatasetRepr> for Dataset {
    fn from(repr: DatasetRepr) -> Self {
        let rows = repr
            .rows
            .into_iter()
            .enumerate()
            .map(|(id_, cells)| Row {
                id_,
                cells: cells.into_iter().map(Cell::new).collect(),
            })
            .collect();
        Dataset::assemble(repr.name, repr.headers, rows)
    }
}

impl From<Dataset> for DatasetRepr {
    fn from(d: Dataset) -> Self {
        DatasetRepr {
            name: d.name,
            headers: d.headers,
            rows: d
                .rows
                .into_iter()
                .map(|r| r.cells.into_iter().map(|c| c.raw).collect())
                .collect(),
        }
    }
}

impl Dataset {
    /// Builds a dataset from already-validated parts and infers column types.
    fn assemble(name: String, headers: Vec<String>, rows: Vec<Row>) -> Self {
        let column_types = (0..headers.len()).map(|c| infer_type(&rows, c)).collect();
        let index = headers.iter().enumerate().map(|(i, h)| (h.clone(), i)).collect();
        Dataset {
            name,
            headers,
            rows,
            column_types,
            index,
        }
    }

    /// Builds a dataset from in-memory records, applying the same validation
    /// as [`load_csv`].
    pub fn from_records<H, R, C>(name: &str, headers: H, records: R) -> Result<Self, LoadError>
    where
        H: IntoIterator,
        H::Item: Into<String>,
        R: IntoIterator,
        R::Item: IntoIterator<Item = C>,
        C: Into<String>,
    {
        let headers = validate_headers(headers.into_iter().map(Into::into).collect())?;
        let mut rows = Vec::new();
        for (i, record) in records.into_iter().enumerate() {
            let cells: Vec<Cell> = record.into_iter().map(|c| Cell::new(c)).collect();
            if cells.len() != headers.len() {
                return Err(LoadError::RaggedRow {
                    line: i as u64 + 2,
                    expected: headers.len(),
                    found: cells.len(),
                });
            }
            rows.push(Row { id_: i, cells });
        }
        check_size(rows.len(), headers.len())?;
        Ok(Dataset::assemble(name.to_string(), headers, rows))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn headers(&self) -> &[String] {
        &self.headers
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, column: &str) -> Option<usize> {
        self.index.get(column).copied()
    }

    pub fn has_column(&self, column: &str) -> bool {
        self.index.contains_key(column)
    }

    pub fn column_type(&self, column: &str) -> Option<ColumnType> {
        self.column_index(column).map(|i| self.column_types[i])
    }

    /// Column types keyed by name, in header order.
    pub fn column_types(&self) -> impl Iterator<Item = (&str, ColumnType)> {
        self.headers
            .iter()
            .map(String::as_str)
            .zip(self.column_types.iter().copied())
    }

    pub fn row(&self, id: RowId) -> Option<&Row> {
        self.rows.get(id)
    }

    /// The first `n` rows in file order.
    pub fn sample_rows(&self, n: usize) -> &[Row] {
        &self.rows[..n.min(self.rows.len())]
    }

    /// Stable content hash over headers and raw cells. The dataset name is
    /// not part of the digest.
    pub fn fingerprint(&self) -> Digest {
        let mut hasher = Sha256::new();
        hasher.update(b"provoscope-dataset\0");
        hasher.update((self.headers.len() as u64).to_le_bytes());
        for h in &self.headers {
            hasher.update((h.len() as u64).to_le_bytes());
            hasher.update(h.as_bytes());
        }
        hasher.update((self.rows.len() as u64).to_le_bytes());
        for row in &self.rows {
            for cell in &row.cells {
                hasher.update((cell.raw.len() as u64).to_le_bytes());
                hasher.update(cell.raw.as_bytes());
            }
        }
        Digest::from_hasher(hasher)
    }

    /// Serializes the dataset back to RFC 4180 CSV (LF line endings).
    pub fn to_csv(&self) -> Vec<u8> {
        let mut writer = csv::WriterBuilder::new().from_writer(Vec::new());
        writer.write_record(&self.headers).expect("write to Vec");
        for row in &self.rows {
            writer
                .write_record(row.cells.iter().map(|c| c.raw.as_str()))
                .expect("write to Vec");
        }
        writer.into_inner().expect("flush to Vec")
    }
}

/// See [`Dataset::sample_rows`].
pub fn sample_rows(d: &Dataset, n: usize) -> &[Row] {
    d.sample_rows(n)
}

/// See [`Dataset::fingerprint`].
pub fn fingerprint(d: &Dataset) -> Digest {
    d.fingerprint()
}

fn infer_type(rows: &[Row], column: usize) -> ColumnType {
    let (mut present, mut numeric) = (0usize, 0usize);
    for row in rows {
        match row.cells[column].parsed {
            Parsed::Missing => {}
            Parsed::Number(_) => {
                present += 1;
                numeric += 1;
            }
            Parsed::Text => present += 1,
        }
    }
    // An all-missing column has nothing to compute statistics over.
    if present > 0 && numeric as f64 >= NUMERIC_THRESHOLD * present as f64 {
        ColumnType::Numeric
    } else {
        ColumnType::Text
    }
}

fn validate_headers(raw: Vec<String>) -> Result<Vec<String>, LoadError> {
    if raw.is_empty() {
        return Err(LoadError::EmptyFile);
    }
    let mut seen = HashMap::with_capacity(raw.len());
    let mut headers = Vec::with_capacity(raw.len());
    for (i, h) in raw.into_iter().enumerate() {
        let h = h.trim().to_string();
        if h.is_empty() {
            return Err(LoadError::BlankHeader(i));
        }
        if seen.insert(h.clone(), i).is_some() {
            return Err(LoadError::DuplicateHeader(h));
        }
        headers.push(h);
    }
    Ok(headers)
}

fn check_size(rows: usize, columns: usize) -> Result<(), LoadError> {
    if rows > MAX_ROWS || columns > MAX_COLUMNS {
        Err(LoadError::TooLarge { rows, columns })
    } else {
        Ok(())
    }
}

/// Loads a CSV file. The first record is the header; a UTF-8 byte-order
/// mark is tolerated. Ragged rows are rejected, not padded.
pub fn load_csv(bytes: &[u8], name: &str) -> Result<Dataset, LoadError> {
    let bytes = bytes.strip_prefix(b"\xEF\xBB\xBF").unwrap_or(bytes);
    let text = std::str::from_utf8(bytes).map_err(|e| LoadError::EncodingError(e.valid_up_to()))?;
    if text.trim().is_empty() {
        return Err(LoadError::EmptyFile);
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| LoadError::Malformed(e.to_string()))?,
        None => return Err(LoadError::EmptyFile),
    };
    let headers = validate_headers(header.iter().map(str::to_string).collect())?;
    if headers.len() > MAX_COLUMNS {
        return Err(LoadError::TooLarge {
            rows: 0,
            columns: headers.len(),
        });
    }

    let mut rows = Vec::new();
    for record in records {
        let record = record.map_err(|e| LoadError::Malformed(e.to_string()))?;
        if record.len() != headers.len() {
            let line = record.position().map_or(0, |p| p.line());
            return Err(LoadError::RaggedRow {
                line,
                expected: headers.len(),
                found: record.len(),
            });
        }
        if rows.len() == MAX_ROWS {
            return Err(LoadError::TooLarge {
                rows: MAX_ROWS + 1,
                columns: headers.len(),
            });
        }
        let id_ = rows.len();
        rows.push(Row {
            id_,
            cells: record.iter().map(Cell::new).collect(),
        });
    }

    Ok(Dataset::assemble(name.to_string(), headers, rows))
}
