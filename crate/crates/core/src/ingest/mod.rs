//! Streaming parsers producing sealed [`Dataset`]s.
//!
//! Both parsers read line by line into a reused buffer and append variants
//! to a [`MatrixBuilder`](crate::store::MatrixBuilder), so peak memory is the
//! packed matrix plus one input line.

mod impute2;
mod vcf;

use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, PushError};
use crate::meta::{parse_meta, MetaKind};

pub use impute2::parse_impute2;
pub use vcf::parse_vcf;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("meta table {0:?} is already attached")]
    DuplicateMeta(String),
    #[error("meta table {table:?} is a {found:?} table, cannot attach to the {expected:?} axis")]
    KindMismatch { table: String, expected: MetaKind, found: MetaKind },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl IngestError {
    pub(crate) fn record(line: usize, reason: impl Into<String>) -> Self {
        IngestError::MalformedRecord { line, reason: reason.into() }
    }

    pub(crate) fn from_push(line: usize, err: PushError) -> Self {
        match err {
            PushError::PositionDecreased { chrom, previous, position } => IngestError::record(
                line,
                format!("position {position} on {chrom} follows {previous}; input must be sorted"),
            ),
        }
    }

    /// Stable short name used in API error payloads.
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::MalformedHeader(_) => "MalformedHeader",
            IngestError::MalformedRecord { .. } => "MalformedRecord",
            IngestError::DimensionMismatch { .. } => "DimensionMismatch",
            IngestError::DuplicateMeta(_) => "DuplicateMeta",
            IngestError::KindMismatch { .. } => "KindMismatch",
            IngestError::Io(_) => "Io",
        }
    }
}

/// Data-quality counters returned next to every parsed dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ParseReport {
    /// Data records read (header lines excluded).
    pub records: u64,
    /// Records kept as single-base variants.
    pub retained: u64,
    /// Records dropped because REF/ALT are not single bases (INDELs, symbolic alleles, N).
    pub skipped_non_snv: u64,
    /// Both `|` and `/` genotype separators were seen; the dataset is unphased.
    pub mixed_phase: bool,
    /// Variant identifiers that were suffixed to keep them unique.
    pub renamed_ids: u64,
}

impl ParseReport {
    pub fn skipped(&self) -> u64 {
        self.records - self.retained
    }
}

#[derive(Debug, Clone)]
pub struct Parsed {
    pub dataset: Dataset,
    pub report: ParseReport,
}

impl Parsed {
    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            n_subjects: self.dataset.n_subjects(),
            n_variants: self.dataset.n_variants(),
            phased: self.dataset.phased(),
            mi_columns: self.dataset.mi_columns(),
            mi_rows: self.dataset.mi_rows(),
            parse_report: self.report.clone(),
        }
    }
}

/// Overview of a loaded dataset, as printed by `info` and returned by the
/// service.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DatasetSummary {
    pub n_subjects: usize,
    pub n_variants: usize,
    pub phased: bool,
    pub mi_columns: usize,
    pub mi_rows: usize,
    pub parse_report: ParseReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Vcf,
    Impute2,
}

impl InputFormat {
    /// Guess from a file extension: `.vcf` or `.haps`/`.hap`.
    pub fn detect(path: &Path) -> Option<InputFormat> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "vcf" => Some(InputFormat::Vcf),
            "haps" | "hap" => Some(InputFormat::Impute2),
            _ => None,
        }
    }
}

impl std::str::FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vcf" => Ok(InputFormat::Vcf),
            "impute2" => Ok(InputFormat::Impute2),
            _ => Err(format!("unknown input format {s:?}")),
        }
    }
}

/// Input files understood by [`load_dataset`].
#[derive(Debug, Clone)]
pub enum Source<'a> {
    Vcf(&'a Path),
    Impute2 { haps: &'a Path, samples: &'a Path },
}

/// Open files, parse, and attach meta tables named after their file stems.
pub fn load_dataset(
    source: Source<'_>,
    subject_meta: &[&Path],
    variant_meta: &[&Path],
) -> Result<Parsed, IngestError> {
    let mut parsed = match source {
        Source::Vcf(path) => parse_vcf(BufReader::new(File::open(path)?))?,
        Source::Impute2 { haps, samples } => {
            parse_impute2(BufReader::new(File::open(haps)?), BufReader::new(File::open(samples)?))?
        }
    };
    for (axis, paths) in [(MetaKind::Subject, subject_meta), (MetaKind::Variant, variant_meta)] {
        for path in paths {
            let table = parse_meta(BufReader::new(File::open(path)?), axis, &table_name(path))?;
            parsed.dataset.attach_meta(axis, table)?;
        }
    }
    Ok(parsed)
}

pub(crate) fn table_name(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "meta".into())
}

/// Line reader yielding `(line_number, bytes)` with the terminator
/// (`\n` or `\r\n`) stripped, reusing one buffer.
pub(crate) struct Lines<R> {
    reader: R,
    buf: Vec<u8>,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    pub(crate) fn new(reader: R) -> Self {
        Lines { reader, buf: Vec::with_capacity(1 << 12), line_no: 0 }
    }

    pub(crate) fn next_line(&mut self) -> io::Result<Option<(usize, &[u8])>> {
        self.buf.clear();
        if self.reader.read_until(b'\n', &mut self.buf)? == 0 {
            return Ok(None);
        }
        self.line_no += 1;
        let mut end = self.buf.len();
        if end > 0 && self.buf[end - 1] == b'\n' {
            end -= 1;
        }
        if end > 0 && self.buf[end - 1] == b'\r' {
            end -= 1;
        }
        Ok(Some((self.line_no, &self.buf[..end])))
    }
}

pub(crate) fn utf8(line: usize, bytes: &[u8]) -> Result<&str, IngestError> {
    std::str::from_utf8(bytes).map_err(|_| IngestError::record(line, "invalid UTF-8"))
}

pub(crate) fn parse_u64(line: usize, what: &str, bytes: &[u8]) -> Result<u64, IngestError> {
    if bytes.is_empty() || !bytes.iter().all(u8::is_ascii_digit) {
        return Err(IngestError::record(line, format!("{what} is not an unsigned integer")));
    }
    let mut value: u64 = 0;
    for &b in bytes {
        value = value
            .checked_mul(10)
            .and_then(|v| v.checked_add(u64::from(b - b'0')))
            .ok_or_else(|| IngestError::record(line, format!("{what} overflows")))?;
    }
    Ok(value)
}
