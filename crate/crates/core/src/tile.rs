//! Binary wire form of a view window.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "IPHT"
//!      4     1  version (1)
//!      5     1  flags: bit0 frequencies present, bit1 phased
//!      6     3  first row, u24 LE
//!      9     3  first column, u24 LE
//!     12     2  row count, u16 LE
//!     14     2  column count, u16 LE
//!     16   r*c  codes, row-major: 0=A 1=C 2=G 3=T 4=missing
//!      …   r*c  frequency bytes round(f*255), only with flag bit0
//! ```
//!
//! Columns are allele columns of the view regardless of render encoding.

use std::ops::Range;

use thiserror::Error;

use crate::transform::{View, ViewCell};
use crate::Dataset;

pub const MAGIC: [u8; 4] = *b"IPHT";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;
pub const MISSING_CODE: u8 = 4;
pub const FLAG_FREQS: u8 = 0b01;
pub const FLAG_PHASED: u8 = 0b10;
/// Largest first-row or first-column index a header can carry.
pub const MAX_START: u32 = (1 << 24) - 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TileError {
    #[error("tile shorter than its {HEADER_LEN}-byte header ({0} bytes)")]
    Truncated(usize),
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported tile version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown flag bits {0:#04x}")]
    UnknownFlags(u8),
    #[error("tile length {found} does not match header ({expected})")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid cell code {value} at index {index}")]
    InvalidCode { index: usize, value: u8 },
    #[error("window {0} is outside the view")]
    OutOfRange(String),
    #[error("window too large for one tile: {0}")]
    TooLarge(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tile {
    pub phased: bool,
    pub row_start: u32,
    pub col_start: u32,
    pub n_rows: u16,
    pub n_cols: u16,
    pub codes: Vec<u8>,
    pub freqs: Option<Vec<u8>>,
}

fn put_u24(out: &mut Vec<u8>, x: u32) {
    out.extend_from_slice(&x.to_le_bytes()[..3]);
}

fn get_u24(b: &[u8]) -> u32 {
    u32::from_le_bytes([b[0], b[1], b[2], 0])
}

impl Tile {
    pub fn n_cells(&self) -> usize {
        usize::from(self.n_rows) * usize::from(self.n_cols)
    }

    pub fn flags(&self) -> u8 {
        let mut flags = 0;
        if self.freqs.is_some() {
            flags |= FLAG_FREQS;
        }
        if self.phased {
            flags |= FLAG_PHASED;
        }
        flags
    }

    pub fn code(&self, row: usize, col: usize) -> u8 {
        self.codes[row * usize::from(self.n_cols) + col]
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.n_cells() * if self.freqs.is_some() { 2 } else { 1 }
    }

    pub fn encode(&self) -> Vec<u8> {
        assert!(self.row_start <= MAX_START && self.col_start <= MAX_START, "tile start exceeds 24 bits");
        assert_eq!(self.codes.len(), self.n_cells(), "code count must match dimensions");
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.flags());
        put_u24(&mut out, self.row_start);
        put_u24(&mut out, self.col_start);
        out.extend_from_slice(&self.n_rows.to_le_bytes());
        out.extend_from_slice(&self.n_cols.to_le_bytes());
        out.extend_from_slice(&self.codes);
        if let Some(freqs) = &self.freqs {
            assert_eq!(freqs.len(), self.n_cells(), "frequency count must match dimensions");
            out.extend_from_slice(freqs);
        }
        out
    }

    /// Parse and validate a tile. Never panics on arbitrary input.
    pub fn decode(bytes: &[u8]) -> Result<Tile, TileError> {
        if bytes.len() < HEADER_LEN {
            return Err(TileError::Truncated(bytes.len()));
        }
        if bytes[0..4] != MAGIC {
            return Err(TileError::BadMagic);
        }
        if bytes[4] != VERSION {
            return Err(TileError::UnsupportedVersion(bytes[4]));
        }
        let flags = bytes[5];
        if flags & !(FLAG_FREQS | FLAG_PHASED) != 0 {
            return Err(TileError::UnknownFlags(flags));
        }
        let n_rows = u16::from_le_bytes([bytes[12], bytes[13]]);
        let n_cols = u16::from_le_bytes([bytes[14], bytes[15]]);
        let cells = usize::from(n_rows) * usize::from(n_cols);
        let has_freqs = flags & FLAG_FREQS != 0;
        let expected = HEADER_LEN + cells * if has_freqs { 2 } else { 1 };
        if bytes.len() != expected {
            return Err(TileError::LengthMismatch { expected, found: bytes.len() });
        }
        let codes = bytes[HEADER_LEN..HEADER_LEN + cells].to_vec();
        if let Some(index) = codes.iter().position(|&c| c > MISSING_CODE) {
            return Err(TileError::InvalidCode { index, value: codes[index] });
        }
        Ok(Tile {
            phased: flags & FLAG_PHASED != 0,
            row_start: get_u24(&bytes[6..9]),
            col_start: get_u24(&bytes[9..12]),
            n_rows,
            n_cols,
            codes,
            freqs: has_freqs.then(|| bytes[HEADER_LEN + cells..].to_vec()),
        })
    }

    /// Cut the window `rows x cols` (allele columns) out of a view.
    /// Frequencies are included iff the view has aggregated rows; plain
    /// subject cells then carry 255, missing cells 0.
    pub fn from_view(dataset: &Dataset, view: &View, rows: Range<usize>, cols: Range<usize>) -> Result<Tile, TileError> {
        for (what, r, len) in [("rows", &rows, view.n_rows()), ("cols", &cols, view.n_cols())] {
            if r.start > r.end || r.end > len {
                return Err(TileError::OutOfRange(format!("{what} {}..{} of 0..{len}", r.start, r.end)));
            }
        }
        let n_rows = u16::try_from(rows.len()).map_err(|_| TileError::TooLarge(format!("{} rows", rows.len())))?;
        let n_cols = u16::try_from(cols.len()).map_err(|_| TileError::TooLarge(format!("{} cols", cols.len())))?;
        // An empty window may start at the end of the view.
        let start = |s: usize| u32::try_from(s).ok().filter(|&s| s <= MAX_START);
        let (row_start, col_start) = match (start(rows.start), start(cols.start)) {
            (Some(r), Some(c)) => (r, c),
            _ => return Err(TileError::TooLarge("window start exceeds 24 bits".into())),
        };

        let aggregated = view.is_aggregated();
        let cells = rows.len() * cols.len();
        let mut codes = Vec::with_capacity(cells);
        let mut freqs = Vec::with_capacity(if aggregated { cells } else { 0 });
        for r in rows {
            for c in cols.clone() {
                let (code, freq) = match view.cell(dataset, r, c) {
                    ViewCell::Allele(Some(b)) => (b.code(), 255),
                    ViewCell::Allele(None) => (MISSING_CODE, 0),
                    ViewCell::Aggregated(cell) => {
                        (cell.consensus.map_or(MISSING_CODE, |b| b.code()), cell.frequency_byte())
                    }
                };
                codes.push(code);
                if aggregated {
                    freqs.push(freq);
                }
            }
        }
        Ok(Tile {
            phased: dataset.phased(),
            row_start,
            col_start,
            n_rows,
            n_cols,
            codes,
            freqs: aggregated.then_some(freqs),
        })
    }
}
