//! Bit-packed storage of diploid allele calls.
//!
//! Every allele is a 2-bit code (`A=0`, `C=1`, `G=2`, `T=3`), so one genotype
//! (paternal + maternal) occupies a nibble and a byte holds two genotypes.
//! The sealed plane is row-major by subject: cell `(s, v)` lives at linear
//! index `s * n_variants + v`, even cells in the low nibble. Within a nibble
//! the paternal code sits in bits 2..4 and the maternal code in bits 0..2.
//!
//! Missing alleles are not representable in two bits. They are tracked in a
//! separate bitset (one bit per allele, `2 * cell + slot`) that is allocated
//! only when the input contains at least one absent allele.
//!
//! Matrices are built append-by-variant through [`MatrixBuilder`], which
//! buffers variant-major nibbles in fixed-size blocks and transposes them
//! block by block into the row-major plane on [`MatrixBuilder::seal`], so the
//! peak footprint stays close to one packed plane.

use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("invalid base {0:?}: expected one of A, C, G, T")]
    InvalidBase(char),
    #[error("index out of bounds: {what}")]
    OutOfBounds { what: String },
    #[error("dimension mismatch: expected {expected} genotypes per variant, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// One of the four nucleotides. The discriminant is the 2-bit allele code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Base {
    A = 0,
    C = 1,
    G = 2,
    T = 3,
}

impl Base {
    /// All bases in code order, which is also the tie-break order.
    pub const ALL: [Base; 4] = [Base::A, Base::C, Base::G, Base::T];

    #[inline]
    pub fn code(self) -> u8 {
        self as u8
    }

    #[inline]
    pub fn from_code(code: u8) -> Option<Base> {
        match code {
            0 => Some(Base::A),
            1 => Some(Base::C),
            2 => Some(Base::G),
            3 => Some(Base::T),
            _ => None,
        }
    }

    /// Case-insensitive ASCII decode.
    #[inline]
    pub fn from_ascii(byte: u8) -> Option<Base> {
        match byte {
            b'A' | b'a' => Some(Base::A),
            b'C' | b'c' => Some(Base::C),
            b'G' | b'g' => Some(Base::G),
            b'T' | b't' => Some(Base::T),
            _ => None,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Base::A => 'A',
            Base::C => 'C',
            Base::G => 'G',
            Base::T => 'T',
        }
    }
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Map a nucleotide character to its allele code.
pub fn pack_allele(base: char) -> Result<Base, StoreError> {
    if base.is_ascii() {
        if let Some(b) = Base::from_ascii(base as u8) {
            return Ok(b);
        }
    }
    Err(StoreError::InvalidBase(base))
}

/// Which chromosome copy an allele belongs to. For unphased data this is
/// storage order only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    Paternal,
    Maternal,
}

impl Slot {
    pub const BOTH: [Slot; 2] = [Slot::Paternal, Slot::Maternal];

    #[inline]
    fn bit(self) -> usize {
        match self {
            Slot::Paternal => 0,
            Slot::Maternal => 1,
        }
    }
}

/// A diploid call. `None` marks an absent allele (e.g. the second copy of a
/// hemizygous X-chromosome site).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Genotype {
    pub paternal: Option<Base>,
    pub maternal: Option<Base>,
}

impl Genotype {
    pub const MISSING: Genotype = Genotype { paternal: None, maternal: None };

    pub fn new(paternal: Option<Base>, maternal: Option<Base>) -> Self {
        Genotype { paternal, maternal }
    }

    pub fn called(paternal: Base, maternal: Base) -> Self {
        Genotype { paternal: Some(paternal), maternal: Some(maternal) }
    }

    #[inline]
    pub fn allele(&self, slot: Slot) -> Option<Base> {
        match slot {
            Slot::Paternal => self.paternal,
            Slot::Maternal => self.maternal,
        }
    }

    #[inline]
    fn nibble(&self) -> u8 {
        let p = self.paternal.map_or(0, Base::code);
        let m = self.maternal.map_or(0, Base::code);
        (p << 2) | m
    }

    #[inline]
    fn has_missing(&self) -> bool {
        self.paternal.is_none() || self.maternal.is_none()
    }
}

const BLOCK_BYTES: usize = 1 << 20;

/// Growable byte storage split into fixed-size blocks, so appending never
/// reallocates (and never transiently doubles) what is already stored.
#[derive(Debug, Default)]
struct BlockBuf {
    blocks: Vec<Box<[u8]>>,
}

impl BlockBuf {
    #[inline]
    fn ensure(&mut self, byte: usize) {
        while self.blocks.len() * BLOCK_BYTES <= byte {
            self.blocks.push(vec![0u8; BLOCK_BYTES].into_boxed_slice());
        }
    }

    #[inline]
    fn or_byte(&mut self, byte: usize, value: u8) {
        self.ensure(byte);
        self.blocks[byte / BLOCK_BYTES][byte % BLOCK_BYTES] |= value;
    }
}

/// Append-by-variant builder. Each pushed variant carries one genotype per
/// subject; the result is immutable once sealed.
#[derive(Debug)]
pub struct MatrixBuilder {
    n_subjects: usize,
    n_variants: usize,
    codes: BlockBuf,
    missing: Option<BlockBuf>,
}

impl MatrixBuilder {
    pub fn new(n_subjects: usize) -> Self {
        MatrixBuilder { n_subjects, n_variants: 0, codes: BlockBuf::default(), missing: None }
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn n_variants(&self) -> usize {
        self.n_variants
    }

    pub fn push_variant(&mut self, genotypes: &[Genotype]) -> Result<(), StoreError> {
        if genotypes.len() != self.n_subjects {
            return Err(StoreError::DimensionMismatch {
                expected: self.n_subjects,
                found: genotypes.len(),
            });
        }
        let base = self.n_variants * self.n_subjects;
        for (s, g) in genotypes.iter().enumerate() {
            let cell = base + s;
            let nibble = g.nibble();
            if nibble != 0 {
                self.codes.or_byte(cell / 2, nibble << ((cell & 1) * 4));
            }
            if g.has_missing() {
                let missing = self.missing.get_or_insert_with(BlockBuf::default);
                for slot in Slot::BOTH {
                    if g.allele(slot).is_none() {
                        let bit = 2 * cell + slot.bit();
                        missing.or_byte(bit / 8, 1 << (bit % 8));
                    }
                }
            }
        }
        self.n_variants += 1;
        Ok(())
    }

    /// Transpose the variant-major buffer into the row-major plane, releasing
    /// each builder block as soon as it has been consumed.
    pub fn seal(self, phased: bool) -> PackedHaplotypeMatrix {
        let MatrixBuilder { n_subjects, n_variants, codes, missing } = self;
        let n_cells = n_subjects * n_variants;

        let mut plane = vec![0u8; n_cells.div_ceil(2)].into_boxed_slice();
        let mut src_cell = 0usize;
        for block in codes.blocks {
            let first = src_cell;
            let last = (first + BLOCK_BYTES * 2).min(n_cells);
            for cell in first..last {
                let local = cell - first;
                let nibble = (block[local / 2] >> ((cell & 1) * 4)) & 0x0f;
                if nibble != 0 {
                    let v = cell / n_subjects;
                    let s = cell % n_subjects;
                    let dst = s * n_variants + v;
                    plane[dst / 2] |= nibble << ((dst & 1) * 4);
                }
            }
            src_cell = last;
        }

        let missing = missing.map(|buf| {
            let n_bits = 2 * n_cells;
            let mut bits = vec![0u8; n_bits.div_ceil(8)].into_boxed_slice();
            let mut src_bit = 0usize;
            for block in buf.blocks {
                let first = src_bit;
                let last = (first + BLOCK_BYTES * 8).min(n_bits);
                for bit in first..last {
                    let local = bit - first;
                    if block[local / 8] & (1 << (bit % 8)) != 0 {
                        let cell = bit / 2;
                        let v = cell / n_subjects;
                        let s = cell % n_subjects;
                        let dst = 2 * (s * n_variants + v) + (bit & 1);
                        bits[dst / 8] |= 1 << (dst % 8);
                    }
                }
                src_bit = last;
            }
            bits
        });

        PackedHaplotypeMatrix { n_subjects, n_variants, phased, plane, missing }
    }
}

/// Sealed, immutable genotype matrix (subjects x variants).
#[derive(Clone, PartialEq, Eq)]
pub struct PackedHaplotypeMatrix {
    n_subjects: usize,
    n_variants: usize,
    phased: bool,
    plane: Box<[u8]>,
    missing: Option<Box<[u8]>>,
}

impl fmt::Debug for PackedHaplotypeMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PackedHaplotypeMatrix")
            .field("n_subjects", &self.n_subjects)
            .field("n_variants", &self.n_variants)
            .field("phased", &self.phased)
            .field("plane_bytes", &self.plane.len())
            .field("missing_bytes", &self.missing.as_ref().map(|m| m.len()))
            .finish()
    }
}

impl PackedHaplotypeMatrix {
    /// Build a matrix from a cell function; mostly useful for tests and
    /// synthetic data.
    pub fn from_fn(
        n_subjects: usize,
        n_variants: usize,
        phased: bool,
        mut cell: impl FnMut(usize, usize) -> Genotype,
    ) -> Self {
        let mut builder = MatrixBuilder::new(n_subjects);
        let mut column = Vec::with_capacity(n_subjects);
        for v in 0..n_variants {
            column.clear();
            column.extend((0..n_subjects).map(|s| cell(s, v)));
            builder.push_variant(&column).expect("column length matches subject count");
        }
        builder.seal(phased)
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn n_variants(&self) -> usize {
        self.n_variants
    }

    pub fn phased(&self) -> bool {
        self.phased
    }

    pub fn has_missing(&self) -> bool {
        self.missing.is_some()
    }

    /// Bytes of the 2-bit code plane: `ceil(n_subjects * n_variants / 2)`.
    pub fn plane_bytes(&self) -> usize {
        self.plane.len()
    }

    /// Plane bytes plus the missing-allele bitset when one was allocated.
    pub fn memory_footprint(&self) -> usize {
        self.plane.len() + self.missing.as_ref().map_or(0, |m| m.len())
    }

    /// Decode one allele without bounds reporting. Panics on out-of-range
    /// indices; callers inside the crate validate ranges up front.
    #[inline]
    pub(crate) fn allele_at(&self, subject: usize, variant: usize, slot: Slot) -> Option<Base> {
        debug_assert!(subject < self.n_subjects && variant < self.n_variants);
        let cell = subject * self.n_variants + variant;
        if let Some(missing) = &self.missing {
            let bit = 2 * cell + slot.bit();
            if missing[bit / 8] & (1 << (bit % 8)) != 0 {
                return None;
            }
        }
        let nibble = (self.plane[cell / 2] >> ((cell & 1) * 4)) & 0x0f;
        let code = match slot {
            Slot::Paternal => nibble >> 2,
            Slot::Maternal => nibble & 0b11,
        };
        Base::from_code(code)
    }

    #[inline]
    pub(crate) fn genotype_at(&self, subject: usize, variant: usize) -> Genotype {
        Genotype {
            paternal: self.allele_at(subject, variant, Slot::Paternal),
            maternal: self.allele_at(subject, variant, Slot::Maternal),
        }
    }

    pub fn get_genotype(&self, subject: usize, variant: usize) -> Result<Genotype, StoreError> {
        if subject >= self.n_subjects || variant >= self.n_variants {
            return Err(StoreError::OutOfBounds {
                what: format!(
                    "cell ({subject}, {variant}) in a {}x{} matrix",
                    self.n_subjects, self.n_variants
                ),
            });
        }
        Ok(self.genotype_at(subject, variant))
    }

    /// Decode the rectangle `rows x cols` into a dense grid.
    pub fn window(&self, rows: Range<usize>, cols: Range<usize>) -> Result<GenotypeGrid, StoreError> {
        check_range("rows", &rows, self.n_subjects)?;
        check_range("cols", &cols, self.n_variants)?;
        let n_rows = rows.len();
        let n_cols = cols.len();
        let mut cells = Vec::with_capacity(n_rows * n_cols);
        for s in rows {
            for v in cols.clone() {
                cells.push(self.genotype_at(s, v));
            }
        }
        Ok(GenotypeGrid { n_rows, n_cols, cells })
    }
}

fn check_range(what: &str, range: &Range<usize>, len: usize) -> Result<(), StoreError> {
    if range.start > range.end || range.end > len {
        return Err(StoreError::OutOfBounds {
            what: format!("{what} {}..{} outside 0..{len}", range.start, range.end),
        });
    }
    Ok(())
}

/// Dense, row-major genotype rectangle produced by [`PackedHaplotypeMatrix::window`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenotypeGrid {
    pub n_rows: usize,
    pub n_cols: usize,
    pub cells: Vec<Genotype>,
}

impl GenotypeGrid {
    pub fn get(&self, row: usize, col: usize) -> Genotype {
        self.cells[row * self.n_cols + col]
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}
