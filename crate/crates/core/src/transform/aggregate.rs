//! Consensus bases and meta-value aggregation for subject groups.

use serde::Serialize;

use crate::meta::{MetaColumn, MetaType, MetaValue};
use crate::store::{Base, PackedHaplotypeMatrix, Slot};
use crate::transform::{AlleleMethod, MetaMethod};

/// Consensus base of a group at one allele column, with the exact counts
/// behind its frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AggregatedCell {
    pub consensus: Option<Base>,
    /// Occurrences of the consensus base among non-missing member alleles.
    pub count: u32,
    /// Non-missing member alleles.
    pub total: u32,
}

impl AggregatedCell {
    pub const MISSING: AggregatedCell = AggregatedCell { consensus: None, count: 0, total: 0 };

    pub fn frequency(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            f64::from(self.count) / f64::from(self.total)
        }
    }

    /// `round(frequency * scale)` with ties rounded up, in exact integer
    /// arithmetic.
    pub fn scaled(&self, scale: u32) -> u32 {
        if self.total == 0 {
            return 0;
        }
        let (c, t, s) = (u64::from(self.count), u64::from(self.total), u64::from(scale));
        ((2 * c * s + t) / (2 * t)) as u32
    }

    /// Frequency quantized to one byte.
    pub fn frequency_byte(&self) -> u8 {
        self.scaled(255) as u8
    }

    /// Pick the consensus from per-base counts. Ties go to the earlier base
    /// in A < C < G < T order; MINIMUM only considers bases that occur.
    pub fn from_counts(counts: [u32; 4], method: AlleleMethod) -> AggregatedCell {
        let total: u32 = counts.iter().sum();
        if total == 0 {
            return AggregatedCell::MISSING;
        }
        let mut best: Option<(Base, u32)> = None;
        for base in Base::ALL {
            let n = counts[base.code() as usize];
            if n == 0 {
                continue;
            }
            let better = match (best, method) {
                (None, _) => true,
                (Some((_, b)), AlleleMethod::Maximum) => n > b,
                (Some((_, b)), AlleleMethod::Minimum) => n < b,
            };
            if better {
                best = Some((base, n));
            }
        }
        let (base, count) = best.expect("total > 0 implies a present base");
        AggregatedCell { consensus: Some(base), count, total }
    }
}

pub(crate) fn base_counts(matrix: &PackedHaplotypeMatrix, members: &[u32], variant: usize, slot: Slot) -> [u32; 4] {
    let mut counts = [0u32; 4];
    for &s in members {
        if let Some(b) = matrix.allele_at(s as usize, variant, slot) {
            counts[b.code() as usize] += 1;
        }
    }
    counts
}

pub(crate) fn consensus(
    matrix: &PackedHaplotypeMatrix,
    members: &[u32],
    variant: usize,
    slot: Slot,
    method: AlleleMethod,
) -> AggregatedCell {
    AggregatedCell::from_counts(base_counts(matrix, members, variant, slot), method)
}

/// Collapse member values of one meta column. Absent values are ignored;
/// categorical columns always use the mode, ties going to the
/// lexicographically smallest label.
pub(crate) fn aggregate_meta(
    column: &MetaColumn,
    values: impl Iterator<Item = MetaValue>,
    method: MetaMethod,
) -> MetaValue {
    match column.ty {
        MetaType::Categorical => {
            let mut counts = vec![0u32; column.categories.len()];
            for v in values {
                if let MetaValue::Category(i) = v {
                    counts[i as usize] += 1;
                }
            }
            let ranks = column.category_ranks();
            (0..counts.len())
                .filter(|&i| counts[i] > 0)
                .max_by(|&a, &b| counts[a].cmp(&counts[b]).then(ranks[b].cmp(&ranks[a])))
                .map_or(MetaValue::Absent, |i| MetaValue::Category(i as u32))
        }
        MetaType::Numerical => {
            let mut xs: Vec<f64> = values
                .filter_map(|v| match v {
                    MetaValue::Number(x) => Some(x),
                    _ => None,
                })
                .collect();
            if xs.is_empty() {
                return MetaValue::Absent;
            }
            xs.sort_by(f64::total_cmp);
            let x = match method {
                MetaMethod::Min => xs[0],
                MetaMethod::Max => xs[xs.len() - 1],
                MetaMethod::Mean => xs.iter().sum::<f64>() / xs.len() as f64,
                MetaMethod::Mode => {
                    // Sorted input: longest run wins, earliest (smallest) on ties.
                    let (mut best, mut best_len) = (xs[0], 0usize);
                    let mut i = 0;
                    while i < xs.len() {
                        let j = xs[i..].iter().take_while(|&&y| y == xs[i]).count();
                        if j > best_len {
                            best = xs[i];
                            best_len = j;
                        }
                        i += j;
                    }
                    best
                }
            };
            MetaValue::Number(x)
        }
    }
}
