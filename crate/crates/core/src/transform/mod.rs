//! Pure, replayable view transforms over a sealed [`Dataset`].
//!
//! A [`View`] is the derived state: an ordered list of rows (subjects or
//! aggregated groups), an ordered list of allele columns, and a selection.
//! Each variant contributes two allele columns (paternal, maternal); filters
//! keep or drop both together. Steps never touch the dataset itself.

mod aggregate;
mod step;

use std::collections::{BTreeSet, HashMap, HashSet};

use regex::Regex;
use serde::Serialize;
use thiserror::Error;

use crate::dataset::{Dataset, MetaRef};
use crate::meta::{MetaKind, MetaValue};
use crate::store::{Base, Slot};

pub use aggregate::AggregatedCell;
pub use step::{AlleleMethod, ChainError, FrequencyMode, Grouping, LogEntry, MetaMethod, Step, ViewChain};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("invalid range: start {start} > end {end}")]
    InvalidRange { start: u64, end: u64 },
    #[error("invalid pattern: {0}")]
    InvalidPattern(String),
    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("variant {0:?} has no known reference base")]
    UnknownReference(String),
    #[error("unknown meta-information {0:?}")]
    UnknownMeta(String),
    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),
    #[error("invalid selection: {0}")]
    InvalidSelection(String),
}

impl TransformError {
    pub fn kind(&self) -> &'static str {
        match self {
            TransformError::InvalidRange { .. } => "InvalidRange",
            TransformError::InvalidPattern(_) => "InvalidPattern",
            TransformError::InvalidThreshold(_) => "InvalidThreshold",
            TransformError::UnknownReference(_) => "UnknownReference",
            TransformError::UnknownMeta(_) => "UnknownMeta",
            TransformError::InvalidGrouping(_) => "InvalidGrouping",
            TransformError::InvalidSelection(_) => "InvalidSelection",
        }
    }
}

/// A display row: one subject, or an aggregated group (index into
/// [`View::groups`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViewRow {
    Subject(u32),
    Group(u32),
}

/// One allele column of the view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ViewCol {
    pub variant: u32,
    pub slot: Slot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedRow {
    /// `AGN<k>` with `k` the member count.
    pub label: String,
    /// Member subject indices, ascending.
    pub members: Vec<u32>,
    pub method: AlleleMethod,
    /// Aggregated subject meta values, indexed `[table][column]`.
    pub meta: Vec<Vec<MetaValue>>,
}

/// Content of one view cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViewCell {
    Allele(Option<Base>),
    Aggregated(AggregatedCell),
}

/// Side information produced by a step.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StepReport {
    /// For `filter_ids`: requested IDs not present in the view.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unknown_ids: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Selection {
    rows: BTreeSet<ViewRow>,
    cols: BTreeSet<ViewCol>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct View {
    rows: Vec<ViewRow>,
    cols: Vec<ViewCol>,
    groups: Vec<AggregatedRow>,
    selection: Selection,
}

enum SortKey {
    Meta(MetaValue),
    Position(u32, u64),
}

impl View {
    /// Identity view: all subjects in input order, all allele columns.
    pub fn new(dataset: &Dataset) -> Self {
        let rows = (0..dataset.n_subjects() as u32).map(ViewRow::Subject).collect();
        let cols = (0..dataset.n_variants() as u32)
            .flat_map(|variant| Slot::BOTH.map(|slot| ViewCol { variant, slot }))
            .collect();
        View { rows, cols, groups: Vec::new(), selection: Selection::default() }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn rows(&self) -> &[ViewRow] {
        &self.rows
    }

    pub fn cols(&self) -> &[ViewCol] {
        &self.cols
    }

    pub fn group(&self, g: u32) -> &AggregatedRow {
        &self.groups[g as usize]
    }

    pub fn is_aggregated(&self) -> bool {
        self.rows.iter().any(|r| matches!(r, ViewRow::Group(_)))
    }

    pub fn row_label<'a>(&'a self, dataset: &'a Dataset, row: usize) -> &'a str {
        match self.rows[row] {
            ViewRow::Subject(s) => dataset.subjects.id(s as usize),
            ViewRow::Group(g) => &self.groups[g as usize].label,
        }
    }

    /// Distinct variants in column order.
    pub fn variants(&self) -> Vec<u32> {
        let mut seen = HashSet::new();
        self.cols.iter().filter(|c| seen.insert(c.variant)).map(|c| c.variant).collect()
    }

    pub fn n_variants(&self) -> usize {
        self.variants().len()
    }

    /// Subjects covered by the view's rows (group members included), ascending.
    pub fn subjects(&self) -> Vec<u32> {
        let mut out: Vec<u32> = self.rows.iter().flat_map(|r| self.row_members(*r)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn row_members(&self, row: ViewRow) -> Vec<u32> {
        match row {
            ViewRow::Subject(s) => vec![s],
            ViewRow::Group(g) => self.groups[g as usize].members.clone(),
        }
    }

    pub fn allele_cell(&self, dataset: &Dataset, row: usize, variant: u32, slot: Slot) -> ViewCell {
        match self.rows[row] {
            ViewRow::Subject(s) => ViewCell::Allele(dataset.matrix.allele_at(s as usize, variant as usize, slot)),
            ViewRow::Group(g) => {
                let group = &self.groups[g as usize];
                ViewCell::Aggregated(aggregate::consensus(
                    &dataset.matrix,
                    &group.members,
                    variant as usize,
                    slot,
                    group.method,
                ))
            }
        }
    }

    pub fn cell(&self, dataset: &Dataset, row: usize, col: usize) -> ViewCell {
        let c = self.cols[col];
        self.allele_cell(dataset, row, c.variant, c.slot)
    }

    pub fn subject_meta_value(&self, dataset: &Dataset, row: usize, table: usize, column: usize) -> MetaValue {
        match self.rows[row] {
            ViewRow::Subject(s) => dataset.subject_meta[table].value(column, s as usize),
            ViewRow::Group(g) => self.groups[g as usize].meta[table][column],
        }
    }

    pub fn selected_rows(&self) -> Vec<usize> {
        (0..self.rows.len()).filter(|&r| self.selection.rows.contains(&self.rows[r])).collect()
    }

    pub fn selected_cols(&self) -> Vec<usize> {
        (0..self.cols.len()).filter(|&c| self.selection.cols.contains(&self.cols[c])).collect()
    }

    /// Apply one step. On error the view is unchanged.
    pub fn apply(&mut self, dataset: &Dataset, step: &Step) -> Result<StepReport, TransformError> {
        let mut report = StepReport::default();
        match step {
            Step::FilterRegion { chrom, start, end } => {
                if start > end {
                    return Err(TransformError::InvalidRange { start: *start, end: *end });
                }
                let vt = &dataset.variants;
                self.retain_variants(|v| {
                    let v = v as usize;
                    vt.chrom(v) == chrom && (*start..=*end).contains(&vt.position(v))
                });
            }
            Step::FilterIds { ids } => {
                let wanted: HashSet<&str> = ids.iter().map(String::as_str).collect();
                let mut found = HashSet::new();
                self.retain_variants(|v| {
                    let id = dataset.variants.id(v as usize);
                    let keep = wanted.contains(id);
                    if keep {
                        found.insert(id);
                    }
                    keep
                });
                report.unknown_ids = Some(wanted.len() - found.len());
            }
            Step::FilterRegex { pattern } => {
                let re = Regex::new(&format!("^(?:{pattern})$"))
                    .map_err(|e| TransformError::InvalidPattern(e.to_string()))?;
                self.retain_variants(|v| re.is_match(dataset.variants.id(v as usize)));
            }
            Step::FilterFrequency { threshold, mode } => {
                let t = *threshold;
                if !(0.0..=1.0).contains(&t) {
                    return Err(TransformError::InvalidThreshold(t));
                }
                let keep = self.frequency_keep(dataset, t, *mode)?;
                self.retain_variants(|v| keep.contains(&v));
            }
            Step::SortRows { column } => {
                let MetaRef::User { table, column: c } = dataset
                    .resolve_meta(MetaKind::Subject, column)
                    .ok_or_else(|| TransformError::UnknownMeta(column.clone()))?
                else {
                    unreachable!("subject axis has no built-in rows")
                };
                let ranks = dataset.meta_column(MetaKind::Subject, table, c).category_ranks();
                let mut keyed: Vec<(MetaValue, ViewRow)> = (0..self.rows.len())
                    .map(|r| (self.subject_meta_value(dataset, r, table, c), self.rows[r]))
                    .collect();
                keyed.sort_by(|a, b| compare_meta(a.0, b.0, &ranks));
                self.rows = keyed.into_iter().map(|(_, r)| r).collect();
            }
            Step::SortCols { row } => {
                let meta = dataset
                    .resolve_meta(MetaKind::Variant, row)
                    .ok_or_else(|| TransformError::UnknownMeta(row.clone()))?;
                self.sort_columns(dataset, meta);
            }
            Step::AggregateRows { grouping, allele_method, meta_method } => {
                self.aggregate(dataset, grouping, *allele_method, *meta_method)?;
            }
            Step::Select { rows, cols } => {
                if let Some(&r) = rows.iter().find(|&&r| r >= self.rows.len()) {
                    return Err(TransformError::InvalidSelection(format!(
                        "row {r} outside 0..{}",
                        self.rows.len()
                    )));
                }
                if let Some(&c) = cols.iter().find(|&&c| c >= self.cols.len()) {
                    return Err(TransformError::InvalidSelection(format!(
                        "column {c} outside 0..{}",
                        self.cols.len()
                    )));
                }
                self.selection = Selection {
                    rows: rows.iter().map(|&r| self.rows[r]).collect(),
                    cols: cols.iter().map(|&c| self.cols[c]).collect(),
                };
            }
            Step::ClearSelection => self.selection = Selection::default(),
        }
        Ok(report)
    }

    fn retain_variants(&mut self, mut keep: impl FnMut(u32) -> bool) {
        let mut decided: HashMap<u32, bool> = HashMap::new();
        self.cols.retain(|c| *decided.entry(c.variant).or_insert_with(|| keep(c.variant)));
        let cols = &self.cols;
        let present: HashSet<&ViewCol> = cols.iter().collect();
        self.selection.cols.retain(|c| present.contains(c));
    }

    /// Variants whose non-reference allele fraction over the view's subjects
    /// lies strictly above (or below) `threshold`.
    fn frequency_keep(&self, dataset: &Dataset, threshold: f64, mode: FrequencyMode) -> Result<HashSet<u32>, TransformError> {
        let subjects = self.subjects();
        let mut keep = HashSet::new();
        for v in self.variants() {
            let reference = dataset
                .variants
                .reference(v as usize)
                .ok_or_else(|| TransformError::UnknownReference(dataset.variants.id(v as usize).to_string()))?;
            let (mut alt, mut called) = (0u64, 0u64);
            for &s in &subjects {
                for slot in Slot::BOTH {
                    if let Some(b) = dataset.matrix.allele_at(s as usize, v as usize, slot) {
                        called += 1;
                        alt += u64::from(b != reference);
                    }
                }
            }
            if called == 0 {
                continue;
            }
            let f = alt as f64 / called as f64;
            let pass = match mode {
                FrequencyMode::Above => f > threshold,
                FrequencyMode::Below => f < threshold,
            };
            if pass {
                keep.insert(v);
            }
        }
        Ok(keep)
    }

    fn sort_columns(&mut self, dataset: &Dataset, meta: MetaRef) {
        if meta == MetaRef::ParentOfOrigin {
            let (mut pat, mat): (Vec<ViewCol>, Vec<ViewCol>) =
                self.cols.iter().partition(|c| c.slot == Slot::Paternal);
            pat.extend(mat);
            self.cols = pat;
            return;
        }
        // Columns of one variant travel as a unit, in their current order.
        let mut units: Vec<(u32, Vec<ViewCol>)> = Vec::new();
        let mut unit_of: HashMap<u32, usize> = HashMap::new();
        for &c in &self.cols {
            let u = *unit_of.entry(c.variant).or_insert_with(|| {
                units.push((c.variant, Vec::with_capacity(2)));
                units.len() - 1
            });
            units[u].1.push(c);
        }
        let vt = &dataset.variants;
        let (key, ranks): (Box<dyn Fn(u32) -> SortKey>, Vec<u32>) = match meta {
            MetaRef::Position => {
                (Box::new(|v| SortKey::Position(vt.chrom_index(v as usize), vt.position(v as usize))), Vec::new())
            }
            MetaRef::User { table, column } => {
                let attached = &dataset.variant_meta[table];
                let ranks = attached.table.columns[column].category_ranks();
                (Box::new(move |v| SortKey::Meta(attached.value(column, v as usize))), ranks)
            }
            MetaRef::ParentOfOrigin => unreachable!(),
        };
        let mut keyed: Vec<(SortKey, Vec<ViewCol>)> = units.into_iter().map(|(v, cols)| (key(v), cols)).collect();
        keyed.sort_by(|a, b| match (&a.0, &b.0) {
            (SortKey::Position(ca, pa), SortKey::Position(cb, pb)) => (ca, pa).cmp(&(cb, pb)),
            (SortKey::Meta(x), SortKey::Meta(y)) => compare_meta(*x, *y, &ranks),
            _ => unreachable!("one key kind per sort"),
        });
        self.cols = keyed.into_iter().flat_map(|(_, cols)| cols).collect();
    }

    fn aggregate(
        &mut self,
        dataset: &Dataset,
        grouping: &Grouping,
        method: AlleleMethod,
        meta_method: MetaMethod,
    ) -> Result<(), TransformError> {
        // Group key per row; `None` leaves the row untouched.
        let keys: Vec<Option<u32>> = match grouping {
            Grouping::Column(name) => {
                let Some(MetaRef::User { table, column }) = dataset.resolve_meta(MetaKind::Subject, name) else {
                    return Err(TransformError::UnknownMeta(name.clone()));
                };
                if !dataset.is_categorical(MetaKind::Subject, table, column) {
                    return Err(TransformError::InvalidGrouping(format!("{name:?} is not categorical")));
                }
                (0..self.rows.len())
                    .map(|r| match self.subject_meta_value(dataset, r, table, column) {
                        MetaValue::Category(c) => Some(c),
                        _ => None,
                    })
                    .collect()
            }
            Grouping::Selection => {
                if self.selection.rows.is_empty() {
                    return Err(TransformError::InvalidGrouping("no rows selected".into()));
                }
                self.rows.iter().map(|r| self.selection.rows.contains(r).then_some(0)).collect()
            }
        };

        // Each group is placed where its first member row was.
        let mut out: Vec<Result<ViewRow, usize>> = Vec::with_capacity(self.rows.len());
        let mut slot_of: HashMap<u32, usize> = HashMap::new();
        let mut members: Vec<Vec<u32>> = Vec::new();
        for (r, key) in keys.iter().enumerate() {
            match key {
                None => out.push(Ok(self.rows[r])),
                Some(k) => {
                    let g = *slot_of.entry(*k).or_insert_with(|| {
                        members.push(Vec::new());
                        out.push(Err(members.len() - 1));
                        members.len() - 1
                    });
                    members[g].extend(self.row_members(self.rows[r]));
                }
            }
        }

        let first_new = self.groups.len() as u32;
        for mut m in members {
            m.sort_unstable();
            m.dedup();
            let meta = dataset
                .subject_meta
                .iter()
                .map(|attached| {
                    attached
                        .table
                        .columns
                        .iter()
                        .enumerate()
                        .map(|(c, column)| {
                            aggregate::aggregate_meta(
                                column,
                                m.iter().map(|&s| attached.value(c, s as usize)),
                                meta_method,
                            )
                        })
                        .collect()
                })
                .collect();
            self.groups.push(AggregatedRow { label: format!("AGN{}", m.len()), members: m, method, meta });
        }
        self.rows = out
            .into_iter()
            .map(|r| r.unwrap_or_else(|g| ViewRow::Group(first_new + g as u32)))
            .collect();
        let rows: HashSet<ViewRow> = self.rows.iter().copied().collect();
        self.selection.rows.retain(|r| rows.contains(r));
        Ok(())
    }
}

/// Ascending: categories by label, numbers numerically, absent last.
fn compare_meta(a: MetaValue, b: MetaValue, ranks: &[u32]) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    match (a, b) {
        (MetaValue::Absent, MetaValue::Absent) => Ordering::Equal,
        (MetaValue::Absent, _) => Ordering::Greater,
        (_, MetaValue::Absent) => Ordering::Less,
        (MetaValue::Category(x), MetaValue::Category(y)) => ranks[x as usize].cmp(&ranks[y as usize]),
        (MetaValue::Number(x), MetaValue::Number(y)) => x.total_cmp(&y),
        (MetaValue::Category(_), MetaValue::Number(_)) => Ordering::Less,
        (MetaValue::Number(_), MetaValue::Category(_)) => Ordering::Greater,
    }
}
