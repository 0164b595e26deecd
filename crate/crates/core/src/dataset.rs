//! Sealed datasets: a packed matrix plus subject, variant and meta tables.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashMap, HashSet};
use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::ingest::IngestError;
use crate::meta::{MetaColumn, MetaKind, MetaTable, MetaType, MetaValue};
use crate::store::{Base, PackedHaplotypeMatrix};

/// Name of the synthetic variant row labelling allele columns as paternal or
/// maternal. Present on every phased dataset.
pub const PM_ROW: &str = "P/M";
/// Built-in variant sort key: chromosome (in input order), then position.
pub const POSITION_ROW: &str = "Position";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SubjectTable {
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl SubjectTable {
    /// Fails with the first duplicated identifier.
    pub fn new(ids: Vec<String>) -> Result<Self, String> {
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(id.clone());
            }
        }
        Ok(SubjectTable { ids, index })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, i: usize) -> &str {
        &self.ids[i]
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }
}

/// Up to three alternate bases, stored inline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AltBases {
    len: u8,
    bases: [Base; 3],
}

impl AltBases {
    pub const NONE: AltBases = AltBases { len: 0, bases: [Base::A; 3] };

    pub fn from_slice(alts: &[Base]) -> Option<AltBases> {
        if alts.len() > 3 {
            return None;
        }
        let mut bases = [Base::A; 3];
        bases[..alts.len()].copy_from_slice(alts);
        Some(AltBases { len: alts.len() as u8, bases })
    }

    pub fn as_slice(&self) -> &[Base] {
        &self.bases[..self.len as usize]
    }
}

/// Borrowed view of one variant's annotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant<'a> {
    pub id: &'a str,
    pub chrom: &'a str,
    pub position: u64,
    pub reference: Option<Base>,
    pub alternates: &'a [Base],
}

/// Column-oriented variant annotation. Identifiers live in one string
/// buffer to keep per-variant overhead small on large cohorts.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VariantTable {
    chromosomes: Vec<String>,
    chrom: Vec<u32>,
    positions: Vec<u64>,
    refs: Vec<Option<Base>>,
    alts: Vec<AltBases>,
    id_buf: String,
    id_ends: Vec<usize>,
}

impl VariantTable {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn id(&self, v: usize) -> &str {
        let start = if v == 0 { 0 } else { self.id_ends[v - 1] };
        &self.id_buf[start..self.id_ends[v]]
    }

    pub fn chrom(&self, v: usize) -> &str {
        &self.chromosomes[self.chrom[v] as usize]
    }

    /// Chromosome ordinal in first-appearance order.
    pub fn chrom_index(&self, v: usize) -> u32 {
        self.chrom[v]
    }

    pub fn chromosomes(&self) -> &[String] {
        &self.chromosomes
    }

    pub fn position(&self, v: usize) -> u64 {
        self.positions[v]
    }

    pub fn reference(&self, v: usize) -> Option<Base> {
        self.refs[v]
    }

    pub fn alternates(&self, v: usize) -> &[Base] {
        self.alts[v].as_slice()
    }

    pub fn get(&self, v: usize) -> Variant<'_> {
        Variant {
            id: self.id(v),
            chrom: self.chrom(v),
            position: self.position(v),
            reference: self.reference(v),
            alternates: self.alternates(v),
        }
    }

    pub fn position_of_id(&self, id: &str) -> Option<usize> {
        (0..self.len()).find(|&v| self.id(v) == id)
    }
}

/// Outcome of [`VariantTableBuilder::push`] beyond success.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PushError {
    PositionDecreased { chrom: String, previous: u64, position: u64 },
}

/// Streaming builder enforcing unique identifiers and non-decreasing
/// positions within each chromosome.
#[derive(Debug, Default)]
pub struct VariantTableBuilder {
    table: VariantTable,
    chrom_lookup: HashMap<String, u32>,
    last_position: Vec<u64>,
    id_hashes: HashSet<u64>,
    renamed: u64,
}

fn hash_id(id: &str) -> u64 {
    let mut h = DefaultHasher::new();
    id.hash(&mut h);
    h.finish()
}

impl VariantTableBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of identifiers that had to be disambiguated with a `#k` suffix.
    pub fn renamed(&self) -> u64 {
        self.renamed
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Append a variant. A missing identifier becomes `chrom:position`;
    /// duplicate identifiers get a `#2`, `#3`, ... suffix.
    pub fn push(
        &mut self,
        chrom: &str,
        position: u64,
        id: Option<&str>,
        reference: Option<Base>,
        alts: AltBases,
    ) -> Result<(), PushError> {
        let chrom_idx = match self.chrom_lookup.get(chrom) {
            Some(&i) => i,
            None => {
                let i = self.table.chromosomes.len() as u32;
                self.table.chromosomes.push(chrom.to_string());
                self.chrom_lookup.insert(chrom.to_string(), i);
                self.last_position.push(0);
                i
            }
        };
        let last = &mut self.last_position[chrom_idx as usize];
        if position < *last {
            return Err(PushError::PositionDecreased {
                chrom: chrom.to_string(),
                previous: *last,
                position,
            });
        }
        *last = position;

        let base_id = match id {
            Some(id) => id.to_string(),
            None => format!("{chrom}:{position}"),
        };
        let mut candidate = base_id.clone();
        let mut k = 1;
        while self.is_taken(&candidate) {
            k += 1;
            candidate = format!("{base_id}#{k}");
        }
        if k > 1 {
            self.renamed += 1;
        }
        self.id_hashes.insert(hash_id(&candidate));
        self.table.id_buf.push_str(&candidate);
        self.table.id_ends.push(self.table.id_buf.len());

        self.table.chrom.push(chrom_idx);
        self.table.positions.push(position);
        self.table.refs.push(reference);
        self.table.alts.push(alts);
        Ok(())
    }

    fn is_taken(&self, id: &str) -> bool {
        // Hash hits are confirmed by a scan; they only occur for genuine
        // duplicates or (vanishingly rare) 64-bit collisions.
        self.id_hashes.contains(&hash_id(id)) && self.table.position_of_id(id).is_some()
    }

    pub fn finish(self) -> VariantTable {
        self.table
    }
}

/// Resolves meta table rows against dataset entities.
#[derive(Debug, Clone, PartialEq)]
pub struct AttachedMeta {
    pub table: MetaTable,
    /// Table row for every dataset entity (subject or variant), if present.
    pub rows: Vec<Option<u32>>,
    /// Table identifiers that match no entity in the dataset.
    pub unmatched_ids: Vec<String>,
}

impl AttachedMeta {
    pub fn value(&self, column: usize, entity: usize) -> MetaValue {
        match self.rows[entity] {
            Some(r) => self.table.columns[column].values[r as usize],
            None => MetaValue::Absent,
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq, Eq)]
pub struct AttachReport {
    pub table: String,
    pub matched: usize,
    pub unmatched: usize,
}

/// A located meta column on one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaRef {
    User { table: usize, column: usize },
    /// Variant axis only: the paternal/maternal row of phased data.
    ParentOfOrigin,
    /// Variant axis only: chromosome then position.
    Position,
}

/// Matrix plus its annotation tables. Immutable once loaded, apart from
/// attaching further meta tables before it is shared.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub matrix: PackedHaplotypeMatrix,
    pub subjects: SubjectTable,
    pub variants: VariantTable,
    pub subject_meta: Vec<AttachedMeta>,
    pub variant_meta: Vec<AttachedMeta>,
}

impl Dataset {
    pub fn new(
        matrix: PackedHaplotypeMatrix,
        subjects: SubjectTable,
        variants: VariantTable,
    ) -> Result<Self, IngestError> {
        if matrix.n_subjects() != subjects.len() || matrix.n_variants() != variants.len() {
            return Err(IngestError::DimensionMismatch {
                expected: matrix.n_subjects() * matrix.n_variants(),
                found: subjects.len() * variants.len(),
            });
        }
        Ok(Dataset { matrix, subjects, variants, subject_meta: Vec::new(), variant_meta: Vec::new() })
    }

    pub fn phased(&self) -> bool {
        self.matrix.phased()
    }

    pub fn n_subjects(&self) -> usize {
        self.matrix.n_subjects()
    }

    pub fn n_variants(&self) -> usize {
        self.matrix.n_variants()
    }

    pub fn meta(&self, axis: MetaKind) -> &[AttachedMeta] {
        match axis {
            MetaKind::Subject => &self.subject_meta,
            MetaKind::Variant => &self.variant_meta,
        }
    }

    /// Attach a meta table to `axis`. The table's declared kind must match.
    pub fn attach_meta(&mut self, axis: MetaKind, table: MetaTable) -> Result<AttachReport, IngestError> {
        if table.kind != axis {
            return Err(IngestError::KindMismatch { table: table.name.clone(), expected: axis, found: table.kind });
        }
        if self.meta(axis).iter().any(|m| m.table.name == table.name) {
            return Err(IngestError::DuplicateMeta(table.name.clone()));
        }
        let n_entities = match axis {
            MetaKind::Subject => self.subjects.len(),
            MetaKind::Variant => self.variants.len(),
        };
        let mut rows = vec![None; n_entities];
        let mut unmatched_ids = Vec::new();
        match axis {
            MetaKind::Subject => {
                for (r, id) in table.ids.iter().enumerate() {
                    match self.subjects.position(id) {
                        Some(s) => rows[s] = Some(r as u32),
                        None => unmatched_ids.push(id.clone()),
                    }
                }
            }
            MetaKind::Variant => {
                let index = table.row_index();
                let mut matched = vec![false; table.n_rows()];
                for (v, slot) in rows.iter_mut().enumerate() {
                    if let Some(&r) = index.get(self.variants.id(v)) {
                        *slot = Some(r as u32);
                        matched[r] = true;
                    }
                }
                unmatched_ids = table
                    .ids
                    .iter()
                    .zip(&matched)
                    .filter(|(_, &m)| !m)
                    .map(|(id, _)| id.clone())
                    .collect();
            }
        }
        let report = AttachReport {
            table: table.name.clone(),
            matched: table.n_rows() - unmatched_ids.len(),
            unmatched: unmatched_ids.len(),
        };
        let attached = AttachedMeta { table, rows, unmatched_ids };
        match axis {
            MetaKind::Subject => self.subject_meta.push(attached),
            MetaKind::Variant => self.variant_meta.push(attached),
        }
        Ok(report)
    }

    /// Number of subject meta columns ("MI columns").
    pub fn mi_columns(&self) -> usize {
        self.subject_meta.iter().map(|m| m.table.columns.len()).sum()
    }

    /// Number of variant meta rows ("MI rows"), including the P/M row of
    /// phased data.
    pub fn mi_rows(&self) -> usize {
        let user: usize = self.variant_meta.iter().map(|m| m.table.columns.len()).sum();
        user + usize::from(self.phased())
    }

    /// Resolve a meta column by name. `table:column` qualifies the table;
    /// a bare name picks the first table (in attach order) that has it.
    /// On the variant axis the built-in `P/M` (phased only) and `Position`
    /// rows take precedence over user columns of the same name.
    pub fn resolve_meta(&self, axis: MetaKind, name: &str) -> Option<MetaRef> {
        if axis == MetaKind::Variant {
            if name == PM_ROW && self.phased() {
                return Some(MetaRef::ParentOfOrigin);
            }
            if name == POSITION_ROW {
                return Some(MetaRef::Position);
            }
        }
        let tables = self.meta(axis);
        let find = |tables: &[AttachedMeta], t_filter: Option<&str>, col: &str| {
            tables.iter().enumerate().find_map(|(t, m)| {
                if t_filter.is_some_and(|tn| tn != m.table.name) {
                    return None;
                }
                m.table
                    .columns
                    .iter()
                    .position(|c| c.name == col)
                    .map(|c| MetaRef::User { table: t, column: c })
            })
        };
        find(tables, None, name).or_else(|| {
            let (t, c) = name.split_once(':')?;
            find(tables, Some(t), c)
        })
    }

    pub fn meta_column(&self, axis: MetaKind, table: usize, column: usize) -> &MetaColumn {
        &self.meta(axis)[table].table.columns[column]
    }

    /// All subject meta columns as `(table, column)` pairs in attach order.
    pub fn subject_columns(&self) -> impl Iterator<Item = (usize, usize, &MetaColumn)> {
        self.subject_meta
            .iter()
            .enumerate()
            .flat_map(|(t, m)| m.table.columns.iter().enumerate().map(move |(c, col)| (t, c, col)))
    }

    pub fn is_categorical(&self, axis: MetaKind, table: usize, column: usize) -> bool {
        self.meta_column(axis, table, column).ty == MetaType::Categorical
    }
}
