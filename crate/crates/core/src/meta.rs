//! Subject and variant meta-information tables.
//!
//! The on-disk format is tab-delimited text with two header lines:
//!
//! ```text
//! ID<TAB>Population<TAB>Age
//! CATEGORICAL<TAB>NUMERICAL
//! HG00096<TAB>GBR<TAB>31
//! ```
//!
//! The first header line names the ID column followed by one name per meta
//! column. The second line carries one type token per meta column
//! (`categorical` / `numerical`, any case); a leading placeholder token for
//! the ID column is also accepted. Empty cells, `NA` and `.` read as absent.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::ingest::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaKind {
    Subject,
    Variant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaType {
    Categorical,
    Numerical,
}

impl MetaType {
    pub fn parse_token(token: &str) -> Option<MetaType> {
        if token.eq_ignore_ascii_case("categorical") {
            Some(MetaType::Categorical)
        } else if token.eq_ignore_ascii_case("numerical") {
            Some(MetaType::Numerical)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetaValue {
    /// Index into [`MetaColumn::categories`].
    Category(u32),
    Number(f64),
    Absent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaColumn {
    pub name: String,
    pub ty: MetaType,
    /// Category labels in first-appearance order (empty for numerical columns).
    pub categories: Vec<String>,
    /// One value per table row.
    pub values: Vec<MetaValue>,
}

impl MetaColumn {
    pub fn new(name: impl Into<String>, ty: MetaType) -> Self {
        MetaColumn { name: name.into(), ty, categories: Vec::new(), values: Vec::new() }
    }

    pub fn category_name(&self, value: MetaValue) -> Option<&str> {
        match value {
            MetaValue::Category(i) => self.categories.get(i as usize).map(String::as_str),
            _ => None,
        }
    }

    /// Rank of each category under lexicographic ordering of its label.
    pub fn category_ranks(&self) -> Vec<u32> {
        let mut order: Vec<usize> = (0..self.categories.len()).collect();
        order.sort_by(|&a, &b| self.categories[a].cmp(&self.categories[b]));
        let mut ranks = vec![0u32; order.len()];
        for (rank, idx) in order.into_iter().enumerate() {
            ranks[idx] = rank as u32;
        }
        ranks
    }

    /// Intern a category label, returning its index.
    pub fn intern(&mut self, label: &str) -> u32 {
        if let Some(i) = self.categories.iter().position(|c| c == label) {
            return i as u32;
        }
        self.categories.push(label.to_string());
        (self.categories.len() - 1) as u32
    }

    /// Render a value the way it would appear in the source file.
    pub fn display(&self, value: MetaValue) -> Option<String> {
        match value {
            MetaValue::Category(i) => self.categories.get(i as usize).cloned(),
            MetaValue::Number(x) => Some(format_number(x)),
            MetaValue::Absent => None,
        }
    }
}

pub(crate) fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaTable {
    pub name: String,
    pub kind: MetaKind,
    /// Row identifiers in file order.
    pub ids: Vec<String>,
    pub columns: Vec<MetaColumn>,
}

impl MetaTable {
    pub fn new(name: impl Into<String>, kind: MetaKind) -> Self {
        MetaTable { name: name.into(), kind, ids: Vec::new(), columns: Vec::new() }
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn column(&self, name: &str) -> Option<&MetaColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn row_index(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect()
    }
}

fn is_absent(cell: &str) -> bool {
    cell.is_empty() || cell == "NA" || cell == "."
}

/// Parse a two-header meta-information file.
pub fn parse_meta<R: BufRead>(reader: R, kind: MetaKind, name: &str) -> Result<MetaTable, IngestError> {
    let mut lines = reader.lines().enumerate();

    let header = match lines.next() {
        Some((_, line)) => strip_cr(line?),
        None => return Err(IngestError::MalformedHeader("empty meta-information file".into())),
    };
    let names: Vec<&str> = header.split('\t').collect();
    if names.len() < 2 {
        return Err(IngestError::MalformedHeader(
            "meta header needs an ID column and at least one meta column".into(),
        ));
    }
    let column_names = &names[1..];

    let types_line = match lines.next() {
        Some((_, line)) => strip_cr(line?),
        None => return Err(IngestError::MalformedHeader("missing type declaration line".into())),
    };
    let mut type_tokens: Vec<&str> = types_line.split('\t').collect();
    if type_tokens.len() == names.len() {
        type_tokens.remove(0);
    }
    if type_tokens.len() != column_names.len() {
        return Err(IngestError::MalformedHeader(format!(
            "{} column names but {} type tokens",
            column_names.len(),
            type_tokens.len()
        )));
    }

    let mut table = MetaTable::new(name, kind);
    for (col_name, token) in column_names.iter().zip(&type_tokens) {
        let ty = MetaType::parse_token(token.trim())
            .ok_or_else(|| IngestError::MalformedHeader(format!("unknown column type {token:?}")))?;
        if table.column(col_name).is_some() {
            return Err(IngestError::MalformedHeader(format!("duplicate column name {col_name:?}")));
        }
        table.columns.push(MetaColumn::new(*col_name, ty));
    }

    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = strip_cr(line?);
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields.next().unwrap_or_default().to_string();
        if id.is_empty() {
            return Err(IngestError::record(line_no, "empty identifier"));
        }
        if seen.insert(id.clone(), table.ids.len()).is_some() {
            return Err(IngestError::record(line_no, format!("duplicate identifier {id:?}")));
        }
        let cells: Vec<&str> = fields.collect();
        if cells.len() > table.columns.len() {
            return Err(IngestError::record(
                line_no,
                format!("{} values for {} columns", cells.len(), table.columns.len()),
            ));
        }
        for (c, column) in table.columns.iter_mut().enumerate() {
            let cell = cells.get(c).map_or("", |s| s.trim());
            let value = if is_absent(cell) {
                MetaValue::Absent
            } else {
                match column.ty {
                    MetaType::Categorical => MetaValue::Category(column.intern(cell)),
                    MetaType::Numerical => match cell.parse::<f64>() {
                        Ok(x) if x.is_finite() => MetaValue::Number(x),
                        _ => {
                            return Err(IngestError::record(
                                line_no,
                                format!("value {cell:?} in numerical column {:?}", column.name),
                            ))
                        }
                    },
                }
            };
            column.values.push(value);
        }
        table.ids.push(id);
    }
    Ok(table)
}

fn strip_cr(mut line: String) -> String {
    if line.ends_with('\r') {
        line.pop();
    }
    line
}
