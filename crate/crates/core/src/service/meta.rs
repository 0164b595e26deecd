//! Meta panel payload: typed columns aligned with the current view.

use serde::Serialize;
use serde_json::Value;

use crate::dataset::{PM_ROW, POSITION_ROW};
use crate::meta::{MetaColumn, MetaType, MetaValue};
use crate::render::{category_colors, Rgb};
use crate::store::Slot;
use crate::transform::{View, ViewRow};
use crate::Dataset;

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub(super) struct RowInfo {
    label: String,
    /// `subject` or `group`.
    kind: &'static str,
    /// Subjects behind the row (1 for plain subject rows).
    members: usize,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub(super) struct ColInfo {
    variant: String,
    slot: Slot,
}

/// One meta column (subject axis) or row (variant axis).
#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub(super) struct MetaTrack {
    /// Source table; absent for built-in tracks.
    table: Option<String>,
    name: String,
    /// `categorical`, `numerical` or `position`.
    #[serde(rename = "type")]
    ty: &'static str,
    categories: Vec<String>,
    /// Display color for each category, same order.
    palette: Vec<Rgb>,
    /// One value per view row or allele column: label, number or null.
    values: Vec<Value>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
pub(super) struct MetaPayload {
    version: u64,
    rows: Vec<RowInfo>,
    cols: Vec<ColInfo>,
    subject_columns: Vec<MetaTrack>,
    variant_rows: Vec<MetaTrack>,
}

fn json_value(column: &MetaColumn, value: MetaValue) -> Value {
    match value {
        MetaValue::Category(i) => Value::String(column.categories[i as usize].clone()),
        MetaValue::Number(x) => serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number),
        MetaValue::Absent => Value::Null,
    }
}

fn user_track(table: &str, column: &MetaColumn, values: Vec<Value>) -> MetaTrack {
    let ty = match column.ty {
        MetaType::Categorical => "categorical",
        MetaType::Numerical => "numerical",
    };
    MetaTrack {
        table: Some(table.to_string()),
        name: column.name.clone(),
        ty,
        categories: column.categories.clone(),
        palette: category_colors(&column.category_ranks()),
        values,
    }
}

impl MetaPayload {
    pub(super) fn build(dataset: &Dataset, view: &View, version: u64) -> MetaPayload {
        let rows = (0..view.n_rows())
            .map(|r| match view.rows()[r] {
                ViewRow::Subject(_) => RowInfo { label: view.row_label(dataset, r).to_string(), kind: "subject", members: 1 },
                ViewRow::Group(g) => {
                    let group = view.group(g);
                    RowInfo { label: group.label.clone(), kind: "group", members: group.members.len() }
                }
            })
            .collect();
        let cols = view
            .cols()
            .iter()
            .map(|c| ColInfo { variant: dataset.variants.id(c.variant as usize).to_string(), slot: c.slot })
            .collect();

        let subject_columns = dataset
            .subject_columns()
            .map(|(t, c, column)| {
                let values = (0..view.n_rows()).map(|r| json_value(column, view.subject_meta_value(dataset, r, t, c))).collect();
                user_track(&dataset.subject_meta[t].table.name, column, values)
            })
            .collect();

        let mut variant_rows = Vec::new();
        if dataset.phased() {
            let categories = vec!["P".to_string(), "M".to_string()];
            variant_rows.push(MetaTrack {
                table: None,
                name: PM_ROW.to_string(),
                ty: "categorical",
                palette: category_colors(&[0, 1]),
                values: view
                    .cols()
                    .iter()
                    .map(|c| Value::String(categories[usize::from(c.slot == Slot::Maternal)].clone()))
                    .collect(),
                categories,
            });
        }
        variant_rows.push(MetaTrack {
            table: None,
            name: POSITION_ROW.to_string(),
            ty: "position",
            categories: Vec::new(),
            palette: Vec::new(),
            values: view
                .cols()
                .iter()
                .map(|c| {
                    let v = c.variant as usize;
                    Value::String(format!("{}:{}", dataset.variants.chrom(v), dataset.variants.position(v)))
                })
                .collect(),
        });
        for meta in &dataset.variant_meta {
            for (c, column) in meta.table.columns.iter().enumerate() {
                let values = view.cols().iter().map(|col| json_value(column, meta.value(c, col.variant as usize))).collect();
                variant_rows.push(user_track(&meta.table.name, column, values));
            }
        }

        MetaPayload { version, rows, cols, subject_columns, variant_rows }
    }
}
