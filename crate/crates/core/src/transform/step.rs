use serde::{Deserialize, Serialize};

use crate::transform::{StepReport, TransformError, View};
use crate::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrequencyMode {
    Above,
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlleleMethod {
    /// Most frequent base in the group.
    #[default]
    Maximum,
    /// Least frequent base that occurs at least once.
    Minimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaMethod {
    Min,
    Max,
    #[default]
    Mean,
    Mode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// One group per category of a categorical subject column.
    Column(String),
    /// The currently selected rows form one group.
    Selection,
}

/// One replayable view transform. Serialized with an `op` tag, e.g.
/// `{"op":"filter_frequency","threshold":0.005,"mode":"above"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Step {
    FilterRegion {
        chrom: String,
        start: u64,
        end: u64,
    },
    FilterIds {
        ids: Vec<String>,
    },
    FilterRegex {
        pattern: String,
    },
    FilterFrequency {
        threshold: f64,
        mode: FrequencyMode,
    },
    SortRows {
        column: String,
    },
    SortCols {
        row: String,
    },
    AggregateRows {
        grouping: Grouping,
        #[serde(default)]
        allele_method: AlleleMethod,
        #[serde(default)]
        meta_method: MetaMethod,
    },
    Select {
        #[serde(default)]
        rows: Vec<usize>,
        #[serde(default)]
        cols: Vec<usize>,
    },
    ClearSelection,
}

impl Step {
    pub fn name(&self) -> &'static str {
        match self {
            Step::FilterRegion { .. } => "filter_region",
            Step::FilterIds { .. } => "filter_ids",
            Step::FilterRegex { .. } => "filter_regex",
            Step::FilterFrequency { .. } => "filter_frequency",
            Step::SortRows { .. } => "sort_rows",
            Step::SortCols { .. } => "sort_cols",
            Step::AggregateRows { .. } => "aggregate_rows",
            Step::Select { .. } => "select",
            Step::ClearSelection => "clear_selection",
        }
    }
}

/// A step as recorded in a session log or pipeline file. The timestamp is
/// informational and ignored on replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    #[serde(flatten)]
    pub step: Step,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at_ms: Option<u64>,
}

impl From<Step> for LogEntry {
    fn from(step: Step) -> Self {
        LogEntry { step, at_ms: None }
    }
}

/// Error from replaying a chain: the failing step's position and cause.
#[derive(Debug, thiserror::Error)]
#[error("step {index} ({name}): {source}")]
pub struct ChainError {
    pub index: usize,
    pub name: &'static str,
    #[source]
    pub source: TransformError,
}

/// Ordered list of steps. Replaying it over the same dataset always yields
/// the same view.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViewChain {
    pub steps: Vec<LogEntry>,
}

impl ViewChain {
    pub fn new(steps: impl IntoIterator<Item = Step>) -> Self {
        ViewChain { steps: steps.into_iter().map(LogEntry::from).collect() }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("chain serializes")
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn derive(&self, dataset: &Dataset) -> Result<(View, Vec<StepReport>), ChainError> {
        let mut view = View::new(dataset);
        let mut reports = Vec::with_capacity(self.steps.len());
        for (index, entry) in self.steps.iter().enumerate() {
            let report = view
                .apply(dataset, &entry.step)
                .map_err(|source| ChainError { index, name: entry.step.name(), source })?;
            reports.push(report);
        }
        Ok((view, reports))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_json_shape() {
        let s = Step::FilterFrequency { threshold: 0.005, mode: FrequencyMode::Above };
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"op":"filter_frequency","threshold":0.005,"mode":"above"}"#
        );
        let agg: Step = serde_json::from_str(
            r#"{"op":"aggregate_rows","grouping":{"column":"Population"},"allele_method":"minimum"}"#,
        )
        .unwrap();
        assert_eq!(
            agg,
            Step::AggregateRows {
                grouping: Grouping::Column("Population".into()),
                allele_method: AlleleMethod::Minimum,
                meta_method: MetaMethod::Mean,
            }
        );
        let sel: Step = serde_json::from_str(r#"{"op":"aggregate_rows","grouping":"selection"}"#).unwrap();
        assert!(matches!(sel, Step::AggregateRows { grouping: Grouping::Selection, .. }));
    }

    #[test]
    fn log_entries_round_trip_with_timestamps() {
        let chain = ViewChain {
            steps: vec![
                LogEntry { step: Step::SortRows { column: "Population".into() }, at_ms: Some(17) },
                Step::ClearSelection.into(),
            ],
        };
        let text = chain.to_json();
        assert!(text.contains("\"at_ms\": 17"));
        assert_eq!(ViewChain::from_json(&text).unwrap(), chain);
    }

    #[test]
    fn unknown_op_is_rejected() {
        assert!(ViewChain::from_json(r#"{"steps":[{"op":"explode"}]}"#).is_err());
    }
}
