//! Column-oriented view of a dataset for model fitting.
//!
//! A frame owns named columns — continuous (`f64`, `NaN` marks a missing
//! value) or categorical (string labels). Frames are built from a
//! [`SessionDataset`] or assembled column by column, and extra columns such
//! as computed Shapley values can be joined before fitting.

use std::collections::BTreeMap;

use crate::dataset::{SessionDataset, CATEGORICAL_VARIABLES, CONTINUOUS_VARIABLES};
use crate::model::ModelError;

#[derive(Debug, Clone)]
pub enum Column {
    Continuous(Vec<f64>),
    Categorical(Vec<String>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Continuous(v) => v.len(),
            Column::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Default)]
pub struct ModelFrame {
    columns: BTreeMap<String, Column>,
    n_rows: usize,
}

impl ModelFrame {
    pub fn new(n_rows: usize) -> Self {
        ModelFrame {
            columns: BTreeMap::new(),
            n_rows,
        }
    }

    /// All dataset variables as frame columns, including the derived
    /// `learning_outcome` and the composite `team` grouping label.
    pub fn from_dataset(dataset: &SessionDataset) -> Self {
        let mut frame = ModelFrame::new(dataset.records.len());
        for name in CONTINUOUS_VARIABLES {
            let col = dataset.continuous_column(name).expect("registered column");
            frame
                .columns
                .insert(name.to_string(), Column::Continuous(col));
        }
        for name in CATEGORICAL_VARIABLES {
            let col = dataset.categorical_column(name).expect("registered column");
            frame
                .columns
                .insert(name.to_string(), Column::Categorical(col));
        }
        frame
    }

    pub fn insert(&mut self, name: &str, column: Column) -> Result<(), ModelError> {
        if column.len() != self.n_rows {
            return Err(ModelError::ColumnLength {
                name: name.to_string(),
                expected: self.n_rows,
                got: column.len(),
            });
        }
        self.columns.insert(name.to_string(), column);
        Ok(())
    }

    pub fn with_column(mut self, name: &str, column: Column) -> Result<Self, ModelError> {
        self.insert(name, column)?;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.get(name)
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.keys().map(String::as_str).collect()
    }

    pub fn continuous(&self, name: &str) -> Result<&[f64], ModelError> {
        match self.columns.get(name) {
            Some(Column::Continuous(v)) => Ok(v),
            Some(Column::Categorical(_)) => Err(ModelError::NotContinuous {
                name: name.to_string(),
            }),
            None => Err(self.unknown(name)),
        }
    }

    pub fn categorical(&self, name: &str) -> Result<&[String], ModelError> {
        match self.columns.get(name) {
            Some(Column::Categorical(v)) => Ok(v),
            Some(Column::Continuous(_)) => Err(ModelError::NotCategorical {
                name: name.to_string(),
            }),
            None => Err(self.unknown(name)),
        }
    }

    pub(crate) fn unknown(&self, name: &str) -> ModelError {
        ModelError::UnknownColumn {
            name: name.to_string(),
            valid: self.columns.keys().cloned().collect::<Vec<_>>().join(", "),
        }
    }
}
