use crate::error::{Error, Result};
use crate::features::{Sample, FEATURE_NAMES};

/// A dense feature matrix with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Vec<f64>,
}

impl Dataset {
    /// Builds a dataset from possibly-absent cells.
    ///
    /// Columns absent in every row are dropped. A column absent in only some
    /// rows is an error.
    pub fn from_columns(
        names: Vec<String>,
        cells: Vec<Vec<Option<f64>>>,
        labels: Vec<f64>,
    ) -> Result<Self> {
        if cells.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: cells.len(),
                actual: labels.len(),
            });
        }
        if let Some(bad) = cells.iter().find(|r| r.len() != names.len()) {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                actual: bad.len(),
            });
        }
        if let Some(y) = labels.iter().find(|y| !y.is_finite()) {
            return Err(Error::Training(format!("label {y} is not finite")));
        }
        let mut keep = Vec::new();
        for (j, name) in names.iter().enumerate() {
            let present = cells.iter().filter(|r| r[j].is_some()).count();
            if present == cells.len() && !cells.is_empty() {
                keep.push(j);
            } else if present > 0 {
                return Err(Error::PartialColumn(name.clone()));
            }
        }
        let rows: Vec<Vec<f64>> = cells
            .iter()
            .map(|r| keep.iter().map(|&j| r[j].unwrap_or_default()).collect())
            .collect();
        if let Some(j) = keep
            .iter()
            .enumerate()
            .find(|&(k, _)| rows.iter().any(|r| !r[k].is_finite()))
            .map(|(_, &j)| j)
        {
            return Err(Error::Training(format!(
                "column `{}` has a non-finite value",
                names[j]
            )));
        }
        Ok(Dataset {
            names: keep.iter().map(|&j| names[j].clone()).collect(),
            rows,
            labels,
        })
    }

    pub fn from_samples(samples: &[Sample]) -> Result<Self> {
        let names = FEATURE_NAMES.iter().map(|s| s.to_string()).collect();
        let cells = samples
            .iter()
            .map(|s| s.features.values().into_iter().map(|(_, v)| v).collect())
            .collect();
        let labels = samples.iter().map(|s| s.speedup).collect();
        Self::from_columns(names, cells, labels)
    }

    pub fn feature_names(&self) -> &[String] {
        &self.names
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            names: self.names.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }
}
