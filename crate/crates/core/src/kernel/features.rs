use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnKind {
    /// Proportion of positive convolution outputs.
    Ppv,
    /// Maximum convolution output.
    Max,
}

/// Dense row-major feature matrix, one row per series.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    kinds: Vec<ColumnKind>,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, kinds: Vec<ColumnKind>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dimension(rows * cols, data.len()));
        }
        if kinds.len() != cols {
            return Err(Error::dimension(cols, kinds.len()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite feature at row {}, column {}", i / cols, i % cols)));
        }
        Ok(Self { rows, cols, data, kinds })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn kinds(&self) -> &[ColumnKind] {
        &self.kinds
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}
