use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Labeled `n x d` feature matrix, stored row-major in single precision.
///
/// Construction always validates: shapes agree, labels are in range and every
/// value is finite. Classes without any row are allowed and show up in
/// [`FeatureMatrix::warnings`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    num_classes: u32,
    data: Vec<f32>,
    labels: Vec<u32>,
}

impl FeatureMatrix {
    pub fn new(
        n: usize,
        d: usize,
        num_classes: u32,
        data: Vec<f32>,
        labels: Vec<u32>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("feature matrix needs at least one row (n = 0)"));
        }
        if d == 0 {
            return Err(Error::invalid("feature matrix needs at least one column (d = 0)"));
        }
        if num_classes < 2 {
            return Err(Error::invalid(format!(
                "num_classes must be at least 2, got {num_classes}"
            )));
        }
        let expected = n
            .checked_mul(d)
            .ok_or_else(|| Error::invalid("n * d overflows"))?;
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "data length {} does not match n * d = {expected}",
                data.len()
            )));
        }
        if labels.len() != n {
            return Err(Error::invalid(format!(
                "label count {} does not match n = {n}",
                labels.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: pos / d,
                col: pos % d,
            });
        }
        if let Some((row, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::invalid(format!(
                "label {label} at row {row} is out of range for {num_classes} classes"
            )));
        }
        Ok(Self {
            n,
            d,
            num_classes,
            data,
            labels,
        })
    }

    /// Builds a matrix from `f64` values (cast to `f32`), reusing labels.
    pub fn from_dmatrix(values: &DMatrix<f64>, num_classes: u32, labels: Vec<u32>) -> Result<Self> {
        let (n, d) = values.shape();
        let mut data = Vec::with_capacity(n * d);
        for i in 0..n {
            for j in 0..d {
                data.push(values[(i, j)] as f32);
            }
        }
        Self::new(n, d, num_classes, data, labels)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn num_classes(&self) -> u32 {
        self.num_classes
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.num_classes as usize];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Number of classes that have at least one row.
    pub fn classes_present(&self) -> usize {
        self.class_counts().iter().filter(|&&c| c > 0).count()
    }

    /// Non-fatal findings, currently only empty classes.
    pub fn warnings(&self) -> Vec<String> {
        self.class_counts()
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == 0)
            .map(|(class, _)| format!("class {class} has no rows"))
            .collect()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.d, |i, j| self.data[i * self.d + j] as f64)
    }

    /// Same labels, new values of identical shape.
    pub fn with_values(&self, values: &DMatrix<f64>) -> Result<Self> {
        if values.shape() != (self.n, self.d) {
            return Err(Error::invalid(format!(
                "replacement values are {:?}, expected ({}, {})",
                values.shape(),
                self.n,
                self.d
            )));
        }
        Self::from_dmatrix(values, self.num_classes, self.labels.clone())
    }

    /// Copies the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * self.d);
        let mut labels = Vec::with_capacity(rows.len());
        for &r in rows {
            data.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
        }
        Self::new(rows.len(), self.d, self.num_classes, data, labels)
    }
}
