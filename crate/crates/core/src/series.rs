use crate::error::{Error, Result};

/// A multivariate series of `m` time stamps and `n` variates, stored
/// column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Series {
    pub fn from_columns(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Shape(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        let m = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != m) {
            return Err(Error::Shape("columns differ in length".into()));
        }
        Ok(Series { names, columns })
    }

    /// Unnamed columns `v0, v1, ...`.
    pub fn unnamed(columns: Vec<Vec<f64>>) -> Result<Self> {
        let names = (0..columns.len()).map(|i| format!("v{i}")).collect();
        Series::from_columns(names, columns)
    }

    pub fn univariate(values: Vec<f64>) -> Self {
        Series {
            names: vec!["v0".into()],
            columns: vec![values],
        }
    }

    /// Number of time stamps `m`.
    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of variates `n`.
    pub fn variates(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.columns[j][i]
    }

    /// Rows `start..start + len` of the first `variates` columns.
    pub fn window(&self, start: usize, len: usize, variates: usize) -> Result<Series> {
        if start + len > self.len() || variates > self.variates() {
            return Err(Error::Shape(format!(
                "window of {len}x{variates} at row {start} exceeds a {}x{} series",
                self.len(),
                self.variates()
            )));
        }
        Ok(Series {
            names: self.names[..variates].to_vec(),
            columns: self.columns[..variates]
                .iter()
                .map(|c| c[start..start + len].to_vec())
                .collect(),
        })
    }

    /// Same shape with a per-row transform applied to every value.
    pub fn map_rows(&self, mut f: impl FnMut(usize, f64) -> f64) -> Series {
        Series {
            names: self.names.clone(),
            columns: self
                .columns
                .iter()
                .map(|c| c.iter().enumerate().map(|(i, &v)| f(i, v)).collect())
                .collect(),
        }
    }
}
