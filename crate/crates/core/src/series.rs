use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`, one row per time sample.
#[derive(Debug, Clone, PartialEq)]
pub struct RowMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RowMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        RowMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Data(format!(
                "{} values cannot fill a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(RowMatrix { rows, cols, data })
    }

    /// Starts an empty matrix with room for `rows` rows.
    pub fn with_capacity(rows: usize, cols: usize) -> Self {
        RowMatrix {
            rows: 0,
            cols,
            data: Vec::with_capacity(rows * cols),
        }
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row length mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.cols..(n + 1) * self.cols]
    }

    pub fn row_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.cols..(n + 1) * self.cols]
    }

    pub fn get(&self, n: usize, k: usize) -> f64 {
        self.data[n * self.cols + k]
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.rows).map(|n| self.get(n, k)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Rows `start..end` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> RowMatrix {
        RowMatrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }
}

/// Sampled training record of the full model: large-scale states `x` and the
/// small-scale feedback `b` recorded at the same instants.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSeries {
    pub x: RowMatrix,
    pub b: RowMatrix,
    pub sample_interval: f64,
    /// SHA-256 of the generating configuration (or model, for reduced runs).
    pub config_id: [u8; 32],
}

impl SampleSeries {
    pub fn new(
        x: RowMatrix,
        b: RowMatrix,
        sample_interval: f64,
        config_id: [u8; 32],
    ) -> Result<Self> {
        if x.rows() != b.rows() || x.cols() != b.cols() {
            return Err(Error::Data(format!(
                "X is {}x{} but B is {}x{}",
                x.rows(),
                x.cols(),
                b.rows(),
                b.cols()
            )));
        }
        Ok(SampleSeries {
            x,
            b,
            sample_interval,
            config_id,
        })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    /// Number of spatial grid points `K`.
    pub fn width(&self) -> usize {
        self.x.cols()
    }

    pub fn tail(&self, rows: usize) -> SampleSeries {
        let n = self.len();
        let start = n.saturating_sub(rows);
        SampleSeries {
            x: self.x.slice_rows(start, n),
            b: self.b.slice_rows(start, n),
            sample_interval: self.sample_interval,
            config_id: self.config_id,
        }
    }
}
