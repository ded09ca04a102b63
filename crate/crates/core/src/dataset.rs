use crate::error::{Error, Result};

/// Row-major `n × d` matrix of observations.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidParameter("dataset dimension must be positive".into()));
        }
        if values.len() != n * d {
            return Err(Error::InvalidParameter(format!(
                "dataset buffer has {} values, expected {n} x {d}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("dataset row {} column {}", pos / d, pos % d)));
        }
        Ok(Self { n, d, values })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let d = rows
            .first()
            .map(|r| r.as_ref().len())
            .ok_or_else(|| Error::InvalidParameter("dataset has no rows".into()))?;
        let mut values = Vec::with_capacity(rows.len() * d);
        for r in rows {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
            values.extend_from_slice(r);
        }
        Self::new(rows.len(), d, values)
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.d)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&c| c >= self.d) {
            return Err(Error::InvalidParameter(format!("column {bad} out of range (d = {})", self.d)));
        }
        let mut values = Vec::with_capacity(self.n * columns.len());
        for r in self.rows() {
            values.extend(columns.iter().map(|&c| r[c]));
        }
        Self::new(self.n, columns.len(), values)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for r in self.rows() {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        let n = self.n.max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Maximum-likelihood (divide-by-n) covariance, row-major `d × d`.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.d;
        let mean = self.mean();
        let mut c = vec![0.0; d * d];
        for r in self.rows() {
            for i in 0..d {
                let di = r[i] - mean[i];
                for j in 0..=i {
                    c[i * d + j] += di * (r[j] - mean[j]);
                }
            }
        }
        let n = self.n.max(1) as f64;
        for i in 0..d {
            for j in 0..=i {
                let v = c[i * d + j] / n;
                c[i * d + j] = v;
                c[j * d + i] = v;
            }
        }
        c
    }
}
