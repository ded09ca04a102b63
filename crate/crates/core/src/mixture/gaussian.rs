use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const STACK_DIM: usize = 8;

/// Multivariate normal with a full SPD covariance.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianComponent {
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    // Lower Cholesky factor, row-major.
    chol: Vec<f64>,
    inv_diag: Vec<f64>,
    log_norm: f64,
    log_det: f64,
}

impl GaussianComponent {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidParameter("component dimension must be positive".into()));
        }
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: cov.nrows().max(cov.ncols()) });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("component parameters".into()));
        }
        for i in 0..d {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() >= 1e-12 {
                    return Err(Error::InvalidParameter(format!(
                        "covariance not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let l = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter("covariance is not positive definite".into()))?
            .l();
        let mut chol = vec![0.0; d * d];
        let mut log_det = 0.0;
        for i in 0..d {
            let lii = l[(i, i)];
            if !(lii > 0.0) || !lii.is_finite() {
                return Err(Error::InvalidParameter("covariance is not positive definite".into()));
            }
            log_det += 2.0 * lii.ln();
            for j in 0..=i {
                chol[i * d + j] = l[(i, j)];
            }
        }
        let log_norm = -0.5 * (d as f64 * LN_2PI + log_det);
        let inv_diag = (0..d).map(|i| 1.0 / chol[i * d + i]).collect();
        Ok(Self { mean, cov, chol, inv_diag, log_norm, log_det })
    }

    /// Builds from a row-major covariance buffer.
    pub fn from_parts(mean: Vec<f64>, cov: &[f64]) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: cov.len() });
        }
        Self::new(mean, DMatrix::from_row_slice(d, d, cov))
    }

    /// One-dimensional N(mean, sd²).
    pub fn univariate(mean: f64, sd: f64) -> Result<Self> {
        Self::new(vec![mean], DMatrix::from_element(1, 1, sd * sd))
    }

    /// Spherical N(mean, var·I).
    pub fn spherical(mean: Vec<f64>, var: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, DMatrix::identity(d, d) * var)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Squared Mahalanobis distance. `x` must have length `dim()`.
    #[inline]
    pub fn mahalanobis_sq(&self, x: &[f64]) -> f64 {
        let d = self.mean.len();
        debug_assert_eq!(x.len(), d);
        match d {
            1 => {
                let z = (x[0] - self.mean[0]) * self.inv_diag[0];
                return z * z;
            }
            2 => {
                let z0 = (x[0] - self.mean[0]) * self.inv_diag[0];
                let z1 = (x[1] - self.mean[1] - self.chol[2] * z0) * self.inv_diag[1];
                return z0 * z0 + z1 * z1;
            }
            _ => {}
        }
        let mut stack = [0.0; STACK_DIM];
        let mut heap;
        let z: &mut [f64] = if d <= STACK_DIM {
            &mut stack[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        let mut q = 0.0;
        for i in 0..d {
            let row = &self.chol[i * d..i * d + i];
            let mut s = x[i] - self.mean[i];
            for (lij, zj) in row.iter().zip(z.iter()) {
                s -= lij * zj;
            }
            let zi = s * self.inv_diag[i];
            z[i] = zi;
            q += zi * zi;
        }
        q
    }

    /// Log-density. `x` must have length `dim()`.
    #[inline]
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        self.log_norm - 0.5 * self.mahalanobis_sq(x)
    }

    /// Writes one draw `mean + L z` into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.mean.len();
        let mut stack = [0.0; STACK_DIM];
        let mut heap;
        let z: &mut [f64] = if d <= STACK_DIM {
            &mut stack[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        for zi in z.iter_mut() {
            *zi = rng.sample(StandardNormal);
        }
        for i in 0..d {
            let row = &self.chol[i * d..i * d + i + 1];
            out[i] = self.mean[i] + row.iter().zip(z.iter()).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Marginal mean and standard deviation along one axis.
    pub fn marginal(&self, axis: usize) -> (f64, f64) {
        (self.mean[axis], self.cov[(axis, axis)].sqrt())
    }
}
