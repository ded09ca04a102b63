use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mixture::GaussianComponent;

fn check_dims(a: &GaussianComponent, b: &GaussianComponent) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(())
}

fn mean_gap(a: &GaussianComponent, b: &GaussianComponent) -> DVector<f64> {
    DVector::from_iterator(a.dim(), b.mean().iter().zip(a.mean()).map(|(x, y)| x - y))
}

/// KL information I(a ‖ b) between two Gaussians.
pub fn gauss_kl_closed(a: &GaussianComponent, b: &GaussianComponent) -> Result<f64> {
    check_dims(a, b)?;
    let d = a.dim() as f64;
    let chol = b
        .cov()
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("singular covariance in KL".into()))?;
    let trace = chol.solve(a.cov()).trace();
    let delta = mean_gap(a, b);
    let maha = delta.dot(&chol.solve(&delta));
    Ok(0.5 * (trace + maha - d + b.log_det() - a.log_det()))
}

/// Bhattacharyya distance −ln ρ(a, b) between two Gaussians.
pub fn gauss_bhat_closed(a: &GaussianComponent, b: &GaussianComponent) -> Result<f64> {
    check_dims(a, b)?;
    let sum: DMatrix<f64> = a.cov() + b.cov();
    let chol = sum
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("singular covariance sum in Bhattacharyya".into()))?;
    let delta = mean_gap(a, b);
    let maha = delta.dot(&chol.solve(&delta));
    let d = a.dim() as f64;
    let log_det_sum = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let log_det_avg = log_det_sum - d * std::f64::consts::LN_2;
    Ok(0.25 * maha + 0.5 * (log_det_avg - 0.5 * (a.log_det() + b.log_det())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uni_var(m: f64, var: f64) -> GaussianComponent {
        GaussianComponent::univariate(m, var.sqrt()).unwrap()
    }

    #[test]
    fn kl_reference_values() {
        let z = uni_var(0.0, 1.0);
        assert_eq!(gauss_kl_closed(&z, &z).unwrap(), 0.0);
        assert!((gauss_kl_closed(&z, &uni_var(3.0, 1.0)).unwrap() - 4.5).abs() < 1e-14);
        assert!((gauss_kl_closed(&z, &uni_var(0.0, 4.0)).unwrap() - 0.318_147_180_559_945_3).abs() < 1e-12);
        let a = uni_var(0.0, 0.25);
        assert!((gauss_kl_closed(&a, &z).unwrap() - 0.318_147_180_559_945_3).abs() < 1e-12);
        assert!((gauss_kl_closed(&z, &a).unwrap() - 0.806_852_819_440_054_7).abs() < 1e-12);
    }

    #[test]
    fn bhat_reference_values() {
        let z = uni_var(0.0, 1.0);
        assert!(gauss_bhat_closed(&z, &z).unwrap().abs() < 1e-15);
        assert!((gauss_bhat_closed(&z, &uni_var(3.0, 1.0)).unwrap() - 1.125).abs() < 1e-14);
        let a = uni_var(0.0, 0.25);
        assert!((gauss_bhat_closed(&a, &z).unwrap() - 0.5 * 1.25f64.ln()).abs() < 1e-14);
        assert!((gauss_bhat_closed(&z, &uni_var(40.0, 1.0)).unwrap() - 200.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let a = uni_var(0.0, 1.0);
        let b = GaussianComponent::spherical(vec![0.0, 0.0], 1.0).unwrap();
        assert!(gauss_kl_closed(&a, &b).is_err());
        assert!(gauss_bhat_closed(&a, &b).is_err());
    }
}
