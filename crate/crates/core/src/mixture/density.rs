use std::collections::BTreeSet;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::gaussian::GaussianComponent;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

pub const PDF_FLOOR: f64 = 1e-300;

/// Numerically stable `ln Σ exp(v)`.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + values.into_iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// A normalized finite Gaussian mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct MixtureDensity {
    coefs: Vec<f64>,
    components: Vec<GaussianComponent>,
    log_coefs: Vec<f64>,
}

impl MixtureDensity {
    pub fn new(coefs: Vec<f64>, components: Vec<GaussianComponent>) -> Result<Self> {
        if coefs.is_empty() || coefs.len() != components.len() {
            return Err(Error::InvalidParameter(format!(
                "{} coefficients for {} components",
                coefs.len(),
                components.len()
            )));
        }
        let d = components[0].dim();
        for (index, c) in components.iter().enumerate() {
            if c.dim() != d {
                return Err(Error::InvalidComponent {
                    index,
                    reason: format!("dimension {} differs from {d}", c.dim()),
                });
            }
        }
        for (index, &w) in coefs.iter().enumerate() {
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidComponent {
                    index,
                    reason: format!("coefficient {w} is not positive"),
                });
            }
        }
        let total: f64 = coefs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("coefficients sum to {total}")));
        }
        let log_coefs = coefs.iter().map(|w| w.ln()).collect();
        Ok(Self { coefs, components, log_coefs })
    }

    pub fn single(component: GaussianComponent) -> Self {
        Self { coefs: vec![1.0], components: vec![component], log_coefs: vec![0.0] }
    }

    /// The weight-proportional mixture `(wa·a + wb·b) / (wa + wb)`.
    pub fn combine(wa: f64, a: &Self, wb: f64, b: &Self) -> Result<Self> {
        if !(wa > 0.0 && wb > 0.0) {
            return Err(Error::InvalidParameter("combination weights must be positive".into()));
        }
        if a.dim() != b.dim() {
            return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
        }
        let (fa, fb) = (wa / (wa + wb), wb / (wa + wb));
        let mut coefs: Vec<f64> = a.coefs.iter().map(|c| c * fa).collect();
        coefs.extend(b.coefs.iter().map(|c| c * fb));
        let mut components = a.components.clone();
        components.extend(b.components.iter().cloned());
        let log_coefs = coefs.iter().map(|w| w.ln()).collect();
        Ok(Self { coefs, components, log_coefs })
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn len(&self) -> usize {
        self.coefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefs.is_empty()
    }

    pub fn coefs(&self) -> &[f64] {
        &self.coefs
    }

    pub fn log_coefs(&self) -> &[f64] {
        &self.log_coefs
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn terms(&self) -> impl Iterator<Item = (f64, &GaussianComponent)> {
        self.coefs.iter().copied().zip(self.components.iter())
    }

    /// Log-density without input validation.
    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        if self.components.len() == 1 {
            return self.components[0].log_pdf(x);
        }
        let mut buf = [0.0; 32];
        if self.len() <= buf.len() {
            for (slot, (lc, c)) in buf.iter_mut().zip(self.log_coefs.iter().zip(&self.components)) {
                *slot = lc + c.log_pdf(x);
            }
            log_sum_exp(buf[..self.len()].iter().copied())
        } else {
            let v: Vec<f64> =
                self.log_coefs.iter().zip(&self.components).map(|(lc, c)| lc + c.log_pdf(x)).collect();
            log_sum_exp(v.iter().copied())
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("evaluation point".into()));
        }
        Ok(())
    }

    /// Density at `x`, clamped below at `PDF_FLOOR`.
    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.log_pdf(x).exp().max(PDF_FLOOR))
    }

    /// Per-component log of `coef_k · N(x | k)`.
    pub fn log_terms(&self, x: &[f64], out: &mut [f64]) {
        for ((o, lc), c) in out.iter_mut().zip(&self.log_coefs).zip(&self.components) {
            *o = lc + c.log_pdf(x);
        }
    }

    /// Normalized posterior responsibilities at `x`.
    pub fn responsibilities(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let mut t = vec![0.0; self.len()];
        self.log_terms(x, &mut t);
        let z = log_sum_exp(t.iter().copied());
        Ok(t.into_iter().map(|v| (v - z).exp()).collect())
    }

    /// MAP component for each row; ties go to the lowest index.
    pub fn map_assign(&self, data: &Dataset) -> Result<Vec<usize>> {
        if data.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: data.dim() });
        }
        let mut t = vec![0.0; self.len()];
        Ok(data
            .rows()
            .map(|x| {
                self.log_terms(x, &mut t);
                argmax_first(&t)
            })
            .collect())
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Dataset> {
        Ok(self.sample_labeled(n, seed)?.0)
    }

    /// Draws `n` points and the index of the component each came from.
    pub fn sample_labeled(&self, n: usize, seed: u64) -> Result<(Dataset, Vec<usize>)> {
        if n == 0 {
            return Err(Error::InvalidParameter("sample size must be at least 1".into()));
        }
        let d = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pick = WeightedIndex::new(&self.coefs)
            .map_err(|e| Error::InvalidParameter(format!("mixture weights: {e}")))?;
        let mut values = vec![0.0; n * d];
        let mut labels = Vec::with_capacity(n);
        for row in values.chunks_exact_mut(d) {
            let k = pick.sample(&mut rng);
            self.components[k].sample_into(&mut rng, row);
            labels.push(k);
        }
        Ok((Dataset::new(n, d, values)?, labels))
    }
}

pub(crate) fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// A weighted subcluster: weight π, density p and the original component indices it covers.
#[derive(Clone, Debug, PartialEq)]
pub struct Subcluster {
    pub id: u32,
    pub weight: f64,
    pub density: MixtureDensity,
    pub members: BTreeSet<usize>,
}

impl Subcluster {
    pub fn new(id: u32, weight: f64, density: MixtureDensity, members: BTreeSet<usize>) -> Result<Self> {
        if !(weight > 0.0 && weight <= 1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("subcluster weight {weight} outside (0, 1]")));
        }
        if members.is_empty() {
            return Err(Error::InvalidParameter("subcluster has no members".into()));
        }
        Ok(Self { id, weight, density, members })
    }

    /// A single-Gaussian subcluster, convenient for probes and tests.
    pub fn gaussian(id: u32, weight: f64, component: GaussianComponent) -> Result<Self> {
        Self::new(id, weight, MixtureDensity::single(component), BTreeSet::from([id as usize]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uni(m: f64, s: f64) -> GaussianComponent {
        GaussianComponent::univariate(m, s).unwrap()
    }

    fn scenario_a() -> MixtureDensity {
        MixtureDensity::new(vec![0.475, 0.475, 0.05], vec![uni(-3.0, 1.0), uni(0.0, 1.0), uni(3.1, 1.0)])
            .unwrap()
    }

    #[test]
    fn pdf_of_identical_mixture_equals_component() {
        let m = MixtureDensity::new(vec![0.5, 0.5], vec![uni(0.0, 1.0), uni(0.0, 1.0)]).unwrap();
        assert!((m.pdf(&[0.0]).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn pdf_matches_term_sum() {
        let m = scenario_a();
        let phi = |x: f64, mu: f64| (-(x - mu) * (x - mu) / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for i in 0..50 {
            let x = -8.0 + 16.0 * i as f64 / 49.0;
            let direct = 0.475 * phi(x, -3.0) + 0.475 * phi(x, 0.0) + 0.05 * phi(x, 3.1);
            let got = m.pdf(&[x]).unwrap();
            assert!((got - direct).abs() <= 1e-14 * direct.max(1e-300), "x = {x}");
        }
    }

    #[test]
    fn pdf_is_clamped_and_validates_input() {
        let m = MixtureDensity::single(uni(0.0, 1.0));
        assert_eq!(m.pdf(&[1e6]).unwrap(), PDF_FLOOR);
        assert!(matches!(m.pdf(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(m.pdf(&[f64::INFINITY]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn coefficient_validation() {
        assert!(MixtureDensity::new(vec![0.5, 0.4], vec![uni(0.0, 1.0), uni(1.0, 1.0)]).is_err());
        assert!(MixtureDensity::new(vec![1.0, 0.0], vec![uni(0.0, 1.0), uni(1.0, 1.0)]).is_err());
        assert!(MixtureDensity::new(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn combine_is_weight_proportional() {
        let a = MixtureDensity::single(uni(0.0, 1.0));
        let b = MixtureDensity::single(uni(2.0, 0.5));
        let m = MixtureDensity::combine(0.3, &a, 0.2, &b).unwrap();
        for x in [-1.0, 0.5, 2.2] {
            let want = 0.6 * a.pdf(&[x]).unwrap() + 0.4 * b.pdf(&[x]).unwrap();
            assert!((m.pdf(&[x]).unwrap() - want).abs() < 1e-15);
        }
    }

    #[test]
    fn sample_mean_near_zero() {
        let m = MixtureDensity::single(GaussianComponent::spherical(vec![0.0, 0.0], 1.0).unwrap());
        let ds = m.sample(100_000, 1).unwrap();
        for v in ds.mean() {
            assert!(v.abs() < 0.02);
        }
    }

    #[test]
    fn sample_respects_weights() {
        let m = MixtureDensity::new(vec![0.9, 0.1], vec![uni(0.0, 1.0), uni(5.0, 1.0)]).unwrap();
        let (_, labels) = m.sample_labeled(100_000, 7).unwrap();
        let frac = labels.iter().filter(|&&k| k == 0).count() as f64 / 1e5;
        assert!((frac - 0.9).abs() < 0.01);
    }

    #[test]
    fn single_draw_is_finite_and_seeded() {
        let m = scenario_a();
        let a = m.sample(1, 42).unwrap();
        assert_eq!(a.n_rows(), 1);
        assert!(a.row(0)[0].is_finite());
        assert_eq!(a, m.sample(1, 42).unwrap());
        assert!(m.sample(0, 1).is_err());
    }

    #[test]
    fn map_assign_ties_and_posteriors() {
        let m = MixtureDensity::new(vec![0.5, 0.5], vec![uni(-5.0, 1.0), uni(5.0, 1.0)]).unwrap();
        let ds = Dataset::from_rows(&[[-5.0], [0.0], [5.0]]).unwrap();
        assert_eq!(m.map_assign(&ds).unwrap(), vec![0, 0, 1]);
        let same = MixtureDensity::new(vec![0.5, 0.5], vec![uni(0.0, 1.0), uni(0.0, 1.0)]).unwrap();
        assert_eq!(same.map_assign(&ds).unwrap(), vec![0, 0, 0]);
    }

    #[test]
    fn map_assign_agrees_with_normalized_posterior() {
        let m = scenario_a();
        let pts = m.sample(100, 9).unwrap();
        let labels = m.map_assign(&pts).unwrap();
        for (x, &l) in pts.rows().zip(&labels) {
            let r = m.responsibilities(x).unwrap();
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(argmax_first(&r), l);
        }
    }

    #[test]
    fn subcluster_validation() {
        let d = MixtureDensity::single(uni(0.0, 1.0));
        assert!(Subcluster::new(0, 0.0, d.clone(), BTreeSet::from([0])).is_err());
        assert!(Subcluster::new(0, 0.5, d.clone(), BTreeSet::new()).is_err());
        assert!(Subcluster::new(0, 1.0, d, BTreeSet::from([0])).is_ok());
    }
}
