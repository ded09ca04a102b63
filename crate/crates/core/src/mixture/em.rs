use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::density::MixtureDensity;
use super::gaussian::GaussianComponent;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

const EMPTY_MASS: f64 = 1e-10;
const MAX_RESCUES: usize = 3;
/// Relative responsibilities below e^-50 are dropped as below double resolution.
const NEGLIGIBLE_LOG: f64 = -50.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmConfig {
    pub max_iter: usize,
    pub reps: usize,
    /// Relative log-likelihood change that ends a run.
    pub tol: f64,
    pub ridge: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { max_iter: 1000, reps: 10, tol: 1e-6, ridge: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Criterion {
    Bic,
    Aic,
}

impl Criterion {
    pub fn name(self) -> &'static str {
        match self {
            Criterion::Bic => "bic",
            Criterion::Aic => "aic",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bic" => Ok(Criterion::Bic),
            "aic" => Ok(Criterion::Aic),
            other => Err(Error::InvalidParameter(format!("unknown criterion `{other}`"))),
        }
    }
}

/// A fitted Gaussian mixture together with its selection diagnostics.
#[derive(Clone, Debug)]
pub struct FittedModel {
    pub mixture: MixtureDensity,
    pub log_likelihood: f64,
    pub n_params: usize,
    pub n_obs: usize,
    /// K → (BIC, AIC) for every K that was fitted.
    pub criterion_scores: BTreeMap<usize, (f64, f64)>,
    pub map_labels: Vec<usize>,
    pub iterations: usize,
    /// Log-likelihood after each E-step of the winning repetition.
    pub ll_trace: Vec<f64>,
}

impl FittedModel {
    pub fn k(&self) -> usize {
        self.mixture.len()
    }

    pub fn bic(&self) -> f64 {
        bic(self.log_likelihood, self.n_params, self.n_obs)
    }

    pub fn aic(&self) -> f64 {
        aic(self.log_likelihood, self.n_params)
    }

    pub fn score(&self, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Bic => self.bic(),
            Criterion::Aic => self.aic(),
        }
    }
}

/// Free parameters of a full-covariance mixture.
pub fn n_params(k: usize, d: usize) -> usize {
    (k - 1) + k * d + k * d * (d + 1) / 2
}

pub fn bic(ll: f64, p: usize, n: usize) -> f64 {
    -2.0 * ll + p as f64 * (n as f64).ln()
}

pub fn aic(ll: f64, p: usize) -> f64 {
    -2.0 * ll + 2.0 * p as f64
}

struct RepOutcome {
    mixture: MixtureDensity,
    ll: f64,
    labels: Vec<usize>,
    iterations: usize,
    trace: Vec<f64>,
}

/// Best-of-`cfg.reps` EM fit with `k` components. Repetition `r` uses seed `seed + r`.
pub fn em_fit(data: &Dataset, k: usize, seed: u64, cfg: &EmConfig) -> Result<FittedModel> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if data.n_rows() <= k {
        return Err(Error::InvalidParameter(format!(
            "need more observations ({}) than components ({k})",
            data.n_rows()
        )));
    }
    if cfg.reps == 0 || cfg.max_iter == 0 {
        return Err(Error::InvalidParameter("EM needs reps ≥ 1 and max_iter ≥ 1".into()));
    }
    let mut best: Option<RepOutcome> = None;
    let mut errors = Vec::new();
    for rep in 0..cfg.reps {
        match em_rep(data, k, seed.wrapping_add(rep as u64), cfg) {
            Ok(out) => {
                if best.as_ref().map_or(true, |b| out.ll > b.ll) {
                    best = Some(out);
                }
            }
            Err(e) => errors.push(format!("rep {rep}: {e}")),
        }
    }
    let best = best.ok_or_else(|| Error::Em(format!("K = {k}: every repetition failed ({})", errors.join("; "))))?;
    let p = n_params(k, data.dim());
    let n = data.n_rows();
    Ok(FittedModel {
        criterion_scores: BTreeMap::from([(k, (bic(best.ll, p, n), aic(best.ll, p)))]),
        mixture: best.mixture,
        log_likelihood: best.ll,
        n_params: p,
        n_obs: n,
        map_labels: best.labels,
        iterations: best.iterations,
        ll_trace: best.trace,
    })
}

fn em_rep(data: &Dataset, k: usize, seed: u64, cfg: &EmConfig) -> Result<RepOutcome> {
    let n = data.n_rows();
    let d = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut base_cov = data.covariance();
    for i in 0..d {
        base_cov[i * d + i] += cfg.ridge;
    }
    let starts = index::sample(&mut rng, n, k).into_vec();
    let mut components = starts
        .iter()
        .map(|&i| GaussianComponent::from_parts(data.row(i).to_vec(), &base_cov))
        .collect::<Result<Vec<_>>>()?;
    let mut coefs = vec![1.0 / k as f64; k];

    let mut resp = vec![0.0; n * k];
    let mut labels = vec![0; n];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut rescues = 0;

    loop {
        // E-step.
        let log_coefs: Vec<f64> = coefs.iter().map(|c| c.ln()).collect();
        let mut ll = 0.0;
        for (i, x) in data.rows().enumerate() {
            let r = &mut resp[i * k..(i + 1) * k];
            let mut top = f64::NEG_INFINITY;
            for (j, ((slot, lc), c)) in r.iter_mut().zip(&log_coefs).zip(&components).enumerate() {
                *slot = lc + c.log_pdf(x);
                if *slot > top {
                    top = *slot;
                    labels[i] = j;
                }
            }
            if !top.is_finite() {
                return Err(Error::Em("log-likelihood became non-finite".into()));
            }
            let mut sum = 0.0;
            for v in r.iter_mut() {
                let t = *v - top;
                *v = if t < NEGLIGIBLE_LOG { 0.0 } else { t.exp() };
                sum += *v;
            }
            let inv = 1.0 / sum;
            for v in r.iter_mut() {
                *v *= inv;
            }
            ll += top + sum.ln();
        }
        if !ll.is_finite() {
            return Err(Error::Em("log-likelihood became non-finite".into()));
        }
        let converged = trace
            .last()
            .map_or(false, |&prev: &f64| (ll - prev).abs() <= cfg.tol * ll.abs().max(f64::MIN_POSITIVE));
        trace.push(ll);
        if converged || iterations >= cfg.max_iter {
            let mixture = MixtureDensity::new(coefs, components)?;
            return Ok(RepOutcome { mixture, ll, labels, iterations, trace });
        }

        // M-step.
        let mut mass = vec![0.0; k];
        let mut means = vec![0.0; k * d];
        for (i, x) in data.rows().enumerate() {
            for (j, &r) in resp[i * k..(i + 1) * k].iter().enumerate() {
                if r == 0.0 {
                    continue;
                }
                mass[j] += r;
                for (m, v) in means[j * d..(j + 1) * d].iter_mut().zip(x) {
                    *m += r * v;
                }
            }
        }
        for j in 0..k {
            let nk = mass[j].max(f64::MIN_POSITIVE);
            means[j * d..(j + 1) * d].iter_mut().for_each(|m| *m /= nk);
        }
        let mut scatter = vec![0.0; k * d * d];
        let mut dev = vec![0.0; d];
        for (i, x) in data.rows().enumerate() {
            for (j, &r) in resp[i * k..(i + 1) * k].iter().enumerate() {
                if r == 0.0 {
                    continue;
                }
                for a in 0..d {
                    dev[a] = x[a] - means[j * d + a];
                }
                let s = &mut scatter[j * d * d..(j + 1) * d * d];
                for a in 0..d {
                    let da = r * dev[a];
                    for b in 0..=a {
                        s[a * d + b] += da * dev[b];
                    }
                }
            }
        }
        let mut next = Vec::with_capacity(k);
        for j in 0..k {
            let nk = mass[j];
            if nk < EMPTY_MASS {
                rescues += 1;
                if rescues > MAX_RESCUES {
                    return Err(Error::Em(format!("component {j} emptied after {MAX_RESCUES} rescues")));
                }
                let i = rng.gen_range(0..n);
                next.push(GaussianComponent::from_parts(data.row(i).to_vec(), &base_cov)?);
                mass[j] = 1.0;
                continue;
            }
            let s = &scatter[j * d * d..(j + 1) * d * d];
            let mut cov = DMatrix::<f64>::zeros(d, d);
            for a in 0..d {
                for b in 0..a {
                    cov[(a, b)] = s[a * d + b] / nk;
                    cov[(b, a)] = cov[(a, b)];
                }
                cov[(a, a)] = s[a * d + a] / nk + cfg.ridge;
            }
            let comp = GaussianComponent::new(means[j * d..(j + 1) * d].to_vec(), cov)
                .map_err(|e| Error::Em(format!("component {j} degenerated: {e}")))?;
            next.push(comp);
        }
        let total: f64 = mass.iter().sum();
        coefs = mass.iter().map(|m| m / total).collect();
        components = next;
        iterations += 1;
    }
}

/// Fits every K in `k_min..=k_max` and keeps the one minimizing `criterion`
/// (ties go to the smaller K).
pub fn select_model(
    data: &Dataset,
    k_min: usize,
    k_max: usize,
    criterion: Criterion,
    seed: u64,
    cfg: &EmConfig,
) -> Result<FittedModel> {
    if k_min == 0 || k_min > k_max {
        return Err(Error::InvalidParameter(format!("invalid K range {k_min}..={k_max}")));
    }
    let fits: Vec<(usize, Result<FittedModel>)> =
        (k_min..=k_max).into_par_iter().map(|k| (k, em_fit(data, k, seed, cfg))).collect();
    let mut scores = BTreeMap::new();
    let mut best: Option<FittedModel> = None;
    let mut errors = Vec::new();
    for (k, fit) in fits {
        match fit {
            Ok(m) => {
                scores.insert(k, (m.bic(), m.aic()));
                if best.as_ref().map_or(true, |b| m.score(criterion) < b.score(criterion)) {
                    best = Some(m);
                }
            }
            Err(e) => errors.push(format!("K = {k}: {e}")),
        }
    }
    let mut best = best.ok_or_else(|| Error::Selection(errors.join("; ")))?;
    best.criterion_scores = scores;
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_blobs(n_each: usize, sep: f64, seed: u64) -> Dataset {
        let g = |m| GaussianComponent::univariate(m, 1.0).unwrap();
        let mix = MixtureDensity::new(vec![0.5, 0.5], vec![g(-sep), g(sep)]).unwrap();
        mix.sample(2 * n_each, seed).unwrap()
    }

    #[test]
    fn parameter_count() {
        assert_eq!(n_params(1, 1), 2);
        assert_eq!(n_params(4, 2), 3 + 8 + 12);
        assert_eq!(n_params(3, 3), 2 + 9 + 18);
    }

    #[test]
    fn recovers_two_separated_components() {
        let ds = two_blobs(200, 5.0, 11);
        let fit = em_fit(&ds, 2, 0, &EmConfig::default()).unwrap();
        let mut means: Vec<f64> = fit.mixture.components().iter().map(|c| c.mean()[0]).collect();
        means.sort_by(f64::total_cmp);
        assert!((means[0] + 5.0).abs() < 0.3 && (means[1] - 5.0).abs() < 0.3);
        for c in fit.mixture.coefs() {
            assert!((c - 0.5).abs() < 0.1);
        }
    }

    #[test]
    fn single_component_is_sample_moments() {
        let mix = MixtureDensity::single(GaussianComponent::spherical(vec![0.0, 0.0], 1.0).unwrap());
        let ds = mix.sample(300, 5).unwrap();
        let cfg = EmConfig::default();
        let fit = em_fit(&ds, 1, 3, &cfg).unwrap();
        assert!(fit.iterations <= 2);
        let c = &fit.mixture.components()[0];
        let (m, s) = (ds.mean(), ds.covariance());
        for i in 0..2 {
            assert!((c.mean()[i] - m[i]).abs() < 1e-12);
            assert!(c.mean()[i].abs() < 0.2);
            for j in 0..2 {
                let ridge = if i == j { cfg.ridge } else { 0.0 };
                assert!((c.cov()[(i, j)] - s[i * 2 + j] - ridge).abs() < 1e-12);
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((c.cov()[(i, j)] - target).abs() < 0.2);
            }
        }
    }

    #[test]
    fn log_likelihood_never_decreases() {
        let ds = two_blobs(150, 1.5, 2);
        let cfg = EmConfig { reps: 3, ..EmConfig::default() };
        for k in 1..=4 {
            let fit = em_fit(&ds, k, 17, &cfg).unwrap();
            for w in fit.ll_trace.windows(2) {
                assert!(w[1] >= w[0] - 1e-8 * w[0].abs().max(1.0), "K = {k}: {w:?}");
            }
        }
    }

    #[test]
    fn bic_picks_two_for_two_blobs() {
        let ds = two_blobs(150, 10.0, 4);
        let fit = select_model(&ds, 1, 5, Criterion::Bic, 0, &EmConfig::default()).unwrap();
        assert_eq!(fit.k(), 2);
        let s = &fit.criterion_scores;
        assert!(s[&2].0 < s[&1].0 && s[&2].0 < s[&3].0);
        assert_eq!(s.len(), 5);
    }

    #[test]
    fn selection_is_deterministic() {
        let ds = two_blobs(80, 2.0, 8);
        let cfg = EmConfig { reps: 3, ..EmConfig::default() };
        let a = select_model(&ds, 1, 4, Criterion::Aic, 9, &cfg).unwrap();
        let b = select_model(&ds, 1, 4, Criterion::Aic, 9, &cfg).unwrap();
        assert_eq!(a.mixture, b.mixture);
        assert_eq!(a.map_labels, b.map_labels);
    }

    #[test]
    fn rejects_bad_arguments() {
        let ds = two_blobs(2, 1.0, 0);
        assert!(em_fit(&ds, 4, 0, &EmConfig::default()).is_err());
        assert!(em_fit(&ds, 0, 0, &EmConfig::default()).is_err());
        assert!(select_model(&ds, 3, 2, Criterion::Bic, 0, &EmConfig::default()).is_err());
        assert!(matches!(
            select_model(&ds, 4, 6, Criterion::Bic, 0, &EmConfig::default()),
            Err(Error::Selection(_))
        ));
    }

    #[test]
    fn map_labels_match_model_assignment() {
        let ds = two_blobs(100, 3.0, 1);
        let fit = em_fit(&ds, 2, 0, &EmConfig::default()).unwrap();
        assert_eq!(fit.map_labels, fit.mixture.map_assign(&ds).unwrap());
    }
}
