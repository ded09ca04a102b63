//! The seven density-based dissimilarity measures between weighted subclusters.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functional::{
    gauss_bhat_closed, gauss_kl_closed, log_add, FunctionalEstimate, IntegrationMode, Integrator,
};
use crate::mixture::Subcluster;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Measure {
    Se,
    Wse,
    Js,
    Err,
    Bhat,
    KlDiv,
    KlInf,
}

impl Measure {
    pub const ALL: [Measure; 7] =
        [Measure::Se, Measure::Wse, Measure::Js, Measure::Err, Measure::Bhat, Measure::KlDiv, Measure::KlInf];

    pub fn name(self) -> &'static str {
        match self {
            Measure::Se => "se",
            Measure::Wse => "wse",
            Measure::Js => "js",
            Measure::Err => "err",
            Measure::Bhat => "bhat",
            Measure::KlDiv => "kldiv",
            Measure::KlInf => "klinf",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Measure::Se => "SE",
            Measure::Wse => "wSE",
            Measure::Js => "JS",
            Measure::Err => "Err",
            Measure::Bhat => "Bhat",
            Measure::KlDiv => "KLdiv",
            Measure::KlInf => "KLinf",
        }
    }

    /// Analytic (min, max); infinite where the measure is unbounded.
    pub fn analytic_bounds(self) -> (f64, f64) {
        match self {
            Measure::Se | Measure::Wse => (f64::NEG_INFINITY, 0.0),
            Measure::Js => (0.0, std::f64::consts::LN_2),
            Measure::Err => (0.5, 1.0),
            Measure::Bhat | Measure::KlDiv | Measure::KlInf => (0.0, f64::INFINITY),
        }
    }

    fn has_closed_form(self) -> bool {
        matches!(self, Measure::Bhat | Measure::KlDiv | Measure::KlInf)
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown measure `{s}` (expected one of se, wse, js, err, bhat, kldiv, klinf)")))
    }
}

/// Two subclusters with their relative weights w_k = π_k/(π_k+π_l), w_l = π_l/(π_k+π_l).
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedPair {
    pub k: Subcluster,
    pub l: Subcluster,
    pub w_k: f64,
    pub w_l: f64,
}

impl WeightedPair {
    pub fn new(k: Subcluster, l: Subcluster) -> Result<Self> {
        if k.density.dim() != l.density.dim() {
            return Err(Error::DimensionMismatch { expected: k.density.dim(), got: l.density.dim() });
        }
        let (w_k, w_l) = relative_weights(k.weight, l.weight);
        Ok(Self { k, l, w_k, w_l })
    }

    pub fn swapped(&self) -> Self {
        Self { k: self.l.clone(), l: self.k.clone(), w_k: self.w_l, w_l: self.w_k }
    }
}

/// ln(1 + e^t).
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn relative_weights(a: f64, b: f64) -> (f64, f64) {
    let wa = a / (a + b);
    (wa, 1.0 - wa)
}

/// D(k, l) with the closed-form path for single-Gaussian pairs where available.
pub fn evaluate(measure: Measure, pair: &WeightedPair, integrator: &Integrator) -> Result<f64> {
    Ok(evaluate_estimate(measure, &pair.k, &pair.l, integrator)?.value)
}

pub fn evaluate_estimate(
    measure: Measure,
    k: &Subcluster,
    l: &Subcluster,
    integrator: &Integrator,
) -> Result<FunctionalEstimate> {
    let closed = measure.has_closed_form() && k.density.len() == 1 && l.density.len() == 1;
    let r = if closed { closed_form(measure, k, l) } else { numeric(measure, k, l, integrator) };
    r.map_err(|e| Error::Measure { measure: measure.name().into(), k: k.id, l: l.id, source: Box::new(e) })
}

/// D(k, l) always evaluated by integration, never by closed form.
pub fn evaluate_numeric(measure: Measure, k: &Subcluster, l: &Subcluster, integrator: &Integrator) -> Result<FunctionalEstimate> {
    numeric(measure, k, l, integrator)
        .map_err(|e| Error::Measure { measure: measure.name().into(), k: k.id, l: l.id, source: Box::new(e) })
}

fn closed_form(measure: Measure, k: &Subcluster, l: &Subcluster) -> Result<FunctionalEstimate> {
    let (a, b) = (&k.density.components()[0], &l.density.components()[0]);
    let pmin = k.weight.min(l.weight);
    let value = match measure {
        Measure::Bhat => pmin * gauss_bhat_closed(a, b)?,
        Measure::KlDiv => pmin * (gauss_kl_closed(a, b)? + gauss_kl_closed(b, a)?),
        Measure::KlInf => pmin * gauss_kl_closed(a, b)?.min(gauss_kl_closed(b, a)?),
        _ => unreachable!("no closed form for {measure}"),
    };
    Ok(FunctionalEstimate { value, std_error: 0.0, mode: IntegrationMode::Quadrature })
}

fn numeric(measure: Measure, k: &Subcluster, l: &Subcluster, it: &Integrator) -> Result<FunctionalEstimate> {
    let (p, q) = (&k.density, &l.density);
    let (pk, pl) = (k.weight, l.weight);
    let (wk, wl) = relative_weights(pk, pl);
    let pmin = pk.min(pl);
    let est = match measure {
        Measure::Se => {
            let (lpk, lpl) = (pk.ln(), pl.ln());
            // e^a (a − g) + e^b (b − g) with g = ln(e^a + e^b): no cancellation.
            it.integrate(&[p, q], |l, s| {
                let (a, b) = (lpk + l[0], lpl + l[1]);
                -(a - s).exp() * softplus(b - a) - (b - s).exp() * softplus(a - b)
            })?
        }
        Measure::Wse => {
            let tot = pk + pl;
            it.integrate(&[p, q], |l, s| {
                let g = log_add(l[0], l[1]);
                -tot * (g - s).exp() * g + pk * (l[0] - s).exp() * l[0] + pl * (l[1] - s).exp() * l[1]
            })?
        }
        Measure::Js => {
            let (lwk, lwl) = (wk.ln(), wl.ln());
            it.integrate(&[p, q], |l, s| {
                let t = l[1] - l[0];
                -wk * (l[0] - s).exp() * log_add(lwk, lwl + t) - wl * (l[1] - s).exp() * log_add(lwl, lwk - t)
            })?
        }
        Measure::Err => {
            let ov = it.bayes_overlap(wk, p, wl, q)?;
            FunctionalEstimate { value: 1.0 - ov.value, ..ov }
        }
        Measure::Bhat => {
            let rho = it.bhattacharyya_coeff(p, q)?;
            if !(rho.value > 0.0) {
                return Err(Error::Integration { partial: rho.value, error_bound: rho.std_error });
            }
            FunctionalEstimate {
                value: -pmin * rho.value.ln(),
                std_error: pmin * rho.std_error / rho.value,
                mode: rho.mode,
            }
        }
        Measure::KlDiv => {
            let j = it.integrate(&[p, q], |l, s| ((l[0] - s).exp() - (l[1] - s).exp()) * (l[0] - l[1]))?;
            FunctionalEstimate { value: pmin * j.value, std_error: pmin * j.std_error, mode: j.mode }
        }
        Measure::KlInf => {
            let a = it.kl_information(p, q)?;
            let b = it.kl_information(q, p)?;
            let m = if a.value <= b.value { a } else { b };
            FunctionalEstimate { value: pmin * m.value, std_error: pmin * m.std_error, mode: m.mode }
        }
    };
    if !est.value.is_finite() {
        return Err(Error::NonFinite(format!("{measure} value")));
    }
    Ok(est)
}

/// Symmetric matrix of D over every unordered pair of subclusters (by position).
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseMatrix {
    pub measure: Measure,
    pub ids: Vec<u32>,
    /// Row-major n × n; the diagonal is NaN.
    pub values: Vec<f64>,
}

impl PairwiseMatrix {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.len() + j]
    }

    /// Position pair (i < j) of the smallest value; lexicographic tie-break.
    pub fn argmin(&self) -> Option<(usize, usize, f64)> {
        argmin_upper(self.len(), |i, j| self.get(i, j))
    }
}

pub(crate) fn argmin_upper(n: usize, value: impl Fn(usize, usize) -> f64) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for i in 0..n {
        for j in i + 1..n {
            let v = value(i, j);
            if best.map_or(true, |(_, _, b)| v < b) {
                best = Some((i, j, v));
            }
        }
    }
    best
}

pub fn pairwise_matrix(subclusters: &[Subcluster], measure: Measure, integrator: &Integrator) -> Result<PairwiseMatrix> {
    let n = subclusters.len();
    if n < 2 {
        return Err(Error::InvalidParameter("pairwise matrix needs at least two subclusters".into()));
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let vals: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| Ok(evaluate_estimate(measure, &subclusters[i], &subclusters[j], integrator)?.value))
        .collect::<Result<_>>()?;
    let mut values = vec![f64::NAN; n * n];
    for (&(i, j), v) in pairs.iter().zip(vals) {
        values[i * n + j] = v;
        values[j * n + i] = v;
    }
    Ok(PairwiseMatrix { measure, ids: subclusters.iter().map(|s| s.id).collect(), values })
}
