//! Density functionals: entropy, KL information, Bhattacharyya coefficient and
//! Bayes overlap, by adaptive quadrature (d ≤ 2) or importance sampling.

mod closed;
pub mod quadrature;
mod sampling;

use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::mixture::{log_sum_exp, GaussianComponent, MixtureDensity};

pub use closed::{gauss_bhat_closed, gauss_kl_closed};
pub use sampling::SampleBank;

use quadrature::{normalize_breaks, Tolerance};

const ABS_FLOOR: f64 = 1e-13;
const INNER_SLACK: f64 = 1e-2;
const BREAK_SIGMAS: [f64; 7] = [0.0, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntegrationMode {
    /// Quadrature up to two dimensions, importance sampling above.
    Auto,
    Quadrature,
    Importance,
}

impl fmt::Display for IntegrationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IntegrationMode::Auto => "auto",
            IntegrationMode::Quadrature => "quadrature",
            IntegrationMode::Importance => "importance",
        })
    }
}

impl FromStr for IntegrationMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "quadrature" | "quad" => Ok(Self::Quadrature),
            "importance" | "is" => Ok(Self::Importance),
            other => Err(Error::InvalidParameter(format!("unknown integration mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrationContext {
    pub mode: IntegrationMode,
    pub quad_rel_tol: f64,
    pub support_sigmas: f64,
    pub is_samples: usize,
    pub seed: u64,
}

impl Default for IntegrationContext {
    fn default() -> Self {
        Self { mode: IntegrationMode::Auto, quad_rel_tol: 1e-9, support_sigmas: 12.0, is_samples: 100_000, seed: 0 }
    }
}

impl IntegrationContext {
    pub fn quadrature() -> Self {
        Self { mode: IntegrationMode::Quadrature, ..Self::default() }
    }

    pub fn importance(is_samples: usize, seed: u64) -> Self {
        Self { mode: IntegrationMode::Importance, is_samples, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_samples < 1000 {
            return Err(Error::InvalidParameter(format!("is_samples = {} is below 1000", self.is_samples)));
        }
        if !(self.support_sigmas >= 6.0) {
            return Err(Error::InvalidParameter(format!("support_sigmas = {} is below 6", self.support_sigmas)));
        }
        if !(self.quad_rel_tol > 0.0 && self.quad_rel_tol < 1.0) {
            return Err(Error::InvalidParameter(format!("quad_rel_tol = {} outside (0, 1)", self.quad_rel_tol)));
        }
        Ok(())
    }

    /// The concrete method used in dimension `d`.
    pub fn resolve(&self, d: usize) -> IntegrationMode {
        match self.mode {
            IntegrationMode::Auto if d <= 2 => IntegrationMode::Quadrature,
            IntegrationMode::Auto => IntegrationMode::Importance,
            m => m,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FunctionalEstimate {
    pub value: f64,
    /// Monte Carlo standard error; zero for quadrature.
    pub std_error: f64,
    pub mode: IntegrationMode,
}

/// Evaluates integrals of functions of operand log-densities.
///
/// Integrands receive the operands' log-densities at a point and a shift `s`,
/// and return `h(x)·exp(−s)`. Quadrature passes `s = 0`; importance sampling
/// passes the proposal log-density, so ratios are formed in log space.
#[derive(Clone, Debug)]
pub struct Integrator {
    ctx: IntegrationContext,
    proposal: Option<MixtureDensity>,
    bank: OnceLock<Arc<SampleBank>>,
}

impl Integrator {
    pub fn new(ctx: IntegrationContext) -> Result<Self> {
        ctx.validate()?;
        Ok(Self { ctx, proposal: None, bank: OnceLock::new() })
    }

    /// Importance sampling draws from `proposal`, shared across every call.
    pub fn with_proposal(ctx: IntegrationContext, proposal: &MixtureDensity) -> Result<Self> {
        ctx.validate()?;
        Ok(Self { ctx, proposal: Some(proposal.clone()), bank: OnceLock::new() })
    }

    pub fn context(&self) -> &IntegrationContext {
        &self.ctx
    }

    fn shared_bank(&self) -> Result<Option<Arc<SampleBank>>> {
        let Some(p) = &self.proposal else { return Ok(None) };
        if let Some(b) = self.bank.get() {
            return Ok(Some(Arc::clone(b)));
        }
        let bank = Arc::new(SampleBank::new(p, self.ctx.is_samples, self.ctx.seed)?);
        Ok(Some(Arc::clone(self.bank.get_or_init(|| bank))))
    }

    pub fn integrate<F>(&self, operands: &[&MixtureDensity], f: F) -> Result<FunctionalEstimate>
    where
        F: Fn(&[f64], f64) -> f64,
    {
        let d = operands
            .first()
            .ok_or_else(|| Error::InvalidParameter("no operands".into()))?
            .dim();
        if let Some(bad) = operands.iter().find(|o| o.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.dim() });
        }
        match self.ctx.resolve(d) {
            IntegrationMode::Importance => self.importance(operands, f),
            _ => match d {
                1 => self.quad_1d(operands, f),
                2 => self.quad_2d(operands, f),
                _ => Err(Error::InvalidParameter(format!("quadrature is limited to d ≤ 2 (got d = {d})"))),
            },
        }
    }

    fn importance<F>(&self, operands: &[&MixtureDensity], f: F) -> Result<FunctionalEstimate>
    where
        F: Fn(&[f64], f64) -> f64,
    {
        let bank = match self.shared_bank()? {
            Some(b) if b.dim() == operands[0].dim() => b,
            _ => {
                let share = 1.0 / operands.len() as f64;
                let mut coefs = Vec::new();
                let mut comps = Vec::new();
                for o in operands {
                    for (c, g) in o.terms() {
                        coefs.push(c * share);
                        comps.push(g.clone());
                    }
                }
                let proposal = MixtureDensity::new(coefs, comps)?;
                Arc::new(SampleBank::new(&proposal, self.ctx.is_samples, self.ctx.seed)?)
            }
        };
        let logs: Vec<Arc<Vec<f64>>> = operands.iter().map(|o| bank.log_density(o)).collect();
        let m = bank.len();
        let mut buf = vec![0.0; operands.len()];
        let (mut mean, mut m2) = (0.0, 0.0);
        for (i, &lq) in bank.log_q().iter().enumerate() {
            for (b, l) in buf.iter_mut().zip(&logs) {
                *b = l[i];
            }
            let v = f(&buf, lq);
            if !v.is_finite() {
                return Err(Error::Integration { partial: mean, error_bound: f64::INFINITY });
            }
            let delta = v - mean;
            mean += delta / (i + 1) as f64;
            m2 += delta * (v - mean);
        }
        let sd = (m2 / (m - 1) as f64).max(0.0).sqrt();
        Ok(FunctionalEstimate { value: mean, std_error: sd / (m as f64).sqrt(), mode: IntegrationMode::Importance })
    }

    fn tolerance(&self, max_segments: usize) -> Tolerance {
        Tolerance { rel: self.ctx.quad_rel_tol, abs: ABS_FLOOR, max_segments }
    }

    fn breakpoints(&self, centers_sds: impl Iterator<Item = (f64, f64)>) -> Vec<f64> {
        let k = self.ctx.support_sigmas;
        let mut pts = Vec::new();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (m, s) in centers_sds {
            lo = lo.min(m - k * s);
            hi = hi.max(m + k * s);
            for &t in BREAK_SIGMAS.iter().filter(|&&t| t < k) {
                pts.push(m - t * s);
                pts.push(m + t * s);
            }
        }
        normalize_breaks(pts, lo, hi)
    }

    fn quad_1d<F>(&self, operands: &[&MixtureDensity], f: F) -> Result<FunctionalEstimate>
    where
        F: Fn(&[f64], f64) -> f64,
    {
        let breaks = self.breakpoints(
            operands.iter().flat_map(|o| o.components().iter().map(|c| c.marginal(0))),
        );
        let mut buf = vec![0.0; operands.len()];
        let r = quadrature::integrate(
            |x| {
                let p = [x];
                for (b, o) in buf.iter_mut().zip(operands) {
                    *b = o.log_pdf(&p);
                }
                f(&buf, 0.0)
            },
            &breaks,
            self.tolerance(20_000),
        )?;
        Ok(FunctionalEstimate { value: r.value, std_error: 0.0, mode: IntegrationMode::Quadrature })
    }

    fn quad_2d<F>(&self, operands: &[&MixtureDensity], f: F) -> Result<FunctionalEstimate>
    where
        F: Fn(&[f64], f64) -> f64,
    {
        struct Cond {
            mx: f64,
            sx: f64,
            my: f64,
            slope: f64,
            sy: f64,
        }
        let conds: Vec<Cond> = operands
            .iter()
            .flat_map(|o| o.components().iter())
            .map(|c: &GaussianComponent| {
                let s = c.cov();
                let (a, b, cc) = (s[(0, 0)], s[(0, 1)], s[(1, 1)]);
                Cond {
                    mx: c.mean()[0],
                    sx: a.sqrt(),
                    my: c.mean()[1],
                    slope: b / a,
                    sy: (cc - b * b / a).max(0.0).sqrt(),
                }
            })
            .collect();
        let outer_breaks = self.breakpoints(conds.iter().map(|c| (c.mx, c.sx)));
        let k = self.ctx.support_sigmas;
        let inner_tol = Tolerance { rel: 0.1 * self.ctx.quad_rel_tol, abs: 1e-3 * ABS_FLOOR, max_segments: 4000 };
        let mut failure: Option<Error> = None;
        let mut buf = vec![0.0; operands.len()];
        let r = quadrature::integrate(
            |x| {
                if failure.is_some() {
                    return 0.0;
                }
                let inner_breaks = self.breakpoints(
                    conds
                        .iter()
                        .filter(|c| (x - c.mx).abs() <= k * c.sx)
                        .map(|c| (c.my + c.slope * (x - c.mx), c.sy)),
                );
                let r = quadrature::integrate_best_effort(
                    |y| {
                        let p = [x, y];
                        for (b, o) in buf.iter_mut().zip(operands) {
                            *b = o.log_pdf(&p);
                        }
                        f(&buf, 0.0)
                    },
                    &inner_breaks,
                    inner_tol,
                );
                match r {
                    Ok((r, true)) => r.value,
                    // A slice that stalls at the roundoff level still meets the outer floor.
                    Ok((r, false)) if r.error <= INNER_SLACK * ABS_FLOOR => r.value,
                    Ok((r, false)) => {
                        failure = Some(Error::Integration { partial: r.value, error_bound: r.error });
                        0.0
                    }
                    Err(e) => {
                        failure = Some(e);
                        0.0
                    }
                }
            },
            &outer_breaks,
            self.tolerance(8000),
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(FunctionalEstimate { value: r?.value, std_error: 0.0, mode: IntegrationMode::Quadrature })
    }

    /// H(scale·mix) = −∫ g ln g for the unnormalized g = scale·mix.
    pub fn entropy(&self, scale: f64, mix: &MixtureDensity) -> Result<FunctionalEstimate> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::InvalidParameter(format!("entropy scale {scale} must be positive")));
        }
        let ls = scale.ln();
        self.integrate(&[mix], |l, s| {
            let lg = ls + l[0];
            -(lg - s).exp() * lg
        })
    }

    /// I(p ‖ q) = ∫ p ln(p/q).
    pub fn kl_information(&self, p: &MixtureDensity, q: &MixtureDensity) -> Result<FunctionalEstimate> {
        self.integrate(&[p, q], |l, s| (l[0] - s).exp() * (l[0] - l[1]))
    }

    /// ρ(p, q) = ∫ √(p q).
    pub fn bhattacharyya_coeff(&self, p: &MixtureDensity, q: &MixtureDensity) -> Result<FunctionalEstimate> {
        self.integrate(&[p, q], |l, s| (0.5 * (l[0] + l[1]) - s).exp())
    }

    /// ∫ min(w_p·p, w_q·q) for weights summing to one.
    pub fn bayes_overlap(&self, wp: f64, p: &MixtureDensity, wq: f64, q: &MixtureDensity) -> Result<FunctionalEstimate> {
        if !(wp > 0.0 && wq > 0.0) || (wp + wq - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!("overlap weights ({wp}, {wq}) must be positive and sum to 1")));
        }
        let (lp, lq) = (wp.ln(), wq.ln());
        self.integrate(&[p, q], |l, s| ((lp + l[0]).min(lq + l[1]) - s).exp())
    }
}

pub fn entropy_functional(scale: f64, mix: &MixtureDensity, ctx: &IntegrationContext) -> Result<FunctionalEstimate> {
    Integrator::new(*ctx)?.entropy(scale, mix)
}

pub fn kl_information(p: &MixtureDensity, q: &MixtureDensity, ctx: &IntegrationContext) -> Result<FunctionalEstimate> {
    Integrator::new(*ctx)?.kl_information(p, q)
}

pub fn bhattacharyya_coeff(
    p: &MixtureDensity,
    q: &MixtureDensity,
    ctx: &IntegrationContext,
) -> Result<FunctionalEstimate> {
    Integrator::new(*ctx)?.bhattacharyya_coeff(p, q)
}

pub fn bayes_overlap(
    wp: (f64, &MixtureDensity),
    wq: (f64, &MixtureDensity),
    ctx: &IntegrationContext,
) -> Result<FunctionalEstimate> {
    Integrator::new(*ctx)?.bayes_overlap(wp.0, wp.1, wq.0, wq.1)
}

/// `ln(e^a + e^b)` for two log-values.
#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    log_sum_exp([a, b])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uni(m: f64, sd: f64) -> MixtureDensity {
        MixtureDensity::single(GaussianComponent::univariate(m, sd).unwrap())
    }

    fn quad() -> IntegrationContext {
        IntegrationContext::quadrature()
    }

    const H_STD: f64 = 1.418_938_533_204_672_7;

    #[test]
    fn entropy_of_standard_normal() {
        let h = entropy_functional(1.0, &uni(0.0, 1.0), &quad()).unwrap();
        assert!((h.value - H_STD).abs() < 1e-9);
        assert_eq!(h.std_error, 0.0);
        assert_eq!(h.mode, IntegrationMode::Quadrature);
        let shifted = entropy_functional(1.0, &uni(37.0, 1.0), &quad()).unwrap();
        assert!((shifted.value - h.value).abs() < 1e-10);
    }

    #[test]
    fn entropy_scaling_identity() {
        let p = MixtureDensity::new(
            vec![0.3, 0.7],
            vec![GaussianComponent::univariate(-1.0, 0.5).unwrap(), GaussianComponent::univariate(2.0, 1.5).unwrap()],
        )
        .unwrap();
        let h1 = entropy_functional(1.0, &p, &quad()).unwrap().value;
        for c in [0.1, 0.5, 2.0] {
            let hc = entropy_functional(c, &p, &quad()).unwrap().value;
            assert!((hc - (c * h1 - c * f64::ln(c))).abs() < 1e-7, "c = {c}");
        }
        let half = entropy_functional(0.5, &uni(0.0, 1.0), &quad()).unwrap().value;
        assert!((half - 1.056_042_856_882_309).abs() < 1e-9);
        assert!(entropy_functional(0.0, &p, &quad()).is_err());
    }

    #[test]
    fn kl_reference_values() {
        let z = uni(0.0, 1.0);
        assert!(kl_information(&z, &z, &quad()).unwrap().value.abs() < 1e-12);
        assert!((kl_information(&z, &uni(3.0, 1.0), &quad()).unwrap().value - 4.5).abs() < 1e-8);
        assert!((kl_information(&z, &uni(0.0, 2.0), &quad()).unwrap().value - 0.318_147_180_559_945_3).abs() < 1e-9);
    }

    #[test]
    fn bhattacharyya_reference_values() {
        let z = uni(0.0, 1.0);
        assert!((bhattacharyya_coeff(&z, &z, &quad()).unwrap().value - 1.0).abs() < 1e-12);
        let r = bhattacharyya_coeff(&z, &uni(3.0, 1.0), &quad()).unwrap().value;
        assert!((r - (-1.125f64).exp()).abs() < 1e-10);
        assert!(bhattacharyya_coeff(&z, &uni(40.0, 1.0), &quad()).unwrap().value < 1e-10);
    }

    #[test]
    fn bayes_overlap_reference_values() {
        let z = uni(0.0, 1.0);
        assert!((bayes_overlap((0.5, &z), (0.5, &z), &quad()).unwrap().value - 0.5).abs() < 1e-12);
        assert!(bayes_overlap((0.5, &z), (0.5, &uni(40.0, 1.0)), &quad()).unwrap().value < 1e-12);
        let v = bayes_overlap((0.5, &z), (0.5, &uni(3.0, 1.0)), &quad()).unwrap().value;
        assert!((v - 0.066_807_201_268_858_07).abs() < 1e-9);
        assert!(bayes_overlap((0.6, &z), (0.6, &z), &quad()).is_err());
    }

    #[test]
    fn two_dimensional_normalization() {
        let c = GaussianComponent::from_parts(vec![1.0, -2.0], &[2.0, 0.9, 0.9, 0.7]).unwrap();
        let c2 = GaussianComponent::from_parts(vec![-3.0, 0.5], &[0.3, -0.1, -0.1, 1.5]).unwrap();
        let p = MixtureDensity::new(vec![0.4, 0.6], vec![c.clone(), c2]).unwrap();
        let it = Integrator::new(quad()).unwrap();
        let mass = it.integrate(&[&p], |l, s| (l[0] - s).exp()).unwrap();
        assert!((mass.value - 1.0).abs() < 1e-6);
        let single = MixtureDensity::single(c.clone());
        let h = it.entropy(1.0, &single).unwrap().value;
        let want = 0.5 * (2.0 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + c.log_det());
        assert!((h - want).abs() < 1e-8);
    }

    #[test]
    fn quadrature_refuses_three_dimensions() {
        let p = MixtureDensity::single(GaussianComponent::spherical(vec![0.0; 3], 1.0).unwrap());
        assert!(matches!(kl_information(&p, &p, &quad()), Err(Error::InvalidParameter(_))));
        let auto = kl_information(&p, &p, &IntegrationContext::default()).unwrap();
        assert_eq!(auto.mode, IntegrationMode::Importance);
        assert!(auto.value.abs() < 1e-12);
    }

    #[test]
    fn importance_sampling_tracks_closed_form() {
        let a = GaussianComponent::spherical(vec![0.0, 0.0, 0.0], 1.0).unwrap();
        let b = GaussianComponent::spherical(vec![1.0, 0.5, 0.0], 2.0).unwrap();
        let (pa, pb) = (MixtureDensity::single(a.clone()), MixtureDensity::single(b.clone()));
        let ctx = IntegrationContext::importance(100_000, 5);
        let kl = kl_information(&pa, &pb, &ctx).unwrap();
        let want = gauss_kl_closed(&a, &b).unwrap();
        assert!(kl.std_error > 0.0);
        assert!((kl.value - want).abs() < 4.0 * kl.std_error, "{kl:?} vs {want}");
        let rho = bhattacharyya_coeff(&pa, &pb, &ctx).unwrap();
        let want = (-gauss_bhat_closed(&a, &b).unwrap()).exp();
        assert!((rho.value - want).abs() < 4.0 * rho.std_error);
    }

    #[test]
    fn context_validation() {
        let mut c = IntegrationContext::default();
        c.is_samples = 10;
        assert!(Integrator::new(c).is_err());
        let mut c = IntegrationContext::default();
        c.support_sigmas = 3.0;
        assert!(Integrator::new(c).is_err());
        assert_eq!("is".parse::<IntegrationMode>().unwrap(), IntegrationMode::Importance);
        assert!("simpson".parse::<IntegrationMode>().is_err());
    }
}
