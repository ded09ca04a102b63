use serde::Serialize;

use crate::dissim::{evaluate_estimate, Measure};
use crate::error::Result;
use crate::functional::{IntegrationContext, Integrator};
use crate::mixture::{GaussianComponent, MixtureDensity, Subcluster};

/// One univariate scenario: (mean, standard deviation, weight) per component.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioB {
    pub label: char,
    pub components: Vec<(f64, f64, f64)>,
}

impl ScenarioB {
    pub fn all() -> Vec<ScenarioB> {
        let third = 1.0 / 3.0;
        let ninth = 1.0 / 9.0;
        vec![
            ScenarioB { label: 'a', components: vec![(-3.0, 1.0, 0.475), (0.0, 1.0, 0.475), (3.1, 1.0, 0.05)] },
            ScenarioB { label: 'b', components: vec![(-1.0, 1.0, 0.505), (4.0, 1.0, 0.490), (10.0, 0.5, 0.005)] },
            ScenarioB {
                label: 'c',
                components: vec![(-1.5, 1.0, 0.332), (1.5, 1.0, 0.332), (-15.0, 15.0, 0.168), (15.0, 15.0, 0.168)],
            },
            ScenarioB { label: 'd', components: vec![(0.0, 1.0, third), (3.0, 1.0, third), (3.0, 0.2, third)] },
            ScenarioB {
                label: 'e',
                components: vec![(-2.9, 1.0, 0.4), (0.0, 1.0, 0.4), (2.5, 0.24, 0.1), (2.5, 0.24, 0.1)],
            },
            ScenarioB {
                label: 'f',
                components: vec![(-4.0, 0.75, 2.0 / 3.0), (4.0, 0.75, ninth), (6.0, 0.75, ninth), (8.0, 0.75, ninth)],
            },
        ]
    }

    pub fn get(label: char) -> Option<ScenarioB> {
        Self::all().into_iter().find(|s| s.label == label)
    }

    pub fn gaussian(&self, i: usize) -> GaussianComponent {
        let (m, sd, _) = self.components[i];
        GaussianComponent::univariate(m, sd).expect("scenario parameters are valid")
    }

    /// Component `i` as a weighted subcluster with id `i`.
    pub fn subcluster(&self, i: usize) -> Subcluster {
        Subcluster::gaussian(i as u32, self.components[i].2, self.gaussian(i)).expect("scenario parameters are valid")
    }

    pub fn mixture(&self) -> MixtureDensity {
        MixtureDensity::new(
            self.components.iter().map(|c| c.2).collect(),
            (0..self.components.len()).map(|i| self.gaussian(i)).collect(),
        )
        .expect("scenario parameters are valid")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ordering {
    pub label: &'static str,
    pub statement: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

const MARGIN: f64 = 1e-6;

fn less(label: &'static str, statement: &'static str, lhs: f64, rhs: f64) -> Ordering {
    Ordering { label, statement, lhs, rhs, holds: rhs - lhs > MARGIN }
}

/// The stated inequality for every scenario, each with a strict margin of 1e−6.
pub fn scenario_orderings(ctx: &IntegrationContext) -> Result<Vec<Ordering>> {
    let it = Integrator::new(IntegrationContext { mode: crate::functional::IntegrationMode::Quadrature, ..*ctx })?;
    let sc = |l| ScenarioB::get(l).expect("bundled scenario");
    let d = |m: Measure, s: &ScenarioB, i: usize, j: usize| -> Result<f64> {
        Ok(evaluate_estimate(m, &s.subcluster(i), &s.subcluster(j), &it)?.value)
    };
    let single = |s: &ScenarioB, i: usize| MixtureDensity::single(s.gaussian(i));
    let mut out = Vec::new();

    let a = sc('a');
    let bd = |i, j| -> Result<f64> { Ok(-it.bhattacharyya_coeff(&single(&a, i), &single(&a, j))?.value.ln()) };
    out.push(less("a/bhat-distance", "d(φ1,φ2) < d(φ2,φ3)", bd(0, 1)?, bd(1, 2)?));
    let kl = |i, j| -> Result<f64> { Ok(it.kl_information(&single(&a, i), &single(&a, j))?.value) };
    out.push(less("a/kl", "I(φ1,φ2) < I(φ2,φ3)", kl(0, 1)?, kl(1, 2)?));

    let b = sc('b');
    out.push(less("b/se", "SE(φ1,φ2) < SE(φ2,φ3)", d(Measure::Se, &b, 0, 1)?, d(Measure::Se, &b, 1, 2)?));
    out.push(less("b/err", "Err(φ1,φ2) < Err(φ2,φ3)", d(Measure::Err, &b, 0, 1)?, d(Measure::Err, &b, 1, 2)?));

    let c = sc('c');
    let noise_weight = c.components[2].2 + c.components[3].2;
    let noise = Subcluster::new(
        2,
        noise_weight,
        MixtureDensity::new(
            vec![c.components[2].2 / noise_weight, c.components[3].2 / noise_weight],
            vec![c.gaussian(2), c.gaussian(3)],
        )?,
        [2, 3].into(),
    )?;
    let c_noise = evaluate_estimate(Measure::Bhat, &c.subcluster(0), &noise, &it)?.value;
    out.push(less("c/bhat", "Bhat(φ1,φ2) < Bhat(φ1,φ3+φ4)", d(Measure::Bhat, &c, 0, 1)?, c_noise));

    let dd = sc('d');
    out.push(less("d/kldiv", "KLdiv(φ1,φ2) < KLdiv(φ2,φ3)", d(Measure::KlDiv, &dd, 0, 1)?, d(Measure::KlDiv, &dd, 1, 2)?));
    out.push(less("d/klinf", "KLinf(φ2,φ3) < KLinf(φ1,φ2)", d(Measure::KlInf, &dd, 1, 2)?, d(Measure::KlInf, &dd, 0, 1)?));

    let e = sc('e');
    out.push(less("e/se", "SE(φ1,φ2) < SE(φ3,φ4)", d(Measure::Se, &e, 0, 1)?, d(Measure::Se, &e, 2, 3)?));

    let f = sc('f');
    out.push(less("f/js", "JS(φ1,φ2) < JS(φ2,φ3)", d(Measure::Js, &f, 0, 1)?, d(Measure::Js, &f, 1, 2)?));
    Ok(out)
}

/// Err (equal weights) and the Bhattacharyya distance between N(0,1) and N(θ,1)
/// for θ = 1..4, with whether each sequence is nondecreasing.
pub fn monotone_likelihood_ratio(ctx: &IntegrationContext) -> Result<Vec<(&'static str, Vec<f64>, bool)>> {
    let it = Integrator::new(IntegrationContext { mode: crate::functional::IntegrationMode::Quadrature, ..*ctx })?;
    let base = Subcluster::gaussian(0, 0.5, GaussianComponent::univariate(0.0, 1.0)?)?;
    let mut err = Vec::new();
    let mut bhat = Vec::new();
    for theta in [1.0, 2.0, 3.0, 4.0] {
        let other = Subcluster::gaussian(1, 0.5, GaussianComponent::univariate(theta, 1.0)?)?;
        err.push(evaluate_estimate(Measure::Err, &base, &other, &it)?.value);
        bhat.push(-it.bhattacharyya_coeff(&base.density, &other.density)?.value.ln());
    }
    let mono = |v: &[f64]| v.windows(2).all(|w| w[1] >= w[0]);
    let (me, mb) = (mono(&err), mono(&bhat));
    Ok(vec![("err", err, me), ("bhat-distance", bhat, mb)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for s in ScenarioB::all() {
            let t: f64 = s.components.iter().map(|c| c.2).sum();
            assert!((t - 1.0).abs() < 1e-12, "{}", s.label);
        }
        assert!(ScenarioB::get('z').is_none());
    }

    #[test]
    fn every_ordering_holds() {
        let o = scenario_orderings(&IntegrationContext::quadrature()).unwrap();
        assert_eq!(o.len(), 9);
        for x in &o {
            assert!(x.holds, "{x:?}");
        }
    }

    #[test]
    fn separation_monotonicity() {
        for (name, v, ok) in monotone_likelihood_ratio(&IntegrationContext::quadrature()).unwrap() {
            assert!(ok, "{name}: {v:?}");
        }
    }
}
