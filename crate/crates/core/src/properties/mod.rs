//! Executable checks of the six data-independent properties of a dissimilarity
//! measure, the reference property table, and the univariate scenarios.

mod scenarios;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dissim::{evaluate_estimate, Measure, WeightedPair};
use crate::error::{Error, Result};
use crate::functional::{IntegrationContext, IntegrationMode, Integrator};
use crate::mixture::{GaussianComponent, Subcluster};

pub use scenarios::{monotone_likelihood_ratio, scenario_orderings, Ordering, ScenarioB};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum PropertyKind {
    Equality,
    Orthogonality,
    Symmetry,
    Outlier,
    Noise,
    Mode,
}

impl PropertyKind {
    /// Column order of the reference table.
    pub const ALL: [PropertyKind; 6] = [
        PropertyKind::Equality,
        PropertyKind::Orthogonality,
        PropertyKind::Symmetry,
        PropertyKind::Outlier,
        PropertyKind::Noise,
        PropertyKind::Mode,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PropertyKind::Equality => "equality",
            PropertyKind::Orthogonality => "orthogonality",
            PropertyKind::Symmetry => "symmetry",
            PropertyKind::Outlier => "outlier",
            PropertyKind::Noise => "noise",
            PropertyKind::Mode => "mode",
        }
    }
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PropertyKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PropertyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown property `{s}`")))
    }
}

/// Expected satisfaction pattern, rows in `Measure::ALL` order and columns in
/// `PropertyKind::ALL` order.
pub const EXPECTED_TABLE: [[bool; 6]; 7] = [
    [false, true, true, false, false, false],
    [false, false, true, false, false, false],
    [true, false, true, false, false, false],
    [true, true, true, false, false, true],
    [true, true, true, true, false, true],
    [true, true, true, true, false, true],
    [true, true, true, true, true, true],
];

pub fn expected(measure: Measure, property: PropertyKind) -> bool {
    let r = Measure::ALL.iter().position(|&m| m == measure).expect("measure listed");
    let c = PropertyKind::ALL.iter().position(|&p| p == property).expect("property listed");
    EXPECTED_TABLE[r][c]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum VerdictStatus {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TracePoint {
    pub series: String,
    pub parameter: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyVerdict {
    pub measure: &'static str,
    pub property: PropertyKind,
    pub status: VerdictStatus,
    pub limit_trace: Vec<TracePoint>,
    pub probe_inf: f64,
    pub probe_sup: f64,
    pub note: String,
}

impl PropertyVerdict {
    pub fn pass(&self) -> bool {
        self.status == VerdictStatus::Pass
    }
}

const EXACT_TOL: f64 = 1e-6;
const LIMIT_TOL: f64 = 1e-4;

/// The fixed probe catalog: nine pairs taken from scenarios (a), (d), (e), (f)
/// followed by eight random univariate pairs drawn with seed 0.
pub fn probe_catalog() -> Vec<WeightedPair> {
    let mut out = Vec::with_capacity(17);
    for (label, pairs) in [('a', &[(0, 1), (1, 2)][..]), ('d', &[(0, 1), (1, 2)]), ('e', &[(0, 1), (2, 3)]), ('f', &[(0, 1), (1, 2), (2, 3)])] {
        let s = ScenarioB::get(label).expect("bundled scenario");
        for &(i, j) in pairs {
            out.push(WeightedPair::new(s.subcluster(i), s.subcluster(j)).expect("same dimension"));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..8 {
        let (wa, wb) = loop {
            let (a, b) = (rng.gen_range(0.05..0.9), rng.gen_range(0.05..0.9));
            if a + b <= 1.0 {
                break (a, b);
            }
        };
        let mut g = |w, id| {
            let m = rng.gen_range(-10.0..10.0);
            let sd = rng.gen_range(0.2..5.0);
            Subcluster::gaussian(id, w, GaussianComponent::univariate(m, sd).expect("valid")).expect("valid")
        };
        let k = g(wa, 0);
        let l = g(wb, 1);
        out.push(WeightedPair::new(k, l).expect("same dimension"));
    }
    out
}

fn pair(wk: f64, mk: f64, sk: f64, wl: f64, ml: f64, sl: f64) -> (Subcluster, Subcluster) {
    let g = |id, w, m, s| Subcluster::gaussian(id, w, GaussianComponent::univariate(m, s).expect("valid")).expect("valid");
    (g(0, wk, mk, sk), g(1, wl, ml, sl))
}

struct Checker {
    measure: Measure,
    it: Integrator,
    inf: f64,
    sup: f64,
    asym: f64,
}

impl Checker {
    fn new(measure: Measure, ctx: &IntegrationContext) -> Result<Self> {
        let it = Integrator::new(IntegrationContext { mode: IntegrationMode::Quadrature, ..*ctx })?;
        let mut inf = f64::INFINITY;
        let mut sup = f64::NEG_INFINITY;
        let mut asym: f64 = 0.0;
        for p in probe_catalog() {
            let a = evaluate_estimate(measure, &p.k, &p.l, &it)?.value;
            let b = evaluate_estimate(measure, &p.l, &p.k, &it)?.value;
            inf = inf.min(a).min(b);
            sup = sup.max(a).max(b);
            asym = asym.max((a - b).abs());
        }
        Ok(Self { measure, it, inf, sup, asym })
    }

    fn d(&self, (k, l): (Subcluster, Subcluster)) -> Result<f64> {
        Ok(evaluate_estimate(self.measure, &k, &l, &self.it)?.value)
    }

    fn range_tol(&self) -> f64 {
        LIMIT_TOL * (self.sup - self.inf)
    }

    fn series(
        &self,
        name: &str,
        params: &[f64],
        trace: &mut Vec<TracePoint>,
        build: impl Fn(f64) -> (Subcluster, Subcluster),
    ) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(params.len());
        for &p in params {
            let v = self.d(build(p))?;
            trace.push(TracePoint { series: name.to_string(), parameter: p, value: v });
            out.push(v);
        }
        Ok(out)
    }

    /// The sequence settles at the analytic minimum (finite), or keeps
    /// decreasing without slowing down (−∞).
    fn reaches_min(&self, seq: &[f64]) -> bool {
        let (m, _) = self.measure.analytic_bounds();
        let tc = self.range_tol();
        let n = seq.len();
        if m.is_finite() {
            (seq[n - 1] - seq[n - 2]).abs() < tc && (seq[n - 1] - m).abs() <= tc
        } else {
            diverges(&seq.iter().map(|v| -v).collect::<Vec<_>>())
        }
    }

    /// Nondecreasing and settled at the analytic maximum (finite), or diverging (+∞).
    fn reaches_max(&self, seq: &[f64], tol: f64) -> bool {
        let (_, big) = self.measure.analytic_bounds();
        let n = seq.len();
        if big.is_finite() {
            let mono = seq.windows(2).all(|w| w[1] >= w[0] - EXACT_TOL);
            mono && (seq[n - 1] - seq[n - 2]).abs() < tol.max(self.range_tol()) && (seq[n - 1] - big).abs() <= tol
        } else {
            diverges(seq)
        }
    }

    fn run(&self, property: PropertyKind) -> Result<(bool, Vec<TracePoint>, String)> {
        let mut trace = Vec::new();
        let (m, _) = self.measure.analytic_bounds();
        let ok = match property {
            PropertyKind::Symmetry => {
                trace.push(TracePoint { series: "max asymmetry".into(), parameter: 0.0, value: self.asym });
                self.asym < EXACT_TOL
            }
            PropertyKind::Equality => {
                let v = self.series("identical N(0,1)", &[0.1, 0.25, 0.5], &mut trace, |p| pair(p, 0.0, 1.0, p, 0.0, 1.0))?;
                v.iter().all(|&d| if m.is_finite() { (d - m).abs() <= EXACT_TOL } else { d <= self.inf + EXACT_TOL })
            }
            PropertyKind::Orthogonality => {
                let mut ok = true;
                for (wk, wl) in [(0.5, 0.5), (0.8, 0.2)] {
                    let s = self.series(&format!("gap, weights {wk}/{wl}"), &[10.0, 20.0, 40.0], &mut trace, |g| {
                        pair(wk, 0.0, 1.0, wl, g, 1.0)
                    })?;
                    ok &= self.reaches_max(&s, EXACT_TOL);
                }
                ok
            }
            PropertyKind::Outlier => {
                let ws: Vec<f64> = (1..=6).map(|e| 10f64.powi(-e)).collect();
                let a = self.series("small weight vs 1-small", &ws, &mut trace, |s| pair(s, 0.0, 1.0, 1.0 - s, 1.0, 1.0))?;
                let b = self.series("both weights small", &ws, &mut trace, |s| pair(s, 0.0, 1.0, s, 1.0, 1.0))?;
                self.reaches_min(&a) && self.reaches_min(&b)
            }
            PropertyKind::Noise => {
                let s = self.series("scatter sd", &[5.0, 15.0, 50.0, 150.0], &mut trace, |sd| pair(0.5, 0.0, sd, 0.5, 0.0, 1.0))?;
                self.reaches_min(&s)
            }
            PropertyKind::Mode => {
                let mut ok = true;
                let shrink: Vec<f64> = std::iter::once(0.5).chain((1..=12).map(|e| 10f64.powi(-e))).collect();
                for (wk, wl) in [(0.5, 0.5), (0.8, 0.2)] {
                    let s = self.series(&format!("variance ratio to 0, weights {wk}/{wl}"), &shrink, &mut trace, |a| {
                        pair(wk, 0.0, 1.0, wl, 0.0, a.sqrt())
                    })?;
                    ok &= self.reaches_max(&s, self.range_tol());
                }
                let grow: Vec<f64> = (1..=8).map(|e| 1.0 - 10f64.powi(-e)).collect();
                for p in [0.1, 0.25, 0.5] {
                    let s = self.series(&format!("variance ratio to 1, weights {p}/{p}"), &grow, &mut trace, |a| {
                        pair(p, 0.0, 1.0, p, 0.0, a.sqrt())
                    })?;
                    ok &= self.reaches_min(&s);
                }
                ok
            }
        };
        let note = format!("probe range [{:.6e}, {:.6e}]", self.inf, self.sup);
        Ok((ok, trace, note))
    }

    fn verdict(&self, property: PropertyKind) -> PropertyVerdict {
        let (status, limit_trace, note) = match self.run(property) {
            Ok((true, t, n)) => (VerdictStatus::Pass, t, n),
            Ok((false, t, n)) => (VerdictStatus::Fail, t, n),
            Err(e) => (VerdictStatus::Indeterminate, Vec::new(), e.to_string()),
        };
        PropertyVerdict {
            measure: self.measure.name(),
            property,
            status,
            limit_trace,
            probe_inf: self.inf,
            probe_sup: self.sup,
            note,
        }
    }
}

/// Monotone growth that is not levelling off: the last step is positive and
/// at least half the step before it.
fn diverges(seq: &[f64]) -> bool {
    let inc: Vec<f64> = seq.windows(2).map(|w| w[1] - w[0]).collect();
    let n = inc.len();
    n >= 2 && inc.iter().all(|&d| d >= -EXACT_TOL) && inc[n - 1] > 0.0 && inc[n - 1] >= 0.5 * inc[n - 2]
}

pub fn check_property(measure: Measure, property: PropertyKind, ctx: &IntegrationContext) -> PropertyVerdict {
    match Checker::new(measure, ctx) {
        Ok(c) => c.verdict(property),
        Err(e) => indeterminate(measure, property, e),
    }
}

fn indeterminate(measure: Measure, property: PropertyKind, e: Error) -> PropertyVerdict {
    PropertyVerdict {
        measure: measure.name(),
        property,
        status: VerdictStatus::Indeterminate,
        limit_trace: Vec::new(),
        probe_inf: f64::NAN,
        probe_sup: f64::NAN,
        note: e.to_string(),
    }
}

/// All verdicts for one measure, in `PropertyKind::ALL` order.
pub fn measure_row(measure: Measure, ctx: &IntegrationContext) -> Vec<PropertyVerdict> {
    match Checker::new(measure, ctx) {
        Ok(c) => PropertyKind::ALL.par_iter().map(|&p| c.verdict(p)).collect(),
        Err(e) => PropertyKind::ALL.iter().map(|&p| indeterminate(measure, p, Error::InvalidParameter(e.to_string()))).collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyTable {
    pub rows: Vec<Vec<PropertyVerdict>>,
}

impl PropertyTable {
    pub fn matrix(&self) -> Vec<Vec<bool>> {
        self.rows.iter().map(|r| r.iter().map(PropertyVerdict::pass).collect()).collect()
    }

    pub fn any_indeterminate(&self) -> bool {
        self.rows.iter().flatten().any(|v| v.status == VerdictStatus::Indeterminate)
    }

    /// Cells that differ from the reference pattern, as (measure, property).
    pub fn mismatches(&self) -> Vec<(&'static str, PropertyKind)> {
        self.rows
            .iter()
            .flatten()
            .filter(|v| {
                let m: Measure = v.measure.parse().expect("known measure");
                v.pass() != expected(m, v.property) || v.status == VerdictStatus::Indeterminate
            })
            .map(|v| (v.measure, v.property))
            .collect()
    }

    /// Aligned text with `x` for pass, `-` for fail and `?` for indeterminate.
    pub fn render(&self) -> String {
        let mut s = format!("{:<7}", "");
        for p in PropertyKind::ALL {
            s.push_str(&format!("{:>15}", p.name()));
        }
        s.push('\n');
        for row in &self.rows {
            let label = row.first().map(|v| v.measure.parse::<Measure>().expect("known").label()).unwrap_or("");
            s.push_str(&format!("{label:<7}"));
            for v in row {
                let c = match v.status {
                    VerdictStatus::Pass => "x",
                    VerdictStatus::Fail => "-",
                    VerdictStatus::Indeterminate => "?",
                };
                s.push_str(&format!("{c:>15}"));
            }
            s.push('\n');
        }
        s
    }
}

pub fn property_table(ctx: &IntegrationContext) -> PropertyTable {
    table_for(&Measure::ALL, ctx)
}

pub fn table_for(measures: &[Measure], ctx: &IntegrationContext) -> PropertyTable {
    PropertyTable { rows: measures.par_iter().map(|&m| measure_row(m, ctx)).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_shape() {
        let c = probe_catalog();
        assert_eq!(c.len(), 17);
        assert_eq!(c, probe_catalog());
        for p in &c {
            assert!(p.k.weight > 0.0 && p.l.weight > 0.0 && p.k.weight + p.l.weight <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn divergence_rule() {
        assert!(diverges(&[0.0, 1.0, 2.0, 3.0]));
        assert!(!diverges(&[0.0, 1.0, 1.5, 1.6]));
        assert!(!diverges(&[3.0, 2.0, 1.0]));
    }

    #[test]
    fn expected_pattern_lookup() {
        assert!(expected(Measure::KlInf, PropertyKind::Noise));
        assert!(!expected(Measure::Bhat, PropertyKind::Noise));
        assert!(expected(Measure::Bhat, PropertyKind::Outlier));
        assert!(!expected(Measure::Se, PropertyKind::Equality));
    }

    #[test]
    fn bhat_outlier_passes_and_noise_fails() {
        let ctx = IntegrationContext::quadrature();
        assert!(check_property(Measure::Bhat, PropertyKind::Outlier, &ctx).pass());
        assert_eq!(check_property(Measure::Bhat, PropertyKind::Noise, &ctx).status, VerdictStatus::Fail);
    }

    #[test]
    fn se_equality_fails() {
        let v = check_property(Measure::Se, PropertyKind::Equality, &IntegrationContext::quadrature());
        assert_eq!(v.status, VerdictStatus::Fail);
        assert!(v.limit_trace[0].value > v.probe_inf + 1e-6);
    }
}
