use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::generate::{generate, ScenarioC};
use super::metrics::{min_misclassification, misclassification_indexed};
use crate::dissim::Measure;
use crate::error::{Error, Result};
use crate::functional::IntegrationContext;
use crate::merge::{run_to_c, ClusterState, Merger};
use crate::mixture::{select_model, Criterion, EmConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentSettings {
    pub em: EmConfig,
    pub k_min: usize,
    pub k_max: usize,
    /// The seed field is replaced by the rep seed.
    pub integration: IntegrationContext,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self { em: EmConfig::default(), k_min: 1, k_max: 25, integration: IntegrationContext::importance(100_000, 0) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepRow {
    pub rep: usize,
    pub criterion: &'static str,
    pub measure: &'static str,
    #[serde(rename = "K_selected")]
    pub k_selected: usize,
    pub misclass: f64,
    pub min_misclass: f64,
    pub excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepFailure {
    pub rep: usize,
    pub criterion: &'static str,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub family: &'static str,
    pub dim: usize,
    pub size: &'static str,
    pub criterion: &'static str,
    pub measure: &'static str,
    pub reps: usize,
    pub failures: usize,
    pub mean_excess: f64,
    /// 1.96·sd/√reps.
    pub ci_half_width: f64,
    pub mean_misclass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub rows: Vec<RepRow>,
    pub failures: Vec<RepFailure>,
    pub summaries: Vec<RunSummary>,
}

impl ExperimentResult {
    pub fn summary(&self, criterion: Criterion, measure: Measure) -> Option<&RunSummary> {
        self.summaries.iter().find(|s| s.criterion == criterion.name() && s.measure == measure.name())
    }

    pub fn rows_csv(&self) -> String {
        let mut out = String::from("rep,criterion,measure,K_selected,misclass,min_misclass,excess\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{:e},{:e},{:e}",
                r.rep, r.criterion, r.measure, r.k_selected, r.misclass, r.min_misclass, r.excess
            );
        }
        out
    }
}

enum RepOutcome {
    Rows(Vec<RepRow>),
    Failed(RepFailure),
}

fn run_rep(
    rep: usize,
    seed: u64,
    scn: &ScenarioC,
    criterion: Criterion,
    measures: &[Measure],
    c: usize,
    settings: &ExperimentSettings,
) -> Result<Vec<RepRow>> {
    let sample = generate(scn, seed)?;
    let fit = select_model(&sample.points, settings.k_min, settings.k_max, criterion, seed, &settings.em)?;
    let k = fit.k();
    if k < c {
        return Err(Error::Labels(format!("selected K = {k} is below C = {c}")));
    }
    let min_mis = min_misclassification(&fit.map_labels, k, &sample.true_labels, &sample.noise_mask)?;
    let ctx = IntegrationContext { seed, ..settings.integration };
    let merger = Merger::new(ctx, &fit.mixture)?;
    let start = ClusterState::from_mixture(&fit.mixture);
    measures
        .iter()
        .map(|&m| {
            let (end, _) = run_to_c(&start, m, c, &merger)?;
            let labels = end.relabel(&fit.map_labels)?;
            let mis = misclassification_indexed(&labels, c, &sample.true_labels, &sample.noise_mask)?;
            Ok(RepRow {
                rep,
                criterion: criterion.name(),
                measure: m.name(),
                k_selected: k,
                misclass: mis,
                min_misclass: min_mis,
                excess: mis - min_mis,
            })
        })
        .collect()
}

/// Repeats generate → select → merge for each rep with seed `base_seed + rep`.
pub fn run_experiment(
    scn: &ScenarioC,
    measures: &[Measure],
    criteria: &[Criterion],
    reps: usize,
    c: usize,
    base_seed: u64,
    settings: &ExperimentSettings,
) -> Result<ExperimentResult> {
    if reps < 2 {
        return Err(Error::InvalidParameter("at least two reps are required".into()));
    }
    if measures.is_empty() || criteria.is_empty() {
        return Err(Error::InvalidParameter("measures and criteria must be non-empty".into()));
    }
    settings.integration.validate()?;
    let jobs: Vec<(usize, Criterion)> = (0..reps).flat_map(|r| criteria.iter().map(move |&cr| (r, cr))).collect();
    let outcomes: Vec<RepOutcome> = jobs
        .par_iter()
        .map(|&(rep, cr)| match run_rep(rep, base_seed + rep as u64, scn, cr, measures, c, settings) {
            Ok(rows) => RepOutcome::Rows(rows),
            Err(e) => RepOutcome::Failed(RepFailure { rep, criterion: cr.name(), message: e.to_string() }),
        })
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            RepOutcome::Rows(r) => rows.extend(r),
            RepOutcome::Failed(f) => failures.push(f),
        }
    }
    let mut summaries = Vec::new();
    for &cr in criteria {
        let failed = failures.iter().filter(|f| f.criterion == cr.name()).count();
        for &m in measures {
            let sel: Vec<&RepRow> = rows.iter().filter(|r| r.criterion == cr.name() && r.measure == m.name()).collect();
            let (mean_excess, half) = mean_ci(sel.iter().map(|r| r.excess));
            let (mean_misclass, _) = mean_ci(sel.iter().map(|r| r.misclass));
            summaries.push(RunSummary {
                family: scn.family.name(),
                dim: scn.dim,
                size: scn.size.name(),
                criterion: cr.name(),
                measure: m.name(),
                reps: sel.len(),
                failures: failed,
                mean_excess,
                ci_half_width: half,
                mean_misclass,
            });
        }
    }
    Ok(ExperimentResult { rows, failures, summaries })
}

/// Mean and 1.96·sd/√n with the n−1 sample deviation.
pub fn mean_ci(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    let n = v.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * var.sqrt() / (n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simlab::{Family, Size};

    fn quick() -> ExperimentSettings {
        ExperimentSettings {
            em: EmConfig { reps: 2, ..EmConfig::default() },
            k_min: 3,
            k_max: 5,
            integration: IntegrationContext::importance(2000, 0),
        }
    }

    #[test]
    fn mean_ci_basics() {
        let (m, h) = mean_ci([0.25, 0.25, 0.25].into_iter());
        assert_eq!((m, h), (0.25, 0.0));
        let (m, h) = mean_ci([1.0, 3.0].into_iter());
        assert_eq!(m, 2.0);
        assert!((h - 1.96 * 2f64.sqrt() / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn small_run_is_reproducible_and_nonnegative() {
        let scn = ScenarioC::new(Family::Uniform, 2, Size::Small).unwrap();
        let ms = [Measure::Se, Measure::KlInf];
        let a = run_experiment(&scn, &ms, &[Criterion::Bic], 2, 3, 10, &quick()).unwrap();
        let b = run_experiment(&scn, &ms, &[Criterion::Bic], 2, 3, 10, &quick()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len() + 2 * a.failures.len(), 4);
        for r in &a.rows {
            assert!(r.excess >= -1e-12 && r.misclass <= 1.0);
        }
        assert!(a.rows_csv().starts_with("rep,criterion,measure,K_selected"));
    }

    #[test]
    fn rejects_single_rep() {
        let scn = ScenarioC::new(Family::Uniform, 2, Size::Small).unwrap();
        assert!(run_experiment(&scn, &[Measure::Se], &[Criterion::Bic], 1, 3, 0, &quick()).is_err());
    }
}
