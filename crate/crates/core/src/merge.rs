//! Hierarchical merging of weighted subclusters down to a fixed cluster count.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use crate::dissim::{argmin_upper, evaluate_estimate, Measure};
use crate::error::{Error, Result};
use crate::functional::{IntegrationContext, Integrator};
use crate::mixture::{MixtureDensity, Subcluster};

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterState {
    subclusters: Vec<Subcluster>,
    step: usize,
    next_id: u32,
}

impl ClusterState {
    /// One subcluster per mixture component, ids and members equal to the component index.
    pub fn from_mixture(mix: &MixtureDensity) -> Self {
        let subclusters = mix
            .terms()
            .enumerate()
            .map(|(i, (w, c))| Subcluster {
                id: i as u32,
                weight: w,
                density: MixtureDensity::single(c.clone()),
                members: BTreeSet::from([i]),
            })
            .collect::<Vec<_>>();
        Self { next_id: subclusters.len() as u32, subclusters, step: 0 }
    }

    pub fn from_subclusters(subclusters: Vec<Subcluster>) -> Result<Self> {
        if subclusters.is_empty() {
            return Err(Error::InvalidParameter("cluster state needs at least one subcluster".into()));
        }
        let total: f64 = subclusters.iter().map(|s| s.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("subcluster weights sum to {total}")));
        }
        let mut ids = BTreeSet::new();
        let mut members = BTreeSet::new();
        for s in &subclusters {
            if !ids.insert(s.id) {
                return Err(Error::InvalidParameter(format!("duplicate subcluster id {}", s.id)));
            }
            for &m in &s.members {
                if !members.insert(m) {
                    return Err(Error::InvalidParameter(format!("component {m} belongs to two subclusters")));
                }
            }
        }
        let next_id = ids.last().map_or(0, |m| m + 1);
        Ok(Self { subclusters, step: 0, next_id })
    }

    pub fn subclusters(&self) -> &[Subcluster] {
        &self.subclusters
    }

    pub fn len(&self) -> usize {
        self.subclusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subclusters.is_empty()
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn total_weight(&self) -> f64 {
        self.subclusters.iter().map(|s| s.weight).sum()
    }

    pub fn position(&self, id: u32) -> Result<usize> {
        self.subclusters.iter().position(|s| s.id == id).ok_or(Error::UnknownId(id))
    }

    /// Merges subclusters `i` and `j` (by id). The result takes a fresh id and
    /// the position of whichever of the two came first.
    pub fn merge_pair(&self, i: u32, j: u32) -> Result<Self> {
        if i == j {
            return Err(Error::InvalidParameter(format!("cannot merge subcluster {i} with itself")));
        }
        let (pi, pj) = (self.position(i)?, self.position(j)?);
        let (a, b) = (&self.subclusters[pi], &self.subclusters[pj]);
        let merged = Subcluster {
            id: self.next_id,
            weight: a.weight + b.weight,
            density: MixtureDensity::combine(a.weight, &a.density, b.weight, &b.density)?,
            members: a.members.union(&b.members).copied().collect(),
        };
        let (keep, drop) = (pi.min(pj), pi.max(pj));
        let mut subclusters = self.subclusters.clone();
        subclusters[keep] = merged;
        subclusters.remove(drop);
        Ok(Self { subclusters, step: self.step + 1, next_id: self.next_id + 1 })
    }

    /// Maps per-observation component labels to the position of the subcluster
    /// holding that component.
    pub fn relabel(&self, component_labels: &[usize]) -> Result<Vec<usize>> {
        let mut lookup = HashMap::new();
        for (pos, s) in self.subclusters.iter().enumerate() {
            for &m in &s.members {
                lookup.insert(m, pos);
            }
        }
        component_labels
            .iter()
            .map(|c| lookup.get(c).copied().ok_or_else(|| Error::Labels(format!("component {c} is in no subcluster"))))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MergeRecord {
    pub step: usize,
    pub merged: (u32, u32),
    pub new_id: u32,
    pub value: f64,
    pub measure: &'static str,
    pub remaining: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Dendrogram {
    pub measure: &'static str,
    pub initial_count: usize,
    pub records: Vec<MergeRecord>,
}

impl Dendrogram {
    /// Flat CSV: `step,i,j,value,remaining`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,i,j,value,remaining\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{},{},{:e},{}", r.step, r.merged.0, r.merged.1, r.value, r.remaining);
        }
        out
    }
}

type PairKey = (Measure, Vec<usize>, Vec<usize>);

/// Evaluates dissimilarities for one fitted mixture, caching pair values so
/// that each unordered pair is integrated once per measure.
#[derive(Debug)]
pub struct Merger {
    integrator: Integrator,
    cache: Mutex<HashMap<PairKey, f64>>,
}

impl Merger {
    /// Importance sampling (when used) draws from `full`, the fitted mixture.
    pub fn new(ctx: IntegrationContext, full: &MixtureDensity) -> Result<Self> {
        Ok(Self { integrator: Integrator::with_proposal(ctx, full)?, cache: Mutex::new(HashMap::new()) })
    }

    pub fn integrator(&self) -> &Integrator {
        &self.integrator
    }

    fn key(measure: Measure, a: &Subcluster, b: &Subcluster) -> PairKey {
        let (x, y): (Vec<usize>, Vec<usize>) = (a.members.iter().copied().collect(), b.members.iter().copied().collect());
        if x <= y {
            (measure, x, y)
        } else {
            (measure, y, x)
        }
    }

    /// Row-major matrix of D over positions, NaN on the diagonal.
    pub fn matrix(&self, state: &ClusterState, measure: Measure) -> Result<Vec<f64>> {
        let subs = state.subclusters();
        let n = subs.len();
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let missing: Vec<(usize, usize)> = {
            let cache = self.cache.lock().expect("merge cache poisoned");
            pairs.iter().copied().filter(|&(i, j)| !cache.contains_key(&Self::key(measure, &subs[i], &subs[j]))).collect()
        };
        let fresh: Vec<f64> = missing
            .par_iter()
            .map(|&(i, j)| Ok(evaluate_estimate(measure, &subs[i], &subs[j], &self.integrator)?.value))
            .collect::<Result<_>>()?;
        let mut cache = self.cache.lock().expect("merge cache poisoned");
        for (&(i, j), v) in missing.iter().zip(fresh) {
            cache.insert(Self::key(measure, &subs[i], &subs[j]), v);
        }
        let mut values = vec![f64::NAN; n * n];
        for &(i, j) in &pairs {
            let v = cache[&Self::key(measure, &subs[i], &subs[j])];
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
        Ok(values)
    }
}

/// Merges the pair with the smallest dissimilarity (lexicographic tie-break on positions).
pub fn merge_step(state: &ClusterState, measure: Measure, merger: &Merger) -> Result<(ClusterState, MergeRecord)> {
    let n = state.len();
    if n < 2 {
        return Err(Error::InvalidParameter("merge step needs at least two subclusters".into()));
    }
    let m = merger.matrix(state, measure)?;
    let (i, j, value) = argmin_upper(n, |i, j| m[i * n + j]).expect("n ≥ 2");
    let (a, b) = (state.subclusters[i].id, state.subclusters[j].id);
    let next = state.merge_pair(a, b)?;
    let record = MergeRecord {
        step: next.step,
        merged: (a, b),
        new_id: state.next_id,
        value,
        measure: measure.name(),
        remaining: next.len(),
    };
    Ok((next, record))
}

/// Merges until `c` subclusters remain.
pub fn run_to_c(state: &ClusterState, measure: Measure, c: usize, merger: &Merger) -> Result<(ClusterState, Dendrogram)> {
    if c == 0 || c > state.len() {
        return Err(Error::InvalidParameter(format!("cannot reduce {} subclusters to {c}", state.len())));
    }
    let mut cur = state.clone();
    let mut records = Vec::with_capacity(state.len() - c);
    while cur.len() > c {
        let (next, rec) = merge_step(&cur, measure, merger)?;
        records.push(rec);
        cur = next;
    }
    Ok((cur, Dendrogram { measure: measure.name(), initial_count: state.len(), records }))
}

/// (remaining clusters, min–max normalized value) per merge.
pub fn elbow_curve(dendrogram: &Dendrogram) -> Result<Vec<(usize, f64)>> {
    if dendrogram.records.is_empty() {
        return Err(Error::InvalidParameter("elbow curve of an empty dendrogram".into()));
    }
    let finite = dendrogram.records.iter().map(|r| r.value).filter(|v| v.is_finite());
    let lo = finite.clone().fold(f64::INFINITY, f64::min);
    let hi = finite.fold(f64::NEG_INFINITY, f64::max);
    Ok(dendrogram
        .records
        .iter()
        .map(|r| {
            let v = if hi > lo { (r.value - lo) / (hi - lo) } else { 1.0 };
            (r.remaining, v)
        })
        .collect())
}
