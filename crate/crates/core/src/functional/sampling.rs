use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::Result;
use crate::mixture::{log_sum_exp, MixtureDensity};

type TermKey = Vec<(u64, usize)>;

/// A fixed importance sample from a proposal mixture, shared by every
/// functional evaluated against it so that comparisons use common random numbers.
#[derive(Debug)]
pub struct SampleBank {
    proposal: MixtureDensity,
    m: usize,
    points: Vec<f64>,
    log_q: Vec<f64>,
    // log N_j(x_i) for every proposal component j.
    component_logs: Vec<Vec<f64>>,
    cache: Mutex<HashMap<TermKey, Arc<Vec<f64>>>>,
}

impl SampleBank {
    pub fn new(proposal: &MixtureDensity, m: usize, seed: u64) -> Result<Self> {
        let sample = proposal.sample(m, seed)?;
        let component_logs: Vec<Vec<f64>> = proposal
            .components()
            .iter()
            .map(|c| sample.rows().map(|x| c.log_pdf(x)).collect())
            .collect();
        let log_q = (0..m)
            .map(|i| {
                log_sum_exp(
                    proposal
                        .log_coefs()
                        .iter()
                        .zip(&component_logs)
                        .map(move |(lc, v)| lc + v[i]),
                )
            })
            .collect();
        Ok(Self {
            proposal: proposal.clone(),
            m,
            points: sample.values().to_vec(),
            log_q,
            component_logs,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn dim(&self) -> usize {
        self.proposal.dim()
    }

    pub fn proposal(&self) -> &MixtureDensity {
        &self.proposal
    }

    pub fn log_q(&self) -> &[f64] {
        &self.log_q
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.points[i * d..(i + 1) * d]
    }

    fn key(&self, mix: &MixtureDensity) -> Option<TermKey> {
        mix.terms()
            .map(|(c, comp)| {
                self.proposal
                    .components()
                    .iter()
                    .position(|p| p == comp)
                    .map(|j| (c.to_bits(), j))
            })
            .collect()
    }

    /// Log-density of `mix` at every banked point. Mixtures built from the
    /// proposal's own components are assembled from cached component values.
    pub fn log_density(&self, mix: &MixtureDensity) -> Arc<Vec<f64>> {
        let Some(key) = self.key(mix) else {
            return Arc::new((0..self.m).map(|i| mix.log_pdf(self.point(i))).collect());
        };
        if let Some(v) = self.cache.lock().expect("bank cache poisoned").get(&key) {
            return Arc::clone(v);
        }
        let v: Vec<f64> = if key.len() == 1 && key[0].0 == 1f64.to_bits() {
            self.component_logs[key[0].1].clone()
        } else {
            let terms: Vec<(f64, &Vec<f64>)> =
                key.iter().map(|&(c, j)| (f64::from_bits(c).ln(), &self.component_logs[j])).collect();
            (0..self.m)
                .map(|i| log_sum_exp(terms.iter().map(|(lc, v)| lc + v[i])))
                .collect()
        };
        let v = Arc::new(v);
        self.cache
            .lock()
            .expect("bank cache poisoned")
            .entry(key)
            .or_insert_with(|| Arc::clone(&v));
        v
    }
}
