use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    StudentT,
    Cauchy,
    Uniform,
    Gamma,
    GaussNoise,
    GaussLaplace,
}

impl Family {
    pub const ALL: [Family; 6] =
        [Family::StudentT, Family::Cauchy, Family::Uniform, Family::Gamma, Family::GaussNoise, Family::GaussLaplace];

    pub fn name(self) -> &'static str {
        match self {
            Family::StudentT => "student_t",
            Family::Cauchy => "cauchy",
            Family::Uniform => "uniform",
            Family::Gamma => "gamma",
            Family::GaussNoise => "gauss_noise",
            Family::GaussLaplace => "gauss_laplace",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown distribution `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Size {
    Small,
    Large,
}

impl Size {
    pub fn name(self) -> &'static str {
        match self {
            Size::Small => "small",
            Size::Large => "large",
        }
    }
}

impl FromStr for Size {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "small" => Ok(Size::Small),
            "large" => Ok(Size::Large),
            other => Err(Error::InvalidParameter(format!("unknown size `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ScenarioC {
    pub family: Family,
    pub dim: usize,
    pub size: Size,
}

impl ScenarioC {
    pub fn new(family: Family, dim: usize, size: Size) -> Result<Self> {
        if !(dim == 2 || dim == 3) {
            return Err(Error::InvalidParameter(format!("dimension must be 2 or 3, got {dim}")));
        }
        Ok(Self { family, dim, size })
    }

    /// Points per cluster: d·100, d·100, d·50, times ten when large.
    pub fn cluster_sizes(&self) -> [usize; 3] {
        let f = match self.size {
            Size::Small => 1,
            Size::Large => 10,
        };
        [f * self.dim * 100, f * self.dim * 100, f * self.dim * 50]
    }

    pub fn noise_count(&self) -> usize {
        if self.family == Family::GaussNoise {
            self.dim * 50
        } else {
            0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub points: Dataset,
    pub true_labels: Vec<usize>,
    pub noise_mask: Vec<bool>,
}

const T_LOCATIONS: [[f64; 3]; 3] = [[0.0, 0.0, 0.0], [20.0, 15.0, 10.0], [15.0, -15.0, 10.0]];
const UNIFORM_LO: [[f64; 3]; 3] = [[-5.0, -5.0, -5.0], [5.0, 5.0, 5.0], [10.0, 5.0, 5.0]];
const UNIFORM_HI: [[f64; 3]; 3] = [[6.0, 6.0, 6.0], [10.0, 10.0, 10.0], [20.0, 20.0, 20.0]];
const GAMMA_LOCATIONS: [[f64; 3]; 3] = [[0.0, 0.0, 0.0], [0.0, -2.0, 10.0], [10.0, 10.0, 10.0]];
const GAMMA_SHAPES: [[f64; 4]; 3] = [[1.0, 2.0, 4.0, 4.0], [0.5, 1.0, 2.0, 2.0], [2.0, 2.0, 5.0, 5.0]];
const GAMMA_SCALE: f64 = 1.0;
const NOISE_LOCATIONS: [[f64; 3]; 3] = [[0.0, 0.0, 0.0], [2.0, 3.0, 2.0], [5.0, -2.0, 10.0]];
const NOISE_VARIANCES: [f64; 3] = [1.0, 2.0, 2.0];
const NOISE_BOX: (f64, f64) = (-30.0, 40.0);
const GL_LOCATIONS: [[f64; 3]; 3] = [[0.0, 0.0, 0.0], [15.0, -5.0, 10.0], [5.0, -10.0, 15.0]];
const GL_VARIANCE: f64 = 5.0;
const GL_LAPLACE_RATE: f64 = 0.1;
const GL_GAUSS_SHARE: f64 = 0.5;

/// Draws one labeled sample. Deterministic in `seed`.
pub fn generate(scn: &ScenarioC, seed: u64) -> Result<LabeledSample> {
    let d = scn.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes = scn.cluster_sizes();
    let total = sizes.iter().sum::<usize>() + scn.noise_count();
    let mut values = Vec::with_capacity(total * d);
    let mut labels = Vec::with_capacity(total);
    let mut x = vec![0.0; d];
    for (c, &n) in sizes.iter().enumerate() {
        for _ in 0..n {
            draw(scn.family, c, &mut rng, &mut x)?;
            values.extend_from_slice(&x);
            labels.push(c);
        }
    }
    let mut mask = vec![false; labels.len()];
    for _ in 0..scn.noise_count() {
        for v in x.iter_mut() {
            *v = rng.gen_range(NOISE_BOX.0..NOISE_BOX.1);
        }
        values.extend_from_slice(&x);
        labels.push(0);
        mask.push(true);
    }
    Ok(LabeledSample { points: Dataset::new(total, d, values)?, true_labels: labels, noise_mask: mask })
}

fn draw(family: Family, c: usize, rng: &mut ChaCha8Rng, x: &mut [f64]) -> Result<()> {
    let d = x.len();
    match family {
        Family::StudentT | Family::Cauchy => {
            let nu: f64 = if family == Family::StudentT { 2.0 } else { 1.0 };
            let chi = ChiSquared::new(nu).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            let s = (nu / chi.sample(rng)).sqrt();
            for (j, v) in x.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *v = T_LOCATIONS[c][j] + s * z;
            }
        }
        Family::Uniform => {
            for (j, v) in x.iter_mut().enumerate() {
                *v = rng.gen_range(UNIFORM_LO[c][j]..UNIFORM_HI[c][j]);
            }
        }
        Family::Gamma => {
            let shared = gamma(GAMMA_SHAPES[c][0], rng)?;
            for j in 0..d {
                x[j] = GAMMA_LOCATIONS[c][j] + GAMMA_SCALE * (shared + gamma(GAMMA_SHAPES[c][j + 1], rng)?);
            }
        }
        Family::GaussNoise => {
            let sd = NOISE_VARIANCES[c].sqrt();
            for (j, v) in x.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *v = NOISE_LOCATIONS[c][j] + sd * z;
            }
        }
        Family::GaussLaplace => {
            if rng.gen_bool(GL_GAUSS_SHARE) {
                let sd = GL_VARIANCE.sqrt();
                for (j, v) in x.iter_mut().enumerate() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = GL_LOCATIONS[c][j] + sd * z;
                }
            } else {
                let b = 1.0 / GL_LAPLACE_RATE;
                for (j, v) in x.iter_mut().enumerate() {
                    let u: f64 = rng.gen_range(-0.5..0.5);
                    *v = GL_LOCATIONS[c][j] - b * u.signum() * (1.0 - 2.0 * u.abs()).ln();
                }
            }
        }
    }
    Ok(())
}

fn gamma(shape: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    Ok(Gamma::new(shape, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?.sample(rng))
}
