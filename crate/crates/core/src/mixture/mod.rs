//! Gaussian mixtures: densities, sampling, EM fitting and model selection.

mod density;
mod em;
mod gaussian;

pub use density::{log_sum_exp, MixtureDensity, Subcluster, PDF_FLOOR};
pub use em::{aic, bic, em_fit, n_params, select_model, Criterion, EmConfig, FittedModel};
pub use gaussian::GaussianComponent;
