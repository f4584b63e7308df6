//! Density estimation and synthesis for mixed tabular data with adversarial
//! random forests.
//!
//! The pipeline has three stages:
//!
//! 1. [`arf::arf_fit`] trains a forest to separate real rows from synthetic
//!    ones, regenerating the synthetic rows from its own leaves until it can
//!    no longer tell them apart.
//! 2. [`forde::forde_fit`] turns the forest's leaves into a mixture of
//!    products of univariate densities, evaluated by
//!    [`forde::FordeModel::log_density`].
//! 3. [`forge::forge_sample`] draws synthetic rows from that mixture.
//!
//! [`simgen`] holds the simulation generators and [`evalbench`] the
//! baselines and benchmark harnesses.

pub mod arf;
pub mod cli;
pub mod error;
pub mod evalbench;
pub mod forde;
pub mod forest;
pub mod forge;
pub mod model_file;
pub mod rng;
mod serde_ext;
pub mod simgen;
pub mod tabular;
pub mod truncnorm;

pub use arf::{arf_fit, ArfConfig, ArfModel};
pub use error::{Error, Result};
pub use forde::{forde_fit, nll, FordeConfig, FordeModel};
pub use forest::{fit_forest, Forest, ForestConfig, Resample};
pub use forge::{conditional_sample, forge_sample, Constraint, Evidence, ForgePreset, Reweighting};
pub use tabular::{Column, ColumnKind, Dataset, Schema};

/// Runs `f` on a dedicated pool of `threads` workers.
///
/// Results never depend on the worker count; this only bounds parallelism.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("failed to build thread pool")
        .install(f)
}

/// Fits the adversarial forest and the density model in one call.
pub fn fit_density(ds: &Dataset, arf_cfg: &ArfConfig, forde_cfg: &FordeConfig) -> Result<(ArfModel, FordeModel)> {
    let arf = arf_fit(ds, arf_cfg)?;
    let model = forde_fit(&arf, ds, forde_cfg)?;
    Ok((arf, model))
}
