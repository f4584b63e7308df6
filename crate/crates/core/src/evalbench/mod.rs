//! Baselines and benchmark harnesses: piecewise-constant forest densities,
//! Monte-Carlo integrated squared error, a classifier two-sample test and
//! the machine-learning efficacy protocol.

mod bench;
mod efficacy;
mod ise;
mod learners;
mod pwc;

pub use bench::{
    bench_shapes, bench_toeplitz, bench_twentyds, load_twenty_dataset, toeplitz_cell, ShapesBench, ToeplitzBench,
    ToeplitzCell, TwentyBench,
};
pub use efficacy::{
    generator_by_name, run_efficacy, EfficacyRecord, EfficacyReport, EfficacySummary, ForgeGenerator, Generator,
    IdentityGenerator, MeanSe, Scores,
};
pub use ise::{ise_monte_carlo, GaussianProposal, IseEstimate, Proposal};
pub use learners::{
    accuracy, f1_score, fit_binary_logistic, logistic_loss_grad, train_dtree, train_logreg, Classifier,
    DecisionTree, DtreeParams, FeatureEncoder, Learner, LogRegParams, LogisticRegression,
};
pub use pwc::{fit_pwc, pwc_log_density, pwc_nll, PwcConfig, PwcLeaf, PwcMode, PwcModel};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestConfig};
use crate::tabular::Dataset;

/// One long-format result line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub dataset: String,
    pub generator: String,
    pub learner: String,
    pub metric: String,
    pub value: f64,
    pub seed: Option<u64>,
}

impl ResultRow {
    pub fn new(dataset: &str, generator: &str, learner: &str, metric: &str, value: f64, seed: Option<u64>) -> Self {
        ResultRow {
            dataset: dataset.into(),
            generator: generator.into(),
            learner: learner.into(),
            metric: metric.into(),
            value,
            seed,
        }
    }
}

pub fn write_results(rows: &[ResultRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?)
}

/// Out-of-bag accuracy of a fresh forest separating `real` (label 1) from
/// `synth` (label 0). Near 0.5 means the two are indistinguishable.
pub fn discriminator_score(real: &Dataset, synth: &Dataset, forest_cfg: &ForestConfig, seed: u64) -> Result<f64> {
    if real.schema() != synth.schema() {
        return Err(Error::SchemaMismatch("real and synthetic schemas differ".into()));
    }
    let stacked = real.vstack(synth)?;
    let mut labels = vec![1u32; real.n_rows()];
    labels.resize(stacked.n_rows(), 0);
    let cfg = ForestConfig {
        seed,
        ..forest_cfg.clone()
    };
    fit_forest(&stacked, &labels, &cfg)?.oob_accuracy(&stacked, &labels)
}
