//! Machine-learning efficacy: train on real or synthetic rows, test on real.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::learners::{accuracy, f1_score, Learner};
use super::ResultRow;
use crate::error::{Error, Result};
use crate::forde::FordeConfig;
use crate::forge::{forge_sample, ForgePreset};
use crate::rng::{derive_seed, tag};
use crate::tabular::{mean, sample_std, Dataset};

/// Anything that can learn from a table and emit rows of the same schema.
pub trait Generator: Sync {
    fn name(&self) -> String;
    fn generate(&self, train: &Dataset, m: usize, seed: u64) -> Result<Dataset>;
}

/// Returns the first `m` training rows.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityGenerator;

impl Generator for IdentityGenerator {
    fn name(&self) -> String {
        "identity".into()
    }

    fn generate(&self, train: &Dataset, m: usize, _seed: u64) -> Result<Dataset> {
        if m > train.n_rows() {
            return Err(Error::Config(format!("identity cannot produce {m} rows from {}", train.n_rows())));
        }
        Ok(train.select_rows(&(0..m).collect::<Vec<_>>()))
    }
}

/// Adversarial forest, density fit, then forest sampling.
#[derive(Clone, Debug, Default)]
pub struct ForgeGenerator {
    pub preset: ForgePreset,
    pub forde: FordeConfig,
}

impl Generator for ForgeGenerator {
    fn name(&self) -> String {
        "forge".into()
    }

    fn generate(&self, train: &Dataset, m: usize, seed: u64) -> Result<Dataset> {
        let (_, model) = crate::fit_density(train, &self.preset.arf_config(seed), &self.forde)?;
        forge_sample(&model, m, derive_seed(seed, tag::FORGE))
    }
}

pub fn generator_by_name(name: &str, preset: ForgePreset) -> Result<Box<dyn Generator>> {
    match name {
        "forge" => Ok(Box::new(ForgeGenerator {
            preset,
            forde: FordeConfig::default(),
        })),
        "identity" => Ok(Box::new(IdentityGenerator)),
        _ => Err(Error::Config(format!("unknown generator {name:?}"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Scores {
    pub accuracy: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfficacyRecord {
    pub learner: Learner,
    pub seed: u64,
    pub oracle: Scores,
    pub synthetic: Scores,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub std_error: f64,
}

impl MeanSe {
    fn of(values: &[f64]) -> MeanSe {
        MeanSe {
            mean: mean(values),
            std_error: sample_std(values).map_or(0.0, |s| s / (values.len() as f64).sqrt()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EfficacySummary {
    pub oracle_accuracy: MeanSe,
    pub oracle_f1: MeanSe,
    pub synthetic_accuracy: MeanSe,
    pub synthetic_f1: MeanSe,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EfficacyReport {
    pub generator: String,
    pub target: String,
    pub records: Vec<EfficacyRecord>,
    /// Generator fit plus sample time per seed, in seconds.
    pub wall_time_sec: Vec<(u64, f64)>,
}

impl EfficacyReport {
    fn summarize<'a>(records: impl Iterator<Item = &'a EfficacyRecord>) -> EfficacySummary {
        let r: Vec<&EfficacyRecord> = records.collect();
        let pick = |f: &dyn Fn(&EfficacyRecord) -> f64| MeanSe::of(&r.iter().map(|x| f(x)).collect::<Vec<_>>());
        EfficacySummary {
            oracle_accuracy: pick(&|x| x.oracle.accuracy),
            oracle_f1: pick(&|x| x.oracle.f1),
            synthetic_accuracy: pick(&|x| x.synthetic.accuracy),
            synthetic_f1: pick(&|x| x.synthetic.f1),
        }
    }

    pub fn learner_summary(&self, learner: Learner) -> EfficacySummary {
        Self::summarize(self.records.iter().filter(|r| r.learner == learner))
    }

    /// Averaged over learners and seeds.
    pub fn average(&self) -> EfficacySummary {
        Self::summarize(self.records.iter())
    }

    pub fn mean_wall_time(&self) -> f64 {
        mean(&self.wall_time_sec.iter().map(|t| t.1).collect::<Vec<_>>())
    }

    /// Long-format rows; oracle scores carry the generator name `oracle`.
    pub fn to_rows(&self, dataset: &str) -> Vec<ResultRow> {
        let mut rows = Vec::new();
        for r in &self.records {
            for (generator, s) in [("oracle".to_owned(), r.oracle), (self.generator.clone(), r.synthetic)] {
                for (metric, value) in [("accuracy", s.accuracy), ("f1", s.f1)] {
                    rows.push(ResultRow::new(dataset, &generator, r.learner.name(), metric, value, Some(r.seed)));
                }
            }
        }
        for &(seed, t) in &self.wall_time_sec {
            rows.push(ResultRow::new(dataset, &self.generator, "", "time_sec", t, Some(seed)));
        }
        rows
    }
}

fn score(
    train: &Dataset,
    test: &Dataset,
    target: usize,
    learner: Learner,
    seed: u64,
    truth: &[usize],
) -> Result<Scores> {
    let model = learner.fit(train, target, seed)?;
    let pred: Vec<usize> = test.rows().map(|r| model.predict(r)).collect();
    let k = test.schema().column(target).n_levels();
    Ok(Scores {
        accuracy: accuracy(truth, &pred),
        f1: f1_score(truth, &pred, k),
    })
}

/// For every seed, generates a synthetic table the size of `real_trn` and
/// scores every learner trained on it and on `real_trn` against `real_tst`.
pub fn run_efficacy(
    real_trn: &Dataset,
    real_tst: &Dataset,
    target: &str,
    generator: &dyn Generator,
    learners: &[Learner],
    seeds: &[u64],
) -> Result<EfficacyReport> {
    if real_trn.schema() != real_tst.schema() {
        return Err(Error::SchemaMismatch("train and test schemas differ".into()));
    }
    let t = real_trn
        .schema()
        .index_of(target)
        .ok_or_else(|| Error::Config(format!("target {target:?} is not a column")))?;
    let truth: Vec<usize> = (0..real_tst.n_rows()).map(|i| real_tst.level(i, t)).collect();
    let mut records = Vec::new();
    let mut wall_time_sec = Vec::new();
    for &seed in seeds {
        let start = Instant::now();
        let synth = generator.generate(real_trn, real_trn.n_rows(), seed)?;
        wall_time_sec.push((seed, start.elapsed().as_secs_f64()));
        if synth.schema() != real_trn.schema() {
            return Err(Error::SchemaMismatch("generator changed the schema".into()));
        }
        let learner_seed = derive_seed(seed, tag::EFFICACY);
        let cells = learners
            .par_iter()
            .map(|&learner| {
                Ok(EfficacyRecord {
                    learner,
                    seed,
                    oracle: score(real_trn, real_tst, t, learner, learner_seed, &truth)?,
                    synthetic: score(&synth, real_tst, t, learner, learner_seed, &truth)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        records.extend(cells);
    }
    Ok(EfficacyReport {
        generator: generator.name(),
        target: target.to_owned(),
        records,
        wall_time_sec,
    })
}
