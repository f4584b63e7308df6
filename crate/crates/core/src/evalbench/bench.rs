//! Experiment drivers producing long-format result rows.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pwc::{fit_pwc, pwc_nll, PwcConfig, PwcMode};
use super::{discriminator_score, ResultRow};
use crate::arf::{arf_fit, ArfConfig};
use crate::error::{Error, Result};
use crate::forde::{forde_fit, nll, FordeConfig, NllReport};
use crate::forest::ForestConfig;
use crate::forge::{forge_sample, ForgePreset};
use crate::rng::{derive_seed, tag};
use crate::simgen::{gen_shape, gen_toeplitz_with_target, toeplitz_log_density, ShapeName, ShapeSpec, ToeplitzSpec};
use crate::tabular::{load_csv_files, mean, CsvOptions, Dataset};

/// Test-set NLL of the three forest density estimators on one simulated
/// Toeplitz draw, plus the NLL under the true density.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ToeplitzCell {
    pub forde: NllReport,
    pub pwc_unsupervised: NllReport,
    pub pwc_supervised: NllReport,
    pub truth: f64,
}

/// Densities are over the features only; the logistic target steers the
/// supervised splits.
#[allow(clippy::too_many_arguments)]
pub fn toeplitz_cell(
    d: usize,
    rho: f64,
    n_trn: usize,
    n_tst: usize,
    informative_fraction: f64,
    seed: u64,
    arf: &ArfConfig,
    pwc: &PwcConfig,
) -> Result<ToeplitzCell> {
    let spec = |n, s| ToeplitzSpec { n, d, rho, seed: s };
    let train = gen_toeplitz_with_target(&spec(n_trn, derive_seed(seed, 1)), informative_fraction)?;
    let test = gen_toeplitz_with_target(&spec(n_tst, derive_seed(seed, 2)), informative_fraction)?;
    let target = d;
    let (x_trn, _) = train.split_off_column(target);
    let (x_tst, _) = test.split_off_column(target);

    let arf_model = arf_fit(&x_trn, &ArfConfig { seed, ..arf.clone() })?;
    let forde = forde_fit(&arf_model, &x_trn, &FordeConfig::default())?;
    let unsup = fit_pwc(&x_trn, PwcMode::Unsupervised(&arf_model), pwc)?;
    let mut sup_cfg = pwc.clone();
    sup_cfg.forest.seed = seed;
    let sup = fit_pwc(&train, PwcMode::Supervised { target }, &sup_cfg)?;
    let truth = -mean(&x_tst.rows().map(|r| toeplitz_log_density(r, rho)).collect::<Vec<_>>());
    Ok(ToeplitzCell {
        forde: nll(&forde, &x_tst)?,
        pwc_unsupervised: pwc_nll(&unsup, &x_tst)?,
        pwc_supervised: pwc_nll(&sup, &x_tst)?,
        truth,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToeplitzBench {
    pub d: usize,
    pub rho: f64,
    /// Training sizes at the fixed informative fraction.
    pub n_grid: Vec<usize>,
    pub fixed_fraction: f64,
    /// Informative fractions at the fixed training size.
    pub fraction_grid: Vec<f64>,
    pub fixed_n: usize,
    pub n_test: usize,
    pub replicates: usize,
    pub seed: u64,
    pub arf: ArfConfig,
    pub pwc: PwcConfig,
}

impl Default for ToeplitzBench {
    fn default() -> Self {
        ToeplitzBench {
            d: 10,
            rho: 0.9,
            n_grid: vec![500, 1000, 2000, 4000],
            fixed_fraction: 0.5,
            fraction_grid: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            fixed_n: 2000,
            n_test: 1000,
            replicates: 5,
            seed: 0,
            arf: ArfConfig::default(),
            pwc: PwcConfig::default(),
        }
    }
}

pub fn bench_toeplitz(b: &ToeplitzBench) -> Result<Vec<ResultRow>> {
    let mut settings: Vec<(usize, f64)> = b.n_grid.iter().map(|&n| (n, b.fixed_fraction)).collect();
    settings.extend(b.fraction_grid.iter().map(|&f| (b.fixed_n, f)));
    settings.dedup();
    let mut rows = Vec::new();
    for (n, f) in settings {
        let dataset = format!("toeplitz-n{n}-informative{f}");
        for r in 0..b.replicates {
            let seed = derive_seed(b.seed, r as u64);
            let cell = toeplitz_cell(b.d, b.rho, n, b.n_test, f, seed, &b.arf, &b.pwc)?;
            for (method, rep) in [
                ("forde", &cell.forde),
                ("pwc-unsup", &cell.pwc_unsupervised),
                ("pwc-sup", &cell.pwc_supervised),
            ] {
                rows.push(ResultRow::new(&dataset, method, "", "nll", rep.mean, Some(seed)));
                let zeros = rep.zero_density_rows.len() as f64;
                rows.push(ResultRow::new(&dataset, method, "", "zero_density_rows", zeros, Some(seed)));
            }
            rows.push(ResultRow::new(&dataset, "truth", "", "nll", cell.truth, Some(seed)));
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapesBench {
    pub shapes: Vec<ShapeName>,
    pub n: usize,
    pub seeds: Vec<u64>,
    pub preset: ForgePreset,
    pub discriminator: ForestConfig,
}

impl Default for ShapesBench {
    fn default() -> Self {
        ShapesBench {
            shapes: ShapeName::ALL.to_vec(),
            n: 2000,
            seeds: (0..5).collect(),
            preset: ForgePreset::Default,
            discriminator: ForestConfig::default(),
        }
    }
}

/// Discriminator accuracy of forest samples against their training data,
/// with as many synthetic rows as real ones.
pub fn bench_shapes(b: &ShapesBench) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &shape in &b.shapes {
        for &seed in &b.seeds {
            let real = gen_shape(&ShapeSpec {
                name: shape,
                n: b.n,
                seed,
            })?;
            let (_, model) =
                crate::fit_density(&real, &b.preset.arf_config(seed), &FordeConfig::default())?;
            let synth = forge_sample(&model, b.n, derive_seed(seed, tag::FORGE))?;
            let score = discriminator_score(&real, &synth, &b.discriminator, derive_seed(seed, 3))?;
            rows.push(ResultRow::new(&shape.to_string(), "forge", "", "discriminator_accuracy", score, Some(seed)));
        }
    }
    Ok(rows)
}

/// Training (train plus validation) and test tables of a Twenty Datasets
/// benchmark stored as `<name>.ts.data`, `<name>.valid.data` and
/// `<name>.test.data`, headerless and comma separated.
pub fn load_twenty_dataset(dir: &Path, name: &str) -> Result<(Dataset, Dataset)> {
    let file = |suffix: &str| -> PathBuf { dir.join(format!("{name}.{suffix}.data")) };
    let train = [file("ts"), file("train")]
        .into_iter()
        .find(|p| p.exists())
        .unwrap_or_else(|| file("ts"));
    let paths = [train, file("valid"), file("test")];
    let refs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
    let options = CsvOptions {
        has_header: false,
        ..CsvOptions::default()
    };
    let mut tables = load_csv_files(&refs, &options)?.into_iter();
    let (trn, val, tst) = match (tables.next(), tables.next(), tables.next()) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::Internal("expected three tables".into())),
    };
    Ok((trn.vstack(&val)?, tst))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwentyBench {
    pub dir: PathBuf,
    pub names: Vec<String>,
    pub arf: ArfConfig,
}

/// Test NLL of FORDE on each named dataset found in `dir`.
pub fn bench_twentyds(b: &TwentyBench) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for name in &b.names {
        let (train, test) = load_twenty_dataset(&b.dir, name)?;
        let (_, model) = crate::fit_density(&train, &b.arf, &FordeConfig::default())?;
        let report = nll(&model, &test)?;
        rows.push(ResultRow::new(name, "forde", "", "nll", report.mean, Some(b.arf.seed)));
        rows.push(ResultRow::new(name, "forde", "", "nll_se", report.std_error, Some(b.arf.seed)));
    }
    Ok(rows)
}
