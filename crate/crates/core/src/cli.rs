//! The `arf` command-line tool.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::arf::{arf_fit, ArfConfig};
use crate::error::{Error, Result};
use crate::evalbench::{
    bench_shapes, bench_toeplitz, bench_twentyds, generator_by_name, run_efficacy, write_results, Learner,
    ShapesBench, ToeplitzBench, TwentyBench,
};
use crate::forde::{forde_fit, nll, FordeConfig};
use crate::forge::{conditional_sample, Evidence, ForgePreset, Reweighting};
use crate::model_file::ModelFile;
use crate::simgen::{gen_shape, gen_toeplitz_gaussian, gen_toeplitz_with_target, ShapeName, ShapeSpec, ToeplitzSpec};
use crate::tabular::{load_csv_files, load_csv_with, load_schema, save_csv, split_train_test, CsvOptions, Dataset};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "arf", version, about = "Adversarial random forests for tabular density estimation and synthesis")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, env = "ARF_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit an adversarial forest and its density model.
    Train(TrainArgs),
    /// Draw synthetic rows from a model.
    Sample(SampleArgs),
    /// Mean negative log-likelihood of a table under a model.
    Nll(NllArgs),
    /// Write a simulated dataset.
    Simulate(SimulateArgs),
    /// Train-on-synthetic, test-on-real evaluation.
    Efficacy(EfficacyArgs),
    /// Run a benchmark suite and write long-format results.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    /// JSON schema; inferred from the data when absent.
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// The CSV has no header; columns are named x1..xd.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: DataArgs,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    #[arg(long, default_value_t = 2)]
    pub min_node: usize,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    #[arg(long, default_value_t = 10)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Score zero-density rows at a tiny floor instead of excluding them.
    #[arg(long)]
    pub zero_floor: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ReweightArg {
    Coverage,
    ExactBayes,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Constraints like `x1=1.0:1.2;class=a|b`.
    #[arg(long)]
    pub evidence: Option<String>,
    #[arg(long, value_enum, default_value = "coverage")]
    pub reweighting: ReweightArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct NllArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Shape dataset; omit for the Toeplitz Gaussian.
    #[arg(long, value_parser = parse_shape, conflicts_with_all = ["d", "rho", "informative"])]
    pub name: Option<ShapeName>,
    /// Toeplitz Gaussian (the default when no shape is named).
    #[arg(long)]
    pub toeplitz: bool,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub rho: Option<f64>,
    /// Append a logistic target `y` with this fraction of informative features.
    #[arg(long)]
    pub informative: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_shape(s: &str) -> std::result::Result<ShapeName, String> {
    s.parse::<ShapeName>().map_err(|e| e.to_string())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GeneratorArg {
    Forge,
    Identity,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum PresetArg {
    Default,
    Benchmark,
}

impl From<PresetArg> for ForgePreset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Default => ForgePreset::Default,
            PresetArg::Benchmark => ForgePreset::Benchmark,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LearnerArg {
    Logreg,
    Dtree,
}

#[derive(Args, Debug)]
pub struct EfficacyArgs {
    #[command(flatten)]
    pub input: DataArgs,
    /// Held-out CSV; when absent a stratified split of `--data` is used.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    pub test_fraction: f64,
    #[arg(long)]
    pub target: String,
    #[arg(long, value_enum, default_value = "forge")]
    pub generator: GeneratorArg,
    #[arg(long, value_enum, default_value = "benchmark")]
    pub preset: PresetArg,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["logreg", "dtree"])]
    pub learners: Vec<LearnerArg>,
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Suite {
    Toeplitz,
    Shapes,
    Twentyds,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub suite: Suite,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trees: usize,
    /// Comma-separated training sizes (toeplitz).
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    /// Comma-separated informative fractions (toeplitz).
    #[arg(long, value_delimiter = ',')]
    pub fractions: Option<Vec<f64>>,
    /// Rows per shape dataset (shapes).
    #[arg(long, default_value_t = 2000)]
    pub n: usize,
    /// Directory with `<name>.ts.data`, `.valid.data`, `.test.data` (twentyds).
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Comma-separated dataset names (twentyds).
    #[arg(long, value_delimiter = ',')]
    pub datasets: Option<Vec<String>>,
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn load_table(input: &DataArgs) -> Result<Dataset> {
    let schema = input.schema.as_deref().map(load_schema).transpose()?;
    let options = CsvOptions {
        has_header: !input.no_header,
        ..CsvOptions::default()
    };
    load_csv_with(&input.data, schema.as_ref(), &options)
}

fn with_data_table(path: &Path, no_header: bool, model: &ModelFile) -> Result<Dataset> {
    let options = CsvOptions {
        has_header: !no_header,
        ..CsvOptions::default()
    };
    load_csv_with(path, Some(&model.model.schema), &options)
}

fn train(a: &TrainArgs) -> std::result::Result<i32, CliError> {
    let ds = load_table(&a.input)?;
    let mut cfg = ArfConfig {
        delta: a.delta,
        max_iters: a.max_iters,
        seed: a.seed,
        ..ArfConfig::default()
    };
    cfg.forest.num_trees = a.trees;
    cfg.forest.min_node_size = a.min_node;
    let start = Instant::now();
    let arf = arf_fit(&ds, &cfg)?;
    let forde_cfg = FordeConfig {
        zero_floor: a.zero_floor,
        ..FordeConfig::default()
    };
    let model = forde_fit(&arf, &ds, &forde_cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    ModelFile::new(&arf, model).save(&a.out)?;
    println!("rows: {}  columns: {}", ds.n_rows(), ds.n_cols());
    println!("iterations: {}", arf.iterations_run);
    let trace: Vec<String> = arf.trace.iter().map(|v| format!("{v:.4}")).collect();
    println!("oob accuracy trace: {}", trace.join(" "));
    println!("converged: {}", arf.converged);
    println!("wall time: {elapsed:.3} s");
    println!("model written to {}", a.out.display());
    if arf.converged {
        Ok(EXIT_OK)
    } else {
        eprintln!("warning: iteration budget exhausted before convergence");
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn sample(a: &SampleArgs) -> std::result::Result<i32, CliError> {
    let file = ModelFile::load(&a.model)?;
    let evidence = match &a.evidence {
        Some(text) => Evidence::parse(text, &file.model.schema)?,
        None => Evidence::default(),
    };
    let mode = match a.reweighting {
        ReweightArg::Coverage => Reweighting::Coverage,
        ReweightArg::ExactBayes => Reweighting::ExactBayes,
    };
    let synth = conditional_sample(&file.model, &evidence, a.n, a.seed, mode)?;
    save_csv(&synth, &a.out)?;
    println!("{} rows written to {}", synth.n_rows(), a.out.display());
    Ok(EXIT_OK)
}

fn nll_cmd(a: &NllArgs) -> std::result::Result<i32, CliError> {
    let file = ModelFile::load(&a.model)?;
    let ds = with_data_table(&a.data, a.no_header, &file)?;
    let report = nll(&file.model, &ds)?;
    println!("rows: {}", report.n_rows);
    println!("scored rows: {}", report.n_scored);
    println!("mean nll: {:.6}", report.mean);
    println!("std error: {:.6}", report.std_error);
    println!("zero-density rows: {}", report.zero_density_rows.len());
    Ok(EXIT_OK)
}

fn simulate(a: &SimulateArgs) -> std::result::Result<i32, CliError> {
    let ds = match a.name {
        Some(name) if !a.toeplitz => gen_shape(&ShapeSpec {
            name,
            n: a.n,
            seed: a.seed,
        })?,
        Some(_) => return Err(Error::Config("--name and --toeplitz are exclusive".into()).into()),
        None => {
            let spec = ToeplitzSpec {
                n: a.n,
                d: a.d.unwrap_or(10),
                rho: a.rho.unwrap_or(0.9),
                seed: a.seed,
            };
            match a.informative {
                Some(f) => gen_toeplitz_with_target(&spec, f)?,
                None => gen_toeplitz_gaussian(&spec)?,
            }
        }
    };
    save_csv(&ds, &a.out)?;
    println!("{} rows written to {}", ds.n_rows(), a.out.display());
    Ok(EXIT_OK)
}

fn efficacy(a: &EfficacyArgs) -> std::result::Result<i32, CliError> {
    let (train, test) = match &a.test {
        Some(path) => load_pair(&a.input, path)?,
        None => {
            let data = load_table(&a.input)?;
            let target = data
                .schema()
                .index_of(&a.target)
                .ok_or_else(|| Error::Config(format!("target {:?} is not a column", a.target)))?;
            split_train_test(&data, a.test_fraction, a.seed, Some(target))?
        }
    };
    let generator_name = match a.generator {
        GeneratorArg::Forge => "forge",
        GeneratorArg::Identity => "identity",
    };
    let generator = generator_by_name(generator_name, a.preset.into())?;
    let learners: Vec<Learner> = a
        .learners
        .iter()
        .map(|l| match l {
            LearnerArg::Logreg => Learner::Logreg,
            LearnerArg::Dtree => Learner::Dtree,
        })
        .collect();
    let seeds: Vec<u64> = (0..a.seeds).map(|k| a.seed + k).collect();
    let report = run_efficacy(&train, &test, &a.target, generator.as_ref(), &learners, &seeds)?;
    for &l in &learners {
        let s = report.learner_summary(l);
        println!(
            "{:<8} oracle acc {:.4} f1 {:.4} | {} acc {:.4} ± {:.4} f1 {:.4} ± {:.4}",
            l.name(),
            s.oracle_accuracy.mean,
            s.oracle_f1.mean,
            report.generator,
            s.synthetic_accuracy.mean,
            s.synthetic_accuracy.std_error,
            s.synthetic_f1.mean,
            s.synthetic_f1.std_error
        );
    }
    let avg = report.average();
    println!(
        "average  oracle acc {:.4} | {} acc {:.4}  time {:.3} s",
        avg.oracle_accuracy.mean,
        report.generator,
        avg.synthetic_accuracy.mean,
        report.mean_wall_time()
    );
    if let Some(out) = &a.out {
        let name = a.input.data.file_stem().and_then(|s| s.to_str()).unwrap_or("data");
        write_results(&report.to_rows(name), out)?;
    }
    Ok(EXIT_OK)
}

/// Train and test tables under one schema: the given schema file, or one
/// inferred from both files together.
fn load_pair(input: &DataArgs, test: &Path) -> Result<(Dataset, Dataset)> {
    let options = CsvOptions {
        has_header: !input.no_header,
        ..CsvOptions::default()
    };
    if let Some(s) = &input.schema {
        let schema = load_schema(s)?;
        return Ok((
            load_csv_with(&input.data, Some(&schema), &options)?,
            load_csv_with(test, Some(&schema), &options)?,
        ));
    }
    let mut tables = load_csv_files(&[input.data.as_path(), test], &options)?.into_iter();
    match (tables.next(), tables.next()) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::Internal("expected two tables".into())),
    }
}

fn bench(a: &BenchArgs) -> std::result::Result<i32, CliError> {
    let mut arf = ArfConfig::default();
    arf.forest.num_trees = a.trees;
    let rows = match a.suite {
        Suite::Toeplitz => {
            let mut b = ToeplitzBench {
                replicates: a.replicates,
                seed: a.seed,
                arf,
                ..ToeplitzBench::default()
            };
            b.pwc.forest.num_trees = a.trees;
            if let Some(g) = &a.n_grid {
                b.n_grid = g.clone();
            }
            if let Some(f) = &a.fractions {
                b.fraction_grid = f.clone();
            }
            bench_toeplitz(&b)?
        }
        Suite::Shapes => bench_shapes(&ShapesBench {
            n: a.n,
            seeds: (0..a.replicates as u64).map(|k| a.seed + k).collect(),
            ..ShapesBench::default()
        })?,
        Suite::Twentyds => {
            let dir = a
                .data_dir
                .clone()
                .ok_or_else(|| Error::Config("--data-dir is required for the twentyds suite".into()))?;
            let names = a
                .datasets
                .clone()
                .ok_or_else(|| Error::Config("--datasets is required for the twentyds suite".into()))?;
            arf.seed = a.seed;
            bench_twentyds(&TwentyBench { dir, names, arf })?
        }
    };
    write_results(&rows, &a.out)?;
    println!("{} result rows written to {}", rows.len(), a.out.display());
    Ok(EXIT_OK)
}

fn dispatch(cli: &Cli) -> std::result::Result<i32, CliError> {
    match &cli.command {
        Command::Train(a) => train(a),
        Command::Sample(a) => sample(a),
        Command::Nll(a) => nll_cmd(a),
        Command::Simulate(a) => simulate(a),
        Command::Efficacy(a) => efficacy(a),
        Command::Bench(a) => bench(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            // A bare invocation shows help but is still a usage error.
            return if e.kind() == clap::error::ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                EXIT_USAGE
            } else {
                code
            };
        }
    };
    let result = match cli.threads {
        Some(t) if t > 0 => crate::with_threads(t, || dispatch(&cli)),
        _ => dispatch(&cli),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
