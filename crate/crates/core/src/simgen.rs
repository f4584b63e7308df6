//! Deterministic simulation generators: Toeplitz Gaussians with an optional
//! logistic target, and four two-dimensional labelled shape datasets.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, tag, StreamRng};
use crate::tabular::{Column, Dataset, Schema};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToeplitzSpec {
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    pub seed: u64,
}

fn continuous_schema(d: usize) -> Schema {
    Schema::new((1..=d).map(|j| Column::continuous(format!("x{j}"))).collect()).expect("distinct names")
}

/// `n` draws from `N(0, S)` with `S[i][j] = rho^|i - j|`, generated as the
/// stationary AR(1) chain `x1 ~ N(0, 1)`, `x(j+1) = rho x(j) + sqrt(1 - rho^2) e`.
pub fn gen_toeplitz_gaussian(spec: &ToeplitzSpec) -> Result<Dataset> {
    if spec.d == 0 {
        return Err(Error::Config("dimension must be at least 1".into()));
    }
    if !(spec.rho > -1.0 && spec.rho < 1.0) {
        return Err(Error::Config(format!("rho {} outside (-1, 1)", spec.rho)));
    }
    let mut rng = stream_rng(spec.seed, tag::SIMGEN, 0);
    let scale = (1.0 - spec.rho * spec.rho).sqrt();
    let mut cells = Vec::with_capacity(spec.n * spec.d);
    for _ in 0..spec.n {
        let mut x: f64 = rng.sample(StandardNormal);
        cells.push(x);
        for _ in 1..spec.d {
            let e: f64 = rng.sample(StandardNormal);
            x = spec.rho * x + scale * e;
            cells.push(x);
        }
    }
    Dataset::new(continuous_schema(spec.d), cells)
}

/// Exact log-density of the Toeplitz Gaussian at `row`.
pub fn toeplitz_log_density(row: &[f64], rho: f64) -> f64 {
    let ln_2pi = (2.0 * PI).ln();
    let var = 1.0 - rho * rho;
    let mut lp = -0.5 * (ln_2pi + row[0] * row[0]);
    for w in row.windows(2) {
        let r = w[1] - rho * w[0];
        lp += -0.5 * (ln_2pi + var.ln() + r * r / var);
    }
    lp
}

/// Differential entropy in nats, the expected NLL of the true density.
pub fn toeplitz_entropy(d: usize, rho: f64) -> f64 {
    0.5 * d as f64 * (2.0 * PI * std::f64::consts::E).ln() + 0.5 * (d as f64 - 1.0) * (1.0 - rho * rho).ln()
}

/// Coefficients with the first `round(fraction * d)` entries 1, the rest 0.
pub fn sparse_beta(d: usize, informative_fraction: f64) -> Vec<f64> {
    let k = (d as f64 * informative_fraction).round() as usize;
    (0..d).map(|j| if j < k { 1.0 } else { 0.0 }).collect()
}

/// Independent labels with `P(y = 1 | x) = 1 / (1 + exp(-x . beta))`.
pub fn gen_logistic_target(x: &Dataset, beta: &[f64], seed: u64) -> Result<Vec<u32>> {
    if beta.len() != x.n_cols() {
        return Err(Error::Config(format!("beta has {} entries for {} columns", beta.len(), x.n_cols())));
    }
    let mut rng = stream_rng(seed, tag::SIMGEN, 1);
    Ok(x.rows()
        .map(|row| {
            let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            let p = 1.0 / (1.0 + (-eta).exp());
            u32::from(rng.random::<f64>() < p)
        })
        .collect())
}

/// Toeplitz features plus a binary logistic target column `y`.
pub fn gen_toeplitz_with_target(spec: &ToeplitzSpec, informative_fraction: f64) -> Result<Dataset> {
    let x = gen_toeplitz_gaussian(spec)?;
    let y = gen_logistic_target(&x, &sparse_beta(spec.d, informative_fraction), spec.seed)?;
    append_label_column(&x, "y", &["0", "1"], &y)
}

pub(crate) fn append_label_column(x: &Dataset, name: &str, levels: &[&str], y: &[u32]) -> Result<Dataset> {
    let mut columns = x.schema().columns().to_vec();
    columns.push(Column::categorical(name, levels.iter().copied()));
    let mut cells = Vec::with_capacity(x.n_rows() * (x.n_cols() + 1));
    for (row, &label) in x.rows().zip(y) {
        cells.extend_from_slice(row);
        cells.push(label as f64);
    }
    Dataset::new(Schema::new(columns)?, cells)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeName {
    Cassini,
    Smiley,
    Twomoons,
    Shapes,
}

impl ShapeName {
    pub const ALL: [ShapeName; 4] = [ShapeName::Cassini, ShapeName::Smiley, ShapeName::Twomoons, ShapeName::Shapes];

    /// Fixed class proportions.
    pub fn proportions(self) -> &'static [f64] {
        match self {
            ShapeName::Cassini => &[0.4, 0.4, 0.2],
            ShapeName::Smiley => &[1.0 / 6.0, 1.0 / 6.0, 0.25, 5.0 / 12.0],
            ShapeName::Twomoons => &[0.5, 0.5],
            ShapeName::Shapes => &[0.25, 0.25, 0.25, 0.25],
        }
    }
}

impl fmt::Display for ShapeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShapeName::Cassini => "cassini",
            ShapeName::Smiley => "smiley",
            ShapeName::Twomoons => "twomoons",
            ShapeName::Shapes => "shapes",
        })
    }
}

impl FromStr for ShapeName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeName::ALL
            .into_iter()
            .find(|n| n.to_string() == s)
            .ok_or_else(|| Error::Config(format!("unknown shape dataset {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeSpec {
    pub name: ShapeName,
    pub n: usize,
    pub seed: u64,
}

/// Rows per class: floors of `n * p`, remainder spread over the first classes.
fn class_sizes(n: usize, proportions: &[f64]) -> Vec<usize> {
    let mut sizes: Vec<usize> = proportions.iter().map(|p| (n as f64 * p).floor() as usize).collect();
    let mut rest = n - sizes.iter().sum::<usize>();
    for s in sizes.iter_mut() {
        if rest == 0 {
            break;
        }
        *s += 1;
        rest -= 1;
    }
    sizes
}

/// Normal noise truncated at four standard deviations.
fn noise(rng: &mut StreamRng, sd: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        if z.abs() <= 4.0 {
            return sd * z;
        }
    }
}

fn uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn shape_point(name: ShapeName, class: usize, rng: &mut StreamRng) -> (f64, f64) {
    match (name, class) {
        // Two half-circles, the second shifted right and down.
        (ShapeName::Twomoons, 0) => {
            let t = uniform(rng, 0.0, PI);
            (t.cos() + noise(rng, 0.1), t.sin() + noise(rng, 0.1))
        }
        (ShapeName::Twomoons, _) => {
            let t = uniform(rng, 0.0, PI);
            (1.0 - t.cos() + noise(rng, 0.1), 0.5 - t.sin() + noise(rng, 0.1))
        }
        // Upper and lower bananas around a central disk.
        (ShapeName::Cassini, 0 | 1) => {
            let x = uniform(rng, -1.0, 1.0);
            let y = 0.7 + 0.3 * (1.0 - x * x) + uniform(rng, -0.15, 0.15);
            if class == 0 { (x, y) } else { (x, -y) }
        }
        (ShapeName::Cassini, _) => {
            let r = 0.3 * rng.random::<f64>().sqrt();
            let t = uniform(rng, 0.0, 2.0 * PI);
            (r * t.cos(), r * t.sin())
        }
        // Two eyes, a tapered nose and a parabolic mouth.
        (ShapeName::Smiley, 0 | 1) => {
            let cx = if class == 0 { -0.8 } else { 0.8 };
            (cx + noise(rng, 0.1), 1.0 + noise(rng, 0.1))
        }
        (ShapeName::Smiley, 2) => {
            let y = uniform(rng, -0.3, 0.3);
            let half_width = 0.05 + 0.1 * (0.3 - y) / 0.6;
            (uniform(rng, -half_width, half_width), y)
        }
        (ShapeName::Smiley, _) => {
            let x = uniform(rng, -1.0, 1.0);
            (x, x * x - 1.0 + noise(rng, 0.05))
        }
        // Gaussian blob, square, triangle and sine wave in separate quadrants.
        (ShapeName::Shapes, 0) => (-2.0 + noise(rng, 0.25), 2.0 + noise(rng, 0.25)),
        (ShapeName::Shapes, 1) => (uniform(rng, 1.0, 3.0), uniform(rng, 1.0, 3.0)),
        (ShapeName::Shapes, 2) => {
            let (mut u, mut v) = (rng.random::<f64>(), rng.random::<f64>());
            if u + v > 1.0 {
                (u, v) = (1.0 - u, 1.0 - v);
            }
            // Triangle (-3,-3), (-1,-3), (-2,-1).
            (-3.0 + 2.0 * u + v, -3.0 + 2.0 * v)
        }
        (ShapeName::Shapes, _) => {
            let x = uniform(rng, 1.0, 3.0);
            (x, -2.0 + 0.5 * (PI * x).sin() + noise(rng, 0.05))
        }
    }
}

/// Two continuous coordinates `x1`, `x2` and a categorical `class` column
/// with levels `1..K`. Rows are grouped by class.
pub fn gen_shape(spec: &ShapeSpec) -> Result<Dataset> {
    let proportions = spec.name.proportions();
    let k = proportions.len();
    if spec.n < k {
        return Err(Error::Config(format!("{} needs at least {k} rows", spec.name)));
    }
    let levels: Vec<String> = (1..=k).map(|c| c.to_string()).collect();
    let schema = Schema::new(vec![
        Column::continuous("x1"),
        Column::continuous("x2"),
        Column::categorical("class", levels),
    ])?;
    let mut rng = stream_rng(spec.seed, tag::SIMGEN, 2);
    let mut cells = Vec::with_capacity(spec.n * 3);
    for (class, &size) in class_sizes(spec.n, proportions).iter().enumerate() {
        for _ in 0..size {
            let (x, y) = shape_point(spec.name, class, &mut rng);
            cells.extend([x, y, class as f64]);
        }
    }
    Dataset::new(schema, cells)
}
