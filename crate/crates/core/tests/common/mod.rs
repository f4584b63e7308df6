#![allow(dead_code)]

use arf_core::forde::{FeatureDist, FordeModel};
use arf_core::forest::{FeatureBounds, SplitKind, SplitLiteral};
use arf_core::{Column, Dataset, Schema};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn continuous_schema(d: usize) -> Schema {
    Schema::new((1..=d).map(|j| Column::continuous(format!("x{j}"))).collect()).unwrap()
}

pub fn uniform_dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let cells: Vec<f64> = (0..n * d).map(|_| r.random::<f64>()).collect();
    Dataset::new(continuous_schema(d), cells).unwrap()
}

/// Boolean columns from thresholding a Gaussian AR(1) chain, so that
/// neighbouring columns are dependent.
pub fn boolean_dataset(n: usize, d: usize, seed: u64) -> Dataset {
    let schema = Schema::new(
        (1..=d)
            .map(|j| Column::categorical(format!("b{j}"), ["0", "1"]))
            .collect(),
    )
    .unwrap();
    let mut r = rng(seed);
    let mut cells = Vec::with_capacity(n * d);
    for _ in 0..n {
        let mut z: f64 = normal(&mut r);
        for j in 0..d {
            if j > 0 {
                z = 0.8 * z + 0.6 * normal(&mut r);
            }
            cells.push(if z > 0.3 * (j % 3) as f64 - 0.3 { 1.0 } else { 0.0 });
        }
    }
    Dataset::new(schema, cells).unwrap()
}

pub fn normal<R: Rng>(r: &mut R) -> f64 {
    // Box-Muller keeps this independent of the library's samplers.
    let u1: f64 = 1.0 - r.random::<f64>();
    let u2: f64 = r.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn std_error(v: &[f64]) -> f64 {
    let m = mean(v);
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
    (var / v.len() as f64).sqrt()
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}

/// Mean correlation between columns `lag` apart.
pub fn lag_correlation(ds: &Dataset, lag: usize) -> f64 {
    let d = ds.n_cols();
    let r: Vec<f64> = (0..d - lag).map(|j| pearson(&ds.column(j), &ds.column(j + lag))).collect();
    mean(&r)
}

/// Exact Gini decrease `num / den` of splitting class counts `total` into
/// `left` and the rest, from the textbook definition
/// `G(parent) - nl/n G(left) - nr/n G(right)` with `G = 1 - sum p^2`.
pub fn oracle_gain(left: &[u64], total: &[u64]) -> (i128, i128) {
    let right: Vec<u64> = total.iter().zip(left).map(|(t, l)| t - l).collect();
    let n: i128 = total.iter().map(|&c| c as i128).sum();
    let nl: i128 = left.iter().map(|&c| c as i128).sum();
    let nr = n - nl;
    let sq = |v: &[u64]| v.iter().map(|&c| (c as i128) * (c as i128)).sum::<i128>();
    // Common denominator n^2 * nl * nr.
    let num = (n * n - sq(total)) * nl * nr - (nl * nl - sq(left)) * n * nr - (nr * nr - sq(&right)) * n * nl;
    (num, n * n * nl * nr)
}

#[derive(Clone, Debug)]
pub struct OracleSplit {
    pub feature: usize,
    /// Left rows satisfy `x < threshold` for any threshold in
    /// `(below, above]`, or `x == level`.
    pub kind: OracleKind,
    pub gain: (i128, i128),
}

#[derive(Clone, Debug, PartialEq)]
pub enum OracleKind {
    Less { below: f64, above: f64 },
    Equal(usize),
}

fn cmp_frac(a: (i128, i128), b: (i128, i128)) -> std::cmp::Ordering {
    (a.0 * b.1).cmp(&(b.0 * a.1))
}

/// Brute force over every feature and every midpoint or level.
pub fn oracle_best_split(
    ds: &Dataset,
    rows: &[usize],
    labels: &[u32],
    n_classes: usize,
    features: &[usize],
    min_node_size: usize,
) -> Option<OracleSplit> {
    let mut total = vec![0u64; n_classes];
    for &i in rows {
        total[labels[i] as usize] += 1;
    }
    let mut best: Option<OracleSplit> = None;
    let mut sorted_features = features.to_vec();
    sorted_features.sort_unstable();
    for &f in &sorted_features {
        let mut candidates: Vec<(OracleKind, Vec<usize>)> = Vec::new();
        if ds.schema().column(f).is_continuous() {
            let mut values: Vec<f64> = rows.iter().map(|&i| ds.value(i, f)).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for w in values.windows(2) {
                let left: Vec<usize> = rows.iter().copied().filter(|&i| ds.value(i, f) <= w[0]).collect();
                candidates.push((OracleKind::Less { below: w[0], above: w[1] }, left));
            }
        } else {
            for level in 0..ds.schema().column(f).n_levels() {
                let left: Vec<usize> = rows.iter().copied().filter(|&i| ds.level(i, f) == level).collect();
                if !left.is_empty() {
                    candidates.push((OracleKind::Equal(level), left));
                }
            }
        }
        for (kind, left) in candidates {
            if left.len() < min_node_size.max(1) || rows.len() - left.len() < min_node_size.max(1) {
                continue;
            }
            let mut lc = vec![0u64; n_classes];
            for &i in &left {
                lc[labels[i] as usize] += 1;
            }
            let gain = oracle_gain(&lc, &total);
            if gain.0 <= 0 {
                continue;
            }
            // Strictly greater wins; features and values are visited in
            // ascending order so ties keep the earlier candidate.
            if best.as_ref().is_none_or(|b| cmp_frac(gain, b.gain).is_gt()) {
                best = Some(OracleSplit { feature: f, kind, gain });
            }
        }
    }
    best
}

/// Whether a library split equals an oracle split.
pub fn same_split(lib: &SplitLiteral, lib_gain: (u128, u128), o: &OracleSplit) -> bool {
    if lib.feature != o.feature {
        return false;
    }
    let kind_ok = match (&lib.kind, &o.kind) {
        (SplitKind::Less(t), OracleKind::Less { below, above }) => *below < *t && *t <= *above,
        (SplitKind::Equal(l), OracleKind::Equal(m)) => l == m,
        _ => false,
    };
    kind_ok && (lib_gain.0 as i128) * o.gain.1 == o.gain.0 * (lib_gain.1 as i128)
}

/// Integral of every tree's density term, each by a midpoint rule on a grid
/// fitted to every leaf's box, cut to eight standard deviations around the
/// leaf mean. Only continuous models.
pub fn per_tree_integrals(model: &FordeModel, cells_per_dim: usize) -> Vec<f64> {
    model
        .profiles
        .par_iter()
        .map(|leaves| {
            let mut total = 0.0;
            for p in leaves {
                let Some(dist) = &p.dist else { continue };
                if p.coverage <= 0.0 {
                    continue;
                }
                let axes: Vec<(f64, f64)> = dist
                    .iter()
                    .zip(&p.bounds)
                    .map(|(f, b)| match (f, b) {
                        (FeatureDist::Continuous(tn), FeatureBounds::Interval { lo, hi }) => {
                            (lo.max(tn.mu - 8.0 * tn.sigma), hi.min(tn.mu + 8.0 * tn.sigma))
                        }
                        _ => panic!("continuous models only"),
                    })
                    .collect();
                let d = axes.len();
                let steps: Vec<f64> = axes.iter().map(|(a, b)| (b - a) / cells_per_dim as f64).collect();
                let cell: f64 = steps.iter().product();
                let mut idx = vec![0usize; d];
                let mut x = vec![0.0; d];
                let mut sum = 0.0;
                loop {
                    for j in 0..d {
                        x[j] = axes[j].0 + (idx[j] as f64 + 0.5) * steps[j];
                    }
                    sum += p.log_weighted_density(&x).exp();
                    let mut j = 0;
                    while j < d {
                        idx[j] += 1;
                        if idx[j] < cells_per_dim {
                            break;
                        }
                        idx[j] = 0;
                        j += 1;
                    }
                    if j == d {
                        break;
                    }
                }
                total += sum * cell;
            }
            total
        })
        .collect()
}

/// Log-density recomputed from per-tree routing, independent of
/// `FordeModel::log_density`.
pub fn log_density_by_trees(model: &FordeModel, x: &[f64]) -> f64 {
    let terms: Vec<f64> = model
        .trees
        .iter()
        .zip(&model.profiles)
        .map(|(t, p)| p[t.leaf_of(x)].log_weighted_density(x))
        .collect();
    let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + (terms.iter().map(|t| (t - top).exp()).sum::<f64>() / terms.len() as f64).ln()
}

pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal CDF by composite Simpson integration from -12.
pub fn std_normal_cdf_numeric(x: f64) -> f64 {
    let a = -12.0;
    let n = 20_000;
    let h = (x - a) / n as f64;
    let mut s = std_normal_pdf(a) + std_normal_pdf(x);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * std_normal_pdf(a + k as f64 * h);
    }
    s * h / 3.0
}
