//! Simple classifiers for the efficacy protocol.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::{argmax, GrowParams, Tree};
use crate::rng::stream_rng;
use crate::tabular::{mean, sample_std, Dataset};

/// Predicts the level index of the target column from a full-width row.
pub trait Classifier: Send + Sync {
    fn predict(&self, row: &[f64]) -> usize;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Learner {
    Logreg,
    Dtree,
}

impl Learner {
    pub const ALL: [Learner; 2] = [Learner::Logreg, Learner::Dtree];

    pub fn name(self) -> &'static str {
        match self {
            Learner::Logreg => "logreg",
            Learner::Dtree => "dtree",
        }
    }

    /// Fits with default hyperparameters.
    pub fn fit(self, ds: &Dataset, target: usize, seed: u64) -> Result<Box<dyn Classifier>> {
        Ok(match self {
            Learner::Logreg => Box::new(train_logreg(ds, target, &LogRegParams::default())?),
            Learner::Dtree => Box::new(train_dtree(ds, target, &DtreeParams { seed, ..DtreeParams::default() })?),
        })
    }
}

impl std::str::FromStr for Learner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" => Ok(Learner::Logreg),
            "dtree" => Ok(Learner::Dtree),
            _ => Err(Error::Config(format!("unknown learner {s:?}"))),
        }
    }
}

fn check_target(ds: &Dataset, target: usize) -> Result<usize> {
    if target >= ds.n_cols() {
        return Err(Error::Config(format!("target column {target} out of range")));
    }
    let k = ds.schema().column(target).n_levels();
    if k < 2 {
        return Err(Error::Config(format!(
            "target {} must be categorical with at least two levels",
            ds.schema().column(target).name
        )));
    }
    if ds.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(k)
}

#[derive(Clone, Debug)]
enum Encoding {
    Continuous { col: usize, center: f64, scale: f64 },
    OneHot { col: usize, n_levels: usize },
}

/// Standardized continuous columns and one-hot categoricals, target skipped.
#[derive(Clone, Debug)]
pub struct FeatureEncoder {
    parts: Vec<Encoding>,
    width: usize,
}

impl FeatureEncoder {
    pub fn fit(ds: &Dataset, target: usize) -> FeatureEncoder {
        let mut parts = Vec::new();
        let mut width = 0;
        for (j, column) in ds.schema().columns().iter().enumerate() {
            if j == target {
                continue;
            }
            if column.is_continuous() {
                let values = ds.column(j);
                let scale = sample_std(&values).filter(|s| *s > 0.0).unwrap_or(1.0);
                parts.push(Encoding::Continuous {
                    col: j,
                    center: mean(&values),
                    scale,
                });
                width += 1;
            } else {
                parts.push(Encoding::OneHot {
                    col: j,
                    n_levels: column.n_levels(),
                });
                width += column.n_levels();
            }
        }
        FeatureEncoder { parts, width }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn encode(&self, row: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width);
        for part in &self.parts {
            match *part {
                Encoding::Continuous { col, center, scale } => out.push((row[col] - center) / scale),
                Encoding::OneHot { col, n_levels } => {
                    let at = out.len();
                    out.resize(at + n_levels, 0.0);
                    out[at + row[col] as usize] = 1.0;
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRegParams {
    /// Stop once the gradient's Euclidean norm falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Ridge penalty on non-intercept weights.
    pub l2: f64,
}

impl Default for LogRegParams {
    fn default() -> Self {
        LogRegParams {
            tol: 1e-6,
            max_iter: 10_000,
            l2: 0.0,
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy of weights `w` (intercept first) and its
/// gradient. `y` holds 0/1 targets.
pub fn logistic_loss_grad(x: &[Vec<f64>], y: &[f64], w: &[f64], l2: f64) -> (f64, Vec<f64>) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; w.len()];
    for (xi, &yi) in x.iter().zip(y) {
        let z = w[0] + xi.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>();
        loss += softplus(z) - yi * z;
        let r = sigmoid(z) - yi;
        grad[0] += r;
        for (g, v) in grad[1..].iter_mut().zip(xi) {
            *g += r * v;
        }
    }
    loss /= n;
    for g in &mut grad {
        *g /= n;
    }
    if l2 > 0.0 {
        for (g, v) in grad[1..].iter_mut().zip(&w[1..]) {
            *g += l2 * v;
        }
        loss += 0.5 * l2 * w[1..].iter().map(|v| v * v).sum::<f64>();
    }
    (loss, grad)
}

fn loss_only(x: &[Vec<f64>], y: &[f64], w: &[f64], l2: f64) -> f64 {
    let mut loss = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let z = w[0] + xi.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>();
        loss += softplus(z) - yi * z;
    }
    loss / x.len() as f64 + 0.5 * l2 * w[1..].iter().map(|v| v * v).sum::<f64>()
}

/// Gradient descent with backtracking line search. Returns the weights and
/// the number of iterations taken.
pub fn fit_binary_logistic(x: &[Vec<f64>], y: &[f64], params: &LogRegParams) -> (Vec<f64>, usize) {
    let p = x.first().map_or(0, Vec::len) + 1;
    let mut w = vec![0.0; p];
    let mut step = 1.0;
    let mut it = 0;
    while it < params.max_iter {
        let (loss, grad) = logistic_loss_grad(x, y, &w, params.l2);
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        if g2.sqrt() < params.tol {
            break;
        }
        it += 1;
        let mut t = step;
        let mut candidate;
        loop {
            candidate = w.iter().zip(&grad).map(|(wi, gi)| wi - t * gi).collect::<Vec<_>>();
            if loss_only(x, y, &candidate, params.l2) <= loss - 0.5 * t * g2 || t < 1e-12 {
                break;
            }
            t *= 0.5;
        }
        w = candidate;
        step = (2.0 * t).min(1e6);
    }
    (w, it)
}

/// Logistic regression; one-vs-rest for more than two classes.
#[derive(Clone, Debug)]
pub struct LogisticRegression {
    encoder: FeatureEncoder,
    /// One weight vector for binary targets, one per class otherwise.
    pub weights: Vec<Vec<f64>>,
    pub iterations: Vec<usize>,
}

pub fn train_logreg(ds: &Dataset, target: usize, params: &LogRegParams) -> Result<LogisticRegression> {
    let k = check_target(ds, target)?;
    let encoder = FeatureEncoder::fit(ds, target);
    let x: Vec<Vec<f64>> = ds.rows().map(|r| encoder.encode(r)).collect();
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("encoded feature".into()));
    }
    let labels: Vec<usize> = (0..ds.n_rows()).map(|i| ds.level(i, target)).collect();
    let classes: Vec<usize> = if k == 2 { vec![1] } else { (0..k).collect() };
    let (weights, iterations) = classes
        .iter()
        .map(|&c| {
            let y: Vec<f64> = labels.iter().map(|&l| f64::from(u8::from(l == c))).collect();
            fit_binary_logistic(&x, &y, params)
        })
        .unzip();
    Ok(LogisticRegression {
        encoder,
        weights,
        iterations,
    })
}

impl Classifier for LogisticRegression {
    fn predict(&self, row: &[f64]) -> usize {
        let x = self.encoder.encode(row);
        let scores: Vec<f64> = self
            .weights
            .iter()
            .map(|w| w[0] + x.iter().zip(&w[1..]).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        if scores.len() == 1 {
            usize::from(scores[0] >= 0.0)
        } else {
            argmax(&scores)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DtreeParams {
    /// Defaults to 15 for binary and 30 for multiclass targets.
    pub max_depth: Option<usize>,
    pub min_node_size: usize,
    pub seed: u64,
}

impl Default for DtreeParams {
    fn default() -> Self {
        DtreeParams {
            max_depth: None,
            min_node_size: 1,
            seed: 0,
        }
    }
}

/// Single CART tree on all rows and all features, predicting the majority
/// class of the leaf.
#[derive(Clone, Debug)]
pub struct DecisionTree {
    pub tree: Tree,
    target: usize,
}

pub fn train_dtree(ds: &Dataset, target: usize, params: &DtreeParams) -> Result<DecisionTree> {
    let k = check_target(ds, target)?;
    if ds.n_cols() < 2 {
        return Err(Error::Config("no feature columns besides the target".into()));
    }
    let (x, y) = ds.split_off_column(target);
    let labels: Vec<u32> = y.iter().map(|&v| v as u32).collect();
    let grow = GrowParams {
        mtry: x.n_cols(),
        min_node_size: params.min_node_size.max(1),
        max_depth: Some(params.max_depth.unwrap_or(if k == 2 { 15 } else { 30 })),
        n_classes: k,
    };
    let mut rng = stream_rng(params.seed, crate::rng::tag::EFFICACY, 0);
    let tree = Tree::grow(&x, &labels, (0..x.n_rows()).collect(), &grow, &mut rng)?;
    Ok(DecisionTree { tree, target })
}

impl Classifier for DecisionTree {
    fn predict(&self, row: &[f64]) -> usize {
        let mut x = row.to_vec();
        x.remove(self.target);
        let counts = &self.tree.leaf_node(&x).class_counts;
        let mut best = 0;
        for (c, &v) in counts.iter().enumerate() {
            if v > counts[best] {
                best = c;
            }
        }
        best
    }
}

pub fn accuracy(truth: &[usize], pred: &[usize]) -> f64 {
    let hits = truth.iter().zip(pred).filter(|(a, b)| a == b).count();
    hits as f64 / truth.len().max(1) as f64
}

fn f1_for(truth: &[usize], pred: &[usize], c: usize) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&t, &p) in truth.iter().zip(pred) {
        match (t == c, p == c) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return 0.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
}

/// F1 of class 1 for binary targets, otherwise the unweighted mean over the
/// classes present in `truth` or `pred`.
pub fn f1_score(truth: &[usize], pred: &[usize], n_classes: usize) -> f64 {
    if n_classes == 2 {
        return f1_for(truth, pred, 1);
    }
    let mut present = vec![false; n_classes];
    for &c in truth.iter().chain(pred) {
        present[c] = true;
    }
    let classes: Vec<usize> = (0..n_classes).filter(|&c| present[c]).collect();
    classes.iter().map(|&c| f1_for(truth, pred, c)).sum::<f64>() / classes.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Column, Schema};

    fn separable(n: usize) -> Dataset {
        let schema = Schema::new(vec![
            Column::continuous("a"),
            Column::continuous("b"),
            Column::categorical("y", ["0", "1"]),
        ])
        .unwrap();
        let mut rng = stream_rng(3, 0, 0);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                use rand::Rng;
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                let y = if a + 2.0 * b > 0.1 { 1.0 } else { 0.0 };
                vec![a, b, y]
            })
            .collect();
        Dataset::from_rows(schema, &rows).unwrap()
    }

    #[test]
    fn logreg_separates_separable_data() {
        let ds = separable(400);
        let m = train_logreg(&ds, 2, &LogRegParams::default()).unwrap();
        let truth: Vec<usize> = (0..ds.n_rows()).map(|i| ds.level(i, 2)).collect();
        let pred: Vec<usize> = ds.rows().map(|r| m.predict(r)).collect();
        assert!(accuracy(&truth, &pred) >= 0.99);
    }

    #[test]
    fn dtree_fits_training_data_and_respects_depth() {
        let ds = separable(300);
        let m = train_dtree(&ds, 2, &DtreeParams::default()).unwrap();
        assert!(m.tree.depth() <= 15);
        let truth: Vec<usize> = (0..ds.n_rows()).map(|i| ds.level(i, 2)).collect();
        let pred: Vec<usize> = ds.rows().map(|r| m.predict(r)).collect();
        assert_eq!(accuracy(&truth, &pred), 1.0);
        let shallow = train_dtree(&ds, 2, &DtreeParams { max_depth: Some(2), ..Default::default() }).unwrap();
        assert!(shallow.tree.depth() <= 2);
    }

    #[test]
    fn f1_binary_and_macro() {
        let t = [1, 1, 0, 0];
        let p = [1, 0, 0, 1];
        assert!((f1_score(&t, &p, 2) - 0.5).abs() < 1e-15);
        let t = [0, 1, 2, 2];
        let p = [0, 1, 2, 1];
        // per class: 1, 2/3, 2/3
        assert!((f1_score(&t, &p, 3) - (1.0 + 2.0 / 3.0 + 2.0 / 3.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(-800.0), 0.0);
        assert_eq!(softplus(800.0), 800.0);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }
}
