//! Gini split search.
//!
//! Candidate splits are compared in exact integer arithmetic. For a node with
//! `n` rows and class counts `P`, a split into children `L` and `R` has Gini
//! decrease `(S * n - |P|^2) / n^2` where `S = |L|^2 / nL + |R|^2 / nR` and
//! `|.|^2` is the sum of squared class counts. Keeping the gain as a reduced
//! fraction makes "no improvement" and tie-breaking independent of rounding.

use std::cmp::Ordering;

use super::{SplitKind, SplitLiteral};
use crate::tabular::Dataset;

/// A non-negative rational Gini decrease, always stored in lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GiniGain {
    pub num: u128,
    pub den: u128,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

impl GiniGain {
    pub fn new(num: u128, den: u128) -> Self {
        let g = gcd(num, den).max(1);
        GiniGain {
            num: num / g,
            den: den / g,
        }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl PartialOrd for GiniGain {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GiniGain {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub literal: SplitLiteral,
    pub gain: GiniGain,
}

impl Split {
    pub fn impurity_decrease(&self) -> f64 {
        self.gain.as_f64()
    }
}

fn sum_sq(counts: &[u64]) -> u128 {
    counts.iter().map(|&c| c as u128 * c as u128).sum()
}

/// Exact Gini decrease of the partition given by class counts on each side.
pub fn gini_gain(left: &[u64], right: &[u64]) -> GiniGain {
    let nl: u128 = left.iter().map(|&c| c as u128).sum();
    let nr: u128 = right.iter().map(|&c| c as u128).sum();
    let n = nl + nr;
    let parent: u128 = left
        .iter()
        .zip(right)
        .map(|(&l, &r)| (l + r) as u128 * (l + r) as u128)
        .sum();
    // S = num_s / den_s with den_s = nl * nr.
    let num_s = sum_sq(left) * nr + sum_sq(right) * nl;
    let den_s = nl * nr;
    GiniGain::new(num_s * n - parent * den_s, den_s * n * n)
}

/// Ordering key: larger gain first, then lower feature, then lower value.
fn better(a: &Split, b: &Split) -> bool {
    match a.gain.cmp(&b.gain) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => (a.literal.feature, a.literal.kind.sort_value())
            < (b.literal.feature, b.literal.kind.sort_value()),
    }
}

/// Best Gini split of `rows` (a multiset of row indices) over `features`.
///
/// `labels[i]` is the class of dataset row `i`, in `0..n_classes`. Returns
/// `None` when no candidate strictly decreases impurity while leaving at least
/// `min_node_size` rows on each side.
pub fn best_split(
    ds: &Dataset,
    rows: &[usize],
    labels: &[u32],
    n_classes: usize,
    features: &[usize],
    min_node_size: usize,
) -> Option<Split> {
    if rows.len() < 2 || features.is_empty() {
        return None;
    }
    let min_node_size = min_node_size.max(1);
    let mut total = vec![0u64; n_classes];
    for &i in rows {
        total[labels[i] as usize] += 1;
    }
    if total.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }
    let mut best: Option<Split> = None;
    let mut consider = |cand: Split| {
        if cand.gain.num == 0 {
            return;
        }
        if best.as_ref().is_none_or(|b| better(&cand, b)) {
            best = Some(cand);
        }
    };
    let mut right = vec![0u64; n_classes];
    for &feature in features {
        match ds.schema().column(feature).levels() {
            None => {
                let mut pairs: Vec<(f64, u32)> =
                    rows.iter().map(|&i| (ds.value(i, feature), labels[i])).collect();
                pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
                let mut left = vec![0u64; n_classes];
                for k in 0..pairs.len() - 1 {
                    left[pairs[k].1 as usize] += 1;
                    let (v, next) = (pairs[k].0, pairs[k + 1].0);
                    if v == next {
                        continue;
                    }
                    let n_left = k + 1;
                    if n_left < min_node_size || rows.len() - n_left < min_node_size {
                        continue;
                    }
                    for c in 0..n_classes {
                        right[c] = total[c] - left[c];
                    }
                    let mut threshold = v + (next - v) / 2.0;
                    if threshold <= v {
                        threshold = next;
                    }
                    consider(Split {
                        literal: SplitLiteral {
                            feature,
                            kind: SplitKind::Less(threshold),
                        },
                        gain: gini_gain(&left, &right),
                    });
                }
            }
            Some(levels) => {
                let mut by_level = vec![vec![0u64; n_classes]; levels.len()];
                for &i in rows {
                    by_level[ds.level(i, feature)][labels[i] as usize] += 1;
                }
                for (level, left) in by_level.iter().enumerate() {
                    let n_left: u64 = left.iter().sum();
                    let n_left = n_left as usize;
                    if n_left == 0 || n_left < min_node_size || rows.len() - n_left < min_node_size {
                        continue;
                    }
                    for c in 0..n_classes {
                        right[c] = total[c] - left[c];
                    }
                    consider(Split {
                        literal: SplitLiteral {
                            feature,
                            kind: SplitKind::Equal(level),
                        },
                        gain: gini_gain(left, &right),
                    });
                }
            }
        }
    }
    best
}
