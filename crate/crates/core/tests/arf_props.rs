mod common;

use arf_core::arf::{leaf_coverage, leaf_members, sample_leafwise, sample_marginal_bootstrap};
use arf_core::forest::{fit_forest, ForestConfig, Resample};
use arf_core::simgen::{gen_toeplitz_gaussian, ToeplitzSpec};
use arf_core::{arf_fit, ArfConfig, Column, Dataset, Schema};
use common::*;

fn gaussian(n: usize, rho: f64, seed: u64) -> Dataset {
    gen_toeplitz_gaussian(&ToeplitzSpec { n, d: 2, rho, seed }).unwrap()
}

#[test]
fn marginal_bootstrap_keeps_frequencies_and_drops_dependence() {
    let schema = Schema::new(vec![Column::categorical("c", ["a", "b"]), Column::continuous("x"), Column::continuous("y")]).unwrap();
    let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![f64::from(u8::from(i >= 60)), i as f64, i as f64]).collect();
    let ds = Dataset::from_rows(schema, &rows).unwrap();
    let out = sample_marginal_bootstrap(&ds, 10_000, &mut rng(1)).unwrap();
    let share_a = out.column(0).iter().filter(|&&v| v == 0.0).count() as f64 / 10_000.0;
    assert!((share_a - 0.6).abs() <= 0.02, "{share_a}");
    let r = pearson(&out.column(1), &out.column(2));
    assert!(r.abs() < 0.05, "{r}");
    // Support: every cell is an observed value.
    assert!(out.column(1).iter().all(|v| v.fract() == 0.0 && (0.0..100.0).contains(v)));
}

#[test]
fn coverage_sums_per_tree() {
    for (stratified, lo, hi) in [(true, 1.0, 1.0), (false, 0.9, 1.1)] {
        for seed in 0..100 {
            // Large enough that the unstratified real share stays within
            // about four standard errors of one half.
            let real = gaussian(1000, 0.5, seed);
            let synth = sample_marginal_bootstrap(&real, 1000, &mut rng(seed + 1000)).unwrap();
            let stack = real.vstack(&synth).unwrap();
            let mut labels = vec![1u32; 1000];
            labels.resize(2000, 0);
            let cfg = ForestConfig { num_trees: 3, stratified, seed, ..Default::default() };
            let forest = fit_forest(&stack, &labels, &cfg).unwrap();
            for q in leaf_coverage(&forest).unwrap() {
                let s: f64 = q.iter().sum();
                assert!(s >= lo - 1e-12 && s <= hi + 1e-12, "stratified={stratified} sum={s}");
            }
        }
    }
}

#[test]
fn leafwise_draws_come_from_leaf_members() {
    let real = gaussian(300, 0.9, 2);
    let model = arf_fit(&real, &ArfConfig { seed: 3, ..ArfConfig::default() }).unwrap();
    let members = leaf_members(&model.forest, &real);
    let coverage = leaf_coverage(&model.forest).unwrap();
    let synth = sample_leafwise(&model.forest, &real, &coverage, 500, &mut rng(4)).unwrap();
    let observed: Vec<Vec<u64>> = (0..2).map(|j| real.column(j).iter().map(|v| v.to_bits()).collect()).collect();
    for row in synth.rows() {
        for j in 0..2 {
            assert!(observed[j].contains(&row[j].to_bits()));
        }
    }
    // Members are only real, in-bag rows.
    for (tree, mem) in model.forest.trees.iter().zip(&members) {
        for leaf in mem {
            assert!(leaf.iter().all(|&i| i < real.n_rows() && tree.inbag[i] > 0));
        }
    }
}

#[test]
fn single_leaf_trees_reduce_to_marginal_bootstrap() {
    let real = gaussian(400, 0.95, 5);
    let synth = sample_marginal_bootstrap(&real, 400, &mut rng(6)).unwrap();
    let stack = real.vstack(&synth).unwrap();
    let mut labels = vec![1u32; 400];
    labels.resize(800, 0);
    let cfg = ForestConfig { num_trees: 5, max_depth: Some(0), stratified: true, seed: 7, ..Default::default() };
    let forest = fit_forest(&stack, &labels, &cfg).unwrap();
    let out = sample_leafwise(&forest, &real, &leaf_coverage(&forest).unwrap(), 5000, &mut rng(8)).unwrap();
    let r = pearson(&out.column(0), &out.column(1));
    assert!(r.abs() < 0.05, "{r}");
}

#[test]
fn refinement_round_restores_correlation() {
    let mut closer = 0;
    for seed in 0..20 {
        let real = gaussian(1000, 0.9, 100 + seed);
        let r_real = pearson(&real.column(0), &real.column(1));
        let synth0 = sample_marginal_bootstrap(&real, 1000, &mut rng(200 + seed)).unwrap();
        let stack = real.vstack(&synth0).unwrap();
        let mut labels = vec![1u32; 1000];
        labels.resize(2000, 0);
        let cfg = ForestConfig { stratified: true, seed, ..Default::default() };
        let forest = fit_forest(&stack, &labels, &cfg).unwrap();
        let synth1 = sample_leafwise(&forest, &real, &leaf_coverage(&forest).unwrap(), 1000, &mut rng(300 + seed)).unwrap();
        let gap0 = (pearson(&synth0.column(0), &synth0.column(1)) - r_real).abs();
        let gap1 = (pearson(&synth1.column(0), &synth1.column(1)) - r_real).abs();
        closer += usize::from(gap1 < gap0);
    }
    assert_eq!(closer, 20);
}

#[test]
fn correlated_gaussian_converges() {
    let converged = (0..20)
        .filter(|&s| arf_fit(&gaussian(2000, 0.9, 400 + s), &ArfConfig { seed: s, ..ArfConfig::default() }).unwrap().converged)
        .count();
    assert!(converged >= 18, "{converged}/20");
}

#[test]
fn loose_tolerance_stops_immediately() {
    let model = arf_fit(&gaussian(500, 0.99, 9), &ArfConfig { delta: 0.49, ..ArfConfig::default() }).unwrap();
    assert!(model.converged);
    assert_eq!(model.iterations_run, 0);
    assert_eq!(model.trace.len(), 1);
}

#[test]
fn loop_is_bounded_and_trace_matches_rounds() {
    let model = arf_fit(&gaussian(500, 0.99, 10), &ArfConfig { max_iters: 2, ..ArfConfig::default() }).unwrap();
    assert!(model.iterations_run <= 2);
    assert_eq!(model.trace.len(), model.iterations_run + 1);
    if model.converged {
        assert!(*model.trace.last().unwrap() <= 0.5);
    }
}

/// Mean absolute within-leaf correlation of the real rows, over leaves with
/// at least five distinct members.
fn within_leaf_correlation(forest: &arf_core::Forest, real: &Dataset) -> f64 {
    let mut rs = Vec::new();
    for mem in leaf_members(forest, real) {
        for leaf in mem {
            let mut idx = leaf.clone();
            idx.dedup();
            if idx.len() >= 5 {
                let sub = real.select_rows(&idx);
                let r = pearson(&sub.column(0), &sub.column(1));
                if r.is_finite() {
                    rs.push(r.abs());
                }
            }
        }
    }
    mean(&rs)
}

#[test]
fn leaves_decorrelate_features() {
    let (mut before, mut after) = (Vec::new(), Vec::new());
    for seed in 0..20 {
        let real = gaussian(1000, 0.8, 500 + seed);
        before.push(pearson(&real.column(0), &real.column(1)).abs());
        let cfg = ArfConfig { seed, forest: ForestConfig { num_trees: 20, resample: Resample::Bootstrap, stratified: true, ..Default::default() }, ..ArfConfig::default() };
        let model = arf_fit(&real, &cfg).unwrap();
        after.push(within_leaf_correlation(&model.forest, &real));
    }
    assert!(mean(&after) < mean(&before), "{} vs {}", mean(&after), mean(&before));
}
