mod common;

use arf_core::evalbench::{fit_pwc, ise_monte_carlo, pwc_log_density, GaussianProposal, PwcConfig, PwcMode};
use arf_core::forde::{FeatureDist, LeafRows};
use arf_core::forest::FeatureBounds;
use arf_core::simgen::{gen_shape, gen_toeplitz_gaussian, toeplitz_log_density, ShapeName, ShapeSpec, ToeplitzSpec};
use arf_core::{
    arf_fit, conditional_sample, fit_density, forde_fit, forge_sample, nll, with_threads, ArfConfig, Column, Constraint,
    Dataset, Evidence, FordeConfig, ForestConfig, Reweighting, Schema,
};
use common::*;
use rand::Rng;

fn small_arf(seed: u64) -> ArfConfig {
    ArfConfig {
        seed,
        forest: ForestConfig { num_trees: 20, stratified: true, ..ForestConfig::default() },
        ..ArfConfig::default()
    }
}

fn gaussian(n: usize, d: usize, seed: u64) -> Dataset {
    gen_toeplitz_gaussian(&ToeplitzSpec { n, d, rho: 0.9, seed }).unwrap()
}

#[test]
fn continuous_models_integrate_to_one() {
    for leaf_rows in [LeafRows::InBag, LeafRows::DistinctInBag, LeafRows::All] {
        let (_, model) = fit_density(&gaussian(500, 2, 1), &small_arf(2), &FordeConfig { leaf_rows, ..FordeConfig::default() }).unwrap();
        let integral = mean(&per_tree_integrals(&model, 48));
        assert!((integral - 1.0).abs() <= 0.01, "{leaf_rows:?}: {integral}");
    }
}

#[test]
fn mixed_models_integrate_to_one() {
    // One continuous and one categorical column: sum over levels of the
    // continuous integral, tree by tree.
    let shapes = gen_shape(&ShapeSpec { name: ShapeName::Cassini, n: 600, seed: 3 }).unwrap();
    let (ds, _) = shapes.split_off_column(1);
    let (_, model) = fit_density(&ds, &small_arf(4), &FordeConfig::default()).unwrap();
    let k = ds.schema().column(1).n_levels();
    let mut totals = Vec::new();
    for leaves in &model.profiles {
        let mut total = 0.0;
        for p in leaves.iter().filter(|p| p.dist.is_some() && p.coverage > 0.0) {
            let dist = p.dist.as_ref().unwrap();
            let (FeatureDist::Continuous(tn), FeatureBounds::Interval { lo, hi }) = (&dist[0], &p.bounds[0]) else {
                panic!("unexpected leaf shape")
            };
            let (a, b) = (lo.max(tn.mu - 8.0 * tn.sigma), hi.min(tn.mu + 8.0 * tn.sigma));
            let cells = 2000;
            let h = (b - a) / cells as f64;
            for level in 0..k {
                let s: f64 = (0..cells)
                    .map(|i| p.log_weighted_density(&[a + (i as f64 + 0.5) * h, level as f64]).exp())
                    .sum();
                total += s * h;
            }
        }
        totals.push(total);
    }
    let integral = mean(&totals);
    assert!((integral - 1.0).abs() <= 0.01, "{integral}");
}

#[test]
fn weights_normalize_per_tree() {
    let (_, model) = fit_density(&gaussian(400, 3, 5), &small_arf(6), &FordeConfig::default()).unwrap();
    for leaves in &model.profiles {
        let s: f64 = leaves.iter().map(|p| p.coverage).sum();
        assert!((s - 1.0).abs() <= 1e-9, "{s}");
    }
}

#[test]
fn rows_outside_every_leaf_have_zero_density_terms() {
    let (_, model) = fit_density(&gaussian(400, 2, 7), &small_arf(8), &FordeConfig::default()).unwrap();
    let mut r = rng(9);
    for _ in 0..500 {
        let x = [r.random_range(-6.0..6.0), r.random_range(-6.0..6.0)];
        for (tree, leaves) in model.trees.iter().zip(&model.profiles) {
            let leaf = &leaves[tree.leaf_of(&x)];
            assert!(leaf.bounds.iter().zip(&x).all(|(b, &v)| b.contains(v)));
            for (l, p) in leaves.iter().enumerate() {
                if l != tree.leaf_of(&x) {
                    assert!(!p.bounds.iter().zip(&x).all(|(b, &v)| b.contains(v)));
                }
            }
        }
    }
}

#[test]
fn density_and_samples_do_not_depend_on_threads() {
    let ds = gaussian(600, 3, 10);
    let run = |t| {
        with_threads(t, || {
            let (_, m) = fit_density(&ds, &small_arf(11), &FordeConfig::default()).unwrap();
            let s = forge_sample(&m, 300, 12).unwrap();
            (m, s)
        })
    };
    let (m1, s1) = run(1);
    let (m4, s4) = run(4);
    assert_eq!(m1, m4);
    assert_eq!(s1, s4);
}

#[test]
fn synthetic_levels_stay_in_leaf_sets() {
    let real = gen_shape(&ShapeSpec { name: ShapeName::Shapes, n: 800, seed: 13 }).unwrap();
    let (_, model) = fit_density(&real, &small_arf(14), &FordeConfig::default()).unwrap();
    let synth = forge_sample(&model, 2000, 15).unwrap();
    // A synthetic level is only possible if some leaf containing the row in
    // some tree allows it; with pinned leaves the class must also have
    // positive probability in at least one tree's leaf.
    for row in synth.rows() {
        let allowed = model.containing_leaves(row).any(|p| match (&p.dist, &p.bounds[2]) {
            (Some(d), FeatureBounds::Levels(levels)) => {
                levels.contains(&(row[2] as usize)) && matches!(&d[2], FeatureDist::Categorical(c) if c.probs[row[2] as usize] > 0.0)
            }
            _ => false,
        });
        assert!(allowed);
    }
}

#[test]
fn class_shares_match_training_data() {
    let real = gen_shape(&ShapeSpec { name: ShapeName::Cassini, n: 2000, seed: 16 }).unwrap();
    let (_, model) = fit_density(&real, &small_arf(17), &FordeConfig::default()).unwrap();
    let synth = forge_sample(&model, 1000, 18).unwrap();
    for (c, &p) in ShapeName::Cassini.proportions().iter().enumerate() {
        let share = synth.column(2).iter().filter(|&&v| v as usize == c).count() as f64 / 1000.0;
        assert!((share - p).abs() <= 0.05, "class {c}: {share} vs {p}");
    }
}

#[test]
fn conditional_rows_satisfy_evidence() {
    let real = gen_shape(&ShapeSpec { name: ShapeName::Smiley, n: 1000, seed: 19 }).unwrap();
    let (_, model) = fit_density(&real, &small_arf(20), &FordeConfig::default()).unwrap();
    let ev = Evidence::new(vec![(0, Constraint::Interval { lo: -0.5, hi: 0.5 }), (2, Constraint::Levels(vec![2, 3]))]).unwrap();
    for mode in [Reweighting::Coverage, Reweighting::ExactBayes] {
        let out = conditional_sample(&model, &ev, 1000, 21, mode).unwrap();
        assert!(out.rows().all(|r| ev.admits(r)));
    }
}

#[test]
fn exact_bayes_tracks_the_true_conditional_mean() {
    let (_, model) = fit_density(&gaussian(3000, 2, 22), &small_arf(23), &FordeConfig::default()).unwrap();
    let ev = Evidence::new(vec![(0, Constraint::Interval { lo: -0.2, hi: 0.2 })]).unwrap();
    let out = conditional_sample(&model, &ev, 2000, 24, Reweighting::ExactBayes).unwrap();
    // By symmetry the true conditional mean of X2 is zero.
    assert!(mean(&out.column(1)).abs() <= 0.1, "{}", mean(&out.column(1)));
}

#[test]
fn pwc_shares_forde_partitions() {
    let ds = gaussian(500, 3, 25);
    let arf = arf_fit(&ds, &small_arf(26)).unwrap();
    let forde = forde_fit(&arf, &ds, &FordeConfig::default()).unwrap();
    let pwc = fit_pwc(&ds, PwcMode::Unsupervised(&arf), &PwcConfig::default()).unwrap();
    assert_eq!(forde.trees, pwc.trees);
}

#[test]
fn pwc_integrates_to_one() {
    let ds = gaussian(400, 2, 27);
    let arf = arf_fit(&ds, &small_arf(28)).unwrap();
    let pwc = fit_pwc(&ds, PwcMode::Unsupervised(&arf), &PwcConfig::default()).unwrap();
    let (r0, r1) = (pwc.ranges[0], pwc.ranges[1]);
    let cells = 1000;
    let (h0, h1) = ((r0.1 - r0.0) / cells as f64, (r1.1 - r1.0) / cells as f64);
    let mut s = 0.0;
    for i in 0..cells {
        for j in 0..cells {
            let x = [r0.0 + (i as f64 + 0.5) * h0, r1.0 + (j as f64 + 0.5) * h1];
            s += pwc_log_density(&pwc, &x).exp();
        }
    }
    let integral = s * h0 * h1;
    assert!((integral - 1.0).abs() <= 0.01, "{integral}");
}

#[test]
fn ise_shrinks_with_more_data() {
    let proposal = GaussianProposal { mean: vec![0.0, 0.0], scale: 1.5 };
    let mut by_n = Vec::new();
    for &n in &[250usize, 1000, 4000] {
        let per_seed: Vec<f64> = (0..5u64)
            .map(|s| {
                let (_, m) = fit_density(&gaussian(n, 2, 30 + s), &ArfConfig { seed: s, ..ArfConfig::default() }, &FordeConfig::default()).unwrap();
                // Leaves whose deviation sits at the floor make the integrand
                // heavy-tailed, hence the large number of draws.
                ise_monte_carlo(|x| m.log_density(x), |x| toeplitz_log_density(x, 0.9), &proposal, 20_000, 40 + s).unwrap().value
            })
            .collect();
        by_n.push(mean(&per_seed));
    }
    assert!(by_n[0] > by_n[1] && by_n[1] > by_n[2], "{by_n:?}");
}

#[test]
fn nll_ignores_test_row_order() {
    let ds = gaussian(400, 2, 50);
    let (_, m) = fit_density(&ds, &small_arf(51), &FordeConfig::default()).unwrap();
    let test = gaussian(300, 2, 52);
    let reversed = test.select_rows(&(0..300).rev().collect::<Vec<_>>());
    let (a, b) = (nll(&m, &test).unwrap(), nll(&m, &reversed).unwrap());
    assert!((a.mean - b.mean).abs() <= 1e-12 * a.mean.abs());
}

#[test]
fn categorical_only_schema_round_trips_through_sampling() {
    let schema = Schema::new(vec![Column::categorical("a", ["x", "y"]), Column::categorical("b", ["p", "q", "r"])]).unwrap();
    let mut r = rng(60);
    let rows: Vec<Vec<f64>> = (0..500)
        .map(|_| {
            let a = r.random_range(0..2usize);
            let b = if r.random_bool(0.8) { a } else { 2 };
            vec![a as f64, b as f64]
        })
        .collect();
    let ds = Dataset::from_rows(schema, &rows).unwrap();
    let (_, m) = fit_density(&ds, &small_arf(61), &FordeConfig::default()).unwrap();
    let total: f64 = (0..2).flat_map(|a| (0..3).map(move |b| (a, b))).map(|(a, b)| m.log_density(&[a as f64, b as f64]).exp()).sum();
    assert!((total - 1.0).abs() <= 1e-9);
    let synth = forge_sample(&m, 2000, 62).unwrap();
    assert_eq!(synth.schema(), ds.schema());
}
