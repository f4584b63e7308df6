use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, tag};

/// Random train/test partition, optionally stratified on a categorical column.
///
/// Row order is preserved inside each part.
pub fn split_train_test(
    ds: &Dataset,
    test_fraction: f64,
    seed: u64,
    stratify: Option<usize>,
) -> Result<(Dataset, Dataset)> {
    let n = ds.n_rows();
    if n < 2 {
        return Err(Error::InsufficientData(format!("cannot split {n} rows")));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction {test_fraction} outside (0, 1)")));
    }
    let mut rng = stream_rng(seed, tag::SPLIT, 0);
    let mut test = Vec::new();
    let mut train = Vec::new();
    match stratify {
        None => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let k = (n as f64 * test_fraction).round() as usize;
            if k == 0 || k == n {
                return Err(Error::Config(format!(
                    "test fraction {test_fraction} leaves an empty part for n = {n}"
                )));
            }
            test.extend_from_slice(&idx[..k]);
            train.extend_from_slice(&idx[k..]);
        }
        Some(col) => {
            let column = ds.schema().column(col);
            let n_levels = column.levels().ok_or_else(|| {
                Error::Config(format!("stratification column {:?} is not categorical", column.name))
            })?.len();
            let mut strata = vec![Vec::new(); n_levels];
            for i in 0..n {
                strata[ds.level(i, col)].push(i);
            }
            for (level, mut members) in strata.into_iter().enumerate() {
                if members.is_empty() {
                    continue;
                }
                if members.len() < 2 {
                    return Err(Error::InsufficientData(format!(
                        "stratum {level} of column {:?} has fewer than 2 rows",
                        column.name
                    )));
                }
                members.shuffle(&mut rng);
                let k = (members.len() as f64 * test_fraction).round() as usize;
                test.extend_from_slice(&members[..k]);
                train.extend_from_slice(&members[k..]);
            }
            if test.is_empty() || train.is_empty() {
                return Err(Error::Config(format!(
                    "test fraction {test_fraction} leaves an empty part for n = {n}"
                )));
            }
        }
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.select_rows(&train), ds.select_rows(&test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Column, Schema};

    fn numbered(n: usize) -> Dataset {
        let schema = Schema::new(vec![
            Column::continuous("id"),
            Column::categorical("y", ["0", "1"]),
        ])
        .unwrap();
        let cells = (0..n).flat_map(|i| [i as f64, (i % 2) as f64]).collect();
        Dataset::new(schema, cells).unwrap()
    }

    #[test]
    fn sizes_and_determinism() {
        let ds = numbered(10);
        let (a, b) = split_train_test(&ds, 0.3, 42, None).unwrap();
        assert_eq!((a.n_rows(), b.n_rows()), (7, 3));
        let (a2, b2) = split_train_test(&ds, 0.3, 42, None).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
    }

    #[test]
    fn stratified_halves_stay_balanced() {
        let ds = numbered(1000);
        let (trn, tst) = split_train_test(&ds, 0.1, 3, Some(1)).unwrap();
        for part in [&trn, &tst] {
            let ones = (0..part.n_rows()).filter(|&i| part.level(i, 1) == 1).count();
            let zeros = part.n_rows() - ones;
            assert!(ones.abs_diff(zeros) <= 2, "{ones} vs {zeros}");
        }
    }

    #[test]
    fn adult_like_proportion() {
        let ds = numbered(33_000);
        let (trn, tst) = split_train_test(&ds, 10.0 / 33.0, 1, None).unwrap();
        assert!(trn.n_rows().abs_diff(23_000) <= 1);
        assert!(tst.n_rows().abs_diff(10_000) <= 1);
    }

    #[test]
    fn degenerate_inputs_error() {
        let ds = numbered(10);
        assert!(split_train_test(&ds, 0.0, 1, None).is_err());
        assert!(split_train_test(&ds, 1.0, 1, None).is_err());
        assert!(split_train_test(&ds, 0.01, 1, None).is_err());
        assert!(split_train_test(&numbered(1), 0.5, 1, None).is_err());
        assert!(split_train_test(&ds, 0.3, 1, Some(0)).is_err());
        let lone = numbered(3).select_rows(&[0, 2, 1]);
        assert!(split_train_test(&lone, 0.5, 1, Some(1)).is_err());
    }
}
