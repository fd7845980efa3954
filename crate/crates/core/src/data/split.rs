use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, LabeledDocument};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<LabeledDocument>,
    pub validation: Vec<LabeledDocument>,
    pub test: Vec<LabeledDocument>,
}

/// Seeded shuffle followed by a cut into train / validation / test.
/// Sizes round to the nearest document; the test split takes the rest.
pub fn split_corpus(
    docs: &[LabeledDocument],
    train_fraction: f64,
    validation_fraction: f64,
    seed: u64,
) -> Result<CorpusSplit, DataError> {
    let ok = |f: f64| (0.0..=1.0).contains(&f);
    if !ok(train_fraction) || train_fraction == 0.0 || !ok(validation_fraction) {
        return Err(DataError::Config(format!(
            "split fractions must lie in (0, 1], got train={train_fraction} validation={validation_fraction}"
        )));
    }
    if train_fraction + validation_fraction > 1.0 + 1e-12 {
        return Err(DataError::Config("split fractions sum past 1".into()));
    }
    let n = docs.len();
    let n_train = ((n as f64) * train_fraction).round() as usize;
    let n_val = (((n as f64) * validation_fraction).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);
    let test_fraction = 1.0 - train_fraction - validation_fraction;
    let n_test = n - n_train - n_val;
    if n_train == 0 || (validation_fraction > 0.0 && n_val == 0) || (test_fraction > 1e-12 && n_test == 0) {
        return Err(DataError::Config(format!(
            "split of {n} documents leaves an empty part (train={n_train}, validation={n_val}, test={n_test})"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let pick = |range: std::ops::Range<usize>| order[range].iter().map(|&i| docs[i].clone()).collect();
    Ok(CorpusSplit {
        train: pick(0..n_train),
        validation: pick(n_train..n_train + n_val),
        test: pick(n_train + n_val..n),
    })
}
