//! Grid-size sweeps over checkerboard splits.

use rayon::prelude::*;

use super::{evaluate_partition, CheckerboardSplit, EvalError, EvalReport};
use crate::dataset::SamplePair;
use crate::metrics::Estimator;
use crate::neural::TrainingData;
use crate::scalar::Scalar;

/// `0.5, 0.6, ..., 1.8` metres.
pub fn default_a_values() -> Vec<f64> {
    (5..=18).map(|k| k as f64 / 10.0).collect()
}

/// Training seed for the sweep entry with square side `a`.
pub fn derive_seed(base: u64, a: f64) -> u64 {
    crate::neural::mix_seed(base, a.to_bits())
}

/// For each `a`: split, let `factory` fit an estimator on the training side
/// with a seed derived from `(base_seed, a)`, and score it. Entries run in
/// parallel; a failing entry does not affect the others.
pub fn sweep_grid<T, E, F>(
    pairs: &[SamplePair<T>],
    factory: F,
    a_values: &[f64],
    origin: [f64; 2],
    parity_for_train: u8,
    base_seed: u64,
) -> Result<Vec<Result<EvalReport, EvalError>>, EvalError>
where
    T: Scalar,
    E: Estimator<T>,
    F: Fn(&TrainingData<T>, u64) -> Result<E, EvalError> + Sync,
{
    if a_values.is_empty() {
        return Err(EvalError::Config("no square sides to sweep".into()));
    }
    for &a in a_values {
        CheckerboardSplit::new(a, origin, parity_for_train)?;
    }
    Ok(a_values
        .par_iter()
        .map(|&a| {
            let split = CheckerboardSplit::new(a, origin, parity_for_train)?;
            let partition = split.partition(pairs);
            if partition.train.is_empty() {
                return Err(EvalError::EmptySubset { side: "training", a });
            }
            if partition.test.is_empty() {
                return Err(EvalError::EmptySubset { side: "test", a });
            }
            let est = factory(&partition.train_data(), derive_seed(base_seed, a))?;
            evaluate_partition(&est, &partition, a)
        })
        .collect())
}
