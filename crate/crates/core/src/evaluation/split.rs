//! Spatial checkerboard and uniform-random partitions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dataset::SamplePair;
use crate::neural::TrainingData;
use crate::provenance::{Side, SplitTag};
use crate::scalar::Scalar;

/// Squares of side `square_side` in the horizontal plane. A point goes to the
/// training side iff `(floor((x - x0) / a) + floor((y - y0) / a)) mod 2 == parity_for_train`.
/// Cells are half-open, so a point on a boundary belongs to the higher cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckerboardSplit {
    pub square_side: f64,
    pub origin: [f64; 2],
    pub parity_for_train: u8,
}

impl CheckerboardSplit {
    pub fn new(square_side: f64, origin: [f64; 2], parity_for_train: u8) -> Result<Self, EvalError> {
        let s = Self {
            square_side,
            origin,
            parity_for_train,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.square_side.is_finite() && self.square_side > 0.0) {
            return Err(EvalError::Config(format!("square side {} must be positive", self.square_side)));
        }
        if self.parity_for_train > 1 {
            return Err(EvalError::Config("parity_for_train must be 0 or 1".into()));
        }
        if !(self.origin[0].is_finite() && self.origin[1].is_finite()) {
            return Err(EvalError::Config("origin must be finite".into()));
        }
        Ok(())
    }

    pub fn cell<T: Scalar>(&self, position: [T; 3]) -> (i64, i64) {
        let a = self.square_side;
        (
            ((position[0].as_f64() - self.origin[0]) / a).floor() as i64,
            ((position[1].as_f64() - self.origin[1]) / a).floor() as i64,
        )
    }

    pub fn parity<T: Scalar>(&self, position: [T; 3]) -> u8 {
        let (i, j) = self.cell(position);
        (i + j).rem_euclid(2) as u8
    }

    pub fn is_train<T: Scalar>(&self, position: [T; 3]) -> bool {
        self.parity(position) == self.parity_for_train
    }

    pub fn tag(&self) -> SplitTag {
        SplitTag::Checkerboard {
            square_side: self.square_side,
            origin: self.origin,
            parity_for_train: self.parity_for_train,
        }
    }

    pub fn with_parity(self, parity_for_train: u8) -> Self {
        Self {
            parity_for_train,
            ..self
        }
    }

    pub fn partition<T: Scalar>(&self, pairs: &[SamplePair<T>]) -> Partition<T> {
        let (train, test) = pairs.iter().cloned().partition(|p| self.is_train(p.position));
        Partition {
            train,
            test,
            tag: self.tag(),
        }
    }
}

/// Alias for [`CheckerboardSplit::partition`].
pub fn checkerboard_split<T: Scalar>(pairs: &[SamplePair<T>], split: &CheckerboardSplit) -> Partition<T> {
    split.partition(pairs)
}

/// Uniformly random assignment of a fixed fraction of pairs to training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomSplit {
    pub train_fraction: f64,
    pub seed: u64,
}

impl RandomSplit {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(EvalError::Config(format!(
                "train fraction {} must lie in (0, 1)",
                self.train_fraction
            )));
        }
        Ok(())
    }

    pub fn tag(&self) -> SplitTag {
        SplitTag::Random {
            train_fraction: self.train_fraction,
            seed: self.seed,
        }
    }

    /// Training set is `round(fraction * n)` pairs drawn by a seeded shuffle;
    /// both sides keep the original relative order.
    pub fn partition<T: Scalar>(&self, pairs: &[SamplePair<T>]) -> Result<Partition<T>, EvalError> {
        self.validate()?;
        let n = pairs.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(self.seed));
        let k = (self.train_fraction * n as f64).round() as usize;
        let mut in_train = vec![false; n];
        for &i in &idx[..k] {
            in_train[i] = true;
        }
        let (mut train, mut test) = (Vec::with_capacity(k), Vec::with_capacity(n - k));
        for (p, t) in pairs.iter().zip(in_train) {
            if t {
                train.push(p.clone());
            } else {
                test.push(p.clone());
            }
        }
        Ok(Partition {
            train,
            test,
            tag: self.tag(),
        })
    }
}

/// Both sides of a split, in original dataset order.
#[derive(Debug, Clone)]
pub struct Partition<T> {
    pub train: Vec<SamplePair<T>>,
    pub test: Vec<SamplePair<T>>,
    pub tag: SplitTag,
}

impl<T: Scalar> Partition<T> {
    pub fn train_data(&self) -> TrainingData<'_, T> {
        TrainingData::split_side(&self.train, self.tag, Side::Train)
    }

    pub fn test_data(&self) -> TrainingData<'_, T> {
        TrainingData::split_side(&self.test, self.tag, Side::Test)
    }
}
