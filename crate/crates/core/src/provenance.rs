//! Which data an estimator was fitted on.
//!
//! Seen/unseen evaluation refuses estimators whose provenance does not match
//! the train side of the split being evaluated.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Train,
    Test,
}

/// A spatial or random partition, identified by its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitTag {
    Checkerboard {
        square_side: f64,
        origin: [f64; 2],
        parity_for_train: u8,
    },
    Random {
        train_fraction: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fitted_on", rename_all = "snake_case")]
pub enum Provenance {
    /// Uses no channel data at all (random precoding, hand-built estimators).
    DataIndependent,
    /// Fitted on a whole, unsplit dataset.
    Unsplit,
    /// Fitted on one side of a split.
    Split { split: SplitTag, side: Side },
}

impl Provenance {
    pub fn train_side_of(split: SplitTag) -> Self {
        Provenance::Split {
            split,
            side: Side::Train,
        }
    }

    /// Whether an estimator with this provenance may be scored as seen/unseen on `split`.
    pub fn admissible_for(&self, split: &SplitTag) -> bool {
        match self {
            Provenance::DataIndependent => true,
            Provenance::Unsplit => false,
            Provenance::Split { split: s, side } => s == split && *side == Side::Train,
        }
    }
}
