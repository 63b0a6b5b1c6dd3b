//! Seen/unseen evaluation on spatial splits, grid-size sweeps and heatmaps.

mod heatmap;
mod plot;
mod split;
mod sweep;

use serde::{Deserialize, Serialize};

use crate::dataset::SamplePair;
use crate::metrics::{mean_linear, pair_powers, Estimator, MetricsError};
use crate::neural::NeuralError;
use crate::scalar::{to_db, Scalar};

pub use heatmap::{heatmap, heatmap_from_powers, HeatmapCell, HeatmapGrid, HEATMAP_RANGE_DB};
pub use plot::{diagram_csv, diagram_svg, DiagramReference, DiagramRow, CSV_HEADER};
pub use split::{checkerboard_split, CheckerboardSplit, Partition, RandomSplit};
pub use sweep::{default_a_values, derive_seed, sweep_grid};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid evaluation config: {0}")]
    Config(String),
    #[error("{side} subset is empty for square side {a} m")]
    EmptySubset { side: &'static str, a: f64 },
    #[error("estimator `{estimator}` was not fitted on the training side of this split")]
    Provenance { estimator: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Neural(#[from] NeuralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPower {
    pub position: [f64; 3],
    /// Linear normalized power.
    pub p: f64,
    pub seen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub estimator_id: String,
    pub a: f64,
    pub p_seen_db: f64,
    pub p_unseen_db: f64,
    /// `p_unseen_db - p_seen_db`; negative values are a generalization loss.
    pub gap_db: f64,
    pub per_point: Vec<PointPower>,
}

impl EvalReport {
    pub fn row(&self) -> DiagramRow {
        DiagramRow {
            estimator_id: self.estimator_id.clone(),
            a_m: self.a,
            p_seen_db: self.p_seen_db,
            p_unseen_db: self.p_unseen_db,
            gap_db: self.gap_db,
        }
    }
}

fn points<'a, T: Scalar>(pairs: &'a [SamplePair<T>], powers: &'a [T], seen: bool) -> impl Iterator<Item = PointPower> + 'a {
    pairs.iter().zip(powers).map(move |(p, v)| PointPower {
        position: p.position.map(|x| x.as_f64()),
        p: v.as_f64(),
        seen,
    })
}

/// Scores an estimator on both sides of a partition. The estimator must either
/// be data-independent or have been fitted on exactly this partition's training side.
pub fn evaluate_partition<T: Scalar, E: Estimator<T> + ?Sized>(
    estimator: &E,
    partition: &Partition<T>,
    a: f64,
) -> Result<EvalReport, EvalError> {
    if !estimator.provenance().admissible_for(&partition.tag) {
        return Err(EvalError::Provenance {
            estimator: estimator.id(),
        });
    }
    if partition.train.is_empty() {
        return Err(EvalError::EmptySubset { side: "training", a });
    }
    if partition.test.is_empty() {
        return Err(EvalError::EmptySubset { side: "test", a });
    }
    let seen = pair_powers(&partition.train, estimator)?;
    let unseen = pair_powers(&partition.test, estimator)?;
    let p_seen_db = to_db(mean_linear(&seen)?).as_f64();
    let p_unseen_db = to_db(mean_linear(&unseen)?).as_f64();
    let mut per_point: Vec<PointPower> = points(&partition.train, &seen, true).collect();
    per_point.extend(points(&partition.test, &unseen, false));
    Ok(EvalReport {
        estimator_id: estimator.id(),
        a,
        p_seen_db,
        p_unseen_db,
        gap_db: p_unseen_db - p_seen_db,
        per_point,
    })
}

/// [`evaluate_partition`] on the checkerboard partition of `pairs`.
pub fn evaluate_seen_unseen<T: Scalar, E: Estimator<T> + ?Sized>(
    estimator: &E,
    split: &CheckerboardSplit,
    pairs: &[SamplePair<T>],
) -> Result<EvalReport, EvalError> {
    split.validate()?;
    evaluate_partition(estimator, &split.partition(pairs), split.square_side)
}

/// Mean power on the training side, the test side and the whole dataset of a random split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomSplitReport {
    pub train_db: f64,
    pub test_db: f64,
    pub combined_db: f64,
}

pub fn evaluate_random_split<T: Scalar, E: Estimator<T> + ?Sized>(
    estimator: &E,
    partition: &Partition<T>,
) -> Result<RandomSplitReport, EvalError> {
    let r = evaluate_partition(estimator, partition, f64::NAN)?;
    let all: Vec<f64> = r.per_point.iter().map(|p| p.p).collect();
    Ok(RandomSplitReport {
        train_db: r.p_seen_db,
        test_db: r.p_unseen_db,
        combined_db: to_db(mean_linear(&all)?),
    })
}

/// Pearson correlation coefficient; `None` when either input has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Principal-component baseline fitted on the training side of `partition`.
pub fn train_side_principal_component<T: Scalar>(
    partition: &Partition<T>,
) -> Result<crate::metrics::PrincipalComponent<T>, EvalError> {
    let targets: Vec<_> = partition.train.iter().map(|p| p.h_dl.clone()).collect();
    Ok(crate::metrics::principal_component_baseline(&targets)?
        .with_provenance(crate::provenance::Provenance::train_side_of(partition.tag)))
}
