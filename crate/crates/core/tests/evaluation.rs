mod common;

use common::{pair_at, random_pairs, rng};
use csimap::evaluation::*;
use csimap::metrics::{
    mean_linear, mean_power_db, pair_powers, principal_component_baseline, ConstantEstimator, Estimator, MetricsError,
    PrecodingVector, RandomPrecoding,
};
use csimap::neural::{train, MlpSpec, TrainConfig, TrainingData};
use csimap::provenance::Provenance;
use csimap::{CMatrix, SamplePair64};
use num_complex::Complex;
use proptest::prelude::*;
use rand::Rng;

/// Returns the uplink column, which the test pairs set equal to the downlink target.
struct Oracle;

impl Estimator<f64> for Oracle {
    fn estimate(&self, h_ul: &CMatrix<f64>) -> Result<PrecodingVector<f64>, MetricsError> {
        PrecodingVector::from_unnormalized(&h_ul.column(0))
    }

    fn id(&self) -> String {
        "oracle".into()
    }
}

fn constant(m: usize) -> ConstantEstimator<f64> {
    let mut w = vec![Complex::new(0.0, 0.0); m];
    w[0] = Complex::new(1.0, 0.0);
    ConstantEstimator {
        w: PrecodingVector::from_unnormalized(&w).unwrap(),
        id: "e0".into(),
        provenance: Provenance::DataIndependent,
    }
}

fn at(x: f64, y: f64) -> SamplePair64 {
    pair_at([x, y, 0.0], vec![Complex::new(1.0, 0.0)])
}

#[test]
fn parity_examples() {
    let s = CheckerboardSplit::new(0.5, [0.0, 0.0], 0).unwrap();
    assert_eq!(s.parity([0.25, 0.25, 0.0]), 0);
    assert_eq!(s.parity([0.75, 0.25, 0.0]), 1);
    assert_eq!(s.cell([0.5, 0.0, 0.0]), (1, 0));
    assert_eq!(s.cell([-0.25, -0.75, 9.0]), (-1, -2));
    let two = CheckerboardSplit::new(2.0, [0.0, 0.0], 0).unwrap();
    assert_eq!(two.cell([1.999, 2.0, 0.0]), (0, 1));
    assert!(CheckerboardSplit::new(0.0, [0.0, 0.0], 0).is_err());
    assert!(CheckerboardSplit::new(1.0, [0.0, 0.0], 2).is_err());
}

#[test]
fn boundary_points_go_to_the_higher_cell() {
    let s = CheckerboardSplit::new(1.0, [0.0, 0.0], 0).unwrap();
    let pairs = vec![at(1.0, 0.5), at(0.999_999, 0.5), at(1.0, 1.0)];
    let p = s.partition(&pairs);
    assert_eq!(p.train.len(), 2);
    assert_eq!(p.test[0].position, [1.0, 0.5, 0.0]);
}

proptest! {
    #[test]
    fn partition_is_disjoint_exhaustive_and_parity_symmetric(
        seed in 0u64..1000,
        a in 0.05f64..3.0,
        ox in -5.0f64..5.0,
        oy in -5.0f64..5.0,
    ) {
        let pairs = random_pairs(seed, 200, 1, 8.0);
        let s = CheckerboardSplit::new(a, [ox, oy], 0).unwrap();
        let p0 = s.partition(&pairs);
        let p1 = s.with_parity(1).partition(&pairs);
        prop_assert_eq!(p0.train.len() + p0.test.len(), pairs.len());
        for q in &pairs {
            let in_train = p0.train.contains(q);
            prop_assert!(in_train != p0.test.contains(q));
            prop_assert_eq!(in_train, p1.test.contains(q));
        }
        prop_assert_eq!(&p0.train, &p1.test);
        prop_assert_eq!(&p0.test, &p1.train);
    }

    #[test]
    fn origin_shift_by_two_squares_is_invisible(
        k in 1u32..17,
        p in -4i32..5,
        q in -4i32..5,
        ix in 0u32..512,
        iy in 0u32..512,
    ) {
        // dyadic values keep every quotient exact
        let a = k as f64 / 8.0;
        let pos = [ix as f64 / 64.0 - 4.0, iy as f64 / 64.0 - 4.0, 0.0];
        let s = CheckerboardSplit::new(a, [0.25, -0.5], 0).unwrap();
        let t = CheckerboardSplit::new(a, [0.25 + 2.0 * a * p as f64, -0.5 + 2.0 * a * q as f64], 0).unwrap();
        prop_assert_eq!(s.is_train(pos), t.is_train(pos));
    }

    #[test]
    fn z_is_ignored(x in -10.0f64..10.0, y in -10.0f64..10.0, z in -10.0f64..10.0, a in 0.1f64..2.0) {
        let s = CheckerboardSplit::new(a, [0.0, 0.0], 1).unwrap();
        prop_assert_eq!(s.is_train([x, y, 0.0]), s.is_train([x, y, z]));
    }
}

#[test]
fn perfect_estimator_sits_at_the_tdd_point() {
    let pairs = random_pairs(3, 300, 8, 4.0);
    let s = CheckerboardSplit::new(1.0, [0.0, 0.0], 0).unwrap();
    let r = evaluate_seen_unseen(&Oracle, &s, &pairs).unwrap();
    assert!(r.p_seen_db.abs() < 1e-12 && r.p_unseen_db.abs() < 1e-12);
    assert!(r.gap_db.abs() < 1e-12);
    assert_eq!(r.per_point.len(), pairs.len());
}

#[test]
fn aggregates_combine_by_count() {
    for seed in 0..20 {
        let pairs = random_pairs(seed, 257, 4, 5.0);
        let a = rng(seed).random_range(0.3..2.0);
        let split = CheckerboardSplit::new(a, [0.1, -0.3], (seed % 2) as u8).unwrap();
        let r = evaluate_seen_unseen(&constant(4), &split, &pairs).unwrap();
        assert!((r.gap_db - (r.p_unseen_db - r.p_seen_db)).abs() < 1e-9);
        let n_seen = r.per_point.iter().filter(|p| p.seen).count() as f64;
        let n = pairs.len() as f64;
        let lin = |db: f64| 10f64.powf(db / 10.0);
        let combined = (n_seen * lin(r.p_seen_db) + (n - n_seen) * lin(r.p_unseen_db)) / n;
        let direct = mean_linear(&pair_powers(&pairs, &constant(4)).unwrap()).unwrap();
        assert!((combined - direct).abs() < 1e-12, "{combined} vs {direct}");
        assert!(r.per_point.iter().all(|p| (0.0..=1.0).contains(&p.p)));
    }
}

#[test]
fn principal_component_fitted_on_train_side() {
    let pairs = random_pairs(9, 400, 8, 4.0);
    let split = CheckerboardSplit::new(1.0, [0.0, 0.0], 0).unwrap();
    let part = split.partition(&pairs);
    let pc = train_side_principal_component(&part).unwrap();
    let r = evaluate_partition(&pc, &part, 1.0).unwrap();
    let targets: Vec<_> = part.train.iter().map(|p| p.h_dl.clone()).collect();
    let manual = principal_component_baseline(&targets).unwrap();
    let seen = mean_power_db(&part.train, &manual).unwrap();
    let unseen = mean_power_db(&part.test, &manual).unwrap();
    assert!((r.p_seen_db - seen).abs() < 1e-12);
    assert!((r.p_unseen_db - unseen).abs() < 1e-12);
    // the seen mean of w_max is the eigenvalue of the training autocorrelation
    assert!((10f64.powf(r.p_seen_db / 10.0) - manual.eigenvalue).abs() < 1e-9);

    let other = split.with_parity(1);
    assert!(matches!(
        evaluate_seen_unseen(&pc, &other, &pairs),
        Err(EvalError::Provenance { .. })
    ));
    assert!(matches!(
        evaluate_seen_unseen(&manual, &split, &pairs),
        Err(EvalError::Provenance { .. })
    ));
}

#[test]
fn estimator_trained_on_test_side_is_rejected() {
    let pairs = random_pairs(4, 120, 4, 3.0);
    let split = CheckerboardSplit::new(1.0, [0.0, 0.0], 0).unwrap();
    let part = split.partition(&pairs);
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let wrong = train(&MlpSpec::dnn(4, 1), &part.test_data(), &cfg).unwrap();
    assert!(matches!(evaluate_partition(&wrong, &part, 1.0), Err(EvalError::Provenance { .. })));
    let unsplit = train(&MlpSpec::dnn(4, 1), &TrainingData::unsplit(&part.train), &cfg).unwrap();
    assert!(matches!(evaluate_partition(&unsplit, &part, 1.0), Err(EvalError::Provenance { .. })));
    let right = train(&MlpSpec::dnn(4, 1), &part.train_data(), &cfg).unwrap();
    assert!(evaluate_partition(&right, &part, 1.0).is_ok());
}

#[test]
fn default_sweep_gives_fourteen_reports() {
    let pairs = random_pairs(5, 600, 4, 6.0);
    let reports = sweep_grid(
        &pairs,
        |d: &TrainingData<f64>, _| {
            let t: Vec<_> = d.pairs().iter().map(|p| p.h_dl.clone()).collect();
            Ok(principal_component_baseline(&t)?.with_provenance(d.provenance()))
        },
        &default_a_values(),
        [0.0, 0.0],
        0,
        1,
    )
    .unwrap();
    assert_eq!(reports.len(), 14);
    for (r, a) in reports.iter().zip(default_a_values()) {
        assert_eq!(r.as_ref().unwrap().a, a);
    }
    assert!(sweep_grid(&pairs, |_: &TrainingData<f64>, _| Ok(constant(4)), &[], [0.0, 0.0], 0, 1).is_err());
}

#[test]
fn oversized_square_fails_only_its_entry() {
    let pairs = random_pairs(6, 200, 4, 1.0);
    let reports = sweep_grid(&pairs, |_: &TrainingData<f64>, _| Ok(constant(4)), &[0.25, 100.0], [0.0, 0.0], 0, 1).unwrap();
    assert!(reports[0].is_ok());
    assert!(matches!(reports[1], Err(EvalError::EmptySubset { side: "test", .. })));
    assert!(sweep_grid(&pairs, |_: &TrainingData<f64>, _| Ok(constant(4)), &[0.5, -1.0], [0.0, 0.0], 0, 1).is_err());
}

#[test]
fn sweep_seeds_depend_on_a_only() {
    assert_eq!(derive_seed(7, 0.5), derive_seed(7, 0.5));
    assert_ne!(derive_seed(7, 0.5), derive_seed(7, 0.6));
    assert_ne!(derive_seed(7, 0.5), derive_seed(8, 0.5));
}

#[test]
fn random_precoding_lies_on_the_bound() {
    let m = 32;
    let pairs = random_pairs(8, 2000, m, 10.0);
    let bound = 10.0 * (1.0 / m as f64).log10();
    assert!((bound + 15.05).abs() < 0.01);
    let reports = sweep_grid(
        &pairs,
        |_: &TrainingData<f64>, seed| Ok(RandomPrecoding { seed }),
        &default_a_values(),
        [0.0, 0.0],
        0,
        2,
    )
    .unwrap();
    for r in reports {
        let r = r.unwrap();
        // unseen = bound is the line gap = bound - seen
        assert!((r.p_seen_db - bound).abs() < 0.5, "{r:?}");
        assert!((r.p_unseen_db - bound).abs() < 0.5);
    }
}

#[test]
fn random_split_reports_all_three_means() {
    let pairs = random_pairs(10, 300, 4, 3.0);
    let split = RandomSplit {
        train_fraction: 0.5,
        seed: 3,
    };
    let part = split.partition(&pairs).unwrap();
    assert_eq!(part.train.len(), 150);
    let r = evaluate_random_split(&Oracle, &part).unwrap();
    assert!(r.train_db.abs() < 1e-12 && r.test_db.abs() < 1e-12 && r.combined_db.abs() < 1e-12);
    let c = evaluate_random_split(&constant(4), &part).unwrap();
    let direct = mean_power_db(&pairs, &constant(4)).unwrap();
    assert!((c.combined_db - direct).abs() < 1e-12);
    assert!(RandomSplit {
        train_fraction: 1.0,
        seed: 0
    }
    .partition(&pairs)
    .is_err());
}

#[test]
fn heatmap_counts_every_point() {
    let pairs = random_pairs(11, 500, 4, 6.0);
    for cell in [0.1, 0.5, 1.0, 7.0] {
        let g = heatmap(&pairs, &constant(4), cell).unwrap();
        assert_eq!(g.total_count(), pairs.len());
        let mean_sum: f64 = g.cells.iter().map(|c| c.sum).sum();
        let direct: f64 = pair_powers(&pairs, &constant(4)).unwrap().iter().sum();
        assert!((mean_sum - direct).abs() < 1e-9);
    }
    let one = heatmap(&pairs, &Oracle, 0.5).unwrap();
    assert!(one.cells.iter().filter_map(|c| c.mean_db()).all(|db| db.abs() < 1e-12));
    assert!(heatmap(&pairs, &Oracle, -1.0).is_err());
}

#[test]
fn diagram_rows_follow_reports() {
    let pairs = random_pairs(12, 200, 4, 3.0);
    let split = CheckerboardSplit::new(1.0, [0.0, 0.0], 0).unwrap();
    let r = evaluate_seen_unseen(&constant(4), &split, &pairs).unwrap();
    let csv = diagram_csv(&[r.row()]);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    let fields: Vec<f64> = lines.next().unwrap().split(',').skip(1).map(|v| v.parse().unwrap()).collect();
    assert_eq!(fields, vec![1.0, r.p_seen_db, r.p_unseen_db, r.gap_db]);
}

#[test]
fn pearson_basics() {
    assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
    assert!((pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap() + 1.0).abs() < 1e-15);
    assert_eq!(pearson(&[1.0, 1.0], &[0.0, 1.0]), None);
}
