//! The six subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{DataSource, FitOn, SplitSpec};
use super::data::{base_seed, fit, load_pairs, load_records, read_file, Fitted};
use super::{CliError, Invocation, OutputDir, RESOLVED_CONFIG};
use crate::dataset::{bounding_box, write_dataset, CsiRecord, DatasetMeta, SamplePair};
use crate::evaluation::{
    diagram_csv, diagram_svg, evaluate_partition, heatmap, sweep_grid, train_side_principal_component, DiagramReference,
    EvalError, EvalReport, Partition, RandomSplit,
};
use crate::metrics::{mean_power_db, principal_component_baseline, random_baseline_monte_carlo, Estimator};
use crate::neural::{mix_seed, TrainHistory, TrainingData};
use crate::provenance::SplitTag;
use crate::scalar::{to_db, Scalar};

pub(crate) enum Kind {
    Validate(Option<PathBuf>),
    Synth,
    Baseline,
    TrainEval,
    Sweep,
    Heatmap,
}

pub(crate) fn execute<T: Scalar>(kind: &Kind, inv: &Invocation) -> Result<(), CliError> {
    match kind {
        Kind::Validate(path) => validate::<T>(inv, path.as_deref()),
        Kind::Synth => synth::<T>(inv),
        Kind::Baseline => baseline::<T>(inv),
        Kind::TrainEval => train_eval::<T>(inv),
        Kind::Sweep => sweep::<T>(inv),
        Kind::Heatmap => heatmaps::<T>(inv),
    }
}

/// Creates the output directory and records the resolved configuration in it.
fn prepare(inv: &Invocation) -> Result<OutputDir, CliError> {
    let out = inv.output_dir()?;
    out.write(RESOLVED_CONFIG, inv.config.to_json().as_bytes())?;
    Ok(out)
}

fn require_estimators(inv: &Invocation) -> Result<(), CliError> {
    if inv.config.estimators.is_empty() {
        return Err(CliError::Config("no estimators configured".into()));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Summary {
    records: usize,
    antennas: usize,
    subcarriers: usize,
    bbox_min: [f64; 3],
    bbox_max: [f64; 3],
    carrier_freq_hz: f64,
}

fn summarize<T: Scalar>(meta: &DatasetMeta<T>, records: &[CsiRecord<T>]) -> Result<Summary, CliError> {
    let (lo, hi) = bounding_box(records).ok_or_else(|| CliError::Data("dataset holds no records".into()))?;
    Ok(Summary {
        records: records.len(),
        antennas: records[0].num_antennas(),
        subcarriers: records[0].num_subcarriers(),
        bbox_min: lo.map(|v| v.as_f64()),
        bbox_max: hi.map(|v| v.as_f64()),
        carrier_freq_hz: meta.carrier_freq_hz.as_f64(),
    })
}

fn print_summary(s: &Summary) {
    println!("records: {}", s.records);
    println!("shape: {} antennas x {} subcarriers", s.antennas, s.subcarriers);
    println!(
        "bounding box: x {:.3}..{:.3} m, y {:.3}..{:.3} m, z {:.3}..{:.3} m",
        s.bbox_min[0], s.bbox_max[0], s.bbox_min[1], s.bbox_max[1], s.bbox_min[2], s.bbox_max[2]
    );
}

fn validate<T: Scalar>(inv: &Invocation, path: Option<&Path>) -> Result<(), CliError> {
    let (meta, records) = match path {
        Some(p) => read_file::<T>(p)?,
        None => load_records::<T>(inv)?,
    };
    let summary = summarize(&meta, &records)?;
    print_summary(&summary);
    if inv.config.out_dir.is_some() {
        prepare(inv)?.write_json("summary.json", &summary)?;
    }
    Ok(())
}

fn synth<T: Scalar>(inv: &Invocation) -> Result<(), CliError> {
    if !matches!(inv.config.data, DataSource::Synth(_)) {
        return Err(CliError::Config("synth needs a `synth` data source".into()));
    }
    let out = prepare(inv)?;
    let (meta, records) = load_records::<T>(inv)?;
    let mut bytes = Vec::new();
    write_dataset(&mut bytes, &records)?;
    out.write("dataset.csi", &bytes)?;
    out.write_json("dataset.json", &meta)?;
    let summary = summarize(&meta, &records)?;
    out.write_json("summary.json", &summary)?;
    print_summary(&summary);
    if let Some(scene) = super::data::scene::<T>(inv)? {
        out.write_json("scene.json", &scene)?;
    }
    Ok(())
}

/// Partition of `pairs` by the configured split, plus the square side for checkerboards.
fn partition<T: Scalar>(split: &SplitSpec, pairs: &[SamplePair<T>]) -> Result<(Partition<T>, f64), CliError> {
    Ok(match *split {
        SplitSpec::Checkerboard { .. } => {
            let s = split.checkerboard().expect("checkerboard");
            (s.partition(pairs), s.square_side)
        }
        SplitSpec::Random { train_fraction, seed } => (
            RandomSplit { train_fraction, seed }.partition(pairs)?,
            f64::NAN,
        ),
    })
}

fn nonempty<T>(part: &Partition<T>, a: f64) -> Result<(), EvalError> {
    if part.train.is_empty() {
        return Err(EvalError::EmptySubset { side: "training", a });
    }
    if part.test.is_empty() {
        return Err(EvalError::EmptySubset { side: "test", a });
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MonteCarloOut {
    mean_db: f64,
    mean_linear: f64,
    std_err_linear: f64,
    draws: usize,
    seed: u64,
}

#[derive(Debug, Serialize)]
struct PrincipalOut {
    all_db: f64,
    eigenvalue: f64,
    degenerate: bool,
}

#[derive(Debug, Serialize)]
struct SplitBaselineOut {
    split: SplitTag,
    seen_db: f64,
    unseen_db: f64,
    gap_db: f64,
    n_seen: usize,
    n_unseen: usize,
    degenerate: bool,
}

#[derive(Debug, Serialize)]
struct BaselineOut {
    num_antennas: usize,
    num_pairs: usize,
    random_analytic_db: f64,
    random_monte_carlo: MonteCarloOut,
    principal_component: PrincipalOut,
    split: Option<SplitBaselineOut>,
    split_skipped: Option<String>,
}

fn baseline<T: Scalar>(inv: &Invocation) -> Result<(), CliError> {
    let out = prepare(inv)?;
    let (pairs, _) = load_pairs::<T>(inv)?;
    let m = pairs.first().ok_or_else(|| CliError::Data("dataset holds no records".into()))?.num_antennas();
    let targets: Vec<_> = pairs.iter().map(|p| p.h_dl.clone()).collect();
    let mc_seed = mix_seed(inv.config.seed, super::config::fnv1a(b"random_baseline"));
    let mc = random_baseline_monte_carlo(&targets, inv.config.baseline.random_draws, mc_seed)?;
    let pc = principal_component_baseline(&targets)?;
    let all_db = mean_power_db(&pairs, &pc)?.as_f64();
    let random_analytic_db = -10.0 * (m as f64).log10();

    let (part, a) = partition(&inv.config.split, &pairs)?;
    let (split, split_skipped) = match nonempty(&part, a) {
        Ok(()) => {
            let pc_train = train_side_principal_component(&part)?;
            let degenerate = pc_train.degenerate;
            let r = evaluate_partition(&pc_train, &part, a)?;
            (
                Some(SplitBaselineOut {
                    split: part.tag,
                    seen_db: r.p_seen_db,
                    unseen_db: r.p_unseen_db,
                    gap_db: r.gap_db,
                    n_seen: part.train.len(),
                    n_unseen: part.test.len(),
                    degenerate,
                }),
                None,
            )
        }
        Err(e) => {
            eprintln!("note: split baseline skipped: {e}");
            (None, Some(e.to_string()))
        }
    };
    let report = BaselineOut {
        num_antennas: m,
        num_pairs: pairs.len(),
        random_analytic_db,
        random_monte_carlo: MonteCarloOut {
            mean_db: to_db(mc.mean).as_f64(),
            mean_linear: mc.mean.as_f64(),
            std_err_linear: mc.std_err.as_f64(),
            draws: mc.draws,
            seed: mc_seed,
        },
        principal_component: PrincipalOut {
            all_db,
            eigenvalue: pc.eigenvalue.as_f64(),
            degenerate: pc.degenerate,
        },
        split,
        split_skipped,
    };
    let mut csv = String::from("baseline,subset,p_db\n");
    let _ = writeln!(csv, "random_analytic,all,{}", report.random_analytic_db);
    let _ = writeln!(csv, "random_monte_carlo,all,{}", report.random_monte_carlo.mean_db);
    let _ = writeln!(csv, "principal_component,all,{}", report.principal_component.all_db);
    if let Some(s) = &report.split {
        let (a, b) = if matches!(s.split, SplitTag::Random { .. }) {
            ("train", "test")
        } else {
            ("seen", "unseen")
        };
        let _ = writeln!(csv, "principal_component,{a},{}", s.seen_db);
        let _ = writeln!(csv, "principal_component,{b},{}", s.unseen_db);
    }
    out.write("baseline.csv", csv.as_bytes())?;
    out.write_json("baseline.json", &report)?;
    print!("{csv}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct TrainEvalOut {
    estimator_id: String,
    split: SplitTag,
    p_seen_db: f64,
    p_unseen_db: f64,
    gap_db: f64,
    combined_db: f64,
    n_seen: usize,
    n_unseen: usize,
    /// The expected ordering; reported, not enforced.
    seen_at_least_unseen: bool,
    histories: Vec<TrainHistory>,
}

fn points_csv(report: &EvalReport) -> String {
    let mut s = String::from("x,y,z,p,seen\n");
    for p in &report.per_point {
        let _ = writeln!(s, "{},{},{},{},{}", p.position[0], p.position[1], p.position[2], p.p, p.seen as u8);
    }
    s
}

fn combined_db(report: &EvalReport) -> Result<f64, CliError> {
    let all: Vec<f64> = report.per_point.iter().map(|p| p.p).collect();
    Ok(to_db(crate::metrics::mean_linear(&all)?))
}

fn train_eval<T: Scalar>(inv: &Invocation) -> Result<(), CliError> {
    require_estimators(inv)?;
    let out = prepare(inv)?;
    let (pairs, pose) = load_pairs::<T>(inv)?;
    let (part, a) = partition(&inv.config.split, &pairs)?;
    nonempty(&part, a)?;
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    for spec in &inv.config.estimators {
        let fitted = fit(spec, &part.train_data(), &pose, base_seed(spec, inv.config.seed))?;
        let report = evaluate_partition(&fitted, &part, a)?;
        let id = fitted.id();
        if let Fitted::Model(model, arch) = &fitted {
            let mut bytes = Vec::new();
            model.save(&mut bytes, arch)?;
            out.write(&format!("{id}.ckpt"), &bytes)?;
            out.write_json(&format!("{id}.arch.json"), arch)?;
        }
        out.write(&format!("points_{id}.csv"), points_csv(&report).as_bytes())?;
        println!(
            "{id}: seen {:.3} dB, unseen {:.3} dB, gap {:.3} dB",
            report.p_seen_db, report.p_unseen_db, report.gap_db
        );
        if report.p_seen_db < report.p_unseen_db {
            eprintln!("note: {id} scores higher on unseen than on seen positions");
        }
        entries.push(TrainEvalOut {
            estimator_id: id,
            split: part.tag,
            p_seen_db: report.p_seen_db,
            p_unseen_db: report.p_unseen_db,
            gap_db: report.gap_db,
            combined_db: combined_db(&report)?,
            n_seen: part.train.len(),
            n_unseen: part.test.len(),
            seen_at_least_unseen: report.p_seen_db >= report.p_unseen_db,
            histories: fitted.histories(),
        });
        rows.push(report.row());
    }
    if matches!(part.tag, SplitTag::Random { .. }) {
        let mut csv = String::from("estimator_id,train_db,test_db,combined_db\n");
        for e in &entries {
            let _ = writeln!(csv, "{},{},{},{}", e.estimator_id, e.p_seen_db, e.p_unseen_db, e.combined_db);
        }
        out.write("report.csv", csv.as_bytes())?;
    } else {
        out.write("report.csv", diagram_csv(&rows).as_bytes())?;
    }
    out.write_json("report.json", &entries)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct SweepPoint {
    a: f64,
    p_seen_db: f64,
    p_unseen_db: f64,
    gap_db: f64,
}

#[derive(Debug, Serialize)]
struct Skipped {
    estimator_id: String,
    a: f64,
    reason: String,
}

#[derive(Debug, Serialize)]
struct SweepOut {
    random_bound_db: f64,
    principal_component: Vec<SweepPoint>,
    skipped: Vec<Skipped>,
    /// Entries where unseen power exceeds seen power.
    ordering_exceptions: Vec<OrderingException>,
}

#[derive(Debug, Serialize)]
struct OrderingException {
    estimator_id: String,
    a: f64,
    gap_db: f64,
}

/// Splits sweep results into reports and skipped entries; other errors abort.
fn collect(
    id: &str,
    a_values: &[f64],
    results: Vec<Result<EvalReport, EvalError>>,
    skipped: &mut Vec<Skipped>,
) -> Result<Vec<EvalReport>, CliError> {
    let mut ok = Vec::new();
    for (r, &a) in results.into_iter().zip(a_values) {
        match r {
            Ok(r) => ok.push(r),
            Err(e @ EvalError::EmptySubset { .. }) => {
                eprintln!("note: {id} at a = {a} m skipped: {e}");
                skipped.push(Skipped {
                    estimator_id: id.to_string(),
                    a,
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(ok)
}

fn sweep<T: Scalar>(inv: &Invocation) -> Result<(), CliError> {
    require_estimators(inv)?;
    let out = prepare(inv)?;
    let (pairs, pose) = load_pairs::<T>(inv)?;
    let m = pairs.first().ok_or_else(|| CliError::Data("dataset holds no records".into()))?.num_antennas();
    let (origin, parity) = match inv.config.split.checkerboard() {
        Some(s) => (s.origin, s.parity_for_train),
        None => ([0.0, 0.0], 0),
    };
    let a_values = &inv.config.sweep.a_values;
    let mut skipped = Vec::new();
    let mut rows = Vec::new();
    let mut exceptions = Vec::new();
    for spec in &inv.config.estimators {
        let results = sweep_grid(
            &pairs,
            |d: &TrainingData<T>, seed| fit(spec, d, &pose, seed),
            a_values,
            origin,
            parity,
            base_seed(spec, inv.config.seed),
        )?;
        for r in collect(&spec.id(), a_values, results, &mut skipped)? {
            if r.gap_db > 0.0 {
                exceptions.push(OrderingException {
                    estimator_id: r.estimator_id.clone(),
                    a: r.a,
                    gap_db: r.gap_db,
                });
            }
            rows.push(r.row());
        }
    }
    let pc_spec = super::config::EstimatorSpec::PrincipalComponent;
    let pc_results = sweep_grid(
        &pairs,
        |d: &TrainingData<T>, seed| fit(&pc_spec, d, &pose, seed),
        a_values,
        origin,
        parity,
        0,
    )?;
    let mut pc_skipped = Vec::new();
    let principal_component: Vec<SweepPoint> = collect("principal_component", a_values, pc_results, &mut pc_skipped)?
        .into_iter()
        .map(|r| SweepPoint {
            a: r.a,
            p_seen_db: r.p_seen_db,
            p_unseen_db: r.p_unseen_db,
            gap_db: r.gap_db,
        })
        .collect();
    if rows.is_empty() {
        return Err(CliError::Data("every sweep entry was skipped".into()));
    }
    let reference = DiagramReference {
        random_bound_db: -10.0 * (m as f64).log10(),
        principal_component: principal_component.iter().map(|p| (p.p_seen_db, p.gap_db)).collect(),
    };
    let csv = diagram_csv(&rows);
    out.write("sweep.csv", csv.as_bytes())?;
    out.write("sweep.svg", diagram_svg(&rows, &reference).as_bytes())?;
    out.write_json(
        "sweep.json",
        &SweepOut {
            random_bound_db: reference.random_bound_db,
            principal_component,
            skipped,
            ordering_exceptions: exceptions,
        },
    )?;
    print!("{csv}");
    Ok(())
}

fn heatmaps<T: Scalar>(inv: &Invocation) -> Result<(), CliError> {
    require_estimators(inv)?;
    let out = prepare(inv)?;
    let (pairs, pose) = load_pairs::<T>(inv)?;
    let spec = inv.config.heatmap;
    let part = match spec.fit_on {
        FitOn::All => None,
        FitOn::TrainSide => {
            let (p, a) = partition(&inv.config.split, &pairs)?;
            nonempty(&p, a)?;
            Some(p)
        }
    };
    for est in &inv.config.estimators {
        let data = match &part {
            Some(p) => p.train_data(),
            None => TrainingData::unsplit(&pairs),
        };
        let fitted = fit(est, &data, &pose, base_seed(est, inv.config.seed))?;
        let grid = heatmap(&pairs, &fitted, spec.cell_size)?;
        let id = fitted.id();
        out.write(&format!("heatmap_{id}.csv"), grid.to_csv().as_bytes())?;
        out.write(&format!("heatmap_{id}.svg"), grid.to_svg().as_bytes())?;
        println!(
            "{id}: {} cells occupied of {} x {}, mean {:.3} dB",
            grid.occupied(),
            grid.nx,
            grid.ny,
            mean_power_db(&pairs, &fitted)?.as_f64()
        );
    }
    Ok(())
}
