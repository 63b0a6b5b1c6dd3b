//! Dataset loading and estimator fitting for the commands.

use std::fs;

use super::config::{fnv1a, DataSource, EstimatorSpec};
use super::{CliError, Invocation};
use crate::complex::CMatrix;
use crate::dataset::{
    average_subcarriers, read_dataset, read_sidecar, sidecar_path, to_pairs, ArrayPose, CsiRecord, DatasetMeta,
    SamplePair,
};
use crate::evaluation::EvalError;
use crate::metrics::{principal_component_baseline, Estimator, MetricsError, PrecodingVector, PrincipalComponent, RandomPrecoding};
use crate::neural::{mix_seed, train_model, Architecture, TrainHistory, TrainedModel, TrainingData};
use crate::provenance::Provenance;
use crate::scalar::Scalar;
use crate::synthgen::{
    desk_positions, generate_dataset_with_noise, grid_positions, synthetic_meta, FrequencyPlan, Scene, ROOM_X, ROOM_Y,
    UE_HEIGHT,
};

/// Reads a `CSI1` file and its sidecar. Files holding the raw subcarriers are
/// averaged down to the sidecar's averaged count.
pub fn read_file<T: Scalar>(path: &std::path::Path) -> Result<(DatasetMeta<T>, Vec<CsiRecord<T>>), CliError> {
    let meta: DatasetMeta<T> = read_sidecar(&sidecar_path(path))?;
    let file = fs::File::open(path).map_err(|e| CliError::Data(format!("cannot open {}: {e}", path.display())))?;
    let records: Vec<CsiRecord<T>> = read_dataset(std::io::BufReader::new(file), None)?;
    let Some(first) = records.first() else {
        return Err(CliError::Data(format!("{} holds no records", path.display())));
    };
    if first.num_antennas() != meta.num_antennas {
        return Err(CliError::Data(format!(
            "file has {} antennas, sidecar says {}",
            first.num_antennas(),
            meta.num_antennas
        )));
    }
    let s = first.num_subcarriers();
    if s == meta.num_avg_subcarriers {
        return Ok((meta, records));
    }
    if s != meta.num_raw_subcarriers {
        return Err(CliError::Data(format!(
            "file has {s} subcarriers, sidecar expects {} raw or {} averaged",
            meta.num_raw_subcarriers, meta.num_avg_subcarriers
        )));
    }
    let batch = meta.averaging_batch();
    let averaged = records
        .iter()
        .map(|r| Ok(CsiRecord::new(r.position(), average_subcarriers(r.csi(), batch)?)?))
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok((meta, averaged))
}

pub fn scene<T: Scalar>(inv: &Invocation) -> Result<Option<Scene<T>>, CliError> {
    let DataSource::Synth(spec) = &inv.config.data else {
        return Ok(None);
    };
    let scene = match &spec.scene_path {
        Some(p) => {
            let path = inv.resolve_path(p);
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::Config(format!("cannot read scene {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("scene {}: {e}", path.display())))?
        }
        None => Scene::desk(spec.scene, spec.scene_seed.expect("resolved")),
    };
    Ok(Some(scene))
}

/// Records of the configured data source.
pub fn load_records<T: Scalar>(inv: &Invocation) -> Result<(DatasetMeta<T>, Vec<CsiRecord<T>>), CliError> {
    match &inv.config.data {
        DataSource::File { path } => read_file(&inv.resolve_path(path)),
        DataSource::Synth(spec) => {
            let scene = scene::<T>(inv)?.expect("synth source");
            let plan = FrequencyPlan::<T>::desk_default();
            let positions = match spec.grid_spacing {
                Some(g) => grid_positions(
                    (T::lit(ROOM_X.0), T::lit(ROOM_X.1)),
                    (T::lit(ROOM_Y.0), T::lit(ROOM_Y.1)),
                    T::lit(UE_HEIGHT),
                    T::lit(g),
                ),
                None => desk_positions(spec.num_points, spec.position_seed.expect("resolved")),
            };
            let records = generate_dataset_with_noise(&scene, &plan, &positions, spec.noise_std.map(T::lit))?;
            Ok((synthetic_meta(&scene, &plan), records))
        }
    }
}

/// Sample pairs plus the array pose of the configured data.
pub fn load_pairs<T: Scalar>(inv: &Invocation) -> Result<(Vec<SamplePair<T>>, ArrayPose<T>), CliError> {
    let (meta, mut records) = load_records::<T>(inv)?;
    if inv.config.normalize_records {
        records.iter_mut().for_each(CsiRecord::normalize_frobenius);
    }
    let [start, end] = inv.config.ul_range;
    let pairs = to_pairs(&records, start..end, inv.config.dl_index)?;
    Ok((pairs, meta.array_pose))
}

/// An estimator fitted by the CLI.
pub enum Fitted<T> {
    Random(RandomPrecoding),
    PrincipalComponent(PrincipalComponent<T>),
    Model(Box<TrainedModel<T>>, Architecture),
}

impl<T: Scalar> Fitted<T> {
    pub fn histories(&self) -> Vec<TrainHistory> {
        match self {
            Fitted::Model(m, _) => m.histories().into_iter().cloned().collect(),
            _ => Vec::new(),
        }
    }
}

impl<T: Scalar> Estimator<T> for Fitted<T> {
    fn estimate(&self, h_ul: &CMatrix<T>) -> Result<PrecodingVector<T>, MetricsError> {
        match self {
            Fitted::Random(e) => e.estimate(h_ul),
            Fitted::PrincipalComponent(e) => e.estimate(h_ul),
            Fitted::Model(e, _) => e.estimate(h_ul),
        }
    }

    fn id(&self) -> String {
        match self {
            Fitted::Random(e) => Estimator::<T>::id(e),
            Fitted::PrincipalComponent(e) => e.id(),
            Fitted::Model(e, _) => e.id(),
        }
    }

    fn provenance(&self) -> Provenance {
        match self {
            Fitted::Random(e) => Estimator::<T>::provenance(e),
            Fitted::PrincipalComponent(e) => e.provenance(),
            Fitted::Model(e, _) => e.provenance(),
        }
    }
}

/// Seed an estimator is fitted with outside sweeps.
pub fn base_seed(spec: &EstimatorSpec, run_seed: u64) -> u64 {
    match spec.train() {
        Some(t) => t.seed,
        None => mix_seed(run_seed, fnv1a(spec.id().as_bytes())),
    }
}

/// Fits `spec` on `data` using `seed` for every random choice.
pub fn fit<T: Scalar>(
    spec: &EstimatorSpec,
    data: &TrainingData<T>,
    pose: &ArrayPose<T>,
    seed: u64,
) -> Result<Fitted<T>, EvalError> {
    Ok(match spec {
        EstimatorSpec::Random => Fitted::Random(RandomPrecoding { seed }),
        EstimatorSpec::PrincipalComponent => {
            let targets: Vec<_> = data.pairs().iter().map(|p| p.h_dl.clone()).collect();
            Fitted::PrincipalComponent(principal_component_baseline(&targets)?.with_provenance(data.provenance()))
        }
        _ => {
            let first = data.pairs().first().ok_or(crate::neural::NeuralError::EmptyTrainingSet)?;
            let arch = spec
                .architecture(first.num_antennas(), first.h_ul.cols())
                .expect("neural estimator");
            let mut cfg = *spec.train().expect("resolved train config");
            cfg.seed = seed;
            let model = train_model(&arch, data, Some(pose), &cfg)?;
            Fitted::Model(Box::new(model), arch)
        }
    })
}
