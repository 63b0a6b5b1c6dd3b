//! JSON run configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::CliError;
use crate::dataset::{DEFAULT_DL_INDEX, DEFAULT_UL_RANGE};
use crate::evaluation::{default_a_values, CheckerboardSplit, RandomSplit};
use crate::neural::{mix_seed, Architecture, LatentMode, TrainConfig};
use crate::synthgen::ScenePreset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

/// Synthetic desk-room dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub scene: ScenePreset,
    /// JSON scene file replacing `scene`.
    pub scene_path: Option<PathBuf>,
    /// Derived from the run seed when absent.
    pub scene_seed: Option<u64>,
    pub num_points: usize,
    /// Regular grid over the room instead of `num_points` random positions.
    pub grid_spacing: Option<f64>,
    /// Derived from the run seed when absent.
    pub position_seed: Option<u64>,
    pub noise_std: Option<f64>,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            scene: ScenePreset::LosOnly,
            scene_path: None,
            scene_seed: None,
            num_points: 1000,
            grid_spacing: None,
            position_seed: None,
            noise_std: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// `CSI1` file with its JSON sidecar.
    File { path: PathBuf },
    Synth(SynthSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EstimatorSpec {
    Random,
    PrincipalComponent,
    Dnn {
        #[serde(default)]
        dropout: Option<f64>,
        /// Falls back to the top-level `train`.
        #[serde(default)]
        train: Option<TrainConfig>,
    },
    EncoderDecoder {
        latent: LatentMode,
        #[serde(default)]
        fine_tune: bool,
        #[serde(default)]
        train: Option<TrainConfig>,
    },
}

impl EstimatorSpec {
    pub fn architecture(&self, num_antennas: usize, ul_columns: usize) -> Option<Architecture> {
        match self {
            EstimatorSpec::Random | EstimatorSpec::PrincipalComponent => None,
            EstimatorSpec::Dnn { dropout: None, .. } => Some(Architecture::dnn(num_antennas, ul_columns)),
            EstimatorSpec::Dnn { dropout: Some(r), .. } => Some(Architecture::dnn_dropout(num_antennas, ul_columns, *r)),
            EstimatorSpec::EncoderDecoder { latent, fine_tune, .. } => {
                let mut arch = Architecture::encoder_decoder(num_antennas, ul_columns, *latent);
                if let Architecture::EncoderDecoder { fine_tune: f, .. } = &mut arch {
                    *f = *fine_tune;
                }
                Some(arch)
            }
        }
    }

    /// Report identifier; independent of the array size.
    pub fn id(&self) -> String {
        match self {
            EstimatorSpec::Random => "random".into(),
            EstimatorSpec::PrincipalComponent => "principal_component".into(),
            _ => self.architecture(1, 1).expect("neural").id(),
        }
    }

    pub fn train(&self) -> Option<&TrainConfig> {
        match self {
            EstimatorSpec::Dnn { train, .. } | EstimatorSpec::EncoderDecoder { train, .. } => train.as_ref(),
            _ => None,
        }
    }

    fn train_mut(&mut self) -> Option<&mut Option<TrainConfig>> {
        match self {
            EstimatorSpec::Dnn { train, .. } | EstimatorSpec::EncoderDecoder { train, .. } => Some(train),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SplitSpec {
    Checkerboard {
        square_side: f64,
        #[serde(default)]
        origin: [f64; 2],
        #[serde(default)]
        parity_for_train: u8,
    },
    Random {
        #[serde(default = "half")]
        train_fraction: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn half() -> f64 {
    0.5
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Checkerboard {
            square_side: 2.0,
            origin: [0.0, 0.0],
            parity_for_train: 0,
        }
    }
}

impl SplitSpec {
    pub fn checkerboard(&self) -> Option<CheckerboardSplit> {
        match *self {
            SplitSpec::Checkerboard {
                square_side,
                origin,
                parity_for_train,
            } => Some(CheckerboardSplit {
                square_side,
                origin,
                parity_for_train,
            }),
            SplitSpec::Random { .. } => None,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        match self {
            SplitSpec::Checkerboard { .. } => self.checkerboard().unwrap().validate()?,
            SplitSpec::Random { train_fraction, seed } => RandomSplit {
                train_fraction: *train_fraction,
                seed: *seed,
            }
            .validate()?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub a_values: Vec<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            a_values: default_a_values(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitOn {
    /// Whole dataset.
    #[default]
    All,
    /// Training side of `split`.
    TrainSide,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapSpec {
    pub cell_size: f64,
    pub fit_on: FitOn,
}

impl Default for HeatmapSpec {
    fn default() -> Self {
        Self {
            cell_size: 0.25,
            fit_on: FitOn::All,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineSpec {
    pub random_draws: usize,
}

impl Default for BaselineSpec {
    fn default() -> Self {
        Self { random_draws: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    /// Half-open `[start, end)` of averaged subcarrier columns.
    pub ul_range: [usize; 2],
    pub dl_index: usize,
    /// Unit-Frobenius normalization of every record before extraction.
    pub normalize_records: bool,
    pub precision: Precision,
    pub estimators: Vec<EstimatorSpec>,
    pub split: SplitSpec,
    pub sweep: SweepSpec,
    pub heatmap: HeatmapSpec,
    pub baseline: BaselineSpec,
    /// Defaults for neural estimators without their own `train`.
    pub train: TrainConfig,
    pub out_dir: Option<PathBuf>,
    pub seed: u64,
    /// Worker threads for parallel evaluation; results do not depend on it.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synth(SynthSpec::default()),
            ul_range: [DEFAULT_UL_RANGE.start, DEFAULT_UL_RANGE.end],
            dl_index: DEFAULT_DL_INDEX,
            normalize_records: false,
            precision: Precision::F64,
            estimators: vec![EstimatorSpec::Dnn {
                dropout: None,
                train: None,
            }],
            split: SplitSpec::default(),
            sweep: SweepSpec::default(),
            heatmap: HeatmapSpec::default(),
            baseline: BaselineSpec::default(),
            train: TrainConfig::default(),
            out_dir: None,
            seed: 0,
            threads: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    /// Checks everything that does not need the data.
    pub fn validate(&self) -> Result<(), CliError> {
        let [start, end] = self.ul_range;
        if start >= end {
            return Err(CliError::Config(format!("ul_range [{start}, {end}) is empty")));
        }
        if (start..end).contains(&self.dl_index) {
            return Err(CliError::Config(format!(
                "dl_index {} lies inside ul_range [{start}, {end})",
                self.dl_index
            )));
        }
        self.split.validate()?;
        if self.sweep.a_values.is_empty() {
            return Err(CliError::Config("sweep.a_values is empty".into()));
        }
        for &a in &self.sweep.a_values {
            if !(a.is_finite() && a > 0.0) {
                return Err(CliError::Config(format!("sweep square side {a} must be positive")));
            }
        }
        if !(self.heatmap.cell_size.is_finite() && self.heatmap.cell_size > 0.0) {
            return Err(CliError::Config(format!(
                "heatmap.cell_size {} must be positive",
                self.heatmap.cell_size
            )));
        }
        if self.baseline.random_draws < 2 {
            return Err(CliError::Config("baseline.random_draws must be at least 2".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        if let DataSource::Synth(s) = &self.data {
            if s.scene_path.is_none() && s.grid_spacing.is_none() && s.num_points == 0 {
                return Err(CliError::Config("synth.num_points must be positive".into()));
            }
            if let Some(g) = s.grid_spacing {
                if !(g.is_finite() && g > 0.0) {
                    return Err(CliError::Config(format!("synth.grid_spacing {g} must be positive")));
                }
            }
            if let Some(n) = s.noise_std {
                if !(n.is_finite() && n >= 0.0) {
                    return Err(CliError::Config(format!("synth.noise_std {n} must be non-negative")));
                }
            }
        }
        self.train.validate()?;
        let mut ids = Vec::new();
        for e in &self.estimators {
            if let Some(t) = e.train() {
                t.validate()?;
            }
            match e {
                EstimatorSpec::Dnn { dropout: Some(r), .. } if !(0.0..1.0).contains(r) => {
                    return Err(CliError::Config(format!("dropout rate {r} must lie in [0, 1)")));
                }
                EstimatorSpec::EncoderDecoder {
                    latent: LatentMode::Free { width: 0 },
                    ..
                } => return Err(CliError::Config("free latent width must be positive".into())),
                _ => {}
            }
            let id = e.id();
            if ids.contains(&id) {
                return Err(CliError::Config(format!("estimator `{id}` is configured twice")));
            }
            ids.push(id);
        }
        Ok(())
    }

    /// Fills every seed that defaults to a function of the run seed.
    pub fn resolve(mut self) -> Self {
        let seed = self.seed;
        if let DataSource::Synth(s) = &mut self.data {
            s.scene_seed.get_or_insert(mix_seed(seed, 1));
            s.position_seed.get_or_insert(mix_seed(seed, 2));
        }
        let base = self.train;
        for e in &mut self.estimators {
            let salt = fnv1a(e.id().as_bytes());
            if let Some(t) = e.train_mut() {
                let mut cfg = t.unwrap_or(base);
                cfg.seed = mix_seed(seed, salt);
                *t = Some(cfg);
            }
        }
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ *b as u64).wrapping_mul(0x0100_0000_01b3))
}
