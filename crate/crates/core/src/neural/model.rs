//! Architecture selection, training dispatch and checkpoint I/O.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::checkpoint::{read_checkpoint, write_checkpoint};
use super::dnn::{self, NeuralPrecoder};
use super::encdec::{
    train_angle_pipeline, train_free, AngleEncoderDecoder, AngleStack, EncoderDecoder, EncoderDecoderSpec,
    LatentEncoder, LatentMode, TrainedAutoencoder,
};
use super::mlp::{Mlp, MlpSpec};
use super::train::{Network, TrainConfig, TrainHistory, TrainingData};
use super::NeuralError;
use crate::complex::CMatrix;
use crate::dataset::ArrayPose;
use crate::metrics::{Estimator, MetricsError, PrecodingVector};
use crate::provenance::Provenance;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Dnn {
        spec: MlpSpec,
    },
    EncoderDecoder {
        spec: EncoderDecoderSpec,
        /// Train the composed supervised chain end to end afterwards.
        #[serde(default)]
        fine_tune: bool,
    },
}

impl Architecture {
    pub fn dnn(num_antennas: usize, ul_columns: usize) -> Self {
        Architecture::Dnn {
            spec: MlpSpec::dnn(num_antennas, ul_columns),
        }
    }

    pub fn dnn_dropout(num_antennas: usize, ul_columns: usize, rate: f64) -> Self {
        Architecture::Dnn {
            spec: MlpSpec::dnn_dropout(num_antennas, ul_columns, rate),
        }
    }

    pub fn encoder_decoder(num_antennas: usize, ul_columns: usize, latent_mode: LatentMode) -> Self {
        Architecture::EncoderDecoder {
            spec: EncoderDecoderSpec::preset(num_antennas, ul_columns, latent_mode),
            fine_tune: false,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        match self {
            Architecture::Dnn { spec } => spec.validate(),
            Architecture::EncoderDecoder { spec, .. } => spec.validate(),
        }
    }

    /// Whether training needs position-derived angle labels.
    pub fn needs_pose(&self) -> bool {
        matches!(self, Architecture::EncoderDecoder { spec, .. } if spec.latent_mode.components().is_some())
    }

    pub fn id(&self) -> String {
        match self {
            Architecture::Dnn { spec } => dnn::default_id(spec),
            Architecture::EncoderDecoder { spec, fine_tune } => {
                let base = match spec.latent_mode {
                    LatentMode::Free { width } => format!("encdec_free_{width}"),
                    LatentMode::Azimuth => "encdec_azimuth".into(),
                    LatentMode::AzimuthElevation => "encdec_azimuth_elevation".into(),
                };
                if *fine_tune && spec.latent_mode.components().is_some() {
                    base + "_ft"
                } else {
                    base
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum TrainedModel<T> {
    Dnn(NeuralPrecoder<T>),
    Free(TrainedAutoencoder<T>),
    Angle(AngleEncoderDecoder<T>),
}

/// Trains `arch` on `data`. Supervised angle modes need `pose`.
pub fn train_model<T: Scalar>(
    arch: &Architecture,
    data: &TrainingData<T>,
    pose: Option<&ArrayPose<T>>,
    cfg: &TrainConfig,
) -> Result<TrainedModel<T>, NeuralError> {
    arch.validate()?;
    let id = arch.id();
    Ok(match arch {
        Architecture::Dnn { spec } => TrainedModel::Dnn(dnn::train(spec, data, cfg)?.with_id(id)),
        Architecture::EncoderDecoder { spec, fine_tune } => match spec.latent_mode {
            LatentMode::Free { .. } => TrainedModel::Free(train_free(spec, data, cfg)?),
            _ => {
                let pose = pose.ok_or_else(|| NeuralError::Spec("angle supervision needs the array pose".into()))?;
                TrainedModel::Angle(train_angle_pipeline(spec, data, pose, cfg, *fine_tune)?.with_id(id))
            }
        },
    })
}

fn fill<T: Scalar>(params: Vec<&mut [T]>, arrays: Vec<Vec<T>>) {
    for (p, a) in params.into_iter().zip(arrays) {
        p.copy_from_slice(&a);
    }
}

fn lens(params: &[&[impl Sized]]) -> Vec<usize> {
    params.iter().map(|p| p.len()).collect()
}

impl<T: Scalar> TrainedModel<T> {
    fn parameters(&self) -> Vec<&[T]> {
        match self {
            TrainedModel::Dnn(m) => m.network().parameters(),
            TrainedModel::Free(m) => m.network().parameters(),
            TrainedModel::Angle(m) => m.stack_parameters(),
        }
    }

    /// Writes all weights; `arch` must be the architecture the model was trained with.
    pub fn save<W: Write>(&self, w: W, arch: &Architecture) -> Result<(), NeuralError> {
        write_checkpoint(w, arch, &self.parameters())
    }

    /// Restores a model saved with [`TrainedModel::save`]. The loaded model carries
    /// [`Provenance::Unsplit`] since the checkpoint does not record its training split.
    pub fn load<R: Read>(r: R, arch: &Architecture) -> Result<Self, NeuralError> {
        arch.validate()?;
        let prov = Provenance::Unsplit;
        match arch {
            Architecture::Dnn { spec } => {
                let mut net = Mlp::new(spec, 0)?;
                let arrays = read_checkpoint(r, arch, &lens(&net.parameters()))?;
                fill(net.parameters_mut(), arrays);
                Ok(TrainedModel::Dnn(NeuralPrecoder::from_network(net, prov).with_id(arch.id())))
            }
            Architecture::EncoderDecoder { spec, .. } => match spec.latent_mode.components() {
                None => {
                    let mut net = EncoderDecoder {
                        encoder: Mlp::new(&spec.encoder, 0)?,
                        decoder: Mlp::new(&spec.decoder, 0)?,
                    };
                    let arrays = read_checkpoint(r, arch, &lens(&net.parameters()))?;
                    fill(net.parameters_mut(), arrays);
                    Ok(TrainedModel::Free(TrainedAutoencoder::from_parts(net, spec.clone(), prov)))
                }
                Some(components) => {
                    let encoders = components
                        .iter()
                        .map(|c| Ok((*c, Mlp::new(&spec.component_spec(*c), 0)?)))
                        .collect::<Result<Vec<_>, NeuralError>>()?;
                    let mut stack = AngleStack {
                        encoders,
                        decoder: Mlp::new(&spec.decoder, 0)?,
                    };
                    let arrays = read_checkpoint(r, arch, &lens(&stack.parameters()))?;
                    fill(stack.parameters_mut(), arrays);
                    Ok(TrainedModel::Angle(AngleEncoderDecoder::from_stack(stack, prov).with_id(arch.id())))
                }
            },
        }
    }

    /// Histories of every training stage, in training order.
    pub fn histories(&self) -> Vec<&TrainHistory> {
        match self {
            TrainedModel::Dnn(m) => vec![m.history()],
            TrainedModel::Free(m) => vec![m.history()],
            TrainedModel::Angle(m) => {
                let mut h: Vec<&TrainHistory> = m.encoder.history().iter().collect();
                h.push(m.decoder.history());
                h
            }
        }
    }

    /// Latent representation for encoder/decoder models.
    pub fn latent(&self, h_ul: &CMatrix<T>) -> Option<Result<Vec<T>, NeuralError>> {
        match self {
            TrainedModel::Dnn(_) => None,
            TrainedModel::Free(m) => Some(m.latent(h_ul)),
            TrainedModel::Angle(m) => Some(m.encoder.encode(h_ul)),
        }
    }
}

impl<T: Scalar> Estimator<T> for TrainedModel<T> {
    fn estimate(&self, h_ul: &CMatrix<T>) -> Result<PrecodingVector<T>, MetricsError> {
        match self {
            TrainedModel::Dnn(m) => m.estimate(h_ul),
            TrainedModel::Free(m) => m.estimate(h_ul),
            TrainedModel::Angle(m) => m.estimate(h_ul),
        }
    }

    fn id(&self) -> String {
        match self {
            TrainedModel::Dnn(m) => m.id(),
            TrainedModel::Free(m) => m.id(),
            TrainedModel::Angle(m) => m.id(),
        }
    }

    fn provenance(&self) -> Provenance {
        match self {
            TrainedModel::Dnn(m) => m.provenance(),
            TrainedModel::Free(m) => m.provenance(),
            TrainedModel::Angle(m) => m.provenance(),
        }
    }
}
