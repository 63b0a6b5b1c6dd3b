//! Direct uplink-to-downlink regression network.

use super::loss::cosine_loss_and_grad;
use super::mlp::{Mlp, MlpSpec};
use super::train::{fit, flatten_input, mix_seed, output_to_complex, TrainConfig, TrainHistory, TrainingData};
use super::NeuralError;
use crate::complex::CMatrix;
use crate::metrics::{Estimator, MetricsError, PrecodingVector};
use crate::provenance::Provenance;
use crate::scalar::Scalar;

pub(crate) const INIT_SALT: u64 = 0x696e_6974;

/// A trained network whose normalized output is the precoding vector.
#[derive(Debug, Clone)]
pub struct NeuralPrecoder<T> {
    net: Mlp<T>,
    provenance: Provenance,
    history: TrainHistory,
    id: String,
}

pub(crate) fn check_io(spec: &MlpSpec, (m, s): (usize, usize)) -> Result<(), NeuralError> {
    if spec.input_width != 2 * m * s {
        return Err(NeuralError::Spec(format!(
            "input width {} does not fit {m} x {s} uplink CSI",
            spec.input_width
        )));
    }
    if spec.output_width() != 2 * m {
        return Err(NeuralError::Spec(format!(
            "output width {} does not fit {m} antennas",
            spec.output_width()
        )));
    }
    Ok(())
}

pub(crate) fn default_id(spec: &MlpSpec) -> String {
    match spec.dropout {
        Some(d) => format!("dnn_dropout_{}", d.rate),
        None => "dnn".into(),
    }
}

/// Fits `spec` with the cosine loss `1 - P` on the training pairs.
pub fn train<T: Scalar>(spec: &MlpSpec, data: &TrainingData<T>, cfg: &TrainConfig) -> Result<NeuralPrecoder<T>, NeuralError> {
    cfg.validate()?;
    let shape = data.check()?;
    check_io(spec, shape)?;
    let mut net = Mlp::new(spec, mix_seed(cfg.seed, INIT_SALT))?;
    let inputs = data.flattened_inputs();
    let pairs = data.pairs();
    let history = fit(&mut net, &inputs, |i, y| cosine_loss_and_grad(y, &pairs[i].h_dl), cfg)?;
    Ok(NeuralPrecoder {
        id: default_id(spec),
        net,
        provenance: data.provenance(),
        history,
    })
}

impl<T: Scalar> NeuralPrecoder<T> {
    pub fn from_network(net: Mlp<T>, provenance: Provenance) -> Self {
        Self {
            id: default_id(net.spec()),
            net,
            provenance,
            history: TrainHistory::default(),
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn network(&self) -> &Mlp<T> {
        &self.net
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    /// Raw, unnormalized network output.
    pub fn raw_output(&self, h_ul: &CMatrix<T>) -> Result<Vec<T>, NeuralError> {
        self.net.predict(&flatten_input(h_ul))
    }
}

pub(crate) fn to_metrics(e: NeuralError) -> MetricsError {
    MetricsError::Estimator(e.to_string())
}

impl<T: Scalar> Estimator<T> for NeuralPrecoder<T> {
    fn estimate(&self, h_ul: &CMatrix<T>) -> Result<PrecodingVector<T>, MetricsError> {
        let y = self.raw_output(h_ul).map_err(to_metrics)?;
        PrecodingVector::from_unnormalized(&output_to_complex(&y))
    }

    fn id(&self) -> String {
        self.id.clone()
    }

    fn provenance(&self) -> Provenance {
        self.provenance
    }
}
