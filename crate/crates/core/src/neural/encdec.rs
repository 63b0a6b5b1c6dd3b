//! Encoder/decoder networks with a one- or two-dimensional latent.

use serde::{Deserialize, Serialize};

use super::aoa::{aoa_from_position, AngleComponent, AoaLabel};
use super::dnn::{to_metrics, INIT_SALT};
use super::loss::{cosine_loss_and_grad, squared_error_and_grad};
use super::mlp::{Activation, Mlp, MlpCache, MlpSpec, Mode};
use super::train::{fit, flatten_input, mix_seed, output_to_complex, Network, TrainConfig, TrainHistory, TrainingData};
use super::NeuralError;
use crate::complex::CMatrix;
use crate::dataset::ArrayPose;
use crate::metrics::{Estimator, MetricsError, PrecodingVector};
use crate::provenance::Provenance;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LatentMode {
    /// Latent learned end to end.
    Free { width: usize },
    /// Latent supervised to be the azimuth.
    Azimuth,
    /// Latent supervised to be `(azimuth, elevation)`, one encoder network per angle.
    AzimuthElevation,
}

impl LatentMode {
    pub fn width(self) -> usize {
        match self {
            LatentMode::Free { width } => width,
            LatentMode::Azimuth => 1,
            LatentMode::AzimuthElevation => 2,
        }
    }

    pub fn components(self) -> Option<Vec<AngleComponent>> {
        match self {
            LatentMode::Free { .. } => None,
            LatentMode::Azimuth => Some(vec![AngleComponent::Azimuth]),
            LatentMode::AzimuthElevation => Some(vec![AngleComponent::Azimuth, AngleComponent::Elevation]),
        }
    }
}

/// In supervised modes the encoder spec is a template: each angle gets its own
/// network of that shape, with the final width replaced by the angle's encoded width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderDecoderSpec {
    pub encoder: MlpSpec,
    pub decoder: MlpSpec,
    pub latent_mode: LatentMode,
}

impl EncoderDecoderSpec {
    /// Encoder `[in, in/2, 2M, l]`, decoder `[2M, 4M, 2M]`; `[512, 256, 64, l]` and
    /// `[64, 128, 64]` for a 32 x 8 uplink.
    pub fn preset(num_antennas: usize, ul_columns: usize, latent_mode: LatentMode) -> Self {
        let input = 2 * num_antennas * ul_columns;
        let l = latent_mode.width();
        let m2 = 2 * num_antennas;
        Self {
            encoder: MlpSpec::uniform(input, vec![input, (input / 2).max(1), m2, l], Activation::Relu),
            decoder: MlpSpec::uniform(l, vec![m2, 2 * m2, m2], Activation::Relu),
            latent_mode,
        }
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        self.encoder.validate()?;
        self.decoder.validate()?;
        let l = self.latent_mode.width();
        if let LatentMode::Free { width } = self.latent_mode {
            if !(1..=2).contains(&width) {
                return Err(NeuralError::Spec(format!("free latent width {width} must be 1 or 2")));
            }
        }
        if self.encoder.output_width() != l || self.decoder.input_width != l {
            return Err(NeuralError::LatentMismatch {
                encoder: self.encoder.output_width(),
                decoder: self.decoder.input_width,
            });
        }
        if self.decoder.output_width() % 2 != 0 {
            return Err(NeuralError::Spec("decoder output width must be even".into()));
        }
        Ok(())
    }

    pub(crate) fn component_spec(&self, c: AngleComponent) -> MlpSpec {
        let mut s = self.encoder.clone();
        if let Some(last) = s.layer_widths.last_mut() {
            *last = c.encoded_width();
        }
        s
    }
}

fn check_shapes(enc: &MlpSpec, dec: &MlpSpec, (m, s): (usize, usize)) -> Result<(), NeuralError> {
    if enc.input_width != 2 * m * s || dec.output_width() != 2 * m {
        return Err(NeuralError::Spec(format!(
            "encoder input {} / decoder output {} do not fit {m} x {s} uplink CSI",
            enc.input_width,
            dec.output_width()
        )));
    }
    Ok(())
}

/// Encoder followed by decoder, trained as one network.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderDecoder<T> {
    pub encoder: Mlp<T>,
    pub decoder: Mlp<T>,
}

impl<T: Scalar> Network<T> for EncoderDecoder<T> {
    type Cache = (MlpCache<T>, MlpCache<T>);

    fn input_width(&self) -> usize {
        self.encoder.input_width()
    }

    fn output_width(&self) -> usize {
        self.decoder.output_width()
    }

    fn forward(&self, input: &[T], batch: usize, mode: Mode) -> Result<(Vec<T>, Self::Cache), NeuralError> {
        let (latent, ec) = self.encoder.forward(input, batch, mode)?;
        let (out, dc) = self.decoder.forward(&latent, batch, mode)?;
        Ok((out, (ec, dc)))
    }

    fn backward(&self, cache: &Self::Cache, d_output: &[T], grads: &mut [Vec<T>]) -> Vec<T> {
        let n_enc = 2 * self.encoder.layers().len();
        let (ge, gd) = grads.split_at_mut(n_enc);
        let d_latent = self.decoder.backward(&cache.1, d_output, gd);
        self.encoder.backward(&cache.0, &d_latent, ge)
    }

    fn parameters(&self) -> Vec<&[T]> {
        let mut p = self.encoder.parameters();
        p.extend(self.decoder.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut [T]> {
        let mut p = self.encoder.parameters_mut();
        p.extend(self.decoder.parameters_mut());
        p
    }
}

/// Free-latent encoder/decoder estimator.
#[derive(Debug, Clone)]
pub struct TrainedAutoencoder<T> {
    net: EncoderDecoder<T>,
    spec: EncoderDecoderSpec,
    provenance: Provenance,
    history: TrainHistory,
}

/// Trains a free-latent encoder/decoder end to end with the cosine loss.
pub fn train_free<T: Scalar>(
    spec: &EncoderDecoderSpec,
    data: &TrainingData<T>,
    cfg: &TrainConfig,
) -> Result<TrainedAutoencoder<T>, NeuralError> {
    spec.validate()?;
    cfg.validate()?;
    if !matches!(spec.latent_mode, LatentMode::Free { .. }) {
        return Err(NeuralError::Spec("train_free needs a free latent".into()));
    }
    check_shapes(&spec.encoder, &spec.decoder, data.check()?)?;
    let seed = mix_seed(cfg.seed, INIT_SALT);
    let mut net = EncoderDecoder {
        encoder: Mlp::new(&spec.encoder, seed)?,
        decoder: Mlp::new(&spec.decoder, mix_seed(seed, 1))?,
    };
    let inputs = data.flattened_inputs();
    let pairs = data.pairs();
    let history = fit(&mut net, &inputs, |i, y| cosine_loss_and_grad(y, &pairs[i].h_dl), cfg)?;
    Ok(TrainedAutoencoder {
        net,
        spec: spec.clone(),
        provenance: data.provenance(),
        history,
    })
}

impl<T: Scalar> TrainedAutoencoder<T> {
    pub(crate) fn from_parts(net: EncoderDecoder<T>, spec: EncoderDecoderSpec, provenance: Provenance) -> Self {
        Self {
            net,
            spec,
            provenance,
            history: TrainHistory::default(),
        }
    }

    pub fn network(&self) -> &EncoderDecoder<T> {
        &self.net
    }

    pub fn spec(&self) -> &EncoderDecoderSpec {
        &self.spec
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    pub fn latent(&self, h_ul: &CMatrix<T>) -> Result<Vec<T>, NeuralError> {
        self.net.encoder.predict(&flatten_input(h_ul))
    }
}

impl<T: Scalar> Estimator<T> for TrainedAutoencoder<T> {
    fn estimate(&self, h_ul: &CMatrix<T>) -> Result<PrecodingVector<T>, MetricsError> {
        let z = self.latent(h_ul).map_err(to_metrics)?;
        let y = self.net.decoder.predict(&z).map_err(to_metrics)?;
        PrecodingVector::from_unnormalized(&output_to_complex(&y))
    }

    fn id(&self) -> String {
        format!("encdec_free_{}", self.spec.latent_mode.width())
    }

    fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// Maps uplink CSI to a latent vector.
pub trait LatentEncoder<T: Scalar>: Send + Sync {
    fn latent_width(&self) -> usize;
    fn encode(&self, h_ul: &CMatrix<T>) -> Result<Vec<T>, NeuralError>;
    fn provenance(&self) -> Provenance;
}

/// Maps a latent vector to an unnormalized downlink estimate.
pub trait LatentDecoder<T: Scalar>: Send + Sync {
    fn latent_width(&self) -> usize;
    fn decode(&self, latent: &[T]) -> Result<Vec<T>, NeuralError>;
    fn provenance(&self) -> Provenance;
}

/// One regression network per angle.
#[derive(Debug, Clone)]
pub struct TrainedEncoder<T> {
    nets: Vec<(AngleComponent, Mlp<T>)>,
    provenance: Provenance,
    history: Vec<TrainHistory>,
}

impl<T: Scalar> TrainedEncoder<T> {
    pub fn components(&self) -> Vec<AngleComponent> {
        self.nets.iter().map(|(c, _)| *c).collect()
    }

    pub fn networks(&self) -> &[(AngleComponent, Mlp<T>)] {
        &self.nets
    }

    pub fn history(&self) -> &[TrainHistory] {
        &self.history
    }
}

impl<T: Scalar> LatentEncoder<T> for TrainedEncoder<T> {
    fn latent_width(&self) -> usize {
        self.nets.len()
    }

    /// Canonical angles, one per component.
    fn encode(&self, h_ul: &CMatrix<T>) -> Result<Vec<T>, NeuralError> {
        let x = flatten_input(h_ul);
        self.nets.iter().map(|(c, net)| Ok(c.decode(&net.predict(&x)?))).collect()
    }

    fn provenance(&self) -> Provenance {
        self.provenance
    }
}

fn check_labels<T: Scalar>(data: &TrainingData<T>, labels: &[AoaLabel<T>]) -> Result<(), NeuralError> {
    if labels.len() != data.len() {
        return Err(NeuralError::Shape {
            expected: data.len(),
            found: labels.len(),
        });
    }
    Ok(())
}

/// Squared-error regression of each selected angle; every component gets its own
/// network, seeded by the component so results do not depend on their order.
pub fn train_supervised_encoder<T: Scalar>(
    template: &MlpSpec,
    data: &TrainingData<T>,
    components: &[AngleComponent],
    labels: &[AoaLabel<T>],
    cfg: &TrainConfig,
) -> Result<TrainedEncoder<T>, NeuralError> {
    cfg.validate()?;
    template.validate()?;
    let (m, s) = data.check()?;
    check_labels(data, labels)?;
    if components.is_empty() || template.output_width() != components.len() {
        return Err(NeuralError::LatentMismatch {
            encoder: template.output_width(),
            decoder: components.len(),
        });
    }
    if template.input_width != 2 * m * s {
        return Err(NeuralError::Spec(format!("encoder input {} does not fit {m} x {s}", template.input_width)));
    }
    let inputs = data.flattened_inputs();
    let mut nets = Vec::with_capacity(components.len());
    let mut history = Vec::with_capacity(components.len());
    for &c in components {
        let mut spec = template.clone();
        *spec.layer_widths.last_mut().unwrap() = c.encoded_width();
        let ccfg = cfg.reseeded(c.seed_salt());
        let mut net = Mlp::new(&spec, mix_seed(ccfg.seed, INIT_SALT))?;
        let targets: Vec<Vec<T>> = labels.iter().map(|l| c.encode(c.select(l))).collect();
        history.push(fit(&mut net, &inputs, |i, y| squared_error_and_grad(y, &targets[i]), &ccfg)?);
        nets.push((c, net));
    }
    Ok(TrainedEncoder {
        nets,
        provenance: data.provenance(),
        history,
    })
}

/// Generates the downlink channel from angles.
#[derive(Debug, Clone)]
pub struct TrainedDecoder<T> {
    net: Mlp<T>,
    components: Vec<AngleComponent>,
    provenance: Provenance,
    history: TrainHistory,
}

impl<T: Scalar> TrainedDecoder<T> {
    pub fn components(&self) -> &[AngleComponent] {
        &self.components
    }

    pub fn network(&self) -> &Mlp<T> {
        &self.net
    }

    pub fn history(&self) -> &TrainHistory {
        &self.history
    }

    pub fn estimate_from_angles(&self, angles: &[T]) -> Result<PrecodingVector<T>, MetricsError> {
        let y = self.decode(angles).map_err(to_metrics)?;
        PrecodingVector::from_unnormalized(&output_to_complex(&y))
    }

    fn canonical(&self, angles: &[T]) -> Result<Vec<T>, NeuralError> {
        if angles.len() != self.components.len() {
            return Err(NeuralError::LatentMismatch {
                encoder: angles.len(),
                decoder: self.components.len(),
            });
        }
        Ok(self.components.iter().zip(angles).map(|(c, a)| c.canonicalize(*a)).collect())
    }
}

impl<T: Scalar> LatentDecoder<T> for TrainedDecoder<T> {
    fn latent_width(&self) -> usize {
        self.components.len()
    }

    fn decode(&self, latent: &[T]) -> Result<Vec<T>, NeuralError> {
        self.net.predict(&self.canonical(latent)?)
    }

    fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// Cosine-loss fit of the downlink channel from true (label) angles.
pub fn train_supervised_decoder<T: Scalar>(
    spec: &MlpSpec,
    data: &TrainingData<T>,
    components: &[AngleComponent],
    labels: &[AoaLabel<T>],
    cfg: &TrainConfig,
) -> Result<TrainedDecoder<T>, NeuralError> {
    cfg.validate()?;
    spec.validate()?;
    let (m, _) = data.check()?;
    check_labels(data, labels)?;
    if spec.input_width != components.len() || components.is_empty() {
        return Err(NeuralError::LatentMismatch {
            encoder: components.len(),
            decoder: spec.input_width,
        });
    }
    if spec.output_width() != 2 * m {
        return Err(NeuralError::Spec(format!("decoder output {} does not fit {m} antennas", spec.output_width())));
    }
    let inputs: Vec<Vec<T>> = labels
        .iter()
        .map(|l| components.iter().map(|c| c.canonicalize(c.select(l))).collect())
        .collect();
    let mut net = Mlp::new(spec, mix_seed(cfg.seed, INIT_SALT))?;
    let pairs = data.pairs();
    let history = fit(&mut net, &inputs, |i, y| cosine_loss_and_grad(y, &pairs[i].h_dl), cfg)?;
    Ok(TrainedDecoder {
        net,
        components: components.to_vec(),
        provenance: data.provenance(),
        history,
    })
}

/// Encoder and decoder connected in series.
#[derive(Debug, Clone)]
pub struct Composed<E, D> {
    pub encoder: E,
    pub decoder: D,
    id: String,
}

pub fn compose<T: Scalar, E: LatentEncoder<T>, D: LatentDecoder<T>>(encoder: E, decoder: D) -> Result<Composed<E, D>, NeuralError> {
    if encoder.latent_width() != decoder.latent_width() {
        return Err(NeuralError::LatentMismatch {
            encoder: encoder.latent_width(),
            decoder: decoder.latent_width(),
        });
    }
    let id = format!("encdec_{}", encoder.latent_width());
    Ok(Composed { encoder, decoder, id })
}

impl<E, D> Composed<E, D> {
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

fn combine(a: Provenance, b: Provenance) -> Provenance {
    match (a, b) {
        _ if a == b => a,
        (Provenance::DataIndependent, p) | (p, Provenance::DataIndependent) => p,
        _ => Provenance::Unsplit,
    }
}

impl<T: Scalar, E: LatentEncoder<T>, D: LatentDecoder<T>> Estimator<T> for Composed<E, D> {
    fn estimate(&self, h_ul: &CMatrix<T>) -> Result<PrecodingVector<T>, MetricsError> {
        let z = self.encoder.encode(h_ul).map_err(to_metrics)?;
        let y = self.decoder.decode(&z).map_err(to_metrics)?;
        PrecodingVector::from_unnormalized(&output_to_complex(&y))
    }

    fn id(&self) -> String {
        self.id.clone()
    }

    fn provenance(&self) -> Provenance {
        combine(self.encoder.provenance(), self.decoder.provenance())
    }
}

/// Angle networks, angle conversion and decoder as one differentiable graph.
#[derive(Debug, Clone)]
pub(crate) struct AngleStack<T> {
    pub encoders: Vec<(AngleComponent, Mlp<T>)>,
    pub decoder: Mlp<T>,
}

pub(crate) struct AngleStackCache<T> {
    enc: Vec<(Vec<T>, MlpCache<T>)>,
    dec: MlpCache<T>,
}

impl<T: Scalar> Network<T> for AngleStack<T> {
    type Cache = AngleStackCache<T>;

    fn input_width(&self) -> usize {
        self.encoders[0].1.input_width()
    }

    fn output_width(&self) -> usize {
        self.decoder.output_width()
    }

    fn forward(&self, input: &[T], batch: usize, mode: Mode) -> Result<(Vec<T>, Self::Cache), NeuralError> {
        let l = self.encoders.len();
        let mut latent = vec![T::zero(); batch * l];
        let mut enc = Vec::with_capacity(l);
        for (k, (c, net)) in self.encoders.iter().enumerate() {
            let (y, cache) = net.forward(input, batch, mode)?;
            let w = c.encoded_width();
            for b in 0..batch {
                latent[b * l + k] = c.decode(&y[b * w..(b + 1) * w]);
            }
            enc.push((y, cache));
        }
        let (out, dec) = self.decoder.forward(&latent, batch, mode)?;
        Ok((out, AngleStackCache { enc, dec }))
    }

    fn backward(&self, cache: &Self::Cache, d_output: &[T], grads: &mut [Vec<T>]) -> Vec<T> {
        let l = self.encoders.len();
        let batch = d_output.len() / self.output_width();
        let n_enc: usize = self.encoders.iter().map(|(_, n)| 2 * n.layers().len()).sum();
        let (ge, gd) = grads.split_at_mut(n_enc);
        let d_latent = self.decoder.backward(&cache.dec, d_output, gd);
        let mut d_input = vec![T::zero(); batch * self.input_width()];
        let mut offset = 0;
        for (k, (c, net)) in self.encoders.iter().enumerate() {
            let y = &cache.enc[k].0;
            let w = c.encoded_width();
            let mut dy = vec![T::zero(); y.len()];
            for b in 0..batch {
                let g = d_latent[b * l + k];
                let yb = &y[b * w..(b + 1) * w];
                match c {
                    AngleComponent::Azimuth => {
                        let r2 = yb[0] * yb[0] + yb[1] * yb[1];
                        if r2 > T::zero() {
                            dy[b * w] = g * yb[1] / r2;
                            dy[b * w + 1] = -g * yb[0] / r2;
                        }
                    }
                    AngleComponent::Elevation => {
                        if yb[0].abs() <= T::FRAC_PI_2() {
                            dy[b * w] = g;
                        }
                    }
                }
            }
            let n = 2 * net.layers().len();
            let dx = net.backward(&cache.enc[k].1, &dy, &mut ge[offset..offset + n]);
            for (a, v) in d_input.iter_mut().zip(dx) {
                *a += v;
            }
            offset += n;
        }
        d_input
    }

    fn parameters(&self) -> Vec<&[T]> {
        let mut p: Vec<&[T]> = self.encoders.iter().flat_map(|(_, n)| n.parameters()).collect();
        p.extend(self.decoder.parameters());
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut [T]> {
        let mut p: Vec<&mut [T]> = self.encoders.iter_mut().flat_map(|(_, n)| n.parameters_mut()).collect();
        p.extend(self.decoder.parameters_mut());
        p
    }
}

/// Supervised angle encoder and decoder, trained separately and connected in series.
pub type AngleEncoderDecoder<T> = Composed<TrainedEncoder<T>, TrainedDecoder<T>>;

impl<T: Scalar> AngleEncoderDecoder<T> {
    /// Continues training the whole chain end to end with the cosine loss.
    pub fn fine_tune(self, data: &TrainingData<T>, cfg: &TrainConfig) -> Result<(Self, TrainHistory), NeuralError> {
        data.check()?;
        let Composed { encoder, decoder, id } = self;
        let mut stack = AngleStack {
            encoders: encoder.nets,
            decoder: decoder.net,
        };
        let inputs = data.flattened_inputs();
        let pairs = data.pairs();
        let history = fit(&mut stack, &inputs, |i, y| cosine_loss_and_grad(y, &pairs[i].h_dl), cfg)?;
        let provenance = combine(combine(encoder.provenance, decoder.provenance), data.provenance());
        Ok((
            Composed {
                encoder: TrainedEncoder {
                    nets: stack.encoders,
                    provenance,
                    history: encoder.history,
                },
                decoder: TrainedDecoder {
                    net: stack.decoder,
                    components: decoder.components,
                    provenance,
                    history: decoder.history,
                },
                id,
            },
            history,
        ))
    }

    pub(crate) fn from_stack(stack: AngleStack<T>, provenance: Provenance) -> Self {
        let components = stack.encoders.iter().map(|(c, _)| *c).collect::<Vec<_>>();
        let id = format!("encdec_{}", latent_label(&components));
        Composed {
            encoder: TrainedEncoder {
                nets: stack.encoders,
                provenance,
                history: Vec::new(),
            },
            decoder: TrainedDecoder {
                net: stack.decoder,
                components,
                provenance,
                history: TrainHistory::default(),
            },
            id,
        }
    }

    pub(crate) fn stack_parameters(&self) -> Vec<&[T]> {
        let mut p: Vec<&[T]> = self.encoder.nets.iter().flat_map(|(_, n)| n.parameters()).collect();
        p.extend(self.decoder.net.parameters());
        p
    }
}

fn latent_label(components: &[AngleComponent]) -> &'static str {
    if components.len() == 2 {
        "azimuth_elevation"
    } else {
        "azimuth"
    }
}

/// AoA labels of every training pair.
pub fn labels_for<T: Scalar>(data: &TrainingData<T>, pose: &ArrayPose<T>) -> Result<Vec<AoaLabel<T>>, NeuralError> {
    data.pairs().iter().map(|p| aoa_from_position(p.position, pose)).collect()
}

/// Supervised encoder and decoder on position-derived angles, then composed.
/// With `fine_tune` the composed chain is trained further end to end.
pub fn train_angle_pipeline<T: Scalar>(
    spec: &EncoderDecoderSpec,
    data: &TrainingData<T>,
    pose: &ArrayPose<T>,
    cfg: &TrainConfig,
    fine_tune: bool,
) -> Result<AngleEncoderDecoder<T>, NeuralError> {
    spec.validate()?;
    let components = spec
        .latent_mode
        .components()
        .ok_or_else(|| NeuralError::Spec("angle pipeline needs a supervised latent".into()))?;
    let labels = labels_for(data, pose)?;
    let encoder = train_supervised_encoder(&spec.encoder, data, &components, &labels, &cfg.reseeded(1))?;
    let decoder = train_supervised_decoder(&spec.decoder, data, &components, &labels, &cfg.reseeded(2))?;
    let composed = compose(encoder, decoder)?.with_id(format!("encdec_{}", latent_label(&components)));
    if fine_tune {
        Ok(composed.fine_tune(data, &cfg.reseeded(3))?.0)
    } else {
        Ok(composed)
    }
}
