//! Optimizers and the mini-batch training loop.

use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpCache, Mode};
use super::NeuralError;
use crate::complex::CMatrix;
use crate::dataset::SamplePair;
use crate::provenance::{Provenance, Side, SplitTag};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 128,
            epochs: 200,
            seed: 0,
            optimizer: Optimizer::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        let lr_ok = self.learning_rate.is_finite() && self.learning_rate > 0.0;
        if !lr_ok || self.batch_size == 0 || self.epochs == 0 {
            return Err(NeuralError::Config(
                "learning_rate, batch_size and epochs must be positive".into(),
            ));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            let beta_ok = |b: f64| (0.0..1.0).contains(&b);
            if !beta_ok(beta1) || !beta_ok(beta2) || !(eps > 0.0) {
                return Err(NeuralError::Config("adam needs betas in [0, 1) and eps > 0".into()));
            }
        }
        Ok(())
    }

    /// Same settings with a seed mixed from `salt`.
    pub fn reseeded(&self, salt: u64) -> Self {
        Self {
            seed: mix_seed(self.seed, salt),
            ..*self
        }
    }
}

/// Deterministic mixing of two seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut x = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15).rotate_left(17);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// A differentiable model with flat parameter arrays.
pub trait Network<T: Scalar> {
    type Cache;

    fn input_width(&self) -> usize;
    fn output_width(&self) -> usize;
    fn forward(&self, input: &[T], batch: usize, mode: Mode) -> Result<(Vec<T>, Self::Cache), NeuralError>;
    /// Accumulates into `grads` (aligned with [`Network::parameters`]) and returns the input gradient.
    fn backward(&self, cache: &Self::Cache, d_output: &[T], grads: &mut [Vec<T>]) -> Vec<T>;
    fn parameters(&self) -> Vec<&[T]>;
    fn parameters_mut(&mut self) -> Vec<&mut [T]>;

    fn zero_grads(&self) -> Vec<Vec<T>> {
        self.parameters().iter().map(|p| vec![T::zero(); p.len()]).collect()
    }
}

impl<T: Scalar> Network<T> for Mlp<T> {
    type Cache = MlpCache<T>;

    fn input_width(&self) -> usize {
        Mlp::input_width(self)
    }

    fn output_width(&self) -> usize {
        Mlp::output_width(self)
    }

    fn forward(&self, input: &[T], batch: usize, mode: Mode) -> Result<(Vec<T>, MlpCache<T>), NeuralError> {
        Mlp::forward(self, input, batch, mode)
    }

    fn backward(&self, cache: &MlpCache<T>, d_output: &[T], grads: &mut [Vec<T>]) -> Vec<T> {
        Mlp::backward(self, cache, d_output, grads)
    }

    fn parameters(&self) -> Vec<&[T]> {
        Mlp::parameters(self)
    }

    fn parameters_mut(&mut self) -> Vec<&mut [T]> {
        Mlp::parameters_mut(self)
    }
}

struct OptimizerState<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: i32,
}

impl<T: Scalar> OptimizerState<T> {
    fn new(grads: &[Vec<T>]) -> Self {
        Self {
            m: grads.iter().map(|g| vec![T::zero(); g.len()]).collect(),
            v: grads.iter().map(|g| vec![T::zero(); g.len()]).collect(),
            step: 0,
        }
    }

    fn apply(&mut self, cfg: &TrainConfig, params: Vec<&mut [T]>, grads: &[Vec<T>]) {
        let lr = T::lit(cfg.learning_rate);
        self.step += 1;
        match cfg.optimizer {
            Optimizer::Sgd => {
                for (p, g) in params.into_iter().zip(grads) {
                    for (pi, gi) in p.iter_mut().zip(g) {
                        *pi -= lr * *gi;
                    }
                }
            }
            Optimizer::Adam { beta1, beta2, eps } => {
                let (b1, b2, eps) = (T::lit(beta1), T::lit(beta2), T::lit(eps));
                let c1 = T::one() - b1.powi(self.step);
                let c2 = T::one() - b2.powi(self.step);
                for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
                    let (m, v) = (&mut self.m[k], &mut self.v[k]);
                    for i in 0..p.len() {
                        let gi = g[i];
                        m[i] = b1 * m[i] + (T::one() - b1) * gi;
                        v[i] = b2 * v[i] + (T::one() - b2) * gi * gi;
                        let mh = m[i] / c1;
                        let vh = v[i] / c2;
                        p[i] -= lr * mh / (vh.sqrt() + eps);
                    }
                }
            }
        }
    }
}

/// Per-epoch record of a training run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean loss over the samples of each epoch that contributed a gradient.
    pub epoch_loss: Vec<f64>,
    /// Batches skipped because a network output had zero norm.
    pub skipped_batches: usize,
}

/// Mini-batch training of `net` on `inputs` (each of `net.input_width()` values).
/// `loss(i, output)` returns the loss of sample `i` and its output gradient.
pub fn fit<T, N, L>(net: &mut N, inputs: &[Vec<T>], loss: L, cfg: &TrainConfig) -> Result<TrainHistory, NeuralError>
where
    T: Scalar,
    N: Network<T>,
    L: Fn(usize, &[T]) -> Result<(T, Vec<T>), NeuralError>,
{
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(NeuralError::EmptyTrainingSet);
    }
    let width = net.input_width();
    if let Some(bad) = inputs.iter().find(|x| x.len() != width) {
        return Err(NeuralError::Shape {
            expected: width,
            found: bad.len(),
        });
    }
    let out_w = net.output_width();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 0x5348_5546));
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut grads = net.zero_grads();
    let mut state = OptimizerState::new(&grads);
    let mut history = TrainHistory::default();
    let mut batch_input = Vec::with_capacity(cfg.batch_size * width);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = T::zero();
        let mut counted = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let dropout_seed: u64 = rng.random();
            batch_input.clear();
            for &i in chunk {
                batch_input.extend_from_slice(&inputs[i]);
            }
            let (out, cache) = net.forward(&batch_input, chunk.len(), Mode::Train { seed: dropout_seed })?;
            let mut d_out = vec![T::zero(); out.len()];
            let mut batch_loss = T::zero();
            let mut skip = false;
            for (k, &i) in chunk.iter().enumerate() {
                match loss(i, &out[k * out_w..(k + 1) * out_w]) {
                    Ok((l, g)) => {
                        batch_loss += l;
                        d_out[k * out_w..(k + 1) * out_w].copy_from_slice(&g);
                    }
                    Err(NeuralError::ZeroOutput) => {
                        skip = true;
                        break;
                    }
                    Err(NeuralError::NonFinite(_)) => {
                        history.epoch_loss.push(f64::NAN);
                        return Err(NeuralError::Diverged {
                            epoch,
                            loss_trace: history.epoch_loss,
                        });
                    }
                    Err(e) => return Err(e),
                }
            }
            if skip {
                history.skipped_batches += 1;
                continue;
            }
            if !batch_loss.is_finite() {
                history.epoch_loss.push(f64::NAN);
                return Err(NeuralError::Diverged {
                    epoch,
                    loss_trace: history.epoch_loss,
                });
            }
            loss_sum += batch_loss;
            counted += chunk.len();
            let scale = T::one() / T::from_usize(chunk.len()).unwrap();
            for v in d_out.iter_mut() {
                *v *= scale;
            }
            for g in grads.iter_mut() {
                g.iter_mut().for_each(|x| *x = T::zero());
            }
            net.backward(&cache, &d_out, &mut grads);
            if grads.iter().flatten().any(|g| !g.is_finite()) {
                history.epoch_loss.push(f64::NAN);
                return Err(NeuralError::Diverged {
                    epoch,
                    loss_trace: history.epoch_loss,
                });
            }
            state.apply(cfg, net.parameters_mut(), &grads);
        }
        let mean = if counted > 0 {
            (loss_sum / T::from_usize(counted).unwrap()).as_f64()
        } else {
            f64::NAN
        };
        history.epoch_loss.push(mean);
        if net.parameters().iter().any(|p| p.iter().any(|x| !x.is_finite())) {
            return Err(NeuralError::Diverged {
                epoch,
                loss_trace: history.epoch_loss,
            });
        }
    }
    Ok(history)
}

/// Antenna-major, subcarrier-minor, real part before imaginary part:
/// entry `(m, s)` lands at `2 (m S + s)` and `2 (m S + s) + 1`.
pub fn flatten_input<T: Scalar>(h_ul: &CMatrix<T>) -> Vec<T> {
    h_ul.as_slice().iter().flat_map(|c| [c.re, c.im]).collect()
}

/// Inverse of [`flatten_input`].
pub fn unflatten_input<T: Scalar>(x: &[T], rows: usize, cols: usize) -> Result<CMatrix<T>, NeuralError> {
    if x.len() != rows * cols * 2 {
        return Err(NeuralError::Shape {
            expected: rows * cols * 2,
            found: x.len(),
        });
    }
    let v = x.chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect();
    CMatrix::from_vec(rows, cols, v).ok_or(NeuralError::Shape {
        expected: rows * cols * 2,
        found: x.len(),
    })
}

/// Interleaved real output to complex vector.
pub fn output_to_complex<T: Scalar>(y: &[T]) -> Vec<Complex<T>> {
    y.chunks_exact(2).map(|p| Complex::new(p[0], p[1])).collect()
}

/// Training pairs together with what part of a dataset they are.
#[derive(Debug, Clone, Copy)]
pub struct TrainingData<'a, T> {
    pairs: &'a [SamplePair<T>],
    provenance: Provenance,
}

impl<'a, T: Scalar> TrainingData<'a, T> {
    /// A whole dataset. Estimators fitted on it cannot be scored seen/unseen.
    pub fn unsplit(pairs: &'a [SamplePair<T>]) -> Self {
        Self {
            pairs,
            provenance: Provenance::Unsplit,
        }
    }

    pub(crate) fn split_side(pairs: &'a [SamplePair<T>], split: SplitTag, side: Side) -> Self {
        Self {
            pairs,
            provenance: Provenance::Split { split, side },
        }
    }

    pub fn pairs(&self) -> &'a [SamplePair<T>] {
        self.pairs
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub(crate) fn check(&self) -> Result<(usize, usize), NeuralError> {
        let first = self.pairs.first().ok_or(NeuralError::EmptyTrainingSet)?;
        let shape = first.h_ul.shape();
        for p in self.pairs {
            if p.h_ul.shape() != shape || p.h_dl.len() != shape.0 {
                return Err(NeuralError::Shape {
                    expected: shape.0 * shape.1,
                    found: p.h_ul.rows() * p.h_ul.cols(),
                });
            }
        }
        Ok(shape)
    }

    pub(crate) fn flattened_inputs(&self) -> Vec<Vec<T>> {
        self.pairs.iter().map(|p| flatten_input(&p.h_ul)).collect()
    }
}
