//! Dense multilayer perceptron with reverse-mode gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NeuralError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative at pre-activation `z`.
    #[inline]
    pub fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                T::one() - t * t
            }
            Activation::Linear => T::one(),
        }
    }
}

/// Inverted dropout applied after dense layer `after_layer` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub after_layer: usize,
    pub rate: f64,
}

/// Layer widths are the output widths of the dense layers, in order; the last
/// one is the network output and is always linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_width: usize,
    pub layer_widths: Vec<usize>,
    /// One per hidden (non-final) dense layer.
    pub activations: Vec<Activation>,
    #[serde(default)]
    pub dropout: Option<DropoutSpec>,
}

impl MlpSpec {
    /// Same activation on every hidden layer.
    pub fn uniform(input_width: usize, layer_widths: Vec<usize>, activation: Activation) -> Self {
        let hidden = layer_widths.len().saturating_sub(1);
        Self {
            input_width,
            layer_widths,
            activations: vec![activation; hidden],
            dropout: None,
        }
    }

    /// Four dense layers `[in, in/2, in/4, 2M]`; `[512, 256, 128, 64]` for a 32 x 8 uplink.
    pub fn dnn(num_antennas: usize, ul_columns: usize) -> Self {
        let input = num_antennas * ul_columns * 2;
        Self::uniform(
            input,
            vec![input, (input / 2).max(1), (input / 4).max(1), 2 * num_antennas],
            Activation::Relu,
        )
    }

    /// [`MlpSpec::dnn`] with dropout of rate `rate` between dense layers 2 and 3.
    pub fn dnn_dropout(num_antennas: usize, ul_columns: usize, rate: f64) -> Self {
        Self {
            dropout: Some(DropoutSpec { after_layer: 2, rate }),
            ..Self::dnn(num_antennas, ul_columns)
        }
    }

    pub fn output_width(&self) -> usize {
        self.layer_widths.last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.input_width == 0 || self.layer_widths.is_empty() || self.layer_widths.contains(&0) {
            return Err(NeuralError::Spec("widths must be positive and at least one layer is required".into()));
        }
        if self.activations.len() != self.layer_widths.len() - 1 {
            return Err(NeuralError::Spec(format!(
                "{} activations given for {} hidden layers",
                self.activations.len(),
                self.layer_widths.len() - 1
            )));
        }
        if let Some(d) = self.dropout {
            if !(0.0..1.0).contains(&d.rate) {
                return Err(NeuralError::Spec(format!("dropout rate {} outside [0, 1)", d.rate)));
            }
            if d.after_layer == 0 || d.after_layer >= self.layer_widths.len() {
                return Err(NeuralError::Spec(format!(
                    "dropout after layer {} must sit between two dense layers",
                    d.after_layer
                )));
            }
        }
        Ok(())
    }
}

/// Forward-pass mode. Dropout masks are drawn only in training mode, from `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { seed: u64 },
}

/// Fully connected layer, `out = W x + b` with `W` stored row-major `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub in_width: usize,
    pub out_width: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = T::zero();
    for (x, y) in ra.iter().zip(rb) {
        tail += *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(in_width: usize, out_width: usize) -> Self {
        Self {
            in_width,
            out_width,
            weights: vec![T::zero(); in_width * out_width],
            bias: vec![T::zero(); out_width],
        }
    }

    /// Uniform fan-in initialization, `U(-sqrt(k / fan_in), sqrt(k / fan_in))`.
    fn init(in_width: usize, out_width: usize, gain: f64, rng: &mut ChaCha8Rng) -> Self {
        let bound = (gain / in_width as f64).sqrt();
        let weights = (0..in_width * out_width)
            .map(|_| T::lit(rng.random_range(-bound..bound)))
            .collect();
        Self {
            in_width,
            out_width,
            weights,
            bias: vec![T::zero(); out_width],
        }
    }

    /// `out[b] = W x[b] + bias` for a row-major batch.
    pub fn forward(&self, x: &[T], batch: usize) -> Vec<T> {
        let mut out = vec![T::zero(); batch * self.out_width];
        for b in 0..batch {
            let xb = &x[b * self.in_width..(b + 1) * self.in_width];
            let ob = &mut out[b * self.out_width..(b + 1) * self.out_width];
            for (o, v) in ob.iter_mut().enumerate() {
                *v = dot(&self.weights[o * self.in_width..(o + 1) * self.in_width], xb) + self.bias[o];
            }
        }
        out
    }

    /// Accumulates weight and bias gradients into `gw`, `gb`; returns the input gradient.
    pub fn backward(&self, x: &[T], dz: &[T], batch: usize, gw: &mut [T], gb: &mut [T], need_dx: bool) -> Vec<T> {
        let mut dx = if need_dx {
            vec![T::zero(); batch * self.in_width]
        } else {
            Vec::new()
        };
        for b in 0..batch {
            let xb = &x[b * self.in_width..(b + 1) * self.in_width];
            let db = &dz[b * self.out_width..(b + 1) * self.out_width];
            for (o, &g) in db.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                gb[o] += g;
                axpy(g, xb, &mut gw[o * self.in_width..(o + 1) * self.in_width]);
                if need_dx {
                    axpy(
                        g,
                        &self.weights[o * self.in_width..(o + 1) * self.in_width],
                        &mut dx[b * self.in_width..(b + 1) * self.in_width],
                    );
                }
            }
        }
        dx
    }
}

/// Per-pass intermediate values needed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    batch: usize,
    /// Input of each dense layer.
    inputs: Vec<Vec<T>>,
    /// Pre-activation output of each dense layer.
    pre: Vec<Vec<T>>,
    /// Dropout scale factors (0 or `1 / (1 - rate)`), when dropout ran.
    mask: Option<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    spec: MlpSpec,
    layers: Vec<Dense<T>>,
}

impl<T: Scalar> Mlp<T> {
    /// Seeded initialization. ReLU layers use gain 6 (He), others gain 3.
    pub fn new(spec: &MlpSpec, seed: u64) -> Result<Self, NeuralError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_w = spec.input_width;
        let mut layers = Vec::with_capacity(spec.layer_widths.len());
        for (i, &out_w) in spec.layer_widths.iter().enumerate() {
            let gain = match spec.activations.get(i) {
                Some(Activation::Relu) => 6.0,
                _ => 3.0,
            };
            layers.push(Dense::init(in_w, out_w, gain, &mut rng));
            in_w = out_w;
        }
        Ok(Self {
            spec: spec.clone(),
            layers,
        })
    }

    /// Builds a network from explicit layers, checking them against `spec`.
    pub fn from_layers(spec: &MlpSpec, layers: Vec<Dense<T>>) -> Result<Self, NeuralError> {
        spec.validate()?;
        let mut in_w = spec.input_width;
        if layers.len() != spec.layer_widths.len() {
            return Err(NeuralError::Spec("layer count differs from spec".into()));
        }
        for (l, &w) in layers.iter().zip(&spec.layer_widths) {
            if l.in_width != in_w || l.out_width != w || l.weights.len() != w * in_w || l.bias.len() != w {
                return Err(NeuralError::Spec("layer shape differs from spec".into()));
            }
            in_w = w;
        }
        Ok(Self {
            spec: spec.clone(),
            layers,
        })
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.spec.input_width
    }

    pub fn output_width(&self) -> usize {
        self.spec.output_width()
    }

    fn activation(&self, layer: usize) -> Activation {
        self.spec.activations.get(layer).copied().unwrap_or(Activation::Linear)
    }

    /// Batched forward pass over row-major `input` (`batch x input_width`).
    pub fn forward(&self, input: &[T], batch: usize, mode: Mode) -> Result<(Vec<T>, MlpCache<T>), NeuralError> {
        if input.len() != batch * self.input_width() {
            return Err(NeuralError::Shape {
                expected: batch * self.input_width(),
                found: input.len(),
            });
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut mask = None;
        let mut x = input.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.forward(&x, batch);
            let act = self.activation(i);
            let mut a: Vec<T> = z.iter().map(|v| act.apply(*v)).collect();
            if let (Some(d), Mode::Train { seed }) = (self.spec.dropout, mode) {
                if d.after_layer == i + 1 {
                    let m = dropout_mask::<T>(a.len(), d.rate, seed);
                    for (v, s) in a.iter_mut().zip(&m) {
                        *v *= *s;
                    }
                    mask = Some(m);
                }
            }
            inputs.push(std::mem::replace(&mut x, a));
            pre.push(z);
        }
        Ok((
            x,
            MlpCache {
                batch,
                inputs,
                pre,
                mask,
            },
        ))
    }

    /// Single-sample inference.
    pub fn predict(&self, input: &[T]) -> Result<Vec<T>, NeuralError> {
        Ok(self.forward(input, 1, Mode::Eval)?.0)
    }

    /// Accumulates parameter gradients (ordered as [`Mlp::parameters`]) and returns
    /// the gradient with respect to the input batch.
    pub fn backward(&self, cache: &MlpCache<T>, d_output: &[T], grads: &mut [Vec<T>]) -> Vec<T> {
        self.backward_inner(cache, d_output, grads, true)
    }

    pub(crate) fn backward_inner(&self, cache: &MlpCache<T>, d_output: &[T], grads: &mut [Vec<T>], need_dx: bool) -> Vec<T> {
        let mut d = d_output.to_vec();
        for i in (0..self.layers.len()).rev() {
            if let (Some(dsp), Some(m)) = (self.spec.dropout, cache.mask.as_ref()) {
                if dsp.after_layer == i + 1 {
                    for (v, s) in d.iter_mut().zip(m) {
                        *v *= *s;
                    }
                }
            }
            let act = self.activation(i);
            if act != Activation::Linear {
                for (v, z) in d.iter_mut().zip(&cache.pre[i]) {
                    *v *= act.derivative(*z);
                }
            }
            let (gw, rest) = grads[2 * i..].split_at_mut(1);
            d = self.layers[i].backward(
                &cache.inputs[i],
                &d,
                cache.batch,
                &mut gw[0],
                &mut rest[0],
                i > 0 || need_dx,
            );
        }
        d
    }

    /// `[W0, b0, W1, b1, ...]`.
    pub fn parameters(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn zero_grads(&self) -> Vec<Vec<T>> {
        self.parameters().iter().map(|p| vec![T::zero(); p.len()]).collect()
    }
}

/// Inverted-dropout scale factors: `0` with probability `rate`, else `1 / (1 - rate)`.
pub fn dropout_mask<T: Scalar>(len: usize, rate: f64, seed: u64) -> Vec<T> {
    if rate == 0.0 {
        return vec![T::one(); len];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = T::lit(1.0 / (1.0 - rate));
    (0..len)
        .map(|_| if rng.random::<f64>() < rate { T::zero() } else { keep })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_output() {
        let spec = MlpSpec::uniform(4, vec![3, 2], Activation::Tanh);
        let net = Mlp::from_layers(&spec, vec![Dense::zeros(4, 3), Dense::zeros(3, 2)]).unwrap();
        assert_eq!(net.predict(&[1.0f64, -2.0, 3.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_linear_layer() {
        let spec = MlpSpec::uniform(3, vec![3], Activation::Linear);
        let mut d = Dense::<f64>::zeros(3, 3);
        for i in 0..3 {
            d.weights[i * 3 + i] = 1.0;
        }
        let net = Mlp::from_layers(&spec, vec![d]).unwrap();
        let x = [0.25, -7.0, 3.5];
        assert_eq!(net.predict(&x).unwrap(), x.to_vec());
    }

    #[test]
    fn zero_rate_dropout_is_identity_in_both_modes() {
        let mut spec = MlpSpec::uniform(5, vec![6, 6, 2], Activation::Relu);
        spec.dropout = Some(DropoutSpec { after_layer: 2, rate: 0.0 });
        let net = Mlp::<f64>::new(&spec, 3).unwrap();
        let mut plain = spec.clone();
        plain.dropout = None;
        let reference = Mlp::from_layers(&plain, net.layers().to_vec()).unwrap();
        let x = [0.1, 0.2, -0.3, 0.4, 1.0];
        let eval = net.forward(&x, 1, Mode::Eval).unwrap().0;
        let train = net.forward(&x, 1, Mode::Train { seed: 9 }).unwrap().0;
        let base = reference.predict(&x).unwrap();
        assert_eq!(eval, base);
        assert_eq!(train, base);
    }

    #[test]
    fn forward_is_deterministic_per_seed() {
        let spec = MlpSpec::dnn_dropout(2, 2, 0.5);
        let net = Mlp::<f64>::new(&spec, 1).unwrap();
        let x: Vec<f64> = (0..8).map(|i| i as f64 * 0.1).collect();
        let a = net.forward(&x, 1, Mode::Train { seed: 4 }).unwrap().0;
        let b = net.forward(&x, 1, Mode::Train { seed: 4 }).unwrap().0;
        assert_eq!(a, b);
        assert_eq!(net.predict(&x).unwrap(), net.predict(&x).unwrap());
    }

    #[test]
    fn default_specs_match_reference_shapes() {
        let dnn = MlpSpec::dnn(32, 8);
        assert_eq!(dnn.input_width, 512);
        assert_eq!(dnn.layer_widths, vec![512, 256, 128, 64]);
        let dd = MlpSpec::dnn_dropout(32, 8, 0.25);
        assert_eq!(dd.dropout, Some(DropoutSpec { after_layer: 2, rate: 0.25 }));
        dd.validate().unwrap();
    }

    #[test]
    fn spec_validation() {
        let mut s = MlpSpec::uniform(3, vec![4, 2], Activation::Relu);
        s.dropout = Some(DropoutSpec { after_layer: 2, rate: 0.3 });
        assert!(s.validate().is_err());
        s.dropout = Some(DropoutSpec { after_layer: 1, rate: 1.0 });
        assert!(s.validate().is_err());
        s.dropout = None;
        s.activations.clear();
        assert!(s.validate().is_err());
        let net = Mlp::<f64>::new(&MlpSpec::uniform(3, vec![2], Activation::Linear), 0).unwrap();
        assert!(matches!(net.predict(&[1.0, 2.0]), Err(NeuralError::Shape { .. })));
    }

    #[test]
    fn dropout_expectation_matches_eval_output() {
        // mean of a unit's train-mode output over masks equals its eval-mode output
        let rate = 0.25;
        let draws = 100_000usize;
        let value = 1.7f64;
        let masks = dropout_mask::<f64>(draws, rate, 12);
        let samples: Vec<f64> = masks.iter().map(|m| m * value).collect();
        let mean = samples.iter().sum::<f64>() / draws as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        assert!((mean - value).abs() < 3.0 * se, "{mean} vs {value} (se {se})");
    }
}
