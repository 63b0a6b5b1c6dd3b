//! Training losses over raw network outputs.

use num_complex::Complex;

use super::NeuralError;
use crate::scalar::Scalar;

/// `1 - P` between the interleaved output `[re0, im0, re1, im1, ...]` and `h_dl`,
/// with its exact gradient with respect to the output.
pub fn cosine_loss_and_grad<T: Scalar>(output: &[T], h_dl: &[Complex<T>]) -> Result<(T, Vec<T>), NeuralError> {
    if output.len() != 2 * h_dl.len() {
        return Err(NeuralError::Shape {
            expected: 2 * h_dl.len(),
            found: output.len(),
        });
    }
    let h_scale = h_dl.iter().map(|h| h.norm()).fold(T::zero(), T::max);
    if !(h_scale > T::zero()) || !h_scale.is_finite() {
        return Err(NeuralError::ZeroTarget);
    }
    if output.iter().any(|v| !v.is_finite()) {
        return Err(NeuralError::NonFinite("network output"));
    }
    let h: Vec<Complex<T>> = h_dl.iter().map(|x| x / h_scale).collect();
    let n_h: T = h.iter().map(|x| x.norm_sqr()).sum();

    let mut a = Complex::new(T::zero(), T::zero());
    let mut n_w = T::zero();
    for (m, hm) in h.iter().enumerate() {
        let w = Complex::new(output[2 * m], output[2 * m + 1]);
        a += hm.conj() * w;
        n_w += w.norm_sqr();
    }
    if !(n_w > T::zero()) {
        return Err(NeuralError::ZeroOutput);
    }
    if !n_w.is_finite() {
        return Err(NeuralError::NonFinite("network output"));
    }
    let a2 = a.norm_sqr();
    let denom = n_h * n_w;
    let p = (a2 / denom).min(T::one());
    let two = T::lit(2.0);
    let mut grad = Vec::with_capacity(output.len());
    for (m, hm) in h.iter().enumerate() {
        let t = a.conj() * hm.conj();
        let da_x = two * t.re;
        let da_y = -two * t.im;
        let dn_x = two * output[2 * m];
        let dn_y = two * output[2 * m + 1];
        grad.push(-(da_x / denom - a2 * dn_x / (denom * n_w)));
        grad.push(-(da_y / denom - a2 * dn_y / (denom * n_w)));
    }
    Ok((T::one() - p, grad))
}

/// Mean squared error and its gradient.
pub fn squared_error_and_grad<T: Scalar>(output: &[T], target: &[T]) -> Result<(T, Vec<T>), NeuralError> {
    if output.len() != target.len() || output.is_empty() {
        return Err(NeuralError::Shape {
            expected: target.len(),
            found: output.len(),
        });
    }
    let k = T::from_usize(output.len()).unwrap();
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(output.len());
    for (y, t) in output.iter().zip(target) {
        let d = *y - *t;
        loss += d * d;
        grad.push(T::lit(2.0) * d / k);
    }
    Ok((loss / k, grad))
}
