#![allow(dead_code)]

use csimap::neural::{Mode, Network};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale < 1e-10 {
        diff
    } else {
        diff / scale
    }
}

/// Worst relative error between backprop and central differences of
/// `objective(output)` over every parameter array and the input.
pub fn fd_check<N, F>(net: &mut N, input: &[f64], batch: usize, mode: Mode, objective: F) -> f64
where
    N: Network<f64>,
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let h = 1e-5;
    let (out, cache) = net.forward(input, batch, mode).unwrap();
    let (_, d_out) = objective(&out);
    let mut grads = net.zero_grads();
    let d_in = net.backward(&cache, &d_out, &mut grads);
    let eval = |net: &N, x: &[f64]| objective(&net.forward(x, batch, mode).unwrap().0).0;

    let mut worst: f64 = 0.0;
    let n_arrays = grads.len();
    for k in 0..n_arrays {
        let len = grads[k].len();
        let mut numeric = vec![0.0; len];
        for i in 0..len {
            let orig = net.parameters()[k][i];
            net.parameters_mut()[k][i] = orig + h;
            let fp = eval(net, input);
            net.parameters_mut()[k][i] = orig - h;
            let fm = eval(net, input);
            net.parameters_mut()[k][i] = orig;
            numeric[i] = (fp - fm) / (2.0 * h);
        }
        worst = worst.max(rel_err(&grads[k], &numeric));
    }
    let mut numeric = vec![0.0; input.len()];
    let mut x = input.to_vec();
    for i in 0..input.len() {
        let orig = x[i];
        x[i] = orig + h;
        let fp = eval(net, &x);
        x[i] = orig - h;
        let fm = eval(net, &x);
        x[i] = orig;
        numeric[i] = (fp - fm) / (2.0 * h);
    }
    worst.max(rel_err(&d_in, &numeric))
}

/// `sum(c * y)` with fixed random weights `c`.
pub fn linear_objective(c: Vec<f64>) -> impl Fn(&[f64]) -> (f64, Vec<f64>) {
    move |y: &[f64]| (y.iter().zip(&c).map(|(a, b)| a * b).sum(), c.clone())
}

pub fn random_vec(r: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-scale..scale)).collect()
}

pub fn random_cvec(r: &mut ChaCha8Rng, n: usize) -> Vec<Complex<f64>> {
    (0..n)
        .map(|_| Complex::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
        .collect()
}

/// Eigen-decomposition of a Hermitian matrix through the real symmetric
/// embedding `[[A, -B], [B, A]]` and cyclic Jacobi rotations. Returns the largest
/// eigenvalue, its eigenvector and the second largest eigenvalue.
pub fn jacobi_dominant(r: &[Vec<Complex<f64>>]) -> (f64, Vec<Complex<f64>>, f64) {
    let n = r.len();
    let d = 2 * n;
    let mut a = vec![vec![0.0; d]; d];
    for i in 0..n {
        for j in 0..n {
            a[i][j] = r[i][j].re;
            a[i + n][j + n] = r[i][j].re;
            a[i][j + n] = -r[i][j].im;
            a[i + n][j] = r[i][j].im;
        }
    }
    let mut v = vec![vec![0.0; d]; d];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..d)
            .flat_map(|i| (0..d).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..d {
            for q in p + 1..d {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let best = (0..d).max_by(|i, j| a[*i][*i].partial_cmp(&a[*j][*j]).unwrap()).unwrap();
    let w: Vec<Complex<f64>> = (0..n).map(|i| Complex::new(v[i][best], v[i + n][best])).collect();
    let nw: f64 = w.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    // every eigenvalue of the embedding appears twice
    let mut diag: Vec<f64> = (0..d).map(|i| a[i][i]).collect();
    diag.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let second = diag.get(2).copied().unwrap_or(0.0);
    (a[best][best], w.iter().map(|x| x / nw).collect(), second)
}

/// Pair whose single uplink column equals the downlink vector.
pub fn pair_at(position: [f64; 3], h: Vec<Complex<f64>>) -> csimap::SamplePair64 {
    csimap::SamplePair64 {
        h_ul: csimap::CMatrix::from_vec(h.len(), 1, h.clone()).unwrap(),
        h_dl: h,
        position,
    }
}

/// `n` pairs with i.i.d. Gaussian channels at uniform positions in `[0, extent)^2`.
pub fn random_pairs(seed: u64, n: usize, m: usize, extent: f64) -> Vec<csimap::SamplePair64> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            let pos = [r.random_range(0.0..extent), r.random_range(0.0..extent), 0.0];
            pair_at(pos, random_cvec(&mut r, m))
        })
        .collect()
}
