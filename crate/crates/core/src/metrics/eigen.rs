//! Channel autocorrelation and its dominant eigenpair.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{MetricsError, PrecodingVector};
use crate::complex::{dot_h, norm, normalized, CMatrix};
use crate::scalar::Scalar;

/// Power steps between two squarings of the iteration operator.
const STEPS_PER_SQUARING: usize = 8;
const MAX_SQUARINGS: usize = 48;
const START_PERTURBATION: f64 = 1e-3;

fn invariant_tol<T: Scalar>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(1e3))
}

/// Normalized autocorrelation `R = mean(h h^H / |h|^2)`: Hermitian, PSD, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrMatrix<T> {
    r: CMatrix<T>,
}

impl<T: Scalar> AutocorrMatrix<T> {
    /// Wraps an existing matrix after checking squareness, Hermitian symmetry,
    /// unit trace and a nonnegative diagonal.
    pub fn from_matrix(r: CMatrix<T>) -> Result<Self, MetricsError> {
        let tol = invariant_tol::<T>();
        if r.rows() != r.cols() || r.rows() == 0 {
            return Err(MetricsError::InvalidAutocorr(format!("shape {:?} is not square", r.shape())));
        }
        if !r.is_finite() {
            return Err(MetricsError::NonFinite("autocorrelation matrix"));
        }
        let defect = r.hermitian_defect();
        if defect > tol {
            return Err(MetricsError::InvalidAutocorr(format!("Hermitian defect {defect}")));
        }
        let tr = r.trace();
        if (tr.re - T::one()).abs() > tol || tr.im.abs() > tol {
            return Err(MetricsError::InvalidAutocorr(format!("trace {tr} is not 1")));
        }
        if (0..r.rows()).any(|i| r.get(i, i).re < -tol) {
            return Err(MetricsError::InvalidAutocorr("negative diagonal entry".into()));
        }
        Ok(Self { r })
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.r
    }

    pub fn dim(&self) -> usize {
        self.r.rows()
    }

    /// `w^H R w` for a unit vector `w`.
    pub fn rayleigh(&self, w: &[Complex<T>]) -> T {
        dot_h(w, &self.r.mat_vec(w)).re
    }
}

/// Dataset estimate of `R`, one rank-one term per target.
pub fn autocorrelation<T: Scalar>(targets: &[Vec<Complex<T>>]) -> Result<AutocorrMatrix<T>, MetricsError> {
    let first = targets.first().ok_or(MetricsError::Empty("autocorrelation targets"))?;
    let m = first.len();
    let mut acc = CMatrix::zeros(m, m);
    for h in targets {
        if h.len() != m {
            return Err(MetricsError::Length {
                expected: m,
                found: h.len(),
            });
        }
        let u = normalized(h).ok_or(MetricsError::ZeroNorm("autocorrelation target"))?;
        for i in 0..m {
            for j in i..m {
                let v = acc.get(i, j) + u[i] * u[j].conj();
                acc.set(i, j, v);
            }
        }
    }
    let inv_n = T::one() / T::from_usize(targets.len()).unwrap();
    let r = CMatrix::from_fn(m, m, |i, j| {
        if i <= j {
            acc.get(i, j) * inv_n
        } else {
            acc.get(j, i).conj() * inv_n
        }
    });
    // the diagonal is real by construction
    let r = CMatrix::from_fn(m, m, |i, j| {
        if i == j {
            Complex::new(r.get(i, i).re, T::zero())
        } else {
            r.get(i, j)
        }
    });
    AutocorrMatrix::from_matrix(r)
}

/// Power-iteration settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions<T> {
    /// Stop once `|R w - lambda w| <= tol`; also the degeneracy threshold on the eigen-gap.
    pub tol: T,
    pub max_iter: usize,
    /// Seeds the start-vector perturbation.
    pub seed: u64,
}

impl<T: Scalar> Default for EigenOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-10).max(T::eigen_tol_floor()),
            max_iter: 10_000,
            seed: 0,
        }
    }
}

/// Leading eigenpair of an autocorrelation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DominantEigen<T> {
    pub vector: PrecodingVector<T>,
    /// `w^H R w`, in `[0, 1]`.
    pub value: T,
    /// Second-largest eigenvalue estimate.
    pub second: T,
    /// Set when `value - second < tol`: the maximizer is then not unique and
    /// `vector` is one arbitrary unit vector of the leading eigenspace.
    pub degenerate: bool,
    pub iterations: usize,
}

impl<T: Scalar> DominantEigen<T> {
    pub fn gap(&self) -> T {
        self.value - self.second
    }
}

fn start_vector<T: Scalar>(m: usize, seed: u64) -> Vec<Complex<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = T::one() / T::from_usize(m).unwrap().sqrt();
    let eps = T::lit(START_PERTURBATION);
    let v: Vec<Complex<T>> = (0..m)
        .map(|_| {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            Complex::new(base + eps * T::lit(a), eps * T::lit(b))
        })
        .collect();
    normalized(&v).expect("perturbed ones vector is nonzero")
}

struct Converged<T> {
    vector: Vec<Complex<T>>,
    value: T,
    iterations: usize,
}

/// Power iteration on `mat` (Hermitian PSD). Every few steps the iteration
/// operator is squared, so the convergence factor `(l2/l1)^k` improves doubly
/// exponentially; the Rayleigh quotient and residual are always taken against
/// `mat` itself. A step that annihilates the iterate restarts from a fresh
/// start vector rather than deflating.
fn power_iterate<T: Scalar>(
    mat: &CMatrix<T>,
    tol: T,
    max_iter: usize,
    seed: u64,
) -> Result<Converged<T>, MetricsError> {
    let m = mat.rows();
    let scale = mat.frobenius_norm();
    let mut v = start_vector::<T>(m, seed);
    if scale == T::zero() {
        return Ok(Converged {
            vector: v,
            value: T::zero(),
            iterations: 0,
        });
    }
    let mut op = mat.clone();
    op.scale(T::one() / scale);
    let mut squarings = 0;
    let mut restarts = 0u64;
    let mut residual = T::infinity();
    for iter in 1..=max_iter {
        match normalized(&op.mat_vec(&v)) {
            Some(u) => v = u,
            None => {
                restarts += 1;
                v = start_vector(m, seed.wrapping_add(restarts.wrapping_mul(0x9e37_79b9)));
                continue;
            }
        }
        let rv = mat.mat_vec(&v);
        let value = dot_h(&v, &rv).re;
        let res: Vec<Complex<T>> = rv.iter().zip(&v).map(|(a, b)| a - b * value).collect();
        residual = norm(&res);
        if residual <= tol {
            return Ok(Converged {
                vector: v,
                value,
                iterations: iter,
            });
        }
        if iter % STEPS_PER_SQUARING == 0 && squarings < MAX_SQUARINGS {
            let sq = op.mat_mul(&op);
            let n = sq.frobenius_norm();
            if n > T::zero() && n.is_finite() {
                op = sq;
                op.scale(T::one() / n);
                squarings += 1;
            }
        }
    }
    Err(MetricsError::NoConvergence {
        iterations: max_iter,
        residual: residual.as_f64(),
    })
}

/// Leading eigenvector and eigenvalue of `r` by power iteration.
///
/// The second eigenvalue is estimated by a second power iteration on
/// `R - lambda w w^H`; a gap below `tol` marks the result as degenerate.
pub fn dominant_eigenvector<T: Scalar>(
    r: &AutocorrMatrix<T>,
    opts: &EigenOptions<T>,
) -> Result<DominantEigen<T>, MetricsError> {
    if !(opts.tol > T::zero()) {
        return Err(MetricsError::EigenOptions("tol must be positive".into()));
    }
    if opts.max_iter == 0 {
        return Err(MetricsError::EigenOptions("max_iter must be positive".into()));
    }
    let mat = r.matrix();
    let top = power_iterate(mat, opts.tol, opts.max_iter, opts.seed)?;
    let w = &top.vector;
    let m = r.dim();

    let deflated = CMatrix::from_fn(m, m, |i, j| mat.get(i, j) - w[i] * w[j].conj() * top.value);
    let second = match power_iterate(&deflated, opts.tol, opts.max_iter, opts.seed ^ 0xdef1) {
        Ok(c) => c.value,
        // only the gap estimate is affected; report what the last iterate says
        Err(_) => T::zero(),
    }
    .max(T::zero());

    let value = top.value.max(T::zero()).min(T::one());
    Ok(DominantEigen {
        vector: PrecodingVector::from_unnormalized(w)?,
        value,
        second,
        degenerate: value - second < opts.tol,
        iterations: top.iterations,
    })
}
