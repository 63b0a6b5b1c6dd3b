//! Normalized received power, its dataset average, and the analytic baselines.

mod baseline;
mod eigen;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::{dot_h, norm, normalized, CMatrix};
use crate::dataset::SamplePair;
use crate::provenance::Provenance;
use crate::scalar::{compensated_sum, to_db, Scalar};

pub use baseline::{
    principal_component_baseline, random_baseline_monte_carlo, random_precoder, random_precoder_from_rng,
    MonteCarloSummary, PrincipalComponent, RandomPrecoding,
};
pub use eigen::{autocorrelation, dominant_eigenvector, AutocorrMatrix, DominantEigen, EigenOptions};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("{0} has zero norm")]
    ZeroNorm(&'static str),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("length mismatch: {expected} vs {found}")]
    Length { expected: usize, found: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("invalid autocorrelation matrix: {0}")]
    InvalidAutocorr(String),
    #[error("power iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("invalid eigen-solver options: {0}")]
    EigenOptions(String),
    #[error("estimator failed: {0}")]
    Estimator(String),
}

/// Unit-norm precoding vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PrecodingVector<T>(Vec<Complex<T>>);

impl<T: Scalar> PrecodingVector<T> {
    /// Normalizes `v`. Fails for zero or non-finite norms.
    pub fn from_unnormalized(v: &[Complex<T>]) -> Result<Self, MetricsError> {
        if v.iter().any(|x| !(x.re.is_finite() && x.im.is_finite())) {
            return Err(MetricsError::NonFinite("precoding vector"));
        }
        normalized(v).map(Self).ok_or(MetricsError::ZeroNorm("precoding vector"))
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.0
    }
}

/// Squared cosine similarity `|h^H w|^2 / (|h|^2 |w|^2)`, in `[0, 1]`.
pub fn normalized_power<T: Scalar>(h_dl: &[Complex<T>], w: &[Complex<T>]) -> Result<T, MetricsError> {
    if h_dl.len() != w.len() {
        return Err(MetricsError::Length {
            expected: h_dl.len(),
            found: w.len(),
        });
    }
    let nh = norm(h_dl);
    let nw = norm(w);
    if !(nh > T::zero()) {
        return Err(MetricsError::ZeroNorm("downlink channel"));
    }
    if !(nw > T::zero()) {
        return Err(MetricsError::ZeroNorm("precoding vector"));
    }
    if !(nh.is_finite() && nw.is_finite()) {
        return Err(MetricsError::NonFinite("power inputs"));
    }
    // normalize first so the inner product cannot overflow
    let hn: Vec<Complex<T>> = h_dl.iter().map(|x| x / nh).collect();
    let wn: Vec<Complex<T>> = w.iter().map(|x| x / nw).collect();
    let p = dot_h(&hn, &wn).norm_sqr();
    Ok(p.max(T::zero()).min(T::one()))
}

/// Maps uplink CSI to a precoding vector. Baselines and neural models share this contract.
pub trait Estimator<T: Scalar>: Send + Sync {
    fn estimate(&self, h_ul: &CMatrix<T>) -> Result<PrecodingVector<T>, MetricsError>;

    /// Short identifier used in reports.
    fn id(&self) -> String;

    fn provenance(&self) -> Provenance {
        Provenance::DataIndependent
    }
}

impl<T: Scalar, E: Estimator<T> + ?Sized> Estimator<T> for Box<E> {
    fn estimate(&self, h_ul: &CMatrix<T>) -> Result<PrecodingVector<T>, MetricsError> {
        (**self).estimate(h_ul)
    }

    fn id(&self) -> String {
        (**self).id()
    }

    fn provenance(&self) -> Provenance {
        (**self).provenance()
    }
}

/// Per-pair normalized power. Pairs are evaluated in parallel; results keep input order.
pub fn pair_powers<T: Scalar, E: Estimator<T> + ?Sized>(
    pairs: &[SamplePair<T>],
    estimator: &E,
) -> Result<Vec<T>, MetricsError> {
    pairs
        .par_iter()
        .map(|p| {
            let w = estimator.estimate(&p.h_ul)?;
            normalized_power(&p.h_dl, w.as_slice())
        })
        .collect()
}

/// Linear mean of powers, summed in index order so the result does not depend on thread count.
pub fn mean_linear<T: Scalar>(powers: &[T]) -> Result<T, MetricsError> {
    if powers.is_empty() {
        return Err(MetricsError::Empty("power list"));
    }
    Ok(compensated_sum(powers.iter().copied()) / T::from_usize(powers.len()).unwrap())
}

/// Average normalized power over `pairs`, in dB. Averaging happens in the linear domain.
pub fn mean_power_db<T: Scalar, E: Estimator<T> + ?Sized>(
    pairs: &[SamplePair<T>],
    estimator: &E,
) -> Result<T, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::Empty("sample pairs"));
    }
    Ok(to_db(mean_linear(&pair_powers(pairs, estimator)?)?))
}

/// Estimator that always returns the same vector.
#[derive(Debug, Clone)]
pub struct ConstantEstimator<T> {
    pub w: PrecodingVector<T>,
    pub id: String,
    pub provenance: Provenance,
}

impl<T: Scalar> Estimator<T> for ConstantEstimator<T> {
    fn estimate(&self, _h_ul: &CMatrix<T>) -> Result<PrecodingVector<T>, MetricsError> {
        Ok(self.w.clone())
    }

    fn id(&self) -> String {
        self.id.clone()
    }

    fn provenance(&self) -> Provenance {
        self.provenance
    }
}
