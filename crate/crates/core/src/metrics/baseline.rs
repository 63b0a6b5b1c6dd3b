//! Random-precoding and principal-component baselines.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::eigen::{autocorrelation, dominant_eigenvector, EigenOptions};
use super::{normalized_power, Estimator, MetricsError, PrecodingVector};
use crate::complex::CMatrix;
use crate::provenance::Provenance;
use crate::scalar::{compensated_sum, Scalar};

/// Draws `v ~ CN(0, I_m)` from `rng` and returns `v / |v|`.
pub fn random_precoder_from_rng<T: Scalar, R: Rng + ?Sized>(rng: &mut R, m: usize) -> Result<PrecodingVector<T>, MetricsError> {
    if m == 0 {
        return Err(MetricsError::Empty("antenna count"));
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    loop {
        let v: Vec<Complex<T>> = (0..m)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex::new(T::lit(re * s), T::lit(im * s))
            })
            .collect();
        // an all-zero draw has probability zero but would be a valid sample to reject
        if let Ok(w) = PrecodingVector::from_unnormalized(&v) {
            return Ok(w);
        }
    }
}

/// Random unit precoder, deterministic per seed and independent of any channel.
pub fn random_precoder<T: Scalar>(seed: u64, m: usize) -> Result<PrecodingVector<T>, MetricsError> {
    random_precoder_from_rng(&mut ChaCha8Rng::seed_from_u64(seed), m)
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Random precoding as an [`Estimator`]. Each call draws a fresh vector from a
/// seed mixed with the bit pattern of the input, so evaluation stays a pure
/// function of `(seed, input)` while the draws behave as independent of the channel.
#[derive(Debug, Clone, Copy)]
pub struct RandomPrecoding {
    pub seed: u64,
}

impl<T: Scalar> Estimator<T> for RandomPrecoding {
    fn estimate(&self, h_ul: &CMatrix<T>) -> Result<PrecodingVector<T>, MetricsError> {
        let mut h = splitmix(self.seed);
        for v in h_ul.as_slice() {
            h = splitmix(h ^ v.re.as_f64().to_bits());
            h = splitmix(h ^ v.im.as_f64().to_bits());
        }
        random_precoder(h, h_ul.rows())
    }

    fn id(&self) -> String {
        "random".into()
    }
}

/// Monte-Carlo mean of `P` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloSummary<T> {
    pub mean: T,
    pub std_err: T,
    pub draws: usize,
}

/// Averages `P(h, w)` over `draws` random precoders, cycling through `targets`.
pub fn random_baseline_monte_carlo<T: Scalar>(
    targets: &[Vec<Complex<T>>],
    draws: usize,
    seed: u64,
) -> Result<MonteCarloSummary<T>, MetricsError> {
    if targets.is_empty() {
        return Err(MetricsError::Empty("targets"));
    }
    if draws < 2 {
        return Err(MetricsError::Empty("need at least two draws"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut powers = Vec::with_capacity(draws);
    for i in 0..draws {
        let h = &targets[i % targets.len()];
        let w = random_precoder_from_rng::<T, _>(&mut rng, h.len())?;
        powers.push(normalized_power(h, w.as_slice())?);
    }
    let n = T::from_usize(draws).unwrap();
    let mean = compensated_sum(powers.iter().copied()) / n;
    let var = compensated_sum(powers.iter().map(|p| (*p - mean) * (*p - mean))) / (n - T::one());
    Ok(MonteCarloSummary {
        mean,
        std_err: (var / n).sqrt(),
        draws,
    })
}

/// Constant precoder equal to the dominant eigenvector of the training targets' autocorrelation.
#[derive(Debug, Clone)]
pub struct PrincipalComponent<T> {
    pub w: PrecodingVector<T>,
    /// Largest eigenvalue, i.e. the mean power this vector achieves on its own training targets.
    pub eigenvalue: T,
    /// Leading eigenvalue not separated from the next one by more than the solver tolerance.
    pub degenerate: bool,
    pub provenance: Provenance,
}

impl<T: Scalar> PrincipalComponent<T> {
    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }
}

impl<T: Scalar> Estimator<T> for PrincipalComponent<T> {
    fn estimate(&self, _h_ul: &CMatrix<T>) -> Result<PrecodingVector<T>, MetricsError> {
        Ok(self.w.clone())
    }

    fn id(&self) -> String {
        "principal_component".into()
    }

    fn provenance(&self) -> Provenance {
        self.provenance
    }
}

/// Builds the principal-component baseline from downlink training targets.
pub fn principal_component_baseline<T: Scalar>(
    train_targets: &[Vec<Complex<T>>],
) -> Result<PrincipalComponent<T>, MetricsError> {
    let r = autocorrelation(train_targets)?;
    let e = dominant_eigenvector(&r, &EigenOptions::default())?;
    Ok(PrincipalComponent {
        w: e.vector,
        eigenvalue: e.value,
        degenerate: e.degenerate,
        provenance: Provenance::Unsplit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::norm;

    #[test]
    fn single_antenna_random_precoder_is_a_phase() {
        for seed in 0..20 {
            let w = random_precoder::<f64>(seed, 1).unwrap();
            assert!((w.as_slice()[0].norm() - 1.0).abs() < 1e-15);
            let p = normalized_power(&[Complex::new(0.3, -2.0)], w.as_slice()).unwrap();
            assert!((p - 1.0).abs() < 1e-15);
        }
        assert!(random_precoder::<f64>(0, 0).is_err());
    }

    #[test]
    fn random_precoder_is_seeded_and_unit() {
        let a = random_precoder::<f64>(7, 32).unwrap();
        let b = random_precoder::<f64>(7, 32).unwrap();
        let c = random_precoder::<f64>(8, 32).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((norm(a.as_slice()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_two_antennas() {
        let h = vec![vec![Complex::new(1.0, 0.5), Complex::new(-0.2, 2.0)]];
        let s = random_baseline_monte_carlo::<f64>(&h, 100_000, 3).unwrap();
        assert!((s.mean - 0.5).abs() < 0.01, "{}", s.mean);
    }

    #[test]
    fn monte_carlo_thirty_two_antennas_fixed_channel() {
        let h = vec![(0..32).map(|i| Complex::new((i as f64).sin(), 0.3)).collect::<Vec<_>>()];
        let s = random_baseline_monte_carlo::<f64>(&h, 100_000, 11).unwrap();
        let db = crate::scalar::to_db(s.mean);
        let target = crate::scalar::to_db(1.0 / 32.0);
        assert!((db - target).abs() < 0.2, "{db} vs {target}");
    }

    #[test]
    fn principal_component_of_identical_targets() {
        let h: Vec<Complex<f64>> = vec![Complex::new(1.0, 2.0), Complex::new(-0.5, 0.1), Complex::new(0.0, 1.0)];
        let targets: Vec<Vec<Complex<f64>>> = (0..5)
            .map(|k| h.iter().map(|x| x * Complex::from_polar(1.0 + k as f64, 0.7 * k as f64)).collect())
            .collect();
        let pc = principal_component_baseline(&targets).unwrap();
        assert!((pc.eigenvalue - 1.0).abs() < 1e-12);
        assert!((normalized_power(&h, pc.w.as_slice()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn random_estimator_is_pure() {
        let h = CMatrix::from_fn(4, 2, |r, c| Complex::new(r as f64, c as f64 + 1.0));
        let est = RandomPrecoding { seed: 5 };
        let a: PrecodingVector<f64> = est.estimate(&h).unwrap();
        let b: PrecodingVector<f64> = est.estimate(&h).unwrap();
        assert_eq!(a, b);
        let mut h2 = h.clone();
        h2.set(0, 0, Complex::new(0.5, 0.0));
        assert_ne!(a, est.estimate(&h2).unwrap());
    }
}
