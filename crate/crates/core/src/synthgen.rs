//! Geometric single-bounce multipath channel generator.
//!
//! A [`Scene`] fixes the receive array and the scatterers; together with a UE
//! position it determines the channel at every frequency. Entry `m` of the
//! channel vector is
//!
//! ```text
//! h_m(f) = sum_p g_p * exp(-j 2 pi f d_pm / c) / d_pm
//! ```
//!
//! where `d_pm` is the total length of path `p` (direct, or UE -> scatterer ->
//! antenna) and `g_p = 1` for the line-of-sight path.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complex::CMatrix;
use crate::dataset::{ArrayPose, CsiRecord, DatasetError, DatasetMeta};
use crate::scalar::Scalar;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Carrier of the default plan and array design frequency.
pub const DEFAULT_CARRIER_HZ: f64 = 1.272e9;
pub const DEFAULT_BANDWIDTH_HZ: f64 = 50e6;
/// Columns per synthetic record: uplink 0..8, downlink 28, the rest interpolated.
pub const SYNTH_COLUMNS: usize = 32;
pub const SYNTH_UL_COLUMNS: usize = 8;
pub const SYNTH_DL_COLUMN: usize = 28;

/// UE area of the desk-scale room, metres. The array sits at the `x = 0` wall facing `-x`.
pub const ROOM_X: (f64, f64) = (-6.25, -0.25);
pub const ROOM_Y: (f64, f64) = (-3.0, 3.0);
pub const UE_HEIGHT: f64 = 0.0;
pub const ARRAY_HEIGHT: f64 = 0.5;

const MIN_PATH_LENGTH: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scene: {0}")]
    Scene(String),
    #[error("invalid frequency plan: {0}")]
    Plan(String),
    #[error("zero-length path (path {path}, antenna {antenna}) at UE position {position:?}")]
    Coincident {
        path: usize,
        antenna: usize,
        position: [f64; 3],
    },
    #[error("no UE positions given")]
    EmptyPositions,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Point scatterer with a complex reflection gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Scatterer<T> {
    pub position: [T; 3],
    /// `[re, im]`.
    pub gain: [T; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Scene<T> {
    pub array_pose: ArrayPose<T>,
    /// Antenna positions relative to the array centre, metres.
    pub antenna_offsets: Vec<[T; 3]>,
    pub scatterers: Vec<Scatterer<T>>,
    pub include_los: bool,
    /// Seeds optional receiver noise.
    pub seed: u64,
}

/// Difficulty presets for the desk-scale room.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenePreset {
    LosOnly,
    /// Line of sight plus this many wall scatterers (1, 4 and 16 are the usual choices).
    Scatterers(usize),
}

fn sub<T: Scalar>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add<T: Scalar>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn length<T: Scalar>(v: [T; 3]) -> T {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross<T: Scalar>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn unit<T: Scalar>(v: [T; 3]) -> [T; 3] {
    let n = length(v);
    [v[0] / n, v[1] / n, v[2] / n]
}

/// Offsets of a `rows x cols` uniform planar array lying in the plane normal to `broadside`.
///
/// Columns run horizontally, rows vertically; antennas are ordered row-major.
pub fn planar_array_offsets<T: Scalar>(rows: usize, cols: usize, spacing: T, broadside: [T; 3]) -> Vec<[T; 3]> {
    let up = [T::zero(), T::zero(), T::one()];
    let horizontal = cross(up, broadside);
    let u = if length(horizontal) > T::lit(1e-6) {
        unit(horizontal)
    } else {
        [T::one(), T::zero(), T::zero()]
    };
    let v = unit(cross(broadside, u));
    let half = |n: usize| T::from_usize(n).unwrap() * T::lit(0.5) - T::lit(0.5);
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let du = (T::from_usize(c).unwrap() - half(cols)) * spacing;
            let dv = (half(rows) - T::from_usize(r).unwrap()) * spacing;
            out.push([u[0] * du + v[0] * dv, u[1] * du + v[1] * dv, u[2] * du + v[2] * dv]);
        }
    }
    out
}

impl<T: Scalar> Scene<T> {
    pub fn num_antennas(&self) -> usize {
        self.antenna_offsets.len()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        self.array_pose
            .validate()
            .map_err(|e| SynthError::Scene(e.to_string()))?;
        if self.antenna_offsets.is_empty() {
            return Err(SynthError::Scene("at least one antenna is required".into()));
        }
        if !self.include_los && self.scatterers.is_empty() {
            return Err(SynthError::Scene("no propagation path: LoS disabled and no scatterers".into()));
        }
        let finite = self.antenna_offsets.iter().flatten().all(|v| v.is_finite())
            && self
                .scatterers
                .iter()
                .all(|s| s.position.iter().chain(&s.gain).all(|v| v.is_finite()));
        if !finite {
            return Err(SynthError::Scene("non-finite geometry or gain".into()));
        }
        Ok(())
    }

    /// Absolute antenna positions.
    pub fn antenna_positions(&self) -> Vec<[T; 3]> {
        self.antenna_offsets
            .iter()
            .map(|o| add(self.array_pose.position, *o))
            .collect()
    }

    /// 8 x 4 half-wavelength planar array at the `x = 0` wall, facing into the room.
    pub fn desk(preset: ScenePreset, seed: u64) -> Self {
        let lambda = SPEED_OF_LIGHT / DEFAULT_CARRIER_HZ;
        let broadside = [-T::one(), T::zero(), T::zero()];
        let array_pose = ArrayPose {
            position: [T::zero(), T::zero(), T::lit(ARRAY_HEIGHT)],
            broadside,
        };
        let antenna_offsets = planar_array_offsets(4, 8, T::lit(lambda / 2.0), broadside);
        let n = match preset {
            ScenePreset::LosOnly => 0,
            ScenePreset::Scatterers(n) => n,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5ca7_7e25);
        let scatterers = (0..n)
            .map(|_| {
                // walls and ceiling only, so no UE in the room can sit on a scatterer
                let wall = rng.random_range(0..4u8);
                let x = rng.random_range(ROOM_X.0 - 0.5..ROOM_X.1);
                let y = rng.random_range(ROOM_Y.0 - 0.5..ROOM_Y.1 + 0.5);
                let z = rng.random_range(0.0..2.5);
                let position = match wall {
                    0 => [ROOM_X.0 - 0.75, y, z],
                    1 => [x, ROOM_Y.0 - 0.5, z],
                    2 => [x, ROOM_Y.1 + 0.5, z],
                    _ => [x, y, 2.8],
                };
                let mag = rng.random_range(0.3..0.9);
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                Scatterer {
                    position: position.map(T::lit),
                    gain: [T::lit(mag * phase.cos()), T::lit(mag * phase.sin())],
                }
            })
            .collect();
        Scene {
            array_pose,
            antenna_offsets,
            scatterers,
            include_los: true,
            seed,
        }
    }
}

/// Eight uplink frequencies and one downlink frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FrequencyPlan<T> {
    pub ul_freqs_hz: Vec<T>,
    pub dl_freq_hz: T,
}

impl<T: Scalar> FrequencyPlan<T> {
    /// Averaged-subcarrier centres of a 50 MHz band split into 32 groups around
    /// 1.272 GHz: uplink groups 0..8, downlink group 28 (about 38 MHz apart).
    pub fn desk_default() -> Self {
        let group = DEFAULT_BANDWIDTH_HZ / SYNTH_COLUMNS as f64;
        let centre = |k: usize| T::lit(DEFAULT_CARRIER_HZ - DEFAULT_BANDWIDTH_HZ / 2.0 + (k as f64 + 0.5) * group);
        Self {
            ul_freqs_hz: (0..SYNTH_UL_COLUMNS).map(centre).collect(),
            dl_freq_hz: centre(SYNTH_DL_COLUMN),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.ul_freqs_hz.len() != SYNTH_UL_COLUMNS {
            return Err(SynthError::Plan(format!(
                "expected {SYNTH_UL_COLUMNS} uplink frequencies, got {}",
                self.ul_freqs_hz.len()
            )));
        }
        if !self
            .ul_freqs_hz
            .iter()
            .chain(std::iter::once(&self.dl_freq_hz))
            .all(|f| *f > T::zero() && f.is_finite())
        {
            return Err(SynthError::Plan("frequencies must be positive and finite".into()));
        }
        if self.ul_freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SynthError::Plan("uplink frequencies must be strictly increasing".into()));
        }
        if self.ul_freqs_hz.contains(&self.dl_freq_hz) {
            return Err(SynthError::Plan("downlink frequency coincides with an uplink frequency".into()));
        }
        if self.column_frequencies().iter().any(|f| *f <= T::zero()) {
            return Err(SynthError::Plan("interpolated column frequencies must stay positive".into()));
        }
        Ok(())
    }

    /// Frequency of every one of the [`SYNTH_COLUMNS`] record columns. Columns past the
    /// uplink band are spaced linearly from the last uplink frequency so that column
    /// [`SYNTH_DL_COLUMN`] lands exactly on the downlink frequency.
    pub fn column_frequencies(&self) -> Vec<T> {
        let last_ul = self.ul_freqs_hz[SYNTH_UL_COLUMNS - 1];
        let steps = T::from_usize(SYNTH_DL_COLUMN - (SYNTH_UL_COLUMNS - 1)).unwrap();
        let step = (self.dl_freq_hz - last_ul) / steps;
        (0..SYNTH_COLUMNS)
            .map(|k| {
                if k < SYNTH_UL_COLUMNS {
                    self.ul_freqs_hz[k]
                } else if k == SYNTH_DL_COLUMN {
                    self.dl_freq_hz
                } else {
                    last_ul + step * T::from_usize(k - (SYNTH_UL_COLUMNS - 1)).unwrap()
                }
            })
            .collect()
    }
}

/// Channel vector seen by the array for a UE at `ue_pos` on frequency `freq_hz`.
pub fn synth_channel<T: Scalar>(scene: &Scene<T>, ue_pos: [T; 3], freq_hz: T) -> Result<Vec<Complex<T>>, SynthError> {
    let antennas = scene.antenna_positions();
    let k = T::TAU() * freq_hz / T::lit(SPEED_OF_LIGHT);
    let min_len = T::lit(MIN_PATH_LENGTH);
    let position = ue_pos.map(|v| v.as_f64());

    // leg lengths UE -> scatterer are shared by all antennas
    let legs: Vec<T> = scene
        .scatterers
        .iter()
        .map(|s| length(sub(s.position, ue_pos)))
        .collect();

    antennas
        .iter()
        .enumerate()
        .map(|(m, ant)| {
            let mut acc = Complex::new(T::zero(), T::zero());
            let mut term = |path: usize, gain: Complex<T>, d: T| -> Result<(), SynthError> {
                if !(d > min_len) {
                    return Err(SynthError::Coincident {
                        path,
                        antenna: m,
                        position,
                    });
                }
                acc = acc + gain * Complex::from_polar(T::one() / d, -(k * d));
                Ok(())
            };
            if scene.include_los {
                term(0, Complex::new(T::one(), T::zero()), length(sub(*ant, ue_pos)))?;
            }
            for (p, s) in scene.scatterers.iter().enumerate() {
                let bounce = length(sub(*ant, s.position));
                if !(legs[p] > min_len) || !(bounce > min_len) {
                    return Err(SynthError::Coincident {
                        path: p + 1,
                        antenna: m,
                        position,
                    });
                }
                term(p + 1, Complex::new(s.gain[0], s.gain[1]), legs[p] + bounce)?;
            }
            Ok(acc)
        })
        .collect()
}

/// One record per position, laid out as described on [`FrequencyPlan::column_frequencies`].
pub fn generate_dataset<T: Scalar>(
    scene: &Scene<T>,
    plan: &FrequencyPlan<T>,
    positions: &[[T; 3]],
) -> Result<Vec<CsiRecord<T>>, SynthError> {
    generate_dataset_with_noise(scene, plan, positions, None)
}

/// As [`generate_dataset`], optionally adding circularly-symmetric complex Gaussian
/// noise of standard deviation `noise_std` per coefficient, seeded by the scene.
pub fn generate_dataset_with_noise<T: Scalar>(
    scene: &Scene<T>,
    plan: &FrequencyPlan<T>,
    positions: &[[T; 3]],
    noise_std: Option<T>,
) -> Result<Vec<CsiRecord<T>>, SynthError> {
    scene.validate()?;
    plan.validate()?;
    if positions.is_empty() {
        return Err(SynthError::EmptyPositions);
    }
    let freqs = plan.column_frequencies();
    let m = scene.num_antennas();
    positions
        .par_iter()
        .enumerate()
        .map(|(i, pos)| {
            let mut csi = CMatrix::zeros(m, SYNTH_COLUMNS);
            for (col, f) in freqs.iter().enumerate() {
                for (row, v) in synth_channel(scene, *pos, *f)?.into_iter().enumerate() {
                    csi.set(row, col, v);
                }
            }
            if let Some(std) = noise_std {
                let mut rng = ChaCha8Rng::seed_from_u64(scene.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ i as u64);
                let s = std * T::FRAC_1_SQRT_2();
                for v in csi.as_mut_slice() {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    *v = *v + Complex::new(T::lit(re) * s, T::lit(im) * s);
                }
            }
            Ok(CsiRecord::validated(i, *pos, csi)?)
        })
        .collect()
}

/// Metadata describing a synthetic dataset from `scene` and `plan`.
pub fn synthetic_meta<T: Scalar>(scene: &Scene<T>, plan: &FrequencyPlan<T>) -> DatasetMeta<T> {
    let freqs = plan.column_frequencies();
    DatasetMeta {
        num_antennas: scene.num_antennas(),
        num_raw_subcarriers: SYNTH_COLUMNS,
        num_avg_subcarriers: SYNTH_COLUMNS,
        carrier_freq_hz: (freqs[0] + freqs[SYNTH_COLUMNS - 1]) * T::lit(0.5),
        array_pose: scene.array_pose,
    }
}

/// Regular grid over `x` and `y` (inclusive bounds) at height `z`, row-major in `y`.
pub fn grid_positions<T: Scalar>(x: (T, T), y: (T, T), z: T, spacing: T) -> Vec<[T; 3]> {
    let count = |lo: T, hi: T| ((hi - lo) / spacing + T::lit(1e-9)).floor().to_usize().unwrap_or(0) + 1;
    let (nx, ny) = (count(x.0, x.1), count(y.0, y.1));
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            out.push([
                x.0 + spacing * T::from_usize(i).unwrap(),
                y.0 + spacing * T::from_usize(j).unwrap(),
                z,
            ]);
        }
    }
    out
}

/// Uniformly random positions inside the rectangle at height `z`.
pub fn random_positions<T: Scalar>(n: usize, x: (T, T), y: (T, T), z: T, seed: u64) -> Vec<[T; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let px = rng.random_range(x.0.as_f64()..x.1.as_f64());
            let py = rng.random_range(y.0.as_f64()..y.1.as_f64());
            [T::lit(px), T::lit(py), z]
        })
        .collect()
}

/// Random UE positions covering the desk room floor.
pub fn desk_positions<T: Scalar>(n: usize, seed: u64) -> Vec<[T; 3]> {
    random_positions(
        n,
        (T::lit(ROOM_X.0), T::lit(ROOM_X.1)),
        (T::lit(ROOM_Y.0), T::lit(ROOM_Y.1)),
        T::lit(UE_HEIGHT),
        seed,
    )
}
