//! Position-tagged CSI datasets.
//!
//! A dataset is a list of [`CsiRecord`]s sharing one antenna count `M` and one
//! number of (averaged) subcarriers `S`, plus a [`DatasetMeta`] sidecar. Records
//! are turned into [`SamplePair`]s by picking a virtual uplink column range and a
//! single virtual downlink column.

mod format;

use std::ops::Range;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::complex::{norm, CMatrix};
use crate::scalar::Scalar;

pub use format::{
    load_dataset, load_dataset_with_sidecar, read_dataset, read_sidecar, save_dataset, sidecar_path,
    write_dataset, write_sidecar, MAGIC,
};

/// Averaged subcarrier columns forming the default virtual uplink.
pub const DEFAULT_UL_RANGE: Range<usize> = 0..8;
/// Averaged subcarrier column used as the default virtual downlink.
pub const DEFAULT_DL_INDEX: usize = 28;
/// Neighbouring raw subcarriers averaged into one coefficient.
pub const DEFAULT_AVERAGING_BATCH: usize = 32;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {found:?}, expected \"CSI1\"")]
    BadMagic { found: [u8; 4] },
    #[error("malformed header field `{field}`: {detail}")]
    Header { field: &'static str, detail: String },
    #[error("shape mismatch: header announces {expected} records but data ends inside record {record} (byte offset {offset})")]
    Truncated {
        expected: usize,
        record: usize,
        offset: usize,
    },
    #[error("{extra} trailing bytes after the last announced record")]
    TrailingBytes { extra: usize },
    #[error("record {record}: non-finite value at antenna {antenna}, subcarrier {subcarrier}")]
    NonFinite {
        record: usize,
        antenna: usize,
        subcarrier: usize,
    },
    #[error("record {record}: non-finite position")]
    NonFinitePosition { record: usize },
    #[error("record {record}: all channel coefficients are zero")]
    AllZero { record: usize },
    #[error("record {record}: shape {found:?} differs from dataset shape {expected:?}")]
    Shape {
        record: usize,
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("invalid dataset metadata: {0}")]
    Meta(String),
    #[error("sidecar: {0}")]
    Sidecar(#[from] serde_json::Error),
    #[error("averaging batch {batch} does not divide {subcarriers} subcarriers")]
    Averaging { subcarriers: usize, batch: usize },
    #[error("{what} index {index} out of bounds for {len} subcarriers")]
    IndexOutOfBounds {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("downlink index {dl_index} lies inside uplink range {ul_start}..{ul_end}")]
    Leakage {
        dl_index: usize,
        ul_start: usize,
        ul_end: usize,
    },
    #[error("empty uplink range")]
    EmptyUplink,
    #[error("downlink vector has zero norm")]
    ZeroDownlink,
}

/// Location and facing of the receive antenna array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ArrayPose<T> {
    /// Array centre in metres.
    pub position: [T; 3],
    /// Unit vector normal to the array face.
    pub broadside: [T; 3],
}

impl<T: Scalar> ArrayPose<T> {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if !self.position.iter().chain(&self.broadside).all(|v| v.is_finite()) {
            return Err(DatasetError::Meta("array pose has non-finite entries".into()));
        }
        let n = self.broadside.iter().map(|v| *v * *v).sum::<T>().sqrt();
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(16.0));
        if (n - T::one()).abs() > tol {
            return Err(DatasetError::Meta(format!("broadside vector norm {n} is not 1")));
        }
        Ok(())
    }
}

/// Dataset-wide metadata stored in the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct DatasetMeta<T> {
    pub num_antennas: usize,
    pub num_raw_subcarriers: usize,
    pub num_avg_subcarriers: usize,
    pub carrier_freq_hz: T,
    pub array_pose: ArrayPose<T>,
}

impl<T: Scalar> DatasetMeta<T> {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.num_antennas == 0 {
            return Err(DatasetError::Meta("num_antennas must be >= 1".into()));
        }
        if self.num_avg_subcarriers == 0 || self.num_raw_subcarriers == 0 {
            return Err(DatasetError::Meta("subcarrier counts must be >= 1".into()));
        }
        if self.num_raw_subcarriers % self.num_avg_subcarriers != 0 {
            return Err(DatasetError::Meta(format!(
                "{} averaged subcarriers do not evenly divide {} raw subcarriers",
                self.num_avg_subcarriers, self.num_raw_subcarriers
            )));
        }
        if !(self.carrier_freq_hz > T::zero() && self.carrier_freq_hz.is_finite()) {
            return Err(DatasetError::Meta("carrier frequency must be positive".into()));
        }
        self.array_pose.validate()
    }

    /// Raw subcarriers folded into each averaged coefficient.
    pub fn averaging_batch(&self) -> usize {
        self.num_raw_subcarriers / self.num_avg_subcarriers
    }
}

/// One position-tagged channel snapshot, `M x S` complex coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CsiRecord<T> {
    position: [T; 3],
    csi: CMatrix<T>,
}

impl<T: Scalar> CsiRecord<T> {
    /// Validates finiteness and that at least one coefficient is nonzero.
    pub fn new(position: [T; 3], csi: CMatrix<T>) -> Result<Self, DatasetError> {
        Self::validated(0, position, csi)
    }

    pub(crate) fn validated(record: usize, position: [T; 3], csi: CMatrix<T>) -> Result<Self, DatasetError> {
        if !position.iter().all(|v| v.is_finite()) {
            return Err(DatasetError::NonFinitePosition { record });
        }
        let cols = csi.cols();
        if let Some(i) = csi
            .as_slice()
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(DatasetError::NonFinite {
                record,
                antenna: i / cols,
                subcarrier: i % cols,
            });
        }
        if csi.as_slice().iter().all(|v| v.re == T::zero() && v.im == T::zero()) {
            return Err(DatasetError::AllZero { record });
        }
        Ok(Self { position, csi })
    }

    pub fn position(&self) -> [T; 3] {
        self.position
    }

    pub fn csi(&self) -> &CMatrix<T> {
        &self.csi
    }

    pub fn num_antennas(&self) -> usize {
        self.csi.rows()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.csi.cols()
    }

    /// Scales the record to unit Frobenius norm. Optional input conditioning;
    /// the power metric itself is scale invariant.
    pub fn normalize_frobenius(&mut self) {
        let n = self.csi.frobenius_norm();
        self.csi.scale(T::one() / n);
    }
}

/// Virtual uplink input and downlink target taken from one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SamplePair<T> {
    /// `M x N_ul` uplink coefficients.
    pub h_ul: CMatrix<T>,
    /// Length-`M` downlink coefficients.
    pub h_dl: Vec<Complex<T>>,
    pub position: [T; 3],
}

impl<T: Scalar> SamplePair<T> {
    pub fn num_antennas(&self) -> usize {
        self.h_dl.len()
    }
}

/// Averages consecutive batches of `batch` columns.
pub fn average_subcarriers<T: Scalar>(raw: &CMatrix<T>, batch: usize) -> Result<CMatrix<T>, DatasetError> {
    let (m, n) = raw.shape();
    if batch == 0 || n % batch != 0 {
        return Err(DatasetError::Averaging { subcarriers: n, batch });
    }
    let out_cols = n / batch;
    let inv = T::one() / T::from_usize(batch).expect("batch fits scalar");
    Ok(CMatrix::from_fn(m, out_cols, |r, k| {
        let row = &raw.row(r)[k * batch..(k + 1) * batch];
        let sum = row.iter().fold(Complex::new(T::zero(), T::zero()), |acc, v| acc + v);
        sum * inv
    }))
}

/// Splits a record into uplink columns `ul_range` and downlink column `dl_index`.
pub fn extract_ul_dl<T: Scalar>(
    record: &CsiRecord<T>,
    ul_range: Range<usize>,
    dl_index: usize,
) -> Result<SamplePair<T>, DatasetError> {
    let s = record.num_subcarriers();
    if ul_range.is_empty() {
        return Err(DatasetError::EmptyUplink);
    }
    if ul_range.end > s {
        return Err(DatasetError::IndexOutOfBounds {
            what: "uplink range end",
            index: ul_range.end,
            len: s,
        });
    }
    if dl_index >= s {
        return Err(DatasetError::IndexOutOfBounds {
            what: "downlink",
            index: dl_index,
            len: s,
        });
    }
    if ul_range.contains(&dl_index) {
        return Err(DatasetError::Leakage {
            dl_index,
            ul_start: ul_range.start,
            ul_end: ul_range.end,
        });
    }
    let h_dl = record.csi.column(dl_index);
    if norm(&h_dl) == T::zero() {
        return Err(DatasetError::ZeroDownlink);
    }
    Ok(SamplePair {
        h_ul: record.csi.select_columns(ul_range),
        h_dl,
        position: record.position,
    })
}

/// Applies [`extract_ul_dl`] to every record.
pub fn to_pairs<T: Scalar>(
    records: &[CsiRecord<T>],
    ul_range: Range<usize>,
    dl_index: usize,
) -> Result<Vec<SamplePair<T>>, DatasetError> {
    records
        .iter()
        .map(|r| extract_ul_dl(r, ul_range.clone(), dl_index))
        .collect()
}

/// Axis-aligned bounding box of record positions, `(min, max)`.
pub fn bounding_box<T: Scalar>(records: &[CsiRecord<T>]) -> Option<([T; 3], [T; 3])> {
    let first = records.first()?.position;
    Some(records.iter().fold((first, first), |(mut lo, mut hi), r| {
        for k in 0..3 {
            lo[k] = lo[k].min(r.position[k]);
            hi[k] = hi[k].max(r.position[k]);
        }
        (lo, hi)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn ramp(m: usize, s: usize) -> CMatrix<f64> {
        CMatrix::from_fn(m, s, |r, col| c((r * s + col) as f64 + 1.0, -(col as f64)))
    }

    #[test]
    fn averaging_paper_layout() {
        let raw = ramp(32, 1024);
        let avg = average_subcarriers(&raw, 32).unwrap();
        assert_eq!(avg.shape(), (32, 32));
        // mean of consecutive integers base..base+31 is base + 15.5
        assert_eq!(avg.get(1, 2).re, (1024 + 64) as f64 + 1.0 + 15.5);
    }

    #[test]
    fn averaging_identity_and_constant() {
        let raw = ramp(3, 6);
        assert_eq!(average_subcarriers(&raw, 1).unwrap(), raw);
        let ones = CMatrix::from_fn(2, 4, |_, _| c(1.0, 0.0));
        assert_eq!(
            average_subcarriers(&ones, 2).unwrap(),
            CMatrix::from_fn(2, 2, |_, _| c(1.0, 0.0))
        );
    }

    #[test]
    fn averaging_rejects_non_divisor() {
        assert!(matches!(
            average_subcarriers(&ramp(2, 10), 3),
            Err(DatasetError::Averaging { subcarriers: 10, batch: 3 })
        ));
        assert!(average_subcarriers(&ramp(2, 10), 0).is_err());
    }

    #[test]
    fn extract_default_shapes() {
        let rec = CsiRecord::new([1.0, 2.0, 0.0], ramp(32, 32)).unwrap();
        let pair = extract_ul_dl(&rec, DEFAULT_UL_RANGE, DEFAULT_DL_INDEX).unwrap();
        assert_eq!(pair.h_ul.shape(), (32, 8));
        assert_eq!(pair.h_dl.len(), 32);
        assert_eq!(pair.h_dl[3], rec.csi().get(3, 28));
        assert_eq!(pair.h_ul.get(5, 7), rec.csi().get(5, 7));
        assert_eq!(pair.position, [1.0, 2.0, 0.0]);
    }

    #[test]
    fn extract_rejects_leakage_and_bounds() {
        let rec = CsiRecord::new([0.0; 3], ramp(4, 32)).unwrap();
        assert!(matches!(extract_ul_dl(&rec, 0..8, 3), Err(DatasetError::Leakage { .. })));
        assert!(matches!(
            extract_ul_dl(&rec, 0..8, 32),
            Err(DatasetError::IndexOutOfBounds { .. })
        ));
        assert!(matches!(
            extract_ul_dl(&rec, 30..33, 2),
            Err(DatasetError::IndexOutOfBounds { .. })
        ));
    }

    #[test]
    fn extracted_pair_does_not_alias_record() {
        let rec = CsiRecord::new([0.0; 3], ramp(4, 32)).unwrap();
        let before = rec.clone();
        let mut pair = extract_ul_dl(&rec, 0..8, 28).unwrap();
        pair.h_dl[0] = c(99.0, 99.0);
        pair.h_ul.set(0, 0, c(-1.0, 0.0));
        assert_eq!(rec, before);
    }

    #[test]
    fn record_validation() {
        let mut bad = ramp(2, 2);
        bad.set(1, 0, c(f64::NAN, 0.0));
        assert!(matches!(
            CsiRecord::new([0.0; 3], bad),
            Err(DatasetError::NonFinite { antenna: 1, subcarrier: 0, .. })
        ));
        assert!(matches!(
            CsiRecord::new([0.0; 3], CMatrix::<f64>::zeros(2, 2)),
            Err(DatasetError::AllZero { .. })
        ));
    }

    #[test]
    fn frobenius_normalization() {
        let mut rec = CsiRecord::new([0.0; 3], ramp(3, 5)).unwrap();
        rec.normalize_frobenius();
        assert!((rec.csi().frobenius_norm() - 1.0).abs() < 1e-14);
    }

    fn small_matrix() -> impl Strategy<Value = (CMatrix<f64>, CMatrix<f64>)> {
        (1usize..4, 1usize..9).prop_flat_map(|(m, n)| {
            let entries = || proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), m * n);
            (entries(), entries()).prop_map(move |(a, b)| {
                let to = |v: Vec<(f64, f64)>| {
                    CMatrix::from_vec(m, n, v.into_iter().map(|(r, i)| c(r, i)).collect()).unwrap()
                };
                (to(a), to(b))
            })
        })
    }

    proptest! {
        #[test]
        fn averaging_is_linear((x, y) in small_matrix(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            for batch in 1..=x.cols() {
                if x.cols() % batch != 0 { continue; }
                let mix = CMatrix::from_fn(x.rows(), x.cols(), |r, col| x.get(r, col) * a + y.get(r, col) * b);
                let lhs = average_subcarriers(&mix, batch).unwrap();
                let ax = average_subcarriers(&x, batch).unwrap();
                let ay = average_subcarriers(&y, batch).unwrap();
                for r in 0..lhs.rows() {
                    for col in 0..lhs.cols() {
                        let rhs = ax.get(r, col) * a + ay.get(r, col) * b;
                        prop_assert!((lhs.get(r, col) - rhs).norm() < 1e-10);
                    }
                }
            }
        }
    }
}
