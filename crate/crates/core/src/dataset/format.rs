//! Binary dataset container.
//!
//! Little-endian layout:
//!
//! ```text
//! "CSI1"          4 bytes magic
//! M               u32
//! S               u32
//! record_count    u32
//! per record:
//!     position    3 x f64 (x, y, z) metres
//!     csi         M*S x (f32 re, f32 im), antenna-major
//! ```
//!
//! Complex values are stored as `f32`; writing an `f64` record narrows it.
//! A JSON sidecar next to the file (same stem, `.json` extension) carries
//! the [`DatasetMeta`].

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex;

use super::{CsiRecord, DatasetError, DatasetMeta};
use crate::complex::CMatrix;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"CSI1";
const HEADER_LEN: usize = 16;

fn record_len(m: usize, s: usize) -> usize {
    3 * 8 + m * s * 8
}

/// Serializes records. All records must share one shape.
pub fn write_dataset<T: Scalar, W: Write>(mut w: W, records: &[CsiRecord<T>]) -> Result<(), DatasetError> {
    let (m, s) = records.first().map(|r| r.csi().shape()).unwrap_or((0, 0));
    let to_u32 = |field: &'static str, v: usize| {
        u32::try_from(v).map_err(|_| DatasetError::Header {
            field,
            detail: format!("{v} exceeds u32"),
        })
    };
    let mut buf = Vec::with_capacity(HEADER_LEN + records.len() * record_len(m, s));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&to_u32("M", m)?.to_le_bytes());
    buf.extend_from_slice(&to_u32("S", s)?.to_le_bytes());
    buf.extend_from_slice(&to_u32("record_count", records.len())?.to_le_bytes());
    for (i, rec) in records.iter().enumerate() {
        if rec.csi().shape() != (m, s) {
            return Err(DatasetError::Shape {
                record: i,
                expected: (m, s),
                found: rec.csi().shape(),
            });
        }
        for p in rec.position() {
            buf.extend_from_slice(&p.as_f64().to_le_bytes());
        }
        for v in rec.csi().as_slice() {
            let re = v.re.to_f32().expect("finite value narrows to f32");
            let im = v.im.to_f32().expect("finite value narrows to f32");
            buf.extend_from_slice(&re.to_le_bytes());
            buf.extend_from_slice(&im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

/// Parses a dataset, validating every record. `expected` pins `(M, S)` when given.
pub fn read_dataset<T: Scalar, R: Read>(
    mut r: R,
    expected: Option<(usize, usize)>,
) -> Result<Vec<CsiRecord<T>>, DatasetError> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < HEADER_LEN {
        return Err(DatasetError::Header {
            field: "header",
            detail: format!("file has {} bytes, header needs {HEADER_LEN}", bytes.len()),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if &magic != MAGIC {
        return Err(DatasetError::BadMagic { found: magic });
    }
    let m = u32_at(&bytes, 4) as usize;
    let s = u32_at(&bytes, 8) as usize;
    let count = u32_at(&bytes, 12) as usize;
    if m == 0 {
        return Err(DatasetError::Header {
            field: "M",
            detail: "antenna count is zero".into(),
        });
    }
    if s == 0 {
        return Err(DatasetError::Header {
            field: "S",
            detail: "subcarrier count is zero".into(),
        });
    }
    if let Some((em, es)) = expected {
        if m != em {
            return Err(DatasetError::Header {
                field: "M",
                detail: format!("file has {m} antennas, metadata says {em}"),
            });
        }
        if s != es {
            return Err(DatasetError::Header {
                field: "S",
                detail: format!("file has {s} subcarriers, metadata says {es}"),
            });
        }
    }

    let rec_len = record_len(m, s);
    let body = bytes.len() - HEADER_LEN;
    let need = count.checked_mul(rec_len).ok_or_else(|| DatasetError::Header {
        field: "record_count",
        detail: format!("{count} records of {rec_len} bytes overflow"),
    })?;
    if body < need {
        let record = body / rec_len;
        return Err(DatasetError::Truncated {
            expected: count,
            record,
            offset: HEADER_LEN + record * rec_len,
        });
    }
    if body > need {
        return Err(DatasetError::TrailingBytes { extra: body - need });
    }

    let mut records = Vec::with_capacity(count);
    for i in 0..count {
        let base = HEADER_LEN + i * rec_len;
        let f64_at = |k: usize| f64::from_le_bytes(bytes[base + 8 * k..base + 8 * k + 8].try_into().expect("8 bytes"));
        let position = [0, 1, 2].map(|k| T::from_f64(f64_at(k)).unwrap_or_else(T::nan));
        let vals = base + 24;
        let data = (0..m * s)
            .map(|j| {
                let at = vals + 8 * j;
                let re = f32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
                let im = f32::from_le_bytes(bytes[at + 4..at + 8].try_into().expect("4 bytes"));
                Complex::new(
                    T::from_f32(re).unwrap_or_else(T::nan),
                    T::from_f32(im).unwrap_or_else(T::nan),
                )
            })
            .collect();
        let csi = CMatrix::from_vec(m, s, data).expect("sized above");
        records.push(CsiRecord::validated(i, position, csi)?);
    }
    Ok(records)
}

/// Loads a dataset file whose header must agree with `meta`.
pub fn load_dataset<T: Scalar>(path: &Path, meta: &DatasetMeta<T>) -> Result<Vec<CsiRecord<T>>, DatasetError> {
    meta.validate()?;
    let file = fs::File::open(path)?;
    read_dataset(
        std::io::BufReader::new(file),
        Some((meta.num_antennas, meta.num_avg_subcarriers)),
    )
}

/// `<stem>.json` next to the dataset file.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn read_sidecar<T: Scalar>(path: &Path) -> Result<DatasetMeta<T>, DatasetError> {
    let meta: DatasetMeta<T> = serde_json::from_slice(&fs::read(path)?)?;
    meta.validate()?;
    Ok(meta)
}

pub fn write_sidecar<T: Scalar>(path: &Path, meta: &DatasetMeta<T>) -> Result<(), DatasetError> {
    meta.validate()?;
    let mut text = serde_json::to_string_pretty(meta)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Loads the dataset and its sidecar.
pub fn load_dataset_with_sidecar<T: Scalar>(
    path: &Path,
) -> Result<(DatasetMeta<T>, Vec<CsiRecord<T>>), DatasetError> {
    let meta = read_sidecar(&sidecar_path(path))?;
    let records = load_dataset(path, &meta)?;
    Ok((meta, records))
}

/// Writes the dataset file and its sidecar.
pub fn save_dataset<T: Scalar>(
    path: &Path,
    meta: &DatasetMeta<T>,
    records: &[CsiRecord<T>],
) -> Result<(), DatasetError> {
    let mut buf = Vec::new();
    write_dataset(&mut buf, records)?;
    fs::write(path, buf)?;
    write_sidecar(&sidecar_path(path), meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(pos: [f64; 3], m: usize, s: usize, seed: f32) -> CsiRecord<f64> {
        let csi = CMatrix::from_fn(m, s, |r, c| {
            Complex::new((seed + r as f32 * 0.5 - c as f32) as f64, (seed * 0.25 + c as f32) as f64)
        });
        CsiRecord::new(pos, csi).unwrap()
    }

    fn encode(records: &[CsiRecord<f64>]) -> Vec<u8> {
        let mut buf = Vec::new();
        write_dataset(&mut buf, records).unwrap();
        buf
    }

    #[test]
    fn two_records_load_back() {
        let recs = vec![rec([0.0, 1.0, 2.0], 4, 3, 1.0), rec([-1.5, 0.25, 0.0], 4, 3, 2.0)];
        let bytes = encode(&recs);
        assert_eq!(&bytes[..4], b"CSI1");
        assert_eq!(bytes.len(), 16 + 2 * (24 + 4 * 3 * 8));
        let back: Vec<CsiRecord<f64>> = read_dataset(&bytes[..], Some((4, 3))).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn header_claims_more_records_than_present() {
        let recs = vec![rec([0.0; 3], 2, 2, 1.0), rec([1.0; 3], 2, 2, 3.0)];
        let mut bytes = encode(&recs);
        bytes[12..16].copy_from_slice(&3u32.to_le_bytes());
        let err = read_dataset::<f64, _>(&bytes[..], None).unwrap_err();
        assert!(matches!(err, DatasetError::Truncated { expected: 3, record: 2, .. }), "{err}");
    }

    #[test]
    fn truncated_mid_record_is_located() {
        let recs = vec![rec([0.0; 3], 2, 2, 1.0), rec([1.0; 3], 2, 2, 3.0)];
        let bytes = encode(&recs);
        let cut = &bytes[..bytes.len() - 5];
        assert!(matches!(
            read_dataset::<f64, _>(cut, None),
            Err(DatasetError::Truncated { record: 1, .. })
        ));
    }

    #[test]
    fn malformed_headers() {
        assert!(matches!(
            read_dataset::<f64, _>(&b"CSI1\x01\x00"[..], None),
            Err(DatasetError::Header { .. })
        ));
        let mut bytes = encode(&[rec([0.0; 3], 2, 2, 1.0)]);
        bytes[0] = b'X';
        assert!(matches!(read_dataset::<f64, _>(&bytes[..], None), Err(DatasetError::BadMagic { .. })));
        let bytes = encode(&[rec([0.0; 3], 2, 2, 1.0)]);
        assert!(matches!(
            read_dataset::<f64, _>(&bytes[..], Some((3, 2))),
            Err(DatasetError::Header { field: "M", .. })
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(matches!(
            read_dataset::<f64, _>(&extra[..], None),
            Err(DatasetError::TrailingBytes { extra: 1 })
        ));
    }

    #[test]
    fn non_finite_value_is_located() {
        let mut bytes = encode(&[rec([0.0; 3], 2, 3, 1.0), rec([0.0; 3], 2, 3, 1.0)]);
        // record 1, antenna 1, subcarrier 2, imaginary part
        let at = 16 + (24 + 2 * 3 * 8) + 24 + (3 + 2) * 8 + 4;
        bytes[at..at + 4].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(
            read_dataset::<f64, _>(&bytes[..], None),
            Err(DatasetError::NonFinite { record: 1, antenna: 1, subcarrier: 2 })
        ));
    }

    #[test]
    fn f32_records_load_from_same_file() {
        let recs = vec![rec([0.5, 1.0, 2.0], 3, 2, 1.0)];
        let back: Vec<CsiRecord<f32>> = read_dataset(&encode(&recs)[..], None).unwrap();
        assert_eq!(back[0].csi().get(2, 1).re, recs[0].csi().get(2, 1).re as f32);
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("set.csi");
        let meta = DatasetMeta {
            num_antennas: 2,
            num_raw_subcarriers: 64,
            num_avg_subcarriers: 2,
            carrier_freq_hz: 1.272e9,
            array_pose: super::super::ArrayPose {
                position: [0.0, 0.0, 1.0],
                broadside: [-1.0, 0.0, 0.0],
            },
        };
        let recs = vec![rec([0.0; 3], 2, 2, 1.0)];
        save_dataset(&path, &meta, &recs).unwrap();
        let (m2, r2) = load_dataset_with_sidecar::<f64>(&path).unwrap();
        assert_eq!(m2, meta);
        assert_eq!(r2, recs);
        assert_eq!(m2.averaging_batch(), 32);
    }

    fn arb_records() -> impl Strategy<Value = Vec<CsiRecord<f64>>> {
        (1usize..5, 1usize..5, 1usize..6).prop_flat_map(|(m, s, n)| {
            let one = (
                proptest::array::uniform3(-1e3f64..1e3),
                proptest::collection::vec((-1e4f32..1e4, -1e4f32..1e4), m * s),
            );
            proptest::collection::vec(one, n).prop_map(move |raw| {
                raw.into_iter()
                    .map(|(pos, vals)| {
                        let mut data: Vec<Complex<f64>> =
                            vals.into_iter().map(|(a, b)| Complex::new(a as f64, b as f64)).collect();
                        data[0] = Complex::new(1.0, 0.0);
                        CsiRecord::new(pos, CMatrix::from_vec(m, s, data).unwrap()).unwrap()
                    })
                    .collect()
            })
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_identical(records in arb_records()) {
            let bytes = encode(&records);
            let back: Vec<CsiRecord<f64>> = read_dataset(&bytes[..], None).unwrap();
            prop_assert_eq!(back.len(), records.len());
            for (a, b) in back.iter().zip(&records) {
                for k in 0..3 {
                    prop_assert_eq!(a.position()[k].to_bits(), b.position()[k].to_bits());
                }
                for (x, y) in a.csi().as_slice().iter().zip(b.csi().as_slice()) {
                    prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
                    prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
                }
            }
            prop_assert_eq!(encode(&back), bytes);
        }
    }
}
