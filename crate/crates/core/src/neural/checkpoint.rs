//! Binary weight checkpoints.
//!
//! Layout (little endian): `b"CSNN"`, `u32` version, 32-byte SHA-256 of the
//! architecture JSON, `u32` array count, then per array a `u64` length and
//! that many `f64` values.

use std::io::{Read, Write};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::NeuralError;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 4] = b"CSNN";
pub const VERSION: u32 = 1;

pub fn spec_hash<S: Serialize>(spec: &S) -> Result<[u8; 32], NeuralError> {
    let json = serde_json::to_vec(spec).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    Ok(Sha256::digest(&json).into())
}

pub fn write_checkpoint<W: Write, S: Serialize, T: Scalar>(mut w: W, spec: &S, arrays: &[&[T]]) -> Result<(), NeuralError> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&spec_hash(spec)?)?;
    w.write_all(&(arrays.len() as u32).to_le_bytes())?;
    for a in arrays {
        w.write_all(&(a.len() as u64).to_le_bytes())?;
        for v in a.iter() {
            w.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], NeuralError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)
        .map_err(|_| NeuralError::Checkpoint("truncated checkpoint".into()))?;
    Ok(b)
}

/// Reads arrays written for `spec`, checking the hash and every array length.
pub fn read_checkpoint<R: Read, S: Serialize, T: Scalar>(
    mut r: R,
    spec: &S,
    expected_lens: &[usize],
) -> Result<Vec<Vec<T>>, NeuralError> {
    if &read_array::<4, _>(&mut r)? != MAGIC {
        return Err(NeuralError::Checkpoint("bad magic".into()));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != VERSION {
        return Err(NeuralError::Checkpoint(format!("unsupported version {version}")));
    }
    if read_array::<32, _>(&mut r)? != spec_hash(spec)? {
        return Err(NeuralError::SpecHashMismatch);
    }
    let count = u32::from_le_bytes(read_array(&mut r)?) as usize;
    if count != expected_lens.len() {
        return Err(NeuralError::Checkpoint(format!(
            "{count} arrays stored, {} expected",
            expected_lens.len()
        )));
    }
    let mut out = Vec::with_capacity(count);
    for (i, &len) in expected_lens.iter().enumerate() {
        let stored = u64::from_le_bytes(read_array(&mut r)?);
        if stored != len as u64 {
            return Err(NeuralError::Checkpoint(format!("array {i} has {stored} values, {len} expected")));
        }
        let mut a = Vec::with_capacity(len);
        for _ in 0..len {
            let v = f64::from_le_bytes(read_array(&mut r)?);
            if !v.is_finite() {
                return Err(NeuralError::Checkpoint(format!("non-finite weight in array {i}")));
            }
            a.push(T::lit(v));
        }
        out.push(a);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(NeuralError::Checkpoint("trailing bytes".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_hash_check() {
        let a = [1.0f64, -2.5, 3.25];
        let b = [0.0f64];
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &"spec-a", &[&a[..], &b[..]]).unwrap();
        let back: Vec<Vec<f64>> = read_checkpoint(&buf[..], &"spec-a", &[3, 1]).unwrap();
        assert_eq!(back, vec![a.to_vec(), b.to_vec()]);
        assert!(matches!(
            read_checkpoint::<_, _, f64>(&buf[..], &"spec-b", &[3, 1]),
            Err(NeuralError::SpecHashMismatch)
        ));
        assert!(read_checkpoint::<_, _, f64>(&buf[..], &"spec-a", &[2, 1]).is_err());
        assert!(read_checkpoint::<_, _, f64>(&buf[..buf.len() - 1], &"spec-a", &[3, 1]).is_err());
    }
}
