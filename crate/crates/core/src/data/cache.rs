//! Binary cache of an encoded dataset.
//!
//! Layout: a 16-byte header
//!
//! | bytes  | field                          |
//! |--------|--------------------------------|
//! | 0..4   | magic `QCDS`                   |
//! | 4      | format version                 |
//! | 5      | qubit count `n`                |
//! | 6, 7   | class pair digits              |
//! | 8..16  | shuffle seed, little-endian u64 |
//!
//! followed by one record per sample of `2 + 2^n` little-endian f64 values:
//! label, source index, then the amplitudes.

use byteorder::{ByteOrder, LittleEndian};
use std::path::Path;

use super::BinaryDataset;
use crate::circuit::EncodedSample;
use crate::error::{QcnnError, Result};

pub const CACHE_MAGIC: &[u8; 4] = b"QCDS";
pub const CACHE_VERSION: u8 = 1;
const HEADER: usize = 16;

pub fn write_cache(path: &Path, ds: &BinaryDataset) -> Result<()> {
    let n = ds.samples.first().map_or(0, EncodedSample::num_qubits);
    let dim = 1usize << n;
    if ds.samples.iter().any(|s| s.amplitudes.len() != dim) {
        return Err(QcnnError::CacheFormat("samples have mixed dimensions".into()));
    }
    let mut buf = vec![0u8; HEADER + ds.len() * (2 + dim) * 8];
    buf[..4].copy_from_slice(CACHE_MAGIC);
    buf[4] = CACHE_VERSION;
    buf[5] = n as u8;
    buf[6] = ds.class_pair.0;
    buf[7] = ds.class_pair.1;
    LittleEndian::write_u64(&mut buf[8..16], ds.split_seed);
    let mut values = Vec::with_capacity(ds.len() * (2 + dim));
    for (s, &id) in ds.samples.iter().zip(&ds.ids) {
        values.push(f64::from(s.label));
        values.push(id as f64);
        values.extend_from_slice(&s.amplitudes);
    }
    LittleEndian::write_f64_into(&values, &mut buf[HEADER..]);
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_cache(path: &Path) -> Result<BinaryDataset> {
    let buf = std::fs::read(path)?;
    if buf.len() < HEADER || &buf[..4] != CACHE_MAGIC {
        return Err(QcnnError::CacheFormat(format!("{}: not a dataset cache", path.display())));
    }
    if buf[4] != CACHE_VERSION {
        return Err(QcnnError::CacheFormat(format!(
            "{}: version {} unsupported (expected {CACHE_VERSION})",
            path.display(),
            buf[4]
        )));
    }
    let n = buf[5] as usize;
    if n > crate::sim::MAX_QUBITS {
        return Err(QcnnError::CacheFormat(format!("qubit count {n} out of range")));
    }
    let record = (2 + (1usize << n)) * 8;
    let body = buf.len() - HEADER;
    if !body.is_multiple_of(record) {
        return Err(QcnnError::CacheFormat(format!(
            "{}: body of {body} bytes is not a whole number of {record}-byte records",
            path.display()
        )));
    }
    let mut values = vec![0.0; body / 8];
    LittleEndian::read_f64_into(&buf[HEADER..], &mut values);
    let mut samples = Vec::with_capacity(body / record);
    let mut ids = Vec::with_capacity(body / record);
    for rec in values.chunks_exact(record / 8) {
        let label = rec[0];
        if label != 0.0 && label != 1.0 {
            return Err(QcnnError::CacheFormat(format!("label {label} is not binary")));
        }
        samples.push(EncodedSample {
            amplitudes: rec[2..].to_vec(),
            label: label as u8,
        });
        ids.push(rec[1] as usize);
    }
    Ok(BinaryDataset {
        samples,
        ids,
        class_pair: (buf[6], buf[7]),
        split_seed: LittleEndian::read_u64(&buf[8..16]),
    })
}
