//! Binary checkpoint layout, all integers little endian:
//!
//! ```text
//! magic "GDIFFCKP" | u32 version | u64 header_len | header JSON
//! u64 tensor_count | per tensor: u32 name_len | name | u64 rows | u64 cols | rows*cols f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};

use super::{NetworkConfig, NetworkWeights};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GDIFFCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

const MAX_HEADER: u64 = 1 << 24;
const MAX_NAME: u32 = 1 << 12;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: NetworkConfig,
    /// free-form run metadata (config hash, seed, step, ...)
    pub meta: serde_json::Value,
    pub weights: NetworkWeights,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: NetworkConfig,
    meta: serde_json::Value,
}

pub fn write_checkpoint<W: Write>(mut out: W, ckpt: &Checkpoint) -> Result<()> {
    ckpt.weights.check_against(&ckpt.config)?;
    let header = serde_json::to_vec(&Header {
        config: ckpt.config.clone(),
        meta: ckpt.meta.clone(),
    })?;
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(header.len() as u64).to_le_bytes())?;
    out.write_all(&header)?;
    out.write_all(&(ckpt.weights.len() as u64).to_le_bytes())?;
    for (name, m) in ckpt.weights.names().iter().zip(ckpt.weights.tensors()) {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(m.rows as u64).to_le_bytes())?;
        out.write_all(&(m.cols as u64).to_le_bytes())?;
        for v in &m.data {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(buf)
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(read_array(r)?))
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<Checkpoint> {
    let magic: [u8; 8] = read_array(&mut r)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(
            "not a checkpoint file (bad magic)".into(),
        ));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != CHECKPOINT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let header_len = read_u64(&mut r)?;
    if header_len > MAX_HEADER {
        return Err(Error::Checkpoint(format!(
            "header length {header_len} is implausible"
        )));
    }
    let mut header = vec![0u8; header_len as usize];
    r.read_exact(&mut header)
        .map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    let header: Header = serde_json::from_slice(&header)?;
    header.config.validate()?;
    let shapes = header.config.parameter_shapes();
    let count = read_u64(&mut r)?;
    if count != shapes.len() as u64 {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, file has {count}",
            shapes.len()
        )));
    }
    let mut entries = Vec::with_capacity(shapes.len());
    for (want, wr, wc) in shapes {
        let len = u32::from_le_bytes(read_array(&mut r)?);
        if len > MAX_NAME {
            return Err(Error::Checkpoint(format!(
                "tensor name length {len} is implausible"
            )));
        }
        let mut name = vec![0u8; len as usize];
        r.read_exact(&mut name)
            .map_err(|e| Error::Checkpoint(format!("truncated tensor name: {e}")))?;
        let name = String::from_utf8(name)
            .map_err(|_| Error::Checkpoint("tensor name is not UTF-8".into()))?;
        let (rows, cols) = (read_u64(&mut r)?, read_u64(&mut r)?);
        if name != want || (rows, cols) != (wr as u64, wc as u64) {
            return Err(Error::Checkpoint(format!(
                "tensor {name} ({rows}x{cols}) does not match expected {want} ({wr}x{wc})"
            )));
        }
        let mut data = Vec::with_capacity(wr * wc);
        for _ in 0..wr * wc {
            data.push(f64::from_le_bytes(read_array(&mut r)?));
        }
        entries.push((name, Matrix::from_vec(wr, wc, data)));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    Ok(Checkpoint {
        config: header.config,
        meta: header.meta,
        weights: NetworkWeights::from_named(entries)?,
    })
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), ckpt)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    read_checkpoint(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::super::init_network;
    use super::*;
    use crate::random::seeded;

    fn sample() -> Checkpoint {
        let config = NetworkConfig {
            layers: 1,
            dx: 8,
            de: 4,
            dg: 4,
            heads: 2,
            ..NetworkConfig::default()
        };
        let weights = init_network(&config, &mut seeded(9)).unwrap();
        Checkpoint {
            config,
            meta: serde_json::json!({"seed": 9, "config_hash": "abc"}),
            weights,
        }
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let ck = sample();
        let mut a = Vec::new();
        write_checkpoint(&mut a, &ck).unwrap();
        let back = read_checkpoint(&a[..]).unwrap();
        assert_eq!(back, ck);
        let mut b = Vec::new();
        write_checkpoint(&mut b, &back).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mut bytes = Vec::new();
        write_checkpoint(&mut bytes, &sample()).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            read_checkpoint(&bad[..]),
            Err(Error::Checkpoint(_))
        ));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(
            read_checkpoint(&bad[..]),
            Err(Error::Version { found: 9, .. })
        ));
        assert!(read_checkpoint(&bytes[..bytes.len() - 3]).is_err());
        let mut long = bytes.clone();
        long.push(0);
        assert!(read_checkpoint(&long[..]).is_err());
    }
}
