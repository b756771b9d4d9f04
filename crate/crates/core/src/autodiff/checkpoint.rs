//! Self-describing checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic            16 bytes  "HISTOPROG-CKPT-1"
//! seed             u64
//! entry_count      u32
//! entry*           group u8 | name_len u32 | name utf-8 | ndim u32 | dims u64* | f64* data
//! ```
//!
//! Groups: 0 = model parameters, 1 = optimizer velocity, 2 = EMA (teacher)
//! parameters, 3 = named scalars (learning rate, momentum, smoothing
//! coefficient, ...) stored as single-element tensors.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::optim::Params;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 16] = b"HISTOPROG-CKPT-1";

const GROUP_PARAM: u8 = 0;
const GROUP_VELOCITY: u8 = 1;
const GROUP_EMA: u8 = 2;
const GROUP_SCALAR: u8 = 3;

/// Named tensors plus optimizer/EMA state and the RNG seed of the run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub seed: u64,
    pub params: Params,
    pub velocity: Params,
    pub ema: Params,
    pub scalars: BTreeMap<String, f64>,
}

impl Checkpoint {
    pub fn new(seed: u64, params: Params) -> Self {
        Checkpoint {
            seed,
            params,
            ..Default::default()
        }
    }

    pub fn scalar(&self, name: &str) -> Option<f64> {
        self.scalars.get(name).copied()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MAGIC)?;
        w.write_all(&self.seed.to_le_bytes())?;
        let count = self.params.len() + self.velocity.len() + self.ema.len() + self.scalars.len();
        w.write_all(&(count as u32).to_le_bytes())?;
        for (group, set) in [
            (GROUP_PARAM, &self.params),
            (GROUP_VELOCITY, &self.velocity),
            (GROUP_EMA, &self.ema),
        ] {
            for (name, tensor) in set.iter() {
                write_entry(&mut w, group, name, tensor)?;
            }
        }
        for (name, &value) in &self.scalars {
            write_entry(&mut w, GROUP_SCALAR, name, &Tensor::scalar(value))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 16];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!(
                "bad magic header {:?}",
                String::from_utf8_lossy(&magic)
            )));
        }
        let seed = read_u64(&mut r)?;
        let count = read_u32(&mut r)? as usize;
        let mut ckpt = Checkpoint {
            seed,
            ..Default::default()
        };
        for _ in 0..count {
            let (group, name, tensor) = read_entry(&mut r)?;
            match group {
                GROUP_PARAM => ckpt.params.insert(name, tensor),
                GROUP_VELOCITY => ckpt.velocity.insert(name, tensor),
                GROUP_EMA => ckpt.ema.insert(name, tensor),
                GROUP_SCALAR => {
                    ckpt.scalars.insert(name, tensor.item());
                }
                other => {
                    return Err(Error::Checkpoint(format!("unknown entry group {other}")));
                }
            }
        }
        Ok(ckpt)
    }
}

fn write_entry(w: &mut impl Write, group: u8, name: &str, tensor: &Tensor) -> Result<()> {
    w.write_all(&[group])?;
    w.write_all(&(name.len() as u32).to_le_bytes())?;
    w.write_all(name.as_bytes())?;
    w.write_all(&(tensor.shape().len() as u32).to_le_bytes())?;
    for &d in tensor.shape() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &v in tensor.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_entry(r: &mut impl Read) -> Result<(u8, String, Tensor)> {
    let mut group = [0u8; 1];
    r.read_exact(&mut group)?;
    let name_len = read_u32(r)? as usize;
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name)?;
    let name = String::from_utf8(name)
        .map_err(|e| Error::Checkpoint(format!("invalid tensor name: {e}")))?;
    let ndim = read_u32(r)? as usize;
    let mut shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        shape.push(read_u64(r)? as usize);
    }
    let numel: usize = shape.iter().product();
    let mut data = Vec::with_capacity(numel);
    let mut buf = [0u8; 8];
    for _ in 0..numel {
        r.read_exact(&mut buf)?;
        data.push(f64::from_le_bytes(buf));
    }
    Ok((group[0], name, Tensor::from_vec(shape, data)))
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_everything() {
        let dir = std::env::temp_dir().join("histoprog-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("rt.ckpt");

        let mut params = Params::new();
        params.insert("net.w0", Tensor::matrix(2, 3, vec![1.0, -2.0, 3.5, 0.0, 1e-9, 7.0]));
        params.insert("net.b0", Tensor::row(vec![0.25, -0.5, 0.75]));
        let mut velocity = Params::new();
        velocity.insert("net.w0", Tensor::zeros(vec![2, 3]));
        let mut ema = Params::new();
        ema.insert("net.w0", Tensor::matrix(2, 3, vec![0.5; 6]));
        let mut ckpt = Checkpoint::new(99, params);
        ckpt.velocity = velocity;
        ckpt.ema = ema;
        ckpt.scalars.insert("optim.lr".into(), 1e-3);
        ckpt.scalars.insert("ema.delta".into(), 0.99);

        ckpt.save(&path).unwrap();
        let loaded = Checkpoint::load(&path).unwrap();
        assert_eq!(ckpt, loaded);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn bad_magic_is_rejected() {
        let dir = std::env::temp_dir().join("histoprog-ckpt-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.ckpt");
        std::fs::write(&path, b"NOT-A-CHECKPOINT").unwrap();
        let err = Checkpoint::load(&path).unwrap_err();
        assert!(matches!(err, Error::Checkpoint(_)), "{err}");
        std::fs::remove_file(&path).ok();
    }
}
