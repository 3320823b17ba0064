//! The `SEDAE1` tensor container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "SEDAE1" | version: u8 | count: u32
//! count × { name_len: u32 | name: utf-8 | rank: u32 | dims: u64 × rank | offset: u64 }
//! data: f64 values, tensor by tensor, offsets relative to the start of this section
//! ```

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::Params;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 6] = b"SEDAE1";
pub const VERSION: u8 = 1;

pub type NamedTensors<T> = Vec<(String, Tensor<T>)>;

fn fmt_err(msg: impl Into<String>) -> Error {
    Error::Format {
        what: "checkpoint",
        msg: msg.into(),
    }
}

pub fn encode<T: Scalar>(entries: &[(String, &Tensor<T>)]) -> Vec<u8> {
    let mut head = Vec::new();
    head.extend_from_slice(MAGIC);
    head.push(VERSION);
    head.extend_from_slice(&(entries.len() as u32).to_le_bytes());
    let mut data = Vec::new();
    for (name, t) in entries {
        head.extend_from_slice(&(name.len() as u32).to_le_bytes());
        head.extend_from_slice(name.as_bytes());
        head.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            head.extend_from_slice(&(d as u64).to_le_bytes());
        }
        head.extend_from_slice(&(data.len() as u64).to_le_bytes());
        for &v in t.data() {
            data.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    head.extend_from_slice(&data);
    head
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(fmt_err("truncated header"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<NamedTensors<T>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(6)? != MAGIC {
        return Err(fmt_err("bad magic"));
    }
    let version = r.take(1)?[0];
    if version != VERSION {
        return Err(fmt_err(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    let mut manifest = Vec::with_capacity(count);
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| fmt_err("tensor name is not utf-8"))?
            .to_string();
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let offset = r.u64()? as usize;
        manifest.push((name, shape, offset));
    }
    let data = &bytes[r.pos..];
    let mut out = Vec::with_capacity(count);
    for (name, shape, offset) in manifest {
        let n: usize = shape.iter().product();
        let end = offset + 8 * n;
        if end > data.len() {
            return Err(fmt_err(format!("tensor {name} runs past the data section")));
        }
        let values = data[offset..end]
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        out.push((name, Tensor::from_vec(&shape, values)?));
    }
    Ok(out)
}

pub fn write<T: Scalar>(path: &Path, entries: &[(String, &Tensor<T>)]) -> Result<()> {
    std::fs::write(path, encode(entries)).map_err(|e| Error::io(path, e))
}

pub fn read<T: Scalar>(path: &Path) -> Result<NamedTensors<T>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

/// Named tensors of a parameter tree under `prefix`.
pub fn entries<'a, T: Scalar, P: Params<T>>(
    params: &'a P,
    prefix: &str,
) -> Vec<(String, &'a Tensor<T>)> {
    let mut v = Vec::new();
    params.visit(prefix, &mut v);
    v
}

/// Copies tensors named `prefix/...` into `params`; every parameter must be present
/// with a matching shape.
pub fn load_into<T: Scalar, P: Params<T>>(
    params: &mut P,
    stored: &NamedTensors<T>,
    prefix: &str,
) -> Result<()> {
    let mut slots = Vec::new();
    params.visit_mut(prefix, &mut slots);
    for (name, slot) in slots {
        let found = stored
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| fmt_err(format!("missing tensor {name}")))?;
        if found.1.shape() != slot.shape() {
            return Err(fmt_err(format!(
                "tensor {name} has shape {:?}, expected {:?}",
                found.1.shape(),
                slot.shape()
            )));
        }
        slot.data_mut().copy_from_slice(found.1.data());
    }
    Ok(())
}

pub fn find<'a, T>(stored: &'a NamedTensors<T>, name: &str) -> Result<&'a Tensor<T>> {
    stored
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, t)| t)
        .ok_or_else(|| fmt_err(format!("missing tensor {name}")))
}

/// SHA-256 of the encoded parameters, hex.
pub fn param_hash<T: Scalar, P: Params<T>>(params: &P) -> String {
    hex::encode(Sha256::digest(encode(&params.named())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{normal_init, Linear};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn header_starts_with_magic_and_version() {
        let t = Tensor::<f64>::zeros(&[2]);
        let bytes = encode(&[("x".to_string(), &t)]);
        assert_eq!(&bytes[..6], b"SEDAE1");
        assert_eq!(bytes[6], 1);
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(decode::<f64>(b"NOPE").is_err());
        let t = Tensor::<f64>::zeros(&[4]);
        let bytes = encode(&[("x".to_string(), &t)]);
        assert!(decode::<f64>(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn load_into_checks_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = Linear::<f64>::new(&mut rng, 3, 2);
        let stored = decode::<f64>(&encode(&entries(&a, "l"))).unwrap();
        let mut b = Linear::<f64>::new(&mut rng, 3, 2);
        load_into(&mut b, &stored, "l").unwrap();
        assert_eq!(a, b);
        let mut c = Linear::<f64>::new(&mut rng, 2, 2);
        assert!(load_into(&mut c, &stored, "l").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(seed in any::<u64>(), rows in 1usize..5, cols in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Tensor<f64> = normal_init(&mut rng, &[rows, cols], 1e3);
            let b: Tensor<f64> = normal_init(&mut rng, &[cols], 1e-3);
            let list = vec![("m/a".to_string(), &a), ("m/b".to_string(), &b)];
            let bytes = encode(&list);
            let back = decode::<f64>(&bytes).unwrap();
            prop_assert_eq!(back.len(), 2);
            for ((n0, t0), (n1, t1)) in list.iter().zip(&back) {
                prop_assert_eq!(n0, n1);
                prop_assert_eq!(t0.shape(), t1.shape());
                for (x, y) in t0.data().iter().zip(t1.data()) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
            let back_refs: Vec<(String, &Tensor<f64>)> = back.iter().map(|(n, t)| (n.clone(), t)).collect();
            prop_assert_eq!(encode(&back_refs), bytes);
        }
    }
}
