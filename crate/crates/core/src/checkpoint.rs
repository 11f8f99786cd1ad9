//! Named-tensor checkpoints.
//!
//! A checkpoint is a directory with two files:
//!
//! - `manifest.txt`: first line `semiblind-checkpoint 1`, then one record per
//!   line, either `meta KEY VALUE` or `tensor NAME D0,D1,... OFFSET LEN`
//!   (offset and length counted in values);
//! - `tensors.bin`: every tensor's values as little-endian `f64`, back to back.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &str = "semiblind-checkpoint 1";
pub const MANIFEST_FILE: &str = "manifest.txt";
pub const BLOB_FILE: &str = "tensors.bin";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    meta: BTreeMap<String, String>,
    tensors: Vec<(String, Tensor)>,
}

fn check_token(kind: &str, s: &str) -> Result<()> {
    if s.is_empty() || s.chars().any(char::is_whitespace) {
        return Err(Error::InvalidArgument(format!("checkpoint {kind} {s:?} must be a non-empty token")));
    }
    Ok(())
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) -> Result<()> {
        let value = value.to_string();
        check_token("key", key)?;
        check_token("value", &value)?;
        self.meta.insert(key.to_string(), value);
        Ok(())
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    /// Parses a required metadata entry.
    pub fn meta_as<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self
            .meta(key)
            .ok_or_else(|| Error::Parse(format!("checkpoint lacks meta {key:?}")))?;
        raw.parse()
            .map_err(|_| Error::Parse(format!("checkpoint meta {key:?} = {raw:?} is malformed")))
    }

    pub fn push(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        check_token("tensor name", name)?;
        if self.get(name).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate checkpoint tensor {name:?}")));
        }
        self.tensors.push((name.to_string(), tensor));
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn require(&self, name: &str) -> Result<&Tensor> {
        self.get(name)
            .ok_or_else(|| Error::Parse(format!("checkpoint lacks tensor {name:?}")))
    }

    pub fn tensors(&self) -> &[(String, Tensor)] {
        &self.tensors
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut manifest = format!("{MAGIC}\n");
        for (k, v) in &self.meta {
            let _ = writeln!(manifest, "meta {k} {v}");
        }
        let mut blob = Vec::new();
        let mut offset = 0usize;
        for (name, t) in &self.tensors {
            let shape: Vec<String> = t.shape().iter().map(usize::to_string).collect();
            let _ = writeln!(manifest, "tensor {name} {} {offset} {}", shape.join(","), t.len());
            for v in t.data() {
                blob.extend_from_slice(&v.to_le_bytes());
            }
            offset += t.len();
        }
        fs::write(dir.join(MANIFEST_FILE), manifest)?;
        fs::write(dir.join(BLOB_FILE), blob)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Checkpoint> {
        let manifest = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let blob = fs::read(dir.join(BLOB_FILE))?;
        if blob.len() % 8 != 0 {
            return Err(Error::Parse(format!("{BLOB_FILE} length {} is not a multiple of 8", blob.len())));
        }
        let values: Vec<f64> = blob
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
            .collect();
        let mut lines = manifest.lines();
        if lines.next() != Some(MAGIC) {
            return Err(Error::Parse(format!("{MANIFEST_FILE} does not start with {MAGIC:?}")));
        }
        let mut ck = Checkpoint::new();
        for (no, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = |m: &str| Error::Parse(format!("{MANIFEST_FILE} line {}: {m}", no + 2));
            let f: Vec<&str> = line.split_whitespace().collect();
            match f.as_slice() {
                ["meta", k, v] => ck.set_meta(k, v)?,
                ["tensor", name, shape, offset, len] => {
                    let shape: Vec<usize> = shape
                        .split(',')
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad("bad shape"))?;
                    let offset: usize = offset.parse().map_err(|_| bad("bad offset"))?;
                    let len: usize = len.parse().map_err(|_| bad("bad length"))?;
                    let end = offset.checked_add(len).filter(|&e| e <= values.len()).ok_or_else(|| bad("range outside blob"))?;
                    ck.push(name, Tensor::new(shape, values[offset..end].to_vec())?)?;
                }
                _ => return Err(bad("unrecognized record")),
            }
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let dir = std::env::temp_dir().join(format!("semiblind-ck-{}", std::process::id()));
        let mut ck = Checkpoint::new();
        ck.set_meta("iter", 7).unwrap();
        ck.push("a.weight", Tensor::new(vec![2, 3], vec![0.1, -2.5, 1e-300, 3.0, 0.0, -0.0]).unwrap()).unwrap();
        ck.push("b", Tensor::scalar(std::f64::consts::PI)).unwrap();
        ck.save(&dir).unwrap();
        let back = Checkpoint::load(&dir).unwrap();
        fs::remove_dir_all(&dir).unwrap();
        assert_eq!(back.meta_as::<u64>("iter").unwrap(), 7);
        for ((n1, t1), (n2, t2)) in ck.tensors().iter().zip(back.tensors()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            let b1: Vec<u64> = t1.data().iter().map(|v| v.to_bits()).collect();
            let b2: Vec<u64> = t2.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(b1, b2);
        }
    }

    #[test]
    fn rejects_bad_names_and_duplicates() {
        let mut ck = Checkpoint::new();
        assert!(ck.push("has space", Tensor::scalar(1.0)).is_err());
        ck.push("x", Tensor::scalar(1.0)).unwrap();
        assert!(ck.push("x", Tensor::scalar(2.0)).is_err());
        assert!(ck.set_meta("k", "").is_err());
    }
}
