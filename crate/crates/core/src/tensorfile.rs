//! Versioned binary container: a JSON header followed by named f64 tensors.
//!
//! ```text
//! magic      8 bytes
//! version    u32
//! header     u64 length + UTF-8 JSON
//! count      u32
//! tensor*    u32 name length, name, u32 rank, u64 dims..., f64 data (row-major)
//! ```
//! All integers and floats are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{ReadBytesExt, WriteBytesExt, LE};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Self {
        NamedTensor {
            name: name.into(),
            shape,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub header: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

impl TensorFile {
    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn write_to<W: Write>(&self, magic: &[u8; 8], version: u32, out: W) -> Result<()> {
        let mut w = BufWriter::new(out);
        w.write_all(magic)?;
        w.write_u32::<LE>(version)?;
        let header = serde_json::to_vec(&self.header)?;
        w.write_u64::<LE>(header.len() as u64)?;
        w.write_all(&header)?;
        w.write_u32::<LE>(self.tensors.len() as u32)?;
        for t in &self.tensors {
            let expected: usize = t.shape.iter().product();
            if expected != t.data.len() {
                return Err(Error::shape(
                    format!("{} values for {:?}", expected, t.shape),
                    format!("{} values in tensor {}", t.data.len(), t.name),
                ));
            }
            w.write_u32::<LE>(t.name.len() as u32)?;
            w.write_all(t.name.as_bytes())?;
            w.write_u32::<LE>(t.shape.len() as u32)?;
            for &d in &t.shape {
                w.write_u64::<LE>(d as u64)?;
            }
            for &v in &t.data {
                w.write_f64::<LE>(v)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(magic: &[u8; 8], version: u32, input: R, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::format(path, reason);
        let mut r = BufReader::new(input);
        let mut got = [0u8; 8];
        r.read_exact(&mut got).map_err(|e| bad(format!("truncated magic: {e}")))?;
        if &got != magic {
            return Err(bad(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&got),
                String::from_utf8_lossy(magic)
            )));
        }
        let v = r.read_u32::<LE>()?;
        if v != version {
            return Err(bad(format!("unsupported version {v}, expected {version}")));
        }
        let len = r.read_u64::<LE>()? as usize;
        let mut header = vec![0u8; len];
        r.read_exact(&mut header)?;
        let header = serde_json::from_slice(&header).map_err(|e| bad(format!("header: {e}")))?;
        let count = r.read_u32::<LE>()?;
        let mut tensors = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let n = r.read_u32::<LE>()? as usize;
            let mut name = vec![0u8; n];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| bad(format!("tensor name: {e}")))?;
            let rank = r.read_u32::<LE>()?;
            let shape = (0..rank)
                .map(|_| r.read_u64::<LE>().map(|d| d as usize))
                .collect::<std::io::Result<Vec<_>>>()?;
            let mut data = vec![0.0; shape.iter().product()];
            r.read_f64_into::<LE>(&mut data)
                .map_err(|e| bad(format!("tensor {name}: {e}")))?;
            tensors.push(NamedTensor { name, shape, data });
        }
        Ok(TensorFile { header, tensors })
    }

    pub fn save(&self, magic: &[u8; 8], version: u32, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        self.write_to(magic, version, File::create(path)?)
    }

    pub fn load(magic: &[u8; 8], version: u32, path: &Path) -> Result<Self> {
        let f = File::open(path).map_err(|e| Error::MissingInput {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::read_from(magic, version, f, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAGIC: &[u8; 8] = b"TESTFILE";

    #[test]
    fn round_trip_preserves_bits() {
        let file = TensorFile {
            header: serde_json::json!({"d": 8, "kernels": [1, 4, 7]}),
            tensors: vec![
                NamedTensor::new("a", vec![2, 3], vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300, 0.1, 3.0]),
                NamedTensor::new("scalar", vec![], vec![2.5]),
            ],
        };
        let mut buf = vec![];
        file.write_to(MAGIC, 1, &mut buf).unwrap();
        let back = TensorFile::read_from(MAGIC, 1, &buf[..], Path::new("mem")).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.get("a").unwrap().data[1].to_bits(), (-0.0f64).to_bits());
    }

    #[test]
    fn rejects_wrong_magic_and_version() {
        let file = TensorFile {
            header: serde_json::json!({}),
            tensors: vec![],
        };
        let mut buf = vec![];
        file.write_to(MAGIC, 1, &mut buf).unwrap();
        assert!(TensorFile::read_from(b"OTHERFIL", 1, &buf[..], Path::new("m")).is_err());
        assert!(TensorFile::read_from(MAGIC, 2, &buf[..], Path::new("m")).is_err());
        assert!(TensorFile::read_from(MAGIC, 1, &buf[..10], Path::new("m")).is_err());
    }

    #[test]
    fn rejects_inconsistent_shape() {
        let file = TensorFile {
            header: serde_json::json!({}),
            tensors: vec![NamedTensor::new("x", vec![2, 2], vec![1.0])],
        };
        assert!(file.write_to(MAGIC, 1, &mut vec![]).is_err());
    }
}
