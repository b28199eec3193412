use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::normalize::NormalizationStats;
use crate::tensorfile::{NamedTensor, TensorFile};

use super::{MdcsaConfig, MdcsaModel, ParamStore};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MDCSACKP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained network together with the normalisation it expects.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: MdcsaModel,
    pub normalization: Option<NormalizationStats>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: MdcsaConfig,
    normalization: Option<NormalizationStats>,
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    let p = &ckpt.model.params;
    let tensors = p
        .names
        .iter()
        .zip(&p.values)
        .map(|(n, v)| NamedTensor::new(n, vec![v.nrows(), v.ncols()], v.iter().copied().collect()))
        .collect();
    let header = Header {
        config: ckpt.model.config.clone(),
        normalization: ckpt.normalization.clone(),
    };
    TensorFile {
        header: serde_json::to_value(header)?,
        tensors,
    }
    .save(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, path)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let file = TensorFile::load(CHECKPOINT_MAGIC, CHECKPOINT_VERSION, path)?;
    let header: Header =
        serde_json::from_value(file.header).map_err(|e| Error::format(path, e.to_string()))?;
    let mut params = ParamStore::default();
    for t in file.tensors {
        if t.shape.len() != 2 {
            return Err(Error::format(path, format!("tensor {} is not a matrix", t.name)));
        }
        let v = Array2::from_shape_vec((t.shape[0], t.shape[1]), t.data)
            .map_err(|e| Error::format(path, e.to_string()))?;
        params.names.push(t.name);
        params.values.push(v);
    }
    let model = MdcsaModel::with_params(header.config, params)?;
    Ok(Checkpoint {
        model,
        normalization: header.normalization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn round_trip_is_exact_and_shape_checked() {
        let cfg = MdcsaConfig {
            d: 8,
            ..Default::default()
        };
        let model = MdcsaModel::new(cfg, &mut substream(3, "init", &[])).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(
            &Checkpoint {
                model: model.clone(),
                normalization: None,
            },
            &path,
        )
        .unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back.model.params, model.params);
        assert_eq!(back.model.config, model.config);

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] = b'X';
        std::fs::write(&path, bytes).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
