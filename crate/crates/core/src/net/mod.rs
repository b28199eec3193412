//! The MDCSA network: modality embeddings, dual convolutional self-attention
//! blocks, multihead aggregation and the two output heads.

pub mod checkpoint;
pub mod layers;
pub mod model;
pub mod tape;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{ChannelLayout, WINDOW_LEN};
use crate::room::{Room, N_ROOMS};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use model::{Forward, MdcsaModel, Mode, ParamStore};
pub use tape::{NodeId, Tape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdcsaConfig {
    pub d: usize,
    pub kernels: Vec<usize>,
    pub dropout: f64,
    pub n_rooms: usize,
    pub rssi_channels: usize,
    /// Zero selects the RSSI-only variant, where a learned constant stands
    /// in for the accelerometer embedding.
    pub accel_channels: usize,
    pub window_len: usize,
    pub referenced_room: Room,
}

impl Default for MdcsaConfig {
    fn default() -> Self {
        MdcsaConfig {
            d: 32,
            kernels: vec![1, 4, 7],
            dropout: 0.15,
            n_rooms: N_ROOMS,
            rssi_channels: 20,
            accel_channels: 6,
            window_len: WINDOW_LEN,
            referenced_room: Room::Hallway,
        }
    }
}

impl MdcsaConfig {
    pub fn for_layout(layout: &ChannelLayout, d: usize) -> Self {
        MdcsaConfig {
            d,
            rssi_channels: layout.n_rssi(),
            accel_channels: layout.n_accel(),
            ..Default::default()
        }
    }

    pub fn rssi_only(&self) -> bool {
        self.accel_channels == 0
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("d must be positive"));
        }
        if self.kernels.is_empty() || self.kernels.contains(&0) {
            return Err(Error::invalid("kernels must be a non-empty list of sizes >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::invalid(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        if self.n_rooms < 2 {
            return Err(Error::invalid("at least two rooms are required"));
        }
        if self.rssi_channels == 0 || self.window_len == 0 {
            return Err(Error::invalid("rssi_channels and window_len must be positive"));
        }
        if self.referenced_room.index() >= self.n_rooms {
            return Err(Error::invalid("referenced room outside the label set"));
        }
        Ok(())
    }
}
