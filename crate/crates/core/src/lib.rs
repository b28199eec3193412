//! Multimodal indoor localisation from wrist-worn RSSI and accelerometry.

pub mod cli;
pub mod config;
pub mod crf;
pub mod error;
pub mod gaitfeat;
pub mod harness;
pub mod medstate;
pub mod net;
pub mod pipeline;
pub mod rng;
pub mod room;
pub mod simhome;
pub mod stats;
pub mod tensorfile;

pub use error::{Error, Result};
pub use room::{Room, RoomPair, N_ROOMS};
