//! Training, evaluation protocols, metrics and the random-forest baseline.

pub mod forest;
pub mod metrics;
pub mod optim;
pub mod train;
pub mod protocol;
