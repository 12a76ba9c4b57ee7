//! Frequency-domain temporal encoding for spiking neural networks.
//!
//! Images are split into blocks, projected onto a transform basis (DCT, PCA
//! or random), and replayed one basis component per timestep through a
//! signed integrate-and-fire generator. The resulting spike trains drive a
//! leaky integrate-and-fire network obtained from a trained ANN by threshold
//! balancing and refined with surrogate-gradient backpropagation through
//! time.

pub mod cli;
pub mod config;
pub mod data;
pub mod encoder;
pub mod energy;
pub mod error;
pub mod rng;
pub mod snn;
pub mod stats;
pub mod train;
pub mod transforms;

pub use error::{Error, Result};
