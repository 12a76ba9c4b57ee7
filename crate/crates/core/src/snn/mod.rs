//! Spiking network: topology, kernels, LIF dynamics, inference and checkpoints.

pub mod arch;
pub mod checkpoint;
pub mod kernels;
pub mod lif;
pub mod model;
pub mod network;

pub use arch::{Architecture, ConvSpec, LayerSpec, Shape};
pub use checkpoint::{Checkpoint, EncoderMeta, ModelKind, OptimizerState};
pub use kernels::MacSink;
pub use lif::{lif_step, LifState};
pub use model::{classify, ForwardOptions, ForwardResult, Record, SnnModel};
pub use network::Network;
