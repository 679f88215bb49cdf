//! Branch network, its training loop, the trunk-network variant and
//! checkpoint files.

pub mod branch;
pub mod checkpoint;
pub mod mlp;
pub mod train;
pub mod trunk;

pub use branch::BranchNet;
pub use mlp::{swish, Activation, Mlp, Normalizer};
pub use checkpoint::Checkpoint;
pub use train::{mse_loss, train, DecayUnit, OutputScaling, TrainConfig, TrainReport};
pub use trunk::{deeponet_forward, PodTrunk, TrunkBasis, TrunkNet};
