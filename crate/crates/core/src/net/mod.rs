//! Fully connected ReLU generator, its gradient, and the Adam optimizer.

mod adam;
mod checkpoint;
mod mlp;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointFormat};
pub use mlp::{backward, forward, init_mlp, ForwardCache, MlpParams, NetArch};
