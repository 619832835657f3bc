//! Parameter storage, basic layers and the down/up-sampling blocks the
//! network is assembled from. Activations are `[B, C, F, T]`.

mod blocks;
mod layers;
mod params;

pub use blocks::{attach_skip, fold, unfold, Axis, DownBlock, NormGru, UpBlock, CHANNEL_AXIS, FREQ_AXIS, TIME_AXIS};
pub use layers::{Conv1d, Gru, InstanceNorm, TConv1d, IN_EPS};
pub use params::{Bound, ParamId, ParamSet};
