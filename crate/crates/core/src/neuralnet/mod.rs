//! Small fully connected networks with hand-written backpropagation, Adam, and the
//! autoencoders used as chart coordinate maps.

mod autoencoder;
pub mod io;
mod mlp;
mod train;

pub use autoencoder::{
    pca_anchored_autoencoder, train_autoencoder, Autoencoder, AutoencoderMode, PcaAnchor,
};
pub use mlp::{
    backprop, glorot_init, loss_weighted_mse, Activation, Architecture, ForwardCache, Gradients,
    Mlp,
};
pub use train::{
    adam_step, train, Adam, LossReport, LrSchedule, Moments, TrainConfig, ADAM_BETA1, ADAM_BETA2,
    ADAM_EPSILON,
};
