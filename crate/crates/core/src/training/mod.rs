//! Loss, backpropagation through time, momentum SGD and the training loop.

mod backprop;
mod gradcheck;
mod optim;
mod trainer;

pub use backprop::{backprop_sequence, mse_loss, output_bias_gradient, Gradients};
pub use gradcheck::{grad_check, grad_check_against, numeric_gradient, relative_error};
pub use optim::{clip_global_norm, l2_norm, sgd_momentum_step, MomentumSgd};
pub use trainer::{mean_loss, train, EpochRecord, SeqPair, StopReason, TrainConfig, TrainReport};
