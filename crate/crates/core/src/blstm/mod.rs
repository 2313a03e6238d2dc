//! Peephole LSTM cells, bidirectional layers and the stacked network.
//! Inference only; gradients live in [`crate::training`].

mod cell;
mod io;
mod layer;
mod model;

pub use cell::{lstm_cell_step, LstmDirectionParams};
pub use io::{decode_model, encode_model, load_model, save_model, MODEL_MAGIC, MODEL_VERSION};
pub use layer::{blstm_layer_forward, BlstmLayer};
pub use model::{
    init_params, stack_forward, BlstmModel, BlstmParams, OutputProjection, INIT_RANGE,
};

pub(crate) use cell::{gemv_t_acc, DirectionTrace};
pub(crate) use layer::reversed;
