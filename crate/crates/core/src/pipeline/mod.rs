//! The three training phases, run-time conversion and the parallel baseline.

pub mod experiment;
mod phases;
mod system;

pub use phases::{
    adapt_model, build_ern_dataset, load_parallel, split_validation, train_average_model,
    train_ern, train_parallel_baseline, ErnTrainingSet, ParallelUtterance, ERN_CONTEXT,
    VALID_EVERY,
};
pub use system::{
    convert, load_prosody, prosody_from_text, prosody_to_text, save_prosody, Converted, VcSystem,
};
