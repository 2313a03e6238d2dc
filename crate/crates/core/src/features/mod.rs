//! Feature sequences, normalization, context stacking, file formats and the
//! synthetic corpus generator.

mod io;
mod manifest;
mod sequence;
pub mod synthetic;

pub use io::{
    decode_feature, encode_feature, read_feature_file, write_feature_file, FEATURE_HEADER_LEN,
    FEATURE_MAGIC, FEATURE_VERSION,
};
pub use manifest::{CorpusManifest, Utterance, UtteranceRecord};
pub use sequence::{
    compute_norm_stats, denormalize, normalize, stack_context, FeatureKind, FeatureSequence,
    NormStats, DEFAULT_LABEL_DIM, STD_FLOOR,
};
pub use synthetic::{gen_synthetic_corpus, SyntheticCorpusConfig};
