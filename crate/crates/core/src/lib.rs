//! Joint Chinese word segmentation and dependency parsing over character
//! trees, with a small reverse-mode autograd engine.

pub mod decoder;
pub mod dropout;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod model;
pub mod scorer;
pub mod tensor;
pub mod trainer;
pub mod treebank;

pub use decoder::DecodeConfig;
pub use error::{Error, Result};
pub use metrics::{ErrorBreakdown, EvalReport};
pub use model::{Mode, ModelConfig, ModelMeta, ModelParams};
pub use trainer::{Manifest, TrainConfig};
pub use treebank::{CharTree, Corpus, LabelSet, Sentence, Span, WordTree};
