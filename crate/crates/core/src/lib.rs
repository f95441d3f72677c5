//! Contrastive alignment of job-title and skill-set embeddings.
//!
//! A shared subword-hashing encoder embeds titles and ESCO skill labels; titles
//! pass through an extra linear projection. Training minimizes InfoNCE with
//! in-batch negatives over shuffled, language-mixed batches. The ranking and
//! metrics modules cover title matching (mono- and cross-lingual) and
//! title-to-skill prediction with MAP, MRR, nDCG and P@K.

pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod ranker;
pub mod rng;
pub mod synthetic;
pub mod trainer;
pub mod translate;

pub use corpus::{JobAdRecord, Language};
pub use encoder::{EmbeddingVector, EncoderConfig, ModelParams, Space};
pub use error::{Error, Result};
pub use metrics::{MetricReport, Qrels, Run};
pub use ranker::{RankedList, SkillGazetteer, VectorIndex};
pub use trainer::{TrainConfig, TrainReport};
