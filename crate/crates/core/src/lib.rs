//! Mapping between two monolingual word-embedding spaces, and scoring those
//! mappings by neighborhood membership in the target model.
//!
//! The pipeline is:
//!
//! 1. [`cbow`] trains one embedding space per side of a parallel corpus.
//! 2. [`lexicon`] pairs source and target words and builds paired matrices.
//! 3. [`procrustes`] fits the closed-form orthogonal map, [`mapper`] learns one by SGD.
//! 4. [`metrics`] scores predictions: LMD accuracy at k, mean cosine, rolling slopes.
//! 5. [`experiment`] runs the per-epoch protocol and writes CSV and SVG.

pub mod cbow;
pub mod embedding;
mod error;
pub mod exec;
pub mod experiment;
pub mod format;
pub mod lexicon;
pub mod mapper;
pub mod metrics;
pub mod procrustes;

pub use embedding::{EmbeddingSpace, Vocabulary};
pub use error::{Error, Result};
pub use exec::Execution;
pub use experiment::{ExperimentConfig, ExperimentResult, Mode};
pub use lexicon::{BilingualLexicon, PairedMatrices};
pub use mapper::{Mapper, MapperConfig};
pub use metrics::{MetricRecord, NeighborIndex, NeighborSet};
