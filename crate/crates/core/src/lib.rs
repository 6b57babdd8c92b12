//! Word Mover's Distance and Word Mover's Embedding.
//!
//! The crate is organised bottom-up:
//!
//! - [`embeddings`]: pre-trained word vectors (word2vec binary and text formats).
//! - [`corpus`]: tokenization, NBOW / TF-IDF weighting, labeled datasets.
//! - [`transport`]: exact WMD via a transportation simplex, plus the word-pair
//!   distance cache.
//! - [`wme`]: random documents, the feature map `exp(-gamma * WMD(x, omega))`
//!   and the Monte-Carlo feature matrix.
//! - [`learn`]: KNN over distances, one-vs-rest logistic regression,
//!   cross-validation and evaluation metrics.
//!
//! Vectors are stored as `f32` and all arithmetic is carried out in `f64`.

pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod learn;
pub mod matrix;
pub mod rng;
pub mod transport;
pub mod wme;

pub use corpus::{Corpus, Document, Idf, WeightScheme};
pub use embeddings::{CoordinateExtrema, EmbeddingTable};
pub use error::{Error, Result};
pub use transport::{DistanceCache, TransportPlan};
pub use wme::{FeatureMatrix, RandomBasis, RandomBasisSpec};
