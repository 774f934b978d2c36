//! Bag-of-words retrieval over fingerprints.
//!
//! Extrema pairs are quantized against a k-means [`Codebook`]; each image
//! becomes a TF-IDF weighted word histogram, and queries are ranked by cosine
//! similarity against a reference trajectory.

mod codebook;
mod index;
pub mod kmeans;

pub use codebook::{distinct_pairs, quantize, train_codebook, Codebook, DEFAULT_K};
pub use index::{build_index, query, IndexEntry, RetrievalIndex, WordIndex, INDEX_MAGIC};
