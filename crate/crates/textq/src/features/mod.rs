//! Feature representations: TF-IDF under three vocabulary modes, averaged
//! word embeddings, and ingestion of precomputed document vectors.

pub mod embed;
pub mod matrix;
pub mod tfidf;

pub use embed::{
    embed_instance, embedding_matrix, load_embeddings, load_precomputed_vectors, EmbeddingTable,
};
pub use matrix::{load_matrix, save_matrix, DenseMatrix, FeatureMatrix, Features, SparseMatrix};
pub use tfidf::{
    fit_tfidf, tfidf_matrix, transform_tfidf, TfidfConfig, TfidfModel, VocabMode,
    DEFAULT_MIN_FREQ, DEFAULT_TOP_K,
};
