//! Document representations and cosine similarity: token-frequency vectors for
//! code, mean skip-gram word vectors for prose.

mod cosine;
mod embedding;
mod tokens;

pub use cosine::{cosine_dense, cosine_sparse, Cosine};
pub use embedding::{
    embed_text, train_embeddings, DocVector, EmbeddingModel, EmbeddingParams, TrainingReport, MODEL_FORMAT,
    MODEL_VERSION,
};
pub use tokens::{code_tokens, text_tokens, tokenize_code, TokenFrequencyVector};

/// Cosine between two token-frequency vectors.
pub fn cosine_similarity(a: &TokenFrequencyVector, b: &TokenFrequencyVector) -> Cosine {
    cosine_sparse(a.entries(), b.entries())
}
