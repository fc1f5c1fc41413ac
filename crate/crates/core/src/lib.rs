//! Summarization, retrieval and evaluation engine for court judgments.
//!
//! Judgments are summarized by an abstractive pass over sentence-bounded
//! chunks followed by an extractive pass over the joined result. Summaries
//! are split into token windows, embedded and stored in an exact cosine
//! index; queries retrieve the top matches and hand them to a generator
//! that writes a structured case overview. A ROUGE harness scores every
//! ordering of the two summarization passes.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the `f64` instantiation the pipeline uses.

pub mod annotate;
pub mod chunker;
pub mod corpus;
pub mod providers;
pub mod rag;
pub mod rougeval;
pub mod scalar;
pub mod summarize;
pub mod vectordb;

pub use scalar::Scalar;

pub type Embedding = providers::EmbeddingVector<f64>;
pub type EmbeddingF32 = providers::EmbeddingVector<f32>;
pub type VectorIndex = vectordb::VectorIndex<f64>;
pub type VectorIndexF32 = vectordb::VectorIndex<f32>;
pub type SearchHit = vectordb::SearchHit<f64>;
pub type EmbeddedChunk = vectordb::EmbeddedChunk<f64>;
pub type RougeScore = rougeval::RougeScore<f64>;
