//! Ingestion, text preprocessing, TF-IDF content vectors and train/test splits.

mod corpus;
mod split;
mod text;
mod tfidf;

pub use corpus::{
    binarize, read_documents_jsonl, read_interactions_csv, ImplicitFeedback, RawCorpus,
    RawInteraction,
};
pub use split::{split, DatasetSplit, SplitSpec};
pub use text::{is_stopword, stem, tokenize, STOPWORDS};
pub use tfidf::{build_vocab, vectorize, ContentMatrix, Vocabulary, DEFAULT_VOCAB_CAP};
