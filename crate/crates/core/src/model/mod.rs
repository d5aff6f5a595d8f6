//! Shared data model and the elementary preference / loss arithmetic.

mod codes;
mod delegate;
mod interactions;
mod metrics;
mod params;

pub use codes::{hamming, sgn, CodeMatrix};
pub use delegate::DelegateMatrix;
pub use interactions::InteractionSet;
pub use metrics::{
    auc, auc_with_tie_credit, pairwise_loss, preference, preference_from_hamming, total_loss, AucMode,
    DEFAULT_AUC_SAMPLES,
};
pub use params::HyperParams;

pub(crate) use metrics::{dense_objective, nth_non_member};
