//! Multi-view fusion of the syntactic and semantic views into event labels.

pub mod classify;
pub mod model;
pub mod train;

pub use classify::{classify, decide_labels, fusion_item, tag_text, Classification, TaggedText};
pub use model::{
    concat_views, hidden_activity, hidden_activity_expanded, ClassScores, FusionModel, DEFAULT_TAU, MV_FORMAT,
};
pub use train::{subsample_other, train, train_model, FusionItem, FusionTrainConfig, FusionTrainReport};
