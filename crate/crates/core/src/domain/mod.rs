//! Shared domain types: the prediction grid, contexts and labels, transcripts,
//! losses and hypothesis classes.

mod context;
mod grid;
mod hypothesis;
mod loss;
mod transcript;

pub use context::{Context, Outcome};
pub use grid::{make_grid, Grid};
pub use hypothesis::{
    class_members, class_members_capped, cover_points, cover_size_estimate, Hypothesis,
    HypothesisClass, HypothesisFn, Members, DEFAULT_MEMBER_CAP,
};
pub use loss::{convex_menu, default_menu, loss_eval, post_process, LossFn, LossKind, LossSpec};
pub use transcript::{Transcript, TranscriptStep};
pub(crate) use transcript::check_distribution;
