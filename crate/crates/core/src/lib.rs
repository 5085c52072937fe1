//! Bandwidth-constrained search for frames of interest in remotely stored video.
//!
//! An agent holds a two-state hidden Markov model over per-frame labels. It
//! requests a sparse set of frame scores from a [`FrameSource`], bins them into
//! three quantile bins, and propagates the evidence across all frames with
//! forward-backward. The next frame to request is the one that minimizes the
//! expected mean per-frame entropy of the updated belief.

pub mod data;
pub mod episode;
pub mod error;
pub mod harness;
pub mod hmm;
pub mod policy;
pub mod server;

pub use data::{
    clip_video, compute_quantiles, generate_synthetic, load_labels, load_score_table, load_scores,
    QuantileBinner, SyntheticVideo, VideoRecord,
};
pub use episode::{
    run_episode, uniform_baseline_episode, EpisodeResult, FrameSource, LocalFrameSource,
    WindowSource,
};
pub use error::{Error, Result};
pub use hmm::{
    estimate_emission, estimate_initial, estimate_transition, forward_backward,
    stationary_distribution, Belief, HmmParams, Label, Observation, ObservationSet, Symbol,
    NUM_LABELS, NUM_SYMBOLS,
};
pub use policy::{
    expected_cross_entropy, expected_loss_for_query, observation_predictive, select_next_query,
    QueryPlan,
};
pub use server::{RemoteFrameSource, ServerCatalog, ServerHandle};
