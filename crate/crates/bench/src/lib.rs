//! Fixtures shared by the benchmarks.

use framequery::data::{generate_synthetic, preset};
use framequery::{HmmParams, ObservationSet};

/// The `persistent` preset parameters.
pub fn params() -> HmmParams {
    preset("persistent").expect("preset exists")
}

/// Synthetic scores for one video of `len` frames.
pub fn scores(params: &HmmParams, len: usize, seed: u64) -> Vec<f64> {
    generate_synthetic(params, len, seed)
        .expect("valid fixture")
        .scores
}

/// Observations at every `stride`-th frame of a synthetic video.
pub fn sparse_observations(params: &HmmParams, len: usize, stride: usize) -> ObservationSet {
    let video = generate_synthetic(params, len, 1).expect("valid fixture");
    video
        .observations
        .iter()
        .enumerate()
        .step_by(stride)
        .map(|(t, &x)| (t, x))
        .collect()
}
