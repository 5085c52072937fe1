//! Reference computations that share no code with the library's inference.
#![allow(dead_code)]

use framequery::HmmParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Posterior `P(Y_t = 1 | evidence)` by summing the joint over all `2^T` label paths.
pub fn brute_marginals(params: &HmmParams, evidence: &[Option<u8>]) -> Vec<f64> {
    let len = evidence.len();
    assert!(len <= 20, "enumeration is exponential");
    let a = params.transition();
    let e = params.emission();
    let pi = params.initial();
    let mut positive = vec![0.0; len];
    let mut total = 0.0;
    for path in 0u32..(1 << len) {
        let label = |t: usize| ((path >> t) & 1) as usize;
        let mut joint = pi[label(0)];
        for t in 0..len {
            if t > 0 {
                joint *= a[label(t - 1)][label(t)];
            }
            if let Some(x) = evidence[t] {
                joint *= e[label(t)][x as usize];
            }
        }
        total += joint;
        for (t, p) in positive.iter_mut().enumerate() {
            if label(t) == 1 {
                *p += joint;
            }
        }
    }
    positive.iter().map(|p| p / total).collect()
}

pub fn mean_entropy(probs: &[f64]) -> f64 {
    let h = |p: f64| {
        let term = |q: f64| if q > 0.0 { q * q.ln() } else { 0.0 };
        -(term(p) + term(1.0 - p))
    };
    probs.iter().map(|&p| h(p)).sum::<f64>() / probs.len() as f64
}

/// Mean entropy after observing each symbol at `q`, by enumeration.
pub fn brute_outcome_entropies(params: &HmmParams, evidence: &[Option<u8>], q: usize) -> [f64; 3] {
    let mut ev = evidence.to_vec();
    std::array::from_fn(|x| {
        ev[q] = Some(x as u8);
        mean_entropy(&brute_marginals(params, &ev))
    })
}

/// Expected post-query loss by exact enumeration.
pub fn brute_expected_loss(params: &HmmParams, evidence: &[Option<u8>], q: usize) -> f64 {
    let p_q = brute_marginals(params, evidence)[q];
    let e = params.emission();
    let outcomes = brute_outcome_entropies(params, evidence, q);
    (0..3)
        .map(|x| ((1.0 - p_q) * e[0][x] + p_q * e[1][x]) * outcomes[x])
        .sum()
}

/// Monte Carlo estimate of the expected post-query loss.
///
/// Draws `Y_q ~ Bernoulli(p_q)`, then `x ~ Emission(Y_q)`, and averages the
/// enumerated post-observation loss. Returns `(mean, standard error)`.
pub fn monte_carlo_expected_loss(
    params: &HmmParams,
    evidence: &[Option<u8>],
    q: usize,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let p_q = brute_marginals(params, evidence)[q];
    let outcomes = brute_outcome_entropies(params, evidence, q);
    let e = params.emission();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let y = usize::from(rng.gen::<f64>() < p_q);
        let u: f64 = rng.gen();
        let x = if u < e[y][0] {
            0
        } else if u < e[y][0] + e[y][1] {
            1
        } else {
            2
        };
        let h = outcomes[x];
        sum += h;
        sum_sq += h * h;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn random_row<const N: usize>(rng: &mut ChaCha8Rng) -> [f64; N] {
    let raw: [f64; N] = std::array::from_fn(|_| rng.gen_range(0.05..1.0));
    let total: f64 = raw.iter().sum();
    let mut row = raw.map(|v| v / total);
    // exact row sum: put rounding residue on the last entry
    let head: f64 = row[..N - 1].iter().sum();
    row[N - 1] = 1.0 - head;
    row
}

pub fn random_params(rng: &mut ChaCha8Rng) -> HmmParams {
    HmmParams::new(
        [random_row(rng), random_row(rng)],
        [random_row(rng), random_row(rng)],
        random_row(rng),
        [1.0 / 3.0, 2.0 / 3.0],
    )
    .expect("rows are normalized")
}

/// Each frame observed with probability `density`, with a uniform symbol.
pub fn random_evidence(rng: &mut ChaCha8Rng, len: usize, density: f64) -> Vec<Option<u8>> {
    (0..len)
        .map(|_| rng.gen_bool(density).then(|| rng.gen_range(0..3u8)))
        .collect()
}

pub fn to_observations(evidence: &[Option<u8>]) -> framequery::ObservationSet {
    evidence
        .iter()
        .enumerate()
        .filter_map(|(t, x)| x.map(|x| (t, x)))
        .collect()
}

/// A 60-frame video whose label switches from 0 to 1 at frame 30, with
/// scores that bin cleanly to 0 before the switch and 2 after it.
pub struct BoundaryCase {
    pub params: HmmParams,
    pub labels: Vec<u8>,
    pub scores: Vec<f64>,
}

pub fn boundary_case() -> BoundaryCase {
    let params = HmmParams::new(
        [[0.98, 0.02], [0.02, 0.98]],
        [[0.8, 0.15, 0.05], [0.05, 0.15, 0.8]],
        [0.5, 0.5],
        [1.0 / 3.0, 2.0 / 3.0],
    )
    .unwrap();
    let labels: Vec<u8> = (0..60).map(|t| u8::from(t >= 30)).collect();
    let scores = labels
        .iter()
        .map(|&y| if y == 1 { 0.9 } else { 0.1 })
        .collect();
    BoundaryCase {
        params,
        labels,
        scores,
    }
}
