//! Two-state hidden Markov model over frame labels.
//!
//! Hidden state `Y_t` is the frame label (1 = frame of interest), observation
//! `X_t` is the frame score binned into one of [`NUM_SYMBOLS`] quantile bins.
//! Frames that were never requested carry no evidence: their emission factor
//! is 1 for both states.
//!
//! Marginals are computed with scaled forward-backward. Each forward message
//! is normalized to sum to one and the backward messages are rescaled the same
//! way, which keeps every intermediate value in range for very long videos.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::QuantileBinner;
use crate::error::{Error, Result};

/// Number of hidden label values.
pub const NUM_LABELS: usize = 2;
/// Number of observation bins.
pub const NUM_SYMBOLS: usize = 3;

/// Row sums and the initial distribution must be within this of 1.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-12;

/// Frame label (0 or 1).
pub type Label = u8;
/// Discrete observation symbol in `0..NUM_SYMBOLS`.
pub type Symbol = u8;

pub type TransitionMatrix = [[f64; NUM_LABELS]; NUM_LABELS];
pub type EmissionMatrix = [[f64; NUM_SYMBOLS]; NUM_LABELS];

/// Full generative model: label chain, emissions and the score binning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct HmmParams {
    transition: TransitionMatrix,
    emission: EmissionMatrix,
    initial: [f64; NUM_LABELS],
    quantile_boundaries: [f64; 2],
}

#[derive(Deserialize)]
struct RawParams {
    transition: TransitionMatrix,
    emission: EmissionMatrix,
    initial: [f64; NUM_LABELS],
    quantile_boundaries: [f64; 2],
}

impl TryFrom<RawParams> for HmmParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        HmmParams::new(
            raw.transition,
            raw.emission,
            raw.initial,
            raw.quantile_boundaries,
        )
    }
}

fn check_distribution(what: &str, row: &[f64]) -> Result<()> {
    if row
        .iter()
        .any(|p| !p.is_finite() || !(0.0..=1.0).contains(p))
    {
        return Err(Error::InvalidParams(format!(
            "{what} has an entry outside [0, 1]: {row:?}"
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(Error::InvalidParams(format!(
            "{what} sums to {sum}, expected 1"
        )));
    }
    Ok(())
}

impl HmmParams {
    pub fn new(
        transition: TransitionMatrix,
        emission: EmissionMatrix,
        initial: [f64; NUM_LABELS],
        quantile_boundaries: [f64; 2],
    ) -> Result<Self> {
        for (y, row) in transition.iter().enumerate() {
            check_distribution(&format!("transition row {y}"), row)?;
        }
        for (y, row) in emission.iter().enumerate() {
            check_distribution(&format!("emission row {y}"), row)?;
        }
        check_distribution("initial distribution", &initial)?;
        let [b1, b2] = quantile_boundaries;
        if b1.is_nan() || b2.is_nan() || b1 > b2 {
            return Err(Error::InvalidParams(format!(
                "quantile boundaries must be ascending, got ({b1}, {b2})"
            )));
        }
        Ok(HmmParams {
            transition,
            emission,
            initial,
            quantile_boundaries,
        })
    }

    pub fn transition(&self) -> &TransitionMatrix {
        &self.transition
    }

    pub fn emission(&self) -> &EmissionMatrix {
        &self.emission
    }

    pub fn initial(&self) -> &[f64; NUM_LABELS] {
        &self.initial
    }

    pub fn quantile_boundaries(&self) -> [f64; 2] {
        self.quantile_boundaries
    }

    pub fn binner(&self) -> QuantileBinner {
        let [b1, b2] = self.quantile_boundaries;
        QuantileBinner::new(b1, b2).expect("boundaries validated at construction")
    }

    /// Same chain and emissions with the initial distribution replaced.
    pub fn with_initial(&self, initial: [f64; NUM_LABELS]) -> Result<Self> {
        HmmParams::new(
            self.transition,
            self.emission,
            initial,
            self.quantile_boundaries,
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params always serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Emission likelihood of `evidence` for each label; 1 when unobserved.
    #[inline]
    fn likelihood(&self, evidence: Option<Symbol>) -> [f64; NUM_LABELS] {
        match evidence {
            Some(x) => {
                let x = usize::from(x);
                [self.emission[0][x], self.emission[1][x]]
            }
            None => [1.0; NUM_LABELS],
        }
    }
}

/// Stationary distribution of a two-state chain.
///
/// A chain that never switches state (both off-diagonals zero) has no unique
/// stationary distribution; the uniform distribution is returned for it.
pub fn stationary_distribution(transition: &TransitionMatrix) -> [f64; NUM_LABELS] {
    let leave0 = transition[0][1];
    let leave1 = transition[1][0];
    let total = leave0 + leave1;
    if total <= 0.0 {
        return [0.5, 0.5];
    }
    [leave1 / total, leave0 / total]
}

/// Per-frame posterior `P(Y_t = 1 | observations)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Argument("a belief needs at least one frame".into()));
        }
        if let Some((t, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !(0.0..=1.0).contains(*p))
        {
            return Err(Error::Argument(format!(
                "belief entry {t} is {p}, outside [0, 1]"
            )));
        }
        Ok(Belief(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Hard labels: 1 exactly when the marginal is at least one half.
    pub fn predictions(&self) -> Vec<Label> {
        self.0.iter().map(|&p| Label::from(p >= 0.5)).collect()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for Belief {
    type Output = f64;

    fn index(&self, t: usize) -> &f64 {
        &self.0[t]
    }
}

/// One observed frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Raw score as received; absent for hypothetical observations.
    pub score: Option<f64>,
    pub symbol: Symbol,
}

/// Sparse evidence: at most one observation per frame index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationSet {
    entries: BTreeMap<usize, Observation>,
}

impl ObservationSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a received score, binning it with `binner`.
    pub fn record(&mut self, t: usize, score: f64, binner: &QuantileBinner) -> Result<Symbol> {
        let symbol = binner.discretize(score);
        self.insert(
            t,
            Observation {
                score: Some(score),
                symbol,
            },
        )?;
        Ok(symbol)
    }

    /// Records a bare symbol with no underlying score.
    pub fn insert_symbol(&mut self, t: usize, symbol: Symbol) -> Result<()> {
        self.insert(
            t,
            Observation {
                score: None,
                symbol,
            },
        )
    }

    fn insert(&mut self, t: usize, obs: Observation) -> Result<()> {
        if usize::from(obs.symbol) >= NUM_SYMBOLS {
            return Err(Error::Argument(format!(
                "observation symbol {} is not below {NUM_SYMBOLS}",
                obs.symbol
            )));
        }
        if self.entries.contains_key(&t) {
            return Err(Error::FrameAlreadyObserved(t));
        }
        self.entries.insert(t, obs);
        Ok(())
    }

    pub fn get(&self, t: usize) -> Option<&Observation> {
        self.entries.get(&t)
    }

    pub fn contains(&self, t: usize) -> bool {
        self.entries.contains_key(&t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Observation)> + '_ {
        self.entries.iter().map(|(&t, o)| (t, o))
    }

    /// Dense per-frame evidence for a `len`-frame video.
    pub fn dense(&self, len: usize) -> Result<Vec<Option<Symbol>>> {
        let mut evidence = vec![None; len];
        for (&t, obs) in &self.entries {
            let slot = evidence
                .get_mut(t)
                .ok_or(Error::IndexOutOfBounds { index: t, len })?;
            *slot = Some(obs.symbol);
        }
        Ok(evidence)
    }
}

impl FromIterator<(usize, Symbol)> for ObservationSet {
    /// Later duplicates of a frame index are ignored.
    fn from_iter<I: IntoIterator<Item = (usize, Symbol)>>(iter: I) -> Self {
        let mut set = ObservationSet::new();
        for (t, x) in iter {
            let _ = set.insert_symbol(t, x);
        }
        set
    }
}

/// Marginal label posteriors for a `len`-frame video given sparse observations.
pub fn forward_backward(
    params: &HmmParams,
    len: usize,
    observations: &ObservationSet,
) -> Result<Belief> {
    if len == 0 {
        return Err(Error::Argument("a video needs at least one frame".into()));
    }
    let evidence = observations.dense(len)?;
    let mut workspace = Workspace::default();
    let mut probs = Vec::new();
    workspace.posterior(params, &evidence, &mut probs)?;
    Ok(Belief(probs))
}

/// Reusable buffers for repeated forward-backward runs over dense evidence.
#[derive(Debug, Default)]
pub(crate) struct Workspace {
    forward: Vec<[f64; NUM_LABELS]>,
}

impl Workspace {
    /// Writes `P(Y_t = 1 | evidence)` for every frame into `out`.
    pub(crate) fn posterior(
        &mut self,
        params: &HmmParams,
        evidence: &[Option<Symbol>],
        out: &mut Vec<f64>,
    ) -> Result<()> {
        let len = evidence.len();
        debug_assert!(len > 0);
        let a = &params.transition;
        self.forward.clear();
        self.forward.reserve(len);
        out.clear();
        out.resize(len, 0.0);

        let lik = params.likelihood(evidence[0]);
        let mut msg = [params.initial[0] * lik[0], params.initial[1] * lik[1]];
        normalize(&mut msg)?;
        self.forward.push(msg);
        for &ev in &evidence[1..] {
            let lik = params.likelihood(ev);
            let prev = msg;
            msg = [
                (prev[0] * a[0][0] + prev[1] * a[1][0]) * lik[0],
                (prev[0] * a[0][1] + prev[1] * a[1][1]) * lik[1],
            ];
            normalize(&mut msg)?;
            self.forward.push(msg);
        }

        out[len - 1] = msg[1];
        let mut back = [1.0; NUM_LABELS];
        for t in (0..len - 1).rev() {
            let lik = params.likelihood(evidence[t + 1]);
            let next = [lik[0] * back[0], lik[1] * back[1]];
            back = [
                a[0][0] * next[0] + a[0][1] * next[1],
                a[1][0] * next[0] + a[1][1] * next[1],
            ];
            normalize(&mut back)?;
            let fwd = self.forward[t];
            let mut gamma = [fwd[0] * back[0], fwd[1] * back[1]];
            normalize(&mut gamma)?;
            out[t] = gamma[1];
        }
        Ok(())
    }
}

#[inline]
fn normalize(msg: &mut [f64; NUM_LABELS]) -> Result<()> {
    let total = msg[0] + msg[1];
    if !total.is_finite() || total <= 0.0 {
        return Err(Error::ImpossibleEvidence);
    }
    msg[0] /= total;
    msg[1] /= total;
    Ok(())
}

fn check_smoothing(smoothing: f64) -> Result<()> {
    if !smoothing.is_finite() || smoothing < 0.0 {
        return Err(Error::Argument(format!(
            "smoothing must be a finite nonnegative number, got {smoothing}"
        )));
    }
    Ok(())
}

fn check_label(label: Label) -> Result<usize> {
    if usize::from(label) < NUM_LABELS {
        Ok(usize::from(label))
    } else {
        Err(Error::Argument(format!("label {label} is not 0 or 1")))
    }
}

fn smoothed_row<const N: usize>(
    counts: [f64; N],
    smoothing: f64,
    matrix: &'static str,
    row: usize,
) -> Result<[f64; N]> {
    let total: f64 = counts.iter().sum::<f64>() + N as f64 * smoothing;
    if total <= 0.0 {
        return Err(Error::DegenerateRow { matrix, row });
    }
    Ok(counts.map(|c| (c + smoothing) / total))
}

/// Transition matrix from adjacent label pairs, with add-`smoothing` counts.
pub fn estimate_transition<S: AsRef<[Label]>>(
    label_sequences: &[S],
    smoothing: f64,
) -> Result<TransitionMatrix> {
    check_smoothing(smoothing)?;
    let mut counts = [[0.0; NUM_LABELS]; NUM_LABELS];
    let mut pairs = 0usize;
    for seq in label_sequences {
        for w in seq.as_ref().windows(2) {
            counts[check_label(w[0])?][check_label(w[1])?] += 1.0;
            pairs += 1;
        }
        for &y in seq.as_ref() {
            check_label(y)?;
        }
    }
    if pairs == 0 {
        return Err(Error::InsufficientData(
            "no sequence has two or more frames".into(),
        ));
    }
    let mut out = [[0.0; NUM_LABELS]; NUM_LABELS];
    for (y, row) in counts.into_iter().enumerate() {
        out[y] = smoothed_row(row, smoothing, "transition", y)?;
    }
    Ok(out)
}

/// Emission matrix from label/observation co-occurrences, with add-`smoothing` counts.
pub fn estimate_emission<L: AsRef<[Label]>, O: AsRef<[Symbol]>>(
    label_sequences: &[L],
    obs_sequences: &[O],
    smoothing: f64,
) -> Result<EmissionMatrix> {
    check_smoothing(smoothing)?;
    if label_sequences.len() != obs_sequences.len() {
        return Err(Error::MisalignedSequences(format!(
            "{} label sequences but {} observation sequences",
            label_sequences.len(),
            obs_sequences.len()
        )));
    }
    let mut counts = [[0.0; NUM_SYMBOLS]; NUM_LABELS];
    for (i, (labels, obs)) in label_sequences.iter().zip(obs_sequences).enumerate() {
        let (labels, obs) = (labels.as_ref(), obs.as_ref());
        if labels.len() != obs.len() {
            return Err(Error::MisalignedSequences(format!(
                "sequence {i}: {} labels but {} observations",
                labels.len(),
                obs.len()
            )));
        }
        for (&y, &x) in labels.iter().zip(obs) {
            let x = usize::from(x);
            if x >= NUM_SYMBOLS {
                return Err(Error::Argument(format!(
                    "observation symbol {x} is not below {NUM_SYMBOLS}"
                )));
            }
            counts[check_label(y)?][x] += 1.0;
        }
    }
    let mut out = [[0.0; NUM_SYMBOLS]; NUM_LABELS];
    for (y, row) in counts.into_iter().enumerate() {
        out[y] = smoothed_row(row, smoothing, "emission", y)?;
    }
    Ok(out)
}

/// Empirical label frequencies over every frame of every sequence.
pub fn estimate_initial<S: AsRef<[Label]>>(label_sequences: &[S]) -> Result<[f64; NUM_LABELS]> {
    let mut counts = [0.0; NUM_LABELS];
    for seq in label_sequences {
        for &y in seq.as_ref() {
            counts[check_label(y)?] += 1.0;
        }
    }
    let total: f64 = counts.iter().sum();
    if total == 0.0 {
        return Err(Error::InsufficientData("no labelled frames".into()));
    }
    Ok(counts.map(|c| c / total))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(
        transition: TransitionMatrix,
        emission: EmissionMatrix,
        initial: [f64; 2],
    ) -> HmmParams {
        HmmParams::new(transition, emission, initial, [1.0 / 3.0, 2.0 / 3.0]).unwrap()
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn transition_counts_adjacent_pairs() {
        let a = estimate_transition(&[vec![0, 0, 1, 1, 1, 0]], 0.0).unwrap();
        assert_close(a[0][0], 0.5, 1e-15);
        assert_close(a[0][1], 0.5, 1e-15);
        assert_close(a[1][0], 1.0 / 3.0, 1e-15);
        assert_close(a[1][1], 2.0 / 3.0, 1e-15);
    }

    #[test]
    fn transition_add_one_smoothing_fills_unseen_row() {
        let a = estimate_transition(&[vec![0, 0, 0]], 1.0).unwrap();
        assert_eq!(a, [[0.75, 0.25], [0.5, 0.5]]);
    }

    #[test]
    fn transition_off_diagonal_only() {
        let a = estimate_transition(&[vec![0, 1], vec![1, 0]], 0.0).unwrap();
        assert_eq!(a, [[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn transition_errors() {
        let empty: [Vec<Label>; 0] = [];
        assert!(matches!(
            estimate_transition(&empty, 1.0),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            estimate_transition(&[vec![1], vec![0]], 1.0),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            estimate_transition(&[vec![0, 0, 0]], 0.0),
            Err(Error::DegenerateRow { row: 1, .. })
        ));
        assert!(matches!(
            estimate_transition(&[vec![0, 2]], 0.0),
            Err(Error::Argument(_))
        ));
        assert!(estimate_transition(&[vec![0, 1]], -1.0).is_err());
    }

    #[test]
    fn emission_counts_cooccurrence() {
        let e = estimate_emission(&[vec![0, 0, 1]], &[vec![0, 1, 2]], 0.0).unwrap();
        assert_eq!(e, [[0.5, 0.5, 0.0], [0.0, 0.0, 1.0]]);

        let e = estimate_emission(&[vec![1]], &[vec![2]], 1.0).unwrap();
        for p in e[0] {
            assert_close(p, 1.0 / 3.0, 1e-15);
        }
        assert_eq!(e[1], [0.25, 0.25, 0.5]);

        let e = estimate_emission(&[vec![0, 1]], &[vec![0, 2]], 0.0).unwrap();
        assert_eq!(e, [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn emission_errors() {
        assert!(matches!(
            estimate_emission(&[vec![0, 1]], &[vec![0]], 1.0),
            Err(Error::MisalignedSequences(_))
        ));
        assert!(matches!(
            estimate_emission(&[vec![0, 1]], &[vec![0, 1], vec![2]], 1.0),
            Err(Error::MisalignedSequences(_))
        ));
        assert!(matches!(
            estimate_emission(&[vec![1]], &[vec![2]], 0.0),
            Err(Error::DegenerateRow { row: 0, .. })
        ));
    }

    #[test]
    fn initial_is_label_frequency() {
        assert_eq!(
            estimate_initial(&[vec![0, 1, 1], vec![1]]).unwrap(),
            [0.25, 0.75]
        );
    }

    #[test]
    fn params_validation() {
        let ok = params(
            [[0.9, 0.1], [0.2, 0.8]],
            [[0.6, 0.3, 0.1], [0.1, 0.3, 0.6]],
            [0.5, 0.5],
        );
        assert_eq!(ok.binner().boundaries(), [1.0 / 3.0, 2.0 / 3.0]);
        assert!(HmmParams::new(
            [[0.9, 0.2], [0.2, 0.8]],
            [[0.6, 0.3, 0.1], [0.1, 0.3, 0.6]],
            [0.5, 0.5],
            [0.0, 1.0]
        )
        .is_err());
        assert!(HmmParams::new(
            [[1.1, -0.1], [0.2, 0.8]],
            [[0.6, 0.3, 0.1], [0.1, 0.3, 0.6]],
            [0.5, 0.5],
            [0.0, 1.0]
        )
        .is_err());
        assert!(HmmParams::new(
            [[0.9, 0.1], [0.2, 0.8]],
            [[0.6, 0.3, 0.1], [0.1, 0.3, 0.6]],
            [0.5, 0.5],
            [0.7, 0.2]
        )
        .is_err());
    }

    #[test]
    fn params_json_layout() {
        let p = params(
            [[0.9, 0.1], [0.2, 0.8]],
            [[0.6, 0.3, 0.1], [0.1, 0.3, 0.6]],
            [0.5, 0.5],
        );
        let value: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
        assert_eq!(value["transition"][1][0], 0.2);
        assert_eq!(value["emission"][0][2], 0.1);
        assert_eq!(value["initial"][1], 0.5);
        assert_eq!(value["quantile_boundaries"].as_array().unwrap().len(), 2);
        assert_eq!(HmmParams::from_json(&p.to_json()).unwrap(), p);

        let bad = r#"{"transition":[[0.5,0.6],[0.5,0.5]],"emission":[[1,0,0],[0,0,1]],
                      "initial":[0.5,0.5],"quantile_boundaries":[0,1]}"#;
        assert!(HmmParams::from_json(bad).is_err());
    }

    #[test]
    fn stationary_of_two_state_chain() {
        let pi = stationary_distribution(&[[0.98, 0.02], [0.04, 0.96]]);
        assert_close(pi[0], 2.0 / 3.0, 1e-15);
        assert_close(pi[1], 1.0 / 3.0, 1e-15);
        assert_eq!(
            stationary_distribution(&[[1.0, 0.0], [0.0, 1.0]]),
            [0.5, 0.5]
        );
    }

    #[test]
    fn no_evidence_absorbing_chain_keeps_prior() {
        let p = params(
            [[1.0, 0.0], [0.0, 1.0]],
            [[0.2, 0.3, 0.5], [0.5, 0.3, 0.2]],
            [0.3, 0.7],
        );
        let belief = forward_backward(&p, 5, &ObservationSet::new()).unwrap();
        for &b in belief.probs() {
            assert_close(b, 0.7, 1e-15);
        }
    }

    #[test]
    fn single_frame_is_bayes_rule() {
        let p = params(
            [[0.9, 0.1], [0.2, 0.8]],
            [[0.6, 0.3, 0.1], [0.1, 0.3, 0.6]],
            [0.4, 0.6],
        );
        for x in 0..3u8 {
            let obs: ObservationSet = [(0, x)].into_iter().collect();
            let belief = forward_backward(&p, 1, &obs).unwrap();
            let e = p.emission();
            let num = 0.6 * e[1][usize::from(x)];
            let expected = num / (0.4 * e[0][usize::from(x)] + num);
            assert_close(belief[0], expected, 1e-15);
        }
    }

    #[test]
    fn stationary_prior_gives_flat_marginals() {
        let a = [[0.93, 0.07], [0.11, 0.89]];
        let p = params(
            a,
            [[0.6, 0.3, 0.1], [0.1, 0.3, 0.6]],
            stationary_distribution(&a),
        );
        let belief = forward_backward(&p, 40, &ObservationSet::new()).unwrap();
        let first = belief[0];
        for &b in belief.probs() {
            assert_close(b, first, 1e-12);
        }
    }

    #[test]
    fn out_of_range_observation_is_rejected() {
        let p = params(
            [[0.9, 0.1], [0.2, 0.8]],
            [[0.6, 0.3, 0.1], [0.1, 0.3, 0.6]],
            [0.5, 0.5],
        );
        let obs: ObservationSet = [(3, 1)].into_iter().collect();
        assert!(matches!(
            forward_backward(&p, 3, &obs),
            Err(Error::IndexOutOfBounds { index: 3, len: 3 })
        ));
        assert!(forward_backward(&p, 0, &ObservationSet::new()).is_err());
    }

    #[test]
    fn contradictory_evidence_is_reported() {
        let p = params(
            [[1.0, 0.0], [0.0, 1.0]],
            [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            [0.5, 0.5],
        );
        let obs: ObservationSet = [(0, 0), (2, 2)].into_iter().collect();
        assert!(matches!(
            forward_backward(&p, 3, &obs),
            Err(Error::ImpossibleEvidence)
        ));
    }

    #[test]
    fn long_sequences_stay_finite() {
        let p = params(
            [[0.99, 0.01], [0.02, 0.98]],
            [[0.8, 0.15, 0.05], [0.05, 0.15, 0.8]],
            [0.5, 0.5],
        );
        let len = 200_000;
        let obs: ObservationSet = (0..len).map(|t| (t, ((t / 5000) % 3) as u8)).collect();
        let belief = forward_backward(&p, len, &obs).unwrap();
        assert!(belief
            .probs()
            .iter()
            .all(|b| b.is_finite() && (0.0..=1.0).contains(b)));
    }

    #[test]
    fn duplicate_observation_rejected() {
        let mut obs = ObservationSet::new();
        obs.insert_symbol(2, 1).unwrap();
        assert!(matches!(
            obs.insert_symbol(2, 0),
            Err(Error::FrameAlreadyObserved(2))
        ));
        assert!(obs.insert_symbol(4, 3).is_err());
    }

    #[test]
    fn predictions_threshold_at_half_inclusive() {
        let b = Belief::new(vec![0.8, 0.2, 0.6, 0.5, 0.4999]).unwrap();
        assert_eq!(b.predictions(), vec![1, 0, 1, 1, 0]);
        assert!(Belief::new(vec![1.2]).is_err());
        assert!(Belief::new(vec![]).is_err());
    }
}
