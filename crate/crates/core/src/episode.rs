//! One bandwidth-limited pass over a video.
//!
//! The agent may request `floor(B * T)` of the `T` frames. After every
//! received score it rebins, reruns forward-backward, and asks the planner
//! for the next frame. When the budget is spent each frame is classified by
//! thresholding its marginal at one half.

use serde::{Deserialize, Serialize};

use crate::data::QuantileBinner;
use crate::error::{Error, Result};
use crate::hmm::{forward_backward, Belief, HmmParams, Label, ObservationSet, Symbol};
use crate::policy::{Planner, QueryPlan};

/// Absorbs representation error in `B * T` before flooring (0.1 * 300 and the like).
const BUDGET_SLACK: f64 = 1e-9;

/// A store of frame scores that can be requested one at a time.
pub trait FrameSource {
    fn frame_count(&self) -> usize;

    /// Requests the score of frame `t`. Each successful call counts as one request.
    fn fetch(&mut self, t: usize) -> Result<f64>;

    /// Number of successful fetches so far.
    fn requests(&self) -> u64;
}

impl<S: FrameSource + ?Sized> FrameSource for &mut S {
    fn frame_count(&self) -> usize {
        (**self).frame_count()
    }

    fn fetch(&mut self, t: usize) -> Result<f64> {
        (**self).fetch(t)
    }

    fn requests(&self) -> u64 {
        (**self).requests()
    }
}

/// In-process source over a borrowed score vector.
#[derive(Debug, Clone)]
pub struct LocalFrameSource<'a> {
    scores: &'a [f64],
    requests: u64,
}

impl<'a> LocalFrameSource<'a> {
    pub fn new(scores: &'a [f64]) -> Self {
        LocalFrameSource {
            scores,
            requests: 0,
        }
    }
}

impl FrameSource for LocalFrameSource<'_> {
    fn frame_count(&self) -> usize {
        self.scores.len()
    }

    fn fetch(&mut self, t: usize) -> Result<f64> {
        let score = *self.scores.get(t).ok_or(Error::IndexOutOfBounds {
            index: t,
            len: self.scores.len(),
        })?;
        self.requests += 1;
        Ok(score)
    }

    fn requests(&self) -> u64 {
        self.requests
    }
}

/// Exposes frames `start..start + len` of another source as frames `0..len`.
#[derive(Debug)]
pub struct WindowSource<S> {
    inner: S,
    start: usize,
    len: usize,
    requests: u64,
}

impl<S: FrameSource> WindowSource<S> {
    pub fn new(inner: S, start: usize, len: usize) -> Result<Self> {
        let total = inner.frame_count();
        if len == 0 || start + len > total {
            return Err(Error::Argument(format!(
                "window {start}..{} does not fit a {total}-frame source",
                start + len
            )));
        }
        Ok(WindowSource {
            inner,
            start,
            len,
            requests: 0,
        })
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: FrameSource> FrameSource for WindowSource<S> {
    fn frame_count(&self) -> usize {
        self.len
    }

    fn fetch(&mut self, t: usize) -> Result<f64> {
        if t >= self.len {
            return Err(Error::IndexOutOfBounds {
                index: t,
                len: self.len,
            });
        }
        let score = self.inner.fetch(self.start + t)?;
        self.requests += 1;
        Ok(score)
    }

    fn requests(&self) -> u64 {
        self.requests
    }
}

/// One requested frame, serialized as `[index, score, symbol]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, f64, Symbol)", into = "(usize, f64, Symbol)")]
pub struct QueriedFrame {
    pub index: usize,
    pub score: f64,
    pub symbol: Symbol,
}

impl From<(usize, f64, Symbol)> for QueriedFrame {
    fn from((index, score, symbol): (usize, f64, Symbol)) -> Self {
        QueriedFrame {
            index,
            score,
            symbol,
        }
    }
}

impl From<QueriedFrame> for (usize, f64, Symbol) {
    fn from(q: QueriedFrame) -> Self {
        (q.index, q.score, q.symbol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub queries: Vec<QueriedFrame>,
    #[serde(rename = "belief")]
    pub final_belief: Belief,
    pub predictions: Vec<Label>,
    /// Fraction of correctly classified frames; `None` without ground truth.
    pub accuracy: Option<f64>,
    pub budget_used: usize,
}

impl EpisodeResult {
    fn snapshot(queries: &[QueriedFrame], belief: &Belief, labels: Option<&[Label]>) -> Self {
        let predictions = belief.predictions();
        let accuracy = labels.map(|labels| accuracy(labels, &predictions));
        EpisodeResult {
            queries: queries.to_vec(),
            final_belief: belief.clone(),
            predictions,
            accuracy,
            budget_used: queries.len(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("episode results always serialize")
    }
}

/// Fraction of positions where `predictions` matches `labels`.
pub fn accuracy(labels: &[Label], predictions: &[Label]) -> f64 {
    debug_assert_eq!(labels.len(), predictions.len());
    let hits = labels
        .iter()
        .zip(predictions)
        .filter(|(a, b)| a == b)
        .count();
    hits as f64 / labels.len() as f64
}

/// Number of frames the agent may request: `min(floor(B * T), T)`.
pub fn frame_budget(bandwidth_ratio: f64, frames: usize) -> Result<usize> {
    if !(0.0..=1.0).contains(&bandwidth_ratio) {
        return Err(Error::Argument(format!(
            "bandwidth ratio must lie in [0, 1], got {bandwidth_ratio}"
        )));
    }
    let budget = (bandwidth_ratio * frames as f64 + BUDGET_SLACK).floor() as usize;
    Ok(budget.min(frames))
}

/// Evenly spaced frames `round(i * T / (k + 1))` for `i = 1..=k`.
///
/// A budget covering the whole video requests every frame, since the spacing
/// formula collides once `k` reaches `T`.
pub fn uniform_indices(frames: usize, budget: usize) -> Vec<usize> {
    if budget >= frames {
        return (0..frames).collect();
    }
    let step = frames as f64 / (budget + 1) as f64;
    let mut out: Vec<usize> = (1..=budget)
        .map(|i| ((i as f64 * step).round() as usize).min(frames - 1))
        .collect();
    out.dedup();
    out
}

fn check_inputs<S: FrameSource>(source: &S, labels: Option<&[Label]>) -> Result<usize> {
    let frames = source.frame_count();
    if frames == 0 {
        return Err(Error::Argument("frame source is empty".into()));
    }
    if let Some(labels) = labels {
        if labels.len() != frames {
            return Err(Error::MisalignedSequences(format!(
                "{} labels for a {frames}-frame source",
                labels.len()
            )));
        }
    }
    Ok(frames)
}

fn abort(err: Error, queries: &[QueriedFrame], belief: &Belief, labels: Option<&[Label]>) -> Error {
    let message = match err {
        Error::Transport { message, .. } => message,
        other => other.to_string(),
    };
    Error::Transport {
        message,
        partial: Some(Box::new(EpisodeResult::snapshot(queries, belief, labels))),
    }
}

/// Greedy episode, snapshotting the state each time the number of completed
/// requests reaches one of `budgets` (ascending).
///
/// Greedy selection is deterministic, so the query sequence for a larger
/// budget extends the sequence for any smaller one; a single pass therefore
/// yields the result of [`run_episode`] at every budget.
pub fn run_episode_at_budgets<S: FrameSource>(
    params: &HmmParams,
    binner: &QuantileBinner,
    mut source: S,
    budgets: &[usize],
    labels: Option<&[Label]>,
    mut trace: Option<&mut Vec<QueryPlan>>,
) -> Result<Vec<EpisodeResult>> {
    let frames = check_inputs(&source, labels)?;
    if budgets.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Argument("budgets must be ascending".into()));
    }
    let Some(&max_budget) = budgets.last() else {
        return Ok(Vec::new());
    };
    if max_budget > frames {
        return Err(Error::BudgetExceedsFrames);
    }

    let mut planner = Planner::new(params, frames, &ObservationSet::new())?;
    let mut belief = planner.belief()?;
    let mut queries: Vec<QueriedFrame> = Vec::with_capacity(max_budget);
    let mut results = Vec::with_capacity(budgets.len());
    let mut pending = budgets.iter().peekable();
    loop {
        while pending.next_if(|&&b| b == queries.len()).is_some() {
            results.push(EpisodeResult::snapshot(&queries, &belief, labels));
        }
        if queries.len() == max_budget {
            break;
        }
        let plan = planner.plan(&belief)?;
        let t = plan.next;
        if let Some(trace) = trace.as_deref_mut() {
            trace.push(plan);
        }
        let score = match source.fetch(t) {
            Ok(score) => score,
            Err(err) => return Err(abort(err, &queries, &belief, labels)),
        };
        let symbol = binner.discretize(score);
        planner.observe(t, symbol);
        queries.push(QueriedFrame {
            index: t,
            score,
            symbol,
        });
        belief = planner.belief()?;
    }
    Ok(results)
}

/// Runs the greedy agent with bandwidth ratio `B` and classifies every frame.
pub fn run_episode<S: FrameSource>(
    params: &HmmParams,
    binner: &QuantileBinner,
    source: S,
    bandwidth_ratio: f64,
    labels: Option<&[Label]>,
) -> Result<EpisodeResult> {
    let budget = frame_budget(bandwidth_ratio, source.frame_count())?;
    let mut results = run_episode_at_budgets(params, binner, source, &[budget], labels, None)?;
    Ok(results.pop().expect("one budget yields one result"))
}

/// [`run_episode`] that also returns the planner output behind every request.
pub fn run_episode_traced<S: FrameSource>(
    params: &HmmParams,
    binner: &QuantileBinner,
    source: S,
    bandwidth_ratio: f64,
    labels: Option<&[Label]>,
) -> Result<(EpisodeResult, Vec<QueryPlan>)> {
    let budget = frame_budget(bandwidth_ratio, source.frame_count())?;
    let mut trace = Vec::with_capacity(budget);
    let mut results =
        run_episode_at_budgets(params, binner, source, &[budget], labels, Some(&mut trace))?;
    Ok((results.pop().expect("one budget yields one result"), trace))
}

/// Control policy: same budget, evenly spaced requests.
pub fn uniform_baseline_episode<S: FrameSource>(
    params: &HmmParams,
    binner: &QuantileBinner,
    mut source: S,
    bandwidth_ratio: f64,
    labels: Option<&[Label]>,
) -> Result<EpisodeResult> {
    let frames = check_inputs(&source, labels)?;
    let budget = frame_budget(bandwidth_ratio, frames)?;
    let mut observations = ObservationSet::new();
    let mut queries = Vec::with_capacity(budget);
    let mut belief = forward_backward(params, frames, &observations)?;
    for t in uniform_indices(frames, budget) {
        let score = match source.fetch(t) {
            Ok(score) => score,
            Err(err) => return Err(abort(err, &queries, &belief, labels)),
        };
        let symbol = observations.record(t, score, binner)?;
        queries.push(QueriedFrame {
            index: t,
            score,
            symbol,
        });
        belief = forward_backward(params, frames, &observations)?;
    }
    Ok(EpisodeResult::snapshot(&queries, &belief, labels))
}

/// Belief and accuracy with every frame observed.
pub fn fully_observed_episode(
    params: &HmmParams,
    binner: &QuantileBinner,
    scores: &[f64],
    labels: Option<&[Label]>,
) -> Result<EpisodeResult> {
    let mut source = LocalFrameSource::new(scores);
    uniform_baseline_episode(params, binner, &mut source, 1.0, labels)
}
