//! Greedy query selection by expected entropy reduction.
//!
//! The loss of a belief `p` over `T` frames is its mean per-frame binary
//! entropy (nats). For a candidate frame `q`, the expected loss is the
//! average of that quantity over the three possible observations at `q`,
//! each weighted by its model predictive probability, with the belief
//! recomputed by forward-backward for every outcome. The candidate with
//! the smallest expected loss is requested next.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hmm::{
    forward_backward, Belief, HmmParams, ObservationSet, Symbol, Workspace, NUM_SYMBOLS,
};

/// Probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]` before taking logs
/// against hard labels.
pub const PROB_FLOOR: f64 = 1e-12;

/// Expected losses closer than this are treated as tied; ties go to the lower index.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Entropy of a Bernoulli(p) variable in nats, with `0 ln 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())
}

/// Mean per-frame expected cross entropy of a belief, in nats.
pub fn expected_cross_entropy(probs: &[f64]) -> f64 {
    if probs.is_empty() {
        return 0.0;
    }
    probs.iter().map(|&p| binary_entropy(p)).sum::<f64>() / probs.len() as f64
}

/// Mean per-frame cross entropy of a belief against known labels, in nats.
pub fn cross_entropy(labels: &[u8], probs: &[f64]) -> f64 {
    debug_assert_eq!(labels.len(), probs.len());
    if probs.is_empty() {
        return 0.0;
    }
    let total: f64 = labels
        .iter()
        .zip(probs)
        .map(|(&y, &p)| {
            let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    total / probs.len() as f64
}

/// Predictive distribution of the observation at a frame whose label
/// marginal is `p_q`.
pub fn observation_predictive(params: &HmmParams, p_q: f64) -> [f64; NUM_SYMBOLS] {
    let e = params.emission();
    std::array::from_fn(|x| (1.0 - p_q) * e[0][x] + p_q * e[1][x])
}

/// Expected losses for every frame plus the chosen next query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryPlan {
    pub next: usize,
    /// `None` for frames that are already observed.
    pub expected_losses: Vec<Option<f64>>,
}

/// Evaluates hypothetical observations against a fixed set of real ones.
pub(crate) struct Planner<'a> {
    params: &'a HmmParams,
    evidence: Vec<Option<Symbol>>,
    workspace: Workspace,
    scratch: Vec<f64>,
}

impl<'a> Planner<'a> {
    pub(crate) fn new(
        params: &'a HmmParams,
        len: usize,
        observations: &ObservationSet,
    ) -> Result<Self> {
        if len == 0 {
            return Err(Error::Argument("a video needs at least one frame".into()));
        }
        Ok(Planner {
            params,
            evidence: observations.dense(len)?,
            workspace: Workspace::default(),
            scratch: Vec::with_capacity(len),
        })
    }

    pub(crate) fn belief(&mut self) -> Result<Belief> {
        let mut probs = Vec::with_capacity(self.evidence.len());
        self.workspace
            .posterior(self.params, &self.evidence, &mut probs)?;
        Belief::new(probs)
    }

    /// Expected loss of observing frame `q`, whose current marginal is `p_q`.
    pub(crate) fn expected_loss(&mut self, q: usize, p_q: f64) -> Result<f64> {
        debug_assert!(self.evidence[q].is_none());
        let predictive = observation_predictive(self.params, p_q);
        let mut total = 0.0;
        for (x, &weight) in predictive.iter().enumerate() {
            if weight <= 0.0 {
                continue;
            }
            self.evidence[q] = Some(x as Symbol);
            let outcome = self
                .workspace
                .posterior(self.params, &self.evidence, &mut self.scratch);
            self.evidence[q] = None;
            outcome?;
            total += weight * expected_cross_entropy(&self.scratch);
        }
        Ok(total)
    }

    pub(crate) fn plan(&mut self, belief: &Belief) -> Result<QueryPlan> {
        let len = self.evidence.len();
        let mut expected_losses = vec![None; len];
        let mut best: Option<(usize, f64)> = None;
        for q in 0..len {
            if self.evidence[q].is_some() {
                continue;
            }
            let loss = self.expected_loss(q, belief[q])?;
            expected_losses[q] = Some(loss);
            match best {
                Some((_, best_loss)) if loss >= best_loss - TIE_TOLERANCE => {}
                _ => best = Some((q, loss)),
            }
        }
        let (next, _) = best.ok_or(Error::BudgetExceedsFrames)?;
        Ok(QueryPlan {
            next,
            expected_losses,
        })
    }

    pub(crate) fn observe(&mut self, t: usize, symbol: Symbol) {
        self.evidence[t] = Some(symbol);
    }
}

/// Expected loss after requesting unobserved frame `q`.
pub fn expected_loss_for_query(
    params: &HmmParams,
    len: usize,
    observations: &ObservationSet,
    q: usize,
    current_belief: &Belief,
) -> Result<f64> {
    if q >= len {
        return Err(Error::IndexOutOfBounds { index: q, len });
    }
    if observations.contains(q) {
        return Err(Error::FrameAlreadyObserved(q));
    }
    if current_belief.len() != len {
        return Err(Error::MisalignedSequences(format!(
            "belief covers {} frames, video has {len}",
            current_belief.len()
        )));
    }
    Planner::new(params, len, observations)?.expected_loss(q, current_belief[q])
}

/// Chooses the unobserved frame with the smallest expected loss.
pub fn select_next_query(
    params: &HmmParams,
    len: usize,
    observations: &ObservationSet,
) -> Result<QueryPlan> {
    let belief = forward_backward(params, len, observations)?;
    let mut planner = Planner::new(params, len, observations)?;
    planner.plan(&belief)
}
