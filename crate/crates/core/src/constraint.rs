//! Logic-constrained action selection on top of the Q-learning agent.
//!
//! * **Shield**: walk the agent's candidate ranking and execute the first
//!   action whose contradiction is below `α`.
//! * **Guide**: score every action by `v(a) = (lower + upper)/2 − ctrd(a)`,
//!   softmax the scores into `P(a|s)`, and pick `argmax P·Q` when greedy or
//!   sample from `P` when exploring.
//!
//! An action is "safe" when its contradiction is strictly below `α`. The
//! contradiction of an action is measured by pinning its proposition true
//! and running inference, so a rule that forces the action false yields a
//! contradiction of 1.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{ranked_actions, FeatureVector, QFunction};
use crate::logic::{LogicError, LogicGraph, PropositionState, TruthBounds};
use crate::world::Action;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShieldConfig {
    pub alpha: f64,
    pub max_rejections: usize,
}

impl Default for ShieldConfig {
    fn default() -> Self {
        Self { alpha: 1.0, max_rejections: Action::COUNT }
    }
}

impl ShieldConfig {
    pub fn validate(&self) -> Result<(), LogicError> {
        if self.alpha.is_nan() || self.alpha <= 0.0 {
            return Err(LogicError::InvalidArgument("alpha must be positive".into()));
        }
        if self.max_rejections == 0 || self.max_rejections > Action::COUNT {
            return Err(LogicError::InvalidArgument(format!(
                "max_rejections must lie in 1..={}",
                Action::COUNT
            )));
        }
        Ok(())
    }
}

/// Which bounds feed the `(lower + upper)/2` term of the guide score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthTerm {
    /// Bounds from inference on the state alone. Unconstrained actions score
    /// 0.5 and rule-supported ones 1.0, so the guide recommends positively.
    #[default]
    Unpinned,
    /// Bounds from the same query that pins the action true.
    Pinned,
}

/// Logic view of all five actions in one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionAssessment {
    pub contradiction: [f64; Action::COUNT],
    pub unpinned: [TruthBounds; Action::COUNT],
    pub pinned: [TruthBounds; Action::COUNT],
}

impl ActionAssessment {
    pub fn value(&self, action: Action, term: TruthTerm) -> f64 {
        let i = action.index();
        let bounds = match term {
            TruthTerm::Unpinned => self.unpinned[i],
            TruthTerm::Pinned => self.pinned[i],
        };
        bounds.midpoint() - self.contradiction[i]
    }

    pub fn values(&self, term: TruthTerm) -> [f64; Action::COUNT] {
        Action::ALL.map(|a| self.value(a, term))
    }
}

/// Adds any action proposition the rule base does not mention, so every
/// action can be queried.
pub fn ensure_action_propositions(graph: &mut LogicGraph) -> Result<(), LogicError> {
    for a in Action::ALL {
        graph.add_proposition(a.proposition())?;
    }
    Ok(())
}

/// One unpinned query plus one pinned query per action, each from a fresh
/// reset so pins never leak between actions.
pub fn assess(graph: &mut LogicGraph, state: &PropositionState) -> Result<ActionAssessment, LogicError> {
    ensure_action_propositions(graph)?;
    let ids = Action::ALL.map(|a| graph.proposition(a.proposition()).expect("ensured above"));
    graph.infer_default(state)?;
    let mut unpinned = [TruthBounds::UNKNOWN; Action::COUNT];
    for (slot, id) in unpinned.iter_mut().zip(ids) {
        *slot = graph.bounds(id)?;
    }
    let mut contradiction = [0.0; Action::COUNT];
    let mut pinned = [TruthBounds::UNKNOWN; Action::COUNT];
    for i in 0..Action::COUNT {
        contradiction[i] = graph.action_contradiction(ids[i], state)?;
        pinned[i] = graph.bounds(ids[i])?;
    }
    graph.reset_bounds();
    Ok(ActionAssessment { contradiction, unpinned, pinned })
}

/// `v(a, s) = (lower + upper)/2 − ctrd(a, s)`.
pub fn guide_value(graph: &mut LogicGraph, state: &PropositionState, action: Action, term: TruthTerm) -> Result<f64, LogicError> {
    Ok(assess(graph, state)?.value(action, term))
}

/// Numerically stable softmax.
pub fn softmax(values: &[f64]) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuideDistribution {
    pub probabilities: [f64; Action::COUNT],
}

impl GuideDistribution {
    pub fn from_values(values: &[f64; Action::COUNT]) -> Self {
        let p = softmax(values);
        Self { probabilities: std::array::from_fn(|i| p[i]) }
    }

    pub fn from_assessment(assessment: &ActionAssessment, term: TruthTerm) -> Self {
        Self::from_values(&assessment.values(term))
    }

    pub fn probability(&self, action: Action) -> f64 {
        self.probabilities[action.index()]
    }
}

pub fn guide_distribution(graph: &mut LogicGraph, state: &PropositionState, term: TruthTerm) -> Result<GuideDistribution, LogicError> {
    Ok(GuideDistribution::from_assessment(&assess(graph, state)?, term))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuideDecision {
    pub action: Action,
    pub explored: bool,
    /// A negative Q value took part in the greedy product comparison.
    pub negative_q: bool,
}

/// Draws `ζ`; when `ζ ≥ ε` returns `argmax P(a)·Q(a)` (ties by higher `P`,
/// then canonical order), otherwise samples an action from `P`.
pub fn guide_pick<R: Rng + ?Sized>(dist: &GuideDistribution, q: &[f64; Action::COUNT], epsilon: f64, rng: &mut R) -> GuideDecision {
    let zeta: f64 = rng.gen();
    if zeta >= epsilon {
        let p = &dist.probabilities;
        let mut best = 0;
        for i in 1..Action::COUNT {
            let (cand, cur) = ((p[i] * q[i], p[i]), (p[best] * q[best], p[best]));
            if cand.0 > cur.0 || (cand.0 == cur.0 && cand.1 > cur.1) {
                best = i;
            }
        }
        let negative_q = q.iter().any(|v| *v < 0.0);
        if negative_q {
            log::debug!("negative Q value in guided argmax: {q:?}");
        }
        GuideDecision { action: Action::ALL[best], explored: false, negative_q }
    } else {
        let index = WeightedIndex::new(dist.probabilities).expect("softmax output is a valid distribution");
        GuideDecision { action: Action::ALL[index.sample(rng)], explored: true, negative_q: false }
    }
}

pub fn guide_select<R: Rng + ?Sized>(
    graph: &mut LogicGraph,
    state: &PropositionState,
    qf: &QFunction,
    features: &FeatureVector,
    epsilon: f64,
    term: TruthTerm,
    rng: &mut R,
) -> Result<GuideDecision, LogicError> {
    let dist = guide_distribution(graph, state, term)?;
    Ok(guide_pick(&dist, &qf.q_values(features), epsilon, rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShieldDecision {
    pub action: Action,
    /// Candidates turned down before `action`, in order.
    pub rejected: Vec<Action>,
    /// Contradiction of every examined candidate, `action` included.
    pub contradictions: Vec<(Action, f64)>,
    /// Every examined candidate was unsafe and `action` is the last one.
    pub fallback: bool,
}

/// Walks `candidates` in order and returns the first safe one. Once
/// `max_rejections` candidates have been found unsafe (or the list runs
/// out) the last examined candidate is executed anyway.
pub fn shield_filter(contradiction: &[f64; Action::COUNT], candidates: &[Action], cfg: &ShieldConfig) -> ShieldDecision {
    assert!(!candidates.is_empty(), "shield needs at least one candidate");
    let mut rejected = Vec::new();
    let mut contradictions = Vec::new();
    for (i, &action) in candidates.iter().enumerate() {
        let c = contradiction[action.index()];
        contradictions.push((action, c));
        if c < cfg.alpha {
            return ShieldDecision { action, rejected, contradictions, fallback: false };
        }
        if rejected.len() + 1 >= cfg.max_rejections || i + 1 == candidates.len() {
            return ShieldDecision { action, rejected, contradictions, fallback: true };
        }
        rejected.push(action);
    }
    unreachable!("loop returns on the last candidate")
}

/// ε-greedy candidate ranking: a uniform shuffle when exploring, otherwise
/// actions by descending Q.
pub fn candidate_ranking<R: Rng + ?Sized>(q: &[f64; Action::COUNT], epsilon: f64, rng: &mut R) -> [Action; Action::COUNT] {
    let zeta: f64 = rng.gen();
    if zeta < epsilon {
        let mut order = Action::ALL;
        order.shuffle(rng);
        order
    } else {
        ranked_actions(q)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn shield_select<R: Rng + ?Sized>(
    graph: &mut LogicGraph,
    state: &PropositionState,
    qf: &QFunction,
    features: &FeatureVector,
    epsilon: f64,
    cfg: &ShieldConfig,
    rng: &mut R,
) -> Result<ShieldDecision, LogicError> {
    cfg.validate()?;
    let assessment = assess(graph, state)?;
    let ranking = candidate_ranking(&qf.q_values(features), epsilon, rng);
    Ok(shield_filter(&assessment.contradiction, &ranking, cfg))
}

/// A rule graph plus a memo of per-state assessments. The graph is never
/// trained during reinforcement learning, so assessments are a pure
/// function of the grounded state.
#[derive(Debug, Clone)]
pub struct LogicAdvisor {
    graph: LogicGraph,
    cache: HashMap<Vec<(String, u64, u64)>, ActionAssessment>,
}

impl LogicAdvisor {
    pub fn new(mut graph: LogicGraph) -> Result<Self, LogicError> {
        ensure_action_propositions(&mut graph)?;
        Ok(Self { graph, cache: HashMap::new() })
    }

    pub fn graph(&self) -> &LogicGraph {
        &self.graph
    }

    pub fn assess(&mut self, state: &PropositionState) -> Result<ActionAssessment, LogicError> {
        let key: Vec<(String, u64, u64)> = state
            .iter()
            .map(|(k, b)| (k.to_string(), b.lower.to_bits(), b.upper.to_bits()))
            .collect();
        if let Some(hit) = self.cache.get(&key) {
            return Ok(*hit);
        }
        let assessment = assess(&mut self.graph, state)?;
        self.cache.insert(key, assessment);
        Ok(assessment)
    }
}
