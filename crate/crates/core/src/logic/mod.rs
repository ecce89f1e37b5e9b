//! A small logical-neural-network engine.
//!
//! Every node of a [`LogicGraph`] carries a pair of truth bounds `(lower, upper)`
//! in `[0, 1]`. Connectives use weighted Łukasiewicz activations:
//!
//! - `And  = clamp(β − Σ wᵢ(1 − xᵢ))`
//! - `Or   = clamp(1 − β + Σ wᵢ xᵢ)`
//! - `Implies(a, b) = clamp(1 − β + w_a(1 − a) + w_b b)`
//! - `Not(x) = 1 − x` with the bounds swapped
//!
//! With every weight and bias equal to 1 these reduce to classical logic on
//! `{0, 1}`. Inference alternates an upward pass (children → parent) with a
//! downward pass (parent → children, i.e. generalized modus ponens/tollens)
//! until no bound moves by more than a tolerance. Bounds only ever tighten
//! within a query, so conflicting evidence shows up as `lower > upper`.

mod dual;
mod engine;
mod train;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::{Literal, Rule};

pub use train::GradientReport;

pub(crate) use engine::Interval;

/// Default inference tolerance.
pub const DEFAULT_TOL: f64 = 1e-6;
/// Default maximum number of upward/downward rounds per query.
pub const DEFAULT_MAX_ITERS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogicError {
    #[error("node {0} does not exist")]
    InvalidNode(NodeId),
    #[error("node {0} is not a proposition")]
    NotAProposition(NodeId),
    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),
    #[error("structural error: {0}")]
    Structural(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, LogicError>;

/// Lower and upper bound on the truth value of a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthBounds {
    pub lower: f64,
    pub upper: f64,
}

impl TruthBounds {
    pub const UNKNOWN: TruthBounds = TruthBounds { lower: 0.0, upper: 1.0 };
    pub const TRUE: TruthBounds = TruthBounds { lower: 1.0, upper: 1.0 };
    pub const FALSE: TruthBounds = TruthBounds { lower: 0.0, upper: 0.0 };

    /// Builds bounds, clamping both components into `[0, 1]`.
    pub fn new(lower: f64, upper: f64) -> Self {
        Self {
            lower: lower.clamp(0.0, 1.0),
            upper: upper.clamp(0.0, 1.0),
        }
    }

    pub fn crisp(value: bool) -> Self {
        if value {
            Self::TRUE
        } else {
            Self::FALSE
        }
    }

    /// `max(0, lower − upper)`.
    pub fn contradiction(&self) -> f64 {
        (self.lower - self.upper).max(0.0)
    }

    pub fn is_contradictory(&self) -> bool {
        self.lower > self.upper
    }

    /// Intersection semantics: the larger lower bound and the smaller upper bound.
    pub fn intersect(&self, other: &TruthBounds) -> TruthBounds {
        TruthBounds {
            lower: self.lower.max(other.lower),
            upper: self.upper.min(other.upper),
        }
    }

    pub fn midpoint(&self) -> f64 {
        (self.lower + self.upper) / 2.0
    }
}

impl Default for TruthBounds {
    fn default() -> Self {
        Self::UNKNOWN
    }
}

impl fmt::Display for TruthBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lower, self.upper)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Structure of a node. Connective weights live in the graph's flat parameter
/// vector starting at `params`, laid out as `[bias, w₁, …, wₖ]`.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Proposition(String),
    Not(NodeId),
    And { children: Vec<NodeId>, params: usize },
    Or { children: Vec<NodeId>, params: usize },
    Implies { antecedent: NodeId, consequent: NodeId, params: usize },
}

impl NodeKind {
    pub fn children(&self) -> Vec<NodeId> {
        match self {
            NodeKind::Proposition(_) => Vec::new(),
            NodeKind::Not(c) => vec![*c],
            NodeKind::And { children, .. } | NodeKind::Or { children, .. } => children.clone(),
            NodeKind::Implies { antecedent, consequent, .. } => vec![*antecedent, *consequent],
        }
    }

    fn param_span(&self) -> Option<(usize, usize)> {
        match self {
            NodeKind::And { children, params } | NodeKind::Or { children, params } => {
                Some((*params, children.len() + 1))
            }
            NodeKind::Implies { params, .. } => Some((*params, 3)),
            _ => None,
        }
    }
}

/// Truth assignment for one observation: proposition name → bounds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PropositionState {
    assignments: BTreeMap<String, TruthBounds>,
}

impl PropositionState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, bounds: TruthBounds) -> Self {
        self.set(name, bounds);
        self
    }

    /// Sets the bounds of `name`, replacing any previous value.
    pub fn set(&mut self, name: impl Into<String>, bounds: TruthBounds) {
        self.assignments.insert(name.into(), bounds);
    }

    pub fn get(&self, name: &str) -> Option<TruthBounds> {
        self.assignments.get(name).copied()
    }

    /// Bounds of `name`, or the fully unknown `(0, 1)` when absent.
    pub fn bounds_or_unknown(&self, name: &str) -> TruthBounds {
        self.get(name).unwrap_or(TruthBounds::UNKNOWN)
    }

    pub fn is_true(&self, name: &str) -> bool {
        self.get(name).is_some_and(|b| b.lower >= 1.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, TruthBounds)> {
        self.assignments.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Keeps only the propositions known to `graph`.
    pub fn restricted_to(&self, graph: &LogicGraph) -> PropositionState {
        PropositionState {
            assignments: self
                .assignments
                .iter()
                .filter(|(k, _)| graph.proposition(k).is_some())
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        }
    }
}

impl FromIterator<(String, TruthBounds)> for PropositionState {
    fn from_iter<I: IntoIterator<Item = (String, TruthBounds)>>(iter: I) -> Self {
        Self {
            assignments: iter.into_iter().collect(),
        }
    }
}

/// What `set_input` does with names the graph does not know.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownNames {
    #[default]
    Reject,
    Ignore,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InferenceConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub unknown_names: UnknownNames,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            max_iters: DEFAULT_MAX_ITERS,
            tol: DEFAULT_TOL,
            unknown_names: UnknownNames::Reject,
        }
    }
}

/// Outcome of one inference query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InferenceReport {
    pub iterations: usize,
    /// `false` when `max_iters` ran out before both passes settled. The
    /// bounds are still sound, just possibly not a fixpoint.
    pub converged: bool,
}

#[derive(Debug, Clone, Default)]
pub struct LogicGraph {
    nodes: Vec<NodeKind>,
    bounds: Vec<Interval<f64>>,
    params: Vec<f64>,
    axioms: Vec<Option<TruthBounds>>,
    parents: Vec<Vec<NodeId>>,
    by_name: HashMap<String, NodeId>,
    negations: HashMap<NodeId, NodeId>,
    config: InferenceConfig,
}

impl LogicGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Compiles implication rules: one asserted `Implies` root per rule,
    /// multi-literal antecedents become `And` nodes, negated literals become
    /// (shared) `Not` nodes, and propositions are shared by name. All weights
    /// and biases start at 1.
    pub fn build(rules: &[Rule]) -> Result<Self> {
        let mut graph = Self::new();
        let mut seen = std::collections::HashSet::new();
        for rule in rules {
            if !seen.insert(rule) {
                return Err(LogicError::Structural(format!("duplicate rule `{rule}`")));
            }
            let mut antecedents = Vec::with_capacity(rule.antecedents.len());
            for lit in &rule.antecedents {
                antecedents.push(graph.add_literal(lit)?);
            }
            let antecedent = if antecedents.len() == 1 {
                antecedents[0]
            } else {
                let weights = vec![1.0; antecedents.len()];
                graph.add_and(&antecedents, &weights, 1.0)?
            };
            let consequent = graph.add_literal(&rule.consequent)?;
            let root = graph.add_implies(antecedent, consequent, 1.0, 1.0, 1.0)?;
            graph.assert_node(root, TruthBounds::TRUE)?;
        }
        graph.reset_bounds();
        Ok(graph)
    }

    fn add_literal(&mut self, lit: &Literal) -> Result<NodeId> {
        let prop = self.add_proposition(&lit.name)?;
        if lit.negated {
            self.add_not(prop)
        } else {
            Ok(prop)
        }
    }

    fn push(&mut self, kind: NodeKind) -> NodeId {
        let id = NodeId(self.nodes.len());
        for child in kind.children() {
            self.parents[child.0].push(id);
        }
        self.nodes.push(kind);
        self.bounds.push(Interval::unknown());
        self.axioms.push(None);
        self.parents.push(Vec::new());
        id
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.0 < self.nodes.len() {
            Ok(())
        } else {
            Err(LogicError::InvalidNode(id))
        }
    }

    fn check_params(weights: &[f64], bias: f64) -> Result<()> {
        if weights.iter().chain(std::iter::once(&bias)).any(|w| !w.is_finite() || *w < 0.0) {
            return Err(LogicError::Structural(
                "weights and bias must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Returns the existing node when `name` is already a proposition.
    pub fn add_proposition(&mut self, name: &str) -> Result<NodeId> {
        if name.is_empty() {
            return Err(LogicError::Structural("empty proposition name".into()));
        }
        if let Some(&id) = self.by_name.get(name) {
            return Ok(id);
        }
        let id = self.push(NodeKind::Proposition(name.to_string()));
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    /// `Not` nodes carry no parameters, so identical negations are shared.
    pub fn add_not(&mut self, child: NodeId) -> Result<NodeId> {
        self.check(child)?;
        if let Some(&id) = self.negations.get(&child) {
            return Ok(id);
        }
        let id = self.push(NodeKind::Not(child));
        self.negations.insert(child, id);
        Ok(id)
    }

    pub fn add_and(&mut self, children: &[NodeId], weights: &[f64], bias: f64) -> Result<NodeId> {
        let params = self.add_junction_params(children, weights, bias)?;
        Ok(self.push(NodeKind::And { children: children.to_vec(), params }))
    }

    pub fn add_or(&mut self, children: &[NodeId], weights: &[f64], bias: f64) -> Result<NodeId> {
        let params = self.add_junction_params(children, weights, bias)?;
        Ok(self.push(NodeKind::Or { children: children.to_vec(), params }))
    }

    fn add_junction_params(&mut self, children: &[NodeId], weights: &[f64], bias: f64) -> Result<usize> {
        if children.is_empty() {
            return Err(LogicError::Structural("And/Or needs at least one child".into()));
        }
        if weights.len() != children.len() {
            return Err(LogicError::Structural(format!(
                "{} weights for {} children",
                weights.len(),
                children.len()
            )));
        }
        for &c in children {
            self.check(c)?;
        }
        Self::check_params(weights, bias)?;
        let offset = self.params.len();
        self.params.push(bias);
        self.params.extend_from_slice(weights);
        Ok(offset)
    }

    pub fn add_implies(
        &mut self,
        antecedent: NodeId,
        consequent: NodeId,
        weight_antecedent: f64,
        weight_consequent: f64,
        bias: f64,
    ) -> Result<NodeId> {
        self.check(antecedent)?;
        self.check(consequent)?;
        Self::check_params(&[weight_antecedent, weight_consequent], bias)?;
        let params = self.params.len();
        self.params.extend_from_slice(&[bias, weight_antecedent, weight_consequent]);
        Ok(self.push(NodeKind::Implies { antecedent, consequent, params }))
    }

    /// Pins a rule root to `axiom` bounds. Only `Implies` nodes that are not
    /// used as sub-formulae can be asserted.
    pub fn assert_node(&mut self, id: NodeId, axiom: TruthBounds) -> Result<()> {
        self.check(id)?;
        if !matches!(self.nodes[id.0], NodeKind::Implies { .. }) {
            return Err(LogicError::Structural(format!("only Implies roots can be asserted, not {id}")));
        }
        if !self.parents[id.0].is_empty() {
            return Err(LogicError::Structural(format!("{id} is a sub-formula, not a rule root")));
        }
        self.axioms[id.0] = Some(axiom);
        self.bounds[id.0] = Interval::from(axiom);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> Result<&NodeKind> {
        self.nodes.get(id.0).ok_or(LogicError::InvalidNode(id))
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn proposition(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    /// Proposition names in node order.
    pub fn proposition_names(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                NodeKind::Proposition(name) => Some(name.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn asserted(&self) -> Vec<NodeId> {
        self.node_ids().filter(|id| self.axioms[id.0].is_some()).collect()
    }

    pub fn is_asserted(&self, id: NodeId) -> bool {
        self.axioms.get(id.0).is_some_and(Option::is_some)
    }

    pub fn parents(&self, id: NodeId) -> Result<&[NodeId]> {
        self.check(id)?;
        Ok(&self.parents[id.0])
    }

    pub fn bounds(&self, id: NodeId) -> Result<TruthBounds> {
        self.check(id)?;
        Ok(self.bounds[id.0].into())
    }

    /// Bounds of a proposition by name.
    pub fn proposition_bounds(&self, name: &str) -> Result<TruthBounds> {
        let id = self
            .proposition(name)
            .ok_or_else(|| LogicError::UnknownProposition(name.to_string()))?;
        self.bounds(id)
    }

    pub fn config(&self) -> InferenceConfig {
        self.config
    }

    pub fn set_config(&mut self, config: InferenceConfig) {
        self.config = config;
    }

    /// Flat parameter vector (biases and weights of every connective).
    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Overwrites the parameter vector, projecting onto `≥ 0`.
    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(LogicError::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        for (dst, src) in self.params.iter_mut().zip(params) {
            *dst = src.max(0.0);
        }
        Ok(())
    }

    /// Connective weights, in child order.
    pub fn weights(&self, id: NodeId) -> Result<&[f64]> {
        let (offset, len) = self.node(id)?.param_span().ok_or_else(|| {
            LogicError::InvalidArgument(format!("{id} has no weights"))
        })?;
        Ok(&self.params[offset + 1..offset + len])
    }

    pub fn bias(&self, id: NodeId) -> Result<f64> {
        let (offset, _) = self
            .node(id)?
            .param_span()
            .ok_or_else(|| LogicError::InvalidArgument(format!("{id} has no bias")))?;
        Ok(self.params[offset])
    }

    /// Every proposition back to `(0, 1)`, asserted roots back to their axiom,
    /// connectives recomputed from their children.
    pub fn reset_bounds(&mut self) {
        self.bounds = engine::initial_bounds(&self.axioms);
        engine::upward(&self.nodes, &self.axioms, &self.params, &mut self.bounds);
    }

    /// Tightens each named proposition toward the given bounds (intersection).
    pub fn set_input(&mut self, state: &PropositionState) -> Result<()> {
        let pins = self.resolve(state)?;
        engine::apply_pins(&pins, &mut self.bounds);
        Ok(())
    }

    fn resolve(&self, state: &PropositionState) -> Result<Vec<(usize, TruthBounds)>> {
        let mut pins = Vec::with_capacity(state.len());
        for (name, bounds) in state.iter() {
            match self.by_name.get(name) {
                Some(id) => pins.push((id.0, bounds)),
                None if self.config.unknown_names == UnknownNames::Ignore => {
                    log::debug!("ignoring unknown proposition `{name}`");
                }
                None => return Err(LogicError::UnknownProposition(name.to_string())),
            }
        }
        Ok(pins)
    }

    /// Recomputes connectives from their children. Returns the largest bound change.
    pub fn upward_pass(&mut self) -> f64 {
        engine::upward(&self.nodes, &self.axioms, &self.params, &mut self.bounds)
    }

    /// Propagates parent bounds back to children. Returns the largest bound change.
    pub fn downward_pass(&mut self) -> f64 {
        engine::downward(&self.nodes, &self.axioms, &self.params, &mut self.bounds)
    }

    /// Full query: reset, load `state`, then alternate passes to a fixpoint.
    pub fn infer(&mut self, state: &PropositionState, max_iters: usize, tol: f64) -> Result<InferenceReport> {
        if max_iters == 0 {
            return Err(LogicError::InvalidArgument("max_iters must be at least 1".into()));
        }
        if tol.is_nan() || tol <= 0.0 {
            return Err(LogicError::InvalidArgument("tol must be positive".into()));
        }
        let pins = self.resolve(state)?;
        let (bounds, report) = engine::run(&self.nodes, &self.axioms, &self.params, &pins, max_iters, tol);
        self.bounds = bounds;
        if !report.converged {
            log::warn!("inference stopped after {max_iters} rounds without reaching a fixpoint");
        }
        Ok(report)
    }

    /// [`LogicGraph::infer`] with the graph's configured limits.
    pub fn infer_default(&mut self, state: &PropositionState) -> Result<InferenceReport> {
        let InferenceConfig { max_iters, tol, .. } = self.config;
        self.infer(state, max_iters, tol)
    }

    /// `max(0, lower − upper)` of one node under the current bounds.
    pub fn node_contradiction(&self, id: NodeId) -> Result<f64> {
        Ok(self.bounds(id)?.contradiction())
    }

    /// Sum of contradictions over every node.
    pub fn total_contradiction(&self) -> f64 {
        self.bounds.iter().map(|b| (b.lo - b.hi).max(0.0)).sum()
    }

    /// Nodes whose contradiction counts toward an action: the proposition
    /// itself plus the connectives directly above it. A `Not` node mirrors
    /// its operand's bounds, so it is looked through rather than counted.
    pub fn connected(&self, action: NodeId) -> Result<Vec<NodeId>> {
        self.check(action)?;
        let mut out = vec![action];
        let push_parents = |of: NodeId, out: &mut Vec<NodeId>| {
            for &p in &self.parents[of.0] {
                if !matches!(self.nodes[p.0], NodeKind::Not(_)) && !out.contains(&p) {
                    out.push(p);
                }
            }
        };
        push_parents(action, &mut out);
        if let Some(&neg) = self.negations.get(&action) {
            push_parents(neg, &mut out);
        }
        Ok(out)
    }

    /// Pins `action` true on top of `state`, runs inference and sums the
    /// contradiction over [`LogicGraph::connected`] nodes.
    pub fn action_contradiction(&mut self, action: NodeId, state: &PropositionState) -> Result<f64> {
        let name = match self.node(action)? {
            NodeKind::Proposition(name) => name.clone(),
            _ => return Err(LogicError::NotAProposition(action)),
        };
        let pinned = state.bounds_or_unknown(&name).intersect(&TruthBounds::TRUE);
        let state = state.clone().with(name, pinned);
        self.infer_default(&state)?;
        let total = self
            .connected(action)?
            .into_iter()
            .map(|n| self.bounds[n.0].contradiction())
            .sum();
        Ok(total)
    }

    /// Σ over examples of the total contradiction after inference.
    pub fn contradiction_loss(&mut self, dataset: &[PropositionState]) -> Result<f64> {
        if dataset.is_empty() {
            return Err(LogicError::InvalidArgument("dataset must not be empty".into()));
        }
        let mut loss = 0.0;
        for state in dataset {
            self.infer_default(state)?;
            loss += self.total_contradiction();
        }
        Ok(loss)
    }

    /// Projected subgradient descent on the contradiction loss over all
    /// connective weights and biases. A step that would raise the loss is
    /// halved until it does not, so the history never increases.
    pub fn train(&mut self, dataset: &[PropositionState], epochs: usize, lr: f64) -> Result<Vec<f64>> {
        train::train(self, dataset, epochs, lr)
    }

    /// Loss and its analytic gradient with respect to [`LogicGraph::params`].
    pub fn loss_gradient(&self, dataset: &[PropositionState]) -> Result<GradientReport> {
        train::loss_gradient(self, dataset)
    }

    /// Recovers implication rules from the asserted roots.
    pub fn to_rules(&self) -> Result<Vec<Rule>> {
        self.asserted()
            .into_iter()
            .map(|root| match &self.nodes[root.0] {
                NodeKind::Implies { antecedent, consequent, .. } => {
                    let antecedents = match &self.nodes[antecedent.0] {
                        NodeKind::And { children, .. } => children
                            .iter()
                            .map(|c| self.literal(*c))
                            .collect::<Result<Vec<_>>>()?,
                        _ => vec![self.literal(*antecedent)?],
                    };
                    Ok(Rule {
                        antecedents,
                        consequent: self.literal(*consequent)?,
                    })
                }
                _ => unreachable!("only Implies nodes are asserted"),
            })
            .collect()
    }

    fn literal(&self, id: NodeId) -> Result<Literal> {
        match &self.nodes[id.0] {
            NodeKind::Proposition(name) => Ok(Literal::positive(name)),
            NodeKind::Not(inner) => match &self.nodes[inner.0] {
                NodeKind::Proposition(name) => Ok(Literal::negative(name)),
                _ => Err(LogicError::Structural(format!("{id} is not a literal"))),
            },
            _ => Err(LogicError::Structural(format!("{id} is not a literal"))),
        }
    }

    pub(crate) fn parts(&self) -> (&[NodeKind], &[Option<TruthBounds>]) {
        (&self.nodes, &self.axioms)
    }
}
