//! Contradiction-loss training of connective weights and biases.

use super::dual::Dual;
use super::engine::{self, Scalar};
use super::{LogicError, LogicGraph, PropositionState, Result};

/// Halvings tried before an epoch gives up on finding a non-increasing step.
const MAX_BACKTRACKS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub loss: f64,
    pub gradient: Vec<f64>,
}

pub(super) fn loss_gradient(graph: &LogicGraph, dataset: &[PropositionState]) -> Result<GradientReport> {
    if dataset.is_empty() {
        return Err(LogicError::InvalidArgument("dataset must not be empty".into()));
    }
    let n = graph.params.len();
    let params: Vec<Dual> = graph
        .params
        .iter()
        .enumerate()
        .map(|(i, &v)| Dual::variable(v, i, n))
        .collect();
    let (nodes, axioms) = graph.parts();
    let cfg = graph.config;
    let mut loss = Dual::lift(0.0);
    for state in dataset {
        let pins = graph.resolve(state)?;
        let (bounds, _) = engine::run(nodes, axioms, &params, &pins, cfg.max_iters, cfg.tol);
        for b in &bounds {
            loss = loss.add(&b.contradiction());
        }
    }
    Ok(GradientReport { loss: loss.v, gradient: loss.gradient(n) })
}

pub(super) fn train(graph: &mut LogicGraph, dataset: &[PropositionState], epochs: usize, lr: f64) -> Result<Vec<f64>> {
    if epochs == 0 {
        return Err(LogicError::InvalidArgument("epochs must be at least 1".into()));
    }
    if lr.is_nan() || lr <= 0.0 {
        return Err(LogicError::InvalidArgument("learning rate must be positive".into()));
    }
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        let GradientReport { loss, gradient } = loss_gradient(graph, dataset)?;
        let start = graph.params.clone();
        let mut step = lr;
        let mut accepted = false;
        if gradient.iter().any(|g| *g != 0.0) {
            for _ in 0..MAX_BACKTRACKS {
                let proposal: Vec<f64> = start
                    .iter()
                    .zip(&gradient)
                    .map(|(p, g)| (p - step * g).max(0.0))
                    .collect();
                graph.params.copy_from_slice(&proposal);
                let trial = graph.contradiction_loss(dataset)?;
                if trial <= loss {
                    history.push(trial);
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
        }
        if !accepted {
            graph.params.copy_from_slice(&start);
            history.push(loss);
        }
    }
    graph.reset_bounds();
    Ok(history)
}
