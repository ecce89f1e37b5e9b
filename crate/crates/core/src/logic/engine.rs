//! Upward/downward bound propagation, generic over the scalar type so the
//! same code path produces values (`f64`) and parameter gradients (`Dual`).

use super::{InferenceReport, NodeKind, TruthBounds};

/// Minimum improvement for a bound to count as tightened. Keeps float noise
/// from manufacturing contradictions between algebraically equal bounds.
const TIGHTEN_EPS: f64 = 1e-12;

pub(crate) trait Scalar: Clone {
    fn lift(v: f64) -> Self;
    fn val(&self) -> f64;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    fn div(&self, rhs: &Self) -> Self;
}

impl Scalar for f64 {
    fn lift(v: f64) -> Self {
        v
    }
    fn val(&self) -> f64 {
        *self
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn div(&self, rhs: &Self) -> Self {
        self / rhs
    }
}

/// Saturation at 0 and 1 has zero slope; the interior passes through.
fn clamp01<T: Scalar>(x: T) -> T {
    let v = x.val();
    if v < 0.0 {
        T::lift(0.0)
    } else if v > 1.0 {
        T::lift(1.0)
    } else {
        x
    }
}

fn one_minus<T: Scalar>(x: &T) -> T {
    T::lift(1.0).sub(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> Interval<T> {
    pub fn unknown() -> Self {
        Self { lo: T::lift(0.0), hi: T::lift(1.0) }
    }

    pub fn lift(b: TruthBounds) -> Self {
        Self { lo: T::lift(b.lower), hi: T::lift(b.upper) }
    }

    pub fn contradiction(&self) -> T {
        let d = self.lo.sub(&self.hi);
        if d.val() > 0.0 {
            d
        } else {
            T::lift(0.0)
        }
    }

    fn raise_lo(&mut self, candidate: T) -> f64 {
        let candidate = clamp01(candidate);
        let delta = candidate.val() - self.lo.val();
        if delta > TIGHTEN_EPS {
            self.lo = candidate;
            delta
        } else {
            0.0
        }
    }

    fn lower_hi(&mut self, candidate: T) -> f64 {
        let candidate = clamp01(candidate);
        let delta = self.hi.val() - candidate.val();
        if delta > TIGHTEN_EPS {
            self.hi = candidate;
            delta
        } else {
            0.0
        }
    }
}

impl From<TruthBounds> for Interval<f64> {
    fn from(b: TruthBounds) -> Self {
        Self { lo: b.lower, hi: b.upper }
    }
}

impl From<Interval<f64>> for TruthBounds {
    fn from(i: Interval<f64>) -> Self {
        TruthBounds { lower: i.lo, upper: i.hi }
    }
}

pub(crate) fn initial_bounds<T: Scalar>(axioms: &[Option<TruthBounds>]) -> Vec<Interval<T>> {
    axioms
        .iter()
        .map(|a| a.map_or_else(Interval::unknown, Interval::lift))
        .collect()
}

pub(crate) fn apply_pins<T: Scalar>(pins: &[(usize, TruthBounds)], bounds: &mut [Interval<T>]) {
    for &(idx, b) in pins {
        let slot = &mut bounds[idx];
        if b.lower > slot.lo.val() {
            slot.lo = T::lift(b.lower);
        }
        if b.upper < slot.hi.val() {
            slot.hi = T::lift(b.upper);
        }
    }
}

/// Children-first sweep. Nodes are stored in topological order (children are
/// always created before their parents), so one forward scan suffices.
pub(crate) fn upward<T: Scalar>(
    nodes: &[NodeKind],
    axioms: &[Option<TruthBounds>],
    params: &[T],
    bounds: &mut [Interval<T>],
) -> f64 {
    let mut change = 0.0f64;
    for i in 0..nodes.len() {
        if axioms[i].is_some() {
            continue;
        }
        let computed = match &nodes[i] {
            NodeKind::Proposition(_) => continue,
            NodeKind::Not(c) => {
                let c = &bounds[c.index()];
                Interval { lo: one_minus(&c.hi), hi: one_minus(&c.lo) }
            }
            NodeKind::And { children, params: p } => {
                let bias = &params[*p];
                let (mut lo, mut hi) = (bias.clone(), bias.clone());
                for (k, c) in children.iter().enumerate() {
                    let w = &params[p + 1 + k];
                    let cb = &bounds[c.index()];
                    lo = lo.sub(&w.mul(&one_minus(&cb.lo)));
                    hi = hi.sub(&w.mul(&one_minus(&cb.hi)));
                }
                Interval { lo: clamp01(lo), hi: clamp01(hi) }
            }
            NodeKind::Or { children, params: p } => {
                let base = one_minus(&params[*p]);
                let (mut lo, mut hi) = (base.clone(), base);
                for (k, c) in children.iter().enumerate() {
                    let w = &params[p + 1 + k];
                    let cb = &bounds[c.index()];
                    lo = lo.add(&w.mul(&cb.lo));
                    hi = hi.add(&w.mul(&cb.hi));
                }
                Interval { lo: clamp01(lo), hi: clamp01(hi) }
            }
            NodeKind::Implies { antecedent, consequent, params: p } => {
                let (bias, wa, wb) = (&params[*p], &params[p + 1], &params[p + 2]);
                let a = &bounds[antecedent.index()];
                let b = &bounds[consequent.index()];
                let base = one_minus(bias);
                let lo = base.add(&wa.mul(&one_minus(&a.hi))).add(&wb.mul(&b.lo));
                let hi = base.add(&wa.mul(&one_minus(&a.lo))).add(&wb.mul(&b.hi));
                Interval { lo: clamp01(lo), hi: clamp01(hi) }
            }
        };
        let slot = &mut bounds[i];
        change = change.max(slot.raise_lo(computed.lo));
        change = change.max(slot.lower_hi(computed.hi));
    }
    change
}

/// Parent-first sweep inverting each connective's pre-clamp linear form.
/// A lower bound `L > 0` on a connective means its pre-clamp value is at
/// least `L`; an upper bound `U < 1` means it is at most `U`. Each child is
/// bounded using the most permissive values of its siblings.
pub(crate) fn downward<T: Scalar>(
    nodes: &[NodeKind],
    axioms: &[Option<TruthBounds>],
    params: &[T],
    bounds: &mut [Interval<T>],
) -> f64 {
    let mut change = 0.0f64;
    for i in (0..nodes.len()).rev() {
        let parent = bounds[i].clone();
        let has_lo = parent.lo.val() > 0.0;
        let has_hi = parent.hi.val() < 1.0;
        let mut tighten = |bounds: &mut [Interval<T>], idx: usize, lo: Option<T>, hi: Option<T>| {
            if axioms[idx].is_some() {
                return;
            }
            let slot = &mut bounds[idx];
            if let Some(lo) = lo {
                change = change.max(slot.raise_lo(lo));
            }
            if let Some(hi) = hi {
                change = change.max(slot.lower_hi(hi));
            }
        };
        match &nodes[i] {
            NodeKind::Proposition(_) => {}
            NodeKind::Not(c) => {
                let lo = one_minus(&parent.hi);
                let hi = one_minus(&parent.lo);
                tighten(bounds, c.index(), Some(lo), Some(hi));
            }
            NodeKind::And { children, params: p } => {
                let bias = &params[*p];
                for (k, c) in children.iter().enumerate() {
                    let wk = &params[p + 1 + k];
                    if wk.val() <= 0.0 {
                        continue;
                    }
                    // Sibling penalties Σ_{j≠k} w_j (1 − x_j) at the sibling
                    // upper bounds (smallest) and lower bounds (largest).
                    let (mut pen_min, mut pen_max) = (T::lift(0.0), T::lift(0.0));
                    for (j, s) in children.iter().enumerate() {
                        if j == k {
                            continue;
                        }
                        let wj = &params[p + 1 + j];
                        pen_min = pen_min.add(&wj.mul(&one_minus(&bounds[s.index()].hi)));
                        pen_max = pen_max.add(&wj.mul(&one_minus(&bounds[s.index()].lo)));
                    }
                    let lo = has_lo.then(|| one_minus(&bias.sub(&parent.lo).sub(&pen_min).div(wk)));
                    let hi = has_hi.then(|| one_minus(&bias.sub(&parent.hi).sub(&pen_max).div(wk)));
                    tighten(bounds, c.index(), lo, hi);
                }
            }
            NodeKind::Or { children, params: p } => {
                let bias = &params[*p];
                for (k, c) in children.iter().enumerate() {
                    let wk = &params[p + 1 + k];
                    if wk.val() <= 0.0 {
                        continue;
                    }
                    let (mut rest_hi, mut rest_lo) = (T::lift(0.0), T::lift(0.0));
                    for (j, s) in children.iter().enumerate() {
                        if j == k {
                            continue;
                        }
                        let wj = &params[p + 1 + j];
                        rest_hi = rest_hi.add(&wj.mul(&bounds[s.index()].hi));
                        rest_lo = rest_lo.add(&wj.mul(&bounds[s.index()].lo));
                    }
                    // 1 − β + w_k x_k + rest ≥ L  and  ≤ U.
                    let lo = has_lo.then(|| parent.lo.sub(&one_minus(bias)).sub(&rest_hi).div(wk));
                    let hi = has_hi.then(|| parent.hi.sub(&one_minus(bias)).sub(&rest_lo).div(wk));
                    tighten(bounds, c.index(), lo, hi);
                }
            }
            NodeKind::Implies { antecedent, consequent, params: p } => {
                let (bias, wa, wb) = (&params[*p], &params[p + 1], &params[p + 2]);
                let (ai, bi) = (antecedent.index(), consequent.index());
                // Shift so the constraint reads w_a(1 − a) + w_b b ≥ L + β − 1.
                let need_lo = parent.lo.add(bias).sub(&T::lift(1.0));
                let need_hi = parent.hi.add(bias).sub(&T::lift(1.0));
                if wb.val() > 0.0 {
                    let a = bounds[ai].clone();
                    let lo = has_lo.then(|| need_lo.sub(&wa.mul(&one_minus(&a.lo))).div(wb));
                    let hi = has_hi.then(|| need_hi.sub(&wa.mul(&one_minus(&a.hi))).div(wb));
                    tighten(bounds, bi, lo, hi);
                }
                if wa.val() > 0.0 {
                    let b = bounds[bi].clone();
                    let hi = has_lo.then(|| one_minus(&need_lo.sub(&wb.mul(&b.hi)).div(wa)));
                    let lo = has_hi.then(|| one_minus(&need_hi.sub(&wb.mul(&b.lo)).div(wa)));
                    tighten(bounds, ai, lo, hi);
                }
            }
        }
    }
    change
}

/// Reset, load the pins, then alternate passes until both settle below `tol`.
pub(crate) fn run<T: Scalar>(
    nodes: &[NodeKind],
    axioms: &[Option<TruthBounds>],
    params: &[T],
    pins: &[(usize, TruthBounds)],
    max_iters: usize,
    tol: f64,
) -> (Vec<Interval<T>>, InferenceReport) {
    let mut bounds = initial_bounds(axioms);
    upward(nodes, axioms, params, &mut bounds);
    apply_pins(pins, &mut bounds);
    let mut report = InferenceReport { iterations: 0, converged: false };
    for iter in 1..=max_iters {
        let up = upward(nodes, axioms, params, &mut bounds);
        let down = downward(nodes, axioms, params, &mut bounds);
        report.iterations = iter;
        if up < tol && down < tol {
            report.converged = true;
            break;
        }
    }
    (bounds, report)
}
