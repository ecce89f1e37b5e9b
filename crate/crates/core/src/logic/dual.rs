//! Forward-mode dual numbers over a dense parameter tangent.

use super::engine::Scalar;

/// Value plus gradient with respect to every graph parameter. An empty
/// tangent stands for a constant (all-zero gradient).
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dual {
    pub v: f64,
    pub d: Vec<f64>,
}

impl Dual {
    /// The `index`-th of `n` independent variables.
    pub fn variable(v: f64, index: usize, n: usize) -> Self {
        let mut d = vec![0.0; n];
        d[index] = 1.0;
        Self { v, d }
    }

    fn combine(&self, rhs: &Self, v: f64, da: f64, db: f64) -> Self {
        let d = match (self.d.is_empty(), rhs.d.is_empty()) {
            (true, true) => Vec::new(),
            (false, true) => self.d.iter().map(|x| x * da).collect(),
            (true, false) => rhs.d.iter().map(|y| y * db).collect(),
            (false, false) => self.d.iter().zip(&rhs.d).map(|(x, y)| x * da + y * db).collect(),
        };
        Self { v, d }
    }

    /// Gradient as a dense vector of length `n`.
    pub fn gradient(&self, n: usize) -> Vec<f64> {
        if self.d.is_empty() {
            vec![0.0; n]
        } else {
            self.d.clone()
        }
    }
}

impl Scalar for Dual {
    fn lift(v: f64) -> Self {
        Self { v, d: Vec::new() }
    }
    fn val(&self) -> f64 {
        self.v
    }
    fn add(&self, rhs: &Self) -> Self {
        self.combine(rhs, self.v + rhs.v, 1.0, 1.0)
    }
    fn sub(&self, rhs: &Self) -> Self {
        self.combine(rhs, self.v - rhs.v, 1.0, -1.0)
    }
    fn mul(&self, rhs: &Self) -> Self {
        self.combine(rhs, self.v * rhs.v, rhs.v, self.v)
    }
    fn div(&self, rhs: &Self) -> Self {
        let q = self.v / rhs.v;
        self.combine(rhs, q, 1.0 / rhs.v, -q / rhs.v)
    }
}
