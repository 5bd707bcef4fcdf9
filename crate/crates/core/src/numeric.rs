//! Small numeric helpers shared across modules: compensated summation and
//! Gauss–Legendre rules mapped to `[0, 1]`.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// A Gauss–Legendre rule with nodes and weights on `[0, 1]`.
#[derive(Clone, Debug)]
pub struct UnitRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl UnitRule {
    pub fn gauss_legendre(points: usize) -> Self {
        let points = NonZeroUsize::new(points).expect("rule needs at least one node");
        let rule = GaussLegendre::new(points);
        let (nodes, weights) = rule
            .as_node_weight_pairs()
            .iter()
            .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
            .unzip();
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫_a^b f`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let h = b - a;
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(a + h * t))
            .sum();
        s * h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut terms = vec![1.0];
        terms.extend(std::iter::repeat(1e-16).take(10_000));
        terms.push(-1.0);
        let s = compensated_sum(terms);
        assert!((s - 1e-12).abs() < 1e-24);
    }

    #[test]
    fn unit_rule_integrates_polynomials_exactly() {
        let rule = UnitRule::gauss_legendre(8);
        assert!((rule.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let v = rule.integrate(0.25, 0.75, |x| x.powi(15));
        let exact = (0.75f64.powi(16) - 0.25f64.powi(16)) / 16.0;
        assert!((v - exact).abs() < 1e-16);
    }
}
