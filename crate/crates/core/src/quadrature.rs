//! One-dimensional interpolation and quadrature rules.
//!
//! Two node families are provided, both on the reference interval `[-1, 1]`:
//!
//! * [`clenshaw_curtis`]: extrema of Chebyshev polynomials, nested across
//!   levels with `2^level + 1` nodes (one node at level 0);
//! * [`gauss_legendre`]: roots of the Legendre polynomial of degree `n`.
//!
//! Weights are *probabilistic*: they integrate against the uniform density
//! `1/2` on `[-1, 1]`, so they sum to one. An affine map to `[a, b]`
//! ([`map_rule`]) moves the nodes and leaves the weights untouched, which is
//! all that is needed for uniformly distributed inputs.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Highest supported Clenshaw-Curtis level.
pub const MAX_CC_LEVEL: u32 = 16;
/// Highest supported Gauss-Legendre order.
pub const MAX_GL_ORDER: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    ClenshawCurtis,
    GaussLegendre,
}

/// A quadrature rule on `[-1, 1]` with probabilistic weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule1D {
    pub kind: RuleKind,
    /// Level for Clenshaw-Curtis, number of nodes for Gauss-Legendre.
    pub order: usize,
    /// Strictly increasing nodes.
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `Σ w_i f(x_i)`, the expectation of `f` under the uniform density.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// A rule whose nodes were moved to the support `[a, b]` of a uniform variable.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedRule1D {
    pub rule: Rule1D,
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
}

impl MappedRule1D {
    pub fn weights(&self) -> &[f64] {
        &self.rule.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights())
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Number of Clenshaw-Curtis nodes at `level`: 1, then `2^level + 1`.
pub fn cc_node_count(level: u32) -> usize {
    if level == 0 {
        1
    } else {
        (1usize << level) + 1
    }
}

/// Nested Clenshaw-Curtis rule with `2^level + 1` nodes.
///
/// Weights come from the closed cosine-sum formula, which is O(m²) but
/// exact to rounding and needs no FFT.
pub fn clenshaw_curtis(level: u32) -> Result<Rule1D> {
    if level > MAX_CC_LEVEL {
        return Err(Error::Capacity(format!(
            "Clenshaw-Curtis level {level} exceeds cap {MAX_CC_LEVEL}"
        )));
    }
    if level == 0 {
        return Ok(Rule1D {
            kind: RuleKind::ClenshawCurtis,
            order: 0,
            nodes: vec![0.0],
            weights: vec![1.0],
        });
    }
    let n = 1usize << level;
    let nf = n as f64;
    let half = n / 2;
    let mut nodes = vec![0.0; n + 1];
    let mut weights = vec![0.0; n + 1];
    for k in 0..=half {
        // k·π/2^level is exact under level doubling, so nested nodes agree bitwise.
        let x = -(k as f64 * PI / nf).cos();
        let c = if k == 0 { 1.0 } else { 2.0 };
        let mut s = 0.0;
        for j in 1..=half {
            let b = if j == half { 1.0 } else { 2.0 };
            let jf = j as f64;
            s += b / (4.0 * jf * jf - 1.0) * (2.0 * jf * k as f64 * PI / nf).cos();
        }
        // Factor 1/2 turns the Lebesgue weight into a probabilistic one.
        let w = 0.5 * c / nf * (1.0 - s);
        if k == half {
            nodes[k] = 0.0;
            weights[k] = w;
        } else {
            nodes[k] = x;
            nodes[n - k] = -x;
            weights[k] = w;
            weights[n - k] = w;
        }
    }
    Ok(Rule1D {
        kind: RuleKind::ClenshawCurtis,
        order: level as usize,
        nodes,
        weights,
    })
}

/// Legendre polynomial `P_n(x)` and its derivative by three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre rule with `n` nodes, exact to degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> Result<Rule1D> {
    if n == 0 {
        return Err(Error::Domain("Gauss-Legendre order must be positive".into()));
    }
    if n > MAX_GL_ORDER {
        return Err(Error::Capacity(format!(
            "Gauss-Legendre order {n} exceeds cap {MAX_GL_ORDER}"
        )));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n / 2 {
        // Chebyshev-like initial guess for the i-th largest root.
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut converged = false;
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() <= 1e-15 * x.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::Numerical(format!(
                "Legendre root {i} of degree {n} did not converge"
            )));
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 1.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        let (_, dp) = legendre_with_derivative(n, 0.0);
        nodes[n / 2] = 0.0;
        weights[n / 2] = 1.0 / (dp * dp);
    }
    Ok(Rule1D {
        kind: RuleKind::GaussLegendre,
        order: n,
        nodes,
        weights,
    })
}

/// Affine image `y ↦ a + (b − a)(y + 1)/2` of a reference rule.
pub fn map_rule(rule: &Rule1D, a: f64, b: f64) -> Result<MappedRule1D> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!("invalid interval [{a}, {b}]")));
    }
    let nodes = rule.nodes.iter().map(|&y| map_point(y, a, b)).collect();
    Ok(MappedRule1D {
        rule: rule.clone(),
        a,
        b,
        nodes,
    })
}

#[inline]
pub(crate) fn map_point(y: f64, a: f64, b: f64) -> f64 {
    if y == -1.0 {
        a
    } else if y == 1.0 {
        b
    } else {
        a + (b - a) * (y + 1.0) * 0.5
    }
}

/// Lagrange cardinal polynomial `l_i(y)` on `nodes`.
pub fn lagrange_basis(nodes: &[f64], i: usize, y: f64) -> Result<f64> {
    if i >= nodes.len() {
        return Err(Error::Domain(format!(
            "basis index {i} out of range for {} nodes",
            nodes.len()
        )));
    }
    for (k, &a) in nodes.iter().enumerate() {
        if nodes[k + 1..].iter().any(|&b| b == a) {
            return Err(Error::Domain(format!("duplicate node {a}")));
        }
    }
    Ok(lagrange_unchecked(nodes, i, y))
}

pub(crate) fn lagrange_unchecked(nodes: &[f64], i: usize, y: f64) -> f64 {
    let xi = nodes[i];
    nodes
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != i)
        .map(|(_, &xk)| (y - xk) / (xi - xk))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_moment(k: u32) -> f64 {
        if k % 2 == 1 {
            0.0
        } else {
            1.0 / (k as f64 + 1.0)
        }
    }

    #[test]
    fn cc_level_zero_and_one() {
        let r = clenshaw_curtis(0).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert_eq!(r.weights, vec![1.0]);
        let r = clenshaw_curtis(1).unwrap();
        assert_eq!(r.nodes, vec![-1.0, 0.0, 1.0]);
        let expect = [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0];
        for (w, e) in r.weights.iter().zip(expect) {
            assert!((w - e).abs() < 1e-15);
        }
    }

    #[test]
    fn cc_nested() {
        for level in 1..8 {
            let coarse = clenshaw_curtis(level).unwrap();
            let fine = clenshaw_curtis(level + 1).unwrap();
            assert_eq!(fine.len(), cc_node_count(level + 1));
            for x in &coarse.nodes {
                assert!(fine.nodes.contains(x), "level {level} node {x} missing");
            }
        }
    }

    #[test]
    fn cc_exactness_and_weights() {
        for level in 0..=4u32 {
            let r = clenshaw_curtis(level).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-13);
            let deg = if level == 0 { 1 } else { 1u32 << level };
            for k in 0..=deg {
                let q = r.integrate(|y| y.powi(k as i32));
                assert!((q - uniform_moment(k)).abs() <= 1e-12, "level {level} k {k}");
            }
            assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn cc_level_cap() {
        assert!(matches!(clenshaw_curtis(17), Err(Error::Capacity(_))));
    }

    #[test]
    fn gl_small_orders() {
        let r = gauss_legendre(1).unwrap();
        assert_eq!(r.nodes, vec![0.0]);
        assert!((r.weights[0] - 1.0).abs() < 1e-15);
        let r = gauss_legendre(2).unwrap();
        let s = 1.0 / 3f64.sqrt();
        assert!((r.nodes[0] + s).abs() < 1e-15 && (r.nodes[1] - s).abs() < 1e-15);
        assert!((r.weights[0] - 0.5).abs() < 1e-15);
        let r = gauss_legendre(3).unwrap();
        assert!((r.integrate(|y| y.powi(4)) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn gl_exactness() {
        for n in 1..=10 {
            let r = gauss_legendre(n).unwrap();
            assert!((r.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-13);
            for k in 0..=(2 * n as u32 - 1) {
                let q = r.integrate(|y| y.powi(k as i32));
                assert!((q - uniform_moment(k)).abs() <= 1e-12, "n {n} k {k}");
            }
        }
        let r = gauss_legendre(64).unwrap();
        assert!((r.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-13);
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
        assert!(gauss_legendre(65).is_err());
        assert!(gauss_legendre(0).is_err());
    }

    #[test]
    fn mapping() {
        let r = clenshaw_curtis(1).unwrap();
        let m = map_rule(&r, 0.122, 0.218).unwrap();
        assert_eq!(m.nodes[0], 0.122);
        assert_eq!(m.nodes[2], 0.218);
        assert!((m.nodes[1] - 0.170).abs() < 1e-15);
        assert_eq!(m.weights(), r.weights.as_slice());
        assert!(map_rule(&r, 1.0, 1.0).is_err());

        let g = map_rule(&gauss_legendre(5).unwrap(), 0.122, 0.218).unwrap();
        let mean = g.integrate(|y| y);
        let var = g.integrate(|y| (y - mean).powi(2));
        assert!((mean - 0.17).abs() <= 1e-12);
        assert!((var - 0.096f64.powi(2) / 12.0).abs() <= 1e-12);
    }

    #[test]
    fn lagrange() {
        let nodes = [-1.0, 0.0, 1.0];
        assert!((lagrange_basis(&nodes, 1, 0.5).unwrap() - 0.75).abs() < 1e-15);
        for i in 0..3 {
            for k in 0..3 {
                let v = lagrange_basis(&nodes, i, nodes[k]).unwrap();
                assert_eq!(v, if i == k { 1.0 } else { 0.0 });
            }
        }
        let s: f64 = (0..3).map(|i| lagrange_basis(&nodes, i, 0.3).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert!(lagrange_basis(&[0.0, 0.0], 0, 0.1).is_err());
        assert!(lagrange_basis(&nodes, 3, 0.1).is_err());
    }
}
