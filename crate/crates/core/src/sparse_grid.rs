//! Smolyak sparse grids built from the combination technique.
//!
//! A sparse grid of level `ℓ` in `N` dimensions is a signed combination of
//! small tensor grids, one per multi-index `j` with `ℓ − N + 1 ≤ |j| ≤ ℓ`,
//! weighted by `(−1)^(ℓ−|j|) · C(N−1, ℓ−|j|)`. Points shared between tensor
//! grids are merged and their weights summed, so the quadrature weights may
//! be negative.
//!
//! ```
//! use etuq::sparse_grid::{build_sparse_grid, Growth};
//!
//! let grid = build_sparse_grid(12, 1, Growth::Smolyak, &[(0.122, 0.218); 12]).unwrap();
//! assert_eq!(grid.len(), 25);
//! ```

use crate::error::{Error, Result};
use crate::quadrature::{clenshaw_curtis, gauss_legendre, lagrange_unchecked, map_point, MappedRule1D, Rule1D};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::Write;

/// Enumeration cap on multi-indices and on summed tensor-grid sizes.
pub const MAX_ENUMERATION: usize = 10_000_000;

/// Canonical rounding scale used to merge coincident points.
const KEY_SCALE: f64 = 1e12;

/// How the polynomial degree grows with the 1D index `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// `p(0) = 0`, `p(j) = 2^j`, realised with nested Clenshaw-Curtis nodes.
    Smolyak,
    /// `p(j) = j`, realised with `j + 1` Gauss-Legendre nodes.
    TotalDegree,
}

impl Growth {
    /// Reference rule used in one dimension for index `j`.
    pub fn rule(self, j: u32) -> Result<Rule1D> {
        match self {
            Growth::Smolyak => clenshaw_curtis(j),
            Growth::TotalDegree => gauss_legendre(j as usize + 1),
        }
    }

    /// Polynomial degree `p(j)`.
    pub fn degree(self, j: u32) -> usize {
        match self {
            Growth::Smolyak if j == 0 => 0,
            Growth::Smolyak => 1usize << j,
            Growth::TotalDegree => j as usize,
        }
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// All multi-indices with `|j| ≤ ℓ` and their combination coefficients.
#[derive(Debug, Clone)]
pub struct MultiIndexSet {
    pub dim: usize,
    pub level: u32,
    pub growth: Growth,
    pub indices: Vec<Vec<u32>>,
    /// Zero outside the band `ℓ − N + 1 ≤ |j| ≤ ℓ`.
    pub coefficients: Vec<i64>,
}

impl MultiIndexSet {
    /// Indices with nonzero coefficient, paired with the coefficient.
    pub fn active(&self) -> impl Iterator<Item = (&[u32], i64)> {
        self.indices
            .iter()
            .zip(&self.coefficients)
            .filter(|(_, &c)| c != 0)
            .map(|(j, &c)| (j.as_slice(), c))
    }
}

/// Combination coefficient of a multi-index with norm `norm`.
pub fn combination_coefficient(dim: usize, level: u32, norm: u32) -> i64 {
    if norm > level {
        return 0;
    }
    let gap = (level - norm) as u64;
    if gap > dim as u64 - 1 {
        return 0;
    }
    let c = binomial(dim as u64 - 1, gap) as i64;
    if gap % 2 == 0 {
        c
    } else {
        -c
    }
}

pub fn build_multi_index_set(dim: usize, level: u32, growth: Growth) -> Result<MultiIndexSet> {
    if dim == 0 {
        return Err(Error::Domain("dimension must be at least 1".into()));
    }
    let count = binomial(level as u64 + dim as u64, dim as u64);
    if count == 0 || count > MAX_ENUMERATION as u64 {
        return Err(Error::Capacity(format!(
            "{count} multi-indices for N={dim}, level {level}"
        )));
    }
    let mut indices = Vec::with_capacity(count as usize);
    let mut current = vec![0u32; dim];
    enumerate(&mut current, 0, level, &mut indices);
    let coefficients = indices
        .iter()
        .map(|j| combination_coefficient(dim, level, j.iter().sum()))
        .collect();
    Ok(MultiIndexSet {
        dim,
        level,
        growth,
        indices,
        coefficients,
    })
}

fn enumerate(current: &mut Vec<u32>, pos: usize, budget: u32, out: &mut Vec<Vec<u32>>) {
    if pos == current.len() {
        out.push(current.clone());
        return;
    }
    for v in 0..=budget {
        current[pos] = v;
        enumerate(current, pos + 1, budget - v, out);
    }
    current[pos] = 0;
}

/// Full tensor-product grid of mapped 1D rules.
#[derive(Debug, Clone)]
pub struct TensorGrid {
    pub rules: Vec<MappedRule1D>,
}

impl TensorGrid {
    pub fn new(rules: Vec<MappedRule1D>) -> Self {
        TensorGrid { rules }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.rules.iter().map(|r| r.len()).collect()
    }

    pub fn cardinality(&self) -> usize {
        self.rules.iter().map(|r| r.len()).product()
    }

    pub fn point(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().zip(&self.rules).map(|(&i, r)| r.nodes[i]).collect()
    }

    pub fn weight(&self, idx: &[usize]) -> f64 {
        idx.iter().zip(&self.rules).map(|(&i, r)| r.weights()[i]).product()
    }

    /// Brute-force quadrature `Σ_i w_i f(y_i)` over every grid point.
    pub fn quadrature<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        let dims = self.dims();
        let mut idx = vec![0usize; dims.len()];
        let mut sum = 0.0;
        loop {
            sum += self.weight(&idx) * f(&self.point(&idx));
            if !advance(&mut idx, &dims) {
                return sum;
            }
        }
    }
}

/// Odometer increment with the first index fastest; false on wrap-around.
pub(crate) fn advance(idx: &mut [usize], dims: &[usize]) -> bool {
    for (i, d) in idx.iter_mut().zip(dims) {
        *i += 1;
        if *i < *d {
            return true;
        }
        *i = 0;
    }
    false
}

/// Deduplicated sparse collocation grid with combined quadrature weights.
#[derive(Debug, Clone)]
pub struct SparseGrid {
    pub dim: usize,
    pub level: u32,
    pub growth: Growth,
    pub intervals: Vec<(f64, f64)>,
    pub points: Vec<Vec<f64>>,
    /// Canonical integer key per point: reference coordinates rounded at 1e-12.
    pub keys: Vec<Vec<i64>>,
    pub weights: Vec<f64>,
    /// Per point, positions in `active` of the tensor grids containing it.
    pub provenance: Vec<Vec<usize>>,
    /// Active multi-indices with their combination coefficients.
    pub active: Vec<(Vec<u32>, i64)>,
    /// Per active multi-index, the grid points of its tensor grid in
    /// odometer order (first dimension fastest).
    tensor_points: Vec<Vec<usize>>,
    rules: HashMap<u32, Rule1D>,
}

fn canonical_key(y: f64) -> i64 {
    (y * KEY_SCALE).round() as i64
}

pub fn build_sparse_grid(
    dim: usize,
    level: u32,
    growth: Growth,
    intervals: &[(f64, f64)],
) -> Result<SparseGrid> {
    if intervals.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "{} intervals for dimension {dim}",
            intervals.len()
        )));
    }
    for &(a, b) in intervals {
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Domain(format!("invalid interval [{a}, {b}]")));
        }
    }
    let set = build_multi_index_set(dim, level, growth)?;
    let mut rules: HashMap<u32, Rule1D> = HashMap::new();
    let mut active = Vec::new();
    let mut total = 0usize;
    for (j, c) in set.active() {
        let mut size = 1usize;
        for &jn in j {
            if !rules.contains_key(&jn) {
                rules.insert(jn, growth.rule(jn)?);
            }
            size = size.saturating_mul(rules[&jn].len());
        }
        total = total.saturating_add(size);
        if total > MAX_ENUMERATION {
            return Err(Error::Capacity(format!(
                "sparse grid N={dim}, level {level} exceeds {MAX_ENUMERATION} tensor points"
            )));
        }
        active.push((j.to_vec(), c));
    }

    let mut lookup: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut points = Vec::new();
    let mut keys = Vec::new();
    let mut weights = Vec::new();
    let mut provenance: Vec<Vec<usize>> = Vec::new();
    let mut tensor_points = Vec::with_capacity(active.len());

    for (a, (j, c)) in active.iter().enumerate() {
        let local: Vec<&Rule1D> = j.iter().map(|jn| &rules[jn]).collect();
        let dims: Vec<usize> = local.iter().map(|r| r.len()).collect();
        let mut idx = vec![0usize; dim];
        let mut members = Vec::new();
        loop {
            let key: Vec<i64> = idx
                .iter()
                .zip(&local)
                .map(|(&i, r)| canonical_key(r.nodes[i]))
                .collect();
            let w: f64 = idx.iter().zip(&local).map(|(&i, r)| r.weights[i]).product();
            let p = match lookup.get(&key) {
                Some(&p) => p,
                None => {
                    let p = points.len();
                    let y = idx
                        .iter()
                        .zip(&local)
                        .zip(intervals)
                        .map(|((&i, r), &(lo, hi))| map_point(r.nodes[i], lo, hi))
                        .collect();
                    points.push(y);
                    keys.push(key.clone());
                    weights.push(0.0);
                    provenance.push(Vec::new());
                    lookup.insert(key, p);
                    p
                }
            };
            weights[p] += *c as f64 * w;
            provenance[p].push(a);
            members.push(p);
            if !advance(&mut idx, &dims) {
                break;
            }
        }
        tensor_points.push(members);
    }

    Ok(SparseGrid {
        dim,
        level,
        growth,
        intervals: intervals.to_vec(),
        points,
        keys,
        weights,
        provenance,
        active,
        tensor_points,
        rules,
    })
}

impl SparseGrid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Σ over active indices of coefficient × tensor-grid size.
    pub fn weighted_multiplicity(&self) -> i64 {
        self.active
            .iter()
            .zip(&self.tensor_points)
            .map(|((_, c), m)| c * m.len() as i64)
            .sum()
    }

    /// Writes one CSV row per point: the coordinates followed by the weight.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.dim)
            .map(|n| format!("y{n}"))
            .chain(std::iter::once("weight".to_string()))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        for (y, w) in self.points.iter().zip(&self.weights) {
            let row: Vec<String> = y.iter().chain(std::iter::once(w)).map(|v| format!("{v:e}")).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Smolyak interpolant `A_{ℓ,N}Q(y)` from point values aligned with `points`.
    pub fn interpolate(&self, values: &[f64], y: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} points",
                values.len(),
                self.len()
            )));
        }
        if y.len() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "point of length {} in dimension {}",
                y.len(),
                self.dim
            )));
        }
        for (&v, &(a, b)) in y.iter().zip(&self.intervals) {
            if !(v >= a && v <= b) {
                return Err(Error::Domain(format!("{v} outside [{a}, {b}]")));
            }
        }
        // Per dimension and per 1D index: Lagrange values at y_n.
        let mut basis: HashMap<(usize, u32), Vec<f64>> = HashMap::new();
        let mut total = 0.0;
        for ((j, c), members) in self.active.iter().zip(&self.tensor_points) {
            let mut local = Vec::with_capacity(self.dim);
            for (n, &jn) in j.iter().enumerate() {
                let entry = basis.entry((n, jn)).or_insert_with(|| {
                    let rule = &self.rules[&jn];
                    let (a, b) = self.intervals[n];
                    let nodes: Vec<f64> = rule.nodes.iter().map(|&x| map_point(x, a, b)).collect();
                    (0..nodes.len())
                        .map(|i| lagrange_unchecked(&nodes, i, y[n]))
                        .collect()
                });
                local.push(entry.clone());
            }
            let dims: Vec<usize> = local.iter().map(|l| l.len()).collect();
            let mut idx = vec![0usize; self.dim];
            let mut sum = 0.0;
            for &p in members {
                let w: f64 = idx.iter().zip(&local).map(|(&i, l)| l[i]).product();
                sum += values[p] * w;
                advance(&mut idx, &dims);
            }
            total += *c as f64 * sum;
        }
        Ok(total)
    }
}

/// `(Σ w_i v_i, Σ w_i v_i²)` over the grid.
pub fn sparse_quadrature(grid: &SparseGrid, values: &[f64]) -> Result<(f64, f64)> {
    if values.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} values for {} points",
            values.len(),
            grid.len()
        )));
    }
    let mut e = 0.0;
    let mut e2 = 0.0;
    for (w, v) in grid.weights.iter().zip(values) {
        e += w * v;
        e2 += w * v * v;
    }
    Ok((e, e2))
}
