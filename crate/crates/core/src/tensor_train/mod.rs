//! Tensor-train representations and cross approximation.
//!
//! An `N`-tensor `A(i_1, …, i_N)` is stored as a chain of order-3 cores
//! `G_n` of shape `R_{n−1} × I_n × R_n` with `R_0 = R_N = 1`, so that
//! `A(i) = G_1(i_1) G_2(i_2) ⋯ G_N(i_N)` is a product of small matrices.
//! Storage is `Σ R_{n−1} I_n R_n`, linear in `N` for bounded ranks.
//!
//! The cross algorithms ([`tt_cross_fixed_rank`], [`greedy_tt_cross`]) build
//! such chains from a [`FunctionOracle`] that is queried entry by entry and
//! never materialised.
//!
//! ```
//! use etuq::tensor_train::{rank_one_weights, tt_dot};
//!
//! let w = rank_one_weights(&vec![vec![0.5, 0.5]; 12]).unwrap();
//! let ones = rank_one_weights(&vec![vec![1.0, 1.0]; 12]).unwrap();
//! assert!((tt_dot(&w, &ones).unwrap() - 1.0).abs() < 1e-15);
//! ```

mod cross;
mod greedy;
pub mod linalg;

pub use cross::{matrix_cross, tt_cross_fixed_rank, CrossOptions, Skeleton};
pub use greedy::{greedy_tt_cross, greedy_tt_cross_with, GreedyDiagnostics, GreedyOptions, SweepReport};
pub use linalg::{maxvol, truncated_svd, TruncatedSvd};

use crate::cache::EvalCache;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Dense tensors are only for oracles and tests.
pub const MAX_DENSE_ENTRIES: usize = 10_000_000;
pub const MAX_DENSE_ORDER: usize = 16;
/// Largest interface rank produced by [`tt_hadamard`].
pub const MAX_HADAMARD_RANK: usize = 4096;

/// Dense tensor with the first index varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

fn check_dense_dims(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() || dims.len() > MAX_DENSE_ORDER {
        return Err(Error::Capacity(format!("dense tensor of order {}", dims.len())));
    }
    let mut count: usize = 1;
    for &d in dims {
        if d == 0 {
            return Err(Error::Domain("zero mode size".into()));
        }
        count = count.saturating_mul(d);
    }
    if count > MAX_DENSE_ENTRIES {
        return Err(Error::Capacity(format!("dense tensor with {count} entries")));
    }
    Ok(count)
}

impl DenseTensor {
    pub fn from_fn<F: FnMut(&[usize]) -> f64>(dims: &[usize], mut f: F) -> Result<Self> {
        let count = check_dense_dims(dims)?;
        let mut data = Vec::with_capacity(count);
        let mut idx = vec![0usize; dims.len()];
        loop {
            data.push(f(&idx));
            if !crate::sparse_grid::advance(&mut idx, dims) {
                break;
            }
        }
        Ok(DenseTensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn linear_index(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.dims.len() {
            return Err(Error::DimensionMismatch(format!(
                "index of length {} for order {}",
                idx.len(),
                self.dims.len()
            )));
        }
        let mut lin = 0;
        let mut stride = 1;
        for (&i, &d) in idx.iter().zip(&self.dims) {
            if i >= d {
                return Err(Error::Domain(format!("index {i} out of range {d}")));
            }
            lin += i * stride;
            stride *= d;
        }
        Ok(lin)
    }

    pub fn get(&self, idx: &[usize]) -> Result<f64> {
        Ok(self.data[self.linear_index(idx)?])
    }

    pub fn max_abs_diff(&self, other: &DenseTensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `n`-th unfolding: rows `(i_1..i_n)`, columns `(i_{n+1}..i_N)`, first index fastest.
pub fn unfold(a: &DenseTensor, n: usize) -> Result<DMatrix<f64>> {
    let order = a.dims.len();
    if n == 0 || n >= order {
        return Err(Error::Domain(format!("unfolding {n} of an order-{order} tensor")));
    }
    let rows: usize = a.dims[..n].iter().product();
    let cols: usize = a.dims[n..].iter().product();
    Ok(DMatrix::from_column_slice(rows, cols, &a.data))
}

/// One TT-core of shape `left × mode × right`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtCore {
    pub left: usize,
    pub mode: usize,
    pub right: usize,
    pub data: Vec<f64>,
}

impl TtCore {
    pub fn zeros(left: usize, mode: usize, right: usize) -> Self {
        TtCore {
            left,
            mode,
            right,
            data: vec![0.0; left * mode * right],
        }
    }

    #[inline]
    pub fn at(&self, a: usize, i: usize, b: usize) -> f64 {
        self.data[(a * self.mode + i) * self.right + b]
    }

    #[inline]
    pub fn at_mut(&mut self, a: usize, i: usize, b: usize) -> &mut f64 {
        &mut self.data[(a * self.mode + i) * self.right + b]
    }

    /// The `left × right` matrix `G(i)`.
    pub fn slice(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.left, self.right, |a, b| self.at(a, i, b))
    }

    /// Core from a `(left·mode) × right` matrix whose row index is `a·mode + i`.
    pub(crate) fn from_row_matrix(left: usize, mode: usize, m: &DMatrix<f64>) -> Self {
        let right = m.ncols();
        let mut core = TtCore::zeros(left, mode, right);
        for r in 0..left * mode {
            for b in 0..right {
                core.data[r * right + b] = m[(r, b)];
            }
        }
        core
    }
}

/// Tensor in tensor-train format.
#[derive(Debug, Clone, PartialEq)]
pub struct TtTensor {
    pub cores: Vec<TtCore>,
}

impl TtTensor {
    pub fn new(cores: Vec<TtCore>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Domain("a tensor train needs at least one core".into()));
        }
        if cores[0].left != 1 || cores[cores.len() - 1].right != 1 {
            return Err(Error::DimensionMismatch("border ranks must be 1".into()));
        }
        for (k, w) in cores.windows(2).enumerate() {
            if w[0].right != w[1].left {
                return Err(Error::DimensionMismatch(format!(
                    "core {k} has right rank {} but core {} has left rank {}",
                    w[0].right,
                    k + 1,
                    w[1].left
                )));
            }
        }
        for c in &cores {
            if c.data.len() != c.left * c.mode * c.right || c.mode == 0 {
                return Err(Error::DimensionMismatch("core payload length".into()));
            }
        }
        Ok(TtTensor { cores })
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.mode).collect()
    }

    /// `(R_0, …, R_N)`.
    pub fn ranks(&self) -> Vec<usize> {
        std::iter::once(1).chain(self.cores.iter().map(|c| c.right)).collect()
    }

    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(1)
    }

    /// Number of stored values, `Σ R_{n−1} I_n R_n`.
    pub fn storage(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    pub fn eval(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.order() {
            return Err(Error::DimensionMismatch(format!(
                "index of length {} for order {}",
                idx.len(),
                self.order()
            )));
        }
        let mut v = vec![1.0];
        for (core, &i) in self.cores.iter().zip(idx) {
            if i >= core.mode {
                return Err(Error::Domain(format!("index {i} out of range {}", core.mode)));
            }
            let mut next = vec![0.0; core.right];
            for (a, &va) in v.iter().enumerate() {
                if va == 0.0 {
                    continue;
                }
                let row = &core.data[(a * core.mode + i) * core.right..][..core.right];
                for (n, r) in next.iter_mut().zip(row) {
                    *n += va * r;
                }
            }
            v = next;
        }
        Ok(v[0])
    }

    pub fn full(&self) -> Result<DenseTensor> {
        let dims = self.dims();
        check_dense_dims(&dims)?;
        DenseTensor::from_fn(&dims, |idx| self.eval(idx).expect("index in range"))
    }
}

/// Tensor-train evaluation `G_1(i_1) ⋯ G_N(i_N)`.
pub fn tt_eval(tt: &TtTensor, idx: &[usize]) -> Result<f64> {
    tt.eval(idx)
}

pub fn tt_full(tt: &TtTensor) -> Result<DenseTensor> {
    tt.full()
}

/// Exact (up to `tol`) tensor train of a dense tensor by sequential truncated SVD.
pub fn tt_svd(a: &DenseTensor, tol: f64) -> Result<TtTensor> {
    let dims = &a.dims;
    let order = dims.len();
    let mut cores = Vec::with_capacity(order);
    let mut rest = DMatrix::from_column_slice(dims[0], a.data.len() / dims[0], &a.data);
    let mut left = 1;
    for n in 0..order - 1 {
        let t = truncated_svd(&rest, tol, usize::MAX)?;
        let r = t.rank.max(1);
        let (u, s, v) = if t.rank == 0 {
            (DMatrix::zeros(rest.nrows(), 1), vec![0.0], DMatrix::zeros(rest.ncols(), 1))
        } else {
            (t.u, t.s, t.v)
        };
        // rest row index is a + left·i (column-major); cores want a·mode + i.
        let mut core = TtCore::zeros(left, dims[n], r);
        for i in 0..dims[n] {
            for al in 0..left {
                for b in 0..r {
                    *core.at_mut(al, i, b) = u[(al + left * i, b)];
                }
            }
        }
        cores.push(core);
        let mut sv = v.transpose();
        for (k, sk) in s.iter().enumerate() {
            sv.row_mut(k).scale_mut(*sk);
        }
        let next_cols = sv.ncols() / dims[n + 1];
        rest = DMatrix::from_column_slice(r * dims[n + 1], next_cols, sv.as_slice());
        left = r;
    }
    let last = dims[order - 1];
    let mut core = TtCore::zeros(left, last, 1);
    for i in 0..last {
        for al in 0..left {
            *core.at_mut(al, i, 0) = rest[(al + left * i, 0)];
        }
    }
    cores.push(core);
    TtTensor::new(cores)
}

/// Rank-one tensor train with entries `Π w_n(i_n)`.
pub fn rank_one_weights(weights: &[Vec<f64>]) -> Result<TtTensor> {
    if weights.iter().any(|w| w.is_empty()) {
        return Err(Error::Domain("empty weight vector".into()));
    }
    TtTensor::new(
        weights
            .iter()
            .map(|w| TtCore {
                left: 1,
                mode: w.len(),
                right: 1,
                data: w.clone(),
            })
            .collect(),
    )
}

fn check_same_dims(a: &TtTensor, b: &TtTensor) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "mode sizes {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// `⟨a, b⟩ = Σ_i a(i) b(i)` by sequential core contraction.
pub fn tt_dot(a: &TtTensor, b: &TtTensor) -> Result<f64> {
    check_same_dims(a, b)?;
    let mut m = DMatrix::from_element(1, 1, 1.0);
    for (ca, cb) in a.cores.iter().zip(&b.cores) {
        let mut next = DMatrix::zeros(ca.right, cb.right);
        for i in 0..ca.mode {
            next += ca.slice(i).transpose() * &m * cb.slice(i);
        }
        m = next;
    }
    Ok(m[(0, 0)])
}

/// Elementwise product; interface ranks multiply.
pub fn tt_hadamard(a: &TtTensor, b: &TtTensor) -> Result<TtTensor> {
    check_same_dims(a, b)?;
    let mut cores = Vec::with_capacity(a.order());
    for (ca, cb) in a.cores.iter().zip(&b.cores) {
        let left = ca.left * cb.left;
        let right = ca.right * cb.right;
        if left.max(right) > MAX_HADAMARD_RANK {
            return Err(Error::Capacity(format!(
                "Hadamard rank {} exceeds {MAX_HADAMARD_RANK}",
                left.max(right)
            )));
        }
        let mut core = TtCore::zeros(left, ca.mode, right);
        for i in 0..ca.mode {
            for a1 in 0..ca.left {
                for a2 in 0..cb.left {
                    for b1 in 0..ca.right {
                        let x = ca.at(a1, i, b1);
                        for b2 in 0..cb.right {
                            *core.at_mut(a1 * cb.left + a2, i, b1 * cb.right + b2) = x * cb.at(a2, i, b2);
                        }
                    }
                }
            }
        }
        cores.push(core);
    }
    TtTensor::new(cores)
}

#[derive(Serialize, Deserialize)]
struct TtFile {
    format: String,
    version: u32,
    dims: Vec<usize>,
    ranks: Vec<usize>,
    /// Row-major payload of each core, `(r_{n−1}, i_n, r_n)` with `r_n` fastest.
    cores: Vec<Vec<f64>>,
}

const TT_FORMAT: &str = "etuq-tt";
const TT_VERSION: u32 = 1;

impl TtTensor {
    pub fn to_json(&self) -> Result<String> {
        let file = TtFile {
            format: TT_FORMAT.into(),
            version: TT_VERSION,
            dims: self.dims(),
            ranks: self.ranks(),
            cores: self.cores.iter().map(|c| c.data.clone()).collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TtFile = serde_json::from_str(text)?;
        if file.format != TT_FORMAT || file.version != TT_VERSION {
            return Err(Error::Parse(format!(
                "unsupported container {} v{}",
                file.format, file.version
            )));
        }
        if file.ranks.len() != file.dims.len() + 1 || file.cores.len() != file.dims.len() {
            return Err(Error::Parse("dims/ranks/cores lengths disagree".into()));
        }
        let cores = file
            .dims
            .iter()
            .zip(file.cores)
            .enumerate()
            .map(|(n, (&mode, data))| TtCore {
                left: file.ranks[n],
                mode,
                right: file.ranks[n + 1],
                data,
            })
            .collect();
        TtTensor::new(cores).map_err(|e| Error::Parse(e.to_string()))
    }
}

type Evaluator<'a> = Box<dyn Fn(&[usize]) -> Result<f64> + Send + Sync + 'a>;

/// Entry oracle for a tensor that is never stored.
///
/// Every distinct multi-index is evaluated at most once, also under
/// concurrent batch requests; [`FunctionOracle::calls`] counts the distinct
/// evaluations.
pub struct FunctionOracle<'a> {
    dims: Vec<usize>,
    eval: Evaluator<'a>,
    cache: EvalCache<Vec<usize>>,
}

impl<'a> FunctionOracle<'a> {
    pub fn new<F>(dims: Vec<usize>, f: F) -> Self
    where
        F: Fn(&[usize]) -> f64 + Send + Sync + 'a,
    {
        Self::try_new(dims, move |i| Ok(f(i)))
    }

    pub fn try_new<F>(dims: Vec<usize>, f: F) -> Self
    where
        F: Fn(&[usize]) -> Result<f64> + Send + Sync + 'a,
    {
        FunctionOracle {
            dims,
            eval: Box::new(f),
            cache: EvalCache::new(),
        }
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn calls(&self) -> usize {
        self.cache.evaluations()
    }

    pub fn eval(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.dims.len() || idx.iter().zip(&self.dims).any(|(i, d)| i >= d) {
            return Err(Error::Domain(format!("index {idx:?} outside {:?}", self.dims)));
        }
        let key = idx.to_vec();
        self.cache.get_or_eval(&key, || (self.eval)(idx))
    }

    /// Evaluates a batch, possibly in parallel; results keep the input order.
    pub fn eval_batch(&self, indices: &[Vec<usize>]) -> Result<Vec<f64>> {
        indices.par_iter().map(|i| self.eval(i)).collect()
    }
}
