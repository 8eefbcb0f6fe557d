//! Skeleton (cross) approximation of matrices and fixed-rank TT-cross.

use super::linalg::{maxvol, thin_q, truncated_svd};
use super::{FunctionOracle, TtCore, TtTensor};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CrossOptions {
    /// Alternating passes (matrix cross) or left-to-right passes (TT-cross).
    pub sweeps: usize,
    /// maxvol dominance tolerance.
    pub maxvol_tol: f64,
    pub seed: u64,
}

impl Default for CrossOptions {
    fn default() -> Self {
        CrossOptions {
            sweeps: 4,
            maxvol_tol: 1e-2,
            seed: 0,
        }
    }
}

/// `A ≈ A(:, cols) · A(rows, cols)⁻¹ · A(rows, :)`.
#[derive(Debug, Clone)]
pub struct Skeleton {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// `A(:, cols)`.
    pub c: DMatrix<f64>,
    /// `A(rows, cols)`.
    pub pivot: DMatrix<f64>,
    /// `A(rows, :)`.
    pub r: DMatrix<f64>,
    /// `A(rows, cols)⁻¹ · A(rows, :)`.
    coeff: DMatrix<f64>,
    /// Oracle evaluations spent, including the pivot search.
    pub calls: usize,
    /// Alternating passes actually performed.
    pub passes: usize,
}

impl Skeleton {
    pub fn eval(&self, i: usize, j: usize) -> f64 {
        self.c.row(i).dot(&self.coeff.column(j).transpose())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.c * &self.coeff
    }
}

fn evaluate_matrix(
    oracle: &FunctionOracle,
    rows: &[usize],
    cols: &[usize],
    index: impl Fn(usize, usize) -> Vec<usize>,
) -> Result<DMatrix<f64>> {
    let idx: Vec<Vec<usize>> = cols
        .iter()
        .flat_map(|&c| rows.iter().map(move |&r| (r, c)))
        .map(|(r, c)| index(r, c))
        .collect();
    let vals = oracle.eval_batch(&idx)?;
    Ok(DMatrix::from_column_slice(rows.len(), cols.len(), &vals))
}

/// Orthonormal basis of a fiber matrix that must have full column rank.
fn fiber_basis(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let rank = truncated_svd(c, 1e-13, usize::MAX)?.rank;
    if rank < c.ncols() {
        return Err(Error::Numerical(format!(
            "fiber matrix has rank {rank} < {}; the cross submatrix is singular, lower the requested rank",
            c.ncols()
        )));
    }
    Ok(thin_q(c))
}

fn singular_cross(e: Error) -> Error {
    match e {
        Error::Numerical(msg) => Error::Numerical(format!(
            "{msg}; the cross submatrix is singular, lower the requested rank"
        )),
        other => other,
    }
}

/// Rank-`rank` cross approximation of a 2D oracle by alternating maxvol.
pub fn matrix_cross(oracle: &FunctionOracle, rank: usize, opts: &CrossOptions) -> Result<Skeleton> {
    let dims = oracle.dims();
    if dims.len() != 2 {
        return Err(Error::DimensionMismatch(format!("matrix cross needs a 2D oracle, got {dims:?}")));
    }
    let (m, n) = (dims[0], dims[1]);
    if rank == 0 || rank > m.min(n) {
        return Err(Error::Domain(format!("rank {rank} for a {m}x{n} matrix")));
    }
    let start = oracle.calls();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut cols: Vec<usize> = (0..n).collect();
    cols.shuffle(&mut rng);
    cols.truncate(rank);
    let all_rows: Vec<usize> = (0..m).collect();
    let all_cols: Vec<usize> = (0..n).collect();
    let mut rows: Vec<usize> = Vec::new();
    let mut passes = 0;
    for _ in 0..opts.sweeps.max(1) {
        passes += 1;
        let c = evaluate_matrix(oracle, &all_rows, &cols, |r, c| vec![r, c])?;
        let new_rows: Vec<usize> = maxvol(&fiber_basis(&c)?, opts.maxvol_tol)
            .map_err(singular_cross)?
            .into_iter()
            .collect();
        let r = evaluate_matrix(oracle, &new_rows, &all_cols, |r, c| vec![r, c])?;
        let new_cols = maxvol(&fiber_basis(&r.transpose())?, opts.maxvol_tol).map_err(singular_cross)?;
        let stable = sorted(&new_rows) == sorted(&rows) && sorted(&new_cols) == sorted(&cols);
        rows = new_rows;
        cols = new_cols;
        if stable {
            break;
        }
    }
    let c = evaluate_matrix(oracle, &all_rows, &cols, |r, c| vec![r, c])?;
    let r = evaluate_matrix(oracle, &rows, &all_cols, |r, c| vec![r, c])?;
    let pivot = c.select_rows(&rows);
    let coeff = pivot
        .clone()
        .full_piv_lu()
        .solve(&r)
        .ok_or_else(|| Error::Numerical("singular cross submatrix; lower the requested rank".into()))?;
    Ok(Skeleton {
        rows,
        cols,
        c,
        pivot,
        r,
        coeff,
        calls: oracle.calls() - start,
        passes,
    })
}

fn sorted(v: &[usize]) -> Vec<usize> {
    let mut s = v.to_vec();
    s.sort_unstable();
    s
}

/// Random nested right index sets: `right[k]` holds suffixes over modes `k..N`.
pub(super) fn random_right_sets(dims: &[usize], ranks: &[usize], rng: &mut ChaCha8Rng) -> Vec<Vec<Vec<usize>>> {
    let order = dims.len();
    let mut right = vec![Vec::new(); order + 1];
    right[order] = vec![vec![]];
    for k in (1..order).rev() {
        let mut candidates: Vec<Vec<usize>> = (0..dims[k])
            .flat_map(|i| right[k + 1].iter().map(move |s| (i, s)))
            .map(|(i, s)| std::iter::once(i).chain(s.iter().copied()).collect())
            .collect();
        candidates.shuffle(rng);
        candidates.truncate(ranks[k]);
        right[k] = candidates;
    }
    right
}

fn join(prefix: &[usize], i: usize, suffix: &[usize]) -> Vec<usize> {
    let mut v = Vec::with_capacity(prefix.len() + 1 + suffix.len());
    v.extend_from_slice(prefix);
    v.push(i);
    v.extend_from_slice(suffix);
    v
}

/// Fiber matrix `A(left × [I], right)` with row index `a·I + i`.
pub(super) fn left_fiber(
    oracle: &FunctionOracle,
    left: &[Vec<usize>],
    mode: usize,
    right: &[Vec<usize>],
) -> Result<DMatrix<f64>> {
    let rows = left.len() * mode;
    let idx: Vec<Vec<usize>> = right
        .iter()
        .flat_map(|s| (0..rows).map(move |r| (r, s)))
        .map(|(r, s)| join(&left[r / mode], r % mode, s))
        .collect();
    let vals = oracle.eval_batch(&idx)?;
    Ok(DMatrix::from_column_slice(rows, right.len(), &vals))
}

/// Fiber matrix `A(left, [I] × right)` with column index `i·|right| + b`.
pub(super) fn right_fiber(
    oracle: &FunctionOracle,
    left: &[Vec<usize>],
    mode: usize,
    right: &[Vec<usize>],
) -> Result<DMatrix<f64>> {
    let cols = mode * right.len();
    let rr = right.len();
    let idx: Vec<Vec<usize>> = (0..cols)
        .flat_map(|c| left.iter().map(move |p| (p, c)))
        .map(|(p, c)| join(p, c / rr, &right[c % rr]))
        .collect();
    let vals = oracle.eval_batch(&idx)?;
    Ok(DMatrix::from_column_slice(left.len(), cols, &vals))
}

fn check_ranks(dims: &[usize], ranks: &[usize]) -> Result<()> {
    let order = dims.len();
    if ranks.len() != order + 1 || ranks[0] != 1 || ranks[order] != 1 {
        return Err(Error::Domain(format!(
            "ranks {ranks:?} must have length {} with unit borders",
            order + 1
        )));
    }
    for k in 1..order {
        if ranks[k] == 0 || ranks[k] > ranks[k - 1] * dims[k - 1] || ranks[k] > dims[k] * ranks[k + 1] {
            return Err(Error::Domain(format!(
                "rank {} at interface {k} is infeasible for modes {dims:?} and ranks {ranks:?}",
                ranks[k]
            )));
        }
    }
    Ok(())
}

/// TT-cross with prescribed ranks.
///
/// Alternates left-to-right passes (row sets from maxvol on orthogonalised
/// fibers) with right-to-left passes (column sets likewise); the result is
/// built on the last left-to-right pass and interpolates the oracle on the
/// selected crosses.
pub fn tt_cross_fixed_rank(oracle: &FunctionOracle, ranks: &[usize], opts: &CrossOptions) -> Result<TtTensor> {
    let dims = oracle.dims().to_vec();
    let order = dims.len();
    if order == 0 {
        return Err(Error::Domain("oracle of order 0".into()));
    }
    check_ranks(&dims, ranks)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut right = random_right_sets(&dims, ranks, &mut rng);
    let mut left: Vec<Vec<Vec<usize>>> = vec![Vec::new(); order + 1];
    left[0] = vec![vec![]];
    let sweeps = opts.sweeps.max(1);
    for pass in 0..sweeps {
        let mut cores = Vec::with_capacity(order);
        for k in 0..order - 1 {
            let c = left_fiber(oracle, &left[k], dims[k], &right[k + 1])?;
            let q = fiber_basis(&c)?;
            let sel = maxvol(&q, opts.maxvol_tol).map_err(singular_cross)?;
            let sub = q.select_rows(&sel);
            let inv = sub
                .try_inverse()
                .ok_or_else(|| singular_cross(Error::Numerical("pivot block not invertible".into())))?;
            cores.push(TtCore::from_row_matrix(left[k].len(), dims[k], &(&q * inv)));
            left[k + 1] = sel
                .iter()
                .map(|&r| {
                    let mut p = left[k][r / dims[k]].clone();
                    p.push(r % dims[k]);
                    p
                })
                .collect();
        }
        let last = left_fiber(oracle, &left[order - 1], dims[order - 1], &right[order])?;
        cores.push(TtCore::from_row_matrix(left[order - 1].len(), dims[order - 1], &last));
        if pass + 1 == sweeps {
            return TtTensor::new(cores);
        }
        for k in (1..order).rev() {
            let r = right_fiber(oracle, &left[k], dims[k], &right[k + 1])?;
            let q = fiber_basis(&r.transpose())?;
            let sel = maxvol(&q, opts.maxvol_tol).map_err(singular_cross)?;
            let rr = right[k + 1].len();
            right[k] = sel
                .iter()
                .map(|&c| join(&[], c / rr, &right[k + 1][c % rr]))
                .collect();
        }
    }
    unreachable!("loop returns on its last pass")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_train::{unfold, truncated_svd, DenseTensor};
    use rand::Rng;

    fn separable_sum(dims: &[usize], terms: usize, seed: u64) -> Vec<Vec<Vec<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..terms)
            .map(|_| dims.iter().map(|&d| (0..d).map(|_| rng.gen_range(0.5..1.5)).collect()).collect())
            .collect()
    }

    fn eval_sum(factors: &[Vec<Vec<f64>>], idx: &[usize]) -> f64 {
        factors
            .iter()
            .map(|t| t.iter().zip(idx).map(|(v, &i)| v[i]).product::<f64>())
            .sum()
    }

    #[test]
    fn matrix_cross_rank_one() {
        let u: Vec<f64> = (0..30).map(|i| 1.0 + (i as f64 * 0.3).sin()).collect();
        let v: Vec<f64> = (0..20).map(|j| 2.0 + (j as f64 * 0.7).cos()).collect();
        let o = FunctionOracle::new(vec![30, 20], |i| u[i[0]] * v[i[1]]);
        let s = matrix_cross(&o, 1, &CrossOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (i, j) = (rng.gen_range(0..30), rng.gen_range(0..20));
            assert!((s.eval(i, j) - u[i] * v[j]).abs() <= 1e-13);
        }
        let budget = (s.passes - 1) * (30 + 20);
        assert!(o.calls() <= (30 + 20) - 1 + budget);
    }

    #[test]
    fn matrix_cross_full_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DMatrix::from_fn(6, 4, |_, _| rng.gen_range(-1.0..1.0));
        let o = FunctionOracle::new(vec![6, 4], |i| a[(i[0], i[1])]);
        let s = matrix_cross(&o, 4, &CrossOptions::default()).unwrap();
        assert!((s.to_dense() - &a).amax() <= 1e-12);
        assert!(matrix_cross(&o, 5, &CrossOptions::default()).is_err());
    }

    #[test]
    fn fixed_rank_separable() {
        let f = separable_sum(&[4, 5, 3, 4], 1, 1);
        let o = FunctionOracle::new(vec![4, 5, 3, 4], |i| eval_sum(&f, i));
        let tt = tt_cross_fixed_rank(&o, &[1, 1, 1, 1, 1], &CrossOptions::default()).unwrap();
        let dense = DenseTensor::from_fn(&[4, 5, 3, 4], |i| eval_sum(&f, i)).unwrap();
        assert!(tt.full().unwrap().max_abs_diff(&dense) <= 1e-12);
    }

    #[test]
    fn fixed_rank_two_terms() {
        let f = separable_sum(&[5, 5, 5, 5], 2, 2);
        let o = FunctionOracle::new(vec![5; 4], |i| eval_sum(&f, i));
        let tt = tt_cross_fixed_rank(&o, &[1, 2, 2, 2, 1], &CrossOptions::default()).unwrap();
        let dense = DenseTensor::from_fn(&[5; 4], |i| eval_sum(&f, i)).unwrap();
        assert!(tt.full().unwrap().max_abs_diff(&dense) <= 1e-10);
    }

    #[test]
    fn underestimated_rank_is_bounded_by_best_rank_one() {
        let f = separable_sum(&[5, 5, 5, 5], 2, 8);
        let o = FunctionOracle::new(vec![5; 4], |i| eval_sum(&f, i));
        let tt = tt_cross_fixed_rank(&o, &[1, 1, 1, 1, 1], &CrossOptions::default()).unwrap();
        let dense = DenseTensor::from_fn(&[5; 4], |i| eval_sum(&f, i)).unwrap();
        let approx = tt.full().unwrap();
        let err: f64 = dense.data.iter().zip(&approx.data).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        for n in 1..4 {
            let s = truncated_svd(&unfold(&dense, n).unwrap(), 0.0, usize::MAX).unwrap().s;
            let best = s[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!(err >= best - 1e-12, "unfolding {n}: {err} < {best}");
        }
        assert!(err > 0.0);
    }

    #[test]
    fn infeasible_ranks() {
        let o = FunctionOracle::new(vec![2, 2, 2], |_| 1.0);
        assert!(tt_cross_fixed_rank(&o, &[1, 3, 1, 1], &CrossOptions::default()).is_err());
        assert!(tt_cross_fixed_rank(&o, &[1, 1, 1], &CrossOptions::default()).is_err());
    }

    #[test]
    fn singular_cross_is_reported() {
        // rank-1 tensor asked for rank 2
        let o = FunctionOracle::new(vec![3, 3, 3], |i| (1 + i[0]) as f64 * (1 + i[1]) as f64 * (1 + i[2]) as f64);
        let err = tt_cross_fixed_rank(&o, &[1, 2, 2, 1], &CrossOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Numerical(ref m) if m.contains("rank")), "{err:?}");
    }
}
