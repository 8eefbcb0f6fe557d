//! Rank-revealing greedy TT-cross with two-core (supercore) pivot search.
//!
//! Each interface `k` between modes `k−1` and `k` keeps nested cross sets:
//! prefixes `left[k]` over modes `0..k` and suffixes `right[k]` over modes
//! `k..N`. A step evaluates the supercore `A(left[k−1] × I_{k−1}, I_k × right[k+1])`,
//! compares it with its current cross interpolant and appends the entry of
//! largest error as a new pivot. The TT is assembled from the cross sets by
//! `G_k = A(left[k] × I_k, right[k+1]) · A(left[k+1], right[k+1])⁺`, where the
//! pseudo-inverse is a truncated SVD (the decimation step).
//!
//! A sweep is a left-to-right pass over all interfaces followed by a
//! right-to-left pass over the interfaces that did not receive a pivot on the
//! way out, so every interface rank grows by at most one per sweep.

use super::linalg::truncated_svd;
use super::{FunctionOracle, TtCore, TtTensor};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyOptions {
    /// Sweep budget (at least 1).
    pub sweeps: usize,
    /// Pivots whose error is at most `tol · max|A|` are not added.
    pub tol: f64,
    pub rank_cap: usize,
    /// Relative tolerance of the truncated SVD used to invert pivot matrices.
    pub decimation_tol: f64,
    pub seed: u64,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        GreedyOptions {
            sweeps: 10,
            tol: 1e-10,
            rank_cap: 64,
            decimation_tol: 1e-10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// 1-based sweep number.
    pub sweep: usize,
    /// Distinct oracle evaluations so far (cumulative).
    pub calls: usize,
    pub max_rank: usize,
    pub ranks: Vec<usize>,
    /// Largest absolute interpolation error found in the scanned supercores.
    pub max_error: f64,
    pub pivots_added: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyDiagnostics {
    pub seed: u64,
    pub start_index: Vec<usize>,
    /// Largest `|A|` seen; pivot errors are compared against `tol` times this.
    pub scale: f64,
    pub sweeps: Vec<SweepReport>,
    pub converged: bool,
}

impl GreedyDiagnostics {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct State<'o, 'a> {
    oracle: &'o FunctionOracle<'a>,
    dims: Vec<usize>,
    left: Vec<Vec<Vec<usize>>>,
    right: Vec<Vec<Vec<usize>>>,
    scale: f64,
    opts: GreedyOptions,
}

fn concat(prefix: &[usize], mid: &[usize], suffix: &[usize]) -> Vec<usize> {
    let mut v = Vec::with_capacity(prefix.len() + mid.len() + suffix.len());
    v.extend_from_slice(prefix);
    v.extend_from_slice(mid);
    v.extend_from_slice(suffix);
    v
}

fn position(set: &[Vec<usize>], item: &[usize]) -> Option<usize> {
    set.iter().position(|s| s.as_slice() == item)
}

impl State<'_, '_> {
    fn evaluate(&mut self, indices: &[Vec<usize>]) -> Result<Vec<f64>> {
        let vals = self.oracle.eval_batch(indices)?;
        for v in &vals {
            if !v.is_finite() {
                return Err(Error::Numerical("oracle returned a non-finite value".into()));
            }
            self.scale = self.scale.max(v.abs());
        }
        Ok(vals)
    }

    /// Supercore at interface `k`: rows `a·I_{k−1} + i`, columns `j·|right[k+1]| + b`.
    fn supercore(&mut self, k: usize) -> Result<DMatrix<f64>> {
        let (ip, iq) = (self.dims[k - 1], self.dims[k]);
        let (lp, rq) = (&self.left[k - 1], &self.right[k + 1]);
        let rows = lp.len() * ip;
        let cols = iq * rq.len();
        let mut idx = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                idx.push(concat(&lp[r / ip], &[r % ip, c / rq.len()], &rq[c % rq.len()]));
            }
        }
        let vals = self.evaluate(&idx)?;
        Ok(DMatrix::from_column_slice(rows, cols, &vals))
    }

    fn row_key(&self, k: usize, r: usize) -> Vec<usize> {
        let ip = self.dims[k - 1];
        concat(&self.left[k - 1][r / ip], &[r % ip], &[])
    }

    fn col_key(&self, k: usize, c: usize) -> Vec<usize> {
        let rq = self.right[k + 1].len();
        concat(&[], &[c / rq], &self.right[k + 1][c % rq])
    }

    /// Tries to add one pivot at interface `k`; returns (added, max error).
    fn step(&mut self, k: usize) -> Result<(bool, f64)> {
        let b = self.supercore(k)?;
        let rows: Vec<usize> = self.left[k]
            .iter()
            .map(|p| {
                let ip = self.dims[k - 1];
                let a = position(&self.left[k - 1], &p[..k - 1]).expect("nested left sets");
                a * ip + p[k - 1]
            })
            .collect();
        let rq = self.right[k + 1].len();
        let cols: Vec<usize> = self.right[k]
            .iter()
            .map(|s| {
                let b = position(&self.right[k + 1], &s[1..]).expect("nested right sets");
                s[0] * rq + b
            })
            .collect();
        let c = b.select_columns(&cols);
        let r = b.select_rows(&rows);
        let p = c.select_rows(&rows);
        let coeff = p.full_piv_lu().solve(&r).ok_or_else(|| {
            Error::Numerical(format!("pivot matrix at interface {k} became singular"))
        })?;
        let err = &b - &c * coeff;
        // lowest row-major index wins ties
        let mut best = (0, 0, -1.0);
        for i in 0..err.nrows() {
            for j in 0..err.ncols() {
                let v = err[(i, j)].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        let (bi, bj, e) = best;
        if !(e > self.opts.tol * self.scale) || self.left[k].len() >= self.opts.rank_cap {
            return Ok((false, e.max(0.0)));
        }
        if rows.contains(&bi) || cols.contains(&bj) {
            return Ok((false, e));
        }
        let mut new_rows = rows.clone();
        new_rows.push(bi);
        let mut new_cols = cols.clone();
        new_cols.push(bj);
        let grown = b.select_rows(&new_rows).select_columns(&new_cols);
        let dec = truncated_svd(&grown, self.opts.decimation_tol, usize::MAX)?;
        if dec.rank < new_rows.len() {
            return Ok((false, e));
        }
        let rk = self.row_key(k, bi);
        let ck = self.col_key(k, bj);
        self.left[k].push(rk);
        self.right[k].push(ck);
        Ok((true, e))
    }

    fn ranks(&self) -> Vec<usize> {
        let n = self.dims.len();
        (0..=n)
            .map(|k| if k == 0 || k == n { 1 } else { self.left[k].len() })
            .collect()
    }

    fn assemble(&mut self) -> Result<TtTensor> {
        let n = self.dims.len();
        let mut cores = Vec::with_capacity(n);
        for k in 0..n {
            let ik = self.dims[k];
            let (lk, rk1) = (self.left[k].clone(), self.right[k + 1].clone());
            let rows = lk.len() * ik;
            let mut idx = Vec::with_capacity(rows * rk1.len());
            for s in &rk1 {
                for r in 0..rows {
                    idx.push(concat(&lk[r / ik], &[r % ik], s));
                }
            }
            let vals = self.evaluate(&idx)?;
            let fiber = DMatrix::from_column_slice(rows, rk1.len(), &vals);
            if k + 1 == n {
                cores.push(TtCore::from_row_matrix(lk.len(), ik, &fiber));
                continue;
            }
            let pos: Vec<usize> = self.left[k + 1]
                .iter()
                .map(|p| position(&lk, &p[..k]).expect("nested left sets") * ik + p[k])
                .collect();
            let pivot = fiber.select_rows(&pos);
            let dec = truncated_svd(&pivot, self.opts.decimation_tol, usize::MAX)?;
            if dec.rank == 0 {
                return Err(Error::Numerical(format!("pivot matrix at interface {} is zero", k + 1)));
            }
            cores.push(TtCore::from_row_matrix(lk.len(), ik, &dec.right_pseudo_solve(&fiber)));
        }
        TtTensor::new(cores)
    }
}

/// Greedy TT-cross; see the module documentation for the sweep structure.
pub fn greedy_tt_cross(oracle: &FunctionOracle, opts: &GreedyOptions) -> Result<(TtTensor, GreedyDiagnostics)> {
    greedy_tt_cross_with(oracle, opts, |_, _| {})
}

/// As [`greedy_tt_cross`], calling `on_sweep` with the report and the
/// assembled TT after every sweep.
pub fn greedy_tt_cross_with<F>(
    oracle: &FunctionOracle,
    opts: &GreedyOptions,
    mut on_sweep: F,
) -> Result<(TtTensor, GreedyDiagnostics)>
where
    F: FnMut(&SweepReport, &TtTensor),
{
    if opts.sweeps == 0 {
        return Err(Error::Domain("sweep budget must be at least 1".into()));
    }
    if opts.rank_cap == 0 || !(opts.tol >= 0.0) || !(opts.decimation_tol >= 0.0) {
        return Err(Error::Domain(format!("invalid greedy options {opts:?}")));
    }
    let dims = oracle.dims().to_vec();
    let n = dims.len();
    if n == 0 || dims.contains(&0) {
        return Err(Error::Domain(format!("invalid oracle dims {dims:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let candidates: Vec<Vec<usize>> = (0..16)
        .map(|_| dims.iter().map(|&d| rng.gen_range(0..d)).collect())
        .collect();
    let vals = oracle.eval_batch(&candidates)?;
    let mut start = 0;
    for (c, v) in vals.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Numerical("oracle returned a non-finite value".into()));
        }
        if v.abs() > vals[start].abs() {
            start = c;
        }
    }
    if vals[start] == 0.0 {
        return Err(Error::Numerical(
            "all sampled start entries are zero; no pivot to start from".into(),
        ));
    }
    let start_index = candidates[start].clone();
    let mut state = State {
        oracle,
        dims: dims.clone(),
        left: (0..=n).map(|k| vec![start_index[..k].to_vec()]).collect(),
        right: (0..=n).map(|k| vec![start_index[k..].to_vec()]).collect(),
        scale: vals.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        opts: *opts,
    };
    let mut diag = GreedyDiagnostics {
        seed: opts.seed,
        start_index,
        scale: state.scale,
        sweeps: Vec::new(),
        converged: false,
    };
    let mut tt = None;
    for sweep in 1..=opts.sweeps {
        let mut touched = vec![false; n];
        let mut max_error: f64 = 0.0;
        let mut added = 0;
        for k in 1..n {
            let (ok, e) = state.step(k)?;
            max_error = max_error.max(e);
            if ok {
                touched[k] = true;
                added += 1;
            }
        }
        for k in (1..n).rev() {
            if touched[k] {
                continue;
            }
            let (ok, e) = state.step(k)?;
            max_error = max_error.max(e);
            if ok {
                added += 1;
            }
        }
        let current = state.assemble()?;
        let ranks = state.ranks();
        let report = SweepReport {
            sweep,
            calls: oracle.calls(),
            max_rank: ranks.iter().copied().max().unwrap_or(1),
            ranks,
            max_error,
            pivots_added: added,
        };
        on_sweep(&report, &current);
        diag.sweeps.push(report);
        tt = Some(current);
        if added == 0 {
            diag.converged = true;
            break;
        }
    }
    diag.scale = state.scale;
    Ok((tt.expect("at least one sweep"), diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_train::DenseTensor;

    fn separable_terms(dims: &[usize], terms: usize, seed: u64) -> Vec<Vec<Vec<f64>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..terms)
            .map(|_| dims.iter().map(|&d| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect())
            .collect()
    }

    fn eval_terms(f: &[Vec<Vec<f64>>], idx: &[usize]) -> f64 {
        f.iter()
            .map(|t| t.iter().zip(idx).map(|(v, &i)| v[i]).product::<f64>())
            .sum()
    }

    #[test]
    fn separable_converges_after_one_sweep() {
        let dims = vec![2; 12];
        let f: Vec<Vec<f64>> = (0..12).map(|n| vec![1.0 + 0.1 * n as f64, 0.7 - 0.02 * n as f64]).collect();
        let func = |i: &[usize]| f.iter().zip(i).map(|(v, &k)| v[k]).product::<f64>();
        let o = FunctionOracle::new(dims.clone(), func);
        let (tt, diag) = greedy_tt_cross(&o, &GreedyOptions::default()).unwrap();
        assert!(diag.converged);
        assert_eq!(diag.sweeps.len(), 1);
        assert!(o.calls() < 4096);
        let dense = DenseTensor::from_fn(&dims, func).unwrap();
        assert!(tt.full().unwrap().max_abs_diff(&dense) <= 1e-12);
    }

    #[test]
    fn recovers_sums_of_separable_terms() {
        let dims = vec![5; 4];
        for k in 1..=3 {
            let f = separable_terms(&dims, k, 10 + k as u64);
            let o = FunctionOracle::new(dims.clone(), |i| eval_terms(&f, i));
            let opts = GreedyOptions { sweeps: k + 1, ..Default::default() };
            let (tt, diag) = greedy_tt_cross(&o, &opts).unwrap();
            let dense = DenseTensor::from_fn(&dims, |i| eval_terms(&f, i)).unwrap();
            let err = tt.full().unwrap().max_abs_diff(&dense);
            assert!(err <= 1e-10, "k={k}: err {err}, {diag:?}");
        }
    }

    #[test]
    fn rank_grows_by_at_most_one_per_sweep() {
        let dims = vec![3; 6];
        let func = |i: &[usize]| {
            let s: f64 = i.iter().enumerate().map(|(n, &k)| (n + 1) as f64 * k as f64).sum();
            1.0 / (1.0 + 0.1 * s)
        };
        let o = FunctionOracle::new(dims, func);
        let opts = GreedyOptions { sweeps: 5, tol: 0.0, ..Default::default() };
        let (_, diag) = greedy_tt_cross(&o, &opts).unwrap();
        for r in &diag.sweeps {
            assert!(r.max_rank <= r.sweep + 1, "{r:?}");
        }
        assert!(diag.sweeps.windows(2).all(|w| w[0].calls <= w[1].calls));
    }

    #[test]
    fn calls_grow_linearly_in_order() {
        let mut calls = Vec::new();
        for n in [4usize, 8, 12, 16] {
            let func = move |i: &[usize]| {
                let a: f64 = i.iter().enumerate().map(|(k, &v)| (1.0 + 0.2 * v as f64) / (1.0 + k as f64 * 0.01)).product();
                let b: f64 = i.iter().map(|&v| 0.5 + 0.3 * v as f64).product();
                a + b
            };
            let o = FunctionOracle::new(vec![2; n], func);
            let opts = GreedyOptions { sweeps: 2, ..Default::default() };
            greedy_tt_cross(&o, &opts).unwrap();
            calls.push(o.calls() as f64 / n as f64);
        }
        let (lo, hi) = calls.iter().fold((f64::MAX, 0.0f64), |(l, h), &c| (l.min(c), h.max(c)));
        assert!(hi <= 2.0 * lo, "calls per dimension {calls:?}");
    }

    #[test]
    fn sweep_callback_sees_every_sweep() {
        let f = separable_terms(&[4, 4, 4], 2, 3);
        let o = FunctionOracle::new(vec![4, 4, 4], |i| eval_terms(&f, i));
        let mut seen = Vec::new();
        let opts = GreedyOptions { sweeps: 4, ..Default::default() };
        let (tt, diag) = greedy_tt_cross_with(&o, &opts, |r, t| seen.push((r.sweep, t.max_rank()))).unwrap();
        assert_eq!(seen.len(), diag.sweeps.len());
        assert_eq!(seen.last().unwrap().1, tt.max_rank());
        let json = diag.to_json().unwrap();
        assert!(json.contains("\"start_index\""));
    }

    #[test]
    fn order_one_and_zero_oracle() {
        let o = FunctionOracle::new(vec![7], |i| i[0] as f64 + 1.0);
        let (tt, diag) = greedy_tt_cross(&o, &GreedyOptions::default()).unwrap();
        assert!(diag.converged);
        for i in 0..7 {
            assert_eq!(tt.eval(&[i]).unwrap(), i as f64 + 1.0);
        }
        let z = FunctionOracle::new(vec![3, 3], |_| 0.0);
        assert!(matches!(greedy_tt_cross(&z, &GreedyOptions::default()), Err(Error::Numerical(_))));
        let bad = GreedyOptions { sweeps: 0, ..Default::default() };
        assert!(greedy_tt_cross(&o, &bad).is_err());
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let f = separable_terms(&[3; 5], 3, 4);
        let run = || {
            let o = FunctionOracle::new(vec![3; 5], |i| eval_terms(&f, i));
            greedy_tt_cross(&o, &GreedyOptions { sweeps: 3, seed: 9, ..Default::default() }).unwrap()
        };
        let (a, da) = run();
        let (b, db) = run();
        assert_eq!(a, b);
        assert_eq!(da, db);
    }
}
