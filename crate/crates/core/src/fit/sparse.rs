//! Sparse kernels for the grid systems: a structurally symmetric CSR
//! pattern, a profile (skyline) LDLᵀ factorization on a reverse
//! Cuthill–McKee ordering, and preconditioned Krylov solvers.

use crate::error::{Error, Result};
use std::collections::VecDeque;
use std::sync::Arc;

/// Structurally symmetric sparsity pattern with an explicit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsePattern {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    diag: Vec<usize>,
}

impl SparsePattern {
    /// Pattern containing the diagonal and both `(a, b)` and `(b, a)` for every pair.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)]) -> Self {
        let mut adj: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for &(a, b) in pairs {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut diag = Vec::with_capacity(n);
        row_ptr.push(0);
        for (i, row) in adj.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            diag.push(cols.len() + row.iter().position(|&c| c == i).expect("diagonal present"));
            cols.extend_from_slice(row);
            row_ptr.push(cols.len());
        }
        SparsePattern { n, row_ptr, cols, diag }
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn diag_slot(&self, i: usize) -> usize {
        self.diag[i]
    }

    pub fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let row = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        row.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]]
    }
}

/// Slots of a two-node stamp: `(aa, bb, ab, ba)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StampSlots {
    pub aa: usize,
    pub bb: usize,
    pub ab: usize,
    pub ba: usize,
}

impl StampSlots {
    pub fn new(p: &SparsePattern, a: usize, b: usize) -> Self {
        StampSlots {
            aa: p.diag_slot(a),
            bb: p.diag_slot(b),
            ab: p.slot(a, b).expect("pair in pattern"),
            ba: p.slot(b, a).expect("pair in pattern"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub pattern: Arc<SparsePattern>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(pattern: Arc<SparsePattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        SparseMatrix { pattern, values }
    }

    pub fn n(&self) -> usize {
        self.pattern.n
    }

    pub fn clear(&mut self) {
        self.values.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.slot(i, j).map_or(0.0, |s| self.values[s])
    }

    /// Conductance stamp `g (e_a − e_b)(e_a − e_b)ᵀ`.
    #[inline]
    pub fn stamp(&mut self, s: &StampSlots, g: f64) {
        self.values[s.aa] += g;
        self.values[s.bb] += g;
        self.values[s.ab] -= g;
        self.values[s.ba] -= g;
    }

    #[inline]
    pub fn add_diag(&mut self, i: usize, v: f64) {
        let s = self.pattern.diag_slot(i);
        self.values[s] += v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let p = &self.pattern;
        for (i, yi) in y.iter_mut().enumerate() {
            let range = p.row_ptr[i]..p.row_ptr[i + 1];
            *yi = self.values[range.clone()]
                .iter()
                .zip(&p.cols[range])
                .map(|(v, &c)| v * x[c])
                .sum();
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let p = &self.pattern;
        (0..p.n).all(|i| {
            (p.row_ptr[i]..p.row_ptr[i + 1]).all(|s| {
                let j = p.cols[s];
                (self.values[s] - self.get(j, i)).abs() <= tol * self.values[s].abs().max(1.0)
            })
        })
    }
}

/// Reverse Cuthill–McKee ordering; `perm[new] = old`.
pub fn reverse_cuthill_mckee(p: &SparsePattern) -> Vec<usize> {
    let n = p.n;
    let degree: Vec<usize> = (0..n).map(|i| p.neighbors(i).len() - 1).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(p, seed, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = p.neighbors(v).iter().copied().filter(|&u| !visited[u]).collect();
            next.sort_by_key(|&u| (degree[u], u));
            for u in next {
                visited[u] = true;
                queue.push_back(u);
            }
        }
    }
    order.reverse();
    order
}

/// Breadth-first levels from `root`; returns (last level, eccentricity).
fn bfs_last_level(p: &SparsePattern, root: usize) -> (Vec<usize>, usize) {
    let mut dist = vec![usize::MAX; p.n];
    dist[root] = 0;
    let mut queue = VecDeque::from([root]);
    let mut last = vec![root];
    let mut ecc = 0;
    while let Some(v) = queue.pop_front() {
        for &u in p.neighbors(v) {
            if dist[u] == usize::MAX {
                dist[u] = dist[v] + 1;
                if dist[u] > ecc {
                    ecc = dist[u];
                    last.clear();
                }
                if dist[u] == ecc {
                    last.push(u);
                }
                queue.push_back(u);
            }
        }
    }
    (last, ecc)
}

fn pseudo_peripheral(p: &SparsePattern, seed: usize, degree: &[usize]) -> usize {
    let mut root = seed;
    let (mut last, mut ecc) = bfs_last_level(p, root);
    for _ in 0..8 {
        let cand = *last.iter().min_by_key(|&&u| (degree[u], u)).expect("nonempty level");
        let (l, e) = bfs_last_level(p, cand);
        if e <= ecc {
            break;
        }
        root = cand;
        last = l;
        ecc = e;
    }
    root
}

/// Profile LDLᵀ factorization of a symmetric positive definite matrix.
#[derive(Debug, Clone)]
pub struct SkylineLdlt {
    perm: Vec<usize>,
    iperm: Vec<usize>,
    /// First stored column of each (permuted) row.
    first: Vec<usize>,
    /// Offset of each row's strictly lower part in `lower`.
    offset: Vec<usize>,
    lower: Vec<f64>,
    d: Vec<f64>,
}

impl SkylineLdlt {
    /// Ordering and envelope for a pattern; reusable across refactorizations.
    pub fn symbolic(p: &SparsePattern) -> SkylineLdlt {
        let perm = reverse_cuthill_mckee(p);
        let mut iperm = vec![0; p.n];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old] = new;
        }
        let mut first = vec![0; p.n];
        let mut offset = Vec::with_capacity(p.n + 1);
        offset.push(0);
        for i in 0..p.n {
            let f = p.neighbors(perm[i]).iter().map(|&j| iperm[j]).min().unwrap_or(i).min(i);
            first[i] = f;
            offset.push(offset[i] + (i - f));
        }
        let size = offset[p.n];
        offset.pop();
        SkylineLdlt {
            perm,
            iperm,
            first,
            offset,
            lower: vec![0.0; size],
            d: vec![0.0; p.n],
        }
    }

    pub fn profile_size(&self) -> usize {
        self.lower.len()
    }

    /// Numeric factorization of `a` (must share the pattern used in [`Self::symbolic`]).
    pub fn factor(&mut self, a: &SparseMatrix) -> Result<()> {
        let n = a.n();
        let p = &a.pattern;
        self.lower.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            let old = self.perm[i];
            for s in p.row_ptr[old]..p.row_ptr[old + 1] {
                let j = self.iperm[p.cols[s]];
                if j < i {
                    self.lower[self.offset[i] + j - self.first[i]] = a.values[s];
                } else if j == i {
                    self.d[i] = a.values[s];
                }
            }
        }
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offset[i];
            // row i holds s_ij = L_ij·D_j until the end of this loop
            for j in fi..i {
                let fj = self.first[j];
                let k0 = fi.max(fj);
                let oj = self.offset[j];
                let acc = dot(
                    &self.lower[oi + k0 - fi..oi + j - fi],
                    &self.lower[oj + k0 - fj..oj + j - fj],
                );
                self.lower[oi + j - fi] -= acc;
            }
            let mut di = self.d[i];
            for j in fi..i {
                let s = self.lower[oi + j - fi];
                let l = s / self.d[j];
                di -= s * l;
                self.lower[oi + j - fi] = l;
            }
            let scale = a.values[p.diag_slot(self.perm[i])].abs();
            if !(di > 1e-14 * scale) {
                return Err(Error::Numerical(format!(
                    "matrix is singular or not positive definite (pivot {di:e} at row {})",
                    self.perm[i]
                )));
            }
            self.d[i] = di;
        }
        Ok(())
    }

    pub fn solve_in_place(&self, b: &mut [f64], work: &mut Vec<f64>) {
        let n = self.d.len();
        work.clear();
        work.extend(self.perm.iter().map(|&o| b[o]));
        let z = work.as_mut_slice();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.lower[self.offset[i]..self.offset[i] + (i - fi)];
            let (head, tail) = z.split_at_mut(i);
            tail[0] -= dot(row, &head[fi..]);
        }
        for (zi, di) in z.iter_mut().zip(&self.d) {
            *zi /= di;
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.lower[self.offset[i]..self.offset[i] + (i - fi)];
            let (head, tail) = z.split_at_mut(i);
            let zi = tail[0];
            for (zj, l) in head[fi..].iter_mut().zip(row) {
                *zj -= l * zi;
            }
        }
        for (&old, &v) in self.perm.iter().zip(z.iter()) {
            b[old] = v;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for SPD `a`; `x` holds the initial guess.
pub fn pcg(
    a: &SparseMatrix,
    pre: &SkylineLdlt,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<KrylovStats> {
    let n = b.len();
    let bn = norm(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut work = Vec::with_capacity(n);
    let mut z = r.clone();
    pre.solve_in_place(&mut z, &mut work);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut q = vec![0.0; n];
    for it in 0..=max_iter {
        let rel = norm(&r) / bn;
        if rel <= tol {
            return Ok(KrylovStats { iterations: it, relative_residual: rel });
        }
        if it == max_iter {
            break;
        }
        a.matvec(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(Error::Numerical("conjugate gradients broke down (matrix not SPD)".into()));
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        z.copy_from_slice(&r);
        pre.solve_in_place(&mut z, &mut work);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Numerical(format!(
        "conjugate gradients did not reach {tol:e} in {max_iter} iterations (residual {:e})",
        norm(&r) / bn
    )))
}

/// Right-preconditioned BiCGSTAB for general `a`; `x` holds the initial guess.
pub fn bicgstab(
    a: &SparseMatrix,
    pre: &SkylineLdlt,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<KrylovStats> {
    let n = b.len();
    let bn = norm(b);
    if bn == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(KrylovStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut work = Vec::with_capacity(n);
    let mut r = vec![0.0; n];
    a.matvec(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ph = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut sh = vec![0.0; n];
    let mut t = vec![0.0; n];
    for it in 0..=max_iter {
        let rel = norm(&r) / bn;
        if rel <= tol {
            return Ok(KrylovStats { iterations: it, relative_residual: rel });
        }
        if it == max_iter {
            break;
        }
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(Error::Numerical("BiCGSTAB broke down".into()));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        ph.copy_from_slice(&p);
        pre.solve_in_place(&mut ph, &mut work);
        a.matvec(&ph, &mut v);
        alpha = rho / dot(&r0, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / bn <= tol {
            for i in 0..n {
                x[i] += alpha * ph[i];
            }
            r.copy_from_slice(&s);
            continue;
        }
        sh.copy_from_slice(&s);
        pre.solve_in_place(&mut sh, &mut work);
        a.matvec(&sh, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
    }
    Err(Error::Numerical(format!(
        "BiCGSTAB did not reach {tol:e} in {max_iter} iterations (residual {:e})",
        norm(&r) / bn
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_laplacian(nx: usize, ny: usize, shift: f64) -> SparseMatrix {
        let idx = |x: usize, y: usize| x + nx * y;
        let mut pairs = Vec::new();
        for y in 0..ny {
            for x in 0..nx {
                if x + 1 < nx {
                    pairs.push((idx(x, y), idx(x + 1, y)));
                }
                if y + 1 < ny {
                    pairs.push((idx(x, y), idx(x, y + 1)));
                }
            }
        }
        // one long-range coupling, like a bondwire
        pairs.push((0, nx * ny - 1));
        let p = Arc::new(SparsePattern::from_pairs(nx * ny, &pairs));
        let mut a = SparseMatrix::zeros(p.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for &(i, j) in &pairs {
            a.stamp(&StampSlots::new(&p, i, j), rng.gen_range(0.5..2.0));
        }
        for i in 0..nx * ny {
            a.add_diag(i, shift);
        }
        a
    }

    fn dense(a: &SparseMatrix) -> DMatrix<f64> {
        DMatrix::from_fn(a.n(), a.n(), |i, j| a.get(i, j))
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = grid_laplacian(7, 5, 0.1);
        let mut perm = reverse_cuthill_mckee(&a.pattern);
        perm.sort_unstable();
        assert_eq!(perm, (0..35).collect::<Vec<_>>());
    }

    #[test]
    fn skyline_matches_dense_solve() {
        let a = grid_laplacian(9, 6, 0.05);
        let mut f = SkylineLdlt::symbolic(&a.pattern);
        f.factor(&a).unwrap();
        let b: Vec<f64> = (0..a.n()).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut x = b.clone();
        f.solve_in_place(&mut x, &mut Vec::new());
        let reference = dense(&a).lu().solve(&DVector::from_vec(b)).unwrap();
        for (u, v) in x.iter().zip(reference.iter()) {
            assert!((u - v).abs() <= 1e-11 * v.abs().max(1.0));
        }
    }

    #[test]
    fn rcm_reduces_profile() {
        let a = grid_laplacian(30, 4, 0.1);
        let f = SkylineLdlt::symbolic(&a.pattern);
        // natural ordering has bandwidth 30 plus the long-range pair
        assert!(f.profile_size() < 30 * 120);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = grid_laplacian(4, 4, 0.0);
        let mut f = SkylineLdlt::symbolic(&a.pattern);
        assert!(matches!(f.factor(&a), Err(Error::Numerical(_))));
    }

    #[test]
    fn krylov_solvers_converge_with_perturbed_preconditioner() {
        let a = grid_laplacian(8, 8, 0.2);
        let mut pre_m = a.clone();
        pre_m.values.iter_mut().for_each(|v| *v *= 1.3);
        let mut f = SkylineLdlt::symbolic(&a.pattern);
        f.factor(&pre_m).unwrap();
        let b: Vec<f64> = (0..a.n()).map(|i| 1.0 + (i % 3) as f64).collect();
        let mut x = vec![0.0; a.n()];
        let st = pcg(&a, &f, &b, &mut x, 1e-12, 200).unwrap();
        assert!(st.relative_residual <= 1e-12);

        let mut ns = a.clone();
        let s = ns.pattern.slot(3, 4).unwrap();
        ns.values[s] += 0.05;
        let mut y = vec![0.0; a.n()];
        let st = bicgstab(&ns, &f, &b, &mut y, 1e-12, 200).unwrap();
        let mut r = vec![0.0; a.n()];
        ns.matvec(&y, &mut r);
        let res: f64 = r.iter().zip(&b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        assert!(res <= 1e-11 * norm(&b), "{st:?}");
    }
}
