//! Dense kernels behind the cross algorithms: truncated SVD and maxvol.

use crate::error::{Error, Result};
use nalgebra::DMatrix;

/// Rank-`rank` factors with `m ≈ u · diag(s) · vᵀ`.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
    pub rank: usize,
}

impl TruncatedSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (k, s) in self.s.iter().enumerate() {
            us.column_mut(k).scale_mut(*s);
        }
        us * self.v.transpose()
    }

    /// `x · m⁺` using the retained factors.
    pub(crate) fn right_pseudo_solve(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        // x · (u s vᵀ)⁺ = x · v s⁻¹ uᵀ
        let mut xv = x * &self.v;
        for (k, s) in self.s.iter().enumerate() {
            xv.column_mut(k).scale_mut(1.0 / s);
        }
        xv * self.u.transpose()
    }
}

/// Smallest rank whose discarded singular-value tail has ℓ² norm at most
/// `tol · ‖s‖`, capped at `rmax`.
pub fn truncated_svd(m: &DMatrix<f64>, tol: f64, rmax: usize) -> Result<TruncatedSvd> {
    let (rows, cols) = m.shape();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    if rows == 0 || cols == 0 {
        return Ok(TruncatedSvd {
            u: DMatrix::zeros(rows, 0),
            s: vec![],
            v: DMatrix::zeros(cols, 0),
            rank: 0,
        });
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested u");
    let vt = svd.v_t.expect("requested v_t");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let s: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let total = s.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut rank = 0;
    if total > 0.0 {
        // tail[r] = ‖s[r..]‖
        let mut tail = vec![0.0f64; s.len() + 1];
        for k in (0..s.len()).rev() {
            tail[k] = (tail[k + 1].powi(2) + s[k] * s[k]).sqrt();
        }
        rank = (0..=s.len()).find(|&r| tail[r] <= tol * total).unwrap_or(s.len());
        rank = rank.min(rmax);
    }
    let mut uu = DMatrix::zeros(rows, rank);
    let mut vv = DMatrix::zeros(cols, rank);
    for (k, &src) in order.iter().take(rank).enumerate() {
        uu.set_column(k, &u.column(src));
        vv.set_column(k, &vt.row(src).transpose());
    }
    Ok(TruncatedSvd {
        u: uu,
        s: s[..rank].to_vec(),
        v: vv,
        rank,
    })
}

/// Index of the entry of largest modulus; ties go to the lowest row-major index.
fn argmax_abs(m: &DMatrix<f64>) -> (usize, usize, f64) {
    let (rows, cols) = m.shape();
    let mut best = (0, 0, -1.0);
    for i in 0..rows {
        for j in 0..cols {
            let v = m[(i, j)].abs();
            if v > best.2 {
                best = (i, j, v);
            }
        }
    }
    best
}

/// Row seed from Gaussian elimination with partial pivoting.
fn pivoted_lu_rows(m: &DMatrix<f64>) -> Result<Vec<usize>> {
    let (rows, cols) = m.shape();
    let mut a = m.clone();
    let scale = m.amax();
    let mut used = vec![false; rows];
    let mut picked = Vec::with_capacity(cols);
    for c in 0..cols {
        let mut best: Option<(usize, f64)> = None;
        for r in 0..rows {
            if used[r] {
                continue;
            }
            let v = a[(r, c)].abs();
            if best.map_or(true, |(_, b)| v > b) {
                best = Some((r, v));
            }
        }
        let (p, v) = best.expect("rows >= cols");
        if !(v > 1e-13 * scale) || scale == 0.0 {
            return Err(Error::Numerical(format!(
                "maxvol: matrix is rank deficient (column {c} of {cols} has no usable pivot)"
            )));
        }
        used[p] = true;
        picked.push(p);
        let pivot_row = a.row(p).clone_owned();
        for r in 0..rows {
            if used[r] {
                continue;
            }
            let f = a[(r, c)] / pivot_row[c];
            if f != 0.0 {
                for k in c..cols {
                    a[(r, k)] -= f * pivot_row[k];
                }
            }
        }
    }
    Ok(picked)
}

fn coefficients(m: &DMatrix<f64>, rows: &[usize]) -> Result<DMatrix<f64>> {
    let sub = m.select_rows(rows);
    let lu = sub.transpose().full_piv_lu();
    lu.solve(&m.transpose())
        .map(|bt| bt.transpose())
        .ok_or_else(|| Error::Numerical("maxvol: selected submatrix is singular".into()))
}

/// Rows of a tall `I × R` matrix forming a quasi-maximal-volume submatrix.
///
/// On return every entry of `m · m(rows, :)⁻¹` has modulus at most `1 + tol`;
/// this is re-checked against a freshly computed coefficient matrix.
pub fn maxvol(m: &DMatrix<f64>, tol: f64) -> Result<Vec<usize>> {
    let (rows, cols) = m.shape();
    if rows < cols {
        return Err(Error::Domain(format!("maxvol needs a tall matrix, got {rows}x{cols}")));
    }
    if cols == 0 {
        return Ok(vec![]);
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("maxvol: non-finite entries".into()));
    }
    let mut sel = pivoted_lu_rows(m)?;
    let mut b = coefficients(m, &sel)?;
    let max_iter = 100 * cols + 100;
    for _ in 0..max_iter {
        let (i, j, v) = argmax_abs(&b);
        if v <= 1.0 + tol {
            let fresh = coefficients(m, &sel)?;
            if argmax_abs(&fresh).2 <= 1.0 + tol {
                return Ok(sel);
            }
            b = fresh;
            continue;
        }
        sel[j] = i;
        // B ← B − B(:,j) (B(i,:) − e_jᵀ) / B(i,j)
        let pivot = b[(i, j)];
        let col = b.column(j).clone_owned();
        let mut row = b.row(i).clone_owned();
        row[j] -= 1.0;
        b -= (col * row) / pivot;
    }
    Err(Error::Numerical(format!("maxvol did not converge in {max_iter} swaps")))
}

/// Maximum modulus of `m · m(rows, :)⁻¹`.
pub fn dominance(m: &DMatrix<f64>, rows: &[usize]) -> Result<f64> {
    Ok(coefficients(m, rows)?.amax())
}

/// Thin orthonormal basis of the column space (`rows × min(rows, cols)`).
pub(crate) fn thin_q(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.clone().qr().q()
}
