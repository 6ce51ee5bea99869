//! One-sided (Hestenes) Jacobi SVD.
//!
//! Columns are orthogonalised pairwise in a fixed cyclic order `(p, q)`,
//! `p < q`, so identical input bits always produce identical output bits.

use super::mat::{dot, Mat};
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 60;

/// Thin SVD `a = u · diag(sigma) · vt` with `k = min(rows, cols)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    /// `rows x k`, orthonormal columns.
    pub u: Mat,
    /// Nonincreasing, nonnegative.
    pub sigma: Vec<f64>,
    /// `k x cols`, orthonormal rows.
    pub vt: Mat,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Mat {
        let k = self.sigma.len();
        let mut us = self.u.clone();
        for j in 0..k {
            us.scale_col(j, self.sigma[j]);
        }
        us.matmul(&self.vt).expect("svd factors have consistent shapes")
    }

    /// Numerical rank with relative cutoff `rtol · sigma_max`.
    pub fn rank(&self, rtol: f64) -> usize {
        let smax = self.sigma.first().copied().unwrap_or(0.0);
        self.sigma.iter().filter(|s| **s > rtol * smax && **s > 0.0).count()
    }
}

pub fn svd(a: &Mat) -> Result<SvdResult> {
    if !a.is_finite() {
        return Err(Error::NumericFailure("svd input has non-finite entries".into()));
    }
    if a.rows() >= a.cols() {
        svd_tall(a)
    } else {
        let t = svd_tall(&a.transpose())?;
        Ok(SvdResult {
            u: t.vt.transpose(),
            sigma: t.sigma,
            vt: t.u.transpose(),
        })
    }
}

/// Singular values only.
pub fn singular_values(a: &Mat) -> Result<Vec<f64>> {
    Ok(svd(a)?.sigma)
}

fn svd_tall(a: &Mat) -> Result<SvdResult> {
    let (m, n) = a.shape();
    // Work on columns stored contiguously.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let eps = f64::EPSILON;
    // Columns below this squared norm are numerically zero and never rotated.
    let fro2: f64 = cols.iter().map(|c| dot(c, c)).sum();
    let negligible = fro2 * eps * eps;
    let mut converged = n < 2;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0
                    || gamma.abs() <= eps * (alpha * beta).sqrt()
                    || alpha <= negligible
                    || beta <= negligible
                {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut cols, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NumericFailure(format!(
            "Jacobi SVD did not converge within {MAX_SWEEPS} sweeps"
        )));
    }

    let mut sig: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    // Stable sort keeps ties in column order.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sig[j].partial_cmp(&sig[i]).expect("finite singular values"));

    let smax = order.first().map_or(0.0, |&i| sig[i]);
    let cutoff = smax * (m.max(n) as f64) * eps;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut vt = Mat::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let mut deficient = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        let s = sig[j];
        if s > cutoff && s > 0.0 {
            u_cols.push(cols[j].iter().map(|x| x / s).collect());
        } else {
            sig[j] = 0.0;
            u_cols.push(vec![0.0; m]);
            deficient.push(k);
        }
        sigma.push(sig[j]);
        for (c, x) in v[j].iter().enumerate() {
            vt[(k, c)] = *x;
        }
    }
    complete_orthonormal(&mut u_cols, &deficient);
    let u = Mat::from_cols(m, &u_cols)?;
    Ok(SvdResult { u, sigma, vt })
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    let cp = &mut lo[p];
    let cq = &mut hi[0];
    for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
        let xp = *x;
        let xq = *y;
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

/// Fills the listed slots with unit vectors orthogonal to every other column,
/// trying standard basis vectors in order (deterministic Gram-Schmidt).
fn complete_orthonormal(cols: &mut [Vec<f64>], slots: &[usize]) {
    let m = cols.first().map_or(0, |c| c.len());
    let mut next_basis = 0;
    for &slot in slots {
        while next_basis < m {
            let mut cand = vec![0.0; m];
            cand[next_basis] = 1.0;
            next_basis += 1;
            for _ in 0..2 {
                for (k, c) in cols.iter().enumerate() {
                    if k == slot || (slots.contains(&k) && c.iter().all(|x| *x == 0.0)) {
                        continue;
                    }
                    let proj = dot(&cand, c);
                    for (x, y) in cand.iter_mut().zip(c) {
                        *x -= proj * y;
                    }
                }
            }
            let nrm = dot(&cand, &cand).sqrt();
            if nrm > 1e-8 {
                cols[slot] = cand.iter().map(|x| x / nrm).collect();
                break;
            }
        }
    }
}
