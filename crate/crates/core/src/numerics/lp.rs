//! Dense two-phase simplex with Bland's rule.
//!
//! Problems are given over box-bounded variables and are converted to the
//! standard form `A z = b, z >= 0` by shifting, reflecting or splitting each
//! variable. Phase 1 minimises the sum of artificials; phase 2 (only when an
//! objective is supplied) minimises `c·x` from the phase-1 basis.

use super::mat::Mat;
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const MAX_PIVOTS: usize = 200_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome {
    pub feasible: bool,
    pub witness: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpStatus {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

/// Linear constraints `eq·x = rhs`, `ge·x >= ge_rhs`, `lo <= x <= hi`.
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub eq: Mat,
    pub eq_rhs: Vec<f64>,
    pub ge: Mat,
    pub ge_rhs: Vec<f64>,
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    pub fn nvars(&self) -> usize {
        self.bounds.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.nvars();
        let bad = |what: &str| Err(Error::DimensionMismatch(what.to_string()));
        if self.eq.rows() > 0 && self.eq.cols() != n {
            return bad("equality rows do not match variable count");
        }
        if self.ge.rows() > 0 && self.ge.cols() != n {
            return bad("inequality rows do not match variable count");
        }
        if self.eq.rows() != self.eq_rhs.len() || self.ge.rows() != self.ge_rhs.len() {
            return bad("right-hand side length does not match row count");
        }
        Ok(())
    }
}

/// Feasibility of `eq_lhs·x = eq_rhs`, `bounds`, `strict_rows·x >= strict_eps`.
///
/// The witness is checked before it is returned: equalities within `1e-9`
/// (relative to the rhs scale), bounds exactly after clamping, strict rows
/// within `1e-9` of `strict_eps`.
pub fn lp_feasible(
    eq_lhs: &Mat,
    eq_rhs: &[f64],
    bounds: &[(f64, f64)],
    strict_rows: &Mat,
    strict_eps: f64,
) -> Result<LpOutcome> {
    if strict_eps.is_nan() || strict_eps <= 0.0 {
        return Err(Error::InvalidParameter("strict_eps must be positive".into()));
    }
    let p = LpProblem {
        eq: eq_lhs.clone(),
        eq_rhs: eq_rhs.to_vec(),
        ge: strict_rows.clone(),
        ge_rhs: vec![strict_eps; strict_rows.rows()],
        bounds: bounds.to_vec(),
    };
    match lp_solve(&p, None)? {
        LpStatus::Optimal { x, .. } => Ok(LpOutcome {
            feasible: true,
            witness: Some(x),
        }),
        LpStatus::Infeasible => Ok(LpOutcome {
            feasible: false,
            witness: None,
        }),
        LpStatus::Unbounded => unreachable!("no objective in a feasibility problem"),
    }
}

enum VarMap {
    /// x = lo + z
    Shift { col: usize, lo: f64 },
    /// x = hi - z
    Reflect { col: usize, hi: f64 },
    /// x = z1 - z2
    Split { pos: usize, neg: usize },
}

/// Minimises `objective·x` (or finds any feasible point when `None`).
pub fn lp_solve(p: &LpProblem, objective: Option<&[f64]>) -> Result<LpStatus> {
    p.check()?;
    let n = p.nvars();
    if let Some(c) = objective {
        if c.len() != n {
            return Err(Error::DimensionMismatch("objective length".into()));
        }
    }
    for &(lo, hi) in &p.bounds {
        if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter(format!("bad bound [{lo}, {hi}]")));
        }
        if lo > hi {
            return Ok(LpStatus::Infeasible);
        }
    }

    // Standard-form columns.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut upper_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &p.bounds {
        if lo.is_finite() {
            maps.push(VarMap::Shift { col: ncols, lo });
            if hi.is_finite() {
                upper_rows.push((ncols, hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Reflect { col: ncols, hi });
            ncols += 1;
        } else {
            maps.push(VarMap::Split {
                pos: ncols,
                neg: ncols + 1,
            });
            ncols += 2;
        }
    }
    let n_eq = p.eq.rows();
    let n_ge = p.ge.rows();
    let n_up = upper_rows.len();
    let nrows = n_eq + n_ge + n_up;
    let n_slack = n_ge + n_up;
    let total = ncols + n_slack + nrows;
    let art0 = ncols + n_slack;

    // Row storage: nrows x (total + 1), last column is rhs.
    let width = total + 1;
    let mut t = vec![0.0; nrows * width];
    let put_row = |t: &mut [f64], r: usize, coeffs: &[f64], rhs: f64| {
        let mut b = rhs;
        for (j, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            match maps[j] {
                VarMap::Shift { col, lo } => {
                    t[r * width + col] += a;
                    b -= a * lo;
                }
                VarMap::Reflect { col, hi } => {
                    t[r * width + col] -= a;
                    b -= a * hi;
                }
                VarMap::Split { pos, neg } => {
                    t[r * width + pos] += a;
                    t[r * width + neg] -= a;
                }
            }
        }
        t[r * width + total] = b;
    };
    for r in 0..n_eq {
        put_row(&mut t, r, p.eq.row(r), p.eq_rhs[r]);
    }
    for k in 0..n_ge {
        let r = n_eq + k;
        put_row(&mut t, r, p.ge.row(k), p.ge_rhs[k]);
        t[r * width + ncols + k] = -1.0;
    }
    for (k, &(col, cap)) in upper_rows.iter().enumerate() {
        let r = n_eq + n_ge + k;
        t[r * width + col] = 1.0;
        t[r * width + ncols + n_ge + k] = 1.0;
        t[r * width + total] = cap;
    }
    for r in 0..nrows {
        if t[r * width + total] < 0.0 {
            for v in &mut t[r * width..(r + 1) * width] {
                *v = -*v;
            }
        }
        t[r * width + art0 + r] = 1.0;
    }
    let mut tab = Tableau {
        t,
        width,
        nrows,
        basis: (0..nrows).map(|r| art0 + r).collect(),
        allowed: total,
    };

    // Phase 1.
    let mut cost = vec![0.0; total];
    for c in cost.iter_mut().skip(art0) {
        *c = 1.0;
    }
    let scale = tab.rhs_scale();
    if tab.minimise(&cost)? == Phase::Unbounded {
        return Err(Error::NumericFailure("phase 1 reported unbounded".into()));
    }
    let infeas: f64 = (0..nrows)
        .filter(|&r| tab.basis[r] >= art0)
        .map(|r| tab.rhs(r))
        .sum();
    if infeas > 1e-9 * scale.max(1.0) {
        return Ok(LpStatus::Infeasible);
    }
    // Drive zero-level artificials out of the basis where possible.
    for r in 0..nrows {
        if tab.basis[r] < art0 {
            continue;
        }
        if let Some(j) = (0..art0).find(|&j| tab.at(r, j).abs() > 1e-9) {
            tab.pivot(r, j);
        }
    }
    tab.allowed = art0;

    if let Some(c) = objective {
        let mut cost = vec![0.0; total];
        for (j, &cj) in c.iter().enumerate() {
            match maps[j] {
                VarMap::Shift { col, .. } => cost[col] += cj,
                VarMap::Reflect { col, .. } => cost[col] -= cj,
                VarMap::Split { pos, neg } => {
                    cost[pos] += cj;
                    cost[neg] -= cj;
                }
            }
        }
        if tab.minimise(&cost)? == Phase::Unbounded {
            return Ok(LpStatus::Unbounded);
        }
    }

    let mut z = vec![0.0; total];
    for r in 0..nrows {
        z[tab.basis[r]] = tab.rhs(r).max(0.0);
    }
    let mut x: Vec<f64> = maps
        .iter()
        .map(|m| match *m {
            VarMap::Shift { col, lo } => lo + z[col],
            VarMap::Reflect { col, hi } => hi - z[col],
            VarMap::Split { pos, neg } => z[pos] - z[neg],
        })
        .collect();
    for (xi, &(lo, hi)) in x.iter_mut().zip(&p.bounds) {
        *xi = xi.clamp(lo, hi);
    }
    verify(p, &x)?;
    let value = objective.map_or(0.0, |c| c.iter().zip(&x).map(|(a, b)| a * b).sum());
    Ok(LpStatus::Optimal { x, value })
}

fn verify(p: &LpProblem, x: &[f64]) -> Result<()> {
    let scale = p
        .eq_rhs
        .iter()
        .chain(&p.ge_rhs)
        .fold(1.0f64, |m, v| m.max(v.abs()));
    for r in 0..p.eq.rows() {
        let lhs: f64 = p.eq.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
        if (lhs - p.eq_rhs[r]).abs() > 1e-9 * scale {
            return Err(Error::NumericFailure(format!(
                "simplex witness violates equality row {r} by {:.3e}",
                lhs - p.eq_rhs[r]
            )));
        }
    }
    for r in 0..p.ge.rows() {
        let lhs: f64 = p.ge.row(r).iter().zip(x).map(|(a, b)| a * b).sum();
        if lhs < p.ge_rhs[r] - 1e-9 * scale {
            return Err(Error::NumericFailure(format!(
                "simplex witness violates inequality row {r} by {:.3e}",
                p.ge_rhs[r] - lhs
            )));
        }
    }
    Ok(())
}

#[derive(Debug, PartialEq, Eq)]
enum Phase {
    Optimal,
    Unbounded,
}

struct Tableau {
    t: Vec<f64>,
    width: usize,
    nrows: usize,
    basis: Vec<usize>,
    /// Columns with index >= allowed may not enter.
    allowed: usize,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.t[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.t[r * self.width + self.width - 1]
    }

    fn rhs_scale(&self) -> f64 {
        (0..self.nrows).fold(0.0f64, |m, r| m.max(self.rhs(r).abs()))
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.t[r * w + c];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= p;
        }
        let prow: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.nrows {
            if i == r {
                continue;
            }
            let f = self.t[i * w + c];
            if f == 0.0 {
                continue;
            }
            for (v, pv) in self.t[i * w..(i + 1) * w].iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            self.t[i * w + c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Bland's rule: lowest-index improving column enters, ratio ties go to
    /// the lowest basic index.
    fn minimise(&mut self, cost: &[f64]) -> Result<Phase> {
        let w = self.width;
        for _ in 0..MAX_PIVOTS {
            let mut in_basis = vec![false; w - 1];
            for &b in &self.basis {
                in_basis[b] = true;
            }
            let mut enter = None;
            for j in 0..self.allowed {
                if in_basis[j] {
                    continue;
                }
                let mut red = cost[j];
                for r in 0..self.nrows {
                    red -= cost[self.basis[r]] * self.t[r * w + j];
                }
                if red < -1e-10 {
                    enter = Some(j);
                    break;
                }
            }
            let Some(j) = enter else {
                return Ok(Phase::Optimal);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.nrows {
                let a = self.t[r * w + j];
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(r).max(0.0) / a;
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((lr, lv)) => {
                        if ratio < lv - 1e-12 * (1.0 + lv)
                            || (ratio <= lv + 1e-12 * (1.0 + lv) && self.basis[r] < self.basis[lr])
                        {
                            Some((r, ratio))
                        } else {
                            Some((lr, lv))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(Phase::Unbounded);
            };
            self.pivot(r, j);
        }
        Err(Error::NumericFailure(format!(
            "simplex exceeded {MAX_PIVOTS} pivots"
        )))
    }
}
