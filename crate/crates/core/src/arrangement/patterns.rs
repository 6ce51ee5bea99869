//! Activation patterns `1(Xh ≥ 0)` of a central hyperplane arrangement.
//!
//! `d = 1` is enumerated directly from `h ∈ {1, −1, 0}`. `d = 2` uses an
//! angular sweep over the exact normal directions of every row plus the
//! midpoints between consecutive critical angles. `d = 3, 4` use a sign-tree
//! search: rows are fixed one at a time and a branch survives only if the
//! prefix system `x_j·h ≥ 0 (D_j = 1)`, `x_j·h ≤ −1 (D_j = 0)` is LP-feasible;
//! by scale invariance this is exactly realizability. A seeded random sampler
//! with null-ray perturbations runs as a consistency check: every pattern it
//! hits must already be in the tree output.
//!
//! Patterns are ordered by number of active rows, then with `1` before `0`
//! lexicographically, so the `h = 0` all-ones pattern is always last.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, lp_solve, LpProblem, LpStatus, Mat};
use crate::relu_net::Dataset;
use crate::rng;

pub const MAX_ENUM_DIM: usize = 4;

pub type Pattern = Vec<bool>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnumMethod {
    Direct,
    AngularSweep,
    SignTree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    pub patterns: Vec<Pattern>,
    /// `witnesses[i]` realizes `patterns[i]`.
    pub witnesses: Vec<Vec<f64>>,
    pub method: EnumMethod,
    /// Distinct patterns seen by the random cross-check (0 when it did not run).
    pub sampled: usize,
}

impl PatternSet {
    pub fn count(&self) -> usize {
        self.patterns.len()
    }

    pub fn index_of(&self, p: &[bool]) -> Option<usize> {
        self.patterns.iter().position(|q| q.as_slice() == p)
    }

    /// Same set with patterns (and witnesses) reordered: entry `i` is old entry `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> PatternSet {
        PatternSet {
            patterns: perm.iter().map(|&i| self.patterns[i].clone()).collect(),
            witnesses: perm.iter().map(|&i| self.witnesses[i].clone()).collect(),
            method: self.method,
            sampled: self.sampled,
        }
    }
}

pub fn pattern_of(x: &Mat, h: &[f64]) -> Pattern {
    (0..x.rows()).map(|k| dot(x.row(k), h) >= 0.0).collect()
}

pub fn pattern_string(p: &[bool]) -> String {
    p.iter().map(|b| if *b { '1' } else { '0' }).collect()
}

fn order_key(p: &Pattern) -> (usize, Vec<bool>) {
    (p.iter().filter(|b| **b).count(), p.iter().map(|b| !b).collect())
}

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r
}

/// Upper bound on `P` for `n` rows of rank `r`:
/// `B(n, r) = 1 + Σ_{k<r} C(n,k) · 2 Σ_{j<r−k} C(n−k−1, j)`.
///
/// Every pattern is the pattern of some face; a face of codimension `k < r`
/// lies in one of at most `C(n,k)` flats, whose restricted arrangement has at
/// most `n − k` hyperplanes in dimension `r − k` and therefore at most
/// `2 Σ_{j<r−k} C(n−k−1, j)` cells. The `1` is the origin. The bound is
/// `O(n^r)`.
pub fn enumeration_bound(n: usize, r: usize) -> u128 {
    let mut total: u128 = 1;
    for k in 0..r {
        if k >= n {
            break;
        }
        let inner: u128 = (0..r - k).map(|j| binom(n - k - 1, j)).sum();
        total += binom(n, k) * 2 * inner;
    }
    total
}

pub fn enum_patterns(data: &Dataset) -> Result<PatternSet> {
    let (n, d) = data.x.shape();
    if n == 0 {
        return Err(Error::Precondition("pattern enumeration needs n >= 1".into()));
    }
    if d > MAX_ENUM_DIM {
        return Err(Error::DimensionTooLarge { d, limit: MAX_ENUM_DIM });
    }
    let x = &data.x;
    let mut found: Vec<(Pattern, Vec<f64>)> = Vec::new();
    let mut add = |h: Vec<f64>| {
        let p = pattern_of(x, &h);
        if !found.iter().any(|(q, _)| *q == p) {
            found.push((p, h));
        }
    };
    let mut sampled = 0;
    let method = match d {
        0 => {
            add(vec![]);
            EnumMethod::Direct
        }
        1 => {
            for h in [1.0, -1.0, 0.0] {
                add(vec![h]);
            }
            EnumMethod::Direct
        }
        2 => {
            for h in sweep_directions(x) {
                add(h);
            }
            add(vec![0.0; 2]);
            EnumMethod::AngularSweep
        }
        _ => {
            for (p, h) in sign_tree(x)? {
                if !found.iter().any(|(q, _)| *q == p) {
                    found.push((p, h));
                }
            }
            if !found.iter().any(|(q, _)| q.iter().all(|b| *b)) {
                found.push((vec![true; n], vec![0.0; d]));
            }
            let sample = sample_patterns(x, 4000, 0x5eed);
            sampled = sample.len();
            if let Some(missing) = sample.iter().find(|p| !found.iter().any(|(q, _)| q == *p)) {
                return Err(Error::NumericFailure(format!(
                    "sign-tree enumeration missed sampled pattern {}",
                    pattern_string(missing)
                )));
            }
            EnumMethod::SignTree
        }
    };
    found.sort_by_key(|a| order_key(&a.0));
    let (patterns, witnesses) = found.into_iter().unzip();
    Ok(PatternSet {
        patterns,
        witnesses,
        method,
        sampled,
    })
}

fn sweep_directions(x: &Mat) -> Vec<Vec<f64>> {
    let mut crit: Vec<(f64, [f64; 2])> = Vec::new();
    for k in 0..x.rows() {
        let (a, b) = (x[(k, 0)], x[(k, 1)]);
        if a == 0.0 && b == 0.0 {
            continue;
        }
        for h in [[-b, a], [b, -a]] {
            crit.push((h[1].atan2(h[0]), h));
        }
    }
    if crit.is_empty() {
        return vec![vec![1.0, 0.0]];
    }
    crit.sort_by(|p, q| p.0.partial_cmp(&q.0).expect("finite angles"));
    let mut out: Vec<Vec<f64>> = crit.iter().map(|(_, h)| h.to_vec()).collect();
    let tau = std::f64::consts::TAU;
    for i in 0..crit.len() {
        let a = crit[i].0;
        let b = if i + 1 < crit.len() { crit[i + 1].0 } else { crit[0].0 + tau };
        if b - a > 0.0 {
            let mid = 0.5 * (a + b);
            out.push(vec![mid.cos(), mid.sin()]);
        }
    }
    out
}

/// LP for `x_j·h ≥ 0 (p_j)`, `x_j·h ≤ −1 (!p_j)` over the rows in `prefix`.
fn realize(x: &Mat, prefix: &[bool]) -> Result<Option<Vec<f64>>> {
    let d = x.cols();
    let k = prefix.len();
    let ge = Mat::from_fn(k, d, |j, c| if prefix[j] { x[(j, c)] } else { -x[(j, c)] });
    let ge_rhs: Vec<f64> = prefix.iter().map(|&a| if a { 0.0 } else { 1.0 }).collect();
    let p = LpProblem {
        eq: Mat::zeros(0, d),
        eq_rhs: vec![],
        ge,
        ge_rhs,
        bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); d],
    };
    Ok(match lp_solve(&p, None)? {
        LpStatus::Optimal { x: h, .. } => Some(h),
        _ => None,
    })
}

fn sign_tree(x: &Mat) -> Result<Vec<(Pattern, Vec<f64>)>> {
    let n = x.rows();
    let mut out = Vec::new();
    let mut stack: Vec<Vec<bool>> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        if prefix.len() == n {
            let h = interior_witness(x, &prefix)?;
            out.push((prefix, h));
            continue;
        }
        // push 0 first so the 1 branch is explored first
        for bit in [false, true] {
            let mut next = prefix.clone();
            next.push(bit);
            if realize(x, &next)?.is_some() {
                stack.push(next);
            }
        }
    }
    Ok(out)
}

/// Prefers a witness with every active row strictly positive (a cell), and
/// falls back to the plain realization for lower-dimensional faces.
fn interior_witness(x: &Mat, pattern: &[bool]) -> Result<Vec<f64>> {
    let d = x.cols();
    let ge = Mat::from_fn(pattern.len(), d, |j, c| if pattern[j] { x[(j, c)] } else { -x[(j, c)] });
    let p = LpProblem {
        eq: Mat::zeros(0, d),
        eq_rhs: vec![],
        ge,
        ge_rhs: vec![1.0; pattern.len()],
        bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); d],
    };
    if let LpStatus::Optimal { x: h, .. } = lp_solve(&p, None)? {
        return Ok(h);
    }
    Ok(realize(x, pattern)?.expect("pattern was realized during the search"))
}

/// Distinct patterns hit by Gaussian directions and by small perturbations of
/// the null rays of every `(d−1)`-subset of rows.
pub fn sample_patterns(x: &Mat, samples: usize, seed: u64) -> BTreeSet<Pattern> {
    let (n, d) = x.shape();
    let mut r = rng::stream(seed, "pattern-sample");
    let mut set = BTreeSet::new();
    set.insert(vec![true; n]);
    for _ in 0..samples {
        let h = rng::normals(&mut r, d);
        set.insert(pattern_of(x, &h));
    }
    if d >= 2 && n >= d - 1 {
        for subset in combinations(n, d - 1) {
            let rows = Mat::from_fn(d - 1, d, |i, c| x[(subset[i], c)]);
            let Some(ray) = null_vector(&rows) else { continue };
            for sgn in [1.0, -1.0] {
                let base: Vec<f64> = ray.iter().map(|v| v * sgn).collect();
                set.insert(pattern_of(x, &base));
                for _ in 0..8 {
                    let e = rng::normals(&mut r, d);
                    let h: Vec<f64> = base.iter().zip(&e).map(|(b, e)| b + 1e-7 * e).collect();
                    set.insert(pattern_of(x, &h));
                }
            }
        }
    }
    set
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

/// Unit vector spanning the null space of a `(d−1) x d` matrix of full row rank.
fn null_vector(a: &Mat) -> Option<Vec<f64>> {
    let s = crate::numerics::svd(&a.transpose().matmul(a).ok()?).ok()?;
    let d = a.cols();
    let smax = s.sigma[0];
    if smax == 0.0 || s.sigma[d - 2] <= 1e-10 * smax {
        return None;
    }
    Some(s.vt.row(d - 1).to_vec())
}
