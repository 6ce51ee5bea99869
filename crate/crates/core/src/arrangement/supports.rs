//! Convexified support sets `P_(t,s)`, their minimal elements `Z_A` and the critical width.
//!
//! A block `u_i` (or `v_i`) is *active* when it is allowed to be nonzero. For
//! an active block the LP carries the pattern rows `x_j·u ≥ 0` where
//! `D_i[j] = 1` and `x_j·u ≤ −ε` where `D_i[j] = 0`; an inactive block is
//! pinned to 0. `P_(t,s)` is nonempty iff some choice of active blocks inside
//! the support of `(t, s)` is feasible, so the general query enumerates
//! active subsets, largest first.

use serde::{Deserialize, Serialize};

use super::patterns::{pattern_of, PatternSet};
use crate::error::{Error, Result};
use crate::numerics::{lp_solve, norm_inf, LpProblem, LpStatus, Mat};
use crate::relu_net::{Dataset, TwoLayerNet};

/// Active-subset enumeration is exhaustive up to this many nonzero coordinates.
pub const MAX_EXHAUSTIVE_SUPPORT: usize = 12;
/// Largest `2P` accepted by [`minimal_supports`].
pub const MAX_LATTICE_DIM: usize = 24;
pub const DEFAULT_CAP: u32 = 8;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SupportVector {
    pub t: Vec<u32>,
    pub s: Vec<u32>,
}

impl SupportVector {
    pub fn zeros(p: usize) -> Self {
        Self {
            t: vec![0; p],
            s: vec![0; p],
        }
    }

    pub fn from_coords(coords: &[u32]) -> Self {
        let p = coords.len() / 2;
        Self {
            t: coords[..p].to_vec(),
            s: coords[p..].to_vec(),
        }
    }

    /// `t` followed by `s`.
    pub fn coords(&self) -> Vec<u32> {
        self.t.iter().chain(&self.s).copied().collect()
    }

    pub fn p(&self) -> usize {
        self.t.len()
    }

    pub fn total(&self) -> u32 {
        self.t.iter().chain(&self.s).sum()
    }

    /// Componentwise `self ≤ other`.
    pub fn le(&self, other: &SupportVector) -> bool {
        self.coords().iter().zip(other.coords()).all(|(a, b)| *a <= b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtsWitness {
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PtsOutcome {
    pub feasible: bool,
    pub witness: Option<PtsWitness>,
    /// False when the active-subset search was cut short (large supports).
    pub exhaustive: bool,
}

pub fn strict_eps(data: &Dataset) -> f64 {
    let s = norm_inf(&data.y);
    1e-6 * if s > 0.0 { s } else { 1.0 }
}

/// LP for a fixed set of active blocks; block `b < P` is `u_b`, block `b ≥ P` is `v_{b−P}`.
pub fn pts_active(
    patterns: &PatternSet,
    data: &Dataset,
    ts: &SupportVector,
    active: &[bool],
    lambda: f64,
) -> Result<Option<PtsWitness>> {
    let p = patterns.count();
    let (n, d) = data.x.shape();
    if ts.p() != p || active.len() != 2 * p {
        return Err(Error::DimensionMismatch(format!(
            "support of length {} for {p} patterns",
            ts.p()
        )));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("lambda must be positive".into()));
    }
    let counts = ts.coords();
    let nv = 2 * p * d;
    let mut bounds = vec![(0.0, 0.0); nv];
    let mut eq = Mat::zeros(n, nv);
    let mut ge_rows: Vec<Vec<f64>> = Vec::new();
    let mut ge_rhs = Vec::new();
    let eps = strict_eps(data);
    for b in 0..2 * p {
        let pat = &patterns.patterns[b % p];
        let sign = if b < p { 1.0 } else { -1.0 };
        for k in 0..n {
            if pat[k] {
                for c in 0..d {
                    eq[(k, b * d + c)] = sign * data.x[(k, c)];
                }
            }
        }
        if !active[b] || counts[b] == 0 {
            continue;
        }
        let r = f64::from(counts[b]) / (lambda * lambda);
        for bd in bounds.iter_mut().skip(b * d).take(d) {
            *bd = (-r, r);
        }
        for k in 0..n {
            let mut row = vec![0.0; nv];
            let flip = if pat[k] { 1.0 } else { -1.0 };
            for c in 0..d {
                row[b * d + c] = flip * data.x[(k, c)];
            }
            ge_rows.push(row);
            ge_rhs.push(if pat[k] { 0.0 } else { eps });
        }
    }
    let ge = if ge_rows.is_empty() { Mat::zeros(0, nv) } else { Mat::from_rows(&ge_rows)? };
    let prob = LpProblem {
        eq,
        eq_rhs: data.y.clone(),
        ge,
        ge_rhs,
        bounds,
    };
    let x = match lp_solve(&prob, None)? {
        LpStatus::Optimal { x, .. } => x,
        _ => return Ok(None),
    };
    let block = |b: usize| -> Vec<f64> {
        let raw = &x[b * d..(b + 1) * d];
        let scale = norm_inf(raw).max(1.0);
        raw.iter().map(|v| if v.abs() <= 1e-13 * scale { 0.0 } else { *v }).collect()
    };
    let w = PtsWitness {
        u: (0..p).map(block).collect(),
        v: (p..2 * p).map(block).collect(),
    };
    verify_witness(patterns, data, ts, lambda, &w)?;
    Ok(Some(w))
}

/// Exact sign checks plus the equality residual (`1e-9` relative to `‖y‖∞`).
pub fn verify_witness(
    patterns: &PatternSet,
    data: &Dataset,
    ts: &SupportVector,
    lambda: f64,
    w: &PtsWitness,
) -> Result<()> {
    let p = patterns.count();
    let mut fit = vec![0.0; data.n()];
    for (b, vecs) in [&w.u, &w.v].into_iter().enumerate() {
        for i in 0..p {
            let z = &vecs[i];
            let count = if b == 0 { ts.t[i] } else { ts.s[i] };
            if norm_inf(z) > f64::from(count) / (lambda * lambda) * (1.0 + 1e-12) {
                return Err(Error::NumericFailure(format!("witness block {i} exceeds its box")));
            }
            if z.iter().any(|v| *v != 0.0) && pattern_of(&data.x, z) != patterns.patterns[i] {
                return Err(Error::NumericFailure(format!(
                    "witness block {i} does not realize its pattern"
                )));
            }
            let xz = data.x.matvec(z)?;
            for k in 0..data.n() {
                if patterns.patterns[i][k] {
                    fit[k] += if b == 0 { xz[k] } else { -xz[k] };
                }
            }
        }
    }
    let scale = norm_inf(&data.y).max(1.0);
    let res = fit.iter().zip(&data.y).fold(0.0f64, |m, (f, y)| m.max((f - y).abs()));
    if res > 1e-9 * scale {
        return Err(Error::NumericFailure(format!("witness misses y by {res:.3e}")));
    }
    Ok(())
}

/// Nonemptiness of `P_(t,s)` with witness.
pub fn pts_feasible(
    patterns: &PatternSet,
    data: &Dataset,
    ts: &SupportVector,
    lambda: f64,
) -> Result<PtsOutcome> {
    let coords = ts.coords();
    let support: Vec<usize> = (0..coords.len()).filter(|&b| coords[b] > 0).collect();
    let k = support.len();
    let exhaustive = k <= MAX_EXHAUSTIVE_SUPPORT;
    let subsets: Vec<Vec<bool>> = if exhaustive {
        let mut masks: Vec<u32> = (0..(1u32 << k)).collect();
        masks.sort_by_key(|mask| (std::cmp::Reverse(mask.count_ones()), *mask));
        masks
            .into_iter()
            .map(|mask| {
                let mut active = vec![false; coords.len()];
                for (bit, &b) in support.iter().enumerate() {
                    active[b] = mask & (1 << bit) != 0;
                }
                active
            })
            .collect()
    } else {
        vec![coords.iter().map(|c| *c > 0).collect()]
    };
    for active in subsets {
        if let Some(w) = pts_active(patterns, data, ts, &active, lambda)? {
            return Ok(PtsOutcome {
                feasible: true,
                witness: Some(w),
                exhaustive,
            });
        }
    }
    Ok(PtsOutcome {
        feasible: false,
        witness: None,
        exhaustive,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalSupports {
    pub supports: Vec<SupportVector>,
    pub witnesses: Vec<PtsWitness>,
    pub cap: u32,
    /// Some minimal element touches the cap, so larger ones may have been cut off.
    pub truncated: bool,
    pub lp_calls: usize,
}

/// Minimal elements of `{(t,s) ∈ [0,cap]^{2P} : P_(t,s) ≠ ∅}`.
///
/// Supports (sets of nonzero coordinates) are visited by size. A support is
/// skipped when it cannot host an all-active solution even at the cap, or
/// when its all-ones point already dominates a minimal element. Inside a
/// support, lattice points are visited by total degree; the first feasible
/// points that dominate nothing found so far are exactly the minimal ones,
/// because anything strictly below lives on a smaller support or at a lower
/// degree and has been seen already.
pub fn minimal_supports(
    patterns: &PatternSet,
    data: &Dataset,
    lambda: f64,
    cap: u32,
) -> Result<MinimalSupports> {
    if cap < 1 {
        return Err(Error::InvalidParameter("cap must be at least 1".into()));
    }
    let p = patterns.count();
    let dim = 2 * p;
    if dim > MAX_LATTICE_DIM {
        return Err(Error::InvalidParameter(format!(
            "2P = {dim} exceeds the lattice search limit {MAX_LATTICE_DIM}"
        )));
    }
    let mut found: Vec<SupportVector> = Vec::new();
    let mut witnesses = Vec::new();
    let mut lp_calls = 0usize;
    let dominates_found =
        |pt: &[u32], found: &[SupportVector]| found.iter().any(|f| f.coords().iter().zip(pt).all(|(a, b)| a <= b));

    let mut masks: Vec<u32> = (0..(1u32 << dim)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    for mask in masks {
        let support: Vec<usize> = (0..dim).filter(|b| mask & (1 << b) != 0).collect();
        let mut ones = vec![0u32; dim];
        for &b in &support {
            ones[b] = 1;
        }
        if dominates_found(&ones, &found) {
            continue;
        }
        let mut active = vec![false; dim];
        for &b in &support {
            active[b] = true;
        }
        let mut at_cap = vec![0u32; dim];
        for &b in &support {
            at_cap[b] = cap;
        }
        lp_calls += 1;
        if pts_active(patterns, data, &SupportVector::from_coords(&at_cap), &active, lambda)?.is_none() {
            continue;
        }
        for pt in lattice_points(&support, dim, cap) {
            if dominates_found(&pt, &found) {
                continue;
            }
            let ts = SupportVector::from_coords(&pt);
            lp_calls += 1;
            if let Some(w) = pts_active(patterns, data, &ts, &active, lambda)? {
                found.push(ts);
                witnesses.push(w);
            }
        }
    }
    let truncated = found.iter().any(|f| f.coords().contains(&cap));
    Ok(MinimalSupports {
        supports: found,
        witnesses,
        cap,
        truncated,
        lp_calls,
    })
}

/// Points of `[1,cap]^support` (zero elsewhere) by total degree, then lexicographically.
fn lattice_points(support: &[usize], dim: usize, cap: u32) -> Vec<Vec<u32>> {
    let k = support.len();
    let mut pts: Vec<Vec<u32>> = Vec::new();
    let mut cur = vec![1u32; k];
    loop {
        let mut full = vec![0u32; dim];
        for (i, &b) in support.iter().enumerate() {
            full[b] = cur[i];
        }
        pts.push(full);
        let mut i = 0;
        loop {
            if i == k {
                pts.sort_by_key(|p| (p.iter().sum::<u32>(), p.clone()));
                return pts;
            }
            if cur[i] < cap {
                cur[i] += 1;
                break;
            }
            cur[i] = 1;
            i += 1;
        }
    }
}

/// `m* = 2 max Σ (t_i + s_i)` over `Z_A`.
pub fn critical_width(z_a: &[SupportVector]) -> Result<usize> {
    z_a.iter()
        .map(|z| 2 * z.total() as usize)
        .max()
        .ok_or_else(|| Error::Precondition("critical width of an empty Z_A".into()))
}

/// Among `z_a` elements `≤ current`, the lexicographically smallest (on `t` then `s`).
pub fn select_support<'a>(z_a: &'a [SupportVector], current: &SupportVector) -> Option<(usize, &'a SupportVector)> {
    z_a.iter()
        .enumerate()
        .filter(|(_, z)| SupportVector::le(z, current))
        .min_by(|a, b| a.1.coords().cmp(&b.1.coords()))
}

/// Equalized interpolator from a `P_(t,s)` witness: `t_i` copies of
/// `(u_i λ / t_i, 1/λ)` and `s_i` copies of `(v_i λ / s_i, −1/λ)`, padded with
/// zero neurons up to `width`.
pub fn equalized_from_witness(
    w: &PtsWitness,
    ts: &SupportVector,
    lambda: f64,
    width: usize,
) -> Result<TwoLayerNet> {
    let need = ts.total() as usize;
    if width < need {
        return Err(Error::WidthTooSmall {
            width,
            required: need,
            reason: "support mass of the witness".into(),
        });
    }
    let d = w.u.first().map_or(0, |u| u.len());
    let mut net = TwoLayerNet::zeros(d, width);
    let mut slot = 0;
    for (vecs, counts, sign) in [(&w.u, &ts.t, 1.0), (&w.v, &ts.s, -1.0)] {
        for (z, &c) in vecs.iter().zip(counts) {
            for _ in 0..c {
                let col: Vec<f64> = z.iter().map(|x| x * lambda / f64::from(c)).collect();
                net.set_neuron(slot, &col, sign / lambda);
                slot += 1;
            }
        }
    }
    Ok(net)
}

/// Support vector of an equalized net: per pattern, counts of positive and negative `α`
/// among active neurons.
pub fn support_of(net: &TwoLayerNet, patterns: &PatternSet, data: &Dataset) -> Result<SupportVector> {
    let mut ts = SupportVector::zeros(patterns.count());
    for i in 0..net.width() {
        if !net.is_active_neuron(i) {
            continue;
        }
        let pat = pattern_of(&data.x, &net.w.col(i));
        let Some(idx) = patterns.index_of(&pat) else {
            return Err(Error::NumericFailure(format!("neuron {i} has an unlisted pattern")));
        };
        if net.alpha[i] > 0.0 {
            ts.t[idx] += 1;
        } else {
            ts.s[idx] += 1;
        }
    }
    Ok(ts)
}
