//! The `[A; −A]` dataset whose zero-loss set splits into `2^d` components, one
//! per sign vector `σ`, with closed-form component norms and the loss barrier
//! between components.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, invert, norm2, norm_inf, Mat, NormKind};
use crate::relu_net::{in_solution_set, loss_sq, Dataset, TwoLayerNet};

/// Largest `d` accepted by [`norm_ladder`].
pub const MAX_LADDER_DIM: usize = 22;
/// Values within this relative distance of the minimum count as ties.
pub const TIE_RTOL: f64 = 1e-9;
/// Samples used by [`barrier_witness`] to locate the first sign change.
pub const BARRIER_SAMPLES: usize = 1001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Construction {
    pub d: usize,
    pub l: f64,
    pub b: Mat,
    pub a: Mat,
    pub data: Dataset,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ComponentIndex {
    pub sigma: Vec<i8>,
}

impl ComponentIndex {
    pub fn new(sigma: Vec<i8>) -> Result<Self> {
        if sigma.is_empty() || sigma.iter().any(|s| *s != 1 && *s != -1) {
            return Err(Error::InvalidParameter("sign vector entries must be +1 or -1".into()));
        }
        Ok(Self { sigma })
    }

    pub fn h1(d: usize) -> Self {
        Self { sigma: vec![1; d] }
    }

    pub fn h2(d: usize) -> Self {
        let mut sigma = vec![-1; d];
        sigma[0] = 1;
        Self { sigma }
    }

    /// Bit `k` set iff `σ_k = −1`.
    pub fn from_id(d: usize, id: u64) -> Self {
        Self {
            sigma: (0..d).map(|k| if id >> k & 1 == 1 { -1 } else { 1 }).collect(),
        }
    }

    pub fn id(&self) -> u64 {
        self.sigma
            .iter()
            .enumerate()
            .filter(|(_, s)| **s < 0)
            .fold(0, |acc, (k, _)| acc | 1 << k)
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn neg(&self) -> Self {
        Self {
            sigma: self.sigma.iter().map(|s| -s).collect(),
        }
    }

    /// Representative of `{σ, −σ}` with `σ_1 = +1`.
    pub fn canonical(&self) -> Self {
        if self.sigma[0] < 0 {
            self.neg()
        } else {
            self.clone()
        }
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.sigma.iter().map(|&s| s as f64).collect()
    }

    pub fn to_string_pm(&self) -> String {
        self.sigma.iter().map(|s| if *s > 0 { '+' } else { '-' }).collect()
    }
}

pub fn build_construction(d: usize, l: f64) -> Result<Construction> {
    if d < 2 {
        return Err(Error::InvalidParameter(format!("construction needs d >= 2, got {d}")));
    }
    if !(l > 1.0 && l < (d as f64).sqrt()) {
        return Err(Error::InvalidParameter(format!(
            "construction needs 1 < L < sqrt(d) = {}, got {l}",
            (d as f64).sqrt()
        )));
    }
    let off = 1.0 / (2.0 * (d - 1) as f64);
    let b = Mat::from_fn(d, d, |i, j| match (i, j) {
        (0, 0) => (1.0 + l) / 2.0,
        (0, _) => (1.0 - l) * off,
        (_, 0) => 0.5,
        _ if i == j => 1.0 - off,
        _ => -off,
    });
    let a = invert(&b)?;
    let x = Mat::from_fn(2 * d, d, |r, c| if r < d { a[(r, c)] } else { -a[(r - d, c)] });
    let data = Dataset::new(x, vec![1.0; 2 * d])?;
    Ok(Construction { d, l, b, a, data })
}

/// Default parameters: `d = 16`, `L = √d / 2`.
pub fn default_construction() -> Construction {
    build_construction(16, 2.0).expect("valid default parameters")
}

impl Construction {
    /// Same `A`, different strictly positive targets.
    pub fn with_targets(&self, y: Vec<f64>) -> Result<Construction> {
        if y.len() != 2 * self.d || y.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::InvalidParameter("targets must be 2d strictly positive values".into()));
        }
        let mut out = self.clone();
        out.data = Dataset::new(self.data.x.clone(), y)?;
        Ok(out)
    }

    pub fn has_unit_targets(&self) -> bool {
        self.data.y.iter().all(|v| *v == 1.0)
    }

    /// `y_σ`: `y_i` where `σ_i = +1`, `−y_{d+i}` where `σ_i = −1`.
    pub fn y_sigma(&self, sigma: &ComponentIndex) -> Vec<f64> {
        sigma
            .sigma
            .iter()
            .enumerate()
            .map(|(i, &s)| if s > 0 { self.data.y[i] } else { -self.data.y[self.d + i] })
            .collect()
    }

    /// `(p, q) = (A⁻¹ y_σ, A⁻¹ y_{−σ}) = (B y_σ, B y_{−σ})`.
    pub fn pq(&self, sigma: &ComponentIndex) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_sigma(sigma)?;
        Ok((self.b.matvec(&self.y_sigma(sigma))?, self.b.matvec(&self.y_sigma(&sigma.neg()))?))
    }

    fn check_sigma(&self, sigma: &ComponentIndex) -> Result<()> {
        if sigma.len() != self.d {
            return Err(Error::DimensionMismatch(format!(
                "sign vector of length {} for d = {}",
                sigma.len(),
                self.d
            )));
        }
        Ok(())
    }
}

pub fn component_point(c: &Construction, sigma: &ComponentIndex, alpha1: f64, alpha2: f64) -> Result<TwoLayerNet> {
    if !(alpha1 > 0.0 && alpha2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "component parameters must be positive, got ({alpha1}, {alpha2})"
        )));
    }
    let (p, q) = c.pq(sigma)?;
    let cols = vec![
        p.iter().map(|v| v / alpha1).collect(),
        q.iter().map(|v| v / alpha2).collect(),
    ];
    TwoLayerNet::new(Mat::from_cols(c.d, &cols)?, vec![alpha1, alpha2])
}

/// The point of the component attaining its minimal norm value.
pub fn balanced_point(c: &Construction, sigma: &ComponentIndex, norm: NormKind) -> Result<TwoLayerNet> {
    let (p, q) = c.pq(sigma)?;
    let (a1, a2) = match norm {
        NormKind::MaxEntry => (norm_inf(&p).sqrt(), norm_inf(&q).sqrt()),
        NormKind::Operator => {
            let (a, b, cc) = (dot(&p, &p), dot(&q, &q), dot(&p, &q).abs());
            let s = (a + cc) / (a + b + 2.0 * cc);
            let rho = (a + b + 2.0 * cc).powf(0.25);
            (rho * s.sqrt(), rho * (1.0 - s).sqrt())
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "balanced points exist for max and op norms, not {}",
                other.name()
            )))
        }
    };
    component_point(c, sigma, a1, a2)
}

pub fn component_of(c: &Construction, net: &TwoLayerNet, tol: f64) -> Result<ComponentIndex> {
    if net.dim() != c.d || net.width() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "expected a width-2 net on d = {}, got d = {}, m = {}",
            c.d,
            net.dim(),
            net.width()
        )));
    }
    if !in_solution_set(net, &c.data, tol) {
        return Err(Error::Precondition("net does not interpolate the construction data".into()));
    }
    let z = c.a.matvec(&net.w.col(0))?;
    let mut sigma = Vec::with_capacity(c.d);
    for (k, v) in z.iter().enumerate() {
        if v.abs() <= tol {
            return Err(Error::AmbiguousSign { coord: k, value: *v });
        }
        sigma.push(if *v > 0.0 { 1 } else { -1 });
    }
    Ok(ComponentIndex { sigma })
}

/// Closed-form `(R_∞, R_op)` of `C(p, q)`.
pub fn cpq_norms(p: &[f64], q: &[f64]) -> (f64, f64) {
    let r_inf = norm_inf(p).max(norm_inf(q)).sqrt();
    let r_op = (dot(p, p) + dot(q, q) + 2.0 * dot(p, q).abs()).powf(0.25);
    (r_inf, r_op)
}

fn op_norm_two_cols(p: &[f64], q: &[f64], a1: f64, a2: f64) -> f64 {
    let a = dot(p, p) / (a1 * a1);
    let b = dot(q, q) / (a2 * a2);
    let c = dot(p, q) / (a1 * a2);
    let half = 0.5 * (a + b);
    (half + (0.25 * (a - b) * (a - b) + c * c).sqrt()).sqrt()
}

/// Minimizes `f` over `(α₁, α₂) ∈ (0, ∞)²` on a log grid, re-centering and
/// shrinking the grid around the best cell.
fn grid_min(grid: usize, center: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
    let mut lo = [center.ln() - 8.0; 2];
    let mut width = 16.0;
    let mut best = f64::INFINITY;
    for _ in 0..40 {
        let h = width / (grid - 1) as f64;
        let mut arg = [0.0; 2];
        for i in 0..grid {
            let u = lo[0] + h * i as f64;
            for j in 0..grid {
                let v = lo[1] + h * j as f64;
                let val = f(u.exp(), v.exp());
                if val < best {
                    best = val;
                    arg = [u, v];
                }
            }
        }
        width = 4.0 * h;
        lo = [arg[0] - 2.0 * h, arg[1] - 2.0 * h];
    }
    best
}

/// Grid search for `C(p, q)` norms; an oracle for [`cpq_norms`].
pub fn cpq_norms_brute(p: &[f64], q: &[f64], grid: usize) -> Result<(f64, f64)> {
    if grid < 64 {
        return Err(Error::InvalidParameter(format!("grid resolution must be >= 64, got {grid}")));
    }
    let (pi, qi) = (norm_inf(p), norm_inf(q));
    let center = (norm2(p).max(norm2(q))).sqrt().max(1e-300);
    let r_inf = grid_min(grid, center, |a1, a2| (pi / a1).max(qi / a2).max(a1).max(a2));
    let r_op = grid_min(grid, center, |a1, a2| op_norm_two_cols(p, q, a1, a2).max(a1.hypot(a2)));
    Ok((r_inf, r_op))
}

/// `(R_∞, R_op)` of the component `C_{σ|−σ}`; targets must be all ones.
pub fn component_norms(c: &Construction, sigma: &ComponentIndex) -> Result<(f64, f64)> {
    if !c.has_unit_targets() {
        return Err(Error::Precondition(
            "closed-form component norms need unit targets; use component_norms_brute".into(),
        ));
    }
    c.check_sigma(sigma)?;
    let v = c.b.matvec(&sigma.as_f64())?;
    Ok((norm_inf(&v).sqrt(), (2.0 * norm2(&v)).sqrt()))
}

pub fn component_norms_brute(c: &Construction, sigma: &ComponentIndex, grid: usize) -> Result<(f64, f64)> {
    let (p, q) = c.pq(sigma)?;
    cpq_norms_brute(&p, &q, grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormLadder {
    pub d: usize,
    pub l: f64,
    pub r_inf_1: f64,
    pub r_inf_2: f64,
    pub r_op_1: f64,
    pub r_op_2: f64,
    pub argmin_inf: Vec<ComponentIndex>,
    pub argmin_op: Vec<ComponentIndex>,
    pub runner_up_inf: ComponentIndex,
    pub runner_up_op: ComponentIndex,
}

const KEEP: usize = 32;

#[derive(Debug, Clone, Default)]
struct Best {
    /// `(key, id)`, ascending by key, at most `KEEP` entries.
    items: Vec<(f64, u64)>,
}

impl Best {
    fn offer(&mut self, key: f64, id: u64) {
        if self.items.len() == KEEP && key >= self.items[KEEP - 1].0 {
            return;
        }
        let pos = self.items.partition_point(|e| e.0 <= key);
        self.items.insert(pos, (key, id));
        self.items.truncate(KEEP);
    }

    fn merge(mut self, other: Best) -> Best {
        for (k, id) in other.items {
            self.offer(k, id);
        }
        self
    }
}

/// Scans every `σ` with `σ₁ = +1` in Gray-code order, updating `Bσ` one column
/// at a time. Returns the lowest keys for `‖Bσ‖_∞` and `‖Bσ‖₂²`.
fn scan(b: &Mat, d: usize) -> (Best, Best) {
    let free = d - 1;
    let low = free.min(12);
    let blocks = 1u64 << (free - low);
    let cols: Vec<Vec<f64>> = (0..d).map(|j| b.col(j)).collect();
    (0..blocks)
        .into_par_iter()
        .map(|block| {
            let mut inf = Best::default();
            let mut two = Best::default();
            // bit k of id is σ_k = -1; bit 0 stays clear
            let mut id = block << (low + 1);
            let sigma = ComponentIndex::from_id(d, id).as_f64();
            let mut v = b.matvec(&sigma).expect("square");
            let mut record = |v: &[f64], id: u64| {
                inf.offer(norm_inf(v), id);
                two.offer(dot(v, v), id);
            };
            record(&v, id);
            for k in 1..(1u64 << low) {
                let bit = 1 + k.trailing_zeros() as usize;
                let was_neg = id >> bit & 1 == 1;
                id ^= 1 << bit;
                // flipping σ_bit from s to -s adds -2s·B_{·bit}
                let f = if was_neg { 2.0 } else { -2.0 };
                for (vi, ci) in v.iter_mut().zip(&cols[bit]) {
                    *vi += f * ci;
                }
                record(&v, id);
            }
            (inf, two)
        })
        .reduce(
            || (Best::default(), Best::default()),
            |a, b| (a.0.merge(b.0), a.1.merge(b.1)),
        )
}

fn split_ladder(
    c: &Construction,
    best: &Best,
    value: impl Fn(&Construction, &ComponentIndex) -> Result<f64>,
) -> Result<(f64, f64, Vec<ComponentIndex>, ComponentIndex)> {
    let mut exact: Vec<(f64, ComponentIndex)> = best
        .items
        .iter()
        .map(|&(_, id)| {
            let s = ComponentIndex::from_id(c.d, id);
            value(c, &s).map(|v| (v, s))
        })
        .collect::<Result<_>>()?;
    exact.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let r1 = exact[0].0;
    let cut = r1 * (1.0 + TIE_RTOL);
    let ties: Vec<&(f64, ComponentIndex)> = exact.iter().filter(|e| e.0 <= cut).collect();
    let Some(next) = exact.iter().find(|e| e.0 > cut) else {
        return Err(Error::NumericFailure(format!(
            "more than {KEEP} tied minimizers; runner-up not resolved"
        )));
    };
    let mut argmins = Vec::new();
    for (_, s) in ties {
        argmins.push(s.clone());
        argmins.push(s.neg());
    }
    argmins.sort();
    Ok((r1, next.0, argmins, next.1.clone()))
}

/// Exhaustive minimum and runner-up of both component norms over all `σ`.
pub fn norm_ladder(c: &Construction) -> Result<NormLadder> {
    if c.d > MAX_LADDER_DIM {
        return Err(Error::DimensionTooLarge {
            d: c.d,
            limit: MAX_LADDER_DIM,
        });
    }
    if !c.has_unit_targets() {
        return Err(Error::Precondition("norm ladder needs unit targets".into()));
    }
    let (inf, two) = scan(&c.b, c.d);
    let (r_inf_1, r_inf_2, argmin_inf, runner_up_inf) = split_ladder(c, &inf, |c, s| Ok(component_norms(c, s)?.0))?;
    let (r_op_1, r_op_2, argmin_op, runner_up_op) = split_ladder(c, &two, |c, s| Ok(component_norms(c, s)?.1))?;
    Ok(NormLadder {
        d: c.d,
        l: c.l,
        r_inf_1,
        r_inf_2,
        r_op_1,
        r_op_2,
        argmin_inf,
        argmin_op,
        runner_up_inf,
        runner_up_op,
    })
}

/// Every canonical `σ` with both norms, ordered by id.
pub fn ladder_table(c: &Construction) -> Result<Vec<(u64, f64, f64)>> {
    if c.d > MAX_LADDER_DIM {
        return Err(Error::DimensionTooLarge {
            d: c.d,
            limit: MAX_LADDER_DIM,
        });
    }
    (0..1u64 << (c.d - 1))
        .into_par_iter()
        .map(|k| {
            let s = ComponentIndex::from_id(c.d, k << 1);
            component_norms(c, &s).map(|(a, b)| (s.id(), a, b))
        })
        .collect()
}

/// Admissible `1/λ` for one optimizer: `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseWindow {
    pub lo: f64,
    pub hi: f64,
}

impl InverseWindow {
    pub fn contains_inverse(&self, inv_lambda: f64) -> bool {
        inv_lambda >= self.lo && inv_lambda < self.hi
    }

    /// `λ` whose inverse is the window midpoint.
    pub fn mid_lambda(&self) -> f64 {
        2.0 / (self.lo + self.hi)
    }

    /// `(λ_min, λ_max]` as a half-open pair.
    pub fn lambda_range(&self) -> (f64, f64) {
        (1.0 / self.hi, 1.0 / self.lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaWindows {
    pub adamw: InverseWindow,
    pub muon: InverseWindow,
}

pub fn lambda_windows(ladder: &NormLadder) -> Result<LambdaWindows> {
    if !(ladder.r_inf_1 < ladder.r_inf_2) || !(ladder.r_op_1 < ladder.r_op_2) {
        return Err(Error::Precondition("degenerate ladder: best and runner-up coincide".into()));
    }
    Ok(LambdaWindows {
        adamw: InverseWindow {
            lo: ladder.r_inf_1,
            hi: ladder.r_inf_2,
        },
        muon: InverseWindow {
            lo: ladder.r_op_1,
            hi: ladder.r_op_2,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierWitness {
    pub t_star: f64,
    pub loss: f64,
    /// Coordinate of `A·W_{·1}` that changes sign.
    pub coord: usize,
    pub sigma_start: ComponentIndex,
    pub sigma_end: ComponentIndex,
}

/// Finds a `t` at which some coordinate of `A·W_{·1}(t)` vanishes and reports
/// the loss there. `path` maps `[0, 1]` to width-2 nets.
pub fn barrier_witness(
    c: &Construction,
    path: impl Fn(f64) -> Result<TwoLayerNet>,
    bisect_tol: f64,
) -> Result<BarrierWitness> {
    scan_crossings(c, &path, bisect_tol, true)?.into_iter().next().ok_or_else(|| {
        Error::NumericFailure("endpoints lie in different components but no sign change was sampled".into())
    })
}

/// Every sampled sign change of every coordinate of `A·W_{·1}(t)`, each bisected.
pub fn barrier_crossings(
    c: &Construction,
    path: impl Fn(f64) -> Result<TwoLayerNet>,
    bisect_tol: f64,
) -> Result<Vec<BarrierWitness>> {
    scan_crossings(c, &path, bisect_tol, false)
}

fn scan_crossings(
    c: &Construction,
    path: &impl Fn(f64) -> Result<TwoLayerNet>,
    bisect_tol: f64,
    first_only: bool,
) -> Result<Vec<BarrierWitness>> {
    let tol = crate::relu_net::MEMBERSHIP_TOL;
    let s0 = component_of(c, &path(0.0)?, tol)?;
    let s1 = component_of(c, &path(1.0)?, tol)?;
    if s0 == s1 || s0 == s1.neg() {
        return Err(Error::SameComponent);
    }
    let z = |t: f64| -> Result<Vec<f64>> { c.a.matvec(&path(t)?.w.col(0)) };
    let mut out = Vec::new();
    let mut prev_t = 0.0;
    let mut prev = z(0.0)?;
    for k in 1..BARRIER_SAMPLES {
        let t = k as f64 / (BARRIER_SAMPLES - 1) as f64;
        let cur = z(t)?;
        for i in (0..c.d).filter(|&i| prev[i] != 0.0 && (prev[i].signum() != cur[i].signum() || cur[i] == 0.0)) {
            let (mut lo, mut hi) = (prev_t, t);
            let s_lo = prev[i].signum();
            let mut exact = None;
            while hi - lo > bisect_tol {
                let mid = 0.5 * (lo + hi);
                let v = z(mid)?[i];
                if v == 0.0 {
                    exact = Some(mid);
                    break;
                }
                if v.signum() == s_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let t_star = exact.unwrap_or(if cur[i] == 0.0 && hi == t { t } else { 0.5 * (lo + hi) });
            let loss = loss_sq(&path(t_star)?, &c.data)?;
            out.push(BarrierWitness {
                t_star,
                loss,
                coord: i,
                sigma_start: s0.clone(),
                sigma_end: s1.clone(),
            });
            if first_only {
                return Ok(out);
            }
        }
        prev = cur;
        prev_t = t;
    }
    Ok(out)
}
