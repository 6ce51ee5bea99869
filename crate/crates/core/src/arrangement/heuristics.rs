//! Multi-start searches for small-norm interpolators.
//!
//! Both searches run projected gradient descent on `½‖f(X) − y‖²` over norm
//! balls: a single ball for [`lambda_fit_star`] (with bisection on its
//! radius), the intersection of two balls for [`inter_overlap`] (projection by
//! Dykstra's alternating scheme). A returned witness always interpolates; a
//! failure to find one is only evidence, never proof.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{matrix_norm, norm2, svd, vector_norm, Mat, NormKind};
use crate::relu_net::{grad, in_reg_set, loss_sq, residual, Dataset, RegSetSpec, TwoLayerNet, MEMBERSHIP_TOL};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub restarts: usize,
    pub seed: u64,
    /// Projected-gradient iterations per feasibility attempt.
    pub max_iter: usize,
    /// A witness must fit every target within this absolute error.
    pub fit_tol: f64,
    pub bisect_steps: usize,
    pub init_scale: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            max_iter: 20_000,
            fit_tol: 1e-9,
            bisect_steps: 40,
            init_scale: 1.0,
        }
    }
}

/// Euclidean projection of a matrix onto `{R(W) ≤ r}`.
pub fn project_matrix(w: &Mat, kind: NormKind, r: f64) -> Result<Mat> {
    Ok(match kind {
        NormKind::MaxEntry => {
            let mut out = w.clone();
            out.as_mut_slice().iter_mut().for_each(|x| *x = x.clamp(-r, r));
            out
        }
        NormKind::Frobenius => {
            let f = matrix_norm(w, kind)?;
            if f > r {
                w.scaled(r / f)
            } else {
                w.clone()
            }
        }
        NormKind::Operator => {
            let s = svd(w)?;
            if s.sigma.first().is_none_or(|&top| top <= r) {
                return Ok(w.clone());
            }
            let mut u = s.u.clone();
            for (j, &sig) in s.sigma.iter().enumerate() {
                u.scale_col(j, sig.min(r));
            }
            u.matmul(&s.vt)?
        }
        other => {
            return Err(Error::InvalidParameter(format!(
                "no projection for constraint norm {}",
                other.name()
            )))
        }
    })
}

/// Projection of a vector onto `{R_vec(α) ≤ r}` (ℓ∞ for MaxEntry, ℓ2 otherwise).
pub fn project_vector(a: &[f64], kind: NormKind, r: f64) -> Vec<f64> {
    match kind {
        NormKind::MaxEntry => a.iter().map(|x| x.clamp(-r, r)).collect(),
        _ => {
            let n = norm2(a);
            if n > r {
                a.iter().map(|x| x * r / n).collect()
            } else {
                a.to_vec()
            }
        }
    }
}

/// A norm ball applied blockwise to `(W, α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ball {
    pub norm: NormKind,
    pub radius: f64,
}

fn project_one(net: &TwoLayerNet, b: Ball) -> Result<TwoLayerNet> {
    Ok(TwoLayerNet {
        w: project_matrix(&net.w, b.norm, b.radius)?,
        alpha: project_vector(&net.alpha, b.norm, b.radius),
    })
}

/// Projection onto the intersection of the balls (Dykstra for two or more).
pub fn project(net: &TwoLayerNet, balls: &[Ball]) -> Result<TwoLayerNet> {
    match balls.len() {
        0 => Ok(net.clone()),
        1 => project_one(net, balls[0]),
        _ => {
            let mut x = net.clone();
            let zero = TwoLayerNet::zeros(net.dim(), net.width());
            let mut incr = vec![zero; balls.len()];
            for _ in 0..500 {
                let prev = x.clone();
                for (k, b) in balls.iter().enumerate() {
                    let shifted = x.lincomb(1.0, &incr[k], 1.0)?;
                    let y = project_one(&shifted, *b)?;
                    incr[k] = shifted.lincomb(1.0, &y, -1.0)?;
                    x = y;
                }
                if x.max_abs_diff(&prev)? <= 1e-15 * (1.0 + x.w.max_abs()) {
                    break;
                }
            }
            // Finish inside every ball; the last Dykstra pass only guarantees the last one.
            for b in balls {
                x = project_one(&x, *b)?;
            }
            Ok(x)
        }
    }
}

fn max_residual(net: &TwoLayerNet, data: &Dataset) -> Result<f64> {
    Ok(residual(net, data)?.iter().fold(0.0f64, |m, r| m.max(r.abs())))
}

/// Projected gradient with backtracking (sufficient decrease along the projection arc).
pub fn projected_descent(
    data: &Dataset,
    init: &TwoLayerNet,
    balls: &[Ball],
    max_iter: usize,
    fit_tol: f64,
) -> Result<(TwoLayerNet, f64)> {
    let mut x = project(init, balls)?;
    let mut f = loss_sq(&x, data)?;
    let mut step = 1.0;
    for _ in 0..max_iter {
        if max_residual(&x, data)? <= fit_tol {
            break;
        }
        let (gw, ga) = grad(&x, data)?;
        let g = TwoLayerNet { w: gw, alpha: ga };
        let mut accepted = false;
        for _ in 0..60 {
            let cand = project(&x.lincomb(1.0, &g, -step)?, balls)?;
            let diff = cand.lincomb(1.0, &x, -1.0)?;
            let d2 = diff.w.as_slice().iter().chain(&diff.alpha).map(|v| v * v).sum::<f64>();
            let fc = loss_sq(&cand, data)?;
            if fc <= f - 0.5 / step * d2 * 0.5 || d2 == 0.0 {
                accepted = d2 > 0.0;
                x = cand;
                f = fc;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step = (step * 2.0).min(1e3);
    }
    let r = max_residual(&x, data)?;
    Ok((x, r))
}

fn random_net(seed: u64, index: u64, d: usize, m: usize, scale: f64) -> TwoLayerNet {
    let mut r = rng::indexed_stream(seed, "search-init", index);
    let w = rng::normals(&mut r, d * m).iter().map(|v| v * scale).collect();
    let alpha = rng::normals(&mut r, m).iter().map(|v| v * scale).collect();
    TwoLayerNet {
        w: Mat::from_vec(d, m, w).expect("consistent shape"),
        alpha,
    }
}

/// Rescales each neuron `(W_i, α_i) → (c W_i, α_i / c)` so both halves have equal
/// size in the given norm; the function is unchanged.
pub fn balance(net: &TwoLayerNet, kind: NormKind) -> TwoLayerNet {
    let mut out = net.clone();
    for i in 0..net.width() {
        let col = net.w.col(i);
        let nw = vector_norm(&col, if kind == NormKind::MaxEntry { kind } else { NormKind::Frobenius });
        let na = net.alpha[i].abs();
        if nw > 0.0 && na > 0.0 {
            let c = (na / nw).sqrt();
            out.set_neuron(i, &col.iter().map(|v| v * c).collect::<Vec<_>>(), net.alpha[i] / c);
        }
    }
    out
}

pub fn reg_value(net: &TwoLayerNet, kind: NormKind) -> Result<f64> {
    let (a, b) = net.reg_values(kind)?;
    Ok(a.max(b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitStar {
    /// `1 / value`: a lower estimate of the critical regularization.
    pub lambda: f64,
    /// `max{R(W), R_vec(α)}` of the witness: an upper bound on the true minimum.
    pub value: f64,
    pub witness: TwoLayerNet,
    pub restarts_succeeded: usize,
}

fn fit_one(data: &Dataset, width: usize, norm: NormKind, opts: &SearchOptions, idx: u64) -> Result<Option<(f64, TwoLayerNet)>> {
    let init = random_net(opts.seed, idx, data.d(), width, opts.init_scale);
    let (net, res) = projected_descent(data, &init, &[], opts.max_iter, opts.fit_tol)?;
    if res > opts.fit_tol {
        return Ok(None);
    }
    let mut best = balance(&net, norm);
    let mut hi = reg_value(&best, norm)?;
    let mut lo = 0.0;
    for _ in 0..opts.bisect_steps {
        if hi - lo <= 1e-7 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let ball = [Ball { norm, radius: mid }];
        let (cand, res) = projected_descent(data, &best, &ball, opts.max_iter, opts.fit_tol)?;
        if res <= opts.fit_tol {
            hi = reg_value(&cand, norm)?.min(mid);
            best = cand;
        } else {
            lo = mid;
        }
    }
    Ok(Some((reg_value(&best, norm)?, best)))
}

/// Smallest `max{R(W), R_vec(α)}` found over interpolators of the given width.
pub fn lambda_fit_star(data: &Dataset, width: usize, norm: NormKind, restarts: usize, seed: u64) -> Result<FitStar> {
    lambda_fit_star_with(data, width, norm, &SearchOptions { restarts, seed, ..SearchOptions::default() })
}

pub fn lambda_fit_star_with(data: &Dataset, width: usize, norm: NormKind, opts: &SearchOptions) -> Result<FitStar> {
    RegSetSpec::new(norm, 1.0, width)?;
    if width == 0 || opts.restarts == 0 {
        return Err(Error::InvalidParameter("width and restarts must be positive".into()));
    }
    let runs: Vec<Result<Option<(f64, TwoLayerNet)>>> = (0..opts.restarts as u64)
        .into_par_iter()
        .map(|i| fit_one(data, width, norm, opts, i))
        .collect();
    let mut best: Option<(f64, TwoLayerNet)> = None;
    let mut ok = 0;
    for r in runs {
        if let Some((v, net)) = r? {
            ok += 1;
            if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                best = Some((v, net));
            }
        }
    }
    match best {
        Some((value, witness)) => Ok(FitStar {
            lambda: 1.0 / value,
            value,
            witness,
            restarts_succeeded: ok,
        }),
        None => {
            let best_loss = (0..opts.restarts as u64)
                .map(|i| {
                    let init = random_net(opts.seed, i, data.d(), width, opts.init_scale);
                    loss_sq(&init, data).unwrap_or(f64::INFINITY)
                })
                .fold(f64::INFINITY, f64::min);
            Err(Error::NoInterpolator {
                restarts: opts.restarts,
                best_loss,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OverlapVerdict {
    /// Certified: the witness passes both membership checks.
    OverlapFound { witness: TwoLayerNet },
    /// Heuristic: no restart produced a certified witness.
    NoneFound { best_residual: f64 },
}

impl OverlapVerdict {
    pub fn found(&self) -> bool {
        matches!(self, OverlapVerdict::OverlapFound { .. })
    }
}

/// Searches `O_{R1}(λ1) ∩ O_{R2}(λ2)` at the given width.
#[allow(clippy::too_many_arguments)]
pub fn inter_overlap(
    data: &Dataset,
    width: usize,
    norm1: NormKind,
    lambda1: f64,
    norm2: NormKind,
    lambda2: f64,
    restarts: usize,
    seed: u64,
) -> Result<OverlapVerdict> {
    let opts = SearchOptions { restarts, seed, ..SearchOptions::default() };
    inter_overlap_with(data, width, (norm1, lambda1), (norm2, lambda2), &opts)
}

pub fn inter_overlap_with(
    data: &Dataset,
    width: usize,
    first: (NormKind, f64),
    second: (NormKind, f64),
    opts: &SearchOptions,
) -> Result<OverlapVerdict> {
    let s1 = RegSetSpec::new(first.0, first.1, width)?;
    let s2 = RegSetSpec::new(second.0, second.1, width)?;
    let balls = [
        Ball { norm: s1.norm, radius: s1.radius() },
        Ball { norm: s2.norm, radius: s2.radius() },
    ];
    let runs: Vec<Result<(TwoLayerNet, f64)>> = (0..opts.restarts as u64)
        .into_par_iter()
        .map(|i| {
            let init = random_net(opts.seed, i, data.d(), width, opts.init_scale);
            projected_descent(data, &init, &balls, opts.max_iter, opts.fit_tol)
        })
        .collect();
    let mut best_residual = f64::INFINITY;
    for r in runs {
        let (net, res) = r?;
        best_residual = best_residual.min(res);
        if in_reg_set(&net, data, &s1, MEMBERSHIP_TOL) && in_reg_set(&net, data, &s2, MEMBERSHIP_TOL) {
            return Ok(OverlapVerdict::OverlapFound { witness: net });
        }
    }
    Ok(OverlapVerdict::NoneFound { best_residual })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lambda2Star {
    pub value: f64,
    /// The verdict did not change sign on `[lo, hi]`.
    pub unbracketed: bool,
    /// `(λ2, overlap found)` in evaluation order.
    pub trace: Vec<(f64, bool)>,
}

/// Bisection on the overlap verdict over `λ2 ∈ [lo, hi]` (larger `λ2` shrinks the ball).
#[allow(clippy::too_many_arguments)]
pub fn lambda2_star(
    data: &Dataset,
    width: usize,
    norm1: NormKind,
    lambda1: f64,
    norm2: NormKind,
    lo: f64,
    hi: f64,
    iters: usize,
    opts: &SearchOptions,
) -> Result<Lambda2Star> {
    if !(lo < hi) || !(lo > 0.0) {
        return Err(Error::InvalidParameter(format!("need 0 < lo < hi, got [{lo}, {hi}]")));
    }
    let verdict = |l2: f64| -> Result<bool> {
        Ok(inter_overlap_with(data, width, (norm1, lambda1), (norm2, l2), opts)?.found())
    };
    let mut trace = Vec::new();
    let at_hi = verdict(hi)?;
    trace.push((hi, at_hi));
    if at_hi {
        return Ok(Lambda2Star { value: hi, unbracketed: true, trace });
    }
    let at_lo = verdict(lo)?;
    trace.push((lo, at_lo));
    if !at_lo {
        return Ok(Lambda2Star { value: lo, unbracketed: true, trace });
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..iters {
        let mid = 0.5 * (a + b);
        let v = verdict(mid)?;
        trace.push((mid, v));
        if v {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Lambda2Star {
        value: 0.5 * (a + b),
        unbracketed: false,
        trace,
    })
}
