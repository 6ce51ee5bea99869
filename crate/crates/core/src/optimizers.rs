//! AdamW and the Lion-K family applied blockwise to `(W, α)`.
//!
//! Lion-K keeps a heavy-ball momentum `m ← μ m + g` and steps along a
//! subgradient of a convex `K` at `m`:
//!
//! | kind       | K         | W direction  | α direction |
//! |------------|-----------|--------------|-------------|
//! | Signum     | ℓ1        | `sign(m)`    | `sign(m)`   |
//! | NormMomGD  | Frobenius | `m / ‖m‖_F`  | `m / ‖m‖₂`  |
//! | Muon       | nuclear   | `U Vᵀ`       | `m / ‖m‖₂`  |
//!
//! All kinds use decoupled weight decay, `θ ← θ − η (v + λ θ)`. AdamW runs
//! without bias correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{matrix_norm, norm2, svd, vector_norm, Mat, NormKind};
use crate::relu_net::{gaussian_init, grad, loss_sq, Dataset, TwoLayerNet};

pub const DIVERGENCE_LOSS: f64 = 1e12;
pub const DEFAULT_SLACK: f64 = 0.05;
pub const NEWTON_SCHULZ_ITERS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OptimizerKind {
    AdamW,
    Signum,
    NormMomGD,
    Muon,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 4] = [
        OptimizerKind::AdamW,
        OptimizerKind::Signum,
        OptimizerKind::NormMomGD,
        OptimizerKind::Muon,
    ];

    /// Norm of the constraint set its limit points satisfy.
    pub fn induced_norm(self) -> NormKind {
        match self {
            OptimizerKind::AdamW | OptimizerKind::Signum => NormKind::MaxEntry,
            OptimizerKind::NormMomGD => NormKind::Frobenius,
            OptimizerKind::Muon => NormKind::Operator,
        }
    }

    pub fn is_lion(self) -> bool {
        self != OptimizerKind::AdamW
    }

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::AdamW => "adamw",
            OptimizerKind::Signum => "signum",
            OptimizerKind::NormMomGD => "normmomgd",
            OptimizerKind::Muon => "muon",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "adamw" => Ok(OptimizerKind::AdamW),
            "signum" | "lion" => Ok(OptimizerKind::Signum),
            "normmomgd" | "nmgd" | "normalizedgd" => Ok(OptimizerKind::NormMomGD),
            "muon" => Ok(OptimizerKind::Muon),
            other => Err(Error::Parse(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub eta: f64,
    pub lambda: f64,
    pub mu: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub steps: usize,
    /// Training stops early once the loss drops below this value.
    pub tol: f64,
    /// Muon only: approximate `U Vᵀ` by Newton-Schulz instead of an SVD.
    pub newton_schulz: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::AdamW,
            eta: 1e-3,
            lambda: 0.1,
            mu: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            steps: 1000,
            tol: 1e-8,
            newton_schulz: false,
        }
    }
}

impl OptimizerConfig {
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be nonnegative, got {}", self.lambda));
        }
        if self.lambda > 0.0 && self.eta * self.lambda >= 1.0 {
            return bad(format!("need eta < 1/lambda (eta = {}, lambda = {})", self.eta, self.lambda));
        }
        match self.kind {
            OptimizerKind::AdamW => {
                if !(0.0 <= self.beta1 && self.beta1 <= self.beta2 && self.beta2 < 1.0) {
                    return bad(format!(
                        "need 0 <= beta1 <= beta2 < 1 (beta1 = {}, beta2 = {})",
                        self.beta1, self.beta2
                    ));
                }
                if !(self.eps > 0.0) {
                    return bad(format!("eps must be positive, got {}", self.eps));
                }
            }
            _ => {
                if !(0.0 <= self.mu && self.mu < 1.0) {
                    return bad(format!("need 0 <= mu < 1, got {}", self.mu));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptState {
    pub m_w: Mat,
    pub m_alpha: Vec<f64>,
    /// Second moments, AdamW only.
    pub v_w: Option<Mat>,
    pub v_alpha: Option<Vec<f64>>,
    pub step: usize,
}

impl OptState {
    pub fn new(kind: OptimizerKind, net: &TwoLayerNet) -> Self {
        let (d, m) = net.w.shape();
        let adam = kind == OptimizerKind::AdamW;
        Self {
            m_w: Mat::zeros(d, m),
            m_alpha: vec![0.0; m],
            v_w: adam.then(|| Mat::zeros(d, m)),
            v_alpha: adam.then(|| vec![0.0; m]),
            step: 0,
        }
    }

    /// State with neurons permuted the same way as [`TwoLayerNet::permuted`].
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let pv = |v: &Vec<f64>| perm.iter().map(|&j| v[j]).collect::<Vec<f64>>();
        Self {
            m_w: self.m_w.select_cols(perm),
            m_alpha: pv(&self.m_alpha),
            v_w: self.v_w.as_ref().map(|v| v.select_cols(perm)),
            v_alpha: self.v_alpha.as_ref().map(pv),
            step: self.step,
        }
    }

    fn check(&self, net: &TwoLayerNet) -> Result<()> {
        if self.m_w.shape() != net.w.shape() || self.m_alpha.len() != net.width() {
            return Err(Error::DimensionMismatch("optimizer state does not match the net".into()));
        }
        Ok(())
    }
}

fn check_grads(net: &TwoLayerNet, gw: &Mat, ga: &[f64]) -> Result<()> {
    if gw.shape() != net.w.shape() || ga.len() != net.width() {
        return Err(Error::DimensionMismatch("gradient does not match the net".into()));
    }
    Ok(())
}

fn adam_block(theta: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64], cfg: &OptimizerConfig) {
    for k in 0..theta.len() {
        m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
        v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
        theta[k] -= cfg.eta * (m[k] / (v[k].sqrt() + cfg.eps) + cfg.lambda * theta[k]);
    }
}

pub fn adamw_step(
    net: &TwoLayerNet,
    state: &OptState,
    grads: (&Mat, &[f64]),
    cfg: &OptimizerConfig,
) -> Result<(TwoLayerNet, OptState)> {
    if cfg.kind != OptimizerKind::AdamW {
        return Err(Error::InvalidParameter(format!("adamw_step called with {}", cfg.kind.name())));
    }
    state.check(net)?;
    check_grads(net, grads.0, grads.1)?;
    let mut next = net.clone();
    let mut st = state.clone();
    let (Some(vw), Some(va)) = (st.v_w.as_mut(), st.v_alpha.as_mut()) else {
        return Err(Error::InvalidParameter("AdamW state lacks second moments".into()));
    };
    adam_block(next.w.as_mut_slice(), st.m_w.as_mut_slice(), vw.as_mut_slice(), grads.0.as_slice(), cfg);
    adam_block(&mut next.alpha, &mut st.m_alpha, va, grads.1, cfg);
    st.step += 1;
    Ok((next, st))
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn normalized(v: &[f64], nrm: f64) -> Vec<f64> {
    if nrm == 0.0 {
        vec![0.0; v.len()]
    } else {
        v.iter().map(|x| x / nrm).collect()
    }
}

/// `U_r V_rᵀ` over the singular values above the rank cutoff (0 for `m = 0`).
pub fn polar_factor(m: &Mat) -> Result<Mat> {
    let s = svd(m)?;
    let smax = s.sigma.first().copied().unwrap_or(0.0);
    let cutoff = smax * (m.rows().max(m.cols()) as f64) * f64::EPSILON;
    let mut out = Mat::zeros(m.rows(), m.cols());
    for (k, &sig) in s.sigma.iter().enumerate() {
        if sig <= cutoff || sig == 0.0 {
            continue;
        }
        for i in 0..m.rows() {
            let u = s.u[(i, k)];
            for j in 0..m.cols() {
                out[(i, j)] += u * s.vt[(k, j)];
            }
        }
    }
    Ok(out)
}

/// Cubic Newton-Schulz iteration `X ← 1.5 X − 0.5 X Xᵀ X` from `m / ‖m‖_F`.
/// Approximates [`polar_factor`]; singular values far below the largest converge slowly.
pub fn newton_schulz(m: &Mat, iters: usize) -> Result<Mat> {
    let f = matrix_norm(m, NormKind::Frobenius)?;
    if f == 0.0 {
        return Ok(Mat::zeros(m.rows(), m.cols()));
    }
    let mut x = m.scaled(1.0 / f);
    for _ in 0..iters {
        let xxt_x = x.matmul(&x.transpose())?.matmul(&x)?;
        x = x.lincomb(1.5, &xxt_x, -0.5)?;
    }
    Ok(x)
}

/// Update direction `∇K(m)` for the W block and the α block.
pub fn lion_direction(kind: OptimizerKind, m_w: &Mat, m_a: &[f64], newton: bool) -> Result<(Mat, Vec<f64>)> {
    Ok(match kind {
        OptimizerKind::Signum => {
            let mut dw = m_w.clone();
            dw.as_mut_slice().iter_mut().for_each(|x| *x = sign(*x));
            (dw, m_a.iter().map(|x| sign(*x)).collect())
        }
        OptimizerKind::NormMomGD => {
            let f = matrix_norm(m_w, NormKind::Frobenius)?;
            let dw = if f == 0.0 { Mat::zeros(m_w.rows(), m_w.cols()) } else { m_w.scaled(1.0 / f) };
            (dw, normalized(m_a, norm2(m_a)))
        }
        OptimizerKind::Muon => {
            let dw = if newton {
                newton_schulz(m_w, NEWTON_SCHULZ_ITERS)?
            } else {
                polar_factor(m_w)?
            };
            (dw, normalized(m_a, norm2(m_a)))
        }
        OptimizerKind::AdamW => {
            return Err(Error::InvalidParameter("AdamW is not a Lion-K optimizer".into()))
        }
    })
}

pub fn lionk_step(
    net: &TwoLayerNet,
    state: &OptState,
    grads: (&Mat, &[f64]),
    cfg: &OptimizerConfig,
) -> Result<(TwoLayerNet, OptState)> {
    if !cfg.kind.is_lion() {
        return Err(Error::InvalidParameter("lionk_step called with AdamW".into()));
    }
    state.check(net)?;
    check_grads(net, grads.0, grads.1)?;
    let mut st = state.clone();
    for (m, g) in st.m_w.as_mut_slice().iter_mut().zip(grads.0.as_slice()) {
        *m = cfg.mu * *m + g;
    }
    for (m, g) in st.m_alpha.iter_mut().zip(grads.1) {
        *m = cfg.mu * *m + g;
    }
    let (dw, da) = lion_direction(cfg.kind, &st.m_w, &st.m_alpha, cfg.newton_schulz)?;
    let mut next = net.clone();
    for (t, v) in next.w.as_mut_slice().iter_mut().zip(dw.as_slice()) {
        *t -= cfg.eta * (v + cfg.lambda * *t);
    }
    for (t, v) in next.alpha.iter_mut().zip(&da) {
        *t -= cfg.eta * (v + cfg.lambda * *t);
    }
    st.step += 1;
    Ok((next, st))
}

pub fn step(
    net: &TwoLayerNet,
    state: &OptState,
    grads: (&Mat, &[f64]),
    cfg: &OptimizerConfig,
) -> Result<(TwoLayerNet, OptState)> {
    match cfg.kind {
        OptimizerKind::AdamW => adamw_step(net, state, grads, cfg),
        _ => lionk_step(net, state, grads, cfg),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub net: TwoLayerNet,
    /// Loss before the first step and after every step taken.
    pub trace: Vec<f64>,
}

/// Full-batch training from `gaussian_init(seed, d, width, init_scale)`.
pub fn train(
    data: &Dataset,
    width: usize,
    cfg: &OptimizerConfig,
    seed: u64,
    init_scale: f64,
) -> Result<TrainResult> {
    if width == 0 {
        return Err(Error::Precondition("width must be at least 1".into()));
    }
    cfg.validate()?;
    let init = gaussian_init(seed, data.d(), width, init_scale);
    train_from(data, init, cfg)
}

pub fn train_from(data: &Dataset, init: TwoLayerNet, cfg: &OptimizerConfig) -> Result<TrainResult> {
    cfg.validate()?;
    let mut net = init;
    let mut state = OptState::new(cfg.kind, &net);
    let mut trace = Vec::with_capacity(cfg.steps + 1);
    let mut loss = loss_sq(&net, data)?;
    trace.push(loss);
    for s in 0..cfg.steps {
        if loss < cfg.tol {
            break;
        }
        let (gw, ga) = grad(&net, data)?;
        let (n2, s2) = step(&net, &state, (&gw, &ga), cfg)?;
        net = n2;
        state = s2;
        loss = loss_sq(&net, data)?;
        if !loss.is_finite() || loss > DIVERGENCE_LOSS {
            return Err(Error::Divergence { step: s + 1, loss });
        }
        trace.push(loss);
    }
    Ok(TrainResult { net, trace })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualNormReport {
    pub norm: NormKind,
    pub value_w: f64,
    pub value_alpha: f64,
    pub bound: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Compares the blockwise constraint norm of `net` with `1/λ·(1 + slack)`.
pub fn dual_norm_check(net: &TwoLayerNet, cfg: &OptimizerConfig, slack: f64) -> Result<DualNormReport> {
    if !(cfg.lambda > 0.0) {
        return Err(Error::InvalidParameter("dual_norm_check needs lambda > 0".into()));
    }
    let norm = cfg.kind.induced_norm();
    let value_w = matrix_norm(&net.w, norm)?;
    let value_alpha = vector_norm(&net.alpha, norm);
    let bound = 1.0 / cfg.lambda;
    Ok(DualNormReport {
        norm,
        value_w,
        value_alpha,
        bound,
        slack,
        pass: value_w.max(value_alpha) <= bound * (1.0 + slack),
    })
}

/// Zero-loss and `K_d(λθ) ≤ 1` blockwise: `−λθ` is then a subgradient of `K`
/// at 0, so `θ` is a fixed point of the Lion-K dynamics with zero gradient.
pub fn lion_stationary_check(net: &TwoLayerNet, data: &Dataset, cfg: &OptimizerConfig, tol: f64) -> Result<bool> {
    let norm = cfg.kind.induced_norm();
    let loss = loss_sq(net, data)?;
    let kw = matrix_norm(&net.w.scaled(cfg.lambda), norm)?;
    let ka = vector_norm(&net.alpha.iter().map(|a| a * cfg.lambda).collect::<Vec<_>>(), norm);
    Ok(loss <= tol && kw <= 1.0 + tol && ka <= 1.0 + tol)
}
