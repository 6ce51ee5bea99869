//! Neuron alignment and bend-point (polychain) fitting between trained nets.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, solve_assignment, Mat};
use crate::relu_net::{grad, hidden, loss_sq, Dataset, TwoLayerNet};
use crate::rng;

use super::{PiecewisePath, Segment, SegmentKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignMode {
    Weights,
    Activations,
}

impl AlignMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "weights" => Ok(AlignMode::Weights),
            "activations" => Ok(AlignMode::Activations),
            _ => Err(Error::Parse(format!("unknown alignment mode '{s}'"))),
        }
    }
}

/// Permutes the neurons of `b` to best match `a`. Returns the permuted net and
/// `perm` with `result.neuron(i) = b.neuron(perm[i])`.
pub fn align_permutation(
    a: &TwoLayerNet,
    b: &TwoLayerNet,
    mode: AlignMode,
    data: Option<&Dataset>,
) -> Result<(TwoLayerNet, Vec<usize>)> {
    a.check_same_shape(b)?;
    let m = a.width();
    let feats = |n: &TwoLayerNet| -> Result<Vec<Vec<f64>>> {
        match mode {
            AlignMode::Weights => Ok((0..m)
                .map(|i| {
                    let (mut w, al) = n.neuron(i);
                    w.push(al);
                    w
                })
                .collect()),
            AlignMode::Activations => {
                let data = data.ok_or_else(|| {
                    Error::InvalidParameter("activation alignment needs a dataset".into())
                })?;
                let h = hidden(n, data)?;
                Ok((0..m).map(|i| h.col(i)).collect())
            }
        }
    };
    let (fa, fb) = (feats(a)?, feats(b)?);
    let cost = Mat::from_fn(m, m, |i, j| -dot(&fa[i], &fb[j]));
    let perm = solve_assignment(&cost)?;
    Ok((b.permuted(&perm), perm))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolychainConfig {
    pub eta: f64,
    pub iters: usize,
    pub t_lo: f64,
    pub t_hi: f64,
    pub seed: u64,
}

impl Default for PolychainConfig {
    fn default() -> Self {
        Self {
            eta: 1e-3,
            iters: 2000,
            t_lo: 0.4,
            t_hi: 0.6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolychainFit {
    pub path: PiecewisePath,
    pub bend: TwoLayerNet,
    /// Loss at the sampled `t` before each update.
    pub trace: Vec<f64>,
}

/// `θ(t)` on the two-leg chain `a → c → b`, and `∂θ(t)/∂c`.
pub fn polychain_point(a: &TwoLayerNet, c: &TwoLayerNet, b: &TwoLayerNet, t: f64) -> Result<(TwoLayerNet, f64)> {
    if t <= 0.5 {
        Ok((a.lincomb(1.0 - 2.0 * t, c, 2.0 * t)?, 2.0 * t))
    } else {
        Ok((c.lincomb(2.0 - 2.0 * t, b, 2.0 * t - 1.0)?, 2.0 - 2.0 * t))
    }
}

/// Trains the bend point `c` (started at the midpoint) by gradient descent on
/// the loss at random `t ∈ [t_lo, t_hi]`.
pub fn polychain_fit(a: &TwoLayerNet, b: &TwoLayerNet, data: &Dataset, cfg: &PolychainConfig) -> Result<PolychainFit> {
    a.check_same_shape(b)?;
    if !(0.0..=1.0).contains(&cfg.t_lo) || !(cfg.t_lo <= cfg.t_hi && cfg.t_hi <= 1.0) || !(cfg.eta > 0.0) {
        return Err(Error::InvalidParameter("need eta > 0 and 0 <= t_lo <= t_hi <= 1".into()));
    }
    let mut r = rng::stream(cfg.seed, "polychain");
    let mut c = a.lincomb(0.5, b, 0.5)?;
    let mut trace = Vec::with_capacity(cfg.iters);
    for step in 0..cfg.iters {
        let t = if cfg.t_lo == cfg.t_hi { cfg.t_lo } else { r.random_range(cfg.t_lo..cfg.t_hi) };
        let (theta, factor) = polychain_point(a, &c, b, t)?;
        let loss = loss_sq(&theta, data)?;
        if !loss.is_finite() || loss > 1e12 {
            return Err(Error::Divergence { step, loss });
        }
        trace.push(loss);
        let (gw, ga) = grad(&theta, data)?;
        let g = TwoLayerNet { w: gw, alpha: ga };
        c = c.lincomb(1.0, &g, -cfg.eta * factor)?;
    }
    if !c.is_finite() {
        return Err(Error::Divergence {
            step: cfg.iters,
            loss: f64::NAN,
        });
    }
    let path = PiecewisePath::new(vec![
        Segment::new(SegmentKind::PolychainLeg {
            from: a.clone(),
            to: c.clone(),
        }),
        Segment::new(SegmentKind::PolychainLeg {
            from: c.clone(),
            to: b.clone(),
        }),
    ])?;
    Ok(PolychainFit { path, bend: c, trace })
}
