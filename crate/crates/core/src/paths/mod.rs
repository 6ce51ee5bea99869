//! Continuous paths in weight space, built from closed-form segments, and
//! their loss / norm / spectrum profiles.

pub mod empirical;
pub mod intra;
pub mod primitives;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relu_net::{in_reg_set, loss_sq, stable_rank, Dataset, RegSetSpec, TwoLayerNet, MEMBERSHIP_TOL};

pub use empirical::{align_permutation, polychain_fit, AlignMode, PolychainConfig, PolychainFit};
pub use intra::{connect_intra, connect_intra_with, IntraContext};
pub use primitives::{
    equalize_path, merge_path, permute_path, shrink_path, swap_path, three_swap_path,
};

/// Default number of uniform samples for path evaluation.
pub const DEFAULT_SAMPLES: usize = 1001;
/// Successive segments must agree within this (relative) distance.
pub const CHAIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum SegmentKind {
    /// `(1−u)·from + u·to`.
    Linear { from: TwoLayerNet, to: TwoLayerNet },
    /// Moves nonzero neuron `from` into zero slot `to` with `√(1−u)` / `√u` weights.
    SqrtSwap { base: TwoLayerNet, from: usize, to: usize },
    /// Folds neuron `src` into `dst` (same pattern and output sign).
    Merge { base: TwoLayerNet, src: usize, dst: usize },
    /// Linearly zeroes whichever half of each listed neuron is nonzero.
    Shrink { base: TwoLayerNet, neurons: Vec<usize> },
    /// `α_i → target_i` linearly with `W_i α_i` held fixed.
    HomogeneousRescale { base: TwoLayerNet, targets: Vec<(usize, f64)> },
    /// Each group's columns move to their mean: `W_g((1−u)I + uJ/k)`.
    DeltaAverage { base: TwoLayerNet, groups: Vec<Vec<usize>> },
    /// `√(1−u)·from + √u·to` for endpoints with disjoint neuron supports.
    DisjointInterp { from: TwoLayerNet, to: TwoLayerNet },
    PolychainLeg { from: TwoLayerNet, to: TwoLayerNet },
}

impl SegmentKind {
    pub fn name(&self) -> &'static str {
        match self {
            SegmentKind::Linear { .. } => "linear",
            SegmentKind::SqrtSwap { .. } => "sqrt_swap",
            SegmentKind::Merge { .. } => "merge",
            SegmentKind::Shrink { .. } => "shrink",
            SegmentKind::HomogeneousRescale { .. } => "homogeneous_rescale",
            SegmentKind::DeltaAverage { .. } => "delta_average",
            SegmentKind::DisjointInterp { .. } => "disjoint_interp",
            SegmentKind::PolychainLeg { .. } => "polychain_leg",
        }
    }

    fn at(&self, u: f64) -> TwoLayerNet {
        match self {
            SegmentKind::Linear { from, to } | SegmentKind::PolychainLeg { from, to } => {
                from.lincomb(1.0 - u, to, u).expect("shapes checked at construction")
            }
            SegmentKind::DisjointInterp { from, to } => from
                .lincomb((1.0 - u).sqrt(), to, u.sqrt())
                .expect("shapes checked at construction"),
            SegmentKind::SqrtSwap { base, from, to } => {
                let mut net = base.clone();
                let (w, a) = base.neuron(*from);
                let (c0, c1) = ((1.0 - u).sqrt(), u.sqrt());
                net.set_neuron(*from, &scale(&w, c0), c0 * a);
                net.set_neuron(*to, &scale(&w, c1), c1 * a);
                net
            }
            SegmentKind::Merge { base, src, dst } => {
                let mut net = base.clone();
                let (wi, ai) = base.neuron(*src);
                let (wj, aj) = base.neuron(*dst);
                let c = (1.0 - u).sqrt();
                net.set_neuron(*src, &scale(&wi, c), c * ai);
                let norm = (aj * aj + u * ai * ai).sqrt();
                let w: Vec<f64> = wi
                    .iter()
                    .zip(&wj)
                    .map(|(x, y)| (u * x * ai.abs() + y * aj.abs()) / norm)
                    .collect();
                net.set_neuron(*dst, &w, norm * ai.signum());
                net
            }
            SegmentKind::Shrink { base, neurons } => {
                let mut net = base.clone();
                for &i in neurons {
                    if base.alpha[i] == 0.0 {
                        net.w.scale_col(i, 1.0 - u);
                    } else {
                        net.alpha[i] *= 1.0 - u;
                    }
                }
                net
            }
            SegmentKind::HomogeneousRescale { base, targets } => {
                let mut net = base.clone();
                for &(i, target) in targets {
                    let a0 = base.alpha[i];
                    let a = a0 + (target - a0) * u;
                    net.w.scale_col(i, a0 / a);
                    net.alpha[i] = a;
                }
                net
            }
            SegmentKind::DeltaAverage { base, groups } => {
                let mut net = base.clone();
                for g in groups {
                    let k = g.len() as f64;
                    let mut mean = vec![0.0; base.dim()];
                    for &i in g {
                        for (m, v) in mean.iter_mut().zip(base.w.col(i)) {
                            *m += v / k;
                        }
                    }
                    for &i in g {
                        let col: Vec<f64> = base
                            .w
                            .col(i)
                            .iter()
                            .zip(&mean)
                            .map(|(v, m)| (1.0 - u) * v + u * m)
                            .collect();
                        net.w.set_col(i, &col).expect("column length");
                    }
                }
                net
            }
        }
    }
}

fn scale(v: &[f64], c: f64) -> Vec<f64> {
    v.iter().map(|x| x * c).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    /// Traversed from `u = 1` to `u = 0`.
    #[serde(default)]
    pub reversed: bool,
}

impl Segment {
    pub fn new(kind: SegmentKind) -> Self {
        Self { kind, reversed: false }
    }

    pub fn at(&self, u: f64) -> TwoLayerNet {
        let u = u.clamp(0.0, 1.0);
        self.kind.at(if self.reversed { 1.0 - u } else { u })
    }

    pub fn start(&self) -> TwoLayerNet {
        self.at(0.0)
    }

    pub fn end(&self) -> TwoLayerNet {
        self.at(1.0)
    }

    pub fn reversed(&self) -> Segment {
        Segment {
            kind: self.kind.clone(),
            reversed: !self.reversed,
        }
    }
}

fn close(a: &TwoLayerNet, b: &TwoLayerNet) -> Result<bool> {
    let scale = 1.0 + a.w.max_abs().max(a.alpha.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    Ok(a.max_abs_diff(b)? <= CHAIN_TOL * scale)
}

/// Segments share the global parameter uniformly: segment `k` of `K` covers
/// `[k/K, (k+1)/K]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewisePath {
    segments: Vec<Segment>,
}

impl PiecewisePath {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let Some(first) = segments.first() else {
            return Err(Error::InvalidParameter("a path needs at least one segment".into()));
        };
        let shape = first.start().w.shape();
        for k in 1..segments.len() {
            let (prev, next) = (segments[k - 1].end(), segments[k].start());
            if next.w.shape() != shape {
                return Err(Error::DimensionMismatch(format!("segment {k} changes the network shape")));
            }
            if !close(&prev, &next)? {
                return Err(Error::NumericFailure(format!(
                    "segments {} and {k} do not meet (gap {:e})",
                    k - 1,
                    prev.max_abs_diff(&next)?
                )));
            }
        }
        Ok(Self { segments })
    }

    pub fn constant(net: &TwoLayerNet) -> Self {
        Self {
            segments: vec![Segment::new(SegmentKind::Linear {
                from: net.clone(),
                to: net.clone(),
            })],
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn kinds(&self) -> Vec<&'static str> {
        self.segments.iter().map(|s| s.kind.name()).collect()
    }

    pub fn eval(&self, t: f64) -> TwoLayerNet {
        let k = self.segments.len();
        let s = t.clamp(0.0, 1.0) * k as f64;
        let idx = (s.floor() as usize).min(k - 1);
        self.segments[idx].at(s - idx as f64)
    }

    pub fn start(&self) -> TwoLayerNet {
        self.segments[0].start()
    }

    pub fn end(&self) -> TwoLayerNet {
        self.segments[self.segments.len() - 1].end()
    }

    pub fn reversed(&self) -> PiecewisePath {
        Self {
            segments: self.segments.iter().rev().map(Segment::reversed).collect(),
        }
    }

    pub fn then(&self, other: &PiecewisePath) -> Result<PiecewisePath> {
        let mut segs = self.segments.clone();
        segs.extend(other.segments.iter().cloned());
        PiecewisePath::new(segs)
    }
}

/// Accumulates segments from a running endpoint.
#[derive(Debug, Clone)]
pub struct PathBuilder {
    current: TwoLayerNet,
    segments: Vec<Segment>,
}

impl PathBuilder {
    pub fn new(start: &TwoLayerNet) -> Self {
        Self {
            current: start.clone(),
            segments: Vec::new(),
        }
    }

    pub fn current(&self) -> &TwoLayerNet {
        &self.current
    }

    pub fn push(&mut self, seg: Segment) -> Result<()> {
        if !close(&self.current, &seg.start())? {
            return Err(Error::NumericFailure(format!(
                "{} segment does not start at the current point",
                seg.kind.name()
            )));
        }
        self.current = seg.end();
        self.segments.push(seg);
        Ok(())
    }

    pub fn append(&mut self, path: &PiecewisePath) -> Result<()> {
        for s in path.segments() {
            self.push(s.clone())?;
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn finish(self) -> Result<PiecewisePath> {
        if self.segments.is_empty() {
            return Ok(PiecewisePath::constant(&self.current));
        }
        PiecewisePath::new(self.segments)
    }
}

pub fn linear_path(a: &TwoLayerNet, b: &TwoLayerNet) -> Result<PiecewisePath> {
    a.check_same_shape(b)?;
    PiecewisePath::new(vec![Segment::new(SegmentKind::Linear {
        from: a.clone(),
        to: b.clone(),
    })])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileSample {
    pub t: f64,
    pub loss: f64,
    pub r_w: f64,
    pub r_alpha: f64,
    /// 0 for a zero first layer.
    pub stable_rank: f64,
    pub in_set: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathProfile {
    pub samples: Vec<ProfileSample>,
    /// `max_t [L(t) − ((1−t)L(0) + t L(1))]`.
    pub barrier: f64,
    pub max_loss: f64,
    pub max_r_w: f64,
    pub max_r_alpha: f64,
    /// First sampled `t` outside the regularized set.
    pub first_violation: Option<f64>,
}

pub const PROFILE_HEADER: [&str; 5] = ["t", "loss", "R_W", "R_alpha", "stable_rank"];

impl PathProfile {
    pub fn rows(&self) -> Vec<[f64; 5]> {
        self.samples
            .iter()
            .map(|s| [s.t, s.loss, s.r_w, s.r_alpha, s.stable_rank])
            .collect()
    }
}

pub fn eval_path(path: &PiecewisePath, data: &Dataset, spec: &RegSetSpec, n_samples: usize) -> Result<PathProfile> {
    eval_path_tol(path, data, spec, n_samples, MEMBERSHIP_TOL)
}

pub fn eval_path_tol(
    path: &PiecewisePath,
    data: &Dataset,
    spec: &RegSetSpec,
    n_samples: usize,
    tol: f64,
) -> Result<PathProfile> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples, got {n_samples}")));
    }
    let samples: Vec<ProfileSample> = (0..n_samples)
        .into_par_iter()
        .map(|k| {
            let t = k as f64 / (n_samples - 1) as f64;
            let net = path.eval(t);
            let loss = loss_sq(&net, data)?;
            let (r_w, r_alpha) = net.reg_values(spec.norm)?;
            let sr = if net.w.max_abs() == 0.0 { 0.0 } else { stable_rank(&net.w)? };
            Ok(ProfileSample {
                t,
                loss,
                r_w,
                r_alpha,
                stable_rank: sr,
                in_set: in_reg_set(&net, data, spec, tol),
            })
        })
        .collect::<Result<_>>()?;
    let (l0, l1) = (samples[0].loss, samples[n_samples - 1].loss);
    let barrier = samples
        .iter()
        .map(|s| s.loss - ((1.0 - s.t) * l0 + s.t * l1))
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let fold = |f: fn(&ProfileSample) -> f64| samples.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    Ok(PathProfile {
        barrier,
        max_loss: fold(|s| s.loss),
        max_r_w: fold(|s| s.r_w),
        max_r_alpha: fold(|s| s.r_alpha),
        first_violation: samples.iter().find(|s| !s.in_set).map(|s| s.t),
        samples,
    })
}
