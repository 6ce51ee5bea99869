//! End-to-end zero-loss paths between two points of one regularized set.
//!
//! Each endpoint is first reduced to a sparse normal form (non-mergeable for
//! Frobenius / operator constraints, equalized with a minimal support for the
//! max norm), its live neurons are packed into disjoint slot ranges, and the
//! packed points are joined by a square-root interpolation.

use crate::arrangement::{
    critical_width, enum_patterns, minimal_supports, select_support, support_of, MinimalSupports, PatternSet,
};
use crate::arrangement::supports::DEFAULT_CAP;
use crate::error::{Error, Result};
use crate::numerics::NormKind;
use crate::relu_net::{in_reg_set, Dataset, RegSetSpec, TwoLayerNet, MEMBERSHIP_TOL};

use super::primitives::{equalize_into, pattern_groups, reduce_nonmergeable, shrink_inactive, swap_path};
use super::{eval_path, PathBuilder, PiecewisePath, Segment, SegmentKind, DEFAULT_SAMPLES};
use crate::arrangement::pattern_of;

/// Data-dependent quantities shared by every connection on one `(X, y, λ)`.
#[derive(Debug, Clone)]
pub struct IntraContext {
    pub patterns: PatternSet,
    /// Minimal supports; only computed for the max norm.
    pub z_a: Option<MinimalSupports>,
    /// Width above which connectivity is guaranteed (`4P` or `m*`).
    pub required_width: usize,
    pub samples: usize,
}

impl IntraContext {
    pub fn new(data: &Dataset, spec: &RegSetSpec) -> Result<Self> {
        let patterns = enum_patterns(data)?;
        let (z_a, required_width) = match spec.norm {
            NormKind::MaxEntry => {
                let z = minimal_supports(&patterns, data, spec.lambda, DEFAULT_CAP)?;
                if z.supports.is_empty() {
                    return Err(Error::Precondition(format!(
                        "no interpolator exists at lambda = {}",
                        spec.lambda
                    )));
                }
                let w = critical_width(&z.supports)?;
                (Some(z), w)
            }
            _ => (None, 4 * patterns.count()),
        };
        Ok(Self {
            patterns,
            z_a,
            required_width,
            samples: DEFAULT_SAMPLES,
        })
    }
}

fn check_member(net: &TwoLayerNet, data: &Dataset, spec: &RegSetSpec, t: f64) -> Result<()> {
    if in_reg_set(net, data, spec, MEMBERSHIP_TOL) {
        return Ok(());
    }
    let (rw, ra) = net.reg_values(spec.norm)?;
    Err(Error::MembershipViolation {
        t,
        detail: format!(
            "endpoint outside the set: R_W = {rw}, R_alpha = {ra}, radius {}",
            spec.radius()
        ),
    })
}

/// Max-norm reduction to `S`: equalize, then move each (pattern, sign) group
/// onto the selected minimal support and drop the surplus copies.
fn reduce_equalized(b: &mut PathBuilder, data: &Dataset, spec: &RegSetSpec, ctx: &IntraContext) -> Result<()> {
    equalize_into(b, data, spec)?;
    let z_a = ctx.z_a.as_ref().expect("max-norm context");
    let current = support_of(b.current(), &ctx.patterns, data)?;
    let Some((idx, target)) = select_support(&z_a.supports, &current) else {
        return Err(Error::NumericFailure(format!(
            "no minimal support below the current one ({}truncated search)",
            if z_a.truncated { "" } else { "non-" }
        )));
    };
    let witness = &z_a.witnesses[idx];
    let lam = spec.lambda;
    let cur = b.current().clone();
    let mut next = cur.clone();
    for ((_, positive), members) in pattern_groups(&cur, data) {
        let pat = pattern_of(&data.x, &cur.w.col(members[0]));
        let p = ctx
            .patterns
            .index_of(&pat)
            .ok_or_else(|| Error::NumericFailure("neuron pattern missing from the enumeration".into()))?;
        let (keep, vec) = if positive {
            (target.t[p] as usize, &witness.u[p])
        } else {
            (target.s[p] as usize, &witness.v[p])
        };
        for (rank, &i) in members.iter().enumerate() {
            let col: Vec<f64> = if rank < keep {
                vec.iter().map(|x| x * lam / keep as f64).collect()
            } else {
                vec![0.0; cur.dim()]
            };
            next.w.set_col(i, &col)?;
        }
    }
    if next != cur {
        b.push(Segment::new(SegmentKind::Linear { from: cur, to: next }))?;
    }
    shrink_inactive(b)
}

/// Moves the live neurons into `slots` with single zero/nonzero swaps.
fn pack(b: &mut PathBuilder, slots: std::ops::Range<usize>) -> Result<()> {
    let m = b.current().width();
    for i in (0..m).filter(|i| !slots.contains(i)) {
        if b.current().is_zero_neuron(i) {
            continue;
        }
        let Some(z) = slots.clone().find(|&k| b.current().is_zero_neuron(k)) else {
            return Err(Error::WidthTooSmall {
                width: m,
                required: m + 1,
                reason: "no free slot while packing neurons".into(),
            });
        };
        let seg = swap_path(b.current(), i, z)?;
        b.append(&seg)?;
    }
    Ok(())
}

fn live(net: &TwoLayerNet) -> usize {
    (0..net.width()).filter(|&i| !net.is_zero_neuron(i)).count()
}

fn reduce(net: &TwoLayerNet, data: &Dataset, spec: &RegSetSpec, ctx: &IntraContext) -> Result<PathBuilder> {
    let mut b = PathBuilder::new(net);
    match spec.norm {
        NormKind::MaxEntry => reduce_equalized(&mut b, data, spec, ctx)?,
        _ => reduce_nonmergeable(&mut b, data)?,
    }
    Ok(b)
}

/// Zero-loss path from `a` to `b` inside `O_R(λ)`, checked at `ctx.samples` points.
pub fn connect_intra_with(
    a: &TwoLayerNet,
    b: &TwoLayerNet,
    data: &Dataset,
    spec: &RegSetSpec,
    ctx: &IntraContext,
) -> Result<PiecewisePath> {
    a.check_same_shape(b)?;
    let m = a.width();
    if m < ctx.required_width {
        return Err(Error::WidthTooSmall {
            width: m,
            required: ctx.required_width,
            reason: match spec.norm {
                NormKind::MaxEntry => "below the critical width m*".into(),
                _ => "below 4P".into(),
            },
        });
    }
    check_member(a, data, spec, 0.0)?;
    check_member(b, data, spec, 1.0)?;
    let mut pa = reduce(a, data, spec, ctx)?;
    let mut pb = reduce(b, data, spec, ctx)?;
    let (ka, kb) = (live(pa.current()), live(pb.current()));
    if ka + kb > m {
        return Err(Error::WidthTooSmall {
            width: m,
            required: ka + kb,
            reason: "reduced endpoints do not fit in disjoint slots".into(),
        });
    }
    pack(&mut pa, 0..ka)?;
    pack(&mut pb, ka..ka + kb)?;
    let mid = Segment::new(SegmentKind::DisjointInterp {
        from: pa.current().clone(),
        to: pb.current().clone(),
    });
    let tail = pb.finish()?.reversed();
    pa.push(mid)?;
    pa.append(&tail)?;
    let path = pa.finish()?;
    let prof = eval_path(&path, data, spec, ctx.samples)?;
    if let Some(t) = prof.first_violation {
        let s = prof.samples.iter().find(|s| s.t == t).expect("sampled");
        return Err(Error::MembershipViolation {
            t,
            detail: format!("loss {:e}, R_W {}, R_alpha {}", s.loss, s.r_w, s.r_alpha),
        });
    }
    Ok(path)
}

pub fn connect_intra(a: &TwoLayerNet, b: &TwoLayerNet, data: &Dataset, spec: &RegSetSpec) -> Result<PiecewisePath> {
    let ctx = IntraContext::new(data, spec)?;
    connect_intra_with(a, b, data, spec, &ctx)
}
