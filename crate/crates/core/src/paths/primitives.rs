//! Zero-loss path primitives: neuron swaps, merges, shrinks and the
//! max-norm equalization.

use std::collections::BTreeMap;

use crate::arrangement::{pattern_of, patterns::pattern_string};
use crate::error::{Error, Result};
use crate::numerics::NormKind;
use crate::relu_net::{in_reg_set, Dataset, RegSetSpec, TwoLayerNet, MEMBERSHIP_TOL};

use super::{PathBuilder, PiecewisePath, Segment, SegmentKind};

fn check_index(net: &TwoLayerNet, idx: &[usize]) -> Result<()> {
    match idx.iter().find(|&&i| i >= net.width()) {
        Some(i) => Err(Error::InvalidParameter(format!("neuron {i} out of range for width {}", net.width()))),
        None => Ok(()),
    }
}

/// Exchanges neurons `i` and `j` when exactly one of them is zero.
pub fn swap_path(net: &TwoLayerNet, i: usize, j: usize) -> Result<PiecewisePath> {
    check_index(net, &[i, j])?;
    let (zi, zj) = (net.is_zero_neuron(i), net.is_zero_neuron(j));
    if i == j || (zi && zj) {
        return Ok(PiecewisePath::constant(net));
    }
    if !zi && !zj {
        return Err(Error::Precondition(format!(
            "neurons {i} and {j} are both nonzero; route the swap through a zero slot"
        )));
    }
    let (from, to) = if zj { (i, j) } else { (j, i) };
    PiecewisePath::new(vec![Segment::new(SegmentKind::SqrtSwap {
        base: net.clone(),
        from,
        to,
    })])
}

/// Lowest-index zero neuron other than the excluded ones.
pub fn zero_slot(net: &TwoLayerNet, exclude: &[usize]) -> Option<usize> {
    (0..net.width()).find(|k| !exclude.contains(k) && net.is_zero_neuron(*k))
}

/// Swap of two arbitrary neurons: direct when one is zero, otherwise
/// `(i, z)`, `(i, j)`, `(z, j)` through the lowest zero slot `z`.
pub fn three_swap_path(net: &TwoLayerNet, i: usize, j: usize) -> Result<PiecewisePath> {
    check_index(net, &[i, j])?;
    if i == j || net.is_zero_neuron(i) || net.is_zero_neuron(j) {
        return swap_path(net, i, j);
    }
    let Some(z) = zero_slot(net, &[i, j]) else {
        return Err(Error::WidthTooSmall {
            width: net.width(),
            required: net.width() + 1,
            reason: "swapping two nonzero neurons needs a zero slot".into(),
        });
    };
    let mut b = PathBuilder::new(net);
    for (p, q) in [(i, z), (i, j), (z, j)] {
        let seg = swap_path(b.current(), p, q)?;
        b.append(&seg)?;
    }
    b.finish()
}

/// Path from `net` to `net.permuted(perm)` made of swaps.
pub fn permute_path(net: &TwoLayerNet, perm: &[usize]) -> Result<PiecewisePath> {
    let m = net.width();
    let mut seen = vec![false; m];
    if perm.len() != m || perm.iter().any(|&p| p >= m || std::mem::replace(&mut seen[p], true)) {
        return Err(Error::InvalidParameter("not a permutation of the neurons".into()));
    }
    // slot[k] = original neuron currently held in slot k; loc is its inverse
    let mut slot: Vec<usize> = (0..m).collect();
    let mut loc: Vec<usize> = (0..m).collect();
    let mut b = PathBuilder::new(net);
    for k in 0..m {
        let src = loc[perm[k]];
        if src == k {
            continue;
        }
        if !(b.current().is_zero_neuron(k) && b.current().is_zero_neuron(src)) {
            let seg = three_swap_path(b.current(), k, src)?;
            b.append(&seg)?;
        }
        let (a, c) = (slot[k], slot[src]);
        slot.swap(k, src);
        loc[a] = src;
        loc[c] = k;
    }
    b.finish()
}

/// Whether neurons `i` and `j` satisfy the merge preconditions on `data`.
pub fn mergeable(net: &TwoLayerNet, data: &Dataset, i: usize, j: usize) -> bool {
    i != j
        && net.is_active_neuron(i)
        && net.is_active_neuron(j)
        && (net.alpha[i] >= 0.0) == (net.alpha[j] >= 0.0)
        && pattern_of(&data.x, &net.w.col(i)) == pattern_of(&data.x, &net.w.col(j))
}

/// Folds neuron `i` into neuron `j`; neuron `i` ends at zero.
pub fn merge_path(net: &TwoLayerNet, data: &Dataset, i: usize, j: usize) -> Result<PiecewisePath> {
    check_index(net, &[i, j])?;
    if !mergeable(net, data, i, j) {
        return Err(Error::Precondition(format!(
            "neurons {i} and {j} need nonzero halves, one activation pattern and one output sign"
        )));
    }
    PiecewisePath::new(vec![Segment::new(SegmentKind::Merge {
        base: net.clone(),
        src: i,
        dst: j,
    })])
}

/// Neurons with exactly one zero half.
pub fn half_zero_neurons(net: &TwoLayerNet) -> Vec<usize> {
    (0..net.width())
        .filter(|&i| !net.is_zero_neuron(i) && !net.is_active_neuron(i))
        .collect()
}

pub fn shrink_path(net: &TwoLayerNet, i: usize) -> Result<PiecewisePath> {
    check_index(net, &[i])?;
    if net.is_active_neuron(i) {
        return Err(Error::Precondition(format!("neuron {i} has both halves nonzero")));
    }
    if net.is_zero_neuron(i) {
        return Ok(PiecewisePath::constant(net));
    }
    PiecewisePath::new(vec![Segment::new(SegmentKind::Shrink {
        base: net.clone(),
        neurons: vec![i],
    })])
}

/// One segment zeroing every half-zero neuron, if any.
pub(crate) fn shrink_inactive(b: &mut PathBuilder) -> Result<()> {
    let idle = half_zero_neurons(b.current());
    if idle.is_empty() {
        return Ok(());
    }
    let seg = Segment::new(SegmentKind::Shrink {
        base: b.current().clone(),
        neurons: idle,
    });
    b.push(seg)
}

/// Active neurons keyed by (pattern bitstring, α ≥ 0), in index order.
pub(crate) fn pattern_groups(net: &TwoLayerNet, data: &Dataset) -> BTreeMap<(String, bool), Vec<usize>> {
    let mut groups: BTreeMap<(String, bool), Vec<usize>> = BTreeMap::new();
    for i in 0..net.width() {
        if net.is_active_neuron(i) {
            let key = (pattern_string(&pattern_of(&data.x, &net.w.col(i))), net.alpha[i] >= 0.0);
            groups.entry(key).or_default().push(i);
        }
    }
    groups
}

/// Repeated merges until no two active neurons share (pattern, sign), then
/// the half-zero neurons are shrunk away.
pub fn reduce_nonmergeable(b: &mut PathBuilder, data: &Dataset) -> Result<()> {
    loop {
        let groups = pattern_groups(b.current(), data);
        let Some(g) = groups.values().find(|g| g.len() >= 2) else { break };
        let seg = merge_path(b.current(), data, g[1], g[0])?;
        b.append(&seg)?;
    }
    shrink_inactive(b)
}

pub(crate) fn equalize_into(b: &mut PathBuilder, data: &Dataset, spec: &RegSetSpec) -> Result<()> {
    shrink_inactive(b)?;
    let r = spec.radius();
    let targets: Vec<(usize, f64)> = (0..b.current().width())
        .filter(|&i| b.current().is_active_neuron(i))
        .map(|i| (i, r.copysign(b.current().alpha[i])))
        .filter(|&(i, t)| b.current().alpha[i] != t)
        .collect();
    if !targets.is_empty() {
        let seg = Segment::new(SegmentKind::HomogeneousRescale {
            base: b.current().clone(),
            targets,
        });
        b.push(seg)?;
    }
    let cur = b.current().clone();
    let groups: Vec<Vec<usize>> = pattern_groups(&cur, data)
        .into_values()
        .filter(|g| g.len() >= 2 && g.iter().any(|&i| cur.w.col(i) != cur.w.col(g[0])))
        .collect();
    if !groups.is_empty() {
        b.push(Segment::new(SegmentKind::DeltaAverage { base: cur, groups }))?;
    }
    Ok(())
}

/// Max-norm only: moves `net` to an equalized solution (`α_i ∈ {0, ±1/λ}`,
/// one first-layer column per (pattern, sign)).
pub fn equalize_path(net: &TwoLayerNet, data: &Dataset, spec: &RegSetSpec) -> Result<PiecewisePath> {
    if spec.norm != NormKind::MaxEntry {
        return Err(Error::InvalidParameter(format!(
            "equalization is defined for the max norm, not {}",
            spec.norm.name()
        )));
    }
    if !in_reg_set(net, data, spec, MEMBERSHIP_TOL) {
        return Err(Error::MembershipViolation {
            t: 0.0,
            detail: "start point is not in the regularized set".into(),
        });
    }
    let mut b = PathBuilder::new(net);
    equalize_into(&mut b, data, spec)?;
    b.finish()
}

/// Equalized: inactive neurons removed, `|α_i| = 1/λ` on active neurons, and
/// one column per (pattern, sign) group.
pub fn is_equalized(net: &TwoLayerNet, data: &Dataset, lambda: f64) -> bool {
    if !half_zero_neurons(net).is_empty() {
        return false;
    }
    let r = 1.0 / lambda;
    let ok_alpha = (0..net.width())
        .filter(|&i| net.is_active_neuron(i))
        .all(|i| (net.alpha[i].abs() - r).abs() <= 1e-12 * r);
    ok_alpha
        && pattern_groups(net, data)
            .values()
            .all(|g| g.iter().all(|&i| net.w.col(i) == net.w.col(g[0])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Mat;
    use crate::relu_net::forward;

    fn net(w: &[f64], a: &[f64]) -> TwoLayerNet {
        TwoLayerNet::new(Mat::from_vec(1, w.len(), w.to_vec()).unwrap(), a.to_vec()).unwrap()
    }

    fn max_forward_drift(p: &PiecewisePath, data: &Dataset) -> f64 {
        let f0 = forward(&p.start(), data).unwrap();
        (0..=100)
            .map(|k| {
                let f = forward(&p.eval(k as f64 / 100.0), data).unwrap();
                f.iter().zip(&f0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn swap_with_zero_slot() {
        let n = net(&[1.0, -1.0, 0.0], &[1.0, 1.0, 0.0]);
        let p = swap_path(&n, 0, 2).unwrap();
        assert_eq!(p.end(), n.swapped(0, 2));
        assert!(max_forward_drift(&p, &Dataset::toy()) < 1e-15);
        assert_eq!(swap_path(&n, 1, 1).unwrap().len(), 1);
        assert!(matches!(swap_path(&n, 0, 1), Err(Error::Precondition(_))));
    }

    #[test]
    fn three_swap_exchanges_nonzero_neurons() {
        let n = net(&[1.0, -1.0, 0.0], &[1.0, 1.0, 0.0]);
        let p = three_swap_path(&n, 0, 1).unwrap();
        assert_eq!(p.len(), 3);
        assert!(p.end().max_abs_diff(&n.swapped(0, 1)).unwrap() < 1e-15);
        assert!(max_forward_drift(&p, &Dataset::toy()) < 1e-15);
        let full = net(&[1.0, -1.0], &[1.0, 1.0]);
        assert!(matches!(three_swap_path(&full, 0, 1), Err(Error::WidthTooSmall { .. })));
    }

    #[test]
    fn permute_reaches_target() {
        let n = net(&[1.0, -1.0, 0.5, 0.0, -0.2], &[1.0, 0.5, 2.0, 0.0, 1.0]);
        let perm = [2, 4, 3, 0, 1];
        let p = permute_path(&n, &perm).unwrap();
        assert!(p.end().max_abs_diff(&n.permuted(&perm)).unwrap() < 1e-15);
        assert!(permute_path(&n, &[0, 0, 1, 2, 3]).is_err());
    }

    #[test]
    fn merge_hand_example() {
        let n = net(&[1.0, 1.0], &[1.0, 1.0]);
        let data = Dataset::toy();
        let p = merge_path(&n, &data, 0, 1).unwrap();
        let end = p.end();
        assert!(end.is_zero_neuron(0));
        assert!((end.w[(0, 1)] - 2f64.sqrt()).abs() < 1e-15);
        assert!((end.alpha[1] - 2f64.sqrt()).abs() < 1e-15);
        assert!(max_forward_drift(&p, &data) < 1e-15);
        let opposite = net(&[1.0, 1.0], &[1.0, -1.0]);
        assert!(merge_path(&opposite, &data, 0, 1).is_err());
        let other_pattern = net(&[1.0, -1.0], &[1.0, 1.0]);
        assert!(merge_path(&other_pattern, &data, 0, 1).is_err());
    }

    #[test]
    fn shrink_cases() {
        let n = net(&[2.0, 0.0, 0.0], &[0.0, 1.5, 0.0]);
        let p = shrink_path(&n, 0).unwrap();
        assert!(p.end().is_zero_neuron(0));
        assert!(shrink_path(&n, 1).unwrap().end().is_zero_neuron(1));
        assert_eq!(shrink_path(&n, 2).unwrap().end(), n);
        assert!(shrink_path(&net(&[1.0], &[1.0]), 0).is_err());
    }

    #[test]
    fn equalize_examples() {
        let data = Dataset::toy();
        let spec = RegSetSpec::new(NormKind::MaxEntry, 1.0, 2).unwrap();
        let n = net(&[1.0, -0.5], &[1.0, 2.0]);
        assert!(equalize_path(&n, &data, &spec).is_err());
        let n = net(&[0.8, -1.0], &[1.0 / 0.8, 1.0]);
        assert!(equalize_path(&n, &data, &spec).is_err());
        // α below the radius is raised to it with W_i α_i held fixed
        let n = net(&[1.0, -2.0 / 3.0], &[1.0, 1.5]);
        let spec = RegSetSpec::new(NormKind::MaxEntry, 2.0 / 3.0, 2).unwrap();
        let p = equalize_path(&n, &data, &spec).unwrap();
        assert!(is_equalized(&p.end(), &data, 2.0 / 3.0));
        assert!((p.end().w[(0, 0)] - 2.0 / 3.0).abs() < 1e-15);
        let already = equalize_path(&p.end(), &data, &spec).unwrap();
        assert_eq!(already.kinds(), vec!["linear"]);
        assert_eq!(already.start(), already.end());
        let f = RegSetSpec::new(NormKind::Frobenius, 0.5, 2).unwrap();
        assert!(equalize_path(&n, &data, &f).is_err());
    }

    #[test]
    fn equalize_averages_shared_patterns() {
        let data = Dataset::toy();
        let spec = RegSetSpec::new(NormKind::MaxEntry, 1.0, 3).unwrap();
        let n = net(&[0.5, 0.3, -1.0], &[1.0, 1.0, 1.0]);
        let data = Dataset::new(data.x.clone(), vec![0.8, 1.0]).unwrap();
        let p = equalize_path(&n, &data, &spec).unwrap();
        let e = p.end();
        assert!((e.w[(0, 0)] - 0.4).abs() < 1e-15 && (e.w[(0, 1)] - 0.4).abs() < 1e-15);
        assert!(max_forward_drift(&p, &data) < 1e-15);
    }
}
