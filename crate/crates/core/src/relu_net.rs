//! Two-layer ReLU networks `f(x) = (xW)_+ α` without biases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{matrix_norm, svd, vector_norm, Mat, NormKind};
use crate::rng;

/// Default absolute tolerance for solution-set membership.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoLayerNet {
    /// `d x m`; column `i` holds the first-layer weights of neuron `i`.
    pub w: Mat,
    pub alpha: Vec<f64>,
}

impl TwoLayerNet {
    pub fn new(w: Mat, alpha: Vec<f64>) -> Result<Self> {
        if w.cols() != alpha.len() {
            return Err(Error::DimensionMismatch(format!(
                "W has {} columns but alpha has {} entries",
                w.cols(),
                alpha.len()
            )));
        }
        if !w.is_finite() || alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::NumericFailure("network has non-finite weights".into()));
        }
        Ok(Self { w, alpha })
    }

    pub fn zeros(d: usize, m: usize) -> Self {
        Self {
            w: Mat::zeros(d, m),
            alpha: vec![0.0; m],
        }
    }

    pub fn dim(&self) -> usize {
        self.w.rows()
    }

    pub fn width(&self) -> usize {
        self.alpha.len()
    }

    pub fn neuron(&self, i: usize) -> (Vec<f64>, f64) {
        (self.w.col(i), self.alpha[i])
    }

    pub fn set_neuron(&mut self, i: usize, w: &[f64], a: f64) {
        for (r, v) in w.iter().enumerate() {
            self.w[(r, i)] = *v;
        }
        self.alpha[i] = a;
    }

    /// Both halves of neuron `i` are exactly zero.
    pub fn is_zero_neuron(&self, i: usize) -> bool {
        self.alpha[i] == 0.0 && self.w.col_is_zero(i)
    }

    /// Contributes to the output: `W_i α_i ≠ 0`.
    pub fn is_active_neuron(&self, i: usize) -> bool {
        self.alpha[i] != 0.0 && !self.w.col_is_zero(i)
    }

    pub fn check_same_shape(&self, other: &TwoLayerNet) -> Result<()> {
        if self.w.shape() != other.w.shape() {
            return Err(Error::DimensionMismatch(format!(
                "nets of shape {:?} and {:?}",
                self.w.shape(),
                other.w.shape()
            )));
        }
        Ok(())
    }

    /// `a·self + b·other` in parameter space.
    pub fn lincomb(&self, a: f64, other: &TwoLayerNet, b: f64) -> Result<TwoLayerNet> {
        self.check_same_shape(other)?;
        Ok(TwoLayerNet {
            w: self.w.lincomb(a, &other.w, b)?,
            alpha: self
                .alpha
                .iter()
                .zip(&other.alpha)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        })
    }

    /// Neuron `i` of the result is neuron `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> TwoLayerNet {
        TwoLayerNet {
            w: self.w.select_cols(perm),
            alpha: perm.iter().map(|&j| self.alpha[j]).collect(),
        }
    }

    pub fn swapped(&self, i: usize, j: usize) -> TwoLayerNet {
        let mut perm: Vec<usize> = (0..self.width()).collect();
        perm.swap(i, j);
        self.permuted(&perm)
    }

    /// Largest entrywise difference over both blocks.
    pub fn max_abs_diff(&self, other: &TwoLayerNet) -> Result<f64> {
        let dw = self.w.max_abs_diff(&other.w)?;
        let da = self
            .alpha
            .iter()
            .zip(&other.alpha)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        Ok(dw.max(da))
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.alpha.iter().all(|a| a.is_finite())
    }

    /// `(R(W), R_vec(α))` for the constraint norm `kind`.
    pub fn reg_values(&self, kind: NormKind) -> Result<(f64, f64)> {
        Ok((matrix_norm(&self.w, kind)?, vector_norm(&self.alpha, kind)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    /// `n x d`
    pub x: Mat,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: Mat, y: Vec<f64>) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "X has {} rows but y has {} entries",
                x.rows(),
                y.len()
            )));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    /// `X = [[1], [-1]]`, `y = [1, 1]`: the smallest instance with three patterns.
    pub fn toy() -> Self {
        Self {
            x: Mat::from_rows(&[[1.0], [-1.0]]).expect("static shape"),
            y: vec![1.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegSetSpec {
    pub norm: NormKind,
    pub lambda: f64,
    pub width: usize,
}

impl RegSetSpec {
    pub fn new(norm: NormKind, lambda: f64, width: usize) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        if !matches!(norm, NormKind::MaxEntry | NormKind::Frobenius | NormKind::Operator) {
            return Err(Error::InvalidParameter(format!(
                "constraint norm must be max, fro or op, got {}",
                norm.name()
            )));
        }
        Ok(Self { norm, lambda, width })
    }

    pub fn radius(&self) -> f64 {
        1.0 / self.lambda
    }
}

fn check_dims(net: &TwoLayerNet, data: &Dataset) -> Result<()> {
    if data.d() != net.dim() {
        return Err(Error::DimensionMismatch(format!(
            "data has d = {} but the net expects {}",
            data.d(),
            net.dim()
        )));
    }
    Ok(())
}

/// Pre-activations `XW` (`n x m`).
pub fn hidden(net: &TwoLayerNet, data: &Dataset) -> Result<Mat> {
    check_dims(net, data)?;
    data.x.matmul(&net.w)
}

pub fn forward(net: &TwoLayerNet, data: &Dataset) -> Result<Vec<f64>> {
    let h = hidden(net, data)?;
    Ok((0..h.rows())
        .map(|r| {
            h.row(r)
                .iter()
                .zip(&net.alpha)
                .map(|(z, a)| if *z > 0.0 { z * a } else { 0.0 })
                .sum()
        })
        .collect())
}

pub fn residual(net: &TwoLayerNet, data: &Dataset) -> Result<Vec<f64>> {
    Ok(forward(net, data)?
        .iter()
        .zip(&data.y)
        .map(|(f, y)| f - y)
        .collect())
}

/// `½‖f(X) − y‖²`
pub fn loss_sq(net: &TwoLayerNet, data: &Dataset) -> Result<f64> {
    Ok(0.5 * residual(net, data)?.iter().map(|r| r * r).sum::<f64>())
}

/// Gradient of [`loss_sq`] with respect to `(W, α)`; the ReLU derivative is 0 at 0.
pub fn grad(net: &TwoLayerNet, data: &Dataset) -> Result<(Mat, Vec<f64>)> {
    let h = hidden(net, data)?;
    let (n, m) = h.shape();
    let r = residual(net, data)?;
    let mut ga = vec![0.0; m];
    // S[k, i] = r_k α_i 1(h_ki > 0)
    let mut s = Mat::zeros(n, m);
    for k in 0..n {
        for i in 0..m {
            let z = h[(k, i)];
            if z > 0.0 {
                ga[i] += z * r[k];
                s[(k, i)] = r[k] * net.alpha[i];
            }
        }
    }
    let gw = data.x.transpose().matmul(&s)?;
    Ok((gw, ga))
}

pub fn in_solution_set(net: &TwoLayerNet, data: &Dataset, tol: f64) -> bool {
    match residual(net, data) {
        Ok(r) => r.iter().all(|v| v.abs() <= tol),
        Err(_) => false,
    }
}

pub fn in_reg_set(net: &TwoLayerNet, data: &Dataset, spec: &RegSetSpec, tol: f64) -> bool {
    if net.width() != spec.width || !in_solution_set(net, data, tol) {
        return false;
    }
    match net.reg_values(spec.norm) {
        Ok((rw, ra)) => rw.max(ra) <= spec.radius() + tol,
        Err(_) => false,
    }
}

/// `Σσ_i² / σ_max²`
pub fn stable_rank(a: &Mat) -> Result<f64> {
    let s = svd(a)?.sigma;
    let smax = s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Err(Error::Precondition("stable rank of a zero matrix".into()));
    }
    Ok(s.iter().map(|v| (v / smax).powi(2)).sum())
}

/// Realizable regression data: `X` and the teacher's weights are standard
/// normal draws from the `teacher-x` and `teacher-net` substreams, `y = f_teacher(X)`.
pub fn gen_teacher_data(
    seed: u64,
    n: usize,
    d: usize,
    teacher_width: usize,
) -> Result<(Dataset, TwoLayerNet)> {
    if n == 0 || d == 0 || teacher_width == 0 {
        return Err(Error::Precondition(format!(
            "n, d and teacher_width must be at least 1 (got {n}, {d}, {teacher_width})"
        )));
    }
    let mut rx = rng::stream(seed, "teacher-x");
    let x = Mat::from_vec(n, d, rng::normals(&mut rx, n * d))?;
    let mut rt = rng::stream(seed, "teacher-net");
    let w = Mat::from_vec(d, teacher_width, rng::normals(&mut rt, d * teacher_width))?;
    let alpha = rng::normals(&mut rt, teacher_width);
    let teacher = TwoLayerNet::new(w, alpha)?;
    let mut data = Dataset::new(x, vec![0.0; n])?;
    data.y = forward(&teacher, &data)?;
    Ok((data, teacher))
}

/// Gaussian initialisation scaled by `scale`, from the `init` substream.
pub fn gaussian_init(seed: u64, d: usize, m: usize, scale: f64) -> TwoLayerNet {
    let mut r = rng::stream(seed, "init");
    let w: Vec<f64> = rng::normals(&mut r, d * m).iter().map(|v| v * scale).collect();
    let alpha: Vec<f64> = rng::normals(&mut r, m).iter().map(|v| v * scale).collect();
    TwoLayerNet {
        w: Mat::from_vec(d, m, w).expect("consistent shape"),
        alpha,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_net(seed: u64, d: usize, m: usize) -> TwoLayerNet {
        gaussian_init(seed, d, m, 1.0)
    }

    #[test]
    fn forward_sign_split() {
        let net = TwoLayerNet::new(Mat::from_rows(&[[1.0]]).unwrap(), vec![1.0]).unwrap();
        assert_eq!(forward(&net, &Dataset::toy()).unwrap(), vec![1.0, 0.0]);
        let mut z = random_net(1, 1, 3);
        z.alpha = vec![0.0; 3];
        assert_eq!(forward(&z, &Dataset::toy()).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn forward_is_sum_of_neurons() {
        let (data, _) = gen_teacher_data(3, 10, 3, 2).unwrap();
        let net = random_net(4, 3, 2);
        let f = forward(&net, &data).unwrap();
        for k in 0..data.n() {
            let mut manual = 0.0;
            for i in 0..2 {
                let z: f64 = (0..3).map(|c| data.x[(k, c)] * net.w[(c, i)]).sum();
                manual += z.max(0.0) * net.alpha[i];
            }
            assert!((manual - f[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_examples() {
        let (data, teacher) = gen_teacher_data(5, 8, 2, 3).unwrap();
        assert_eq!(loss_sq(&teacher, &data).unwrap(), 0.0);
        let mut shifted = data.clone();
        shifted.y[3] -= 1.0;
        assert!((loss_sq(&teacher, &shifted).unwrap() - 0.5).abs() < 1e-12);
        let net = random_net(6, 2, 4);
        let f = forward(&net, &data).unwrap();
        let manual: f64 = f.iter().zip(&data.y).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum();
        assert!((loss_sq(&net, &data).unwrap() - manual).abs() < 1e-12);
    }

    #[test]
    fn grad_trivial_cases() {
        let (data, teacher) = gen_teacher_data(7, 6, 2, 3).unwrap();
        let (gw, ga) = grad(&teacher, &data).unwrap();
        assert_eq!(gw.max_abs(), 0.0);
        assert!(ga.iter().all(|g| *g == 0.0));
        let mut net = random_net(8, 2, 3);
        net.alpha = vec![0.0; 3];
        assert_eq!(grad(&net, &data).unwrap().0.max_abs(), 0.0);
    }

    #[test]
    fn grad_matches_central_differences() {
        let (data, _) = gen_teacher_data(9, 12, 3, 4).unwrap();
        let net = random_net(10, 3, 5);
        let (gw, ga) = grad(&net, &data).unwrap();
        let h = 1e-6;
        for r in 0..3 {
            for c in 0..5 {
                let mut p = net.clone();
                p.w[(r, c)] += h;
                let mut q = net.clone();
                q.w[(r, c)] -= h;
                let fd = (loss_sq(&p, &data).unwrap() - loss_sq(&q, &data).unwrap()) / (2.0 * h);
                assert!((fd - gw[(r, c)]).abs() <= 1e-5 * (1.0 + fd.abs()));
            }
        }
        for i in 0..5 {
            let mut p = net.clone();
            p.alpha[i] += h;
            let mut q = net.clone();
            q.alpha[i] -= h;
            let fd = (loss_sq(&p, &data).unwrap() - loss_sq(&q, &data).unwrap()) / (2.0 * h);
            assert!((fd - ga[i]).abs() <= 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn membership_examples() {
        let (data, teacher) = gen_teacher_data(11, 5, 2, 2).unwrap();
        assert!(in_solution_set(&teacher, &data, 0.0));
        let mut pert = data.clone();
        pert.y[0] += 1e-3;
        assert!(!in_solution_set(&teacher, &pert, 1e-6));

        // c = 1 net on the toy: W = [[1, -1]], α = [1, 1]
        let toy = Dataset::toy();
        let opt = TwoLayerNet::new(Mat::from_rows(&[[1.0, -1.0]]).unwrap(), vec![1.0, 1.0]).unwrap();
        let spec = RegSetSpec::new(NormKind::MaxEntry, 1.0, 2).unwrap();
        assert!(in_reg_set(&opt, &toy, &spec, MEMBERSHIP_TOL));

        let small =
            TwoLayerNet::new(Mat::from_rows(&[[0.9, -0.9]]).unwrap(), vec![1.0 / 0.9; 2]).unwrap();
        assert!(!in_reg_set(&small, &toy, &spec, MEMBERSHIP_TOL));
        let big = TwoLayerNet::new(Mat::from_rows(&[[1.2, -1.2]]).unwrap(), vec![1.0 / 1.2; 2]).unwrap();
        let op = RegSetSpec::new(NormKind::Operator, 1.0, 2).unwrap();
        assert!(!in_reg_set(&big, &toy, &op, MEMBERSHIP_TOL));
        let fine = RegSetSpec::new(NormKind::MaxEntry, 1.0 / 1.2, 2).unwrap();
        assert!(in_reg_set(&big, &toy, &fine, MEMBERSHIP_TOL));
    }

    #[test]
    fn stable_rank_examples() {
        for k in [1, 3, 7] {
            assert_eq!(stable_rank(&Mat::identity(k)).unwrap(), k as f64);
        }
        let r1 = Mat::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!((stable_rank(&r1).unwrap() - 1.0).abs() < 1e-12);
        let d = Mat::from_diag(&[2.0, 1.0, 1.0]);
        assert!((stable_rank(&d).unwrap() - 1.5).abs() < 1e-15);
        assert!(stable_rank(&Mat::zeros(2, 2)).is_err());
    }

    #[test]
    fn teacher_data_is_deterministic() {
        assert!(matches!(gen_teacher_data(1, 4, 2, 0), Err(Error::Precondition(_))));
        let (a, ta) = gen_teacher_data(42, 16, 3, 4).unwrap();
        let (b, tb) = gen_teacher_data(42, 16, 3, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert!(in_solution_set(&ta, &a, 0.0));
    }
}
