use serde::{Deserialize, Serialize};

use super::mat::Mat;
use super::svd::singular_values;
use crate::error::{Error, Result};

/// Matrix norms used as implicit-bias constraints and their duals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    /// Largest absolute entry.
    MaxEntry,
    /// Sum of absolute entries.
    L1Entry,
    Frobenius,
    /// Largest singular value.
    Operator,
    /// Sum of singular values.
    Nuclear,
}

impl NormKind {
    pub const ALL: [NormKind; 5] = [
        NormKind::MaxEntry,
        NormKind::L1Entry,
        NormKind::Frobenius,
        NormKind::Operator,
        NormKind::Nuclear,
    ];

    pub fn dual(self) -> NormKind {
        match self {
            NormKind::MaxEntry => NormKind::L1Entry,
            NormKind::L1Entry => NormKind::MaxEntry,
            NormKind::Frobenius => NormKind::Frobenius,
            NormKind::Operator => NormKind::Nuclear,
            NormKind::Nuclear => NormKind::Operator,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NormKind::MaxEntry => "max",
            NormKind::L1Entry => "l1",
            NormKind::Frobenius => "fro",
            NormKind::Operator => "op",
            NormKind::Nuclear => "nuc",
        }
    }

    pub fn parse(s: &str) -> Result<NormKind> {
        match s.to_ascii_lowercase().as_str() {
            "max" | "maxentry" | "linf" | "inf" => Ok(NormKind::MaxEntry),
            "l1" | "l1entry" => Ok(NormKind::L1Entry),
            "fro" | "frobenius" | "f" => Ok(NormKind::Frobenius),
            "op" | "operator" | "spectral" => Ok(NormKind::Operator),
            "nuc" | "nuclear" => Ok(NormKind::Nuclear),
            other => Err(Error::Parse(format!("unknown norm '{other}'"))),
        }
    }
}

pub fn matrix_norm(a: &Mat, kind: NormKind) -> Result<f64> {
    let v = a.as_slice();
    Ok(match kind {
        NormKind::MaxEntry => a.max_abs(),
        NormKind::L1Entry => v.iter().map(|x| x.abs()).sum(),
        NormKind::Frobenius => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        NormKind::Operator => {
            if v.is_empty() {
                0.0
            } else {
                singular_values(a)?[0]
            }
        }
        NormKind::Nuclear => singular_values(a)?.iter().sum(),
    })
}

/// A vector viewed as a single-row matrix: MaxEntry → ℓ∞, L1Entry → ℓ1,
/// Frobenius / Operator / Nuclear → ℓ2.
pub fn vector_norm(v: &[f64], kind: NormKind) -> f64 {
    match kind {
        NormKind::MaxEntry => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        NormKind::L1Entry => v.iter().map(|x| x.abs()).sum(),
        NormKind::Frobenius | NormKind::Operator | NormKind::Nuclear => {
            v.iter().map(|x| x * x).sum::<f64>().sqrt()
        }
    }
}

/// Dense inverse by Gauss-Jordan with partial pivoting.
///
/// Rejects matrices whose smallest singular value is below `1e-12` times the largest.
pub fn invert(a: &Mat) -> Result<Mat> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::DimensionMismatch(format!(
            "cannot invert a {}x{} matrix",
            a.rows(),
            a.cols()
        )));
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let sig = singular_values(a)?;
    let smax = sig[0];
    let smin = sig[n - 1];
    if smax == 0.0 || smin < 1e-12 * smax {
        return Err(Error::Singular(if smin > 0.0 { smax / smin } else { f64::INFINITY }));
    }

    let mut m = a.clone();
    let mut inv = Mat::identity(n);
    for col in 0..n {
        let mut piv = col;
        for r in (col + 1)..n {
            if m[(r, col)].abs() > m[(piv, col)].abs() {
                piv = r;
            }
        }
        if piv != col {
            for c in 0..n {
                let t = m[(col, c)];
                m[(col, c)] = m[(piv, c)];
                m[(piv, c)] = t;
                let t = inv[(col, c)];
                inv[(col, c)] = inv[(piv, c)];
                inv[(piv, c)] = t;
            }
        }
        let p = m[(col, col)];
        for c in 0..n {
            m[(col, c)] /= p;
            inv[(col, c)] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = m[(r, col)];
            if f == 0.0 {
                continue;
            }
            for c in 0..n {
                m[(r, c)] -= f * m[(col, c)];
                inv[(r, c)] -= f * inv[(col, c)];
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn rank_one_example_all_norms() {
        let a = Mat::from_rows(&[[3.0, 4.0], [0.0, 0.0]]).unwrap();
        let n = |k| matrix_norm(&a, k).unwrap();
        assert_eq!(n(NormKind::Frobenius), 5.0);
        assert!((n(NormKind::Operator) - 5.0).abs() < 1e-14);
        assert!((n(NormKind::Nuclear) - 5.0).abs() < 1e-14);
        assert_eq!(n(NormKind::MaxEntry), 4.0);
        assert_eq!(n(NormKind::L1Entry), 7.0);
        assert!((matrix_norm(&Mat::identity(2), NormKind::Nuclear).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn dual_is_an_involution() {
        for k in NormKind::ALL {
            assert_eq!(k.dual().dual(), k);
        }
    }

    #[test]
    fn operator_and_nuclear_match_singular_values() {
        let mut r = rng::stream(5, "norms");
        for _ in 0..20 {
            let a = Mat::from_vec(4, 3, rng::normals(&mut r, 12)).unwrap();
            let s = singular_values(&a).unwrap();
            let op = matrix_norm(&a, NormKind::Operator).unwrap();
            let nuc = matrix_norm(&a, NormKind::Nuclear).unwrap();
            assert!((op - s[0]).abs() <= 1e-10 * (1.0 + s[0]));
            let sum: f64 = s.iter().sum();
            assert!((nuc - sum).abs() <= 1e-9 * sum);
        }
    }

    #[test]
    fn duality_pairing_holds() {
        let mut r = rng::stream(6, "duality");
        for _ in 0..100 {
            let a = Mat::from_vec(3, 4, rng::normals(&mut r, 12)).unwrap();
            let b = Mat::from_vec(3, 4, rng::normals(&mut r, 12)).unwrap();
            let ip = a.inner(&b).unwrap();
            for k in NormKind::ALL {
                let bound = matrix_norm(&a, k).unwrap() * matrix_norm(&b, k.dual()).unwrap();
                assert!(ip <= bound + 1e-9, "{k:?}: {ip} > {bound}");
            }
        }
    }

    #[test]
    fn vector_norms_follow_matrix_view() {
        let v = [3.0, -4.0];
        let as_row = Mat::from_rows(&[v]).unwrap();
        for k in NormKind::ALL {
            let m = matrix_norm(&as_row, k).unwrap();
            assert!((vector_norm(&v, k) - m).abs() < 1e-14, "{k:?}");
        }
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(invert(&Mat::identity(3)).unwrap(), Mat::identity(3));
        let inv = invert(&Mat::from_diag(&[2.0, 4.0])).unwrap();
        assert_eq!(inv, Mat::from_diag(&[0.5, 0.25]));
        let sing = Mat::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(invert(&sing), Err(Error::Singular(_))));
        assert!(matches!(
            invert(&Mat::zeros(2, 3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn random_inverse_residual() {
        let mut r = rng::stream(8, "inv");
        let a = Mat::from_vec(6, 6, rng::normals(&mut r, 36)).unwrap();
        let inv = invert(&a).unwrap();
        let res = a.matmul(&inv).unwrap().max_abs_diff(&Mat::identity(6)).unwrap();
        assert!(res < 1e-10, "{res}");
    }
}
