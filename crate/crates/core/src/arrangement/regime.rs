//! Which nonemptiness and connectivity guarantees apply at a given `(m, λ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::NormKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Guarantee {
    Holds,
    Fails,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeInput {
    /// Number of activation patterns.
    pub p: usize,
    pub m: usize,
    pub lambda: f64,
    pub norm: NormKind,
    /// Smallest width that admits an interpolator.
    pub m0: usize,
    /// Critical regularization for fitting at width `m`.
    pub lambda_fit: f64,
    pub m_star: Option<usize>,
    /// Polyhedral constant bounding minimal supports (user supplied).
    pub big_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub nonempty: Guarantee,
    pub connected: Guarantee,
    pub lambda_c: Option<f64>,
    pub reasons: Vec<String>,
    pub warnings: Vec<String>,
}

/// `λ_c*(m) = √((1/M)(m/(4P) − 1))`, defined for `m ≥ 4P + 1`.
pub fn lambda_c_star(m: usize, p: usize, big_m: f64) -> Option<f64> {
    if p == 0 || m < 4 * p + 1 || !(big_m > 0.0) {
        return None;
    }
    Some(((m as f64 / (4.0 * p as f64) - 1.0) / big_m).sqrt())
}

pub fn regime_check(inp: &RegimeInput) -> Result<RegimeReport> {
    if !(inp.lambda > 0.0) {
        return Err(Error::InvalidParameter("lambda must be positive".into()));
    }
    let mut reasons = Vec::new();
    let mut warnings = Vec::new();
    let nonempty = if inp.lambda <= inp.lambda_fit && inp.m >= inp.m0 {
        reasons.push(format!(
            "nonempty: lambda {} <= lambda_fit {} and m {} >= m0 {}",
            inp.lambda, inp.lambda_fit, inp.m, inp.m0
        ));
        Guarantee::Holds
    } else {
        reasons.push(format!(
            "empty: needs lambda <= {} and m >= {} (have lambda {}, m {})",
            inp.lambda_fit, inp.m0, inp.lambda, inp.m
        ));
        Guarantee::Fails
    };
    let mut lambda_c = None;
    let connected = match inp.norm {
        NormKind::Frobenius | NormKind::Operator => {
            if inp.m >= 4 * inp.p {
                reasons.push(format!("connected: m {} >= 4P = {}", inp.m, 4 * inp.p));
                Guarantee::Holds
            } else {
                reasons.push(format!("connectivity unknown: m {} < 4P = {}", inp.m, 4 * inp.p));
                Guarantee::Unknown
            }
        }
        NormKind::MaxEntry => {
            if inp.m_star.is_none() && inp.big_m.is_none() {
                warnings.push("neither m* nor M supplied; max-norm connectivity cannot be assessed".into());
            }
            lambda_c = inp.big_m.and_then(|bm| lambda_c_star(inp.m, inp.p, bm));
            if let Some(ms) = inp.m_star.filter(|ms| inp.m >= *ms) {
                reasons.push(format!("connected: m {} >= m* = {ms}", inp.m));
                Guarantee::Holds
            } else if let Some(lc) = lambda_c.filter(|lc| inp.lambda <= *lc) {
                reasons.push(format!("connected: lambda {} <= lambda_c*(m) = {lc}", inp.lambda));
                Guarantee::Holds
            } else {
                reasons.push("connectivity unknown: below m* and above lambda_c*".into());
                Guarantee::Unknown
            }
        }
        other => {
            return Err(Error::InvalidParameter(format!("unsupported constraint norm {}", other.name())))
        }
    };
    Ok(RegimeReport {
        nonempty,
        connected,
        lambda_c,
        reasons,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(norm: NormKind, m: usize) -> RegimeInput {
        RegimeInput {
            p: 3,
            m,
            lambda: 0.5,
            norm,
            m0: 2,
            lambda_fit: 1.0 / 2f64.sqrt(),
            m_star: None,
            big_m: None,
        }
    }

    #[test]
    fn frobenius_toy_at_twelve_is_connected() {
        let r = regime_check(&toy(NormKind::Frobenius, 12)).unwrap();
        assert_eq!(r.nonempty, Guarantee::Holds);
        assert_eq!(r.connected, Guarantee::Holds);
    }

    #[test]
    fn narrow_width_is_unknown() {
        let r = regime_check(&toy(NormKind::Operator, 2)).unwrap();
        assert_eq!(r.connected, Guarantee::Unknown);
    }

    #[test]
    fn max_norm_uses_critical_width() {
        let mut inp = toy(NormKind::MaxEntry, 4);
        inp.lambda = 1.0;
        inp.lambda_fit = 1.0;
        let r = regime_check(&inp).unwrap();
        assert_eq!(r.connected, Guarantee::Unknown);
        assert_eq!(r.warnings.len(), 1);
        inp.m_star = Some(4);
        let r = regime_check(&inp).unwrap();
        assert_eq!(r.connected, Guarantee::Holds);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn lambda_c_formula() {
        assert_eq!(lambda_c_star(12, 3, 1.0), None);
        let v = lambda_c_star(24, 3, 2.0).unwrap();
        assert!((v - (0.5f64).sqrt()).abs() < 1e-15);
    }
}
