//! Harris-theorem contraction rate and Poincaré constants fitted from decay.

use super::{FunctionalConstants, Provenance};
use crate::error::{Result, UqError};
use crate::scalar::Scalar;

/// Constants of a Harris-type argument: Liapunov drift `γ, K`, level `R`,
/// minorization `α` on the level set, `α₀ ∈ (0, α)` and step `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarrisParams<T> {
    gamma: T,
    k: T,
    r: T,
    alpha: T,
    alpha0: T,
    t: T,
}

impl<T: Scalar> HarrisParams<T> {
    pub fn new(gamma: T, k: T, r: T, alpha: T, alpha0: T, t: T) -> Result<Self> {
        let (zero, one) = (T::zero(), T::one());
        if !(gamma > zero && gamma < one) {
            return Err(UqError::ConstraintViolated("gamma must lie in (0, 1)".into()));
        }
        if !(k >= zero) {
            return Err(UqError::ConstraintViolated("K must be nonnegative".into()));
        }
        if !(alpha > zero && alpha < one) {
            return Err(UqError::ConstraintViolated("alpha must lie in (0, 1)".into()));
        }
        if !(alpha0 > zero && alpha0 < alpha) {
            return Err(UqError::ConstraintViolated("alpha0 must lie in (0, alpha)".into()));
        }
        if !(t > zero) {
            return Err(UqError::ConstraintViolated("T must be positive".into()));
        }
        let need = T::lit(2.0) * k / (one - gamma);
        if !(r > need) {
            return Err(UqError::ConstraintViolated(format!(
                "R = {r} must exceed 2K/(1 - gamma) = {need}"
            )));
        }
        Ok(Self {
            gamma,
            k,
            r,
            alpha,
            alpha0,
            t,
        })
    }
}

/// `ξ = max{1 − (α − α₀), (2 + Rβγ₀)/(2 + Rβ)}` with `γ₀ = γ + 2K/R`,
/// `β = α₀/K`, and the rate `log(1/ξ)/T`.
pub fn harris_xi<T: Scalar>(p: &HarrisParams<T>) -> (T, T) {
    let two = T::lit(2.0);
    let gamma0 = p.gamma + two * p.k / p.r;
    let second = if p.k == T::zero() {
        // β → ∞
        gamma0
    } else {
        let beta = p.alpha0 / p.k;
        (two + p.r * beta * gamma0) / (two + p.r * beta)
    };
    let xi = (T::one() - (p.alpha - p.alpha0)).max(second);
    (xi, -xi.ln() / p.t)
}

/// Poincaré constant from observed decay `‖P_t f − μ*[f]‖₂ ≈ C e^{−t/α}`.
///
/// Each inner slice holds `(t, norm)` samples of one observable. A
/// least-squares line is fitted to `log norm` against `t`; observables
/// whose norms are all zero carry no information and are skipped.
pub fn poincare_from_decay<T: Scalar>(samples: &[Vec<(T, T)>]) -> Result<FunctionalConstants<T>> {
    let mut min_rate = T::INFINITY;
    for (idx, obs) in samples.iter().enumerate() {
        if obs.iter().all(|&(_, v)| v == T::zero()) {
            continue;
        }
        let pts: Vec<(T, T)> = obs
            .iter()
            .filter(|&&(t, v)| v > T::zero() && t.is_finite())
            .map(|&(t, v)| (t, v.ln()))
            .collect();
        if pts.len() < 3 {
            return Err(UqError::InsufficientSamples(format!(
                "observable {idx} has {} usable samples, need 3",
                pts.len()
            )));
        }
        let n = T::from_usize_lossy(pts.len());
        let tm = pts.iter().fold(T::zero(), |a, p| a + p.0) / n;
        let ym = pts.iter().fold(T::zero(), |a, p| a + p.1) / n;
        let sxx = pts.iter().fold(T::zero(), |a, p| a + (p.0 - tm) * (p.0 - tm));
        let sxy = pts.iter().fold(T::zero(), |a, p| a + (p.0 - tm) * (p.1 - ym));
        if !(sxx > T::zero()) {
            return Err(UqError::InsufficientSamples(format!(
                "observable {idx} has no spread in t"
            )));
        }
        let rate = -sxy / sxx;
        if !(rate > T::zero()) {
            return Err(UqError::NonDecaying(idx));
        }
        min_rate = min_rate.min(rate);
    }
    if !min_rate.is_finite() {
        return Err(UqError::InsufficientSamples("no non-constant observable".into()));
    }
    FunctionalConstants::new(T::one() / min_rate, None, false, Provenance::DecayFit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harris_example() {
        let p = HarrisParams::new(0.5, 1.0, 10.0, 0.5, 0.25, 1.0).unwrap();
        let (xi, rate) = harris_xi(&p);
        assert!((xi - 2.0f64 / 2.4).abs() < 1e-15);
        assert!((rate - 1.2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn harris_constraint() {
        assert!(matches!(
            HarrisParams::new(0.5, 1.0, 4.0, 0.5, 0.25, 1.0),
            Err(UqError::ConstraintViolated(_))
        ));
    }

    #[test]
    fn harris_limits() {
        let p = HarrisParams::new(0.5, 1.0, 10.0, 0.5, 1e-12, 1.0).unwrap();
        let (xi, rate) = harris_xi(&p);
        assert!(1.0 - xi < 1e-9 && rate < 1e-9);
        let p = HarrisParams::new(0.5, 1.0, 1e12, 0.5, 0.25, 1.0).unwrap();
        assert!((harris_xi(&p).0 - 0.75f64).abs() < 1e-9);
    }

    #[test]
    fn decay_fit_two_state() {
        // P_t f − μ*[f] = e^{−2t} f̂ for the symmetric rate-1 chain
        let s: Vec<(f64, f64)> = (0..10).map(|k| {
            let t = 0.5 * k as f64;
            (t, 0.5 * (-2.0 * t).exp())
        }).collect();
        let c = poincare_from_decay(&[s]).unwrap();
        assert!((c.alpha - 0.5).abs() < 1e-12);
    }

    #[test]
    fn decay_fit_errors() {
        let zeros = vec![(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)];
        assert!(matches!(
            poincare_from_decay(std::slice::from_ref(&zeros)),
            Err(UqError::InsufficientSamples(_))
        ));
        let grow = vec![(0.0, 1.0), (1.0, 2.0), (2.0, 4.0)];
        assert_eq!(poincare_from_decay(&[zeros, grow]), Err(UqError::NonDecaying(1)));
        assert!(poincare_from_decay(&[vec![(0.0, 1.0), (1.0, 0.5)]]).is_err());
    }
}
