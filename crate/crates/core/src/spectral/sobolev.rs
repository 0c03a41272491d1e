//! Log-Sobolev and F-Sobolev `Λ` bounds, a numeric log-Sobolev constant
//! for small chains, and closed-form constants for diffusions.

use rand::Rng as _;

use super::{eigen, poincare_constant, FunctionalConstants, Provenance};
use crate::chain::{symmetric_form, GeneratorMatrix, Observable, StationaryMeasure, REVERSIBILITY_TOL};
use crate::divergence::{cgf_log, LambdaFunction, LambdaKind};
use crate::error::{Result, UqError};
use crate::rng;
use crate::scalar::Scalar;

/// `Λ(c) = (1/β) log ∫ e^{βc f̂} dμ*`.
pub fn log_sobolev_lambda<T: Scalar>(
    f: &Observable<T>,
    mu: &StationaryMeasure<T>,
    beta: T,
) -> Result<LambdaFunction<'static, T>> {
    mu.check_len(f.values().len())?;
    if !(beta > T::zero()) {
        return Err(UqError::OutOfRange(format!("beta = {beta} must be positive")));
    }
    let lw = mu.log_weights().to_vec();
    let fc = f.centered().to_vec();
    Ok(LambdaFunction::new(
        LambdaKind::LogSobolev,
        (T::NEG_INFINITY, T::INFINITY),
        move |c| cgf_log(&lw, &fc, beta * c) / beta,
    ))
}

/// An increasing concave map `F` with `F(1) = 0` together with its inverse.
pub trait FSobolevMap<T: Scalar>: Send + Sync {
    fn apply(&self, x: T) -> T;
    fn inverse(&self, y: T) -> T;
    /// `F(0⁺)`, possibly `−∞`.
    fn lower_limit(&self) -> T;

    /// Spot-checks `F(1) = 0`, monotonicity and the inverse on sample points.
    fn validate(&self) -> Result<()> {
        if self.apply(T::one()).abs() > T::tol(1e-12) {
            return Err(UqError::ConstraintViolated("F(1) must be 0".into()));
        }
        let xs: Vec<T> = (-8..=8).map(|k| T::lit(2f64.powi(k))).collect();
        for w in xs.windows(2) {
            if !(self.apply(w[1]) > self.apply(w[0])) {
                return Err(UqError::ConstraintViolated("F must be strictly increasing".into()));
            }
        }
        for &x in &xs {
            let back = self.inverse(self.apply(x));
            if (back - x).abs() > T::tol(1e-9) * x {
                return Err(UqError::ConstraintViolated("F⁻¹ is not the inverse of F".into()));
            }
        }
        Ok(())
    }
}

/// `F(x) = log(x)/β`, which turns the F-Sobolev bound into the
/// log-Sobolev one.
#[derive(Debug, Clone, Copy)]
pub struct LogMap<T> {
    pub beta: T,
}

impl<T: Scalar> FSobolevMap<T> for LogMap<T> {
    fn apply(&self, x: T) -> T {
        x.ln() / self.beta
    }
    fn inverse(&self, y: T) -> T {
        (self.beta * y).exp()
    }
    fn lower_limit(&self) -> T {
        T::NEG_INFINITY
    }
}

/// `Λ(c) = F(∫ F⁻¹(c f̂) dμ*)`.
pub fn f_sobolev_lambda<T: Scalar>(
    f: &Observable<T>,
    mu: &StationaryMeasure<T>,
    map: &dyn FSobolevMap<T>,
    c: T,
) -> Result<T> {
    mu.check_len(f.values().len())?;
    let lower = map.lower_limit();
    let mut acc = T::zero();
    for (i, (&w, &x)) in mu.weights().iter().zip(f.centered()).enumerate() {
        let v = c * x;
        if v <= lower {
            return Err(UqError::DomainViolation(i));
        }
        acc += w * map.inverse(v);
    }
    Ok(map.apply(acc))
}

/// [`f_sobolev_lambda`] as a [`LambdaFunction`]; points leaving the domain
/// of `F⁻¹` evaluate to `+∞`.
pub fn f_sobolev_lambda_fn<'a, T: Scalar>(
    f: &'a Observable<T>,
    mu: &'a StationaryMeasure<T>,
    map: &'a dyn FSobolevMap<T>,
) -> Result<LambdaFunction<'a, T>> {
    map.validate()?;
    Ok(LambdaFunction::new(
        LambdaKind::FSobolev,
        (T::NEG_INFINITY, T::INFINITY),
        move |c| f_sobolev_lambda(f, mu, map, c).unwrap_or(T::INFINITY),
    ))
}

/// `β = 3α + 1/((1 + α|C|)πe²)`.
pub fn carlen_loss_beta<T: Scalar>(alpha: T, c: T) -> T {
    let pi_e2 = T::pi() * T::lit(2.0).exp();
    T::lit(3.0) * alpha + T::one() / ((T::one() + alpha * c.abs()) * pi_e2)
}

/// Convention for turning a Hessian lower bound `D²V ≥ m I` into constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianConvention {
    /// `α = 1/m`.
    Poincare,
    /// `β = 2/m`, `α = β/2`.
    LogSobolev,
}

pub fn hessian_constants<T: Scalar>(
    hessian_lower_bound: T,
    convention: HessianConvention,
) -> Result<FunctionalConstants<T>> {
    let m = hessian_lower_bound;
    if !(m > T::zero()) {
        return Err(UqError::OutOfRange(format!("Hessian lower bound {m} must be positive")));
    }
    match convention {
        HessianConvention::Poincare => {
            FunctionalConstants::new(T::one() / m, None, true, Provenance::Analytic)
        }
        HessianConvention::LogSobolev => {
            let beta = T::lit(2.0) / m;
            FunctionalConstants::new(beta / T::lit(2.0), Some(beta), true, Provenance::Analytic)
        }
    }
}

const LS_MAX_STATES: usize = 64;
const LS_STARTS: usize = 32;
const LS_SEED: u64 = 0x6c73_6f62;
/// Relative margin added to the numeric supremum.
const LS_MARGIN: f64 = 1e-6;

/// Numeric log-Sobolev constant of a small reversible chain.
///
/// Maximizes `Ent_{μ*}(g²) / ⟨−Ag, g⟩` over `g = 1 + h` by gradient
/// ascent from 32 fixed random starts (the ratio is scale invariant, so
/// this covers every non-constant `g` with positive mean). The supremum is never
/// below `2α` (its limit at constants). The returned `β` is the best value
/// found, inflated by a relative `1e-6` to cover the optimizer tolerance.
pub fn log_sobolev_constant_numeric<T: Scalar>(
    a: &GeneratorMatrix<T>,
    mu: &StationaryMeasure<T>,
) -> Result<FunctionalConstants<T>> {
    log_sobolev_constant_numeric_with(a, mu, LS_STARTS, LS_SEED)
}

/// [`log_sobolev_constant_numeric`] with an explicit start count and seed.
pub fn log_sobolev_constant_numeric_with<T: Scalar>(
    a: &GeneratorMatrix<T>,
    mu: &StationaryMeasure<T>,
    starts: usize,
    seed: u64,
) -> Result<FunctionalConstants<T>> {
    mu.check_matches(a)?;
    let r = a.reversibility_residual(mu);
    if r > T::tol(REVERSIBILITY_TOL) {
        return Err(UqError::NotReversible(r.as_f64()));
    }
    let n = a.dim();
    if n > LS_MAX_STATES {
        return Err(UqError::OutOfRange(format!(
            "numeric log-Sobolev constant limited to {LS_MAX_STATES} states, got {n}"
        )));
    }
    let alpha = poincare_constant(a, mu)?.alpha;
    let s = symmetric_form(a, mu, None)?;
    let lw = mu.log_weights().to_vec();

    let sqrt_mu: Vec<T> = lw.iter().map(|&l| (l * T::lit(0.5)).exp()).collect();
    let mu_w = mu.weights();

    // ratio and gradient at g = 1 + h; the Dirichlet form only sees h and the
    // entropy is summed from (1+δ)log(1+δ) − δ ≥ 0, so neither cancels near
    // constant g
    let ratio = |h: &[T]| -> Option<(T, Vec<T>)> {
        let u = nalgebra::DVector::from_iterator(n, (0..n).map(|i| sqrt_mu[i] * h[i]));
        let su = &s * &u;
        let e = -u.dot(&su);
        if !(e > T::zero()) {
            return None;
        }
        let m1 = (0..n).fold(T::zero(), |acc, i| acc + mu_w[i] * h[i]);
        let m2 = (0..n).fold(T::zero(), |acc, i| acc + mu_w[i] * h[i] * h[i]);
        let z = T::one() + T::lit(2.0) * m1 + m2;
        let mut ent = T::zero();
        let mut grad = vec![T::zero(); n];
        for i in 0..n {
            let d = (T::lit(2.0) * (h[i] - m1) + h[i] * h[i] - m2) / z;
            ent += mu_w[i] * z * entropy_kernel(d);
            let g = T::one() + h[i];
            if g != T::zero() {
                grad[i] = mu_w[i] * (d.ln_1p()) * T::lit(2.0) * g;
            }
        }
        let rv = ent / e;
        for i in 0..n {
            grad[i] = (grad[i] + rv * T::lit(2.0) * sqrt_mu[i] * su[i]) / e;
        }
        Some((rv, grad))
    };

    // rescale g to unit μ*-mean; keeps h small so h² − E[h²] stays accurate
    let recenter = |h: &mut Vec<T>| {
        let m1 = (0..n).fold(T::zero(), |acc, i| acc + mu_w[i] * h[i]);
        if T::one() + m1 > T::zero() {
            for x in h.iter_mut() {
                *x = (*x - m1) / (T::one() + m1);
            }
        }
    };

    // a spread of eigen-directions gives good starting shapes
    let eig = eigen(s.clone())?;
    let mut best = T::lit(2.0) * alpha;
    for k in 0..starts {
        let mut r = rng::stream(seed, k as u64);
        let mut v: Vec<T> = if k < n.saturating_sub(1) {
            let col = eig.eigenvectors.column((k + 1) % n);
            let amp = T::lit(r.random_range(0.2..3.0));
            (0..n).map(|i| amp * col[i] / sqrt_mu[i]).collect()
        } else {
            (0..n).map(|_| T::lit(r.random_range(-0.99..3.0))).collect()
        };
        recenter(&mut v);
        let Some((mut val, mut grad)) = ratio(&v) else { continue };
        let mut step = T::one();
        for _ in 0..4000 {
            let g2 = grad.iter().fold(T::zero(), |acc, &x| acc + x * x);
            if !(g2.sqrt() > T::tol(1e-12)) {
                break;
            }
            let mut accepted = None;
            let mut t = step * T::lit(2.0);
            for _ in 0..60 {
                let mut w: Vec<T> = v.iter().zip(&grad).map(|(&x, &d)| x + t * d).collect();
                recenter(&mut w);
                if let Some((wv, wg)) = ratio(&w) {
                    if wv >= val + T::lit(1e-4) * t * g2 {
                        accepted = Some((w, wv, wg));
                        break;
                    }
                }
                t *= T::lit(0.5);
            }
            let Some((w, wv, wg)) = accepted else { break };
            let gain = wv - val;
            v = w;
            val = wv;
            grad = wg;
            step = t;
            if gain <= T::tol(1e-14) * val.abs().max(T::one()) {
                break;
            }
        }
        if val > best {
            best = val;
        }
    }
    let beta = best * (T::one() + T::lit(LS_MARGIN));
    FunctionalConstants::new(alpha, Some(beta), true, Provenance::Numeric)
}

/// `(1+δ)log(1+δ) − δ`, by its series near zero.
fn entropy_kernel<T: Scalar>(d: T) -> T {
    if d.abs() < T::lit(1e-3) {
        let mut term = d * d;
        let mut acc = T::zero();
        for k in 2..12 {
            let kf = T::from_usize_lossy(k);
            acc += term / (kf * (kf - T::one()));
            term *= -d;
        }
        acc
    } else if d <= -T::one() {
        T::one()
    } else {
        (T::one() + d) * d.ln_1p() - d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{center_observable, invariant_measure};

    fn two_state() -> (GeneratorMatrix<f64>, StationaryMeasure<f64>) {
        let q = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let mu = invariant_measure(&q).unwrap();
        (q, mu)
    }

    #[test]
    fn log_sobolev_two_state_value() {
        let (_, mu) = two_state();
        let f = center_observable(&[0.0, 1.0], &mu).unwrap();
        let l = log_sobolev_lambda(&f, &mu, 1.0).unwrap();
        assert_eq!(l.eval(0.0), 0.0);
        assert!((l.eval(1.0) - 0.5f64.cosh().ln()).abs() < 1e-15);
    }

    #[test]
    fn f_sobolev_with_log_matches() {
        let (_, mu) = two_state();
        let f = center_observable(&[0.0, 1.0], &mu).unwrap();
        let map = LogMap { beta: 1.0 };
        map.validate().unwrap();
        assert!(f_sobolev_lambda(&f, &mu, &map, 0.0).unwrap().abs() < 1e-16);
        let v = f_sobolev_lambda(&f, &mu, &map, 1.0).unwrap();
        assert!((v - 0.5f64.cosh().ln()).abs() < 1e-15);
    }

    #[test]
    fn f_sobolev_domain_violation() {
        struct Shifted;
        impl FSobolevMap<f64> for Shifted {
            // F(x) = x − 1 on (0, ∞), so F(0⁺) = −1
            fn apply(&self, x: f64) -> f64 {
                x - 1.0
            }
            fn inverse(&self, y: f64) -> f64 {
                y + 1.0
            }
            fn lower_limit(&self) -> f64 {
                -1.0
            }
        }
        let (_, mu) = two_state();
        let f = center_observable(&[0.0, 1.0], &mu).unwrap();
        assert_eq!(
            f_sobolev_lambda(&f, &mu, &Shifted, 4.0),
            Err(UqError::DomainViolation(0))
        );
    }

    #[test]
    fn carlen_loss_values() {
        let want = 3.0 + 1.0 / (std::f64::consts::PI * 2f64.exp());
        assert!((carlen_loss_beta(1.0, 0.0) - want).abs() < 1e-14);
        assert!((carlen_loss_beta(1e-300, 0.0) - 1.0 / (std::f64::consts::PI * 2f64.exp())).abs() < 1e-15);
        assert!(carlen_loss_beta(2.0, 5.0) > 6.0);
    }

    #[test]
    fn hessian_conventions() {
        let p = hessian_constants(1.0, HessianConvention::Poincare).unwrap();
        assert_eq!(p.alpha, 1.0);
        let l = hessian_constants(2.0, HessianConvention::LogSobolev).unwrap();
        assert_eq!((l.alpha, l.beta), (0.5, Some(1.0)));
        assert!(hessian_constants(0.0, HessianConvention::Poincare).is_err());
    }

    #[test]
    fn two_state_log_sobolev_constant() {
        let (q, mu) = two_state();
        let a = log_sobolev_constant_numeric_with(&q, &mu, 8, 1).unwrap();
        let b = log_sobolev_constant_numeric_with(&q, &mu, 8, 2).unwrap();
        let (ba, bb) = (a.beta.unwrap(), b.beta.unwrap());
        assert!((ba - bb).abs() < 1e-6, "{ba} {bb}");
        assert!((ba - 1.0).abs() < 1e-5);
        assert!(ba >= 2.0 * a.alpha);
    }
}
