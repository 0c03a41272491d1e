//! Functional-inequality constants of finite generators and the `Λ` bounds
//! they induce.
//!
//! Every quadratic form is evaluated in `L²(μ*)`. Self-adjoint parts are
//! turned into ordinary symmetric matrices by the similarity
//! `D^{1/2} · D^{-1/2}`, `D = diag μ*` (see [`crate::chain::symmetric_form`]),
//! and handed to a dense symmetric eigensolver.

mod harris;
mod sobolev;
mod variance;

pub use harris::{harris_xi, poincare_from_decay, HarrisParams};
pub use sobolev::{
    carlen_loss_beta, f_sobolev_lambda, f_sobolev_lambda_fn, hessian_constants,
    log_sobolev_constant_numeric, log_sobolev_constant_numeric_with, log_sobolev_lambda, FSobolevMap,
    HessianConvention, LogMap,
};
pub use variance::{
    asymptotic_variance, liapunov_bernstein_params, reversible_bernstein_params, LiapunovData,
};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::chain::{symmetric_form, GeneratorMatrix, Observable, StationaryMeasure};
use crate::divergence::{LambdaFunction, LambdaKind};
use crate::error::{Result, UqError};
use crate::scalar::Scalar;

/// Where a constant came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Spectral,
    Analytic,
    DecayFit,
    User,
    Numeric,
}

/// Poincaré constant `α` and, when known, log-Sobolev constant `β`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionalConstants<T> {
    pub alpha: T,
    pub beta: Option<T>,
    pub reversible: bool,
    pub provenance: Provenance,
}

impl<T: Scalar> FunctionalConstants<T> {
    pub fn new(alpha: T, beta: Option<T>, reversible: bool, provenance: Provenance) -> Result<Self> {
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(UqError::OutOfRange(format!("Poincaré constant {alpha} must be positive")));
        }
        if let Some(b) = beta {
            if !(b > T::zero()) {
                return Err(UqError::OutOfRange(format!("log-Sobolev constant {b} must be positive")));
            }
        }
        Ok(Self {
            alpha,
            beta,
            reversible,
            provenance,
        })
    }
}

impl<T: Scalar> Serialize for FunctionalConstants<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("FunctionalConstants", 3)?;
        st.serialize_field("alpha", &self.alpha.as_f64())?;
        st.serialize_field("beta", &self.beta.map(|b| b.as_f64()))?;
        st.serialize_field("provenance", &self.provenance)?;
        st.end()
    }
}

/// Parameters of a Bernstein-type bound `Λ(±c) ≤ σ²c²/(2(1 − cM±))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernsteinParams<T> {
    pub sigma2: T,
    pub m_plus: T,
    pub m_minus: T,
}

impl<T: Scalar> Serialize for BernsteinParams<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("BernsteinParams", 3)?;
        st.serialize_field("sigma2", &self.sigma2.as_f64())?;
        st.serialize_field("m_plus", &self.m_plus.as_f64())?;
        st.serialize_field("m_minus", &self.m_minus.as_f64())?;
        st.end()
    }
}

impl<T: Scalar> BernsteinParams<T> {
    pub fn lambda(&self) -> LambdaFunction<'static, T> {
        LambdaFunction::bernstein(self.sigma2, self.m_plus, self.m_minus)
    }
}

pub(crate) fn eigen<T: Scalar>(m: DMatrix<T>) -> Result<SymmetricEigen<T, nalgebra::Dyn>> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(UqError::EigenFailure("matrix has non-finite entries".into()));
    }
    SymmetricEigen::try_new(m, T::default_epsilon(), 0)
        .ok_or_else(|| UqError::EigenFailure("symmetric eigensolver did not converge".into()))
}

pub(crate) fn max_eigenvalue<T: Scalar>(m: DMatrix<T>) -> Result<T> {
    let e = eigen(m)?;
    Ok(e.eigenvalues.iter().fold(T::NEG_INFINITY, |a, &b| a.max(b)))
}

/// `κ(V)`: the top of the spectrum of the self-adjoint part of `A + V` in
/// `L²(μ*)`. It bounds the Feynman–Kac semigroup, `‖P_t^V‖ ≤ e^{tκ(V)}`.
pub fn kappa<T: Scalar>(a: &GeneratorMatrix<T>, v: &[T], mu: &StationaryMeasure<T>) -> Result<T> {
    max_eigenvalue(symmetric_form(a, mu, Some(v))?)
}

/// `Λ(c) = κ(c·f̂)`, the Feynman–Kac bound on the path-space CGF.
pub fn kappa_lambda<'a, T: Scalar>(
    a: &'a GeneratorMatrix<T>,
    f: &'a Observable<T>,
    mu: &'a StationaryMeasure<T>,
) -> Result<LambdaFunction<'a, T>> {
    let base = symmetric_form(a, mu, None)?;
    Ok(LambdaFunction::new(
        LambdaKind::Kappa,
        (T::NEG_INFINITY, T::INFINITY),
        move |c| {
            let mut m = base.clone();
            for (i, &x) in f.centered().iter().enumerate() {
                m[(i, i)] += c * x;
            }
            max_eigenvalue(m).unwrap_or(T::INFINITY)
        },
    ))
}

/// Spectral gap of the symmetrized generator and a gap eigenvector `g₂`
/// (in original coordinates, unit `L²(μ*)` norm).
pub fn spectral_gap<T: Scalar>(a: &GeneratorMatrix<T>, mu: &StationaryMeasure<T>) -> Result<(T, Vec<T>)> {
    let e = eigen(symmetric_form(a, mu, None)?)?;
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| e.eigenvalues[j].partial_cmp(&e.eigenvalues[i]).unwrap());
    let second = idx[1];
    let gap = -e.eigenvalues[second];
    let scale = (0..a.dim()).fold(T::one(), |m, i| m.max(a.exit_rate(i)));
    if !(gap > T::tol(1e-12) * scale) {
        return Err(UqError::ZeroGap);
    }
    let v = e.eigenvectors.column(second);
    let g = (0..a.dim())
        .map(|i| v[i] * (-mu.log_weights()[i] * T::lit(0.5)).exp())
        .collect();
    Ok((gap, g))
}

/// Tight Poincaré constant `α = 1/gap`.
pub fn poincare_constant<T: Scalar>(
    a: &GeneratorMatrix<T>,
    mu: &StationaryMeasure<T>,
) -> Result<FunctionalConstants<T>> {
    let (gap, _) = spectral_gap(a, mu)?;
    FunctionalConstants::new(
        T::one() / gap,
        None,
        a.is_reversible(mu),
        Provenance::Spectral,
    )
}

/// `σ² = 2α Var_{μ*}[f]`, `M± = α‖f̂±‖∞`.
pub fn bernstein_params_from_alpha<T: Scalar>(
    alpha: T,
    f: &Observable<T>,
    mu: &StationaryMeasure<T>,
) -> BernsteinParams<T> {
    BernsteinParams {
        sigma2: T::lit(2.0) * alpha * mu.variance(f.values()),
        m_plus: alpha * f.pos_sup(),
        m_minus: alpha * f.neg_sup(),
    }
}

/// Bernstein parameters from the spectral Poincaré constant.
pub fn poincare_bernstein_params<T: Scalar>(
    a: &GeneratorMatrix<T>,
    f: &Observable<T>,
    mu: &StationaryMeasure<T>,
) -> Result<BernsteinParams<T>> {
    mu.check_len(f.values().len())?;
    let c = poincare_constant(a, mu)?;
    Ok(bernstein_params_from_alpha(c.alpha, f, mu))
}

/// Perturbation bound `c²‖Bx₀‖² / (D − cB⁺)` on the top eigenvalue of
/// `−D P^⊥ + cB` for `0 ≤ c < D/B⁺`.
///
/// With `D = 1/α`, `‖Bx₀‖² = Var_{μ*}[f]` and `B⁺ = ‖f̂⁺‖∞` it bounds
/// `κ(c·f̂)`.
pub fn perturbation_kappa_bound<T: Scalar>(d: T, b_plus: T, b_x0_norm2: T, c: T) -> Result<T> {
    if !(d > T::zero()) || b_plus < T::zero() || b_x0_norm2 < T::zero() {
        return Err(UqError::OutOfRange("need D > 0, B⁺ ≥ 0, ‖Bx₀‖² ≥ 0".into()));
    }
    if c < T::zero() || (b_plus > T::zero() && c * b_plus >= d) {
        return Err(UqError::OutOfRange(format!("c = {c} outside [0, D/B⁺)")));
    }
    if c == T::zero() {
        return Ok(T::zero());
    }
    Ok(c * c * b_x0_norm2 / (d - c * b_plus))
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
    fn kappa_of_zero_potential_vanishes() {
        let (q, mu) = two_state();
        assert!(kappa(&q, &[0.0, 0.0], &mu).unwrap().abs() < 1e-15);
    }

    #[test]
    fn two_state_poincare() {
        let (q, mu) = two_state();
        let c = poincare_constant(&q, &mu).unwrap();
        assert!((c.alpha - 0.5).abs() < 1e-14);
        assert!(c.reversible);
        let f = center_observable(&[0.0, 1.0], &mu).unwrap();
        let p = poincare_bernstein_params(&q, &f, &mu).unwrap();
        assert!((p.sigma2 - 0.25).abs() < 1e-14);
        assert!((p.m_plus - 0.25).abs() < 1e-14);
        assert!((p.m_minus - 0.25).abs() < 1e-14);
    }

    #[test]
    fn constant_observable_gives_zero_params() {
        let (q, mu) = two_state();
        let f = center_observable(&[2.0, 2.0], &mu).unwrap();
        let p = poincare_bernstein_params(&q, &f, &mu).unwrap();
        assert_eq!((p.sigma2, p.m_plus, p.m_minus), (0.0, 0.0, 0.0));
    }

    #[test]
    fn perturbation_bound_two_state() {
        assert_eq!(perturbation_kappa_bound(2.0, 0.5, 0.25, 0.0).unwrap(), 0.0);
        let b = perturbation_kappa_bound(2.0, 0.5, 0.25, 1.0).unwrap();
        assert!((b - 1.0f64 / 6.0).abs() < 1e-15);
        let (q, mu) = two_state();
        let f = center_observable(&[0.0, 1.0], &mu).unwrap();
        let k = kappa(&q, f.centered(), &mu).unwrap();
        // oracle: eigenvalues of [[-1.5, 1], [1, -0.5]] are -1 ± √1.25
        assert!((k - (-1.0 + 1.25f64.sqrt())).abs() < 1e-14);
        assert!(k <= b);
        assert!(perturbation_kappa_bound(2.0, 0.5, 0.25, 4.0).is_err());
    }

    #[test]
    fn constants_json_shape() {
        let c = FunctionalConstants::new(3.0, None, true, Provenance::Spectral).unwrap();
        let v = serde_json::to_value(c).unwrap();
        assert_eq!(v["alpha"], 3.0);
        assert!(v["beta"].is_null());
        assert_eq!(v["provenance"], "spectral");
    }
}
