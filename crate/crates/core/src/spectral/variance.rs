//! Asymptotic variance and the reversible / Liapunov Bernstein packages.

use nalgebra::DVector;

use super::{poincare_constant, BernsteinParams};
use crate::chain::{symmetric_form, GeneratorMatrix, Observable, StationaryMeasure, REVERSIBILITY_TOL};
use crate::error::{Result, UqError};
use crate::scalar::Scalar;

fn require_reversible<T: Scalar>(a: &GeneratorMatrix<T>, mu: &StationaryMeasure<T>) -> Result<()> {
    mu.check_matches(a)?;
    let r = a.reversibility_residual(mu);
    if r > T::tol(REVERSIBILITY_TOL) {
        return Err(UqError::NotReversible(r.as_f64()));
    }
    Ok(())
}

/// CLT variance `σ²(f) = 2⟨(−A)⁻¹f̂, f̂⟩_{L²(μ*)}` of a reversible chain.
///
/// In symmetric coordinates the Poisson equation becomes
/// `(−S + uuᵀ) y = h` with `u = √μ*`, `h = √μ* ⊙ f̂`; the rank-one term
/// removes the null direction and leaves a positive definite system.
pub fn asymptotic_variance<T: Scalar>(
    a: &GeneratorMatrix<T>,
    f: &Observable<T>,
    mu: &StationaryMeasure<T>,
) -> Result<T> {
    require_reversible(a, mu)?;
    mu.check_len(f.values().len())?;
    if f.is_constant() {
        return Ok(T::zero());
    }
    let n = a.dim();
    let u: Vec<T> = mu
        .log_weights()
        .iter()
        .map(|&l| (l * T::lit(0.5)).exp())
        .collect();
    let mut m = -symmetric_form(a, mu, None)?;
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] += u[i] * u[j];
        }
    }
    let h = DVector::from_iterator(n, (0..n).map(|i| u[i] * f.centered()[i]));
    let chol = m.cholesky().ok_or(UqError::SingularPoisson)?;
    let y = chol.solve(&h);
    Ok((T::lit(2.0) * y.dot(&h)).max(T::zero()))
}

/// `σ² = σ²(f)`, `M± = α‖f̂±‖∞` for reversible chains.
pub fn reversible_bernstein_params<T: Scalar>(
    a: &GeneratorMatrix<T>,
    f: &Observable<T>,
    mu: &StationaryMeasure<T>,
) -> Result<BernsteinParams<T>> {
    let sigma2 = asymptotic_variance(a, f, mu)?;
    let alpha = poincare_constant(a, mu)?.alpha;
    Ok(BernsteinParams {
        sigma2,
        m_plus: alpha * f.pos_sup(),
        m_minus: alpha * f.neg_sup(),
    })
}

/// Liapunov function `U` with `−A[U]/U ≥ φ − b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiapunovData<T> {
    pub u: Vec<T>,
    pub phi: Vec<T>,
    pub b: T,
}

impl<T: Scalar> LiapunovData<T> {
    pub fn new(u: Vec<T>, phi: Vec<T>, b: T) -> Result<Self> {
        if u.len() != phi.len() {
            return Err(UqError::DimensionMismatch {
                expected: u.len(),
                got: phi.len(),
            });
        }
        if let Some(i) = u.iter().position(|&x| !(x > T::zero()) || !x.is_finite()) {
            return Err(UqError::OutOfRange(format!("U({i}) must be positive and finite")));
        }
        if let Some(i) = phi.iter().position(|&x| !(x > T::zero())) {
            return Err(UqError::OutOfRange(format!("phi({i}) must be positive")));
        }
        if b < T::zero() {
            return Err(UqError::OutOfRange("b must be nonnegative".into()));
        }
        Ok(Self { u, phi, b })
    }

    /// Checks `−(AU)_i/U_i ≥ φ_i − b` in every state.
    pub fn verify(&self, a: &GeneratorMatrix<T>) -> Result<()> {
        let n = a.dim();
        if self.u.len() != n {
            return Err(UqError::DimensionMismatch {
                expected: n,
                got: self.u.len(),
            });
        }
        let q = a.matrix();
        for i in 0..n {
            let lhs = -(0..n).fold(T::zero(), |s, j| s + q[(i, j)] * (self.u[j] / self.u[i]));
            let rhs = self.phi[i] - self.b;
            let tol = T::tol(1e-10) * T::one().max(rhs.abs()).max(a.exit_rate(i));
            if lhs < rhs - tol {
                return Err(UqError::LiapunovViolated {
                    state: i,
                    slack: (lhs - rhs).as_f64(),
                });
            }
        }
        Ok(())
    }
}

/// `σ² = σ²(f)`, `M± = (1 + αb)‖f̂±/φ‖∞`.
pub fn liapunov_bernstein_params<T: Scalar>(
    a: &GeneratorMatrix<T>,
    f: &Observable<T>,
    mu: &StationaryMeasure<T>,
    lia: &LiapunovData<T>,
    alpha: T,
) -> Result<BernsteinParams<T>> {
    lia.verify(a)?;
    let sigma2 = asymptotic_variance(a, f, mu)?;
    let scale = T::one() + alpha * lia.b;
    let (mut mp, mut mm) = (T::zero(), T::zero());
    for (&x, &p) in f.centered().iter().zip(&lia.phi) {
        mp = mp.max(x.max(T::zero()) / p);
        mm = mm.max((-x).max(T::zero()) / p);
    }
    Ok(BernsteinParams {
        sigma2,
        m_plus: scale * mp,
        m_minus: scale * mm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{center_observable, invariant_measure};

    #[test]
    fn two_state_variance() {
        let q = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let mu = invariant_measure(&q).unwrap();
        let f = center_observable(&[0.0, 1.0], &mu).unwrap();
        // oracle: g = (−¼, ¼) solves −Qg = f̂, and 2⟨g, f̂⟩ = ¼
        assert!((asymptotic_variance(&q, &f, &mu).unwrap() - 0.25f64).abs() < 1e-14);
        let c = center_observable(&[1.0, 1.0], &mu).unwrap();
        assert_eq!(asymptotic_variance(&q, &c, &mu).unwrap(), 0.0);
    }

    #[test]
    fn non_reversible_is_rejected() {
        let q = GeneratorMatrix::from_rows(&[
            vec![-1.0, 1.0, 0.0],
            vec![0.0, -1.0, 1.0],
            vec![1.0, 0.0, -1.0],
        ])
        .unwrap();
        let mu = invariant_measure(&q).unwrap();
        let f = center_observable(&[0.0, 1.0, 2.0], &mu).unwrap();
        assert!(matches!(asymptotic_variance(&q, &f, &mu), Err(UqError::NotReversible(_))));
    }

    #[test]
    fn unit_phi_is_sup_norm_fallback() {
        let q = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let mu = invariant_measure(&q).unwrap();
        let f = center_observable(&[0.0, 1.0], &mu).unwrap();
        let lia = LiapunovData::new(vec![1.0, 1.0], vec![1.0, 1.0], 1.0).unwrap();
        // −A[1]/1 = 0 ≥ 1 − 1
        let p = liapunov_bernstein_params(&q, &f, &mu, &lia, 0.0).unwrap();
        assert!((p.m_plus - 0.5f64).abs() < 1e-15);
        assert!((p.m_minus - 0.5f64).abs() < 1e-15);
        let bad = LiapunovData::new(vec![1.0, 1.0], vec![2.0, 2.0], 1.0).unwrap();
        assert!(matches!(bad.verify(&q), Err(UqError::LiapunovViolated { state: 0, .. })));
    }
}
