//! Relative-entropy rates between a base model and an alternative.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::chain::{GeneratorMatrix, StationaryMeasure, TransitionKernel};
use crate::divergence::relative_entropy;
use crate::error::{Result, UqError};
use crate::rng::{self, Rng};
use crate::scalar::{mean_and_std_error, pairwise_sum, Scalar};
use crate::simulate::{check_blowup, em_step, steps_for};
use crate::zoo::SdeModel;

/// Invariance residual above which a supplied alternative measure is rejected.
pub const INVARIANCE_TOL: f64 = 1e-8;
/// Time strata used for the within-step integral of the Euler–Maruyama bound.
pub const ONESTEP_STRATA: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    ExactFormula,
    MonteCarlo,
    TaylorBound,
}

impl Estimator {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ExactFormula => "exact-formula",
            Self::MonteCarlo => "monte-carlo",
            Self::TaylorBound => "taylor-bound",
        }
    }
}

/// Entropy per unit time plus a one-off initial term, so that over a horizon
/// `T` the budget is `rate + initial_term / T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyRate<T> {
    pub rate: T,
    pub initial_term: T,
    pub std_error: Option<T>,
    pub estimator: Estimator,
}

impl<T: Scalar> EntropyRate<T> {
    pub fn exact(rate: T, initial_term: T) -> Self {
        Self {
            rate,
            initial_term,
            std_error: None,
            estimator: Estimator::ExactFormula,
        }
    }

    /// `η = rate + initial_term / T`; the initial term is dropped when `T` is infinite.
    pub fn eta(&self, horizon: T) -> T {
        if horizon.is_finite() {
            self.rate + self.initial_term / horizon
        } else {
            self.rate
        }
    }

    /// [`eta`](Self::eta) raised by three standard errors for Monte Carlo
    /// estimates, so the budget is not understated by sampling noise.
    pub fn eta_upper(&self, horizon: T) -> T {
        self.eta(horizon) + T::lit(3.0) * self.std_error.unwrap_or(T::zero())
    }
}

impl<T: Scalar> Serialize for EntropyRate<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("EntropyRate", 4)?;
        st.serialize_field("rate", &self.rate.as_f64())?;
        st.serialize_field("initial_term", &self.initial_term.as_f64())?;
        st.serialize_field("std_error", &self.std_error.map(|e| e.as_f64()))?;
        st.serialize_field("estimator", &self.estimator)?;
        st.end()
    }
}

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate<T> {
    pub mean: T,
    pub std_error: T,
}

impl<T: Scalar> McEstimate<T> {
    fn from_samples(xs: &[T]) -> Self {
        let (mean, std_error) = mean_and_std_error(xs);
        Self { mean, std_error }
    }
}

fn check_invariant<T: Scalar>(q: &GeneratorMatrix<T>, mu: &StationaryMeasure<T>) -> Result<()> {
    mu.check_len(q.dim())?;
    let w = mu.weights();
    let n = q.dim();
    let mut worst = 0.0f64;
    for j in 0..n {
        let mut acc = T::zero();
        for (i, &wi) in w.iter().enumerate() {
            acc += wi * q.matrix()[(i, j)];
        }
        worst = worst.max(acc.as_f64().abs());
    }
    if worst > INVARIANCE_TOL {
        return Err(UqError::NotInvariant(worst));
    }
    Ok(())
}

fn jump_generator<T: Scalar>(lam: &[T], a: &TransitionKernel<T>) -> Result<GeneratorMatrix<T>> {
    let n = a.dim();
    if lam.len() != n {
        return Err(UqError::DimensionMismatch {
            expected: n,
            got: lam.len(),
        });
    }
    if let Some(i) = lam.iter().position(|&l| !(l > T::zero()) || !l.is_finite()) {
        return Err(UqError::InvalidModel(format!("jump rate at state {i} must be positive and finite")));
    }
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                q[(i, j)] = lam[i] * a.matrix()[(i, j)];
            }
        }
    }
    GeneratorMatrix::from_off_diagonal(a.states().to_vec(), q)
}

/// Entropy rate between jump processes with rates `λ̃, λ` and jump kernels
/// `ã, a`, under the alternative's stationary law `μ̃*`.
pub fn ctmc_relent_rate<T: Scalar>(
    lam_t: &[T],
    a_t: &TransitionKernel<T>,
    lam: &[T],
    a: &TransitionKernel<T>,
    mu_t: &StationaryMeasure<T>,
) -> Result<EntropyRate<T>> {
    let n = a.dim();
    if a_t.dim() != n {
        return Err(UqError::DimensionMismatch {
            expected: n,
            got: a_t.dim(),
        });
    }
    if lam.len() != n {
        return Err(UqError::DimensionMismatch {
            expected: n,
            got: lam.len(),
        });
    }
    for x in 0..n {
        for z in 0..n {
            if (a.matrix()[(x, z)] == T::zero()) != (a_t.matrix()[(x, z)] == T::zero()) {
                return Err(UqError::SupportMismatch(x, z));
            }
        }
    }
    check_invariant(&jump_generator(lam_t, a_t)?, mu_t)?;
    jump_generator(lam, a)?;
    let w = mu_t.weights();
    let terms: Vec<T> = (0..n)
        .map(|x| {
            let mut jump = T::zero();
            for z in 0..n {
                let at = a_t.matrix()[(x, z)];
                if at > T::zero() {
                    jump += at * (lam_t[x] * at / (lam[x] * a.matrix()[(x, z)])).ln();
                }
            }
            w[x] * (lam_t[x] * jump - (lam_t[x] - lam[x]))
        })
        .collect();
    Ok(EntropyRate::exact(pairwise_sum(&terms).max(T::zero()), T::zero()))
}

/// Generator form of [`ctmc_relent_rate`]:
/// `Σ_x μ̃*(x) Σ_{z≠x} [q̃ log(q̃/q) − q̃ + q]`.
pub fn ctmc_relent_rate_generators<T: Scalar>(
    q_t: &GeneratorMatrix<T>,
    q: &GeneratorMatrix<T>,
    mu_t: &StationaryMeasure<T>,
) -> Result<EntropyRate<T>> {
    let n = q.dim();
    if q_t.dim() != n {
        return Err(UqError::DimensionMismatch {
            expected: n,
            got: q_t.dim(),
        });
    }
    for x in 0..n {
        for z in 0..n {
            if x != z && (q.matrix()[(x, z)] == T::zero()) != (q_t.matrix()[(x, z)] == T::zero()) {
                return Err(UqError::SupportMismatch(x, z));
            }
        }
    }
    check_invariant(q_t, mu_t)?;
    let w = mu_t.weights();
    let terms: Vec<T> = (0..n)
        .map(|x| {
            let mut acc = T::zero();
            for z in 0..n {
                let (a, b) = (q_t.matrix()[(x, z)], q.matrix()[(x, z)]);
                if x != z && a > T::zero() {
                    acc += a * (a / b).ln() - a + b;
                }
            }
            w[x] * acc
        })
        .collect();
    Ok(EntropyRate::exact(pairwise_sum(&terms).max(T::zero()), T::zero()))
}

/// Per-step entropy between kernels, `Σ_x μ̃*(x) R(p̃(x,·)‖p(x,·))`, with
/// `R(μ̃*‖μ*)` as the initial term when `μ*` is supplied.
pub fn dtmc_relent_rate<T: Scalar>(
    p_t: &TransitionKernel<T>,
    p: &TransitionKernel<T>,
    mu_t: &StationaryMeasure<T>,
    mu: Option<&StationaryMeasure<T>>,
) -> Result<EntropyRate<T>> {
    let n = p.dim();
    if p_t.dim() != n {
        return Err(UqError::DimensionMismatch {
            expected: n,
            got: p_t.dim(),
        });
    }
    for x in 0..n {
        for z in 0..n {
            if p_t.matrix()[(x, z)] > T::zero() && p.matrix()[(x, z)] == T::zero() {
                return Err(UqError::SupportMismatch(x, z));
            }
        }
    }
    check_invariant(&crate::simulate::uniformize(p_t, T::one()), mu_t)?;
    let w = mu_t.weights();
    let terms: Vec<T> = (0..n)
        .filter(|&x| w[x] > T::zero())
        .map(|x| w[x] * relative_entropy(&p_t.row(x), &p.row(x)))
        .collect();
    let initial = match mu {
        Some(m) => {
            m.check_len(n)?;
            for (i, (&a, &b)) in w.iter().zip(m.weights()).enumerate() {
                if a > T::zero() && b == T::zero() {
                    return Err(UqError::SupportMismatch(i, i));
                }
            }
            relative_entropy(w, m.weights()).max(T::zero())
        }
        None => T::zero(),
    };
    Ok(EntropyRate::exact(pairwise_sum(&terms).max(T::zero()), initial))
}

fn require_paths(n: usize) -> Result<()> {
    if n < 2 {
        return Err(UqError::InsufficientSamples(format!("{n} paths; at least 2 are needed")));
    }
    Ok(())
}

fn norm2<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, &x| a + x * x)
}

fn mc_rate<T: Scalar>(samples: Vec<Result<T>>, estimator: Estimator) -> Result<EntropyRate<T>> {
    let xs = samples.into_iter().collect::<Result<Vec<T>>>()?;
    let est = McEstimate::from_samples(&xs);
    Ok(EntropyRate {
        rate: est.mean,
        initial_term: T::zero(),
        std_error: Some(est.std_error),
        estimator,
    })
}

/// Time-averaged `½ E‖β(X)‖²` along Euler–Maruyama paths of `sde` started
/// from its stationary sampler.
pub fn girsanov_rate_mc<T: Scalar>(
    beta: &(dyn Fn(&[T]) -> Vec<T> + Sync),
    sde: &SdeModel<T>,
    t_end: T,
    dt: T,
    n_paths: usize,
    seed: u64,
) -> Result<EntropyRate<T>> {
    let init = sde
        .stationary
        .clone()
        .ok_or_else(|| UqError::InvalidModel(format!("{} has no stationary sampler", sde.name)))?;
    girsanov_rate_mc_from(beta, &*sde.drift, &*init, t_end, dt, n_paths, seed)
}

/// [`girsanov_rate_mc`] with explicit drift and initial law.
pub fn girsanov_rate_mc_from<T: Scalar>(
    beta: &(dyn Fn(&[T]) -> Vec<T> + Sync),
    drift: &(dyn Fn(&[T]) -> Vec<T> + Sync),
    init: &(dyn Fn(&mut Rng) -> Vec<T> + Sync),
    t_end: T,
    dt: T,
    n_paths: usize,
    seed: u64,
) -> Result<EntropyRate<T>> {
    require_paths(n_paths)?;
    let steps = steps_for(t_end, dt)?;
    let half = T::lit(0.5);
    let samples = rng::par_paths(n_paths, seed, |_, r| {
        let mut x = init(r);
        let mut vals = Vec::with_capacity(steps);
        for k in 0..steps {
            vals.push(half * norm2(&beta(&x)));
            em_step(drift, &mut x, dt, r);
            check_blowup(&x, k + 1)?;
        }
        Ok(pairwise_sum(&vals) / T::from_usize_lossy(steps))
    });
    mc_rate(samples, Estimator::MonteCarlo)
}

/// One draw of `½ ∫₀^Δt ‖b(y) − b(y + b(y)s + W_s)‖² ds` by the midpoint
/// rule on [`ONESTEP_STRATA`] strata. Returns the value and `W_Δt`.
fn onestep_draw<T: Scalar>(b: &dyn Fn(&[T]) -> Vec<T>, y: &[T], by: &[T], dt: T, r: &mut Rng) -> (T, Vec<T>) {
    let n = y.len();
    let h = dt / T::from_usize_lossy(ONESTEP_STRATA);
    let half_sd = (h * T::lit(0.5)).sqrt();
    let mut w = vec![T::zero(); n];
    let mut pt = vec![T::zero(); n];
    let mut acc = T::zero();
    for k in 0..ONESTEP_STRATA {
        // advance W to the stratum midpoint
        for wi in &mut w {
            let z: f64 = StandardNormal.sample(r);
            *wi += half_sd * T::lit(z);
        }
        let s = h * (T::from_usize_lossy(k) + T::lit(0.5));
        for i in 0..n {
            pt[i] = y[i] + by[i] * s + w[i];
        }
        let bs = b(&pt);
        acc += by.iter().zip(&bs).fold(T::zero(), |a, (&u, &v)| a + (u - v) * (u - v));
        for wi in &mut w {
            let z: f64 = StandardNormal.sample(r);
            *wi += half_sd * T::lit(z);
        }
    }
    (acc * h * T::lit(0.5), w)
}

/// Monte Carlo value of the one-step Euler–Maruyama entropy bound at `y`.
pub fn em_relent_onestep_mc<T: Scalar>(
    b: &(dyn Fn(&[T]) -> Vec<T> + Sync),
    y: &[T],
    dt: T,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate<T>> {
    require_paths(n_samples)?;
    if !(dt > T::zero()) {
        return Err(UqError::OutOfRange("dt must be positive".into()));
    }
    let by = b(y);
    let xs = rng::par_paths(n_samples, seed, |_, r| onestep_draw(b, y, &by, dt, r).0);
    let est = McEstimate::from_samples(&xs);
    if !est.mean.is_finite() {
        return Err(UqError::EvaluationFailure(est.mean.as_f64()));
    }
    Ok(est)
}

/// Entropy rate per unit time between the exact SDE and its Euler–Maruyama
/// discretization, averaging the one-step bound over simulated EM marginals.
pub fn em_relent_rate<T: Scalar>(
    b: &(dyn Fn(&[T]) -> Vec<T> + Sync),
    init: &(dyn Fn(&mut Rng) -> Vec<T> + Sync),
    dt: T,
    t_end: T,
    n_paths: usize,
    seed: u64,
) -> Result<EntropyRate<T>> {
    require_paths(n_paths)?;
    let steps = steps_for(t_end, dt)?;
    let samples = rng::par_paths(n_paths, seed, |_, r| {
        let mut x = init(r);
        let mut vals = Vec::with_capacity(steps);
        for k in 0..steps {
            let bx = b(&x);
            let (v, w) = onestep_draw(b, &x, &bx, dt, r);
            vals.push(v);
            for i in 0..x.len() {
                x[i] += bx[i] * dt + w[i];
            }
            check_blowup(&x, k + 1)?;
        }
        Ok(pairwise_sum(&vals) / (T::from_usize_lossy(steps) * dt))
    });
    mc_rate(samples, Estimator::MonteCarlo)
}

/// `Γ((n+3)/2) / Γ(n/2)` through the two-step recursion of `Γ((n+1)/2)/Γ(n/2)`.
pub fn gamma_ratio(n: usize) -> f64 {
    assert!(n >= 1);
    let pi = std::f64::consts::PI;
    let mut r = if n % 2 == 1 { 1.0 / pi.sqrt() } else { pi.sqrt() / 2.0 };
    let mut k = if n % 2 == 1 { 1 } else { 2 };
    while k < n {
        r *= (k + 1) as f64 / k as f64;
        k += 2;
    }
    r * (n + 1) as f64 / 2.0
}

/// Inputs of the Taylor-expanded Euler–Maruyama entropy bound.
pub struct TaylorInputs<'a, T: Scalar> {
    pub drift: &'a (dyn Fn(&[T]) -> Vec<T> + Sync),
    pub jacobian: &'a (dyn Fn(&[T]) -> DMatrix<T> + Sync),
    /// Lipschitz constant of the Jacobian.
    pub lipschitz: T,
    /// Global bound on the operator norm of the Jacobian.
    pub jacobian_sup: T,
}

/// A-priori bound on the Euler–Maruyama entropy rate, each expectation
/// estimated along EM paths.
pub fn em_relent_taylor_bound<T: Scalar>(
    inputs: &TaylorInputs<'_, T>,
    init: &(dyn Fn(&mut Rng) -> Vec<T> + Sync),
    dt: T,
    t_end: T,
    n_paths: usize,
    seed: u64,
) -> Result<EntropyRate<T>> {
    require_paths(n_paths)?;
    let steps = steps_for(t_end, dt)?;
    let l = inputs.lipschitz;
    let dsup = inputs.jacobian_sup;
    if l < T::zero() || dsup < T::zero() {
        return Err(UqError::OutOfRange("Lipschitz and sup constants must be nonnegative".into()));
    }
    let samples = rng::par_paths(n_paths, seed, |_, r| {
        let mut x = init(r);
        let mut vals = Vec::with_capacity(steps);
        for k in 0..steps {
            let bx = (inputs.drift)(&x);
            let jac = (inputs.jacobian)(&x);
            let frob = jac.iter().fold(T::zero(), |a, &v| a + v * v);
            let bvec = nalgebra::DVector::from_column_slice(&bx);
            let dbb = (&jac * &bvec).norm_squared();
            let bn = norm2(&bx).sqrt();
            let dt2 = dt * dt;
            vals.push(
                dt / T::lit(4.0) * frob
                    + dt2 / T::lit(6.0) * dbb
                    + l * dsup / T::lit(2.0) * bn.powi(3) * dt2 * dt
                    + l * l / T::lit(5.0) * bn.powi(4) * dt2 * dt2,
            );
            em_step(inputs.drift, &mut x, dt, r);
            check_blowup(&x, k + 1)?;
        }
        Ok(pairwise_sum(&vals) / T::from_usize_lossy(steps))
    });
    let n_dim = {
        let mut r = rng::stream(seed, u64::MAX);
        init(&mut r).len()
    };
    let nf = T::from_usize_lossy(n_dim);
    let constant = T::lit(8.0 * 2f64.sqrt() * gamma_ratio(n_dim.max(1)) / 5.0) * l * dsup * dt.powf(T::lit(1.5))
        + nf * (nf + T::lit(2.0)) * l * l * dt * dt / T::lit(3.0);
    let mut rate = mc_rate(samples, Estimator::TaylorBound)?;
    rate.rate += constant;
    Ok(rate)
}

/// `R(N(a𝟙, sI) ‖ N(b𝟙, tI))` in dimension `n`.
pub fn isotropic_gaussian_kl<T: Scalar>(n: usize, mean_t: T, var_t: T, mean: T, var: T) -> T {
    let nf = T::from_usize_lossy(n);
    let d = mean_t - mean;
    T::lit(0.5) * nf * (var_t / var - T::one() + (var / var_t).ln()) + T::lit(0.5) * nf * d * d / var
}

/// `R(μ̃‖μ) = E_μ̃[φ − φ̃]` for densities `e^{−φ̃}`, `e^{−φ}` (both normalized).
pub fn init_relent_mc<T: Scalar>(
    phi_t: &(dyn Fn(&[T]) -> T + Sync),
    phi: &(dyn Fn(&[T]) -> T + Sync),
    sampler: &(dyn Fn(&mut Rng) -> Vec<T> + Sync),
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate<T>> {
    require_paths(n_samples)?;
    let xs = rng::par_paths(n_samples, seed, |_, r| {
        let x = sampler(r);
        phi(&x) - phi_t(&x)
    });
    Ok(McEstimate::from_samples(&xs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::invariant_measure;

    fn two_state(l0: f64, l1: f64) -> (Vec<f64>, TransitionKernel<f64>) {
        let a = TransitionKernel::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        (vec![l0, l1], a)
    }

    #[test]
    fn two_state_single_term() {
        let (lt, a) = two_state(1.2, 1.0);
        let (l, _) = two_state(1.0, 1.0);
        let q_t = jump_generator(&lt, &a).unwrap();
        let mu_t = invariant_measure(&q_t).unwrap();
        let r = ctmc_relent_rate(&lt, &a, &l, &a, &mu_t).unwrap();
        let want = mu_t.weights()[0] * (1.2 * 1.2f64.ln() - 0.2);
        assert!((r.rate - want).abs() < 1e-14);
        let q = jump_generator(&l, &a).unwrap();
        let g = ctmc_relent_rate_generators(&q_t, &q, &mu_t).unwrap();
        assert!((g.rate - want).abs() < 1e-14);
    }

    #[test]
    fn identical_chains_zero() {
        let (l, a) = two_state(2.0, 0.5);
        let mu = invariant_measure(&jump_generator(&l, &a).unwrap()).unwrap();
        assert_eq!(ctmc_relent_rate(&l, &a, &l, &a, &mu).unwrap().rate, 0.0);
    }

    #[test]
    fn wrong_measure_rejected() {
        let (l, a) = two_state(2.0, 0.5);
        let mu = StationaryMeasure::from_weights(&[0.5, 0.5], 0).unwrap();
        assert!(matches!(ctmc_relent_rate(&l, &a, &l, &a, &mu), Err(UqError::NotInvariant(_))));
    }

    #[test]
    fn support_mismatch() {
        let p = TransitionKernel::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        let pt = TransitionKernel::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let mu = invariant_measure(&pt).unwrap();
        assert!(matches!(dtmc_relent_rate(&pt, &p, &mu, None), Err(UqError::SupportMismatch(1, 1))));
    }

    #[test]
    fn gamma_ratio_values() {
        // Γ(2)/Γ(1/2) and Γ(5/2)/Γ(1)
        assert!((gamma_ratio(1) - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert!((gamma_ratio(2) - 0.75 * std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert!((gamma_ratio(3) - 4.0 / std::f64::consts::PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn constant_drift_cases_vanish() {
        let b = |x: &[f64]| vec![1.0; x.len()];
        let e = em_relent_onestep_mc(&b, &[0.3, 0.1], 0.1, 8, 1).unwrap();
        assert_eq!(e.mean, 0.0);
        let beta = |x: &[f64]| vec![0.3; x.len()];
        let ou = |x: &[f64]| x.iter().map(|v| -v).collect::<Vec<_>>();
        let init = |_: &mut Rng| vec![0.0, 0.0];
        let g = girsanov_rate_mc_from(&beta, &ou, &init, 1.0, 0.1, 4, 2).unwrap();
        assert!((g.rate - 0.09).abs() < 1e-14);
        assert!(g.std_error.unwrap() < 1e-14);
    }
}
