//! Path simulation (jump processes, uniformized kernels, Euler–Maruyama) and
//! the harness that compares certified bounds with Monte Carlo bias.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::bound::UqBoundReport;
use crate::chain::{GeneratorMatrix, Model, StationaryMeasure, TransitionKernel};
use crate::error::{Result, UqError};
use crate::rng::{self, Rng};
use crate::scalar::{mean_and_std_error, Scalar};

/// Default blow-up radius for SDE paths.
pub const BLOWUP_CAP: f64 = 1e8;

/// `Q = λ(P − I)`. The diagonal is recomputed from the off-diagonal mass so
/// rows sum to zero exactly.
pub fn uniformize<T: Scalar>(p: &TransitionKernel<T>, lam_rate: T) -> GeneratorMatrix<T> {
    let n = p.dim();
    let mut q = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                q[(i, j)] = lam_rate * p.matrix()[(i, j)];
            }
        }
    }
    GeneratorMatrix::from_off_diagonal(p.states().to_vec(), q)
        .expect("a scaled stochastic matrix minus identity is a generator")
}

/// Multiplies every positive off-diagonal rate by an independent factor
/// uniform in `[1 − ε, 1 + ε]`, reproducibly from `seed`.
pub fn perturb_generator<T: Scalar>(q: &GeneratorMatrix<T>, eps: T, seed: u64) -> Result<GeneratorMatrix<T>> {
    if !(eps >= T::zero() && eps < T::one()) {
        return Err(UqError::OutOfRange(format!("perturbation size {eps} must lie in [0, 1)")));
    }
    let n = q.dim();
    let mut r = rng::stream(seed, 0);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let x = q.matrix()[(i, j)];
            if i != j && x > T::zero() {
                let u = T::lit(r.random_range(-1.0..=1.0));
                m[(i, j)] = x * (T::one() + eps * u);
            }
        }
    }
    GeneratorMatrix::from_off_diagonal(q.states().to_vec(), m)
}

/// Initial condition of a simulated path.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialLaw<T> {
    State(usize),
    /// Probability vector over states.
    Law(Vec<T>),
}

/// Piecewise-constant path: `states[k]` holds on `[jump_times[k], jump_times[k+1])`,
/// the last state until `horizon`. `jump_times[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample<T> {
    pub jump_times: Vec<T>,
    pub states: Vec<usize>,
    pub horizon: T,
}

/// Sparse jump structure of a generator for fast Gillespie sampling.
#[derive(Debug, Clone)]
pub struct JumpTable<T> {
    rates: Vec<T>,
    targets: Vec<Vec<usize>>,
    cdfs: Vec<Vec<T>>,
}

impl<T: Scalar> JumpTable<T> {
    pub fn new(q: &GeneratorMatrix<T>) -> Self {
        let n = q.dim();
        let m = q.matrix();
        let mut rates = Vec::with_capacity(n);
        let mut targets = Vec::with_capacity(n);
        let mut cdfs = Vec::with_capacity(n);
        for i in 0..n {
            let mut t = Vec::new();
            let mut c = Vec::new();
            let mut acc = T::zero();
            for j in 0..n {
                if j != i && m[(i, j)] > T::zero() {
                    acc += m[(i, j)];
                    t.push(j);
                    c.push(acc);
                }
            }
            for x in &mut c {
                *x /= acc;
            }
            rates.push(acc);
            targets.push(t);
            cdfs.push(c);
        }
        Self { rates, targets, cdfs }
    }

    #[inline]
    fn next_state(&self, i: usize, rng: &mut Rng) -> usize {
        let u = T::lit(rng.random::<f64>());
        let cdf = &self.cdfs[i];
        let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        self.targets[i][k]
    }

    #[inline]
    fn holding(&self, i: usize, rng: &mut Rng) -> T {
        // 1 − U lies in (0, 1]
        let u: f64 = 1.0 - rng.random::<f64>();
        -T::lit(u.ln()) / self.rates[i]
    }

    /// Time average of `f` over `[0, t_end]` without storing the path.
    pub fn ergodic_average(&self, f: &[T], start: usize, t_end: T, rng: &mut Rng) -> T {
        let mut t = T::zero();
        let mut x = start;
        let mut acc = T::zero();
        loop {
            if self.rates[x] == T::zero() {
                acc += f[x] * (t_end - t);
                break;
            }
            let h = self.holding(x, rng);
            if t + h >= t_end {
                acc += f[x] * (t_end - t);
                break;
            }
            acc += f[x] * h;
            t += h;
            x = self.next_state(x, rng);
        }
        acc / t_end
    }

    pub fn path(&self, start: usize, t_end: T, rng: &mut Rng) -> PathSample<T> {
        let mut jump_times = vec![T::zero()];
        let mut states = vec![start];
        let mut t = T::zero();
        let mut x = start;
        // an absorbing state simply holds until the horizon
        while self.rates[x] > T::zero() {
            let h = self.holding(x, rng);
            if t + h >= t_end {
                break;
            }
            t += h;
            x = self.next_state(x, rng);
            jump_times.push(t);
            states.push(x);
        }
        PathSample {
            jump_times,
            states,
            horizon: t_end,
        }
    }
}

fn draw_initial<T: Scalar>(init: &InitialLaw<T>, n: usize, rng: &mut Rng) -> Result<usize> {
    match init {
        InitialLaw::State(s) if *s < n => Ok(*s),
        InitialLaw::State(s) => Err(UqError::DimensionMismatch { expected: n, got: *s }),
        InitialLaw::Law(w) => {
            if w.len() != n {
                return Err(UqError::DimensionMismatch {
                    expected: n,
                    got: w.len(),
                });
            }
            let u = T::lit(rng.random::<f64>());
            let mut acc = T::zero();
            for (i, &p) in w.iter().enumerate() {
                acc += p;
                if u < acc {
                    return Ok(i);
                }
            }
            Ok(w.iter().rposition(|&p| p > T::zero()).unwrap_or(n - 1))
        }
    }
}

/// Gillespie path of `q` on `[0, t_end]`, reproducible by `seed`.
pub fn simulate_ctmc<T: Scalar>(
    q: &GeneratorMatrix<T>,
    init: &InitialLaw<T>,
    t_end: T,
    seed: u64,
) -> Result<PathSample<T>> {
    if !(t_end > T::zero()) {
        return Err(UqError::OutOfRange("horizon must be positive".into()));
    }
    let mut r = rng::stream(seed, 0);
    let start = draw_initial(init, q.dim(), &mut r)?;
    Ok(JumpTable::new(q).path(start, t_end, &mut r))
}

/// Exact time average `(1/T)∫₀ᵀ f(X_t) dt` of a piecewise-constant path.
pub fn ergodic_average<T: Scalar>(path: &PathSample<T>, f: &[T]) -> T {
    let k = path.states.len();
    let mut acc = T::zero();
    for i in 0..k {
        let end = if i + 1 < k { path.jump_times[i + 1] } else { path.horizon };
        acc += f[path.states[i]] * (end - path.jump_times[i]);
    }
    acc / path.horizon
}

/// Per-path ergodic averages of `f` over `n_paths` independent paths of a
/// model (kernels are run through their rate-one uniformization).
pub fn simulate_ergodic_averages<T: Scalar>(
    model: &Model<T>,
    f: &[T],
    init: &InitialLaw<T>,
    t_end: T,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<T>> {
    if f.len() != model.dim() {
        return Err(UqError::DimensionMismatch {
            expected: model.dim(),
            got: f.len(),
        });
    }
    if !(t_end > T::zero()) {
        return Err(UqError::OutOfRange("horizon must be positive".into()));
    }
    let table = JumpTable::new(&model.generator());
    let n = model.dim();
    if let InitialLaw::State(s) = init {
        if *s >= n {
            return Err(UqError::DimensionMismatch { expected: n, got: *s });
        }
    }
    let out = rng::par_paths(n_paths, seed, |_, r| {
        let start = draw_initial(init, n, r).unwrap_or(0);
        table.ergodic_average(f, start, t_end, r)
    });
    Ok(out)
}

/// Euler–Maruyama path `x_{k+1} = x_k + b(x_k)Δt + ΔW_k`, `N + 1` points.
pub fn simulate_em<T: Scalar>(
    drift: &dyn Fn(&[T]) -> Vec<T>,
    x0: &[T],
    dt: T,
    n_steps: usize,
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    if !(dt > T::zero()) {
        return Err(UqError::OutOfRange("dt must be positive".into()));
    }
    let mut r = rng::stream(seed, 0);
    let mut path = Vec::with_capacity(n_steps + 1);
    let mut x = x0.to_vec();
    path.push(x.clone());
    for step in 1..=n_steps {
        em_step(drift, &mut x, dt, &mut r);
        check_blowup(&x, step)?;
        path.push(x.clone());
    }
    Ok(path)
}

/// One Euler–Maruyama step in place.
pub fn em_step<T: Scalar>(drift: &dyn Fn(&[T]) -> Vec<T>, x: &mut [T], dt: T, r: &mut Rng) {
    let b = drift(x);
    let sd = dt.sqrt();
    for (xi, bi) in x.iter_mut().zip(b) {
        let z: f64 = StandardNormal.sample(r);
        *xi += bi * dt + sd * T::lit(z);
    }
}

pub(crate) fn check_blowup<T: Scalar>(x: &[T], step: usize) -> Result<()> {
    let norm = x.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
    if !(norm <= T::lit(BLOWUP_CAP)) {
        return Err(UqError::SimulationBlowup {
            step,
            cap: BLOWUP_CAP,
        });
    }
    Ok(())
}

/// Per-path time averages `(Δt/T) Σ_k f(x_k)` of an SDE observable along
/// Euler–Maruyama paths started from `init`.
pub fn simulate_sde_averages<T: Scalar>(
    drift: &(dyn Fn(&[T]) -> Vec<T> + Sync),
    f: &(dyn Fn(&[T]) -> T + Sync),
    init: &(dyn Fn(&mut Rng) -> Vec<T> + Sync),
    t_end: T,
    dt: T,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<T>> {
    let steps = steps_for(t_end, dt)?;
    let out = rng::par_paths(n_paths, seed, |_, r| -> Result<T> {
        let mut x = init(r);
        let mut acc = T::zero();
        for k in 0..steps {
            acc += f(&x);
            em_step(drift, &mut x, dt, r);
            check_blowup(&x, k + 1)?;
        }
        Ok(acc / T::from_usize_lossy(steps))
    });
    out.into_iter().collect()
}

/// Number of steps `T/Δt`, which must be a whole number.
pub fn steps_for<T: Scalar>(t_end: T, dt: T) -> Result<usize> {
    if !(dt > T::zero()) || !(t_end > T::zero()) {
        return Err(UqError::OutOfRange("T and dt must be positive".into()));
    }
    let ratio = t_end / dt;
    let n = ratio.round();
    if (ratio - n).abs() > T::tol(1e-9) * n.max(T::one()) || n < T::one() {
        return Err(UqError::OutOfRange(format!("T = {t_end} is not a multiple of dt = {dt}")));
    }
    Ok(n.as_f64() as usize)
}

/// Outcome of a bound-versus-simulation comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Guard band, in standard errors, around the Monte Carlo bias.
pub const GUARD_SE: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport<T> {
    pub certified_bound_plus: T,
    pub certified_bound_minus: T,
    pub empirical_bias: T,
    pub empirical_std_error: T,
    /// `μ̃*[f] − μ*[f]` when the alternative starts in its stationary law.
    pub stationary_bias: Option<T>,
    pub n_paths: usize,
    pub horizon: T,
    pub verdict: Verdict,
}

impl<T: Scalar> ValidationReport<T> {
    /// Pass iff `−Ξ⁻ − 3se ≤ bias ≤ Ξ⁺ + 3se`. Outside that band but within
    /// 6se of the bound the result is inconclusive, otherwise a failure.
    pub fn from_samples(averages: &[T], reference_mean: T, plus: T, minus: T, horizon: T) -> Self {
        let (m, se) = mean_and_std_error(averages);
        let bias = m - reference_mean;
        let g = T::lit(GUARD_SE) * se;
        let verdict = if !bias.is_finite() || !se.is_finite() || averages.len() < 2 {
            Verdict::Inconclusive
        } else if bias <= plus + g && bias >= -minus - g {
            Verdict::Pass
        } else if bias <= plus + g + g && bias >= -minus - g - g {
            Verdict::Inconclusive
        } else {
            Verdict::Fail
        };
        Self {
            certified_bound_plus: plus,
            certified_bound_minus: minus,
            empirical_bias: bias,
            empirical_std_error: se,
            stationary_bias: None,
            n_paths: averages.len(),
            horizon,
            verdict,
        }
    }
}

impl<T: Scalar> Serialize for ValidationReport<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ValidationReport", 8)?;
        st.serialize_field("certified_bound_plus", &self.certified_bound_plus.as_f64())?;
        st.serialize_field("certified_bound_minus", &self.certified_bound_minus.as_f64())?;
        st.serialize_field("empirical_bias", &self.empirical_bias.as_f64())?;
        st.serialize_field("empirical_std_error", &self.empirical_std_error.as_f64())?;
        st.serialize_field("stationary_bias", &self.stationary_bias.map(|b| b.as_f64()))?;
        st.serialize_field("n_paths", &self.n_paths)?;
        st.serialize_field("T", &self.horizon.as_f64())?;
        st.serialize_field("verdict", &self.verdict)?;
        st.end()
    }
}

/// Simulates the alternative from its stationary law and compares the mean
/// ergodic average, centred at `μ*[f]`, with the report's `±Ξ`.
pub fn validate_bound<T: Scalar>(
    base: &Model<T>,
    base_measure: &StationaryMeasure<T>,
    alt: &Model<T>,
    f: &[T],
    t_end: T,
    n_paths: usize,
    seed: u64,
    bound: &UqBoundReport<T>,
) -> Result<ValidationReport<T>> {
    let (report, _) =
        validate_bound_with_samples(base, base_measure, alt, f, t_end, n_paths, seed, bound)?;
    Ok(report)
}

/// [`validate_bound`] that also returns the per-path averages.
#[allow(clippy::too_many_arguments)]
pub fn validate_bound_with_samples<T: Scalar>(
    base: &Model<T>,
    base_measure: &StationaryMeasure<T>,
    alt: &Model<T>,
    f: &[T],
    t_end: T,
    n_paths: usize,
    seed: u64,
    bound: &UqBoundReport<T>,
) -> Result<(ValidationReport<T>, Vec<T>)> {
    if base.dim() != alt.dim() {
        return Err(UqError::DimensionMismatch {
            expected: base.dim(),
            got: alt.dim(),
        });
    }
    base_measure.check_len(f.len())?;
    let alt_mu = alt.invariant_measure()?;
    let init = InitialLaw::Law(alt_mu.weights().to_vec());
    let avgs = simulate_ergodic_averages(alt, f, &init, t_end, n_paths, seed)?;
    let reference = base_measure.mean(f);
    let mut report = ValidationReport::from_samples(
        &avgs,
        reference,
        bound.xi_plus.value,
        bound.xi_minus.value,
        t_end,
    );
    report.stationary_bias = Some(alt_mu.mean(f) - reference);
    Ok((report, avgs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::invariant_measure;

    #[test]
    fn uniformize_identity_is_zero() {
        let p = TransitionKernel::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let q = uniformize(&p, 3.0);
        assert!(q.matrix().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn uniformized_measure_agrees() {
        let p = TransitionKernel::from_rows(&[
            vec![0.2f64, 0.5, 0.3],
            vec![0.1, 0.1, 0.8],
            vec![0.6, 0.3, 0.1],
        ])
        .unwrap();
        let a = invariant_measure(&p).unwrap();
        let b = invariant_measure(&uniformize(&p, 2.5)).unwrap();
        for (x, y) in a.weights().iter().zip(b.weights()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn hand_built_paths() {
        let path = PathSample {
            jump_times: vec![0.0, 5.0],
            states: vec![0, 1],
            horizon: 10.0,
        };
        assert_eq!(ergodic_average(&path, &[0.0, 1.0]), 0.5);
        assert_eq!(ergodic_average(&path, &[2.5, 2.5]), 2.5);
    }

    #[test]
    fn absorbing_state_holds() {
        let q = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let p = simulate_ctmc(&q, &InitialLaw::State(1), 5.0, 1).unwrap();
        assert_eq!(p.states, vec![1]);
        assert_eq!(ergodic_average(&p, &[0.0, 1.0]), 1.0);
    }

    #[test]
    fn paths_are_reproducible() {
        let q = GeneratorMatrix::from_rows(&[vec![-1.0, 1.0], vec![2.0, -2.0]]).unwrap();
        let a = simulate_ctmc(&q, &InitialLaw::State(0), 50.0, 9).unwrap();
        let b = simulate_ctmc(&q, &InitialLaw::State(0), 50.0, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.jump_times.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn em_zero_drift_and_determinism() {
        let zero = |x: &[f64]| vec![0.0; x.len()];
        let a = simulate_em(&zero, &[0.0], 0.1, 10, 4).unwrap();
        let b = simulate_em(&zero, &[0.0], 0.1, 10, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 11);
        let wild = |x: &[f64]| vec![x[0] * x[0] * 1e3 + 1e3];
        assert!(matches!(
            simulate_em(&wild, &[1.0], 0.1, 1000, 1),
            Err(UqError::SimulationBlowup { .. })
        ));
    }

    #[test]
    fn verdict_bands() {
        let xs = [1.0, 1.0, 1.0, 1.0];
        assert_eq!(ValidationReport::from_samples(&xs, 0.5, 0.6, 0.6, 1.0).verdict, Verdict::Pass);
        assert_eq!(ValidationReport::from_samples(&xs, 0.5, 0.1, 0.6, 1.0).verdict, Verdict::Fail);
        let ys = [0.0, 2.0, 0.0, 2.0];
        // mean 1, se = 1/√3 ≈ 0.577: bias 0.5 is 1.3 above the bound 0
        assert_eq!(ValidationReport::from_samples(&ys, 0.5, 0.0, 0.0, 1.0).verdict, Verdict::Pass);
        let zs = [0.0, 0.2, 0.0, 0.2];
        // se ≈ 0.0577, bias 0.1 − (−0.1) … bias 0.6 over bound 0.4 by 0.2 ≈ 3.5se
        assert_eq!(ValidationReport::from_samples(&zs, -0.5, 0.4, 0.0, 1.0).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn steps_must_divide() {
        assert_eq!(steps_for(1.0, 0.01).unwrap(), 100);
        assert!(steps_for(1.0, 0.3).is_err());
    }
}
