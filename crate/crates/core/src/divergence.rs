//! Cumulant generating functions, relative entropy and the goal-oriented
//! divergence `Ξ±(Λ, η) = inf_{c>0} (Λ(±c) + η)/c`.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::chain::Sign;
use crate::error::{Result, UqError};
use crate::scalar::{log_sum_exp, Scalar};

/// Upper search limit for `c` when `Λ` is finite everywhere.
pub const DEFAULT_C_CAP: f64 = 1e8;
const GRID_POINTS: usize = 400;
const GOLDEN_RTOL: f64 = 1e-10;

/// `log Σ p_i e^{c f_i}`, max-shifted. Exactly `0` at `c = 0`.
pub fn cgf<T: Scalar>(p: &[T], f: &[T], c: T) -> T {
    if c == T::zero() {
        return T::zero();
    }
    log_sum_exp(
        p.iter()
            .zip(f)
            .filter(|(&w, _)| w > T::zero())
            .map(|(&w, &x)| w.ln() + c * x),
    )
}

/// [`cgf`] with the reference law given by log-weights.
pub fn cgf_log<T: Scalar>(log_p: &[T], f: &[T], c: T) -> T {
    if c == T::zero() {
        return T::zero();
    }
    log_sum_exp(
        log_p
            .iter()
            .zip(f)
            .filter(|(&w, _)| w.is_finite())
            .map(|(&w, &x)| w + c * x),
    )
}

fn mean<T: Scalar>(p: &[T], f: &[T]) -> T {
    p.iter().zip(f).fold(T::zero(), |a, (&w, &x)| a + w * x)
}

/// `R(p̃‖p) = Σ p̃_i log(p̃_i/p_i)`, with `0 log 0 = 0` and `+∞` when `p̃`
/// charges a state that `p` does not.
pub fn relative_entropy<T: Scalar>(p_tilde: &[T], p: &[T]) -> T {
    let mut acc = T::zero();
    for (&q, &r) in p_tilde.iter().zip(p) {
        if q > T::zero() {
            if r <= T::zero() {
                return T::INFINITY;
            }
            acc += q * (q / r).ln();
        }
    }
    acc.max(T::zero())
}

/// Exponential tilt `p^c_i ∝ p_i e^{c f_i}`.
pub fn tilted_measure<T: Scalar>(p: &[T], f: &[T], c: T) -> Vec<T> {
    if c == T::zero() {
        return p.to_vec();
    }
    let z = cgf(p, f, c);
    p.iter()
        .zip(f)
        .map(|(&w, &x)| if w > T::zero() { (w.ln() + c * x - z).exp() } else { T::zero() })
        .collect()
}

/// Which family a [`LambdaFunction`] belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaKind {
    EmpiricalCgf,
    Bernstein,
    LogSobolev,
    FSobolev,
    Kappa,
    Analytic,
}

impl LambdaKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LambdaKind::EmpiricalCgf => "empirical-cgf",
            LambdaKind::Bernstein => "bernstein",
            LambdaKind::LogSobolev => "log-sobolev",
            LambdaKind::FSobolev => "f-sobolev",
            LambdaKind::Kappa => "kappa",
            LambdaKind::Analytic => "analytic",
        }
    }
}

type Evaluator<'a, T> = Box<dyn Fn(T) -> T + Send + Sync + 'a>;

/// A bound `Λ: ℝ → [0, ∞]` on a centered cumulant generating function.
///
/// `domain` is the open interval `(c−, c+)` where `Λ` may be finite;
/// evaluation outside it yields `+∞` without calling the evaluator.
pub struct LambdaFunction<'a, T: Scalar> {
    eval: Evaluator<'a, T>,
    domain: (T, T),
    kind: LambdaKind,
}

impl<T: Scalar> std::fmt::Debug for LambdaFunction<'_, T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LambdaFunction")
            .field("kind", &self.kind)
            .field("domain", &self.domain)
            .finish()
    }
}

impl<'a, T: Scalar> LambdaFunction<'a, T> {
    pub fn new(
        kind: LambdaKind,
        domain: (T, T),
        eval: impl Fn(T) -> T + Send + Sync + 'a,
    ) -> Self {
        Self {
            eval: Box::new(eval),
            domain,
            kind,
        }
    }

    pub fn eval(&self, c: T) -> T {
        if c == T::zero() {
            return T::zero();
        }
        if c <= self.domain.0 || c >= self.domain.1 {
            return T::INFINITY;
        }
        (self.eval)(c)
    }

    pub fn domain(&self) -> (T, T) {
        self.domain
    }

    pub fn kind(&self) -> LambdaKind {
        self.kind
    }

    /// Centered CGF `c ↦ log E_p[e^{c(f − E_p f)}]` of a finite distribution.
    pub fn empirical_cgf(p: &[T], f: &[T]) -> Self {
        let m = mean(p, f);
        let fc: Vec<T> = f.iter().map(|&x| x - m).collect();
        let p = p.to_vec();
        Self::new(
            LambdaKind::EmpiricalCgf,
            (T::NEG_INFINITY, T::INFINITY),
            move |c| cgf(&p, &fc, c),
        )
    }

    /// `σ²c²/(2(1 − |c|M±))` with `M⁺` for `c > 0` and `M⁻` for `c < 0`.
    pub fn bernstein(sigma2: T, m_plus: T, m_minus: T) -> Self {
        let lim = |m: T| if m > T::zero() { T::one() / m } else { T::INFINITY };
        Self::new(
            LambdaKind::Bernstein,
            (-lim(m_minus), lim(m_plus)),
            move |c| {
                let m = if c > T::zero() { m_plus } else { m_minus };
                let d = T::one() - c.abs() * m;
                if d <= T::zero() {
                    T::INFINITY
                } else {
                    sigma2 * c * c / (T::lit(2.0) * d)
                }
            },
        )
    }

    /// Largest admissible `c > 0` in direction `sign`.
    fn cap(&self, sign: Sign) -> (T, bool) {
        let lim = match sign {
            Sign::Plus => self.domain.1,
            Sign::Minus => -self.domain.0,
        };
        if lim.is_finite() && lim < T::lit(DEFAULT_C_CAP) {
            (lim, true)
        } else {
            (T::lit(DEFAULT_C_CAP), false)
        }
    }
}

/// Where the infimum defining `Ξ` was attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Minimizer<T> {
    Interior(T),
    /// Attained in the limit `c → 0`.
    BoundaryLow,
    /// Attained in the limit `c → c_cap`; the reported value is the
    /// objective at the cap, an upper bound on the infimum.
    BoundaryHigh,
}

/// Outcome of a `Ξ` computation.
#[derive(Debug, Clone, PartialEq)]
pub struct XiResult<T> {
    pub value: T,
    pub minimizer: Minimizer<T>,
    pub method: String,
}

impl<T: Scalar> XiResult<T> {
    /// Closed-form Bernstein result, with its optimizer
    /// `c* = k/(1 + kM)`, `k = √(2η/σ²)`.
    pub fn bernstein(sigma2: T, m: T, eta: T) -> Self {
        let value = bernstein_xi(sigma2, m, eta);
        let minimizer = if sigma2 > T::zero() && eta > T::zero() {
            let k = (T::lit(2.0) * eta / sigma2).sqrt();
            Minimizer::Interior(k / (T::one() + k * m))
        } else if eta > T::zero() {
            Minimizer::BoundaryHigh
        } else {
            Minimizer::BoundaryLow
        };
        Self {
            value,
            minimizer,
            method: LambdaKind::Bernstein.as_str().to_string(),
        }
    }

    pub fn minimizer_c(&self) -> Option<T> {
        match self.minimizer {
            Minimizer::Interior(c) => Some(c),
            _ => None,
        }
    }
}

impl<T: Scalar> Serialize for XiResult<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("XiResult", 3)?;
        st.serialize_field("value", &self.value.as_f64())?;
        match self.minimizer {
            Minimizer::Interior(c) => st.serialize_field("c", &c.as_f64())?,
            _ => st.serialize_field("c", "boundary")?,
        }
        st.serialize_field("method", &self.method)?;
        st.end()
    }
}

/// `inf_{0<c<c_cap} (Λ(±c) + η)/c`.
///
/// A log-spaced scan locates the best grid cell; golden-section search in
/// `log c` then refines it. The objective is quasi-convex for convex `Λ`
/// with `Λ(0) = 0`, so the scan cannot miss the basin.
pub fn xi_infimum<T: Scalar>(lambda: &LambdaFunction<'_, T>, eta: T, sign: Sign) -> Result<XiResult<T>> {
    if !(eta >= T::zero()) || !eta.is_finite() {
        return Err(UqError::OutOfRange(format!("eta = {eta} must be finite and nonnegative")));
    }
    let s = sign.factor::<T>();
    let (cap, finite_cap) = lambda.cap(sign);
    let lo = T::lit(1e-12) * cap.min(T::one());
    let hi = if finite_cap {
        cap * (T::one() - T::lit(1e-12))
    } else {
        cap
    };
    let objective = |c: T| -> Result<T> {
        let v = lambda.eval(s * c);
        if v.is_nan_value() {
            return Err(UqError::EvaluationFailure((s * c).as_f64()));
        }
        Ok((v + eta) / c)
    };

    let (llo, lhi) = (lo.ln(), hi.ln());
    let step = (lhi - llo) / T::from_usize_lossy(GRID_POINTS - 1);
    let grid: Vec<T> = (0..GRID_POINTS)
        .map(|k| (llo + step * T::from_usize_lossy(k)).exp())
        .collect();
    let mut best = 0;
    let mut best_v = T::INFINITY;
    for (k, &c) in grid.iter().enumerate() {
        let v = objective(c)?;
        if v < best_v {
            best_v = v;
            best = k;
        }
    }
    let method = lambda.kind.as_str().to_string();
    if !best_v.is_finite() {
        return Ok(XiResult {
            value: T::INFINITY,
            minimizer: Minimizer::BoundaryHigh,
            method,
        });
    }
    if best == 0 {
        return Ok(XiResult {
            value: best_v.max(T::zero()),
            minimizer: Minimizer::BoundaryLow,
            method,
        });
    }
    if best == GRID_POINTS - 1 {
        return Ok(XiResult {
            value: best_v.max(T::zero()),
            minimizer: Minimizer::BoundaryHigh,
            method,
        });
    }

    // golden section on log c over the neighbouring cells
    let phi = |u: T| objective(u.exp());
    let inv_gr = T::lit(0.618_033_988_749_894_9);
    let mut a = grid[best - 1].ln();
    let mut b = grid[best + 1].ln();
    let mut x1 = b - inv_gr * (b - a);
    let mut x2 = a + inv_gr * (b - a);
    let mut f1 = phi(x1)?;
    let mut f2 = phi(x2)?;
    let tol = T::tol(GOLDEN_RTOL);
    for _ in 0..200 {
        // interval in log c, so its width is the relative tolerance on c
        if b - a <= tol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_gr * (b - a);
            f1 = phi(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_gr * (b - a);
            f2 = phi(x2)?;
        }
    }
    let (u, v) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    let (c, v) = if v <= best_v { (u.exp(), v) } else { (grid[best], best_v) };
    Ok(XiResult {
        value: v.max(T::zero()),
        minimizer: Minimizer::Interior(c),
        method,
    })
}

/// `√(2σ²η) + Mη`, the closed form of `Ξ` for a Bernstein-type `Λ`.
pub fn bernstein_xi<T: Scalar>(sigma2: T, m: T, eta: T) -> T {
    (T::lit(2.0) * sigma2 * eta).sqrt() + m * eta
}

/// Small-`η` leading term `√(2 Var η)`.
pub fn linearized_xi<T: Scalar>(variance: T, eta: T) -> T {
    (T::lit(2.0) * variance * eta).sqrt()
}

/// Tilt level `c ≥ 0` with `R(p^c‖p) = η`.
///
/// `c ↦ R(p^c‖p)` increases from 0 to `−log p(argmax f)`; the root is
/// bracketed by doubling and refined by bisection down to machine
/// resolution in `c`.
pub fn solve_tilt_level<T: Scalar>(p: &[T], f: &[T], eta: T) -> Result<T> {
    if p.len() != f.len() {
        return Err(UqError::DimensionMismatch {
            expected: p.len(),
            got: f.len(),
        });
    }
    if !(eta > T::zero()) || !eta.is_finite() {
        return Err(UqError::OutOfRange(format!("eta = {eta} must be positive")));
    }
    let support: Vec<usize> = (0..p.len()).filter(|&i| p[i] > T::zero()).collect();
    let fmax = support.iter().fold(T::NEG_INFINITY, |a, &i| a.max(f[i]));
    let fmin = support.iter().fold(T::INFINITY, |a, &i| a.min(f[i]));
    if !(fmax > fmin) {
        return Err(UqError::ConstantObservable);
    }
    let top_mass = support
        .iter()
        .filter(|&&i| f[i] == fmax)
        .fold(T::zero(), |a, &i| a + p[i]);
    let sup = -top_mass.ln();
    if eta >= sup {
        return Err(UqError::EtaUnreachable {
            eta: eta.as_f64(),
            sup: sup.as_f64(),
        });
    }
    let m = mean(p, f);
    let fc: Vec<T> = f.iter().map(|&x| x - m).collect();
    let entropy_at = |c: T| {
        let z = cgf(p, &fc, c);
        support.iter().fold(T::zero(), |a, &i| {
            let lr = c * fc[i] - z;
            a + (p[i].ln() + lr).exp() * lr
        })
    };
    let mut lo = T::zero();
    let mut hi = T::one();
    while entropy_at(hi) < eta {
        lo = hi;
        hi *= T::lit(2.0);
        if hi > T::lit(1e12) {
            return Err(UqError::EtaUnreachable {
                eta: eta.as_f64(),
                sup: entropy_at(lo).as_f64(),
            });
        }
    }
    for _ in 0..400 {
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if entropy_at(mid) < eta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (rl, rh) = (entropy_at(lo), entropy_at(hi));
    Ok(if (rl - eta).abs() <= (rh - eta).abs() { lo } else { hi })
}
