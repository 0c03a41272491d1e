//! Assembly of the two-sided bound `Ξ±` from a chain, an observable and an
//! entropy budget.

use std::fmt;
use std::str::FromStr;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::chain::{GeneratorMatrix, Observable, Sign, StationaryMeasure};
use crate::divergence::{xi_infimum, LambdaFunction, LambdaKind, XiResult};
use crate::entropy::EntropyRate;
use crate::error::{Result, UqError};
use crate::scalar::Scalar;
use crate::simulate::ValidationReport;
use crate::spectral::{
    asymptotic_variance, bernstein_params_from_alpha, f_sobolev_lambda, FSobolevMap, liapunov_bernstein_params,
    log_sobolev_constant_numeric, log_sobolev_lambda, poincare_constant, BernsteinParams,
    FunctionalConstants, LiapunovData, LogMap,
};

/// Choice of certified `Λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Reversible when detailed balance holds, otherwise Poincaré.
    Auto,
    Poincare,
    Reversible,
    Liapunov,
    LogSobolev,
    FSobolev,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Auto,
        Method::Poincare,
        Method::Reversible,
        Method::Liapunov,
        Method::LogSobolev,
        Method::FSobolev,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Auto => "auto",
            Self::Poincare => "poincare",
            Self::Reversible => "reversible",
            Self::Liapunov => "liapunov",
            Self::LogSobolev => "log-sobolev",
            Self::FSobolev => "f-sobolev",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = UqError;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| UqError::OutOfRange(format!("unknown method '{s}'")))
    }
}

/// Everything a bound can be built from.
#[derive(Debug, Clone, Copy)]
pub struct BoundInputs<'a, T: Scalar> {
    pub generator: &'a GeneratorMatrix<T>,
    pub measure: &'a StationaryMeasure<T>,
    pub observable: &'a Observable<T>,
    /// Known constants (zoo or user); otherwise computed spectrally.
    pub constants: Option<FunctionalConstants<T>>,
    pub liapunov: Option<&'a LiapunovData<T>>,
}

/// Parameters of the `Λ` that was used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaParams<T> {
    pub alpha: T,
    pub beta: Option<T>,
    /// Present for Bernstein-type methods.
    pub bernstein: Option<BernsteinParams<T>>,
    /// Asymptotic variance `σ²(f)` when the chain is reversible.
    pub sigma2_asymptotic: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UqBoundReport<T> {
    pub method: Method,
    pub params: LambdaParams<T>,
    pub eta: T,
    pub entropy: Option<EntropyRate<T>>,
    pub horizon: Option<T>,
    pub xi_plus: XiResult<T>,
    pub xi_minus: XiResult<T>,
    pub validation: Option<ValidationReport<T>>,
}

impl<T: Scalar> Serialize for LambdaParams<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("LambdaParams", 6)?;
        st.serialize_field("alpha", &self.alpha.as_f64())?;
        st.serialize_field("beta", &self.beta.map(|b| b.as_f64()))?;
        st.serialize_field("sigma2", &self.bernstein.map(|b| b.sigma2.as_f64()))?;
        st.serialize_field("m_plus", &self.bernstein.map(|b| b.m_plus.as_f64()))?;
        st.serialize_field("m_minus", &self.bernstein.map(|b| b.m_minus.as_f64()))?;
        st.serialize_field("sigma2_asymptotic", &self.sigma2_asymptotic.map(|b| b.as_f64()))?;
        st.end()
    }
}

impl<T: Scalar> Serialize for UqBoundReport<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("UqBoundReport", 8)?;
        st.serialize_field("method", &self.method)?;
        st.serialize_field("lambda", &self.params)?;
        st.serialize_field("eta", &self.eta.as_f64())?;
        st.serialize_field("entropy", &self.entropy)?;
        st.serialize_field("T", &self.horizon.map(|t| t.as_f64()))?;
        st.serialize_field("xi_plus", &self.xi_plus)?;
        st.serialize_field("xi_minus", &self.xi_minus)?;
        st.serialize_field("validation", &self.validation)?;
        st.end()
    }
}

/// A resolved `Λ`, ready to be evaluated at any `η`.
pub struct PreparedBound<'a, T: Scalar> {
    method: Method,
    params: LambdaParams<T>,
    lambda: Option<LambdaFunction<'a, T>>,
}

impl<'a, T: Scalar> PreparedBound<'a, T> {
    pub fn method(&self) -> Method {
        self.method
    }

    pub fn params(&self) -> &LambdaParams<T> {
        &self.params
    }

    /// `(Ξ⁺, Ξ⁻)` at budget `η`.
    pub fn xi(&self, eta: T) -> Result<(XiResult<T>, XiResult<T>)> {
        if eta < T::zero() || !eta.is_finite() {
            return Err(UqError::OutOfRange(format!("eta = {eta} must be finite and nonnegative")));
        }
        match (&self.lambda, self.params.bernstein) {
            (_, Some(b)) => Ok((
                XiResult::bernstein(b.sigma2, b.m_plus, eta),
                XiResult::bernstein(b.sigma2, b.m_minus, eta),
            )),
            (Some(l), None) => Ok((xi_infimum(l, eta, Sign::Plus)?, xi_infimum(l, eta, Sign::Minus)?)),
            (None, None) => unreachable!("prepared bounds always carry a Λ"),
        }
    }

    pub fn report(&self, eta: T) -> Result<UqBoundReport<T>> {
        let (xi_plus, xi_minus) = self.xi(eta)?;
        Ok(UqBoundReport {
            method: self.method,
            params: self.params,
            eta,
            entropy: None,
            horizon: None,
            xi_plus,
            xi_minus,
            validation: None,
        })
    }
}

fn no_method(m: Method, why: &str) -> UqError {
    UqError::NoCertifiedMethod(format!("{m}: {why}"))
}

/// Resolves `method` against the inputs.
pub fn prepare_bound<'a, T: Scalar>(inputs: &BoundInputs<'a, T>, method: Method) -> Result<PreparedBound<'a, T>> {
    let a = inputs.generator;
    let mu = inputs.measure;
    let f = inputs.observable;
    mu.check_len(f.values().len())?;
    mu.check_len(a.dim())?;
    let constants = match inputs.constants {
        Some(c) => c,
        None => poincare_constant(a, mu)?,
    };
    let reversible = a.is_reversible(mu);
    let sigma2_asym = if reversible { Some(asymptotic_variance(a, f, mu)?) } else { None };
    let mut params = LambdaParams {
        alpha: constants.alpha,
        beta: constants.beta,
        bernstein: None,
        sigma2_asymptotic: sigma2_asym,
    };
    let bernstein = |method, b: BernsteinParams<T>, mut params: LambdaParams<T>| {
        params.bernstein = Some(b);
        PreparedBound {
            method,
            params,
            lambda: None,
        }
    };
    match method {
        Method::Poincare => Ok(bernstein(method, bernstein_params_from_alpha(constants.alpha, f, mu), params)),
        Method::Reversible => {
            let s2 = sigma2_asym.ok_or_else(|| no_method(method, "detailed balance does not hold"))?;
            let b = BernsteinParams {
                sigma2: s2,
                m_plus: constants.alpha * f.pos_sup(),
                m_minus: constants.alpha * f.neg_sup(),
            };
            Ok(bernstein(method, b, params))
        }
        Method::Liapunov => {
            let lia = inputs.liapunov.ok_or_else(|| no_method(method, "no Liapunov data supplied"))?;
            if !reversible {
                return Err(no_method(method, "detailed balance does not hold"));
            }
            let b = liapunov_bernstein_params(a, f, mu, lia, constants.alpha)?;
            Ok(bernstein(method, b, params))
        }
        Method::Auto => {
            let p = bernstein_params_from_alpha(constants.alpha, f, mu);
            match sigma2_asym {
                // σ²(f) ≤ 2α Var f for reversible chains; keep the smaller in
                // case rounding says otherwise
                Some(s2) if s2 <= p.sigma2 => {
                    let b = BernsteinParams { sigma2: s2, ..p };
                    Ok(bernstein(Method::Reversible, b, params))
                }
                _ => Ok(bernstein(Method::Poincare, p, params)),
            }
        }
        Method::LogSobolev | Method::FSobolev => {
            let beta = match constants.beta {
                Some(b) => b,
                None if reversible => log_sobolev_constant_numeric(a, mu)
                    .map_err(|e| no_method(method, &e.to_string()))?
                    .beta
                    .expect("numeric constants carry beta"),
                None => return Err(no_method(method, "no log-Sobolev constant for a non-reversible chain")),
            };
            params.beta = Some(beta);
            if method == Method::LogSobolev {
                Ok(PreparedBound {
                    method,
                    params,
                    lambda: Some(log_sobolev_lambda(f, mu, beta)?),
                        })
            } else {
                let map = LogMap { beta };
                map.validate()?;
                let lambda = LambdaFunction::new(LambdaKind::FSobolev, (T::NEG_INFINITY, T::INFINITY), move |c| {
                    f_sobolev_lambda(f, mu, &map, c).unwrap_or(T::INFINITY)
                });
                Ok(PreparedBound {
                    method,
                    params,
                    lambda: Some(lambda),
                })
            }
        }
    }
}

/// `Ξ±` at budget `η` for the chosen method.
pub fn assemble_bound<T: Scalar>(inputs: &BoundInputs<'_, T>, method: Method, eta: T) -> Result<UqBoundReport<T>> {
    prepare_bound(inputs, method)?.report(eta)
}

/// [`assemble_bound`] with `η = rate + initial_term/T` from an entropy rate.
pub fn assemble_bound_from_entropy<T: Scalar>(
    inputs: &BoundInputs<'_, T>,
    method: Method,
    entropy: EntropyRate<T>,
    horizon: Option<T>,
) -> Result<UqBoundReport<T>> {
    let eta = entropy.eta(horizon.unwrap_or(T::INFINITY));
    let mut r = assemble_bound(inputs, method, eta)?;
    r.entropy = Some(entropy);
    r.horizon = horizon;
    Ok(r)
}

/// Log-Sobolev `Λ(c) = (1/β) log E[e^{βc a·x}] = βc²‖a‖²/(4m)` for a linear
/// observable `a·x` under the `N(0, I/(2m))` law of the quadratic Langevin
/// diffusion.
pub fn langevin_linear_lambda<T: Scalar>(a: &[T], m: T, beta: T) -> Result<LambdaFunction<'static, T>> {
    if !(m > T::zero()) || !(beta > T::zero()) {
        return Err(UqError::OutOfRange("need m > 0 and beta > 0".into()));
    }
    let a2 = a.iter().fold(T::zero(), |s, &x| s + x * x);
    let k = beta * a2 / (T::lit(4.0) * m);
    Ok(LambdaFunction::new(
        LambdaKind::LogSobolev,
        (T::NEG_INFINITY, T::INFINITY),
        move |c| k * c * c,
    ))
}
