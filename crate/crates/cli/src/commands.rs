//! The subcommands.

use std::fmt::Write as _;
use std::sync::Arc;

use markov_uq::bound::{langevin_linear_lambda, prepare_bound, BoundInputs, LambdaParams, Method, UqBoundReport};
use markov_uq::chain::{center_observable, Model, Sign};
use markov_uq::divergence::{relative_entropy, xi_infimum};
use markov_uq::entropy::{
    ctmc_relent_rate_generators, dtmc_relent_rate, em_relent_rate, em_relent_taylor_bound, girsanov_rate_mc,
    isotropic_gaussian_kl, EntropyRate, TaylorInputs,
};
use markov_uq::simulate::{simulate_sde_averages, validate_bound_with_samples, ValidationReport, Verdict};
use markov_uq::spectral::{
    asymptotic_variance, bernstein_params_from_alpha, log_sobolev_constant_numeric, poincare_constant,
    HessianConvention,
};
use markov_uq::zoo::{catalog, SdeModel};
use markov_uq::UqError;
use serde_json::{json, Value};

use crate::config::RunArgs;
use crate::resolve::{resolve_alt_chain, resolve_model, resolve_observable, ChainInput, Resolved};
use crate::CliError;

const CHAIN_HORIZON: f64 = 1e3;
const CHAIN_PATHS: usize = 10_000;
const SDE_HORIZON: f64 = 50.0;
const SDE_DT: f64 = 0.01;
const SDE_PATHS: usize = 2000;
const LS_NUMERIC_MAX: usize = 64;

/// Output of a command: JSON report, optional CSV body, exit code.
pub struct Output {
    pub json: Value,
    pub csv: Option<String>,
    pub code: i32,
}

impl Output {
    fn ok(json: Value, csv: Option<String>) -> Self {
        Self { json, csv, code: 0 }
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

fn to_json<S: serde::Serialize>(x: &S) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn method(args: &RunArgs) -> Result<Method, CliError> {
    Ok(args.method.as_deref().unwrap_or("auto").parse()?)
}

pub fn zoo_list() -> Output {
    let entries: Vec<Value> = catalog()
        .into_iter()
        .map(|(name, desc)| json!({"name": name, "description": desc}))
        .collect();
    Output::ok(Value::Array(entries), None)
}

pub fn constants(args: &RunArgs) -> Result<Output, CliError> {
    match resolve_model(args.model()?)? {
        Resolved::Chain(c) => {
            let q = &c.generator;
            let mu = &c.measure;
            let reversible = q.is_reversible(mu);
            let mut consts = match c.constants {
                Some(k) => k,
                None => poincare_constant(q, mu)?,
            };
            let wants_ls = matches!(method(args)?, Method::LogSobolev | Method::FSobolev);
            if consts.beta.is_none() && wants_ls {
                if !reversible || q.dim() > LS_NUMERIC_MAX {
                    return Err(UqError::NoCertifiedMethod(
                        "numeric log-Sobolev constants need a reversible chain with at most 64 states".into(),
                    )
                    .into());
                }
                consts.beta = log_sobolev_constant_numeric(q, mu)?.beta;
            }
            let mut out = json!({
                "alpha": consts.alpha,
                "beta": consts.beta,
                "provenance": consts.provenance,
                "reversible": reversible,
                "states": q.dim(),
                "sigma2_asymptotic": Value::Null,
                "sigma2": Value::Null,
                "m_plus": Value::Null,
                "m_minus": Value::Null,
            });
            let values = match (&args.observable, &c.observable) {
                (None, None) => None,
                (spec, default) => Some(resolve_observable(spec.as_deref(), default.as_deref(), q.dim())?),
            };
            if let Some(v) = values {
                let f = center_observable(&v, mu)?;
                if reversible {
                    out["sigma2_asymptotic"] = json!(asymptotic_variance(q, &f, mu)?);
                }
                let b = bernstein_params_from_alpha(consts.alpha, &f, mu);
                out["sigma2"] = json!(b.sigma2);
                out["m_plus"] = json!(b.m_plus);
                out["m_minus"] = json!(b.m_minus);
            }
            let csv = row_csv(
                &out,
                &["alpha", "beta", "sigma2_asymptotic", "sigma2", "m_plus", "m_minus"],
            );
            Ok(Output::ok(out, Some(csv)))
        }
        Resolved::Sde(s) => {
            let k = s.constants(HessianConvention::LogSobolev)?;
            let out = json!({
                "alpha": k.alpha,
                "beta": k.beta,
                "provenance": k.provenance,
                "reversible": true,
                "states": Value::Null,
                "sigma2_asymptotic": Value::Null,
                "sigma2": Value::Null,
                "m_plus": Value::Null,
                "m_minus": Value::Null,
            });
            let csv = row_csv(&out, &["alpha", "beta"]);
            Ok(Output::ok(out, Some(csv)))
        }
    }
}

fn row_csv(v: &Value, cols: &[&str]) -> String {
    let cells: Vec<String> = cols
        .iter()
        .map(|c| v[*c].as_f64().map(fmt).unwrap_or_default())
        .collect();
    format!("{}\n{}\n", cols.join(","), cells.join(","))
}

fn chain_entropy(base: &ChainInput, alt_spec: &str) -> Result<EntropyRate<f64>, CliError> {
    let alt = resolve_alt_chain(alt_spec, base)?;
    if let (Model::Dtmc(p), Some(pt)) = (&base.model, &alt.kernel) {
        return Ok(dtmc_relent_rate(pt, p, &alt.measure, Some(&base.measure))?);
    }
    let mut e = ctmc_relent_rate_generators(&alt.generator, &base.generator, &alt.measure)?;
    e.initial_term = relative_entropy(alt.measure.weights(), base.measure.weights()).max(0.0);
    Ok(e)
}

fn sde_sampler(s: &SdeModel<f64>) -> Result<markov_uq::zoo::Sampler<f64>, CliError> {
    s.stationary
        .clone()
        .ok_or_else(|| UqError::InvalidModel(format!("{} has no stationary sampler", s.name)).into())
}

fn sde_entropy(base: &SdeModel<f64>, alt_spec: &str, args: &RunArgs) -> Result<EntropyRate<f64>, CliError> {
    let t = args.horizon.unwrap_or(SDE_HORIZON);
    let dt = args.dt.unwrap_or(SDE_DT);
    let paths = args.paths.unwrap_or(SDE_PATHS);
    let seed = args.seed();
    match alt_spec {
        "em" => {
            let init = sde_sampler(base)?;
            Ok(em_relent_rate(&*base.drift, &*init, dt, t, paths, seed)?)
        }
        "em-taylor" => {
            let init = sde_sampler(base)?;
            let (Some(jac), Some(m), "langevin-quadratic") =
                (base.jacobian.clone(), base.hessian_lower_bound, base.name.as_str())
            else {
                return Err(UqError::NoCertifiedMethod("Taylor bound needs a linear drift with known Jacobian".into()).into());
            };
            // constant Jacobian −mI: Lipschitz constant 0, operator norm m
            let inputs = TaylorInputs {
                drift: &*base.drift,
                jacobian: &*jac,
                lipschitz: 0.0,
                jacobian_sup: m,
            };
            Ok(em_relent_taylor_bound(&inputs, &*init, dt, t, paths, seed)?)
        }
        spec => {
            let Resolved::Sde(alt) = resolve_model(spec)? else {
                return Err(UqError::InvalidModel("alternative must be a diffusion when the base model is".into()).into());
            };
            if alt.dim != base.dim {
                return Err(UqError::DimensionMismatch {
                    expected: base.dim,
                    got: alt.dim,
                }
                .into());
            }
            let (bt, b) = (alt.drift.clone(), base.drift.clone());
            let beta = move |x: &[f64]| -> Vec<f64> { bt(x).iter().zip(b(x)).map(|(u, v)| u - v).collect() };
            let mut e = girsanov_rate_mc(&beta, &alt, t, dt, paths, seed)?;
            if let (Some((mt, vt)), Some((m0, v0))) = (alt.gaussian, base.gaussian) {
                e.initial_term = isotropic_gaussian_kl(base.dim, mt, vt, m0, v0);
            }
            Ok(e)
        }
    }
}

pub fn relent(args: &RunArgs) -> Result<Output, CliError> {
    let alt = args
        .alt_model
        .as_deref()
        .ok_or_else(|| CliError::Usage("--alt-model is required".into()))?;
    let e = match resolve_model(args.model()?)? {
        Resolved::Chain(c) => chain_entropy(&c, alt)?,
        Resolved::Sde(s) => sde_entropy(&s, alt, args)?,
    };
    let json = to_json(&e);
    let csv = format!(
        "rate,initial_term,std_error,estimator\n{},{},{},{}\n",
        fmt(e.rate),
        fmt(e.initial_term),
        e.std_error.map(fmt).unwrap_or_default(),
        e.estimator.as_str()
    );
    Ok(Output::ok(json, Some(csv)))
}

struct Budget {
    eta: f64,
    entropy: Option<EntropyRate<f64>>,
    horizon: Option<f64>,
}

fn budget(args: &RunArgs, entropy: impl FnOnce(&str) -> Result<EntropyRate<f64>, CliError>) -> Result<Budget, CliError> {
    match (args.eta, args.alt_model.as_deref()) {
        (Some(eta), None) => {
            if !(eta >= 0.0 && eta.is_finite()) {
                return Err(CliError::Usage(format!("--eta {eta} must be finite and nonnegative")));
            }
            Ok(Budget {
                eta,
                entropy: None,
                horizon: args.horizon,
            })
        }
        (None, Some(alt)) => {
            let e = entropy(alt)?;
            let t = args.horizon.unwrap_or(f64::INFINITY);
            Ok(Budget {
                eta: e.eta_upper(t),
                entropy: Some(e),
                horizon: args.horizon,
            })
        }
        _ => Err(CliError::Usage("exactly one of --eta and --alt-model is required".into())),
    }
}

fn parse_grid(spec: Option<&str>, default: (f64, f64, usize)) -> Result<Vec<f64>, CliError> {
    let (lo, hi, n) = match spec {
        None => default,
        Some(s) => {
            let parts: Vec<&str> = s.split(':').collect();
            let bad = || CliError::Usage(format!("grid \"{s}\" must be lo:hi:points"));
            if parts.len() != 3 {
                return Err(bad());
            }
            (
                parts[0].parse().map_err(|_| bad())?,
                parts[1].parse().map_err(|_| bad())?,
                parts[2].parse().map_err(|_| bad())?,
            )
        }
    };
    if !(lo > 0.0 && hi >= lo && n >= 1) {
        return Err(CliError::Usage("grid needs 0 < lo <= hi and at least one point".into()));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect())
}

/// CSV sweep of `Ξ±` over `η` or over `T`.
fn sweep_csv(
    args: &RunArgs,
    budget: &Budget,
    xi: &dyn Fn(f64) -> Result<(f64, f64), CliError>,
) -> Result<String, CliError> {
    let mut out = String::new();
    match args.sweep.as_deref().unwrap_or("eta") {
        "eta" => {
            out.push_str("eta,xi_plus,xi_minus\n");
            for eta in parse_grid(args.grid.as_deref(), (1e-6, 1.0, 25))? {
                let (p, m) = xi(eta)?;
                writeln!(out, "{},{},{}", fmt(eta), fmt(p), fmt(m)).unwrap();
            }
        }
        "T" => {
            let e = budget
                .entropy
                .ok_or_else(|| CliError::Usage("a T sweep needs --alt-model".into()))?;
            out.push_str("T,eta,xi_plus,xi_minus\n");
            for t in parse_grid(args.grid.as_deref(), (1.0, 1e4, 25))? {
                let eta = e.eta_upper(t);
                let (p, m) = xi(eta)?;
                writeln!(out, "{},{},{},{}", fmt(t), fmt(eta), fmt(p), fmt(m)).unwrap();
            }
        }
        other => return Err(CliError::Usage(format!("unknown sweep \"{other}\", expected eta or T"))),
    }
    Ok(out)
}

fn chain_inputs<'a>(c: &'a ChainInput, f: &'a markov_uq::Observable) -> BoundInputs<'a, f64> {
    BoundInputs {
        generator: &c.generator,
        measure: &c.measure,
        observable: f,
        constants: c.constants,
        liapunov: c.liapunov.as_ref(),
    }
}

struct SdeBound {
    lambda: markov_uq::divergence::LambdaFunction<'static, f64>,
    params: LambdaParams<f64>,
    coeffs: Vec<f64>,
}

fn sde_bound(s: &SdeModel<f64>, args: &RunArgs) -> Result<SdeBound, CliError> {
    let m = method(args)?;
    if !matches!(m, Method::Auto | Method::LogSobolev) {
        return Err(UqError::NoCertifiedMethod(format!("{m} is not available for diffusions; use log-sobolev")).into());
    }
    let k = s.constants(HessianConvention::LogSobolev)?;
    let mut e1 = vec![0.0; s.dim];
    e1[0] = 1.0;
    let coeffs = resolve_observable(args.observable.as_deref(), Some(&e1), s.dim)?;
    let (Some(hess), "langevin-quadratic") = (s.hessian_lower_bound, s.name.as_str()) else {
        return Err(UqError::NoCertifiedMethod("closed-form Λ is only available for quadratic potentials".into()).into());
    };
    let beta = k.beta.expect("log-Sobolev convention sets beta");
    Ok(SdeBound {
        lambda: langevin_linear_lambda(&coeffs, hess, beta)?,
        params: LambdaParams {
            alpha: k.alpha,
            beta: k.beta,
            bernstein: None,
            sigma2_asymptotic: None,
        },
        coeffs,
    })
}

fn sde_report(sb: &SdeBound, b: &Budget) -> Result<UqBoundReport<f64>, CliError> {
    Ok(UqBoundReport {
        method: Method::LogSobolev,
        params: sb.params,
        eta: b.eta,
        entropy: b.entropy,
        horizon: b.horizon,
        xi_plus: xi_infimum(&sb.lambda, b.eta, Sign::Plus)?,
        xi_minus: xi_infimum(&sb.lambda, b.eta, Sign::Minus)?,
        validation: None,
    })
}

pub fn bound(args: &RunArgs) -> Result<Output, CliError> {
    match resolve_model(args.model()?)? {
        Resolved::Chain(c) => {
            let values = resolve_observable(args.observable.as_deref(), c.observable.as_deref(), c.generator.dim())?;
            let f = center_observable(&values, &c.measure)?;
            let prepared = prepare_bound(&chain_inputs(&c, &f), method(args)?)?;
            let b = budget(args, |alt| chain_entropy(&c, alt))?;
            let mut report = prepared.report(b.eta)?;
            report.entropy = b.entropy;
            report.horizon = b.horizon;
            let csv = match args.csv {
                Some(_) => Some(sweep_csv(args, &b, &|eta| {
                    let (p, m) = prepared.xi(eta)?;
                    Ok((p.value, m.value))
                })?),
                None => None,
            };
            Ok(Output::ok(to_json(&report), csv))
        }
        Resolved::Sde(s) => {
            let sb = sde_bound(&s, args)?;
            let b = budget(args, |alt| sde_entropy(&s, alt, args))?;
            let report = sde_report(&sb, &b)?;
            let csv = match args.csv {
                Some(_) => Some(sweep_csv(args, &b, &|eta| {
                    Ok((
                        xi_infimum(&sb.lambda, eta, Sign::Plus)?.value,
                        xi_infimum(&sb.lambda, eta, Sign::Minus)?.value,
                    ))
                })?),
                None => None,
            };
            Ok(Output::ok(to_json(&report), csv))
        }
    }
}

fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Pass => 0,
        Verdict::Fail => 5,
        Verdict::Inconclusive => 6,
    }
}

fn samples_csv(xs: &[f64]) -> String {
    let mut out = String::from("path,ergodic_average\n");
    for (i, x) in xs.iter().enumerate() {
        writeln!(out, "{i},{}", fmt(*x)).unwrap();
    }
    out
}

pub fn validate(args: &RunArgs) -> Result<Output, CliError> {
    let alt_spec = args
        .alt_model
        .as_deref()
        .ok_or_else(|| CliError::Usage("--alt-model is required".into()))?;
    let seed = args.seed();
    match resolve_model(args.model()?)? {
        Resolved::Chain(c) => {
            let t = args.horizon.unwrap_or(CHAIN_HORIZON);
            let paths = args.paths.unwrap_or(CHAIN_PATHS);
            let values = resolve_observable(args.observable.as_deref(), c.observable.as_deref(), c.generator.dim())?;
            let f = center_observable(&values, &c.measure)?;
            let prepared = prepare_bound(&chain_inputs(&c, &f), method(args)?)?;
            let mut e = chain_entropy(&c, alt_spec)?;
            let alt = resolve_alt_chain(alt_spec, &c)?;
            // the simulated processes are the generators, so use their rate
            if alt.kernel.is_some() {
                let g = ctmc_relent_rate_generators(&alt.generator, &c.generator, &alt.measure)?;
                e.rate = g.rate.min(e.rate);
            }
            let mut report = prepared.report(e.eta(t))?;
            report.entropy = Some(e);
            report.horizon = Some(t);
            let base = Model::Ctmc(c.generator.clone());
            let alt_model = Model::Ctmc(alt.generator);
            let (v, samples) =
                validate_bound_with_samples(&base, &c.measure, &alt_model, &values, t, paths, seed, &report)?;
            let code = verdict_code(v.verdict);
            Ok(Output {
                json: to_json(&v),
                csv: Some(samples_csv(&samples)),
                code,
            })
        }
        Resolved::Sde(s) => {
            let t = args.horizon.unwrap_or(SDE_HORIZON);
            let dt = args.dt.unwrap_or(SDE_DT);
            let paths = args.paths.unwrap_or(SDE_PATHS);
            let sb = sde_bound(&s, args)?;
            let Resolved::Sde(alt) = resolve_model(alt_spec)? else {
                return Err(UqError::InvalidModel("alternative must be a diffusion when the base model is".into()).into());
            };
            let e = sde_entropy(&s, alt_spec, args)?;
            let b = Budget {
                eta: e.eta_upper(t),
                entropy: Some(e),
                horizon: Some(t),
            };
            let report = sde_report(&sb, &b)?;
            let (m0, _) = s
                .gaussian
                .ok_or_else(|| UqError::InvalidModel("base diffusion has no closed-form stationary mean".into()))?;
            let reference: f64 = sb.coeffs.iter().map(|a| a * m0).sum();
            let coeffs = Arc::new(sb.coeffs.clone());
            let f = move |x: &[f64]| -> f64 { coeffs.iter().zip(x).map(|(a, y)| a * y).sum() };
            let init = sde_sampler(&alt)?;
            let avgs = simulate_sde_averages(&*alt.drift, &f, &*init, t, dt, paths, seed)?;
            let mut v = ValidationReport::from_samples(
                &avgs,
                reference,
                report.xi_plus.value,
                report.xi_minus.value,
                t,
            );
            if let Some((mt, _)) = alt.gaussian {
                v.stationary_bias = Some(sb.coeffs.iter().map(|a| a * (mt - m0)).sum());
            }
            let code = verdict_code(v.verdict);
            Ok(Output {
                json: to_json(&v),
                csv: Some(samples_csv(&avgs)),
                code,
            })
        }
    }
}
