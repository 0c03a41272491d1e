//! Turning model, alternative and observable references into values.

use std::path::Path;

use markov_uq::chain::{invariant_measure, parse_model, parse_observable, GeneratorMatrix, Model, StationaryMeasure};
use markov_uq::simulate::perturb_generator;
use markov_uq::spectral::{FunctionalConstants, LiapunovData};
use markov_uq::zoo::{catalog, parse_zoo, SdeModel, ZooModel};
use markov_uq::UqError;

use crate::CliError;

pub struct ChainInput {
    pub model: Model<f64>,
    pub generator: GeneratorMatrix<f64>,
    pub measure: StationaryMeasure<f64>,
    pub constants: Option<FunctionalConstants<f64>>,
    pub observable: Option<Vec<f64>>,
    pub liapunov: Option<LiapunovData<f64>>,
}

pub enum Resolved {
    Chain(Box<ChainInput>),
    Sde(SdeModel<f64>),
}

/// The alternative chain as a generator, plus its kernel when both models
/// are kernels.
pub struct AltChain {
    pub generator: GeneratorMatrix<f64>,
    pub measure: StationaryMeasure<f64>,
    pub kernel: Option<markov_uq::chain::TransitionKernel<f64>>,
}

fn read_file(path: &str) -> Result<String, UqError> {
    std::fs::read_to_string(Path::new(path)).map_err(|e| UqError::InvalidModel(format!("cannot read {path}: {e}")))
}

fn is_zoo(spec: &str) -> bool {
    let name = spec.split_once(':').map_or(spec, |(n, _)| n);
    catalog().iter().any(|(n, _)| *n == name)
}

pub fn resolve_model(spec: &str) -> Result<Resolved, CliError> {
    if is_zoo(spec) {
        return match parse_zoo(spec, &read_file)? {
            ZooModel::Chain {
                model,
                measure,
                constants,
                observable,
                liapunov,
            } => {
                let generator = model.generator();
                let measure = measure.rebind(&generator)?;
                Ok(Resolved::Chain(Box::new(ChainInput {
                    model,
                    generator,
                    measure,
                    constants,
                    observable: Some(observable),
                    liapunov,
                })))
            }
            ZooModel::Sde(s) => Ok(Resolved::Sde(s)),
        };
    }
    let text = if spec.trim_start().starts_with('{') {
        spec.to_string()
    } else {
        read_file(spec)?
    };
    let model = parse_model::<f64>(&text)?;
    let (generator, measure) = model.generator_and_measure()?;
    Ok(Resolved::Chain(Box::new(ChainInput {
        model,
        generator,
        measure,
        constants: None,
        observable: None,
        liapunov: None,
    })))
}

pub fn resolve_observable(spec: Option<&str>, default: Option<&[f64]>, n: usize) -> Result<Vec<f64>, CliError> {
    let values = match spec {
        None => default
            .map(<[f64]>::to_vec)
            .ok_or_else(|| CliError::Usage("--observable is required for this model".into()))?,
        Some(s) if s.trim_start().starts_with('{') => parse_observable(s)?,
        Some(s) if Path::new(s).is_file() => parse_observable(&read_file(s)?)?,
        Some(s) => s
            .split(',')
            .map(|x| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("cannot parse observable entry \"{x}\"")))
            })
            .collect::<Result<_, _>>()?,
    };
    if values.len() != n {
        return Err(UqError::DimensionMismatch {
            expected: n,
            got: values.len(),
        }
        .into());
    }
    if let Some(i) = values.iter().position(|x| !x.is_finite()) {
        return Err(CliError::Usage(format!("observable entry {i} is not finite")));
    }
    Ok(values)
}

fn perturb_params(rest: &str) -> Result<(f64, u64), CliError> {
    let (mut eps, mut seed) = (0.1, 0);
    for part in rest.split(',').filter(|s| !s.is_empty()) {
        let bad = || CliError::Usage(format!("bad perturbation parameter \"{part}\""));
        let (k, v) = part.split_once('=').ok_or_else(bad)?;
        match k.trim() {
            "eps" => eps = v.trim().parse().map_err(|_| bad())?,
            "seed" => seed = v.trim().parse().map_err(|_| bad())?,
            _ => return Err(bad()),
        }
    }
    Ok((eps, seed))
}

pub fn resolve_alt_chain(spec: &str, base: &ChainInput) -> Result<AltChain, CliError> {
    if let Some(rest) = spec.strip_prefix("perturb") {
        let rest = rest.strip_prefix(':').unwrap_or(rest);
        let (eps, seed) = perturb_params(rest)?;
        let generator = perturb_generator(&base.generator, eps, seed)?;
        let measure = invariant_measure(&generator)?;
        return Ok(AltChain {
            generator,
            measure,
            kernel: None,
        });
    }
    let Resolved::Chain(alt) = resolve_model(spec)? else {
        return Err(UqError::InvalidModel("alternative must be a chain when the base model is".into()).into());
    };
    if alt.generator.dim() != base.generator.dim() {
        return Err(UqError::DimensionMismatch {
            expected: base.generator.dim(),
            got: alt.generator.dim(),
        }
        .into());
    }
    let kernel = match (&base.model, alt.model) {
        (Model::Dtmc(_), Model::Dtmc(p)) => Some(p),
        _ => None,
    };
    Ok(AltChain {
        generator: alt.generator,
        measure: alt.measure,
        kernel,
    })
}
