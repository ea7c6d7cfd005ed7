//! Experiment configuration: strict JSON, resolved into concrete library inputs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::generators::{gen_stream, GenParams, GeneratedStream, GeneratorSpec, LipschitzPolicy};
use super::schedules::{build_schedule, ScheduleSpec};
use crate::active::ActiveConfig;
use crate::domain::{BallDomain, DeletionSchedule};
use crate::error::{Error, Result};
use crate::ogd::{constant_rate_worst_case, RateSchedule};
use crate::passive::UnlearnerConfig;

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Passive,
    Active,
    Active2,
    Retrain,
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSpec {
    pub mu: f64,
    pub beta: f64,
    #[serde(default)]
    pub lipschitz: LipschitzPolicy,
}

/// Rate schedules with `D = 2R`, `L` and `μ` taken from the resolved class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateSpec {
    ScDecreasing,
    ConvexDecreasing,
    Adaptive,
    Constant { eta: f64 },
    /// The constant rate minimizing the worst-case bound for this `T`, `k`, `d`, `ε`.
    WorstCaseConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActiveOptions {
    #[serde(default)]
    pub i1: Option<usize>,
    #[serde(default)]
    pub i2: Option<usize>,
    #[serde(default)]
    pub inner_rate: Option<f64>,
    #[serde(default = "yes")]
    pub strict_shape: bool,
    #[serde(default)]
    pub hessian_lipschitz: f64,
}

impl Default for ActiveOptions {
    fn default() -> Self {
        Self { i1: None, i2: None, inner_rate: None, strict_shape: true, hessian_lipschitz: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyOptions {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Monte-Carlo samples per interval; 0 skips the check.
    #[serde(default)]
    pub mc_samples: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { enabled: true, mc_samples: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub dimension: usize,
    pub horizon: usize,
    pub radius: f64,
    pub class: ClassSpec,
    pub generator: GeneratorSpec,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    pub algorithm: AlgorithmKind,
    pub rate: RateSpec,
    pub unlearner: UnlearnerConfig,
    #[serde(default)]
    pub active: ActiveOptions,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub certify: CertifyOptions,
}

fn at(path: &str, msg: impl std::fmt::Display) -> Error {
    Error::InvalidConfig(format!("{path}: {msg}"))
}

/// Parses a config, reporting the JSON path of the first offending field.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        at(if path.is_empty() { "." } else { &path }, e.into_inner())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn config_from_value(v: serde_json::Value) -> Result<ExperimentConfig> {
    parse_config(&v.to_string())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(at("dimension", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(at("horizon", "must be at least 1"));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(at("radius", "must be positive and finite"));
        }
        let c = &self.class;
        if !(c.beta.is_finite() && c.beta > 0.0) {
            return Err(at("class.beta", "must be positive and finite"));
        }
        if !(c.mu >= 0.0 && c.mu <= c.beta) {
            return Err(at("class.mu", "must lie in [0, beta]"));
        }
        if let LipschitzPolicy::Fixed { value } = c.lipschitz {
            if !(value.is_finite() && value > 0.0) {
                return Err(at("class.lipschitz.value", "must be positive and finite"));
            }
        }
        match self.generator {
            GeneratorSpec::ConvexQg { kappa, .. } => {
                if c.mu != 0.0 {
                    return Err(at("class.mu", "convex-qg items are rank-deficient; set mu to 0"));
                }
                if kappa.is_some_and(|k| !(k.is_finite() && k > 0.0)) {
                    return Err(at("generator.kappa", "must be positive"));
                }
            }
            _ if c.mu <= 0.0 => return Err(at("class.mu", "this generator needs mu > 0")),
            _ => {}
        }
        if matches!(self.rate, RateSpec::ScDecreasing) && c.mu <= 0.0 {
            return Err(at("rate.kind", "sc-decreasing needs class.mu > 0"));
        }
        if let RateSpec::Constant { eta } = self.rate {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(at("rate.eta", "must be positive"));
            }
        }
        if matches!(self.algorithm, AlgorithmKind::Active | AlgorithmKind::Active2) && c.mu <= 0.0 {
            return Err(at("algorithm", "active unlearning needs class.mu > 0"));
        }
        self.unlearner.validate().map_err(|e| at("unlearner", bare(e)))?;
        if let Some(h) = self.active.inner_rate {
            if !(h.is_finite() && h > 0.0) {
                return Err(at("active.inner_rate", "must be positive"));
            }
        }
        if !(self.active.hessian_lipschitz.is_finite() && self.active.hessian_lipschitz >= 0.0) {
            return Err(at("active.hessian_lipschitz", "must be >= 0"));
        }
        if self.seeds.is_empty() {
            return Err(at("seeds", "at least one seed is required"));
        }
        let mut seen = std::collections::BTreeSet::new();
        if let Some(s) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(at("seeds", format!("duplicate seed {s}")));
        }
        if !matches!(self.schedule, ScheduleSpec::Random { .. }) {
            build_schedule(&self.schedule, self.horizon, 0).map_err(|e| at("schedule", bare(e)))?;
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))[..16].to_string()
    }

    pub fn active_config(&self) -> ActiveConfig {
        ActiveConfig {
            base: self.unlearner,
            i1: self.active.i1,
            i2: self.active.i2,
            inner_rate: self.active.inner_rate,
            strict_shape: self.active.strict_shape,
            hessian_lipschitz: self.active.hessian_lipschitz,
        }
    }

    pub fn domain(&self) -> BallDomain {
        BallDomain::new(self.radius).expect("radius validated")
    }

    /// Builds the schedule, stream, class and rate schedule for one seed.
    pub fn resolve(&self, seed: u64) -> Result<ResolvedRun> {
        let sched = build_schedule(&self.schedule, self.horizon, seed).map_err(|e| at("schedule", bare(e)))?;
        let params = GenParams {
            dimension: self.dimension,
            horizon: self.horizon,
            radius: self.radius,
            mu: self.class.mu,
            beta: self.class.beta,
            lipschitz: self.class.lipschitz,
            deletion_times: sched.entries().iter().map(|d| d.time).collect(),
        };
        let generated = gen_stream(&self.generator, &params, seed)?;
        let dom = self.domain();
        let cls = generated.class;
        let diameter = dom.diameter();
        let rate = match self.rate {
            RateSpec::ScDecreasing => RateSchedule::ScDecreasing { mu: cls.mu },
            RateSpec::ConvexDecreasing => RateSchedule::ConvexDecreasing { diameter, lipschitz: cls.lipschitz },
            RateSpec::Adaptive => RateSchedule::adaptive(diameter, cls.beta),
            RateSpec::Constant { eta } => RateSchedule::Constant { eta },
            RateSpec::WorstCaseConstant => RateSchedule::Constant {
                eta: constant_rate_worst_case(
                    diameter,
                    cls.lipschitz,
                    self.horizon,
                    sched.len(),
                    self.dimension,
                    self.unlearner.eps,
                )
                .map_err(|e| at("rate", bare(e)))?,
            },
        };
        Ok(ResolvedRun { sched, generated, dom, rate })
    }
}

/// Message of an error without its category prefix.
fn bare(e: Error) -> String {
    match e {
        Error::InvalidInput(m)
        | Error::InvalidConfig(m)
        | Error::InvalidSchedule(m)
        | Error::Generator(m)
        | Error::Precondition(m)
        | Error::Unsupported(m) => m,
        other => other.to_string(),
    }
}

#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub sched: DeletionSchedule,
    pub generated: GeneratedStream,
    pub dom: BallDomain,
    pub rate: RateSchedule,
}
