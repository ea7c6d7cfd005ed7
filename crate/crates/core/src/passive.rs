//! Passive learner-unlearner: plain OGD plus calibrated Gaussian noise at each deletion time.

use serde::{Deserialize, Serialize};

use crate::domain::{BallDomain, CostStream, DeletionSchedule, FnClass};
use crate::driver::Driver;
use crate::error::{Error, Result};
use crate::ogd::{nominal_gamma, sensitivity, GammaMode, RateSchedule, SensitivityPolicy};
use crate::rng::NoiseSource;
use crate::trace::{Algorithm, NoiseEvent, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnlearnerConfig {
    pub alpha: f64,
    pub eps: f64,
    #[serde(default = "default_omega")]
    pub omega: f64,
    #[serde(default)]
    pub gamma_mode: GammaMode,
    #[serde(default)]
    pub sensitivity: SensitivityPolicy,
}

fn default_omega() -> f64 {
    1.2
}

impl UnlearnerConfig {
    pub fn new(alpha: f64, eps: f64) -> Self {
        Self {
            alpha,
            eps,
            omega: default_omega(),
            gamma_mode: GammaMode::Nominal,
            sensitivity: SensitivityPolicy::RateTimesLipschitz,
        }
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    pub fn with_gamma_mode(mut self, mode: GammaMode) -> Self {
        self.gamma_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must exceed 1, got {}", self.alpha)));
        }
        if !(self.eps.is_finite() && self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.omega.is_finite() && self.omega > 1.0) {
            return Err(Error::InvalidConfig(format!("omega must exceed 1, got {}", self.omega)));
        }
        if let SensitivityPolicy::Uniform { delta } = self.sensitivity {
            if !(delta.is_finite() && delta >= 0.0) {
                return Err(Error::InvalidConfig(format!("uniform sensitivity must be >= 0, got {delta}")));
            }
        }
        Ok(())
    }

    /// `sqrt(ω i^ω / (2(ω−1)ε))`, the per-deletion noise multiplier.
    pub(crate) fn series_scale(&self, i: usize) -> f64 {
        let w = self.omega;
        (w * (i as f64).powf(w) / (2.0 * (w - 1.0) * self.eps)).sqrt()
    }

    /// Budget consumed by deletion `j`: `αε(ω−1)/(ω j^ω)`.
    pub fn series_term(&self, j: usize) -> f64 {
        let w = self.omega;
        self.alpha * self.eps * (w - 1.0) / (w * (j as f64).powf(w))
    }
}

/// `σᵢ = sqrt(ω i^ω / (2(ω−1)ε)) · γ^gap · Δ`.
pub fn passive_sigma(cfg: &UnlearnerConfig, i: usize, gap: usize, delta_u: f64, gamma: f64) -> Result<f64> {
    check_sigma_inputs(cfg, i, delta_u, gamma)?;
    Ok(cfg.series_scale(i) * gamma.powi(gap_exponent(gap)?) * delta_u)
}

/// Same as [`passive_sigma`] with the contraction factor `Γ = γ^gap` supplied directly.
pub fn passive_sigma_from_factor(cfg: &UnlearnerConfig, i: usize, factor: f64, delta_u: f64) -> Result<f64> {
    check_sigma_inputs(cfg, i, delta_u, 1.0)?;
    if !(factor.is_finite() && factor >= 0.0) {
        return Err(Error::InvalidInput(format!("contraction factor must be >= 0, got {factor}")));
    }
    Ok(cfg.series_scale(i) * factor * delta_u)
}

pub(crate) fn check_sigma_inputs(cfg: &UnlearnerConfig, i: usize, delta_u: f64, gamma: f64) -> Result<()> {
    cfg.validate()?;
    if i == 0 {
        return Err(Error::InvalidInput("deletion ordinal is 1-based".into()));
    }
    if !(delta_u.is_finite() && delta_u >= 0.0) {
        return Err(Error::InvalidInput(format!("sensitivity must be >= 0, got {delta_u}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidInput(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    Ok(())
}

pub(crate) fn gap_exponent(gap: usize) -> Result<i32> {
    i32::try_from(gap).map_err(|_| Error::InvalidInput(format!("gap {gap} too large")))
}

/// Contraction factor and sensitivity for deletion `(u, τ)` as seen by the running learner.
pub(crate) struct DeletionCalibration {
    pub factor: f64,
    pub delta: f64,
    pub contractive: bool,
}

pub(crate) fn calibrate(driver: &Driver, cfg: &UnlearnerConfig, u: usize, tau: usize) -> Result<DeletionCalibration> {
    let (product, contractive) = driver.gamma_product(u, tau);
    let factor = match cfg.gamma_mode {
        GammaMode::Nominal => nominal_gamma(&driver.cls).powi(gap_exponent(tau - u)?),
        GammaMode::PerStepProduct => product,
    };
    let delta = if driver.stream.at(u).is_skip() {
        0.0
    } else {
        sensitivity(&cfg.sensitivity, &driver.cls, driver.trace.rates[u - 1])
    };
    Ok(DeletionCalibration { factor, delta, contractive })
}

/// Plain projected OGD from the origin.
pub fn run_ogd(stream: &CostStream, rs: &RateSchedule, cls: &FnClass, dom: &BallDomain) -> Result<RunTrace> {
    let empty = DeletionSchedule::empty();
    let mut drv = Driver::new(Algorithm::Ogd, stream, &empty, rs, cls, dom, 0)?;
    for t in 1..=stream.len() {
        drv.learn(t)?;
        drv.emit();
    }
    Ok(drv.finish())
}

pub fn run_passive(
    stream: &CostStream,
    sched: &DeletionSchedule,
    rs: &RateSchedule,
    cfg: &UnlearnerConfig,
    cls: &FnClass,
    dom: &BallDomain,
    seed: u64,
) -> Result<RunTrace> {
    cfg.validate()?;
    let mut drv = Driver::new(Algorithm::Passive, stream, sched, rs, cls, dom, seed)?;
    drv.trace.config = serde_json::to_value(cfg).expect("config serializes");
    let mut noise = NoiseSource::new(seed);
    for t in 1..=stream.len() {
        drv.learn(t)?;
        if let Some(n) = sched.ordinal_at(t) {
            let del = sched.entries()[n];
            let cal = calibrate(&drv, cfg, del.index, t)?;
            if !cal.contractive {
                drv.trace.certification_refused = true;
                drv.trace.warnings.push(format!(
                    "deletion {} spans a step with eta > 2/beta; certification refused",
                    n + 1
                ));
            }
            let sigma = cfg.series_scale(n + 1) * cal.factor * cal.delta;
            let pre_noise = drv.state.z.clone();
            let xi = noise.gaussian(drv.dim, sigma);
            drv.state.z += &xi;
            drv.trace.cost.unlearning += 1;
            drv.mark_unlearn();
            drv.trace.noise_events.push(NoiseEvent {
                i: n + 1,
                t,
                index: del.index,
                sigma,
                delta: cal.delta,
                gamma_factor: cal.factor,
                xi,
                pre_noise,
            });
        }
        drv.emit();
    }
    Ok(drv.finish())
}
