//! Projected online gradient descent: rate schedules, the update map and its
//! contraction/sensitivity constants.

use serde::{Deserialize, Serialize};

use crate::domain::{project_unchecked, BallDomain, CostFn, DeletionSchedule, FnClass, StreamItem, Vector};
use crate::error::{Error, Result};

const RATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RateSchedule {
    /// `1/(μ t)`.
    ScDecreasing { mu: f64 },
    /// `D/(L √t)`.
    ConvexDecreasing { diameter: f64, lipschitz: f64 },
    /// `D / max(√p(t), floor)` with `p` the running sum of squared gradient norms.
    Adaptive { diameter: f64, floor: f64 },
    Constant { eta: f64 },
}

impl RateSchedule {
    /// Adaptive schedule with the warm-start floor `β/2`.
    pub fn adaptive(diameter: f64, beta: f64) -> Self {
        RateSchedule::Adaptive { diameter, floor: beta / 2.0 }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, RateSchedule::Adaptive { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let ok = match *self {
            RateSchedule::ScDecreasing { mu } => pos(mu),
            RateSchedule::ConvexDecreasing { diameter, lipschitz } => pos(diameter) && pos(lipschitz),
            RateSchedule::Adaptive { diameter, floor } => pos(diameter) && pos(floor),
            RateSchedule::Constant { eta } => pos(eta),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("rate schedule parameters must be positive: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdaptiveState {
    pub p: f64,
}

impl AdaptiveState {
    pub fn observe(&mut self, grad_norm_sq: f64) {
        self.p += grad_norm_sq;
    }
}

pub fn rate(sched: &RateSchedule, t: usize, adapt: &AdaptiveState) -> Result<f64> {
    if t == 0 {
        return Err(Error::InvalidInput("rate index t is 1-based".into()));
    }
    sched.validate()?;
    let t = t as f64;
    Ok(match *sched {
        RateSchedule::ScDecreasing { mu } => 1.0 / (mu * t),
        RateSchedule::ConvexDecreasing { diameter, lipschitz } => diameter / (lipschitz * t.sqrt()),
        RateSchedule::Adaptive { diameter, floor } => diameter / adapt.p.sqrt().max(floor),
        RateSchedule::Constant { eta } => eta,
    })
}

/// Constant rate balancing the OGD and noise terms of the worst-case regret bound.
pub fn constant_rate_worst_case(diameter: f64, lipschitz: f64, horizon: usize, k: usize, d: usize, eps: f64) -> Result<f64> {
    if !(diameter > 0.0 && lipschitz > 0.0 && eps > 0.0) || horizon == 0 || d == 0 {
        return Err(Error::InvalidInput(format!(
            "need D, L, eps > 0 and T, d >= 1 (D={diameter}, L={lipschitz}, eps={eps}, T={horizon}, d={d})"
        )));
    }
    let noise = 1.0 + 1.2 * (k as f64).powf(2.2) * d as f64 / (0.42 * eps);
    Ok((2.0 * diameter * diameter / (horizon as f64 * lipschitz * lipschitz * noise)).sqrt())
}

pub(crate) fn gradient_step(z: &Vector, grad: &Vector, eta: f64, radius: f64) -> Vector {
    project_unchecked(&(z - grad * eta), radius)
}

/// `Π[z − η ∇f(z)]`, or `z` unchanged for Skip.
pub fn ogd_step(z_prev: &Vector, f: &StreamItem, eta: f64, dom: &BallDomain) -> Result<Vector> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidInput(format!("step size must be positive, got {eta}")));
    }
    match f {
        StreamItem::Skip => Ok(z_prev.clone()),
        StreamItem::Cost(f) => {
            let (_, g) = f.eval_grad(z_prev)?;
            Ok(gradient_step(z_prev, &g, eta, dom.radius()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionInfo {
    pub gamma: f64,
    pub gamma_nominal: f64,
}

/// `max(|1−ημ|, |1−ηβ|)` without clamping; exceeds 1 when `η > 2/β`.
pub fn step_contraction(cls: &FnClass, eta: f64) -> f64 {
    (1.0 - eta * cls.mu).abs().max((1.0 - eta * cls.beta).abs())
}

/// `(β/μ−1)/(β/μ+1)` for strongly convex classes, 1 otherwise.
pub fn nominal_gamma(cls: &FnClass) -> f64 {
    if cls.mu > 0.0 {
        let cond = cls.beta / cls.mu;
        ((cond - 1.0) / (cond + 1.0)).max(f64::MIN_POSITIVE)
    } else {
        1.0
    }
}

pub fn contraction_coeff(cls: &FnClass, eta: f64) -> Result<ContractionInfo> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::InvalidInput(format!("step size must be positive, got {eta}")));
    }
    if cls.beta > 0.0 && eta > (2.0 / cls.beta) * (1.0 + RATE_TOL) {
        return Err(Error::NonContractiveStep { eta, limit: 2.0 / cls.beta });
    }
    Ok(ContractionInfo {
        gamma: step_contraction(cls, eta).clamp(f64::MIN_POSITIVE, 1.0),
        gamma_nominal: nominal_gamma(cls),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GammaMode {
    #[default]
    Nominal,
    PerStepProduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SensitivityPolicy {
    /// `Δₜ = ηₜ L`.
    #[default]
    RateTimesLipschitz,
    Uniform { delta: f64 },
}

pub fn sensitivity(pol: &SensitivityPolicy, cls: &FnClass, eta_t: f64) -> f64 {
    match *pol {
        SensitivityPolicy::RateTimesLipschitz => eta_t * cls.lipschitz,
        SensitivityPolicy::Uniform { delta } => delta,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub pairs_checked: usize,
    pub skipped_pairs: usize,
    pub max_contraction_ratio: Option<f64>,
    /// `None` when `η > 2/β` for the sampled class.
    pub gamma: Option<f64>,
    pub contraction_ok: bool,
    pub max_step_norm: f64,
    pub sensitivity_bound: f64,
    pub sensitivity_ok: bool,
    /// Each step reads only `(fₜ, zₜ₋₁)`; holds by construction.
    pub markov_structural: bool,
}

/// Empirical witnesses for the Markov, contraction and sensitivity conditions.
pub fn check_conditions(f_samples: &[CostFn], z_samples: &[Vector], eta: f64, dom: &BallDomain) -> Result<ConditionReport> {
    if f_samples.is_empty() || z_samples.is_empty() {
        return Err(Error::InvalidInput("condition check needs samples".into()));
    }
    let cls = f_samples
        .iter()
        .map(|f| *f.class())
        .reduce(|a, b| a.join(&b))
        .expect("nonempty");
    let gamma = contraction_coeff(&cls, eta).ok().map(|c| c.gamma);
    let bound = eta * cls.lipschitz;
    let n = z_samples.len();
    let (mut pairs, mut skipped) = (0, 0);
    let mut max_ratio: Option<f64> = None;
    let mut contraction_ok = true;
    let mut max_step: f64 = 0.0;
    for f in f_samples {
        let item = StreamItem::Cost(f.clone());
        let outs = z_samples
            .iter()
            .map(|z| ogd_step(z, &item, eta, dom))
            .collect::<Result<Vec<_>>>()?;
        for j in 0..n {
            max_step = max_step.max((&outs[j] - &z_samples[j]).norm());
            if n < 2 {
                skipped += 1;
                continue;
            }
            let k = (j + 1) % n;
            let din = (&z_samples[j] - &z_samples[k]).norm();
            if din == 0.0 {
                skipped += 1;
                continue;
            }
            let dout = (&outs[j] - &outs[k]).norm();
            pairs += 1;
            let r = dout / din;
            max_ratio = Some(max_ratio.map_or(r, |m: f64| m.max(r)));
            if let Some(g) = gamma {
                contraction_ok &= dout <= g * din + 1e-10;
            }
        }
    }
    Ok(ConditionReport {
        pairs_checked: pairs,
        skipped_pairs: skipped,
        max_contraction_ratio: max_ratio,
        gamma,
        contraction_ok: gamma.is_some() && contraction_ok,
        max_step_norm: max_step,
        sensitivity_bound: bound,
        sensitivity_ok: max_step <= bound + 1e-10,
        markov_structural: true,
    })
}

/// Warnings for deletion indices below the regret theorems' index preconditions.
pub fn index_precondition_warnings(sched: &DeletionSchedule, rs: &RateSchedule, cls: &FnClass, dom: &BallDomain) -> Vec<String> {
    let threshold = match rs {
        RateSchedule::ScDecreasing { .. } if cls.mu > 0.0 => 0.5 + cls.beta / cls.mu,
        RateSchedule::ConvexDecreasing { .. } if cls.lipschitz > 0.0 => {
            let d = dom.diameter();
            cls.beta * cls.beta * d * d / (4.0 * cls.lipschitz * cls.lipschitz)
        }
        _ => return Vec::new(),
    };
    sched
        .entries()
        .iter()
        .filter(|e| (e.index as f64) < threshold)
        .map(|e| format!("deletion index {} below {threshold:.3}; regret bound not claimed", e.index))
        .collect()
}

/// One learner's OGD state: point, rate clock and adaptive accumulator.
#[derive(Debug, Clone)]
pub(crate) struct OgdState {
    pub z: Vector,
    pub clock: usize,
    pub adapt: AdaptiveState,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct StepRecord {
    pub eta: f64,
    pub loss: f64,
    pub gamma_raw: f64,
    pub skip: bool,
}

impl OgdState {
    pub fn new(z: Vector) -> Self {
        Self { z, clock: 0, adapt: AdaptiveState::default() }
    }

    /// Plays `zₜ₋₁` against `item`, then advances the clock and applies the update.
    pub fn step(&mut self, item: &StreamItem, rs: &RateSchedule, cls: &FnClass, radius: f64) -> Result<StepRecord> {
        self.clock += 1;
        match item {
            StreamItem::Skip => {
                let eta = rate(rs, self.clock, &self.adapt)?;
                Ok(StepRecord { eta, loss: 0.0, gamma_raw: 1.0, skip: true })
            }
            StreamItem::Cost(f) => {
                let (loss, g) = f.value_grad_unchecked(&self.z);
                if !(loss.is_finite() && g.iter().all(|v| v.is_finite())) {
                    return Err(Error::Numeric(format!("non-finite loss or gradient at t={}", self.clock)));
                }
                if rs.is_adaptive() {
                    self.adapt.observe(g.norm_squared());
                }
                let eta = rate(rs, self.clock, &self.adapt)?;
                self.z = gradient_step(&self.z, &g, eta, radius);
                Ok(StepRecord { eta, loss, gamma_raw: step_contraction(cls, eta), skip: false })
            }
        }
    }
}
