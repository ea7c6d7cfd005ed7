//! Active learner-unlearner: descent-to-delete at each deletion time, plus an experimental
//! Newton-correction variant.

use nalgebra::Cholesky;
use serde::{Deserialize, Serialize};

use crate::domain::{AverageLoss, BallDomain, CostStream, DeletionSchedule, FnClass, QuadraticSum, Vector};
use crate::driver::Driver;
use crate::error::{Error, Result};
use crate::ogd::{gradient_step, step_contraction, RateSchedule};
use crate::passive::{calibrate, check_sigma_inputs, gap_exponent, UnlearnerConfig};
use crate::rng::NoiseSource;
use crate::trace::{Algorithm, NoiseEvent, PhaseRecord, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActiveConfig {
    pub base: UnlearnerConfig,
    /// Fixed `I₁` for every deletion; `None` uses [`required_iters`] per deletion.
    #[serde(default)]
    pub i1: Option<usize>,
    /// Fixed `I₂`; `None` uses [`required_iters`] with the schedule's `k`.
    #[serde(default)]
    pub i2: Option<usize>,
    /// Inner gradient step; `None` means `1/(β+μ)`.
    #[serde(default)]
    pub inner_rate: Option<f64>,
    /// Reject deletions with `uᵢ ∉ (τᵢ₋₁, τᵢ]` instead of voiding certification.
    #[serde(default = "default_strict")]
    pub strict_shape: bool,
    /// Hessian-Lipschitz constant `M` for the second-order noise scale.
    #[serde(default)]
    pub hessian_lipschitz: f64,
}

fn default_strict() -> bool {
    true
}

impl ActiveConfig {
    pub fn new(base: UnlearnerConfig) -> Self {
        Self { base, i1: None, i2: None, inner_rate: None, strict_shape: true, hessian_lipschitz: 0.0 }
    }

    pub fn inner_rate_for(&self, cls: &FnClass) -> f64 {
        self.inner_rate.unwrap_or(1.0 / (cls.beta + cls.mu))
    }
}

/// Ceiling of `x` that ignores rounding noise just above an integer.
fn ceil_tol(x: f64) -> usize {
    if x <= 0.0 {
        0
    } else {
        (x - 1e-9).ceil().max(0.0) as usize
    }
}

/// `(⌈log_{1/γ}(μDτ/L)⌉, ⌈2.2 log_{1/γ} k⌉)`, both floored at zero.
pub fn required_iters(gamma: f64, mu: f64, diameter: f64, lipschitz: f64, tau_i: usize, k: usize) -> Result<(usize, usize)> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidInput(format!("gamma must be positive, got {gamma}")));
    }
    if gamma >= 1.0 {
        return Err(Error::NotStronglyConvex(format!("gamma = {gamma} gives no contraction")));
    }
    if !(mu > 0.0 && diameter > 0.0 && lipschitz > 0.0) {
        return Err(Error::InvalidInput("need mu, D, L > 0".into()));
    }
    let inv = (1.0 / gamma).ln();
    let i1 = ceil_tol((mu * diameter * tau_i as f64 / lipschitz).ln() / inv);
    let i2 = if k <= 1 { 0 } else { ceil_tol(2.2 * (k as f64).ln() / inv) };
    Ok((i1, i2))
}

/// `σᵢ = γ^{I₂} sqrt(i^ω ω / (2(ω−1)ε)) · L(6i + L γ^{τᵢ−uᵢ} η_{uᵢ}) / (τᵢ μ)`.
#[allow(clippy::too_many_arguments)]
pub fn active_sigma(
    cfg: &ActiveConfig,
    i: usize,
    tau_i: usize,
    u_i: usize,
    eta_u: f64,
    lipschitz: f64,
    mu: f64,
    gamma: f64,
) -> Result<f64> {
    let i2 = cfg
        .i2
        .ok_or_else(|| Error::InvalidConfig("active_sigma needs a resolved I2".into()))?;
    check_sigma_inputs(&cfg.base, i, 0.0, gamma)?;
    if u_i > tau_i {
        return Err(Error::InvalidInput(format!("u = {u_i} after tau = {tau_i}")));
    }
    let inner = gamma.powi(gap_exponent(i2)?);
    let outer = gamma.powi(gap_exponent(tau_i - u_i)?);
    sigma_parts(&cfg.base, i, tau_i, inner, outer, eta_u, lipschitz, mu)
}

#[allow(clippy::too_many_arguments)]
fn sigma_parts(
    base: &UnlearnerConfig,
    i: usize,
    tau: usize,
    inner_factor: f64,
    ogd_factor: f64,
    eta_u: f64,
    lipschitz: f64,
    mu: f64,
) -> Result<f64> {
    if !(mu > 0.0) {
        return Err(Error::NotStronglyConvex("active noise scale needs mu > 0".into()));
    }
    if tau == 0 || !(eta_u.is_finite() && eta_u >= 0.0) || !(lipschitz >= 0.0) {
        return Err(Error::InvalidInput("need tau >= 1, eta_u >= 0, L >= 0".into()));
    }
    let stab = 6.0 * i as f64 + lipschitz * ogd_factor * eta_u;
    Ok(inner_factor * base.series_scale(i) * (lipschitz * stab / (tau as f64 * mu)))
}

/// Distance bound after both phases: `γ^{I₂}(γ^{I₁} D + 2iL/(nμ))`, `n` the number of seen losses.
pub fn phase_distance_bound(gamma: f64, i1: usize, i2: usize, diameter: f64, i: usize, lipschitz: f64, n_seen: usize, mu: f64) -> f64 {
    gamma.powi(i2 as i32) * (gamma.powi(i1 as i32) * diameter + 2.0 * i as f64 * lipschitz / (n_seen as f64 * mu))
}

/// Shift bound `2(i+1) γ^{I₂} L/(τμ)` from chaining the per-deletion distances; compare with the `6i` constant.
pub fn chained_shift_bound(gamma: f64, i2: usize, i: usize, lipschitz: f64, tau: usize, mu: f64) -> f64 {
    2.0 * (i as f64 + 1.0) * gamma.powi(i2 as i32) * lipschitz / (tau as f64 * mu)
}

/// Runs `steps` projected GD steps with rate `h` on `avg`.
fn descend(z: &mut Vector, avg: &AverageLoss, h: f64, steps: usize, radius: f64) {
    for _ in 0..steps {
        let g = avg.grad(z);
        *z = gradient_step(z, &g, h, radius);
    }
}

struct ActivePlan {
    h: f64,
    gamma_inner: f64,
    i2: usize,
}

fn prepare(
    drv: &mut Driver,
    sched: &DeletionSchedule,
    acfg: &ActiveConfig,
    cls: &FnClass,
) -> Result<ActivePlan> {
    acfg.base.validate()?;
    if !(cls.mu > 0.0) {
        return Err(Error::NotStronglyConvex("active unlearning needs mu > 0".into()));
    }
    let h = acfg.inner_rate_for(cls);
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::InvalidConfig(format!("inner rate must be positive, got {h}")));
    }
    let mut prev = 0;
    for (n, d) in sched.entries().iter().enumerate() {
        if d.index <= prev {
            let msg = format!("deletion {} has u = {} outside ({prev}, {}]", n + 1, d.index, d.time);
            if acfg.strict_shape {
                return Err(Error::ScheduleShape(msg));
            }
            drv.trace.certification_refused = true;
            drv.trace.warnings.push(format!("{msg}; certification void"));
        }
        prev = d.time;
    }
    let gamma_inner = step_contraction(cls, h);
    let i2 = match acfg.i2 {
        Some(v) => v,
        None if sched.len() <= 1 => 0,
        None => required_iters(gamma_inner, cls.mu, drv.radius * 2.0, cls.lipschitz, 1, sched.len())?.1,
    };
    drv.trace.config = serde_json::to_value(acfg).expect("config serializes");
    Ok(ActivePlan { h, gamma_inner, i2 })
}

fn resolve_i1(acfg: &ActiveConfig, plan: &ActivePlan, cls: &FnClass, diameter: f64, tau: usize, k: usize) -> Result<usize> {
    match acfg.i1 {
        Some(v) => Ok(v),
        None => Ok(required_iters(plan.gamma_inner, cls.mu, diameter, cls.lipschitz, tau, k)?.0),
    }
}

pub fn run_active(
    stream: &CostStream,
    sched: &DeletionSchedule,
    rs: &RateSchedule,
    acfg: &ActiveConfig,
    cls: &FnClass,
    dom: &BallDomain,
    seed: u64,
) -> Result<RunTrace> {
    let mut drv = Driver::new(Algorithm::Active, stream, sched, rs, cls, dom, seed)?;
    let plan = prepare(&mut drv, sched, acfg, cls)?;
    let mut noise = NoiseSource::new(seed);
    let k = sched.len();
    for t in 1..=stream.len() {
        drv.learn(t)?;
        if let Some(n) = sched.ordinal_at(t) {
            let del = sched.entries()[n];
            let i = n + 1;
            let i1 = resolve_i1(acfg, &plan, cls, dom.diameter(), t, k)?;
            let seen = stream.costs_up_to(t, &[]);
            let kept = stream.costs_up_to(t, &sched.first(i).indices());
            if seen.is_empty() || kept.is_empty() {
                return Err(Error::InvalidInput(format!("no losses to descend on at t={t}")));
            }
            let mut z = drv.state.z.clone();
            descend(&mut z, &AverageLoss::new(seen)?, plan.h, i1, drv.radius);
            descend(&mut z, &AverageLoss::new(kept)?, plan.h, plan.i2, drv.radius);

            let cal = calibrate(&drv, &acfg.base, del.index, t)?;
            let eta_u = drv.trace.rates[del.index - 1];
            let inner = plan.gamma_inner.powi(gap_exponent(plan.i2)?);
            let sigma = sigma_parts(&acfg.base, i, t, inner, cal.factor, eta_u, cls.lipschitz, cls.mu)?;
            let xi = noise.gaussian(drv.dim, sigma);
            drv.trace.phases.push(PhaseRecord { i, t, i1, i2: plan.i2, inner_steps: i1 + plan.i2, post_phase: z.clone() });
            drv.trace.noise_events.push(NoiseEvent {
                i,
                t,
                index: del.index,
                sigma,
                delta: cal.delta,
                gamma_factor: cal.factor,
                xi: xi.clone(),
                pre_noise: z.clone(),
            });
            drv.trace.cost.unlearning += i1 + plan.i2;
            drv.state.z = z + xi;
            drv.mark_unlearn();
        }
        drv.emit();
    }
    Ok(drv.finish())
}

/// `z + H⁻¹ g` where `H` is the (summed) retained Hessian and `g` the summed deleted gradients.
pub fn newton_correction(z: &Vector, retained_hessian: &nalgebra::DMatrix<f64>, deleted_grad_sum: &Vector) -> Result<Vector> {
    let chol = Cholesky::new(retained_hessian.clone())
        .ok_or_else(|| Error::Numeric("retained Hessian is not positive definite".into()))?;
    Ok(z + chol.solve(deleted_grad_sum))
}

/// Second-order noise scale with the `(M/μ − 1)` factor clamped at zero.
pub fn second_order_sigma(base: &UnlearnerConfig, i: usize, k: usize, tau: usize, cls: &FnClass, hessian_lipschitz: f64) -> Result<f64> {
    base.validate()?;
    if !(cls.mu > 0.0) {
        return Err(Error::NotStronglyConvex("second-order noise scale needs mu > 0".into()));
    }
    if tau <= k.max(i) {
        return Err(Error::InvalidInput(format!("tau = {tau} must exceed k = {k} and i = {i}")));
    }
    let mu = cls.mu;
    let bracket = 2.0 + k as f64 * cls.beta / (mu * (tau - k) as f64) * (hessian_lipschitz / mu - 1.0).max(0.0);
    let scale = (base.alpha * (i as f64).powf(base.omega) * base.omega / (2.0 * (base.omega - 1.0) * base.eps)).sqrt();
    Ok(scale * cls.lipschitz * bracket / (mu * (tau - i) as f64))
}

/// Experimental: `I₁` GD steps on all seen losses, a Newton correction removing the deleted
/// losses, then noise. Carries no certified budget.
pub fn run_active_second_order(
    stream: &CostStream,
    sched: &DeletionSchedule,
    rs: &RateSchedule,
    acfg: &ActiveConfig,
    cls: &FnClass,
    dom: &BallDomain,
    seed: u64,
) -> Result<RunTrace> {
    let mut drv = Driver::new(Algorithm::ActiveSecondOrder, stream, sched, rs, cls, dom, seed)?;
    let plan = prepare(&mut drv, sched, acfg, cls)?;
    drv.trace.experimental = true;
    drv.trace.warnings.push("experimental: no certified eps".into());
    let mut noise = NoiseSource::new(seed);
    let k = sched.len();
    for t in 1..=stream.len() {
        drv.learn(t)?;
        if let Some(n) = sched.ordinal_at(t) {
            let del = sched.entries()[n];
            let i = n + 1;
            let i1 = resolve_i1(acfg, &plan, cls, dom.diameter(), t, k)?;
            let seen = stream.costs_up_to(t, &[]);
            let deleted = sched.first(i).indices();
            let kept = stream.costs_up_to(t, &deleted);
            let kept_sum = QuadraticSum::from_costs(&kept)
                .ok_or_else(|| Error::Unsupported("second-order unlearning needs quadratic losses".into()))?;
            let mut z = drv.state.z.clone();
            descend(&mut z, &AverageLoss::new(seen)?, plan.h, i1, drv.radius);
            let mut g = Vector::zeros(drv.dim);
            for &u in &deleted {
                if let Some(f) = stream.at(u).cost() {
                    g += f.value_grad_unchecked(&z).1;
                }
            }
            let z = newton_correction(&z, &kept_sum.hessian, &g)?;
            let sigma = second_order_sigma(&acfg.base, i, k, t, cls, acfg.hessian_lipschitz)?;
            let xi = noise.gaussian(drv.dim, sigma);
            drv.trace.phases.push(PhaseRecord { i, t, i1, i2: 0, inner_steps: i1 + 1, post_phase: z.clone() });
            drv.trace.noise_events.push(NoiseEvent {
                i,
                t,
                index: del.index,
                sigma,
                delta: 0.0,
                gamma_factor: 1.0,
                xi: xi.clone(),
                pre_noise: z.clone(),
            });
            drv.trace.cost.unlearning += i1 + 1;
            drv.state.z = z + xi;
            drv.mark_unlearn();
        }
        drv.emit();
    }
    Ok(drv.finish())
}
