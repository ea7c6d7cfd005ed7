//! Dynamic regret against per-epoch ERM comparators, quadratic-growth measurement and the
//! closed-form regret bounds.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::domain::{project_unchecked, BallDomain, CostFn, CostStream, DeletionSchedule, QuadraticSum, Vector};
use crate::error::{Error, Result};
use crate::rng::NoiseSource;
use crate::trace::RunTrace;

/// Ridge added to the aggregate Hessian, selecting the minimum-norm minimizer when it is not unique.
const RIDGE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ErmSolution {
    pub z: Vector,
    /// Whether the constraint `‖z‖ ≤ R` is active.
    pub binding: bool,
    /// Whether the aggregate is flat in some direction, so the minimizer was regularized.
    pub non_unique: bool,
}

/// Minimizer of `Σ fⱼ` over the ball.
pub fn solve_erm(losses: &[CostFn], dom: &BallDomain, tol: f64) -> Result<ErmSolution> {
    if losses.is_empty() {
        return Err(Error::InvalidInput("ERM over an empty set of losses".into()));
    }
    match QuadraticSum::from_costs(losses) {
        Some(sum) => Ok(solve_quadratic_erm(&sum, dom)),
        None => solve_general_erm(losses, dom, tol),
    }
}

/// Exact constrained minimizer of a quadratic sum via its eigendecomposition and a
/// bisection on the trust-region multiplier.
pub fn solve_quadratic_erm(sum: &QuadraticSum, dom: &BallDomain) -> ErmSolution {
    let d = sum.linear.len();
    let eig = SymmetricEigen::new(sum.hessian.clone());
    let top = eig.eigenvalues.max().max(1.0);
    let ridge = RIDGE * top;
    let coef = eig.eigenvectors.transpose() * &sum.linear;
    let lam: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0) + ridge).collect();
    let solve = |shift: f64| -> Vector {
        let w = Vector::from_fn(d, |k, _| coef[k] / (lam[k] + shift));
        &eig.eigenvectors * w
    };
    let non_unique = eig.eigenvalues.min() <= 1e-9 * top;
    let r = dom.radius();
    let free = solve(0.0);
    if free.norm() <= r {
        return ErmSolution { z: free, binding: false, non_unique };
    }
    let (mut lo, mut hi) = (0.0_f64, top.max(coef.norm() / r));
    while solve(hi).norm() > r {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if solve(mid).norm() > r {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    ErmSolution { z: project_unchecked(&solve(hi), r), binding: true, non_unique: false }
}

fn solve_general_erm(losses: &[CostFn], dom: &BallDomain, tol: f64) -> Result<ErmSolution> {
    let beta: f64 = losses.iter().map(|f| f.class().beta).sum();
    if !(beta > 0.0) {
        return Err(Error::InvalidInput("general ERM needs a positive smoothness constant".into()));
    }
    let d = losses[0].dim();
    let mut z = Vector::zeros(d);
    for _ in 0..100_000 {
        let mut g = Vector::zeros(d);
        for f in losses {
            g += f.eval_grad(&z)?.1;
        }
        let next = project_unchecked(&(&z - g / beta), dom.radius());
        let step = (&next - &z).norm();
        z = next;
        if step <= tol {
            break;
        }
    }
    let binding = z.norm() >= dom.radius() * (1.0 - 1e-9);
    Ok(ErmSolution { z, binding, non_unique: false })
}

/// Per-epoch comparators `zᵢ*`, each minimizing the full-horizon objective without the first `i` deleted losses.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorSet {
    pub z_star: Vec<ErmSolution>,
}

impl ComparatorSet {
    pub fn full_horizon(stream: &CostStream, sched: &DeletionSchedule, dom: &BallDomain) -> Result<Self> {
        let horizon = stream.len();
        let mut z_star = Vec::with_capacity(sched.len() + 1);
        for i in 0..=sched.len() {
            z_star.push(solve_erm(&stream.costs_up_to(horizon, &sched.first(i).indices()), dom, 1e-12)?);
        }
        Ok(Self { z_star })
    }

    /// Alternative comparators fitted only to the losses up to each epoch's end.
    pub fn per_prefix(stream: &CostStream, sched: &DeletionSchedule, dom: &BallDomain) -> Result<Self> {
        let horizon = stream.len();
        let mut z_star = Vec::with_capacity(sched.len() + 1);
        for i in 0..=sched.len() {
            let end = sched.entries().get(i).map_or(horizon, |d| d.time);
            z_star.push(solve_erm(&stream.costs_up_to(end, &sched.first(i).indices()), dom, 1e-12)?);
        }
        Ok(Self { z_star })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretBreakdown {
    pub total: f64,
    pub per_interval: Vec<f64>,
    /// Cumulative regret after each round.
    pub cumulative: Vec<f64>,
}

/// Regret with interval `i` covering rounds `τᵢ+1..=τᵢ₊₁` (`τ₀ = 0`, `τ_{k+1} = T`), each scored
/// against `zᵢ*`. Round `t` is charged `fₜ(zₜ₋₁)`.
pub fn regret_with(trace: &RunTrace, stream: &CostStream, sched: &DeletionSchedule, comps: &ComparatorSet) -> Result<RegretBreakdown> {
    let horizon = stream.len();
    if trace.horizon() != horizon || comps.z_star.len() != sched.len() + 1 {
        return Err(Error::InvalidInput("trace, stream and comparators disagree in length".into()));
    }
    let mut per_interval = vec![0.0; sched.len() + 1];
    let mut cumulative = Vec::with_capacity(horizon);
    let mut total = 0.0;
    let mut epoch = 0;
    for t in 1..=horizon {
        while sched.entries().get(epoch).is_some_and(|d| d.time < t) {
            epoch += 1;
        }
        if let Some(f) = stream.at(t).cost() {
            let paid = f.eval_grad(trace.played(t))?.0;
            let best = f.eval_grad(&comps.z_star[epoch].z)?.0;
            per_interval[epoch] += paid - best;
            total += paid - best;
        }
        cumulative.push(total);
    }
    Ok(RegretBreakdown { total, per_interval, cumulative })
}

pub fn regret_dynamic(trace: &RunTrace, stream: &CostStream, sched: &DeletionSchedule, dom: &BallDomain) -> Result<f64> {
    let comps = ComparatorSet::full_horizon(stream, sched, dom)?;
    Ok(regret_with(trace, stream, sched, &comps)?.total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GFunctions {
    pub g1: f64,
    pub g2: f64,
    pub g3: Option<f64>,
}

/// `G₁ = √(Σ τ² γ^{4(τ−u)}/u⁴)`, `G₂ = √(Σ τ/u²)`, and `G₃ = √(β Σ p(τ)/p(u)²)` when a
/// p-history and `β` are given.
pub fn g_functions(sched: &DeletionSchedule, gamma: f64, adaptive: Option<(&[f64], f64)>) -> Result<GFunctions> {
    let factors: Vec<f64> = sched
        .entries()
        .iter()
        .map(|d| gamma.powi(i32::try_from(d.time - d.index).unwrap_or(i32::MAX)))
        .collect();
    let g1 = g1_from_factors(sched, &factors);
    let g2 = sched
        .entries()
        .iter()
        .map(|d| d.time as f64 / (d.index as f64).powi(2))
        .sum::<f64>()
        .sqrt();
    let g3 = adaptive.map(|(p, beta)| g3_from_history(sched, p, beta)).transpose()?;
    Ok(GFunctions { g1, g2, g3 })
}

/// `G₁` with each `γ^{τᵢ−uᵢ}` replaced by a supplied contraction factor.
pub fn g1_from_factors(sched: &DeletionSchedule, factors: &[f64]) -> f64 {
    sched
        .entries()
        .iter()
        .zip(factors)
        .map(|(d, f)| (d.time as f64).powi(2) * f.powi(4) / (d.index as f64).powi(4))
        .sum::<f64>()
        .sqrt()
}

pub fn g3_from_history(sched: &DeletionSchedule, p: &[f64], beta: f64) -> Result<f64> {
    let mut acc = 0.0;
    for d in sched.entries() {
        let (pt, pu) = match (p.get(d.time - 1), p.get(d.index - 1)) {
            (Some(a), Some(b)) => (*a, *b),
            _ => return Err(Error::InvalidInput("p-history shorter than the schedule".into())),
        };
        if pu <= 0.0 {
            return Err(Error::Precondition(format!("p(u) = {pu} at u = {}", d.index)));
        }
        acc += pt / (pu * pu);
    }
    Ok((beta * acc).sqrt())
}

/// `Σ γ^{τᵢ−τᵢ₋₁} (τᵢ−τᵢ₋₁)`, the deletion-impact term of the active learner.
pub fn g2_active(sched: &DeletionSchedule, gamma: f64) -> f64 {
    let mut prev = 0;
    let mut acc = 0.0;
    for d in sched.entries() {
        let gap = d.time - prev;
        acc += gamma.powi(gap as i32) * gap as f64;
        prev = d.time;
    }
    acc
}

/// Recomputes `p(t) = Σ_{s≤t} ‖∇fₛ(zₛ₋₁)‖²` from a trace's outputs.
pub fn p_history_from_outputs(stream: &CostStream, initial: &Vector, outputs: &[Vector]) -> Result<Vec<f64>> {
    let mut p = 0.0;
    let mut out = Vec::with_capacity(stream.len());
    for t in 1..=stream.len() {
        if let Some(f) = stream.at(t).cost() {
            let z = if t == 1 { initial } else { &outputs[t - 2] };
            p += f.eval_grad(z)?.1.norm_squared();
        }
        out.push(p);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Table2Row {
    PassiveSc,
    PassiveC,
    Active,
    DiscardSc,
    DiscardC,
    OnlineDpSc,
    OnlineDpC,
    RetrainSc,
    RetrainC,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Theorem {
    T2,
    T3,
    T4,
    T5,
    T6,
    Table2(Table2Row),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct BoundParams {
    pub lipschitz: f64,
    pub mu: f64,
    pub beta: f64,
    pub diameter: f64,
    pub horizon: usize,
    pub k: usize,
    pub d: usize,
    pub eps: f64,
    pub kappa: Option<f64>,
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
    pub g2_active: f64,
    /// `Σᵢ Σ_{t∈(τᵢ,τᵢ₊₁]} fₜ(zᵢ*)`, used by the adaptive bound.
    pub comparator_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundValue {
    pub total: f64,
    pub components: Vec<(String, f64)>,
    /// The source states this bound only up to constants; `total` is the plain sum of components.
    pub order_form: bool,
}

impl BoundValue {
    fn exact(parts: Vec<(&str, f64)>) -> Self {
        Self::from_parts(parts, false)
    }

    fn order(parts: Vec<(&str, f64)>) -> Self {
        Self::from_parts(parts, true)
    }

    fn from_parts(parts: Vec<(&str, f64)>, order_form: bool) -> Self {
        let total = parts.iter().map(|(_, v)| v).sum();
        let components = parts.into_iter().map(|(n, v)| (n.to_string(), v)).collect();
        Self { total, components, order_form }
    }
}

fn need_kappa(p: &BoundParams) -> Result<f64> {
    if p.k == 0 {
        return Ok(p.kappa.unwrap_or(f64::INFINITY));
    }
    match p.kappa {
        Some(k) if k > 0.0 => Ok(k),
        _ => Err(Error::InvalidConfig("this bound needs a positive quadratic-growth constant kappa".into())),
    }
}

fn need_mu(p: &BoundParams) -> Result<f64> {
    if p.mu > 0.0 {
        Ok(p.mu)
    } else {
        Err(Error::InvalidConfig("this bound needs mu > 0".into()))
    }
}

pub fn bound_rhs(thm: Theorem, p: &BoundParams) -> Result<BoundValue> {
    if p.horizon == 0 || !(p.eps > 0.0) {
        return Err(Error::InvalidConfig("bounds need T >= 1 and eps > 0".into()));
    }
    let (l, dd, t, k, d, eps) = (p.lipschitz, p.diameter, p.horizon as f64, p.k as f64, p.d as f64, p.eps);
    let kterm = |kappa: f64| if p.k == 0 { 0.0 } else { 2.0 * k * k * l * l / kappa };
    Ok(match thm {
        Theorem::T2 => {
            let mu = need_mu(p)?;
            let s = l * l / mu;
            BoundValue::exact(vec![
                ("log_t", s * t.ln()),
                ("deletion_k2", s * 2.0 * k * k),
                ("noise_g1", s * 3f64.sqrt() * d * k.powf(1.7) * p.g1 / eps),
            ])
        }
        Theorem::T3 => {
            let kappa = need_kappa(p)?;
            BoundValue::exact(vec![
                ("sqrt_t", 3.0 * dd * l * t.sqrt()),
                ("comparator_shift", kterm(kappa)),
                ("noise_g2", 3.0 * dd * l * d * k.powf(1.7) * p.g2 / (2.0 * eps)),
            ])
        }
        Theorem::T4 => BoundValue::order(vec![
            ("d2_beta", dd * dd * p.beta),
            ("comparator_loss", dd * p.comparator_loss.max(0.0).sqrt()),
            ("noise_g3", d * k * k * l * l * dd * dd * p.g3),
        ]),
        Theorem::T5 => {
            let kappa = need_kappa(p)?;
            BoundValue::exact(vec![
                ("ogd_and_noise", l * (dd + k.powf(1.1) * (d / eps).sqrt()) * (2.0 * t).sqrt()),
                ("comparator_shift", kterm(kappa)),
            ])
        }
        Theorem::T6 => {
            let mu = need_mu(p)?;
            BoundValue::order(vec![
                ("log_t", t.ln()),
                ("per_deletion", k * (l * dd * dd + l * d / (mu * eps))),
                ("g2_active", p.g2_active),
                ("comparator_shift", l * l * k * k / mu),
            ])
        }
        Theorem::Table2(row) => {
            let lt = t.ln();
            BoundValue::order(match row {
                Table2Row::PassiveSc => vec![("log_t", lt), ("k2", k * k), ("g", d * k.powf(1.7) * p.g1)],
                Table2Row::PassiveC => vec![("sqrt_t", t.sqrt()), ("k2", k * k), ("g", d * k.powf(1.7) * p.g2)],
                Table2Row::Active => vec![("log_t", lt), ("k2", k * k), ("g", p.g2_active)],
                Table2Row::DiscardSc => vec![("k_log_t", k.max(1.0) * lt)],
                Table2Row::DiscardC => vec![("k_sqrt_t", k.max(1.0) * t.sqrt())],
                Table2Row::OnlineDpSc => vec![("dk_log_t", d * k.max(1.0) * lt.powf(2.5))],
                Table2Row::OnlineDpC => vec![("k_sqrt_dt", k.max(1.0) * (d * t * lt.powf(2.5)).sqrt())],
                Table2Row::RetrainSc => vec![("log_t", lt)],
                Table2Row::RetrainC => vec![("sqrt_t", t.sqrt())],
            })
        }
    })
}

/// Per-deletion computation of a comparison row, in update steps.
pub fn table2_computation(row: Table2Row, tau: usize, gamma: f64, k: usize, mu: f64, diameter: f64, lipschitz: f64) -> f64 {
    match row {
        Table2Row::PassiveSc | Table2Row::PassiveC | Table2Row::DiscardSc | Table2Row::DiscardC => 1.0,
        Table2Row::Active => ((k.max(1) as f64 * mu * diameter * tau as f64 / lipschitz).ln() / (1.0 / gamma).ln()).max(0.0),
        Table2Row::OnlineDpSc | Table2Row::OnlineDpC => (tau as f64).ln().max(1.0),
        Table2Row::RetrainSc | Table2Row::RetrainC => tau as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QgMeasure {
    /// Largest `κ̂` with `F(z) − F(z*) ≥ (κ̂/2)‖z − z*‖²` over the sampled points.
    pub sampled: f64,
    /// `λmin(Σ Aⱼ)` for quadratic aggregates.
    pub exact: Option<f64>,
}

/// Samples uniform points in the ball; the seed is fixed so the measurement is reproducible.
pub fn measure_qg(losses: &[CostFn], dom: &BallDomain, samples: usize) -> Result<QgMeasure> {
    let star = solve_erm(losses, dom, 1e-12)?.z;
    let sum = QuadraticSum::from_costs(losses);
    let value = |z: &Vector| -> Result<f64> {
        match &sum {
            Some(s) => Ok(s.value(z)),
            None => losses.iter().map(|f| f.eval_grad(z).map(|r| r.0)).sum(),
        }
    };
    let f_star = value(&star)?;
    let d = star.len();
    let mut rng = NoiseSource::new(0x51c0_ffee);
    let mut best = f64::INFINITY;
    for _ in 0..samples.max(1) {
        let z = rng.in_ball(d, dom.radius());
        let r2 = (&z - &star).norm_squared();
        if r2 <= 1e-18 {
            continue;
        }
        let excess = match &sum {
            Some(s) => {
                let dz = &z - &star;
                0.5 * dz.dot(&(&s.hessian * &dz)) + s.grad(&star).dot(&dz)
            }
            None => value(&z)? - f_star,
        };
        best = best.min(2.0 * excess / r2);
    }
    Ok(QgMeasure { sampled: best.max(0.0), exact: sum.map(|s| s.lambda_min().max(0.0)) })
}

/// If `x − √(ax + b) ≤ c` with `a, c > 0`, `b ≥ 0`, then `x ≤ a + c + 2√(b + ac)`.
pub fn implicit_bound(a: f64, b: f64, c: f64) -> f64 {
    a + c + 2.0 * (b + a * c).sqrt()
}
