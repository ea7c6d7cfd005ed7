//! Unlearning certification: the shifted-divergence ledger, an exact Gaussian oracle for
//! quadratic streams, and a Monte-Carlo cross-check.

use nalgebra::{Cholesky, SymmetricEigen};
use serde::Serialize;

use crate::active::{run_active, ActiveConfig};
use crate::domain::{BallDomain, CostStream, DeletionSchedule, FnClass, Matrix, QuadraticSum, StreamItem, Vector};
use crate::error::{Error, Result};
use crate::exec::{map_chunks, Execution};
use crate::ogd::{rate, AdaptiveState, OgdState, RateSchedule};
use crate::passive::{passive_sigma_from_factor, run_passive, UnlearnerConfig};
use crate::rng::NoiseSource;
use crate::trace::{Algorithm, RunTrace};

const LEDGER_TOL: f64 = 1e-12;

/// `α‖m₀−m₁‖²/(2σ²)`; infinite when `σ² = 0` and the means differ.
pub fn gaussian_renyi(alpha: f64, m0: &Vector, m1: &Vector, sigma2: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("Renyi order must exceed 1, got {alpha}")));
    }
    if m0.len() != m1.len() {
        return Err(Error::InvalidInput("mean dimensions differ".into()));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidInput(format!("variance must be >= 0, got {sigma2}")));
    }
    let gap2 = (m0 - m1).norm_squared();
    if gap2 == 0.0 {
        return Ok(0.0);
    }
    if sigma2 == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(alpha * gap2 / (2.0 * sigma2))
}

/// A Gaussian law `N(mean, cov)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianSummary {
    pub mean: Vector,
    pub cov: Matrix,
}

fn log_det_chol(m: &Matrix) -> Option<f64> {
    let c = Cholesky::new(m.clone())?;
    Some(2.0 * c.l().diagonal().iter().map(|v| v.ln()).sum::<f64>())
}

/// Rényi divergence `D_α(P‖Q)` between Gaussians with possibly different covariances.
pub fn gaussian_renyi_general(alpha: f64, p: &GaussianSummary, q: &GaussianSummary) -> Result<f64> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("Renyi order must exceed 1, got {alpha}")));
    }
    let delta = &p.mean - &q.mean;
    let scale = p.cov.amax().max(q.cov.amax());
    if (&p.cov - &q.cov).amax() <= 1e-14 * scale {
        return equal_cov_divergence(alpha, &delta, &q.cov);
    }
    let mixed = &q.cov * alpha + &p.cov * (1.0 - alpha);
    let (Some(ld_mix), Some(ld_p), Some(ld_q)) = (log_det_chol(&mixed), log_det_chol(&p.cov), log_det_chol(&q.cov)) else {
        return Ok(f64::INFINITY);
    };
    let quad = Cholesky::new(mixed).expect("checked").solve(&delta).dot(&delta);
    let logdet = ld_mix - (1.0 - alpha) * ld_p - alpha * ld_q;
    Ok((alpha / 2.0 * quad - logdet / (2.0 * (alpha - 1.0))).max(0.0))
}

fn equal_cov_divergence(alpha: f64, delta: &Vector, cov: &Matrix) -> Result<f64> {
    if delta.norm_squared() == 0.0 {
        return Ok(0.0);
    }
    match pinv_quadratic(cov, delta) {
        Some(q) => Ok(alpha / 2.0 * q),
        None => Ok(f64::INFINITY),
    }
}

/// `Δᵀ C⁺ Δ`, or `None` when `Δ` leaves the range of `C`.
fn pinv_quadratic(cov: &Matrix, delta: &Vector) -> Option<f64> {
    let eig = SymmetricEigen::new(cov.clone());
    let top = eig.eigenvalues.max().max(0.0);
    let cut = top * 1e-12;
    let mut quad = 0.0;
    let mut outside = 0.0;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let proj = eig.eigenvectors.column(k).dot(delta);
        if lam > cut && lam > 0.0 {
            quad += proj * proj / lam;
        } else {
            outside += proj * proj;
        }
    }
    (outside <= 1e-24 * delta.norm_squared().max(1e-300)).then_some(quad)
}

/// One step of the shifted-divergence bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerRecord {
    pub t: usize,
    pub s: f64,
    pub a: f64,
    pub gamma: f64,
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftLedger {
    pub interval: usize,
    pub records: Vec<LedgerRecord>,
    /// `Σ α aⱼ² / (2σⱼ²)` over the noise injections.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticBound {
    pub per_interval: Vec<f64>,
    pub max_bound: f64,
    #[serde(skip)]
    pub ledgers: Vec<ShiftLedger>,
}

/// Ledger with the noise each deletion would receive under per-step contraction calibration.
pub fn analytic_bound(sched: &DeletionSchedule, cfg: &UnlearnerConfig, gammas: &[f64], deltas: &[f64]) -> Result<AnalyticBound> {
    let mut sigmas = Vec::with_capacity(sched.len());
    for (n, d) in sched.entries().iter().enumerate() {
        let factor: f64 = gammas
            .get(d.index..d.time)
            .ok_or_else(|| Error::InvalidInput("gammas shorter than the schedule".into()))?
            .iter()
            .product();
        let delta = *deltas
            .get(d.index - 1)
            .ok_or_else(|| Error::InvalidInput("deltas shorter than the schedule".into()))?;
        sigmas.push(passive_sigma_from_factor(cfg, n + 1, factor, delta)?);
    }
    ledger_bound(sched, cfg.alpha, gammas, deltas, &sigmas)
}

/// Ledger for a recorded passive run, using its actual noise scales and per-step contractions.
pub fn analytic_bound_for_trace(sched: &DeletionSchedule, cfg: &UnlearnerConfig, trace: &RunTrace, stream: &CostStream) -> Result<AnalyticBound> {
    let cls = stream
        .class()
        .ok_or_else(|| Error::InvalidInput("stream has no losses".into()))?;
    let deltas: Vec<f64> = (1..=stream.len())
        .map(|t| {
            if stream.at(t).is_skip() {
                0.0
            } else {
                crate::ogd::sensitivity(&cfg.sensitivity, &cls, trace.rates[t - 1])
            }
        })
        .collect();
    let sigmas: Vec<f64> = trace.noise_events.iter().map(|e| e.sigma).collect();
    ledger_bound(sched, cfg.alpha, &trace.gammas, &deltas, &sigmas)
}

/// Builds one ledger per interval with shifts `s_{uⱼ} = Δ_{uⱼ}` and budgets
/// `a_{τⱼ} = Δ_{uⱼ} Π_{t∈(uⱼ,τⱼ]} γₜ`, and accumulates `α aⱼ²/(2σⱼ²)`.
pub fn ledger_bound(sched: &DeletionSchedule, alpha: f64, gammas: &[f64], deltas: &[f64], sigmas: &[f64]) -> Result<AnalyticBound> {
    if sigmas.len() != sched.len() {
        return Err(Error::InvalidInput(format!("{} noise scales for {} deletions", sigmas.len(), sched.len())));
    }
    let mut per_interval = Vec::with_capacity(sched.len());
    let mut ledgers = Vec::with_capacity(sched.len());
    for i in 1..=sched.len() {
        let active = &sched.entries()[..i];
        let end = active[i - 1].time;
        if gammas.len() < end || deltas.len() < end {
            return Err(Error::InvalidInput("gammas/deltas shorter than the schedule".into()));
        }
        let start = active.iter().map(|d| d.index).min().expect("nonempty");
        let mut e: f64 = 0.0;
        let mut bound = 0.0;
        let mut records = Vec::new();
        let mut scale: f64 = 0.0;
        for t in 1..=end {
            let g = gammas[t - 1];
            if t > start && g > 1.0 + LEDGER_TOL {
                return Err(Error::CertificationRefused(format!("step {t} has contraction {g} > 1")));
            }
            let s: f64 = active.iter().filter(|d| d.index == t).map(|_| deltas[t - 1]).sum();
            let mut a = 0.0;
            if let Some((j, d)) = active.iter().enumerate().find(|(_, d)| d.time == t) {
                let factor: f64 = gammas[d.index..d.time].iter().product();
                a = deltas[d.index - 1] * factor;
                bound += renyi_cost(alpha, a, sigmas[j]);
            }
            e = g * e + s - a;
            scale = scale.max(s);
            if e < -LEDGER_TOL * scale.max(1.0) {
                return Err(Error::CertificationRefused(format!("negative residual shift {e} at t={t}")));
            }
            records.push(LedgerRecord { t, s, a, gamma: g, e });
        }
        if e.abs() > 1e-9 * scale.max(1.0) {
            return Err(Error::CertificationRefused(format!("residual shift {e} left at tau_{i}")));
        }
        per_interval.push(bound);
        ledgers.push(ShiftLedger { interval: i, records, bound });
    }
    let max_bound = per_interval.iter().copied().fold(0.0, f64::max);
    Ok(AnalyticBound { per_interval, max_bound, ledgers })
}

fn renyi_cost(alpha: f64, a: f64, sigma: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if sigma == 0.0 {
        f64::INFINITY
    } else {
        alpha * a * a / (2.0 * sigma * sigma)
    }
}

/// Affine-Gaussian operation on a trajectory state.
#[derive(Debug, Clone)]
enum Op {
    /// `z ↦ Π[M z + b]`, required not to bind.
    Map { m: Matrix, b: Vector },
    Noise(f64),
    Emit(usize),
}

fn map_for_average(avg: &QuadraticSum, h: f64) -> Op {
    let d = avg.linear.len();
    Op::Map { m: Matrix::identity(d, d) - &avg.hessian * h, b: &avg.linear * h }
}

fn ogd_ops(item: &StreamItem, eta: f64, d: usize) -> Result<Option<Op>> {
    match item {
        StreamItem::Skip => Ok(None),
        StreamItem::Cost(f) => {
            let q = f
                .as_quadratic()
                .ok_or_else(|| Error::OracleUnavailable("exact oracle needs quadratic losses".into()))?;
            let m = Matrix::identity(d, d) - q.curvature() * eta;
            let b = q.curvature() * q.center() * eta;
            Ok(Some(Op::Map { m, b }))
        }
    }
}

fn deterministic_rates(rs: &RateSchedule, horizon: usize) -> Result<Vec<f64>> {
    if rs.is_adaptive() {
        return Err(Error::OracleUnavailable("adaptive rates make the trajectory data-dependent".into()));
    }
    let st = AdaptiveState::default();
    (1..=horizon).map(|t| rate(rs, t, &st)).collect()
}

/// Noise plan and inner phases of one learner, as the oracle replays them.
struct Plan {
    rates: Vec<f64>,
    noise: Vec<(usize, f64)>,
    /// `(I₁, I₂, h)` per deletion for active runs.
    inner: Option<(Vec<(usize, usize)>, f64)>,
}

fn build_ops(stream: &CostStream, plan: &Plan, deleted_per_event: &dyn Fn(usize) -> Vec<usize>, end: usize, d: usize) -> Result<Vec<Op>> {
    let mut ops = Vec::new();
    for t in 1..=end {
        if let Some(op) = ogd_ops(stream.at(t), plan.rates[t - 1], d)? {
            ops.push(op);
        }
        if let Some(j) = plan.noise.iter().position(|&(tau, _)| tau == t) {
            if let Some((iters, h)) = &plan.inner {
                let (i1, i2) = iters[j];
                let seen = QuadraticSum::from_costs(&stream.costs_up_to(t, &[]))
                    .ok_or_else(|| Error::OracleUnavailable("no quadratic losses seen".into()))?;
                let kept = QuadraticSum::from_costs(&stream.costs_up_to(t, &deleted_per_event(j)))
                    .ok_or_else(|| Error::OracleUnavailable("no quadratic losses retained".into()))?;
                let seen_op = map_for_average(&seen.scaled(1.0 / seen.count as f64), *h);
                let kept_op = map_for_average(&kept.scaled(1.0 / kept.count as f64), *h);
                ops.extend(std::iter::repeat_n(seen_op, i1));
                ops.extend(std::iter::repeat_n(kept_op, i2));
            }
            ops.push(Op::Noise(plan.noise[j].1));
        }
        ops.push(Op::Emit(t));
    }
    Ok(ops)
}

/// Mean, covariance at `first` and the linear maps carrying `z_first` to each later output.
struct Propagated {
    state: GaussianSummary,
    means: Vec<Vector>,
    transfers: Vec<Matrix>,
}

fn propagate(ops: &[Op], d: usize, radius: f64, first: usize) -> Result<Propagated> {
    let mut m = Vector::zeros(d);
    let mut cov = Matrix::zeros(d, d);
    let mut state = None;
    let mut phi = Matrix::identity(d, d);
    let mut means = Vec::new();
    let mut transfers = Vec::new();
    for op in ops {
        match op {
            Op::Map { m: a, b } => {
                let next = a * &m + b;
                if next.norm() > radius * (1.0 + 1e-12) {
                    return Err(Error::OracleUnavailable("projection binds along the mean trajectory".into()));
                }
                m = next;
                cov = a * &cov * a.transpose();
                if state.is_some() {
                    phi = a * &phi;
                }
            }
            Op::Noise(s) => {
                if state.is_some() {
                    return Err(Error::OracleUnavailable("noise inside the output window".into()));
                }
                cov += Matrix::identity(d, d) * (s * s);
            }
            Op::Emit(t) => {
                if *t == first {
                    state = Some(GaussianSummary { mean: m.clone(), cov: cov.clone() });
                }
                if *t >= first {
                    means.push(m.clone());
                    transfers.push(phi.clone());
                }
            }
        }
    }
    let state = state.ok_or_else(|| Error::InvalidInput("window start not reached".into()))?;
    Ok(Propagated { state, means, transfers })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactDivergence {
    pub interval: (usize, usize),
    /// Divergence of the outputs at `τᵢ`.
    pub at_state: f64,
    /// Divergence of the whole window, computed for small windows only.
    pub joint: Option<f64>,
}

/// Window sizes (outputs × dimension) up to which the joint law is also computed.
const JOINT_LIMIT: usize = 64;

/// Exact `D_α` between the unlearning run and the retrained run over interval `i` (1-based).
#[allow(clippy::too_many_arguments)]
pub fn exact_divergence_quadratic(
    stream: &CostStream,
    sched: &DeletionSchedule,
    rs: &RateSchedule,
    cfg: &UnlearnerConfig,
    cls: &FnClass,
    dom: &BallDomain,
    i: usize,
) -> Result<ExactDivergence> {
    let trace = run_passive(stream, sched, rs, cfg, cls, dom, 0)?;
    exact_from_trace(stream, sched, rs, cfg.alpha, dom, i, &trace)
}

/// Exact oracle for the first-order active learner.
#[allow(clippy::too_many_arguments)]
pub fn exact_divergence_active(
    stream: &CostStream,
    sched: &DeletionSchedule,
    rs: &RateSchedule,
    acfg: &ActiveConfig,
    cls: &FnClass,
    dom: &BallDomain,
    i: usize,
) -> Result<ExactDivergence> {
    let trace = run_active(stream, sched, rs, acfg, cls, dom, 0)?;
    exact_from_trace(stream, sched, rs, acfg.base.alpha, dom, i, &trace)
}

fn exact_from_trace(
    stream: &CostStream,
    sched: &DeletionSchedule,
    rs: &RateSchedule,
    alpha: f64,
    dom: &BallDomain,
    i: usize,
    trace: &RunTrace,
) -> Result<ExactDivergence> {
    if i == 0 || i > sched.len() {
        return Err(Error::InvalidInput(format!("interval {i} out of range 1..={}", sched.len())));
    }
    let d = trace.initial.len();
    let (first, end) = sched.interval(i, stream.len());
    let rates = deterministic_rates(rs, stream.len())?;
    let noise: Vec<(usize, f64)> = trace.noise_events[..i].iter().map(|e| (e.t, e.sigma)).collect();
    let inner = match trace.algorithm {
        Algorithm::Passive => None,
        Algorithm::Active => {
            let h = serde_json::from_value::<ActiveConfig>(trace.config.clone())
                .ok()
                .and_then(|c| c.inner_rate)
                .unwrap_or(1.0 / (stream.class().expect("losses").beta + stream.class().expect("losses").mu));
            Some((trace.phases[..i].iter().map(|p| (p.i1, p.i2)).collect(), h))
        }
        other => return Err(Error::Unsupported(format!("no exact oracle for {other:?}"))),
    };
    let plan = Plan { rates, noise, inner };
    let deleted = |j: usize| sched.first(j + 1).indices();
    let p_ops = build_ops(stream, &plan, &deleted, end, d)?;
    let retained = stream.retained_first(sched, i);
    let q_ops = build_ops(&retained, &plan, &|_| Vec::new(), end, d)?;
    let p = propagate(&p_ops, d, dom.radius(), first)?;
    let q = propagate(&q_ops, d, dom.radius(), first)?;
    let at_state = gaussian_renyi_general(alpha, &p.state, &q.state)?;
    let joint = ((end - first + 1) * d <= JOINT_LIMIT)
        .then(|| joint_divergence(alpha, &p, &q))
        .transpose()?;
    Ok(ExactDivergence { interval: (first, end), at_state, joint })
}

fn stack(prop: &Propagated) -> GaussianSummary {
    let d = prop.state.mean.len();
    let n = prop.means.len();
    let mut mean = Vector::zeros(n * d);
    let mut cov = Matrix::zeros(n * d, n * d);
    for (s, ms) in prop.means.iter().enumerate() {
        mean.rows_mut(s * d, d).copy_from(ms);
        for (t, pt) in prop.transfers.iter().enumerate() {
            let block = &prop.transfers[s] * &prop.state.cov * pt.transpose();
            cov.view_mut((s * d, t * d), (d, d)).copy_from(&block);
        }
    }
    GaussianSummary { mean, cov }
}

/// Divergence of the joint window law, restricted to the range of the retained covariance.
fn joint_divergence(alpha: f64, p: &Propagated, q: &Propagated) -> Result<f64> {
    let (jp, jq) = (stack(p), stack(q));
    let eig = SymmetricEigen::new(jq.cov.clone());
    let cut = eig.eigenvalues.max().max(0.0) * 1e-10;
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&k| eig.eigenvalues[k] > cut).collect();
    if keep.is_empty() {
        return Ok(if (&jp.mean - &jq.mean).norm() == 0.0 { 0.0 } else { f64::INFINITY });
    }
    let basis = Matrix::from_columns(&keep.iter().map(|&k| eig.eigenvectors.column(k).into_owned()).collect::<Vec<_>>());
    let reduce = |g: &GaussianSummary| GaussianSummary {
        mean: basis.transpose() * &g.mean,
        cov: basis.transpose() * &g.cov * &basis,
    };
    let delta = &jp.mean - &jq.mean;
    let residual = &delta - &basis * (basis.transpose() * &delta);
    if residual.norm() > 1e-9 * delta.norm().max(1e-300) && residual.norm() > 1e-14 {
        return Ok(f64::INFINITY);
    }
    gaussian_renyi_general(alpha, &reduce(&jp), &reduce(&jq))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coupling {
    /// Both processes reuse sample `s`'s noise stream.
    #[default]
    Common,
    Independent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub n: usize,
    pub interval: usize,
    pub sigma: f64,
    #[serde(with = "crate::trace::vec_serde")]
    pub mean_deleted: Vector,
    #[serde(with = "crate::trace::vec_serde")]
    pub mean_retained: Vector,
    #[serde(with = "crate::trace::vec_serde")]
    pub gap_se: Vector,
    pub est_divergence: f64,
    pub divergence_se: f64,
}

/// Runs OGD with noise injections `plan` and returns the state at time `stop`.
fn simulate(stream: &CostStream, rs: &RateSchedule, cls: &FnClass, radius: f64, d: usize, plan: &[(usize, f64)], stop: usize, rng: &mut NoiseSource) -> Result<Vector> {
    let mut st = OgdState::new(Vector::zeros(d));
    for t in 1..=stop {
        st.step(stream.at(t), rs, cls, radius)?;
        if let Some(&(_, s)) = plan.iter().find(|(tau, _)| *tau == t) {
            st.z += rng.gaussian(d, s);
        }
    }
    Ok(st.z)
}

#[derive(Debug, Clone)]
struct Partial {
    sum_p: Vector,
    sum_q: Vector,
    sum_diff2: Vector,
}

/// Monte-Carlo estimate of the divergence at `τᵢ` between the passive run and the retrained
/// run, plugging sample means into the isotropic formula with the known `σᵢ`.
#[allow(clippy::too_many_arguments)]
pub fn mc_divergence_check(
    stream: &CostStream,
    sched: &DeletionSchedule,
    rs: &RateSchedule,
    cfg: &UnlearnerConfig,
    cls: &FnClass,
    dom: &BallDomain,
    i: usize,
    n: usize,
    seed: u64,
    coupling: Coupling,
    exec: Execution,
) -> Result<McReport> {
    if i == 0 || i > sched.len() || n < 2 {
        return Err(Error::InvalidInput("need a valid interval and n >= 2".into()));
    }
    let trace = run_passive(stream, sched, rs, cfg, cls, dom, 0)?;
    let plan: Vec<(usize, f64)> = trace.noise_events[..i].iter().map(|e| (e.t, e.sigma)).collect();
    let stop = sched.entries()[i - 1].time;
    let retained = stream.retained_first(sched, i);
    let d = trace.initial.len();
    let radius = dom.radius();
    let chunks = map_chunks(exec, n, 1024, |lo, hi| -> Result<Partial> {
        let mut acc = Partial { sum_p: Vector::zeros(d), sum_q: Vector::zeros(d), sum_diff2: Vector::zeros(d) };
        for s in lo..hi {
            let mut rp = NoiseSource::for_stream(seed, s as u64);
            let mut rq = match coupling {
                Coupling::Common => NoiseSource::for_stream(seed, s as u64),
                Coupling::Independent => NoiseSource::for_stream(seed, (s as u64) | (1 << 48)),
            };
            let zp = simulate(stream, rs, cls, radius, d, &plan, stop, &mut rp)?;
            let zq = simulate(&retained, rs, cls, radius, d, &plan, stop, &mut rq)?;
            let diff = &zp - &zq;
            acc.sum_diff2 += diff.component_mul(&diff);
            acc.sum_p += zp;
            acc.sum_q += zq;
        }
        Ok(acc)
    });
    let mut total = Partial { sum_p: Vector::zeros(d), sum_q: Vector::zeros(d), sum_diff2: Vector::zeros(d) };
    for c in chunks {
        let c = c?;
        total.sum_p += c.sum_p;
        total.sum_q += c.sum_q;
        total.sum_diff2 += c.sum_diff2;
    }
    let nf = n as f64;
    let mean_p = total.sum_p / nf;
    let mean_q = total.sum_q / nf;
    let gap = &mean_p - &mean_q;
    let var = (total.sum_diff2 / nf - gap.component_mul(&gap)).map(|v| (v * nf / (nf - 1.0)).max(0.0));
    let gap_se = var.map(|v| (v / nf).sqrt());
    let sigma = plan[i - 1].1;
    let est = gaussian_renyi(cfg.alpha, &mean_p, &mean_q, sigma * sigma)?;
    let divergence_se = if sigma == 0.0 {
        if est == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        let lin: f64 = gap.iter().zip(var.iter()).map(|(g, v)| g * g * v).sum();
        cfg.alpha / (sigma * sigma) * (lin / nf).sqrt()
    };
    Ok(McReport {
        n,
        interval: i,
        sigma,
        mean_deleted: mean_p,
        mean_retained: mean_q,
        gap_se,
        est_divergence: est,
        divergence_se,
    })
}

/// One row of the certification report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalCert {
    pub interval: (usize, usize),
    pub analytic_bound: f64,
    pub exact_divergence: Option<f64>,
    pub mc_estimate: Option<f64>,
    /// `αε`, the threshold the unlearning theorem guarantees.
    pub budget: f64,
    /// `ε`, the threshold of the unlearning definition.
    pub budget_definition: f64,
    pub pass: bool,
    pub pass_definition: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertReport {
    pub algorithm: Algorithm,
    pub intervals: Vec<IntervalCert>,
    pub pass: bool,
}

/// Certification of a recorded passive or active run against each interval of its schedule.
#[allow(clippy::too_many_arguments)]
pub fn certify_run(
    stream: &CostStream,
    sched: &DeletionSchedule,
    rs: &RateSchedule,
    cfg: &UnlearnerConfig,
    cls: &FnClass,
    dom: &BallDomain,
    trace: &RunTrace,
    mc: Option<(usize, u64)>,
    exec: Execution,
) -> Result<CertReport> {
    let budget = cfg.alpha * cfg.eps;
    let mut note = None;
    let analytic: Vec<f64> = match trace.algorithm {
        Algorithm::Passive => match analytic_bound_for_trace(sched, cfg, trace, stream) {
            Ok(b) => b.per_interval,
            Err(e) => {
                note = Some(e.to_string());
                vec![f64::INFINITY; sched.len()]
            }
        },
        Algorithm::Active if !trace.certification_refused => {
            let mut acc = 0.0;
            (1..=sched.len())
                .map(|j| {
                    acc += cfg.series_term(j);
                    acc
                })
                .collect()
        }
        other => {
            note = Some(format!("{other:?} carries no certified budget"));
            vec![f64::INFINITY; sched.len()]
        }
    };
    let mut intervals = Vec::with_capacity(sched.len());
    for i in 1..=sched.len() {
        let exact = match exact_from_trace(stream, sched, rs, cfg.alpha, dom, i, trace) {
            Ok(x) => Some(x.at_state),
            Err(e) => {
                note.get_or_insert_with(|| e.to_string());
                None
            }
        };
        let mc_est = match (mc, trace.algorithm) {
            (Some((n, seed)), Algorithm::Passive) => {
                mc_divergence_check(stream, sched, rs, cfg, cls, dom, i, n, seed, Coupling::Common, exec)
                    .ok()
                    .map(|r| r.est_divergence)
            }
            _ => None,
        };
        let bound = analytic[i - 1];
        let sandwich = exact.is_none_or(|x| x <= bound + 1e-9);
        let pass = !trace.certification_refused && bound <= budget * (1.0 + 1e-9) && sandwich;
        let witness = exact.unwrap_or(bound);
        intervals.push(IntervalCert {
            interval: sched.interval(i, stream.len()),
            analytic_bound: bound,
            exact_divergence: exact,
            mc_estimate: mc_est,
            budget,
            budget_definition: cfg.eps,
            pass,
            pass_definition: witness <= cfg.eps * (1.0 + 1e-9),
            note: note.clone(),
        });
    }
    let pass = intervals.iter().all(|c| c.pass);
    Ok(CertReport { algorithm: trace.algorithm, intervals, pass })
}
