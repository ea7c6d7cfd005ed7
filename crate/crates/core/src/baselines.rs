//! Exact-unlearning reference learners and the RDP-to-unlearning parameter conversion.

use crate::domain::{BallDomain, CostStream, DeletionSchedule, FnClass, Vector};
use crate::driver::Driver;
use crate::error::{Error, Result};
use crate::ogd::{OgdState, RateSchedule};
use crate::trace::{Algorithm, RunTrace};

fn stream_class(stream: &CostStream) -> Result<FnClass> {
    stream
        .class()
        .ok_or_else(|| Error::InvalidInput("stream has no losses".into()))
}

/// Replays OGD from the origin over `stream[1..=t]`.
pub(crate) fn replay(stream: &CostStream, t: usize, rs: &RateSchedule, cls: &FnClass, radius: f64, dim: usize) -> Result<OgdState> {
    let mut st = OgdState::new(Vector::zeros(dim));
    for s in 1..=t {
        st.step(stream.at(s), rs, cls, radius)?;
    }
    Ok(st)
}

/// At each deletion time, recomputes the trajectory over the retained prefix and continues
/// from its endpoint. Unlearning cost: `τᵢ` steps per deletion.
pub fn run_retraining(stream: &CostStream, sched: &DeletionSchedule, rs: &RateSchedule, dom: &BallDomain, seed: u64) -> Result<RunTrace> {
    let cls = stream_class(stream)?;
    let mut drv = Driver::new(Algorithm::Retraining, stream, sched, rs, &cls, dom, seed)?;
    for t in 1..=stream.len() {
        drv.learn(t)?;
        if let Some(n) = sched.ordinal_at(t) {
            let retained = stream.retained_first(sched, n + 1);
            drv.state = replay(&retained, t, rs, &cls, drv.radius, drv.dim)?;
            if let Some(p) = drv.trace.p_history.as_mut() {
                *p.last_mut().expect("pushed by learn") = drv.state.adapt.p;
            }
            drv.trace.cost.unlearning += t;
            drv.mark_unlearn();
        }
        drv.emit();
    }
    Ok(drv.finish())
}

/// At each deletion time, resets to the origin and restarts the rate clock.
pub fn run_discard_restart(stream: &CostStream, sched: &DeletionSchedule, rs: &RateSchedule, dom: &BallDomain, seed: u64) -> Result<RunTrace> {
    let cls = stream_class(stream)?;
    let mut drv = Driver::new(Algorithm::DiscardRestart, stream, sched, rs, &cls, dom, seed)?;
    for t in 1..=stream.len() {
        drv.learn(t)?;
        if sched.ordinal_at(t).is_some() {
            drv.state = OgdState::new(Vector::zeros(drv.dim));
            drv.trace.cost.unlearning += 1;
            drv.mark_unlearn();
        }
        drv.emit();
    }
    Ok(drv.finish())
}

/// An `(α, ε)`-RDP online learner is an `(α/k, k^{1.6} ε)` learner-unlearner for `k` deletions.
pub fn dp_to_olu(alpha: f64, eps: f64, k: usize) -> Result<(f64, f64)> {
    if k == 0 || alpha < 2.0 * k as f64 {
        return Err(Error::Precondition(format!("need k >= 1 and alpha >= 2k, got alpha={alpha}, k={k}")));
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidInput(format!("eps must be >= 0, got {eps}")));
    }
    Ok((alpha / k as f64, (k as f64).powf(1.6) * eps))
}
