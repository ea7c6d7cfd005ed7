//! Shared per-step bookkeeping for all learners.

use crate::domain::{CostStream, DeletionSchedule, FnClass, Vector};
use crate::error::{Error, Result};
use crate::ogd::{index_precondition_warnings, OgdState, RateSchedule, StepRecord};
use crate::domain::BallDomain;
use crate::trace::{Algorithm, RunTrace, StepEvent};

pub(crate) struct Driver<'a> {
    pub stream: &'a CostStream,
    pub rs: &'a RateSchedule,
    pub cls: FnClass,
    pub radius: f64,
    pub dim: usize,
    pub state: OgdState,
    pub trace: RunTrace,
}

impl<'a> Driver<'a> {
    pub fn new(
        algorithm: Algorithm,
        stream: &'a CostStream,
        sched: &DeletionSchedule,
        rs: &'a RateSchedule,
        cls: &FnClass,
        dom: &BallDomain,
        seed: u64,
    ) -> Result<Self> {
        rs.validate()?;
        sched.check_horizon(stream.len())?;
        let dim = stream
            .dim()
            .ok_or_else(|| Error::InvalidInput("stream has no losses to fix the dimension".into()))?;
        let initial = Vector::zeros(dim);
        let mut trace = RunTrace::new(algorithm, seed, initial.clone(), stream.len());
        if rs.is_adaptive() {
            trace.p_history = Some(Vec::with_capacity(stream.len()));
        }
        trace.warnings = index_precondition_warnings(sched, rs, cls, dom);
        Ok(Self { stream, rs, cls: *cls, radius: dom.radius(), dim, state: OgdState::new(initial), trace })
    }

    /// Plays round `t` and applies the OGD update; the output is not emitted yet.
    pub fn learn(&mut self, t: usize) -> Result<StepRecord> {
        let rec = self.state.step(self.stream.at(t), self.rs, &self.cls, self.radius)?;
        self.trace.losses.push(rec.loss);
        self.trace.rates.push(rec.eta);
        self.trace.gammas.push(rec.gamma_raw);
        self.trace.events.push(if rec.skip { StepEvent::Skip } else { StepEvent::Learn });
        if let Some(p) = self.trace.p_history.as_mut() {
            p.push(self.state.adapt.p);
        }
        if !rec.skip {
            self.trace.cost.learning += 1;
        }
        Ok(rec)
    }

    pub fn mark_unlearn(&mut self) {
        if let Some(e) = self.trace.events.last_mut() {
            *e = StepEvent::Unlearn;
        }
    }

    pub fn emit(&mut self) {
        self.trace.outputs.push(self.state.z.clone());
    }

    /// `Π_{s∈(u,τ]} γₛ` over recorded per-step contractions, and whether every factor is ≤ 1.
    pub fn gamma_product(&self, u: usize, tau: usize) -> (f64, bool) {
        let slice = &self.trace.gammas[u..tau];
        (slice.iter().product(), slice.iter().all(|g| *g <= 1.0 + 1e-12))
    }

    pub fn finish(self) -> RunTrace {
        self.trace
    }
}
