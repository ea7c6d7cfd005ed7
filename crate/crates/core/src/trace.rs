//! Run traces and their CSV/JSON forms.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{format_vector, parse_vector, Vector};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Ogd,
    Passive,
    Active,
    ActiveSecondOrder,
    Retraining,
    DiscardRestart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepEvent {
    Learn,
    Unlearn,
    Skip,
}

impl StepEvent {
    fn as_str(self) -> &'static str {
        match self {
            StepEvent::Learn => "learn",
            StepEvent::Unlearn => "unlearn",
            StepEvent::Skip => "skip",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "learn" => Ok(StepEvent::Learn),
            "unlearn" => Ok(StepEvent::Unlearn),
            "skip" => Ok(StepEvent::Skip),
            other => Err(Error::InvalidInput(format!("unknown trace event {other:?}"))),
        }
    }
}

pub(crate) mod vec_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&format_vector(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vector, D::Error> {
        let s = String::deserialize(d)?;
        parse_vector(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEvent {
    /// 1-based deletion ordinal.
    pub i: usize,
    pub t: usize,
    /// Deleted loss index `uᵢ`.
    pub index: usize,
    pub sigma: f64,
    /// Sensitivity `Δ_{uᵢ}` and the contraction factor used for `σᵢ`.
    pub delta: f64,
    pub gamma_factor: f64,
    #[serde(with = "vec_serde")]
    pub xi: Vector,
    #[serde(with = "vec_serde")]
    pub pre_noise: Vector,
}

/// Inner-phase bookkeeping for one active deletion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub i: usize,
    pub t: usize,
    pub i1: usize,
    pub i2: usize,
    pub inner_steps: usize,
    /// The point after the last deterministic phase, before noise.
    #[serde(with = "vec_serde")]
    pub post_phase: Vector,
}

/// Gradient-evaluation counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CostCounter {
    pub learning: usize,
    pub unlearning: usize,
}

impl CostCounter {
    pub fn total(&self) -> usize {
        self.learning + self.unlearning
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub initial: Vector,
    /// `z₁ … z_T`.
    pub outputs: Vec<Vector>,
    /// `fₜ(zₜ₋₁)`, the loss paid at round `t` (0 for Skip).
    pub losses: Vec<f64>,
    pub rates: Vec<f64>,
    pub events: Vec<StepEvent>,
    /// Per-step contraction `max(|1−ηₜμ|, |1−ηₜβ|)`, 1 on Skip.
    pub gammas: Vec<f64>,
    pub noise_events: Vec<NoiseEvent>,
    pub p_history: Option<Vec<f64>>,
    pub phases: Vec<PhaseRecord>,
    pub cost: CostCounter,
    pub warnings: Vec<String>,
    pub certification_refused: bool,
    pub experimental: bool,
    pub config: serde_json::Value,
}

impl RunTrace {
    pub(crate) fn new(algorithm: Algorithm, seed: u64, initial: Vector, horizon: usize) -> Self {
        Self {
            algorithm,
            seed,
            initial,
            outputs: Vec::with_capacity(horizon),
            losses: Vec::with_capacity(horizon),
            rates: Vec::with_capacity(horizon),
            events: Vec::with_capacity(horizon),
            gammas: Vec::with_capacity(horizon),
            noise_events: Vec::new(),
            p_history: None,
            phases: Vec::new(),
            cost: CostCounter::default(),
            warnings: Vec::new(),
            certification_refused: false,
            experimental: false,
            config: serde_json::Value::Null,
        }
    }

    pub fn horizon(&self) -> usize {
        self.outputs.len()
    }

    /// Output at 1-based time `t`; `t = 0` is the initial point.
    pub fn output(&self, t: usize) -> &Vector {
        if t == 0 {
            &self.initial
        } else {
            &self.outputs[t - 1]
        }
    }

    /// Point played in round `t`, i.e. `zₜ₋₁`.
    pub fn played(&self, t: usize) -> &Vector {
        self.output(t - 1)
    }

    pub fn sigma_at(&self, t: usize) -> Option<f64> {
        self.noise_events.iter().find(|e| e.t == t).map(|e| e.sigma)
    }

    pub fn summary(&self) -> RunSummary {
        let active = matches!(self.algorithm, Algorithm::Active | Algorithm::ActiveSecondOrder);
        RunSummary {
            algorithm: self.algorithm,
            seed: self.seed,
            horizon: self.horizon(),
            config: self.config.clone(),
            initial: self.initial.clone(),
            noise_events: self.noise_events.clone(),
            cost: self.cost,
            grad_evals: self.cost.total(),
            warnings: self.warnings.clone(),
            certification_refused: self.certification_refused,
            experimental: self.experimental,
            i1_per_deletion: active.then(|| self.phases.iter().map(|p| p.i1).collect()),
            i2: if active { self.phases.first().map(|p| p.i2) } else { None },
            inner_steps_total: active.then(|| self.phases.iter().map(|p| p.inner_steps).sum()),
            phases: self.phases.clone(),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        w.write_record(["t", "z", "eta", "loss", "event", "sigma"]).map_err(csv_err)?;
        for t in 1..=self.horizon() {
            let sigma = self.sigma_at(t).map(|s| s.to_string()).unwrap_or_default();
            w.write_record([
                t.to_string(),
                format_vector(&self.outputs[t - 1]),
                self.rates[t - 1].to_string(),
                self.losses[t - 1].to_string(),
                self.events[t - 1].as_str().to_string(),
                sigma,
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// One parsed CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    pub z: Vector,
    pub eta: f64,
    pub loss: f64,
    pub event: StepEvent,
    pub sigma: Option<f64>,
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let bad = |what: &str| Error::InvalidInput(format!("{}: bad {what}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 6 {
            return Err(bad("row width"));
        }
        let sigma = match &rec[5] {
            "" => None,
            s => Some(s.parse().map_err(|_| bad("sigma"))?),
        };
        rows.push(TraceRow {
            t: rec[0].parse().map_err(|_| bad("t"))?,
            z: parse_vector(&rec[1])?,
            eta: rec[2].parse().map_err(|_| bad("eta"))?,
            loss: rec[3].parse().map_err(|_| bad("loss"))?,
            event: StepEvent::parse(&rec[4])?,
            sigma,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub horizon: usize,
    pub config: serde_json::Value,
    #[serde(with = "vec_serde")]
    pub initial: Vector,
    pub noise_events: Vec<NoiseEvent>,
    pub cost: CostCounter,
    pub grad_evals: usize,
    pub warnings: Vec<String>,
    pub certification_refused: bool,
    pub experimental: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub i1_per_deletion: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub i2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub inner_steps_total: Option<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub phases: Vec<PhaseRecord>,
}
