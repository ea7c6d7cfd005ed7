//! Deletion schedule specifications.

use serde::{Deserialize, Serialize};

use crate::domain::{Deletion, DeletionSchedule};
use crate::error::{Error, Result};
use crate::rng::NoiseSource;

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    #[default]
    None,
    Explicit { deletions: Vec<Deletion> },
    /// `τᵢ = first + (i−1)·spacing`, `uᵢ = τᵢ − gap`; `first` defaults to `spacing`.
    Pattern {
        k: usize,
        gap: usize,
        spacing: usize,
        #[serde(default)]
        first: Option<usize>,
    },
    /// `uᵢ = first_index + i − 1` (the earliest losses), `τᵢ = i·spacing`.
    AdversarialEarly {
        k: usize,
        spacing: usize,
        #[serde(default = "one")]
        first_index: usize,
    },
    /// Seeded random times with `uᵢ ∈ [max(min_index, τᵢ₋₁+1), τᵢ − min_gap]`.
    Random {
        k: usize,
        #[serde(default = "one")]
        min_index: usize,
        #[serde(default)]
        min_gap: usize,
    },
}

impl ScheduleSpec {
    pub fn k(&self) -> usize {
        match self {
            ScheduleSpec::None => 0,
            ScheduleSpec::Explicit { deletions } => deletions.len(),
            ScheduleSpec::Pattern { k, .. } | ScheduleSpec::AdversarialEarly { k, .. } | ScheduleSpec::Random { k, .. } => *k,
        }
    }
}

pub fn build_schedule(spec: &ScheduleSpec, horizon: usize, seed: u64) -> Result<DeletionSchedule> {
    let sched = match spec {
        ScheduleSpec::None => DeletionSchedule::empty(),
        ScheduleSpec::Explicit { deletions } => DeletionSchedule::new(deletions.clone())?,
        ScheduleSpec::Pattern { k, gap, spacing, first } => {
            let first = first.unwrap_or(*spacing);
            let mut v = Vec::with_capacity(*k);
            for i in 0..*k {
                let time = first + i * spacing;
                if time <= *gap {
                    return Err(Error::InvalidSchedule(format!("deletion {}: gap {gap} reaches before time 1", i + 1)));
                }
                v.push(Deletion { index: time - gap, time });
            }
            DeletionSchedule::new(v)?
        }
        ScheduleSpec::AdversarialEarly { k, spacing, first_index } => {
            let v = (0..*k).map(|i| Deletion { index: first_index + i, time: (i + 1) * spacing }).collect();
            DeletionSchedule::new(v)?
        }
        ScheduleSpec::Random { k, min_index, min_gap } => random_schedule(*k, *min_index, *min_gap, horizon, seed)?,
    };
    sched.check_horizon(horizon)?;
    Ok(sched)
}

fn random_schedule(k: usize, min_index: usize, min_gap: usize, horizon: usize, seed: u64) -> Result<DeletionSchedule> {
    if k == 0 {
        return Ok(DeletionSchedule::empty());
    }
    let lo = min_index.max(1) + min_gap;
    if lo > horizon || horizon - lo + 1 < k {
        return Err(Error::InvalidSchedule(format!(
            "cannot place {k} deletions in [{lo}, {horizon}] with min_index {min_index}, min_gap {min_gap}"
        )));
    }
    let mut rng = NoiseSource::for_stream(seed, 0x5c);
    for _ in 0..1000 {
        let mut times: Vec<usize> = Vec::with_capacity(k);
        while times.len() < k {
            let t = rng.int_range(lo, horizon);
            if !times.contains(&t) {
                times.push(t);
            }
        }
        times.sort_unstable();
        let mut prev = 0;
        let mut v = Vec::with_capacity(k);
        for &time in &times {
            let ulo = min_index.max(prev + 1);
            let uhi = time - min_gap;
            if ulo > uhi {
                break;
            }
            v.push(Deletion { index: rng.int_range(ulo, uhi), time });
            prev = time;
        }
        if v.len() == k {
            return DeletionSchedule::new(v);
        }
    }
    Err(Error::InvalidSchedule("random schedule constraints are too tight".into()))
}
