//! Running configs and writing per-seed artifacts.
//!
//! Layout: `<out>/<config-hash>/{config.json, summary.json}` and
//! `<out>/<config-hash>/<seed>/{trace.csv, run.json, regret.json, regret_curve.csv, cert.json}`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{config_from_value, AlgorithmKind, ExperimentConfig, RateSpec, ResolvedRun};
use crate::active::{run_active, run_active_second_order};
use crate::baselines::{run_discard_restart, run_retraining};
use crate::certifier::{certify_run, CertReport};
use crate::domain::{DeletionSchedule, FnClass};
use crate::error::{Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::ogd::{index_precondition_warnings, nominal_gamma};
use crate::passive::run_passive;
use crate::regret::{
    bound_rhs, g1_from_factors, g2_active, g3_from_history, g_functions, p_history_from_outputs, regret_with,
    BoundParams, BoundValue, ComparatorSet, Table2Row, Theorem,
};
use crate::trace::{read_trace_csv, RunSummary, RunTrace};

/// Runs the configured learner on one resolved seed.
pub fn run_algorithm(cfg: &ExperimentConfig, r: &ResolvedRun, seed: u64) -> Result<RunTrace> {
    let (stream, sched, rs, cls, dom) = (&r.generated.stream, &r.sched, &r.rate, &r.generated.class, &r.dom);
    match cfg.algorithm {
        AlgorithmKind::Passive => run_passive(stream, sched, rs, &cfg.unlearner, cls, dom, seed),
        AlgorithmKind::Active => run_active(stream, sched, rs, &cfg.active_config(), cls, dom, seed),
        AlgorithmKind::Active2 => run_active_second_order(stream, sched, rs, &cfg.active_config(), cls, dom, seed),
        AlgorithmKind::Retrain => run_retraining(stream, sched, rs, dom, seed),
        AlgorithmKind::Discard => run_discard_restart(stream, sched, rs, dom, seed),
    }
}

fn theorem_name(t: Theorem) -> String {
    match t {
        Theorem::T2 => "T2".into(),
        Theorem::T3 => "T3".into(),
        Theorem::T4 => "T4".into(),
        Theorem::T5 => "T5".into(),
        Theorem::T6 => "T6".into(),
        Theorem::Table2(row) => format!("table2:{}", serde_json::to_value(row).expect("row serializes").as_str().unwrap_or("")),
    }
}

fn table2_row(alg: AlgorithmKind, cls: &FnClass) -> Table2Row {
    let sc = cls.mu > 0.0;
    match (alg, sc) {
        (AlgorithmKind::Passive, true) => Table2Row::PassiveSc,
        (AlgorithmKind::Passive, false) => Table2Row::PassiveC,
        (AlgorithmKind::Active | AlgorithmKind::Active2, _) => Table2Row::Active,
        (AlgorithmKind::Retrain, true) => Table2Row::RetrainSc,
        (AlgorithmKind::Retrain, false) => Table2Row::RetrainC,
        (AlgorithmKind::Discard, true) => Table2Row::DiscardSc,
        (AlgorithmKind::Discard, false) => Table2Row::DiscardC,
    }
}

/// The theorem whose explicit bound the configuration is meant to satisfy, if any.
fn primary_theorem(cfg: &ExperimentConfig) -> Option<Theorem> {
    match (cfg.algorithm, cfg.rate) {
        (AlgorithmKind::Passive, RateSpec::ScDecreasing) => Some(Theorem::T2),
        (AlgorithmKind::Passive, RateSpec::ConvexDecreasing) => Some(Theorem::T3),
        (AlgorithmKind::Passive, RateSpec::Adaptive) => Some(Theorem::T4),
        (AlgorithmKind::Passive, RateSpec::WorstCaseConstant) => Some(Theorem::T5),
        (AlgorithmKind::Active, _) => Some(Theorem::T6),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretReport {
    pub algo: AlgorithmKind,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub k: usize,
    pub regret: f64,
    pub regret_per_interval: Vec<f64>,
    pub primary: Option<String>,
    pub bound_rhs: BTreeMap<String, BoundValue>,
    /// `G₁` with the class's nominal contraction.
    #[serde(rename = "G1")]
    pub g1: f64,
    /// `G₁` with the contraction factors the learner actually applied; used in the bounds.
    #[serde(rename = "G1_realized")]
    pub g1_realized: f64,
    #[serde(rename = "G2")]
    pub g2: f64,
    #[serde(rename = "G3")]
    pub g3: Option<f64>,
    #[serde(rename = "G2_active")]
    pub g2_active: f64,
    pub kappa: f64,
    pub kappa_aggregate: f64,
    pub grad_evals: usize,
    /// Pass flags only for explicit (non-asymptotic) bounds whose preconditions hold.
    pub pass: BTreeMap<String, bool>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub t: usize,
    pub cumulative_regret: f64,
    pub bound_rhs: Option<f64>,
}

struct BoundInputs<'a> {
    cfg: &'a ExperimentConfig,
    r: &'a ResolvedRun,
    factors: Vec<f64>,
    p: Vec<f64>,
    /// `Σ_{s≤t} fₛ(z*_{epoch(s)})`.
    comparator_prefix: Vec<f64>,
}

impl BoundInputs<'_> {
    fn params(&self, horizon: usize, j: usize) -> Result<(BoundParams, f64, f64, Option<f64>, f64)> {
        let cls = &self.r.generated.class;
        let sched = DeletionSchedule::new(self.r.sched.entries()[..j].to_vec())?;
        let gamma = nominal_gamma(cls);
        let g = g_functions(&sched, gamma, None)?;
        let g1_real = if self.factors.len() >= j { g1_from_factors(&sched, &self.factors[..j]) } else { g.g1 };
        let g3 = g3_from_history(&sched, &self.p, cls.beta).ok();
        let g2a = g2_active(&sched, gamma);
        let params = BoundParams {
            lipschitz: cls.lipschitz,
            mu: cls.mu,
            beta: cls.beta,
            diameter: self.r.dom.diameter(),
            horizon,
            k: j,
            d: self.cfg.dimension,
            eps: self.cfg.unlearner.eps,
            kappa: Some(self.r.generated.kappa),
            g1: g1_real,
            g2: g.g2,
            g3: g3.unwrap_or(0.0),
            g2_active: g2a,
            comparator_loss: self.comparator_prefix[horizon - 1],
        };
        Ok((params, g.g1, g.g2, g3, g2a))
    }
}

/// Regret, bounds and the plot-ready curve. Depends only on the trace's outputs and noise events,
/// so it can be recomputed exactly from stored artifacts.
pub fn regret_report(cfg: &ExperimentConfig, r: &ResolvedRun, trace: &RunTrace) -> Result<(RegretReport, Vec<CurveRow>)> {
    let (stream, sched, dom, cls) = (&r.generated.stream, &r.sched, &r.dom, &r.generated.class);
    let horizon = stream.len();
    let k = sched.len();
    let comps = ComparatorSet::full_horizon(stream, sched, dom)?;
    let breakdown = regret_with(trace, stream, sched, &comps)?;

    let mut comparator_prefix = Vec::with_capacity(horizon);
    let mut acc = 0.0;
    let mut epoch = 0;
    for t in 1..=horizon {
        while sched.entries().get(epoch).is_some_and(|d| d.time < t) {
            epoch += 1;
        }
        if let Some(f) = stream.at(t).cost() {
            acc += f.eval_grad(&comps.z_star[epoch].z)?.0;
        }
        comparator_prefix.push(acc);
    }
    let inputs = BoundInputs {
        cfg,
        r,
        factors: trace.noise_events.iter().map(|e| e.gamma_factor).collect(),
        p: p_history_from_outputs(stream, &trace.initial, &trace.outputs)?,
        comparator_prefix,
    };
    let (params, g1, g2, g3, g2a) = inputs.params(horizon, k)?;

    let mut theorems = vec![Theorem::T3, Theorem::T5, Theorem::T4];
    if cls.mu > 0.0 {
        theorems.extend([Theorem::T2, Theorem::T6]);
    }
    theorems.push(Theorem::Table2(table2_row(cfg.algorithm, cls)));
    let mut bounds = BTreeMap::new();
    for thm in theorems {
        if let Ok(b) = bound_rhs(thm, &params) {
            bounds.insert(theorem_name(thm), b);
        }
    }

    let mut warnings = index_precondition_warnings(sched, &r.rate, cls, dom);
    let primary = primary_theorem(cfg);
    let mut pass = BTreeMap::new();
    if let Some(thm) = primary {
        let name = theorem_name(thm);
        match bounds.get(&name) {
            Some(b) if b.order_form => {}
            Some(b) if warnings.is_empty() => {
                pass.insert(name, breakdown.total <= b.total);
            }
            Some(_) => warnings.push(format!("{name} preconditions unmet; no pass flag")),
            None => warnings.push(format!("{name} bound unavailable for this class")),
        }
    }

    let mut curve = Vec::with_capacity(horizon);
    let mut j = 0;
    for t in 1..=horizon {
        while sched.entries().get(j).is_some_and(|d| d.time <= t) {
            j += 1;
        }
        let rhs = match primary {
            Some(thm) => bound_rhs(thm, &inputs.params(t, j)?.0).ok().map(|b| b.total),
            None => None,
        };
        curve.push(CurveRow { t, cumulative_regret: breakdown.cumulative[t - 1], bound_rhs: rhs });
    }

    let report = RegretReport {
        algo: cfg.algorithm,
        horizon,
        k,
        regret: breakdown.total,
        regret_per_interval: breakdown.per_interval,
        primary: primary.map(theorem_name),
        bound_rhs: bounds,
        g1,
        g1_realized: params.g1,
        g2,
        g3,
        g2_active: g2a,
        kappa: r.generated.kappa,
        kappa_aggregate: r.generated.kappa_aggregate,
        grad_evals: trace.cost.total(),
        pass,
        warnings,
    };
    Ok((report, curve))
}

pub fn certify(cfg: &ExperimentConfig, r: &ResolvedRun, trace: &RunTrace, exec: Execution) -> Result<Option<CertReport>> {
    let certifiable = matches!(cfg.algorithm, AlgorithmKind::Passive | AlgorithmKind::Active);
    if !cfg.certify.enabled || !certifiable || r.sched.is_empty() {
        return Ok(None);
    }
    let mc = (cfg.certify.mc_samples > 0).then_some((cfg.certify.mc_samples, trace.seed ^ 0x6d63));
    certify_run(&r.generated.stream, &r.sched, &r.rate, &cfg.unlearner, &r.generated.class, &r.dom, trace, mc, exec)
        .map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub regret: Option<f64>,
    pub primary_bound: Option<f64>,
    pub bound_pass: Option<bool>,
    pub grad_evals: usize,
    pub learning_steps: usize,
    pub unlearning_steps: usize,
    pub first_sigma: Option<f64>,
    pub cert_pass: Option<bool>,
    /// `min(αε − analytic)` over intervals.
    pub budget_margin: Option<f64>,
    /// `min(analytic − exact)` over intervals with an exact value.
    pub sandwich_margin: Option<f64>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config_hash: String,
    pub name: Option<String>,
    pub algorithm: AlgorithmKind,
    pub horizon: usize,
    pub k: usize,
    pub seeds: Vec<SeedRow>,
    pub mean_regret: Option<f64>,
    pub max_regret: Option<f64>,
    pub mean_grad_evals: f64,
    pub bound_compliance_rate: Option<f64>,
    pub min_budget_margin: Option<f64>,
    pub min_sandwich_margin: Option<f64>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Full,
    /// Certification only; no regret computation.
    CertifyOnly,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub exec: Execution,
    pub mode: Mode,
}

pub(crate) fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Json { path: path.display().to_string(), source: e })?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json { path: path.display().to_string(), source: e })
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

pub fn write_curve(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["t", "cumulative_regret", "bound_rhs"]).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.t.to_string(),
            r.cumulative_regret.to_string(),
            r.bound_rhs.map(|b| b.to_string()).unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

struct SeedOutcome {
    row: SeedRow,
}

fn run_seed(cfg: &ExperimentConfig, seed: u64, dir: &Path, opts: RunOptions) -> Result<SeedOutcome> {
    let r = cfg.resolve(seed)?;
    let trace = run_algorithm(cfg, &r, seed)?;
    create_dir(dir)?;
    trace.write_csv(&dir.join("trace.csv"))?;
    write_json(&dir.join("run.json"), &trace.summary())?;

    let (regret, primary_bound, bound_pass, regret_pass) = match opts.mode {
        Mode::Full => {
            let (report, curve) = regret_report(cfg, &r, &trace)?;
            write_json(&dir.join("regret.json"), &report)?;
            write_curve(&dir.join("regret_curve.csv"), &curve)?;
            let primary_bound = report.primary.as_ref().and_then(|p| report.bound_rhs.get(p)).map(|b| b.total);
            let bound_pass = report.primary.as_ref().and_then(|p| report.pass.get(p).copied());
            (Some(report.regret), primary_bound, bound_pass, report.pass.values().all(|p| *p))
        }
        Mode::CertifyOnly => (None, None, None, true),
    };

    let cert = certify(cfg, &r, &trace, opts.exec)?;
    let cert_path = dir.join("cert.json");
    if let Some(c) = &cert {
        write_json(&cert_path, c)?;
    } else if cert_path.exists() {
        fs::remove_file(&cert_path).map_err(|e| Error::io(&cert_path, e))?;
    }
    let budget_margin = cert.as_ref().and_then(|c| {
        c.intervals.iter().map(|i| i.budget - i.analytic_bound).reduce(f64::min)
    });
    let sandwich_margin = cert.as_ref().and_then(|c| {
        c.intervals
            .iter()
            .filter_map(|i| i.exact_divergence.map(|x| i.analytic_bound - x))
            .reduce(f64::min)
    });
    let cert_pass = cert.as_ref().map(|c| c.pass);
    Ok(SeedOutcome {
        row: SeedRow {
            seed,
            regret,
            primary_bound,
            bound_pass,
            grad_evals: trace.cost.total(),
            learning_steps: trace.cost.learning,
            unlearning_steps: trace.cost.unlearning,
            first_sigma: trace.noise_events.first().map(|e| e.sigma),
            cert_pass,
            budget_margin,
            sandwich_margin,
            all_pass: regret_pass && cert_pass.unwrap_or(true),
        },
    })
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Runs every seed and writes artifacts under `<out>/<config-hash>/`. Returns the summary and
/// the experiment directory.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, opts: RunOptions) -> Result<(ExperimentSummary, PathBuf)> {
    cfg.validate()?;
    let hash = cfg.hash();
    let root = out.join(&hash);
    create_dir(&root)?;
    write_json(&root.join("config.json"), cfg)?;
    let outcomes = map_indexed(opts.exec, cfg.seeds.len(), |n| {
        let seed = cfg.seeds[n];
        run_seed(cfg, seed, &root.join(seed.to_string()), opts)
    });
    let rows: Vec<SeedRow> = outcomes.into_iter().map(|o| o.map(|o| o.row)).collect::<Result<_>>()?;

    let regrets: Vec<f64> = rows.iter().filter_map(|r| r.regret).collect();
    let flags: Vec<bool> = rows.iter().filter_map(|r| r.bound_pass).collect();
    let grad: Vec<f64> = rows.iter().map(|r| r.grad_evals as f64).collect();
    let summary = ExperimentSummary {
        config_hash: hash,
        name: cfg.name.clone(),
        algorithm: cfg.algorithm,
        horizon: cfg.horizon,
        k: cfg.schedule.k(),
        mean_regret: mean(&regrets),
        max_regret: regrets.iter().copied().reduce(f64::max),
        mean_grad_evals: mean(&grad).unwrap_or(0.0),
        bound_compliance_rate: (!flags.is_empty())
            .then(|| flags.iter().filter(|p| **p).count() as f64 / flags.len() as f64),
        min_budget_margin: rows.iter().filter_map(|r| r.budget_margin).reduce(f64::min),
        min_sandwich_margin: rows.iter().filter_map(|r| r.sandwich_margin).reduce(f64::min),
        all_pass: rows.iter().all(|r| r.all_pass),
        seeds: rows,
    };
    let name = match opts.mode {
        Mode::Full => "summary.json",
        Mode::CertifyOnly => "cert_summary.json",
    };
    write_json(&root.join(name), &summary)?;
    Ok((summary, root))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecomputeOutcome {
    pub seed: u64,
    /// Whether the recomputed `regret.json` matched the stored one byte for byte.
    pub identical: bool,
    pub pass: bool,
}

/// Recomputes every seed's regret report from `trace.csv` and `run.json` in an experiment directory.
pub fn regret_report_from_dir(dir: &Path) -> Result<Vec<RecomputeOutcome>> {
    let cfg_path = dir.join("config.json");
    let cfg: ExperimentConfig = config_from_value(read_json::<Value>(&cfg_path)?)?;
    let mut out = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let sdir = dir.join(seed.to_string());
        let r = cfg.resolve(seed)?;
        let trace = load_trace(&sdir)?;
        let (report, curve) = regret_report(&cfg, &r, &trace)?;
        let path = sdir.join("regret.json");
        let old = fs::read(&path).ok();
        write_json(&path, &report)?;
        write_curve(&sdir.join("regret_curve.csv"), &curve)?;
        let new = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        out.push(RecomputeOutcome { seed, identical: old.as_deref() == Some(&new[..]), pass: report.pass.values().all(|p| *p) });
    }
    Ok(out)
}

/// Rebuilds the parts of a trace that reports depend on from stored artifacts.
pub fn load_trace(dir: &Path) -> Result<RunTrace> {
    let summary: RunSummary = read_json(&dir.join("run.json"))?;
    let rows = read_trace_csv(&dir.join("trace.csv"))?;
    let mut trace = RunTrace::new(summary.algorithm, summary.seed, summary.initial, rows.len());
    for row in rows {
        trace.outputs.push(row.z);
        trace.rates.push(row.eta);
        trace.losses.push(row.loss);
        trace.events.push(row.event);
    }
    trace.noise_events = summary.noise_events;
    trace.cost = summary.cost;
    trace.warnings = summary.warnings;
    trace.certification_refused = summary.certification_refused;
    trace.experimental = summary.experimental;
    trace.phases = summary.phases;
    trace.config = summary.config;
    Ok(trace)
}

/// One grid axis: a JSON pointer into the base config and the values it takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub base: Value,
    pub axes: Vec<SweepAxis>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub point: BTreeMap<String, Value>,
    pub config_hash: String,
    pub mean_regret: Option<f64>,
    pub max_regret: Option<f64>,
    pub mean_grad_evals: f64,
    pub mean_first_sigma: Option<f64>,
    pub bound_compliance_rate: Option<f64>,
    pub all_pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSummary {
    pub name: Option<String>,
    pub rows: Vec<SweepRow>,
    pub all_pass: bool,
}

pub fn parse_sweep(text: &str) -> Result<SweepConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| Error::InvalidConfig(format!("{}: {}", e.path(), e.inner())))
}

/// Expands the grid in row-major order (last axis fastest).
pub fn sweep_points(sweep: &SweepConfig) -> Result<Vec<(BTreeMap<String, Value>, Value)>> {
    let mut points = vec![(BTreeMap::new(), sweep.base.clone())];
    for axis in &sweep.axes {
        if axis.values.is_empty() {
            return Err(Error::InvalidConfig(format!("axes[{}]: no values", axis.path)));
        }
        let mut next = Vec::with_capacity(points.len() * axis.values.len());
        for (label, base) in &points {
            for v in &axis.values {
                let mut cfg = base.clone();
                let slot = cfg
                    .pointer_mut(&axis.path)
                    .ok_or_else(|| Error::InvalidConfig(format!("axes[{}]: path not present in base config", axis.path)))?;
                *slot = v.clone();
                let mut label = label.clone();
                label.insert(axis.path.clone(), v.clone());
                next.push((label, cfg));
            }
        }
        points = next;
    }
    Ok(points)
}

pub fn run_sweep(sweep: &SweepConfig, out: &Path, opts: RunOptions) -> Result<(SweepSummary, PathBuf)> {
    let points = sweep_points(sweep)?;
    let configs = points
        .iter()
        .enumerate()
        .map(|(n, (_, v))| config_from_value(v.clone()).map_err(|e| Error::InvalidConfig(format!("sweep point {n}: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    let results = map_indexed(opts.exec, configs.len(), |n| run_experiment(&configs[n], out, opts));
    let mut rows = Vec::with_capacity(results.len());
    for ((label, _), res) in points.into_iter().zip(results) {
        let (s, _) = res?;
        rows.push(SweepRow {
            point: label,
            config_hash: s.config_hash.clone(),
            mean_regret: s.mean_regret,
            max_regret: s.max_regret,
            mean_grad_evals: s.mean_grad_evals,
            mean_first_sigma: mean(&s.seeds.iter().filter_map(|r| r.first_sigma).collect::<Vec<_>>()),
            bound_compliance_rate: s.bound_compliance_rate,
            all_pass: s.all_pass,
        });
    }
    let summary = SweepSummary { name: sweep.name.clone(), all_pass: rows.iter().all(|r| r.all_pass), rows };
    let canon = serde_json::to_string(sweep).expect("sweep serializes");
    let hash = {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(canon.as_bytes()))[..16].to_string()
    };
    let dir = out.join(format!("sweep-{hash}"));
    create_dir(&dir)?;
    write_json(&dir.join("sweep_summary.json"), &summary)?;
    write_sweep_csv(&dir.join("sweep_summary.csv"), sweep, &summary)?;
    Ok((summary, dir))
}

fn write_sweep_csv(path: &Path, sweep: &SweepConfig, s: &SweepSummary) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut header: Vec<String> = sweep.axes.iter().map(|a| a.path.clone()).collect();
    header.extend(
        ["config_hash", "mean_regret", "max_regret", "mean_grad_evals", "mean_first_sigma", "bound_compliance_rate", "all_pass"]
            .map(String::from),
    );
    w.write_record(&header).map_err(csv_err)?;
    for r in &s.rows {
        let mut rec: Vec<String> = sweep
            .axes
            .iter()
            .map(|a| match &r.point[&a.path] {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect();
        rec.extend([
            r.config_hash.clone(),
            opt(r.mean_regret),
            opt(r.max_regret),
            r.mean_grad_evals.to_string(),
            opt(r.mean_first_sigma),
            opt(r.bound_compliance_rate),
            r.all_pass.to_string(),
        ]);
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
