use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use olu_core::exec::{with_threads, Execution};
use olu_core::harness::experiment::{parse_sweep, regret_report_from_dir};
use olu_core::harness::{parse_config, run_experiment, run_sweep, ExperimentConfig, ExperimentSummary, Mode, RunOptions};

#[derive(Parser)]
#[command(name = "olu", version, about = "Online learning with deletions: experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config over its seeds and write traces, regret and certification reports.
    Run(Common),
    /// Run a grid of configs declared as JSON-pointer axes over a base config.
    Sweep(Common),
    /// Run the learner and certification only; no regret computation.
    Certify(Common),
    /// Recompute regret reports from stored traces.
    RegretReport(ReportArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed list overriding the config: `1,2,3`, `0..20` or `0..=19`.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads; 1 runs sequentially.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Config whose experiment directory under `--out` is recomputed.
    #[arg(long, required_unless_present = "dir")]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seeds: Option<String>,
    /// Experiment directory to recompute directly.
    #[arg(long, conflicts_with = "config")]
    dir: Option<PathBuf>,
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..=") {
        let (a, b): (u64, u64) = (a.parse()?, b.parse()?);
        return Ok((a..=b).collect());
    }
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.parse()?, b.parse()?);
        return Ok((a..b).collect());
    }
    s.split(',').map(|x| x.trim().parse().with_context(|| format!("bad seed {x:?}"))).collect()
}

fn load_config(path: &Path, seeds: Option<&str>) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(s) = seeds {
        cfg.seeds = parse_seeds(s)?;
        cfg.validate()?;
    }
    Ok(cfg)
}

fn exec_for(jobs: Option<usize>) -> Execution {
    match jobs {
        Some(1) => Execution::Sequential,
        _ => Execution::Parallel,
    }
}

fn print_summary(s: &ExperimentSummary, dir: &Path) {
    println!("{} ({:?}, T={}, k={})", dir.display(), s.algorithm, s.horizon, s.k);
    for r in &s.seeds {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6}"));
        println!(
            "  seed {:>6}  regret {:>14}  bound {:>14}  grad_evals {:>8}  cert {:>5}  {}",
            r.seed,
            fmt(r.regret),
            fmt(r.primary_bound),
            r.grad_evals,
            r.cert_pass.map_or("-".to_string(), |p| p.to_string()),
            if r.all_pass { "PASS" } else { "FAIL" }
        );
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run(c) => experiment(c, Mode::Full),
        Command::Certify(c) => experiment(c, Mode::CertifyOnly),
        Command::Sweep(c) => {
            let text = fs::read_to_string(&c.config).with_context(|| format!("reading {}", c.config.display()))?;
            let mut sweep = parse_sweep(&text).with_context(|| format!("in {}", c.config.display()))?;
            if let Some(s) = &c.seeds {
                let seeds = parse_seeds(s)?;
                let base = sweep.base.as_object_mut().context("sweep base must be an object")?;
                base.insert("seeds".into(), seeds.into());
            }
            let opts = RunOptions { exec: exec_for(c.jobs), mode: Mode::Full };
            let (summary, dir) = with_threads(c.jobs, || run_sweep(&sweep, &c.out, opts))?;
            println!("{}", dir.display());
            for r in &summary.rows {
                let point: Vec<String> = r.point.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!(
                    "  {}  mean_regret {}  grad_evals {:.1}  {}",
                    point.join(" "),
                    r.mean_regret.map_or("-".into(), |x| format!("{x:.6}")),
                    r.mean_grad_evals,
                    if r.all_pass { "PASS" } else { "FAIL" }
                );
            }
            Ok(summary.all_pass)
        }
        Command::RegretReport(a) => {
            let dir = match (&a.dir, &a.config) {
                (Some(d), _) => d.clone(),
                (None, Some(p)) => a.out.join(load_config(p, a.seeds.as_deref())?.hash()),
                (None, None) => bail!("--config or --dir is required"),
            };
            let outcomes = regret_report_from_dir(&dir)?;
            for o in &outcomes {
                println!(
                    "  seed {:>6}  {}  {}",
                    o.seed,
                    if o.identical { "unchanged" } else { "rewritten" },
                    if o.pass { "PASS" } else { "FAIL" }
                );
            }
            Ok(outcomes.iter().all(|o| o.pass))
        }
    }
}

fn experiment(c: Common, mode: Mode) -> Result<bool> {
    let cfg = load_config(&c.config, c.seeds.as_deref())?;
    let opts = RunOptions { exec: exec_for(c.jobs), mode };
    let (summary, dir) = with_threads(c.jobs, || run_experiment(&cfg, &c.out, opts))?;
    print_summary(&summary, &dir);
    Ok(summary.all_pass)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
