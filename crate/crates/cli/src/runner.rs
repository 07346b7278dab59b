//! Scheduling and persistence of simulation runs.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, ensure, Context, Result};
use rayon::prelude::*;

use collusion_core::equilibrium::{compute_benchmarks, Benchmarks};
use collusion_core::io::{read_summaries, write_summaries, TraceWriter};
use collusion_core::market::bound_grid_to_equilibria;
use collusion_core::sim::{run_episode_with, EpisodeOutcome, RunSummary};
use collusion_core::{ActionGrid, Env, SimConfig};

use crate::config::{describe_overrides, Cell, ExperimentConfig, GridConfig, RunSelector};
use crate::report::{write_report, CellReport};

/// Largest payoff tensor a run may build.
pub const PROFILE_CAP: usize = 50_000_000;
const BENCHMARK_TOL: f64 = 1e-12;
const BENCHMARK_ITER: usize = 1_000;

pub const CONFIG_FILE: &str = "resolved-config.toml";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRACE_FILE: &str = "trace.jsonl";
pub const REPORT_FILE: &str = "report.csv";

/// A cell with its benchmarks and stage game built.
pub struct PreparedCell {
    pub cell: Cell,
    pub env: Arc<Env>,
    pub benchmarks: Benchmarks<f64>,
    /// Whether Δ is defined: monopoly differs from Nash for every firm.
    pub delta_defined: bool,
}

impl PreparedCell {
    pub fn new(cell: Cell) -> Result<Self> {
        let cfg = &cell.config;
        let game = &cfg.game;
        let benchmarks = compute_benchmarks(game, BENCHMARK_TOL, BENCHMARK_ITER)
            .with_context(|| format!("cell {}: computing benchmarks", cell.index))?;
        for (what, r) in [
            ("Nash", &benchmarks.nash),
            ("monopoly", &benchmarks.monopoly),
        ] {
            ensure!(
                r.converged,
                "cell {}: {what} benchmark did not converge (residual {:e} after {} iterations)",
                cell.index,
                r.residual,
                r.iterations
            );
        }
        let nash = &benchmarks.nash.prices.0;
        let monopoly = &benchmarks.monopoly.prices.0;
        let delta_defined = nash.iter().zip(monopoly).all(|(a, b)| a != b);

        let (lower, upper) = match cfg.grid {
            GridConfig::Equilibria { extension, .. } => {
                let lo = nash.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = monopoly.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                bound_grid_to_equilibria(lo, hi, extension).with_context(|| {
                    format!("cell {}: grid.bounds = \"equilibria\" needs monopoly above Nash; use \"interval\" or \"explicit\"", cell.index)
                })?
            }
            GridConfig::Interval { .. } => game.interval(),
            GridConfig::Explicit { lower, upper, .. } => (lower, upper),
        };
        let (a, b) = game.interval();
        ensure!(
            lower >= a && upper <= b,
            "cell {}: grid [{lower}, {upper}] leaves the price interval [{a}, {b}]",
            cell.index
        );
        let grid = ActionGrid::uniform(lower, upper, cfg.grid.points())?;
        let env = Env::from_market(game.clone(), grid, PROFILE_CAP)
            .with_context(|| format!("cell {}: building the stage game", cell.index))?;
        Ok(PreparedCell {
            cell,
            env: Arc::new(env),
            benchmarks,
            delta_defined,
        })
    }

    fn benchmark_pair(&self) -> Option<(&[f64], &[f64])> {
        self.delta_defined.then(|| {
            (
                &self.benchmarks.nash.prices.0[..],
                &self.benchmarks.monopoly.prices.0[..],
            )
        })
    }

    pub fn sim_config(&self, seed_index: usize) -> SimConfig<f64> {
        let cfg = &self.cell.config;
        SimConfig {
            environment: self.env.clone(),
            agents: cfg.agent_specs(),
            horizon: cfg.simulation.horizon,
            convergence_window: cfg.simulation.convergence_window,
            tail_window: cfg.simulation.tail_window.as_option(),
            noise_sd: cfg.simulation.noise_sd,
            seed: cfg.seeds.run_seed(self.cell.index, seed_index),
        }
    }

    /// Runs one episode, passing records to `sink`.
    pub fn simulate(
        &self,
        seed_index: usize,
        sink: impl FnMut(&collusion_core::StageRecord<f64>),
    ) -> Result<(EpisodeOutcome<f64>, RunSummary<f64>)> {
        let sim = self.sim_config(seed_index);
        let outcome = run_episode_with(&sim, sink)?;
        let summary = self.summarize(
            sim.seed,
            &outcome.metrics,
            outcome.termination.converged_at(),
        )?;
        Ok((outcome, summary))
    }

    pub fn summarize(
        &self,
        seed: u64,
        metrics: &collusion_core::sim::EpisodeMetrics<f64>,
        converged_at: Option<u64>,
    ) -> Result<RunSummary<f64>> {
        Ok(RunSummary::from_metrics(
            seed,
            converged_at,
            metrics,
            self.benchmark_pair(),
        )?)
    }
}

pub fn cell_dir(experiment: &Path, cell: usize) -> PathBuf {
    experiment.join(format!("cell-{cell:03}"))
}

pub fn run_dir(experiment: &Path, cell: usize, seed_index: usize) -> PathBuf {
    cell_dir(experiment, cell).join(format!("seed-{seed_index:03}"))
}

/// Writes through a temporary sibling and renames, so a file either exists
/// complete or not at all.
pub fn write_atomic(
    path: &Path,
    write: impl FnOnce(&mut BufWriter<fs::File>) -> Result<()>,
) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let file = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    let mut w = BufWriter::new(file);
    write(&mut w)?;
    w.flush()?;
    w.into_inner()
        .map_err(|e| anyhow!("{}", e.error()))?
        .sync_all()?;
    fs::rename(&tmp, path).with_context(|| format!("renaming {}", tmp.display()))?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<RunSummary<f64>> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut rows =
        read_summaries::<f64, _>(file).with_context(|| format!("reading {}", path.display()))?;
    ensure!(
        rows.len() == 1,
        "{} holds {} rows, expected 1",
        path.display(),
        rows.len()
    );
    Ok(rows.remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Ran,
    /// Complete artifacts were already on disk.
    Skipped,
}

/// Executes one run and persists its artifacts; a run whose summary exists
/// (and trace, when retained) is not repeated.
pub fn execute_run(
    prepared: &PreparedCell,
    experiment_cfg: &ExperimentConfig,
    experiment_dir: &Path,
    seed_index: usize,
) -> Result<(RunStatus, RunSummary<f64>)> {
    let cell = prepared.cell.index;
    let dir = run_dir(experiment_dir, cell, seed_index);
    let keep_trace = experiment_cfg.retention().keeps_trace(seed_index);
    let summary_path = dir.join(SUMMARY_FILE);
    let trace_path = dir.join(TRACE_FILE);
    if summary_path.exists() && (!keep_trace || trace_path.exists()) {
        return Ok((RunStatus::Skipped, read_summary(&summary_path)?));
    }
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let mut run_cfg = experiment_cfg.clone();
    run_cfg.run = Some(RunSelector { cell, seed_index });
    let text = run_cfg.to_toml()?;
    write_atomic(
        &dir.join(CONFIG_FILE),
        |w| Ok(w.write_all(text.as_bytes())?),
    )?;

    let firms = prepared.env.n();
    let summary = if keep_trace {
        let tmp = trace_path.with_extension("tmp");
        let file = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        let mut writer = TraceWriter::new(BufWriter::new(file), firms)?;
        let mut failure = None;
        let (outcome, summary) = prepared.simulate(seed_index, |r| {
            if failure.is_none() {
                failure = writer.write_record(r).err();
            }
        })?;
        if let Some(e) = failure {
            return Err(e).with_context(|| format!("writing {}", tmp.display()));
        }
        let mut w = writer.finish(outcome.termination)?;
        w.flush()?;
        w.into_inner()
            .map_err(|e| anyhow!("{}", e.error()))?
            .sync_all()?;
        fs::rename(&tmp, &trace_path)?;
        summary
    } else {
        prepared.simulate(seed_index, |_| {})?.1
    };
    write_atomic(&summary_path, |w| {
        Ok(write_summaries(w, firms, std::slice::from_ref(&summary))?)
    })?;
    Ok((RunStatus::Ran, summary))
}

#[derive(Debug, Default)]
pub struct ExperimentResult {
    pub reports: Vec<CellReport>,
    pub ran: usize,
    pub skipped: usize,
    pub failures: Vec<(usize, usize, String)>,
}

/// Runs every (cell, seed) of the experiment, or the single run selected by
/// `[run]`, on `workers` threads; writes the resolved config and the report.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentResult> {
    let dir = cfg.experiment_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let text = cfg.to_toml()?;
    let config_path = dir.join(CONFIG_FILE);
    if let Ok(existing) = fs::read_to_string(&config_path) {
        ensure!(
            existing == text,
            "{} already holds a different experiment; pick another experiment.name or --out",
            dir.display()
        );
    } else {
        write_atomic(&config_path, |w| Ok(w.write_all(text.as_bytes())?))?;
    }

    let prepared = cfg
        .cells()?
        .into_iter()
        .map(PreparedCell::new)
        .collect::<Result<Vec<_>>>()?;
    let seeds = cfg.seeds.len();
    let jobs: Vec<(usize, usize)> = match cfg.run {
        Some(sel) => vec![(sel.cell, sel.seed_index)],
        None => (0..prepared.len())
            .flat_map(|c| (0..seeds).map(move |s| (c, s)))
            .collect(),
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("starting worker pool")?;
    let outcomes: Vec<_> = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, s)| (c, s, execute_run(&prepared[c], cfg, &dir, s)))
            .collect()
    });

    let mut result = ExperimentResult::default();
    let mut per_cell: Vec<Vec<RunSummary<f64>>> = vec![Vec::new(); prepared.len()];
    for (c, s, outcome) in outcomes {
        match outcome {
            Ok((status, summary)) => {
                match status {
                    RunStatus::Ran => result.ran += 1,
                    RunStatus::Skipped => result.skipped += 1,
                }
                per_cell[c].push(summary);
            }
            Err(e) => result.failures.push((c, s, format!("{e:#}"))),
        }
    }
    result.reports = prepared
        .iter()
        .zip(&per_cell)
        .filter(|(p, runs)| {
            cfg.run.is_none() || (p.cell.index == cfg.run.unwrap().cell && !runs.is_empty())
        })
        .map(|(p, runs)| CellReport::new(p, runs))
        .collect();
    if cfg.run.is_none() {
        write_atomic(&dir.join(REPORT_FILE), |w| {
            write_report(w, prepared[0].env.n(), &result.reports)
        })?;
    }
    Ok(result)
}

/// Fails with every failed run listed.
pub fn check_failures(result: &ExperimentResult) -> Result<()> {
    if result.failures.is_empty() {
        return Ok(());
    }
    let lines: Vec<String> = result
        .failures
        .iter()
        .map(|(c, s, e)| format!("  cell {c} seed {s}: {e}"))
        .collect();
    bail!(
        "{} run(s) failed:\n{}",
        result.failures.len(),
        lines.join("\n")
    )
}

/// Loads an experiment directory: its resolved config and prepared cells.
pub fn load_experiment(dir: &Path) -> Result<(ExperimentConfig, Vec<PreparedCell>)> {
    let path = dir.join(CONFIG_FILE);
    let cfg = crate::config::parse_config(&path, &Default::default())?;
    let cells = cfg
        .cells()?
        .into_iter()
        .map(PreparedCell::new)
        .collect::<Result<Vec<_>>>()?;
    Ok((cfg, cells))
}

pub fn describe_cell(cell: &Cell) -> String {
    describe_overrides(&cell.overrides)
}
