//! Post-hoc analysis of persisted experiments and the deviation probe.

use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};

use collusion_core::equilibrium::check_cce;
use collusion_core::io::read_trace;
use collusion_core::sim::{
    deviation_probe, empirical_joint_distribution, replay_metrics, ProbeResult, RunSummary,
};

use crate::config::parse_config;
use crate::runner::{
    load_experiment, read_summary, run_dir, write_atomic, PreparedCell, CONFIG_FILE, SUMMARY_FILE,
    TRACE_FILE,
};

pub const DELTA_FILE: &str = "delta.csv";
pub const REGRET_FILE: &str = "regret.csv";
pub const CCE_FILE: &str = "cce.csv";
pub const PROBE_FILE: &str = "probe.csv";

#[derive(Debug, Default)]
pub struct AnalysisResult {
    pub runs: usize,
    /// Runs whose trace was replayed and matched its summary.
    pub verified: usize,
    pub without_trace: usize,
    pub outputs: Vec<PathBuf>,
}

/// Recomputes every summary from its trace, checks it against the persisted
/// one and exports Δ, regret curves and tail CCE violations.
pub fn analyze(dir: &Path, tail_fraction: f64) -> Result<AnalysisResult> {
    ensure!(
        tail_fraction > 0.0 && tail_fraction <= 1.0,
        "--tail-fraction must be in (0, 1], got {tail_fraction}"
    );
    let (cfg, cells) = load_experiment(dir)?;
    let firms = cfg.game.n();
    let seeds = cfg.seeds.len();
    let mut result = AnalysisResult::default();

    let mut delta = csv::Writer::from_writer(Vec::new());
    let mut head = vec![
        "cell".to_string(),
        "seed_index".into(),
        "seed".into(),
        "converged_at".into(),
    ];
    head.extend((0..firms).map(|i| format!("delta_{i}")));
    head.push("delta_mean".into());
    delta.write_record(&head)?;
    let mut regret = csv::Writer::from_writer(Vec::new());
    regret.write_record(["cell", "seed_index", "firm", "t", "regret"])?;
    let mut cce = csv::Writer::from_writer(Vec::new());
    cce.write_record(["cell", "seed_index", "tail_fraction", "violation"])?;

    let mut missing = Vec::new();
    for prepared in &cells {
        let c = prepared.cell.index;
        for s in 0..seeds {
            let rd = run_dir(dir, c, s);
            let summary_path = rd.join(SUMMARY_FILE);
            if !summary_path.exists() {
                missing.push(format!("cell {c} seed {s}"));
                continue;
            }
            let persisted = read_summary(&summary_path)?;
            result.runs += 1;
            let f = |x: Option<f64>| x.map(|v| format!("{v:.16e}")).unwrap_or_default();
            let mut row = vec![
                c.to_string(),
                s.to_string(),
                persisted.seed.to_string(),
                persisted
                    .converged_at
                    .map(|t| t.to_string())
                    .unwrap_or_default(),
            ];
            row.extend((0..firms).map(|i| f(persisted.delta.as_ref().map(|d| d[i]))));
            row.push(f(persisted.delta_mean));
            delta.write_record(&row)?;

            let trace_path = rd.join(TRACE_FILE);
            if !trace_path.exists() {
                result.without_trace += 1;
                continue;
            }
            let file = fs::File::open(&trace_path)
                .with_context(|| format!("opening {}", trace_path.display()))?;
            let trace = read_trace::<f64, _>(BufReader::new(file))
                .with_context(|| format!("reading {}", trace_path.display()))?;
            let metrics = replay_metrics(
                &trace,
                &prepared.env,
                cfg.simulation.tail_window.as_option(),
            );
            let recomputed =
                prepared.summarize(persisted.seed, &metrics, trace.termination.converged_at())?;
            ensure!(
                recomputed == persisted,
                "cell {c} seed {s}: summary recomputed from the trace differs from {}\n  persisted  {persisted:?}\n  recomputed {recomputed:?}",
                summary_path.display()
            );
            result.verified += 1;
            for (firm, series) in metrics.regret.iter().enumerate() {
                for (t, r) in series {
                    regret.write_record([
                        c.to_string(),
                        s.to_string(),
                        firm.to_string(),
                        t.to_string(),
                        format!("{r:.16e}"),
                    ])?;
                }
            }
            if !trace.records.is_empty() {
                let dist = empirical_joint_distribution(&trace, &prepared.env, tail_fraction)?;
                let v = check_cce(prepared.env.tensor(), &dist)?;
                cce.write_record([
                    c.to_string(),
                    s.to_string(),
                    tail_fraction.to_string(),
                    format!("{v:.16e}"),
                ])?;
            }
        }
    }
    if !missing.is_empty() {
        bail!(
            "{} run(s) have no summary: {}",
            missing.len(),
            missing.join(", ")
        );
    }
    for (name, w) in [(DELTA_FILE, delta), (REGRET_FILE, regret), (CCE_FILE, cce)] {
        let bytes = w
            .into_inner()
            .map_err(|e| anyhow::anyhow!("{}", e.error()))?;
        let path = dir.join(name);
        write_atomic(&path, |out| Ok(out.write_all(&bytes)?))?;
        result.outputs.push(path);
    }
    Ok(result)
}

pub struct ProbeReport {
    pub summary: RunSummary<f64>,
    pub probe: ProbeResult<f64>,
}

/// Replays the run in `run_dir` from its resolved config, checks it against
/// the persisted summary and probes one deviation of firm 0.
pub fn probe(run_dir: &Path, length: usize) -> Result<ProbeReport> {
    ensure!(length >= 1, "--length must be >= 1");
    let cfg = parse_config(&run_dir.join(CONFIG_FILE), &Default::default())?;
    let Some(sel) = cfg.run else {
        bail!(
            "{} is not a run directory: its config has no [run] selector",
            run_dir.display()
        );
    };
    let cell = cfg
        .cells()?
        .into_iter()
        .nth(sel.cell)
        .context("run.cell out of range")?;
    let prepared = PreparedCell::new(cell)?;
    let (outcome, summary) = prepared.simulate(sel.seed_index, |_| {})?;
    let summary_path = run_dir.join(SUMMARY_FILE);
    if summary_path.exists() {
        let persisted = read_summary(&summary_path)?;
        ensure!(
            persisted == summary,
            "replayed run differs from {}; the build or the config changed since the run",
            summary_path.display()
        );
    }
    let probe = deviation_probe(&outcome, &prepared.env, length)?;
    Ok(ProbeReport { summary, probe })
}

pub fn write_probe<W: Write>(out: W, probe: &ProbeResult<f64>) -> Result<()> {
    let firms = probe.pre_deviation.len();
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["stage".to_string()];
    head.extend((0..firms).map(|i| format!("price_{i}")));
    head.extend((0..firms).map(|i| format!("action_{i}")));
    w.write_record(&head)?;
    let mut row = vec!["0".to_string()];
    row.extend(probe.pre_deviation.iter().map(|p| format!("{p:.16e}")));
    row.extend(std::iter::repeat_n(String::new(), firms));
    w.write_record(&row)?;
    for (k, (prices, actions)) in probe.paths.iter().zip(&probe.actions).enumerate() {
        let mut row = vec![(k + 1).to_string()];
        row.extend(prices.iter().map(|p| format!("{p:.16e}")));
        row.extend(actions.iter().map(|a| a.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn render_probe(probe: &ProbeResult<f64>) -> String {
    let mut s = format!(
        "stage  {}\n",
        (0..probe.pre_deviation.len())
            .map(|i| format!("{:>10}", format!("firm {i}")))
            .collect::<String>()
    );
    let line = |label: String, prices: &[f64]| {
        format!(
            "{label:>5}  {}\n",
            prices
                .iter()
                .map(|p| format!("{p:>10.4}"))
                .collect::<String>()
        )
    };
    s += &line("pre".into(), &probe.pre_deviation);
    for (k, p) in probe.paths.iter().enumerate() {
        s += &line((k + 1).to_string(), p);
    }
    s
}
