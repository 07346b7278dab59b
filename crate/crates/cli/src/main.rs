use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use collusion_cli::analyze::{analyze, probe, render_probe, write_probe, PROBE_FILE};
use collusion_cli::config::{parse_config, ExperimentConfig, Overrides, Retention};
use collusion_cli::report::render;
use collusion_cli::runner::{check_failures, run_experiment, write_atomic, REPORT_FILE};
use collusion_cli::solve::{solve, SolveOptions};

/// Repeated pricing games between learning agents.
#[derive(Parser)]
#[command(name = "collusion", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the Nash and monopoly benchmarks of the configured game.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Brute-force the discretized game on M interval points and compare.
        #[arg(long, value_name = "M")]
        discrete_check: Option<usize>,
        /// Report exact-potential and strict-monotonicity checks.
        #[arg(long)]
        diagnostics: bool,
        /// Run projected gradient ascent with this step size.
        #[arg(long, value_name = "STEP")]
        gradient: Option<f64>,
    },
    /// Run every seed of a config without a sweep.
    Simulate(Common),
    /// Run every cell and seed of a config with a sweep.
    Sweep(Common),
    /// Verify persisted runs against their traces and export Δ, regret and CCE tables.
    Analyze {
        /// Experiment directory (<out>/<name>).
        dir: PathBuf,
        /// Share of each trace used for the empirical joint distribution.
        #[arg(long, default_value_t = 0.5)]
        tail_fraction: f64,
    },
    /// Replay one converged run and force a deviation of firm 0.
    Probe {
        /// Run directory (<out>/<name>/cell-XXX/seed-XXX).
        run_dir: PathBuf,
        #[arg(long, default_value_t = 15)]
        length: usize,
        /// Also write the price paths to probe.csv in the run directory.
        #[arg(long)]
        export: bool,
    },
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output root; overrides experiment.output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Base seed; replaces seeds.base (or seeds.list by this single seed).
    #[arg(long)]
    seed: Option<u64>,
    /// all, summaries-only or every-<k>.
    #[arg(long)]
    retention: Option<Retention>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let overrides = Overrides {
            out: self.out.clone(),
            out_env: std::env::var_os("COLLUSION_OUT").map(PathBuf::from),
            retention: self.retention,
            seed: self.seed,
        };
        parse_config(&self.config, &overrides)
    }
}

fn run(common: &Common, want_sweep: bool) -> Result<()> {
    let cfg = common.load()?;
    match (want_sweep, cfg.sweep.is_empty()) {
        (true, true) => bail!(
            "{} has no [[sweep]] axes; use `collusion simulate`",
            common.config.display()
        ),
        (false, false) => bail!(
            "{} defines a sweep; use `collusion sweep`",
            common.config.display()
        ),
        _ => {}
    }
    let dir = cfg.experiment_dir();
    eprintln!(
        "{}: {} cell(s) x {} seed(s), retention {}, {} worker(s) -> {}",
        cfg.experiment.name,
        cfg.cell_count(),
        cfg.seeds.len(),
        cfg.retention(),
        common.workers,
        dir.display()
    );
    let result = run_experiment(&cfg, common.workers)?;
    print!("{}", render(&result.reports));
    eprintln!(
        "{} run(s) executed, {} already complete; report in {}",
        result.ran,
        result.skipped,
        dir.join(REPORT_FILE).display()
    );
    check_failures(&result)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve {
            common,
            discrete_check,
            diagnostics,
            gradient,
        } => common.load().and_then(|cfg| {
            let opts = SolveOptions {
                discrete_check,
                diagnostics,
                gradient,
            };
            for cell in cfg.cells()? {
                if !cell.overrides.is_empty() {
                    println!("cell {} [{}]", cell.index, collusion_cli::config::describe_overrides(&cell.overrides));
                }
                print!("{}", solve(&cell.config.game, &opts)?.1);
            }
            Ok(())
        }),
        Command::Simulate(common) => run(&common, false),
        Command::Sweep(common) => run(&common, true),
        Command::Analyze { dir, tail_fraction } => analyze(&dir, tail_fraction).map(|r| {
            println!("{} run(s); {} verified against their traces", r.runs, r.verified);
            if r.without_trace > 0 {
                println!(
                    "note: {} run(s) kept no trace (retention); their regret and CCE rows are absent",
                    r.without_trace
                );
            }
            for p in &r.outputs {
                println!("wrote {}", p.display());
            }
        }),
        Command::Probe {
            run_dir,
            length,
            export,
        } => probe(&run_dir, length).and_then(|r| {
            println!(
                "replayed seed {} (converged at {}); firm 0 deviates to grid action {}",
                r.summary.seed,
                r.summary.converged_at.map(|t| t.to_string()).unwrap_or_default(),
                r.probe.deviation_action
            );
            print!("{}", render_probe(&r.probe));
            if export {
                let path = run_dir.join(PROBE_FILE);
                write_atomic(&path, |w| write_probe(w, &r.probe))
                    .with_context(|| format!("writing {}", path.display()))?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
