use std::fs;
use std::path::Path;
use std::process::Command;

use collusion_cli::analyze::{analyze, probe, CCE_FILE, DELTA_FILE, REGRET_FILE};
use collusion_cli::config::{parse_config, parse_config_str, Overrides, Retention};
use collusion_cli::runner::{
    run_dir, run_experiment, CONFIG_FILE, REPORT_FILE, SUMMARY_FILE, TRACE_FILE,
};
use collusion_core::AgentSpec;

const GAME: &str = r#"
[game]
costs = [1.0, 1.0]
price_interval = [1.0, 2.5]
demand = { kind = "logit", quality = [2.0, 2.0], outside_quality = 0.0, differentiation = 0.25 }
"#;

fn config(extra: &str) -> String {
    format!("{GAME}\n{extra}")
}

fn out(dir: &Path) -> Overrides {
    Overrides {
        out: Some(dir.to_path_buf()),
        ..Default::default()
    }
}

fn error_of(text: &str) -> String {
    format!(
        "{:#}",
        parse_config_str(text, &Overrides::default()).unwrap_err()
    )
}

const CONSTANT_RUN: &str = r#"
[experiment]
name = "constant"

[agent]
kind = "constant"
action = 4

[simulation]
horizon = 500
convergence_window = 50

[seeds]
base = 3
count = 2
"#;

#[test]
fn minimal_config_gets_replication_defaults() {
    let cfg = parse_config_str(GAME, &Overrides::default()).unwrap();
    assert_eq!(cfg.experiment.name, "experiment");
    assert_eq!(cfg.output(), Path::new("runs"));
    assert_eq!(cfg.retention(), Retention::All);
    assert_eq!(cfg.simulation.horizon, 2_000_000);
    assert_eq!(cfg.simulation.convergence_window, 100_000);
    assert_eq!(cfg.grid.points(), 15);
    assert_eq!(cfg.seeds.len(), 1);
    assert_eq!(cfg.agent_specs(), vec![AgentSpec::q_learning_default(); 2]);
}

#[test]
fn output_precedence() {
    let text = config("[experiment]\noutput = \"from-config\"");
    let env = Overrides {
        out_env: Some("from-env".into()),
        ..Default::default()
    };
    assert_eq!(
        parse_config_str(&text, &env).unwrap().output(),
        Path::new("from-config")
    );
    assert_eq!(
        parse_config_str(GAME, &env).unwrap().output(),
        Path::new("from-env")
    );
    let flag = Overrides {
        out: Some("from-flag".into()),
        ..env
    };
    assert_eq!(
        parse_config_str(&text, &flag).unwrap().output(),
        Path::new("from-flag")
    );
}

#[test]
fn config_errors_name_the_offending_key() {
    let e = error_of(&config("[[agents]]\nkind = \"exp3\"\n"));
    assert!(
        e.contains("agents has 1 entries but the game has 2 firms"),
        "{e}"
    );

    let e = error_of(&config(
        "[simulation]\nhorizon = 10\nconvergnce_window = 5\n",
    ));
    assert!(e.contains("convergnce_window"), "{e}");

    let e = error_of(&config("[agent]\nkind = \"ucb\"\n"));
    assert!(e.contains("width"), "{e}");

    let e = error_of(&config(
        "[agent]\nkind = \"q_learning\"\nlearning_rate = 1.5\n",
    ));
    assert!(e.contains("learning_rate"), "{e}");

    let e = error_of(&config(
        "[agent]\nkind = \"gradient_ascent\"\nstep = 0.01\n",
    ));
    assert!(e.contains("collusion solve --gradient"), "{e}");

    let e = error_of(&config(
        "[simulation]\nhorizon = 10\nconvergence_window = 50\n",
    ));
    assert!(e.contains("simulation.convergence_window"), "{e}");

    let e = error_of(&config(
        "[[sweep]]\nkey = \"agent.learning_rat\"\nvalues = [0.1]\n",
    ));
    assert!(
        e.contains("learning_rat") && e.contains("learning_rate"),
        "{e}"
    );

    let e = error_of(&config("[experiment]\nretention = \"sometimes\"\n"));
    assert!(e.contains("retention"), "{e}");
}

#[test]
fn sweep_expands_in_declared_order() {
    let text = config(
        r#"
[agent]
kind = "constant"
action = 0

[[sweep]]
key = "game.demand.differentiation"
values = [0.25, 0.5]

[[sweep]]
key = "agent.action"
values = [1, 2, 3]
"#,
    );
    let cfg = parse_config_str(&text, &Overrides::default()).unwrap();
    assert_eq!(cfg.retention(), Retention::SummariesOnly);
    let cells = cfg.cells().unwrap();
    assert_eq!(cells.len(), 6);
    let picks: Vec<(f64, usize)> = cells
        .iter()
        .map(|c| {
            let collusion_core::DemandModel::Logit {
                differentiation, ..
            } = c.config.game.demand_model()
            else {
                unreachable!()
            };
            let AgentSpec::Constant { action } = c.config.agent_specs()[0] else {
                unreachable!()
            };
            (*differentiation, action)
        })
        .collect();
    assert_eq!(
        picks,
        vec![
            (0.25, 1),
            (0.25, 2),
            (0.25, 3),
            (0.5, 1),
            (0.5, 2),
            (0.5, 3)
        ]
    );
    assert_eq!(cells[4].overrides[1].0, "agent.action");
}

#[test]
fn sweep_runs_every_cell_and_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let text = config(
        r#"
[experiment]
name = "grid"

[agent]
kind = "constant"
action = 0

[simulation]
horizon = 200
convergence_window = 20

[seeds]
count = 2

[[sweep]]
key = "game.demand.differentiation"
values = [0.25, 0.5]

[[sweep]]
key = "agent.action"
values = [1, 2, 3]
"#,
    );
    let cfg = parse_config_str(&text, &out(tmp.path())).unwrap();
    let result = run_experiment(&cfg, 2).unwrap();
    assert!(result.failures.is_empty());
    assert_eq!(result.ran, 12);
    assert_eq!(result.reports.len(), 6);
    let exp = tmp.path().join("grid");
    for c in 0..6 {
        for s in 0..2 {
            let rd = run_dir(&exp, c, s);
            assert!(rd.join(SUMMARY_FILE).exists());
            assert!(
                !rd.join(TRACE_FILE).exists(),
                "summaries-only keeps no trace"
            );
        }
    }
    let report = fs::read_to_string(exp.join(REPORT_FILE)).unwrap();
    assert_eq!(report.lines().count(), 7);
    // Higher constant prices give a higher collusion index within a cell row.
    let d: Vec<f64> = result
        .reports
        .iter()
        .map(|r| r.delta_all.as_ref().unwrap().mean)
        .collect();
    assert!(
        d[0] < d[1] && d[1] < d[2] && d[3] < d[4] && d[4] < d[5],
        "{d:?}"
    );

    let a = analyze(&exp, 0.5).unwrap();
    assert_eq!((a.runs, a.verified, a.without_trace), (12, 0, 12));
}

#[test]
fn constant_agents_give_exact_delta_and_rerun_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(&config(CONSTANT_RUN), &out(tmp.path())).unwrap();
    let first = run_experiment(&cfg, 1).unwrap();
    assert_eq!((first.ran, first.skipped), (2, 0));
    let report = &first.reports[0];
    assert_eq!(report.converged, 2);

    let exp = tmp.path().join("constant");
    let summary = fs::read_to_string(run_dir(&exp, 0, 1).join(SUMMARY_FILE)).unwrap();
    let (nash, mono) = (report.nash[0], report.monopoly[0]);
    let (lo, hi) = (nash - 0.1 * (mono - nash), mono + 0.1 * (mono - nash));
    let price = collusion_core::ActionGrid::uniform(lo, hi, 15)
        .unwrap()
        .price(4);
    let delta = (price - nash) / (mono - nash);
    let mean = report.delta_all.as_ref().unwrap();
    assert_eq!(mean.mean, delta);
    assert_eq!(mean.sd, 0.0);
    assert!(summary.contains(&format!("{price:.16e}")), "{summary}");

    let second = run_experiment(&cfg, 1).unwrap();
    assert_eq!((second.ran, second.skipped), (0, 2));
    assert_eq!(second.reports, first.reports);
    assert_eq!(
        fs::read_to_string(run_dir(&exp, 0, 1).join(SUMMARY_FILE)).unwrap(),
        summary
    );

    let a = analyze(&exp, 0.5).unwrap();
    assert_eq!((a.runs, a.verified), (2, 2));
    for f in [DELTA_FILE, REGRET_FILE, CCE_FILE] {
        assert!(exp.join(f).exists());
    }
    let cce = fs::read_to_string(exp.join(CCE_FILE)).unwrap();
    assert_eq!(cce.lines().count(), 3);

    let p = probe(&run_dir(&exp, 0, 0), 4).unwrap();
    assert_eq!(p.probe.paths.len(), 4);
    assert!(p.probe.paths[0][0] < price);
    assert_eq!(p.probe.paths[3], vec![price, price]);
}

#[test]
fn resolved_config_reproduces_the_experiment() {
    let tmp = tempfile::tempdir().unwrap();
    let text = config(
        r#"
[experiment]
name = "q"

[simulation]
horizon = 3000
convergence_window = 100
noise_sd = 0.05

[grid]
bounds = "equilibria"
points = 5

[seeds]
list = [11, 12]
"#,
    );
    let cfg = parse_config_str(&text, &out(&tmp.path().join("a"))).unwrap();
    run_experiment(&cfg, 2).unwrap();
    let echo = tmp.path().join("a/q").join(CONFIG_FILE);
    let again = parse_config(&echo, &out(&tmp.path().join("b"))).unwrap();
    run_experiment(&again, 1).unwrap();
    for s in 0..2 {
        for f in [SUMMARY_FILE, TRACE_FILE] {
            let a = fs::read(run_dir(&tmp.path().join("a/q"), 0, s).join(f)).unwrap();
            let b = fs::read(run_dir(&tmp.path().join("b/q"), 0, s).join(f)).unwrap();
            assert!(a == b, "seed {s} {f} differs");
        }
    }
}

#[test]
fn changed_config_refuses_an_existing_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(&config(CONSTANT_RUN), &out(tmp.path())).unwrap();
    run_experiment(&cfg, 1).unwrap();
    let changed = Overrides {
        seed: Some(99),
        ..out(tmp.path())
    };
    let cfg = parse_config_str(&config(CONSTANT_RUN), &changed).unwrap();
    let e = run_experiment(&cfg, 1).unwrap_err().to_string();
    assert!(e.contains("different experiment"), "{e}");
}

#[test]
fn analyze_rejects_foreign_schema_versions() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(&config(CONSTANT_RUN), &out(tmp.path())).unwrap();
    run_experiment(&cfg, 1).unwrap();
    let exp = tmp.path().join("constant");
    let path = run_dir(&exp, 0, 0).join(SUMMARY_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let (head, row) = text.split_once('\n').unwrap();
    fs::write(&path, format!("{head}\n{}", row.replacen('1', "2", 1))).unwrap();
    let e = format!("{:#}", analyze(&exp, 0.5).unwrap_err());
    assert!(e.contains("schema version"), "{e}");

    fs::remove_file(run_dir(&exp, 0, 1).join(SUMMARY_FILE)).unwrap();
    fs::write(&path, text).unwrap();
    let e = format!("{:#}", analyze(&exp, 0.5).unwrap_err());
    assert!(e.contains("cell 0 seed 1"), "{e}");
}

#[test]
fn tampered_trace_fails_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = parse_config_str(&config(CONSTANT_RUN), &out(tmp.path())).unwrap();
    run_experiment(&cfg, 1).unwrap();
    let exp = tmp.path().join("constant");
    let path = run_dir(&exp, 0, 0).join(TRACE_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let kept = [&lines[..lines.len() - 2], &lines[lines.len() - 1..]].concat();
    fs::write(&path, kept.join("\n") + "\n").unwrap();
    assert!(analyze(&exp, 0.5).is_err());
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_collusion"))
}

#[test]
fn solve_all_or_nothing_prices_at_the_higher_cost() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("aon.toml");
    fs::write(
        &path,
        r#"
[game]
costs = [0.2, 0.5]
price_interval = [0.0, 1.0]
demand = { kind = "all_or_nothing", total = 1.0 }
"#,
    )
    .unwrap();
    let out = binary()
        .args(["solve", "--config"])
        .arg(&path)
        .args(["--discrete-check", "21", "--diagnostics"])
        .output()
        .unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        out.status.success(),
        "{stdout}{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stdout.contains("Nash      prices [0.5, 0.5]"), "{stdout}");
    assert!(
        stdout.contains("not applicable to all_or_nothing"),
        "{stdout}"
    );
}

#[test]
fn solve_reports_logit_benchmarks_and_gradient_ascent() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("logit.toml");
    fs::write(&path, GAME).unwrap();
    let out = binary()
        .args(["solve", "--config"])
        .arg(&path)
        .args(["--gradient", "0.01"])
        .output()
        .unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success());
    assert!(stdout.contains("1.47292666"), "{stdout}");
    assert!(stdout.contains("1.92498091"), "{stdout}");
    assert!(stdout.contains("gradient ascent (step 0.01)"), "{stdout}");
}

#[test]
fn binary_runs_simulate_probe_and_analyze() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.toml");
    fs::write(&path, config(CONSTANT_RUN)).unwrap();
    let root = tmp.path().join("runs");

    let sweep = binary()
        .args(["sweep", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(!sweep.status.success());
    assert!(String::from_utf8_lossy(&sweep.stderr).contains("no [[sweep]]"));

    let sim = binary()
        .args(["simulate", "--workers", "1", "--config"])
        .arg(&path)
        .env("COLLUSION_OUT", &root)
        .output()
        .unwrap();
    assert!(
        sim.status.success(),
        "{}",
        String::from_utf8_lossy(&sim.stderr)
    );
    assert!(String::from_utf8_lossy(&sim.stdout).contains("converged 2 (100%)"));

    let exp = root.join("constant");
    let probe = binary()
        .arg("probe")
        .arg(run_dir(&exp, 0, 0))
        .args(["--length", "3", "--export"])
        .output()
        .unwrap();
    assert!(
        probe.status.success(),
        "{}",
        String::from_utf8_lossy(&probe.stderr)
    );
    assert!(run_dir(&exp, 0, 0).join("probe.csv").exists());

    let analyze = binary().arg("analyze").arg(&exp).output().unwrap();
    assert!(
        analyze.status.success(),
        "{}",
        String::from_utf8_lossy(&analyze.stderr)
    );
    assert!(String::from_utf8_lossy(&analyze.stdout).contains("2 verified"));

    let bad = binary()
        .args(["simulate", "--retention", "rarely", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert!(!bad.status.success());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = parse_config(&path, &Overrides::default()).unwrap();
            assert!(!cfg.cells().unwrap().is_empty());
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
