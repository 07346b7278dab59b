//! Experiment configuration: parsing, default filling, validation and sweep
//! expansion.
//!
//! A config is resolved once: every default is written into it, so the echo
//! written next to the artifacts reproduces the experiment on its own.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use collusion_core::equilibrium::DEFAULT_PROFILE_CAP;
use collusion_core::seeding::mix_seed;
use collusion_core::{AgentSpec, ExplorationSchedule, MarketGame, QInit, StateMode, UpdateMode};

pub const DEFAULT_OUTPUT: &str = "runs";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retention {
    All,
    SummariesOnly,
    /// Keep the trace of every k-th seed (seed indices 0, k, 2k, ...).
    EveryK(u64),
}

impl Retention {
    pub fn keeps_trace(&self, seed_index: usize) -> bool {
        match self {
            Retention::All => true,
            Retention::SummariesOnly => false,
            Retention::EveryK(k) => (seed_index as u64).is_multiple_of(*k),
        }
    }
}

impl fmt::Display for Retention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Retention::All => f.write_str("all"),
            Retention::SummariesOnly => f.write_str("summaries-only"),
            Retention::EveryK(k) => write!(f, "every-{k}"),
        }
    }
}

impl FromStr for Retention {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(Retention::All),
            "summaries-only" => Ok(Retention::SummariesOnly),
            _ => {
                let k = s
                    .strip_prefix("every-")
                    .and_then(|k| k.parse::<u64>().ok())
                    .filter(|k| *k >= 1)
                    .ok_or_else(|| anyhow!("retention must be all, summaries-only or every-<k> with k >= 1, got {s:?}"))?;
                Ok(Retention::EveryK(k))
            }
        }
    }
}

impl TryFrom<String> for Retention {
    type Error = anyhow::Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Retention> for String {
    fn from(r: Retention) -> String {
        r.to_string()
    }
}

impl Serialize for Retention {
    fn serialize<Ser: serde::Serializer>(
        &self,
        s: Ser,
    ) -> std::result::Result<Ser::Ok, Ser::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Retention {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retention: Option<Retention>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            name: default_name(),
            output: None,
            retention: None,
        }
    }
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "bounds", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridConfig {
    /// Spans the Nash and monopoly benchmarks, widened by `extension` of their gap on each side.
    Equilibria {
        #[serde(default = "default_points")]
        points: usize,
        #[serde(default = "default_extension")]
        extension: f64,
    },
    /// Spans the game's price interval.
    Interval {
        #[serde(default = "default_points")]
        points: usize,
    },
    Explicit {
        #[serde(default = "default_points")]
        points: usize,
        lower: f64,
        upper: f64,
    },
}

fn default_points() -> usize {
    15
}

fn default_extension() -> f64 {
    0.1
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig::Equilibria {
            points: default_points(),
            extension: default_extension(),
        }
    }
}

impl GridConfig {
    pub fn points(&self) -> usize {
        match self {
            GridConfig::Equilibria { points, .. }
            | GridConfig::Interval { points }
            | GridConfig::Explicit { points, .. } => *points,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exp3Step {
    Tuned,
    Fixed(f64),
}

impl Serialize for Exp3Step {
    fn serialize<Ser: serde::Serializer>(
        &self,
        s: Ser,
    ) -> std::result::Result<Ser::Ok, Ser::Error> {
        match self {
            Exp3Step::Tuned => s.serialize_str("tuned"),
            Exp3Step::Fixed(x) => s.serialize_f64(*x),
        }
    }
}

impl<'de> Deserialize<'de> for Exp3Step {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            Number(f64),
        }
        match Raw::deserialize(d)? {
            Raw::Word(w) if w == "tuned" => Ok(Exp3Step::Tuned),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "step must be a number or \"tuned\", got {w:?}"
            ))),
            Raw::Number(x) => Ok(Exp3Step::Fixed(x)),
        }
    }
}

fn default_learning_rate() -> f64 {
    0.15
}
fn default_discount() -> f64 {
    0.95
}
fn default_exploration() -> ExplorationSchedule<f64> {
    ExplorationSchedule::Decay { beta: 4e-6 }
}
fn default_exp3_step() -> Exp3Step {
    Exp3Step::Tuned
}
fn default_floor() -> f64 {
    0.05
}

/// Agent entry of a config file; omitted hyperparameters take the
/// replication defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentConfig {
    QLearning {
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
        #[serde(default = "default_discount")]
        discount: f64,
        #[serde(default = "default_exploration")]
        exploration: ExplorationSchedule<f64>,
        #[serde(default)]
        state_mode: StateMode,
        #[serde(default)]
        q_init: QInit,
        #[serde(default)]
        update_mode: UpdateMode,
    },
    Exp3 {
        #[serde(default = "default_exp3_step")]
        step: Exp3Step,
        #[serde(default = "default_floor")]
        floor: f64,
    },
    Ucb {
        width: f64,
    },
    GradientAscent {
        step: f64,
    },
    Constant {
        action: usize,
    },
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig::QLearning {
            learning_rate: default_learning_rate(),
            discount: default_discount(),
            exploration: default_exploration(),
            state_mode: StateMode::default(),
            q_init: QInit::default(),
            update_mode: UpdateMode::default(),
        }
    }
}

impl AgentConfig {
    pub fn to_spec(&self) -> AgentSpec<f64> {
        match *self {
            AgentConfig::QLearning {
                learning_rate,
                discount,
                exploration,
                state_mode,
                q_init,
                update_mode,
            } => AgentSpec::QLearning {
                learning_rate,
                discount,
                exploration,
                state_mode,
                q_init,
                update_mode,
            },
            AgentConfig::Exp3 { step, floor } => AgentSpec::Exp3 {
                step: match step {
                    Exp3Step::Tuned => None,
                    Exp3Step::Fixed(x) => Some(x),
                },
                floor,
            },
            AgentConfig::Ucb { width } => AgentSpec::Ucb { width },
            AgentConfig::GradientAscent { step } => AgentSpec::GradientAscent { step },
            AgentConfig::Constant { action } => AgentSpec::Constant { action },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailWindow {
    /// min(10^4, 10% of the stages played).
    Auto,
    Stages(u64),
}

impl TailWindow {
    pub fn as_option(self) -> Option<u64> {
        match self {
            TailWindow::Auto => None,
            TailWindow::Stages(k) => Some(k),
        }
    }
}

impl Serialize for TailWindow {
    fn serialize<Ser: serde::Serializer>(
        &self,
        s: Ser,
    ) -> std::result::Result<Ser::Ok, Ser::Error> {
        match self {
            TailWindow::Auto => s.serialize_str("auto"),
            TailWindow::Stages(k) => s.serialize_u64(*k),
        }
    }
}

impl<'de> Deserialize<'de> for TailWindow {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Word(String),
            Number(u64),
        }
        match Raw::deserialize(d)? {
            Raw::Word(w) if w == "auto" => Ok(TailWindow::Auto),
            Raw::Word(w) => Err(serde::de::Error::custom(format!(
                "tail_window must be an integer or \"auto\", got {w:?}"
            ))),
            Raw::Number(k) => Ok(TailWindow::Stages(k)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_window")]
    pub convergence_window: u64,
    #[serde(default = "default_tail")]
    pub tail_window: TailWindow,
    #[serde(default)]
    pub noise_sd: f64,
}

fn default_horizon() -> u64 {
    2_000_000
}
fn default_window() -> u64 {
    100_000
}
fn default_tail() -> TailWindow {
    TailWindow::Auto
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            horizon: default_horizon(),
            convergence_window: default_window(),
            tail_window: TailWindow::Auto,
            noise_sd: 0.0,
        }
    }
}

/// Either `base` and `count`, or an explicit `list`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub list: Option<Vec<u64>>,
}

impl SeedSpec {
    pub fn len(&self) -> usize {
        match &self.list {
            Some(list) => list.len(),
            None => self.count.unwrap_or(1) as usize,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Seed of run `seed_index` in `cell`: (base or listed seed, cell, index)
    /// mixed through SplitMix64.
    pub fn run_seed(&self, cell: usize, seed_index: usize) -> u64 {
        let root = match &self.list {
            Some(list) => list[seed_index],
            None => self.base.unwrap_or(0),
        };
        mix_seed(&[root, cell as u64, seed_index as u64])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the resolved config, e.g. `agent.learning_rate`;
    /// `*` addresses every element of an array.
    pub key: String,
    pub values: Vec<toml::Value>,
}

/// Restricts an experiment to one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSelector {
    pub cell: usize,
    pub seed_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: ExperimentSection,
    pub game: MarketGame<f64>,
    #[serde(default)]
    pub grid: GridConfig,
    /// One spec shared by every firm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agent: Option<AgentConfig>,
    /// One spec per firm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<Vec<AgentConfig>>,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub seeds: SeedSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sweep: Vec<SweepAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSelector>,
}

/// Command-line settings that take part in resolution.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    /// `--out`; wins over the config file.
    pub out: Option<PathBuf>,
    /// Environment default; loses to the config file.
    pub out_env: Option<PathBuf>,
    pub retention: Option<Retention>,
    /// Replaces the base seed, or the seed list by a single seed.
    pub seed: Option<u64>,
}

pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    parse_config_str(&text, overrides).with_context(|| format!("in config {}", path.display()))
}

pub fn parse_config_str(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| anyhow!("{}", e.to_string().trim_end()))?;
    cfg.resolve(overrides)
}

impl ExperimentConfig {
    /// Fills every default, applies command-line overrides and validates.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self> {
        let e = &mut self.experiment;
        e.output = Some(
            o.out
                .clone()
                .or_else(|| e.output.clone())
                .or_else(|| o.out_env.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
        );
        let sweep_default = if self.sweep.is_empty() {
            Retention::All
        } else {
            Retention::SummariesOnly
        };
        e.retention = Some(o.retention.or(e.retention).unwrap_or(sweep_default));

        if self.agent.is_none() && self.agents.is_none() {
            self.agent = Some(AgentConfig::default());
        }

        let s = &mut self.seeds;
        match (s.list.is_some(), o.seed) {
            (true, Some(seed)) => s.list = Some(vec![seed]),
            (true, None) => {}
            (false, seed) => {
                s.base = Some(seed.or(s.base).unwrap_or(0));
                s.count = Some(s.count.unwrap_or(1));
            }
        }
        self.validate()?;
        Ok(self)
    }

    pub fn output(&self) -> &Path {
        self.experiment
            .output
            .as_deref()
            .unwrap_or(Path::new(DEFAULT_OUTPUT))
    }

    pub fn retention(&self) -> Retention {
        self.experiment.retention.unwrap_or(Retention::All)
    }

    pub fn experiment_dir(&self) -> PathBuf {
        self.output().join(&self.experiment.name)
    }

    /// Agent specs, one per firm.
    pub fn agent_specs(&self) -> Vec<AgentSpec<f64>> {
        match (&self.agent, &self.agents) {
            (_, Some(list)) => list.iter().map(AgentConfig::to_spec).collect(),
            (Some(one), None) => vec![one.to_spec(); self.game.n()],
            (None, None) => vec![AgentConfig::default().to_spec(); self.game.n()],
        }
    }

    fn validate(&self) -> Result<()> {
        let name = &self.experiment.name;
        ensure!(
            !name.is_empty() && !name.contains(['/', '\\']) && name != "." && name != "..",
            "experiment.name must be a plain directory name, got {name:?}"
        );
        ensure!(
            !(self.agent.is_some() && self.agents.is_some()),
            "give either `agent` (shared by all firms) or `agents` (one per firm), not both"
        );
        let n = self.game.n();
        if let Some(list) = &self.agents {
            ensure!(
                list.len() == n,
                "agents has {} entries but the game has {n} firms (game.costs)",
                list.len()
            );
        }
        let points = self.grid.points();
        ensure!(points >= 2, "grid.points must be >= 2, got {points}");
        let profiles = (points as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        ensure!(
            profiles <= DEFAULT_PROFILE_CAP as u128,
            "grid.points^firms = {profiles} joint profiles exceeds the cap {DEFAULT_PROFILE_CAP}"
        );
        match self.grid {
            GridConfig::Equilibria { extension, .. } => {
                ensure!(
                    extension >= 0.0 && extension.is_finite(),
                    "grid.extension must be >= 0, got {extension}"
                )
            }
            GridConfig::Explicit { lower, upper, .. } => {
                ensure!(
                    lower < upper,
                    "grid.lower ({lower}) must be below grid.upper ({upper})"
                )
            }
            GridConfig::Interval { .. } => {}
        }
        for (i, spec) in self.agent_specs().iter().enumerate() {
            spec.validate()
                .with_context(|| format!("agent for firm {i}"))?;
            match spec {
                AgentSpec::GradientAscent { .. } => bail!(
                    "agent for firm {i}: gradient_ascent plays continuous prices and cannot join a grid simulation; use `collusion solve --gradient <step>`"
                ),
                AgentSpec::Constant { action } if *action >= points => {
                    bail!("agent for firm {i}: action {action} out of range for grid.points = {points}")
                }
                _ => {}
            }
        }

        let sim = &self.simulation;
        ensure!(
            sim.convergence_window <= sim.horizon,
            "simulation.convergence_window ({}) must not exceed simulation.horizon ({})",
            sim.convergence_window,
            sim.horizon
        );
        ensure!(
            sim.noise_sd >= 0.0 && sim.noise_sd.is_finite(),
            "simulation.noise_sd must be >= 0, got {}",
            sim.noise_sd
        );
        ensure!(
            sim.tail_window != TailWindow::Stages(0),
            "simulation.tail_window must be >= 1 or \"auto\""
        );

        let s = &self.seeds;
        if let Some(list) = &s.list {
            ensure!(
                s.base.is_none() && s.count.is_none(),
                "seeds: give either base/count or list, not both"
            );
            ensure!(!list.is_empty(), "seeds.list must not be empty");
        } else {
            ensure!(s.count.unwrap_or(1) >= 1, "seeds.count must be >= 1");
        }

        ensure!(
            self.sweep.len() <= 2,
            "sweep has {} axes; at most 2 are supported",
            self.sweep.len()
        );
        let base = self.base_table()?;
        for (a, axis) in self.sweep.iter().enumerate() {
            ensure!(
                !axis.values.is_empty(),
                "sweep axis {:?} has no values",
                axis.key
            );
            ensure!(
                !axis.key.starts_with("sweep")
                    && !axis.key.starts_with("run")
                    && !axis.key.starts_with("seeds"),
                "sweep key {:?} cannot address sweep, run or seeds",
                axis.key
            );
            ensure!(
                self.sweep[..a].iter().all(|b| b.key != axis.key),
                "sweep key {:?} appears twice",
                axis.key
            );
            let mut probe = base.clone();
            set_path(&mut probe, &axis.key, &axis.values[0])?;
        }

        if let Some(sel) = self.run {
            let cells = self.cell_count();
            ensure!(
                sel.cell < cells,
                "run.cell = {} but the experiment has {cells} cells",
                sel.cell
            );
            ensure!(
                sel.seed_index < s.len(),
                "run.seed_index = {} but the experiment has {} seeds",
                sel.seed_index,
                s.len()
            );
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.sweep.iter().map(|a| a.values.len()).product()
    }

    /// The config as a TOML table without sweep and run selector.
    fn base_table(&self) -> Result<toml::Value> {
        let mut base = self.clone();
        base.sweep.clear();
        base.run = None;
        toml::Value::try_from(&base).context("serializing config")
    }

    /// Expands the sweep into cells, in row-major order over the axes.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let base = self.base_table()?;
        let mut out = Vec::with_capacity(self.cell_count());
        for index in 0..self.cell_count() {
            let mut rem = index;
            let mut picks = vec![0; self.sweep.len()];
            for (a, axis) in self.sweep.iter().enumerate().rev() {
                picks[a] = rem % axis.values.len();
                rem /= axis.values.len();
            }
            let mut table = base.clone();
            let mut overrides = Vec::new();
            for (axis, pick) in self.sweep.iter().zip(picks) {
                let value = &axis.values[pick];
                set_path(&mut table, &axis.key, value)?;
                overrides.push((axis.key.clone(), value.clone()));
            }
            let config: ExperimentConfig = table.try_into().map_err(|e: toml::de::Error| {
                anyhow!("cell {index}: {}", e.to_string().trim_end())
            })?;
            config
                .validate()
                .with_context(|| format!("cell {index} ({})", describe_overrides(&overrides)))?;
            out.push(Cell {
                index,
                overrides,
                config,
            });
        }
        Ok(out)
    }

    /// The resolved config as TOML text.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).context("serializing resolved config")
    }
}

/// One point of the sweep: the base config with the cell's overrides applied.
#[derive(Debug, Clone)]
pub struct Cell {
    pub index: usize,
    pub overrides: Vec<(String, toml::Value)>,
    pub config: ExperimentConfig,
}

pub fn describe_overrides(overrides: &[(String, toml::Value)]) -> String {
    if overrides.is_empty() {
        return "base".into();
    }
    overrides
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn set_path(root: &mut toml::Value, path: &str, value: &toml::Value) -> Result<()> {
    let parts: Vec<&str> = path.split('.').collect();
    ensure!(
        parts.iter().all(|p| !p.is_empty()),
        "malformed sweep key {path:?}"
    );
    set_parts(root, &parts, value).with_context(|| format!("sweep key {path:?}"))
}

fn set_parts(node: &mut toml::Value, parts: &[&str], value: &toml::Value) -> Result<()> {
    let (head, rest) = (parts[0], &parts[1..]);
    match node {
        toml::Value::Table(t) => {
            if !t.contains_key(head) {
                bail!(
                    "no key {head:?} (known: {})",
                    t.keys().cloned().collect::<Vec<_>>().join(", ")
                );
            }
            let child = t.get_mut(head).expect("checked above");
            if rest.is_empty() {
                *child = value.clone();
                Ok(())
            } else {
                set_parts(child, rest, value)
            }
        }
        toml::Value::Array(items) => {
            let targets: Vec<usize> = if head == "*" {
                (0..items.len()).collect()
            } else {
                let i: usize = head
                    .parse()
                    .map_err(|_| anyhow!("{head:?} is not an array index or *"))?;
                ensure!(
                    i < items.len(),
                    "index {i} out of range for an array of {}",
                    items.len()
                );
                vec![i]
            };
            for i in targets {
                if rest.is_empty() {
                    items[i] = value.clone();
                } else {
                    set_parts(&mut items[i], rest, value)?;
                }
            }
            Ok(())
        }
        _ => bail!("{head:?} addresses into a plain value"),
    }
}
