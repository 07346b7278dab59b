//! The repeated stage game.
//!
//! Each stage every agent picks an action from its own random stream, the
//! payoff tensor is read once, and each agent learns from its own (optionally
//! noisy) profit. Stateful agents see the joint action vector just played as
//! the next state. Per-agent streams make a stage independent of the order in
//! which agents are polled.

mod metrics;
mod probe;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::agents::{init_agent, Agent, AgentSpec, Observation};
use crate::equilibrium::{discretize, DiscreteGame};
use crate::error::{invalid, Error, Result};
use crate::market::{ActionGrid, MarketGame};
use crate::scalar::Scalar;
use crate::seeding::mix_seed;

pub use metrics::{
    collusion_index, compute_regret, empirical_joint_distribution, regret_checkpoints,
    replay_metrics, EpisodeMetrics, MetricsAccumulator, RunSummary, DEFAULT_TAIL_CAP,
};
pub use probe::{deviation_probe, ProbeResult};

/// Stage game the agents play: a payoff tensor plus the price attached to
/// every action index.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment<S> {
    game: DiscreteGame<S>,
    action_values: Vec<Vec<S>>,
    market: Option<(MarketGame<S>, ActionGrid<S>)>,
}

impl<S: Scalar> Environment<S> {
    /// Discretizes `game` on `grid`; stage profits are read from the tensor,
    /// which holds exact market payoff evaluations.
    pub fn from_market(game: MarketGame<S>, grid: ActionGrid<S>, cap: usize) -> Result<Self> {
        let tensor = discretize(&game, &grid, cap)?;
        Ok(Environment {
            action_values: vec![grid.points().to_vec(); game.n()],
            game: tensor,
            market: Some((game, grid)),
        })
    }

    /// A plain normal-form game; the "price" of action `k` is `k`.
    pub fn from_discrete(game: DiscreteGame<S>) -> Self {
        let action_values = game
            .action_counts()
            .iter()
            .map(|m| (0..*m).map(S::from_count).collect())
            .collect();
        Environment {
            game,
            action_values,
            market: None,
        }
    }

    pub fn n(&self) -> usize {
        self.game.n()
    }

    pub fn tensor(&self) -> &DiscreteGame<S> {
        &self.game
    }

    pub fn market(&self) -> Option<&MarketGame<S>> {
        self.market.as_ref().map(|(g, _)| g)
    }

    pub fn grid(&self) -> Option<&ActionGrid<S>> {
        self.market.as_ref().map(|(_, g)| g)
    }

    pub fn price(&self, firm: usize, action: usize) -> S {
        self.action_values[firm][action]
    }

    pub fn actions(&self, firm: usize) -> usize {
        self.game.action_counts()[firm]
    }

    /// Lowest-index static best response of `firm` to the others in `joint`.
    pub fn best_response(&self, firm: usize, joint: &[usize]) -> usize {
        let k = self.game.index_of(joint);
        let mut best = 0;
        let mut value = S::neg_infinity();
        for a in 0..self.actions(firm) {
            let u = self.game.payoff(self.game.deviate(k, firm, a), firm);
            if u > value {
                value = u;
                best = a;
            }
        }
        best
    }
}

#[derive(Debug, Clone)]
pub struct SimConfig<S> {
    pub environment: Arc<Environment<S>>,
    pub agents: Vec<AgentSpec<S>>,
    pub horizon: u64,
    /// Stages with an unchanged greedy policy that count as convergence; 0 disables.
    pub convergence_window: u64,
    /// Stages averaged for tail prices; `None` uses min(10^4, 10% of the run).
    pub tail_window: Option<u64>,
    /// Standard deviation of Gaussian noise on observed profits.
    pub noise_sd: S,
    pub seed: u64,
}

impl<S: Scalar> SimConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if self.agents.len() != self.environment.n() {
            return Err(Error::DimensionMismatch {
                what: "agents (one per firm)",
                expected: self.environment.n(),
                actual: self.agents.len(),
            });
        }
        if self.convergence_window > self.horizon {
            return invalid(format!(
                "convergence_window ({}) must not exceed horizon ({})",
                self.convergence_window, self.horizon
            ));
        }
        if !(self.noise_sd >= S::zero() && self.noise_sd.is_finite()) {
            return invalid(format!("noise_sd must be >= 0, got {}", self.noise_sd));
        }
        if self.tail_window == Some(0) {
            return invalid("tail_window must be >= 1");
        }
        self.agents.iter().try_for_each(AgentSpec::validate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct StageRecord<S> {
    pub t: u64,
    pub actions: Vec<usize>,
    pub prices: Vec<S>,
    pub profits_true: Vec<S>,
    pub profits_observed: Vec<S>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    Converged { at: u64 },
    Horizon,
}

impl Termination {
    pub fn converged_at(&self) -> Option<u64> {
        match self {
            Termination::Converged { at } => Some(*at),
            Termination::Horizon => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace<S> {
    pub records: Vec<StageRecord<S>>,
    pub termination: Termination,
}

/// Random streams of one episode: per firm one for action selection and one
/// for observation noise.
#[derive(Debug, Clone)]
pub struct StageRngs {
    select: Vec<ChaCha8Rng>,
    noise: Vec<ChaCha8Rng>,
}

impl StageRngs {
    pub fn new(seed: u64, firms: usize) -> Self {
        let stream =
            |tag: u64, i: usize| ChaCha8Rng::seed_from_u64(mix_seed(&[seed, tag, i as u64]));
        StageRngs {
            select: (0..firms).map(|i| stream(1, i)).collect(),
            noise: (0..firms).map(|i| stream(2, i)).collect(),
        }
    }
}

/// Everything an episode leaves behind besides its records.
#[derive(Debug, Clone)]
pub struct EpisodeOutcome<S> {
    pub stages: u64,
    pub termination: Termination,
    pub agents: Vec<Agent<S>>,
    /// Joint action of the last stage played (the initial state if none).
    pub last_joint: Vec<usize>,
    pub metrics: EpisodeMetrics<S>,
    pub clamped_rewards: Vec<u64>,
}

/// Plays one stage. `joint` holds the previous joint action on entry and
/// this stage's on return; agents learn in place.
pub fn run_stage<S: Scalar>(
    env: &Environment<S>,
    agents: &mut [Agent<S>],
    rngs: &mut StageRngs,
    joint: &mut Vec<usize>,
    t: u64,
    noise_sd: S,
) -> (StageRecord<S>, bool) {
    let order: Vec<usize> = (0..agents.len()).collect();
    run_stage_in_order(env, agents, rngs, joint, t, noise_sd, &order)
}

fn run_stage_in_order<S: Scalar>(
    env: &Environment<S>,
    agents: &mut [Agent<S>],
    rngs: &mut StageRngs,
    joint: &mut Vec<usize>,
    t: u64,
    noise_sd: S,
    order: &[usize],
) -> (StageRecord<S>, bool) {
    let n = agents.len();
    let states: Vec<usize> = agents.iter().map(|a| a.encoder().encode(joint)).collect();
    let mut actions = vec![0; n];
    for &i in order {
        actions[i] = agents[i].select_action(states[i], t, &mut rngs.select[i]);
    }

    let tensor = env.tensor();
    let k = tensor.index_of(&actions);
    let profits_true = tensor.payoffs_at(k).to_vec();
    let prices: Vec<S> = (0..n).map(|i| env.price(i, actions[i])).collect();
    let mut profits_observed = profits_true.clone();
    if noise_sd > S::zero() {
        let normal = Normal::new(0.0, noise_sd.to_f64_lossy()).expect("validated noise sd");
        for &i in order {
            let eps: f64 = normal.sample(&mut rngs.noise[i]);
            profits_observed[i] = profits_observed[i] + S::lit(eps);
        }
    }

    let mut changed = false;
    for &i in order {
        let agent = &mut agents[i];
        let encoder = *agent.encoder();
        let counterfactual: Option<Vec<(S, usize)>> = agent.needs_counterfactuals().then(|| {
            let mut alt = actions.clone();
            (0..env.actions(i))
                .map(|a| {
                    alt[i] = a;
                    (
                        tensor.payoff(tensor.deviate(k, i, a), i),
                        encoder.encode(&alt),
                    )
                })
                .collect()
        });
        let obs = Observation {
            state: states[i],
            action: actions[i],
            profit: profits_observed[i],
            next_state: encoder.encode(&actions),
            t,
            counterfactual: counterfactual.as_deref(),
        };
        changed |= agent.update(&obs);
    }

    joint.clone_from(&actions);
    (
        StageRecord {
            t,
            actions,
            prices,
            profits_true,
            profits_observed,
        },
        changed,
    )
}

/// Runs an episode, handing every stage record to `sink` as it is produced.
pub fn run_episode_with<S: Scalar>(
    cfg: &SimConfig<S>,
    mut sink: impl FnMut(&StageRecord<S>),
) -> Result<EpisodeOutcome<S>> {
    cfg.validate()?;
    let env = cfg.environment.as_ref();
    let n = env.n();
    let mut agents = cfg
        .agents
        .iter()
        .enumerate()
        .map(|(i, spec)| init_agent(spec, env.tensor(), i, cfg.horizon))
        .collect::<Result<Vec<_>>>()?;

    let mut init_rng = ChaCha8Rng::seed_from_u64(mix_seed(&[cfg.seed, 0]));
    let mut joint: Vec<usize> = (0..n)
        .map(|i| init_rng.random_range(0..env.actions(i)))
        .collect();
    let mut rngs = StageRngs::new(cfg.seed, n);
    let mut metrics = MetricsAccumulator::new(env, cfg.tail_window);

    let mut stable = 0u64;
    let mut termination = Termination::Horizon;
    let mut stages = 0;
    for t in 1..=cfg.horizon {
        let (record, changed) = run_stage(env, &mut agents, &mut rngs, &mut joint, t, cfg.noise_sd);
        metrics.observe(&record);
        sink(&record);
        stages = t;
        stable = if changed { 0 } else { stable + 1 };
        if cfg.convergence_window > 0 && stable >= cfg.convergence_window {
            termination = Termination::Converged { at: t };
            break;
        }
    }
    Ok(EpisodeOutcome {
        stages,
        termination,
        clamped_rewards: agents.iter().map(Agent::clamped_rewards).collect(),
        agents,
        last_joint: joint,
        metrics: metrics.finish(),
    })
}

/// Runs an episode and keeps every stage record.
pub fn run_episode<S: Scalar>(cfg: &SimConfig<S>) -> Result<(Trace<S>, EpisodeOutcome<S>)> {
    let mut records = Vec::with_capacity(cfg.horizon.min(1 << 20) as usize);
    let outcome = run_episode_with(cfg, |r| records.push(r.clone()))?;
    Ok((
        Trace {
            records,
            termination: outcome.termination,
        },
        outcome,
    ))
}
