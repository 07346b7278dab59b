//! Pricing agents acting on grid indices under bandit feedback.
//!
//! Every agent exposes the same loop: [`Agent::select_action`] picks an index
//! for the current stage, [`Agent::update`] consumes the realized (possibly
//! noisy) own profit. Only the agent's own feedback is ever visible to it;
//! stateful Q-learners additionally see the state index derived from last
//! stage's joint prices.

mod bandit;
mod gradient;
mod qlearning;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::equilibrium::DiscreteGame;
use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

pub use bandit::{ucb_index, Exp3State, UcbState};
pub use gradient::{gradient_step, run_gradient_ascent, GradientRun};
pub use qlearning::QTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[serde(bound = "S: Scalar")]
pub enum ExplorationSchedule<S> {
    Constant {
        epsilon: S,
    },
    /// `epsilon_t = exp(-beta * t)`.
    Decay {
        beta: S,
    },
}

impl<S: Scalar> ExplorationSchedule<S> {
    pub fn epsilon_at(&self, t: u64) -> S {
        match self {
            ExplorationSchedule::Constant { epsilon } => *epsilon,
            ExplorationSchedule::Decay { beta } => {
                (-*beta * S::from_u64(t).expect("stage representable")).exp()
            }
        }
    }
}

/// Exploration probability at stage `t`.
pub fn epsilon_at<S: Scalar>(schedule: &ExplorationSchedule<S>, t: u64) -> S {
    schedule.epsilon_at(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateMode {
    Stateless,
    /// The joint action indices of all firms in the previous stage.
    #[default]
    LastJointPrices,
    /// Only this firm's own previous action.
    LastOwnPrice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QInit {
    Zeros,
    /// Discounted average payoff of each own price against uniformly random rivals.
    #[default]
    UniformOpponent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateMode {
    /// Only the visited state-action cell learns.
    #[default]
    Asynchronous,
    /// Every own action in the visited state learns from its counterfactual profit.
    Synchronous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[serde(bound = "S: Scalar")]
pub enum AgentSpec<S> {
    QLearning {
        learning_rate: S,
        discount: S,
        exploration: ExplorationSchedule<S>,
        #[serde(default)]
        state_mode: StateMode,
        #[serde(default)]
        q_init: QInit,
        #[serde(default)]
        update_mode: UpdateMode,
    },
    Exp3 {
        /// `None` resolves to `sqrt(ln m / (m T))` at initialization.
        #[serde(default)]
        step: Option<S>,
        floor: S,
    },
    Ucb {
        width: S,
    },
    /// Projected gradient ascent on continuous prices; not a grid agent.
    GradientAscent {
        step: S,
    },
    /// Always plays one grid index.
    Constant {
        action: usize,
    },
}

impl<S: Scalar> AgentSpec<S> {
    /// Q-learning with the customary replication defaults.
    pub fn q_learning_default() -> Self {
        AgentSpec::QLearning {
            learning_rate: S::lit(0.15),
            discount: S::lit(0.95),
            exploration: ExplorationSchedule::Decay { beta: S::lit(4e-6) },
            state_mode: StateMode::LastJointPrices,
            q_init: QInit::UniformOpponent,
            update_mode: UpdateMode::Asynchronous,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AgentSpec::QLearning { .. } => "q_learning",
            AgentSpec::Exp3 { .. } => "exp3",
            AgentSpec::Ucb { .. } => "ucb",
            AgentSpec::GradientAscent { .. } => "gradient_ascent",
            AgentSpec::Constant { .. } => "constant",
        }
    }

    /// Range checks; messages name the offending key and its bound.
    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: S| x >= S::zero() && x <= S::one();
        match self {
            AgentSpec::QLearning {
                learning_rate,
                discount,
                exploration,
                ..
            } => {
                if !(*learning_rate > S::zero() && *learning_rate <= S::one()) {
                    return invalid(format!(
                        "learning_rate must be in (0, 1], got {learning_rate}"
                    ));
                }
                if !(*discount >= S::zero() && *discount < S::one()) {
                    return invalid(format!("discount must be in [0, 1), got {discount}"));
                }
                match exploration {
                    ExplorationSchedule::Constant { epsilon } if !in_unit(*epsilon) => invalid(
                        format!("exploration.epsilon must be in [0, 1], got {epsilon}"),
                    ),
                    ExplorationSchedule::Decay { beta }
                        if !(*beta > S::zero() && beta.is_finite()) =>
                    {
                        invalid(format!("exploration.beta must be > 0, got {beta}"))
                    }
                    _ => Ok(()),
                }
            }
            AgentSpec::Exp3 { step, floor } => {
                if let Some(eta) = step {
                    if !(*eta > S::zero() && eta.is_finite()) {
                        return invalid(format!("step must be > 0, got {eta}"));
                    }
                }
                if !(*floor >= S::zero() && *floor < S::one()) {
                    return invalid(format!("floor must be in [0, 1), got {floor}"));
                }
                Ok(())
            }
            AgentSpec::Ucb { width } => {
                if !(*width > S::zero() && width.is_finite()) {
                    return invalid(format!("width must be > 0, got {width}"));
                }
                Ok(())
            }
            AgentSpec::GradientAscent { step } => {
                if !(*step > S::zero() && step.is_finite()) {
                    return invalid(format!("step must be > 0, got {step}"));
                }
                Ok(())
            }
            AgentSpec::Constant { .. } => Ok(()),
        }
    }
}

/// Maps last stage's joint actions to a Q-table row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateEncoder {
    pub mode: StateMode,
    pub firm: usize,
    pub firms: usize,
    pub actions: usize,
}

impl StateEncoder {
    pub fn states(&self) -> usize {
        match self.mode {
            StateMode::Stateless => 1,
            StateMode::LastOwnPrice => self.actions,
            StateMode::LastJointPrices => self.actions.pow(self.firms as u32),
        }
    }

    pub fn encode(&self, joint: &[usize]) -> usize {
        match self.mode {
            StateMode::Stateless => 0,
            StateMode::LastOwnPrice => joint[self.firm],
            StateMode::LastJointPrices => joint.iter().fold(0, |acc, a| acc * self.actions + a),
        }
    }
}

/// Feedback delivered to one agent after a stage.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a, S> {
    /// Encoded state in which the action was chosen.
    pub state: usize,
    pub action: usize,
    /// Observed own profit; noisy when the run adds observation noise.
    pub profit: S,
    pub next_state: usize,
    pub t: u64,
    /// Per own action: profit had that action been played, and the resulting
    /// next state. Supplied only to synchronous Q-learners.
    pub counterfactual: Option<&'a [(S, usize)]>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AgentState<S> {
    QLearning(QTable<S>),
    Exp3(Exp3State<S>),
    Ucb(UcbState<S>),
    Constant { action: usize },
}

/// A grid agent: its spec, its learning state and where it sits in the game.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent<S> {
    spec: AgentSpec<S>,
    state: AgentState<S>,
    encoder: StateEncoder,
}

/// Builds the initial learning state of firm `firm` in the discretized game.
///
/// `horizon` only matters for Exp3's tuned step size.
pub fn init_agent<S: Scalar>(
    spec: &AgentSpec<S>,
    game: &DiscreteGame<S>,
    firm: usize,
    horizon: u64,
) -> Result<Agent<S>> {
    spec.validate()?;
    if firm >= game.n() {
        return invalid(format!(
            "firm index {firm} out of range for {} players",
            game.n()
        ));
    }
    let m = game.action_counts()[firm];
    if m == 0 {
        return invalid("empty action set");
    }
    let mode = match spec {
        AgentSpec::QLearning { state_mode, .. } => *state_mode,
        _ => StateMode::Stateless,
    };
    let encoder = StateEncoder {
        mode,
        firm,
        firms: game.n(),
        actions: m,
    };
    if mode == StateMode::LastJointPrices && game.action_counts().iter().any(|c| *c != m) {
        return invalid("joint-price states need equal action counts for all firms");
    }
    let state = match spec {
        AgentSpec::QLearning {
            discount, q_init, ..
        } => AgentState::QLearning(QTable::init(
            game,
            firm,
            encoder.states(),
            *discount,
            *q_init,
        )),
        AgentSpec::Exp3 { step, floor } => {
            let eta = step.unwrap_or_else(|| tuned_exp3_step(m, horizon));
            let (lo, hi) = game.payoff_range(firm);
            AgentState::Exp3(Exp3State::new(m, eta, *floor, lo.min(S::zero()), hi))
        }
        AgentSpec::Ucb { .. } => AgentState::Ucb(UcbState::new(m)),
        AgentSpec::Constant { action } => {
            if *action >= m {
                return invalid(format!(
                    "constant action {action} outside grid of {m} points"
                ));
            }
            AgentState::Constant { action: *action }
        }
        AgentSpec::GradientAscent { .. } => {
            return Err(Error::InvalidInput(
                "gradient_ascent agents act on continuous prices; use run_gradient_ascent".into(),
            ))
        }
    };
    Ok(Agent {
        spec: spec.clone(),
        state,
        encoder,
    })
}

/// `sqrt(ln m / (m T))`.
pub fn tuned_exp3_step<S: Scalar>(m: usize, horizon: u64) -> S {
    let m = m.max(2) as f64;
    let t = horizon.max(1) as f64;
    S::lit(((m.ln()) / (m * t)).sqrt())
}

/// Index of a maximal entry, uniformly random among ties.
pub(crate) fn argmax_random<S: Scalar, R: Rng + ?Sized>(values: &[S], rng: &mut R) -> usize {
    let best = values.iter().copied().fold(S::neg_infinity(), S::max);
    let ties = values.iter().filter(|v| **v == best).count();
    if ties <= 1 {
        return values.iter().position(|v| *v == best).unwrap_or(0);
    }
    let pick = rng.random_range(0..ties);
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v == best)
        .nth(pick)
        .map(|(k, _)| k)
        .expect("tie index in range")
}

/// Index of a maximal entry, lowest index among ties.
pub(crate) fn argmax_lowest<S: Scalar>(values: &[S]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    best
}

impl<S: Scalar> Agent<S> {
    pub fn spec(&self) -> &AgentSpec<S> {
        &self.spec
    }

    pub fn state(&self) -> &AgentState<S> {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut AgentState<S> {
        &mut self.state
    }

    pub fn encoder(&self) -> &StateEncoder {
        &self.encoder
    }

    pub fn actions(&self) -> usize {
        self.encoder.actions
    }

    pub fn needs_counterfactuals(&self) -> bool {
        matches!(
            self.spec,
            AgentSpec::QLearning {
                update_mode: UpdateMode::Synchronous,
                ..
            }
        )
    }

    /// Chooses this stage's action. `state` is the encoded environment state.
    pub fn select_action<R: Rng + ?Sized>(&self, state: usize, t: u64, rng: &mut R) -> usize {
        match (&self.spec, &self.state) {
            (AgentSpec::QLearning { exploration, .. }, AgentState::QLearning(q)) => {
                let eps = exploration.epsilon_at(t);
                if S::lit(rng.random::<f64>()) < eps {
                    rng.random_range(0..q.actions())
                } else {
                    argmax_random(q.row(state), rng)
                }
            }
            (_, AgentState::Exp3(e)) => e.sample(rng),
            (AgentSpec::Ucb { width }, AgentState::Ucb(u)) => u.select(*width, t, rng),
            (_, AgentState::Constant { action }) => *action,
            _ => unreachable!("agent state always matches its spec"),
        }
    }

    /// Exploration-free action with ties to the lowest index.
    pub fn greedy_action(&self, state: usize) -> usize {
        match &self.state {
            AgentState::QLearning(q) => q.greedy(state),
            AgentState::Exp3(e) => argmax_lowest(e.log_weights()),
            AgentState::Ucb(u) => argmax_lowest(u.means()),
            AgentState::Constant { action } => *action,
        }
    }

    /// Learns from `obs`. Returns true when the greedy policy changed.
    pub fn update(&mut self, obs: &Observation<'_, S>) -> bool {
        match (&self.spec, &mut self.state) {
            (
                AgentSpec::QLearning {
                    learning_rate,
                    discount,
                    ..
                },
                AgentState::QLearning(q),
            ) => q.learn(*learning_rate, *discount, obs),
            (_, AgentState::Exp3(e)) => {
                let before = argmax_lowest(e.log_weights());
                e.learn(obs.action, obs.profit);
                before != argmax_lowest(e.log_weights())
            }
            (_, AgentState::Ucb(u)) => {
                let before = argmax_lowest(u.means());
                u.learn(obs.action, obs.profit);
                before != argmax_lowest(u.means())
            }
            (_, AgentState::Constant { .. }) => false,
            _ => unreachable!("agent state always matches its spec"),
        }
    }

    /// Rewards clamped into Exp3's scaling bounds so far.
    pub fn clamped_rewards(&self) -> u64 {
        match &self.state {
            AgentState::Exp3(e) => e.clamped(),
            _ => 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::classic::prisoners_dilemma;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn epsilon_schedules() {
        let decay = ExplorationSchedule::Decay { beta: 3.0f64 };
        assert_eq!(epsilon_at(&decay, 0), 1.0);
        let half = ExplorationSchedule::Decay { beta: 2f64.ln() };
        assert!((epsilon_at(&half, 1) - 0.5).abs() < 1e-15);
        let c = ExplorationSchedule::Constant { epsilon: 0.2f64 };
        assert_eq!(epsilon_at(&c, 0), 0.2);
        assert_eq!(epsilon_at(&c, 1_000_000), 0.2);
    }

    #[test]
    fn validation_names_keys() {
        let bad = AgentSpec::QLearning {
            learning_rate: 1.5f64,
            discount: 0.9,
            exploration: ExplorationSchedule::Constant { epsilon: 0.1 },
            state_mode: StateMode::Stateless,
            q_init: QInit::Zeros,
            update_mode: UpdateMode::Asynchronous,
        };
        let msg = bad.validate().unwrap_err().to_string();
        assert!(msg.contains("learning_rate"), "{msg}");
        assert!(AgentSpec::Exp3 {
            step: None,
            floor: 1.0f64
        }
        .validate()
        .is_err());
        assert!(AgentSpec::Ucb { width: 0.0f64 }.validate().is_err());
    }

    #[test]
    fn state_encoding() {
        let enc = StateEncoder {
            mode: StateMode::LastJointPrices,
            firm: 1,
            firms: 2,
            actions: 15,
        };
        assert_eq!(enc.states(), 225);
        assert_eq!(enc.encode(&[3, 7]), 3 * 15 + 7);
        let own = StateEncoder {
            mode: StateMode::LastOwnPrice,
            ..enc
        };
        assert_eq!(own.encode(&[3, 7]), 7);
    }

    #[test]
    fn exploration_one_is_uniform() {
        let pd = prisoners_dilemma::<f64>();
        let spec = AgentSpec::QLearning {
            learning_rate: 0.5,
            discount: 0.0,
            exploration: ExplorationSchedule::Constant { epsilon: 1.0 },
            state_mode: StateMode::Stateless,
            q_init: QInit::Zeros,
            update_mode: UpdateMode::Asynchronous,
        };
        let mut agent = init_agent(&spec, &pd, 0, 10).unwrap();
        if let AgentState::QLearning(q) = agent.state_mut() {
            q.set(0, 1, 100.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let picks = (0..20_000)
            .filter(|_| agent.select_action(0, 1, &mut rng) == 0)
            .count();
        assert!((picks as f64 / 20_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn greedy_tie_break_is_random_but_reproducible() {
        let pd = prisoners_dilemma::<f64>();
        let spec = AgentSpec::QLearning {
            learning_rate: 0.5,
            discount: 0.0,
            exploration: ExplorationSchedule::Constant { epsilon: 0.0 },
            state_mode: StateMode::Stateless,
            q_init: QInit::Zeros,
            update_mode: UpdateMode::Asynchronous,
        };
        let agent = init_agent(&spec, &pd, 0, 10).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64)
                .map(|_| agent.select_action(0, 1, &mut rng))
                .collect::<Vec<_>>()
        };
        let a = draw(5);
        assert_eq!(a, draw(5));
        assert!(a.contains(&0) && a.contains(&1));
        assert_eq!(agent.greedy_action(0), 0);
    }

    #[test]
    fn gradient_spec_is_not_a_grid_agent() {
        let pd = prisoners_dilemma::<f64>();
        assert!(init_agent(&AgentSpec::GradientAscent { step: 0.1 }, &pd, 0, 1).is_err());
        assert!(init_agent(&AgentSpec::Constant { action: 2 }, &pd, 0, 1).is_err());
    }
}
