//! Impulse-response probe: one forced deviation after convergence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Environment, EpisodeOutcome, Termination};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ProbeResult<S> {
    /// Greedy prices played from the episode's final state without intervention.
    pub pre_deviation: Vec<S>,
    /// `paths[k][i]`: price of firm `i` at probe stage `k + 1`.
    pub paths: Vec<Vec<S>>,
    pub actions: Vec<Vec<usize>>,
    /// Grid index firm 0 was forced to at probe stage 1.
    pub deviation_action: usize,
}

/// Continues greedy play of the converged agents for `length` stages with
/// learning frozen; at the first stage firm 0 plays its static best response
/// to the others' greedy actions.
pub fn deviation_probe<S: Scalar>(
    outcome: &EpisodeOutcome<S>,
    env: &Environment<S>,
    length: usize,
) -> Result<ProbeResult<S>> {
    if !matches!(outcome.termination, Termination::Converged { .. }) {
        return Err(Error::ProbeUnavailable);
    }
    let agents = &outcome.agents;
    let greedy = |joint: &[usize]| -> Vec<usize> {
        agents
            .iter()
            .map(|a| a.greedy_action(a.encoder().encode(joint)))
            .collect()
    };
    let prices_of = |actions: &[usize]| -> Vec<S> {
        actions
            .iter()
            .enumerate()
            .map(|(i, a)| env.price(i, *a))
            .collect()
    };

    let pre_deviation = prices_of(&greedy(&outcome.last_joint));
    let mut joint = outcome.last_joint.clone();
    let mut paths = Vec::with_capacity(length);
    let mut actions = Vec::with_capacity(length);
    let mut deviation_action = 0;
    for stage in 0..length {
        let mut next = greedy(&joint);
        if stage == 0 {
            deviation_action = env.best_response(0, &next);
            next[0] = deviation_action;
        }
        paths.push(prices_of(&next));
        actions.push(next.clone());
        joint = next;
    }
    Ok(ProbeResult {
        pre_deviation,
        paths,
        actions,
        deviation_action,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::{AgentSpec, ExplorationSchedule, QInit, StateMode, UpdateMode};
    use crate::sim::tests::logit_env;
    use crate::sim::{run_episode, SimConfig};

    #[test]
    fn constant_agents_return_immediately() {
        let env = logit_env(7);
        let cfg = SimConfig {
            environment: env.clone(),
            agents: vec![
                AgentSpec::Constant { action: 6 },
                AgentSpec::Constant { action: 6 },
            ],
            horizon: 50,
            convergence_window: 5,
            tail_window: None,
            noise_sd: 0.0,
            seed: 1,
        };
        let (_, out) = run_episode(&cfg).unwrap();
        let probe = deviation_probe(&out, &env, 4).unwrap();
        let high = env.grid().unwrap().price(6);
        assert_eq!(probe.pre_deviation, vec![high, high]);
        assert!(probe.paths[0][0] < high);
        assert_eq!(probe.paths[0][1], high);
        for p in &probe.paths[1..] {
            assert_eq!(p, &vec![high, high]);
        }
    }

    #[test]
    fn stateless_agents_ignore_the_deviation() {
        let env = logit_env(7);
        let spec = AgentSpec::QLearning {
            learning_rate: 0.2,
            discount: 0.9,
            exploration: ExplorationSchedule::Decay { beta: 1e-3 },
            state_mode: StateMode::Stateless,
            q_init: QInit::UniformOpponent,
            update_mode: UpdateMode::Asynchronous,
        };
        let cfg = SimConfig {
            environment: env.clone(),
            agents: vec![spec.clone(), spec],
            horizon: 200_000,
            convergence_window: 1_000,
            tail_window: None,
            noise_sd: 0.0,
            seed: 3,
        };
        let (_, out) = run_episode(&cfg).unwrap();
        let probe = deviation_probe(&out, &env, 5).unwrap();
        for p in &probe.paths[1..] {
            assert_eq!(p, &probe.pre_deviation);
        }
    }

    #[test]
    fn unavailable_without_convergence() {
        let env = logit_env(5);
        let cfg = SimConfig {
            environment: env.clone(),
            agents: vec![AgentSpec::Ucb { width: 0.1 }, AgentSpec::Ucb { width: 0.1 }],
            horizon: 3,
            convergence_window: 0,
            tail_window: None,
            noise_sd: 0.0,
            seed: 1,
        };
        let (_, out) = run_episode(&cfg).unwrap();
        assert!(matches!(
            deviation_probe(&out, &env, 3),
            Err(Error::ProbeUnavailable)
        ));
    }
}
