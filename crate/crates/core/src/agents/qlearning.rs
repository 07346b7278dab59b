use crate::equilibrium::DiscreteGame;
use crate::scalar::Scalar;

use super::{argmax_lowest, Observation, QInit};

/// Tabular action values, one row per state.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<S> {
    actions: usize,
    values: Vec<S>,
    /// Cached lowest-index argmax per row, used for convergence detection.
    greedy: Vec<usize>,
}

impl<S: Scalar> QTable<S> {
    pub(crate) fn init(
        game: &DiscreteGame<S>,
        firm: usize,
        states: usize,
        discount: S,
        init: QInit,
    ) -> Self {
        let m = game.action_counts()[firm];
        let row: Vec<S> = match init {
            QInit::Zeros => vec![S::zero(); m],
            QInit::UniformOpponent => {
                let mut sums = vec![S::zero(); m];
                let mut count = vec![0usize; m];
                for k in 0..game.profiles() {
                    let a = game.action_in(k, firm);
                    sums[a] = sums[a] + game.payoff(k, firm);
                    count[a] += 1;
                }
                sums.iter()
                    .zip(&count)
                    .map(|(s, c)| *s / S::from_count(*c) / (S::one() - discount))
                    .collect()
            }
        };
        let g = argmax_lowest(&row);
        QTable {
            actions: m,
            values: row.iter().copied().cycle().take(m * states).collect(),
            greedy: vec![g; states],
        }
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn states(&self) -> usize {
        self.greedy.len()
    }

    pub fn row(&self, state: usize) -> &[S] {
        &self.values[state * self.actions..(state + 1) * self.actions]
    }

    pub fn get(&self, state: usize, action: usize) -> S {
        self.values[state * self.actions + action]
    }

    pub fn set(&mut self, state: usize, action: usize, value: S) {
        self.values[state * self.actions + action] = value;
        self.greedy[state] = argmax_lowest(self.row(state));
    }

    pub fn greedy(&self, state: usize) -> usize {
        self.greedy[state]
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    fn max_value(&self, state: usize) -> S {
        self.row(state)
            .iter()
            .copied()
            .fold(S::neg_infinity(), S::max)
    }

    /// `Q(s,a) <- (1 - alpha) Q(s,a) + alpha (r + delta max_a' Q(s',a'))` on the
    /// visited cell, or on every own action when counterfactuals are supplied.
    pub(crate) fn learn(&mut self, alpha: S, delta: S, obs: &Observation<'_, S>) -> bool {
        let state = obs.state;
        let before = self.greedy[state];
        let keep = S::one() - alpha;
        match obs.counterfactual {
            None => {
                let target = obs.profit + delta * self.max_value(obs.next_state);
                let cell = state * self.actions + obs.action;
                self.values[cell] = keep * self.values[cell] + alpha * target;
            }
            Some(all) => {
                let targets: Vec<S> = all
                    .iter()
                    .enumerate()
                    .map(|(a, (r, next))| {
                        let r = if a == obs.action { obs.profit } else { *r };
                        r + delta * self.max_value(*next)
                    })
                    .collect();
                for (a, target) in targets.into_iter().enumerate() {
                    let cell = state * self.actions + a;
                    self.values[cell] = keep * self.values[cell] + alpha * target;
                }
            }
        }
        self.greedy[state] = argmax_lowest(self.row(state));
        before != self.greedy[state]
    }
}
