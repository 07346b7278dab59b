//! Run metrics: tail prices, collusion index, hindsight regret and
//! empirical play distributions.
//!
//! The same [`MetricsAccumulator`] runs online during an episode and offline
//! over a stored trace, so both paths add the same numbers in the same order.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::equilibrium::JointDistribution;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{Environment, StageRecord, Trace};

/// Upper bound on the number of stages averaged for tail prices.
pub const DEFAULT_TAIL_CAP: u64 = 10_000;

/// Regret checkpoints: powers of two up to `stages`, plus `stages` itself.
pub fn regret_checkpoints(stages: u64) -> Vec<u64> {
    let mut out: Vec<u64> = (0..64)
        .map(|k| 1u64 << k)
        .take_while(|t| *t <= stages)
        .collect();
    if stages > 0 && out.last() != Some(&stages) {
        out.push(stages);
    }
    out
}

#[derive(Debug, Clone)]
pub struct MetricsAccumulator<'a, S> {
    env: &'a Environment<S>,
    tail_window: Option<u64>,
    tail: VecDeque<Vec<S>>,
    tail_cap: usize,
    /// `counterfactual[i][a]`: cumulative true payoff of firm `i` had it always played `a`.
    counterfactual: Vec<Vec<S>>,
    realized: Vec<S>,
    regret: Vec<Vec<(u64, S)>>,
    stages: u64,
}

/// Metrics of one finished episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct EpisodeMetrics<S> {
    pub stages: u64,
    /// Tail-average price per firm; empty for an empty run.
    pub p_bar: Vec<S>,
    pub tail_len: u64,
    /// Cumulative hindsight regret per firm at each checkpoint.
    pub regret: Vec<Vec<(u64, S)>>,
    /// Cumulative true profit per firm.
    pub realized: Vec<S>,
}

impl<S: Scalar> EpisodeMetrics<S> {
    pub fn final_regret(&self) -> Vec<S> {
        self.regret
            .iter()
            .map(|series| series.last().map_or(S::zero(), |(_, r)| *r))
            .collect()
    }
}

impl<'a, S: Scalar> MetricsAccumulator<'a, S> {
    pub fn new(env: &'a Environment<S>, tail_window: Option<u64>) -> Self {
        let n = env.n();
        let tail_cap = tail_window.unwrap_or(DEFAULT_TAIL_CAP) as usize;
        MetricsAccumulator {
            env,
            tail_window,
            tail: VecDeque::with_capacity(tail_cap.min(1 << 16)),
            tail_cap,
            counterfactual: (0..n).map(|i| vec![S::zero(); env.actions(i)]).collect(),
            realized: vec![S::zero(); n],
            regret: vec![Vec::new(); n],
            stages: 0,
        }
    }

    pub fn observe(&mut self, record: &StageRecord<S>) {
        self.stages += 1;
        if self.tail.len() == self.tail_cap {
            self.tail.pop_front();
        }
        self.tail.push_back(record.prices.clone());

        let tensor = self.env.tensor();
        let k = tensor.index_of(&record.actions);
        for i in 0..self.realized.len() {
            self.realized[i] = self.realized[i] + record.profits_true[i];
            for (a, acc) in self.counterfactual[i].iter_mut().enumerate() {
                *acc = *acc + tensor.payoff(tensor.deviate(k, i, a), i);
            }
        }
        if self.stages.is_power_of_two() {
            self.checkpoint();
        }
    }

    fn checkpoint(&mut self) {
        for i in 0..self.realized.len() {
            let best = self.counterfactual[i]
                .iter()
                .copied()
                .fold(S::neg_infinity(), S::max);
            self.regret[i].push((self.stages, best - self.realized[i]));
        }
    }

    pub fn finish(mut self) -> EpisodeMetrics<S> {
        if self.stages > 0 && !self.stages.is_power_of_two() {
            self.checkpoint();
        }
        let len = match self.tail_window {
            Some(w) => w.min(self.stages),
            None => DEFAULT_TAIL_CAP
                .min((self.stages / 10).max(1))
                .min(self.stages),
        } as usize;
        let p_bar = if len == 0 {
            Vec::new()
        } else {
            let skip = self.tail.len() - len;
            let mut sums = vec![S::zero(); self.realized.len()];
            for prices in self.tail.iter().skip(skip) {
                for (s, p) in sums.iter_mut().zip(prices) {
                    *s = *s + *p;
                }
            }
            let k = S::from_count(len);
            sums.into_iter().map(|s| s / k).collect()
        };
        EpisodeMetrics {
            stages: self.stages,
            p_bar,
            tail_len: len as u64,
            regret: self.regret,
            realized: self.realized,
        }
    }
}

/// Replays a stored trace through the metrics accumulator.
pub fn replay_metrics<S: Scalar>(
    trace: &Trace<S>,
    env: &Environment<S>,
    tail_window: Option<u64>,
) -> EpisodeMetrics<S> {
    let mut acc = MetricsAccumulator::new(env, tail_window);
    for r in &trace.records {
        acc.observe(r);
    }
    acc.finish()
}

/// Cumulative hindsight regret of `firm` at every checkpoint, against true payoffs.
pub fn compute_regret<S: Scalar>(
    trace: &Trace<S>,
    env: &Environment<S>,
    firm: usize,
) -> Result<Vec<(u64, S)>> {
    if trace.records.is_empty() {
        return Err(Error::InvalidInput("regret needs a non-empty trace".into()));
    }
    if firm >= env.n() {
        return Err(Error::InvalidInput(format!("firm {firm} out of range")));
    }
    Ok(replay_metrics(trace, env, Some(1)).regret.swap_remove(firm))
}

/// `(p_bar - nash) / (monopoly - nash)`, unclamped.
pub fn collusion_index<S: Scalar>(p_bar: S, nash: S, monopoly: S) -> Result<S> {
    if monopoly == nash {
        return Err(Error::UndefinedBenchmark(format!("both equal {nash}")));
    }
    Ok((p_bar - nash) / (monopoly - nash))
}

/// Frequencies of joint actions over the last `tail_fraction` of the trace.
pub fn empirical_joint_distribution<S: Scalar>(
    trace: &Trace<S>,
    env: &Environment<S>,
    tail_fraction: f64,
) -> Result<JointDistribution<S>> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "tail fraction must be in (0, 1], got {tail_fraction}"
        )));
    }
    let len = trace.records.len();
    let take = ((len as f64) * tail_fraction).ceil() as usize;
    if take == 0 {
        return Err(Error::InvalidInput("empty tail".into()));
    }
    let tensor = env.tensor();
    let mut counts = vec![0u64; tensor.profiles()];
    for r in &trace.records[len - take..] {
        counts[tensor.index_of(&r.actions)] += 1;
    }
    JointDistribution::from_counts(tensor.action_counts().to_vec(), &counts)
}

/// One row of the per-run summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct RunSummary<S> {
    pub seed: u64,
    pub converged_at: Option<u64>,
    pub p_bar: Vec<S>,
    /// Per-firm collusion index; absent without benchmarks.
    pub delta: Option<Vec<S>>,
    pub delta_mean: Option<S>,
    pub regret_final: Vec<S>,
}

impl<S: Scalar> RunSummary<S> {
    /// Summary of one run; `benchmarks` is `(nash, monopoly)` per firm.
    pub fn from_metrics(
        seed: u64,
        converged_at: Option<u64>,
        metrics: &EpisodeMetrics<S>,
        benchmarks: Option<(&[S], &[S])>,
    ) -> Result<Self> {
        let delta = match benchmarks {
            Some((nash, monopoly)) if !metrics.p_bar.is_empty() => Some(
                (0..metrics.p_bar.len())
                    .map(|i| collusion_index(metrics.p_bar[i], nash[i], monopoly[i]))
                    .collect::<Result<Vec<S>>>()?,
            ),
            _ => None,
        };
        let delta_mean = delta
            .as_ref()
            .map(|d| d.iter().copied().sum::<S>() / S::from_count(d.len()));
        Ok(RunSummary {
            seed,
            converged_at,
            p_bar: metrics.p_bar.clone(),
            delta,
            delta_mean,
            regret_final: metrics.final_regret(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::DiscreteGame;
    use crate::sim::Termination;

    fn static_env() -> Environment<f64> {
        // Firm 0: action 0 pays 1.0, action 1 pays 0.5, whatever firm 1 does.
        let dg = DiscreteGame::bimatrix(&[vec![1.0], vec![0.5]], &[vec![0.0], vec![0.0]]).unwrap();
        Environment::from_discrete(dg)
    }

    fn trace_of(env: &Environment<f64>, own: &[usize]) -> Trace<f64> {
        let records = own
            .iter()
            .enumerate()
            .map(|(t, a)| {
                let k = env.tensor().index_of(&[*a, 0]);
                StageRecord {
                    t: t as u64 + 1,
                    actions: vec![*a, 0],
                    prices: vec![*a as f64, 0.0],
                    profits_true: env.tensor().payoffs_at(k).to_vec(),
                    profits_observed: env.tensor().payoffs_at(k).to_vec(),
                }
            })
            .collect();
        Trace {
            records,
            termination: Termination::Horizon,
        }
    }

    #[test]
    fn checkpoints() {
        assert_eq!(regret_checkpoints(10), vec![1, 2, 4, 8, 10]);
        assert_eq!(regret_checkpoints(8), vec![1, 2, 4, 8]);
        assert!(regret_checkpoints(0).is_empty());
    }

    #[test]
    fn regret_zero_when_always_best() {
        let env = static_env();
        let r = compute_regret(&trace_of(&env, &[0; 10]), &env, 0).unwrap();
        assert!(r.iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn regret_counts_suboptimal_stages() {
        let env = static_env();
        let plays = [0, 1, 0, 0, 1, 0, 0, 1, 0, 0];
        let r = compute_regret(&trace_of(&env, &plays), &env, 0).unwrap();
        assert_eq!(r.last().unwrap(), &(10, 1.5));
        assert!(r.iter().all(|(_, v)| *v >= 0.0));
    }

    #[test]
    fn collusion_index_examples() {
        assert_eq!(collusion_index(1.0, 1.0, 2.0).unwrap(), 0.0);
        assert_eq!(collusion_index(2.0, 1.0, 2.0).unwrap(), 1.0);
        assert_eq!(collusion_index(1.5, 1.0, 2.0).unwrap(), 0.5);
        assert!(collusion_index(0.5, 1.0, 2.0).unwrap() < 0.0);
        assert!(matches!(
            collusion_index(1.0, 1.0, 1.0),
            Err(Error::UndefinedBenchmark(_))
        ));
    }

    #[test]
    fn empirical_distribution() {
        let env = static_env();
        let d =
            empirical_joint_distribution(&trace_of(&env, &[1, 1, 0, 0, 0, 0]), &env, 0.5).unwrap();
        assert_eq!(d.probability(&[0, 0]), 1.0);
        let d = empirical_joint_distribution(&trace_of(&env, &[1, 0, 0, 1]), &env, 1.0).unwrap();
        assert_eq!(d.mass().iter().sum::<f64>(), 1.0);
        assert_eq!(d.probability(&[1, 0]), 0.5);
        assert!(empirical_joint_distribution(&trace_of(&env, &[]), &env, 0.5).is_err());
    }

    #[test]
    fn tail_average_window() {
        let env = static_env();
        let plays: Vec<usize> = (0..100).map(|t| usize::from(t >= 90)).collect();
        let m = replay_metrics(&trace_of(&env, &plays), &env, None);
        assert_eq!(m.tail_len, 10);
        assert_eq!(m.p_bar[0], 1.0);
        let m = replay_metrics(&trace_of(&env, &plays), &env, Some(20));
        assert_eq!(m.p_bar[0], 0.5);
    }
}
