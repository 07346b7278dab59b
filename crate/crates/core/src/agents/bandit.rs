use rand::Rng;

use crate::scalar::Scalar;

use super::argmax_random;

/// Exponential weights with importance-weighted gain estimates.
///
/// Weights are kept as logarithms; a common shift is subtracted whenever the
/// largest one nears the exponent range, which leaves probabilities unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Exp3State<S> {
    log_weights: Vec<S>,
    step: S,
    floor: S,
    reward_lo: S,
    reward_hi: S,
    clamped: u64,
}

impl<S: Scalar> Exp3State<S> {
    pub fn new(arms: usize, step: S, floor: S, reward_lo: S, reward_hi: S) -> Self {
        Exp3State {
            log_weights: vec![S::zero(); arms],
            step,
            floor,
            reward_lo,
            reward_hi,
            clamped: 0,
        }
    }

    pub fn log_weights(&self) -> &[S] {
        &self.log_weights
    }

    /// Weights up to the common factor removed by rescaling.
    pub fn weights(&self) -> Vec<S> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    pub fn step(&self) -> S {
        self.step
    }

    pub fn reward_bounds(&self) -> (S, S) {
        (self.reward_lo, self.reward_hi)
    }

    pub fn clamped(&self) -> u64 {
        self.clamped
    }

    /// `(1 - floor) w_a / sum(w) + floor / m`.
    pub fn probabilities(&self) -> Vec<S> {
        let top = self
            .log_weights
            .iter()
            .copied()
            .fold(S::neg_infinity(), S::max);
        let raw: Vec<S> = self.log_weights.iter().map(|w| (*w - top).exp()).collect();
        let total: S = raw.iter().copied().sum();
        let m = S::from_count(raw.len());
        raw.into_iter()
            .map(|w| (S::one() - self.floor) * w / total + self.floor / m)
            .collect()
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let probs = self.probabilities();
        let u = S::lit(rng.random::<f64>());
        let mut acc = S::zero();
        for (a, p) in probs.iter().enumerate() {
            acc = acc + *p;
            if u < acc {
                return a;
            }
        }
        probs.len() - 1
    }

    /// Rescales `profit` into `[0, 1]`, clamping (and counting) out-of-range values.
    fn scale(&mut self, profit: S) -> S {
        let span = self.reward_hi - self.reward_lo;
        if !(span > S::zero()) {
            return S::zero();
        }
        let r = (profit - self.reward_lo) / span;
        if r < S::zero() || r > S::one() {
            self.clamped += 1;
        }
        r.max(S::zero()).min(S::one())
    }

    pub(crate) fn learn(&mut self, arm: usize, profit: S) {
        let p = self.probabilities()[arm];
        let gain = self.scale(profit) / p;
        self.log_weights[arm] = self.log_weights[arm] + self.step * gain;
        let limit = S::max_value().ln() / S::lit(4.0);
        let top = self
            .log_weights
            .iter()
            .copied()
            .fold(S::neg_infinity(), S::max);
        if top > limit {
            for w in &mut self.log_weights {
                *w = *w - top;
            }
        }
    }
}

/// UCB1 statistics with a configurable confidence width.
#[derive(Debug, Clone, PartialEq)]
pub struct UcbState<S> {
    counts: Vec<u64>,
    means: Vec<S>,
    steps: u64,
}

/// `mean + width * sqrt(2 ln t / n)`.
pub fn ucb_index<S: Scalar>(mean: S, pulls: u64, t: u64, width: S) -> S {
    let t = S::from_u64(t.max(1)).expect("stage representable");
    let n = S::from_u64(pulls).expect("count representable");
    mean + width * (S::lit(2.0) * t.ln() / n).sqrt()
}

impl<S: Scalar> UcbState<S> {
    pub fn new(arms: usize) -> Self {
        UcbState {
            counts: vec![0; arms],
            means: vec![S::zero(); arms],
            steps: 0,
        }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn means(&self) -> &[S] {
        &self.means
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub(crate) fn select<R: Rng + ?Sized>(&self, width: S, t: u64, rng: &mut R) -> usize {
        if let Some(a) = self.counts.iter().position(|c| *c == 0) {
            return a;
        }
        let index: Vec<S> = self
            .means
            .iter()
            .zip(&self.counts)
            .map(|(m, n)| ucb_index(*m, *n, t, width))
            .collect();
        argmax_random(&index, rng)
    }

    pub(crate) fn learn(&mut self, arm: usize, profit: S) {
        self.counts[arm] += 1;
        self.steps += 1;
        let n = S::from_u64(self.counts[arm]).expect("count representable");
        self.means[arm] = self.means[arm] + (profit - self.means[arm]) / n;
    }
}
