//! Finite normal-form games: payoff tensors, pure Nash enumeration, exact
//! potential and coarse correlated equilibrium certificates.
//!
//! Joint action profiles are stored row-major: player 0 is the most
//! significant digit of the flat profile index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{ActionGrid, MarketGame};
use crate::scalar::Scalar;

/// Default cap on the number of joint profiles a tensor may hold.
pub const DEFAULT_PROFILE_CAP: usize = 50_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct DiscreteGame<S> {
    counts: Vec<usize>,
    strides: Vec<usize>,
    /// `payoffs[profile * n + player]`.
    payoffs: Vec<S>,
}

fn strides_of(counts: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; counts.len()];
    for i in (0..counts.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * counts[i + 1];
    }
    strides
}

fn profile_count(counts: &[usize], cap: usize) -> Result<usize> {
    let total = counts.iter().map(|c| *c as u128).product::<u128>();
    if total > cap as u128 {
        return Err(Error::TooLarge {
            profiles: total,
            cap,
        });
    }
    Ok(total as usize)
}

impl<S: Scalar> DiscreteGame<S> {
    /// Builds a tensor by evaluating `payoff(profile, out)` at every joint
    /// profile; `out` has one slot per player.
    pub fn from_fn(
        counts: Vec<usize>,
        cap: usize,
        mut payoff: impl FnMut(&[usize], &mut [S]),
    ) -> Result<Self> {
        if counts.is_empty() || counts.iter().any(|c| *c == 0) {
            return Err(Error::InvalidInput(
                "every player needs at least one action".into(),
            ));
        }
        let total = profile_count(&counts, cap)?;
        let n = counts.len();
        let strides = strides_of(&counts);
        let mut payoffs = vec![S::zero(); total * n];
        let mut profile = vec![0usize; n];
        for k in 0..total {
            payoff(&profile, &mut payoffs[k * n..(k + 1) * n]);
            advance(&mut profile, &counts);
        }
        if payoffs.iter().any(|u| !u.is_finite()) {
            return Err(Error::InvalidInput("payoffs must be finite".into()));
        }
        Ok(DiscreteGame {
            counts,
            strides,
            payoffs,
        })
    }

    /// Two-player game from row and column payoff matrices.
    pub fn bimatrix(row: &[Vec<S>], col: &[Vec<S>]) -> Result<Self> {
        let rows = row.len();
        let cols = row.first().map_or(0, Vec::len);
        if col.len() != rows || row.iter().chain(col).any(|r| r.len() != cols) {
            return Err(Error::InvalidInput(
                "bimatrix payoffs must share one shape".into(),
            ));
        }
        Self::from_fn(vec![rows, cols], DEFAULT_PROFILE_CAP, |p, out| {
            out[0] = row[p[0]][p[1]];
            out[1] = col[p[0]][p[1]];
        })
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn profiles(&self) -> usize {
        self.payoffs.len() / self.n()
    }

    pub fn index_of(&self, profile: &[usize]) -> usize {
        profile.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn profile_of(&self, mut index: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|s| {
                let a = index / s;
                index %= s;
                a
            })
            .collect()
    }

    #[inline]
    pub fn payoff(&self, index: usize, player: usize) -> S {
        self.payoffs[index * self.n() + player]
    }

    #[inline]
    pub fn payoffs_at(&self, index: usize) -> &[S] {
        let n = self.n();
        &self.payoffs[index * n..(index + 1) * n]
    }

    /// Profile index after player `i` switches from its action in `index` to `action`.
    #[inline]
    pub fn deviate(&self, index: usize, player: usize, action: usize) -> usize {
        let s = self.strides[player];
        let current = (index / s) % self.counts[player];
        index - current * s + action * s
    }

    /// Action of `player` inside flat profile `index`.
    #[inline]
    pub fn action_in(&self, index: usize, player: usize) -> usize {
        (index / self.strides[player]) % self.counts[player]
    }

    /// Smallest and largest payoff of `player` over the tensor.
    pub fn payoff_range(&self, player: usize) -> (S, S) {
        (0..self.profiles())
            .map(|k| self.payoff(k, player))
            .fold((S::infinity(), S::neg_infinity()), |(lo, hi), u| {
                (lo.min(u), hi.max(u))
            })
    }

    /// Adds `shift` to every payoff of `player`.
    pub fn shifted(&self, player: usize, shift: S) -> Self {
        let mut out = self.clone();
        let n = self.n();
        for k in 0..self.profiles() {
            out.payoffs[k * n + player] = out.payoffs[k * n + player] + shift;
        }
        out
    }
}

fn advance(profile: &mut [usize], counts: &[usize]) {
    for i in (0..profile.len()).rev() {
        profile[i] += 1;
        if profile[i] < counts[i] {
            return;
        }
        profile[i] = 0;
    }
}

/// Payoff tensor of `game` with every firm choosing from `grid`.
pub fn discretize<S: Scalar>(
    game: &MarketGame<S>,
    grid: &ActionGrid<S>,
    cap: usize,
) -> Result<DiscreteGame<S>> {
    let (lo, hi) = game.interval();
    if grid.lower() < lo || grid.upper() > hi {
        return Err(Error::InvalidInput(format!(
            "grid [{}, {}] leaves the price interval [{lo}, {hi}]",
            grid.lower(),
            grid.upper()
        )));
    }
    let n = game.n();
    let mut prices = vec![S::zero(); n];
    let mut demand = vec![S::zero(); n];
    DiscreteGame::from_fn(vec![grid.len(); n], cap, |profile, out| {
        for (p, a) in prices.iter_mut().zip(profile) {
            *p = grid.price(*a);
        }
        game.payoff_into(&prices, &mut demand, out);
    })
}

/// For every player and every profile, the best payoff reachable by a
/// unilateral deviation. Indexed like the payoff tensor.
fn deviation_maxima<S: Scalar>(dg: &DiscreteGame<S>) -> Vec<S> {
    let n = dg.n();
    let mut best = vec![S::neg_infinity(); dg.profiles() * n];
    for i in 0..n {
        let stride = dg.strides[i];
        let count = dg.counts[i];
        for k in 0..dg.profiles() {
            if dg.action_in(k, i) != 0 {
                continue;
            }
            let m = (0..count)
                .map(|a| dg.payoff(k + a * stride, i))
                .fold(S::neg_infinity(), S::max);
            for a in 0..count {
                best[(k + a * stride) * n + i] = m;
            }
        }
    }
    best
}

/// All pure Nash equilibria as joint index profiles, in lexicographic order.
pub fn brute_force_discrete_nash<S: Scalar>(dg: &DiscreteGame<S>) -> Vec<Vec<usize>> {
    let n = dg.n();
    let best = deviation_maxima(dg);
    (0..dg.profiles())
        .filter(|k| (0..n).all(|i| !(best[k * n + i] > dg.payoff(*k, i))))
        .map(|k| dg.profile_of(k))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialCheck<S> {
    pub is_potential: bool,
    pub max_defect: S,
}

/// Four-cycle test for an exact potential.
///
/// For every pair of players `(i, j)`, every profile and every pair of
/// alternative actions, the deviators' payoff changes around the cycle
/// `a -> (a_i', .) -> (a_i', a_j') -> (., a_j') -> a` must sum to zero.
pub fn check_exact_potential<S: Scalar>(dg: &DiscreteGame<S>, tol: S) -> PotentialCheck<S> {
    let n = dg.n();
    let mut worst = S::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            for k in 0..dg.profiles() {
                let (ai, aj) = (dg.action_in(k, i), dg.action_in(k, j));
                for bi in (ai + 1)..dg.counts[i] {
                    let b = dg.deviate(k, i, bi);
                    for bj in (aj + 1)..dg.counts[j] {
                        let c = dg.deviate(b, j, bj);
                        let d = dg.deviate(k, j, bj);
                        let defect = (dg.payoff(b, i) - dg.payoff(k, i))
                            + (dg.payoff(c, j) - dg.payoff(b, j))
                            + (dg.payoff(d, i) - dg.payoff(c, i))
                            + (dg.payoff(k, j) - dg.payoff(d, j));
                        worst = worst.max(defect.abs());
                    }
                }
            }
        }
    }
    PotentialCheck {
        is_potential: worst <= tol,
        max_defect: worst,
    }
}

/// Probability mass over the joint profiles of a [`DiscreteGame`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct JointDistribution<S> {
    counts: Vec<usize>,
    mass: Vec<S>,
}

impl<S: Scalar> JointDistribution<S> {
    pub fn new(counts: Vec<usize>, mass: Vec<S>) -> Result<Self> {
        let total = profile_count(&counts, usize::MAX)?;
        if mass.len() != total {
            return Err(Error::DimensionMismatch {
                what: "joint distribution",
                expected: total,
                actual: mass.len(),
            });
        }
        if mass.iter().any(|p| !(p.is_finite() && *p >= S::zero())) {
            return Err(Error::InvalidInput(
                "probabilities must be finite and >= 0".into(),
            ));
        }
        let sum: S = mass.iter().copied().sum();
        if (sum - S::one()).abs() > S::lit(1e-9).max(S::epsilon() * S::from_count(mass.len())) {
            return Err(Error::InvalidInput(format!(
                "probabilities sum to {sum}, not 1"
            )));
        }
        Ok(JointDistribution { counts, mass })
    }

    /// All mass on one profile.
    pub fn point(counts: Vec<usize>, profile: &[usize]) -> Result<Self> {
        let total = profile_count(&counts, usize::MAX)?;
        let strides = strides_of(&counts);
        if profile.len() != counts.len() || profile.iter().zip(&counts).any(|(a, c)| a >= c) {
            return Err(Error::InvalidInput(
                "profile outside the action sets".into(),
            ));
        }
        let mut mass = vec![S::zero(); total];
        mass[profile
            .iter()
            .zip(&strides)
            .map(|(a, s)| a * s)
            .sum::<usize>()] = S::one();
        Ok(JointDistribution { counts, mass })
    }

    /// Normalized frequencies of observed joint profiles.
    pub fn from_counts(counts: Vec<usize>, occurrences: &[u64]) -> Result<Self> {
        let total: u64 = occurrences.iter().sum();
        if total == 0 {
            return Err(Error::InvalidInput("no observations".into()));
        }
        let denom = S::from_u64(total).expect("count representable");
        let mass = occurrences
            .iter()
            .map(|c| S::from_u64(*c).expect("count representable") / denom)
            .collect();
        Self::new(counts, mass)
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn mass(&self) -> &[S] {
        &self.mass
    }

    pub fn probability(&self, profile: &[usize]) -> S {
        let strides = strides_of(&self.counts);
        self.mass[profile
            .iter()
            .zip(&strides)
            .map(|(a, s)| a * s)
            .sum::<usize>()]
    }
}

/// Largest expected gain any player obtains by committing to a fixed action
/// instead of following `dist`. Non-positive values certify a coarse
/// correlated equilibrium; values `<= eps` an `eps`-approximate one.
pub fn check_cce<S: Scalar>(dg: &DiscreteGame<S>, dist: &JointDistribution<S>) -> Result<S> {
    if dist.counts != dg.counts {
        return Err(Error::DimensionMismatch {
            what: "joint distribution players x actions",
            expected: dg.profiles(),
            actual: dist.mass.len(),
        });
    }
    let mut worst = S::neg_infinity();
    for i in 0..dg.n() {
        let mut expected = S::zero();
        let mut fixed = vec![S::zero(); dg.counts[i]];
        for (k, p) in dist.mass.iter().enumerate() {
            if *p == S::zero() {
                continue;
            }
            expected = expected + *p * dg.payoff(k, i);
            for (a, acc) in fixed.iter_mut().enumerate() {
                *acc = *acc + *p * dg.payoff(dg.deviate(k, i, a), i);
            }
        }
        for f in fixed {
            worst = worst.max(f - expected);
        }
    }
    Ok(worst)
}

/// Small textbook games.
pub mod classic {
    use super::DiscreteGame;
    use crate::error::{invalid, Result};
    use crate::scalar::Scalar;

    /// Action 0 cooperates, 1 defects. Payoffs 3/0/5/1.
    pub fn prisoners_dilemma<S: Scalar>() -> DiscreteGame<S> {
        let l = S::lit;
        DiscreteGame::bimatrix(
            &[vec![l(3.0), l(0.0)], vec![l(5.0), l(1.0)]],
            &[vec![l(3.0), l(5.0)], vec![l(0.0), l(1.0)]],
        )
        .expect("2x2 shapes agree")
    }

    /// The row player gets `win` when the actions match, the column player when they differ.
    pub fn matching_pennies<S: Scalar>(win: S, lose: S) -> DiscreteGame<S> {
        DiscreteGame::bimatrix(
            &[vec![win, lose], vec![lose, win]],
            &[vec![lose, win], vec![win, lose]],
        )
        .expect("2x2 shapes agree")
    }

    /// Quantity competition with inverse demand `intercept - slope * Q` and
    /// constant marginal costs; every firm picks from `quantities`. The price
    /// is not floored at zero, which would break the exact potential.
    pub fn linear_cournot<S: Scalar>(
        intercept: S,
        slope: S,
        costs: &[S],
        quantities: &[S],
    ) -> Result<DiscreteGame<S>> {
        if costs.is_empty() || quantities.is_empty() {
            return invalid("cournot game needs at least one firm and one quantity");
        }
        if !(slope > S::zero()) {
            return invalid(format!("cournot slope must be > 0, got {slope}"));
        }
        DiscreteGame::from_fn(
            vec![quantities.len(); costs.len()],
            super::DEFAULT_PROFILE_CAP,
            |profile, out| {
                let total: S = profile.iter().map(|a| quantities[*a]).sum();
                let price = intercept - slope * total;
                for ((o, a), c) in out.iter_mut().zip(profile).zip(costs) {
                    *o = quantities[*a] * (price - *c);
                }
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::classic::*;
    use super::*;
    use crate::market::{make_grid, DemandModel};

    #[test]
    fn indexing_roundtrip() {
        let g = DiscreteGame::<f64>::from_fn(vec![2, 3, 4], 100, |p, out| {
            out.iter_mut().zip(p).for_each(|(o, a)| *o = *a as f64)
        })
        .unwrap();
        for k in 0..g.profiles() {
            let p = g.profile_of(k);
            assert_eq!(g.index_of(&p), k);
            for i in 0..3 {
                assert_eq!(g.payoff(k, i), p[i] as f64);
                assert_eq!(g.action_in(k, i), p[i]);
            }
        }
        assert_eq!(
            g.deviate(g.index_of(&[1, 2, 3]), 1, 0),
            g.index_of(&[1, 0, 3])
        );
    }

    #[test]
    fn cap_enforced() {
        let r = DiscreteGame::<f64>::from_fn(vec![10, 10, 10], 999, |_, _| {});
        assert!(matches!(r, Err(Error::TooLarge { profiles: 1000, .. })));
    }

    #[test]
    fn discretize_matches_payoff_calls() {
        let game = MarketGame::new(
            vec![0.0, 0.0],
            DemandModel::AllOrNothing { total: 1.0 },
            0.0,
            1.0,
        )
        .unwrap();
        let grid = ActionGrid::from_points(vec![0.4, 0.6]).unwrap();
        let dg = discretize(&game, &grid, 100).unwrap();
        assert_eq!(dg.profiles(), 4);
        for k in 0..4 {
            let p = dg.profile_of(k);
            let prices = [grid.price(p[0]), grid.price(p[1])];
            assert_eq!(
                dg.payoffs_at(k),
                game.payoff(&prices).unwrap().profits.as_slice()
            );
        }
        let both_high = dg.index_of(&[1, 1]);
        assert!((dg.payoff(both_high, 0) - 0.12f64).abs() < 1e-15);
        assert!((dg.payoff(both_high, 1) - 0.12f64).abs() < 1e-15);
    }

    #[test]
    fn discretize_rejects_grid_outside_interval() {
        let game = MarketGame::new(
            vec![0.0, 0.0],
            DemandModel::AllOrNothing { total: 1.0 },
            0.0,
            1.0,
        )
        .unwrap();
        let grid = make_grid(0.0, 1.5, 4).unwrap();
        assert!(discretize(&game, &grid, 100).is_err());
    }

    #[test]
    fn pure_nash_enumeration() {
        assert_eq!(
            brute_force_discrete_nash(&prisoners_dilemma::<f64>()),
            vec![vec![1, 1]]
        );
        assert!(brute_force_discrete_nash(&matching_pennies(1.0, -1.0)).is_empty());
    }

    #[test]
    fn potential_checks() {
        let common = DiscreteGame::bimatrix(
            &[vec![1.0, 4.0], vec![2.0, -3.0]],
            &[vec![1.0, 4.0], vec![2.0, -3.0]],
        )
        .unwrap();
        let r = check_exact_potential(&common, 1e-12);
        assert!(r.is_potential);
        assert_eq!(r.max_defect, 0.0);

        // One four-cycle in +-1 pennies: every leg loses 2, so the sum is -8.
        let r = check_exact_potential(&matching_pennies(1.0, -1.0), 1e-9);
        assert!(!r.is_potential);
        assert_eq!(r.max_defect, 8.0);
        // With 1/0 payoffs every leg loses 1.
        assert_eq!(
            check_exact_potential(&matching_pennies(1.0, 0.0), 1e-9).max_defect,
            4.0
        );
    }

    #[test]
    fn potential_defect_invariant_to_player_shift() {
        let pd = prisoners_dilemma::<f64>();
        let base = check_exact_potential(&pd, 1e-9).max_defect;
        assert_eq!(
            check_exact_potential(&pd.shifted(1, 7.5), 1e-9).max_defect,
            base
        );
    }

    #[test]
    fn cce_examples() {
        let pd = prisoners_dilemma::<f64>();
        let ne = JointDistribution::point(vec![2, 2], &[1, 1]).unwrap();
        assert!(check_cce(&pd, &ne).unwrap() <= 0.0);
        let cc = JointDistribution::point(vec![2, 2], &[0, 0]).unwrap();
        assert_eq!(check_cce(&pd, &cc).unwrap(), 2.0);

        let mp = matching_pennies(1.0, -1.0);
        let uniform = JointDistribution::new(vec![2, 2], vec![0.25; 4]).unwrap();
        assert_eq!(check_cce(&mp, &uniform).unwrap(), 0.0);
    }

    #[test]
    fn distribution_validation() {
        assert!(JointDistribution::<f64>::new(vec![2, 2], vec![0.5, 0.5, 0.5, 0.0]).is_err());
        assert!(JointDistribution::<f64>::new(vec![2, 2], vec![0.5, 0.5]).is_err());
        assert!(JointDistribution::<f64>::new(vec![2, 2], vec![1.5, -0.5, 0.0, 0.0]).is_err());
        let d = JointDistribution::<f64>::from_counts(vec![2, 2], &[1, 1, 2, 0]).unwrap();
        assert_eq!(d.probability(&[1, 0]), 0.5);
        let pd = prisoners_dilemma::<f64>();
        let wrong = JointDistribution::<f64>::new(vec![4], vec![0.25; 4]).unwrap();
        assert!(check_cce(&pd, &wrong).is_err());
    }

    #[test]
    fn linear_cournot_is_a_potential_game() {
        let q: Vec<f64> = (0..12).map(|k| k as f64 * 0.05).collect();
        let g = linear_cournot(1.0, 1.0, &[0.1, 0.1], &q).unwrap();
        let r = check_exact_potential(&g, 1e-9);
        assert!(r.is_potential, "{}", r.max_defect);
        // Interior Cournot-Nash quantity (a - c) / 3b = 0.3 is grid point 6.
        assert_eq!(brute_force_discrete_nash(&g), vec![vec![6, 6]]);
        let asym = linear_cournot(1.0, 1.0, &[0.1, 0.4], &q).unwrap();
        assert!(check_exact_potential(&asym, 1e-9).is_potential);
    }
}
