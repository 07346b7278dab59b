//! Static price benchmarks on the continuous price interval.
//!
//! Best responses and monopoly coordinates are found by golden-section search
//! on the profit, polished by safeguarded Newton steps on the first-order
//! condition. For logit demand the own-price derivative of firm `i`'s profit
//! is `-(d_i / mu) * ((a_i - c_i)(1 - d_i) - mu)`, so the bracketed root of the
//! second factor is the maximizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{DemandModel, MarketGame, PriceProfile};
use crate::scalar::Scalar;

/// Cap on coordinate-ascent sweeps for asymmetric monopoly problems.
const MAX_MONOPOLY_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct EquilibriumResult<S> {
    pub prices: PriceProfile<S>,
    /// Largest distance between a price and the corresponding best response.
    pub residual: S,
    pub iterations: usize,
    pub converged: bool,
}

/// Nash and monopoly reference profiles of one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Benchmarks<S> {
    pub nash: EquilibriumResult<S>,
    pub monopoly: EquilibriumResult<S>,
}

struct LogitView<'a, S> {
    mu: S,
    game: &'a MarketGame<S>,
}

fn logit<'a, S: Scalar>(
    game: &'a MarketGame<S>,
    operation: &'static str,
) -> Result<LogitView<'a, S>> {
    match game.demand_model() {
        DemandModel::Logit {
            differentiation, ..
        } => Ok(LogitView {
            mu: *differentiation,
            game,
        }),
        _ => Err(Error::UnsupportedModel {
            operation,
            required: "logit demand",
        }),
    }
}

/// Maximizes `f` on `[lo, hi]`.
///
/// `foc(x)` returns the first-order condition and its derivative, signed so
/// that `f` increases where the condition is negative.
fn maximize_1d<S: Scalar>(f: impl Fn(S) -> S, foc: impl Fn(S) -> (S, S), lo: S, hi: S) -> S {
    if foc(lo).0 >= S::zero() {
        return lo;
    }
    if foc(hi).0 <= S::zero() {
        return hi;
    }
    let x = golden_section(&f, lo, hi);

    let span = hi - lo;
    let mut delta = span * S::lit(1e-4);
    let (mut a, mut b);
    loop {
        a = (x - delta).max(lo);
        b = (x + delta).min(hi);
        if foc(a).0 < S::zero() && foc(b).0 > S::zero() {
            break;
        }
        if a == lo && b == hi {
            return x;
        }
        delta = delta + delta;
    }
    newton_bisect(foc, a, b, x)
}

fn golden_section<S: Scalar>(f: &impl Fn(S) -> S, lo: S, hi: S) -> S {
    let inv_phi = S::lit(0.618_033_988_749_894_8);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..80 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
        if b - a <= S::epsilon() * S::lit(4.0) * S::one().max(a.abs()) {
            break;
        }
    }
    (a + b) / S::lit(2.0)
}

/// Root of an increasing-through-zero condition bracketed by `foc(a) < 0 < foc(b)`.
fn newton_bisect<S: Scalar>(foc: impl Fn(S) -> (S, S), mut a: S, mut b: S, start: S) -> S {
    let two = S::lit(2.0);
    let mut x = start.max(a).min(b);
    for _ in 0..200 {
        let (v, dv) = foc(x);
        if v == S::zero() {
            return x;
        }
        if v < S::zero() {
            a = x;
        } else {
            b = x;
        }
        let mut next = x - v / dv;
        if !(dv > S::zero()) || !(next > a && next < b) {
            next = (a + b) / two;
        }
        if (next - x).abs() <= S::epsilon() * two * S::one().max(x.abs()) {
            return next;
        }
        x = next;
    }
    x
}

impl<S: Scalar> LogitView<'_, S> {
    /// Own-price condition `(a_i - c_i)(1 - d_i) - mu` and its derivative.
    fn nash_foc(&self, i: usize, prices: &[S], demand: &mut [S]) -> (S, S) {
        self.game.demand_into(prices, demand);
        let d = demand[i];
        let margin = prices[i] - self.game.costs()[i];
        let value = margin * (S::one() - d) - self.mu;
        let slope = (S::one() - d) + margin * d * (S::one() - d) / self.mu;
        (value, slope)
    }

    /// Joint-profit condition along coordinate `i`: `m_i - sum_j m_j d_j - mu`.
    fn monopoly_foc(&self, i: usize, prices: &[S], demand: &mut [S]) -> (S, S) {
        self.game.demand_into(prices, demand);
        let costs = self.game.costs();
        let total: S = (0..prices.len())
            .map(|j| (prices[j] - costs[j]) * demand[j])
            .sum();
        let margin = prices[i] - costs[i];
        let d = demand[i];
        let value = margin - total - self.mu;
        let slope = S::one() - d + d * (margin - total) / self.mu;
        (value, slope)
    }

    /// Joint-profit condition along the symmetric line: `m (1 - D) - mu`.
    fn symmetric_monopoly_foc(&self, p: S, demand: &mut [S]) -> (S, S) {
        let prices = vec![p; self.game.n()];
        self.game.demand_into(&prices, demand);
        let inside: S = demand.iter().copied().sum();
        let margin = p - self.game.costs()[0];
        let value = margin * (S::one() - inside) - self.mu;
        let slope = (S::one() - inside) + margin * inside * (S::one() - inside) / self.mu;
        (value, slope)
    }

    fn best_response(&self, i: usize, prices: &[S]) -> S {
        let (lo, hi) = self.game.interval();
        let profit = |x: S| {
            let mut p = prices.to_vec();
            p[i] = x;
            self.game.profit_of(i, &p)
        };
        let foc = |x: S| {
            let mut d = vec![S::zero(); prices.len()];
            let mut p = prices.to_vec();
            p[i] = x;
            self.nash_foc(i, &p, &mut d)
        };
        maximize_1d(profit, foc, lo, hi)
    }

    fn joint_profit(&self, prices: &[S]) -> S {
        let mut d = vec![S::zero(); prices.len()];
        self.game.demand_into(prices, &mut d);
        let costs = self.game.costs();
        (0..prices.len())
            .map(|j| (prices[j] - costs[j]) * d[j])
            .sum()
    }

    fn monopoly_coordinate(&self, i: usize, prices: &[S]) -> S {
        let (lo, hi) = self.game.interval();
        let at = |x: S| {
            let mut p = prices.to_vec();
            p[i] = x;
            p
        };
        let f = |x: S| self.joint_profit(&at(x));
        let foc = |x: S| {
            let mut d = vec![S::zero(); prices.len()];
            self.monopoly_foc(i, &at(x), &mut d)
        };
        maximize_1d(f, foc, lo, hi)
    }
}

/// Profit-maximizing price of firm `i` on the game interval given the other
/// entries of `prices` (entry `i` is ignored).
pub fn best_response_logit<S: Scalar>(game: &MarketGame<S>, i: usize, prices: &[S]) -> Result<S> {
    let view = logit(game, "best_response_logit")?;
    check_profile(game, prices)?;
    if i >= game.n() {
        return Err(Error::InvalidInput(format!("firm index {i} out of range")));
    }
    Ok(view.best_response(i, prices))
}

/// Largest absolute logit first-order-condition residual over firms,
/// `|(a_i - c_i)(1 - d_i) - mu|`.
pub fn logit_nash_foc_residual<S: Scalar>(game: &MarketGame<S>, prices: &[S]) -> Result<S> {
    let view = logit(game, "logit_nash_foc_residual")?;
    check_profile(game, prices)?;
    let mut d = vec![S::zero(); game.n()];
    Ok((0..game.n())
        .map(|i| view.nash_foc(i, prices, &mut d).0.abs())
        .fold(S::zero(), S::max))
}

/// Largest absolute joint-profit first-order-condition residual,
/// `|m_i - sum_j m_j d_j - mu|` with margins `m_i = a_i - c_i`.
pub fn logit_monopoly_foc_residual<S: Scalar>(game: &MarketGame<S>, prices: &[S]) -> Result<S> {
    let view = logit(game, "logit_monopoly_foc_residual")?;
    check_profile(game, prices)?;
    let mut d = vec![S::zero(); game.n()];
    Ok((0..game.n())
        .map(|i| view.monopoly_foc(i, prices, &mut d).0.abs())
        .fold(S::zero(), S::max))
}

fn check_profile<S: Scalar>(game: &MarketGame<S>, prices: &[S]) -> Result<()> {
    if prices.len() != game.n() {
        return Err(Error::DimensionMismatch {
            what: "price profile",
            expected: game.n(),
            actual: prices.len(),
        });
    }
    Ok(())
}

fn max_gap<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y).abs())
        .fold(S::zero(), S::max)
}

/// Iterated simultaneous best responses from the interval midpoint.
///
/// Stops at the first profile whose best-response residual is at most `tol`;
/// returns `converged = false` after `max_iter` rounds otherwise.
pub fn solve_nash_logit<S: Scalar>(
    game: &MarketGame<S>,
    tol: S,
    max_iter: usize,
) -> Result<EquilibriumResult<S>> {
    let view = logit(game, "solve_nash_logit")?;
    iterate_best_responses(game, tol, max_iter, |i, p| view.best_response(i, p))
}

fn iterate_best_responses<S: Scalar>(
    game: &MarketGame<S>,
    tol: S,
    max_iter: usize,
    best_response: impl Fn(usize, &[S]) -> S,
) -> Result<EquilibriumResult<S>> {
    let mut prices = vec![game.midpoint(); game.n()];
    let mut residual = S::infinity();
    for iteration in 0..max_iter.max(1) {
        let next: Vec<S> = (0..game.n()).map(|i| best_response(i, &prices)).collect();
        residual = max_gap(&next, &prices);
        if residual <= tol {
            return Ok(EquilibriumResult {
                prices: prices.into(),
                residual,
                iterations: iteration,
                converged: true,
            });
        }
        prices = next;
    }
    Ok(EquilibriumResult {
        prices: prices.into(),
        residual,
        iterations: max_iter,
        converged: false,
    })
}

/// Joint-profit maximizing profile.
///
/// Symmetric games are solved on the common-price line; asymmetric games by
/// cyclic coordinate ascent until a full sweep moves no price by more than `tol`.
/// The residual reported is the largest gap to the coordinate-wise maximizer.
pub fn solve_monopoly_logit<S: Scalar>(
    game: &MarketGame<S>,
    tol: S,
) -> Result<EquilibriumResult<S>> {
    let view = logit(game, "solve_monopoly_logit")?;
    let n = game.n();
    let coordinate_residual = |prices: &[S]| {
        (0..n)
            .map(|i| (view.monopoly_coordinate(i, prices) - prices[i]).abs())
            .fold(S::zero(), S::max)
    };

    if game.is_symmetric() {
        let (lo, hi) = game.interval();
        let f = |p: S| view.joint_profit(&vec![p; n]);
        let foc = |p: S| {
            let mut d = vec![S::zero(); n];
            view.symmetric_monopoly_foc(p, &mut d)
        };
        let p = maximize_1d(f, foc, lo, hi);
        let prices = vec![p; n];
        let residual = coordinate_residual(&prices);
        return Ok(EquilibriumResult {
            prices: prices.into(),
            residual,
            iterations: 1,
            converged: residual <= tol,
        });
    }

    let mut prices = vec![game.midpoint(); n];
    for sweep in 1..=MAX_MONOPOLY_SWEEPS {
        let before = prices.clone();
        for i in 0..n {
            prices[i] = view.monopoly_coordinate(i, &prices);
        }
        if max_gap(&before, &prices) <= tol {
            let residual = coordinate_residual(&prices);
            return Ok(EquilibriumResult {
                prices: prices.into(),
                residual,
                iterations: sweep,
                converged: residual <= tol,
            });
        }
    }
    let residual = coordinate_residual(&prices);
    Ok(EquilibriumResult {
        prices: prices.into(),
        residual,
        iterations: MAX_MONOPOLY_SWEEPS,
        converged: residual <= tol,
    })
}

/// Pure Nash prices under all-or-nothing demand: every firm at the
/// second-lowest marginal cost (the common cost when the two lowest coincide).
pub fn nash_all_or_nothing<S: Scalar>(game: &MarketGame<S>) -> Result<PriceProfile<S>> {
    if !matches!(game.demand_model(), DemandModel::AllOrNothing { .. }) {
        return Err(Error::UnsupportedModel {
            operation: "nash_all_or_nothing",
            required: "all-or-nothing demand",
        });
    }
    if game.n() < 2 {
        return Err(Error::InvalidInput(
            "all-or-nothing Nash needs at least two firms".into(),
        ));
    }
    let mut sorted = game.costs().to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite costs"));
    Ok(vec![sorted[1]; game.n()].into())
}

/// Joint-profit price under all-or-nothing demand: the lowest-cost firm's
/// monopoly price `(1 + c_min) / 2`, clamped to the interval, for every firm.
pub fn monopoly_all_or_nothing<S: Scalar>(game: &MarketGame<S>) -> Result<PriceProfile<S>> {
    if !matches!(game.demand_model(), DemandModel::AllOrNothing { .. }) {
        return Err(Error::UnsupportedModel {
            operation: "monopoly_all_or_nothing",
            required: "all-or-nothing demand",
        });
    }
    let c_min = game.costs().iter().copied().fold(S::infinity(), S::min);
    let (lo, hi) = game.interval();
    let p = ((S::one() + c_min) / S::lit(2.0)).max(lo).min(hi);
    Ok(vec![p; game.n()].into())
}

fn linear_params<S: Scalar>(game: &MarketGame<S>, operation: &'static str) -> Result<(S, S, S)> {
    match game.demand_model() {
        DemandModel::Linear {
            intercept,
            own_slope,
            cross_slope,
        } => Ok((*intercept, *own_slope, *cross_slope)),
        _ => Err(Error::UnsupportedModel {
            operation,
            required: "linear demand",
        }),
    }
}

/// Closed-form own-price maximizer under linear demand, clamped to the interval.
pub fn best_response_linear<S: Scalar>(game: &MarketGame<S>, i: usize, prices: &[S]) -> Result<S> {
    let (a, b, e) = linear_params(game, "best_response_linear")?;
    check_profile(game, prices)?;
    let rivals: S = prices
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, p)| *p)
        .sum();
    let (lo, hi) = game.interval();
    let p = (a + b * game.costs()[i] + e * rivals) / (b + b);
    Ok(p.max(lo).min(hi))
}

pub fn solve_nash_linear<S: Scalar>(
    game: &MarketGame<S>,
    tol: S,
    max_iter: usize,
) -> Result<EquilibriumResult<S>> {
    linear_params(game, "solve_nash_linear")?;
    iterate_best_responses(game, tol, max_iter, |i, p| {
        best_response_linear(game, i, p).expect("validated linear game")
    })
}

/// Coordinate ascent on joint profit under linear demand. Each coordinate
/// update is the exact maximizer `(A + b c_i + e sum_{j != i}(2 a_j - c_j)) / 2b`.
pub fn solve_monopoly_linear<S: Scalar>(
    game: &MarketGame<S>,
    tol: S,
    max_iter: usize,
) -> Result<EquilibriumResult<S>> {
    let (a, b, e) = linear_params(game, "solve_monopoly_linear")?;
    let (lo, hi) = game.interval();
    let costs = game.costs();
    let n = game.n();
    let coordinate = |i: usize, p: &[S]| {
        let rivals: S = (0..n)
            .filter(|j| *j != i)
            .map(|j| p[j] + p[j] - costs[j])
            .sum();
        ((a + b * costs[i] + e * rivals) / (b + b)).max(lo).min(hi)
    };
    let mut prices = vec![game.midpoint(); n];
    let mut iterations = 0;
    for sweep in 1..=max_iter.max(1) {
        iterations = sweep;
        let before = prices.clone();
        for i in 0..n {
            prices[i] = coordinate(i, &prices);
        }
        if max_gap(&before, &prices) <= tol {
            break;
        }
    }
    let residual = (0..n)
        .map(|i| (coordinate(i, &prices) - prices[i]).abs())
        .fold(S::zero(), S::max);
    Ok(EquilibriumResult {
        prices: prices.into(),
        residual,
        iterations,
        converged: residual <= tol,
    })
}

/// Nash and monopoly benchmarks for any supported demand model.
pub fn compute_benchmarks<S: Scalar>(
    game: &MarketGame<S>,
    tol: S,
    max_iter: usize,
) -> Result<Benchmarks<S>> {
    match game.demand_model() {
        DemandModel::Logit { .. } => Ok(Benchmarks {
            nash: solve_nash_logit(game, tol, max_iter)?,
            monopoly: solve_monopoly_logit(game, tol)?,
        }),
        DemandModel::Linear { .. } => Ok(Benchmarks {
            nash: solve_nash_linear(game, tol, max_iter)?,
            monopoly: solve_monopoly_linear(game, tol, max_iter)?,
        }),
        DemandModel::AllOrNothing { .. } => {
            let exact = |prices| EquilibriumResult {
                prices,
                residual: S::zero(),
                iterations: 0,
                converged: true,
            };
            Ok(Benchmarks {
                nash: exact(nash_all_or_nothing(game)?),
                monopoly: exact(monopoly_all_or_nothing(game)?),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logit_market(costs: Vec<f64>, quality: Vec<f64>) -> MarketGame<f64> {
        MarketGame::new(
            costs,
            DemandModel::Logit {
                quality,
                outside_quality: 0.0,
                differentiation: 0.25,
            },
            1.0,
            3.0,
        )
        .unwrap()
    }

    /// Brute-force own-price grid search, independent of the solver path.
    fn grid_best_response(game: &MarketGame<f64>, i: usize, prices: &[f64], points: usize) -> f64 {
        let (lo, hi) = game.interval();
        let mut p = prices.to_vec();
        let mut best = (f64::NEG_INFINITY, lo);
        for k in 0..points {
            p[i] = lo + (hi - lo) * k as f64 / (points - 1) as f64;
            let u = game.profit_of(i, &p);
            if u > best.0 {
                best = (u, p[i]);
            }
        }
        best.1
    }

    #[test]
    fn best_response_matches_grid_oracle() {
        let g = logit_market(vec![1.0, 1.0], vec![2.0, 2.0]);
        let oracle = grid_best_response(&g, 0, &[0.0, 1.473], 10_001);
        let br = best_response_logit(&g, 0, &[0.0, 1.473]).unwrap();
        assert!((br - oracle).abs() <= 2.0 / 10_000.0, "{br} vs {oracle}");
        assert!((br - 1.473).abs() < 1e-3);
        let mut p = vec![br, 1.473];
        p[0] = br;
        let mut d = [0.0; 2];
        let view = logit(&g, "t").unwrap();
        assert!(view.nash_foc(0, &p, &mut d).0.abs() < 1e-12);
    }

    #[test]
    fn best_response_against_priced_out_rival_is_single_firm_optimum() {
        let g = logit_market(vec![1.0, 1.0], vec![2.0, 2.0])
            .with_interval(1.0, 40.0)
            .unwrap();
        let br = best_response_logit(&g, 0, &[0.0, 40.0]).unwrap();
        let single = MarketGame::new(
            vec![1.0],
            DemandModel::Logit {
                quality: vec![2.0],
                outside_quality: 0.0,
                differentiation: 0.25,
            },
            1.0,
            3.0,
        )
        .unwrap();
        let oracle = grid_best_response(&single, 0, &[0.0], 20_001);
        assert!((br - oracle).abs() < 1e-4, "{br} vs {oracle}");
    }

    #[test]
    fn best_response_clamps_to_interval() {
        let g = logit_market(vec![1.0, 1.0], vec![2.0, 2.0])
            .with_interval(1.0, 1.2)
            .unwrap();
        assert_eq!(best_response_logit(&g, 0, &[1.1, 1.1]).unwrap(), 1.2);
        let g = logit_market(vec![1.0, 1.0], vec![2.0, 2.0])
            .with_interval(2.5, 3.0)
            .unwrap();
        assert_eq!(best_response_logit(&g, 1, &[2.7, 2.7]).unwrap(), 2.5);
    }

    #[test]
    fn nash_reference_game() {
        let g = logit_market(vec![1.0, 1.0], vec![2.0, 2.0]);
        let r = solve_nash_logit(&g, 1e-12, 200).unwrap();
        assert!(r.converged);
        assert_eq!(r.prices[0], r.prices[1]);
        // Root of the symmetric FOC to 40 digits (mpmath): 1.4729266600306227.
        assert!((r.prices[0] - 1.472_926_660_030_622_7).abs() < 1e-9);
        assert!(logit_nash_foc_residual(&g, &r.prices).unwrap() < 1e-8);
    }

    #[test]
    fn nash_translation_invariance() {
        let base =
            solve_nash_logit(&logit_market(vec![1.0, 1.0], vec![2.0, 2.0]), 1e-12, 200).unwrap();
        let shifted =
            solve_nash_logit(&logit_market(vec![1.5, 1.5], vec![2.5, 2.5]), 1e-12, 200).unwrap();
        for i in 0..2 {
            assert!((shifted.prices[i] - base.prices[i] - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn nash_reports_non_convergence() {
        let g = logit_market(vec![1.0, 1.0], vec![2.0, 2.0]);
        let r = solve_nash_logit(&g, 1e-15, 1).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn monopoly_reference_game() {
        let g = logit_market(vec![1.0, 1.0], vec![2.0, 2.0]);
        let m = solve_monopoly_logit(&g, 1e-10).unwrap();
        assert!(m.converged, "{m:?}");
        // Root of m(1 - D) = mu on the symmetric line to 40 digits (mpmath): 1.9249809190177618.
        assert!((m.prices[0] - 1.924_980_919_017_761_8).abs() < 1e-7);
        assert!(logit_monopoly_foc_residual(&g, &m.prices).unwrap() < 1e-8);
        let n = solve_nash_logit(&g, 1e-12, 200).unwrap();
        assert!(m.prices.iter().zip(n.prices.iter()).all(|(pm, pn)| pm > pn));
    }

    #[test]
    fn monopoly_asymmetric_has_equal_margins() {
        // At the joint optimum every margin equals mu + total profit.
        let g = logit_market(vec![1.0, 1.2], vec![2.0, 2.3]);
        let m = solve_monopoly_logit(&g, 1e-11).unwrap();
        assert!(m.converged, "{m:?}");
        let margins: Vec<f64> = m.prices.iter().zip(g.costs()).map(|(p, c)| p - c).collect();
        assert!((margins[0] - margins[1]).abs() < 1e-8);
        let profit: f64 = g.payoff(&m.prices).unwrap().profits.iter().sum();
        assert!((margins[0] - 0.25 - profit).abs() < 1e-8);
    }

    #[test]
    fn single_firm_monopoly_equals_nash() {
        let g = logit_market(vec![1.0], vec![2.0]);
        let m = solve_monopoly_logit(&g, 1e-12).unwrap();
        let n = solve_nash_logit(&g, 1e-12, 100).unwrap();
        assert!((m.prices[0] - n.prices[0]).abs() < 1e-10);
    }

    #[test]
    fn all_or_nothing_nash() {
        let game = |c: Vec<f64>| {
            MarketGame::new(c, DemandModel::AllOrNothing { total: 1.0 }, 0.0, 1.0).unwrap()
        };
        assert_eq!(
            nash_all_or_nothing(&game(vec![0.3, 0.3])).unwrap().0,
            vec![0.3, 0.3]
        );
        assert_eq!(
            nash_all_or_nothing(&game(vec![0.2, 0.5])).unwrap().0,
            vec![0.5, 0.5]
        );
        assert_eq!(
            nash_all_or_nothing(&game(vec![0.1, 0.4, 0.9])).unwrap().0,
            vec![0.4, 0.4, 0.4]
        );
        assert!(nash_all_or_nothing(&logit_market(vec![1.0, 1.0], vec![2.0, 2.0])).is_err());
    }

    #[test]
    fn linear_benchmarks_closed_form() {
        // Symmetric Nash (A + b c) / (2b - e(n-1)); monopoly (A + (b - e(n-1)) c) / (2(b - e(n-1))).
        let g = MarketGame::new(
            vec![0.2, 0.2],
            DemandModel::Linear {
                intercept: 1.0,
                own_slope: 1.0,
                cross_slope: 0.5,
            },
            0.0,
            3.0,
        )
        .unwrap();
        let b = compute_benchmarks(&g, 1e-13, 1000).unwrap();
        assert!((b.nash.prices[0] - 1.2f64 / 1.5).abs() < 1e-10);
        assert!((b.monopoly.prices[0] - 1.1f64).abs() < 1e-10);
    }

    #[test]
    fn unsupported_models_rejected() {
        let g = MarketGame::new(
            vec![0.0, 0.0],
            DemandModel::AllOrNothing { total: 1.0 },
            0.0,
            1.0,
        )
        .unwrap();
        assert!(matches!(
            solve_nash_logit(&g, 1e-8, 10),
            Err(Error::UnsupportedModel { .. })
        ));
        assert!(best_response_logit(&g, 0, &[0.5, 0.5]).is_err());
    }
}
