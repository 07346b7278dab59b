//! Oligopoly stage game: firms, marginal costs, demand models and payoffs.
//!
//! Profit of firm `i` at price profile `a` is `d_i(a) * (a_i - c_i)`, with the
//! demand `d_i` supplied by one of the [`DemandModel`] variants.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Relative tolerance deciding a tie for the lowest price off the grid.
pub const TIE_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[serde(bound = "S: Scalar")]
pub enum DemandModel<S> {
    /// The cheapest firms split `total * (1 - a_min)` equally.
    AllOrNothing { total: S },
    /// Multinomial logit shares with an outside good.
    Logit {
        quality: Vec<S>,
        outside_quality: S,
        differentiation: S,
    },
    /// `intercept - own_slope * a_i + cross_slope * sum_{j != i} a_j`, floored at zero.
    Linear {
        intercept: S,
        own_slope: S,
        cross_slope: S,
    },
}

impl<S: Scalar> DemandModel<S> {
    pub fn name(&self) -> &'static str {
        match self {
            DemandModel::AllOrNothing { .. } => "all_or_nothing",
            DemandModel::Logit { .. } => "logit",
            DemandModel::Linear { .. } => "linear",
        }
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self, DemandModel::AllOrNothing { .. })
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            DemandModel::AllOrNothing { total } => {
                if !(total.is_finite() && *total > S::zero()) {
                    return invalid(format!("demand.total must be > 0, got {total}"));
                }
            }
            DemandModel::Logit {
                quality,
                outside_quality,
                differentiation,
            } => {
                if quality.len() != n {
                    return Err(Error::DimensionMismatch {
                        what: "demand.quality",
                        expected: n,
                        actual: quality.len(),
                    });
                }
                if let Some(q) = quality.iter().find(|q| !(q.is_finite() && **q > S::zero())) {
                    return invalid(format!("demand.quality entries must be > 0, got {q}"));
                }
                if !outside_quality.is_finite() {
                    return invalid("demand.outside_quality must be finite");
                }
                if !(differentiation.is_finite() && *differentiation > S::zero()) {
                    return invalid(format!(
                        "demand.differentiation must be > 0, got {differentiation}"
                    ));
                }
            }
            DemandModel::Linear {
                intercept,
                own_slope,
                cross_slope,
            } => {
                if !(intercept.is_finite() && *intercept > S::zero()) {
                    return invalid(format!("demand.intercept must be > 0, got {intercept}"));
                }
                if !(own_slope.is_finite() && *own_slope > S::zero()) {
                    return invalid(format!("demand.own_slope must be > 0, got {own_slope}"));
                }
                if !(cross_slope.is_finite() && *cross_slope >= S::zero()) {
                    return invalid(format!(
                        "demand.cross_slope must be >= 0, got {cross_slope}"
                    ));
                }
                let rivals = S::from_count(n.saturating_sub(1));
                if *cross_slope * rivals >= *own_slope {
                    return invalid(format!(
                        "demand.cross_slope * (n - 1) must be < own_slope ({} >= {own_slope})",
                        *cross_slope * rivals
                    ));
                }
            }
        }
        Ok(())
    }
}

/// A Bertrand stage game. The firm count is `costs.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMarketGame<S>", into = "RawMarketGame<S>")]
#[serde(bound = "S: Scalar")]
pub struct MarketGame<S> {
    costs: Vec<S>,
    demand: DemandModel<S>,
    lower: S,
    upper: S,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "S: Scalar")]
struct RawMarketGame<S> {
    costs: Vec<S>,
    demand: DemandModel<S>,
    price_interval: [S; 2],
}

impl<S: Scalar> TryFrom<RawMarketGame<S>> for MarketGame<S> {
    type Error = Error;
    fn try_from(raw: RawMarketGame<S>) -> Result<Self> {
        MarketGame::new(
            raw.costs,
            raw.demand,
            raw.price_interval[0],
            raw.price_interval[1],
        )
    }
}

impl<S: Scalar> From<MarketGame<S>> for RawMarketGame<S> {
    fn from(g: MarketGame<S>) -> Self {
        RawMarketGame {
            costs: g.costs,
            demand: g.demand,
            price_interval: [g.lower, g.upper],
        }
    }
}

impl<S: Scalar> MarketGame<S> {
    /// Validates and builds a game. A single firm is accepted so that the
    /// monopoly and best-response solvers can be run on one-firm problems.
    pub fn new(costs: Vec<S>, demand: DemandModel<S>, lower: S, upper: S) -> Result<Self> {
        if costs.is_empty() {
            return invalid("at least one firm is required");
        }
        if let Some(c) = costs.iter().find(|c| !(c.is_finite() && **c >= S::zero())) {
            return invalid(format!("costs must be finite and >= 0, got {c}"));
        }
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return invalid(format!(
                "price_interval must satisfy lo < hi, got [{lower}, {upper}]"
            ));
        }
        demand.validate(costs.len())?;
        Ok(MarketGame {
            costs,
            demand,
            lower,
            upper,
        })
    }

    pub fn n(&self) -> usize {
        self.costs.len()
    }

    pub fn costs(&self) -> &[S] {
        &self.costs
    }

    pub fn demand_model(&self) -> &DemandModel<S> {
        &self.demand
    }

    pub fn interval(&self) -> (S, S) {
        (self.lower, self.upper)
    }

    pub fn midpoint(&self) -> S {
        (self.lower + self.upper) / S::lit(2.0)
    }

    /// Same game with another price interval.
    pub fn with_interval(&self, lower: S, upper: S) -> Result<Self> {
        MarketGame::new(self.costs.clone(), self.demand.clone(), lower, upper)
    }

    /// True when all firms are interchangeable.
    pub fn is_symmetric(&self) -> bool {
        let c0 = self.costs[0];
        let same_cost = self.costs.iter().all(|c| *c == c0);
        match &self.demand {
            DemandModel::Logit { quality, .. } => {
                same_cost && quality.iter().all(|q| *q == quality[0])
            }
            _ => same_cost,
        }
    }

    fn check(&self, prices: &[S]) -> Result<()> {
        if prices.len() != self.n() {
            return Err(Error::DimensionMismatch {
                what: "price profile",
                expected: self.n(),
                actual: prices.len(),
            });
        }
        if prices.iter().any(|p| !p.is_finite()) {
            return invalid("price profile entries must be finite");
        }
        Ok(())
    }

    /// Demand of every firm at `prices`.
    pub fn demand(&self, prices: &[S]) -> Result<Vec<S>> {
        self.check(prices)?;
        let mut out = vec![S::zero(); self.n()];
        self.demand_into(prices, &mut out);
        Ok(out)
    }

    /// Unchecked demand evaluation into a caller buffer of length `n`.
    pub fn demand_into(&self, prices: &[S], out: &mut [S]) {
        match &self.demand {
            DemandModel::AllOrNothing { total } => {
                let a_min = prices.iter().copied().fold(S::infinity(), S::min);
                let tol = S::lit(TIE_RTOL) * S::one().max(a_min.abs());
                let is_min = |p: S| p == a_min || (p - a_min).abs() <= tol;
                let n_min = prices.iter().filter(|p| is_min(**p)).count();
                let served = (*total * (S::one() - a_min)).max(S::zero());
                let each = served / S::from_count(n_min);
                for (d, p) in out.iter_mut().zip(prices) {
                    *d = if is_min(*p) { each } else { S::zero() };
                }
            }
            DemandModel::Logit {
                quality,
                outside_quality,
                differentiation,
            } => {
                let mu = *differentiation;
                let shift = quality
                    .iter()
                    .zip(prices)
                    .map(|(q, p)| (*q - *p) / mu)
                    .fold(*outside_quality / mu, S::max);
                let mut denom = (*outside_quality / mu - shift).exp();
                for ((d, q), p) in out.iter_mut().zip(quality).zip(prices) {
                    *d = ((*q - *p) / mu - shift).exp();
                    denom = denom + *d;
                }
                for d in out.iter_mut() {
                    *d = *d / denom;
                }
            }
            DemandModel::Linear {
                intercept,
                own_slope,
                cross_slope,
            } => {
                let total: S = prices.iter().copied().sum();
                for (d, p) in out.iter_mut().zip(prices) {
                    let rivals = total - *p;
                    *d = (*intercept - *own_slope * *p + *cross_slope * rivals).max(S::zero());
                }
            }
        }
    }

    /// Demands and profits at `prices`.
    pub fn payoff(&self, prices: &[S]) -> Result<MarketOutcome<S>> {
        self.check(prices)?;
        let mut demands = vec![S::zero(); self.n()];
        let mut profits = vec![S::zero(); self.n()];
        self.payoff_into(prices, &mut demands, &mut profits);
        Ok(MarketOutcome { demands, profits })
    }

    /// Unchecked payoff evaluation into caller buffers.
    pub fn payoff_into(&self, prices: &[S], demands: &mut [S], profits: &mut [S]) {
        self.demand_into(prices, demands);
        for i in 0..prices.len() {
            profits[i] = demands[i] * (prices[i] - self.costs[i]);
        }
    }

    /// Profit of firm `i` alone; allocates, meant for solvers and diagnostics.
    pub fn profit_of(&self, i: usize, prices: &[S]) -> S {
        let mut d = vec![S::zero(); self.n()];
        self.demand_into(prices, &mut d);
        d[i] * (prices[i] - self.costs[i])
    }
}

/// A price vector, one entry per firm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent, bound = "S: Scalar")]
pub struct PriceProfile<S>(pub Vec<S>);

impl<S> std::ops::Deref for PriceProfile<S> {
    type Target = [S];
    fn deref(&self) -> &[S] {
        &self.0
    }
}

impl<S> From<Vec<S>> for PriceProfile<S> {
    fn from(v: Vec<S>) -> Self {
        PriceProfile(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarketOutcome<S> {
    pub demands: Vec<S>,
    pub profits: Vec<S>,
}

/// Uniform discretization of a price interval. Agents act on indices into it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ActionGrid<S> {
    points: Vec<S>,
}

impl<S: Scalar> ActionGrid<S> {
    /// `m` equally spaced points from `lower` to `upper` inclusive.
    pub fn uniform(lower: S, upper: S, m: usize) -> Result<Self> {
        if m < 2 {
            return invalid(format!("grid needs at least 2 points, got {m}"));
        }
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return invalid(format!(
                "grid interval must satisfy lo < hi, got [{lower}, {upper}]"
            ));
        }
        let span = upper - lower;
        let last = S::from_count(m - 1);
        let mut points: Vec<S> = (0..m)
            .map(|k| lower + span * S::from_count(k) / last)
            .collect();
        points[m - 1] = upper;
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("grid resolution below scalar precision");
        }
        Ok(ActionGrid { points })
    }

    /// Builds a grid from explicit strictly increasing points.
    pub fn from_points(points: Vec<S>) -> Result<Self> {
        if points.len() < 2 {
            return invalid("grid needs at least 2 points");
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("grid points must be finite and strictly increasing");
        }
        Ok(ActionGrid { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[S] {
        &self.points
    }

    pub fn price(&self, index: usize) -> S {
        self.points[index]
    }

    pub fn lower(&self) -> S {
        self.points[0]
    }

    pub fn upper(&self) -> S {
        self.points[self.points.len() - 1]
    }

    /// Largest gap between consecutive points.
    pub fn step(&self) -> S {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(S::zero(), S::max)
    }

    /// Index of the point nearest to `price`, lowest index on ties.
    pub fn nearest(&self, price: S) -> usize {
        let mut best = 0;
        for (k, p) in self.points.iter().enumerate() {
            if (*p - price).abs() < (self.points[best] - price).abs() {
                best = k;
            }
        }
        best
    }
}

/// `m` equally spaced points on `[a_lo, a_hi]`.
pub fn make_grid<S: Scalar>(a_lo: S, a_hi: S, m: usize) -> Result<ActionGrid<S>> {
    ActionGrid::uniform(a_lo, a_hi, m)
}

/// Extends `[nash, monopoly]` by `extension * (monopoly - nash)` on both sides.
pub fn bound_grid_to_equilibria<S: Scalar>(nash: S, monopoly: S, extension: S) -> Result<(S, S)> {
    if !(nash < monopoly) {
        return invalid(format!("need nash < monopoly, got {nash} >= {monopoly}"));
    }
    if !(extension >= S::zero()) {
        return invalid(format!("grid extension must be >= 0, got {extension}"));
    }
    let width = monopoly - nash;
    Ok((nash - extension * width, monopoly + extension * width))
}
