use crate::equilibrium::pseudo_gradient;
use crate::error::Result;
use crate::market::MarketGame;
use crate::scalar::Scalar;

/// One projected gradient ascent step for every firm.
pub fn gradient_step<S: Scalar>(step: S, prices: &[S], game: &MarketGame<S>) -> Result<Vec<S>> {
    let g = pseudo_gradient(game, prices)?;
    let (lo, hi) = game.interval();
    Ok(prices
        .iter()
        .zip(g)
        .map(|(p, d)| (*p + step * d).max(lo).min(hi))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientRun<S> {
    pub prices: Vec<S>,
    /// Prices after every step, starting with the initial profile.
    pub path: Vec<Vec<S>>,
    pub steps: usize,
}

/// Iterates [`gradient_step`] from `start` until `stop` accepts a profile or
/// `max_steps` is reached.
pub fn run_gradient_ascent<S: Scalar>(
    game: &MarketGame<S>,
    step: S,
    start: &[S],
    max_steps: usize,
    mut stop: impl FnMut(&[S]) -> bool,
) -> Result<GradientRun<S>> {
    let mut prices = start.to_vec();
    let mut path = vec![prices.clone()];
    let mut steps = 0;
    while steps < max_steps && !stop(&prices) {
        prices = gradient_step(step, &prices, game)?;
        path.push(prices.clone());
        steps += 1;
    }
    Ok(GradientRun {
        prices,
        path,
        steps,
    })
}
