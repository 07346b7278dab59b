//! Sampled strict-monotonicity diagnostic on the pseudo-gradient.

use rand::Rng;

use crate::error::{Error, Result};
use crate::market::MarketGame;
use crate::scalar::Scalar;

/// Relative finite-difference step, as a fraction of the interval width.
pub const FD_STEP: f64 = 1e-6;

fn require_smooth<S: Scalar>(game: &MarketGame<S>, operation: &'static str) -> Result<()> {
    if game.demand_model().is_differentiable() {
        Ok(())
    } else {
        Err(Error::UnsupportedModel {
            operation,
            required: "a differentiable demand model (logit or linear)",
        })
    }
}

/// Vector of own-price profit derivatives by central finite differences.
pub fn pseudo_gradient<S: Scalar>(game: &MarketGame<S>, prices: &[S]) -> Result<Vec<S>> {
    require_smooth(game, "pseudo_gradient")?;
    if prices.len() != game.n() {
        return Err(Error::DimensionMismatch {
            what: "price profile",
            expected: game.n(),
            actual: prices.len(),
        });
    }
    let (lo, hi) = game.interval();
    let h = (hi - lo) * S::lit(FD_STEP);
    let mut p = prices.to_vec();
    Ok((0..game.n())
        .map(|i| {
            let x = prices[i];
            p[i] = x + h;
            let up = game.profit_of(i, &p);
            p[i] = x - h;
            let down = game.profit_of(i, &p);
            p[i] = x;
            (up - down) / (h + h)
        })
        .collect())
}

/// `<g(x) - g(y), x - y>`; zero when `x == y`.
pub fn monotonicity_inner_product<S: Scalar>(game: &MarketGame<S>, x: &[S], y: &[S]) -> Result<S> {
    if x == y {
        require_smooth(game, "monotonicity_inner_product")?;
        return Ok(S::zero());
    }
    let gx = pseudo_gradient(game, x)?;
    let gy = pseudo_gradient(game, y)?;
    Ok((0..x.len()).map(|i| (gx[i] - gy[i]) * (x[i] - y[i])).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityReport<S> {
    /// Every sampled pair satisfied `<g(x) - g(y), x - y> <= -tol * |x - y|^2`.
    pub monotone_on_sample: bool,
    /// Smallest inner product over non-degenerate pairs (largest value is the
    /// one closest to violating; see `max_inner_product`).
    pub min_inner_product: S,
    pub max_inner_product: S,
    pub pairs: usize,
}

/// Draws `sample_pairs` profile pairs uniformly from the price box and
/// evaluates the strict-monotonicity inequality on each.
pub fn check_monotonicity<S: Scalar, R: Rng + ?Sized>(
    game: &MarketGame<S>,
    sample_pairs: usize,
    tol: S,
    rng: &mut R,
) -> Result<MonotonicityReport<S>> {
    require_smooth(game, "check_monotonicity")?;
    if sample_pairs == 0 {
        return Err(Error::InvalidInput("sample_pairs must be >= 1".into()));
    }
    let (lo, hi) = game.interval();
    let n = game.n();
    let draw = |rng: &mut R| -> Vec<S> {
        (0..n)
            .map(|_| lo + (hi - lo) * S::lit(rng.random::<f64>()))
            .collect()
    };
    let mut report = MonotonicityReport {
        monotone_on_sample: true,
        min_inner_product: S::infinity(),
        max_inner_product: S::neg_infinity(),
        pairs: 0,
    };
    for _ in 0..sample_pairs {
        let x = draw(rng);
        let y = draw(rng);
        let dist2: S = x.iter().zip(&y).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
        if dist2 == S::zero() {
            continue;
        }
        let v = monotonicity_inner_product(game, &x, &y)?;
        report.pairs += 1;
        report.min_inner_product = report.min_inner_product.min(v);
        report.max_inner_product = report.max_inner_product.max(v);
        if v > -tol * dist2 {
            report.monotone_on_sample = false;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::DemandModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn one_firm_logit() -> MarketGame<f64> {
        MarketGame::new(
            vec![1.0],
            DemandModel::Logit {
                quality: vec![2.0],
                outside_quality: 0.0,
                differentiation: 0.25,
            },
            1.0,
            2.2,
        )
        .unwrap()
    }

    #[test]
    fn degenerate_pair_is_zero() {
        let g = one_firm_logit();
        assert_eq!(monotonicity_inner_product(&g, &[1.5], &[1.5]).unwrap(), 0.0);
    }

    #[test]
    fn gradient_matches_analytic_logit_derivative() {
        let g = one_firm_logit();
        let p = 1.6;
        let d = g.demand(&[p]).unwrap()[0];
        let analytic = d - (p - 1.0) * d * (1.0 - d) / 0.25;
        let fd = pseudo_gradient(&g, &[p]).unwrap()[0];
        assert!((fd - analytic).abs() < 1e-6, "{fd} vs {analytic}");
    }

    #[test]
    fn one_firm_logit_is_monotone_where_concave() {
        let g = one_firm_logit();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let r = check_monotonicity(&g, 500, 1e-6, &mut rng).unwrap();
        assert!(r.monotone_on_sample, "{r:?}");
        assert!(r.max_inner_product < 0.0);
    }

    #[test]
    fn independent_linear_duopoly_is_monotone() {
        let g = MarketGame::new(
            vec![0.1, 0.1],
            DemandModel::Linear {
                intercept: 1.0,
                own_slope: 1.0,
                cross_slope: 0.0,
            },
            0.0,
            1.0,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = check_monotonicity(&g, 500, 1e-3, &mut rng).unwrap();
        assert!(r.monotone_on_sample);
        // Each own second derivative is -2 * own_slope, so <g(x)-g(y), x-y> = -2 |x-y|^2.
        let v = monotonicity_inner_product(&g, &[0.2, 0.7], &[0.5, 0.3]).unwrap();
        assert!((v + 2.0f64 * (0.09 + 0.16)).abs() < 1e-6, "{v}");
    }

    #[test]
    fn all_or_nothing_unsupported() {
        let g = MarketGame::new(
            vec![0.0, 0.0],
            DemandModel::AllOrNothing { total: 1.0 },
            0.0,
            1.0,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            check_monotonicity(&g, 10, 0.0, &mut rng),
            Err(Error::UnsupportedModel { .. })
        ));
    }
}
