//! Static benchmarks of a configured game, with optional diagnostics.

use std::fmt::Write as _;

use anyhow::{ensure, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use collusion_core::agents::run_gradient_ascent;
use collusion_core::equilibrium::{
    brute_force_discrete_nash, check_exact_potential, check_monotonicity, compute_benchmarks,
    discretize, Benchmarks,
};
use collusion_core::{ActionGrid, Market};

use crate::runner::PROFILE_CAP;

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Grid size for the brute-force discrete cross-check.
    pub discrete_check: Option<usize>,
    pub diagnostics: bool,
    /// Step size for projected gradient ascent from the interval midpoint.
    pub gradient: Option<f64>,
}

const DIAGNOSTIC_POINTS: usize = 21;
const MONOTONICITY_PAIRS: usize = 2_000;
const GRADIENT_STEPS: usize = 100_000;

pub fn solve(game: &Market, opts: &SolveOptions) -> Result<(Benchmarks<f64>, String)> {
    let b = compute_benchmarks(game, 1e-12, 1_000)?;
    let mut s = String::new();
    for (name, r) in [("Nash", &b.nash), ("monopoly", &b.monopoly)] {
        writeln!(
            s,
            "{name:<9} prices {:?}  residual {:.2e}  iterations {}{}",
            r.prices.0,
            r.residual,
            r.iterations,
            if r.converged { "" } else { "  NOT CONVERGED" }
        )?;
    }

    if let Some(m) = opts.discrete_check {
        ensure!(m >= 2, "--discrete-check needs at least 2 points");
        let (lo, hi) = game.interval();
        let grid = ActionGrid::uniform(lo, hi, m)?;
        let dg = discretize(game, &grid, PROFILE_CAP)?;
        let steps_from = |profile: &[usize], target: &[f64]| {
            profile
                .iter()
                .zip(target)
                .map(|(a, p)| (grid.price(*a) - p).abs() / grid.step())
                .fold(0.0, f64::max)
        };
        let ne = brute_force_discrete_nash(&dg);
        let nearest = ne
            .iter()
            .map(|p| steps_from(p, &b.nash.prices.0))
            .fold(f64::INFINITY, f64::min);
        writeln!(
            s,
            "discrete check on {m} points: {} pure equilibria, nearest {nearest:.3} grid steps from Nash",
            ne.len()
        )?;
        let best = (0..dg.profiles())
            .max_by(|a, c| {
                let sum = |k: usize| dg.payoffs_at(k).iter().sum::<f64>();
                sum(*a).total_cmp(&sum(*c))
            })
            .unwrap_or(0);
        writeln!(
            s,
            "  joint-profit maximum {:.3} grid steps from monopoly",
            steps_from(&dg.profile_of(best), &b.monopoly.prices.0)
        )?;
    }

    if opts.diagnostics {
        let (lo, hi) = game.interval();
        let m = opts.discrete_check.unwrap_or(DIAGNOSTIC_POINTS);
        let dg = discretize(game, &ActionGrid::uniform(lo, hi, m)?, PROFILE_CAP)?;
        let pot = check_exact_potential(&dg, 1e-9);
        writeln!(
            s,
            "exact potential on {m} points: {} (largest cycle defect {:.3e})",
            if pot.is_potential { "yes" } else { "no" },
            pot.max_defect
        )?;
        if game.demand_model().is_differentiable() {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let mono = check_monotonicity(game, MONOTONICITY_PAIRS, 0.0, &mut rng)?;
            writeln!(
                s,
                "strict monotonicity on {} sampled pairs: {} (inner products in [{:.3e}, {:.3e}])",
                mono.pairs,
                if mono.monotone_on_sample {
                    "holds"
                } else {
                    "violated"
                },
                mono.min_inner_product,
                mono.max_inner_product
            )?;
        } else {
            writeln!(
                s,
                "strict monotonicity: not applicable to {} demand",
                game.demand_model().name()
            )?;
        }
    }

    if let Some(step) = opts.gradient {
        ensure!(
            step > 0.0 && step.is_finite(),
            "--gradient step must be > 0"
        );
        let start = vec![game.midpoint(); game.n()];
        let mut previous: Option<Vec<f64>> = None;
        let run = run_gradient_ascent(game, step, &start, GRADIENT_STEPS, |p| {
            let settled = previous
                .as_ref()
                .is_some_and(|q| q.iter().zip(p).all(|(a, b)| (a - b).abs() <= 1e-13));
            previous = Some(p.to_vec());
            settled
        })?;
        let gap = run
            .prices
            .iter()
            .zip(&b.nash.prices.0)
            .map(|(a, c)| (a - c).abs())
            .fold(0.0, f64::max);
        writeln!(
            s,
            "gradient ascent (step {step}): {:?} after {} steps, {gap:.3e} from Nash",
            run.prices, run.steps
        )?;
    }
    Ok((b, s))
}
