//! Static benchmarks and game-theoretic certificates.

mod continuous;
mod discrete;
mod monotone;

pub use continuous::{
    best_response_linear, best_response_logit, compute_benchmarks, logit_monopoly_foc_residual,
    logit_nash_foc_residual, monopoly_all_or_nothing, nash_all_or_nothing, solve_monopoly_linear,
    solve_monopoly_logit, solve_nash_linear, solve_nash_logit, Benchmarks, EquilibriumResult,
};
pub use discrete::{
    brute_force_discrete_nash, check_cce, check_exact_potential, classic, discretize, DiscreteGame,
    JointDistribution, PotentialCheck, DEFAULT_PROFILE_CAP,
};
pub use monotone::{
    check_monotonicity, monotonicity_inner_product, pseudo_gradient, MonotonicityReport, FD_STEP,
};
