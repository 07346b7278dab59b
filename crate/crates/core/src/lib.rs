//! Repeated Bertrand pricing games played by learning agents.
//!
//! The crate covers the stage game ([`market`]), its static benchmarks and
//! certificates ([`equilibrium`]), the learning rules ([`agents`]), the
//! repeated-game simulator with its metrics ([`sim`]) and artifact formats
//! ([`io`]).
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`). The
//! aliases below fix `f64`, which is what the experiments use.
//!
//! ```
//! use collusion_core::{DemandModel, Market};
//!
//! let game = Market::new(
//!     vec![1.0, 1.0],
//!     DemandModel::Logit { quality: vec![2.0, 2.0], outside_quality: 0.0, differentiation: 0.25 },
//!     1.0,
//!     2.5,
//! )
//! .unwrap();
//! let nash = collusion_core::equilibrium::solve_nash_logit(&game, 1e-12, 1_000).unwrap();
//! assert!((nash.prices[0] - 1.4729266600306227).abs() < 1e-9);
//! ```

pub mod agents;
pub mod equilibrium;
pub mod error;
pub mod io;
pub mod market;
mod scalar;
pub mod seeding;
pub mod sim;

pub use agents::{Agent, AgentSpec, ExplorationSchedule, QInit, StateMode, UpdateMode};
pub use error::{Error, Result};
pub use market::{ActionGrid, DemandModel, MarketGame, MarketOutcome, PriceProfile};
pub use scalar::Scalar;
pub use sim::{Environment, EpisodeOutcome, SimConfig, StageRecord, Termination, Trace};

pub type Market = MarketGame<f64>;
pub type Grid = ActionGrid<f64>;
pub type Demand = DemandModel<f64>;
pub type Spec = AgentSpec<f64>;
pub type Config = SimConfig<f64>;
pub type Env = Environment<f64>;
pub type Record = StageRecord<f64>;

pub type MarketF32 = MarketGame<f32>;
pub type ConfigF32 = SimConfig<f32>;
