//! Episode runner, regret estimators, Monte Carlo aggregation and the
//! trace-level checks.

pub mod decomposition;
pub mod episode;
pub mod fit;
pub mod growth;
pub mod montecarlo;
pub mod regret;

pub use decomposition::{regret_decomposition_check, DecompositionReport};
pub use episode::{run_episode, EpisodeConfig, EpisodeSeed, EpisodeTrace, StepDetail, StepRecord};
pub use fit::{fit_rate, RateFit};
pub use growth::{growth_check, GrowthReport};
pub use montecarlo::{monte_carlo, MonteCarloConfig, RegretReport, SeedSummary};
pub use regret::{
    checkpoint_grid, coupled_regret, default_checkpoints, empirical_regret, expected_oracle_cost, optimal_cost_rate,
};
