//! Experiment runner: scenario files, seeded trial scheduling, reference
//! oracles and CSV output.

pub mod config;
pub mod exec;
pub mod experiments;
pub mod oracle;

pub use config::{load_config, parse_config, parse_sweep, Experiment, ExperimentSpec, SweepAxis};
pub use exec::{map_trials, map_trials_sequential, thread_cap, trial_rng, THREADS_ENV};
pub use experiments::{build_table, crossover, run_experiment, RunStats, Table};
pub use oracle::{lp_fixed_point_oracle, macro_kkt_oracle, KktSolution};
