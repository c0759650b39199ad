//! Hybrid model-based/model-free tabular reinforcement learning on grid worlds.
//!
//! A depth-limited expectimax planner and a Q-learning process share one
//! look-up table (learned transition counts, `V`, and `Q`). Arbitration rules
//! decide which process acts at each step, and the harness runs seeded
//! experiments, charges a simulated response-time cost per step, and writes
//! learning curves.
//!
//! All numeric types are generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below are the usual entry points.

pub mod arbitration;
mod argmax;
pub mod error;
pub mod gridworld;
pub mod harness;
pub mod learner;
pub mod oracle;
pub mod planner;
pub mod scalar;
pub mod table;

pub use arbitration::{
    run_controller_step, select_mode_interleaved, select_mode_uncertainty, select_mode_weighted,
    Controller, ControllerSpec, ControllerStep, ModeTag, StepContext, UncertaintyTracker,
    WeightSchedule,
};
pub use error::{Error, Result};
pub use gridworld::{Action, Coord, GridWorld, StateId, Transition};
pub use harness::{
    run_experiment, run_trial, summarize, write_comparison_csv, AgentParams, Experiment,
    ExperimentResult, SeedRun, Stat, Summary, TrialRecord,
};
pub use learner::{greedy_action, greedy_policy_rollout, mf_step, ExplorationPolicy, Rollout};
pub use oracle::{bfs_shortest_path, value_iteration, OracleSolution};
pub use planner::{dls_plan, mb_step, root_estimates, PlanResult, PlannerConfig, StepOutcome};
pub use scalar::Scalar;
pub use table::{LookupTable, TableSnapshot};

pub type GridWorld64 = GridWorld<f64>;
pub type GridWorld32 = GridWorld<f32>;
pub type LookupTable64 = LookupTable<f64>;
pub type LookupTable32 = LookupTable<f32>;
pub type Experiment64 = Experiment<f64>;
pub type Experiment32 = Experiment<f32>;
pub type PlanResult64 = PlanResult<f64>;
pub type OracleSolution64 = OracleSolution<f64>;
