//! Trial and experiment runner, response-time cost model, and summaries.
//!
//! A trial runs the controller from the start state until the goal or the
//! step cap. Response time is simulated effort: each model-free step costs
//! one unit and each planner invocation costs its node expansions. Wall-clock
//! time is kept on the in-memory records only and never serialized.

use std::fs;
use std::ops::RangeInclusive;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arbitration::{Controller, ControllerSpec, ModeTag, StepContext};
use crate::error::{invalid, Result};
use crate::gridworld::GridWorld;
use crate::learner::{greedy_policy_rollout, ExplorationPolicy, Rollout};
use crate::planner::PlannerConfig;
use crate::scalar::Scalar;
use crate::table::LookupTable;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub discount: f64,
    pub learning_rate: f64,
    pub exploration: ExplorationPolicy,
    pub planner: PlannerConfig,
    /// Trials are cut off (and flagged) after this many steps.
    pub step_cap: usize,
}

impl Default for AgentParams {
    fn default() -> Self {
        AgentParams {
            discount: 0.9,
            learning_rate: 0.1,
            exploration: ExplorationPolicy::default(),
            planner: PlannerConfig::default(),
            step_cap: 10_000,
        }
    }
}

impl AgentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(invalid("gamma", "must lie in (0, 1)"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(invalid("alpha", "must lie in (0, 1]"));
        }
        self.exploration.validate()?;
        if self.planner.depth == 0 {
            return Err(invalid("depth", "must be at least 1"));
        }
        if self.planner.node_budget == 0 {
            return Err(invalid("node_budget", "must be positive"));
        }
        if self.step_cap == 0 {
            return Err(invalid("step_cap", "must be positive"));
        }
        Ok(())
    }

    pub fn fresh_table<T: Scalar>(&self, world: &GridWorld<T>) -> Result<LookupTable<T>> {
        LookupTable::init(world, T::lit(self.discount), T::lit(self.learning_rate))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u32,
    pub steps: usize,
    /// Sum of per-step costs in effort units.
    pub simulated_time: u64,
    pub mean_response_time: f64,
    pub mb_steps: usize,
    pub truncated: bool,
    #[serde(skip)]
    pub mode_tags: Vec<ModeTag>,
    #[serde(skip)]
    pub step_costs: Vec<u64>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl TrialRecord {
    pub fn mb_fraction(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.mb_steps as f64 / self.steps as f64
        }
    }
}

/// Runs trial `i` from the start state with the given controller and table.
pub fn run_trial<T: Scalar>(
    controller: &mut Controller,
    world: &GridWorld<T>,
    table: &mut LookupTable<T>,
    i: u32,
    params: &AgentParams,
    rng: &mut ChaCha8Rng,
) -> Result<TrialRecord> {
    let began = Instant::now();
    let ctx = StepContext {
        planner: params.planner,
        epsilon: params.exploration.epsilon_after(i.saturating_sub(1)),
    };
    let mut s = world.start();
    let mut mode_tags = Vec::new();
    let mut step_costs = Vec::new();
    let mut truncated = false;
    while !world.is_terminal(s) {
        if mode_tags.len() >= params.step_cap {
            truncated = true;
            break;
        }
        let j = mode_tags.len() as u64;
        let step = controller.step(table, world, s, i, j, &ctx, rng)?;
        mode_tags.push(step.mode);
        step_costs.push(step.cost);
        s = step.outcome.transition.next;
    }
    let steps = mode_tags.len();
    let simulated_time: u64 = step_costs.iter().sum();
    Ok(TrialRecord {
        trial_index: i,
        steps,
        simulated_time,
        mean_response_time: if steps == 0 {
            0.0
        } else {
            simulated_time as f64 / steps as f64
        },
        mb_steps: mode_tags.iter().filter(|&&m| m == ModeTag::Mb).count(),
        truncated,
        mode_tags,
        step_costs,
        wall_time: began.elapsed(),
    })
}

/// Full description of one experiment: a fresh table per seed, then
/// `trials` sequential trials sharing that table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Experiment<T> {
    pub world: GridWorld<T>,
    pub controller: ControllerSpec,
    pub params: AgentParams,
    pub trials: u32,
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub trials: Vec<TrialRecord>,
    /// Greedy rollout length after the last trial; deterministic worlds only.
    pub final_rollout: Option<Rollout>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub controller: String,
    pub exploration: String,
    pub response_time: String,
    pub arbitration_note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub fingerprint: String,
    pub metadata: Metadata,
    pub per_seed: Vec<SeedRun>,
    pub summary: Summary,
}

impl<T: Scalar> Experiment<T> {
    pub fn new(
        world: GridWorld<T>,
        controller: ControllerSpec,
        params: AgentParams,
        trials: u32,
        seeds: Vec<u64>,
    ) -> Self {
        Experiment {
            world,
            controller,
            params,
            trials,
            seeds,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "at least one seed is required"));
        }
        self.controller.validate()?;
        self.params.validate()
    }

    /// SHA-256 of the canonical JSON form of the configuration.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("experiment serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn metadata(&self) -> Metadata {
        let arbitration_note = match self.controller {
            ControllerSpec::Uncertainty { .. } => Some(
                "simplified reliability arbitration: exponentially smoothed prediction errors, not posterior inference".into(),
            ),
            ControllerSpec::Weighted { .. } => Some(
                "planner runs every step; its node expansions are charged even on MF-tagged steps".into(),
            ),
            _ => None,
        };
        Metadata {
            controller: self.controller.name().into(),
            exploration: self.params.exploration.label().into(),
            response_time: "simulated effort: planner node expansions per MB step, 1 per MF step"
                .into(),
            arbitration_note,
        }
    }

    /// Runs trials `1..=upto` for one seed, returning the records and final table.
    pub fn run_seed_until(
        &self,
        seed: u64,
        upto: u32,
    ) -> Result<(Vec<TrialRecord>, LookupTable<T>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = self.params.fresh_table(&self.world)?;
        let mut controller = Controller::new(self.controller)?;
        let mut records = Vec::with_capacity(upto as usize);
        for i in 1..=upto {
            records.push(run_trial(
                &mut controller,
                &self.world,
                &mut table,
                i,
                &self.params,
                &mut rng,
            )?);
        }
        Ok((records, table))
    }

    pub fn run_seed(&self, seed: u64) -> Result<(SeedRun, LookupTable<T>)> {
        let (trials, table) = self.run_seed_until(seed, self.trials)?;
        let final_rollout = self
            .world
            .is_deterministic()
            .then(|| greedy_policy_rollout(&table, &self.world, self.world.num_states() * 4));
        Ok((
            SeedRun {
                seed,
                trials,
                final_rollout,
            },
            table,
        ))
    }

    /// Table state after `after_trial` trials of `seed`; zero gives the initial table.
    pub fn replay_table(&self, seed: u64, after_trial: u32) -> Result<LookupTable<T>> {
        if after_trial > self.trials {
            return Err(invalid(
                "after_trial",
                format!("exceeds the {} configured trials", self.trials),
            ));
        }
        Ok(self.run_seed_until(seed, after_trial)?.1)
    }

    /// Runs every seed. The result does not depend on `parallel`.
    pub fn run(&self, parallel: bool) -> Result<ExperimentResult> {
        self.validate()?;
        let per_seed: Vec<SeedRun> = if parallel {
            self.seeds
                .par_iter()
                .map(|&seed| self.run_seed(seed).map(|r| r.0))
                .collect::<Result<_>>()?
        } else {
            self.seeds
                .iter()
                .map(|&seed| self.run_seed(seed).map(|r| r.0))
                .collect::<Result<_>>()?
        };
        let summary = summarize_runs(&per_seed);
        Ok(ExperimentResult {
            fingerprint: self.fingerprint(),
            metadata: self.metadata(),
            per_seed,
            summary,
        })
    }
}

/// Runs an experiment with seeds spread over the rayon pool.
pub fn run_experiment<T: Scalar>(
    controller: ControllerSpec,
    world: &GridWorld<T>,
    trials: u32,
    seeds: &[u64],
    params: AgentParams,
) -> Result<ExperimentResult> {
    Experiment::new(world.clone(), controller, params, trials, seeds.to_vec()).run(true)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Stat {
        if xs.is_empty() {
            return Stat::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Stat {
            mean,
            std: var.sqrt(),
        }
    }

    pub fn band(&self) -> (f64, f64) {
        (self.mean - self.std, self.mean + self.std)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: u32,
    pub steps: Stat,
    pub simulated_time: Stat,
    pub mean_response_time: Stat,
    pub mb_fraction: Stat,
    pub truncated: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub per_trial: Vec<TrialSummary>,
    /// Number of trailing trials compared against the first trial.
    pub window: usize,
    pub first_trial_response_time: f64,
    pub last_window_response_time: f64,
    pub response_time_ratio: f64,
    pub first_trial_steps: f64,
    pub last_window_steps: f64,
    pub steps_ratio: f64,
}

impl Summary {
    pub fn trial(&self, i: u32) -> Option<&TrialSummary> {
        self.per_trial.get(i.checked_sub(1)? as usize)
    }

    /// Mean over trial indices in `range` of a seed-averaged metric.
    pub fn window_mean(
        &self,
        range: RangeInclusive<u32>,
        metric: impl Fn(&TrialSummary) -> f64,
    ) -> f64 {
        let xs: Vec<f64> = range.filter_map(|i| self.trial(i)).map(metric).collect();
        Stat::of(&xs).mean
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn summarize_runs(per_seed: &[SeedRun]) -> Summary {
    let trials = per_seed.iter().map(|r| r.trials.len()).min().unwrap_or(0);
    let column = |t: usize, f: &dyn Fn(&TrialRecord) -> f64| {
        let xs: Vec<f64> = per_seed.iter().map(|r| f(&r.trials[t])).collect();
        Stat::of(&xs)
    };
    let per_trial: Vec<TrialSummary> = (0..trials)
        .map(|t| TrialSummary {
            trial: t as u32 + 1,
            steps: column(t, &|r| r.steps as f64),
            simulated_time: column(t, &|r| r.simulated_time as f64),
            mean_response_time: column(t, &|r| r.mean_response_time),
            mb_fraction: column(t, &|r| r.mb_fraction()),
            truncated: per_seed.iter().filter(|r| r.trials[t].truncated).count(),
        })
        .collect();
    let window = trials.min(10);
    let tail = &per_trial[trials - window..];
    let tail_mean =
        |f: fn(&TrialSummary) -> f64| Stat::of(&tail.iter().map(f).collect::<Vec<_>>()).mean;
    let (first_rt, first_steps) = per_trial
        .first()
        .map_or((0.0, 0.0), |t| (t.mean_response_time.mean, t.steps.mean));
    let last_rt = tail_mean(|t| t.mean_response_time.mean);
    let last_steps = tail_mean(|t| t.steps.mean);
    Summary {
        per_trial,
        window,
        first_trial_response_time: first_rt,
        last_window_response_time: last_rt,
        response_time_ratio: ratio(last_rt, first_rt),
        first_trial_steps: first_steps,
        last_window_steps: last_steps,
        steps_ratio: ratio(last_steps, first_steps),
    }
}

/// Per-trial-index cross-seed statistics and first-vs-last ratios.
pub fn summarize(result: &ExperimentResult) -> Summary {
    summarize_runs(&result.per_seed)
}

impl ExperimentResult {
    /// Per-seed mean of `metric` over trial indices in `range`.
    pub fn per_seed_window(
        &self,
        range: RangeInclusive<u32>,
        metric: impl Fn(&TrialRecord) -> f64,
    ) -> Vec<f64> {
        self.per_seed
            .iter()
            .map(|run| {
                let xs: Vec<f64> = run
                    .trials
                    .iter()
                    .filter(|r| range.contains(&r.trial_index))
                    .map(&metric)
                    .collect();
                Stat::of(&xs).mean
            })
            .collect()
    }

    pub fn write_trials_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "seed",
            "trial",
            "steps",
            "simulated_time",
            "mean_response_time",
            "mb_fraction",
            "truncated",
        ])?;
        for run in &self.per_seed {
            for r in &run.trials {
                w.write_record([
                    run.seed.to_string(),
                    r.trial_index.to_string(),
                    r.steps.to_string(),
                    r.simulated_time.to_string(),
                    r.mean_response_time.to_string(),
                    r.mb_fraction().to_string(),
                    r.truncated.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "trial",
            "steps_mean",
            "steps_std",
            "simulated_time_mean",
            "simulated_time_std",
            "mean_response_time_mean",
            "mean_response_time_std",
            "mb_fraction_mean",
            "mb_fraction_std",
            "truncated",
        ])?;
        for t in &self.summary.per_trial {
            w.write_record([
                t.trial.to_string(),
                t.steps.mean.to_string(),
                t.steps.std.to_string(),
                t.simulated_time.mean.to_string(),
                t.simulated_time.std.to_string(),
                t.mean_response_time.mean.to_string(),
                t.mean_response_time.std.to_string(),
                t.mb_fraction.mean.to_string(),
                t.mb_fraction.std.to_string(),
                t.truncated.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Joins several experiments into one table keyed by trial index.
pub fn write_comparison_csv(results: &[(&str, &ExperimentResult)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["trial".to_string()];
    for (label, _) in results {
        for col in [
            "steps_mean",
            "steps_std",
            "simulated_time_mean",
            "simulated_time_std",
            "mean_response_time_mean",
            "mean_response_time_std",
            "mb_fraction_mean",
        ] {
            header.push(format!("{label}_{col}"));
        }
    }
    w.write_record(&header)?;
    let trials = results
        .iter()
        .map(|(_, r)| r.summary.per_trial.len())
        .max()
        .unwrap_or(0);
    for t in 0..trials {
        let mut row = vec![(t + 1).to_string()];
        for (_, r) in results {
            match r.summary.per_trial.get(t) {
                Some(s) => row.extend(
                    [
                        s.steps.mean,
                        s.steps.std,
                        s.simulated_time.mean,
                        s.simulated_time.std,
                        s.mean_response_time.mean,
                        s.mean_response_time.std,
                        s.mb_fraction.mean,
                    ]
                    .map(|x| x.to_string()),
                ),
                None => row.extend(std::iter::repeat_n(String::new(), 7)),
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
