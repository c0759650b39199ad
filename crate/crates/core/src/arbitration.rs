//! Per-step choice between the model-based and model-free processes.
//!
//! Five controllers are available: the two pure baselines, the interleaved
//! trial/step schedule, a weighted blend of the two value streams, and a
//! reliability comparison of smoothed prediction errors.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::argmax::argmax_random;
use crate::error::{invalid, Result};
use crate::gridworld::{Action, GridWorld, StateId};
use crate::learner::{execute_mf, mf_step};
use crate::planner::{execute_mb, mb_step, root_estimates, PlannerConfig, StepOutcome};
use crate::scalar::Scalar;
use crate::table::LookupTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModeTag {
    #[serde(rename = "MB")]
    Mb,
    #[serde(rename = "MF")]
    Mf,
}

impl fmt::Display for ModeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModeTag::Mb => "MB",
            ModeTag::Mf => "MF",
        })
    }
}

/// Trial-indexed model-based weight for the weighted controller.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum WeightSchedule {
    /// `w(i) = max(0, 1 - i / handoff_trials)`.
    Linear {
        handoff_trials: f64,
    },
    Constant {
        w_mb: f64,
    },
}

impl Default for WeightSchedule {
    fn default() -> Self {
        WeightSchedule::Linear {
            handoff_trials: 50.0,
        }
    }
}

impl WeightSchedule {
    pub fn weight(&self, trial: u32) -> f64 {
        match *self {
            WeightSchedule::Linear { handoff_trials } => {
                (1.0 - trial as f64 / handoff_trials).clamp(0.0, 1.0)
            }
            WeightSchedule::Constant { w_mb } => w_mb,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ControllerSpec {
    PureMb,
    PureMf,
    Interleaved { factor: u32, chunk_size: u32 },
    Weighted { schedule: WeightSchedule },
    Uncertainty { reliability_smoothing: f64 },
}

impl Default for ControllerSpec {
    fn default() -> Self {
        ControllerSpec::Interleaved {
            factor: DEFAULT_FACTOR,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }
}

pub const DEFAULT_FACTOR: u32 = 5;
pub const DEFAULT_CHUNK_SIZE: u32 = 4;
pub const DEFAULT_RELIABILITY_SMOOTHING: f64 = 0.1;

impl ControllerSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ControllerSpec::Interleaved { factor, chunk_size } => {
                if factor == 0 {
                    return Err(invalid("factor", "must be at least 1"));
                }
                if chunk_size == 0 {
                    return Err(invalid("chunk_size", "must be at least 1"));
                }
            }
            ControllerSpec::Weighted { schedule } => match schedule {
                WeightSchedule::Linear { handoff_trials }
                    if handoff_trials.is_nan() || handoff_trials <= 0.0 =>
                {
                    return Err(invalid("weight_schedule", "handoff must be positive"))
                }
                WeightSchedule::Constant { w_mb } if !(0.0..=1.0).contains(&w_mb) => {
                    return Err(invalid("weight_schedule", "weight must lie in [0, 1]"))
                }
                _ => {}
            },
            ControllerSpec::Uncertainty {
                reliability_smoothing,
            } => {
                if !(reliability_smoothing > 0.0 && reliability_smoothing <= 1.0) {
                    return Err(invalid("reliability_smoothing", "must lie in (0, 1]"));
                }
            }
            ControllerSpec::PureMb | ControllerSpec::PureMf => {}
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            ControllerSpec::PureMb => "pure-mb",
            ControllerSpec::PureMf => "pure-mf",
            ControllerSpec::Interleaved { .. } => "interleaved",
            ControllerSpec::Weighted { .. } => "weighted",
            ControllerSpec::Uncertainty { .. } => "uncertainty",
        }
    }
}

/// The interleaving schedule: with `k = floor(i / factor)`, every step is
/// model-based while `k <= 1`; afterwards step `j` is model-based iff
/// `j mod k == 0` or `j mod chunk_size == 0`.
pub fn select_mode_interleaved(i: u32, j: u64, factor: u32, chunk_size: u32) -> ModeTag {
    let k = u64::from(i / factor);
    if k <= 1 || j.is_multiple_of(k) || j.is_multiple_of(u64::from(chunk_size)) {
        ModeTag::Mb
    } else {
        ModeTag::Mf
    }
}

/// Exponentially smoothed absolute prediction errors of both processes.
///
/// Both averages start at zero and move by `smoothing` toward each new sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyTracker {
    smoothing: f64,
    mb_error: f64,
    mf_error: f64,
    samples: u64,
}

impl UncertaintyTracker {
    pub fn new(smoothing: f64) -> Self {
        UncertaintyTracker {
            smoothing,
            mb_error: 0.0,
            mf_error: 0.0,
            samples: 0,
        }
    }

    pub fn record(&mut self, mb_error: f64, mf_error: f64) {
        let lambda = self.smoothing;
        self.mb_error += lambda * (mb_error.abs() - self.mb_error);
        self.mf_error += lambda * (mf_error.abs() - self.mf_error);
        self.samples += 1;
    }

    pub fn smoothed(&self) -> (f64, f64) {
        (self.mb_error, self.mf_error)
    }

    /// The process with the strictly smaller smoothed error; model-based on ties
    /// and before any sample.
    pub fn select(&self) -> ModeTag {
        if self.samples > 0 && self.mf_error < self.mb_error {
            ModeTag::Mf
        } else {
            ModeTag::Mb
        }
    }
}

/// Uncertainty arbitration over explicit error histories.
pub fn select_mode_uncertainty(mb_errors: &[f64], mf_errors: &[f64], smoothing: f64) -> ModeTag {
    if mb_errors.is_empty() || mf_errors.is_empty() {
        return ModeTag::Mb;
    }
    let smooth = |xs: &[f64]| xs.iter().fold(0.0, |e, &x| e + smoothing * (x.abs() - e));
    if smooth(mf_errors) < smooth(mb_errors) {
        ModeTag::Mf
    } else {
        ModeTag::Mb
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedChoice<T> {
    pub action: Action,
    pub mode: ModeTag,
    pub blend: [T; 4],
    pub nodes_expanded: u64,
}

/// Blends planner root estimates with cached Q-values and picks the best
/// blended action. The tag records which stream carries the larger weight.
pub fn select_mode_weighted<T: Scalar, R: Rng + ?Sized>(
    table: &LookupTable<T>,
    world: &GridWorld<T>,
    s: StateId,
    w_mb: f64,
    planner: PlannerConfig,
    tie_rng: &mut R,
) -> Result<WeightedChoice<T>> {
    let (q_mb, nodes) = root_estimates(table, world, s, planner)?;
    let q_mf = table.q_row(s);
    let w = T::lit(w_mb);
    let mut blend = [T::zero(); 4];
    for k in 0..4 {
        blend[k] = w * q_mb[k] + (T::one() - w) * q_mf[k];
    }
    Ok(WeightedChoice {
        action: Action::from_index(argmax_random(&blend, tie_rng)),
        mode: if w_mb >= 0.5 {
            ModeTag::Mb
        } else {
            ModeTag::Mf
        },
        blend,
        nodes_expanded: nodes,
    })
}

/// Everything a controller needs beyond the table and world.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepContext {
    pub planner: PlannerConfig,
    pub epsilon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControllerStep<T> {
    pub outcome: StepOutcome<T>,
    pub mode: ModeTag,
    /// Effort units: planner node expansions, or 1 for a model-free step.
    pub cost: u64,
}

/// A controller instance for one trial sequence. Only the uncertainty
/// controller carries state across steps and trials.
#[derive(Clone, Debug, PartialEq)]
pub struct Controller {
    spec: ControllerSpec,
    tracker: Option<UncertaintyTracker>,
}

impl Controller {
    pub fn new(spec: ControllerSpec) -> Result<Self> {
        spec.validate()?;
        let tracker = match spec {
            ControllerSpec::Uncertainty {
                reliability_smoothing,
            } => Some(UncertaintyTracker::new(reliability_smoothing)),
            _ => None,
        };
        Ok(Controller { spec, tracker })
    }

    pub fn spec(&self) -> &ControllerSpec {
        &self.spec
    }

    pub fn tracker(&self) -> Option<&UncertaintyTracker> {
        self.tracker.as_ref()
    }

    /// Runs one step of trial `i` (1-based) at step index `j` (0-based).
    #[allow(clippy::too_many_arguments)]
    pub fn step<T: Scalar, R: Rng + ?Sized>(
        &mut self,
        table: &mut LookupTable<T>,
        world: &GridWorld<T>,
        s: StateId,
        i: u32,
        j: u64,
        ctx: &StepContext,
        rng: &mut R,
    ) -> Result<ControllerStep<T>> {
        let mode = match self.spec {
            ControllerSpec::PureMb => ModeTag::Mb,
            ControllerSpec::PureMf => ModeTag::Mf,
            ControllerSpec::Interleaved { factor, chunk_size } => {
                select_mode_interleaved(i, j, factor, chunk_size)
            }
            ControllerSpec::Uncertainty { .. } => {
                self.tracker.as_ref().map_or(ModeTag::Mb, |t| t.select())
            }
            ControllerSpec::Weighted { schedule } => {
                let choice =
                    select_mode_weighted(table, world, s, schedule.weight(i), ctx.planner, rng)?;
                let outcome = match choice.mode {
                    ModeTag::Mb => execute_mb(table, world, s, choice.action, rng)?,
                    ModeTag::Mf => execute_mf(table, world, s, choice.action, rng)?,
                };
                return Ok(ControllerStep {
                    outcome,
                    mode: choice.mode,
                    cost: choice.nodes_expanded,
                });
            }
        };
        let (outcome, cost) = match mode {
            ModeTag::Mb => {
                let (outcome, plan) = mb_step(table, world, s, ctx.planner, rng)?;
                (outcome, plan.nodes_expanded)
            }
            ModeTag::Mf => (mf_step(table, world, s, ctx.epsilon, rng)?, 1),
        };
        if let Some(tracker) = self.tracker.as_mut() {
            tracker.record(outcome.model_error.as_f64(), outcome.td_error.as_f64());
        }
        Ok(ControllerStep {
            outcome,
            mode,
            cost,
        })
    }
}

/// Free-function form of [`Controller::step`].
#[allow(clippy::too_many_arguments)]
pub fn run_controller_step<T: Scalar, R: Rng + ?Sized>(
    controller: &mut Controller,
    table: &mut LookupTable<T>,
    world: &GridWorld<T>,
    s: StateId,
    i: u32,
    j: u64,
    ctx: &StepContext,
    rng: &mut R,
) -> Result<ControllerStep<T>> {
    controller.step(table, world, s, i, j, ctx, rng)
}
