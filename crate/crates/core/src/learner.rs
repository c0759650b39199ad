//! Model-free control: epsilon-greedy selection over the shared Q-table and
//! one-step Q-learning updates. Transition counts are never touched here.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::argmax::{argmax_first, argmax_random};
use crate::error::{invalid, Result};
use crate::gridworld::{Action, GridWorld, StateId};
use crate::planner::StepOutcome;
use crate::scalar::Scalar;
use crate::table::LookupTable;

/// Epsilon-greedy exploration with multiplicative per-trial decay.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExplorationPolicy {
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
}

impl Default for ExplorationPolicy {
    fn default() -> Self {
        ExplorationPolicy {
            epsilon: 0.1,
            epsilon_decay: 0.995,
            epsilon_floor: 0.01,
        }
    }
}

impl ExplorationPolicy {
    /// Purely greedy selection.
    pub fn greedy() -> Self {
        ExplorationPolicy {
            epsilon: 0.0,
            epsilon_decay: 1.0,
            epsilon_floor: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(invalid("epsilon", "must lie in [0, 1]"));
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay <= 1.0) {
            return Err(invalid("epsilon_decay", "must lie in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.epsilon_floor) {
            return Err(invalid("epsilon_floor", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Epsilon after `k` completed trials. The floor never raises an
    /// initial epsilon that is already below it.
    pub fn epsilon_after(&self, k: u32) -> f64 {
        let decayed = self.epsilon * self.epsilon_decay.powi(k as i32);
        decayed.max(self.epsilon_floor.min(self.epsilon))
    }

    /// Short description recorded in output metadata.
    pub fn label(&self) -> &'static str {
        if self.epsilon == 0.0 {
            "greedy (no exploration)"
        } else {
            "epsilon-greedy (exploration added to the greedy model-free step)"
        }
    }
}

/// Greedy action with seeded uniform tie-breaking.
pub fn greedy_action<T: Scalar, R: Rng + ?Sized>(
    table: &LookupTable<T>,
    s: StateId,
    rng: &mut R,
) -> Action {
    Action::from_index(argmax_random(&table.q_row(s), rng))
}

/// Epsilon-greedy selection. No random draw is spent on the coin when `epsilon == 0`.
pub fn select_action<T: Scalar, R: Rng + ?Sized>(
    table: &LookupTable<T>,
    s: StateId,
    epsilon: f64,
    rng: &mut R,
) -> Action {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        Action::from_index(rng.gen_range(0..4))
    } else {
        greedy_action(table, s, rng)
    }
}

/// Model-free step: select, act, and apply a TD update at `s`.
pub fn mf_step<T: Scalar, R: Rng + ?Sized>(
    table: &mut LookupTable<T>,
    world: &GridWorld<T>,
    s: StateId,
    epsilon: f64,
    rng: &mut R,
) -> Result<StepOutcome<T>> {
    let action = select_action(table, s, epsilon, rng);
    execute_mf(table, world, s, action, rng)
}

pub(crate) fn execute_mf<T: Scalar, R: Rng + ?Sized>(
    table: &mut LookupTable<T>,
    world: &GridWorld<T>,
    s: StateId,
    action: Action,
    rng: &mut R,
) -> Result<StepOutcome<T>> {
    let transition = world.step(s, action, rng)?;
    let outcome = StepOutcome::measure(table, s, action, transition);
    table.td_update(s, action, transition.reward, transition.next)?;
    Ok(outcome)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rollout {
    Reached(usize),
    NonTerminating,
}

/// Follows the greedy policy (lowest-index tie-break) from the start state
/// using intended moves only.
pub fn greedy_policy_rollout<T: Scalar>(
    table: &LookupTable<T>,
    world: &GridWorld<T>,
    max_steps: usize,
) -> Rollout {
    let mut s = world.start();
    for steps in 0..=max_steps {
        if world.is_terminal(s) {
            return Rollout::Reached(steps);
        }
        if steps == max_steps {
            break;
        }
        let a = Action::from_index(argmax_first(&table.q_row(s)));
        s = world.move_target(s, a);
    }
    Rollout::NonTerminating
}
