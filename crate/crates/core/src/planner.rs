//! Depth-limited expectimax over the learned transition model.
//!
//! The root estimate of action `a` at depth `d` is
//! `sum_s' P(s'|s,a) * (r(s') + gamma * W(s', d - 1))`, where `W(x, 0)` is the
//! table's `V(x)` and `W(x, k) = max_a` of the same expression one level
//! shallower. Terminal states contribute no value beyond their entry reward.
//! States may repeat along a path; there is no transposition table.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::argmax::argmax_random;
use crate::error::{invalid, Error, Result};
use crate::gridworld::{Action, GridWorld, StateId, Transition};
use crate::scalar::Scalar;
use crate::table::LookupTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub depth: usize,
    /// Maximum internal node expansions per plan.
    pub node_budget: u64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            depth: 4,
            node_budget: 1_000_000,
        }
    }
}

impl PlannerConfig {
    pub fn with_depth(depth: usize) -> Self {
        PlannerConfig {
            depth,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlanResult<T> {
    pub chosen_action: Action,
    pub expected_return: T,
    /// Backed-up estimate of every root action, in [`Action::ALL`] order.
    pub root_estimates: [T; 4],
    pub nodes_expanded: u64,
    pub depth_used: usize,
}

/// One executed environment step plus the prediction errors of both
/// processes, measured on the table before it was updated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOutcome<T> {
    pub action: Action,
    pub transition: Transition<T>,
    /// `1 - P_model(observed successor)`.
    pub model_error: T,
    /// Absolute TD error of the transition.
    pub td_error: T,
}

impl<T: Scalar> StepOutcome<T> {
    pub(crate) fn measure(
        table: &LookupTable<T>,
        s: StateId,
        action: Action,
        transition: Transition<T>,
    ) -> Self {
        StepOutcome {
            action,
            transition,
            model_error: T::one() - table.probability(s, action, transition.next),
            td_error: table
                .td_error(s, action, transition.reward, transition.next)
                .abs(),
        }
    }
}

struct Search<'a, T> {
    table: &'a LookupTable<T>,
    world: &'a GridWorld<T>,
    budget: u64,
    nodes: u64,
}

impl<T: Scalar> Search<'_, T> {
    fn expand(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            Err(Error::BudgetExceeded {
                budget: self.budget,
            })
        } else {
            Ok(())
        }
    }

    fn state_value(&mut self, s: StateId, remaining: usize) -> Result<T> {
        if self.table.is_terminal(s) {
            return Ok(T::zero());
        }
        if remaining == 0 {
            return Ok(self.table.value(s));
        }
        self.expand()?;
        let mut best = T::neg_infinity();
        for a in Action::ALL {
            best = best.max(self.action_value(s, a, remaining)?);
        }
        Ok(best)
    }

    fn action_value(&mut self, s: StateId, a: Action, remaining: usize) -> Result<T> {
        let gamma = self.table.discount();
        let mut total = T::zero();
        for (next, p) in self.table.transition_row(s, a) {
            if p == T::zero() {
                continue;
            }
            let tail = self.state_value(next, remaining - 1)?;
            total += p * (self.world.reward(next) + gamma * tail);
        }
        Ok(total)
    }
}

/// Expectimax estimates of all four root actions, without choosing one.
pub fn root_estimates<T: Scalar>(
    table: &LookupTable<T>,
    world: &GridWorld<T>,
    s: StateId,
    config: PlannerConfig,
) -> Result<([T; 4], u64)> {
    if !world.is_open(s) {
        return Err(Error::InvalidState(s));
    }
    if config.depth == 0 {
        return Err(invalid("depth", "must be at least 1"));
    }
    let mut search = Search {
        table,
        world,
        budget: config.node_budget,
        nodes: 0,
    };
    search.expand()?;
    let mut q = [T::zero(); 4];
    for a in Action::ALL {
        q[a.index()] = search.action_value(s, a, config.depth)?;
    }
    Ok((q, search.nodes))
}

/// Plans from `s` and picks a best root action, breaking ties uniformly with `tie_rng`.
pub fn dls_plan<T: Scalar, R: Rng + ?Sized>(
    table: &LookupTable<T>,
    world: &GridWorld<T>,
    s: StateId,
    config: PlannerConfig,
    tie_rng: &mut R,
) -> Result<PlanResult<T>> {
    let (root, nodes) = root_estimates(table, world, s, config)?;
    let k = argmax_random(&root, tie_rng);
    Ok(PlanResult {
        chosen_action: Action::from_index(k),
        expected_return: root[k],
        root_estimates: root,
        nodes_expanded: nodes,
        depth_used: config.depth,
    })
}

/// Model-based step: plan, act, count the observed successor, then back up `s`.
pub fn mb_step<T: Scalar, R: Rng + ?Sized>(
    table: &mut LookupTable<T>,
    world: &GridWorld<T>,
    s: StateId,
    config: PlannerConfig,
    rng: &mut R,
) -> Result<(StepOutcome<T>, PlanResult<T>)> {
    let plan = dls_plan(table, world, s, config, rng)?;
    let outcome = execute_mb(table, world, s, plan.chosen_action, rng)?;
    Ok((outcome, plan))
}

/// Executes `action` and applies the model-based updates.
pub(crate) fn execute_mb<T: Scalar, R: Rng + ?Sized>(
    table: &mut LookupTable<T>,
    world: &GridWorld<T>,
    s: StateId,
    action: Action,
    rng: &mut R,
) -> Result<StepOutcome<T>> {
    let transition = world.step(s, action, rng)?;
    let outcome = StepOutcome::measure(table, s, action, transition);
    table.update_transition(s, action, transition.next)?;
    table.bellman_backup(s, |n| world.reward(n))?;
    Ok(outcome)
}
