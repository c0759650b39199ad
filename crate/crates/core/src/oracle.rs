//! Brute-force reference solvers. They read only the environment's true
//! dynamics and never touch a learned table.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gridworld::{Action, GridWorld, StateId};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution<T> {
    /// `None` when the goal cannot be reached by intended moves.
    pub shortest_path_length: Option<usize>,
    /// Indexed by state; walls and the goal hold zero.
    pub optimal_values: Vec<T>,
    pub sweeps: usize,
}

/// Breadth-first distances to the goal over intended moves, `None` where unreachable.
pub fn distances_to_goal<T: Scalar>(world: &GridWorld<T>) -> Vec<Option<usize>> {
    let n = world.num_states();
    // Predecessor lists: p reaches s under some action.
    let mut preds = vec![Vec::new(); n];
    for p in world.open_states() {
        for a in Action::ALL {
            let s = world.move_target(p, a);
            if s != p {
                preds[s.0].push(p);
            }
        }
    }
    let mut dist = vec![None; n];
    let mut queue = VecDeque::from([world.goal()]);
    dist[world.goal().0] = Some(0);
    while let Some(s) = queue.pop_front() {
        let d = dist[s.0].expect("queued states have distances");
        for &p in &preds[s.0] {
            if dist[p.0].is_none() {
                dist[p.0] = Some(d + 1);
                queue.push_back(p);
            }
        }
    }
    dist
}

/// Minimal number of intended moves from start to goal.
pub fn bfs_shortest_path<T: Scalar>(world: &GridWorld<T>) -> Result<usize> {
    distances_to_goal(world)[world.start().0].ok_or(Error::Unreachable)
}

/// Actions from `s` that begin some shortest path to the goal.
pub fn shortest_path_actions<T: Scalar>(world: &GridWorld<T>, s: StateId) -> Vec<Action> {
    let dist = distances_to_goal(world);
    let Some(d) = dist[s.0] else {
        return Vec::new();
    };
    Action::ALL
        .into_iter()
        .filter(|&a| d > 0 && dist[world.move_target(s, a).0] == Some(d - 1))
        .collect()
}

/// Value iteration with full Bellman optimality sweeps over the true
/// transition distributions, until the largest change is below `tolerance`.
pub fn value_iteration<T: Scalar>(
    world: &GridWorld<T>,
    discount: T,
    tolerance: T,
) -> Result<OracleSolution<T>> {
    if !(discount > T::zero() && discount < T::one()) {
        return Err(invalid("discount", "must lie in (0, 1)"));
    }
    if tolerance.is_nan() || tolerance <= T::zero() {
        return Err(invalid("tolerance", "must be positive"));
    }
    let n = world.num_states();
    let states: Vec<StateId> = world
        .open_states()
        .filter(|&s| !world.is_terminal(s))
        .collect();
    let models: Vec<[Vec<(StateId, T)>; 4]> = states
        .iter()
        .map(|&s| Action::ALL.map(|a| world.true_transition_distribution(s, a).expect("open")))
        .collect();
    let mut values = vec![T::zero(); n];
    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut next = values.clone();
        let mut delta = T::zero();
        for (s, model) in states.iter().zip(&models) {
            let best = model
                .iter()
                .map(|dist| {
                    dist.iter().fold(T::zero(), |acc, &(succ, p)| {
                        let tail = if world.is_terminal(succ) {
                            T::zero()
                        } else {
                            values[succ.0]
                        };
                        acc + p * (world.reward(succ) + discount * tail)
                    })
                })
                .fold(T::neg_infinity(), T::max);
            delta = delta.max((best - values[s.0]).abs());
            next[s.0] = best;
        }
        values = next;
        if delta < tolerance {
            break;
        }
    }
    Ok(OracleSolution {
        shortest_path_length: distances_to_goal(world)[world.start().0],
        optimal_values: values,
        sweeps,
    })
}
