//! The shared look-up table: learned transition model, state values, and
//! action values, read and written by both the planner and the TD learner.
//!
//! Transition probabilities are Laplace-smoothed counts. Every `(s, a)` row
//! starts with one pseudo-count on each candidate successor (the cell itself
//! plus its open neighbours), so the zero-data model is uniform. `V(s)` is
//! always `max_a Q(s, a)`; there is no separately learned value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::gridworld::{Action, GridWorld, StateId};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct LookupTable<T> {
    envelopes: Vec<Vec<StateId>>,
    /// Indexed by `s * 4 + a`, aligned with `envelopes[s]`.
    counts: Vec<Vec<T>>,
    totals: Vec<T>,
    values: Vec<T>,
    qvalues: Vec<[T; 4]>,
    terminal: Vec<bool>,
    discount: T,
    learning_rate: T,
}

fn row(s: StateId, a: Action) -> usize {
    s.0 * 4 + a.index()
}

impl<T: Scalar> LookupTable<T> {
    /// Uniform transition model over each cell's candidate successors, all values zero.
    pub fn init(world: &GridWorld<T>, discount: T, learning_rate: T) -> Result<Self> {
        Self::build(world, discount, learning_rate, |_, _, envelope| {
            vec![T::one(); envelope.len()]
        })
    }

    /// Table whose transition counts equal the environment's true
    /// distribution, for planning against a perfect model.
    pub fn with_true_model(world: &GridWorld<T>, discount: T, learning_rate: T) -> Result<Self> {
        Self::build(world, discount, learning_rate, |s, a, envelope| {
            let mut counts = vec![T::zero(); envelope.len()];
            if world.is_open(s) {
                let dist = world
                    .true_transition_distribution(s, a)
                    .expect("open state");
                for (next, p) in dist {
                    let k = envelope
                        .iter()
                        .position(|&e| e == next)
                        .expect("in envelope");
                    counts[k] = p;
                }
            } else {
                let me = envelope
                    .iter()
                    .position(|&e| e == s)
                    .expect("self in envelope");
                counts[me] = T::one();
            }
            counts
        })
    }

    fn build(
        world: &GridWorld<T>,
        discount: T,
        learning_rate: T,
        mut counts_for: impl FnMut(StateId, Action, &[StateId]) -> Vec<T>,
    ) -> Result<Self> {
        if !(discount > T::zero() && discount < T::one()) {
            return Err(invalid("discount", "must lie in (0, 1)"));
        }
        if !(learning_rate > T::zero() && learning_rate <= T::one()) {
            return Err(invalid("learning_rate", "must lie in (0, 1]"));
        }
        let n = world.num_states();
        let envelopes: Vec<Vec<StateId>> = (0..n)
            .map(|i| {
                let mut e = world.candidate_successors(StateId(i));
                e.sort();
                e
            })
            .collect();
        let mut counts = Vec::with_capacity(n * 4);
        for (i, envelope) in envelopes.iter().enumerate() {
            for a in Action::ALL {
                counts.push(counts_for(StateId(i), a, envelope));
            }
        }
        let totals = counts
            .iter()
            .map(|c| c.iter().fold(T::zero(), |acc, &x| acc + x))
            .collect();
        Ok(LookupTable {
            envelopes,
            counts,
            totals,
            values: vec![T::zero(); n],
            qvalues: vec![[T::zero(); 4]; n],
            terminal: (0..n).map(|i| world.is_terminal(StateId(i))).collect(),
            discount,
            learning_rate,
        })
    }

    pub fn num_states(&self) -> usize {
        self.values.len()
    }

    pub fn discount(&self) -> T {
        self.discount
    }

    pub fn learning_rate(&self) -> T {
        self.learning_rate
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        self.terminal.get(s.0).copied().unwrap_or(false)
    }

    pub fn value(&self, s: StateId) -> T {
        self.values[s.0]
    }

    pub fn q(&self, s: StateId, a: Action) -> T {
        self.qvalues[s.0][a.index()]
    }

    pub fn q_row(&self, s: StateId) -> [T; 4] {
        self.qvalues[s.0]
    }

    pub fn envelope(&self, s: StateId) -> &[StateId] {
        &self.envelopes[s.0]
    }

    /// Raw pseudo-counts of `(s, a)`, aligned with [`Self::envelope`].
    pub fn counts(&self, s: StateId, a: Action) -> &[T] {
        &self.counts[row(s, a)]
    }

    /// Normalized learned successor distribution of `(s, a)`.
    pub fn transition_row(&self, s: StateId, a: Action) -> impl Iterator<Item = (StateId, T)> + '_ {
        let r = row(s, a);
        let total = self.totals[r];
        self.envelopes[s.0]
            .iter()
            .zip(&self.counts[r])
            .map(move |(&next, &c)| (next, c / total))
    }

    /// Learned probability of reaching `next`; zero outside the envelope.
    pub fn probability(&self, s: StateId, a: Action, next: StateId) -> T {
        let r = row(s, a);
        self.envelopes[s.0]
            .iter()
            .position(|&e| e == next)
            .map_or(T::zero(), |k| self.counts[r][k] / self.totals[r])
    }

    fn check(&self, s: StateId) -> Result<()> {
        if s.0 < self.num_states() {
            Ok(())
        } else {
            Err(Error::InvalidState(s))
        }
    }

    /// Adds one pseudo-count to the observed successor of `(s, a)`.
    pub fn update_transition(
        &mut self,
        s: StateId,
        a: Action,
        observed_next: StateId,
    ) -> Result<()> {
        self.check(s)?;
        let k = self.envelopes[s.0]
            .iter()
            .position(|&e| e == observed_next)
            .ok_or(Error::ModelInconsistency {
                state: s,
                action: a,
                next: observed_next,
            })?;
        let r = row(s, a);
        self.counts[r][k] += T::one();
        self.totals[r] += T::one();
        Ok(())
    }

    /// Successor value used for bootstrapping: zero for terminal states.
    fn bootstrap(&self, next: StateId) -> T {
        if self.terminal[next.0] {
            T::zero()
        } else {
            self.values[next.0]
        }
    }

    /// Expected one-step return of `(s, a)` under the learned model.
    pub fn backed_up_q(&self, s: StateId, a: Action, reward_fn: impl Fn(StateId) -> T) -> T {
        self.transition_row(s, a).fold(T::zero(), |acc, (next, p)| {
            acc + p * (reward_fn(next) + self.discount * self.bootstrap(next))
        })
    }

    /// Full Bellman backup of every action at `s` over the learned model,
    /// then `V(s) = max_a Q(s, a)`.
    pub fn bellman_backup(&mut self, s: StateId, reward_fn: impl Fn(StateId) -> T) -> Result<()> {
        self.check(s)?;
        let mut q = [T::zero(); 4];
        for a in Action::ALL {
            q[a.index()] = self.backed_up_q(s, a, &reward_fn);
        }
        self.qvalues[s.0] = q;
        self.refresh_value(s);
        Ok(())
    }

    /// Temporal-difference error of the transition, before any update.
    pub fn td_error(&self, s: StateId, a: Action, reward: T, next: StateId) -> T {
        let target = if self.terminal[next.0] {
            reward
        } else {
            reward + self.discount * max4(&self.qvalues[next.0])
        };
        target - self.q(s, a)
    }

    /// One-step Q-learning update with the table's learning rate. Returns the TD error.
    pub fn td_update(&mut self, s: StateId, a: Action, reward: T, next: StateId) -> Result<T> {
        self.td_update_with_rate(s, a, reward, next, self.learning_rate)
    }

    pub fn td_update_with_rate(
        &mut self,
        s: StateId,
        a: Action,
        reward: T,
        next: StateId,
        rate: T,
    ) -> Result<T> {
        self.check(s)?;
        self.check(next)?;
        let delta = self.td_error(s, a, reward, next);
        let q = &mut self.qvalues[s.0][a.index()];
        *q += rate * delta;
        self.refresh_value(s);
        Ok(delta)
    }

    /// Overwrites one action value, keeping `V = max Q`. Used to build fixtures.
    pub fn set_q(&mut self, s: StateId, a: Action, value: T) {
        self.qvalues[s.0][a.index()] = value;
        self.refresh_value(s);
    }

    fn refresh_value(&mut self, s: StateId) {
        self.values[s.0] = max4(&self.qvalues[s.0]);
    }

    pub fn snapshot(&self) -> TableSnapshot<T> {
        let mut transition_counts = BTreeMap::new();
        let mut qvalues = BTreeMap::new();
        let mut values = BTreeMap::new();
        for (i, envelope) in self.envelopes.iter().enumerate() {
            let s = StateId(i);
            values.insert(i, self.values[i]);
            let mut qs = BTreeMap::new();
            let mut rows = BTreeMap::new();
            for a in Action::ALL {
                qs.insert(a, self.q(s, a));
                let succ = envelope
                    .iter()
                    .zip(self.counts(s, a))
                    .map(|(n, &c)| (n.0, c))
                    .collect::<BTreeMap<_, _>>();
                rows.insert(a, succ);
            }
            qvalues.insert(i, qs);
            transition_counts.insert(i, rows);
        }
        TableSnapshot {
            discount: self.discount,
            learning_rate: self.learning_rate,
            terminal: self
                .terminal
                .iter()
                .enumerate()
                .filter_map(|(i, &t)| t.then_some(i))
                .collect(),
            values,
            qvalues,
            transition_counts,
        }
    }

    pub fn from_snapshot(snap: &TableSnapshot<T>) -> Result<Self> {
        let bad = |m: &str| Error::Snapshot(m.to_string());
        let n = snap.values.len();
        if snap.qvalues.len() != n || snap.transition_counts.len() != n {
            return Err(bad("state maps have different sizes"));
        }
        let mut envelopes = Vec::with_capacity(n);
        let mut counts = Vec::with_capacity(n * 4);
        let mut values = Vec::with_capacity(n);
        let mut qvalues = Vec::with_capacity(n);
        for i in 0..n {
            values.push(
                *snap
                    .values
                    .get(&i)
                    .ok_or_else(|| bad("missing state index"))?,
            );
            let qs = snap.qvalues.get(&i).ok_or_else(|| bad("missing Q row"))?;
            let rows = snap
                .transition_counts
                .get(&i)
                .ok_or_else(|| bad("missing transition rows"))?;
            let mut q = [T::zero(); 4];
            let mut envelope: Option<Vec<StateId>> = None;
            for a in Action::ALL {
                q[a.index()] = *qs.get(&a).ok_or_else(|| bad("missing action in Q row"))?;
                let succ = rows
                    .get(&a)
                    .ok_or_else(|| bad("missing action in transitions"))?;
                let keys: Vec<StateId> = succ.keys().map(|&k| StateId(k)).collect();
                if keys.iter().any(|k| k.0 >= n) {
                    return Err(bad("successor index out of range"));
                }
                match &envelope {
                    Some(e) if *e != keys => return Err(bad("actions disagree on successor set")),
                    Some(_) => {}
                    None => envelope = Some(keys),
                }
                counts.push(succ.values().copied().collect::<Vec<_>>());
            }
            envelopes.push(envelope.unwrap_or_default());
            qvalues.push(q);
        }
        let totals = counts
            .iter()
            .map(|c| c.iter().fold(T::zero(), |acc, &x| acc + x))
            .collect();
        let mut terminal = vec![false; n];
        for &t in &snap.terminal {
            *terminal
                .get_mut(t)
                .ok_or_else(|| bad("terminal index out of range"))? = true;
        }
        Ok(LookupTable {
            envelopes,
            counts,
            totals,
            values,
            qvalues,
            terminal,
            discount: snap.discount,
            learning_rate: snap.learning_rate,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.snapshot())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: TableSnapshot<T> = serde_json::from_str(text)?;
        Self::from_snapshot(&snap)
    }
}

pub(crate) fn max4<T: Scalar>(xs: &[T; 4]) -> T {
    xs.iter().skip(1).fold(xs[0], |m, &x| m.max(x))
}

/// Serializable form of a [`LookupTable`]: nested maps keyed by state index and action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableSnapshot<T> {
    pub discount: T,
    pub learning_rate: T,
    pub terminal: Vec<usize>,
    pub values: BTreeMap<usize, T>,
    pub qvalues: BTreeMap<usize, BTreeMap<Action, T>>,
    pub transition_counts: BTreeMap<usize, BTreeMap<Action, BTreeMap<usize, T>>>,
}
