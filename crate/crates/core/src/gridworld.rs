//! Four-connected grid-world task environment.
//!
//! Cells are addressed by [`Coord`] (row, column) or by the row-major
//! [`StateId`]. North decreases the row index, East increases the column.
//! Moves into a wall or off the grid leave the agent where it is.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Scalar;

/// Row-major index of a cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateId(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub const fn new(row: usize, col: usize) -> Self {
        Coord { row, col }
    }
}

impl From<(usize, usize)> for Coord {
    fn from((row, col): (usize, usize)) -> Self {
        Coord { row, col }
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    North,
    East,
    South,
    West,
}

impl Action {
    /// All actions in index order. Index order is also the first-index tie-break order.
    pub const ALL: [Action; 4] = [Action::North, Action::East, Action::South, Action::West];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        Self::ALL[i]
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Action::North => (-1, 0),
            Action::East => (0, 1),
            Action::South => (1, 0),
            Action::West => (0, -1),
        }
    }

    /// The two perpendicular moves a slip can divert to.
    pub fn laterals(self) -> [Action; 2] {
        match self {
            Action::North | Action::South => [Action::West, Action::East],
            Action::East | Action::West => [Action::North, Action::South],
        }
    }
}

/// Outcome of one environment transition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition<T> {
    pub next: StateId,
    pub reward: T,
    pub done: bool,
}

/// Immutable grid-world task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridWorld<T> {
    width: usize,
    height: usize,
    walls: Vec<bool>,
    start: StateId,
    goal: StateId,
    goal_reward: T,
    step_reward: T,
    slip_prob: T,
}

impl<T: Scalar> GridWorld<T> {
    pub fn builder(width: usize, height: usize) -> GridWorldBuilder<T> {
        GridWorldBuilder::new(width, height)
    }

    /// The default task: open 10x10 grid, start at the top-left corner, goal
    /// at the bottom-right, reward 1 on reaching the goal and 0 otherwise.
    pub fn default_task() -> Self {
        Self::builder(10, 10)
            .build()
            .expect("default task is valid")
    }

    /// Parses a text map (`.` free, `#` wall, `S` start, `G` goal).
    pub fn from_map(text: &str) -> Result<GridWorldBuilder<T>> {
        let rows: Vec<&str> = text
            .lines()
            .map(str::trim_end)
            .filter(|l| !l.is_empty())
            .collect();
        if rows.is_empty() {
            return Err(Error::MapParse {
                line: 0,
                reason: "map is empty".into(),
            });
        }
        let width = rows[0].chars().count();
        let height = rows.len();
        let mut walls = Vec::new();
        let (mut start, mut goal) = (None, None);
        for (r, line) in rows.iter().enumerate() {
            if line.chars().count() != width {
                return Err(Error::MapParse {
                    line: r + 1,
                    reason: format!("expected {width} cells, found {}", line.chars().count()),
                });
            }
            for (c, ch) in line.chars().enumerate() {
                let here = Coord::new(r, c);
                match ch {
                    '.' => {}
                    '#' => walls.push(here),
                    'S' | 'G' => {
                        let slot = if ch == 'S' { &mut start } else { &mut goal };
                        if slot.replace(here).is_some() {
                            return Err(Error::MapParse {
                                line: r + 1,
                                reason: format!("more than one `{ch}`"),
                            });
                        }
                    }
                    other => {
                        return Err(Error::MapParse {
                            line: r + 1,
                            reason: format!("unexpected character {other:?}"),
                        })
                    }
                }
            }
        }
        let start = start.ok_or(Error::MapParse {
            line: 0,
            reason: "no `S` cell".into(),
        })?;
        let goal = goal.ok_or(Error::MapParse {
            line: 0,
            reason: "no `G` cell".into(),
        })?;
        Ok(Self::builder(width, height)
            .start(start)
            .goal(goal)
            .walls(walls))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_states(&self) -> usize {
        self.width * self.height
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    pub fn goal(&self) -> StateId {
        self.goal
    }

    pub fn goal_reward(&self) -> T {
        self.goal_reward
    }

    pub fn step_reward(&self) -> T {
        self.step_reward
    }

    pub fn slip_prob(&self) -> T {
        self.slip_prob
    }

    pub fn is_deterministic(&self) -> bool {
        self.slip_prob == T::zero()
    }

    pub fn coord(&self, s: StateId) -> Coord {
        Coord::new(s.0 / self.width, s.0 % self.width)
    }

    /// Returns `None` when the coordinate is off the grid.
    pub fn state(&self, c: Coord) -> Option<StateId> {
        (c.row < self.height && c.col < self.width).then(|| StateId(c.row * self.width + c.col))
    }

    pub fn is_wall(&self, s: StateId) -> bool {
        self.walls.get(s.0).copied().unwrap_or(false)
    }

    pub fn is_terminal(&self, s: StateId) -> bool {
        s == self.goal
    }

    /// In bounds and not a wall.
    pub fn is_open(&self, s: StateId) -> bool {
        s.0 < self.num_states() && !self.walls[s.0]
    }

    pub fn open_states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.num_states())
            .map(StateId)
            .filter(|&s| self.is_open(s))
    }

    fn check(&self, s: StateId) -> Result<()> {
        if self.is_open(s) {
            Ok(())
        } else {
            Err(Error::InvalidState(s))
        }
    }

    fn neighbor(&self, s: StateId, a: Action) -> Option<StateId> {
        let c = self.coord(s);
        let (dr, dc) = a.delta();
        let row = c.row.checked_add_signed(dr)?;
        let col = c.col.checked_add_signed(dc)?;
        self.state(Coord::new(row, col))
            .filter(|&n| !self.walls[n.0])
    }

    /// Where the intended move lands, applying the blocked-move rule.
    pub fn move_target(&self, s: StateId, a: Action) -> StateId {
        self.neighbor(s, a).unwrap_or(s)
    }

    /// Successors any action from `s` can produce: `s` itself followed by
    /// its open neighbours in action order.
    pub fn candidate_successors(&self, s: StateId) -> Vec<StateId> {
        std::iter::once(s)
            .chain(Action::ALL.iter().filter_map(|&a| self.neighbor(s, a)))
            .collect()
    }

    pub fn reward(&self, next: StateId) -> T {
        if next == self.goal {
            self.goal_reward
        } else {
            self.step_reward
        }
    }

    /// Exact successor distribution of `(s, a)`, sorted by state index.
    pub fn true_transition_distribution(&self, s: StateId, a: Action) -> Result<Vec<(StateId, T)>> {
        self.check(s)?;
        let mut dist: BTreeMap<StateId, T> = BTreeMap::new();
        let intended = T::one() - self.slip_prob;
        if intended > T::zero() {
            *dist.entry(self.move_target(s, a)).or_insert(T::zero()) += intended;
        }
        if self.slip_prob > T::zero() {
            let half = self.slip_prob / T::lit(2.0);
            for lateral in a.laterals() {
                *dist
                    .entry(self.move_target(s, lateral))
                    .or_insert(T::zero()) += half;
            }
        }
        Ok(dist.into_iter().collect())
    }

    /// Samples one transition. Randomness is drawn only when `slip_prob > 0`.
    pub fn step<R: Rng + ?Sized>(
        &self,
        s: StateId,
        a: Action,
        rng: &mut R,
    ) -> Result<Transition<T>> {
        self.check(s)?;
        let taken = if self.slip_prob > T::zero() {
            let u: f64 = rng.gen();
            let slip = self.slip_prob.as_f64();
            if u < 1.0 - slip {
                a
            } else if u < 1.0 - slip / 2.0 {
                a.laterals()[0]
            } else {
                a.laterals()[1]
            }
        } else {
            a
        };
        let next = self.move_target(s, taken);
        Ok(Transition {
            next,
            reward: self.reward(next),
            done: next == self.goal,
        })
    }

    /// Verifies that no open cell is isolated.
    pub fn check_no_isolated_cells(&self) -> Result<()> {
        if self.num_states() == 1 {
            return Ok(());
        }
        match self
            .open_states()
            .find(|&s| Action::ALL.iter().all(|&a| self.neighbor(s, a).is_none()))
        {
            Some(s) => Err(invalid(
                "walls",
                format!("cell {} has no open neighbour", self.coord(s)),
            )),
            None => Ok(()),
        }
    }
}

impl<T: Scalar> Default for GridWorld<T> {
    fn default() -> Self {
        Self::default_task()
    }
}

#[derive(Clone, Debug)]
pub struct GridWorldBuilder<T> {
    width: usize,
    height: usize,
    walls: Vec<Coord>,
    start: Option<Coord>,
    goal: Option<Coord>,
    goal_reward: T,
    step_reward: T,
    slip_prob: T,
    allow_trivial: bool,
}

impl<T: Scalar> GridWorldBuilder<T> {
    fn new(width: usize, height: usize) -> Self {
        GridWorldBuilder {
            width,
            height,
            walls: Vec::new(),
            start: None,
            goal: None,
            goal_reward: T::one(),
            step_reward: T::zero(),
            slip_prob: T::zero(),
            allow_trivial: false,
        }
    }

    pub fn start(mut self, c: impl Into<Coord>) -> Self {
        self.start = Some(c.into());
        self
    }

    pub fn goal(mut self, c: impl Into<Coord>) -> Self {
        self.goal = Some(c.into());
        self
    }

    pub fn wall(mut self, c: impl Into<Coord>) -> Self {
        self.walls.push(c.into());
        self
    }

    pub fn walls(mut self, cs: impl IntoIterator<Item = Coord>) -> Self {
        self.walls.extend(cs);
        self
    }

    pub fn rewards(mut self, goal_reward: T, step_reward: T) -> Self {
        self.goal_reward = goal_reward;
        self.step_reward = step_reward;
        self
    }

    pub fn slip_prob(mut self, p: T) -> Self {
        self.slip_prob = p;
        self
    }

    /// Permits `start == goal`, a task that is solved in zero steps.
    pub fn allow_start_at_goal(mut self) -> Self {
        self.allow_trivial = true;
        self
    }

    pub fn build(self) -> Result<GridWorld<T>> {
        if self.width == 0 || self.height == 0 {
            return Err(invalid("size", "width and height must be positive"));
        }
        if !(self.slip_prob >= T::zero() && self.slip_prob <= T::one()) {
            return Err(invalid("slip_prob", "must lie in [0, 1]"));
        }
        if !self.goal_reward.is_finite() || !self.step_reward.is_finite() {
            return Err(invalid("rewards", "must be finite"));
        }
        let n = self.width * self.height;
        let index = |c: Coord, name| {
            if c.row < self.height && c.col < self.width {
                Ok(StateId(c.row * self.width + c.col))
            } else {
                Err(invalid(name, format!("{c} is outside the grid")))
            }
        };
        let mut walls = vec![false; n];
        for &w in &self.walls {
            walls[index(w, "walls")?.0] = true;
        }
        let start = index(self.start.unwrap_or(Coord::new(0, 0)), "start")?;
        let goal = index(
            self.goal
                .unwrap_or(Coord::new(self.height - 1, self.width - 1)),
            "goal",
        )?;
        if walls[start.0] {
            return Err(invalid("start", "start cell is a wall"));
        }
        if walls[goal.0] {
            return Err(invalid("goal", "goal cell is a wall"));
        }
        if start == goal && !self.allow_trivial {
            return Err(invalid("goal", "start and goal coincide"));
        }
        Ok(GridWorld {
            width: self.width,
            height: self.height,
            walls,
            start,
            goal,
            goal_reward: self.goal_reward,
            step_reward: self.step_reward,
            slip_prob: self.slip_prob,
        })
    }
}
