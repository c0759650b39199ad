//! Resolved run configuration: defaults, then config file, then flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{ensure, Context, Result};
use clap::ValueEnum;
use dualrl::{
    AgentParams, ControllerSpec, Coord, ExplorationPolicy, GridWorld, PlannerConfig, Scalar,
    WeightSchedule,
};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    #[value(alias = "mb")]
    #[serde(alias = "mb")]
    PureMb,
    #[value(alias = "mf")]
    #[serde(alias = "mf")]
    PureMf,
    #[value(alias = "interleaved")]
    #[serde(alias = "interleaved")]
    Dual,
    Weighted,
    Uncertainty,
}

impl ControllerKind {
    /// Short label used for comparison subdirectories and column prefixes.
    pub fn label(self) -> &'static str {
        match self {
            ControllerKind::PureMb => "mb",
            ControllerKind::PureMf => "mf",
            ControllerKind::Dual => "dual",
            ControllerKind::Weighted => "weighted",
            ControllerKind::Uncertainty => "uncertainty",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

/// Seed list written as a count (`30` means `1..30`), an inclusive range
/// (`a..b`), or a comma-separated list.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedList {
    text: String,
    seeds: Vec<u64>,
}

impl SeedList {
    pub fn seeds(&self) -> &[u64] {
        &self.seeds
    }
}

impl FromStr for SeedList {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let text = s.trim().to_string();
        let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..") {
            let a: u64 = a
                .trim()
                .parse()
                .with_context(|| format!("bad seed range `{text}`"))?;
            let b: u64 = b
                .trim()
                .parse()
                .with_context(|| format!("bad seed range `{text}`"))?;
            ensure!(a <= b, "seed range `{text}` is empty");
            (a..=b).collect()
        } else if text.contains(',') {
            text.split(',')
                .map(|x| x.trim().parse().with_context(|| format!("bad seed `{x}`")))
                .collect::<Result<_>>()?
        } else {
            let n: u64 = text
                .parse()
                .with_context(|| format!("bad seed count `{text}`"))?;
            (1..=n).collect()
        };
        ensure!(!seeds.is_empty(), "at least one seed is required");
        Ok(SeedList { text, seeds })
    }
}

impl fmt::Display for SeedList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for SeedList {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.text)
    }
}

impl<'de> Deserialize<'de> for SeedList {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Text(String),
            List(Vec<u64>),
        }
        let text = match Raw::deserialize(d)? {
            Raw::Count(n) => n.to_string(),
            Raw::Text(t) => t,
            Raw::List(xs) => xs.iter().map(u64::to_string).collect::<Vec<_>>().join(","),
        };
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub map: Option<PathBuf>,
    pub width: usize,
    pub height: usize,
    pub start: Option<[usize; 2]>,
    pub goal: Option<[usize; 2]>,
    pub goal_reward: f64,
    pub step_reward: f64,
    pub slip_prob: f64,

    pub controller: ControllerKind,
    pub factor: u32,
    pub chunk_size: u32,
    pub weight_handoff: f64,
    pub reliability_smoothing: f64,

    pub trials: u32,
    pub seeds: SeedList,
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub epsilon_floor: f64,
    pub depth: usize,
    pub node_budget: u64,
    pub step_cap: usize,

    pub precision: Precision,
    /// Execution hint only: results never depend on it, so it is left out
    /// of the resolved config to keep parallel and sequential runs identical.
    #[serde(skip_serializing)]
    pub parallel: bool,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let params = AgentParams::default();
        let (factor, chunk_size) = match ControllerSpec::default() {
            ControllerSpec::Interleaved { factor, chunk_size } => (factor, chunk_size),
            _ => unreachable!("default controller is interleaved"),
        };
        RunConfig {
            map: None,
            width: 10,
            height: 10,
            start: None,
            goal: None,
            goal_reward: 1.0,
            step_reward: 0.0,
            slip_prob: 0.0,
            controller: ControllerKind::Dual,
            factor,
            chunk_size,
            weight_handoff: 50.0,
            reliability_smoothing: dualrl::arbitration::DEFAULT_RELIABILITY_SMOOTHING,
            trials: 100,
            seeds: "30".parse().expect("valid"),
            gamma: params.discount,
            alpha: params.learning_rate,
            epsilon: params.exploration.epsilon,
            epsilon_decay: params.exploration.epsilon_decay,
            epsilon_floor: params.exploration.epsilon_floor,
            depth: params.planner.depth,
            node_budget: params.planner.node_budget,
            step_cap: params.step_cap,
            precision: Precision::F64,
            parallel: true,
            out: PathBuf::from("out"),
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config file {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config file {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn controller_spec(&self, kind: ControllerKind) -> ControllerSpec {
        match kind {
            ControllerKind::PureMb => ControllerSpec::PureMb,
            ControllerKind::PureMf => ControllerSpec::PureMf,
            ControllerKind::Dual => ControllerSpec::Interleaved {
                factor: self.factor,
                chunk_size: self.chunk_size,
            },
            ControllerKind::Weighted => ControllerSpec::Weighted {
                schedule: WeightSchedule::Linear {
                    handoff_trials: self.weight_handoff,
                },
            },
            ControllerKind::Uncertainty => ControllerSpec::Uncertainty {
                reliability_smoothing: self.reliability_smoothing,
            },
        }
    }

    pub fn agent_params(&self) -> AgentParams {
        AgentParams {
            discount: self.gamma,
            learning_rate: self.alpha,
            exploration: ExplorationPolicy {
                epsilon: self.epsilon,
                epsilon_decay: self.epsilon_decay,
                epsilon_floor: self.epsilon_floor,
            },
            planner: PlannerConfig {
                depth: self.depth,
                node_budget: self.node_budget,
            },
            step_cap: self.step_cap,
        }
    }

    pub fn world<T: Scalar>(&self) -> Result<GridWorld<T>> {
        let mut builder = match &self.map {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading map file {}", path.display()))?;
                GridWorld::from_map(&text)?
            }
            None => {
                let start = self.start.unwrap_or([0, 0]);
                let goal = self
                    .goal
                    .unwrap_or([self.height.saturating_sub(1), self.width.saturating_sub(1)]);
                GridWorld::builder(self.width, self.height)
                    .start(Coord::new(start[0], start[1]))
                    .goal(Coord::new(goal[0], goal[1]))
            }
        };
        builder = builder
            .rewards(T::lit(self.goal_reward), T::lit(self.step_reward))
            .slip_prob(T::lit(self.slip_prob));
        let world = builder.build()?;
        world.check_no_isolated_cells()?;
        Ok(world)
    }

    /// Checks every numeric range before anything runs.
    pub fn validate(&self) -> Result<()> {
        ensure!(self.trials >= 1, "trials must be at least 1");
        self.controller_spec(self.controller).validate()?;
        for kind in [
            ControllerKind::Dual,
            ControllerKind::Weighted,
            ControllerKind::Uncertainty,
        ] {
            self.controller_spec(kind).validate()?;
        }
        self.agent_params().validate()?;
        self.world::<f64>()?;
        Ok(())
    }
}
