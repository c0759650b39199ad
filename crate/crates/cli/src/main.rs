//! Command-line front end: run one controller, compare several, or dump a
//! learned table.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use dualrl::{write_comparison_csv, Experiment, ExperimentResult, Scalar};

use config::{ControllerKind, Precision, RunConfig, SeedList};

#[derive(Parser, Debug)]
#[command(
    name = "dualrl",
    version,
    about = "Model-based / model-free gridworld learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one controller over every seed.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Run several controllers instead, e.g. `mb,mf,dual`.
        #[arg(long, value_delimiter = ',')]
        compare: Option<Vec<ControllerKind>>,
    },
    /// Run several controllers on the same world and seeds.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',', default_value = "mb,mf,dual")]
        controllers: Vec<ControllerKind>,
    },
    /// Write the shared table of one seed after a given trial as JSON.
    DumpTable {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of trials to replay first; defaults to all configured trials.
        #[arg(long)]
        after_trial: Option<u32>,
    },
}

/// Flags override the config file, which overrides the built-in defaults.
#[derive(Args, Debug, Default)]
struct CommonArgs {
    /// TOML file with any subset of the run settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    controller: Option<ControllerKind>,
    #[arg(long)]
    factor: Option<u32>,
    #[arg(long)]
    chunk_size: Option<u32>,
    /// Trials over which the linear weight schedule hands control to MF.
    #[arg(long)]
    weight_handoff: Option<f64>,
    #[arg(long)]
    reliability_smoothing: Option<f64>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    node_budget: Option<u64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    epsilon_decay: Option<f64>,
    #[arg(long)]
    epsilon_floor: Option<f64>,
    #[arg(long)]
    trials: Option<u32>,
    /// A count (`30`), an inclusive range (`1..30`), or a list (`1,2,3`).
    #[arg(long)]
    seeds: Option<SeedList>,
    /// Map file using `.` open, `#` wall, `S` start, `G` goal.
    #[arg(long)]
    map: Option<PathBuf>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long)]
    slip_prob: Option<f64>,
    #[arg(long)]
    goal_reward: Option<f64>,
    #[arg(long)]
    step_reward: Option<f64>,
    #[arg(long)]
    step_cap: Option<usize>,
    #[arg(long)]
    precision: Option<Precision>,
    /// Spread seeds over worker threads; output is identical either way.
    #[arg(long)]
    parallel: Option<bool>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { cfg.$field = v.clone(); })*
            };
        }
        apply!(
            controller,
            factor,
            chunk_size,
            weight_handoff,
            reliability_smoothing,
            depth,
            node_budget,
            gamma,
            alpha,
            epsilon,
            epsilon_decay,
            epsilon_floor,
            trials,
            seeds,
            step_cap,
            precision,
            parallel,
            out,
            width,
            height,
            slip_prob,
            goal_reward,
            step_reward
        );
        if let Some(map) = &self.map {
            cfg.map = Some(map.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command.unwrap_or(Command::Run {
        common: CommonArgs::default(),
        compare: None,
    })) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(command: Command) -> Result<()> {
    let (common, action) = match command {
        Command::Run { common, compare } => (common, Action::Run(compare)),
        Command::Compare {
            common,
            controllers,
        } => (common, Action::Run(Some(controllers))),
        Command::DumpTable {
            common,
            seed,
            after_trial,
        } => (common, Action::Dump { seed, after_trial }),
    };
    let cfg = common.resolve()?;
    if let Action::Dump {
        after_trial: Some(after),
        ..
    } = action
    {
        ensure!(
            after <= cfg.trials,
            "--after-trial {after} exceeds the {} configured trials",
            cfg.trials
        );
    }
    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating output directory {}", cfg.out.display()))?;
    fs::write(cfg.out.join("config.resolved"), cfg.to_toml()?)?;
    match cfg.precision {
        Precision::F64 => dispatch::<f64>(&cfg, action),
        Precision::F32 => dispatch::<f32>(&cfg, action),
    }
}

enum Action {
    Run(Option<Vec<ControllerKind>>),
    Dump { seed: u64, after_trial: Option<u32> },
}

fn dispatch<T: Scalar>(cfg: &RunConfig, action: Action) -> Result<()> {
    match action {
        Action::Run(None) => {
            let result = run_one::<T>(cfg, cfg.controller, &cfg.out)?;
            println!("{}", summary_line(cfg.controller.label(), &result));
            println!("wrote {}", cfg.out.display());
        }
        Action::Run(Some(kinds)) => {
            let mut results = Vec::with_capacity(kinds.len());
            for &kind in &kinds {
                let dir = cfg.out.join(kind.label());
                fs::create_dir_all(&dir)?;
                let result = run_one::<T>(cfg, kind, &dir)?;
                println!("{}", summary_line(kind.label(), &result));
                results.push((kind.label(), result));
            }
            let refs: Vec<(&str, &ExperimentResult)> =
                results.iter().map(|(l, r)| (*l, r)).collect();
            let path = cfg.out.join("comparison.csv");
            write_comparison_csv(&refs, &path)?;
            println!("wrote {}", path.display());
        }
        Action::Dump { seed, after_trial } => {
            let experiment = experiment::<T>(cfg, cfg.controller)?;
            let after = after_trial.unwrap_or(cfg.trials);
            let table = experiment.replay_table(seed, after)?;
            let path = cfg.out.join(format!("table_seed{seed}_trial{after}.json"));
            fs::write(&path, table.to_json()? + "\n")?;
            let start = experiment.world.start();
            println!(
                "seed {seed} after trial {after}: V(start) = {:.6}",
                table.value(start).as_f64()
            );
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn experiment<T: Scalar>(cfg: &RunConfig, kind: ControllerKind) -> Result<Experiment<T>> {
    Ok(Experiment::new(
        cfg.world::<T>()?,
        cfg.controller_spec(kind),
        cfg.agent_params(),
        cfg.trials,
        cfg.seeds.seeds().to_vec(),
    ))
}

fn run_one<T: Scalar>(
    cfg: &RunConfig,
    kind: ControllerKind,
    dir: &Path,
) -> Result<ExperimentResult> {
    let result = experiment::<T>(cfg, kind)?.run(cfg.parallel)?;
    result.write_trials_csv(&dir.join("trials.csv"))?;
    result.write_summary_csv(&dir.join("summary.csv"))?;
    result.write_json(&dir.join("result.json"))?;
    Ok(result)
}

fn summary_line(label: &str, result: &ExperimentResult) -> String {
    let s = &result.summary;
    format!(
        "{label}: {} seeds x {} trials | steps {:.2} -> {:.2} | response time {:.2} -> {:.2} (ratio {:.3})",
        result.per_seed.len(),
        s.per_trial.len(),
        s.first_trial_steps,
        s.last_window_steps,
        s.first_trial_response_time,
        s.last_window_response_time,
        s.response_time_ratio,
    )
}
