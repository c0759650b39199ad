//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Tolerances are fixed here and must not
//! be loosened to make a run pass.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use dualrl::oracle::{distances_to_goal, shortest_path_actions};
use dualrl::{
    bfs_shortest_path, dls_plan, greedy_action, select_mode_interleaved, select_mode_weighted,
    value_iteration, Action, AgentParams, ControllerSpec, Experiment, ExperimentResult, GridWorld,
    LookupTable, ModeTag, PlannerConfig, Rollout, Stat, StateId,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

const SEEDS: u64 = 30;

fn seeds() -> Vec<u64> {
    (1..=SEEDS).collect()
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed < Duration::from_secs(limit_secs)
}

// ---------------------------------------------------------------------------
// 1. Interleaving schedule against an enumeration of the MB step sets.

fn schedule_exactness() -> Verdict {
    let t0 = Instant::now();
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for factor in [1u32, 2, 5, 10] {
        for chunk in [2u32, 4, 8] {
            for i in 1..=200u32 {
                // Reference: mark every multiple of k and of chunk below 500.
                let k = (i / factor) as usize;
                let mut mb = [k <= 1; 500];
                if k > 1 {
                    for step in [k, chunk as usize] {
                        for j in (0..500).step_by(step) {
                            mb[j] = true;
                        }
                    }
                }
                for (j, &expect) in mb.iter().enumerate() {
                    let got = select_mode_interleaved(i, j as u64, factor, chunk) == ModeTag::Mb;
                    checked += 1;
                    if got != expect {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    let elapsed = t0.elapsed();
    Verdict::new(
        mismatches == 0 && within(elapsed, 1),
        format!("{mismatches} mismatches over {checked} cases in {elapsed:.2?} (limit 1s)"),
    )
}

// ---------------------------------------------------------------------------
// 2. Planner and value iteration against breadth-first search.

fn oracle_exactness() -> Verdict {
    let t0 = Instant::now();
    let gamma = 0.9f64;
    let goal_reward = 1.0f64;
    let mut plan_failures = 0usize;
    let mut plans = 0usize;
    let mut worst_vi_error = 0.0f64;
    for w in 1..=6usize {
        for h in 1..=6usize {
            if w * h < 2 {
                continue;
            }
            for goal in 0..w * h {
                let start = if goal == 0 { 1 } else { 0 };
                let world: GridWorld<f64> = GridWorld::builder(w, h)
                    .start((start / w, start % w))
                    .goal((goal / w, goal % w))
                    .rewards(goal_reward, 0.0)
                    .build()
                    .expect("open grid");
                let table = LookupTable::with_true_model(&world, gamma, 0.1).expect("table");
                let dist = distances_to_goal(&world);
                let mut rng = ChaCha8Rng::seed_from_u64(goal as u64);
                for s in world.open_states().filter(|&s| !world.is_terminal(s)) {
                    let d = dist[s.0].expect("open grids are connected");
                    let cfg = PlannerConfig {
                        depth: d,
                        node_budget: u64::MAX,
                    };
                    let plan = dls_plan(&table, &world, s, cfg, &mut rng).expect("plan");
                    plans += 1;
                    if !shortest_path_actions(&world, s).contains(&plan.chosen_action) {
                        plan_failures += 1;
                    }
                }
                let vi = value_iteration(&world, gamma, 1e-12).expect("vi");
                for s in world.open_states().filter(|&s| !world.is_terminal(s)) {
                    let d = dist[s.0].expect("connected") as i32;
                    let closed = gamma.powi(d - 1) * goal_reward;
                    worst_vi_error = worst_vi_error.max((vi.optimal_values[s.0] - closed).abs());
                }
            }
        }
    }
    let elapsed = t0.elapsed();
    Verdict::new(
        plan_failures == 0 && worst_vi_error <= 1e-9 && within(elapsed, 10),
        format!(
            "{plan_failures}/{plans} planner choices off a shortest path; \
             max |V - gamma^(d-1)| = {worst_vi_error:.1e} (tol 1e-9); {elapsed:.2?} (limit 10s)"
        ),
    )
}

// ---------------------------------------------------------------------------
// Shared default-world runs for criteria 3-6.

fn default_experiment(controller: ControllerSpec, trials: u32) -> ExperimentResult {
    Experiment::new(
        GridWorld::<f64>::default_task(),
        controller,
        AgentParams::default(),
        trials,
        seeds(),
    )
    .run(true)
    .expect("experiment runs")
}

fn band(s: &Stat) -> String {
    format!("{:.1} +/- {:.1}", s.mean, s.std)
}

fn fig2_ordering() -> Verdict {
    let t0 = Instant::now();
    let early = |spec| {
        let r = default_experiment(spec, 5);
        Stat::of(&r.per_seed_window(1..=5, |t| t.steps as f64))
    };
    let mb = early(ControllerSpec::PureMb);
    let dual = early(ControllerSpec::default());
    let mf = early(ControllerSpec::PureMf);
    let elapsed = t0.elapsed();
    let (_, mb_hi) = mb.band();
    let (dual_lo, dual_hi) = dual.band();
    let (mf_lo, _) = mf.band();
    let ordered = mb.mean < dual.mean && dual.mean < mf.mean;
    let separated = mb_hi < dual_lo && dual_hi < mf_lo;
    Verdict::new(
        ordered && separated && within(elapsed, 60),
        format!(
            "steps over trials 1-5: MB {} | Dual {} | MF {}; ordered={ordered} bands_disjoint={separated}; {elapsed:.1?} (limit 60s)",
            band(&mb),
            band(&dual),
            band(&mf)
        ),
    )
}

struct LongRuns {
    mb: ExperimentResult,
    dual: ExperimentResult,
}

fn response_time_decay(runs: &LongRuns) -> Verdict {
    let rt = |t: &dualrl::harness::TrialSummary| t.mean_response_time.mean;
    let dual_first = runs.dual.summary.trial(1).map(rt).unwrap_or(f64::NAN);
    let dual_late = runs.dual.summary.window_mean(91..=100, rt);
    let mb_late = runs.mb.summary.window_mean(91..=100, rt);
    let vs_first = dual_late / dual_first;
    let vs_mb = dual_late / mb_late;
    Verdict::new(
        vs_first < 0.5 && vs_mb < 0.25,
        format!(
            "Dual RT trial 1 = {dual_first:.1}, trials 91-100 = {dual_late:.1}, MB trials 91-100 = {mb_late:.1}; \
             late/first = {vs_first:.4} (< 0.5), Dual/MB = {vs_mb:.4} (< 0.25)"
        ),
    )
}

fn response_time_plateau(runs: &LongRuns) -> Verdict {
    let xs: Vec<f64> = (81..=100)
        .filter_map(|i| runs.dual.summary.trial(i))
        .map(|t| t.mean_response_time.mean)
        .collect();
    let s = Stat::of(&xs);
    let cv = s.std / s.mean;
    Verdict::new(
        xs.len() == 20 && cv < 0.15,
        format!("CV of seed-averaged Dual RT over trials 81-100 = {cv:.4} (< 0.15)"),
    )
}

fn convergence_quality(runs: &LongRuns) -> Verdict {
    let world = GridWorld::<f64>::default_task();
    let shortest = bfs_shortest_path(&world).expect("reachable");
    let optimal = runs
        .dual
        .per_seed
        .iter()
        .filter(|r| r.final_rollout == Some(Rollout::Reached(shortest)))
        .count();
    Verdict::new(
        optimal >= 28,
        format!("{optimal}/{SEEDS} greedy rollouts take exactly {shortest} steps (need >= 28)"),
    )
}

// ---------------------------------------------------------------------------
// 7. Random interleaved updates on a 4x4 table.

fn table_invariants() -> Verdict {
    let t0 = Instant::now();
    let gamma = 0.9f64;
    let world: GridWorld<f64> = GridWorld::builder(4, 4)
        .wall((1, 1))
        .slip_prob(0.2)
        .rewards(1.0, -0.05)
        .build()
        .expect("fixture");
    let r_max = 1.0f64;
    let bound = r_max / (1.0 - gamma);
    let mut table = LookupTable::init(&world, gamma, 0.3).expect("table");
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let states: Vec<StateId> = world
        .open_states()
        .filter(|&s| !world.is_terminal(s))
        .collect();
    let (mut drift, mut consistency, mut max_q) = (0.0f64, 0.0f64, 0.0f64);
    let mut errors = 0usize;
    for _ in 0..100_000 {
        let s = states[rng.gen_range(0..states.len())];
        let a = Action::from_index(rng.gen_range(0..4));
        let result = match rng.gen_range(0..3) {
            0 => {
                let next = world.step(s, a, &mut rng).expect("open").next;
                table.update_transition(s, a, next)
            }
            1 => {
                let t = world.step(s, a, &mut rng).expect("open");
                table.td_update(s, a, t.reward, t.next).map(|_| ())
            }
            _ => table.bellman_backup(s, |n| world.reward(n)),
        };
        if result.is_err() {
            errors += 1;
        }
        let total: f64 = table.transition_row(s, a).map(|(_, p)| p).sum();
        drift = drift.max((total - 1.0).abs());
        let row = table.q_row(s);
        let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        consistency = consistency.max((table.value(s) - best).abs());
        max_q = row.iter().fold(max_q, |m, q| m.max(q.abs()));
    }
    // Final sweep over every row, not just the touched ones.
    for &s in &states {
        for a in Action::ALL {
            let total: f64 = table.transition_row(s, a).map(|(_, p)| p).sum();
            drift = drift.max((total - 1.0).abs());
        }
        let best = table
            .q_row(s)
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        consistency = consistency.max((table.value(s) - best).abs());
    }
    let elapsed = t0.elapsed();
    Verdict::new(
        errors == 0 && drift <= 1e-9 && consistency == 0.0 && max_q <= bound && within(elapsed, 5),
        format!(
            "1e5 ops: {errors} errors, row drift {drift:.1e} (<= 1e-9), |V - max Q| = {consistency:.1e}, \
             max |Q| = {max_q:.4} (<= {bound:.1}); {elapsed:.2?} (limit 5s)"
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. Default `compare` through the binary, parallel vs sequential.

fn read_tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).expect("readable") {
            let path = entry.expect("entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path
                    .strip_prefix(root)
                    .expect("inside")
                    .display()
                    .to_string();
                files.insert(rel, fs::read(&path).expect("readable"));
            }
        }
    }
    files
}

fn determinism() -> Verdict {
    let t0 = Instant::now();
    let run = |parallel: &str| {
        let dir = tempfile::tempdir().expect("tempdir");
        let status = Command::new(env!("CARGO_BIN_EXE_dualrl"))
            .current_dir(dir.path())
            .args(["compare", "--out", "out", "--parallel", parallel])
            .output()
            .expect("binary runs");
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        read_tree(&dir.path().join("out"))
    };
    let a = run("true");
    let b = run("false");
    let differing: Vec<&String> = a
        .keys()
        .chain(b.keys())
        .filter(|k| a.get(*k) != b.get(*k))
        .collect();
    let elapsed = t0.elapsed();
    Verdict::new(
        differing.is_empty() && a.len() >= 10,
        format!(
            "{} files compared (parallel vs sequential), {} differ; {elapsed:.1?}",
            a.len(),
            differing.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. Weighted arbitration at w = 1 and w = 0.

fn degenerate_weights() -> Verdict {
    let world: GridWorld<f64> = GridWorld::builder(5, 5)
        .wall((2, 2))
        .build()
        .expect("fixture");
    let experiment = Experiment::new(
        world.clone(),
        ControllerSpec::default(),
        AgentParams::default(),
        15,
        vec![11],
    );
    let table = experiment.replay_table(11, 15).expect("pretrained");
    let planner = PlannerConfig::default();
    let (mut checked, mut mb_mismatch, mut mf_mismatch) = (0usize, 0usize, 0usize);
    for tie_seed in 0..5u64 {
        for s in world.open_states().filter(|&s| !world.is_terminal(s)) {
            let mut r1 = ChaCha8Rng::seed_from_u64(tie_seed);
            let mut r2 = ChaCha8Rng::seed_from_u64(tie_seed);
            let weighted =
                select_mode_weighted(&table, &world, s, 1.0, planner, &mut r1).expect("plan");
            let pure = dls_plan(&table, &world, s, planner, &mut r2).expect("plan");
            mb_mismatch += usize::from(weighted.action != pure.chosen_action);

            let mut r1 = ChaCha8Rng::seed_from_u64(tie_seed);
            let mut r2 = ChaCha8Rng::seed_from_u64(tie_seed);
            let weighted =
                select_mode_weighted(&table, &world, s, 0.0, planner, &mut r1).expect("plan");
            mf_mismatch += usize::from(weighted.action != greedy_action(&table, s, &mut r2));
            checked += 1;
        }
    }
    Verdict::new(
        mb_mismatch == 0 && mf_mismatch == 0,
        format!("{checked} state/seed pairs: {mb_mismatch} disagree with the planner at w=1, {mf_mismatch} with greedy MF at w=0"),
    )
}

fn main() -> ExitCode {
    let mut verdicts: Vec<(u32, &str, Verdict)> = Vec::new();
    let mut record = |n, name, v: Verdict| {
        println!(
            "{} criterion {n} ({name}): {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        verdicts.push((n, name, v));
    };
    record(1, "interleaving schedule", schedule_exactness());
    record(2, "oracle exactness", oracle_exactness());
    record(3, "early steps ordering", fig2_ordering());
    let t0 = Instant::now();
    let runs = LongRuns {
        mb: default_experiment(ControllerSpec::PureMb, 100),
        dual: default_experiment(ControllerSpec::default(), 100),
    };
    println!(
        "     (100-trial MB and Dual runs over {SEEDS} seeds took {:.1?})",
        t0.elapsed()
    );
    record(4, "response time decay", response_time_decay(&runs));
    record(5, "response time plateau", response_time_plateau(&runs));
    record(6, "convergence quality", convergence_quality(&runs));
    record(7, "table invariants", table_invariants());
    record(8, "determinism", determinism());
    record(9, "degenerate weights", degenerate_weights());

    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.2.pass).map(|v| v.0).collect();
    println!(
        "acceptance: {}/{} criteria pass{}",
        verdicts.len() - failed.len(),
        verdicts.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {failed:?}")
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
