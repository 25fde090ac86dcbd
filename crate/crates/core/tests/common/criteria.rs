//! The acceptance checks, parameterized by sample count so the ordinary test
//! suite can run them at reduced scale.

use std::path::Path;

use tabsa::agents::{distance_select, dist_score, request_table, AgentSpec, Choice, DecisionAgent, AgentDecision};
use tabsa::bench::{run_batch, BenchmarkPlan, RunSummary, SeedPolicy};
use tabsa::dqn::{td_gradients, train, DqnHyper, EpisodeStat, Mlp, TrainConfig, Transition};
use tabsa::engine::{Scenario, ScenarioConfig, ScenarioPlugin};
use tabsa::eval::{dqn_reward, EvalResult, NullEval, RewardParams, StatEval, StatParams, StepContext};
use tabsa::geom::{Cell, Point};
use tabsa::navgrid::OccupancyView;
use tabsa::tasks::{Task, TaskCounts, TaskEffect, TaskId, TaskKind};
use tabsa::worldgen::{generate_environment, EnvParams};
use tabsa::{RobotState, Stream};

use super::*;

pub type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fall_at(id: u32, request: f64, deadline: f64, max_delay: f64) -> Task {
    Task::fall(TaskId(id), Point::new(1.0, 1.0), 60.0, max_delay).with_times(request, deadline)
}

fn complete(t: &mut Task) {
    if let TaskEffect::Dwell { remaining, .. } = &mut t.effect {
        *remaining = 0.0;
    }
}

/// Deathtime equals deadline plus maximum delay, and liveness flips exactly
/// when the clock passes it.
pub fn deathtime_formula(samples: usize, seed: u64) -> Check {
    let mut s = Stream::new(seed);
    for i in 0..samples {
        let request = s.uniform(0.0, 10_000.0);
        let deadline = request + s.uniform(0.0, 5_000.0);
        let mut t = if s.chance(0.2) {
            let mut p = Task::patrol(TaskId(0), vec![Point::new(1.0, 1.0)], 3).with_times(request, deadline);
            p.max_delay = None;
            p.recompute_deathtime();
            p
        } else {
            fall_at(0, request, deadline, s.uniform(0.0, 2_000.0))
        };
        let expected = t.max_delay.map(|d| deadline + d);
        ensure(t.deathtime == expected, || format!("sample {i}: {:?} != {:?}", t.deathtime, expected))?;

        let shifted = deadline + s.uniform(-500.0, 500.0);
        t.deadline = shifted;
        t.recompute_deathtime();
        let expected = t.max_delay.map(|d| shifted + d);
        ensure(t.deathtime == expected, || format!("sample {i}: recompute mismatch"))?;

        match expected {
            None => {
                ensure(t.is_alive(f64::MAX), || format!("sample {i}: undying task died"))?;
            }
            Some(death) => {
                let probes = [death - 1.0, death, death + 1e-6, death + 1.0];
                for now in probes {
                    let oracle = now <= death;
                    ensure(t.is_alive(now) == oracle, || format!("sample {i}: liveness at {now}"))?;
                }
                let mut done = t.clone();
                complete(&mut done);
                ensure(done.is_alive(death + 1.0), || format!("sample {i}: completed task died"))?;
            }
        }
    }
    Ok(format!("{samples} tasks"))
}

/// Distance scores and the resulting selection against a sort-based oracle.
pub fn distance_score_selection(samples: usize, seed: u64) -> Check {
    let mut s = Stream::new(seed);
    for i in 0..samples {
        let ratio = if s.chance(0.1) { 0.0 } else { s.uniform(0.0, 5.0) };
        let n = 1 + s.index(6);
        let mut jobs: Vec<Task> = Vec::with_capacity(n);
        for id in 0..n {
            let mut t = fall_at(id as u32, 0.0, 100.0, 900.0);
            t.distance_from_robot = if s.chance(0.05) { f64::INFINITY } else { s.uniform(0.0, 40.0) };
            t.estimated_duration = if s.chance(0.05) { f64::INFINITY } else { s.uniform(0.0, 600.0) };
            if s.chance(0.1) && id > 0 {
                t.distance_from_robot = jobs[0].distance_from_robot;
                t.estimated_duration = jobs[0].estimated_duration;
            }
            jobs.push(t);
        }
        let mut scored: Vec<(f64, u32)> = Vec::new();
        for t in &jobs {
            if !(t.distance_from_robot.is_finite() && t.estimated_duration.is_finite()) {
                continue;
            }
            let oracle = t.distance_from_robot - ratio * t.estimated_duration;
            let got = dist_score(t.distance_from_robot, t.estimated_duration, ratio);
            let rel = (got - oracle).abs() / oracle.abs().max(1e-12);
            ensure(rel <= 1e-9 || got == oracle, || format!("sample {i}: score {got} vs {oracle}"))?;
            scored.push((oracle, t.id.0));
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let expected = scored.first().map_or(Choice::Idle, |b| Choice::Job(TaskId(b.1)));
        let got = distance_select(&jobs, ratio).selected;
        ensure(got == expected, || format!("sample {i}: selected {got:?}, oracle {expected:?}"))?;
    }
    Ok(format!("{samples} job sets"))
}

/// Reward ladder against a lookup oracle on random scenario states.
pub fn reward_ladder(samples: usize, seed: u64) -> Check {
    let params = RewardParams::default();
    let robot = RobotState::new(Point::new(1.0, 1.0), 0.5);
    let mut s = Stream::new(seed);
    for i in 0..samples {
        let n = s.index(5);
        let now = 1_000.0;
        let mut tasks = Vec::new();
        let mut jobs = Vec::new();
        let mut just = Vec::new();
        for id in 0..n as u32 {
            let roll = s.index(4);
            let deadline = if roll == 1 { s.uniform(0.0, 90.0) } else { s.uniform(now, now + 500.0) };
            let mut t = fall_at(id, 0.0, deadline, 900.0 * f64::from(u8::from(roll != 1)) + 1.0);
            match roll {
                0 => {
                    complete(&mut t);
                    if s.chance(0.5) {
                        just.push(t.id);
                    }
                }
                _ => jobs.push(t.id),
            }
            tasks.push(t);
        }
        let decision = match s.index(4) {
            0 => Choice::Idle,
            1 => Choice::Nonexistent,
            _ => Choice::Job(TaskId(s.index(n + 2) as u32)),
        };
        let previous = match s.index(4) {
            0 => None,
            1 => Some(Choice::Idle),
            2 => Some(decision),
            _ => Some(Choice::Job(TaskId(s.index(n + 2) as u32))),
        };
        let ctx = StepContext {
            now,
            tasks: &tasks,
            jobs: &jobs,
            robot: &robot,
            just_completed: &just,
            executed: None,
        };
        let state = LadderState {
            all_complete: tasks.iter().all(|t| t.is_completed()),
            any_dead: jobs.iter().any(|id| {
                let t = &tasks[id.0 as usize];
                t.deathtime.is_some_and(|d| now > d) && !t.is_completed()
            }),
            just_completed: !just.is_empty(),
            no_jobs: jobs.is_empty(),
            decision_is_job: matches!(decision, Choice::Job(id) if jobs.contains(&id)),
            decision_changed: choice_differs(previous, decision),
        };
        let expected = reward_oracle(state, &params);
        let (reward, terminate, _) = dqn_reward(decision, &ctx, &params, previous);
        ensure((reward, terminate) == expected, || {
            format!("sample {i}: got ({reward}, {terminate}), oracle {expected:?} for {state:?}")
        })?;
    }
    Ok(format!("{samples} states"))
}

/// Generated maps are connected, keep doors clear and hold objects on
/// furniture.
pub fn worldgen_properties(maps: usize, seed: u64) -> Check {
    let mut s = Stream::new(seed);
    for i in 0..maps {
        let door = s.uniform(0.8, 1.2);
        let params = EnvParams {
            width_m: s.uniform(5.0, 14.0),
            height_m: s.uniform(5.0, 14.0),
            door_width_m: door,
            min_room_m: s.uniform(2.0 * door, 3.5),
            max_depth: 1 + s.index(4) as u32,
            furniture_per_room: s.index(4) as u32,
            objects_per_furniture: 1 + s.index(3) as u32,
            ..EnvParams::default()
        };
        let map_seed = s.next_u64();
        let map = generate_environment(&params, map_seed).map_err(|e| format!("map {i}: {e}"))?;
        ensure(free_space_connected(&map), || format!("map {i} (seed {map_seed}) is disconnected"))?;
        ensure(doors_clear(&map), || format!("map {i} (seed {map_seed}) blocks a door"))?;
        ensure(objects_on_furniture(&map), || format!("map {i} (seed {map_seed}) has a floating object"))?;
    }
    Ok(format!("{maps} maps"))
}

/// Planner lengths against the quadratic Dijkstra oracle.
pub fn planner_optimality(grids: usize, seed: u64) -> Check {
    let mut s = Stream::new(seed);
    let res = 0.1;
    let mut reachable = 0;
    for i in 0..grids {
        let cols = 2 + s.index(49);
        let rows = 2 + s.index(49);
        let density = s.uniform(0.0, 0.35);
        let blocked = random_grid(&mut s, cols, rows, density);
        let free: Vec<usize> = (0..cols * rows).filter(|j| !blocked[*j]).collect();
        if free.is_empty() {
            continue;
        }
        let a = free[s.index(free.len())];
        let b = free[s.index(free.len())];
        let (ca, cb) = (Cell::new(a % cols, a / cols), Cell::new(b % cols, b / cols));
        let view = OccupancyView::new(grid_map(cols, rows, &blocked, res));
        let got = view.path_length(cell_center(ca, res), cell_center(cb, res));
        let oracle = dijkstra_oracle(cols, rows, &blocked, ca, cb) * res;
        if oracle.is_finite() {
            reachable += 1;
        }
        let ok = (got.is_infinite() && oracle.is_infinite()) || (got - oracle).abs() <= 1e-9;
        ensure(ok, || format!("grid {i} ({cols}x{rows}): planner {got}, oracle {oracle}"))?;
    }
    Ok(format!("{grids} grids, {reachable} with a path"))
}

/// Request-table partition against the selection-based greedy oracle.
pub fn schedule_partition(sets: usize, seed: u64) -> Check {
    let mut s = Stream::new(seed);
    for i in 0..sets {
        let n = 1 + s.index(8);
        let mut specs = Vec::with_capacity(n);
        let mut jobs = Vec::with_capacity(n);
        for id in 0..n as u32 {
            let spec = JobSpec {
                id,
                priority: s.index(4) as u32,
                request_time: (s.index(5) * 100) as f64,
                deadline: s.uniform(500.0, 2_000.0).round(),
                estimate: if s.chance(0.05) { f64::INFINITY } else { s.uniform(10.0, 400.0).round() },
            };
            let mut t = fall_at(id, spec.request_time, spec.deadline, 900.0);
            t.priority = spec.priority;
            t.estimated_duration = spec.estimate;
            specs.push(spec);
            jobs.push(t);
        }
        let (sched, rejected) = greedy_schedule_oracle(&specs);
        let table = request_table(&jobs, 0.0);
        let got: Vec<(u32, f64, f64)> = table.scheduled.iter().map(|sl| (sl.id.0, sl.start, sl.end)).collect();
        let got_rej: Vec<u32> = table.rejected.iter().map(|id| id.0).collect();
        ensure(got == sched && got_rej == rejected, || {
            format!("set {i}: table {got:?}/{got_rej:?}, oracle {sched:?}/{rejected:?}")
        })?;
        ensure(pairwise_disjoint(&table.scheduled), || format!("set {i}: overlapping slots"))?;
    }
    Ok(format!("{sets} job sets"))
}

fn flatten(g: &tabsa::dqn::Gradients) -> Vec<f64> {
    let mut out = Vec::new();
    for (w, b) in g.weights.iter().zip(&g.biases) {
        out.extend_from_slice(w);
        out.extend_from_slice(b);
    }
    out
}

/// Backpropagated gradients against central differences of the loss.
pub fn gradient_agreement(nets: usize, seed: u64) -> Check {
    let mut s = Stream::new(seed);
    let mut worst: f64 = 0.0;
    for i in 0..nets {
        let mut sizes = vec![2 + s.index(4)];
        for _ in 0..1 + s.index(2) {
            sizes.push(2 + s.index(5));
        }
        sizes.push(2 + s.index(3));
        let mut net = Mlp::random(&sizes, &mut s);
        let mut p = net.params();
        for v in &mut p {
            *v += s.uniform(-0.1, 0.1);
        }
        net.set_params(&p);
        let batch: Vec<Transition> = (0..1 + s.index(4))
            .map(|_| Transition {
                state: (0..sizes[0]).map(|_| s.uniform(-1.0, 1.0)).collect(),
                action: s.index(*sizes.last().unwrap()),
                reward: s.uniform(-1.0, 1.0),
                next_state: vec![0.0; sizes[0]],
                terminal: true,
            })
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        let targets: Vec<f64> = (0..refs.len()).map(|_| s.uniform(-2.0, 2.0)).collect();
        let (_, grads) = td_gradients(&net, &refs, &targets);
        let rel = gradient_check(&net, &refs, &targets, &flatten(&grads), 1e-6);
        worst = worst.max(rel);
        ensure(rel <= 1e-4, || format!("net {i} {sizes:?}: relative error {rel:e}"))?;
    }
    Ok(format!("{nets} nets, worst relative error {worst:.1e}"))
}

/// Small scenario used by the property and determinism checks.
pub fn small_config(seed: u64, per_type: u32) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default().with_seed(seed);
    cfg.env.width_m = 6.0;
    cfg.env.height_m = 6.0;
    cfg.tasks.counts = TaskCounts::uniform(per_type);
    cfg.horizon = 1_800.0;
    cfg
}

/// Same config, same trace hash; batch results independent of thread count.
pub fn determinism(seeds: usize, dir: &Path) -> Check {
    let specs = [
        AgentSpec::SimpleShortest { hesitance: 0.5 },
        AgentSpec::Scheduler,
    ];
    for seed in 0..3u64 {
        for spec in &specs {
            let mut cfg = small_config(seed, 3);
            cfg.plugins = vec![tabsa::engine::PluginSpec::DurationNoise { std: 0.2 }];
            let hash = |cfg: &ScenarioConfig| -> Result<String, String> {
                let mut sc = Scenario::new(cfg).map_err(|e| e.to_string())?;
                let mut agent = spec.build(sc.seeds.agent_seed, sc.map().diagonal()).map_err(|e| e.to_string())?;
                let mut eval = StatEval::new(StatParams::default());
                Ok(sc.run(agent.as_mut(), &mut eval).trace_hash)
            };
            let (a, b) = (hash(&cfg)?, hash(&cfg)?);
            ensure(a == b, || format!("seed {seed}: hashes differ"))?;
        }
    }

    let net_a = dir.join("det_a.bin");
    let net_b = dir.join("det_b.bin");
    Mlp::random(&[36, 16, 12], &mut Stream::new(1)).save_file(&net_a).map_err(|e| e.to_string())?;
    Mlp::random(&[36, 16, 12], &mut Stream::new(2)).save_file(&net_b).map_err(|e| e.to_string())?;
    let plan = BenchmarkPlan {
        agents: six_agents(&net_a, &net_b),
        scenario: small_config(0, 4),
        seed_policy: SeedPolicy::FreshPerRun,
        runs: seeds,
        base_seed: 77,
        stats: StatParams::default(),
        output_dir: None,
    };
    let serial = run_batch(&plan, 1).map_err(|e| e.to_string())?;
    let parallel = run_batch(&plan, 4).map_err(|e| e.to_string())?;
    ensure(serial.len() == parallel.len(), || "batch sizes differ".into())?;
    for (a, b) in serial.iter().zip(&parallel) {
        ensure(a.same_result(b), || format!("{} run {} differs across thread counts", a.agent, a.run))?;
    }
    Ok(format!("6 agents x {seeds} seeds, 1 vs 4 threads"))
}

pub fn six_agents(net_a: &Path, net_b: &Path) -> Vec<AgentSpec> {
    vec![
        AgentSpec::Distance { ratio: 0.5 },
        AgentSpec::Dqn {
            network: net_a.to_path_buf(),
            n_per_type: 4,
        },
        AgentSpec::Dqn {
            network: net_b.to_path_buf(),
            n_per_type: 4,
        },
        AgentSpec::Scheduler,
        AgentSpec::SimpleLongest { hesitance: 0.5 },
        AgentSpec::SimpleShortest { hesitance: 0.5 },
    ]
}

/// Training configuration of the smoke test: 5 x 5 m map, three tasks per
/// type, half-hour horizon.
pub fn smoke_training_config(seed: u64) -> TrainConfig {
    let mut scenario = ScenarioConfig::default();
    scenario.env.width_m = 5.0;
    scenario.env.height_m = 5.0;
    scenario.tasks.counts = TaskCounts::uniform(3);
    scenario.horizon = 1_800.0;
    scenario.record_trace = false;
    TrainConfig {
        scenario,
        hyper: DqnHyper::default(),
        rewards: RewardParams::default(),
        n_per_type: 4,
        seed,
    }
}

pub fn mean_reward(curve: &[EpisodeStat]) -> f64 {
    curve.iter().map(|e| e.total_reward).sum::<f64>() / curve.len() as f64
}

/// Mean reward of the last 20 episodes beats the first 20.
pub fn training_improves(episodes: usize, seed: u64) -> Check {
    let cfg = smoke_training_config(seed);
    let (_, curve) = train(&cfg, episodes).map_err(|e| e.to_string())?;
    let k = 20.min(episodes / 2);
    let first = mean_reward(&curve[..k]);
    let last = mean_reward(&curve[curve.len() - k..]);
    ensure(last > first, || format!("first {k} mean {first:.1}, last {k} mean {last:.1}"))?;
    Ok(format!("first {k} mean {first:.1} -> last {k} mean {last:.1}"))
}

/// Per-agent figures used by the agent comparison.
#[derive(Debug, Clone)]
pub struct AgentFigures {
    pub label: String,
    pub runs: usize,
    pub completed_scenarios: usize,
    pub mean_abs_delta: f64,
    pub completed_by_kind: Vec<(TaskKind, u64)>,
}

pub fn figures(summaries: &[RunSummary], agents: usize) -> Vec<AgentFigures> {
    (0..agents)
        .map(|a| {
            let mine: Vec<&RunSummary> = summaries.iter().filter(|s| s.agent_index == a).collect();
            let completed_scenarios = mine
                .iter()
                .filter(|s| s.outcome.as_ref().is_some_and(|o| o.kind == tabsa::OutcomeKind::AllCompleted))
                .count();
            let deltas: Vec<f64> = mine
                .iter()
                .filter_map(|s| s.stats.as_ref())
                .flat_map(|st| st.task_completion_to_deadline.iter().map(|d| d.seconds.abs()))
                .collect();
            let mean_abs_delta = if deltas.is_empty() {
                f64::INFINITY
            } else {
                deltas.iter().sum::<f64>() / deltas.len() as f64
            };
            let completed_by_kind = [TaskKind::Fall, TaskKind::Patrol, TaskKind::PickAndPlace]
                .into_iter()
                .map(|k| {
                    let n = mine
                        .iter()
                        .filter_map(|s| s.stats.as_ref())
                        .map(|st| st.num_of_tasks_completed.get(k) as u64)
                        .sum();
                    (k, n)
                })
                .collect();
            AgentFigures {
                label: mine.first().map_or_else(String::new, |s| s.agent.clone()),
                runs: mine.len(),
                completed_scenarios,
                mean_abs_delta,
                completed_by_kind,
            }
        })
        .collect()
}

/// Picks a uniformly random job, idles, or names a task that is not a job.
pub struct ChaosAgent {
    pub stream: Stream,
}

impl DecisionAgent for ChaosAgent {
    fn name(&self) -> &str {
        "chaos"
    }

    fn select_task(&mut self, jobs: &[Task], _now: f64, _last: &EvalResult) -> AgentDecision {
        let selected = match self.stream.index(10) {
            0 => Choice::Idle,
            1 => Choice::Job(TaskId(10_000)),
            _ if jobs.is_empty() => Choice::Idle,
            _ => Choice::Job(jobs[self.stream.index(jobs.len())].id),
        };
        AgentDecision {
            selected,
            considered: jobs.iter().map(|t| t.id).collect(),
        }
    }
}

/// Moves every job's deadline by a random amount each step.
pub struct DeadlineJitter {
    pub stream: Stream,
}

impl ScenarioPlugin for DeadlineJitter {
    fn name(&self) -> &str {
        "deadline-jitter"
    }

    fn update_job(&mut self, task: &mut Task, _now: f64) {
        task.deadline += self.stream.uniform(-20.0, 20.0);
    }
}

/// A started, non-preemptive, unfinished and live job keeps the robot no
/// matter what the agent asks for.
pub fn non_preemption_holds(seed: u64) -> Result<usize, String> {
    let cfg = small_config(seed, 3);
    let mut sc = Scenario::new(&cfg).map_err(|e| e.to_string())?;
    let mut agent = ChaosAgent {
        stream: Stream::new(seed ^ 0xA5A5),
    };
    let mut eval = NullEval;
    let mut checked = 0;
    loop {
        let pinned = sc.robot.active_task.filter(|id| {
            let t = sc.task(*id);
            sc.jobs.contains(id) && !t.preemptive && t.started && !t.is_completed()
        });
        let out = sc.step(&mut agent, &mut eval);
        let ev = sc.last_event().ok_or("trace not recorded")?;
        let executed_step = ev.outcome.is_none() || ev.outcome == Some(tabsa::OutcomeKind::TimedOut);
        if let (Some(id), true) = (pinned, executed_step) {
            let alive = sc.task(id).deathtime.is_none_or(|d| ev.now <= d);
            if alive {
                checked += 1;
                ensure(ev.executed == Some(id), || {
                    format!("step {}: pinned {id} but executed {:?} (decision {:?})", ev.step, ev.executed, ev.decision)
                })?;
            }
        }
        if out.is_some() {
            return Ok(checked);
        }
    }
}

/// Jobs are exactly the called, unfinished tasks, and every decision names a
/// job or nothing once the engine has checked it.
pub fn jobs_subset_holds(seed: u64) -> Result<(), String> {
    let cfg = small_config(seed, 3);
    let mut sc = Scenario::new(&cfg).map_err(|e| e.to_string())?;
    let mut agent = ChaosAgent {
        stream: Stream::new(seed ^ 0x5A5A),
    };
    let mut eval = NullEval;
    let mut was_completed = vec![false; sc.tasks.len()];
    let mut was_dead = vec![false; sc.tasks.len()];
    loop {
        let out = sc.step(&mut agent, &mut eval);
        let ev = sc.last_event().ok_or("trace not recorded")?;
        for id in &ev.jobs {
            let t = sc.task(*id);
            ensure(t.request_time <= ev.now, || format!("step {}: uncalled job {id}", ev.step))?;
        }
        match ev.decision {
            Choice::Job(id) => ensure(ev.jobs.contains(&id), || format!("step {}: decision {id} not a job", ev.step))?,
            Choice::Idle | Choice::Nonexistent => {}
        }
        if out.is_none() {
            for id in &sc.jobs {
                ensure(!sc.task(*id).is_completed(), || format!("step {}: completed job {id} kept", ev.step))?;
            }
            let expected: Vec<TaskId> = sc
                .tasks
                .iter()
                .filter(|t| t.request_time <= ev.now && !t.is_completed())
                .map(|t| t.id)
                .collect();
            ensure(sc.jobs == expected, || format!("step {}: jobs {:?} vs {:?}", ev.step, sc.jobs, expected))?;
        }
        for (i, t) in sc.tasks.iter().enumerate() {
            let done = t.is_completed();
            let dead = !t.is_alive(sc.now);
            ensure(!(was_completed[i] && !done), || format!("task {i} lost its completion"))?;
            ensure(!(was_dead[i] && !dead && !done), || format!("task {i} came back to life"))?;
            was_completed[i] = done;
            was_dead[i] = dead;
        }
        if out.is_some() {
            return Ok(());
        }
    }
}

/// After plugins mutate deadlines and durations, every job still satisfies
/// the deathtime formula.
pub fn deathtime_after_plugins_holds(seed: u64) -> Result<usize, String> {
    let mut cfg = small_config(seed, 3);
    cfg.plugins = vec![tabsa::engine::PluginSpec::DurationNoise { std: 0.3 }];
    let mut sc = Scenario::new(&cfg).map_err(|e| e.to_string())?;
    sc.add_plugin(Box::new(DeadlineJitter {
        stream: Stream::new(seed ^ 0x77),
    }));
    let mut agent = ChaosAgent {
        stream: Stream::new(seed ^ 0x99),
    };
    let mut eval = NullEval;
    let mut checked = 0;
    loop {
        let out = sc.step(&mut agent, &mut eval);
        for id in &sc.jobs {
            let t = sc.task(*id);
            let expected = t.max_delay.map(|d| t.deadline + d);
            checked += 1;
            ensure(t.deathtime == expected, || format!("job {id}: deathtime {:?} vs {:?}", t.deathtime, expected))?;
        }
        if out.is_some() {
            return Ok(checked);
        }
    }
}
