//! Oracles and whole-criterion checks shared by the integration tests and
//! the acceptance report. Each `check_*` returns a one-line summary on
//! success and a reason on failure.
#![allow(dead_code)]

use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use deskbench::config::ScenarioConfig;
use deskbench::envs::macs::RewardKind;
use deskbench::envs::{
    Environment, ExplorationConfig, ExplorationEnv, MacsConfig, MacsEnv, RobotCommand, SocialNavEnv, SocialNavScenario,
};
use deskbench::grid::GridMap;
use deskbench::metrics::seating::{Preference, PreferenceKind, Seat};
use deskbench::metrics::{score_seating, SeatingPlan, SeatingProblem};
use deskbench::parallel::VecEnv;
use deskbench::planners::policies::{global_path, random_macs_actions, random_robot_command};
use deskbench::planners::{astar, astar_world, braking_rollout, dwa_control, DwaParams, Mppi, MppiParams};
use deskbench::record::Task;
use deskbench::report::Aggregates;
use deskbench::rng::{seeded_rng, EnvSeed, SimRng};
use deskbench::runner::run_scenario;
use deskbench::sim::{SensorFrame, SensorReading};
use deskbench::{Error, Pose, Vec2};
use rand::Rng;

pub type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($fmt)+));
        }
    };
}

// ---------------------------------------------------------------- A*

/// Plain Dijkstra over a boolean occupancy array, with its own move rule:
/// 8 neighbours, diagonals only past two free orthogonal cells.
pub fn dijkstra(occ: &[Vec<bool>], start: (usize, usize), goal: (usize, usize)) -> Option<f64> {
    let h = occ.len() as i64;
    let w = occ[0].len() as i64;
    let mut dist = vec![vec![f64::INFINITY; w as usize]; h as usize];
    let mut heap = BinaryHeap::new();
    dist[start.1][start.0] = 0.0;
    // Costs stored negated in integer nano-units so the max-heap pops the minimum.
    heap.push((0i64, start.0, start.1));
    let free = |x: i64, y: i64| x >= 0 && y >= 0 && x < w && y < h && !occ[y as usize][x as usize];
    while let Some((neg, x, y)) = heap.pop() {
        let d = -neg as f64 / 1e9;
        if (x, y) == goal {
            return Some(dist[y][x]);
        }
        if d > dist[y][x] + 1e-6 {
            continue;
        }
        for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if !free(nx, ny) {
                    continue;
                }
                if dx != 0 && dy != 0 && (!free(x as i64 + dx, y as i64) || !free(x as i64, y as i64 + dy)) {
                    continue;
                }
                let step = if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
                let nd = dist[y][x] + step;
                if nd < dist[ny as usize][nx as usize] - 1e-12 {
                    dist[ny as usize][nx as usize] = nd;
                    heap.push((-(nd * 1e9).round() as i64, nx as usize, ny as usize));
                }
            }
        }
    }
    None
}

pub type Grid = (Vec<Vec<bool>>, GridMap, (usize, usize), (usize, usize));

pub fn random_grid(seed: u64) -> Grid {
    let mut rng = seeded_rng(seed);
    let w = rng.random_range(2..=30);
    let h = rng.random_range(2..=30);
    let occ: Vec<Vec<bool>> = (0..h).map(|_| (0..w).map(|_| rng.random_bool(0.3)).collect()).collect();
    let mut grid = GridMap::new(Vec2::ZERO, 1.0, w, h);
    for (y, row) in occ.iter().enumerate() {
        for (x, &o) in row.iter().enumerate() {
            grid.set((x, y), o);
        }
    }
    let free: Vec<(usize, usize)> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| !occ[y][x]).collect();
    let pick = |rng: &mut SimRng| free[rng.random_range(0..free.len().max(1))];
    let (s, g) = if free.is_empty() { ((0, 0), (0, 0)) } else { (pick(&mut rng), pick(&mut rng)) };
    (occ, grid, s, g)
}

pub fn check_astar_optimal(grids: u64) -> Check {
    let mut solvable = 0;
    for seed in 0..grids {
        let (occ, grid, s, g) = random_grid(seed);
        if occ[s.1][s.0] {
            continue;
        }
        match (astar(&grid, s, g), dijkstra(&occ, s, g)) {
            (Ok(p), Some(oracle)) => {
                solvable += 1;
                let c = p.cost_cells(1.0);
                ensure!((c - oracle).abs() < 1e-9, "grid {seed}: A* {c} vs Dijkstra {oracle}");
                ensure!(p.cells.first() == Some(&s) && p.cells.last() == Some(&g), "grid {seed}: wrong endpoints");
            }
            (Err(Error::NoPath { .. }), None) => {}
            (a, b) => return Err(format!("grid {seed}: astar {a:?}, dijkstra {b:?}")),
        }
    }
    ensure!(solvable > grids / 2, "only {solvable} solvable instances");
    Ok(format!("{solvable}/{grids} solvable grids, all costs equal"))
}

// ---------------------------------------------------------------- seating

const ATTRS: [&str; 3] = ["window", "aisle", "near_exit"];

pub fn random_problem(rng: &mut SimRng) -> SeatingProblem {
    let n_seats = rng.random_range(2..=6);
    let n_guests = rng.random_range(2..=n_seats);
    let seats = (0..n_seats)
        .map(|i| Seat {
            id: format!("s{i}"),
            attributes: ATTRS.iter().filter(|_| rng.random_bool(0.4)).map(|a| a.to_string()).collect(),
        })
        .collect();
    let mut adjacency = Vec::new();
    for a in 0..n_seats {
        for b in a + 1..n_seats {
            if rng.random_bool(0.4) {
                adjacency.push((format!("s{a}"), format!("s{b}")));
            }
        }
    }
    let guests: Vec<String> = (0..n_guests).map(|i| format!("g{i}")).collect();
    let preferences = (0..rng.random_range(1..=8))
        .map(|_| {
            let guest = guests[rng.random_range(0..n_guests)].clone();
            let other = guests[rng.random_range(0..n_guests)].clone();
            let kind = match rng.random_range(0..3) {
                0 => PreferenceKind::SitNextTo { other },
                1 => PreferenceKind::AvoidAdjacent { other },
                _ => PreferenceKind::SeatAttribute {
                    attribute: ATTRS[rng.random_range(0..ATTRS.len())].to_string(),
                },
            };
            Preference {
                guest,
                weight: rng.random_range(1..=3),
                kind,
            }
        })
        .collect();
    SeatingProblem {
        seats,
        adjacency,
        guests,
        preferences,
    }
}

/// Every injective map from guests to seat indices.
pub fn all_assignments(n_guests: usize, n_seats: usize) -> Vec<Vec<usize>> {
    fn go(k: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for s in 0..n {
            if !cur.contains(&s) {
                cur.push(s);
                go(k, n, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(n_guests, n_seats, &mut Vec::new(), &mut out);
    out
}

/// Direct evaluation: looks seats and adjacency up by string on every query.
pub fn seating_oracle(problem: &SeatingProblem, seat_of: &[usize]) -> (Vec<bool>, Option<f64>, Option<f64>) {
    let guest_seat = |g: &str| {
        let i = problem.guests.iter().position(|x| x == g).unwrap();
        &problem.seats[seat_of[i]]
    };
    let adjacent = |a: &str, b: &str| problem.adjacency.iter().any(|(x, y)| (x == a && y == b) || (x == b && y == a));
    let flags: Vec<bool> = problem
        .preferences
        .iter()
        .map(|p| {
            let mine = guest_seat(&p.guest);
            match &p.kind {
                PreferenceKind::SitNextTo { other } => adjacent(&mine.id, &guest_seat(other).id),
                PreferenceKind::AvoidAdjacent { other } => !adjacent(&mine.id, &guest_seat(other).id),
                PreferenceKind::SeatAttribute { attribute } => mine.attributes.contains(attribute),
            }
        })
        .collect();
    let rate = |w: u8| {
        let sel: Vec<bool> = problem.preferences.iter().zip(&flags).filter(|(p, _)| p.weight == w).map(|(_, &f)| f).collect();
        (!sel.is_empty()).then(|| sel.iter().filter(|&&f| f).count() as f64 / sel.len() as f64)
    };
    let (hi, lo) = (rate(3), rate(1));
    (flags, hi, lo)
}

pub fn plan_of(problem: &SeatingProblem, seat_of: &[usize]) -> SeatingPlan {
    SeatingPlan {
        assignment: problem
            .guests
            .iter()
            .zip(seat_of)
            .map(|(g, &s)| (g.clone(), problem.seats[s].id.clone()))
            .collect::<BTreeMap<_, _>>(),
    }
}

pub fn check_seating_oracle(problems: usize) -> Check {
    let mut rng = seeded_rng(2024);
    let mut plans = 0;
    for k in 0..problems {
        let problem = random_problem(&mut rng);
        for seat_of in all_assignments(problem.guests.len(), problem.seats.len()) {
            let got = score_seating(&problem, &plan_of(&problem, &seat_of)).map_err(|e| format!("problem {k}: {e}"))?;
            let (flags, hi, lo) = seating_oracle(&problem, &seat_of);
            ensure!(got.satisfied == flags, "problem {k} plan {seat_of:?}: flags differ");
            ensure!(got.s_high == hi && got.s_low == lo, "problem {k} plan {seat_of:?}: rates differ");
            ensure!(got.pg == hi.zip(lo).map(|(h, l)| h - l), "problem {k} plan {seat_of:?}: PG differs");
            plans += 1;
        }
    }
    Ok(format!("{problems} problems, {plans} plans enumerated"))
}

// ---------------------------------------------------------------- MACS

/// The twelve documented defaults, as written in the parameter table
/// (sensor range in centimeters).
pub const MACS_TABLE: [(&str, f64); 12] = [
    ("n_agents", 5.0),
    ("n_supplies", 10.0),
    ("n_hazards", 10.0),
    ("n_coop", 2.0),
    ("n_sensors", 30.0),
    ("sensor_range", 500.0),
    ("max_cycles", 500.0),
    ("supply_reward", 10.0),
    ("hazard_reward", -1.0),
    ("encounter_reward", 0.01),
    ("thrust_penalty", -0.01),
    ("local_ratio", 0.9),
];

pub fn check_macs_table() -> Check {
    let header = "task = \"macs\"\n[policy]\nname = \"random\"\n[macs]\n";
    let from_empty = ScenarioConfig::from_toml(header).map_err(|e| e.to_string())?.macs_config();
    for (which, cfg) in [("default", MacsConfig::default()), ("loader", from_empty)] {
        let v = toml::Value::try_from(&cfg).map_err(|e| e.to_string())?;
        for (key, want) in MACS_TABLE {
            let got = v.get(key).and_then(|x| x.as_float().or(x.as_integer().map(|i| i as f64)));
            ensure!(got == Some(want), "{which}: {key} = {got:?}, table says {want}");
        }
    }
    let mut text = String::from(header);
    for (k, v) in MACS_TABLE {
        if k.starts_with("n_") || k == "max_cycles" {
            text += &format!("{k} = {}\n", v as i64);
        } else {
            text += &format!("{k} = {v:?}\n");
        }
    }
    let written = ScenarioConfig::from_toml(&text).map_err(|e| e.to_string())?.macs_config();
    ensure!(written == MacsConfig::default(), "explicit table values differ from defaults");
    Ok("12/12 defaults match".into())
}

pub fn check_macs_conservation(steps: usize) -> Check {
    let cfg = MacsConfig::default();
    let n = cfg.n_agents;
    let mut env = MacsEnv::new(cfg.clone()).map_err(|e| e.to_string())?;
    env.reset_with(Some(EnvSeed::new(21))).map_err(|e| e.to_string())?;
    let mut rng = seeded_rng(21);
    let (mut events, mut captures) = (0, 0);
    for step in 0..steps {
        if env.is_done() {
            env.reset_with(None).map_err(|e| e.to_string())?;
        }
        let actions = random_macs_actions(n, &mut rng);
        let (_, rewards, _) = env.step_agents(&actions).map_err(|e| e.to_string())?;
        let mut expect = vec![0.0; n];
        for e in &rewards.events {
            events += 1;
            captures += matches!(e.kind, RewardKind::Capture { .. }) as usize;
            let sum: f64 = e.credits.iter().sum();
            ensure!((sum - e.value).abs() <= 1e-9, "step {step}: credits {sum} vs value {}", e.value);
            ensure!(!e.involved.is_empty() && e.involved.iter().all(|&a| a < n), "step {step}: bad involved set");
            for (a, c) in e.credits.iter().enumerate() {
                let local = if e.involved.contains(&a) { cfg.local_ratio * e.value / e.involved.len() as f64 } else { 0.0 };
                let want = local + (1.0 - cfg.local_ratio) * e.value / n as f64;
                ensure!((c - want).abs() <= 1e-12, "step {step} agent {a}: credit {c} vs {want}");
                expect[a] += c;
            }
        }
        for (a, act) in actions.iter().enumerate() {
            let u = act.clamped();
            expect[a] += cfg.thrust_penalty * (u.x * u.x + u.y * u.y);
        }
        for (got, want) in rewards.totals().iter().zip(&expect) {
            ensure!((got - want).abs() <= 1e-9, "step {step}: total {got} vs {want}");
        }
    }
    ensure!(events > 0, "no reward events in {steps} steps");
    Ok(format!("{events} events ({captures} captures) conserved"))
}

pub fn macs_mean_return(policy: &str, episodes: u32) -> Result<f64, String> {
    let mut cfg = ScenarioConfig::new(Task::Macs, policy);
    cfg.episodes = episodes;
    let (report, _) = run_scenario(&cfg).map_err(|e| e.to_string())?;
    match report.aggregates {
        Aggregates::Macs { mean_episodic_return_per_agent, .. } => Ok(mean_episodic_return_per_agent),
        other => Err(format!("unexpected aggregates {other:?}")),
    }
}

pub fn check_random_return(episodes: u32) -> Check {
    let r = macs_mean_return("random", episodes)?;
    ensure!((-20.0..0.0).contains(&r), "mean return {r} outside [-20, 0)");
    Ok(format!("mean return per agent {r:.3} over {episodes} episodes"))
}

// ---------------------------------------------------------------- social navigation

/// Total score of `policy` on seeds 0..5 × 4 episodes of the default crowd.
pub fn socialnav_total(policy: &str) -> Result<f64, String> {
    let mut cfg = ScenarioConfig::new(Task::Socialnav, policy);
    cfg.seeds = (0..5).collect();
    cfg.episodes = 4;
    cfg.socialnav = Some(SocialNavScenario::default());
    let (report, _) = run_scenario(&cfg).map_err(|e| e.to_string())?;
    match report.aggregates {
        Aggregates::Socialnav(s) => Ok(s.total),
        other => Err(format!("unexpected aggregates {other:?}")),
    }
}

pub fn check_planner_ordering() -> Check {
    let sc = SocialNavScenario::default();
    ensure!(
        sc.arena_radius == 20.0 && sc.n_pedestrians == 30 && sc.min_start_goal_dist >= 40.0 - 1e-9,
        "default crowd is not r=20, 30 pedestrians, 40 m apart"
    );
    let (mppi, dwa, oracle) = (socialnav_total("mppi")?, socialnav_total("dwa")?, socialnav_total("oracle")?);
    let line = format!("Total mppi {mppi:.1}, dwa {dwa:.1}, oracle {oracle:.1}");
    ensure!(mppi > dwa && mppi < oracle && dwa < oracle, "{line}");
    Ok(line)
}

/// Checks each rollout pose against the raw lidar returns rather than
/// through the planner's costmap.
fn rollout_clear(hits: &[Vec2], poses: &[Pose], radius: f64) -> Result<(), String> {
    for q in poses {
        for h in hits {
            let d = h.distance(q.position);
            if d < radius {
                return Err(format!("pose {:?} is {d} from return {h:?}", q.position));
            }
        }
    }
    Ok(())
}

pub fn check_dwa_admissible(episodes: u64) -> Check {
    let p = DwaParams::default();
    let (mut checked, mut recoveries) = (0, 0);
    for seed in 0..episodes {
        let mut env = SocialNavEnv::new(SocialNavScenario::default()).map_err(|e| e.to_string())?;
        let mut obs = env.reset_with(Some(EnvSeed::new(seed))).map_err(|e| e.to_string())?;
        let path = global_path(&env, 0.5).map_err(|e| e.to_string())?;
        while !env.is_done() {
            let d = dwa_control(obs.pose, obs.velocity, &path, &obs.lidar, &p);
            if d.recovery {
                recoveries += 1;
                ensure!(d.command.v == 0.0, "seed {seed}: recovery command moves");
            } else {
                let hits: Vec<Vec2> = obs.lidar.hit_points().map(|d| obs.pose.position + d).collect();
                rollout_clear(&hits, &braking_rollout(obs.pose, d.command, &p), p.robot_radius)
                    .map_err(|e| format!("seed {seed} t={:.1}: {e}", env.clock()))?;
                checked += 1;
            }
            obs = env.step_command(d.command).map_err(|e| e.to_string())?.0;
        }
    }
    ensure!(checked > 100 * episodes, "only {checked} commands checked");
    Ok(format!("{checked} commands clear, {recoveries} recoveries"))
}

pub fn check_mppi_weights(steps: usize) -> Check {
    let mut env = SocialNavEnv::new(SocialNavScenario::default()).map_err(|e| e.to_string())?;
    let mut obs = env.reset_with(Some(EnvSeed::new(4))).map_err(|e| e.to_string())?;
    let path = global_path(&env, 0.5).map_err(|e| e.to_string())?;
    let mut mppi = Mppi::new(MppiParams::default()).map_err(|e| e.to_string())?;
    let mut rng = seeded_rng(4);
    let mut n = 0;
    while !env.is_done() && n < steps {
        let s = mppi.control(obs.pose, obs.velocity, &path, &obs.lidar, &mut rng);
        ensure!((s.weight_sum - 1.0).abs() <= 1e-9, "step {n}: weights sum to {}", s.weight_sum);
        obs = env.step_command(s.command).map_err(|e| e.to_string())?.0;
        n += 1;
    }
    Ok(format!("{n} steps normalized"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

pub fn check_mppi_convergence() -> Check {
    let miss = SensorReading { distance: 10.0, hit: None, relative_speed: 0.0, body: None };
    let empty = SensorFrame { range: 10.0, origin_heading: 0.0, readings: vec![miss; 72] };
    let pose = Pose::new(Vec2::ZERO, 0.0);
    // Behind and to the left, so a cold start is far from the optimum.
    let goal = Vec2::new(-2.0, 3.0);
    let mut mppi = Mppi::new(MppiParams::default()).map_err(|e| e.to_string())?;
    let mut rng = seeded_rng(11);
    let costs: Vec<f64> = (0..40)
        .map(|_| mppi.control_toward(pose, Default::default(), goal, &empty, &mut rng).plan_cost)
        .collect();
    let (first, last) = (median(costs[..10].to_vec()), median(costs[30..].to_vec()));
    ensure!(last < first, "median plan cost {first} -> {last}");
    Ok(format!("median plan cost {first:.2} -> {last:.2}"))
}

pub fn check_sfm_invariants(n_peds: usize, steps: usize) -> Check {
    let sc = SocialNavScenario { n_pedestrians: n_peds, ..SocialNavScenario::default() };
    let mut env = SocialNavEnv::new(sc.clone()).map_err(|e| e.to_string())?;
    env.reset_with(Some(EnvSeed::new(100))).map_err(|e| e.to_string())?;
    let r = sc.sfm.radius;
    let mut moved = 0.0;
    for step in 0..steps {
        let before: Vec<_> = env.pedestrians().iter().map(|p| p.position()).collect();
        env.step_command(RobotCommand::default()).map_err(|e| e.to_string())?;
        ensure!(!env.is_done(), "episode ended at step {step}");
        let peds = env.pedestrians();
        ensure!(peds.len() == n_peds, "step {step}: {} pedestrians", peds.len());
        let robot = env.robot();
        for (i, p) in peds.iter().enumerate() {
            let speed = p.body.velocity.norm();
            ensure!(speed <= sc.sfm.max_speed + 1e-9, "step {step} pedestrian {i}: speed {speed}");
            moved += p.position().distance(before[i]);
            let mut worst = r + robot.radius - p.position().distance(robot.position());
            for q in &peds[i + 1..] {
                worst = worst.max(2.0 * r - p.position().distance(q.position()));
            }
            for w in env.walls() {
                worst = worst.max(r - w.distance_to(p.position()));
            }
            ensure!(worst <= 1e-6, "step {step} pedestrian {i}: penetration {worst}");
        }
    }
    let mean = moved / n_peds as f64;
    // A crowd that never moves would pass trivially.
    ensure!(mean > 10.0, "mean distance walked {mean}");
    Ok(format!("{n_peds} pedestrians × {steps} steps, mean walk {mean:.1} m"))
}

// ---------------------------------------------------------------- exploration

/// Cells reachable from `start` by 4-connected moves; a 4-connected region is
/// also 8-connected, so anything found here must be A*-reachable.
pub fn flood4(grid: &GridMap, start: (usize, usize)) -> Vec<Vec<bool>> {
    let (w, h) = (grid.width, grid.height);
    let mut seen = vec![vec![false; w]; h];
    let mut q = VecDeque::from([start]);
    seen[start.1][start.0] = true;
    while let Some((x, y)) = q.pop_front() {
        for (dx, dy) in [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x as i64 + dx, y as i64 + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if !seen[ny][nx] && grid.is_free((nx, ny)) {
                seen[ny][nx] = true;
                q.push_back((nx, ny));
            }
        }
    }
    seen
}

pub fn check_exploration_reachable(seeds: u64) -> Check {
    let mut env = ExplorationEnv::new(ExplorationConfig::default()).map_err(|e| e.to_string())?;
    let (mut papers_total, mut via_flood) = (0, 0);
    for seed in 0..seeds {
        env.reset_with(Some(EnvSeed::new(seed))).map_err(|e| e.to_string())?;
        let free = env.free_space();
        let spawn = free.cell_of(env.spawn()).ok_or(format!("seed {seed}: spawn off the map"))?;
        ensure!(free.is_free(spawn), "seed {seed}: spawn cell blocked");
        let flood = flood4(free, spawn);
        let papers = env.papers();
        ensure!(papers.len() == env.config().n_papers, "seed {seed}: {} papers", papers.len());
        for (k, p) in papers.iter().enumerate() {
            let cell = free.cell_of(*p).ok_or(format!("seed {seed} paper {k} off the map"))?;
            ensure!(free.is_free(cell), "seed {seed} paper {k} on a blocked cell");
            let path = astar_world(free, env.spawn(), *p).map_err(|e| format!("seed {seed} paper {k}: {e}"))?;
            ensure!(path.cells.iter().all(|&c| free.is_free(c)), "seed {seed} paper {k}: path crosses a wall");
            via_flood += flood[cell.1][cell.0] as usize;
            papers_total += 1;
        }
    }
    // The 4-connected oracle is stricter, so it may miss a few diagonal-only cells.
    ensure!(via_flood * 10 >= papers_total * 9, "flood oracle reached only {via_flood}/{papers_total}");
    Ok(format!("{papers_total} papers reachable over {seeds} seeds"))
}

// ---------------------------------------------------------------- parallel

pub fn small_macs(_: usize) -> deskbench::Result<MacsEnv> {
    MacsEnv::new(MacsConfig { max_cycles: 40, ..MacsConfig::default() })
}

pub fn small_crowd(_: usize) -> deskbench::Result<SocialNavEnv> {
    SocialNavEnv::new(SocialNavScenario {
        arena_radius: 6.0,
        n_pedestrians: 6,
        min_start_goal_dist: 8.0,
        t_max_wall: 3.0,
        ..SocialNavScenario::default()
    })
}

/// Debug output prints the shortest round-tripping decimal of every float,
/// so equal strings mean bit-identical values.
pub fn fp<T: std::fmt::Debug>(t: &T) -> String {
    format!("{t:?}")
}

/// Runs `n` vectorized envs and `n` standalone envs side by side.
pub fn check_equivalence<E: Environment>(
    n: usize,
    steps: usize,
    base: u64,
    factory: impl Fn(usize) -> deskbench::Result<E> + Copy,
    mut actions: impl FnMut(usize) -> Vec<E::Action>,
) -> Check
where
    E::Observation: std::fmt::Debug,
    E::Action: Clone,
{
    let err = |e: Error| e.to_string();
    let mut vec = VecEnv::new(n, base, factory).map_err(err)?;
    let batch = vec.reset().map_err(err)?;
    let mut solo: Vec<E> = (0..n).map(factory).collect::<deskbench::Result<_>>().map_err(err)?;
    for (i, env) in solo.iter_mut().enumerate() {
        let obs = env.reset(Some(EnvSeed::with_stream(base, i as u64))).map_err(err)?;
        ensure!(fp(&obs) == fp(&batch.observations[i]), "reset of env {i} differs");
    }
    let mut resets = 0;
    for step in 0..steps {
        let acts = actions(step);
        let solo_acts = acts.clone();
        let batch = vec.step(acts).map_err(err)?;
        ensure!(batch.observations.len() == n && batch.rewards.len() == n && batch.dones.len() == n, "batch width");
        for (i, (env, a)) in solo.iter_mut().zip(solo_acts).enumerate() {
            let t = env.step(a).map_err(err)?;
            let obs = if t.done { env.reset(None).map_err(err)? } else { t.observation };
            ensure!(fp(&obs) == fp(&batch.observations[i]), "env {i} step {step}: observation differs");
            ensure!(fp(&t.rewards) == fp(&batch.rewards[i]), "env {i} step {step}: reward differs");
            ensure!(t.done == batch.dones[i] && t.done == batch.reset[i], "env {i} step {step}: done flag differs");
            resets += t.done as usize;
        }
    }
    ensure!(resets > 0, "no auto-reset exercised");
    Ok(format!("{n} envs × {steps} steps bit-identical, {resets} resets"))
}

pub fn check_vector_bit_exact() -> Check {
    let mut rng = seeded_rng(5);
    let a = check_equivalence(4, 100, 17, small_macs, |_| (0..4).map(|_| random_macs_actions(5, &mut rng)).collect())?;
    let mut rng = seeded_rng(6);
    let b = check_equivalence(3, 45, 3, small_crowd, |_| (0..3).map(|_| random_robot_command(2.0, 2.0, &mut rng)).collect())?;
    Ok(format!("macs: {a}; crowd: {b}"))
}
