//! The project's go/no-go gate. Each test owns one numbered criterion,
//! prints `criterion N: PASS` or `criterion N: FAIL <reason>`, and fails
//! the build when the check or its runtime budget is missed. Tolerances
//! are pinned inline next to the quantity they bound.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nav_core::geometry::{Point2, Pose, DEG};
use nav_core::improved_vfh::{angular_command, speed_command};
use nav_core::ipabd::{compress_with, CompressConfig, PolarPixel2D};
use nav_core::planner::{astar, PlanError};
use nav_core::scan_geometry::{sweep, Cloud3D, CloudPoint, SweepConfig};
use nav_core::sim_world::engine::plan_scenario;
use nav_core::tracking_control::{
    lyapunov_rate, run_tracking, ConstantTwistReference, ControlLimits, Gains, TrackingLog,
};
use nav_core::{run_scenario, Cell, OccupancyGrid, Scenario, Verdict};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn criterion(n: u32, budget: Duration, body: impl FnOnce() -> Result<(), String>) {
    let t0 = Instant::now();
    let mut result = body();
    let elapsed = t0.elapsed();
    if result.is_ok() && elapsed > budget {
        result = Err(format!(
            "runtime {elapsed:.2?} over the {budget:.0?} budget"
        ));
    }
    match &result {
        Ok(()) => println!("criterion {n}: PASS ({elapsed:.2?})"),
        Err(e) => println!("criterion {n}: FAIL {e}"),
    }
    if let Err(e) = result {
        panic!("criterion {n}: {e}");
    }
}

fn scenario(name: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name);
    Scenario::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// In a fully enclosing room every ray of the default sweep returns, and
/// the shallowest downward frame grazes the floor at mount / sin(pitch).
#[test]
fn criterion_1_sweep_point_count_and_floor_grazing_range() {
    criterion(1, Duration::from_secs(1), || {
        let sc = scenario("room.toml");
        let cloud = sweep(&sc.base_world(), &sc.capture_pose(), &sc.sweep.config);
        ensure!(
            cloud.points.len() == 9494,
            "expected 9494 cloud points, got {}",
            cloud.points.len()
        );
        let min_floor = cloud
            .points
            .iter()
            .filter(|p| p.pitch_deg == -5.0)
            .map(|p| p.range)
            .fold(f64::INFINITY, f64::min);
        ensure!(
            (min_floor - 4.588).abs() <= 0.01,
            "min range at pitch -5 deg is {min_floor:.4}, want 4.588 +/- 0.01"
        );
        Ok(())
    });
}

/// Plain group-by-ray / drop-floor-and-overheight / keep-minimum-range
/// restatement of the compression, written against the same admissibility
/// rule: |z| above the floor epsilon and z at or below the limit.
fn compress_oracle(cloud: &Cloud3D, z_limit: f64, cfg: &CompressConfig) -> Vec<PolarPixel2D> {
    let mut groups: Vec<Vec<&CloudPoint>> = Vec::new();
    for p in &cloud.points {
        if groups.len() <= p.ray {
            groups.resize_with(p.ray + 1, Vec::new);
        }
        groups[p.ray].push(p);
    }
    let mut out = Vec::new();
    for (ray, members) in groups.iter().enumerate() {
        let mut best: Option<&CloudPoint> = None;
        for p in members {
            if p.z.abs() <= cfg.floor_epsilon || p.z > z_limit {
                continue;
            }
            if best.is_none_or(|b| p.range < b.range) {
                best = Some(p);
            }
        }
        if let Some(b) = best {
            out.push(PolarPixel2D {
                ray,
                beta_deg: b.scan_deg,
                range: b.range,
            });
        }
    }
    out
}

#[test]
fn criterion_2_compression_matches_brute_force_oracle() {
    criterion(2, Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1ABD);
        let cfg = CompressConfig::default();
        for case in 0..200 {
            let rays = rng.gen_range(1..=120usize);
            let n = rng.gen_range(0..=5000usize);
            let z_limit = rng.gen_range(0.5..2.0);
            let mut points = Vec::with_capacity(n);
            for _ in 0..n {
                let ray = rng.gen_range(0..rays);
                // z values pile onto the decision boundaries as well as
                // spreading over the plain ranges
                let z = match rng.gen_range(0..10) {
                    0 => cfg.floor_epsilon,
                    1 => -cfg.floor_epsilon,
                    2 => z_limit,
                    3 => z_limit + 1e-12,
                    4 => 0.0,
                    _ => rng.gen_range(-0.1..z_limit + 0.5),
                };
                points.push(CloudPoint {
                    frame: 0,
                    ray,
                    pitch_deg: 0.0,
                    scan_deg: 40.0 + ray as f64,
                    range: rng.gen_range(0.1..60.0),
                    x: 0.0,
                    y: 0.0,
                    z,
                });
            }
            let cloud = Cloud3D {
                config: SweepConfig::default(),
                points,
            };
            let got = compress_with(&cloud, z_limit, &cfg).map_err(|e| e.to_string())?;
            let want = compress_oracle(&cloud, z_limit, &cfg);
            ensure!(
                got == want,
                "case {case}: compressed {} pixels, oracle {} (first diff at {:?})",
                got.len(),
                want.len(),
                got.iter().zip(&want).position(|(a, b)| a != b)
            );
        }
        Ok(())
    });
}

fn rect_contains(rect: [f64; 4], p: Point2) -> bool {
    p.x >= rect[0] && p.x <= rect[2] && p.y >= rect[1] && p.y <= rect[3]
}

/// Planned route resampled every centimeter so a region the width of a
/// grid cell cannot slip between waypoints.
fn densify(points: &[Point2]) -> Vec<Point2> {
    let mut out = Vec::new();
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let len = a.dist(b);
        let steps = (len / 0.01).ceil().max(1.0) as usize;
        for i in 0..steps {
            let f = i as f64 / steps as f64;
            out.push(Point2::new(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)));
        }
    }
    if let Some(last) = points.last() {
        out.push(*last);
    }
    out
}

#[test]
fn criterion_3_gate_choice_follows_robot_height() {
    criterion(3, Duration::from_secs(10), || {
        let cases = [
            ("gates.toml", "gate_b", ["gate_a", "corridor"]),
            ("gates_low.toml", "gate_a", ["gate_b", "corridor"]),
        ];
        for (file, through, avoided) in cases {
            let sc = scenario(file);
            let t0 = Instant::now();
            let art = plan_scenario(&sc, &sc.base_world()).map_err(|e| format!("{file}: {e}"))?;
            let took = t0.elapsed();
            ensure!(
                took <= Duration::from_secs(5),
                "{file}: planning took {took:.2?}, budget 5s"
            );
            let route = densify(&art.path.world_points());
            let rect_of = |name: &str| {
                sc.world
                    .regions
                    .iter()
                    .find(|r| r.name == name)
                    .map(|r| r.rect)
                    .ok_or(format!("{file}: region {name} missing"))
            };
            let want = rect_of(through)?;
            ensure!(
                route.iter().any(|p| rect_contains(want, *p)),
                "{file}: path never enters {through}"
            );
            for name in avoided {
                let rect = rect_of(name)?;
                ensure!(
                    !route.iter().any(|p| rect_contains(rect, *p)),
                    "{file}: path cuts through {name}"
                );
            }
        }
        Ok(())
    });
}

/// Textbook Dijkstra over the planner's move model: 8-connected, diagonal
/// steps barred from cutting past an occupied corner. Distances accumulate
/// in integer diagonal-count form so the returned cost is the same exact
/// expression the planner reports, straights + sqrt(2) diagonals, and the
/// comparison tests optimality rather than float summation order.
fn dijkstra_oracle(
    grid: &OccupancyGrid,
    start: (usize, usize),
    goal: (usize, usize),
) -> Option<f64> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;

    let idx = |c: (usize, usize)| c.1 * grid.width + c.0;
    // cost lattice s + sqrt(2) d ordered exactly via scaled integers
    let key = |s: u64, d: u64| s * 1_000_000 + d * 1_414_214;
    let mut best: Vec<Option<(u64, u64)>> = vec![None; grid.width * grid.height];
    let mut heap = BinaryHeap::new();
    best[idx(start)] = Some((0, 0));
    heap.push(Reverse((0u64, idx(start))));
    while let Some(Reverse((k, i))) = heap.pop() {
        let (s, d) = best[i].unwrap();
        if k != key(s, d) {
            continue;
        }
        if i == idx(goal) {
            return Some((s as f64 + d as f64 * std::f64::consts::SQRT_2) * grid.cellsize);
        }
        let (x, y) = ((i % grid.width) as i64, (i / grid.width) as i64);
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x + dx, y + dy);
                if !grid.in_bounds(nx, ny) || !grid.is_free(nx as usize, ny as usize) {
                    continue;
                }
                let diagonal = dx != 0 && dy != 0;
                if diagonal
                    && (!grid.is_free((x + dx) as usize, y as usize)
                        || !grid.is_free(x as usize, (y + dy) as usize))
                {
                    continue;
                }
                let (ns, nd) = if diagonal { (s, d + 1) } else { (s + 1, d) };
                let j = idx((nx as usize, ny as usize));
                if best[j].is_none_or(|(bs, bd)| key(ns, nd) < key(bs, bd)) {
                    best[j] = Some((ns, nd));
                    heap.push(Reverse((key(ns, nd), j)));
                }
            }
        }
    }
    None
}

#[test]
fn criterion_4_astar_cost_equals_dijkstra() {
    criterion(4, Duration::from_secs(5), || {
        let mut rng = ChaCha8Rng::seed_from_u64(0xA57A);
        let mut solvable = 0;
        for case in 0..100 {
            let mut grid = OccupancyGrid::new_free(0.4, 0.0, 0.0, 20, 20);
            for iy in 0..20 {
                for ix in 0..20 {
                    if rng.gen_range(0.0..1.0) < 0.30 {
                        grid.set_cell(ix, iy, Cell::Occupied);
                    }
                }
            }
            let mut free_cell = || loop {
                let c = (rng.gen_range(0..20usize), rng.gen_range(0..20usize));
                if grid.is_free(c.0, c.1) {
                    return c;
                }
            };
            let start = free_cell();
            let goal = loop {
                let g = free_cell();
                if g != start {
                    break g;
                }
            };
            let oracle = dijkstra_oracle(&grid, start, goal);
            let mine = astar(
                &grid,
                (start.0 as i64, start.1 as i64),
                (goal.0 as i64, goal.1 as i64),
            );
            match (mine, oracle) {
                (Ok(path), Some(want)) => {
                    solvable += 1;
                    ensure!(
                        path.cost == want,
                        "case {case}: A* cost {} != Dijkstra {want}",
                        path.cost
                    );
                }
                (Err(PlanError::NoPath), None) => {}
                (Ok(path), None) => {
                    return Err(format!(
                        "case {case}: A* found cost {} where Dijkstra sees none",
                        path.cost
                    ))
                }
                (Err(e), Some(want)) => {
                    return Err(format!(
                        "case {case}: A* failed ({e}) where Dijkstra finds {want}"
                    ))
                }
                (Err(e), None) => {
                    return Err(format!(
                        "case {case}: unexpected A* error on unreachable pair: {e}"
                    ))
                }
            }
        }
        ensure!(
            solvable >= 50,
            "only {solvable}/100 grids were solvable; generator is off"
        );
        Ok(())
    });
}

/// Worst central-difference mismatch between the logged Lyapunov values and
/// the closed-form decay rate, over rows where no command saturates.
fn fd_rate_error(
    log: &TrackingLog,
    gains: &Gains,
    limits: &ControlLimits,
    dt: f64,
) -> (f64, usize) {
    let clear = |i: usize| {
        let r = &log.rows[i];
        r.v.abs() < limits.v_max - 1e-9 && r.omega.abs() < limits.omega_max - 1e-9
    };
    let mut worst = 0.0f64;
    let mut used = 0;
    for i in 1..log.rows.len() - 1 {
        let t = log.rows[i].t;
        if !(0.2..=6.0).contains(&t) || !clear(i - 1) || !clear(i) || !clear(i + 1) {
            continue;
        }
        let fd = (log.rows[i + 1].v_p - log.rows[i - 1].v_p) / (2.0 * dt);
        worst = worst.max((fd - lyapunov_rate(&log.rows[i].e, gains)).abs());
        used += 1;
    }
    (worst, used)
}

#[test]
fn criterion_5_tracking_converges_with_decaying_lyapunov() {
    criterion(5, Duration::from_secs(10), || {
        let limits = ControlLimits::default();
        let dt = 0.05;
        // straight line and a 2 m radius arc, worst-corner start offsets
        let offsets = [
            (0.5, 0.5, 30.0),
            (-0.5, 0.5, -30.0),
            (0.5, -0.5, -30.0),
            (-0.5, -0.5, 30.0),
        ];
        for v_ref in [0.2, 0.3, 0.4] {
            let gains = Gains::for_speed(v_ref);
            for curvature in [0.0, 0.5] {
                for (dx, dy, dth) in offsets {
                    let reference = ConstantTwistReference {
                        start: Pose::new(0.0, 0.0, 0.0),
                        v: v_ref,
                        omega: v_ref * curvature,
                    };
                    let start = Pose::new(dx, dy, dth * DEG);
                    let log = run_tracking(&reference, start, &gains, &limits, dt, 60.0);
                    let e = log.final_error();
                    let pos = (e.e1 * e.e1 + e.e2 * e.e2).sqrt();
                    ensure!(
                        pos < 0.01,
                        "v={v_ref} k={curvature} offset=({dx},{dy},{dth}): final position error {pos:.4}"
                    );
                    for w in log.rows.windows(2) {
                        ensure!(
                            w[1].v_p <= w[0].v_p + 1e-6,
                            "v={v_ref} k={curvature} offset=({dx},{dy},{dth}): V_p rose {} -> {} at t={}",
                            w[0].v_p,
                            w[1].v_p,
                            w[1].t
                        );
                    }
                }
            }
        }

        // second-order convergence of the measured decay rate: halve the
        // step, the central-difference error drops by about four
        let gains = Gains::for_speed(0.3);
        let reference = ConstantTwistReference {
            start: Pose::new(0.0, 0.0, 0.0),
            v: 0.3,
            omega: 0.15,
        };
        let start = Pose::new(0.05, 0.1, 10.0 * DEG);
        let coarse = run_tracking(&reference, start, &gains, &limits, 0.05, 8.0);
        let fine = run_tracking(&reference, start, &gains, &limits, 0.025, 8.0);
        let (e_coarse, n_coarse) = fd_rate_error(&coarse, &gains, &limits, 0.05);
        let (e_fine, n_fine) = fd_rate_error(&fine, &gains, &limits, 0.025);
        ensure!(
            n_coarse > 50 && n_fine > 100,
            "saturation left too few clean samples ({n_coarse}, {n_fine})"
        );
        let ratio = e_coarse / e_fine;
        ensure!(
            (2.5..=6.0).contains(&ratio),
            "FD error ratio {ratio:.2} (={e_coarse:.2e}/{e_fine:.2e}), want about 4"
        );
        Ok(())
    });
}

#[test]
fn criterion_6_avoider_command_law_constants() {
    criterion(6, Duration::from_secs(1), || {
        let close = |a: f64, b: f64| (a - b).abs() < 1e-12;
        // proportional gain 10 deg/s per deg, symmetric clamp at 25 deg/s
        ensure!(close(angular_command(1.0, 0.0), 10.0), "gain");
        ensure!(close(angular_command(0.5, 0.0), 5.0), "gain, half");
        ensure!(close(angular_command(3.0, 0.0), 25.0), "clamp high");
        ensure!(close(angular_command(-3.0, 0.0), -25.0), "clamp low");
        ensure!(
            close(angular_command(350.0, 0.0), -25.0),
            "wraps before clamping"
        );
        // full speed 0.5 with 0.5 m of headroom, ramp 5(d30 - 0.4) below,
        // floored at zero, and 2.5x slower once |omega| reaches 10 deg/s
        ensure!(close(speed_command(0.5, 0.0), 0.5), "V_max");
        ensure!(close(speed_command(7.0, 0.0), 0.5), "V_max, far");
        ensure!(close(speed_command(0.48, 0.0), 5.0 * 0.08), "ramp slope");
        ensure!(close(speed_command(0.44, 0.0), 5.0 * 0.04), "ramp slope");
        ensure!(close(speed_command(0.4, 0.0), 0.0), "ramp hits zero");
        ensure!(close(speed_command(0.2, 0.0), 0.0), "clamped at zero");
        ensure!(close(speed_command(0.5, 10.0), 0.5 / 2.5), "turn divisor");
        ensure!(
            close(speed_command(0.5, -12.0), 0.5 / 2.5),
            "turn divisor, negative"
        );
        ensure!(
            close(speed_command(0.5, 9.999), 0.5),
            "divisor trigger is at 10"
        );
        ensure!(
            close(speed_command(0.44, 10.0), 5.0 * 0.04 / 2.5),
            "ramp and divisor stack"
        );
        Ok(())
    });
}

fn dist_to_polyline(p: Point2, line: &[Point2]) -> f64 {
    let mut best = f64::INFINITY;
    for w in line.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (vx, vy) = (b.x - a.x, b.y - a.y);
        let len2 = vx * vx + vy * vy;
        let t = if len2 == 0.0 {
            0.0
        } else {
            (((p.x - a.x) * vx + (p.y - a.y) * vy) / len2).clamp(0.0, 1.0)
        };
        let q = Point2::new(a.x + t * vx, a.y + t * vy);
        best = best.min(p.dist(q));
    }
    best
}

#[test]
fn criterion_7_sudden_obstacle_detour_and_rejoin() {
    criterion(7, Duration::from_secs(30), || {
        let baseline = run_scenario(&scenario("gates.toml"));
        ensure!(
            baseline.verdict == Verdict::GoalReached,
            "unobstructed baseline verdict {}",
            baseline.verdict.as_str()
        );
        let t_clear = baseline
            .completion_time
            .expect("goal_reached carries a time");

        let sc = scenario("sudden_obstacle.toml");
        let t_drop = sc.events.iter().map(|e| e.t).fold(f64::INFINITY, f64::min);
        ensure!(t_drop.is_finite(), "scenario defines no insertion event");
        let log = run_scenario(&sc);

        // (a) the run must not end in a collision
        ensure!(
            log.verdict != Verdict::Collision,
            "collision verdict, min clearance {:.3}",
            log.min_clearance
        );
        ensure!(
            log.verdict == Verdict::GoalReached,
            "verdict {}",
            log.verdict.as_str()
        );

        // (b) sonar frame keeps 0.3 m once the obstacle exists; a clamped
        // too-close echo logs exactly 0.3, so the bound is strict
        for r in log.rows.iter().filter(|r| r.t >= t_drop) {
            ensure!(
                r.min_sonar > 0.3,
                "sonar clearance {:.4} at t={:.2}",
                r.min_sonar,
                r.t
            );
        }

        // (c) detour costs at most one extra trip
        let t_obstructed = log.completion_time.expect("goal_reached carries a time");
        ensure!(
            t_obstructed <= 2.0 * t_clear,
            "completion {t_obstructed:.1}s vs 2x baseline {:.1}s",
            2.0 * t_clear
        );

        // (d) the last two meters of travel hug the pre-drop reference
        let art = plan_scenario(&sc, &sc.base_world()).map_err(|e| e.to_string())?;
        let reference: Vec<Point2> = art
            .trajectory
            .samples
            .iter()
            .map(|s| Point2::new(s.pose.x, s.pose.y))
            .collect();
        let mut travelled = 0.0;
        let mut tail_start = 0;
        for i in (1..log.rows.len()).rev() {
            travelled += log.rows[i]
                .pose
                .position()
                .dist(log.rows[i - 1].pose.position());
            if travelled >= 2.0 {
                tail_start = i - 1;
                break;
            }
        }
        ensure!(travelled >= 2.0, "run shorter than two meters");
        for r in &log.rows[tail_start..] {
            let d = dist_to_polyline(r.pose.position(), &reference);
            ensure!(
                d <= 0.3,
                "final stretch strays {d:.3} m from the reference at t={:.2}",
                r.t
            );
        }
        Ok(())
    });
}

#[test]
fn criterion_8_avoider_drives_through_open_doorway() {
    criterion(8, Duration::from_secs(30), || {
        let sc = scenario("doorway.toml");
        let log = run_scenario(&sc);
        ensure!(
            log.verdict == Verdict::GoalReached,
            "verdict {}",
            log.verdict.as_str()
        );
        // the doorway spans |x| < 0.6 at y = 2: find the crossing step and
        // interpolate where the center point cut the wall line
        let cross = log
            .rows
            .windows(2)
            .find(|w| w[0].pose.y < 2.0 && w[1].pose.y >= 2.0)
            .ok_or("robot never crossed the doorway line")?;
        let (a, b) = (&cross[0].pose, &cross[1].pose);
        let f = (2.0 - a.y) / (b.y - a.y);
        let x = a.x + f * (b.x - a.x);
        ensure!(
            x.abs() < 0.6,
            "crossed the wall line at x={x:.3}, outside the 1.2 m opening"
        );
        Ok(())
    });
}

#[test]
fn criterion_9_reruns_are_byte_identical() {
    criterion(9, Duration::from_secs(60), || {
        for file in ["gates.toml", "sudden_obstacle.toml", "doorway.toml"] {
            let sc = scenario(file);
            let a = run_scenario(&sc).to_text();
            let b = run_scenario(&sc).to_text();
            ensure!(a == b, "{file}: reruns differ");
        }
        Ok(())
    });
}

/// Shared-fixture sanity: the acceptance scenarios themselves satisfy the
/// in-file verification blocks they declare.
#[test]
fn scenario_verify_blocks_hold() {
    for file in [
        "gates.toml",
        "gates_low.toml",
        "sudden_obstacle.toml",
        "doorway.toml",
    ] {
        let sc = scenario(file);
        let log = run_scenario(&sc);
        let failures = nav_core::sim_world::engine::verify_scenario(&log, &sc);
        assert!(failures.is_empty(), "{file}: {failures:?}");
    }
}
