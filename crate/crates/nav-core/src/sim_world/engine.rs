//! Closed-loop scenario runner.
//!
//! One run is: sweep the world once from the capture pose, build the 2D map
//! and occupancy grid, plan a path, convert it to a timed trajectory, then
//! step the robot at a fixed control period. Each step senses the sonar
//! ring, arbitrates between the trajectory tracker and the histogram
//! avoider, applies the chosen command, and logs one row. The reference
//! clock pauses while avoiding and is re-seated to the nearest trajectory
//! sample on hand-back, so the tracker never chases a point it fell behind.
//!
//! Everything is deterministic for a fixed scenario: sensing order is
//! fixed, the only randomness is the optional seeded range noise, and the
//! log serializer formats every float the same way. Two runs of the same
//! file produce byte-identical logs.

use super::scenario::Scenario;
use super::{
    cast_sonar_raw, classify_echo, min_wall_distance, swept_collides, SonarEcho, SonarRing,
    WorldModel,
};
use crate::geometry::{integrate_twist, Point2, Pose, DEG};
use crate::gridmap::{clip_map_to_bounds, dilate, rasterize, GridError, OccupancyGrid};
use crate::improved_vfh::Avoider;
use crate::ipabd::{compress_with, segment_with, MapError, SegmentMap2D};
use crate::planner::{astar, path_to_trajectory_with, GridPath, PlanError, ReferenceTrajectory};
use crate::scan_geometry::{sweep, Cloud3D};
use crate::tracking_control::{closed_loop_step, lyapunov, tracking_error, TrackingError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[derive(Debug, thiserror::Error)]
pub enum PlanStageError {
    #[error("mapping failed: {0}")]
    Map(#[from] MapError),
    #[error("rasterizing failed: {0}")]
    Grid(#[from] GridError),
    #[error("planning failed: {0}")]
    Plan(#[from] PlanError),
}

/// Everything the offline stage produces, kept for inspection and plotting.
pub struct PlanArtifacts {
    pub cloud: Cloud3D,
    pub map: SegmentMap2D,
    pub grid: OccupancyGrid,
    pub path: GridPath,
    pub trajectory: ReferenceTrajectory,
}

/// Sweep, compress, segment, rasterize, dilate, search, time-parameterize.
pub fn plan_scenario(sc: &Scenario, world: &WorldModel) -> Result<PlanArtifacts, PlanStageError> {
    let mspec = sc.map.as_ref().expect("validated: map spec present");
    let gspec = sc.grid.as_ref().expect("validated: grid spec present");
    let capture = sc.capture_pose();
    let cloud = sweep(world, &capture, &sc.sweep.config);
    let pixels = compress_with(&cloud, mspec.z_limit, &mspec.compress)?;
    let map = segment_with(&pixels, &capture, mspec.z_limit, &mspec.segmentation);
    let bounds = gspec.rect();
    let clipped = clip_map_to_bounds(&map, bounds);
    let grid = dilate(
        &rasterize(&clipped, gspec.cellsize, bounds)?,
        gspec.dilation,
    );
    let start = grid.world_to_grid(sc.start_point());
    let goal = grid.world_to_grid(sc.goal());
    let path = astar(&grid, start, goal)?;
    let trajectory = path_to_trajectory_with(&path, sc.plan.v_cruise, &sc.plan.trajectory)?;
    Ok(PlanArtifacts {
        cloud,
        map,
        grid,
        path,
        trajectory,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Track,
    Avoid,
}

impl Mode {
    fn as_str(self) -> &'static str {
        match self {
            Mode::Track => "track",
            Mode::Avoid => "avoid",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    GoalReached,
    Collision,
    Timeout,
    NoPath,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::GoalReached => "goal_reached",
            Verdict::Collision => "collision",
            Verdict::Timeout => "timeout",
            Verdict::NoPath => "no_path",
        }
    }

    fn parse(s: &str) -> Option<Verdict> {
        Some(match s {
            "goal_reached" => Verdict::GoalReached,
            "collision" => Verdict::Collision,
            "timeout" => Verdict::Timeout,
            "no_path" => Verdict::NoPath,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RunRow {
    pub t: f64,
    pub pose: Pose,
    pub mode: Mode,
    /// commanded speed and turn rate applied over [t, t + dt)
    pub v: f64,
    pub omega: f64,
    pub ref_pose: Pose,
    pub e: TrackingError,
    pub v_p: f64,
    /// clear range in the forward 30 deg cone (inf when open)
    pub d30: f64,
    /// smallest reported sonar range this step (inf when all clear)
    pub min_sonar: f64,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub scenario: String,
    pub rows: Vec<RunRow>,
    pub verdict: Verdict,
    pub path_cost: Option<f64>,
    /// worst free gap between the hull and any reachable wall over the run
    pub min_clearance: f64,
    pub completion_time: Option<f64>,
    /// one line per avoider cycle, not serialized into the log text
    pub avoid_records: Vec<String>,
}

fn fmt6(x: f64) -> String {
    if x.is_infinite() {
        "inf".to_string()
    } else {
        format!("{x:.6}")
    }
}

const RUNLOG_HEADER: &str = "t,x,y,theta,mode,v,omega,x_r,y_r,theta_r,e1,e2,e3,V_p,d30,min_sonar";

impl RunLog {
    pub fn to_text(&self) -> String {
        let mut out = format!("# runlog v1 {}\n{RUNLOG_HEADER}\n", self.scenario);
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                fmt6(r.t),
                fmt6(r.pose.x),
                fmt6(r.pose.y),
                fmt6(r.pose.theta),
                r.mode.as_str(),
                fmt6(r.v),
                fmt6(r.omega),
                fmt6(r.ref_pose.x),
                fmt6(r.ref_pose.y),
                fmt6(r.ref_pose.theta),
                fmt6(r.e.e1),
                fmt6(r.e.e2),
                fmt6(r.e.e3),
                fmt6(r.v_p),
                fmt6(r.d30),
                fmt6(r.min_sonar),
            ));
        }
        out.push_str(&format!("# verdict {}\n", self.verdict.as_str()));
        out.push_str(&format!(
            "# path_cost {}\n",
            self.path_cost.map_or("none".to_string(), fmt6)
        ));
        out.push_str(&format!("# min_clearance {}\n", fmt6(self.min_clearance)));
        out.push_str(&format!(
            "# completion_time {}\n",
            self.completion_time.map_or("none".to_string(), fmt6)
        ));
        out
    }

    pub fn from_text(text: &str) -> Result<RunLog, String> {
        let mut lines = text.lines();
        let head = lines.next().ok_or("empty log")?;
        let scenario = head
            .strip_prefix("# runlog v1 ")
            .ok_or("missing `# runlog v1` header")?
            .to_string();
        match lines.next() {
            Some(h) if h == RUNLOG_HEADER => {}
            _ => return Err("unexpected column header".to_string()),
        }
        let mut rows = Vec::new();
        let mut summary = Vec::new();
        for line in lines {
            if let Some(rest) = line.strip_prefix("# ") {
                summary.push(rest.to_string());
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 16 {
                return Err(format!("row with {} fields", f.len()));
            }
            let num = |s: &str| -> Result<f64, String> {
                s.parse::<f64>().map_err(|_| format!("bad number `{s}`"))
            };
            let mode = match f[4] {
                "track" => Mode::Track,
                "avoid" => Mode::Avoid,
                other => return Err(format!("bad mode `{other}`")),
            };
            rows.push(RunRow {
                t: num(f[0])?,
                pose: Pose::new(num(f[1])?, num(f[2])?, num(f[3])?),
                mode,
                v: num(f[5])?,
                omega: num(f[6])?,
                ref_pose: Pose::new(num(f[7])?, num(f[8])?, num(f[9])?),
                e: TrackingError {
                    e1: num(f[10])?,
                    e2: num(f[11])?,
                    e3: num(f[12])?,
                },
                v_p: num(f[13])?,
                d30: num(f[14])?,
                min_sonar: num(f[15])?,
            });
        }
        let field = |key: &str| -> Result<String, String> {
            summary
                .iter()
                .find_map(|s| s.strip_prefix(&format!("{key} ")))
                .map(str::to_string)
                .ok_or(format!("missing summary line `# {key}`"))
        };
        let opt_num = |s: String| -> Result<Option<f64>, String> {
            if s == "none" {
                Ok(None)
            } else {
                s.parse::<f64>()
                    .map(Some)
                    .map_err(|_| format!("bad number `{s}`"))
            }
        };
        let verdict =
            Verdict::parse(&field("verdict")?).ok_or_else(|| "bad verdict".to_string())?;
        Ok(RunLog {
            scenario,
            rows,
            verdict,
            path_cost: opt_num(field("path_cost")?)?,
            min_clearance: field("min_clearance")?
                .parse::<f64>()
                .map_err(|e| e.to_string())?,
            completion_time: opt_num(field("completion_time")?)?,
            avoid_records: Vec::new(),
        })
    }
}

/// One sonar pass: every reading the ring reports from the current pose.
struct SenseFrame {
    /// (world bearing deg, reported range) for each echoing sensor
    readings_world: Vec<(f64, f64)>,
    /// same readings with robot-relative bearings
    readings_rel: Vec<(f64, f64)>,
    d30: f64,
    min_sonar: f64,
}

fn sense(
    world: &WorldModel,
    pose: &Pose,
    ring: &SonarRing,
    noise: &mut Option<(ChaCha8Rng, Normal<f64>)>,
) -> SenseFrame {
    let theta_deg = pose.theta / DEG;
    let mut readings_world = Vec::with_capacity(8);
    let mut readings_rel = Vec::with_capacity(8);
    let mut min_sonar = f64::INFINITY;
    for bearing in SonarRing::bearings_deg() {
        let mut raw = cast_sonar_raw(world, pose, bearing, ring);
        if let (Some(d), Some((rng, dist))) = (raw, noise.as_mut()) {
            raw = Some((d + dist.sample(rng)).max(0.0));
        }
        let reported = match classify_echo(raw, ring) {
            SonarEcho::Clear => continue,
            SonarEcho::TooClose => ring.range_min,
            SonarEcho::Range(d) => d,
        };
        readings_world.push((theta_deg + bearing, reported));
        readings_rel.push((bearing, reported));
        min_sonar = min_sonar.min(reported);
    }
    let d30 = crate::improved_vfh::d30_from_readings(&readings_rel);
    SenseFrame {
        readings_world,
        readings_rel,
        d30,
        min_sonar,
    }
}

pub fn run_scenario(sc: &Scenario) -> RunLog {
    let mut world = sc.base_world();
    let params = sc.robot.params;
    let body_r = params.body_radius();
    let body_h = params.body_height;
    let ring = sc.robot.sonar;
    let dt = sc.control.control_dt;
    let gains = sc.gains();
    let limits = sc.control.limits();
    let goal = sc.goal();
    let avoid = sc.avoid;

    let planned = if avoid.avoider_only {
        None
    } else {
        match plan_scenario(sc, &world) {
            Ok(a) => Some(a),
            Err(_) => {
                return RunLog {
                    scenario: sc.name.clone(),
                    rows: Vec::new(),
                    verdict: Verdict::NoPath,
                    path_cost: None,
                    min_clearance: f64::INFINITY,
                    completion_time: None,
                    avoid_records: Vec::new(),
                }
            }
        }
    };
    let reference = planned.as_ref().map(|a| &a.trajectory);
    let path_cost = planned.as_ref().map(|a| a.path.cost);
    let (ref_pts, ref_arcs, ref_times): (Vec<Point2>, Vec<f64>, Vec<f64>) = match reference {
        Some(tr) => (
            tr.samples.iter().map(|s| s.pose.position()).collect(),
            tr.arc_lengths(),
            tr.samples.iter().map(|s| s.t).collect(),
        ),
        None => (Vec::new(), Vec::new(), Vec::new()),
    };

    let mut pose = sc.start_pose();
    let mut mode = if avoid.avoider_only {
        Mode::Avoid
    } else {
        Mode::Track
    };
    let mut avoider = Avoider::new(avoid.vfh);
    let mut ref_time = 0.0;
    let mut noise = sc.sim.noise.then(|| {
        (
            ChaCha8Rng::seed_from_u64(sc.sim.seed),
            Normal::new(0.0, sc.sim.noise_sigma).expect("validated: sigma >= 0"),
        )
    });

    let steps = (sc.sim.duration / dt).ceil() as usize;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut avoid_records = Vec::new();
    let mut min_clearance = f64::INFINITY;
    let mut next_event = 0;
    let verdict;
    let mut completion_time = None;

    loop {
        let i = rows.len();
        let t = i as f64 * dt;
        while next_event < sc.events.len() && sc.events[next_event].t <= t + 1e-9 {
            world.faces.extend(sc.events[next_event].faces());
            next_event += 1;
        }
        let frame = sense(&world, &pose, &ring, &mut noise);
        min_clearance =
            min_clearance.min(min_wall_distance(&world, pose.position(), body_h) - body_r);

        let nearest = if ref_pts.is_empty() {
            0
        } else {
            nearest_index(&ref_pts, pose.position())
        };
        if reference.is_some() {
            // Set and clear share the corridor test. The d30 cone alone is no
            // release evidence: it swings off a blocking obstacle as soon as
            // the avoider turns, and resuming the track would drive straight
            // back into it.
            match mode {
                Mode::Track
                    if engaged(&frame, &pose, nearest, &ref_pts, &ref_arcs, &avoid, &ring) =>
                {
                    mode = Mode::Avoid;
                    avoider.reset();
                }
                Mode::Avoid
                    if ref_pts[nearest].dist(pose.position()) < avoid.release_distance
                        && frame.d30 > avoid.release_d30
                        && !engaged(&frame, &pose, nearest, &ref_pts, &ref_arcs, &avoid, &ring) =>
                {
                    mode = Mode::Track;
                    ref_time = ref_times[nearest];
                    avoider.reset();
                }
                _ => {}
            }
        }

        let (v_cmd, omega_cmd, ref_pose, next) = match mode {
            Mode::Track => {
                let tr = reference.expect("track mode requires a trajectory");
                let (next, (v, omega)) = closed_loop_step(&pose, ref_time, dt, tr, &gains, &limits);
                (v, omega, tr.at(ref_time).pose, next)
            }
            Mode::Avoid => {
                let target = if let Some(_tr) = reference {
                    pull_target(nearest, &ref_pts, &ref_arcs, avoid.lookahead, goal)
                } else {
                    goal
                };
                let cyc = avoider.decide(&frame.readings_world, &pose, target, frame.d30);
                avoid_records.push(cyc.record_line(t));
                let (v, omega) = (cyc.v, cyc.omega_deg * DEG);
                let ref_pose = match reference {
                    Some(tr) => tr.at(ref_time).pose,
                    None => Pose::new(goal.x, goal.y, (goal.y - pose.y).atan2(goal.x - pose.x)),
                };
                (v, omega, ref_pose, integrate_twist(pose, v, omega, dt))
            }
        };
        let e = tracking_error(&ref_pose, &pose);
        rows.push(RunRow {
            t,
            pose,
            mode,
            v: v_cmd,
            omega: omega_cmd,
            ref_pose,
            e,
            v_p: lyapunov(&e),
            d30: frame.d30,
            min_sonar: frame.min_sonar,
        });

        if pose.position().dist(goal) <= sc.sim.goal_radius {
            verdict = Verdict::GoalReached;
            completion_time = Some(t);
            break;
        }
        if i == steps {
            verdict = Verdict::Timeout;
            break;
        }
        if swept_collides(&world, pose.position(), next.position(), body_r, body_h) {
            verdict = Verdict::Collision;
            break;
        }
        if mode == Mode::Track {
            ref_time += dt;
        }
        pose = next;
    }

    RunLog {
        scenario: sc.name.clone(),
        rows,
        verdict,
        path_cost,
        min_clearance,
        completion_time,
        avoid_records,
    }
}

fn nearest_index(pts: &[Point2], p: Point2) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, q) in pts.iter().enumerate() {
        let d = q.dist(p);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Whether any echo is both close and reflected from inside the corridor
/// around the upcoming stretch of the reference path. A blind-zone return
/// engages unconditionally: something is nearly touching the hull.
fn engaged(
    frame: &SenseFrame,
    pose: &Pose,
    nearest: usize,
    pts: &[Point2],
    arcs: &[f64],
    avoid: &super::scenario::AvoidSpec,
    ring: &SonarRing,
) -> bool {
    for &(bearing, d) in &frame.readings_rel {
        if d >= avoid.engage_distance {
            continue;
        }
        if d <= ring.range_min {
            return true;
        }
        let ang = pose.theta + bearing * DEG;
        let r = d + ring.mount_radius;
        let p = Point2::new(pose.x + r * ang.cos(), pose.y + r * ang.sin());
        let s0 = arcs[nearest];
        for j in nearest..pts.len() {
            if arcs[j] > s0 + avoid.corridor_ahead {
                break;
            }
            if pts[j].dist(p) <= avoid.corridor_radius {
                return true;
            }
        }
    }
    false
}

/// Point the avoider steers toward: a fixed arc-length lead along the
/// path, or the goal once the lead runs off the end.
fn pull_target(
    nearest: usize,
    pts: &[Point2],
    arcs: &[f64],
    lookahead: f64,
    goal: Point2,
) -> Point2 {
    let s_target = arcs[nearest] + lookahead;
    match arcs[nearest..].iter().position(|&s| s >= s_target) {
        Some(k) => pts[nearest + k],
        None => goal,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    Visited,
    Avoided,
}

/// Check whether the logged route entered (any hull overlap counts) a named
/// region of the world.
pub fn assert_region_traversal(
    log: &RunLog,
    world: &WorldModel,
    body_radius: f64,
    name: &str,
    expect: Expectation,
) -> Result<(), String> {
    let region = world
        .region(name)
        .ok_or_else(|| format!("unknown region `{name}`"))?;
    let hit = log
        .rows
        .iter()
        .any(|row| region.rect.dist_to_point(row.pose.position()) <= body_radius);
    match (expect, hit) {
        (Expectation::Visited, true) | (Expectation::Avoided, false) => Ok(()),
        (Expectation::Visited, false) => Err(format!("route never entered region `{name}`")),
        (Expectation::Avoided, true) => Err(format!("route entered region `{name}`")),
    }
}

/// Evaluate every [verify] assertion of a scenario; returns one message per
/// failed assertion, empty when all hold.
pub fn verify_scenario(log: &RunLog, sc: &Scenario) -> Vec<String> {
    let world = sc.base_world();
    let body_r = sc.robot.params.body_radius();
    let mut fails = Vec::new();
    for name in &sc.verify.visited {
        if let Err(m) = assert_region_traversal(log, &world, body_r, name, Expectation::Visited) {
            fails.push(m);
        }
    }
    for name in &sc.verify.avoided {
        if let Err(m) = assert_region_traversal(log, &world, body_r, name, Expectation::Avoided) {
            fails.push(m);
        }
    }
    fails
}
