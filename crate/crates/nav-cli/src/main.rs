//! navsim: file-to-file front end for the navigation pipeline.
//!
//! Every stage reads and writes the versioned text formats of the core
//! library, so stages chain: `sweep` produces the cloud `map` consumes,
//! `map` produces the segment map `plan` consumes, and `run` executes a
//! whole scenario and drops every intermediate artifact next to the log.
//!
//! Exit codes, stable for CI: 0 success, 1 domain failure (no path,
//! collision, timeout, failed verification), 2 bad input or arguments.

mod plot;
mod units;

use clap::{Parser, Subcommand, ValueEnum};
use nav_core::gridmap::{clip_map_to_bounds, dilate, rasterize};
use nav_core::ipabd::{
    compress_with, segment_with, CompressConfig, SegmentMap2D, SegmentationConfig,
};
use nav_core::planner::{
    astar, path_to_trajectory_with, PlanError, ReferenceTrajectory, TrajectoryConfig,
};
use nav_core::scan_geometry::{sweep, Cloud3D};
use nav_core::sim_world::engine::{plan_scenario, verify_scenario};
use nav_core::{run_scenario, OccupancyGrid, Point2, Pose, Rect, RunLog, Scenario, Verdict};
use std::path::{Path, PathBuf};

#[derive(Debug)]
enum Failure {
    /// unreadable/unparseable inputs or inconsistent flags -> exit 2
    Input(String),
    /// the pipeline ran and said no: no path, collision, timeout -> exit 1
    Domain(String),
}

type R<T> = Result<T, Failure>;

fn input<T>(msg: impl Into<String>) -> R<T> {
    Err(Failure::Input(msg.into()))
}

fn domain<T>(msg: impl Into<String>) -> R<T> {
    Err(Failure::Domain(msg.into()))
}

#[derive(Parser)]
#[command(
    name = "navsim",
    version,
    about = "Map, plan, track and avoid: the indoor navigation pipeline on files"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Capture the 3D sweep a scenario's robot would see from its start
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Output cloud file [default: $NAVSIM_OUT/cloud.txt]
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compress a cloud to the 2D segment map of everything tall enough to matter
    Map {
        #[arg(long)]
        cloud: PathBuf,
        /// Height cut (m); anything entirely above it is driven under
        #[arg(long, value_parser = units::parse_length)]
        z_limit: Option<f64>,
        /// Capture pose `x,y,theta` the cloud was taken from
        #[arg(long, value_parser = units::parse_pose)]
        pose: Option<(f64, f64, f64)>,
        /// Scenario supplying defaults for the flags above
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rasterize a segment map and search a grid path
    Plan {
        #[arg(long)]
        map: PathBuf,
        #[arg(long, value_parser = units::parse_point)]
        start: Option<(f64, f64)>,
        #[arg(long, value_parser = units::parse_point)]
        goal: Option<(f64, f64)>,
        #[arg(long, value_parser = units::parse_length)]
        cellsize: Option<f64>,
        /// Grid extent `x0,y0,x1,y1` [default: map extent plus margin]
        #[arg(long, value_parser = units::parse_rect)]
        bounds: Option<[f64; 4]>,
        /// Occupied-cell inflation radius in cells
        #[arg(long)]
        dilation: Option<usize>,
        #[arg(long, value_parser = units::parse_length)]
        v_cruise: Option<f64>,
        /// Scenario supplying defaults for the flags above
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the timed reference trajectory
        #[arg(long)]
        trajectory: Option<PathBuf>,
        /// Also write the dilated occupancy grid
        #[arg(long)]
        grid_out: Option<PathBuf>,
    },
    /// Execute a scenario closed-loop and write the run log plus artifacts
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory [default: $NAVSIM_OUT or .]
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Override the scenario's random seed
        #[arg(long)]
        seed: Option<u64>,
        /// Additionally check the scenario's visited/avoided region lists
        #[arg(long)]
        verify: bool,
    },
    /// Render an artifact file to SVG
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// The artifact named by --kind: map, grid, path or run log
        #[arg(long)]
        input: PathBuf,
        /// Scenario for wall outlines on run plots
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Grid backdrop for path plots
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Reference trajectory for the overlay plot [default: the log's
        /// reference columns]
        #[arg(long)]
        trajectory: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PlotKind {
    Map2d,
    Grid,
    Path,
    TrajectoryOverlay,
    VfhRun,
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(()) => {}
        Err(Failure::Domain(msg)) => {
            eprintln!("navsim: {msg}");
            std::process::exit(1);
        }
        Err(Failure::Input(msg)) => {
            eprintln!("navsim: {msg}");
            std::process::exit(2);
        }
    }
}

fn dispatch(cmd: Cmd) -> R<()> {
    match cmd {
        Cmd::Sweep { scenario, out } => cmd_sweep(&scenario, out),
        Cmd::Map {
            cloud,
            z_limit,
            pose,
            scenario,
            out,
        } => cmd_map(&cloud, z_limit, pose, scenario.as_deref(), out),
        Cmd::Plan {
            map,
            start,
            goal,
            cellsize,
            bounds,
            dilation,
            v_cruise,
            scenario,
            out,
            trajectory,
            grid_out,
        } => cmd_plan(PlanArgs {
            map,
            start,
            goal,
            cellsize,
            bounds,
            dilation,
            v_cruise,
            scenario,
            out,
            trajectory,
            grid_out,
        }),
        Cmd::Run {
            scenario,
            out_dir,
            seed,
            verify,
        } => cmd_run(&scenario, out_dir, seed, verify),
        Cmd::Plot {
            kind,
            input,
            scenario,
            grid,
            trajectory,
            out,
        } => cmd_plot(
            kind,
            &input,
            scenario.as_deref(),
            grid.as_deref(),
            trajectory.as_deref(),
            out,
        ),
    }
}

/// Default artifact location: $NAVSIM_OUT when set, the working directory
/// otherwise.
fn out_base() -> PathBuf {
    std::env::var_os("NAVSIM_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn default_out(opt: Option<PathBuf>, name: &str) -> PathBuf {
    opt.unwrap_or_else(|| out_base().join(name))
}

fn load_scenario(path: &Path) -> R<Scenario> {
    Scenario::load(path).or_else(|e| input(format!("{}: {e}", path.display())))
}

fn read(path: &Path) -> R<String> {
    std::fs::read_to_string(path).or_else(|e| input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> R<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).or_else(|e| input(format!("{}: {e}", dir.display())))?;
        }
    }
    std::fs::write(path, text).or_else(|e| input(format!("{}: {e}", path.display())))
}

fn cmd_sweep(scenario: &Path, out: Option<PathBuf>) -> R<()> {
    let sc = load_scenario(scenario)?;
    let cloud = sweep(&sc.base_world(), &sc.capture_pose(), &sc.sweep.config);
    let out = default_out(out, "cloud.txt");
    write(&out, &cloud.to_text())?;
    println!("cloud: {} points -> {}", cloud.points.len(), out.display());
    Ok(())
}

fn cmd_map(
    cloud_path: &Path,
    z_limit: Option<f64>,
    pose: Option<(f64, f64, f64)>,
    scenario: Option<&Path>,
    out: Option<PathBuf>,
) -> R<()> {
    let cloud = Cloud3D::from_text(&read(cloud_path)?)
        .or_else(|e| input(format!("{}: {e}", cloud_path.display())))?;
    let sc = scenario.map(load_scenario).transpose()?;
    let mspec = sc.as_ref().and_then(|s| s.map.as_ref());
    let z_limit = match z_limit.or(mspec.map(|m| m.z_limit)) {
        Some(z) => z,
        None => return input("need --z-limit or --scenario with a [map] table"),
    };
    let pose = match (pose, &sc) {
        (Some((x, y, th)), _) => Pose::new(x, y, th.to_radians()),
        (None, Some(s)) => s.capture_pose(),
        (None, None) => Pose::new(0.0, 0.0, 0.0),
    };
    let compress_cfg = mspec
        .map(|m| m.compress)
        .unwrap_or_else(CompressConfig::default);
    let seg_cfg = mspec
        .map(|m| m.segmentation)
        .unwrap_or_else(SegmentationConfig::default);
    let pixels = compress_with(&cloud, z_limit, &compress_cfg)
        .or_else(|e| input(format!("{}: {e}", cloud_path.display())))?;
    let map = segment_with(&pixels, &pose, z_limit, &seg_cfg);
    let out = default_out(out, "map.txt");
    write(&out, &map.to_text())?;
    println!("map: {} segments -> {}", map.segments.len(), out.display());
    Ok(())
}

struct PlanArgs {
    map: PathBuf,
    start: Option<(f64, f64)>,
    goal: Option<(f64, f64)>,
    cellsize: Option<f64>,
    bounds: Option<[f64; 4]>,
    dilation: Option<usize>,
    v_cruise: Option<f64>,
    scenario: Option<PathBuf>,
    out: Option<PathBuf>,
    trajectory: Option<PathBuf>,
    grid_out: Option<PathBuf>,
}

fn cmd_plan(a: PlanArgs) -> R<()> {
    let map = SegmentMap2D::from_text(&read(&a.map)?)
        .or_else(|e| input(format!("{}: {e}", a.map.display())))?;
    let sc = a.scenario.as_deref().map(load_scenario).transpose()?;
    let gspec = sc.as_ref().and_then(|s| s.grid.as_ref());

    let start = a
        .start
        .or_else(|| sc.as_ref().map(|s| (s.robot.start[0], s.robot.start[1])));
    let goal = a
        .goal
        .or_else(|| sc.as_ref().map(|s| (s.plan.goal[0], s.plan.goal[1])));
    let (start, goal) = match (start, goal) {
        (Some(s), Some(g)) => (Point2::new(s.0, s.1), Point2::new(g.0, g.1)),
        _ => return input("need --start and --goal (or --scenario)"),
    };
    let cellsize = match a.cellsize.or(gspec.map(|g| g.cellsize)) {
        Some(c) if c > 0.0 => c,
        Some(_) => return input("--cellsize must be positive"),
        None => return input("need --cellsize or --scenario with a [grid] table"),
    };
    let dilation = a.dilation.or(gspec.map(|g| g.dilation)).unwrap_or(0);
    let bounds = match a.bounds.or(gspec.map(|g| g.bounds)) {
        Some(b) => Rect::new(b[0], b[1], b[2], b[3]),
        None => fitted_bounds(&map, start, goal, cellsize),
    };

    let clipped = clip_map_to_bounds(&map, bounds);
    let raster =
        rasterize(&clipped, cellsize, bounds).or_else(|e| input(format!("rasterize: {e}")))?;
    let grid = dilate(&raster, dilation);
    let path = match astar(&grid, grid.world_to_grid(start), grid.world_to_grid(goal)) {
        Ok(p) => p,
        Err(
            e @ (PlanError::NoPath | PlanError::InvalidEndpoint { .. } | PlanError::StationaryGoal),
        ) => return domain(format!("plan: {e}")),
        Err(e) => return input(format!("plan: {e}")),
    };

    let out = default_out(a.out, "path.csv");
    write(&out, &path_csv(&path.world_points(), path.cost))?;
    println!(
        "path: {} cells, cost {:.6} m -> {}",
        path.cells.len(),
        path.cost,
        out.display()
    );

    if let Some(tpath) = a.trajectory {
        let v = a
            .v_cruise
            .or(sc.as_ref().map(|s| s.plan.v_cruise))
            .unwrap_or(0.3);
        let cfg = sc
            .as_ref()
            .map(|s| s.plan.trajectory)
            .unwrap_or_else(TrajectoryConfig::default);
        let traj = path_to_trajectory_with(&path, v, &cfg)
            .or_else(|e| domain(format!("trajectory: {e}")))?;
        write(&tpath, &traj.to_csv())?;
        println!(
            "trajectory: {:.2} s, {} samples -> {}",
            traj.duration(),
            traj.samples.len(),
            tpath.display()
        );
    }
    if let Some(gpath) = a.grid_out {
        write(&gpath, &grid.to_text())?;
        println!(
            "grid: {}x{} cells -> {}",
            grid.width,
            grid.height,
            gpath.display()
        );
    }
    Ok(())
}

/// Grid window when neither flag nor scenario supplies one: everything the
/// map shows plus the endpoints, padded a cell so nothing sits on the rim.
fn fitted_bounds(map: &SegmentMap2D, start: Point2, goal: Point2, cellsize: f64) -> Rect {
    let mut b = plot::Bounds::empty();
    for s in &map.segments {
        b.add(s.p0.x, s.p0.y);
        b.add(s.p1.x, s.p1.y);
    }
    b.add(start.x, start.y);
    b.add(goal.x, goal.y);
    let pad = cellsize * 1.5;
    Rect::new(b.x_min - pad, b.y_min - pad, b.x_max + pad, b.y_max + pad)
}

fn path_csv(points: &[Point2], cost: f64) -> String {
    let mut out = format!("# path v1 cost {cost:.6}\nx,y\n");
    for p in points {
        out.push_str(&format!("{:.6},{:.6}\n", p.x, p.y));
    }
    out
}

fn parse_path_csv(text: &str) -> R<Vec<Point2>> {
    let mut pts = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "x,y" {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let parsed = (f.len() == 2)
            .then(|| {
                Ok::<_, std::num::ParseFloatError>((f[0].parse::<f64>()?, f[1].parse::<f64>()?))
            })
            .transpose()
            .ok()
            .flatten();
        match parsed {
            Some((x, y)) => pts.push(Point2::new(x, y)),
            None => return input(format!("path file line {}: expected x,y", i + 1)),
        }
    }
    Ok(pts)
}

fn cmd_run(scenario: &Path, out_dir: Option<PathBuf>, seed: Option<u64>, verify: bool) -> R<()> {
    let mut sc = load_scenario(scenario)?;
    if let Some(s) = seed {
        sc.sim.seed = s;
    }
    let log = run_scenario(&sc);
    let dir = out_dir.unwrap_or_else(out_base);
    std::fs::create_dir_all(&dir).or_else(|e| input(format!("{}: {e}", dir.display())))?;
    write(&dir.join("runlog.txt"), &log.to_text())?;

    if !sc.avoid.avoider_only && log.verdict != Verdict::NoPath {
        // the same offline stage the runner executed; kept for plotting
        if let Ok(art) = plan_scenario(&sc, &sc.base_world()) {
            write(&dir.join("cloud.txt"), &art.cloud.to_text())?;
            write(&dir.join("map.txt"), &art.map.to_text())?;
            write(&dir.join("grid.txt"), &art.grid.to_text())?;
            write(
                &dir.join("path.csv"),
                &path_csv(&art.path.world_points(), art.path.cost),
            )?;
            write(&dir.join("trajectory.csv"), &art.trajectory.to_csv())?;
        }
    }

    println!("verdict: {}", log.verdict.as_str());
    if let Some(c) = log.path_cost {
        println!("path_cost: {c:.6}");
    }
    if let Some(t) = log.completion_time {
        println!("completion_time: {t:.6}");
    }
    if log.min_clearance.is_finite() {
        println!("min_clearance: {:.6}", log.min_clearance);
    }
    println!("runlog: {}", dir.join("runlog.txt").display());

    let mut failures = Vec::new();
    if verify {
        failures = verify_scenario(&log, &sc);
        match failures.len() {
            0 => println!(
                "verify: ok ({} checks)",
                sc.verify.visited.len() + sc.verify.avoided.len()
            ),
            _ => {
                for f in &failures {
                    println!("verify: FAIL {f}");
                }
            }
        }
    }
    if log.verdict != Verdict::GoalReached {
        return domain(format!("run ended in {}", log.verdict.as_str()));
    }
    if !failures.is_empty() {
        return domain(format!("{} verification failure(s)", failures.len()));
    }
    Ok(())
}

fn cmd_plot(
    kind: PlotKind,
    input_path: &Path,
    scenario: Option<&Path>,
    grid: Option<&Path>,
    trajectory: Option<&Path>,
    out: Option<PathBuf>,
) -> R<()> {
    let text = read(input_path)?;
    let world = scenario
        .map(load_scenario)
        .transpose()?
        .map(|sc| sc.world_with_events());
    let svg = match kind {
        PlotKind::Map2d => {
            let map = SegmentMap2D::from_text(&text)
                .or_else(|e| input(format!("{}: {e}", input_path.display())))?;
            plot::plot_map2d(&map)
        }
        PlotKind::Grid => {
            let g = OccupancyGrid::from_text(&text)
                .or_else(|e| input(format!("{}: {e}", input_path.display())))?;
            plot::plot_grid(&g)
        }
        PlotKind::Path => {
            let pts = parse_path_csv(&text)?;
            let backdrop = grid
                .map(|p| -> R<OccupancyGrid> {
                    OccupancyGrid::from_text(&read(p)?)
                        .or_else(|e| input(format!("{}: {e}", p.display())))
                })
                .transpose()?;
            plot::plot_path(&pts, backdrop.as_ref())
        }
        PlotKind::TrajectoryOverlay => {
            let log = RunLog::from_text(&text)
                .or_else(|e| input(format!("{}: {e}", input_path.display())))?;
            let reference: Vec<Point2> = match trajectory {
                Some(p) => ReferenceTrajectory::from_csv(&read(p)?)
                    .or_else(|e| input(format!("{}: {e}", p.display())))?
                    .samples
                    .iter()
                    .map(|s| s.pose.position())
                    .collect(),
                None => log.rows.iter().map(|r| r.ref_pose.position()).collect(),
            };
            plot::plot_trajectory_overlay(&log, &reference, world.as_ref())
        }
        PlotKind::VfhRun => {
            let log = RunLog::from_text(&text)
                .or_else(|e| input(format!("{}: {e}", input_path.display())))?;
            plot::plot_vfh_run(&log, world.as_ref())
        }
    };
    let out = default_out(out, "plot.svg");
    write(&out, &svg)?;
    println!("plot: {}", out.display());
    Ok(())
}
