//! Grid path search and conversion into a timed reference trajectory.
//!
//! Search is A* over the 8-connected free cells. Edge weights are integers,
//! 1_000_000 per straight step and 1_414_214 per diagonal, so costs compare
//! exactly and ties resolve the same way on every run; the rounding of
//! sqrt(2) cannot reorder paths until step-count differences reach the
//! millions, far beyond any grid this handles. Reported cost is meters.

use crate::geometry::{integrate_twist, wrap_rad, Pose};
use crate::gridmap::{Cell, OccupancyGrid};
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use thiserror::Error;

pub const COST_STRAIGHT: u64 = 1_000_000;
pub const COST_DIAG: u64 = 1_414_214;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("{role} cell ({ix},{iy}) is not a free cell of the grid")]
    InvalidEndpoint {
        role: &'static str,
        ix: i64,
        iy: i64,
    },
    #[error("no free path between the endpoints")]
    NoPath,
    #[error("path has a single cell, nothing to drive")]
    StationaryGoal,
    #[error("trajectory parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// 8-connected cell path. Grid placement is carried along so later stages
/// can recover world coordinates of the cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    pub cells: Vec<(usize, usize)>,
    /// metric length, straights + sqrt(2) diagonals, times cellsize
    pub cost: f64,
    pub cellsize: f64,
    pub x_min: f64,
    pub y_min: f64,
}

impl GridPath {
    pub fn world_points(&self) -> Vec<crate::geometry::Point2> {
        self.cells
            .iter()
            .map(|&(ix, iy)| {
                crate::geometry::Point2::new(
                    self.x_min + (ix as f64 + 0.5) * self.cellsize,
                    self.y_min + (iy as f64 + 0.5) * self.cellsize,
                )
            })
            .collect()
    }
}

fn check_endpoint(
    grid: &OccupancyGrid,
    cell: (i64, i64),
    role: &'static str,
) -> Result<(usize, usize), PlanError> {
    let bad = PlanError::InvalidEndpoint {
        role,
        ix: cell.0,
        iy: cell.1,
    };
    if !grid.in_bounds(cell.0, cell.1) {
        return Err(bad);
    }
    let (ix, iy) = (cell.0 as usize, cell.1 as usize);
    if grid.cell(ix, iy) != Cell::Free {
        return Err(bad);
    }
    Ok((ix, iy))
}

fn octile(a: (usize, usize), b: (usize, usize)) -> u64 {
    let dx = (a.0 as i64 - b.0 as i64).unsigned_abs();
    let dy = (a.1 as i64 - b.1 as i64).unsigned_abs();
    let (hi, lo) = if dx > dy { (dx, dy) } else { (dy, dx) };
    (hi - lo) * COST_STRAIGHT + lo * COST_DIAG
}

const MOVES: [(i64, i64, u64); 8] = [
    (1, 0, COST_STRAIGHT),
    (-1, 0, COST_STRAIGHT),
    (0, 1, COST_STRAIGHT),
    (0, -1, COST_STRAIGHT),
    (1, 1, COST_DIAG),
    (1, -1, COST_DIAG),
    (-1, 1, COST_DIAG),
    (-1, -1, COST_DIAG),
];

/// Minimum-cost path from start to goal over Free cells. A diagonal step
/// requires both orthogonally adjacent cells to be Free as well, so the
/// path never squeezes through a blocked corner.
pub fn astar(
    grid: &OccupancyGrid,
    start: (i64, i64),
    goal: (i64, i64),
) -> Result<GridPath, PlanError> {
    let start = check_endpoint(grid, start, "start")?;
    let goal = check_endpoint(grid, goal, "goal")?;
    let idx = |c: (usize, usize)| c.1 * grid.width + c.0;

    let n = grid.width * grid.height;
    let mut g = vec![u64::MAX; n];
    let mut parent: Vec<u32> = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    // min-heap on (f, deeper g first, row-major index)
    let mut open: BinaryHeap<Reverse<(u64, Reverse<u64>, usize)>> = BinaryHeap::new();
    g[idx(start)] = 0;
    open.push(Reverse((octile(start, goal), Reverse(0), idx(start))));

    while let Some(Reverse((_, Reverse(gc), i))) = open.pop() {
        if closed[i] || gc != g[i] {
            continue;
        }
        closed[i] = true;
        if i == idx(goal) {
            break;
        }
        let (cx, cy) = ((i % grid.width) as i64, (i / grid.width) as i64);
        for (dx, dy, w) in MOVES {
            let (nx, ny) = (cx + dx, cy + dy);
            if !grid.in_bounds(nx, ny) || grid.cell(nx as usize, ny as usize) != Cell::Free {
                continue;
            }
            if dx != 0 && dy != 0 {
                let side_a = grid.cell((cx + dx) as usize, cy as usize);
                let side_b = grid.cell(cx as usize, (cy + dy) as usize);
                if side_a != Cell::Free || side_b != Cell::Free {
                    continue;
                }
            }
            let ni = ny as usize * grid.width + nx as usize;
            let ng = g[i] + w;
            if ng < g[ni] {
                g[ni] = ng;
                parent[ni] = i as u32;
                let f = ng + octile((nx as usize, ny as usize), goal);
                open.push(Reverse((f, Reverse(ng), ni)));
            }
        }
    }

    if g[idx(goal)] == u64::MAX {
        return Err(PlanError::NoPath);
    }

    let mut cells = Vec::new();
    let mut i = idx(goal);
    loop {
        cells.push((i % grid.width, i / grid.width));
        if i == idx(start) {
            break;
        }
        i = parent[i] as usize;
    }
    cells.reverse();
    let mut straight = 0u64;
    let mut diag = 0u64;
    for w in cells.windows(2) {
        let dx = w[0].0 as i64 - w[1].0 as i64;
        let dy = w[0].1 as i64 - w[1].1 as i64;
        if dx != 0 && dy != 0 {
            diag += 1;
        } else {
            straight += 1;
        }
    }
    Ok(GridPath {
        cells,
        cost: (straight as f64 + diag as f64 * std::f64::consts::SQRT_2) * grid.cellsize,
        cellsize: grid.cellsize,
        x_min: grid.x_min,
        y_min: grid.y_min,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct TrajectoryConfig {
    pub trajectory_dt: f64,
    /// preferred corner arc radius; shrunk when a leg is too short
    pub arc_radius: f64,
    pub omega_max_deg: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            trajectory_dt: 0.05,
            arc_radius: 0.4,
            omega_max_deg: 25.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub pose: Pose,
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory {
    pub samples: Vec<TrajectorySample>,
}

/// One piece of the motion profile, driven at constant (v, omega).
#[derive(Debug, Clone, Copy)]
struct Phase {
    start: Pose,
    v: f64,
    omega: f64,
    duration: f64,
}

/// Timed reference through the path's cell centers. Straight legs run at
/// v_cruise; corners become tangent arcs, slowed so the turn rate stays
/// inside the configured bound. Headings are emitted unwrapped so the
/// profile is continuous.
pub fn path_to_trajectory(
    path: &GridPath,
    v_cruise: f64,
) -> Result<ReferenceTrajectory, PlanError> {
    path_to_trajectory_with(path, v_cruise, &TrajectoryConfig::default())
}

pub fn path_to_trajectory_with(
    path: &GridPath,
    v_cruise: f64,
    cfg: &TrajectoryConfig,
) -> Result<ReferenceTrajectory, PlanError> {
    assert!(v_cruise > 0.0, "v_cruise must be positive");
    let pts = path.world_points();
    if pts.len() < 2 {
        return Err(PlanError::StationaryGoal);
    }

    // corners = points where the step direction changes
    let mut way = vec![pts[0]];
    for i in 1..pts.len() - 1 {
        let a = (pts[i].x - pts[i - 1].x, pts[i].y - pts[i - 1].y);
        let b = (pts[i + 1].x - pts[i].x, pts[i + 1].y - pts[i].y);
        if (a.0 * b.1 - a.1 * b.0).abs() > 1e-9 * path.cellsize * path.cellsize {
            way.push(pts[i]);
        }
    }
    way.push(*pts.last().unwrap());

    let omega_max = cfg.omega_max_deg.to_radians();
    let leg_len: Vec<f64> = way.windows(2).map(|w| w[0].dist(w[1])).collect();
    let headings: Vec<f64> = way
        .windows(2)
        .map(|w| (w[1].y - w[0].y).atan2(w[1].x - w[0].x))
        .collect();

    // per corner: signed turn, arc radius fitted to the shorter half-leg
    let ncorner = way.len().saturating_sub(2);
    let mut turns = Vec::with_capacity(ncorner);
    let mut radii = Vec::with_capacity(ncorner);
    let mut trims = Vec::with_capacity(ncorner);
    for c in 0..ncorner {
        let delta = wrap_rad(headings[c + 1] - headings[c]);
        let tan_half = (delta.abs() / 2.0).tan();
        let avail = (leg_len[c] / 2.0).min(leg_len[c + 1] / 2.0);
        let r = cfg.arc_radius.min(avail / tan_half).max(1e-3);
        turns.push(delta);
        radii.push(r);
        trims.push(r * tan_half);
    }

    let mut phases: Vec<Phase> = Vec::new();
    let mut pose = Pose::new(way[0].x, way[0].y, headings[0]);
    let mut push = |pose: &mut Pose, v: f64, omega: f64, duration: f64| {
        if duration > 1e-12 {
            phases.push(Phase {
                start: *pose,
                v,
                omega,
                duration,
            });
            *pose = integrate_twist(*pose, v, omega, duration);
        }
    };
    for leg in 0..leg_len.len() {
        let head_trim = if leg == 0 { 0.0 } else { trims[leg - 1] };
        let tail_trim = if leg < ncorner { trims[leg] } else { 0.0 };
        let run = (leg_len[leg] - head_trim - tail_trim).max(0.0);
        push(&mut pose, v_cruise, 0.0, run / v_cruise);
        if leg < ncorner {
            let v_arc = v_cruise.min(omega_max * radii[leg]);
            let omega = turns[leg].signum() * v_arc / radii[leg];
            push(
                &mut pose,
                v_arc,
                omega,
                turns[leg].abs() * radii[leg] / v_arc,
            );
        }
    }

    // cumulative phase start times
    let mut starts = Vec::with_capacity(phases.len());
    let mut t_end = 0.0;
    for ph in &phases {
        starts.push(t_end);
        t_end += ph.duration;
    }

    let eval = |t: f64| -> (Pose, f64, f64) {
        let k = match starts.binary_search_by(|s| s.partial_cmp(&t).unwrap()) {
            Ok(k) => k,
            Err(k) => k.saturating_sub(1),
        };
        let ph = &phases[k];
        let local = (t - starts[k]).clamp(0.0, ph.duration);
        (
            integrate_twist(ph.start, ph.v, ph.omega, local),
            ph.v,
            ph.omega,
        )
    };

    let mut samples = Vec::new();
    let mut i = 0u64;
    loop {
        let t = i as f64 * cfg.trajectory_dt;
        if t >= t_end - 1e-9 {
            break;
        }
        let (pose, v, omega) = eval(t);
        samples.push(TrajectorySample { t, pose, v, omega });
        i += 1;
    }
    let (pose, v, omega) = eval(t_end);
    samples.push(TrajectorySample {
        t: t_end,
        pose,
        v,
        omega,
    });
    Ok(ReferenceTrajectory { samples })
}

impl ReferenceTrajectory {
    pub fn duration(&self) -> f64 {
        self.samples.last().map(|s| s.t).unwrap_or(0.0)
    }

    pub fn start_pose(&self) -> Pose {
        self.samples[0].pose
    }

    /// Piecewise-linear pose interpolation; v and omega are held from the
    /// sample on the left. Times outside the range clamp to the ends.
    pub fn at(&self, t: f64) -> TrajectorySample {
        let s = &self.samples;
        if t <= s[0].t {
            return s[0];
        }
        if t >= s[s.len() - 1].t {
            return s[s.len() - 1];
        }
        let k = s.partition_point(|a| a.t <= t) - 1;
        let (a, b) = (&s[k], &s[k + 1]);
        let u = (t - a.t) / (b.t - a.t);
        TrajectorySample {
            t,
            pose: Pose::new(
                a.pose.x + u * (b.pose.x - a.pose.x),
                a.pose.y + u * (b.pose.y - a.pose.y),
                a.pose.theta + u * (b.pose.theta - a.pose.theta),
            ),
            v: a.v,
            omega: a.omega,
        }
    }

    /// Arc length from the start to each sample, by chord accumulation.
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.samples.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.samples.windows(2) {
            acc +=
                ((w[1].pose.x - w[0].pose.x).powi(2) + (w[1].pose.y - w[0].pose.y).powi(2)).sqrt();
            out.push(acc);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,theta,v,omega\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                s.t, s.pose.x, s.pose.y, s.pose.theta, s.v, s.omega
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<ReferenceTrajectory, PlanError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "t,x,y,theta,v,omega" => {}
            _ => {
                return Err(PlanError::Parse {
                    line: 1,
                    msg: "expected header t,x,y,theta,v,omega".into(),
                })
            }
        }
        let mut samples = Vec::new();
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(PlanError::Parse {
                    line: ln + 1,
                    msg: format!("expected 6 fields, got {}", f.len()),
                });
            }
            let mut v = [0.0f64; 6];
            for (i, s) in f.iter().enumerate() {
                v[i] = s.trim().parse().map_err(|_| PlanError::Parse {
                    line: ln + 1,
                    msg: format!("bad number `{s}`"),
                })?;
            }
            samples.push(TrajectorySample {
                t: v[0],
                pose: Pose::new(v[1], v[2], v[3]),
                v: v[4],
                omega: v[5],
            });
        }
        if samples.is_empty() {
            return Err(PlanError::Parse {
                line: 1,
                msg: "no samples".into(),
            });
        }
        Ok(ReferenceTrajectory { samples })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridmap::{Cell, OccupancyGrid};

    fn empty_grid(w: usize, h: usize, cellsize: f64) -> OccupancyGrid {
        OccupancyGrid::new_free(cellsize, 0.0, 0.0, w, h)
    }

    #[test]
    fn straight_line_cost() {
        let grid = empty_grid(10, 10, 1.0);
        let path = astar(&grid, (0, 0), (0, 5)).unwrap();
        assert!((path.cost - 5.0).abs() < 1e-12);
        assert_eq!(path.cells.len(), 6);
        assert!(path.cells.iter().all(|c| c.0 == 0));
    }

    #[test]
    fn pure_diagonal_cost() {
        let grid = empty_grid(10, 10, 1.0);
        let path = astar(&grid, (0, 0), (3, 3)).unwrap();
        assert!((path.cost - 3.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(path.cells.len(), 4);
    }

    #[test]
    fn endpoint_errors_are_distinct() {
        let mut grid = empty_grid(5, 5, 1.0);
        grid.set_cell(2, 2, Cell::Occupied);
        match astar(&grid, (2, 2), (0, 0)) {
            Err(PlanError::InvalidEndpoint { role: "start", .. }) => {}
            other => panic!("wanted invalid start, got {other:?}"),
        }
        match astar(&grid, (0, 0), (9, 0)) {
            Err(PlanError::InvalidEndpoint { role: "goal", .. }) => {}
            other => panic!("wanted invalid goal, got {other:?}"),
        }
        // wall the grid in two
        let mut grid = empty_grid(5, 5, 1.0);
        for iy in 0..5 {
            grid.set_cell(2, iy, Cell::Occupied);
        }
        match astar(&grid, (0, 0), (4, 4)) {
            Err(PlanError::NoPath) => {}
            other => panic!("wanted NoPath, got {other:?}"),
        }
    }

    #[test]
    fn no_corner_cutting() {
        let mut grid = empty_grid(2, 2, 1.0);
        grid.set_cell(1, 0, Cell::Occupied);
        grid.set_cell(0, 1, Cell::Dilated);
        match astar(&grid, (0, 0), (1, 1)) {
            Err(PlanError::NoPath) => {}
            other => panic!("diagonal squeezed through a blocked corner: {other:?}"),
        }
    }

    /// Plain Dijkstra with the same step rules, no heuristic. The search
    /// under test must reproduce these costs exactly.
    fn dijkstra_cost(
        grid: &OccupancyGrid,
        start: (usize, usize),
        goal: (usize, usize),
    ) -> Option<u64> {
        let n = grid.width * grid.height;
        let mut dist = vec![u64::MAX; n];
        let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
        dist[start.1 * grid.width + start.0] = 0;
        heap.push(Reverse((0, start.1 * grid.width + start.0)));
        while let Some(Reverse((d, i))) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            let (cx, cy) = ((i % grid.width) as i64, (i / grid.width) as i64);
            for (dx, dy, w) in MOVES {
                let (nx, ny) = (cx + dx, cy + dy);
                if !grid.in_bounds(nx, ny) || grid.cell(nx as usize, ny as usize) != Cell::Free {
                    continue;
                }
                if dx != 0
                    && dy != 0
                    && (grid.cell((cx + dx) as usize, cy as usize) != Cell::Free
                        || grid.cell(cx as usize, (cy + dy) as usize) != Cell::Free)
                {
                    continue;
                }
                let ni = ny as usize * grid.width + nx as usize;
                if d + w < dist[ni] {
                    dist[ni] = d + w;
                    heap.push(Reverse((d + w, ni)));
                }
            }
        }
        let dg = dist[goal.1 * grid.width + goal.0];
        (dg != u64::MAX).then_some(dg)
    }

    fn path_units(path: &GridPath) -> u64 {
        path.cells
            .windows(2)
            .map(|w| {
                let dx = w[0].0 as i64 - w[1].0 as i64;
                let dy = w[0].1 as i64 - w[1].1 as i64;
                if dx != 0 && dy != 0 {
                    COST_DIAG
                } else {
                    COST_STRAIGHT
                }
            })
            .sum()
    }

    #[test]
    fn matches_dijkstra_on_random_grids() {
        let mut state = 0x243f6a8885a308d3u64;
        let mut rnd = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 40) as f64 / (1u64 << 24) as f64
        };
        let mut solvable = 0;
        for trial in 0..100 {
            let mut grid = empty_grid(20, 20, 0.5);
            for iy in 0..20 {
                for ix in 0..20 {
                    if rnd() < 0.30 {
                        grid.set_cell(ix, iy, Cell::Occupied);
                    }
                }
            }
            grid.set_cell(0, 0, Cell::Free);
            grid.set_cell(19, 19, Cell::Free);
            let oracle = dijkstra_cost(&grid, (0, 0), (19, 19));
            match (astar(&grid, (0, 0), (19, 19)), oracle) {
                (Ok(path), Some(want)) => {
                    solvable += 1;
                    assert_eq!(path_units(&path), want, "trial {trial}");
                    assert_eq!(path.cells.first(), Some(&(0, 0)));
                    assert_eq!(path.cells.last(), Some(&(19, 19)));
                    for w in path.cells.windows(2) {
                        let dx = (w[0].0 as i64 - w[1].0 as i64).abs();
                        let dy = (w[0].1 as i64 - w[1].1 as i64).abs();
                        assert!(dx <= 1 && dy <= 1 && dx + dy > 0);
                    }
                    for &(ix, iy) in &path.cells {
                        assert_eq!(grid.cell(ix, iy), Cell::Free);
                    }
                }
                (Err(PlanError::NoPath), None) => {}
                (got, want) => panic!("trial {trial}: search {got:?} vs oracle {want:?}"),
            }
        }
        assert!(solvable >= 20, "only {solvable} solvable instances");
    }

    #[test]
    fn deterministic_output() {
        let mut grid = empty_grid(15, 15, 1.0);
        for ix in 3..12 {
            grid.set_cell(ix, 7, Cell::Occupied);
        }
        let a = astar(&grid, (1, 1), (13, 13)).unwrap();
        let b = astar(&grid, (1, 1), (13, 13)).unwrap();
        assert_eq!(a.cells, b.cells);
    }

    fn straight_path(cells: usize, cellsize: f64) -> GridPath {
        astar(
            &empty_grid(2, cells, cellsize),
            (0, 0),
            (0, cells as i64 - 1),
        )
        .unwrap()
    }

    #[test]
    fn straight_run_duration() {
        // 11 cell centers 0.4 m apart = 4 m of travel
        let traj = path_to_trajectory(&straight_path(11, 0.4), 0.3).unwrap();
        assert!((traj.duration() - 4.0 / 0.3).abs() < 1e-9);
        for s in &traj.samples {
            assert_eq!(s.omega, 0.0);
            assert!((s.v - 0.3).abs() < 1e-12);
        }
        let first = traj.samples[0].pose;
        let last = traj.samples.last().unwrap().pose;
        assert!((first.x - 0.2).abs() < 1e-9 && (first.y - 0.2).abs() < 1e-9);
        assert!((last.y - 4.2).abs() < 1e-9);
    }

    fn l_path(cellsize: f64) -> GridPath {
        let mut cells: Vec<(usize, usize)> = (0..=5).map(|iy| (0usize, iy)).collect();
        cells.extend((1..=5).map(|ix| (ix, 5usize)));
        GridPath {
            cells,
            cost: 10.0 * cellsize,
            cellsize,
            x_min: 0.0,
            y_min: 0.0,
        }
    }

    #[test]
    fn corner_arc_turn_rate_unclamped() {
        let cfg = TrajectoryConfig {
            omega_max_deg: 50.0,
            ..TrajectoryConfig::default()
        };
        let traj = path_to_trajectory_with(&l_path(0.4), 0.3, &cfg).unwrap();
        let max_omega = traj
            .samples
            .iter()
            .map(|s| s.omega.abs())
            .fold(0.0, f64::max);
        // 0.4 m radius at full cruise speed
        assert!((max_omega - 0.75).abs() < 1e-9, "max omega {max_omega}");
        let arc_v: Vec<f64> = traj
            .samples
            .iter()
            .filter(|s| s.omega.abs() > 1e-9)
            .map(|s| s.v)
            .collect();
        assert!(!arc_v.is_empty());
        assert!(arc_v.iter().all(|v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn corner_arc_respects_default_turn_bound() {
        let traj = path_to_trajectory(&l_path(0.4), 0.3).unwrap();
        let omega_max = 25f64.to_radians();
        for s in &traj.samples {
            assert!(s.omega.abs() <= omega_max + 1e-9);
            assert!(s.v > 0.0);
        }
        // the arc is slowed rather than widened
        let arc_v = traj
            .samples
            .iter()
            .find(|s| s.omega.abs() > 1e-9)
            .unwrap()
            .v;
        assert!((arc_v - omega_max * 0.4).abs() < 1e-9);
    }

    #[test]
    fn heading_is_continuous_on_l_path() {
        let traj = path_to_trajectory(&l_path(0.4), 0.3).unwrap();
        let omega_max = 25f64.to_radians();
        for w in traj.samples.windows(2) {
            let dth = (w[1].pose.theta - w[0].pose.theta).abs();
            let dt = w[1].t - w[0].t;
            assert!(dth <= omega_max * dt + 1e-9, "jump {dth} over {dt}");
        }
    }

    #[test]
    fn finite_difference_matches_velocity() {
        // a step can straddle a straight/arc switch, so the difference
        // quotient must land between the endpoint rates, with curvature slack
        let traj = path_to_trajectory(&l_path(0.4), 0.3).unwrap();
        let dt = 0.05;
        let tol = 2.0 * 0.3 * dt;
        for w in traj.samples.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let step = b.t - a.t;
            for (fd, ra, rb) in [
                (
                    (b.pose.x - a.pose.x) / step,
                    a.v * a.pose.theta.cos(),
                    b.v * b.pose.theta.cos(),
                ),
                (
                    (b.pose.y - a.pose.y) / step,
                    a.v * a.pose.theta.sin(),
                    b.v * b.pose.theta.sin(),
                ),
            ] {
                assert!(
                    fd >= ra.min(rb) - tol && fd <= ra.max(rb) + tol,
                    "t={} fd {fd} outside [{ra}, {rb}]",
                    a.t
                );
            }
        }
    }

    #[test]
    fn time_grid_and_positivity() {
        let traj = path_to_trajectory(&l_path(0.4), 0.3).unwrap();
        for w in traj.samples.windows(2) {
            assert!(w[1].t > w[0].t);
        }
        assert!(traj.samples.iter().all(|s| s.v > 0.0));
        // interior samples sit on the dt lattice
        for (i, s) in traj.samples.iter().enumerate().take(traj.samples.len() - 1) {
            assert!((s.t - i as f64 * 0.05).abs() < 1e-12);
        }
    }

    #[test]
    fn single_cell_path_is_an_error() {
        let path = GridPath {
            cells: vec![(3, 3)],
            cost: 0.0,
            cellsize: 0.4,
            x_min: 0.0,
            y_min: 0.0,
        };
        match path_to_trajectory(&path, 0.3) {
            Err(PlanError::StationaryGoal) => {}
            other => panic!("wanted StationaryGoal, got {other:?}"),
        }
    }

    #[test]
    fn interpolation_clamps_and_is_exact_at_samples() {
        let traj = path_to_trajectory(&l_path(0.4), 0.3).unwrap();
        let s0 = traj.at(-5.0);
        assert_eq!(s0.pose, traj.samples[0].pose);
        let send = traj.at(traj.duration() + 5.0);
        assert_eq!(send.pose, traj.samples.last().unwrap().pose);
        let mid = traj.samples[traj.samples.len() / 2];
        let got = traj.at(mid.t);
        assert!((got.pose.x - mid.pose.x).abs() < 1e-12);
        assert!((got.pose.y - mid.pose.y).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip() {
        let traj = path_to_trajectory(&l_path(0.4), 0.3).unwrap();
        let text = traj.to_csv();
        assert!(text.starts_with("t,x,y,theta,v,omega\n"));
        let parsed = ReferenceTrajectory::from_csv(&text).unwrap();
        assert_eq!(parsed.samples.len(), traj.samples.len());
        for (a, b) in parsed.samples.iter().zip(&traj.samples) {
            assert!((a.t - b.t).abs() < 1e-6);
            assert!((a.pose.x - b.pose.x).abs() < 1e-6);
            assert!((a.omega - b.omega).abs() < 1e-6);
        }
        assert!(ReferenceTrajectory::from_csv("nonsense\n1,2\n").is_err());
    }
}
