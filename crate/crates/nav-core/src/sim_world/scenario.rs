//! Scenario files: one TOML document describing the world, the robot, every
//! pipeline configuration and the pass criteria of a run.
//!
//! The format is versioned (`version = 1`) and deliberately flat: module
//! configs are inlined into their tables field-for-field, so a scenario can
//! override exactly one knob without restating the rest. Unset fields take
//! the module defaults. Example skeleton:
//!
//! ```toml
//! version = 1
//! name = "gates"
//!
//! [world]
//! walls = [[-5.0, -1.0, 5.0, -1.0, 0.0, 2.5]]   # x1 y1 x2 y2 z_lo z_hi
//!
//! [[world.region]]
//! name = "gate_b"
//! rect = [1.9, 3.7, 4.3, 4.3]
//!
//! [robot]
//! start = [0.0, 0.0]
//! heading_deg = 90.0
//!
//! [sweep]
//! heading_deg = 0.0          # capture heading; fan spans 40..140 relative
//!
//! [map]
//! z_limit = 1.2
//!
//! [grid]
//! cellsize = 0.4
//! bounds = [-4.6, -0.6, 4.6, 8.6]
//! dilation = 2
//!
//! [plan]
//! goal = [0.0, 7.6]
//! v_cruise = 0.3
//!
//! [sim]
//! duration = 120.0
//!
//! [[event]]
//! t = 12.0
//! box = [1.6, 2.0, 2.2, 2.6, 0.0, 0.8]
//!
//! [verify]
//! visited = ["gate_b"]
//! ```

use super::{box_faces, Region, SonarRing, WallFace, WorldModel};
use crate::geometry::{Point2, Pose, Rect};
use crate::improved_vfh::VfhConfig;
use crate::ipabd::{CompressConfig, SegmentationConfig};
use crate::planner::TrajectoryConfig;
use crate::scan_geometry::SweepConfig;
use crate::tracking_control::{ControlLimits, Gains, RobotParams};
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("scenario io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub world: WorldSpec,
    pub robot: RobotSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub map: Option<MapSpec>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    pub plan: PlanSpec,
    #[serde(default)]
    pub control: ControlSpec,
    #[serde(default)]
    pub avoid: AvoidSpec,
    #[serde(default)]
    pub sim: SimSpec,
    #[serde(default, rename = "event")]
    pub events: Vec<EventSpec>,
    #[serde(default)]
    pub verify: VerifySpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldSpec {
    /// Wall faces as [x1, y1, x2, y2, z_lo, z_hi].
    pub walls: Vec<[f64; 6]>,
    #[serde(default, rename = "region")]
    pub regions: Vec<RegionSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionSpec {
    pub name: String,
    /// [x0, y0, x1, y1]
    pub rect: [f64; 4],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RobotSpec {
    pub start: [f64; 2],
    pub heading_deg: f64,
    #[serde(flatten)]
    pub params: RobotParams,
    #[serde(flatten)]
    pub sonar: SonarRing,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Heading at capture time. The robot turns to this, sweeps once, then
    /// turns to its driving heading; only the map sees this orientation.
    #[serde(default)]
    pub heading_deg: f64,
    #[serde(flatten)]
    pub config: SweepConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            heading_deg: 0.0,
            config: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapSpec {
    pub z_limit: f64,
    #[serde(flatten)]
    pub compress: CompressConfig,
    #[serde(flatten)]
    pub segmentation: SegmentationConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSpec {
    pub cellsize: f64,
    /// [x0, y0, x1, y1]
    pub bounds: [f64; 4],
    pub dilation: usize,
}

impl GridSpec {
    pub fn rect(&self) -> Rect {
        Rect::new(
            self.bounds[0],
            self.bounds[1],
            self.bounds[2],
            self.bounds[3],
        )
    }
}

fn default_v_cruise() -> f64 {
    0.3
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlanSpec {
    pub goal: [f64; 2],
    #[serde(default = "default_v_cruise")]
    pub v_cruise: f64,
    #[serde(flatten)]
    pub trajectory: TrajectoryConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlSpec {
    /// Feedback gains; when unset they are scheduled from the cruise speed.
    pub k1: Option<f64>,
    pub k3: Option<f64>,
    pub v_max: f64,
    pub omega_max_deg: f64,
    pub control_dt: f64,
}

impl Default for ControlSpec {
    fn default() -> Self {
        ControlSpec {
            k1: None,
            k3: None,
            v_max: 0.5,
            omega_max_deg: 25.0,
            control_dt: 0.05,
        }
    }
}

impl ControlSpec {
    pub fn limits(&self) -> ControlLimits {
        ControlLimits {
            v_max: self.v_max,
            omega_max: self.omega_max_deg.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct AvoidSpec {
    #[serde(flatten)]
    pub vfh: VfhConfig,
    /// A sonar return closer than this, reflected from inside the planned
    /// corridor, hands control to the avoider.
    pub engage_distance: f64,
    /// Half-width of the corridor around the reference polyline.
    pub corridor_radius: f64,
    /// How far ahead along the path the corridor test looks (m of arc).
    pub corridor_ahead: f64,
    /// Tracking resumes once the robot is back within this distance of the
    /// reference path...
    pub release_distance: f64,
    /// ...and the forward cone is clear to at least this range.
    pub release_d30: f64,
    /// Arc-length lead of the avoider's pull target along the path.
    pub lookahead: f64,
    /// Skip mapping and planning; run the avoider straight at the goal.
    pub avoider_only: bool,
}

impl Default for AvoidSpec {
    fn default() -> Self {
        AvoidSpec {
            vfh: VfhConfig::default(),
            engage_distance: 1.5,
            corridor_radius: 0.6,
            corridor_ahead: 4.0,
            release_distance: 0.3,
            release_d30: 1.5,
            lookahead: 2.0,
            avoider_only: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSpec {
    pub duration: f64,
    pub seed: u64,
    pub noise: bool,
    pub noise_sigma: f64,
    pub goal_radius: f64,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            duration: 120.0,
            seed: 0,
            noise: false,
            noise_sigma: 0.01,
            goal_radius: 0.15,
        }
    }
}

/// A world change at simulation time `t`: exactly one of `wall` (a single
/// face, [x1, y1, x2, y2, z_lo, z_hi]) or `box` (an axis-aligned footprint,
/// [x0, y0, x1, y1, z_lo, z_hi]).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventSpec {
    pub t: f64,
    #[serde(default)]
    pub wall: Option<[f64; 6]>,
    #[serde(default, rename = "box")]
    pub obstacle_box: Option<[f64; 6]>,
}

impl EventSpec {
    pub fn faces(&self) -> Vec<WallFace> {
        if let Some(w) = self.wall {
            vec![WallFace::new(w[0], w[1], w[2], w[3], w[4], w[5])]
        } else if let Some(b) = self.obstacle_box {
            box_faces(b[0], b[1], b[2], b[3], b[4], b[5]).to_vec()
        } else {
            vec![]
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifySpec {
    pub visited: Vec<String>,
    pub avoided: Vec<String>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        let mut sc: Scenario = toml::from_str(text)?;
        sc.events
            .sort_by(|a, b| a.t.partial_cmp(&b.t).expect("event times are finite"));
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        Scenario::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.version != SCENARIO_VERSION {
            return Err(invalid(format!(
                "unsupported scenario version {} (this build reads {})",
                self.version, SCENARIO_VERSION
            )));
        }
        if self.world.walls.is_empty() {
            return Err(invalid("world has no walls"));
        }
        for (i, w) in self.world.walls.iter().enumerate() {
            check_face(w, &format!("wall {i}"))?;
        }
        for r in &self.world.regions {
            if r.name.is_empty() {
                return Err(invalid("region with empty name"));
            }
            if !r.rect.iter().all(|v| v.is_finite()) {
                return Err(invalid(format!("region {} has non-finite rect", r.name)));
            }
        }
        let p = &self.robot.params;
        if !(p.wheel_radius > 0.0
            && p.half_axle > 0.0
            && p.body_diameter > 0.0
            && p.body_height > 0.0)
        {
            return Err(invalid("robot dimensions must be positive"));
        }
        let s = &self.robot.sonar;
        if !(s.cone_half_angle_deg > 0.0 && s.cone_half_angle_deg < 90.0) {
            return Err(invalid("sonar cone half-angle must be in (0, 90) deg"));
        }
        if !(s.range_min >= 0.0 && s.range_min < s.range_max) {
            return Err(invalid("sonar range window must satisfy 0 <= min < max"));
        }
        self.sweep
            .config
            .validate()
            .map_err(|e| invalid(format!("sweep config: {e}")))?;
        if let Some(m) = &self.map {
            if !(m.z_limit > 0.0) {
                return Err(invalid("map z_limit must be positive"));
            }
        }
        if let Some(g) = &self.grid {
            if !(g.cellsize > 0.0) {
                return Err(invalid("grid cellsize must be positive"));
            }
            if !(g.bounds[0] < g.bounds[2] && g.bounds[1] < g.bounds[3]) {
                return Err(invalid("grid bounds must have positive extent"));
            }
            let rect = g.rect();
            if !rect.contains(self.start_point()) {
                return Err(invalid("robot start lies outside the grid bounds"));
            }
            if !rect.contains(self.goal()) {
                return Err(invalid("goal lies outside the grid bounds"));
            }
        }
        if !self.avoid.avoider_only {
            if self.map.is_none() {
                return Err(invalid("[map] is required unless avoid.avoider_only"));
            }
            if self.grid.is_none() {
                return Err(invalid("[grid] is required unless avoid.avoider_only"));
            }
        }
        if !(self.plan.v_cruise > 0.0) {
            return Err(invalid("plan v_cruise must be positive"));
        }
        let t = &self.plan.trajectory;
        if !(t.trajectory_dt > 0.0 && t.arc_radius >= 0.0 && t.omega_max_deg > 0.0) {
            return Err(invalid("trajectory config out of range"));
        }
        let c = &self.control;
        if !(c.control_dt > 0.0 && c.v_max > 0.0 && c.omega_max_deg > 0.0) {
            return Err(invalid("control config out of range"));
        }
        if c.k1.map_or(false, |k| k <= 0.0) || c.k3.map_or(false, |k| k <= 0.0) {
            return Err(invalid("explicit gains must be positive"));
        }
        let a = &self.avoid;
        if !(a.engage_distance >= 0.0
            && a.corridor_radius > 0.0
            && a.corridor_ahead > 0.0
            && a.release_distance > 0.0
            && a.release_d30 > 0.0
            && a.lookahead > 0.0)
        {
            return Err(invalid("avoid config out of range"));
        }
        if !(a.vfh.sector_width_deg > 0.0 && (360.0 / a.vfh.sector_width_deg).fract().abs() < 1e-9)
        {
            return Err(invalid("vfh sector width must divide 360"));
        }
        if !(self.sim.duration > 0.0 && self.sim.goal_radius > 0.0 && self.sim.noise_sigma >= 0.0) {
            return Err(invalid("sim config out of range"));
        }
        for (i, ev) in self.events.iter().enumerate() {
            if ev.wall.is_some() == ev.obstacle_box.is_some() {
                return Err(invalid(format!(
                    "event {i} must set exactly one of `wall` or `box`"
                )));
            }
            if !(ev.t >= 0.0) {
                return Err(invalid(format!("event {i} has negative time")));
            }
            if let Some(w) = &ev.wall {
                check_face(w, &format!("event {i} wall"))?;
            }
            if let Some(b) = &ev.obstacle_box {
                if !(b[4] < b[5]) || b[0] == b[2] || b[1] == b[3] {
                    return Err(invalid(format!("event {i} box is degenerate")));
                }
            }
        }
        for name in self.verify.visited.iter().chain(&self.verify.avoided) {
            if !self.world.regions.iter().any(|r| &r.name == name) {
                return Err(invalid(format!(
                    "verify references unknown region `{name}`"
                )));
            }
        }
        Ok(())
    }

    pub fn base_world(&self) -> WorldModel {
        WorldModel {
            faces: self
                .world
                .walls
                .iter()
                .map(|w| WallFace::new(w[0], w[1], w[2], w[3], w[4], w[5]))
                .collect(),
            regions: self
                .world
                .regions
                .iter()
                .map(|r| Region {
                    name: r.name.clone(),
                    rect: Rect::new(r.rect[0], r.rect[1], r.rect[2], r.rect[3]),
                })
                .collect(),
        }
    }

    /// The world with every timed event already applied, regardless of time.
    pub fn world_with_events(&self) -> WorldModel {
        let mut w = self.base_world();
        for ev in &self.events {
            w.faces.extend(ev.faces());
        }
        w
    }

    pub fn start_point(&self) -> Point2 {
        Point2::new(self.robot.start[0], self.robot.start[1])
    }

    pub fn start_pose(&self) -> Pose {
        Pose::new(
            self.robot.start[0],
            self.robot.start[1],
            self.robot.heading_deg.to_radians(),
        )
    }

    pub fn capture_pose(&self) -> Pose {
        Pose::new(
            self.robot.start[0],
            self.robot.start[1],
            self.sweep.heading_deg.to_radians(),
        )
    }

    pub fn goal(&self) -> Point2 {
        Point2::new(self.plan.goal[0], self.plan.goal[1])
    }

    pub fn gains(&self) -> Gains {
        match (self.control.k1, self.control.k3) {
            (Some(k1), Some(k3)) => Gains::new(k1, k3),
            (None, None) => Gains::for_speed(self.plan.v_cruise),
            (k1, k3) => Gains {
                k1: k1.unwrap_or(1.0),
                k3: k3.unwrap_or_else(|| Gains::for_speed(self.plan.v_cruise).k3),
            },
        }
    }
}

fn check_face(w: &[f64; 6], what: &str) -> Result<(), ScenarioError> {
    if !w.iter().all(|v| v.is_finite()) {
        return Err(invalid(format!("{what} has non-finite coordinates")));
    }
    if w[0] == w[2] && w[1] == w[3] {
        return Err(invalid(format!("{what} has zero planar length")));
    }
    if !(w[4] < w[5]) {
        return Err(invalid(format!("{what} needs z_lo < z_hi")));
    }
    Ok(())
}
