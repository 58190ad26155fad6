//! Indoor navigation stack for a differential-drive robot, plus the 2.5D
//! simulator used to exercise it end to end.
//!
//! The pipeline, in dependency order:
//!
//! - [`scan_geometry`]: a tilting single-plane rangefinder swept over a
//!   pitch interval produces a 3D point cloud in one closed-form transform.
//! - [`ipabd`]: the cloud collapses to a 2D polar obstacle slice by keeping,
//!   per scan azimuth, the nearest return whose height can actually block
//!   the robot; the slice clusters and splits into line segments.
//! - [`gridmap`]: segments rasterize conservatively onto an occupancy grid
//!   (every touched cell marks occupied) which is then dilated so the robot
//!   can be treated as a point.
//! - [`planner`]: 8-connected A* over the grid, then a timed trajectory
//!   with circular-arc corners and trapezoid-free constant cruise speed.
//! - [`tracking_control`]: a Lyapunov-stable posture tracker turns the
//!   trajectory into wheel commands.
//! - [`improved_vfh`]: a sonar-ring histogram avoider handles what the map
//!   did not know about.
//! - [`sim_world`]: wall-face world model, sensor simulation, the scenario
//!   file format, and the closed-loop runner that arbitrates tracker and
//!   avoider and writes deterministic run logs.

pub mod geometry;
pub mod gridmap;
pub mod improved_vfh;
pub mod ipabd;
pub mod planner;
pub mod scan_geometry;
pub mod sim_world;
pub mod tracking_control;

pub use geometry::{Point2, Pose, Rect, Segment2};
pub use gridmap::{Cell, OccupancyGrid};
pub use planner::{GridPath, ReferenceTrajectory};
pub use sim_world::engine::{run_scenario, RunLog, Verdict};
pub use sim_world::scenario::Scenario;
pub use sim_world::WorldModel;
