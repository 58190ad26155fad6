//! Sweep geometry for a pitching 2D laser range finder.
//!
//! The scanner sits at `mount_height` above the floor and tilts its scan
//! plane through a ladder of pitch angles. Frame j scans pitch
//! `pitch_min + j*pitch_step`; ray k within a frame points at scan angle
//! `scan_min + k*scan_step`. A return R at (alpha, beta) converts to sensor
//! Cartesian as
//!
//!   x = R cos(alpha) cos(beta), y = R cos(alpha) sin(beta), z = R sin(alpha)
//!
//! so the fan is centered on the sensor +y axis at beta = 90 degrees.
//! Angles are degrees at every public boundary; radians only inside trig.

use crate::geometry::Pose;
use crate::sim_world::WorldModel;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid sweep config: {0}")]
    BadConfig(String),
    #[error("cloud parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub pitch_min_deg: f64,
    pub pitch_max_deg: f64,
    pub pitch_step_deg: f64,
    pub scan_min_deg: f64,
    pub scan_max_deg: f64,
    pub scan_step_deg: f64,
    pub mount_height: f64,
    pub max_range: f64,
}

impl Default for SweepConfig {
    /// SICK-style tilt unit: pitch -5..+20 deg in 0.266 deg steps (94
    /// frames), scan 40..140 deg in 1 deg steps (101 rays).
    fn default() -> Self {
        SweepConfig {
            pitch_min_deg: -5.0,
            pitch_max_deg: 20.0,
            pitch_step_deg: 0.266,
            scan_min_deg: 40.0,
            scan_max_deg: 140.0,
            scan_step_deg: 1.0,
            mount_height: 0.4,
            max_range: 80.0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), ScanError> {
        let vals = [
            self.pitch_min_deg,
            self.pitch_max_deg,
            self.pitch_step_deg,
            self.scan_min_deg,
            self.scan_max_deg,
            self.scan_step_deg,
            self.mount_height,
            self.max_range,
        ];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(ScanError::NonFinite("sweep config"));
        }
        if self.pitch_min_deg >= self.pitch_max_deg {
            return Err(ScanError::BadConfig("pitch_min must be < pitch_max".into()));
        }
        if self.scan_min_deg >= self.scan_max_deg {
            return Err(ScanError::BadConfig("scan_min must be < scan_max".into()));
        }
        if self.pitch_step_deg <= 0.0 || self.scan_step_deg <= 0.0 {
            return Err(ScanError::BadConfig("angle steps must be > 0".into()));
        }
        if self.max_range <= 0.0 {
            return Err(ScanError::BadConfig("max_range must be > 0".into()));
        }
        Ok(())
    }

    /// Inclusive endpoints with floor(): 25 deg / 0.266 deg -> 93 steps + 1.
    pub fn frame_count(&self) -> usize {
        ((self.pitch_max_deg - self.pitch_min_deg) / self.pitch_step_deg).floor() as usize + 1
    }

    pub fn rays_per_frame(&self) -> usize {
        ((self.scan_max_deg - self.scan_min_deg) / self.scan_step_deg).floor() as usize + 1
    }

    pub fn pitch_deg(&self, frame: usize) -> f64 {
        self.pitch_min_deg + frame as f64 * self.pitch_step_deg
    }

    pub fn scan_deg(&self, ray: usize) -> f64 {
        self.scan_min_deg + ray as f64 * self.scan_step_deg
    }
}

/// One laser return. `x, y, z` are world-frame coordinates of the hit
/// (z includes the mount height); the polar fields are sensor-frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub frame: usize,
    pub ray: usize,
    pub pitch_deg: f64,
    pub scan_deg: f64,
    pub range: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cloud3D {
    pub config: SweepConfig,
    pub points: Vec<CloudPoint>,
}

/// Eq.-style polar-to-Cartesian conversion in the sensor frame.
pub fn polar_to_cartesian(
    alpha_deg: f64,
    beta_deg: f64,
    range: f64,
) -> Result<[f64; 3], ScanError> {
    if !(alpha_deg.is_finite() && beta_deg.is_finite() && range.is_finite()) {
        return Err(ScanError::NonFinite("polar_to_cartesian"));
    }
    let a = alpha_deg.to_radians();
    let b = beta_deg.to_radians();
    Ok([
        range * a.cos() * b.cos(),
        range * a.cos() * b.sin(),
        range * a.sin(),
    ])
}

/// Rigid lift of a sensor-frame point into the world frame: planar rotation
/// by the robot heading, translation to the robot position, z raised by the
/// sensor mount height.
pub fn sensor_to_world(point: [f64; 3], robot_pose: &Pose, mount_height: f64) -> [f64; 3] {
    let (s, c) = robot_pose.theta.sin_cos();
    [
        robot_pose.x + c * point[0] - s * point[1],
        robot_pose.y + s * point[0] + c * point[1],
        point[2] + mount_height,
    ]
}

/// Capture one full sweep from `pose`. Rays that hit nothing within
/// max_range are omitted, not stored as sentinels.
pub fn sweep(world: &WorldModel, pose: &Pose, cfg: &SweepConfig) -> Cloud3D {
    let mut points = Vec::with_capacity(cfg.frame_count() * cfg.rays_per_frame());
    let origin = [pose.x, pose.y, cfg.mount_height];
    let heading_deg = pose.theta.to_degrees();
    for j in 0..cfg.frame_count() {
        let alpha = cfg.pitch_deg(j);
        for k in 0..cfg.rays_per_frame() {
            let beta = cfg.scan_deg(k);
            let yaw_world = heading_deg + beta;
            if let Some(range) = crate::sim_world::cast_lrf_ray(world, origin, alpha, yaw_world) {
                if range > cfg.max_range {
                    continue;
                }
                let sensor = polar_to_cartesian(alpha, beta, range)
                    .expect("finite lattice angles and positive range");
                let [x, y, z] = sensor_to_world(sensor, pose, cfg.mount_height);
                points.push(CloudPoint {
                    frame: j,
                    ray: k,
                    pitch_deg: alpha,
                    scan_deg: beta,
                    range,
                    x,
                    y,
                    z,
                });
            }
        }
    }
    Cloud3D {
        config: *cfg,
        points,
    }
}

impl Cloud3D {
    /// Plain-text form: a version/config header, then one line per point
    /// `j k alpha_deg beta_deg range_m x y z` at 9 significant digits.
    /// Round-trips byte-exactly: write(parse(write(c))) == write(c).
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::with_capacity(64 + self.points.len() * 96);
        out.push_str(&format!(
            "# cloud3d v1 sweep {} {} {} {} {} {} {} {}\n",
            c.pitch_min_deg,
            c.pitch_max_deg,
            c.pitch_step_deg,
            c.scan_min_deg,
            c.scan_max_deg,
            c.scan_step_deg,
            c.mount_height,
            c.max_range
        ));
        for p in &self.points {
            out.push_str(&format!(
                "{} {} {:.8e} {:.8e} {:.8e} {:.8e} {:.8e} {:.8e}\n",
                p.frame, p.ray, p.pitch_deg, p.scan_deg, p.range, p.x, p.y, p.z
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Cloud3D, ScanError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(ScanError::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 12
            || fields[0] != "#"
            || fields[1] != "cloud3d"
            || fields[2] != "v1"
            || fields[3] != "sweep"
        {
            return Err(ScanError::Parse {
                line: 1,
                msg: "expected header `# cloud3d v1 sweep ...`".into(),
            });
        }
        let num = |i: usize| -> Result<f64, ScanError> {
            fields[i].parse().map_err(|_| ScanError::Parse {
                line: 1,
                msg: format!("bad header number `{}`", fields[i]),
            })
        };
        let config = SweepConfig {
            pitch_min_deg: num(4)?,
            pitch_max_deg: num(5)?,
            pitch_step_deg: num(6)?,
            scan_min_deg: num(7)?,
            scan_max_deg: num(8)?,
            scan_step_deg: num(9)?,
            mount_height: num(10)?,
            max_range: num(11)?,
        };
        let mut points = Vec::new();
        for (idx, line) in lines {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 8 {
                return Err(ScanError::Parse {
                    line: idx + 1,
                    msg: format!("expected 8 fields, got {}", f.len()),
                });
            }
            let parse_f = |s: &str| -> Result<f64, ScanError> {
                s.parse().map_err(|_| ScanError::Parse {
                    line: idx + 1,
                    msg: format!("bad number `{s}`"),
                })
            };
            let parse_u = |s: &str| -> Result<usize, ScanError> {
                s.parse().map_err(|_| ScanError::Parse {
                    line: idx + 1,
                    msg: format!("bad index `{s}`"),
                })
            };
            points.push(CloudPoint {
                frame: parse_u(f[0])?,
                ray: parse_u(f[1])?,
                pitch_deg: parse_f(f[2])?,
                scan_deg: parse_f(f[3])?,
                range: parse_f(f[4])?,
                x: parse_f(f[5])?,
                y: parse_f(f[6])?,
                z: parse_f(f[7])?,
            });
        }
        Ok(Cloud3D { config, points })
    }
}
