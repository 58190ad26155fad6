//! A 2.5D test world: vertical wall faces standing on a flat floor.
//!
//! Every obstacle is a `WallFace`, a 2D segment extruded over a z-interval.
//! That is enough to model rooms, doorway posts and overhead girders, and it
//! keeps every sensor query closed-form: the tilting rangefinder reduces to a
//! 2D ray cast plus an interval test on the hit height, the sonar cone to a
//! 1D minimization over a clipped segment. No meshes, no numeric root
//! finding, so a sweep of ten thousand rays costs microseconds and every
//! result is bit-reproducible.

pub mod engine;
pub mod scenario;

use crate::geometry::{wrap_rad, Point2, Pose, Rect, Segment2};
use serde::{Deserialize, Serialize};

/// A vertical rectangle: `seg` in the floor plane, extruded from `z_lo` up
/// to `z_hi`. Both bounds are inclusive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallFace {
    pub seg: Segment2,
    pub z_lo: f64,
    pub z_hi: f64,
}

impl WallFace {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64, z_lo: f64, z_hi: f64) -> Self {
        WallFace {
            seg: Segment2::new(Point2::new(x1, y1), Point2::new(x2, y2)),
            z_lo,
            z_hi,
        }
    }

    /// Whether a robot of the given hull height can collide with this face.
    /// Faces that start above the hull (overhead girders) never do.
    pub fn blocks(&self, body_height: f64) -> bool {
        self.z_lo < body_height && self.z_hi > 0.0
    }
}

/// Named floor rectangle used by run verification to assert that a route
/// did or did not pass through an area.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub name: String,
    pub rect: Rect,
}

#[derive(Debug, Clone, Default)]
pub struct WorldModel {
    pub faces: Vec<WallFace>,
    pub regions: Vec<Region>,
}

impl WorldModel {
    pub fn new() -> Self {
        WorldModel::default()
    }

    pub fn add_face(&mut self, face: WallFace) {
        self.faces.push(face);
    }

    /// Four faces forming the sides of an axis-aligned box footprint.
    pub fn add_box(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, z_lo: f64, z_hi: f64) {
        for f in box_faces(x0, y0, x1, y1, z_lo, z_hi) {
            self.faces.push(f);
        }
    }

    pub fn region(&self, name: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.name == name)
    }
}

pub fn box_faces(x0: f64, y0: f64, x1: f64, y1: f64, z_lo: f64, z_hi: f64) -> [WallFace; 4] {
    let (xa, xb) = (x0.min(x1), x0.max(x1));
    let (ya, yb) = (y0.min(y1), y0.max(y1));
    [
        WallFace::new(xa, ya, xb, ya, z_lo, z_hi),
        WallFace::new(xb, ya, xb, yb, z_lo, z_hi),
        WallFace::new(xb, yb, xa, yb, z_lo, z_hi),
        WallFace::new(xa, yb, xa, ya, z_lo, z_hi),
    ]
}

/// Distance along the ray from `o` in unit direction `dir` to segment `seg`,
/// or None. Endpoint grazes count as hits; a ray exactly parallel to the
/// segment does not (measure-zero alignment the scenarios avoid).
fn ray_hit_2d(o: Point2, dir: (f64, f64), seg: &Segment2) -> Option<f64> {
    let ex = seg.p1.x - seg.p0.x;
    let ey = seg.p1.y - seg.p0.y;
    let denom = dir.0 * ey - dir.1 * ex;
    if denom.abs() < 1e-15 {
        return None;
    }
    let qx = seg.p0.x - o.x;
    let qy = seg.p0.y - o.y;
    let t = (qx * ey - qy * ex) / denom;
    let u = (qx * dir.1 - qy * dir.0) / denom;
    if t >= 0.0 && (0.0..=1.0).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Distance travelled by a rangefinder beam fired from `origin` (x, y,
/// height) at `pitch_deg` above the horizon, heading `yaw_deg` in the world
/// plane. Returns the 3D range to the nearest wall face or floor hit, or
/// None for a beam that escapes. The caller applies any max-range cutoff.
///
/// The beam's floor-plane track is a 2D ray; a wall hit at planar range r
/// lies at 3D range s = r / cos(pitch) and height origin_z + s sin(pitch),
/// accepted iff that height is inside the face's closed z-interval. A
/// downward beam also hits the (infinite) floor at s = -origin_z /
/// sin(pitch).
pub fn cast_lrf_ray(
    world: &WorldModel,
    origin: [f64; 3],
    pitch_deg: f64,
    yaw_deg: f64,
) -> Option<f64> {
    let (sin_a, cos_a) = pitch_deg.to_radians().sin_cos();
    let (sin_b, cos_b) = yaw_deg.to_radians().sin_cos();
    let o2 = Point2::new(origin[0], origin[1]);
    let mut best = f64::INFINITY;
    if cos_a > 1e-12 {
        for face in &world.faces {
            if let Some(r2) = ray_hit_2d(o2, (cos_b, sin_b), &face.seg) {
                let s = r2 / cos_a;
                let z = origin[2] + s * sin_a;
                if z >= face.z_lo && z <= face.z_hi && s < best {
                    best = s;
                }
            }
        }
    }
    if sin_a < -1e-12 && origin[2] > 0.0 {
        let s = -origin[2] / sin_a;
        if s < best {
            best = s;
        }
    }
    best.is_finite().then_some(best)
}

/// Ring of 8 ultrasonic sensors, one every 45 degrees of relative bearing,
/// all mounted in one horizontal plane on the hull perimeter. Each sensor
/// reports the free range beyond the hull to the nearest reflector inside
/// its cone, with blind zones below `range_min` and beyond `range_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SonarRing {
    pub cone_half_angle_deg: f64,
    pub range_min: f64,
    pub range_max: f64,
    pub mount_height: f64,
    /// Radial distance from the robot reference point to the transducer
    /// faces; reported ranges start there, not at the center.
    pub mount_radius: f64,
}

impl Default for SonarRing {
    fn default() -> Self {
        SonarRing {
            cone_half_angle_deg: 12.5,
            range_min: 0.3,
            range_max: 4.0,
            mount_height: 0.35,
            mount_radius: 0.4,
        }
    }
}

impl SonarRing {
    /// Relative bearings of the eight sensors, forward first.
    pub fn bearings_deg() -> [f64; 8] {
        [0.0, 45.0, 90.0, 135.0, 180.0, -135.0, -90.0, -45.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SonarEcho {
    /// Nothing inside the cone out to max range.
    Clear,
    /// A reflector inside the blind zone: present but unrangeable.
    TooClose,
    Range(f64),
}

impl SonarEcho {
    pub fn range(&self) -> Option<f64> {
        match self {
            SonarEcho::Range(d) => Some(*d),
            _ => None,
        }
    }
}

/// Nearest point of `seg` inside the closed angular cone (apex `o`, center
/// direction `axis` radians, half-width `half`), as a distance from `o`.
///
/// The cone is convex for half < 90 deg, so the constrained minimum is
/// either the unconstrained nearest point of the segment (if inside the
/// cone), a segment endpoint, or a crossing of a cone boundary ray.
fn cone_distance(o: Point2, axis: f64, half: f64, seg: &Segment2) -> Option<f64> {
    let in_cone = |p: Point2| -> bool {
        let dx = p.x - o.x;
        let dy = p.y - o.y;
        if dx.hypot(dy) < 1e-12 {
            return true;
        }
        wrap_rad(dy.atan2(dx) - axis).abs() <= half + 1e-12
    };
    let mut best = f64::INFINITY;
    let cp = seg.closest_point(o);
    if in_cone(cp) {
        best = o.dist(cp);
    }
    for p in [seg.p0, seg.p1] {
        if in_cone(p) {
            best = best.min(o.dist(p));
        }
    }
    for side in [-1.0, 1.0] {
        let th = axis + side * half;
        if let Some(t) = ray_hit_2d(o, (th.cos(), th.sin()), seg) {
            best = best.min(t);
        }
    }
    best.is_finite().then_some(best)
}

/// Free range from the transducer face to the nearest reflector inside one
/// sonar cone, before any range gating. The cone apex stays at the robot
/// center; the mount radius is taken off the reported distance. Only faces
/// whose z-interval contains the mounting plane reflect; an overhead girder
/// is invisible to the ring.
pub fn cast_sonar_raw(
    world: &WorldModel,
    pose: &Pose,
    bearing_deg: f64,
    ring: &SonarRing,
) -> Option<f64> {
    let axis = pose.theta + bearing_deg.to_radians();
    let half = ring.cone_half_angle_deg.to_radians();
    let o = pose.position();
    let mut best = f64::INFINITY;
    for face in &world.faces {
        if face.z_lo <= ring.mount_height && ring.mount_height <= face.z_hi {
            if let Some(d) = cone_distance(o, axis, half, &face.seg) {
                best = best.min(d);
            }
        }
    }
    best.is_finite()
        .then_some((best - ring.mount_radius).max(0.0))
}

/// Gate a raw reflector distance through the ring's range window.
pub fn classify_echo(raw: Option<f64>, ring: &SonarRing) -> SonarEcho {
    match raw {
        None => SonarEcho::Clear,
        Some(d) if d < ring.range_min => SonarEcho::TooClose,
        Some(d) if d <= ring.range_max => SonarEcho::Range(d),
        Some(_) => SonarEcho::Clear,
    }
}

pub fn cast_sonar(
    world: &WorldModel,
    pose: &Pose,
    bearing_deg: f64,
    ring: &SonarRing,
) -> SonarEcho {
    classify_echo(cast_sonar_raw(world, pose, bearing_deg, ring), ring)
}

/// Whether a disc robot of radius `body_radius` sweeping from `from` to
/// `to` touches any face it can physically reach. Checking the swept
/// capsule rather than the endpoints means a fast step cannot tunnel
/// through a thin wall.
pub fn swept_collides(
    world: &WorldModel,
    from: Point2,
    to: Point2,
    body_radius: f64,
    body_height: f64,
) -> bool {
    let motion = Segment2::new(from, to);
    world
        .faces
        .iter()
        .any(|f| f.blocks(body_height) && f.seg.dist_to_segment(&motion) < body_radius)
}

/// Distance from a point to the nearest face the robot could collide with;
/// infinite in an empty world.
pub fn min_wall_distance(world: &WorldModel, p: Point2, body_height: f64) -> f64 {
    world
        .faces
        .iter()
        .filter(|f| f.blocks(body_height))
        .map(|f| f.seg.dist_to_point(p))
        .fold(f64::INFINITY, f64::min)
}
