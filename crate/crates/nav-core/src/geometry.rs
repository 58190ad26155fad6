//! Shared planar geometry primitives: poses, segments, rectangles and angle
//! normalization. Headings are radians here; modules that talk degrees at
//! their API boundary convert themselves.

use serde::{Deserialize, Serialize};

pub const DEG: f64 = std::f64::consts::PI / 180.0;

/// Wrap an angle in radians to (-pi, pi].
pub fn wrap_rad(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w - two_pi
    } else {
        w
    }
}

/// Wrap an angle in degrees to (-180, 180].
pub fn wrap_deg(a: f64) -> f64 {
    let w = a.rem_euclid(360.0);
    if w > 180.0 {
        w - 360.0
    } else {
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Planar robot pose. `theta` is the heading in radians, not wrapped:
/// consumers wrap differences, never the stored value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }
}

/// Exact pose after driving a constant (v, omega) twist for dt: a line when
/// omega is (numerically) zero, otherwise a circular arc.
pub fn integrate_twist(p: Pose, v: f64, omega: f64, dt: f64) -> Pose {
    if omega.abs() < 1e-12 {
        Pose::new(
            p.x + v * dt * p.theta.cos(),
            p.y + v * dt * p.theta.sin(),
            p.theta + omega * dt,
        )
    } else {
        let th = p.theta + omega * dt;
        Pose::new(
            p.x + v / omega * (th.sin() - p.theta.sin()),
            p.y - v / omega * (th.cos() - p.theta.cos()),
            th,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment2 {
    pub p0: Point2,
    pub p1: Point2,
}

impl Segment2 {
    pub fn new(p0: Point2, p1: Point2) -> Self {
        Segment2 { p0, p1 }
    }

    pub fn length(&self) -> f64 {
        self.p0.dist(self.p1)
    }

    /// Closest point of the segment to `p`.
    pub fn closest_point(&self, p: Point2) -> Point2 {
        let dx = self.p1.x - self.p0.x;
        let dy = self.p1.y - self.p0.y;
        let len2 = dx * dx + dy * dy;
        if len2 == 0.0 {
            return self.p0;
        }
        let t = ((p.x - self.p0.x) * dx + (p.y - self.p0.y) * dy) / len2;
        let t = t.clamp(0.0, 1.0);
        Point2::new(self.p0.x + t * dx, self.p0.y + t * dy)
    }

    pub fn dist_to_point(&self, p: Point2) -> f64 {
        self.closest_point(p).dist(p)
    }

    /// Minimum distance between two segments (0 when they intersect).
    pub fn dist_to_segment(&self, other: &Segment2) -> f64 {
        if self.intersects(other) {
            return 0.0;
        }
        self.dist_to_point(other.p0)
            .min(self.dist_to_point(other.p1))
            .min(other.dist_to_point(self.p0))
            .min(other.dist_to_point(self.p1))
    }

    pub fn intersects(&self, other: &Segment2) -> bool {
        fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
            (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
        }
        fn on_seg(a: Point2, b: Point2, c: Point2) -> bool {
            c.x >= a.x.min(b.x) && c.x <= a.x.max(b.x) && c.y >= a.y.min(b.y) && c.y <= a.y.max(b.y)
        }
        let d1 = orient(other.p0, other.p1, self.p0);
        let d2 = orient(other.p0, other.p1, self.p1);
        let d3 = orient(self.p0, self.p1, other.p0);
        let d4 = orient(self.p0, self.p1, other.p1);
        if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
            && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
        {
            return true;
        }
        (d1 == 0.0 && on_seg(other.p0, other.p1, self.p0))
            || (d2 == 0.0 && on_seg(other.p0, other.p1, self.p1))
            || (d3 == 0.0 && on_seg(self.p0, self.p1, other.p0))
            || (d4 == 0.0 && on_seg(self.p0, self.p1, other.p1))
    }
}

/// Axis-aligned rectangle, corners inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Rect {
            x0: x0.min(x1),
            y0: y0.min(y1),
            x1: x0.max(x1),
            y1: y0.max(y1),
        }
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x0 && p.x <= self.x1 && p.y >= self.y0 && p.y <= self.y1
    }

    /// Distance from `p` to the rectangle, 0 inside.
    pub fn dist_to_point(&self, p: Point2) -> f64 {
        let dx = (self.x0 - p.x).max(0.0).max(p.x - self.x1);
        let dy = (self.y0 - p.y).max(0.0).max(p.y - self.y1);
        dx.hypot(dy)
    }

    /// True when the closed segment meets the closed rectangle.
    pub fn intersects_segment(&self, seg: &Segment2) -> bool {
        if self.contains(seg.p0) || self.contains(seg.p1) {
            return true;
        }
        let c = [
            Point2::new(self.x0, self.y0),
            Point2::new(self.x1, self.y0),
            Point2::new(self.x1, self.y1),
            Point2::new(self.x0, self.y1),
        ];
        for i in 0..4 {
            if seg.intersects(&Segment2::new(c[i], c[(i + 1) % 4])) {
                return true;
            }
        }
        false
    }
}
