//! Kinematic trajectory tracking for a differential-drive robot.
//!
//! The error frame rides on the actual robot: e1 is the along-track gap,
//! e2 the cross-track gap, e3 the heading gap wrapped to (-pi, pi]. The
//! control law
//!
//!   v = v_ref cos(e3) + k1 e1
//!   w = w_ref + k3 e3 + v_ref e2 sin(e3)/e3
//!
//! makes V = (e1^2 + e2^2 + e3^2)/2 decay with dV/dt = -k1 e1^2 - k3 e3^2;
//! the e2 route to zero runs through the coupling with e3, so its decay
//! rate is set by the reference speed, not by a gain.

use crate::geometry::{integrate_twist, wrap_rad, Pose};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotParams {
    pub wheel_radius: f64,
    pub half_axle: f64,
    pub body_diameter: f64,
    pub body_height: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        RobotParams {
            wheel_radius: 0.1,
            half_axle: 0.25,
            body_diameter: 0.8,
            body_height: 1.2,
        }
    }
}

impl RobotParams {
    pub fn body_radius(&self) -> f64 {
        self.body_diameter / 2.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingError {
    pub e1: f64,
    pub e2: f64,
    /// heading error, wrapped to (-pi, pi]
    pub e3: f64,
}

impl TrackingError {
    pub fn norm(&self) -> f64 {
        (self.e1 * self.e1 + self.e2 * self.e2 + self.e3 * self.e3).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gains {
    pub k1: f64,
    pub k3: f64,
}

impl Gains {
    pub fn new(k1: f64, k3: f64) -> Self {
        assert!(k1 > 0.0 && k3 > 0.0, "gains must be positive");
        Gains { k1, k3 }
    }

    /// Gains tuned for a given cruise speed. The lateral channel behaves
    /// like a second-order system with natural frequency v_ref; k3 = 2 v
    /// damps it critically, which is the fastest settling available.
    pub fn for_speed(v: f64) -> Self {
        Gains::new(1.0, 2.0 * v.max(0.05))
    }
}

impl Default for Gains {
    fn default() -> Self {
        Gains::for_speed(0.3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlLimits {
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for ControlLimits {
    fn default() -> Self {
        ControlLimits {
            v_max: 0.5,
            omega_max: 25.0_f64.to_radians(),
        }
    }
}

impl ControlLimits {
    pub fn saturate(&self, v: f64, omega: f64) -> (f64, f64) {
        (
            v.clamp(-self.v_max, self.v_max),
            omega.clamp(-self.omega_max, self.omega_max),
        )
    }
}

/// Wheel angular velocities (right, left) in rad/s realizing (v, omega).
pub fn wheel_speeds(v: f64, omega: f64, params: &RobotParams) -> (f64, f64) {
    (
        (v + params.half_axle * omega) / params.wheel_radius,
        (v - params.half_axle * omega) / params.wheel_radius,
    )
}

/// Reference-minus-actual pose difference rotated into the robot frame.
pub fn tracking_error(q_ref: &Pose, q: &Pose) -> TrackingError {
    let dx = q_ref.x - q.x;
    let dy = q_ref.y - q.y;
    let (s, c) = q.theta.sin_cos();
    TrackingError {
        e1: c * dx + s * dy,
        e2: -s * dx + c * dy,
        e3: wrap_rad(q_ref.theta - q.theta),
    }
}

/// sin(x)/x with the removable singularity filled by its series.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Velocity commands from the tracking error and the reference feedforward.
pub fn control(e: &TrackingError, v_ref: f64, omega_ref: f64, gains: &Gains) -> (f64, f64) {
    let v = v_ref * e.e3.cos() + gains.k1 * e.e1;
    let omega = omega_ref + gains.k3 * e.e3 + v_ref * e.e2 * sinc(e.e3);
    (v, omega)
}

pub fn lyapunov(e: &TrackingError) -> f64 {
    0.5 * (e.e1 * e.e1 + e.e2 * e.e2 + e.e3 * e.e3)
}

/// Closed-form time derivative of the Lyapunov function under the
/// unsaturated control law.
pub fn lyapunov_rate(e: &TrackingError, gains: &Gains) -> f64 {
    -gains.k1 * e.e1 * e.e1 - gains.k3 * e.e3 * e.e3
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefPoint {
    pub pose: Pose,
    pub v: f64,
    pub omega: f64,
}

/// A timed reference the closed loop can sample at arbitrary instants,
/// including the half-steps of the integrator.
pub trait Reference {
    fn at(&self, t: f64) -> RefPoint;
}

/// Analytic straight or circular reference with constant (v, omega).
#[derive(Debug, Clone, Copy)]
pub struct ConstantTwistReference {
    pub start: Pose,
    pub v: f64,
    pub omega: f64,
}

impl Reference for ConstantTwistReference {
    fn at(&self, t: f64) -> RefPoint {
        RefPoint {
            pose: integrate_twist(self.start, self.v, self.omega, t),
            v: self.v,
            omega: self.omega,
        }
    }
}

impl Reference for crate::planner::ReferenceTrajectory {
    fn at(&self, t: f64) -> RefPoint {
        let s = crate::planner::ReferenceTrajectory::at(self, t);
        RefPoint {
            pose: s.pose,
            v: s.v,
            omega: s.omega,
        }
    }
}

/// One fixed 4th-order integration step of the closed loop. Commands are
/// recomputed and saturated at every stage; the returned pair is the
/// saturated command at the step start, which is what a logger wants.
pub fn closed_loop_step(
    pose: &Pose,
    t: f64,
    dt: f64,
    reference: &dyn Reference,
    gains: &Gains,
    limits: &ControlLimits,
) -> (Pose, (f64, f64)) {
    let deriv = |tt: f64, q: &Pose| -> [f64; 3] {
        let r = reference.at(tt);
        let e = tracking_error(&r.pose, q);
        let (v, omega) = control(&e, r.v, r.omega, gains);
        let (v, omega) = limits.saturate(v, omega);
        [v * q.theta.cos(), v * q.theta.sin(), omega]
    };
    let add = |q: &Pose, k: &[f64; 3], h: f64| -> Pose {
        Pose::new(q.x + h * k[0], q.y + h * k[1], q.theta + h * k[2])
    };
    let k1 = deriv(t, pose);
    let k2 = deriv(t + dt / 2.0, &add(pose, &k1, dt / 2.0));
    let k3 = deriv(t + dt / 2.0, &add(pose, &k2, dt / 2.0));
    let k4 = deriv(t + dt, &add(pose, &k3, dt));
    let next = Pose::new(
        pose.x + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        pose.y + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        pose.theta + dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    );
    let r = reference.at(t);
    let e = tracking_error(&r.pose, pose);
    let (v, omega) = control(&e, r.v, r.omega, gains);
    (next, limits.saturate(v, omega))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingRow {
    pub t: f64,
    pub pose: Pose,
    pub ref_pose: Pose,
    pub e: TrackingError,
    pub v: f64,
    pub omega: f64,
    pub v_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingLog {
    pub rows: Vec<TrackingRow>,
}

impl TrackingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x,y,theta,x_r,y_r,theta_r,e1,e2,e3,v,omega,V_p\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}\n",
                r.t,
                r.pose.x,
                r.pose.y,
                r.pose.theta,
                r.ref_pose.x,
                r.ref_pose.y,
                r.ref_pose.theta,
                r.e.e1,
                r.e.e2,
                r.e.e3,
                r.v,
                r.omega,
                r.v_p
            ));
        }
        out
    }

    pub fn final_error(&self) -> TrackingError {
        self.rows.last().expect("log has rows").e
    }
}

/// Drive the closed loop from `start` until `t_end`, logging every step.
pub fn run_tracking(
    reference: &dyn Reference,
    start: Pose,
    gains: &Gains,
    limits: &ControlLimits,
    dt: f64,
    t_end: f64,
) -> TrackingLog {
    assert!(dt > 0.0 && t_end >= 0.0);
    let steps = (t_end / dt).round() as usize;
    let mut rows = Vec::with_capacity(steps + 1);
    let mut pose = start;
    for i in 0..=steps {
        let t = i as f64 * dt;
        let r = reference.at(t);
        let e = tracking_error(&r.pose, &pose);
        let (v, omega) = control(&e, r.v, r.omega, gains);
        let (v, omega) = limits.saturate(v, omega);
        rows.push(TrackingRow {
            t,
            pose,
            ref_pose: r.pose,
            e,
            v,
            omega,
            v_p: lyapunov(&e),
        });
        if i < steps {
            let (next, _) = closed_loop_step(&pose, t, dt, reference, gains, limits);
            pose = next;
        }
    }
    TrackingLog { rows }
}
