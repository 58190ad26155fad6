//! Histogram-based local obstacle avoidance fed by sonar rings.
//!
//! Each cycle rebuilds a small robot-centered net chart from the sonar
//! echoes, folds it into a 72-sector polar density histogram, finds wide
//! low-density slots, and steers for the best slot near the target bearing.
//! When every slot lies more than 100 degrees off the heading the robot
//! rotates in place toward the target side and looks again.
//!
//! All angles in this module are degrees; the simulator converts at its
//! boundary. All bearings are world bearings, not robot-relative.

use crate::geometry::{wrap_deg, Point2, Pose};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VfhConfig {
    pub netchart_cellsize: f64,
    /// chart is (2*half_extent+1)^2 cells, robot in the center cell
    pub netchart_half_extent: usize,
    pub sector_width_deg: f64,
    pub range_min: f64,
    pub range_max: f64,
    /// sonar ranges start at the transducer faces, this far out from the
    /// robot reference point; reflections reconstruct that much further
    pub range_offset: f64,
    /// a lone flank cell at this distance defines the blocking threshold
    pub threshold_range: f64,
    /// angular width the robot body needs to fit through
    pub clearance_deg: f64,
    /// slots steering further than this from the heading are not taken
    pub heading_window_deg: f64,
    pub rotate_angle_deg: f64,
}

impl Default for VfhConfig {
    fn default() -> Self {
        VfhConfig {
            netchart_cellsize: 0.1,
            netchart_half_extent: 40,
            sector_width_deg: 5.0,
            range_min: 0.3,
            range_max: 4.0,
            range_offset: 0.4,
            threshold_range: 1.5,
            clearance_deg: 35.0,
            heading_window_deg: 100.0,
            rotate_angle_deg: 100.0,
        }
    }
}

impl VfhConfig {
    pub fn sectors(&self) -> usize {
        (360.0 / self.sector_width_deg).round() as usize
    }

    /// Density falls linearly from range_min to zero at range_max.
    fn falloff(&self) -> (f64, f64) {
        let b = 1.0 / (self.range_max - self.range_min);
        (self.range_max * b, b)
    }

    pub fn threshold(&self) -> f64 {
        let (a, b) = self.falloff();
        4.0 * (a - b * self.threshold_range)
    }

    fn min_slot_sectors(&self) -> usize {
        (self.clearance_deg / self.sector_width_deg).ceil() as usize
    }
}

/// Robot-centered, world-axis-aligned obstacle evidence grid. A reflection
/// point scores 3 in its cell and 2 in the two cells beside it across the
/// beam; everything else is 0. Rebuilt from scratch every cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct NetChart {
    pub center: Point2,
    pub cellsize: f64,
    pub half_extent: usize,
    values: Vec<u8>,
}

impl NetChart {
    pub fn blank(cfg: &VfhConfig, center: Point2) -> Self {
        let side = 2 * cfg.netchart_half_extent + 1;
        NetChart {
            center,
            cellsize: cfg.netchart_cellsize,
            half_extent: cfg.netchart_half_extent,
            values: vec![0; side * side],
        }
    }

    pub fn side(&self) -> usize {
        2 * self.half_extent + 1
    }

    pub fn value(&self, ix: usize, iy: usize) -> u8 {
        self.values[iy * self.side() + ix]
    }

    fn raise(&mut self, rel_x: f64, rel_y: f64, value: u8) {
        let ix = (rel_x / self.cellsize).round() as i64 + self.half_extent as i64;
        let iy = (rel_y / self.cellsize).round() as i64 + self.half_extent as i64;
        let side = self.side() as i64;
        if ix < 0 || iy < 0 || ix >= side || iy >= side {
            return;
        }
        let slot = &mut self.values[iy as usize * side as usize + ix as usize];
        *slot = (*slot).max(value);
    }

    /// Cell center in coordinates relative to the robot.
    pub fn cell_offset(&self, ix: usize, iy: usize) -> (f64, f64) {
        (
            (ix as i64 - self.half_extent as i64) as f64 * self.cellsize,
            (iy as i64 - self.half_extent as i64) as f64 * self.cellsize,
        )
    }
}

/// Rebuild the chart from one cycle of readings. Each reading is a world
/// bearing (deg) and a range (m); ranges outside [range_min, range_max]
/// carry no usable reflection and are dropped.
pub fn update_netchart(
    chart: &NetChart,
    readings: &[(f64, f64)],
    pose: &Pose,
    cfg: &VfhConfig,
) -> NetChart {
    let mut next = NetChart::blank(cfg, Point2::new(pose.x, pose.y));
    for &(bearing_deg, range) in readings {
        if !(cfg.range_min..=cfg.range_max).contains(&range) {
            continue;
        }
        let (s, c) = (bearing_deg * crate::geometry::DEG).sin_cos();
        let r = range + cfg.range_offset;
        let (hx, hy) = (r * c, r * s);
        next.raise(hx, hy, 3);
        // sonar spreads sideways: flag the cells across the beam too
        let (px, py) = (-s * next.cellsize, c * next.cellsize);
        next.raise(hx + px, hy + py, 2);
        next.raise(hx - px, hy - py, 2);
    }
    let _ = chart;
    next
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarHistogram {
    pub sector_width_deg: f64,
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
}

impl PolarHistogram {
    pub fn zeros(cfg: &VfhConfig) -> Self {
        PolarHistogram {
            sector_width_deg: cfg.sector_width_deg,
            raw: vec![0.0; cfg.sectors()],
            smoothed: vec![0.0; cfg.sectors()],
        }
    }

    /// Sector k is centered on bearing k * width, so a symmetric scene maps
    /// to symmetric sectors instead of biasing toward the next sector up.
    pub fn sector_of(&self, bearing_deg: f64) -> usize {
        let n = self.raw.len();
        ((bearing_deg.rem_euclid(360.0) / self.sector_width_deg).round() as usize) % n
    }

    fn smooth(&mut self) {
        let n = self.raw.len();
        for k in 0..n {
            let mut acc = 0.0;
            for (off, w) in [(-2i64, 1.0), (-1, 2.0), (0, 3.0), (1, 2.0), (2, 1.0)] {
                acc += w * self.raw[(k as i64 + off).rem_euclid(n as i64) as usize];
            }
            self.smoothed[k] = acc / 5.0;
        }
    }
}

/// Fold the chart into per-sector obstacle densities. A cell of value c at
/// distance d contributes c^2 (a - b d), clamped at zero, to the sector of
/// its bearing; the result is smoothed over two sectors each side.
pub fn build_histogram(chart: &NetChart, cfg: &VfhConfig) -> PolarHistogram {
    let mut hist = PolarHistogram::zeros(cfg);
    let (a, b) = cfg.falloff();
    for iy in 0..chart.side() {
        for ix in 0..chart.side() {
            let c = chart.value(ix, iy);
            if c == 0 {
                continue;
            }
            let (dx, dy) = chart.cell_offset(ix, iy);
            let d = dx.hypot(dy);
            let m = (c as f64) * (c as f64) * (a - b * d).max(0.0);
            if m > 0.0 {
                let bearing = dy.atan2(dx) / crate::geometry::DEG;
                let k = hist.sector_of(bearing);
                hist.raw[k] += m;
            }
        }
    }
    hist.smooth();
    hist
}

/// A run of below-threshold sectors wide enough to drive through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slot {
    pub start: usize,
    pub len: usize,
    /// candidate steering direction, world bearing deg in (-180, 180]
    pub theta_d: f64,
}

/// Maximal circular runs of free sectors, widths below the body clearance
/// dropped, each with its candidate direction for target bearing theta_t.
pub fn find_slots(hist: &PolarHistogram, theta_t_deg: f64, cfg: &VfhConfig) -> Vec<Slot> {
    let n = hist.smoothed.len();
    let tau = cfg.threshold();
    let free: Vec<bool> = hist.smoothed.iter().map(|h| *h < tau).collect();

    if free.iter().all(|f| *f) {
        // nothing in range: one full-circle slot pointing at the target
        return vec![Slot {
            start: 0,
            len: n,
            theta_d: wrap_deg(theta_t_deg),
        }];
    }

    let mut slots = Vec::new();
    let anchor = free.iter().position(|f| !*f).unwrap();
    let mut k = 0;
    while k < n {
        let i = (anchor + k) % n;
        if !free[i] {
            k += 1;
            continue;
        }
        let start = i;
        let mut len = 0;
        while k < n && free[(anchor + k) % n] {
            len += 1;
            k += 1;
        }
        if len >= cfg.min_slot_sectors() {
            slots.push(Slot {
                start,
                len,
                theta_d: candidate_direction(start, len, theta_t_deg, cfg),
            });
        }
    }
    slots.sort_by_key(|s| s.start);
    slots
}

fn candidate_direction(start: usize, len: usize, theta_t_deg: f64, cfg: &VfhConfig) -> f64 {
    let w = cfg.sector_width_deg;
    // sectors are center-aligned: the run covers start*w - w/2 onward
    let lo = start as f64 * w - w / 2.0;
    let hi = lo + len as f64 * w;
    let span = len as f64 * w;
    if span <= 90.0 {
        return wrap_deg((lo + hi) / 2.0);
    }
    // wide slot: take the target bearing when it fits with clearance to
    // both edges, otherwise hug the edge nearest the target
    let margin = cfg.clearance_deg / 2.0;
    let mut t = theta_t_deg.rem_euclid(360.0);
    if t < lo {
        t += 360.0;
    }
    if t >= lo + margin && t <= hi - margin {
        return wrap_deg(t);
    }
    let near_lo = lo + margin;
    let near_hi = hi - margin;
    if wrap_deg(near_lo - theta_t_deg).abs() <= wrap_deg(near_hi - theta_t_deg).abs() {
        wrap_deg(near_lo)
    } else {
        wrap_deg(near_hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Case {
    /// target is roughly ahead: steer for the slot nearest the target
    AlignTarget,
    /// target is behind: steer for the slot nearest the current heading
    AlignHeading,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SteeringDecision {
    Steer { theta_d: f64, case: Case },
    Rotate { left: bool },
}

/// Pick a direction from the histogram, the heading and the target bearing.
/// Slots steering more than heading_window_deg away are out of reach this
/// cycle; with none in reach the verdict is a rotation toward the target
/// side, re-examined every cycle by the caller.
pub fn select_direction(
    hist: &PolarHistogram,
    theta_deg: f64,
    theta_t_deg: f64,
    cfg: &VfhConfig,
) -> SteeringDecision {
    let slots = find_slots(hist, theta_t_deg, cfg);
    select_from_slots(&slots, theta_deg, theta_t_deg, cfg)
}

pub fn select_from_slots(
    slots: &[Slot],
    theta_deg: f64,
    theta_t_deg: f64,
    cfg: &VfhConfig,
) -> SteeringDecision {
    let reachable: Vec<&Slot> = slots
        .iter()
        .filter(|s| wrap_deg(theta_deg - s.theta_d).abs() < cfg.heading_window_deg)
        .collect();
    if reachable.is_empty() {
        return SteeringDecision::Rotate {
            left: wrap_deg(theta_t_deg - theta_deg) > 0.0,
        };
    }
    let case = if wrap_deg(theta_deg - theta_t_deg).abs() < 90.0 {
        Case::AlignTarget
    } else {
        Case::AlignHeading
    };
    let anchor = match case {
        Case::AlignTarget => theta_t_deg,
        Case::AlignHeading => theta_deg,
    };
    let best = reachable
        .into_iter()
        .min_by(|a, b| {
            let da = wrap_deg(a.theta_d - anchor).abs();
            let db = wrap_deg(b.theta_d - anchor).abs();
            da.partial_cmp(&db).unwrap().then(a.start.cmp(&b.start))
        })
        .unwrap();
    SteeringDecision::Steer {
        theta_d: best.theta_d,
        case,
    }
}

/// Turn-rate command in deg/s: proportional with gain 10, clamped to 25.
pub fn angular_command(theta_d_deg: f64, theta_deg: f64) -> f64 {
    (10.0 * wrap_deg(theta_d_deg - theta_deg)).clamp(-25.0, 25.0)
}

/// Forward speed from the clearance ahead and the turn rate: full 0.5 m/s
/// when 0.5 m or more of headroom, a linear ramp hitting zero at 0.4 m,
/// and 2.5 times slower while turning at 10 deg/s or more.
pub fn speed_command(d30: f64, omega_deg: f64) -> f64 {
    let base = if d30 >= 0.5 {
        0.5
    } else {
        (5.0 * (d30 - 0.4)).max(0.0)
    };
    if omega_deg.abs() >= 10.0 {
        base / 2.5
    } else {
        base
    }
}

/// Nearest reading within 30 degrees of the heading; infinity when clear.
/// Readings are (bearing relative to heading in deg, range in m).
pub fn d30_from_readings(readings: &[(f64, f64)]) -> f64 {
    readings
        .iter()
        .filter(|(b, _)| wrap_deg(*b).abs() <= 30.0)
        .map(|(_, r)| *r)
        .fold(f64::INFINITY, f64::min)
}

/// Everything one cycle produced, kept for logs and tests.
#[derive(Debug, Clone, PartialEq)]
pub struct AvoidCycle {
    pub decision: SteeringDecision,
    pub omega_deg: f64,
    pub v: f64,
    pub d30: f64,
    pub slots: Vec<Slot>,
    pub histogram: PolarHistogram,
}

impl AvoidCycle {
    /// One-line debug record for the run log.
    pub fn record_line(&self, t: f64) -> String {
        let case = match self.decision {
            SteeringDecision::Steer {
                case: Case::AlignTarget,
                ..
            } => "align_target",
            SteeringDecision::Steer {
                case: Case::AlignHeading,
                ..
            } => "align_heading",
            SteeringDecision::Rotate { left: true } => "rotate_left",
            SteeringDecision::Rotate { left: false } => "rotate_right",
        };
        let theta_d = match self.decision {
            SteeringDecision::Steer { theta_d, .. } => format!("{theta_d:.2}"),
            SteeringDecision::Rotate { .. } => "-".to_string(),
        };
        let slots: Vec<String> = self
            .slots
            .iter()
            .map(|s| format!("{}:{}", s.start, s.len))
            .collect();
        let hist: Vec<String> = self
            .histogram
            .smoothed
            .iter()
            .map(|h| format!("{h:.3}"))
            .collect();
        format!(
            "t={:.2} case={} theta_d={} omega={:.2} v={:.3} d30={:.3} slots={} h={}",
            t,
            case,
            theta_d,
            self.omega_deg,
            self.v,
            self.d30,
            slots.join(";"),
            hist.join(",")
        )
    }
}

/// Cross-cycle avoider: remembers the rotation in progress and the steering
/// direction it has committed to.
#[derive(Debug, Clone)]
pub struct Avoider {
    pub cfg: VfhConfig,
    rotation_target_deg: Option<f64>,
    steer_hold_deg: Option<f64>,
}

impl Avoider {
    pub fn new(cfg: VfhConfig) -> Self {
        Avoider {
            cfg,
            rotation_target_deg: None,
            steer_hold_deg: None,
        }
    }

    /// One decision cycle. Readings are (world bearing deg, range m) pairs
    /// of valid echoes; d30 is supplied by the caller because it also
    /// covers readings below the chart's minimum range.
    pub fn decide(
        &mut self,
        readings: &[(f64, f64)],
        pose: &Pose,
        target: Point2,
        d30: f64,
    ) -> AvoidCycle {
        let theta_deg = pose.theta / crate::geometry::DEG;
        let theta_t_deg = (target.y - pose.y).atan2(target.x - pose.x) / crate::geometry::DEG;
        let chart = NetChart::blank(&self.cfg, Point2::new(pose.x, pose.y));
        let chart = update_netchart(&chart, readings, pose, &self.cfg);
        let histogram = build_histogram(&chart, &self.cfg);
        let slots = find_slots(&histogram, theta_t_deg, &self.cfg);
        let fresh = select_from_slots(&slots, theta_deg, theta_t_deg, &self.cfg);

        // An obstacle dead ahead offers two near-symmetric escapes, and sensor
        // quantization can flip the preferred one every cycle, parking the
        // robot in front of it. Commit: while the committed direction still
        // lies inside a reachable slot and the direct route to the target is
        // closed, keep steering for it instead of re-picking.
        let decision = match fresh {
            SteeringDecision::Steer { theta_d, case } => {
                let direct = wrap_deg(theta_d - theta_t_deg).abs() < 1e-6;
                let held = if direct {
                    None
                } else {
                    self.steer_hold_deg
                        .and_then(|prev| hold_direction(prev, &slots, theta_deg, &self.cfg))
                };
                let theta_d = held.unwrap_or(theta_d);
                self.steer_hold_deg = Some(theta_d);
                SteeringDecision::Steer { theta_d, case }
            }
            SteeringDecision::Rotate { .. } => {
                self.steer_hold_deg = None;
                fresh
            }
        };

        let (omega_deg, v) = match decision {
            SteeringDecision::Steer { theta_d, .. } => {
                self.rotation_target_deg = None;
                let omega = angular_command(theta_d, theta_deg);
                (omega, speed_command(d30, omega))
            }
            SteeringDecision::Rotate { left } => {
                let target_deg = match self.rotation_target_deg {
                    Some(t) if wrap_deg(t - theta_deg).abs() > 2.0 => t,
                    // fresh rotation, or the previous one finished without
                    // a slot appearing: swing another full angle
                    _ => {
                        let sign = if left { 1.0 } else { -1.0 };
                        theta_deg + sign * self.cfg.rotate_angle_deg
                    }
                };
                self.rotation_target_deg = Some(target_deg);
                (angular_command(target_deg, theta_deg), 0.0)
            }
        };
        AvoidCycle {
            decision,
            omega_deg,
            v,
            d30,
            slots,
            histogram,
        }
    }

    pub fn reset(&mut self) {
        self.rotation_target_deg = None;
        self.steer_hold_deg = None;
    }
}

/// The committed direction nudged inside `slots` if one still offers it with
/// body clearance and within the heading window; None when it has closed.
fn hold_direction(prev_deg: f64, slots: &[Slot], theta_deg: f64, cfg: &VfhConfig) -> Option<f64> {
    let w = cfg.sector_width_deg;
    for s in slots {
        let lo = s.start as f64 * w - w / 2.0;
        let hi = lo + s.len as f64 * w;
        let mut p = prev_deg.rem_euclid(360.0);
        if p < lo {
            p += 360.0;
        }
        if p > hi {
            p -= 360.0;
            if p < lo {
                continue;
            }
        }
        let half = (cfg.clearance_deg / 2.0).min((hi - lo) / 2.0);
        let kept = wrap_deg(p.clamp(lo + half, hi - half));
        if wrap_deg(theta_deg - kept).abs() < cfg.heading_window_deg {
            return Some(kept);
        }
    }
    None
}
