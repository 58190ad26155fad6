//! 3D-to-2D map compression and boundary extraction.
//!
//! A sweep cloud collapses to one polar pixel per scan-angle bin: points
//! above the height limit or on the floor are discarded, then the minimum
//! range survives per bin, which makes the beta -> R relation monovalent.
//! The surviving pixels are clustered by a breakpoint test on consecutive
//! Cartesian gaps and each cluster is split into line segments until every
//! pixel sits within `fit_epsilon` of its segment.

use crate::geometry::{Point2, Pose, Segment2};
use crate::scan_geometry::Cloud3D;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("map parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("z_limit must be > 0, got {0}")]
    BadZLimit(f64),
}

/// One compressed 2D map pixel: scan angle and the minimum admissible range
/// seen in that angle bin. `ray` is the lattice index the bin came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPixel2D {
    pub ray: usize,
    pub beta_deg: f64,
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMap2D {
    pub segments: Vec<Segment2>,
    pub source_pose: Pose,
    pub z_limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompressConfig {
    /// Returns with |z| at or below this count as floor and are removed.
    pub floor_epsilon: f64,
    /// Height filter before min-selection (the order that keeps an overhead
    /// girder from shadowing a reachable opening). The opposite order is
    /// kept switchable for comparison.
    pub filter_before_min: bool,
}

impl Default for CompressConfig {
    fn default() -> Self {
        CompressConfig {
            floor_epsilon: 0.02,
            filter_before_min: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmentationConfig {
    /// Lower bound on the cluster breakpoint distance (m).
    pub break_distance_min: f64,
    /// Breakpoint distance scales with range: factor * R * sin(scan_step).
    pub break_range_factor: f64,
    /// Max pixel-to-segment deviation after splitting (m).
    pub fit_epsilon: f64,
    /// Nominal scan-angle step of the producing sweep (deg).
    pub scan_step_deg: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            break_distance_min: 0.10,
            break_range_factor: 2.0,
            fit_epsilon: 0.03,
            scan_step_deg: 1.0,
        }
    }
}

fn admissible(z: f64, z_limit: f64, floor_epsilon: f64) -> bool {
    z.abs() > floor_epsilon && z <= z_limit
}

/// Collapse a cloud to at most one pixel per scan-angle bin.
pub fn compress(cloud: &Cloud3D, z_limit: f64) -> Result<Vec<PolarPixel2D>, MapError> {
    compress_with(cloud, z_limit, &CompressConfig::default())
}

pub fn compress_with(
    cloud: &Cloud3D,
    z_limit: f64,
    cfg: &CompressConfig,
) -> Result<Vec<PolarPixel2D>, MapError> {
    if !(z_limit > 0.0) {
        return Err(MapError::BadZLimit(z_limit));
    }
    // bin by exact ray index: every frame shares the scan lattice, so no
    // floating-point angle comparison is needed
    let mut bins: BTreeMap<usize, PolarPixel2D> = BTreeMap::new();
    if cfg.filter_before_min {
        for p in &cloud.points {
            if !admissible(p.z, z_limit, cfg.floor_epsilon) {
                continue;
            }
            let entry = bins.entry(p.ray).or_insert(PolarPixel2D {
                ray: p.ray,
                beta_deg: p.scan_deg,
                range: p.range,
            });
            if p.range < entry.range {
                entry.range = p.range;
            }
        }
    } else {
        // comparison order: min-select first, then drop bins whose winner
        // fails the height filter
        let mut best: BTreeMap<usize, (f64, f64, f64)> = BTreeMap::new();
        for p in &cloud.points {
            let e = best.entry(p.ray).or_insert((p.range, p.z, p.scan_deg));
            if p.range < e.0 {
                *e = (p.range, p.z, p.scan_deg);
            }
        }
        for (ray, (range, z, beta_deg)) in best {
            if admissible(z, z_limit, cfg.floor_epsilon) {
                bins.insert(
                    ray,
                    PolarPixel2D {
                        ray,
                        beta_deg,
                        range,
                    },
                );
            }
        }
    }
    Ok(bins.into_values().collect())
}

/// Project a pixel into the world frame through the capture pose.
fn pixel_to_world(px: &PolarPixel2D, pose: &Pose) -> Point2 {
    let dir = pose.theta + px.beta_deg.to_radians();
    Point2::new(pose.x + px.range * dir.cos(), pose.y + px.range * dir.sin())
}

/// Cluster pixels and extract boundary line segments.
pub fn segment(pixels: &[PolarPixel2D], pose: &Pose, z_limit: f64) -> SegmentMap2D {
    segment_with(pixels, pose, z_limit, &SegmentationConfig::default())
}

pub fn segment_with(
    pixels: &[PolarPixel2D],
    pose: &Pose,
    z_limit: f64,
    cfg: &SegmentationConfig,
) -> SegmentMap2D {
    let pts: Vec<Point2> = pixels.iter().map(|px| pixel_to_world(px, pose)).collect();
    let step_sin = cfg.scan_step_deg.to_radians().sin();
    let mut segments = Vec::new();
    let mut cluster_start = 0usize;
    for i in 0..pts.len() {
        let is_last = i + 1 == pts.len();
        let breaks = if is_last {
            true
        } else {
            let gap = pts[i].dist(pts[i + 1]);
            let r = pixels[i].range.max(pixels[i + 1].range);
            gap > cfg
                .break_distance_min
                .max(cfg.break_range_factor * r * step_sin)
        };
        if breaks {
            extract_segments(&pts[cluster_start..=i], cfg.fit_epsilon, &mut segments);
            cluster_start = i + 1;
        }
    }
    segments.retain(|s| s.length() > 0.0);
    SegmentMap2D {
        segments,
        source_pose: *pose,
        z_limit,
    }
}

/// Iterative-end-point-fit on one cluster: split at the worst pixel until
/// every pixel is within eps of its chord, then re-merge adjacent chords
/// that happen to stay within eps as one.
fn extract_segments(cluster: &[Point2], eps: f64, out: &mut Vec<Segment2>) {
    if cluster.len() < 2 {
        return;
    }
    // leaf ranges as index pairs into the cluster
    let mut leaves: Vec<(usize, usize)> = Vec::new();
    split_range(cluster, 0, cluster.len() - 1, eps, &mut leaves);
    // merge pass: neighbors whose union still fits one chord
    let mut merged = true;
    while merged && leaves.len() > 1 {
        merged = false;
        let mut next: Vec<(usize, usize)> = Vec::with_capacity(leaves.len());
        let mut i = 0;
        while i < leaves.len() {
            if i + 1 < leaves.len() {
                let (a, _) = leaves[i];
                let (_, b) = leaves[i + 1];
                if fits_chord(cluster, a, b, eps) {
                    next.push((a, b));
                    i += 2;
                    merged = true;
                    continue;
                }
            }
            next.push(leaves[i]);
            i += 1;
        }
        leaves = next;
    }
    for (a, b) in leaves {
        out.push(Segment2::new(cluster[a], cluster[b]));
    }
}

fn fits_chord(pts: &[Point2], a: usize, b: usize, eps: f64) -> bool {
    let chord = Segment2::new(pts[a], pts[b]);
    pts[a..=b].iter().all(|p| chord.dist_to_point(*p) <= eps)
}

fn split_range(pts: &[Point2], a: usize, b: usize, eps: f64, out: &mut Vec<(usize, usize)>) {
    let chord = Segment2::new(pts[a], pts[b]);
    let mut worst = a;
    let mut worst_d = 0.0;
    for i in a + 1..b {
        let d = chord.dist_to_point(pts[i]);
        if d > worst_d {
            worst_d = d;
            worst = i;
        }
    }
    if worst_d <= eps {
        out.push((a, b));
        return;
    }
    split_range(pts, a, worst, eps, out);
    split_range(pts, worst, b, eps, out);
}

impl SegmentMap2D {
    /// Text form: comment header with version, capture pose and z limit,
    /// then one `x1 y1 x2 y2` line per segment at 6 decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# map2d v1\n");
        out.push_str(&format!(
            "# pose {} {} {}\n",
            self.source_pose.x, self.source_pose.y, self.source_pose.theta
        ));
        out.push_str(&format!("# z_limit {}\n", self.z_limit));
        for s in &self.segments {
            out.push_str(&format!(
                "{:.6} {:.6} {:.6} {:.6}\n",
                s.p0.x, s.p0.y, s.p1.x, s.p1.y
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<SegmentMap2D, MapError> {
        let mut seen_header = false;
        let mut pose = Pose::new(0.0, 0.0, 0.0);
        let mut z_limit = f64::INFINITY;
        let mut segments = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let f: Vec<&str> = rest.split_whitespace().collect();
                match f.first() {
                    Some(&"map2d") => seen_header = true,
                    Some(&"pose") if f.len() == 4 => {
                        let v: Result<Vec<f64>, _> = f[1..].iter().map(|s| s.parse()).collect();
                        if let Ok(v) = v {
                            pose = Pose::new(v[0], v[1], v[2]);
                        }
                    }
                    Some(&"z_limit") if f.len() == 2 => {
                        if let Ok(v) = f[1].parse() {
                            z_limit = v;
                        }
                    }
                    _ => {} // arbitrary comments tolerated
                }
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(MapError::Parse {
                    line: idx + 1,
                    msg: format!("expected `x1 y1 x2 y2`, got {} fields", f.len()),
                });
            }
            let mut v = [0.0f64; 4];
            for (slot, s) in v.iter_mut().zip(&f) {
                *slot = s.parse().map_err(|_| MapError::Parse {
                    line: idx + 1,
                    msg: format!("bad number `{s}`"),
                })?;
            }
            segments.push(Segment2::new(
                Point2::new(v[0], v[1]),
                Point2::new(v[2], v[3]),
            ));
        }
        if !seen_header {
            return Err(MapError::Parse {
                line: 1,
                msg: "missing `# map2d v1` header".into(),
            });
        }
        Ok(SegmentMap2D {
            segments,
            source_pose: pose,
            z_limit,
        })
    }
}
