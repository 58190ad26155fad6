//! Occupancy grid over a segment map.
//!
//! Cells are squares of side `cellsize` anchored at (x_min, y_min); world to
//! grid is x_G = (x_L - x_min)/cellsize. Rasterization is supercover: a cell
//! is Occupied when the closed segment touches its closed square, including
//! corner contacts, so the continuous wall is a subset of the marked cells.
//! Dilation grows Occupied cells by a Chebyshev radius into Dilated cells;
//! the planner treats both as blocked while renderers can tell them apart.

use crate::geometry::{Point2, Rect, Segment2};
use crate::ipabd::SegmentMap2D;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("cellsize must be > 0, got {0}")]
    BadCellsize(f64),
    #[error("segment {index} ({x1} {y1})-({x2} {y2}) lies outside the grid bounds")]
    SegmentOutOfBounds {
        index: usize,
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
    },
    #[error("grid parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Free,
    Occupied,
    Dilated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    pub cellsize: f64,
    pub x_min: f64,
    pub y_min: f64,
    pub width: usize,
    pub height: usize,
    cells: Vec<Cell>,
}

impl OccupancyGrid {
    pub fn new_free(cellsize: f64, x_min: f64, y_min: f64, width: usize, height: usize) -> Self {
        OccupancyGrid {
            cellsize,
            x_min,
            y_min,
            width,
            height,
            cells: vec![Cell::Free; width * height],
        }
    }

    pub fn cell(&self, ix: usize, iy: usize) -> Cell {
        self.cells[iy * self.width + ix]
    }

    pub fn set_cell(&mut self, ix: usize, iy: usize, c: Cell) {
        self.cells[iy * self.width + ix] = c;
    }

    pub fn is_free(&self, ix: usize, iy: usize) -> bool {
        self.cell(ix, iy) == Cell::Free
    }

    /// Floor-quantized grid coordinates; may fall outside [0, width/height).
    pub fn world_to_grid(&self, p: Point2) -> (i64, i64) {
        (
            ((p.x - self.x_min) / self.cellsize).floor() as i64,
            ((p.y - self.y_min) / self.cellsize).floor() as i64,
        )
    }

    /// Center of a cell in world coordinates.
    pub fn grid_to_world(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new(
            self.x_min + (ix as f64 + 0.5) * self.cellsize,
            self.y_min + (iy as f64 + 0.5) * self.cellsize,
        )
    }

    pub fn in_bounds(&self, ix: i64, iy: i64) -> bool {
        ix >= 0 && iy >= 0 && (ix as usize) < self.width && (iy as usize) < self.height
    }

    pub fn occupied_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == Cell::Occupied).count()
    }

    /// Portable text raster: `cellsize x_min y_min width height` header,
    /// then rows from the top (max y) down, one char per cell: . # +
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} {} {} {} {}\n",
            self.cellsize, self.x_min, self.y_min, self.width, self.height
        );
        for iy in (0..self.height).rev() {
            for ix in 0..self.width {
                out.push(match self.cell(ix, iy) {
                    Cell::Free => '.',
                    Cell::Occupied => '#',
                    Cell::Dilated => '+',
                });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<OccupancyGrid, GridError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or(GridError::Parse {
            line: 1,
            msg: "empty input".into(),
        })?;
        let f: Vec<&str> = header.split_whitespace().collect();
        if f.len() != 5 {
            return Err(GridError::Parse {
                line: 1,
                msg: "expected `cellsize x_min y_min width height`".into(),
            });
        }
        let parse = |s: &str, line: usize| -> Result<f64, GridError> {
            s.parse().map_err(|_| GridError::Parse {
                line,
                msg: format!("bad number `{s}`"),
            })
        };
        let cellsize = parse(f[0], 1)?;
        let x_min = parse(f[1], 1)?;
        let y_min = parse(f[2], 1)?;
        let width = parse(f[3], 1)? as usize;
        let height = parse(f[4], 1)? as usize;
        let mut grid = OccupancyGrid::new_free(cellsize, x_min, y_min, width, height);
        for (row, line) in lines.enumerate() {
            if row >= height {
                break;
            }
            let iy = height - 1 - row;
            if line.chars().count() != width {
                return Err(GridError::Parse {
                    line: row + 2,
                    msg: format!("expected {} cells, got {}", width, line.chars().count()),
                });
            }
            for (ix, ch) in line.chars().enumerate() {
                let cell = match ch {
                    '.' => Cell::Free,
                    '#' => Cell::Occupied,
                    '+' => Cell::Dilated,
                    other => {
                        return Err(GridError::Parse {
                            line: row + 2,
                            msg: format!("bad cell char `{other}`"),
                        })
                    }
                };
                grid.set_cell(ix, iy, cell);
            }
        }
        Ok(grid)
    }
}

/// All cells the closed segment touches, in grid units where cell (i,j)
/// spans [i, i+1] x [j, j+1]. Corner and edge contacts include every cell
/// sharing the touched point.
fn supercover_units(p0: (f64, f64), p1: (f64, f64)) -> Vec<(i64, i64)> {
    use std::collections::BTreeSet;
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let dx = x1 - x0;
    let dy = y1 - y0;

    let mut ts: Vec<f64> = vec![0.0, 1.0];
    if dx != 0.0 {
        let (lo, hi) = if x0 < x1 { (x0, x1) } else { (x1, x0) };
        let mut k = lo.ceil();
        while k <= hi {
            ts.push((k - x0) / dx);
            k += 1.0;
        }
    }
    if dy != 0.0 {
        let (lo, hi) = if y0 < y1 { (y0, y1) } else { (y1, y0) };
        let mut k = lo.ceil();
        while k <= hi {
            ts.push((k - y0) / dy);
            k += 1.0;
        }
    }
    ts.retain(|t| (0.0..=1.0).contains(t));
    ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();

    let mut cells: BTreeSet<(i64, i64)> = BTreeSet::new();
    let sides = |v: f64| -> [Option<i64>; 2] {
        // A coordinate on a grid line touches the cells on both sides. The
        // snap tolerance absorbs the rounding of the world-to-grid-unit
        // transform, so a wall passing through a lattice corner still fans
        // out to all four incident cells (conservative direction: an extra
        // cell a hair's width away may mark occupied, never the reverse).
        let r = v.round();
        if (v - r).abs() < 1e-9 {
            [Some(r as i64 - 1), Some(r as i64)]
        } else {
            [Some(v.floor() as i64), None]
        }
    };
    let mut touch = |x: f64, y: f64| {
        for ox in sides(x).into_iter().flatten() {
            for oy in sides(y).into_iter().flatten() {
                cells.insert((ox, oy));
            }
        }
    };
    for i in 0..ts.len() {
        let t = ts[i];
        touch(x0 + t * dx, y0 + t * dy);
        if i + 1 < ts.len() {
            let tm = 0.5 * (t + ts[i + 1]);
            touch(x0 + tm * dx, y0 + tm * dy);
        }
    }
    cells.into_iter().collect()
}

/// Rasterize every segment of the map as Occupied supercover cells.
pub fn rasterize(
    map: &SegmentMap2D,
    cellsize: f64,
    bounds: Rect,
) -> Result<OccupancyGrid, GridError> {
    if !(cellsize > 0.0) {
        return Err(GridError::BadCellsize(cellsize));
    }
    let width = ((bounds.x1 - bounds.x0) / cellsize).ceil() as usize;
    let height = ((bounds.y1 - bounds.y0) / cellsize).ceil() as usize;
    let mut grid = OccupancyGrid::new_free(cellsize, bounds.x0, bounds.y0, width, height);
    for (index, seg) in map.segments.iter().enumerate() {
        if !bounds.contains(seg.p0) || !bounds.contains(seg.p1) {
            return Err(GridError::SegmentOutOfBounds {
                index,
                x1: seg.p0.x,
                y1: seg.p0.y,
                x2: seg.p1.x,
                y2: seg.p1.y,
            });
        }
        let g0 = (
            (seg.p0.x - bounds.x0) / cellsize,
            (seg.p0.y - bounds.y0) / cellsize,
        );
        let g1 = (
            (seg.p1.x - bounds.x0) / cellsize,
            (seg.p1.y - bounds.y0) / cellsize,
        );
        for (ix, iy) in supercover_units(g0, g1) {
            if grid.in_bounds(ix, iy) {
                grid.set_cell(ix as usize, iy as usize, Cell::Occupied);
            }
        }
    }
    Ok(grid)
}

/// Chebyshev dilation: every Free cell within `radius` of an Occupied cell
/// becomes Dilated; Occupied cells stay Occupied.
pub fn dilate(grid: &OccupancyGrid, radius: usize) -> OccupancyGrid {
    let mut out = grid.clone();
    if radius == 0 {
        return out;
    }
    let r = radius as i64;
    for iy in 0..grid.height {
        for ix in 0..grid.width {
            if grid.cell(ix, iy) != Cell::Occupied {
                continue;
            }
            for oy in -r..=r {
                for ox in -r..=r {
                    let (nx, ny) = (ix as i64 + ox, iy as i64 + oy);
                    if grid.in_bounds(nx, ny) && out.cell(nx as usize, ny as usize) == Cell::Free {
                        out.set_cell(nx as usize, ny as usize, Cell::Dilated);
                    }
                }
            }
        }
    }
    out
}

/// Cut a segment map down to the parts inside `bounds` (walls beyond the
/// planning area are legal in a scenario but rasterize() refuses them).
pub fn clip_map_to_bounds(map: &SegmentMap2D, bounds: Rect) -> SegmentMap2D {
    let mut segments = Vec::with_capacity(map.segments.len());
    for seg in &map.segments {
        if let Some(part) = clip_segment(seg, bounds) {
            segments.push(part);
        }
    }
    SegmentMap2D {
        segments,
        source_pose: map.source_pose,
        z_limit: map.z_limit,
    }
}

fn clip_segment(seg: &Segment2, r: Rect) -> Option<Segment2> {
    // Liang-Barsky with closed bounds
    let (dx, dy) = (seg.p1.x - seg.p0.x, seg.p1.y - seg.p0.y);
    let mut t0 = 0.0f64;
    let mut t1 = 1.0f64;
    for (p, q) in [
        (-dx, seg.p0.x - r.x0),
        (dx, r.x1 - seg.p0.x),
        (-dy, seg.p0.y - r.y0),
        (dy, r.y1 - seg.p0.y),
    ] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let t = q / p;
            if p < 0.0 {
                t0 = t0.max(t);
            } else {
                t1 = t1.min(t);
            }
        }
    }
    if t0 > t1 {
        return None;
    }
    let a = Point2::new(seg.p0.x + t0 * dx, seg.p0.y + t0 * dy);
    let b = Point2::new(seg.p0.x + t1 * dx, seg.p0.y + t1 * dy);
    if a.dist(b) == 0.0 {
        return None;
    }
    Some(Segment2::new(a, b))
}
