//! SVG renderers for the pipeline artifacts. Text-only output with fixed
//! numeric formatting, so identical inputs always produce identical bytes.

use nav_core::gridmap::Cell;
use nav_core::ipabd::SegmentMap2D;
use nav_core::sim_world::engine::Mode;
use nav_core::sim_world::WorldModel;
use nav_core::{OccupancyGrid, Point2, RunLog};

const SCALE: f64 = 60.0; // px per meter
const MARGIN: f64 = 20.0;

pub struct Canvas {
    x_min: f64,
    y_max: f64,
    width: f64,
    height: f64,
    body: String,
}

/// Running bounding box over everything a plot will draw.
#[derive(Debug, Clone, Copy)]
pub struct Bounds {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn empty() -> Bounds {
        Bounds {
            x_min: f64::INFINITY,
            y_min: f64::INFINITY,
            x_max: f64::NEG_INFINITY,
            y_max: f64::NEG_INFINITY,
        }
    }

    pub fn add(&mut self, x: f64, y: f64) {
        self.x_min = self.x_min.min(x);
        self.y_min = self.y_min.min(y);
        self.x_max = self.x_max.max(x);
        self.y_max = self.y_max.max(y);
    }

    fn valid(&self) -> bool {
        self.x_min.is_finite() && self.x_min <= self.x_max && self.y_min <= self.y_max
    }
}

impl Canvas {
    pub fn new(mut b: Bounds) -> Canvas {
        if !b.valid() {
            b = Bounds {
                x_min: 0.0,
                y_min: 0.0,
                x_max: 1.0,
                y_max: 1.0,
            };
        }
        Canvas {
            x_min: b.x_min,
            y_max: b.y_max,
            width: (b.x_max - b.x_min).max(0.1) * SCALE + 2.0 * MARGIN,
            height: (b.y_max - b.y_min).max(0.1) * SCALE + 2.0 * MARGIN,
            body: String::new(),
        }
    }

    /// World to pixel; the y axis flips so +y points up on screen.
    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.x_min) * SCALE + MARGIN,
            (self.y_max - y) * SCALE + MARGIN,
        )
    }

    pub fn line(&mut self, a: (f64, f64), b: (f64, f64), stroke: &str, width: f64) {
        let (x1, y1) = self.px(a.0, a.1);
        let (x2, y2) = self.px(b.0, b.1);
        self.body.push_str(&format!(
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" stroke=\"{stroke}\" stroke-width=\"{width:.2}\"/>\n"
        ));
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], stroke: &str, width: f64) {
        if pts.len() < 2 {
            return;
        }
        let mut s = String::new();
        for &(x, y) in pts {
            let (px, py) = self.px(x, y);
            s.push_str(&format!("{px:.2},{py:.2} "));
        }
        self.body.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"{width:.2}\"/>\n",
            s.trim_end()
        ));
    }

    pub fn rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64, fill: &str) {
        let (px, py) = self.px(x0, y1); // top-left after the flip
        let w = (x1 - x0) * SCALE;
        let h = (y1 - y0) * SCALE;
        self.body.push_str(&format!(
            "<rect x=\"{px:.2}\" y=\"{py:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{fill}\"/>\n"
        ));
    }

    pub fn circle(&mut self, x: f64, y: f64, r_px: f64, fill: &str) {
        let (px, py) = self.px(x, y);
        self.body.push_str(&format!(
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"{r_px:.2}\" fill=\"{fill}\"/>\n"
        ));
    }

    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\" viewBox=\"0 0 {:.0} {:.0}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{}</svg>\n",
            self.width, self.height, self.width, self.height, self.body
        )
    }
}

fn wall_lines(canvas: &mut Canvas, world: &WorldModel) {
    for f in &world.faces {
        canvas.line(
            (f.seg.p0.x, f.seg.p0.y),
            (f.seg.p1.x, f.seg.p1.y),
            "#444444",
            2.0,
        );
    }
}

fn world_bounds(b: &mut Bounds, world: &WorldModel) {
    for f in &world.faces {
        b.add(f.seg.p0.x, f.seg.p0.y);
        b.add(f.seg.p1.x, f.seg.p1.y);
    }
}

pub fn plot_map2d(map: &SegmentMap2D) -> String {
    let mut b = Bounds::empty();
    for s in &map.segments {
        b.add(s.p0.x, s.p0.y);
        b.add(s.p1.x, s.p1.y);
    }
    b.add(map.source_pose.x, map.source_pose.y);
    let mut c = Canvas::new(b);
    for s in &map.segments {
        c.line((s.p0.x, s.p0.y), (s.p1.x, s.p1.y), "#1050c0", 2.0);
    }
    c.circle(map.source_pose.x, map.source_pose.y, 5.0, "#d02020");
    c.finish()
}

pub fn plot_grid(grid: &OccupancyGrid) -> String {
    let mut b = Bounds::empty();
    b.add(grid.x_min, grid.y_min);
    b.add(
        grid.x_min + grid.width as f64 * grid.cellsize,
        grid.y_min + grid.height as f64 * grid.cellsize,
    );
    let mut c = Canvas::new(b);
    grid_cells(&mut c, grid);
    c.finish()
}

fn grid_cells(c: &mut Canvas, grid: &OccupancyGrid) {
    for iy in 0..grid.height {
        for ix in 0..grid.width {
            let fill = match grid.cell(ix, iy) {
                Cell::Free => continue,
                Cell::Occupied => "#202020",
                Cell::Dilated => "#b0b0b0",
            };
            let p = grid.grid_to_world(ix, iy);
            let h = grid.cellsize / 2.0;
            c.rect(p.x - h, p.y - h, p.x + h, p.y + h, fill);
        }
    }
}

pub fn plot_path(path: &[Point2], grid: Option<&OccupancyGrid>) -> String {
    let mut b = Bounds::empty();
    for p in path {
        b.add(p.x, p.y);
    }
    if let Some(g) = grid {
        b.add(g.x_min, g.y_min);
        b.add(
            g.x_min + g.width as f64 * g.cellsize,
            g.y_min + g.height as f64 * g.cellsize,
        );
    }
    let mut c = Canvas::new(b);
    if let Some(g) = grid {
        grid_cells(&mut c, g);
    }
    let pts: Vec<(f64, f64)> = path.iter().map(|p| (p.x, p.y)).collect();
    c.polyline(&pts, "#d02020", 2.5);
    if let (Some(a), Some(z)) = (path.first(), path.last()) {
        c.circle(a.x, a.y, 5.0, "#10a010");
        c.circle(z.x, z.y, 5.0, "#d02020");
    }
    c.finish()
}

/// Reference trajectory against the driven route.
pub fn plot_trajectory_overlay(
    log: &RunLog,
    reference: &[Point2],
    world: Option<&WorldModel>,
) -> String {
    let mut b = Bounds::empty();
    for r in &log.rows {
        b.add(r.pose.x, r.pose.y);
    }
    for p in reference {
        b.add(p.x, p.y);
    }
    if let Some(w) = world {
        world_bounds(&mut b, w);
    }
    let mut c = Canvas::new(b);
    if let Some(w) = world {
        wall_lines(&mut c, w);
    }
    let refs: Vec<(f64, f64)> = reference.iter().map(|p| (p.x, p.y)).collect();
    c.polyline(&refs, "#10a010", 1.5);
    let driven: Vec<(f64, f64)> = log.rows.iter().map(|r| (r.pose.x, r.pose.y)).collect();
    c.polyline(&driven, "#d02020", 2.5);
    c.finish()
}

/// The driven route split by controller mode: tracking blue, avoiding red.
pub fn plot_vfh_run(log: &RunLog, world: Option<&WorldModel>) -> String {
    let mut b = Bounds::empty();
    for r in &log.rows {
        b.add(r.pose.x, r.pose.y);
    }
    if let Some(w) = world {
        world_bounds(&mut b, w);
    }
    let mut c = Canvas::new(b);
    if let Some(w) = world {
        wall_lines(&mut c, w);
    }
    // contiguous same-mode stretches become separate polylines; one pose of
    // overlap keeps the route visually connected at the seams
    let mut i = 0;
    while i < log.rows.len() {
        let mode = log.rows[i].mode;
        let mut j = i + 1;
        while j < log.rows.len() && log.rows[j].mode == mode {
            j += 1;
        }
        let end = (j + 1).min(log.rows.len());
        let pts: Vec<(f64, f64)> = log.rows[i..end]
            .iter()
            .map(|r| (r.pose.x, r.pose.y))
            .collect();
        let color = match mode {
            Mode::Track => "#1050c0",
            Mode::Avoid => "#d02020",
        };
        c.polyline(&pts, color, 2.5);
        i = j;
    }
    if let Some(r) = log.rows.first() {
        c.circle(r.pose.x, r.pose.y, 5.0, "#10a010");
    }
    c.finish()
}
