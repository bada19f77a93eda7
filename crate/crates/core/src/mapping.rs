//! Occupancy-grid belief map and coverage accounting.
//!
//! Cells are updated last-write-wins from each scan: space swept between
//! consecutive beams becomes Free, the terminal cell of a returning beam
//! becomes Occupied. Occupied is sticky against free-space sweeps so grazing
//! beams cannot erode walls; cells never return to Unknown.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Bounds, Segment, Vec2};
use crate::sensor::LidarScan;
use crate::world::{Pose, WorldMap};

pub const DEFAULT_RESOLUTION: f64 = 0.05;

/// PGM gray levels of the usual occupancy map image convention.
pub const PGM_FREE: u8 = 254;
pub const PGM_OCCUPIED: u8 = 0;
pub const PGM_UNKNOWN: u8 = 205;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum CellState {
    Unknown,
    Free,
    Occupied,
}

/// Changes produced by integrating one scan.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanUpdate {
    /// Newly known area this step, m².
    pub delta_c: f64,
    /// Flat indices of cells that left Unknown.
    pub newly_known: Vec<usize>,
    /// Flat indices of cells that became Occupied (from Unknown or Free).
    pub newly_occupied: Vec<usize>,
    /// Beams whose terminal cell was already Occupied before this scan.
    pub reobserved: usize,
    pub beams: usize,
}

impl ScanUpdate {
    /// Fraction of all beams that re-observed a known obstacle.
    pub fn reobservation_fraction(&self) -> f64 {
        if self.beams == 0 {
            0.0
        } else {
            self.reobserved as f64 / self.beams as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    resolution: f64,
    origin: Vec2,
    width: usize,
    height: usize,
    cells: Vec<CellState>,
    known_free_cells: usize,
    known_cells: usize,
}

impl OccupancyGrid {
    /// All-Unknown grid covering `bounds`; `origin` is the world position
    /// of the lower-left corner of cell (0, 0).
    pub fn new(bounds: &Bounds, resolution: f64) -> Self {
        assert!(resolution > 0.0, "resolution must be positive");
        let width = ((bounds.width() / resolution) - 1e-9).ceil().max(1.0) as usize;
        let height = ((bounds.height() / resolution) - 1e-9).ceil().max(1.0) as usize;
        Self {
            resolution,
            origin: Vec2::new(bounds.xmin, bounds.ymin),
            width,
            height,
            cells: vec![CellState::Unknown; width * height],
            known_free_cells: 0,
            known_cells: 0,
        }
    }

    pub fn for_world(world: &WorldMap, resolution: f64) -> Self {
        Self::new(&world.bounds, resolution)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn known_cells(&self) -> usize {
        self.known_cells
    }

    pub fn known_free_cells(&self) -> usize {
        self.known_free_cells
    }

    /// Known area in m².
    pub fn known_area(&self) -> f64 {
        self.known_cells as f64 * self.cell_area()
    }

    pub fn cell_area(&self) -> f64 {
        self.resolution * self.resolution
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.width + ix
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    pub fn get(&self, ix: usize, iy: usize) -> CellState {
        self.cells[self.index(ix, iy)]
    }

    pub fn state(&self, idx: usize) -> CellState {
        self.cells[idx]
    }

    /// Cell containing `p`, or `None` outside the grid.
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        let fx = (p.x - self.origin.x) / self.resolution;
        let fy = (p.y - self.origin.y) / self.resolution;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
        (ix < self.width && iy < self.height).then_some((ix, iy))
    }

    /// Like [`cell_of`](Self::cell_of) but snaps points on or just past the
    /// outer edge into the border cells.
    pub fn cell_of_clamped(&self, p: Vec2) -> (usize, usize) {
        let fx = ((p.x - self.origin.x) / self.resolution).floor();
        let fy = ((p.y - self.origin.y) / self.resolution).floor();
        (
            fx.clamp(0.0, (self.width - 1) as f64) as usize,
            fy.clamp(0.0, (self.height - 1) as f64) as usize,
        )
    }

    pub fn center(&self, ix: usize, iy: usize) -> Vec2 {
        Vec2::new(
            self.origin.x + (ix as f64 + 0.5) * self.resolution,
            self.origin.y + (iy as f64 + 0.5) * self.resolution,
        )
    }

    /// Sets a cell, keeping the running counters exact. Returns the previous
    /// state. Setting `Unknown` is refused.
    pub fn set(&mut self, idx: usize, state: CellState) -> CellState {
        let old = self.cells[idx];
        if state == CellState::Unknown || old == state {
            return old;
        }
        if old == CellState::Unknown {
            self.known_cells += 1;
        }
        if old == CellState::Free {
            self.known_free_cells -= 1;
        }
        if state == CellState::Free {
            self.known_free_cells += 1;
        }
        self.cells[idx] = state;
        old
    }

    /// Integrates one scan taken at `pose`.
    ///
    /// Free space is the star polygon swept between consecutive beams, each
    /// wedge cut at the shorter of its two ranges (cells whose centers fall
    /// inside become Free). The terminal cell of every returning beam is then
    /// marked Occupied.
    pub fn integrate_scan(&mut self, pose: &Pose, scan: &LidarScan) -> ScanUpdate {
        let n = scan.raw.len();
        let mut update = ScanUpdate {
            beams: n,
            ..ScanUpdate::default()
        };
        let origin = pose.position();
        if n == 0 || self.cell_of(origin).is_none() {
            return update;
        }
        let step_rad = (360.0 / n as f64).to_radians();
        let dirs: Vec<Vec2> = (0..n)
            .map(|i| Vec2::from_angle(pose.theta + i as f64 * step_rad))
            .collect();

        // re-observation is judged against the map before this scan
        let hits: Vec<(usize, usize)> = (0..n)
            .filter(|&i| scan.is_hit(i))
            .map(|i| self.cell_of_clamped(origin + dirs[i] * scan.raw[i]))
            .collect();
        update.reobserved = hits
            .iter()
            .filter(|&&(ix, iy)| self.get(ix, iy) == CellState::Occupied)
            .count();

        let mut polygon = Vec::with_capacity(2 * n);
        for i in 0..n {
            let j = (i + 1) % n;
            let r = scan.raw[i].min(scan.raw[j]);
            polygon.push(origin + dirs[i] * r);
            polygon.push(origin + dirs[j] * r);
        }
        let mut free_cells = Vec::new();
        self.fill_polygon(&polygon, &mut free_cells);
        // the robot's own cell is always observed
        let own = self.cell_of_clamped(origin);
        free_cells.push(self.index(own.0, own.1));

        for idx in free_cells {
            if self.cells[idx] == CellState::Occupied {
                continue;
            }
            if self.set(idx, CellState::Free) == CellState::Unknown {
                update.newly_known.push(idx);
            }
        }
        for (ix, iy) in hits {
            let idx = self.index(ix, iy);
            match self.set(idx, CellState::Occupied) {
                CellState::Unknown => {
                    update.newly_known.push(idx);
                    update.newly_occupied.push(idx);
                }
                CellState::Free => update.newly_occupied.push(idx),
                CellState::Occupied => {}
            }
        }
        update.delta_c = update.newly_known.len() as f64 * self.cell_area();
        update
    }

    /// Even-odd scanline fill sampled at cell centers.
    fn fill_polygon(&self, poly: &[Vec2], out: &mut Vec<usize>) {
        let res = self.resolution;
        let row_of = |y: f64| (y - self.origin.y) / res - 0.5;
        let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
        for p in poly {
            ymin = ymin.min(p.y);
            ymax = ymax.max(p.y);
        }
        let r0 = row_of(ymin).ceil().max(0.0) as usize;
        let r1 = row_of(ymax).floor().min(self.height as f64 - 1.0);
        if r1 < r0 as f64 {
            return;
        }
        let r1 = r1 as usize;
        let mut rows: Vec<Vec<f64>> = vec![Vec::new(); r1 - r0 + 1];
        for k in 0..poly.len() {
            let p = poly[k];
            let q = poly[(k + 1) % poly.len()];
            if p.y == q.y {
                continue;
            }
            let (lo, hi) = if p.y < q.y { (p, q) } else { (q, p) };
            // half-open in y so shared vertices are counted once
            let first = row_of(lo.y).ceil().max(r0 as f64) as usize;
            let mut iy = first;
            while iy <= r1 {
                let yc = self.origin.y + (iy as f64 + 0.5) * res;
                if yc >= hi.y {
                    break;
                }
                if yc >= lo.y {
                    let x = lo.x + (yc - lo.y) * (hi.x - lo.x) / (hi.y - lo.y);
                    rows[iy - r0].push(x);
                }
                iy += 1;
            }
        }
        let col_of = |x: f64| (x - self.origin.x) / res - 0.5;
        for (k, xs) in rows.iter_mut().enumerate() {
            xs.sort_by(|a, b| a.total_cmp(b));
            let iy = r0 + k;
            for pair in xs.chunks_exact(2) {
                let c0 = col_of(pair[0]).ceil().max(0.0);
                let c1 = col_of(pair[1]).floor().min(self.width as f64 - 1.0);
                if c1 < c0 {
                    continue;
                }
                for ix in c0 as usize..=c1 as usize {
                    out.push(self.index(ix, iy));
                }
            }
        }
    }

    /// Full recount of `(known, known_free)`; the running counters must match.
    pub fn recount(&self) -> (usize, usize) {
        let known = self.cells.iter().filter(|c| **c != CellState::Unknown).count();
        let free = self.cells.iter().filter(|c| **c == CellState::Free).count();
        (known, free)
    }

    pub fn snapshot(&self) -> MapSnapshot {
        MapSnapshot {
            width: self.width,
            height: self.height,
            resolution: self.resolution,
            origin: [self.origin.x, self.origin.y],
            cells: self
                .cells
                .iter()
                .map(|c| match c {
                    CellState::Unknown => 'u',
                    CellState::Free => 'f',
                    CellState::Occupied => 'o',
                })
                .collect(),
        }
    }
}

/// Integer line traversal from `a` to `b` inclusive.
pub fn bresenham(a: (usize, usize), b: (usize, usize), out: &mut Vec<(usize, usize)>) {
    let (mut x, mut y) = (a.0 as i64, a.1 as i64);
    let (x1, y1) = (b.0 as i64, b.1 as i64);
    let dx = (x1 - x).abs();
    let dy = -(y1 - y).abs();
    let sx = if x < x1 { 1 } else { -1 };
    let sy = if y < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    loop {
        out.push((x as usize, y as usize));
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// Serializable copy of a grid (`u`/`f`/`o` per cell, row-major from the
/// bottom row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSnapshot {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: [f64; 2],
    pub cells: String,
}

impl MapSnapshot {
    /// P5 image bytes, first row = top of the map (largest y).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        let cells = self.cells.as_bytes();
        for row in (0..self.height).rev() {
            for col in 0..self.width {
                out.push(match cells[row * self.width + col] {
                    b'f' => PGM_FREE,
                    b'o' => PGM_OCCUPIED,
                    _ => PGM_UNKNOWN,
                });
            }
        }
        out
    }

    pub fn yaml_sidecar(&self, image_name: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "image: {image_name}");
        let _ = writeln!(s, "resolution: {:.6}", self.resolution);
        let _ = writeln!(s, "origin: [{:.6}, {:.6}, 0.000000]", self.origin[0], self.origin[1]);
        let _ = writeln!(s, "negate: 0");
        let _ = writeln!(s, "occupied_thresh: 0.65");
        let _ = writeln!(s, "free_thresh: 0.196");
        s
    }

    /// Writes `<stem>.pgm` and `<stem>.yaml` into `dir`.
    pub fn write_map(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let image = format!("{stem}.pgm");
        let pgm_path = dir.join(&image);
        let mut f = std::fs::File::create(&pgm_path).map_err(|e| Error::io(&pgm_path, e))?;
        f.write_all(&self.to_pgm()).map_err(|e| Error::io(&pgm_path, e))?;
        let yaml_path = dir.join(format!("{stem}.yaml"));
        std::fs::write(&yaml_path, self.yaml_sidecar(&image)).map_err(|e| Error::io(&yaml_path, e))
    }
}

/// Ground-truth cells that count toward coverage: cell centers in free space
/// reachable from the start pose by 4-connected moves that cross no wall.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachableMask {
    mask: Vec<bool>,
    count: usize,
}

impl ReachableMask {
    pub fn compute(world: &WorldMap, grid: &OccupancyGrid, start: Vec2) -> Self {
        let (w, h) = (grid.width(), grid.height());
        let free_center = |ix: usize, iy: usize| {
            let c = grid.center(ix, iy);
            world.bounds.contains(c)
                && !world
                    .circles
                    .iter()
                    .any(|o| c.distance(o.center) < o.radius)
        };
        let mut mask = vec![false; w * h];
        let mut count = 0;
        let Some(s) = grid.cell_of(start) else {
            return Self { mask, count };
        };
        if !free_center(s.0, s.1) {
            return Self { mask, count };
        }
        let mut queue = VecDeque::from([s]);
        mask[grid.index(s.0, s.1)] = true;
        count += 1;
        while let Some((ix, iy)) = queue.pop_front() {
            let here = grid.center(ix, iy);
            let neighbors = [
                (ix.wrapping_sub(1), iy),
                (ix + 1, iy),
                (ix, iy.wrapping_sub(1)),
                (ix, iy + 1),
            ];
            for (nx, ny) in neighbors {
                if nx >= w || ny >= h {
                    continue;
                }
                let idx = grid.index(nx, ny);
                if mask[idx] || !free_center(nx, ny) {
                    continue;
                }
                let step = Segment::new(here, grid.center(nx, ny));
                if world.segments.iter().any(|wall| wall.intersects(&step)) {
                    continue;
                }
                mask[idx] = true;
                count += 1;
                queue.push_back((nx, ny));
            }
        }
        Self { mask, count }
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.mask[idx]
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn area(&self, resolution: f64) -> f64 {
        self.count as f64 * resolution * resolution
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    /// Fraction of reachable free cells that are known.
    pub c_t: f64,
    /// Newly known area this step, m².
    pub delta_c: f64,
    /// Expansion rate, m²/s.
    pub c_dot: f64,
    pub completeness: f64,
}

/// Coverage by full recount: reachable cells that are no longer Unknown over
/// all reachable cells.
pub fn coverage(grid: &OccupancyGrid, mask: &ReachableMask) -> CoverageReport {
    let known = grid
        .cells()
        .iter()
        .enumerate()
        .filter(|(i, c)| mask.contains(*i) && **c != CellState::Unknown)
        .count();
    let c_t = if mask.count() == 0 {
        0.0
    } else {
        known as f64 / mask.count() as f64
    };
    CoverageReport {
        c_t,
        delta_c: 0.0,
        c_dot: 0.0,
        completeness: c_t,
    }
}

/// Incremental form of [`coverage`], fed from each [`ScanUpdate`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageTracker {
    known_reachable: usize,
    total: usize,
}

impl CoverageTracker {
    pub fn new(mask: &ReachableMask) -> Self {
        Self {
            known_reachable: 0,
            total: mask.count(),
        }
    }

    pub fn update(&mut self, mask: &ReachableMask, update: &ScanUpdate, dt: f64) -> CoverageReport {
        self.known_reachable += update
            .newly_known
            .iter()
            .filter(|&&i| mask.contains(i))
            .count();
        let c_t = self.ratio();
        CoverageReport {
            c_t,
            delta_c: update.delta_c,
            c_dot: if dt > 0.0 { update.delta_c / dt } else { 0.0 },
            completeness: c_t,
        }
    }

    pub fn ratio(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.known_reachable as f64 / self.total as f64
        }
    }
}
