//! Inflated cost maps and grid search used by the planners and the executor.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::frontier::FrontierSet;
use crate::geometry::Vec2;
use crate::mapping::{CellState, OccupancyGrid, ScanUpdate};

/// Cost multiplier for cells inside the planning inflation band.
const INFLATION_PENALTY: f64 = 4.0;

/// Incrementally maintained neighborhood counts over the occupancy grid.
///
/// * `blocked`: non-Free cells (Unknown or Occupied) within the safety
///   radius. A point is safe for the robot only where this is zero.
/// * `blocked_hard`: the same within the smaller hard radius (no margin);
///   used to validate plans already committed to, so that a one-cell shift
///   in the map does not invalidate them.
/// * `occ_near`: Occupied cells within the safety radius; planning treats
///   cells with a nonzero count as impassable.
/// * `occ_band`: Occupied cells within the wider planning radius; such cells
///   are passable at a higher cost.
#[derive(Debug, Clone)]
pub struct ClearanceMaps {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Vec2,
    hard_offsets: Vec<(i64, i64)>,
    safe_offsets: Vec<(i64, i64)>,
    band_offsets: Vec<(i64, i64)>,
    blocked_hard: Vec<u16>,
    blocked: Vec<u16>,
    occ_near: Vec<u16>,
    occ_band: Vec<u16>,
    state: Vec<CellState>,
}

fn disc_offsets(r: usize) -> Vec<(i64, i64)> {
    let r = r as i64;
    let mut v = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                v.push((dx, dy));
            }
        }
    }
    v
}

impl ClearanceMaps {
    /// `safe_cells` / `band_cells` are neighborhood radii in cells; the hard
    /// radius equals the safety radius.
    pub fn new(grid: &OccupancyGrid, safe_cells: usize, band_cells: usize) -> Self {
        Self::with_radii(grid, safe_cells, safe_cells, band_cells)
    }

    pub fn with_radii(grid: &OccupancyGrid, hard_cells: usize, safe_cells: usize, band_cells: usize) -> Self {
        let mut maps = Self {
            width: grid.width(),
            height: grid.height(),
            resolution: grid.resolution(),
            origin: grid.origin(),
            hard_offsets: disc_offsets(hard_cells.min(safe_cells)),
            safe_offsets: disc_offsets(safe_cells),
            band_offsets: disc_offsets(band_cells.max(safe_cells)),
            blocked_hard: vec![0; grid.len()],
            blocked: vec![0; grid.len()],
            occ_near: vec![0; grid.len()],
            occ_band: vec![0; grid.len()],
            state: vec![CellState::Unknown; grid.len()],
        };
        // everything starts Unknown, then replay the current grid
        for idx in 0..grid.len() {
            maps.apply(idx, CellState::Unknown, 1);
        }
        let changed: Vec<usize> = (0..grid.len())
            .filter(|&i| grid.state(i) != CellState::Unknown)
            .collect();
        maps.sync(grid, &changed);
        maps
    }

    /// Radii derived from the robot size: the safety radius guarantees the
    /// robot disc plus `margin` clears every non-Free cell even with both
    /// the robot and the obstacle anywhere inside their cells.
    pub fn for_robot(grid: &OccupancyGrid, robot_radius: f64, margin: f64, band: f64) -> Self {
        let res = grid.resolution();
        let cells = |r: f64| (r / res + std::f64::consts::SQRT_2).ceil() as usize;
        Self::with_radii(
            grid,
            cells(robot_radius),
            cells(robot_radius + margin),
            cells(robot_radius + band),
        )
    }

    fn for_each_in(&self, offsets: &[(i64, i64)], idx: usize, mut f: impl FnMut(usize)) {
        let (ix, iy) = ((idx % self.width) as i64, (idx / self.width) as i64);
        for (dx, dy) in offsets {
            let (nx, ny) = (ix + dx, iy + dy);
            if nx >= 0 && ny >= 0 && (nx as usize) < self.width && (ny as usize) < self.height {
                f(ny as usize * self.width + nx as usize);
            }
        }
    }

    fn apply(&mut self, idx: usize, state: CellState, sign: i32) {
        let bump = |c: &mut u16| *c = (*c as i32 + sign) as u16;
        let hard = std::mem::take(&mut self.hard_offsets);
        let safe = std::mem::take(&mut self.safe_offsets);
        let band = std::mem::take(&mut self.band_offsets);
        if state != CellState::Free {
            let mut touched = Vec::new();
            self.for_each_in(&hard, idx, |n| touched.push(n));
            for n in touched {
                bump(&mut self.blocked_hard[n]);
            }
            let mut touched = Vec::new();
            self.for_each_in(&safe, idx, |n| touched.push(n));
            for n in &touched {
                bump(&mut self.blocked[*n]);
            }
            if state == CellState::Occupied {
                for n in touched {
                    bump(&mut self.occ_near[n]);
                }
            }
        }
        if state == CellState::Occupied {
            let mut touched = Vec::new();
            self.for_each_in(&band, idx, |n| touched.push(n));
            for n in touched {
                bump(&mut self.occ_band[n]);
            }
        }
        self.hard_offsets = hard;
        self.safe_offsets = safe;
        self.band_offsets = band;
    }

    /// Brings the counts in line with `grid` for the listed cells.
    pub fn sync(&mut self, grid: &OccupancyGrid, changed: &[usize]) {
        for &idx in changed {
            let new = grid.state(idx);
            let old = self.state[idx];
            if new != old {
                self.apply(idx, old, -1);
                self.apply(idx, new, 1);
                self.state[idx] = new;
            }
        }
    }

    pub fn sync_update(&mut self, grid: &OccupancyGrid, update: &ScanUpdate) {
        self.sync(grid, &update.newly_known);
        self.sync(grid, &update.newly_occupied);
    }

    fn cell_index(&self, p: Vec2) -> Option<usize> {
        let fx = (p.x - self.origin.x) / self.resolution;
        let fy = (p.y - self.origin.y) / self.resolution;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        (ix < self.width && iy < self.height).then_some(iy * self.width + ix)
    }

    /// True when the robot centered at `p` keeps clear of every non-Free cell.
    pub fn safe_point(&self, p: Vec2) -> bool {
        self.cell_index(p).is_some_and(|i| self.blocked[i] == 0)
    }

    /// Like [`Self::safe_point`] with the hard radius.
    pub fn safe_point_hard(&self, p: Vec2) -> bool {
        self.cell_index(p).is_some_and(|i| self.blocked_hard[i] == 0)
    }

    /// Free and not within the safety radius of an Occupied cell.
    pub fn passable(&self, idx: usize) -> bool {
        self.state[idx] == CellState::Free && self.occ_near[idx] == 0
    }

    pub fn in_band(&self, idx: usize) -> bool {
        self.occ_band[idx] > 0
    }

    /// Passable in the RRT sense: Free or Unknown, away from Occupied cells.
    pub fn open(&self, idx: usize) -> bool {
        self.state[idx] != CellState::Occupied && self.occ_near[idx] == 0
    }

    pub fn open_point(&self, p: Vec2) -> bool {
        self.cell_index(p).is_some_and(|i| self.open(i))
    }

    pub fn index_of(&self, p: Vec2) -> Option<usize> {
        self.cell_index(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    cost: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.cost.total_cmp(&self.cost).then_with(|| o.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Distances (meters, inflated) and predecessors from a Dijkstra sweep.
#[derive(Debug, Clone)]
pub struct DistanceField {
    pub dist: Vec<f64>,
    pub prev: Vec<usize>,
    width: usize,
}

impl DistanceField {
    pub fn reached(&self, idx: usize) -> bool {
        self.dist[idx].is_finite()
    }

    /// Cell sequence from a source to `idx`, source first.
    pub fn path_to(&self, idx: usize) -> Option<Vec<usize>> {
        if !self.reached(idx) {
            return None;
        }
        let mut path = vec![idx];
        let mut cur = idx;
        while self.prev[cur] != usize::MAX {
            cur = self.prev[cur];
            path.push(cur);
        }
        path.reverse();
        Some(path)
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

/// 8-connected Dijkstra over passable cells from `sources` (which are always
/// admitted). Diagonal moves may not cut corners. Steps into the planning
/// inflation band cost [`INFLATION_PENALTY`] times more.
pub fn dijkstra(maps: &ClearanceMaps, sources: &[usize], penalize_band: bool) -> DistanceField {
    let (w, h) = (maps.width, maps.height);
    let res = maps.resolution;
    let n = w * h;
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push(Entry { cost: 0.0, idx: s });
    }
    const STEPS: [(i64, i64); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];
    while let Some(Entry { cost, idx }) = heap.pop() {
        if cost > dist[idx] {
            continue;
        }
        let (ix, iy) = ((idx % w) as i64, (idx / w) as i64);
        for (dx, dy) in STEPS {
            let (nx, ny) = (ix + dx, iy + dy);
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                continue;
            }
            let nidx = ny as usize * w + nx as usize;
            if !maps.passable(nidx) {
                continue;
            }
            let diagonal = dx != 0 && dy != 0;
            if diagonal {
                let a = iy as usize * w + nx as usize;
                let b = ny as usize * w + ix as usize;
                if !maps.passable(a) || !maps.passable(b) {
                    continue;
                }
            }
            let mut step = if diagonal { res * std::f64::consts::SQRT_2 } else { res };
            if penalize_band && maps.in_band(nidx) {
                step *= INFLATION_PENALTY;
            }
            let c = cost + step;
            if c < dist[nidx] {
                dist[nidx] = c;
                prev[nidx] = idx;
                heap.push(Entry { cost: c, idx: nidx });
            }
        }
    }
    DistanceField { dist, prev, width: w }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrontierPlan {
    pub cluster: usize,
    /// Cell the robot drives to: the reachable cluster cell nearest the
    /// cluster centroid.
    pub goal: usize,
    pub goal_point: Vec2,
    pub cost: f64,
    /// Waypoints from the robot cell to the goal, cell centers.
    pub path: Vec<Vec2>,
}

/// Nearest reachable frontier by path cost; exact ties go to the smaller
/// centroid `(x, y)`. Returns `None` when no cluster is reachable.
/// Clusters whose goal lies within `blacklist_radius` of a blacklisted
/// point are skipped.
pub fn plan_to_frontier(
    grid: &OccupancyGrid,
    maps: &ClearanceMaps,
    robot: Vec2,
    frontiers: &FrontierSet,
    blacklist: &[Vec2],
    blacklist_radius: f64,
) -> Option<FrontierPlan> {
    let start = maps.index_of(robot)?;
    let field = dijkstra(maps, &[start], true);
    let mut best: Option<FrontierPlan> = None;
    for (k, cluster) in frontiers.frontiers.iter().enumerate() {
        let centroid = frontiers.centroids[k];
        let goal = cluster
            .iter()
            .copied()
            .filter(|&i| field.reached(i))
            .min_by(|&a, &b| {
                let (ax, ay) = grid.coords(a);
                let (bx, by) = grid.coords(b);
                grid.center(ax, ay)
                    .distance(centroid)
                    .total_cmp(&grid.center(bx, by).distance(centroid))
                    .then(a.cmp(&b))
            });
        let Some(goal) = goal else { continue };
        let (gx, gy) = grid.coords(goal);
        let goal_point = grid.center(gx, gy);
        if blacklist.iter().any(|b| b.distance(goal_point) < blacklist_radius) {
            continue;
        }
        let cost = field.dist[goal];
        let better = match &best {
            None => true,
            Some(b) => {
                let bc = frontiers.centroids[b.cluster];
                cost < b.cost
                    || (cost == b.cost && (centroid.x, centroid.y) < (bc.x, bc.y))
            }
        };
        if better {
            let path = field
                .path_to(goal)
                .unwrap_or_default()
                .into_iter()
                .map(|i| {
                    let (x, y) = grid.coords(i);
                    grid.center(x, y)
                })
                .collect();
            best = Some(FrontierPlan {
                cluster: k,
                goal,
                goal_point,
                cost,
                path,
            });
        }
    }
    best
}
