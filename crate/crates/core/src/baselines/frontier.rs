//! Frontier extraction: Free cells bordering Unknown space, grouped into
//! 8-connected clusters.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::mapping::{CellState, OccupancyGrid};

/// Clusters smaller than this are treated as noise.
pub const MIN_FRONTIER_CELLS: usize = 3;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrontierSet {
    /// Flat cell indices per cluster, in scan order.
    pub frontiers: Vec<Vec<usize>>,
    /// Cluster centroids in world coordinates.
    pub centroids: Vec<Vec2>,
}

impl FrontierSet {
    pub fn len(&self) -> usize {
        self.frontiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frontiers.is_empty()
    }

    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.frontiers.iter().flatten().copied()
    }
}

fn neighbors4(w: usize, h: usize, ix: usize, iy: usize) -> impl Iterator<Item = (usize, usize)> {
    [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)]
        .into_iter()
        .filter_map(move |(dx, dy)| {
            let (nx, ny) = (ix as i64 + dx, iy as i64 + dy);
            (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h)
                .then_some((nx as usize, ny as usize))
        })
}

/// Free with at least one Unknown 4-neighbor.
pub fn is_frontier_cell(grid: &OccupancyGrid, idx: usize) -> bool {
    if grid.state(idx) != CellState::Free {
        return false;
    }
    let (ix, iy) = grid.coords(idx);
    neighbors4(grid.width(), grid.height(), ix, iy)
        .any(|(nx, ny)| grid.get(nx, ny) == CellState::Unknown)
}

/// All maximal 8-connected frontier clusters with at least
/// [`MIN_FRONTIER_CELLS`] cells. Fails when the grid has no Free cell.
pub fn detect_frontiers(grid: &OccupancyGrid) -> Result<FrontierSet> {
    detect_frontiers_min(grid, MIN_FRONTIER_CELLS)
}

pub fn detect_frontiers_min(grid: &OccupancyGrid, min_size: usize) -> Result<FrontierSet> {
    if grid.known_free_cells() == 0 {
        return Err(Error::Precondition("grid has no free cells".into()));
    }
    let (w, h) = (grid.width(), grid.height());
    let is_frontier: Vec<bool> = (0..grid.len()).map(|i| is_frontier_cell(grid, i)).collect();
    let mut seen = vec![false; grid.len()];
    let mut set = FrontierSet::default();
    let mut queue = VecDeque::new();
    for start in 0..grid.len() {
        if !is_frontier[start] || seen[start] {
            continue;
        }
        let mut cluster = Vec::new();
        seen[start] = true;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            cluster.push(idx);
            let (ix, iy) = grid.coords(idx);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (ix as i64 + dx, iy as i64 + dy);
                    if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                        continue;
                    }
                    let n = grid.index(nx as usize, ny as usize);
                    if is_frontier[n] && !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        if cluster.len() >= min_size {
            cluster.sort_unstable();
            let sum = cluster.iter().fold(Vec2::new(0.0, 0.0), |acc, &i| {
                let (x, y) = grid.coords(i);
                acc + grid.center(x, y)
            });
            set.centroids.push(sum * (1.0 / cluster.len() as f64));
            set.frontiers.push(cluster);
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Bounds;

    fn grid(w: f64, h: f64) -> OccupancyGrid {
        OccupancyGrid::new(&Bounds::new(0.0, 0.0, w, h), 0.05)
    }

    fn fill(g: &mut OccupancyGrid, f: impl Fn(usize, usize) -> Option<CellState>) {
        for iy in 0..g.height() {
            for ix in 0..g.width() {
                if let Some(s) = f(ix, iy) {
                    let i = g.index(ix, iy);
                    g.set(i, s);
                }
            }
        }
    }

    #[test]
    fn fully_known_has_no_frontier() {
        let mut g = grid(2.0, 2.0);
        fill(&mut g, |_, _| Some(CellState::Free));
        assert!(detect_frontiers(&g).unwrap().is_empty());
    }

    #[test]
    fn unknown_grid_violates_precondition() {
        assert!(detect_frontiers(&grid(1.0, 1.0)).is_err());
    }

    #[test]
    fn half_revealed_room_has_one_straight_cluster() {
        let mut g = grid(4.0, 2.0);
        let half = g.width() / 2;
        fill(&mut g, |ix, _| (ix < half).then_some(CellState::Free));
        let f = detect_frontiers(&g).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.frontiers[0].len(), g.height());
        assert!(f.frontiers[0].iter().all(|&i| g.coords(i).0 == half - 1));
        assert!((f.centroids[0].x - g.center(half - 1, 0).x).abs() < 1e-12);
    }

    #[test]
    fn small_clusters_are_dropped() {
        // a 2-cell unknown pocket is surrounded by a frontier ring of 6 cells
        // (4-neighbors only); an isolated single free cell is too small
        let mut pocket = OccupancyGrid::new(&Bounds::new(0.0, 0.0, 2.0, 2.0), 0.05);
        fill(&mut pocket, |ix, iy| (!(ix == 10 && (iy == 10 || iy == 11))).then_some(CellState::Free));
        let f = detect_frontiers(&pocket).unwrap();
        assert_eq!(f.len(), 1);
        assert_eq!(f.frontiers[0].len(), 6);
        let mut lone = grid(2.0, 2.0);
        fill(&mut lone, |ix, iy| (ix == 5 && iy == 5).then_some(CellState::Free));
        assert!(detect_frontiers(&lone).unwrap().is_empty());
        assert_eq!(detect_frontiers_min(&lone, 1).unwrap().len(), 1);
    }

    /// Brute-force oracle: frontier cells are exactly the Free cells with an
    /// Unknown 4-neighbor, and clusters partition them.
    #[test]
    fn matches_brute_force_on_random_grids() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let mut g = grid(1.0, 1.0);
            let states: Vec<CellState> = (0..g.len())
                .map(|_| match rng.random_range(0..3) {
                    0 => CellState::Unknown,
                    1 => CellState::Free,
                    _ => CellState::Occupied,
                })
                .collect();
            for (i, s) in states.iter().enumerate() {
                g.set(i, *s);
            }
            let f = detect_frontiers_min(&g, 1).unwrap();
            let mut got: Vec<usize> = f.cells().collect();
            got.sort_unstable();
            let mut want = Vec::new();
            for iy in 0..g.height() {
                for ix in 0..g.width() {
                    if g.get(ix, iy) != CellState::Free {
                        continue;
                    }
                    let unknown_near = [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)].iter().any(|(dx, dy)| {
                        let (nx, ny) = (ix as i64 + dx, iy as i64 + dy);
                        nx >= 0
                            && ny >= 0
                            && (nx as usize) < g.width()
                            && (ny as usize) < g.height()
                            && g.get(nx as usize, ny as usize) == CellState::Unknown
                    });
                    if unknown_near {
                        want.push(g.index(ix, iy));
                    }
                }
            }
            assert_eq!(got, want);
            // clusters are maximal: no two cells from different clusters touch
            let label: std::collections::HashMap<usize, usize> = f
                .frontiers
                .iter()
                .enumerate()
                .flat_map(|(k, c)| c.iter().map(move |&i| (i, k)))
                .collect();
            for (&i, &k) in &label {
                let (ix, iy) = g.coords(i);
                for (&j, &m) in &label {
                    let (jx, jy) = g.coords(j);
                    if ix.abs_diff(jx) <= 1 && iy.abs_diff(jy) <= 1 {
                        assert_eq!(k, m);
                    }
                }
            }
        }
    }
}
