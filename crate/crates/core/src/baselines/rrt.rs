//! RRT exploration: grow a tree through Free and Unknown space until a
//! branch reaches Unknown-adjacent territory, then hand back the branch.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::frontier::is_frontier_cell;
use super::planner::ClearanceMaps;
use crate::geometry::{Bounds, Vec2};
use crate::mapping::OccupancyGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrtConfig {
    pub goal_bias: f64,
    /// Extension length, m.
    pub step_len: f64,
    pub node_cap: usize,
}

impl Default for RrtConfig {
    fn default() -> Self {
        Self {
            goal_bias: 0.1,
            step_len: 0.3,
            node_cap: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrtNode {
    pub pos: Vec2,
    pub parent: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrtTree {
    pub nodes: Vec<RrtNode>,
}

impl RrtTree {
    pub fn new(root: Vec2) -> Self {
        Self {
            nodes: vec![RrtNode {
                pos: root,
                parent: None,
            }],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> Vec2 {
        self.nodes[0].pos
    }

    fn nearest(&self, p: Vec2) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = (n.pos - p).dot(n.pos - p);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Root-to-node positions.
    pub fn branch(&self, mut idx: usize) -> Vec<Vec2> {
        let mut out = vec![self.nodes[idx].pos];
        while let Some(p) = self.nodes[idx].parent {
            out.push(self.nodes[p].pos);
            idx = p;
        }
        out.reverse();
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RrtStep {
    /// The tree grew (or the sample was rejected); keep going.
    Extended,
    /// A branch reached a frontier; root-to-goal waypoints.
    Found(Vec<Vec2>),
    /// Node cap reached or nothing left to explore.
    Exhausted,
}

/// Straight segment clear of Occupied cells at `res/2` spacing.
pub fn segment_open(maps: &ClearanceMaps, a: Vec2, b: Vec2, res: f64) -> bool {
    let len = a.distance(b);
    let n = (len / (0.5 * res)).ceil().max(1.0) as usize;
    (0..=n).all(|k| maps.open_point(a + (b - a) * (k as f64 / n as f64)))
}

/// First frontier cell along `a → b`, as a world point.
fn first_frontier_on(grid: &OccupancyGrid, a: Vec2, b: Vec2) -> Option<Vec2> {
    let res = grid.resolution();
    let len = a.distance(b);
    let n = (len / (0.5 * res)).ceil().max(1.0) as usize;
    (0..=n).find_map(|k| {
        let p = a + (b - a) * (k as f64 / n as f64);
        let (ix, iy) = grid.cell_of(p)?;
        is_frontier_cell(grid, grid.index(ix, iy)).then(|| grid.center(ix, iy))
    })
}

/// Grows the tree by one sample. `targets` are candidate frontier points for
/// goal-biased sampling; an empty list means the map is fully explored.
#[allow(clippy::too_many_arguments)]
pub fn rrt_explore_step<R: Rng + ?Sized>(
    grid: &OccupancyGrid,
    maps: &ClearanceMaps,
    bounds: &Bounds,
    tree: &mut RrtTree,
    targets: &[Vec2],
    blacklist: &[Vec2],
    blacklist_radius: f64,
    cfg: &RrtConfig,
    rng: &mut R,
) -> RrtStep {
    if targets.is_empty() || tree.len() >= cfg.node_cap {
        return RrtStep::Exhausted;
    }
    let sample = if rng.random::<f64>() < cfg.goal_bias {
        targets[rng.random_range(0..targets.len())]
    } else {
        Vec2::new(
            rng.random_range(bounds.xmin..bounds.xmax),
            rng.random_range(bounds.ymin..bounds.ymax),
        )
    };
    let near = tree.nearest(sample);
    let from = tree.nodes[near].pos;
    let d = from.distance(sample);
    if d < 1e-9 {
        return RrtStep::Extended;
    }
    let to = if d > cfg.step_len {
        from + (sample - from) * (cfg.step_len / d)
    } else {
        sample
    };
    if !segment_open(maps, from, to, grid.resolution()) {
        return RrtStep::Extended;
    }
    if let Some(goal) = first_frontier_on(grid, from, to) {
        if !blacklist.iter().any(|b| b.distance(goal) < blacklist_radius) {
            let mut path = tree.branch(near);
            if path.last().is_none_or(|p| p.distance(goal) > 1e-9) {
                path.push(goal);
            }
            return RrtStep::Found(path);
        }
    }
    tree.nodes.push(RrtNode {
        pos: to,
        parent: Some(near),
    });
    RrtStep::Extended
}

/// Greedy shortcutting: from each kept waypoint jump to the farthest later
/// waypoint reachable by a clear straight segment.
pub fn shortcut(maps: &ClearanceMaps, path: &[Vec2], res: f64) -> Vec<Vec2> {
    if path.len() <= 2 {
        return path.to_vec();
    }
    let mut out = vec![path[0]];
    let mut i = 0;
    while i + 1 < path.len() {
        let mut j = path.len() - 1;
        while j > i + 1 && !segment_open(maps, path[i], path[j], res) {
            j -= 1;
        }
        out.push(path[j]);
        i = j;
    }
    out
}
