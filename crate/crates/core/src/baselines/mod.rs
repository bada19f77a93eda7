//! Classical exploration baselines: nearest-frontier and RRT exploration.
//!
//! Both drive an [`ExplorationEnv`] through the same three discrete actions
//! and the same step pipeline as the learning agent, so every metric in an
//! [`EpisodeRecord`] is comparable across methods.

pub mod follower;
pub mod frontier;
pub mod planner;
pub mod rrt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{EpisodeRecord, ExplorationEnv, TerminationCause};
use crate::error::Result;
use crate::geometry::Vec2;
use crate::mapping::OccupancyGrid;
use crate::world::Pose;
use follower::{Follower, FollowerConfig, Route};
use frontier::{detect_frontiers, is_frontier_cell};
use planner::{dijkstra, plan_to_frontier, ClearanceMaps, DistanceField};
use rrt::{rrt_explore_step, segment_open, shortcut, RrtConfig, RrtStep, RrtTree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Frontier,
    Rrt,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Frontier => "frontier",
            Method::Rrt => "rrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Clearance kept beyond the robot radius, m.
    pub safety_margin: f64,
    /// Width of the higher-cost band around obstacles, m.
    pub inflation_band: f64,
    /// Distance at which a goal counts as reached, m.
    pub goal_tolerance: f64,
    /// Steps without progress before the goal is abandoned.
    pub stuck_steps: usize,
    /// Steps between cost-field refreshes.
    pub refresh_every: usize,
    /// Consecutive abandoned goals before the episode is aborted.
    pub max_failures: usize,
    /// Goals within this radius of an abandoned one are skipped, m.
    pub blacklist_radius: f64,
    pub rrt: RrtConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            safety_margin: 0.05,
            inflation_band: 0.3,
            goal_tolerance: 0.4,
            stuck_steps: 50,
            refresh_every: 10,
            max_failures: 8,
            blacklist_radius: 0.5,
            rrt: RrtConfig::default(),
        }
    }
}

/// Current target of the executor.
enum Goal {
    Frontier {
        goal: usize,
        point: Vec2,
        field: DistanceField,
    },
    Rrt {
        point: Vec2,
        path: Vec<Vec2>,
    },
}

impl Goal {
    fn point(&self) -> Vec2 {
        match self {
            Goal::Frontier { point, .. } | Goal::Rrt { point, .. } => *point,
        }
    }
}

/// Nearest passable cell to `p` by ring search, as a point.
fn nearest_passable(grid: &OccupancyGrid, maps: &ClearanceMaps, p: Vec2, max_r: i64) -> Option<Vec2> {
    let (cx, cy) = grid.cell_of(p)?;
    let mut best: Option<(f64, Vec2)> = None;
    for r in 0..=max_r {
        for dy in -r..=r {
            for dx in -r..=r {
                if dx.abs().max(dy.abs()) != r {
                    continue;
                }
                let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                if nx < 0 || ny < 0 || nx as usize >= grid.width() || ny as usize >= grid.height() {
                    continue;
                }
                let idx = grid.index(nx as usize, ny as usize);
                if maps.passable(idx) {
                    let c = grid.center(nx as usize, ny as usize);
                    let d = c.distance(p);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, c));
                    }
                }
            }
        }
        if best.is_some() {
            return best.map(|(_, c)| c);
        }
    }
    None
}

struct Planner<'c> {
    method: Method,
    cfg: &'c BaselineConfig,
    rng: ChaCha8Rng,
    blacklist: Vec<Vec2>,
}

impl Planner<'_> {
    /// `None` means nothing is left to explore.
    fn plan(&mut self, env: &ExplorationEnv, maps: &ClearanceMaps) -> Option<Goal> {
        let grid = env.grid();
        let robot = env.pose().position();
        let frontiers = detect_frontiers(grid).ok()?;
        if frontiers.is_empty() {
            return None;
        }
        match self.method {
            Method::Frontier => {
                let start = nearest_passable(grid, maps, robot, 10)?;
                let plan = plan_to_frontier(
                    grid,
                    maps,
                    start,
                    &frontiers,
                    &self.blacklist,
                    self.cfg.blacklist_radius,
                )?;
                let field = dijkstra(maps, &[plan.goal], true);
                Some(Goal::Frontier {
                    goal: plan.goal,
                    point: plan.goal_point,
                    field,
                })
            }
            Method::Rrt => {
                let bounds = env.world().bounds;
                let mut tree = RrtTree::new(robot);
                loop {
                    match rrt_explore_step(
                        grid,
                        maps,
                        &bounds,
                        &mut tree,
                        &frontiers.centroids,
                        &self.blacklist,
                        self.cfg.blacklist_radius,
                        &self.cfg.rrt,
                        &mut self.rng,
                    ) {
                        RrtStep::Extended => {}
                        RrtStep::Exhausted => return None,
                        RrtStep::Found(path) => {
                            let path = shortcut(maps, &path, grid.resolution());
                            let point = *path.last()?;
                            return Some(Goal::Rrt { point, path });
                        }
                    }
                }
            }
        }
    }
}

/// Route no longer usable given the latest map.
fn blocked(goal: &Goal, env: &ExplorationEnv, maps: &ClearanceMaps) -> bool {
    match goal {
        Goal::Frontier { field, .. } => {
            // blocked when the remaining route from the robot passes a cell
            // that is no longer passable
            let grid = env.grid();
            let Some((ix, iy)) = grid.cell_of(env.pose().position()) else {
                return true;
            };
            let mut idx = grid.index(ix, iy);
            if !field.reached(idx) {
                return false;
            }
            while field.prev[idx] != usize::MAX {
                idx = field.prev[idx];
                if !maps.passable(idx) {
                    return true;
                }
            }
            false
        }
        Goal::Rrt { path, .. } => {
            let res = env.grid().resolution();
            let robot = env.pose().position();
            // only the part of the path ahead of the robot matters
            let nearest = path
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.distance(robot).total_cmp(&b.1.distance(robot)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            path[nearest..].windows(2).any(|w| !segment_open(maps, w[0], w[1], res))
        }
    }
}

fn consumed(goal: &Goal, grid: &OccupancyGrid) -> bool {
    let p = goal.point();
    match grid.cell_of(p) {
        Some((ix, iy)) => !is_frontier_cell(grid, grid.index(ix, iy)),
        None => true,
    }
}

/// Runs one episode of `method` from `start`. The episode ends through the
/// environment's own termination rules, or with
/// [`TerminationCause::ExplorationComplete`] when no frontier is left and
/// [`TerminationCause::Aborted`] after repeated planning failures.
pub fn run_baseline_episode(
    env: &mut ExplorationEnv,
    method: Method,
    cfg: &BaselineConfig,
    start: Pose,
    seed: u64,
) -> Result<EpisodeRecord> {
    env.reset(start, seed)?;
    let ecfg = *env.config();
    let mut maps = ClearanceMaps::for_robot(env.grid(), ecfg.robot_radius, cfg.safety_margin, cfg.inflation_band);
    let mut follower = Follower::new(FollowerConfig::new(ecfg.actions, ecfg.dt));
    let mut planner = Planner {
        method,
        cfg,
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_ba5e),
        blacklist: Vec::new(),
    };
    let mut goal: Option<Goal> = None;
    let mut best_cost = f64::INFINITY;
    let mut since_progress = 0usize;
    let mut since_refresh = 0usize;
    let mut failures = 0usize;
    let mut last_coverage = env.coverage();

    while !env.is_done() {
        let robot = env.pose().position();
        let need_plan = match &goal {
            None => true,
            Some(g) => {
                consumed(g, env.grid())
                    || g.point().distance(robot) <= cfg.goal_tolerance
                    || blocked(g, env, &maps)
            }
        };
        if since_progress >= cfg.stuck_steps {
            if let Some(g) = &goal {
                planner.blacklist.push(g.point());
            }
            failures += 1;
            if failures >= cfg.max_failures {
                env.terminate(TerminationCause::Aborted);
                break;
            }
            goal = None;
        }
        if need_plan || goal.is_none() {
            goal = planner.plan(env, &maps);
            best_cost = f64::INFINITY;
            since_progress = 0;
            since_refresh = 0;
            if goal.is_none() {
                env.terminate(TerminationCause::ExplorationComplete);
                break;
            }
        } else if since_refresh >= cfg.refresh_every {
            if let Some(Goal::Frontier { goal: cell, field, .. }) = &mut goal {
                *field = dijkstra(&maps, &[*cell], true);
            }
            since_refresh = 0;
        }
        let g = goal.as_ref().expect("goal set above");
        let route = match g {
            Goal::Frontier { field, .. } => Route::Field {
                field,
                grid: env.grid(),
            },
            Goal::Rrt { path, .. } => Route::Path(path),
        };
        let pose = env.pose();
        let action = follower
            .choose(&maps, pose, &route)
            .unwrap_or_else(|| follower.fallback(&maps, pose));
        let info = env.step(action)?;
        maps.sync_update(env.grid(), &info.update);
        since_refresh += 1;

        let pos = env.pose().position();
        let cost = match goal.as_ref() {
            Some(Goal::Frontier { field, .. }) => env
                .grid()
                .cell_of(pos)
                .map(|(ix, iy)| field.dist[env.grid().index(ix, iy)])
                .unwrap_or(f64::INFINITY),
            Some(g) => g.point().distance(pos),
            None => f64::INFINITY,
        };
        if cost < best_cost - 0.05 {
            best_cost = cost;
            since_progress = 0;
        } else {
            since_progress += 1;
        }
        if env.coverage() > last_coverage + 1e-3 {
            failures = 0;
            last_coverage = env.coverage();
        }
    }
    Ok(env.take_record())
}
