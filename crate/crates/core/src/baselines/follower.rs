//! Closed-loop executor shared by both baselines.
//!
//! The robot has no in-place rotation: every action advances it, and the
//! tightest turn is a circle of radius `v/ω`. Action choice is therefore a
//! short lookahead over action sequences, and a sequence is admissible only
//! if the robot can still keep moving safely afterwards: from its final pose
//! either a full turning circle is clear, or a bounded search finds a
//! continuation that reaches such a pose.

use std::collections::{HashMap, VecDeque};

use super::planner::{ClearanceMaps, DistanceField};
use crate::geometry::{normalize_angle, Vec2};
use crate::mapping::OccupancyGrid;
use crate::world::{integrate_unicycle, ActionCommand, ActionSet, Pose};

/// Spacing of collision samples along an arc, m.
const SAMPLE_SPACING: f64 = 0.05;
/// Band-inflated cost added to poses the field never reached.
const UNREACHED_COST: f64 = 1.0e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FollowerConfig {
    pub actions: ActionSet,
    pub dt: f64,
    /// Actions simulated per candidate sequence.
    pub depth: usize,
    /// Cost per radian of heading error toward the carrot point.
    pub heading_weight: f64,
    /// Distance along the route to the carrot point, m.
    pub carrot: f64,
    /// Maximum continuation depth when no turning circle is clear.
    pub escape_depth: usize,
    /// Node budget for that continuation search.
    pub escape_budget: usize,
}

impl FollowerConfig {
    pub fn new(actions: ActionSet, dt: f64) -> Self {
        Self {
            actions,
            dt,
            depth: 4,
            heading_weight: 0.15,
            carrot: 0.5,
            escape_depth: 12,
            escape_budget: 400,
        }
    }
}

/// What the executor steers toward.
#[derive(Debug, Clone, Copy)]
pub enum Route<'a> {
    /// Cost-to-go field rooted at the goal cell.
    Field {
        field: &'a DistanceField,
        grid: &'a OccupancyGrid,
    },
    /// Polyline of waypoints, first to last.
    Path(&'a [Vec2]),
}

impl Route<'_> {
    /// Remaining cost from `p` and a point further along the route.
    fn cost_and_carrot(&self, p: Vec2, carrot: f64) -> (f64, Vec2) {
        match *self {
            Route::Field { field, grid } => {
                let Some((ix, iy)) = grid.cell_of(p) else {
                    return (UNREACHED_COST * 2.0, p);
                };
                let mut idx = grid.index(ix, iy);
                let d = field.dist[idx];
                if !d.is_finite() {
                    return (UNREACHED_COST, p);
                }
                let mut walked = 0.0;
                while walked < carrot && field.prev[idx] != usize::MAX {
                    let next = field.prev[idx];
                    let (ax, ay) = grid.coords(idx);
                    let (bx, by) = grid.coords(next);
                    walked += grid.center(ax, ay).distance(grid.center(bx, by));
                    idx = next;
                }
                let (cx, cy) = grid.coords(idx);
                (d, grid.center(cx, cy))
            }
            Route::Path(path) => path_cost(path, p, carrot),
        }
    }
}

/// Lateral offset (weighted double) plus remaining arc length from the
/// closest point of the polyline.
fn path_cost(path: &[Vec2], p: Vec2, carrot: f64) -> (f64, Vec2) {
    match path.len() {
        0 => return (0.0, p),
        1 => return (2.0 * p.distance(path[0]), path[0]),
        _ => {}
    }
    let seg_len: Vec<f64> = path.windows(2).map(|w| w[0].distance(w[1])).collect();
    let mut tail = vec![0.0; seg_len.len() + 1];
    for i in (0..seg_len.len()).rev() {
        tail[i] = tail[i + 1] + seg_len[i];
    }
    let mut best = (f64::INFINITY, 0usize, 0.0);
    for (i, w) in path.windows(2).enumerate() {
        let ab = w[1] - w[0];
        let t = if seg_len[i] > 0.0 {
            ((p - w[0]).dot(ab) / (seg_len[i] * seg_len[i])).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let proj = w[0] + ab * t;
        let c = 2.0 * p.distance(proj) + (1.0 - t) * seg_len[i] + tail[i + 1];
        if c < best.0 {
            best = (c, i, t);
        }
    }
    let (cost, mut i, t) = best;
    // walk `carrot` meters forward from the projection
    let mut left = carrot + t * seg_len[i];
    while i < seg_len.len() && left > seg_len[i] {
        left -= seg_len[i];
        i += 1;
    }
    let target = if i >= seg_len.len() {
        *path.last().unwrap()
    } else {
        path[i] + (path[i + 1] - path[i]) * (left / seg_len[i].max(1e-12))
    };
    (cost, target)
}

fn heading_error(pose: Pose, target: Vec2) -> f64 {
    let d = target - pose.position();
    if d.norm() < 1e-9 {
        return 0.0;
    }
    normalize_angle(d.y.atan2(d.x) - pose.theta).abs()
}

/// A way to keep moving forever: `prefix` then `circle` repeated.
#[derive(Debug, Clone, PartialEq)]
pub struct Escape {
    pub prefix: Vec<ActionCommand>,
    pub circle: ActionCommand,
}

type PoseKey = (i64, i64, i64);

#[derive(Debug)]
pub struct Follower {
    cfg: FollowerConfig,
    /// Deepest search done per pose this decision, and what it found.
    escape_memo: HashMap<PoseKey, (usize, Option<Escape>)>,
    budget: usize,
    /// Remainder of the last admissible plan, followed when no fresh plan
    /// is admissible.
    committed: VecDeque<ActionCommand>,
    committed_circle: Option<ActionCommand>,
}

impl Follower {
    pub fn new(cfg: FollowerConfig) -> Self {
        Self {
            cfg,
            escape_memo: HashMap::new(),
            budget: 0,
            committed: VecDeque::new(),
            committed_circle: None,
        }
    }

    pub fn config(&self) -> &FollowerConfig {
        &self.cfg
    }

    /// Drops the committed plan (new episode).
    pub fn reset(&mut self) {
        self.committed.clear();
        self.committed_circle = None;
    }

    fn advance(&self, pose: Pose, a: ActionCommand) -> Pose {
        integrate_unicycle(pose, self.cfg.actions.velocity(a), self.cfg.dt)
    }

    /// Every sample along the arc for `a` starting at `pose` is safe.
    pub fn arc_safe(&self, maps: &ClearanceMaps, pose: Pose, a: ActionCommand) -> bool {
        self.arc_check(pose, a, |p| maps.safe_point(p))
    }

    /// [`Self::arc_safe`] against the hard radius.
    pub fn arc_safe_hard(&self, maps: &ClearanceMaps, pose: Pose, a: ActionCommand) -> bool {
        self.arc_check(pose, a, |p| maps.safe_point_hard(p))
    }

    fn arc_check(&self, pose: Pose, a: ActionCommand, ok: impl Fn(Vec2) -> bool) -> bool {
        let cmd = self.cfg.actions.velocity(a);
        let len = cmd.v.abs() * self.cfg.dt;
        let n = (len / SAMPLE_SPACING).ceil().max(1.0) as usize;
        (1..=n).all(|k| {
            let t = self.cfg.dt * k as f64 / n as f64;
            ok(integrate_unicycle(pose, cmd, t).position())
        })
    }

    /// The full circle traced by repeating turn action `a` is safe.
    fn circle_safe(&self, maps: &ClearanceMaps, pose: Pose, a: ActionCommand) -> bool {
        let cmd = self.cfg.actions.velocity(a);
        if cmd.omega.abs() < 1e-12 || cmd.v.abs() < 1e-12 {
            return false;
        }
        let r = (cmd.v / cmd.omega).abs();
        let n = ((std::f64::consts::TAU * r) / SAMPLE_SPACING).ceil() as usize;
        let period = std::f64::consts::TAU / cmd.omega.abs();
        (1..n).all(|k| {
            let t = period * k as f64 / n as f64;
            maps.safe_point(integrate_unicycle(pose, cmd, t).position())
        })
    }

    /// A safe way to keep moving from `pose`: a clear turning circle now or
    /// after at most `depth` safe actions.
    pub fn escape(&mut self, maps: &ClearanceMaps, pose: Pose, depth: usize) -> Option<Escape> {
        // fine enough that a reused result belongs to the same pose up to
        // rounding, so committed plans replay exactly
        let key = (
            (pose.x / 1e-6).round() as i64,
            (pose.y / 1e-6).round() as i64,
            (pose.theta / 1e-6).round() as i64,
        );
        if let Some((d, found)) = self.escape_memo.get(&key) {
            if found.is_some() || *d >= depth {
                return found.clone();
            }
        }
        let mut found = [ActionCommand::TurnLeft, ActionCommand::TurnRight]
            .into_iter()
            .find(|&a| self.circle_safe(maps, pose, a))
            .map(|circle| Escape {
                prefix: Vec::new(),
                circle,
            });
        if found.is_none() && depth > 0 {
            for a in ActionCommand::ALL {
                if self.budget == 0 {
                    break;
                }
                self.budget -= 1;
                if !self.arc_safe(maps, pose, a) {
                    continue;
                }
                if let Some(mut e) = self.escape(maps, self.advance(pose, a), depth - 1) {
                    e.prefix.insert(0, a);
                    found = Some(e);
                    break;
                }
            }
        }
        self.escape_memo.insert(key, (depth, found.clone()));
        found
    }

    /// Best first action toward `route`. When no fresh sequence keeps an
    /// escape, the remainder of the last admissible plan is followed instead.
    /// `None` only when that is unsafe too.
    pub fn choose(&mut self, maps: &ClearanceMaps, pose: Pose, route: &Route) -> Option<ActionCommand> {
        self.escape_memo.clear();
        let mut best: Option<(f64, Vec<ActionCommand>, Escape)> = None;
        let mut seq = Vec::with_capacity(self.cfg.depth);
        self.search(maps, pose, route, &mut seq, f64::INFINITY, &mut best);
        if let Some((_, seq, esc)) = best {
            self.committed = seq[1..].iter().chain(&esc.prefix).copied().collect();
            self.committed_circle = Some(esc.circle);
            return Some(seq[0]);
        }
        let next = self.committed.front().copied().or(self.committed_circle)?;
        if !self.arc_safe_hard(maps, pose, next) {
            self.reset();
            return None;
        }
        self.committed.pop_front();
        Some(next)
    }

    fn search(
        &mut self,
        maps: &ClearanceMaps,
        pose: Pose,
        route: &Route,
        seq: &mut Vec<ActionCommand>,
        best_so_far: f64,
        best: &mut Option<(f64, Vec<ActionCommand>, Escape)>,
    ) {
        for a in ActionCommand::ALL {
            if !self.arc_safe(maps, pose, a) {
                continue;
            }
            let next = self.advance(pose, a);
            let (cost, carrot) = route.cost_and_carrot(next.position(), self.cfg.carrot);
            let score = best_so_far.min(
                cost + self.cfg.heading_weight * heading_error(next, carrot) + 1e-3 * seq.len() as f64,
            );
            seq.push(a);
            if seq.len() == self.cfg.depth {
                let improves = best.as_ref().is_none_or(|(s, _, _)| score < *s);
                if improves {
                    self.budget = self.cfg.escape_budget;
                    if let Some(esc) = self.escape(maps, next, self.cfg.escape_depth) {
                        *best = Some((score, seq.clone(), esc));
                    }
                }
            } else {
                self.search(maps, next, route, seq, score, best);
            }
            seq.pop();
        }
    }

    /// Any action whose first arc clears the hard radius, preferring one
    /// that keeps an escape; used when `choose` has nothing.
    pub fn fallback(&mut self, maps: &ClearanceMaps, pose: Pose) -> ActionCommand {
        let safe: Vec<ActionCommand> = ActionCommand::ALL
            .into_iter()
            .filter(|&a| self.arc_safe_hard(maps, pose, a))
            .collect();
        for &a in &safe {
            self.budget = self.cfg.escape_budget;
            if self.escape(maps, self.advance(pose, a), self.cfg.escape_depth).is_some() {
                return a;
            }
        }
        safe.first().copied().unwrap_or(ActionCommand::TurnLeft)
    }
}
