//! Ground-truth environment and robot kinematics.
//!
//! A [`WorldMap`] is immutable vector geometry (wall segments and circular
//! obstacles inside a rectangular boundary). The robot is a disc moving under
//! unicycle kinematics; each [`ActionCommand`] maps to a fixed `(v, ω)` pair
//! and is integrated exactly along its arc.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{normalize_angle, Bounds, Circle, Segment, Vec2};

/// Default control period per action, seconds.
pub const DEFAULT_DT: f64 = 0.5;
/// Default typical exploration time stored with a world, seconds.
pub const DEFAULT_T_MAX: f64 = 600.0;
/// Default robot collision radius, meters.
pub const DEFAULT_ROBOT_RADIUS: f64 = 0.1;

const BISECTION_ITERS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Commanded linear and angular velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Velocity {
    pub v: f64,
    pub omega: f64,
}

impl Velocity {
    pub const fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }

    /// Euclidean norm of the planar velocity vector.
    pub fn speed(&self) -> f64 {
        self.v.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionCommand {
    Forward,
    TurnLeft,
    TurnRight,
}

impl ActionCommand {
    pub const ALL: [ActionCommand; 3] = [
        ActionCommand::Forward,
        ActionCommand::TurnLeft,
        ActionCommand::TurnRight,
    ];

    pub fn index(self) -> usize {
        match self {
            ActionCommand::Forward => 0,
            ActionCommand::TurnLeft => 1,
            ActionCommand::TurnRight => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

/// Velocity pair bound to each discrete action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionSet {
    pub forward: Velocity,
    pub turn_left: Velocity,
    pub turn_right: Velocity,
}

impl Default for ActionSet {
    fn default() -> Self {
        Self {
            forward: Velocity::new(0.2, 0.0),
            turn_left: Velocity::new(0.2, 0.4),
            turn_right: Velocity::new(0.2, -0.4),
        }
    }
}

impl ActionSet {
    pub fn velocity(&self, action: ActionCommand) -> Velocity {
        match action {
            ActionCommand::Forward => self.forward,
            ActionCommand::TurnLeft => self.turn_left,
            ActionCommand::TurnRight => self.turn_right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobotState {
    pub pose: Pose,
    pub commanded: Velocity,
    pub radius: f64,
    /// Elapsed simulated time, seconds.
    pub clock: f64,
}

impl RobotState {
    pub fn new(pose: Pose, radius: f64) -> Self {
        Self {
            pose: Pose::new(pose.x, pose.y, normalize_angle(pose.theta)),
            commanded: Velocity::default(),
            radius,
            clock: 0.0,
        }
    }
}

/// Result of advancing the robot by one control period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub state: RobotState,
    pub collided: bool,
    /// Straight-line distance between the old and new positions.
    pub distance: f64,
}

/// On-disk world description (JSON).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldFile {
    pub name: String,
    pub bounds: [f64; 4],
    #[serde(default)]
    pub segments: Vec<[f64; 4]>,
    #[serde(default)]
    pub circles: Vec<[f64; 3]>,
    /// Start pose `[x, y, theta]`; defaults to the bounds center facing +x.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<[f64; 3]>,
    /// Typical exploration time for this environment, seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    pub name: String,
    pub bounds: Bounds,
    pub segments: Vec<Segment>,
    pub circles: Vec<Circle>,
    pub start: Pose,
    pub t_max: f64,
    free_area: f64,
}

impl WorldMap {
    pub fn new(
        name: impl Into<String>,
        bounds: Bounds,
        segments: Vec<Segment>,
        circles: Vec<Circle>,
    ) -> Result<Self> {
        let start = Pose::new(
            0.5 * (bounds.xmin + bounds.xmax),
            0.5 * (bounds.ymin + bounds.ymax),
            0.0,
        );
        Self::with_start(name, bounds, segments, circles, start, DEFAULT_T_MAX)
    }

    pub fn with_start(
        name: impl Into<String>,
        bounds: Bounds,
        segments: Vec<Segment>,
        circles: Vec<Circle>,
        start: Pose,
        t_max: f64,
    ) -> Result<Self> {
        let name = name.into();
        if !(bounds.width() > 0.0 && bounds.height() > 0.0) {
            return Err(Error::InvalidWorld(format!(
                "{name}: bounds must have positive width and height"
            )));
        }
        for (i, s) in segments.iter().enumerate() {
            if !bounds.contains(s.a) || !bounds.contains(s.b) {
                return Err(Error::InvalidWorld(format!(
                    "{name}: segment {i} leaves the bounds"
                )));
            }
        }
        for (i, c) in circles.iter().enumerate() {
            let inside = c.radius > 0.0
                && c.center.x - c.radius >= bounds.xmin
                && c.center.x + c.radius <= bounds.xmax
                && c.center.y - c.radius >= bounds.ymin
                && c.center.y + c.radius <= bounds.ymax;
            if !inside {
                return Err(Error::InvalidWorld(format!(
                    "{name}: circle {i} is not contained in the bounds"
                )));
            }
        }
        if !bounds.contains(start.position()) {
            return Err(Error::InvalidWorld(format!("{name}: start pose outside bounds")));
        }
        if !(t_max > 0.0) {
            return Err(Error::InvalidWorld(format!("{name}: t_max must be positive")));
        }
        let free_area = bounds.area() - circles.iter().map(Circle::area).sum::<f64>();
        if !(free_area > 0.0) {
            return Err(Error::InvalidWorld(format!("{name}: no free area")));
        }
        Ok(Self {
            name,
            bounds,
            segments,
            circles,
            start: Pose::new(start.x, start.y, normalize_angle(start.theta)),
            t_max,
            free_area,
        })
    }

    pub fn from_file_data(file: WorldFile) -> Result<Self> {
        let [xmin, ymin, xmax, ymax] = file.bounds;
        let bounds = Bounds::new(xmin, ymin, xmax, ymax);
        let segments = file
            .segments
            .iter()
            .map(|s| Segment::new(Vec2::new(s[0], s[1]), Vec2::new(s[2], s[3])))
            .collect();
        let circles = file
            .circles
            .iter()
            .map(|c| Circle::new(Vec2::new(c[0], c[1]), c[2]))
            .collect();
        let start = file.start.map_or(
            Pose::new(0.5 * (xmin + xmax), 0.5 * (ymin + ymax), 0.0),
            |s| Pose::new(s[0], s[1], s[2]),
        );
        Self::with_start(
            file.name,
            bounds,
            segments,
            circles,
            start,
            file.t_max.unwrap_or(DEFAULT_T_MAX),
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WorldFile = serde_json::from_str(text)?;
        Self::from_file_data(file)
    }

    pub fn to_file_data(&self) -> WorldFile {
        WorldFile {
            name: self.name.clone(),
            bounds: [
                self.bounds.xmin,
                self.bounds.ymin,
                self.bounds.xmax,
                self.bounds.ymax,
            ],
            segments: self
                .segments
                .iter()
                .map(|s| [s.a.x, s.a.y, s.b.x, s.b.y])
                .collect(),
            circles: self
                .circles
                .iter()
                .map(|c| [c.center.x, c.center.y, c.radius])
                .collect(),
            start: Some([self.start.x, self.start.y, self.start.theta]),
            t_max: Some(self.t_max),
        }
    }

    /// Free-space area: bounds area minus obstacle area (m²).
    pub fn free_area(&self) -> f64 {
        self.free_area
    }

    /// True iff a disc at `center` with `radius` overlaps an obstacle or
    /// leaves the bounds. Touching is legal.
    pub fn check_collision(&self, center: Vec2, radius: f64) -> bool {
        let b = &self.bounds;
        if center.x - radius < b.xmin
            || center.x + radius > b.xmax
            || center.y - radius < b.ymin
            || center.y + radius > b.ymax
        {
            return true;
        }
        if self
            .circles
            .iter()
            .any(|c| center.distance(c.center) < c.radius + radius)
        {
            return true;
        }
        self.segments.iter().any(|s| s.distance_to(center) < radius)
    }

    /// Advances `state` by `dt` under `cmd`. The swept disc is checked along
    /// the arc; on contact the pose is clamped to the last collision-free
    /// point found by bisection.
    pub fn step_velocity(&self, state: &RobotState, cmd: Velocity, dt: f64) -> StepResult {
        debug_assert!(dt > 0.0);
        let start = state.pose;
        let mut next = *state;
        next.commanded = cmd;
        next.clock = state.clock + dt;

        if self.check_collision(start.position(), state.radius) {
            return StepResult {
                state: next,
                collided: true,
                distance: 0.0,
            };
        }

        let arc_len = cmd.v.abs() * dt;
        let spacing = (state.radius * 0.25).max(1e-3);
        let samples = ((arc_len / spacing).ceil() as usize).max(1);
        let at = |s: f64| integrate_unicycle(start, cmd, s * dt);

        let mut lo = 0.0;
        let mut hit = None;
        for k in 1..=samples {
            let s = k as f64 / samples as f64;
            if self.check_collision(at(s).position(), state.radius) {
                hit = Some(s);
                break;
            }
            lo = s;
        }

        let (pose, collided) = match hit {
            None => (at(1.0), false),
            Some(mut hi) => {
                for _ in 0..BISECTION_ITERS {
                    let mid = 0.5 * (lo + hi);
                    if self.check_collision(at(mid).position(), state.radius) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                (at(lo), true)
            }
        };
        next.pose = pose;
        StepResult {
            state: next,
            collided,
            distance: start.position().distance(pose.position()),
        }
    }

    /// Advances the robot by one discrete action using the default velocities.
    pub fn step(&self, state: &RobotState, action: ActionCommand, dt: f64) -> StepResult {
        self.step_velocity(state, ActionSet::default().velocity(action), dt)
    }
}

/// Reads and validates a world file.
pub fn load_world(path: impl AsRef<Path>) -> Result<WorldMap> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    WorldMap::from_json(&text)
}

/// Worlds compiled into the library, by name.
pub const BUNDLED_WORLDS: [(&str, &str); 5] = [
    ("env1", include_str!("../worlds/env1.json")),
    ("test_a", include_str!("../worlds/test_a.json")),
    ("test_b", include_str!("../worlds/test_b.json")),
    ("test_c", include_str!("../worlds/test_c.json")),
    ("train_4x4", include_str!("../worlds/train_4x4.json")),
];

/// The three evaluation worlds (56, 90 and 128 m²).
pub const TEST_WORLDS: [&str; 3] = ["test_a", "test_b", "test_c"];

pub fn bundled_world(name: &str) -> Result<WorldMap> {
    BUNDLED_WORLDS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::InvalidWorld(format!("no bundled world named {name:?}")))
        .and_then(|(_, text)| WorldMap::from_json(text))
}

/// A bundled world name, or else a path to a world file.
pub fn resolve_world(name_or_path: &str) -> Result<WorldMap> {
    if BUNDLED_WORLDS.iter().any(|(n, _)| *n == name_or_path) {
        bundled_world(name_or_path)
    } else {
        load_world(name_or_path)
    }
}

/// Exact unicycle integration over `t` seconds (straight line when ω = 0,
/// circular arc of radius v/ω otherwise).
pub fn integrate_unicycle(pose: Pose, cmd: Velocity, t: f64) -> Pose {
    let Velocity { v, omega } = cmd;
    let th = pose.theta;
    if omega.abs() < 1e-12 {
        return Pose::new(
            pose.x + v * t * th.cos(),
            pose.y + v * t * th.sin(),
            normalize_angle(th),
        );
    }
    let r = v / omega;
    let th2 = th + omega * t;
    Pose::new(
        pose.x + r * (th2.sin() - th.sin()),
        pose.y - r * (th2.cos() - th.cos()),
        normalize_angle(th2),
    )
}
