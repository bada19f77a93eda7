//! Episode simulation shared by the learning agent and the baseline planners.
//!
//! One [`ExplorationEnv::step`] runs the full per-action pipeline:
//! kinematics, LiDAR, grid update, covariance proxy, coverage, stagnation
//! detectors, termination and reward. Every controller goes through the same
//! code, so logged metrics are comparable by construction.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Observation;
use crate::error::{Error, Result};
use crate::geometry::normalize_angle;
use crate::lsd::{compute_epsilon, DetectorEvent, LsdConfig, StagnationDetector, StaticDetector};
use crate::mapping::{
    CoverageTracker, MapSnapshot, OccupancyGrid, ReachableMask, ScanUpdate, DEFAULT_RESOLUTION,
};
use crate::reward::{reward, RewardConfig, RewardMode, StepOutcome};
use crate::sensor::{downsample_normalize, scan_noisy, LidarConfig, LidarScan, NormalizedScan};
use crate::uncertainty::{d_optimality, observe_correct, propagate, PoseBelief, UncertaintyConfig};
use crate::world::{
    ActionCommand, ActionSet, Pose, RobotState, Velocity, WorldMap, DEFAULT_DT,
    DEFAULT_ROBOT_RADIUS,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub dt: f64,
    pub robot_radius: f64,
    pub actions: ActionSet,
    pub lidar: LidarConfig,
    /// Beams kept in the normalized scan.
    pub scan_samples: usize,
    pub resolution: f64,
    pub reward: RewardConfig,
    pub reward_mode: RewardMode,
    pub lsd: LsdConfig,
    /// Whether the stagnation detectors may terminate episodes.
    pub lsd_enabled: bool,
    /// Score detector terminations with the collision reward instead of the
    /// idle branch.
    pub detector_termination_penalty: bool,
    pub uncertainty: UncertaintyConfig,
    /// Coverage ratio that ends an episode as a success.
    pub success_coverage: f64,
    pub max_steps: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            robot_radius: DEFAULT_ROBOT_RADIUS,
            actions: ActionSet::default(),
            lidar: LidarConfig::default(),
            scan_samples: crate::sensor::DEFAULT_SAMPLES,
            resolution: DEFAULT_RESOLUTION,
            reward: RewardConfig::default(),
            reward_mode: RewardMode::PathUncertainty,
            lsd: LsdConfig::default(),
            lsd_enabled: true,
            detector_termination_penalty: false,
            uncertainty: UncertaintyConfig::default(),
            success_coverage: 0.95,
            max_steps: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationCause {
    Collision,
    StaticFlag,
    Stagnation,
    Success,
    StepLimit,
    /// No reachable frontier remains (planner baselines).
    ExplorationComplete,
    /// The controller gave up after repeated planning failures.
    Aborted,
}

impl TerminationCause {
    /// Whether the episode ended in a true terminal state (no bootstrapping).
    pub fn is_terminal(self) -> bool {
        !matches!(self, TerminationCause::StepLimit)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TerminationCause::Collision => "collision",
            TerminationCause::StaticFlag => "static_flag",
            TerminationCause::Stagnation => "stagnation",
            TerminationCause::Success => "success",
            TerminationCause::StepLimit => "step_limit",
            TerminationCause::ExplorationComplete => "exploration_complete",
            TerminationCause::Aborted => "aborted",
        }
    }
}

/// Per-step log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    /// Simulated time after the step, s.
    pub t: f64,
    pub action: ActionCommand,
    pub reward: f64,
    pub delta_c: f64,
    pub d_t: f64,
    pub c_t: f64,
    pub f_sigma: f64,
    pub similarity: Option<f64>,
    pub static_counter: u32,
    pub static_flag: bool,
    pub stagnant: bool,
    pub collided: bool,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub world: String,
    pub start: Pose,
    /// Area revealed by the scan taken at reset, m².
    pub initial_known_area: f64,
    pub initial_coverage: f64,
    pub steps: Vec<StepLog>,
    pub cause: Option<TerminationCause>,
    pub time_s: f64,
    pub path_length: f64,
    pub completeness: f64,
    pub total_reward: f64,
    pub events: Vec<DetectorEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_map: Option<MapSnapshot>,
}

impl EpisodeRecord {
    fn new(world: &str, start: Pose) -> Self {
        Self {
            world: world.to_string(),
            start,
            initial_known_area: 0.0,
            initial_coverage: 0.0,
            steps: Vec::new(),
            cause: None,
            time_s: 0.0,
            path_length: 0.0,
            completeness: 0.0,
            total_reward: 0.0,
            events: Vec::new(),
            final_map: None,
        }
    }

    /// `(t, c_t)` pairs starting at the reset scan.
    pub fn coverage_vs_time(&self) -> Vec<(f64, f64)> {
        std::iter::once((0.0, self.initial_coverage))
            .chain(self.steps.iter().map(|s| (s.t, s.c_t)))
            .collect()
    }

    /// `(cumulative path length, c_t)` pairs starting at the reset scan.
    pub fn coverage_vs_path(&self) -> Vec<(f64, f64)> {
        let mut dist = 0.0;
        std::iter::once((0.0, self.initial_coverage))
            .chain(self.steps.iter().map(|s| {
                dist += s.d_t;
                (dist, s.c_t)
            }))
            .collect()
    }

    pub fn trajectory(&self) -> Vec<(f64, f64)> {
        std::iter::once((self.start.x, self.start.y))
            .chain(self.steps.iter().map(|s| (s.x, s.y)))
            .collect()
    }
}

/// Outcome of a single environment step.
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub observation: Observation,
    pub reward: f64,
    pub done: Option<TerminationCause>,
    pub log: StepLog,
    pub update: ScanUpdate,
}

#[derive(Debug, Clone)]
pub struct ExplorationEnv {
    world: Arc<WorldMap>,
    cfg: EnvConfig,
    mask: Arc<ReachableMask>,
    epsilon: f64,
    state: RobotState,
    grid: OccupancyGrid,
    tracker: CoverageTracker,
    belief: PoseBelief,
    static_det: StaticDetector,
    stagnation: StagnationDetector,
    last_scan: NormalizedScan,
    last_raw: LidarScan,
    coverage: f64,
    record: EpisodeRecord,
    rng: ChaCha8Rng,
    slip: bool,
    done: bool,
}

impl ExplorationEnv {
    pub fn new(world: Arc<WorldMap>, cfg: EnvConfig) -> Result<Self> {
        if !(cfg.dt > 0.0) {
            return Err(Error::Precondition("dt must be positive".into()));
        }
        if cfg.scan_samples == 0 || crate::sensor::BEAMS % cfg.scan_samples != 0 {
            return Err(Error::Precondition(format!(
                "scan_samples {} must divide {}",
                cfg.scan_samples,
                crate::sensor::BEAMS
            )));
        }
        let grid = OccupancyGrid::for_world(&world, cfg.resolution);
        let mask = Arc::new(ReachableMask::compute(&world, &grid, world.start.position()));
        if mask.count() == 0 {
            return Err(Error::InvalidWorld(format!(
                "{}: start pose is not in free space",
                world.name
            )));
        }
        let epsilon = compute_epsilon(world.free_area(), world.t_max, cfg.lsd.beta)?;
        let start = world.start;
        let mut env = Self {
            tracker: CoverageTracker::new(&mask),
            world,
            mask,
            epsilon,
            state: RobotState::new(start, cfg.robot_radius),
            grid,
            belief: PoseBelief::isotropic(start, cfg.uncertainty.initial_variance),
            static_det: StaticDetector::from_config(&cfg.lsd),
            stagnation: StagnationDetector::new(epsilon, cfg.lsd.window_t, 0.0),
            last_scan: NormalizedScan { values: vec![] },
            last_raw: LidarScan {
                raw: vec![],
                max_range: cfg.lidar.max_range,
            },
            coverage: 0.0,
            record: EpisodeRecord::new("", start),
            rng: ChaCha8Rng::seed_from_u64(0),
            slip: false,
            done: true,
            cfg,
        };
        env.reset(start, 0)?;
        Ok(env)
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn world(&self) -> &Arc<WorldMap> {
        &self.world
    }

    pub fn grid(&self) -> &OccupancyGrid {
        &self.grid
    }

    pub fn mask(&self) -> &ReachableMask {
        &self.mask
    }

    pub fn state(&self) -> &RobotState {
        &self.state
    }

    pub fn pose(&self) -> Pose {
        self.state.pose
    }

    pub fn belief(&self) -> &PoseBelief {
        &self.belief
    }

    pub fn coverage(&self) -> f64 {
        self.coverage
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn steps_taken(&self) -> usize {
        self.record.steps.len()
    }

    pub fn last_scan(&self) -> &LidarScan {
        &self.last_raw
    }

    pub fn record(&self) -> &EpisodeRecord {
        &self.record
    }

    /// Emulates wheel slip: commands are accepted but the pose stays frozen.
    pub fn set_slip(&mut self, slip: bool) {
        self.slip = slip;
    }

    /// Starts a new episode at `start`; `seed` drives sensor noise.
    pub fn reset(&mut self, start: Pose, seed: u64) -> Result<Observation> {
        if self.world.check_collision(start.position(), self.cfg.robot_radius) {
            return Err(Error::Precondition(format!(
                "start pose ({:.3}, {:.3}) is in collision",
                start.x, start.y
            )));
        }
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = RobotState::new(start, self.cfg.robot_radius);
        self.grid = OccupancyGrid::for_world(&self.world, self.cfg.resolution);
        self.tracker = CoverageTracker::new(&self.mask);
        self.belief = PoseBelief::isotropic(self.state.pose, self.cfg.uncertainty.initial_variance);
        self.static_det.reset();
        self.stagnation.reset(0.0);
        self.slip = false;
        self.done = false;
        self.record = EpisodeRecord::new(&self.world.name, self.state.pose);

        let raw = scan_noisy(&self.state.pose, &self.world, &self.cfg.lidar, &mut self.rng);
        let update = self.grid.integrate_scan(&self.state.pose, &raw);
        let report = self.tracker.update(&self.mask, &update, self.cfg.dt);
        self.coverage = report.c_t;
        self.last_scan = downsample_normalize(&raw, self.cfg.scan_samples)?;
        self.last_raw = raw;
        self.static_det.update(&self.last_scan)?;
        self.record.initial_known_area = update.delta_c;
        self.record.initial_coverage = report.c_t;
        self.record.completeness = report.c_t;
        Ok(self.observation())
    }

    pub fn observation(&self) -> Observation {
        Observation::new(&self.last_scan, self.coverage)
    }

    /// Ends the episode on behalf of the controller (planner baselines).
    pub fn terminate(&mut self, cause: TerminationCause) {
        if !self.done {
            self.done = true;
            self.record.cause = Some(cause);
        }
    }

    pub fn step(&mut self, action: ActionCommand) -> Result<StepInfo> {
        if self.done {
            return Err(Error::Precondition("step called on a finished episode".into()));
        }
        let dt = self.cfg.dt;
        let cmd: Velocity = self.cfg.actions.velocity(action);

        let (collided, d_t) = if self.slip {
            self.state.commanded = cmd;
            self.state.clock += dt;
            (false, 0.0)
        } else {
            let r = self.world.step_velocity(&self.state, cmd, dt);
            self.state = r.state;
            (r.collided, r.distance)
        };
        let now = self.state.clock;

        let raw = scan_noisy(&self.state.pose, &self.world, &self.cfg.lidar, &mut self.rng);
        let update = self.grid.integrate_scan(&self.state.pose, &raw);
        let report = self.tracker.update(&self.mask, &update, dt);
        self.coverage = report.c_t;

        let moved = propagate(&self.belief, cmd, dt, &self.cfg.uncertainty);
        let mut belief = observe_correct(
            &moved,
            update.reobservation_fraction(),
            self.cfg.uncertainty.correction_gain,
        );
        belief.mean = self.state.pose;
        self.belief = belief;
        let f_sigma = d_optimality(&self.belief.sigma)?;

        self.last_scan = downsample_normalize(&raw, self.cfg.scan_samples)?;
        self.last_raw = raw;
        let static_flag = self.static_det.update(&self.last_scan)?;
        let stagnant = self.stagnation.update(report.c_dot, cmd.speed(), now)?;

        let step_index = self.record.steps.len() + 1;
        let cause = if collided {
            Some(TerminationCause::Collision)
        } else if self.cfg.lsd_enabled && static_flag {
            Some(TerminationCause::StaticFlag)
        } else if self.cfg.lsd_enabled && stagnant {
            Some(TerminationCause::Stagnation)
        } else if self.coverage >= self.cfg.success_coverage {
            Some(TerminationCause::Success)
        } else if step_index >= self.cfg.max_steps {
            Some(TerminationCause::StepLimit)
        } else {
            None
        };

        if self.cfg.lsd_enabled {
            if static_flag {
                self.record.events.push(DetectorEvent::Static {
                    t: now,
                    counter: self.static_det.counter(),
                    similarity: self.static_det.last_similarity().unwrap_or(1.0),
                });
            }
            if stagnant {
                let w = self.stagnation.window_stats();
                self.record.events.push(DetectorEvent::Stagnation {
                    t: now,
                    epsilon: self.epsilon,
                    window_samples: w.samples,
                    window_max_rate: w.max_rate,
                    window_mean_rate: w.mean_rate,
                });
            }
        }

        let detector_stop = matches!(
            cause,
            Some(TerminationCause::StaticFlag | TerminationCause::Stagnation)
        );
        let outcome = StepOutcome {
            delta_c: report.delta_c,
            d_t,
            f_sigma,
            done_collision: collided || (detector_stop && self.cfg.detector_termination_penalty),
        };
        let r = reward(&outcome, &self.cfg.reward, self.cfg.reward_mode);
        if !r.is_finite() {
            return Err(Error::NonFinite(format!("reward at step {step_index}")));
        }

        let pose = self.state.pose;
        let log = StepLog {
            step: step_index,
            t: now,
            action,
            reward: r,
            delta_c: report.delta_c,
            d_t,
            c_t: self.coverage,
            f_sigma,
            similarity: self.static_det.last_similarity(),
            static_counter: self.static_det.counter(),
            static_flag,
            stagnant,
            collided,
            x: pose.x,
            y: pose.y,
            theta: pose.theta,
        };
        self.record.steps.push(log.clone());
        self.record.time_s = now;
        self.record.path_length += d_t;
        self.record.completeness = self.coverage;
        self.record.total_reward += r;
        if let Some(c) = cause {
            self.done = true;
            self.record.cause = Some(c);
        }

        Ok(StepInfo {
            observation: self.observation(),
            reward: r,
            done: cause,
            log,
            update,
        })
    }

    /// Takes the finished record, attaching the final map snapshot.
    pub fn take_record(&mut self) -> EpisodeRecord {
        let mut rec = std::mem::replace(
            &mut self.record,
            EpisodeRecord::new(&self.world.name, self.state.pose),
        );
        rec.final_map = Some(self.grid.snapshot());
        rec
    }
}

/// Samples a collision-free start near the world's nominal start: position
/// within `radius` meters, heading within `±heading` radians.
pub fn jittered_start<R: Rng + ?Sized>(
    world: &WorldMap,
    robot_radius: f64,
    radius: f64,
    heading: f64,
    rng: &mut R,
) -> Pose {
    let base = world.start;
    for _ in 0..100 {
        let r = radius * rng.random::<f64>().sqrt();
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let th = if heading > 0.0 {
            rng.random_range(-heading..heading)
        } else {
            0.0
        };
        let p = Pose::new(
            base.x + r * a.cos(),
            base.y + r * a.sin(),
            normalize_angle(base.theta + th),
        );
        if world.bounds.contains(p.position())
            && !world.check_collision(p.position(), robot_radius + 0.05)
        {
            return p;
        }
    }
    base
}
