//! Experiment runner: run configuration, multi-trial evaluation, training and
//! ablation drivers, aggregation, and artifact rendering.
//!
//! Every run writes into `<out_dir>/<run-id>/` where the run id is derived
//! from the canonical JSON of its [`RunConfig`], so identical configurations
//! land in the same directory and produce identical bytes.

pub mod eval;
pub mod render;
pub mod stats;
pub mod train;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{ActionSelection, TrainConfig};
use crate::baselines::{BaselineConfig, Method};
use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::reward::RewardMode;
use crate::world::{resolve_world, WorldMap};

pub use eval::{evaluate, EvalReport, TrialSummary};
pub use stats::{mean_std, milestone_episode, representative_index, MeanStd};
pub use train::{ablate, run_training, AblationArm, AblationReport, ArmReport, TrainReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RunMethod {
    #[default]
    Drl,
    Frontier,
    Rrt,
}

impl RunMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMethod::Drl => "drl",
            RunMethod::Frontier => "frontier",
            RunMethod::Rrt => "rrt",
        }
    }

    pub fn baseline(self) -> Option<Method> {
        match self {
            RunMethod::Drl => None,
            RunMethod::Frontier => Some(Method::Frontier),
            RunMethod::Rrt => Some(Method::Rrt),
        }
    }
}

impl std::str::FromStr for RunMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drl" => Ok(RunMethod::Drl),
            "frontier" => Ok(RunMethod::Frontier),
            "rrt" => Ok(RunMethod::Rrt),
            other => Err(Error::Parse(format!("unknown method {other:?} (drl, frontier, rrt)"))),
        }
    }
}

/// Start-pose jitter for evaluation trials: position radius (m) and heading
/// half-range (rad) around the world's nominal start.
pub const EVAL_START_RADIUS: f64 = 0.3;
pub const EVAL_HEADING_JITTER: f64 = 0.5;

/// Everything a run depends on. Serialized canonically for the run id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Bundled world name or path to a world JSON file.
    pub world: String,
    pub method: RunMethod,
    pub trials: usize,
    pub seed: u64,
    /// Stagnation detectors may end episodes.
    pub lsd_on: bool,
    /// Path-uncertainty reward; off means the uncertainty-only reward.
    pub pur_on: bool,
    pub out_dir: PathBuf,
    /// Policy checkpoint for `drl` evaluation.
    pub checkpoint: Option<PathBuf>,
    pub selection: ActionSelection,
    pub train: TrainConfig,
    /// Environment parameters; `lsd_enabled` and `reward_mode` are taken
    /// from the toggles above.
    pub env: EnvConfig,
    pub baseline: BaselineConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            world: "test_a".into(),
            method: RunMethod::Drl,
            trials: 10,
            seed: 0,
            lsd_on: true,
            pur_on: true,
            out_dir: PathBuf::from("out"),
            checkpoint: None,
            selection: ActionSelection::Greedy,
            train: TrainConfig::default(),
            env: EnvConfig::default(),
            baseline: BaselineConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Precondition("trials must be at least 1".into()));
        }
        self.train.validate()
    }

    /// Environment configuration with the toggles applied. Planner baselines
    /// never use detector termination.
    pub fn env_config(&self) -> EnvConfig {
        EnvConfig {
            lsd_enabled: self.lsd_on && self.method == RunMethod::Drl,
            reward_mode: if self.pur_on {
                RewardMode::PathUncertainty
            } else {
                RewardMode::UncertaintyOnly
            },
            ..self.env
        }
    }

    pub fn load_world(&self) -> Result<WorldMap> {
        resolve_world(&self.world)
    }

    /// Pretty JSON used both for `config.json` and for hashing.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON, prefixed
    /// with the command so train/eval/ablate of one config do not collide.
    pub fn run_id(&self, command: &str) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        format!("{command}-{}", &hex::encode(digest)[..16])
    }

    pub fn run_dir(&self, command: &str) -> PathBuf {
        self.out_dir.join(self.run_id(command))
    }
}

/// Creates `dir` and writes `config.json` into it.
pub(crate) fn prepare_run_dir(cfg: &RunConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_text(&dir.join("config.json"), &(cfg.canonical_json() + "\n"))
}

/// Static facts about a world plus the coverage of its first scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldReport {
    pub name: String,
    pub bounds: [f64; 4],
    pub segments: usize,
    pub circles: usize,
    pub free_area: f64,
    pub reachable_area: f64,
    pub start: [f64; 3],
    pub start_clear: bool,
    pub initial_coverage: f64,
    pub t_max: f64,
}

pub fn world_report(world: &WorldMap, env_cfg: &EnvConfig) -> Result<WorldReport> {
    let start = world.start;
    let start_clear = world.bounds.contains(start.position())
        && !world.check_collision(start.position(), env_cfg.robot_radius);
    let mut env = crate::env::ExplorationEnv::new(std::sync::Arc::new(world.clone()), *env_cfg)?;
    let initial_coverage = if start_clear {
        env.reset(start, 0)?;
        env.coverage()
    } else {
        0.0
    };
    let b = world.bounds;
    Ok(WorldReport {
        name: world.name.clone(),
        bounds: [b.xmin, b.ymin, b.xmax, b.ymax],
        segments: world.segments.len(),
        circles: world.circles.len(),
        free_area: world.free_area(),
        reachable_area: env.mask().area(env_cfg.resolution),
        start: [start.x, start.y, start.theta],
        start_clear,
        initial_coverage,
        t_max: world.t_max,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    csv::Writer::from_path(path).map_err(|e| csv_error(path, e))
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}
