//! Learning agent: observation assembly, policy network, PPO training and
//! policy rollouts.

pub mod network;
pub mod ppo;

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{jittered_start, EnvConfig, EpisodeRecord, ExplorationEnv, TerminationCause};
use crate::error::{Error, Result};
use crate::sensor::NormalizedScan;
use crate::world::{ActionCommand, Pose, WorldMap};

pub use network::{Architecture, PolicyNetwork};
pub use ppo::{
    gae_advantages, ppo_loss, ppo_update, LossCoefs, LossParts, Optimizer, Rollout, Sample,
    TrainConfig, Transition, UpdateSettings, UpdateStats,
};

/// Policy input: the normalized scan followed by the coverage ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub values: Vec<f64>,
}

impl Observation {
    pub fn new(scan: &NormalizedScan, coverage: f64) -> Self {
        let mut values = Vec::with_capacity(scan.values.len() + 1);
        values.extend_from_slice(&scan.values);
        values.push(coverage.clamp(0.0, 1.0));
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn coverage(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ActionSelection {
    #[default]
    Greedy,
    Sample,
}

/// Chooses an action and reports its log-probability and the state value.
pub fn select_action<R: Rng + ?Sized>(
    net: &PolicyNetwork,
    obs: &Observation,
    selection: ActionSelection,
    rng: &mut R,
) -> (ActionCommand, f64, f64) {
    let (logits, value) = net.forward(&obs.values);
    let logp = network::log_softmax(&logits);
    let idx = match selection {
        ActionSelection::Greedy => network::argmax(&logits),
        ActionSelection::Sample => {
            let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
            network::sample_categorical(&probs, rng)
        }
    };
    let action = ActionCommand::from_index(idx).expect("network has three action logits");
    (action, logp[idx], value)
}

/// Rolls out `net` for one episode from `start`; `seed` drives sensor noise
/// and action sampling.
pub fn run_episode(
    env: &mut ExplorationEnv,
    net: &PolicyNetwork,
    selection: ActionSelection,
    start: Pose,
    seed: u64,
) -> Result<EpisodeRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut obs = env.reset(start, seed)?;
    while !env.is_done() {
        let (action, _, _) = select_action(net, &obs, selection, &mut rng);
        obs = env.step(action)?.observation;
    }
    Ok(env.take_record())
}

/// Per-episode training statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub episode: usize,
    /// Environment steps completed when the episode ended.
    pub global_step: usize,
    pub reward: f64,
    pub steps: usize,
    pub time_s: f64,
    pub path_length: f64,
    pub coverage: f64,
    pub cause: TerminationCause,
}

/// One row of the per-update training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateLog {
    pub update: usize,
    pub step: usize,
    /// Mean reward of episodes finished during this rollout (NaN if none).
    pub mean_reward: f64,
    pub loss: f64,
    pub kl: f64,
    pub clip_fraction: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: PolicyNetwork,
    pub episodes: Vec<EpisodeStats>,
    pub updates: Vec<UpdateLog>,
    pub steps: usize,
}

/// Radius of the start-position jitter used for training episodes, m.
pub const TRAIN_START_JITTER: f64 = 0.3;

/// Trains a fresh policy on `world`. `on_update` sees the network after every
/// PPO update (used for periodic checkpoints).
pub fn train(
    world: Arc<WorldMap>,
    env_cfg: EnvConfig,
    cfg: &TrainConfig,
    mut on_update: impl FnMut(&PolicyNetwork, &UpdateLog) -> Result<()>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let env_cfg = EnvConfig {
        max_steps: cfg.max_episode_steps,
        ..env_cfg
    };
    let mut env = ExplorationEnv::new(world.clone(), env_cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let arch = Architecture {
        input: env_cfg.scan_samples + 1,
        ..Architecture::default()
    };
    let mut net = PolicyNetwork::init(arch, rng.random());
    let mut opt = Optimizer::adam(net.num_params(), cfg.lr);
    let settings = UpdateSettings::from(cfg);

    let mut episodes = Vec::new();
    let mut updates = Vec::new();
    let mut buffer: Vec<Transition> = Vec::with_capacity(cfg.rollout_len);
    let mut rollout_rewards: Vec<f64> = Vec::new();
    let mut steps = 0usize;

    let new_episode = |env: &mut ExplorationEnv, rng: &mut ChaCha8Rng| {
        let start = jittered_start(
            &world,
            env_cfg.robot_radius,
            TRAIN_START_JITTER,
            std::f64::consts::PI,
            rng,
        );
        env.reset(start, rng.random())
    };
    let mut obs = new_episode(&mut env, &mut rng)?;
    let episode_budget_left = |n: usize| cfg.max_episodes.is_none_or(|m| n < m);

    while steps < cfg.total_steps && episode_budget_left(episodes.len()) {
        let (action, logprob, value) = select_action(&net, &obs, ActionSelection::Sample, &mut rng);
        let info = env.step(action)?;
        steps += 1;
        let mut reward = info.reward;
        if info.done == Some(TerminationCause::StepLimit) {
            // truncation: bootstrap from the value of the cut-off state
            reward += cfg.gamma * net.forward(&info.observation.values).1;
        }
        buffer.push(Transition {
            obs: obs.clone(),
            action,
            logprob,
            reward,
            value,
            done: info.done.is_some(),
        });
        if let Some(cause) = info.done {
            let rec = env.record();
            episodes.push(EpisodeStats {
                episode: episodes.len(),
                global_step: steps,
                reward: rec.total_reward,
                steps: rec.steps.len(),
                time_s: rec.time_s,
                path_length: rec.path_length,
                coverage: rec.completeness,
                cause,
            });
            rollout_rewards.push(rec.total_reward);
            obs = new_episode(&mut env, &mut rng)?;
        } else {
            obs = info.observation;
        }

        if buffer.len() == cfg.rollout_len {
            let last_done = buffer.last().is_some_and(|t| t.done);
            let last_value = if last_done { 0.0 } else { net.forward(&obs.values).1 };
            let rollout = Rollout::new(std::mem::take(&mut buffer), last_value, cfg.gamma, cfg.gae_lambda);
            let stats = ppo_update(&mut net, &rollout, &settings, &mut opt, &mut rng)?;
            let mean_reward = if rollout_rewards.is_empty() {
                f64::NAN
            } else {
                rollout_rewards.iter().sum::<f64>() / rollout_rewards.len() as f64
            };
            rollout_rewards.clear();
            let log = UpdateLog {
                update: updates.len() + 1,
                step: steps,
                mean_reward,
                loss: stats.loss,
                kl: stats.approx_kl,
                clip_fraction: stats.clip_fraction,
                entropy: stats.entropy,
            };
            on_update(&net, &log)?;
            updates.push(log);
        }
    }
    Ok(TrainOutcome {
        net,
        episodes,
        updates,
        steps,
    })
}

pub const CHECKPOINT_FORMAT: &str = "exploresim-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Serialized policy: flat parameters plus everything needed to rebuild and
/// interpret them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub architecture: Architecture,
    pub train: TrainConfig,
    pub env: EnvConfig,
    pub params: Vec<f64>,
}

impl Checkpoint {
    pub fn new(net: &PolicyNetwork, train: TrainConfig, env: EnvConfig) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            architecture: net.architecture(),
            train,
            env,
            params: net.params().to_vec(),
        }
    }

    pub fn network(&self) -> Result<PolicyNetwork> {
        PolicyNetwork::from_params(self.architecture, self.params.clone())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format {:?}", ck.format)));
        }
        if ck.version > CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "checkpoint version {} is newer than supported {}",
                ck.version, CHECKPOINT_VERSION
            )));
        }
        ck.network()?;
        Ok(ck)
    }
}
