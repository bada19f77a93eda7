//! Path–uncertainty co-optimization reward.
//!
//! ```text
//! R_t = 1 + tanh(η / f(Σ)) + P_t    if Δc_t > 0
//!       0.001 + P_t                 else if not done
//!       -100                        otherwise (collision)
//!
//! P_t = -0.1 · d_t   if η_t < 0.001 and d_t > 0.001, else 0
//! η_t = Δc_t / d_t
//! ```

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    /// Task-dependent scale factor η.
    pub eta_scale: f64,
    pub idle_reward: f64,
    pub collision_reward: f64,
    pub penalty_gain: f64,
    /// Efficiency below which travel is penalized, m²/m.
    pub eff_threshold: f64,
    /// Minimum step distance for the penalty to apply, m.
    pub dist_threshold: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            eta_scale: 1.0,
            idle_reward: 0.001,
            collision_reward: -100.0,
            penalty_gain: 0.1,
            eff_threshold: 0.001,
            dist_threshold: 0.001,
        }
    }
}

/// Which reward drives learning. `UncertaintyOnly` is the ablation baseline:
/// `tanh(η / f(Σ))` per step and the collision penalty, with no coverage or
/// path term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    #[default]
    PathUncertainty,
    UncertaintyOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    /// Newly known area, m².
    pub delta_c: f64,
    /// Distance travelled this step, m.
    pub d_t: f64,
    /// D-optimality of the pose covariance.
    pub f_sigma: f64,
    pub done_collision: bool,
}

/// Newly mapped area per meter travelled; `+∞` when the robot did not move.
pub fn exploration_efficiency(delta_c: f64, d_t: f64) -> f64 {
    if d_t > 0.0 {
        delta_c / d_t
    } else {
        f64::INFINITY
    }
}

pub fn path_penalty(delta_c: f64, d_t: f64, cfg: &RewardConfig) -> f64 {
    let eta_t = exploration_efficiency(delta_c, d_t);
    if eta_t < cfg.eff_threshold && d_t > cfg.dist_threshold {
        -cfg.penalty_gain * d_t
    } else {
        0.0
    }
}

pub fn step_reward(outcome: &StepOutcome, cfg: &RewardConfig) -> f64 {
    if outcome.done_collision {
        return cfg.collision_reward;
    }
    let penalty = path_penalty(outcome.delta_c, outcome.d_t, cfg);
    if outcome.delta_c > 0.0 {
        1.0 + (cfg.eta_scale / outcome.f_sigma).tanh() + penalty
    } else {
        cfg.idle_reward + penalty
    }
}

pub fn uncertainty_only_reward(outcome: &StepOutcome, cfg: &RewardConfig) -> f64 {
    if outcome.done_collision {
        cfg.collision_reward
    } else {
        (cfg.eta_scale / outcome.f_sigma).tanh()
    }
}

pub fn reward(outcome: &StepOutcome, cfg: &RewardConfig, mode: RewardMode) -> f64 {
    match mode {
        RewardMode::PathUncertainty => step_reward(outcome, cfg),
        RewardMode::UncertaintyOnly => uncertainty_only_reward(outcome, cfg),
    }
}
