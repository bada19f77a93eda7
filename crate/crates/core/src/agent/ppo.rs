//! PPO machinery: rollout storage, GAE, the clipped-surrogate loss with its
//! analytic gradient, Adam, and the minibatch update loop.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{log_softmax, PolicyNetwork};
use super::Observation;
use crate::error::{Error, Result};
use crate::world::ActionCommand;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Minibatch size.
    pub batch_size: usize,
    pub max_episode_steps: usize,
    /// Total environment steps.
    pub total_steps: usize,
    /// Optional episode budget; training stops at whichever limit comes first.
    pub max_episodes: Option<usize>,
    pub gamma: f64,
    pub lr: f64,
    pub clip_eps: f64,
    pub gae_lambda: f64,
    pub epochs_per_update: usize,
    pub rollout_len: usize,
    pub vf_coef: f64,
    pub ent_coef: f64,
    pub max_grad_norm: f64,
    pub seed: u64,
    /// Write a checkpoint every this many updates (0 disables).
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            max_episode_steps: 5000,
            total_steps: 350_000,
            max_episodes: None,
            gamma: 0.99,
            lr: 3e-4,
            clip_eps: 0.2,
            gae_lambda: 0.95,
            epochs_per_update: 4,
            rollout_len: 2048,
            vf_coef: 0.5,
            ent_coef: 0.01,
            max_grad_norm: 0.5,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Precondition(format!("gamma {} not in (0, 1]", self.gamma)));
        }
        if !(self.clip_eps > 0.0) {
            return Err(Error::Precondition("clip_eps must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(Error::Precondition("gae_lambda must be in [0, 1]".into()));
        }
        if self.batch_size == 0 || self.rollout_len < self.batch_size {
            return Err(Error::Precondition(format!(
                "rollout_len {} must be at least batch_size {} > 0",
                self.rollout_len, self.batch_size
            )));
        }
        if self.epochs_per_update == 0 || self.max_episode_steps == 0 {
            return Err(Error::Precondition("epochs and episode steps must be positive".into()));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Precondition("lr must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Observation,
    pub action: ActionCommand,
    pub logprob: f64,
    pub reward: f64,
    pub value: f64,
    /// The episode ended after this transition (terminal or truncated; for
    /// truncation the bootstrap is already folded into `reward`).
    pub done: bool,
}

/// GAE advantages and returns. `last_value` is the value of the state that
/// follows the final transition; it is ignored when that transition is done.
pub fn gae_advantages(
    transitions: &[Transition],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = transitions.len();
    let mut adv = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n).rev() {
        let t = &transitions[i];
        let (next_value, live) = if t.done {
            (0.0, 0.0)
        } else if i + 1 < n {
            (transitions[i + 1].value, 1.0)
        } else {
            (last_value, 1.0)
        };
        let delta = t.reward + gamma * next_value * live - t.value;
        acc = delta + gamma * lambda * live * acc;
        adv[i] = acc;
    }
    let ret = adv.iter().zip(transitions).map(|(a, t)| a + t.value).collect();
    (adv, ret)
}

/// One training sample with its advantage already processed.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub obs: Vec<f64>,
    pub action: usize,
    pub old_logprob: f64,
    pub advantage: f64,
    pub ret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossCoefs {
    pub clip_eps: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
}

impl From<&TrainConfig> for LossCoefs {
    fn from(c: &TrainConfig) -> Self {
        Self {
            clip_eps: c.clip_eps,
            vf_coef: c.vf_coef,
            ent_coef: c.ent_coef,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

/// Minibatch loss
/// `−mean(min(r·A, clip(r)·A)) + c_v·mean((V − R)²) − c_e·mean(H)`;
/// when `grad` is given the exact gradient is accumulated into it.
pub fn ppo_loss(
    net: &PolicyNetwork,
    batch: &[Sample],
    coefs: &LossCoefs,
    mut grad: Option<&mut [f64]>,
) -> LossParts {
    let b = batch.len() as f64;
    let mut parts = LossParts::default();
    let mut clipped = 0usize;
    for s in batch {
        let cache = net.forward_cached(&s.obs);
        let logp = log_softmax(&cache.logits);
        let probs: Vec<f64> = logp.iter().map(|l| l.exp()).collect();
        let ratio = (logp[s.action] - s.old_logprob).exp();
        let clipped_ratio = ratio.clamp(1.0 - coefs.clip_eps, 1.0 + coefs.clip_eps);
        let unclipped_obj = ratio * s.advantage;
        let clipped_obj = clipped_ratio * s.advantage;
        let entropy = -probs.iter().zip(&logp).map(|(p, l)| p * l).sum::<f64>();
        let verr = cache.value - s.ret;

        parts.policy -= unclipped_obj.min(clipped_obj) / b;
        parts.value += verr * verr / b;
        parts.entropy += entropy / b;
        parts.approx_kl += ((ratio - 1.0) - (logp[s.action] - s.old_logprob)) / b;
        if (ratio - 1.0).abs() > coefs.clip_eps {
            clipped += 1;
        }

        if let Some(g) = grad.as_deref_mut() {
            // d(−min)/d(logπ_a); zero where the clipped branch is active
            let d_logp_a = if unclipped_obj <= clipped_obj {
                -s.advantage * ratio / b
            } else {
                0.0
            };
            let d_logits: Vec<f64> = (0..probs.len())
                .map(|j| {
                    let onehot = if j == s.action { 1.0 } else { 0.0 };
                    let pg = d_logp_a * (onehot - probs[j]);
                    let ent = coefs.ent_coef / b * probs[j] * (logp[j] + entropy);
                    pg + ent
                })
                .collect();
            let d_value = 2.0 * coefs.vf_coef * verr / b;
            net.backward(&cache, &d_logits, d_value, g);
        }
    }
    parts.clip_fraction = clipped as f64 / b;
    parts.total = parts.policy + coefs.vf_coef * parts.value - coefs.ent_coef * parts.entropy;
    parts
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Adam(Adam),
    /// Plain gradient descent; used as an oracle in tests.
    Sgd { lr: f64 },
}

impl Optimizer {
    pub fn adam(n: usize, lr: f64) -> Self {
        Optimizer::Adam(Adam::new(n, lr))
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= *lr * g;
                }
            }
            Optimizer::Adam(a) => {
                a.t += 1;
                let bc1 = 1.0 - a.beta1.powi(a.t as i32);
                let bc2 = 1.0 - a.beta2.powi(a.t as i32);
                for i in 0..params.len() {
                    a.m[i] = a.beta1 * a.m[i] + (1.0 - a.beta1) * grad[i];
                    a.v[i] = a.beta2 * a.v[i] + (1.0 - a.beta2) * grad[i] * grad[i];
                    let mh = a.m[i] / bc1;
                    let vh = a.v[i] / bc2;
                    params[i] -= a.lr * mh / (vh.sqrt() + a.eps);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    pub loss: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub minibatches: usize,
}

/// Rollout ready for optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub transitions: Vec<Transition>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Rollout {
    pub fn new(transitions: Vec<Transition>, last_value: f64, gamma: f64, lambda: f64) -> Self {
        let (advantages, returns) = gae_advantages(&transitions, last_value, gamma, lambda);
        Self {
            transitions,
            advantages,
            returns,
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }
}

/// Controls for [`ppo_update`] beyond the loss coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateSettings {
    pub coefs: LossCoefs,
    pub epochs: usize,
    pub batch_size: usize,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
}

impl From<&TrainConfig> for UpdateSettings {
    fn from(c: &TrainConfig) -> Self {
        Self {
            coefs: c.into(),
            epochs: c.epochs_per_update,
            batch_size: c.batch_size,
            max_grad_norm: c.max_grad_norm,
            normalize_advantages: true,
        }
    }
}

/// Runs `epochs` shuffled minibatch passes over `rollout`, updating `net` in
/// place. Stats are averaged over minibatches.
pub fn ppo_update<R: Rng + ?Sized>(
    net: &mut PolicyNetwork,
    rollout: &Rollout,
    settings: &UpdateSettings,
    opt: &mut Optimizer,
    rng: &mut R,
) -> Result<UpdateStats> {
    if rollout.len() < settings.batch_size || settings.batch_size == 0 {
        return Err(Error::Precondition(format!(
            "rollout of {} transitions is shorter than batch size {}",
            rollout.len(),
            settings.batch_size
        )));
    }
    let mut order: Vec<usize> = (0..rollout.len()).collect();
    let mut stats = UpdateStats::default();
    let mut grad = vec![0.0; net.num_params()];
    for _ in 0..settings.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(settings.batch_size) {
            let mut batch: Vec<Sample> = chunk
                .iter()
                .map(|&i| {
                    let t = &rollout.transitions[i];
                    Sample {
                        obs: t.obs.values.clone(),
                        action: t.action.index(),
                        old_logprob: t.logprob,
                        advantage: rollout.advantages[i],
                        ret: rollout.returns[i],
                    }
                })
                .collect();
            if settings.normalize_advantages && batch.len() > 1 {
                let n = batch.len() as f64;
                let mean = batch.iter().map(|s| s.advantage).sum::<f64>() / n;
                let var = batch.iter().map(|s| (s.advantage - mean).powi(2)).sum::<f64>() / (n - 1.0);
                let std = var.sqrt() + 1e-8;
                for s in &mut batch {
                    s.advantage = (s.advantage - mean) / std;
                }
            }
            grad.iter_mut().for_each(|g| *g = 0.0);
            let parts = ppo_loss(net, &batch, &settings.coefs, Some(&mut grad));
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "PPO loss {} (policy {}, value {}, entropy {})",
                    parts.total, parts.policy, parts.value, parts.entropy
                )));
            }
            if settings.max_grad_norm.is_finite() {
                let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > settings.max_grad_norm {
                    let k = settings.max_grad_norm / norm;
                    grad.iter_mut().for_each(|g| *g *= k);
                }
            }
            opt.step(net.params_mut(), &grad);

            stats.loss += parts.total;
            stats.policy_loss += parts.policy;
            stats.value_loss += parts.value;
            stats.entropy += parts.entropy;
            stats.approx_kl += parts.approx_kl;
            stats.clip_fraction += parts.clip_fraction;
            stats.minibatches += 1;
        }
    }
    let k = stats.minibatches as f64;
    stats.loss /= k;
    stats.policy_loss /= k;
    stats.value_loss /= k;
    stats.entropy /= k;
    stats.approx_kl /= k;
    stats.clip_fraction /= k;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::super::network::{softmax, Architecture};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(reward: f64, value: f64, done: bool) -> Transition {
        Transition {
            obs: Observation { values: vec![0.0; 25] },
            action: ActionCommand::Forward,
            logprob: -1.0,
            reward,
            value,
            done,
        }
    }

    #[test]
    fn gae_one_step() {
        let (a, r) = gae_advantages(&[tr(2.5, 0.7, true)], 123.0, 0.99, 0.95);
        assert!((a[0] - 1.8).abs() < 1e-15);
        assert!((r[0] - 2.5).abs() < 1e-15);
    }

    #[test]
    fn gae_discounted_sum() {
        let ts = [tr(1.0, 0.0, false), tr(1.0, 0.0, false), tr(1.0, 0.0, true)];
        let (a, _) = gae_advantages(&ts, 0.0, 0.99, 1.0);
        let expect = [1.0 + 0.99 + 0.99 * 0.99, 1.0 + 0.99, 1.0];
        for (x, e) in a.iter().zip(expect) {
            assert!((x - e).abs() < 1e-12);
        }
        assert!((a[0] - 2.9701).abs() < 1e-12);
    }

    #[test]
    fn gae_lambda_zero_is_td() {
        let ts = [tr(0.3, 0.5, false), tr(-0.2, 1.5, false), tr(0.8, -0.4, false)];
        let last = 2.0;
        let (a, _) = gae_advantages(&ts, last, 0.9, 0.0);
        let next = [1.5, -0.4, last];
        for i in 0..3 {
            let td = ts[i].reward + 0.9 * next[i] - ts[i].value;
            assert!((a[i] - td).abs() < 1e-15);
        }
    }

    #[test]
    fn gae_stops_at_episode_boundary() {
        let ts = [tr(1.0, 0.0, true), tr(5.0, 0.0, true)];
        let (a, _) = gae_advantages(&ts, 0.0, 0.99, 0.95);
        assert_eq!(a, vec![1.0, 5.0]);
    }

    fn random_batch(net: &PolicyNetwork, n: usize, rng: &mut ChaCha8Rng) -> Vec<Sample> {
        (0..n)
            .map(|_| {
                let obs: Vec<f64> = (0..25).map(|_| rng.random()).collect();
                let (logits, _) = net.forward(&obs);
                let action = rng.random_range(0..3);
                let old = log_softmax(&logits)[action] + rng.random_range(-0.05..0.05);
                Sample {
                    obs,
                    action,
                    old_logprob: old,
                    advantage: rng.random_range(-1.0..1.0),
                    ret: rng.random_range(-1.0..1.0),
                }
            })
            .collect()
    }

    #[test]
    fn zero_advantage_and_coefficients_give_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = PolicyNetwork::init(Architecture::default(), 3);
        let mut batch = random_batch(&net, 16, &mut rng);
        batch.iter_mut().for_each(|s| s.advantage = 0.0);
        let coefs = LossCoefs {
            clip_eps: 0.2,
            vf_coef: 0.0,
            ent_coef: 0.0,
        };
        let mut g = vec![0.0; net.num_params()];
        ppo_loss(&net, &batch, &coefs, Some(&mut g));
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_advantage_leaves_only_value_and_entropy_terms() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = PolicyNetwork::init(Architecture::default(), 4);
        let mut batch = random_batch(&net, 8, &mut rng);
        batch.iter_mut().for_each(|s| s.advantage = 0.0);
        let full = LossCoefs {
            clip_eps: 0.2,
            vf_coef: 0.5,
            ent_coef: 0.01,
        };
        let mut g_full = vec![0.0; net.num_params()];
        let parts = ppo_loss(&net, &batch, &full, Some(&mut g_full));
        assert_eq!(parts.policy, 0.0);
        // value and entropy gradients alone, computed by separate calls
        let mut g_v = vec![0.0; net.num_params()];
        ppo_loss(&net, &batch, &LossCoefs { ent_coef: 0.0, ..full }, Some(&mut g_v));
        let mut g_e = vec![0.0; net.num_params()];
        ppo_loss(&net, &batch, &LossCoefs { vf_coef: 0.0, ..full }, Some(&mut g_e));
        for i in 0..g_full.len() {
            assert!((g_full[i] - g_v[i] - g_e[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn identical_policy_has_unit_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = PolicyNetwork::init(Architecture::default(), 5);
        let mut batch = random_batch(&net, 32, &mut rng);
        for s in &mut batch {
            let (l, _) = net.forward(&s.obs);
            s.old_logprob = log_softmax(&l)[s.action];
        }
        let parts = ppo_loss(&net, &batch, &LossCoefs::from(&TrainConfig::default()), None);
        assert_eq!(parts.clip_fraction, 0.0);
        assert!(parts.approx_kl.abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = PolicyNetwork::init(Architecture::default(), 6);
        let batch = random_batch(&net, 8, &mut rng);
        let coefs = LossCoefs::from(&TrainConfig::default());
        let mut g = vec![0.0; net.num_params()];
        ppo_loss(&net, &batch, &coefs, Some(&mut g));
        let h = 1e-5;
        let mut probe = net.clone();
        for i in (0..net.num_params()).step_by(53) {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + h;
            let up = ppo_loss(&probe, &batch, &coefs, None).total;
            probe.params_mut()[i] = orig - h;
            let down = ppo_loss(&probe, &batch, &coefs, None).total;
            probe.params_mut()[i] = orig;
            let fd = (up - down) / (2.0 * h);
            let denom = fd.abs().max(g[i].abs()).max(1e-8);
            assert!((fd - g[i]).abs() / denom < 1e-4 || (fd - g[i]).abs() < 1e-10, "param {i}");
        }
    }

    /// With no clipping and the rollout policy equal to the current one, one
    /// full-batch SGD step is the vanilla policy-gradient step
    /// `θ += lr · mean(A ∇log π(a|s))`, computed here independently by
    /// finite differences of the log-likelihood objective.
    #[test]
    fn unclipped_step_is_vanilla_policy_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let arch = Architecture {
            input: 25,
            hidden: 4,
            actions: 3,
        };
        let net = PolicyNetwork::init(arch, 8);
        let mut transitions = Vec::new();
        let mut advantages = Vec::new();
        for _ in 0..6 {
            let obs: Vec<f64> = (0..25).map(|_| rng.random()).collect();
            let (l, _) = net.forward(&obs);
            let a = rng.random_range(0..3);
            transitions.push(Transition {
                obs: Observation { values: obs },
                action: ActionCommand::from_index(a).unwrap(),
                logprob: log_softmax(&l)[a],
                reward: 0.0,
                value: 0.0,
                done: true,
            });
            advantages.push(rng.random_range(-1.0..1.0));
        }
        let rollout = Rollout {
            returns: vec![0.0; 6],
            advantages: advantages.clone(),
            transitions: transitions.clone(),
        };
        let settings = UpdateSettings {
            coefs: LossCoefs {
                clip_eps: f64::INFINITY,
                vf_coef: 0.0,
                ent_coef: 0.0,
            },
            epochs: 1,
            batch_size: 6,
            max_grad_norm: f64::INFINITY,
            normalize_advantages: false,
        };
        let lr = 0.1;
        let mut updated = net.clone();
        ppo_update(&mut updated, &rollout, &settings, &mut Optimizer::Sgd { lr }, &mut rng).unwrap();

        let objective = |n: &PolicyNetwork| {
            transitions
                .iter()
                .zip(&advantages)
                .map(|(t, a)| a * log_softmax(&n.forward(&t.obs.values).0)[t.action.index()])
                .sum::<f64>()
                / 6.0
        };
        let h = 1e-6;
        let mut probe = net.clone();
        for i in 0..net.num_params() {
            let orig = probe.params()[i];
            probe.params_mut()[i] = orig + h;
            let up = objective(&probe);
            probe.params_mut()[i] = orig - h;
            let down = objective(&probe);
            probe.params_mut()[i] = orig;
            let pg = (up - down) / (2.0 * h);
            let expected = net.params()[i] + lr * pg;
            assert!((updated.params()[i] - expected).abs() < 1e-8, "param {i}");
        }
    }

    #[test]
    fn update_favors_rewarded_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut net = PolicyNetwork::init(Architecture::default(), 9);
        let obs: Vec<f64> = (0..25).map(|_| rng.random()).collect();
        let (l, v) = net.forward(&obs);
        let before = softmax(&l)[0];
        let logp = log_softmax(&l);
        let transitions: Vec<Transition> = (0..64)
            .map(|k| {
                let a = k % 3;
                Transition {
                    obs: Observation { values: obs.clone() },
                    action: ActionCommand::from_index(a).unwrap(),
                    logprob: logp[a],
                    reward: if a == 0 { 1.0 } else { 0.0 },
                    value: v,
                    done: true,
                }
            })
            .collect();
        let rollout = Rollout::new(transitions, 0.0, 0.99, 0.95);
        let cfg = TrainConfig::default();
        let mut opt = Optimizer::adam(net.num_params(), cfg.lr);
        let stats = ppo_update(&mut net, &rollout, &(&cfg).into(), &mut opt, &mut rng).unwrap();
        assert!(stats.loss.is_finite());
        let after = softmax(&net.forward(&obs).0)[0];
        assert!(after > before, "{after} <= {before}");
    }

    #[test]
    fn short_rollout_rejected() {
        let mut net = PolicyNetwork::init(Architecture::default(), 1);
        let rollout = Rollout::new(vec![tr(0.0, 0.0, true)], 0.0, 0.99, 0.95);
        let cfg = TrainConfig::default();
        let mut opt = Optimizer::adam(net.num_params(), cfg.lr);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(ppo_update(&mut net, &rollout, &(&cfg).into(), &mut opt, &mut rng).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        assert!(TrainConfig { gamma: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { clip_eps: 0.0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { rollout_len: 10, ..Default::default() }.validate().is_err());
    }
}
