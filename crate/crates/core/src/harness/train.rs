//! Training runs and the three-arm ablation.

use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::render::{line_plot_svg, Series};
use super::stats::{mean_of, mean_std, milestone_episode, MeanStd};
use super::{csv_error, csv_writer, prepare_run_dir, write_json, write_text, RunConfig, RunMethod};
use crate::agent::{train, Checkpoint, EpisodeStats, TrainConfig, TrainOutcome, UpdateLog};
use crate::error::{Error, Result};

/// Coverage level and trailing window that define the convergence milestone.
pub const MILESTONE_COVERAGE: f64 = 0.5;
pub const MILESTONE_WINDOW: usize = 50;
/// Episodes averaged at each end of a run for the reward-trend check.
pub const REWARD_WINDOW: usize = 50;

/// Training configuration for a run: the overlay with the run seed.
pub fn train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        seed: cfg.seed,
        ..cfg.train
    }
}

/// Trains one policy without writing anything.
pub fn train_outcome(cfg: &RunConfig, on_update: impl FnMut(&crate::agent::PolicyNetwork, &UpdateLog) -> Result<()>) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.method != RunMethod::Drl {
        return Err(Error::Precondition(format!("cannot train method {}", cfg.method.as_str())));
    }
    let world = Arc::new(cfg.load_world()?);
    train(world, cfg.env_config(), &train_config(cfg), on_update)
}

/// Learning-curve digest of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSummary {
    pub seed: u64,
    pub episodes: usize,
    pub steps: usize,
    pub first_reward: f64,
    pub last_reward: f64,
    /// First episode whose trailing-window mean coverage reaches
    /// [`MILESTONE_COVERAGE`] (`episodes` if never).
    pub milestone_episode: usize,
}

impl CurveSummary {
    pub fn new(seed: u64, episodes: &[EpisodeStats], steps: usize) -> Self {
        let rewards: Vec<f64> = episodes.iter().map(|e| e.reward).collect();
        let coverage: Vec<f64> = episodes.iter().map(|e| e.coverage).collect();
        let k = REWARD_WINDOW.min(rewards.len());
        Self {
            seed,
            episodes: episodes.len(),
            steps,
            first_reward: mean_of(&rewards[..k]),
            last_reward: mean_of(&rewards[rewards.len() - k..]),
            milestone_episode: milestone_episode(&coverage, MILESTONE_COVERAGE, MILESTONE_WINDOW),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub run_id: String,
    pub world: String,
    pub lsd_on: bool,
    pub pur_on: bool,
    pub curve: CurveSummary,
    pub updates: usize,
    pub policy: PathBuf,
}

#[derive(Debug, Serialize, Deserialize)]
struct EpisodeRow {
    episode: usize,
    global_step: usize,
    reward: f64,
    steps: usize,
    time_s: f64,
    path_length: f64,
    coverage: f64,
    cause: String,
}

pub fn write_episodes(path: &Path, episodes: &[EpisodeStats]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for e in episodes {
        w.serialize(EpisodeRow {
            episode: e.episode,
            global_step: e.global_step,
            reward: e.reward,
            steps: e.steps,
            time_s: e.time_s,
            path_length: e.path_length,
            coverage: e.coverage,
            cause: e.cause.as_str().into(),
        })
        .map_err(|err| csv_error(path, err))?;
    }
    w.flush().map_err(|err| Error::io(path, err))
}

fn write_updates(path: &Path, updates: &[UpdateLog]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for u in updates {
        w.serialize(u).map_err(|err| csv_error(path, err))?;
    }
    w.flush().map_err(|err| Error::io(path, err))
}

/// Moving average over the trailing `window` values.
fn smooth(values: &[f64], window: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(values.len());
    let mut sum = 0.0;
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push((i as f64, sum / (i + 1).min(window) as f64));
    }
    out
}

/// Per-episode curves in the layout of the learning-curve figures: reward,
/// exploration time, coverage, and path length against episode.
fn curve_plots(dir: &Path, prefix: &str, runs: &[(String, Vec<EpisodeStats>)]) -> Result<()> {
    let metrics: [(&str, &str, fn(&EpisodeStats) -> f64); 4] = [
        ("reward", "episode reward", |e| e.reward),
        ("time", "exploration time (s)", |e| e.time_s),
        ("coverage", "map completeness", |e| e.coverage),
        ("path", "path length (m)", |e| e.path_length),
    ];
    for (name, label, f) in metrics {
        let series: Vec<Series> = runs
            .iter()
            .map(|(l, eps)| Series::new(l.clone(), smooth(&eps.iter().map(f).collect::<Vec<_>>(), 20)))
            .collect();
        let y = (name == "coverage").then_some((0.0, 1.0));
        write_text(
            &dir.join(format!("{prefix}_{name}.svg")),
            &line_plot_svg(&format!("{label} (20-episode mean)"), "episode", label, &series, y),
        )?;
    }
    Ok(())
}

/// Trains a policy and writes `config.json`, `episodes.csv`, `updates.csv`,
/// `checkpoints/`, `policy.json`, `summary.json`, and `plots/`.
pub fn run_training(cfg: &RunConfig) -> Result<TrainReport> {
    let dir = cfg.run_dir("train");
    prepare_run_dir(cfg, &dir)?;
    let tcfg = train_config(cfg);
    let env_cfg = cfg.env_config();
    let ckpt_dir = dir.join("checkpoints");
    let outcome = train_outcome(cfg, |net, log| {
        if tcfg.checkpoint_every > 0 && log.update % tcfg.checkpoint_every == 0 {
            std::fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
            Checkpoint::new(net, tcfg, env_cfg).save(&ckpt_dir.join(format!("update_{:06}.json", log.update)))?;
        }
        Ok(())
    })?;
    let policy = dir.join("policy.json");
    Checkpoint::new(&outcome.net, tcfg, env_cfg).save(&policy)?;
    write_episodes(&dir.join("episodes.csv"), &outcome.episodes)?;
    write_updates(&dir.join("updates.csv"), &outcome.updates)?;
    let label = arm_label(cfg.lsd_on, cfg.pur_on);
    curve_plots(&dir.join("plots"), "training", &[(label.into(), outcome.episodes.clone())])?;
    let world = cfg.load_world()?;
    let report = TrainReport {
        run_id: cfg.run_id("train"),
        world: world.name,
        lsd_on: cfg.lsd_on,
        pur_on: cfg.pur_on,
        curve: CurveSummary::new(cfg.seed, &outcome.episodes, outcome.steps),
        updates: outcome.updates.len(),
        policy,
    };
    write_json(&dir.join("summary.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationArm {
    /// Neither stagnation detection nor the path-uncertainty reward.
    Baseline,
    /// Stagnation detection with the uncertainty-only reward.
    Lsd,
    /// Both.
    Full,
}

impl AblationArm {
    pub const ALL: [AblationArm; 3] = [AblationArm::Baseline, AblationArm::Lsd, AblationArm::Full];

    pub fn toggles(self) -> (bool, bool) {
        match self {
            AblationArm::Baseline => (false, false),
            AblationArm::Lsd => (true, false),
            AblationArm::Full => (true, true),
        }
    }

    pub fn as_str(self) -> &'static str {
        arm_label(self.toggles().0, self.toggles().1)
    }
}

fn arm_label(lsd: bool, pur: bool) -> &'static str {
    match (lsd, pur) {
        (false, false) => "baseline",
        (true, false) => "lsd",
        (true, true) => "full",
        (false, true) => "pur",
    }
}

/// `cfg` with only the two toggles changed.
pub fn arm_config(cfg: &RunConfig, arm: AblationArm) -> RunConfig {
    let (lsd_on, pur_on) = arm.toggles();
    RunConfig {
        lsd_on,
        pur_on,
        method: RunMethod::Drl,
        ..cfg.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmReport {
    pub arm: AblationArm,
    pub lsd_on: bool,
    pub pur_on: bool,
    pub runs: Vec<CurveSummary>,
    pub first_reward: MeanStd,
    pub last_reward: MeanStd,
    pub milestone_episode: MeanStd,
}

impl ArmReport {
    pub fn new(arm: AblationArm, runs: Vec<CurveSummary>) -> Self {
        let (lsd_on, pur_on) = arm.toggles();
        let col = |f: fn(&CurveSummary) -> f64| mean_std(&runs.iter().map(f).collect::<Vec<_>>());
        Self {
            arm,
            lsd_on,
            pur_on,
            first_reward: col(|r| r.first_reward),
            last_reward: col(|r| r.last_reward),
            milestone_episode: col(|r| r.milestone_episode as f64),
            runs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub run_id: String,
    pub world: String,
    pub milestone_coverage: f64,
    pub milestone_window: usize,
    pub arms: Vec<ArmReport>,
}

impl AblationReport {
    pub fn arm(&self, arm: AblationArm) -> Option<&ArmReport> {
        self.arms.iter().find(|a| a.arm == arm)
    }
}

/// Trains every arm in `arms` once per seed `seed .. seed + trials`, in
/// parallel across runs. Returns per-arm episode logs ordered by seed.
pub fn train_arms(cfg: &RunConfig, arms: &[AblationArm]) -> Result<Vec<(AblationArm, Vec<(u64, TrainOutcome)>)>> {
    cfg.validate()?;
    let jobs: Vec<(usize, u64)> = (0..arms.len())
        .flat_map(|a| (0..cfg.trials as u64).map(move |i| (a, cfg.seed + i)))
        .collect();
    let slots: Mutex<Vec<Option<Result<TrainOutcome>>>> = Mutex::new(jobs.iter().map(|_| None).collect());
    let next = std::sync::atomic::AtomicUsize::new(0);
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(jobs.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let j = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                let Some(&(a, seed)) = jobs.get(j) else { break };
                let run = RunConfig {
                    seed,
                    ..arm_config(cfg, arms[a])
                };
                let out = train_outcome(&run, |_, _| Ok(()));
                slots.lock().expect("slots lock")[j] = Some(out);
            });
        }
    });
    let mut results = slots.into_inner().expect("slots lock").into_iter();
    let mut out = Vec::new();
    for &arm in arms {
        let mut runs = Vec::new();
        for i in 0..cfg.trials as u64 {
            let r = results
                .next()
                .flatten()
                .unwrap_or_else(|| Err(Error::Precondition("training job did not run".into())))?;
            runs.push((cfg.seed + i, r));
        }
        out.push((arm, runs));
    }
    Ok(out)
}

/// Runs the three ablation arms over `trials` seeds and writes per-run
/// episode CSVs under `arms/<arm>/`, comparison plots, and `summary.json`.
pub fn ablate(cfg: &RunConfig) -> Result<AblationReport> {
    let dir = cfg.run_dir("ablate");
    prepare_run_dir(cfg, &dir)?;
    let results = train_arms(cfg, &AblationArm::ALL)?;
    let mut arms = Vec::new();
    let mut mean_curves = Vec::new();
    for (arm, runs) in &results {
        for (seed, out) in runs {
            write_episodes(&dir.join("arms").join(arm.as_str()).join(format!("seed_{seed}.csv")), &out.episodes)?;
        }
        arms.push(ArmReport::new(
            *arm,
            runs.iter()
                .map(|(seed, out)| CurveSummary::new(*seed, &out.episodes, out.steps))
                .collect(),
        ));
        mean_curves.push((arm.as_str().to_string(), mean_episode_curve(runs)));
    }
    curve_plots(&dir.join("plots"), "ablation", &mean_curves)?;
    let report = AblationReport {
        run_id: cfg.run_id("ablate"),
        world: cfg.load_world()?.name,
        milestone_coverage: MILESTONE_COVERAGE,
        milestone_window: MILESTONE_WINDOW,
        arms,
    };
    write_json(&dir.join("summary.json"), &report)?;
    Ok(report)
}

/// Per-episode mean over seeds, truncated to the shortest run.
fn mean_episode_curve(runs: &[(u64, TrainOutcome)]) -> Vec<EpisodeStats> {
    let n = runs.iter().map(|(_, o)| o.episodes.len()).min().unwrap_or(0);
    let k = runs.len().max(1) as f64;
    (0..n)
        .map(|i| {
            let mut e = runs[0].1.episodes[i].clone();
            let avg = |f: fn(&EpisodeStats) -> f64| runs.iter().map(|(_, o)| f(&o.episodes[i])).sum::<f64>() / k;
            e.reward = avg(|e| e.reward);
            e.time_s = avg(|e| e.time_s);
            e.coverage = avg(|e| e.coverage);
            e.path_length = avg(|e| e.path_length);
            e
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(dir: &Path) -> RunConfig {
        RunConfig {
            world: "train_4x4".into(),
            trials: 2,
            out_dir: dir.to_path_buf(),
            train: TrainConfig {
                rollout_len: 64,
                batch_size: 32,
                max_episodes: Some(12),
                max_episode_steps: 100,
                checkpoint_every: 1,
                ..TrainConfig::default()
            },
            ..RunConfig::default()
        }
    }

    #[test]
    fn arms_differ_only_in_toggles() {
        let base = RunConfig::default();
        let mut seen = Vec::new();
        for arm in AblationArm::ALL {
            let c = arm_config(&base, arm);
            let (l, p) = arm.toggles();
            assert_eq!((c.lsd_on, c.pur_on), (l, p));
            let normalized = RunConfig {
                lsd_on: base.lsd_on,
                pur_on: base.pur_on,
                ..c
            };
            assert_eq!(normalized, base);
            seen.push((l, p));
        }
        assert_eq!(seen, vec![(false, false), (true, false), (true, true)]);
    }

    #[test]
    fn curve_summary_windows() {
        let ep = |i: usize, r: f64, c: f64| EpisodeStats {
            episode: i,
            global_step: i,
            reward: r,
            steps: 1,
            time_s: 0.5,
            path_length: 0.1,
            coverage: c,
            cause: crate::env::TerminationCause::Collision,
        };
        let eps: Vec<EpisodeStats> = (0..120)
            .map(|i| ep(i, i as f64, if i < 60 { 0.2 } else { 0.9 }))
            .collect();
        let s = CurveSummary::new(0, &eps, 120);
        assert_eq!(s.first_reward, 24.5);
        assert_eq!(s.last_reward, 94.5);
        // trailing-50 mean reaches 0.5 once 22 of the window are at 0.9:
        // (28·0.2 + 22·0.9)/50 = 0.508, first at episode 60 + 21
        assert_eq!(s.milestone_episode, 81);
    }

    #[test]
    fn training_run_writes_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny(tmp.path());
        let report = run_training(&cfg).unwrap();
        let dir = cfg.run_dir("train");
        assert_eq!(report.curve.episodes, 12);
        for f in ["config.json", "episodes.csv", "updates.csv", "policy.json", "summary.json", "plots/training_reward.svg"] {
            assert!(dir.join(f).is_file(), "{f}");
        }
        let ckpts = std::fs::read_dir(dir.join("checkpoints")).unwrap().count();
        assert_eq!(ckpts, report.updates);
        assert!(report.updates > 0);
        Checkpoint::load(&report.policy).unwrap();
        let rows = csv::Reader::from_path(dir.join("episodes.csv")).unwrap().records().count();
        assert_eq!(rows, 12);
    }

    #[test]
    fn ablation_covers_three_arms() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = tiny(tmp.path());
        let report = ablate(&cfg).unwrap();
        assert_eq!(report.arms.len(), 3);
        for arm in &report.arms {
            assert_eq!(arm.runs.len(), 2);
            assert_eq!(arm.runs[0].seed, 0);
            assert_eq!(arm.runs[1].seed, 1);
        }
        let dir = cfg.run_dir("ablate");
        assert!(dir.join("arms/full/seed_1.csv").is_file());
        assert!(dir.join("plots/ablation_coverage.svg").is_file());
        // a lone arm trained again reproduces its ablation entry
        let again = train_arms(&cfg, &[AblationArm::Full]).unwrap();
        let direct = CurveSummary::new(0, &again[0].1[0].1.episodes, again[0].1[0].1.steps);
        assert_eq!(&direct, &report.arm(AblationArm::Full).unwrap().runs[0]);
    }
}
