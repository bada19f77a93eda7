//! Multi-trial evaluation: trial `i` uses seed `seed + i` and a start pose
//! jittered around the world's nominal start by that seed.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::render::{render_record, render_trials};
use super::stats::{mean_std, representative_index, MeanStd};
use super::{csv_error, csv_writer, prepare_run_dir, write_json, RunConfig, RunMethod};
use super::{EVAL_HEADING_JITTER, EVAL_START_RADIUS};
use crate::agent::{run_episode, Checkpoint, PolicyNetwork};
use crate::baselines::run_baseline_episode;
use crate::env::{jittered_start, EpisodeRecord, ExplorationEnv, TerminationCause};
use crate::error::{Error, Result};
use crate::world::{Pose, WorldMap};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub start: Pose,
    pub time_s: f64,
    pub path_length_m: f64,
    pub completeness: f64,
    pub termination_cause: TerminationCause,
    pub steps: usize,
    pub total_reward: f64,
    /// `(t, c_t)` from the reset scan on; kept in the per-step CSV only.
    #[serde(skip)]
    pub coverage_vs_time: Vec<(f64, f64)>,
    #[serde(skip)]
    pub coverage_vs_path: Vec<(f64, f64)>,
}

impl TrialSummary {
    pub fn from_record(trial: usize, seed: u64, rec: &EpisodeRecord) -> Result<Self> {
        let cause = rec
            .cause
            .ok_or_else(|| Error::Precondition(format!("trial {trial} did not terminate")))?;
        Ok(Self {
            trial,
            seed,
            start: rec.start,
            time_s: rec.time_s,
            path_length_m: rec.path_length,
            completeness: rec.completeness,
            termination_cause: cause,
            steps: rec.steps.len(),
            total_reward: rec.total_reward,
            coverage_vs_time: rec.coverage_vs_time(),
            coverage_vs_path: rec.coverage_vs_path(),
        })
    }
}

/// Content of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub run_id: String,
    pub world: String,
    pub method: RunMethod,
    pub trials: Vec<TrialSummary>,
    pub time_s: MeanStd,
    pub path_length_m: MeanStd,
    pub completeness: MeanStd,
    pub success_rate: f64,
    /// Trial whose time is closest to the mean (lower seed on ties).
    pub representative: usize,
}

impl EvalReport {
    pub fn from_trials(run_id: String, world: &str, method: RunMethod, trials: Vec<TrialSummary>) -> Self {
        let col = |f: fn(&TrialSummary) -> f64| trials.iter().map(f).collect::<Vec<_>>();
        let times = col(|t| t.time_s);
        let seeds: Vec<u64> = trials.iter().map(|t| t.seed).collect();
        let successes = trials
            .iter()
            .filter(|t| t.termination_cause == TerminationCause::Success)
            .count();
        Self {
            run_id,
            world: world.to_string(),
            method,
            time_s: mean_std(&times),
            path_length_m: mean_std(&col(|t| t.path_length_m)),
            completeness: mean_std(&col(|t| t.completeness)),
            success_rate: successes as f64 / trials.len().max(1) as f64,
            representative: representative_index(&times, &seeds).unwrap_or(0),
            trials,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    pub records: Vec<EpisodeRecord>,
    pub dir: PathBuf,
}

/// Per-step CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub step: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub action: String,
    pub reward: f64,
    pub delta_c: f64,
    pub d_t: f64,
    pub path_length: f64,
    pub c_t: f64,
    pub f_sigma: f64,
    pub similarity: Option<f64>,
    pub static_counter: u32,
    pub static_flag: bool,
    pub stagnant: bool,
    pub collided: bool,
}

pub fn step_rows(rec: &EpisodeRecord) -> Vec<StepRow> {
    let mut path = 0.0;
    rec.steps
        .iter()
        .map(|s| {
            path += s.d_t;
            StepRow {
                step: s.step,
                t: s.t,
                x: s.x,
                y: s.y,
                theta: s.theta,
                action: format!("{:?}", s.action),
                reward: s.reward,
                delta_c: s.delta_c,
                d_t: s.d_t,
                path_length: path,
                c_t: s.c_t,
                f_sigma: s.f_sigma,
                similarity: s.similarity,
                static_counter: s.static_counter,
                static_flag: s.static_flag,
                stagnant: s.stagnant,
                collided: s.collided,
            }
        })
        .collect()
}

pub fn trial_start(world: &WorldMap, robot_radius: f64, seed: u64) -> Pose {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    jittered_start(world, robot_radius, EVAL_START_RADIUS, EVAL_HEADING_JITTER, &mut rng)
}

fn load_policy(cfg: &RunConfig) -> Result<PolicyNetwork> {
    let path = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| Error::Precondition("drl evaluation needs a checkpoint".into()))?;
    let net = Checkpoint::load(path)?.network()?;
    let want = cfg.env.scan_samples + 1;
    if net.architecture().input != want {
        return Err(Error::Checkpoint(format!(
            "policy expects {} inputs, environment produces {want}",
            net.architecture().input
        )));
    }
    Ok(net)
}

/// Runs all trials without touching the filesystem (beyond reading the
/// checkpoint). Trials run on scoped threads; results are ordered by trial.
pub fn run_trials(cfg: &RunConfig) -> Result<Vec<EpisodeRecord>> {
    cfg.validate()?;
    let world = Arc::new(cfg.load_world()?);
    let env_cfg = cfg.env_config();
    let net = match cfg.method {
        RunMethod::Drl => Some(load_policy(cfg)?),
        _ => None,
    };
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<EpisodeRecord>>>> = Mutex::new((0..cfg.trials).map(|_| None).collect());
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(cfg.trials);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| {
                let mut env = match ExplorationEnv::new(world.clone(), env_cfg) {
                    Ok(env) => env,
                    Err(e) => {
                        let i = next.fetch_add(1, Ordering::SeqCst);
                        if i < cfg.trials {
                            results.lock().expect("results lock")[i] = Some(Err(e));
                        }
                        return;
                    }
                };
                loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= cfg.trials {
                        break;
                    }
                    let seed = cfg.seed + i as u64;
                    let start = trial_start(&world, env_cfg.robot_radius, seed);
                    let rec = match (cfg.method.baseline(), &net) {
                        (Some(m), _) => run_baseline_episode(&mut env, m, &cfg.baseline, start, seed),
                        (None, Some(net)) => run_episode(&mut env, net, cfg.selection, start, seed),
                        (None, None) => unreachable!("policy loaded for drl"),
                    };
                    results.lock().expect("results lock")[i] = Some(rec);
                }
            });
        }
    });
    results
        .into_inner()
        .expect("results lock")
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.unwrap_or_else(|| Err(Error::Precondition(format!("trial {i} did not run")))))
        .collect()
}

/// Runs the trials and writes the run directory:
/// `config.json`, `summary.json`, `trials/*.csv`, `records/*.json`,
/// `plots/*.svg`, `maps/*.pgm|yaml`.
pub fn evaluate(cfg: &RunConfig) -> Result<Evaluation> {
    let records = run_trials(cfg)?;
    let dir = cfg.run_dir("eval");
    let trials = records
        .iter()
        .enumerate()
        .map(|(i, r)| TrialSummary::from_record(i, cfg.seed + i as u64, r))
        .collect::<Result<Vec<_>>>()?;
    let world = cfg.load_world()?;
    let report = EvalReport::from_trials(cfg.run_id("eval"), &world.name, cfg.method, trials);

    prepare_run_dir(cfg, &dir)?;
    write_trial_table(&dir.join("trials").join("trials.csv"), &report.trials)?;
    for (summary, rec) in report.trials.iter().zip(&records) {
        let stem = trial_stem(summary);
        write_steps(&dir.join("trials").join(format!("{stem}.csv")), rec)?;
        write_json(&dir.join("records").join(format!("{stem}.json")), rec)?;
        if !rec.steps.is_empty() {
            render_record(rec, &dir, &stem)?;
        }
    }
    render_trials(&report, &records, &dir.join("plots"))?;
    write_json(&dir.join("summary.json"), &report)?;
    Ok(Evaluation { report, records, dir })
}

pub fn trial_stem(t: &TrialSummary) -> String {
    format!("trial_{:02}_seed_{}", t.trial, t.seed)
}

pub fn write_steps(path: &Path, rec: &EpisodeRecord) -> Result<()> {
    let mut w = csv_writer(path)?;
    for row in step_rows(rec) {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_steps(path: &Path) -> Result<Vec<StepRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<StepRow>, _>>()
        .map_err(|e| csv_error(path, e))
}

#[derive(Debug, Serialize)]
struct TrialRow<'a> {
    trial: usize,
    seed: u64,
    time_s: f64,
    path_length_m: f64,
    completeness: f64,
    termination_cause: &'a str,
    steps: usize,
    total_reward: f64,
}

fn write_trial_table(path: &Path, trials: &[TrialSummary]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for t in trials {
        w.serialize(TrialRow {
            trial: t.trial,
            seed: t.seed,
            time_s: t.time_s,
            path_length_m: t.path_length_m,
            completeness: t.completeness,
            termination_cause: t.termination_cause.as_str(),
            steps: t.steps,
            total_reward: t.total_reward,
        })
        .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{Architecture, TrainConfig};
    use crate::env::EnvConfig;

    fn summary(trial: usize, seed: u64, time_s: f64) -> TrialSummary {
        TrialSummary {
            trial,
            seed,
            start: Pose::default(),
            time_s,
            path_length_m: time_s / 10.0,
            completeness: 0.9,
            termination_cause: TerminationCause::Success,
            steps: (time_s * 2.0) as usize,
            total_reward: 0.0,
            coverage_vs_time: vec![],
            coverage_vs_path: vec![],
        }
    }

    #[test]
    fn report_of_one_trial_is_that_trial() {
        let r = EvalReport::from_trials("x".into(), "w", RunMethod::Frontier, vec![summary(0, 5, 42.0)]);
        assert_eq!(r.time_s.mean, 42.0);
        assert_eq!(r.time_s.std, 0.0);
        assert_eq!(r.representative, 0);
        assert_eq!(r.success_rate, 1.0);
    }

    #[test]
    fn representative_tie_breaks_to_lower_seed() {
        let r = EvalReport::from_trials(
            "x".into(),
            "w",
            RunMethod::Frontier,
            vec![summary(0, 8, 100.0), summary(1, 3, 200.0)],
        );
        assert_eq!(r.time_s.mean, 150.0);
        assert_eq!(r.representative, 1);
    }

    fn small_frontier_cfg(dir: &Path) -> RunConfig {
        RunConfig {
            world: "train_4x4".into(),
            method: RunMethod::Frontier,
            trials: 3,
            seed: 11,
            out_dir: dir.to_path_buf(),
            ..RunConfig::default()
        }
    }

    #[test]
    fn aggregates_match_recomputation_from_csv() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small_frontier_cfg(tmp.path());
        let ev = evaluate(&cfg).unwrap();
        let mut times = Vec::new();
        let mut paths = Vec::new();
        let mut comps = Vec::new();
        for t in &ev.report.trials {
            let rows = read_steps(&ev.dir.join("trials").join(format!("{}.csv", trial_stem(t)))).unwrap();
            let last = rows.last().unwrap();
            times.push(last.t);
            paths.push(rows.iter().map(|r| r.d_t).sum::<f64>());
            comps.push(last.c_t);
        }
        // independent two-pass mean / sample std
        let check = |vals: &[f64], got: MeanStd| {
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            assert!((got.mean - mean).abs() < 1e-9, "{} vs {mean}", got.mean);
            assert!((got.std - std).abs() < 1e-9, "{} vs {std}", got.std);
        };
        check(&times, ev.report.time_s);
        check(&paths, ev.report.path_length_m);
        check(&comps, ev.report.completeness);
        for name in ["config.json", "summary.json", "trials/trials.csv", "plots/coverage_time.svg", "plots/coverage_path.svg"] {
            assert!(ev.dir.join(name).is_file(), "{name}");
        }
        let stem = trial_stem(&ev.report.trials[0]);
        for name in [
            format!("maps/{stem}.pgm"),
            format!("maps/{stem}.yaml"),
            format!("maps/{stem}_overlay.pgm"),
            format!("plots/{stem}_trajectory.svg"),
            format!("records/{stem}.json"),
        ] {
            assert!(ev.dir.join(&name).is_file(), "{name}");
        }
    }

    #[test]
    fn repeated_evaluation_is_byte_identical() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = small_frontier_cfg(tmp.path());
        let a = evaluate(&cfg).unwrap();
        let first = std::fs::read(a.dir.join("summary.json")).unwrap();
        std::fs::remove_dir_all(&a.dir).unwrap();
        let b = evaluate(&cfg).unwrap();
        assert_eq!(first, std::fs::read(b.dir.join("summary.json")).unwrap());
    }

    #[test]
    fn drl_needs_checkpoint() {
        let cfg = RunConfig {
            trials: 1,
            ..RunConfig::default()
        };
        assert!(matches!(run_trials(&cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn drl_runs_from_checkpoint() {
        let tmp = tempfile::tempdir().unwrap();
        let net = PolicyNetwork::init(Architecture::default(), 3);
        let path = tmp.path().join("policy.json");
        Checkpoint::new(&net, TrainConfig::default(), EnvConfig::default())
            .save(&path)
            .unwrap();
        let cfg = RunConfig {
            world: "train_4x4".into(),
            trials: 2,
            checkpoint: Some(path),
            env: EnvConfig {
                max_steps: 200,
                ..EnvConfig::default()
            },
            ..RunConfig::default()
        };
        let recs = run_trials(&cfg).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| r.cause.is_some() && r.steps.len() <= 200));
        assert_ne!(recs[0].start, recs[1].start);
    }
}
