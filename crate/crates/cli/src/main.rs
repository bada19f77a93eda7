use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use exploresim::agent::ActionSelection;
use exploresim::env::EpisodeRecord;
use exploresim::harness::{self, RunConfig, RunMethod};

#[derive(Parser)]
#[command(name = "exploresim", version, about = "Autonomous exploration simulator with PPO and planner baselines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a policy with PPO.
    Train(RunArgs),
    /// Run evaluation trials and write per-trial tables, maps and plots.
    Eval(RunArgs),
    /// Train the baseline, detector-only and full arms over several seeds.
    Ablate(RunArgs),
    /// Render maps and plots for one saved episode record.
    Render {
        /// Episode record JSON written by `eval` (records/*.json).
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print geometry and first-scan coverage for a world.
    Worldcheck {
        /// Bundled world name or path to a world JSON file.
        world: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Drl,
    Frontier,
    Rrt,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectionArg {
    Greedy,
    Sample,
}

/// Flags override values from `--config`, which override built-in defaults.
#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; any subset of fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    world: Option<String>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Evaluation trials, or seeds per arm for `ablate`.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Policy checkpoint for `drl` evaluation.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_name = "BOOL")]
    lsd_on: Option<bool>,
    #[arg(long, value_name = "BOOL")]
    pur_on: Option<bool>,
    #[arg(long, value_enum)]
    selection: Option<SelectionArg>,
    #[arg(long)]
    total_steps: Option<usize>,
    #[arg(long)]
    max_episodes: Option<usize>,
    #[arg(long)]
    max_episode_steps: Option<usize>,
    #[arg(long)]
    rollout_len: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Step cap for evaluation episodes.
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    success_coverage: Option<f64>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:ident => $($target:tt)+) => {
                if let Some(v) = self.$field.clone() {
                    cfg.$($target)+ = v;
                }
            };
        }
        set!(world => world);
        set!(trials => trials);
        set!(seed => seed);
        set!(out => out_dir);
        set!(lsd_on => lsd_on);
        set!(pur_on => pur_on);
        set!(total_steps => train.total_steps);
        set!(max_episode_steps => train.max_episode_steps);
        set!(rollout_len => train.rollout_len);
        set!(lr => train.lr);
        set!(checkpoint_every => train.checkpoint_every);
        set!(max_steps => env.max_steps);
        set!(success_coverage => env.success_coverage);
        if let Some(m) = self.method {
            cfg.method = match m {
                MethodArg::Drl => RunMethod::Drl,
                MethodArg::Frontier => RunMethod::Frontier,
                MethodArg::Rrt => RunMethod::Rrt,
            };
        }
        if let Some(s) = self.selection {
            cfg.selection = match s {
                SelectionArg::Greedy => ActionSelection::Greedy,
                SelectionArg::Sample => ActionSelection::Sample,
            };
        }
        if self.checkpoint.is_some() {
            cfg.checkpoint = self.checkpoint.clone();
        }
        if self.max_episodes.is_some() {
            cfg.train.max_episodes = self.max_episodes;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(args) => {
            let cfg = args.resolve()?;
            if cfg.method != RunMethod::Drl {
                bail!("train only supports --method drl");
            }
            let report = harness::run_training(&cfg)?;
            let c = &report.curve;
            println!("run {}", report.run_id);
            println!(
                "episodes {}  steps {}  updates {}  first-window reward {:.3}  last-window reward {:.3}",
                c.episodes, c.steps, report.updates, c.first_reward, c.last_reward
            );
            println!("policy {}", report.policy.display());
        }
        Command::Eval(args) => {
            let cfg = args.resolve()?;
            let ev = harness::evaluate(&cfg)?;
            let r = &ev.report;
            println!("run {}  world {}  method {}  trials {}", r.run_id, r.world, r.method.as_str(), r.trials.len());
            println!("{:>5} {:>6} {:>9} {:>9} {:>8}  cause", "trial", "seed", "time_s", "path_m", "compl");
            for t in &r.trials {
                println!(
                    "{:>5} {:>6} {:>9.1} {:>9.2} {:>8.3}  {:?}",
                    t.trial, t.seed, t.time_s, t.path_length_m, t.completeness, t.termination_cause
                );
            }
            println!(
                "time {:.1} ± {:.1} s  path {:.2} ± {:.2} m  completeness {:.3} ± {:.3}  success {:.0}%",
                r.time_s.mean,
                r.time_s.std,
                r.path_length_m.mean,
                r.path_length_m.std,
                r.completeness.mean,
                r.completeness.std,
                100.0 * r.success_rate
            );
            println!("artifacts {}", ev.dir.display());
        }
        Command::Ablate(args) => {
            let cfg = args.resolve()?;
            let report = harness::ablate(&cfg)?;
            println!("run {}  world {}", report.run_id, report.world);
            println!("{:>9} {:>14} {:>14} {:>12}", "arm", "first reward", "last reward", "milestone");
            for a in &report.arms {
                println!(
                    "{:>9} {:>14.3} {:>14.3} {:>12.1}",
                    a.arm.as_str(),
                    a.first_reward.mean,
                    a.last_reward.mean,
                    a.milestone_episode.mean
                );
            }
            println!("artifacts {}", cfg.run_dir("ablate").display());
        }
        Command::Render { record, out } => {
            let rec = load_record(&record)?;
            let stem = record
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("episode")
                .to_string();
            harness::render::render_record(&rec, &out, &stem)?;
            println!("rendered {stem} into {}", out.display());
        }
        Command::Worldcheck { world } => {
            let w = exploresim::world::resolve_world(&world)?;
            let r = harness::world_report(&w, &RunConfig::default().env_config())?;
            let [x0, y0, x1, y1] = r.bounds;
            println!("world {}", r.name);
            println!("bounds [{x0}, {y0}] – [{x1}, {y1}]  area {:.2} m²", (x1 - x0) * (y1 - y0));
            println!("segments {}  circles {}", r.segments, r.circles);
            println!("free area {:.2} m²  reachable {:.2} m²", r.free_area, r.reachable_area);
            println!(
                "start ({:.2}, {:.2}, {:.2})  clear {}",
                r.start[0], r.start[1], r.start[2], r.start_clear
            );
            println!("initial coverage {:.3}  t_max {:.0} s", r.initial_coverage, r.t_max);
            if !r.start_clear {
                bail!("start pose of {} is blocked", r.name);
            }
        }
    }
    Ok(())
}

fn load_record(path: &Path) -> Result<EpisodeRecord> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
