//! Command-line harness for the canal-navigation training stack.
//!
//! Four subcommands tie the stack together: `demo` rolls scripted expert
//! demonstrations, `train` runs the two-phase learning process, `eval` scores
//! a policy over seeded episodes, and `report` merges evaluation reports into
//! a side-by-side comparison table.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use canalrl_core::checkpoint::AgentCheckpoint;
use canalrl_core::config::RunConfig;
use canalrl_core::env::CanalEnv;
use canalrl_core::eval::{evaluate, EvalPolicy};
use canalrl_core::expert::{
    generate_demonstrations, read_demonstrations, write_demonstrations,
};
use canalrl_core::report::{comparison_table, traces_text, EpisodeRow, EvalReport};
use canalrl_core::sac::{train, ActionMode, AgentNets, ReplayBuffer, TrainConfig};

#[derive(Parser)]
#[command(
    name = "canalrl",
    about = "Soft actor-critic stack for autonomous cervical-canal navigation",
    version
)]
struct Cli {
    /// Configuration file (flat key-value entries); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Print per-episode progress while training.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate expert demonstrations into a file.
    Demo(DemoArgs),
    /// Train an agent from a demonstration file.
    Train(TrainArgs),
    /// Evaluate a checkpoint (or the scripted oracle) over seeded episodes.
    Eval(EvalArgs),
    /// Merge evaluation reports into a comparison table.
    Report(ReportArgs),
}

#[derive(Args)]
struct DemoArgs {
    /// Number of demonstration episodes; defaults to expert.demo_episodes.
    #[arg(long)]
    episodes: Option<u64>,
    /// Output demonstration file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Demonstration file produced by `demo`.
    #[arg(long)]
    demos: PathBuf,
    /// Output checkpoint path.
    #[arg(long)]
    out: PathBuf,
    /// Override sac.episodes from the config.
    #[arg(long)]
    episodes: Option<u64>,
    /// Reward log path; defaults to <log_dir>/reward_log.tsv.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalMode {
    Deterministic,
    Stochastic,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint to evaluate; required unless --oracle is given.
    #[arg(long, required_unless_present = "oracle")]
    checkpoint: Option<PathBuf>,
    /// Evaluate the scripted expert instead of a checkpoint.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = 50)]
    episodes: u64,
    #[arg(long, value_enum, default_value_t = EvalMode::Deterministic)]
    mode: EvalMode,
    /// Output report file.
    #[arg(long)]
    out: PathBuf,
    /// Column label in comparison tables; defaults to agent/oracle.
    #[arg(long)]
    label: Option<String>,
    /// Optional per-step force trace file for force-profile plots.
    #[arg(long)]
    traces: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// Evaluation report files to merge.
    #[arg(long, required = true, num_args = 1..)]
    runs: Vec<PathBuf>,
    /// Output table; written to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Ok(dir) = std::env::var("CANALRL_LOG_DIR") {
        if !dir.is_empty() {
            cfg.log_dir = PathBuf::from(dir);
        }
    }

    match cli.command {
        Command::Demo(args) => cmd_demo(&cfg, &args),
        Command::Train(args) => cmd_train(&cfg, &args, cli.verbose),
        Command::Eval(args) => cmd_eval(&cfg, &args),
        Command::Report(args) => cmd_report(&args),
    }
}

/// Exit early with a usage error (code 2) instead of a runtime error.
macro_rules! usage {
    ($($arg:tt)*) => {{
        let _ = usage_error(&format!($($arg)*));
        std::process::exit(2);
    }};
}

fn cmd_demo(cfg: &RunConfig, args: &DemoArgs) -> anyhow::Result<()> {
    let episodes = args.episodes.unwrap_or(cfg.demo_episodes);
    if episodes == 0 {
        usage!("--episodes must be at least 1");
    }
    let env = CanalEnv::new(cfg.env.clone())?;
    let set = generate_demonstrations(
        &env,
        &cfg.expert,
        &cfg.reward,
        cfg.data_hash(),
        episodes,
        cfg.seed,
    )?;
    write_demonstrations(&set, &args.out)?;
    println!(
        "demonstrations: {} episodes, {} transitions, success rate {:.3}",
        set.episodes.len(),
        set.transition_count(),
        set.success_rate()
    );
    println!("written to {}", args.out.display());
    Ok(())
}

fn cmd_train(cfg: &RunConfig, args: &TrainArgs, verbose: bool) -> anyhow::Result<()> {
    let env = CanalEnv::new(cfg.env.clone())?;
    let demos = read_demonstrations(&args.demos, &env, &cfg.reward)
        .with_context(|| format!("reading demonstrations {}", args.demos.display()))?;
    if demos.anatomy_hash != cfg.data_hash() {
        bail!(
            "demonstration file was generated under a different configuration \
             (hash {:016x}, config {:016x}); regenerate with `canalrl demo`",
            demos.anatomy_hash,
            cfg.data_hash()
        );
    }

    let mut expert = ReplayBuffer::new(demos.transition_count().max(1));
    for t in demos.all_transitions() {
        expert.push(t.clone());
    }

    let mut nets = AgentNets::standard_seeded(cfg.seed);
    let train_cfg = TrainConfig {
        episodes: args.episodes.unwrap_or(cfg.episodes),
        seed: cfg.seed,
        buffer_capacity: cfg.buffer_capacity,
        reward: cfg.reward.clone(),
        hp: cfg.hp.clone(),
    };

    let outcome = train(&env, &mut nets, &expert, &train_cfg, |record| {
        if verbose {
            println!(
                "episode {}\treward {:.3}\tsuccess {}\tsteps {}",
                record.episode,
                record.cumulative_reward,
                u8::from(record.success),
                record.steps
            );
        }
    });

    let output = match outcome {
        Ok(output) => output,
        Err(e) => {
            // Keep the partially trained networks around for debugging.
            let partial = args.out.with_extension("partial.ckpt");
            let ckpt = AgentCheckpoint {
                nets,
                total_updates: 0,
                config_hash: cfg.data_hash(),
            };
            ckpt.save(&partial)?;
            return Err(anyhow!(e)).with_context(|| {
                format!("training aborted; partial checkpoint at {}", partial.display())
            });
        }
    };

    let ckpt = AgentCheckpoint {
        nets,
        total_updates: output.total_updates,
        config_hash: cfg.data_hash(),
    };
    ckpt.save(&args.out)?;

    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| cfg.log_dir.join("reward_log.tsv"));
    if let Some(parent) = log_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut log_text = String::new();
    for r in &output.episode_log {
        log_text.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            r.episode,
            r.cumulative_reward,
            u8::from(r.success),
            r.steps
        ));
    }
    std::fs::write(&log_path, log_text)?;

    let window = output.episode_log.len().min(100);
    let moving_avg = if window == 0 {
        0.0
    } else {
        output.episode_log[output.episode_log.len() - window..]
            .iter()
            .map(|r| r.cumulative_reward)
            .sum::<f64>()
            / window as f64
    };
    println!(
        "training finished: {} updates ({} skipped rounds), {} episodes",
        output.total_updates,
        output.skipped_rounds,
        output.episode_log.len()
    );
    println!("final {window}-episode moving-average reward: {moving_avg:.3}");
    println!("checkpoint: {}", args.out.display());
    println!("reward log: {}", log_path.display());
    Ok(())
}

fn cmd_eval(cfg: &RunConfig, args: &EvalArgs) -> anyhow::Result<()> {
    if args.episodes == 0 {
        usage!("--episodes must be at least 1");
    }
    let env = CanalEnv::new(cfg.env.clone())?;

    let loaded;
    let (policy, default_label, mode_name) = if args.oracle {
        (
            EvalPolicy::Oracle {
                params: &cfg.expert,
            },
            "oracle",
            "oracle".to_string(),
        )
    } else {
        let path = args.checkpoint.as_ref().expect("enforced by clap");
        loaded = AgentCheckpoint::load(path)
            .with_context(|| format!("loading checkpoint {}", path.display()))?;
        if loaded.config_hash != cfg.data_hash() {
            eprintln!(
                "warning: checkpoint was trained under a different configuration \
                 (hash {:016x}, config {:016x})",
                loaded.config_hash,
                cfg.data_hash()
            );
        }
        if loaded.nets.obs_dim != canalrl_core::env::OBS_DIM
            || loaded.nets.action_dim != canalrl_core::env::ACTION_DIM
        {
            bail!(
                "checkpoint dimensions ({} obs, {} action) do not match the environment",
                loaded.nets.obs_dim,
                loaded.nets.action_dim
            );
        }
        let mode = match args.mode {
            EvalMode::Deterministic => ActionMode::Deterministic,
            EvalMode::Stochastic => ActionMode::Stochastic,
        };
        (
            EvalPolicy::Agent {
                nets: &loaded.nets,
                mode,
            },
            "agent",
            match args.mode {
                EvalMode::Deterministic => "deterministic".to_string(),
                EvalMode::Stochastic => "stochastic".to_string(),
            },
        )
    };

    let episodes = evaluate(&env, policy, &cfg.reward, args.episodes, cfg.seed)?;
    let rows: Vec<EpisodeRow> = episodes.iter().map(EpisodeRow::from).collect();
    let label = args.label.clone().unwrap_or_else(|| default_label.to_string());
    let report = EvalReport::new(&label, cfg.seed, &mode_name, rows)?;
    report.save(&args.out)?;

    if let Some(traces) = &args.traces {
        if let Some(parent) = traces.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(traces, traces_text(&label, &episodes))?;
    }

    let s = &report.summary;
    println!(
        "evaluated {} episodes ({}), success rate {:.3}",
        s.episodes, mode_name, s.success_rate
    );
    println!("F_max   median {:.4} N (sd {:.4})", s.f_max.median, s.f_max.std_dev);
    println!(
        "F_i     median {:.4} N*s (sd {:.4})",
        s.f_integral.median, s.f_integral.std_dev
    );
    match &s.f_fft {
        Some(f) => println!("F_FFT   median {:.4} (sd {:.4})", f.median, f.std_dev),
        None => println!("F_FFT   not resolvable (episodes shorter than 1 s)"),
    }
    match &s.execution_time {
        Some(t) => println!("t_e     median {:.4} s (sd {:.4})", t.median, t.std_dev),
        None => println!("t_e     no successful episodes"),
    }
    println!("report: {}", args.out.display());
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> anyhow::Result<()> {
    let mut reports = Vec::new();
    for path in &args.runs {
        reports.push(
            EvalReport::load(path).with_context(|| format!("reading {}", path.display()))?,
        );
    }
    let table = comparison_table(&reports)?;
    match &args.out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, &table)?;
            println!("comparison table: {}", path.display());
        }
        None => print!("{table}"),
    }
    Ok(())
}
