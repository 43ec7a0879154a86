//! `junction` — train, evaluate, render, and inspect from the command line.
//!
//! Exit codes: 0 success, 1 validation error (bad flags, config, or
//! dimensions), 2 runtime failure (I/O, corrupt files, training errors).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use junction_core::config::RunConfig;
use junction_core::metrics::{evaluate, write_metrics_csv};
use junction_core::policy::{init_params, load_checkpoint, Mode, ModelParameters};
use junction_core::render::{render_frames, RenderConfig};
use junction_core::runtime::run_training;
use junction_core::trajlog::TrajectoryLog;
use junction_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "junction",
    version,
    about = "Multi-agent intersection driving: train, evaluate, render, inspect"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file (sectioned key-value text); absent = all defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override run.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override io.out_dir
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a policy; writes checkpoints, stats.jsonl, and manifest.json
    Train {
        #[command(flatten)]
        common: ConfigArgs,
        /// Force the bit-reproducible single-actor path
        #[arg(long)]
        deterministic: bool,
        /// Override runtime.actors
        #[arg(long)]
        actors: Option<usize>,
        /// Override runtime.budget_updates
        #[arg(long)]
        budget: Option<u64>,
        /// Echo per-update stats lines to stdout
        #[arg(long)]
        verbose: bool,
    },
    /// Evaluate a checkpoint over fresh seeded episodes; writes metrics.csv
    Evaluate {
        #[command(flatten)]
        common: ConfigArgs,
        /// Checkpoint to evaluate; absent = freshly initialized policy
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Override eval.episodes
        #[arg(long)]
        episodes: Option<usize>,
        /// Also write each episode's trajectory log next to metrics.csv
        #[arg(long)]
        save_logs: bool,
    },
    /// Render a trajectory log to portable-pixmap frames (one per step)
    Render {
        /// Trajectory log file (line-delimited JSON)
        #[arg(long)]
        log: PathBuf,
        /// Output directory for frames
        #[arg(long, default_value = "frames")]
        out: PathBuf,
        /// Pixels per meter
        #[arg(long, default_value_t = 4.0)]
        scale: f64,
        /// Overlay the lidar front sector at this half-angle (degrees)
        #[arg(long)]
        sector: Option<f64>,
    },
    /// Describe a checkpoint and/or print a fully resolved config
    Inspect {
        /// Checkpoint file to describe
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Config file to resolve and print with its hash
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Ctde => "ctde",
        Mode::Ctce => "ctce",
    }
}

fn load_config(common: &ConfigArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_env()?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.display().to_string();
    }
    Ok(cfg)
}

fn cmd_train(
    common: &ConfigArgs,
    deterministic: bool,
    actors: Option<usize>,
    budget: Option<u64>,
    verbose: bool,
) -> Result<()> {
    let mut cfg = load_config(common)?;
    if deterministic {
        cfg.runtime.deterministic = true;
        cfg.runtime.actors = 1;
    }
    if let Some(actors) = actors {
        cfg.runtime.actors = actors;
    }
    if let Some(budget) = budget {
        cfg.runtime.budget_updates = budget;
    }
    let setup = cfg.train_setup(verbose, true)?;
    println!(
        "training {} ({}) for {} updates with {} actor(s), seed {}, out {}",
        cfg.algo.name(),
        mode_name(cfg.network_mode),
        cfg.runtime.budget_updates,
        cfg.runtime.actors,
        cfg.seed,
        cfg.out_dir,
    );
    let report = run_training(&setup)?;
    let s = &report.stats;
    println!(
        "done: updates {} (version {}), env steps {}, segments produced {} / consumed {} / \
         discarded {} ({:.1}% stale), wall {:.1}s",
        s.updates,
        s.version,
        s.env_steps,
        s.produced,
        s.consumed,
        s.discarded,
        100.0 * s.discard_fraction,
        s.wall_seconds,
    );
    if let Some(ckpt) = &report.checkpoint {
        println!("checkpoint: {}", ckpt.display());
    }
    Ok(())
}

fn cmd_evaluate(
    common: &ConfigArgs,
    checkpoint: Option<&Path>,
    episodes: Option<usize>,
    save_logs: bool,
) -> Result<()> {
    let mut cfg = load_config(common)?;
    if let Some(episodes) = episodes {
        cfg.eval_episodes = episodes;
    }
    let params: ModelParameters = match checkpoint {
        Some(path) => {
            let (params, ckpt_hash) = load_checkpoint(path)?;
            // Checkpoints persist a prefix of the full hash.
            if !cfg.hash().starts_with(&ckpt_hash) && ckpt_hash.chars().any(|c| c != '0') {
                eprintln!(
                    "note: checkpoint was trained under config hash {}, evaluating under {}",
                    &ckpt_hash[..16.min(ckpt_hash.len())],
                    &cfg.hash()[..16],
                );
            }
            params
        }
        None => {
            eprintln!("note: no --checkpoint given, evaluating a freshly initialized policy");
            init_params(&cfg.network_config(), cfg.seed)?
        }
    };

    let setup = cfg.eval_setup(save_logs)?;
    let outcome = evaluate(&params, &setup)?;

    let out_dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out_dir)?;
    let csv_path = out_dir.join("metrics.csv");
    let mut file = std::fs::File::create(&csv_path)?;
    write_metrics_csv(&outcome.report, &mut file)?;
    file.flush()?;

    let mut stdout = std::io::stdout().lock();
    write_metrics_csv(&outcome.report, &mut stdout)?;
    drop(stdout);

    if save_logs {
        for (i, log) in outcome.logs.iter().enumerate() {
            log.save(&out_dir.join(format!("episode_{i:03}.jsonl")))?;
        }
        println!(
            "wrote {} and {} episode log(s) to {}",
            csv_path.display(),
            outcome.logs.len(),
            out_dir.display(),
        );
    } else {
        println!(
            "wrote {} ({} episodes, base seed {})",
            csv_path.display(),
            setup.episodes,
            setup.base_seed,
        );
    }
    Ok(())
}

fn cmd_render(log: &Path, out: &Path, scale: f64, sector: Option<f64>) -> Result<()> {
    let log = TrajectoryLog::load(log)?;
    let cfg = RenderConfig {
        scale,
        front_sector_half_angle_deg: sector,
        ..RenderConfig::default()
    };
    let frames = render_frames(&log, out, &cfg)?;
    println!("rendered {} frame(s) to {}", frames.len(), out.display());
    Ok(())
}

fn cmd_inspect(checkpoint: Option<&Path>, config: Option<&Path>) -> Result<()> {
    if checkpoint.is_none() && config.is_none() {
        return Err(Error::Config(
            "inspect needs --checkpoint and/or --config".into(),
        ));
    }
    if let Some(path) = checkpoint {
        let (params, hash) = load_checkpoint(path)?;
        println!("checkpoint: {}", path.display());
        println!("  version:     {}", params.version);
        println!("  mode:        {}", mode_name(params.mode));
        println!("  obs_dim:     {}", params.obs_dim);
        println!("  action_dim:  {}", params.action_dim);
        println!("  layers:      {}", params.layout.len());
        println!("  parameters:  {}", params.values.len());
        println!("  config_hash: {hash}");
    }
    if let Some(path) = config {
        let mut cfg = RunConfig::load(path)?;
        cfg.apply_env()?;
        cfg.validate()?;
        print!("{}", cfg.to_text());
        println!("\n# resolved config hash: {}", cfg.hash());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match &cli.cmd {
        Cmd::Train { common, deterministic, actors, budget, verbose } => {
            cmd_train(common, *deterministic, *actors, *budget, *verbose)
        }
        Cmd::Evaluate { common, checkpoint, episodes, save_logs } => {
            cmd_evaluate(common, checkpoint.as_deref(), *episodes, *save_logs)
        }
        Cmd::Render { log, out, scale, sector } => cmd_render(log, out, *scale, *sector),
        Cmd::Inspect { checkpoint, config } => {
            cmd_inspect(checkpoint.as_deref(), config.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too; they are success, not errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
