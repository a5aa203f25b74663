use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nca_lab::harness::{
    cmd_analyze, cmd_evolve, cmd_finetune, cmd_simulate, cmd_sweep_k, replay, AnalysisConfig, ExperimentConfig,
    Preset, RunOptions, SimulateOptions, Variant, WORKERS_ENV,
};
use nca_lab::nca::{DeathRule, RolloutParams, UpdateSchedule};
use nca_lab::shapes::TargetSpec;

#[derive(Parser)]
#[command(name = "nca-lab", version, about = "Evolve and analyse neural cellular automata")]
struct Cli {
    /// Worker threads for replicates and evaluation.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment config; missing fields come from the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Starting point when no config file is given.
    #[arg(long, value_enum, default_value = "desk")]
    preset: Preset,
    #[arg(long)]
    seed: Option<u64>,
    /// `square:12`, `triangle:13`, `x:5` or `file:<path>`.
    #[arg(long)]
    target: Option<TargetSpec>,
    /// `bi_loss`, `tri_loss`, `empowerment:K[:CROP]`, `local_entropy_min`, ...
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Continue from checkpoints in the output directory.
    #[arg(long)]
    resume: bool,
}

impl ConfigArgs {
    fn resolve(&self, default_generations: Option<usize>) -> nca_lab::Result<(ExperimentConfig, PathBuf)> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => {
                let mut c = ExperimentConfig::preset(self.preset);
                if let Some(g) = default_generations {
                    c.generations = g;
                }
                c
            }
        };
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        if let Some(t) = &self.target {
            config.target = t.clone();
        }
        if let Some(v) = self.variant {
            config.variant = v;
        }
        if let Some(g) = self.generations {
            config.generations = g;
        }
        if let Some(r) = self.replicates {
            config.replicates = r;
        }
        if let Some(p) = self.population {
            config.population_size = p;
        }
        config.validate()?;
        let out = self
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("runs").join(config.variant.slug()));
        Ok((config, out))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run independent evolutionary replicates.
    Evolve(ConfigArgs),
    /// Run both loss-only controls and one empowerment variant per horizon.
    SweepK {
        #[command(flatten)]
        args: ConfigArgs,
        /// Comma-separated horizons.
        #[arg(long, value_delimiter = ',', default_value = "1,5,10,17,25,32,40,45")]
        k: Vec<usize>,
    },
    /// Seed populations with evolved champions and evolve on a new target.
    Finetune {
        #[command(flatten)]
        args: ConfigArgs,
        /// Directory (searched recursively) or file of champion genomes.
        #[arg(long)]
        champions: PathBuf,
    },
    /// Roll out one genome and export frames and a trace.
    Simulate {
        #[arg(long)]
        genome: PathBuf,
        #[arg(long, default_value_t = 25)]
        grid_size: usize,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, value_enum, default_value = "overwrite-always")]
        death_rule: DeathRuleArg,
        #[arg(long)]
        double_buffered: bool,
        /// Report per-step loss against this target.
        #[arg(long)]
        target: Option<TargetSpec>,
        /// Write frame_NNNN.pbm/.pgm here.
        #[arg(long)]
        frames: Option<PathBuf>,
        /// Write one NDJSON line per update here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compute homeostasis and morphology metrics for every champion found.
    Analyze {
        /// Directory containing run directories (with manifest.json).
        #[arg(long)]
        runs: PathBuf,
        /// Updates past the evolved horizon (default: N).
        #[arg(long)]
        extra_steps: Option<usize>,
        #[arg(long, default_value = "analysis")]
        out: PathBuf,
    },
    /// Re-run the invocation recorded in a manifest.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum DeathRuleArg {
    LiteralReplicate,
    OverwriteAlways,
}

fn run(cli: Cli) -> nca_lab::Result<()> {
    let mut options = RunOptions::default();
    if let Some(w) = cli.workers {
        options.workers = w;
    }
    match cli.command {
        Command::Evolve(args) => {
            options.resume = args.resume;
            let (config, out) = args.resolve(None)?;
            let outcomes = cmd_evolve(&config, &out, &options)?;
            for o in outcomes {
                println!("replicate {} (seed {}): champion loss {}", o.replicate, o.seed, o.champion.loss);
            }
            println!("wrote {}", out.display());
        }
        Command::SweepK { args, k } => {
            options.resume = args.resume;
            let (config, out) = args.resolve(None)?;
            let sweep = cmd_sweep_k(&config, &k, &out, &options)?;
            println!(
                "{} variants, Bonferroni alpha {}; see {}",
                sweep.variants.len(),
                sweep.bonferroni_alpha,
                out.join("table.csv").display()
            );
        }
        Command::Finetune { args, champions } => {
            options.resume = args.resume;
            let (config, out) = args.resolve(Some(500))?;
            let outcomes = cmd_finetune(&champions, &config.target, config.variant, &config, &out, &options)?;
            for o in outcomes {
                println!("replicate {}: champion loss {}", o.replicate, o.champion.loss);
            }
            println!("wrote {}", out.display());
        }
        Command::Simulate {
            genome,
            grid_size,
            steps,
            death_rule,
            double_buffered,
            target,
            frames,
            trace,
        } => {
            let params = RolloutParams {
                grid_size,
                steps,
                death_rule: match death_rule {
                    DeathRuleArg::LiteralReplicate => DeathRule::LiteralReplicate,
                    DeathRuleArg::OverwriteAlways => DeathRule::OverwriteAlways,
                },
                schedule: if double_buffered {
                    UpdateSchedule::DoubleBuffered
                } else {
                    UpdateSchedule::Raster
                },
            };
            let outcome = cmd_simulate(
                &genome,
                &params,
                &SimulateOptions {
                    target,
                    frames_dir: frames,
                    trace_path: trace,
                },
            )?;
            print!("{}", outcome.ascii);
        }
        Command::Analyze { runs, extra_steps, out } => {
            let rows = cmd_analyze(&runs, &AnalysisConfig { extra_steps }, &out, &options)?;
            println!("{} metric rows written to {}", rows.len(), out.join("metrics.csv").display());
        }
        Command::Replay { manifest, out } => {
            replay(&manifest, &out, &options)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
