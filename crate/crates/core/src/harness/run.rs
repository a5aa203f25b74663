use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{create_dir, fmt_opt, write_file, ExperimentConfig, Invocation, Manifest, Variant};
use crate::error::{Error, Result};
use crate::evolution::{champion, Checkpoint, Evaluator, Evolution, Individual, RunLog};
use crate::metrics::{bonferroni_alpha, mean_ci95, median, rank_sum_test};
use crate::nca::{ascii_render, rollout, write_frames, Genome, RolloutParams};
use crate::objectives::mask_distance;
use crate::shapes::{TargetShape, TargetSpec};

pub const SUMMARY_HEADER: &str =
    "variant,k,replicate,seed,champion_id,champion_age,final_loss,objective_1,objective_2,best_ever_loss";

const SWEEP_SUMMARY_HEADER: &str = "variant,k,replicate,seed,final_loss";
const SWEEP_TABLE_HEADER: &str =
    "variant,k,n,mean_loss,ci95_low,ci95_high,median_loss,p_vs_bi_loss,p_vs_tri_loss,bonferroni_alpha,significant_vs_bi_loss,significant_vs_tri_loss";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub workers: usize,
    /// Continue replicates from their checkpoints when present.
    pub resume: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            workers: super::default_workers(),
            resume: false,
        }
    }
}

impl RunOptions {
    pub fn with_workers(workers: usize) -> Self {
        RunOptions {
            workers,
            resume: false,
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers.max(1))
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start {} workers: {e}", self.workers)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub champion: Individual,
    pub log: RunLog,
}

fn summary_row(variant: &Variant, r: &ReplicateOutcome) -> String {
    let c = &r.champion;
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        variant.label(),
        variant.horizon().map(|k| k.to_string()).unwrap_or_default(),
        r.replicate,
        r.seed,
        c.id(),
        c.age,
        c.loss,
        fmt_opt(c.objectives.first().copied()),
        fmt_opt(c.objectives.get(1).copied()),
        fmt_opt(r.log.best_ever.map(|b| b.2)),
    )
}

/// Every genome file below `dir` (recursively, in path order). Other JSON
/// files such as manifests and checkpoints are skipped.
pub fn load_champions(dir: &Path) -> Result<Vec<(PathBuf, Genome)>> {
    fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
        let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(&path, out)?;
            } else if path.extension().is_some_and(|e| e == "json") {
                out.push(path);
            }
        }
        Ok(())
    }
    let mut paths = Vec::new();
    if dir.is_file() {
        paths.push(dir.to_path_buf());
    } else {
        walk(dir, &mut paths)?;
    }
    paths.sort();
    let mut champions = Vec::new();
    for path in paths {
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        if let Ok(genome) = Genome::from_json(&text) {
            genome.validate()?;
            champions.push((path, genome));
        }
    }
    if champions.is_empty() {
        return Err(Error::NoChampions);
    }
    Ok(champions)
}

fn checkpoint_path(out: &Path, replicate: usize) -> PathBuf {
    out.join("checkpoints").join(format!("replicate_{replicate:02}.json"))
}

fn run_replicate(
    config: &ExperimentConfig,
    evaluator: &Evaluator,
    seeds: Option<&[Genome]>,
    replicate: usize,
    out: &Path,
    options: &RunOptions,
) -> Result<ReplicateOutcome> {
    let evo_config = config.evolution_config(replicate);
    let seed = evo_config.master_seed;
    let ckpt_path = checkpoint_path(out, replicate);

    if let (Some(champions), 0) = (seeds, config.generations) {
        // No search: the best seed, re-evaluated on this target, is the result.
        let mut population: Vec<Individual> = champions
            .iter()
            .map(|g| Individual::unevaluated(g.clone(), 0))
            .collect();
        evaluator.evaluate_all(&mut population)?;
        let best = champion(&population).expect("at least one champion").clone();
        let log = RunLog {
            best_ever: Some((0, best.id(), best.loss)),
            ..RunLog::default()
        };
        return Ok(ReplicateOutcome {
            replicate,
            seed,
            champion: best,
            log,
        });
    }

    let mut evolution = if options.resume && ckpt_path.exists() {
        let text = fs::read_to_string(&ckpt_path).map_err(|e| Error::io(&ckpt_path, e))?;
        let checkpoint: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::json(&ckpt_path, e))?;
        log::info!(
            "replicate {replicate}: resuming from generation {}",
            checkpoint.generation
        );
        Evolution::resume(evo_config, evaluator, checkpoint)?
    } else if let Some(champions) = seeds {
        Evolution::seeded(evo_config, evaluator, champions)?
    } else {
        Evolution::new(evo_config, evaluator)?
    };

    while !evolution.is_finished() {
        evolution.step()?;
        let g = evolution.generation();
        if config.checkpoint_every.is_some_and(|c| g % c == 0) {
            let text = serde_json::to_string(&evolution.checkpoint()).expect("checkpoint serializes");
            write_file(&ckpt_path, &text)?;
        }
        if g % 50 == 0 || g == config.generations {
            let row = evolution.log().rows.last().expect("row per generation");
            log::info!(
                "{} replicate {replicate}: generation {g}/{} best loss {}",
                config.variant,
                config.generations,
                row.best_loss
            );
        }
    }
    let result = evolution.finish();
    Ok(ReplicateOutcome {
        replicate,
        seed,
        champion: result.champion,
        log: result.log,
    })
}

/// Runs every replicate of `config` (seeds seeded from
/// `config.seed_population_path` when set) and writes logs, champions and
/// `summary.csv` into `out`.
fn run_experiment(
    config: &ExperimentConfig,
    out: &Path,
    options: &RunOptions,
    invocation: Invocation,
) -> Result<Vec<ReplicateOutcome>> {
    config.validate()?;
    let evaluator = config.evaluator()?;
    let seeds = config
        .seed_population_path
        .as_deref()
        .map(load_champions)
        .transpose()?;

    create_dir(out)?;
    create_dir(&out.join("champions"))?;
    if config.checkpoint_every.is_some() {
        create_dir(&out.join("checkpoints"))?;
    }
    Manifest::new(invocation).write(out)?;

    if let Some(seeds) = &seeds {
        let mut csv = String::from("champion_file,champion_id,loss\n");
        for (path, genome) in seeds {
            let eval = evaluator.evaluate(genome)?;
            csv.push_str(&format!("{},{},{}\n", path.display(), genome.id, eval.loss));
        }
        write_file(&out.join("seed_losses.csv"), &csv)?;
    }
    let seed_genomes: Option<Vec<Genome>> = seeds.map(|s| s.into_iter().map(|(_, g)| g).collect());

    let pool = options.pool()?;
    let outcomes: Vec<ReplicateOutcome> = pool.install(|| {
        (0..config.replicates)
            .into_par_iter()
            .map(|r| run_replicate(config, &evaluator, seed_genomes.as_deref(), r, out, options))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut summary = format!("{SUMMARY_HEADER}\n");
    for outcome in &outcomes {
        let dir = out.join(format!("replicate_{:02}", outcome.replicate));
        create_dir(&dir)?;
        write_file(&dir.join("log.csv"), &outcome.log.to_csv())?;
        outcome
            .champion
            .genome
            .save(out.join("champions").join(format!("replicate_{:02}.json", outcome.replicate)))?;
        summary.push_str(&summary_row(&config.variant, outcome));
        summary.push('\n');
    }
    write_file(&out.join("summary.csv"), &summary)?;
    Ok(outcomes)
}

/// `evolve`: independent replicates with seeds `master_seed + r`.
pub fn cmd_evolve(config: &ExperimentConfig, out: &Path, options: &RunOptions) -> Result<Vec<ReplicateOutcome>> {
    run_experiment(
        config,
        out,
        options,
        Invocation::Evolve {
            config: config.clone(),
        },
    )
}

/// `finetune`: seeds each replicate's population with the champions found
/// under `champions_dir` and evolves them on `target` under `variant`.
pub fn cmd_finetune(
    champions_dir: &Path,
    target: &TargetSpec,
    variant: Variant,
    config: &ExperimentConfig,
    out: &Path,
    options: &RunOptions,
) -> Result<Vec<ReplicateOutcome>> {
    let tuned = ExperimentConfig {
        variant,
        target: target.clone(),
        seed_population_path: Some(champions_dir.to_path_buf()),
        ..config.clone()
    };
    // surfaces target/grid mismatches before any work starts
    tuned.target.build(tuned.grid_size)?;
    run_experiment(
        &tuned,
        out,
        options,
        Invocation::Finetune {
            config: config.clone(),
            champions_dir: champions_dir.to_path_buf(),
            target: target.clone(),
            variant,
        },
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub variants: Vec<(Variant, Vec<ReplicateOutcome>)>,
    pub bonferroni_alpha: f64,
}

/// `sweep-k`: both loss-only controls plus one empowerment variant per
/// horizon, followed by a comparison table.
pub fn cmd_sweep_k(base: &ExperimentConfig, k_list: &[usize], out: &Path, options: &RunOptions) -> Result<SweepOutcome> {
    if k_list.is_empty() {
        return Err(Error::InvalidConfig("k list is empty".into()));
    }
    for &k in k_list {
        if k == 0 || k >= base.steps {
            return Err(Error::InvalidHorizon { k, steps: base.steps });
        }
    }
    let crop_last = match base.variant {
        Variant::TriLossEmpowerment { crop_last, .. } => crop_last,
        _ => None,
    };
    let mut variants = vec![Variant::BiLoss, Variant::TriLoss];
    variants.extend(k_list.iter().map(|&k| Variant::TriLossEmpowerment { k, crop_last }));
    for v in &variants {
        ExperimentConfig { variant: *v, ..base.clone() }.validate()?;
    }

    create_dir(out)?;
    Manifest::new(Invocation::SweepK {
        config: base.clone(),
        k_list: k_list.to_vec(),
    })
    .write(out)?;

    let mut results = Vec::with_capacity(variants.len());
    for variant in variants {
        let config = ExperimentConfig {
            variant,
            ..base.clone()
        };
        let outcomes = cmd_evolve(&config, &out.join(variant.slug()), options)?;
        results.push((variant, outcomes));
    }

    let alpha = bonferroni_alpha(0.05, 2 * k_list.len());
    let mut summary = format!("{SWEEP_SUMMARY_HEADER}\n");
    for (variant, outcomes) in &results {
        for o in outcomes {
            summary.push_str(&format!(
                "{},{},{},{},{}\n",
                variant.label(),
                variant.horizon().map(|k| k.to_string()).unwrap_or_default(),
                o.replicate,
                o.seed,
                o.champion.loss
            ));
        }
    }
    write_file(&out.join("summary.csv"), &summary)?;

    let losses = |outcomes: &[ReplicateOutcome]| -> Vec<f64> { outcomes.iter().map(|o| o.champion.loss).collect() };
    let bi = losses(&results[0].1);
    let tri = losses(&results[1].1);
    let mut table = format!("{SWEEP_TABLE_HEADER}\n");
    for (variant, outcomes) in &results {
        let l = losses(outcomes);
        let ci = mean_ci95(&l);
        let (p_bi, p_tri) = if variant.horizon().is_some() {
            (
                rank_sum_test(&l, &bi).ok().map(|r| r.p_value),
                rank_sum_test(&l, &tri).ok().map(|r| r.p_value),
            )
        } else {
            (None, None)
        };
        let sig = |p: Option<f64>| p.map(|p| (p < alpha).to_string()).unwrap_or_default();
        table.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            variant.label(),
            variant.horizon().map(|k| k.to_string()).unwrap_or_default(),
            l.len(),
            ci.mean,
            ci.low,
            ci.high,
            median(&l),
            fmt_opt(p_bi),
            fmt_opt(p_tri),
            alpha,
            sig(p_bi),
            sig(p_tri),
        ));
    }
    write_file(&out.join("table.csv"), &table)?;
    Ok(SweepOutcome {
        variants: results,
        bonferroni_alpha: alpha,
    })
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub target: Option<TargetSpec>,
    pub frames_dir: Option<PathBuf>,
    pub trace_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutcome {
    /// Terminal rendering of the final state.
    pub ascii: String,
    pub frames: Vec<PathBuf>,
    pub trace_lines: usize,
}

#[derive(Serialize)]
struct TraceLine {
    step: usize,
    alive: usize,
    loss: Option<f64>,
    /// `[value, count]` pairs in ascending value order.
    actions: Vec<[u32; 2]>,
    sensors: Vec<[u32; 2]>,
}

fn histogram(values: impl Iterator<Item = u8>) -> Vec<[u32; 2]> {
    let mut counts = [0u32; 256];
    for v in values {
        counts[usize::from(v)] += 1;
    }
    (0..256u32)
        .filter(|&v| counts[v as usize] > 0)
        .map(|v| [v, counts[v as usize]])
        .collect()
}

/// `simulate`: one rollout of a saved genome, with optional frame and NDJSON
/// trace export.
pub fn cmd_simulate(genome_path: &Path, params: &RolloutParams, options: &SimulateOptions) -> Result<SimulateOutcome> {
    let genome = Genome::load(genome_path)?;
    let target: Option<TargetShape> = options
        .target
        .as_ref()
        .map(|t| t.build(params.grid_size))
        .transpose()?;
    let trace = rollout(&genome, params, true)?;
    let grids = trace.grids().ok_or(Error::MissingGrids)?;

    let frames = match &options.frames_dir {
        Some(dir) => write_frames(grids, dir)?,
        None => Vec::new(),
    };

    let mut trace_lines = 0;
    if let Some(path) = &options.trace_path {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            create_dir(parent)?;
        }
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        let m = params.grid_size;
        for (n, grid) in grids.iter().enumerate().skip(1) {
            let records = &trace.cell_steps()[(n - 1) * m * m..n * m * m];
            let line = TraceLine {
                step: n,
                alive: grid.alive_count(),
                loss: target.as_ref().map(|t| mask_distance(grid, t)).transpose()?,
                actions: histogram(records.iter().filter_map(|c| c.action())),
                sensors: histogram(records.iter().filter_map(|c| c.sensor())),
            };
            let text = serde_json::to_string(&line).expect("trace line serializes");
            writeln!(w, "{text}").map_err(|e| Error::io(path, e))?;
            trace_lines += 1;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }

    Ok(SimulateOutcome {
        ascii: ascii_render(grids.last().expect("N+1 grids")),
        frames,
        trace_lines,
    })
}
