use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{create_dir, write_file, Invocation, Manifest, RunOptions, Variant, MANIFEST_FILE};
use crate::error::{Error, Result};
use crate::metrics::{
    bonferroni_alpha, boundary_proportion, connected_components, extended_loss_series, instability,
    rank_sum_test, stability_slope, transiency, Connectivity,
};
use crate::nca::{rollout, Genome, RolloutParams};
use crate::objectives::loss;
use crate::shapes::TargetShape;

pub const METRICS_HEADER: &str = "run_id,variant,k,metric,value";

#[derive(Debug, Clone, Default)]
pub struct AnalysisConfig {
    /// Updates simulated past the evolved horizon; `None` means N more.
    pub extra_steps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub run_id: String,
    pub variant: Variant,
    pub metric: &'static str,
    pub value: f64,
}

impl MetricRow {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.run_id,
            self.variant.label(),
            self.variant.horizon().map(|k| k.to_string()).unwrap_or_default(),
            self.metric,
            self.value
        )
    }
}

struct Job {
    run_id: String,
    variant: Variant,
    params: RolloutParams,
    target: TargetShape,
    genome: Genome,
}

fn find_manifests(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let manifest = dir.join(MANIFEST_FILE);
    if manifest.is_file() {
        out.push(manifest);
    }
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            find_manifests(&path, out)?;
        }
    }
    Ok(())
}

fn analyze_one(job: &Job, extra: Option<usize>) -> Result<Vec<MetricRow>> {
    let n = job.params.steps;
    let extra = extra.unwrap_or(n);
    let trace = rollout(&job.genome, &job.params, true)?;
    let grids = trace.grids().ok_or(Error::MissingGrids)?;
    let final_state = &grids[n];
    let trans = transiency(&trace)?;

    let mut values: Vec<(&'static str, f64)> = vec![
        ("final_loss", loss(&trace, &job.target, 0, n)?),
        ("instability", instability(&job.genome, &job.params)?),
        ("transiency_mean", trans.mean.value),
        ("transiency_total", trans.total as f64),
        ("connected_components", connected_components(final_state, Connectivity::Four) as f64),
        ("connected_components_8", connected_components(final_state, Connectivity::Eight) as f64),
        ("boundary_proportion", boundary_proportion(final_state)),
    ];
    if extra >= 2 {
        let series = extended_loss_series(&job.genome, &job.params, extra, &job.target)?;
        values.push(("stability_slope", stability_slope(&series, n + 1, n + extra)?));
        values.push(("extended_final_loss", series.last().map_or(f64::NAN, |p| p.1)));
    }
    Ok(values
        .into_iter()
        .map(|(metric, value)| MetricRow {
            run_id: job.run_id.clone(),
            variant: job.variant,
            metric,
            value,
        })
        .collect())
}

/// `analyze`: metric battery for every champion of every run directory under
/// `dir`, written to `metrics.csv`, plus pairwise rank-sum comparisons between
/// variants in `rank_sum.csv`.
pub fn cmd_analyze(dir: &Path, analysis: &AnalysisConfig, out: &Path, options: &RunOptions) -> Result<Vec<MetricRow>> {
    let mut manifests = Vec::new();
    find_manifests(dir, &mut manifests)?;
    manifests.sort();

    let mut jobs = Vec::new();
    for manifest_path in manifests {
        let manifest = Manifest::load(&manifest_path)?;
        let config = match manifest.invocation {
            Invocation::Evolve { config } => config,
            Invocation::Finetune {
                config,
                target,
                variant,
                ..
            } => super::ExperimentConfig {
                variant,
                target,
                ..config
            },
            // the per-variant subdirectories carry their own manifests
            Invocation::SweepK { .. } => continue,
        };
        let run_dir = manifest_path.parent().expect("manifest has a parent");
        let champions_dir = run_dir.join("champions");
        if !champions_dir.is_dir() {
            continue;
        }
        let target = config.target.build(config.grid_size)?;
        let rel = run_dir.strip_prefix(dir).unwrap_or(run_dir);
        let rel = if rel.as_os_str().is_empty() {
            ".".to_string()
        } else {
            rel.to_string_lossy().replace('\\', "/")
        };
        let mut files: Vec<PathBuf> = fs::read_dir(&champions_dir)
            .map_err(|e| Error::io(&champions_dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "json"))
            .collect();
        files.sort();
        for file in files {
            let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            jobs.push(Job {
                run_id: format!("{rel}/{stem}"),
                variant: config.variant,
                params: config.rollout_params(),
                target: target.clone(),
                genome: Genome::load(&file)?,
            });
        }
    }
    if jobs.is_empty() {
        return Err(Error::NoChampions);
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let rows: Vec<MetricRow> = pool
        .install(|| {
            jobs.par_iter()
                .map(|job| analyze_one(job, analysis.extra_steps))
                .collect::<Result<Vec<_>>>()
        })?
        .into_iter()
        .flatten()
        .collect();

    create_dir(out)?;
    let mut csv = format!("{METRICS_HEADER}\n");
    for row in &rows {
        csv.push_str(&row.to_csv());
        csv.push('\n');
    }
    write_file(&out.join("metrics.csv"), &csv)?;
    write_file(&out.join("rank_sum.csv"), &rank_sum_report(&rows))?;
    Ok(rows)
}

fn rank_sum_report(rows: &[MetricRow]) -> String {
    // metric -> variant slug -> values
    let mut groups: BTreeMap<&str, BTreeMap<String, Vec<f64>>> = BTreeMap::new();
    for row in rows {
        groups
            .entry(row.metric)
            .or_default()
            .entry(row.variant.slug())
            .or_default()
            .push(row.value);
    }
    let mut out = String::from("metric,variant_a,variant_b,n_a,n_b,u,p_value,bonferroni_alpha,significant\n");
    for (metric, by_variant) in &groups {
        let names: Vec<&String> = by_variant.keys().collect();
        let pairs = names.len() * names.len().saturating_sub(1) / 2;
        let alpha = bonferroni_alpha(0.05, pairs);
        for (i, a) in names.iter().enumerate() {
            for b in &names[i + 1..] {
                let (va, vb) = (&by_variant[*a], &by_variant[*b]);
                let (u, p, sig) = match rank_sum_test(va, vb) {
                    Ok(r) => (r.u.to_string(), r.p_value.to_string(), (r.p_value < alpha).to_string()),
                    Err(_) => (String::new(), String::new(), String::new()),
                };
                out.push_str(&format!(
                    "{metric},{a},{b},{},{},{u},{p},{alpha},{sig}\n",
                    va.len(),
                    vb.len()
                ));
            }
        }
    }
    out
}
