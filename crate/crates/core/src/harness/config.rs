//! Experiment configuration.
//!
//! Configs are JSON objects; every field is optional and defaults to the
//! `desk` preset. Unknown keys are rejected and errors name the offending
//! field path, e.g.
//!
//! ```json
//! {
//!   "variant": {"tri_loss_empowerment": {"k": 1, "crop_last": null}},
//!   "grid_size": 25,
//!   "steps": 50,
//!   "population_size": 100,
//!   "generations": 200,
//!   "replicates": 10,
//!   "master_seed": 0,
//!   "target": "square:12",
//!   "death_rule": "overwrite_always",
//!   "update_schedule": "raster",
//!   "mutation_sigma": 0.5,
//!   "checkpoint_every": null,
//!   "seed_population_path": null,
//!   "output_dir": null
//! }
//! ```
//!
//! `variant` is one of `"bi_loss"`, `"tri_loss"`,
//! `{"tri_loss_empowerment": {"k": K, "crop_last": C}}`,
//! `"tri_loss_local_entropy_min"`, `"tri_loss_local_entropy_max"` or
//! `"tri_loss_global_entropy_min"`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{EvolutionConfig, Evaluator, MutationParams};
use crate::nca::{DeathRule, RolloutParams, UpdateSchedule};
use crate::objectives::ObjectiveSpec;
use crate::shapes::TargetSpec;

/// Which objectives accompany age.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Variant {
    /// Age, L(0, N).
    BiLoss,
    /// Age, L(0, N/2), L(N/2, N).
    TriLoss,
    /// Age, L(0, N), E(k).
    TriLossEmpowerment {
        k: usize,
        #[serde(default)]
        crop_last: Option<usize>,
    },
    /// Age, L(0, N), minimized mean per-cell action entropy.
    TriLossLocalEntropyMin,
    /// Age, L(0, N), maximized mean per-cell action entropy.
    TriLossLocalEntropyMax,
    /// Age, L(0, N), minimized pooled action entropy.
    TriLossGlobalEntropyMin,
}

impl Variant {
    pub fn objectives(&self, steps: usize) -> Vec<ObjectiveSpec> {
        let full = ObjectiveSpec::loss(0, steps);
        match *self {
            Variant::BiLoss => vec![full],
            Variant::TriLoss => vec![
                ObjectiveSpec::loss(0, steps / 2),
                ObjectiveSpec::loss(steps / 2, steps),
            ],
            Variant::TriLossEmpowerment { k, crop_last } => {
                vec![full, ObjectiveSpec::empowerment(k, crop_last)]
            }
            Variant::TriLossLocalEntropyMin => vec![full, ObjectiveSpec::local_entropy_min()],
            Variant::TriLossLocalEntropyMax => vec![full, ObjectiveSpec::local_entropy_max()],
            Variant::TriLossGlobalEntropyMin => vec![full, ObjectiveSpec::global_entropy_min()],
        }
    }

    pub fn horizon(&self) -> Option<usize> {
        match *self {
            Variant::TriLossEmpowerment { k, .. } => Some(k),
            _ => None,
        }
    }

    /// Name without the horizon, e.g. `tri_loss_empowerment` or
    /// `tri_loss_empowerment_crop5`.
    pub fn label(&self) -> String {
        match *self {
            Variant::BiLoss => "bi_loss".into(),
            Variant::TriLoss => "tri_loss".into(),
            Variant::TriLossEmpowerment { crop_last: None, .. } => "tri_loss_empowerment".into(),
            Variant::TriLossEmpowerment { crop_last: Some(c), .. } => {
                format!("tri_loss_empowerment_crop{c}")
            }
            Variant::TriLossLocalEntropyMin => "tri_loss_local_entropy_min".into(),
            Variant::TriLossLocalEntropyMax => "tri_loss_local_entropy_max".into(),
            Variant::TriLossGlobalEntropyMin => "tri_loss_global_entropy_min".into(),
        }
    }

    /// Directory-safe name including the horizon.
    pub fn slug(&self) -> String {
        match self.horizon() {
            Some(k) => format!("{}_k{k}", self.label()),
            None => self.label(),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.slug())
    }
}

/// `bi_loss`, `tri_loss`, `empowerment:K`, `empowerment:K:C`,
/// `local_entropy_min`, `local_entropy_max`, `global_entropy_min`.
impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown variant {s:?}"));
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or_default();
        let mut num = || -> Result<Option<usize>> {
            parts.next().map(|p| p.parse().map_err(|_| bad())).transpose()
        };
        let v = match head {
            "bi_loss" => Variant::BiLoss,
            "tri_loss" => Variant::TriLoss,
            "empowerment" | "tri_loss_empowerment" => {
                let k = num()?.ok_or_else(bad)?;
                Variant::TriLossEmpowerment { k, crop_last: num()? }
            }
            "local_entropy_min" | "tri_loss_local_entropy_min" => Variant::TriLossLocalEntropyMin,
            "local_entropy_max" | "tri_loss_local_entropy_max" => Variant::TriLossLocalEntropyMax,
            "global_entropy_min" | "tri_loss_global_entropy_min" => Variant::TriLossGlobalEntropyMin,
            _ => return Err(bad()),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(v)
    }
}

/// Named starting points for configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// P=4, G=2, 2 replicates: seconds.
    Smoke,
    /// P=100, G=200, 10 replicates: minutes per variant.
    Desk,
    /// P=400, G=2000, 35 replicates on a 25x25 grid: hours to days.
    Full,
    /// 50x50 grid, N=100, 24x24 square, P=400, G=1500, 35 replicates.
    HighRes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub variant: Variant,
    pub grid_size: usize,
    pub steps: usize,
    pub population_size: usize,
    pub generations: usize,
    pub replicates: usize,
    pub master_seed: u64,
    pub target: TargetSpec,
    pub death_rule: DeathRule,
    pub update_schedule: UpdateSchedule,
    pub mutation_sigma: f64,
    /// Write a full population checkpoint every this many generations.
    pub checkpoint_every: Option<usize>,
    /// Directory of champion genomes to seed the initial population from.
    pub seed_population_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig::preset(Preset::Desk)
    }
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let base = ExperimentConfig {
            variant: Variant::BiLoss,
            grid_size: 25,
            steps: 50,
            population_size: 100,
            generations: 200,
            replicates: 10,
            master_seed: 0,
            target: TargetSpec::Square(12),
            death_rule: DeathRule::default(),
            update_schedule: UpdateSchedule::default(),
            mutation_sigma: MutationParams::default().sigma,
            checkpoint_every: None,
            seed_population_path: None,
            output_dir: None,
        };
        match preset {
            Preset::Smoke => ExperimentConfig {
                population_size: 4,
                generations: 2,
                replicates: 2,
                ..base
            },
            Preset::Desk => base,
            Preset::Full => ExperimentConfig {
                population_size: 400,
                generations: 2000,
                replicates: 35,
                ..base
            },
            Preset::HighRes => ExperimentConfig {
                grid_size: 50,
                steps: 100,
                target: TargetSpec::Square(24),
                population_size: 400,
                generations: 1500,
                replicates: 35,
                ..base
            },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| Error::Schema {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Loads and validates a config file. Relative target and seed paths are
    /// resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = ExperimentConfig::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.target = config.target.resolved_against(base);
        if let Some(p) = &config.seed_population_path {
            if p.is_relative() {
                config.seed_population_path = Some(base.join(p));
            }
        }
        Ok(config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let field = |path: &str, message: String| Error::Schema {
            path: path.into(),
            message,
        };
        if self.grid_size < 3 {
            return Err(field("grid_size", format!("must be at least 3, got {}", self.grid_size)));
        }
        if self.steps < 2 {
            return Err(field("steps", format!("must be at least 2, got {}", self.steps)));
        }
        if self.population_size < 2 {
            return Err(field(
                "population_size",
                format!("must be at least 2, got {}", self.population_size),
            ));
        }
        if self.replicates == 0 {
            return Err(field("replicates", "must be at least 1".into()));
        }
        if !(self.mutation_sigma.is_finite() && self.mutation_sigma >= 0.0) {
            return Err(field(
                "mutation_sigma",
                format!("must be finite and non-negative, got {}", self.mutation_sigma),
            ));
        }
        if self.checkpoint_every == Some(0) {
            return Err(field("checkpoint_every", "must be positive".into()));
        }
        match self.variant {
            Variant::TriLoss if !self.steps.is_multiple_of(2) => {
                return Err(field("steps", format!("tri_loss needs an even step count, got {}", self.steps)));
            }
            Variant::TriLossEmpowerment { k, crop_last } => {
                if k == 0 || k >= self.steps {
                    return Err(field(
                        "variant.tri_loss_empowerment.k",
                        format!("must be in 1..={}, got {k}", self.steps - 1),
                    ));
                }
                if crop_last == Some(0) {
                    return Err(field("variant.tri_loss_empowerment.crop_last", "must be positive".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn rollout_params(&self) -> RolloutParams {
        RolloutParams {
            grid_size: self.grid_size,
            steps: self.steps,
            death_rule: self.death_rule,
            schedule: self.update_schedule,
        }
    }

    pub fn evaluator(&self) -> Result<Evaluator> {
        let target = self.target.build(self.grid_size)?;
        Evaluator::new(self.rollout_params(), target, self.variant.objectives(self.steps))
    }

    /// Evolution settings for replicate `r` (seed `master_seed + r`).
    pub fn evolution_config(&self, replicate: usize) -> EvolutionConfig {
        EvolutionConfig {
            population_size: self.population_size,
            generations: self.generations,
            mutation: MutationParams {
                sigma: self.mutation_sigma,
            },
            master_seed: self.replicate_seed(replicate),
            contraction_retries: None,
        }
    }

    pub fn replicate_seed(&self, replicate: usize) -> u64 {
        self.master_seed.wrapping_add(replicate as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_objectives() {
        let bi = Variant::BiLoss.objectives(50);
        assert_eq!(bi, vec![ObjectiveSpec::loss(0, 50)]);
        let tri = Variant::TriLoss.objectives(50);
        assert_eq!(tri, vec![ObjectiveSpec::loss(0, 25), ObjectiveSpec::loss(25, 50)]);
        let emp = Variant::TriLossEmpowerment { k: 17, crop_last: None }.objectives(50);
        assert_eq!(emp, vec![ObjectiveSpec::loss(0, 50), ObjectiveSpec::empowerment(17, None)]);
    }

    #[test]
    fn empty_object_is_desk_preset() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c, ExperimentConfig::preset(Preset::Desk));
        assert_eq!((c.population_size, c.generations, c.replicates), (100, 200, 10));
    }

    #[test]
    fn full_presets_validate() {
        let full = ExperimentConfig::preset(Preset::Full);
        assert_eq!((full.population_size, full.generations, full.replicates), (400, 2000, 35));
        full.validate().unwrap();
        let hi = ExperimentConfig {
            variant: Variant::TriLossEmpowerment { k: 90, crop_last: None },
            ..ExperimentConfig::preset(Preset::HighRes)
        };
        hi.validate().unwrap();
        assert_eq!(hi.evaluator().unwrap().target.cell_count(), 576);
    }

    #[test]
    fn unknown_keys_name_their_path() {
        let err = ExperimentConfig::from_json(r#"{"grid_size": 25, "popsize": 3}"#).unwrap_err();
        assert!(matches!(&err, Error::Schema { message, .. } if message.contains("popsize")), "{err}");

        let err = ExperimentConfig::from_json(r#"{"variant": {"tri_loss_empowerment": {"k": 1, "crop": 5}}}"#)
            .unwrap_err();
        assert!(matches!(&err, Error::Schema { path, .. } if path.starts_with("variant")), "{err}");

        let err = ExperimentConfig::from_json(r#"{"steps": "fifty"}"#).unwrap_err();
        assert!(matches!(&err, Error::Schema { path, .. } if path == "steps"), "{err}");

        let err = ExperimentConfig::from_json(r#"{"target": "circle:3"}"#).unwrap_err();
        assert!(matches!(&err, Error::Schema { path, .. } if path == "target"), "{err}");
    }

    #[test]
    fn semantic_validation() {
        let err = ExperimentConfig::from_json(r#"{"variant": {"tri_loss_empowerment": {"k": 50}}}"#).unwrap_err();
        assert!(matches!(&err, Error::Schema { path, .. } if path == "variant.tri_loss_empowerment.k"));
        let err = ExperimentConfig::from_json(r#"{"variant": "tri_loss", "steps": 51}"#).unwrap_err();
        assert!(matches!(&err, Error::Schema { path, .. } if path == "steps"));
        assert!(ExperimentConfig::from_json(r#"{"population_size": 1}"#).is_err());
    }

    #[test]
    fn variant_strings() {
        assert_eq!("bi_loss".parse::<Variant>().unwrap(), Variant::BiLoss);
        assert_eq!(
            "empowerment:1:5".parse::<Variant>().unwrap(),
            Variant::TriLossEmpowerment { k: 1, crop_last: Some(5) }
        );
        assert_eq!(
            "empowerment:45".parse::<Variant>().unwrap(),
            Variant::TriLossEmpowerment { k: 45, crop_last: None }
        );
        assert!("empowerment".parse::<Variant>().is_err());
        assert!("bi_loss:3".parse::<Variant>().is_err());
        assert_eq!(Variant::TriLossEmpowerment { k: 1, crop_last: Some(5) }.slug(), "tri_loss_empowerment_crop5_k1");
    }

    #[test]
    fn config_json_round_trip() {
        let c = ExperimentConfig {
            variant: Variant::TriLossEmpowerment { k: 5, crop_last: Some(5) },
            target: TargetSpec::File("shapes/biped.txt".into()),
            ..ExperimentConfig::preset(Preset::Smoke)
        };
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }
}
