//! Age-Fitness Pareto Optimization (AFPO) over genomes.
//!
//! Every individual carries a lineage age that is always minimized alongside
//! the configured objectives. Each generation, every member produces one
//! single-parameter mutant (inheriting the parent's age), one fresh random
//! genome enters with age 0, and the enlarged population is contracted back to
//! its target size by random pairwise dominance tournaments.
//!
//! Only the evolutionary loop consumes randomness (one ChaCha stream seeded
//! from the master seed). Rollouts are deterministic, so evaluating on any
//! number of threads yields identical runs.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nca::{rollout, Genome, RolloutParams, NUM_PARAMS};
use crate::objectives::{loss, Goal, ObjectiveSpec};
use crate::shapes::TargetShape;

/// Hands out run-unique genome ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdAllocator {
    next: u64,
}

impl IdAllocator {
    pub fn starting_at(next: u64) -> Self {
        IdAllocator { next }
    }

    pub fn next_id(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        id
    }
}

/// Genome with all 55 parameters drawn uniformly from [-1, 1].
pub fn random_genome<R: Rng + ?Sized>(rng: &mut R, ids: &mut IdAllocator) -> Genome {
    let params: Vec<f64> = (0..NUM_PARAMS).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Genome::from_params(ids.next_id(), None, &params).expect("uniform draws are in range")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutationParams {
    /// Standard deviation of the Gaussian added to one parameter.
    pub sigma: f64,
}

impl Default for MutationParams {
    fn default() -> Self {
        MutationParams { sigma: 0.5 }
    }
}

/// Copies `parent` and perturbs one uniformly chosen parameter, clamping the
/// result to [-1, 1].
pub fn mutate<R: Rng + ?Sized>(
    parent: &Genome,
    rng: &mut R,
    ids: &mut IdAllocator,
    mutation: &MutationParams,
) -> Genome {
    mutate_at(parent, rng, ids, mutation).0
}

/// [`mutate`], also returning the perturbed parameter index.
pub fn mutate_at<R: Rng + ?Sized>(
    parent: &Genome,
    rng: &mut R,
    ids: &mut IdAllocator,
    mutation: &MutationParams,
) -> (Genome, usize) {
    let mut child = parent.clone();
    child.id = ids.next_id();
    child.parent_id = Some(parent.id);
    let index = rng.random_range(0..NUM_PARAMS);
    let noise = Normal::new(0.0, mutation.sigma)
        .expect("mutation sigma is finite and non-negative")
        .sample(rng);
    let p = child.param_mut(index);
    *p = (*p + noise).clamp(-1.0, 1.0);
    (child, index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Genome,
    /// Generations since this lineage was injected or seeded.
    pub age: u32,
    /// Values aligned with the run's objective list (age excluded).
    pub objectives: Vec<f64>,
    /// Loss over the full rollout, used to pick champions.
    pub loss: f64,
    pub evaluated: bool,
}

impl Individual {
    pub fn unevaluated(genome: Genome, age: u32) -> Self {
        Individual {
            genome,
            age,
            objectives: Vec::new(),
            loss: f64::NAN,
            evaluated: false,
        }
    }

    pub fn id(&self) -> u64 {
        self.genome.id
    }

    fn same_vector(&self, other: &Individual) -> bool {
        self.age == other.age && self.objectives == other.objectives
    }
}

/// Rolls genomes out and scores them.
#[derive(Debug, Clone)]
pub struct Evaluator {
    pub params: RolloutParams,
    pub target: TargetShape,
    pub objectives: Vec<ObjectiveSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub objectives: Vec<f64>,
    pub loss: f64,
}

impl Evaluator {
    pub fn new(params: RolloutParams, target: TargetShape, objectives: Vec<ObjectiveSpec>) -> Result<Self> {
        if objectives.is_empty() {
            return Err(Error::InvalidConfig("at least one objective besides age is required".into()));
        }
        if target.size() != params.grid_size {
            return Err(Error::ShapeMismatch {
                expected: params.grid_size,
                actual: target.size(),
            });
        }
        for spec in &objectives {
            spec.validate(params.steps)?;
        }
        Ok(Evaluator {
            params,
            target,
            objectives,
        })
    }

    pub fn evaluate(&self, genome: &Genome) -> Result<Evaluation> {
        let trace = rollout(genome, &self.params, true)?;
        let objectives = self
            .objectives
            .iter()
            .map(|spec| spec.evaluate(&trace, &self.target))
            .collect::<Result<Vec<_>>>()?;
        let loss = loss(&trace, &self.target, 0, self.params.steps)?;
        Ok(Evaluation { objectives, loss })
    }

    /// Evaluates every unevaluated individual, in parallel on the current
    /// rayon pool.
    pub fn evaluate_all(&self, population: &mut [Individual]) -> Result<()> {
        population
            .par_iter_mut()
            .filter(|ind| !ind.evaluated)
            .try_for_each(|ind| {
                let eval = self.evaluate(&ind.genome)?;
                ind.objectives = eval.objectives;
                ind.loss = eval.loss;
                ind.evaluated = true;
                Ok(())
            })
    }

    pub fn goals(&self) -> Vec<Goal> {
        self.objectives.iter().map(|s| s.goal).collect()
    }
}

/// Pareto dominance on `(age, objectives...)`, with age minimized and every
/// other objective following its goal.
pub fn dominates(a: &Individual, b: &Individual, specs: &[ObjectiveSpec]) -> Result<bool> {
    for ind in [a, b] {
        if !ind.evaluated {
            return Err(Error::NotEvaluated(ind.id()));
        }
        if ind.objectives.len() != specs.len() {
            return Err(Error::ObjectiveMismatch(format!(
                "individual {} has {} objective values for {} specs",
                ind.id(),
                ind.objectives.len(),
                specs.len()
            )));
        }
    }
    let goals: Vec<Goal> = specs.iter().map(|s| s.goal).collect();
    Ok(dominates_unchecked(a, b, &goals))
}

fn dominates_unchecked(a: &Individual, b: &Individual, goals: &[Goal]) -> bool {
    if a.age > b.age {
        return false;
    }
    let mut strictly = a.age < b.age;
    for ((&x, &y), goal) in a.objectives.iter().zip(&b.objectives).zip(goals) {
        let (better, worse) = match goal {
            Goal::Minimize => (x < y, x > y),
            Goal::Maximize => (x > y, x < y),
        };
        if worse {
            return false;
        }
        strictly |= better;
    }
    strictly
}

/// Ids of members not dominated by any other member.
pub fn pareto_front(population: &[Individual], goals: &[Goal]) -> Vec<u64> {
    population
        .iter()
        .filter(|a| !population.iter().any(|b| dominates_unchecked(b, a, goals)))
        .map(Individual::id)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemovalReason {
    Dominated,
    Duplicate,
    EscapeHatch,
}

/// What happened during one generation, for logging and invariant checks.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GenerationReport {
    pub generation: usize,
    /// Fresh random genomes added this generation.
    pub injected: Vec<u64>,
    pub removed: Vec<(u64, RemovalReason)>,
    /// Non-dominated members of the enlarged population before contraction.
    pub expanded_front: Vec<u64>,
    /// Survivors still dominated by another survivor once the population is
    /// back at its target size.
    pub retained_dominated: Vec<u64>,
}

impl GenerationReport {
    pub fn escape_hatch_removals(&self) -> usize {
        self.removed
            .iter()
            .filter(|(_, r)| *r == RemovalReason::EscapeHatch)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub generations: usize,
    pub mutation: MutationParams,
    pub master_seed: u64,
    /// Pair draws per removal before the escape hatch; `None` means
    /// 20 x current population size.
    pub contraction_retries: Option<usize>,
}

impl EvolutionConfig {
    pub fn new(population_size: usize, generations: usize, master_seed: u64) -> Self {
        EvolutionConfig {
            population_size,
            generations,
            mutation: MutationParams::default(),
            master_seed,
            contraction_retries: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::InvalidConfig(format!(
                "population_size must be at least 2, got {}",
                self.population_size
            )));
        }
        if !(self.mutation.sigma.is_finite() && self.mutation.sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "mutation sigma must be finite and non-negative, got {}",
                self.mutation.sigma
            )));
        }
        Ok(())
    }
}

/// One AFPO generation: mutate every member, inject one random genome,
/// evaluate the newcomers, contract back to `population_size`, then age every
/// survivor by one.
pub fn afpo_generation(
    population: Vec<Individual>,
    config: &EvolutionConfig,
    evaluator: &Evaluator,
    rng: &mut ChaCha8Rng,
    ids: &mut IdAllocator,
) -> Result<(Vec<Individual>, GenerationReport)> {
    if let Some(ind) = population.iter().find(|i| !i.evaluated) {
        return Err(Error::NotEvaluated(ind.id()));
    }
    let mut report = GenerationReport::default();
    let mut next = population;
    let parents = next.len();
    for i in 0..parents {
        let child = mutate(&next[i].genome, rng, ids, &config.mutation);
        next.push(Individual::unevaluated(child, next[i].age));
    }
    let newcomer = random_genome(rng, ids);
    report.injected.push(newcomer.id);
    next.push(Individual::unevaluated(newcomer, 0));
    evaluator.evaluate_all(&mut next)?;

    let goals = evaluator.goals();
    report.expanded_front = pareto_front(&next, &goals);
    contract(&mut next, config, &goals, rng, &mut report);
    for ind in &mut next {
        ind.age += 1;
    }
    report.retained_dominated = next
        .iter()
        .filter(|a| next.iter().any(|b| dominates_unchecked(b, a, &goals)))
        .map(Individual::id)
        .collect();
    Ok((next, report))
}

fn contract(
    population: &mut Vec<Individual>,
    config: &EvolutionConfig,
    goals: &[Goal],
    rng: &mut ChaCha8Rng,
    report: &mut GenerationReport,
) {
    while population.len() > config.population_size {
        let retries = config.contraction_retries.unwrap_or(20 * population.len());
        let mut victim = None;
        for _ in 0..retries {
            let i = rng.random_range(0..population.len());
            let mut j = rng.random_range(0..population.len() - 1);
            if j >= i {
                j += 1;
            }
            let (a, b) = (&population[i], &population[j]);
            if dominates_unchecked(a, b, goals) {
                victim = Some((j, RemovalReason::Dominated));
            } else if dominates_unchecked(b, a, goals) {
                victim = Some((i, RemovalReason::Dominated));
            } else if a.same_vector(b) {
                let pick = if rng.random_bool(0.5) { i } else { j };
                victim = Some((pick, RemovalReason::Duplicate));
            }
            if victim.is_some() {
                break;
            }
        }
        let (index, reason) = victim.unwrap_or_else(|| (escape_hatch(population, goals, rng), RemovalReason::EscapeHatch));
        let removed = population.remove(index);
        if reason == RemovalReason::EscapeHatch {
            log::debug!(
                "contraction escape hatch removed {} (age {}) after {retries} draws",
                removed.id(),
                removed.age
            );
        }
        report.removed.push((removed.id(), reason));
    }
}

/// Index of a random oldest dominated member, or of any random member when
/// nobody is dominated.
fn escape_hatch(population: &[Individual], goals: &[Goal], rng: &mut ChaCha8Rng) -> usize {
    let dominated: Vec<usize> = (0..population.len())
        .filter(|&i| population.iter().any(|b| dominates_unchecked(b, &population[i], goals)))
        .collect();
    if dominated.is_empty() {
        return rng.random_range(0..population.len());
    }
    let oldest = dominated.iter().map(|&i| population[i].age).max().unwrap_or(0);
    let candidates: Vec<usize> = dominated
        .into_iter()
        .filter(|&i| population[i].age == oldest)
        .collect();
    *candidates.choose(rng).expect("non-empty")
}

/// Builds a population from champions: each champion verbatim with age 0
/// (under a fresh id, its original id kept as `parent_id`), then mutants of
/// the champions taken round-robin until `population_size` is reached.
pub fn seed_population<R: Rng + ?Sized>(
    champions: &[Genome],
    config: &EvolutionConfig,
    rng: &mut R,
    ids: &mut IdAllocator,
) -> Result<Vec<Individual>> {
    if champions.is_empty() {
        return Err(Error::NoChampions);
    }
    if champions.len() > config.population_size {
        log::warn!(
            "{} champions exceed population size {}; keeping the first {}",
            champions.len(),
            config.population_size,
            config.population_size
        );
    }
    let verbatim: Vec<Genome> = champions
        .iter()
        .take(config.population_size)
        .map(|g| {
            let mut copy = g.clone();
            copy.parent_id = Some(g.id);
            copy.id = ids.next_id();
            copy
        })
        .collect();
    let mut population: Vec<Individual> = verbatim
        .iter()
        .cloned()
        .map(|g| Individual::unevaluated(g, 0))
        .collect();
    let mut i = 0;
    while population.len() < config.population_size {
        let child = mutate(&verbatim[i % verbatim.len()], rng, ids, &config.mutation);
        population.push(Individual::unevaluated(child, 0));
        i += 1;
    }
    Ok(population)
}

/// One row of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub generation: usize,
    pub best_loss: f64,
    pub mean_loss: f64,
    /// Best/mean of the second configured objective, when there is one.
    pub best_obj3: Option<f64>,
    pub mean_obj3: Option<f64>,
    /// Age of the lowest-loss member.
    pub best_age: u32,
    pub pop_size: usize,
}

pub const LOG_HEADER: &str = "generation,best_loss,mean_loss,best_obj3,mean_obj3,best_age,pop_size";

impl LogRow {
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.generation,
            self.best_loss,
            self.mean_loss,
            opt(self.best_obj3),
            opt(self.mean_obj3),
            self.best_age,
            self.pop_size
        )
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
    /// Lowest loss seen in any evaluated population: (generation, id, loss).
    pub best_ever: Option<(usize, u64, f64)>,
    pub escape_hatch_removals: usize,
}

impl RunLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(LOG_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.to_csv());
            out.push('\n');
        }
        out
    }

    fn observe(&mut self, generation: usize, population: &[Individual]) {
        if let Some(best) = champion(population) {
            if self.best_ever.is_none_or(|(_, _, l)| best.loss < l) {
                self.best_ever = Some((generation, best.id(), best.loss));
            }
        }
    }
}

/// Lowest full-rollout loss; ties go to the younger, then the lower id.
pub fn champion(population: &[Individual]) -> Option<&Individual> {
    population.iter().filter(|i| i.evaluated).min_by(|a, b| {
        a.loss
            .total_cmp(&b.loss)
            .then(a.age.cmp(&b.age))
            .then(a.id().cmp(&b.id()))
    })
}

fn log_row(generation: usize, population: &[Individual], goals: &[Goal]) -> LogRow {
    let n = population.len() as f64;
    let best = champion(population).expect("population is evaluated and non-empty");
    let third = (goals.len() > 1).then(|| {
        let values = population.iter().map(|i| i.objectives[1]);
        let best = match goals[1] {
            Goal::Minimize => values.clone().fold(f64::INFINITY, f64::min),
            Goal::Maximize => values.clone().fold(f64::NEG_INFINITY, f64::max),
        };
        (best, values.sum::<f64>() / n)
    });
    LogRow {
        generation,
        best_loss: best.loss,
        mean_loss: population.iter().map(|i| i.loss).sum::<f64>() / n,
        best_obj3: third.map(|t| t.0),
        mean_obj3: third.map(|t| t.1),
        best_age: best.age,
        pop_size: population.len(),
    }
}

/// Serializable snapshot of a run between generations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub generation: usize,
    pub rng: ChaCha8Rng,
    pub ids: IdAllocator,
    pub population: Vec<Individual>,
    pub log: RunLog,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub champion: Individual,
    pub log: RunLog,
    pub population: Vec<Individual>,
}

/// A run in progress; advance it with [`Evolution::step`].
pub struct Evolution<'a> {
    config: EvolutionConfig,
    evaluator: &'a Evaluator,
    rng: ChaCha8Rng,
    ids: IdAllocator,
    population: Vec<Individual>,
    generation: usize,
    log: RunLog,
}

impl<'a> Evolution<'a> {
    /// Starts from `population_size` random genomes.
    pub fn new(config: EvolutionConfig, evaluator: &'a Evaluator) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
        let mut ids = IdAllocator::default();
        let population = (0..config.population_size)
            .map(|_| Individual::unevaluated(random_genome(&mut rng, &mut ids), 0))
            .collect();
        Self::start(config, evaluator, rng, ids, population)
    }

    /// Starts from a population seeded with `champions`.
    pub fn seeded(config: EvolutionConfig, evaluator: &'a Evaluator, champions: &[Genome]) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
        let first_free = champions.iter().map(|g| g.id + 1).max().unwrap_or(0);
        let mut ids = IdAllocator::starting_at(first_free);
        let population = seed_population(champions, &config, &mut rng, &mut ids)?;
        Self::start(config, evaluator, rng, ids, population)
    }

    /// Resumes a run from a checkpoint written by [`Evolution::checkpoint`].
    pub fn resume(config: EvolutionConfig, evaluator: &'a Evaluator, checkpoint: Checkpoint) -> Result<Self> {
        config.validate()?;
        let mut evo = Evolution {
            config,
            evaluator,
            rng: checkpoint.rng,
            ids: checkpoint.ids,
            population: checkpoint.population,
            generation: checkpoint.generation,
            log: checkpoint.log,
        };
        evaluator.evaluate_all(&mut evo.population)?;
        Ok(evo)
    }

    fn start(
        config: EvolutionConfig,
        evaluator: &'a Evaluator,
        rng: ChaCha8Rng,
        ids: IdAllocator,
        mut population: Vec<Individual>,
    ) -> Result<Self> {
        evaluator.evaluate_all(&mut population)?;
        let mut log = RunLog::default();
        log.observe(0, &population);
        Ok(Evolution {
            config,
            evaluator,
            rng,
            ids,
            population,
            generation: 0,
            log,
        })
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn population(&self) -> &[Individual] {
        &self.population
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    pub fn is_finished(&self) -> bool {
        self.generation >= self.config.generations
    }

    pub fn champion(&self) -> &Individual {
        champion(&self.population).expect("population is never empty")
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            generation: self.generation,
            rng: self.rng.clone(),
            ids: self.ids.clone(),
            population: self.population.clone(),
            log: self.log.clone(),
        }
    }

    /// Runs one generation and appends its log row.
    pub fn step(&mut self) -> Result<GenerationReport> {
        let population = std::mem::take(&mut self.population);
        let (next, mut report) =
            afpo_generation(population, &self.config, self.evaluator, &mut self.rng, &mut self.ids)?;
        self.population = next;
        self.generation += 1;
        report.generation = self.generation;
        self.log.escape_hatch_removals += report.escape_hatch_removals();
        self.log.rows.push(log_row(self.generation, &self.population, &self.evaluator.goals()));
        self.log.observe(self.generation, &self.population);
        Ok(report)
    }

    /// Runs the remaining generations.
    pub fn run(mut self) -> Result<RunResult> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(self.finish())
    }

    pub fn finish(self) -> RunResult {
        RunResult {
            champion: self.champion().clone(),
            log: self.log,
            population: self.population,
        }
    }
}

/// Runs a full evolution from a random population.
pub fn evolve(config: &EvolutionConfig, evaluator: &Evaluator) -> Result<RunResult> {
    Evolution::new(config.clone(), evaluator)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::square_target;

    fn evaluated(age: u32, objectives: &[f64]) -> Individual {
        Individual {
            genome: Genome::zeros(0),
            age,
            objectives: objectives.to_vec(),
            loss: objectives[0],
            evaluated: true,
        }
    }

    fn small_evaluator(specs: Vec<ObjectiveSpec>) -> Evaluator {
        Evaluator::new(RolloutParams::new(9, 10), square_target(9, 4).unwrap(), specs).unwrap()
    }

    #[test]
    fn dominance_examples() {
        let loss_only = [ObjectiveSpec::loss(0, 50)];
        let a = evaluated(1, &[0.1]);
        let b = evaluated(2, &[0.2]);
        assert!(dominates(&a, &b, &loss_only).unwrap());
        assert!(!dominates(&b, &a, &loss_only).unwrap());

        let c = evaluated(1, &[0.2]);
        let d = evaluated(2, &[0.1]);
        assert!(!dominates(&c, &d, &loss_only).unwrap());
        assert!(!dominates(&d, &c, &loss_only).unwrap());

        let specs = [ObjectiveSpec::loss(0, 50), ObjectiveSpec::empowerment(1, None)];
        let e = evaluated(1, &[0.1, 2.0]);
        let f = evaluated(1, &[0.1, 1.0]);
        assert!(dominates(&e, &f, &specs).unwrap());
        assert!(!dominates(&f, &e, &specs).unwrap());
        assert!(!dominates(&e, &e, &specs).unwrap());

        assert!(matches!(dominates(&a, &e, &specs), Err(Error::ObjectiveMismatch(_))));
        let mut raw = a.clone();
        raw.evaluated = false;
        assert!(matches!(dominates(&raw, &b, &loss_only), Err(Error::NotEvaluated(_))));
    }

    #[test]
    fn random_genome_is_seeded() {
        let mut ids = IdAllocator::default();
        let a = random_genome(&mut ChaCha8Rng::seed_from_u64(1), &mut ids);
        let b = random_genome(&mut ChaCha8Rng::seed_from_u64(1), &mut ids);
        let c = random_genome(&mut ChaCha8Rng::seed_from_u64(2), &mut ids);
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
        assert_ne!(a.id, b.id);
    }

    #[test]
    fn mutation_changes_one_parameter() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ids = IdAllocator::starting_at(10);
        let parent = Genome::zeros(9);
        for _ in 0..200 {
            let (child, idx) = mutate_at(&parent, &mut rng, &mut ids, &MutationParams::default());
            let changed: Vec<usize> = (0..NUM_PARAMS).filter(|&i| child.param(i) != parent.param(i)).collect();
            assert_eq!(changed, vec![idx]);
            assert_eq!(child.parent_id, Some(9));
            assert!(child.validate().is_ok());
        }
    }

    #[test]
    fn mutation_clamps_at_bounds() {
        let parent = Genome::from_params(0, None, &[1.0; NUM_PARAMS]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut ids = IdAllocator::default();
        let big = MutationParams { sigma: 100.0 };
        for _ in 0..100 {
            let child = mutate(&parent, &mut rng, &mut ids, &big);
            assert!(child.params().iter().all(|p| (-1.0..=1.0).contains(p)));
        }
    }

    #[test]
    fn identical_population_contracts() {
        let evaluator = small_evaluator(vec![ObjectiveSpec::loss(0, 10)]);
        let config = EvolutionConfig::new(6, 1, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut pop = vec![Individual::unevaluated(Genome::zeros(0), 0); 12];
        evaluator.evaluate_all(&mut pop).unwrap();
        let mut report = GenerationReport::default();
        contract(&mut pop, &config, &evaluator.goals(), &mut rng, &mut report);
        assert_eq!(pop.len(), 6);
        assert!(report.removed.iter().all(|(_, r)| *r == RemovalReason::Duplicate));
    }

    #[test]
    fn escape_hatch_fires_on_a_wide_front() {
        // strictly trading off age against loss: nobody dominates anybody
        let mut pop: Vec<Individual> = (0..8).map(|i| evaluated(i, &[1.0 - f64::from(i) * 0.1])).collect();
        for (i, ind) in pop.iter_mut().enumerate() {
            ind.genome.id = i as u64;
        }
        let config = EvolutionConfig::new(5, 1, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut report = GenerationReport::default();
        contract(&mut pop, &config, &[Goal::Minimize], &mut rng, &mut report);
        assert_eq!(pop.len(), 5);
        assert_eq!(report.escape_hatch_removals(), 3);
    }

    #[test]
    fn dominant_individual_survives_contraction() {
        let mut pop: Vec<Individual> = (1..=20).map(|i| evaluated(i, &[0.5 + f64::from(i) * 0.01])).collect();
        pop.push(evaluated(0, &[0.0]));
        for (i, ind) in pop.iter_mut().enumerate() {
            ind.genome.id = i as u64;
        }
        let goals = [Goal::Minimize];
        // nothing can dominate it
        assert!(pop.iter().all(|b| !dominates_unchecked(b, &pop[20], &goals)));
        for seed in 0..50 {
            let mut p = pop.clone();
            let mut report = GenerationReport::default();
            contract(&mut p, &EvolutionConfig::new(3, 1, 0), &goals, &mut ChaCha8Rng::seed_from_u64(seed), &mut report);
            assert!(p.iter().any(|i| i.id() == 20));
        }
    }

    #[test]
    fn generation_keeps_size_and_injects_one() {
        let evaluator = small_evaluator(vec![ObjectiveSpec::loss(0, 10)]);
        let config = EvolutionConfig::new(8, 5, 11);
        let mut evo = Evolution::new(config, &evaluator).unwrap();
        for _ in 0..5 {
            let before: Vec<(u64, u32)> = evo.population().iter().map(|i| (i.id(), i.age)).collect();
            let report = evo.step().unwrap();
            assert_eq!(evo.population().len(), 8);
            assert_eq!(report.injected.len(), 1);
            for ind in evo.population() {
                if let Some(&(_, age)) = before.iter().find(|(id, _)| *id == ind.id()) {
                    assert_eq!(ind.age, age + 1);
                }
            }
        }
        assert!(evo.is_finished());
        assert_eq!(evo.log().rows.len(), 5);
    }

    #[test]
    fn seeding_fills_with_mutants() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ids = IdAllocator::starting_at(100);
        let champ = random_genome(&mut rng, &mut IdAllocator::default());
        let pop = seed_population(std::slice::from_ref(&champ), &EvolutionConfig::new(10, 0, 0), &mut rng, &mut ids).unwrap();
        assert_eq!(pop.len(), 10);
        assert_eq!(pop[0].genome.params(), champ.params());
        for ind in &pop[1..] {
            let diff = (0..NUM_PARAMS).filter(|&i| ind.genome.param(i) != champ.param(i)).count();
            assert!(diff <= 1);
            assert_eq!(ind.age, 0);
        }
        assert!(matches!(
            seed_population(&[], &EvolutionConfig::new(10, 0, 0), &mut rng, &mut ids),
            Err(Error::NoChampions)
        ));
    }

    #[test]
    fn log_csv_layout() {
        let evaluator = small_evaluator(vec![ObjectiveSpec::loss(0, 10), ObjectiveSpec::empowerment(1, None)]);
        let result = evolve(&EvolutionConfig::new(2, 1, 0), &evaluator).unwrap();
        let csv = result.log.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], LOG_HEADER);
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(',').count(), 7);

        let bi = small_evaluator(vec![ObjectiveSpec::loss(0, 10)]);
        let result = evolve(&EvolutionConfig::new(2, 1, 0), &bi).unwrap();
        assert!(result.log.to_csv().lines().nth(1).unwrap().contains(",,"));
    }

    #[test]
    fn config_validation() {
        assert!(EvolutionConfig::new(1, 1, 0).validate().is_err());
        let mut c = EvolutionConfig::new(4, 1, 0);
        c.mutation.sigma = f64::NAN;
        assert!(c.validate().is_err());
    }
}
