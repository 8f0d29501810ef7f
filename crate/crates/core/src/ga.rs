//! Genetic search for a rule fitting an observation set.
//!
//! Individuals are lookup tables. Fitness is `C(I') - M(I') - E(A)` on a
//! rotating subset `I'` of the observations, where `E` is the sampled
//! row-pair error. Each generation the subset-best individual is also scored
//! on the full set, and the run stops as soon as that score reaches
//! `C(I) - M(I)`, i.e. the rule fits every observation.
//!
//! Reproduction is roulette selection, uniform crossover and bit-flip
//! mutation, followed by elite survival. Elite survival is switched off
//! after the best subset fitness has stayed flat for a while, and back on
//! after a delay or on improvement.

use std::io::Write;
use std::time::Instant;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ca::{LookupTable, RuleNumber};
use crate::error::{Error, Result};
use crate::error_measures::{min_error_set_value, RowScanner};
use crate::observation::ObservationSet;
use crate::seed::{self, derive_seed};

const ROLE_INIT: u64 = 0;
const ROLE_FITNESS: u64 = 1;
const ROLE_CONFIRM: u64 = 2;
const ROLE_EVOLVE: u64 = 3;
const ROLE_ROTATE: u64 = 4;

/// Solver parameters. Defaults follow the reference experiment (`r = 2`,
/// `P = 512`, `P_E = 32`, `p_f = 0.01`, `T = 10`, 5000 generations, subsets
/// of 8 observations).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Radius of candidate rules.
    pub radius: u32,
    pub population: usize,
    /// Number of elites carried over while elite survival is active.
    pub elite: usize,
    /// Per-bit mutation probability.
    pub flip_probability: f64,
    /// Upper bound `T` on time gaps.
    pub gap_bound: u32,
    pub max_generations: u32,
    /// Size of the rotating observation subset used for fitness.
    pub subset_size: usize,
    /// Greedy error resamples per observation during fitness evaluation.
    pub resamples: u32,
    /// Resamples per observation when scoring on the full set.
    pub confirm_resamples: u32,
    /// Elite survival turns off once the best fitness has been flat for more
    /// than this many generations.
    pub elite_off_after: u32,
    /// ... and turns back on after this many generations.
    pub elite_on_after: u32,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            radius: 2,
            population: 512,
            elite: 32,
            flip_probability: 0.01,
            gap_bound: 10,
            max_generations: 5000,
            subset_size: 8,
            resamples: 1,
            confirm_resamples: 8,
            elite_off_after: 50,
            elite_on_after: 20,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("population", self.population as u64),
            ("gap_bound", self.gap_bound as u64),
            ("max_generations", self.max_generations as u64),
            ("subset_size", self.subset_size as u64),
            ("resamples", self.resamples as u64),
            ("confirm_resamples", self.confirm_resamples as u64),
            ("elite_off_after", self.elite_off_after as u64),
            ("elite_on_after", self.elite_on_after as u64),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.elite > self.population / 4 {
            return Err(Error::Config(format!(
                "elite size {} exceeds a quarter of the population {}",
                self.elite, self.population
            )));
        }
        if !(self.flip_probability > 0.0 && self.flip_probability < 1.0) {
            return Err(Error::Config(format!(
                "flip_probability {} must lie strictly between 0 and 1",
                self.flip_probability
            )));
        }
        LookupTable::zeros(self.radius)?;
        Ok(())
    }
}

/// A chromosome with its fitness on the current subset.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Individual {
    pub lut: LookupTable,
    pub fitness: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HaltReason {
    Solved,
    GenerationLimit,
}

impl std::fmt::Display for HaltReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            HaltReason::Solved => "solved",
            HaltReason::GenerationLimit => "generation-limit",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: u32,
    pub max_subset_fitness: u64,
    pub mean_subset_fitness: f64,
    /// Subset-best individual of this generation.
    pub best_rule: LookupTable,
    /// Its fitness on the full set.
    pub full_fitness: u64,
    /// Whether elites are carried into the next generation.
    pub elite_active: bool,
}

/// Outcome of [`run`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Individual with the highest full-set fitness seen.
    pub best_rule: LookupTable,
    pub best_rule_number: Option<RuleNumber>,
    pub best_full_fitness: u64,
    /// `C(I) - M(I)`, the fitness of an exact fit.
    pub max_fitness: u64,
    pub generations: u32,
    pub halt_reason: HaltReason,
    pub seed: u64,
    pub history: Vec<GenerationStats>,
    pub wall_time_ms: u64,
}

impl RunReport {
    pub fn solved(&self) -> bool {
        self.halt_reason == HaltReason::Solved
    }

    /// Per-generation CSV with a header row.
    pub fn write_history_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "generation",
            "max_subset_fitness",
            "mean_subset_fitness",
            "best_rule_number",
            "elite_active",
        ])?;
        for g in &self.history {
            w.write_record([
                g.generation.to_string(),
                g.max_subset_fitness.to_string(),
                format!("{:.6}", g.mean_subset_fitness),
                rule_label(&g.best_rule),
                g.elite_active.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rule number in decimal, or the table bits when it exceeds 128 bits.
pub fn rule_label(lut: &LookupTable) -> String {
    lut.rule_number()
        .map(|n| n.to_string())
        .unwrap_or_else(|| lut.to_string())
}

/// `C(I) - M(I) - E(A)`, with `E` the best of `resamples` greedy scans per
/// observation.
pub fn fitness(
    lut: &LookupTable,
    set: &ObservationSet,
    gap_bound: u32,
    seed: u64,
    resamples: u32,
) -> Result<u64> {
    let err = crate::error_measures::min_error_set(lut, set, gap_bound, seed, resamples)?.value;
    Ok(set.maskable_count() - err)
}

/// Fitness-proportional sampling over a population.
pub struct Roulette {
    weights: Option<WeightedIndex<u64>>,
    len: usize,
}

impl Roulette {
    pub fn new(population: &[Individual]) -> Self {
        assert!(!population.is_empty(), "cannot select from an empty population");
        Roulette {
            weights: WeightedIndex::new(population.iter().map(|i| i.fitness)).ok(),
            len: population.len(),
        }
    }

    /// Index of the selected individual. Uniform if every fitness is zero.
    pub fn spin<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match &self.weights {
            Some(w) => w.sample(rng),
            None => rng.gen_range(0..self.len),
        }
    }
}

/// One roulette draw, with replacement.
pub fn select_parent<'a, R: Rng + ?Sized>(population: &'a [Individual], rng: &mut R) -> &'a Individual {
    &population[Roulette::new(population).spin(rng)]
}

/// Uniform crossover: each bit comes from either parent with probability 1/2.
pub fn crossover<R: Rng + ?Sized>(
    a: &LookupTable,
    b: &LookupTable,
    rng: &mut R,
) -> Result<LookupTable> {
    if a.radius() != b.radius() {
        return Err(Error::Argument(format!(
            "cannot cross radius {} with radius {}",
            a.radius(),
            b.radius()
        )));
    }
    let words = a
        .words()
        .iter()
        .zip(b.words())
        .map(|(x, y)| {
            let pick: u64 = rng.gen();
            (x & pick) | (y & !pick)
        })
        .collect();
    Ok(LookupTable::from_words(a.radius(), words))
}

/// Flips each bit independently with probability `p_flip`.
pub fn mutate<R: Rng + ?Sized>(lut: &LookupTable, p_flip: f64, rng: &mut R) -> LookupTable {
    let mut out = lut.clone();
    for v in 0..out.len() {
        if rng.gen_bool(p_flip) {
            out.flip(v);
        }
    }
    out
}

/// Indices of the `count` fittest individuals; ties go to the lower rule.
pub fn elite_indices(population: &[Individual], count: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..population.len()).collect();
    order.sort_by(|&i, &j| {
        population[j]
            .fitness
            .cmp(&population[i].fitness)
            .then_with(|| population[i].lut.cmp(&population[j].lut))
    });
    order.truncate(count);
    order
}

/// Produces the next generation's chromosomes.
///
/// `population.len()` offspring are bred by selection, crossover and
/// mutation. With `elite_active`, the `config.elite` fittest parents then
/// overwrite as many uniformly chosen offspring.
pub fn evolve_generation<R: Rng + ?Sized>(
    population: &[Individual],
    config: &SolverConfig,
    elite_active: bool,
    rng: &mut R,
) -> Vec<LookupTable> {
    let wheel = Roulette::new(population);
    let mut offspring: Vec<LookupTable> = (0..population.len())
        .map(|_| {
            let a = &population[wheel.spin(rng)].lut;
            let b = &population[wheel.spin(rng)].lut;
            let child = crossover(a, b, rng).expect("population shares one radius");
            mutate(&child, config.flip_probability, rng)
        })
        .collect();
    let elites = config.elite.min(population.len());
    if elite_active && elites > 0 {
        let slots = rand::seq::index::sample(rng, offspring.len(), elites);
        for (slot, idx) in slots.iter().zip(elite_indices(population, elites)) {
            offspring[slot] = population[idx].lut.clone();
        }
    }
    offspring
}

/// Adaptive on/off state of elite survival.
///
/// The maximum fitness counts as stagnant while it stays at or below the
/// best maximum seen so far. Subset rotation makes the raw maximum fluctuate
/// from one generation to the next, so exact equality would almost never
/// trigger.
#[derive(Clone, Debug)]
pub struct EliteSwitch {
    active: bool,
    flat_for: u32,
    off_for: u32,
    best_max: Option<u64>,
    off_after: u32,
    on_after: u32,
}

impl EliteSwitch {
    pub fn new(off_after: u32, on_after: u32) -> Self {
        EliteSwitch {
            active: true,
            flat_for: 0,
            off_for: 0,
            best_max: None,
            off_after,
            on_after,
        }
    }

    pub fn is_active(&self) -> bool {
        self.active
    }

    /// Feeds one generation's maximum fitness.
    pub fn observe(&mut self, max: u64) {
        let Some(best) = self.best_max else {
            self.best_max = Some(max);
            return;
        };
        if max > best {
            self.best_max = Some(max);
            self.active = true;
            self.flat_for = 0;
            self.off_for = 0;
            return;
        }
        self.flat_for += 1;
        if self.active {
            if self.flat_for > self.off_after {
                self.active = false;
                self.off_for = 0;
            }
        } else {
            self.off_for += 1;
            if self.off_for >= self.on_after {
                self.active = true;
                self.flat_for = 0;
            }
        }
    }
}

fn evaluate(
    chromosomes: Vec<LookupTable>,
    subset: &ObservationSet,
    config: &SolverConfig,
    generation: u32,
) -> Vec<Individual> {
    let ceiling = subset.maskable_count();
    chromosomes
        .into_par_iter()
        .enumerate()
        .map_init(RowScanner::new, |scanner, (i, lut)| {
            let key = derive_seed(config.seed, &[ROLE_FITNESS, generation as u64, i as u64]);
            let err = min_error_set_value(scanner, &lut, subset, config.gap_bound, key, config.resamples);
            Individual {
                lut,
                fitness: ceiling - err,
            }
        })
        .collect()
}

/// Swaps one subset member for an observation outside the subset (or for
/// itself), chosen uniformly.
fn rotate_subset<R: Rng + ?Sized>(subset: &mut [usize], universe: usize, rng: &mut R) {
    let slot = rng.gen_range(0..subset.len());
    let outgoing = subset[slot];
    let candidates: Vec<usize> = (0..universe)
        .filter(|i| *i == outgoing || !subset.contains(i))
        .collect();
    subset[slot] = candidates[rng.gen_range(0..candidates.len())];
}

/// Runs the genetic search on `set`.
pub fn run(set: &ObservationSet, config: &SolverConfig) -> Result<RunReport> {
    config.validate()?;
    if config.subset_size > set.len() {
        return Err(Error::Config(format!(
            "subset size {} exceeds the {} available observations",
            config.subset_size,
            set.len()
        )));
    }
    let started = Instant::now();
    let max_fitness = set.maskable_count();
    if max_fitness == 0 {
        log::warn!("no known entries below first rows: every rule fits this observation set");
    }

    let mut rng = seed::stream(config.seed, &[ROLE_INIT]);
    let mut chromosomes: Vec<LookupTable> = (0..config.population)
        .map(|_| LookupTable::random(config.radius, &mut rng))
        .collect::<Result<_>>()?;
    let mut subset: Vec<usize> =
        rand::seq::index::sample(&mut rng, set.len(), config.subset_size).into_vec();

    let mut switch = EliteSwitch::new(config.elite_off_after, config.elite_on_after);
    let mut history = Vec::new();
    let mut best: Option<(LookupTable, u64)> = None;
    let mut halt_reason = HaltReason::GenerationLimit;
    let mut generation = 0;

    while generation < config.max_generations {
        generation += 1;
        let sub = set.subset(&subset)?;
        let population = evaluate(chromosomes, &sub, config, generation);

        let leader = elite_indices(&population, 1)[0];
        let leader_lut = population[leader].lut.clone();
        let max = population[leader].fitness;
        let mean = population.iter().map(|i| i.fitness).sum::<u64>() as f64 / population.len() as f64;

        let confirm_key = derive_seed(config.seed, &[ROLE_CONFIRM, generation as u64]);
        let mut scanner = RowScanner::new();
        let full = max_fitness
            - min_error_set_value(
                &mut scanner,
                &leader_lut,
                set,
                config.gap_bound,
                confirm_key,
                config.confirm_resamples,
            );
        if best.as_ref().is_none_or(|(_, f)| full > *f) {
            best = Some((leader_lut.clone(), full));
        }

        switch.observe(max);
        history.push(GenerationStats {
            generation,
            max_subset_fitness: max,
            mean_subset_fitness: mean,
            best_rule: leader_lut,
            full_fitness: full,
            elite_active: switch.is_active(),
        });

        if full == max_fitness {
            halt_reason = HaltReason::Solved;
            break;
        }
        if generation == config.max_generations {
            break;
        }

        let mut rng = seed::stream(config.seed, &[ROLE_EVOLVE, generation as u64]);
        chromosomes = evolve_generation(&population, config, switch.is_active(), &mut rng);
        let mut rng = seed::stream(config.seed, &[ROLE_ROTATE, generation as u64]);
        rotate_subset(&mut subset, set.len(), &mut rng);
    }

    let (best_rule, best_full_fitness) = best.expect("at least one generation runs");
    Ok(RunReport {
        best_rule_number: best_rule.rule_number(),
        best_rule,
        best_full_fitness,
        max_fitness,
        generations: generation,
        halt_reason,
        seed: config.seed,
        history,
        wall_time_ms: started.elapsed().as_millis() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ca::Configuration;
    use crate::error_measures::min_error_exact;
    use crate::observation::Observation;
    use rand::rngs::mock::StepRng;
    use rand_chacha::ChaCha8Rng;

    fn eca(n: u128) -> LookupTable {
        LookupTable::from_number(n, 1).unwrap()
    }

    fn individual(n: u128, fitness: u64) -> Individual {
        Individual { lut: eca(n), fitness }
    }

    fn synthetic(rule: u128, count: usize, rows: usize, cols: usize, bound: u32, seed: u64) -> ObservationSet {
        let lut = eca(rule);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let obs = (0..count)
            .map(|_| {
                let mut cur = Configuration::random(cols, &mut rng);
                let mut recorded = vec![cur.clone()];
                for _ in 1..rows {
                    cur = lut.iterate(&cur, rng.gen_range(1..=bound) as u64);
                    recorded.push(cur.clone());
                }
                Observation::from_configurations(recorded).unwrap()
            })
            .collect();
        ObservationSet::new(obs).unwrap()
    }

    fn small_config(seed: u64) -> SolverConfig {
        SolverConfig {
            radius: 1,
            population: 64,
            elite: 4,
            gap_bound: 2,
            max_generations: 200,
            subset_size: 3,
            seed,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn defaults_match_reference_parameters() {
        let c = SolverConfig::default();
        assert_eq!(
            (c.radius, c.population, c.elite, c.gap_bound, c.max_generations, c.subset_size),
            (2, 512, 32, 10, 5000, 8)
        );
        assert_eq!(c.flip_probability, 0.01);
        c.validate().unwrap();
    }

    #[test]
    fn config_validation() {
        let bad = [
            SolverConfig { elite: 129, ..SolverConfig::default() },
            SolverConfig { flip_probability: 0.0, ..SolverConfig::default() },
            SolverConfig { flip_probability: 1.0, ..SolverConfig::default() },
            SolverConfig { population: 0, elite: 0, ..SolverConfig::default() },
            SolverConfig { gap_bound: 0, ..SolverConfig::default() },
            SolverConfig { radius: 99, ..SolverConfig::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn fitness_cases() {
        let set = synthetic(150, 3, 4, 10, 3, 1);
        let (c, m) = set.counts();
        assert_eq!(fitness(&eca(150), &set, 3, 0, 1).unwrap(), c - m);

        let blind = ObservationSet::new(
            set.iter()
                .map(|o| {
                    let mut o = o.clone();
                    for n in 1..o.n_rows() {
                        for col in 0..o.n_cols() {
                            o.forget(n, col).unwrap();
                        }
                    }
                    o
                })
                .collect(),
        )
        .unwrap();
        for rule in [0, 77, 255] {
            assert_eq!(fitness(&eca(rule), &blind, 3, 0, 1).unwrap(), 0);
        }

        let zero = fitness(&eca(0), &set, 3, 0, 1).unwrap();
        let exact_err: u64 = set.iter().map(|o| min_error_exact(&eca(0), o, 3, 1000).unwrap().value).sum();
        assert!(exact_err > 0);
        assert_eq!(zero, c - m - exact_err);
    }

    #[test]
    fn single_individual_is_always_selected() {
        let pop = vec![individual(7, 3)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(select_parent(&pop, &mut rng).lut, eca(7));
        }
    }

    #[test]
    fn selection_is_fitness_proportional() {
        let pop = vec![individual(1, 3), individual(2, 1)];
        let wheel = Roulette::new(&pop);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let draws = 10_000;
        let first = (0..draws).filter(|_| wheel.spin(&mut rng) == 0).count() as f64;
        let p = 0.75;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((first - draws as f64 * p).abs() < 5.0 * sigma, "{first}");
    }

    #[test]
    fn zero_fitness_selection_is_uniform() {
        let pop: Vec<Individual> = (0..4).map(|n| individual(n, 0)).collect();
        let wheel = Roulette::new(&pop);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0f64; 4];
        for _ in 0..10_000 {
            counts[wheel.spin(&mut rng)] += 1.0;
        }
        let chi2: f64 = counts.iter().map(|c| (c - 2500.0).powi(2) / 2500.0).sum();
        // 3 degrees of freedom; 16.27 is the 0.999 quantile
        assert!(chi2 < 16.27, "{chi2}");
    }

    #[test]
    fn crossover_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = eca(150);
        assert_eq!(crossover(&a, &a, &mut rng).unwrap(), a);
        assert!(crossover(&a, &LookupTable::zeros(2).unwrap(), &mut rng).is_err());

        let zeros = LookupTable::zeros(2).unwrap();
        let ones = LookupTable::from_number(u32::MAX as u128, 2).unwrap();
        let trials = 10_000;
        let mut set_bits = 0u64;
        for _ in 0..trials {
            let child = crossover(&zeros, &ones, &mut rng).unwrap();
            set_bits += child.table_bits().iter().map(|&b| b as u64).sum::<u64>();
        }
        let n = (trials * 32) as f64;
        let sigma = (n * 0.25).sqrt();
        assert!((set_bits as f64 - n / 2.0).abs() < 5.0 * sigma);

        for _ in 0..200 {
            let x = LookupTable::random(2, &mut rng).unwrap();
            let y = LookupTable::random(2, &mut rng).unwrap();
            let c = crossover(&x, &y, &mut rng).unwrap();
            for v in 0..32 {
                assert!(c.output(v) == x.output(v) || c.output(v) == y.output(v));
            }
        }
    }

    #[test]
    fn mutation_cases() {
        let lut = LookupTable::from_number(0xDEAD_BEEF, 2).unwrap();
        let mut never = StepRng::new(u64::MAX, 0);
        assert_eq!(mutate(&lut, 0.5, &mut never), lut);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 100_000;
        let mut flips = 0u64;
        for _ in 0..trials {
            let m = mutate(&lut, 0.01, &mut rng);
            assert_eq!(m.len(), lut.len());
            flips += (m.words()[0] ^ lut.words()[0]).count_ones() as u64;
        }
        let n = (trials * 32) as f64;
        let sigma = (n * 0.01 * 0.99).sqrt();
        let mean = flips as f64 / trials as f64;
        assert!((flips as f64 - n * 0.01).abs() < 5.0 * sigma, "mean flips {mean}");
        assert_eq!(mutate(&mutate(&lut, 0.3, &mut rng), 0.3, &mut rng).len(), 32);
    }

    #[test]
    fn evolve_without_elites_is_generational() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pop: Vec<Individual> = (0..40).map(|n| individual(n, n as u64)).collect();
        let config = SolverConfig { radius: 1, elite: 0, ..small_config(0) };
        let next = evolve_generation(&pop, &config, true, &mut rng);
        assert_eq!(next.len(), 40);
    }

    #[test]
    fn elites_survive_only_when_active() {
        // Parents are all-zero tables with low fitness except one all-ones
        // champion; with a tiny mutation rate, offspring almost never equal
        // the champion unless it is carried over.
        let mut pop: Vec<Individual> = (0..40).map(|_| Individual { lut: eca(0), fitness: 1 }).collect();
        pop[17] = individual(255, 1000);
        let config = SolverConfig { radius: 1, elite: 1, flip_probability: 1e-9, ..small_config(0) };
        let mut rng = ChaCha8Rng::seed_from_u64(9);

        let with = evolve_generation(&pop, &config, true, &mut rng);
        assert_eq!(with.len(), 40);
        assert!(with.contains(&eca(255)));

        let weak: Vec<Individual> = pop
            .iter()
            .map(|i| Individual { lut: i.lut.clone(), fitness: if i.lut == eca(255) { 0 } else { 1 } })
            .collect();
        let without = evolve_generation(&weak, &config, false, &mut rng);
        assert!(!without.contains(&eca(255)));
    }

    #[test]
    fn elite_ties_prefer_lower_rule() {
        let pop = vec![individual(9, 5), individual(3, 5), individual(200, 7), individual(1, 2)];
        assert_eq!(elite_indices(&pop, 3), vec![2, 1, 0]);
    }

    #[test]
    fn elite_switch_cycle() {
        let mut s = EliteSwitch::new(3, 2);
        s.observe(10);
        for _ in 0..3 {
            s.observe(10);
            assert!(s.is_active());
        }
        s.observe(10);
        assert!(!s.is_active());
        s.observe(10);
        assert!(!s.is_active());
        s.observe(10);
        assert!(s.is_active());

        let mut s = EliteSwitch::new(1, 100);
        s.observe(4);
        s.observe(4);
        s.observe(4);
        assert!(!s.is_active());
        s.observe(5);
        assert!(s.is_active());

        // fluctuating below the best seen is still stagnation
        let mut s = EliteSwitch::new(3, 100);
        for max in [10, 7, 9, 8, 6] {
            s.observe(max);
        }
        assert!(!s.is_active());
        s.observe(10);
        assert!(!s.is_active());
        s.observe(11);
        assert!(s.is_active());
    }

    #[test]
    fn rotation_keeps_distinct_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut subset = vec![0, 1, 2];
        for _ in 0..200 {
            rotate_subset(&mut subset, 6, &mut rng);
            let mut s = subset.clone();
            s.sort();
            s.dedup();
            assert_eq!(s.len(), 3);
        }
        let mut full = vec![2, 0, 1];
        for _ in 0..20 {
            rotate_subset(&mut full, 3, &mut rng);
            assert_eq!(full, vec![2, 0, 1]);
        }
    }

    #[test]
    fn trivial_set_solves_in_first_generation() {
        let set = synthetic(30, 4, 3, 8, 2, 0);
        let blind = set.mask_random(set.maskable_count(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let report = run(&blind, &small_config(1)).unwrap();
        assert_eq!(report.halt_reason, HaltReason::Solved);
        assert_eq!(report.generations, 1);
        assert_eq!(report.best_full_fitness, 0);
    }

    #[test]
    fn solves_small_eca_problem() {
        let set = synthetic(90, 6, 5, 12, 2, 4);
        let report = run(&set, &small_config(2)).unwrap();
        assert!(report.solved(), "{report:?}");
        assert_eq!(report.best_full_fitness, report.max_fitness);
        for obs in set.iter() {
            assert_eq!(min_error_exact(&report.best_rule, obs, 2, 1 << 12).unwrap().value, 0);
        }
    }

    #[test]
    fn runs_are_reproducible_and_population_sized() {
        let set = synthetic(110, 5, 4, 10, 2, 8);
        let config = SolverConfig { max_generations: 15, ..small_config(77) };
        let mut a = run(&set, &config).unwrap();
        let mut b = run(&set, &config).unwrap();
        a.wall_time_ms = 0;
        b.wall_time_ms = 0;
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let pop: Vec<Individual> = (0..64).map(|_| Individual { lut: LookupTable::random(1, &mut rng).unwrap(), fitness: rng.gen_range(0..9) }).collect();
        assert_eq!(evolve_generation(&pop, &config, true, &mut rng).len(), 64);
    }

    #[test]
    fn elitism_keeps_max_fitness_on_unchanged_complete_subset() {
        // With s = |I| the subset never changes and complete observations
        // give deterministic fitness, so elitism makes the maximum monotone.
        let set = synthetic(45, 3, 6, 12, 3, 2);
        let config = SolverConfig {
            radius: 2,
            population: 48,
            elite: 4,
            gap_bound: 3,
            max_generations: 60,
            subset_size: 3,
            elite_off_after: 1000,
            seed: 4,
            ..SolverConfig::default()
        };
        let report = run(&set, &config).unwrap();
        for pair in report.history.windows(2) {
            assert!(pair[0].elite_active);
            assert!(pair[1].max_subset_fitness >= pair[0].max_subset_fitness);
        }
    }

    #[test]
    fn history_csv_layout() {
        let set = synthetic(110, 3, 3, 8, 2, 3);
        let config = SolverConfig { max_generations: 3, ..small_config(5) };
        let report = run(&set, &config).unwrap();
        let mut buf = Vec::new();
        report.write_history_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "generation,max_subset_fitness,mean_subset_fitness,best_rule_number,elite_active"
        );
        assert_eq!(lines.count(), report.history.len());
    }

    #[test]
    fn subset_larger_than_set_is_rejected() {
        let set = synthetic(110, 2, 3, 8, 2, 3);
        assert!(run(&set, &small_config(0)).is_err());
    }
}
