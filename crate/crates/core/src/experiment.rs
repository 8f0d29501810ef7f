//! Synthetic observation sets, degradation series and k-sweeps.

use std::io::Write;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ca::{Configuration, LookupTable, RuleNumber};
use crate::error::{Error, Result};
use crate::error_measures::GapSequence;
use crate::ga::{self, rule_label, SolverConfig};
use crate::observation::{Observation, ObservationSet};
use crate::seed::{derive_seed, stream};

const ROLE_DATA: u64 = 0x10;
const ROLE_MASK: u64 = 0x11;
const ROLE_RUN: u64 = 0x12;

/// Like [`generate_set`], also returning the gaps used for each observation.
pub fn generate_set_with_gaps<R: Rng + ?Sized>(
    lut: &LookupTable,
    observations: usize,
    rows: usize,
    cols: usize,
    gap_bound: u32,
    rng: &mut R,
) -> Result<(ObservationSet, Vec<GapSequence>)> {
    if observations == 0 {
        return Err(Error::Argument("at least one observation is required".into()));
    }
    if rows < 2 {
        return Err(Error::Argument(format!("observations need at least 2 rows, got {rows}")));
    }
    if cols == 0 {
        return Err(Error::Argument("observations need at least 1 column".into()));
    }
    if gap_bound == 0 {
        return Err(Error::Range("the gap bound T must be at least 1".into()));
    }
    let mut set = Vec::with_capacity(observations);
    let mut all_gaps = Vec::with_capacity(observations);
    for _ in 0..observations {
        let mut current = Configuration::random(cols, rng);
        let mut recorded = Vec::with_capacity(rows);
        let mut gaps = Vec::with_capacity(rows - 1);
        recorded.push(current.clone());
        for _ in 1..rows {
            let t = rng.gen_range(1..=gap_bound);
            current = lut.iterate(&current, t as u64);
            recorded.push(current.clone());
            gaps.push(t);
        }
        set.push(Observation::from_configurations(recorded)?);
        all_gaps.push(GapSequence::new(gaps)?);
    }
    Ok((ObservationSet::new(set)?, all_gaps))
}

/// `observations` spatially complete observations of `rows x cols`, each
/// from a uniform random initial configuration with uniform gaps in `[1, T]`.
pub fn generate_set<R: Rng + ?Sized>(
    lut: &LookupTable,
    observations: usize,
    rows: usize,
    cols: usize,
    gap_bound: u32,
    rng: &mut R,
) -> Result<ObservationSet> {
    generate_set_with_gaps(lut, observations, rows, cols, gap_bound, rng).map(|(s, _)| s)
}

/// `[I(0), ..., I(k_max)]` where each set hides `pi` more known entries than
/// the one before it. Masks are nested.
pub fn degrade_series<R: Rng + ?Sized>(
    set: &ObservationSet,
    pi: u64,
    k_max: u32,
    rng: &mut R,
) -> Result<Vec<ObservationSet>> {
    let needed = pi.checked_mul(k_max as u64);
    let available = set.maskable_count();
    if needed.is_none_or(|n| n > available) {
        return Err(Error::Capacity(format!(
            "{k_max} steps of {pi} entries exceed the {available} maskable entries"
        )));
    }
    let mut series = Vec::with_capacity(k_max as usize + 1);
    series.push(set.clone());
    for _ in 0..k_max {
        let next = series.last().expect("non-empty").mask_random(pi, rng)?;
        series.push(next);
    }
    Ok(series)
}

/// Parameters of a k-sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Generating rule.
    pub rule: RuleNumber,
    /// Radius of the generating rule.
    pub rule_radius: u32,
    pub observations: usize,
    pub rows: usize,
    pub cols: usize,
    /// Gap bound used when generating data.
    pub gap_bound: u32,
    /// Entries hidden per degradation level.
    pub pi: u64,
    pub k_max: u32,
    pub repetitions: u32,
    pub solver: SolverConfig,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            rule: 180,
            rule_radius: 1,
            observations: 64,
            rows: 69,
            cols: 69,
            gap_bound: 10,
            pi: 2000,
            k_max: 150,
            repetitions: 20,
            solver: SolverConfig::default(),
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        LookupTable::from_number(self.rule, self.rule_radius)?;
        if self.rule_radius > self.solver.radius {
            return Err(Error::Config(format!(
                "rule radius {} exceeds solver radius {}",
                self.rule_radius, self.solver.radius
            )));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        if self.observations == 0 || self.rows < 2 || self.cols == 0 || self.gap_bound == 0 {
            return Err(Error::Config(
                "need observations >= 1, rows >= 2, cols >= 1 and gap_bound >= 1".into(),
            ));
        }
        if self.solver.subset_size > self.observations {
            return Err(Error::Config(format!(
                "subset size {} exceeds the {} observations",
                self.solver.subset_size, self.observations
            )));
        }
        let maskable = (self.observations as u64) * (self.rows as u64 - 1) * self.cols as u64;
        if self.pi.checked_mul(self.k_max as u64).is_none_or(|n| n > maskable) {
            return Err(Error::Capacity(format!(
                "pi * k_max = {} * {} exceeds the {maskable} maskable entries",
                self.pi, self.k_max
            )));
        }
        Ok(())
    }

    /// Seed of the GA run at level `k`, repetition `rep`.
    pub fn run_seed(&self, k: u32, rep: u32) -> u64 {
        derive_seed(self.seed, &[ROLE_RUN, k as u64, rep as u64])
    }

    /// The degradation series of repetition `rep`. The data depends on the
    /// master seed and `rep` only, so different rules share initial
    /// configurations and gaps.
    pub fn series(&self, rep: u32) -> Result<Vec<ObservationSet>> {
        let lut = LookupTable::from_number(self.rule, self.rule_radius)?;
        let mut data_rng = stream(self.seed, &[ROLE_DATA, rep as u64]);
        let set = generate_set(
            &lut,
            self.observations,
            self.rows,
            self.cols,
            self.gap_bound,
            &mut data_rng,
        )?;
        let mut mask_rng = stream(self.seed, &[ROLE_MASK, rep as u64]);
        degrade_series(&set, self.pi, self.k_max, &mut mask_rng)
    }
}

/// Outcome of one GA run in a sweep.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub k: u32,
    pub rep: u32,
    pub solved: bool,
    pub generations: u32,
    /// Empty when the run failed.
    pub best_rule: String,
    pub wall_ms: u64,
}

/// Per-level aggregate over successful runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub k: u32,
    pub successes: u32,
    pub min_gen: Option<u32>,
    pub avg_gen: Option<f64>,
    pub max_gen: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub runs: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
}

/// Aggregates `runs` per level `0..=k_max`.
pub fn summarize(runs: &[RunRecord], k_max: u32) -> Vec<SummaryRow> {
    (0..=k_max)
        .map(|k| {
            let gens: Vec<u32> = runs
                .iter()
                .filter(|r| r.k == k && r.solved)
                .map(|r| r.generations)
                .collect();
            let avg = (!gens.is_empty())
                .then(|| gens.iter().map(|&g| g as f64).sum::<f64>() / gens.len() as f64);
            SummaryRow {
                k,
                successes: gens.len() as u32,
                min_gen: gens.iter().copied().min(),
                avg_gen: avg,
                max_gen: gens.iter().copied().max(),
            }
        })
        .collect()
}

impl SweepResult {
    pub fn write_runs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "rep", "solved", "generations", "best_rule", "wall_ms"])?;
        for r in &self.runs {
            w.write_record([
                r.k.to_string(),
                r.rep.to_string(),
                r.solved.to_string(),
                r.generations.to_string(),
                r.best_rule.clone(),
                r.wall_ms.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<()> {
        let opt = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "successes", "min_gen", "avg_gen", "max_gen"])?;
        for s in &self.summary {
            w.write_record([
                s.k.to_string(),
                s.successes.to_string(),
                opt(s.min_gen),
                s.avg_gen.map(|a| format!("{a:.3}")).unwrap_or_default(),
                opt(s.max_gen),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the GA on every `(k, rep)` cell. Cells run concurrently; a failing
/// run is logged and recorded as unsolved.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    sweep_with_progress(cfg, |_| {})
}

/// [`sweep`] with a callback invoked as each run finishes, in completion
/// order.
pub fn sweep_with_progress<F>(cfg: &SweepConfig, on_run: F) -> Result<SweepResult>
where
    F: Fn(&RunRecord) + Sync,
{
    cfg.validate()?;
    let series = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| cfg.series(rep))
        .collect::<Result<Vec<_>>>()?;

    let cells: Vec<(u32, u32)> = (0..=cfg.k_max)
        .flat_map(|k| (0..cfg.repetitions).map(move |rep| (k, rep)))
        .collect();
    let runs: Vec<RunRecord> = cells
        .into_par_iter()
        .map(|(k, rep)| {
            let set = &series[rep as usize][k as usize];
            let solver = SolverConfig {
                seed: cfg.run_seed(k, rep),
                ..cfg.solver.clone()
            };
            let started = Instant::now();
            let record = match ga::run(set, &solver) {
                Ok(report) => RunRecord {
                    k,
                    rep,
                    solved: report.solved(),
                    generations: report.generations,
                    best_rule: rule_label(&report.best_rule),
                    wall_ms: report.wall_time_ms,
                },
                Err(e) => {
                    log::error!("run k={k} rep={rep} failed: {e}");
                    RunRecord {
                        k,
                        rep,
                        solved: false,
                        generations: 0,
                        best_rule: String::new(),
                        wall_ms: started.elapsed().as_millis() as u64,
                    }
                }
            };
            on_run(&record);
            record
        })
        .collect();
    let summary = summarize(&runs, cfg.k_max);
    Ok(SweepResult { runs, summary })
}
