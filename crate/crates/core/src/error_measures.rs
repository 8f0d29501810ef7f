//! Error measures between a candidate rule and partial observations.
//!
//! Two families are provided. [`error_with_timesteps`] evolves the first row
//! once and compares it to later rows at absolute time steps.
//! [`error_with_gaps`] works row pair by row pair on the rule's completion of
//! the observation, which decouples the rows; it is the measure minimised by
//! the solver.
//!
//! Minimising over all gap sequences bounded by `T` is exponential in the
//! number of rows for partial observations. [`min_error_exact`] does it
//! behind a budget; [`min_error_sampled`] picks each gap greedily, breaking
//! ties at random, and never reports less than the exact minimum.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ca::{Configuration, LookupTable};
use crate::error::{Error, Result};
use crate::observation::{Observation, ObservationSet, PartialRow};
use crate::seed;

/// Numbers of missing frames between consecutive recorded rows, all `>= 1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GapSequence(Vec<u32>);

impl GapSequence {
    pub fn new(gaps: Vec<u32>) -> Result<Self> {
        if let Some(i) = gaps.iter().position(|&t| t == 0) {
            return Err(Error::Argument(format!("gap {i} is zero; gaps must be positive")));
        }
        Ok(GapSequence(gaps))
    }

    /// Like [`GapSequence::new`], additionally requiring every gap `<= bound`.
    pub fn bounded(gaps: Vec<u32>, bound: u32) -> Result<Self> {
        if let Some(&t) = gaps.iter().find(|&&t| t > bound) {
            return Err(Error::Range(format!("gap {t} exceeds the bound {bound}")));
        }
        GapSequence::new(gaps)
    }

    /// Inverts the cumulative sums: `t_n = tau_n - tau_{n-1}` with `tau_0 = 0`.
    pub fn from_timesteps(taus: &[u64]) -> Result<Self> {
        let mut prev = 0u64;
        let mut gaps = Vec::with_capacity(taus.len());
        for &tau in taus {
            if tau <= prev {
                return Err(Error::Argument(format!(
                    "time steps must be positive and strictly increasing, got {taus:?}"
                )));
            }
            let gap = u32::try_from(tau - prev)
                .map_err(|_| Error::Range(format!("gap {} does not fit in 32 bits", tau - prev)))?;
            gaps.push(gap);
            prev = tau;
        }
        Ok(GapSequence(gaps))
    }

    /// Cumulative sums `tau_n = t_1 + ... + t_n`.
    pub fn to_timesteps(&self) -> Vec<u64> {
        self.0
            .iter()
            .scan(0u64, |acc, &t| {
                *acc += t as u64;
                Some(*acc)
            })
            .collect()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for GapSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

/// Result of an error minimisation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub value: u64,
    /// One gap sequence per observation, achieving `value`.
    pub chosen_gaps: Vec<GapSequence>,
    /// `true` when `value` is the exact minimum.
    pub exact: bool,
}

/// Number of positions where both rows are known and differ.
pub fn dist(a: &PartialRow, b: &PartialRow) -> Result<u32> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "rows have different lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.values()
        .words()
        .iter()
        .zip(b.values().words())
        .zip(a.known_mask().words().iter().zip(b.known_mask().words()))
        .map(|((x, y), (kx, ky))| ((x ^ y) & kx & ky).count_ones())
        .sum())
}

/// Compares `A^{tau_n}(I[1])` with row `n + 1` for each listed time step.
pub fn error_with_timesteps(lut: &LookupTable, obs: &Observation, taus: &[u64]) -> Result<u64> {
    if taus.len() + 1 != obs.n_rows() {
        return Err(Error::Argument(format!(
            "an observation with {} rows needs {} time steps, got {}",
            obs.n_rows(),
            obs.n_rows() - 1,
            taus.len()
        )));
    }
    GapSequence::from_timesteps(taus)?;
    let mut state = obs.initial().clone();
    let mut now = 0u64;
    let mut total = 0u64;
    for (row, &tau) in obs.rows()[1..].iter().zip(taus) {
        state = lut.iterate(&state, tau - now);
        now = tau;
        total += row.mismatches(&state) as u64;
    }
    Ok(total)
}

/// Row-pair error on the rule's completion of `obs` under `gaps`.
pub fn error_with_gaps(lut: &LookupTable, obs: &Observation, gaps: &GapSequence) -> Result<u64> {
    obs.check_gaps(gaps)?;
    let mut current = obs.initial().clone();
    let mut total = 0u64;
    for (row, &t) in obs.rows()[1..].iter().zip(gaps.as_slice()) {
        let evolved = lut.iterate(&current, t as u64);
        total += row.mismatches(&evolved) as u64;
        current = row.fill(&evolved);
    }
    Ok(total)
}

/// Exact minimum of [`error_with_gaps`] over every gap sequence in
/// `[1, gap_bound]^(N-1)`, refusing when there are more than `budget` of them.
/// Among minimisers the lexicographically smallest sequence is reported.
pub fn min_error_exact(
    lut: &LookupTable,
    obs: &Observation,
    gap_bound: u32,
    budget: u64,
) -> Result<ErrorEstimate> {
    check_bound(gap_bound)?;
    let transitions = (obs.n_rows() - 1) as u32;
    let sequences = (gap_bound as u64).checked_pow(transitions);
    if sequences.is_none_or(|s| s > budget) {
        return Err(Error::Capacity(format!(
            "{gap_bound}^{transitions} gap sequences exceed the budget of {budget}"
        )));
    }

    struct Search<'a> {
        lut: &'a LookupTable,
        gap_bound: u32,
        gaps: Vec<u32>,
        best: u64,
        best_gaps: Vec<u32>,
    }

    impl Search<'_> {
        fn visit(&mut self, rows: &[PartialRow], current: &Configuration, partial: u64) {
            let Some((target, rest)) = rows.split_first() else {
                if partial < self.best {
                    self.best = partial;
                    self.best_gaps = self.gaps.clone();
                }
                return;
            };
            let mut state = current.clone();
            for t in 1..=self.gap_bound {
                if partial >= self.best {
                    return;
                }
                state = self.lut.step(&state);
                let err = target.mismatches(&state) as u64;
                self.gaps.push(t);
                self.visit(rest, &target.fill(&state), partial + err);
                self.gaps.pop();
            }
        }
    }

    let mut search = Search {
        lut,
        gap_bound,
        gaps: Vec::with_capacity(transitions as usize),
        best: u64::MAX,
        best_gaps: Vec::new(),
    };
    search.visit(&obs.rows()[1..], obs.initial(), 0);
    Ok(ErrorEstimate {
        value: search.best,
        chosen_gaps: vec![GapSequence(search.best_gaps)],
        exact: true,
    })
}

fn check_bound(gap_bound: u32) -> Result<()> {
    if gap_bound == 0 {
        return Err(Error::Range("the gap bound T must be at least 1".into()));
    }
    Ok(())
}

/// Reusable buffers for the greedy row scan.
pub(crate) struct RowScanner {
    states: Vec<Configuration>,
    errors: Vec<u32>,
    ties: Vec<usize>,
}

impl RowScanner {
    pub(crate) fn new() -> Self {
        RowScanner {
            states: Vec::new(),
            errors: Vec::new(),
            ties: Vec::new(),
        }
    }

    /// One greedy pass over the rows of `obs`. Gaps are written to `gaps`.
    pub(crate) fn scan<R: Rng + ?Sized>(
        &mut self,
        lut: &LookupTable,
        obs: &Observation,
        gap_bound: u32,
        rng: &mut R,
        gaps: &mut Vec<u32>,
    ) -> u64 {
        let bound = gap_bound as usize;
        let cols = obs.n_cols();
        if self.states.len() < bound || self.states.first().is_some_and(|s| s.len() != cols) {
            self.states = vec![Configuration::zeros(cols); bound];
        }
        self.errors.resize(bound, 0);
        gaps.clear();

        let mut current = obs.initial().clone();
        let mut total = 0u64;
        for target in &obs.rows()[1..] {
            lut.step_into(&current, &mut self.states[0]);
            for t in 1..bound {
                let (done, rest) = self.states.split_at_mut(t);
                lut.step_into(&done[t - 1], &mut rest[0]);
            }
            for t in 0..bound {
                self.errors[t] = target.mismatches(&self.states[t]);
            }
            let min = *self.errors[..bound].iter().min().expect("bound >= 1");
            let choice = if target.is_complete() {
                // every tied gap yields the same completed row
                self.errors.iter().position(|&e| e == min).unwrap()
            } else {
                self.ties.clear();
                self.ties
                    .extend((0..bound).filter(|&t| self.errors[t] == min));
                if self.ties.len() == 1 {
                    self.ties[0]
                } else {
                    self.ties[rng.gen_range(0..self.ties.len())]
                }
            };
            total += min as u64;
            gaps.push(choice as u32 + 1);
            current = target.fill(&self.states[choice]);
        }
        total
    }
}

/// Greedy per-row gap choice with uniform random tie-breaking.
///
/// The value is never below [`min_error_exact`]; it is exact (and flagged so)
/// when the observation is spatially complete, since rows are then
/// independent.
pub fn min_error_sampled<R: Rng + ?Sized>(
    lut: &LookupTable,
    obs: &Observation,
    gap_bound: u32,
    rng: &mut R,
) -> Result<ErrorEstimate> {
    check_bound(gap_bound)?;
    let mut gaps = Vec::with_capacity(obs.n_rows() - 1);
    let value = RowScanner::new().scan(lut, obs, gap_bound, rng, &mut gaps);
    Ok(ErrorEstimate {
        value,
        chosen_gaps: vec![GapSequence(gaps)],
        exact: obs.is_spatially_complete(),
    })
}

/// Sum over observations of the best of `resamples` greedy scans.
///
/// Resample `j` of observation `i` draws from the stream keyed `(seed, i, j)`,
/// so the result depends only on the inputs. Spatially complete observations
/// are scanned once.
pub fn min_error_set(
    lut: &LookupTable,
    set: &ObservationSet,
    gap_bound: u32,
    seed: u64,
    resamples: u32,
) -> Result<ErrorEstimate> {
    check_bound(gap_bound)?;
    if resamples == 0 {
        return Err(Error::Range("resamples must be at least 1".into()));
    }
    let mut scanner = RowScanner::new();
    let mut gaps = Vec::new();
    let mut value = 0u64;
    let mut chosen = Vec::with_capacity(set.len());
    for (i, obs) in set.iter().enumerate() {
        let runs = if obs.is_spatially_complete() { 1 } else { resamples };
        let mut best: Option<(u64, Vec<u32>)> = None;
        for j in 0..runs {
            let mut rng = seed::stream(seed, &[i as u64, j as u64]);
            let v = scanner.scan(lut, obs, gap_bound, &mut rng, &mut gaps);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, gaps.clone()));
            }
            if v == 0 {
                break;
            }
        }
        let (v, g) = best.expect("at least one run");
        value += v;
        chosen.push(GapSequence(g));
    }
    Ok(ErrorEstimate {
        value,
        chosen_gaps: chosen,
        exact: set.is_spatially_complete(),
    })
}

/// Value-only variant of [`min_error_set`] for hot loops.
pub(crate) fn min_error_set_value(
    scanner: &mut RowScanner,
    lut: &LookupTable,
    set: &ObservationSet,
    gap_bound: u32,
    seed: u64,
    resamples: u32,
) -> u64 {
    let mut gaps = Vec::new();
    let mut total = 0u64;
    for (i, obs) in set.iter().enumerate() {
        let runs = if obs.is_spatially_complete() { 1 } else { resamples.max(1) };
        let mut best = u64::MAX;
        for j in 0..runs {
            let mut rng = seed::stream(seed, &[i as u64, j as u64]);
            best = best.min(scanner.scan(lut, obs, gap_bound, &mut rng, &mut gaps));
            if best == 0 {
                break;
            }
        }
        total += best;
    }
    total
}
