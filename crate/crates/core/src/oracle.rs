//! Brute-force ground truth for small instances.
//!
//! [`verify_fit`] decides exactly whether a rule fits every observation of a
//! set, by depth-first search over gap choices with the completed row
//! threaded through. [`fits_by_completions`] decides the same question
//! straight from the definition, by enumerating completions. Both are
//! exponential and guarded by an [`OracleBudget`].

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ca::{Configuration, LookupTable, RuleNumber};
use crate::error::{Error, Result};
use crate::observation::{Observation, ObservationSet, PartialRow};

/// Limits on the exhaustive searches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleBudget {
    /// Most rules [`enumerate_fitting_rules`] may try.
    pub max_rules: u64,
    /// Most gap sequences `T^(N-1)` per observation.
    pub max_gap_sequences: u64,
    /// Most completions per observation for [`fits_by_completions`].
    pub max_completions: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget {
            max_rules: 1 << 16,
            max_gap_sequences: 1 << 20,
            max_completions: 1 << 16,
        }
    }
}

fn check_gap_budget(obs: &Observation, gap_bound: u32, budget: &OracleBudget) -> Result<()> {
    if gap_bound == 0 {
        return Err(Error::Range("the gap bound T must be at least 1".into()));
    }
    let transitions = (obs.n_rows() - 1) as u32;
    match (gap_bound as u64).checked_pow(transitions) {
        Some(n) if n <= budget.max_gap_sequences => Ok(()),
        _ => Err(Error::Capacity(format!(
            "{gap_bound}^{transitions} gap sequences exceed the budget of {}",
            budget.max_gap_sequences
        ))),
    }
}

struct FitSearch<'a> {
    lut: &'a LookupTable,
    gap_bound: u32,
    // row -> distinct successors A^1(row) .. A^T(row)
    memo: HashMap<Configuration, Vec<Configuration>>,
}

impl FitSearch<'_> {
    fn successors(&mut self, row: &Configuration) -> Vec<Configuration> {
        if let Some(s) = self.memo.get(row) {
            return s.clone();
        }
        let mut out: Vec<Configuration> = Vec::with_capacity(self.gap_bound as usize);
        let mut state = row.clone();
        for _ in 0..self.gap_bound {
            state = self.lut.step(&state);
            if !out.contains(&state) {
                out.push(state.clone());
            }
        }
        self.memo.insert(row.clone(), out.clone());
        out
    }

    fn fits(&mut self, rows: &[PartialRow], current: &Configuration) -> bool {
        let Some((target, rest)) = rows.split_first() else {
            return true;
        };
        self.successors(current)
            .iter()
            .any(|next| target.mismatches(next) == 0 && self.fits(rest, next))
    }
}

/// Whether `lut` fits `obs`: some gap sequence in `[1, T]^(N-1)` and some
/// completion make every recorded row an exact image of the previous one.
pub fn fits_observation(
    lut: &LookupTable,
    obs: &Observation,
    gap_bound: u32,
    budget: &OracleBudget,
) -> Result<bool> {
    check_gap_budget(obs, gap_bound, budget)?;
    let mut search = FitSearch {
        lut,
        gap_bound,
        memo: HashMap::new(),
    };
    Ok(search.fits(&obs.rows()[1..], obs.initial()))
}

/// Whether `lut` fits every observation of `set`.
pub fn verify_fit(
    lut: &LookupTable,
    set: &ObservationSet,
    gap_bound: u32,
    budget: &OracleBudget,
) -> Result<bool> {
    for obs in set {
        check_gap_budget(obs, gap_bound, budget)?;
    }
    for obs in set {
        if !fits_observation(lut, obs, gap_bound, budget)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The fitting definition taken literally: some completion `I'` has, for
/// every `n`, a gap `t <= T` with `A^t(I'[n]) = I'[n+1]`.
pub fn fits_by_completions(
    lut: &LookupTable,
    obs: &Observation,
    gap_bound: u32,
    budget: &OracleBudget,
) -> Result<bool> {
    if gap_bound == 0 {
        return Err(Error::Range("the gap bound T must be at least 1".into()));
    }
    let completions = obs.completions(budget.max_completions)?;
    Ok(completions.iter().any(|full| {
        full.rows().windows(2).all(|pair| {
            let target = pair[1].values();
            let mut state = pair[0].values().clone();
            (0..gap_bound).any(|_| {
                state = lut.step(&state);
                state == *target
            })
        })
    }))
}

/// Every rule of the given radius fitting `set`, in ascending order.
pub fn enumerate_fitting_rules(
    set: &ObservationSet,
    radius: u32,
    gap_bound: u32,
    budget: &OracleBudget,
) -> Result<Vec<RuleNumber>> {
    let table = LookupTable::zeros(radius)?.len();
    let rules = if table < 64 { Some(1u64 << table) } else { None };
    let count = match rules {
        Some(n) if n <= budget.max_rules => n,
        _ => {
            return Err(Error::Capacity(format!(
                "radius {radius} has 2^{table} rules, above the budget of {}",
                budget.max_rules
            )))
        }
    };
    for obs in set {
        check_gap_budget(obs, gap_bound, budget)?;
    }
    let fitting = (0..count)
        .into_par_iter()
        .map(|n| {
            let lut = LookupTable::from_number(n as RuleNumber, radius)?;
            Ok((n, verify_fit(&lut, set, gap_bound, budget)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(fitting
        .into_iter()
        .filter(|&(_, ok)| ok)
        .map(|(n, _)| n as RuleNumber)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error_measures::min_error_exact;
    use crate::observation::Cell;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eca(n: u128) -> LookupTable {
        LookupTable::from_number(n, 1).unwrap()
    }

    fn synthetic(rule: u128, count: usize, rows: usize, cols: usize, bound: u32, rng: &mut ChaCha8Rng) -> ObservationSet {
        let lut = eca(rule);
        let obs = (0..count)
            .map(|_| {
                let mut cur = Configuration::random(cols, rng);
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

    #[test]
    fn generator_fits_its_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let set = synthetic(110, 2, 3, 8, 2, &mut rng);
        let budget = OracleBudget::default();
        assert!(verify_fit(&eca(110), &set, 2, &budget).unwrap());
        let rules = enumerate_fitting_rules(&set, 1, 2, &budget).unwrap();
        assert!(rules.contains(&110));
        assert!(rules.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn zero_rule_rejected_when_ones_follow() {
        // Rule 150 keeps the single-one pattern alive; rule 0 cannot produce
        // a 1 at any gap.
        let obs = Observation::from_configurations(vec![
            "0010000".parse().unwrap(),
            "0111000".parse().unwrap(),
        ])
        .unwrap();
        let set = ObservationSet::new(vec![obs.clone()]).unwrap();
        let budget = OracleBudget::default();
        assert!(!verify_fit(&eca(0), &set, 2, &budget).unwrap());
        assert!(!fits_by_completions(&eca(0), &obs, 2, &budget).unwrap());
        assert!(min_error_exact(&eca(0), &obs, 2, 100).unwrap().value > 0);
        assert!(verify_fit(&eca(150), &set, 2, &budget).unwrap());
    }

    #[test]
    fn blind_set_is_fitted_by_every_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let set = synthetic(30, 2, 3, 6, 2, &mut rng);
        let blind = set.mask_random(set.maskable_count(), &mut rng).unwrap();
        let budget = OracleBudget::default();
        let rules = enumerate_fitting_rules(&blind, 1, 2, &budget).unwrap();
        assert_eq!(rules, (0..256).collect::<Vec<_>>());
        assert!(verify_fit(&eca(77), &blind, 2, &budget).unwrap());
    }

    #[test]
    fn subsets_admit_more_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let set = synthetic(54, 3, 3, 6, 2, &mut rng);
        let budget = OracleBudget::default();
        let all = enumerate_fitting_rules(&set, 1, 2, &budget).unwrap();
        for drop in 0..3 {
            let keep: Vec<usize> = (0..3).filter(|&i| i != drop).collect();
            let sub = set.subset(&keep).unwrap();
            let more = enumerate_fitting_rules(&sub, 1, 2, &budget).unwrap();
            assert!(all.iter().all(|r| more.contains(r)));
        }
    }

    #[test]
    fn capacity_errors() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let set = synthetic(54, 1, 3, 6, 2, &mut rng);
        let budget = OracleBudget::default();
        assert!(matches!(enumerate_fitting_rules(&set, 2, 2, &budget), Err(Error::Capacity(_))));
        let tight = OracleBudget { max_gap_sequences: 3, ..budget };
        assert!(matches!(verify_fit(&eca(54), &set, 2, &tight), Err(Error::Capacity(_))));
        let few = OracleBudget { max_rules: 255, ..budget };
        assert!(matches!(enumerate_fitting_rules(&set, 1, 2, &few), Err(Error::Capacity(_))));
    }

    #[test]
    fn three_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let budget = OracleBudget::default();
        for _ in 0..300 {
            let rows = rng.gen_range(1..=4);
            let cols = rng.gen_range(1..=5);
            let density: f64 = rng.gen();
            let cells: Vec<Vec<Cell>> = (0..rows)
                .map(|n| {
                    (0..cols)
                        .map(|_| {
                            if n > 0 && rng.gen_bool(density) {
                                Cell::Unknown
                            } else if rng.gen() {
                                Cell::One
                            } else {
                                Cell::Zero
                            }
                        })
                        .collect()
                })
                .collect();
            let obs = Observation::from_cells(&cells).unwrap();
            let lut = LookupTable::random(1, &mut rng).unwrap();
            let bound = rng.gen_range(1..=3);
            let dfs = fits_observation(&lut, &obs, bound, &budget).unwrap();
            let literal = fits_by_completions(&lut, &obs, bound, &budget).unwrap();
            let exact_zero = min_error_exact(&lut, &obs, bound, 1000).unwrap().value == 0;
            assert_eq!(dfs, literal, "{obs:?} rule {:?} T={bound}", lut);
            assert_eq!(dfs, exact_zero);
        }
    }
}
