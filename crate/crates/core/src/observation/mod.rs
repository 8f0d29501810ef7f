//! Partial space-time observations.
//!
//! An [`Observation`] is an `N x M` grid over `{0, 1, ?}` whose first row is
//! fully known. Row `n > 0` holds the configuration at some unknown later
//! time step. Indices in this API are zero-based.

mod format;

use std::fmt;

use rand::Rng;

use crate::ca::{Configuration, LookupTable};
use crate::error::{Error, Result};
use crate::error_measures::GapSequence;

pub use format::{parse_json, parse_text, to_json, to_text, Metadata, ObservationFile};

/// One grid entry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cell {
    Zero,
    One,
    Unknown,
}

impl Cell {
    pub fn from_char(ch: char) -> Option<Cell> {
        match ch {
            '0' => Some(Cell::Zero),
            '1' => Some(Cell::One),
            '?' => Some(Cell::Unknown),
            _ => None,
        }
    }

    pub fn to_char(self) -> char {
        match self {
            Cell::Zero => '0',
            Cell::One => '1',
            Cell::Unknown => '?',
        }
    }

    pub fn is_known(self) -> bool {
        self != Cell::Unknown
    }
}

/// A row over `{0, 1, ?}`: a value vector plus a known-mask. Unknown cells
/// always carry value 0.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PartialRow {
    values: Configuration,
    known: Configuration,
}

impl PartialRow {
    pub fn from_cells(cells: &[Cell]) -> Result<Self> {
        if cells.is_empty() {
            return Err(Error::Argument("row must have at least one cell".into()));
        }
        let mut values = Configuration::zeros(cells.len());
        let mut known = Configuration::zeros(cells.len());
        for (i, c) in cells.iter().enumerate() {
            match c {
                Cell::Zero => known.set(i, true),
                Cell::One => {
                    known.set(i, true);
                    values.set(i, true);
                }
                Cell::Unknown => {}
            }
        }
        Ok(PartialRow { values, known })
    }

    /// A fully known row.
    pub fn complete(values: Configuration) -> Self {
        let len = values.len();
        let known = Configuration::from_words(len, vec![u64::MAX; values.words().len()]);
        PartialRow { values, known }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, m: usize) -> Cell {
        if !self.known.get(m) {
            Cell::Unknown
        } else if self.values.get(m) {
            Cell::One
        } else {
            Cell::Zero
        }
    }

    pub fn cells(&self) -> Vec<Cell> {
        (0..self.len()).map(|m| self.get(m)).collect()
    }

    pub fn known_count(&self) -> u32 {
        self.known.count_ones()
    }

    pub fn is_complete(&self) -> bool {
        self.known_count() as usize == self.len()
    }

    /// Known values, with unknown cells reading as 0.
    pub fn values(&self) -> &Configuration {
        &self.values
    }

    /// Mask of known cells.
    pub fn known_mask(&self) -> &Configuration {
        &self.known
    }

    /// Number of known cells whose value differs from `config`.
    pub fn mismatches(&self, config: &Configuration) -> u32 {
        debug_assert_eq!(config.len(), self.len());
        self.values
            .words()
            .iter()
            .zip(config.words())
            .zip(self.known.words())
            .map(|((v, c), k)| ((v ^ c) & k).count_ones())
            .sum()
    }

    /// Known cells from `self`, unknown cells from `config`.
    pub fn fill(&self, config: &Configuration) -> Configuration {
        let words = self
            .values
            .words()
            .iter()
            .zip(config.words())
            .zip(self.known.words())
            .map(|((v, c), k)| (v & k) | (c & !k))
            .collect();
        Configuration::from_words(self.len(), words)
    }

    fn forget(&mut self, m: usize) {
        self.known.set(m, false);
        self.values.set(m, false);
    }
}

impl fmt::Display for PartialRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for m in 0..self.len() {
            write!(f, "{}", self.get(m).to_char())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PartialRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PartialRow({self})")
    }
}

/// A partial record of one space-time diagram.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Observation {
    rows: Vec<PartialRow>,
}

impl Observation {
    /// Validates shape and the fully-known first row.
    pub fn new(rows: Vec<PartialRow>) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::Argument("observation must have at least one row".into()))?;
        if !first.is_complete() {
            return Err(Error::Argument("first row of an observation must be fully known".into()));
        }
        let cols = first.len();
        if let Some((n, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::Argument(format!(
                "row {n} has {} cells, expected {cols}",
                row.len()
            )));
        }
        Ok(Observation { rows })
    }

    pub fn from_cells(grid: &[Vec<Cell>]) -> Result<Self> {
        let rows = grid
            .iter()
            .map(|r| PartialRow::from_cells(r))
            .collect::<Result<Vec<_>>>()?;
        Observation::new(rows)
    }

    /// A spatially complete observation from recorded configurations.
    pub fn from_configurations(rows: Vec<Configuration>) -> Result<Self> {
        Observation::new(rows.into_iter().map(PartialRow::complete).collect())
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.rows[0].len()
    }

    pub fn rows(&self) -> &[PartialRow] {
        &self.rows
    }

    pub fn row(&self, n: usize) -> &PartialRow {
        &self.rows[n]
    }

    pub fn get(&self, n: usize, m: usize) -> Cell {
        self.rows[n].get(m)
    }

    /// The initial configuration.
    pub fn initial(&self) -> &Configuration {
        self.rows[0].values()
    }

    /// Number of known entries, `C(I)`.
    pub fn count_known(&self) -> u64 {
        self.rows.iter().map(|r| r.known_count() as u64).sum()
    }

    pub fn unknown_count(&self) -> u64 {
        (self.n_rows() * self.n_cols()) as u64 - self.count_known()
    }

    pub fn is_spatially_complete(&self) -> bool {
        self.rows.iter().all(PartialRow::is_complete)
    }

    /// Marks entry `(n, m)` unknown. The first row cannot be touched.
    pub fn forget(&mut self, n: usize, m: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::Argument("entries of the first row cannot be masked".into()));
        }
        self.rows[n].forget(m);
        Ok(())
    }

    /// All spatially complete observations agreeing with `self` on known
    /// entries. Unknowns are filled in row-major order with the first unknown
    /// as the most significant digit. Fails if there would be more than
    /// `limit` of them.
    pub fn completions(&self, limit: u64) -> Result<Vec<Observation>> {
        let unknowns: Vec<(usize, usize)> = (1..self.n_rows())
            .flat_map(|n| (0..self.n_cols()).map(move |m| (n, m)))
            .filter(|&(n, m)| !self.rows[n].known.get(m))
            .collect();
        let u = unknowns.len();
        let count = if u < 64 { 1u64 << u } else { u64::MAX };
        if u >= 64 || count > limit {
            return Err(Error::Capacity(format!(
                "{u} unknown entries give 2^{u} completions, above the limit of {limit}"
            )));
        }
        let mut out = Vec::with_capacity(count as usize);
        for code in 0..count {
            let mut rows = self.rows.clone();
            for (j, &(n, m)) in unknowns.iter().enumerate() {
                let bit = (code >> (u - 1 - j)) & 1 == 1;
                rows[n].known.set(m, true);
                rows[n].values.set(m, bit);
            }
            out.push(Observation { rows });
        }
        Ok(out)
    }

    /// Fills each unknown entry of row `n` from `lut` iterated `gaps[n-1]`
    /// times on the completed row `n - 1`.
    pub fn a_completion(&self, lut: &LookupTable, gaps: &GapSequence) -> Result<Observation> {
        self.check_gaps(gaps)?;
        let mut rows = Vec::with_capacity(self.n_rows());
        rows.push(self.rows[0].clone());
        let mut current = self.rows[0].values().clone();
        for (row, &t) in self.rows[1..].iter().zip(gaps.as_slice()) {
            let evolved = lut.iterate(&current, t as u64);
            current = row.fill(&evolved);
            rows.push(PartialRow::complete(current.clone()));
        }
        Ok(Observation { rows })
    }

    pub(crate) fn check_gaps(&self, gaps: &GapSequence) -> Result<()> {
        if gaps.len() + 1 != self.n_rows() {
            return Err(Error::Argument(format!(
                "an observation with {} rows needs {} gaps, got {}",
                self.n_rows(),
                self.n_rows() - 1,
                gaps.len()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, row) in self.rows.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{row}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Observation[")?;
        for (i, row) in self.rows.iter().enumerate() {
            if i > 0 {
                write!(f, "/")?;
            }
            write!(f, "{row}")?;
        }
        write!(f, "]")
    }
}

/// A non-empty ordered collection of observations of one unknown rule.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ObservationSet {
    observations: Vec<Observation>,
}

impl ObservationSet {
    pub fn new(observations: Vec<Observation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Argument("observation set must not be empty".into()));
        }
        Ok(ObservationSet { observations })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn get(&self, i: usize) -> &Observation {
        &self.observations[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Observation> {
        self.observations.iter()
    }

    /// `C(I)`: known entries over all observations.
    pub fn count_known(&self) -> u64 {
        self.observations.iter().map(Observation::count_known).sum()
    }

    /// `M(I)`: columns over all observations.
    pub fn count_columns(&self) -> u64 {
        self.observations.iter().map(|o| o.n_cols() as u64).sum()
    }

    /// `(C(I), M(I))`.
    pub fn counts(&self) -> (u64, u64) {
        (self.count_known(), self.count_columns())
    }

    /// Known entries outside first rows.
    pub fn maskable_count(&self) -> u64 {
        self.count_known() - self.count_columns()
    }

    pub fn is_spatially_complete(&self) -> bool {
        self.observations.iter().all(Observation::is_spatially_complete)
    }

    /// The observations at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<ObservationSet> {
        let obs = indices
            .iter()
            .map(|&i| {
                self.observations.get(i).cloned().ok_or_else(|| {
                    Error::Argument(format!("observation index {i} out of range"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ObservationSet::new(obs)
    }

    /// Replaces `count` known entries, drawn uniformly without replacement
    /// from all known entries outside first rows of the whole set, by `?`.
    pub fn mask_random<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> Result<ObservationSet> {
        let positions: Vec<(usize, usize, usize)> = self
            .observations
            .iter()
            .enumerate()
            .flat_map(|(i, obs)| {
                (1..obs.n_rows()).flat_map(move |n| {
                    (0..obs.n_cols())
                        .filter(move |&m| obs.get(n, m).is_known())
                        .map(move |m| (i, n, m))
                })
            })
            .collect();
        if count > positions.len() as u64 {
            return Err(Error::Capacity(format!(
                "cannot mask {count} entries: only {} known entries lie outside first rows",
                positions.len()
            )));
        }
        let mut out = self.clone();
        for idx in rand::seq::index::sample(rng, positions.len(), count as usize) {
            let (i, n, m) = positions[idx];
            out.observations[i].forget(n, m)?;
        }
        Ok(out)
    }
}

impl<'a> IntoIterator for &'a ObservationSet {
    type Item = &'a Observation;
    type IntoIter = std::slice::Iter<'a, Observation>;

    fn into_iter(self) -> Self::IntoIter {
        self.observations.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ca::Configuration;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn grid(rows: &[&str]) -> Observation {
        let cells: Vec<Vec<Cell>> = rows
            .iter()
            .map(|r| r.chars().map(|c| Cell::from_char(c).unwrap()).collect())
            .collect();
        Observation::from_cells(&cells).unwrap()
    }

    fn example() -> Observation {
        grid(&["010", "0?1", "11?"])
    }

    #[test]
    fn example_counts() {
        assert_eq!(example().count_known(), 7);
        let set = ObservationSet::new(vec![example()]).unwrap();
        assert_eq!(set.counts(), (7, 3));
        let twice = ObservationSet::new(vec![example(), example()]).unwrap();
        assert_eq!(twice.counts(), (14, 6));
    }

    #[test]
    fn trivial_counts() {
        assert_eq!(grid(&["01101", "11111", "00000", "10101"]).count_known(), 20);
        let only_first = grid(&["010", "???"]);
        assert_eq!(only_first.count_known(), 3);
        let set = ObservationSet::new(vec![only_first, grid(&["1100", "????", "????"])]).unwrap();
        let (c, m) = set.counts();
        assert_eq!(c, m);
    }

    #[test]
    fn first_row_must_be_known() {
        let cells = vec![vec![Cell::Zero, Cell::Unknown]];
        assert!(Observation::from_cells(&cells).is_err());
        let ragged = vec![vec![Cell::Zero, Cell::One], vec![Cell::Zero]];
        assert!(Observation::from_cells(&ragged).is_err());
        assert!(ObservationSet::new(vec![]).is_err());
    }

    #[test]
    fn example_completions() {
        let got = example().completions(16).unwrap();
        let want = vec![
            grid(&["010", "001", "110"]),
            grid(&["010", "001", "111"]),
            grid(&["010", "011", "110"]),
            grid(&["010", "011", "111"]),
        ];
        assert_eq!(got, want);
        assert!(example().completions(3).is_err());
    }

    #[test]
    fn complete_observation_has_one_completion() {
        let obs = grid(&["010", "011", "110"]);
        assert_eq!(obs.completions(1).unwrap(), vec![obs.clone()]);
        let single = grid(&["10"]);
        assert_eq!(single.completions(1).unwrap(), vec![single.clone()]);
    }

    #[test]
    fn a_completion_with_eca_150() {
        let lut = LookupTable::from_number(150, 1).unwrap();
        let gaps = GapSequence::new(vec![1, 2]).unwrap();
        let done = example().a_completion(&lut, &gaps).unwrap();
        assert_eq!(done, grid(&["010", "011", "110"]));
    }

    #[test]
    fn a_completion_with_zero_rule() {
        let lut = LookupTable::from_number(0, 1).unwrap();
        let gaps = GapSequence::new(vec![1, 1]).unwrap();
        let done = example().a_completion(&lut, &gaps).unwrap();
        assert_eq!(done.get(1, 1), Cell::Zero);
        assert_eq!(done.get(2, 2), Cell::Zero);
        assert_eq!(done, grid(&["010", "001", "110"]));
    }

    #[test]
    fn a_completion_of_complete_observation_is_identity() {
        let obs = grid(&["0110", "1010", "0001"]);
        let lut = LookupTable::from_number(30, 1).unwrap();
        let gaps = GapSequence::new(vec![3, 1]).unwrap();
        assert_eq!(obs.a_completion(&lut, &gaps).unwrap(), obs);
        assert!(obs.a_completion(&lut, &GapSequence::new(vec![1]).unwrap()).is_err());
    }

    #[test]
    fn masking_zero_is_noop() {
        let set = ObservationSet::new(vec![grid(&["010", "011", "110"])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(set.mask_random(0, &mut rng).unwrap(), set);
    }

    #[test]
    fn masking_everything_leaves_first_row() {
        let set = ObservationSet::new(vec![grid(&["010", "011", "110"])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let masked = set.mask_random(6, &mut rng).unwrap();
        assert_eq!(masked.count_known(), 3);
        assert_eq!(masked.get(0).row(0), set.get(0).row(0));
        assert!(set.mask_random(7, &mut rng).is_err());
    }

    #[test]
    fn pinned_seed_reproduces_example_grid() {
        // Seed 5 samples exactly the entries (2,2) and (3,3) in 1-based terms.
        let set = ObservationSet::new(vec![grid(&["010", "011", "110"])]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(PINNED_SEED);
        let masked = set.mask_random(2, &mut rng).unwrap();
        assert_eq!(set.count_known(), 9);
        assert_eq!(masked.count_known(), 7);
        assert_eq!(masked.get(0), &example());
    }

    const PINNED_SEED: u64 = 5;

    proptest! {
        #[test]
        fn masking_decrements_by_count(seed in any::<u64>(), count in 0u64..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lut = LookupTable::from_number(110, 1).unwrap();
            let obs: Vec<Observation> = (0..3)
                .map(|_| {
                    let c = Configuration::random(9, &mut rng);
                    Observation::from_configurations(lut.diagram(&c, 5)).unwrap()
                })
                .collect();
            let set = ObservationSet::new(obs).unwrap();
            let masked = set.mask_random(count, &mut rng).unwrap();
            prop_assert_eq!(masked.count_known(), set.count_known() - count);
            for (a, b) in masked.iter().zip(set.iter()) {
                prop_assert_eq!(a.row(0), b.row(0));
                prop_assert!(a.count_known() >= a.n_cols() as u64);
            }
        }

        #[test]
        fn completions_contain_a_completion(seed in any::<u64>(), rule in any::<u8>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rows = rng.gen_range(1..=4);
            let cols = rng.gen_range(1..=5);
            let grid: Vec<Vec<Cell>> = (0..rows)
                .map(|n| {
                    (0..cols)
                        .map(|_| match rng.gen_range(0..3) {
                            0 => Cell::Zero,
                            1 => Cell::One,
                            _ if n == 0 => Cell::One,
                            _ => Cell::Unknown,
                        })
                        .collect()
                })
                .collect();
            let obs = Observation::from_cells(&grid).unwrap();
            let all = obs.completions(1 << 20).unwrap();
            prop_assert_eq!(all.len() as u64, 1u64 << obs.unknown_count());
            let gaps = GapSequence::new((1..rows).map(|_| rng.gen_range(1..=3)).collect()).unwrap();
            let lut = LookupTable::from_number(rule as u128, 1).unwrap();
            let done = obs.a_completion(&lut, &gaps).unwrap();
            prop_assert!(done.is_spatially_complete());
            prop_assert!(all.contains(&done));
        }
    }
}
