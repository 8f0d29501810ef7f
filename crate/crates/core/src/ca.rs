//! Local rules and one-dimensional binary configurations.
//!
//! A local rule of radius `r` maps a neighborhood `(s_1, ..., s_{2r+1})` to a
//! new cell state. Neighborhoods are read as binary numbers with `s_1` as the
//! most significant digit, so the neighborhood value `v` selects bit `v` of
//! the rule number. The printable form of a table lists outputs from the
//! all-ones neighborhood down to the all-zeros one, which is the usual
//! Wolfram ordering (`111 110 101 100 011 010 001 000` for `r = 1`).
//!
//! Boundaries are periodic: cell `i + N` is cell `i`. The radius may exceed
//! the configuration length, in which case windows wrap more than once.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rule numbers are stored in 128 bits, enough for every radius up to 3.
pub type RuleNumber = u128;

/// Largest radius accepted by [`LookupTable`]; its table has 2^17 entries.
pub const MAX_RADIUS: u32 = 8;

const WORD: usize = 64;

fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD)
}

/// A binary configuration of `N >= 1` cells, bit-packed.
///
/// Bits past `len` in the last word are always zero, so derived equality and
/// hashing are semantic.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    len: usize,
    words: Vec<u64>,
}

impl Configuration {
    /// All-zero configuration. Panics if `len == 0`.
    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "configuration length must be positive");
        Configuration {
            len,
            words: vec![0; words_for(len)],
        }
    }

    /// Builds a configuration from 0/1 values.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::Argument("configuration must have at least one cell".into()));
        }
        let mut c = Configuration::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => c.set(i, true),
                other => {
                    return Err(Error::Argument(format!("cell {i} has non-binary value {other}")))
                }
            }
        }
        Ok(c)
    }

    pub fn from_bools(bits: &[bool]) -> Result<Self> {
        let raw: Vec<u8> = bits.iter().map(|&b| b as u8).collect();
        Self::from_bits(&raw)
    }

    /// Uniformly random configuration.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut c = Configuration::zeros(len);
        for w in c.words.iter_mut() {
            *w = rng.gen();
        }
        c.clear_tail();
        c
    }

    pub(crate) fn from_words(len: usize, words: Vec<u64>) -> Self {
        debug_assert_eq!(words.len(), words_for(len));
        let mut c = Configuration { len, words };
        c.clear_tail();
        c
    }

    fn clear_tail(&mut self) {
        let rem = self.len % WORD;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "cell index {i} out of bounds for length {}", self.len);
        self.bit(i) == 1
    }

    #[inline]
    fn bit(&self, i: usize) -> usize {
        ((self.words[i / WORD] >> (i % WORD)) & 1) as usize
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "cell index {i} out of bounds for length {}", self.len);
        let mask = 1u64 << (i % WORD);
        if value {
            self.words[i / WORD] |= mask;
        } else {
            self.words[i / WORD] &= !mask;
        }
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.len).map(|i| self.bit(i) as u8).collect()
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Cyclic shift: cell `i` of the result is cell `i + k (mod N)` of `self`.
    pub fn rotated(&self, k: usize) -> Self {
        let mut out = Configuration::zeros(self.len);
        for i in 0..self.len {
            if self.bit((i + k) % self.len) == 1 {
                out.set(i, true);
            }
        }
        out
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    fn reset(&mut self, len: usize) {
        self.len = len;
        self.words.clear();
        self.words.resize(words_for(len), 0);
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.bit(i) == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Configuration({self})")
    }
}

impl FromStr for Configuration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|ch| match ch {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Argument(format!("invalid cell character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Configuration::from_bits(&bits)
    }
}

/// The lookup table of a local rule.
///
/// Serialized as `{"radius": r, "table": "<bits, all-ones neighborhood first>"}`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "TableRepr", try_from = "TableRepr")]
pub struct LookupTable {
    radius: u32,
    // bit v = output for neighborhood value v
    words: Vec<u64>,
}

impl LookupTable {
    /// The constant-zero rule of the given radius.
    pub fn zeros(radius: u32) -> Result<Self> {
        if radius > MAX_RADIUS {
            return Err(Error::Range(format!(
                "radius {radius} exceeds the maximum of {MAX_RADIUS}"
            )));
        }
        Ok(LookupTable {
            radius,
            words: vec![0; words_for(table_len(radius))],
        })
    }

    /// Decodes a rule number: bit `v` of `number` is the output for
    /// neighborhood value `v`.
    pub fn from_number(number: RuleNumber, radius: u32) -> Result<Self> {
        let mut lut = Self::zeros(radius)?;
        let len = lut.len();
        if len < 128 && number >> len != 0 {
            return Err(Error::Range(format!(
                "rule number {number} exceeds the maximum {} for radius {radius}",
                (1u128 << len) - 1
            )));
        }
        for (i, w) in lut.words.iter_mut().take(2).enumerate() {
            *w = (number >> (64 * i)) as u64;
        }
        lut.clear_tail();
        Ok(lut)
    }

    /// Builds a table from its printable bit order (all-ones neighborhood first).
    pub fn from_table_bits(radius: u32, bits: &[u8]) -> Result<Self> {
        let mut lut = Self::zeros(radius)?;
        let len = lut.len();
        if bits.len() != len {
            return Err(Error::Argument(format!(
                "radius {radius} needs {len} table bits, got {}",
                bits.len()
            )));
        }
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => lut.set_output(len - 1 - i, true),
                other => return Err(Error::Argument(format!("non-binary table bit {other}"))),
            }
        }
        Ok(lut)
    }

    /// Tabulates `f(s_1, ..., s_{2r+1})` over all neighborhoods.
    pub fn from_fn(radius: u32, f: impl Fn(&[u8]) -> bool) -> Result<Self> {
        let mut lut = Self::zeros(radius)?;
        let width = lut.neighborhood_width();
        let mut cells = vec![0u8; width];
        for v in 0..lut.len() {
            for (j, c) in cells.iter_mut().enumerate() {
                *c = ((v >> (width - 1 - j)) & 1) as u8;
            }
            if f(&cells) {
                lut.set_output(v, true);
            }
        }
        Ok(lut)
    }

    /// Uniformly random table.
    pub fn random<R: Rng + ?Sized>(radius: u32, rng: &mut R) -> Result<Self> {
        let mut lut = Self::zeros(radius)?;
        for w in lut.words.iter_mut() {
            *w = rng.gen();
        }
        lut.clear_tail();
        Ok(lut)
    }

    pub(crate) fn from_words(radius: u32, words: Vec<u64>) -> Self {
        debug_assert_eq!(words.len(), words_for(table_len(radius)));
        let mut lut = LookupTable { radius, words };
        lut.clear_tail();
        lut
    }

    fn clear_tail(&mut self) {
        let rem = self.len() % WORD;
        if rem != 0 {
            self.words[0] &= (1u64 << rem) - 1;
        }
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    /// Number of table entries, `2^(2r+1)`.
    pub fn len(&self) -> usize {
        table_len(self.radius)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn neighborhood_width(&self) -> usize {
        2 * self.radius as usize + 1
    }

    #[inline]
    pub fn output(&self, neighborhood: usize) -> bool {
        (self.words[neighborhood / WORD] >> (neighborhood % WORD)) & 1 == 1
    }

    pub fn set_output(&mut self, neighborhood: usize, value: bool) {
        assert!(neighborhood < self.len());
        let mask = 1u64 << (neighborhood % WORD);
        if value {
            self.words[neighborhood / WORD] |= mask;
        } else {
            self.words[neighborhood / WORD] &= !mask;
        }
    }

    /// Flips the output of one neighborhood.
    pub fn flip(&mut self, neighborhood: usize) {
        assert!(neighborhood < self.len());
        self.words[neighborhood / WORD] ^= 1u64 << (neighborhood % WORD);
    }

    /// Outputs in printable order, all-ones neighborhood first.
    pub fn table_bits(&self) -> Vec<u8> {
        (0..self.len()).rev().map(|v| self.output(v) as u8).collect()
    }

    /// The rule number, or `None` when it does not fit in 128 bits.
    pub fn rule_number(&self) -> Option<RuleNumber> {
        if self.words.iter().skip(2).any(|&w| w != 0) {
            return None;
        }
        let lo = self.words[0] as u128;
        let hi = self.words.get(1).copied().unwrap_or(0) as u128;
        Some(lo | (hi << 64))
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    /// Applies the global rule once.
    pub fn step(&self, config: &Configuration) -> Configuration {
        let mut out = Configuration::zeros(config.len());
        self.step_into(config, &mut out);
        out
    }

    /// Applies the global rule once, writing into `dst` (resized as needed).
    pub fn step_into(&self, src: &Configuration, dst: &mut Configuration) {
        let n = src.len;
        dst.reset(n);
        let r = self.radius as i64;
        let width = self.neighborhood_width();
        let mask = (1usize << width) - 1;

        let mut window = 0usize;
        for j in 0..width as i64 {
            let idx = (j - r).rem_euclid(n as i64) as usize;
            window = (window << 1) | src.bit(idx);
        }
        let mut incoming = ((r + 1) % n as i64) as usize;
        let mut acc = 0u64;
        for m in 0..n {
            let out = (self.words[window / WORD] >> (window % WORD)) & 1;
            acc |= out << (m % WORD);
            if m % WORD == WORD - 1 {
                dst.words[m / WORD] = acc;
                acc = 0;
            }
            window = ((window << 1) | src.bit(incoming)) & mask;
            incoming += 1;
            if incoming == n {
                incoming = 0;
            }
        }
        if !n.is_multiple_of(WORD) {
            dst.words[n / WORD] = acc;
        }
    }

    /// `t`-fold application; `t = 0` returns a copy of `config`.
    pub fn iterate(&self, config: &Configuration, t: u64) -> Configuration {
        let mut cur = config.clone();
        let mut next = Configuration::zeros(config.len());
        for _ in 0..t {
            self.step_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// The space-time diagram `(c, A(c), ..., A^(steps-1)(c))`.
    pub fn diagram(&self, config: &Configuration, steps: usize) -> Vec<Configuration> {
        let mut rows: Vec<Configuration> = Vec::with_capacity(steps);
        if steps == 0 {
            return rows;
        }
        rows.push(config.clone());
        for _ in 1..steps {
            let next = self.step(rows.last().unwrap());
            rows.push(next);
        }
        rows
    }

    /// Re-expresses the rule with a larger radius. The outer cells of the
    /// wider neighborhood are ignored, so both tables define the same global
    /// rule on every configuration.
    pub fn embed(&self, target_radius: u32) -> Result<LookupTable> {
        if target_radius < self.radius {
            return Err(Error::Range(format!(
                "cannot embed a radius-{} rule at smaller radius {target_radius}",
                self.radius
            )));
        }
        let mut out = LookupTable::zeros(target_radius)?;
        let margin = (target_radius - self.radius) as usize;
        let inner_mask = self.len() - 1;
        for v in 0..out.len() {
            if self.output((v >> margin) & inner_mask) {
                out.set_output(v, true);
            }
        }
        Ok(out)
    }
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    radius: u32,
    table: String,
}

impl From<LookupTable> for TableRepr {
    fn from(lut: LookupTable) -> Self {
        TableRepr {
            radius: lut.radius,
            table: lut.to_string(),
        }
    }
}

impl TryFrom<TableRepr> for LookupTable {
    type Error = Error;

    fn try_from(repr: TableRepr) -> Result<Self> {
        let bits = repr
            .table
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Argument(format!("invalid table character {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        LookupTable::from_table_bits(repr.radius, &bits)
    }
}

fn table_len(radius: u32) -> usize {
    1usize << (2 * radius as usize + 1)
}

impl Ord for LookupTable {
    /// Radius first, then rule number.
    fn cmp(&self, other: &Self) -> Ordering {
        self.radius
            .cmp(&other.radius)
            .then_with(|| self.words.iter().rev().cmp(other.words.iter().rev()))
    }
}

impl PartialOrd for LookupTable {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for LookupTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.table_bits() {
            f.write_str(if b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for LookupTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rule_number() {
            Some(n) => write!(f, "LookupTable(r={}, rule {n})", self.radius),
            None => write!(f, "LookupTable(r={}, {self})", self.radius),
        }
    }
}
