//! Identification of one-dimensional binary cellular automata from partial
//! space-time observations recorded at unknown time steps.
//!
//! The crate is organised bottom-up:
//!
//! * [`ca`]: lookup tables, configurations and the periodic global rule.
//! * [`observation`]: partial observations, observation sets, completions
//!   and their text/JSON formats.
//! * [`error_measures`]: distances and error measures between a rule and
//!   observations, exact and sampled.
//! * [`ga`]: the genetic algorithm searching for a fitting rule.
//! * [`experiment`]: synthetic data, degradation series and parameter sweeps.
//! * [`oracle`]: brute-force ground truth for small instances.
//! * [`cli`]: the `caid` command-line front end.

pub mod ca;
pub mod cli;
pub mod error;
pub mod error_measures;
pub mod experiment;
pub mod ga;
pub mod observation;
pub mod oracle;
pub mod seed;

pub use ca::{Configuration, LookupTable, RuleNumber};
pub use error::{Error, Result};
pub use error_measures::{ErrorEstimate, GapSequence};
pub use observation::{Cell, Observation, ObservationSet, PartialRow};
