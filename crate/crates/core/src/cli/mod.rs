//! The `caid` command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 unreadable or
//! malformed data, 3 capacity exceeded.

mod manifest;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::ca::{LookupTable, RuleNumber};
use crate::error::{Error, Result};
use crate::experiment::SweepConfig;
use crate::ga::SolverConfig;
use crate::oracle::OracleBudget;

pub use manifest::{
    check_rule_space, read_observations, EvalMode, Format, ResolvedCommand, RunManifest, RunOptions,
};

#[derive(Debug, Parser)]
#[command(name = "caid", version, about = "Identify 1D binary cellular automata from partial observations")]
struct Cli {
    /// Worker threads; defaults to the number of cores. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Record zero for wall-clock fields so outputs are byte-for-byte stable.
    #[arg(long, global = true)]
    no_timing: bool,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a spatially complete synthetic observation set.
    Gen(GenArgs),
    /// Write the degradation series I(0..=k_max) of an observation set.
    Degrade(DegradeArgs),
    /// Search for a rule fitting an observation set.
    Identify(IdentifyArgs),
    /// Error of a given rule on an observation set.
    Eval(EvalArgs),
    /// Run the GA over a degradation series and write runs.csv / summary.csv.
    Sweep(SweepArgs),
    /// List every radius-r rule fitting an observation set, exhaustively.
    Oracle(OracleArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    rule: RuleNumber,
    #[arg(long, default_value_t = 1)]
    rule_radius: u32,
    /// Number of observations.
    #[arg(long, default_value_t = 64)]
    count: usize,
    #[arg(long, default_value_t = 69)]
    rows: usize,
    #[arg(long, default_value_t = 69)]
    cols: usize,
    #[arg(long, default_value_t = 10)]
    gap_bound: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to json for a .json output path, text otherwise.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Args)]
struct DegradeArgs {
    #[arg(long, short, visible_aliases = ["observations", "rule-file"])]
    input: PathBuf,
    /// Entries hidden per level.
    #[arg(long)]
    pi: u64,
    #[arg(long)]
    k_max: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Defaults to the format of the input.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

/// Solver settings; each overrides the config file.
#[derive(Debug, Default, Args)]
struct SolverFlags {
    #[arg(long)]
    radius: Option<u32>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    elite: Option<usize>,
    #[arg(long)]
    flip_probability: Option<f64>,
    #[arg(long)]
    gap_bound: Option<u32>,
    #[arg(long)]
    max_generations: Option<u32>,
    #[arg(long)]
    subset_size: Option<usize>,
    #[arg(long)]
    resamples: Option<u32>,
    #[arg(long)]
    confirm_resamples: Option<u32>,
    #[arg(long)]
    elite_off_after: Option<u32>,
    #[arg(long)]
    elite_on_after: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
}

impl SolverFlags {
    fn apply(&self, c: &mut SolverConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { c.$f = v; })* };
        }
        set!(
            radius,
            population,
            elite,
            flip_probability,
            gap_bound,
            max_generations,
            subset_size,
            resamples,
            confirm_resamples,
            elite_off_after,
            elite_on_after,
            seed
        );
    }
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    #[arg(long, short, visible_aliases = ["observations", "rule-file"])]
    input: PathBuf,
    /// TOML file with solver settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverFlags,
    /// Full report, including per-generation history, as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-generation history as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, short, visible_aliases = ["observations", "rule-file"])]
    input: PathBuf,
    /// Rule number.
    #[arg(long, conflicts_with = "table", required_unless_present = "table")]
    rule: Option<RuleNumber>,
    /// Lookup table bits, all-ones neighborhood first.
    #[arg(long)]
    table: Option<String>,
    #[arg(long, default_value_t = 1)]
    radius: u32,
    #[arg(long, default_value_t = 10)]
    gap_bound: u32,
    /// Exact minimum by exhaustive search instead of sampled scans.
    #[arg(long)]
    exact: bool,
    /// Most gap sequences per observation for --exact.
    #[arg(long, default_value_t = 1 << 20)]
    budget: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    resamples: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// TOML file with sweep settings; solver settings go in a [solver] table.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    rule: Option<RuleNumber>,
    #[arg(long)]
    rule_radius: Option<u32>,
    /// Observations per set.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    #[arg(long)]
    pi: Option<u64>,
    #[arg(long)]
    k_max: Option<u32>,
    #[arg(long)]
    repetitions: Option<u32>,
    /// --gap-bound sets the bound for both data and solver; --seed is the
    /// master seed.
    #[command(flatten)]
    solver: SolverFlags,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long, short, visible_aliases = ["observations", "rule-file"])]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    radius: u32,
    #[arg(long, default_value_t = 10)]
    gap_bound: u32,
    /// Check a single rule instead of enumerating.
    #[arg(long)]
    rule: Option<RuleNumber>,
    #[arg(long)]
    max_rules: Option<u64>,
    #[arg(long)]
    max_gap_sequences: Option<u64>,
    #[arg(long)]
    max_completions: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Write to this file (or directory) instead of the recorded one.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_toml<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
}

/// Solver settings from a TOML file, unspecified keys at their defaults.
/// Unknown keys are rejected.
pub fn load_config(path: &Path) -> Result<SolverConfig> {
    load_toml(Some(path))
}

/// Sweep settings from a TOML file.
pub fn load_sweep_config(path: &Path) -> Result<SweepConfig> {
    load_toml(Some(path))
}

fn absolute(path: &Path) -> Result<PathBuf> {
    Ok(std::path::absolute(path)?)
}

fn resolve(command: Command) -> Result<ResolvedCommand> {
    Ok(match command {
        Command::Gen(a) => {
            LookupTable::from_number(a.rule, a.rule_radius)?;
            let format = a.format.unwrap_or_else(|| a.out.as_deref().map_or(Format::Text, Format::for_path));
            ResolvedCommand::Gen {
                rule: a.rule,
                rule_radius: a.rule_radius,
                observations: a.count,
                rows: a.rows,
                cols: a.cols,
                gap_bound: a.gap_bound,
                seed: a.seed,
                format,
                out: a.out.as_deref().map(absolute).transpose()?,
            }
        }
        Command::Degrade(a) => {
            let format = a.format.unwrap_or_else(|| Format::for_path(&a.input));
            ResolvedCommand::Degrade {
                input: absolute(&a.input)?,
                pi: a.pi,
                k_max: a.k_max,
                seed: a.seed,
                format,
                out_dir: absolute(&a.out_dir)?,
            }
        }
        Command::Identify(a) => {
            let mut solver: SolverConfig = load_toml(a.config.as_deref())?;
            a.solver.apply(&mut solver);
            solver.validate()?;
            ResolvedCommand::Identify {
                input: absolute(&a.input)?,
                solver,
                out: a.out.as_deref().map(absolute).transpose()?,
                csv: a.csv.as_deref().map(absolute).transpose()?,
            }
        }
        Command::Eval(a) => {
            let rule = match (&a.table, a.rule) {
                (Some(bits), _) => {
                    let bits = bits
                        .chars()
                        .map(|c| match c {
                            '0' => Ok(0),
                            '1' => Ok(1),
                            other => Err(Error::Argument(format!("invalid table character {other:?}"))),
                        })
                        .collect::<Result<Vec<u8>>>()?;
                    LookupTable::from_table_bits(a.radius, &bits)?
                }
                (None, Some(n)) => LookupTable::from_number(n, a.radius)?,
                (None, None) => return Err(Error::Argument("either --rule or --table is required".into())),
            };
            let mode = if a.exact {
                EvalMode::Exact { budget: a.budget }
            } else {
                EvalMode::Sampled {
                    seed: a.seed,
                    resamples: a.resamples,
                }
            };
            ResolvedCommand::Eval {
                input: absolute(&a.input)?,
                rule,
                gap_bound: a.gap_bound,
                mode,
                out: a.out.as_deref().map(absolute).transpose()?,
            }
        }
        Command::Sweep(a) => {
            let mut config: SweepConfig = load_toml(a.config.as_deref())?;
            macro_rules! set {
                ($($flag:ident => $field:ident),*) => { $(if let Some(v) = a.$flag { config.$field = v; })* };
            }
            set!(rule => rule, rule_radius => rule_radius, count => observations, rows => rows,
                 cols => cols, pi => pi, k_max => k_max, repetitions => repetitions);
            a.solver.apply(&mut config.solver);
            if let Some(t) = a.solver.gap_bound {
                config.gap_bound = t;
            }
            if let Some(s) = a.solver.seed {
                config.seed = s;
            }
            config.solver.seed = 0;
            config.validate()?;
            ResolvedCommand::Sweep {
                config,
                out_dir: absolute(&a.out_dir)?,
            }
        }
        Command::Oracle(a) => {
            let defaults = OracleBudget::default();
            let budget = OracleBudget {
                max_rules: a.max_rules.unwrap_or(defaults.max_rules),
                max_gap_sequences: a.max_gap_sequences.unwrap_or(defaults.max_gap_sequences),
                max_completions: a.max_completions.unwrap_or(defaults.max_completions),
            };
            if a.rule.is_none() {
                check_rule_space(a.radius, &budget)?;
            }
            let input = a
                .input
                .ok_or_else(|| Error::Argument("--input is required".into()))?;
            ResolvedCommand::Oracle {
                input: absolute(&input)?,
                radius: a.radius,
                gap_bound: a.gap_bound,
                rule: a.rule,
                budget,
                out: a.out.as_deref().map(absolute).transpose()?,
            }
        }
        Command::Replay(_) => unreachable!("replay is resolved from its manifest"),
    })
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Range(_) | Error::Argument(_) | Error::Config(_) => 1,
        Error::Parse { .. } | Error::Io(_) | Error::Csv(_) => 2,
        Error::Capacity(_) => 3,
    }
}

fn dispatch(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let opts = RunOptions {
        threads: cli.threads,
        no_timing: cli.no_timing,
    };
    match cli.command {
        Command::Replay(a) => {
            let manifest = RunManifest::load(&a.manifest)?;
            let mut command = manifest.command;
            if let Some(out) = a.out {
                command.redirect(absolute(&out)?);
            }
            let opts = RunOptions {
                no_timing: manifest.no_timing,
                ..opts
            };
            command.execute(opts, stdout)
        }
        other => resolve(other)?.execute(opts, stdout),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Results go to stdout, diagnostics to stderr.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();

    let threads = cli.threads;
    let run = move || {
        let stdout = std::io::stdout();
        let mut lock = stdout.lock();
        dispatch(cli, &mut lock)
    };
    let result = match threads {
        Some(0) => Err(Error::Argument("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Argument(format!("cannot start {n} threads: {e}")))
            .and_then(|pool| pool.install(run)),
        None => run(),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("caid").chain(args.iter().copied())).unwrap()
    }

    fn config_file(body: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
        f.write_all(body.as_bytes()).unwrap();
        f
    }

    #[test]
    fn empty_config_gives_defaults() {
        let f = config_file("");
        let c = load_config(f.path()).unwrap();
        assert_eq!(c, SolverConfig::default());
        assert_eq!((c.population, c.elite, c.gap_bound, c.max_generations, c.subset_size), (512, 32, 10, 5000, 8));
        assert_eq!(c.flip_probability, 0.01);
    }

    #[test]
    fn flags_override_file() {
        let f = config_file("population = 64\nelite = 4\n");
        let path = f.path().to_str().unwrap();
        let cli = parse(&["identify", "-i", "obs.txt", "--config", path, "--population", "128"]);
        let Command::Identify(a) = cli.command else { panic!() };
        let Ok(ResolvedCommand::Identify { solver, .. }) = resolve(Command::Identify(a)) else { panic!() };
        assert_eq!(solver.population, 128);
        assert_eq!(solver.elite, 4);
        assert_eq!(solver.gap_bound, 10);
    }

    #[test]
    fn typo_in_config_is_a_usage_error() {
        let f = config_file("populaton = 64\n");
        let err = load_config(f.path()).unwrap_err();
        assert!(err.to_string().contains("populaton"), "{err}");
        assert_eq!(exit_code(&err), 1);
        let f = config_file("population = \"many\"\n");
        assert_eq!(exit_code(&load_config(f.path()).unwrap_err()), 1);
    }

    #[test]
    fn sweep_config_nests_solver() {
        let f = config_file("rule = 150\npi = 100\n[solver]\npopulation = 64\nelite = 8\n");
        let c = load_sweep_config(f.path()).unwrap();
        assert_eq!((c.rule, c.pi, c.solver.population, c.solver.elite), (150, 100, 64, 8));
        assert_eq!(c.rows, 69);
    }

    #[test]
    fn rule_file_alias() {
        let cli = parse(&["identify", "--rule-file", "obs.txt", "--radius", "2", "--seed", "7"]);
        let Command::Identify(a) = cli.command else { panic!() };
        assert_eq!(a.input, PathBuf::from("obs.txt"));
        assert_eq!(a.solver.seed, Some(7));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(main(["caid", "--version"]), 0);
        assert_eq!(main(["caid", "frobnicate"]), 1);
        assert_eq!(main(["caid", "oracle", "--radius", "2"]), 3);
        assert_eq!(main(["caid", "oracle", "--radius", "1"]), 1);
        assert_eq!(main(["caid", "eval", "-i", "/nonexistent/obs.txt", "--rule", "90"]), 2);
        assert_eq!(main(["caid", "gen", "--rule", "256"]), 1);
    }
}
