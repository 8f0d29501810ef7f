//! Fully resolved commands and the manifests recording them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ca::{LookupTable, RuleNumber};
use crate::error::{Error, Result};
use crate::error_measures::{min_error_exact, min_error_set, ErrorEstimate};
use crate::experiment::{self, SweepConfig};
use crate::ga::{self, HaltReason, RunReport, SolverConfig};
use crate::observation::{self, Metadata, ObservationFile};
use crate::oracle::{self, OracleBudget};
use crate::seed;

const ROLE_GEN: u64 = 0x20;
const ROLE_DEGRADE: u64 = 0x21;

/// Observation file encoding.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Json,
}

impl Format {
    pub fn for_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Text,
        }
    }

    fn extension(self) -> &'static str {
        match self {
            Format::Text => "txt",
            Format::Json => "json",
        }
    }

    fn render(self, file: &ObservationFile) -> String {
        match self {
            Format::Text => observation::to_text(&file.set),
            Format::Json => observation::to_json(&file.set, &file.metadata),
        }
    }
}

/// How `eval` minimises the error.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum EvalMode {
    Exact { budget: u64 },
    Sampled { seed: u64, resamples: u32 },
}

/// A subcommand with every default materialised.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResolvedCommand {
    Gen {
        rule: RuleNumber,
        rule_radius: u32,
        observations: usize,
        rows: usize,
        cols: usize,
        gap_bound: u32,
        seed: u64,
        format: Format,
        out: Option<PathBuf>,
    },
    Degrade {
        input: PathBuf,
        pi: u64,
        k_max: u32,
        seed: u64,
        format: Format,
        out_dir: PathBuf,
    },
    Identify {
        input: PathBuf,
        solver: SolverConfig,
        out: Option<PathBuf>,
        csv: Option<PathBuf>,
    },
    Eval {
        input: PathBuf,
        rule: LookupTable,
        gap_bound: u32,
        #[serde(flatten)]
        mode: EvalMode,
        out: Option<PathBuf>,
    },
    Sweep {
        config: SweepConfig,
        out_dir: PathBuf,
    },
    Oracle {
        input: PathBuf,
        radius: u32,
        gap_bound: u32,
        rule: Option<RuleNumber>,
        budget: OracleBudget,
        out: Option<PathBuf>,
    },
}

/// Written next to every file a subcommand produces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub no_timing: bool,
    pub command: ResolvedCommand,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::parse(Some(e.line()).filter(|&l| l > 0), e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifests always serialize");
        s.push('\n');
        s
    }
}

/// Settings that affect how a command runs but not what it computes.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub threads: Option<usize>,
    pub no_timing: bool,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Reads an observation file, detecting JSON by extension or a leading `{`.
pub fn read_observations(path: &Path) -> Result<ObservationFile> {
    let text = fs::read_to_string(path)?;
    if Format::for_path(path) == Format::Json || text.trim_start().starts_with('{') {
        observation::parse_json(&text)
    } else {
        Ok(ObservationFile {
            set: observation::parse_text(&text)?,
            metadata: Metadata::default(),
        })
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn sibling_manifest(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

/// Report without the per-generation history, as printed by `identify`.
#[derive(Serialize)]
struct ReportSummary<'a> {
    best_rule: &'a LookupTable,
    best_rule_number: Option<RuleNumber>,
    best_full_fitness: u64,
    max_fitness: u64,
    generations: u32,
    halt_reason: HaltReason,
    seed: u64,
    wall_time_ms: u64,
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports always serialize");
    s.push('\n');
    s
}

fn render_estimate(est: &ErrorEstimate) -> String {
    let mut s = format!("error: {}\nexact: {}\n", est.value, est.exact);
    for (i, g) in est.chosen_gaps.iter().enumerate() {
        s.push_str(&format!("observation {i} gaps: {g}\n"));
    }
    s
}

impl ResolvedCommand {
    /// Primary seed, if the command has one.
    pub fn seed(&self) -> Option<u64> {
        match self {
            ResolvedCommand::Gen { seed, .. } | ResolvedCommand::Degrade { seed, .. } => Some(*seed),
            ResolvedCommand::Identify { solver, .. } => Some(solver.seed),
            ResolvedCommand::Eval { mode: EvalMode::Sampled { seed, .. }, .. } => Some(*seed),
            ResolvedCommand::Sweep { config, .. } => Some(config.seed),
            _ => None,
        }
    }

    /// Where the manifest goes, or `None` when everything went to stdout.
    pub fn manifest_path(&self) -> Option<PathBuf> {
        match self {
            ResolvedCommand::Degrade { out_dir, .. } | ResolvedCommand::Sweep { out_dir, .. } => {
                Some(out_dir.join("manifest.json"))
            }
            ResolvedCommand::Identify { out, csv, .. } => out.as_ref().or(csv.as_ref()).map(|p| sibling_manifest(p)),
            ResolvedCommand::Gen { out, .. }
            | ResolvedCommand::Eval { out, .. }
            | ResolvedCommand::Oracle { out, .. } => out.as_ref().map(|p| sibling_manifest(p)),
        }
    }

    /// Redirects the primary output to `target` (a file, or a directory for
    /// `degrade` and `sweep`). The history CSV of `identify` moves next to it.
    pub fn redirect(&mut self, target: PathBuf) {
        match self {
            ResolvedCommand::Degrade { out_dir, .. } | ResolvedCommand::Sweep { out_dir, .. } => *out_dir = target,
            ResolvedCommand::Identify { out, csv, .. } => {
                if csv.is_some() {
                    let mut name = target.file_name().unwrap_or_default().to_os_string();
                    name.push(".history.csv");
                    *csv = Some(target.with_file_name(name));
                }
                *out = Some(target);
            }
            ResolvedCommand::Gen { out, .. }
            | ResolvedCommand::Eval { out, .. }
            | ResolvedCommand::Oracle { out, .. } => *out = Some(target),
        }
    }

    /// Runs the command, writes its outputs and, when anything was written
    /// to disk, the manifest.
    pub fn execute(&self, opts: RunOptions, stdout: &mut dyn Write) -> Result<()> {
        let started = now();
        self.run(opts, stdout)?;
        if let Some(path) = self.manifest_path() {
            let manifest = RunManifest {
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                started,
                finished: now(),
                seed: self.seed(),
                threads: opts.threads,
                no_timing: opts.no_timing,
                command: self.clone(),
            };
            write_file(&path, manifest.to_json().as_bytes())?;
        }
        Ok(())
    }

    fn run(&self, opts: RunOptions, stdout: &mut dyn Write) -> Result<()> {
        match self {
            ResolvedCommand::Gen {
                rule,
                rule_radius,
                observations,
                rows,
                cols,
                gap_bound,
                seed,
                format,
                out,
            } => {
                let lut = LookupTable::from_number(*rule, *rule_radius)?;
                let mut rng = seed::stream(*seed, &[ROLE_GEN]);
                let set = experiment::generate_set(&lut, *observations, *rows, *cols, *gap_bound, &mut rng)?;
                let file = ObservationFile {
                    set,
                    metadata: Metadata {
                        rule: Some(*rule),
                        radius: Some(*rule_radius),
                        gap_bound: Some(*gap_bound),
                        seed: Some(*seed),
                        k: None,
                    },
                };
                emit(out.as_deref(), format.render(&file).as_bytes(), stdout)
            }
            ResolvedCommand::Degrade {
                input,
                pi,
                k_max,
                seed,
                format,
                out_dir,
            } => {
                let file = read_observations(input)?;
                let mut rng = seed::stream(*seed, &[ROLE_DEGRADE]);
                let series = experiment::degrade_series(&file.set, *pi, *k_max, &mut rng)?;
                fs::create_dir_all(out_dir)?;
                for (k, set) in series.into_iter().enumerate() {
                    let level = ObservationFile {
                        set,
                        metadata: Metadata {
                            seed: Some(*seed),
                            k: Some(k as u32),
                            ..file.metadata.clone()
                        },
                    };
                    let path = out_dir.join(format!("k{k:03}.{}", format.extension()));
                    write_file(&path, format.render(&level).as_bytes())?;
                }
                Ok(())
            }
            ResolvedCommand::Identify { input, solver, out, csv } => {
                let file = read_observations(input)?;
                let mut report: RunReport = ga::run(&file.set, solver)?;
                if opts.no_timing {
                    report.wall_time_ms = 0;
                }
                log::info!(
                    "{} after {} generations, best rule {}",
                    report.halt_reason,
                    report.generations,
                    ga::rule_label(&report.best_rule)
                );
                let summary = ReportSummary {
                    best_rule: &report.best_rule,
                    best_rule_number: report.best_rule_number,
                    best_full_fitness: report.best_full_fitness,
                    max_fitness: report.max_fitness,
                    generations: report.generations,
                    halt_reason: report.halt_reason,
                    seed: report.seed,
                    wall_time_ms: report.wall_time_ms,
                };
                stdout.write_all(pretty(&summary).as_bytes())?;
                if let Some(path) = out {
                    write_file(path, pretty(&report).as_bytes())?;
                }
                if let Some(path) = csv {
                    let mut buf = Vec::new();
                    report.write_history_csv(&mut buf)?;
                    write_file(path, &buf)?;
                }
                Ok(())
            }
            ResolvedCommand::Eval {
                input,
                rule,
                gap_bound,
                mode,
                out,
            } => {
                let file = read_observations(input)?;
                let estimate = match mode {
                    EvalMode::Exact { budget } => {
                        let mut total = ErrorEstimate {
                            value: 0,
                            chosen_gaps: Vec::new(),
                            exact: true,
                        };
                        for obs in &file.set {
                            let e = min_error_exact(rule, obs, *gap_bound, *budget)?;
                            total.value += e.value;
                            total.chosen_gaps.extend(e.chosen_gaps);
                        }
                        total
                    }
                    EvalMode::Sampled { seed, resamples } => {
                        min_error_set(rule, &file.set, *gap_bound, *seed, *resamples)?
                    }
                };
                emit(out.as_deref(), render_estimate(&estimate).as_bytes(), stdout)
            }
            ResolvedCommand::Sweep { config, out_dir } => {
                let mut result = experiment::sweep_with_progress(config, |r| {
                    log::info!(
                        "k={} rep={} solved={} generations={} rule={}",
                        r.k,
                        r.rep,
                        r.solved,
                        r.generations,
                        r.best_rule
                    )
                })?;
                if opts.no_timing {
                    result.runs.iter_mut().for_each(|r| r.wall_ms = 0);
                }
                fs::create_dir_all(out_dir)?;
                let mut runs = Vec::new();
                result.write_runs_csv(&mut runs)?;
                write_file(&out_dir.join("runs.csv"), &runs)?;
                let mut summary = Vec::new();
                result.write_summary_csv(&mut summary)?;
                write_file(&out_dir.join("summary.csv"), &summary)?;
                stdout.write_all(&summary)?;
                Ok(())
            }
            ResolvedCommand::Oracle {
                input,
                radius,
                gap_bound,
                rule,
                budget,
                out,
            } => {
                if rule.is_none() {
                    check_rule_space(*radius, budget)?;
                }
                let file = read_observations(input)?;
                let text = match rule {
                    Some(n) => {
                        let lut = LookupTable::from_number(*n, *radius)?;
                        format!("{}\n", oracle::verify_fit(&lut, &file.set, *gap_bound, budget)?)
                    }
                    None => oracle::enumerate_fitting_rules(&file.set, *radius, *gap_bound, budget)?
                        .iter()
                        .map(|n| format!("{n}\n"))
                        .collect(),
                };
                emit(out.as_deref(), text.as_bytes(), stdout)
            }
        }
    }
}

/// Fails with a capacity error when radius `r` has more rules than the
/// budget allows.
pub fn check_rule_space(radius: u32, budget: &OracleBudget) -> Result<()> {
    let table = LookupTable::zeros(radius)?.len();
    if table >= 64 || (1u64 << table) > budget.max_rules {
        return Err(Error::Capacity(format!(
            "radius {radius} has 2^{table} rules, above the budget of {}",
            budget.max_rules
        )));
    }
    Ok(())
}

fn emit(out: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(path) => write_file(path, bytes),
        None => {
            stdout.write_all(bytes)?;
            Ok(())
        }
    }
}
