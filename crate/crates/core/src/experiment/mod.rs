//! Seeded run matrices: spec parsing, parallel execution and CSV output.

mod summary;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::environments::{CorridorParams, EnvConfig, EnvKind};
use crate::error::{Error, Result};
use crate::trainer::{self, Mode, RunMetrics, TrainConfig};

pub use summary::{
    aggregate, compare_report, median, parse_summary, read_summary, summary_csv, Comparison, ComparisonRow,
    ModeAggregate, SummaryRow, SUMMARY_HEADER,
};

pub const SUMMARY_FILE: &str = "summary.csv";

/// Base settings a spec starts from before its own overrides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    Paper,
}

impl Preset {
    pub fn config(self) -> TrainConfig {
        match self {
            Preset::Desk => TrainConfig::desk(),
            Preset::Paper => TrainConfig::paper(),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            _ => Err(Error::config(format!("unknown preset `{s}` (expected desk or paper)"))),
        }
    }
}

/// A fully resolved run matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub env: EnvConfig,
    pub modes: Vec<Mode>,
    pub seeds: Vec<u64>,
    /// Shared settings; `mode` and `seed` are filled in per run.
    pub config: TrainConfig,
    /// 100-episode mean return that counts as solved.
    pub threshold: f64,
    pub out: Option<PathBuf>,
}

/// Solved level used when a spec does not set `threshold`.
pub fn default_threshold(kind: EnvKind) -> f64 {
    match kind {
        EnvKind::CartPole => 150.0,
        EnvKind::ForkedCorridor => 30.0,
        EnvKind::Chain => 0.9,
    }
}

const CORRIDOR_KEYS: [&str; 5] = ["d_left", "len_right", "r_step_right", "r_step_left", "r_treasure"];
const CHAIN_KEYS: [&str; 2] = ["n_states", "max_steps"];

struct Line<'a> {
    number: usize,
    key: &'a str,
    value: &'a str,
}

fn parse_value<T: FromStr>(line: &Line) -> Result<T> {
    line.value
        .parse()
        .map_err(|_| Error::config_at(line.number, format!("invalid value `{}` for key `{}`", line.value, line.key)))
}

fn at_line(number: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::Config { line: None, message } => Error::config_at(number, message),
        other => other,
    }
}

fn parse_list<T: FromStr>(line: &Line) -> Result<Vec<T>> {
    let items: Vec<T> = line
        .value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| {
            item.parse().map_err(|_| {
                Error::config_at(line.number, format!("invalid item `{item}` in `{}`", line.key))
            })
        })
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::config_at(line.number, format!("`{}` needs at least one entry", line.key)));
    }
    Ok(items)
}

/// Seeds as `1,2,3` or a half-open range `0..5`.
fn parse_seeds(line: &Line) -> Result<Vec<u64>> {
    if let Some((lo, hi)) = line.value.split_once("..") {
        let bound = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| Error::config_at(line.number, format!("invalid seed range `{}`", line.value)))
        };
        let (lo, hi) = (bound(lo)?, bound(hi)?);
        if lo >= hi {
            return Err(Error::config_at(line.number, format!("empty seed range `{}`", line.value)));
        }
        return Ok((lo..hi).collect());
    }
    parse_list(line)
}

/// Parses flat `key=value` text. Blank lines and `#` comments are ignored.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec> {
    let mut lines = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed
            .split_once('=')
            .ok_or_else(|| Error::config_at(number, format!("expected key=value, found `{trimmed}`")))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key) {
            return Err(Error::config_at(number, format!("duplicate key `{key}`")));
        }
        lines.push(Line { number, key, value });
    }
    let find = |key: &str| lines.iter().find(|l| l.key == key);

    let env_line = find("env").ok_or_else(|| Error::config("missing required key `env`"))?;
    let kind: EnvKind = env_line.value.parse().map_err(at_line(env_line.number))?;
    let preset = match find("preset") {
        Some(line) => line.value.parse::<Preset>().map_err(at_line(line.number))?,
        None => Preset::Desk,
    };

    let mut spec = ExperimentSpec {
        config: preset.config().for_env(kind),
        ..ExperimentSpec::new(kind)
    };

    for line in &lines {
        match line.key {
            "env" | "preset" => {}
            "modes" => spec.modes = parse_list(line)?,
            "seeds" => spec.seeds = parse_seeds(line)?,
            "threshold" => spec.threshold = parse_value(line)?,
            "out" => spec.out = Some(PathBuf::from(line.value)),
            key if CORRIDOR_KEYS.contains(&key) || CHAIN_KEYS.contains(&key) => set_env_param(&mut spec.env, line)?,
            "mode" | "seed" => {
                return Err(Error::config_at(
                    line.number,
                    format!("`{}` is set per run; use `{}s`", line.key, line.key),
                ))
            }
            key => {
                if !spec.config.set(key, line.value).map_err(at_line(line.number))? {
                    return Err(Error::config_at(line.number, format!("unknown key `{key}`")));
                }
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn set_env_param(env: &mut EnvConfig, line: &Line) -> Result<()> {
    let name = env_name(env);
    let misplaced = || {
        Error::config_at(
            line.number,
            format!("key `{}` does not apply to environment `{name}`", line.key),
        )
    };
    match env {
        EnvConfig::ForkedCorridor(p) => match line.key {
            "d_left" => p.d_left = parse_value(line)?,
            "len_right" => p.len_right = parse_value(line)?,
            "r_step_right" => p.r_step_right = parse_value(line)?,
            "r_step_left" => p.r_step_left = parse_value(line)?,
            "r_treasure" => p.r_treasure = parse_value(line)?,
            _ => return Err(misplaced()),
        },
        EnvConfig::Chain { n_states, max_steps } => match line.key {
            "n_states" => *n_states = parse_value(line)?,
            "max_steps" => *max_steps = parse_value(line)?,
            _ => return Err(misplaced()),
        },
        EnvConfig::CartPole => return Err(misplaced()),
    }
    Ok(())
}

fn env_name(env: &EnvConfig) -> &'static str {
    env.kind().as_str()
}

impl ExperimentSpec {
    /// Default matrix for `kind`: all three replay modes on seed 0.
    pub fn new(kind: EnvKind) -> Self {
        Self {
            env: EnvConfig::default_for(kind),
            modes: vec![Mode::Uniform, Mode::Per, Mode::Dpsr],
            seeds: vec![0],
            config: TrainConfig::desk().for_env(kind),
            threshold: default_threshold(kind),
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() || self.seeds.is_empty() {
            return Err(Error::config("modes and seeds must be non-empty"));
        }
        if !self.threshold.is_finite() {
            return Err(Error::config(format!("threshold must be finite, got {}", self.threshold)));
        }
        match &self.env {
            EnvConfig::ForkedCorridor(p) if p.d_left == 0 || p.len_right == 0 => {
                return Err(Error::config("corridor branches need length >= 1"))
            }
            EnvConfig::Chain { n_states, max_steps } if *n_states == 0 || *max_steps == 0 => {
                return Err(Error::config("chain needs n_states >= 1 and max_steps >= 1"))
            }
            _ => {}
        }
        for &mode in &self.modes {
            self.run_config(mode, 0).validate()?;
        }
        Ok(())
    }

    pub fn run_config(&self, mode: Mode, seed: u64) -> TrainConfig {
        TrainConfig {
            mode,
            seed,
            ..self.config.clone()
        }
    }

    /// All `(mode, seed)` pairs, modes outermost.
    pub fn runs(&self) -> Vec<(Mode, u64)> {
        self.modes
            .iter()
            .flat_map(|&m| self.seeds.iter().map(move |&s| (m, s)))
            .collect()
    }

    /// Fully resolved text form; [`parse_spec`] reads it back unchanged.
    pub fn to_text(&self) -> String {
        let join = |items: Vec<String>| items.join(",");
        let mut out = String::new();
        let _ = writeln!(out, "env={}", env_name(&self.env));
        let _ = writeln!(out, "modes={}", join(self.modes.iter().map(|m| m.to_string()).collect()));
        let _ = writeln!(out, "seeds={}", join(self.seeds.iter().map(|s| s.to_string()).collect()));
        let _ = writeln!(out, "threshold={}", self.threshold);
        if let Some(dir) = &self.out {
            let _ = writeln!(out, "out={}", dir.display());
        }
        match &self.env {
            EnvConfig::ForkedCorridor(CorridorParams {
                d_left,
                len_right,
                r_step_right,
                r_step_left,
                r_treasure,
            }) => {
                let _ = writeln!(out, "d_left={d_left}\nlen_right={len_right}");
                let _ = writeln!(out, "r_step_right={r_step_right}\nr_step_left={r_step_left}");
                let _ = writeln!(out, "r_treasure={r_treasure}");
            }
            EnvConfig::Chain { n_states, max_steps } => {
                let _ = writeln!(out, "n_states={n_states}\nmax_steps={max_steps}");
            }
            EnvConfig::CartPole => {}
        }
        for (key, value) in self.config.entries() {
            let _ = writeln!(out, "{key}={value}");
        }
        out
    }
}

/// File stem shared by a run's curve and echo files.
pub fn run_stem(mode: Mode, seed: u64) -> String {
    format!("{mode}_seed{seed}")
}

/// Runs every `(mode, seed)` pair on up to `jobs` threads (0 picks the core
/// count). Each run writes `<stem>.curve.csv` and `<stem>.run.txt` into
/// `out`; `summary.csv` is written once all runs finish.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path, jobs: usize) -> Result<Vec<SummaryRow>> {
    spec.validate()?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::State(format!("cannot start worker pool: {e}")))?;
    let runs = spec.runs();
    let rows = pool.install(|| {
        runs.par_iter()
            .map(|&(mode, seed)| run_one(spec, mode, seed, out))
            .collect::<Result<Vec<_>>>()
    })?;
    write_file(&out.join(SUMMARY_FILE), &summary_csv(&rows))?;
    Ok(rows)
}

fn run_one(spec: &ExperimentSpec, mode: Mode, seed: u64, out: &Path) -> Result<SummaryRow> {
    let config = spec.run_config(mode, seed);
    log::info!("starting {} on {}", run_stem(mode, seed), env_name(&spec.env));
    let metrics = trainer::run(&config, &spec.env)?;
    let row = SummaryRow::from_metrics(mode, seed, &metrics, spec.threshold);
    let stem = run_stem(mode, seed);
    write_file(&out.join(format!("{stem}.curve.csv")), &metrics.curve_csv())?;
    write_file(&out.join(format!("{stem}.run.txt")), &run_echo(spec, mode, seed, &metrics, &row))?;
    Ok(row)
}

/// Single-run spec that reproduces the run, followed by its headline metrics
/// as comments.
fn run_echo(spec: &ExperimentSpec, mode: Mode, seed: u64, metrics: &RunMetrics, row: &SummaryRow) -> String {
    let single = ExperimentSpec {
        modes: vec![mode],
        seeds: vec![seed],
        out: None,
        ..spec.clone()
    };
    let mut text = single.to_text();
    let opt = |v: Option<String>| v.unwrap_or_else(|| "none".into());
    let _ = writeln!(text, "# final_eval: {}", opt(row.final_eval.map(|v| v.to_string())));
    let _ = writeln!(text, "# best_mean100: {}", opt(row.best_mean100.map(|v| v.to_string())));
    let _ = writeln!(
        text,
        "# steps_to_threshold: {}",
        opt(row.steps_to_threshold.map(|v| v.to_string()))
    );
    let _ = writeln!(text, "# episodes: {}", metrics.episodes.len());
    let _ = writeln!(text, "# train_steps: {}", metrics.train_steps);
    let r = metrics.recycle;
    let _ = writeln!(
        text,
        "# recycle: stages={} recycled={} skipped={} fallbacks={}",
        r.stages, r.recycled, r.skipped, r.fallbacks
    );
    text
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
