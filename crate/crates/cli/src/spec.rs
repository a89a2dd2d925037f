use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use reset_ruin::montecarlo::{DEFAULT_SEED, DEFAULT_TRAJECTORIES};

/// Bad flags or config file contents. Exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(
    name = "reset-ruin",
    version,
    about = "Ruin probabilities of a biased random walk with geometric resetting"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Ruin probability from the linear solve.
    Exact,
    /// Ruin probability from the spectral closed form.
    Spectral,
    /// Monte Carlo estimate of the ruin probability.
    Mc,
    /// Theory and Monte Carlo for every site and reset rate.
    Table,
    /// Reset derivative dq/dgamma at each site.
    Derivative,
    /// Sign change of the reset derivative.
    Critical,
    /// Ruin probability across all sites, boundaries included.
    Sweep,
    /// Cross-check all routes and report the worst deviations.
    Validate,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Preset {
    /// a=5, p=0.6, gamma in {0.3, 0.6, 0.9}
    #[value(name = "paper-table-1")]
    #[serde(rename = "paper-table-1")]
    Table1,
    /// a=5, p=0.5, gamma in {0.3, 0.6, 0.9}
    #[value(name = "paper-table-2")]
    #[serde(rename = "paper-table-2")]
    Table2,
    /// a=5, p=0.6, gamma in {0, 0.3, 0.6, 0.9}
    #[value(name = "paper-fig-2")]
    #[serde(rename = "paper-fig-2")]
    Fig2,
    /// a=5, p=0.5, gamma in {0, 0.3, 0.6, 0.9}
    #[value(name = "paper-fig-3")]
    #[serde(rename = "paper-fig-3")]
    Fig3,
    /// a=10, derivative series
    #[value(name = "paper-fig-4")]
    #[serde(rename = "paper-fig-4")]
    Fig4,
    /// a=11, derivative series
    #[value(name = "paper-fig-5")]
    #[serde(rename = "paper-fig-5")]
    Fig5,
}

impl Preset {
    fn domain(self) -> usize {
        match self {
            Preset::Fig4 => 10,
            Preset::Fig5 => 11,
            _ => 5,
        }
    }

    fn bias(self) -> Option<f64> {
        match self {
            Preset::Table1 | Preset::Fig2 => Some(0.6),
            Preset::Table2 | Preset::Fig3 => Some(0.5),
            Preset::Fig4 | Preset::Fig5 => None,
        }
    }

    fn gammas(self) -> Vec<f64> {
        match self {
            Preset::Table1 | Preset::Table2 => vec![0.3, 0.6, 0.9],
            Preset::Fig2 | Preset::Fig3 => vec![0.0, 0.3, 0.6, 0.9],
            Preset::Fig4 | Preset::Fig5 => Vec::new(),
        }
    }

    /// `(p, gamma)` pairs plotted for the derivative figures.
    pub fn series(self) -> Option<Vec<(f64, f64)>> {
        matches!(self, Preset::Fig4 | Preset::Fig5)
            .then(|| vec![(0.5, 0.3), (0.5, 0.6), (0.5, 0.9), (0.4, 0.3), (0.6, 0.3)])
    }
}

#[derive(Args, Debug, Default, Clone)]
pub struct Opts {
    /// Domain size; the walk lives on {0, ..., a}.
    #[arg(long, global = true)]
    pub a: Option<usize>,

    /// Start and reset site. Omit to scan every interior site.
    #[arg(long, global = true)]
    pub z: Option<usize>,

    /// Probability of a step to the right.
    #[arg(long, global = true)]
    pub p: Option<f64>,

    /// Reset probability per step.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,

    /// Comma-separated reset probabilities, overriding --gamma.
    #[arg(long, global = true, value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,

    /// Comma-separated step probabilities, overriding --p.
    #[arg(long, global = true, value_delimiter = ',')]
    pub ps: Option<Vec<f64>>,

    /// Monte Carlo trajectories per estimate.
    #[arg(long = "n-sim", global = true)]
    pub n_sim: Option<u64>,

    /// Monte Carlo seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,

    /// Write output here (atomically) instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Flat key=value file with defaults for any of the flags above.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

impl Opts {
    /// Fields set here win; the rest come from `fallback`.
    fn or(self, fallback: Opts) -> Opts {
        Opts {
            a: self.a.or(fallback.a),
            z: self.z.or(fallback.z),
            p: self.p.or(fallback.p),
            gamma: self.gamma.or(fallback.gamma),
            gammas: self.gammas.or(fallback.gammas),
            ps: self.ps.or(fallback.ps),
            n_sim: self.n_sim.or(fallback.n_sim),
            seed: self.seed.or(fallback.seed),
            format: self.format.or(fallback.format),
            preset: self.preset.or(fallback.preset),
            out: self.out.or(fallback.out),
            config: None,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| usage(format!("config key {key}: cannot parse {value:?}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T> {
    T::from_str(value, true).map_err(|_| usage(format!("config key {key}: unknown value {value:?}")))
}

pub fn parse_config(text: &str) -> Result<Opts> {
    let mut opts = Opts::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected key=value", n + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "a" => opts.a = Some(parse_value(&key, value)?),
            "z" => opts.z = Some(parse_value(&key, value)?),
            "p" => opts.p = Some(parse_value(&key, value)?),
            "gamma" => opts.gamma = Some(parse_value(&key, value)?),
            "gammas" => opts.gammas = Some(parse_list(&key, value)?),
            "ps" => opts.ps = Some(parse_list(&key, value)?),
            "n-sim" => opts.n_sim = Some(parse_value(&key, value)?),
            "seed" => opts.seed = Some(parse_value(&key, value)?),
            "format" => opts.format = Some(parse_enum(&key, value)?),
            "preset" => opts.preset = Some(parse_enum(&key, value)?),
            "out" => opts.out = Some(PathBuf::from(value)),
            _ => return Err(usage(format!("config line {}: unknown key {key:?}", n + 1))),
        }
    }
    Ok(opts)
}

fn read_config(path: &Path) -> Result<Opts> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config file {}", path.display()))
        .map_err(|e| usage(format!("{e:#}")))?;
    parse_config(&text)
}

/// A fully resolved invocation.
#[derive(Debug, Clone, Serialize)]
pub struct RunSpec {
    pub command: Command,
    pub preset: Option<Preset>,
    pub a: Option<usize>,
    pub z: Option<usize>,
    pub p: Option<f64>,
    pub gamma: Option<f64>,
    pub gammas: Vec<f64>,
    pub ps: Vec<f64>,
    pub n_sim: u64,
    pub seed: u64,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl RunSpec {
    /// Flags override the config file, which overrides preset defaults.
    pub fn resolve(command: Command, flags: Opts) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => read_config(path)?,
            None => Opts::default(),
        };
        let o = flags.or(file);
        let preset = o.preset;
        let gammas = match (o.gammas, o.gamma) {
            (Some(g), _) => g,
            (None, Some(_)) => Vec::new(),
            (None, None) => preset.map(Preset::gammas).unwrap_or_default(),
        };
        let p = o.p.or_else(|| if o.ps.is_none() { preset.and_then(Preset::bias) } else { None });
        let spec = RunSpec {
            command,
            preset,
            a: o.a.or(preset.map(Preset::domain)),
            z: o.z,
            p,
            gamma: o.gamma,
            gammas,
            ps: o.ps.unwrap_or_default(),
            n_sim: o.n_sim.unwrap_or(DEFAULT_TRAJECTORIES),
            seed: o.seed.unwrap_or(DEFAULT_SEED),
            format: o.format.unwrap_or(if command == Command::Critical { Format::Json } else { Format::Csv }),
            out: o.out,
        };
        if spec.n_sim == 0 {
            return Err(usage("--n-sim must be at least 1"));
        }
        Ok(spec)
    }

    pub fn need_a(&self) -> Result<usize> {
        self.a.ok_or_else(|| usage(format!("--a is required for {:?}", self.command).to_lowercase()))
    }

    /// `--gammas`, else `--gamma`, else `default`; `None` default means required.
    pub fn gamma_grid(&self, default: Option<&[f64]>) -> Result<Vec<f64>> {
        if !self.gammas.is_empty() {
            return Ok(self.gammas.clone());
        }
        if let Some(g) = self.gamma {
            return Ok(vec![g]);
        }
        default
            .map(<[f64]>::to_vec)
            .ok_or_else(|| usage("--gamma or --gammas is required"))
    }

    pub fn p_grid(&self, default: Option<&[f64]>) -> Result<Vec<f64>> {
        if !self.ps.is_empty() {
            return Ok(self.ps.clone());
        }
        if let Some(p) = self.p {
            return Ok(vec![p]);
        }
        default.map(<[f64]>::to_vec).ok_or_else(|| usage("--p or --ps is required"))
    }

    /// The given start site, or every interior site.
    pub fn sites(&self, a: usize) -> Vec<usize> {
        match self.z {
            Some(z) => vec![z],
            None => (1..a).collect(),
        }
    }
}
