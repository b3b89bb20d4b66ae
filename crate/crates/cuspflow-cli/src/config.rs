//! Run configuration: command-line flags over an optional `key = value` file
//! over the output-directory environment variable over defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::CliError;

/// The only environment variable consulted.
pub const OUT_DIR_ENV: &str = "CUSPFLOW_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "cuspflow", version = env!("CUSPFLOW_VERSION"), about = "Hyperbolic geometry, Eisenstein series and cusp excursions for PSL(2, Z[i])")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonFlags,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct CommonFlags {
    /// Plain-text `key = value` file; flags override its entries.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long = "out-dir", global = true)]
    pub out_dir: Option<PathBuf>,
    /// Output file name inside the output directory.
    #[arg(long, global = true)]
    pub output: Option<String>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Largest coset count an Eisenstein run may enumerate.
    #[arg(long = "max-terms", global = true)]
    pub max_terms: Option<u64>,
    /// Largest number of flow steps a simulation may take.
    #[arg(long = "max-steps", global = true)]
    pub max_steps: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact and floating-point identity suites.
    Verify {
        #[arg(long)]
        n: Option<usize>,
        /// Run only the rational-arithmetic suites.
        #[arg(long)]
        exact: bool,
    },
    /// Cross-check of C(s) from several weights.
    Eisenstein {
        #[arg(long)]
        s: Option<f64>,
        #[arg(long = "N")]
        n_bound: Option<i64>,
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<u64>>,
        #[arg(long)]
        window: Option<i64>,
        #[arg(long = "quad-points")]
        quad_points: Option<usize>,
    },
    /// Logarithm-law statistics over Haar samples.
    Loglaw {
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long = "T")]
        t_max: Option<f64>,
    },
    /// Membership rates of the D_m sets and their volumes.
    Dm {
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<u64>>,
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long = "volume-samples")]
        volume_samples: Option<usize>,
    },
    /// Cusp-distance trajectories.
    Orbit {
        #[arg(long = "T")]
        t_max: Option<f64>,
        #[arg(long)]
        stride: Option<f64>,
        #[arg(long)]
        samples: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Fully resolved configuration, serialized into every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub n: usize,
    pub exact: bool,
    pub seed: u64,
    pub s: f64,
    #[serde(rename = "N")]
    pub n_bound: i64,
    pub window: i64,
    pub quad_points: usize,
    pub m: Vec<u64>,
    pub samples: usize,
    #[serde(rename = "T")]
    pub t_max: f64,
    pub stride: f64,
    pub eps: f64,
    pub volume_samples: usize,
    pub max_terms: u64,
    pub max_steps: u64,
    /// Not serialized: worker count never changes results.
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out_dir: PathBuf,
    pub output: String,
    pub format: Format,
}

/// Keys accepted in a config file.
pub const KEYS: &[&str] = &[
    "n", "exact", "seed", "s", "N", "window", "quad-points", "m", "samples", "T", "stride", "eps",
    "volume-samples", "max-terms", "max-steps", "threads", "out-dir", "output", "format",
];

/// Parses `key = value` lines; `#` starts a comment. Underscores in keys are
/// read as dashes.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key `{}`", i + 1, k.trim())));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("config line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(out)
}

fn load_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_text(&text)
}

struct Layer<'a> {
    file: &'a BTreeMap<String, String>,
}

impl Layer<'_> {
    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }

    fn get_list(&self, key: &str) -> Result<Option<Vec<u64>>, CliError> {
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|x| x.trim().parse::<u64>())
                .collect::<Result<Vec<_>, _>>()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }

    fn get_bool(&self, key: &str) -> Result<Option<bool>, CliError> {
        match self.file.get(key).map(|v| v.to_ascii_lowercase()) {
            None => Ok(None),
            Some(v) if ["true", "yes", "1"].contains(&v.as_str()) => Ok(Some(true)),
            Some(v) if ["false", "no", "0"].contains(&v.as_str()) => Ok(Some(false)),
            Some(v) => Err(CliError::Usage(format!("config key `{key}`: cannot parse `{v}`"))),
        }
    }

    fn get_format(&self) -> Result<Option<Format>, CliError> {
        match self.file.get("format") {
            None => Ok(None),
            Some(v) => Format::from_str(v, true)
                .map(Some)
                .map_err(|_| CliError::Usage(format!("config key `format`: cannot parse `{v}`"))),
        }
    }
}

fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

impl RunConfig {
    /// Merges flags, config file and defaults. `env_out_dir` is the value of
    /// [`OUT_DIR_ENV`], passed in so resolution stays a pure function.
    pub fn resolve(cli: &Cli, env_out_dir: Option<PathBuf>) -> Result<Self, CliError> {
        let file = match &cli.common.config {
            Some(p) => load_file(p)?,
            None => BTreeMap::new(),
        };
        let f = Layer { file: &file };
        let c = &cli.common;
        let command = match &cli.command {
            Command::Verify { .. } => "verify",
            Command::Eisenstein { .. } => "eisenstein",
            Command::Loglaw { .. } => "loglaw",
            Command::Dm { .. } => "dm",
            Command::Orbit { .. } => "orbit",
        };
        let format = pick(c.format, f.get_format()?, if command == "orbit" { Format::Csv } else { Format::Json });
        let ext = match format {
            Format::Json => "json",
            Format::Csv => "csv",
        };
        let mut cfg = RunConfig {
            command: command.to_string(),
            n: f.get("n")?.unwrap_or(3),
            exact: f.get_bool("exact")?.unwrap_or(false),
            seed: pick(c.seed, f.get("seed")?, 1),
            s: f.get("s")?.unwrap_or(2.5),
            n_bound: f.get("N")?.unwrap_or(190),
            window: f.get("window")?.unwrap_or(8),
            quad_points: f.get("quad-points")?.unwrap_or(64),
            m: f.get_list("m")?.unwrap_or_else(|| {
                if command == "dm" {
                    vec![10, 20, 40, 80]
                } else {
                    vec![0, 1, 2]
                }
            }),
            samples: f.get("samples")?.unwrap_or(match command {
                "dm" => 4000,
                "orbit" => 1,
                _ => 200,
            }),
            t_max: f.get("T")?.unwrap_or(if command == "orbit" { 1000.0 } else { 1e5 }),
            stride: f.get("stride")?.unwrap_or(1.0),
            eps: f.get("eps")?.unwrap_or(0.1),
            volume_samples: f.get("volume-samples")?.unwrap_or(200_000),
            max_terms: pick(c.max_terms, f.get("max-terms")?, 1_000_000),
            max_steps: pick(c.max_steps, f.get("max-steps")?, 2_000_000_000),
            threads: c.threads.or(f.get("threads")?),
            out_dir: c
                .out_dir
                .clone()
                .or(f.get::<PathBuf>("out-dir")?)
                .or(env_out_dir)
                .unwrap_or_else(|| PathBuf::from(".")),
            output: pick(c.output.clone(), f.get("output")?, format!("{command}.{ext}")),
            format,
        };
        match &cli.command {
            Command::Verify { n, exact } => {
                cfg.n = n.unwrap_or(cfg.n);
                cfg.exact |= *exact;
            }
            Command::Eisenstein { s, n_bound, m, window, quad_points } => {
                cfg.s = s.unwrap_or(cfg.s);
                cfg.n_bound = n_bound.unwrap_or(cfg.n_bound);
                cfg.m = m.clone().unwrap_or(cfg.m);
                cfg.window = window.unwrap_or(cfg.window);
                cfg.quad_points = quad_points.unwrap_or(cfg.quad_points);
            }
            Command::Loglaw { samples, t_max } => {
                cfg.samples = samples.unwrap_or(cfg.samples);
                cfg.t_max = t_max.unwrap_or(cfg.t_max);
            }
            Command::Dm { m, eps, samples, volume_samples } => {
                cfg.m = m.clone().unwrap_or(cfg.m);
                cfg.eps = eps.unwrap_or(cfg.eps);
                cfg.samples = samples.unwrap_or(cfg.samples);
                cfg.volume_samples = volume_samples.unwrap_or(cfg.volume_samples);
            }
            Command::Orbit { t_max, stride, samples } => {
                cfg.t_max = t_max.unwrap_or(cfg.t_max);
                cfg.stride = stride.unwrap_or(cfg.stride);
                cfg.samples = samples.unwrap_or(cfg.samples);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Usage(msg));
        match self.command.as_str() {
            "verify" if !(2..=5).contains(&self.n) => bad(format!("n = {} outside the supported range 2..=5", self.n)),
            "eisenstein" if !(self.s > 2.0 && self.s.is_finite()) => {
                bad(format!("s = {} must exceed 2 for absolute convergence", self.s))
            }
            "eisenstein" if self.n_bound < 1 || self.m.is_empty() || self.window < 1 || self.quad_points < 2 => {
                bad("N, window and quad-points must be positive and m non-empty".into())
            }
            "eisenstein" if self.m.iter().any(|&m| m > 64) => bad("weights above 64 are not supported".into()),
            "loglaw" | "orbit" if !(self.t_max >= 10.0 && self.t_max.is_finite()) => {
                bad(format!("T = {} must be at least 10", self.t_max))
            }
            "loglaw" if self.t_max.fract() != 0.0 => bad(format!("T = {} must be an integer", self.t_max)),
            "orbit" if !(self.stride > 0.0 && self.stride.is_finite()) => bad("stride must be positive".into()),
            "dm" if !(self.eps > 0.0 && self.eps < 1.0) => bad(format!("eps = {} outside (0, 1)", self.eps)),
            "dm" if self.m.is_empty() || self.m.contains(&0) => bad("m values must be positive".into()),
            _ if self.samples == 0 && self.command != "verify" && self.command != "eisenstein" => {
                bad("samples must be positive".into())
            }
            _ if self.threads == Some(0) => bad("threads must be positive".into()),
            _ if self.format == Format::Csv && self.command == "verify" => bad("verify writes JSON only".into()),
            _ => Ok(()),
        }
    }
}
