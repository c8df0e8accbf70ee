use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Dgfm,
    DgfmPlus,
    Gfm,
    GfmPlus,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Dgfm => "dgfm",
            Algo::DgfmPlus => "dgfm-plus",
            Algo::Gfm => "gfm",
            Algo::GfmPlus => "gfm-plus",
        }
    }

    pub fn decentralized(self) -> bool {
        matches!(self, Algo::Dgfm | Algo::DgfmPlus)
    }

    pub fn variance_reduced(self) -> bool {
        matches!(self, Algo::DgfmPlus | Algo::GfmPlus)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetMode {
    /// First N rows.
    First,
    /// N rows drawn without replacement, seeded by `--seed`.
    Sample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologySpec {
    Ring,
    Complete,
    Metropolis(PathBuf),
    Matrix(PathBuf),
}

impl FromStr for TopologySpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "ring" => Ok(Self::Ring),
            None if s == "complete" => Ok(Self::Complete),
            Some(("metropolis", p)) if !p.is_empty() => Ok(Self::Metropolis(p.into())),
            Some(("matrix", p)) if !p.is_empty() => Ok(Self::Matrix(p.into())),
            _ => Err(format!(
                "unknown topology `{s}` (expected ring, complete, metropolis:<file> or matrix:<file>)"
            )),
        }
    }
}

impl fmt::Display for TopologySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ring => f.write_str("ring"),
            Self::Complete => f.write_str("complete"),
            Self::Metropolis(p) => write!(f, "metropolis:{}", p.display()),
            Self::Matrix(p) => write!(f, "matrix:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ParamMode {
    Manual,
    /// Theorem-prescribed parameters for target stationarity `ε`.
    Theorem(f64),
}

impl FromStr for ParamMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "manual" {
            return Ok(Self::Manual);
        }
        match s.strip_prefix("theorem:").map(str::parse::<f64>) {
            Some(Ok(eps)) if eps > 0.0 && eps.is_finite() => Ok(Self::Theorem(eps)),
            _ => Err(format!("expected `manual` or `theorem:<epsilon>` with epsilon > 0, got `{s}`")),
        }
    }
}

impl fmt::Display for ParamMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Manual => f.write_str("manual"),
            Self::Theorem(eps) => write!(f, "theorem:{eps}"),
        }
    }
}

/// Command-line flags. A `--config` file of `key = value` lines is read
/// first; flags given on the command line override it.
#[derive(Debug, Clone, Parser)]
#[command(name = "dgfm", version, about = "Decentralized gradient-free optimization experiments")]
#[command(args_override_self = true)]
pub struct Flags {
    /// key = value file with the same names as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub algo: Option<Algo>,
    /// LIBSVM file (optionally .gz), a name looked up in $DGFM_DATA_DIR,
    /// or builtin:quadratic / builtin:abs.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Dimension of builtin objectives.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Sample count of builtin objectives.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Keep N rows of a file dataset
    #[arg(long)]
    pub subset: Option<usize>,
    #[arg(long, value_enum)]
    pub subset_mode: Option<SubsetMode>,
    /// Skip row normalization.
    #[arg(long)]
    pub raw_features: Option<bool>,
    /// Number of agents (default 20; centralized algorithms need 1)
    #[arg(long)]
    pub m: Option<usize>,
    /// ring, complete, metropolis:<adjacency file> or matrix:<mixing matrix file>
    #[arg(long)]
    pub topology: Option<TopologySpec>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub iters: Option<u64>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Restart batch per agent
    #[arg(long)]
    pub mega_batch: Option<usize>,
    /// Iterations between restarts
    #[arg(long)]
    pub period: Option<u64>,
    /// Mixing rounds after each restart
    #[arg(long)]
    pub gossip: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Runs with seeds seed, seed+1, ...
    #[arg(long)]
    pub repeats: Option<u64>,
    #[arg(long)]
    pub record_every: Option<u64>,
    /// Stationarity estimate every this many iterations; 0 disables.
    #[arg(long)]
    pub stationarity_every: Option<u64>,
    #[arg(long)]
    pub stationarity_samples: Option<usize>,
    /// Output file; defaults to $DGFM_OUT_DIR/<algo>.csv or ./<algo>.csv
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// manual or theorem:<epsilon>.
    #[arg(long)]
    pub params: Option<ParamMode>,
    /// Lipschitz constant for theorem mode; estimated when absent and the
    /// objective has no known bound.
    #[arg(long)]
    pub lipschitz: Option<f64>,
    /// Constant c in the surrogate smoothness bound.
    #[arg(long)]
    pub smoothness_const: Option<f64>,
}

/// `key = value` pairs of a config file, in order.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!("config line {}: expected key = value", no + 1)));
        };
        let key = key.trim();
        let value = value.trim();
        if key.is_empty() || !key.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-') {
            return Err(CliError::Config(format!("config line {}: bad key `{key}`", no + 1)));
        }
        if key == "config" {
            return Err(CliError::Config(format!("config line {}: nested config files are not supported", no + 1)));
        }
        out.push((key.to_string(), value.to_string()));
    }
    Ok(out)
}

fn parse_flags<I, T>(args: I) -> Result<Flags, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    Flags::try_parse_from(args).map_err(CliError::Clap)
}

/// Parse the command line, splicing config-file pairs in front of the flags
/// so that later (command-line) occurrences win.
pub fn parse_args<I, T>(args: I) -> Result<Flags, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let first = parse_flags(&args)?;
    let Some(path) = first.config.clone() else {
        return Ok(first);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut spliced: Vec<OsString> = vec![args.first().cloned().unwrap_or_else(|| "dgfm".into())];
    for (k, v) in parse_config_text(&text)? {
        spliced.push(format!("--{k}").into());
        spliced.push(v.into());
    }
    spliced.extend(args.into_iter().skip(1));
    parse_flags(spliced)
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExperimentConfig {
    pub algo: Algo,
    pub dataset: String,
    pub dim: usize,
    pub samples: usize,
    pub subset: Option<usize>,
    pub subset_mode: SubsetMode,
    pub raw_features: bool,
    pub m: usize,
    pub topology: TopologySpec,
    pub eta: Option<f64>,
    pub delta: f64,
    pub iters: Option<u64>,
    pub batch: Option<usize>,
    pub mega_batch: Option<usize>,
    pub period: Option<u64>,
    pub gossip: Option<usize>,
    pub seed: u64,
    pub repeats: u64,
    pub record_every: u64,
    pub stationarity_every: u64,
    pub stationarity_samples: usize,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub params: ParamMode,
    pub lipschitz: Option<f64>,
    pub smoothness_const: f64,
}

impl ExperimentConfig {
    pub fn from_flags(f: Flags) -> Result<Self, CliError> {
        let cfg_err = |msg: &str| Err(CliError::Config(msg.to_string()));
        let Some(algo) = f.algo else {
            return cfg_err("--algo is required");
        };
        let Some(dataset) = f.dataset else {
            return cfg_err("--dataset is required");
        };
        let m = match (algo.decentralized(), f.m) {
            (true, m) => m.unwrap_or(20),
            (false, None | Some(1)) => 1,
            (false, Some(_)) => return cfg_err("--m: centralized methods run on a single agent"),
        };
        if m == 0 {
            return cfg_err("--m must be at least 1");
        }
        let params = f.params.unwrap_or(ParamMode::Manual);
        if let ParamMode::Theorem(_) = params {
            let explicit = [
                ("--eta", f.eta.is_some()),
                ("--batch", f.batch.is_some()),
                ("--mega-batch", f.mega_batch.is_some()),
                ("--period", f.period.is_some()),
                ("--gossip", f.gossip.is_some()),
            ];
            if let Some((name, _)) = explicit.iter().find(|(_, given)| *given) {
                return Err(CliError::Config(format!(
                    "{name} conflicts with --params theorem:<epsilon>, which prescribes it"
                )));
            }
        } else {
            if f.eta.is_none() {
                return cfg_err("--eta is required unless --params theorem:<epsilon> is used");
            }
            if f.iters.is_none() {
                return cfg_err("--iters is required unless --params theorem:<epsilon> is used");
            }
            if algo.variance_reduced() {
                for (name, given) in [
                    ("--period", f.period.is_some()),
                    ("--mega-batch", f.mega_batch.is_some()),
                    ("--batch", f.batch.is_some()),
                ] {
                    if !given {
                        return Err(CliError::Config(format!("{name} is required for {}", algo.name())));
                    }
                }
                if algo == Algo::DgfmPlus && f.gossip.is_none() {
                    return cfg_err("--gossip is required for dgfm-plus");
                }
            }
        }
        let positive = [
            ("--eta", f.eta, true),
            ("--delta", f.delta, false),
            ("--lipschitz", f.lipschitz, false),
            ("--smoothness-const", f.smoothness_const, false),
        ];
        for (name, v, zero_ok) in positive {
            if let Some(v) = v {
                let ok = v.is_finite() && (v > 0.0 || (zero_ok && v == 0.0));
                if !ok {
                    return Err(CliError::Config(format!("{name} must be positive and finite, got {v}")));
                }
            }
        }
        for (name, v) in [
            ("--batch", f.batch.map(|v| v as u64)),
            ("--mega-batch", f.mega_batch.map(|v| v as u64)),
            ("--period", f.period),
            ("--gossip", f.gossip.map(|v| v as u64)),
            ("--repeats", f.repeats),
            ("--record-every", f.record_every),
            ("--dim", f.dim.map(|v| v as u64)),
            ("--samples", f.samples.map(|v| v as u64)),
            ("--subset", f.subset.map(|v| v as u64)),
        ] {
            if v == Some(0) {
                return Err(CliError::Config(format!("{name} must be at least 1")));
            }
        }
        Ok(Self {
            algo,
            dataset,
            dim: f.dim.unwrap_or(10),
            samples: f.samples.unwrap_or(64),
            subset: f.subset,
            subset_mode: f.subset_mode.unwrap_or(SubsetMode::First),
            raw_features: f.raw_features.unwrap_or(false),
            m,
            topology: f.topology.unwrap_or(TopologySpec::Ring),
            eta: f.eta,
            delta: f.delta.unwrap_or(1e-3),
            iters: f.iters,
            batch: f.batch,
            mega_batch: f.mega_batch,
            period: f.period,
            gossip: f.gossip,
            seed: f.seed.unwrap_or(0),
            repeats: f.repeats.unwrap_or(1),
            record_every: f.record_every.unwrap_or(10),
            stationarity_every: f.stationarity_every.unwrap_or(0),
            stationarity_samples: f.stationarity_samples.unwrap_or(100),
            out: f.out,
            format: f.format,
            params,
            lipschitz: f.lipschitz,
            smoothness_const: f.smoothness_const.unwrap_or(1.0),
        })
    }

    pub fn output_format(&self, path: &std::path::Path) -> Format {
        self.format.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::Csv,
        })
    }
}

/// Parameters the optimizer actually runs with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub struct Resolved {
    pub eta: f64,
    pub iters: u64,
    pub batch: usize,
    pub mega_batch: usize,
    pub period: u64,
    pub gossip: usize,
}

/// `key = value` text that reruns exactly the resolved configuration of a
/// single seed.
pub fn echo_config(cfg: &ExperimentConfig, r: &Resolved, seed: u64) -> String {
    let mut lines = vec![
        format!("algo = {}", cfg.algo.name()),
        format!("dataset = {}", cfg.dataset),
        format!("dim = {}", cfg.dim),
        format!("samples = {}", cfg.samples),
    ];
    if let Some(n) = cfg.subset {
        lines.push(format!("subset = {n}"));
        let mode = match cfg.subset_mode {
            SubsetMode::First => "first",
            SubsetMode::Sample => "sample",
        };
        lines.push(format!("subset-mode = {mode}"));
    }
    lines.push(format!("raw-features = {}", cfg.raw_features));
    if cfg.algo.decentralized() {
        lines.push(format!("m = {}", cfg.m));
        lines.push(format!("topology = {}", cfg.topology));
    }
    lines.push(format!("eta = {}", r.eta));
    lines.push(format!("delta = {}", cfg.delta));
    lines.push(format!("iters = {}", r.iters));
    lines.push(format!("batch = {}", r.batch));
    if cfg.algo.variance_reduced() {
        lines.push(format!("mega-batch = {}", r.mega_batch));
        lines.push(format!("period = {}", r.period));
    }
    if cfg.algo == Algo::DgfmPlus {
        lines.push(format!("gossip = {}", r.gossip));
    }
    lines.push(format!("seed = {seed}"));
    lines.push(format!("record-every = {}", cfg.record_every));
    lines.push(format!("stationarity-every = {}", cfg.stationarity_every));
    lines.push(format!("stationarity-samples = {}", cfg.stationarity_samples));
    let mut text = lines.join("\n");
    text.push('\n');
    text
}
