//! Experiment runner behind the `dgfm` binary.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde_json::json;

use dgfm_core::algorithms::{
    dgfm_plus_run, dgfm_run, gfm_plus_run, gfm_run, theorem_params_dgfm, theorem_params_dgfm_plus,
    DgfmConfig, DgfmPlusConfig, IterateRetention, Problem, RunOptions, TheoremInputs, TheoremParams,
    RHO_FLOOR,
};
use dgfm_core::data::{load_libsvm, normalize_rows, Partition, SparseDataset};
use dgfm_core::metrics::{write_records, RecordFormat, RunRecord};
use dgfm_core::objectives::{
    estimate_lipschitz, full_loss, AbsTest, CappedL1Svm, QuadraticTest, StochasticObjective,
};
use dgfm_core::rng::{stream, Purpose};
use dgfm_core::topology::{build_ring, load_matrix, load_metropolis_hastings, MixingMatrix, TopologySchedule};

pub mod config;

pub use config::{echo_config, parse_args, parse_config_text, ExperimentConfig, Flags, Resolved};
use config::{Algo, Format, ParamMode, SubsetMode, TopologySpec};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DGFM_OUT_DIR";
/// Environment variable naming a directory searched for dataset names.
pub const DATA_DIR_ENV: &str = "DGFM_DATA_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Clap(#[from] clap::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) if !e.use_stderr() => 0,
            CliError::Clap(_) | CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<dgfm_core::Error> for CliError {
    fn from(e: dgfm_core::Error) -> Self {
        use dgfm_core::Error as E;
        let msg = e.to_string();
        match e {
            E::Parse { .. } | E::Io { .. } | E::SampleIndex { .. } | E::InvalidPartition { .. } | E::EmptyBatch => {
                CliError::Data(msg)
            }
            E::NonFinite { .. } | E::BudgetExceeded(_) | E::EmptyTrajectory => CliError::Numeric(msg),
            _ => CliError::Config(msg),
        }
    }
}

/// Objective plus the data it was built from.
pub struct Loaded {
    pub objective: Arc<dyn StochasticObjective>,
    /// Common starting point of every run.
    pub x0: Vec<f64>,
}

fn locate_dataset(name: &str) -> Result<PathBuf, CliError> {
    let direct = PathBuf::from(name);
    if direct.is_file() {
        return Ok(direct);
    }
    if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
        let dir = PathBuf::from(dir);
        for suffix in ["", ".txt", ".libsvm", ".gz", ".txt.gz"] {
            let p = dir.join(format!("{name}{suffix}"));
            if p.is_file() {
                return Ok(p);
            }
        }
    }
    Err(CliError::Data(format!("dataset not found: {}", direct.display())))
}

fn subset(ds: SparseDataset, cfg: &ExperimentConfig) -> Result<SparseDataset, CliError> {
    let Some(n) = cfg.subset else {
        return Ok(ds);
    };
    if n > ds.len() {
        return Err(CliError::Data(format!("--subset {n} exceeds the {} rows available", ds.len())));
    }
    Ok(match cfg.subset_mode {
        SubsetMode::First => ds.head(n),
        SubsetMode::Sample => ds.sample(n, cfg.seed),
    })
}

pub fn load_objective(cfg: &ExperimentConfig) -> Result<Loaded, CliError> {
    // builtins start away from their minimizer at the origin
    match cfg.dataset.as_str() {
        "builtin:quadratic" => {
            return Ok(Loaded {
                objective: Arc::new(QuadraticTest::replicated(cfg.dim, cfg.samples)?),
                x0: vec![1.0; cfg.dim],
            })
        }
        "builtin:abs" => {
            return Ok(Loaded {
                objective: Arc::new(AbsTest::replicated(cfg.dim, cfg.samples)?),
                x0: vec![1.0; cfg.dim],
            })
        }
        s if s.starts_with("builtin:") => {
            return Err(CliError::Config(format!(
                "unknown builtin `{s}` (expected builtin:quadratic or builtin:abs)"
            )))
        }
        _ => {}
    }
    let path = locate_dataset(&cfg.dataset)?;
    let mut ds = subset(load_libsvm(&path)?, cfg)?;
    if !cfg.raw_features {
        ds = normalize_rows(ds);
    }
    let svm = CappedL1Svm::with_defaults(Arc::new(ds))?;
    let d = svm.dim();
    Ok(Loaded {
        objective: Arc::new(svm),
        x0: vec![0.0; d],
    })
}

pub fn build_schedule(cfg: &ExperimentConfig) -> Result<TopologySchedule, CliError> {
    if cfg.m == 1 {
        return Ok(MixingMatrix::identity_single().into());
    }
    let w = match &cfg.topology {
        TopologySpec::Ring => build_ring(cfg.m)?,
        TopologySpec::Complete => MixingMatrix::complete(cfg.m)?,
        TopologySpec::Metropolis(p) => load_metropolis_hastings(p)?,
        TopologySpec::Matrix(p) => load_matrix(p)?,
    };
    if w.agents() != cfg.m {
        return Err(CliError::Config(format!(
            "topology {} has {} agents but --m is {}",
            cfg.topology,
            w.agents(),
            cfg.m
        )));
    }
    Ok(w.into())
}

/// Step size, batches and horizon the runs use, plus the theorem output
/// they came from in theorem mode.
pub fn resolve(
    cfg: &ExperimentConfig,
    loaded: &Loaded,
    rho: f64,
) -> Result<(Resolved, Option<TheoremParams>), CliError> {
    let ParamMode::Theorem(epsilon) = cfg.params else {
        let r = Resolved {
            eta: cfg.eta.expect("validated"),
            iters: cfg.iters.expect("validated"),
            batch: cfg.batch.unwrap_or(1),
            mega_batch: cfg.mega_batch.unwrap_or(1),
            period: cfg.period.unwrap_or(1),
            gossip: cfg.gossip.unwrap_or(1),
        };
        return Ok((r, None));
    };
    let obj = loaded.objective.as_ref();
    let lipschitz = match cfg.lipschitz.or(obj.lipschitz_hint()) {
        Some(l) => l,
        None => {
            let l = estimate_lipschitz(obj, 200, 1.0, &mut stream(cfg.seed, 0, 0, Purpose::Aux))?;
            log::info!("estimated Lipschitz constant {l}");
            l
        }
    };
    let rho = if rho < RHO_FLOOR {
        log::warn!("spectral gap {rho} floored at {RHO_FLOOR} for the parameter formulas");
        RHO_FLOOR
    } else {
        rho
    };
    let inputs = TheoremInputs {
        rho,
        lipschitz,
        dim: obj.dim(),
        delta: cfg.delta,
        epsilon,
        agents: cfg.m,
        // f ≥ 0 here, and f_δ ≤ f + δ L_f
        delta_gap: full_loss(obj, &loaded.x0) + cfg.delta * lipschitz,
        c: cfg.smoothness_const,
    };
    let p = if cfg.algo.variance_reduced() {
        theorem_params_dgfm_plus(&inputs)?
    } else {
        theorem_params_dgfm(&inputs)?
    };
    let r = Resolved {
        eta: p.eta,
        iters: cfg.iters.unwrap_or(p.iters),
        batch: p.batch.unwrap_or(1),
        mega_batch: p.mega_batch.unwrap_or(1),
        period: p.period.unwrap_or(1),
        gossip: p.gossip_rounds.unwrap_or(1),
    };
    if cfg.iters.is_none() && r.iters > 100_000_000 {
        log::warn!("prescribed horizon is {} iterations; pass --iters to cap it", r.iters);
    }
    Ok((r, Some(p)))
}

/// Run every seed of the experiment and return the records in seed order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>, CliError> {
    let loaded = load_objective(cfg)?;
    let n = loaded.objective.n_samples();
    if n < cfg.m {
        return Err(CliError::Data(format!("{n} samples cannot be split across {} agents", cfg.m)));
    }
    let schedule = build_schedule(cfg)?;
    let rho = if cfg.algo.decentralized() { schedule.rho() } else { 0.0 };
    let (resolved, theorem) = resolve(cfg, &loaded, rho)?;

    let seeds: Vec<u64> = (0..cfg.repeats).map(|r| cfg.seed + r).collect();
    seeds
        .par_iter()
        .map(|&seed| {
            let mut record = run_seed(cfg, &loaded, &schedule, &resolved, seed)?;
            let meta = &mut record.metadata;
            meta.dataset = cfg.dataset.clone();
            meta.topology = if cfg.algo.decentralized() {
                cfg.topology.to_string()
            } else {
                "single".into()
            };
            meta.config = json!({
                "experiment": cfg,
                "resolved": resolved,
                "theorem": theorem,
                "echo": echo_config(cfg, &resolved, seed),
            });
            Ok(record)
        })
        .collect()
}

fn run_seed(
    cfg: &ExperimentConfig,
    loaded: &Loaded,
    schedule: &TopologySchedule,
    r: &Resolved,
    seed: u64,
) -> Result<RunRecord, CliError> {
    let obj = loaded.objective.as_ref();
    let mut opts = RunOptions::every(cfg.record_every)
        .retain(IterateRetention::None)
        .starting_at(loaded.x0.clone());
    opts.stationarity_every = (cfg.stationarity_every > 0).then_some(cfg.stationarity_every);
    opts.stationarity_samples = cfg.stationarity_samples;
    let part = Partition::shuffled(obj.n_samples(), cfg.m, seed)?;
    let problem = Problem::new(obj, &part)?;
    let plain = DgfmConfig::new(r.eta, cfg.delta, r.iters, seed).with_batch(r.batch);
    let plus = DgfmPlusConfig {
        eta: r.eta,
        delta: cfg.delta,
        iters: r.iters,
        seed,
        period: r.period,
        mega_batch: r.mega_batch,
        batch: r.batch,
        gossip_rounds: r.gossip,
    };
    let out = match cfg.algo {
        Algo::Dgfm => dgfm_run(schedule, &problem, &plain, &opts),
        Algo::DgfmPlus => dgfm_plus_run(schedule, &problem, &plus, &opts),
        Algo::Gfm => gfm_run(&problem, &plain, &opts),
        Algo::GfmPlus => gfm_plus_run(&problem, &plus, &opts),
    };
    match out {
        Ok(out) => Ok(out.record),
        Err(e @ dgfm_core::Error::NonFinite { iter }) => {
            log::error!("seed {seed}: non-finite iterate at iteration {iter}");
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

/// Output path: `--out`, else `$DGFM_OUT_DIR/<algo>.<ext>`, else `./<algo>.<ext>`.
pub fn output_path(cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = &cfg.out {
        return p.clone();
    }
    let ext = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let dir = std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("."), PathBuf::from);
    dir.join(format!("{}.{ext}", cfg.algo.name()))
}

pub fn write_output(cfg: &ExperimentConfig, records: &[RunRecord], path: &Path) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    }
    let format = match cfg.output_format(path) {
        Format::Csv => RecordFormat::Csv,
        Format::Json => RecordFormat::Json,
    };
    write_records(records, path, format)?;
    Ok(())
}

/// `algo: final loss <mean> ± <std> over N seeds ...`
pub fn summary(cfg: &ExperimentConfig, records: &[RunRecord]) -> String {
    let finals: Vec<f64> = records
        .iter()
        .map(|r| r.last_loss().unwrap_or(r.metadata.initial_loss))
        .collect();
    let k = finals.len() as f64;
    let mean = finals.iter().sum::<f64>() / k;
    let sd = if finals.len() > 1 {
        (finals.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
    } else {
        0.0
    };
    let (calls, rounds) = records
        .first()
        .and_then(|r| r.entries.last())
        .map_or((0, 0), |e| (e.oracle_calls, e.comm_rounds));
    format!(
        "{}: final loss {mean:.6} ± {sd:.6} over {} seed(s); {calls} oracle calls, {rounds} communication rounds per run",
        cfg.algo.name(),
        finals.len()
    )
}

/// Parse, run, write, summarize. Returns the summary line.
pub fn main_with_args<I, T>(args: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cfg = ExperimentConfig::from_flags(parse_args(args)?)?;
    let records = run_experiment(&cfg)?;
    let path = output_path(&cfg);
    write_output(&cfg, &records, &path)?;
    Ok(summary(&cfg, &records))
}
