//! Decentralized and centralized zeroth-order optimizers.
//!
//! Every optimizer is a step function over a [`NetworkState`] plus a run
//! loop that records metrics. All randomness is drawn from per-(agent,
//! iteration) streams, so agent-local work can run in parallel with results
//! identical to a sequential schedule.

mod centralized;
mod dgfm;
mod dgfm_plus;
mod params;

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Partition;
use crate::error::{Error, Result};
use crate::metrics::{stationarity_estimate, RecordEntry, RunMetadata, RunRecord};
use crate::objectives::{full_loss, StochasticObjective};
use crate::rng::{stream, Purpose};
use crate::smoothing::SmoothingParams;
use crate::stacked::Stacked;

pub use centralized::{gfm_plus_run, gfm_plus_step, gfm_run, gfm_step};
pub use dgfm::{dgfm_run, dgfm_step};
pub use dgfm_plus::{dgfm_plus_run, dgfm_plus_step};
pub use params::{
    gossip_rounds_formula, theorem_params_dgfm, theorem_params_dgfm_plus, TheoremInputs, TheoremParams, RHO_FLOOR,
};

/// A finite-sum objective together with the split of its samples across
/// agents. Agent `i` draws `ξ` uniformly from `partition.local(i)`.
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub objective: &'a dyn StochasticObjective,
    pub partition: &'a Partition,
}

impl<'a> Problem<'a> {
    pub fn new(objective: &'a dyn StochasticObjective, partition: &'a Partition) -> Result<Self> {
        if partition.samples() != objective.n_samples() {
            return Err(Error::shape(format!(
                "partition covers {} samples, objective has {}",
                partition.samples(),
                objective.n_samples()
            )));
        }
        Ok(Self {
            objective,
            partition,
        })
    }

    pub fn agents(&self) -> usize {
        self.partition.agents()
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }
}

/// Partition placing every sample, in order, on a single agent.
pub fn single_agent_partition(n: usize) -> Result<Partition> {
    Partition::from_assignment(vec![(0..n).collect()])
}

/// Stacked iterates of all agents at iteration `k`.
///
/// Row `i` of each field is agent `i`'s copy: `x` the iterate, `y` the
/// tracking variable, `v` the SPIDER estimate (DGFM⁺/GFM⁺), `g_prev` the
/// last local estimate (DGFM), `x_prev` the previous iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub x: Stacked,
    pub y: Stacked,
    pub v: Stacked,
    pub g_prev: Stacked,
    pub x_prev: Stacked,
    pub k: u64,
    pub oracle_calls: u64,
    pub comm_rounds: u64,
}

/// Borrowed view of one agent's variables.
#[derive(Debug, Clone, Copy)]
pub struct AgentState<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub v: &'a [f64],
    pub g_prev: &'a [f64],
    pub x_prev: &'a [f64],
}

impl NetworkState {
    /// All agents start at `x0`; `x_prev = x0` and `y = v = g_prev = 0`.
    pub fn new(m: usize, x0: &[f64]) -> Self {
        let d = x0.len();
        Self {
            x: Stacked::replicate(m, x0),
            y: Stacked::zeros(m, d),
            v: Stacked::zeros(m, d),
            g_prev: Stacked::zeros(m, d),
            x_prev: Stacked::replicate(m, x0),
            k: 0,
            oracle_calls: 0,
            comm_rounds: 0,
        }
    }

    pub fn agents(&self) -> usize {
        self.x.rows()
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn agent(&self, i: usize) -> AgentState<'_> {
        AgentState {
            x: self.x.row(i),
            y: self.y.row(i),
            v: self.v.row(i),
            g_prev: self.g_prev.row(i),
            x_prev: self.x_prev.row(i),
        }
    }

    pub fn mean_x(&self) -> Vec<f64> {
        self.x.mean()
    }

    pub fn consensus_error(&self) -> f64 {
        self.x.deviation_sq()
    }

    pub fn tracking_consensus_error(&self) -> f64 {
        self.y.deviation_sq()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgfmConfig {
    pub eta: f64,
    pub delta: f64,
    pub iters: u64,
    pub seed: u64,
    /// Pairs per local estimate; the decentralized method uses 1.
    pub batch: usize,
}

impl DgfmConfig {
    pub fn new(eta: f64, delta: f64, iters: u64, seed: u64) -> Self {
        Self {
            eta,
            delta,
            iters,
            seed,
            batch: 1,
        }
    }

    pub fn with_batch(mut self, batch: usize) -> Self {
        self.batch = batch;
        self
    }

    fn validate(&self) -> Result<()> {
        check_step(self.eta)?;
        if self.batch == 0 {
            return Err(Error::param("batch must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgfmPlusConfig {
    pub eta: f64,
    pub delta: f64,
    pub iters: u64,
    pub seed: u64,
    /// Cycle length `T`: a restart fires whenever `k mod T = 0`.
    pub period: u64,
    /// Restart batch `b′`.
    pub mega_batch: usize,
    /// SPIDER batch `b`.
    pub batch: usize,
    /// Gossip repetitions `𝒯` at each restart.
    pub gossip_rounds: usize,
}

impl DgfmPlusConfig {
    fn validate(&self) -> Result<()> {
        check_step(self.eta)?;
        if self.period == 0 || self.mega_batch == 0 || self.batch == 0 {
            return Err(Error::param("period, mega_batch and batch must be at least 1"));
        }
        Ok(())
    }

    pub fn is_restart(&self, k: u64) -> bool {
        k.is_multiple_of(self.period)
    }
}

fn check_step(eta: f64) -> Result<()> {
    // eta = 0 is allowed (frozen iterates are a useful test configuration)
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::param(format!("step size must be finite and nonnegative, got {eta}")));
    }
    Ok(())
}

/// Diagnostics of a restart's repeated gossip on the tracking variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RestartReport {
    /// `‖y − ȳ‖²` right after the mega-batch estimate, before gossip.
    pub pre_gossip: f64,
    /// `‖y − ȳ‖²` after the gossip rounds.
    pub post_gossip: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    pub oracle_calls: u64,
    pub comm_rounds: u64,
    pub restart: Option<RestartReport>,
}

/// Which iterates to keep for output selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IterateRetention {
    None,
    /// Snapshots at record points only.
    #[default]
    Recorded,
    /// Every iteration `k = 1..K`.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub record_every: u64,
    /// Stationarity is sampled at record points that are multiples of this;
    /// `None` disables it.
    pub stationarity_every: Option<u64>,
    pub stationarity_samples: usize,
    pub retain: IterateRetention,
    /// Common starting point; zeros when absent.
    pub x0: Option<Vec<f64>>,
}

impl RunOptions {
    pub fn every(record_every: u64) -> Self {
        Self {
            record_every: record_every.max(1),
            stationarity_every: Some(record_every.max(1) * 10),
            stationarity_samples: 100,
            retain: IterateRetention::Recorded,
            x0: None,
        }
    }

    pub fn without_stationarity(mut self) -> Self {
        self.stationarity_every = None;
        self
    }

    pub fn retain(mut self, retain: IterateRetention) -> Self {
        self.retain = retain;
        self
    }

    pub fn starting_at(mut self, x0: Vec<f64>) -> Self {
        self.x0 = Some(x0);
        self
    }

    fn start(&self, d: usize) -> Result<Vec<f64>> {
        match &self.x0 {
            Some(x0) if x0.len() != d => Err(Error::shape(format!(
                "starting point has dimension {}, objective {d}",
                x0.len()
            ))),
            Some(x0) => Ok(x0.clone()),
            None => Ok(vec![0.0; d]),
        }
    }
}

impl Default for RunOptions {
    fn default() -> Self {
        Self::every(1)
    }
}

/// Iterates of all agents at iteration `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub k: u64,
    pub x: Stacked,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: NetworkState,
    pub record: RunRecord,
    pub iterates: Vec<Snapshot>,
}

/// Draw `x_out` uniformly over the retained `(iteration, agent)` pairs.
pub fn select_output(iterates: &[Snapshot], seed: u64) -> Result<Vec<f64>> {
    let total: usize = iterates.iter().map(|s| s.x.rows()).sum();
    if total == 0 {
        return Err(Error::EmptyTrajectory);
    }
    let mut pick = stream(seed, 0, 0, Purpose::Output).random_range(0..total);
    for snap in iterates {
        if pick < snap.x.rows() {
            return Ok(snap.x.row(pick).to_vec());
        }
        pick -= snap.x.rows();
    }
    unreachable!("pick within total")
}

/// Shared run loop: record bookkeeping around a step closure.
pub(crate) struct Recorder<'a> {
    objective: &'a dyn StochasticObjective,
    opts: &'a RunOptions,
    delta: f64,
    seed: u64,
    started: Instant,
    record: RunRecord,
    iterates: Vec<Snapshot>,
}

impl<'a> Recorder<'a> {
    pub(crate) fn new(
        objective: &'a dyn StochasticObjective,
        opts: &'a RunOptions,
        algorithm: &str,
        delta: f64,
        seed: u64,
        rho: f64,
        x0: &[f64],
    ) -> Result<Self> {
        if opts.record_every == 0 {
            return Err(Error::param("record_every must be at least 1"));
        }
        // validates delta early, before any step runs
        SmoothingParams::new(delta, objective.dim())?;
        let record = RunRecord {
            metadata: RunMetadata {
                algorithm: algorithm.to_string(),
                seed,
                rho,
                initial_loss: full_loss(objective, x0),
                ..Default::default()
            },
            entries: Vec::new(),
        };
        Ok(Self {
            objective,
            opts,
            delta,
            seed,
            started: Instant::now(),
            record,
            iterates: Vec::new(),
        })
    }

    pub(crate) fn mark_restart(&mut self, k: u64) {
        self.record.metadata.restarts.push(k);
    }

    pub(crate) fn observe(&mut self, state: &NetworkState, report: &StepReport, last: bool) -> Result<()> {
        if !state.x.is_finite() || !state.y.is_finite() {
            return Err(Error::NonFinite { iter: state.k });
        }
        if report.restart.is_some() {
            self.record.metadata.restarts.push(state.k - 1);
        }
        let at_record = state.k.is_multiple_of(self.opts.record_every) || last;
        if self.opts.retain == IterateRetention::Full
            || (at_record && self.opts.retain == IterateRetention::Recorded)
        {
            self.iterates.push(Snapshot {
                k: state.k,
                x: state.x.clone(),
            });
        }
        if !at_record {
            return Ok(());
        }
        let mean = state.mean_x();
        let loss = full_loss(self.objective, &mean);
        if !loss.is_finite() {
            return Err(Error::NonFinite { iter: state.k });
        }
        let stationarity = match self.opts.stationarity_every {
            Some(every) if every > 0 && state.k.is_multiple_of(every) => Some(
                stationarity_estimate(
                    self.objective,
                    &mean,
                    self.delta,
                    self.opts.stationarity_samples,
                    &mut stream(self.seed, 0, state.k, Purpose::Metric),
                )?
                .norm,
            ),
            _ => None,
        };
        self.record.push(RecordEntry {
            iter: state.k,
            oracle_calls: state.oracle_calls,
            comm_rounds: state.comm_rounds,
            loss,
            consensus_error: state.consensus_error(),
            stationarity,
            wall_ms: self.started.elapsed().as_secs_f64() * 1e3,
        });
        Ok(())
    }

    pub(crate) fn finish(self, state: NetworkState) -> RunOutput {
        RunOutput {
            state,
            record: self.record,
            iterates: self.iterates,
        }
    }
}
