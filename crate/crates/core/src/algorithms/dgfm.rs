use rayon::prelude::*;

use super::{DgfmConfig, NetworkState, Problem, Recorder, RunOptions, RunOutput, StepReport};
use crate::error::{Error, Result};
use crate::objectives::StochasticObjective;
use crate::rng::{stream, Purpose};
use crate::smoothing::{accumulate_minibatch, CountingObjective, SampleBatch, SmoothingParams};
use crate::stacked::Stacked;
use crate::topology::TopologySchedule;

/// Local mini-batch estimates `g_i(x_i; S_i^k)` for every agent, drawn from
/// the `(seed, i, k)` streams. Overwrites `out`.
#[allow(clippy::too_many_arguments)]
pub(super) fn local_estimates(
    objective: &dyn StochasticObjective,
    problem: &Problem<'_>,
    x: &Stacked,
    params: &SmoothingParams,
    seed: u64,
    k: u64,
    batch: usize,
    out: &mut Stacked,
) -> Result<()> {
    let d = x.dim();
    out.as_mut_slice()
        .par_chunks_mut(d)
        .enumerate()
        .try_for_each(|(i, gi)| -> Result<()> {
            let mut rng = stream(seed, i as u64, k, Purpose::Batch);
            let sample = SampleBatch::draw(problem.partition.local(i), batch, d, &mut rng)?;
            let mut scratch = vec![0.0; d];
            accumulate_minibatch(objective, x.row(i), params, &sample, &mut scratch, gi);
            Ok(())
        })
}

pub(super) fn check_state(state: &NetworkState, schedule: &TopologySchedule, problem: &Problem<'_>) -> Result<()> {
    let m = state.agents();
    if m != schedule.agents() || m != problem.agents() {
        return Err(Error::shape(format!(
            "state has {m} agents, topology {}, partition {}",
            schedule.agents(),
            problem.agents()
        )));
    }
    if state.dim() != problem.dim() {
        return Err(Error::shape(format!(
            "state dimension {} differs from objective dimension {}",
            state.dim(),
            problem.dim()
        )));
    }
    Ok(())
}

/// `z_i = (a_i − b_i) + c_i`, row by row.
pub(super) fn tracking_input(a: &Stacked, b: &Stacked, c: &Stacked) -> Stacked {
    let mut z = a.clone();
    z.as_mut_slice()
        .iter_mut()
        .zip(b.as_slice().iter().zip(c.as_slice()))
        .for_each(|(z, (b, c))| *z = (*z - b) + c);
    z
}

/// `x − η y`, row by row.
pub(super) fn primal_input(x: &Stacked, y: &Stacked, eta: f64) -> Stacked {
    let mut u = x.clone();
    u.as_mut_slice()
        .iter_mut()
        .zip(y.as_slice())
        .for_each(|(u, y)| *u -= eta * y);
    u
}

/// One iteration of the decentralized gradient-free method with gradient
/// tracking:
///
/// ```text
/// y_i ← Σ_j a_ij (y_j + g_j(x_j^k) − g_j(x_j^{k−1}))
/// x_i ← Σ_j a_ij (x_j − η y_j)
/// ```
///
/// Two gossip rounds per iteration; `2·m·b` oracle calls.
pub fn dgfm_step(
    state: &mut NetworkState,
    schedule: &TopologySchedule,
    problem: &Problem<'_>,
    cfg: &DgfmConfig,
) -> Result<StepReport> {
    cfg.validate()?;
    if state.k >= cfg.iters {
        return Err(Error::BudgetExceeded(cfg.iters));
    }
    check_state(state, schedule, problem)?;
    let params = SmoothingParams::new(cfg.delta, problem.dim())?;
    let counted = CountingObjective::new(problem.objective);
    let k = state.k;

    let mut g = Stacked::zeros(state.agents(), state.dim());
    local_estimates(&counted, problem, &state.x, &params, cfg.seed, k, cfg.batch, &mut g)?;

    let mixer = schedule.at(k, 0);
    let y_next = mixer.mix(&tracking_input(&state.y, &state.g_prev, &g))?;
    let x_next = mixer.mix(&primal_input(&state.x, &y_next, cfg.eta))?;

    state.x_prev = std::mem::replace(&mut state.x, x_next);
    state.y = y_next;
    state.g_prev = g;
    state.k += 1;
    let report = StepReport {
        oracle_calls: counted.calls(),
        comm_rounds: 2,
        restart: None,
    };
    state.oracle_calls += report.oracle_calls;
    state.comm_rounds += report.comm_rounds;
    Ok(report)
}

/// Run `cfg.iters` iterations from a common start.
pub fn dgfm_run(
    schedule: &TopologySchedule,
    problem: &Problem<'_>,
    cfg: &DgfmConfig,
    opts: &RunOptions,
) -> Result<RunOutput> {
    cfg.validate()?;
    let x0 = opts.start(problem.dim())?;
    let mut state = NetworkState::new(problem.agents(), &x0);
    check_state(&state, schedule, problem)?;
    let mut rec = Recorder::new(
        problem.objective,
        opts,
        "dgfm",
        cfg.delta,
        cfg.seed,
        schedule.rho(),
        &x0,
    )?;
    while state.k < cfg.iters {
        let report = dgfm_step(&mut state, schedule, problem, cfg)?;
        rec.observe(&state, &report, state.k == cfg.iters)?;
    }
    Ok(rec.finish(state))
}
