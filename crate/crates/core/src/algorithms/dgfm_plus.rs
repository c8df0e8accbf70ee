use rayon::prelude::*;

use super::dgfm::{check_state, local_estimates, primal_input, tracking_input};
use super::{
    DgfmPlusConfig, NetworkState, Problem, Recorder, RestartReport, RunOptions, RunOutput,
    StepReport,
};
use crate::error::{Error, Result};
use crate::objectives::StochasticObjective;
use crate::rng::{stream, Purpose};
use crate::smoothing::{accumulate_spider, CountingObjective, SampleBatch, SmoothingParams};
use crate::stacked::Stacked;
use crate::topology::TopologySchedule;

/// `v_i + g_i(x_i; S) − g_i(x_prev_i; S)` for every agent, with the same
/// pairs `S` at both points.
#[allow(clippy::too_many_arguments)]
pub(super) fn spider_update(
    objective: &dyn StochasticObjective,
    problem: &Problem<'_>,
    x: &Stacked,
    x_prev: &Stacked,
    v: &Stacked,
    params: &SmoothingParams,
    seed: u64,
    k: u64,
    batch: usize,
) -> Result<Stacked> {
    let d = x.dim();
    let mut next = v.clone();
    next.as_mut_slice()
        .par_chunks_mut(d)
        .enumerate()
        .try_for_each(|(i, vi)| -> Result<()> {
            let mut rng = stream(seed, i as u64, k, Purpose::Batch);
            let sample = SampleBatch::draw(problem.partition.local(i), batch, d, &mut rng)?;
            let mut scratch = vec![0.0; d];
            let mut diff = vec![0.0; d];
            accumulate_spider(objective, x.row(i), x_prev.row(i), params, &sample, &mut scratch, &mut diff);
            vi.iter_mut().zip(&diff).for_each(|(a, b)| *a += b);
            Ok(())
        })?;
    Ok(next)
}

/// One iteration of the variance-reduced decentralized method.
///
/// When `k mod T = 0` every agent restarts its estimate from a mega-batch of
/// `b′` pairs, sets `y = v`, and gossips `y` for `𝒯` rounds. Otherwise the
/// SPIDER recursion updates `v` with `b` shared pairs and `y` tracks it
/// through one gossip round. Both branches end with the primal mix of
/// `x − η y`.
pub fn dgfm_plus_step(
    state: &mut NetworkState,
    schedule: &TopologySchedule,
    problem: &Problem<'_>,
    cfg: &DgfmPlusConfig,
) -> Result<StepReport> {
    cfg.validate()?;
    if state.k >= cfg.iters {
        return Err(Error::BudgetExceeded(cfg.iters));
    }
    check_state(state, schedule, problem)?;
    let params = SmoothingParams::new(cfg.delta, problem.dim())?;
    let counted = CountingObjective::new(problem.objective);
    let k = state.k;
    let (m, d) = (state.agents(), state.dim());

    let (v_next, y_next, restart, rounds) = if cfg.is_restart(k) {
        let mut v = Stacked::zeros(m, d);
        local_estimates(&counted, problem, &state.x, &params, cfg.seed, k, cfg.mega_batch, &mut v)?;
        let pre_gossip = v.deviation_sq();
        let mut y = v.clone();
        for tau in 1..=cfg.gossip_rounds {
            y = schedule.at(k, tau).mix(&y)?;
        }
        let report = RestartReport {
            pre_gossip,
            post_gossip: y.deviation_sq(),
            rounds: cfg.gossip_rounds,
        };
        (v, y, Some(report), cfg.gossip_rounds as u64)
    } else {
        let v = spider_update(
            &counted,
            problem,
            &state.x,
            &state.x_prev,
            &state.v,
            &params,
            cfg.seed,
            k,
            cfg.batch,
        )?;
        let y = schedule.at(k, 0).mix(&tracking_input(&state.y, &state.v, &v))?;
        (v, y, None, 1)
    };

    let x_next = schedule.at(k, 0).mix(&primal_input(&state.x, &y_next, cfg.eta))?;
    state.x_prev = std::mem::replace(&mut state.x, x_next);
    state.y = y_next;
    state.v = v_next;
    state.k += 1;
    let report = StepReport {
        oracle_calls: counted.calls(),
        comm_rounds: rounds + 1,
        restart,
    };
    state.oracle_calls += report.oracle_calls;
    state.comm_rounds += report.comm_rounds;
    Ok(report)
}

/// Run `cfg.iters` iterations; the last cycle may be shorter than `T`.
/// Restart iterations are listed in the record metadata.
pub fn dgfm_plus_run(
    schedule: &TopologySchedule,
    problem: &Problem<'_>,
    cfg: &DgfmPlusConfig,
    opts: &RunOptions,
) -> Result<RunOutput> {
    cfg.validate()?;
    let x0 = opts.start(problem.dim())?;
    let mut state = NetworkState::new(problem.agents(), &x0);
    check_state(&state, schedule, problem)?;
    let mut rec = Recorder::new(
        problem.objective,
        opts,
        "dgfm-plus",
        cfg.delta,
        cfg.seed,
        schedule.rho(),
        &x0,
    )?;
    while state.k < cfg.iters {
        let report = dgfm_plus_step(&mut state, schedule, problem, cfg)?;
        rec.observe(&state, &report, state.k == cfg.iters)?;
    }
    Ok(rec.finish(state))
}
