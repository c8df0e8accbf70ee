//! Single-agent baselines: two-point SGD on the smoothed surrogate and its
//! SPIDER variance-reduced variant.

use super::dgfm::{local_estimates, primal_input};
use super::dgfm_plus::spider_update;
use super::{DgfmConfig, DgfmPlusConfig, NetworkState, Problem, Recorder, RunOptions, RunOutput, StepReport};
use crate::error::{Error, Result};
use crate::smoothing::{CountingObjective, SmoothingParams};
use crate::stacked::Stacked;

fn check_single(state: &NetworkState, problem: &Problem<'_>) -> Result<()> {
    if problem.agents() != 1 || state.agents() != 1 {
        return Err(Error::shape("centralized methods run on a single agent"));
    }
    if state.dim() != problem.dim() {
        return Err(Error::shape("state dimension differs from objective dimension"));
    }
    Ok(())
}

/// `x ← x − η g(x; S)` with `|S| = cfg.batch`.
pub fn gfm_step(state: &mut NetworkState, problem: &Problem<'_>, cfg: &DgfmConfig) -> Result<StepReport> {
    cfg.validate()?;
    if state.k >= cfg.iters {
        return Err(Error::BudgetExceeded(cfg.iters));
    }
    check_single(state, problem)?;
    let params = SmoothingParams::new(cfg.delta, problem.dim())?;
    let counted = CountingObjective::new(problem.objective);
    let mut g = Stacked::zeros(1, state.dim());
    local_estimates(&counted, problem, &state.x, &params, cfg.seed, state.k, cfg.batch, &mut g)?;
    let x_next = primal_input(&state.x, &g, cfg.eta);
    state.x_prev = std::mem::replace(&mut state.x, x_next);
    state.g_prev = g;
    state.k += 1;
    state.oracle_calls += counted.calls();
    Ok(StepReport {
        oracle_calls: counted.calls(),
        comm_rounds: 0,
        restart: None,
    })
}

/// Restart from `b′` pairs when `k mod T = 0`, otherwise the SPIDER update
/// with `b` shared pairs; then `x ← x − η v`.
pub fn gfm_plus_step(
    state: &mut NetworkState,
    problem: &Problem<'_>,
    cfg: &DgfmPlusConfig,
) -> Result<StepReport> {
    cfg.validate()?;
    if state.k >= cfg.iters {
        return Err(Error::BudgetExceeded(cfg.iters));
    }
    check_single(state, problem)?;
    let params = SmoothingParams::new(cfg.delta, problem.dim())?;
    let counted = CountingObjective::new(problem.objective);
    let k = state.k;
    let v = if cfg.is_restart(k) {
        let mut v = Stacked::zeros(1, state.dim());
        local_estimates(&counted, problem, &state.x, &params, cfg.seed, k, cfg.mega_batch, &mut v)?;
        v
    } else {
        spider_update(
            &counted,
            problem,
            &state.x,
            &state.x_prev,
            &state.v,
            &params,
            cfg.seed,
            k,
            cfg.batch,
        )?
    };
    let x_next = primal_input(&state.x, &v, cfg.eta);
    state.x_prev = std::mem::replace(&mut state.x, x_next);
    state.v = v;
    state.k += 1;
    state.oracle_calls += counted.calls();
    Ok(StepReport {
        oracle_calls: counted.calls(),
        comm_rounds: 0,
        restart: None,
    })
}

pub fn gfm_run(problem: &Problem<'_>, cfg: &DgfmConfig, opts: &RunOptions) -> Result<RunOutput> {
    cfg.validate()?;
    let x0 = opts.start(problem.dim())?;
    let mut state = NetworkState::new(1, &x0);
    check_single(&state, problem)?;
    let mut rec = Recorder::new(problem.objective, opts, "gfm", cfg.delta, cfg.seed, 0.0, &x0)?;
    while state.k < cfg.iters {
        let report = gfm_step(&mut state, problem, cfg)?;
        rec.observe(&state, &report, state.k == cfg.iters)?;
    }
    Ok(rec.finish(state))
}

pub fn gfm_plus_run(problem: &Problem<'_>, cfg: &DgfmPlusConfig, opts: &RunOptions) -> Result<RunOutput> {
    cfg.validate()?;
    let x0 = opts.start(problem.dim())?;
    let mut state = NetworkState::new(1, &x0);
    check_single(&state, problem)?;
    let mut rec = Recorder::new(problem.objective, opts, "gfm-plus", cfg.delta, cfg.seed, 0.0, &x0)?;
    while state.k < cfg.iters {
        let k = state.k;
        let report = gfm_plus_step(&mut state, problem, cfg)?;
        if cfg.is_restart(k) {
            rec.mark_restart(k);
        }
        rec.observe(&state, &report, state.k == cfg.iters)?;
    }
    Ok(rec.finish(state))
}
