//! Parameter prescriptions that make the convergence guarantees hold.
//!
//! The returned `beta_x`, `beta_y` and `alpha_*` are analysis constants,
//! reported for reference; the optimizers never consume them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smoothing::sigma_squared;

/// Smallest `rho` accepted by callers that floor a fully connected network.
pub const RHO_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremInputs {
    /// Spectral gap, strictly inside (0, 1).
    pub rho: f64,
    /// Lipschitz constant `L_f`.
    pub lipschitz: f64,
    pub dim: usize,
    pub delta: f64,
    /// Target stationarity `ε`.
    pub epsilon: f64,
    pub agents: usize,
    /// `Δ_δ = f_δ(x̄⁰) − inf f_δ` or an upper bound of it.
    pub delta_gap: f64,
    /// Constant in `L_δ = c·L_f·√d/δ`.
    pub c: f64,
}

impl TheoremInputs {
    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::param(format!(
                "rho must lie in (0, 1), got {}; floor a fully connected network at {RHO_FLOOR}",
                self.rho
            )));
        }
        let positive = [
            ("L_f", self.lipschitz),
            ("delta", self.delta),
            ("epsilon", self.epsilon),
            ("Delta_delta", self.delta_gap),
            ("c", self.c),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(format!("{name} must be positive, got {v}")));
            }
        }
        if self.dim == 0 || self.agents == 0 {
            return Err(Error::param("dimension and agent count must be positive"));
        }
        Ok(())
    }

    pub fn smoothness(&self) -> f64 {
        self.c * self.lipschitz * (self.dim as f64).sqrt() / self.delta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremParams {
    pub eta: f64,
    /// Every clause of the `min` defining `eta`.
    pub eta_clauses: Vec<f64>,
    pub beta_x: f64,
    pub beta_y: f64,
    pub alpha_1: f64,
    pub alpha_2: f64,
    /// Total iterations.
    pub iters: u64,
    pub sigma_sq: f64,
    /// `L_δ`.
    pub smoothness: f64,
    pub batch: Option<usize>,
    pub mega_batch: Option<usize>,
    pub period: Option<u64>,
    pub cycles: Option<u64>,
    pub gossip_rounds: Option<usize>,
    /// The gossip formula gave a value below 1 and was clamped.
    #[serde(default)]
    pub gossip_clamped: bool,
    pub inputs: TheoremInputs,
}

fn alpha(rho: f64) -> f64 {
    (1.0 - rho * rho) / (2.0 * rho * rho)
}

fn ceil_u64(v: f64) -> u64 {
    if v >= u64::MAX as f64 {
        u64::MAX
    } else {
        v.ceil().max(1.0) as u64
    }
}

fn ceil_usize(v: f64) -> usize {
    ceil_u64(v).min(usize::MAX as u64) as usize
}

/// Step size, tracking weights and iteration count for the gradient-tracking
/// method.
pub fn theorem_params_dgfm(inp: &TheoremInputs) -> Result<TheoremParams> {
    inp.validate()?;
    let r2 = inp.rho * inp.rho;
    let m = inp.agents as f64;
    let l = inp.lipschitz;
    let eps = inp.epsilon;
    let sigma_sq = sigma_squared(inp.dim, l)?;
    let sigma = sigma_sq.sqrt();
    let l_delta = inp.smoothness();

    let clauses = vec![
        (1.0 - r2).powi(2) / (48.0 * sigma * (1.0 + r2) * r2) * eps / l_delta,
        eps * eps / (32.0 * l_delta * (sigma_sq + l)),
        8.0 * (6.0 * m * sigma_sq).sqrt() / (eps * l_delta),
    ];
    let eta = clauses.iter().copied().fold(f64::INFINITY, f64::min);
    let beta_y = (1.0 - r2) * eps * eps / (384.0 * sigma_sq * r2 * (1.0 + r2)) * eta / m;
    let beta_x = 1152.0 * sigma_sq * r2 * (1.0 + r2) / (1.0 - r2).powi(2) * l_delta * l_delta
        / (eps * eps)
        * beta_y;
    let iters = f64::max(
        2.0 * (sigma_sq + l * l) * (1.0 - r2) / (3.0 * m * sigma_sq * (1.0 + r2)),
        32.0 * inp.delta_gap / (eps * eps * eta),
    );
    Ok(TheoremParams {
        eta,
        eta_clauses: clauses,
        beta_x,
        beta_y,
        alpha_1: alpha(inp.rho),
        alpha_2: alpha(inp.rho),
        iters: ceil_u64(iters),
        sigma_sq,
        smoothness: l_delta,
        batch: None,
        mega_batch: None,
        period: None,
        cycles: None,
        gossip_rounds: None,
        gossip_clamped: false,
        inputs: *inp,
    })
}

/// Raw (unrounded) gossip-round count of the variance-reduced method.
pub fn gossip_rounds_formula(inp: &TheoremInputs, sigma_sq: f64) -> f64 {
    let l2 = inp.lipschitz * inp.lipschitz;
    let num = (inp.c * inp.c * inp.epsilon).ln()
        - (36.0 * (sigma_sq + l2) * (1.0 - inp.rho * inp.rho)).ln();
    num / inp.rho.ln() + 2.0
}

/// Batch sizes, cycle length, gossip rounds, step size and cycle count for
/// the variance-reduced method. `iters = cycles · period`.
pub fn theorem_params_dgfm_plus(inp: &TheoremInputs) -> Result<TheoremParams> {
    inp.validate()?;
    let r2 = inp.rho * inp.rho;
    let m = inp.agents as f64;
    let d = inp.dim as f64;
    let l = inp.lipschitz;
    let l2 = l * l;
    let eps = inp.epsilon;
    let c2 = inp.c * inp.c;
    let delta = inp.delta;
    let sigma_sq = sigma_squared(inp.dim, l)?;
    let l_delta = inp.smoothness();

    let period = ceil_u64(c2 / (2.0 * delta));
    let t = period as f64;
    let eta_1 = (1.0 - r2).powf(1.5) * delta.sqrt() / r2 / (1.0 + r2).sqrt() / d.sqrt() / 24f64.sqrt();
    let inner = l2 / (m * eps)
        + 3.0 * (1.0 - r2) / (2.0 * c2) * (c2 * l2 / ((1.0 - r2) * delta) + 2.0 * r2 * l2 * m);
    let eta_2 = 1.0 / (2.0 * (3.0 * d * t).sqrt()) / inner.sqrt();
    let eta_3 = 0.5 / l_delta;
    let clauses = vec![eta_1, eta_2, eta_3];
    let eta = clauses.iter().copied().fold(f64::INFINITY, f64::min);

    let beta_y = (1.0 - r2) * delta * eta / (2.0 * r2 * r2 * c2 * m) * (c2 / (2.0 * delta) + 2.0 * t);
    let beta_x = (1.0 - r2).powi(2) / (2.0 * r2 * (1.0 + r2) * eta * eta) * beta_y;

    let batch = ceil_usize(d / (m * eps));
    let mega_batch = ceil_usize(sigma_sq / (12.0 * eps * eps));
    let raw_gossip = gossip_rounds_formula(inp, sigma_sq);
    let gossip_clamped = raw_gossip.is_nan() || raw_gossip < 1.0;
    if gossip_clamped {
        log::warn!("gossip-round formula gave {raw_gossip}; clamping to 1");
    }
    let gossip_rounds = if gossip_clamped { 1 } else { ceil_usize(raw_gossip) };
    let cycles = ceil_u64(24.0 * inp.delta_gap * delta / (eps * eps * eta * c2));
    Ok(TheoremParams {
        eta,
        eta_clauses: clauses,
        beta_x,
        beta_y,
        alpha_1: alpha(inp.rho),
        alpha_2: alpha(inp.rho),
        iters: cycles.saturating_mul(period),
        sigma_sq,
        smoothness: l_delta,
        batch: Some(batch),
        mega_batch: Some(mega_batch),
        period: Some(period),
        cycles: Some(cycles),
        gossip_rounds: Some(gossip_rounds),
        gossip_clamped,
        inputs: *inp,
    })
}
