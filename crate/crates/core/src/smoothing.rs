//! Two-point randomized-smoothing gradient estimators.
//!
//! For a direction `w` uniform on the unit sphere and a sample `ξ`,
//!
//! ```text
//! g(x; w, ξ) = d / (2δ) · (f(x + δw; ξ) − f(x − δw; ξ)) · w
//! ```
//!
//! is an unbiased estimate of `∇f_δ(x)`, the gradient of the smoothed
//! surrogate `f_δ(x) = E_u[f(x + δu)]` with `u` uniform in the unit ball.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::objectives::{check_dim, check_sample, StochasticObjective};

/// Unit vector on `S^{d−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    /// Normalizes `v`; fails on a zero or non-finite vector.
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::param("direction must be a nonzero finite vector"));
        }
        Ok(Self(v.into_iter().map(|a| a / n).collect()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|a| -a).collect())
    }
}

/// Normalized standard Gaussian, hence uniform on the sphere.
pub fn sample_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Direction> {
    if d == 0 {
        return Err(Error::shape("sphere dimension must be at least 1"));
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n2: f64 = v.iter().map(|a| a * a).sum();
        if n2 > 0.0 {
            let n = n2.sqrt();
            return Ok(Direction(v.into_iter().map(|a| a / n).collect()));
        }
    }
}

/// Sample/direction pairs `{(ξ_j, w_j)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pairs: Vec<(usize, Direction)>,
}

impl SampleBatch {
    pub fn new(pairs: Vec<(usize, Direction)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let d = pairs[0].1.dim();
        if pairs.iter().any(|(_, w)| w.dim() != d) {
            return Err(Error::shape("directions of unequal dimension"));
        }
        Ok(Self { pairs })
    }

    /// Draw `b` pairs: `ξ` uniform over `pool`, then `w` uniform on the
    /// sphere, pair by pair.
    pub fn draw<R: Rng + ?Sized>(pool: &[usize], b: usize, d: usize, rng: &mut R) -> Result<Self> {
        if b == 0 {
            return Err(Error::EmptyBatch);
        }
        if pool.is_empty() {
            return Err(Error::param("sample pool is empty"));
        }
        let mut pairs = Vec::with_capacity(b);
        for _ in 0..b {
            let xi = pool[rng.random_range(0..pool.len())];
            pairs.push((xi, sample_sphere(d, rng)?));
        }
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, Direction)] {
        &self.pairs
    }

    fn check(&self, obj: &dyn StochasticObjective) -> Result<()> {
        for (xi, w) in &self.pairs {
            check_sample(obj, *xi)?;
            if w.dim() != obj.dim() {
                return Err(Error::shape("direction dimension differs from objective"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    delta: f64,
    dim: usize,
}

impl SmoothingParams {
    pub fn new(delta: f64, dim: usize) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::param(format!("delta must be positive, got {delta}")));
        }
        if dim == 0 {
            return Err(Error::param("dimension must be at least 1"));
        }
        Ok(Self { delta, dim })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Smoothness `L_δ = c · L_f · √d / δ` of the surrogate.
    pub fn surrogate_smoothness(&self, lipschitz: f64, c: f64) -> f64 {
        c * lipschitz * (self.dim as f64).sqrt() / self.delta
    }
}

/// `f(x + δw; ξ) − f(x − δw; ξ)`, reusing `scratch`.
fn central_difference(
    obj: &dyn StochasticObjective,
    x: &[f64],
    delta: f64,
    w: &[f64],
    xi: usize,
    scratch: &mut [f64],
) -> f64 {
    scratch
        .iter_mut()
        .zip(x.iter().zip(w))
        .for_each(|(s, (a, b))| *s = a + delta * b);
    let plus = obj.eval(scratch, xi);
    scratch
        .iter_mut()
        .zip(x.iter().zip(w))
        .for_each(|(s, (a, b))| *s = a - delta * b);
    let minus = obj.eval(scratch, xi);
    plus - minus
}

fn check_params(obj: &dyn StochasticObjective, x: &[f64], params: &SmoothingParams) -> Result<()> {
    check_dim(obj, x)?;
    if params.dim != obj.dim() {
        return Err(Error::shape(format!(
            "smoothing dimension {} differs from objective dimension {}",
            params.dim,
            obj.dim()
        )));
    }
    Ok(())
}

/// Single two-point estimate `g(x; w, ξ)`; two objective evaluations.
pub fn two_point_estimate(
    obj: &dyn StochasticObjective,
    x: &[f64],
    params: &SmoothingParams,
    w: &Direction,
    xi: usize,
) -> Result<Vec<f64>> {
    check_params(obj, x, params)?;
    check_sample(obj, xi)?;
    if w.dim() != params.dim {
        return Err(Error::shape("direction dimension differs from objective"));
    }
    let mut scratch = vec![0.0; x.len()];
    let diff = central_difference(obj, x, params.delta, w.as_slice(), xi, &mut scratch);
    let scale = params.dim as f64 / (2.0 * params.delta) * diff;
    Ok(w.as_slice().iter().map(|wi| scale * wi).collect())
}

/// Mean of the two-point estimates over the batch; `2b` evaluations.
pub fn minibatch_estimate(
    obj: &dyn StochasticObjective,
    x: &[f64],
    params: &SmoothingParams,
    batch: &SampleBatch,
) -> Result<Vec<f64>> {
    check_params(obj, x, params)?;
    batch.check(obj)?;
    let mut out = vec![0.0; x.len()];
    let mut scratch = vec![0.0; x.len()];
    accumulate_minibatch(obj, x, params, batch, &mut scratch, &mut out);
    Ok(out)
}

/// Unchecked core of [`minibatch_estimate`]: overwrites `out`.
pub(crate) fn accumulate_minibatch(
    obj: &dyn StochasticObjective,
    x: &[f64],
    params: &SmoothingParams,
    batch: &SampleBatch,
    scratch: &mut [f64],
    out: &mut [f64],
) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let base = params.dim as f64 / (2.0 * params.delta);
    for (xi, w) in &batch.pairs {
        let diff = central_difference(obj, x, params.delta, w.as_slice(), *xi, scratch);
        let scale = base * diff;
        out.iter_mut()
            .zip(w.as_slice())
            .for_each(|(o, wi)| *o += scale * wi);
    }
    let inv_b = 1.0 / batch.len() as f64;
    out.iter_mut().for_each(|o| *o *= inv_b);
}

/// `g(x_new; S) − g(x_old; S)` with the identical `(ξ, w)` pairs at both
/// points; `4b` evaluations. Differences are taken per pair before scaling.
pub fn spider_difference(
    obj: &dyn StochasticObjective,
    x_new: &[f64],
    x_old: &[f64],
    params: &SmoothingParams,
    batch: &SampleBatch,
) -> Result<Vec<f64>> {
    if x_new.len() != x_old.len() {
        return Err(Error::shape(format!(
            "points of dimension {} and {}",
            x_new.len(),
            x_old.len()
        )));
    }
    check_params(obj, x_new, params)?;
    batch.check(obj)?;
    let mut out = vec![0.0; x_new.len()];
    let mut scratch = vec![0.0; x_new.len()];
    accumulate_spider(obj, x_new, x_old, params, batch, &mut scratch, &mut out);
    Ok(out)
}

pub(crate) fn accumulate_spider(
    obj: &dyn StochasticObjective,
    x_new: &[f64],
    x_old: &[f64],
    params: &SmoothingParams,
    batch: &SampleBatch,
    scratch: &mut [f64],
    out: &mut [f64],
) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let base = params.dim as f64 / (2.0 * params.delta);
    for (xi, w) in &batch.pairs {
        let w = w.as_slice();
        let new = central_difference(obj, x_new, params.delta, w, *xi, scratch);
        let old = central_difference(obj, x_old, params.delta, w, *xi, scratch);
        let scale = base * (new - old);
        out.iter_mut().zip(w).for_each(|(o, wi)| *o += scale * wi);
    }
    let inv_b = 1.0 / batch.len() as f64;
    out.iter_mut().for_each(|o| *o *= inv_b);
}

/// Monte Carlo estimate of a vector mean with its spread.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloGradient {
    pub mean: Vec<f64>,
    /// Per-coordinate standard error of `mean`.
    pub std_err: Vec<f64>,
    pub samples: usize,
}

impl MonteCarloGradient {
    pub fn norm(&self) -> f64 {
        self.mean.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `sqrt(Σ_j se_j²)`, the RMS size of `mean − E[mean]`; bounds the error
    /// of [`Self::norm`] in the same sense.
    pub fn norm_std_err(&self) -> f64 {
        self.std_err.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Average of `n_samples` independent two-point estimates at `x`, with `ξ`
/// uniform over all samples. Estimates `∇f_δ(x)`.
pub fn surrogate_grad_estimate<R: Rng + ?Sized>(
    obj: &dyn StochasticObjective,
    x: &[f64],
    params: &SmoothingParams,
    n_samples: usize,
    rng: &mut R,
) -> Result<MonteCarloGradient> {
    if n_samples == 0 {
        return Err(Error::param("need at least one Monte Carlo sample"));
    }
    check_params(obj, x, params)?;
    let d = x.len();
    let mut scratch = vec![0.0; d];
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    let base = d as f64 / (2.0 * params.delta);
    for _ in 0..n_samples {
        let xi = rng.random_range(0..obj.n_samples());
        let w = sample_sphere(d, rng)?;
        let scale = base * central_difference(obj, x, params.delta, w.as_slice(), xi, &mut scratch);
        for ((s, q), wi) in sum.iter_mut().zip(sum_sq.iter_mut()).zip(w.as_slice()) {
            let g = scale * wi;
            *s += g;
            *q += g * g;
        }
    }
    let n = n_samples as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_err = if n_samples > 1 {
        sum_sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| (((q - n * m * m) / (n - 1.0)).max(0.0) / n).sqrt())
            .collect()
    } else {
        vec![f64::INFINITY; d]
    };
    Ok(MonteCarloGradient {
        mean,
        std_err,
        samples: n_samples,
    })
}

/// Monte Carlo estimate of `f_δ(x) = E_u[f(x + δu)]` (u uniform in the unit
/// ball, ξ uniform); returns `(mean, standard error)`.
pub fn smoothed_value_estimate<R: Rng + ?Sized>(
    obj: &dyn StochasticObjective,
    x: &[f64],
    params: &SmoothingParams,
    n_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n_samples < 2 {
        return Err(Error::param("need at least two Monte Carlo samples"));
    }
    check_params(obj, x, params)?;
    let d = x.len();
    let mut point = vec![0.0; d];
    let (mut s, mut q) = (0.0, 0.0);
    for _ in 0..n_samples {
        let xi = rng.random_range(0..obj.n_samples());
        let w = sample_sphere(d, rng)?;
        let r = params.delta * rng.random::<f64>().powf(1.0 / d as f64);
        point
            .iter_mut()
            .zip(x.iter().zip(w.as_slice()))
            .for_each(|(p, (a, b))| *p = a + r * b);
        let v = obj.eval(&point, xi);
        s += v;
        q += v * v;
    }
    let n = n_samples as f64;
    let mean = s / n;
    let var = ((q - n * mean * mean) / (n - 1.0)).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// Second-moment constant `σ² = 16 √(2π) · d · L_f²` of the two-point
/// estimator.
pub fn sigma_squared(d: usize, lipschitz: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::param("dimension must be at least 1"));
    }
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::param(format!("L_f must be positive, got {lipschitz}")));
    }
    Ok(16.0 * (2.0 * std::f64::consts::PI).sqrt() * d as f64 * lipschitz * lipschitz)
}

/// Wraps an objective and counts every evaluation.
pub struct CountingObjective<O> {
    inner: O,
    calls: AtomicU64,
}

impl<O: StochasticObjective> CountingObjective<O> {
    pub fn new(inner: O) -> Self {
        Self {
            inner,
            calls: AtomicU64::new(0),
        }
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: StochasticObjective> StochasticObjective for CountingObjective<O> {
    fn n_samples(&self) -> usize {
        self.inner.n_samples()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn eval(&self, x: &[f64], xi: usize) -> f64 {
        self.calls.fetch_add(1, Ordering::Relaxed);
        self.inner.eval(x, xi)
    }
    fn lipschitz_hint(&self) -> Option<f64> {
        self.inner.lipschitz_hint()
    }
}
