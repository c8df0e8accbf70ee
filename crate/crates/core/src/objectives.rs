//! Finite-sum objectives accessed through function values only.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::SparseDataset;
use crate::error::{Error, Result};

/// A finite sum `f(x) = (1/n) Σ_ξ f(x; ξ)` exposing per-sample values.
///
/// Implementations must be deterministic in `(x, xi)`. Callers guarantee
/// `x.len() == dim()` and `xi < n_samples()`; use [`check_sample`] when the
/// index comes from outside.
pub trait StochasticObjective: Send + Sync {
    fn n_samples(&self) -> usize;

    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64], xi: usize) -> f64;

    /// Known bound on the per-sample Lipschitz constant, if any.
    fn lipschitz_hint(&self) -> Option<f64> {
        None
    }
}

impl<T: StochasticObjective + ?Sized> StochasticObjective for Arc<T> {
    fn n_samples(&self) -> usize {
        (**self).n_samples()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64], xi: usize) -> f64 {
        (**self).eval(x, xi)
    }
    fn lipschitz_hint(&self) -> Option<f64> {
        (**self).lipschitz_hint()
    }
}

impl<T: StochasticObjective + ?Sized> StochasticObjective for &T {
    fn n_samples(&self) -> usize {
        (**self).n_samples()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64], xi: usize) -> f64 {
        (**self).eval(x, xi)
    }
    fn lipschitz_hint(&self) -> Option<f64> {
        (**self).lipschitz_hint()
    }
}

pub fn check_sample(obj: &dyn StochasticObjective, xi: usize) -> Result<()> {
    if xi >= obj.n_samples() {
        return Err(Error::SampleIndex {
            index: xi,
            n: obj.n_samples(),
        });
    }
    Ok(())
}

pub(crate) fn check_dim(obj: &dyn StochasticObjective, x: &[f64]) -> Result<()> {
    if x.len() != obj.dim() {
        return Err(Error::shape(format!(
            "point has dimension {}, objective expects {}",
            x.len(),
            obj.dim()
        )));
    }
    Ok(())
}

/// Hinge loss `max(1 − t, 0)`.
#[inline]
pub fn hinge(t: f64) -> f64 {
    (1.0 - t).max(0.0)
}

/// Nonconvex SVM: `f(x; ξ) = max(1 − b_ξ a_ξᵀx, 0) + λ Σ_j min(|x_j|, α)`.
///
/// The capped-ℓ1 term is included in full in every per-sample value.
#[derive(Debug, Clone)]
pub struct CappedL1Svm {
    data: Arc<SparseDataset>,
    lambda: f64,
    alpha: f64,
}

impl CappedL1Svm {
    pub const DEFAULT_ALPHA: f64 = 2.0;

    pub fn new(data: impl Into<Arc<SparseDataset>>, lambda: f64, alpha: f64) -> Result<Self> {
        let data = data.into();
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::param(format!("lambda must be positive, got {lambda}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::param(format!("alpha must be positive, got {alpha}")));
        }
        if data.is_empty() {
            return Err(Error::param("dataset is empty"));
        }
        if data.labels.len() != data.len() || data.labels.iter().any(|&b| b != 1.0 && b != -1.0) {
            return Err(Error::param("labels must be ±1, one per row"));
        }
        if data
            .rows
            .iter()
            .any(|r| r.indices.last().is_some_and(|&j| j as usize >= data.dim))
        {
            return Err(Error::shape("feature index beyond dataset dimension"));
        }
        Ok(Self {
            data,
            lambda,
            alpha,
        })
    }

    /// `λ = 1e-5 / n`, `α = 2`.
    pub fn with_defaults(data: impl Into<Arc<SparseDataset>>) -> Result<Self> {
        let data = data.into();
        let lambda = 1e-5 / data.len().max(1) as f64;
        Self::new(data, lambda, Self::DEFAULT_ALPHA)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn data(&self) -> &SparseDataset {
        &self.data
    }

    /// `γ(x) = λ Σ_j min(|x_j|, α)`.
    pub fn regularizer(&self, x: &[f64]) -> f64 {
        self.lambda * x.iter().map(|v| v.abs().min(self.alpha)).sum::<f64>()
    }

    pub fn sample_eval(&self, x: &[f64], xi: usize) -> Result<f64> {
        check_sample(self, xi)?;
        check_dim(self, x)?;
        Ok(self.eval(x, xi))
    }
}

impl StochasticObjective for CappedL1Svm {
    fn n_samples(&self) -> usize {
        self.data.len()
    }

    fn dim(&self) -> usize {
        self.data.dim
    }

    fn eval(&self, x: &[f64], xi: usize) -> f64 {
        let margin = self.data.labels[xi] * self.data.rows[xi].dot(x);
        hinge(margin) + self.regularizer(x)
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        let max_row = self
            .data
            .rows
            .iter()
            .map(|r| r.norm())
            .fold(0.0, f64::max);
        Some(max_row + self.lambda * (self.data.dim as f64).sqrt())
    }
}

/// `f(x; ξ) = ‖x‖²` for every ξ.
///
/// Sphere symmetry makes its smoothed surrogate exact:
/// `f_δ(x) = ‖x‖² + δ²` and `∇f_δ(x) = 2x`.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticTest {
    dim: usize,
    copies: usize,
}

impl QuadraticTest {
    pub fn new(dim: usize) -> Result<Self> {
        Self::replicated(dim, 1)
    }

    /// `copies` identical samples, so it can be partitioned across agents.
    pub fn replicated(dim: usize, copies: usize) -> Result<Self> {
        if dim == 0 || copies == 0 {
            return Err(Error::param("quadratic test needs d ≥ 1 and at least one sample"));
        }
        Ok(Self { dim, copies })
    }

    pub fn smoothed_value(x: &[f64], delta: f64) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>() + delta * delta
    }

    pub fn smoothed_gradient(x: &[f64]) -> Vec<f64> {
        x.iter().map(|v| 2.0 * v).collect()
    }
}

pub fn make_quadratic_test(dim: usize) -> Result<QuadraticTest> {
    QuadraticTest::new(dim)
}

impl StochasticObjective for QuadraticTest {
    fn n_samples(&self) -> usize {
        self.copies
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], _xi: usize) -> f64 {
        x.iter().map(|v| v * v).sum()
    }
}

/// `f(x; ξ) = Σ_j |x_j|`, `√d`-Lipschitz and nonsmooth at every axis plane.
#[derive(Debug, Clone, Copy)]
pub struct AbsTest {
    dim: usize,
    copies: usize,
}

impl AbsTest {
    pub fn replicated(dim: usize, copies: usize) -> Result<Self> {
        if dim == 0 || copies == 0 {
            return Err(Error::param("abs test needs d ≥ 1 and at least one sample"));
        }
        Ok(Self { dim, copies })
    }
}

impl StochasticObjective for AbsTest {
    fn n_samples(&self) -> usize {
        self.copies
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], _xi: usize) -> f64 {
        x.iter().map(|v| v.abs()).sum()
    }
    fn lipschitz_hint(&self) -> Option<f64> {
        Some((self.dim as f64).sqrt())
    }
}

/// Objective from a closure `(x, ξ) -> value`.
pub struct FnObjective<F> {
    dim: usize,
    n: usize,
    lipschitz: Option<f64>,
    f: F,
}

impl<F> FnObjective<F>
where
    F: Fn(&[f64], usize) -> f64 + Send + Sync,
{
    pub fn new(dim: usize, n: usize, f: F) -> Self {
        Self {
            dim,
            n,
            lipschitz: None,
            f,
        }
    }

    pub fn with_lipschitz(mut self, l: f64) -> Self {
        self.lipschitz = Some(l);
        self
    }
}

impl<F> StochasticObjective for FnObjective<F>
where
    F: Fn(&[f64], usize) -> f64 + Send + Sync,
{
    fn n_samples(&self) -> usize {
        self.n
    }
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64], xi: usize) -> f64 {
        (self.f)(x, xi)
    }
    fn lipschitz_hint(&self) -> Option<f64> {
        self.lipschitz
    }
}

/// `(1/n) Σ_ξ f(x; ξ)`. Measurement only; not an optimizer oracle call.
pub fn full_loss(obj: &dyn StochasticObjective, x: &[f64]) -> f64 {
    let n = obj.n_samples();
    (0..n).map(|xi| obj.eval(x, xi)).sum::<f64>() / n as f64
}

/// Empirical lower estimate of the per-sample Lipschitz constant around the
/// origin. See [`estimate_lipschitz_around`].
pub fn estimate_lipschitz<R: Rng + ?Sized>(
    obj: &dyn StochasticObjective,
    probes: usize,
    radius: f64,
    rng: &mut R,
) -> Result<f64> {
    let center = vec![0.0; obj.dim()];
    estimate_lipschitz_around(obj, &center, probes, radius, rng)
}

/// Max of `|f(x;ξ) − f(y;ξ)| / ‖x − y‖` over sampled triples in the ball of
/// `radius` around `center`. Each probe tries one random pair and one pair
/// aligned with a forward-difference slope direction at `x`. The result is a
/// lower bound on the true constant.
pub fn estimate_lipschitz_around<R: Rng + ?Sized>(
    obj: &dyn StochasticObjective,
    center: &[f64],
    probes: usize,
    radius: f64,
    rng: &mut R,
) -> Result<f64> {
    if probes < 2 {
        return Err(Error::param("need at least 2 probes"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::param("probe radius must be positive"));
    }
    check_dim(obj, center)?;
    let d = obj.dim();
    let h = radius * 1e-4;
    let mut best = 0.0f64;
    let mut y = vec![0.0; d];
    let mut slope = vec![0.0; d];
    for _ in 0..probes {
        let xi = rng.random_range(0..obj.n_samples());
        let x = point_in_ball(center, radius, rng);
        let fx = obj.eval(&x, xi);

        let other = point_in_ball(center, radius, rng);
        let gap = dist_of(&x, &other);
        if gap > 0.0 {
            best = best.max((obj.eval(&other, xi) - fx).abs() / gap);
        }

        y.copy_from_slice(&x);
        for j in 0..d {
            y[j] = x[j] + h;
            slope[j] = (obj.eval(&y, xi) - fx) / h;
            y[j] = x[j];
        }
        let norm = slope.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            y.iter_mut()
                .zip(&x)
                .zip(&slope)
                .for_each(|((yj, xj), sj)| *yj = xj + h * sj / norm);
            best = best.max((obj.eval(&y, xi) - fx).abs() / dist_of(&y, &x));
        }
    }
    Ok(best)
}

fn dist_of(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn point_in_ball<R: Rng + ?Sized>(center: &[f64], radius: f64, rng: &mut R) -> Vec<f64> {
    let d = center.len();
    let mut dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    dir.iter_mut()
        .zip(center)
        .for_each(|(v, c)| *v = c + r * *v / n);
    dir
}
