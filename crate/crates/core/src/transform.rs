//! The model-free transform: uniformize, gaussianize, whiten, and its inverse.
//!
//! Forward: `u_k = D_{t_k}(Y_{t_k})`, `z_k = Phi^{-1}(u_k)`, `eps = C_n^{-1} z` where
//! `C_n` is the Cholesky factor of the correlation matrix of `z` implied by a
//! causal AR model fitted to `z`. Inverse at the next site:
//! `g(x) = D_{n+1}^{-1}(Phi(c_1 eps_1 + ... + c_n eps_n + c_{n+1} x))` with `c` the
//! last row of the factor of the extended matrix.

use serde::{Deserialize, Serialize};

use crate::ar2d::{
    cov_matrix_from_table, fit_from_autocov, lag_extent, model_autocov, sample_autocov,
    select_order, ArModel2D, AutocovTable, CovMatrix, Criterion,
};
use crate::dist::{estimate_with_kernel, invert_cdf, CdfEstimate, CdfKind};
use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::geometry::{ros_lags, Coord, NshpRegion};
use crate::kernels::{FitMode, Gauss2d, KernelSpec};
use crate::linalg::LowerTriangular;
use crate::normal;
use crate::real::Real;
use crate::trend::{kernel_for, DEFAULT_WARMUP};

/// Uniforms are clipped to `[U_CLIP, 1 - U_CLIP]` before the normal quantile.
pub const U_CLIP: f64 = 1e-7;

/// How the AR model for the gaussianized series is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArOrderConfig {
    pub p_max: usize,
    pub q_max: usize,
    pub criterion: Criterion,
    /// Skip selection and fit this `(p, q)`.
    pub fixed: Option<(usize, usize)>,
}

impl Default for ArOrderConfig {
    fn default() -> Self {
        Self {
            p_max: 2,
            q_max: 2,
            criterion: Criterion::Bic,
            fixed: None,
        }
    }
}

impl ArOrderConfig {
    /// Fit (or select) the model on the observed cells of `w`.
    pub fn fit<T: Real>(&self, w: &FieldGrid<T>) -> Result<ArModel2D<T>> {
        match self.fixed {
            Some((p, q)) => {
                let ros = ros_lags(p, q)?;
                let acov = sample_autocov(w, p, 2 * q)?;
                fit_from_autocov(&acov, &ros)
            }
            None => Ok(select_order(w, self.p_max, self.q_max, self.criterion)?.model),
        }
    }
}

/// Configuration of the forward transform.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransformConfig<T> {
    pub kind: CdfKind,
    pub mode: FitMode,
    pub b: T,
    pub h0: T,
    pub ar: ArOrderConfig,
    /// Leading positions left out of the transform (their values still enter the cdf supports).
    pub warmup: usize,
}

impl<T: Real> TransformConfig<T> {
    pub fn new(kind: CdfKind, mode: FitMode, b: T, h0: T) -> Self {
        Self {
            kind,
            mode,
            b,
            h0,
            ar: ArOrderConfig::default(),
            warmup: DEFAULT_WARMUP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        KernelSpec::new(self.b)?;
        if !(self.h0 > T::zero()) || !self.h0.is_finite() {
            return Err(Error::Config(format!(
                "h0 must be positive, got {}",
                self.h0
            )));
        }
        if self.kind.is_local_linear() && self.mode == FitMode::Predictive && self.warmup < 3 {
            return Err(Error::Config(
                "local-linear cdfs need a warm-up of at least 3".into(),
            ));
        }
        if self.kind.is_local_linear() && self.warmup < 2 {
            return Err(Error::Config(
                "local-linear cdfs need a warm-up of at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// State of the forward transform over one causal region.
#[derive(Clone, Debug)]
pub struct TransformState<T: Real> {
    /// Next site (the center of the region).
    pub target: Coord,
    /// Full lex ordering of the region.
    pub ordering: Vec<Coord>,
    /// Transformed sites: `ordering[warmup..]`.
    pub positions: Vec<Coord>,
    pub u: Vec<T>,
    pub z: Vec<T>,
    pub eps: Vec<T>,
    pub model: ArModel2D<T>,
    /// Model autocovariances covering every lag among `positions` and `target`.
    pub table: AutocovTable<T>,
    pub gamma: CovMatrix<T>,
    /// Positions whose uniform had to be clipped.
    pub u_clips: usize,
    /// Positions whose cdf used a fallback estimator.
    pub cdf_fallbacks: usize,
    pub config: TransformConfig<T>,
}

impl<T: Real> TransformState<T> {
    pub fn n(&self) -> usize {
        self.positions.len()
    }

    pub fn chol_lower(&self) -> &LowerTriangular<T> {
        &self.gamma.factor
    }
}

pub(crate) fn clip_u<T: Real>(u: T) -> T {
    u.max(T::lit(U_CLIP)).min(T::one() - T::lit(U_CLIP))
}

/// Per-position cdf estimates used by the transform (recomputed on demand).
pub fn position_cdf<T: Real>(
    field: &FieldGrid<T>,
    kernel: &Gauss2d<T>,
    ordering: &[Coord],
    k: usize,
    config: &TransformConfig<T>,
) -> Result<CdfEstimate<T>> {
    let end = match config.mode {
        FitMode::Fitted => k + 1,
        FitMode::Predictive => k,
    };
    estimate_with_kernel(
        field,
        kernel,
        &ordering[..end],
        ordering[k],
        config.kind,
        config.mode,
        config.h0,
        ordering.len(),
    )
    .map_err(|e| e.at(k))
}

/// Uniforms `u_k = D_{t_k}(Y_{t_k})` for `k >= warmup`, clipped; returns `(u, clips, fallbacks)`.
pub fn uniformize<T: Real>(
    field: &FieldGrid<T>,
    ordering: &[Coord],
    config: &TransformConfig<T>,
    kernel: &Gauss2d<T>,
) -> Result<(Vec<T>, usize, usize)> {
    let mut u = Vec::with_capacity(ordering.len().saturating_sub(config.warmup));
    let (mut clips, mut fallbacks) = (0, 0);
    for k in config.warmup..ordering.len() {
        let d = position_cdf(field, kernel, ordering, k, config)?;
        fallbacks += usize::from(d.fallback.is_some());
        let raw = d.evaluate(field.get(ordering[k]));
        let c = clip_u(raw);
        clips += usize::from(c != raw);
        u.push(c);
    }
    Ok((u, clips, fallbacks))
}

/// Whitening of an already-gaussianized series `z` on lex-sorted `positions`,
/// with the AR model fitted to `z` and the covariance table extended to `target`.
pub fn whiten<T: Real>(
    positions: &[Coord],
    z: &[T],
    bounds: Coord,
    target: Coord,
    ar: &ArOrderConfig,
) -> Result<(ArModel2D<T>, AutocovTable<T>, CovMatrix<T>, Vec<T>)> {
    let n = (bounds.t1 * bounds.t2) as usize;
    let mut values = vec![T::zero(); n];
    let mut mask = vec![false; n];
    for (&c, &v) in positions.iter().zip(z) {
        values[c.index(bounds)] = v;
        mask[c.index(bounds)] = true;
    }
    let lattice = FieldGrid::with_mask(bounds.t1 as usize, bounds.t2 as usize, values, mask)?;
    let model = ar.fit(&lattice)?;
    let mut sites = positions.to_vec();
    sites.push(target);
    let (k, l) = lag_extent(&sites);
    let table = model_autocov(&model, k, l)?;
    let gamma = cov_matrix_from_table(&table, positions)?;
    let eps = gamma.factor.forward_solve(z);
    Ok((model, table, gamma, eps))
}

/// Run the forward transform over `region` (whose center is the next site).
pub fn forward_transform<T: Real>(
    field: &FieldGrid<T>,
    region: &NshpRegion,
    config: &TransformConfig<T>,
) -> Result<TransformState<T>> {
    config.validate()?;
    let ordering = &region.coords;
    if ordering.len() <= config.warmup {
        return Err(Error::InsufficientData {
            context: "model-free transform",
            needed: config.warmup + 1,
            got: ordering.len(),
        });
    }
    if let Some(&c) = ordering.iter().find(|&&c| !field.is_observed(c)) {
        return Err(Error::Boundary { coord: c });
    }
    let mut sites = ordering.clone();
    sites.push(region.center);
    let kernel = kernel_for(KernelSpec::new(config.b)?, &sites);
    let (u, u_clips, cdf_fallbacks) = uniformize(field, ordering, config, &kernel)?;
    let z: Vec<T> = u.iter().map(|&x| normal::quantile(x)).collect();
    let positions = ordering[config.warmup..].to_vec();
    let (model, table, gamma, eps) =
        whiten(&positions, &z, region.bounds, region.center, &config.ar)?;
    Ok(TransformState {
        target: region.center,
        ordering: ordering.clone(),
        positions,
        u,
        z,
        eps,
        model,
        table,
        gamma,
        u_clips,
        cdf_fallbacks,
        config: *config,
    })
}

/// Last row of a lower Cholesky factor.
pub fn last_row<T: Real>(factor: &LowerTriangular<T>) -> Vec<T> {
    factor.row(factor.dim() - 1)
}

/// Coefficients `(c_1, ..., c_n, c_{n+1})` of the next site's gaussianized value
/// in terms of the innovations, by bordering the existing factor.
///
/// Falls back to factoring the full extended matrix when the bordered pivot is
/// not safely positive.
pub fn next_row<T: Real>(state: &TransformState<T>) -> Result<Vec<T>> {
    let g00 = state.table.gamma00();
    let gamma_next: Vec<T> = state
        .positions
        .iter()
        .map(|&p| state.table.get(state.target - p) / g00)
        .collect();
    let mut c = state.gamma.factor.forward_solve(&gamma_next);
    let norm2: T = c.iter().map(|&x| x * x).sum();
    let pivot = T::one() + T::lit(state.gamma.jitter) - norm2;
    if pivot > T::lit(1e-10) {
        c.push(pivot.sqrt());
        return Ok(c);
    }
    let mut sites = state.positions.clone();
    sites.push(state.target);
    let full = cov_matrix_from_table(&state.table, &sites)?;
    Ok(last_row(&full.factor))
}

/// `g(x) = D^{-1}(Phi(sum c_i eps_i + c_{n+1} x))`; returns the value and whether the inverse hit a tail clamp.
pub fn predictive_g<T: Real>(
    eps: &[T],
    c: &[T],
    d_next: &CdfEstimate<T>,
    x: T,
) -> Result<(T, bool)> {
    if c.len() != eps.len() + 1 {
        return Err(Error::Domain(format!(
            "coefficient row has {} entries for {} innovations",
            c.len(),
            eps.len()
        )));
    }
    let base: T = eps.iter().zip(c).map(|(&e, &ci)| e * ci).sum();
    predictive_g_from_base(base, c[eps.len()], d_next, x)
}

pub(crate) fn predictive_g_from_base<T: Real>(
    base: T,
    c_last: T,
    d_next: &CdfEstimate<T>,
    x: T,
) -> Result<(T, bool)> {
    let u = clip_u(normal::cdf(base + c_last * x));
    let inv = invert_cdf(d_next, u)?;
    Ok((inv.y, inv.tail_clamped))
}

/// Generate the next observation from a future innovation `eps_next`.
pub fn generate_future<T: Real>(
    state: &TransformState<T>,
    c: &[T],
    d_next: &CdfEstimate<T>,
    eps_next: T,
) -> Result<T> {
    Ok(predictive_g(&state.eps, c, d_next, eps_next)?.0)
}
