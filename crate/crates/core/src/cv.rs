//! One-step-ahead cross-validation of the spatial bandwidth.
//!
//! `PRESS(b) = sum_{k >= k_o} (Yhat_k(b) - Y_k)^2` where `Yhat_k` predicts position
//! `k` of the lex ordering from positions `0..k` only. The fast variant uses the
//! delete-one trend estimate as the prediction; the full variant calls an
//! arbitrary [`OneStepPredictor`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::geometry::{Coord, NshpRegion};
use crate::kernels::{smoother_weights, KernelSpec, Smoother};
use crate::predictors::Method;
use crate::real::{mean_sd, Real};
use crate::trend::{kernel_for, DEFAULT_WARMUP};

/// Prediction loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Loss {
    /// Squared error (PRESS).
    L2,
    /// Absolute error (PRESAR).
    L1,
}

impl Loss {
    fn apply<T: Real>(self, err: T) -> T {
        match self {
            Loss::L2 => err * err,
            Loss::L1 => err.abs(),
        }
    }
}

/// First evaluated position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KoRule {
    /// `ceil(sqrt(n))`, at least the warm-up.
    Sqrt,
    Fixed(usize),
}

/// Mean implied by the cdf estimator of a method, used by the fast surrogate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Surrogate {
    /// Nadaraya-Watson mean.
    Nw,
    /// Local-linear mean.
    Ll,
    /// Local-linear weights with negative entries zeroed, renormalized.
    LlClamped,
}

impl Surrogate {
    pub fn for_method(method: Method) -> Self {
        match method {
            Method::MbLc | Method::MfLc => Surrogate::Nw,
            Method::MbLl | Method::MfLlm => Surrogate::Ll,
            Method::MfLlh => Surrogate::LlClamped,
        }
    }
}

/// Cross-validation settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(deserialize = "T: Real"))]
pub struct CvSpec<T> {
    /// Candidate bandwidths; `None` uses [`default_b_grid`].
    pub b_grid: Option<Vec<T>>,
    pub loss: Loss,
    pub k_o: KoRule,
    pub fast: bool,
    pub warmup: usize,
}

impl<T: Real> Default for CvSpec<T> {
    fn default() -> Self {
        Self {
            b_grid: None,
            loss: Loss::L2,
            k_o: KoRule::Sqrt,
            fast: true,
            warmup: DEFAULT_WARMUP,
        }
    }
}

impl<T: Real> CvSpec<T> {
    /// Sorted, deduplicated grid for a field with the given bounds.
    pub fn grid(&self, bounds: Coord) -> Result<Vec<T>> {
        let mut g = match &self.b_grid {
            Some(g) => g.clone(),
            None => default_b_grid(bounds),
        };
        if g.is_empty() {
            return Err(Error::Config("empty bandwidth grid".into()));
        }
        if let Some(b) = g.iter().find(|b| !(**b > T::zero()) || !b.is_finite()) {
            return Err(Error::Config(format!("bandwidth {b} is not positive")));
        }
        g.sort_by(|a, b| a.partial_cmp(b).unwrap());
        g.dedup();
        Ok(g)
    }

    pub fn k_o(&self, n: usize) -> usize {
        match self.k_o {
            KoRule::Sqrt => ((n as f64).sqrt().ceil() as usize).max(self.warmup),
            KoRule::Fixed(k) => k.max(self.warmup),
        }
    }
}

/// Eight log-spaced bandwidths from 2 to `max(n1, n2) / 3`.
pub fn default_b_grid<T: Real>(bounds: Coord) -> Vec<T> {
    let hi = (bounds.t1.max(bounds.t2) as f64 / 3.0).max(2.0);
    let (l0, l1) = (2.0f64.ln(), hi.ln());
    (0..8)
        .map(|i| T::lit((l0 + (l1 - l0) * i as f64 / 7.0).exp()))
        .collect()
}

/// `h0 = (b / max(n1, n2))^2`.
pub fn h0_rule<T: Real>(b: T, bounds: Coord) -> T {
    let h = b / T::from_usize_lossy(bounds.t1.max(bounds.t2) as usize);
    h * h
}

/// Plug-in value-axis bandwidth `1.06 sd T^{-1/5}` over the values on `support`.
pub fn plug_in_h0<T: Real>(field: &FieldGrid<T>, support: &[Coord]) -> T {
    let sd = mean_sd(&field.gather(support)).1;
    let t = T::from_usize_lossy(support.len().max(1));
    let h = T::lit(1.06) * sd * t.powf(T::lit(-0.2));
    if h > T::zero() {
        h
    } else {
        T::lit(1e-3)
    }
}

/// Predicts position `k` of `ordering` from positions `0..k` at bandwidth `b`.
pub trait OneStepPredictor<T>: Sync {
    fn predict(&self, field: &FieldGrid<T>, ordering: &[Coord], k: usize, b: T) -> Result<T>;
}

impl<T, F> OneStepPredictor<T> for F
where
    F: Fn(&FieldGrid<T>, &[Coord], usize, T) -> Result<T> + Sync,
{
    fn predict(&self, field: &FieldGrid<T>, ordering: &[Coord], k: usize, b: T) -> Result<T> {
        self(field, ordering, k, b)
    }
}

/// Delete-one trend mean of the chosen surrogate.
pub struct FastSurrogate {
    pub surrogate: Surrogate,
}

impl<T: Real> OneStepPredictor<T> for FastSurrogate {
    fn predict(&self, field: &FieldGrid<T>, ordering: &[Coord], k: usize, b: T) -> Result<T> {
        let kernel = kernel_for(KernelSpec::new(b)?, &ordering[..=k]);
        surrogate_mean(
            field,
            &kernel,
            &ordering[..k],
            ordering[k],
            self.surrogate,
            ordering.len(),
        )
    }
}

fn surrogate_mean<T: Real>(
    field: &FieldGrid<T>,
    kernel: &crate::kernels::Gauss2d<T>,
    support: &[Coord],
    target: Coord,
    surrogate: Surrogate,
    n_region: usize,
) -> Result<T> {
    if support.is_empty() {
        return Err(Error::InsufficientData {
            context: "surrogate mean",
            needed: 1,
            got: 0,
        });
    }
    let smoother = match surrogate {
        Surrogate::Nw => Smoother::Nw,
        _ => Smoother::Ll,
    };
    let sw = smoother_weights(kernel, support, target, smoother, n_region);
    if surrogate == Surrogate::LlClamped {
        let w: Vec<T> = sw.weights.iter().map(|&x| x.max(T::zero())).collect();
        let total: T = w.iter().copied().sum();
        if total > T::zero() {
            return Ok(w
                .iter()
                .zip(support)
                .map(|(&wj, &c)| wj * field.get(c))
                .sum::<T>()
                / total);
        }
        let nw = smoother_weights(kernel, support, target, Smoother::Nw, n_region);
        return Ok(nw.apply(support.iter().map(|&c| field.get(c))));
    }
    Ok(sw.apply(support.iter().map(|&c| field.get(c))))
}

/// Score of one bandwidth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvScore<T> {
    pub b: T,
    pub score: T,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Accumulated loss of one-step predictions over positions `k_o..n`.
///
/// Failed predictions are skipped and counted; more than 10% skips is an error.
pub fn cv_score<T: Real, P: OneStepPredictor<T> + ?Sized>(
    field: &FieldGrid<T>,
    region: &NshpRegion,
    b: T,
    predictor: &P,
    spec: &CvSpec<T>,
) -> Result<CvScore<T>> {
    let ordering = &region.coords;
    let n = ordering.len();
    let k_o = spec.k_o(n);
    if n <= k_o + 1 {
        return Err(Error::InsufficientData {
            context: "cross-validation",
            needed: k_o + 2,
            got: n,
        });
    }
    let mut score = T::zero();
    let (mut evaluated, mut skipped) = (0, 0);
    for k in k_o..n {
        evaluated += 1;
        match predictor.predict(field, ordering, k, b) {
            Ok(p) if p.is_finite() => score += spec.loss.apply(p - field.get(ordering[k])),
            _ => skipped += 1,
        }
    }
    if skipped * 10 > evaluated {
        return Err(Error::CrossValidation(format!(
            "b = {b}: {skipped} of {evaluated} positions failed"
        )));
    }
    Ok(CvScore {
        b,
        score,
        evaluated,
        skipped,
    })
}

/// Fast-surrogate score, computed with one kernel table for all positions.
pub fn fast_cv_score<T: Real>(
    field: &FieldGrid<T>,
    region: &NshpRegion,
    b: T,
    surrogate: Surrogate,
    spec: &CvSpec<T>,
) -> Result<CvScore<T>> {
    let ordering = &region.coords;
    let kernel = kernel_for(KernelSpec::new(b)?, ordering);
    let predictor = |f: &FieldGrid<T>, o: &[Coord], k: usize, _b: T| {
        surrogate_mean(f, &kernel, &o[..k], o[k], surrogate, o.len())
    };
    cv_score(field, region, b, &predictor, spec)
}

/// Bandwidth choice and the full score trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvSelection<T> {
    pub b: T,
    pub trace: Vec<CvTraceRow<T>>,
}

/// One grid point of a CV trace; `score` is `None` when the bandwidth failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvTraceRow<T> {
    pub b: T,
    pub score: Option<T>,
    pub skipped: usize,
    pub error: Option<String>,
}

/// Minimize a score over a sorted grid; ties go to the larger bandwidth.
pub fn argmin_grid<T: Real>(scores: &[(T, Option<T>)]) -> Option<T> {
    let mut best: Option<(T, T)> = None;
    for &(b, s) in scores {
        if let Some(s) = s {
            if best.is_none_or(|(_, bs)| s <= bs) {
                best = Some((b, s));
            }
        }
    }
    best.map(|(b, _)| b)
}

/// Evaluate every bandwidth of the grid (in parallel) and keep the minimizer.
pub fn select_bandwidth_with<T, F>(grid: &[T], score: F) -> Result<CvSelection<T>>
where
    T: Real,
    F: Fn(T) -> Result<CvScore<T>> + Sync,
{
    let mut grid = grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup();
    let trace: Vec<CvTraceRow<T>> = grid
        .par_iter()
        .map(|&b| match score(b) {
            Ok(s) => CvTraceRow {
                b,
                score: Some(s.score),
                skipped: s.skipped,
                error: None,
            },
            Err(e) => CvTraceRow {
                b,
                score: None,
                skipped: 0,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let pairs: Vec<(T, Option<T>)> = trace.iter().map(|r| (r.b, r.score)).collect();
    let b = argmin_grid(&pairs)
        .ok_or_else(|| Error::CrossValidation("every bandwidth in the grid failed".into()))?;
    Ok(CvSelection { b, trace })
}

/// Cross-validated bandwidth for `method` on `region`.
///
/// The fast variant scores the method's surrogate mean; otherwise `predictor`
/// must be supplied and is called at every evaluated position.
pub fn select_bandwidth<T: Real>(
    field: &FieldGrid<T>,
    region: &NshpRegion,
    method: Method,
    spec: &CvSpec<T>,
    predictor: Option<&dyn OneStepPredictor<T>>,
) -> Result<CvSelection<T>> {
    let grid = spec.grid(field.bounds())?;
    match (spec.fast, predictor) {
        (true, _) => {
            let s = Surrogate::for_method(method);
            select_bandwidth_with(&grid, |b| fast_cv_score(field, region, b, s, spec))
        }
        (false, Some(p)) => select_bandwidth_with(&grid, |b| cv_score(field, region, b, p, spec)),
        (false, None) => Err(Error::Config(
            "full cross-validation needs a predictor".into(),
        )),
    }
}
