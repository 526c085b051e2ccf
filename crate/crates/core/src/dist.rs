//! One-sided kernel estimators of the marginal distribution `D_t(y)`.
//!
//! Every estimator is a weighted mixture over the values `Y_j` of a support
//! set, with weights from the spatial kernel at the target site:
//!
//! * `LcStep`: weighted empirical cdf with Nadaraya-Watson weights.
//! * `LcSmooth`: the same weights applied to `Lambda((y - Y_j) / h0)`.
//! * `Llh`: local-linear weights with negative entries zeroed and the rest renormalized.
//! * `Llm`: signed local-linear mixture whose density is clamped at zero and
//!   renormalized to unit mass.
//!
//! `Lambda` is the standard normal cdf. The clamped density of `Llm` is integrated
//! exactly: its negative intervals are located by root bracketing and their
//! mixture mass is removed, so no quadrature grid is involved.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::geometry::Coord;
use crate::kernels::{smoother_weights, FitMode, Gauss2d, KernelSpec, Smoother};
use crate::normal;
use crate::real::Real;

/// Kernel cdf estimator family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CdfKind {
    LcStep,
    LcSmooth,
    Llh,
    Llm,
}

impl CdfKind {
    pub fn is_local_linear(self) -> bool {
        matches!(self, CdfKind::Llh | CdfKind::Llm)
    }

    /// Smallest support size the estimator accepts.
    pub fn min_support(self) -> usize {
        if self.is_local_linear() {
            3
        } else {
            1
        }
    }
}

/// Substitutions made while building an estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CdfFallback {
    /// Local-linear design was degenerate; Nadaraya-Watson weights were used.
    DegenerateDesign,
    /// Local-linear weights had non-positive total; smoothed local-constant used.
    NonPositiveMass,
}

/// Components whose window reaches further than this many `h0` contribute
/// `Lambda` values within `1e-19` of 0 or 1.
const REACH: f64 = 9.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
struct NegInterval<T> {
    a: T,
    b: T,
    /// Mixture mass over `[a, b]` (negative).
    mass: T,
}

/// An estimated cdf. Immutable once built.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfEstimate<T> {
    pub kind: CdfKind,
    pub mode: FitMode,
    pub target: Coord,
    pub h0: T,
    pub fallback: Option<CdfFallback>,
    /// Support size before pruning of negligible weights.
    pub support: usize,
    values: Vec<T>,
    weights: Vec<T>,
    prefix: Vec<T>,
    neg: Vec<NegInterval<T>>,
    neg_prefix: Vec<T>,
    norm: T,
}

fn sorted_pairs<T: Real>(values: &[T], weights: &[T]) -> (Vec<T>, Vec<T>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&i, &j| {
        values[i]
            .partial_cmp(&values[j])
            .expect("finite values")
            .then(i.cmp(&j))
    });
    (
        idx.iter().map(|&i| values[i]).collect(),
        idx.iter().map(|&i| weights[i]).collect(),
    )
}

impl<T: Real> CdfEstimate<T> {
    /// Estimator from explicit values and weights. Weights are used as given for
    /// `LcStep`/`LcSmooth` after normalization to unit sum, clamped and renormalized
    /// for `Llh`, and normalized (signed) for `Llm`.
    pub fn from_weighted(kind: CdfKind, values: &[T], weights: &[T], h0: T) -> Result<Self> {
        if values.len() != weights.len() || values.is_empty() {
            return Err(Error::InsufficientData {
                context: "cdf estimate",
                needed: 1,
                got: values.len().min(weights.len()),
            });
        }
        if !(h0 > T::zero()) || !h0.is_finite() {
            return Err(Error::Domain(format!("h0 must be positive, got {h0}")));
        }
        if values.iter().chain(weights).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite cdf input".into()));
        }
        let mut kind_used = kind;
        let mut fallback = None;
        let mut w: Vec<T> = match kind {
            CdfKind::Llh => weights.iter().map(|&x| x.max(T::zero())).collect(),
            _ => weights.to_vec(),
        };
        let total: T = w.iter().copied().sum();
        if !(total > T::zero()) {
            if kind == CdfKind::Llm || kind == CdfKind::Llh {
                // no usable mass: smoothed local constant on the absolute kernel weights
                fallback = Some(CdfFallback::NonPositiveMass);
                kind_used = CdfKind::LcSmooth;
                w = weights.iter().map(|x| x.abs()).collect();
            }
            let t: T = w.iter().copied().sum();
            if !(t > T::zero()) {
                return Err(Error::Domain("cdf weights have no mass".into()));
            }
        }
        let total: T = w.iter().copied().sum();
        let wmax = w.iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let cut = T::lit(1e-14) * wmax;
        let (vals, ws): (Vec<T>, Vec<T>) = values
            .iter()
            .zip(&w)
            .filter(|(_, &x)| x.abs() >= cut && x != T::zero())
            .map(|(&v, &x)| (v, x / total))
            .unzip();
        let kept: T = ws.iter().copied().sum();
        let ws: Vec<T> = ws.into_iter().map(|x| x / kept).collect();
        let (values_sorted, weights_sorted) = sorted_pairs(&vals, &ws);
        let mut prefix = Vec::with_capacity(weights_sorted.len() + 1);
        prefix.push(T::zero());
        let mut acc = T::zero();
        for &x in &weights_sorted {
            acc += x;
            prefix.push(acc);
        }
        let mut est = Self {
            kind,
            mode: FitMode::Fitted,
            target: Coord::default(),
            h0,
            fallback,
            support: values.len(),
            values: values_sorted,
            weights: weights_sorted,
            prefix,
            neg: Vec::new(),
            neg_prefix: vec![T::zero()],
            norm: T::one(),
        };
        if kind_used == CdfKind::Llm {
            est.locate_negative_intervals();
        }
        if kind_used != kind {
            est.kind = kind_used;
            est.fallback = fallback;
        }
        Ok(est)
    }

    /// Weights of the mixture, aligned with [`CdfEstimate::values`] (sorted ascending).
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    fn reach(&self) -> T {
        T::lit(REACH) * self.h0
    }

    /// Index range of components within `reach` of `y`.
    fn window(&self, y: T) -> (usize, usize) {
        let r = self.reach();
        let lo = self.values.partition_point(|&v| v < y - r);
        let hi = self.values.partition_point(|&v| v <= y + r);
        (lo, hi)
    }

    /// Unclamped mixture cdf `sum w_j Lambda((y - Y_j) / h0)`.
    fn mixture_cdf(&self, y: T) -> T {
        let (lo, hi) = self.window(y);
        let mut s = self.prefix[lo];
        for j in lo..hi {
            s += self.weights[j] * normal::cdf((y - self.values[j]) / self.h0);
        }
        s
    }

    /// Unnormalized mixture density (without the `1/h0` factor).
    fn mixture_density(&self, y: T) -> T {
        let (lo, hi) = self.window(y);
        (lo..hi)
            .map(|j| self.weights[j] * normal::pdf((y - self.values[j]) / self.h0))
            .sum()
    }

    fn locate_negative_intervals(&mut self) {
        let r = self.reach();
        // d < 0 needs a negative component within reach
        let mut spans: Vec<(T, T)> = Vec::new();
        for (&v, &w) in self.values.iter().zip(&self.weights) {
            if w < T::zero() {
                match spans.last_mut() {
                    Some(last) if v - r <= last.1 => last.1 = v + r,
                    _ => spans.push((v - r, v + r)),
                }
            }
        }
        let step = self.h0 / T::lit(8.0);
        let mut neg: Vec<(T, T)> = Vec::new();
        for (lo, hi) in spans {
            let mut x0 = lo;
            let mut d0 = self.mixture_density(x0);
            let mut start = (d0 < T::zero()).then_some(lo);
            let mut done = false;
            while !done {
                let mut x1 = x0 + step;
                if x1 >= hi {
                    x1 = hi;
                    done = true;
                }
                let d1 = self.mixture_density(x1);
                if (d0 < T::zero()) != (d1 < T::zero()) {
                    let root = self.density_root(x0, x1, d0 < T::zero());
                    match start.take() {
                        Some(s) => neg.push((s, root)),
                        None => start = Some(root),
                    }
                }
                x0 = x1;
                d0 = d1;
            }
            if let Some(s) = start {
                neg.push((s, hi));
            }
        }
        let mut cum = T::zero();
        for (a, b) in neg {
            let mass = self.mixture_cdf(b) - self.mixture_cdf(a);
            if mass < T::zero() {
                cum += mass;
                self.neg.push(NegInterval { a, b, mass });
                self.neg_prefix.push(cum);
            }
        }
        self.norm = T::one() - cum;
    }

    /// Sign change of the density inside `[lo, hi]`; `neg_at_lo` gives the sign at `lo`.
    fn density_root(&self, mut lo: T, mut hi: T, neg_at_lo: bool) -> T {
        let tol = self.h0 * T::lit(1e-13).max(T::epsilon() * T::lit(4.0));
        for _ in 0..200 {
            let mid = (lo + hi) / T::lit(2.0);
            if hi - lo <= tol || mid == lo || mid == hi {
                break;
            }
            if (self.mixture_density(mid) < T::zero()) == neg_at_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo + hi) / T::lit(2.0)
    }

    /// `D(y)`, in `[0, 1]` and nondecreasing in `y`.
    pub fn evaluate(&self, y: T) -> T {
        let raw = match self.kind {
            CdfKind::LcStep => self.prefix[self.values.partition_point(|&v| v <= y)],
            CdfKind::LcSmooth | CdfKind::Llh => self.mixture_cdf(y),
            CdfKind::Llm => {
                let m = self.mixture_cdf(y);
                // negative intervals starting below y
                let i = self.neg.partition_point(|iv| iv.a < y);
                let mut removed = self.neg_prefix[i];
                if i > 0 {
                    let last = self.neg[i - 1];
                    if y < last.b {
                        removed = removed - last.mass + (m - self.mixture_cdf(last.a));
                    }
                }
                (m - removed) / self.norm
            }
        };
        raw.max(T::zero()).min(T::one())
    }

    /// Density of the estimate (`None` for the step estimator).
    pub fn density(&self, y: T) -> Option<T> {
        let d = self.mixture_density(y) / self.h0;
        match self.kind {
            CdfKind::LcStep => None,
            CdfKind::LcSmooth | CdfKind::Llh => Some(d),
            CdfKind::Llm => Some(d.max(T::zero()) / self.norm),
        }
    }

    /// Total mass removed by the clamping of `Llm` (zero otherwise).
    pub fn clamped_mass(&self) -> T {
        self.norm - T::one()
    }

    fn bracket(&self) -> (T, T) {
        let lo = self.values[0];
        let hi = self.values[self.values.len() - 1];
        let pad = T::lit(10.0) * self.h0 + T::lit(1e-3) * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Result of [`invert_cdf`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Inverse<T> {
    pub y: T,
    /// The requested level lay beyond the numerical tail mass; `y` is a bracket edge.
    pub tail_clamped: bool,
}

/// `D^{-1}(u)`; for the step estimator the generalized inverse `inf{y : D(y) >= u}`.
pub fn invert_cdf<T: Real>(d: &CdfEstimate<T>, u: T) -> Result<Inverse<T>> {
    if !(u > T::zero() && u < T::one()) {
        return Err(Error::Domain(format!(
            "cdf level must lie in (0, 1), got {u}"
        )));
    }
    if d.kind == CdfKind::LcStep {
        let i = d.prefix[1..]
            .partition_point(|&p| p < u)
            .min(d.values.len() - 1);
        return Ok(Inverse {
            y: d.values[i],
            tail_clamped: false,
        });
    }
    let (mut lo, mut hi) = d.bracket();
    if d.evaluate(lo) > u {
        return Ok(Inverse {
            y: lo,
            tail_clamped: true,
        });
    }
    if d.evaluate(hi) < u {
        return Ok(Inverse {
            y: hi,
            tail_clamped: true,
        });
    }
    let scale = lo.abs().max(hi.abs()).max(d.h0);
    let tol = scale * T::lit(1e-13).max(T::epsilon() * T::lit(4.0));
    for _ in 0..300 {
        let mid = (lo + hi) / T::lit(2.0);
        if hi - lo <= tol || mid == lo || mid == hi {
            break;
        }
        if d.evaluate(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Inverse {
        y: (lo + hi) / T::lit(2.0),
        tail_clamped: false,
    })
}

/// Mixture weights at `target` over `support` for the given estimator kind.
pub(crate) fn kind_weights<T: Real>(
    kernel: &Gauss2d<T>,
    support: &[Coord],
    target: Coord,
    kind: CdfKind,
    n_region: usize,
) -> Result<(Vec<T>, bool)> {
    let needed = kind.min_support();
    if support.len() < needed {
        return Err(Error::InsufficientData {
            context: "cdf support",
            needed,
            got: support.len(),
        });
    }
    let smoother = if kind.is_local_linear() {
        Smoother::Ll
    } else {
        Smoother::Nw
    };
    let sw = smoother_weights(kernel, support, target, smoother, n_region);
    Ok((sw.weights, sw.fell_back))
}

/// Build an estimate at `target` from the values of `field` on `support`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn estimate_with_kernel<T: Real>(
    field: &FieldGrid<T>,
    kernel: &Gauss2d<T>,
    support: &[Coord],
    target: Coord,
    kind: CdfKind,
    mode: FitMode,
    h0: T,
    n_region: usize,
) -> Result<CdfEstimate<T>> {
    let (weights, fell_back) = kind_weights(kernel, support, target, kind, n_region)?;
    let values = field.gather(support);
    let mass: T = match kind {
        CdfKind::Llh => weights.iter().map(|&w| w.max(T::zero())).sum(),
        _ => weights.iter().copied().sum(),
    };
    if !(mass > T::zero()) {
        let (nw, _) = kind_weights(kernel, support, target, CdfKind::LcSmooth, n_region)?;
        let mut est = CdfEstimate::from_weighted(CdfKind::LcSmooth, &values, &nw, h0)?;
        est.mode = mode;
        est.target = target;
        est.fallback = Some(CdfFallback::NonPositiveMass);
        return Ok(est);
    }
    let mut est = CdfEstimate::from_weighted(kind, &values, &weights, h0)?;
    est.mode = mode;
    est.target = target;
    if fell_back && est.fallback.is_none() {
        est.fallback = Some(CdfFallback::DegenerateDesign);
    }
    Ok(est)
}

/// `D_{t_k}` for position `k` (0-based) of a lex-sorted `ordering`.
///
/// The support is `t_0..=t_k` (fitted) or `t_0..t_k` (predictive).
pub fn estimate_cdf<T: Real>(
    field: &FieldGrid<T>,
    ordering: &[Coord],
    k: usize,
    kind: CdfKind,
    mode: FitMode,
    spec: KernelSpec<T>,
    h0: T,
) -> Result<CdfEstimate<T>> {
    if k >= ordering.len() {
        return Err(Error::Domain(format!(
            "position {k} beyond ordering of {}",
            ordering.len()
        )));
    }
    let end = match mode {
        FitMode::Fitted => k + 1,
        FitMode::Predictive => k,
    };
    let kernel = crate::trend::kernel_for(spec, ordering);
    estimate_with_kernel(
        field,
        &kernel,
        &ordering[..end],
        ordering[k],
        kind,
        mode,
        h0,
        ordering.len(),
    )
}

/// `D` at a site outside the support (e.g. the prediction target), using every support point.
pub fn estimate_cdf_at<T: Real>(
    field: &FieldGrid<T>,
    support: &[Coord],
    target: Coord,
    kind: CdfKind,
    spec: KernelSpec<T>,
    h0: T,
) -> Result<CdfEstimate<T>> {
    let mut sites = support.to_vec();
    sites.push(target);
    let kernel = crate::trend::kernel_for(spec, &sites);
    estimate_with_kernel(
        field,
        &kernel,
        support,
        target,
        kind,
        FitMode::Predictive,
        h0,
        support.len(),
    )
}
