//! One-sided estimation of the trend `mu(t)` and scale `sigma(t)`.
//!
//! For position `k` of a lexicographic ordering, the estimates are kernel
//! averages of `Y` and `Y^2` over the sites `t_1..=t_k` (fitted) or
//! `t_1..t_{k-1}` (predictive, delete-one). The same one-sided construction is
//! used at every position, including those in the interior of the grid, so the
//! reconstructed residuals share one distribution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::geometry::Coord;
use crate::kernels::{smoother_weights, FitMode, Gauss2d, KernelSpec, Smoother};
use crate::real::Real;

/// Number of leading positions treated as warm-up by default.
pub const DEFAULT_WARMUP: usize = 4;

/// Options of [`fit_trend`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendOptions {
    pub smoother: Smoother,
    pub mode: FitMode,
    /// Estimate `sigma(t)`; otherwise `sigma = 1`.
    pub heteroscedastic: bool,
    /// Leading positions flagged unusable (excluded from AR fits and CV sums).
    pub warmup: usize,
}

impl TrendOptions {
    pub fn new(smoother: Smoother, mode: FitMode) -> Self {
        Self {
            smoother,
            mode,
            heteroscedastic: false,
            warmup: DEFAULT_WARMUP,
        }
    }

    pub fn heteroscedastic(mut self, on: bool) -> Self {
        self.heteroscedastic = on;
        self
    }

    pub fn warmup(mut self, k: usize) -> Self {
        self.warmup = k;
        self
    }
}

/// Trend and scale estimates along an ordering.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrendFit<T> {
    pub ordering: Vec<Coord>,
    pub mu: Vec<T>,
    pub second_moment: Vec<T>,
    pub sigma: Vec<T>,
    pub usable: Vec<bool>,
    pub options: TrendOptions,
    pub b: T,
    pub sigma_floor: T,
    /// Positions where a local-linear fit fell back to Nadaraya-Watson.
    pub fallbacks: usize,
}

/// Standardized residuals `(Y - mu) / sigma` along an ordering.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResidualField<T> {
    pub ordering: Vec<Coord>,
    pub w: Vec<T>,
    pub usable: Vec<bool>,
    pub mode: FitMode,
}

impl<T: Real> ResidualField<T> {
    /// Scatter the usable residuals onto a masked lattice.
    pub fn to_lattice(&self, bounds: Coord) -> Result<FieldGrid<T>> {
        let n = (bounds.t1 * bounds.t2) as usize;
        let mut values = vec![T::zero(); n];
        let mut mask = vec![false; n];
        for ((&c, &w), &ok) in self.ordering.iter().zip(&self.w).zip(&self.usable) {
            if ok {
                values[c.index(bounds)] = w;
                mask[c.index(bounds)] = true;
            }
        }
        FieldGrid::with_mask(bounds.t1 as usize, bounds.t2 as usize, values, mask)
    }
}

/// `1e-8` times the sample sd of the field over `ordering` (or `1e-8` for a constant field).
pub fn sigma_floor<T: Real>(field: &FieldGrid<T>, ordering: &[Coord]) -> T {
    let sd = field.sd_over(ordering);
    let base = if sd > T::zero() { sd } else { T::one() };
    T::lit(1e-8) * base
}

pub(crate) fn kernel_for<T: Real>(spec: KernelSpec<T>, sites: &[Coord]) -> Gauss2d<T> {
    let (mut lo, mut hi) = (
        Coord::new(i64::MAX, i64::MAX),
        Coord::new(i64::MIN, i64::MIN),
    );
    for c in sites {
        lo = Coord::new(lo.t1.min(c.t1), lo.t2.min(c.t2));
        hi = Coord::new(hi.t1.max(c.t1), hi.t2.max(c.t2));
    }
    if sites.is_empty() {
        return Gauss2d::new(spec);
    }
    Gauss2d::with_table(spec, (hi.t1 - lo.t1) as usize, (hi.t2 - lo.t2) as usize)
}

/// Weighted mean, second moment and variance at `target` from the given support.
///
/// The variance `M - mu^2` is evaluated on values centered at `center` to avoid
/// cancellation when the local spread is small relative to the level.
pub(crate) fn local_moments<T: Real>(
    field: &FieldGrid<T>,
    kernel: &Gauss2d<T>,
    support: &[Coord],
    target: Coord,
    smoother: Smoother,
    n_region: usize,
    center: T,
) -> (T, T, T, bool) {
    let sw = smoother_weights(kernel, support, target, smoother, n_region);
    let mu = sw.apply(support.iter().map(|&c| field.get(c)));
    let m2 = sw.apply(support.iter().map(|&c| {
        let y = field.get(c);
        y * y
    }));
    let mu_c = sw.apply(support.iter().map(|&c| field.get(c) - center));
    let m2_c = sw.apply(support.iter().map(|&c| {
        let y = field.get(c) - center;
        y * y
    }));
    (mu, m2, m2_c - mu_c * mu_c, sw.fell_back)
}

fn scale<T: Real>(var: T, floor: T, heteroscedastic: bool) -> T {
    if heteroscedastic {
        var.max(floor * floor).sqrt()
    } else {
        T::one()
    }
}

/// Fit `mu` and `sigma` at every position of `ordering`.
pub fn fit_trend<T: Real>(
    field: &FieldGrid<T>,
    ordering: &[Coord],
    spec: KernelSpec<T>,
    options: &TrendOptions,
) -> Result<TrendFit<T>> {
    if ordering.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(
            "trend ordering must be strictly lex-increasing".into(),
        ));
    }
    if let Some(&c) = ordering.iter().find(|&&c| !field.is_observed(c)) {
        return Err(Error::Boundary { coord: c });
    }
    let n = ordering.len();
    let kernel = kernel_for(spec, ordering);
    let floor = sigma_floor(field, ordering);
    let center = crate::real::mean_sd(&field.gather(ordering)).0;
    let mut fit = TrendFit {
        ordering: ordering.to_vec(),
        mu: Vec::with_capacity(n),
        second_moment: Vec::with_capacity(n),
        sigma: Vec::with_capacity(n),
        usable: Vec::with_capacity(n),
        options: *options,
        b: spec.b(),
        sigma_floor: floor,
        fallbacks: 0,
    };
    for (k, &target) in ordering.iter().enumerate() {
        let end = match options.mode {
            FitMode::Fitted => k + 1,
            FitMode::Predictive => k,
        };
        if end == 0 {
            fit.mu.push(T::zero());
            fit.second_moment.push(T::zero());
            fit.sigma.push(T::one());
            fit.usable.push(false);
            continue;
        }
        let (mu, m2, var, fell_back) = local_moments(
            field,
            &kernel,
            &ordering[..end],
            target,
            options.smoother,
            n,
            center,
        );
        fit.fallbacks += usize::from(fell_back);
        fit.mu.push(mu);
        fit.second_moment.push(m2);
        fit.sigma.push(scale(var, floor, options.heteroscedastic));
        fit.usable.push(k >= options.warmup);
    }
    Ok(fit)
}

/// Trend and scale at an unobserved `target` using every site of `support`.
///
/// At the prediction site fitted and predictive estimates coincide.
pub fn trend_at<T: Real>(
    field: &FieldGrid<T>,
    support: &[Coord],
    target: Coord,
    spec: KernelSpec<T>,
    options: &TrendOptions,
) -> Result<(T, T)> {
    if support.is_empty() {
        return Err(Error::InsufficientData {
            context: "trend at target",
            needed: 1,
            got: 0,
        });
    }
    let mut sites = support.to_vec();
    sites.push(target);
    let kernel = kernel_for(spec, &sites);
    let center = crate::real::mean_sd(&field.gather(support)).0;
    let (mu, _, var, _) = local_moments(
        field,
        &kernel,
        support,
        target,
        options.smoother,
        support.len(),
        center,
    );
    let floor = sigma_floor(field, support);
    Ok((mu, scale(var, floor, options.heteroscedastic)))
}

/// Standardized residuals `w_k = (Y_{t_k} - mu_k) / sigma_k`.
pub fn residuals<T: Real>(field: &FieldGrid<T>, fit: &TrendFit<T>) -> ResidualField<T> {
    let w = fit
        .ordering
        .iter()
        .zip(fit.mu.iter().zip(&fit.sigma))
        .map(|(&c, (&mu, &sigma))| (field.get(c) - mu) / sigma)
        .collect();
    ResidualField {
        ordering: fit.ordering.clone(),
        w,
        usable: fit.usable.clone(),
        mode: fit.options.mode,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::nshp_region;

    fn spec(b: f64) -> KernelSpec<f64> {
        KernelSpec::new(b).unwrap()
    }

    #[test]
    fn constant_field_is_reproduced() {
        let field = FieldGrid::from_fn(6, 6, |_| 2.5).unwrap();
        let region = nshp_region(Coord::new(5, 3), field.bounds()).unwrap();
        for mode in [FitMode::Fitted, FitMode::Predictive] {
            let opts = TrendOptions::new(Smoother::Nw, mode).heteroscedastic(true);
            let fit = fit_trend(&field, &region.coords, spec(1.5), &opts).unwrap();
            for k in 1..fit.mu.len() {
                assert!((fit.mu[k] - 2.5).abs() < 1e-14);
                assert!((fit.second_moment[k] - 6.25).abs() < 1e-13);
                assert_eq!(fit.sigma[k], fit.sigma_floor);
            }
        }
    }

    #[test]
    fn local_linear_reproduces_plane() {
        let field = FieldGrid::from_fn(12, 12, |c| 0.3 + 0.7 * c.t2 as f64).unwrap();
        let region = nshp_region(Coord::new(11, 6), field.bounds()).unwrap();
        let opts = TrendOptions::new(Smoother::Ll, FitMode::Fitted);
        let fit = fit_trend(&field, &region.coords, spec(50.0), &opts).unwrap();
        for (k, &c) in region.coords.iter().enumerate().skip(40) {
            assert!((fit.mu[k] - field.get(c)).abs() < 1e-6, "k={k}");
        }
    }

    #[test]
    fn fitted_and_predictive_two_points() {
        let field = FieldGrid::new(1, 3, vec![1.0, 3.0, 0.0]).unwrap();
        let ordering = [Coord::new(0, 0), Coord::new(0, 1)];
        // b huge: kernel weights equal
        let f = fit_trend(
            &field,
            &ordering,
            spec(1e6),
            &TrendOptions::new(Smoother::Nw, FitMode::Fitted),
        )
        .unwrap();
        let p = fit_trend(
            &field,
            &ordering,
            spec(1e6),
            &TrendOptions::new(Smoother::Nw, FitMode::Predictive),
        )
        .unwrap();
        assert!((f.mu[1] - 2.0).abs() < 1e-12);
        assert_eq!(p.mu[1], 1.0);
        assert!(!p.usable[0]);
    }

    #[test]
    fn residuals_invert_known_trend() {
        let field = FieldGrid::from_fn(4, 4, |c| (c.t1 + c.t2) as f64).unwrap();
        let ordering = nshp_region(Coord::new(3, 3), field.bounds())
            .unwrap()
            .coords;
        let w0: Vec<f64> = (0..ordering.len())
            .map(|i| (i as f64 * 0.37).sin())
            .collect();
        let mu: Vec<f64> = ordering.iter().map(|c| c.t1 as f64).collect();
        let sigma: Vec<f64> = ordering.iter().map(|c| 1.0 + c.t2 as f64).collect();
        let mut field = field;
        for (i, &c) in ordering.iter().enumerate() {
            field.set(c, mu[i] + sigma[i] * w0[i]);
        }
        let fit = TrendFit {
            ordering: ordering.clone(),
            mu,
            second_moment: vec![0.0; ordering.len()],
            sigma,
            usable: vec![true; ordering.len()],
            options: TrendOptions::new(Smoother::Nw, FitMode::Fitted),
            b: 1.0,
            sigma_floor: 1e-8,
            fallbacks: 0,
        };
        let r = residuals(&field, &fit);
        for (a, b) in r.w.iter().zip(&w0) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_trend_gives_zero_residuals() {
        let field = FieldGrid::from_fn(5, 5, |_| -1.25).unwrap();
        let ordering = nshp_region(Coord::new(4, 4), field.bounds())
            .unwrap()
            .coords;
        let fit = fit_trend(
            &field,
            &ordering,
            spec(2.0),
            &TrendOptions::new(Smoother::Nw, FitMode::Fitted),
        )
        .unwrap();
        assert!(residuals(&field, &fit).w.iter().all(|w| w.abs() < 1e-12));
    }

    #[test]
    fn rejects_unsorted_ordering() {
        let field = FieldGrid::from_fn(3, 3, |_| 0.0).unwrap();
        let ordering = [Coord::new(1, 0), Coord::new(0, 2)];
        assert!(fit_trend(
            &field,
            &ordering,
            spec(1.0),
            &TrendOptions::new(Smoother::Nw, FitMode::Fitted)
        )
        .is_err());
    }
}
