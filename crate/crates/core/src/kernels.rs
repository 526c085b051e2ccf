//! Two-dimensional Gaussian kernel and the one-sided smoothing weights built on it.
//!
//! Two weight constructions are provided:
//!
//! * Nadaraya-Watson: `K(target - s_i)` normalized to sum to one.
//! * Local linear: signed plane-fit weights `w_j = K_j * [cofactor row of the
//!   3x3 moment matrix] . (1, a1, a2)` with `a = s_j - target`. These are left
//!   unnormalized; consumers divide by `sum(w) + n^-2`.
//!
//! [`SmootherWeights`] bundles either construction with its denominator and
//! is what the trend and distribution estimators consume.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Coord;
use crate::real::Real;

/// Spatial bandwidth in grid-index units (per-axis standard deviation).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec<T> {
    b: T,
}

impl<T: Real> KernelSpec<T> {
    pub fn new(b: T) -> Result<Self> {
        if !(b > T::zero()) || !b.is_finite() {
            return Err(Error::Domain(format!(
                "bandwidth must be positive, got {b}"
            )));
        }
        Ok(Self { b })
    }

    pub fn b(&self) -> T {
        self.b
    }
}

/// Whether the estimate at `t_k` includes the observation at `t_k` itself.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FitMode {
    /// Support is `t_1..=t_k` (T = k).
    Fitted,
    /// Delete-one support `t_1..t_{k-1}` (T = k - 1).
    Predictive,
}

impl FitMode {
    /// Single-letter label used in result tables.
    pub fn letter(self) -> &'static str {
        match self {
            FitMode::Fitted => "F",
            FitMode::Predictive => "P",
        }
    }
}

impl std::str::FromStr for FitMode {
    type Err = crate::error::Error;
    fn from_str(s: &str) -> crate::error::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "f" | "fitted" => Ok(FitMode::Fitted),
            "p" | "predictive" => Ok(FitMode::Predictive),
            _ => Err(crate::error::Error::Config(format!("unknown mode `{s}`"))),
        }
    }
}

/// Kernel smoother family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Smoother {
    /// Local constant (Nadaraya-Watson).
    Nw,
    /// Local linear (plane fit).
    Ll,
}

/// `exp(-(d1^2 + d2^2) / (2 b^2))`, unnormalized.
pub fn gauss2d<T: Real>(d: Coord, b: T) -> Result<T> {
    let spec = KernelSpec::new(b)?;
    Ok(Gauss2d::new(spec).eval(d))
}

/// Gaussian kernel with a lag lookup table for the integer lags of a grid.
#[derive(Clone, Debug)]
pub struct Gauss2d<T> {
    inv_two_b2: T,
    max_d1: i64,
    max_d2: i64,
    table: Vec<T>,
}

impl<T: Real> Gauss2d<T> {
    pub fn new(spec: KernelSpec<T>) -> Self {
        Self {
            inv_two_b2: T::one() / (T::lit(2.0) * spec.b() * spec.b()),
            max_d1: -1,
            max_d2: -1,
            table: Vec::new(),
        }
    }

    /// Precompute kernel values for `|d1| <= max_d1`, `|d2| <= max_d2`.
    pub fn with_table(spec: KernelSpec<T>, max_d1: usize, max_d2: usize) -> Self {
        let mut k = Self::new(spec);
        let (m1, m2) = (max_d1 as i64, max_d2 as i64);
        k.table = (0..=m1)
            .flat_map(|d1| (0..=m2).map(move |d2| (d1, d2)))
            .map(|(d1, d2)| k.eval_direct(d1, d2))
            .collect();
        k.max_d1 = m1;
        k.max_d2 = m2;
        k
    }

    #[inline]
    fn eval_direct(&self, d1: i64, d2: i64) -> T {
        let r2 = T::from_i64(d1 * d1 + d2 * d2).expect("lag fits scalar");
        (-(r2 * self.inv_two_b2)).exp()
    }

    #[inline]
    pub fn eval(&self, d: Coord) -> T {
        let (a1, a2) = (d.t1.abs(), d.t2.abs());
        if a1 <= self.max_d1 && a2 <= self.max_d2 {
            self.table[(a1 * (self.max_d2 + 1) + a2) as usize]
        } else {
            self.eval_direct(a1, a2)
        }
    }
}

/// Weights attached to a support set for estimation at `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector<T> {
    pub target: Coord,
    pub support: Vec<Coord>,
    pub weights: Vec<T>,
    pub mode: FitMode,
}

fn mode_of(support: &[Coord], target: Coord) -> FitMode {
    if support.contains(&target) {
        FitMode::Fitted
    } else {
        FitMode::Predictive
    }
}

/// Normalized Nadaraya-Watson weights over `support`.
pub fn nw_weights<T: Real>(support: &[Coord], target: Coord, b: T) -> Result<WeightVector<T>> {
    if support.is_empty() {
        return Err(Error::InsufficientData {
            context: "Nadaraya-Watson weights",
            needed: 1,
            got: 0,
        });
    }
    let spec = KernelSpec::new(b)?;
    let inv_two_b2 = T::one() / (T::lit(2.0) * spec.b() * spec.b());
    let r2: Vec<i64> = support
        .iter()
        .map(|&s| {
            let d = target - s;
            d.t1 * d.t1 + d.t2 * d.t2
        })
        .collect();
    // shift by the nearest site so distant supports do not underflow to 0/0
    let r2_min = r2.iter().copied().min().unwrap_or(0);
    let raw: Vec<T> = r2
        .iter()
        .map(|&r| (-(T::from_i64(r - r2_min).expect("lag fits scalar") * inv_two_b2)).exp())
        .collect();
    let total: T = raw.iter().copied().sum();
    Ok(WeightVector {
        target,
        support: support.to_vec(),
        weights: raw.into_iter().map(|k| k / total).collect(),
        mode: mode_of(support, target),
    })
}

/// Signed local-linear weights over `support`, unnormalized.
pub fn ll_weights<T: Real>(support: &[Coord], target: Coord, b: T) -> Result<WeightVector<T>> {
    if support.is_empty() {
        return Err(Error::InsufficientData {
            context: "local-linear weights",
            needed: 1,
            got: 0,
        });
    }
    let kernel = Gauss2d::new(KernelSpec::new(b)?);
    let k: Vec<T> = support.iter().map(|&s| kernel.eval(s - target)).collect();
    let m = Moments::accumulate(support, target, &k);
    Ok(WeightVector {
        target,
        support: support.to_vec(),
        weights: m.weights(support, target, &k),
        mode: mode_of(support, target),
    })
}

/// Kernel-weighted moment sums of the lags `a = s_j - target`.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Moments<T> {
    s0: T,
    s1_1: T,
    s2_1: T,
    s1_2: T,
    s2_2: T,
    s12: T,
}

impl<T: Real> Moments<T> {
    pub(crate) fn accumulate(support: &[Coord], target: Coord, k: &[T]) -> Self {
        let mut m = Moments {
            s0: T::zero(),
            s1_1: T::zero(),
            s2_1: T::zero(),
            s1_2: T::zero(),
            s2_2: T::zero(),
            s12: T::zero(),
        };
        for (&s, &kj) in support.iter().zip(k) {
            let a = s - target;
            let a1 = T::from_i64(a.t1).unwrap();
            let a2 = T::from_i64(a.t2).unwrap();
            m.s0 += kj;
            m.s1_1 += kj * a1;
            m.s2_1 += kj * a2;
            m.s1_2 += kj * a1 * a1;
            m.s2_2 += kj * a2 * a2;
            m.s12 += kj * a1 * a2;
        }
        m
    }

    /// `K_j [s_{t1,2} s_{t2,2} - s_{t1,t2}^2 - a1 (s_{t1,1} s_{t2,2} - s_{t2,1} s_{t1,t2})
    ///       + a2 (s_{t1,1} s_{t1,t2} - s_{t1,2} s_{t2,1})]`
    pub(crate) fn weights(&self, support: &[Coord], target: Coord, k: &[T]) -> Vec<T> {
        let c0 = self.s1_2 * self.s2_2 - self.s12 * self.s12;
        let c1 = self.s1_1 * self.s2_2 - self.s2_1 * self.s12;
        let c2 = self.s1_1 * self.s12 - self.s1_2 * self.s2_1;
        support
            .iter()
            .zip(k)
            .map(|(&s, &kj)| {
                let a = s - target;
                let a1 = T::from_i64(a.t1).unwrap();
                let a2 = T::from_i64(a.t2).unwrap();
                kj * (c0 - a1 * c1 + a2 * c2)
            })
            .collect()
    }

    /// True when the plane fit is numerically determined: the smallest
    /// eigenvalue of the moment matrix is at least `1e-10` of the largest.
    pub(crate) fn is_well_posed(&self) -> bool {
        let (lo, hi) = sym3_eig_extremes([
            [self.s0, self.s1_1, self.s2_1],
            [self.s1_1, self.s1_2, self.s12],
            [self.s2_1, self.s12, self.s2_2],
        ]);
        hi > T::zero() && lo >= T::lit(1e-10) * hi
    }
}

/// Smallest and largest eigenvalue of a symmetric 3x3 matrix (trigonometric method).
fn sym3_eig_extremes<T: Real>(a: [[T; 3]; 3]) -> (T, T) {
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let p1 = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
    let q = (a[0][0] + a[1][1] + a[2][2]) / three;
    if p1 == T::zero() {
        let d = [a[0][0], a[1][1], a[2][2]];
        let lo = d.iter().copied().fold(T::infinity(), T::min);
        let hi = d.iter().copied().fold(T::neg_infinity(), T::max);
        return (lo, hi);
    }
    let p2 = (a[0][0] - q).powi(2) + (a[1][1] - q).powi(2) + (a[2][2] - q).powi(2) + two * p1;
    let p = (p2 / T::lit(6.0)).sqrt();
    let mut bm = a;
    for (i, row) in bm.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (a[i][j] - if i == j { q } else { T::zero() }) / p;
        }
    }
    let det = bm[0][0] * (bm[1][1] * bm[2][2] - bm[1][2] * bm[2][1])
        - bm[0][1] * (bm[1][0] * bm[2][2] - bm[1][2] * bm[2][0])
        + bm[0][2] * (bm[1][0] * bm[2][1] - bm[1][1] * bm[2][0]);
    let r = (det / two).max(-T::one()).min(T::one());
    let phi = r.acos() / three;
    let hi = q + two * p * phi.cos();
    let lo = q + two * p * (phi + two * T::PI() / three).cos();
    (lo, hi)
}

/// Smoothing weights with their denominator: `estimate = sum(w_j v_j) / denom`.
#[derive(Clone, Debug)]
pub(crate) struct SmootherWeights<T> {
    pub weights: Vec<T>,
    pub denom: T,
    /// Set when a local-linear request fell back to Nadaraya-Watson.
    pub fell_back: bool,
}

impl<T: Real> SmootherWeights<T> {
    pub(crate) fn apply(&self, values: impl Iterator<Item = T>) -> T {
        self.weights
            .iter()
            .zip(values)
            .map(|(&w, v)| w * v)
            .sum::<T>()
            / self.denom
    }
}

/// Weights for estimation at `target` from `support`.
///
/// Local linear falls back to Nadaraya-Watson when fewer than three support
/// points exist or the design is numerically collinear. `n_region` sets the
/// `n^-2` regularizer of the local-linear denominator.
pub(crate) fn smoother_weights<T: Real>(
    kernel: &Gauss2d<T>,
    support: &[Coord],
    target: Coord,
    smoother: Smoother,
    n_region: usize,
) -> SmootherWeights<T> {
    let k: Vec<T> = support.iter().map(|&s| kernel.eval(s - target)).collect();
    if smoother == Smoother::Ll && support.len() >= 3 {
        let m = Moments::accumulate(support, target, &k);
        if m.is_well_posed() {
            let weights = m.weights(support, target, &k);
            let n = T::from_usize_lossy(n_region.max(1));
            let denom = weights.iter().copied().sum::<T>() + T::one() / (n * n);
            return SmootherWeights {
                weights,
                denom,
                fell_back: false,
            };
        }
    }
    let denom = k.iter().copied().sum();
    SmootherWeights {
        weights: k,
        denom,
        fell_back: smoother == Smoother::Ll,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(t1: i64, t2: i64) -> Coord {
        Coord::new(t1, t2)
    }

    #[test]
    fn nw_far_support_does_not_underflow() {
        let w = nw_weights::<f64>(&[c(-10, 0), c(-10, 1)], c(7, -9), 0.3).unwrap();
        assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(w.weights[0] > 0.99);
    }

    #[test]
    fn gauss_examples() {
        assert_eq!(gauss2d(c(0, 0), 3.7).unwrap(), 1.0);
        assert!((gauss2d(c(2, 0), 2.0).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert!((gauss2d(c(3, 4), 5.0).unwrap() - (-0.5f64).exp()).abs() < 1e-15);
        assert!(gauss2d(c(1, 1), 0.0).is_err());
        assert!(gauss2d(c(1, 1), -1.0).is_err());
    }

    #[test]
    fn table_matches_direct() {
        let spec = KernelSpec::new(2.5).unwrap();
        let t = Gauss2d::with_table(spec, 3, 4);
        let d = Gauss2d::new(spec);
        for d1 in -5..=5 {
            for d2 in -6..=6 {
                assert_eq!(t.eval(c(d1, d2)), d.eval(c(d1, d2)));
            }
        }
    }

    #[test]
    fn nw_examples() {
        let w = nw_weights(&[c(1, 1)], c(3, 3), 1.0).unwrap();
        assert_eq!(w.weights, vec![1.0]);

        let w = nw_weights::<f64>(&[c(0, 1), c(1, 0)], c(1, 1), 1.0).unwrap();
        assert!((w.weights[0] - 0.5).abs() < 1e-15 && (w.weights[1] - 0.5).abs() < 1e-15);

        // weights ∝ {e^-2, e^-1/2}
        let w = nw_weights(&[c(0, 0), c(0, 1)], c(0, 2), 1.0).unwrap();
        let (a, b) = ((-2.0f64).exp(), (-0.5f64).exp());
        assert!((w.weights[0] - a / (a + b)).abs() < 1e-15);
        assert!((w.weights[0] - 0.1824).abs() < 5e-5);
        assert!((w.weights[1] - 0.8176).abs() < 5e-5);
        assert_eq!(w.mode, FitMode::Predictive);

        assert!(nw_weights::<f64>(&[], c(0, 0), 1.0).is_err());
    }

    #[test]
    fn ll_single_point_cancels() {
        let w = ll_weights(&[c(2, 3)], c(4, 4), 1.5).unwrap();
        assert_eq!(w.weights, vec![0.0]);
    }

    #[test]
    fn ll_symmetric_support_reduces_to_nw() {
        let support = [
            c(-1, 0),
            c(1, 0),
            c(0, -1),
            c(0, 1),
            c(-1, -1),
            c(1, 1),
            c(-1, 1),
            c(1, -1),
        ];
        let target = c(0, 0);
        let ll = ll_weights(&support, target, 1.3).unwrap();
        let nw = nw_weights(&support, target, 1.3).unwrap();
        let total: f64 = ll.weights.iter().sum();
        for (l, n) in ll.weights.iter().zip(&nw.weights) {
            assert!((l / total - n).abs() < 1e-13);
        }
    }

    #[test]
    fn ll_three_points_exact_on_constant() {
        let support = [c(0, 0), c(0, 1), c(1, 0)];
        let target = c(1, 1);
        let w = ll_weights(&support, target, 2.0).unwrap();
        let n = 3.0f64;
        let denom: f64 = w.weights.iter().sum::<f64>() + 1.0 / (n * n);
        let mu: f64 = w.weights.iter().map(|wj| wj * 4.2).sum::<f64>() / denom;
        // exact up to the regularizer
        let expected = 4.2 * (denom - 1.0 / (n * n)) / denom;
        assert!((mu - expected).abs() < 1e-12);
        assert!((mu - 4.2).abs() < 4.2 / (n * n) / w.weights.iter().sum::<f64>() + 1e-12);
    }

    #[test]
    fn smoother_falls_back_on_collinear_support() {
        let kernel = Gauss2d::new(KernelSpec::new(2.0).unwrap());
        let support = [c(0, 0), c(0, 1), c(0, 2), c(0, 3)];
        let sw = smoother_weights(&kernel, &support, c(0, 4), Smoother::Ll, 4);
        assert!(sw.fell_back);
        let sw = smoother_weights(&kernel, &support[..2], c(1, 4), Smoother::Ll, 4);
        assert!(sw.fell_back);
        let support = [c(0, 0), c(0, 1), c(1, 0), c(1, 1)];
        let sw = smoother_weights(&kernel, &support, c(1, 2), Smoother::Ll, 4);
        assert!(!sw.fell_back);
    }

    #[test]
    fn sym3_eigs() {
        let (lo, hi) = sym3_eig_extremes([[2.0f64, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]]);
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 5.0).abs() < 1e-12);
        let (lo, hi) = sym3_eig_extremes([[3.0f64, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 2.0]]);
        assert_eq!((lo, hi), (1.0, 3.0));
    }
}
