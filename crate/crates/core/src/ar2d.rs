//! Causal 2D autoregressions on the non-symmetric half-plane.
//!
//! Fitting goes through the 2D Yule-Walker equations built from biased sample
//! autocovariances. The autocovariance implied by a fitted model at arbitrary
//! lags is obtained by inverting its spectral density on a frequency grid,
//! which is what the whitening covariance matrices are assembled from.

use std::fmt::Write as _;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::geometry::{check_causal, ros_lags, Coord, RosLagSet};
use crate::linalg::{solve_dense, LowerTriangular, SymMatrix};
use crate::real::Real;

/// Causal 2D AR model `w_t = sum beta_{j,k} w_{t-(j,k)} + v_t`, `Var v = sigma2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArModel2D<T> {
    pub ros: RosLagSet,
    pub beta: Vec<T>,
    pub sigma2: T,
}

impl<T: Real> ArModel2D<T> {
    /// Model on an arbitrary causal lag set. `p`/`q` record the row and column extents.
    pub fn from_lags(terms: &[(Coord, T)], sigma2: T) -> Result<Self> {
        let mut terms = terms.to_vec();
        terms.sort_by_key(|t| t.0);
        let lags: Vec<Coord> = terms.iter().map(|t| t.0).collect();
        if lags.is_empty() {
            return Err(Error::EmptyModel);
        }
        if !check_causal(&lags) || lags.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("lags must be distinct and causal".into()));
        }
        if !(sigma2 > T::zero()) {
            return Err(Error::Domain(format!(
                "innovation variance must be positive, got {sigma2}"
            )));
        }
        let mut ros = RosLagSet { p: 0, q: 0, lags };
        let (p, q) = ros.extent();
        ros.p = p;
        ros.q = q;
        Ok(Self {
            ros,
            beta: terms.iter().map(|t| t.1).collect(),
            sigma2,
        })
    }

    pub fn coefficient(&self, lag: Coord) -> T {
        self.ros
            .lags
            .iter()
            .position(|&l| l == lag)
            .map_or(T::zero(), |i| self.beta[i])
    }

    /// Flat text record: `p q sigma2` then one `j k beta` line per lag.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.ros.p, self.ros.q, self.sigma2);
        for (l, b) in self.ros.lags.iter().zip(&self.beta) {
            let _ = writeln!(s, "{} {} {}", l.t1, l.t2, b);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::Domain(format!("AR model record: {m}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("empty"))?
            .split_whitespace()
            .collect();
        if head.len() != 3 {
            return Err(bad("header needs `p q sigma2`"));
        }
        let p: usize = head[0].parse().map_err(|_| bad("p"))?;
        let q: usize = head[1].parse().map_err(|_| bad("q"))?;
        let sigma2 = T::lit(head[2].parse::<f64>().map_err(|_| bad("sigma2"))?);
        let mut terms = Vec::new();
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(bad("lag line needs `j k beta`"));
            }
            let j: i64 = f[0].parse().map_err(|_| bad("j"))?;
            let k: i64 = f[1].parse().map_err(|_| bad("k"))?;
            let b: f64 = f[2].parse().map_err(|_| bad("beta"))?;
            terms.push((Coord::new(j, k), T::lit(b)));
        }
        let mut m = Self::from_lags(&terms, sigma2)?;
        m.ros.p = p;
        m.ros.q = q;
        Ok(m)
    }
}

/// Autocovariances over lags `|k| <= K`, `|l| <= L`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutocovTable<T> {
    pub halfwidths: (usize, usize),
    gamma: Vec<T>,
}

impl<T: Real> AutocovTable<T> {
    fn zeros(k: usize, l: usize) -> Self {
        Self {
            halfwidths: (k, l),
            gamma: vec![T::zero(); (2 * k + 1) * (2 * l + 1)],
        }
    }

    #[inline]
    fn slot(&self, lag: Coord) -> Option<usize> {
        let (k, l) = (self.halfwidths.0 as i64, self.halfwidths.1 as i64);
        (lag.t1.abs() <= k && lag.t2.abs() <= l)
            .then(|| ((lag.t1 + k) * (2 * l + 1) + lag.t2 + l) as usize)
    }

    /// Value at `lag`; panics outside the table.
    #[inline]
    pub fn get(&self, lag: Coord) -> T {
        let i = self.slot(lag).unwrap_or_else(|| {
            panic!(
                "lag {lag} outside autocovariance table {:?}",
                self.halfwidths
            )
        });
        self.gamma[i]
    }

    pub fn try_get(&self, lag: Coord) -> Option<T> {
        self.slot(lag).map(|i| self.gamma[i])
    }

    fn set(&mut self, lag: Coord, v: T) {
        let i = self.slot(lag).expect("lag inside table");
        self.gamma[i] = v;
    }

    pub fn gamma00(&self) -> T {
        self.get(Coord::new(0, 0))
    }
}

/// Biased, mean-removed sample autocovariances over the observed cells of `w`.
pub fn sample_autocov<T: Real>(w: &FieldGrid<T>, k: usize, l: usize) -> Result<AutocovTable<T>> {
    let bounds = w.bounds();
    let sites: Vec<Coord> = (0..bounds.t1)
        .flat_map(|t1| (0..bounds.t2).map(move |t2| Coord::new(t1, t2)))
        .filter(|&c| w.is_observed(c))
        .collect();
    let needed = (k + 1) * (2 * l + 1) + 10;
    if sites.len() < needed {
        return Err(Error::InsufficientData {
            context: "sample autocovariance",
            needed,
            got: sites.len(),
        });
    }
    let n = T::from_usize_lossy(sites.len());
    let mean = sites.iter().map(|&c| w.get(c)).sum::<T>() / n;
    let mut table = AutocovTable::zeros(k, l);
    let (ki, li) = (k as i64, l as i64);
    for dk in 0..=ki {
        let lo = if dk == 0 { 0 } else { -li };
        for dl in lo..=li {
            let lag = Coord::new(dk, dl);
            let mut acc = T::zero();
            for &s in &sites {
                if let Some(v) = w.observed(s - lag) {
                    acc += (w.get(s) - mean) * (v - mean);
                }
            }
            let g = acc / n;
            table.set(lag, g);
            table.set(Coord::new(-dk, -dl), g);
        }
    }
    Ok(table)
}

/// Number of observed cells (the `N` of the order-selection criteria).
fn observed_count<T: Real>(w: &FieldGrid<T>) -> usize {
    w.mask()
        .map_or(w.values().len(), |m| m.iter().filter(|&&b| b).count())
}

fn halfwidths_for(ros: &RosLagSet) -> (usize, usize) {
    let (p, q) = ros.extent();
    (p, 2 * q)
}

/// Solve the Yule-Walker system for `ros` from an autocovariance table.
pub fn fit_from_autocov<T: Real>(acov: &AutocovTable<T>, ros: &RosLagSet) -> Result<ArModel2D<T>> {
    if ros.is_empty() {
        return Err(Error::EmptyModel);
    }
    let g00 = acov.gamma00();
    if !(g00 > T::zero()) || !g00.is_finite() {
        return Err(Error::Fit(format!("zero-variance input (gamma00 = {g00})")));
    }
    let lags = &ros.lags;
    let lookup = |lag: Coord| {
        acov.try_get(lag)
            .ok_or_else(|| Error::Fit(format!("autocovariance table lacks lag {lag}")))
    };
    let mut a = vec![vec![T::zero(); lags.len()]; lags.len()];
    let mut rhs = Vec::with_capacity(lags.len());
    for (i, &li) in lags.iter().enumerate() {
        for (j, &lj) in lags.iter().enumerate() {
            a[i][j] = lookup(li - lj)?;
        }
        rhs.push(lookup(li)?);
    }
    let tol = T::epsilon() * T::lit(1e4);
    let beta = match solve_dense(&a, &rhs, tol) {
        Some(b) => b,
        None => {
            let ridge = T::lit(1e-8) * g00;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += ridge;
            }
            solve_dense(&a, &rhs, tol)
                .ok_or_else(|| Error::Fit("singular Yule-Walker system after ridge".into()))?
        }
    };
    let explained: T = beta.iter().zip(&rhs).map(|(&b, &g)| b * g).sum();
    let sigma2 = (g00 - explained).max(T::lit(1e-10) * g00);
    if !(sigma2 > T::zero()) || beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Fit("non-positive innovation variance".into()));
    }
    Ok(ArModel2D {
        ros: ros.clone(),
        beta,
        sigma2,
    })
}

/// Fit `ros` to the observed cells of `w` by 2D Yule-Walker.
pub fn fit_yule_walker<T: Real>(w: &FieldGrid<T>, ros: &RosLagSet) -> Result<ArModel2D<T>> {
    let (k, l) = halfwidths_for(ros);
    let acov = sample_autocov(w, k, l)?;
    fit_from_autocov(&acov, ros)
}

/// Order-selection criterion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Criterion {
    Aic,
    Bic,
}

/// Result of [`select_order`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection<T> {
    pub p: usize,
    pub q: usize,
    pub model: ArModel2D<T>,
    pub criterion: T,
}

/// Fit every `(p, q)` in `[0, p_max] x [0, q_max]` except `(0, 0)` and keep the
/// minimizer of `N ln sigma2 + penalty |ros|`.
pub fn select_order<T: Real>(
    w: &FieldGrid<T>,
    p_max: usize,
    q_max: usize,
    criterion: Criterion,
) -> Result<OrderSelection<T>> {
    if p_max == 0 && q_max == 0 {
        return Err(Error::EmptyModel);
    }
    let acov = sample_autocov(w, p_max, 2 * q_max)?;
    let n = observed_count(w);
    let nf = T::from_usize_lossy(n);
    let penalty = match criterion {
        Criterion::Aic => T::lit(2.0),
        Criterion::Bic => nf.ln(),
    };
    let mut candidates: Vec<RosLagSet> = (0..=p_max)
        .flat_map(|p| (0..=q_max).map(move |q| (p, q)))
        .filter(|&(p, q)| p + q > 0)
        .map(|(p, q)| ros_lags(p, q).expect("nonempty order"))
        .collect();
    candidates.sort_by_key(|r| (r.len(), r.p));
    let mut best: Option<OrderSelection<T>> = None;
    let mut last_err = None;
    for ros in candidates {
        match fit_from_autocov(&acov, &ros) {
            Ok(model) => {
                let score = nf * model.sigma2.ln() + penalty * T::from_usize_lossy(ros.len());
                if best.as_ref().is_none_or(|b| score < b.criterion) {
                    best = Some(OrderSelection {
                        p: ros.p,
                        q: ros.q,
                        model,
                        criterion: score,
                    });
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.expect("at least one candidate"))
}

/// `sum beta_{j,k} w_{target-(j,k)}`.
pub fn predict_next<T: Real>(model: &ArModel2D<T>, w: &FieldGrid<T>, target: Coord) -> Result<T> {
    let mut acc = T::zero();
    for (&lag, &b) in model.ros.lags.iter().zip(&model.beta) {
        let c = target - lag;
        let v = w.observed(c).ok_or(Error::Boundary { coord: c })?;
        acc += b * v;
    }
    Ok(acc)
}

/// Side of the square frequency grid used by [`model_autocov`].
pub fn spectral_grid_size(k: usize, l: usize) -> usize {
    (8 * k.max(l)).max(256).next_power_of_two()
}

/// Spectral density `sigma2 / |1 - sum beta e^{-i(j w1 + k w2)}|^2` on an `m x m` grid, row-major.
pub fn spectral_density<T: Real>(model: &ArModel2D<T>, m: usize) -> Vec<T> {
    let two_pi = T::lit(2.0) * T::PI();
    let mf = T::from_usize_lossy(m);
    let phase = |j: i64, a: usize| -> Complex<T> {
        let idx = (j.rem_euclid(m as i64) as usize * a) % m;
        let ang = -two_pi * T::from_usize_lossy(idx) / mf;
        Complex::new(ang.cos(), ang.sin())
    };
    let cols: Vec<Vec<Complex<T>>> = model
        .ros
        .lags
        .iter()
        .map(|lag| (0..m).map(|b| phase(lag.t2, b)).collect())
        .collect();
    let mut out = Vec::with_capacity(m * m);
    let mut rows: Vec<Complex<T>> = vec![Complex::new(T::zero(), T::zero()); model.beta.len()];
    for a in 0..m {
        for ((r, lag), &beta) in rows.iter_mut().zip(&model.ros.lags).zip(&model.beta) {
            *r = phase(lag.t1, a) * beta;
        }
        for bidx in 0..m {
            let mut s = Complex::new(T::one(), T::zero());
            for (r, col) in rows.iter().zip(&cols) {
                s -= *r * col[bidx];
            }
            out.push(model.sigma2 / s.norm_sqr());
        }
    }
    out
}

/// Autocovariances implied by `model` over `|k| <= K`, `|l| <= L`.
pub fn model_autocov<T: Real>(model: &ArModel2D<T>, k: usize, l: usize) -> Result<AutocovTable<T>> {
    let m = spectral_grid_size(k, l);
    let f = spectral_density(model, m);
    let (mut lo, mut hi, mut sum) = (T::infinity(), T::zero(), T::zero());
    for &v in &f {
        if !v.is_finite() {
            return Err(Error::Instability("non-finite spectral density".into()));
        }
        lo = lo.min(v);
        hi = hi.max(v);
        sum += v;
    }
    let mean = sum / T::from_usize_lossy(m * m);
    if !(lo > T::lit(1e-8) * mean) {
        return Err(Error::Instability(format!(
            "spectral density minimum {lo} vs mean {mean}"
        )));
    }
    let mut buf: Vec<Complex<T>> = f.into_iter().map(|v| Complex::new(v, T::zero())).collect();
    let fft = FftPlanner::<T>::new().plan_fft_inverse(m);
    fft.process(&mut buf);
    let mut tr = vec![Complex::new(T::zero(), T::zero()); m * m];
    for a in 0..m {
        for b in 0..m {
            tr[b * m + a] = buf[a * m + b];
        }
    }
    fft.process(&mut tr);
    // tr is now indexed [l][k]
    let scale = T::from_usize_lossy(m * m);
    let at = |dk: i64, dl: i64| {
        let a = dk.rem_euclid(m as i64) as usize;
        let b = dl.rem_euclid(m as i64) as usize;
        tr[b * m + a] / scale
    };
    let tol = T::lit(1e-10).max(T::epsilon() * T::lit(1e3)) * hi;
    let mut table = AutocovTable::zeros(k, l);
    let (ki, li) = (k as i64, l as i64);
    for dk in -ki..=ki {
        for dl in -li..=li {
            let (x, y) = (at(dk, dl), at(-dk, -dl));
            if x.im.abs() > tol {
                return Err(Error::Instability(format!(
                    "imaginary autocovariance residue {} at lag ({dk}, {dl})",
                    x.im
                )));
            }
            table.set(Coord::new(dk, dl), (x.re + y.re) / T::lit(2.0));
        }
    }
    Ok(table)
}

/// Correlation matrix of a lex-ordered list of sites under an AR model, with its Cholesky factor.
#[derive(Clone, Debug)]
pub struct CovMatrix<T: Real> {
    pub ordering: Vec<Coord>,
    pub matrix: SymMatrix<T>,
    pub factor: LowerTriangular<T>,
    /// Diagonal jitter added before the factorization succeeded.
    pub jitter: f64,
}

impl<T: Real> CovMatrix<T> {
    pub fn dim(&self) -> usize {
        self.ordering.len()
    }
}

/// Halfwidths of an autocovariance table covering all pairwise lags of `sites`.
pub fn lag_extent(sites: &[Coord]) -> (usize, usize) {
    if sites.is_empty() {
        return (0, 0);
    }
    let r = sites.iter().map(|c| c.t1).max().unwrap() - sites.iter().map(|c| c.t1).min().unwrap();
    let c = sites.iter().map(|c| c.t2).max().unwrap() - sites.iter().map(|c| c.t2).min().unwrap();
    (r as usize, c as usize)
}

/// Factor a correlation matrix, adding doubling diagonal jitter from `1e-10` up to `1e-4`.
pub fn factor_with_jitter<T: Real>(
    mut matrix: SymMatrix<T>,
) -> Result<(SymMatrix<T>, LowerTriangular<T>, f64)> {
    if let Some(l) = matrix.cholesky() {
        return Ok((matrix, l, 0.0));
    }
    let mut applied = 0.0;
    let mut delta = 1e-10;
    while delta <= 1e-4 {
        matrix.add_diagonal(T::lit(delta - applied));
        applied = delta;
        if let Some(l) = matrix.cholesky() {
            return Ok((matrix, l, delta));
        }
        delta *= 2.0;
    }
    Err(Error::NotPositiveDefinite { jitter: applied })
}

/// Correlation matrix `gamma(o_i - o_j) / gamma(0,0)` from a precomputed table.
pub fn cov_matrix_from_table<T: Real>(
    table: &AutocovTable<T>,
    ordering: &[Coord],
) -> Result<CovMatrix<T>> {
    if ordering.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(
            "covariance ordering must be strictly lex-increasing".into(),
        ));
    }
    let g00 = table.gamma00();
    let matrix = SymMatrix::from_lower_fn(ordering.len(), |i, j| {
        if i == j {
            T::one()
        } else {
            table.get(ordering[i] - ordering[j]) / g00
        }
    });
    let (matrix, factor, jitter) = factor_with_jitter(matrix)?;
    Ok(CovMatrix {
        ordering: ordering.to_vec(),
        matrix,
        factor,
        jitter,
    })
}

/// Correlation matrix of `ordering` implied by `model`, factored.
pub fn build_cov_matrix<T: Real>(model: &ArModel2D<T>, ordering: &[Coord]) -> Result<CovMatrix<T>> {
    let (k, l) = lag_extent(ordering);
    let table = model_autocov(model, k, l)?;
    cov_matrix_from_table(&table, ordering)
}
