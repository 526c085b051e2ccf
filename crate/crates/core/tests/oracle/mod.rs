//! Naive reference implementation of the model-free point predictor.
//!
//! Everything is recomputed with plain loops: weights from explicit 3x3 solves,
//! autocovariances by a direct inverse DFT, Cholesky by the textbook recurrence,
//! and the next-site row from a factorization of the full extended matrix.

#![allow(clippy::needless_range_loop, clippy::type_complexity)]
#![allow(dead_code)]

use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    LcSmooth,
    Llh,
    Llm,
}

pub struct Params {
    pub kind: Kind,
    pub fitted: bool,
    pub b: f64,
    pub h0: f64,
    pub p_max: usize,
    pub q_max: usize,
    pub warmup: usize,
}

pub fn phi_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

fn phi_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Inverse normal cdf by bisection then Newton polishing.
pub fn phi_inv(u: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi_cdf(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let d = phi_pdf(x);
        if d > 0.0 {
            x -= (phi_cdf(x) - u) / d;
        }
    }
    x
}

fn kernel(d1: i64, d2: i64, b: f64) -> f64 {
    (-((d1 * d1 + d2 * d2) as f64) / (2.0 * b * b)).exp()
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-300 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Gaussian elimination with partial pivoting on a copy.
fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(r, &x)| {
            let mut r = r.clone();
            r.push(x);
            r
        })
        .collect();
    for col in 0..n {
        let piv =
            (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for c in col..=n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| m[i][j] * x[j]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    Some(x)
}

/// Kernel weights at `target` over `support`: NW for the local-constant kind,
/// local-linear otherwise (NW when the design is degenerate).
fn weights(support: &[(i64, i64)], target: (i64, i64), kind: Kind, b: f64) -> Vec<f64> {
    let k: Vec<f64> = support
        .iter()
        .map(|s| kernel(s.0 - target.0, s.1 - target.1, b))
        .collect();
    if kind == Kind::LcSmooth || support.len() < 3 {
        return k;
    }
    let mut m = vec![vec![0.0; 3]; 3];
    for (s, &kj) in support.iter().zip(&k) {
        let x = [1.0, (s.0 - target.0) as f64, (s.1 - target.1) as f64];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += kj * x[i] * x[j];
            }
        }
    }
    let ev = jacobi_eigenvalues(m.clone());
    let lo = ev.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > 0.0 && lo >= 1e-10 * hi) {
        return k;
    }
    // row e1' M^{-1}
    let mut e1 = [0.0; 3];
    for i in 0..3 {
        let mut unit = vec![0.0; 3];
        unit[i] = 1.0;
        e1[i] = solve(&m, &unit).unwrap()[0];
    }
    support
        .iter()
        .zip(&k)
        .map(|(s, &kj)| {
            kj * (e1[0] + e1[1] * (s.0 - target.0) as f64 + e1[2] * (s.1 - target.1) as f64)
        })
        .collect()
}

/// A mixture cdf estimate.
pub struct Cdf {
    kind: Kind,
    vals: Vec<f64>,
    w: Vec<f64>,
    h0: f64,
    /// Negative-density intervals of the local-linear mixture.
    neg: Vec<(f64, f64)>,
    norm: f64,
}

impl Cdf {
    fn new(kind: Kind, vals: Vec<f64>, raw: Vec<f64>, nw: Vec<f64>, h0: f64) -> Self {
        let mass: f64 = match kind {
            Kind::Llh => raw.iter().map(|w| w.max(0.0)).sum(),
            _ => raw.iter().sum(),
        };
        let (kind, raw) = if mass > 0.0 {
            (kind, raw)
        } else {
            (Kind::LcSmooth, nw)
        };
        let w: Vec<f64> = match kind {
            Kind::Llh => raw.iter().map(|w| w.max(0.0)).collect(),
            _ => raw,
        };
        let total: f64 = w.iter().sum();
        let w: Vec<f64> = w.iter().map(|x| x / total).collect();
        let mut cdf = Cdf {
            kind,
            vals,
            w,
            h0,
            neg: Vec::new(),
            norm: 1.0,
        };
        if kind == Kind::Llm {
            cdf.find_negative();
        }
        cdf
    }

    fn mix_cdf(&self, y: f64) -> f64 {
        self.vals
            .iter()
            .zip(&self.w)
            .map(|(v, w)| w * phi_cdf((y - v) / self.h0))
            .sum()
    }

    fn mix_pdf(&self, y: f64) -> f64 {
        self.vals
            .iter()
            .zip(&self.w)
            .map(|(v, w)| w * phi_pdf((y - v) / self.h0))
            .sum()
    }

    /// Scan a fine grid for sign changes of the density and bisect each one.
    fn find_negative(&mut self) {
        let lo = self.vals.iter().cloned().fold(f64::INFINITY, f64::min) - 12.0 * self.h0;
        let hi = self.vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 12.0 * self.h0;
        let steps = (((hi - lo) / (self.h0 / 40.0)).ceil() as usize).max(1);
        let dx = (hi - lo) / steps as f64;
        let root = |mut a: f64, mut b: f64, neg_a: bool| {
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                if (self.mix_pdf(m) < 0.0) == neg_a {
                    a = m;
                } else {
                    b = m;
                }
            }
            0.5 * (a + b)
        };
        let mut neg = Vec::new();
        let mut start: Option<f64> = None;
        let mut x0 = lo;
        let mut d0 = self.mix_pdf(x0);
        if d0 < 0.0 {
            start = Some(lo);
        }
        for i in 1..=steps {
            let x1 = lo + dx * i as f64;
            let d1 = self.mix_pdf(x1);
            if (d0 < 0.0) != (d1 < 0.0) {
                let r = root(x0, x1, d0 < 0.0);
                match start.take() {
                    Some(s) => neg.push((s, r)),
                    None => start = Some(r),
                }
            }
            x0 = x1;
            d0 = d1;
        }
        if let Some(s) = start {
            neg.push((s, hi));
        }
        self.neg = neg;
        let removed: f64 = self
            .neg
            .iter()
            .map(|&(a, b)| self.mix_cdf(b) - self.mix_cdf(a))
            .sum();
        self.norm = 1.0 - removed;
    }

    pub fn eval(&self, y: f64) -> f64 {
        let m = self.mix_cdf(y);
        let v = match self.kind {
            Kind::Llm => {
                let mut removed = 0.0;
                for &(a, b) in &self.neg {
                    if a < y {
                        removed += self.mix_cdf(b.min(y)) - self.mix_cdf(a);
                    }
                }
                (m - removed) / self.norm
            }
            _ => m,
        };
        v.clamp(0.0, 1.0)
    }

    pub fn inverse(&self, u: f64) -> f64 {
        let mut lo = self.vals.iter().cloned().fold(f64::INFINITY, f64::min) - 30.0 * self.h0;
        let mut hi = self.vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 30.0 * self.h0;
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if self.eval(m) < u {
                lo = m;
            } else {
                hi = m;
            }
        }
        0.5 * (lo + hi)
    }
}

fn estimate(values: &[Vec<f64>], support: &[(i64, i64)], target: (i64, i64), p: &Params) -> Cdf {
    let vals: Vec<f64> = support
        .iter()
        .map(|s| values[s.0 as usize][s.1 as usize])
        .collect();
    let raw = weights(support, target, p.kind, p.b);
    let nw = weights(support, target, Kind::LcSmooth, p.b);
    Cdf::new(p.kind, vals, raw, nw, p.h0)
}

fn clip(u: f64) -> f64 {
    u.clamp(1e-7, 1.0 - 1e-7)
}

/// Yule-Walker fit; returns `(lags, beta, sigma2)` or `None` when singular.
fn yule_walker(acov: &dyn Fn(i64, i64) -> f64, lags: &[(i64, i64)]) -> Option<(Vec<f64>, f64)> {
    let a: Vec<Vec<f64>> = lags
        .iter()
        .map(|li| {
            lags.iter()
                .map(|lj| acov(li.0 - lj.0, li.1 - lj.1))
                .collect()
        })
        .collect();
    let r: Vec<f64> = lags.iter().map(|l| acov(l.0, l.1)).collect();
    let beta = solve(&a, &r)?;
    let g0 = acov(0, 0);
    let s2 = (g0 - beta.iter().zip(&r).map(|(b, g)| b * g).sum::<f64>()).max(1e-10 * g0);
    Some((beta, s2))
}

fn ros(p: usize, q: usize) -> Vec<(i64, i64)> {
    let (p, q) = (p as i64, q as i64);
    let mut v: Vec<(i64, i64)> = (1..=q).map(|k| (0, k)).collect();
    for j in 1..=p {
        for k in -q..=q {
            v.push((j, k));
        }
    }
    v.sort();
    v
}

/// Autocovariance at (k, l) of the AR model by a direct inverse DFT of its
/// spectral density on an `m x m` frequency grid.
fn spectral_acov(
    lags: &[(i64, i64)],
    beta: &[f64],
    s2: f64,
    m: usize,
    kmax: i64,
    lmax: i64,
) -> Vec<Vec<f64>> {
    let mf = m as f64;
    let mut f = vec![vec![0.0; m]; m];
    for (a, row) in f.iter_mut().enumerate() {
        for (bi, cell) in row.iter_mut().enumerate() {
            let (mut re, mut im) = (1.0, 0.0);
            for (l, bt) in lags.iter().zip(beta) {
                let ang =
                    -2.0 * PI * (((l.0 * a as i64 + l.1 * bi as i64).rem_euclid(m as i64)) as f64)
                        / mf;
                re -= bt * ang.cos();
                im -= bt * ang.sin();
            }
            *cell = s2 / (re * re + im * im);
        }
    }
    // partial sums over the second frequency for every needed l
    let nl = (2 * lmax + 1) as usize;
    let mut part = vec![vec![(0.0, 0.0); nl]; m];
    for a in 0..m {
        for (li, l) in (-lmax..=lmax).enumerate() {
            let (mut re, mut im) = (0.0, 0.0);
            for bi in 0..m {
                let ang = 2.0 * PI * (((l * bi as i64).rem_euclid(m as i64)) as f64) / mf;
                re += f[a][bi] * ang.cos();
                im += f[a][bi] * ang.sin();
            }
            part[a][li] = (re, im);
        }
    }
    let mut out = vec![vec![0.0; nl]; (2 * kmax + 1) as usize];
    for (ki, k) in (-kmax..=kmax).enumerate() {
        for li in 0..nl {
            let mut re = 0.0;
            for (a, pa) in part.iter().enumerate() {
                let ang = 2.0 * PI * (((k * a as i64).rem_euclid(m as i64)) as f64) / mf;
                re += pa[li].0 * ang.cos() - pa[li].1 * ang.sin();
            }
            out[ki][li] = re / (mf * mf);
        }
    }
    out
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let d = a[i][i] - s;
                if d <= 0.0 {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// `(l2, l1)` of the model-free predictor at `target` for a row-major field.
pub fn naive_mf_predict(values: &[Vec<f64>], target: (i64, i64), p: &Params) -> (f64, f64) {
    let (n1, n2) = (values.len() as i64, values[0].len() as i64);
    let mut order = Vec::new();
    for t1 in 0..n1 {
        for t2 in 0..n2 {
            if (t1, t2) < target {
                order.push((t1, t2));
            }
        }
    }
    // uniforms and normals
    let mut pos = Vec::new();
    let mut z = Vec::new();
    for k in p.warmup..order.len() {
        let support = if p.fitted { &order[..=k] } else { &order[..k] };
        let d = estimate(values, support, order[k], p);
        let u = clip(d.eval(values[order[k].0 as usize][order[k].1 as usize]));
        pos.push(order[k]);
        z.push(phi_inv(u));
    }
    // sample autocovariances over the transformed sites
    let n = z.len();
    let mean = z.iter().sum::<f64>() / n as f64;
    let at = |c: (i64, i64)| pos.iter().position(|&q| q == c);
    let sample = |k: i64, l: i64| {
        let mut acc = 0.0;
        for (i, &s) in pos.iter().enumerate() {
            if let Some(j) = at((s.0 - k, s.1 - l)) {
                acc += (z[i] - mean) * (z[j] - mean);
            }
        }
        acc / n as f64
    };
    let mut cands: Vec<(usize, usize)> = Vec::new();
    for pp in 0..=p.p_max {
        for qq in 0..=p.q_max {
            if pp + qq > 0 {
                cands.push((pp, qq));
            }
        }
    }
    cands.sort_by_key(|&(pp, qq)| (ros(pp, qq).len(), pp));
    let mut best: Option<(f64, Vec<(i64, i64)>, Vec<f64>, f64)> = None;
    for (pp, qq) in cands {
        let lags = ros(pp, qq);
        if let Some((beta, s2)) = yule_walker(&sample, &lags) {
            let score = n as f64 * s2.ln() + (n as f64).ln() * lags.len() as f64;
            if best.as_ref().is_none_or(|b| score < b.0) {
                best = Some((score, lags, beta, s2));
            }
        }
    }
    let (_, lags, beta, s2) = best.expect("some AR order fits");
    // correlation matrix over positions plus the target
    let mut sites = pos.clone();
    sites.push(target);
    let kmax = sites.iter().map(|s| s.0).max().unwrap() - sites.iter().map(|s| s.0).min().unwrap();
    let lmax = sites.iter().map(|s| s.1).max().unwrap() - sites.iter().map(|s| s.1).min().unwrap();
    let m = (8 * kmax.max(lmax) as usize).max(256).next_power_of_two();
    let g = spectral_acov(&lags, &beta, s2, m, kmax, lmax);
    let gam = |d: (i64, i64)| {
        0.5 * (g[(d.0 + kmax) as usize][(d.1 + lmax) as usize]
            + g[(kmax - d.0) as usize][(lmax - d.1) as usize])
    };
    let g00 = gam((0, 0));
    let corr = |s: &[(i64, i64)]| -> Vec<Vec<f64>> {
        s.iter()
            .map(|&a| {
                s.iter()
                    .map(|&b| {
                        if a == b {
                            1.0
                        } else {
                            gam((a.0 - b.0, a.1 - b.1)) / g00
                        }
                    })
                    .collect()
            })
            .collect()
    };
    let l = cholesky(&corr(&pos)).expect("positive definite");
    let mut eps = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|j| l[i][j] * eps[j]).sum();
        eps[i] = (z[i] - s) / l[i][i];
    }
    let lfull = cholesky(&corr(&sites)).expect("positive definite");
    let c = &lfull[n];
    let base: f64 = (0..n).map(|i| c[i] * eps[i]).sum();
    let d_next = estimate(values, &order, target, p);
    let mut draws: Vec<f64> = eps
        .iter()
        .map(|&e| d_next.inverse(clip(phi_cdf(base + c[n] * e))))
        .collect();
    let l2 = draws.iter().sum::<f64>() / n as f64;
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let l1 = if n % 2 == 1 {
        draws[n / 2]
    } else {
        0.5 * (draws[n / 2 - 1] + draws[n / 2])
    };
    (l2, l1)
}
