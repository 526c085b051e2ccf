//! Synthetic locally stationary fields: a smooth trend plus a causal 2D AR process.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ar2d::ArModel2D;
use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::geometry::{check_causal, Coord};
use crate::real::Real;

/// One AR term `beta * y_{t - (j, k)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArTerm {
    pub j: i64,
    pub k: i64,
    pub beta: f64,
}

/// Deterministic trend surface added to the simulated AR field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrendSpec {
    None,
    /// `sin(2 pi cycles (t2 - 1) / (n2 - 2))`, constant along rows.
    SineT2 {
        cycles: f64,
    },
    /// Row-major values over the full grid.
    Custom {
        values: Vec<f64>,
    },
}

impl TrendSpec {
    pub fn value(&self, c: Coord, bounds: Coord) -> f64 {
        match self {
            TrendSpec::None => 0.0,
            TrendSpec::SineT2 { cycles } => {
                let denom = (bounds.t2 - 2).max(1) as f64;
                (2.0 * std::f64::consts::PI * cycles * (c.t2 - 1) as f64 / denom).sin()
            }
            TrendSpec::Custom { values } => values[c.index(bounds)],
        }
    }
}

/// Synthetic field generator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n1: usize,
    pub n2: usize,
    pub ar: Vec<ArTerm>,
    pub tau: f64,
    pub trend: TrendSpec,
    /// Width of the zero-initialized margins; `None` means three times the largest lag.
    #[serde(default)]
    pub burn_in: Option<usize>,
    pub seed: u64,
}

impl SimConfig {
    /// Three-term AR with `tau = 0.1` and two sine cycles along `t2`.
    pub fn reference(n1: usize, n2: usize, seed: u64) -> Self {
        Self {
            n1,
            n2,
            ar: vec![
                ArTerm {
                    j: 1,
                    k: 1,
                    beta: 0.25,
                },
                ArTerm {
                    j: 1,
                    k: -1,
                    beta: 0.2,
                },
                ArTerm {
                    j: 2,
                    k: 0,
                    beta: -0.05,
                },
            ],
            tau: 0.1,
            trend: TrendSpec::SineT2 { cycles: 2.0 },
            burn_in: None,
            seed,
        }
    }

    pub fn bounds(&self) -> Coord {
        Coord::new(self.n1 as i64, self.n2 as i64)
    }

    pub fn max_lag(&self) -> usize {
        self.ar
            .iter()
            .map(|t| t.j.unsigned_abs().max(t.k.unsigned_abs()) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn margin(&self) -> usize {
        self.burn_in.unwrap_or(3 * self.max_lag())
    }

    /// AR model of the innovations-driven part (for spectral cross-checks).
    pub fn model<T: Real>(&self) -> Result<ArModel2D<T>> {
        let terms: Vec<(Coord, T)> = self
            .ar
            .iter()
            .map(|t| (Coord::new(t.j, t.k), T::lit(t.beta)))
            .collect();
        ArModel2D::from_lags(&terms, T::lit(self.tau * self.tau))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Config("empty simulation grid".into()));
        }
        if !(self.tau >= 0.0) || !self.tau.is_finite() {
            return Err(Error::Config(format!(
                "tau must be non-negative, got {}",
                self.tau
            )));
        }
        let lags: Vec<Coord> = self.ar.iter().map(|t| Coord::new(t.j, t.k)).collect();
        if !check_causal(&lags) {
            return Err(Error::Config("AR lags must be causal".into()));
        }
        if self.margin() < 3 * self.max_lag() {
            return Err(Error::Config(format!(
                "burn-in {} is below three times the largest lag",
                self.margin()
            )));
        }
        if let TrendSpec::Custom { values } = &self.trend {
            if values.len() != self.n1 * self.n2 {
                return Err(Error::Config("custom trend must cover the grid".into()));
            }
        }
        Ok(())
    }

    /// Conditional mean of `Y_target` given its past (the ideal L2 predictor).
    pub fn conditional_mean<T: Real>(&self, field: &FieldGrid<T>, target: Coord) -> Result<f64> {
        let b = field.bounds();
        let mut m = self.trend.value(target, b);
        for t in &self.ar {
            let s = target - Coord::new(t.j, t.k);
            let y = field
                .observed(s)
                .ok_or(Error::Boundary { coord: s })?
                .as_f64();
            m += t.beta * (y - self.trend.value(s, b));
        }
        Ok(m)
    }
}

/// Simulate the AR recursion in lex order on the grid padded by the margin at
/// the top, left and right, with zero values outside the padded grid, then crop
/// and add the trend.
pub fn simulate_field<T: Real>(cfg: &SimConfig) -> Result<FieldGrid<T>> {
    cfg.validate()?;
    let m = cfg.margin();
    let (rows, cols) = (cfg.n1 + m, cfg.n2 + 2 * m);
    let mut x = vec![0.0f64; rows * cols];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.tau).map_err(|e| Error::Config(e.to_string()))?;
    for r in 0..rows as i64 {
        for c in 0..cols as i64 {
            let mut v = noise.sample(&mut rng);
            for t in &cfg.ar {
                let (rr, cc) = (r - t.j, c - t.k);
                if rr >= 0 && cc >= 0 && cc < cols as i64 {
                    v += t.beta * x[rr as usize * cols + cc as usize];
                }
            }
            if !(v.abs() <= 1e6) {
                return Err(Error::Divergence {
                    coord: Coord::new(r - m as i64, c - m as i64),
                });
            }
            x[r as usize * cols + c as usize] = v;
        }
    }
    let bounds = cfg.bounds();
    FieldGrid::from_fn(cfg.n1, cfg.n2, |p| {
        let v = x[(p.t1 as usize + m) * cols + p.t2 as usize + m];
        T::lit(v + cfg.trend.value(p, bounds))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn white_noise_variance() {
        let mut cfg = SimConfig::reference(101, 101, 7);
        cfg.ar.iter_mut().for_each(|t| t.beta = 0.0);
        cfg.trend = TrendSpec::None;
        let f: FieldGrid<f64> = simulate_field(&cfg).unwrap();
        let var = f.values().iter().map(|v| v * v).sum::<f64>() / f.values().len() as f64;
        assert!((var / 0.01 - 1.0).abs() < 0.1, "var={var}");
    }

    #[test]
    fn noiseless_is_trend() {
        let mut cfg = SimConfig::reference(12, 12, 1);
        cfg.tau = 0.0;
        let f: FieldGrid<f64> = simulate_field(&cfg).unwrap();
        for t1 in 0..12 {
            for t2 in 0..12 {
                let c = Coord::new(t1, t2);
                assert_eq!(f.get(c), cfg.trend.value(c, cfg.bounds()));
            }
        }
        let big = Coord::new(102, 102);
        assert!(cfg.trend.value(Coord::new(0, 26), big).abs() < 1e-12);
        assert!((cfg.trend.value(Coord::new(0, 51), big)).abs() < 1e-12);
        assert!(
            (cfg.trend.value(Coord::new(0, 13), big) - (0.48 * std::f64::consts::PI).sin()).abs()
                < 1e-12
        );
    }

    #[test]
    fn deterministic_per_seed() {
        let a: FieldGrid<f64> = simulate_field(&SimConfig::reference(20, 20, 3)).unwrap();
        let b: FieldGrid<f64> = simulate_field(&SimConfig::reference(20, 20, 3)).unwrap();
        let c: FieldGrid<f64> = simulate_field(&SimConfig::reference(20, 20, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn divergence_detected() {
        let mut cfg = SimConfig::reference(60, 60, 3);
        cfg.ar = vec![ArTerm {
            j: 0,
            k: 1,
            beta: 1.5,
        }];
        assert!(matches!(
            simulate_field::<f64>(&cfg),
            Err(Error::Divergence { .. })
        ));
    }
}
