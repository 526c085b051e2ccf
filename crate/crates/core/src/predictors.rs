//! Point predictors for the next site of a causal region.
//!
//! Model-based (`MB-LC`, `MB-LL`): smooth the trend one-sidedly, fit a causal AR
//! model to the standardized residuals and add the AR forecast of the next
//! residual. Model-free (`MF-LC`, `MF-LLH`, `MF-LLM`): run the forward transform,
//! push every fitted innovation through the predictive map `g` and report the
//! mean (L2) and median (L1) of the resulting set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ar2d::predict_next;
use crate::dist::{estimate_with_kernel, CdfKind};
use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::geometry::{nshp_region, Coord, NshpRegion};
use crate::kernels::{FitMode, KernelSpec, Smoother};
use crate::real::{median, Real};
use crate::transform::{
    forward_transform, next_row, predictive_g_from_base, ArOrderConfig, TransformConfig,
};
use crate::trend::{fit_trend, kernel_for, residuals, trend_at, TrendOptions, DEFAULT_WARMUP};

/// Predictor family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MB-LC")]
    MbLc,
    #[serde(rename = "MB-LL")]
    MbLl,
    #[serde(rename = "MF-LC")]
    MfLc,
    #[serde(rename = "MF-LLH")]
    MfLlh,
    #[serde(rename = "MF-LLM")]
    MfLlm,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::MbLc,
        Method::MbLl,
        Method::MfLc,
        Method::MfLlh,
        Method::MfLlm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::MbLc => "MB-LC",
            Method::MbLl => "MB-LL",
            Method::MfLc => "MF-LC",
            Method::MfLlh => "MF-LLH",
            Method::MfLlm => "MF-LLM",
        }
    }

    pub fn is_model_free(self) -> bool {
        matches!(self, Method::MfLc | Method::MfLlh | Method::MfLlm)
    }

    /// Trend smoother of the model-based methods.
    pub fn smoother(self) -> Smoother {
        match self {
            Method::MbLc | Method::MfLc => Smoother::Nw,
            _ => Smoother::Ll,
        }
    }

    /// Default cdf estimator of the model-free methods.
    pub fn cdf_kind(self) -> Option<CdfKind> {
        match self {
            Method::MfLc => Some(CdfKind::LcSmooth),
            Method::MfLlh => Some(CdfKind::Llh),
            Method::MfLlm => Some(CdfKind::Llm),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

/// Full configuration of one predictor with a resolved bandwidth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig<T> {
    pub method: Method,
    pub mode: FitMode,
    pub b: T,
    /// Value-axis bandwidth of the cdf estimators; `None` applies the `h0 = (b / max(n1, n2))^2` rule.
    pub h0: Option<T>,
    pub heteroscedastic: bool,
    pub ar: ArOrderConfig,
    pub warmup: usize,
    /// Model-based only: drop the AR residual forecast.
    pub trend_only: bool,
    /// Model-free local-constant estimator (`LcSmooth` or `LcStep`).
    pub lc_kind: CdfKind,
}

impl<T: Real> PredictorConfig<T> {
    pub fn new(method: Method, mode: FitMode, b: T) -> Self {
        Self {
            method,
            mode,
            b,
            h0: None,
            heteroscedastic: false,
            ar: ArOrderConfig::default(),
            warmup: DEFAULT_WARMUP,
            trend_only: false,
            lc_kind: CdfKind::LcSmooth,
        }
    }

    pub fn cdf_kind(&self) -> Option<CdfKind> {
        match self.method {
            Method::MfLc => Some(self.lc_kind),
            m => m.cdf_kind(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        KernelSpec::new(self.b)?;
        if self.method == Method::MfLc && self.lc_kind.is_local_linear() {
            return Err(Error::Config(
                "MF-LC needs a local-constant cdf kind".into(),
            ));
        }
        if self.method.is_model_free() && self.trend_only {
            return Err(Error::Config(
                "trend-only applies to model-based methods".into(),
            ));
        }
        if let Some(h0) = self.h0 {
            if !(h0 > T::zero()) {
                return Err(Error::Config(format!("h0 must be positive, got {h0}")));
            }
        }
        Ok(())
    }

    pub fn h0_for(&self, bounds: Coord) -> T {
        self.h0
            .unwrap_or_else(|| crate::cv::h0_rule(self.b, bounds))
    }

    /// Label such as `MF-LLM(P)`.
    pub fn label(&self) -> String {
        format!("{}({})", self.method, self.mode.letter())
    }
}

/// Diagnostics attached to a prediction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionDiagnostics {
    pub method: String,
    pub mode: String,
    pub b: f64,
    pub h0: Option<f64>,
    pub ar_order: (usize, usize),
    pub ar_sigma2: f64,
    pub support: usize,
    /// Model-based: the L1 predictor is reported equal to the L2 predictor.
    pub l1_is_l2: bool,
    pub trend_only: bool,
    /// Residuals were identically zero, so the AR part was taken as 0.
    #[serde(default)]
    pub degenerate_residuals: bool,
    pub trend_fallbacks: usize,
    pub cdf_fallbacks: usize,
    pub u_clips: usize,
    pub tail_clamps: usize,
    pub jitter: f64,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
}

/// L2 (mean) and L1 (median) predictions at `target`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult<T> {
    pub l2: T,
    pub l1: T,
    pub target: Coord,
    pub diagnostics: PredictionDiagnostics,
}

fn causal_region<T: Real>(field: &FieldGrid<T>, target: Coord) -> Result<NshpRegion> {
    let region = nshp_region(target, field.bounds())?;
    if let Some(&c) = region.coords.iter().find(|&&c| !field.is_observed(c)) {
        return Err(Error::Boundary { coord: c });
    }
    Ok(region)
}

fn base_diagnostics<T: Real>(config: &PredictorConfig<T>, support: usize) -> PredictionDiagnostics {
    PredictionDiagnostics {
        method: config.method.name().to_string(),
        mode: config.mode.letter().to_string(),
        b: config.b.as_f64(),
        support,
        ..Default::default()
    }
}

/// Model-based prediction at `target` from its causal region.
pub fn mb_predict<T: Real>(
    field: &FieldGrid<T>,
    target: Coord,
    config: &PredictorConfig<T>,
) -> Result<PredictionResult<T>> {
    config.validate()?;
    if config.method.is_model_free() {
        return Err(Error::Config(format!(
            "{} is not a model-based method",
            config.method
        )));
    }
    let region = causal_region(field, target)?;
    let spec = KernelSpec::new(config.b)?;
    let opts = TrendOptions::new(config.method.smoother(), config.mode)
        .heteroscedastic(config.heteroscedastic)
        .warmup(config.warmup);
    let (mu, sigma) = trend_at(field, &region.coords, target, spec, &opts)?;
    let mut diag = base_diagnostics(config, region.len());
    diag.l1_is_l2 = true;
    diag.trend_only = config.trend_only;
    diag.mu = Some(mu.as_f64());
    diag.sigma = Some(sigma.as_f64());
    let l2 = if config.trend_only {
        mu
    } else {
        let fit = fit_trend(field, &region.coords, spec, &opts)?;
        diag.trend_fallbacks = fit.fallbacks;
        let res = residuals(field, &fit);
        let usable = res.to_lattice(field.bounds())?;
        let flat = res
            .w
            .iter()
            .zip(&res.usable)
            .all(|(w, &u)| !u || w.abs() <= T::lit(1e-12));
        if flat {
            diag.degenerate_residuals = true;
            return Ok(PredictionResult {
                l2: mu,
                l1: mu,
                target,
                diagnostics: diag,
            });
        }
        let model = config.ar.fit(&usable)?;
        diag.ar_order = (model.ros.p, model.ros.q);
        diag.ar_sigma2 = model.sigma2.as_f64();
        let mut all = res.clone();
        all.usable.iter_mut().for_each(|u| *u = true);
        let lags = all.to_lattice(field.bounds())?;
        mu + sigma * predict_next(&model, &lags, target)?
    };
    Ok(PredictionResult {
        l2,
        l1: l2,
        target,
        diagnostics: diag,
    })
}

/// Model-free prediction at `target` from its causal region.
pub fn mf_predict<T: Real>(
    field: &FieldGrid<T>,
    target: Coord,
    config: &PredictorConfig<T>,
) -> Result<PredictionResult<T>> {
    config.validate()?;
    let kind = config
        .cdf_kind()
        .ok_or_else(|| Error::Config(format!("{} is not a model-free method", config.method)))?;
    let region = causal_region(field, target)?;
    let h0 = config.h0_for(field.bounds());
    let mut tcfg = TransformConfig::new(kind, config.mode, config.b, h0);
    tcfg.ar = config.ar;
    tcfg.warmup = config.warmup;
    let state = forward_transform(field, &region, &tcfg)?;
    let c = next_row(&state)?;
    let mut sites = region.coords.clone();
    sites.push(target);
    let kernel = kernel_for(KernelSpec::new(config.b)?, &sites);
    let d_next = estimate_with_kernel(
        field,
        &kernel,
        &region.coords,
        target,
        kind,
        FitMode::Predictive,
        h0,
        region.len(),
    )?;
    let n = state.n();
    let base: T = state.eps.iter().zip(&c).map(|(&e, &ci)| e * ci).sum();
    let mut tail_clamps = 0;
    let mut draws = Vec::with_capacity(n);
    for &e in &state.eps {
        let (y, clamped) = predictive_g_from_base(base, c[n], &d_next, e)?;
        tail_clamps += usize::from(clamped);
        draws.push(y);
    }
    let l2 = draws.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let l1 = median(&draws);
    let mut diag = base_diagnostics(config, region.len());
    diag.h0 = Some(h0.as_f64());
    diag.ar_order = (state.model.ros.p, state.model.ros.q);
    diag.ar_sigma2 = state.model.sigma2.as_f64();
    diag.cdf_fallbacks = state.cdf_fallbacks + usize::from(d_next.fallback.is_some());
    diag.u_clips = state.u_clips;
    diag.tail_clamps = tail_clamps;
    diag.jitter = state.gamma.jitter;
    Ok(PredictionResult {
        l2,
        l1,
        target,
        diagnostics: diag,
    })
}

/// Dispatch on the configured method.
pub fn predict<T: Real>(
    field: &FieldGrid<T>,
    target: Coord,
    config: &PredictorConfig<T>,
) -> Result<PredictionResult<T>> {
    if config.method.is_model_free() {
        mf_predict(field, target, config)
    } else {
        mb_predict(field, target, config)
    }
}
