//! Benchmark orchestration: data generation or ingestion, per-case bandwidth
//! selection and prediction, aggregation into a result table, and output files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cv::{plug_in_h0, select_bandwidth, CvSelection, CvSpec, CvTraceRow, OneStepPredictor};
use crate::dist::CdfKind;
use crate::error::{Error, Result};
use crate::field::FieldGrid;
use crate::geometry::{nshp_region, Coord};
use crate::harness::images::{ingest_images, Channel};
use crate::harness::sim::{simulate_field, SimConfig};
use crate::kernels::FitMode;
use crate::predictors::{predict, Method, PredictionDiagnostics, PredictorConfig};
use crate::transform::ArOrderConfig;
use crate::trend::DEFAULT_WARMUP;

/// Method label of the true-conditional-mean row.
pub const ORACLE: &str = "ORACLE";

/// Where the realizations come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// Independent simulations; `sim.seed` is replaced by per-case seeds derived from the master seed.
    Simulate { sim: SimConfig, realizations: usize },
    Images {
        dir: PathBuf,
        channel: Channel,
        count: usize,
    },
}

/// Optional sub-window the fields are cropped to before prediction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub origin: Coord,
    pub bounds: Coord,
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}
fn default_modes() -> Vec<FitMode> {
    vec![FitMode::Predictive, FitMode::Fitted]
}
fn default_warmup() -> usize {
    DEFAULT_WARMUP
}
fn default_workers() -> usize {
    1
}
fn default_lc_kind() -> CdfKind {
    CdfKind::LcSmooth
}

/// Declarative experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    /// Prediction site (0-based, in the coordinates of the possibly windowed field).
    pub target: Coord,
    #[serde(default)]
    pub window: Option<Window>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_modes")]
    pub modes: Vec<FitMode>,
    /// Fixed spatial bandwidth; when absent it is cross-validated per case and method.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    #[serde(default)]
    pub cv: CvSpec<f64>,
    #[serde(default)]
    pub h0: Option<f64>,
    #[serde(default)]
    pub heteroscedastic: bool,
    #[serde(default)]
    pub ar: ArOrderConfig,
    #[serde(default = "default_warmup")]
    pub warmup: usize,
    #[serde(default)]
    pub trend_only: bool,
    #[serde(default = "default_lc_kind")]
    pub lc_kind: CdfKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Add a row for the true conditional mean (simulations only).
    #[serde(default)]
    pub oracle_row: bool,
    /// Record wall-clock times (makes `runtime_ms` non-reproducible).
    #[serde(default)]
    pub timings: bool,
}

impl ExperimentConfig {
    fn base(data: DataSource, target: Coord) -> Self {
        Self {
            data,
            target,
            window: None,
            methods: default_methods(),
            modes: default_modes(),
            bandwidth: None,
            cv: CvSpec::default(),
            h0: None,
            heteroscedastic: false,
            ar: ArOrderConfig::default(),
            warmup: DEFAULT_WARMUP,
            trend_only: false,
            lc_kind: CdfKind::LcSmooth,
            seed: 0,
            workers: 1,
            oracle_row: false,
            timings: false,
        }
    }

    /// The synthetic study: 102 x 102 grid, target (50, 50).
    pub fn synthetic(realizations: usize) -> Self {
        Self::base(
            DataSource::Simulate {
                sim: SimConfig::reference(102, 102, 0),
                realizations,
            },
            Coord::new(50, 50),
        )
    }

    /// Reduced synthetic study: 51 x 51 grid, target (25, 25).
    pub fn synthetic_small(realizations: usize) -> Self {
        Self::base(
            DataSource::Simulate {
                sim: SimConfig::reference(51, 51, 0),
                realizations,
            },
            Coord::new(25, 25),
        )
    }

    /// 32 x 32 image patches, red channel, target (16, 16).
    pub fn images(dir: impl Into<PathBuf>, count: usize) -> Self {
        Self::base(
            DataSource::Images {
                dir: dir.into(),
                channel: Channel::R,
                count,
            },
            Coord::new(16, 16),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.modes.is_empty() {
            return Err(Error::Config(
                "at least one method and one mode are required".into(),
            ));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be positive".into()));
        }
        if let Some(b) = self.bandwidth {
            if !(b > 0.0) {
                return Err(Error::Config(format!(
                    "bandwidth must be positive, got {b}"
                )));
            }
        }
        if self.target.t1 < 0 || self.target.t2 < 0 || self.target == Coord::new(0, 0) {
            return Err(Error::Config(format!(
                "target {} has an empty causal region",
                self.target
            )));
        }
        match &self.data {
            DataSource::Simulate { sim, realizations } => {
                sim.validate()?;
                if *realizations == 0 {
                    return Err(Error::Config("no realizations requested".into()));
                }
                let bounds = self.window.map_or(sim.bounds(), |w| w.bounds);
                if !self.target.in_bounds(bounds) {
                    return Err(Error::Config(format!(
                        "target {} outside bounds {bounds}",
                        self.target
                    )));
                }
            }
            DataSource::Images { count, .. } => {
                if *count == 0 {
                    return Err(Error::Config("no images requested".into()));
                }
            }
        }
        Ok(())
    }

    fn predictor(&self, method: Method, mode: FitMode, b: f64) -> PredictorConfig<f64> {
        let mut p = PredictorConfig::new(method, mode, b);
        p.h0 = self.h0;
        p.heteroscedastic = self.heteroscedastic;
        p.ar = self.ar;
        p.warmup = self.warmup;
        p.trend_only = self.trend_only && !method.is_model_free();
        p.lc_kind = self.lc_kind;
        p
    }
}

/// One realization or image.
#[derive(Clone, Debug)]
struct CaseData {
    index: usize,
    name: String,
    seed: Option<u64>,
    field: std::result::Result<FieldGrid<f64>, String>,
    oracle: Option<f64>,
}

/// Per-case, per-row record written to the diagnostics file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case: usize,
    pub name: String,
    pub seed: Option<u64>,
    pub method: String,
    pub mode: String,
    pub b: Option<f64>,
    pub truth: Option<f64>,
    pub l2: Option<f64>,
    pub l1: Option<f64>,
    pub sq_err: Option<f64>,
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<PredictionDiagnostics>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cv_trace: Vec<CvTraceRow<f64>>,
}

/// Aggregated row of the result table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub mode: String,
    pub mse: Option<f64>,
    pub n_cases: usize,
    pub stderr: Option<f64>,
    pub runtime_ms: Option<f64>,
    pub failures: usize,
    /// False when more than 20% of the cases failed.
    pub valid: bool,
}

impl ResultRow {
    pub fn label(&self) -> String {
        format!("{}({})", self.method, self.mode)
    }
}

/// Output of [`run_experiment`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
    pub records: Vec<CaseRecord>,
    /// Inputs that could not be used (images skipped at ingestion).
    pub skipped_inputs: Vec<(String, String)>,
    pub n_cases: usize,
}

impl ResultTable {
    pub fn row(&self, method: &str, mode: &str) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.mode == mode)
    }

    pub fn mse(&self, method: Method, mode: FitMode) -> Option<f64> {
        self.row(method.name(), mode.letter()).and_then(|r| r.mse)
    }

    /// CSV with columns `method,mode,mse,n_cases,stderr,runtime_ms`.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "mode", "mse", "n_cases", "stderr", "runtime_ms"])?;
        let num = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{x:e}"));
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.mode.clone(),
                num(r.mse),
                r.n_cases.to_string(),
                num(r.stderr),
                r.runtime_ms
                    .map_or_else(|| "NA".to_string(), |x| format!("{x:.1}")),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }

    /// Markdown summary: one line per method with the P and F columns, then row details.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Point prediction results\n");
        let _ = writeln!(s, "Cases: {}\n", self.n_cases);
        let modes: Vec<String> = {
            let mut m: Vec<String> = Vec::new();
            for r in self.rows.iter().filter(|r| r.method != ORACLE) {
                if !m.contains(&r.mode) {
                    m.push(r.mode.clone());
                }
            }
            m
        };
        let _ = writeln!(s, "| Method | {} |", modes.join(" | "));
        let _ = writeln!(s, "|---|{}", "---|".repeat(modes.len()));
        let mut methods: Vec<String> = Vec::new();
        for r in self.rows.iter().filter(|r| r.method != ORACLE) {
            if !methods.contains(&r.method) {
                methods.push(r.method.clone());
            }
        }
        for m in &methods {
            let cells: Vec<String> = modes
                .iter()
                .map(|mode| match self.row(m, mode) {
                    Some(r) => match r.mse {
                        Some(v) if r.valid => format!("{v:.3e}"),
                        Some(v) => format!("{v:.3e} (invalid)"),
                        None => "NA".into(),
                    },
                    None => String::new(),
                })
                .collect();
            let _ = writeln!(s, "| {m} | {} |", cells.join(" | "));
        }
        if let Some(o) = self.rows.iter().find(|r| r.method == ORACLE) {
            let _ = writeln!(
                s,
                "\nTrue conditional mean: {}",
                o.mse.map_or("NA".into(), |v| format!("{v:.3e}"))
            );
        }
        let _ = writeln!(s, "\n| Row | MSE | SE | Cases | Failures | Valid |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        for r in &self.rows {
            let f = |v: Option<f64>| v.map_or("NA".to_string(), |x| format!("{x:.4e}"));
            let _ = writeln!(
                s,
                "| {} | {} | {} | {} | {} | {} |",
                r.label(),
                f(r.mse),
                f(r.stderr),
                r.n_cases,
                r.failures,
                if r.valid { "yes" } else { "no" }
            );
        }
        if !self.skipped_inputs.is_empty() {
            let _ = writeln!(s, "\nSkipped inputs: {}", self.skipped_inputs.len());
            for (n, e) in &self.skipped_inputs {
                let _ = writeln!(s, "- {n}: {e}");
            }
        }
        s
    }

    /// Line-delimited JSON of every case record.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        Ok(s)
    }
}

/// Per-case seeds derived from the master seed.
pub fn case_seeds(master: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..n).map(|_| rng.random::<u64>()).collect()
}

fn load_cases(cfg: &ExperimentConfig) -> Result<(Vec<CaseData>, Vec<(String, String)>)> {
    match &cfg.data {
        DataSource::Simulate { sim, realizations } => {
            let seeds = case_seeds(cfg.seed, *realizations);
            let cases = seeds
                .into_iter()
                .enumerate()
                .map(|(index, seed)| {
                    let mut s = sim.clone();
                    s.seed = seed;
                    let field = simulate_field::<f64>(&s).map_err(|e| e.to_string());
                    let full_target = cfg.window.map_or(cfg.target, |w| w.origin + cfg.target);
                    let oracle = field
                        .as_ref()
                        .ok()
                        .and_then(|f| s.conditional_mean(f, full_target).ok());
                    CaseData {
                        index,
                        name: format!("realization-{index}"),
                        seed: Some(seed),
                        field,
                        oracle,
                    }
                })
                .collect();
            Ok((cases, Vec::new()))
        }
        DataSource::Images {
            dir,
            channel,
            count,
        } => {
            let corpus = ingest_images::<f64>(dir, *channel, *count)?;
            let skipped = corpus
                .skipped
                .into_iter()
                .map(|(n, e)| (n, e.to_string()))
                .collect();
            let cases = corpus
                .fields
                .into_iter()
                .enumerate()
                .map(|(index, (name, field))| CaseData {
                    index,
                    name,
                    seed: None,
                    field: Ok(field),
                    oracle: None,
                })
                .collect();
            Ok((cases, skipped))
        }
    }
}

fn cv_for(
    cfg: &ExperimentConfig,
    field: &FieldGrid<f64>,
    method: Method,
) -> Result<CvSelection<f64>> {
    let region = nshp_region(cfg.target, field.bounds())?;
    if cfg.cv.fast {
        return select_bandwidth(field, &region, method, &cfg.cv, None);
    }
    let predictor = |f: &FieldGrid<f64>, o: &[Coord], k: usize, b: f64| -> Result<f64> {
        let mut p = cfg.predictor(method, FitMode::Predictive, b);
        if method.is_model_free() && cfg.h0.is_none() {
            p.h0 = Some(plug_in_h0(f, &o[..k]));
        }
        Ok(predict(f, o[k], &p)?.l2)
    };
    select_bandwidth(
        field,
        &region,
        method,
        &cfg.cv,
        Some(&predictor as &dyn OneStepPredictor<f64>),
    )
}

fn run_case(cfg: &ExperimentConfig, case: &CaseData) -> Vec<CaseRecord> {
    let mut out = Vec::new();
    let record = |method: &str, mode: &str| CaseRecord {
        case: case.index,
        name: case.name.clone(),
        seed: case.seed,
        method: method.to_string(),
        mode: mode.to_string(),
        b: None,
        truth: None,
        l2: None,
        l1: None,
        sq_err: None,
        error: None,
        runtime_ms: None,
        diagnostics: None,
        cv_trace: Vec::new(),
    };
    let field = match &case.field {
        Ok(f) => match cfg.window {
            Some(w) => f.window(w.origin, w.bounds).map_err(|e| e.to_string()),
            None => Ok(f.clone()),
        },
        Err(e) => Err(e.clone()),
    };
    let field = match field {
        Ok(f) if cfg.target.in_bounds(f.bounds()) => f,
        other => {
            let msg = match other {
                Ok(f) => format!("target {} outside field bounds {}", cfg.target, f.bounds()),
                Err(e) => e,
            };
            for &m in &cfg.methods {
                for &mode in &cfg.modes {
                    let mut r = record(m.name(), mode.letter());
                    r.error = Some(msg.clone());
                    out.push(r);
                }
            }
            return out;
        }
    };
    let truth = field.get(cfg.target);
    for &method in &cfg.methods {
        let t0 = Instant::now();
        let selection = match cfg.bandwidth {
            Some(b) => Ok(CvSelection {
                b,
                trace: Vec::new(),
            }),
            None => cv_for(cfg, &field, method),
        };
        let cv_ms = t0.elapsed().as_secs_f64() * 1e3;
        for &mode in &cfg.modes {
            let mut r = record(method.name(), mode.letter());
            r.truth = Some(truth);
            match &selection {
                Err(e) => r.error = Some(e.to_string()),
                Ok(sel) => {
                    r.b = Some(sel.b);
                    if mode == cfg.modes[0] {
                        r.cv_trace = sel.trace.clone();
                    }
                    let t1 = Instant::now();
                    match predict(&field, cfg.target, &cfg.predictor(method, mode, sel.b)) {
                        Ok(p) => {
                            r.l2 = Some(p.l2);
                            r.l1 = Some(p.l1);
                            r.sq_err = Some((p.l2 - truth).powi(2));
                            r.diagnostics = Some(p.diagnostics);
                        }
                        Err(e) => r.error = Some(e.to_string()),
                    }
                    if cfg.timings {
                        r.runtime_ms = Some(cv_ms + t1.elapsed().as_secs_f64() * 1e3);
                    }
                }
            }
            out.push(r);
        }
    }
    if cfg.oracle_row {
        let mut r = record(ORACLE, "-");
        r.truth = Some(truth);
        match case.oracle {
            Some(o) => {
                r.l2 = Some(o);
                r.l1 = Some(o);
                r.sq_err = Some((o - truth).powi(2));
            }
            None => r.error = Some("true conditional mean unavailable".into()),
        }
        out.push(r);
    }
    out
}

fn aggregate(
    records: &[CaseRecord],
    method: &str,
    mode: &str,
    n_cases: usize,
    timings: bool,
) -> ResultRow {
    let rs: Vec<&CaseRecord> = records
        .iter()
        .filter(|r| r.method == method && r.mode == mode)
        .collect();
    let errs: Vec<f64> = rs.iter().filter_map(|r| r.sq_err).collect();
    let failures = rs.len() - errs.len();
    let n = errs.len();
    let (mse, stderr) = if n == 0 {
        (None, None)
    } else {
        let m = errs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            (errs.iter().map(|e| (e - m).powi(2)).sum::<f64>() / (n - 1) as f64 / n as f64).sqrt()
        } else {
            0.0
        };
        (Some(m), Some(se))
    };
    let runtime_ms = timings.then(|| {
        let ts: Vec<f64> = rs.iter().filter_map(|r| r.runtime_ms).collect();
        ts.iter().sum::<f64>() / ts.len().max(1) as f64
    });
    ResultRow {
        method: method.to_string(),
        mode: mode.to_string(),
        mse,
        n_cases: n,
        stderr,
        runtime_ms,
        failures,
        valid: n > 0 && failures * 5 <= n_cases,
    }
}

/// Run every case and aggregate one row per (method, mode).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultTable> {
    cfg.validate()?;
    let (cases, skipped_inputs) = load_cases(cfg)?;
    if cases.is_empty() {
        return Err(Error::Config("no usable cases".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let per_case: Vec<Vec<CaseRecord>> =
        pool.install(|| cases.par_iter().map(|c| run_case(cfg, c)).collect());
    let records: Vec<CaseRecord> = per_case.into_iter().flatten().collect();
    let mut rows = Vec::new();
    for &m in &cfg.methods {
        for &mode in &cfg.modes {
            rows.push(aggregate(
                &records,
                m.name(),
                mode.letter(),
                cases.len(),
                cfg.timings,
            ));
        }
    }
    if cfg.oracle_row {
        rows.push(aggregate(&records, ORACLE, "-", cases.len(), false));
    }
    Ok(ResultTable {
        rows,
        records,
        skipped_inputs,
        n_cases: cases.len(),
    })
}

/// Write `results.csv`, `summary.md`, `diagnostics.jsonl` and `config.json` into `dir`.
pub fn write_outputs(table: &ResultTable, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), table.to_csv()?)?;
    fs::write(dir.join("summary.md"), table.to_markdown())?;
    fs::write(dir.join("diagnostics.jsonl"), table.to_jsonl()?)?;
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    Ok(())
}

/// Write a CV trace as CSV with columns `b,score,skipped,error`.
pub fn cv_trace_csv(trace: &[CvTraceRow<f64>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["b", "score", "skipped", "error"])?;
    for r in trace {
        w.write_record([
            format!("{}", r.b),
            r.score.map_or("NA".into(), |s| format!("{s:e}")),
            r.skipped.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}
