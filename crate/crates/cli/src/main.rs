use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use lsrf::ar2d::Criterion;
use lsrf::cv::{select_bandwidth, CvSpec, Loss, OneStepPredictor};
use lsrf::harness::experiment::{
    cv_trace_csv, run_experiment, write_outputs, DataSource, ExperimentConfig,
};
use lsrf::harness::images::{list_images, load_channel, standardize, Channel};
use lsrf::harness::io::{read_field, write_field};
use lsrf::harness::sim::{simulate_field, SimConfig, TrendSpec};
use lsrf::{
    nshp_region, predict, ArOrderConfig, Coord, FieldGrid, FitMode, Method, PredictorConfig,
};

#[derive(Parser)]
#[command(
    name = "lsrf",
    version,
    about = "One-step-ahead prediction for locally stationary 2D random fields"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a trend-plus-AR field and write it as a text field file.
    Simulate(SimulateArgs),
    /// Predict one site from its causal past and print the result as JSON.
    Predict(PredictArgs),
    /// Print the cross-validation trace for one method as CSV.
    Cv(CvArgs),
    /// Run a benchmark experiment and write results.csv, summary.md and diagnostics.jsonl.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON simulation config; defaults to the reference three-term AR model.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 102)]
    n1: usize,
    #[arg(long, default_value_t = 102)]
    n2: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    tau: Option<f64>,
    /// Drop the trend surface.
    #[arg(long)]
    no_trend: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FieldArgs {
    /// Text field file, or an image (one channel, standardized).
    #[arg(long)]
    field: PathBuf,
    #[arg(long, default_value = "R")]
    channel: String,
    /// Target row (0-based).
    #[arg(long)]
    t1: i64,
    /// Target column (0-based).
    #[arg(long)]
    t2: i64,
    #[arg(long, value_parser = parse_method)]
    method: Method,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    h0: Option<f64>,
    #[arg(long)]
    heteroscedastic: bool,
    #[arg(long, default_value_t = 2)]
    p_max: usize,
    #[arg(long, default_value_t = 2)]
    q_max: usize,
    #[arg(long, value_enum, default_value_t = CritArg::Bic)]
    criterion: CritArg,
    #[arg(long, default_value_t = lsrf::trend::DEFAULT_WARMUP)]
    warmup: usize,
    /// Model-based methods: report the trend only.
    #[arg(long)]
    trend_only: bool,
}

#[derive(Args)]
struct CvOpts {
    /// Comma-separated bandwidth grid.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Exact one-step cross-validation with the full predictor instead of the fast surrogate.
    #[arg(long)]
    full_cv: bool,
    #[arg(long, value_enum, default_value_t = LossArg::L2)]
    loss: LossArg,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long, value_parser = parse_mode, default_value = "P")]
    mode: FitMode,
    /// Spatial bandwidth; cross-validated when absent.
    #[arg(long)]
    b: Option<f64>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    cv: CvOpts,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    field: FieldArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    cv: CvOpts,
    /// Write the trace here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON experiment config; when absent a preset is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Preset::Synthetic)]
    preset: Preset,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
    /// Number of realizations or images.
    #[arg(long)]
    cases: Option<usize>,
    /// Image directory (for the images preset or to override the config).
    #[arg(long)]
    images: Option<PathBuf>,
    /// Fixed bandwidth for every method.
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    full_cv: bool,
    /// Add the true conditional mean row (simulations only).
    #[arg(long)]
    oracle: bool,
    /// Record wall-clock runtimes.
    #[arg(long)]
    timings: bool,
    /// Comma-separated subset of methods.
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Option<Vec<Method>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// 102 x 102 simulations, target (50, 50), 100 realizations.
    Synthetic,
    /// 51 x 51 simulations, target (25, 25), 20 realizations.
    SyntheticSmall,
    /// 32 x 32 image patches, target (16, 16).
    Images,
}

#[derive(Clone, Copy, ValueEnum)]
enum CritArg {
    Aic,
    Bic,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    L2,
    L1,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: lsrf::Error| e.to_string())
}

fn parse_mode(s: &str) -> Result<FitMode, String> {
    s.parse().map_err(|e: lsrf::Error| e.to_string())
}

fn load_field(path: &Path, channel: &str) -> Result<FieldGrid<f64>> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase();
    if ["png", "pgm", "ppm", "pnm", "pbm"].contains(&ext.as_str()) {
        let channel: Channel = channel.parse()?;
        let (h, w, v) = load_channel(path, channel)?;
        let z = standardize(&v).with_context(|| format!("{} has zero variance", path.display()))?;
        return Ok(FieldGrid::new(h, w, z)?);
    }
    read_field(path).with_context(|| format!("reading {}", path.display()))
}

impl ModelArgs {
    fn apply(&self, p: &mut PredictorConfig<f64>) {
        p.h0 = self.h0;
        p.heteroscedastic = self.heteroscedastic;
        p.ar = ArOrderConfig {
            p_max: self.p_max,
            q_max: self.q_max,
            criterion: match self.criterion {
                CritArg::Aic => Criterion::Aic,
                CritArg::Bic => Criterion::Bic,
            },
            fixed: None,
        };
        p.warmup = self.warmup;
        p.trend_only = self.trend_only;
    }
}

impl CvOpts {
    fn spec(&self, warmup: usize) -> CvSpec<f64> {
        CvSpec {
            b_grid: self.grid.clone(),
            loss: match self.loss {
                LossArg::L2 => Loss::L2,
                LossArg::L1 => Loss::L1,
            },
            fast: !self.full_cv,
            warmup,
            ..CvSpec::default()
        }
    }
}

fn run_cv(
    field: &FieldGrid<f64>,
    fa: &FieldArgs,
    model: &ModelArgs,
    opts: &CvOpts,
) -> Result<lsrf::cv::CvSelection<f64>> {
    let target = Coord::new(fa.t1, fa.t2);
    let region = nshp_region(target, field.bounds())?;
    let spec = opts.spec(model.warmup);
    let method = fa.method;
    let predictor = |f: &FieldGrid<f64>, o: &[Coord], k: usize, b: f64| -> lsrf::Result<f64> {
        let mut p = PredictorConfig::new(method, FitMode::Predictive, b);
        model.apply(&mut p);
        Ok(predict(f, o[k], &p)?.l2)
    };
    let full = (!spec.fast).then_some(&predictor as &dyn OneStepPredictor<f64>);
    Ok(select_bandwidth(field, &region, method, &spec, full)?)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str::<SimConfig>(&fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => SimConfig::reference(a.n1, a.n2, a.seed),
    };
    cfg.seed = a.seed;
    if let Some(t) = a.tau {
        cfg.tau = t;
    }
    if a.no_trend {
        cfg.trend = TrendSpec::None;
    }
    let field = simulate_field::<f64>(&cfg)?;
    write_field(&a.out, &field)?;
    Ok(())
}

fn predict_cmd(a: PredictArgs) -> Result<()> {
    let field = load_field(&a.field.field, &a.field.channel)?;
    let b = match a.b {
        Some(b) => b,
        None => run_cv(&field, &a.field, &a.model, &a.cv)?.b,
    };
    let mut p = PredictorConfig::new(a.field.method, a.mode, b);
    a.model.apply(&mut p);
    let res = predict(&field, Coord::new(a.field.t1, a.field.t2), &p)?;
    println!("{}", serde_json::to_string_pretty(&res)?);
    Ok(())
}

fn cv_cmd(a: CvArgs) -> Result<()> {
    let field = load_field(&a.field.field, &a.field.channel)?;
    let sel = run_cv(&field, &a.field, &a.model, &a.cv)?;
    let csv = cv_trace_csv(&sel.trace)?;
    match &a.out {
        Some(p) => fs::write(p, csv)?,
        None => print!("{csv}"),
    }
    eprintln!("selected b = {}", sel.b);
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str::<ExperimentConfig>(&fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => match a.preset {
            Preset::Synthetic => ExperimentConfig::synthetic(100),
            Preset::SyntheticSmall => ExperimentConfig::synthetic_small(20),
            Preset::Images => {
                let dir = a
                    .images
                    .clone()
                    .context("the images preset needs --images DIR")?;
                let n = list_images(&dir)?.len();
                ExperimentConfig::images(dir, n.max(1))
            }
        },
    };
    cfg.seed = a.seed;
    cfg.workers = a.workers;
    match (&mut cfg.data, a.cases, &a.images) {
        (DataSource::Simulate { realizations, .. }, Some(n), _) => *realizations = n,
        (DataSource::Images { count, .. }, n, dir) => {
            if let Some(n) = n {
                *count = n;
            }
            if let Some(d) = dir {
                if let DataSource::Images { dir: cd, .. } = &mut cfg.data {
                    *cd = d.clone();
                }
            }
        }
        (DataSource::Simulate { .. }, None, Some(_)) => {
            bail!("--images only applies to image experiments")
        }
        _ => {}
    }
    if a.b.is_some() {
        cfg.bandwidth = a.b;
    }
    if a.full_cv {
        cfg.cv.fast = false;
    }
    cfg.oracle_row |= a.oracle;
    cfg.timings |= a.timings;
    if let Some(m) = a.methods {
        cfg.methods = m;
    }
    let table = run_experiment(&cfg)?;
    write_outputs(&table, &cfg, &a.out)?;
    print!("{}", table.to_markdown());
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Predict(a) => predict_cmd(a),
        Command::Cv(a) => cv_cmd(a),
        Command::Bench(a) => bench(a),
    }
}
