//! One-step-ahead prediction for locally stationary random fields on a 2D lattice.
//!
//! Model-based predictors fit a local trend, standardize, and predict the
//! residual with a causal 2D autoregression. Model-free predictors transform the
//! past to i.i.d. normals through local conditional CDFs and a Gaussian
//! whitening, then map the innovations back through the inverse transform at the
//! target.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the harness and
//! the CLI work in `f64`.

// `!(x > 0)` is used on purpose so NaN fails validation.
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::type_complexity
)]

pub mod ar2d;
pub mod cv;
pub mod dist;
pub mod error;
pub mod field;
pub mod geometry;
pub mod harness;
pub mod kernels;
pub mod linalg;
pub mod normal;
pub mod predictors;
pub mod real;
pub mod transform;
pub mod trend;

pub use ar2d::{select_order, ArModel2D, Criterion};
pub use cv::{select_bandwidth, CvSelection, CvSpec, Loss};
pub use dist::{estimate_cdf, invert_cdf, CdfEstimate, CdfKind};
pub use error::{Error, Result};
pub use field::FieldGrid;
pub use geometry::{nshp_region, ros_lags, Coord, NshpRegion, RosLagSet};
pub use kernels::{FitMode, KernelSpec, Smoother};
pub use predictors::{mb_predict, mf_predict, predict, Method, PredictionResult, PredictorConfig};
pub use real::Real;
pub use transform::{forward_transform, ArOrderConfig, TransformConfig};

pub type FieldGridF32 = FieldGrid<f32>;
pub type FieldGridF64 = FieldGrid<f64>;
pub type PredictorConfigF32 = PredictorConfig<f32>;
pub type PredictorConfigF64 = PredictorConfig<f64>;
pub type PredictionResultF32 = PredictionResult<f32>;
pub type PredictionResultF64 = PredictionResult<f64>;
pub type ArModel2DF32 = ArModel2D<f32>;
pub type ArModel2DF64 = ArModel2D<f64>;
