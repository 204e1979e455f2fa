//! Simulation and linear extrapolation of alpha-stable random fields with
//! `1 < alpha <= 2`.
//!
//! Fields are given either by a kernel representation `X(t) = int f_t dM`
//! over a stable random measure (Lévy sheet, moving averages,
//! Ornstein-Uhlenbeck) or as sub-Gaussian fields `A^{1/2} G`. Everything is
//! generic over the floating-point type; `f64` aliases are provided below.

pub mod covariation;
pub mod error;
pub mod experiments;
pub mod field;
pub mod linalg;
pub mod point;
pub mod predictors;
pub mod rng;
pub mod scalar;
pub mod stable;

pub use covariation::{CovariationSystem, FullDimensionality, SiteSystem};
pub use error::{Error, Result};
pub use experiments::{BenchmarkConfig, BenchmarkReport, DeviationSummary};
pub use field::{
    CovarianceFamily, CovarianceModel, DiscreteMeasureGrid, FieldModel, FieldRealization,
    MaKernel, ModelKind, Observations,
};
pub use point::Point;
pub use predictors::{Extrapolator, Method, PredictionProblem, PredictorWeights, SolverOptions};
pub use rng::{RngStream, RNG_VERSION};
pub use scalar::Scalar;
pub use stable::StableParams;

pub type PointF64 = Point<f64>;
pub type StableParamsF64 = StableParams<f64>;
pub type DiscreteMeasureGridF64 = DiscreteMeasureGrid<f64>;
pub type CovarianceModelF64 = CovarianceModel<f64>;
pub type FieldModelF64 = FieldModel<f64>;
pub type FieldRealizationF64 = FieldRealization<f64>;
pub type SiteSystemF64 = SiteSystem<f64>;
pub type ExtrapolatorF64 = Extrapolator<f64>;
pub type PredictorWeightsF64 = PredictorWeights<f64>;
pub type BenchmarkConfigF64 = BenchmarkConfig<f64>;

pub type PointF32 = Point<f32>;
pub type StableParamsF32 = StableParams<f32>;
pub type FieldModelF32 = FieldModel<f32>;
pub type SiteSystemF32 = SiteSystem<f32>;
pub type ExtrapolatorF32 = Extrapolator<f32>;
