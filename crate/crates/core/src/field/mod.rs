//! Kernel representations, discretized stable random measures and field
//! simulation.

mod grid;
mod io;
mod model;
mod simulate;

pub use grid::DiscreteMeasureGrid;
pub use io::{read_observations_csv, write_realization_csv, Observations};
pub use model::{eval_kernel, CovarianceFamily, CovarianceModel, FieldModel, MaKernel, ModelKind};
pub use simulate::{
    simulate, simulate_field, simulate_gaussian_field, simulate_measure,
    simulate_subgaussian_field, FieldRealization, GaussianFieldSimulator, KernelFieldSimulator,
    Provenance, SubGaussianFieldSimulator, COVERAGE_TOLERANCE, DEFAULT_JITTER,
};
