//! Monte Carlo estimates of small-ball probabilities for the process with
//! covariance `(1 - exp(-t - s)) / (t + s)`.

mod fit;
mod grid;
mod io;
mod sampler;

pub use fit::{scaling_fit, scaling_fit_points, FitPoint, ScalingFit};
pub use grid::{build_grid, factor_covariance, CovarianceFactor, SimGrid, JITTER_SCHEDULE};
pub use io::{read_csv, write_csv};
pub use sampler::{
    simulate_delta_probability, simulate_refinement, simulate_sup_probability, wilson_interval,
    DeltaSimResult, RefinementReport, SimConfig, SimResult, SimRow, CHUNK_SIZE, MIN_SAMPLES,
    WILSON_Z,
};
