//! Single-excitation dynamics of an XX qubit chain whose last site couples to
//! a Markovian or a structured (non-Markovian) reservoir, and the
//! trace-decay-corrected state distances between the two damped evolutions.
//!
//! The usual pipeline is
//! [`markovian::solve_markovian`] and [`nonmarkovian::solve_nonmarkovian`] for
//! tilde-frame amplitudes, [`chain::to_lab_frame`] and
//! [`chain::density_matrix`] for the density matrices, then
//! [`qsd::qsd_series`] for the distance series. [`scenario`] wires all of it
//! together from a TOML scenario file and [`emit`] writes the results.

pub mod chain;
pub mod emit;
pub mod error;
pub mod inversion;
pub mod kernels;
pub mod laplace;
pub mod markovian;
pub mod nonmarkovian;
pub mod ode;
pub mod qsd;
pub mod reservoir;
pub mod scenario;
pub mod special;
pub mod volterra;

pub use chain::{AmplitudeTrajectory, ChainConfig, DensityMatrixSeries, Frame};
pub use error::{Error, Result};
pub use kernels::{kernel_for, MemoryKernel};
pub use qsd::{Measure, QsdSeries};
pub use reservoir::SpectralDensity;
