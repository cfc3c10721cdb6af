//! Backend dispatch for the structured-reservoir dynamics.

use serde::{Deserialize, Serialize};

use crate::chain::{AmplitudeTrajectory, ChainConfig, Frame};
use crate::error::{Error, Result};
use crate::inversion::{invert_laplace_vec, InversionSettings, Method};
use crate::kernels::kernel_for;
use crate::laplace::{taylor_coefficients, transforms};
use crate::reservoir::SpectralDensity;
use crate::volterra::{solve_volterra_with_diagnostics, VolterraSettings};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Volterra,
    Laplace,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Volterra => "volterra",
            Backend::Laplace => "laplace",
        })
    }
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "volterra" => Ok(Backend::Volterra),
            "laplace" => Ok(Backend::Laplace),
            other => Err(Error::InvalidSettings(format!("unknown backend `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub volterra: VolterraSettings,
    pub inversion: InversionSettings,
}

impl SolverSettings {
    pub fn new(t_end: f64, n_samples: usize) -> Self {
        SolverSettings {
            volterra: VolterraSettings::new(t_end, n_samples),
            inversion: InversionSettings::new(Method::BromwichFft, t_end, n_samples),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverDiagnostics {
    pub backend: Backend,
    /// Volterra: finest internal step.
    pub step: Option<f64>,
    /// Volterra: population change under one more refinement.
    pub gate_change: Option<f64>,
    /// Laplace: inversion method.
    pub inversion: Option<Method>,
}

/// Tilde-frame amplitudes on the uniform grid of the chosen backend.
pub fn solve_nonmarkovian(
    cfg: &ChainConfig,
    sd: &SpectralDensity,
    backend: Backend,
    settings: &SolverSettings,
) -> Result<AmplitudeTrajectory> {
    solve_nonmarkovian_with_diagnostics(cfg, sd, backend, settings).map(|(t, _)| t)
}

pub fn solve_nonmarkovian_with_diagnostics(
    cfg: &ChainConfig,
    sd: &SpectralDensity,
    backend: Backend,
    settings: &SolverSettings,
) -> Result<(AmplitudeTrajectory, SolverDiagnostics)> {
    match backend {
        Backend::Volterra => {
            let (traj, d) = solve_volterra_with_diagnostics(cfg, sd, &settings.volterra)?;
            Ok((
                traj,
                SolverDiagnostics {
                    backend,
                    step: Some(d.finest_step),
                    gate_change: d.gate_change,
                    inversion: None,
                },
            ))
        }
        Backend::Laplace => {
            let traj = solve_laplace(cfg, sd, &settings.inversion)?;
            Ok((
                traj,
                SolverDiagnostics {
                    backend,
                    step: None,
                    gate_change: None,
                    inversion: Some(settings.inversion.method),
                },
            ))
        }
    }
}

/// Inverts the closed-form transforms of all sites at once.
pub fn solve_laplace(
    cfg: &ChainConfig,
    sd: &SpectralDensity,
    settings: &InversionSettings,
) -> Result<AmplitudeTrajectory> {
    let kernel = kernel_for(sd)?;
    let derivs = taylor_coefficients(cfg, &kernel, settings.tail_terms.max(1) - 1);
    let rows = invert_laplace_vec(
        |s| transforms(s, cfg, &kernel),
        cfg.n_qubits(),
        &derivs,
        settings,
    )?;
    AmplitudeTrajectory::new(settings.times(), rows, Frame::Tilde)
}
