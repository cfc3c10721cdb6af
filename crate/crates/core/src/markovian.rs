//! Chain dynamics with a flat-spectrum (Markovian) reservoir on the last site,
//! and the envelope half-life used to compare reservoirs.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{AmplitudeTrajectory, ChainConfig, Frame};
use crate::error::{Error, Result};
use crate::ode::{integrate, StepControl};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeSettings {
    pub dt_max: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    pub n_samples: usize,
}

impl OdeSettings {
    pub fn new(t_end: f64, n_samples: usize) -> Self {
        OdeSettings {
            dt_max: 0.5,
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            t_end,
            n_samples,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::InvalidSettings(format!("t_end must be positive, got {}", self.t_end)));
        }
        if self.n_samples < 2 {
            return Err(Error::InvalidSettings("n_samples must be at least 2".into()));
        }
        self.control().validate()
    }

    fn control(&self) -> StepControl {
        StepControl {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            dt_max: self.dt_max,
        }
    }
}

/// Uniform grid of `n` points on `[0, t_end]`.
pub fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    let dt = t_end / (n - 1) as f64;
    (0..n)
        .map(|i| if i + 1 == n { t_end } else { i as f64 * dt })
        .collect()
}

/// Tilde-frame amplitudes for a Markovian reservoir of rate `gamma_m`.
///
/// The rotating-frame system with constant generator (hopping plus −γ_M on
/// the last site) is integrated and the decay of the last site divided out
/// afterwards, since the tilde equations themselves carry a growing e^{γ_M t}.
pub fn solve_markovian(
    cfg: &ChainConfig,
    gamma_m: f64,
    settings: &OdeSettings,
) -> Result<AmplitudeTrajectory> {
    settings.validate()?;
    if !(gamma_m.is_finite() && gamma_m >= 0.0) {
        return Err(Error::InvalidReservoir(format!(
            "gamma_m must be finite and non-negative, got {gamma_m}"
        )));
    }
    let n = cfg.n_qubits();
    let times = uniform_grid(settings.t_end, settings.n_samples);
    let rhs = |_t: f64, c: &[Complex64], dc: &mut [Complex64]| {
        cfg.apply_hopping(c, dc);
        dc[n - 1] -= gamma_m * c[n - 1];
    };
    let mut rows = integrate(rhs, cfg.initial_amplitudes(), &times, settings.control())?;
    for (t, row) in times.iter().zip(rows.iter_mut()) {
        row[n - 1] *= (gamma_m * t).exp();
    }
    AmplitudeTrajectory::new(times, rows, Frame::Tilde)
}

/// Vertices of the decreasing envelope: samples not exceeded by any later
/// sample. For a monotone signal every sample is a vertex.
fn envelope_vertices(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut running = f64::NEG_INFINITY;
    for i in (0..values.len()).rev() {
        if values[i] >= running {
            running = values[i];
            out.push(i);
        }
    }
    out.reverse();
    out
}

/// First time the decreasing envelope of `values` crosses half of `values[0]`.
/// Returns `None` when it never does.
pub fn envelope_half_life(times: &[f64], values: &[f64]) -> Option<f64> {
    let target = 0.5 * values.first()?;
    let vertices = envelope_vertices(values);
    if values[vertices[0]] <= target {
        return Some(times[0]);
    }
    for w in vertices.windows(2) {
        let (a, b) = (w[0], w[1]);
        if values[b] <= target {
            let (ta, tb, va, vb) = (times[a], times[b], values[a], values[b]);
            return Some(ta + (tb - ta) * (va - target) / (va - vb));
        }
    }
    None
}

/// Half-life of the population of `site` (lab frame).
pub fn half_life(traj: &AmplitudeTrajectory, site: usize) -> Result<f64> {
    if traj.frame != Frame::Lab {
        return Err(Error::FrameMismatch {
            expected: Frame::Lab,
            found: traj.frame,
        });
    }
    if site >= traj.n_sites() {
        return Err(Error::DimensionMismatch(format!(
            "site {site} out of range for {} sites",
            traj.n_sites()
        )));
    }
    envelope_half_life(&traj.times, &traj.population(site)).ok_or(Error::NoHalfLife { site })
}
