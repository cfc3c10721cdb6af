//! Chain configuration, amplitude trajectories and the density matrices built
//! from them.
//!
//! Sites are indexed `0..N` in code; site `N-1` is the one coupled to the
//! reservoir. Amplitudes live either in the tilde frame produced by the
//! solvers (global phase removed, and for a Markovian reservoir the decay of
//! the last site divided out) or in the lab frame.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reservoir::SpectralDensity;

/// Tolerance on Σ|c_i(0)|² = 1.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Largest excursion of the raw environment population outside `[0, 1]`
/// before it is reported as a solver inaccuracy.
pub const CLAMP_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    n_qubits: usize,
    coupling: f64,
    initial_amplitudes: Vec<Complex64>,
    omega_e: f64,
    omega_g: f64,
}

impl ChainConfig {
    /// Chain of `n_qubits` with the excitation initially on the first qubit
    /// and zero level energies.
    pub fn new(n_qubits: usize, coupling: f64) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidChain("chain needs at least one qubit".into()));
        }
        let mut c0 = vec![Complex64::new(0.0, 0.0); n_qubits];
        c0[0] = Complex64::new(1.0, 0.0);
        Self::with_initial_state(n_qubits, coupling, c0)
    }

    pub fn with_initial_state(
        n_qubits: usize,
        coupling: f64,
        initial_amplitudes: Vec<Complex64>,
    ) -> Result<Self> {
        let cfg = ChainConfig {
            n_qubits,
            coupling,
            initial_amplitudes,
            omega_e: 0.0,
            omega_g: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets the qubit level energies. Only the global phase of the lab-frame
    /// amplitudes depends on them.
    pub fn with_level_energies(mut self, omega_e: f64, omega_g: f64) -> Result<Self> {
        self.omega_e = omega_e;
        self.omega_g = omega_g;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 {
            return Err(Error::InvalidChain("chain needs at least one qubit".into()));
        }
        if !(self.coupling.is_finite() && self.coupling > 0.0) {
            return Err(Error::InvalidChain(format!(
                "coupling must be positive and finite, got {}",
                self.coupling
            )));
        }
        if self.initial_amplitudes.len() != self.n_qubits {
            return Err(Error::InvalidChain(format!(
                "{} initial amplitudes for {} qubits",
                self.initial_amplitudes.len(),
                self.n_qubits
            )));
        }
        let norm: f64 = self.initial_amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidChain(format!(
                "initial state must carry exactly one excitation, Σ|c_i(0)|² = {norm}"
            )));
        }
        if !self.omega_e.is_finite() || !self.omega_g.is_finite() {
            return Err(Error::InvalidChain("level energies must be finite".into()));
        }
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    /// k = 2/𝒥.
    pub fn k(&self) -> f64 {
        2.0 / self.coupling
    }

    pub fn initial_amplitudes(&self) -> &[Complex64] {
        &self.initial_amplitudes
    }

    pub fn omega_e(&self) -> f64 {
        self.omega_e
    }

    pub fn omega_g(&self) -> f64 {
        self.omega_g
    }

    pub fn omega_eg(&self) -> f64 {
        self.omega_e - self.omega_g
    }

    /// Energy ω_e + (N−1)ω_g of any single-excitation chain state.
    pub fn single_excitation_energy(&self) -> f64 {
        self.omega_e + (self.n_qubits as f64 - 1.0) * self.omega_g
    }

    /// Applies the nearest-neighbour hopping generator
    /// `out_i = −i(𝒥/2)(c_{i−1} + c_{i+1})`.
    pub(crate) fn apply_hopping(&self, c: &[Complex64], out: &mut [Complex64]) {
        let n = self.n_qubits;
        let half = Complex64::new(0.0, -0.5 * self.coupling);
        for i in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            if i > 0 {
                acc += c[i - 1];
            }
            if i + 1 < n {
                acc += c[i + 1];
            }
            out[i] = half * acc;
        }
    }

    /// Dense hopping generator (N×N) as used by the implicit steppers.
    pub(crate) fn hopping_matrix(&self) -> DMatrix<Complex64> {
        let n = self.n_qubits;
        let half = Complex64::new(0.0, -0.5 * self.coupling);
        DMatrix::from_fn(n, n, |i, j| {
            if i.abs_diff(j) == 1 {
                half
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    Lab,
    Tilde,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeTrajectory {
    pub times: Vec<f64>,
    /// `amplitudes[t][i]` is the amplitude of site `i` at `times[t]`.
    pub amplitudes: Vec<Vec<Complex64>>,
    pub frame: Frame,
}

impl AmplitudeTrajectory {
    pub fn new(times: Vec<f64>, amplitudes: Vec<Vec<Complex64>>, frame: Frame) -> Result<Self> {
        if times.len() != amplitudes.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} times but {} amplitude rows",
                times.len(),
                amplitudes.len()
            )));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::DimensionMismatch("time grid must be strictly increasing".into()));
        }
        if let Some(first) = amplitudes.first() {
            if amplitudes.iter().any(|row| row.len() != first.len()) {
                return Err(Error::DimensionMismatch("ragged amplitude rows".into()));
            }
        }
        Ok(AmplitudeTrajectory {
            times,
            amplitudes,
            frame,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.amplitudes.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// |c_site(t)|² over the grid.
    pub fn population(&self, site: usize) -> Vec<f64> {
        self.amplitudes.iter().map(|row| row[site].norm_sqr()).collect()
    }

    /// Σ_i |c_i(t)|² over the grid.
    pub fn total_population(&self) -> Vec<f64> {
        self.amplitudes
            .iter()
            .map(|row| row.iter().map(|c| c.norm_sqr()).sum())
            .collect()
    }

    fn expect_frame(&self, expected: Frame) -> Result<()> {
        if self.frame != expected {
            return Err(Error::FrameMismatch {
                expected,
                found: self.frame,
            });
        }
        Ok(())
    }
}

/// Lab-frame factor multiplying the tilde amplitude of `site` at time `t`.
fn lab_factor(cfg: &ChainConfig, reservoir: &SpectralDensity, site: usize, t: f64) -> Complex64 {
    let phase = Complex64::from_polar(1.0, -cfg.single_excitation_energy() * t);
    match reservoir {
        SpectralDensity::Markovian { gamma_m } if site + 1 == cfg.n_qubits() => {
            phase * (-gamma_m * t).exp()
        }
        _ => phase,
    }
}

/// Converts solver output from the tilde frame to lab-frame amplitudes.
pub fn to_lab_frame(
    traj: &AmplitudeTrajectory,
    cfg: &ChainConfig,
    reservoir: &SpectralDensity,
) -> Result<AmplitudeTrajectory> {
    traj.expect_frame(Frame::Tilde)?;
    if traj.n_sites() != cfg.n_qubits() {
        return Err(Error::DimensionMismatch(format!(
            "trajectory has {} sites, chain has {}",
            traj.n_sites(),
            cfg.n_qubits()
        )));
    }
    let amplitudes = traj
        .times
        .iter()
        .zip(&traj.amplitudes)
        .map(|(&t, row)| {
            row.iter()
                .enumerate()
                .map(|(i, &c)| c * lab_factor(cfg, reservoir, i, t))
                .collect()
        })
        .collect();
    Ok(AmplitudeTrajectory {
        times: traj.times.clone(),
        amplitudes,
        frame: Frame::Lab,
    })
}

/// Inverse of [`to_lab_frame`].
pub fn to_tilde_frame(
    traj: &AmplitudeTrajectory,
    cfg: &ChainConfig,
    reservoir: &SpectralDensity,
) -> Result<AmplitudeTrajectory> {
    traj.expect_frame(Frame::Lab)?;
    if traj.n_sites() != cfg.n_qubits() {
        return Err(Error::DimensionMismatch(format!(
            "trajectory has {} sites, chain has {}",
            traj.n_sites(),
            cfg.n_qubits()
        )));
    }
    let amplitudes = traj
        .times
        .iter()
        .zip(&traj.amplitudes)
        .map(|(&t, row)| {
            row.iter()
                .enumerate()
                .map(|(i, &c)| c / lab_factor(cfg, reservoir, i, t))
                .collect()
        })
        .collect();
    Ok(AmplitudeTrajectory {
        times: traj.times.clone(),
        amplitudes,
        frame: Frame::Tilde,
    })
}

/// Rank-one density matrices ρ(t) = c(t)c(t)† in the site basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrixSeries {
    pub times: Vec<f64>,
    pub matrices: Vec<DMatrix<Complex64>>,
}

impl DensityMatrixSeries {
    pub fn traces(&self) -> Vec<f64> {
        self.matrices.iter().map(|m| m.trace().re).collect()
    }
}

pub fn outer_product(c: &[Complex64]) -> DMatrix<Complex64> {
    let n = c.len();
    DMatrix::from_fn(n, n, |i, j| c[i] * c[j].conj())
}

pub fn density_matrix(traj: &AmplitudeTrajectory) -> Result<DensityMatrixSeries> {
    traj.expect_frame(Frame::Lab)?;
    Ok(DensityMatrixSeries {
        times: traj.times.clone(),
        matrices: traj.amplitudes.iter().map(|c| outer_product(c)).collect(),
    })
}

/// 1 − Σ_i|c_i(t)|² before clamping.
pub fn environment_population_raw(traj: &AmplitudeTrajectory) -> Result<Vec<f64>> {
    traj.expect_frame(Frame::Lab)?;
    Ok(traj.total_population().into_iter().map(|p| 1.0 - p).collect())
}

/// Probability that the excitation sits in the reservoir, clamped to [0, 1].
///
/// Only meaningful for non-Markovian evolution, where chain and reservoir
/// together evolve unitarily.
pub fn environment_population(traj: &AmplitudeTrajectory) -> Result<Vec<f64>> {
    let raw = environment_population_raw(traj)?;
    if let Some(&worst) = raw
        .iter()
        .find(|&&p| !(-CLAMP_TOLERANCE..=1.0 + CLAMP_TOLERANCE).contains(&p))
    {
        return Err(Error::Clamping { value: worst });
    }
    Ok(raw.into_iter().map(|p| p.clamp(0.0, 1.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig::new(0, 1.0).is_err());
        assert!(ChainConfig::new(3, 0.0).is_err());
        assert!(ChainConfig::with_initial_state(2, 1.0, vec![c(1.0, 0.0), c(1.0, 0.0)]).is_err());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let cfg = ChainConfig::with_initial_state(2, 0.5, vec![c(s, 0.0), c(0.0, s)]).unwrap();
        assert_eq!(cfg.k(), 4.0);
    }

    #[test]
    fn markovian_single_qubit_lab_frame_decays() {
        let cfg = ChainConfig::new(1, 1.0).unwrap();
        let res = SpectralDensity::Markovian { gamma_m: 0.01 };
        let times: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        let tilde = AmplitudeTrajectory::new(
            times.clone(),
            vec![vec![c(1.0, 0.0)]; times.len()],
            Frame::Tilde,
        )
        .unwrap();
        let lab = to_lab_frame(&tilde, &cfg, &res).unwrap();
        for (t, p) in times.iter().zip(lab.population(0)) {
            assert!((p - (-0.02 * t).exp()).abs() < 1e-14);
        }
        assert!(matches!(
            to_lab_frame(&lab, &cfg, &res),
            Err(Error::FrameMismatch { .. })
        ));
        let back = to_tilde_frame(&lab, &cfg, &res).unwrap();
        for (a, b) in back.amplitudes.iter().zip(&tilde.amplitudes) {
            assert!((a[0] - b[0]).norm() < 1e-12);
        }
    }

    #[test]
    fn identity_phase_leaves_amplitudes_unchanged() {
        let cfg = ChainConfig::new(3, 1.0).unwrap();
        let res = SpectralDensity::Markovian { gamma_m: 0.0 };
        let rows = vec![vec![c(0.3, 0.1), c(-0.2, 0.5), c(0.1, -0.4)]; 4];
        let tilde = AmplitudeTrajectory::new(vec![0.0, 1.0, 2.0, 3.0], rows.clone(), Frame::Tilde)
            .unwrap();
        let lab = to_lab_frame(&tilde, &cfg, &res).unwrap();
        assert_eq!(lab.amplitudes, rows);
    }

    #[test]
    fn non_markovian_frames_share_moduli() {
        let cfg = ChainConfig::new(2, 1.0)
            .unwrap()
            .with_level_energies(10.0, 0.5)
            .unwrap();
        let res = SpectralDensity::lorentzian(1.0, 0.03, 0.0);
        let rows: Vec<Vec<Complex64>> = (0..5)
            .map(|i| vec![c(0.1 * i as f64, 0.3), c(0.2, -0.05 * i as f64)])
            .collect();
        let tilde =
            AmplitudeTrajectory::new((0..5).map(|i| 0.7 * i as f64).collect(), rows, Frame::Tilde)
                .unwrap();
        let lab = to_lab_frame(&tilde, &cfg, &res).unwrap();
        for site in 0..2 {
            for (a, b) in lab.population(site).iter().zip(tilde.population(site)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn density_matrix_of_basis_state() {
        let traj =
            AmplitudeTrajectory::new(vec![0.0], vec![vec![c(1.0, 0.0), c(0.0, 0.0)]], Frame::Lab)
                .unwrap();
        let dm = density_matrix(&traj).unwrap();
        let m = &dm.matrices[0];
        assert_eq!(m[(0, 0)], c(1.0, 0.0));
        assert_eq!(m[(0, 1)], c(0.0, 0.0));
        assert_eq!(m[(1, 1)], c(0.0, 0.0));
    }

    #[test]
    fn density_matrix_trace_and_rank_one_spectrum() {
        let amps = vec![c(0.3, -0.2), c(0.1, 0.5), c(-0.4, 0.1), c(0.05, 0.05), c(0.2, -0.3)];
        let tau: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        let traj = AmplitudeTrajectory::new(vec![0.0], vec![amps], Frame::Lab).unwrap();
        let m = density_matrix(&traj).unwrap().matrices.remove(0);
        assert!((m.trace().re - tau).abs() < 1e-15);
        let mut eig: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
        eig.sort_by(|a, b| b.partial_cmp(a).unwrap());
        assert!((eig[0] - tau).abs() < 1e-12);
        assert!(eig[1..].iter().all(|e| e.abs() < 1e-12));
        // m² = τ m
        let diff = &m * &m - m.scale(tau);
        assert!(diff.norm() < 1e-12 * tau);
    }

    #[test]
    fn density_matrix_requires_lab_frame() {
        let traj = AmplitudeTrajectory::new(vec![0.0], vec![vec![c(1.0, 0.0)]], Frame::Tilde)
            .unwrap();
        assert!(density_matrix(&traj).is_err());
    }

    #[test]
    fn environment_population_starts_at_zero_and_flags_overshoot() {
        let traj = AmplitudeTrajectory::new(
            vec![0.0, 1.0],
            vec![vec![c(1.0, 0.0)], vec![c(0.6, 0.0)]],
            Frame::Lab,
        )
        .unwrap();
        let env = environment_population(&traj).unwrap();
        assert_eq!(env[0], 0.0);
        assert!((env[1] - 0.64).abs() < 1e-15);

        let bad = AmplitudeTrajectory::new(vec![0.0], vec![vec![c(1.001, 0.0)]], Frame::Lab)
            .unwrap();
        assert!(matches!(environment_population(&bad), Err(Error::Clamping { .. })));
        let tiny = AmplitudeTrajectory::new(vec![0.0], vec![vec![c(1.0 + 1e-9, 0.0)]], Frame::Lab)
            .unwrap();
        assert_eq!(environment_population(&tiny).unwrap()[0], 0.0);
    }
}
