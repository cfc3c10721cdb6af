//! Scenario files, the end-to-end run and half-life calibration.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! markovian_gamma = 0.01
//! measures = ["trace", "hellinger", "bures"]   # default; [] for none
//! backend = "volterra"                         # or "laplace"
//!
//! [chain]
//! n_qubits = 1
//! coupling = 1.0                   # default 1
//! # initial_amplitudes = [[1.0, 0.0]]   # [re, im] per site, default |1⟩
//! # omega_e, omega_g               # default ω_e = ω_eg of the first Ohmic reservoir, ω_g = 0
//!
//! [time]                           # optional
//! t_end = 200.0                    # default 200, or 1000 for N ≥ 5
//! n_samples = 4096
//!
//! [[reservoirs]]
//! tag = "lorentzian"
//! kind = "lorentzian"              # markovian | lorentzian | lorentzian-squared | ohmic
//! g = 1.0
//! gamma = 0.03
//! delta_c = 0.0
//!
//! [calibration]                    # optional
//! reservoirs = ["lorentzian"]      # calibrated before `run`
//! free_parameter = "gamma"         # default per family
//! bracket = [0.01, 0.1]            # default [v/4, 4v] around the current value
//! rel_tol = 0.05
//!
//! [solver]                         # optional overrides, see [`SolverSpec`]
//! ```

use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chain::{
    density_matrix, environment_population, environment_population_raw, to_lab_frame,
    AmplitudeTrajectory, ChainConfig,
};
use crate::error::{Error, Result};
use crate::inversion::Method;
use crate::markovian::{envelope_half_life, solve_markovian, OdeSettings};
use crate::nonmarkovian::{solve_nonmarkovian_with_diagnostics, Backend, SolverDiagnostics, SolverSettings};
use crate::qsd::{qsd_series, Measure, QsdSeries};
use crate::reservoir::SpectralDensity;
use crate::volterra::{History, Quadrature};

/// Tag of the Markovian reference evolution in emitted file names.
pub const REFERENCE_TAG: &str = "reference";
pub const DEFAULT_SAMPLES: usize = 4096;
pub const DEFAULT_REL_TOL: f64 = 0.05;
/// Population excess over one reported as a conservation warning.
pub const CONSERVATION_WARNING: f64 = 1e-9;

fn default_coupling() -> f64 {
    1.0
}

fn default_measures() -> Vec<Measure> {
    vec![Measure::Trace, Measure::Hellinger, Measure::Bures]
}

fn default_rel_tol() -> f64 {
    DEFAULT_REL_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub n_qubits: usize,
    #[serde(default = "default_coupling")]
    pub coupling: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_amplitudes: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_g: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReservoirSpec {
    pub tag: String,
    #[serde(flatten)]
    pub density: SpectralDensity,
}

impl ReservoirSpec {
    /// Body of a `[[reservoirs]]` entry.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("reservoir serializes")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalibrationTarget {
    /// Envelope half-life of the first-qubit population.
    #[default]
    HalfLife,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSpec {
    #[serde(default)]
    pub target: CalibrationTarget,
    /// Reservoirs calibrated before `run`.
    #[serde(default)]
    pub reservoirs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_parameter: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<[f64; 2]>,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
}

/// Solver overrides. A non-positive `convergence_gate` or `aliasing_check`
/// disables that check.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrature: Option<Quadrature>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub history: Option<History>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extrapolation_levels: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence_gate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inversion: Option<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contour_shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aliasing_check: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub markovian_gamma: f64,
    #[serde(default = "default_measures")]
    pub measures: Vec<Measure>,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    pub chain: ChainSpec,
    #[serde(default)]
    pub time: TimeSpec,
    pub reservoirs: Vec<ReservoirSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
}

fn default_backend() -> Backend {
    Backend::Volterra
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidScenario(msg.into())
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let sc: Scenario = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn t_end(&self) -> f64 {
        self.time
            .t_end
            .unwrap_or(if self.chain.n_qubits >= 5 { 1000.0 } else { 200.0 })
    }

    pub fn n_samples(&self) -> usize {
        self.time.n_samples.unwrap_or(DEFAULT_SAMPLES)
    }

    pub fn chain_config(&self) -> Result<ChainConfig> {
        let spec = &self.chain;
        let cfg = match &spec.initial_amplitudes {
            None => ChainConfig::new(spec.n_qubits, spec.coupling)?,
            Some(c) => ChainConfig::with_initial_state(
                spec.n_qubits,
                spec.coupling,
                c.iter().map(|[re, im]| Complex64::new(*re, *im)).collect(),
            )?,
        };
        let ohmic_eg = self.reservoirs.iter().find_map(|r| match r.density {
            SpectralDensity::Ohmic { omega_eg, .. } => Some(omega_eg),
            _ => None,
        });
        let omega_g = spec.omega_g.unwrap_or(0.0);
        let omega_e = spec.omega_e.unwrap_or(omega_g + ohmic_eg.unwrap_or(0.0));
        cfg.with_level_energies(omega_e, omega_g)
    }

    pub fn reservoir(&self, tag: &str) -> Result<&ReservoirSpec> {
        self.reservoirs
            .iter()
            .find(|r| r.tag == tag)
            .ok_or_else(|| invalid(format!("no reservoir tagged `{tag}`")))
    }

    pub fn solver_settings(&self) -> Result<SolverSettings> {
        let mut s = SolverSettings::new(self.t_end(), self.n_samples());
        if let Some(o) = &self.solver {
            if let Some(m) = o.inversion {
                s.inversion = crate::inversion::InversionSettings::new(m, self.t_end(), self.n_samples());
            }
            if let Some(v) = o.dt {
                s.volterra.dt = v;
            }
            if let Some(v) = o.quadrature {
                s.volterra.quadrature = v;
            }
            if let Some(v) = o.history {
                s.volterra.history = v;
            }
            if let Some(v) = o.extrapolation_levels {
                s.volterra.extrapolation_levels = v;
            }
            if let Some(v) = o.convergence_gate {
                s.volterra.convergence_gate = (v > 0.0).then_some(v);
            }
            if let Some(v) = o.contour_shift {
                s.inversion.contour_shift = v;
            }
            if let Some(v) = o.aliasing_check {
                s.inversion.aliasing_check = (v > 0.0).then_some(v);
            }
            if s.inversion.method == Method::BromwichFft {
                if let Some(v) = o.cutoff {
                    s.inversion.set_cutoff(v);
                } else if o.contour_shift.is_some() {
                    s.inversion.set_cutoff(crate::inversion::DEFAULT_CUTOFF);
                }
            }
            if let Some(v) = o.n_nodes {
                s.inversion.n_nodes = v;
            }
        }
        s.volterra.validate()?;
        s.inversion.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reservoirs.is_empty() {
            return Err(invalid("at least one reservoir is required"));
        }
        if !(self.markovian_gamma.is_finite() && self.markovian_gamma >= 0.0) {
            return Err(invalid(format!(
                "markovian_gamma must be finite and non-negative, got {}",
                self.markovian_gamma
            )));
        }
        let t_end = self.t_end();
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(invalid(format!("t_end must be positive, got {t_end}")));
        }
        if self.n_samples() < 2 {
            return Err(invalid("n_samples must be at least 2"));
        }
        for (i, m) in self.measures.iter().enumerate() {
            if self.measures[..i].contains(m) {
                return Err(invalid(format!("measure `{m}` listed twice")));
            }
        }
        for (i, r) in self.reservoirs.iter().enumerate() {
            let tag_ok = !r.tag.is_empty()
                && r.tag
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
            if !tag_ok {
                return Err(invalid(format!(
                    "reservoir tag `{}` must be non-empty ASCII letters, digits, `-` or `_`",
                    r.tag
                )));
            }
            if r.tag == REFERENCE_TAG {
                return Err(invalid(format!("reservoir tag `{REFERENCE_TAG}` is reserved")));
            }
            if self.reservoirs[..i].iter().any(|o| o.tag == r.tag) {
                return Err(invalid(format!("reservoir tag `{}` used twice", r.tag)));
            }
            r.density
                .validate()
                .map_err(|e| invalid(format!("reservoir `{}`: {e}", r.tag)))?;
        }
        if let Some(c) = &self.calibration {
            if let Some([lo, hi]) = c.bracket {
                if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
                    return Err(invalid(format!("calibration bracket [{lo}, {hi}] must satisfy 0 < lo < hi")));
                }
            }
            if !(c.rel_tol > 0.0 && c.rel_tol < 1.0) {
                return Err(invalid(format!("calibration rel_tol must lie in (0, 1), got {}", c.rel_tol)));
            }
            for tag in &c.reservoirs {
                let r = self.reservoir(tag)?;
                let name = c
                    .free_parameter
                    .as_deref()
                    .unwrap_or(r.density.default_free_parameter());
                if r.density.parameter(name).is_none() {
                    return Err(invalid(format!(
                        "reservoir `{tag}` ({}) has no parameter `{name}`",
                        r.density.family()
                    )));
                }
            }
        }
        self.chain_config().map_err(|e| invalid(e.to_string()))?;
        self.solver_settings().map_err(|e| invalid(e.to_string()))?;
        Ok(())
    }
}

/// Solves one reservoir and returns lab-frame amplitudes.
pub fn solve_lab(
    cfg: &ChainConfig,
    sd: &SpectralDensity,
    backend: Backend,
    settings: &SolverSettings,
) -> Result<(AmplitudeTrajectory, Option<SolverDiagnostics>)> {
    let (tilde, diag) = match *sd {
        SpectralDensity::Markovian { gamma_m } => {
            let ode = OdeSettings::new(settings.volterra.t_end, settings.volterra.n_samples);
            (solve_markovian(cfg, gamma_m, &ode)?, None)
        }
        _ => {
            let (t, d) = solve_nonmarkovian_with_diagnostics(cfg, sd, backend, settings)?;
            (t, Some(d))
        }
    };
    Ok((to_lab_frame(&tilde, cfg, sd)?, diag))
}

/// Half-life of the first-qubit population; `None` if it outlives the window.
pub fn first_qubit_half_life(traj: &AmplitudeTrajectory) -> Option<f64> {
    envelope_half_life(&traj.times, &traj.population(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationOptions {
    pub free_parameter: Option<String>,
    pub bracket: Option<[f64; 2]>,
    pub rel_tol: f64,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            free_parameter: None,
            bracket: None,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

impl From<&CalibrationSpec> for CalibrationOptions {
    fn from(c: &CalibrationSpec) -> Self {
        CalibrationOptions {
            free_parameter: c.free_parameter.clone(),
            bracket: c.bracket,
            rel_tol: c.rel_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationOutcome {
    pub parameter: String,
    pub initial_value: f64,
    pub value: f64,
    pub reference_half_life: f64,
    pub half_life: f64,
    pub evaluations: usize,
}

/// Evaluates first-qubit half-lives for a fixed chain, grid and backend.
#[derive(Debug, Clone)]
pub struct HalfLifeProbe {
    pub cfg: ChainConfig,
    pub backend: Backend,
    pub settings: SolverSettings,
}

impl HalfLifeProbe {
    /// Probe using the scenario's chain and grid with a cheaper Volterra
    /// ladder (two levels, no gate).
    pub fn for_scenario(sc: &Scenario) -> Result<Self> {
        let mut settings = sc.solver_settings()?;
        settings.volterra.extrapolation_levels = settings.volterra.extrapolation_levels.min(2);
        settings.volterra.convergence_gate = None;
        settings.inversion.aliasing_check = None;
        Ok(HalfLifeProbe {
            cfg: sc.chain_config()?,
            backend: sc.backend,
            settings,
        })
    }

    /// `f64::INFINITY` when the population never halves within the window.
    pub fn half_life(&self, sd: &SpectralDensity) -> Result<f64> {
        let (traj, _) = solve_lab(&self.cfg, sd, self.backend, &self.settings)?;
        Ok(first_qubit_half_life(&traj).unwrap_or(f64::INFINITY))
    }
}

/// Adjusts one parameter of `sd` by bisection until the first-qubit
/// half-life matches `reference_half_life` within `options.rel_tol`.
pub fn calibrate(
    probe: &HalfLifeProbe,
    sd: &SpectralDensity,
    reference_half_life: f64,
    options: &CalibrationOptions,
) -> Result<(SpectralDensity, CalibrationOutcome)> {
    let fail = |m: String| Error::Calibration(m);
    if !(reference_half_life.is_finite() && reference_half_life > 0.0) {
        return Err(fail(format!("reference half-life {reference_half_life} is not finite and positive")));
    }
    let name = options
        .free_parameter
        .clone()
        .unwrap_or_else(|| sd.default_free_parameter().to_string());
    let initial = sd.parameter(&name).ok_or_else(|| {
        Error::InvalidScenario(format!("{} reservoir has no parameter `{name}`", sd.family()))
    })?;
    let tol = options.rel_tol * reference_half_life;
    let mut evaluations = 0usize;
    let mut eval = |v: f64| -> Result<f64> {
        evaluations += 1;
        let trial = sd.with_parameter(&name, v)?;
        probe
            .half_life(&trial)
            .map(|h| h - reference_half_life)
            .map_err(|e| fail(format!("half-life at {name} = {v}: {e}")))
    };
    let outcome = |value: f64, miss: f64, evaluations: usize| CalibrationOutcome {
        parameter: name.clone(),
        initial_value: initial,
        value,
        reference_half_life,
        half_life: reference_half_life + miss,
        evaluations,
    };

    let start = eval(initial)?;
    if start.abs() <= tol {
        return Ok((*sd, outcome(initial, start, evaluations)));
    }
    let [mut lo, mut hi] = match options.bracket {
        Some(b) => b,
        None if initial > 0.0 => [initial / 4.0, initial * 4.0],
        None => return Err(fail(format!("`{name}` is {initial}; give an explicit bracket"))),
    };
    let (mut f_lo, f_hi) = (eval(lo)?, eval(hi)?);
    if f_lo.signum() == f_hi.signum() || f_lo.is_nan() || f_hi.is_nan() {
        return Err(fail(format!(
            "bracket does not straddle the target half-life {reference_half_life}: \
             {name} = {lo} gives {}, {name} = {hi} gives {}",
            reference_half_life + f_lo,
            reference_half_life + f_hi
        )));
    }
    // bisect well inside the tolerance so a full-accuracy rerun stays within it
    let goal = 0.1 * tol;
    let (mut best, mut best_miss) = if f_lo.abs() < f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    for _ in 0..100 {
        if best_miss.abs() <= goal || (hi - lo) <= 1e-12 * hi.abs() {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let f_mid = eval(mid)?;
        if f_mid.abs() < best_miss.abs() {
            best = mid;
            best_miss = f_mid;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    if best_miss.abs() > tol {
        return Err(fail(format!(
            "bisection stalled at {name} = {best} with half-life {} (target {reference_half_life})",
            reference_half_life + best_miss
        )));
    }
    let calibrated = sd.with_parameter(&name, best)?;
    Ok((calibrated, outcome(best, best_miss, evaluations)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDiagnostics {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverDiagnostics>,
    /// max_t Σ_i |c_i(t)|².
    pub max_total_population: f64,
    /// Range of 1 − Σ_i |c_i(t)|² before clamping.
    pub min_env_population_raw: f64,
    pub max_env_population_raw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_qubit_half_life: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirRun {
    /// Lab-frame amplitudes.
    pub trajectory: AmplitudeTrajectory,
    pub environment_population: Vec<f64>,
    /// One series per scenario measure, in scenario order.
    pub qsd: Vec<QsdSeries>,
    pub diagnostics: RunDiagnostics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirRecord {
    pub tag: String,
    /// Parameters actually used, after any calibration.
    pub density: SpectralDensity,
    pub calibration: Option<CalibrationOutcome>,
    /// Solver failures are kept as messages so other reservoirs still report.
    pub outcome: std::result::Result<ReservoirRun, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scenario: Scenario,
    pub scenario_hash: String,
    /// Lab-frame amplitudes under the Markovian reference reservoir.
    pub reference: AmplitudeTrajectory,
    pub reference_half_life: Option<f64>,
    pub reservoirs: Vec<ReservoirRecord>,
}

impl RunRecord {
    pub fn times(&self) -> &[f64] {
        &self.reference.times
    }

    pub fn failures(&self) -> impl Iterator<Item = (&str, &str)> {
        self.reservoirs.iter().filter_map(|r| match &r.outcome {
            Err(e) => Some((r.tag.as_str(), e.as_str())),
            Ok(_) => None,
        })
    }
}

fn run_reservoir(
    cfg: &ChainConfig,
    sd: &SpectralDensity,
    sc: &Scenario,
    settings: &SolverSettings,
    reference: &AmplitudeTrajectory,
) -> Result<ReservoirRun> {
    for w in sd.warnings() {
        log::warn!("{w}");
    }
    let (trajectory, solver) = solve_lab(cfg, sd, sc.backend, settings)?;
    if trajectory.times != reference.times {
        return Err(Error::DimensionMismatch("reservoir and reference grids differ".into()));
    }
    let raw = environment_population_raw(&trajectory)?;
    let max_total_population = trajectory.total_population().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max_total_population > 1.0 + CONSERVATION_WARNING {
        log::warn!("chain population reaches {max_total_population}, above one");
    }
    let environment_population = environment_population(&trajectory)?;
    let rho = density_matrix(&trajectory)?;
    let sigma = density_matrix(reference)?;
    let qsd = sc
        .measures
        .iter()
        .map(|&m| qsd_series(&rho, &sigma, m))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReservoirRun {
        diagnostics: RunDiagnostics {
            solver,
            max_total_population,
            min_env_population_raw: raw.iter().copied().fold(f64::INFINITY, f64::min),
            max_env_population_raw: raw.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            first_qubit_half_life: first_qubit_half_life(&trajectory),
        },
        trajectory,
        environment_population,
        qsd,
    })
}

/// Reference half-life for calibration: the first qubit under the scenario's
/// Markovian reservoir.
pub fn reference_half_life(sc: &Scenario) -> Result<f64> {
    let probe = HalfLifeProbe::for_scenario(sc)?;
    let h = probe.half_life(&SpectralDensity::Markovian {
        gamma_m: sc.markovian_gamma,
    })?;
    if !h.is_finite() {
        return Err(Error::Calibration(format!(
            "the Markovian reference never halves the first-qubit population before t = {}",
            sc.t_end()
        )));
    }
    Ok(h)
}

/// Calibrates the reservoir tagged `tag` against the Markovian reference.
pub fn calibrate_reservoir(sc: &Scenario, tag: &str) -> Result<(SpectralDensity, CalibrationOutcome)> {
    let spec = sc.reservoir(tag)?;
    let options = sc.calibration.as_ref().map(CalibrationOptions::from).unwrap_or_default();
    let probe = HalfLifeProbe::for_scenario(sc)?;
    calibrate(&probe, &spec.density, reference_half_life(sc)?, &options)
}

/// Runs the Markovian reference and every reservoir (concurrently), applying
/// any calibration first.
pub fn run_scenario(sc: &Scenario) -> Result<RunRecord> {
    sc.validate()?;
    let cfg = sc.chain_config()?;
    let settings = sc.solver_settings()?;
    let reference_sd = SpectralDensity::Markovian {
        gamma_m: sc.markovian_gamma,
    };
    let (reference, _) = solve_lab(&cfg, &reference_sd, sc.backend, &settings)?;

    let to_calibrate: Vec<&str> = sc
        .calibration
        .as_ref()
        .map(|c| c.reservoirs.iter().map(String::as_str).collect())
        .unwrap_or_default();
    let calibrations = sc
        .reservoirs
        .par_iter()
        .map(|r| {
            if to_calibrate.contains(&r.tag.as_str()) {
                calibrate_reservoir(sc, &r.tag).map(|(d, o)| (d, Some(o)))
            } else {
                Ok((r.density, None))
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let reservoirs = sc
        .reservoirs
        .par_iter()
        .zip(calibrations)
        .map(|(r, (density, calibration))| {
            let outcome = run_reservoir(&cfg, &density, sc, &settings, &reference).map_err(|e| {
                log::error!("reservoir `{}` failed: {e}", r.tag);
                e.to_string()
            });
            ReservoirRecord {
                tag: r.tag.clone(),
                density,
                calibration,
                outcome,
            }
        })
        .collect();

    Ok(RunRecord {
        scenario: sc.clone(),
        scenario_hash: sc.hash(),
        reference_half_life: first_qubit_half_life(&reference),
        reference,
        reservoirs,
    })
}
