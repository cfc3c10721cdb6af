//! Reservoir families coupled to the last qubit of the chain.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Largest width-to-peak ratio for which the Lorentzian kernels (which extend
/// the frequency integral to −∞) are trusted without a warning.
pub const LORENTZIAN_VALIDITY_RATIO: f64 = 0.1;

/// Spectral density of the reservoir attached to the N-th qubit.
///
/// Lorentzian families are parameterised by the detuning `delta_c = ω_c − ω_eg`.
/// The absolute peak `omega_c` is optional and only used for the `γ ≪ ω_c`
/// validity check and for evaluating `J(ω)` on the absolute frequency axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpectralDensity {
    Markovian {
        gamma_m: f64,
    },
    Lorentzian {
        g: f64,
        gamma: f64,
        #[serde(default)]
        delta_c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega_c: Option<f64>,
    },
    LorentzianSquared {
        g: f64,
        gamma: f64,
        #[serde(default)]
        delta_c: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        omega_c: Option<f64>,
    },
    Ohmic {
        g: f64,
        s_param: f64,
        omega_c: f64,
        omega_eg: f64,
    },
}

impl SpectralDensity {
    pub fn lorentzian(g: f64, gamma: f64, delta_c: f64) -> Self {
        SpectralDensity::Lorentzian {
            g,
            gamma,
            delta_c,
            omega_c: None,
        }
    }

    pub fn lorentzian_squared(g: f64, gamma: f64, delta_c: f64) -> Self {
        SpectralDensity::LorentzianSquared {
            g,
            gamma,
            delta_c,
            omega_c: None,
        }
    }

    pub fn ohmic(g: f64, s_param: f64, omega_c: f64, omega_eg: f64) -> Self {
        SpectralDensity::Ohmic {
            g,
            s_param,
            omega_c,
            omega_eg,
        }
    }

    /// Short lowercase name of the family, used in file names and logs.
    pub fn family(&self) -> &'static str {
        match self {
            SpectralDensity::Markovian { .. } => "markovian",
            SpectralDensity::Lorentzian { .. } => "lorentzian",
            SpectralDensity::LorentzianSquared { .. } => "lorentzian-squared",
            SpectralDensity::Ohmic { .. } => "ohmic",
        }
    }

    pub fn is_markovian(&self) -> bool {
        matches!(self, SpectralDensity::Markovian { .. })
    }

    /// Hard parameter constraints.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidReservoir(msg));
        match *self {
            SpectralDensity::Markovian { gamma_m } => {
                if !(gamma_m.is_finite() && gamma_m >= 0.0) {
                    return bad(format!("gamma_m must be finite and non-negative, got {gamma_m}"));
                }
            }
            SpectralDensity::Lorentzian {
                g,
                gamma,
                delta_c,
                omega_c,
            }
            | SpectralDensity::LorentzianSquared {
                g,
                gamma,
                delta_c,
                omega_c,
            } => {
                if !g.is_finite() || !delta_c.is_finite() {
                    return bad("g and delta_c must be finite".into());
                }
                if !(gamma.is_finite() && gamma > 0.0) {
                    return bad(format!("gamma must be positive, got {gamma}"));
                }
                if let Some(wc) = omega_c {
                    if !(wc.is_finite() && wc > 0.0) {
                        return bad(format!("omega_c must be positive, got {wc}"));
                    }
                }
            }
            SpectralDensity::Ohmic {
                g,
                s_param,
                omega_c,
                omega_eg,
            } => {
                if !g.is_finite() || !omega_eg.is_finite() {
                    return bad("g and omega_eg must be finite".into());
                }
                if !(s_param.is_finite() && s_param > 0.0) {
                    return bad(format!("Ohmic parameter must be positive, got {s_param}"));
                }
                if s_param.fract() == 0.0 {
                    return bad(format!(
                        "integer Ohmic parameter {s_param} hits a pole of Γ(−S); use a nearby non-integer"
                    ));
                }
                if !(omega_c.is_finite() && omega_c > 0.0) {
                    return bad(format!("omega_c must be positive, got {omega_c}"));
                }
            }
        }
        Ok(())
    }

    /// Soft constraints that do not stop a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        match *self {
            SpectralDensity::Lorentzian {
                gamma,
                omega_c: Some(wc),
                ..
            }
            | SpectralDensity::LorentzianSquared {
                gamma,
                omega_c: Some(wc),
                ..
            } => {
                if gamma / wc >= LORENTZIAN_VALIDITY_RATIO {
                    out.push(format!(
                        "gamma/omega_c = {:.3} is not small; the analytic Lorentzian kernel assumes negligible weight at negative frequencies",
                        gamma / wc
                    ));
                }
            }
            _ => {}
        }
        out
    }

    /// Ohmic normalisation 1/(ω_c² Γ(1+S)) making ∫J = g².
    pub fn ohmic_normalization(s_param: f64, omega_c: f64) -> f64 {
        1.0 / (omega_c * omega_c * gamma(1.0 + s_param))
    }

    /// Value of the named parameter, if the family has it.
    pub fn parameter(&self, name: &str) -> Option<f64> {
        match (*self, name) {
            (SpectralDensity::Markovian { gamma_m }, "gamma_m") => Some(gamma_m),
            (SpectralDensity::Lorentzian { g, .. }, "g")
            | (SpectralDensity::LorentzianSquared { g, .. }, "g")
            | (SpectralDensity::Ohmic { g, .. }, "g") => Some(g),
            (SpectralDensity::Lorentzian { gamma, .. }, "gamma")
            | (SpectralDensity::LorentzianSquared { gamma, .. }, "gamma") => Some(gamma),
            (SpectralDensity::Lorentzian { delta_c, .. }, "delta_c")
            | (SpectralDensity::LorentzianSquared { delta_c, .. }, "delta_c") => Some(delta_c),
            (SpectralDensity::Ohmic { s_param, .. }, "s_param") => Some(s_param),
            (SpectralDensity::Ohmic { omega_c, .. }, "omega_c") => Some(omega_c),
            (SpectralDensity::Ohmic { omega_eg, .. }, "omega_eg") => Some(omega_eg),
            _ => None,
        }
    }

    /// Copy with the named parameter replaced.
    pub fn with_parameter(&self, name: &str, value: f64) -> Result<Self> {
        let mut out = *self;
        let slot: Option<&mut f64> = match (&mut out, name) {
            (SpectralDensity::Markovian { gamma_m }, "gamma_m") => Some(gamma_m),
            (SpectralDensity::Lorentzian { g, .. }, "g")
            | (SpectralDensity::LorentzianSquared { g, .. }, "g")
            | (SpectralDensity::Ohmic { g, .. }, "g") => Some(g),
            (SpectralDensity::Lorentzian { gamma, .. }, "gamma")
            | (SpectralDensity::LorentzianSquared { gamma, .. }, "gamma") => Some(gamma),
            (SpectralDensity::Lorentzian { delta_c, .. }, "delta_c")
            | (SpectralDensity::LorentzianSquared { delta_c, .. }, "delta_c") => Some(delta_c),
            (SpectralDensity::Ohmic { s_param, .. }, "s_param") => Some(s_param),
            (SpectralDensity::Ohmic { omega_c, .. }, "omega_c") => Some(omega_c),
            (SpectralDensity::Ohmic { omega_eg, .. }, "omega_eg") => Some(omega_eg),
            _ => None,
        };
        match slot {
            Some(v) => *v = value,
            None => {
                return Err(Error::InvalidReservoir(format!(
                    "{} reservoir has no parameter `{name}`",
                    self.family()
                )))
            }
        }
        out.validate()?;
        Ok(out)
    }

    /// Parameter adjusted by half-life calibration when none is named.
    pub fn default_free_parameter(&self) -> &'static str {
        match self {
            SpectralDensity::Markovian { .. } => "gamma_m",
            SpectralDensity::Lorentzian { .. } | SpectralDensity::LorentzianSquared { .. } => {
                "gamma"
            }
            SpectralDensity::Ohmic { .. } => "omega_c",
        }
    }
}
