//! Memory kernels R(t) = ∫₀^∞ J(ω) e^{−i(ω−ω_eg)t} dω and their Laplace
//! transforms B(s) for the non-Markovian reservoir families.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::reservoir::SpectralDensity;
use crate::special::upper_incomplete_gamma_scaled;

const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MemoryKernel {
    Lorentzian {
        g: f64,
        gamma: f64,
        delta_c: f64,
        peak: f64,
    },
    LorentzianSquared {
        g: f64,
        gamma: f64,
        delta_c: f64,
        peak: f64,
    },
    Ohmic {
        g: f64,
        s_param: f64,
        omega_c: f64,
        omega_eg: f64,
        normalization: f64,
    },
}

/// Builds the kernel of a non-Markovian reservoir.
///
/// For the Lorentzian families `J(ω)` is centred on `omega_c` when it is
/// given, otherwise on `delta_c` (frequencies then measured from ω_eg).
pub fn kernel_for(sd: &SpectralDensity) -> Result<MemoryKernel> {
    sd.validate()?;
    for w in sd.warnings() {
        log::warn!("{w}");
    }
    Ok(match *sd {
        SpectralDensity::Markovian { .. } => return Err(Error::NoKernel),
        SpectralDensity::Lorentzian {
            g,
            gamma,
            delta_c,
            omega_c,
        } => MemoryKernel::Lorentzian {
            g,
            gamma,
            delta_c,
            peak: omega_c.unwrap_or(delta_c),
        },
        SpectralDensity::LorentzianSquared {
            g,
            gamma,
            delta_c,
            omega_c,
        } => MemoryKernel::LorentzianSquared {
            g,
            gamma,
            delta_c,
            peak: omega_c.unwrap_or(delta_c),
        },
        SpectralDensity::Ohmic {
            g,
            s_param,
            omega_c,
            omega_eg,
        } => MemoryKernel::Ohmic {
            g,
            s_param,
            omega_c,
            omega_eg,
            normalization: SpectralDensity::ohmic_normalization(s_param, omega_c),
        },
    })
}

impl MemoryKernel {
    pub fn coupling(&self) -> f64 {
        match *self {
            MemoryKernel::Lorentzian { g, .. }
            | MemoryKernel::LorentzianSquared { g, .. }
            | MemoryKernel::Ohmic { g, .. } => g,
        }
    }

    /// Exponent −γ/2 − iΔ_c shared by the Lorentzian families.
    fn lorentzian_rate(gamma: f64, delta_c: f64) -> Complex64 {
        Complex64::new(-0.5 * gamma, -delta_c)
    }

    pub fn r_of_t(&self, t: f64) -> Complex64 {
        match *self {
            MemoryKernel::Lorentzian {
                g, gamma, delta_c, ..
            } => g * g * (Self::lorentzian_rate(gamma, delta_c) * t).exp(),
            MemoryKernel::LorentzianSquared {
                g, gamma, delta_c, ..
            } => {
                g * g * (1.0 + 0.5 * gamma * t) * (Self::lorentzian_rate(gamma, delta_c) * t).exp()
            }
            MemoryKernel::Ohmic {
                g,
                s_param,
                omega_c,
                omega_eg,
                ..
            } => {
                let base = Complex64::new(1.0, omega_c * t);
                g * g * Complex64::from_polar(1.0, omega_eg * t) * base.powf(-1.0 - s_param)
            }
        }
    }

    pub fn b_of_s(&self, s: Complex64) -> Result<Complex64> {
        match *self {
            MemoryKernel::Lorentzian {
                g, gamma, delta_c, ..
            } => Ok(g * g / (s - Self::lorentzian_rate(gamma, delta_c))),
            MemoryKernel::LorentzianSquared {
                g, gamma, delta_c, ..
            } => {
                let p = s - Self::lorentzian_rate(gamma, delta_c);
                Ok(g * g * (p + 0.5 * gamma) / (p * p))
            }
            MemoryKernel::Ohmic {
                g,
                s_param,
                omega_c,
                omega_eg,
                ..
            } => {
                let k = (s - I * omega_eg) / omega_c;
                let z = -I * k;
                let prefactor = I.powf(1.0 - s_param) / omega_c;
                let scaled = upper_incomplete_gamma_scaled(-s_param, z)?;
                Ok(-g * g * prefactor * k.powf(s_param) * scaled)
            }
        }
    }

    pub fn j_of_omega(&self, omega: f64) -> f64 {
        match *self {
            MemoryKernel::Lorentzian { g, gamma, peak, .. } => {
                let hw = 0.5 * gamma;
                g * g / PI * hw / ((omega - peak).powi(2) + hw * hw)
            }
            MemoryKernel::LorentzianSquared { g, gamma, peak, .. } => {
                let hw = 0.5 * gamma;
                2.0 * g * g / PI * hw.powi(3) / ((omega - peak).powi(2) + hw * hw).powi(2)
            }
            MemoryKernel::Ohmic {
                g,
                s_param,
                omega_c,
                normalization,
                ..
            } => {
                if omega < 0.0 {
                    0.0
                } else {
                    let x = omega / omega_c;
                    normalization * g * g * omega_c * x.powf(s_param) * (-x).exp()
                }
            }
        }
    }

    /// R(0), R'(0), …, R^{(n−1)}(0). These are also the coefficients of the
    /// large-|s| expansion B(s) ~ Σ R^{(l)}(0)/s^{l+1}.
    pub fn r_derivatives_at_zero(&self, n: usize) -> Vec<Complex64> {
        match *self {
            MemoryKernel::Lorentzian {
                g, gamma, delta_c, ..
            } => {
                let lambda = Self::lorentzian_rate(gamma, delta_c);
                (0..n).map(|l| g * g * lambda.powu(l as u32)).collect()
            }
            MemoryKernel::LorentzianSquared {
                g, gamma, delta_c, ..
            } => {
                let lambda = Self::lorentzian_rate(gamma, delta_c);
                (0..n)
                    .map(|l| {
                        let mut v = lambda.powu(l as u32);
                        if l > 0 {
                            v += l as f64 * 0.5 * gamma * lambda.powu(l as u32 - 1);
                        }
                        g * g * v
                    })
                    .collect()
            }
            MemoryKernel::Ohmic {
                g,
                s_param,
                omega_c,
                omega_eg,
                ..
            } => {
                // u(t) = (1 + iω_c t)^{−1−S}; u^{(m)}(0) = (iω_c)^m Π_{j=1..m}(−j−S)
                let mut u = Vec::with_capacity(n);
                let mut acc = Complex64::new(1.0, 0.0);
                for m in 0..n {
                    if m > 0 {
                        acc *= I * omega_c * (-(m as f64) - s_param);
                    }
                    u.push(acc);
                }
                let phase = I * omega_eg;
                (0..n)
                    .map(|l| {
                        let mut sum = Complex64::new(0.0, 0.0);
                        let mut binom = 1.0;
                        for m in 0..=l {
                            sum += binom * phase.powu((l - m) as u32) * u[m];
                            binom *= (l - m) as f64 / (m + 1) as f64;
                        }
                        g * g * sum
                    })
                    .collect()
            }
        }
    }

    /// Upper bound on |R(t)| used to size truncated integrals.
    pub fn magnitude_bound(&self, t: f64) -> f64 {
        match *self {
            MemoryKernel::Lorentzian { g, gamma, .. } => g * g * (-0.5 * gamma * t).exp(),
            MemoryKernel::LorentzianSquared { g, gamma, .. } => {
                g * g * (1.0 + 0.5 * gamma * t) * (-0.5 * gamma * t).exp()
            }
            MemoryKernel::Ohmic {
                g,
                s_param,
                omega_c,
                ..
            } => g * g * (1.0 + (omega_c * t).powi(2)).powf(-0.5 * (1.0 + s_param)),
        }
    }
}
