//! Closed-form Laplace transforms F_i(s) of the tilde amplitudes.
//!
//! With k = 2/𝒥 the transformed chain equations reduce to the three-term
//! recurrence A_{m+1} = iks·A_m − A_{m−1} (A₀ = 0, A₁ = 1), and
//!
//! F₁ = {ik c_N(0) − k²(s+B)A₁c_{N−1}(0)
//!       + ik Σ_{m=1}^{N−2} [ik(s+B)A_{N−m} − A_{N−1−m}] c_m(0)}
//!      / {ik(s+B)A_N − A_{N−1}},
//! F_i = A_i F₁ − ik Σ_{n=1}^{i−1} A_{i−n} c_n(0).
//!
//! Site labels above run 1..N; in code they are 0-based.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::chain::ChainConfig;
use crate::error::{Error, Result};
use crate::kernels::MemoryKernel;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Smallest |denominator of F₁| accepted before reporting a pole.
pub const POLE_THRESHOLD: f64 = 1e-14;

/// A₀(s), …, A_n(s) by the three-term recurrence.
pub fn a_sequence(s: Complex64, k: f64, n: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(Complex64::new(0.0, 0.0));
    if n >= 1 {
        out.push(Complex64::new(1.0, 0.0));
    }
    let iks = I * k * s;
    for m in 1..n {
        let next = iks * out[m] - out[m - 1];
        out.push(next);
    }
    out
}

pub fn a_m(s: Complex64, k: f64, m: usize) -> Complex64 {
    a_sequence(s, k, m)[m]
}

/// A_m from the ratio of root powers, [r₊^m − r₋^m]/(r₊ − r₋) with
/// r± = [iks ± √(−k²s² − 4)]/2 the roots of r² − iks·r + 1 = 0.
pub fn a_m_explicit(s: Complex64, k: f64, m: usize) -> Complex64 {
    let iks = I * k * s;
    let disc = (iks * iks - 4.0).sqrt();
    let rp = 0.5 * (iks + disc);
    let rm = 0.5 * (iks - disc);
    if disc.norm() < 1e-8 * rp.norm().max(1.0) {
        // double root r: A_m = m r^{m−1}
        return m as f64 * rp.powu(m.saturating_sub(1) as u32);
    }
    (rp.powu(m as u32) - rm.powu(m as u32)) / disc
}

/// F₁(s) given B(s).
pub fn f1_of_s(s: Complex64, cfg: &ChainConfig, b: Complex64) -> Result<Complex64> {
    let n = cfg.n_qubits();
    let k = cfg.k();
    let c0 = cfg.initial_amplitudes();
    let a = a_sequence(s, k, n);
    let ik = I * k;
    let sb = s + b;

    let mut num = ik * c0[n - 1];
    if n >= 2 {
        num -= k * k * sb * a[1] * c0[n - 2];
    }
    for m in 1..=n.saturating_sub(2) {
        num += ik * (ik * sb * a[n - m] - a[n - 1 - m]) * c0[m - 1];
    }
    let den = ik * sb * a[n] - a[n - 1];
    if den.norm() < POLE_THRESHOLD {
        return Err(Error::PoleProximity { s });
    }
    Ok(num / den)
}

/// F_i(s) for a 1-based site index `i ≥ 2`.
pub fn f_i_of_s(s: Complex64, i: usize, f1: Complex64, cfg: &ChainConfig) -> Complex64 {
    let a = a_sequence(s, cfg.k(), i);
    let c0 = cfg.initial_amplitudes();
    let ik = I * cfg.k();
    let mut v = a[i] * f1;
    for nn in 1..i {
        v -= ik * a[i - nn] * c0[nn - 1];
    }
    v
}

/// All F_i(s), i = 1..N, sharing one recurrence.
pub fn transforms(s: Complex64, cfg: &ChainConfig, kernel: &MemoryKernel) -> Result<Vec<Complex64>> {
    let n = cfg.n_qubits();
    let b = kernel.b_of_s(s)?;
    let f1 = f1_of_s(s, cfg, b)?;
    let a = a_sequence(s, cfg.k(), n);
    let c0 = cfg.initial_amplitudes();
    let ik = I * cfg.k();
    let mut out = Vec::with_capacity(n);
    out.push(f1);
    for i in 2..=n {
        let mut v = a[i] * f1;
        for nn in 1..i {
            v -= ik * a[i - nn] * c0[nn - 1];
        }
        out.push(v);
    }
    Ok(out)
}

/// Time derivatives c̃^{(m)}(0), m = 0..order, of the tilde amplitudes; they
/// are also the coefficients of the large-|s| expansion F_i ~ Σ c_i^{(m)}/s^{m+1}.
pub fn taylor_coefficients(cfg: &ChainConfig, kernel: &MemoryKernel, order: usize) -> Vec<Vec<Complex64>> {
    let n = cfg.n_qubits();
    let hop = cfg.hopping_matrix();
    let r = kernel.r_derivatives_at_zero(order.max(1));
    let mut out: Vec<Vec<Complex64>> = vec![cfg.initial_amplitudes().to_vec()];
    for m in 0..order {
        let cur = DVector::from_column_slice(&out[m]);
        let mut next = &hop * cur;
        let mut memory = Complex64::new(0.0, 0.0);
        for l in 0..m {
            memory += r[l] * out[m - 1 - l][n - 1];
        }
        next[n - 1] -= memory;
        out.push(next.as_slice().to_vec());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::kernel_for;
    use crate::reservoir::SpectralDensity;

    #[test]
    fn first_terms() {
        let s = Complex64::new(0.3, -0.7);
        let k = 2.0;
        assert_eq!(a_m(s, k, 1), Complex64::new(1.0, 0.0));
        assert!((a_m(s, k, 2) - I * k * s).norm() < 1e-15);
        assert!((a_m_explicit(s, k, 2) - I * k * s).norm() < 1e-14);
    }

    #[test]
    fn single_qubit_transform() {
        let cfg = ChainConfig::new(1, 1.0).unwrap();
        let s = Complex64::new(0.5, 1.0);
        let b = Complex64::new(0.2, -0.1);
        let f1 = f1_of_s(s, &cfg, b).unwrap();
        assert!((f1 - 1.0 / (s + b)).norm() < 1e-15);
    }

    #[test]
    fn second_site_substitution() {
        let cfg = ChainConfig::new(3, 1.0).unwrap();
        let s = Complex64::new(0.2, 0.4);
        let f1 = Complex64::new(0.7, 0.1);
        let k = cfg.k();
        let expected = I * k * s * f1 - I * k;
        assert!((f_i_of_s(s, 2, f1, &cfg) - expected).norm() < 1e-14);
    }

    #[test]
    fn pole_is_flagged() {
        // N = 1: F₁ = 1/(s+B) with B = g²/(s+γ/2) vanishing denominator at s = −B
        let cfg = ChainConfig::new(1, 1.0).unwrap();
        assert!(matches!(
            f1_of_s(Complex64::new(0.3, 0.0), &cfg, Complex64::new(-0.3, 0.0)),
            Err(Error::PoleProximity { .. })
        ));
    }

    #[test]
    fn taylor_coefficients_start_with_the_chain_equations() {
        let cfg = ChainConfig::new(2, 1.0).unwrap();
        let kernel = kernel_for(&SpectralDensity::lorentzian(1.0, 0.03, 0.0)).unwrap();
        let d = taylor_coefficients(&cfg, &kernel, 2);
        // c₁' = −i/2 c₂ = 0, c₂' = −i/2 c₁ = −i/2
        assert_eq!(d[1][0], Complex64::new(0.0, 0.0));
        assert!((d[1][1] - Complex64::new(0.0, -0.5)).norm() < 1e-15);
        // c₂'' = −i/2 c₁' − R(0) c₂(0) = 0, c₁'' = −i/2 c₂' = −1/4
        assert!((d[2][0] + 0.25).norm() < 1e-15);
        assert!(d[2][1].norm() < 1e-15);
    }
}
