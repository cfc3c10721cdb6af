//! State distances for density matrices whose trace decays with time.
//!
//! * trace:     ½ Tr|ρ − σ|
//! * hellinger: [Tr ρ + Tr σ − 2 Tr(√ρ√σ)]^{1/2}
//! * bures:     √2 [½(Tr ρ + Tr σ) − Tr√(√ρ σ √ρ)]^{1/2}
//!
//! Both square-root measures are evaluated as Frobenius norms,
//! ‖√ρ − √σ‖_F and min_U ‖√ρ − √σ U‖_F, which equal the bracket forms above
//! but do not lose half the digits near zero distance. The brackets
//! themselves are still formed and checked for consistency.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::DensityMatrixSeries;
use crate::error::{Error, Result};

type CMatrix = DMatrix<Complex64>;

/// Eigenvalues below −this are not roundoff and make the input invalid.
pub const NEGATIVE_EIGENVALUE_LIMIT: f64 = 1e-6;
/// Eigenvalues between −this and 0 are silently set to zero.
pub const SILENT_CLIP: f64 = 1e-9;
/// Eigenvalues below this fraction of the largest one are numerically zero.
pub const RANK_TOLERANCE: f64 = 1e-14;
/// Most negative bracket accepted as roundoff.
pub const BRACKET_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Trace,
    Hellinger,
    Bures,
    FidelityF1,
    FidelityF2,
    FidelityF3,
}

impl Measure {
    pub const ALL: [Measure; 6] = [
        Measure::Trace,
        Measure::Hellinger,
        Measure::Bures,
        Measure::FidelityF1,
        Measure::FidelityF2,
        Measure::FidelityF3,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Measure::Trace => "trace",
            Measure::Hellinger => "hellinger",
            Measure::Bures => "bures",
            Measure::FidelityF1 => "fidelity-f1",
            Measure::FidelityF2 => "fidelity-f2",
            Measure::FidelityF3 => "fidelity-f3",
        }
    }

    pub fn is_distance(&self) -> bool {
        matches!(self, Measure::Trace | Measure::Hellinger | Measure::Bures)
    }
}

impl std::fmt::Display for Measure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Measure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Measure::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::InvalidSettings(format!("unknown measure `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QsdSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub measure: Measure,
}

fn check_dims(rho: &CMatrix, sigma: &CMatrix) -> Result<()> {
    if rho.shape() != sigma.shape() || rho.nrows() != rho.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "cannot compare {:?} with {:?}",
            rho.shape(),
            sigma.shape()
        )));
    }
    Ok(())
}

fn hermitian_part(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()).scale(0.5)
}

fn trace_re(a: &CMatrix) -> f64 {
    a.trace().re
}

fn is_hermitian(a: &CMatrix) -> bool {
    (a - a.adjoint()).norm() <= 1e-12 * a.norm()
}

fn diagonal(values: impl Iterator<Item = f64>) -> CMatrix {
    let v: Vec<Complex64> = values.map(|x| Complex64::new(x, 0.0)).collect();
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(v))
}

/// Eigenvalues of A†A below `RANK_TOLERANCE` × the largest are set to zero.
fn gram_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(&(a.adjoint() * a)));
    let largest = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    let values = eig
        .eigenvalues
        .iter()
        .map(|&l| if l <= RANK_TOLERANCE * largest { 0.0 } else { l })
        .collect();
    (values, eig.eigenvectors)
}

/// Singular values of A from the eigenvalues of A†A.
fn singular_values(a: &CMatrix) -> Vec<f64> {
    gram_eigen(a).0.into_iter().map(f64::sqrt).collect()
}

/// Tr|A|; the eigenvalue moduli when A is Hermitian.
fn trace_norm(a: &CMatrix) -> f64 {
    if is_hermitian(a) {
        SymmetricEigen::new(hermitian_part(a)).eigenvalues.iter().map(|l| l.abs()).sum()
    } else {
        singular_values(a).iter().sum()
    }
}

/// √(A†A) for any square A.
pub fn matrix_abs(a: &CMatrix) -> CMatrix {
    if is_hermitian(a) {
        let eig = SymmetricEigen::new(hermitian_part(a));
        let v = &eig.eigenvectors;
        return v * diagonal(eig.eigenvalues.iter().map(|l| l.abs())) * v.adjoint();
    }
    let (values, v) = gram_eigen(a);
    &v * diagonal(values.into_iter().map(f64::sqrt)) * v.adjoint()
}

/// Principal square root of a Hermitian positive semidefinite matrix.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    let h = hermitian_part(a);
    let eig = SymmetricEigen::new(h);
    let largest = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut roots = Vec::with_capacity(eig.eigenvalues.len());
    for &lambda in eig.eigenvalues.iter() {
        if lambda < -NEGATIVE_EIGENVALUE_LIMIT {
            return Err(Error::InvalidDensity { eigenvalue: lambda });
        }
        if lambda < -SILENT_CLIP {
            log::debug!("clipping eigenvalue {lambda:e} to zero");
        }
        let kept = if lambda <= RANK_TOLERANCE * largest { 0.0 } else { lambda };
        roots.push(kept.sqrt());
    }
    let v = &eig.eigenvectors;
    Ok(v * diagonal(roots.into_iter()) * v.adjoint())
}

/// Unitary U maximising Re Tr(MU), i.e. V W† for M = W Σ V†.
///
/// V comes from the eigenvectors of M†M, the columns of W on the range from
/// M v_i / σ_i, and the rest of W is any orthonormal completion.
fn polar_unitary(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    let (values, v) = gram_eigen(m);
    let mut w_cols: Vec<nalgebra::DVector<Complex64>> = Vec::with_capacity(n);
    let mut range = Vec::new();
    let mut null = Vec::new();
    for (i, &l) in values.iter().enumerate() {
        if l > 0.0 {
            let mut w = m * v.column(i);
            // re-orthogonalise against earlier columns to keep W unitary
            for _ in 0..2 {
                for prev in &w_cols {
                    let proj = prev.dotc(&w);
                    w -= prev * proj;
                }
            }
            let norm = w.norm();
            if norm > 0.0 {
                w_cols.push(w / Complex64::new(norm, 0.0));
                range.push(i);
                continue;
            }
        }
        null.push(i);
    }
    if !null.is_empty() {
        let mut projector = CMatrix::identity(n, n);
        for w in &w_cols {
            projector -= w * w.adjoint();
        }
        let eig = SymmetricEigen::new(hermitian_part(&projector));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        for &k in order.iter().take(null.len()) {
            w_cols.push(eig.eigenvectors.column(k).into_owned());
        }
    }
    let mut u = CMatrix::zeros(n, n);
    for (w, &i) in w_cols.iter().zip(range.iter().chain(&null)) {
        u += v.column(i) * w.adjoint();
    }
    u
}

pub fn trace_distance(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    Ok(0.5 * trace_norm(&(rho - sigma)))
}

/// The four-term radical ½ Tr √(ρ†ρ + σ†σ − ρ†σ − σ†ρ).
pub fn trace_distance_expanded(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    let radical = rho.adjoint() * rho + sigma.adjoint() * sigma
        - rho.adjoint() * sigma
        - sigma.adjoint() * rho;
    Ok(0.5 * trace_re(&psd_sqrt(&radical)?))
}

fn check_bracket(measure: &'static str, bracket: f64) -> Result<()> {
    if bracket < -BRACKET_TOLERANCE {
        return Err(Error::NegativeBracket { measure, bracket });
    }
    Ok(())
}

pub fn hellinger_distance(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    let (sr, ss) = (psd_sqrt(rho)?, psd_sqrt(sigma)?);
    let overlap = trace_re(&(&sr * &ss));
    check_bracket("hellinger", trace_re(rho) + trace_re(sigma) - 2.0 * overlap)?;
    Ok((sr - ss).norm())
}

/// Tr√(√ρ σ √ρ), computed as the sum of singular values of √σ√ρ, i.e. from
/// the spectrum of √ρ σ √ρ itself.
pub fn root_fidelity(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    let (sr, ss) = (psd_sqrt(rho)?, psd_sqrt(sigma)?);
    Ok(singular_values(&(ss * sr)).iter().sum())
}

pub fn bures_distance(rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    check_dims(rho, sigma)?;
    let (sr, ss) = (psd_sqrt(rho)?, psd_sqrt(sigma)?);
    let product = &sr * &ss;
    let nuclear: f64 = singular_values(&product).iter().sum();
    check_bracket("bures", 0.5 * (trace_re(rho) + trace_re(sigma)) - nuclear)?;
    let u = polar_unitary(&product);
    Ok((sr - ss * u).norm())
}

/// (F₁, F₂, F₃) = ((Tr√(√ρσ√ρ))², Tr√(√ρσ√ρ), Tr ρσ).
pub fn fidelities(rho: &CMatrix, sigma: &CMatrix) -> Result<(f64, f64, f64)> {
    let f2 = root_fidelity(rho, sigma)?;
    Ok((f2 * f2, f2, trace_re(&(rho * sigma))))
}

pub fn measure_value(measure: Measure, rho: &CMatrix, sigma: &CMatrix) -> Result<f64> {
    match measure {
        Measure::Trace => trace_distance(rho, sigma),
        Measure::Hellinger => hellinger_distance(rho, sigma),
        Measure::Bures => bures_distance(rho, sigma),
        Measure::FidelityF1 => fidelities(rho, sigma).map(|f| f.0),
        Measure::FidelityF2 => root_fidelity(rho, sigma),
        Measure::FidelityF3 => fidelities(rho, sigma).map(|f| f.2),
    }
}

/// Pointwise measure between two series on the same grid.
pub fn qsd_series(
    rho: &DensityMatrixSeries,
    sigma: &DensityMatrixSeries,
    measure: Measure,
) -> Result<QsdSeries> {
    if rho.times != sigma.times {
        return Err(Error::DimensionMismatch("density series use different time grids".into()));
    }
    let values = rho
        .matrices
        .par_iter()
        .zip(&sigma.matrices)
        .map(|(r, s)| measure_value(measure, r, s).map(|v| v.max(0.0)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(QsdSeries {
        times: rho.times.clone(),
        values,
        measure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn diag(v: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(v.len(), v.iter().map(|x| c(*x))))
    }

    #[test]
    fn abs_of_diagonal_and_zero() {
        let a = matrix_abs(&diag(&[3.0, -4.0]));
        assert!((a - diag(&[3.0, 4.0])).norm() < 1e-14);
        assert_eq!(matrix_abs(&CMatrix::zeros(3, 3)).norm(), 0.0);
    }

    #[test]
    fn sqrt_of_half_identity_and_zero() {
        let r = psd_sqrt(&diag(&[0.5, 0.5])).unwrap();
        assert!((r - diag(&[0.5f64.sqrt(), 0.5f64.sqrt()])).norm() < 1e-15);
        assert_eq!(psd_sqrt(&CMatrix::zeros(2, 2)).unwrap().norm(), 0.0);
    }

    #[test]
    fn negative_eigenvalues() {
        assert!(matches!(psd_sqrt(&diag(&[1.0, -1e-3])), Err(Error::InvalidDensity { .. })));
        let r = psd_sqrt(&diag(&[1.0, -1e-8])).unwrap();
        assert!(r[(1, 1)].norm() == 0.0);
    }

    #[test]
    fn orthogonal_pure_states() {
        let (rho, sigma) = (diag(&[1.0, 0.0]), diag(&[0.0, 1.0]));
        assert!((trace_distance(&rho, &sigma).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fidelities(&rho, &sigma).unwrap(), (0.0, 0.0, 0.0));
        let same = fidelities(&rho, &rho).unwrap();
        assert!((same.0 - 1.0).abs() < 1e-14 && (same.1 - 1.0).abs() < 1e-14 && (same.2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vanishing_traces_give_zero_not_root_two() {
        let rho = diag(&[1e-10, 0.0]);
        let sigma = diag(&[0.0, 1e-10]);
        assert!(hellinger_distance(&rho, &sigma).unwrap() < 2e-5);
        assert!(bures_distance(&rho, &sigma).unwrap() < 2e-5);
    }

    #[test]
    fn dimension_mismatch() {
        assert!(trace_distance(&diag(&[1.0]), &diag(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn measure_tags_round_trip() {
        for m in Measure::ALL {
            assert_eq!(m.tag().parse::<Measure>().unwrap(), m);
        }
    }
}
