//! Brute-force reference computations for the test suites. Nothing here is
//! shared with the library's own numerical paths.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

// Gauss–Kronrod 7/15 nodes and weights on [−1, 1]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let pair = f(c - x) + f(c + x);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    ((kronrod * h), ((kronrod - gauss) * h).norm())
}

/// Adaptive Gauss–Kronrod integral of a complex function over [a, b] with
/// absolute tolerance `abs_tol` plus relative tolerance `rel_tol`.
pub fn integrate<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Complex64 {
    let (v, e) = gk15(&f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    for _ in 0..200_000 {
        let total: Complex64 = intervals.iter().map(|x| x.2).sum();
        let err: f64 = intervals.iter().map(|x| x.3).sum();
        if err <= abs_tol.max(rel_tol * total.norm()) {
            return total;
        }
        let (idx, _) = intervals
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    intervals.iter().map(|x| x.2).sum()
}

/// ∫_a^∞ f via x = a + u/(1−u).
pub fn integrate_to_infinity<F: Fn(f64) -> Complex64>(f: F, a: f64, abs_tol: f64, rel_tol: f64) -> Complex64 {
    integrate(
        |u| {
            if u >= 1.0 {
                return ZERO;
            }
            let x = a + u / (1.0 - u);
            f(x) / ((1.0 - u) * (1.0 - u))
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}

/// Γ(a, z) on the principal branch by integrating along z + u, u ∈ [0, ∞).
/// The path never crosses the negative real axis unless z lies on it.
pub fn incomplete_gamma_by_quadrature(a: f64, z: Complex64) -> Complex64 {
    let scale = (-z).exp();
    let integrand = |u: f64| {
        let w = z + u;
        (w.ln() * (a - 1.0)).exp() * (-u).exp()
    };
    // split near the origin where (z+u)^{a−1} varies fastest
    let near = integrate(integrand, 0.0, 1.0, 1e-16, 1e-14);
    let far = integrate_to_infinity(integrand, 1.0, 1e-16, 1e-14);
    scale * (near + far)
}

/// e^{A} by scaling and squaring with a Taylor series.
pub fn expm(a: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.norm()).sum::<f64>();
    let mut squarings = 0;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let b = a.scale(scale);
    let mut term = DMatrix::<Complex64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &b / Complex64::new(k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Nearest-neighbour hopping generator −i(𝒥/2) on the off-diagonals.
pub fn hopping(n: usize, coupling: f64) -> DMatrix<Complex64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            Complex64::new(0.0, -0.5 * coupling)
        } else {
            ZERO
        }
    })
}

/// Lab-frame (phase-free) Markovian amplitudes: exp of the constant
/// generator with −γ_M on the last diagonal entry.
pub fn markovian_amplitudes(coupling: f64, gamma_m: f64, c0: &[Complex64], t: f64) -> Vec<Complex64> {
    let n = c0.len();
    let mut m = hopping(n, coupling);
    m[(n - 1, n - 1)] -= gamma_m;
    let v = expm(&m.scale(t)) * DVector::from_column_slice(c0);
    v.as_slice().to_vec()
}

/// Which exponential-type kernel the augmented system reproduces.
#[derive(Debug, Clone, Copy)]
pub enum ExponentialKernel {
    /// g² e^{λt}
    Lorentzian,
    /// g²(1 + γt/2) e^{λt}
    LorentzianSquared,
}

/// Exact tilde amplitudes for an exponential-type kernel with
/// λ = −γ/2 − iΔ. Auxiliary variables y₁ = ∫e^{λ(t−t′)}c_N and
/// y₂ = ∫(t−t′)e^{λ(t−t′)}c_N turn the integro-differential system into a
/// constant-coefficient linear ODE.
pub fn exponential_kernel_amplitudes(
    kind: ExponentialKernel,
    coupling: f64,
    g: f64,
    gamma: f64,
    delta: f64,
    c0: &[Complex64],
    t: f64,
) -> Vec<Complex64> {
    let n = c0.len();
    let dim = n + 2;
    let lambda = Complex64::new(-0.5 * gamma, -delta);
    let mut m = DMatrix::<Complex64>::zeros(dim, dim);
    m.view_mut((0, 0), (n, n)).copy_from(&hopping(n, coupling));
    let (y1, y2) = (n, n + 1);
    m[(n - 1, y1)] = Complex64::new(-g * g, 0.0);
    if let ExponentialKernel::LorentzianSquared = kind {
        m[(n - 1, y2)] = Complex64::new(-g * g * 0.5 * gamma, 0.0);
    }
    m[(y1, n - 1)] = Complex64::new(1.0, 0.0);
    m[(y1, y1)] = lambda;
    m[(y2, y1)] = Complex64::new(1.0, 0.0);
    m[(y2, y2)] = lambda;
    let mut v0 = DVector::<Complex64>::zeros(dim);
    for (i, c) in c0.iter().enumerate() {
        v0[i] = *c;
    }
    let v = expm(&m.scale(t)) * v0;
    v.as_slice()[..n].to_vec()
}

/// Cyclic Jacobi diagonalisation of the real symmetric 2n×2n embedding
/// [[Re H, −Im H], [Im H, Re H]]. Returns the rotated matrix (diagonal on
/// exit) and the accumulated rotations.
fn jacobi_embedding(h: &DMatrix<Complex64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = h.nrows();
    let dim = 2 * n;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            let z = 0.5 * (h[(i, j)] + h[(j, i)].conj());
            a[(i, j)] = z.re;
            a[(i + n, j + n)] = z.re;
            a[(i, j + n)] = -z.im;
            a[(i + n, j)] = z.im;
        }
    }
    let mut v = DMatrix::<f64>::identity(dim, dim);
    for _sweep in 0..100 {
        let off: f64 = (0..dim)
            .flat_map(|i| (0..dim).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-32 {
            break;
        }
        for p in 0..dim {
            for q in p + 1..dim {
                let apq = a[(p, q)];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..dim {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
                for k in 0..dim {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    (a, v)
}

/// Eigenvalues (ascending) of a Hermitian matrix. Each appears twice in the
/// real embedding and is reported once.
pub fn hermitian_eigenvalues(h: &DMatrix<Complex64>) -> Vec<f64> {
    let (a, _) = jacobi_embedding(h);
    let mut eig: Vec<f64> = (0..a.nrows()).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.partial_cmp(y).unwrap());
    eig.chunks(2).map(|p| 0.5 * (p[0] + p[1])).collect()
}

/// f(H) = Σ f(λ_k) v_k v_k† for Hermitian H.
pub fn hermitian_function<F: Fn(f64) -> f64>(h: &DMatrix<Complex64>, f: F) -> DMatrix<Complex64> {
    let n = h.nrows();
    let (a, v) = jacobi_embedding(h);
    let dim = 2 * n;
    let mut fr = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..dim {
        let fk = f(a[(k, k)]);
        for i in 0..dim {
            for j in 0..dim {
                fr[(i, j)] += fk * v[(i, k)] * v[(j, k)];
            }
        }
    }
    DMatrix::from_fn(n, n, |i, j| Complex64::new(fr[(i, j)], fr[(i + n, j)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_of_known_integrals() {
        let v = integrate(|x| Complex64::new(x.sin(), x.cos()), 0.0, 3.0, 1e-14, 1e-14);
        assert!((v - Complex64::new(1.0 - 3f64.cos(), 3f64.sin())).norm() < 1e-13);
        let v = integrate_to_infinity(|x| Complex64::new((-x).exp(), 0.0), 0.0, 1e-14, 1e-14);
        assert!((v.re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn expm_of_rotation() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[ZERO, Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0), ZERO],
        );
        let e = expm(&m.scale(2.0));
        assert!((e[(0, 0)].re - 2f64.cos()).abs() < 1e-14);
        assert!((e[(1, 0)].re - 2f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn incomplete_gamma_order_one() {
        let z = Complex64::new(0.7, -1.3);
        assert!((incomplete_gamma_by_quadrature(1.0, z) - (-z).exp()).norm() < 1e-13);
    }

    #[test]
    fn jacobi_eigenvalues_and_functions() {
        let h = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(2.0, 0.0),
                Complex64::new(0.0, 1.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(2.0, 0.0),
            ],
        );
        let e = hermitian_eigenvalues(&h);
        assert!((e[0] - 1.0).abs() < 1e-14 && (e[1] - 3.0).abs() < 1e-14);
        let sq = hermitian_function(&h, f64::sqrt);
        assert!((&sq * &sq - &h).norm() < 1e-13);
    }
}
