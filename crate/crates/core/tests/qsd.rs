use dnm_core::chain::outer_product;
use dnm_core::qsd::{
    bures_distance, fidelities, hellinger_distance, matrix_abs, psd_sqrt, root_fidelity, trace_distance,
    trace_distance_expanded,
};
use dnm_core::Error;
use dnm_oracles::{hermitian_eigenvalues, hermitian_function};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type M = DMatrix<Complex64>;

fn unit_vector(rng: &mut StdRng, n: usize) -> Vec<Complex64> {
    let v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|c| c / norm).collect()
}

/// Random density matrix of the given rank and trace.
fn density(rng: &mut StdRng, n: usize, rank: usize, trace: f64) -> M {
    let weights: Vec<f64> = (0..rank).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = weights.iter().sum();
    let mut out = M::zeros(n, n);
    for w in weights {
        out += outer_product(&unit_vector(rng, n)).scale(trace * w / total);
    }
    out
}

fn random_hermitian(rng: &mut StdRng, n: usize) -> M {
    let a = M::from_fn(n, n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    (&a + a.adjoint()).scale(0.5)
}

fn tr(m: &M) -> f64 {
    m.trace().re
}

fn oracle_sqrt(m: &M) -> M {
    hermitian_function(m, |x| x.max(0.0).sqrt())
}

fn oracle_trace_distance(rho: &M, sigma: &M) -> f64 {
    0.5 * hermitian_eigenvalues(&(rho - sigma)).iter().map(|l| l.abs()).sum::<f64>()
}

fn oracle_root_fidelity(rho: &M, sigma: &M) -> f64 {
    let x = oracle_sqrt(rho);
    let inner = &x * sigma * &x;
    hermitian_eigenvalues(&inner).iter().map(|l| l.max(0.0).sqrt()).sum()
}

fn oracle_bures(rho: &M, sigma: &M) -> f64 {
    let bracket = 0.5 * (tr(rho) + tr(sigma)) - oracle_root_fidelity(rho, sigma);
    2f64.sqrt() * bracket.max(0.0).sqrt()
}

#[test]
fn matrix_abs_squares_to_gram_matrix() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..50 {
        let a = M::from_fn(5, 5, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let abs = matrix_abs(&a);
        assert!((&abs * &abs - a.adjoint() * &a).norm() < 1e-10);
        let h = random_hermitian(&mut rng, 5);
        assert!((matrix_abs(&h) - hermitian_function(&h, f64::abs)).norm() < 1e-12);
    }
}

#[test]
fn psd_sqrt_of_rank_one_is_scaled_projector() {
    let mut rng = StdRng::seed_from_u64(12);
    for n in 1..=6 {
        let tau = rng.random::<f64>() * 2.0 + 0.01;
        let v: Vec<Complex64> = unit_vector(&mut rng, n).into_iter().map(|c| c * tau.sqrt()).collect();
        let a = outer_product(&v);
        let r = psd_sqrt(&a).unwrap();
        assert!((&r - a.scale(1.0 / tau.sqrt())).norm() < 1e-12);
        assert!((&r * &r - &a).norm() <= 1e-10 * a.norm());
    }
}

#[test]
fn psd_sqrt_of_mixed_states_matches_oracle() {
    let mut rng = StdRng::seed_from_u64(13);
    for rank in 1..=5 {
        let a = density(&mut rng, 5, rank, 0.7);
        let r = psd_sqrt(&a).unwrap();
        assert!((&r * &r - &a).norm() <= 1e-10 * a.norm());
        assert!((r - oracle_sqrt(&a)).norm() < 1e-7, "rank {rank}");
    }
}

#[test]
fn significantly_negative_input_is_rejected() {
    let mut a = M::identity(3, 3).scale(0.5);
    a[(2, 2)] = Complex64::new(-1e-4, 0.0);
    assert!(matches!(psd_sqrt(&a), Err(Error::InvalidDensity { .. })));
    assert!(hellinger_distance(&a, &M::identity(3, 3)).is_err());
}

#[test]
fn equal_arguments_give_zero_for_any_trace() {
    let mut rng = StdRng::seed_from_u64(14);
    for &trace in &[0.0, 1e-12, 1e-6, 1e-3, 0.25, 0.6, 1.0] {
        for rank in 1..=5 {
            let rho = density(&mut rng, 5, rank, trace);
            for d in [
                trace_distance(&rho, &rho).unwrap(),
                hellinger_distance(&rho, &rho).unwrap(),
                bures_distance(&rho, &rho).unwrap(),
            ] {
                assert!(d <= 1e-10, "trace {trace} rank {rank}: {d}");
            }
        }
    }
}

#[test]
fn expanded_radical_equals_half_trace_norm() {
    let mut rng = StdRng::seed_from_u64(15);
    for n in (1..=5).cycle().take(100) {
        let (rho, sigma) = (random_hermitian(&mut rng, n), random_hermitian(&mut rng, n));
        let a = trace_distance_expanded(&rho, &sigma).unwrap();
        let b = trace_distance(&rho, &sigma).unwrap();
        assert!((a - b).abs() < 1e-10, "{a} {b}");
        assert!((b - oracle_trace_distance(&rho, &sigma)).abs() < 1e-12);
    }
}

#[test]
fn unit_trace_hellinger_reduces_to_overlap_form() {
    let mut rng = StdRng::seed_from_u64(16);
    for k in 0..100 {
        let (r1, r2) = (1 + k % 5, 1 + (k / 5) % 5);
        let (rho, sigma) = (density(&mut rng, 5, r1, 1.0), density(&mut rng, 5, r2, 1.0));
        let overlap = tr(&(psd_sqrt(&rho).unwrap() * psd_sqrt(&sigma).unwrap()));
        let closed = 2f64.sqrt() * (1.0 - overlap).sqrt();
        let d = hellinger_distance(&rho, &sigma).unwrap();
        assert!((d - closed).abs() <= 1e-12, "{d} {closed}");
    }
}

#[test]
fn rank_one_closed_forms_match_eigensolver() {
    let mut rng = StdRng::seed_from_u64(17);
    for n in (1..=6).cycle().take(60) {
        let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
        let (v, w) = (unit_vector(&mut rng, n), unit_vector(&mut rng, n));
        let rho = outer_product(&v).scale(a);
        let sigma = outer_product(&w).scale(b);
        let overlap_sq: f64 = v.iter().zip(&w).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm_sqr();

        // Tr(√ρ√σ) = Tr(ρσ)/√(τ_ρ τ_σ) and Tr√(√ρσ√ρ) = √(τ_ρ τ_σ |⟨v|w⟩|²)
        let hellinger = (a + b - 2.0 * (a * b).sqrt() * overlap_sq).max(0.0).sqrt();
        let fid = (a * b * overlap_sq).sqrt();
        let bures = 2f64.sqrt() * (0.5 * (a + b) - fid).max(0.0).sqrt();

        assert!((hellinger_distance(&rho, &sigma).unwrap() - hellinger).abs() < 1e-10);
        assert!((bures_distance(&rho, &sigma).unwrap() - bures).abs() < 1e-10);
        assert!((bures - oracle_bures(&rho, &sigma)).abs() < 1e-7);
        assert!((trace_distance(&rho, &sigma).unwrap() - oracle_trace_distance(&rho, &sigma)).abs() < 1e-10);
        let (f1, f2, f3) = fidelities(&rho, &sigma).unwrap();
        assert!((f2 - fid).abs() < 1e-10);
        assert_eq!(f1, f2 * f2);
        assert!((f3 - a * b * overlap_sq).abs() < 1e-12);
    }
}

#[test]
fn mixed_states_match_oracle_and_are_symmetric() {
    let mut rng = StdRng::seed_from_u64(18);
    for k in 0..40 {
        let (ta, tb) = (rng.random::<f64>(), rng.random::<f64>());
        let rho = density(&mut rng, 4, 1 + k % 4, ta);
        let sigma = density(&mut rng, 4, 1 + (k / 4) % 4, tb);
        let b = bures_distance(&rho, &sigma).unwrap();
        assert!((b - bures_distance(&sigma, &rho).unwrap()).abs() < 1e-12);
        assert!((b - oracle_bures(&rho, &sigma)).abs() < 1e-7, "{b}");
        assert!((root_fidelity(&rho, &sigma).unwrap() - root_fidelity(&sigma, &rho).unwrap()).abs() < 1e-12);
        let h = hellinger_distance(&rho, &sigma).unwrap();
        assert!((h - hellinger_distance(&sigma, &rho).unwrap()).abs() < 1e-12);
        let t = trace_distance(&rho, &sigma).unwrap();
        assert!((t - trace_distance(&sigma, &rho).unwrap()).abs() < 1e-12);
    }
}

#[test]
fn pure_unit_trace_bures_value() {
    let mut rng = StdRng::seed_from_u64(19);
    for _ in 0..20 {
        let (v, w) = (unit_vector(&mut rng, 3), unit_vector(&mut rng, 3));
        let f: f64 = v.iter().zip(&w).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm_sqr();
        let d = bures_distance(&outer_product(&v), &outer_product(&w)).unwrap();
        assert!((d - 2f64.sqrt() * (1.0 - f.sqrt()).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn distances_vanish_with_the_traces() {
    let mut rng = StdRng::seed_from_u64(20);
    let (rho, sigma) = (density(&mut rng, 3, 1, 1.0), density(&mut rng, 3, 1, 1.0));
    let base = [
        trace_distance(&rho, &sigma).unwrap(),
        hellinger_distance(&rho, &sigma).unwrap(),
        bures_distance(&rho, &sigma).unwrap(),
    ];
    let s = 1e-9;
    let (r, q) = (rho.scale(s), sigma.scale(s));
    let scaled = [
        trace_distance(&r, &q).unwrap(),
        hellinger_distance(&r, &q).unwrap(),
        bures_distance(&r, &q).unwrap(),
    ];
    assert!((scaled[0] - s * base[0]).abs() < 1e-20);
    for i in 1..3 {
        assert!((scaled[i] - s.sqrt() * base[i]).abs() < 1e-13, "{i}");
        assert!(scaled[i] < 1e-4);
    }
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    fn pair(seed: u64, n: usize, r1: usize, r2: usize, t1: f64, t2: f64) -> (M, M) {
        let mut rng = StdRng::seed_from_u64(seed);
        (density(&mut rng, n, r1.min(n), t1), density(&mut rng, n, r2.min(n), t2))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn distances_are_symmetric_and_bounded(
            seed in any::<u64>(), n in 1usize..=5, r1 in 1usize..=5, r2 in 1usize..=5,
            t1 in 0.0..1.0f64, t2 in 0.0..1.0f64,
        ) {
            let (rho, sigma) = pair(seed, n, r1, r2, t1, t2);
            let t = trace_distance(&rho, &sigma).unwrap();
            let h = hellinger_distance(&rho, &sigma).unwrap();
            let b = bures_distance(&rho, &sigma).unwrap();
            prop_assert!(t >= 0.0 && h >= 0.0 && b >= 0.0);
            prop_assert!((t - trace_distance(&sigma, &rho).unwrap()).abs() < 1e-12);
            prop_assert!((h - hellinger_distance(&sigma, &rho).unwrap()).abs() < 1e-12);
            prop_assert!((b - bures_distance(&sigma, &rho).unwrap()).abs() < 1e-10);
            prop_assert!(t <= 0.5 * (t1 + t2) + 1e-12);
            // Tr(√ρ√σ) ≤ Tr|√ρ√σ| makes Bures the smaller of the two
            prop_assert!(b <= h + 1e-10);
        }

        #[test]
        fn trace_distance_obeys_triangle_inequality(
            seed in any::<u64>(), n in 1usize..=4, t in 0.0..1.0f64,
        ) {
            let mut rng = StdRng::seed_from_u64(seed);
            let a = density(&mut rng, n, n, t);
            let b = density(&mut rng, n, 1, t);
            let c = density(&mut rng, n, n, 1.0 - t);
            let ab = trace_distance(&a, &b).unwrap();
            let bc = trace_distance(&b, &c).unwrap();
            let ac = trace_distance(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }

        #[test]
        fn root_fidelity_is_bounded_by_traces(
            seed in any::<u64>(), n in 1usize..=5, t1 in 0.0..1.0f64, t2 in 0.0..1.0f64,
        ) {
            let (rho, sigma) = pair(seed, n, n, 1, t1, t2);
            let f = root_fidelity(&rho, &sigma).unwrap();
            prop_assert!(f >= -1e-12 && f <= (t1 * t2).sqrt() + 1e-10);
        }
    }
}
