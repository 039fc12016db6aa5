mod common;

use lrom_core::fom::periodic_p1_operators;
use lrom_core::pod::{compute_pod, compute_pod_with, project, reconstruct, PodBasis};
use lrom_core::snapshot::{weighted_norm, BoundaryCondition, DomainMeta, SnapshotSet};
use lrom_core::Execution;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn random_set(n: usize, s: usize, seed: u64) -> SnapshotSet {
    let mut rng = common::rng(seed);
    let (mass, stiffness) = periodic_p1_operators(n, 1.0);
    SnapshotSet::new(
        DMatrix::from_vec(n, s, common::random_vec(&mut rng, n * s)),
        (1..=s).map(|k| k as f64).collect(),
        mass,
        stiffness,
        DomainMeta {
            n,
            domain_length: 1.0,
            nu: 0.01,
            bc: BoundaryCondition::Periodic,
        },
    )
    .unwrap()
}

fn orthonormality_defect(basis: &PodBasis, set: &SnapshotSet) -> f64 {
    let phi = basis.modes();
    let g = phi.transpose() * set.mass().to_dense() * phi;
    (g - DMatrix::identity(basis.d(), basis.d())).amax()
}

#[test]
fn energy_and_modes_match_weighted_svd_oracle() {
    let set = random_set(12, 8, 3);
    let basis = compute_pod(&set, 8, 0.0).unwrap();
    assert_eq!(basis.d(), 8);
    let mass = set.mass();
    let energy: f64 = (0..8).map(|k| weighted_norm(set.snapshot(k), mass).unwrap().powi(2)).sum::<f64>() / 8.0;
    let sum: f64 = basis.eigenvalues().iter().sum();
    assert!((sum - energy).abs() <= 1e-12 * energy, "{sum} vs {energy}");

    // M = L Lᵀ; the SVD of Lᵀ X / √s gives λ = σ² and φ = L⁻ᵀ U.
    let l = mass.to_dense().cholesky().unwrap().l();
    let y = l.transpose() * set.states() / 8f64.sqrt();
    let svd = y.svd(true, false);
    let u = svd.u.unwrap();
    let mut order: Vec<usize> = (0..8).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let lt_inv = l.transpose().try_inverse().unwrap();
    for (j, &k) in order.iter().enumerate() {
        let lambda = svd.singular_values[k].powi(2);
        assert!((basis.eigenvalues()[j] - lambda).abs() <= 1e-12 * energy);
        let oracle = &lt_inv * u.column(k);
        let phi = basis.mode(j);
        let plus = common::max_abs_diff(phi, oracle.as_slice());
        let minus = phi.iter().zip(oracle.iter()).fold(0.0_f64, |m, (a, b)| m.max((a + b).abs()));
        assert!(plus.min(minus) < 1e-9, "mode {j}: {plus:e} / {minus:e}");
    }
}

#[test]
fn default_basis_is_orthonormal_with_exact_tail() {
    let p = common::default_pipeline();
    assert!(orthonormality_defect(&p.basis, &p.set) <= 1e-10);
    let total = p.basis.total_energy();
    let lambda = p.basis.eigenvalues();
    for r in 0..=p.basis.d() {
        let tail = p.basis.tail_energy(r).unwrap();
        let kept: f64 = lambda[r..].iter().sum();
        // Energy dropped below the tolerance belongs to every tail.
        let dropped = total - lambda.iter().sum::<f64>();
        assert!((tail - kept - dropped).abs() <= 1e-10 * total, "r={r}");
    }
}

#[test]
fn truncation_identity_matches_reconstruction_error() {
    let set = random_set(12, 8, 5);
    let basis = compute_pod(&set, 8, 0.0).unwrap();
    let total = basis.total_energy();
    for r in 0..=8 {
        let mut err = 0.0;
        for k in 0..set.s() {
            let x = set.snapshot(k);
            let a = project(&basis, r, x, set.mass()).unwrap();
            let xr = if r == 0 { vec![0.0; x.len()] } else { reconstruct(&basis, &a).unwrap() };
            let d: Vec<f64> = x.iter().zip(&xr).map(|(p, q)| p - q).collect();
            err += weighted_norm(&d, set.mass()).unwrap().powi(2);
        }
        err /= set.s() as f64;
        let tail = basis.tail_energy(r).unwrap();
        assert!((err - tail).abs() <= 1e-10 * total, "r={r}: {err} vs {tail}");
    }
}

#[test]
fn projection_solves_normal_equations() {
    let set = random_set(12, 8, 9);
    let basis = compute_pod(&set, 8, 0.0).unwrap();
    let m = set.mass().to_dense();
    let mut rng = common::rng(1);
    for r in [1, 4, 8] {
        let phi = basis.leading(r).unwrap();
        let gram = phi.transpose() * &m * &phi;
        for _ in 0..5 {
            let u = nalgebra::DVector::from_vec(common::random_vec(&mut rng, 12));
            let rhs = phi.transpose() * &m * &u;
            let oracle = gram.clone().cholesky().unwrap().solve(&rhs);
            let a = project(&basis, r, u.as_slice(), set.mass()).unwrap();
            assert!(common::max_abs_diff(&a, oracle.as_slice()) < 1e-12);
        }
    }
}

#[test]
fn project_reconstruct_is_idempotent_in_span() {
    let p = common::default_pipeline();
    let mut rng = common::rng(2);
    let r = 10;
    for _ in 0..5 {
        let a = common::random_vec(&mut rng, r);
        let u = reconstruct(&p.basis, &a).unwrap();
        let b = project(&p.basis, r, &u, p.set.mass()).unwrap();
        let back = reconstruct(&p.basis, &b).unwrap();
        let d: Vec<f64> = u.iter().zip(&back).map(|(x, y)| x - y).collect();
        assert!(weighted_norm(&d, p.set.mass()).unwrap() < 1e-12);
    }
}

#[test]
fn orthogonal_complement_projects_to_zero() {
    let set = random_set(12, 8, 4);
    let basis = compute_pod(&set, 8, 0.0).unwrap();
    let mut rng = common::rng(8);
    let r = 3;
    let mut u = common::random_vec(&mut rng, 12);
    let a = project(&basis, r, &u, set.mass()).unwrap();
    for (j, aj) in a.iter().enumerate() {
        for (x, p) in u.iter_mut().zip(basis.mode(j)) {
            *x -= aj * p;
        }
    }
    let again = project(&basis, r, &u, set.mass()).unwrap();
    assert!(common::max_abs(&again) < 1e-13);
}

#[test]
fn parallel_and_sequential_bases_agree_bitwise() {
    let set = random_set(40, 30, 6);
    let a = compute_pod_with(&set, 30, 1e-12, Execution::Sequential).unwrap();
    let b = compute_pod_with(&set, 30, 1e-12, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_basis_is_orthonormal_sorted_and_signed(
        n in 4usize..20,
        s in 2usize..12,
        seed in any::<u64>(),
    ) {
        let set = random_set(n, s, seed);
        let basis = compute_pod(&set, n.min(s), 1e-12).unwrap();
        prop_assert!(orthonormality_defect(&basis, &set) <= 1e-10);
        let lambda = basis.eigenvalues();
        prop_assert!(lambda.iter().all(|&l| l > 0.0));
        prop_assert!(lambda.windows(2).all(|w| w[0] >= w[1]));
        for j in 0..basis.d() {
            let col = basis.mode(j);
            let big = col.iter().copied().fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
            prop_assert!(big > 0.0);
        }
    }
}
