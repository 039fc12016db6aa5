mod common;

use lrom_core::assembly::{
    assemble_galerkin, assemble_galerkin_with, assemble_leray_fe, read_rom_operators, write_rom_operators,
};
use lrom_core::filter::filter_fe;
use lrom_core::fom::{periodic_p1_operators, BurgersRhs};
use lrom_core::integrate::rhs_galerkin;
use lrom_core::pod::{compute_pod, reconstruct};
use lrom_core::snapshot::{BoundaryCondition, DomainMeta, SnapshotSet};
use lrom_core::Execution;
use nalgebra::DMatrix;
use proptest::prelude::*;

/// `∫ u v_x w` on the periodic P1 grid by two-point Gauss quadrature per element.
fn gauss_advective(u: &[f64], v: &[f64], w: &[f64], length: f64) -> f64 {
    let n = u.len();
    let h = length / n as f64;
    let g = 0.5 / 3f64.sqrt();
    let mut total = 0.0;
    for e in 0..n {
        let (a, b) = (e, (e + 1) % n);
        let vx = (v[b] - v[a]) / h;
        for xi in [0.5 - g, 0.5 + g] {
            let ue = u[a] * (1.0 - xi) + u[b] * xi;
            let we = w[a] * (1.0 - xi) + w[b] * xi;
            total += 0.5 * h * ue * vx * we;
        }
    }
    total
}

fn gauss_trilinear(u: &[f64], v: &[f64], w: &[f64], length: f64) -> f64 {
    (gauss_advective(u, v, w, length) - gauss_advective(u, w, v, length)) / 3.0
}

fn constant_set(n: usize) -> SnapshotSet {
    let (mass, stiffness) = periodic_p1_operators(n, 1.0);
    let mut states = DMatrix::from_element(n, 2, 1.0);
    states.column_mut(1).fill(2.0);
    SnapshotSet::new(
        states,
        vec![0.5, 1.0],
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

#[test]
fn constant_mode_has_no_dynamics() {
    let set = constant_set(16);
    let basis = compute_pod(&set, 2, 1e-12).unwrap();
    assert_eq!(basis.d(), 1);
    let ops = assemble_galerkin(&basis, 1, &set).unwrap();
    assert!(ops.a[(0, 0)].abs() < 1e-14);
    assert!(ops.b.get(0, 0, 0).abs() < 1e-14);
    let leray = assemble_leray_fe(&ops, &basis, &set, 0.2).unwrap();
    assert!(leray.b_leray.unwrap().get(0, 0, 0).abs() < 1e-14);
}

#[test]
fn reduced_operator_structure_on_default_basis() {
    let p = common::default_pipeline();
    let r = 12;
    let ops = assemble_galerkin(&p.basis, r, &p.set).unwrap();
    assert!((&ops.mass_r - DMatrix::identity(r, r)).amax() <= 1e-10);
    assert!((&ops.stiff_r - ops.stiff_r.transpose()).amax() == 0.0);
    assert!((&ops.a + &ops.stiff_r * p.set.nu()).amax() == 0.0);
    let eig = ops.a.clone().symmetric_eigen();
    assert!(eig.eigenvalues.iter().all(|&l| l <= 1e-12));
    let scale = ops.b.as_slice().iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    for j in 0..r {
        for i in 0..r {
            for k in 0..r {
                assert!((ops.b.get(j, i, k) + ops.b.get(j, k, i)).abs() <= 1e-10 * scale.max(1.0));
            }
        }
    }
}

#[test]
fn leray_tensor_matches_quadrature_oracle() {
    let p = common::desk_pipeline(32);
    let r = 3;
    let delta = 0.1;
    let ops = assemble_galerkin(&p.basis, r, &p.set).unwrap();
    let leray = assemble_leray_fe(&ops, &p.basis, &p.set, delta).unwrap();
    assert_eq!(leray.leray_delta, Some(delta));
    let bl = leray.b_leray.as_ref().unwrap();
    let length = p.set.meta().domain_length;
    for j in 0..r {
        let psi = filter_fe(p.basis.mode(j), p.set.mass(), p.set.stiffness(), delta).unwrap();
        for i in 0..r {
            for k in 0..r {
                let oracle = -gauss_trilinear(&psi, p.basis.mode(k), p.basis.mode(i), length);
                assert!((bl.get(j, i, k) - oracle).abs() <= 1e-11, "({j},{i},{k})");
                let plain = -gauss_trilinear(p.basis.mode(j), p.basis.mode(k), p.basis.mode(i), length);
                assert!((ops.b.get(j, i, k) - plain).abs() <= 1e-11);
            }
        }
    }
}

#[test]
fn zero_radius_leray_tensor_is_galerkin_tensor() {
    let p = common::default_pipeline();
    let ops = assemble_galerkin(&p.basis, 6, &p.set).unwrap();
    let leray = assemble_leray_fe(&ops, &p.basis, &p.set, 0.0).unwrap();
    assert!(leray.b_leray.as_ref().unwrap().max_abs_diff(&ops.b) <= 1e-12);
}

#[test]
fn energy_neutral_nonlinearity() {
    let p = common::default_pipeline();
    let ops = assemble_galerkin(&p.basis, 10, &p.set).unwrap();
    let zero_visc = lrom_core::RomOperators {
        a: DMatrix::zeros(10, 10),
        ..ops
    };
    let mut rng = common::rng(17);
    for _ in 0..100 {
        let a = common::random_vec(&mut rng, 10);
        let f = rhs_galerkin(&zero_visc, &a);
        let e: f64 = a.iter().zip(&f).map(|(x, y)| x * y).sum();
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(e.abs() <= 1e-10 * norm.powi(3), "{e:e}");
    }
}

#[test]
fn truncation_and_persistence() {
    let p = common::default_pipeline();
    let big = assemble_galerkin(&p.basis, 8, &p.set).unwrap();
    let small = assemble_galerkin(&p.basis, 4, &p.set).unwrap();
    let cut = big.truncated(4).unwrap();
    assert!((&cut.a - &small.a).amax() <= 1e-14);
    assert!(cut.b.max_abs_diff(&small.b) == 0.0);

    let leray = assemble_leray_fe(&big, &p.basis, &p.set, 0.07).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for (name, ops) in [("g", &big), ("l", &leray)] {
        let stem = dir.path().join(name);
        write_rom_operators(ops, &stem).unwrap();
        assert_eq!(&read_rom_operators(&stem).unwrap(), ops);
    }
}

#[test]
fn execution_policy_does_not_change_operators() {
    let p = common::default_pipeline();
    let a = assemble_galerkin_with(&p.basis, 10, &p.set, Execution::Sequential).unwrap();
    let b = assemble_galerkin_with(&p.basis, 10, &p.set, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

fn consistency_defect(n: usize, r: usize, seed: u64) -> f64 {
    let p = common::desk_pipeline(n);
    let ops = assemble_galerkin(&p.basis, r, &p.set).unwrap();
    let fom = BurgersRhs::from_set(&p.set).unwrap();
    let phi = p.basis.leading(r).unwrap();
    let mut rng = common::rng(seed);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let a = common::random_vec(&mut rng, r);
        let u = reconstruct(&p.basis, &a).unwrap();
        let mdu = p.set.mass().mul(&fom.eval(&u));
        let oracle = phi.transpose() * nalgebra::DVector::from_vec(mdu);
        let got = rhs_galerkin(&ops, &a);
        let scale = 1.0_f64.max(common::max_abs(oracle.as_slice()));
        worst = worst.max(common::max_abs_diff(&got, oracle.as_slice()) / scale);
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn galerkin_rhs_is_projected_full_order_rhs(
        n in prop::sample::select(vec![16usize, 32]),
        r in 1usize..=4,
        seed in any::<u64>(),
    ) {
        let defect = consistency_defect(n, r, seed);
        prop_assert!(defect <= 1e-10, "n={} r={} defect={:e}", n, r, defect);
    }
}
