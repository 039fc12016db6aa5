mod common;

use lrom_core::assembly::assemble_galerkin;
use lrom_core::calibrate::mean_kinetic_energy;
use lrom_core::diagnostics::{
    l2_norm_series, phase_portrait, project_snapshots, write_l2norm_csv, write_phase_csv, write_spectrum_csv,
};
use lrom_core::integrate::{integrate, RomRunConfig, Trajectory};
use lrom_core::pod::reconstruct;
use lrom_core::snapshot::weighted_norm;

#[test]
fn norm_series_equals_full_order_norm() {
    let p = common::default_pipeline();
    let r = 8;
    let mut rng = common::rng(12);
    let rows: Vec<Vec<f64>> = (0..30).map(|_| common::random_vec(&mut rng, r)).collect();
    let traj = Trajectory::from_rows((0..30).map(|k| k as f64 * 0.1).collect(), &rows).unwrap();
    let series = l2_norm_series(&traj);
    for (a, &norm) in rows.iter().zip(&series.norms) {
        let u = reconstruct(&p.basis, a).unwrap();
        let full = weighted_norm(&u, p.set.mass()).unwrap();
        assert!((norm - full).abs() <= 1e-10, "{norm} vs {full}");
    }
    let mean = series.norms.iter().sum::<f64>() / 30.0;
    assert!((series.mean - mean).abs() < 1e-15);
}

#[test]
fn projected_energy_is_bounded_by_snapshot_energy_and_grows_with_rank() {
    let p = common::default_pipeline();
    let full: f64 = (0..p.set.s())
        .map(|k| 0.5 * weighted_norm(p.set.snapshot(k), p.set.mass()).unwrap().powi(2))
        .sum::<f64>()
        / p.set.s() as f64;
    let mut previous = 0.0;
    for r in [1, 2, 4, 8, p.basis.d()] {
        let ke = mean_kinetic_energy(&project_snapshots(&p.basis, r, &p.set).unwrap(), 0.0).unwrap();
        assert!(ke <= full * (1.0 + 1e-12), "r={r}");
        assert!(ke >= previous);
        previous = ke;
    }
}

#[test]
fn full_rank_projection_reconstructs_snapshots() {
    let p = common::desk_pipeline(16);
    let d = p.basis.d();
    let traj = project_snapshots(&p.basis, d, &p.set).unwrap();
    let tail = p.basis.tail_energy(d).unwrap();
    let mut err = 0.0;
    for k in 0..p.set.s() {
        let u = reconstruct(&p.basis, traj.row(k)).unwrap();
        let diff: Vec<f64> = u.iter().zip(p.set.snapshot(k)).map(|(x, y)| x - y).collect();
        err += weighted_norm(&diff, p.set.mass()).unwrap().powi(2);
    }
    err /= p.set.s() as f64;
    assert!((err - tail).abs() <= 1e-10 * p.basis.total_energy());
}

#[test]
fn csv_exports_have_expected_shape() {
    let p = common::default_pipeline();
    let ops = assemble_galerkin(&p.basis, 4, &p.set).unwrap();
    let traj = integrate(&ops, &RomRunConfig::galerkin(4, 2e-4, 0.02), &p.basis, &p.set).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let norm_path = dir.path().join("l2norm.csv");
    write_l2norm_csv(&l2_norm_series(&traj), &norm_path).unwrap();
    let text = std::fs::read_to_string(&norm_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,norm");
    assert_eq!(lines.len(), traj.len() + 1);

    let phase_path = dir.path().join("phase.csv");
    write_phase_csv(&phase_portrait(&traj, 1, 2).unwrap(), &phase_path).unwrap();
    let text = std::fs::read_to_string(&phase_path).unwrap();
    assert_eq!(text.lines().next(), Some("ai,aj"));
    let first: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(first, traj.row(0)[..2].to_vec());

    let spec_path = dir.path().join("spectrum.csv");
    write_spectrum_csv(p.basis.eigenvalues(), &spec_path).unwrap();
    let text = std::fs::read_to_string(&spec_path).unwrap();
    assert_eq!(text.lines().next(), Some("j,lambda"));
    assert_eq!(text.lines().count(), p.basis.d() + 1);
}
