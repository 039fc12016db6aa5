mod common;

use lrom_core::assembly::{assemble_galerkin, RomOperators, Tensor3};
use lrom_core::calibrate::{calibrate_delta, snapshot_target_ke, CalibrationConfig, KineticEnergyProbe, DEFAULT_WARMUP};
use lrom_core::error::Error;
use lrom_core::filter::FilterVariant;
use lrom_core::integrate::RomInitial;
use lrom_core::Execution;
use nalgebra::DMatrix;

const DT: f64 = 2e-4;
const HORIZON: f64 = 1.996;

#[test]
fn target_at_lower_bound_returns_lower_bound() {
    let p = common::default_pipeline();
    let ops = assemble_galerkin(&p.basis, 4, &p.set).unwrap();
    let mut config = CalibrationConfig::new(FilterVariant::RomLevel, DT, HORIZON);
    let probe = KineticEnergyProbe::new(&ops, &p.basis, &p.set, &config).unwrap();
    config.target = Some(probe.mean_ke(config.delta_min).unwrap());
    let result = calibrate_delta(&ops, &p.basis, &p.set, &config, Execution::default()).unwrap();
    assert_eq!(result.delta_star, config.delta_min);
    assert_eq!(result.objective_value, 0.0);
    assert!(result.converged);
}

#[test]
fn fe_level_recovers_a_known_radius() {
    let p = common::default_pipeline();
    let r = 4;
    let ops = assemble_galerkin(&p.basis, r, &p.set).unwrap();
    let mut config = CalibrationConfig::new(FilterVariant::FeLevel, DT, HORIZON);
    config.initial = RomInitial::perturbed(&p.basis, r, &p.set, 1, 0.01).unwrap();
    let probe = KineticEnergyProbe::new(&ops, &p.basis, &p.set, &config).unwrap();
    config.target = Some(probe.mean_ke(0.1).unwrap());
    let result = calibrate_delta(&ops, &p.basis, &p.set, &config, Execution::default()).unwrap();
    assert!(result.converged);
    assert!((result.delta_star - 0.1).abs() <= 0.02 * 0.1, "delta* = {}", result.delta_star);
}

#[test]
fn sweep_trend_and_result_invariants() {
    let p = common::default_pipeline();
    let ops = assemble_galerkin(&p.basis, 4, &p.set).unwrap();
    let config = CalibrationConfig::new(FilterVariant::RomLevel, DT, HORIZON);
    let result = calibrate_delta(&ops, &p.basis, &p.set, &config, Execution::default()).unwrap();
    assert!((config.delta_min..=config.delta_max).contains(&result.delta_star));
    assert!(result.objective_value >= 0.0);
    assert_eq!(result.sweep.len(), config.n_grid);
    let target = snapshot_target_ke(&p.basis, 4, &p.set, DEFAULT_WARMUP).unwrap();
    assert_eq!(result.target_ke, target);
    // Energy rises with δ on this case until δ ≈ 0.5.
    let low: Vec<f64> = result.sweep.iter().filter(|(d, _)| *d <= 0.3).map(|&(_, ke)| ke).collect();
    assert!(low.len() >= 8);
    assert!(low.windows(2).all(|w| w[1] >= w[0]), "{:?}", result.sweep);

    let sequential = calibrate_delta(&ops, &p.basis, &p.set, &config, Execution::Sequential).unwrap();
    assert_eq!(sequential, result);
}

#[test]
fn divergent_sweep_is_infeasible() {
    let p = common::default_pipeline();
    let r = 3;
    let ops = RomOperators {
        a: DMatrix::identity(r, r) * 10.0,
        mass_r: DMatrix::identity(r, r),
        stiff_r: DMatrix::identity(r, r),
        b: Tensor3::zeros(r),
        b_leray: None,
        leray_delta: None,
    };
    let mut config = CalibrationConfig::new(FilterVariant::RomLevel, 1e-2, 5.0);
    config.initial = RomInitial::Explicit(vec![1.0; r]);
    config.target = Some(1.0);
    let err = calibrate_delta(&ops, &p.basis, &p.set, &config, Execution::default()).unwrap_err();
    assert!(matches!(err, Error::CalibrationInfeasible(_)), "{err}");
}

#[test]
fn unfiltered_variant_is_rejected() {
    let p = common::default_pipeline();
    let ops = assemble_galerkin(&p.basis, 2, &p.set).unwrap();
    let config = CalibrationConfig::new(FilterVariant::None, DT, 0.1);
    let err = calibrate_delta(&ops, &p.basis, &p.set, &config, Execution::default()).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}
