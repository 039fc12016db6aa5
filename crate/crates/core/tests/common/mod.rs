#![allow(dead_code)]

use std::sync::OnceLock;

use lrom_core::fom::{run_fom, BurgersConfig, InitialCondition};
use lrom_core::pod::{compute_pod, PodBasis, DEFAULT_DROP_TOL};
use lrom_core::snapshot::SnapshotSet;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Pipeline {
    pub set: SnapshotSet,
    pub basis: PodBasis,
}

impl Pipeline {
    pub fn build(config: &BurgersConfig) -> Pipeline {
        let set = run_fom(config).expect("fom run");
        let d_max = set.n().min(set.s());
        let basis = compute_pod(&set, d_max, DEFAULT_DROP_TOL).expect("pod");
        Pipeline { set, basis }
    }
}

/// n = 256, 500 snapshots; built once per test binary.
pub fn default_pipeline() -> &'static Pipeline {
    static CELL: OnceLock<Pipeline> = OnceLock::new();
    CELL.get_or_init(|| Pipeline::build(&BurgersConfig::default()))
}

/// Small periodic case: `n` nodes, 100 snapshots over t ∈ (0, 1].
pub fn desk_config(n: usize) -> BurgersConfig {
    BurgersConfig {
        n,
        dt: 1e-3,
        t_end: 1.0,
        snapshot_stride: 10,
        initial_condition: InitialCondition::TwoWave,
        ..BurgersConfig::default()
    }
}

pub fn desk_pipeline(n: usize) -> Pipeline {
    Pipeline::build(&desk_config(n))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Generalized eigenpairs of `S v = μ M v`, ascending, eigenvectors
/// M-orthonormal (columns).
pub fn generalized_eigen(m: &DMatrix<f64>, s: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let l = m.clone().cholesky().expect("spd mass").l();
    let linv = l.try_inverse().expect("invertible factor");
    let c = &linv * s * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mu = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vecs = DMatrix::zeros(m.nrows(), order.len());
    for (j, &k) in order.iter().enumerate() {
        vecs.set_column(j, &(linv.transpose() * eig.eigenvectors.column(k)));
    }
    (mu, vecs)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
