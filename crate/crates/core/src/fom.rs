//! Desk-scale full-order model: 1D periodic viscous Burgers,
//! `u_t + u u_x = ν u_xx`, discretized with P1 finite elements and a
//! consistent mass matrix, integrated with classical RK4.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::convection::Convection;
use crate::error::{Error, Result};
use crate::snapshot::{BoundaryCondition, DomainMeta, SnapshotSet};
use crate::sparse::{SkylineCholesky, SymSparse};

/// Safety factor of the time-step guard.
pub const CFL_SAFETY: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// `sin(2πx/L)`
    Sine,
    /// `sin(2πx/L) + 0.5 sin(4πx/L)`
    TwoWave,
    /// Nodal values, one per grid point.
    Samples(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurgersConfig {
    pub n: usize,
    pub domain_length: f64,
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub initial_condition: InitialCondition,
    /// Amplitude of a seeded random low-wavenumber perturbation added to the
    /// initial condition. Zero disables it.
    pub perturbation: f64,
    pub seed: u64,
}

impl Default for BurgersConfig {
    fn default() -> Self {
        BurgersConfig {
            n: 256,
            domain_length: 1.0,
            nu: 0.01,
            dt: 2e-4,
            t_end: 2.0,
            snapshot_stride: 20,
            initial_condition: InitialCondition::TwoWave,
            perturbation: 0.0,
            seed: 0,
        }
    }
}

impl BurgersConfig {
    pub fn grid_spacing(&self) -> f64 {
        self.domain_length / self.n as f64
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    pub fn snapshot_count(&self) -> usize {
        self.steps() / self.snapshot_stride.max(1)
    }

    pub fn grid(&self) -> Vec<f64> {
        let h = self.grid_spacing();
        (0..self.n).map(|i| i as f64 * h).collect()
    }

    pub fn initial_state(&self) -> Result<Vec<f64>> {
        let l = self.domain_length;
        let x = self.grid();
        let mut u: Vec<f64> = match &self.initial_condition {
            InitialCondition::Sine => x.iter().map(|&x| (2.0 * PI * x / l).sin()).collect(),
            InitialCondition::TwoWave => x
                .iter()
                .map(|&x| (2.0 * PI * x / l).sin() + 0.5 * (4.0 * PI * x / l).sin())
                .collect(),
            InitialCondition::Samples(v) => {
                if v.len() != self.n {
                    return Err(Error::Validation(format!(
                        "custom initial condition has {} samples for n = {}",
                        v.len(),
                        self.n
                    )));
                }
                v.clone()
            }
        };
        if self.perturbation != 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            for k in 1..=4 {
                let amp = self.perturbation * rng.random_range(-1.0..1.0) / k as f64;
                let phase = rng.random_range(0.0..2.0 * PI);
                for (ui, &xi) in u.iter_mut().zip(&x) {
                    *ui += amp * (2.0 * PI * k as f64 * xi / l + phase).sin();
                }
            }
        }
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 8 {
            return Err(Error::Validation(format!("n = {} but at least 8 grid points are required", self.n)));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(Error::Validation("dt and t_end must be positive".into()));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Validation("snapshot_stride must be at least 1".into()));
        }
        if !(self.nu >= 0.0) || !(self.domain_length > 0.0) {
            return Err(Error::Validation(
                "nu must be nonnegative and domain_length positive".into(),
            ));
        }
        if self.snapshot_count() < 2 {
            return Err(Error::Validation(format!(
                "t_end / (dt * snapshot_stride) yields {} snapshots; at least 2 are required",
                self.snapshot_count()
            )));
        }
        let h = self.grid_spacing();
        let u_max = self
            .initial_state()?
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let advective = if u_max > 0.0 { h / u_max } else { f64::INFINITY };
        let diffusive = if self.nu > 0.0 { h * h / (2.0 * self.nu) } else { f64::INFINITY };
        if self.dt > CFL_SAFETY * advective {
            return Err(Error::Validation(format!(
                "dt = {} violates the advective bound dt <= {CFL_SAFETY} * h / u_max = {}",
                self.dt,
                CFL_SAFETY * advective
            )));
        }
        if self.dt > CFL_SAFETY * diffusive {
            return Err(Error::Validation(format!(
                "dt = {} violates the diffusive bound dt <= {CFL_SAFETY} * h^2 / (2 nu) = {}",
                self.dt,
                CFL_SAFETY * diffusive
            )));
        }
        Ok(())
    }

    pub fn domain_meta(&self) -> DomainMeta {
        DomainMeta {
            n: self.n,
            domain_length: self.domain_length,
            nu: self.nu,
            bc: BoundaryCondition::Periodic,
        }
    }
}

/// P1 mass and stiffness matrices on the periodic uniform grid.
///
/// Mass rows are `(h/6)[1, 4, 1]`, stiffness rows `(1/h)[-1, 2, -1]`.
pub fn assemble_operators(config: &BurgersConfig) -> Result<(SymSparse, SymSparse)> {
    config.validate()?;
    Ok(periodic_p1_operators(config.n, config.domain_length))
}

/// Same as [`assemble_operators`] without a time-stepping configuration.
pub fn periodic_p1_operators(n: usize, domain_length: f64) -> (SymSparse, SymSparse) {
    assert!(n >= 3, "periodic P1 operators need at least 3 nodes");
    let h = domain_length / n as f64;
    let mut mass = Vec::with_capacity(2 * n);
    let mut stiff = Vec::with_capacity(2 * n);
    for i in 0..n {
        mass.push((i, i, 4.0 * h / 6.0));
        stiff.push((i, i, 2.0 / h));
        let j = (i + 1) % n;
        let (lo, hi) = (i.min(j), i.max(j));
        mass.push((lo, hi, h / 6.0));
        stiff.push((lo, hi, -1.0 / h));
    }
    (
        SymSparse::from_upper_triplets(n, &mass).expect("periodic mass pattern"),
        SymSparse::from_upper_triplets(n, &stiff).expect("periodic stiffness pattern"),
    )
}

/// Semi-discrete right-hand side `u' = M⁻¹ (-ν S u - N(u))` with
/// `N_i(u) = b(u, u, e_i)`.
#[derive(Debug, Clone)]
pub struct BurgersRhs {
    nu: f64,
    stiffness: SymSparse,
    mass_factor: SkylineCholesky,
    convection: Convection,
}

impl BurgersRhs {
    pub fn new(mass: &SymSparse, stiffness: &SymSparse, nu: f64, bc: BoundaryCondition) -> Result<Self> {
        Ok(BurgersRhs {
            nu,
            stiffness: stiffness.clone(),
            mass_factor: SkylineCholesky::factor(mass)?,
            convection: Convection::new(mass.n(), bc),
        })
    }

    pub fn from_set(set: &SnapshotSet) -> Result<Self> {
        Self::new(set.mass(), set.stiffness(), set.nu(), set.meta().bc)
    }

    /// `M u'`, before the mass solve.
    pub fn weak_into(&self, u: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        self.stiffness.mul_into(u, out);
        self.convection.tested_into(u, u, scratch);
        for (o, c) in out.iter_mut().zip(scratch.iter()) {
            *o = -self.nu * *o - c;
        }
    }

    pub fn eval_into(&self, u: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        self.weak_into(u, out, scratch);
        self.mass_factor.solve_in_place(out);
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        let mut scratch = vec![0.0; u.len()];
        self.eval_into(u, &mut out, &mut scratch);
        out
    }
}

/// Integrates the configured problem and returns the stored snapshots
/// (states after every `snapshot_stride`-th step; the initial state is not
/// stored) bundled with the assembled operators.
pub fn run_fom(config: &BurgersConfig) -> Result<SnapshotSet> {
    config.validate()?;
    let (mass, stiffness) = periodic_p1_operators(config.n, config.domain_length);
    let rhs = BurgersRhs::new(&mass, &stiffness, config.nu, BoundaryCondition::Periodic)?;

    let n = config.n;
    let steps = config.steps();
    let s = config.snapshot_count();
    let dt = config.dt;
    let mut u = config.initial_state()?;
    let mut states = Vec::with_capacity(n * s);
    let mut times = Vec::with_capacity(s);

    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut stage = vec![0.0; n];
    let mut scratch = vec![0.0; n];

    for step in 1..=steps {
        rhs.eval_into(&u, &mut k1, &mut scratch);
        axpy_into(&u, 0.5 * dt, &k1, &mut stage);
        rhs.eval_into(&stage, &mut k2, &mut scratch);
        axpy_into(&u, 0.5 * dt, &k2, &mut stage);
        rhs.eval_into(&stage, &mut k3, &mut scratch);
        axpy_into(&u, dt, &k3, &mut stage);
        rhs.eval_into(&stage, &mut k4, &mut scratch);
        for i in 0..n {
            u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp {
                step,
                time: step as f64 * dt,
            });
        }
        if step % config.snapshot_stride == 0 && times.len() < s {
            states.extend_from_slice(&u);
            times.push(step as f64 * dt);
        }
    }

    SnapshotSet::new(
        DMatrix::from_vec(n, s, states),
        times,
        mass,
        stiffness,
        config.domain_meta(),
    )
}

fn axpy_into(x: &[f64], alpha: f64, y: &[f64], out: &mut [f64]) {
    for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
        *o = a + alpha * b;
    }
}
