//! Filter-radius calibration by matching mean kinetic energy.
//!
//! A log-spaced grid sweep over `[δ_min, δ_max]` (independent runs, optionally
//! parallel) locates the best cell; golden-section search on `|ΔKE|`, carried
//! out in `log δ`, refines inside it.

use crate::assembly::{assemble_leray_fe_with, RomOperators};
use crate::diagnostics::project_snapshots;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::filter::{build_rom_filter, FeFilterCache, FilterVariant};
use crate::integrate::{integrate_system, RomInitial, RomSystem, Trajectory};
use crate::pod::{project, PodBasis};
use crate::snapshot::SnapshotSet;

pub const DEFAULT_WARMUP: f64 = 0.2;

/// Time average of `½‖a‖²` after discarding the leading `warmup_fraction` of samples.
pub fn mean_kinetic_energy(traj: &Trajectory, warmup_fraction: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&warmup_fraction) {
        return Err(Error::Validation(format!(
            "warmup fraction {warmup_fraction} outside [0, 1)"
        )));
    }
    if traj.blew_up {
        return Err(Error::Degenerate(
            "kinetic energy undefined for a trajectory truncated by blow-up".into(),
        ));
    }
    let skip = (warmup_fraction * traj.len() as f64).floor() as usize;
    let kept = traj.len().saturating_sub(skip);
    if kept == 0 {
        return Err(Error::Degenerate("no samples left after warmup".into()));
    }
    let sum: f64 = traj
        .rows()
        .skip(skip)
        .map(|a| 0.5 * a.iter().map(|x| x * x).sum::<f64>())
        .sum();
    Ok(sum / kept as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub variant: FilterVariant,
    pub delta_min: f64,
    pub delta_max: f64,
    pub n_grid: usize,
    pub refine_iters: usize,
    pub warmup_fraction: f64,
    pub dt: f64,
    /// Horizon of each L-ROM run.
    pub t_end: f64,
    pub initial: RomInitial,
    /// Overrides the projected-snapshot target when set.
    pub target: Option<f64>,
}

impl CalibrationConfig {
    pub fn new(variant: FilterVariant, dt: f64, t_end: f64) -> Self {
        CalibrationConfig {
            variant,
            delta_min: 1e-3,
            delta_max: 1.0,
            n_grid: 12,
            refine_iters: 20,
            warmup_fraction: DEFAULT_WARMUP,
            dt,
            t_end,
            initial: RomInitial::ProjectFirstSnapshot,
            target: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.variant == FilterVariant::None {
            return Err(Error::Config("calibration needs fe_level or rom_level".into()));
        }
        if !(self.delta_min >= 0.0) || !(self.delta_max > self.delta_min) {
            return Err(Error::Validation(format!(
                "invalid delta range [{}, {}]",
                self.delta_min, self.delta_max
            )));
        }
        if self.n_grid < 2 {
            return Err(Error::Validation("n_grid must be at least 2".into()));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(Error::Validation("dt and t_end must be positive".into()));
        }
        Ok(())
    }

    /// Log-spaced radii; a zero lower end is kept as an exact `0` point
    /// followed by log spacing over `[δ_max·1e-3, δ_max]`.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.n_grid;
        let log_grid = |lo: f64, hi: f64, m: usize| -> Vec<f64> {
            let (a, b) = (lo.ln(), hi.ln());
            (0..m)
                .map(|k| {
                    if k + 1 == m {
                        hi
                    } else if k == 0 {
                        lo
                    } else {
                        (a + (b - a) * k as f64 / (m - 1) as f64).exp()
                    }
                })
                .collect()
        };
        if self.delta_min == 0.0 {
            let mut g = vec![0.0];
            g.extend(log_grid(self.delta_max * 1e-3, self.delta_max, n - 1));
            g
        } else {
            log_grid(self.delta_min, self.delta_max, n)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub delta_star: f64,
    pub mean_ke: f64,
    pub target_ke: f64,
    pub objective_value: f64,
    /// Grid sweep in grid order; a blown-up run records `NaN`.
    pub sweep: Vec<(f64, f64)>,
    /// Golden-section evaluations in the order performed.
    pub refinement: Vec<(f64, f64)>,
    pub converged: bool,
}

/// Evaluates the L-ROM mean kinetic energy at arbitrary radii.
pub struct KineticEnergyProbe<'a> {
    ops: &'a RomOperators,
    basis: &'a PodBasis,
    set: &'a SnapshotSet,
    variant: FilterVariant,
    a0: Vec<f64>,
    t0: f64,
    dt: f64,
    steps: usize,
    warmup: f64,
    fe_filters: FeFilterCache,
}

impl<'a> KineticEnergyProbe<'a> {
    pub fn new(
        ops: &'a RomOperators,
        basis: &'a PodBasis,
        set: &'a SnapshotSet,
        config: &CalibrationConfig,
    ) -> Result<Self> {
        let r = ops.r();
        let (a0, t0) = match &config.initial {
            RomInitial::ProjectFirstSnapshot => (project(basis, r, set.snapshot(0), set.mass())?, set.times()[0]),
            RomInitial::Explicit(a) => {
                crate::error::check_len(r, a.len())?;
                (a.clone(), 0.0)
            }
        };
        Ok(KineticEnergyProbe {
            ops,
            basis,
            set,
            variant: config.variant,
            a0,
            t0,
            dt: config.dt,
            steps: (config.t_end / config.dt).round() as usize,
            warmup: config.warmup_fraction,
            fe_filters: FeFilterCache::new(set.mass(), set.stiffness()),
        })
    }

    pub fn trajectory(&self, delta: f64) -> Result<Trajectory> {
        let run = |system: RomSystem<'_>| {
            let (times, coeffs, blew_up) = integrate_system(&system, &self.a0, self.t0, self.dt, self.steps);
            Trajectory {
                times,
                coeffs,
                r: self.ops.r(),
                model: crate::integrate::Model::Leray,
                variant: self.variant,
                delta,
                blew_up,
            }
        };
        match self.variant {
            FilterVariant::FeLevel => {
                let filter = self.fe_filters.get(delta)?;
                let leray = assemble_leray_fe_with(self.ops, self.basis, self.set, &filter, Execution::Sequential)?;
                Ok(run(RomSystem::leray(&leray, None, FilterVariant::FeLevel)?))
            }
            FilterVariant::RomLevel => {
                let f = build_rom_filter(&self.ops.mass_r, &self.ops.stiff_r, delta)?;
                Ok(run(RomSystem::leray(self.ops, Some(&f), FilterVariant::RomLevel)?))
            }
            FilterVariant::None => Err(Error::Config("calibration needs fe_level or rom_level".into())),
        }
    }

    /// Mean kinetic energy, `NaN` when the run diverges.
    pub fn mean_ke(&self, delta: f64) -> Result<f64> {
        let traj = self.trajectory(delta)?;
        if traj.blew_up {
            return Ok(f64::NAN);
        }
        mean_kinetic_energy(&traj, self.warmup)
    }
}

/// Target: mean kinetic energy of the POD projection of the snapshots.
pub fn snapshot_target_ke(basis: &PodBasis, r: usize, set: &SnapshotSet, warmup: f64) -> Result<f64> {
    mean_kinetic_energy(&project_snapshots(basis, r, set)?, warmup)
}

pub fn calibrate_delta(
    ops: &RomOperators,
    basis: &PodBasis,
    set: &SnapshotSet,
    config: &CalibrationConfig,
    exec: Execution,
) -> Result<CalibrationResult> {
    config.validate()?;
    let r = ops.r();
    let target = match config.target {
        Some(t) => t,
        None => snapshot_target_ke(basis, r, set, config.warmup_fraction)?,
    };
    let probe = KineticEnergyProbe::new(ops, basis, set, config)?;

    let grid = config.grid();
    let kes = exec
        .map_slice(&grid, |&d| probe.mean_ke(d))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let sweep: Vec<(f64, f64)> = grid.iter().copied().zip(kes.iter().copied()).collect();
    let objective = |ke: f64| if ke.is_finite() { (ke - target).abs() } else { f64::INFINITY };

    let feasible: Vec<usize> = (0..grid.len()).filter(|&i| kes[i].is_finite()).collect();
    if feasible.is_empty() {
        return Err(Error::CalibrationInfeasible(format!(
            "all {} sweep runs diverged",
            grid.len()
        )));
    }
    let best = *feasible
        .iter()
        .min_by(|&&a, &&b| objective(kes[a]).total_cmp(&objective(kes[b])))
        .expect("nonempty");

    let finish = |delta_star: f64, ke: f64, refinement: Vec<(f64, f64)>, converged: bool| CalibrationResult {
        delta_star,
        mean_ke: ke,
        target_ke: target,
        objective_value: objective(ke),
        sweep: sweep.clone(),
        refinement,
        converged,
    };

    if objective(kes[best]) == 0.0 {
        return Ok(finish(grid[best], kes[best], Vec::new(), true));
    }

    // Cell containing a sign change of KE - target next to the best point,
    // else the neighbourhood of an interior minimum, else the boundary rule.
    let signed = |i: usize| kes[i] - target;
    let crossing = |i: usize| i + 1 < grid.len() && kes[i].is_finite() && kes[i + 1].is_finite() && signed(i) * signed(i + 1) <= 0.0;
    let bracket = if best > 0 && crossing(best - 1) {
        Some((best - 1, best))
    } else if crossing(best) {
        Some((best, best + 1))
    } else if best > 0 && best + 1 < grid.len() && kes[best - 1].is_finite() && kes[best + 1].is_finite() {
        Some((best - 1, best + 1))
    } else {
        None
    };
    let Some((lo, hi)) = bracket else {
        return Ok(finish(grid[best], kes[best], Vec::new(), false));
    };

    let mut refinement = Vec::with_capacity(config.refine_iters + 2);
    let (d_best, ke_best) = golden_section_log(grid[lo], grid[hi], config.refine_iters, |d| {
        let ke = probe.mean_ke(d)?;
        refinement.push((d, ke));
        Ok((objective(ke), ke))
    })?;
    let (delta_star, ke_star) = if objective(ke_best) <= objective(kes[best]) {
        (d_best, ke_best)
    } else {
        (grid[best], kes[best])
    };
    Ok(finish(delta_star, ke_star, refinement, true))
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of `f` over `[lo, hi]` in `ln δ` (linear in
/// `δ` when `lo = 0`). `f` returns `(objective, payload)`; the best evaluated
/// point is returned.
fn golden_section_log<F>(lo: f64, hi: f64, iters: usize, mut f: F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let logscale = lo > 0.0;
    let to_x = |d: f64| if logscale { d.ln() } else { d };
    let to_d = |x: f64| if logscale { x.exp() } else { x };
    let (mut a, mut b) = (to_x(lo), to_x(hi));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut pc) = f(to_d(c))?;
    let (mut fd, mut pd) = f(to_d(d))?;
    let mut best = if fc <= fd { (to_d(c), fc, pc) } else { (to_d(d), fd, pd) };
    for _ in 0..iters {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            pd = pc;
            c = b - INV_PHI * (b - a);
            (fc, pc) = f(to_d(c))?;
            if fc < best.1 {
                best = (to_d(c), fc, pc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            pc = pd;
            d = a + INV_PHI * (b - a);
            (fd, pd) = f(to_d(d))?;
            if fd < best.1 {
                best = (to_d(d), fd, pd);
            }
        }
    }
    Ok((best.0, best.2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinetic_energy_of_simple_trajectories() {
        let unit = Trajectory::from_rows(vec![0.0, 1.0, 2.0], &vec![vec![1.0, 0.0]; 3]).unwrap();
        assert_eq!(mean_kinetic_energy(&unit, 0.0).unwrap(), 0.5);
        let zero = Trajectory::from_rows(vec![0.0, 1.0], &vec![vec![0.0]; 2]).unwrap();
        assert_eq!(mean_kinetic_energy(&zero, 0.2).unwrap(), 0.0);
    }

    #[test]
    fn cosine_mean_energy() {
        let dt = 0.01;
        let times: Vec<f64> = (0..=62832).map(|k| k as f64 * dt).collect();
        let rows: Vec<Vec<f64>> = times.iter().map(|t| vec![t.cos()]).collect();
        let traj = Trajectory::from_rows(times, &rows).unwrap();
        assert!((mean_kinetic_energy(&traj, 0.0).unwrap() - 0.25).abs() < 1e-3);
    }

    #[test]
    fn truncated_and_empty_trajectories_error() {
        let mut t = Trajectory::from_rows(vec![0.0], &[vec![1.0]]).unwrap();
        t.blew_up = true;
        assert!(mean_kinetic_energy(&t, 0.0).is_err());
        let empty = Trajectory::from_rows(vec![], &[]).unwrap();
        assert!(mean_kinetic_energy(&empty, 0.0).is_err());
    }

    #[test]
    fn golden_section_finds_log_minimum() {
        let (d, _) = golden_section_log(1e-3, 1.0, 40, |d| Ok(((d.ln() - 0.05f64.ln()).abs(), 0.0))).unwrap();
        assert!((d / 0.05 - 1.0).abs() < 1e-6);
        let (d, _) = golden_section_log(0.0, 1.0, 40, |d| Ok(((d - 0.3).powi(2), 0.0))).unwrap();
        assert!((d - 0.3).abs() < 1e-6);
    }

    #[test]
    fn grid_shapes() {
        let cfg = CalibrationConfig::new(FilterVariant::RomLevel, 0.1, 1.0);
        let g = cfg.grid();
        assert_eq!(g.len(), 12);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[11], 1.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let cfg = CalibrationConfig {
            delta_min: 0.0,
            ..cfg
        };
        let g = cfg.grid();
        assert_eq!(g[0], 0.0);
        assert_eq!(g.len(), 12);
    }
}
