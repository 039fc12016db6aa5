//! Fixed-step RK4 integration of the Galerkin and Leray reduced models.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::RomOperators;
use crate::error::{check_len, Error, Result};
use crate::filter::{build_rom_filter, FilterSpec, FilterVariant, RomFilterOperator};
use crate::pod::{project, PodBasis};
use crate::snapshot::SnapshotSet;

/// Coefficient magnitude treated as divergence.
pub const BLOW_UP_THRESHOLD: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    Galerkin,
    Leray,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Galerkin => "galerkin",
            Model::Leray => "leray",
        })
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "galerkin" => Ok(Model::Galerkin),
            "leray" => Ok(Model::Leray),
            other => Err(format!("unknown model `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RomInitial {
    /// Projection of the first snapshot; the run starts at its time stamp.
    ProjectFirstSnapshot,
    /// Explicit coefficients; the run starts at `t = 0`.
    Explicit(Vec<f64>),
}

impl RomInitial {
    /// Projected first snapshot plus seeded noise of relative size `rel`
    /// (uniform in `±rel·‖a₀‖` per coefficient).
    pub fn perturbed(basis: &PodBasis, r: usize, set: &SnapshotSet, seed: u64, rel: f64) -> Result<RomInitial> {
        let mut a = project(basis, r, set.snapshot(0), set.mass())?;
        let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for x in a.iter_mut() {
            *x += rel * norm * rng.random_range(-1.0..=1.0);
        }
        Ok(RomInitial::Explicit(a))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RomRunConfig {
    pub r: usize,
    pub dt: f64,
    /// Integration horizon measured from the start time.
    pub t_end: f64,
    pub initial: RomInitial,
    pub model: Model,
    pub filter: FilterSpec,
}

impl RomRunConfig {
    pub fn galerkin(r: usize, dt: f64, t_end: f64) -> Self {
        RomRunConfig {
            r,
            dt,
            t_end,
            initial: RomInitial::ProjectFirstSnapshot,
            model: Model::Galerkin,
            filter: FilterSpec::none(),
        }
    }

    pub fn leray(r: usize, dt: f64, t_end: f64, filter: FilterSpec) -> Self {
        RomRunConfig {
            model: Model::Leray,
            filter,
            ..Self::galerkin(r, dt, t_end)
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (self.model, self.filter.variant) {
            (Model::Leray, FilterVariant::None) => {
                return Err(Error::Config("leray model requires a filter variant".into()))
            }
            (Model::Galerkin, v) if v != FilterVariant::None => {
                return Err(Error::Config(format!("galerkin model cannot use filter variant {v}")))
            }
            _ => {}
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(Error::Validation("dt and t_end must be positive".into()));
        }
        if self.r == 0 {
            return Err(Error::Validation("rank must be at least 1".into()));
        }
        if let RomInitial::Explicit(a) = &self.initial {
            check_len(self.r, a.len())?;
        }
        FilterSpec::new(self.filter.variant, self.filter.delta)?;
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Coefficient history `a(t)`, one row per recorded step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Row-major `k × r`.
    pub coeffs: Vec<f64>,
    pub r: usize,
    pub model: Model,
    pub variant: FilterVariant,
    pub delta: f64,
    /// Set when the run diverged and the history was cut at the last finite step.
    pub blew_up: bool,
}

impl Trajectory {
    pub fn from_rows(times: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        check_len(times.len(), rows.len())?;
        let r = rows.first().map_or(0, Vec::len);
        let mut coeffs = Vec::with_capacity(r * rows.len());
        for row in rows {
            check_len(r, row.len())?;
            coeffs.extend_from_slice(row);
        }
        Ok(Trajectory {
            times,
            coeffs,
            r,
            model: Model::Galerkin,
            variant: FilterVariant::None,
            delta: 0.0,
            blew_up: false,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.coeffs[k * self.r..(k + 1) * self.r]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.coeffs.chunks_exact(self.r.max(1)).take(self.len())
    }

    pub fn last(&self) -> Option<&[f64]> {
        (!self.is_empty()).then(|| self.row(self.len() - 1))
    }

    /// Largest absolute coefficient difference over matching rows.
    pub fn max_abs_diff(&self, other: &Trajectory) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// `A a + aᵀ B a`.
pub fn rhs_galerkin(ops: &RomOperators, a: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    rhs_galerkin_into(ops, a, &mut out);
    out
}

pub fn rhs_galerkin_into(ops: &RomOperators, a: &[f64], out: &mut [f64]) {
    linear_into(ops, a, out);
    ops.b.contract_add(a, a, out);
}

fn linear_into(ops: &RomOperators, a: &[f64], out: &mut [f64]) {
    let r = ops.r();
    let m = ops.a.as_slice();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (j, &aj) in a.iter().enumerate() {
        let col = &m[j * r..(j + 1) * r];
        for (o, c) in out.iter_mut().zip(col) {
            *o += c * aj;
        }
    }
}

/// Leray right-hand side.
///
/// `fe_level` uses the offline filtered tensor, `rom_level` filters the
/// advecting coefficients on every call.
pub fn rhs_leray(
    ops: &RomOperators,
    filter_op: Option<&RomFilterOperator>,
    a: &[f64],
    variant: FilterVariant,
) -> Result<Vec<f64>> {
    check_len(ops.r(), a.len())?;
    let system = RomSystem::leray(ops, filter_op, variant)?;
    let mut out = vec![0.0; a.len()];
    let mut scratch = vec![0.0; a.len()];
    system.rhs_into(a, &mut out, &mut scratch);
    Ok(out)
}

/// A reduced right-hand side ready for time stepping.
#[derive(Debug, Clone, Copy)]
pub enum RomSystem<'a> {
    Galerkin(&'a RomOperators),
    LerayFe(&'a RomOperators),
    LerayRom(&'a RomOperators, &'a RomFilterOperator),
}

impl<'a> RomSystem<'a> {
    pub fn leray(
        ops: &'a RomOperators,
        filter_op: Option<&'a RomFilterOperator>,
        variant: FilterVariant,
    ) -> Result<Self> {
        match variant {
            FilterVariant::FeLevel => {
                if ops.b_leray.is_none() {
                    return Err(Error::Config("fe_level Leray model needs the filtered tensor".into()));
                }
                Ok(RomSystem::LerayFe(ops))
            }
            FilterVariant::RomLevel => {
                let f = filter_op
                    .ok_or_else(|| Error::Config("rom_level Leray model needs a ROM filter".into()))?;
                check_len(ops.r(), f.r())?;
                Ok(RomSystem::LerayRom(ops, f))
            }
            FilterVariant::None => Err(Error::Config("leray model requires a filter variant".into())),
        }
    }

    pub fn r(&self) -> usize {
        match self {
            RomSystem::Galerkin(o) | RomSystem::LerayFe(o) | RomSystem::LerayRom(o, _) => o.r(),
        }
    }

    #[inline]
    pub fn rhs_into(&self, a: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        match *self {
            RomSystem::Galerkin(ops) => rhs_galerkin_into(ops, a, out),
            RomSystem::LerayFe(ops) => {
                linear_into(ops, a, out);
                ops.b_leray
                    .as_ref()
                    .expect("checked at construction")
                    .contract_add(a, a, out);
            }
            RomSystem::LerayRom(ops, f) => {
                linear_into(ops, a, out);
                f.apply_into(a, scratch);
                ops.b.contract_add(scratch, a, out);
            }
        }
    }
}

/// RK4 from `a0` at `t0`, recording every step; stops early on divergence.
pub fn integrate_system(system: &RomSystem<'_>, a0: &[f64], t0: f64, dt: f64, steps: usize) -> (Vec<f64>, Vec<f64>, bool) {
    let r = system.r();
    let mut times = Vec::with_capacity(steps + 1);
    let mut coeffs = Vec::with_capacity((steps + 1) * r);
    let mut a = a0.to_vec();
    times.push(t0);
    coeffs.extend_from_slice(&a);
    let mut k1 = vec![0.0; r];
    let mut k2 = vec![0.0; r];
    let mut k3 = vec![0.0; r];
    let mut k4 = vec![0.0; r];
    let mut stage = vec![0.0; r];
    let mut scratch = vec![0.0; r];
    let mut blew_up = false;
    for step in 1..=steps {
        system.rhs_into(&a, &mut k1, &mut scratch);
        for i in 0..r {
            stage[i] = a[i] + 0.5 * dt * k1[i];
        }
        system.rhs_into(&stage, &mut k2, &mut scratch);
        for i in 0..r {
            stage[i] = a[i] + 0.5 * dt * k2[i];
        }
        system.rhs_into(&stage, &mut k3, &mut scratch);
        for i in 0..r {
            stage[i] = a[i] + dt * k3[i];
        }
        system.rhs_into(&stage, &mut k4, &mut scratch);
        for i in 0..r {
            a[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if a.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD) {
            blew_up = true;
            break;
        }
        times.push(t0 + step as f64 * dt);
        coeffs.extend_from_slice(&a);
    }
    (times, coeffs, blew_up)
}

/// Runs the configured model. Divergence yields a truncated trajectory with
/// `blew_up` set rather than an error.
pub fn integrate(ops: &RomOperators, config: &RomRunConfig, basis: &PodBasis, set: &SnapshotSet) -> Result<Trajectory> {
    config.validate()?;
    if ops.r() != config.r {
        return Err(Error::Config(format!(
            "operators have rank {} but the run requests r = {}",
            ops.r(),
            config.r
        )));
    }
    let (a0, t0) = match &config.initial {
        RomInitial::ProjectFirstSnapshot => (project(basis, config.r, set.snapshot(0), set.mass())?, set.times()[0]),
        RomInitial::Explicit(a) => (a.clone(), 0.0),
    };
    let rom_filter;
    let system = match config.model {
        Model::Galerkin => RomSystem::Galerkin(ops),
        Model::Leray => match config.filter.variant {
            FilterVariant::FeLevel => {
                if ops.leray_delta != Some(config.filter.delta) {
                    return Err(Error::Config(format!(
                        "fe_level run at delta = {} but operators carry a Leray tensor for {:?}",
                        config.filter.delta, ops.leray_delta
                    )));
                }
                RomSystem::leray(ops, None, FilterVariant::FeLevel)?
            }
            FilterVariant::RomLevel => {
                rom_filter = build_rom_filter(&ops.mass_r, &ops.stiff_r, config.filter.delta)?;
                RomSystem::leray(ops, Some(&rom_filter), FilterVariant::RomLevel)?
            }
            FilterVariant::None => unreachable!("rejected by validate"),
        },
    };
    let (times, coeffs, blew_up) = integrate_system(&system, &a0, t0, config.dt, config.steps());
    Ok(Trajectory {
        times,
        coeffs,
        r: config.r,
        model: config.model,
        variant: config.filter.variant,
        delta: config.filter.delta,
        blew_up,
    })
}

/// CSV with header `t,a1,...,ar`; values in shortest round-trip form.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let mut header = String::from("t");
    for i in 1..=traj.r {
        header.push_str(&format!(",a{i}"));
    }
    writeln!(w, "{header}").map_err(io)?;
    for (k, row) in traj.rows().enumerate() {
        let mut line = format!("{:?}", traj.times[k]);
        for v in row {
            line.push_str(&format!(",{v:?}"));
        }
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_trajectory_csv(path: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::format(path, "empty file"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"t") || cols.iter().skip(1).enumerate().any(|(i, c)| *c != format!("a{}", i + 1)) {
        return Err(Error::format(path, format!("unexpected header `{header}`")));
    }
    let r = cols.len() - 1;
    let mut times = Vec::new();
    let mut coeffs = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let vals = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::format(path, format!("line {}: bad number", lineno + 2)))?;
        if vals.len() != r + 1 {
            return Err(Error::format(path, format!("line {}: expected {} fields", lineno + 2, r + 1)));
        }
        times.push(vals[0]);
        coeffs.extend_from_slice(&vals[1..]);
    }
    Ok(Trajectory {
        times,
        coeffs,
        r,
        model: Model::Galerkin,
        variant: FilterVariant::None,
        delta: 0.0,
        blew_up: false,
    })
}
