//! Plot-ready diagnostics: L² norm history, phase portraits, POD projection
//! of the snapshot data and the eigenvalue spectrum, all exported as CSV.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{check_len, Error, Result};
use crate::filter::FilterVariant;
use crate::integrate::{Model, Trajectory};
use crate::pod::{project, PodBasis};
use crate::snapshot::SnapshotSet;

#[derive(Debug, Clone, PartialEq)]
pub struct NormSeries {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub mean: f64,
}

/// `‖u_r(t)‖_M = ‖a(t)‖₂` for an M-orthonormal basis.
pub fn l2_norm_series(traj: &Trajectory) -> NormSeries {
    let norms: Vec<f64> = traj
        .rows()
        .map(|a| a.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mean = if norms.is_empty() {
        0.0
    } else {
        norms.iter().sum::<f64>() / norms.len() as f64
    };
    NormSeries {
        times: traj.times.clone(),
        norms,
        mean,
    }
}

/// Pairs `(a_i, a_j)` with 1-based indices.
pub fn phase_portrait(traj: &Trajectory, i: usize, j: usize) -> Result<Vec<(f64, f64)>> {
    for idx in [i, j] {
        if idx == 0 || idx > traj.r {
            return Err(Error::Rank {
                requested: idx,
                available: traj.r,
            });
        }
    }
    Ok(traj.rows().map(|a| (a[i - 1], a[j - 1])).collect())
}

/// `a_k = Φ_rᵀ M x_k` at every snapshot time.
pub fn project_snapshots(basis: &PodBasis, r: usize, set: &SnapshotSet) -> Result<Trajectory> {
    basis.check_rank(r)?;
    check_len(basis.n(), set.n())?;
    let mut coeffs = Vec::with_capacity(set.s() * r);
    for k in 0..set.s() {
        coeffs.extend(project(basis, r, set.snapshot(k), set.mass())?);
    }
    Ok(Trajectory {
        times: set.times().to_vec(),
        coeffs,
        r,
        model: Model::Galerkin,
        variant: FilterVariant::None,
        delta: 0.0,
        blew_up: false,
    })
}

fn write_lines(path: &Path, header: &str, rows: impl Iterator<Item = String>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
    for row in rows {
        writeln!(w, "{row}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_l2norm_csv(series: &NormSeries, path: &Path) -> Result<()> {
    write_lines(
        path,
        "t,norm",
        series.times.iter().zip(&series.norms).map(|(t, v)| format!("{t:?},{v:?}")),
    )
}

pub fn write_phase_csv(points: &[(f64, f64)], path: &Path) -> Result<()> {
    write_lines(path, "ai,aj", points.iter().map(|(x, y)| format!("{x:?},{y:?}")))
}

pub fn write_spectrum_csv(eigenvalues: &[f64], path: &Path) -> Result<()> {
    write_lines(
        path,
        "j,lambda",
        eigenvalues.iter().enumerate().map(|(j, l)| format!("{},{l:?}", j + 1)),
    )
}
