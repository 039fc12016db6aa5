//! Proper orthogonal decomposition by the method of snapshots.
//!
//! The correlation matrix `C_kl = (1/s) x_kᵀ M x_l` is diagonalized; each
//! eigenpair `(λ, v)` maps to the spatial mode `φ = X v / sqrt(s λ)`. Modes are
//! then re-orthonormalized in the `M` inner product (two modified Gram-Schmidt
//! passes), which keeps `|φ_iᵀ M φ_j - δ_ij|` at rounding level even for modes
//! whose eigenvalue sits many decades below `λ_1`.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_len, Error, Result};
use crate::exec::Execution;
use crate::snapshot::{bundle_file, lookup, parse_key_values, SnapshotSet};
use crate::sparse::SymSparse;

pub const DEFAULT_DROP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    modes: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    total_energy: f64,
    source_dims: (usize, usize),
}

impl PodBasis {
    pub fn n(&self) -> usize {
        self.modes.nrows()
    }

    /// Retained rank.
    pub fn d(&self) -> usize {
        self.modes.ncols()
    }

    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    pub fn mode(&self, j: usize) -> &[f64] {
        let n = self.n();
        &self.modes.as_slice()[j * n..(j + 1) * n]
    }

    /// Leading `r` modes as an owned `n × r` matrix.
    pub fn leading(&self, r: usize) -> Result<DMatrix<f64>> {
        self.check_rank(r)?;
        Ok(self.modes.columns(0, r).into_owned())
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Trace of the correlation matrix: the mean snapshot energy `(1/s) Σ ‖x_k‖²_M`.
    pub fn total_energy(&self) -> f64 {
        self.total_energy
    }

    /// `Σ_{j>r} λ_j` over the full spectrum, including discarded modes.
    pub fn tail_energy(&self, r: usize) -> Result<f64> {
        self.check_rank(r)?;
        let captured: f64 = self.eigenvalues[..r].iter().sum();
        Ok((self.total_energy - captured).max(0.0))
    }

    pub fn source_dims(&self) -> (usize, usize) {
        self.source_dims
    }

    pub fn check_rank(&self, r: usize) -> Result<()> {
        if r > self.d() {
            Err(Error::Rank {
                requested: r,
                available: self.d(),
            })
        } else {
            Ok(())
        }
    }
}

pub fn compute_pod(set: &SnapshotSet, d_max: usize, drop_tol: f64) -> Result<PodBasis> {
    compute_pod_with(set, d_max, drop_tol, Execution::default())
}

pub fn compute_pod_with(
    set: &SnapshotSet,
    d_max: usize,
    drop_tol: f64,
    exec: Execution,
) -> Result<PodBasis> {
    let (n, s) = (set.n(), set.s());
    if d_max == 0 || d_max > n.min(s) {
        return Err(Error::Validation(format!(
            "d_max = {d_max} must lie in 1..={}",
            n.min(s)
        )));
    }
    let mass = set.mass();
    let mx_cols = exec.map(s, |k| mass.mul(set.snapshot(k)));
    let mx = DMatrix::from_vec(n, s, mx_cols.concat());
    let mut corr = set.states().transpose() * &mx / s as f64;
    // Symmetrize away rounding asymmetry before the symmetric eigensolver.
    for i in 0..s {
        for j in 0..i {
            let v = 0.5 * (corr[(i, j)] + corr[(j, i)]);
            corr[(i, j)] = v;
            corr[(j, i)] = v;
        }
    }
    let total_energy = corr.trace();

    let eig = SymmetricEigen::new(corr);
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lambda_1 = eig.eigenvalues[order[0]];
    if !(lambda_1 > 0.0) {
        return Err(Error::Degenerate(
            "snapshot correlation matrix has no positive eigenvalue".into(),
        ));
    }

    let kept: Vec<usize> = order
        .iter()
        .copied()
        .take_while(|&k| eig.eigenvalues[k] > 0.0 && eig.eigenvalues[k] >= drop_tol * lambda_1)
        .take(d_max)
        .collect();
    let d = kept.len();
    let eigenvalues: Vec<f64> = kept.iter().map(|&k| eig.eigenvalues[k]).collect();

    let mut modes = DMatrix::zeros(n, d);
    for (j, &k) in kept.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let phi = set.states() * v / (s as f64 * eig.eigenvalues[k]).sqrt();
        modes.set_column(j, &phi);
    }
    m_orthonormalize(&mut modes, mass)?;
    for j in 0..d {
        let mut col = modes.column_mut(j);
        let (imax, _) = col
            .iter()
            .enumerate()
            .fold((0, 0.0_f64), |best, (i, v)| if v.abs() > best.1 { (i, v.abs()) } else { best });
        if col[imax] < 0.0 {
            col.neg_mut();
        }
    }

    Ok(PodBasis {
        modes,
        eigenvalues,
        total_energy,
        source_dims: (n, s),
    })
}

fn m_orthonormalize(modes: &mut DMatrix<f64>, mass: &SymSparse) -> Result<()> {
    let (n, d) = modes.shape();
    let data = modes.as_mut_slice();
    let mut mq = vec![0.0; n];
    for _pass in 0..2 {
        for j in 0..d {
            for i in 0..j {
                let (head, tail) = data.split_at_mut(j * n);
                let qi = &head[i * n..(i + 1) * n];
                let qj = &mut tail[..n];
                mass.mul_into(qi, &mut mq);
                let coeff: f64 = mq.iter().zip(qj.iter()).map(|(a, b)| a * b).sum();
                for (x, q) in qj.iter_mut().zip(qi) {
                    *x -= coeff * q;
                }
            }
            let qj = &mut data[j * n..(j + 1) * n];
            let norm = mass.bilinear(qj, qj)?.sqrt();
            if !(norm > 0.0) {
                return Err(Error::Degenerate(format!("mode {j} collapsed during orthonormalization")));
            }
            qj.iter_mut().for_each(|x| *x /= norm);
        }
    }
    Ok(())
}

/// `a_j = φ_jᵀ M u`, `j < r`.
pub fn project(basis: &PodBasis, r: usize, u: &[f64], mass: &SymSparse) -> Result<Vec<f64>> {
    basis.check_rank(r)?;
    check_len(basis.n(), u.len())?;
    check_len(basis.n(), mass.n())?;
    let mu = mass.mul(u);
    Ok((0..r)
        .map(|j| basis.mode(j).iter().zip(&mu).map(|(p, m)| p * m).sum())
        .collect())
}

/// `Σ_j a_j φ_j` for `a` of length `r <= d`.
pub fn reconstruct(basis: &PodBasis, a: &[f64]) -> Result<Vec<f64>> {
    basis.check_rank(a.len())?;
    let mut u = vec![0.0; basis.n()];
    for (j, &aj) in a.iter().enumerate() {
        for (ui, p) in u.iter_mut().zip(basis.mode(j)) {
            *ui += aj * p;
        }
    }
    Ok(u)
}

/// Writes `<stem>.pod.bin` (u64 `n`, u64 `d`, modes column-major, then
/// eigenvalues; all little-endian) and `<stem>.pod.meta`.
///
/// `delta` tags a filtered basis; `eigenvalues` is written verbatim.
pub fn write_modes(
    stem: &Path,
    modes: &DMatrix<f64>,
    eigenvalues: &[f64],
    extra_meta: &[(&str, String)],
) -> Result<()> {
    let (n, d) = modes.shape();
    check_len(d, eigenvalues.len())?;
    let bin = bundle_file(stem, ".pod.bin");
    let mut bytes = Vec::with_capacity(16 + 8 * (n * d + d));
    bytes.extend_from_slice(&(n as u64).to_le_bytes());
    bytes.extend_from_slice(&(d as u64).to_le_bytes());
    for v in modes.as_slice().iter().chain(eigenvalues) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let meta = bundle_file(stem, ".pod.meta");
    let mut text = format!("n={n}\nd={d}\n");
    for (k, v) in extra_meta {
        text.push_str(&format!("{k}={v}\n"));
    }
    fs::write(&meta, text).map_err(|e| Error::io(&meta, e))
}

pub fn write_pod_basis(basis: &PodBasis, stem: &Path) -> Result<()> {
    write_modes(
        stem,
        &basis.modes,
        &basis.eigenvalues,
        &[
            ("s", basis.source_dims.1.to_string()),
            ("total_energy", format!("{:?}", basis.total_energy)),
        ],
    )
}

fn read_modes(stem: &Path) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let bin = bundle_file(stem, ".pod.bin");
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    if bytes.len() < 16 {
        return Err(Error::format(&bin, "truncated header"));
    }
    let n = u64::from_le_bytes(bytes[0..8].try_into().expect("8 bytes")) as usize;
    let d = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let expected = 16 + 8 * (n * d + d);
    if bytes.len() != expected {
        return Err(Error::format(
            &bin,
            format!("expected {expected} bytes for n = {n}, d = {d}, found {}", bytes.len()),
        ));
    }
    let vals: Vec<f64> = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let modes = DMatrix::from_column_slice(n, d, &vals[..n * d]);
    Ok((modes, vals[n * d..].to_vec()))
}

pub fn read_pod_basis(stem: &Path) -> Result<PodBasis> {
    let (modes, eigenvalues) = read_modes(stem)?;
    let meta_path = bundle_file(stem, ".pod.meta");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let kv = parse_key_values(&meta_path, &text)?;
    let s: usize = lookup(&meta_path, &kv, "s")?;
    let total_energy: f64 = lookup(&meta_path, &kv, "total_energy")?;
    if eigenvalues.windows(2).any(|w| w[1] > w[0]) || eigenvalues.iter().any(|&l| l < 0.0) {
        return Err(Error::Validation("eigenvalues must be nonnegative and nonincreasing".into()));
    }
    Ok(PodBasis {
        source_dims: (modes.nrows(), s),
        modes,
        eigenvalues,
        total_energy,
    })
}

/// Filtered modes read back with their radius tag.
pub fn read_filtered_modes(stem: &Path) -> Result<(DMatrix<f64>, f64)> {
    let (modes, _) = read_modes(stem)?;
    let meta_path = bundle_file(stem, ".pod.meta");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let kv = parse_key_values(&meta_path, &text)?;
    Ok((modes, lookup(&meta_path, &kv, "delta")?))
}
