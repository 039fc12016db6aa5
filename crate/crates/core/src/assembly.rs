//! Reduced operators of the Galerkin ROM and its Leray-regularized variant.
//!
//! The reduced system is
//!
//! ```text
//! da_i/dt = Σ_j A_ij a_j + Σ_{j,k} a_j B_jik a_k,   B_jik = -b(φ_j, φ_k, φ_i)
//! ```
//!
//! where `b` is the skew convection form and the first slot of `b` carries the
//! advecting field. The FE-level Leray tensor replaces `φ_j` in that slot by
//! the filtered mode `ψ_j`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::convection::Convection;
use crate::error::{check_len, Error, Result};
use crate::exec::Execution;
use crate::filter::{filter_modes, FeFilter};
use crate::pod::PodBasis;
use crate::snapshot::{bundle_file, SnapshotSet};
use crate::sparse::SymSparse;

/// Dense `r × r × r` tensor addressed as `(j, i, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    r: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(r: usize) -> Self {
        Tensor3 {
            r,
            data: vec![0.0; r * r * r],
        }
    }

    pub fn from_fn(r: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(r);
        for j in 0..r {
            for i in 0..r {
                for k in 0..r {
                    t.data[(j * r + i) * r + k] = f(j, i, k);
                }
            }
        }
        t
    }

    pub fn r(&self) -> usize {
        self.r
    }

    #[inline]
    pub fn get(&self, j: usize, i: usize, k: usize) -> f64 {
        self.data[(j * self.r + i) * self.r + k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// `out_i += Σ_j adv_j Σ_k T_jik a_k`.
    #[inline]
    pub fn contract_add(&self, adv: &[f64], a: &[f64], out: &mut [f64]) {
        let r = self.r;
        for (j, &uj) in adv.iter().enumerate() {
            let slab = &self.data[j * r * r..(j + 1) * r * r];
            for (o, row) in out.iter_mut().zip(slab.chunks_exact(r)) {
                let dot: f64 = row.iter().zip(a).map(|(t, x)| t * x).sum();
                *o += uj * dot;
            }
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor3) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RomOperators {
    pub a: DMatrix<f64>,
    pub mass_r: DMatrix<f64>,
    pub stiff_r: DMatrix<f64>,
    pub b: Tensor3,
    pub b_leray: Option<Tensor3>,
    /// Radius the Leray tensor was built with.
    pub leray_delta: Option<f64>,
}

impl RomOperators {
    pub fn r(&self) -> usize {
        self.a.nrows()
    }

    /// Unfiltered copy truncated to the leading `r` modes.
    pub fn truncated(&self, r: usize) -> Result<RomOperators> {
        if r > self.r() {
            return Err(Error::Rank {
                requested: r,
                available: self.r(),
            });
        }
        let t = |m: &DMatrix<f64>| m.view((0, 0), (r, r)).into_owned();
        Ok(RomOperators {
            a: t(&self.a),
            mass_r: t(&self.mass_r),
            stiff_r: t(&self.stiff_r),
            b: Tensor3::from_fn(r, |j, i, k| self.b.get(j, i, k)),
            b_leray: None,
            leray_delta: None,
        })
    }
}

fn gram(left: &DMatrix<f64>, op: &SymSparse, right: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, r) = right.shape();
    let mut applied = DMatrix::zeros(n, r);
    for j in 0..r {
        let col = op.mul(right.column(j).as_slice());
        applied.set_column(j, &nalgebra::DVector::from_vec(col));
    }
    let g = left.transpose() * applied;
    (&g + g.transpose()) * 0.5
}

/// `T_jik = -b(adv_j, φ_k, φ_i)`.
pub fn convection_tensor(
    conv: &Convection,
    advecting: &DMatrix<f64>,
    modes: &DMatrix<f64>,
    exec: Execution,
) -> Result<Tensor3> {
    let (n, r) = modes.shape();
    check_len(n, conv.n())?;
    check_len(n, advecting.nrows())?;
    check_len(r, advecting.ncols())?;
    let slabs = exec.map(r, |j| {
        let adv = advecting.column(j);
        let mut slab = vec![0.0; r * r];
        let mut tested = vec![0.0; n];
        for k in 0..r {
            conv.tested_into(adv.as_slice(), modes.column(k).as_slice(), &mut tested);
            for i in 0..r {
                let phi_i = modes.column(i);
                let val: f64 = phi_i.iter().zip(&tested).map(|(p, t)| p * t).sum();
                slab[i * r + k] = -val;
            }
        }
        slab
    });
    Ok(Tensor3 {
        r,
        data: slabs.concat(),
    })
}

pub fn assemble_galerkin(basis: &PodBasis, r: usize, set: &SnapshotSet) -> Result<RomOperators> {
    assemble_galerkin_with(basis, r, set, Execution::default())
}

pub fn assemble_galerkin_with(
    basis: &PodBasis,
    r: usize,
    set: &SnapshotSet,
    exec: Execution,
) -> Result<RomOperators> {
    check_len(set.n(), basis.n())?;
    let phi = basis.leading(r)?;
    let mass_r = gram(&phi, set.mass(), &phi);
    let stiff_r = gram(&phi, set.stiffness(), &phi);
    let a = &stiff_r * (-set.nu());
    let conv = Convection::new(set.n(), set.meta().bc);
    let b = convection_tensor(&conv, &phi, &phi, exec)?;
    Ok(RomOperators {
        a,
        mass_r,
        stiff_r,
        b,
        b_leray: None,
        leray_delta: None,
    })
}

pub fn assemble_leray_fe(
    ops: &RomOperators,
    basis: &PodBasis,
    set: &SnapshotSet,
    delta: f64,
) -> Result<RomOperators> {
    let filter = FeFilter::new(set.mass(), set.stiffness(), delta)?;
    assemble_leray_fe_with(ops, basis, set, &filter, Execution::default())
}

pub fn assemble_leray_fe_with(
    ops: &RomOperators,
    basis: &PodBasis,
    set: &SnapshotSet,
    filter: &FeFilter,
    exec: Execution,
) -> Result<RomOperators> {
    let r = ops.r();
    let phi = basis.leading(r)?;
    let psi = filter_modes(filter, basis, r, exec)?;
    let conv = Convection::new(set.n(), set.meta().bc);
    let b_leray = convection_tensor(&conv, &psi, &phi, exec)?;
    Ok(RomOperators {
        b_leray: Some(b_leray),
        leray_delta: Some(filter.delta()),
        ..ops.clone()
    })
}

/// Writes `<stem>.rom.bin`: u64 `r`, u64 Leray flag, f64 Leray radius (NaN if
/// absent), then `A`, `M_r`, `S_r` column-major, `B`, and `B_leray` if
/// present; all little-endian.
pub fn write_rom_operators(ops: &RomOperators, stem: &Path) -> Result<()> {
    let path = bundle_file(stem, ".rom.bin");
    let r = ops.r();
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&(r as u64).to_le_bytes());
    bytes.extend_from_slice(&(ops.b_leray.is_some() as u64).to_le_bytes());
    bytes.extend_from_slice(&ops.leray_delta.unwrap_or(f64::NAN).to_le_bytes());
    let mut push = |vals: &[f64]| {
        for v in vals {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    };
    push(ops.a.as_slice());
    push(ops.mass_r.as_slice());
    push(ops.stiff_r.as_slice());
    push(ops.b.as_slice());
    if let Some(bl) = &ops.b_leray {
        push(bl.as_slice());
    }
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

pub fn read_rom_operators(stem: &Path) -> Result<RomOperators> {
    let path = bundle_file(stem, ".rom.bin");
    let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if bytes.len() < 24 {
        return Err(Error::format(&path, "truncated header"));
    }
    let word = |i: usize| u64::from_le_bytes(bytes[8 * i..8 * i + 8].try_into().expect("8 bytes"));
    let r = word(0) as usize;
    let has_leray = match word(1) {
        0 => false,
        1 => true,
        other => return Err(Error::format(&path, format!("bad Leray flag {other}"))),
    };
    let delta = f64::from_bits(word(2));
    let tensors = if has_leray { 2 } else { 1 };
    let expected = 24 + 8 * (3 * r * r + tensors * r * r * r);
    if bytes.len() != expected {
        return Err(Error::format(
            &path,
            format!("expected {expected} bytes for r = {r}, found {}", bytes.len()),
        ));
    }
    let vals: Vec<f64> = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let (mats, rest) = vals.split_at(3 * r * r);
    let mat = |k: usize| DMatrix::from_column_slice(r, r, &mats[k * r * r..(k + 1) * r * r]);
    let (b, bl) = rest.split_at(r * r * r);
    Ok(RomOperators {
        a: mat(0),
        mass_r: mat(1),
        stiff_r: mat(2),
        b: Tensor3 { r, data: b.to_vec() },
        b_leray: has_leray.then(|| Tensor3 { r, data: bl.to_vec() }),
        leray_delta: has_leray.then_some(delta),
    })
}
