//! Differential (Helmholtz) filter in its two discrete forms.
//!
//! * FE level: `(M + δ² S) y = M u` on full-order vectors. Applied once per
//!   basis vector offline; the filtered modes are generally not in the span of
//!   the POD basis.
//! * ROM level: `(M_r + δ² S_r) F(a) = M_r a` on coefficient vectors. The
//!   matrix is factorized once, each application is two triangular solves.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};

use crate::error::{check_len, Error, Result};
use crate::exec::Execution;
use crate::pod::PodBasis;
use crate::sparse::{SkylineCholesky, SymSparse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FilterVariant {
    None,
    FeLevel,
    RomLevel,
}

impl fmt::Display for FilterVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterVariant::None => "none",
            FilterVariant::FeLevel => "fe_level",
            FilterVariant::RomLevel => "rom_level",
        })
    }
}

impl FromStr for FilterVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "none" => Ok(FilterVariant::None),
            "fe_level" | "fe" => Ok(FilterVariant::FeLevel),
            "rom_level" | "rom" => Ok(FilterVariant::RomLevel),
            other => Err(format!("unknown filter variant `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub variant: FilterVariant,
    pub delta: f64,
}

impl FilterSpec {
    pub fn new(variant: FilterVariant, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::Validation(format!("filter radius must be finite and >= 0, got {delta}")));
        }
        Ok(FilterSpec { variant, delta })
    }

    pub fn none() -> Self {
        FilterSpec {
            variant: FilterVariant::None,
            delta: 0.0,
        }
    }
}

/// Factorized FE-level filter for one radius.
#[derive(Debug, Clone)]
pub struct FeFilter {
    delta: f64,
    mass: SymSparse,
    factor: Option<SkylineCholesky>,
}

impl FeFilter {
    pub fn new(mass: &SymSparse, stiffness: &SymSparse, delta: f64) -> Result<Self> {
        check_len(mass.n(), stiffness.n())?;
        FilterSpec::new(FilterVariant::FeLevel, delta)?;
        let factor = if delta == 0.0 {
            None
        } else {
            Some(SkylineCholesky::factor(&mass.add_scaled(stiffness, delta * delta)?)?)
        };
        Ok(FeFilter {
            delta,
            mass: mass.clone(),
            factor,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.mass.n(), u.len())?;
        match &self.factor {
            None => Ok(u.to_vec()),
            Some(f) => {
                let mut y = self.mass.mul(u);
                f.solve_in_place(&mut y);
                Ok(y)
            }
        }
    }
}

/// FE filters keyed by radius, factorized on first use.
#[derive(Debug)]
pub struct FeFilterCache {
    mass: SymSparse,
    stiffness: SymSparse,
    filters: Mutex<HashMap<u64, Arc<FeFilter>>>,
}

impl FeFilterCache {
    pub fn new(mass: &SymSparse, stiffness: &SymSparse) -> Self {
        FeFilterCache {
            mass: mass.clone(),
            stiffness: stiffness.clone(),
            filters: Mutex::new(HashMap::new()),
        }
    }

    pub fn get(&self, delta: f64) -> Result<Arc<FeFilter>> {
        let key = delta.to_bits();
        if let Some(f) = self.filters.lock().expect("filter cache poisoned").get(&key) {
            return Ok(Arc::clone(f));
        }
        let built = Arc::new(FeFilter::new(&self.mass, &self.stiffness, delta)?);
        let mut map = self.filters.lock().expect("filter cache poisoned");
        Ok(Arc::clone(map.entry(key).or_insert(built)))
    }

    pub fn len(&self) -> usize {
        self.filters.lock().expect("filter cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Solves `(M + δ² S) y = M u`; `δ = 0` returns `u` exactly.
pub fn filter_fe(u: &[f64], mass: &SymSparse, stiffness: &SymSparse, delta: f64) -> Result<Vec<f64>> {
    FeFilter::new(mass, stiffness, delta)?.apply(u)
}

/// Filters the leading `r` modes with one shared factorization.
pub fn filter_basis(
    basis: &PodBasis,
    r: usize,
    mass: &SymSparse,
    stiffness: &SymSparse,
    delta: f64,
    exec: Execution,
) -> Result<DMatrix<f64>> {
    basis.check_rank(r)?;
    let filter = FeFilter::new(mass, stiffness, delta)?;
    filter_modes(&filter, basis, r, exec)
}

pub fn filter_modes(filter: &FeFilter, basis: &PodBasis, r: usize, exec: Execution) -> Result<DMatrix<f64>> {
    basis.check_rank(r)?;
    let cols = exec.map(r, |j| filter.apply(basis.mode(j)));
    let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_vec(basis.n(), r, cols.concat()))
}

/// ROM-level filter `D = (M_r + δ² S_r)⁻¹ M_r`, stored densely (row-major).
///
/// `D` is formed once from a Cholesky solve, so each application is a single
/// `r × r` matrix-vector product.
#[derive(Debug, Clone)]
pub struct RomFilterOperator {
    delta: f64,
    r: usize,
    /// Empty when `δ = 0` (identity).
    dense: Vec<f64>,
}

impl RomFilterOperator {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn r(&self) -> usize {
        self.r
    }

    /// `out = D a` without allocating.
    pub fn apply_into(&self, a: &[f64], out: &mut [f64]) {
        let r = self.r;
        debug_assert_eq!(a.len(), r);
        debug_assert_eq!(out.len(), r);
        if self.dense.is_empty() {
            out.copy_from_slice(a);
            return;
        }
        for (o, row) in out.iter_mut().zip(self.dense.chunks_exact(r)) {
            *o = row.iter().zip(a).map(|(x, y)| x * y).sum();
        }
    }
}

pub fn build_rom_filter(mass_r: &DMatrix<f64>, stiff_r: &DMatrix<f64>, delta: f64) -> Result<RomFilterOperator> {
    FilterSpec::new(FilterVariant::RomLevel, delta)?;
    let r = mass_r.nrows();
    if !mass_r.is_square() || stiff_r.shape() != (r, r) {
        return Err(Error::Validation(format!(
            "reduced operators must both be {r} x {r} (got {:?} and {:?})",
            mass_r.shape(),
            stiff_r.shape()
        )));
    }
    let scale = mass_r.amax().max(stiff_r.amax()).max(f64::MIN_POSITIVE);
    for (name, m) in [("M_r", mass_r), ("S_r", stiff_r)] {
        if (m - m.transpose()).amax() > 1e-10 * scale {
            return Err(Error::Validation(format!("{name} is not symmetric")));
        }
    }
    if Cholesky::new(mass_r.clone()).is_none() {
        return Err(Error::Validation("M_r is not positive definite".into()));
    }
    if r > 0 {
        let min_eig = SymmetricEigen::new(stiff_r.clone()).eigenvalues.min();
        if min_eig < -1e-10 * scale {
            return Err(Error::Validation(format!(
                "S_r is not positive semidefinite (eigenvalue {min_eig:e})"
            )));
        }
    }
    let dense = if delta == 0.0 {
        Vec::new()
    } else {
        let system = mass_r + stiff_r * (delta * delta);
        let chol = Cholesky::new(system).ok_or_else(|| {
            Error::Factorization("M_r + delta^2 S_r is not positive definite".into())
        })?;
        chol.solve(mass_r).transpose().as_slice().to_vec()
    };
    Ok(RomFilterOperator { delta, r, dense })
}

pub fn apply_rom_filter(op: &RomFilterOperator, a: &[f64]) -> Result<Vec<f64>> {
    check_len(op.r(), a.len())?;
    let mut out = vec![0.0; a.len()];
    op.apply_into(a, &mut out);
    Ok(out)
}
