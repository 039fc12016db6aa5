//! Snapshot bundles: the on-disk form of a snapshot matrix together with the
//! discrete mass and stiffness operators that define its inner products.
//!
//! A bundle with stem `dir/name` consists of
//!
//! * `name.meta`: UTF-8 `key=value` lines (`n`, `s`, `nu`, `domain_length`, `bc`)
//! * `name.states.bin`: `n * s` little-endian `f64`, column-major, one column per snapshot
//! * `name.times.txt`: `s` lines, one time stamp each
//! * `name.mass.coo`, `name.stiffness.coo`: lines `i j value`, 0-based, `i <= j`

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::SymSparse;

/// Random probes used by the positive (semi)definiteness spot check.
const DEFINITENESS_PROBES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    Periodic,
    Dirichlet,
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryCondition::Periodic => "periodic",
            BoundaryCondition::Dirichlet => "dirichlet",
        })
    }
}

impl FromStr for BoundaryCondition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "periodic" => Ok(BoundaryCondition::Periodic),
            "dirichlet" => Ok(BoundaryCondition::Dirichlet),
            other => Err(format!("unknown boundary condition `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainMeta {
    pub n: usize,
    pub domain_length: f64,
    pub nu: f64,
    pub bc: BoundaryCondition,
}

impl DomainMeta {
    pub fn grid_spacing(&self) -> f64 {
        match self.bc {
            BoundaryCondition::Periodic => self.domain_length / self.n as f64,
            BoundaryCondition::Dirichlet => self.domain_length / (self.n.max(2) - 1) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Mass,
    Stiffness,
}

impl OperatorKind {
    fn suffix(self) -> &'static str {
        match self {
            OperatorKind::Mass => ".mass.coo",
            OperatorKind::Stiffness => ".stiffness.coo",
        }
    }
}

/// Symmetric coordinate file: upper-triangle triplets of one operator.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorFile {
    pub kind: OperatorKind,
    pub n: usize,
    pub triplets: Vec<(usize, usize, f64)>,
}

impl OperatorFile {
    pub fn from_operator(kind: OperatorKind, op: &SymSparse) -> Self {
        OperatorFile {
            kind,
            n: op.n(),
            triplets: op.upper_triplets(),
        }
    }

    pub fn read(path: &Path, kind: OperatorKind, n: usize) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut triplets = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let bad = || Error::format(path, format!("line {}: expected `i j value`", lineno + 1));
            let i: usize = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            let j: usize = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            let v: f64 = parts.next().and_then(|t| t.parse().ok()).ok_or_else(bad)?;
            if parts.next().is_some() {
                return Err(bad());
            }
            triplets.push((i, j, v));
        }
        Ok(OperatorFile { kind, n, triplets })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for &(i, j, v) in &self.triplets {
            writeln!(w, "{i} {j} {v:?}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn to_operator(&self) -> Result<SymSparse> {
        SymSparse::from_upper_triplets(self.n, &self.triplets)
    }
}

/// Full-order snapshot matrix with the operators defining its geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSet {
    states: DMatrix<f64>,
    times: Vec<f64>,
    mass: SymSparse,
    stiffness: SymSparse,
    meta: DomainMeta,
}

impl SnapshotSet {
    /// Validates every invariant eagerly.
    pub fn new(
        states: DMatrix<f64>,
        times: Vec<f64>,
        mass: SymSparse,
        stiffness: SymSparse,
        meta: DomainMeta,
    ) -> Result<Self> {
        let (n, s) = states.shape();
        if meta.n != n {
            return Err(Error::Consistency(format!(
                "metadata declares n = {} but states have {n} rows",
                meta.n
            )));
        }
        if mass.n() != n || stiffness.n() != n {
            return Err(Error::Consistency(format!(
                "operator dimensions (mass {}, stiffness {}) do not match n = {n}",
                mass.n(),
                stiffness.n()
            )));
        }
        if s < 2 {
            return Err(Error::Validation(format!("need at least 2 snapshots, got {s}")));
        }
        if times.len() != s {
            return Err(Error::Consistency(format!(
                "{} time stamps for {s} snapshots",
                times.len()
            )));
        }
        if let Some(k) = times.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::Validation(format!(
                "times not strictly increasing at index {}",
                k + 1
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || states.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite snapshot data".into()));
        }
        if !(meta.nu >= 0.0) || !(meta.domain_length > 0.0) {
            return Err(Error::Validation(
                "viscosity must be nonnegative and domain length positive".into(),
            ));
        }
        check_definiteness(&mass, &stiffness)?;
        Ok(SnapshotSet {
            states,
            times,
            mass,
            stiffness,
            meta,
        })
    }

    pub fn n(&self) -> usize {
        self.states.nrows()
    }

    pub fn s(&self) -> usize {
        self.states.ncols()
    }

    pub fn states(&self) -> &DMatrix<f64> {
        &self.states
    }

    /// Snapshot `k` as a contiguous slice.
    pub fn snapshot(&self, k: usize) -> &[f64] {
        let n = self.n();
        &self.states.as_slice()[k * n..(k + 1) * n]
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn mass(&self) -> &SymSparse {
        &self.mass
    }

    pub fn stiffness(&self) -> &SymSparse {
        &self.stiffness
    }

    pub fn meta(&self) -> &DomainMeta {
        &self.meta
    }

    pub fn nu(&self) -> f64 {
        self.meta.nu
    }
}

fn check_definiteness(mass: &SymSparse, stiffness: &SymSparse) -> Result<()> {
    let n = mass.n();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0005_eed0_f5bd);
    let scale: f64 = stiffness
        .upper_triplets()
        .iter()
        .map(|t| t.2.abs())
        .sum::<f64>()
        .max(f64::MIN_POSITIVE);
    for _ in 0..DEFINITENESS_PROBES {
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xx: f64 = x.iter().map(|v| v * v).sum();
        if xx == 0.0 {
            continue;
        }
        if !(mass.bilinear(&x, &x)? > 0.0) {
            return Err(Error::Validation(
                "mass operator failed the positive-definiteness check".into(),
            ));
        }
        if stiffness.bilinear(&x, &x)? < -1e-13 * scale * xx {
            return Err(Error::Validation(
                "stiffness operator failed the positive-semidefiniteness check".into(),
            ));
        }
    }
    Ok(())
}

/// `xᵀ M y`.
pub fn weighted_inner_product(x: &[f64], y: &[f64], m: &SymSparse) -> Result<f64> {
    m.bilinear(x, y)
}

/// `‖x‖_M`.
pub fn weighted_norm(x: &[f64], m: &SymSparse) -> Result<f64> {
    Ok(m.bilinear(x, x)?.max(0.0).sqrt())
}

/// Appends `suffix` to the bundle stem.
pub fn bundle_file(stem: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub(crate) fn parse_key_values(path: &Path, text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::format(path, format!("line {}: expected `key=value`", lineno + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub(crate) fn lookup<T: FromStr>(path: &Path, kv: &[(String, String)], key: &str) -> Result<T> {
    let raw = kv
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| Error::format(path, format!("missing key `{key}`")))?;
    raw.parse()
        .map_err(|_| Error::format(path, format!("cannot parse `{key}` = `{raw}`")))
}

pub fn read_snapshot_set(stem: &Path) -> Result<SnapshotSet> {
    let meta_path = bundle_file(stem, ".meta");
    let text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let kv = parse_key_values(&meta_path, &text)?;
    let n: usize = lookup(&meta_path, &kv, "n")?;
    let s: usize = lookup(&meta_path, &kv, "s")?;
    let nu: f64 = lookup(&meta_path, &kv, "nu")?;
    let domain_length: f64 = lookup(&meta_path, &kv, "domain_length")?;
    let bc: BoundaryCondition = lookup(&meta_path, &kv, "bc")?;
    let meta = DomainMeta {
        n,
        domain_length,
        nu,
        bc,
    };

    let states_path = bundle_file(stem, ".states.bin");
    let bytes = fs::read(&states_path).map_err(|e| Error::io(&states_path, e))?;
    if bytes.len() != n * s * 8 {
        return Err(Error::format(
            &states_path,
            format!("expected {} bytes for {n} x {s} values, found {}", n * s * 8, bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let states = DMatrix::from_vec(n, s, values);

    let times_path = bundle_file(stem, ".times.txt");
    let text = fs::read_to_string(&times_path).map_err(|e| Error::io(&times_path, e))?;
    let times = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.parse::<f64>()
                .map_err(|_| Error::format(&times_path, format!("line {}: bad time `{l}`", i + 1)))
        })
        .collect::<Result<Vec<f64>>>()?;
    if times.len() != s {
        return Err(Error::format(
            &times_path,
            format!("expected {s} time stamps, found {}", times.len()),
        ));
    }

    let mut ops = Vec::with_capacity(2);
    for kind in [OperatorKind::Mass, OperatorKind::Stiffness] {
        let p = bundle_file(stem, kind.suffix());
        ops.push(OperatorFile::read(&p, kind, n)?.to_operator()?);
    }
    let stiffness = ops.pop().expect("two operators");
    let mass = ops.pop().expect("two operators");
    SnapshotSet::new(states, times, mass, stiffness, meta)
}

pub fn write_snapshot_set(set: &SnapshotSet, stem: &Path) -> Result<()> {
    if let Some(parent) = stem.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let meta_path = bundle_file(stem, ".meta");
    let m = set.meta();
    let meta_text = format!(
        "n={}\ns={}\nnu={:?}\ndomain_length={:?}\nbc={}\n",
        set.n(),
        set.s(),
        m.nu,
        m.domain_length,
        m.bc
    );
    fs::write(&meta_path, meta_text).map_err(|e| Error::io(&meta_path, e))?;

    let states_path = bundle_file(stem, ".states.bin");
    let mut bytes = Vec::with_capacity(set.n() * set.s() * 8);
    for v in set.states().as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(&states_path, bytes).map_err(|e| Error::io(&states_path, e))?;

    let times_path = bundle_file(stem, ".times.txt");
    let mut text = String::with_capacity(set.s() * 24);
    for t in set.times() {
        text.push_str(&format!("{t:?}\n"));
    }
    fs::write(&times_path, text).map_err(|e| Error::io(&times_path, e))?;

    OperatorFile::from_operator(OperatorKind::Mass, set.mass())
        .write(&bundle_file(stem, OperatorKind::Mass.suffix()))?;
    OperatorFile::from_operator(OperatorKind::Stiffness, set.stiffness())
        .write(&bundle_file(stem, OperatorKind::Stiffness.suffix()))?;
    Ok(())
}
