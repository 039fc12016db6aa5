//! Run configuration: one TOML file with a section per stage. `--set
//! section.key=value` and the global flags override file values.

use std::fs;
use std::path::{Path, PathBuf};

use lrom_core::filter::FilterVariant;
use lrom_core::fom::{BurgersConfig, InitialCondition};
use lrom_core::integrate::Model;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::failure::Failure;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub fom: FomSection,
    pub pod: PodSection,
    pub rom: RomSection,
    pub calibrate: CalibrateSection,
    pub bench: BenchSection,
    pub report: ReportSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FomSection {
    pub n: usize,
    pub domain_length: f64,
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    /// `two_wave` or `sine`.
    pub initial_condition: String,
    pub perturbation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PodSection {
    /// Defaults to `min(n, s)`.
    pub d_max: Option<usize>,
    pub drop_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RomSection {
    pub r: usize,
    pub model: String,
    pub variant: String,
    pub delta: f64,
    pub dt: f64,
    /// Horizon from the first snapshot; defaults to the recorded span.
    pub t_end: Option<f64>,
    /// Relative size of seeded noise on the projected initial coefficients.
    pub initial_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateSection {
    /// Defaults to `rom.r`.
    pub r: Option<usize>,
    pub variant: String,
    pub delta_min: f64,
    pub delta_max: f64,
    pub n_grid: usize,
    pub refine_iters: usize,
    pub warmup: f64,
    /// Overrides the projected-snapshot target.
    pub target: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub ladder: Vec<usize>,
    pub batch_ms: u64,
    pub batches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSection {
    pub phase: [usize; 2],
    pub warmup: f64,
}

impl Default for FomSection {
    fn default() -> Self {
        let d = BurgersConfig::default();
        FomSection {
            n: d.n,
            domain_length: d.domain_length,
            nu: d.nu,
            dt: d.dt,
            t_end: d.t_end,
            snapshot_stride: d.snapshot_stride,
            initial_condition: "two_wave".into(),
            perturbation: d.perturbation,
        }
    }
}

impl Default for PodSection {
    fn default() -> Self {
        PodSection {
            d_max: None,
            drop_tol: lrom_core::pod::DEFAULT_DROP_TOL,
        }
    }
}

impl Default for RomSection {
    fn default() -> Self {
        RomSection {
            r: 6,
            model: "galerkin".into(),
            variant: "none".into(),
            delta: 0.0,
            dt: 2e-4,
            t_end: None,
            initial_noise: 0.0,
        }
    }
}

impl Default for CalibrateSection {
    fn default() -> Self {
        CalibrateSection {
            r: None,
            variant: "rom_level".into(),
            delta_min: 1e-3,
            delta_max: 1.0,
            n_grid: 12,
            refine_iters: 20,
            warmup: lrom_core::calibrate::DEFAULT_WARMUP,
            target: None,
        }
    }
}

impl Default for BenchSection {
    fn default() -> Self {
        BenchSection {
            ladder: lrom_core::complexity::DEFAULT_LADDER.to_vec(),
            batch_ms: 20,
            batches: 9,
        }
    }
}

impl Default for ReportSection {
    fn default() -> Self {
        ReportSection {
            phase: [1, 2],
            warmup: lrom_core::calibrate::DEFAULT_WARMUP,
        }
    }
}

impl Config {
    /// Reads `path` (if any), applies `key=value` overrides and the seed flag.
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Config, Failure> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Failure::io(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| Failure::validation(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for item in overrides {
            apply_override(&mut table, item)?;
        }
        if let Some(seed) = seed {
            let seed = i64::try_from(seed).map_err(|_| Failure::validation("seed must fit in 63 bits"))?;
            table.insert("seed".into(), toml::Value::Integer(seed));
        }
        let config: Config = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Failure::validation(format!("config: {e}")))?;
        config.check_names()?;
        Ok(config)
    }

    fn check_names(&self) -> Result<(), Failure> {
        self.initial_condition()?;
        self.model()?;
        self.variant()?;
        self.calibrate_variant()?;
        Ok(())
    }

    pub fn initial_condition(&self) -> Result<InitialCondition, Failure> {
        match self.fom.initial_condition.as_str() {
            "two_wave" => Ok(InitialCondition::TwoWave),
            "sine" => Ok(InitialCondition::Sine),
            other => Err(Failure::validation(format!(
                "fom.initial_condition `{other}` (expected two_wave or sine)"
            ))),
        }
    }

    pub fn model(&self) -> Result<Model, Failure> {
        self.rom.model.parse().map_err(|e| Failure::validation(format!("rom.model: {e}")))
    }

    pub fn variant(&self) -> Result<FilterVariant, Failure> {
        self.rom.variant.parse().map_err(|e| Failure::validation(format!("rom.variant: {e}")))
    }

    pub fn calibrate_variant(&self) -> Result<FilterVariant, Failure> {
        self.calibrate
            .variant
            .parse()
            .map_err(|e| Failure::validation(format!("calibrate.variant: {e}")))
    }

    pub fn burgers(&self) -> Result<BurgersConfig, Failure> {
        Ok(BurgersConfig {
            n: self.fom.n,
            domain_length: self.fom.domain_length,
            nu: self.fom.nu,
            dt: self.fom.dt,
            t_end: self.fom.t_end,
            snapshot_stride: self.fom.snapshot_stride,
            initial_condition: self.initial_condition()?,
            perturbation: self.fom.perturbation,
            seed: self.seed,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_toml().as_bytes());
        hash.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_dir(&self, base: &Path) -> PathBuf {
        base.join(format!("run-{}", self.digest()))
    }
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<(), Failure> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Failure::validation(format!("override `{item}` must look like section.key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Failure::validation(format!("override `{item}` has an empty key")));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path.split_last().expect("nonempty");
    let mut cursor = table;
    for part in parents {
        let entry = cursor
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cursor = entry
            .as_table_mut()
            .ok_or_else(|| Failure::validation(format!("override `{item}`: `{part}` is not a section")))?;
    }
    cursor.insert(last.to_string(), value);
    Ok(())
}
