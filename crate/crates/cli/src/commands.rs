use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use lrom_core::assembly::{
    assemble_galerkin_with, assemble_leray_fe_with, read_rom_operators, write_rom_operators, RomOperators,
};
use lrom_core::calibrate::{calibrate_delta, mean_kinetic_energy, CalibrationConfig};
use lrom_core::complexity::measure_online_cost;
use lrom_core::diagnostics::{
    l2_norm_series, phase_portrait, project_snapshots, write_l2norm_csv, write_phase_csv, write_spectrum_csv,
};
use lrom_core::filter::{filter_modes, FeFilter, FilterSpec, FilterVariant};
use lrom_core::fom::run_fom;
use lrom_core::integrate::{integrate, read_trajectory_csv, write_trajectory_csv, Model, RomInitial, RomRunConfig, Trajectory};
use lrom_core::pod::{compute_pod_with, read_pod_basis, write_modes, write_pod_basis, PodBasis};
use lrom_core::snapshot::{bundle_file, read_snapshot_set, write_snapshot_set, SnapshotSet};
use lrom_core::Execution;

use crate::config::Config;
use crate::failure::{Failure, StageExt};

pub struct Context {
    pub config: Config,
    pub dir: PathBuf,
    pub exec: Execution,
}

impl Context {
    pub fn prepare(config: Config, base: &Path, exec: Execution) -> Result<Context, Failure> {
        let dir = config.run_dir(base);
        fs::create_dir_all(&dir).map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))?;
        let cfg_path = dir.join("config.toml");
        if !cfg_path.exists() {
            write_text(&cfg_path, &config.to_toml())?;
        }
        Ok(Context { config, dir, exec })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn snapshots_stem(&self) -> PathBuf {
        self.path("snapshots")
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

pub fn generate(ctx: &Context) -> Result<(), Failure> {
    let burgers = ctx.config.burgers().stage("generate")?;
    burgers.validate().stage("generate")?;
    let set = run_fom(&burgers).stage("generate")?;
    write_snapshot_set(&set, &ctx.snapshots_stem()).stage("generate")?;
    println!("generate: n={} s={} t=[{}, {}] -> {}", set.n(), set.s(), set.times()[0], set.times()[set.s() - 1], ctx.dir.display());
    Ok(())
}

fn load_set(ctx: &Context, stage: &'static str) -> Result<SnapshotSet, Failure> {
    let stem = ctx.snapshots_stem();
    if !bundle_file(&stem, ".meta").exists() {
        return Err(Failure::io(format!(
            "no snapshot bundle in {} (run `lrom generate` with the same configuration first)",
            ctx.dir.display()
        ))
        .in_stage(stage));
    }
    read_snapshot_set(&stem).stage(stage)
}

fn compute_basis(ctx: &Context, set: &SnapshotSet) -> Result<PodBasis, Failure> {
    let d_max = ctx.config.pod.d_max.unwrap_or(set.n().min(set.s()));
    let basis = compute_pod_with(set, d_max, ctx.config.pod.drop_tol, ctx.exec).stage("pod")?;
    write_pod_basis(&basis, &ctx.path("basis")).stage("pod")?;
    write_spectrum_csv(basis.eigenvalues(), &ctx.path("spectrum.csv")).stage("pod")?;
    Ok(basis)
}

/// Reuses `basis.pod.*` when an earlier stage wrote it into this run directory.
fn load_basis(ctx: &Context, set: &SnapshotSet) -> Result<PodBasis, Failure> {
    let stem = ctx.path("basis");
    if bundle_file(&stem, ".pod.bin").exists() {
        read_pod_basis(&stem).stage("pod")
    } else {
        compute_basis(ctx, set)
    }
}

pub fn pod(ctx: &Context) -> Result<(), Failure> {
    let set = load_set(ctx, "pod")?;
    let basis = compute_basis(ctx, &set)?;
    let total = basis.total_energy();
    let captured: f64 = basis.eigenvalues().iter().sum();
    println!(
        "pod: d={} total energy {:.6e}, captured fraction {:.12}",
        basis.d(),
        total,
        captured / total
    );
    Ok(())
}

fn rom_filter_spec(config: &Config) -> Result<(Model, FilterSpec), Failure> {
    let model = config.model()?;
    let variant = config.variant()?;
    let spec = match variant {
        FilterVariant::None => FilterSpec::none(),
        v => FilterSpec::new(v, config.rom.delta).stage("assemble")?,
    };
    Ok((model, spec))
}

fn build_operators(
    ctx: &Context,
    set: &SnapshotSet,
    basis: &PodBasis,
    r: usize,
    fe_delta: Option<f64>,
) -> Result<RomOperators, Failure> {
    let ops = assemble_galerkin_with(basis, r, set, ctx.exec).stage("assemble")?;
    match fe_delta {
        None => Ok(ops),
        Some(delta) => {
            let filter = FeFilter::new(set.mass(), set.stiffness(), delta).stage("filter")?;
            let psi = filter_modes(&filter, basis, r, ctx.exec).stage("filter")?;
            write_modes(&ctx.path("filtered"), &psi, &basis.eigenvalues()[..r], &[("delta", format!("{delta:?}"))])
                .stage("filter")?;
            assemble_leray_fe_with(&ops, basis, set, &filter, ctx.exec).stage("assemble")
        }
    }
}

fn fe_delta(config: &Config) -> Result<Option<f64>, Failure> {
    let (_, spec) = rom_filter_spec(config)?;
    Ok((spec.variant == FilterVariant::FeLevel).then_some(spec.delta))
}

pub fn assemble(ctx: &Context) -> Result<(), Failure> {
    let set = load_set(ctx, "assemble")?;
    let basis = load_basis(ctx, &set)?;
    let r = ctx.config.rom.r;
    let ops = build_operators(ctx, &set, &basis, r, fe_delta(&ctx.config)?)?;
    write_rom_operators(&ops, &ctx.path("rom")).stage("assemble")?;
    let leray = match ops.leray_delta {
        Some(d) => format!(", Leray tensor at delta={d}"),
        None => String::new(),
    };
    println!("assemble: r={r}{leray} -> {}", ctx.path("rom.rom.bin").display());
    Ok(())
}

/// Reuses `rom.rom.bin` when it matches the requested rank and Leray radius.
fn load_operators(ctx: &Context, set: &SnapshotSet, basis: &PodBasis) -> Result<RomOperators, Failure> {
    let r = ctx.config.rom.r;
    let want = fe_delta(&ctx.config)?;
    let stem = ctx.path("rom");
    if bundle_file(&stem, ".rom.bin").exists() {
        let ops = read_rom_operators(&stem).stage("assemble")?;
        if ops.r() == r && (want.is_none() || ops.leray_delta == want) {
            return Ok(ops);
        }
    }
    build_operators(ctx, set, basis, r, want)
}

fn horizon(config_t_end: Option<f64>, set: &SnapshotSet) -> f64 {
    config_t_end.unwrap_or_else(|| set.times()[set.s() - 1] - set.times()[0])
}

fn initial(ctx: &Context, basis: &PodBasis, set: &SnapshotSet, r: usize) -> Result<RomInitial, Failure> {
    let noise = ctx.config.rom.initial_noise;
    if noise == 0.0 {
        Ok(RomInitial::ProjectFirstSnapshot)
    } else if noise > 0.0 && noise.is_finite() {
        RomInitial::perturbed(basis, r, set, ctx.config.seed, noise).stage("run")
    } else {
        Err(Failure::validation("rom.initial_noise must be nonnegative").in_stage("run"))
    }
}

struct RunSummary {
    r: usize,
    model: Model,
    variant: FilterVariant,
    delta: f64,
    mean_ke: Option<f64>,
    mean_norm: f64,
    steps: usize,
    blew_up: bool,
}

impl RunSummary {
    fn of(traj: &Trajectory, model: Model, variant: FilterVariant, delta: f64, warmup: f64) -> RunSummary {
        RunSummary {
            r: traj.r,
            model,
            variant,
            delta,
            mean_ke: mean_kinetic_energy(traj, warmup).ok(),
            mean_norm: l2_norm_series(traj).mean,
            steps: traj.len().saturating_sub(1),
            blew_up: traj.blew_up,
        }
    }

    fn table(&self) -> String {
        let ke = self.mean_ke.map_or("undefined".to_string(), |k| format!("{k:.10e}"));
        let mut out = String::new();
        let _ = writeln!(out, "{:>4}  {:<9} {:<10} {:>10}  {:>17}  {:>17}  {:>7}  blew_up", "r", "model", "variant", "delta", "mean_ke", "mean_l2", "steps");
        let _ = writeln!(
            out,
            "{:>4}  {:<9} {:<10} {:>10}  {:>17}  {:>17.10e}  {:>7}  {}",
            self.r,
            self.model.to_string(),
            self.variant.to_string(),
            format!("{}", self.delta),
            ke,
            self.mean_norm,
            self.steps,
            self.blew_up
        );
        out
    }
}

fn write_diagnostics(ctx: &Context, traj: &Trajectory, stage: &'static str) -> Result<PathBuf, Failure> {
    write_l2norm_csv(&l2_norm_series(traj), &ctx.path("l2norm.csv")).stage(stage)?;
    let [i, j] = ctx.config.report.phase;
    let phase_path = ctx.path(&format!("phase_{i}_{j}.csv"));
    write_phase_csv(&phase_portrait(traj, i, j).stage(stage)?, &phase_path).stage(stage)?;
    Ok(phase_path)
}

pub fn run(ctx: &Context) -> Result<(), Failure> {
    let set = load_set(ctx, "run")?;
    let basis = load_basis(ctx, &set)?;
    let ops = load_operators(ctx, &set, &basis)?;
    let (model, filter) = rom_filter_spec(&ctx.config)?;
    let r = ctx.config.rom.r;
    let config = RomRunConfig {
        r,
        dt: ctx.config.rom.dt,
        t_end: horizon(ctx.config.rom.t_end, &set),
        initial: initial(ctx, &basis, &set, r)?,
        model,
        filter,
    };
    let traj = integrate(&ops, &config, &basis, &set).stage("run")?;
    write_trajectory_csv(&traj, &ctx.path("trajectory.csv")).stage("run")?;
    write_diagnostics(ctx, &traj, "run")?;
    let projected = project_snapshots(&basis, r, &set).stage("run")?;
    write_trajectory_csv(&projected, &ctx.path("projection.csv")).stage("run")?;

    let summary = RunSummary::of(&traj, model, filter.variant, filter.delta, ctx.config.report.warmup);
    let table = summary.table();
    write_text(&ctx.path("summary.txt"), &table)?;
    print!("{table}");
    println!("run: artifacts in {}", ctx.dir.display());
    if traj.blew_up {
        let t = traj.times.last().copied().unwrap_or(0.0);
        return Err(Failure::blow_up(format!("ROM diverged after t = {t}; truncated trajectory written")).in_stage("run"));
    }
    Ok(())
}

pub fn calibrate(ctx: &Context) -> Result<(), Failure> {
    let set = load_set(ctx, "calibrate")?;
    let basis = load_basis(ctx, &set)?;
    let c = &ctx.config.calibrate;
    let r = c.r.unwrap_or(ctx.config.rom.r);
    let ops = assemble_galerkin_with(&basis, r, &set, ctx.exec).stage("assemble")?;
    let mut config = CalibrationConfig::new(ctx.config.calibrate_variant()?, ctx.config.rom.dt, horizon(ctx.config.rom.t_end, &set));
    config.delta_min = c.delta_min;
    config.delta_max = c.delta_max;
    config.n_grid = c.n_grid;
    config.refine_iters = c.refine_iters;
    config.warmup_fraction = c.warmup;
    config.target = c.target;
    config.initial = initial(ctx, &basis, &set, r)?;
    let result = calibrate_delta(&ops, &basis, &set, &config, ctx.exec).stage("calibrate")?;

    let mut csv = String::from("delta,mean_ke\n");
    for (d, ke) in &result.sweep {
        let _ = writeln!(csv, "{d:?},{ke:?}");
    }
    write_text(&ctx.path("calibration.csv"), &csv)?;
    let mut refine = String::from("delta,mean_ke\n");
    for (d, ke) in &result.refinement {
        let _ = writeln!(refine, "{d:?},{ke:?}");
    }
    write_text(&ctx.path("calibration_refine.csv"), &refine)?;
    let line = format!(
        "calibrate: variant={} r={r} delta_star={:?} mean_ke={:?} target_ke={:?} objective={:e} converged={}",
        config.variant, result.delta_star, result.mean_ke, result.target_ke, result.objective_value, result.converged
    );
    write_text(&ctx.path("calibration.txt"), &format!("{line}\n"))?;
    print!("{csv}");
    println!("{line}");
    Ok(())
}

pub fn bench(ctx: &Context) -> Result<(), Failure> {
    let b = &ctx.config.bench;
    if b.ladder.len() < 2 || b.ladder.contains(&0) || b.batches == 0 {
        return Err(Failure::validation("bench needs at least two positive ranks and one batch").in_stage("bench"));
    }
    let report = measure_online_cost(&b.ladder, ctx.config.seed, Duration::from_millis(b.batch_ms), b.batches).stage("bench")?;
    let mut csv = String::from("r,rhs_ns,filter_ns\n");
    for rung in &report.rungs {
        let _ = writeln!(csv, "{},{:?},{:?}", rung.r, rung.rhs_ns, rung.filter_ns);
    }
    write_text(&ctx.path("bench.csv"), &csv)?;
    print!("{csv}");
    println!(
        "bench: rhs slope {:.3}, filter slope {:.3}, max filter/rhs ratio {:.3}",
        report.rhs_slope,
        report.filter_slope,
        report.max_filter_ratio()
    );
    Ok(())
}

pub fn report(ctx: &Context) -> Result<(), Failure> {
    let path = ctx.path("trajectory.csv");
    if !path.exists() {
        return Err(Failure::io(format!("no trajectory in {} (run `lrom run` first)", ctx.dir.display())).in_stage("report"));
    }
    let traj = read_trajectory_csv(&path).stage("report")?;
    let (model, filter) = rom_filter_spec(&ctx.config)?;
    let phase_path = write_diagnostics(ctx, &traj, "report")?;
    let summary = RunSummary::of(&traj, model, filter.variant, filter.delta, ctx.config.report.warmup);
    print!("{}", summary.table());

    let set = load_set(ctx, "report")?;
    let basis = load_basis(ctx, &set)?;
    if let Ok(target) = mean_kinetic_energy(&project_snapshots(&basis, traj.r, &set).stage("report")?, ctx.config.report.warmup) {
        println!("projected-snapshot mean_ke {target:.10e}");
    }
    let total = basis.total_energy();
    let captured: f64 = basis.eigenvalues()[..traj.r.min(basis.d())].iter().sum();
    println!("energy captured by r={}: {:.8}", traj.r, captured / total);
    if let Ok(text) = fs::read_to_string(ctx.path("calibration.txt")) {
        print!("{text}");
    }
    println!("report: wrote l2norm.csv and {}", phase_path.file_name().unwrap_or_default().to_string_lossy());
    Ok(())
}
