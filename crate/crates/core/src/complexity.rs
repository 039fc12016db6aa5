//! Timing of the two online kernels, the tensor right-hand side and the
//! ROM-level filter solve, over a ladder of reduced dimensions, with
//! log-log slope fits.

use std::hint::black_box;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{RomOperators, Tensor3};
use crate::error::Result;
use crate::filter::{build_rom_filter, RomFilterOperator};
use crate::integrate::rhs_galerkin_into;

pub const DEFAULT_LADDER: [usize; 4] = [8, 16, 32, 64];

#[derive(Debug, Clone, PartialEq)]
pub struct CostRung {
    pub r: usize,
    pub rhs_ns: f64,
    pub filter_ns: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub rungs: Vec<CostRung>,
    pub rhs_slope: f64,
    pub filter_slope: f64,
}

impl CostReport {
    pub fn max_filter_ratio(&self) -> f64 {
        self.rungs
            .iter()
            .map(|c| c.filter_ns / c.rhs_ns)
            .fold(0.0, f64::max)
    }
}

/// Random reduced operators with an identity mass and SPD stiffness.
pub fn synthetic_operators(r: usize, seed: u64) -> RomOperators {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = DMatrix::from_fn(r, r, |_, _| rng.random_range(-1.0..1.0));
    let stiff_r = q.transpose() * &q + DMatrix::identity(r, r);
    let b = Tensor3::from_fn(r, |_, _, _| rng.random_range(-1.0..1.0));
    RomOperators {
        a: -&stiff_r * 0.01,
        mass_r: DMatrix::identity(r, r),
        stiff_r,
        b,
        b_leray: None,
        leray_delta: None,
    }
}

/// Median nanoseconds per call of `f`, over `batches` batches each lasting at
/// least `batch_time`.
pub fn time_per_call(mut f: impl FnMut(), batch_time: Duration, batches: usize) -> f64 {
    let mut reps = 1usize;
    loop {
        let start = Instant::now();
        for _ in 0..reps {
            f();
        }
        if start.elapsed() >= batch_time / 4 {
            break;
        }
        reps *= 2;
    }
    reps *= 4;
    let mut samples: Vec<f64> = (0..batches.max(1))
        .map(|_| {
            let start = Instant::now();
            for _ in 0..reps {
                f();
            }
            start.elapsed().as_nanos() as f64 / reps as f64
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    samples[samples.len() / 2]
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn time_rung(r: usize, seed: u64, batch_time: Duration, batches: usize) -> Result<CostRung> {
    let ops = synthetic_operators(r, seed);
    let filter: RomFilterOperator = build_rom_filter(&ops.mass_r, &ops.stiff_r, 0.1)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa5a5);
    let a: Vec<f64> = (0..r).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut out = vec![0.0; r];
    let rhs_ns = time_per_call(
        || {
            rhs_galerkin_into(black_box(&ops), black_box(&a), &mut out);
            black_box(&out);
        },
        batch_time,
        batches,
    );
    let filter_ns = time_per_call(
        || {
            filter.apply_into(black_box(&a), &mut out);
            black_box(&out);
        },
        batch_time,
        batches,
    );
    Ok(CostRung { r, rhs_ns, filter_ns })
}

pub fn measure_online_cost(ladder: &[usize], seed: u64, batch_time: Duration, batches: usize) -> Result<CostReport> {
    let rungs = ladder
        .iter()
        .map(|&r| time_rung(r, seed.wrapping_add(r as u64), batch_time, batches))
        .collect::<Result<Vec<_>>>()?;
    let rs: Vec<f64> = rungs.iter().map(|c| c.r as f64).collect();
    let rhs: Vec<f64> = rungs.iter().map(|c| c.rhs_ns).collect();
    let filt: Vec<f64> = rungs.iter().map(|c| c.filter_ns).collect();
    Ok(CostReport {
        rhs_slope: loglog_slope(&rs, &rhs),
        filter_slope: loglog_slope(&rs, &filt),
        rungs,
    })
}
