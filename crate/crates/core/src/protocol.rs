//! Timing and consistency protocols over seeded random data.
//!
//! The consistency protocol needs no dataset: PD's guarantee holds for any
//! ground truth and any raw prediction, so both are drawn from a seeded
//! uniform distribution.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linop::generic_pd;
use crate::metrics::{compare, ConsistencyReport};
use crate::pooling::{
    extract_highfreq, pd_combine, pd_combine_plane, pool_down, pool_down_plane, pool_up, PoolingOp,
};
use crate::rng::SeededRng;
use crate::tensor::{ImageTensor, Shape};

const CHANNELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchOp {
    Pd,
    GenericPd,
    PoolDown,
    PoolUp,
    Highfreq,
}

impl std::str::FromStr for BenchOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pd" => Ok(BenchOp::Pd),
            "generic_pd" => Ok(BenchOp::GenericPd),
            "pool_down" => Ok(BenchOp::PoolDown),
            "pool_up" => Ok(BenchOp::PoolUp),
            "highfreq" => Ok(BenchOp::Highfreq),
            other => Err(Error::InvalidArgument(format!(
                "unknown bench op {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub op_name: BenchOp,
    pub image_size: usize,
    pub iterations: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn image_seed(seed: u64, index: u64) -> u64 {
    seed ^ (index + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Times `iterations` runs of `op` on a seeded `3 x size x size` raw
/// prediction (uniform noise) and matching low-resolution input. One untimed
/// warm-up run precedes the measurements.
pub fn run_bench(
    op: BenchOp,
    size: usize,
    scale: usize,
    iterations: usize,
    seed: u64,
) -> Result<BenchResult> {
    if iterations == 0 {
        return Err(Error::InvalidArgument(
            "iterations must be at least 1".into(),
        ));
    }
    let hr = Shape::new(CHANNELS, size, size);
    let pool = PoolingOp::new(scale, hr)?;
    let mut rng = SeededRng::new(seed);
    let y = rng.uniform_tensor(Shape::new(CHANNELS, size / scale, size / scale), 0.0, 1.0);
    let raw = rng.uniform_tensor(hr, 0.0, 1.0);

    let run = || -> Result<ImageTensor> {
        match op {
            BenchOp::Pd => pd_combine(&y, &raw, scale),
            BenchOp::GenericPd => generic_pd(&pool, &y, &raw),
            BenchOp::PoolDown => pool_down(&raw, scale),
            BenchOp::PoolUp => pool_up(&y, scale),
            BenchOp::Highfreq => extract_highfreq(&raw, scale),
        }
    };
    std::hint::black_box(run()?);
    let mut times = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let start = Instant::now();
        let out = run()?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(out);
    }
    let mean_ms = times.iter().sum::<f64>() / iterations as f64;
    times.sort_by(f64::total_cmp);
    Ok(BenchResult {
        op_name: op,
        image_size: size,
        iterations,
        mean_ms,
        p50_ms: percentile(&times, 0.5),
        p95_ms: percentile(&times, 0.95),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F64,
    F32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1Config {
    pub count: usize,
    pub size: usize,
    pub scale: usize,
    pub seed: u64,
    pub precision: Precision,
    pub parallel: bool,
}

impl Default for Table1Config {
    fn default() -> Self {
        Table1Config {
            count: 100,
            size: 256,
            scale: 8,
            seed: 0,
            precision: Precision::F64,
            parallel: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Summary {
    pub count: usize,
    pub size: usize,
    pub scale: usize,
    pub seed: u64,
    pub precision: Precision,
    pub mean_psnr: f64,
    pub min_psnr: f64,
    pub mean_l1: f64,
    pub mean_mse: f64,
    pub mean_max_abs: f64,
    pub worst_max_abs: f64,
    /// Mean PD wall time per image; absent when timing is suppressed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_ms: Option<f64>,
}

/// PD in single precision: inputs are cast to `f32`, PD and the consistency
/// pooling run in `f32`, and the result is compared against the cast `y`.
fn single_precision_case(y: &ImageTensor, raw: &ImageTensor, s: usize) -> (ConsistencyReport, f64) {
    let to32 = |t: &ImageTensor| t.data().iter().map(|&v| v as f32).collect::<Vec<f32>>();
    let (y32, raw32) = (to32(y), to32(raw));
    let (lh, lw) = (y.height(), y.width());
    let (hn, ln) = (raw.shape().plane_len(), y.shape().plane_len());
    let mut out = vec![0f32; raw32.len()];
    let start = Instant::now();
    for c in 0..y.channels() {
        pd_combine_plane(
            &y32[c * ln..(c + 1) * ln],
            &raw32[c * hn..(c + 1) * hn],
            lh,
            lw,
            s,
            &mut out[c * hn..(c + 1) * hn],
        );
    }
    let ms = start.elapsed().as_secs_f64() * 1e3;
    let mut down = vec![0f32; y32.len()];
    for c in 0..y.channels() {
        pool_down_plane(
            &out[c * hn..(c + 1) * hn],
            lh * s,
            lw * s,
            s,
            &mut down[c * ln..(c + 1) * ln],
        );
    }
    let widen =
        |v: &[f32]| ImageTensor::from_parts(y.shape(), v.iter().map(|&x| f64::from(x)).collect());
    let report = compare(&widen(&y32), &widen(&down)).expect("same shape");
    (report, ms)
}

fn table1_case(cfg: &Table1Config, index: usize) -> Result<(ConsistencyReport, f64)> {
    let hr = Shape::new(CHANNELS, cfg.size, cfg.size);
    let mut rng = SeededRng::new(image_seed(cfg.seed, index as u64));
    let gt = rng.uniform_tensor(hr, 0.0, 1.0);
    let y = pool_down(&gt, cfg.scale)?;
    let raw = rng.uniform_tensor(hr, 0.0, 1.0);
    Ok(match cfg.precision {
        Precision::F64 => {
            let start = Instant::now();
            let x_hat = pd_combine(&y, &raw, cfg.scale)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            (compare(&y, &pool_down(&x_hat, cfg.scale)?)?, ms)
        }
        Precision::F32 => single_precision_case(&y, &raw, cfg.scale),
    })
}

/// Random ground truth, pooled to LR, completed by PD from a random raw
/// prediction, then checked for consistency. Results are identical with or
/// without `parallel`.
pub fn run_table1(cfg: &Table1Config, with_timing: bool) -> Result<Table1Summary> {
    if cfg.count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    PoolingOp::new(cfg.scale, Shape::new(CHANNELS, cfg.size, cfg.size))?;
    let cases: Vec<(ConsistencyReport, f64)> = if cfg.parallel {
        (0..cfg.count)
            .into_par_iter()
            .map(|i| table1_case(cfg, i))
            .collect::<Result<_>>()?
    } else {
        (0..cfg.count)
            .map(|i| table1_case(cfg, i))
            .collect::<Result<_>>()?
    };
    let n = cases.len() as f64;
    let mean = |f: fn(&ConsistencyReport) -> f64| cases.iter().map(|(r, _)| f(r)).sum::<f64>() / n;
    Ok(Table1Summary {
        count: cfg.count,
        size: cfg.size,
        scale: cfg.scale,
        seed: cfg.seed,
        precision: cfg.precision,
        mean_psnr: mean(|r| r.psnr),
        min_psnr: cases
            .iter()
            .map(|(r, _)| r.psnr)
            .fold(f64::INFINITY, f64::min),
        mean_l1: mean(|r| r.l1),
        mean_mse: mean(|r| r.mse),
        mean_max_abs: mean(|r| r.max_abs),
        worst_max_abs: cases.iter().map(|(r, _)| r.max_abs).fold(0.0, f64::max),
        mean_ms: with_timing.then(|| cases.iter().map(|(_, t)| t).sum::<f64>() / n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.5), 2.0);
        assert_eq!(percentile(&v, 0.95), 4.0);
        assert_eq!(percentile(&[7.0], 0.5), 7.0);
    }

    #[test]
    fn single_iteration_bench() {
        let r = run_bench(BenchOp::Pd, 32, 4, 1, 0).unwrap();
        assert_eq!(r.iterations, 1);
        assert_eq!(r.p50_ms, r.p95_ms);
        assert_eq!(r.p50_ms, r.mean_ms);
        assert!(run_bench(BenchOp::Pd, 32, 4, 0, 0).is_err());
        assert!(run_bench(BenchOp::Pd, 30, 4, 1, 0).is_err());
    }

    #[test]
    fn bench_orders_percentiles() {
        for op in [
            BenchOp::Pd,
            BenchOp::GenericPd,
            BenchOp::PoolDown,
            BenchOp::PoolUp,
            BenchOp::Highfreq,
        ] {
            let r = run_bench(op, 32, 2, 7, 1).unwrap();
            assert!(r.p50_ms <= r.p95_ms && r.mean_ms >= 0.0);
        }
    }

    #[test]
    fn table1_small() {
        let cfg = Table1Config {
            count: 4,
            size: 32,
            scale: 8,
            ..Default::default()
        };
        let a = run_table1(&cfg, false).unwrap();
        assert!(a.mean_psnr >= 240.0 && a.worst_max_abs <= 1e-12, "{a:?}");
        let b = run_table1(
            &Table1Config {
                parallel: true,
                ..cfg
            },
            false,
        )
        .unwrap();
        assert_eq!(a, b);
        assert!(run_table1(&Table1Config { count: 0, ..cfg }, false).is_err());
        let f = run_table1(
            &Table1Config {
                precision: Precision::F32,
                ..cfg
            },
            false,
        )
        .unwrap();
        assert!(f.mean_psnr < a.mean_psnr && f.mean_psnr > 100.0, "{f:?}");
    }
}
