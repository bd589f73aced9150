//! Separable resampling used to synthesize degraded inputs and to produce
//! simple raw predictions for PD.
//!
//! Output pixel `i` sits at source coordinate `(i + 0.5) * s - 0.5` when
//! downsampling and `(i + 0.5) / s - 0.5` when upsampling. Out-of-range taps
//! are clamped to the edge, and each output pixel's weights are normalized to
//! sum to one. With `antialias` the kernel is stretched by `s` on the way
//! down; the box filter is always stretched, so box downsampling is exactly
//! average pooling.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io::load_any;
use crate::pooling::{check_divisible, pool_up};
use crate::tensor::{ImageTensor, Shape};

/// Cubic convolution coefficient.
pub const CUBIC_A: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Filter {
    Box,
    Bilinear,
    Bicubic,
}

impl Filter {
    fn radius(self) -> f64 {
        match self {
            Filter::Box => 0.5,
            Filter::Bilinear => 1.0,
            Filter::Bicubic => 2.0,
        }
    }

    pub fn weight(self, t: f64) -> f64 {
        match self {
            Filter::Box => {
                if (-0.5..0.5).contains(&t) {
                    1.0
                } else {
                    0.0
                }
            }
            Filter::Bilinear => (1.0 - t.abs()).max(0.0),
            Filter::Bicubic => {
                let x = t.abs();
                let a = CUBIC_A;
                if x <= 1.0 {
                    ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
                } else if x < 2.0 {
                    ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
                } else {
                    0.0
                }
            }
        }
    }
}

impl FromStr for Filter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "box" => Ok(Filter::Box),
            "bilinear" => Ok(Filter::Bilinear),
            "bicubic" => Ok(Filter::Bicubic),
            other => Err(Error::InvalidArgument(format!("unknown filter {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Down,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ResampleSpec {
    pub filter: Filter,
    pub antialias: bool,
    pub scale: usize,
    pub direction: Direction,
}

impl ResampleSpec {
    pub fn down(filter: Filter, scale: usize, antialias: bool) -> Self {
        ResampleSpec {
            filter,
            antialias,
            scale,
            direction: Direction::Down,
        }
    }

    pub fn up(filter: Filter, scale: usize) -> Self {
        ResampleSpec {
            filter,
            antialias: false,
            scale,
            direction: Direction::Up,
        }
    }

    pub fn output_shape(&self, input: Shape) -> Result<Shape> {
        let s = self.scale;
        match self.direction {
            Direction::Down => {
                check_divisible(input, s)?;
                Ok(Shape::new(
                    input.channels,
                    input.height / s,
                    input.width / s,
                ))
            }
            Direction::Up => {
                if s == 0 {
                    return Err(Error::InvalidArgument("scale must be at least 1".into()));
                }
                Ok(Shape::new(
                    input.channels,
                    input.height * s,
                    input.width * s,
                ))
            }
        }
    }
}

/// Taps `(source index, weight)` for each output position along one axis.
type Taps = Vec<Vec<(usize, f64)>>;

fn axis_taps(spec: &ResampleSpec, n_in: usize, n_out: usize) -> Taps {
    let s = spec.scale as f64;
    let stretch = match spec.direction {
        Direction::Down if spec.antialias || spec.filter == Filter::Box => s,
        _ => 1.0,
    };
    let reach = spec.filter.radius() * stretch;
    (0..n_out)
        .map(|i| {
            let center = match spec.direction {
                Direction::Down => (i as f64 + 0.5) * s - 0.5,
                Direction::Up => (i as f64 + 0.5) / s - 0.5,
            };
            let lo = (center - reach).ceil() as i64;
            let hi = (center + reach).floor() as i64;
            let mut taps: Vec<(usize, f64)> = Vec::new();
            let mut total = 0.0;
            for j in lo..=hi {
                let w = spec.filter.weight((j as f64 - center) / stretch);
                if w == 0.0 {
                    continue;
                }
                let idx = j.clamp(0, n_in as i64 - 1) as usize;
                total += w;
                match taps.iter_mut().find(|(k, _)| *k == idx) {
                    Some(t) => t.1 += w,
                    None => taps.push((idx, w)),
                }
            }
            taps.iter_mut().for_each(|t| t.1 /= total);
            taps
        })
        .collect()
}

pub fn resample(x: &ImageTensor, spec: &ResampleSpec) -> Result<ImageTensor> {
    let out_shape = spec.output_shape(x.shape())?;
    let (h, w) = (x.height(), x.width());
    let (oh, ow) = (out_shape.height, out_shape.width);
    let col_taps = axis_taps(spec, w, ow);
    let row_taps = axis_taps(spec, h, oh);

    let mut out = Vec::with_capacity(out_shape.len());
    let mut horiz = vec![0.0; h * ow];
    for c in 0..x.channels() {
        let plane = x.plane(c);
        for r in 0..h {
            let src = &plane[r * w..(r + 1) * w];
            for (j, taps) in col_taps.iter().enumerate() {
                horiz[r * ow + j] = taps.iter().map(|&(k, wt)| src[k] * wt).sum();
            }
        }
        for taps in &row_taps {
            for j in 0..ow {
                out.push(taps.iter().map(|&(k, wt)| horiz[k * ow + j] * wt).sum());
            }
        }
    }
    Ok(ImageTensor::from_parts(out_shape, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictMethod {
    Nearest,
    Bilinear,
    Bicubic,
    External,
}

impl FromStr for PredictMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(PredictMethod::Nearest),
            "bilinear" => Ok(PredictMethod::Bilinear),
            "bicubic" => Ok(PredictMethod::Bicubic),
            "external" => Ok(PredictMethod::External),
            other => Err(Error::InvalidArgument(format!(
                "unknown predictor {other:?}"
            ))),
        }
    }
}

/// An `s`-times upsampled raw prediction to feed into PD.
pub fn predict_raw(
    y: &ImageTensor,
    method: PredictMethod,
    s: usize,
    external_path: Option<&Path>,
) -> Result<ImageTensor> {
    match method {
        PredictMethod::Nearest => pool_up(y, s),
        PredictMethod::Bilinear => resample(y, &ResampleSpec::up(Filter::Bilinear, s)),
        PredictMethod::Bicubic => resample(y, &ResampleSpec::up(Filter::Bicubic, s)),
        PredictMethod::External => {
            let path = external_path.ok_or_else(|| {
                Error::InvalidArgument("external predictor needs a file path".into())
            })?;
            let raw = load_any(path)?;
            raw.expect_shape(Shape::new(y.channels(), y.height() * s, y.width() * s))?;
            Ok(raw)
        }
    }
}
