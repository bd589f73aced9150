//! Pixel-wise comparison and error-map rendering.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{ImageTensor, Shape};

/// PSNR reported for identical inputs.
pub const PSNR_CAP: f64 = 300.0;
pub const DEFAULT_ERROR_GAIN: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    /// dB against peak 1.0, capped at [`PSNR_CAP`].
    pub psnr: f64,
    pub l1: f64,
    pub mse: f64,
    pub max_abs: f64,
    pub pixel_count: usize,
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse > 0.0 {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    } else {
        PSNR_CAP
    }
}

/// Sums run left to right over the planar sample order.
pub fn compare(a: &ImageTensor, b: &ImageTensor) -> Result<ConsistencyReport> {
    b.expect_shape(a.shape())?;
    let n = a.data().len();
    let (mut abs_sum, mut sq_sum, mut max_abs) = (0.0, 0.0, 0.0f64);
    for (x, y) in a.data().iter().zip(b.data()) {
        let d = (x - y).abs();
        abs_sum += d;
        sq_sum += d * d;
        max_abs = max_abs.max(d);
    }
    let mse = sq_sum / n as f64;
    Ok(ConsistencyReport {
        psnr: psnr_from_mse(mse),
        l1: abs_sum / n as f64,
        mse,
        max_abs,
        pixel_count: n,
    })
}

/// Black -> red -> yellow -> white, piecewise linear with breakpoints at
/// 0, 1/3, 2/3 and 1. Each output channel is non-decreasing in `m`.
pub fn color_ramp(m: f64) -> [f64; 3] {
    let t = 3.0 * m.clamp(0.0, 1.0);
    [
        t.min(1.0),
        (t - 1.0).clamp(0.0, 1.0),
        (t - 2.0).clamp(0.0, 1.0),
    ]
}

/// Per-pixel magnitude `mean_c min(gain * |gt - sr|, 1)`, as a one-channel tensor.
pub fn error_magnitude(gt: &ImageTensor, sr: &ImageTensor, gain: f64) -> Result<ImageTensor> {
    sr.expect_shape(gt.shape())?;
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "gain must be positive, got {gain}"
        )));
    }
    let shape = gt.shape();
    let n = shape.plane_len();
    let mut mag = vec![0.0; n];
    for c in 0..shape.channels {
        for (m, (a, b)) in mag.iter_mut().zip(gt.plane(c).iter().zip(sr.plane(c))) {
            *m += (gain * (a - b).abs()).min(1.0);
        }
    }
    let k = shape.channels as f64;
    mag.iter_mut().for_each(|m| *m /= k);
    Ok(ImageTensor::from_parts(
        Shape::new(1, shape.height, shape.width),
        mag,
    ))
}

/// Amplified absolute error rendered through [`color_ramp`] as an RGB tensor.
pub fn error_map(gt: &ImageTensor, sr: &ImageTensor, gain: f64) -> Result<ImageTensor> {
    let mag = error_magnitude(gt, sr, gain)?;
    let n = mag.data().len();
    let mut out = vec![0.0; 3 * n];
    for (i, &m) in mag.data().iter().enumerate() {
        let rgb = color_ramp(m);
        for c in 0..3 {
            out[c * n + i] = rgb[c];
        }
    }
    Ok(ImageTensor::from_parts(
        Shape::new(3, mag.height(), mag.width()),
        out,
    ))
}
