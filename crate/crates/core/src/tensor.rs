//! Planar floating-point image tensors.
//!
//! Samples are stored channel-major, then row-major within each plane. The
//! nominal range is `[0, 1]`, but intermediates (null-space residuals, PD
//! outputs before truncation) routinely leave it, so no clamping happens here
//! except in [`ImageTensor::quantize`].

use std::fmt;

use crate::error::{Error, Result};

/// `(channels, height, width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Shape {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape {
    pub const fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape {
            channels,
            height,
            width,
        }
    }

    pub const fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub const fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.channels, self.height, self.width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl ImageTensor {
    /// Builds a tensor, checking the length and finiteness of `data`.
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        let shape = Shape::new(channels, height, width);
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidTensor(format!(
                "all dimensions must be at least 1, got {shape}"
            )));
        }
        if data.len() != shape.len() {
            return Err(Error::InvalidTensor(format!(
                "{shape} needs {} samples, got {}",
                shape.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidTensor(format!(
                "non-finite sample {} at index {i}",
                data[i]
            )));
        }
        Ok(ImageTensor { shape, data })
    }

    pub fn from_shape(shape: Shape, data: Vec<f64>) -> Result<Self> {
        Self::new(shape.channels, shape.height, shape.width, data)
    }

    pub fn zeros(shape: Shape) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: Shape, value: f64) -> Self {
        assert!(!shape.is_empty(), "empty shape {shape}");
        ImageTensor {
            shape,
            data: vec![value; shape.len()],
        }
    }

    /// Builds a tensor from a per-sample function of `(channel, row, col)`.
    pub fn from_fn(shape: Shape, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(shape.len());
        for c in 0..shape.channels {
            for r in 0..shape.height {
                for col in 0..shape.width {
                    data.push(f(c, r, col));
                }
            }
        }
        Self::from_shape(shape, data)
    }

    /// Crate-internal constructor for results of arithmetic on valid tensors.
    pub(crate) fn from_parts(shape: Shape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        ImageTensor { shape, data }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn height(&self) -> usize {
        self.shape.height
    }

    pub fn width(&self) -> usize {
        self.shape.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.shape.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, row: usize, col: usize) -> f64 {
        self.data[(c * self.shape.height + row) * self.shape.width + col]
    }

    pub fn expect_shape(&self, expected: Shape) -> Result<()> {
        if self.shape != expected {
            return Err(Error::ShapeMismatch {
                expected,
                actual: self.shape,
            });
        }
        Ok(())
    }

    /// Same data, reinterpreted under another shape with the same sample count.
    pub fn reshape(self, shape: Shape) -> Result<Self> {
        if shape.len() != self.data.len() || shape.is_empty() {
            return Err(Error::ShapeMismatch {
                expected: shape,
                actual: self.shape,
            });
        }
        Ok(ImageTensor {
            shape,
            data: self.data,
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(self.shape, self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        other.expect_shape(self.shape)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::from_parts(self.shape, data))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> Self {
        self.map(|v| v * k)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        other.expect_shape(self.shape)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs())))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    /// Models conversion to 8-bit image format: clamp to `[0, 1]`, round to
    /// the nearest multiple of 1/255 (ties away from zero).
    pub fn quantize(&self) -> Self {
        self.map(|v| f64::from(quantize_sample(v)) / 255.0)
    }
}

/// `round(clamp(v, 0, 1) * 255)` with ties away from zero.
pub fn quantize_sample(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}
