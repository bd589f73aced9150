//! Colorization and block compressed sensing operators, both with exact
//! pseudo-inverses, for use with [`generic_pd`](crate::linop::generic_pd).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linop::LinearOperator;
use crate::matrix::Matrix;
use crate::pooling::check_divisible;
use crate::rng::SeededRng;
use crate::svd::svd;
use crate::tensor::{ImageTensor, Shape};

/// Per-pixel channel mean of a 3-channel image.
pub fn color_to_gray(x: &ImageTensor) -> Result<ImageTensor> {
    if x.channels() != 3 {
        return Err(Error::InvalidArgument(format!(
            "color_to_gray needs 3 channels, got {}",
            x.shape()
        )));
    }
    let (r, g, b) = (x.plane(0), x.plane(1), x.plane(2));
    let data = (0..r.len()).map(|i| (r[i] + g[i] + b[i]) / 3.0).collect();
    Ok(ImageTensor::from_parts(
        Shape::new(1, x.height(), x.width()),
        data,
    ))
}

fn gray_to_color_scaled(g: &ImageTensor, coef: f64) -> Result<ImageTensor> {
    if g.channels() != 1 {
        return Err(Error::InvalidArgument(format!(
            "gray_to_color needs 1 channel, got {}",
            g.shape()
        )));
    }
    let plane: Vec<f64> = g.data().iter().map(|v| v * coef).collect();
    let mut data = Vec::with_capacity(plane.len() * 3);
    for _ in 0..3 {
        data.extend_from_slice(&plane);
    }
    Ok(ImageTensor::from_parts(
        Shape::new(3, g.height(), g.width()),
        data,
    ))
}

/// Moore-Penrose pseudo-inverse of the channel mean: copy gray into all
/// three channels.
pub fn gray_to_color(g: &ImageTensor) -> Result<ImageTensor> {
    gray_to_color_scaled(g, 1.0)
}

/// Scales gray by 1/3 into each channel. This is the scaled adjoint of the
/// channel mean, not its pseudo-inverse: `A A+ = I/3`.
pub fn gray_to_color_listing(g: &ImageTensor) -> Result<ImageTensor> {
    gray_to_color_scaled(g, 1.0 / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ColorPinv {
    MoorePenrose,
    /// The 1/3-scaled back-projection; breaks `A A+ A = A`.
    Listing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColorMeanOp {
    height: usize,
    width: usize,
    pinv: ColorPinv,
}

impl ColorMeanOp {
    pub fn new(height: usize, width: usize) -> Self {
        ColorMeanOp {
            height,
            width,
            pinv: ColorPinv::MoorePenrose,
        }
    }

    pub fn with_listing_pinv(height: usize, width: usize) -> Self {
        ColorMeanOp {
            height,
            width,
            pinv: ColorPinv::Listing,
        }
    }
}

impl LinearOperator for ColorMeanOp {
    fn in_shape(&self) -> Shape {
        Shape::new(3, self.height, self.width)
    }
    fn out_shape(&self) -> Shape {
        Shape::new(1, self.height, self.width)
    }
    fn apply_forward(&self, x: &ImageTensor) -> ImageTensor {
        color_to_gray(x).expect("shape checked")
    }
    fn apply_pinv(&self, y: &ImageTensor) -> ImageTensor {
        match self.pinv {
            ColorPinv::MoorePenrose => gray_to_color(y),
            ColorPinv::Listing => gray_to_color_listing(y),
        }
        .expect("shape checked")
    }
}

pub const SENSE_MAGIC: &[u8; 4] = b"PDM1";
pub const DEFAULT_BLOCK: usize = 8;

/// Block compressed sensing: every `B x B` block of every channel, flattened
/// row-major, is measured by `q` orthonormal rows.
///
/// The rows are the first `q` rows of the orthogonal polar factor `U V^T` of
/// a seeded `B^2 x B^2` Gaussian matrix (row-major fill from
/// [`SeededRng::gaussian`]), so `rows rows^T = I_q` and `rows^T` is the
/// pseudo-inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSenseOp {
    block: usize,
    seed: u64,
    rows: Matrix,
}

pub fn measurement_count(block: usize, ratio: f64) -> usize {
    let n = block * block;
    ((ratio * n as f64).ceil() as usize).clamp(1, n)
}

pub fn cs_build(block: usize, ratio: f64, seed: u64) -> Result<BlockSenseOp> {
    if block == 0 {
        return Err(Error::InvalidArgument(
            "block size must be at least 1".into(),
        ));
    }
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "sampling ratio must be in (0, 1], got {ratio}"
        )));
    }
    let n = block * block;
    let q = measurement_count(block, ratio);
    let mut rng = SeededRng::new(seed);
    let gaussian = Matrix::from_fn(n, n, |_, _| rng.gaussian());
    let f = svd(&gaussian)?;
    let polar = f.u.matmul(&f.v.transpose())?;
    let rows = Matrix::from_fn(q, n, |i, j| polar[(i, j)]);
    Ok(BlockSenseOp { block, seed, rows })
}

impl BlockSenseOp {
    /// Wraps explicit sampling rows (`q x B^2`). Orthonormality is the
    /// caller's responsibility; see [`BlockSenseOp::orthonormality_error`].
    pub fn from_rows(block: usize, seed: u64, rows: Matrix) -> Result<Self> {
        if block == 0
            || rows.cols() != block * block
            || rows.rows() == 0
            || rows.rows() > rows.cols()
        {
            return Err(Error::InvalidArgument(format!(
                "sampling rows for block {block} must be q x {} with 1 <= q <= {}, got {}x{}",
                block * block,
                block * block,
                rows.rows(),
                rows.cols()
            )));
        }
        Ok(BlockSenseOp { block, seed, rows })
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn q(&self) -> usize {
        self.rows.rows()
    }

    pub fn rows(&self) -> &Matrix {
        &self.rows
    }

    pub fn ratio(&self) -> f64 {
        self.q() as f64 / (self.block * self.block) as f64
    }

    /// `max |rows rows^T - I_q|`.
    pub fn orthonormality_error(&self) -> f64 {
        self.rows
            .matmul(&self.rows.transpose())
            .expect("square product")
            .max_abs_diff(&Matrix::identity(self.q()))
    }

    pub fn measurement_shape(&self, image: Shape) -> Result<Shape> {
        let b = self.block;
        check_divisible(image, b)?;
        Ok(Shape::new(
            image.channels * self.q(),
            image.height / b,
            image.width / b,
        ))
    }

    /// Channel `c * q + k` of the result holds measurement `k` of channel `c`.
    pub fn measure(&self, x: &ImageTensor) -> Result<ImageTensor> {
        let out_shape = self.measurement_shape(x.shape())?;
        let (b, q, w) = (self.block, self.q(), x.width());
        let (bh, bw) = (out_shape.height, out_shape.width);
        let mut out = vec![0.0; out_shape.len()];
        let mut patch = vec![0.0; b * b];
        for c in 0..x.channels() {
            let plane = x.plane(c);
            for bi in 0..bh {
                for bj in 0..bw {
                    for a in 0..b {
                        let src = (bi * b + a) * w + bj * b;
                        patch[a * b..(a + 1) * b].copy_from_slice(&plane[src..src + b]);
                    }
                    for k in 0..q {
                        let m: f64 = self
                            .rows
                            .row(k)
                            .iter()
                            .zip(&patch)
                            .map(|(r, p)| r * p)
                            .sum();
                        out[((c * q + k) * bh + bi) * bw + bj] = m;
                    }
                }
            }
        }
        Ok(ImageTensor::from_parts(out_shape, out))
    }

    /// Blockwise `rows^T m`.
    pub fn back_project(&self, m: &ImageTensor) -> Result<ImageTensor> {
        let (b, q) = (self.block, self.q());
        if !m.channels().is_multiple_of(q) {
            return Err(Error::InvalidArgument(format!(
                "measurement tensor {} has a channel count that is not a multiple of q = {q}",
                m.shape()
            )));
        }
        let channels = m.channels() / q;
        let (bh, bw) = (m.height(), m.width());
        let out_shape = Shape::new(channels, bh * b, bw * b);
        let w = bw * b;
        let mut out = vec![0.0; out_shape.len()];
        let mut patch = vec![0.0; b * b];
        for c in 0..channels {
            let plane = &mut out[c * out_shape.plane_len()..(c + 1) * out_shape.plane_len()];
            for bi in 0..bh {
                for bj in 0..bw {
                    patch.iter_mut().for_each(|p| *p = 0.0);
                    for k in 0..q {
                        let coef = m.data()[((c * q + k) * bh + bi) * bw + bj];
                        for (p, r) in patch.iter_mut().zip(self.rows.row(k)) {
                            *p += coef * r;
                        }
                    }
                    for a in 0..b {
                        let dst = (bi * b + a) * w + bj * b;
                        plane[dst..dst + b].copy_from_slice(&patch[a * b..(a + 1) * b]);
                    }
                }
            }
        }
        Ok(ImageTensor::from_parts(out_shape, out))
    }

    /// This operator fixed to one image shape, as a [`LinearOperator`].
    pub fn on_shape(&self, image: Shape) -> Result<BlockSenseImageOp<'_>> {
        let out = self.measurement_shape(image)?;
        Ok(BlockSenseImageOp {
            sense: self,
            in_shape: image,
            out_shape: out,
        })
    }

    /// `PDM1`: magic, `u32` block, `u32` q, `u64` seed, then `q * B^2`
    /// little-endian `f64` row weights, all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(20 + self.rows.data().len() * 8);
        out.extend_from_slice(SENSE_MAGIC);
        out.extend_from_slice(&(self.block as u32).to_le_bytes());
        out.extend_from_slice(&(self.q() as u32).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        for v in self.rows.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::BadFormat {
            path: path.to_path_buf(),
            reason,
        };
        if bytes.len() < 20 || &bytes[..4] != SENSE_MAGIC {
            return Err(bad("missing PDM1 magic".into()));
        }
        let block = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let q = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let seed = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
        let n = block * block;
        if bytes.len() - 20 != q * n * 8 {
            return Err(bad(format!(
                "expected {} bytes of row weights for B={block}, q={q}, found {}",
                q * n * 8,
                bytes.len() - 20
            )));
        }
        let data: Vec<f64> = bytes[20..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(bad("non-finite row weight".into()));
        }
        let rows = Matrix::from_vec(q, n, data)?;
        Self::from_rows(block, seed, rows).map_err(|e| bad(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut f = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        f.write_all(&self.to_bytes())
            .and_then(|_| f.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

pub fn cs_measure(op: &BlockSenseOp, x: &ImageTensor) -> Result<ImageTensor> {
    op.measure(x)
}

pub fn cs_pinv(op: &BlockSenseOp, m: &ImageTensor) -> Result<ImageTensor> {
    op.back_project(m)
}

#[derive(Debug, Clone, Copy)]
pub struct BlockSenseImageOp<'a> {
    sense: &'a BlockSenseOp,
    in_shape: Shape,
    out_shape: Shape,
}

impl LinearOperator for BlockSenseImageOp<'_> {
    fn in_shape(&self) -> Shape {
        self.in_shape
    }
    fn out_shape(&self) -> Shape {
        self.out_shape
    }
    fn apply_forward(&self, x: &ImageTensor) -> ImageTensor {
        self.sense.measure(x).expect("shape checked")
    }
    fn apply_pinv(&self, y: &ImageTensor) -> ImageTensor {
        self.sense.back_project(y).expect("shape checked")
    }
}
