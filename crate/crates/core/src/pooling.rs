//! Average pooling, block replication, and the pooling-based decomposition.
//!
//! `pool_down` averages non-overlapping `s x s` blocks; `pool_up` copies each
//! pixel into an `s x s` block. Per patch the pair is `A = (1/s^2, ..., 1/s^2)`
//! and `A+ = (1, ..., 1)^T`, so `pool_down(pool_up(y)) == y` and the PD
//! output `pool_up(y) + x_raw - pool_up(pool_down(x_raw))` averages back to
//! `y` for any raw prediction.
//!
//! Kernels work on raw planes and are generic over the float type so the
//! same code runs in single precision for comparison. Each patch is summed
//! row by row in a fixed order, so results do not depend on how channels are
//! scheduled.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::linop::LinearOperator;
use crate::metrics::{compare, ConsistencyReport};
use crate::tensor::{ImageTensor, Shape};

pub fn check_divisible(shape: Shape, s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::InvalidArgument("scale must be at least 1".into()));
    }
    if !shape.height.is_multiple_of(s) {
        return Err(Error::NotDivisible {
            dim: "height",
            size: shape.height,
            scale: s,
        });
    }
    if !shape.width.is_multiple_of(s) {
        return Err(Error::NotDivisible {
            dim: "width",
            size: shape.width,
            scale: s,
        });
    }
    Ok(())
}

/// Averages `s x s` blocks of one `h x w` plane into `dst` (`h/s x w/s`).
pub fn pool_down_plane<T: Float>(src: &[T], h: usize, w: usize, s: usize, dst: &mut [T]) {
    let (lh, lw) = (h / s, w / s);
    debug_assert_eq!(src.len(), h * w);
    debug_assert_eq!(dst.len(), lh * lw);
    let inv = T::from(s * s).unwrap().recip();
    for i in 0..lh {
        for j in 0..lw {
            let mut acc = T::zero();
            for r in i * s..(i + 1) * s {
                for &v in &src[r * w + j * s..r * w + (j + 1) * s] {
                    acc = acc + v;
                }
            }
            dst[i * lw + j] = acc * inv;
        }
    }
}

/// Replicates each pixel of an `lh x lw` plane into an `s x s` block.
pub fn pool_up_plane<T: Float>(src: &[T], lh: usize, lw: usize, s: usize, dst: &mut [T]) {
    let w = lw * s;
    debug_assert_eq!(src.len(), lh * lw);
    debug_assert_eq!(dst.len(), lh * s * w);
    for r in 0..lh * s {
        let lo = &src[(r / s) * lw..(r / s + 1) * lw];
        for (j, out) in dst[r * w..(r + 1) * w].iter_mut().enumerate() {
            *out = lo[j / s];
        }
    }
}

/// PD on one plane: `up(y) + x_raw - up(down(x_raw))`, written to `dst`.
pub fn pd_combine_plane<T: Float>(
    y: &[T],
    x_raw: &[T],
    lh: usize,
    lw: usize,
    s: usize,
    dst: &mut [T],
) {
    let (h, w) = (lh * s, lw * s);
    let mut means = vec![T::zero(); lh * lw];
    pool_down_plane(x_raw, h, w, s, &mut means);
    for r in 0..h {
        let li = r / s;
        for c in 0..w {
            let k = li * lw + c / s;
            dst[r * w + c] = y[k] + (x_raw[r * w + c] - means[k]);
        }
    }
}

fn per_plane(input: &ImageTensor, out_shape: Shape, f: impl Fn(&[f64], &mut [f64])) -> ImageTensor {
    let n = out_shape.plane_len();
    let mut out = vec![0.0; out_shape.len()];
    for (c, dst) in out.chunks_exact_mut(n).enumerate() {
        f(input.plane(c), dst);
    }
    ImageTensor::from_parts(out_shape, out)
}

pub fn pool_down(x: &ImageTensor, s: usize) -> Result<ImageTensor> {
    check_divisible(x.shape(), s)?;
    let (h, w) = (x.height(), x.width());
    let out = Shape::new(x.channels(), h / s, w / s);
    Ok(per_plane(x, out, |src, dst| {
        pool_down_plane(src, h, w, s, dst)
    }))
}

pub fn pool_up(y: &ImageTensor, s: usize) -> Result<ImageTensor> {
    if s == 0 {
        return Err(Error::InvalidArgument("scale must be at least 1".into()));
    }
    let (lh, lw) = (y.height(), y.width());
    let out = Shape::new(y.channels(), lh * s, lw * s);
    Ok(per_plane(y, out, |src, dst| {
        pool_up_plane(src, lh, lw, s, dst)
    }))
}

fn check_pd_shapes(y: &ImageTensor, x_hr: &ImageTensor, s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::InvalidArgument("scale must be at least 1".into()));
    }
    x_hr.expect_shape(Shape::new(y.channels(), y.height() * s, y.width() * s))
}

/// Pooling-based decomposition: `pool_up(y) + x_raw - pool_up(pool_down(x_raw))`.
///
/// The result's `s x s` block means equal `y` up to rounding, whatever
/// `x_raw` holds (it may leave `[0, 1]`).
pub fn pd_combine(y: &ImageTensor, x_raw: &ImageTensor, s: usize) -> Result<ImageTensor> {
    check_pd_shapes(y, x_raw, s)?;
    let (lh, lw) = (y.height(), y.width());
    let n = x_raw.shape().plane_len();
    let mut out = vec![0.0; x_raw.shape().len()];
    for (c, dst) in out.chunks_exact_mut(n).enumerate() {
        pd_combine_plane(y.plane(c), x_raw.plane(c), lh, lw, s, dst);
    }
    Ok(ImageTensor::from_parts(x_raw.shape(), out))
}

/// The high-frequency (null-space) part `x - pool_up(pool_down(x))`.
pub fn extract_highfreq(x: &ImageTensor, s: usize) -> Result<ImageTensor> {
    let low = pool_up(&pool_down(x, s)?, s)?;
    x.sub(&low)
}

/// Compares `y` with `pool_down(x_hat)`.
pub fn verify_consistency(
    y: &ImageTensor,
    x_hat: &ImageTensor,
    s: usize,
) -> Result<ConsistencyReport> {
    check_pd_shapes(y, x_hat, s)?;
    compare(y, &pool_down(x_hat, s)?)
}

/// Average pooling as a [`LinearOperator`] on a fixed input shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolingOp {
    scale: usize,
    in_shape: Shape,
}

impl PoolingOp {
    pub fn new(scale: usize, in_shape: Shape) -> Result<Self> {
        check_divisible(in_shape, scale)?;
        Ok(PoolingOp { scale, in_shape })
    }

    pub fn scale(&self) -> usize {
        self.scale
    }
}

impl LinearOperator for PoolingOp {
    fn in_shape(&self) -> Shape {
        self.in_shape
    }

    fn out_shape(&self) -> Shape {
        let s = self.scale;
        Shape::new(
            self.in_shape.channels,
            self.in_shape.height / s,
            self.in_shape.width / s,
        )
    }

    fn apply_forward(&self, x: &ImageTensor) -> ImageTensor {
        pool_down(x, self.scale).expect("shape checked")
    }

    fn apply_pinv(&self, y: &ImageTensor) -> ImageTensor {
        pool_up(y, self.scale).expect("scale checked")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::{mp_residuals, null_project, range_project};
    use crate::rng::SeededRng;
    use proptest::prelude::*;

    fn t(c: usize, h: usize, w: usize, v: &[f64]) -> ImageTensor {
        ImageTensor::new(c, h, w, v.to_vec()).unwrap()
    }

    #[test]
    fn pool_down_examples() {
        let x = t(1, 2, 2, &[1.0, 2.0, 3.0, 6.0]);
        assert_eq!(pool_down(&x, 1).unwrap(), x);
        assert_eq!(pool_down(&x, 2).unwrap().data(), &[3.0]);
        let c = ImageTensor::filled(Shape::new(2, 4, 6), 0.7);
        let d = pool_down(&c, 2).unwrap();
        assert_eq!(d.shape(), Shape::new(2, 2, 3));
        assert!(d.data().iter().all(|v| (v - 0.7).abs() < 1e-15));
    }

    #[test]
    fn pool_down_rejects_non_divisible() {
        let x = ImageTensor::zeros(Shape::new(1, 4, 6));
        assert!(matches!(
            pool_down(&x, 4),
            Err(Error::NotDivisible { dim: "width", .. })
        ));
        assert!(matches!(
            pool_down(&ImageTensor::zeros(Shape::new(1, 5, 6)), 2),
            Err(Error::NotDivisible { dim: "height", .. })
        ));
        assert!(pool_down(&x, 0).is_err());
    }

    #[test]
    fn pool_up_examples() {
        let y = t(1, 1, 1, &[4.0]);
        assert_eq!(pool_up(&y, 1).unwrap(), y);
        assert_eq!(pool_up(&y, 2).unwrap().data(), &[4.0; 4]);
        let y = t(1, 1, 2, &[0.25, 0.75]);
        let up = pool_up(&y, 3).unwrap();
        assert_eq!(up.shape(), Shape::new(1, 3, 6));
        for r in 0..3 {
            for c in 0..6 {
                assert_eq!(up.get(0, r, c), if c < 3 { 0.25 } else { 0.75 });
            }
        }
    }

    #[test]
    fn pd_combine_examples() {
        let y = t(1, 1, 1, &[4.0]);
        let raw = t(1, 2, 2, &[1.0, 2.0, 3.0, 6.0]);
        let out = pd_combine(&y, &raw, 2).unwrap();
        assert_eq!(out.data(), &[2.0, 3.0, 4.0, 7.0]);
        assert_eq!(pool_down(&out, 2).unwrap().data(), &[4.0]);

        // already consistent prediction is left alone
        let y = pool_down(&raw, 2).unwrap();
        assert!(pd_combine(&y, &raw, 2).unwrap().max_abs_diff(&raw).unwrap() <= 1e-12);
    }

    #[test]
    fn pd_combine_shape_errors() {
        let y = ImageTensor::zeros(Shape::new(1, 2, 2));
        assert!(pd_combine(&y, &ImageTensor::zeros(Shape::new(1, 4, 2)), 2).is_err());
        assert!(pd_combine(&y, &ImageTensor::zeros(Shape::new(3, 4, 4)), 2).is_err());
        assert!(pd_combine(&y, &ImageTensor::zeros(Shape::new(1, 4, 4)), 0).is_err());
    }

    #[test]
    fn highfreq_examples() {
        let x = t(1, 2, 2, &[1.0, 2.0, 3.0, 6.0]);
        assert_eq!(
            extract_highfreq(&x, 2).unwrap().data(),
            &[-2.0, -1.0, 0.0, 3.0]
        );
        let c = ImageTensor::filled(Shape::new(1, 4, 4), 0.3);
        assert!(extract_highfreq(&c, 2).unwrap().max_abs() == 0.0);
        assert!(extract_highfreq(&ImageTensor::zeros(Shape::new(1, 3, 4)), 2).is_err());
    }

    #[test]
    fn verify_consistency_examples() {
        let mut rng = SeededRng::new(3);
        let y = rng.uniform_tensor(Shape::new(3, 4, 5), 0.0, 1.0);
        let up = pool_up(&y, 4).unwrap();
        assert_eq!(verify_consistency(&y, &up, 4).unwrap().psnr, 300.0);

        let raw = rng.uniform_tensor(Shape::new(3, 16, 20), -3.0, 3.0);
        let r = verify_consistency(&y, &pd_combine(&y, &raw, 4).unwrap(), 4).unwrap();
        assert!(r.max_abs <= 1e-12 && r.psnr >= 240.0, "{r:?}");

        let off = y.map(|v| v + 0.01);
        let r = verify_consistency(&y, &off, 1).unwrap();
        assert!((r.mse - 1e-4).abs() < 1e-12);
        assert!((r.psnr - 40.0).abs() < 1e-6);
    }

    #[test]
    fn pooling_op_is_exact_mp_pair() {
        let op = PoolingOp::new(2, Shape::new(1, 4, 4)).unwrap();
        let r = mp_residuals(&op, 20, 9).unwrap();
        assert!(r.max() <= 1e-12, "{r:?}");
        let x = t(1, 2, 2, &[1.0, 2.0, 3.0, 6.0]);
        let op = PoolingOp::new(2, x.shape()).unwrap();
        assert_eq!(range_project(&op, &x).unwrap().data(), &[3.0; 4]);
        assert_eq!(
            null_project(&op, &x).unwrap().data(),
            &[-2.0, -1.0, 0.0, 3.0]
        );
        assert!(PoolingOp::new(3, Shape::new(1, 4, 4)).is_err());
    }

    #[test]
    fn single_precision_kernels_agree() {
        let mut rng = SeededRng::new(1);
        let y = rng.uniform_tensor(Shape::new(1, 4, 4), 0.0, 1.0);
        let raw = rng.uniform_tensor(Shape::new(1, 16, 16), 0.0, 1.0);
        let y32: Vec<f32> = y.data().iter().map(|&v| v as f32).collect();
        let raw32: Vec<f32> = raw.data().iter().map(|&v| v as f32).collect();
        let mut out = vec![0f32; 256];
        pd_combine_plane(&y32, &raw32, 4, 4, 4, &mut out);
        let reference = pd_combine(&y, &raw, 4).unwrap();
        for (a, b) in out.iter().zip(reference.data()) {
            assert!((f64::from(*a) - b).abs() < 1e-5);
        }
    }

    proptest! {
        #[test]
        fn pd_is_consistent(
            s in 1usize..5, lh in 1usize..5, lw in 1usize..5, c in 1usize..4,
            seed in any::<u64>(), spread in 0.0f64..100.0,
        ) {
            let mut rng = SeededRng::new(seed);
            let y = rng.uniform_tensor(Shape::new(c, lh, lw), 0.0, 1.0);
            let raw = rng.uniform_tensor(Shape::new(c, lh * s, lw * s), -spread, 1.0 + spread);
            let out = pd_combine(&y, &raw, s).unwrap();
            let err = pool_down(&out, s).unwrap().max_abs_diff(&y).unwrap();
            // rounding grows with the magnitude of x_raw
            prop_assert!(err <= 1e-12 * (1.0 + spread));
            let split = pool_up(&y, s).unwrap().add(&extract_highfreq(&raw, s).unwrap()).unwrap();
            prop_assert_eq!(out, split);
        }

        #[test]
        fn decomposition_identity(s in 1usize..5, lh in 1usize..4, lw in 1usize..4, seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            let x = rng.uniform_tensor(Shape::new(2, lh * s, lw * s), -1.0, 2.0);
            let low = pool_up(&pool_down(&x, s).unwrap(), s).unwrap();
            let high = extract_highfreq(&x, s).unwrap();
            prop_assert!(low.add(&high).unwrap().max_abs_diff(&x).unwrap() <= 1e-12);
            let hh = extract_highfreq(&high, s).unwrap();
            prop_assert!(hh.max_abs_diff(&high).unwrap() <= 1e-12);
            prop_assert!(pool_down(&high, s).unwrap().max_abs() <= 1e-12);
        }

        #[test]
        fn down_up_is_identity(s in 1usize..6, seed in any::<u64>()) {
            let mut rng = SeededRng::new(seed);
            let y = rng.uniform_tensor(Shape::new(3, 3, 2), -5.0, 5.0);
            let back = pool_down(&pool_up(&y, s).unwrap(), s).unwrap();
            prop_assert!(back.max_abs_diff(&y).unwrap() <= 1e-14);
        }
    }
}
