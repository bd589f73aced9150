//! Linear operators with an exact pseudo-inverse, and the range/null space
//! projections built on them.
//!
//! For an operator `A` with pseudo-inverse `A+`, any `x` splits as
//! `A+ A x + (I - A+ A) x`. The first part is fixed by the observation
//! `A x`; the second is invisible to `A`.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::SeededRng;
use crate::svd::{pinv_from_svd, svd, DEFAULT_PINV_TOL};
use crate::tensor::{ImageTensor, Shape};

pub trait LinearOperator {
    fn in_shape(&self) -> Shape;
    fn out_shape(&self) -> Shape;

    /// `A x`. Implementations may assume `x` already has `in_shape`.
    fn apply_forward(&self, x: &ImageTensor) -> ImageTensor;

    /// `A+ y`. Implementations may assume `y` already has `out_shape`.
    fn apply_pinv(&self, y: &ImageTensor) -> ImageTensor;

    fn forward(&self, x: &ImageTensor) -> Result<ImageTensor> {
        x.expect_shape(self.in_shape())?;
        Ok(self.apply_forward(x))
    }

    fn pinv(&self, y: &ImageTensor) -> Result<ImageTensor> {
        y.expect_shape(self.out_shape())?;
        Ok(self.apply_pinv(y))
    }
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn in_shape(&self) -> Shape {
        (**self).in_shape()
    }
    fn out_shape(&self) -> Shape {
        (**self).out_shape()
    }
    fn apply_forward(&self, x: &ImageTensor) -> ImageTensor {
        (**self).apply_forward(x)
    }
    fn apply_pinv(&self, y: &ImageTensor) -> ImageTensor {
        (**self).apply_pinv(y)
    }
}

/// `A+ A x`.
pub fn range_project(op: &impl LinearOperator, x: &ImageTensor) -> Result<ImageTensor> {
    let y = op.forward(x)?;
    Ok(op.apply_pinv(&y))
}

/// `x - A+ A x`.
pub fn null_project(op: &impl LinearOperator, x: &ImageTensor) -> Result<ImageTensor> {
    let r = range_project(op, x)?;
    x.sub(&r)
}

/// Consistent solution `A+ y + (I - A+ A) x_raw`: keeps the null-space part
/// of `x_raw` and takes the range-space part from `y`.
pub fn generic_pd(
    op: &impl LinearOperator,
    y: &ImageTensor,
    x_raw: &ImageTensor,
) -> Result<ImageTensor> {
    let base = op.pinv(y)?;
    let null = null_project(op, x_raw)?;
    base.add(&null)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MpResiduals {
    /// `A A+ A - A`
    pub r1: f64,
    /// `A+ A A+ - A+`
    pub r2: f64,
    /// `(A A+)^T - A A+`
    pub r3: f64,
    /// `(A+ A)^T - A+ A`
    pub r4: f64,
}

impl MpResiduals {
    pub fn max(&self) -> f64 {
        self.r1.max(self.r2).max(self.r3).max(self.r4)
    }
}

/// Monte-Carlo Moore-Penrose diagnostics on seeded Gaussian probes.
///
/// Conditions 1 and 2 are checked by applying both sides to random vectors.
/// The symmetry conditions are checked through the bilinear form: `P` is
/// symmetric iff `u . P w == P u . w` for all `u, w`.
pub fn mp_residuals(op: &impl LinearOperator, trials: usize, seed: u64) -> Result<MpResiduals> {
    if trials == 0 {
        return Err(Error::InvalidArgument(
            "mp_residuals needs at least one trial".into(),
        ));
    }
    let (ins, outs) = (op.in_shape(), op.out_shape());
    let mut rng = SeededRng::new(seed);
    let mut gauss = |shape: Shape| {
        ImageTensor::from_parts(shape, (0..shape.len()).map(|_| rng.gaussian()).collect())
    };
    let dot = |a: &ImageTensor, b: &ImageTensor| -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
    };
    let mut res = MpResiduals {
        r1: 0.0,
        r2: 0.0,
        r3: 0.0,
        r4: 0.0,
    };
    for _ in 0..trials {
        let x = gauss(ins);
        let ax = op.apply_forward(&x);
        let aapax = op.apply_forward(&op.apply_pinv(&ax));
        res.r1 = res.r1.max(aapax.max_abs_diff(&ax)?);

        let w = gauss(outs);
        let pw = op.apply_pinv(&w);
        let papw = op.apply_pinv(&op.apply_forward(&pw));
        res.r2 = res.r2.max(papw.max_abs_diff(&pw)?);

        let w2 = gauss(outs);
        let aap = |v: &ImageTensor| op.apply_forward(&op.apply_pinv(v));
        res.r3 = res.r3.max((dot(&w2, &aap(&w)) - dot(&aap(&w2), &w)).abs());

        let x2 = gauss(ins);
        let paa = |v: &ImageTensor| op.apply_pinv(&op.apply_forward(v));
        res.r4 = res.r4.max((dot(&x2, &paa(&x)) - dot(&paa(&x2), &x)).abs());
    }
    Ok(res)
}

/// Identity on a fixed shape.
#[derive(Debug, Clone, Copy)]
pub struct IdentityOp {
    pub shape: Shape,
}

impl LinearOperator for IdentityOp {
    fn in_shape(&self) -> Shape {
        self.shape
    }
    fn out_shape(&self) -> Shape {
        self.shape
    }
    fn apply_forward(&self, x: &ImageTensor) -> ImageTensor {
        x.clone()
    }
    fn apply_pinv(&self, y: &ImageTensor) -> ImageTensor {
        y.clone()
    }
}

/// An arbitrary dense matrix with its SVD pseudo-inverse. Inputs are
/// `1 x 1 x D` tensors, outputs `1 x 1 x d`; any tensor with `D` samples can
/// be reshaped to fit.
#[derive(Debug, Clone)]
pub struct DenseOp {
    matrix: Matrix,
    pinv: Matrix,
}

impl DenseOp {
    pub fn new(matrix: Matrix) -> Result<Self> {
        Self::with_tolerance(matrix, DEFAULT_PINV_TOL)
    }

    pub fn with_tolerance(matrix: Matrix, tol: f64) -> Result<Self> {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "pseudo-inverse tolerance must be in (0, 1), got {tol}"
            )));
        }
        let pinv = pinv_from_svd(&svd(&matrix)?, tol);
        Ok(DenseOp { matrix, pinv })
    }

    /// Pairs a matrix with a caller-supplied pseudo-inverse (not checked).
    pub fn with_pinv(matrix: Matrix, pinv: Matrix) -> Result<Self> {
        if pinv.rows() != matrix.cols() || pinv.cols() != matrix.rows() {
            return Err(Error::InvalidArgument(format!(
                "pseudo-inverse of a {}x{} matrix must be {}x{}, got {}x{}",
                matrix.rows(),
                matrix.cols(),
                matrix.cols(),
                matrix.rows(),
                pinv.rows(),
                pinv.cols()
            )));
        }
        Ok(DenseOp { matrix, pinv })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn pinv_matrix(&self) -> &Matrix {
        &self.pinv
    }
}

impl LinearOperator for DenseOp {
    fn in_shape(&self) -> Shape {
        Shape::new(1, 1, self.matrix.cols())
    }
    fn out_shape(&self) -> Shape {
        Shape::new(1, 1, self.matrix.rows())
    }
    fn apply_forward(&self, x: &ImageTensor) -> ImageTensor {
        let y = self.matrix.matvec(x.data()).expect("shape checked");
        ImageTensor::from_parts(self.out_shape(), y)
    }
    fn apply_pinv(&self, y: &ImageTensor) -> ImageTensor {
        let x = self.pinv.matvec(y.data()).expect("shape checked");
        ImageTensor::from_parts(self.in_shape(), x)
    }
}
