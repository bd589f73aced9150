//! Range-null space decomposition for linear image degradations.
//!
//! A degradation `A` with pseudo-inverse `A+` splits any image into a part
//! determined by the observation `y = A x` and a part `A` cannot see. Keeping
//! the first from `y` and the second from an arbitrary raw prediction gives a
//! result that reproduces `y` exactly under `A`. For average pooling the
//! pseudo-inverse is block replication, which makes the combine step
//! ([`pooling::pd_combine`]) a few additions per pixel.

pub mod cli;
pub mod error;
pub mod io;
pub mod linop;
pub mod matrix;
pub mod metrics;
pub mod pooling;
pub mod protocol;
pub mod resample;
pub mod restore;
pub mod rng;
pub mod svd;
pub mod tensor;

pub use error::{Error, Result};
pub use linop::{
    generic_pd, mp_residuals, null_project, range_project, DenseOp, IdentityOp, LinearOperator,
    MpResiduals,
};
pub use matrix::Matrix;
pub use metrics::{compare, error_map, ConsistencyReport};
pub use pooling::{
    extract_highfreq, pd_combine, pool_down, pool_up, verify_consistency, PoolingOp,
};
pub use resample::{predict_raw, resample, Filter, PredictMethod, ResampleSpec};
pub use restore::{
    color_to_gray, cs_build, cs_measure, cs_pinv, gray_to_color, BlockSenseOp, ColorMeanOp,
};
pub use svd::{pinv_from_svd, svd, SvdFactors};
pub use tensor::{ImageTensor, Shape};
