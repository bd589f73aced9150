//! Python bindings: tensors, PD and its operators, metrics, and file I/O.
//!
//! Tensors cross the boundary as `Tensor` objects; nested `[c][h][w]` lists
//! convert in both directions (`Tensor.from_list`, `Tensor.to_list`), so numpy
//! arrays go through `arr.tolist()` and `np.array(t.to_list())`.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rangenull::linop::generic_pd;
use rangenull::metrics::ConsistencyReport;
use rangenull::protocol::{Precision, Table1Config};
use rangenull::restore::{BlockSenseOp, ColorMeanOp};
use rangenull::{Error, ImageTensor, Matrix, PredictMethod, ResampleSpec, Shape};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io { .. } | Error::PngEncode { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

#[pyclass(name = "Tensor", module = "rangenull_py", frozen, from_py_object)]
#[derive(Clone)]
pub struct PyTensor {
    inner: ImageTensor,
}

impl From<ImageTensor> for PyTensor {
    fn from(inner: ImageTensor) -> Self {
        PyTensor { inner }
    }
}

type PyRes<T> = PyResult<T>;
type Rows = Vec<Vec<f64>>;

fn wrap(r: rangenull::Result<ImageTensor>) -> PyRes<PyTensor> {
    r.map(PyTensor::from).map_err(to_py)
}

#[pymethods]
impl PyTensor {
    /// Planar row-major samples.
    #[new]
    fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> PyRes<Self> {
        wrap(ImageTensor::new(channels, height, width, data))
    }

    #[staticmethod]
    fn from_list(nested: Vec<Vec<Vec<f64>>>) -> PyRes<Self> {
        let c = nested.len();
        let h = nested.first().map_or(0, Vec::len);
        let w = nested.first().and_then(|p| p.first()).map_or(0, Vec::len);
        let mut data = Vec::with_capacity(c * h * w);
        for plane in &nested {
            if plane.len() != h {
                return Err(PyValueError::new_err("ragged channel planes"));
            }
            for row in plane {
                if row.len() != w {
                    return Err(PyValueError::new_err("ragged rows"));
                }
                data.extend_from_slice(row);
            }
        }
        wrap(ImageTensor::new(c, h, w, data))
    }

    #[staticmethod]
    fn filled(channels: usize, height: usize, width: usize, value: f64) -> PyRes<Self> {
        wrap(ImageTensor::new(
            channels,
            height,
            width,
            vec![value; channels * height * width],
        ))
    }

    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        let s = self.inner.shape();
        (s.channels, s.height, s.width)
    }

    fn data(&self) -> Vec<f64> {
        self.inner.data().to_vec()
    }

    fn to_list(&self) -> Vec<Vec<Vec<f64>>> {
        let s = self.inner.shape();
        (0..s.channels)
            .map(|c| {
                self.inner
                    .plane(c)
                    .chunks(s.width)
                    .map(<[f64]>::to_vec)
                    .collect()
            })
            .collect()
    }

    fn get(&self, channel: usize, row: usize, col: usize) -> PyRes<f64> {
        let s = self.inner.shape();
        if channel >= s.channels || row >= s.height || col >= s.width {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.get(channel, row, col))
    }

    fn max_abs_diff(&self, other: &PyTensor) -> PyRes<f64> {
        self.inner.max_abs_diff(&other.inner).map_err(to_py)
    }

    fn quantize(&self) -> PyTensor {
        self.inner.quantize().into()
    }

    fn __add__(&self, other: &PyTensor) -> PyRes<PyTensor> {
        wrap(self.inner.add(&other.inner))
    }

    fn __sub__(&self, other: &PyTensor) -> PyRes<PyTensor> {
        wrap(self.inner.sub(&other.inner))
    }

    fn __eq__(&self, other: &PyTensor) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!("Tensor({})", self.inner.shape())
    }
}

fn report_dict<'py>(py: Python<'py>, r: &ConsistencyReport) -> PyRes<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("psnr", r.psnr)?;
    d.set_item("l1", r.l1)?;
    d.set_item("mse", r.mse)?;
    d.set_item("max_abs", r.max_abs)?;
    d.set_item("pixel_count", r.pixel_count)?;
    Ok(d)
}

#[pyfunction]
fn load_png(path: PathBuf) -> PyRes<PyTensor> {
    wrap(rangenull::io::load_png(path))
}

#[pyfunction]
fn save_png(t: &PyTensor, path: PathBuf) -> PyRes<()> {
    rangenull::io::save_png(&t.inner, path).map_err(to_py)
}

#[pyfunction]
fn read_raw(path: PathBuf) -> PyRes<PyTensor> {
    wrap(rangenull::io::read_raw(path))
}

#[pyfunction]
fn write_raw(t: &PyTensor, path: PathBuf) -> PyRes<()> {
    rangenull::io::write_raw(&t.inner, path).map_err(to_py)
}

#[pyfunction]
fn pool_down(x: &PyTensor, scale: usize) -> PyRes<PyTensor> {
    wrap(rangenull::pool_down(&x.inner, scale))
}

#[pyfunction]
fn pool_up(y: &PyTensor, scale: usize) -> PyRes<PyTensor> {
    wrap(rangenull::pool_up(&y.inner, scale))
}

/// `pool_up(y) + x_raw - pool_up(pool_down(x_raw))`
#[pyfunction]
fn pd_combine(y: &PyTensor, x_raw: &PyTensor, scale: usize) -> PyRes<PyTensor> {
    wrap(rangenull::pd_combine(&y.inner, &x_raw.inner, scale))
}

#[pyfunction]
fn extract_highfreq(x_raw: &PyTensor, scale: usize) -> PyRes<PyTensor> {
    wrap(rangenull::extract_highfreq(&x_raw.inner, scale))
}

#[pyfunction]
fn verify_consistency<'py>(
    py: Python<'py>,
    y: &PyTensor,
    x_hat: &PyTensor,
    scale: usize,
) -> PyRes<Bound<'py, PyDict>> {
    let r = rangenull::verify_consistency(&y.inner, &x_hat.inner, scale).map_err(to_py)?;
    report_dict(py, &r)
}

#[pyfunction]
fn compare<'py>(py: Python<'py>, a: &PyTensor, b: &PyTensor) -> PyRes<Bound<'py, PyDict>> {
    report_dict(py, &rangenull::compare(&a.inner, &b.inner).map_err(to_py)?)
}

#[pyfunction]
#[pyo3(signature = (gt, sr, gain = rangenull::metrics::DEFAULT_ERROR_GAIN))]
fn error_map(gt: &PyTensor, sr: &PyTensor, gain: f64) -> PyRes<PyTensor> {
    wrap(rangenull::error_map(&gt.inner, &sr.inner, gain))
}

#[pyfunction]
#[pyo3(signature = (x, filter, scale, antialias = false, direction = "down"))]
fn resample(
    x: &PyTensor,
    filter: &str,
    scale: usize,
    antialias: bool,
    direction: &str,
) -> PyRes<PyTensor> {
    let filter = filter.parse().map_err(to_py)?;
    let spec = match direction {
        "down" => ResampleSpec::down(filter, scale, antialias),
        "up" => ResampleSpec::up(filter, scale),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown direction {other:?}"
            )))
        }
    };
    wrap(rangenull::resample(&x.inner, &spec))
}

#[pyfunction]
#[pyo3(signature = (y, method, scale, external_path = None))]
fn predict_raw(
    y: &PyTensor,
    method: &str,
    scale: usize,
    external_path: Option<PathBuf>,
) -> PyRes<PyTensor> {
    let method: PredictMethod = method.parse().map_err(to_py)?;
    wrap(rangenull::predict_raw(
        &y.inner,
        method,
        scale,
        external_path.as_deref(),
    ))
}

#[pyfunction]
fn color_to_gray(x: &PyTensor) -> PyRes<PyTensor> {
    wrap(rangenull::color_to_gray(&x.inner))
}

#[pyfunction]
fn gray_to_color(g: &PyTensor) -> PyRes<PyTensor> {
    wrap(rangenull::gray_to_color(&g.inner))
}

/// Consistent colorization of gray `y` from a raw color prediction.
#[pyfunction]
#[pyo3(signature = (y, x_raw, listing = false))]
fn colorize_pd(y: &PyTensor, x_raw: &PyTensor, listing: bool) -> PyRes<PyTensor> {
    let (h, w) = (y.inner.height(), y.inner.width());
    let op = if listing {
        ColorMeanOp::with_listing_pinv(h, w)
    } else {
        ColorMeanOp::new(h, w)
    };
    wrap(generic_pd(&op, &y.inner, &x_raw.inner))
}

fn to_matrix(rows: Vec<Vec<f64>>) -> PyRes<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(PyValueError::new_err(
            "matrix must be a non-empty rectangular list of rows",
        ));
    }
    Matrix::from_vec(r, c, rows.concat()).map_err(to_py)
}

fn from_matrix(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Full SVD; returns `(u, sigma, v)` with `m == u @ diag(sigma) @ v.T`.
#[pyfunction]
fn svd(m: Rows) -> PyRes<(Rows, Vec<f64>, Rows)> {
    let f = rangenull::svd(&to_matrix(m)?).map_err(to_py)?;
    Ok((from_matrix(&f.u), f.sigma, from_matrix(&f.v)))
}

#[pyfunction]
#[pyo3(signature = (m, tol = rangenull::svd::DEFAULT_PINV_TOL))]
fn pinv(m: Vec<Vec<f64>>, tol: f64) -> PyRes<Vec<Vec<f64>>> {
    let f = rangenull::svd(&to_matrix(m)?).map_err(to_py)?;
    Ok(from_matrix(&rangenull::pinv_from_svd(&f, tol)))
}

#[pyclass(name = "CsOperator", module = "rangenull_py", frozen)]
pub struct PyCsOperator {
    inner: BlockSenseOp,
}

#[pymethods]
impl PyCsOperator {
    #[new]
    #[pyo3(signature = (block, ratio, seed = 0))]
    fn new(block: usize, ratio: f64, seed: u64) -> PyRes<Self> {
        Ok(PyCsOperator {
            inner: rangenull::cs_build(block, ratio, seed).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyRes<Self> {
        Ok(PyCsOperator {
            inner: BlockSenseOp::load(path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyRes<()> {
        self.inner.save(path).map_err(to_py)
    }

    #[getter]
    fn block(&self) -> usize {
        self.inner.block()
    }

    #[getter]
    fn q(&self) -> usize {
        self.inner.q()
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    fn orthonormality_error(&self) -> f64 {
        self.inner.orthonormality_error()
    }

    fn measure(&self, x: &PyTensor) -> PyRes<PyTensor> {
        wrap(self.inner.measure(&x.inner))
    }

    fn pinv(&self, m: &PyTensor) -> PyRes<PyTensor> {
        wrap(self.inner.back_project(&m.inner))
    }

    /// Consistent reconstruction from measurements `y` and a raw image.
    fn pd(&self, y: &PyTensor, x_raw: &PyTensor) -> PyRes<PyTensor> {
        let lin = self.inner.on_shape(x_raw.inner.shape()).map_err(to_py)?;
        wrap(generic_pd(&lin, &y.inner, &x_raw.inner))
    }

    fn __repr__(&self) -> String {
        format!(
            "CsOperator(block={}, q={}, seed={})",
            self.inner.block(),
            self.inner.q(),
            self.inner.seed()
        )
    }
}

#[pyfunction]
fn pooling_mp_residuals<'py>(
    py: Python<'py>,
    shape: (usize, usize, usize),
    scale: usize,
    trials: usize,
    seed: u64,
) -> PyRes<Bound<'py, PyDict>> {
    let op =
        rangenull::PoolingOp::new(scale, Shape::new(shape.0, shape.1, shape.2)).map_err(to_py)?;
    let r = rangenull::mp_residuals(&op, trials, seed).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("r1", r.r1)?;
    d.set_item("r2", r.r2)?;
    d.set_item("r3", r.r3)?;
    d.set_item("r4", r.r4)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (count = 100, size = 256, scale = 8, seed = 0, precision = "f64"))]
fn table1<'py>(
    py: Python<'py>,
    count: usize,
    size: usize,
    scale: usize,
    seed: u64,
    precision: &str,
) -> PyRes<Bound<'py, PyDict>> {
    let precision = match precision {
        "f64" => Precision::F64,
        "f32" => Precision::F32,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown precision {other:?}"
            )))
        }
    };
    let cfg = Table1Config {
        count,
        size,
        scale,
        seed,
        precision,
        parallel: false,
    };
    let s = rangenull::protocol::run_table1(&cfg, true).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("count", s.count)?;
    d.set_item("mean_psnr", s.mean_psnr)?;
    d.set_item("min_psnr", s.min_psnr)?;
    d.set_item("mean_max_abs", s.mean_max_abs)?;
    d.set_item("worst_max_abs", s.worst_max_abs)?;
    d.set_item("mean_ms", s.mean_ms)?;
    Ok(d)
}

#[pymodule]
fn rangenull_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTensor>()?;
    m.add_class::<PyCsOperator>()?;
    m.add_function(wrap_pyfunction!(load_png, m)?)?;
    m.add_function(wrap_pyfunction!(save_png, m)?)?;
    m.add_function(wrap_pyfunction!(read_raw, m)?)?;
    m.add_function(wrap_pyfunction!(write_raw, m)?)?;
    m.add_function(wrap_pyfunction!(pool_down, m)?)?;
    m.add_function(wrap_pyfunction!(pool_up, m)?)?;
    m.add_function(wrap_pyfunction!(pd_combine, m)?)?;
    m.add_function(wrap_pyfunction!(extract_highfreq, m)?)?;
    m.add_function(wrap_pyfunction!(verify_consistency, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add_function(wrap_pyfunction!(error_map, m)?)?;
    m.add_function(wrap_pyfunction!(resample, m)?)?;
    m.add_function(wrap_pyfunction!(predict_raw, m)?)?;
    m.add_function(wrap_pyfunction!(color_to_gray, m)?)?;
    m.add_function(wrap_pyfunction!(gray_to_color, m)?)?;
    m.add_function(wrap_pyfunction!(colorize_pd, m)?)?;
    m.add_function(wrap_pyfunction!(svd, m)?)?;
    m.add_function(wrap_pyfunction!(pinv, m)?)?;
    m.add_function(wrap_pyfunction!(pooling_mp_residuals, m)?)?;
    m.add_function(wrap_pyfunction!(table1, m)?)?;
    Ok(())
}
