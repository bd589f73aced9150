//! One-sided (Hestenes) Jacobi SVD and the pseudo-inverse built from it.
//!
//! Columns are orthogonalized pairwise in a fixed cyclic order, so the result
//! is a deterministic function of the input. A sweep is converged when no pair
//! has `|a_i . a_j| > 1e-14 * |a_i| |a_j|`; at most 60 sweeps run.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

const ROTATION_TOL: f64 = 1e-14;
const MAX_SWEEPS: usize = 60;
pub const DEFAULT_PINV_TOL: f64 = 1e-12;

/// Full SVD `M = U diag(sigma) V^T`, `U` d×d and `V` D×D orthogonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdFactors {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SvdFactors {
    pub fn rows(&self) -> usize {
        self.u.rows()
    }

    pub fn cols(&self) -> usize {
        self.v.rows()
    }

    pub fn reconstruct(&self) -> Matrix {
        let (d, n) = (self.rows(), self.cols());
        let mut out = Matrix::zeros(d, n);
        for (k, &s) in self.sigma.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for i in 0..d {
                let us = self.u[(i, k)] * s;
                for j in 0..n {
                    out[(i, j)] += us * self.v[(j, k)];
                }
            }
        }
        out
    }
}

pub fn svd(m: &Matrix) -> Result<SvdFactors> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::InvalidArgument("svd of an empty matrix".into()));
    }
    if m.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "svd input has non-finite entries".into(),
        ));
    }
    if m.rows() >= m.cols() {
        Ok(svd_tall(m))
    } else {
        // M^T = U' S V'^T  =>  M = V' S U'^T
        let t = svd_tall(&m.transpose());
        Ok(SvdFactors {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        })
    }
}

/// Column-major working copy: `cols[j]` is column j.
fn svd_tall(m: &Matrix) -> SvdFactors {
    let (rows, n) = (m.rows(), m.cols());
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..rows).map(|i| m[(i, j)]).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n {
            for j in i + 1..n {
                let (alpha, beta, gamma) = col_products(&a[i], &a[j]);
                if gamma == 0.0 || gamma.abs() <= ROTATION_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut a, i, j, c, s);
                rotate_pair(&mut v, i, j, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = a.iter().map(|col| norm(col)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal values keep sweep order
    order.sort_by(|&x, &y| sigma[y].total_cmp(&sigma[x]));
    sigma = order.iter().map(|&k| sigma[k]).collect();
    let a: Vec<Vec<f64>> = order.iter().map(|&k| a[k].clone()).collect();
    let v_sorted: Vec<Vec<f64>> = order.iter().map(|&k| v[k].clone()).collect();

    let sigma_max = sigma.first().copied().unwrap_or(0.0);
    let rank_floor = sigma_max * f64::EPSILON * rows.max(n) as f64;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(rows);
    for (k, col) in a.iter().enumerate() {
        if sigma[k] > rank_floor && sigma[k] > 0.0 {
            let mut u: Vec<f64> = col.iter().map(|x| x / sigma[k]).collect();
            // re-orthogonalize against already accepted columns
            orthogonalize(&mut u, &u_cols);
            let nu = norm(&u);
            u.iter_mut().for_each(|x| *x /= nu);
            u_cols.push(u);
        } else {
            break;
        }
    }
    let numerical_rank = u_cols.len();
    for s in sigma.iter_mut().skip(numerical_rank) {
        // singular values below the floor are noise from the rotations
        if *s <= rank_floor {
            *s = 0.0;
        }
    }
    complete_basis(&mut u_cols, rows);

    let u = Matrix::from_fn(rows, rows, |i, k| u_cols[k][i]);
    let v = Matrix::from_fn(n, n, |i, k| v_sorted[k][i]);
    SvdFactors { u, sigma, v }
}

fn col_products(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let (mut a, mut b, mut g) = (0.0, 0.0, 0.0);
    for (&p, &q) in x.iter().zip(y) {
        a += p * p;
        b += q * q;
        g += p * q;
    }
    (a, b, g)
}

fn rotate_pair(cols: &mut [Vec<f64>], i: usize, j: usize, c: f64, s: f64) {
    let (left, right) = cols.split_at_mut(j);
    for (p, q) in left[i].iter_mut().zip(right[0].iter_mut()) {
        let (x, y) = (*p, *q);
        *p = c * x - s * y;
        *q = s * x + c * y;
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn orthogonalize(u: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let d: f64 = u.iter().zip(b).map(|(x, y)| x * y).sum();
            u.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
    }
}

/// Extends orthonormal `cols` to a full basis of R^dim using the standard
/// basis vectors, with two Gram-Schmidt passes per candidate.
fn complete_basis(cols: &mut Vec<Vec<f64>>, dim: usize) {
    let mut e = 0;
    while cols.len() < dim && e < dim {
        let mut cand = vec![0.0; dim];
        cand[e] = 1.0;
        e += 1;
        orthogonalize(&mut cand, cols);
        let n = norm(&cand);
        if n > 1e-8 {
            cand.iter_mut().for_each(|x| *x /= n);
            cols.push(cand);
        }
    }
}

/// `A^+ = V Sigma^+ U^T`. Singular values at or below `tol * sigma_max` are
/// treated as zero.
pub fn pinv_from_svd(f: &SvdFactors, tol: f64) -> Matrix {
    let (d, n) = (f.rows(), f.cols());
    let sigma_max = f.sigma.first().copied().unwrap_or(0.0);
    let mut out = Matrix::zeros(n, d);
    if sigma_max == 0.0 {
        return out;
    }
    for (k, &s) in f.sigma.iter().enumerate() {
        if s <= tol * sigma_max {
            continue;
        }
        let inv = 1.0 / s;
        for i in 0..n {
            let vi = f.v[(i, k)] * inv;
            for j in 0..d {
                out[(i, j)] += vi * f.u[(j, k)];
            }
        }
    }
    out
}

pub fn pinv(m: &Matrix) -> Result<Matrix> {
    Ok(pinv_from_svd(&svd(m)?, DEFAULT_PINV_TOL))
}
