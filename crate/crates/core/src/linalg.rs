//! Jacobi-preconditioned conjugate gradients for `(-Δ_h + W) g = r`
//! with homogeneous Dirichlet data.

use crate::error::{Error, Result};
use crate::grid::{dot, laplacian_into, Grid};

#[derive(Clone, Copy, Debug)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn apply(grid: &Grid, weight: &[f64], x: &[f64], out: &mut [f64]) {
    laplacian_into(grid, x, out);
    for (idx, (o, (w, xi))) in out.iter_mut().zip(weight.iter().zip(x)).enumerate() {
        *o = if grid.is_boundary(idx) { 0.0 } else { w * xi - *o };
    }
}

/// Solves `(-Δ_h + W) g = rhs` at interior nodes; `g` vanishes on the boundary.
/// `weight` must be positive.
pub fn solve_shifted_laplacian(
    grid: &Grid,
    weight: &[f64],
    rhs: &[f64],
    rel_tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let len = grid.len();
    debug_assert_eq!(weight.len(), len);
    debug_assert_eq!(rhs.len(), len);
    let diag_lap = 2.0 * grid.dim() as f64 / (grid.h() * grid.h());

    let mut r: Vec<f64> = rhs
        .iter()
        .enumerate()
        .map(|(idx, v)| if grid.is_boundary(idx) { 0.0 } else { *v })
        .collect();
    let b_norm = dot(&r, &r).sqrt();
    let mut x = vec![0.0; len];
    if b_norm == 0.0 {
        return Ok((x, SolveStats { iterations: 0, relative_residual: 0.0 }));
    }
    let inv_diag: Vec<f64> = weight.iter().map(|w| 1.0 / (diag_lap + w)).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; len];
    let mut rz = dot(&r, &z);

    for it in 1..=max_iters {
        apply(grid, weight, &p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..len {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let res = dot(&r, &r).sqrt() / b_norm;
        if !res.is_finite() {
            return Err(Error::LinearSolve { iterations: it, residual: res });
        }
        if res <= rel_tol {
            return Ok((x, SolveStats { iterations: it, relative_residual: res }));
        }
        for k in 0..len {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..len {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::LinearSolve { iterations: max_iters, residual: dot(&r, &r).sqrt() / b_norm })
}
