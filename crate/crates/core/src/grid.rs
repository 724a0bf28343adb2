//! Uniform box grids and the real-valued fields that live on them.
//!
//! A [`Grid`] covers the square box `center ± L` in every axis with `n`
//! nodes per axis. `n` is odd so the box center is itself a node. Fields
//! store one value per node in row-major order and carry homogeneous
//! Dirichlet data: boundary nodes are always zero.
//!
//! Discrete derivatives come in two flavours. Energies and norms use
//! forward differences on grid edges, which is the variational form of the
//! standard `(2d+1)`-point Laplacian, so the gradient of the discrete
//! kinetic energy is exactly `-Δ_h u`. Pointwise gradients (tail integrals,
//! translation directions) use second-order central differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest node count a grid may have.
pub const MAX_NODES: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    half_width: f64,
    n: usize,
    spacing: f64,
    center: [f64; 2],
}

impl Grid {
    /// Grid centered at the origin.
    pub fn new(dim: usize, half_width: f64, n: usize) -> Result<Grid> {
        Grid::centered(dim, half_width, n, [0.0; 2])
    }

    pub fn centered(dim: usize, half_width: f64, n: usize, center: [f64; 2]) -> Result<Grid> {
        if dim != 1 && dim != 2 {
            return Err(Error::Grid(format!("dimension must be 1 or 2, got {dim}")));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::Grid(format!("half-width must be positive, got {half_width}")));
        }
        if n < 3 || n % 2 == 0 {
            return Err(Error::Grid(format!("points per axis must be odd and at least 3, got {n}")));
        }
        let total = n.checked_pow(dim as u32).filter(|&t| t <= MAX_NODES);
        if total.is_none() {
            return Err(Error::Grid(format!("{n}^{dim} nodes exceeds the budget of {MAX_NODES}")));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(Error::Grid("center must be finite".into()));
        }
        let mut c = [0.0; 2];
        c[..dim].copy_from_slice(&center[..dim]);
        Ok(Grid { dim, half_width, n, spacing: 2.0 * half_width / (n - 1) as f64, center: c })
    }

    /// Smallest odd node count whose spacing does not exceed `h`.
    pub fn with_spacing(dim: usize, half_width: f64, h: f64, center: [f64; 2]) -> Result<Grid> {
        if !(h > 0.0) {
            return Err(Error::Grid(format!("spacing must be positive, got {h}")));
        }
        let mut intervals = (2.0 * half_width / h - 1e-9).ceil().max(2.0) as usize;
        if intervals % 2 == 1 {
            intervals += 1;
        }
        Grid::centered(dim, half_width, intervals + 1, center)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.spacing
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn center(&self) -> &[f64] {
        &self.center[..self.dim]
    }

    /// Total number of nodes, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight of one node, `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    /// Coordinate of node `i` along `axis`.
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.center[axis] - self.half_width + i as f64 * self.spacing
    }

    /// Per-axis node indices of a flat index.
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx / self.n, idx % self.n]
        }
    }

    pub fn flat_index(&self, mi: [usize; 2]) -> usize {
        if self.dim == 1 {
            mi[0]
        } else {
            mi[0] * self.n + mi[1]
        }
    }

    /// Coordinates of a node; unused trailing entries are zero.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let mi = self.multi_index(idx);
        let mut x = [0.0; 2];
        for (a, xa) in x.iter_mut().enumerate().take(self.dim) {
            *xa = self.coord(a, mi[a]);
        }
        x
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let mi = self.multi_index(idx);
        mi[..self.dim].iter().any(|&i| i == 0 || i == self.n - 1)
    }

    /// Whether `x` lies inside the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim).all(|a| (x[a] - self.center[a]).abs() <= self.half_width * (1.0 + 1e-12))
    }

    /// Node nearest to `x`, clamped to the box.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut mi = [0usize; 2];
        for a in 0..self.dim {
            let t = ((x[a] - self.center[a] + self.half_width) / self.spacing).round();
            mi[a] = t.clamp(0.0, (self.n - 1) as f64) as usize;
        }
        self.flat_index(mi)
    }

    /// Flat-index stride along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        if self.dim == 2 && axis == 0 {
            self.n
        } else {
            1
        }
    }

    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}

/// A real-valued grid function with zero boundary values.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Field {
        Field { values: vec![0.0; grid.len()], grid }
    }

    /// Samples `f` at interior nodes; boundary nodes are set to zero.
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> Field {
        let values = (0..grid.len())
            .map(|idx| if grid.is_boundary(idx) { 0.0 } else { f(&grid.point(idx)[..grid.dim()]) })
            .collect();
        Field { grid, values }
    }

    /// Wraps raw values. Boundary entries are zeroed.
    pub fn from_values(grid: Grid, mut values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("field values"));
        }
        for (idx, v) in values.iter_mut().enumerate() {
            if grid.is_boundary(idx) {
                *v = 0.0;
            }
        }
        Ok(Field { grid, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn check_finite(&self, what: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(what))
        }
    }

    fn check_grid(&self, other: &Field) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// Discrete `L²` inner product `Σ u v h^d`.
    pub fn dot(&self, other: &Field) -> Result<f64> {
        self.check_grid(other)?;
        Ok(dot(&self.values, &other.values) * self.grid.cell_volume())
    }

    pub fn l2_norm_sq(&self) -> f64 {
        dot(&self.values, &self.values) * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|v| a * v).collect() }
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &Field) -> Result<Field> {
        self.check_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(u, v)| u + a * v).collect();
        Ok(Field { grid: self.grid, values })
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.add_scaled(-1.0, other)
    }

    /// Sum over grid edges of squared forward differences, times `h^d`:
    /// the discrete `‖∇u‖₂²`.
    pub fn gradient_energy(&self) -> f64 {
        edge_energy(&self.grid, &self.values, &self.values)
    }

    /// Discrete `(∇u, ∇v)` over grid edges.
    pub fn gradient_dot(&self, other: &Field) -> Result<f64> {
        self.check_grid(other)?;
        Ok(edge_energy(&self.grid, &self.values, &other.values))
    }

    /// Five/three-point Laplacian at interior nodes, zero on the boundary.
    pub fn laplacian(&self) -> Field {
        let mut out = vec![0.0; self.values.len()];
        laplacian_into(&self.grid, &self.values, &mut out);
        Field { grid: self.grid, values: out }
    }

    /// Central-difference partial derivative along `axis`; zero on the boundary.
    pub fn central_derivative(&self, axis: usize) -> Field {
        let g = &self.grid;
        let s = g.stride(axis);
        let inv = 0.5 / g.h();
        let values = (0..g.len())
            .map(|idx| if g.is_boundary(idx) { 0.0 } else { (self.values[idx + s] - self.values[idx - s]) * inv })
            .collect();
        Field { grid: self.grid, values }
    }

    /// Pointwise squared central-difference gradient `|∇u|²` at every node.
    pub fn central_gradient_sq(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.grid.len()];
        for axis in 0..self.grid.dim() {
            let d = self.central_derivative(axis);
            for (a, v) in acc.iter_mut().zip(d.values()) {
                *a += v * v;
            }
        }
        acc
    }

    /// Linear interpolation at an arbitrary point; zero outside the box.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        if !g.contains(x) {
            return 0.0;
        }
        let mut base = [0usize; 2];
        let mut frac = [0.0; 2];
        for a in 0..g.dim() {
            let t = (x[a] - g.center()[a] + g.half_width()) / g.h();
            let i = (t.floor() as isize).clamp(0, g.n() as isize - 2) as usize;
            base[a] = i;
            frac[a] = (t - i as f64).clamp(0.0, 1.0);
        }
        if g.dim() == 1 {
            let i = base[0];
            self.values[i] * (1.0 - frac[0]) + self.values[i + 1] * frac[0]
        } else {
            let at = |i: usize, j: usize| self.values[g.flat_index([i, j])];
            let (i, j) = (base[0], base[1]);
            let (s, t) = (frac[0], frac[1]);
            at(i, j) * (1.0 - s) * (1.0 - t) + at(i + 1, j) * s * (1.0 - t) + at(i, j + 1) * (1.0 - s) * t
                + at(i + 1, j + 1) * s * t
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `Σ_edges (D u)(D v) h^d` with forward differences on every axis.
pub(crate) fn edge_energy(grid: &Grid, u: &[f64], v: &[f64]) -> f64 {
    let n = grid.n();
    let h = grid.h();
    let mut acc = 0.0;
    if grid.dim() == 1 {
        for i in 0..n - 1 {
            acc += (u[i + 1] - u[i]) * (v[i + 1] - v[i]);
        }
    } else {
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                if i + 1 < n {
                    acc += (u[k + n] - u[k]) * (v[k + n] - v[k]);
                }
                if j + 1 < n {
                    acc += (u[k + 1] - u[k]) * (v[k + 1] - v[k]);
                }
            }
        }
    }
    acc * grid.cell_volume() / (h * h)
}

pub(crate) fn laplacian_into(grid: &Grid, u: &[f64], out: &mut [f64]) {
    let n = grid.n();
    let inv = 1.0 / (grid.h() * grid.h());
    if grid.dim() == 1 {
        out[0] = 0.0;
        out[n - 1] = 0.0;
        for i in 1..n - 1 {
            out[i] = (u[i - 1] - 2.0 * u[i] + u[i + 1]) * inv;
        }
    } else {
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                out[k] = if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                    0.0
                } else {
                    (u[k - n] + u[k + n] + u[k - 1] + u[k + 1] - 4.0 * u[k]) * inv
                };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_from_half_width() {
        let g = Grid::new(1, 40.0, 801).unwrap();
        assert!((g.h() - 0.1).abs() < 1e-15);
        assert_eq!(g.coord(0, 400), 0.0);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(1, 40.0, 802).is_err());
        assert!(Grid::new(1, 0.0, 11).is_err());
        assert!(Grid::new(1, -1.0, 11).is_err());
        assert!(Grid::new(3, 1.0, 11).is_err());
        assert!(Grid::new(2, 1.0, 1 << 13 | 1).is_err());
    }

    #[test]
    fn two_dimensional_node_count() {
        let g = Grid::new(2, 20.0, 401).unwrap();
        assert_eq!(g.len(), 160_801);
        assert_eq!(g.point(g.flat_index([200, 200])), [0.0, 0.0]);
    }

    #[test]
    fn with_spacing_rounds_to_odd() {
        let g = Grid::with_spacing(1, 7.5, 0.1, [0.0; 2]).unwrap();
        assert_eq!(g.n() % 2, 1);
        assert!(g.h() <= 0.1 + 1e-12);
    }

    #[test]
    fn boundary_is_zeroed() {
        let g = Grid::new(2, 1.0, 5).unwrap();
        let f = Field::from_fn(g, |_| 1.0);
        assert_eq!(f.values().iter().filter(|&&v| v == 1.0).count(), 9);
    }

    #[test]
    fn laplacian_is_gradient_of_edge_energy() {
        // ⟨-Δ_h u, v⟩ = (∇u, ∇v) exactly for fields vanishing on the boundary.
        for dim in [1, 2] {
            let g = Grid::new(dim, 3.0, 21).unwrap();
            let u = Field::from_fn(g, |x| (-x.iter().map(|t| t * t).sum::<f64>()).exp());
            let v = Field::from_fn(g, |x| x[0].sin() * (1.0 - x[0] * x[0] / 9.0));
            let lhs = -u.laplacian().dot(&v).unwrap();
            let rhs = u.gradient_dot(&v).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * rhs.abs().max(1.0), "{dim}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let g = Grid::new(2, 2.0, 9).unwrap();
        let f = Field::from_fn(g, |x| 1.0 + x[0] - 2.0 * x[1]);
        assert!((f.interpolate(&[0.3, -0.7]) - (1.0 + 0.3 + 1.4)).abs() < 1e-12);
    }
}
