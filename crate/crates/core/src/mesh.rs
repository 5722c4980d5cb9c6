//! Uniform grids on intervals and rectangles, the Navier stencils and
//! trapezoidal quadrature.
//!
//! Navier data `u = Δu = Δ²u = 0` is encoded by odd reflection across every
//! boundary node: the ghost value one node outside the domain is the negated
//! value one node inside. Every stencil in this module reads ghosts through
//! that rule, applied once per stage (`u`, then `Δu`), which is the same as
//! extending `u` oddly to infinite depth.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use alloc::{format, string::ToString};

use crate::error::{Error, Result};
use crate::exponents::ExponentField;
use crate::math;

/// Minimum number of nodes per axis; three nested stencils need interior
/// depth 3 on each side.
pub const MIN_NODES: usize = 9;

/// Uniform tensor grid on `[0, L_1] (× [0, L_2])`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    dim: usize,
    extents: Vec<f64>,
    nodes: usize,
    spacing: Vec<f64>,
    weights: Vec<f64>,
    boundary: Vec<bool>,
}

impl Grid {
    pub fn new(dim: usize, extents: &[f64], nodes: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::BadGridSpec(format!("dimension {dim} (expected 1 or 2)")));
        }
        if extents.len() != dim {
            return Err(Error::BadGridSpec(format!(
                "{} extents given for a {dim}-dimensional grid",
                extents.len()
            )));
        }
        if let Some(bad) = extents.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::BadGridSpec(format!("extent {bad} must be positive")));
        }
        if nodes < MIN_NODES {
            return Err(Error::BadGridSpec(format!(
                "{nodes} nodes per axis, need at least {MIN_NODES}"
            )));
        }
        let spacing: Vec<f64> = extents.iter().map(|l| l / (nodes - 1) as f64).collect();
        let axis_weight = |i: usize, h: f64| {
            if i == 0 || i == nodes - 1 {
                0.5 * h
            } else {
                h
            }
        };
        let total = nodes.pow(dim as u32);
        let mut weights = Vec::with_capacity(total);
        let mut boundary = Vec::with_capacity(total);
        for idx in 0..total {
            let (i, j) = (idx % nodes, idx / nodes);
            if dim == 1 {
                weights.push(axis_weight(i, spacing[0]));
                boundary.push(i == 0 || i == nodes - 1);
            } else {
                weights.push(axis_weight(i, spacing[0]) * axis_weight(j, spacing[1]));
                boundary.push(i == 0 || i == nodes - 1 || j == 0 || j == nodes - 1);
            }
        }
        Ok(Grid {
            dim,
            extents: extents.to_vec(),
            nodes,
            spacing,
            weights,
            boundary,
        })
    }

    /// `[0, length]` with `nodes` nodes.
    pub fn interval(length: f64, nodes: usize) -> Result<Self> {
        Self::new(1, &[length], nodes)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Total node count, `nodes_per_axis^dim`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Trapezoidal quadrature weights, one per node.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        self.boundary[idx]
    }

    /// Indices of the nodes not on `∂Ω`, in increasing order.
    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| !self.boundary[k]).collect()
    }

    /// Node coordinates; the second entry is 0 in 1D.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let i = idx % self.nodes;
        let j = idx / self.nodes;
        if self.dim == 1 {
            [i as f64 * self.spacing[0], 0.0]
        } else {
            [i as f64 * self.spacing[0], j as f64 * self.spacing[1]]
        }
    }

    /// Measure of the domain.
    pub fn measure(&self) -> f64 {
        self.extents.iter().product()
    }

    /// Index of the neighbour at offset `step` (±1) along `axis`, with the
    /// odd-reflection sign for ghost positions.
    #[inline]
    fn neighbor(&self, idx: usize, axis: usize, step: isize) -> (usize, f64) {
        let n = self.nodes as isize;
        let stride = if axis == 0 { 1 } else { self.nodes };
        let pos = if axis == 0 {
            (idx % self.nodes) as isize
        } else {
            (idx / self.nodes) as isize
        };
        let target = pos + step;
        let base = idx as isize - pos * stride as isize;
        if target < 0 {
            ((base + (-target) * stride as isize) as usize, -1.0)
        } else if target >= n {
            ((base + (2 * (n - 1) - target) * stride as isize) as usize, -1.0)
        } else {
            ((base + target * stride as isize) as usize, 1.0)
        }
    }

    pub(crate) fn laplacian_into(&self, u: &[f64], out: &mut [f64]) {
        for (idx, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for axis in 0..self.dim {
                let h2 = self.spacing[axis] * self.spacing[axis];
                let (p, sp) = self.neighbor(idx, axis, 1);
                let (m, sm) = self.neighbor(idx, axis, -1);
                acc += (sp * u[p] - 2.0 * u[idx] + sm * u[m]) / h2;
            }
            *o = acc;
        }
    }

    /// `∇Δu` at every node; `lap` is scratch of length `len()`, `out` holds
    /// `dim` components laid out axis-major.
    pub(crate) fn grad_laplacian_into(&self, u: &[f64], lap: &mut [f64], out: &mut [f64]) {
        self.laplacian_into(u, lap);
        let len = self.len();
        for axis in 0..self.dim {
            let inv = 0.5 / self.spacing[axis];
            let comp = &mut out[axis * len..(axis + 1) * len];
            for (idx, c) in comp.iter_mut().enumerate() {
                let (p, sp) = self.neighbor(idx, axis, 1);
                let (m, sm) = self.neighbor(idx, axis, -1);
                *c = (sp * lap[p] - sm * lap[m]) * inv;
            }
        }
    }

    /// Transpose of [`Self::grad_laplacian_into`] with respect to the nodal
    /// Euclidean inner products. Boundary entries of `out` are left as
    /// computed; callers that work on `X` zero them.
    pub(crate) fn grad_laplacian_adjoint_into(&self, field: &[f64], lap_bar: &mut [f64], out: &mut [f64]) {
        let len = self.len();
        lap_bar.iter_mut().for_each(|v| *v = 0.0);
        for axis in 0..self.dim {
            let inv = 0.5 / self.spacing[axis];
            let comp = &field[axis * len..(axis + 1) * len];
            for (idx, &y) in comp.iter().enumerate() {
                if y == 0.0 {
                    continue;
                }
                let c = y * inv;
                let (p, sp) = self.neighbor(idx, axis, 1);
                let (m, sm) = self.neighbor(idx, axis, -1);
                lap_bar[p] += sp * c;
                lap_bar[m] -= sm * c;
            }
        }
        out.iter_mut().for_each(|v| *v = 0.0);
        for idx in 0..len {
            let l = lap_bar[idx];
            if l == 0.0 {
                continue;
            }
            for axis in 0..self.dim {
                let d = l / (self.spacing[axis] * self.spacing[axis]);
                let (p, sp) = self.neighbor(idx, axis, 1);
                let (m, sm) = self.neighbor(idx, axis, -1);
                out[p] += sp * d;
                out[idx] -= 2.0 * d;
                out[m] += sm * d;
            }
        }
    }
}

/// Real-valued nodal field on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        GridFunction {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Arc<Grid>, value: f64) -> Self {
        GridFunction {
            grid: Arc::clone(grid),
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::BadGridSpec(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(GridFunction {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Samples `f` at the node coordinates.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let [x, y] = grid.coords(k);
                f(x, y)
            })
            .collect();
        GridFunction {
            grid: Arc::clone(grid),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
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

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        same_grid(&self.grid, &other.grid)
    }

    pub fn scaled(&self, t: f64) -> Self {
        GridFunction {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|v| t * v).collect(),
        }
    }

    /// `self + t·other`.
    pub fn axpy(&self, t: f64, other: &GridFunction) -> Result<Self> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(GridFunction {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + t * b)
                .collect(),
        })
    }

    /// Nodal Euclidean inner product (no quadrature weights).
    pub fn dot(&self, other: &GridFunction) -> Result<f64> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum())
    }

    /// Nodal Euclidean norm.
    pub fn norm_l2_nodal(&self) -> f64 {
        math::sqrt(self.values.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(math::abs(*v)))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

pub(crate) fn same_grid(a: &Arc<Grid>, b: &Arc<Grid>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

/// Vector field with one component per grid axis.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: Arc<Grid>,
    components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn component(&self, axis: usize) -> &[f64] {
        &self.components[axis]
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> GridFunction {
        let values = (0..self.grid.len())
            .map(|k| math::sqrt(self.components.iter().map(|c| c[k] * c[k]).sum()))
            .collect();
        GridFunction {
            grid: Arc::clone(&self.grid),
            values,
        }
    }
}

pub fn build_grid(dim: usize, extents: &[f64], nodes: usize) -> Result<Arc<Grid>> {
    Grid::new(dim, extents, nodes).map(Arc::new)
}

/// Five-point (three-point in 1D) Laplacian with odd-reflection ghosts.
pub fn laplacian(u: &GridFunction) -> GridFunction {
    let mut out = vec![0.0; u.grid.len()];
    u.grid.laplacian_into(&u.values, &mut out);
    GridFunction {
        grid: Arc::clone(&u.grid),
        values: out,
    }
}

/// Centered first differences of [`laplacian`]; in 1D this is the discrete `u‴`.
pub fn grad_laplacian(u: &GridFunction) -> VectorField {
    let grid = &u.grid;
    let len = grid.len();
    let mut lap = vec![0.0; len];
    let mut flat = vec![0.0; len * grid.dim];
    grid.grad_laplacian_into(&u.values, &mut lap, &mut flat);
    VectorField {
        grid: Arc::clone(grid),
        components: flat.chunks(len).map(|c| c.to_vec()).collect(),
    }
}

/// Zeroes the boundary trace. Together with the odd-reflection ghosts read by
/// the stencils this realizes `u = Δu = Δ²u = 0` on `∂Ω`.
pub fn apply_navier_bc(u: &GridFunction) -> GridFunction {
    let mut out = u.clone();
    for (v, &b) in out.values.iter_mut().zip(&u.grid.boundary) {
        if b {
            *v = 0.0;
        }
    }
    out
}

/// Trapezoidal quadrature `Σ weights · values`.
pub fn integrate(w: &GridFunction) -> f64 {
    w.values.iter().zip(&w.grid.weights).map(|(v, q)| v * q).sum()
}

/// The computational norm of `X`: the Luxemburg norm of `|∇Δu|`.
pub fn x_norm(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    if !same_grid(&u.grid, p.grid()) {
        return Err(Error::GridMismatch);
    }
    let grid = &u.grid;
    let len = grid.len();
    let mut lap = vec![0.0; len];
    let mut flat = vec![0.0; len * grid.dim];
    grid.grad_laplacian_into(&u.values, &mut lap, &mut flat);
    let mag = magnitude_of(&flat, len, grid.dim);
    x_norm_of_magnitude(&mag, grid.weights(), p.values())
}

pub(crate) fn magnitude_of(flat: &[f64], len: usize, dim: usize) -> Vec<f64> {
    (0..len)
        .map(|k| math::sqrt((0..dim).map(|a| flat[a * len + k] * flat[a * len + k]).sum()))
        .collect()
}

pub(crate) fn x_norm_of_magnitude(mag: &[f64], weights: &[f64], exps: &[f64]) -> Result<f64> {
    crate::varx::luxemburg_raw(mag, weights, exps, crate::varx::DEFAULT_NORM_TOL)
        .map(|n| n.value)
        .map_err(|e| match e {
            Error::NonConvergence(m) => Error::NonConvergence(m + " (x_norm)"),
            other => other,
        })
}

/// First Navier eigenfunction `∏ sin(π x_a / L_a)`, zero on the boundary.
pub fn first_mode(grid: &Arc<Grid>) -> GridFunction {
    let ext = grid.extents().to_vec();
    let dim = grid.dim();
    let f = GridFunction::from_fn(grid, |x, y| {
        let mut v = math::sin(core::f64::consts::PI * x / ext[0]);
        if dim == 2 {
            v *= math::sin(core::f64::consts::PI * y / ext[1]);
        }
        v
    });
    apply_navier_bc(&f)
}

impl core::fmt::Display for Grid {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let ext: Vec<_> = self.extents.iter().map(|e| e.to_string()).collect();
        write!(f, "{}D grid, {} nodes/axis, extents [{}]", self.dim, self.nodes, ext.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;

    fn line(n: usize) -> Arc<Grid> {
        build_grid(1, &[1.0], n).unwrap()
    }

    #[test]
    fn grid_spacing_and_shape() {
        let g = line(65);
        assert_eq!(g.len(), 65);
        assert!((g.spacing()[0] - 1.0 / 64.0).abs() < 1e-15);
        let g2 = build_grid(2, &[1.0, 1.0], 33).unwrap();
        assert_eq!(g2.len(), 33 * 33);
        assert_eq!(g2.interior_indices().len(), 31 * 31);
    }

    #[test]
    fn grid_rejects_shallow_and_bad_specs() {
        assert!(matches!(build_grid(1, &[1.0], 5), Err(Error::BadGridSpec(_))));
        assert!(matches!(build_grid(3, &[1.0; 3], 9), Err(Error::BadGridSpec(_))));
        assert!(matches!(build_grid(2, &[1.0], 9), Err(Error::BadGridSpec(_))));
        assert!(matches!(build_grid(1, &[-1.0], 9), Err(Error::BadGridSpec(_))));
    }

    #[test]
    fn laplacian_of_constant_and_quadratic() {
        let g = line(33);
        let c = GridFunction::constant(&g, 3.0);
        let l = laplacian(&c);
        for k in 1..32 {
            assert_eq!(l.values()[k], 0.0);
        }
        let q = GridFunction::from_fn(&g, |x, _| x * x);
        let l = laplacian(&q);
        for k in 1..32 {
            assert!((l.values()[k] - 2.0).abs() < 1e-9, "{}", l.values()[k]);
        }
    }

    #[test]
    fn grad_laplacian_exact_on_cubics() {
        let g = line(33);
        let u = GridFunction::from_fn(&g, |x, _| x * x * x);
        let d = grad_laplacian(&u);
        for k in 2..31 {
            assert!((d.component(0)[k] - 6.0).abs() < 1e-8, "{}", d.component(0)[k]);
        }
        let c = GridFunction::constant(&g, 1.5);
        assert!(grad_laplacian(&c).component(0)[2..31].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn laplacian_of_sine_converges() {
        let g = line(257);
        let u = first_mode(&g);
        let l = laplacian(&u);
        let err = (0..257)
            .map(|k| (l.values()[k] + PI * PI * u.values()[k]).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-3, "{err}");
    }

    #[test]
    fn grad_laplacian_of_sine_converges() {
        let g = line(257);
        let u = first_mode(&g);
        let d = grad_laplacian(&u);
        let err = (0..257)
            .map(|k| {
                let x = g.coords(k)[0];
                (d.component(0)[k] + PI.powi(3) * (PI * x).cos()).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-2, "{err}");
    }

    #[test]
    fn navier_bc_zero_traces() {
        let g = line(17);
        let mut u = GridFunction::from_fn(&g, |x, _| (7.0 * x).sin() + x * x + 0.3);
        u = apply_navier_bc(&u);
        assert_eq!(u.values()[0], 0.0);
        assert_eq!(u.values()[16], 0.0);
        let l = laplacian(&u);
        let l2 = laplacian(&l);
        for k in [0, 16] {
            assert!(l.values()[k].abs() < 1e-9);
            assert!(l2.values()[k].abs() < 1e-6);
        }
        let z = apply_navier_bc(&GridFunction::zeros(&g));
        assert!(z.is_zero());
        let s = first_mode(&g);
        let s2 = apply_navier_bc(&s);
        assert_eq!(s.values()[1..16], s2.values()[1..16]);
    }

    #[test]
    fn navier_bc_in_2d() {
        let g = build_grid(2, &[1.0, 2.0], 11).unwrap();
        let u = apply_navier_bc(&GridFunction::from_fn(&g, |x, y| 1.0 + x * y + (3.0 * y).cos()));
        let l = laplacian(&u);
        let l2 = laplacian(&l);
        for k in 0..g.len() {
            if g.is_boundary(k) {
                assert!(l.values()[k].abs() < 1e-9);
                assert!(l2.values()[k].abs() < 1e-5);
            }
        }
    }

    #[test]
    fn trapezoid_integrals() {
        let g = line(65);
        assert!((integrate(&GridFunction::constant(&g, 1.0)) - 1.0).abs() < 1e-14);
        assert!((integrate(&GridFunction::from_fn(&g, |x, _| x)) - 0.5).abs() < 1e-14);
        let g = line(257);
        let w = GridFunction::from_fn(&g, |x, _| (PI.powi(3) * (PI * x).cos()).powi(2));
        let exact = PI.powi(6) / 2.0;
        assert!((integrate(&w) - exact).abs() / exact < 1e-2);
    }

    #[test]
    fn adjoint_matches_forward() {
        let g = build_grid(2, &[1.0, 1.5], 10).unwrap();
        let len = g.len();
        let u: Vec<f64> = (0..len)
            .map(|k| if g.is_boundary(k) { 0.0 } else { ((k * 37 % 11) as f64 - 5.0) / 3.0 })
            .collect();
        let y: Vec<f64> = (0..2 * len).map(|k| ((k * 13 % 7) as f64 - 3.0) / 2.0).collect();
        let mut lap = vec![0.0; len];
        let mut gu = vec![0.0; 2 * len];
        g.grad_laplacian_into(&u, &mut lap, &mut gu);
        let mut gty = vec![0.0; len];
        g.grad_laplacian_adjoint_into(&y, &mut lap, &mut gty);
        let lhs: f64 = gu.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(&gty).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }
}
