#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use triharm_core::*;

pub fn grid(n: usize) -> Arc<Grid> {
    build_grid(1, &[1.0], n).unwrap()
}

pub fn omega0(grid: &Arc<Grid>) -> Vec<bool> {
    (0..grid.len()).map(|k| (grid.coords(k)[0] - 0.5).abs() <= 0.25).collect()
}

/// a = b = γ = 1, p ≡ 2, q ≡ 1.5, r ≡ 5, N = 7, f ≡ 1, g = 1 on [1/4, 3/4],
/// h = 0.1 sin²(πx).
pub fn canonical(n: usize, lambda: f64) -> ProblemData {
    let grid = grid(n);
    let h = GridFunction::from_fn(&grid, |x, _| 0.1 * (PI * x).sin().powi(2));
    build(&grid, lambda, GridFunction::constant(&grid, 1.0), h)
}

/// `h ≡ 0` and sign-changing `f = sin 2πx + 0.3`.
pub fn theorem2(n: usize, lambda: f64) -> ProblemData {
    let grid = grid(n);
    let f = GridFunction::from_fn(&grid, |x, _| (2.0 * PI * x).sin() + 0.3);
    build(&grid, lambda, f, GridFunction::zeros(&grid))
}

fn build(grid: &Arc<Grid>, lambda: f64, f: GridFunction, h: GridFunction) -> ProblemData {
    let p = ExponentField::constant(grid, 2.0, 7).unwrap();
    let q = ExponentField::constant(grid, 1.5, 7).unwrap();
    let r = ExponentField::constant(grid, 5.0, 7).unwrap();
    let g = GridFunction::from_fn(grid, |x, _| if (x - 0.5).abs() <= 0.25 { 1.0 } else { 0.0 });
    let k = KirchhoffCoefficients::new(1.0, 1.0, 1.0).unwrap();
    ProblemData::new(k, lambda, p, q, r, f, g, h, omega0(grid)).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
