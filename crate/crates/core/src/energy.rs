//! The Kirchhoff coefficient, the energy
//!
//! ```text
//! J(u) = a s - b s^{γ+1}/(γ+1) - λ ∫ f|u|^q/q - ∫ g|u|^r/r - ∫ h u,
//! s    = ∫ |∇Δu|^{p(x)}/p(x)
//! ```
//!
//! and its exact discrete gradient.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::exponents::ExponentField;
use crate::math;
use crate::mesh::{same_grid, Grid, GridFunction};

/// `M(s) = a - b s^γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KirchhoffCoefficients {
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
}

impl KirchhoffCoefficients {
    pub fn new(a: f64, b: f64, gamma: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("gamma", gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        Ok(KirchhoffCoefficients { a, b, gamma })
    }

    pub fn m(&self, s: f64) -> f64 {
        self.a - self.b * math::powf(s, self.gamma)
    }

    /// `a s - b s^{γ+1}/(γ+1)`, the primitive of `M`.
    pub fn primitive(&self, s: f64) -> f64 {
        self.a * s - self.b * math::powf(s, self.gamma + 1.0) / (self.gamma + 1.0)
    }

    /// `s* = (a/b)^{1/γ}`, the zero of `M`.
    pub fn degeneracy_point(&self) -> f64 {
        math::powf(self.a / self.b, 1.0 / self.gamma)
    }

    /// `γ a^{(γ+1)/γ} / ((γ+1) b^{1/γ})`.
    pub fn cap(&self) -> f64 {
        let g = self.gamma;
        g * math::powf(self.a, (g + 1.0) / g) / ((g + 1.0) * math::powf(self.b, 1.0 / g))
    }
}

pub fn kirchhoff_m(s: f64, k: &KirchhoffCoefficients) -> f64 {
    k.m(s)
}

/// Maximum of `s ↦ a s - b s^{γ+1}/(γ+1)` over `s ≥ 0`.
pub fn kirchhoff_cap(k: &KirchhoffCoefficients) -> f64 {
    k.cap()
}

/// Coefficients, exponents and weights of one problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    pub kirchhoff: KirchhoffCoefficients,
    pub lambda: f64,
    pub p: ExponentField,
    pub q: ExponentField,
    pub r: ExponentField,
    pub f: GridFunction,
    pub g: GridFunction,
    pub h: GridFunction,
    pub omega0_mask: Vec<bool>,
    pub eta: f64,
    pub mu: f64,
}

impl ProblemData {
    /// Checks that every field lives on the grid of `p` and that `λ ≥ 0`.
    /// The hypotheses themselves are checked separately.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kirchhoff: KirchhoffCoefficients,
        lambda: f64,
        p: ExponentField,
        q: ExponentField,
        r: ExponentField,
        f: GridFunction,
        g: GridFunction,
        h: GridFunction,
        omega0_mask: Vec<bool>,
    ) -> Result<Self> {
        let grid = p.grid();
        if !(same_grid(grid, q.grid())
            && same_grid(grid, r.grid())
            && same_grid(grid, f.grid())
            && same_grid(grid, g.grid())
            && same_grid(grid, h.grid()))
        {
            return Err(Error::GridMismatch);
        }
        if omega0_mask.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be nonnegative")));
        }
        Ok(ProblemData {
            kirchhoff,
            lambda,
            p,
            q,
            r,
            f,
            g,
            h,
            omega0_mask,
            eta: 0.01,
            mu: 0.01,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.p.grid()
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.lambda = lambda;
        out
    }
}

/// The summands of `J`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    /// `∫ |∇Δu|^{p(x)}/p(x)`
    pub s: f64,
    /// `a s - b s^{γ+1}/(γ+1)`
    pub kirchhoff_part: f64,
    /// `∫ f|u|^q/q`, without the factor `λ`.
    pub f_part: f64,
    /// `∫ g|u|^r/r`
    pub g_part: f64,
    /// `∫ h u`
    pub h_part: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub const CSV_HEADER: &'static str = "s,kirchhoff_part,f_part,g_part,h_part,total";

    pub fn to_row(&self) -> [f64; 6] {
        [self.s, self.kirchhoff_part, self.f_part, self.g_part, self.h_part, self.total]
    }
}

/// Reusable buffers for repeated energy and gradient evaluations on one
/// problem.
#[derive(Debug)]
pub(crate) struct Evaluator<'a> {
    pub(crate) prob: &'a ProblemData,
    pub(crate) grid: &'a Grid,
    lap: Vec<f64>,
    grad: Vec<f64>,
    flux: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub(crate) fn new(prob: &'a ProblemData) -> Self {
        let grid: &Grid = prob.grid();
        let len = grid.len();
        Evaluator {
            prob,
            grid,
            lap: vec![0.0; len],
            grad: vec![0.0; len * grid.dim()],
            flux: vec![0.0; len * grid.dim()],
        }
    }

    /// `∇Δu` into the internal buffer; returns `s`.
    fn load(&mut self, u: &[f64]) -> f64 {
        self.grid.grad_laplacian_into(u, &mut self.lap, &mut self.grad);
        let len = self.grid.len();
        let dim = self.grid.dim();
        let w = self.grid.weights();
        let p = self.prob.p.values();
        let mut s = 0.0;
        for k in 0..len {
            let m2: f64 = (0..dim).map(|a| self.grad[a * len + k] * self.grad[a * len + k]).sum();
            if m2 > 0.0 {
                s += w[k] * math::powf(m2, 0.5 * p[k]) / p[k];
            }
        }
        s
    }

    /// `(∫ f|u|^q/q, ∫ g|u|^r/r, ∫ h u)`
    pub(crate) fn lower_parts(&self, u: &[f64]) -> (f64, f64, f64) {
        let pr = self.prob;
        let w = self.grid.weights();
        let (q, r) = (pr.q.values(), pr.r.values());
        let (f, g, h) = (pr.f.values(), pr.g.values(), pr.h.values());
        let (mut fp, mut gp, mut hp) = (0.0, 0.0, 0.0);
        for k in 0..u.len() {
            let v = u[k];
            if v == 0.0 {
                continue;
            }
            let a = math::abs(v);
            if f[k] != 0.0 {
                fp += w[k] * f[k] * math::powf(a, q[k]) / q[k];
            }
            if g[k] != 0.0 {
                gp += w[k] * g[k] * math::powf(a, r[k]) / r[k];
            }
            hp += w[k] * h[k] * v;
        }
        (fp, gp, hp)
    }

    pub(crate) fn parts(&mut self, u: &[f64]) -> EnergyBreakdown {
        let s = self.load(u);
        self.assemble_parts(s, u)
    }

    fn assemble_parts(&self, s: f64, u: &[f64]) -> EnergyBreakdown {
        let kirchhoff_part = self.prob.kirchhoff.primitive(s);
        let (f_part, g_part, h_part) = self.lower_parts(u);
        EnergyBreakdown {
            s,
            kirchhoff_part,
            f_part,
            g_part,
            h_part,
            total: kirchhoff_part - self.prob.lambda * f_part - g_part - h_part,
        }
    }

    pub(crate) fn energy(&mut self, u: &[f64]) -> f64 {
        self.parts(u).total
    }

    /// Writes `∂J/∂u_i` into `out` (zero on boundary nodes) and returns the
    /// energy breakdown at `u`.
    pub(crate) fn gradient(&mut self, u: &[f64], out: &mut [f64]) -> EnergyBreakdown {
        let s = self.load(u);
        let len = self.grid.len();
        let dim = self.grid.dim();
        let w = self.grid.weights();
        let p = self.prob.p.values();
        for k in 0..len {
            let m2: f64 = (0..dim).map(|a| self.grad[a * len + k] * self.grad[a * len + k]).sum();
            let c = if m2 > 0.0 { w[k] * math::powf(m2, 0.5 * (p[k] - 2.0)) } else { 0.0 };
            for a in 0..dim {
                self.flux[a * len + k] = c * self.grad[a * len + k];
            }
        }
        self.grid.grad_laplacian_adjoint_into(&self.flux, &mut self.lap, out);
        let ms = self.prob.kirchhoff.m(s);
        let pr = self.prob;
        let (q, r) = (pr.q.values(), pr.r.values());
        let (f, g, h) = (pr.f.values(), pr.g.values(), pr.h.values());
        for k in 0..len {
            if self.grid.is_boundary(k) {
                out[k] = 0.0;
                continue;
            }
            let v = u[k];
            let lower = pr.lambda * f[k] * math::signed_pow(v, q[k]) + g[k] * math::signed_pow(v, r[k]) + h[k];
            out[k] = ms * out[k] - w[k] * lower;
        }
        self.assemble_parts(s, u)
    }

    /// Magnitude of `∇Δw` at every node.
    pub(crate) fn grad_magnitude(&mut self, w: &[f64]) -> Vec<f64> {
        self.grid.grad_laplacian_into(w, &mut self.lap, &mut self.grad);
        crate::mesh::magnitude_of(&self.grad, self.grid.len(), self.grid.dim())
    }
}

/// `J` restricted to the ray `t ↦ t·w`, using `∇Δ(t w) = t ∇Δw`.
#[derive(Debug, Clone)]
pub(crate) struct RayProfile<'a> {
    prob: &'a ProblemData,
    dir: Vec<f64>,
    gmag: Vec<f64>,
}

impl<'a> RayProfile<'a> {
    pub(crate) fn new(ev: &mut Evaluator<'a>, dir: &[f64]) -> Self {
        RayProfile {
            prob: ev.prob,
            gmag: ev.grad_magnitude(dir),
            dir: dir.to_vec(),
        }
    }

    fn s(&self, t: f64) -> f64 {
        let w = self.prob.grid().weights();
        let p = self.prob.p.values();
        self.gmag
            .iter()
            .enumerate()
            .map(|(k, &g)| w[k] * math::abs_pow(t * g, p[k]) / p[k])
            .sum()
    }

    /// `J(t w)` for `t ≥ 0`.
    pub(crate) fn energy(&self, t: f64) -> f64 {
        let pr = self.prob;
        let w = pr.grid().weights();
        let (q, r) = (pr.q.values(), pr.r.values());
        let (f, g, h) = (pr.f.values(), pr.g.values(), pr.h.values());
        let (mut fp, mut gp, mut hp) = (0.0, 0.0, 0.0);
        for (k, &d) in self.dir.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let v = t * d;
            fp += w[k] * f[k] * math::abs_pow(v, q[k]) / q[k];
            gp += w[k] * g[k] * math::abs_pow(v, r[k]) / r[k];
            hp += w[k] * h[k] * v;
        }
        pr.kirchhoff.primitive(self.s(t)) - pr.lambda * fp - gp - hp
    }

    /// `d/dt J(t w) = ⟨J'(t w), w⟩` for `t > 0`.
    pub(crate) fn derivative(&self, t: f64) -> f64 {
        let pr = self.prob;
        let w = pr.grid().weights();
        let p = pr.p.values();
        let (q, r) = (pr.q.values(), pr.r.values());
        let (f, g, h) = (pr.f.values(), pr.g.values(), pr.h.values());
        let mut ds = 0.0;
        for (k, &gm) in self.gmag.iter().enumerate() {
            if gm > 0.0 {
                ds += w[k] * math::powf(t, p[k] - 1.0) * math::powf(gm, p[k]);
            }
        }
        let mut lower = 0.0;
        for (k, &d) in self.dir.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let v = t * d;
            lower += w[k]
                * d
                * (pr.lambda * f[k] * math::signed_pow(v, q[k]) + g[k] * math::signed_pow(v, r[k]) + h[k]);
        }
        pr.kirchhoff.m(self.s(t)) * ds - lower
    }
}

fn check_grid(u: &GridFunction, prob: &ProblemData) -> Result<()> {
    if same_grid(u.grid(), prob.grid()) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

pub fn energy_j(u: &GridFunction, prob: &ProblemData) -> Result<EnergyBreakdown> {
    check_grid(u, prob)?;
    Ok(Evaluator::new(prob).parts(u.values()))
}

/// `λ ∫ f|u|^q/q + ∫ g|u|^r/r + ∫ h u`
pub fn potential_phi(u: &GridFunction, prob: &ProblemData) -> Result<f64> {
    check_grid(u, prob)?;
    let (fp, gp, hp) = Evaluator::new(prob).lower_parts(u.values());
    Ok(prob.lambda * fp + gp + hp)
}

/// Nodal gradient `r_i = ⟨J'(u), e_i⟩` on interior nodes, zero on `∂Ω`.
pub fn residual(u: &GridFunction, prob: &ProblemData) -> Result<GridFunction> {
    check_grid(u, prob)?;
    let mut out = vec![0.0; u.values().len()];
    Evaluator::new(prob).gradient(u.values(), &mut out);
    GridFunction::from_values(u.grid(), out)
}

/// Relative mismatch between `⟨residual(u), v⟩` and the central difference
/// `(J(u+hv) - J(u-hv))/(2h)`; zero when both vanish.
pub fn directional_derivative_check(u: &GridFunction, v: &GridFunction, prob: &ProblemData, h: f64) -> Result<f64> {
    check_grid(u, prob)?;
    check_grid(v, prob)?;
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("step h = {h} must be positive")));
    }
    if v.is_zero() {
        return Ok(0.0);
    }
    let mut ev = Evaluator::new(prob);
    let mut r = vec![0.0; u.values().len()];
    ev.gradient(u.values(), &mut r);
    let analytic: f64 = r.iter().zip(v.values()).map(|(a, b)| a * b).sum();
    let plus: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a + h * b).collect();
    let minus: Vec<f64> = u.values().iter().zip(v.values()).map(|(a, b)| a - h * b).collect();
    let fd = (ev.energy(&plus) - ev.energy(&minus)) / (2.0 * h);
    let scale = math::abs(analytic).max(math::abs(fd));
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok(math::abs(analytic - fd) / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{apply_navier_bc, build_grid, first_mode, integrate};
    use core::f64::consts::PI;

    fn canonical(n: usize, lambda: f64) -> ProblemData {
        let grid = build_grid(1, &[1.0], n).unwrap();
        let p = ExponentField::constant(&grid, 2.0, 7).unwrap();
        let q = ExponentField::constant(&grid, 1.5, 7).unwrap();
        let r = ExponentField::constant(&grid, 5.0, 7).unwrap();
        let f = GridFunction::constant(&grid, 1.0);
        let g = GridFunction::from_fn(&grid, |x, _| if (x - 0.5).abs() <= 0.25 { 1.0 } else { 0.0 });
        let h = GridFunction::from_fn(&grid, |x, _| 0.1 * (PI * x).sin().powi(2));
        let mask = (0..grid.len()).map(|k| (grid.coords(k)[0] - 0.5).abs() <= 0.25).collect();
        ProblemData::new(KirchhoffCoefficients::new(1.0, 1.0, 1.0).unwrap(), lambda, p, q, r, f, g, h, mask).unwrap()
    }

    #[test]
    fn kirchhoff_examples() {
        let k = KirchhoffCoefficients::new(1.0, 1.0, 1.0).unwrap();
        assert_eq!(kirchhoff_m(0.0, &k), 1.0);
        assert_eq!(kirchhoff_m(1.0, &k), 0.0);
        let k2 = KirchhoffCoefficients::new(4.0, 1.0, 2.0).unwrap();
        assert!((k2.degeneracy_point() - 2.0).abs() < 1e-15);
        assert_eq!(kirchhoff_m(3.0, &k2), -5.0);
        assert_eq!(kirchhoff_cap(&k), 0.5);
        assert_eq!(kirchhoff_cap(&KirchhoffCoefficients::new(2.0, 1.0, 1.0).unwrap()), 2.0);
        assert!(KirchhoffCoefficients::new(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn cap_matches_brute_force() {
        let k = KirchhoffCoefficients::new(1.0, 2.0, 3.0).unwrap();
        let sstar = k.degeneracy_point();
        let best = (0..=200_000)
            .map(|i| k.primitive(2.0 * sstar * i as f64 / 200_000.0))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((best - k.cap()).abs() < 1e-10);
    }

    #[test]
    fn energy_of_zero_is_zero() {
        let prob = canonical(33, 1.0);
        let e = energy_j(&GridFunction::zeros(prob.grid()), &prob).unwrap();
        assert_eq!(e, EnergyBreakdown::default());
        assert_eq!(potential_phi(&GridFunction::zeros(prob.grid()), &prob).unwrap(), 0.0);
    }

    #[test]
    fn energy_scalar_profile_on_first_mode() {
        let prob = canonical(257, 0.7);
        let phi = first_mode(prob.grid());
        let s1 = energy_j(&phi, &prob).unwrap().s;
        assert!((s1 - PI.powi(6) / 4.0).abs() / s1 < 1e-2);
        for i in 1..=10 {
            let c = 0.02 * i as f64;
            let u = phi.scaled(c);
            let e = energy_j(&u, &prob).unwrap();
            let s = c * c * s1;
            assert!((e.s - s).abs() <= 1e-12 * s);
            let w = prob.grid().weights();
            let xs: Vec<f64> = (0..257).map(|k| prob.grid().coords(k)[0]).collect();
            let fpart: f64 = (0..257).map(|k| w[k] * (c * (PI * xs[k]).sin()).abs().powf(1.5) / 1.5).sum();
            let gpart: f64 = (0..257)
                .map(|k| w[k] * prob.g.values()[k] * (c * (PI * xs[k]).sin()).abs().powi(5) / 5.0)
                .sum();
            let hpart: f64 = (0..257).map(|k| w[k] * prob.h.values()[k] * c * (PI * xs[k]).sin()).sum();
            let expect = s - s * s / 2.0 - 0.7 * fpart - gpart - hpart;
            assert!((e.total - expect).abs() < 1e-12 * (1.0 + expect.abs()), "{} vs {expect}", e.total);
        }
    }

    #[test]
    fn residual_is_pure_load_at_zero() {
        let prob = canonical(33, 1.0);
        let r = residual(&GridFunction::zeros(prob.grid()), &prob).unwrap();
        let w = prob.grid().weights();
        for k in 0..33 {
            let expect = if prob.grid().is_boundary(k) { 0.0 } else { -w[k] * prob.h.values()[k] };
            assert_eq!(r.values()[k], expect);
        }
        let mut no_h = prob.clone();
        no_h.h = GridFunction::zeros(prob.grid());
        assert!(residual(&GridFunction::zeros(prob.grid()), &no_h).unwrap().is_zero());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let prob = canonical(65, 2.0);
        let grid = prob.grid().clone();
        let u = apply_navier_bc(&GridFunction::from_fn(&grid, |x, _| 0.01 * (PI * x).sin() + 0.004 * (3.0 * PI * x).sin()));
        let v = apply_navier_bc(&GridFunction::from_fn(&grid, |x, _| (2.0 * PI * x).sin() + 0.3 * (5.0 * PI * x).sin()));
        let err = directional_derivative_check(&u, &v, &prob, 1e-5).unwrap();
        assert!(err < 1e-5, "{err}");
        assert_eq!(directional_derivative_check(&u, &GridFunction::zeros(&grid), &prob, 1e-5).unwrap(), 0.0);
    }

    #[test]
    fn phi_plus_total_is_kirchhoff_part() {
        let prob = canonical(65, 1.3);
        let u = apply_navier_bc(&GridFunction::from_fn(prob.grid(), |x, _| 0.05 * (PI * x).sin() - 0.02 * (4.0 * PI * x).sin()));
        let e = energy_j(&u, &prob).unwrap();
        let phi = potential_phi(&u, &prob).unwrap();
        assert!((e.total + phi - e.kirchhoff_part).abs() < 1e-12 * e.kirchhoff_part.abs().max(1.0));
        assert!(e.kirchhoff_part <= kirchhoff_cap(&prob.kirchhoff));
    }

    #[test]
    fn ray_profile_agrees_with_full_energy() {
        let prob = canonical(65, 1.3);
        let d = apply_navier_bc(&GridFunction::from_fn(prob.grid(), |x, _| (PI * x).sin() + 0.2 * (2.0 * PI * x).sin()));
        let mut ev = Evaluator::new(&prob);
        let ray = RayProfile::new(&mut ev, d.values());
        let mut g = vec![0.0; 65];
        for t in [1e-3, 0.01, 0.03, 0.1] {
            let full = ev.energy(d.scaled(t).values());
            assert!((ray.energy(t) - full).abs() < 1e-13 * (1.0 + full.abs()));
            ev.gradient(d.scaled(t).values(), &mut g);
            let dd: f64 = g.iter().zip(d.values()).map(|(a, b)| a * b).sum();
            assert!((ray.derivative(t) - dd).abs() < 1e-9 * (1.0 + dd.abs()), "{} vs {dd}", ray.derivative(t));
        }
        let _ = integrate(&d);
    }
}
