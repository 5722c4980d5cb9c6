//! The two solutions: a positive-energy saddle by a ray minimax (mountain
//! pass) and a negative-energy local minimizer by projected descent in the
//! ball `{x_norm ≤ ρ}`, plus the Palais–Smale monitor and the certified
//! pipeline that ties them to the geometry.
//!
//! Both solvers step along `d = -K⁻¹ r`, where `r` is the nodal gradient and
//! `K = Gᵀ W G` is the `p = 2` stiffness of `∇Δ` on interior nodes. Trial
//! steps alternate between a growing step and `1/|M(s)|`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::energy::{EnergyBreakdown, Evaluator, ProblemData, RayProfile};
use crate::error::Error;
use crate::exponents::{check_h1, DEFAULT_CHAIN_MARGIN};
use crate::geometry::{
    check_h2, default_ray_schedule, default_rho_grid, default_small_t_schedule, find_divergence_ray,
    mountain_pass_constants, verify_small_t_negative, verify_small_t_negative_concave, verify_sphere_lower_bound,
    DivergenceRay, GeometryConstants, HypothesisReport, SphereCheck, WeightMode,
};
use crate::linalg::BandedCholesky;
use crate::math;
use crate::mesh::{apply_navier_bc, first_mode, same_grid, x_norm_of_magnitude, GridFunction};
use crate::varx::{sine_series_probe, EmbeddingConstants};

/// `|gap| < NEAR_DEGENERATE` marks the degenerate case `s ≈ (a/b)^{1/γ}`.
pub const NEAR_DEGENERATE: f64 = 1e-6;

const MAX_BACKTRACKS: usize = 60;
/// Largest accepted step relative to the current iterate, in the `K` norm.
const MAX_RELATIVE_STEP: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub max_iters: usize,
    /// Threshold on the Euclidean norm of the nodal gradient.
    pub grad_tol: f64,
    pub step_init: f64,
    /// Nodes of the discrete path `0 → T·w`.
    pub path_points: usize,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
    /// `None` selects the midpoint of the admissible window.
    pub theta: Option<f64>,
    pub seed: u64,
    /// Bound for the `bounded_flag` of [`PsReport`].
    pub norm_bound: f64,
    pub sphere_samples: usize,
    pub embedding_probes: usize,
    /// Random test directions for the weak-form re-verification.
    pub weak_form_directions: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            max_iters: 5000,
            grad_tol: 1e-6,
            step_init: 1.0,
            path_points: 33,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
            theta: None,
            seed: 7,
            norm_bound: 1e3,
            sphere_samples: 512,
            embedding_probes: 512,
            weak_form_directions: 50,
        }
    }
}

/// `(p₊, min{r₋, (p₋)^{γ+1}(γ+1)/(p₊)^γ})`
pub fn theta_window(prob: &ProblemData) -> (f64, f64) {
    let (pm, pp) = (prob.p.p_minus(), prob.p.p_plus());
    let g = prob.kirchhoff.gamma;
    let upper = prob.r.p_minus().min(math::powf(pm, g + 1.0) * (g + 1.0) / math::powf(pp, g));
    (pp, upper)
}

impl SolverParams {
    /// Checks the numeric ranges and returns the `θ` in use.
    pub fn validate(&self, prob: &ProblemData) -> Result<f64, SolverError> {
        let bad = |m: String| SolverError::Core(Error::InvalidParameter(m));
        if self.max_iters == 0 {
            return Err(bad("max_iters must be positive".into()));
        }
        if !(self.grad_tol > 0.0) {
            return Err(bad(format!("grad_tol = {} must be positive", self.grad_tol)));
        }
        if !(self.step_init > 0.0) {
            return Err(bad(format!("step_init = {} must be positive", self.step_init)));
        }
        if self.path_points < 3 {
            return Err(bad(format!("path_points = {} must be at least 3", self.path_points)));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return Err(bad(format!("backtrack_factor = {} must lie in (0,1)", self.backtrack_factor)));
        }
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(bad(format!("armijo_c = {} must lie in (0,1)", self.armijo_c)));
        }
        let (lo, hi) = theta_window(prob);
        if !(lo < hi) {
            return Err(SolverError::CertificationFailed {
                clause: Clause::ThetaWindow,
                detail: format!("empty theta window ({lo}, {hi})"),
            });
        }
        let theta = self.theta.unwrap_or(0.5 * (lo + hi));
        if !(theta > lo && theta < hi) {
            return Err(SolverError::CertificationFailed {
                clause: Clause::ThetaWindow,
                detail: format!("theta = {theta} outside ({lo}, {hi})"),
            });
        }
        Ok(theta)
    }
}

/// Palais–Smale diagnostics at the end of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsReport {
    pub level_c: f64,
    pub cap: f64,
    pub below_cap: bool,
    /// `a - b s^γ` at the final iterate.
    pub degeneracy_gap: f64,
    pub near_degenerate: bool,
    pub sup_norm: f64,
    pub bounded_flag: bool,
}

impl PsReport {
    fn new(level_c: f64, s: f64, sup_norm: f64, prob: &ProblemData, bound: f64) -> Self {
        let cap = prob.kirchhoff.cap();
        let gap = prob.kirchhoff.m(s);
        PsReport {
            level_c,
            cap,
            below_cap: level_c < cap,
            degeneracy_gap: gap,
            near_degenerate: math::abs(gap) < NEAR_DEGENERATE,
            sup_norm,
            bounded_flag: sup_norm < bound,
        }
    }
}

/// Palais–Smale monitor over a list of iterates (the last one is the
/// current iterate).
pub fn ps_monitor(history: &[GridFunction], prob: &ProblemData, params: &SolverParams) -> Result<PsReport, SolverError> {
    let last = history
        .last()
        .ok_or_else(|| Error::InvalidParameter("empty iterate history".into()))?;
    let mut ws_sup = 0.0f64;
    let mut ev = Evaluator::new(prob);
    for u in history {
        if !same_grid(u.grid(), prob.grid()) {
            return Err(Error::GridMismatch.into());
        }
        let mag = ev.grad_magnitude(u.values());
        ws_sup = ws_sup.max(x_norm_of_magnitude(&mag, prob.grid().weights(), prob.p.values())?);
    }
    let e = ev.parts(last.values());
    Ok(PsReport::new(e.total, e.s, ws_sup, prob, params.norm_bound))
}

/// One line of the iteration log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub energy: f64,
    pub residual: f64,
    pub x_norm: f64,
    pub gap: f64,
    /// Accepted step (0 on the final record).
    pub step: f64,
}

impl IterationRecord {
    pub const CSV_HEADER: &'static str = "iter,J,residual,x_norm,gap";
}

/// Failed certification gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clause {
    H1,
    H2,
    ThetaWindow,
    Geometry,
    LambdaGate,
    HGate,
    SphereBound,
    DivergenceRay,
    SmallT,
    Residual1,
    Residual2,
    LevelAlpha,
    LevelNegative,
    Interior,
    Cap,
    WeakForm,
}

impl Clause {
    pub fn as_str(&self) -> &'static str {
        match self {
            Clause::H1 => "H1",
            Clause::H2 => "H2",
            Clause::ThetaWindow => "theta_window",
            Clause::Geometry => "geometry",
            Clause::LambdaGate => "lambda_gate",
            Clause::HGate => "h_gate",
            Clause::SphereBound => "sphere_bound",
            Clause::DivergenceRay => "divergence_ray",
            Clause::SmallT => "small_t",
            Clause::Residual1 => "residual_u1",
            Clause::Residual2 => "residual_u2",
            Clause::LevelAlpha => "level_alpha",
            Clause::LevelNegative => "level_negative",
            Clause::Interior => "interior",
            Clause::Cap => "cap",
            Clause::WeakForm => "weak_form",
        }
    }
}

impl core::fmt::Display for Clause {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("iteration limit {iterations} reached (residual {residual:e}, J = {energy})")]
    IterationLimit {
        iterations: usize,
        residual: f64,
        energy: f64,
        iterate: GridFunction,
    },
    #[error("level {level} exceeds the Kirchhoff cap {cap}")]
    CapExceeded { level: f64, cap: f64 },
    #[error("descent converged on the sphere: x_norm = {norm}, rho = {rho}")]
    BoundaryTrap { norm: f64, rho: f64, energy: f64 },
    #[error("line search found no decrease at iteration {iteration} (residual {residual:e})")]
    LineSearchFailed {
        iteration: usize,
        residual: f64,
        iterate: GridFunction,
    },
    #[error("certification failed at {clause}: {detail}")]
    CertificationFailed { clause: Clause, detail: String },
    #[error(transparent)]
    Core(#[from] Error),
}

impl SolverError {
    /// Short machine-readable tag.
    pub fn clause(&self) -> &'static str {
        match self {
            SolverError::IterationLimit { .. } => "iteration_limit",
            SolverError::CapExceeded { .. } => "cap_exceeded",
            SolverError::BoundaryTrap { .. } => "boundary_trap",
            SolverError::LineSearchFailed { .. } => "line_search",
            SolverError::CertificationFailed { clause, .. } => clause.as_str(),
            SolverError::Core(_) => "input",
        }
    }

    fn gate(clause: Clause, detail: String) -> Self {
        SolverError::CertificationFailed { clause, detail }
    }
}

/// Gradient, preconditioner and `K`-geometry shared by both solvers.
#[derive(Debug)]
struct Workspace<'a> {
    ev: Evaluator<'a>,
    prob: &'a ProblemData,
    interior: Vec<usize>,
    chol: BandedCholesky,
    grad: Vec<f64>,
    lap: Vec<f64>,
    ga: Vec<f64>,
    gb: Vec<f64>,
}

impl<'a> Workspace<'a> {
    fn new(prob: &'a ProblemData) -> Result<Self, SolverError> {
        let grid = prob.grid();
        let len = grid.len();
        let dim = grid.dim();
        let interior = grid.interior_indices();
        let m = interior.len();
        let mut pos = vec![usize::MAX; len];
        for (i, &k) in interior.iter().enumerate() {
            pos[k] = i;
        }
        let n = grid.nodes_per_axis();
        let bw = if dim == 1 { 4 } else { 4 * (n - 2) + 4 }.min(m.saturating_sub(1));
        let w = bw + 1;
        let mut band = vec![0.0; m * w];
        let mut e = vec![0.0; len];
        let mut lap = vec![0.0; len];
        let mut g = vec![0.0; len * dim];
        let mut col = vec![0.0; len];
        let weights = grid.weights();
        for (j, &kj) in interior.iter().enumerate() {
            e[kj] = 1.0;
            grid.grad_laplacian_into(&e, &mut lap, &mut g);
            e[kj] = 0.0;
            for a in 0..dim {
                for k in 0..len {
                    g[a * len + k] *= weights[k];
                }
            }
            grid.grad_laplacian_adjoint_into(&g, &mut lap, &mut col);
            for (k, &c) in col.iter().enumerate() {
                let i = pos[k];
                if i == usize::MAX || i < j || c == 0.0 {
                    continue;
                }
                if i - j > bw {
                    return Err(Error::InvalidParameter(format!("stiffness band wider than {bw}")).into());
                }
                band[j * w + (i - j)] = c;
            }
        }
        let chol = BandedCholesky::factor(m, bw, |i, j| band[j * w + (i - j)])
            .ok_or_else(|| Error::InvalidParameter("stiffness matrix is not positive definite".into()))?;
        debug_assert_eq!(chol.len(), m);
        Ok(Workspace {
            ev: Evaluator::new(prob),
            prob,
            interior,
            chol,
            grad: vec![0.0; len],
            lap,
            ga: vec![0.0; len * dim],
            gb: vec![0.0; len * dim],
        })
    }

    /// `K⁻¹ r`, zero on the boundary.
    fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let mut b: Vec<f64> = self.interior.iter().map(|&k| r[k]).collect();
        self.chol.solve(&mut b);
        let mut out = vec![0.0; r.len()];
        for (&k, v) in self.interior.iter().zip(b) {
            out[k] = v;
        }
        out
    }

    fn k_dot(&mut self, a: &[f64], b: &[f64]) -> f64 {
        let grid = self.ev.grid;
        let len = grid.len();
        grid.grad_laplacian_into(a, &mut self.lap, &mut self.ga);
        grid.grad_laplacian_into(b, &mut self.lap, &mut self.gb);
        let w = grid.weights();
        self.ga
            .iter()
            .zip(&self.gb)
            .enumerate()
            .map(|(i, (x, y))| w[i % len] * x * y)
            .sum()
    }

    fn k_norm(&mut self, a: &[f64]) -> f64 {
        math::sqrt(self.k_dot(a, a))
    }

    fn x_norm(&mut self, u: &[f64]) -> Result<f64, SolverError> {
        let mag = self.ev.grad_magnitude(u);
        Ok(x_norm_of_magnitude(&mag, self.ev.grid.weights(), self.prob.p.values())?)
    }

    /// Gradient into `self.grad`; returns the breakdown and its Euclidean norm.
    fn gradient(&mut self, u: &[f64]) -> (EnergyBreakdown, f64) {
        let mut g = core::mem::take(&mut self.grad);
        let e = self.ev.gradient(u, &mut g);
        let n = math::sqrt(g.iter().map(|v| v * v).sum());
        self.grad = g;
        (e, n)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: &[f64], t: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + t * y).collect()
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    let gr = 0.5 * (math::sqrt(5.0) - 1.0);
    let mut c = hi - gr * (hi - lo);
    let mut d = lo + gr * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut guard = 0;
    while hi - lo > rel_tol * (math::abs(lo) + math::abs(hi)) && guard < 200 {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - gr * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + gr * (hi - lo);
            fd = f(d);
        }
        guard += 1;
    }
    0.5 * (lo + hi)
}

/// Root of `g` in `[lo, hi]` with `g(lo) > 0 > g(hi)`, by the Illinois
/// variant of regula falsi.
fn illinois_root(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let (mut glo, mut ghi) = (g(lo), g(hi));
    let mut side = 0i8;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        x = (lo * ghi - hi * glo) / (ghi - glo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let gx = g(x);
        if gx == 0.0 || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        if gx > 0.0 {
            lo = x;
            glo = gx;
            if side == 1 {
                ghi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            ghi = gx;
            if side == -1 {
                glo *= 0.5;
            }
            side = -1;
        }
    }
    x
}

/// Maximizer of `t ↦ J(t w)` over the discrete path.
#[derive(Debug, Clone)]
struct RayMax {
    dir: Vec<f64>,
    t: f64,
    energy: f64,
    path_energies: Vec<f64>,
}

/// The path `t_j = T j/(P-1)`, `j = 0..P`, along `w`. Its end `T` is the
/// first of `T₀·1.5^k` with `J(T w) < 0` and `x_norm(T w) > ρ`.
fn ray_max(ws: &mut Workspace, dir: Vec<f64>, t_end0: f64, rho: f64, points: usize) -> Result<RayMax, SolverError> {
    let ray = RayProfile::new(&mut ws.ev, &dir);
    let mut t_end = t_end0;
    let mut tries = 0;
    loop {
        if ray.energy(t_end) < 0.0 {
            let scaled: Vec<f64> = dir.iter().map(|v| v * t_end).collect();
            if ws.x_norm(&scaled)? > rho {
                break;
            }
        }
        t_end *= 1.5;
        tries += 1;
        if tries > 200 || !t_end.is_finite() {
            return Err(Error::NoDescentFound { last_energy: ray.energy(t_end) }.into());
        }
    }
    let ts: Vec<f64> = (0..points).map(|j| t_end * j as f64 / (points - 1) as f64).collect();
    let path_energies: Vec<f64> = ts.iter().map(|&t| ray.energy(t)).collect();
    let mut jmax = 1;
    for j in 2..points - 1 {
        if path_energies[j] > path_energies[jmax] {
            jmax = j;
        }
    }
    let (lo, hi) = (ts[jmax - 1], ts[jmax + 1]);
    let phi = |t: f64| ray.energy(t);
    let dphi = |t: f64| ray.derivative(t);
    let tg = golden_max(&phi, lo, hi, 1e-7);
    let mut best = (tg, phi(tg));
    let (a, b) = ((tg * (1.0 - 1e-4)).max(lo), (tg * (1.0 + 1e-4)).min(hi));
    let (da, db) = (dphi(a), dphi(b));
    if da > 0.0 && db < 0.0 && a > 0.0 {
        let tr = illinois_root(&dphi, a, b);
        let er = phi(tr);
        if er >= best.1 {
            best = (tr, er);
        }
    }
    Ok(RayMax {
        dir,
        t: best.0,
        energy: best.1,
        path_energies,
    })
}

/// Result of one solver run.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutcome {
    pub solution: GridFunction,
    pub energy: f64,
    pub residual: f64,
    pub x_norm: f64,
    pub iterations: usize,
    pub ps: PsReport,
    pub history: Vec<IterationRecord>,
    /// Mountain pass only: path maximum per iteration.
    pub path_levels: Vec<f64>,
    /// Mountain pass only: `J` at the nodes of the final path.
    pub path_energies: Vec<f64>,
}

/// Ray minimax for the mountain-pass level. The path runs straight from 0
/// through the current maximizer direction `w`; each iteration moves `w`
/// along the `K`-orthogonal part of `-K⁻¹ r` at the path maximizer, with an
/// Armijo test on `w ↦ max_t J(t w)`, so the path maximum never increases.
pub fn mountain_pass_solve(
    prob: &ProblemData,
    geo: &GeometryConstants,
    e: &GridFunction,
    params: &SolverParams,
) -> Result<SolverOutcome, SolverError> {
    if !same_grid(e.grid(), prob.grid()) {
        return Err(Error::GridMismatch.into());
    }
    let mut ws = Workspace::new(prob)?;
    let e_vals = apply_navier_bc(e).into_values();
    let t_e = ws.k_norm(&e_vals);
    if !(t_e > 0.0) {
        return Err(Error::InvalidParameter("endpoint e must be nonzero".into()).into());
    }
    let cap = prob.kirchhoff.cap();
    let dir: Vec<f64> = e_vals.iter().map(|v| v / t_e).collect();
    let mut cur = ray_max(&mut ws, dir, t_e, geo.rho, params.path_points)?;
    let mut history = Vec::new();
    let mut path_levels = Vec::new();
    let mut tau = params.step_init;
    let mut sup_norm = 0.0f64;
    for it in 0..params.max_iters {
        let v: Vec<f64> = cur.dir.iter().map(|x| x * cur.t).collect();
        let (parts, res) = ws.gradient(&v);
        let xn = ws.x_norm(&v)?;
        sup_norm = sup_norm.max(xn);
        path_levels.push(cur.energy);
        let gap = prob.kirchhoff.m(parts.s);
        history.push(IterationRecord {
            iter: it,
            energy: parts.total,
            residual: res,
            x_norm: xn,
            gap,
            step: 0.0,
        });
        if cur.energy > cap {
            return Err(SolverError::CapExceeded { level: cur.energy, cap });
        }
        if res <= params.grad_tol {
            let ps = PsReport::new(parts.total, parts.s, sup_norm, prob, params.norm_bound);
            return Ok(SolverOutcome {
                solution: GridFunction::from_values(prob.grid(), v)?,
                energy: parts.total,
                residual: res,
                x_norm: xn,
                iterations: it + 1,
                ps,
                history,
                path_levels,
                path_energies: cur.path_energies,
            });
        }
        let r = ws.grad.clone();
        let mut d: Vec<f64> = ws.precondition(&r).iter().map(|x| -x).collect();
        let along = ws.k_dot(&cur.dir, &d);
        d = axpy(&d, -along, &cur.dir);
        let slope = dot(&r, &d);
        let dn = ws.k_norm(&d);
        if !(slope < 0.0 && dn > 0.0) {
            return Err(SolverError::LineSearchFailed {
                iteration: it,
                residual: res,
                iterate: GridFunction::from_values(prob.grid(), v)?,
            });
        }
        let smax = MAX_RELATIVE_STEP * cur.t / dn;
        let smoothing = it % 2 == 1;
        let mut trial = if smoothing {
            (1.0 / math::abs(parts_gap_or(gap))).min(smax)
        } else {
            (2.0 * tau).min(smax)
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut wn = axpy(&cur.dir, trial / cur.t, &d);
            let nn = ws.k_norm(&wn);
            wn.iter_mut().for_each(|x| *x /= nn);
            let cand = ray_max(&mut ws, wn, t_e, geo.rho, params.path_points)?;
            if cand.energy <= cur.energy + params.armijo_c * trial * slope {
                accepted = Some(cand);
                break;
            }
            trial *= params.backtrack_factor;
        }
        match accepted {
            Some(c) => {
                if !smoothing {
                    tau = trial;
                }
                history.last_mut().expect("record pushed").step = trial;
                cur = c;
            }
            None => {
                return Err(SolverError::LineSearchFailed {
                    iteration: it,
                    residual: res,
                    iterate: GridFunction::from_values(prob.grid(), v)?,
                })
            }
        }
    }
    let v: Vec<f64> = cur.dir.iter().map(|x| x * cur.t).collect();
    let (parts, res) = ws.gradient(&v);
    Err(SolverError::IterationLimit {
        iterations: params.max_iters,
        residual: res,
        energy: parts.total,
        iterate: GridFunction::from_values(prob.grid(), v)?,
    })
}

fn parts_gap_or(gap: f64) -> f64 {
    if gap == 0.0 {
        f64::MIN_POSITIVE
    } else {
        gap
    }
}

/// Monotone projected descent in `{x_norm ≤ ρ}` from `starter`. Steps are
/// accepted by the projected Armijo test
/// `J(P(u + τd)) ≤ J(u) + c⟨r, P(u + τd) - u⟩`.
pub fn ekeland_ball_descent(
    prob: &ProblemData,
    geo: &GeometryConstants,
    starter: &GridFunction,
    params: &SolverParams,
) -> Result<SolverOutcome, SolverError> {
    if !same_grid(starter.grid(), prob.grid()) {
        return Err(Error::GridMismatch.into());
    }
    let mut ws = Workspace::new(prob)?;
    let rho = geo.rho;
    let mut u = apply_navier_bc(starter).into_values();
    let n0 = ws.x_norm(&u)?;
    if n0 > rho {
        u.iter_mut().for_each(|x| *x *= rho / n0);
    }
    let mut history = Vec::new();
    let mut tau = params.step_init;
    let mut sup_norm = 0.0f64;
    for it in 0..params.max_iters {
        let (parts, res) = ws.gradient(&u);
        let xn = ws.x_norm(&u)?;
        sup_norm = sup_norm.max(xn);
        let gap = prob.kirchhoff.m(parts.s);
        history.push(IterationRecord {
            iter: it,
            energy: parts.total,
            residual: res,
            x_norm: xn,
            gap,
            step: 0.0,
        });
        if res <= params.grad_tol {
            if xn >= rho * (1.0 - 1e-9) {
                return Err(SolverError::BoundaryTrap {
                    norm: xn,
                    rho,
                    energy: parts.total,
                });
            }
            let ps = PsReport::new(parts.total, parts.s, sup_norm, prob, params.norm_bound);
            return Ok(SolverOutcome {
                solution: GridFunction::from_values(prob.grid(), u)?,
                energy: parts.total,
                residual: res,
                x_norm: xn,
                iterations: it + 1,
                ps,
                history,
                path_levels: Vec::new(),
                path_energies: Vec::new(),
            });
        }
        let r = ws.grad.clone();
        let d: Vec<f64> = ws.precondition(&r).iter().map(|x| -x).collect();
        let smoothing = it % 2 == 1;
        let mut trial = if smoothing {
            1.0 / math::abs(parts_gap_or(gap))
        } else {
            2.0 * tau
        };
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut cand = axpy(&u, trial, &d);
            let nc = ws.x_norm(&cand)?;
            if nc > rho {
                cand.iter_mut().for_each(|x| *x *= rho / nc);
            }
            let moved: Vec<f64> = cand.iter().zip(&u).map(|(a, b)| a - b).collect();
            let predicted = dot(&r, &moved);
            let ec = ws.ev.energy(&cand);
            if predicted < 0.0 && ec <= parts.total + params.armijo_c * predicted {
                accepted = Some(cand);
                break;
            }
            trial *= params.backtrack_factor;
        }
        match accepted {
            Some(c) => {
                if !smoothing {
                    tau = trial;
                }
                history.last_mut().expect("record pushed").step = trial;
                u = c;
            }
            None => {
                return Err(SolverError::LineSearchFailed {
                    iteration: it,
                    residual: res,
                    iterate: GridFunction::from_values(prob.grid(), u)?,
                })
            }
        }
    }
    let (parts, res) = ws.gradient(&u);
    Err(SolverError::IterationLimit {
        iterations: params.max_iters,
        residual: res,
        energy: parts.total,
        iterate: GridFunction::from_values(prob.grid(), u)?,
    })
}

/// Which existence statement the pipeline certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Weights under (H2); gates `λ < λ̄` and `|h| < δ`.
    Theorem1,
    /// `h ≡ 0` and `g > 0` on `Ω₀`; gate `λ < λ̄`.
    Theorem2,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Theorem1 => "theorem1",
            Mode::Theorem2 => "theorem2",
        }
    }
}

/// Directions and schedules of the pipeline. `None` fields use the
/// defaults described on [`default_phi0`] and [`default_psi0`].
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub phi0: Option<GridFunction>,
    pub psi0: Option<GridFunction>,
    pub rho_grid: Vec<f64>,
    pub ray_schedule: Vec<f64>,
    pub small_t_schedule: Vec<f64>,
}

impl PipelineConfig {
    pub fn new(mode: Mode) -> Self {
        PipelineConfig {
            mode,
            phi0: None,
            psi0: None,
            rho_grid: default_rho_grid(),
            ray_schedule: default_ray_schedule(),
            small_t_schedule: default_small_t_schedule(),
        }
    }
}

fn normalized(u: GridFunction, prob: &ProblemData) -> Result<GridFunction, SolverError> {
    let u = apply_navier_bc(&u);
    let n = crate::mesh::x_norm(&u, &prob.p)?;
    if !(n > 0.0) {
        return Err(Error::InvalidParameter("direction has zero norm".into()).into());
    }
    Ok(u.scaled(1.0 / n))
}

/// Smooth bump on the bounding box of `Ω₀`, or the first Navier mode when
/// `Ω₀` is empty; scaled to `x_norm = 1`.
pub fn default_phi0(prob: &ProblemData) -> Result<GridFunction, SolverError> {
    let grid = prob.grid();
    let inside: Vec<usize> = (0..grid.len()).filter(|&k| prob.omega0_mask[k]).collect();
    if inside.is_empty() {
        return normalized(first_mode(grid), prob);
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for &k in &inside {
        let c = grid.coords(k);
        for a in 0..2 {
            lo[a] = lo[a].min(c[a]);
            hi[a] = hi[a].max(c[a]);
        }
    }
    let dim = grid.dim();
    let bump = |x: f64, a: usize| {
        let c = 0.5 * (lo[a] + hi[a]);
        let r = 0.5 * (hi[a] - lo[a]);
        if r <= 0.0 {
            return if x == c { 1.0 } else { 0.0 };
        }
        let z = (x - c) / r;
        if math::abs(z) < 1.0 {
            math::exp(1.0 - 1.0 / (1.0 - z * z))
        } else {
            0.0
        }
    };
    let u = GridFunction::from_fn(grid, |x, y| if dim == 1 { bump(x, 0) } else { bump(x, 0) * bump(y, 1) });
    normalized(u, prob)
}

/// `h` itself in the first mode, the first Navier mode in the second;
/// scaled to `x_norm = 1`.
pub fn default_psi0(prob: &ProblemData, mode: Mode) -> Result<GridFunction, SolverError> {
    match mode {
        Mode::Theorem1 if !prob.h.is_zero() => normalized(prob.h.clone(), prob),
        _ => normalized(first_mode(prob.grid()), prob),
    }
}

/// Geometry gates and the two starting points.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryStage {
    pub theta: f64,
    pub constants: GeometryConstants,
    pub sphere: SphereCheck,
    pub ray: DivergenceRay,
    pub starter_t: f64,
    pub starter_energy: f64,
    pub starter: GridFunction,
}

/// Everything a pipeline run produced, including partial results of a
/// failed run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub h1: HypothesisReport,
    pub h2: HypothesisReport,
    pub geometry: Option<GeometryStage>,
    pub mountain: Option<SolverOutcome>,
    pub descent: Option<SolverOutcome>,
    /// Worst `|⟨J'(u), v⟩| / (x_norm(v) √n)` over the test directions, for
    /// `u₁` and `u₂`.
    pub weak_form: Option<(f64, f64)>,
    pub verdict: Result<(), SolverError>,
}

impl PipelineRun {
    pub fn certified(&self) -> bool {
        self.verdict.is_ok()
    }
}

/// The certified pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionPair {
    pub u1: GridFunction,
    pub j1: f64,
    pub res1: f64,
    pub u2: GridFunction,
    pub j2: f64,
    pub res2: f64,
    pub ps1: PsReport,
    pub ps2: PsReport,
    pub geometry: GeometryConstants,
}

/// Hypotheses, `θ`, constants, the `λ` and `h` gates, the sampled sphere
/// bound, the divergence ray and the small-`t` starter.
pub fn geometry_stage(prob: &ProblemData, params: &SolverParams, config: &PipelineConfig) -> Result<GeometryStage, SolverError> {
    let h1 = check_h1(&prob.p, &prob.q, &prob.r, prob.kirchhoff.gamma, DEFAULT_CHAIN_MARGIN);
    if let Some(s) = h1.summary() {
        return Err(SolverError::gate(Clause::H1, s));
    }
    let h2 = check_h2(prob, weight_mode(config.mode));
    if let Some(s) = h2.summary() {
        return Err(SolverError::gate(Clause::H2, s));
    }
    geometry_after_hypotheses(prob, params, config)
}

fn weight_mode(mode: Mode) -> WeightMode {
    match mode {
        Mode::Theorem1 => WeightMode::H2,
        Mode::Theorem2 => WeightMode::H2Prime,
    }
}

fn geometry_after_hypotheses(prob: &ProblemData, params: &SolverParams, config: &PipelineConfig) -> Result<GeometryStage, SolverError> {
    let theta = params.validate(prob)?;
    let constants = EmbeddingConstants::estimate(&prob.p, &prob.q, &prob.r, params.embedding_probes, params.seed)?;
    let geo = mountain_pass_constants(prob, constants, &config.rho_grid)
        .map_err(|e| SolverError::gate(Clause::Geometry, format!("{e}")))?;
    if !(prob.lambda > 0.0 && prob.lambda < geo.lambda_bar) {
        return Err(SolverError::gate(
            Clause::LambdaGate,
            format!("lambda = {} not in (0, lambda_bar = {})", prob.lambda, geo.lambda_bar),
        ));
    }
    if config.mode == Mode::Theorem1 && !(geo.norms.h_conj < geo.delta) {
        return Err(SolverError::gate(
            Clause::HGate,
            format!("|h| = {} not below delta = {}", geo.norms.h_conj, geo.delta),
        ));
    }
    let sphere = verify_sphere_lower_bound(prob, &geo, params.sphere_samples, params.seed)?;
    if let Some(s) = sphere.report.summary() {
        return Err(SolverError::gate(Clause::SphereBound, s));
    }
    let phi0 = match &config.phi0 {
        Some(p) => p.clone(),
        None => default_phi0(prob)?,
    };
    let ray = find_divergence_ray(prob, &geo, &phi0, &config.ray_schedule)
        .map_err(|e| SolverError::gate(Clause::DivergenceRay, format!("{e}")))?;
    let psi0 = match &config.psi0 {
        Some(p) => p.clone(),
        None => default_psi0(prob, config.mode)?,
    };
    let found = if prob.h.is_zero() {
        verify_small_t_negative_concave(prob, &geo, &psi0, &config.small_t_schedule)
    } else {
        verify_small_t_negative(prob, &geo, &psi0, &config.small_t_schedule)
    };
    let (starter_t, starter_energy) = found.map_err(|e| SolverError::gate(Clause::SmallT, format!("{e}")))?;
    Ok(GeometryStage {
        theta,
        constants: geo,
        sphere,
        ray,
        starter_t,
        starter_energy,
        starter: psi0.scaled(starter_t),
    })
}

/// Worst normalized weak-form defect `|⟨r, v⟩| / (x_norm(v) √n)` over seeded
/// test directions.
pub fn weak_form_defect(u: &GridFunction, prob: &ProblemData, directions: usize, seed: u64) -> Result<f64, SolverError> {
    let r = crate::energy::residual(u, prob)?;
    let margin = math::sqrt(prob.grid().len() as f64);
    let mut worst = 0.0f64;
    for i in 0..directions {
        let v = sine_series_probe(prob.grid(), seed ^ 0x5e_ed0f_d1ec, i as u64);
        let n = crate::mesh::x_norm(&v, &prob.p)?;
        if n > 0.0 {
            worst = worst.max(math::abs(dot(r.values(), v.values())) / (n * margin));
        }
    }
    Ok(worst)
}

/// Runs every gate and both solvers, keeping partial results.
pub fn run_pipeline(prob: &ProblemData, params: &SolverParams, config: &PipelineConfig) -> PipelineRun {
    let h1 = check_h1(&prob.p, &prob.q, &prob.r, prob.kirchhoff.gamma, DEFAULT_CHAIN_MARGIN);
    let h2 = check_h2(prob, weight_mode(config.mode));
    let mut run = PipelineRun {
        h1: h1.clone(),
        h2: h2.clone(),
        geometry: None,
        mountain: None,
        descent: None,
        weak_form: None,
        verdict: Ok(()),
    };
    if let Some(s) = h1.summary() {
        run.verdict = Err(SolverError::gate(Clause::H1, s));
        return run;
    }
    if let Some(s) = h2.summary() {
        run.verdict = Err(SolverError::gate(Clause::H2, s));
        return run;
    }
    let stage = match geometry_after_hypotheses(prob, params, config) {
        Ok(s) => s,
        Err(e) => {
            run.verdict = Err(e);
            return run;
        }
    };
    let geo = stage.constants;
    let e = stage.ray.e.clone();
    let starter = stage.starter.clone();
    run.geometry = Some(stage);
    let mountain = match mountain_pass_solve(prob, &geo, &e, params) {
        Ok(m) => m,
        Err(e) => {
            run.verdict = Err(e);
            return run;
        }
    };
    run.mountain = Some(mountain.clone());
    let descent = match ekeland_ball_descent(prob, &geo, &starter, params) {
        Ok(d) => d,
        Err(e) => {
            run.verdict = Err(e);
            return run;
        }
    };
    run.descent = Some(descent.clone());
    let weak = weak_form_defect(&mountain.solution, prob, params.weak_form_directions, params.seed)
        .and_then(|a| Ok((a, weak_form_defect(&descent.solution, prob, params.weak_form_directions, params.seed)?)));
    match weak {
        Ok(w) => run.weak_form = Some(w),
        Err(e) => {
            run.verdict = Err(e);
            return run;
        }
    }
    run.verdict = certify(&mountain, &descent, &geo, prob, params, run.weak_form.expect("set above"));
    run
}

fn certify(
    m: &SolverOutcome,
    d: &SolverOutcome,
    geo: &GeometryConstants,
    prob: &ProblemData,
    params: &SolverParams,
    weak: (f64, f64),
) -> Result<(), SolverError> {
    let tol = params.grad_tol;
    let cap = prob.kirchhoff.cap();
    let checks = [
        (m.residual <= tol, Clause::Residual1, format!("residual {:e} > {tol:e}", m.residual)),
        (d.residual <= tol, Clause::Residual2, format!("residual {:e} > {tol:e}", d.residual)),
        (m.energy >= geo.alpha && m.energy > 0.0, Clause::LevelAlpha, format!("J(u1) = {} < alpha = {}", m.energy, geo.alpha)),
        (d.energy < 0.0, Clause::LevelNegative, format!("J(u2) = {} is not negative", d.energy)),
        (d.x_norm < geo.rho, Clause::Interior, format!("x_norm(u2) = {} >= rho = {}", d.x_norm, geo.rho)),
        (m.energy < cap && d.energy < cap, Clause::Cap, format!("levels {} and {} vs cap {cap}", m.energy, d.energy)),
        (weak.0 <= tol && weak.1 <= tol, Clause::WeakForm, format!("weak-form defects {:e}, {:e}", weak.0, weak.1)),
    ];
    for (ok, clause, detail) in checks {
        if !ok {
            return Err(SolverError::gate(clause, detail));
        }
    }
    Ok(())
}

/// Certified pair, or the first failing gate.
pub fn solve_pair(prob: &ProblemData, params: &SolverParams, config: &PipelineConfig) -> Result<SolutionPair, SolverError> {
    let run = run_pipeline(prob, params, config);
    run.verdict?;
    let geo = run.geometry.expect("certified run has geometry").constants;
    let m = run.mountain.expect("certified run has u1");
    let d = run.descent.expect("certified run has u2");
    Ok(SolutionPair {
        u1: m.solution,
        j1: m.energy,
        res1: m.residual,
        u2: d.solution,
        j2: d.energy,
        res2: d.residual,
        ps1: m.ps,
        ps2: d.ps,
        geometry: geo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::energy::KirchhoffCoefficients;
    use crate::exponents::ExponentField;
    use crate::mesh::build_grid;
    use core::f64::consts::PI;

    fn canonical(n: usize) -> ProblemData {
        let grid = build_grid(1, &[1.0], n).unwrap();
        let p = ExponentField::constant(&grid, 2.0, 7).unwrap();
        let q = ExponentField::constant(&grid, 1.5, 7).unwrap();
        let r = ExponentField::constant(&grid, 5.0, 7).unwrap();
        let f = GridFunction::constant(&grid, 1.0);
        let g = GridFunction::from_fn(&grid, |x, _| if (x - 0.5).abs() <= 0.25 { 1.0 } else { 0.0 });
        let h = GridFunction::from_fn(&grid, |x, _| 0.1 * (PI * x).sin().powi(2));
        let mask = (0..grid.len()).map(|k| (grid.coords(k)[0] - 0.5).abs() <= 0.25).collect();
        ProblemData::new(KirchhoffCoefficients::new(1.0, 1.0, 1.0).unwrap(), 0.5, p, q, r, f, g, h, mask).unwrap()
    }

    #[test]
    fn theta_window_is_nonempty_and_default_is_midpoint() {
        let prob = canonical(33);
        let (lo, hi) = theta_window(&prob);
        assert_eq!((lo, hi), (2.0, 4.0));
        assert_eq!(SolverParams::default().validate(&prob).unwrap(), 3.0);
        let bad = SolverParams {
            theta: Some(4.5),
            ..SolverParams::default()
        };
        assert!(matches!(bad.validate(&prob), Err(SolverError::CertificationFailed { clause: Clause::ThetaWindow, .. })));
    }

    #[test]
    fn ps_monitor_examples() {
        let prob = canonical(33);
        let params = SolverParams::default();
        let rep = ps_monitor(&[GridFunction::zeros(prob.grid())], &prob, &params).unwrap();
        assert_eq!(rep.level_c, 0.0);
        assert_eq!(rep.degeneracy_gap, 1.0);
        assert!(rep.bounded_flag && rep.below_cap && !rep.near_degenerate);
        assert!(ps_monitor(&[], &prob, &params).is_err());
    }

    #[test]
    fn preconditioner_inverts_stiffness() {
        let prob = canonical(33);
        let mut ws = Workspace::new(&prob).unwrap();
        let u = apply_navier_bc(&GridFunction::from_fn(prob.grid(), |x, _| (PI * x).sin() + 0.3 * (3.0 * PI * x).sin()));
        // K u through the gradient of the p = 2 quadratic s
        let len = prob.grid().len();
        let mut ku = vec![0.0; len];
        let mut e = vec![0.0; len];
        for k in ws.interior.clone() {
            e[k] = 1.0;
            ku[k] = ws.k_dot(u.values(), &e);
            e[k] = 0.0;
        }
        let back = ws.precondition(&ku);
        for k in 0..len {
            assert!((back[k] - u.values()[k]).abs() < 1e-8, "{k}: {} vs {}", back[k], u.values()[k]);
        }
    }

    #[test]
    fn illinois_and_golden() {
        let r = illinois_root(&|t| 2.0 - t * t, 0.0, 2.0);
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
        let m = golden_max(&|t| -(t - 0.3) * (t - 0.3), 0.0, 1.0, 1e-10);
        assert!((m - 0.3).abs() < 1e-8);
    }
}
