//! Verification battery behind `triharm verify`. Each criterion is a pure
//! function of the seed, and the rendered table contains no timings, so
//! equal seeds give byte-identical output.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triharm_core::geometry::{default_ray_schedule, default_rho_grid, default_small_t_schedule};
use triharm_core::solvers::{default_phi0, default_psi0, run_pipeline, Mode};
use triharm_core::varx::{sine_series_probe, verify_norm_modular_relations};
use triharm_core::{
    apply_navier_bc, build_grid, directional_derivative_check, find_divergence_ray, grad_laplacian, holder_bound,
    integrate, kirchhoff_cap, luxemburg_norm, modular, mountain_pass_constants, verify_small_t_negative,
    verify_sphere_lower_bound, x_norm, EmbeddingConstants, ExponentField, Grid, GridFunction, KirchhoffCoefficients,
};

use crate::config::ExperimentSpec;

/// Injection points for mutation testing of the battery itself.
#[derive(Debug, Clone, Copy)]
pub struct Hooks {
    pub cap: fn(&KirchhoffCoefficients) -> f64,
}

impl Default for Hooks {
    fn default() -> Self {
        Hooks { cap: kirchhoff_cap }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

pub const CRITERIA: [(usize, &str); 9] = [
    (1, "luxemburg_constant_oracle"),
    (2, "norm_modular_relations"),
    (3, "holder_inequality"),
    (4, "gradient_consistency"),
    (5, "kirchhoff_cap_identity"),
    (6, "mountain_pass_geometry"),
    (7, "two_solutions_with_load"),
    (8, "two_solutions_without_load"),
    (9, "stencil_convergence"),
];

fn rng(seed: u64, id: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id as u64);
    r
}

fn grid(n: usize) -> Arc<Grid> {
    build_grid(1, &[1.0], n).expect("valid grid")
}

/// Nodal noise with a random overall scale `10^U(-3, 3)`.
fn random_field(g: &Arc<Grid>, rng: &mut ChaCha8Rng) -> GridFunction {
    let scale = 10f64.powf(rng.random_range(-3.0..3.0));
    let vals = (0..g.len()).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    GridFunction::from_values(g, vals).expect("grid-sized values")
}

/// Smooth exponent `base + slope·x + wiggle·sin(2πx)` inside `(1.05, 4)`.
fn random_exponent(g: &Arc<Grid>, rng: &mut ChaCha8Rng) -> ExponentField {
    let base = rng.random_range(1.2..3.0);
    let slope = rng.random_range(-0.15..0.8);
    let wiggle = rng.random_range(-0.1..0.1);
    let vals = (0..g.len())
        .map(|k| {
            let x = g.coords(k)[0];
            base + slope * x + wiggle * (2.0 * PI * x).sin()
        })
        .collect();
    ExponentField::new(g, vals, 10, f64::INFINITY).expect("exponent above 1")
}

fn result(id: usize, passed: bool, detail: String) -> CriterionResult {
    let name = CRITERIA[id - 1].1;
    CriterionResult { id, name, passed, detail }
}

/// Runs criterion `id` (1..=9).
pub fn criterion(id: usize, seed: u64, hooks: &Hooks) -> CriterionResult {
    match id {
        1 => luxemburg_oracle(seed),
        2 => norm_modular(seed),
        3 => holder(seed),
        4 => gradient(seed),
        5 => cap_identity(seed, hooks),
        6 => geometry(seed),
        7 => end_to_end(seed, false),
        8 => end_to_end(seed, true),
        9 => stencil(),
        _ => panic!("no criterion {id}"),
    }
}

fn luxemburg_oracle(seed: u64) -> CriterionResult {
    let mut rng = rng(seed, 1);
    let g = grid(65);
    let mut worst = 0.0f64;
    for i in 0..500 {
        let p = [1.5, 2.0, 3.0][i % 3];
        let pf = ExponentField::constant(&g, p, 10).expect("constant exponent");
        let u = random_field(&g, &mut rng);
        let n = luxemburg_norm(&u, &pf, 1e-12).expect("norm").value;
        let oracle = modular(&u, &pf).expect("modular").value.powf(1.0 / p);
        worst = worst.max((n - oracle).abs() / oracle);
    }
    result(1, worst <= 1e-8, format!("500 fields, max rel err {worst:.3e}"))
}

fn norm_modular(seed: u64) -> CriterionResult {
    let mut rng = rng(seed, 2);
    let g = grid(65);
    let mut failures = 0usize;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let p = random_exponent(&g, &mut rng);
        let u = random_field(&g, &mut rng);
        let rep = verify_norm_modular_relations(&u, &p).expect("relations");
        let back = modular(&u.scaled(1.0 / rep.norm), &p).expect("modular").value;
        worst = worst.max((back - 1.0).abs());
        if !rep.all_hold() {
            failures += 1;
        }
    }
    // item 4 on u/2^k and u·2^k, item 5 on u + w/2^k
    let mut seq_failures = 0usize;
    for _ in 0..20 {
        let p = random_exponent(&g, &mut rng);
        let u = random_field(&g, &mut rng);
        let w = random_field(&g, &mut rng);
        let (n0, m0) = (luxemburg_norm(&u, &p, 1e-12).expect("norm").value, modular(&u, &p).expect("modular").value);
        let (mut pn, mut pm) = (n0, m0);
        for k in 1..=40 {
            let t = 0.5f64.powi(k);
            let v = u.scaled(t);
            let (n, m) = (luxemburg_norm(&v, &p, 1e-12).expect("norm").value, modular(&v, &p).expect("modular").value);
            if !(n < pn && m < pm) {
                seq_failures += 1;
            }
            (pn, pm) = (n, m);
        }
        let small = pn <= 1e-9 * n0 && pm <= 1e-9 * m0;
        let big = u.scaled(2f64.powi(40));
        let grows = luxemburg_norm(&big, &p, 1e-12).expect("norm").value >= 1e9 * n0 && modular(&big, &p).expect("modular").value >= 1e9 * m0;
        let diff = w.scaled(0.5f64.powi(40));
        let conv = luxemburg_norm(&diff, &p, 1e-12).expect("norm").value <= 1e-9 * luxemburg_norm(&w, &p, 1e-12).expect("norm").value
            && modular(&diff, &p).expect("modular").value <= 1e-9 * modular(&w, &p).expect("modular").value;
        if !(small && grows && conv) {
            seq_failures += 1;
        }
    }
    let passed = failures == 0 && worst <= 1e-8 && seq_failures == 0;
    result(
        2,
        passed,
        format!("1000 pairs, {failures} relation failures, max |modular(u/|u|)-1| {worst:.3e}, {seq_failures} sequence failures"),
    )
}

fn holder(seed: u64) -> CriterionResult {
    let mut rng = rng(seed, 3);
    let g = grid(65);
    let mut violations = 0usize;
    let mut tightest = 0.0f64;
    for _ in 0..1000 {
        let p = random_exponent(&g, &mut rng);
        let u = random_field(&g, &mut rng);
        let v = random_field(&g, &mut rng);
        let rep = holder_bound(&u, &v, &p).expect("holder");
        if !rep.holds {
            violations += 1;
        }
        if rep.rhs > 0.0 {
            tightest = tightest.max(rep.lhs / rep.rhs);
        }
    }
    result(3, violations == 0, format!("1000 pairs, {violations} violations, max lhs/rhs {tightest:.3e}"))
}

/// `A sin πx + Σ_{k=2..8} c_k sin kπx` with `Σ k|c_k| < A`, hence positive
/// inside the domain.
fn positive_field(g: &Arc<Grid>, rng: &mut ChaCha8Rng) -> GridFunction {
    let c: Vec<f64> = (2..=8).map(|k| rng.random_range(-1.0..1.0) / (8.0 * k as f64)).collect();
    apply_navier_bc(&GridFunction::from_fn(g, |x, _| {
        (PI * x).sin() + c.iter().enumerate().map(|(i, ck)| ck * ((i + 2) as f64 * PI * x).sin()).sum::<f64>()
    }))
}

fn gradient(seed: u64) -> CriterionResult {
    let (prob, _, _) = ExperimentSpec::default().materialize().expect("canonical instance");
    let g = prob.grid().clone();
    let mut rng = rng(seed, 4);
    let mut worst = 0.0f64;
    let mut slopes = Vec::with_capacity(50);
    for i in 0..50 {
        let u = positive_field(&g, &mut rng);
        let v = sine_series_probe(&g, seed ^ 0x4a11, i);
        let u = u.scaled(rng.random_range(0.2..1.0) / x_norm(&u, &prob.p).expect("norm"));
        let v = v.scaled(1.0 / x_norm(&v, &prob.p).expect("norm"));
        worst = worst.max(directional_derivative_check(&u, &v, &prob, 1e-5).expect("check"));
        let e1 = directional_derivative_check(&u, &v, &prob, 4e-3).expect("check");
        let e2 = directional_derivative_check(&u, &v, &prob, 2e-3).expect("check");
        slopes.push((e1 / e2).log2());
    }
    slopes.sort_by(f64::total_cmp);
    let (lo, hi) = (slopes[0], slopes[slopes.len() - 1]);
    let passed = worst <= 1e-5 && lo >= 1.7 && hi <= 2.3;
    result(4, passed, format!("50 pairs, max rel err {worst:.3e}, slope range [{lo:.3}, {hi:.3}]"))
}

/// Brute-force maximum of `s ↦ a s - b s^{γ+1}/(γ+1)`: bracket by doubling,
/// dense scan, then golden-section refinement.
pub fn brute_force_max(a: f64, b: f64, gamma: f64) -> (f64, f64) {
    let f = |s: f64| a * s - b * s.powf(gamma + 1.0) / (gamma + 1.0);
    let mut hi = 1e-12;
    while f(2.0 * hi) > f(hi) || f(hi) <= 0.0 {
        hi *= 2.0;
    }
    let hi = 2.0 * hi;
    let m: usize = 4000;
    let best = (0..=m).max_by(|&i, &j| f(hi * i as f64 / m as f64).total_cmp(&f(hi * j as f64 / m as f64))).unwrap_or(0);
    let (mut lo, mut up) = (hi * best.saturating_sub(1) as f64 / m as f64, hi * (best + 1).min(m) as f64 / m as f64);
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let x1 = up - r * (up - lo);
        let x2 = lo + r * (up - lo);
        if f(x1) < f(x2) {
            lo = x1;
        } else {
            up = x2;
        }
        if up - lo <= 1e-15 * up {
            break;
        }
    }
    let s = 0.5 * (lo + up);
    (f(s), s)
}

fn cap_identity(seed: u64, hooks: &Hooks) -> CriterionResult {
    let mut rng = rng(seed, 5);
    let (mut worst_cap, mut worst_arg) = (0.0f64, 0.0f64);
    for _ in 0..200 {
        let a = rng.random_range(0.1..10.0);
        let b = rng.random_range(0.1..10.0);
        let gamma = rng.random_range(0.1..10.0);
        let k = KirchhoffCoefficients::new(a, b, gamma).expect("positive coefficients");
        let (max, arg) = brute_force_max(a, b, gamma);
        let cap = (hooks.cap)(&k);
        let s_star = k.degeneracy_point();
        worst_cap = worst_cap.max((max - cap).abs() / cap.abs());
        worst_arg = worst_arg.max((arg - s_star).abs() / s_star);
    }
    let passed = worst_cap <= 1e-8 && worst_arg <= 1e-6;
    result(5, passed, format!("200 triples, cap rel err {worst_cap:.3e}, argmax rel err {worst_arg:.3e}"))
}

fn geometry(seed: u64) -> CriterionResult {
    let (prob, _, _) = ExperimentSpec::default().materialize().expect("canonical instance");
    let consts = EmbeddingConstants::estimate(&prob.p, &prob.q, &prob.r, 512, seed).expect("constants");
    let geo = match mountain_pass_constants(&prob, consts, &default_rho_grid()) {
        Ok(g) => g,
        Err(e) => return result(6, false, format!("no geometry: {e}")),
    };
    let sphere = verify_sphere_lower_bound(&prob, &geo, 512, seed).expect("sphere samples");
    let sphere_ok = geo.c_rho > 0.0 && sphere.report.passed() && sphere.min_energy >= geo.alpha;
    let phi0 = default_phi0(&prob).expect("phi0");
    let ray = find_divergence_ray(&prob, &geo, &phi0, &default_ray_schedule());
    let ray_ok = matches!(&ray, Ok(r) if r.norm > geo.rho && r.energy < 0.0);
    let psi0 = default_psi0(&prob, Mode::Theorem1).expect("psi0");
    let small = verify_small_t_negative(&prob, &geo, &psi0, &default_small_t_schedule());
    let small_ok = matches!(small, Ok((t, e)) if e < 0.0 && t * x_norm(&psi0, &prob.p).unwrap_or(f64::INFINITY) < geo.rho);
    let detail = format!(
        "rho {:.3e} C_rho {:.6e} lambda_bar {:.6e} delta {:.6e} alpha {:.6e}; {} samples min J {:.6e}; ray {}; small t {}",
        geo.rho,
        geo.c_rho,
        geo.lambda_bar,
        geo.delta,
        geo.alpha,
        sphere.samples,
        sphere.min_energy,
        match &ray {
            Ok(r) => format!("t0 {:.3e} J {:.3e}", r.t0, r.energy),
            Err(e) => e.to_string(),
        },
        match &small {
            Ok((t, e)) => format!("t {t:.3e} J {e:.3e}"),
            Err(e) => e.to_string(),
        }
    );
    result(6, sphere_ok && ray_ok && small_ok, detail)
}

fn end_to_end(seed: u64, theorem2: bool) -> CriterionResult {
    let id = if theorem2 { 8 } else { 7 };
    let mut spec = if theorem2 { ExperimentSpec::theorem2_default() } else { ExperimentSpec::default() };
    spec.solver.seed = seed;
    let (prob, params, config) = spec.materialize().expect("instance");
    let run = run_pipeline(&prob, &params, &config);
    let cap = prob.kirchhoff.cap();
    let (m, d, geo) = match (&run.mountain, &run.descent, &run.geometry) {
        (Some(m), Some(d), Some(g)) => (m, d, &g.constants),
        _ => {
            let why = run.verdict.as_ref().err().map(|e| e.to_string()).unwrap_or_default();
            return result(id, false, format!("pipeline stopped: {why}"));
        }
    };
    let mut passed = run.certified()
        && m.residual <= 1e-6
        && d.residual <= 1e-6
        && m.energy >= geo.alpha
        && geo.alpha > 0.0
        && d.energy < 0.0
        && d.x_norm < geo.rho
        && m.energy < cap
        && d.energy < cap;
    if !theorem2 {
        passed &= cap == 0.5;
    }
    let detail = format!(
        "J1 {:.6e} J2 {:.6e} res1 {:.3e} res2 {:.3e} alpha {:.6e} cap {:.3}{}",
        m.energy,
        d.energy,
        m.residual,
        d.residual,
        geo.alpha,
        cap,
        match &run.verdict {
            Ok(()) => String::new(),
            Err(e) => format!("; {e}"),
        }
    );
    result(id, passed, detail)
}

fn stencil() -> CriterionResult {
    let mut errs = Vec::new();
    let mut hs = Vec::new();
    let mut integral = 0.0;
    for n in [65, 129, 257] {
        let g = grid(n);
        let u = apply_navier_bc(&GridFunction::from_fn(&g, |x, _| (PI * x).sin()));
        let gl = grad_laplacian(&u);
        let c = gl.component(0);
        let err = (0..g.len())
            .map(|k| (c[k] + PI.powi(3) * (PI * g.coords(k)[0]).cos()).abs())
            .fold(0.0, f64::max);
        errs.push(err);
        hs.push(g.spacing()[0]);
        if n == 257 {
            integral = integrate(&GridFunction::from_fn(&g, |x, _| (PI.powi(3) * (PI * x).cos()).powi(2)));
        }
    }
    let slope = |i: usize| (errs[i] / errs[i + 1]).ln() / (hs[i] / hs[i + 1]).ln();
    let (s1, s2) = (slope(0), slope(1));
    let exact = PI.powi(6) / 2.0;
    let rel = (integral - exact).abs() / exact;
    let passed = s1 >= 1.9 && s2 >= 1.9 && rel <= 1e-2;
    result(9, passed, format!("slopes {s1:.3}, {s2:.3}; integral rel err {rel:.3e}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub seed: u64,
    pub results: Vec<CriterionResult>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "triharm verification battery, seed {}", self.seed);
        let _ = writeln!(s, "{:>2}  {:<28}  {:<6}  detail", "id", "criterion", "result");
        for r in &self.results {
            let verdict = if r.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{:>2}  {:<28}  {:<6}  {}", r.id, r.name, verdict, r.detail);
        }
        let n = self.results.iter().filter(|r| r.passed).count();
        let _ = writeln!(s, "{n}/{} passed", self.results.len());
        s
    }
}

pub fn verify_suite_with(seed: u64, hooks: &Hooks) -> SuiteReport {
    SuiteReport {
        seed,
        results: CRITERIA.iter().map(|&(id, _)| criterion(id, seed, hooks)).collect(),
    }
}

pub fn verify_suite(seed: u64) -> SuiteReport {
    verify_suite_with(seed, &Hooks::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_finds_the_known_maximum() {
        let (m, s) = brute_force_max(1.0, 2.0, 3.0);
        let k = KirchhoffCoefficients::new(1.0, 2.0, 3.0).unwrap();
        assert!((m - k.cap()).abs() <= 1e-10 * k.cap());
        assert!((s - 0.5f64.powf(1.0 / 3.0)).abs() <= 1e-6);
    }

    #[test]
    fn corrupted_cap_fails_the_identity() {
        let hooks = Hooks {
            cap: |k| 1.01 * kirchhoff_cap(k),
        };
        assert!(!criterion(5, 7, &hooks).passed);
        assert!(criterion(5, 7, &Hooks::default()).passed);
    }
}
