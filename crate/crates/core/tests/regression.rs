#![allow(clippy::excessive_precision)]

mod common;

use common::{canonical, grid, rel, theorem2};
use triharm_core::geometry::{default_ray_schedule, default_rho_grid, default_small_t_schedule};
use triharm_core::solvers::{default_phi0, default_psi0, run_pipeline, Mode, PipelineConfig};
use triharm_core::*;

fn seeded_geometry(prob: &ProblemData) -> GeometryConstants {
    let c = EmbeddingConstants::estimate(&prob.p, &prob.q, &prob.r, 512, 7).unwrap();
    mountain_pass_constants(prob, c, &default_rho_grid()).unwrap()
}

#[test]
fn embedding_constant_p2_s2_seed42() {
    let g = grid(64);
    let p = ExponentField::constant(&g, 2.0, 7).unwrap();
    let e = estimate_embedding_constant(&p, &p, 512, 42).unwrap();
    assert!(rel(e, 3.53343853505197689e-2) < 1e-12, "{e:e}");
}

#[test]
fn canonical_geometry_constants() {
    let prob = canonical(129, 0.5);
    let geo = seeded_geometry(&prob);
    assert_eq!(geo.rho, 0.5);
    assert!(rel(geo.c_rho, 2.18749994271591947e-1) < 1e-10);
    assert!(rel(geo.lambda_bar, 6.15159781033610820) < 1e-10);
    assert!(rel(geo.delta, 5.88792746127723898) < 1e-10);
    assert!(rel(geo.alpha, 1.36718746419744967e-2) < 1e-10);
    assert!(rel(geo.epsilon, 2.80065161633148696) < 1e-10);
    assert!(rel(geo.constants.c1, 1.885846682882091e-2) < 1e-10);
}

#[test]
fn sphere_minimum_with_lambda_zero() {
    let prob = theorem2(129, 0.0);
    let geo = seeded_geometry(&prob);
    let sc = verify_sphere_lower_bound(&prob, &geo, 512, 7).unwrap();
    assert!(sc.report.passed());
    assert!(sc.min_energy >= geo.alpha);
    assert!(rel(sc.min_energy, 1.17187499746829987e-1) < 1e-8, "{:.17e}", sc.min_energy);
}

#[test]
fn canonical_ray_and_small_t() {
    let prob = canonical(129, 0.5);
    let geo = seeded_geometry(&prob);
    let sc = verify_sphere_lower_bound(&prob, &geo, 512, 7).unwrap();
    assert!(sc.report.passed() && sc.min_energy >= geo.alpha);
    assert!(rel(sc.min_energy, 1.15766418841031851e-1) < 1e-8, "{:.17e}", sc.min_energy);

    let phi = default_phi0(&prob).unwrap();
    let ray = find_divergence_ray(&prob, &geo, &phi, &default_ray_schedule()).unwrap();
    assert_eq!(ray.t0, 2.0);
    assert!(ray.energy < 0.0 && ray.norm > geo.rho && ray.tail_decreasing);
    assert!(rel(ray.energy, -1.53682102160391993e-5) < 1e-8, "{:.17e}", ray.energy);

    let psi = default_psi0(&prob, Mode::Theorem1).unwrap();
    let (t, e) = verify_small_t_negative(&prob, &geo, &psi, &default_small_t_schedule()).unwrap();
    assert_eq!(t, 2f64.powi(-12));
    assert!(e < 0.0 && t * x_norm(&psi, &prob.p).unwrap() < geo.rho);
}

#[test]
fn canonical_pair_is_certified_and_pinned() {
    let prob = canonical(129, 0.5);
    let params = SolverParams::default();
    let pair = solve_pair(&prob, &params, &PipelineConfig::new(Mode::Theorem1)).unwrap();
    assert!(pair.res1 <= 1e-6 && pair.res2 <= 1e-6);
    assert!(pair.j1 >= pair.geometry.alpha && pair.j1 > 0.0 && 0.0 > pair.j2);
    assert!(pair.j1 < 0.5 && pair.ps1.below_cap && pair.ps2.below_cap);
    assert!(x_norm(&pair.u2, &prob.p).unwrap() < pair.geometry.rho);
    assert!(rel(pair.j1, 4.94229466762261926e-1) < 1e-6, "{:.17e}", pair.j1);
    assert!(rel(pair.j2, -2.03554477789995254e-6) < 1e-3, "{:.17e}", pair.j2);
}

#[test]
fn theorem2_pair_is_certified() {
    let prob = theorem2(129, 4.0);
    let run = run_pipeline(&prob, &SolverParams::default(), &PipelineConfig::new(Mode::Theorem2));
    assert!(run.certified(), "{:?}", run.verdict);
    let m = run.mountain.unwrap();
    let d = run.descent.unwrap();
    assert!(m.energy > 0.0 && d.energy < 0.0);
    assert!(rel(m.energy, 4.92237319836316e-1) < 1e-6, "{:.17e}", m.energy);
}

#[test]
fn solver_histories_are_monotone() {
    let prob = canonical(65, 0.5);
    let run = run_pipeline(&prob, &SolverParams::default(), &PipelineConfig::new(Mode::Theorem1));
    assert!(run.certified(), "{:?}", run.verdict);
    let m = run.mountain.unwrap();
    for w in m.path_levels.windows(2) {
        assert!(w[1] <= w[0] + 1e-14, "{} -> {}", w[0], w[1]);
    }
    let d = run.descent.unwrap();
    for w in d.history.windows(2) {
        assert!(w[1].energy <= w[0].energy + 1e-14, "{} -> {}", w[0].energy, w[1].energy);
    }
}

#[test]
fn lambda_above_bar_fails_the_gate() {
    let prob = canonical(65, 50.0);
    let run = run_pipeline(&prob, &SolverParams::default(), &PipelineConfig::new(Mode::Theorem1));
    let err = run.verdict.unwrap_err();
    assert_eq!(err.clause(), "lambda_gate");
}
