//! Numerical core for the sixth-order p(x)-Kirchhoff problem
//!
//! ```text
//! -M(∫ |∇Δu|^{p(x)}/p(x) dx) Δ³_{p(x)} u = λ f |u|^{q(x)-2}u + g |u|^{r(x)-2}u + h   in Ω
//!  u = Δu = Δ²u = 0                                                                   on ∂Ω
//! ```
//!
//! with the sign-changing Kirchhoff function `M(s) = a - b s^γ`.
//!
//! The crate is `no_std` (it needs `alloc`). It provides:
//!
//! - [`exponents`]: variable exponents, the critical exponent `p*` and the
//!   exponent chain checks;
//! - [`varx`]: the `p(·)`-modular, the Luxemburg norm, Hölder bounds and
//!   empirical embedding constants;
//! - [`mesh`]: uniform 1D/2D grids, the Navier stencils `Δ`, `∇Δ`, quadrature
//!   and the norm of `X`;
//! - [`energy`]: the energy `J`, its weak gradient and derivative checks;
//! - [`geometry`]: weight hypotheses and the mountain-pass constants
//!   `ρ, C_ρ, λ̄, δ, α`;
//! - [`solvers`]: a mountain-pass path minimax for the positive-energy
//!   solution, a ball-constrained descent for the negative-energy one, and the
//!   Palais–Smale monitor.
#![no_std]
#![warn(missing_debug_implementations)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod energy;
pub mod error;
pub mod exponents;
pub mod geometry;
mod linalg;
mod math;
pub mod mesh;
pub mod solvers;
pub mod varx;

pub use energy::{
    directional_derivative_check, energy_j, kirchhoff_cap, kirchhoff_m, potential_phi, residual,
    EnergyBreakdown, KirchhoffCoefficients, ProblemData,
};
pub use error::{Error, Result};
pub use exponents::{
    build_exponent_field, check_h1, critical_exponent, derived_exponents, DerivedExponents,
    ExponentField,
};
pub use geometry::{
    check_h2, find_divergence_ray, mountain_pass_constants, verify_small_t_negative,
    verify_sphere_lower_bound, GeometryConstants, HypothesisReport, WeightMode,
};
pub use mesh::{
    apply_navier_bc, build_grid, grad_laplacian, integrate, laplacian, x_norm, Grid, GridFunction,
    VectorField,
};
pub use solvers::{
    ekeland_ball_descent, mountain_pass_solve, ps_monitor, solve_pair, PsReport, SolutionPair,
    SolverParams,
};
pub use varx::{
    estimate_embedding_constant, holder_bound, luxemburg_norm, modular, EmbeddingConstants,
    LuxemburgNorm, ModularValue,
};
