//! Weight hypotheses and the mountain-pass geometry: the ring radius `ρ`,
//! the constants `ε, C_ε, C_ρ, λ̄, δ, α`, and sampled checks of the sphere
//! bound, the divergence ray and small-`t` negativity.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::energy::{energy_j, Evaluator, ProblemData};
use crate::error::{Error, Result};
use crate::exponents::derived_exponents;
use crate::math;
use crate::mesh::{same_grid, x_norm, GridFunction};
use crate::varx::{sine_series_probe, sup_norm, weight_norm, EmbeddingConstants};

/// One broken condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: String,
    pub node: Option<usize>,
    pub detail: String,
}

impl core::fmt::Display for Violation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self.node {
            Some(k) => write!(f, "{} (node {}): {}", self.condition, k, self.detail),
            None => write!(f, "{}: {}", self.condition, self.detail),
        }
    }
}

/// Outcome of a hypothesis or sampled check; it passes iff no violation was
/// recorded.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HypothesisReport {
    violations: Vec<Violation>,
}

impl HypothesisReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations(&self) -> &[Violation] {
        &self.violations
    }

    pub fn push(&mut self, condition: &str, node: Option<usize>, detail: String) {
        self.violations.push(Violation {
            condition: condition.into(),
            node,
            detail,
        });
    }

    pub fn merge(&mut self, other: HypothesisReport) {
        self.violations.extend(other.violations);
    }

    /// First violation as `condition (node k): detail`.
    pub fn summary(&self) -> Option<String> {
        self.violations.first().map(|v| format!("{v}"))
    }
}

/// Which weight hypothesis to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// `g ≥ 0` and integrable weights.
    H2,
    /// Additionally `h ≡ 0` and `g > 0` on a non-empty `Ω₀`.
    H2Prime,
}

/// Luxemburg norms of the weights entering the geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightNorms {
    /// `|f|_{q₀(·)}`
    pub f_q0: f64,
    /// `|g|_{r₀(·)}`
    pub g_r0: f64,
    /// `|h|_{p*/(p*-1)}`
    pub h_conj: f64,
    pub h_sup: f64,
}

pub fn weight_norms(prob: &ProblemData) -> Result<WeightNorms> {
    let d = derived_exponents(&prob.p, &prob.q, &prob.r)?;
    Ok(WeightNorms {
        f_q0: weight_norm(&prob.f, &d.q0)?,
        g_r0: weight_norm(&prob.g, &d.r0)?,
        h_conj: weight_norm(&prob.h, &d.p_star_conjugate)?,
        h_sup: sup_norm(&prob.h),
    })
}

pub fn check_h2(prob: &ProblemData, mode: WeightMode) -> HypothesisReport {
    let mut report = HypothesisReport::default();
    if let Some(k) = prob.g.values().iter().position(|&v| !(v >= 0.0)) {
        report.push("H2: g >= 0", Some(k), format!("g = {}", prob.g.values()[k]));
    }
    match weight_norms(prob) {
        Ok(n) => {
            for (name, v) in [
                ("H2: |f|_q0 finite", n.f_q0),
                ("H2: |g|_r0 finite", n.g_r0),
                ("H2: |h|_p*' finite", n.h_conj),
                ("H2: |h|_inf finite", n.h_sup),
            ] {
                if !v.is_finite() {
                    report.push(name, None, format!("value {v}"));
                }
            }
        }
        Err(e) => report.push("H2: weight norms", None, format!("{e}")),
    }
    if mode == WeightMode::H2Prime {
        if let Some(k) = prob.h.values().iter().position(|&v| v != 0.0) {
            report.push("H2': h(x) = 0", Some(k), format!("h = {}", prob.h.values()[k]));
        }
        let grid = prob.grid();
        let inside: Vec<usize> = (0..grid.len())
            .filter(|&k| prob.omega0_mask[k] && !grid.is_boundary(k))
            .collect();
        if inside.is_empty() {
            report.push("H2': non-empty open domain Omega0", None, "mask has no interior node".into());
        } else if let Some(&k) = inside.iter().find(|&&k| !(prob.g.values()[k] > 0.0)) {
            report.push("H2': g > 0 in Omega0", Some(k), format!("g = {}", prob.g.values()[k]));
        }
    }
    report
}

/// The constants of the mountain-pass geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometryConstants {
    pub rho: f64,
    pub epsilon: f64,
    pub c_epsilon: f64,
    pub c_rho: f64,
    /// `+∞` when `f ≡ 0`.
    pub lambda_bar: f64,
    pub delta: f64,
    pub alpha: f64,
    pub constants: EmbeddingConstants,
    pub norms: WeightNorms,
}

/// `ρ ∈ {2^-k : k = 0..=60}`, largest first.
pub fn default_rho_grid() -> Vec<f64> {
    (0..=60).map(|k| math::powf(2.0, -(k as f64))).collect()
}

/// `C_ρ = a/(2p₊) - b ρ^{p₋(γ+1)-p₊}/((p₋)^{γ+1}(γ+1)) - (C₂/r₋)|g|_{r₀} ρ^{r₋-p₊}`
pub fn c_rho(prob: &ProblemData, c2: f64, g_r0: f64, rho: f64) -> f64 {
    let k = &prob.kirchhoff;
    let (pm, pp) = (prob.p.p_minus(), prob.p.p_plus());
    let rm = prob.r.p_minus();
    let g1 = k.gamma + 1.0;
    k.a / (2.0 * pp) - k.b * math::powf(rho, pm * g1 - pp) / (math::powf(pm, g1) * g1) - c2 / rm * g_r0 * math::powf(rho, rm - pp)
}

/// Picks the largest `ρ` in `rho_grid` with `C_ρ ≥ a/(4p₊)` and evaluates
/// the closed forms.
pub fn mountain_pass_constants(
    prob: &ProblemData,
    constants: EmbeddingConstants,
    rho_grid: &[f64],
) -> Result<GeometryConstants> {
    let norms = weight_norms(prob)?;
    let a = prob.kirchhoff.a;
    let pp = prob.p.p_plus();
    let qm = prob.q.p_minus();
    let required = a / (4.0 * pp);
    let mut best_c_rho = f64::NEG_INFINITY;
    let mut chosen = None;
    for &rho in rho_grid.iter().filter(|r| **r > 0.0 && r.is_finite()) {
        let c = c_rho(prob, constants.c2, norms.g_r0, rho);
        best_c_rho = best_c_rho.max(c);
        if c >= required && chosen.map_or(true, |(r, _)| rho > r) {
            chosen = Some((rho, c));
        }
    }
    let (rho, c_rho) = chosen.ok_or(Error::NoAdmissibleRho { best_c_rho, required })?;
    let epsilon = a / (2.0 * pp * constants.c3);
    let s = pp;
    let s_conj = pp / (pp - 1.0);
    let c_epsilon = (1.0 / s_conj) * math::powf(epsilon * s, -s_conj / s);
    let lambda_bar = if norms.f_q0 == 0.0 {
        f64::INFINITY
    } else {
        c_rho * qm / (2.0 * constants.c1 * norms.f_q0 * math::powf(rho, qm - pp))
    };
    let delta = 0.5 * math::powf(c_rho * math::powf(rho, pp) / (2.0 * constants.c3 * c_epsilon), pp / (pp - 1.0));
    let alpha = 0.25 * c_rho * math::powf(rho, pp);
    Ok(GeometryConstants {
        rho,
        epsilon,
        c_epsilon,
        c_rho,
        lambda_bar,
        delta,
        alpha,
        constants,
        norms,
    })
}

/// Sampled sphere bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereCheck {
    pub report: HypothesisReport,
    pub min_energy: f64,
    pub samples: usize,
}

/// Relative tolerance for a sample to count as lying on the sphere.
const SPHERE_TOL: f64 = 1e-8;

/// `J(u)` for one sample, which must satisfy `x_norm(u) = ρ`.
pub fn sphere_sample_energy(prob: &ProblemData, geo: &GeometryConstants, u: &GridFunction) -> Result<f64> {
    let norm = x_norm(u, &prob.p)?;
    if math::abs(norm - geo.rho) > SPHERE_TOL * geo.rho {
        return Err(Error::OffSphere { norm, rho: geo.rho });
    }
    Ok(energy_j(u, prob)?.total)
}

/// Draws `samples` seeded directions, rescales each to `x_norm = ρ` and
/// checks `J ≥ α`. The regime `λ < λ̄`, `|h|_{p*'} < δ` is recorded as a
/// violation when it does not hold.
pub fn verify_sphere_lower_bound(
    prob: &ProblemData,
    geo: &GeometryConstants,
    samples: usize,
    seed: u64,
) -> Result<SphereCheck> {
    let mut report = HypothesisReport::default();
    if !(prob.lambda < geo.lambda_bar) {
        report.push("lambda < lambda_bar", None, format!("lambda = {}, lambda_bar = {}", prob.lambda, geo.lambda_bar));
    }
    if !(geo.norms.h_conj < geo.delta) {
        report.push("|h| < delta", None, format!("|h| = {}, delta = {}", geo.norms.h_conj, geo.delta));
    }
    let grid = prob.grid();
    let mut min_energy = f64::INFINITY;
    for i in 0..samples {
        let u = sine_series_probe(grid, seed, i as u64);
        let n = x_norm(&u, &prob.p)?;
        if !(n > 0.0) {
            continue;
        }
        let mut v = u.scaled(geo.rho / n);
        // one correction step absorbs the rounding of the norm solve
        let n2 = x_norm(&v, &prob.p)?;
        v = v.scaled(geo.rho / n2);
        let e = sphere_sample_energy(prob, geo, &v)?;
        min_energy = min_energy.min(e);
        if !(e >= geo.alpha) {
            report.push("J >= alpha on the sphere", None, format!("sample {i}: J = {e}, alpha = {}", geo.alpha));
        }
    }
    Ok(SphereCheck {
        report,
        min_energy,
        samples,
    })
}

/// The point `e = t₀ φ₀` past the mountain.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceRay {
    pub e: GridFunction,
    pub t0: f64,
    pub energy: f64,
    pub norm: f64,
    /// `J` at `t₀` and the next two schedule points.
    pub tail: [f64; 3],
    pub tail_decreasing: bool,
}

/// `t = 2^k`, `k = -6..=40`.
pub fn default_ray_schedule() -> Vec<f64> {
    (-6..=40).map(|k| math::powf(2.0, k as f64)).collect()
}

/// Walks `t ↦ J(t φ₀)` along the schedule and returns the first `t φ₀` with
/// `x_norm > ρ` and `J < 0`.
pub fn find_divergence_ray(
    prob: &ProblemData,
    geo: &GeometryConstants,
    phi0: &GridFunction,
    t_schedule: &[f64],
) -> Result<DivergenceRay> {
    if !same_grid(phi0.grid(), prob.grid()) {
        return Err(Error::GridMismatch);
    }
    if phi0.is_zero() {
        return Err(Error::InvalidParameter("phi0 must be nonzero".into()));
    }
    let mut ev = Evaluator::new(prob);
    let mut last_energy = 0.0;
    let base = x_norm(phi0, &prob.p)?;
    for (i, &t) in t_schedule.iter().enumerate() {
        let u = phi0.scaled(t);
        let e = ev.energy(u.values());
        last_energy = e;
        if !e.is_finite() {
            break;
        }
        let norm = if prob.p.is_constant() { math::abs(t) * base } else { x_norm(&u, &prob.p)? };
        if norm > geo.rho && e < 0.0 {
            let mut tail_vals: Vec<f64> = vec![e];
            let mut j = i + 1;
            while tail_vals.len() < 3 {
                let tt = t_schedule.get(j).copied().unwrap_or(t * math::powf(2.0, (j - i) as f64));
                tail_vals.push(ev.energy(phi0.scaled(tt).values()));
                j += 1;
            }
            let tail = [tail_vals[0], tail_vals[1], tail_vals[2]];
            return Ok(DivergenceRay {
                e: u,
                t0: t,
                energy: e,
                norm,
                tail,
                tail_decreasing: tail[0] > tail[1] && tail[1] > tail[2],
            });
        }
    }
    Err(Error::NoDescentFound { last_energy })
}

/// `t = 2^-k`, `k = 1..=60`, largest first.
pub fn default_small_t_schedule() -> Vec<f64> {
    (1..=60).map(|k| math::powf(2.0, -(k as f64))).collect()
}

fn first_negative_inside(
    prob: &ProblemData,
    geo: &GeometryConstants,
    psi0: &GridFunction,
    t_schedule: &[f64],
) -> Result<(f64, f64)> {
    let mut ev = Evaluator::new(prob);
    for &t in t_schedule.iter().filter(|t| **t > 0.0 && **t < 1.0) {
        let u = psi0.scaled(t);
        let e = ev.energy(u.values());
        if e < 0.0 && x_norm(&u, &prob.p)? < geo.rho {
            return Ok((t, e));
        }
    }
    Err(Error::PositivityNotFound)
}

/// Returns the first scheduled `t ∈ (0,1)` (in schedule order) with
/// `J(t ψ₀) < 0` and `x_norm(t ψ₀) < ρ`. Needs `∫ h ψ₀ > 0`.
pub fn verify_small_t_negative(
    prob: &ProblemData,
    geo: &GeometryConstants,
    psi0: &GridFunction,
    t_schedule: &[f64],
) -> Result<(f64, f64)> {
    if !same_grid(psi0.grid(), prob.grid()) {
        return Err(Error::GridMismatch);
    }
    if prob.h.is_zero() {
        return Err(Error::NotApplicable("h vanishes identically".into()));
    }
    let load: f64 = prob
        .h
        .values()
        .iter()
        .zip(psi0.values())
        .zip(prob.grid().weights())
        .map(|((h, p), w)| h * p * w)
        .sum();
    if !(load > 0.0) {
        return Err(Error::InvalidParameter(format!("integral of h psi0 is {load}, needs to be positive")));
    }
    first_negative_inside(prob, geo, psi0, t_schedule)
}

/// Variant for `h ≡ 0`: the concave term `-λ ∫ f|tψ₀|^q/q` dominates for
/// small `t`, so it needs `λ > 0` and `∫ f|ψ₀|^q > 0`.
pub fn verify_small_t_negative_concave(
    prob: &ProblemData,
    geo: &GeometryConstants,
    psi0: &GridFunction,
    t_schedule: &[f64],
) -> Result<(f64, f64)> {
    if !same_grid(psi0.grid(), prob.grid()) {
        return Err(Error::GridMismatch);
    }
    let q = prob.q.values();
    let mass: f64 = prob
        .f
        .values()
        .iter()
        .zip(psi0.values())
        .zip(prob.grid().weights())
        .enumerate()
        .map(|(k, ((f, p), w))| f * math::abs_pow(*p, q[k]) * w)
        .sum();
    if !(prob.lambda > 0.0 && mass > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "concave negativity needs lambda > 0 and integral of f|psi0|^q > 0 (got {} and {mass})",
            prob.lambda
        )));
    }
    first_negative_inside(prob, geo, psi0, t_schedule)
}
