//! The `p(·)`-modular, the Luxemburg norm, the Hölder pairing bound, the
//! norm/modular relations and empirical embedding constants.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exponents::{critical_exponent, ExponentField};
use crate::math;
use crate::mesh::{apply_navier_bc, same_grid, x_norm, Grid, GridFunction};

/// Tolerance on `|modular(u/‖u‖) - 1|` used when none is given.
pub const DEFAULT_NORM_TOL: f64 = 1e-12;
pub const DEFAULT_PROBES: usize = 512;
pub const DEFAULT_SAFETY_FACTOR: f64 = 1.2;

const BRACKET_LIMIT: usize = 1100;
const BISECTION_LIMIT: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModularValue {
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LuxemburgNorm {
    pub value: f64,
    pub iterations: usize,
    /// `|modular(u/value) - 1|`, zero for `u ≡ 0`.
    pub residual: f64,
}

fn check_grid(u: &GridFunction, p: &ExponentField) -> Result<()> {
    if same_grid(u.grid(), p.grid()) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

pub(crate) fn modular_raw(values: &[f64], weights: &[f64], exps: &[f64], scale: f64) -> f64 {
    values
        .iter()
        .zip(weights)
        .zip(exps)
        .map(|((&v, &w), &e)| w * math::abs_pow(v * scale, e))
        .sum()
}

/// `∫ |u|^{p(x)} dx` by trapezoidal quadrature.
pub fn modular(u: &GridFunction, p: &ExponentField) -> Result<ModularValue> {
    check_grid(u, p)?;
    Ok(ModularValue {
        value: modular_raw(u.values(), u.grid().weights(), p.values(), 1.0),
    })
}

/// Luxemburg norm of nodal values under quadrature `weights`.
pub(crate) fn luxemburg_raw(values: &[f64], weights: &[f64], exps: &[f64], tol: f64) -> Result<LuxemburgNorm> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("norm tolerance {tol} must be positive")));
    }
    if values.iter().zip(weights).all(|(v, w)| *v == 0.0 || *w == 0.0) {
        return Ok(LuxemburgNorm {
            value: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    }
    let f = |mu: f64| modular_raw(values, weights, exps, 1.0 / mu);
    // F(mu) = modular(u/mu) decreases strictly; bracket F(lo) > 1 >= F(hi).
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    let mut iterations = 0;
    if f(1.0) > 1.0 {
        loop {
            iterations += 1;
            if iterations > BRACKET_LIMIT || !hi.is_finite() {
                return Err(Error::NonConvergence(format!("no upper bracket after {iterations} doublings")));
            }
            lo = hi;
            hi *= 2.0;
            if f(hi) <= 1.0 {
                break;
            }
        }
    } else {
        loop {
            iterations += 1;
            if iterations > BRACKET_LIMIT || lo == 0.0 {
                return Err(Error::NonConvergence(format!("no lower bracket after {iterations} halvings")));
            }
            hi = lo;
            lo *= 0.5;
            if f(lo) > 1.0 {
                break;
            }
        }
    }
    let mut bisections = 0;
    let mut mid = hi;
    let mut fm = f(hi);
    while bisections < BISECTION_LIMIT {
        if math::abs(fm - 1.0) <= tol {
            break;
        }
        mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            mid = hi;
            fm = f(hi);
            break;
        }
        fm = f(mid);
        if fm > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        bisections += 1;
    }
    let residual = math::abs(fm - 1.0);
    Ok(LuxemburgNorm {
        value: mid,
        iterations: iterations + bisections,
        residual,
    })
}

/// `inf{μ > 0 : modular(u/μ) ≤ 1}`, by bracketing from `μ = 1` and bisection
/// until `|modular(u/μ) - 1| ≤ tol` or the bracket collapses to adjacent
/// floats.
pub fn luxemburg_norm(u: &GridFunction, p: &ExponentField, tol: f64) -> Result<LuxemburgNorm> {
    check_grid(u, p)?;
    luxemburg_raw(u.values(), u.grid().weights(), p.values(), tol)
}

/// Outcome of the norm/modular relations for one field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationReport {
    pub norm: f64,
    pub modular: f64,
    pub p_minus: f64,
    pub p_plus: f64,
    /// `‖u‖ > 1 ⇒ ‖u‖^{p₋} ≤ ρ(u) ≤ ‖u‖^{p₊}` (vacuous otherwise).
    pub above_one: bool,
    /// `‖u‖ < 1 ⇒ ‖u‖^{p₊} ≤ ρ(u) ≤ ‖u‖^{p₋}` (vacuous otherwise).
    pub below_one: bool,
    /// `‖u‖ <,=,> 1 ⟺ ρ(u) <,=,> 1`.
    pub trichotomy: bool,
    /// `|ρ(u/‖u‖) - 1|`, zero for `u ≡ 0`.
    pub normalization_residual: f64,
}

impl RelationReport {
    pub fn all_hold(&self) -> bool {
        self.above_one && self.below_one && self.trichotomy
    }
}

/// Relative slack for the relation comparisons.
const RELATION_SLACK: f64 = 1e-9;

pub fn verify_norm_modular_relations(u: &GridFunction, p: &ExponentField) -> Result<RelationReport> {
    let norm = luxemburg_norm(u, p, DEFAULT_NORM_TOL)?;
    let rho = modular(u, p)?.value;
    let n = norm.value;
    let (pm, pp) = (p.p_minus(), p.p_plus());
    let le = |a: f64, b: f64| a <= b * (1.0 + RELATION_SLACK) + f64::MIN_POSITIVE;
    let above_one = !(n > 1.0) || (le(math::powf(n, pm), rho) && le(rho, math::powf(n, pp)));
    let below_one = !(n < 1.0) || (le(math::powf(n, pp), rho) && le(rho, math::powf(n, pm)));
    // Values within the slack of 1 are compatible with every branch.
    let side = |x: f64| {
        if math::abs(x - 1.0) <= 1e-8 {
            0
        } else if x > 1.0 {
            1
        } else {
            -1
        }
    };
    let (sn, sr) = (side(n), side(rho));
    let trichotomy = sn == sr || sn == 0 || sr == 0;
    Ok(RelationReport {
        norm: n,
        modular: rho,
        p_minus: pm,
        p_plus: pp,
        above_one,
        below_one,
        trichotomy,
        normalization_residual: norm.residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderReport {
    /// `|∫ u v dx|`
    pub lhs: f64,
    /// `2 ‖u‖_{p(·)} ‖v‖_{p'(·)}`
    pub rhs: f64,
    pub holds: bool,
}

/// Hölder pairing bound with the conjugate exponent `p/(p-1)`.
pub fn holder_bound(u: &GridFunction, v: &GridFunction, p: &ExponentField) -> Result<HolderReport> {
    check_grid(u, p)?;
    check_grid(v, p)?;
    let weights = u.grid().weights();
    let lhs = math::abs(u.values().iter().zip(v.values()).zip(weights).map(|((a, b), w)| a * b * w).sum());
    let pc = p.conjugate();
    let nu = luxemburg_raw(u.values(), weights, p.values(), DEFAULT_NORM_TOL)?.value;
    let nv = luxemburg_raw(v.values(), weights, pc.values(), DEFAULT_NORM_TOL)?.value;
    let rhs = 2.0 * nu * nv;
    Ok(HolderReport {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-12),
    })
}

/// Deterministic random probe `index` of the family seeded by `seed`: a
/// Navier-compliant sine series with random coefficients, random spectral
/// decay and random amplitude.
pub fn sine_series_probe(grid: &Arc<Grid>, seed: u64, index: u64) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let n = grid.nodes_per_axis();
    let modes = (n - 2).min(24);
    let decay: f64 = rng.random_range(0.0..4.0);
    let amplitude = math::powf(10.0, rng.random_range(-1.5..1.5));
    let ext = grid.extents().to_vec();
    let pi = core::f64::consts::PI;
    let mut u = GridFunction::zeros(grid);
    if grid.dim() == 1 {
        let coeffs: Vec<f64> = (1..=modes)
            .map(|k| rng.random_range(-1.0..1.0) * math::powf(k as f64, -decay))
            .collect();
        for (idx, v) in u.values_mut().iter_mut().enumerate() {
            let x = grid.coords(idx)[0] / ext[0];
            *v = amplitude * coeffs.iter().enumerate().map(|(k, c)| c * math::sin(pi * (k + 1) as f64 * x)).sum::<f64>();
        }
    } else {
        let modes = modes.min(8);
        let coeffs: Vec<f64> = (0..modes * modes)
            .map(|k| {
                let (i, j) = (k % modes + 1, k / modes + 1);
                rng.random_range(-1.0..1.0) * math::powf((i * i + j * j) as f64, -0.5 * decay)
            })
            .collect();
        for (idx, v) in u.values_mut().iter_mut().enumerate() {
            let [x, y] = grid.coords(idx);
            let (x, y) = (x / ext[0], y / ext[1]);
            let sx: Vec<f64> = (1..=modes).map(|i| math::sin(pi * i as f64 * x)).collect();
            let sy: Vec<f64> = (1..=modes).map(|j| math::sin(pi * j as f64 * y)).collect();
            *v = amplitude
                * coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * sx[k % modes] * sy[k / modes])
                    .sum::<f64>();
        }
    }
    apply_navier_bc(&u)
}

/// `|u|_{s(·)} / ‖u‖_X`, or `None` for probes with vanishing X-norm.
pub fn embedding_ratio(u: &GridFunction, p: &ExponentField, s: &ExponentField) -> Result<Option<f64>> {
    let xn = x_norm(u, p)?;
    if !(xn > 0.0) {
        return Ok(None);
    }
    let num = luxemburg_norm(u, s, DEFAULT_NORM_TOL)?.value;
    Ok(Some(num / xn))
}

/// `safety × max` of [`embedding_ratio`] over explicit probes.
pub fn embedding_constant_from_probes(
    probes: &[GridFunction],
    p: &ExponentField,
    s: &ExponentField,
    safety_factor: f64,
) -> Result<f64> {
    let mut best = 0.0f64;
    for u in probes {
        if let Some(r) = embedding_ratio(u, p, s)? {
            best = best.max(r);
        }
    }
    Ok(safety_factor * best)
}

/// Empirical constant `E` with `|u|_{s(·)} ≤ E ‖u‖_X` over `probes` seeded
/// sine-series probes, times [`DEFAULT_SAFETY_FACTOR`]. Each probe depends only
/// on `(seed, index)`, so the estimate never decreases when probes are added.
pub fn estimate_embedding_constant(p: &ExponentField, s: &ExponentField, probes: usize, seed: u64) -> Result<f64> {
    estimate_with_safety(p, s, probes, seed, DEFAULT_SAFETY_FACTOR)
}

fn estimate_with_safety(p: &ExponentField, s: &ExponentField, probes: usize, seed: u64, safety: f64) -> Result<f64> {
    if !same_grid(p.grid(), s.grid()) {
        return Err(Error::GridMismatch);
    }
    let p_star = critical_exponent(p);
    if let Some(node) = (0..s.values().len()).find(|&k| s.values()[k] > p_star.values()[k]) {
        return Err(Error::InvalidParameter(format!(
            "embedding exponent {} exceeds p* = {} at node {node}",
            s.values()[node],
            p_star.values()[node]
        )));
    }
    if probes == 0 {
        return Err(Error::InvalidParameter("at least one probe is required".into()));
    }
    let mut best = 0.0f64;
    for index in 0..probes {
        let u = sine_series_probe(p.grid(), seed, index as u64);
        if let Some(r) = embedding_ratio(&u, p, s)? {
            best = best.max(r);
        }
    }
    Ok(safety * best)
}

/// The three constants of the mountain-pass estimates, all derived from one
/// empirical embedding constant `E` of `X` into `L^{p*(·)}`:
/// `C₁ = 2 max(E^{q₊}, E^{q₋})`, `C₂ = 2 max(E^{r₊}, E^{r₋})`, `C₃ = 2E`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// `E`, safety factor included.
    pub embedding: f64,
    pub probe_count: usize,
    pub safety_factor: f64,
}

impl EmbeddingConstants {
    pub fn from_embedding(embedding: f64, q: &ExponentField, r: &ExponentField, probe_count: usize, safety_factor: f64) -> Self {
        let pow_max = |lo: f64, hi: f64| math::powf(embedding, lo).max(math::powf(embedding, hi));
        EmbeddingConstants {
            c1: 2.0 * pow_max(q.p_minus(), q.p_plus()),
            c2: 2.0 * pow_max(r.p_minus(), r.p_plus()),
            c3: 2.0 * embedding,
            embedding,
            probe_count,
            safety_factor,
        }
    }

    pub fn estimate(p: &ExponentField, q: &ExponentField, r: &ExponentField, probes: usize, seed: u64) -> Result<Self> {
        let p_star = critical_exponent(p);
        let e = estimate_embedding_constant(p, &p_star, probes, seed)?;
        Ok(Self::from_embedding(e, q, r, probes, DEFAULT_SAFETY_FACTOR))
    }
}

/// Nodewise-weighted Luxemburg norm of `w` under exponent `e`.
pub(crate) fn weight_norm(w: &GridFunction, e: &ExponentField) -> Result<f64> {
    Ok(luxemburg_norm(w, e, DEFAULT_NORM_TOL)?.value)
}

/// Sup norm helper shared by the hypothesis checks.
pub(crate) fn sup_norm(w: &GridFunction) -> f64 {
    w.values().iter().fold(0.0, |m, v| m.max(math::abs(*v)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_grid;

    fn line(n: usize) -> Arc<Grid> {
        build_grid(1, &[1.0], n).unwrap()
    }

    #[test]
    fn modular_examples() {
        let g = line(65);
        let p2 = ExponentField::constant(&g, 2.0, 7).unwrap();
        assert_eq!(modular(&GridFunction::zeros(&g), &p2).unwrap().value, 0.0);
        let x = GridFunction::from_fn(&g, |x, _| x);
        let m = modular(&x, &p2).unwrap().value;
        assert!((m - 1.0 / 3.0).abs() < 1e-4, "{m}");

        let g = line(2049);
        let px = ExponentField::new(&g, (0..2049).map(|k| 2.0 + g.coords(k)[0]).collect(), 7, 2.0).unwrap();
        let m = modular(&GridFunction::constant(&g, 2.0), &px).unwrap().value;
        let exact = 4.0 / 2f64.ln();
        assert!((m - exact).abs() / exact < 1e-6, "{m} vs {exact}");
    }

    #[test]
    fn norm_examples() {
        let g = line(65);
        let p2 = ExponentField::constant(&g, 2.0, 7).unwrap();
        assert_eq!(luxemburg_norm(&GridFunction::zeros(&g), &p2, 1e-12).unwrap().value, 0.0);
        let x = GridFunction::from_fn(&g, |x, _| x);
        let n = luxemburg_norm(&x, &p2, 1e-12).unwrap().value;
        let m = modular(&x, &p2).unwrap().value;
        assert!((n - m.sqrt()).abs() < 1e-10);
        assert!((n - (1.0f64 / 3.0).sqrt()).abs() < 1e-4);
        let pv = ExponentField::new(&g, (0..65).map(|k| 1.3 + g.coords(k)[0]).collect(), 7, 2.0).unwrap();
        let one = luxemburg_norm(&GridFunction::constant(&g, 1.0), &pv, 1e-12).unwrap();
        assert!((one.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn norm_rejects_bad_tolerance() {
        let g = line(9);
        let p = ExponentField::constant(&g, 2.0, 7).unwrap();
        assert!(luxemburg_norm(&GridFunction::constant(&g, 1.0), &p, 0.0).is_err());
    }

    #[test]
    fn relations_on_constants() {
        let g = line(65);
        let px = ExponentField::new(&g, (0..65).map(|k| 2.0 + g.coords(k)[0]).collect(), 7, 2.0).unwrap();
        let one = verify_norm_modular_relations(&GridFunction::constant(&g, 1.0), &px).unwrap();
        assert!(one.all_hold());
        assert!((one.norm - 1.0).abs() < 1e-12 && (one.modular - 1.0).abs() < 1e-12);
        let three = verify_norm_modular_relations(&GridFunction::constant(&g, 3.0), &px).unwrap();
        assert!(three.all_hold() && three.norm > 1.0);
        assert!(three.modular >= 9.0);
    }

    #[test]
    fn holder_examples() {
        let g = line(33);
        let p = ExponentField::constant(&g, 2.0, 7).unwrap();
        let z = holder_bound(&GridFunction::zeros(&g), &GridFunction::constant(&g, 1.0), &p).unwrap();
        assert!(z.holds && z.lhs == 0.0 && z.rhs == 0.0);
        let one = GridFunction::constant(&g, 1.0);
        let r = holder_bound(&one, &one, &p).unwrap();
        assert!((r.lhs - 1.0).abs() < 1e-12 && (r.rhs - 2.0).abs() < 1e-10 && r.holds);
    }

    #[test]
    fn probes_are_deterministic_and_navier() {
        let g = line(65);
        let a = sine_series_probe(&g, 42, 3);
        let b = sine_series_probe(&g, 42, 3);
        assert_eq!(a, b);
        assert_ne!(a, sine_series_probe(&g, 42, 4));
        assert_eq!(a.values()[0], 0.0);
        assert_eq!(a.values()[64], 0.0);
    }

    #[test]
    fn one_probe_returns_safety_times_its_ratio() {
        let g = line(65);
        let p = ExponentField::constant(&g, 2.0, 7).unwrap();
        let u = sine_series_probe(&g, 1, 0);
        let r = embedding_ratio(&u, &p, &p).unwrap().unwrap();
        let unit = u.scaled(1.0 / r);
        let e = embedding_constant_from_probes(&[u], &p, &p, 1.2).unwrap();
        assert!((e / r - 1.2).abs() < 1e-12);
        // constant exponents make the ratio scale free
        let e1 = embedding_constant_from_probes(&[unit], &p, &p, 1.2).unwrap();
        assert!((e1 - e).abs() < 1e-9 * e);
    }

    #[test]
    fn estimate_monotone_in_probe_count() {
        let g = line(33);
        let p = ExponentField::constant(&g, 2.0, 7).unwrap();
        let s = ExponentField::constant(&g, 2.0, 7).unwrap();
        let e8 = estimate_embedding_constant(&p, &s, 8, 42).unwrap();
        let e16 = estimate_embedding_constant(&p, &s, 16, 42).unwrap();
        assert!(e16 >= e8 && e8 > 0.0);
    }
}
