//! Variable exponents sampled on a grid, the critical exponent `p*` and the
//! exponent chain required of `p`, `q`, `r`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::HypothesisReport;
use crate::mesh::{same_grid, Grid};

/// Default analysis dimension `N`.
pub const DEFAULT_ANALYSIS_DIM: usize = 7;

/// Default margin for the strict inequalities of the exponent chain.
pub const DEFAULT_CHAIN_MARGIN: f64 = 1e-9;

/// Derived exponents above this value are flagged as near-critical.
pub const NEAR_CRITICAL_THRESHOLD: f64 = 1e4;

/// Slack added to the Lipschitz proxy so exact affine profiles pass.
const LIPSCHITZ_SLACK: f64 = 1e-12;

/// A variable exponent `p(·) > 1` on a grid, together with `p₋`, `p₊` and
/// the analysis dimension `N` used by the critical exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    p_minus: f64,
    p_plus: f64,
    analysis_dim: usize,
}

impl ExponentField {
    /// Validates `values > 1` and the Lipschitz proxy, without the `p₊ < N/3`
    /// bound. Used for `q`, `r` and derived exponents.
    pub fn new(grid: &Arc<Grid>, values: Vec<f64>, analysis_dim: usize, lipschitz_bound: f64) -> Result<Self> {
        check_shape(grid, &values, analysis_dim)?;
        for (node, &v) in values.iter().enumerate() {
            if !(v.is_finite() && v > 1.0) {
                return Err(Error::NonAdmissibleExponent {
                    node,
                    value: v,
                    limit: f64::INFINITY,
                });
            }
        }
        check_lipschitz(grid, &values, lipschitz_bound)?;
        Ok(Self::from_parts(grid, values, analysis_dim))
    }

    /// Constant exponent on `grid`.
    pub fn constant(grid: &Arc<Grid>, value: f64, analysis_dim: usize) -> Result<Self> {
        Self::new(grid, alloc::vec![value; grid.len()], analysis_dim, f64::INFINITY)
    }

    fn from_parts(grid: &Arc<Grid>, values: Vec<f64>, analysis_dim: usize) -> Self {
        let p_minus = values.iter().copied().fold(f64::INFINITY, f64::min);
        let p_plus = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        ExponentField {
            grid: Arc::clone(grid),
            values,
            p_minus,
            p_plus,
            analysis_dim,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn analysis_dim(&self) -> usize {
        self.analysis_dim
    }

    pub fn is_constant(&self) -> bool {
        self.p_minus == self.p_plus
    }

    /// Nodewise conjugate `p/(p-1)`.
    pub fn conjugate(&self) -> ExponentField {
        let values = self.values.iter().map(|p| p / (p - 1.0)).collect();
        Self::from_parts(&self.grid, values, self.analysis_dim)
    }
}

fn check_shape(grid: &Grid, values: &[f64], analysis_dim: usize) -> Result<()> {
    if values.len() != grid.len() {
        return Err(Error::BadGridSpec(format!(
            "{} exponent values for a grid of {} nodes",
            values.len(),
            grid.len()
        )));
    }
    if analysis_dim <= 3 {
        return Err(Error::InvalidParameter(format!(
            "analysis dimension N = {analysis_dim} must exceed 3"
        )));
    }
    Ok(())
}

fn check_lipschitz(grid: &Grid, values: &[f64], bound: f64) -> Result<()> {
    if bound.is_infinite() {
        return Ok(());
    }
    let n = grid.nodes_per_axis();
    for idx in 0..values.len() {
        let i = idx % n;
        let j = idx / n;
        let mut neighbors = [(0usize, 0.0f64); 2];
        let mut count = 0;
        if i + 1 < n {
            neighbors[count] = (idx + 1, grid.spacing()[0]);
            count += 1;
        }
        if grid.dim() == 2 && j + 1 < n {
            neighbors[count] = (idx + n, grid.spacing()[1]);
            count += 1;
        }
        for &(nb, h) in &neighbors[..count] {
            let jump = crate::math::abs(values[nb] - values[idx]);
            let allowed = bound * h;
            if jump > allowed + LIPSCHITZ_SLACK {
                return Err(Error::ContinuityViolation {
                    node: idx,
                    neighbor: nb,
                    jump,
                    allowed,
                });
            }
        }
    }
    Ok(())
}

/// Builds the principal exponent `p(·)`: `1 < p(x)`, `p₊ < N/3`, plus the
/// Lipschitz proxy `|p(x) - p(y)| ≤ L·h` between adjacent nodes.
pub fn build_exponent_field(
    grid: &Arc<Grid>,
    node_values: Vec<f64>,
    analysis_dim: usize,
    lipschitz_bound: f64,
) -> Result<ExponentField> {
    check_shape(grid, &node_values, analysis_dim)?;
    let limit = analysis_dim as f64 / 3.0;
    for (node, &v) in node_values.iter().enumerate() {
        if !(v.is_finite() && v > 1.0 && v < limit) {
            return Err(Error::NonAdmissibleExponent { node, value: v, limit });
        }
    }
    check_lipschitz(grid, &node_values, lipschitz_bound)?;
    Ok(ExponentField::from_parts(grid, node_values, analysis_dim))
}

/// `p*(x) = N p(x) / (N - 3 p(x))`.
pub fn critical_exponent(p: &ExponentField) -> ExponentField {
    let n = p.analysis_dim as f64;
    let values = p.values.iter().map(|&v| n * v / (n - 3.0 * v)).collect();
    ExponentField::from_parts(&p.grid, values, p.analysis_dim)
}

/// `p*`, `q₀ = p*/(p*-q)`, `r₀ = p*/(p*-r)` and the conjugate of `p*`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedExponents {
    pub p_star: ExponentField,
    pub q0: ExponentField,
    pub r0: ExponentField,
    pub p_star_conjugate: ExponentField,
    /// Some derived exponent exceeds [`NEAR_CRITICAL_THRESHOLD`].
    pub near_critical: bool,
}

pub fn derived_exponents(p: &ExponentField, q: &ExponentField, r: &ExponentField) -> Result<DerivedExponents> {
    if !same_grid(&p.grid, &q.grid) || !same_grid(&p.grid, &r.grid) {
        return Err(Error::GridMismatch);
    }
    let p_star = critical_exponent(p);
    let ratio = |s: &ExponentField| -> Result<ExponentField> {
        let mut values = Vec::with_capacity(s.values.len());
        for (node, (&ps, &sv)) in p_star.values.iter().zip(&s.values).enumerate() {
            let denominator = ps - sv;
            if !(denominator > 0.0) {
                return Err(Error::ExponentOutOfRange { node, denominator });
            }
            values.push(ps / denominator);
        }
        Ok(ExponentField::from_parts(&p.grid, values, p.analysis_dim))
    };
    let q0 = ratio(q)?;
    let r0 = ratio(r)?;
    let p_star_conjugate = p_star.conjugate();
    let near_critical = q0.p_plus > NEAR_CRITICAL_THRESHOLD || r0.p_plus > NEAR_CRITICAL_THRESHOLD;
    Ok(DerivedExponents {
        p_star,
        q0,
        r0,
        p_star_conjugate,
        near_critical,
    })
}

/// Checks `1 < q(x) < p₋ ≤ p₊ < (γ+1)p₋ ≤ (γ+1)p₊ < r(x) < p*(x)` node by
/// node. Each strict link must hold with `margin` to spare; the report lists
/// the first failing node of every broken link, in chain order.
pub fn check_h1(p: &ExponentField, q: &ExponentField, r: &ExponentField, gamma: f64, margin: f64) -> HypothesisReport {
    let mut report = HypothesisReport::default();
    if !same_grid(&p.grid, &q.grid) || !same_grid(&p.grid, &r.grid) {
        report.push("H1: grid", None, "p, q, r live on different grids".into());
        return report;
    }
    if !(gamma > 0.0) {
        report.push("H1: gamma > 0", None, format!("gamma = {gamma}"));
        return report;
    }
    let p_star = critical_exponent(p);
    let (pm, pp) = (p.p_minus, p.p_plus);
    let lt = |a: f64, b: f64| a + margin < b;

    let len = p.values.len();
    let first = |report: &mut HypothesisReport, name: &'static str, ok: &dyn Fn(usize) -> bool, detail: &dyn Fn(usize) -> String| {
        if let Some(node) = (0..len).find(|&k| !ok(k)) {
            report.push(name, Some(node), detail(node));
        }
    };
    first(&mut report, "H1: 1 < q(x)", &|k| lt(1.0, q.values[k]), &|k| format!("q = {}", q.values[k]));
    first(&mut report, "H1: q(x) < p-", &|k| lt(q.values[k], pm), &|k| {
        format!("q = {}, p- = {pm}", q.values[k])
    });
    if !lt(pp, (gamma + 1.0) * pm) {
        report.push(
            "H1: p+ < (gamma+1) p-",
            None,
            format!("p+ = {pp}, (gamma+1) p- = {}", (gamma + 1.0) * pm),
        );
    }
    first(&mut report, "H1: (gamma+1) p+ < r(x)", &|k| lt((gamma + 1.0) * pp, r.values[k]), &|k| {
        format!("(gamma+1) p+ = {}, r = {}", (gamma + 1.0) * pp, r.values[k])
    });
    first(&mut report, "H1: r(x) < p*(x)", &|k| lt(r.values[k], p_star.values[k]), &|k| {
        format!("r = {}, p* = {}", r.values[k], p_star.values[k])
    });
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use crate::mesh::build_grid;

    fn line(n: usize) -> Arc<Grid> {
        build_grid(1, &[1.0], n).unwrap()
    }

    #[test]
    fn constant_two_is_admissible_for_n7() {
        let g = line(17);
        let p = build_exponent_field(&g, vec![2.0; 17], 7, 1.0).unwrap();
        assert_eq!((p.p_minus(), p.p_plus()), (2.0, 2.0));
    }

    #[test]
    fn constant_above_n_over_3_rejected() {
        let g = line(17);
        let err = build_exponent_field(&g, vec![2.5; 17], 7, 1.0).unwrap_err();
        assert!(matches!(err, Error::NonAdmissibleExponent { .. }));
        let err = build_exponent_field(&g, vec![1.0; 17], 7, 1.0).unwrap_err();
        assert!(matches!(err, Error::NonAdmissibleExponent { .. }));
    }

    #[test]
    fn affine_exponent_extremes() {
        let g = line(33);
        let vals = (0..33).map(|k| 2.0 + 0.2 * g.coords(k)[0]).collect();
        let p = build_exponent_field(&g, vals, 10, 0.2).unwrap();
        assert_eq!(p.p_minus(), 2.0);
        assert!((p.p_plus() - 2.2).abs() < 1e-15);
        let ps = critical_exponent(&p);
        assert!((ps.values()[0] - 5.0).abs() < 1e-12);
        assert!((ps.values()[32] - 22.0 / 3.4).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_proxy_rejects_jumps() {
        let g = line(9);
        let mut vals = vec![2.0; 9];
        vals[4] = 2.1;
        let err = build_exponent_field(&g, vals, 7, 0.5).unwrap_err();
        assert!(matches!(err, Error::ContinuityViolation { node: 3, neighbor: 4, .. }));
    }

    #[test]
    fn critical_exponent_values() {
        let g = line(9);
        let p7 = ExponentField::constant(&g, 2.0, 7).unwrap();
        assert!(critical_exponent(&p7).values().iter().all(|v| (v - 14.0).abs() < 1e-12));
        let p10 = ExponentField::constant(&g, 2.0, 10).unwrap();
        assert!(critical_exponent(&p10).values().iter().all(|v| (v - 5.0).abs() < 1e-12));
    }

    #[test]
    fn derived_exponent_values() {
        let g = line(9);
        let p = ExponentField::constant(&g, 2.0, 7).unwrap();
        let q = ExponentField::constant(&g, 1.5, 7).unwrap();
        let r = ExponentField::constant(&g, 5.0, 7).unwrap();
        let d = derived_exponents(&p, &q, &r).unwrap();
        assert!((d.q0.values()[3] - 1.12).abs() < 1e-12);
        assert!((d.r0.values()[3] - 14.0 / 9.0).abs() < 1e-12);
        for k in 0..9 {
            let s = 1.0 / d.p_star.values()[k] + 1.0 / d.p_star_conjugate.values()[k];
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(!d.near_critical);
    }

    #[test]
    fn near_critical_flagged() {
        let g = line(9);
        let p = ExponentField::constant(&g, 2.0, 7).unwrap();
        let q = ExponentField::constant(&g, 14.0 - 1e-6, 7).unwrap();
        let r = ExponentField::constant(&g, 5.0, 7).unwrap();
        let d = derived_exponents(&p, &q, &r).unwrap();
        assert!(d.near_critical);
        assert!((d.q0.values()[0] - 14.0e6).abs() / 14.0e6 < 1e-6);
        let q = ExponentField::constant(&g, 14.0, 7).unwrap();
        assert!(matches!(derived_exponents(&p, &q, &r), Err(Error::ExponentOutOfRange { .. })));
    }

    #[test]
    fn h1_chain_examples() {
        let g = line(9);
        let c = |v| ExponentField::constant(&g, v, 7).unwrap();
        assert!(check_h1(&c(2.0), &c(1.5), &c(5.0), 1.0, DEFAULT_CHAIN_MARGIN).passed());
        let rep = check_h1(&c(2.0), &c(2.5), &c(5.0), 1.0, DEFAULT_CHAIN_MARGIN);
        assert_eq!(rep.violations()[0].condition, "H1: q(x) < p-");
        let rep = check_h1(&c(2.0), &c(1.5), &c(3.5), 1.0, DEFAULT_CHAIN_MARGIN);
        assert_eq!(rep.violations()[0].condition, "H1: (gamma+1) p+ < r(x)");
        assert_eq!(rep.violations()[0].node, Some(0));
    }
}
