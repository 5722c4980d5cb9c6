//! Line-oriented experiment configuration.
//!
//! ```text
//! # comments run to end of line
//! mode = theorem1
//!
//! [grid]
//! dim = 1
//! nodes = 129
//! extent = 1
//! omega0 = 0.25 0.75
//!
//! [exponents]
//! N = 7
//! p = 2
//! q = 1.5
//! r = 5
//!
//! [kirchhoff]
//! a = 1
//! b = 1
//! gamma = 1
//!
//! [problem]
//! lambda = 0.5
//! f = constant 1
//! g = indicator 1
//! h = bump 0.1
//!
//! [solver]
//! seed = 7
//! ```
//!
//! Every key is optional; omitted keys keep the values of
//! [`ExperimentSpec::default`], which is the canonical 1D instance.

use std::fmt::{self, Write as _};
use std::sync::Arc;

use thiserror::Error;
use triharm_core::solvers::{Mode, PipelineConfig};
use triharm_core::{build_exponent_field, build_grid, ExponentField, Grid, KirchhoffCoefficients, ProblemData, SolverParams};

use crate::profiles::{ExponentProfile, WeightProfile};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{key}: {message}")]
    Validation { key: String, message: String },
}

impl ConfigError {
    fn parse(line: usize, message: impl Into<String>) -> Self {
        ConfigError::Parse {
            line,
            message: message.into(),
        }
    }

    fn invalid(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Validation {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

/// Fully resolved experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub dim: usize,
    pub nodes: usize,
    pub extent: f64,
    /// `[x0, x1]` in 1D, `[x0, x1, y0, y1]` in 2D.
    pub omega0: Vec<f64>,
    pub analysis_dim: usize,
    pub lipschitz: f64,
    pub p: ExponentProfile,
    pub q: ExponentProfile,
    pub r: ExponentProfile,
    pub a: f64,
    pub b: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub eta: f64,
    pub mu: f64,
    pub f: WeightProfile,
    pub g: WeightProfile,
    pub h: WeightProfile,
    pub solver: SolverParams,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            mode: Mode::Theorem1,
            dim: 1,
            nodes: 129,
            extent: 1.0,
            omega0: vec![0.25, 0.75],
            analysis_dim: 7,
            lipschitz: 1.0,
            p: ExponentProfile::Constant(2.0),
            q: ExponentProfile::Constant(1.5),
            r: ExponentProfile::Constant(5.0),
            a: 1.0,
            b: 1.0,
            gamma: 1.0,
            lambda: 0.5,
            eta: 0.01,
            mu: 0.01,
            f: WeightProfile::Constant(1.0),
            g: WeightProfile::Indicator(1.0),
            h: WeightProfile::Bump(0.1),
            solver: SolverParams::default(),
        }
    }
}

impl ExperimentSpec {
    /// The sign-changing `h ≡ 0` instance: `f = sin 2πx + 0.3`, `λ = 4`.
    pub fn theorem2_default() -> Self {
        ExperimentSpec {
            mode: Mode::Theorem2,
            lambda: 4.0,
            f: WeightProfile::Sine {
                amplitude: 1.0,
                frequency: 1.0,
                shift: 0.3,
            },
            h: WeightProfile::Zero,
            ..ExperimentSpec::default()
        }
    }

    pub fn grid(&self) -> Result<Arc<Grid>, ConfigError> {
        let extents = vec![self.extent; self.dim];
        build_grid(self.dim, &extents, self.nodes).map_err(|e| ConfigError::invalid("grid", e.to_string()))
    }

    fn omega0_mask(&self, grid: &Grid) -> Vec<bool> {
        (0..grid.len())
            .map(|k| {
                let c = grid.coords(k);
                (0..self.dim).all(|a| c[a] >= self.omega0[2 * a] && c[a] <= self.omega0[2 * a + 1])
            })
            .collect()
    }

    /// Checks the spec without building any field.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dim == 1 || self.dim == 2) {
            return Err(ConfigError::invalid("dim", "must be 1 or 2"));
        }
        if self.nodes < 9 {
            return Err(ConfigError::invalid("nodes", "must be at least 9"));
        }
        if !(self.extent > 0.0 && self.extent.is_finite()) {
            return Err(ConfigError::invalid("extent", "must be positive"));
        }
        if self.omega0.len() != 2 * self.dim {
            return Err(ConfigError::invalid("omega0", format!("expects {} numbers", 2 * self.dim)));
        }
        for pair in self.omega0.chunks(2) {
            if !(0.0 <= pair[0] && pair[0] < pair[1] && pair[1] <= self.extent) {
                return Err(ConfigError::invalid("omega0", "needs 0 <= lo < hi <= extent"));
            }
        }
        if self.analysis_dim <= 3 {
            return Err(ConfigError::invalid("N", "must exceed 3"));
        }
        for (key, v) in [("a", self.a), ("b", self.b), ("gamma", self.gamma)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ConfigError::invalid(key, format!("{key} > 0 required, got {v}")));
            }
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(ConfigError::invalid("lambda", "lambda > 0 required"));
        }
        if !(self.eta > 0.0 && self.mu > 0.0) {
            return Err(ConfigError::invalid("eta", "eta and mu must be positive"));
        }
        if !self.g.is_nonnegative() {
            return Err(ConfigError::invalid("g", "g(x) >= 0 required"));
        }
        if self.mode == Mode::Theorem2 {
            if !self.h.is_zero() {
                return Err(ConfigError::invalid("h", "theorem2 requires h(x) ≡ 0"));
            }
            if !self.g.is_positive_on_omega0() {
                return Err(ConfigError::invalid("g", "theorem2 requires g(x) > 0 in omega0"));
            }
        }
        Ok(())
    }

    /// Builds the problem, solver parameters and pipeline configuration.
    pub fn materialize(&self) -> Result<(ProblemData, SolverParams, PipelineConfig), ConfigError> {
        self.validate()?;
        let grid = self.grid()?;
        let n = self.analysis_dim;
        let p = build_exponent_field(&grid, self.p.sample(&grid), n, self.lipschitz)
            .map_err(|e| ConfigError::invalid("p", e.to_string()))?;
        let qr = |key: &str, prof: &ExponentProfile| {
            ExponentField::new(&grid, prof.sample(&grid), n, self.lipschitz).map_err(|e| ConfigError::invalid(key, e.to_string()))
        };
        let q = qr("q", &self.q)?;
        let r = qr("r", &self.r)?;
        let mask = self.omega0_mask(&grid);
        let f = self.f.sample(&grid, &self.omega0);
        let g = self.g.sample(&grid, &self.omega0);
        let h = self.h.sample(&grid, &self.omega0);
        let k = KirchhoffCoefficients::new(self.a, self.b, self.gamma).map_err(|e| ConfigError::invalid("gamma", e.to_string()))?;
        let mut prob = ProblemData::new(k, self.lambda, p, q, r, f, g, h, mask).map_err(|e| ConfigError::invalid("problem", e.to_string()))?;
        prob.eta = self.eta;
        prob.mu = self.mu;
        Ok((prob, self.solver.clone(), PipelineConfig::new(self.mode)))
    }

    /// Canonical text form; `parse_config(&spec.to_config())` gives `spec` back.
    pub fn to_config(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "mode = {}", self.mode.as_str());
        let _ = writeln!(s, "\n[grid]");
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "nodes = {}", self.nodes);
        let _ = writeln!(s, "extent = {:?}", self.extent);
        let _ = writeln!(s, "omega0 = {}", join(&self.omega0));
        let _ = writeln!(s, "\n[exponents]");
        let _ = writeln!(s, "N = {}", self.analysis_dim);
        let _ = writeln!(s, "lipschitz = {:?}", self.lipschitz);
        let _ = writeln!(s, "p = {}", self.p);
        let _ = writeln!(s, "q = {}", self.q);
        let _ = writeln!(s, "r = {}", self.r);
        let _ = writeln!(s, "\n[kirchhoff]");
        let _ = writeln!(s, "a = {:?}", self.a);
        let _ = writeln!(s, "b = {:?}", self.b);
        let _ = writeln!(s, "gamma = {:?}", self.gamma);
        let _ = writeln!(s, "\n[problem]");
        let _ = writeln!(s, "lambda = {:?}", self.lambda);
        let _ = writeln!(s, "eta = {:?}", self.eta);
        let _ = writeln!(s, "mu = {:?}", self.mu);
        let _ = writeln!(s, "f = {}", self.f);
        let _ = writeln!(s, "g = {}", self.g);
        let _ = writeln!(s, "h = {}", self.h);
        let sp = &self.solver;
        let _ = writeln!(s, "\n[solver]");
        let _ = writeln!(s, "seed = {}", sp.seed);
        let _ = writeln!(s, "max_iters = {}", sp.max_iters);
        let _ = writeln!(s, "grad_tol = {:?}", sp.grad_tol);
        let _ = writeln!(s, "step_init = {:?}", sp.step_init);
        let _ = writeln!(s, "path_points = {}", sp.path_points);
        let _ = writeln!(s, "backtrack = {:?}", sp.backtrack_factor);
        let _ = writeln!(s, "armijo_c = {:?}", sp.armijo_c);
        match sp.theta {
            Some(t) => {
                let _ = writeln!(s, "theta = {t:?}");
            }
            None => {
                let _ = writeln!(s, "theta = auto");
            }
        }
        let _ = writeln!(s, "norm_bound = {:?}", sp.norm_bound);
        let _ = writeln!(s, "sphere_samples = {}", sp.sphere_samples);
        let _ = writeln!(s, "embedding_probes = {}", sp.embedding_probes);
        let _ = writeln!(s, "weak_form_directions = {}", sp.weak_form_directions);
        s
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

impl fmt::Display for ExperimentSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_config())
    }
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| ConfigError::parse(line, format!("{key}: cannot parse '{v}'")))
}

/// Parses a configuration document. Unknown sections or keys, duplicate
/// keys and malformed values are parse errors; hypothesis-level problems
/// come back as validation errors.
pub fn parse_config(text: &str) -> Result<ExperimentSpec, ConfigError> {
    let mut spec = ExperimentSpec::default();
    let mut section = String::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut mode_line = None;
    let mut explicit_f = false;
    let mut explicit_h = false;
    let mut explicit_lambda = false;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::parse(line, "unterminated section header"))?
                .trim();
            if !matches!(name, "grid" | "exponents" | "kirchhoff" | "problem" | "solver") {
                return Err(ConfigError::parse(line, format!("unknown section [{name}]")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| ConfigError::parse(line, "expected 'key = value'"))?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(ConfigError::parse(line, format!("{key}: missing value")));
        }
        if !seen.insert(format!("{section}.{key}")) {
            return Err(ConfigError::parse(line, format!("duplicate key {key}")));
        }
        match (section.as_str(), key) {
            ("", "mode") => {
                spec.mode = match value {
                    "theorem1" => Mode::Theorem1,
                    "theorem2" => Mode::Theorem2,
                    other => return Err(ConfigError::parse(line, format!("unknown mode '{other}'"))),
                };
                mode_line = Some(line);
            }
            ("grid", "dim") => spec.dim = num(line, key, value)?,
            ("grid", "nodes") => spec.nodes = num(line, key, value)?,
            ("grid", "extent") => spec.extent = num(line, key, value)?,
            ("grid", "omega0") => {
                spec.omega0 = value
                    .split_whitespace()
                    .map(|t| num(line, key, t))
                    .collect::<Result<_, _>>()?
            }
            ("exponents", "N") => spec.analysis_dim = num(line, key, value)?,
            ("exponents", "lipschitz") => spec.lipschitz = num(line, key, value)?,
            ("exponents", "p") => spec.p = ExponentProfile::parse(value).map_err(|m| ConfigError::parse(line, m))?,
            ("exponents", "q") => spec.q = ExponentProfile::parse(value).map_err(|m| ConfigError::parse(line, m))?,
            ("exponents", "r") => spec.r = ExponentProfile::parse(value).map_err(|m| ConfigError::parse(line, m))?,
            ("kirchhoff", "a") => spec.a = num(line, key, value)?,
            ("kirchhoff", "b") => spec.b = num(line, key, value)?,
            ("kirchhoff", "gamma") => spec.gamma = num(line, key, value)?,
            ("problem", "lambda") => {
                spec.lambda = num(line, key, value)?;
                explicit_lambda = true;
            }
            ("problem", "eta") => spec.eta = num(line, key, value)?,
            ("problem", "mu") => spec.mu = num(line, key, value)?,
            ("problem", "f") => {
                spec.f = WeightProfile::parse(value).map_err(|m| ConfigError::parse(line, m))?;
                explicit_f = true;
            }
            ("problem", "g") => spec.g = WeightProfile::parse(value).map_err(|m| ConfigError::parse(line, m))?,
            ("problem", "h") => {
                spec.h = WeightProfile::parse(value).map_err(|m| ConfigError::parse(line, m))?;
                explicit_h = true;
            }
            ("solver", "seed") => spec.solver.seed = num(line, key, value)?,
            ("solver", "max_iters") => spec.solver.max_iters = num(line, key, value)?,
            ("solver", "grad_tol") => spec.solver.grad_tol = num(line, key, value)?,
            ("solver", "step_init") => spec.solver.step_init = num(line, key, value)?,
            ("solver", "path_points") => spec.solver.path_points = num(line, key, value)?,
            ("solver", "backtrack") => spec.solver.backtrack_factor = num(line, key, value)?,
            ("solver", "armijo_c") => spec.solver.armijo_c = num(line, key, value)?,
            ("solver", "theta") => {
                spec.solver.theta = if value == "auto" { None } else { Some(num(line, key, value)?) }
            }
            ("solver", "norm_bound") => spec.solver.norm_bound = num(line, key, value)?,
            ("solver", "sphere_samples") => spec.solver.sphere_samples = num(line, key, value)?,
            ("solver", "embedding_probes") => spec.solver.embedding_probes = num(line, key, value)?,
            ("solver", "weak_form_directions") => spec.solver.weak_form_directions = num(line, key, value)?,
            (sec, key) => {
                let at = if sec.is_empty() { String::new() } else { format!(" in [{sec}]") };
                return Err(ConfigError::parse(line, format!("unknown key '{key}'{at}")));
            }
        }
    }
    // theorem2 documents inherit the h ≡ 0 instance unless they say otherwise
    if mode_line.is_some() && spec.mode == Mode::Theorem2 {
        let t2 = ExperimentSpec::theorem2_default();
        if !explicit_h {
            spec.h = t2.h;
        }
        if !explicit_f {
            spec.f = t2.f;
        }
        if !explicit_lambda {
            spec.lambda = t2.lambda;
        }
    }
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_canonical() {
        let spec = parse_config("# nothing\n\n").unwrap();
        assert_eq!(spec, ExperimentSpec::default());
        assert_eq!((spec.nodes, spec.analysis_dim, spec.a, spec.b, spec.gamma), (129, 7, 1.0, 1.0, 1.0));
    }

    #[test]
    fn negative_gamma_is_a_validation_error() {
        let err = parse_config("[kirchhoff]\ngamma = -1\n").unwrap_err();
        assert!(matches!(err, ConfigError::Validation { ref key, .. } if key == "gamma"), "{err}");
    }

    #[test]
    fn theorem2_with_h_is_rejected() {
        let err = parse_config("mode = theorem2\n[problem]\nh = bump 0.1\n").unwrap_err();
        assert!(err.to_string().contains("h(x) ≡ 0"), "{err}");
        let ok = parse_config("mode = theorem2\n").unwrap();
        assert_eq!(ok, ExperimentSpec::theorem2_default());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_config("mode = theorem1\n\n[grid]\nwidth = 3\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Parse {
                line: 4,
                message: "unknown key 'width' in [grid]".into()
            }
        );
        assert!(matches!(parse_config("[grid]\nnodes = many\n"), Err(ConfigError::Parse { line: 2, .. })));
        assert!(matches!(parse_config("[nope]\n"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("lambda 3\n"), Err(ConfigError::Parse { line: 1, .. })));
        assert!(matches!(parse_config("[grid]\nnodes = 9\nnodes = 9\n"), Err(ConfigError::Parse { line: 3, .. })));
    }

    #[test]
    fn round_trip() {
        for spec in [ExperimentSpec::default(), ExperimentSpec::theorem2_default()] {
            assert_eq!(parse_config(&spec.to_config()).unwrap(), spec);
        }
        let mut odd = ExperimentSpec {
            p: ExponentProfile::Affine { base: 2.0, slope: 0.1 },
            lambda: 0.1 + 0.2,
            dim: 2,
            nodes: 17,
            omega0: vec![0.25, 0.75, 0.3, 0.6],
            ..ExperimentSpec::default()
        };
        odd.solver.theta = Some(2.5);
        assert_eq!(parse_config(&odd.to_config()).unwrap(), odd);
    }

    #[test]
    fn materializes_canonical_instance() {
        let (prob, params, cfg) = ExperimentSpec::default().materialize().unwrap();
        assert_eq!(prob.grid().len(), 129);
        assert_eq!(prob.omega0_mask.iter().filter(|m| **m).count(), 65);
        assert_eq!(params, SolverParams::default());
        assert_eq!(cfg.mode, Mode::Theorem1);
    }
}
