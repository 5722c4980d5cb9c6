//! Experiment orchestration and file emission.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;
use triharm_core::solvers::{geometry_stage, run_pipeline, GeometryStage, IterationRecord, PipelineRun, SolverOutcome};
use triharm_core::{GeometryConstants, GridFunction, HypothesisReport, ProblemData};

use crate::config::{ConfigError, ExperimentSpec};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
}

/// Result of one experiment.
#[derive(Debug)]
pub struct RunOutcome {
    pub certified: bool,
    /// Machine-readable name of the failing clause.
    pub clause: Option<&'static str>,
    pub detail: Option<String>,
    pub report: String,
}

/// Scientific notation with 17 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write(dir: &Path, name: &str, body: &str) -> Result<(), RunError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// `quantity,value` rows for whatever geometry the run produced.
pub fn geometry_csv(stage: Option<&GeometryStage>) -> String {
    let mut s = String::from("quantity,value\n");
    if let Some(st) = stage {
        for (k, v) in geometry_rows(st) {
            let _ = writeln!(s, "{k},{}", fmt_num(v));
        }
    }
    s
}

fn geometry_rows(st: &GeometryStage) -> Vec<(&'static str, f64)> {
    let g: &GeometryConstants = &st.constants;
    vec![
        ("rho", g.rho),
        ("epsilon", g.epsilon),
        ("c_epsilon", g.c_epsilon),
        ("c_rho", g.c_rho),
        ("lambda_bar", g.lambda_bar),
        ("delta", g.delta),
        ("alpha", g.alpha),
        ("c1", g.constants.c1),
        ("c2", g.constants.c2),
        ("c3", g.constants.c3),
        ("embedding", g.constants.embedding),
        ("f_q0", g.norms.f_q0),
        ("g_r0", g.norms.g_r0),
        ("h_conj", g.norms.h_conj),
        ("h_sup", g.norms.h_sup),
        ("theta", st.theta),
        ("sphere_min_energy", st.sphere.min_energy),
        ("ray_t0", st.ray.t0),
        ("ray_energy", st.ray.energy),
        ("ray_norm", st.ray.norm),
        ("starter_t", st.starter_t),
        ("starter_energy", st.starter_energy),
    ]
}

pub fn iterations_csv(mountain: Option<&SolverOutcome>, descent: Option<&SolverOutcome>) -> String {
    let mut s = format!("phase,{}\n", IterationRecord::CSV_HEADER);
    let mut rows = |phase: &str, out: Option<&SolverOutcome>| {
        for r in out.map(|o| o.history.as_slice()).unwrap_or(&[]) {
            let _ = writeln!(
                s,
                "{phase},{},{},{},{},{}",
                r.iter,
                fmt_num(r.energy),
                fmt_num(r.residual),
                fmt_num(r.x_norm),
                fmt_num(r.gap)
            );
        }
    };
    rows("mountain_pass", mountain);
    rows("ekeland", descent);
    s
}

pub fn field_csv(u: &GridFunction) -> String {
    let grid = u.grid();
    let two = grid.dim() == 2;
    let mut s = String::from(if two { "x,y,u\n" } else { "x,u\n" });
    for (k, v) in u.values().iter().enumerate() {
        let c = grid.coords(k);
        if two {
            let _ = writeln!(s, "{},{},{}", fmt_num(c[0]), fmt_num(c[1]), fmt_num(*v));
        } else {
            let _ = writeln!(s, "{},{}", fmt_num(c[0]), fmt_num(*v));
        }
    }
    s
}

fn hypothesis_lines(s: &mut String, name: &str, rep: &HypothesisReport) {
    if rep.passed() {
        let _ = writeln!(s, "{name}: pass");
    } else {
        let _ = writeln!(s, "{name}: FAIL");
        for v in rep.violations() {
            let _ = writeln!(s, "  {}", v);
        }
    }
}

fn outcome_lines(s: &mut String, name: &str, o: &SolverOutcome) {
    let _ = writeln!(s, "{name}:");
    let _ = writeln!(s, "  J          = {}", fmt_num(o.energy));
    let _ = writeln!(s, "  residual   = {}", fmt_num(o.residual));
    let _ = writeln!(s, "  x_norm     = {}", fmt_num(o.x_norm));
    let _ = writeln!(s, "  iterations = {}", o.iterations);
    let _ = writeln!(s, "  below cap  = {} (gap {})", o.ps.below_cap, fmt_num(o.ps.degeneracy_gap));
}

/// Human-readable summary of a pipeline run.
pub fn render_report(spec: &ExperimentSpec, prob: &ProblemData, run: &PipelineRun) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "triharm experiment report");
    let _ = writeln!(s, "mode: {}", spec.mode.as_str());
    let _ = writeln!(s, "grid: dim {} nodes {} extent {}", spec.dim, spec.nodes, spec.extent);
    let _ = writeln!(
        s,
        "kirchhoff: a {} b {} gamma {} cap {}",
        spec.a,
        spec.b,
        spec.gamma,
        fmt_num(prob.kirchhoff.cap())
    );
    let _ = writeln!(s, "lambda: {}", spec.lambda);
    let _ = writeln!(s, "exponents: p {} q {} r {} N {}", spec.p, spec.q, spec.r, spec.analysis_dim);
    let _ = writeln!(s, "weights: f {} g {} h {}", spec.f, spec.g, spec.h);
    let _ = writeln!(s, "seed: {}", spec.solver.seed);
    let _ = writeln!(s);
    hypothesis_lines(&mut s, "H1", &run.h1);
    hypothesis_lines(&mut s, "H2", &run.h2);
    if let Some(st) = &run.geometry {
        let _ = writeln!(s, "\ngeometry:");
        for (k, v) in geometry_rows(st) {
            let _ = writeln!(s, "  {k:<18} {}", fmt_num(v));
        }
    }
    if let Some(m) = &run.mountain {
        let _ = writeln!(s);
        outcome_lines(&mut s, "u1 (mountain pass)", m);
    }
    if let Some(d) = &run.descent {
        outcome_lines(&mut s, "u2 (ekeland descent)", d);
    }
    if let Some((a, b)) = run.weak_form {
        let _ = writeln!(s, "weak-form defect: u1 {} u2 {}", fmt_num(a), fmt_num(b));
    }
    let _ = writeln!(s);
    match &run.verdict {
        Ok(()) => {
            let _ = writeln!(s, "verdict: CERTIFIED");
        }
        Err(e) => {
            let _ = writeln!(s, "verdict: FAILED");
            let _ = writeln!(s, "clause: {}", e.clause());
            let _ = writeln!(s, "detail: {e}");
        }
    }
    s
}

/// Checks, geometry and both solvers; writes `geometry.csv`,
/// `iterations.csv`, `u1.csv`, `u2.csv` (when produced) and `report.txt`
/// into `out_dir`.
pub fn run_experiment(spec: &ExperimentSpec, out_dir: &Path) -> Result<RunOutcome, RunError> {
    let (prob, params, config) = spec.materialize()?;
    fs::create_dir_all(out_dir).map_err(|source| RunError::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let run = run_pipeline(&prob, &params, &config);
    let report = render_report(spec, &prob, &run);
    write(out_dir, "geometry.csv", &geometry_csv(run.geometry.as_ref()))?;
    write(out_dir, "iterations.csv", &iterations_csv(run.mountain.as_ref(), run.descent.as_ref()))?;
    if let Some(m) = &run.mountain {
        write(out_dir, "u1.csv", &field_csv(&m.solution))?;
    }
    if let Some(d) = &run.descent {
        write(out_dir, "u2.csv", &field_csv(&d.solution))?;
    }
    write(out_dir, "report.txt", &report)?;
    let (clause, detail) = match &run.verdict {
        Ok(()) => (None, None),
        Err(e) => (Some(e.clause()), Some(e.to_string())),
    };
    Ok(RunOutcome {
        certified: run.certified(),
        clause,
        detail,
        report,
    })
}

/// Geometry constants only, as the `quantity,value` table; `Err` carries
/// the failing clause and its detail.
pub fn geometry_only(spec: &ExperimentSpec) -> Result<Result<String, (&'static str, String)>, ConfigError> {
    let (prob, params, config) = spec.materialize()?;
    Ok(match geometry_stage(&prob, &params, &config) {
        Ok(st) => Ok(geometry_csv(Some(&st))),
        Err(e) => Err((e.clause(), e.to_string())),
    })
}
