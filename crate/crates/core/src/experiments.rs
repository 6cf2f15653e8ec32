//! Epsilon sweeps comparing the 2D solution with its 1D limit.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::combgeom::CombSpec;
use crate::error::{Error, Result};
use crate::fem1d::{evaluate, solve_limit, Limit1DSolution, DEFAULT_NODES};
use crate::fem2d::{
    assemble, eigen_first, l2_distance_to_1d, norms, solve, Aniso, Field, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::geometry::{ProfileSpec, ScalarFunction1D};
use crate::homogenize::{coeffs_type1, coeffs_type2, fhat_limit_for_x_only_f, uniform_grid, LimitCoefficients};
use crate::mesh::{mesh_cell, mesh_type1, mesh_type2, Mesh, MeshParams};

/// Smallest admissible first mixed eigenvalue of the reference cell.
pub const HQ_THRESHOLD: f64 = 1e-6;

/// Right-hand side `f(x1)`; independent of `x2`, so the limit datum is `c f`.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Constant(f64),
    Function(ScalarFunction1D),
    /// `amplitude * cos(waves * pi * x1)`.
    Cosine {
        amplitude: f64,
        waves: f64,
    },
}

impl Source {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Source::Constant(c) => *c,
            Source::Function(f) => f.eval(x),
            Source::Cosine { amplitude, waves } => amplitude * (waves * std::f64::consts::PI * x).cos(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Graph,
    Comb,
}

impl DomainKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DomainKind::Graph => "graph",
            DomainKind::Comb => "comb",
        }
    }
}

/// Resolution and solver settings of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyParams {
    pub mesh: MeshParams,
    /// Comb mesh spacing in reference-cell units.
    pub comb_h: f64,
    /// Reference-cell mesh spacing for the eigenvalue check.
    pub cell_h: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub limit_nodes: usize,
}

impl Default for StudyParams {
    fn default() -> Self {
        StudyParams {
            mesh: MeshParams::default(),
            comb_h: 1.0 / 16.0,
            cell_h: 1.0 / 32.0,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            limit_nodes: DEFAULT_NODES,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub eps: f64,
    pub dofs: usize,
    pub triangles: usize,
    /// `||u^eps - u0||` over `Omega^eps`.
    pub l2_error: f64,
    /// `||u0||` over `Omega^eps`.
    pub u0_norm: f64,
    pub l2_norm: f64,
    pub dx1: f64,
    pub dx2_over_eps: f64,
    pub iterations: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub domain: DomainKind,
    pub spec_hash: String,
    pub resolution: String,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn metadata(&self) -> String {
        format!(
            "domain = {}\nspec_hash = {}\nresolution = {}\nrows = {}\n",
            self.domain.as_str(),
            self.spec_hash,
            self.resolution,
            self.rows.len()
        )
    }
}

fn hash_of(parts: &[String]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0u8]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn check_ladder(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::Config("epsilon list is empty".into()));
    }
    if eps_list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(Error::Config("epsilons must lie in (0, 1)".into()));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config("epsilons must be strictly decreasing".into()));
    }
    Ok(())
}

/// Default ladder for a given `alpha`: `{0.2, 0.1, 0.05}`, stopping at
/// `0.1` for `alpha >= 2`.
pub fn epsilon_preset(alpha: f64) -> Vec<f64> {
    if alpha >= 2.0 {
        vec![0.2, 0.1]
    } else {
        vec![0.2, 0.1, 0.05]
    }
}

/// Solves the limit problem for coefficients `coeffs` and source `f`.
pub fn limit_solution(coeffs: LimitCoefficients, f: &Source) -> Result<Limit1DSolution> {
    let fhat = fhat_limit_for_x_only_f(&|x| f.eval(x), &coeffs);
    solve_limit(&coeffs.with_fhat(fhat)?)
}

fn study_row(mesh: Mesh, eps: f64, f: &Source, u0: &Limit1DSolution, params: &StudyParams) -> Result<ConvergenceRow> {
    let start = Instant::now();
    let mesh = Arc::new(mesh);
    let sys = assemble(mesh.clone(), &|x, _| f.eval(x), Aniso::rescaled(eps))?;
    let (u, stats) = solve(&sys, params.tol, params.max_iter)?;
    let n = norms(&u, eps);
    let u0_at = |x: f64| evaluate(u0, x.clamp(0.0, 1.0)).unwrap_or(f64::NAN);
    let l2_error = l2_distance_to_1d(&u, &u0_at);
    let zero = Field::new(mesh.clone(), vec![0.0; mesh.nodes.len()])?;
    let u0_norm = l2_distance_to_1d(&zero, &u0_at);
    Ok(ConvergenceRow {
        eps,
        dofs: sys.dofs(),
        triangles: mesh.triangles.len(),
        l2_error,
        u0_norm,
        l2_norm: n.l2,
        dx1: n.dx1,
        dx2_over_eps: n.dx2_over_eps,
        iterations: stats.iterations,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn tag(eps: f64) -> impl Fn(Error) -> Error {
    move |e| Error::Study {
        eps,
        source: Box::new(e),
    }
}

/// Sweep on a graph-bounded domain: `||u^eps - u0||` for each `eps`.
pub fn run_study_type1(
    spec: &ProfileSpec,
    f: &Source,
    eps_list: &[f64],
    params: &StudyParams,
) -> Result<ConvergenceReport> {
    check_ladder(eps_list)?;
    let grid = uniform_grid(params.limit_nodes);
    let u0 = limit_solution(coeffs_type1(spec, &grid)?, f)?;
    let rows = eps_list
        .par_iter()
        .map(|&eps| {
            let mesh = mesh_type1(spec, eps, &params.mesh).map_err(tag(eps))?;
            study_row(mesh, eps, f, &u0, params).map_err(tag(eps))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport {
        domain: DomainKind::Graph,
        spec_hash: hash_of(&[format!("{spec:?}"), format!("{f:?}"), format!("{eps_list:?}")]),
        resolution: format!(
            "cells_per_period = {}, ny = {}, limit_nodes = {}, tol = {:e}",
            params.mesh.cells_per_period, params.mesh.ny, params.limit_nodes, params.tol
        ),
        rows,
    })
}

/// First mixed eigenvalue of the cell mesh; fails unless it exceeds
/// [`HQ_THRESHOLD`].
pub fn check_hq(cell_mesh: Arc<Mesh>) -> Result<f64> {
    let (e1, _) = eigen_first(cell_mesh, Aniso::ISOTROPIC)?;
    if e1 > HQ_THRESHOLD {
        Ok(e1)
    } else {
        Err(Error::Precondition(format!("hypothesis HQ violated (e1 = {e1:e})")))
    }
}

/// Sweep on a comb-like domain, after checking the cell eigenvalue.
pub fn run_study_type2(
    spec: &CombSpec,
    f: &Source,
    eps_list: &[f64],
    params: &StudyParams,
) -> Result<ConvergenceReport> {
    check_ladder(eps_list)?;
    check_hq(Arc::new(mesh_cell(spec, params.cell_h)?))?;
    let grid = uniform_grid(params.limit_nodes);
    let u0 = limit_solution(coeffs_type2(spec, &grid)?, f)?;
    let rows = eps_list
        .par_iter()
        .map(|&eps| {
            let mesh = mesh_type2(spec, eps, params.comb_h, params.mesh.triangle_cap).map_err(tag(eps))?;
            study_row(mesh, eps, f, &u0, params).map_err(tag(eps))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceReport {
        domain: DomainKind::Comb,
        spec_hash: hash_of(&[format!("{spec:?}"), format!("{f:?}"), format!("{eps_list:?}")]),
        resolution: format!(
            "h = {}, cell_h = {}, limit_nodes = {}, tol = {:e}",
            params.comb_h, params.cell_h, params.limit_nodes, params.tol
        ),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Gnuplot,
}

pub const REPORT_CSV_NAME: &str = "convergence.csv";
pub const REPORT_HEADER: &str = "epsilon,dofs,triangles,l2_error,dx2_over_eps,iterations,wall_time";

/// CSV table or a gnuplot script plotting [`REPORT_CSV_NAME`].
pub fn emit_report(r: &ConvergenceReport, format: ReportFormat) -> Result<String> {
    if r.rows.is_empty() {
        return Err(Error::Config("cannot emit an empty report".into()));
    }
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(REPORT_HEADER);
            out.push('\n');
            for row in &r.rows {
                let _ = writeln!(
                    out,
                    "{:?},{},{},{:?},{:?},{},{:?}",
                    row.eps, row.dofs, row.triangles, row.l2_error, row.dx2_over_eps, row.iterations, row.wall_time
                );
            }
        }
        ReportFormat::Gnuplot => {
            let _ = writeln!(out, "# {} domain, spec {}", r.domain.as_str(), r.spec_hash);
            out.push_str("set datafile separator ','\n");
            out.push_str("set logscale x\nset logscale y\n");
            out.push_str("set xlabel 'epsilon'\nset key left top\n");
            let _ = writeln!(
                out,
                "plot '{REPORT_CSV_NAME}' using 1:4 skip 1 with linespoints title 'l2_error', \\\n     '{REPORT_CSV_NAME}' using 1:5 skip 1 with linespoints title 'dx2_over_eps'"
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combgeom::Rect;
    use crate::geometry::Waveform;

    fn benchmark() -> ProfileSpec {
        ProfileSpec::new(
            ScalarFunction1D::constant(1.0),
            Waveform::Cosine,
            ScalarFunction1D::constant(0.0),
            ScalarFunction1D::constant(2.0),
            ScalarFunction1D::constant(1.0),
            1.5,
        )
        .unwrap()
    }

    fn light() -> StudyParams {
        StudyParams {
            mesh: MeshParams {
                cells_per_period: 4,
                ny: 4,
                ..MeshParams::default()
            },
            comb_h: 0.25,
            cell_h: 0.125,
            limit_nodes: 257,
            ..StudyParams::default()
        }
    }

    #[test]
    fn zero_source_gives_zero_errors() {
        let r = run_study_type1(&benchmark(), &Source::Constant(0.0), &[0.3, 0.2], &light()).unwrap();
        assert!(r.rows.iter().all(|row| row.l2_error == 0.0 && row.u0_norm == 0.0));
        let comb = CombSpec::new(
            ScalarFunction1D::constant(1.0),
            1.0,
            1.0,
            vec![Rect::new(0.25, 0.75, 0.0, 1.0)],
            1.5,
        )
        .unwrap();
        let r = run_study_type2(&comb, &Source::Constant(0.0), &[0.3, 0.2], &light()).unwrap();
        assert!(r.rows.iter().all(|row| row.l2_error == 0.0));
        assert_eq!(r.domain, DomainKind::Comb);
    }

    #[test]
    fn non_oscillating_profile_is_close_at_coarse_eps() {
        let spec = ProfileSpec::new(
            ScalarFunction1D::constant(1.0),
            Waveform::Sine,
            ScalarFunction1D::poly(vec![0.5, 0.5]).unwrap(),
            ScalarFunction1D::constant(0.0),
            ScalarFunction1D::constant(1.0),
            1.5,
        )
        .unwrap();
        let f = Source::Cosine {
            amplitude: 1.0,
            waves: 1.0,
        };
        let params = StudyParams {
            mesh: MeshParams {
                cells_per_period: 64,
                ny: 8,
                ..MeshParams::default()
            },
            ..StudyParams::default()
        };
        let r = run_study_type1(&spec, &f, &[0.2], &params).unwrap();
        let row = &r.rows[0];
        assert!(row.l2_error < 0.05 * row.u0_norm, "{row:?}");
    }

    #[test]
    fn hq_guard_rejects_cells_without_gamma0() {
        let mesh = Arc::new(crate::mesh::mesh_rectangle(1.0, 1.0, 4, 4, &[]).unwrap());
        match check_hq(mesh) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("hypothesis HQ violated")),
            other => panic!("{other:?}"),
        }
        let floating = CombSpec::new(
            ScalarFunction1D::constant(1.0),
            1.0,
            1.0,
            vec![Rect::new(0.25, 0.75, 0.5, 1.0)],
            1.5,
        );
        if let Ok(spec) = floating {
            assert!(matches!(
                run_study_type2(&spec, &Source::Constant(1.0), &[0.2], &light()),
                Err(Error::Precondition(_))
            ));
        }
    }

    #[test]
    fn ladder_validation_and_presets() {
        let spec = benchmark();
        assert!(run_study_type1(&spec, &Source::Constant(1.0), &[], &light()).is_err());
        assert!(run_study_type1(&spec, &Source::Constant(1.0), &[0.1, 0.2], &light()).is_err());
        assert_eq!(epsilon_preset(1.25), vec![0.2, 0.1, 0.05]);
        assert_eq!(epsilon_preset(2.0), vec![0.2, 0.1]);
    }

    #[test]
    fn mesh_cap_failure_names_epsilon() {
        let params = StudyParams {
            mesh: MeshParams {
                triangle_cap: 500,
                ..MeshParams::default()
            },
            ..light()
        };
        let err = run_study_type1(&benchmark(), &Source::Constant(1.0), &[0.2, 0.05], &params).unwrap_err();
        assert!(matches!(err, Error::Study { .. }));
        assert!(err.to_string().contains("epsilon = 0.05") || err.to_string().contains("epsilon = 0.2"));
    }

    #[test]
    fn report_formats() {
        let r = run_study_type1(
            &benchmark(),
            &Source::Cosine {
                amplitude: 1.0,
                waves: 1.0,
            },
            &[0.3],
            &light(),
        )
        .unwrap();
        let csv = emit_report(&r, ReportFormat::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], REPORT_HEADER);
        assert_eq!(lines[1].split(',').count(), 7);
        assert_eq!(emit_report(&r, ReportFormat::Csv).unwrap(), csv);
        let gp = emit_report(&r, ReportFormat::Gnuplot).unwrap();
        assert!(gp.contains("set logscale x") && gp.contains(REPORT_CSV_NAME));
        let empty = ConvergenceReport {
            rows: vec![],
            ..r.clone()
        };
        assert!(emit_report(&empty, ReportFormat::Csv).is_err());
        assert_eq!(r.spec_hash.len(), 64);
    }

    #[test]
    fn reruns_are_deterministic_apart_from_timing() {
        let f = Source::Cosine {
            amplitude: 1.0,
            waves: 1.0,
        };
        let strip = |r: &ConvergenceReport| {
            emit_report(r, ReportFormat::Csv)
                .unwrap()
                .lines()
                .map(|l| l.rsplit_once(',').unwrap().0.to_string())
                .collect::<Vec<_>>()
        };
        let a = run_study_type1(&benchmark(), &f, &[0.3, 0.2], &light()).unwrap();
        let b = run_study_type1(&benchmark(), &f, &[0.3, 0.2], &light()).unwrap();
        assert_eq!(strip(&a), strip(&b));
        assert_eq!(a.metadata(), b.metadata());
    }
}
