use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{anyhow, bail, Result};
use thinfem::cell::{cell_energy, decay_csv, decay_profile, energy_csv, fourier_solution, trace_energy, EnergyRow};
use thinfem::experiments::{
    emit_report, limit_solution, run_study_type1, run_study_type2, ReportFormat, REPORT_CSV_NAME,
};
use thinfem::fem2d::{assemble, eigen_first, solve, Aniso};
use thinfem::homogenize::{coeffs_type1, coeffs_type2, fhat_limit_for_x_only_f, uniform_grid, LimitCoefficients};
use thinfem::mesh::{mesh_cell, mesh_type1, mesh_type2};

use crate::config::{Domain, Format, Resolved};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Solve2d,
    Solve1d,
    Homogenize,
    Cell,
    Eigen,
    Converge,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Solve2d => "solve2d",
            Kind::Solve1d => "solve1d",
            Kind::Homogenize => "homogenize",
            Kind::Cell => "cell",
            Kind::Eigen => "eigen",
            Kind::Converge => "converge",
        }
    }
}

/// Prefixes a library error with the module it came from.
fn m<T>(module: &str, r: thinfem::Result<T>) -> Result<T> {
    r.map_err(|e| anyhow!("{module}: {e}"))
}

struct Output {
    dir: PathBuf,
    gnuplot: bool,
}

impl Output {
    fn new(run: &Resolved) -> Result<Self> {
        let dir = PathBuf::from(&run.config.output.directory);
        fs::create_dir_all(&dir).map_err(|e| anyhow!("io: cannot create {}: {e}", dir.display()))?;
        Ok(Output {
            dir,
            gnuplot: run.config.output.format == Format::Gnuplot,
        })
    }

    /// Writes next to the target, then renames over it.
    fn write(&self, name: &str, content: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let tmp = self.dir.join(format!(".{name}.tmp"));
        fs::write(&tmp, content).map_err(|e| anyhow!("io: cannot write {}: {e}", tmp.display()))?;
        fs::rename(&tmp, &path).map_err(|e| anyhow!("io: cannot rename to {}: {e}", path.display()))?;
        Ok(path)
    }

    /// Writes `csv` and, for gnuplot output, a script plotting columns `x:y`.
    fn table(&self, name: &str, csv: &str, plot: &str) -> Result<Vec<PathBuf>> {
        let mut written = vec![self.write(name, csv)?];
        if self.gnuplot {
            let stem = name.trim_end_matches(".csv");
            let script = format!("set datafile separator ','\n{plot}\n");
            written.push(self.write(&format!("{stem}.gp"), &script)?);
        }
        Ok(written)
    }
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn limit_coefficients(run: &Resolved) -> Result<LimitCoefficients> {
    let grid = uniform_grid(run.params.limit_nodes);
    match &run.domain {
        Domain::Graph(s) => m("homogenize", coeffs_type1(s, &grid)),
        Domain::Comb(s) => m("homogenize", coeffs_type2(s, &grid)),
    }
}

pub fn dispatch(kind: Kind, run: &Resolved) -> Result<()> {
    let out = Output::new(run)?;
    let log = format!("command = \"{}\"\n\n{}", kind.name(), run.config.echo());
    out.write("run.log", &log)?;
    match kind {
        Kind::Solve2d => solve2d(run, &out),
        Kind::Solve1d => {
            let sol = m("fem1d", limit_solution(limit_coefficients(run)?, &run.source))?;
            report(&out.table(
                "u0.csv",
                &sol.to_csv(),
                "plot 'u0.csv' using 1:2 skip 1 with lines title 'u0'",
            )?);
            Ok(())
        }
        Kind::Homogenize => {
            let c = limit_coefficients(run)?;
            let fhat = fhat_limit_for_x_only_f(&|x| run.source.eval(x), &c);
            let c = m("homogenize", c.with_fhat(fhat))?;
            let plot = "plot 'coefficients.csv' using 1:2 skip 1 with lines title 'a', \\\n     '' using 1:3 skip 1 with lines title 'c'";
            report(&out.table("coefficients.csv", &c.to_csv(), plot)?);
            Ok(())
        }
        Kind::Cell => cell(run, &out),
        Kind::Eigen => {
            let Domain::Comb(spec) = &run.domain else {
                bail!("cli: eigen needs a comb domain (domain.type = \"comb\")");
            };
            let mesh = m("mesh", mesh_cell(spec, run.params.cell_h))?;
            let (e1, _) = m("fem2d", eigen_first(Arc::new(mesh), Aniso::ISOTROPIC))?;
            println!("{e1:?}");
            Ok(())
        }
        Kind::Converge => {
            let r = match &run.domain {
                Domain::Graph(s) => run_study_type1(s, &run.source, &run.ladder, &run.params),
                Domain::Comb(s) => run_study_type2(s, &run.source, &run.ladder, &run.params),
            };
            let r = m("experiments", r)?;
            let mut written = vec![
                out.write(REPORT_CSV_NAME, &m("experiments", emit_report(&r, ReportFormat::Csv))?)?,
                out.write("convergence.meta", &r.metadata())?,
            ];
            if out.gnuplot {
                written.push(out.write(
                    "convergence.gp",
                    &m("experiments", emit_report(&r, ReportFormat::Gnuplot))?,
                )?);
            }
            report(&written);
            Ok(())
        }
    }
}

fn solve2d(run: &Resolved, out: &Output) -> Result<()> {
    let eps = run.config.study.epsilon;
    let mesh = match &run.domain {
        Domain::Graph(s) => m("mesh", mesh_type1(s, eps, &run.params.mesh))?,
        Domain::Comb(s) => m(
            "mesh",
            mesh_type2(s, eps, run.params.comb_h, run.params.mesh.triangle_cap),
        )?,
    };
    let mesh = Arc::new(mesh);
    let f = &run.source;
    let sys = m("fem2d", assemble(mesh.clone(), &|x, _| f.eval(x), Aniso::rescaled(eps)))?;
    let (u, stats) = m("fem2d", solve(&sys, run.params.tol, run.params.max_iter))?;
    let plot = "splot 'field.csv' using 2:3:4 skip 1 with points pointtype 7 pointsize 0.3 palette title 'u'";
    let mut written = out.table("field.csv", &u.to_csv(), plot)?;
    written.push(out.write("mesh.txt", &mesh.to_text())?);
    report(&written);
    println!(
        "dofs {}, iterations {}, residual {:e}",
        sys.dofs(),
        stats.iterations,
        stats.residual
    );
    Ok(())
}

fn cell(run: &Resolved, out: &Output) -> Result<()> {
    let alpha = run.domain.alpha();
    let modes = run.config.cell.modes;
    let trace = &run.trace;
    let solve_at = |eps: f64| {
        let a = eps.powf(alpha);
        let u0 = move |x: f64| trace.eval(x / a);
        m("cell", fourier_solution(&u0, eps, alpha, modes)).map(|s| (s, a))
    };

    let n = run.config.cell.samples;
    let ys: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
    let (sol, _) = solve_at(run.config.study.epsilon)?;
    let decay = decay_csv(&ys, &decay_profile(&sol, &ys));
    let mut written = out.table(
        "decay.csv",
        &decay,
        "set logscale y\nplot 'decay.csv' using 1:2 skip 1 with lines title 'decay'",
    )?;

    let mut rows = Vec::with_capacity(run.ladder.len());
    for &eps in &run.ladder {
        let (sol, a) = solve_at(eps)?;
        let u0 = |x: f64| trace.eval(x / a);
        rows.push(EnergyRow {
            eps,
            energy: cell_energy(&sol),
            trace_energy: trace_energy(&u0, a),
        });
    }
    let plot = "set logscale xy\nplot 'energy.csv' using 1:4 skip 1 with linespoints title 'energy / trace energy'";
    written.extend(out.table("energy.csv", &energy_csv(&rows), plot)?);
    report(&written);
    Ok(())
}
