//! Closed-form coefficients of the one-dimensional limit problems.

use std::fmt::Write as _;

use crate::combgeom::{cell_area, tooth_layout, CombSpec, Tooth};
use crate::error::{Error, Result};
use crate::geometry::{average_periodic, cell_average, min_over_period, minimize_periodic, ProfileSpec};
use crate::quadrature;

/// Tolerance on `min G = 0` for the periodic effective diffusion.
const ZERO_MIN_TOL: f64 = 1e-10;

/// Samples of the limit problem `-(a u')' + c u = fhat` on `grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCoefficients {
    pub grid: Vec<f64>,
    pub a_values: Vec<f64>,
    pub c_values: Vec<f64>,
    pub fhat_values: Vec<f64>,
}

impl LimitCoefficients {
    pub fn with_fhat(mut self, fhat: Vec<f64>) -> Result<Self> {
        if fhat.len() != self.grid.len() {
            return Err(Error::Config(format!(
                "fhat has {} samples for a grid of {}",
                fhat.len(),
                self.grid.len()
            )));
        }
        self.fhat_values = fhat;
        Ok(self)
    }

    /// CSV `x,a,c,fhat`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,a,c,fhat\n");
        for i in 0..self.grid.len() {
            let _ = writeln!(
                out,
                "{:?},{:?},{:?},{:?}",
                self.grid[i], self.a_values[i], self.c_values[i], self.fhat_values[i]
            );
        }
        out
    }
}

/// `n` equally spaced abscissae covering `[0, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    assert!(n >= 2, "a grid needs at least two points");
    (0..n)
        .map(|i| if i + 1 == n { 1.0 } else { i as f64 / (n - 1) as f64 })
        .collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::Config("coefficient grid needs at least two points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid[0] < 0.0 || grid[grid.len() - 1] > 1.0 {
        return Err(Error::Config("coefficient grid must increase within [0, 1]".into()));
    }
    Ok(())
}

/// `a = b + G0`, `c = p = b + (1/l) ∫_0^l G`; `fhat` left at zero.
pub fn coeffs_type1(spec: &ProfileSpec, grid: &[f64]) -> Result<LimitCoefficients> {
    check_grid(grid)?;
    let mut a_values = Vec::with_capacity(grid.len());
    let mut c_values = Vec::with_capacity(grid.len());
    for &x in grid {
        let b = spec.b().eval(x);
        a_values.push(b + min_over_period(spec, x)?);
        c_values.push(b + cell_average(spec, x)?);
    }
    Ok(LimitCoefficients {
        grid: grid.to_vec(),
        a_values,
        c_values,
        fhat_values: vec![0.0; grid.len()],
    })
}

/// `a = b`, `c = q = |Q0| / L + b`; `fhat` left at zero.
pub fn coeffs_type2(spec: &CombSpec, grid: &[f64]) -> Result<LimitCoefficients> {
    check_grid(grid)?;
    let coverage = cell_area(spec) / spec.cell_width();
    let a_values: Vec<f64> = grid.iter().map(|&x| spec.b().eval(x)).collect();
    let c_values = a_values.iter().map(|b| coverage + b).collect();
    Ok(LimitCoefficients {
        grid: grid.to_vec(),
        a_values,
        c_values,
        fhat_values: vec![0.0; grid.len()],
    })
}

/// `d = L b / (L b + ∫_0^L G)` for a purely periodic profile with `min G = 0`.
pub fn effective_diffusion_periodic(b: f64, period: f64, g: &dyn Fn(f64) -> f64, kinks: &[f64]) -> Result<f64> {
    if !(b > 0.0) || !(period > 0.0) {
        return Err(Error::Precondition("b and L must be positive".into()));
    }
    let (_, min) = minimize_periodic(g, period);
    if min.abs() > ZERO_MIN_TOL {
        return Err(Error::Precondition(format!(
            "effective diffusion needs min G = 0, found {min:e}"
        )));
    }
    let integral = period * average_periodic(g, period, kinks);
    Ok(period * b / (period * b + integral))
}

/// Domain whose vertical sections define `fhat^eps`.
#[derive(Debug, Clone, Copy)]
pub enum SectionDomain<'a> {
    Graph(&'a ProfileSpec),
    Comb(&'a CombSpec),
}

fn tooth_at<'t>(spec: &CombSpec, teeth: &'t [Tooth], x: f64) -> Option<&'t Tooth> {
    let period = spec.cell_width() * teeth.first()?.scale;
    let k = (x / period).floor();
    if k < 1.0 {
        return None;
    }
    let n = k as usize;
    teeth.get(n - 1).filter(|t| t.n == n)
}

/// `fhat^eps(x) = ∫ f(x, x2) dx2` over the section of `Omega^eps` at `x`,
/// 32-point Gauss–Legendre per interval.
pub fn fhat_epsilon(
    f: &dyn Fn(f64, f64) -> f64,
    domain: SectionDomain<'_>,
    eps: f64,
    grid: &[f64],
) -> Result<Vec<f64>> {
    check_grid(grid)?;
    let rule = quadrature::gl32();
    match domain {
        SectionDomain::Graph(spec) => Ok(grid
            .iter()
            .map(|&x| rule.integrate(-spec.b().eval(x), spec.g_eps_at(eps, x), |y| f(x, y)))
            .collect()),
        SectionDomain::Comb(spec) => {
            let teeth = tooth_layout(spec, eps)?;
            Ok(grid
                .iter()
                .map(|&x| {
                    let mut v = rule.integrate(-spec.b().eval(x), 0.0, |y| f(x, y));
                    if let Some(t) = tooth_at(spec, &teeth, x) {
                        let x1 = (x - t.offset) / t.scale;
                        for r in spec.cell().iter().filter(|r| x1 > r.x_lo && x1 < r.x_hi) {
                            v += rule.integrate(r.y_lo, r.y_hi, |y| f(x, y));
                        }
                    }
                    v
                })
                .collect())
        }
    }
}

/// `fhat = c f` for sources independent of `x2`.
pub fn fhat_limit_for_x_only_f(f: &dyn Fn(f64) -> f64, coeffs: &LimitCoefficients) -> Vec<f64> {
    coeffs
        .grid
        .iter()
        .zip(&coeffs.c_values)
        .map(|(&x, c)| c * f(x))
        .collect()
}
