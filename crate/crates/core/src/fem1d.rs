//! Piecewise-linear solver for `-(a u')' + c u = fhat` on `(0, 1)` with
//! natural boundary conditions.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::homogenize::LimitCoefficients;

/// Default number of grid nodes of the limit solver.
pub const DEFAULT_NODES: usize = 1025;

#[derive(Debug, Clone, PartialEq)]
pub struct Limit1DSolution {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
}

impl Limit1DSolution {
    /// CSV `x,u0`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,u0\n");
        for (x, u) in self.grid.iter().zip(&self.values) {
            let _ = writeln!(out, "{x:?},{u:?}");
        }
        out
    }

    /// Exact `L2(0, 1)` norm of the interpolant.
    pub fn l2_norm(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, u)| (x[1] - x[0]) / 3.0 * (u[0] * u[0] + u[0] * u[1] + u[1] * u[1]))
            .sum::<f64>()
            .sqrt()
    }
}

/// Galerkin solution with cellwise-midpoint coefficients (mean of the two
/// endpoint samples) and the interpolated right-hand side, solved by an
/// `LDL^T` sweep of the tridiagonal matrix.
pub fn solve_limit(coeffs: &LimitCoefficients) -> Result<Limit1DSolution> {
    let LimitCoefficients {
        grid,
        a_values: a,
        c_values: c,
        fhat_values: f,
    } = coeffs;
    let n = grid.len();
    if n < 3 {
        return Err(Error::Precondition("limit solver needs at least 3 grid points".into()));
    }
    if a.len() != n || c.len() != n || f.len() != n {
        return Err(Error::Precondition("coefficient samples do not match the grid".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Precondition("grid must be strictly increasing".into()));
    }
    if let Some(i) = (0..n).find(|&i| !(a[i] > 0.0) || !(c[i] > 0.0)) {
        return Err(Error::Precondition(format!(
            "coefficients must be positive (a = {}, c = {} at x = {})",
            a[i], c[i], grid[i]
        )));
    }

    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n - 1];
    let mut rhs = vec![0.0; n];
    for k in 0..n - 1 {
        let h = grid[k + 1] - grid[k];
        let am = 0.5 * (a[k] + a[k + 1]);
        let cm = 0.5 * (c[k] + c[k + 1]);
        let stiff = am / h;
        let mass = cm * h / 6.0;
        diag[k] += stiff + 2.0 * mass;
        diag[k + 1] += stiff + 2.0 * mass;
        off[k] = -stiff + mass;
        rhs[k] += h / 6.0 * (2.0 * f[k] + f[k + 1]);
        rhs[k + 1] += h / 6.0 * (f[k] + 2.0 * f[k + 1]);
    }

    // A = L D L^T, L unit lower bidiagonal with subdiagonal l
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n - 1];
    d[0] = diag[0];
    for k in 1..n {
        if !(d[k - 1] > 0.0) {
            return Err(Error::Numeric(format!("singular limit system at row {}", k - 1)));
        }
        l[k - 1] = off[k - 1] / d[k - 1];
        d[k] = diag[k] - l[k - 1] * off[k - 1];
    }
    if !(d[n - 1] > 0.0) {
        return Err(Error::Numeric("singular limit system at the last row".into()));
    }
    let mut y = rhs;
    for k in 1..n {
        y[k] -= l[k - 1] * y[k - 1];
    }
    for k in 0..n {
        y[k] /= d[k];
    }
    for k in (0..n - 1).rev() {
        y[k] -= l[k] * y[k + 1];
    }
    Ok(Limit1DSolution {
        grid: grid.clone(),
        values: y,
    })
}

/// Piecewise-linear interpolation of the solution.
pub fn evaluate(sol: &Limit1DSolution, x: f64) -> Result<f64> {
    let g = &sol.grid;
    if !(x >= g[0] && x <= g[g.len() - 1]) {
        return Err(Error::Domain(format!("x = {x} outside [{}, {}]", g[0], g[g.len() - 1])));
    }
    let k = g.partition_point(|&p| p <= x).clamp(1, g.len() - 1);
    let (x0, x1) = (g[k - 1], g[k]);
    let t = (x - x0) / (x1 - x0);
    Ok(if t == 0.0 {
        sol.values[k - 1]
    } else if t == 1.0 {
        sol.values[k]
    } else {
        (1.0 - t) * sol.values[k - 1] + t * sol.values[k]
    })
}
