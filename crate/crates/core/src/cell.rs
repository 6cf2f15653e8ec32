//! Explicit boundary-layer solutions on thin rectangular cells.
//!
//! On `(-a, a) x (0, 1)` the problem `-u_xx - eps^-2 u_yy = 0`, `u = u0` on
//! `y = 0` and natural conditions elsewhere is solved by separation of
//! variables in the full Neumann cosine basis
//! `psi_k(x) = a^{-1/2} cos(k pi (x + a) / (2a))`, `k >= 1`, giving
//! `u = mean + sum_k c_k psi_k(x) cosh(beta_k (1 - y)) / cosh(beta_k)` with
//! `beta_k = kappa k pi / (2a)` and `kappa = eps`.

use std::f64::consts::{LN_2, PI};
use std::fmt::Write as _;

use crate::combgeom::Rect;
use crate::error::{Error, Result};
use crate::quadrature;

pub const DEFAULT_MODES: usize = 64;
/// Coefficients below this fraction of the trace norm are dropped.
const COEFF_DROP: f64 = 1e-12;
/// Largest coefficient quadrature (points) before a resolution error.
const MAX_QUAD_POINTS: usize = 1 << 16;
/// Gauss points per cosine oscillation of the highest mode, at least.
const POINTS_PER_OSCILLATION: usize = 8;

/// Cosine family used for the trace expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CellBasis {
    /// All Neumann modes `k >= 1` of the interval.
    #[default]
    Full,
    /// Even `k` only, i.e. `cos(n pi x / a)`; cannot represent odd traces.
    EvenOnly,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mode {
    pub k: usize,
    pub coeff: f64,
    /// `beta_k`, the decay rate in `y`.
    pub decay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierCellSolution {
    pub half_width: f64,
    pub kappa: f64,
    pub mean: f64,
    pub modes: Vec<Mode>,
    pub n_modes: usize,
    pub trace_norm: f64,
}

/// `ln cosh z` without overflow.
fn ln_cosh(z: f64) -> f64 {
    let z = z.abs();
    z + (-2.0 * z).exp().ln_1p() - LN_2
}

impl FourierCellSolution {
    pub fn basis(&self, k: usize, x: f64) -> f64 {
        let a = self.half_width;
        (k as f64 * PI * (x + a) / (2.0 * a)).cos() / a.sqrt()
    }

    /// `cosh(beta (1 - y)) / cosh(beta)`.
    pub fn vertical_factor(decay: f64, y: f64) -> f64 {
        (ln_cosh(decay * (1.0 - y)) - ln_cosh(decay)).exp()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.mean
            + self
                .modes
                .iter()
                .map(|m| m.coeff * self.basis(m.k, x) * Self::vertical_factor(m.decay, y))
                .sum::<f64>()
    }
}

/// `(1 / 2a) ∫_{-a}^{a} u0`.
pub fn trace_average(u0: &dyn Fn(f64) -> f64, half_width: f64) -> f64 {
    quadrature::adaptive_doubling(-half_width, half_width, 16, 1 << 16, 1e-12, u0) / (2.0 * half_width)
}

/// `∫_{-a}^{a} |u0'|^2` with central differences at Gauss points.
pub fn trace_energy(u0: &dyn Fn(f64) -> f64, half_width: f64) -> f64 {
    let h = 1e-5 * half_width;
    quadrature::composite(quadrature::gl8(), -half_width, half_width, 64, |x| {
        ((u0(x + h) - u0(x - h)) / (2.0 * h)).powi(2)
    })
}

/// Series solution on `(-eps^alpha, eps^alpha) x (0, 1)`.
pub fn fourier_solution(u0: &dyn Fn(f64) -> f64, eps: f64, alpha: f64, n_modes: usize) -> Result<FourierCellSolution> {
    if !(eps > 0.0) || !(alpha > 1.0) {
        return Err(Error::Domain(format!(
            "need eps > 0 and alpha > 1, got eps = {eps}, alpha = {alpha}"
        )));
    }
    fourier_solution_on(u0, eps.powf(alpha), eps, n_modes, CellBasis::Full)
}

/// Series solution on `(-half_width, half_width) x (0, 1)` for the operator
/// `-u_xx - kappa^-2 u_yy`.
pub fn fourier_solution_on(
    u0: &dyn Fn(f64) -> f64,
    half_width: f64,
    kappa: f64,
    n_modes: usize,
    basis: CellBasis,
) -> Result<FourierCellSolution> {
    if !(half_width > 0.0) || !(kappa > 0.0) {
        return Err(Error::Domain("cell half-width and kappa must be positive".into()));
    }
    if n_modes == 0 {
        return Err(Error::Config("n_modes must be at least 1".into()));
    }
    // mode N spans N/2 oscillations; 8-point panels
    let panels = (n_modes * POINTS_PER_OSCILLATION / 16).max(16);
    if panels * 8 > MAX_QUAD_POINTS {
        return Err(Error::Resolution(format!(
            "{n_modes} modes need {} quadrature points (limit {MAX_QUAD_POINTS})",
            panels * 8
        )));
    }
    let a = half_width;
    let mean = trace_average(u0, a);
    let rule = quadrature::gl8();
    let width = 2.0 * a / panels as f64;
    let mut points = Vec::with_capacity(panels * 8);
    for p in 0..panels {
        let lo = -a + p as f64 * width;
        points.extend(rule.mapped(lo, lo + width));
    }
    let samples: Vec<(f64, f64, f64)> = points.iter().map(|&(x, w)| (x, w, u0(x))).collect();
    let trace_norm = samples.iter().map(|(_, w, u)| w * u * u).sum::<f64>().sqrt();

    let mut sol = FourierCellSolution {
        half_width: a,
        kappa,
        mean,
        modes: Vec::new(),
        n_modes,
        trace_norm,
    };
    for k in 1..=n_modes {
        if basis == CellBasis::EvenOnly && k % 2 == 1 {
            continue;
        }
        let coeff: f64 = samples.iter().map(|&(x, w, u)| w * (u - mean) * sol.basis(k, x)).sum();
        if coeff.abs() > COEFF_DROP * trace_norm {
            sol.modes.push(Mode {
                k,
                coeff,
                decay: kappa * k as f64 * PI / (2.0 * a),
            });
        }
    }
    Ok(sol)
}

/// `∫_{-a}^{a} |u(x, y) - mean|^2 dx` for each `y`.
pub fn decay_profile(sol: &FourierCellSolution, ys: &[f64]) -> Vec<f64> {
    ys.iter()
        .map(|&y| {
            sol.modes
                .iter()
                .map(|m| (m.coeff * FourierCellSolution::vertical_factor(m.decay, y)).powi(2))
                .sum()
        })
        .collect()
}

/// `∫∫ |u_x|^2 + kappa^-2 |u_y|^2` of the truncated series.
pub fn cell_energy(sol: &FourierCellSolution) -> f64 {
    sol.modes
        .iter()
        .map(|m| {
            let mu = (m.k as f64 * PI / (2.0 * sol.half_width)).powi(2);
            m.coeff * m.coeff * mu * m.decay.tanh() / m.decay
        })
        .sum()
}

/// Boundary-layer test function on a rectangle, equal to `phi` on its base.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionX {
    pub rect: Rect,
    pub eps: f64,
    pub solution: FourierCellSolution,
}

impl TestFunctionX {
    fn center(&self) -> f64 {
        0.5 * (self.rect.x_lo + self.rect.x_hi)
    }

    fn height(&self) -> f64 {
        self.rect.y_hi - self.rect.y_lo
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        self.solution
            .eval(x1 - self.center(), (x2 - self.rect.y_lo) / self.height())
    }

    /// `∫∫_rect |X_1|^2 + eps^-2 |X_2|^2`.
    pub fn energy(&self) -> f64 {
        self.height() * cell_energy(&self.solution)
    }
}

/// Solves `-X_11 - eps^-2 X_22 = 0` on `rect`, `X = phi` on the base and
/// natural conditions on the other sides, by rescaling to a unit-height cell.
pub fn build_test_function_x(phi: &dyn Fn(f64) -> f64, rect: Rect, eps: f64, n_modes: usize) -> Result<TestFunctionX> {
    let width = rect.x_hi - rect.x_lo;
    let height = rect.y_hi - rect.y_lo;
    if !(width > 0.0) || !(height > 0.0) {
        return Err(Error::Domain(format!("degenerate rectangle {rect:?}")));
    }
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    let center = 0.5 * (rect.x_lo + rect.x_hi);
    let trace = |x: f64| phi(x + center);
    let solution = fourier_solution_on(&trace, 0.5 * width, eps * height, n_modes, CellBasis::Full)?;
    Ok(TestFunctionX { rect, eps, solution })
}

/// CSV `y,decay`.
pub fn decay_csv(ys: &[f64], values: &[f64]) -> String {
    let mut out = String::from("y,decay\n");
    for (y, v) in ys.iter().zip(values) {
        let _ = writeln!(out, "{y:?},{v:?}");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRow {
    pub eps: f64,
    pub energy: f64,
    pub trace_energy: f64,
}

/// CSV `epsilon,energy,trace_energy,ratio`.
pub fn energy_csv(rows: &[EnergyRow]) -> String {
    let mut out = String::from("epsilon,energy,trace_energy,ratio\n");
    for r in rows {
        let ratio = if r.trace_energy > 0.0 {
            r.energy / r.trace_energy
        } else {
            0.0
        };
        let _ = writeln!(out, "{:?},{:?},{:?},{:?}", r.eps, r.energy, r.trace_energy, ratio);
    }
    out
}

/// Least-squares slope of `ln v` against `t`.
pub fn log_slope(t: &[f64], v: &[f64]) -> f64 {
    let n = t.len() as f64;
    let ly: Vec<f64> = v.iter().map(|v| v.ln()).collect();
    let mt = t.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = t.iter().zip(&ly).map(|(t, y)| (t - mt) * (y - my)).sum();
    let den: f64 = t.iter().map(|t| (t - mt).powi(2)).sum();
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn trace_average_examples() {
        let a = 0.3;
        assert_relative_eq!(trace_average(&|_| 2.5, a), 2.5, epsilon = 1e-14);
        assert!(trace_average(&|x| x, a).abs() < 1e-15);
        assert_relative_eq!(trace_average(&|x| x * x, a), a * a / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn constant_trace_gives_constant_solution() {
        let sol = fourier_solution(&|_| 1.7, 0.2, 1.5, DEFAULT_MODES).unwrap();
        assert!(sol.modes.is_empty());
        assert_eq!(sol.eval(0.01, 0.3), 1.7);
        assert!(decay_profile(&sol, &[0.0, 0.5]).iter().all(|&d| d == 0.0));
        assert_eq!(cell_energy(&sol), 0.0);
    }

    #[test]
    fn single_cosine_trace_keeps_one_mode() {
        let (eps, alpha) = (0.2f64, 1.5);
        let a = eps.powf(alpha);
        let u0 = |x: f64| (PI * x / a).cos();
        let sol = fourier_solution(&u0, eps, alpha, DEFAULT_MODES).unwrap();
        let big: Vec<_> = sol.modes.iter().filter(|m| m.coeff.abs() > 1e-9).collect();
        assert_eq!(big.len(), 1);
        assert_eq!(big[0].k, 2);
        assert_relative_eq!(big[0].decay, PI / eps.powf(alpha - 1.0), max_relative = 1e-14);
        for i in 0..=20 {
            let x = -a + 2.0 * a * i as f64 / 20.0;
            assert!((sol.eval(x, 0.0) - u0(x)).abs() < 1e-10);
        }
    }

    #[test]
    fn parseval_at_the_base() {
        let (eps, alpha) = (0.1f64, 1.5);
        let a = eps.powf(alpha);
        let u0 = |x: f64| (3.0 * x / a).sin() + 0.3 * (x / a).powi(2);
        let sol = fourier_solution(&u0, eps, alpha, DEFAULT_MODES).unwrap();
        let mean = sol.mean;
        let direct = quadrature::composite(quadrature::gl8(), -a, a, 64, |x| (u0(x) - mean).powi(2));
        // odd part converges like k^-2: truncation after 64 modes leaves ~1e-5
        assert_relative_eq!(decay_profile(&sol, &[0.0])[0], direct, max_relative = 1e-5);
    }

    #[test]
    fn decay_log_slope_for_single_mode() {
        let (eps, alpha) = (0.1f64, 2.0);
        let a = eps.powf(alpha);
        let sol = fourier_solution(&|x| (PI * x / a).cos(), eps, alpha, DEFAULT_MODES).unwrap();
        let ys: Vec<f64> = (0..=40).map(|i| 0.1 + 0.4 * i as f64 / 40.0).collect();
        let slope = log_slope(&ys, &decay_profile(&sol, &ys));
        let expected = -2.0 * PI / eps.powf(alpha - 1.0);
        assert!(((slope - expected) / expected).abs() < 0.1, "{slope} vs {expected}");
    }

    #[test]
    fn energy_scales_like_eps_power() {
        let alpha = 1.5;
        let eps = [0.2f64, 0.1, 0.05];
        let ratios: Vec<f64> = eps
            .iter()
            .map(|&e| {
                let a = e.powf(alpha);
                let u0 = move |x: f64| (PI * x / a).cos();
                let sol = fourier_solution(&u0, e, alpha, DEFAULT_MODES).unwrap();
                cell_energy(&sol) / trace_energy(&u0, a)
            })
            .collect();
        let ln_eps: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
        let slope = log_slope(&ln_eps, &ratios);
        assert!((slope - 0.5).abs() < 0.075, "{slope}");
    }

    #[test]
    fn even_basis_misses_odd_traces() {
        let a = 0.2f64.powf(1.5);
        let odd = |x: f64| (PI * x / (2.0 * a)).sin();
        let even = fourier_solution_on(&odd, a, 0.2, DEFAULT_MODES, CellBasis::EvenOnly).unwrap();
        assert!(even.modes.is_empty());
        let full = fourier_solution_on(&odd, a, 0.2, DEFAULT_MODES, CellBasis::Full).unwrap();
        assert!(full.modes.iter().all(|m| m.k % 2 == 1));
        assert!((full.eval(0.3 * a, 0.0) - odd(0.3 * a)).abs() < 1e-3);
    }

    #[test]
    fn too_many_modes_is_a_resolution_error() {
        assert!(matches!(
            fourier_solution(&|x| x, 0.2, 1.5, 20_000),
            Err(Error::Resolution(_))
        ));
        assert!(matches!(fourier_solution(&|x| x, 0.2, 1.5, 0), Err(Error::Config(_))));
    }

    #[test]
    fn test_function_matches_phi_on_base() {
        let phi = |x: f64| x * x + x;
        let eps = 0.1;
        let rect = Rect::new(0.3, 0.33, 0.2, 1.2);
        let base_error = |modes: usize| {
            let x = build_test_function_x(&phi, rect, eps, modes).unwrap();
            (0..=10)
                .map(|i| {
                    let x1 = 0.3 + 0.03 * (i as f64 + 0.5) / 11.0;
                    (x.eval(x1, 0.2) - phi(x1)).abs()
                })
                .fold(0.0, f64::max)
        };
        let (coarse, fine) = (base_error(DEFAULT_MODES), base_error(256));
        assert!(coarse < 1e-4 && fine < coarse / 2.0, "{coarse} {fine}");
        let c = build_test_function_x(&|_| 0.4, rect, eps, DEFAULT_MODES).unwrap();
        assert!((c.eval(0.31, 0.9) - 0.4).abs() < 1e-15);
        assert_eq!(c.energy(), 0.0);
        assert!(matches!(
            build_test_function_x(&phi, Rect::new(0.3, 0.3, 0.0, 1.0), eps, DEFAULT_MODES),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn test_function_energy_constant_is_stable_across_cells() {
        let alpha = 1.5;
        let eps: f64 = 0.1;
        let w = eps.powf(alpha);
        let phi = |x: f64| x * x + x;
        let constants: Vec<f64> = (0..20)
            .map(|n| {
                let lo = n as f64 * 1.5 * w;
                let rect = Rect::new(lo, lo + w, 0.0, 1.0);
                let x = build_test_function_x(&phi, rect, eps, DEFAULT_MODES).unwrap();
                let dphi = quadrature::composite(quadrature::gl8(), lo, lo + w, 8, |t| (2.0 * t + 1.0).powi(2));
                x.energy() / (eps.powf(alpha - 1.0) * dphi)
            })
            .collect();
        let reference = constants[0];
        for c in &constants {
            assert!((c / reference - 1.0).abs() < 0.2, "{constants:?}");
        }
    }

    #[test]
    fn csv_layouts() {
        assert_eq!(decay_csv(&[0.0, 0.5], &[1.0, 0.25]), "y,decay\n0.0,1.0\n0.5,0.25\n");
        let rows = [EnergyRow {
            eps: 0.2,
            energy: 1.0,
            trace_energy: 4.0,
        }];
        assert_eq!(
            energy_csv(&rows),
            "epsilon,energy,trace_energy,ratio\n0.2,1.0,4.0,0.25\n"
        );
    }

    proptest! {
        #[test]
        fn decay_is_non_increasing(c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, s in 0.0f64..1.0) {
            let a = 0.05;
            let u0 = move |x: f64| c1 * (x / a) + c2 * (PI * x / a).cos() + s * (x / a).powi(3);
            let sol = fourier_solution(&u0, 0.2, 1.5, 32).unwrap();
            let ys: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
            let d = decay_profile(&sol, &ys);
            for w in d.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-14));
            }
        }
    }
}
