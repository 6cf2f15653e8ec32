//! Gauss–Legendre rules and composite integration helpers.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on the Legendre polynomial.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, z);
            if d != 0.0 {
                dp = d;
            }
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrates `f` over `[a, b]` with this rule.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut sum = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            sum += w * f(mid + half * x);
        }
        sum * half
    }

    /// Maps the rule onto `[a, b]`, returning `(point, weight)` pairs.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, w * half))
    }
}

// P_n(z) and P_n'(z) by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Shared 5-point rule used by the composite integrators.
pub fn gl5() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(5))
}

/// Shared 8-point rule.
pub fn gl8() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(8))
}

/// Shared 32-point rule, used for vertical section integrals.
pub fn gl32() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(32))
}

/// Composite rule with `panels` equal panels on `[a, b]`.
pub fn composite<F: Fn(f64) -> f64>(rule: &GaussLegendre, a: f64, b: f64, panels: usize, f: F) -> f64 {
    let width = (b - a) / panels as f64;
    (0..panels)
        .map(|k| {
            let lo = a + k as f64 * width;
            let hi = if k + 1 == panels { b } else { lo + width };
            rule.integrate(lo, hi, &f)
        })
        .sum()
}

/// Composite 5-point integration starting at `min_panels` panels and
/// doubling until two successive values agree to `rel_tol`.
///
/// Returns the finest value reached; doubling stops at `max_panels`.
pub fn adaptive_doubling<F: Fn(f64) -> f64>(
    a: f64,
    b: f64,
    min_panels: usize,
    max_panels: usize,
    rel_tol: f64,
    f: F,
) -> f64 {
    let rule = gl5();
    let mut panels = min_panels.max(1);
    let mut coarse = composite(rule, a, b, panels, &f);
    while panels < max_panels {
        panels *= 2;
        let fine = composite(rule, a, b, panels, &f);
        let scale = fine.abs().max(coarse.abs());
        if (fine - coarse).abs() <= rel_tol * scale || scale < 1e-300 {
            return fine;
        }
        coarse = fine;
    }
    coarse
}

/// Integrates `f` over `[a, b]` splitting at the interior `breaks`, with
/// `panels_per_unit` composite 5-point panels per unit length (at least one
/// panel per piece).
pub fn piecewise<F: Fn(f64) -> f64>(a: f64, b: f64, breaks: &[f64], panel_width: f64, f: F) -> f64 {
    let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    cuts.sort_by(|p, q| p.total_cmp(q));
    cuts.dedup();
    let mut total = 0.0;
    let mut lo = a;
    for hi in cuts.into_iter().chain(std::iter::once(b)) {
        let panels = ((hi - lo) / panel_width).ceil().max(1.0) as usize;
        total += composite(gl5(), lo, hi, panels, &f);
        lo = hi;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 8, 17, 32] {
            let rule = GaussLegendre::new(n);
            let s: f64 = rule.weights.iter().sum();
            assert_relative_eq!(s, 2.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let rule = GaussLegendre::new(5);
        // x^9 is odd, x^8 integrates to 2/9 on [-1,1]
        assert!(rule.integrate(-1.0, 1.0, |x| x.powi(9)).abs() < 1e-15);
        assert_relative_eq!(rule.integrate(-1.0, 1.0, |x| x.powi(8)), 2.0 / 9.0, epsilon = 1e-14);
        assert_relative_eq!(rule.integrate(0.0, 2.0, |x| x * x), 8.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn doubling_resolves_smooth_integrand() {
        let v = adaptive_doubling(0.0, PI, 4, 1 << 12, 1e-12, f64::sin);
        assert_relative_eq!(v, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn piecewise_handles_jumps_at_breaks() {
        let step = |x: f64| if x < 0.3 { 1.0 } else { 3.0 };
        let v = piecewise(0.0, 1.0, &[0.3], 0.1, step);
        assert_relative_eq!(v, 0.3 + 2.1, epsilon = 1e-14);
    }
}
