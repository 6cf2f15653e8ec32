//! Type I geometry: the lower boundary `b`, the oscillating profile
//! `G(x, y)` with period map `l(x)`, and the window partition / step
//! minorant built from the per-window minima of `G_eps`.

use std::f64::consts::PI;

use crate::error::{config, domain, Result};
use crate::quadrature;

/// Samples used when bounding a 1D function on `[0, 1]`.
const BOUND_SAMPLES: usize = 4096;
/// Dense samples per period before golden-section refinement.
const MIN_SAMPLES_PER_PERIOD: usize = 1024;
/// Dense samples per partition window.
const PARTITION_SAMPLES: usize = 1024;
/// Absolute tolerance of the golden-section refinement.
const GOLDEN_TOL: f64 = 1e-12;

/// A real function on `[0, 1]`, either a polynomial or a piecewise-linear table.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalarFunction1D {
    /// Coefficients `c0 + c1 x + c2 x^2 + ...`.
    Poly(Vec<f64>),
    /// Abscissa/value pairs, strictly increasing abscissae covering `[0, 1]`.
    Table(Vec<(f64, f64)>),
}

impl ScalarFunction1D {
    pub fn constant(c: f64) -> Self {
        ScalarFunction1D::Poly(vec![c])
    }

    pub fn poly(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(config("polynomial needs at least one coefficient"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(config("polynomial coefficients must be finite"));
        }
        Ok(ScalarFunction1D::Poly(coeffs))
    }

    pub fn table(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(config("table needs at least two points"));
        }
        if points.iter().any(|(x, v)| !x.is_finite() || !v.is_finite()) {
            return Err(config("table entries must be finite"));
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(config("table abscissae must be strictly increasing"));
        }
        if points[0].0 > 0.0 || points[points.len() - 1].0 < 1.0 {
            return Err(config("table abscissae must cover [0, 1]"));
        }
        Ok(ScalarFunction1D::Table(points))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ScalarFunction1D::Poly(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci),
            ScalarFunction1D::Table(pts) => interpolate_table(pts, x),
        }
    }

    /// True when the function vanishes identically.
    pub fn is_zero(&self) -> bool {
        match self {
            ScalarFunction1D::Poly(c) => c.iter().all(|&ci| ci == 0.0),
            ScalarFunction1D::Table(pts) => pts.iter().all(|&(_, v)| v == 0.0),
        }
    }

    /// True when the function is constant on `[0, 1]`.
    pub fn is_constant(&self) -> bool {
        match self {
            ScalarFunction1D::Poly(c) => c.iter().skip(1).all(|&ci| ci == 0.0),
            ScalarFunction1D::Table(pts) => pts.iter().all(|&(_, v)| v == pts[0].1),
        }
    }

    /// Lower and upper bounds on `[0, 1]` from dense sampling (exact for tables).
    pub fn bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut visit = |v: f64| {
            lo = lo.min(v);
            hi = hi.max(v);
        };
        match self {
            ScalarFunction1D::Table(pts) => {
                for &(x, _) in pts.iter().filter(|(x, _)| (0.0..=1.0).contains(x)) {
                    visit(self.eval(x));
                }
                visit(self.eval(0.0));
                visit(self.eval(1.0));
            }
            ScalarFunction1D::Poly(_) => {
                for i in 0..=BOUND_SAMPLES {
                    visit(self.eval(i as f64 / BOUND_SAMPLES as f64));
                }
            }
        }
        (lo, hi)
    }

    /// Interior points where the function fails to be smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            ScalarFunction1D::Poly(_) => Vec::new(),
            ScalarFunction1D::Table(pts) => pts.iter().map(|&(x, _)| x).filter(|&x| x > 0.0 && x < 1.0).collect(),
        }
    }
}

fn interpolate_table(pts: &[(f64, f64)], x: f64) -> f64 {
    let n = pts.len();
    if x <= pts[0].0 {
        return pts[0].1;
    }
    if x >= pts[n - 1].0 {
        return pts[n - 1].1;
    }
    let k = pts.partition_point(|&(xi, _)| xi <= x);
    let (x0, v0) = pts[k - 1];
    let (x1, v1) = pts[k];
    let t = (x - x0) / (x1 - x0);
    v0 + t * (v1 - v0)
}

/// Canonical periodic waveforms with period 1 and range `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub enum Waveform {
    /// `(1 + sin 2πs) / 2`
    Sine,
    /// `(1 - cos 2πs) / 2`, minimum 0 at integer `s`
    Cosine,
    /// 1 on the first half period, 0 on the second
    Square,
    /// `frac(s)`
    Sawtooth,
    /// `1 - |2 frac(s) - 1|`
    Triangle,
    /// Values at `s = k/n`, `k = 0..n`, linearly interpolated and repeated.
    Tabulated(Vec<f64>),
}

impl Waveform {
    pub fn tabulated(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(config("tabulated waveform needs at least two samples"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(config("tabulated waveform values must lie in [0, 1]"));
        }
        Ok(Waveform::Tabulated(values))
    }

    pub fn eval(&self, s: f64) -> f64 {
        let t = s - s.floor();
        match self {
            Waveform::Sine => 0.5 * (1.0 + (2.0 * PI * t).sin()),
            Waveform::Cosine => 0.5 * (1.0 - (2.0 * PI * t).cos()),
            Waveform::Square => {
                if t < 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            Waveform::Sawtooth => t,
            Waveform::Triangle => 1.0 - (2.0 * t - 1.0).abs(),
            Waveform::Tabulated(v) => {
                let n = v.len();
                let u = t * n as f64;
                let k = (u.floor() as usize).min(n - 1);
                let frac = u - k as f64;
                v[k] + frac * (v[(k + 1) % n] - v[k])
            }
        }
    }

    /// Phases in `[0, 1)` where the waveform is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            Waveform::Sine | Waveform::Cosine => Vec::new(),
            Waveform::Square => vec![0.0, 0.5],
            Waveform::Sawtooth => vec![0.0],
            Waveform::Triangle => vec![0.0, 0.5],
            Waveform::Tabulated(v) => (0..v.len()).map(|k| k as f64 / v.len() as f64).collect(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Waveform::Sine => "sine",
            Waveform::Cosine => "cosine",
            Waveform::Square => "square",
            Waveform::Sawtooth => "sawtooth",
            Waveform::Triangle => "triangle",
            Waveform::Tabulated(_) => "tabulated",
        }
    }
}

/// Geometric datum of a Type I domain
/// `{0 < x1 < 1, -b(x1) < x2 < G(x1, x1 / eps^alpha)}` with
/// `G(x, y) = base(x) + amp(x) * waveform(y / l(x) + phase)`.
#[derive(Debug, Clone)]
pub struct ProfileSpec {
    b: ScalarFunction1D,
    waveform: Waveform,
    phase: f64,
    base: ScalarFunction1D,
    amp: ScalarFunction1D,
    period: ScalarFunction1D,
    alpha: f64,
    b_bounds: (f64, f64),
    period_bounds: (f64, f64),
    g_max: f64,
    wave_min: f64,
    wave_mean: f64,
}

impl ProfileSpec {
    pub fn new(
        b: ScalarFunction1D,
        waveform: Waveform,
        base: ScalarFunction1D,
        amp: ScalarFunction1D,
        period: ScalarFunction1D,
        alpha: f64,
    ) -> Result<Self> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(config("alpha must be > 1"));
        }
        let b_bounds = b.bounds();
        if !(b_bounds.0 > 0.0) || !b_bounds.1.is_finite() {
            return Err(config("b must be bounded below by a positive constant on [0, 1]"));
        }
        let period_bounds = period.bounds();
        if !(period_bounds.0 > 0.0) || !period_bounds.1.is_finite() {
            return Err(config("period must be positive on [0, 1]"));
        }
        let (base_lo, base_hi) = base.bounds();
        if base_lo < 0.0 {
            return Err(config("base must be non-negative on [0, 1]"));
        }
        let (amp_lo, amp_hi) = amp.bounds();
        if amp_lo < 0.0 {
            return Err(config("amp must be non-negative on [0, 1]"));
        }
        let wave = waveform.clone();
        let (_, wave_min) = minimize_periodic(|s| wave.eval(s), 1.0);
        let wave_mean = average_periodic(|s| wave.eval(s), 1.0, &waveform.kinks());
        Ok(ProfileSpec {
            b,
            waveform,
            phase: 0.0,
            base,
            amp,
            period,
            alpha,
            b_bounds,
            period_bounds,
            g_max: base_hi + amp_hi,
            wave_min,
            wave_mean,
        })
    }

    /// Shifts the waveform by `phase` periods.
    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    /// Non-oscillating profile `G(x, y) = c` over the constant depth `b`.
    pub fn flat(b: f64, c: f64, alpha: f64) -> Result<Self> {
        ProfileSpec::new(
            ScalarFunction1D::constant(b),
            Waveform::Sine,
            ScalarFunction1D::constant(c),
            ScalarFunction1D::constant(0.0),
            ScalarFunction1D::constant(1.0),
            alpha,
        )
    }

    pub fn b(&self) -> &ScalarFunction1D {
        &self.b
    }
    pub fn waveform(&self) -> &Waveform {
        &self.waveform
    }
    pub fn phase(&self) -> f64 {
        self.phase
    }
    pub fn base(&self) -> &ScalarFunction1D {
        &self.base
    }
    pub fn amp(&self) -> &ScalarFunction1D {
        &self.amp
    }
    pub fn period(&self) -> &ScalarFunction1D {
        &self.period
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    /// `(b0, b1)` with `b0 <= b(x) <= b1`.
    pub fn b_bounds(&self) -> (f64, f64) {
        self.b_bounds
    }
    /// `(L', L)` with `L' <= l(x) <= L`.
    pub fn period_bounds(&self) -> (f64, f64) {
        self.period_bounds
    }
    /// Upper bound `G1` of `G`.
    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    /// True when `G` does not depend on `y`.
    pub fn is_non_oscillating(&self) -> bool {
        self.amp.is_zero()
    }

    /// `G(x, y)` without domain checks.
    #[inline]
    pub fn g(&self, x: f64, y: f64) -> f64 {
        let l = self.period.eval(x);
        self.base.eval(x) + self.amp.eval(x) * self.waveform.eval(y / l + self.phase)
    }

    /// `G_eps(x) = G(x, x / eps^alpha)` without domain checks.
    #[inline]
    pub fn g_eps_at(&self, eps: f64, x: f64) -> f64 {
        self.g(x, x / eps.powf(self.alpha))
    }

    /// Number of oscillation periods of `G_eps` on `(0, 1)`.
    pub fn periods_in_unit(&self, eps: f64) -> f64 {
        let scale = eps.powf(self.alpha);
        if self.period.is_constant() {
            return 1.0 / (scale * self.period.eval(0.0));
        }
        let l = &self.period;
        quadrature::piecewise(0.0, 1.0, &l.kinks(), 1.0 / 256.0, |x| 1.0 / l.eval(x)) / scale
    }
}

fn check_unit(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("x = {x} lies outside [0, 1]")));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(domain(format!("epsilon must be positive, got {eps}")));
    }
    Ok(())
}

/// `G_eps(x) = G(x, x / eps^alpha)`.
pub fn eval_g_eps(spec: &ProfileSpec, eps: f64, x: f64) -> Result<f64> {
    check_eps(eps)?;
    check_unit(x)?;
    Ok(spec.g_eps_at(eps, x))
}

/// Golden-section search for a minimum of `f` on `[lo, hi]`.
pub fn golden_section<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Minimum of the `period`-periodic function `f` over one period:
/// dense sampling followed by golden-section refinement around the best
/// sample. Returns `(argmin in [0, period), min)`.
pub fn minimize_periodic<F: Fn(f64) -> f64>(f: F, period: f64) -> (f64, f64) {
    let n = MIN_SAMPLES_PER_PERIOD;
    let step = period / n as f64;
    let mut best = (0.0, f(0.0));
    for k in 1..n {
        let y = k as f64 * step;
        let v = f(y);
        if v < best.1 {
            best = (y, v);
        }
    }
    let (y, v) = golden_section(&f, best.0 - step, best.0 + step, GOLDEN_TOL * period.max(1.0));
    if v < best.1 {
        (y.rem_euclid(period), v)
    } else {
        best
    }
}

/// Period average `(1/period) ∫_0^period f` by composite Gauss–Legendre
/// quadrature (at least 256 panels, doubled to relative tolerance 1e-10).
/// `kinks` are phases in `[0, 1)` (fractions of the period) where `f` is
/// not smooth; when they all fall on the panel grid the quadrature is exact
/// up to the smooth error.
pub fn average_periodic<F: Fn(f64) -> f64>(f: F, period: f64, kinks: &[f64]) -> f64 {
    let aligned = kinks.iter().all(|&k| ((k * 256.0) - (k * 256.0).round()).abs() < 1e-12);
    let integral = if aligned {
        quadrature::adaptive_doubling(0.0, period, 256, 1 << 14, 1e-10, &f)
    } else {
        let breaks: Vec<f64> = kinks.iter().map(|k| k * period).collect();
        quadrature::piecewise(0.0, period, &breaks, period / 256.0, &f)
    };
    integral / period
}

/// `G0(x) = min_y G(x, y)`.
pub fn min_over_period(spec: &ProfileSpec, x: f64) -> Result<f64> {
    check_unit(x)?;
    // amp >= 0, so the minimum of G(x, .) is attained where the waveform is minimal.
    Ok(spec.base.eval(x) + spec.amp.eval(x) * spec.wave_min)
}

/// `(1 / l(x)) ∫_0^{l(x)} G(x, s) ds`.
pub fn cell_average(spec: &ProfileSpec, x: f64) -> Result<f64> {
    check_unit(x)?;
    // substitution s = l(x) t reduces the period average to the waveform mean
    Ok(spec.base.eval(x) + spec.amp.eval(x) * spec.wave_mean)
}

/// Largest `N` with `N * L * eps^alpha < 1`.
pub fn window_count(spec: &ProfileSpec, eps: f64) -> usize {
    count_below_one(spec.period_bounds.1 * eps.powf(spec.alpha))
}

/// Largest integer `N >= 0` with `N * width < 1`, robust to the rounding
/// of `width` when `1 / width` is an integer.
pub(crate) fn count_below_one(width: f64) -> usize {
    if !(width > 0.0) {
        return 0;
    }
    let r = 1.0 / width;
    let nearest = r.round();
    if (r - nearest).abs() <= 1e-9 * r.max(1.0) {
        (nearest as usize).saturating_sub(1)
    } else {
        r.ceil() as usize - 1
    }
}

/// The partition `0 = gamma_0 <= gamma_1 <= ... <= gamma_{N+1} = 1` of
/// window minimizers together with the window minima `G_{n,eps}`.
#[derive(Debug, Clone)]
pub struct Partition {
    pub eps: f64,
    /// Window width `L eps^alpha`.
    pub window: f64,
    /// `gamma_0, ..., gamma_{N+1}`.
    pub points: Vec<f64>,
    /// `G_{1,eps}, ..., G_{N,eps}`.
    pub minima: Vec<f64>,
}

impl Partition {
    pub fn window_count(&self) -> usize {
        self.minima.len()
    }
}

/// Locates the minimizer of `G_eps` in each window `[(n-1) L eps^alpha, n L eps^alpha]`.
pub fn build_partition(spec: &ProfileSpec, eps: f64) -> Result<Partition> {
    check_eps(eps)?;
    let n_windows = window_count(spec, eps);
    if n_windows == 0 {
        return Err(config(format!("epsilon too large for partition (eps = {eps})")));
    }
    let window = spec.period_bounds.1 * eps.powf(spec.alpha);
    let g = |x: f64| spec.g_eps_at(eps, x);
    let mut points = Vec::with_capacity(n_windows + 2);
    let mut minima = Vec::with_capacity(n_windows);
    points.push(0.0);
    for n in 1..=n_windows {
        let lo = (n - 1) as f64 * window;
        let hi = n as f64 * window;
        let step = (hi - lo) / PARTITION_SAMPLES as f64;
        let mut best_k = 0;
        let mut best_v = g(lo);
        for k in 1..=PARTITION_SAMPLES {
            let x = if k == PARTITION_SAMPLES {
                hi
            } else {
                lo + k as f64 * step
            };
            let v = g(x);
            if v < best_v {
                best_k = k;
                best_v = v;
            }
        }
        let mut best_x = if best_k == PARTITION_SAMPLES {
            hi
        } else {
            lo + best_k as f64 * step
        };
        let a = (best_x - step).max(lo);
        let b = (best_x + step).min(hi);
        let (x, v) = golden_section(g, a, b, GOLDEN_TOL);
        if v < best_v {
            best_x = x;
            best_v = v;
        }
        points.push(best_x);
        minima.push(best_v);
    }
    points.push(1.0);
    Ok(Partition {
        eps,
        window,
        points,
        minima,
    })
}

/// Piecewise-constant function on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() + 1 || values.is_empty() {
            return Err(config("step function needs one value per subinterval"));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(config("step function breakpoints must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(config("step function values must be finite and non-negative"));
        }
        Ok(StepFunction { breakpoints, values })
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `x`; a breakpoint takes the value of the interval to its right
    /// (the last interval is closed).
    pub fn eval(&self, x: f64) -> f64 {
        let k = self.breakpoints.partition_point(|&b| b <= x);
        let idx = k.saturating_sub(1).min(self.values.len() - 1);
        self.values[idx]
    }

    /// `sup |self - g|` over `[0, 1]`, sampling each closed subinterval with
    /// `samples_per_piece + 1` points (including both endpoints, where the
    /// step takes the value of that subinterval).
    pub fn sup_distance<F: Fn(f64) -> f64>(&self, g: F, samples_per_piece: usize) -> f64 {
        let mut sup: f64 = 0.0;
        for (k, &v) in self.values.iter().enumerate() {
            let lo = self.breakpoints[k];
            let hi = self.breakpoints[k + 1];
            for i in 0..=samples_per_piece {
                let x = lo + (hi - lo) * i as f64 / samples_per_piece as f64;
                sup = sup.max((v - g(x)).abs());
            }
        }
        sup
    }
}

/// The step minorant built from the window minima: `G_{1,eps}` on
/// `[0, gamma_1]`, `max(G_n, G_{n+1})` on `[gamma_n, gamma_{n+1}]`,
/// `G_{N,eps}` on `[gamma_N, 1]`. Degenerate (zero-length) pieces are dropped.
pub fn build_step_minorant(spec: &ProfileSpec, eps: f64) -> Result<StepFunction> {
    let part = build_partition(spec, eps)?;
    Ok(step_from_partition(&part))
}

pub fn step_from_partition(part: &Partition) -> StepFunction {
    let n = part.window_count();
    let g = &part.minima;
    let mut breakpoints = vec![0.0];
    let mut values = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let hi = part.points[k + 1];
        let value = if k == 0 {
            g[0]
        } else if k == n {
            g[n - 1]
        } else {
            g[k - 1].max(g[k])
        };
        let lo = *breakpoints.last().unwrap();
        if hi > lo {
            breakpoints.push(hi);
            values.push(value);
        }
    }
    StepFunction { breakpoints, values }
}

/// A weight for the weak-* residuals: evaluation plus the points where it
/// may jump, so the quadrature can split there.
pub trait WeightFunction {
    fn eval(&self, x: f64) -> f64;
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl WeightFunction for ScalarFunction1D {
    fn eval(&self, x: f64) -> f64 {
        ScalarFunction1D::eval(self, x)
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.kinks()
    }
}

/// The fixed dictionary of test functions used by the weak-limit checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    One,
    X,
    XSquared,
    CosPi,
    /// Indicator of `[lo, hi)`.
    Indicator(f64, f64),
}

impl TestFunction {
    pub fn dictionary() -> [TestFunction; 5] {
        [
            TestFunction::One,
            TestFunction::X,
            TestFunction::XSquared,
            TestFunction::CosPi,
            TestFunction::Indicator(0.3, 0.7),
        ]
    }

    pub fn name(&self) -> String {
        match self {
            TestFunction::One => "1".into(),
            TestFunction::X => "x".into(),
            TestFunction::XSquared => "x^2".into(),
            TestFunction::CosPi => "cos(pi x)".into(),
            TestFunction::Indicator(a, b) => format!("1[{a},{b})"),
        }
    }
}

impl WeightFunction for TestFunction {
    fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::One => 1.0,
            TestFunction::X => x,
            TestFunction::XSquared => x * x,
            TestFunction::CosPi => (PI * x).cos(),
            TestFunction::Indicator(a, b) => {
                if x >= a && x < b {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            TestFunction::Indicator(a, b) => vec![a, b],
            _ => Vec::new(),
        }
    }
}

/// `|∫_0^1 (G_eps(x) - cell_average(x)) phi(x) dx|` with 20 quadrature
/// points per shortest period of `G_eps`.
pub fn weak_star_residual(spec: &ProfileSpec, eps: f64, phi: &dyn WeightFunction) -> Result<f64> {
    check_eps(eps)?;
    let shortest = spec.period_bounds.0 * eps.powf(spec.alpha);
    let panel = (shortest / 4.0).min(1.0 / 64.0);
    let mut breaks = phi.breakpoints();
    breaks.extend(spec.b.kinks());
    breaks.extend(spec.base.kinks());
    breaks.extend(spec.amp.kinks());
    let integrand = |x: f64| {
        let avg = spec.base.eval(x) + spec.amp.eval(x) * spec.wave_mean;
        (spec.g_eps_at(eps, x) - avg) * phi.eval(x)
    };
    Ok(quadrature::piecewise(0.0, 1.0, &breaks, panel, integrand).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use approx::assert_relative_eq;

    fn sine_profile(alpha: f64) -> ProfileSpec {
        // G(x, y) = 2 + sin(2πy)
        ProfileSpec::new(
            ScalarFunction1D::constant(1.0),
            Waveform::Sine,
            ScalarFunction1D::constant(1.0),
            ScalarFunction1D::constant(2.0),
            ScalarFunction1D::constant(1.0),
            alpha,
        )
        .unwrap()
    }

    fn ramp_profile(alpha: f64) -> ProfileSpec {
        // b = 1 + x/2, G(x, y) = x + (1 - cos 2πy)
        ProfileSpec::new(
            ScalarFunction1D::poly(vec![1.0, 0.5]).unwrap(),
            Waveform::Cosine,
            ScalarFunction1D::poly(vec![0.0, 1.0]).unwrap(),
            ScalarFunction1D::constant(2.0),
            ScalarFunction1D::constant(1.0),
            alpha,
        )
        .unwrap()
    }

    #[test]
    fn g_eps_examples() {
        let spec = sine_profile(2.0);
        assert_relative_eq!(eval_g_eps(&spec, 0.1, 0.0).unwrap(), 2.0);
        assert_relative_eq!(eval_g_eps(&spec, 0.1, 0.0025).unwrap(), 3.0, epsilon = 1e-12);
        let flat = ProfileSpec::flat(1.0, 1.7, 1.5).unwrap();
        for x in [0.0, 0.3, 1.0] {
            assert_eq!(eval_g_eps(&flat, 0.37, x).unwrap(), 1.7);
        }
    }

    #[test]
    fn g_eps_rejects_points_outside_unit_interval() {
        let spec = sine_profile(2.0);
        assert!(matches!(eval_g_eps(&spec, 0.1, -0.01), Err(Error::Domain(_))));
        assert!(matches!(eval_g_eps(&spec, 0.1, 1.5), Err(Error::Domain(_))));
        assert!(matches!(eval_g_eps(&spec, 0.0, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn minimum_over_period_examples() {
        assert_relative_eq!(min_over_period(&sine_profile(2.0), 0.4).unwrap(), 1.0, epsilon = 1e-12);
        let ramp = ramp_profile(1.5);
        for x in [0.0, 0.25, 0.9] {
            assert_relative_eq!(min_over_period(&ramp, x).unwrap(), x, epsilon = 1e-12);
        }
        let square = ProfileSpec::new(
            ScalarFunction1D::constant(1.0),
            Waveform::Square,
            ScalarFunction1D::constant(1.7),
            ScalarFunction1D::constant(0.3),
            ScalarFunction1D::constant(1.0),
            1.5,
        )
        .unwrap();
        assert_relative_eq!(min_over_period(&square, 0.5).unwrap(), 1.7, epsilon = 1e-12);
    }

    #[test]
    fn cell_average_examples() {
        assert_relative_eq!(cell_average(&sine_profile(2.0), 0.3).unwrap(), 2.0, epsilon = 1e-12);
        let flat = ProfileSpec::flat(1.0, 0.8, 1.5).unwrap();
        assert_relative_eq!(cell_average(&flat, 0.3).unwrap(), 0.8, epsilon = 1e-14);
        // G(x, y) = 1 + sin(y), l = 2π
        let spec = ProfileSpec::new(
            ScalarFunction1D::constant(1.0),
            Waveform::Sine,
            ScalarFunction1D::constant(0.0),
            ScalarFunction1D::constant(2.0),
            ScalarFunction1D::constant(2.0 * PI),
            1.5,
        )
        .unwrap();
        assert_relative_eq!(spec.g(0.2, 1.0), 1.0 + 1f64.sin(), epsilon = 1e-14);
        assert_relative_eq!(cell_average(&spec, 0.2).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cell_average_matches_direct_quadrature_of_g() {
        let spec = ProfileSpec::new(
            ScalarFunction1D::constant(1.0),
            Waveform::Triangle,
            ScalarFunction1D::poly(vec![0.2, 0.3]).unwrap(),
            ScalarFunction1D::poly(vec![1.0, -0.5]).unwrap(),
            ScalarFunction1D::poly(vec![0.5, 0.25]).unwrap(),
            1.5,
        )
        .unwrap();
        for x in [0.0, 0.37, 1.0] {
            let l = spec.period().eval(x);
            let direct = average_periodic(|y| spec.g(x, y), l, &[0.0, 0.5]);
            assert_relative_eq!(cell_average(&spec, x).unwrap(), direct, epsilon = 1e-10);
            let (_, m) = minimize_periodic(|y| spec.g(x, y), l);
            assert_relative_eq!(min_over_period(&spec, x).unwrap(), m, epsilon = 1e-10);
        }
    }

    #[test]
    fn window_counts() {
        assert_eq!(window_count(&sine_profile(2.0), 0.1), 99);
        assert_eq!(count_below_one(0.25), 3);
        assert_eq!(count_below_one(0.3), 3);
        assert_eq!(count_below_one(1.0), 0);
        assert_eq!(count_below_one(2.0), 0);
    }

    #[test]
    fn partition_of_sine_profile() {
        let spec = sine_profile(2.0);
        let part = build_partition(&spec, 0.1).unwrap();
        assert_eq!(part.window_count(), 99);
        assert_eq!(part.points.len(), 101);
        for n in 1..=99 {
            let expected = (n as f64 - 1.0 + 0.75) * 0.01;
            assert!(
                (part.points[n] - expected).abs() < 1e-9,
                "gamma_{n} = {}",
                part.points[n]
            );
            assert_relative_eq!(part.minima[n - 1], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn partition_window_minimum_brute_force() {
        // independent oracle: a 20000-point scan of each window
        let spec = ramp_profile(1.5);
        let eps = 0.2;
        let part = build_partition(&spec, eps).unwrap();
        for n in 1..=part.window_count() {
            let lo = (n - 1) as f64 * part.window;
            let scan = (0..=20000)
                .map(|k| spec.g_eps_at(eps, lo + part.window * k as f64 / 20000.0))
                .fold(f64::INFINITY, f64::min);
            assert!(part.minima[n - 1] <= scan + 1e-12);
            assert!(part.minima[n - 1] >= scan - 1e-6);
        }
    }

    #[test]
    fn constant_profile_partition_takes_left_endpoints() {
        let spec = ProfileSpec::flat(1.0, 2.0, 2.0).unwrap();
        let part = build_partition(&spec, 0.1).unwrap();
        for n in 1..=part.window_count() {
            assert_relative_eq!(part.points[n], (n - 1) as f64 * part.window, epsilon = 1e-15);
        }
        let step = build_step_minorant(&spec, 0.1).unwrap();
        assert!(step.values().iter().all(|&v| v == 2.0));
        assert_eq!(*step.breakpoints().first().unwrap(), 0.0);
        assert_eq!(*step.breakpoints().last().unwrap(), 1.0);
    }

    #[test]
    fn partition_requires_small_epsilon() {
        let spec = sine_profile(1.5);
        assert!(matches!(build_partition(&spec, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn step_minorant_of_periodic_profile_is_exact() {
        let spec = sine_profile(2.0);
        let step = build_step_minorant(&spec, 0.1).unwrap();
        let d = step.sup_distance(|x| min_over_period(&spec, x).unwrap(), 8);
        assert!(d < 1e-12, "sup distance {d}");
    }

    #[test]
    fn step_minorant_of_ramp_tracks_g0() {
        let spec = ramp_profile(2.0);
        let eps = 0.1;
        let part = build_partition(&spec, eps).unwrap();
        assert!(part.minima.windows(2).all(|w| w[1] > w[0]));
        let step = step_from_partition(&part);
        let d = step.sup_distance(|x| x, 16);
        // minima sit at the left window ends, so the step exceeds G0 by one
        // window inside and by up to two windows on the final piece
        assert!(d > part.window && d <= 2.0 * part.window + 1e-12, "d = {d}");
    }

    #[test]
    fn weak_star_residual_matches_closed_form() {
        let spec = sine_profile(2.0);
        for eps in [0.2, 0.1, 0.05] {
            let h: f64 = eps * eps;
            let exact = (h * (1.0 - (2.0 * PI / h).cos()) / (2.0 * PI)).abs();
            let r = weak_star_residual(&spec, eps, &TestFunction::One).unwrap();
            assert!((r - exact).abs() < 1e-10, "eps {eps}: {r} vs {exact}");
            assert!(r <= h / PI + 1e-12);
        }
        let flat = ProfileSpec::flat(1.0, 2.0, 1.5).unwrap();
        for phi in TestFunction::dictionary() {
            assert!(weak_star_residual(&flat, 0.1, &phi).unwrap() < 1e-14);
        }
    }

    #[test]
    fn weak_star_residual_decreases_for_linear_weight() {
        let spec = sine_profile(1.5);
        let r: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&e| weak_star_residual(&spec, e, &TestFunction::X).unwrap())
            .collect();
        assert!(r[0] > r[1] && r[1] > r[2], "{r:?}");
    }

    #[test]
    fn table_function_interpolates_and_validates() {
        let t = ScalarFunction1D::table(vec![(0.0, 1.0), (0.5, 2.0), (1.0, 0.0)]).unwrap();
        assert_relative_eq!(t.eval(0.25), 1.5);
        assert_relative_eq!(t.eval(0.75), 1.0);
        assert_eq!(t.bounds(), (0.0, 2.0));
        assert!(ScalarFunction1D::table(vec![(0.0, 1.0), (0.0, 2.0), (1.0, 0.0)]).is_err());
        assert!(ScalarFunction1D::table(vec![(0.1, 1.0), (1.0, 0.0)]).is_err());
    }

    #[test]
    fn spec_validation() {
        let mk = |alpha: f64, b: f64| {
            ProfileSpec::new(
                ScalarFunction1D::constant(b),
                Waveform::Sine,
                ScalarFunction1D::constant(1.0),
                ScalarFunction1D::constant(1.0),
                ScalarFunction1D::constant(1.0),
                alpha,
            )
        };
        assert!(mk(1.5, 1.0).is_ok());
        let err = mk(0.5, 1.0).unwrap_err().to_string();
        assert!(err.contains("alpha must be > 1"), "{err}");
        assert!(mk(1.5, 0.0).is_err());
    }

    #[test]
    fn waveforms_have_unit_range() {
        let waves = [
            Waveform::Sine,
            Waveform::Cosine,
            Waveform::Square,
            Waveform::Sawtooth,
            Waveform::Triangle,
            Waveform::tabulated(vec![0.0, 1.0, 0.25]).unwrap(),
        ];
        for w in &waves {
            let (lo, hi) = (0..1000)
                .map(|k| w.eval(k as f64 / 1000.0 - 3.0))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            assert!(lo >= 0.0 && hi <= 1.0, "{}", w.name());
        }
    }
}
