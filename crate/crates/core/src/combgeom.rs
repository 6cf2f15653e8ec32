//! Type II (comb-like) domains: a base strip `{-b(x1) < x2 < 0}` carrying
//! `N_eps` teeth, each a copy of the reference cell `Q0` compressed by
//! `eps^alpha` in the horizontal direction.

use crate::error::{config, Result};
use crate::geometry::{count_below_one, ScalarFunction1D, WeightFunction};
use crate::quadrature;

/// Axis-aligned rectangle `[x_lo, x_hi] x [y_lo, y_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Rect {
    pub fn new(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Self {
        Rect { x_lo, x_hi, y_lo, y_hi }
    }

    pub fn area(&self) -> f64 {
        (self.x_hi - self.x_lo) * (self.y_hi - self.y_lo)
    }

    fn overlap_area(&self, other: &Rect) -> f64 {
        let w = self.x_hi.min(other.x_hi) - self.x_lo.max(other.x_lo);
        let h = self.y_hi.min(other.y_hi) - self.y_lo.max(other.y_lo);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_lo && x <= self.x_hi && y >= self.y_lo && y <= self.y_hi
    }
}

/// Geometric datum of a comb-like domain.
#[derive(Debug, Clone)]
pub struct CombSpec {
    b: ScalarFunction1D,
    cell_width: f64,
    cell_height: f64,
    cell: Vec<Rect>,
    alpha: f64,
    b_bounds: (f64, f64),
}

impl CombSpec {
    pub fn new(b: ScalarFunction1D, cell_width: f64, cell_height: f64, cell: Vec<Rect>, alpha: f64) -> Result<Self> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(config("alpha must be > 1"));
        }
        if !(cell_width > 0.0) || !(cell_height > 0.0) {
            return Err(config("cell width L and height G must be positive"));
        }
        if cell.is_empty() {
            return Err(config("cell must contain at least one rectangle"));
        }
        for (i, r) in cell.iter().enumerate() {
            let finite = [r.x_lo, r.x_hi, r.y_lo, r.y_hi].iter().all(|v| v.is_finite());
            if !finite || !(r.x_hi > r.x_lo) || !(r.y_hi > r.y_lo) {
                return Err(config(format!("cell rectangle {i} must have positive area")));
            }
            if r.x_lo < 0.0 || r.x_hi > cell_width || r.y_lo < 0.0 || r.y_hi > cell_height {
                return Err(config(format!(
                    "cell rectangle {i} must lie in [0, {cell_width}] x [0, {cell_height}]"
                )));
            }
            for (j, s) in cell.iter().enumerate().skip(i + 1) {
                if r.overlap_area(s) > 0.0 {
                    return Err(config(format!("cell rectangles {i} and {j} overlap")));
                }
            }
        }
        let b_bounds = b.bounds();
        if !(b_bounds.0 > 0.0) || !b_bounds.1.is_finite() {
            return Err(config("b must be bounded below by a positive constant on [0, 1]"));
        }
        Ok(CombSpec {
            b,
            cell_width,
            cell_height,
            cell,
            alpha,
            b_bounds,
        })
    }

    pub fn b(&self) -> &ScalarFunction1D {
        &self.b
    }
    /// Cell width `L`.
    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }
    /// Cell height bound `G`.
    pub fn cell_height(&self) -> f64 {
        self.cell_height
    }
    pub fn cell(&self) -> &[Rect] {
        &self.cell
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn b_bounds(&self) -> (f64, f64) {
        self.b_bounds
    }

    /// Horizontal extent of `Q0` within `[0, L]`.
    pub fn cell_x_extent(&self) -> (f64, f64) {
        let lo = self.cell.iter().map(|r| r.x_lo).fold(f64::INFINITY, f64::min);
        let hi = self.cell.iter().map(|r| r.x_hi).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Merged x-intervals of `Gamma0 = closure(∂Q0 ∩ {x2 = 0})`.
    pub fn gamma0_segments(&self) -> Vec<(f64, f64)> {
        let mut segs: Vec<(f64, f64)> = self
            .cell
            .iter()
            .filter(|r| r.y_lo == 0.0)
            .map(|r| (r.x_lo, r.x_hi))
            .collect();
        segs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (lo, hi) in segs {
            match merged.last_mut() {
                Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        merged
    }

    /// Height of the vertical section of `Q0` at reference abscissa `x1`.
    pub fn cell_section(&self, x1: f64) -> f64 {
        self.cell
            .iter()
            .filter(|r| x1 >= r.x_lo && x1 < r.x_hi)
            .map(|r| r.y_hi - r.y_lo)
            .sum()
    }
}

/// One placed tooth: index `n`, horizontal offset `n L eps^alpha`, scale `eps^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tooth {
    pub n: usize,
    pub offset: f64,
    pub scale: f64,
}

impl Tooth {
    /// Physical x-coordinate of reference abscissa `x1`.
    pub fn map_x(&self, x1: f64) -> f64 {
        self.offset + self.scale * x1
    }
}

/// `N_eps`: the largest integer with `N L eps^alpha < 1`.
pub fn tooth_count(spec: &CombSpec, eps: f64) -> usize {
    count_below_one(spec.cell_width * eps.powf(spec.alpha))
}

/// Teeth `n = 1, ..., N_eps` with `N_eps` the largest integer such that
/// `N L eps^alpha < 1`; teeth whose image would leave `(0, 1)` are dropped.
pub fn tooth_layout(spec: &CombSpec, eps: f64) -> Result<Vec<Tooth>> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(config(format!("epsilon must be positive, got {eps}")));
    }
    let scale = eps.powf(spec.alpha);
    let count = tooth_count(spec, eps);
    let (_, x_hi) = spec.cell_x_extent();
    let teeth: Vec<Tooth> = (1..=count)
        .map(|n| Tooth {
            n,
            offset: n as f64 * spec.cell_width * scale,
            scale,
        })
        .filter(|t| t.map_x(x_hi) < 1.0)
        .collect();
    if teeth.is_empty() {
        return Err(config(format!(
            "no tooth fits in (0, 1) for eps = {eps} (L eps^alpha = {})",
            spec.cell_width * scale
        )));
    }
    Ok(teeth)
}

/// `|Q0|`.
pub fn cell_area(spec: &CombSpec) -> f64 {
    spec.cell.iter().map(Rect::area).sum()
}

/// Measure of the section `{x2 > 0 : (x1, x2) in Omega^eps_+}` at `x1`.
pub fn tooth_section(spec: &CombSpec, teeth: &[Tooth], x1: f64) -> f64 {
    let Some(first) = teeth.first() else {
        return 0.0;
    };
    let period = spec.cell_width * first.scale;
    let k = (x1 / period).floor();
    if k < 1.0 {
        return 0.0;
    }
    let n = k as usize;
    match teeth.get(n - 1).filter(|t| t.n == n) {
        Some(t) => spec.cell_section((x1 - t.offset) / t.scale),
        None => 0.0,
    }
}

/// Abscissae where the tooth section measure jumps.
pub fn section_breakpoints(spec: &CombSpec, teeth: &[Tooth]) -> Vec<f64> {
    let mut pts = Vec::with_capacity(teeth.len() * spec.cell.len() * 2);
    for t in teeth {
        for r in &spec.cell {
            pts.push(t.map_x(r.x_lo));
            pts.push(t.map_x(r.x_hi));
        }
    }
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    pts
}

/// `|∫_0^1 (m_eps(x) - |Q0| / L) phi(x) dx|` where `m_eps` is the tooth
/// section measure; its vanishing as `eps -> 0` is the weak limit of the
/// comb cross-sections.
pub fn section_weak_star_residual(spec: &CombSpec, eps: f64, phi: &dyn WeightFunction) -> Result<f64> {
    let teeth = tooth_layout(spec, eps)?;
    let mean = cell_area(spec) / spec.cell_width;
    let mut breaks = section_breakpoints(spec, &teeth);
    breaks.extend(phi.breakpoints());
    let panel = spec.cell_width * teeth[0].scale / 4.0;
    let value = quadrature::piecewise(0.0, 1.0, &breaks, panel.min(1.0 / 64.0), |x| {
        (tooth_section(spec, &teeth, x) - mean) * phi.eval(x)
    });
    Ok(value.abs())
}
