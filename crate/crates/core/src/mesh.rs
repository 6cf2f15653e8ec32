//! Conforming triangulations of the rescaled domains and of reference cells.
//!
//! All generators are structured: boundary-fitted mapped grids for the
//! Type I domain and the comb base strip, tensor grids restricted to the
//! rectangle union for comb teeth and reference cells. Quadrilaterals are
//! split along their shorter diagonal.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::combgeom::{tooth_layout, CombSpec};
use crate::error::{Error, Result};
use crate::geometry::ProfileSpec;

/// Coordinates closer than this are the same node.
const DUPLICATE_TOL: f64 = 1e-14;
/// Feature abscissae closer than this are merged.
const SNAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    LateralLeft,
    LateralRight,
    Bottom,
    Top,
    Interface,
    Gamma0,
}

impl BoundaryTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryTag::LateralLeft => "lateral-left",
            BoundaryTag::LateralRight => "lateral-right",
            BoundaryTag::Bottom => "bottom",
            BoundaryTag::Top => "top",
            BoundaryTag::Interface => "interface",
            BoundaryTag::Gamma0 => "gamma0",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "lateral-left" => BoundaryTag::LateralLeft,
            "lateral-right" => BoundaryTag::LateralRight,
            "bottom" => BoundaryTag::Bottom,
            "top" => BoundaryTag::Top,
            "interface" => BoundaryTag::Interface,
            "gamma0" => BoundaryTag::Gamma0,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Triangulation with counterclockwise triangles and tagged boundary edges.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<BoundaryEdge>,
}

impl Mesh {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Signed area of triangle `t` (positive when counterclockwise).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(self.nodes[a], self.nodes[b], self.nodes[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.signed_area(t)).sum()
    }

    /// Nodes lying on an edge with the given tag.
    pub fn tagged_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut nodes: Vec<usize> = self
            .boundary
            .iter()
            .filter(|e| e.tag == tag)
            .flat_map(|e| e.nodes)
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Image under `(x, y) -> (x, factor * y)`; connectivity unchanged.
    pub fn scale_y(&self, factor: f64) -> Mesh {
        assert!(factor > 0.0, "scaling must preserve orientation");
        let mut m = self.clone();
        for p in &mut m.nodes {
            p[1] *= factor;
        }
        m
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Mesh {
        let mut m = self.clone();
        for p in &mut m.nodes {
            p[0] += dx;
            p[1] += dy;
        }
        m
    }

    /// Renumbers nodes so that old node `i` becomes `perm[i]`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Mesh {
        assert_eq!(perm.len(), self.nodes.len());
        let mut nodes = vec![[0.0; 2]; self.nodes.len()];
        for (i, &p) in perm.iter().enumerate() {
            nodes[p] = self.nodes[i];
        }
        Mesh {
            nodes,
            triangles: self.triangles.iter().map(|t| t.map(|i| perm[i])).collect(),
            boundary: self
                .boundary
                .iter()
                .map(|e| BoundaryEdge {
                    nodes: e.nodes.map(|i| perm[i]),
                    tag: e.tag,
                })
                .collect(),
        }
    }

    /// Text format: `nodes N` / `i x y`, `triangles M` / `i a b c`,
    /// `boundary K` / `a b tag`; indices 0-based.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(48 * (self.nodes.len() + self.triangles.len()));
        let _ = writeln!(out, "nodes {}", self.nodes.len());
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "{i} {:?} {:?}", p[0], p[1]);
        }
        let _ = writeln!(out, "triangles {}", self.triangles.len());
        for (i, t) in self.triangles.iter().enumerate() {
            let _ = writeln!(out, "{i} {} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(out, "boundary {}", self.boundary.len());
        for e in &self.boundary {
            let _ = writeln!(out, "{} {} {}", e.nodes[0], e.nodes[1], e.tag.as_str());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()));
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| Error::Mesh(format!("unexpected end of input, expected {what}")))
        };
        let bad = |ln: usize, msg: &str| Error::Mesh(format!("line {ln}: {msg}"));
        let mut mesh = Mesh::default();

        let (ln, v) = next("'nodes' header")?;
        let n = header(ln, &v, "nodes")?;
        for _ in 0..n {
            let (ln, v) = next("a node")?;
            if v.len() != 3 {
                return Err(bad(ln, "expected 'i x y'"));
            }
            let x: f64 = v[1].parse().map_err(|_| bad(ln, "invalid x"))?;
            let y: f64 = v[2].parse().map_err(|_| bad(ln, "invalid y"))?;
            mesh.nodes.push([x, y]);
        }
        let index = |s: &str, ln: usize| -> Result<usize> {
            match s.parse::<usize>() {
                Ok(i) if i < n => Ok(i),
                Ok(_) => Err(bad(ln, "node index out of range")),
                Err(_) => Err(bad(ln, "invalid node index")),
            }
        };

        let (ln, v) = next("'triangles' header")?;
        let m = header(ln, &v, "triangles")?;
        for _ in 0..m {
            let (ln, v) = next("a triangle")?;
            if v.len() != 4 {
                return Err(bad(ln, "expected 'i a b c'"));
            }
            mesh.triangles
                .push([index(v[1], ln)?, index(v[2], ln)?, index(v[3], ln)?]);
        }

        let (ln, v) = next("'boundary' header")?;
        let k = header(ln, &v, "boundary")?;
        for _ in 0..k {
            let (ln, v) = next("a boundary edge")?;
            if v.len() != 3 {
                return Err(bad(ln, "expected 'a b tag'"));
            }
            let tag = BoundaryTag::parse(v[2]).ok_or_else(|| bad(ln, "unknown boundary tag"))?;
            mesh.boundary.push(BoundaryEdge {
                nodes: [index(v[0], ln)?, index(v[1], ln)?],
                tag,
            });
        }
        Ok(mesh)
    }
}

fn header(ln: usize, v: &[&str], name: &str) -> Result<usize> {
    match v {
        [head, count] if *head == name => count
            .parse()
            .map_err(|_| Error::Mesh(format!("line {ln}: invalid {name} count"))),
        _ => Err(Error::Mesh(format!("line {ln}: expected '{name} <count>'"))),
    }
}

fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Splits the quadrilateral `p00 p10 p11 p01` (counterclockwise) along its
/// shorter diagonal; ties go to `p00 - p11`.
fn push_quad(tris: &mut Vec<[usize; 3]>, nodes: &[[f64; 2]], q: [usize; 4]) {
    let [p00, p10, p11, p01] = q;
    if dist2(nodes[p00], nodes[p11]) <= dist2(nodes[p10], nodes[p01]) {
        tris.push([p00, p10, p11]);
        tris.push([p00, p11, p01]);
    } else {
        tris.push([p00, p10, p01]);
        tris.push([p10, p11, p01]);
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Edges owned by exactly one triangle, in triangle order.
fn free_edges(tris: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut count: HashMap<(usize, usize), u32> = HashMap::with_capacity(tris.len() * 2);
    for t in tris {
        for k in 0..3 {
            *count.entry(edge_key(t[k], t[(k + 1) % 3])).or_default() += 1;
        }
    }
    let mut out = Vec::new();
    for t in tris {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            if count[&edge_key(a, b)] == 1 {
                out.push([a, b]);
            }
        }
    }
    out
}

fn tag_boundary<F: Fn([usize; 2]) -> BoundaryTag>(tris: &[[usize; 3]], tag: F) -> Vec<BoundaryEdge> {
    free_edges(tris)
        .into_iter()
        .map(|nodes| BoundaryEdge { nodes, tag: tag(nodes) })
        .collect()
}

/// Resolution of the Type I mapped grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshParams {
    pub cells_per_period: usize,
    pub ny: usize,
    pub triangle_cap: usize,
}

impl Default for MeshParams {
    fn default() -> Self {
        MeshParams {
            cells_per_period: 8,
            ny: 8,
            triangle_cap: 200_000,
        }
    }
}

/// Number of x-cells of the Type I grid: `cells_per_period` times the
/// number of oscillation periods rounded up (one "period" for a flat top).
pub fn type1_columns(spec: &ProfileSpec, eps: f64, cells_per_period: usize) -> usize {
    if spec.is_non_oscillating() {
        return cells_per_period;
    }
    let periods = spec.periods_in_unit(eps);
    cells_per_period * ((periods - 1e-9).ceil().max(1.0) as usize)
}

/// Boundary-fitted grid of `Omega^eps = {0 < x1 < 1, -b(x1) < x2 < G_eps(x1)}`.
pub fn mesh_type1(spec: &ProfileSpec, eps: f64, params: &MeshParams) -> Result<Mesh> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("epsilon must be positive, got {eps}")));
    }
    if params.cells_per_period == 0 || params.ny == 0 {
        return Err(Error::Config("cells_per_period and ny must be positive".into()));
    }
    let nx = type1_columns(spec, eps, params.cells_per_period);
    let ny = params.ny;
    let n_tri = 2 * nx * ny;
    if n_tri > params.triangle_cap {
        return Err(Error::Resource(format!(
            "Type I mesh for eps = {eps}, alpha = {} needs {n_tri} triangles (cap {})",
            spec.alpha(),
            params.triangle_cap
        )));
    }
    let stride = ny + 1;
    let mut nodes = Vec::with_capacity((nx + 1) * stride);
    for i in 0..=nx {
        let x = if i == nx { 1.0 } else { i as f64 / nx as f64 };
        let lower = -spec.b().eval(x);
        let height = spec.b().eval(x) + spec.g_eps_at(eps, x);
        for j in 0..=ny {
            let t = j as f64 / ny as f64;
            nodes.push([x, lower + t * height]);
        }
    }
    let id = |i: usize, j: usize| i * stride + j;
    let mut triangles = Vec::with_capacity(n_tri);
    for i in 0..nx {
        for j in 0..ny {
            push_quad(
                &mut triangles,
                &nodes,
                [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)],
            );
        }
    }
    let boundary = tag_boundary(&triangles, |[a, b]| {
        let (ia, ja) = (a / stride, a % stride);
        let (ib, jb) = (b / stride, b % stride);
        if ia == 0 && ib == 0 {
            BoundaryTag::LateralLeft
        } else if ia == nx && ib == nx {
            BoundaryTag::LateralRight
        } else if ja == 0 && jb == 0 {
            BoundaryTag::Bottom
        } else {
            BoundaryTag::Top
        }
    });
    Ok(Mesh {
        nodes,
        triangles,
        boundary,
    })
}

/// Subdivides each gap between sorted, snapped `features` into pieces of
/// length at most `spacing`.
fn subdivide(features: &mut Vec<f64>, spacing: f64) -> Vec<f64> {
    features.sort_by(|a, b| a.total_cmp(b));
    features.dedup_by(|a, b| (*a - *b).abs() <= SNAP_TOL);
    let mut out = vec![features[0]];
    for w in features.windows(2) {
        let k = ((w[1] - w[0]) / spacing - 1e-9).ceil().max(1.0) as usize;
        for s in 1..k {
            out.push(w[0] + (w[1] - w[0]) * s as f64 / k as f64);
        }
        out.push(w[1]);
    }
    out
}

/// Comb-like domain: the base strip over `-b(x1) < x2 < 0` plus the teeth.
///
/// `h` is a spacing in reference-cell units: horizontally it is applied
/// after the `eps^alpha` compression (so every tooth gets the resolution of
/// a reference cell meshed with spacing `h`), vertically as is.
pub fn mesh_type2(spec: &CombSpec, eps: f64, h: f64, triangle_cap: usize) -> Result<Mesh> {
    if !(h > 0.0) {
        return Err(Error::Config("mesh spacing h must be positive".into()));
    }
    let teeth = tooth_layout(spec, eps)?;
    let scale = teeth[0].scale;
    let period = spec.cell_width() * scale;

    let mut features = vec![0.0, 1.0];
    for t in &teeth {
        features.push(t.offset);
        if t.offset + period < 1.0 {
            features.push(t.offset + period);
        }
        for r in spec.cell() {
            features.push(t.map_x(r.x_lo));
            features.push(t.map_x(r.x_hi));
        }
    }
    let xs = subdivide(&mut features, h * scale);
    let nx = xs.len() - 1;

    let mut y_features = vec![0.0];
    for r in spec.cell() {
        y_features.push(r.y_lo);
        y_features.push(r.y_hi);
    }
    let ys = subdivide(&mut y_features, h);

    let ny_base = ((spec.b_bounds().1 / h) - 1e-9).ceil().max(1.0) as usize;

    let inside_tooth = |xc: f64, yc: f64| -> bool {
        let k = (xc / period).floor();
        if k < 1.0 {
            return false;
        }
        let n = k as usize;
        match teeth.get(n - 1).filter(|t| t.n == n) {
            Some(t) => {
                let x1 = (xc - t.offset) / t.scale;
                spec.cell()
                    .iter()
                    .any(|r| x1 > r.x_lo && x1 < r.x_hi && yc > r.y_lo && yc < r.y_hi)
            }
            None => false,
        }
    };
    let mut upper_cells = Vec::new();
    for i in 0..nx {
        let xc = 0.5 * (xs[i] + xs[i + 1]);
        for k in 0..ys.len() - 1 {
            if inside_tooth(xc, 0.5 * (ys[k] + ys[k + 1])) {
                upper_cells.push((i, k));
            }
        }
    }
    let n_tri = 2 * (nx * ny_base + upper_cells.len());
    if n_tri > triangle_cap {
        return Err(Error::Resource(format!(
            "Type II mesh for eps = {eps}, alpha = {} needs {n_tri} triangles (cap {triangle_cap})",
            spec.alpha()
        )));
    }

    let stride = ny_base + 1;
    let mut nodes = Vec::with_capacity((nx + 1) * stride);
    for &x in &xs {
        let depth = spec.b().eval(x);
        for j in 0..=ny_base {
            let t = j as f64 / ny_base as f64;
            nodes.push([x, -depth * (1.0 - t) + 0.0]);
        }
    }
    let base_id = |i: usize, j: usize| i * stride + j;
    let mut triangles = Vec::with_capacity(n_tri);
    for i in 0..nx {
        for j in 0..ny_base {
            push_quad(
                &mut triangles,
                &nodes,
                [
                    base_id(i, j),
                    base_id(i + 1, j),
                    base_id(i + 1, j + 1),
                    base_id(i, j + 1),
                ],
            );
        }
    }
    let mut upper: HashMap<(usize, usize), usize> = HashMap::new();
    let mut upper_id = |i: usize, k: usize, nodes: &mut Vec<[f64; 2]>| -> usize {
        if k == 0 {
            return base_id(i, ny_base);
        }
        *upper.entry((i, k)).or_insert_with(|| {
            nodes.push([xs[i], ys[k]]);
            nodes.len() - 1
        })
    };
    for &(i, k) in &upper_cells {
        let q = [
            upper_id(i, k, &mut nodes),
            upper_id(i + 1, k, &mut nodes),
            upper_id(i + 1, k + 1, &mut nodes),
            upper_id(i, k + 1, &mut nodes),
        ];
        push_quad(&mut triangles, &nodes, q);
    }

    let base_nodes = (nx + 1) * stride;
    let boundary = tag_boundary(&triangles, |[a, b]| {
        let on = |n: usize, x: f64| (nodes[n][0] - x).abs() <= SNAP_TOL;
        if on(a, 0.0) && on(b, 0.0) {
            BoundaryTag::LateralLeft
        } else if on(a, 1.0) && on(b, 1.0) {
            BoundaryTag::LateralRight
        } else if a < base_nodes && b < base_nodes && a % stride == 0 && b % stride == 0 {
            BoundaryTag::Bottom
        } else {
            BoundaryTag::Top
        }
    });
    let mesh = Mesh {
        nodes,
        triangles,
        boundary,
    };
    let report = validate_mesh(&mesh);
    if !report.non_conforming_edges.is_empty() || !report.duplicate_nodes.is_empty() {
        return Err(Error::Mesh(format!(
            "comb mesh for eps = {eps} is not conforming ({} bad edges, {} duplicate nodes)",
            report.non_conforming_edges.len(),
            report.duplicate_nodes.len()
        )));
    }
    Ok(mesh)
}

/// Sides of an axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

/// Uniform `nx x ny` grid of `[0, width] x [0, height]`; edges on the
/// `gamma0` sides carry the `Gamma0` tag.
pub fn mesh_rectangle(width: f64, height: f64, nx: usize, ny: usize, gamma0: &[Side]) -> Result<Mesh> {
    if !(width > 0.0) || !(height > 0.0) || nx == 0 || ny == 0 {
        return Err(Error::Config("rectangle needs positive dimensions and counts".into()));
    }
    let stride = nx + 1;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny { height } else { height * j as f64 / ny as f64 };
        for i in 0..=nx {
            let x = if i == nx { width } else { width * i as f64 / nx as f64 };
            nodes.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * stride + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            push_quad(
                &mut triangles,
                &nodes,
                [id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)],
            );
        }
    }
    let tag_for = |side: Side, plain: BoundaryTag| {
        if gamma0.contains(&side) {
            BoundaryTag::Gamma0
        } else {
            plain
        }
    };
    let boundary = tag_boundary(&triangles, |[a, b]| {
        let (ia, ja) = (a % stride, a / stride);
        let (ib, jb) = (b % stride, b / stride);
        if ja == 0 && jb == 0 {
            tag_for(Side::Bottom, BoundaryTag::Bottom)
        } else if ja == ny && jb == ny {
            tag_for(Side::Top, BoundaryTag::Top)
        } else if ia == 0 && ib == 0 {
            tag_for(Side::Left, BoundaryTag::LateralLeft)
        } else {
            tag_for(Side::Right, BoundaryTag::LateralRight)
        }
    });
    Ok(Mesh {
        nodes,
        triangles,
        boundary,
    })
}

/// Tensor grid of the reference cell `Q0` (spacing at most `h`, all
/// rectangle edges resolved); boundary edges on `{x2 = 0}` are tagged `Gamma0`.
pub fn mesh_cell(spec: &CombSpec, h: f64) -> Result<Mesh> {
    if !(h > 0.0) {
        return Err(Error::Config("mesh spacing h must be positive".into()));
    }
    let mut xf: Vec<f64> = spec.cell().iter().flat_map(|r| [r.x_lo, r.x_hi]).collect();
    let mut yf: Vec<f64> = spec.cell().iter().flat_map(|r| [r.y_lo, r.y_hi]).collect();
    let xs = subdivide(&mut xf, h);
    let ys = subdivide(&mut yf, h);
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut triangles = Vec::new();
    for k in 0..ys.len() - 1 {
        for i in 0..xs.len() - 1 {
            let xc = 0.5 * (xs[i] + xs[i + 1]);
            let yc = 0.5 * (ys[k] + ys[k + 1]);
            if !spec
                .cell()
                .iter()
                .any(|r| xc > r.x_lo && xc < r.x_hi && yc > r.y_lo && yc < r.y_hi)
            {
                continue;
            }
            let mut id = |a: usize, b: usize| {
                *ids.entry((a, b)).or_insert_with(|| {
                    nodes.push([xs[a], ys[b]]);
                    nodes.len() - 1
                })
            };
            let q = [id(i, k), id(i + 1, k), id(i + 1, k + 1), id(i, k + 1)];
            push_quad(&mut triangles, &nodes, q);
        }
    }
    let boundary = tag_boundary(&triangles, |[a, b]| {
        if nodes[a][1] == 0.0 && nodes[b][1] == 0.0 {
            BoundaryTag::Gamma0
        } else {
            BoundaryTag::Top
        }
    });
    Ok(Mesh {
        nodes,
        triangles,
        boundary,
    })
}

/// Outcome of [`validate_mesh`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    /// Triangles with non-positive signed area.
    pub orientation_violations: Vec<usize>,
    /// Edges shared by more than two triangles, single-owner edges missing
    /// from the boundary list, and listed boundary edges that are interior.
    pub non_conforming_edges: Vec<[usize; 2]>,
    pub duplicate_nodes: Vec<(usize, usize)>,
    /// Smallest interior angle in degrees.
    pub min_angle_deg: f64,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.orientation_violations.is_empty()
            && self.non_conforming_edges.is_empty()
            && self.duplicate_nodes.is_empty()
            && self.min_angle_deg > 1.0
    }
}

pub fn validate_mesh(m: &Mesh) -> ValidationReport {
    validate_mesh_scaled(m, 1.0)
}

/// Validation with angles measured after mapping `(x, y) -> (x, y_scale * y)`.
///
/// Rescaled thin-domain meshes are deliberately stretched in `x2`; their
/// element quality is meaningful in the physical coordinates, `y_scale = eps`.
pub fn validate_mesh_scaled(m: &Mesh, y_scale: f64) -> ValidationReport {
    let orientation_violations = (0..m.triangles.len()).filter(|&t| !(m.signed_area(t) > 0.0)).collect();

    let mut count: HashMap<(usize, usize), u32> = HashMap::new();
    for t in &m.triangles {
        for k in 0..3 {
            *count.entry(edge_key(t[k], t[(k + 1) % 3])).or_default() += 1;
        }
    }
    let mut listed: HashMap<(usize, usize), u32> = HashMap::new();
    for e in &m.boundary {
        *listed.entry(edge_key(e.nodes[0], e.nodes[1])).or_default() += 1;
    }
    let mut bad: Vec<[usize; 2]> = Vec::new();
    for (&(a, b), &c) in &count {
        let l = listed.get(&(a, b)).copied().unwrap_or(0);
        if c > 2 || (c == 1 && l != 1) || (c == 2 && l != 0) {
            bad.push([a, b]);
        }
    }
    for &(a, b) in listed.keys() {
        if !count.contains_key(&(a, b)) {
            bad.push([a, b]);
        }
    }
    bad.sort_unstable();

    let mut order: Vec<usize> = (0..m.nodes.len()).collect();
    order.sort_by(|&i, &j| m.nodes[i][0].total_cmp(&m.nodes[j][0]));
    let mut duplicate_nodes = Vec::new();
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if m.nodes[j][0] - m.nodes[i][0] > DUPLICATE_TOL {
                break;
            }
            if (m.nodes[j][1] - m.nodes[i][1]).abs() <= DUPLICATE_TOL {
                duplicate_nodes.push((i.min(j), i.max(j)));
            }
        }
    }
    duplicate_nodes.sort_unstable();

    let mut min_angle = f64::INFINITY;
    for t in &m.triangles {
        let p = t.map(|i| [m.nodes[i][0], y_scale * m.nodes[i][1]]);
        for k in 0..3 {
            let a = p[k];
            let b = p[(k + 1) % 3];
            let c = p[(k + 2) % 3];
            let u = [b[0] - a[0], b[1] - a[1]];
            let v = [c[0] - a[0], c[1] - a[1]];
            let cross = (u[0] * v[1] - u[1] * v[0]).abs();
            let dot = u[0] * v[0] + u[1] * v[1];
            min_angle = min_angle.min(cross.atan2(dot).to_degrees());
        }
    }
    ValidationReport {
        orientation_violations,
        non_conforming_edges: bad,
        duplicate_nodes,
        min_angle_deg: if m.triangles.is_empty() { 0.0 } else { min_angle },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combgeom::{cell_area, Rect};
    use crate::geometry::{ScalarFunction1D, Waveform};
    use crate::quadrature;
    use approx::assert_relative_eq;

    fn sine_profile(alpha: f64) -> ProfileSpec {
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

    fn params(cpp: usize, ny: usize) -> MeshParams {
        MeshParams {
            cells_per_period: cpp,
            ny,
            ..MeshParams::default()
        }
    }

    #[test]
    fn flat_domain_triangle_count() {
        let spec = ProfileSpec::flat(1.0, 1.0, 1.5).unwrap();
        let m = mesh_type1(&spec, 0.1, &params(4, 2)).unwrap();
        assert_eq!(m.triangle_count(), 16);
        assert!(validate_mesh(&m).is_valid());
        assert_relative_eq!(m.total_area(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn oscillating_domain_triangle_count() {
        let spec = sine_profile(2.0);
        let m = mesh_type1(&spec, 0.1, &params(8, 8)).unwrap();
        assert_eq!(m.triangle_count(), 12800);
        let report = validate_mesh_scaled(&m, 0.1);
        assert!(report.orientation_violations.is_empty());
        assert!(report.non_conforming_edges.is_empty());
        assert!(report.duplicate_nodes.is_empty());
    }

    #[test]
    fn triangle_cap_is_enforced() {
        let spec = sine_profile(2.0);
        let p = MeshParams {
            triangle_cap: 1000,
            ..params(8, 8)
        };
        let err = mesh_type1(&spec, 0.1, &p).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
        let msg = err.to_string();
        assert!(msg.contains("eps = 0.1") && msg.contains("alpha = 2"), "{msg}");
    }

    #[test]
    fn type1_area_matches_trapezoid_rule_and_converges() {
        let spec = sine_profile(1.5);
        let eps = 0.2;
        let m = mesh_type1(&spec, eps, &params(8, 4)).unwrap();
        let nx = type1_columns(&spec, eps, 8);
        let height = |x: f64| 1.0 + spec.g_eps_at(eps, x);
        let trapezoid: f64 = (0..nx)
            .map(|i| {
                let (a, b) = (i as f64 / nx as f64, (i + 1) as f64 / nx as f64);
                0.5 * (b - a) * (height(a) + height(b))
            })
            .sum();
        assert!((m.total_area() - trapezoid).abs() <= 10.0 * f64::EPSILON * trapezoid * nx as f64);
        let exact = quadrature::composite(quadrature::gl8(), 0.0, 1.0, 4096, height);
        let fine = mesh_type1(&spec, eps, &params(64, 4)).unwrap();
        let e_coarse = (m.total_area() - exact).abs();
        let e_fine = (fine.total_area() - exact).abs();
        assert!(e_fine < e_coarse / 40.0, "{e_coarse} -> {e_fine}");
    }

    #[test]
    fn type1_refinement_is_nested() {
        let spec = ProfileSpec::new(
            ScalarFunction1D::poly(vec![1.0, 0.5]).unwrap(),
            Waveform::Triangle,
            ScalarFunction1D::constant(0.2),
            ScalarFunction1D::constant(1.0),
            ScalarFunction1D::constant(1.0),
            1.5,
        )
        .unwrap();
        let coarse = mesh_type1(&spec, 0.2, &params(4, 4)).unwrap();
        let fine = mesh_type1(&spec, 0.2, &params(8, 8)).unwrap();
        let set: std::collections::HashSet<(u64, u64)> =
            fine.nodes.iter().map(|p| (p[0].to_bits(), p[1].to_bits())).collect();
        assert!(coarse
            .nodes
            .iter()
            .all(|p| set.contains(&(p[0].to_bits(), p[1].to_bits()))));
    }

    #[test]
    fn type1_tags_partition_the_boundary() {
        let spec = sine_profile(1.5);
        let m = mesh_type1(&spec, 0.2, &params(8, 4)).unwrap();
        let nx = type1_columns(&spec, 0.2, 8);
        let count = |tag| m.boundary.iter().filter(|e| e.tag == tag).count();
        assert_eq!(count(BoundaryTag::LateralLeft), 4);
        assert_eq!(count(BoundaryTag::LateralRight), 4);
        assert_eq!(count(BoundaryTag::Bottom), nx);
        assert_eq!(count(BoundaryTag::Top), nx);
        assert_eq!(m.boundary.len(), 2 * nx + 8);
    }

    #[test]
    fn comb_mesh_is_conforming_with_expected_area() {
        let spec = CombSpec::new(
            ScalarFunction1D::constant(1.0),
            2.0,
            1.0,
            vec![Rect::new(0.0, 1.0, 0.0, 1.0)],
            1.5,
        )
        .unwrap();
        let m = mesh_type2(&spec, 0.25, 0.25, 200_000).unwrap();
        let report = validate_mesh(&m);
        assert!(report.is_valid(), "{report:?}");
        assert_relative_eq!(m.total_area(), 1.0 + 3.0 * 0.125 * cell_area(&spec), epsilon = 1e-13);
        assert!(m.boundary.iter().all(|e| e.tag != BoundaryTag::Interface));
    }

    #[test]
    fn comb_mesh_with_composite_cell_and_variable_depth() {
        let spec = CombSpec::new(
            ScalarFunction1D::poly(vec![1.0, 0.5]).unwrap(),
            1.0,
            1.5,
            vec![
                Rect::new(0.2, 0.5, 0.0, 1.0),
                Rect::new(0.5, 0.8, 0.0, 0.4),
                Rect::new(0.5, 0.7, 0.4, 1.5),
            ],
            1.5,
        )
        .unwrap();
        let eps = 0.2;
        let m = mesh_type2(&spec, eps, 0.1, 200_000).unwrap();
        assert!(validate_mesh_scaled(&m, eps).is_valid());
        let teeth = tooth_layout(&spec, eps).unwrap().len() as f64;
        // linear b is integrated exactly by the mapped base grid
        let expected = 1.25 + teeth * eps.powf(1.5) * cell_area(&spec);
        assert_relative_eq!(m.total_area(), expected, epsilon = 1e-12);
    }

    #[test]
    fn comb_mesh_without_teeth_is_an_error() {
        let spec = CombSpec::new(
            ScalarFunction1D::constant(1.0),
            1.0,
            1.0,
            vec![Rect::new(0.0, 1.0, 0.0, 1.0)],
            1.5,
        )
        .unwrap();
        assert!(matches!(mesh_type2(&spec, 1.0, 0.1, 200_000), Err(Error::Config(_))));
    }

    #[test]
    fn rectangle_counts_and_gamma0() {
        let m = mesh_rectangle(1.0, 1.0, 1, 1, &[]).unwrap();
        assert_eq!((m.node_count(), m.triangle_count()), (4, 2));
        let eps: f64 = 0.2;
        let a = eps.powf(1.5);
        let m = mesh_rectangle(2.0 * a, 1.0, 64, 64, &[Side::Bottom]).unwrap();
        assert_eq!(m.triangle_count(), 8192);
        let g: Vec<_> = m.boundary.iter().filter(|e| e.tag == BoundaryTag::Gamma0).collect();
        assert_eq!(g.len(), 64);
        assert!(g
            .iter()
            .all(|e| m.nodes[e.nodes[0]][1] == 0.0 && m.nodes[e.nodes[1]][1] == 0.0));
        assert!(!m.boundary.iter().any(|e| e.tag == BoundaryTag::Bottom));
        assert!(validate_mesh_scaled(&m, eps).orientation_violations.is_empty());
    }

    #[test]
    fn validator_flags_swapped_triangle() {
        let mut m = mesh_rectangle(1.0, 1.0, 2, 2, &[]).unwrap();
        assert!(validate_mesh(&m).is_valid());
        m.triangles[3].swap(0, 1);
        let r = validate_mesh(&m);
        assert_eq!(r.orientation_violations, vec![3]);
        assert!(!r.is_valid());
    }

    #[test]
    fn validator_flags_naive_concatenation() {
        let left = mesh_rectangle(1.0, 1.0, 1, 1, &[]).unwrap();
        let right = mesh_rectangle(1.0, 1.0, 1, 2, &[]).unwrap().translate(1.0, 0.0);
        let offset = left.node_count();
        let mut m = left.clone();
        m.nodes.extend(&right.nodes);
        m.triangles
            .extend(right.triangles.iter().map(|t| t.map(|i| i + offset)));
        // keep only the outer boundary, as if the seam were interior
        m.boundary.retain(|e| e.tag != BoundaryTag::LateralRight);
        m.boundary.extend(
            right
                .boundary
                .iter()
                .filter(|e| e.tag != BoundaryTag::LateralLeft)
                .map(|e| BoundaryEdge {
                    nodes: e.nodes.map(|i| i + offset),
                    tag: e.tag,
                }),
        );
        let r = validate_mesh(&m);
        assert!(!r.non_conforming_edges.is_empty());
        assert!(!r.duplicate_nodes.is_empty());
        assert!(!r.is_valid());
    }

    #[test]
    fn cell_mesh_tags_gamma0_on_base_only() {
        let spec = CombSpec::new(
            ScalarFunction1D::constant(1.0),
            1.0,
            1.0,
            vec![Rect::new(0.1, 0.4, 0.0, 1.0), Rect::new(0.6, 0.9, 0.5, 1.0)],
            1.5,
        )
        .unwrap();
        let m = mesh_cell(&spec, 0.05).unwrap();
        assert!(validate_mesh(&m).is_valid());
        assert_relative_eq!(m.total_area(), 0.3 + 0.15, epsilon = 1e-14);
        let g = m.tagged_nodes(BoundaryTag::Gamma0);
        assert!(g.iter().all(|&n| m.nodes[n][1] == 0.0 && m.nodes[n][0] <= 0.4 + 1e-15));
        assert_eq!(g.len(), 7);
    }

    #[test]
    fn text_round_trip() {
        let spec = sine_profile(1.5);
        let m = mesh_type1(&spec, 0.3, &params(4, 2)).unwrap();
        let text = m.to_text();
        assert!(text.starts_with(&format!("nodes {}\n", m.node_count())));
        let back = Mesh::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert!(Mesh::from_text("nodes 1\n0 0.0\n").is_err());
    }
}
