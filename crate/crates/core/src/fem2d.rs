//! Piecewise-linear finite elements for `-d1 u_11 - d2 u_22 + u = f` with
//! natural boundary conditions, plus the mixed Dirichlet eigenproblem.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::ProfileSpec;
use crate::mesh::{mesh_type1, validate_mesh, BoundaryTag, Mesh, MeshParams};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 200_000;
pub const EIGEN_TOL: f64 = 1e-8;

/// Diffusion pair `(d1, d2)`; the rescaled thin problem uses `(1, 1/eps^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aniso {
    pub d1: f64,
    pub d2: f64,
}

impl Aniso {
    pub const ISOTROPIC: Aniso = Aniso { d1: 1.0, d2: 1.0 };

    pub fn rescaled(eps: f64) -> Self {
        Aniso {
            d1: 1.0,
            d2: 1.0 / (eps * eps),
        }
    }
}

/// Square sparse matrix in compressed row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Zero matrix with the node-adjacency pattern of `mesh`.
    fn pattern(mesh: &Mesh) -> Self {
        let n = mesh.nodes.len();
        let mut adj: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for t in &mesh.triangles {
            for &a in t {
                for &b in t {
                    adj[a].push(b);
                }
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        CsrMatrix {
            row_ptr,
            col_idx,
            values: vec![0.0; nnz],
        }
    }

    pub fn dim(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let cols = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        cols.binary_search(&j).ok().map(|k| self.row_ptr[i] + k)
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.slot(i, j).expect("entry outside sparsity pattern");
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.slot(i, j).map_or(0.0, |k| self.values[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.matvec(x, &mut y);
        y
    }

    /// `self + s * other`; both must share the pattern.
    fn axpy(&self, s: f64, other: &CsrMatrix) -> CsrMatrix {
        debug_assert_eq!(self.col_idx, other.col_idx);
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v += s * w;
        }
        out
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for i in 0..self.dim() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                worst = worst.max((self.values[k] - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// Replaces rows and columns of `fixed` entries by `diag * e_i`.
    fn eliminate(&mut self, fixed: &[bool], diag: f64) {
        for i in 0..self.dim() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if fixed[i] || fixed[j] {
                    self.values[k] = if i == j { diag } else { 0.0 };
                }
            }
        }
    }

    /// Triplet text (`%%MatrixMarket matrix coordinate real general`), 1-based.
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "%%MatrixMarket matrix coordinate real general");
        let _ = writeln!(out, "{} {} {}", self.dim(), self.dim(), self.nnz());
        for i in 0..self.dim() {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let _ = writeln!(out, "{} {} {:?}", i + 1, self.col_idx[k] + 1, self.values[k]);
            }
        }
        out
    }
}

fn element_gradients(m: &Mesh, t: [usize; 3]) -> (f64, [f64; 3], [f64; 3]) {
    let p = t.map(|i| m.nodes[i]);
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let mut bx = [0.0; 3];
    let mut by = [0.0; 3];
    for k in 0..3 {
        let j = p[(k + 1) % 3];
        let l = p[(k + 2) % 3];
        bx[k] = (j[1] - l[1]) / (2.0 * area);
        by[k] = (l[0] - j[0]) / (2.0 * area);
    }
    (area, bx, by)
}

/// Assembled system `(K + M) u = rhs` with the pieces kept apart.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub mesh: Arc<Mesh>,
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
}

impl SparseSystem {
    pub fn dofs(&self) -> usize {
        self.rhs.len()
    }
}

fn check_mesh(m: &Mesh) -> Result<()> {
    if m.triangles.is_empty() {
        return Err(Error::Mesh("mesh has no triangles".into()));
    }
    if m.triangles.iter().flatten().any(|&i| i >= m.nodes.len()) {
        return Err(Error::Mesh("triangle references a missing node".into()));
    }
    let r = validate_mesh(m);
    if !r.orientation_violations.is_empty() {
        return Err(Error::Mesh(format!(
            "{} triangles are not counterclockwise",
            r.orientation_violations.len()
        )));
    }
    if !r.non_conforming_edges.is_empty() || !r.duplicate_nodes.is_empty() {
        return Err(Error::Mesh("mesh is not conforming".into()));
    }
    Ok(())
}

/// Stiffness `K` for `aniso` and consistent mass `M`.
pub fn assemble_matrices(mesh: &Mesh, aniso: Aniso) -> Result<(CsrMatrix, CsrMatrix)> {
    if !(aniso.d1 > 0.0 && aniso.d2 > 0.0) {
        return Err(Error::Precondition("diffusion coefficients must be positive".into()));
    }
    check_mesh(mesh)?;
    let mut k = CsrMatrix::pattern(mesh);
    let mut m = k.clone();
    for &t in &mesh.triangles {
        let (area, bx, by) = element_gradients(mesh, t);
        for a in 0..3 {
            for b in 0..3 {
                k.add(t[a], t[b], area * (aniso.d1 * bx[a] * bx[b] + aniso.d2 * by[a] * by[b]));
                m.add(t[a], t[b], area / 12.0 * if a == b { 2.0 } else { 1.0 });
            }
        }
    }
    Ok((k, m))
}

/// Load vector with edge-midpoint quadrature.
pub fn load_vector(mesh: &Mesh, f: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut rhs = vec![0.0; mesh.nodes.len()];
    for (ti, &t) in mesh.triangles.iter().enumerate() {
        let area = mesh.signed_area(ti);
        let p = t.map(|i| mesh.nodes[i]);
        // fm[k]: midpoint of the edge opposite vertex k
        let fm: [f64; 3] = std::array::from_fn(|k| {
            let a = p[(k + 1) % 3];
            let b = p[(k + 2) % 3];
            f(0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]))
        });
        for k in 0..3 {
            rhs[t[k]] += area / 6.0 * (fm[(k + 1) % 3] + fm[(k + 2) % 3]);
        }
    }
    rhs
}

pub fn assemble(mesh: Arc<Mesh>, f: &dyn Fn(f64, f64) -> f64, aniso: Aniso) -> Result<SparseSystem> {
    let (stiffness, mass) = assemble_matrices(&mesh, aniso)?;
    let matrix = stiffness.axpy(1.0, &mass);
    let rhs = load_vector(&mesh, f);
    Ok(SparseSystem {
        mesh,
        stiffness,
        mass,
        matrix,
        rhs,
    })
}

/// Nodal P1 field.
#[derive(Debug, Clone)]
pub struct Field {
    pub mesh: Arc<Mesh>,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.nodes.len() {
            return Err(Error::Numeric(format!(
                "field has {} values for {} nodes",
                values.len(),
                mesh.nodes.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("field has non-finite values".into()));
        }
        Ok(Field { mesh, values })
    }

    pub fn interpolate(mesh: Arc<Mesh>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = mesh.nodes.iter().map(|p| f(p[0], p[1])).collect();
        Field { mesh, values }
    }

    /// CSV `node_id,x1,x2,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node_id,x1,x2,value\n");
        for (i, (p, v)) in self.mesh.nodes.iter().zip(&self.values).enumerate() {
            let _ = writeln!(out, "{i},{:?},{:?},{:?}", p[0], p[1], v);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final preconditioned residual relative to the initial one.
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients from a zero initial guess.
///
/// Stops once `sqrt(r.z) <= tol * sqrt(r0.z0)`.
pub fn pcg(a: &CsrMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { f64::NAN })
        .collect();
    if inv_diag.iter().any(|d| d.is_nan()) {
        return Err(Error::Numeric("matrix has a non-positive diagonal entry".into()));
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut rz = dot(&r, &z);
    let initial = rz.sqrt();
    if initial == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Numeric(format!(
                "matrix is not positive definite (p.Ap = {pap:e})"
            )));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let rel = rz_new.max(0.0).sqrt() / initial;
        if rel <= tol {
            return Ok((
                x,
                SolveStats {
                    iterations: it,
                    residual: rel,
                },
            ));
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rel = rz.max(0.0).sqrt() / initial;
    Err(Error::Convergence {
        msg: format!("conjugate gradients did not converge in {max_iter} iterations"),
        residual: rel,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn solve(sys: &SparseSystem, tol: f64, max_iter: usize) -> Result<(Field, SolveStats)> {
    let (x, stats) = pcg(&sys.matrix, &sys.rhs, tol, max_iter)?;
    Ok((Field::new(sys.mesh.clone(), x)?, stats))
}

/// `L2` norms of a field and of its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub dx1: f64,
    pub dx2: f64,
    pub dx2_over_eps: f64,
}

/// Exact integrals of the P1 field and its piecewise-constant gradient.
pub fn norms(u: &Field, eps: f64) -> Norms {
    let m = &*u.mesh;
    let (mut l2, mut g1, mut g2) = (0.0, 0.0, 0.0);
    for &t in &m.triangles {
        let (area, bx, by) = element_gradients(m, t);
        let v = t.map(|i| u.values[i]);
        let sum: f64 = v.iter().sum();
        let sq: f64 = v.iter().map(|x| x * x).sum();
        l2 += area / 12.0 * (sq + sum * sum);
        let d1: f64 = (0..3).map(|k| v[k] * bx[k]).sum();
        let d2: f64 = (0..3).map(|k| v[k] * by[k]).sum();
        g1 += area * d1 * d1;
        g2 += area * d2 * d2;
    }
    Norms {
        l2: l2.sqrt(),
        dx1: g1.sqrt(),
        dx2: g2.sqrt(),
        dx2_over_eps: g2.sqrt() / eps,
    }
}

/// `||u - u0(x1)||` over the mesh with edge-midpoint quadrature.
pub fn l2_distance_to_1d(u: &Field, u0: &dyn Fn(f64) -> f64) -> f64 {
    let m = &*u.mesh;
    let mut sum = 0.0;
    for (ti, &t) in m.triangles.iter().enumerate() {
        let area = m.signed_area(ti);
        for k in 0..3 {
            let (a, b) = (t[(k + 1) % 3], t[(k + 2) % 3]);
            let x1 = 0.5 * (m.nodes[a][0] + m.nodes[b][0]);
            let d = 0.5 * (u.values[a] + u.values[b]) - u0(x1);
            sum += area / 3.0 * d * d;
        }
    }
    sum.sqrt()
}

/// Solves `-Laplace w + w = h` on the physical thin domain `R^eps`, meshed as
/// the image of the `Omega^eps` mesh under `(x, y) -> (x, eps y)`, with
/// `h(x1, x2) = f(x1, x2 / eps)`.
pub fn solve_thin_unscaled(
    spec: &ProfileSpec,
    eps: f64,
    params: &MeshParams,
    f: &dyn Fn(f64, f64) -> f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Field, SolveStats)> {
    let mesh = Arc::new(mesh_type1(spec, eps, params)?.scale_y(eps));
    let h = |x1: f64, x2: f64| f(x1, x2 / eps);
    let sys = assemble(mesh, &h, Aniso::ISOTROPIC)?;
    solve(&sys, tol, max_iter)
}

/// Solves `-d1 u_11 - d2 u_22 + reaction u = 0` with `u = g` on edges
/// tagged `tag` and natural conditions elsewhere.
pub fn solve_dirichlet(
    mesh: Arc<Mesh>,
    aniso: Aniso,
    reaction: f64,
    tag: BoundaryTag,
    g: &dyn Fn(f64, f64) -> f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Field, SolveStats)> {
    let (k, m) = assemble_matrices(&mesh, aniso)?;
    let mut a = k.axpy(reaction, &m);
    let n = mesh.nodes.len();
    let mut fixed = vec![false; n];
    let mut lifted = vec![0.0; n];
    let tagged = mesh.tagged_nodes(tag);
    if tagged.is_empty() {
        return Err(Error::Precondition(format!(
            "no boundary edges tagged {}",
            tag.as_str()
        )));
    }
    for &i in &tagged {
        fixed[i] = true;
        lifted[i] = g(mesh.nodes[i][0], mesh.nodes[i][1]);
    }
    let shift = a.apply(&lifted);
    let mut rhs: Vec<f64> = shift.iter().map(|s| -s).collect();
    a.eliminate(&fixed, 1.0);
    for i in 0..n {
        if fixed[i] {
            rhs[i] = 0.0;
        }
    }
    let (mut x, stats) = pcg(&a, &rhs, tol, max_iter)?;
    for i in 0..n {
        x[i] += lifted[i];
    }
    Ok((Field::new(mesh, x)?, stats))
}

/// Smallest eigenvalue of the stiffness form on functions vanishing at
/// `Gamma0` nodes, relative to the mass form, by inverse iteration.
///
/// Without `Gamma0` edges the answer is the Neumann pair `(0, 1)`.
pub fn eigen_first(mesh: Arc<Mesh>, aniso: Aniso) -> Result<(f64, Field)> {
    let (mut k, mut m) = assemble_matrices(&mesh, aniso)?;
    let n = mesh.nodes.len();
    let tagged = mesh.tagged_nodes(BoundaryTag::Gamma0);
    if tagged.is_empty() {
        return Ok((0.0, Field::new(mesh, vec![1.0; n])?));
    }
    let mut fixed = vec![false; n];
    for &i in &tagged {
        fixed[i] = true;
    }
    k.eliminate(&fixed, 1.0);
    m.eliminate(&fixed, 0.0);

    let mut x: Vec<f64> = fixed.iter().map(|&f| if f { 0.0 } else { 1.0 }).collect();
    let mut lambda = f64::INFINITY;
    const MAX_STEPS: usize = 1000;
    for _ in 0..MAX_STEPS {
        let mx = m.apply(&x);
        let (y, _) = pcg(&k, &mx, 1e-13, 20 * n + 100)?;
        let ky = k.apply(&y);
        let my = m.apply(&y);
        let ymy = dot(&y, &my);
        if !(ymy > 0.0) {
            return Err(Error::Numeric("inverse iteration collapsed".into()));
        }
        let next = dot(&y, &ky) / ymy;
        let norm = ymy.sqrt();
        x = y.iter().map(|v| v / norm).collect();
        if (next - lambda).abs() <= EIGEN_TOL * next.abs() {
            if x.iter().sum::<f64>() < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            return Ok((next, Field::new(mesh, x)?));
        }
        lambda = next;
    }
    Err(Error::Convergence {
        msg: format!("inverse iteration stagnated after {MAX_STEPS} steps"),
        residual: lambda,
    })
}
