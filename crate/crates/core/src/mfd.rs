//! Mimetic finite differences for the mixed Poisson problem
//! `p = α∇u`, `−div p = f`, `u = 0` on the boundary.
//!
//! Unknowns are one value `u_K` per cell and one flux `p_e` per face along
//! the canonical normal, so `φ_{K,e} = ±p_e` is continuous by storage. With
//! `B_{K,e} = ±|e|` and the flux Gram matrix `M`, the discrete problem is
//!
//! ```text
//! [ M  Bᵀ ] [p]   [  0  ]
//! [ B  0  ] [u] = [ −b  ]      b_K = |K| (I f)_K
//! ```
//!
//! and the flux operator is `F_h = −M⁻¹Bᵀ`, minus the adjoint of `div_h`.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::functional::{DiscreteFunctional, IdentityDefect, Space};
use crate::linalg::dense::symmetric_eigenvalues;
use crate::linalg::{cg_solve_operator, dot, saddle_solve, CgOptions, SaddleSystem, SparseMatrix};
use crate::mesh::quadrature::{cell_points, face_points, integrate_cell, CellQuadrature, FaceQuadrature};
use crate::mesh::{CenteredMesh, Point, PolyMesh};
use crate::par;
use crate::problem::{Diffusivity, ScalarField};
use crate::{Error, Result};

/// How the cell inner products `[·,·]_K` on face fluxes are built.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub enum InnerProductMode {
    /// `∫_K α⁻¹ lift(p)·lift(q)` with the lowest-order face lifting
    /// (triangles, axis-aligned rectangles, intervals).
    #[default]
    Rt0Lifting,
    /// `Σ_e α_K⁻¹ p_{K,e} q_{K,e} |e| d_{K,e}`: scalar `α`, admissible meshes.
    DiagonalTpfa,
}

impl InnerProductMode {
    pub fn name(&self) -> &'static str {
        match self {
            InnerProductMode::Rt0Lifting => "rt0",
            InnerProductMode::DiagonalTpfa => "diagonal",
        }
    }
}

/// Cell shapes with an explicit lifting.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Shape {
    Interval,
    Triangle,
    Rectangle,
}

/// Per-cell Gram matrices over local outward face values, plus the mode.
#[derive(Clone, Debug)]
pub struct CellInnerProduct {
    pub mode: InnerProductMode,
    /// Row-major `m_K × m_K` matrices, local face order.
    pub cells: Vec<Vec<f64>>,
}

impl CellInnerProduct {
    pub fn local(&self, k: usize) -> &[f64] {
        &self.cells[k]
    }

    /// Smallest eigenvalue over all cell matrices.
    pub fn min_eigenvalue(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| {
                let m = (c.len() as f64).sqrt() as usize;
                let rows: Vec<Vec<f64>> = c.chunks(m).map(|r| r.to_vec()).collect();
                symmetric_eigenvalues(&rows).into_iter().fold(f64::INFINITY, f64::min)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Worst per-cell defects of the lifting consistency conditions.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct LiftingReport {
    /// `|lift(p)·n_e − p_e|` at face quadrature points.
    pub normal_trace: f64,
    /// `|div lift(p) − div_K p|`.
    pub divergence: f64,
    /// `|lift(I c) − c|` at cell quadrature points.
    pub constant: f64,
    /// `|[I c, q]_K − ∫_K α⁻¹ c·lift(q)|`, scaled by `|K|`.
    pub consistency: f64,
}

impl LiftingReport {
    pub fn max(&self) -> f64 {
        self.normal_trace.max(self.divergence).max(self.constant).max(self.consistency)
    }
}

/// Discrete solution `(u_h, p_h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixedState {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
}

impl MixedState {
    /// CSV with columns `cell,u`.
    pub fn cells_csv(&self) -> String {
        let mut out = String::from("cell,u\n");
        for (k, v) in self.u.iter().enumerate() {
            writeln!(out, "{k},{v}").unwrap();
        }
        out
    }

    /// CSV with columns `face,flux`.
    pub fn faces_csv(&self) -> String {
        let mut out = String::from("face,flux\n");
        for (f, v) in self.p.iter().enumerate() {
            writeln!(out, "{f},{v}").unwrap();
        }
        out
    }

    /// Values laid out as `[u; p]`.
    pub fn stacked(&self) -> Vec<f64> {
        self.u.iter().chain(&self.p).copied().collect()
    }
}

/// `(div_h p)_K = (1/|K|) Σ_e φ_{K,e} |e|` for canonical face fluxes `p`.
pub fn div_h(mesh: &PolyMesh, p: &[f64]) -> Vec<f64> {
    par::map_range(mesh.num_cells(), |k| {
        let cell = &mesh.cells()[k];
        let total: f64 = cell.faces.iter().map(|cf| cf.sign * p[cf.face] * mesh.faces()[cf.face].measure).sum();
        total / cell.measure
    })
}

/// `(I q)_e = (1/|e|) ∫_e q·n_e` along the canonical normal (two-point
/// Gauss on segments, exact for affine `q`).
pub fn interpolate_flux(mesh: &PolyMesh, q: impl Fn(&[f64], &mut [f64]) + Sync + Send) -> Vec<f64> {
    let d = mesh.dim();
    par::map_range(mesh.num_faces(), |f| {
        let face = &mesh.faces()[f];
        let total: f64 = face_points(mesh, f, FaceQuadrature::Gauss2)
            .iter()
            .map(|pt| {
                let mut v = [0.0; 2];
                q(&pt.x[..d], &mut v[..d]);
                pt.weight * dot2(v, face.normal)
            })
            .sum();
        total / face.measure
    })
}

/// Cell averages `(I f)_K`, exact for constant `f`.
pub fn cell_averages(mesh: &PolyMesh, f: &ScalarField, rule: CellQuadrature) -> Vec<f64> {
    if let Some(c) = f.as_constant() {
        return vec![c; mesh.num_cells()];
    }
    let d = mesh.dim();
    par::map_range(mesh.num_cells(), |k| integrate_cell(mesh, k, rule, |x| f.eval(&x[..d])) / mesh.cells()[k].measure)
}

/// `‖I(div q) − div_h(I q)‖_∞`, cell averages taken with `rule`.
pub fn div_commutation_defect(
    mesh: &PolyMesh,
    q: impl Fn(&[f64], &mut [f64]) + Sync + Send,
    div_q: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    rule: CellQuadrature,
) -> f64 {
    let lhs = cell_averages(mesh, &ScalarField::new(div_q), rule);
    let rhs = div_h(mesh, &interpolate_flux(mesh, q));
    lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Mimetic discretization on a fixed mesh with a fixed inner product.
#[derive(Clone, Debug)]
pub struct Mimetic {
    mesh: CenteredMesh,
    alpha: Diffusivity,
    shapes: Vec<Option<Shape>>,
    inner: CellInnerProduct,
    m: SparseMatrix,
    b: SparseMatrix,
    bt: SparseMatrix,
    rule: CellQuadrature,
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot2(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn classify(mesh: &PolyMesh, k: usize) -> Option<Shape> {
    let cell = &mesh.cells()[k];
    if mesh.dim() == 1 {
        return Some(Shape::Interval);
    }
    match cell.vertices.len() {
        3 => Some(Shape::Triangle),
        4 => {
            let tol = 1e-12 * mesh.perimeter(k);
            let axis = (0..4).all(|i| {
                let a = mesh.vertices()[cell.vertices[i]];
                let b = mesh.vertices()[cell.vertices[(i + 1) % 4]];
                (a[0] - b[0]).abs() <= tol || (a[1] - b[1]).abs() <= tol
            });
            axis.then_some(Shape::Rectangle)
        }
        _ => None,
    }
}

impl Mimetic {
    pub fn new(mesh: CenteredMesh, alpha: Diffusivity, mode: InnerProductMode) -> Result<Self> {
        let base = mesh.mesh();
        if alpha.dim() != base.dim() {
            return Err(Error::DimensionMismatch { expected: base.dim(), got: alpha.dim() });
        }
        let shapes: Vec<Option<Shape>> = (0..base.num_cells()).map(|k| classify(base, k)).collect();
        if mode == InnerProductMode::Rt0Lifting {
            if let Some(k) = shapes.iter().position(|s| s.is_none()) {
                return Err(Error::Unsupported(format!(
                    "cell {k} is neither a triangle nor an axis-aligned rectangle"
                )));
            }
        } else {
            if !alpha.is_scalar() {
                return Err(Error::Unsupported("diagonal inner product needs a scalar diffusivity".into()));
            }
            if !mesh.is_admissible() {
                return Err(Error::NotAdmissible(mesh.violations().len()));
            }
        }
        let d = base.dim();
        for k in 0..base.num_cells() {
            alpha.validate_at(&mesh.cell_center(k)[..d])?;
        }
        let mut this = Self {
            mesh,
            alpha,
            shapes,
            inner: CellInnerProduct { mode, cells: Vec::new() },
            m: SparseMatrix::identity(0),
            b: SparseMatrix::identity(0),
            bt: SparseMatrix::identity(0),
            rule: CellQuadrature::Midpoint,
        };
        this.inner = this.build_inner_product(mode);
        this.m = this.assemble_flux_mass();
        this.b = this.assemble_divergence();
        this.bt = this.b.transpose();
        Ok(this)
    }

    /// Quadrature for cell averages of the source.
    pub fn with_quadrature(mut self, rule: CellQuadrature) -> Self {
        self.rule = rule;
        self
    }

    pub fn mesh(&self) -> &CenteredMesh {
        &self.mesh
    }

    pub fn mode(&self) -> InnerProductMode {
        self.inner.mode
    }

    pub fn inner_product(&self) -> &CellInnerProduct {
        &self.inner
    }

    /// Global flux Gram matrix `M`.
    pub fn flux_mass(&self) -> &SparseMatrix {
        &self.m
    }

    /// `B_{K,e} = ±|e|`, so that `(B p)_K = |K| (div_h p)_K`.
    pub fn divergence_matrix(&self) -> &SparseMatrix {
        &self.b
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.mesh().num_cells()
    }

    pub fn num_faces(&self) -> usize {
        self.mesh.mesh().num_faces()
    }

    pub fn space(&self) -> Space {
        Space::MfdMixed { cells: self.num_cells(), faces: self.num_faces() }
    }

    fn alpha_inverse(&self, k: usize, v: Point) -> Point {
        let d = self.mesh.mesh().dim();
        let mut out = [0.0; 3];
        let mut vin = [0.0; 3];
        vin[..2].copy_from_slice(&v);
        self.alpha.apply_inverse(&self.mesh.cell_center(k)[..d], &vin[..d], &mut out[..d]);
        [out[0], out[1]]
    }

    /// Whether cell `k` is a triangle, rectangle or interval.
    pub fn has_lifting(&self, k: usize) -> bool {
        self.shapes[k].is_some()
    }

    /// Lifting basis function of local face `i` of cell `k` at `x`: normal
    /// trace `1` on face `i`, `0` on the others, constant divergence `|e_i|/|K|`.
    ///
    /// Panics if the cell has no lifting (see [`Mimetic::has_lifting`]).
    pub fn lift_basis(&self, k: usize, i: usize, x: Point) -> Point {
        let base = self.mesh.mesh();
        let cell = &base.cells()[k];
        let e = &base.faces()[cell.faces[i].face];
        match self.shapes[k].expect("cell has no lifting") {
            Shape::Triangle => {
                let opposite = base.vertices()[cell.vertices[(i + 2) % 3]];
                let s = e.measure / (2.0 * cell.measure);
                let r = sub(x, opposite);
                [s * r[0], s * r[1]]
            }
            Shape::Interval | Shape::Rectangle => {
                let m = cell.faces.len();
                let opp = base.faces()[cell.faces[(i + m / 2) % m].face].center;
                let n = base.outward_normal(cell.faces[i]);
                let s = e.measure / cell.measure * dot2(sub(x, opp), n);
                [s * n[0], s * n[1]]
            }
        }
    }

    /// `lift(φ)` for local outward face values `φ`.
    pub fn lift(&self, k: usize, phi: &[f64], x: Point) -> Point {
        let mut out = [0.0; 2];
        for (i, v) in phi.iter().enumerate() {
            let b = self.lift_basis(k, i, x);
            out[0] += v * b[0];
            out[1] += v * b[1];
        }
        out
    }

    fn build_inner_product(&self, mode: InnerProductMode) -> CellInnerProduct {
        let base = self.mesh.mesh();
        let d = base.dim();
        let cells = par::map_range(base.num_cells(), |k| {
            let cell = &base.cells()[k];
            let m = cell.faces.len();
            let mut local = vec![0.0; m * m];
            match mode {
                InnerProductMode::Rt0Lifting => {
                    // Refined(1) integrates the quadratic integrands exactly
                    for q in cell_points(base, k, CellQuadrature::Refined(1)) {
                        let basis: Vec<Point> = (0..m).map(|i| self.lift_basis(k, i, q.x)).collect();
                        for i in 0..m {
                            let ai = self.alpha_inverse(k, basis[i]);
                            for j in 0..m {
                                local[i * m + j] += q.weight * dot2(ai, basis[j]);
                            }
                        }
                    }
                    for i in 0..m {
                        for j in 0..i {
                            let avg = 0.5 * (local[i * m + j] + local[j * m + i]);
                            local[i * m + j] = avg;
                            local[j * m + i] = avg;
                        }
                    }
                }
                InnerProductMode::DiagonalTpfa => {
                    let a = self.alpha.scalar_at(&self.mesh.cell_center(k)[..d]).expect("scalar diffusivity");
                    for (i, cf) in cell.faces.iter().enumerate() {
                        local[i * m + i] = base.faces()[cf.face].measure * self.mesh.cell_face_distance(k, i) / a;
                    }
                }
            }
            local
        });
        CellInnerProduct { mode, cells }
    }

    fn assemble_flux_mass(&self) -> SparseMatrix {
        let base = self.mesh.mesh();
        let mut t = Vec::new();
        for (k, cell) in base.cells().iter().enumerate() {
            let m = cell.faces.len();
            let local = self.inner.local(k);
            for (i, a) in cell.faces.iter().enumerate() {
                for (j, b) in cell.faces.iter().enumerate() {
                    t.push((a.face, b.face, a.sign * b.sign * local[i * m + j]));
                }
            }
        }
        SparseMatrix::from_triplets(base.num_faces(), base.num_faces(), &t).with_symmetry(true)
    }

    fn assemble_divergence(&self) -> SparseMatrix {
        let base = self.mesh.mesh();
        let mut t = Vec::new();
        for (k, cell) in base.cells().iter().enumerate() {
            for cf in &cell.faces {
                t.push((k, cf.face, cf.sign * base.faces()[cf.face].measure));
            }
        }
        SparseMatrix::from_triplets(base.num_cells(), base.num_faces(), &t)
    }

    /// Local outward values `φ_{K,e}` of a canonical flux vector.
    pub fn local_fluxes(&self, k: usize, p: &[f64]) -> Vec<f64> {
        self.mesh.mesh().cells()[k].faces.iter().map(|cf| cf.sign * p[cf.face]).collect()
    }

    /// `(div_h p)_K = (1/|K|) Σ_e φ_{K,e} |e|`.
    pub fn div(&self, p: &[f64]) -> Vec<f64> {
        div_h(self.mesh.mesh(), p)
    }

    /// See [`interpolate_flux`].
    pub fn interpolate_flux(&self, q: impl Fn(&[f64], &mut [f64]) + Sync + Send) -> Vec<f64> {
        interpolate_flux(self.mesh.mesh(), q)
    }

    /// Cell averages `(I f)_K`, exact for constant `f`.
    pub fn interpolate_cell(&self, f: &ScalarField) -> Vec<f64> {
        cell_averages(self.mesh.mesh(), f, self.rule)
    }

    /// Checks the three lifting conditions and the consistency of the
    /// inner product against the lifting, with random local data.
    ///
    /// Cells without a lifting are skipped. The diagonal inner product agrees
    /// with the lifting on intervals and rectangles only, so its consistency
    /// is not measured on triangles.
    pub fn lifting_report(&self, seed: u64) -> LiftingReport {
        let base = self.mesh.mesh();
        let d = base.dim();
        let per_cell = par::map_range(base.num_cells(), |k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let cell = &base.cells()[k];
            let m = cell.faces.len();
            let mut rep = LiftingReport::default();
            if !self.has_lifting(k) {
                return rep;
            }
            let phi: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let mut c = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
            if d == 1 {
                c[1] = 0.0;
            }
            let phi_scale = phi.iter().fold(1.0f64, |a, b| a.max(b.abs()));
            // normal traces
            for (j, cf) in cell.faces.iter().enumerate() {
                let n = base.outward_normal(*cf);
                for pt in face_points(base, cf.face, FaceQuadrature::Gauss2) {
                    let v = self.lift(k, &phi, pt.x);
                    rep.normal_trace = rep.normal_trace.max((dot2(v, n) - phi[j]).abs() / phi_scale);
                }
            }
            // divergence by central differences, exact for affine fields
            let step = 0.25 * base.perimeter(k) / m as f64;
            let x0 = cell.centroid;
            let mut div = 0.0;
            for i in 0..d {
                let mut xp = x0;
                let mut xm = x0;
                xp[i] += step;
                xm[i] -= step;
                div += (self.lift(k, &phi, xp)[i] - self.lift(k, &phi, xm)[i]) / (2.0 * step);
            }
            let div_k: f64 = cell
                .faces
                .iter()
                .zip(&phi)
                .map(|(cf, v)| v * base.faces()[cf.face].measure)
                .sum::<f64>()
                / cell.measure;
            rep.divergence = (div - div_k).abs() / (1.0 + div_k.abs());
            // constant reproduction
            let ic: Vec<f64> = cell.faces.iter().map(|cf| dot2(c, base.outward_normal(*cf))).collect();
            let quad = cell_points(base, k, CellQuadrature::Refined(1));
            for q in &quad {
                let v = self.lift(k, &ic, q.x);
                rep.constant = rep.constant.max((v[0] - c[0]).abs().max((v[1] - c[1]).abs()));
            }
            // [I c, φ]_K against ∫ α⁻¹ c·lift(φ)
            let local = self.inner.local(k);
            let lhs: f64 = (0..m).map(|i| (0..m).map(|j| ic[i] * local[i * m + j] * phi[j]).sum::<f64>()).sum();
            let ac = self.alpha_inverse(k, c);
            let rhs: f64 = quad.iter().map(|q| q.weight * dot2(ac, self.lift(k, &phi, q.x))).sum();
            let applicable = self.inner.mode == InnerProductMode::Rt0Lifting || self.shapes[k] != Some(Shape::Triangle);
            if applicable {
                rep.consistency = (lhs - rhs).abs() / cell.measure;
            }
            rep
        });
        per_cell.into_iter().fold(LiftingReport::default(), |a, b| LiftingReport {
            normal_trace: a.normal_trace.max(b.normal_trace),
            divergence: a.divergence.max(b.divergence),
            constant: a.constant.max(b.constant),
            consistency: a.consistency.max(b.consistency),
        })
    }

    /// `b_K = |K| (I f)_K`.
    pub fn load(&self, f: &ScalarField) -> Vec<f64> {
        self.interpolate_cell(f)
            .iter()
            .zip(self.mesh.mesh().cells())
            .map(|(v, c)| v * c.measure)
            .collect()
    }

    pub fn assemble(&self, f: &ScalarField) -> SaddleSystem {
        SaddleSystem {
            m: self.m.clone(),
            b: self.b.clone(),
            rhs_p: vec![0.0; self.num_faces()],
            rhs_u: self.load(f).into_iter().map(|v| -v).collect(),
        }
    }

    pub fn solve(&self, f: &ScalarField, tol: f64) -> Result<MixedState> {
        let sol = saddle_solve(&self.assemble(f), tol)?;
        Ok(MixedState { u: sol.u, p: sol.p })
    }

    /// `F_h u`, the solution of `M w = −Bᵀu`.
    pub fn flux_operator(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.num_cells() {
            return Err(Error::DimensionMismatch { expected: self.num_cells(), got: u.len() });
        }
        let rhs: Vec<f64> = self.bt.mul_vec(u).into_iter().map(|v| -v).collect();
        if rhs.iter().all(|&v| v == 0.0) {
            return Ok(vec![0.0; rhs.len()]);
        }
        let opts = CgOptions { tol: 1e-15, max_iter: 20 * rhs.len() + 200, jacobi: true };
        Ok(cg_solve_operator(&self.m, &rhs, None, opts)?.0)
    }

    /// `|[F_h u, q]_{W_h} + [u, div_h q]_{M_h}|`.
    pub fn adjointness_defect(&self, u: &[f64], q: &[f64]) -> Result<IdentityDefect> {
        let fu = self.flux_operator(u)?;
        let a = dot(&fu, &self.m.mul_vec(q));
        let b: f64 = self
            .div(q)
            .iter()
            .zip(u)
            .zip(self.mesh.mesh().cells())
            .map(|((dq, uk), c)| dq * uk * c.measure)
            .sum();
        Ok(IdentityDefect { absolute: (a + b).abs(), scale: a.abs() + b.abs() })
    }

    /// Residuals of the discretized mixed equations, stacked as `[u; p]`:
    /// `div_h p + I f` per cell, then `M (p − F_h u)` per face.
    pub fn block_residual(&self, state: &[f64], source: &[f64]) -> Result<Vec<f64>> {
        let nc = self.num_cells();
        if state.len() != nc + self.num_faces() {
            return Err(Error::DimensionMismatch { expected: nc + self.num_faces(), got: state.len() });
        }
        let (u, p) = state.split_at(nc);
        let mut out: Vec<f64> = self.div(p).iter().zip(source).map(|(a, b)| a + b).collect();
        let fu = self.flux_operator(u)?;
        let diff: Vec<f64> = p.iter().zip(&fu).map(|(a, b)| a - b).collect();
        out.extend(self.m.mul_vec(&diff));
        Ok(out)
    }

    /// Mass relating [`MfdHamiltonian`]'s gradient to [`Mimetic::block_residual`]:
    /// `−|K|` on cells, `−1` on faces.
    pub fn mixed_mass(&self) -> Vec<f64> {
        self.mesh
            .mesh()
            .cells()
            .iter()
            .map(|c| -c.measure)
            .chain(std::iter::repeat_n(-1.0, self.num_faces()))
            .collect()
    }

    pub fn hamiltonian(&self, f: &ScalarField) -> MfdHamiltonian<'_> {
        MfdHamiltonian { mfd: self, source: self.interpolate_cell(f) }
    }

    /// `(‖u − u(x_K)‖_{M_h}, ‖p − I(α∇u)‖_{W_h})`.
    pub fn errors(
        &self,
        state: &MixedState,
        exact: impl Fn(&[f64]) -> f64,
        flux: impl Fn(&[f64], &mut [f64]) + Sync + Send,
    ) -> (f64, f64) {
        let base = self.mesh.mesh();
        let d = base.dim();
        let u_err: f64 = base
            .cells()
            .iter()
            .enumerate()
            .map(|(k, c)| c.measure * (state.u[k] - exact(&self.mesh.cell_center(k)[..d])).powi(2))
            .sum::<f64>()
            .sqrt();
        let ip = self.interpolate_flux(flux);
        let e: Vec<f64> = state.p.iter().zip(&ip).map(|(a, b)| a - b).collect();
        let p_err = dot(&e, &self.m.mul_vec(&e)).max(0.0).sqrt();
        (u_err, p_err)
    }
}

/// `𝓗_h(u, p) = [p, F_h u]_{W_h} − ½[p, p]_{W_h} − [u, I f]_{M_h}`, evaluated
/// through adjointness as `−uᵀB p − ½ pᵀM p − uᵀb`. Unknowns are `[u; p]`.
pub struct MfdHamiltonian<'a> {
    mfd: &'a Mimetic,
    source: Vec<f64>,
}

impl MfdHamiltonian<'_> {
    /// `I f`, shared with [`Mimetic::block_residual`].
    pub fn source(&self) -> &[f64] {
        &self.source
    }

    fn weighted_source(&self) -> Vec<f64> {
        self.source.iter().zip(self.mfd.mesh.mesh().cells()).map(|(f, c)| f * c.measure).collect()
    }
}

impl DiscreteFunctional for MfdHamiltonian<'_> {
    fn space(&self) -> Space {
        self.mfd.space()
    }

    fn eval(&self, state: &[f64]) -> f64 {
        let (u, p) = state.split_at(self.mfd.num_cells());
        let bp = self.mfd.b.mul_vec(p);
        let mp = self.mfd.m.mul_vec(p);
        -dot(u, &bp) - 0.5 * dot(p, &mp) - dot(u, &self.weighted_source())
    }

    /// `∂_u = −(B p + b)`, `∂_p = −(Bᵀu + M p)`.
    fn gradient(&self, state: &[f64]) -> Vec<f64> {
        let (u, p) = state.split_at(self.mfd.num_cells());
        let bp = self.mfd.b.mul_vec(p);
        let btu = self.mfd.bt.mul_vec(u);
        let mp = self.mfd.m.mul_vec(p);
        let b = self.weighted_source();
        bp.iter()
            .zip(&b)
            .map(|(x, y)| -(x + y))
            .chain(btu.iter().zip(&mp).map(|(x, y)| -(x + y)))
            .collect()
    }

    fn is_quadratic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate::{cartesian, uniform_interval};

    fn mimetic(mesh: PolyMesh, mode: InnerProductMode) -> Mimetic {
        let d = mesh.dim();
        Mimetic::new(CenteredMesh::centroidal(mesh).unwrap(), Diffusivity::identity(d), mode).unwrap()
    }

    #[test]
    fn diagonal_half_cell_weights() {
        let s = mimetic(uniform_interval(2).unwrap(), InnerProductMode::DiagonalTpfa);
        assert_eq!(s.inner_product().local(0), &[0.25, 0.0, 0.0, 0.25]);
    }

    #[test]
    fn two_cell_solution_matches_hand_values() {
        let s = mimetic(uniform_interval(2).unwrap(), InnerProductMode::DiagonalTpfa);
        let st = s.solve(&ScalarField::constant(1.0), 1e-14).unwrap();
        for u in &st.u {
            assert!((u - 0.125).abs() < 1e-13);
        }
        // fluxes of the FV solution: −½, 0, −½ along canonical normals
        let expected = [-0.5, 0.0, -0.5];
        for (p, e) in st.p.iter().zip(expected) {
            assert!((p - e).abs() < 1e-12);
        }
        let h = s.hamiltonian(&ScalarField::constant(1.0));
        assert!((h.eval(&st.stacked()) + 1.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn flux_operator_reproduces_tpfa_pattern() {
        let s = mimetic(uniform_interval(2).unwrap(), InnerProductMode::DiagonalTpfa);
        let u = [0.3, -0.7];
        let fu = s.flux_operator(&u).unwrap();
        let expected = [-0.3 / 0.25, (-0.7 - 0.3) / 0.5, 0.7 / 0.25];
        for (a, b) in fu.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{fu:?}");
        }
    }

    #[test]
    fn unit_square_divergence() {
        let s = mimetic(cartesian(1, 1).unwrap(), InnerProductMode::Rt0Lifting);
        let p = s.interpolate_flux(|x, q| {
            q[0] = x[0];
            q[1] = 0.0;
        });
        let m = s.mesh().mesh();
        for (f, face) in m.faces().iter().enumerate() {
            let expected = if face.center == [1.0, 0.5] { 1.0 } else { 0.0 };
            assert!((p[f] - expected).abs() < 1e-15);
        }
        assert!((s.div(&p)[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_data() {
        let s = mimetic(cartesian(2, 2).unwrap(), InnerProductMode::Rt0Lifting);
        let st = s.solve(&ScalarField::constant(0.0), 1e-12).unwrap();
        assert!(st.u.iter().chain(&st.p).all(|&v| v == 0.0));
        let h = s.hamiltonian(&ScalarField::constant(3.0));
        assert_eq!(h.eval(&[0.0; 4 + 12]), 0.0);
    }

    #[test]
    fn diagonal_mode_rejects_tensor_diffusivity() {
        let mesh = CenteredMesh::centroidal(cartesian(2, 2).unwrap()).unwrap();
        let alpha = Diffusivity::diagonal(&[1.0, 2.0]).unwrap();
        assert!(Mimetic::new(mesh, alpha, InnerProductMode::DiagonalTpfa).is_err());
    }

    #[test]
    fn rt0_rejects_general_polygons() {
        let mesh = crate::mesh::generate::perturbed_cartesian(3, 0.05).unwrap();
        let cm = CenteredMesh::centroidal(mesh).unwrap();
        assert!(matches!(
            Mimetic::new(cm, Diffusivity::identity(2), InnerProductMode::Rt0Lifting),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let st = MixedState { u: vec![0.5], p: vec![1.0, -2.0] };
        assert_eq!(st.cells_csv(), "cell,u\n0,0.5\n");
        assert_eq!(st.faces_csv(), "face,flux\n0,1\n1,-2\n");
    }
}
