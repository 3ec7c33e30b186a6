//! Conforming P1 finite elements on interval and triangle meshes.
//!
//! Both embeddings integrate with the quadrature stored in [`P1Space`]. The
//! variational side samples `(u_h, ∇u_h)` at every quadrature point through
//! a sparse sampling matrix `S` and differentiates `Σ_q w_q L(S u)` as
//! `Sᵀ (w ∂L)`; the differential side loops over cells and integrates the
//! weak form against each shape function.

use std::fmt::Write as _;

use crate::functional::{find_extremal, DiscreteFunctional, DofVector, Space};
use crate::linalg::{cg_solve, SparseMatrix};
use crate::mesh::quadrature::{cell_points, CellQuadrature};
use crate::mesh::{Point, PolyMesh};
use crate::par;
use crate::problem::Lagrangian;
use crate::{Error, Result};

/// Per-cell data of an affine element.
#[derive(Clone, Debug)]
struct Element {
    nodes: Vec<usize>,
    /// Constant shape-function gradients, `nodes.len() × d`.
    grads: Vec<[f64; 2]>,
    points: Vec<Point>,
    weights: Vec<f64>,
    /// Shape-function values, `points.len() × nodes.len()`.
    values: Vec<f64>,
}

/// Continuous piecewise-linear functions on a simplicial mesh, with the
/// boundary nodes masked out of the variation space.
#[derive(Clone, Debug)]
pub struct P1Space {
    mesh: PolyMesh,
    rule: CellQuadrature,
    boundary: Vec<bool>,
    elements: Vec<Element>,
}

impl P1Space {
    pub fn new(mesh: PolyMesh, rule: CellQuadrature) -> Result<Self> {
        if !mesh.is_simplicial() {
            return Err(Error::Unsupported("P1 elements need an interval or triangle mesh".into()));
        }
        let d = mesh.dim();
        let elements = par::map_range(mesh.num_cells(), |k| {
            let cell = &mesh.cells()[k];
            let p: Vec<Point> = cell.vertices.iter().map(|&v| mesh.vertices()[v]).collect();
            let grads = if d == 1 {
                let h = p[1][0] - p[0][0];
                vec![[-1.0 / h, 0.0], [1.0 / h, 0.0]]
            } else {
                let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
                (0..3)
                    .map(|i| {
                        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                        [(a[1] - b[1]) / two_a, (b[0] - a[0]) / two_a]
                    })
                    .collect()
            };
            let quad = cell_points(&mesh, k, rule);
            let c = cell.centroid;
            let base = 1.0 / (d + 1) as f64;
            let mut values = Vec::with_capacity(quad.len() * (d + 1));
            for q in &quad {
                for g in &grads {
                    values.push(base + g[0] * (q.x[0] - c[0]) + g[1] * (q.x[1] - c[1]));
                }
            }
            Element {
                nodes: cell.vertices.clone(),
                grads,
                points: quad.iter().map(|q| q.x).collect(),
                weights: quad.iter().map(|q| q.weight).collect(),
                values,
            }
        });
        let boundary = mesh.boundary_vertex_mask();
        Ok(Self { mesh, rule, boundary, elements })
    }

    pub fn mesh(&self) -> &PolyMesh {
        &self.mesh
    }

    pub fn quadrature(&self) -> CellQuadrature {
        self.rule
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_vertices()
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn free_nodes(&self) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&a| !self.boundary[a]).collect()
    }

    fn mask(&self, v: &mut [f64]) {
        par::for_each_indexed(v, |a, x| {
            if self.boundary[a] {
                *x = 0.0;
            }
        });
    }

    /// Largest `|Σ_a φ_a(x_q) − 1|` over all quadrature points.
    pub fn partition_of_unity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for e in &self.elements {
            for row in e.values.chunks(e.nodes.len()) {
                worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
            }
        }
        worst
    }

    /// Largest `|Σ_a φ_a(x_q) v_a − x_q|` over quadrature points, i.e. how
    /// well the element reproduces the coordinate functions.
    pub fn affine_map_defect(&self) -> f64 {
        let d = self.mesh.dim();
        let mut worst = 0.0f64;
        for e in &self.elements {
            let m = e.nodes.len();
            for (q, x) in e.points.iter().enumerate() {
                for i in 0..d {
                    let interp: f64 = (0..m).map(|a| e.values[q * m + a] * self.mesh.vertices()[e.nodes[a]][i]).sum();
                    worst = worst.max((interp - x[i]).abs());
                }
            }
        }
        worst
    }

    /// Interpolant of `f` at the nodes.
    pub fn interpolate(&self, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> Vec<f64> {
        let d = self.mesh.dim();
        par::map_range(self.num_nodes(), |a| f(&self.mesh.vertices()[a][..d]))
    }

    /// `(‖u_h − u‖_{L²}, max nodal error)`, the integral taken with a
    /// refined rule independent of the space's quadrature.
    pub fn errors(&self, u: &[f64], exact: impl Fn(&[f64]) -> f64 + Sync + Send) -> (f64, f64) {
        let d = self.mesh.dim();
        let per_cell = par::map_range(self.mesh.num_cells(), |k| {
            let e = &self.elements[k];
            let c = self.mesh.cells()[k].centroid;
            let base = 1.0 / (d + 1) as f64;
            cell_points(&self.mesh, k, CellQuadrature::Refined(3))
                .iter()
                .map(|q| {
                    let uh: f64 = e
                        .nodes
                        .iter()
                        .zip(&e.grads)
                        .map(|(&a, g)| u[a] * (base + g[0] * (q.x[0] - c[0]) + g[1] * (q.x[1] - c[1])))
                        .sum();
                    q.weight * (uh - exact(&q.x[..d])).powi(2)
                })
                .sum::<f64>()
        });
        let l2 = per_cell.iter().sum::<f64>().sqrt();
        let max = (0..self.num_nodes())
            .map(|a| (u[a] - exact(&self.mesh.vertices()[a][..d])).abs())
            .fold(0.0, f64::max);
        (l2, max)
    }

    /// CSV with columns `node,x0[,x1],u`.
    pub fn to_csv(&self, u: &[f64]) -> String {
        let d = self.mesh.dim();
        let mut out = String::from(if d == 1 { "node,x0,u\n" } else { "node,x0,x1,u\n" });
        for (a, val) in u.iter().enumerate() {
            write!(out, "{a},").unwrap();
            for xi in &self.mesh.vertices()[a][..d] {
                write!(out, "{xi},").unwrap();
            }
            writeln!(out, "{val}").unwrap();
        }
        out
    }
}

/// Weak residual `∫ ∂L/∂y φ_a + ∂L/∂v·∇φ_a` for every free node `a`
/// (zero on boundary nodes), integrated cell by cell.
pub fn weak_residual(lagrangian: &dyn Lagrangian, space: &P1Space, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != space.num_nodes() {
        return Err(Error::DimensionMismatch { expected: space.num_nodes(), got: u.len() });
    }
    let d = space.mesh.dim();
    let local = par::map_range(space.elements.len(), |k| {
        let e = &space.elements[k];
        let m = e.nodes.len();
        let mut grad = [0.0; 2];
        for (a, g) in e.nodes.iter().zip(&e.grads) {
            grad[0] += u[*a] * g[0];
            grad[1] += u[*a] * g[1];
        }
        let mut r = vec![0.0; m];
        let mut dv = [0.0; 2];
        for (q, x) in e.points.iter().enumerate() {
            let phi = &e.values[q * m..(q + 1) * m];
            let y: f64 = phi.iter().zip(&e.nodes).map(|(p, &a)| p * u[a]).sum();
            let dy = lagrangian.dl_dy(&x[..d], y, &grad[..d]);
            lagrangian.dl_dv(&x[..d], y, &grad[..d], &mut dv[..d]);
            for b in 0..m {
                let flux: f64 = (0..d).map(|i| dv[i] * e.grads[b][i]).sum();
                r[b] += e.weights[q] * (dy * phi[b] + flux);
            }
        }
        r
    });
    let mut out = vec![0.0; space.num_nodes()];
    for (e, r) in space.elements.iter().zip(&local) {
        for (&a, v) in e.nodes.iter().zip(r) {
            out[a] += v;
        }
    }
    space.mask(&mut out);
    Ok(out)
}

/// `𝓛_h(u) = Σ_K Σ_q w_q L(x_q, u_h(x_q), ∇u_h(x_q))`, the Lagrangian
/// restricted to the P1 space.
pub struct FemLagrangian<'a> {
    lagrangian: &'a dyn Lagrangian,
    space: &'a P1Space,
    /// Rows `(d + 1) q + 0` sample `u_h`, rows `(d + 1) q + 1 + i` sample `∂_i u_h`.
    sampling: SparseMatrix,
    sampling_t: SparseMatrix,
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl<'a> FemLagrangian<'a> {
    pub fn new(lagrangian: &'a dyn Lagrangian, space: &'a P1Space) -> Result<Self> {
        let d = space.mesh.dim();
        if lagrangian.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: lagrangian.dim() });
        }
        let mut triplets = Vec::new();
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for e in &space.elements {
            let m = e.nodes.len();
            for (q, x) in e.points.iter().enumerate() {
                let row = points.len() * (d + 1);
                for (b, &a) in e.nodes.iter().enumerate() {
                    triplets.push((row, a, e.values[q * m + b]));
                    for i in 0..d {
                        triplets.push((row + 1 + i, a, e.grads[b][i]));
                    }
                }
                points.push(*x);
                weights.push(e.weights[q]);
            }
        }
        let sampling = SparseMatrix::from_triplets(points.len() * (d + 1), space.num_nodes(), &triplets);
        let sampling_t = sampling.transpose();
        Ok(Self { lagrangian, space, sampling, sampling_t, points, weights })
    }

    pub fn sampling_matrix(&self) -> &SparseMatrix {
        &self.sampling
    }
}

impl DiscreteFunctional for FemLagrangian<'_> {
    fn space(&self) -> Space {
        Space::FemNodal(self.space.num_nodes())
    }

    fn eval(&self, u: &[f64]) -> f64 {
        let d = self.space.mesh.dim();
        let s = self.sampling.mul_vec(u);
        let terms = par::map_range(self.points.len(), |q| {
            let row = &s[q * (d + 1)..(q + 1) * (d + 1)];
            self.weights[q] * self.lagrangian.eval(&self.points[q][..d], row[0], &row[1..])
        });
        terms.iter().sum()
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let d = self.space.mesh.dim();
        let s = self.sampling.mul_vec(u);
        let mut z = vec![0.0; s.len()];
        par::for_each_chunk(&mut z, d + 1, |q, out| {
            let row = &s[q * (d + 1)..(q + 1) * (d + 1)];
            let x = &self.points[q][..d];
            let w = self.weights[q];
            out[0] = w * self.lagrangian.dl_dy(x, row[0], &row[1..]);
            self.lagrangian.dl_dv(x, row[0], &row[1..], &mut out[1..]);
            out[1..].iter_mut().for_each(|v| *v *= w);
        });
        let mut g = self.sampling_t.mul_vec(&z);
        self.space.mask(&mut g);
        g
    }

    fn project(&self, v: &mut [f64]) {
        self.space.mask(v);
    }

    fn is_quadratic(&self) -> bool {
        self.lagrangian.is_quadratic()
    }
}

/// Per-node mass relating [`FemLagrangian`] to [`weak_residual`]: all ones.
pub fn mass(space: &P1Space) -> Vec<f64> {
    vec![1.0; space.num_nodes()]
}

/// Stiffness matrix and load vector of a Poisson Lagrangian on the free
/// nodes, integrated with the space's quadrature.
pub fn poisson_system(lagrangian: &dyn Lagrangian, space: &P1Space) -> Result<(SparseMatrix, Vec<f64>, Vec<usize>)> {
    let poisson = lagrangian
        .as_poisson()
        .ok_or_else(|| Error::Unsupported("linear assembly needs a Poisson Lagrangian".into()))?;
    let d = space.mesh.dim();
    let free = space.free_nodes();
    let mut position = vec![usize::MAX; space.num_nodes()];
    for (r, &a) in free.iter().enumerate() {
        position[a] = r;
    }
    let local = par::map_range(space.elements.len(), |k| {
        let e = &space.elements[k];
        let m = e.nodes.len();
        let mut stiff = vec![0.0; m * m];
        let mut load = vec![0.0; m];
        let mut alpha = [0.0; 4];
        for (q, x) in e.points.iter().enumerate() {
            let w = e.weights[q];
            poisson.alpha.matrix_at(&x[..d], &mut alpha[..d * d]);
            let f = poisson.source.eval(&x[..d]);
            for a in 0..m {
                load[a] += w * f * e.values[q * m + a];
                for b in 0..m {
                    let mut v = 0.0;
                    for i in 0..d {
                        for j in 0..d {
                            v += e.grads[a][i] * alpha[i * d + j] * e.grads[b][j];
                        }
                    }
                    stiff[a * m + b] += w * v;
                }
            }
        }
        (stiff, load)
    });
    let mut triplets = Vec::new();
    let mut rhs = vec![0.0; free.len()];
    for (e, (stiff, load)) in space.elements.iter().zip(&local) {
        let m = e.nodes.len();
        for a in 0..m {
            let r = position[e.nodes[a]];
            if r == usize::MAX {
                continue;
            }
            rhs[r] += load[a];
            for b in 0..m {
                let c = position[e.nodes[b]];
                if c != usize::MAX {
                    triplets.push((r, c, stiff[a * m + b]));
                }
            }
        }
    }
    let matrix = SparseMatrix::from_triplets(free.len(), free.len(), &triplets).with_symmetry(true);
    Ok((matrix, rhs, free))
}

/// Solves the discrete Euler–Lagrange equation on the P1 variation space.
/// Poisson Lagrangians are assembled and solved by conjugate gradients;
/// other Lagrangians go through [`find_extremal`].
pub fn fem_solve(lagrangian: &dyn Lagrangian, space: &P1Space, tol: f64) -> Result<DofVector> {
    let n = space.num_nodes();
    if lagrangian.as_poisson().is_some() {
        if lagrangian.dim() != space.mesh.dim() {
            return Err(Error::DimensionMismatch { expected: space.mesh.dim(), got: lagrangian.dim() });
        }
        let (a, b, free) = poisson_system(lagrangian, space)?;
        let mut u = vec![0.0; n];
        if !free.is_empty() {
            let x = cg_solve(&a, &b, tol, 10 * free.len() + 100)?;
            for (r, node) in free.into_iter().enumerate() {
                u[node] = x[r];
            }
        }
        return Ok(DofVector::new(Space::FemNodal(n), u)?);
    }
    let f = FemLagrangian::new(lagrangian, space)?;
    let ext = find_extremal(&f, &DofVector::zeros(f.space()), tol, 20 * n + 200)?;
    Ok(ext.point)
}
