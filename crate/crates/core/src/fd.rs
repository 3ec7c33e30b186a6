//! Finite differences on `[0,1]^d`.
//!
//! Fields live on the full index set `J = {0 <= j <= N}^d` and are extended
//! by zero outside it. The variation space additionally pins the index
//! boundary (`j_i ∈ {0, N}` for some `i`) to zero.

use std::fmt::Write as _;

use crate::functional::{find_extremal, DiscreteFunctional, DofVector, IdentityDefect, Space};
use crate::linalg::{cg_solve, SparseMatrix};
use crate::mesh::CartesianGrid;
use crate::par;
use crate::problem::Lagrangian;
use crate::{Error, Result};

/// Which one-sided differences form the gradient/divergence pair.
///
/// Both pairs satisfy the discrete Green–Gauss formula on the variation
/// space. The centered pair does not and is not offered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StencilPair {
    /// Forward gradient, backward divergence.
    #[default]
    ForwardBackward,
    /// Backward gradient, forward divergence.
    BackwardForward,
}

impl StencilPair {
    /// Gradient taps along one direction: `(shift, coefficient)` pairs with
    /// `(∇u)_{j,i} = Σ c u_{j + s e_i} / h`.
    fn gradient_taps(self) -> [(isize, f64); 2] {
        match self {
            StencilPair::ForwardBackward => [(0, -1.0), (1, 1.0)],
            StencilPair::BackwardForward => [(0, 1.0), (-1, -1.0)],
        }
    }

    pub fn grad(self, u: &NodalField) -> NodalVectorField {
        let grid = u.grid;
        let d = grid.dim();
        let inv_h = 1.0 / grid.h();
        let taps = self.gradient_taps();
        let mut values = vec![0.0; grid.num_nodes() * d];
        par::for_each_chunk(&mut values, d, |node, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = taps.iter().map(|&(s, c)| c * u.shifted(node, i, s)).sum::<f64>() * inv_h;
            }
        });
        NodalVectorField { grid, values }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn div(self, p: &NodalVectorField) -> NodalField {
        let grid = p.grid;
        let d = grid.dim();
        let inv_h = 1.0 / grid.h();
        let values = par::map_range(grid.num_nodes(), |node| {
            let mut acc = 0.0;
            for i in 0..d {
                let here = p.component(node, i);
                acc += match self {
                    StencilPair::ForwardBackward => {
                        here - grid.backward(node, i).map_or(0.0, |k| p.component(k, i))
                    }
                    StencilPair::BackwardForward => {
                        grid.forward(node, i).map_or(0.0, |k| p.component(k, i)) - here
                    }
                };
            }
            acc * inv_h
        });
        NodalField { grid, values }
    }
}

/// Scalar nodal values `u_j`, `j ∈ J`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalField {
    grid: CartesianGrid,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(grid: CartesianGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::DimensionMismatch { expected: grid.num_nodes(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: CartesianGrid) -> Self {
        Self { grid, values: vec![0.0; grid.num_nodes()] }
    }

    pub fn from_fn(grid: CartesianGrid, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> Self {
        let d = grid.dim();
        let values = par::map_range(grid.num_nodes(), |k| f(&grid.coords(k)[..d]));
        Self { grid, values }
    }

    pub fn grid(&self) -> CartesianGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `u_{j + s e_i}`, zero outside `J`.
    fn shifted(&self, node: usize, i: usize, s: isize) -> f64 {
        let target = match s {
            0 => Some(node),
            1 => self.grid.forward(node, i),
            -1 => self.grid.backward(node, i),
            _ => unreachable!("stencils only shift by one"),
        };
        target.map_or(0.0, |k| self.values[k])
    }

    /// Zeroes the index boundary.
    pub fn apply_mask(&mut self) {
        mask_boundary(self.grid, &mut self.values);
    }

    /// First boundary node with a nonzero value, if any.
    pub fn check_variation_space(&self) -> Result<()> {
        match (0..self.values.len()).find(|&k| self.grid.is_boundary(k) && self.values[k] != 0.0) {
            Some(node) => Err(Error::NotInVariationSpace { node, value: self.values[node] }),
            None => Ok(()),
        }
    }

    /// Discrete `L²` and max errors against `exact` at the nodes.
    pub fn errors(&self, exact: impl Fn(&[f64]) -> f64) -> (f64, f64) {
        let d = self.grid.dim();
        let mut sq = 0.0;
        let mut max = 0.0f64;
        for (k, u) in self.values.iter().enumerate() {
            let e = u - exact(&self.grid.coords(k)[..d]);
            sq += e * e;
            max = max.max(e.abs());
        }
        ((sq * self.grid.cell_volume()).sqrt(), max)
    }

    /// CSV with columns `j0[,j1,j2],x0[,x1,x2],u`, one row per node.
    pub fn to_csv(&self) -> String {
        let d = self.grid.dim();
        let mut out = String::new();
        let names: Vec<String> = (0..d)
            .map(|i| format!("j{i}"))
            .chain((0..d).map(|i| format!("x{i}")))
            .chain(std::iter::once("u".to_string()))
            .collect();
        out.push_str(&names.join(","));
        out.push('\n');
        for (k, u) in self.values.iter().enumerate() {
            let j = self.grid.multi_index(k);
            let x = self.grid.coords(k);
            for ji in &j[..d] {
                write!(out, "{ji},").unwrap();
            }
            for xi in &x[..d] {
                write!(out, "{xi},").unwrap();
            }
            writeln!(out, "{u}").unwrap();
        }
        out
    }
}

fn mask_boundary(grid: CartesianGrid, v: &mut [f64]) {
    par::for_each_indexed(v, |k, x| {
        if grid.is_boundary(k) {
            *x = 0.0;
        }
    });
}

/// Vector nodal values `φ_j ∈ ℝ^d`, stored node-major.
#[derive(Clone, Debug, PartialEq)]
pub struct NodalVectorField {
    grid: CartesianGrid,
    values: Vec<f64>,
}

impl NodalVectorField {
    pub fn new(grid: CartesianGrid, values: Vec<f64>) -> Result<Self> {
        let expected = grid.num_nodes() * grid.dim();
        if values.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> CartesianGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn component(&self, node: usize, i: usize) -> f64 {
        self.values[node * self.grid.dim() + i]
    }

    pub fn at(&self, node: usize) -> &[f64] {
        let d = self.grid.dim();
        &self.values[node * d..(node + 1) * d]
    }
}

/// Forward-difference gradient.
pub fn grad_h(u: &NodalField) -> NodalVectorField {
    StencilPair::ForwardBackward.grad(u)
}

/// Backward-difference divergence.
pub fn div_h(p: &NodalVectorField) -> NodalField {
    StencilPair::ForwardBackward.div(p)
}

/// `|Σ_j p_j·(∇_h u)_j h^d + Σ_j (div_h p)_j u_j h^d|` for `u` in the
/// variation space.
pub fn green_gauss_defect(u: &NodalField, p: &NodalVectorField, stencil: StencilPair) -> Result<IdentityDefect> {
    u.check_variation_space()?;
    if u.grid != p.grid {
        return Err(Error::DimensionMismatch { expected: u.grid.num_nodes(), got: p.grid.num_nodes() });
    }
    let w = u.grid.cell_volume();
    let g = stencil.grad(u);
    let dv = stencil.div(p);
    let a: f64 = p.values.iter().zip(&g.values).map(|(x, y)| x * y).sum::<f64>() * w;
    let b: f64 = dv.values.iter().zip(&u.values).map(|(x, y)| x * y).sum::<f64>() * w;
    let scale = p.values.iter().zip(&g.values).map(|(x, y)| (x * y).abs()).sum::<f64>() * w
        + dv.values.iter().zip(&u.values).map(|(x, y)| (x * y).abs()).sum::<f64>() * w;
    Ok(IdentityDefect { absolute: (a + b).abs(), scale })
}

/// `∂L/∂y(x_j, u_j, ∇_h u_j) − div_h[∂L/∂v(x, u, ∇_h u)]_j` at interior
/// nodes, zero on the index boundary.
pub fn el_residual(lagrangian: &dyn Lagrangian, u: &NodalField, stencil: StencilPair) -> NodalField {
    let grid = u.grid;
    let d = grid.dim();
    let g = stencil.grad(u);
    let mut q = vec![0.0; grid.num_nodes() * d];
    par::for_each_chunk(&mut q, d, |k, out| {
        lagrangian.dl_dv(&grid.coords(k)[..d], u.values[k], g.at(k), out);
    });
    let divq = stencil.div(&NodalVectorField { grid, values: q });
    let values = par::map_range(grid.num_nodes(), |k| {
        if grid.is_boundary(k) {
            0.0
        } else {
            lagrangian.dl_dy(&grid.coords(k)[..d], u.values[k], g.at(k)) - divq.values[k]
        }
    });
    NodalField { grid, values }
}

/// `𝓛_h(u) = Σ_{j∈J} L(x_j, u_j, (∇_h u)_j) h^d`.
pub struct FdLagrangian<'a> {
    lagrangian: &'a dyn Lagrangian,
    grid: CartesianGrid,
    stencil: StencilPair,
}

impl<'a> FdLagrangian<'a> {
    pub fn new(lagrangian: &'a dyn Lagrangian, grid: CartesianGrid, stencil: StencilPair) -> Result<Self> {
        if lagrangian.dim() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), got: lagrangian.dim() });
        }
        Ok(Self { lagrangian, grid, stencil })
    }

    pub fn grid(&self) -> CartesianGrid {
        self.grid
    }

    fn field(&self, u: &[f64]) -> NodalField {
        NodalField { grid: self.grid, values: u.to_vec() }
    }
}

impl DiscreteFunctional for FdLagrangian<'_> {
    fn space(&self) -> Space {
        Space::FdNodal(self.grid.num_nodes())
    }

    fn eval(&self, u: &[f64]) -> f64 {
        let grid = self.grid;
        let d = grid.dim();
        let g = self.stencil.grad(&self.field(u));
        let terms = par::map_range(grid.num_nodes(), |k| self.lagrangian.eval(&grid.coords(k)[..d], u[k], g.at(k)));
        terms.iter().sum::<f64>() * grid.cell_volume()
    }

    /// Chain rule through the transpose of the gradient stencil: node `k`
    /// collects `c q_{k − s e_i, i} / h` from every tap `(s, c)`.
    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let grid = self.grid;
        let d = grid.dim();
        let inv_h = 1.0 / grid.h();
        let field = self.field(u);
        let g = self.stencil.grad(&field);
        let mut q = vec![0.0; grid.num_nodes() * d];
        par::for_each_chunk(&mut q, d, |k, out| {
            self.lagrangian.dl_dv(&grid.coords(k)[..d], u[k], g.at(k), out);
        });
        let taps = self.stencil.gradient_taps();
        let w = grid.cell_volume();
        par::map_range(grid.num_nodes(), |k| {
            if grid.is_boundary(k) {
                return 0.0;
            }
            let mut acc = self.lagrangian.dl_dy(&grid.coords(k)[..d], u[k], g.at(k));
            for i in 0..d {
                for &(s, c) in &taps {
                    // the tap at node j reads node j + s e_i, so j = k − s e_i
                    let j = match s {
                        0 => Some(k),
                        1 => grid.backward(k, i),
                        _ => grid.forward(k, i),
                    };
                    if let Some(j) = j {
                        acc += c * q[j * d + i] * inv_h;
                    }
                }
            }
            acc * w
        })
    }

    fn project(&self, v: &mut [f64]) {
        mask_boundary(self.grid, v);
    }

    fn is_quadratic(&self) -> bool {
        self.lagrangian.is_quadratic()
    }
}

/// Per-node mass `h^d` relating the Lagrangian gradient to [`el_residual`].
pub fn mass(grid: CartesianGrid) -> Vec<f64> {
    vec![grid.cell_volume(); grid.num_nodes()]
}

/// Matrix of the Poisson gradient system on interior unknowns, and the
/// map from interior position to node.
fn poisson_system(lagrangian: &dyn Lagrangian, grid: CartesianGrid, stencil: StencilPair) -> Result<(SparseMatrix, Vec<f64>, Vec<usize>)> {
    let poisson = lagrangian
        .as_poisson()
        .ok_or_else(|| Error::Unsupported("linear assembly needs a Poisson Lagrangian".into()))?;
    let d = grid.dim();
    let interior = grid.interior_nodes();
    let mut position = vec![usize::MAX; grid.num_nodes()];
    for (r, &k) in interior.iter().enumerate() {
        position[k] = r;
    }
    let w = grid.cell_volume();
    let inv_h = 1.0 / grid.h();
    let taps = stencil.gradient_taps();
    // each node j couples the nodes read by its gradient stencil through α(x_j)
    let local = par::map_range(grid.num_nodes(), |j| {
        let x = &grid.coords(j)[..d];
        let mut a = [0.0; 9];
        poisson.alpha.matrix_at(x, &mut a[..d * d]);
        let reads = |i: usize, s: isize| match s {
            0 => Some(j),
            1 => grid.forward(j, i),
            _ => grid.backward(j, i),
        };
        let mut out = Vec::new();
        for i in 0..d {
            for &(s, c) in &taps {
                let Some(r) = reads(i, s).filter(|&n| position[n] != usize::MAX) else { continue };
                for i2 in 0..d {
                    for &(s2, c2) in &taps {
                        let Some(col) = reads(i2, s2).filter(|&n| position[n] != usize::MAX) else { continue };
                        let v = w * a[i * d + i2] * c * c2 * inv_h * inv_h;
                        out.push((position[r], position[col], v));
                    }
                }
            }
        }
        out
    });
    let triplets: Vec<(usize, usize, f64)> = local.into_iter().flatten().collect();
    let m = interior.len();
    let matrix = SparseMatrix::from_triplets(m, m, &triplets).with_symmetry(true);
    let rhs = interior
        .iter()
        .map(|&k| -lagrangian.dl_dy(&grid.coords(k)[..d], 0.0, &[0.0; 3][..d]) * w)
        .collect();
    Ok((matrix, rhs, interior))
}

/// Assembled matrix of the Poisson gradient system (interior unknowns).
pub fn poisson_matrix(lagrangian: &dyn Lagrangian, grid: CartesianGrid, stencil: StencilPair) -> Result<SparseMatrix> {
    poisson_system(lagrangian, grid, stencil).map(|(a, _, _)| a)
}

/// Solves the discrete Euler–Lagrange equation in the variation space.
///
/// Poisson Lagrangians are assembled and solved by conjugate gradients;
/// anything else goes through [`find_extremal`] on [`FdLagrangian`].
pub fn fd_solve(lagrangian: &dyn Lagrangian, grid: CartesianGrid, stencil: StencilPair, tol: f64) -> Result<NodalField> {
    if lagrangian.dim() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: lagrangian.dim() });
    }
    let mut u = NodalField::zeros(grid);
    if lagrangian.as_poisson().is_some() {
        let (a, b, interior) = poisson_system(lagrangian, grid, stencil)?;
        if interior.is_empty() {
            return Ok(u);
        }
        let x = cg_solve(&a, &b, tol, 10 * interior.len() + 100)?;
        for (r, k) in interior.into_iter().enumerate() {
            u.values[k] = x[r];
        }
        return Ok(u);
    }
    let f = FdLagrangian::new(lagrangian, grid, stencil)?;
    let ext = find_extremal(&f, &DofVector::zeros(f.space()), tol, 20 * grid.num_nodes() + 200)?;
    u.values = ext.point.into_values();
    Ok(u)
}
