//! Continuous problem data: Lagrangian and Hamiltonian functions, the
//! Legendre transform between them, Poisson instances and manufactured
//! solutions.
//!
//! Positions `x` are passed as slices of length `d`. The admissibility and
//! density hypotheses of the continuous theory (the domain of the Lagrangian
//! functional inside H¹, density of the variation spaces) have no discrete
//! counterpart here and are not encoded in the types.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("diffusivity is not symmetric positive definite at {x:?}")]
    NotSpd { x: Vec<f64> },
    #[error("diffusivity has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("Legendre inversion failed at x={x:?}, y={y}, p={p:?}")]
    Legendre { x: Vec<f64>, y: f64, p: Vec<f64> },
    #[error("unknown manufactured case {0:?}")]
    UnknownCase(String),
}

type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Scalar field on the domain, possibly flagged constant.
#[derive(Clone)]
pub struct ScalarField {
    f: PointFn,
    constant: Option<f64>,
}

impl ScalarField {
    pub fn constant(c: f64) -> Self {
        Self { f: Arc::new(move |_| c), constant: Some(c) }
    }

    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), constant: None }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.constant {
            Some(c) => c,
            None => (self.f)(x),
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.constant {
            Some(c) => write!(f, "ScalarField::constant({c})"),
            None => f.write_str("ScalarField(<fn>)"),
        }
    }
}

#[derive(Clone)]
enum DiffusivityKind {
    Constant(Vec<f64>),
    Field(MatrixFn),
}

/// Symmetric positive definite diffusion tensor `α(x)`, stored row-major.
#[derive(Clone)]
pub struct Diffusivity {
    dim: usize,
    kind: DiffusivityKind,
    scalar: bool,
}

impl fmt::Debug for Diffusivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            DiffusivityKind::Constant(m) => write!(f, "Diffusivity({m:?})"),
            DiffusivityKind::Field(_) => write!(f, "Diffusivity(<field>, scalar={})", self.scalar),
        }
    }
}

impl Diffusivity {
    pub fn identity(dim: usize) -> Self {
        Self::scalar(dim, 1.0).expect("identity is SPD")
    }

    pub fn scalar(dim: usize, a: f64) -> Result<Self, ProblemError> {
        let mut m = vec![0.0; dim * dim];
        for i in 0..dim {
            m[i * dim + i] = a;
        }
        let out = Self { dim, kind: DiffusivityKind::Constant(m), scalar: true };
        out.validate_at(&vec![0.0; dim])?;
        Ok(out)
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self, ProblemError> {
        let d = diag.len();
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            m[i * d + i] = diag[i];
        }
        Self::matrix(d, m)
    }

    pub fn matrix(dim: usize, entries: Vec<f64>) -> Result<Self, ProblemError> {
        if entries.len() != dim * dim {
            return Err(ProblemError::Dimension { expected: dim * dim, got: entries.len() });
        }
        let scalar = (0..dim).all(|i| {
            (0..dim).all(|j| if i == j { entries[i * dim + i] == entries[0] } else { entries[i * dim + j] == 0.0 })
        });
        let out = Self { dim, kind: DiffusivityKind::Constant(entries), scalar };
        out.validate_at(&vec![0.0; dim])?;
        Ok(out)
    }

    /// Variable tensor; `f(x, out)` fills the `d×d` row-major matrix.
    /// Validation happens at sample points via [`Diffusivity::validate`].
    pub fn field(dim: usize, scalar: bool, f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static) -> Self {
        Self { dim, kind: DiffusivityKind::Field(Arc::new(f)), scalar }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_scalar(&self) -> bool {
        self.scalar
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, DiffusivityKind::Constant(_))
    }

    pub fn matrix_at(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            DiffusivityKind::Constant(m) => out[..m.len()].copy_from_slice(m),
            DiffusivityKind::Field(f) => f(x, out),
        }
    }

    /// `α(x)` when the tensor is a multiple of the identity.
    pub fn scalar_at(&self, x: &[f64]) -> Option<f64> {
        self.scalar.then(|| {
            let mut m = [0.0; 9];
            self.matrix_at(x, &mut m);
            m[0]
        })
    }

    /// `out = α(x) v`.
    pub fn apply(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let mut m = [0.0; 9];
        self.matrix_at(x, &mut m);
        for i in 0..d {
            out[i] = (0..d).map(|j| m[i * d + j] * v[j]).sum();
        }
    }

    /// `out = α(x)⁻¹ p`.
    pub fn apply_inverse(&self, x: &[f64], p: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let mut m = [0.0; 9];
        self.matrix_at(x, &mut m);
        out[..d].copy_from_slice(&p[..d]);
        solve_small(&mut m[..d * d], &mut out[..d], d).expect("diffusivity is invertible");
    }

    pub fn validate_at(&self, x: &[f64]) -> Result<(), ProblemError> {
        let d = self.dim;
        let mut m = [0.0; 9];
        self.matrix_at(x, &mut m);
        let symmetric = (0..d).all(|i| (0..d).all(|j| m[i * d + j] == m[j * d + i]));
        if !symmetric || !cholesky_ok(&m[..d * d], d) {
            return Err(ProblemError::NotSpd { x: x.to_vec() });
        }
        Ok(())
    }

    pub fn validate<'a>(&self, points: impl IntoIterator<Item = &'a [f64]>) -> Result<(), ProblemError> {
        points.into_iter().try_for_each(|x| self.validate_at(x))
    }
}

fn cholesky_ok(m: &[f64], d: usize) -> bool {
    let mut l = [0.0; 9];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = m[i * d + j] - (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return false;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    true
}

/// Gaussian elimination with partial pivoting for `d ≤ 3` systems; `b` is
/// overwritten with the solution.
pub(crate) fn solve_small(a: &mut [f64], b: &mut [f64], d: usize) -> Option<()> {
    for c in 0..d {
        let p = (c..d).max_by(|&i, &j| a[i * d + c].abs().total_cmp(&a[j * d + c].abs()))?;
        if a[p * d + c] == 0.0 {
            return None;
        }
        if p != c {
            for k in 0..d {
                a.swap(c * d + k, p * d + k);
            }
            b.swap(c, p);
        }
        for r in c + 1..d {
            let f = a[r * d + c] / a[c * d + c];
            for k in c..d {
                a[r * d + k] -= f * a[c * d + k];
            }
            b[r] -= f * b[c];
        }
    }
    for c in (0..d).rev() {
        let s: f64 = (c + 1..d).map(|k| a[c * d + k] * b[k]).sum();
        b[c] = (b[c] - s) / a[c * d + c];
    }
    Some(())
}

/// Lagrangian function `L(x, y, v)` with its partial derivatives.
pub trait Lagrangian: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], y: f64, v: &[f64]) -> f64;
    fn dl_dy(&self, x: &[f64], y: f64, v: &[f64]) -> f64;
    /// Writes `∂L/∂v` into `out[..d]`.
    fn dl_dv(&self, x: &[f64], y: f64, v: &[f64], out: &mut [f64]);
    fn is_convex(&self) -> bool;
    /// Quadratic in `(y, v)`: the discrete problems are linear.
    fn is_quadratic(&self) -> bool {
        false
    }
    /// Poisson data, when the Lagrangian is of the form `½(αv)·v − f y`.
    fn as_poisson(&self) -> Option<&PoissonLagrangian> {
        None
    }
}

/// `L(x,y,v) = ½(α(x)v)·v − f(x)y`.
#[derive(Clone, Debug)]
pub struct PoissonLagrangian {
    pub alpha: Diffusivity,
    pub source: ScalarField,
}

pub fn poisson_lagrangian(source: ScalarField, alpha: Diffusivity) -> PoissonLagrangian {
    PoissonLagrangian { alpha, source }
}

impl Lagrangian for PoissonLagrangian {
    fn dim(&self) -> usize {
        self.alpha.dim()
    }

    fn eval(&self, x: &[f64], y: f64, v: &[f64]) -> f64 {
        let mut av = [0.0; 3];
        self.alpha.apply(x, v, &mut av);
        let d = self.dim();
        0.5 * (0..d).map(|i| av[i] * v[i]).sum::<f64>() - self.source.eval(x) * y
    }

    fn dl_dy(&self, x: &[f64], _y: f64, _v: &[f64]) -> f64 {
        -self.source.eval(x)
    }

    fn dl_dv(&self, x: &[f64], _y: f64, v: &[f64], out: &mut [f64]) {
        self.alpha.apply(x, v, out);
    }

    fn is_convex(&self) -> bool {
        true
    }

    fn is_quadratic(&self) -> bool {
        true
    }

    fn as_poisson(&self) -> Option<&PoissonLagrangian> {
        Some(self)
    }
}

/// Semilinear convex Lagrangian `½(α(x)v)·v + (c/4)y⁴ − f(x)y`, whose
/// Euler–Lagrange equation is `−div(α∇u) + c u³ = f`.
#[derive(Clone, Debug)]
pub struct ReactionLagrangian {
    pub alpha: Diffusivity,
    pub source: ScalarField,
    pub reaction: f64,
}

impl Lagrangian for ReactionLagrangian {
    fn dim(&self) -> usize {
        self.alpha.dim()
    }

    fn eval(&self, x: &[f64], y: f64, v: &[f64]) -> f64 {
        let mut av = [0.0; 3];
        self.alpha.apply(x, v, &mut av);
        let d = self.dim();
        0.5 * (0..d).map(|i| av[i] * v[i]).sum::<f64>() + 0.25 * self.reaction * y.powi(4)
            - self.source.eval(x) * y
    }

    fn dl_dy(&self, x: &[f64], y: f64, _v: &[f64]) -> f64 {
        self.reaction * y.powi(3) - self.source.eval(x)
    }

    fn dl_dv(&self, x: &[f64], _y: f64, v: &[f64], out: &mut [f64]) {
        self.alpha.apply(x, v, out);
    }

    fn is_convex(&self) -> bool {
        self.reaction >= 0.0
    }
}

/// Hamiltonian function `H(x, y, p)` with its partial derivatives.
pub trait Hamiltonian: Send + Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], y: f64, p: &[f64]) -> Result<f64, ProblemError>;
    fn dh_dy(&self, x: &[f64], y: f64, p: &[f64]) -> Result<f64, ProblemError>;
    fn dh_dp(&self, x: &[f64], y: f64, p: &[f64], out: &mut [f64]) -> Result<(), ProblemError>;
}

/// Closed form `H(x,y,p) = ½ α⁻¹(x)p·p + f(x)y` of the Poisson Hamiltonian.
#[derive(Clone, Debug)]
pub struct PoissonHamiltonian {
    pub alpha: Diffusivity,
    pub source: ScalarField,
}

impl Hamiltonian for PoissonHamiltonian {
    fn dim(&self) -> usize {
        self.alpha.dim()
    }

    fn eval(&self, x: &[f64], y: f64, p: &[f64]) -> Result<f64, ProblemError> {
        let mut g = [0.0; 3];
        self.alpha.apply_inverse(x, p, &mut g);
        let d = self.dim();
        Ok(0.5 * (0..d).map(|i| g[i] * p[i]).sum::<f64>() + self.source.eval(x) * y)
    }

    fn dh_dy(&self, x: &[f64], _y: f64, _p: &[f64]) -> Result<f64, ProblemError> {
        Ok(self.source.eval(x))
    }

    fn dh_dp(&self, x: &[f64], _y: f64, p: &[f64], out: &mut [f64]) -> Result<(), ProblemError> {
        self.alpha.apply_inverse(x, p, out);
        Ok(())
    }
}

impl PoissonLagrangian {
    pub fn hamiltonian(&self) -> PoissonHamiltonian {
        PoissonHamiltonian { alpha: self.alpha.clone(), source: self.source.clone() }
    }
}

/// Hamiltonian obtained from a Lagrangian by numerically inverting
/// `v ↦ ∂L/∂v(x, y, v)`.
pub struct LegendreHamiltonian<L> {
    lagrangian: L,
    tol: f64,
    max_iter: usize,
}

/// Builds `H(x,y,p) = p·g − L(x,y,g)` where `∂L/∂v(x,y,g) = p` is solved by
/// Newton's method with a finite-difference Jacobian.
pub fn legendre_transform<L: Lagrangian>(lagrangian: L, tol: f64) -> LegendreHamiltonian<L> {
    LegendreHamiltonian { lagrangian, tol, max_iter: 60 }
}

impl<L: Lagrangian> LegendreHamiltonian<L> {
    pub fn lagrangian(&self) -> &L {
        &self.lagrangian
    }

    /// `g(x, y, p)`: the velocity whose momentum is `p`.
    pub fn velocity(&self, x: &[f64], y: f64, p: &[f64]) -> Result<[f64; 3], ProblemError> {
        let d = self.lagrangian.dim();
        let pnorm = p[..d].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut g = [0.0; 3];
        let mut r = [0.0; 3];
        let mut jac = [0.0; 9];
        let (mut plus, mut minus) = ([0.0; 3], [0.0; 3]);
        for _ in 0..self.max_iter {
            self.lagrangian.dl_dv(x, y, &g[..d], &mut r);
            for i in 0..d {
                r[i] -= p[i];
            }
            let rnorm = r[..d].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if rnorm <= self.tol * (1.0 + pnorm) {
                return Ok(g);
            }
            for j in 0..d {
                let eps = 1e-6 * (1.0 + g[j].abs());
                let mut gp = g;
                let mut gm = g;
                gp[j] += eps;
                gm[j] -= eps;
                self.lagrangian.dl_dv(x, y, &gp[..d], &mut plus);
                self.lagrangian.dl_dv(x, y, &gm[..d], &mut minus);
                for i in 0..d {
                    jac[i * d + j] = (plus[i] - minus[i]) / (2.0 * eps);
                }
            }
            let mut step = r;
            if solve_small(&mut jac[..d * d], &mut step[..d], d).is_none() {
                break;
            }
            for i in 0..d {
                g[i] -= step[i];
            }
            if g.iter().any(|v| !v.is_finite()) {
                break;
            }
        }
        Err(ProblemError::Legendre { x: x.to_vec(), y, p: p[..d].to_vec() })
    }
}

impl<L: Lagrangian> Hamiltonian for LegendreHamiltonian<L> {
    fn dim(&self) -> usize {
        self.lagrangian.dim()
    }

    fn eval(&self, x: &[f64], y: f64, p: &[f64]) -> Result<f64, ProblemError> {
        let d = self.dim();
        let g = self.velocity(x, y, p)?;
        let pg: f64 = (0..d).map(|i| p[i] * g[i]).sum();
        Ok(pg - self.lagrangian.eval(x, y, &g[..d]))
    }

    fn dh_dy(&self, x: &[f64], y: f64, p: &[f64]) -> Result<f64, ProblemError> {
        let g = self.velocity(x, y, p)?;
        Ok(-self.lagrangian.dl_dy(x, y, &g[..self.dim()]))
    }

    fn dh_dp(&self, x: &[f64], y: f64, p: &[f64], out: &mut [f64]) -> Result<(), ProblemError> {
        let g = self.velocity(x, y, p)?;
        out[..self.dim()].copy_from_slice(&g[..self.dim()]);
        Ok(())
    }
}

type VectorFn = fn(&[f64], &mut [f64]);

/// Analytic solution of `−div(α∇u) = f` on `[0,1]^d` with `u = 0` on the boundary.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: &'static str,
    pub dim: usize,
    pub alpha: Diffusivity,
    solution: fn(&[f64]) -> f64,
    gradient: VectorFn,
    source: fn(&[f64]) -> f64,
    /// `div(α∇u)` written out from second derivatives, independently of `source`.
    div_flux: fn(&[f64]) -> f64,
}

impl fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManufacturedCase").field("name", &self.name).field("dim", &self.dim).finish()
    }
}

pub const CASE_NAMES: [&str; 4] = ["sin1d", "sinsin2d", "quad1d", "aniso2d"];

pub fn manufactured_case(name: &str) -> Result<ManufacturedCase, ProblemError> {
    let case = match name {
        "sin1d" => ManufacturedCase {
            name: "sin1d",
            dim: 1,
            alpha: Diffusivity::identity(1),
            solution: |x| (PI * x[0]).sin(),
            gradient: |x, g| g[0] = PI * (PI * x[0]).cos(),
            source: |x| PI * PI * (PI * x[0]).sin(),
            div_flux: |x| -PI * PI * (PI * x[0]).sin(),
        },
        "sinsin2d" => ManufacturedCase {
            name: "sinsin2d",
            dim: 2,
            alpha: Diffusivity::identity(2),
            solution: |x| (PI * x[0]).sin() * (PI * x[1]).sin(),
            gradient: |x, g| {
                g[0] = PI * (PI * x[0]).cos() * (PI * x[1]).sin();
                g[1] = PI * (PI * x[0]).sin() * (PI * x[1]).cos();
            },
            source: |x| 2.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin(),
            div_flux: |x| {
                let uxx = -PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin();
                let uyy = -PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin();
                uxx + uyy
            },
        },
        "quad1d" => ManufacturedCase {
            name: "quad1d",
            dim: 1,
            alpha: Diffusivity::identity(1),
            solution: |x| 0.5 * x[0] * (1.0 - x[0]),
            gradient: |x, g| g[0] = 0.5 - x[0],
            source: |_| 1.0,
            div_flux: |_| -1.0,
        },
        "aniso2d" => ManufacturedCase {
            name: "aniso2d",
            dim: 2,
            alpha: Diffusivity::diagonal(&[1.0, 2.0]).expect("SPD"),
            solution: |x| (PI * x[0]).sin() * (PI * x[1]).sin(),
            gradient: |x, g| {
                g[0] = PI * (PI * x[0]).cos() * (PI * x[1]).sin();
                g[1] = PI * (PI * x[0]).sin() * (PI * x[1]).cos();
            },
            source: |x| 3.0 * PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin(),
            div_flux: |x| {
                let uxx = -PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin();
                let uyy = -PI * PI * (PI * x[0]).sin() * (PI * x[1]).sin();
                1.0 * uxx + 2.0 * uyy
            },
        },
        other => return Err(ProblemError::UnknownCase(other.to_string())),
    };
    Ok(case)
}

impl ManufacturedCase {
    pub fn solution(&self, x: &[f64]) -> f64 {
        (self.solution)(x)
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        (self.gradient)(x, out)
    }

    /// Flux `α∇u`, the mixed variable `p`.
    pub fn flux(&self, x: &[f64], out: &mut [f64]) {
        let mut g = [0.0; 3];
        (self.gradient)(x, &mut g);
        self.alpha.apply(x, &g, out);
    }

    pub fn source(&self, x: &[f64]) -> f64 {
        (self.source)(x)
    }

    pub fn div_flux(&self, x: &[f64]) -> f64 {
        (self.div_flux)(x)
    }

    pub fn source_field(&self) -> ScalarField {
        let f = self.source;
        if self.name == "quad1d" {
            ScalarField::constant(1.0)
        } else {
            ScalarField::new(f)
        }
    }

    pub fn lagrangian(&self) -> PoissonLagrangian {
        poisson_lagrangian(self.source_field(), self.alpha.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / (1.0 + b.abs())
    }

    fn fd_check_lagrangian(l: &dyn Lagrangian, rng: &mut ChaCha8Rng) -> f64 {
        let d = l.dim();
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            let y: f64 = rng.gen_range(-2.0..2.0);
            let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let e = 1e-5;
            let fy = (l.eval(&x, y + e, &v) - l.eval(&x, y - e, &v)) / (2.0 * e);
            worst = worst.max(rel(l.dl_dy(&x, y, &v), fy));
            let mut dv = [0.0; 3];
            l.dl_dv(&x, y, &v, &mut dv);
            for i in 0..d {
                let mut vp = v.clone();
                let mut vm = v.clone();
                vp[i] += e;
                vm[i] -= e;
                let fv = (l.eval(&x, y, &vp) - l.eval(&x, y, &vm)) / (2.0 * e);
                worst = worst.max(rel(dv[i], fv));
            }
        }
        worst
    }

    fn fd_check_hamiltonian(h: &dyn Hamiltonian, rng: &mut ChaCha8Rng) -> f64 {
        let d = h.dim();
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..1.0)).collect();
            let y: f64 = rng.gen_range(-2.0..2.0);
            let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let e = 1e-5;
            let fy = (h.eval(&x, y + e, &p).unwrap() - h.eval(&x, y - e, &p).unwrap()) / (2.0 * e);
            worst = worst.max(rel(h.dh_dy(&x, y, &p).unwrap(), fy));
            let mut dp = [0.0; 3];
            h.dh_dp(&x, y, &p, &mut dp).unwrap();
            for i in 0..d {
                let mut pp = p.clone();
                let mut pm = p.clone();
                pp[i] += e;
                pm[i] -= e;
                let fp = (h.eval(&x, y, &pp).unwrap() - h.eval(&x, y, &pm).unwrap()) / (2.0 * e);
                worst = worst.max(rel(dp[i], fp));
            }
        }
        worst
    }

    fn varying_alpha() -> Diffusivity {
        Diffusivity::field(2, false, |x, m| {
            m[0] = 2.0 + x[0];
            m[1] = 0.3 * x[1];
            m[2] = 0.3 * x[1];
            m[3] = 1.0 + x[0] * x[1];
        })
    }

    #[test]
    fn poisson_lagrangian_values() {
        let l = poisson_lagrangian(ScalarField::constant(1.0), Diffusivity::identity(1));
        assert_eq!(l.eval(&[0.3], 0.7, &[2.0]), 2.0 - 0.7);
        let mut g = [0.0];
        l.dl_dv(&[0.3], 0.7, &[2.0], &mut g);
        assert_eq!(g, [2.0]);
        assert_eq!(l.eval(&[0.3], 0.0, &[0.0]), 0.0);

        let l2 = poisson_lagrangian(ScalarField::constant(0.0), Diffusivity::scalar(1, 2.0).unwrap());
        assert_eq!(l2.eval(&[0.1], 5.0, &[3.0]), 9.0);
        l2.dl_dv(&[0.1], 5.0, &[3.0], &mut g);
        assert_eq!(g, [6.0]);
    }

    #[test]
    fn analytic_partials_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = ScalarField::new(|x: &[f64]| (3.0 * x[0]).sin() + x.get(1).copied().unwrap_or(0.0));
        let lags: Vec<Box<dyn Lagrangian>> = vec![
            Box::new(poisson_lagrangian(f.clone(), Diffusivity::identity(1))),
            Box::new(poisson_lagrangian(f.clone(), varying_alpha())),
            Box::new(ReactionLagrangian { alpha: Diffusivity::diagonal(&[1.0, 2.0]).unwrap(), source: f.clone(), reaction: 1.5 }),
        ];
        for l in &lags {
            assert!(fd_check_lagrangian(l.as_ref(), &mut rng) <= 1e-6);
        }
        let p = poisson_lagrangian(f, varying_alpha());
        assert!(fd_check_hamiltonian(&p.hamiltonian(), &mut rng) <= 1e-6);
        assert!(fd_check_hamiltonian(&legendre_transform(p, 1e-13), &mut rng) <= 1e-6);
    }

    #[test]
    fn legendre_of_poisson_is_closed_form() {
        let f = ScalarField::new(|x: &[f64]| x[0] - 2.0 * x[1]);
        for alpha in [Diffusivity::identity(2), Diffusivity::scalar(2, 2.0).unwrap(), Diffusivity::diagonal(&[1.0, 2.0]).unwrap(), varying_alpha()] {
            let l = poisson_lagrangian(f.clone(), alpha.clone());
            let closed = l.hamiltonian();
            let h = legendre_transform(l, 1e-14);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            for _ in 0..100 {
                let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
                let y = rng.gen_range(-1.0..1.0);
                let p = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
                let a = h.eval(&x, y, &p).unwrap();
                let b = closed.eval(&x, y, &p).unwrap();
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()));
                let mut g = [0.0; 2];
                let mut ainv = [0.0; 2];
                h.dh_dp(&x, y, &p, &mut g).unwrap();
                alpha.apply_inverse(&x, &p, &mut ainv);
                assert!((g[0] - ainv[0]).abs() <= 1e-10 && (g[1] - ainv[1]).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn legendre_hand_case() {
        let l = poisson_lagrangian(ScalarField::constant(0.0), Diffusivity::scalar(1, 2.0).unwrap());
        let h = legendre_transform(l, 1e-14);
        let g = h.velocity(&[0.4], 1.0, &[2.0]).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-14);
        assert!((h.eval(&[0.4], 1.0, &[2.0]).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn legendre_failure_names_the_point() {
        // ∂L/∂v = 0 for every v: no inverse
        struct Flat;
        impl Lagrangian for Flat {
            fn dim(&self) -> usize {
                1
            }
            fn eval(&self, _: &[f64], y: f64, _: &[f64]) -> f64 {
                y
            }
            fn dl_dy(&self, _: &[f64], _: f64, _: &[f64]) -> f64 {
                1.0
            }
            fn dl_dv(&self, _: &[f64], _: f64, _: &[f64], out: &mut [f64]) {
                out[0] = 0.0;
            }
            fn is_convex(&self) -> bool {
                true
            }
        }
        let err = legendre_transform(Flat, 1e-12).eval(&[0.5], 0.0, &[1.0]).unwrap_err();
        assert!(matches!(err, ProblemError::Legendre { ref p, .. } if p == &vec![1.0]));
    }

    #[test]
    fn manufactured_cases() {
        let q = manufactured_case("quad1d").unwrap();
        assert_eq!(q.solution(&[0.5]), 0.125);
        for name in CASE_NAMES {
            let case = manufactured_case(name).unwrap();
            let l = case.lagrangian();
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            for _ in 0..50 {
                let x: Vec<f64> = (0..case.dim).map(|_| rng.gen_range(0.0..1.0)).collect();
                // Euler–Lagrange residual ∂L/∂y − div(∂L/∂v) of the exact solution
                let mut g = [0.0; 3];
                case.gradient(&x, &mut g);
                let el = l.dl_dy(&x, case.solution(&x), &g[..case.dim]) - case.div_flux(&x);
                assert!(el.abs() <= 1e-10, "{name}");
            }
            // vanishes on the boundary
            let mut x = vec![0.3; case.dim];
            for i in 0..case.dim {
                for b in [0.0, 1.0] {
                    x[i] = b;
                    assert!(case.solution(&x).abs() < 1e-15);
                    x[i] = 0.3;
                }
            }
        }
        assert!(manufactured_case("nope").is_err());
    }

    #[test]
    fn rejects_indefinite_tensor() {
        assert!(Diffusivity::matrix(2, vec![1.0, 2.0, 2.0, 1.0]).is_err());
        assert!(Diffusivity::matrix(2, vec![1.0, 0.1, 0.0, 1.0]).is_err());
        assert!(Diffusivity::diagonal(&[1.0, 2.0]).unwrap().validate_at(&[0.5, 0.5]).is_ok());
    }
}
