//! Two-point flux finite volumes for `−Δu = f` with homogeneous Dirichlet
//! data on admissible meshes.
//!
//! Cell fields are plain slices indexed by cell. Fluxes are stored once per
//! face, oriented along the canonical normal (outward for the owner), so the
//! continuity relation `F_{e,K1} + F_{e,K2} = 0` holds by construction.

use std::fmt::Write as _;

use crate::functional::{DiscreteFunctional, IdentityDefect, Space};
use crate::linalg::{cg_solve, SparseMatrix};
use crate::mesh::quadrature::{integrate_cell, CellQuadrature};
use crate::mesh::CenteredMesh;
use crate::par;
use crate::problem::ScalarField;
use crate::{Error, Result};

/// Face fluxes `F_{e,K}`.
#[derive(Clone, Debug, PartialEq)]
pub enum FluxDistribution {
    /// One value per face: the flux seen by the owner cell. The neighbour
    /// sees its negative.
    Continuous(Vec<f64>),
    /// Independent values per face, `[owner, neighbour]`; the neighbour
    /// entry of boundary faces is ignored.
    Broken(Vec<[f64; 2]>),
}

impl FluxDistribution {
    pub fn is_continuous(&self) -> bool {
        matches!(self, FluxDistribution::Continuous(_))
    }

    /// `F_{e,K}` for face `f` seen from `cell`.
    pub fn seen_from(&self, f: usize, owner: bool) -> f64 {
        match self {
            FluxDistribution::Continuous(v) => {
                if owner {
                    v[f]
                } else {
                    -v[f]
                }
            }
            FluxDistribution::Broken(v) => v[f][if owner { 0 } else { 1 }],
        }
    }

    fn len(&self) -> usize {
        match self {
            FluxDistribution::Continuous(v) => v.len(),
            FluxDistribution::Broken(v) => v.len(),
        }
    }
}

/// TPFA discretization on a fixed admissible mesh.
#[derive(Clone, Debug)]
pub struct FiniteVolume {
    mesh: CenteredMesh,
    rule: CellQuadrature,
}

impl FiniteVolume {
    /// Fails with [`Error::NotAdmissible`] if any face violates orthogonality.
    pub fn new(mesh: CenteredMesh) -> Result<Self> {
        if !mesh.is_admissible() {
            return Err(Error::NotAdmissible(mesh.violations().len()));
        }
        Ok(Self { mesh, rule: CellQuadrature::Midpoint })
    }

    /// Quadrature used by [`FiniteVolume::interpolate`] for non-constant data.
    pub fn with_quadrature(mut self, rule: CellQuadrature) -> Self {
        self.rule = rule;
        self
    }

    pub fn mesh(&self) -> &CenteredMesh {
        &self.mesh
    }

    pub fn num_cells(&self) -> usize {
        self.mesh.mesh().num_cells()
    }

    pub fn measures(&self) -> Vec<f64> {
        self.mesh.mesh().cells().iter().map(|c| c.measure).collect()
    }

    /// Cell averages `(I f)_K = (1/|K|) ∫_K f`; exact for constant `f`.
    pub fn interpolate(&self, f: &ScalarField) -> Vec<f64> {
        if let Some(c) = f.as_constant() {
            return vec![c; self.num_cells()];
        }
        let m = self.mesh.mesh();
        let d = m.dim();
        par::map_range(m.num_cells(), |k| integrate_cell(m, k, self.rule, |x| f.eval(&x[..d])) / m.cells()[k].measure)
    }

    /// `φ_{e,K1} = (u_{K2} − u_{K1}) / d_e` inside, `φ_{e,K} = −u_K / d_e` on the boundary.
    pub fn fluxes(&self, u: &[f64]) -> FluxDistribution {
        let faces = self.mesh.mesh().faces();
        FluxDistribution::Continuous(par::map_range(faces.len(), |f| {
            let face = &faces[f];
            let outside = face.neighbor.map_or(0.0, |n| u[n]);
            (outside - u[face.owner]) / self.mesh.distance(f)
        }))
    }

    /// `div_K F = (1/|K|) Σ_{e⊂∂K} F_{e,K} |e|`.
    pub fn div(&self, flux: &FluxDistribution) -> Vec<f64> {
        let m = self.mesh.mesh();
        debug_assert_eq!(flux.len(), m.num_faces());
        par::map_range(m.num_cells(), |k| {
            let cell = &m.cells()[k];
            let total: f64 = cell
                .faces
                .iter()
                .map(|cf| flux.seen_from(cf.face, cf.sign > 0.0) * m.faces()[cf.face].measure)
                .sum();
            total / cell.measure
        })
    }

    /// `Δ_h u = div(fluxes(u))`.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        self.div(&self.fluxes(u))
    }

    /// Residual of `−Δ_h u = I f`, cell by cell.
    pub fn residual(&self, u: &[f64], source: &[f64]) -> Vec<f64> {
        self.laplacian(u).iter().zip(source).map(|(l, f)| -l - f).collect()
    }

    /// `|Σ_K (div_K F) u_K |K| + Σ_{K1|K2} F_{e,K1}(u_{K2} − u_{K1})|e| − Σ_{K|∂Ω} F_{e,K} u_K |e||`.
    pub fn green_gauss_defect(&self, flux: &FluxDistribution, u: &[f64]) -> Result<IdentityDefect> {
        if !flux.is_continuous() {
            return Err(Error::DiscontinuousFlux);
        }
        let m = self.mesh.mesh();
        let div = self.div(flux);
        let mut terms = Vec::with_capacity(m.num_cells() + m.num_faces());
        for (k, cell) in m.cells().iter().enumerate() {
            terms.push(div[k] * u[k] * cell.measure);
        }
        for (f, face) in m.faces().iter().enumerate() {
            let fk = flux.seen_from(f, true);
            terms.push(match face.neighbor {
                Some(n) => fk * (u[n] - u[face.owner]) / self.mesh.distance(f) * self.mesh.distance(f) * face.measure,
                None => -fk * u[face.owner] * face.measure,
            });
        }
        Ok(IdentityDefect {
            absolute: terms.iter().sum::<f64>().abs(),
            scale: terms.iter().map(|t| t.abs()).sum(),
        })
    }

    /// `−|K| Δ_h` as a matrix: the Hessian of [`FvLagrangian`].
    pub fn matrix(&self) -> SparseMatrix {
        let m = self.mesh.mesh();
        let mut triplets = Vec::with_capacity(4 * m.num_faces());
        for (f, face) in m.faces().iter().enumerate() {
            let t = face.measure / self.mesh.distance(f);
            triplets.push((face.owner, face.owner, t));
            if let Some(n) = face.neighbor {
                triplets.push((n, n, t));
                triplets.push((face.owner, n, -t));
                triplets.push((n, face.owner, -t));
            }
        }
        SparseMatrix::from_triplets(m.num_cells(), m.num_cells(), &triplets).with_symmetry(true)
    }

    /// Solves `−Δ_h u = I f` by conjugate gradients.
    pub fn solve(&self, f: &ScalarField, tol: f64) -> Result<Vec<f64>> {
        let rhs: Vec<f64> = self.interpolate(f).iter().zip(self.measures()).map(|(a, b)| a * b).collect();
        Ok(cg_solve(&self.matrix(), &rhs, tol, 10 * rhs.len() + 100)?)
    }

    pub fn lagrangian(&self, f: &ScalarField) -> FvLagrangian<'_> {
        FvLagrangian { fv: self, source: self.interpolate(f) }
    }

    /// `(√(Σ|K| e_K²), max |e_K|)` for `e_K = u_K − u(x_K)`.
    pub fn errors(&self, u: &[f64], exact: impl Fn(&[f64]) -> f64) -> (f64, f64) {
        let m = self.mesh.mesh();
        let d = m.dim();
        let mut sq = 0.0;
        let mut max = 0.0f64;
        for (k, cell) in m.cells().iter().enumerate() {
            let e = u[k] - exact(&self.mesh.cell_center(k)[..d]);
            sq += cell.measure * e * e;
            max = max.max(e.abs());
        }
        (sq.sqrt(), max)
    }

    /// CSV with columns `cell,x0[,x1],u`.
    pub fn to_csv(&self, u: &[f64]) -> String {
        let d = self.mesh.mesh().dim();
        let mut out = String::from(if d == 1 { "cell,x0,u\n" } else { "cell,x0,x1,u\n" });
        for (k, val) in u.iter().enumerate() {
            write!(out, "{k},").unwrap();
            for xi in &self.mesh.cell_center(k)[..d] {
                write!(out, "{xi},").unwrap();
            }
            writeln!(out, "{val}").unwrap();
        }
        out
    }
}

/// `𝓛_h(u) = ½ Σ_{e∈F} φ_e² |e| d_e − Σ_K (I f)_K u_K |K|`, boundary faces
/// included.
pub struct FvLagrangian<'a> {
    fv: &'a FiniteVolume,
    source: Vec<f64>,
}

impl FvLagrangian<'_> {
    /// `I f`, shared with [`FiniteVolume::residual`].
    pub fn source(&self) -> &[f64] {
        &self.source
    }
}

impl DiscreteFunctional for FvLagrangian<'_> {
    fn space(&self) -> Space {
        Space::FvCell(self.fv.num_cells())
    }

    fn eval(&self, u: &[f64]) -> f64 {
        let m = self.fv.mesh.mesh();
        let FluxDistribution::Continuous(phi) = self.fv.fluxes(u) else { unreachable!() };
        let energy: f64 = m
            .faces()
            .iter()
            .enumerate()
            .map(|(f, face)| 0.5 * phi[f] * phi[f] * face.measure * self.fv.mesh.distance(f))
            .sum();
        let load: f64 = m.cells().iter().enumerate().map(|(k, c)| self.source[k] * u[k] * c.measure).sum();
        energy - load
    }

    /// Face by face: `∂(½φ_e²|e|d_e)/∂u_K = φ_e |e| d_e ∂φ_e/∂u_K` with
    /// `∂φ_e/∂u_owner = −1/d_e` and `∂φ_e/∂u_neighbour = 1/d_e`.
    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        let m = self.fv.mesh.mesh();
        let FluxDistribution::Continuous(phi) = self.fv.fluxes(u) else { unreachable!() };
        let mut g: Vec<f64> = m.cells().iter().enumerate().map(|(k, c)| -self.source[k] * c.measure).collect();
        for (f, face) in m.faces().iter().enumerate() {
            let w = phi[f] * face.measure;
            g[face.owner] -= w;
            if let Some(n) = face.neighbor {
                g[n] += w;
            }
        }
        g
    }

    fn is_quadratic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate::{cartesian, interval, uniform_interval};

    fn fv(mesh: crate::mesh::PolyMesh) -> FiniteVolume {
        FiniteVolume::new(CenteredMesh::centroidal(mesh).unwrap()).unwrap()
    }

    #[test]
    fn two_cell_hand_values() {
        let s = fv(uniform_interval(2).unwrap());
        let u = [0.125, 0.125];
        let FluxDistribution::Continuous(phi) = s.fluxes(&u) else { panic!() };
        // faces sorted by owner then position: {0}, {1/2}, {1}
        assert_eq!(phi, vec![-0.5, 0.0, -0.5]);
        assert_eq!(s.laplacian(&u), vec![-1.0, -1.0]);
        let one = ScalarField::constant(1.0);
        let l = s.lagrangian(&one);
        assert!((l.eval(&u) + 1.0 / 16.0).abs() < 1e-16);
        let sol = s.solve(&one, 1e-15).unwrap();
        assert!(sol.iter().all(|x| (x - 0.125).abs() < 1e-15));
    }

    #[test]
    fn zero_fields() {
        let s = fv(cartesian(3, 3).unwrap());
        let z = vec![0.0; 9];
        assert_eq!(s.laplacian(&z), z);
        assert_eq!(s.lagrangian(&ScalarField::new(|x| x[0])).eval(&z), 0.0);
        assert!(s.solve(&ScalarField::constant(0.0), 1e-12).unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn constant_state_pulls_to_boundary() {
        let s = fv(uniform_interval(4).unwrap());
        let FluxDistribution::Continuous(phi) = s.fluxes(&[2.0; 4]) else { panic!() };
        let m = s.mesh().mesh();
        for (f, face) in m.faces().iter().enumerate() {
            let expected = if face.is_boundary() { -2.0 / s.mesh().distance(f) } else { 0.0 };
            assert_eq!(phi[f], expected);
        }
    }

    #[test]
    fn single_outward_flux() {
        let s = fv(cartesian(1, 1).unwrap());
        let m = s.mesh().mesh();
        let right = m.faces().iter().position(|f| f.center == [1.0, 0.5]).unwrap();
        let mut phi = vec![0.0; m.num_faces()];
        phi[right] = 1.0;
        assert_eq!(s.div(&FluxDistribution::Continuous(phi)), vec![1.0]);
    }

    #[test]
    fn interpolation_modes() {
        let s = fv(interval(&[0.0, 0.5, 1.0]).unwrap());
        assert_eq!(s.interpolate(&ScalarField::new(|x| x[0])), vec![0.25, 0.75]);
        let sin = ScalarField::new(|x| (std::f64::consts::PI * x[0]).sin());
        let mid = s.interpolate(&sin)[0];
        assert!((mid - (std::f64::consts::FRAC_PI_4).sin()).abs() < 1e-15);
        let fine = s.clone().with_quadrature(CellQuadrature::Refined(8)).interpolate(&sin)[0];
        assert!((fine - 2.0 / std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn broken_flux_is_rejected() {
        let s = fv(uniform_interval(2).unwrap());
        let broken = FluxDistribution::Broken(vec![[0.0, 0.0], [1.0, 1.0], [0.0, 0.0]]);
        assert!(matches!(s.green_gauss_defect(&broken, &[1.0, 2.0]), Err(Error::DiscontinuousFlux)));
    }

    #[test]
    fn rejects_non_admissible_mesh() {
        let m = crate::mesh::generate::perturbed_cartesian(4, 0.1).unwrap();
        let cm = CenteredMesh::centroidal(m).unwrap();
        assert!(matches!(FiniteVolume::new(cm), Err(Error::NotAdmissible(_))));
    }
}
