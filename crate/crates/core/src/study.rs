//! Drivers shared by the command line and the acceptance tests: coherence
//! runs, Green–Gauss probes, manufactured-solution solves and convergence
//! tables. Every driver is deterministic for a fixed configuration.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::fd::{self, FdLagrangian, NodalField, NodalVectorField, StencilPair};
use crate::fem::{self, FemLagrangian, P1Space};
use crate::functional::{coherence_check, CoherenceConfig, CoherenceReport};
use crate::fv::{FiniteVolume, FluxDistribution};
use crate::mesh::generate::{cartesian, triangulated_square, uniform_interval, TriPattern};
use crate::mesh::io::parse_mesh;
use crate::mesh::quadrature::CellQuadrature;
use crate::mesh::{CartesianGrid, CenteredMesh, PolyMesh, DEFAULT_ANGLE_TOL};
use crate::mfd::{InnerProductMode, Mimetic};
use crate::problem::{manufactured_case, Diffusivity, Lagrangian, ManufacturedCase, ReactionLagrangian, ScalarField};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Fd,
    Fem,
    Fv,
    Mfd,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Fd, Scheme::Fem, Scheme::Fv, Scheme::Mfd];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Fd => "fd",
            Scheme::Fem => "fem",
            Scheme::Fv => "fv",
            Scheme::Mfd => "mfd",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown scheme {s:?} (expected fd, fem, fv or mfd)"))
    }
}

/// Built-in mesh families, refined by `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshKind {
    /// `n` uniform cells on `[0,1]`.
    Interval,
    /// `n × n` squares.
    Cart2d,
    /// `2n²` triangles, one diagonal per square.
    Tri2d,
    /// `4n²` triangles, both diagonals per square.
    CrissCross2d,
}

impl MeshKind {
    pub const ALL: [MeshKind; 4] = [MeshKind::Interval, MeshKind::Cart2d, MeshKind::Tri2d, MeshKind::CrissCross2d];

    pub fn name(&self) -> &'static str {
        match self {
            MeshKind::Interval => "interval",
            MeshKind::Cart2d => "cart2d",
            MeshKind::Tri2d => "tri2d",
            MeshKind::CrissCross2d => "crisscross2d",
        }
    }

    pub fn dim(&self) -> usize {
        if *self == MeshKind::Interval {
            1
        } else {
            2
        }
    }

    pub fn build(&self, n: usize) -> Result<PolyMesh> {
        Ok(match self {
            MeshKind::Interval => uniform_interval(n)?,
            MeshKind::Cart2d => cartesian(n, n)?,
            MeshKind::Tri2d => triangulated_square(n, TriPattern::Diagonal)?,
            MeshKind::CrissCross2d => triangulated_square(n, TriPattern::CrissCross)?,
        })
    }
}

impl FromStr for MeshKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        MeshKind::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown mesh {s:?}"))
    }
}

/// Where a polytopal mesh comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    Builtin(MeshKind),
    /// Contents of a mesh file; the resolution is ignored.
    Text { name: String, text: String },
}

/// Everything a driver needs besides the resolution.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub scheme: Scheme,
    pub case: Option<String>,
    pub dim: usize,
    pub mesh: Option<MeshSource>,
    /// `fb`/`bf` for fd, `midpoint`/`refined` for fem and fv, `rt0`/`diagonal` for mfd.
    pub mode: Option<String>,
    pub probes: usize,
    pub seed: u64,
    pub tol: f64,
}

impl RunConfig {
    pub fn new(scheme: Scheme, dim: usize) -> Self {
        Self { scheme, case: None, dim, mesh: None, mode: None, probes: 10, seed: 0, tol: 1e-12 }
    }

    fn stencil(&self) -> Result<StencilPair> {
        match self.mode.as_deref() {
            None | Some("fb") => Ok(StencilPair::ForwardBackward),
            Some("bf") => Ok(StencilPair::BackwardForward),
            Some(m) => Err(Error::Unsupported(format!("fd mode {m:?} (expected fb or bf)"))),
        }
    }

    fn quadrature(&self) -> Result<CellQuadrature> {
        match self.mode.as_deref() {
            None | Some("midpoint") => Ok(CellQuadrature::Midpoint),
            Some("refined") => Ok(CellQuadrature::Refined(2)),
            Some(m) => Err(Error::Unsupported(format!("quadrature mode {m:?} (expected midpoint or refined)"))),
        }
    }

    fn inner_product(&self) -> Result<InnerProductMode> {
        match self.mode.as_deref() {
            None | Some("rt0") => Ok(InnerProductMode::Rt0Lifting),
            Some("diagonal") => Ok(InnerProductMode::DiagonalTpfa),
            Some(m) => Err(Error::Unsupported(format!("mfd mode {m:?} (expected rt0 or diagonal)"))),
        }
    }

    fn manufactured(&self) -> Result<Option<ManufacturedCase>> {
        let Some(name) = &self.case else { return Ok(None) };
        let case = manufactured_case(name)?;
        if case.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: case.dim });
        }
        Ok(Some(case))
    }

    fn default_case(&self) -> Result<ManufacturedCase> {
        match self.manufactured()? {
            Some(c) => Ok(c),
            None => Ok(manufactured_case(match self.dim {
                1 => "sin1d",
                2 => "sinsin2d",
                d => return Err(Error::Unsupported(format!("no manufactured case in dimension {d}"))),
            })?),
        }
    }

    /// The Lagrangian probed by fd/fem coherence: the case's Poisson
    /// Lagrangian, or a semilinear one with unit data when no case is given.
    fn lagrangian(&self) -> Result<Box<dyn Lagrangian>> {
        Ok(match self.manufactured()? {
            Some(c) => Box::new(c.lagrangian()),
            None => Box::new(ReactionLagrangian {
                alpha: Diffusivity::identity(self.dim),
                source: ScalarField::constant(1.0),
                reaction: 1.0,
            }),
        })
    }

    fn source_and_alpha(&self) -> Result<(ScalarField, Diffusivity)> {
        Ok(match self.manufactured()? {
            Some(c) => (c.source_field(), c.alpha.clone()),
            None => (ScalarField::constant(1.0), Diffusivity::identity(self.dim)),
        })
    }

    fn default_mesh(&self) -> MeshKind {
        match (self.dim, self.scheme) {
            (1, _) => MeshKind::Interval,
            (_, Scheme::Fv) => MeshKind::Cart2d,
            (_, Scheme::Mfd) if self.mode.as_deref() == Some("diagonal") => MeshKind::Cart2d,
            _ => MeshKind::Tri2d,
        }
    }

    /// The polytopal mesh at resolution `n`, its centers and a descriptor.
    fn poly_mesh(&self, n: usize) -> Result<(CenteredMesh, String)> {
        match &self.mesh {
            Some(MeshSource::Text { name, text }) => {
                let file = parse_mesh(text)?;
                if file.mesh.dim() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, got: file.mesh.dim() });
                }
                let cells = file.mesh.num_cells();
                let centers = file.centers.unwrap_or_else(|| crate::mesh::Centers::centroids(&file.mesh));
                let cm = CenteredMesh::new(file.mesh, centers, DEFAULT_ANGLE_TOL)?;
                Ok((cm, format!("{name} ({cells} cells)")))
            }
            other => {
                let kind = match other {
                    Some(MeshSource::Builtin(k)) => *k,
                    _ => self.default_mesh(),
                };
                if kind.dim() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, got: kind.dim() });
                }
                let mesh = kind.build(n)?;
                let cells = mesh.num_cells();
                Ok((CenteredMesh::centroidal(mesh)?, format!("{} n={n} ({cells} cells)", kind.name())))
            }
        }
    }

    fn grid(&self, n: usize) -> Result<(CartesianGrid, String)> {
        if self.mesh.is_some() {
            return Err(Error::Unsupported("finite differences run on the built-in Cartesian grid only".into()));
        }
        let grid = CartesianGrid::new(self.dim, n)?;
        Ok((grid, format!("grid d={} N={n}", self.dim)))
    }
}

fn fv_alpha_check(alpha: &Diffusivity) -> Result<()> {
    let x = [0.5; 3];
    if alpha.scalar_at(&x[..alpha.dim()]) != Some(1.0) || !alpha.is_constant() {
        return Err(Error::Unsupported("finite volumes treat the isotropic problem α ≡ 1 only".into()));
    }
    Ok(())
}

/// Identity-level coherence check of `config.scheme` at resolution `n`.
pub fn coherence(config: &RunConfig, n: usize) -> Result<CoherenceReport> {
    let mut cc = CoherenceConfig {
        scheme: config.scheme.name().to_string(),
        mesh: String::new(),
        probes: config.probes,
        seed: config.seed,
        tol: config.tol,
    };
    match config.scheme {
        Scheme::Fd => {
            let (grid, desc) = config.grid(n)?;
            cc.mesh = desc;
            let stencil = config.stencil()?;
            let l = config.lagrangian()?;
            let f = FdLagrangian::new(l.as_ref(), grid, stencil)?;
            let residual = |u: &[f64]| -> Result<Vec<f64>> {
                Ok(fd::el_residual(l.as_ref(), &NodalField::new(grid, u.to_vec())?, stencil).into_values())
            };
            coherence_check(&f, residual, &fd::mass(grid), &cc)
        }
        Scheme::Fem => {
            let (cm, desc) = config.poly_mesh(n)?;
            cc.mesh = desc;
            let space = P1Space::new(cm.mesh().clone(), config.quadrature()?)?;
            let l = config.lagrangian()?;
            let f = FemLagrangian::new(l.as_ref(), &space)?;
            let residual = |u: &[f64]| fem::weak_residual(l.as_ref(), &space, u);
            coherence_check(&f, residual, &fem::mass(&space), &cc)
        }
        Scheme::Fv => {
            let (cm, desc) = config.poly_mesh(n)?;
            cc.mesh = desc;
            let (source, alpha) = config.source_and_alpha()?;
            fv_alpha_check(&alpha)?;
            let fv = FiniteVolume::new(cm)?.with_quadrature(config.quadrature()?);
            let f = fv.lagrangian(&source);
            let residual = |u: &[f64]| Ok(fv.residual(u, f.source()));
            coherence_check(&f, residual, &fv.measures(), &cc)
        }
        Scheme::Mfd => {
            let (cm, desc) = config.poly_mesh(n)?;
            let mode = config.inner_product()?;
            cc.mesh = format!("{desc} {}", mode.name());
            let (source, alpha) = config.source_and_alpha()?;
            let mfd = Mimetic::new(cm, alpha, mode)?;
            let h = mfd.hamiltonian(&source);
            let residual = |s: &[f64]| mfd.block_residual(s, h.source());
            coherence_check(&h, residual, &mfd.mixed_mass(), &cc)
        }
    }
}

/// Maximum Green–Gauss defect over random probes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GreenGaussReport {
    pub scheme: String,
    pub mesh: String,
    pub probes: usize,
    pub max_abs: f64,
    pub max_rel: f64,
    pub tol: f64,
    pub pass: bool,
}

impl GreenGaussReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Probes the discrete Green–Gauss identity of fd or fv with random
/// `(u, p)` pairs. With `break_continuity` the fv fluxes are stored per
/// cell side, which the identity rejects.
pub fn green_gauss(config: &RunConfig, n: usize, break_continuity: bool) -> Result<GreenGaussReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sample = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.gen_range(-1.0..=1.0)).collect() };
    let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
    let desc = match config.scheme {
        Scheme::Fd => {
            let (grid, desc) = config.grid(n)?;
            let stencil = config.stencil()?;
            for _ in 0..config.probes {
                let mut u = NodalField::new(grid, sample(grid.num_nodes()))?;
                u.apply_mask();
                let p = NodalVectorField::new(grid, sample(grid.num_nodes() * grid.dim()))?;
                let d = fd::green_gauss_defect(&u, &p, stencil)?;
                max_abs = max_abs.max(d.absolute);
                max_rel = max_rel.max(d.relative());
            }
            desc
        }
        Scheme::Fv => {
            let (cm, desc) = config.poly_mesh(n)?;
            let fv = FiniteVolume::new(cm)?;
            let nf = fv.mesh().mesh().num_faces();
            for _ in 0..config.probes {
                let u = sample(fv.num_cells());
                let values = sample(nf);
                let flux = if break_continuity {
                    let other = sample(nf);
                    FluxDistribution::Broken(values.iter().zip(&other).map(|(a, b)| [*a, *b]).collect())
                } else {
                    FluxDistribution::Continuous(values)
                };
                let d = fv.green_gauss_defect(&flux, &u)?;
                max_abs = max_abs.max(d.absolute);
                max_rel = max_rel.max(d.relative());
            }
            desc
        }
        s => return Err(Error::Unsupported(format!("no Green–Gauss probe for {s}"))),
    };
    Ok(GreenGaussReport {
        scheme: config.scheme.name().into(),
        mesh: desc,
        probes: config.probes,
        max_abs,
        max_rel,
        tol: config.tol,
        pass: max_rel <= config.tol,
    })
}

/// Discrete solution of a manufactured case with its errors.
#[derive(Clone, Debug)]
pub struct Solved {
    pub n: usize,
    pub h: f64,
    pub err_l2: f64,
    pub err_max: f64,
    /// Flux error in the `W_h` norm (mfd only).
    pub flux_err: Option<f64>,
    /// Output files: `(name, contents)`.
    pub files: Vec<(String, String)>,
}

/// Solves `config.case` (default `sin1d`/`sinsin2d`) at resolution `n`.
pub fn solve(config: &RunConfig, n: usize) -> Result<Solved> {
    let case = config.default_case()?;
    let d = case.dim;
    let exact = |x: &[f64]| case.solution(x);
    let tol = 1e-12_f64.min(config.tol);
    let h = 1.0 / n as f64;
    match config.scheme {
        Scheme::Fd => {
            let (grid, _) = config.grid(n)?;
            let u = fd::fd_solve(&case.lagrangian(), grid, config.stencil()?, tol)?;
            let (err_l2, err_max) = u.errors(exact);
            Ok(Solved { n, h, err_l2, err_max, flux_err: None, files: vec![("solution.csv".into(), u.to_csv())] })
        }
        Scheme::Fem => {
            let (cm, _) = config.poly_mesh(n)?;
            let space = P1Space::new(cm.mesh().clone(), config.quadrature()?)?;
            let u = fem::fem_solve(&case.lagrangian(), &space, tol)?;
            let (err_l2, err_max) = space.errors(u.values(), exact);
            let csv = space.to_csv(u.values());
            Ok(Solved { n, h, err_l2, err_max, flux_err: None, files: vec![("solution.csv".into(), csv)] })
        }
        Scheme::Fv => {
            fv_alpha_check(&case.alpha)?;
            let (cm, _) = config.poly_mesh(n)?;
            let fv = FiniteVolume::new(cm)?.with_quadrature(config.quadrature()?);
            let u = fv.solve(&case.source_field(), tol)?;
            let (err_l2, err_max) = fv.errors(&u, exact);
            Ok(Solved { n, h, err_l2, err_max, flux_err: None, files: vec![("solution.csv".into(), fv.to_csv(&u))] })
        }
        Scheme::Mfd => {
            let (cm, _) = config.poly_mesh(n)?;
            let mfd = Mimetic::new(cm, case.alpha.clone(), config.inner_product()?)?;
            let state = mfd.solve(&case.source_field(), tol)?;
            let (err_l2, flux_err) = mfd.errors(&state, exact, |x, out| case.flux(x, out));
            let err_max = state
                .u
                .iter()
                .enumerate()
                .map(|(k, u)| (u - case.solution(&mfd.mesh().cell_center(k)[..d])).abs())
                .fold(0.0, f64::max);
            Ok(Solved {
                n,
                h,
                err_l2,
                err_max,
                flux_err: Some(flux_err),
                files: vec![("cells.csv".into(), state.cells_csv()), ("faces.csv".into(), state.faces_csv())],
            })
        }
    }
}

/// Errors over a refinement sequence.
#[derive(Clone, Debug)]
pub struct ConvergenceTable {
    pub scheme: Scheme,
    pub case: String,
    pub rows: Vec<Solved>,
}

fn order(e0: f64, e1: f64, h0: f64, h1: f64) -> f64 {
    (e0 / e1).ln() / (h0 / h1).ln()
}

impl ConvergenceTable {
    /// Observed orders between consecutive rows (first entry `None`).
    pub fn orders(&self) -> Vec<Option<f64>> {
        self.column_orders(|r| r.err_l2)
    }

    pub fn flux_orders(&self) -> Vec<Option<f64>> {
        self.column_orders(|r| r.flux_err.unwrap_or(f64::NAN))
    }

    fn column_orders(&self, e: impl Fn(&Solved) -> f64) -> Vec<Option<f64>> {
        std::iter::once(None)
            .chain(self.rows.windows(2).map(|w| Some(order(e(&w[0]), e(&w[1]), w[0].h, w[1].h))))
            .collect()
    }

    /// Columns `n,h,err_L2,err_max,observed_order`, plus
    /// `flux_err_L2,flux_order` for mfd.
    pub fn to_csv(&self) -> String {
        let flux = self.scheme == Scheme::Mfd;
        let mut out = String::from("n,h,err_L2,err_max,observed_order");
        if flux {
            out.push_str(",flux_err_L2,flux_order");
        }
        out.push('\n');
        let fmt_order = |o: Option<f64>| o.map_or(String::new(), |v| format!("{v:.4}"));
        for ((r, o), fo) in self.rows.iter().zip(self.orders()).zip(self.flux_orders()) {
            write!(out, "{},{},{:.6e},{:.6e},{}", r.n, r.h, r.err_l2, r.err_max, fmt_order(o)).unwrap();
            if flux {
                write!(out, ",{:.6e},{}", r.flux_err.unwrap_or(f64::NAN), fmt_order(fo)).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Solves at every resolution in `ns` (strictly increasing).
pub fn convergence(config: &RunConfig, ns: &[usize]) -> Result<ConvergenceTable> {
    if ns.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Unsupported("resolutions must be strictly increasing".into()));
    }
    let case = config.default_case()?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let mut solved = solve(config, n)?;
        solved.files.clear();
        rows.push(solved);
    }
    Ok(ConvergenceTable { scheme: config.scheme, case: case.name.to_string(), rows })
}
