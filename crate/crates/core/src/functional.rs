//! The generic variational layer: discrete functionals, Gâteaux derivatives,
//! extremal search and the coherence harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{dot, norm_inf};
use crate::par;

/// Which discrete space a vector of degrees of freedom lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Space {
    /// Finite-difference nodal values on the full index set.
    FdNodal(usize),
    /// P1 nodal values on all mesh vertices.
    FemNodal(usize),
    /// One value per finite-volume cell.
    FvCell(usize),
    /// Mixed `(u, p)`: cell values followed by canonical face fluxes.
    MfdMixed { cells: usize, faces: usize },
}

impl Space {
    pub fn len(&self) -> usize {
        match *self {
            Space::FdNodal(n) | Space::FemNodal(n) | Space::FvCell(n) => n,
            Space::MfdMixed { cells, faces } => cells + faces,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Error)]
pub enum FunctionalError {
    #[error("space mismatch: expected {expected:?}, got {got:?}")]
    SpaceMismatch { expected: Space, got: Space },
    #[error("vector of length {got} does not fit space {space:?}")]
    Length { space: Space, got: usize },
    #[error("no extremal within {iterations} iterations (gradient max norm {residual:e})")]
    MaxIter { best: DofVector, residual: f64, iterations: usize },
}

/// Degrees of freedom tagged with their space.
#[derive(Clone, Debug, PartialEq)]
pub struct DofVector {
    space: Space,
    values: Vec<f64>,
}

impl DofVector {
    pub fn new(space: Space, values: Vec<f64>) -> Result<Self, FunctionalError> {
        if values.len() != space.len() {
            return Err(FunctionalError::Length { space, got: values.len() });
        }
        Ok(Self { space, values })
    }

    pub fn zeros(space: Space) -> Self {
        Self { space, values: vec![0.0; space.len()] }
    }

    pub fn space(&self) -> Space {
        self.space
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

    /// `(u, p)` views of a mixed vector.
    pub fn blocks(&self) -> Option<(&[f64], &[f64])> {
        match self.space {
            Space::MfdMixed { cells, .. } => Some(self.values.split_at(cells)),
            _ => None,
        }
    }
}

/// A discrete Lagrangian or Hamiltonian.
///
/// `gradient(u)[i]` is the Gâteaux derivative in the direction of the `i`-th
/// basis vector; entries outside the variation space are zero.
pub trait DiscreteFunctional: Sync {
    fn space(&self) -> Space;
    fn eval(&self, u: &[f64]) -> f64;
    fn gradient(&self, u: &[f64]) -> Vec<f64>;
    /// Restricts a direction to the variation space (e.g. zero Dirichlet nodes).
    fn project(&self, _v: &mut [f64]) {}
    fn is_quadratic(&self) -> bool {
        false
    }
}

fn check_space(f: &dyn DiscreteFunctional, v: &DofVector) -> Result<(), FunctionalError> {
    if v.space() != f.space() {
        return Err(FunctionalError::SpaceMismatch { expected: f.space(), got: v.space() });
    }
    Ok(())
}

/// `D𝓛(u)(v)`.
pub fn gateaux(f: &dyn DiscreteFunctional, u: &DofVector, v: &DofVector) -> Result<f64, FunctionalError> {
    check_space(f, u)?;
    check_space(f, v)?;
    Ok(dot(&f.gradient(u.values()), v.values()))
}

/// Central-difference check of the analytic Gâteaux derivative, best over
/// steps `1e-4, 1e-5, 1e-6`:
/// `|(F(u+εv) − F(u−εv))/2ε − D𝓛(u)(v)| / (1 + |D𝓛(u)(v)|)`.
pub fn gateaux_fd_check(f: &dyn DiscreteFunctional, u: &DofVector, v: &DofVector) -> Result<f64, FunctionalError> {
    let exact = gateaux(f, u, v)?;
    let shifted = |eps: f64| -> Vec<f64> { u.values().iter().zip(v.values()).map(|(a, b)| a + eps * b).collect() };
    let best = [1e-4, 1e-5, 1e-6]
        .iter()
        .map(|&eps| {
            let fd = (f.eval(&shifted(eps)) - f.eval(&shifted(-eps))) / (2.0 * eps);
            (fd - exact).abs() / (1.0 + exact.abs())
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

#[derive(Clone, Debug)]
pub struct Extremal {
    pub point: DofVector,
    pub iterations: usize,
    /// `‖gradient‖_∞` at the returned point.
    pub residual: f64,
}

/// Nonlinear conjugate gradients (Polak–Ribière+) until
/// `‖gradient(u)‖_∞ ≤ tol (1 + ‖gradient(u0)‖_∞)`.
///
/// Quadratic functionals get the exact line search; otherwise a safeguarded
/// secant search on the directional derivative is used. For non-convex
/// functionals the result is a local extremal.
pub fn find_extremal(
    f: &dyn DiscreteFunctional,
    u0: &DofVector,
    tol: f64,
    max_iter: usize,
) -> Result<Extremal, FunctionalError> {
    check_space(f, u0)?;
    let n = u0.values().len();
    let mut u = u0.values().to_vec();
    let mut g = f.gradient(&u);
    f.project(&mut g);
    let target = tol * (1.0 + norm_inf(&g));
    if norm_inf(&g) <= target {
        return Ok(Extremal { point: u0.clone(), iterations: 0, residual: norm_inf(&g) });
    }
    let mut d: Vec<f64> = g.iter().map(|x| -x).collect();
    let mut step_guess = 1.0 / norm_inf(&d).max(1e-300);
    for it in 1..=max_iter {
        let mut gd = dot(&g, &d);
        if gd >= 0.0 {
            d.iter_mut().zip(&g).for_each(|(di, gi)| *di = -gi);
            gd = -dot(&g, &g);
        }
        let t = if f.is_quadratic() {
            exact_step(f, &u, &d, &g, gd)
        } else {
            secant_step(f, &u, &d, gd, step_guess)
        };
        step_guess = t;
        u.iter_mut().zip(&d).for_each(|(ui, di)| *ui += t * di);
        let mut g_new = f.gradient(&u);
        f.project(&mut g_new);
        let res = norm_inf(&g_new);
        if res <= target {
            let point = DofVector { space: u0.space(), values: u };
            return Ok(Extremal { point, iterations: it, residual: res });
        }
        let gg = dot(&g, &g);
        let mut beta = (dot(&g_new, &g_new) - dot(&g_new, &g)) / gg;
        if beta < 0.0 || it % n.max(1) == 0 {
            beta = 0.0;
        }
        d.iter_mut().zip(&g_new).for_each(|(di, gi)| *di = -gi + beta * *di);
        g = g_new;
    }
    let residual = norm_inf(&g);
    Err(FunctionalError::MaxIter {
        best: DofVector { space: u0.space(), values: u },
        residual,
        iterations: max_iter,
    })
}

/// Minimizer of `t ↦ F(u + t d)` for quadratic `F`, from one extra gradient.
fn exact_step(f: &dyn DiscreteFunctional, u: &[f64], d: &[f64], g: &[f64], gd: f64) -> f64 {
    let probe: Vec<f64> = u.iter().zip(d).map(|(a, b)| a + b).collect();
    let mut g1 = f.gradient(&probe);
    f.project(&mut g1);
    let curvature: f64 = d.iter().zip(g1.iter().zip(g)).map(|(di, (a, b))| di * (a - b)).sum();
    if curvature > 0.0 {
        -gd / curvature
    } else {
        // not convex along d: fall back to the generic search
        secant_step(f, u, d, gd, 1.0)
    }
}

/// Approximate root of `φ'(t) = ∇F(u + t d)·d` with `φ'(0) = gd < 0`.
fn secant_step(f: &dyn DiscreteFunctional, u: &[f64], d: &[f64], gd: f64, guess: f64) -> f64 {
    let slope = |t: f64| -> f64 {
        let x: Vec<f64> = u.iter().zip(d).map(|(a, b)| a + t * b).collect();
        let mut g = f.gradient(&x);
        f.project(&mut g);
        dot(&g, d)
    };
    let (mut lo, mut slo) = (0.0, gd);
    let mut hi: Option<(f64, f64)> = None;
    let mut t = guess.max(1e-12);
    for _ in 0..60 {
        let s = slope(t);
        if s.abs() <= 1e-3 * gd.abs() {
            return t;
        }
        if s < 0.0 {
            lo = t;
            slo = s;
        } else {
            hi = Some((t, s));
        }
        t = match hi {
            Some((th, sh)) => {
                let cand = lo - slo * (th - lo) / (sh - slo);
                if cand > lo && cand < th {
                    cand
                } else {
                    0.5 * (lo + th)
                }
            }
            None => 2.0 * t,
        };
    }
    t
}

/// Defect of an exact algebraic identity `a + b = 0`, with the scale
/// `|a| + |b|` (term magnitudes summed) used to make it relative.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentityDefect {
    pub absolute: f64,
    pub scale: f64,
}

impl IdentityDefect {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.absolute / self.scale
        } else {
            self.absolute
        }
    }
}

/// Outcome of a coherence run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoherenceReport {
    pub scheme: String,
    pub mesh: String,
    pub probes: usize,
    pub max_abs: f64,
    pub max_rel: f64,
    pub tol: f64,
    pub pass: bool,
}

impl CoherenceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Debug)]
pub struct CoherenceConfig {
    pub scheme: String,
    pub mesh: String,
    pub probes: usize,
    pub seed: u64,
    pub tol: f64,
}

/// `(max_i |gradient[i] − mass[i]·residual[i]|, max_i |gradient[i]|)` at one state.
pub fn coherence_defect_at(
    f: &dyn DiscreteFunctional,
    residual: &[f64],
    mass: &[f64],
    u: &[f64],
) -> (f64, f64) {
    let g = f.gradient(u);
    let abs = g
        .iter()
        .zip(residual.iter().zip(mass))
        .map(|(gi, (ri, mi))| (gi - mi * ri).abs())
        .fold(0.0, f64::max);
    (abs, norm_inf(&g))
}

/// Compares the variational gradient with the mass-scaled residual of the
/// differential embedding at `probes` random states (uniform in `[-1,1]`
/// per degree of freedom, projected onto the variation space).
pub fn coherence_check<R>(
    f: &dyn DiscreteFunctional,
    residual: R,
    mass: &[f64],
    config: &CoherenceConfig,
) -> crate::Result<CoherenceReport>
where
    R: Fn(&[f64]) -> crate::Result<Vec<f64>> + Sync,
{
    let n = f.space().len();
    if mass.len() != n {
        return Err(crate::Error::DimensionMismatch { expected: n, got: mass.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let states: Vec<Vec<f64>> = (0..config.probes)
        .map(|_| {
            let mut u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            f.project(&mut u);
            u
        })
        .collect();
    let results = par::map_range(states.len(), |k| -> crate::Result<(f64, f64)> {
        let r = residual(&states[k])?;
        if r.len() != n {
            return Err(crate::Error::DimensionMismatch { expected: n, got: r.len() });
        }
        let (abs, scale) = coherence_defect_at(f, &r, mass, &states[k]);
        let rel = if scale > 0.0 {
            abs / scale
        } else if abs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        Ok((abs, rel))
    });
    let (mut max_abs, mut max_rel) = (0.0f64, 0.0f64);
    for r in results {
        let (a, b) = r?;
        max_abs = max_abs.max(a);
        max_rel = max_rel.max(b);
    }
    Ok(CoherenceReport {
        scheme: config.scheme.clone(),
        mesh: config.mesh.clone(),
        probes: config.probes,
        max_abs,
        max_rel,
        tol: config.tol,
        pass: max_rel <= config.tol,
    })
}
