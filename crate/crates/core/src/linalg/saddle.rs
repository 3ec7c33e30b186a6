use super::{cg_solve_operator, norm2, CgOptions, LinalgError, LinearOperator, SparseMatrix};

/// Block system `[[M, Bᵀ], [B, 0]] [p; u] = [rhs_p; rhs_u]` with `M` SPD.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub m: SparseMatrix,
    pub b: SparseMatrix,
    pub rhs_p: Vec<f64>,
    pub rhs_u: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SaddleSolution {
    pub p: Vec<f64>,
    pub u: Vec<f64>,
    pub outer_iterations: usize,
    /// `‖M p + Bᵀu − rhs_p‖₂` relative to the right-hand side.
    pub residual_p: f64,
    /// `‖B p − rhs_u‖₂` relative to the right-hand side.
    pub residual_u: f64,
}

impl SaddleSystem {
    pub fn num_p(&self) -> usize {
        self.m.rows()
    }

    pub fn num_u(&self) -> usize {
        self.b.rows()
    }

    /// The full symmetric indefinite matrix, unknowns ordered `(p, u)`.
    pub fn full_matrix(&self) -> SparseMatrix {
        let np = self.num_p();
        let mut t = Vec::with_capacity(self.m.nnz() + 2 * self.b.nnz());
        for r in 0..np {
            t.extend(self.m.row(r).map(|(c, v)| (r, c, v)));
        }
        for r in 0..self.num_u() {
            for (c, v) in self.b.row(r) {
                t.push((np + r, c, v));
                t.push((c, np + r, v));
            }
        }
        let n = np + self.num_u();
        SparseMatrix::from_triplets(n, n, &t)
    }

    /// Block residuals `(M p + Bᵀu − rhs_p, B p − rhs_u)`.
    pub fn residual(&self, p: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut rp = self.m.mul_vec(p);
        let btu = self.b.transpose().mul_vec(u);
        for i in 0..rp.len() {
            rp[i] += btu[i] - self.rhs_p[i];
        }
        let mut ru = self.b.mul_vec(p);
        for i in 0..ru.len() {
            ru[i] -= self.rhs_u[i];
        }
        (rp, ru)
    }
}

/// `u ↦ B M⁻¹ Bᵀ u` with inner conjugate-gradient solves on `M`.
struct Schur<'a> {
    m: &'a SparseMatrix,
    b: &'a SparseMatrix,
    bt: SparseMatrix,
    inner: CgOptions,
}

impl Schur<'_> {
    fn solve_m(&self, rhs: &[f64]) -> Result<Vec<f64>, LinalgError> {
        cg_solve_operator(self.m, rhs, None, self.inner)
            .map(|(x, _)| x)
            .map_err(|e| LinalgError::Block { block: "inner flux-mass", source: Box::new(e) })
    }
}

impl LinearOperator for Schur<'_> {
    fn dim(&self) -> usize {
        self.b.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<(), LinalgError> {
        let w = self.bt.mul_vec(x);
        let z = self.solve_m(&w)?;
        self.b.mul_vec_into(&z, y);
        Ok(())
    }

    fn diagonal(&self) -> Option<Vec<f64>> {
        let dm = self.m.diagonal_entries();
        Some(
            (0..self.b.rows())
                .map(|r| self.b.row(r).map(|(c, v)| v * v / dm[c]).sum())
                .collect(),
        )
    }
}

/// Solves the saddle system through its Schur complement
/// `(B M⁻¹ Bᵀ) u = B M⁻¹ rhs_p − rhs_u`, then recovers `p = M⁻¹(rhs_p − Bᵀu)`.
///
/// Requires `B` to have full row rank so the Schur complement is SPD.
pub fn saddle_solve(system: &SaddleSystem, tol: f64) -> Result<SaddleSolution, LinalgError> {
    let (np, nu) = (system.num_p(), system.num_u());
    if system.b.cols() != np || system.rhs_p.len() != np || system.rhs_u.len() != nu {
        return Err(LinalgError::Dimension { expected: np, got: system.b.cols() });
    }
    let inner = CgOptions { tol: (tol * 1e-3).max(1e-15), max_iter: 20 * np + 100, jacobi: true };
    let schur = Schur { m: &system.m, b: &system.b, bt: system.b.transpose(), inner };

    let scale = (norm2(&system.rhs_p).powi(2) + norm2(&system.rhs_u).powi(2)).sqrt();
    if scale == 0.0 {
        return Ok(SaddleSolution {
            p: vec![0.0; np],
            u: vec![0.0; nu],
            outer_iterations: 0,
            residual_p: 0.0,
            residual_u: 0.0,
        });
    }

    let mp = schur.solve_m(&system.rhs_p)?;
    let mut g = system.b.mul_vec(&mp);
    for (gi, ri) in g.iter_mut().zip(&system.rhs_u) {
        *gi -= ri;
    }
    let outer = CgOptions { tol: tol * 0.1, max_iter: 20 * nu + 100, jacobi: true };
    let (u, stats) = cg_solve_operator(&schur, &g, None, outer)
        .map_err(|e| LinalgError::Block { block: "outer Schur complement", source: Box::new(e) })?;

    let btu = schur.bt.mul_vec(&u);
    let rhs: Vec<f64> = system.rhs_p.iter().zip(&btu).map(|(a, b)| a - b).collect();
    let p = schur.solve_m(&rhs)?;

    let (rp, ru) = system.residual(&p, &u);
    let residual_p = norm2(&rp) / scale;
    let residual_u = norm2(&ru) / scale;
    if residual_p > tol || residual_u > tol {
        return Err(LinalgError::NotConverged {
            iterations: stats.iterations,
            residual: residual_p.max(residual_u),
        });
    }
    Ok(SaddleSolution { p, u, outer_iterations: stats.iterations, residual_p, residual_u })
}
