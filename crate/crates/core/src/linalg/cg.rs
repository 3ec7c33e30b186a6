use super::{dot, norm2, LinalgError, LinearOperator, SparseMatrix};

#[derive(Clone, Copy, Debug)]
pub struct CgOptions {
    /// Stop when `‖b − Ax‖₂ ≤ tol ‖b‖₂`.
    pub tol: f64,
    pub max_iter: usize,
    pub jacobi: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 10_000, jacobi: false }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for an SPD sparse matrix.
pub fn cg_solve(a: &SparseMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>, LinalgError> {
    let opts = CgOptions { tol, max_iter, jacobi: false };
    cg_solve_operator(a, b, None, opts).map(|(x, _)| x)
}

/// Preconditioned conjugate gradients on any [`LinearOperator`].
///
/// The true residual is recomputed before declaring convergence. A
/// non-positive curvature `pᵀAp ≤ 0` aborts with
/// [`LinalgError::NotPositiveDefinite`].
pub fn cg_solve_operator(
    a: &dyn LinearOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: CgOptions,
) -> Result<(Vec<f64>, CgStats), LinalgError> {
    let n = a.dim();
    if b.len() != n {
        return Err(LinalgError::Dimension { expected: n, got: b.len() });
    }
    let bnorm = norm2(b);
    let mut x = match x0 {
        Some(x0) => x0.to_vec(),
        None => vec![0.0; n],
    };
    if bnorm == 0.0 && x0.is_none() {
        return Ok((x, CgStats { iterations: 0, relative_residual: 0.0 }));
    }
    let scale = if bnorm == 0.0 { 1.0 } else { bnorm };
    let inv_diag: Option<Vec<f64>> = if opts.jacobi {
        a.diagonal().map(|d| d.iter().map(|&v| if v > 0.0 { 1.0 / v } else { 1.0 }).collect())
    } else {
        None
    };
    let precond = |r: &[f64], z: &mut [f64]| match &inv_diag {
        Some(m) => z.iter_mut().zip(r.iter().zip(m)).for_each(|(zi, (ri, mi))| *zi = ri * mi),
        None => z.copy_from_slice(r),
    };

    let mut ax = vec![0.0; n];
    a.apply(&x, &mut ax)?;
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = norm2(&r) / scale;
    let mut it = 0;
    while it < opts.max_iter {
        if res <= opts.tol {
            // confirm with the true residual to avoid drift
            a.apply(&x, &mut ax)?;
            let true_res = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt() / scale;
            if true_res <= opts.tol {
                return Ok((x, CgStats { iterations: it, relative_residual: true_res }));
            }
            r.iter_mut().zip(b.iter().zip(&ax)).for_each(|(ri, (bi, ai))| *ri = bi - ai);
            precond(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        a.apply(&p, &mut ap)?;
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 {
            return Err(LinalgError::NotPositiveDefinite { iteration: it, curvature });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = norm2(&r) / scale;
        it += 1;
    }
    a.apply(&x, &mut ax)?;
    let true_res = b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt() / scale;
    if true_res <= opts.tol {
        return Ok((x, CgStats { iterations: it, relative_residual: true_res }));
    }
    Err(LinalgError::NotConverged { iterations: it, residual: true_res })
}
