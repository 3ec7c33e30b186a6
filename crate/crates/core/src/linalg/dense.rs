//! Dense Gaussian elimination, kept as an independent oracle for tests.

use super::LinalgError;

pub const MAX_DENSE: usize = 500;

/// Solves `A x = b` with partial pivoting; `n ≤ 500`.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = b.len();
    if n > MAX_DENSE {
        return Err(LinalgError::TooLarge { n, cap: MAX_DENSE });
    }
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(LinalgError::Dimension { expected: n, got: a.len() });
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut x = b.to_vec();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        if m[p][c] == 0.0 {
            return Err(LinalgError::Singular);
        }
        m.swap(c, p);
        x.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            if f != 0.0 {
                for k in c..n {
                    m[r][k] -= f * m[c][k];
                }
                x[r] -= f * x[c];
            }
        }
    }
    for c in (0..n).rev() {
        let s: f64 = (c + 1..n).map(|k| m[c][k] * x[k]).sum();
        x[c] = (x[c] - s) / m[c][c];
    }
    Ok(x)
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m = a.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| m[i][j] * m[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if m[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[q][q] - m[p][p]) / (2.0 * m[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = vec![vec![12.0, -4.0], vec![-4.0, 12.0]];
        let x = solve(&a, &[1.0, 1.0]).unwrap();
        assert!((x[0] - 0.125).abs() < 1e-16 && (x[1] - 0.125).abs() < 1e-16);
    }

    #[test]
    fn eigenvalues_of_known_matrix() {
        // tridiag(-1,2,-1) of size 3: 2 - sqrt2, 2, 2 + sqrt2
        let a = vec![vec![2.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 2.0]];
        let ev = symmetric_eigenvalues(&a);
        let s = 2f64.sqrt();
        for (e, x) in ev.iter().zip([2.0 - s, 2.0, 2.0 + s]) {
            assert!((e - x).abs() < 1e-12);
        }
    }

    #[test]
    fn caps_size() {
        let n = MAX_DENSE + 1;
        assert!(matches!(solve(&vec![vec![0.0; n]; n], &vec![0.0; n]), Err(LinalgError::TooLarge { .. })));
    }
}
