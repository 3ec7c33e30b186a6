//! Scheme operators checked against independently assembled oracles.

#![allow(clippy::needless_range_loop)]

use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use varembed::fd::{self, FdLagrangian, NodalField, NodalVectorField, StencilPair};
use varembed::fem::{FemLagrangian, P1Space};
use varembed::functional::DiscreteFunctional;
use varembed::fv::FiniteVolume;
use varembed::mesh::generate::{cartesian, perturbed_cartesian, triangulated_square, uniform_interval, TriPattern};
use varembed::mesh::quadrature::CellQuadrature;
use varembed::mesh::{CartesianGrid, CenteredMesh, PolyMesh};
use varembed::mfd::{self, InnerProductMode, Mimetic};
use varembed::problem::{poisson_lagrangian, Diffusivity, ScalarField};

fn centered(mesh: PolyMesh) -> CenteredMesh {
    CenteredMesh::centroidal(mesh).unwrap()
}

/// Plain Gaussian elimination with partial pivoting.
fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

#[test]
fn fd_divergence_is_minus_adjoint_of_gradient_on_variation_space() {
    for dim in 1..=2 {
        for n in 2..=6 {
            let grid = CartesianGrid::new(dim, n).unwrap();
            let nodes = grid.num_nodes();
            for stencil in [StencilPair::ForwardBackward, StencilPair::BackwardForward] {
                // columns of the gradient and divergence matrices from unit vectors
                let grad_cols: Vec<Vec<f64>> = (0..nodes)
                    .map(|j| {
                        let mut e = vec![0.0; nodes];
                        e[j] = 1.0;
                        stencil.grad(&NodalField::new(grid, e).unwrap()).values().to_vec()
                    })
                    .collect();
                for c in 0..nodes * dim {
                    let mut e = vec![0.0; nodes * dim];
                    e[c] = 1.0;
                    let div = stencil.div(&NodalVectorField::new(grid, e).unwrap());
                    for j in (0..nodes).filter(|&j| !grid.is_boundary(j)) {
                        assert_relative_eq!(div.values()[j], -grad_cols[j][c], epsilon = 1e-12);
                    }
                }
            }
        }
    }
}

#[test]
fn fd_poisson_matrix_is_the_standard_stencil() {
    let one = ScalarField::constant(1.0);
    let n = 5;
    let grid = CartesianGrid::new(1, n).unwrap();
    let h = grid.h();
    let a = fd::poisson_matrix(&poisson_lagrangian(one.clone(), Diffusivity::identity(1)), grid, StencilPair::ForwardBackward)
        .unwrap();
    for r in 0..n - 1 {
        for c in 0..n - 1 {
            let expect = match r.abs_diff(c) {
                0 => 2.0 / h,
                1 => -1.0 / h,
                _ => 0.0,
            };
            assert_relative_eq!(a.get(r, c), expect, epsilon = 1e-12);
        }
    }

    let grid = CartesianGrid::new(2, 4).unwrap();
    for stencil in [StencilPair::ForwardBackward, StencilPair::BackwardForward] {
        let a = fd::poisson_matrix(&poisson_lagrangian(one.clone(), Diffusivity::identity(2)), grid, stencil).unwrap();
        // interior nodes are a 3×3 block; 5-point Laplacian times h², divided by h²
        for r in 0..9usize {
            for c in 0..9usize {
                let (ri, rj, ci, cj) = (r % 3, r / 3, c % 3, c / 3);
                let expect = match ri.abs_diff(ci) + rj.abs_diff(cj) {
                    0 => 4.0,
                    1 => -1.0,
                    _ => 0.0,
                };
                assert_relative_eq!(a.get(r, c), expect, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn fd_gradient_of_quadratic_is_matrix_times_state() {
    let grid = CartesianGrid::new(2, 5).unwrap();
    let alpha = Diffusivity::diagonal(&[1.0, 3.0]).unwrap();
    let l = poisson_lagrangian(ScalarField::constant(0.0), alpha);
    let a = fd::poisson_matrix(&l, grid, StencilPair::BackwardForward).unwrap();
    let f = FdLagrangian::new(&l, grid, StencilPair::BackwardForward).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut u: Vec<f64> = (0..grid.num_nodes()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    f.project(&mut u);
    let interior = grid.interior_nodes();
    let reduced: Vec<f64> = interior.iter().map(|&k| u[k]).collect();
    let au = a.mul_vec(&reduced);
    let g = f.gradient(&u);
    for (r, &k) in interior.iter().enumerate() {
        assert_relative_eq!(g[k], au[r], epsilon = 1e-12);
    }
}

/// Classic P1 stiffness on a triangle: `K_ij = (e_i · e_j) / (4A)` with `e_i`
/// the edge opposite vertex `i`, oriented counter-clockwise.
fn edge_formula_stiffness(mesh: &PolyMesh) -> Vec<Vec<f64>> {
    let n = mesh.num_vertices();
    let mut k = vec![vec![0.0; n]; n];
    for cell in mesh.cells() {
        let p: Vec<[f64; 2]> = cell.vertices.iter().map(|&v| mesh.vertices()[v]).collect();
        let edge = |i: usize| {
            let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
            [b[0] - a[0], b[1] - a[1]]
        };
        for i in 0..3 {
            for j in 0..3 {
                let (ei, ej) = (edge(i), edge(j));
                k[cell.vertices[i]][cell.vertices[j]] += (ei[0] * ej[0] + ei[1] * ej[1]) / (4.0 * cell.measure);
            }
        }
    }
    k
}

#[test]
fn fem_stiffness_matches_edge_formula() {
    let two = PolyMesh::new(2, vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]], vec![vec![0, 1, 2], vec![0, 2, 3]])
        .unwrap();
    let k = edge_formula_stiffness(&two);
    // the two-triangle square by hand
    assert_relative_eq!(k[0][0], 1.0, epsilon = 1e-14);
    assert_relative_eq!(k[1][1], 1.0, epsilon = 1e-14);
    assert_relative_eq!(k[0][1], -0.5, epsilon = 1e-14);
    assert_relative_eq!(k[0][2], 0.0, epsilon = 1e-14);

    let l = poisson_lagrangian(ScalarField::constant(0.0), Diffusivity::identity(2));
    for mesh in [
        two,
        triangulated_square(3, TriPattern::Diagonal).unwrap(),
        triangulated_square(2, TriPattern::CrissCross).unwrap(),
    ] {
        let k = edge_formula_stiffness(&mesh);
        let space = P1Space::new(mesh, CellQuadrature::Midpoint).unwrap();
        let f = FemLagrangian::new(&l, &space).unwrap();
        let n = space.num_nodes();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let g = f.gradient(&e);
            for i in 0..n {
                let expect = if space.boundary_mask()[i] { 0.0 } else { k[i][j] };
                assert_relative_eq!(g[i], expect, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn fv_matrix_matches_five_point_oracle() {
    let n = 3;
    let fv = FiniteVolume::new(centered(cartesian(n, n).unwrap())).unwrap();
    let a = fv.matrix().to_dense();
    // cell centers of a uniform grid: interior transmissibility 1, boundary 2
    let cell = |x: &[f64]| ((x[0] * n as f64) as usize, (x[1] * n as f64) as usize);
    let ids: Vec<(usize, usize)> = fv.mesh().cell_centers().iter().map(|c| cell(c)).collect();
    let mut oracle = vec![vec![0.0; n * n]; n * n];
    for (r, &(i, j)) in ids.iter().enumerate() {
        for (c, &(i2, j2)) in ids.iter().enumerate() {
            if i.abs_diff(i2) + j.abs_diff(j2) == 1 {
                oracle[r][c] = -1.0;
                oracle[r][r] += 1.0;
            }
        }
        let boundary_sides = [i == 0, i == n - 1, j == 0, j == n - 1].iter().filter(|&&b| b).count();
        oracle[r][r] += 2.0 * boundary_sides as f64;
    }
    for r in 0..n * n {
        for c in 0..n * n {
            assert_relative_eq!(a[r][c], oracle[r][c], epsilon = 1e-12);
        }
    }
    let f = ScalarField::new(|x| x[0] + 2.0 * x[1]);
    let b: Vec<f64> = fv
        .interpolate(&f)
        .iter()
        .zip(fv.measures())
        .map(|(v, m)| v * m)
        .collect();
    let expect = gauss(oracle, b);
    let u = fv.solve(&f, 1e-14).unwrap();
    for (x, y) in u.iter().zip(&expect) {
        assert_relative_eq!(x, y, epsilon = 1e-12);
    }
}

#[test]
fn fv_hessian_is_the_matrix_and_spd() {
    let fv = FiniteVolume::new(centered(uniform_interval(4).unwrap())).unwrap();
    let l = fv.lagrangian(&ScalarField::constant(0.0));
    let a = fv.matrix().to_dense();
    for j in 0..4 {
        let mut e = vec![0.0; 4];
        e[j] = 1.0;
        let g = l.gradient(&e);
        for i in 0..4 {
            assert_relative_eq!(g[i], a[i][j], epsilon = 1e-12);
        }
    }
    // Cholesky succeeds only for SPD matrices
    let mut c = a.clone();
    for k in 0..4 {
        assert!(c[k][k] > 0.0);
        c[k][k] = c[k][k].sqrt();
        for i in k + 1..4 {
            c[i][k] /= c[k][k];
        }
        for i in k + 1..4 {
            for j in k + 1..=i {
                c[i][j] -= c[i][k] * c[j][k];
            }
        }
    }
    for (i, row) in a.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            assert_relative_eq!(*v, a[j][i], epsilon = 1e-15);
        }
    }
}

#[test]
fn rt0_mass_matches_closed_form() {
    let mesh = PolyMesh::new(2, vec![[0.0, 0.0], [2.0, 0.3], [0.4, 1.5]], vec![vec![0, 1, 2]]).unwrap();
    let cell = mesh.cells()[0].clone();
    let p: Vec<[f64; 2]> = cell.vertices.iter().map(|&v| mesh.vertices()[v]).collect();
    let area = cell.measure;
    let c = cell.centroid;
    let len = |i: usize| {
        let (a, b) = (p[i], p[(i + 1) % 3]);
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
    };
    let spread: f64 = p.iter().map(|q| (q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2)).sum::<f64>() / 12.0;
    let alpha = 2.0;
    let m = Mimetic::new(centered(mesh), Diffusivity::scalar(2, alpha).unwrap(), InnerProductMode::Rt0Lifting).unwrap();
    let local = m.inner_product().local(0);
    for i in 0..3 {
        for j in 0..3 {
            // ψ_i = |e_i|/(2|K|) (x − P_i) with P_i opposite face i
            let (a, b) = (p[(i + 2) % 3], p[(j + 2) % 3]);
            let moment = area * ((c[0] - a[0]) * (c[0] - b[0]) + (c[1] - a[1]) * (c[1] - b[1]) + spread);
            let expect = len(i) * len(j) / (4.0 * area * area) * moment / alpha;
            assert_relative_eq!(local[i * 3 + j], expect, max_relative = 1e-12);
        }
    }
}

#[test]
fn rectangle_rt0_mass_couples_only_opposite_faces() {
    // on a rectangle [0,a]×[0,b] the x-fluxes decouple from the y-fluxes and
    // the 2×2 block is (|e| a / 3)[[1, -1/2], [-1/2, 1]] with outward signs
    let mesh = cartesian(1, 1).unwrap();
    let m = Mimetic::new(centered(mesh.clone()), Diffusivity::identity(2), InnerProductMode::Rt0Lifting).unwrap();
    let local = m.inner_product().local(0);
    let cell = &mesh.cells()[0];
    for i in 0..4 {
        for j in 0..4 {
            let ni = mesh.outward_normal(cell.faces[i]);
            let nj = mesh.outward_normal(cell.faces[j]);
            let cos = ni[0] * nj[0] + ni[1] * nj[1];
            let expect = if i == j {
                1.0 / 3.0
            } else if cos < -0.5 {
                -1.0 / 6.0
            } else {
                0.0
            };
            assert_relative_eq!(local[i * 4 + j], expect, epsilon = 1e-13);
        }
    }
}

#[test]
fn div_commutation_defect_converges_for_smooth_fields() {
    let q = |x: &[f64], out: &mut [f64]| {
        out[0] = x[1].sin() * x[0].exp();
        out[1] = x[0] * x[1] * x[1];
    };
    let div_q = |x: &[f64]| x[1].sin() * x[0].exp() + 2.0 * x[0] * x[1];
    let defects: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| mfd::div_commutation_defect(&perturbed_cartesian(n, 0.1).unwrap(), q, div_q, CellQuadrature::Refined(3)))
        .collect();
    for w in defects.windows(2) {
        assert!(w[1] < w[0], "{defects:?}");
        assert!((w[0] / w[1]).log2() > 1.8, "{defects:?}");
    }
}
