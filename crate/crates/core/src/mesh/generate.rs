//! Structured mesh families on `[0,1]` and `[0,1]^2`.

use super::{MeshError, Point, PolyMesh};

/// Interval mesh with the given strictly increasing breakpoints.
pub fn interval(breaks: &[f64]) -> Result<PolyMesh, MeshError> {
    let vertices: Vec<Point> = breaks.iter().map(|&x| [x, 0.0]).collect();
    let cells = (0..breaks.len().saturating_sub(1)).map(|i| vec![i, i + 1]).collect();
    PolyMesh::new(1, vertices, cells)
}

pub fn uniform_interval(n: usize) -> Result<PolyMesh, MeshError> {
    let breaks: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    interval(&breaks)
}

fn lattice(nx: usize, ny: usize) -> Vec<Point> {
    let mut v = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            v.push([i as f64 / nx as f64, j as f64 / ny as f64]);
        }
    }
    v
}

/// `nx × ny` rectangles on the unit square.
pub fn cartesian(nx: usize, ny: usize) -> Result<PolyMesh, MeshError> {
    let id = |i: usize, j: usize| i + (nx + 1) * j;
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    PolyMesh::new(2, lattice(nx, ny), cells)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TriPattern {
    /// Each square split along its `(i,j)–(i+1,j+1)` diagonal: `2n²` triangles.
    Diagonal,
    /// Each square split by both diagonals through an added center: `4n²` triangles.
    CrissCross,
}

/// Triangulation of the unit square from an `n × n` lattice.
pub fn triangulated_square(n: usize, pattern: TriPattern) -> Result<PolyMesh, MeshError> {
    let id = |i: usize, j: usize| i + (n + 1) * j;
    let mut vertices = lattice(n, n);
    let mut cells = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            match pattern {
                TriPattern::Diagonal => {
                    cells.push(vec![a, b, c]);
                    cells.push(vec![a, c, d]);
                }
                TriPattern::CrissCross => {
                    let m = vertices.len();
                    vertices.push([(i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64]);
                    cells.push(vec![a, b, m]);
                    cells.push(vec![b, c, m]);
                    cells.push(vec![c, d, m]);
                    cells.push(vec![d, a, m]);
                }
            }
        }
    }
    PolyMesh::new(2, vertices, cells)
}

/// Cartesian quadrilaterals with interior vertices displaced by the smooth map
/// `y ↦ y + a sin(πx) sin(πy)`; the boundary is left in place.
pub fn perturbed_cartesian(n: usize, amplitude: f64) -> Result<PolyMesh, MeshError> {
    let pi = std::f64::consts::PI;
    let vertices = lattice(n, n)
        .into_iter()
        .map(|[x, y]| [x, y + amplitude * (pi * x).sin() * (pi * y).sin()])
        .collect();
    let id = |i: usize, j: usize| i + (n + 1) * j;
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            cells.push(vec![id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    PolyMesh::new(2, vertices, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families_cover_the_domain() {
        let meshes = [
            uniform_interval(7).unwrap(),
            interval(&[0.0, 0.13, 0.5, 0.51, 1.0]).unwrap(),
            cartesian(3, 5).unwrap(),
            triangulated_square(4, TriPattern::Diagonal).unwrap(),
            triangulated_square(3, TriPattern::CrissCross).unwrap(),
            perturbed_cartesian(6, 0.05).unwrap(),
        ];
        for m in &meshes {
            assert!((m.domain_measure() - 1.0).abs() < 1e-12);
            for k in 0..m.num_cells() {
                assert!(m.closure_defect(k) <= 1e-12 * m.perimeter(k));
                assert!(m.cells()[k].measure > 0.0);
            }
        }
    }

    #[test]
    fn triangle_counts() {
        for (n, t) in [(1, 2), (2, 8), (4, 32)] {
            assert_eq!(triangulated_square(n, TriPattern::Diagonal).unwrap().num_cells(), t);
        }
        assert_eq!(triangulated_square(2, TriPattern::CrissCross).unwrap().num_cells(), 16);
    }

    #[test]
    fn euler_characteristic() {
        // V - E + F = 1 for a disc
        let m = triangulated_square(5, TriPattern::CrissCross).unwrap();
        let chi = m.num_vertices() as i64 - m.num_faces() as i64 + m.num_cells() as i64;
        assert_eq!(chi, 1);
    }
}
