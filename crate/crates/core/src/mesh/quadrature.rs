//! Cell and face quadrature on polytopal meshes.

use super::{Point, PolyMesh};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CellQuadrature {
    /// One point at the centroid, weight `|K|`; exact for affine integrands.
    #[default]
    Midpoint,
    /// Subdivision into `k` pieces per edge with a degree-2 (1D: degree-3)
    /// rule on each piece. `Refined(1)` is exact for quadratics.
    Refined(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadPoint {
    pub x: Point,
    pub weight: f64,
}

const GAUSS2: f64 = 0.288_675_134_594_812_9; // 1 / (2 sqrt 3)

/// Quadrature points of `cell` under `rule`; the weights sum to `|K|`.
pub fn cell_points(mesh: &PolyMesh, cell: usize, rule: CellQuadrature) -> Vec<QuadPoint> {
    let c = &mesh.cells()[cell];
    let k = match rule {
        CellQuadrature::Midpoint => return vec![QuadPoint { x: c.centroid, weight: c.measure }],
        CellQuadrature::Refined(k) => k.max(1),
    };
    let pts: Vec<Point> = c.vertices.iter().map(|&v| mesh.vertices()[v]).collect();
    if mesh.dim() == 1 {
        return interval_points(pts[0][0], pts[1][0], k);
    }
    if pts.len() == 3 {
        return triangle_points(pts[0], pts[1], pts[2], k);
    }
    let m = pts.len();
    (0..m)
        .flat_map(|i| triangle_points(c.centroid, pts[i], pts[(i + 1) % m], k))
        .collect()
}

fn interval_points(a: f64, b: f64, k: usize) -> Vec<QuadPoint> {
    let h = (b - a) / k as f64;
    (0..k)
        .flat_map(|i| {
            let mid = a + (i as f64 + 0.5) * h;
            [-GAUSS2, GAUSS2].map(|s| QuadPoint { x: [mid + s * h, 0.0], weight: 0.5 * h })
        })
        .collect()
}

/// Edge-midpoint rule on each of the `k²` congruent sub-triangles.
pub fn triangle_points(p0: Point, p1: Point, p2: Point, k: usize) -> Vec<QuadPoint> {
    let e1 = [(p1[0] - p0[0]) / k as f64, (p1[1] - p0[1]) / k as f64];
    let e2 = [(p2[0] - p0[0]) / k as f64, (p2[1] - p0[1]) / k as f64];
    let at = |i: f64, j: f64| [p0[0] + i * e1[0] + j * e2[0], p0[1] + i * e1[1] + j * e2[1]];
    let sub_area = 0.5 * (e1[0] * e2[1] - e1[1] * e2[0]).abs();
    let mut out = Vec::with_capacity(3 * k * k);
    let mut push = |a: Point, b: Point, c: Point| {
        for (u, v) in [(a, b), (b, c), (c, a)] {
            out.push(QuadPoint { x: [0.5 * (u[0] + v[0]), 0.5 * (u[1] + v[1])], weight: sub_area / 3.0 });
        }
    };
    for j in 0..k {
        for i in 0..k - j {
            let (fi, fj) = (i as f64, j as f64);
            push(at(fi, fj), at(fi + 1.0, fj), at(fi, fj + 1.0));
            if i + j + 1 < k {
                push(at(fi + 1.0, fj), at(fi + 1.0, fj + 1.0), at(fi, fj + 1.0));
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FaceQuadrature {
    /// Face midpoint; exact for affine integrands.
    #[default]
    Midpoint,
    /// Two-point Gauss; exact for cubics along the face.
    Gauss2,
}

/// Quadrature points of `face`; the weights sum to `|e|`.
pub fn face_points(mesh: &PolyMesh, face: usize, rule: FaceQuadrature) -> Vec<QuadPoint> {
    let f = &mesh.faces()[face];
    if mesh.dim() == 1 || rule == FaceQuadrature::Midpoint {
        return vec![QuadPoint { x: f.center, weight: f.measure }];
    }
    let (p, q) = (mesh.vertices()[f.vertices[0]], mesh.vertices()[f.vertices[1]]);
    [0.5 - GAUSS2, 0.5 + GAUSS2]
        .map(|s| QuadPoint { x: [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])], weight: 0.5 * f.measure })
        .to_vec()
}

/// `∫_K g` under `rule`.
pub fn integrate_cell(mesh: &PolyMesh, cell: usize, rule: CellQuadrature, g: impl Fn(Point) -> f64) -> f64 {
    cell_points(mesh, cell, rule).iter().map(|q| q.weight * g(q.x)).sum()
}
