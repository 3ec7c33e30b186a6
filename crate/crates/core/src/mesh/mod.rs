//! Geometric carriers: uniform Cartesian grids for finite differences and
//! conformal polytopal meshes (1D intervals, 2D polygons) for the finite
//! element, finite volume and mimetic schemes.

mod centered;
pub mod generate;
mod grid;
pub mod io;
pub mod quadrature;

use std::collections::HashMap;

use thiserror::Error;

pub use centered::{check_admissibility, AdmissibilityViolation, CenteredMesh, Centers, DEFAULT_ANGLE_TOL};
pub use grid::CartesianGrid;

/// Points carry two coordinates; 1D meshes leave the second at zero.
pub type Point = [f64; 2];

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("unsupported mesh dimension {0}")]
    UnsupportedDimension(usize),
    #[error("cell {cell} references missing vertex {vertex}")]
    MissingVertex { cell: usize, vertex: usize },
    #[error("cell {cell} has {count} vertices")]
    BadCellSize { cell: usize, count: usize },
    #[error("cell {0} has zero measure")]
    ZeroMeasure(usize),
    #[error("cell {0} has inconsistent orientation")]
    Orientation(usize),
    #[error("non-conformal mesh: {0}")]
    NonConformal(String),
    #[error("center of cell {0} lies outside the cell")]
    CenterOutside(usize),
    #[error("center of boundary face {0} does not lie on the face")]
    FaceCenterOffFace(usize),
    #[error("face {0} has zero center distance")]
    ZeroDistance(usize),
    #[error("expected {expected} centers, got {got}")]
    CenterCount { expected: usize, got: usize },
    #[error("mesh is not admissible: {} violating face(s)", .0.len())]
    NotAdmissible(Vec<AdmissibilityViolation>),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A face (edge in 2D, point in 1D) with its canonical orientation.
///
/// `normal` is the unit normal pointing out of `owner`; for the neighbour
/// the outward normal is `-normal`. The owner is always the incident cell
/// with the lowest index.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub vertices: Vec<usize>,
    pub owner: usize,
    pub neighbor: Option<usize>,
    pub measure: f64,
    pub center: Point,
    pub normal: Point,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.neighbor.is_none()
    }

    /// `+1` for the owner, `-1` for the neighbour.
    pub fn sign_for(&self, cell: usize) -> f64 {
        if cell == self.owner {
            1.0
        } else {
            debug_assert_eq!(Some(cell), self.neighbor);
            -1.0
        }
    }
}

/// Reference from a cell to one of its faces.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellFace {
    pub face: usize,
    /// Orientation of the canonical normal relative to this cell's outward normal.
    pub sign: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    /// Vertex indices: `[left, right]` in 1D, counter-clockwise in 2D.
    pub vertices: Vec<usize>,
    /// Faces in local order; in 2D local face `i` joins vertices `i` and `i+1`.
    pub faces: Vec<CellFace>,
    pub measure: f64,
    pub centroid: Point,
}

/// Conformal polytopal mesh of a connected domain.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<Cell>,
    faces: Vec<Face>,
}

impl PolyMesh {
    /// Builds faces by matching cell boundaries.
    ///
    /// Faces are sorted by owner index, then by center coordinates; that order
    /// is the face-construction order used by the mesh file format.
    pub fn new(dim: usize, vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self, MeshError> {
        for (c, cell) in cells.iter().enumerate() {
            if let Some(&v) = cell.iter().find(|&&v| v >= vertices.len()) {
                return Err(MeshError::MissingVertex { cell: c, vertex: v });
            }
        }
        match dim {
            1 => Self::build_1d(vertices, cells),
            2 => Self::build_2d(vertices, cells),
            d => Err(MeshError::UnsupportedDimension(d)),
        }
    }

    fn build_1d(vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self, MeshError> {
        let mut incident: HashMap<usize, Vec<(usize, f64)>> = HashMap::new();
        let mut built = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() != 2 {
                return Err(MeshError::BadCellSize { cell: c, count: cell.len() });
            }
            let (a, b) = (vertices[cell[0]][0], vertices[cell[1]][0]);
            if a == b {
                return Err(MeshError::ZeroMeasure(c));
            }
            if a > b {
                return Err(MeshError::Orientation(c));
            }
            incident.entry(cell[0]).or_default().push((c, -1.0));
            incident.entry(cell[1]).or_default().push((c, 1.0));
            built.push(Cell {
                vertices: cell.clone(),
                faces: Vec::new(),
                measure: b - a,
                centroid: [0.5 * (a + b), 0.0],
            });
        }
        let mut faces = Vec::new();
        for (&v, inc) in &incident {
            let face = match inc.as_slice() {
                [(k, s)] => Face {
                    vertices: vec![v],
                    owner: *k,
                    neighbor: None,
                    measure: 1.0,
                    center: vertices[v],
                    normal: [*s, 0.0],
                },
                [(k1, s1), (k2, s2)] => {
                    if s1 == s2 {
                        return Err(MeshError::NonConformal(format!(
                            "cells {k1} and {k2} overlap at vertex {v}"
                        )));
                    }
                    let (owner, neighbor, s) = if k1 < k2 { (*k1, *k2, *s1) } else { (*k2, *k1, *s2) };
                    Face {
                        vertices: vec![v],
                        owner,
                        neighbor: Some(neighbor),
                        measure: 1.0,
                        center: vertices[v],
                        normal: [s, 0.0],
                    }
                }
                _ => {
                    return Err(MeshError::NonConformal(format!(
                        "vertex {v} shared by {} cells",
                        inc.len()
                    )))
                }
            };
            faces.push(face);
        }
        let boundary = faces.iter().filter(|f| f.is_boundary()).count();
        if boundary != 2 {
            return Err(MeshError::NonConformal(format!(
                "interval mesh has {boundary} boundary points (overlapping or disconnected cells)"
            )));
        }
        Ok(Self::finish(1, vertices, built, faces))
    }

    fn build_2d(vertices: Vec<Point>, cells: Vec<Vec<usize>>) -> Result<Self, MeshError> {
        // edge key (min, max) -> list of (cell, local index, forward?)
        let mut edges: HashMap<(usize, usize), Vec<(usize, bool)>> = HashMap::new();
        let mut built = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let k = cell.len();
            if k < 3 {
                return Err(MeshError::BadCellSize { cell: c, count: k });
            }
            let pts: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
            let (area, centroid) = polygon_area_centroid(&pts);
            let scale = pts
                .iter()
                .map(|p| (p[0] - pts[0][0]).abs().max((p[1] - pts[0][1]).abs()))
                .fold(0.0, f64::max);
            if area.abs() <= 1e-14 * scale * scale || scale == 0.0 {
                return Err(MeshError::ZeroMeasure(c));
            }
            if area < 0.0 {
                return Err(MeshError::Orientation(c));
            }
            for i in 0..k {
                let (a, b) = (cell[i], cell[(i + 1) % k]);
                if a == b {
                    return Err(MeshError::ZeroMeasure(c));
                }
                edges.entry((a.min(b), a.max(b))).or_default().push((c, a < b));
            }
            built.push(Cell { vertices: cell.clone(), faces: Vec::new(), measure: area, centroid });
        }
        let mut faces = Vec::with_capacity(edges.len());
        for (&(a, b), inc) in &edges {
            let (owner, neighbor, forward) = match inc.as_slice() {
                [(k, fwd)] => (*k, None, *fwd),
                [(k1, f1), (k2, f2)] => {
                    if f1 == f2 {
                        return Err(MeshError::Orientation(*k1.max(k2)));
                    }
                    if k1 == k2 {
                        return Err(MeshError::NonConformal(format!("cell {k1} repeats edge {a}-{b}")));
                    }
                    if k1 < k2 {
                        (*k1, Some(*k2), *f1)
                    } else {
                        (*k2, Some(*k1), *f2)
                    }
                }
                _ => {
                    return Err(MeshError::NonConformal(format!(
                        "edge {a}-{b} shared by {} cells",
                        inc.len()
                    )))
                }
            };
            // owner traverses the edge from p to q (counter-clockwise)
            let (p, q) = if forward { (vertices[a], vertices[b]) } else { (vertices[b], vertices[a]) };
            let t = [q[0] - p[0], q[1] - p[1]];
            let len = t[0].hypot(t[1]);
            faces.push(Face {
                vertices: if forward { vec![a, b] } else { vec![b, a] },
                owner,
                neighbor,
                measure: len,
                center: [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])],
                normal: [t[1] / len, -t[0] / len],
            });
        }
        check_hanging_vertices(&vertices, &faces)?;
        Ok(Self::finish(2, vertices, built, faces))
    }

    fn finish(dim: usize, vertices: Vec<Point>, mut cells: Vec<Cell>, mut faces: Vec<Face>) -> Self {
        faces.sort_by(|f, g| {
            f.owner
                .cmp(&g.owner)
                .then(f.center[0].total_cmp(&g.center[0]))
                .then(f.center[1].total_cmp(&g.center[1]))
        });
        let mut lookup: HashMap<Vec<usize>, usize> = HashMap::new();
        for (i, f) in faces.iter().enumerate() {
            let mut key = f.vertices.clone();
            key.sort_unstable();
            lookup.insert(key, i);
        }
        for (c, cell) in cells.iter_mut().enumerate() {
            let k = cell.vertices.len();
            let locals: Vec<Vec<usize>> = if dim == 1 {
                vec![vec![cell.vertices[0]], vec![cell.vertices[1]]]
            } else {
                (0..k)
                    .map(|i| {
                        let (a, b) = (cell.vertices[i], cell.vertices[(i + 1) % k]);
                        vec![a.min(b), a.max(b)]
                    })
                    .collect()
            };
            cell.faces = locals
                .into_iter()
                .map(|key| {
                    let face = lookup[&key];
                    CellFace { face, sign: faces[face].sign_for(c) }
                })
                .collect();
        }
        Self { dim, vertices, cells, faces }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.faces.len()).filter(|&f| self.faces[f].is_boundary())
    }

    /// Outward unit normal of `face` as seen from the cell with the given sign.
    pub fn outward_normal(&self, cf: CellFace) -> Point {
        let n = self.faces[cf.face].normal;
        [cf.sign * n[0], cf.sign * n[1]]
    }

    /// Total measure of the domain.
    pub fn domain_measure(&self) -> f64 {
        self.cells.iter().map(|c| c.measure).sum()
    }

    /// `|Σ_e |e| n_{K,e}|` for one cell; vanishes for closed polytopes.
    pub fn closure_defect(&self, cell: usize) -> f64 {
        let mut s = [0.0; 2];
        for &cf in &self.cells[cell].faces {
            let n = self.outward_normal(cf);
            let m = self.faces[cf.face].measure;
            s[0] += m * n[0];
            s[1] += m * n[1];
        }
        s[0].hypot(s[1])
    }

    pub fn perimeter(&self, cell: usize) -> f64 {
        self.cells[cell].faces.iter().map(|cf| self.faces[cf.face].measure).sum()
    }

    /// Mesh nodes lying on the domain boundary.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for f in self.faces.iter().filter(|f| f.is_boundary()) {
            for &v in &f.vertices {
                mask[v] = true;
            }
        }
        mask
    }

    /// Every cell is a simplex (interval or triangle).
    pub fn is_simplicial(&self) -> bool {
        self.cells.iter().all(|c| c.vertices.len() == self.dim + 1)
    }

    /// Largest cell diameter.
    pub fn max_diameter(&self) -> f64 {
        self.cells
            .iter()
            .map(|c| {
                let mut d: f64 = 0.0;
                for &a in &c.vertices {
                    for &b in &c.vertices {
                        let (p, q) = (self.vertices[a], self.vertices[b]);
                        d = d.max((p[0] - q[0]).hypot(p[1] - q[1]));
                    }
                }
                d
            })
            .fold(0.0, f64::max)
    }

    /// Point-in-cell test, closed cell with a relative tolerance.
    pub fn cell_contains(&self, cell: usize, x: Point) -> bool {
        let c = &self.cells[cell];
        if self.dim == 1 {
            let (a, b) = (self.vertices[c.vertices[0]][0], self.vertices[c.vertices[1]][0]);
            let tol = 1e-12 * (b - a);
            return x[0] >= a - tol && x[0] <= b + tol;
        }
        let pts: Vec<Point> = c.vertices.iter().map(|&v| self.vertices[v]).collect();
        let tol = 1e-12 * self.perimeter(cell);
        let k = pts.len();
        // on an edge counts as inside
        for i in 0..k {
            if segment_distance(x, pts[i], pts[(i + 1) % k]) <= tol {
                return true;
            }
        }
        winding_number(x, &pts) != 0
    }
}

/// Signed area and centroid of a simple polygon.
pub(crate) fn polygon_area_centroid(pts: &[Point]) -> (f64, Point) {
    let k = pts.len();
    let o = pts[0];
    let (mut a2, mut cx, mut cy) = (0.0, 0.0, 0.0);
    for i in 0..k {
        let p = [pts[i][0] - o[0], pts[i][1] - o[1]];
        let q = [pts[(i + 1) % k][0] - o[0], pts[(i + 1) % k][1] - o[1]];
        let cross = p[0] * q[1] - q[0] * p[1];
        a2 += cross;
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    let area = 0.5 * a2;
    if a2 == 0.0 {
        return (0.0, o);
    }
    (area, [o[0] + cx / (3.0 * a2), o[1] + cy / (3.0 * a2)])
}

pub(crate) fn segment_distance(x: Point, p: Point, q: Point) -> f64 {
    let t = [q[0] - p[0], q[1] - p[1]];
    let w = [x[0] - p[0], x[1] - p[1]];
    let len2 = t[0] * t[0] + t[1] * t[1];
    let s = ((w[0] * t[0] + w[1] * t[1]) / len2).clamp(0.0, 1.0);
    let d = [w[0] - s * t[0], w[1] - s * t[1]];
    d[0].hypot(d[1])
}

fn winding_number(x: Point, pts: &[Point]) -> i32 {
    let k = pts.len();
    let mut w = 0;
    for i in 0..k {
        let (p, q) = (pts[i], pts[(i + 1) % k]);
        let side = (q[0] - p[0]) * (x[1] - p[1]) - (x[0] - p[0]) * (q[1] - p[1]);
        if p[1] <= x[1] {
            if q[1] > x[1] && side > 0.0 {
                w += 1;
            }
        } else if q[1] <= x[1] && side < 0.0 {
            w -= 1;
        }
    }
    w
}

/// A vertex lying inside a boundary edge means the neighbouring cell did not
/// split that edge: the input is non-conformal.
fn check_hanging_vertices(vertices: &[Point], faces: &[Face]) -> Result<(), MeshError> {
    let used: Vec<usize> = {
        let mut u: Vec<usize> = faces.iter().flat_map(|f| f.vertices.iter().copied()).collect();
        u.sort_unstable();
        u.dedup();
        u
    };
    for f in faces.iter().filter(|f| f.is_boundary()) {
        let (p, q) = (vertices[f.vertices[0]], vertices[f.vertices[1]]);
        let tol = 1e-10 * f.measure;
        for &v in &used {
            if f.vertices.contains(&v) {
                continue;
            }
            let x = vertices[v];
            let t = [q[0] - p[0], q[1] - p[1]];
            let s = ((x[0] - p[0]) * t[0] + (x[1] - p[1]) * t[1]) / (f.measure * f.measure);
            if s > 1e-10 && s < 1.0 - 1e-10 && segment_distance(x, p, q) <= tol {
                return Err(MeshError::NonConformal(format!(
                    "vertex {v} hangs on edge {}-{}",
                    f.vertices[0], f.vertices[1]
                )));
            }
        }
    }
    Ok(())
}
