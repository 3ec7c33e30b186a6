use serde::Serialize;

use super::{segment_distance, MeshError, Point, PolyMesh};

/// Default angular tolerance for the orthogonality conditions, in radians.
pub const DEFAULT_ANGLE_TOL: f64 = 1e-10;

/// Center assignment: one point per cell and, optionally, one per boundary
/// face (in face-construction order). Missing boundary centers default to
/// the face midpoints.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Centers {
    pub cells: Vec<Point>,
    pub boundary_faces: Option<Vec<Point>>,
}

impl Centers {
    pub fn centroids(mesh: &PolyMesh) -> Self {
        Self { cells: mesh.cells().iter().map(|c| c.centroid).collect(), boundary_faces: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibilityViolation {
    pub face: usize,
    /// Angle between the center segment and the face normal, radians.
    pub angle: f64,
}

/// Mesh with cell centers `x_K`, boundary face centers `x_e` and the
/// distances `d_e` across faces.
#[derive(Clone, Debug)]
pub struct CenteredMesh {
    base: PolyMesh,
    cell_centers: Vec<Point>,
    face_centers: Vec<Point>,
    distances: Vec<f64>,
    /// Perpendicular distance from `x_K` to the line of each local face.
    cell_face_distances: Vec<Vec<f64>>,
    violations: Vec<AdmissibilityViolation>,
}

impl CenteredMesh {
    /// Attaches centers and computes distances. Orthogonality violations are
    /// recorded, not rejected; see [`check_admissibility`] for the strict form.
    pub fn new(base: PolyMesh, centers: Centers, angle_tol: f64) -> Result<Self, MeshError> {
        if centers.cells.len() != base.num_cells() {
            return Err(MeshError::CenterCount { expected: base.num_cells(), got: centers.cells.len() });
        }
        for (k, &x) in centers.cells.iter().enumerate() {
            if !base.cell_contains(k, x) {
                return Err(MeshError::CenterOutside(k));
            }
        }
        let boundary: Vec<usize> = base.boundary_faces().collect();
        let mut face_centers: Vec<Point> = base.faces().iter().map(|f| f.center).collect();
        if let Some(bc) = &centers.boundary_faces {
            if bc.len() != boundary.len() {
                return Err(MeshError::CenterCount { expected: boundary.len(), got: bc.len() });
            }
            for (&f, &x) in boundary.iter().zip(bc) {
                let face = &base.faces()[f];
                let on_face = if base.dim() == 1 {
                    x[0] == face.center[0]
                } else {
                    let (p, q) = (base.vertices()[face.vertices[0]], base.vertices()[face.vertices[1]]);
                    segment_distance(x, p, q) <= 1e-12 * face.measure
                };
                if !on_face {
                    return Err(MeshError::FaceCenterOffFace(f));
                }
                face_centers[f] = x;
            }
        }

        let mut distances = vec![0.0; base.num_faces()];
        let mut violations = Vec::new();
        for (f, face) in base.faces().iter().enumerate() {
            let a = centers.cells[face.owner];
            let b = match face.neighbor {
                Some(k) => centers.cells[k],
                None => face_centers[f],
            };
            let s = [b[0] - a[0], b[1] - a[1]];
            let d = s[0].hypot(s[1]);
            if d == 0.0 {
                return Err(MeshError::ZeroDistance(f));
            }
            distances[f] = d;
            let n = face.normal;
            let cross = (s[0] * n[1] - s[1] * n[0]).abs();
            let dot = (s[0] * n[0] + s[1] * n[1]).abs();
            let angle = cross.atan2(dot);
            if angle > angle_tol {
                violations.push(AdmissibilityViolation { face: f, angle });
            }
        }

        let cell_face_distances = base
            .cells()
            .iter()
            .enumerate()
            .map(|(k, cell)| {
                cell.faces
                    .iter()
                    .map(|&cf| {
                        let n = base.outward_normal(cf);
                        let c = base.faces()[cf.face].center;
                        let x = centers.cells[k];
                        (c[0] - x[0]) * n[0] + (c[1] - x[1]) * n[1]
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            base,
            cell_centers: centers.cells,
            face_centers,
            distances,
            cell_face_distances,
            violations,
        })
    }

    /// Centroid centers and midpoint boundary centers.
    pub fn centroidal(base: PolyMesh) -> Result<Self, MeshError> {
        let centers = Centers::centroids(&base);
        Self::new(base, centers, DEFAULT_ANGLE_TOL)
    }

    pub fn mesh(&self) -> &PolyMesh {
        &self.base
    }

    pub fn cell_center(&self, k: usize) -> Point {
        self.cell_centers[k]
    }

    pub fn cell_centers(&self) -> &[Point] {
        &self.cell_centers
    }

    /// `x_e` for boundary faces; the geometric midpoint for internal ones.
    pub fn face_center(&self, f: usize) -> Point {
        self.face_centers[f]
    }

    /// `d_e`.
    pub fn distance(&self, f: usize) -> f64 {
        self.distances[f]
    }

    /// `d_{K,e}` for local face `i` of cell `k`.
    pub fn cell_face_distance(&self, k: usize, i: usize) -> f64 {
        self.cell_face_distances[k][i]
    }

    pub fn violations(&self) -> &[AdmissibilityViolation] {
        &self.violations
    }

    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Strict admissibility check: every center segment must be orthogonal to its
/// face within `angle_tol`.
pub fn check_admissibility(mesh: PolyMesh, centers: Centers, angle_tol: f64) -> Result<CenteredMesh, MeshError> {
    let cm = CenteredMesh::new(mesh, centers, angle_tol)?;
    if cm.is_admissible() {
        Ok(cm)
    } else {
        Err(MeshError::NotAdmissible(cm.violations))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate;

    #[test]
    fn two_rectangle_distances() {
        let v = vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [0.0, 1.0], [0.5, 1.0], [1.0, 1.0]];
        let m = PolyMesh::new(2, v, vec![vec![0, 1, 4, 3], vec![1, 2, 5, 4]]).unwrap();
        let centers = Centers::centroids(&m);
        let cm = check_admissibility(m, centers, DEFAULT_ANGLE_TOL).unwrap();
        for (f, face) in cm.mesh().faces().iter().enumerate() {
            let expected = if !face.is_boundary() {
                0.5
            } else if face.normal[0] != 0.0 {
                0.25
            } else {
                0.5
            };
            assert!((cm.distance(f) - expected).abs() < 1e-15, "face {f}");
        }
    }

    #[test]
    fn intervals_are_admissible() {
        let m = generate::interval(&[0.0, 0.1, 0.45, 1.0]).unwrap();
        let centers = Centers::centroids(&m);
        let cm = check_admissibility(m, centers, DEFAULT_ANGLE_TOL).unwrap();
        assert!((cm.distance(0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn skewed_pair_reports_shared_edge() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.5, 1.0], [1.5, 1.0], [2.5, 1.0]];
        let m = PolyMesh::new(2, v, vec![vec![0, 1, 4, 3], vec![1, 2, 5, 4]]).unwrap();
        let shared = m.faces().iter().position(|f| !f.is_boundary()).unwrap();
        let centers = Centers::centroids(&m);
        let err = check_admissibility(m, centers, DEFAULT_ANGLE_TOL).unwrap_err();
        let MeshError::NotAdmissible(report) = err else { panic!("expected violation report") };
        let v = report.iter().find(|v| v.face == shared).expect("shared edge listed");
        // centroid segment is horizontal, edge direction (0.5, 1): defect atan(1/2)
        let expected = (0.5f64).atan();
        assert!((v.angle - expected).abs() < 1e-12);
    }

    #[test]
    fn center_outside_cell_is_named() {
        let m = generate::cartesian(2, 1).unwrap();
        let mut centers = Centers::centroids(&m);
        centers.cells[1] = [0.1, 0.5];
        assert!(matches!(CenteredMesh::new(m, centers, DEFAULT_ANGLE_TOL), Err(MeshError::CenterOutside(1))));
    }

    #[test]
    fn coincident_centers_rejected() {
        // two right triangles sharing the hypotenuse, both centered at its midpoint
        let m = generate::triangulated_square(1, generate::TriPattern::Diagonal).unwrap();
        let centers = Centers { cells: vec![[0.5, 0.5], [0.5, 0.5]], boundary_faces: None };
        assert!(matches!(CenteredMesh::new(m, centers, DEFAULT_ANGLE_TOL), Err(MeshError::ZeroDistance(_))));
    }

    #[test]
    fn cartesian_centroids_always_admissible() {
        for (nx, ny) in [(1, 1), (3, 2), (5, 7)] {
            let m = generate::cartesian(nx, ny).unwrap();
            let c = Centers::centroids(&m);
            assert!(check_admissibility(m, c, DEFAULT_ANGLE_TOL).is_ok());
        }
    }

    #[test]
    fn boundary_center_must_lie_on_face() {
        let m = generate::uniform_interval(2).unwrap();
        let centers = Centers { cells: vec![[0.25, 0.0], [0.75, 0.0]], boundary_faces: Some(vec![[0.0, 0.0], [0.9, 0.0]]) };
        assert!(matches!(CenteredMesh::new(m, centers, DEFAULT_ANGLE_TOL), Err(MeshError::FaceCenterOffFace(_))));
    }
}
