//! Line-oriented mesh text format.
//!
//! ```text
//! # comment
//! vertices
//! 3
//! 0
//! 0.5
//! 1
//! cells
//! 2
//! 2 0 1
//! 2 1 2
//! faces            # optional, emitted by the writer and verified on read
//! 3
//! 0 -1 0
//! 0 1 1
//! 1 -1 2
//! centers          # optional: one point per cell, then per boundary face
//! 0.25
//! 0.75
//! ```
//!
//! Faces are listed in construction order (owner index, then center
//! coordinates); each line is `owner neighbor|-1 v1 [v2]`.

use std::fmt::Write as _;

use super::{CenteredMesh, Centers, MeshError, Point, PolyMesh};

#[derive(Clone, Debug)]
pub struct MeshFile {
    pub mesh: PolyMesh,
    pub centers: Option<Centers>,
}

fn perr(line: usize, msg: impl Into<String>) -> MeshError {
    MeshError::Parse { line, msg: msg.into() }
}

/// `(owner, neighbor, vertices)` as listed in a faces section.
type ListedFace = (usize, Option<usize>, Vec<usize>);

pub fn parse_mesh(text: &str) -> Result<MeshFile, MeshError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .collect();
    let mut pos = 0;
    let mut dim: Option<usize> = None;
    let mut vertices: Option<Vec<Point>> = None;
    let mut cells: Option<Vec<Vec<usize>>> = None;
    let mut faces: Option<Vec<ListedFace>> = None;
    let mut center_pts: Option<Vec<Point>> = None;

    let parse_point = |line: usize, s: &str, dim: &mut Option<usize>| -> Result<Point, MeshError> {
        let vals: Vec<f64> = s
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| perr(line, format!("bad number {t:?}: {e}"))))
            .collect::<Result<_, _>>()?;
        if vals.is_empty() || vals.len() > 2 {
            return Err(perr(line, "expected 1 or 2 coordinates"));
        }
        match dim {
            Some(d) if *d != vals.len() => return Err(perr(line, "inconsistent coordinate count")),
            None => *dim = Some(vals.len()),
            _ => {}
        }
        Ok([vals[0], vals.get(1).copied().unwrap_or(0.0)])
    };
    let count = |pos: &mut usize| -> Result<usize, MeshError> {
        let (ln, s) = *lines.get(*pos).ok_or_else(|| perr(0, "unexpected end of file"))?;
        *pos += 1;
        s.parse().map_err(|_| perr(ln, format!("expected a count, got {s:?}")))
    };
    let is_section = |s: &str| matches!(s, "vertices" | "cells" | "faces" | "centers");

    while pos < lines.len() {
        let (ln, head) = lines[pos];
        pos += 1;
        match head {
            "vertices" => {
                let n = count(&mut pos)?;
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    let (l, s) = *lines.get(pos).ok_or_else(|| perr(ln, "truncated vertices"))?;
                    v.push(parse_point(l, s, &mut dim)?);
                    pos += 1;
                }
                vertices = Some(v);
            }
            "cells" => {
                let n = count(&mut pos)?;
                let mut c = Vec::with_capacity(n);
                for _ in 0..n {
                    let (l, s) = *lines.get(pos).ok_or_else(|| perr(ln, "truncated cells"))?;
                    let ids: Vec<usize> = s
                        .split_whitespace()
                        .map(|t| t.parse().map_err(|_| perr(l, format!("bad index {t:?}"))))
                        .collect::<Result<_, _>>()?;
                    if ids.is_empty() || ids[0] + 1 != ids.len() {
                        return Err(perr(l, "cell line must be `k v1 … vk`"));
                    }
                    c.push(ids[1..].to_vec());
                    pos += 1;
                }
                cells = Some(c);
            }
            "faces" => {
                let n = count(&mut pos)?;
                let mut f = Vec::with_capacity(n);
                for _ in 0..n {
                    let (l, s) = *lines.get(pos).ok_or_else(|| perr(ln, "truncated faces"))?;
                    let ids: Vec<i64> = s
                        .split_whitespace()
                        .map(|t| t.parse().map_err(|_| perr(l, format!("bad index {t:?}"))))
                        .collect::<Result<_, _>>()?;
                    if ids.len() < 3 || ids[0] < 0 || ids[2..].iter().any(|&v| v < 0) {
                        return Err(perr(l, "face line must be `owner neighbor|-1 v1 [v2]`"));
                    }
                    let nb = (ids[1] >= 0).then_some(ids[1] as usize);
                    f.push((ids[0] as usize, nb, ids[2..].iter().map(|&v| v as usize).collect()));
                    pos += 1;
                }
                faces = Some(f);
            }
            "centers" => {
                let mut pts = Vec::new();
                while pos < lines.len() && !is_section(lines[pos].1) {
                    let (l, s) = lines[pos];
                    pts.push(parse_point(l, s, &mut dim)?);
                    pos += 1;
                }
                center_pts = Some(pts);
            }
            other => return Err(perr(ln, format!("unknown section {other:?}"))),
        }
    }

    let vertices = vertices.ok_or_else(|| perr(0, "missing vertices section"))?;
    let cells = cells.ok_or_else(|| perr(0, "missing cells section"))?;
    let mesh = PolyMesh::new(dim.unwrap_or(1), vertices, cells)?;

    if let Some(listed) = faces {
        if listed.len() != mesh.num_faces() {
            return Err(perr(0, format!("faces section lists {} faces, mesh has {}", listed.len(), mesh.num_faces())));
        }
        for (i, ((owner, nb, verts), face)) in listed.iter().zip(mesh.faces()).enumerate() {
            let mut a = verts.clone();
            let mut b = face.vertices.clone();
            a.sort_unstable();
            b.sort_unstable();
            if *owner != face.owner || *nb != face.neighbor || a != b {
                return Err(perr(0, format!("faces section disagrees with constructed face {i}")));
            }
        }
    }

    let centers = match center_pts {
        None => None,
        Some(pts) => {
            let nc = mesh.num_cells();
            let nb = mesh.boundary_faces().count();
            if pts.len() == nc {
                Some(Centers { cells: pts, boundary_faces: None })
            } else if pts.len() == nc + nb {
                Some(Centers { cells: pts[..nc].to_vec(), boundary_faces: Some(pts[nc..].to_vec()) })
            } else {
                return Err(MeshError::CenterCount { expected: nc + nb, got: pts.len() });
            }
        }
    };
    Ok(MeshFile { mesh, centers })
}

fn push_point(out: &mut String, dim: usize, p: Point) {
    if dim == 1 {
        let _ = writeln!(out, "{}", p[0]);
    } else {
        let _ = writeln!(out, "{} {}", p[0], p[1]);
    }
}

/// Serializes a mesh; when `centers` is given its cell and boundary-face
/// centers are written too.
pub fn write_mesh(mesh: &PolyMesh, centers: Option<&CenteredMesh>) -> String {
    let mut out = String::new();
    let d = mesh.dim();
    let _ = writeln!(out, "vertices\n{}", mesh.num_vertices());
    for &p in mesh.vertices() {
        push_point(&mut out, d, p);
    }
    let _ = writeln!(out, "cells\n{}", mesh.num_cells());
    for c in mesh.cells() {
        let ids: Vec<String> = c.vertices.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{} {}", ids.len(), ids.join(" "));
    }
    let _ = writeln!(out, "faces\n{}", mesh.num_faces());
    for f in mesh.faces() {
        let nb = f.neighbor.map_or(-1, |k| k as i64);
        let ids: Vec<String> = f.vertices.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{} {} {}", f.owner, nb, ids.join(" "));
    }
    if let Some(cm) = centers {
        let _ = writeln!(out, "centers");
        for &p in cm.cell_centers() {
            push_point(&mut out, d, p);
        }
        for f in mesh.boundary_faces() {
            push_point(&mut out, d, cm.face_center(f));
        }
    }
    out
}
