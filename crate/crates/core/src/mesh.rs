//! Structured triangulations of rectangles and P1 interpolation.

use crate::error::{Error, Result};
use crate::sparse::RowMatrix;
use std::io::Write;

/// Triangulation with positively oriented triangles. `core` flags the
/// nodes lying in the region of interest (before boundary extension).
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub core: Vec<bool>,
}

impl TriMesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let p = self.nodes[a];
        let q = self.nodes[b];
        let r = self.nodes[c];
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
    }

    pub fn core_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_nodes()).filter(|&i| self.core[i])
    }

    /// CSV node table: `id,x,y,core`.
    pub fn write_nodes_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "id,x,y,core")?;
        for (i, p) in self.nodes.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                i,
                crate::spectral::fmt9(p[0]),
                crate::spectral::fmt9(p[1]),
                u8::from(self.core[i])
            )?;
        }
        Ok(())
    }

    /// CSV triangle table: `id,n0,n1,n2`.
    pub fn write_triangles_csv<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "id,n0,n1,n2")?;
        for (t, tri) in self.triangles.iter().enumerate() {
            writeln!(w, "{},{},{},{}", t, tri[0], tri[1], tri[2])?;
        }
        Ok(())
    }
}

/// Structured right-triangle mesh over the rectangle extended by
/// `extension` on every side. Interior-core nodes are marked.
pub fn build_rect_mesh(
    x_range: (f64, f64),
    y_range: (f64, f64),
    target_edge: f64,
    extension: f64,
    max_nodes: usize,
) -> Result<TriMesh> {
    if !(target_edge > 0.0) || extension < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "need target_edge > 0 and extension >= 0, got {target_edge}, {extension}"
        )));
    }
    let (x0, x1) = (x_range.0 - extension, x_range.1 + extension);
    let (y0, y1) = (y_range.0 - extension, y_range.1 + extension);
    if !(x1 > x0) || !(y1 > y0) {
        return Err(Error::InvalidConfig("empty mesh box".into()));
    }
    let ncx = (((x1 - x0) / target_edge).ceil() as usize).max(1);
    let ncy = (((y1 - y0) / target_edge).ceil() as usize).max(1);
    let nodes_count = (ncx + 1) * (ncy + 1);
    if nodes_count > max_nodes {
        return Err(Error::MeshTooLarge {
            nodes: nodes_count,
            cap: max_nodes,
        });
    }
    let dx = (x1 - x0) / ncx as f64;
    let dy = (y1 - y0) / ncy as f64;
    let mut nodes = Vec::with_capacity(nodes_count);
    let mut core = Vec::with_capacity(nodes_count);
    let tol = 1e-9 * (dx + dy);
    for j in 0..=ncy {
        for i in 0..=ncx {
            let x = x0 + i as f64 * dx;
            let y = y0 + j as f64 * dy;
            nodes.push([x, y]);
            core.push(
                x >= x_range.0 - tol
                    && x <= x_range.1 + tol
                    && y >= y_range.0 - tol
                    && y <= y_range.1 + tol,
            );
        }
    }
    let idx = |i: usize, j: usize| j * (ncx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * ncx * ncy);
    for j in 0..ncy {
        for i in 0..ncx {
            let n00 = idx(i, j);
            let n10 = idx(i + 1, j);
            let n01 = idx(i, j + 1);
            let n11 = idx(i + 1, j + 1);
            triangles.push([n00, n10, n11]);
            triangles.push([n00, n11, n01]);
        }
    }
    Ok(TriMesh {
        nodes,
        triangles,
        core,
    })
}

/// Barycentric interpolation matrix: row i holds the P1 weights of
/// location i (at most three nonzeros, nonnegative, summing to one).
pub fn interpolation_matrix(mesh: &TriMesh, locations: &[[f64; 2]]) -> Result<RowMatrix> {
    let mut rows = Vec::with_capacity(locations.len());
    for (li, p) in locations.iter().enumerate() {
        let mut found = None;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            if let Some(w) = barycentric(mesh, t, *p) {
                found = Some((tri, w));
                break;
            }
        }
        let (tri, w) = found.ok_or(Error::PointOutsideMesh { index: li })?;
        let mut row: Vec<(usize, f64)> = tri
            .iter()
            .zip(w.iter())
            .filter(|&(_, &wk)| wk > 0.0)
            .map(|(&n, &wk)| (n, wk))
            .collect();
        row.sort_unstable_by_key(|e| e.0);
        rows.push(row);
    }
    Ok(RowMatrix::new(mesh.n_nodes(), rows))
}

/// Barycentric coordinates of p in triangle t, clamped and renormalized;
/// None if p lies outside (beyond a small tolerance).
fn barycentric(mesh: &TriMesh, t: usize, p: [f64; 2]) -> Option<[f64; 3]> {
    let [a, b, c] = mesh.triangles[t];
    let pa = mesh.nodes[a];
    let pb = mesh.nodes[b];
    let pc = mesh.nodes[c];
    let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]);
    if det.abs() < 1e-300 {
        return None;
    }
    let l1 = ((pb[0] - p[0]) * (pc[1] - p[1]) - (pc[0] - p[0]) * (pb[1] - p[1])) / det;
    let l2 = ((pc[0] - p[0]) * (pa[1] - p[1]) - (pa[0] - p[0]) * (pc[1] - p[1])) / det;
    let l3 = 1.0 - l1 - l2;
    let tol = -1e-10;
    if l1 < tol || l2 < tol || l3 < tol {
        return None;
    }
    let mut w = [l1.max(0.0), l2.max(0.0), l3.max(0.0)];
    let s = w[0] + w[1] + w[2];
    for wk in &mut w {
        *wk /= s;
    }
    Some(w)
}
