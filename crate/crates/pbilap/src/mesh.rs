//! Conforming simplicial meshes of intervals and rectangles.
//!
//! Two generators are provided: uniform interval meshes and criss-cross
//! triangulations of rectangles, where every grid cell is split into four
//! triangles meeting at the cell centroid. Uniform (red) refinement and
//! shape-regularity metrics operate on arbitrary conforming meshes.
//!
//! Vertices are stored as `[x, y]` pairs; 1d meshes use `y = 0`. Cell
//! connectivity is flattened with `dim + 1` vertex indices per cell,
//! counter-clockwise in 2d. Meshes are immutable after construction.

use std::collections::HashMap;

use crate::{Error, Result};

/// Boundary facet of a cell: an endpoint in 1d, an edge in 2d.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryFacet {
    /// Owning cell index.
    pub cell: usize,
    /// Local facet index within the owning cell.
    /// 1d: 0 = left vertex, 1 = right vertex.
    /// 2d: facet `f` is the edge from local vertex `f` to `(f + 1) % 3`.
    pub local_facet: usize,
    /// Facet vertex indices; in 1d only the first entry is meaningful.
    pub vertices: [usize; 2],
    /// Outward unit normal.
    pub normal: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<[f64; 2]>,
    cells: Vec<usize>,
    boundary_facets: Vec<BoundaryFacet>,
}

/// Size and shape-regularity summary of a mesh.
#[derive(Debug, Clone, Copy)]
pub struct MeshMetrics {
    /// Largest cell diameter.
    pub h_max: f64,
    /// Smallest cell diameter.
    pub h_min: f64,
    /// Shape regularity constant: the minimum over cells of
    /// inradius / diameter (1 by convention in 1d).
    pub mu: f64,
    /// `h_max / h_min`.
    pub quasi_uniformity: f64,
}

impl Mesh {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len() / self.verts_per_cell()
    }

    pub fn verts_per_cell(&self) -> usize {
        self.dim + 1
    }

    pub fn vertex(&self, i: usize) -> [f64; 2] {
        self.vertices[i]
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    /// Vertex indices of cell `i`.
    pub fn cell(&self, i: usize) -> &[usize] {
        let k = self.verts_per_cell();
        &self.cells[i * k..(i + 1) * k]
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet] {
        &self.boundary_facets
    }

    /// Length (1d) or area (2d) of cell `i`; positive for valid meshes.
    pub fn cell_measure(&self, i: usize) -> f64 {
        let c = self.cell(i);
        match self.dim {
            1 => self.vertices[c[1]][0] - self.vertices[c[0]][0],
            _ => {
                let [x0, y0] = self.vertices[c[0]];
                let [x1, y1] = self.vertices[c[1]];
                let [x2, y2] = self.vertices[c[2]];
                0.5 * ((x1 - x0) * (y2 - y0) - (x2 - x0) * (y1 - y0))
            }
        }
    }

    /// Diameter of cell `i`: the largest vertex-pair distance.
    pub fn cell_diameter(&self, i: usize) -> f64 {
        let c = self.cell(i);
        let mut d: f64 = 0.0;
        for a in 0..c.len() {
            for b in (a + 1)..c.len() {
                d = d.max(dist(self.vertices[c[a]], self.vertices[c[b]]));
            }
        }
        d
    }

    /// Inradius of cell `i`: `2 area / perimeter` for triangles, the cell
    /// length in 1d.
    pub fn cell_inradius(&self, i: usize) -> f64 {
        let c = self.cell(i);
        match self.dim {
            1 => self.cell_measure(i),
            _ => {
                let p = dist(self.vertices[c[0]], self.vertices[c[1]])
                    + dist(self.vertices[c[1]], self.vertices[c[2]])
                    + dist(self.vertices[c[2]], self.vertices[c[0]]);
                2.0 * self.cell_measure(i) / p
            }
        }
    }

    /// Sum of cell measures.
    pub fn total_measure(&self) -> f64 {
        (0..self.num_cells()).map(|i| self.cell_measure(i)).sum()
    }

    /// Consistency checks: positive measures, CCW orientation, unit
    /// outward normals, and edge conformity in 2d.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.num_cells() {
            if self.cell_measure(i) <= 0.0 {
                return Err(Error::invalid(format!("cell {i} has non-positive measure")));
            }
        }
        for f in &self.boundary_facets {
            let n = f.normal;
            let len = (n[0] * n[0] + n[1] * n[1]).sqrt();
            if (len - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("boundary normal is not unit length"));
            }
            // Outward: the normal points away from the cell centroid.
            let c = self.cell(f.cell);
            let mut centroid = [0.0, 0.0];
            for &v in c {
                centroid[0] += self.vertices[v][0] / c.len() as f64;
                centroid[1] += self.vertices[v][1] / c.len() as f64;
            }
            let m = self.vertices[f.vertices[0]];
            let dot = (m[0] - centroid[0]) * n[0] + (m[1] - centroid[1]) * n[1];
            if dot <= 0.0 {
                return Err(Error::invalid("boundary normal points inward"));
            }
        }
        if self.dim == 2 {
            let counts = edge_use_counts(&self.cells);
            for (&(a, b), &c) in &counts {
                if c > 2 {
                    return Err(Error::invalid(format!(
                        "edge ({a},{b}) shared by {c} cells; mesh is not conforming"
                    )));
                }
            }
            let boundary_edges = counts.values().filter(|&&c| c == 1).count();
            if boundary_edges != self.boundary_facets.len() {
                return Err(Error::invalid("boundary facet list is inconsistent"));
            }
        }
        Ok(())
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn edge_use_counts(cells: &[usize]) -> HashMap<(usize, usize), usize> {
    let mut counts = HashMap::new();
    for tri in cells.chunks(3) {
        for f in 0..3 {
            let (a, b) = (tri[f], tri[(f + 1) % 3]);
            let key = (a.min(b), a.max(b));
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    counts
}

/// Rebuild the boundary facet list from connectivity.
fn build_boundary(dim: usize, vertices: &[[f64; 2]], cells: &[usize]) -> Vec<BoundaryFacet> {
    let mut facets = Vec::new();
    match dim {
        1 => {
            let mut use_count = vec![0usize; vertices.len()];
            for seg in cells.chunks(2) {
                use_count[seg[0]] += 1;
                use_count[seg[1]] += 1;
            }
            for (ci, seg) in cells.chunks(2).enumerate() {
                for local in 0..2 {
                    let v = seg[local];
                    if use_count[v] == 1 {
                        let other = seg[1 - local];
                        let nx = (vertices[v][0] - vertices[other][0]).signum();
                        facets.push(BoundaryFacet {
                            cell: ci,
                            local_facet: local,
                            vertices: [v, v],
                            normal: [nx, 0.0],
                        });
                    }
                }
            }
        }
        _ => {
            let counts = edge_use_counts(cells);
            for (ci, tri) in cells.chunks(3).enumerate() {
                for f in 0..3 {
                    let (a, b) = (tri[f], tri[(f + 1) % 3]);
                    let key = (a.min(b), a.max(b));
                    if counts[&key] == 1 {
                        // CCW cell: rotating the edge direction by -90 deg
                        // gives the outward normal.
                        let dx = vertices[b][0] - vertices[a][0];
                        let dy = vertices[b][1] - vertices[a][1];
                        let len = (dx * dx + dy * dy).sqrt();
                        facets.push(BoundaryFacet {
                            cell: ci,
                            local_facet: f,
                            vertices: [a, b],
                            normal: [dy / len, -dx / len],
                        });
                    }
                }
            }
        }
    }
    facets
}

/// Uniform mesh of `n` equal segments on the interval `(a, b)`.
pub fn unit_interval_mesh(n: usize, a: f64, b: f64) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::invalid("interval mesh needs n >= 1"));
    }
    if !(a < b) {
        return Err(Error::invalid(format!("degenerate interval [{a}, {b}]")));
    }
    let vertices: Vec<[f64; 2]> = (0..=n)
        .map(|i| [a + (b - a) * (i as f64 / n as f64), 0.0])
        .collect();
    let mut cells = Vec::with_capacity(2 * n);
    for i in 0..n {
        cells.push(i);
        cells.push(i + 1);
    }
    let boundary_facets = build_boundary(1, &vertices, &cells);
    Ok(Mesh {
        dim: 1,
        vertices,
        cells,
        boundary_facets,
    })
}

/// Criss-cross triangulation of the rectangle `(x0, y0) x (x1, y1)`:
/// an `nx` by `ny` grid of cells, each split into four triangles meeting
/// at the cell centroid. Grid vertices are numbered row-major first,
/// centroids after.
pub fn criss_cross_mesh(nx: usize, ny: usize, rect: (f64, f64, f64, f64)) -> Result<Mesh> {
    let (x0, y0, x1, y1) = rect;
    if nx == 0 || ny == 0 {
        return Err(Error::invalid("criss-cross mesh needs nx, ny >= 1"));
    }
    if !(x0 < x1 && y0 < y1) {
        return Err(Error::invalid("degenerate rectangle"));
    }
    let n_grid = (nx + 1) * (ny + 1);
    let mut vertices = Vec::with_capacity(n_grid + nx * ny);
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push([
                x0 + (x1 - x0) * (i as f64 / nx as f64),
                y0 + (y1 - y0) * (j as f64 / ny as f64),
            ]);
        }
    }
    let gidx = |i: usize, j: usize| j * (nx + 1) + i;
    for j in 0..ny {
        for i in 0..nx {
            let corners = [gidx(i, j), gidx(i + 1, j), gidx(i + 1, j + 1), gidx(i, j + 1)];
            let mut cx = 0.0;
            let mut cy = 0.0;
            for &c in &corners {
                cx += vertices[c][0] / 4.0;
                cy += vertices[c][1] / 4.0;
            }
            vertices.push([cx, cy]);
        }
    }
    let mut cells = Vec::with_capacity(12 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let center = n_grid + j * nx + i;
            let corners = [gidx(i, j), gidx(i + 1, j), gidx(i + 1, j + 1), gidx(i, j + 1)];
            for k in 0..4 {
                cells.push(corners[k]);
                cells.push(corners[(k + 1) % 4]);
                cells.push(center);
            }
        }
    }
    let boundary_facets = build_boundary(2, &vertices, &cells);
    Ok(Mesh {
        dim: 2,
        vertices,
        cells,
        boundary_facets,
    })
}

/// Uniform refinement: each segment is bisected; each triangle is split
/// into four by its edge midpoints (red refinement). Original vertices
/// keep their indices.
pub fn refine_uniform(mesh: &Mesh) -> Mesh {
    let mut vertices = mesh.vertices.clone();
    let mut cells = Vec::new();
    match mesh.dim {
        1 => {
            for seg in mesh.cells.chunks(2) {
                let (a, b) = (seg[0], seg[1]);
                let m = vertices.len();
                vertices.push(midpoint(mesh.vertices[a], mesh.vertices[b]));
                cells.extend_from_slice(&[a, m, m, b]);
            }
        }
        _ => {
            let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
            let mut mid = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
                let key = (a.min(b), a.max(b));
                if let Some(&m) = midpoints.get(&key) {
                    return m;
                }
                let p = midpoint(vertices[a], vertices[b]);
                vertices.push(p);
                midpoints.insert(key, vertices.len() - 1);
                vertices.len() - 1
            };
            for tri in mesh.cells.chunks(3) {
                let (v0, v1, v2) = (tri[0], tri[1], tri[2]);
                let m01 = mid(v0, v1, &mut vertices);
                let m12 = mid(v1, v2, &mut vertices);
                let m20 = mid(v2, v0, &mut vertices);
                cells.extend_from_slice(&[v0, m01, m20]);
                cells.extend_from_slice(&[v1, m12, m01]);
                cells.extend_from_slice(&[v2, m20, m12]);
                cells.extend_from_slice(&[m01, m12, m20]);
            }
        }
    }
    let boundary_facets = build_boundary(mesh.dim, &vertices, &cells);
    Mesh {
        dim: mesh.dim,
        vertices,
        cells,
        boundary_facets,
    }
}

fn midpoint(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

/// Compute size and shape-regularity metrics.
pub fn metrics(mesh: &Mesh) -> MeshMetrics {
    let mut h_max: f64 = 0.0;
    let mut h_min = f64::INFINITY;
    let mut mu = f64::INFINITY;
    for i in 0..mesh.num_cells() {
        let h = mesh.cell_diameter(i);
        h_max = h_max.max(h);
        h_min = h_min.min(h);
        mu = mu.min(mesh.cell_inradius(i) / h);
    }
    MeshMetrics {
        h_max,
        h_min,
        mu,
        quasi_uniformity: h_max / h_min,
    }
}
