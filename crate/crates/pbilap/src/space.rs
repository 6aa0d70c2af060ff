//! Continuous Lagrange finite element spaces of degree 1 and 2.
//!
//! Degrees of freedom sit at mesh vertices (k = 1) plus edge midpoints
//! (k = 2; in 1d the "edge" is the segment itself). The DOF map is shared
//! across adjacent cells, so functions are C0. Reference bases are the
//! standard nodal Lagrange polynomials.

use std::collections::HashMap;
use std::sync::Arc;

use crate::mesh::Mesh;
use crate::{Error, Result};

/// Scalar field on the mesh, `f([x, y]) -> f64`.
pub type ScalarFn = Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>;
/// Vector field on the mesh, `f([x, y]) -> [fx, fy]`.
pub type VectorFn = Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

#[derive(Debug)]
pub struct FeSpace {
    pub mesh: Mesh,
    pub degree: usize,
    pub dof_count: usize,
    /// Flattened per-cell global DOF indices, `dofs_per_cell` entries each.
    /// Local order: cell vertices first, then midpoints (edge (0,1), (1,2),
    /// (2,0) for triangles; the segment midpoint in 1d).
    pub cell_dofs: Vec<usize>,
    pub dof_coords: Vec<[f64; 2]>,
    /// Sorted indices of DOFs on the domain boundary.
    pub boundary_dofs: Vec<usize>,
}

/// Coefficient vector over a [`FeSpace`].
#[derive(Debug, Clone)]
pub struct FeFunction {
    pub space: Arc<FeSpace>,
    pub coeffs: Vec<f64>,
}

/// Build the Lagrange space of degree `k` in {1, 2} over `mesh`.
pub fn build_space(mesh: Mesh, k: usize) -> Result<FeSpace> {
    if !(k == 1 || k == 2) {
        return Err(Error::invalid(format!("unsupported degree k = {k}")));
    }
    let dim = mesh.dim();
    let nv = mesh.num_vertices();
    let vpc = mesh.verts_per_cell();
    let mut dof_coords: Vec<[f64; 2]> = mesh.vertices().to_vec();
    let mut cell_dofs = Vec::new();

    if k == 1 {
        cell_dofs.extend((0..mesh.num_cells()).flat_map(|c| mesh.cell(c).to_vec()));
    } else {
        let mut edge_dof: HashMap<(usize, usize), usize> = HashMap::new();
        for c in 0..mesh.num_cells() {
            let verts = mesh.cell(c);
            cell_dofs.extend_from_slice(verts);
            let edges: &[(usize, usize)] = match dim {
                1 => &[(0, 1)],
                _ => &[(0, 1), (1, 2), (2, 0)],
            };
            for &(a, b) in edges {
                let (va, vb) = (verts[a], verts[b]);
                let key = (va.min(vb), va.max(vb));
                let dof = match edge_dof.get(&key) {
                    Some(&d) => d,
                    None => {
                        let d = nv + edge_dof.len();
                        let pa = mesh.vertex(va);
                        let pb = mesh.vertex(vb);
                        dof_coords.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                        edge_dof.insert(key, d);
                        d
                    }
                };
                cell_dofs.push(dof);
            }
        }
    }
    let dof_count = dof_coords.len();

    // Boundary DOFs from the facet list: facet vertices, plus the facet
    // midpoint DOF for k = 2 in 2d.
    let mut on_boundary = vec![false; dof_count];
    for f in mesh.boundary_facets() {
        on_boundary[f.vertices[0]] = true;
        if dim == 2 {
            on_boundary[f.vertices[1]] = true;
            if k == 2 {
                let dpc = vpc + 3;
                let cds = &cell_dofs[f.cell * dpc..(f.cell + 1) * dpc];
                on_boundary[cds[3 + f.local_facet]] = true;
            }
        }
    }
    let boundary_dofs = (0..dof_count).filter(|&i| on_boundary[i]).collect();

    Ok(FeSpace {
        mesh,
        degree: k,
        dof_count,
        cell_dofs,
        dof_coords,
        boundary_dofs,
    })
}

impl FeSpace {
    pub fn dofs_per_cell(&self) -> usize {
        match (self.mesh.dim(), self.degree) {
            (1, 1) => 2,
            (1, 2) => 3,
            (2, 1) => 3,
            _ => 6,
        }
    }

    /// Global DOF indices of cell `c`.
    pub fn cell_dofs(&self, c: usize) -> &[usize] {
        let k = self.dofs_per_cell();
        &self.cell_dofs[c * k..(c + 1) * k]
    }

    pub fn is_boundary_dof(&self, dof: usize) -> bool {
        self.boundary_dofs.binary_search(&dof).is_ok()
    }

    /// DOF indices not on the boundary, ascending.
    pub fn interior_dofs(&self) -> Vec<usize> {
        (0..self.dof_count).filter(|&i| !self.is_boundary_dof(i)).collect()
    }

    /// Map a reference point of cell `c` to physical coordinates.
    pub fn phys_point(&self, c: usize, ref_pt: [f64; 2]) -> [f64; 2] {
        let verts = self.mesh.cell(c);
        let p0 = self.mesh.vertex(verts[0]);
        match self.mesh.dim() {
            1 => {
                let p1 = self.mesh.vertex(verts[1]);
                [p0[0] + ref_pt[0] * (p1[0] - p0[0]), 0.0]
            }
            _ => {
                let p1 = self.mesh.vertex(verts[1]);
                let p2 = self.mesh.vertex(verts[2]);
                [
                    p0[0] + ref_pt[0] * (p1[0] - p0[0]) + ref_pt[1] * (p2[0] - p0[0]),
                    p0[1] + ref_pt[0] * (p1[1] - p0[1]) + ref_pt[1] * (p2[1] - p0[1]),
                ]
            }
        }
    }

    /// Jacobian determinant of the affine map of cell `c` (the length in
    /// 1d, twice the area in 2d).
    pub fn jacobian_det(&self, c: usize) -> f64 {
        match self.mesh.dim() {
            1 => self.mesh.cell_measure(c),
            _ => 2.0 * self.mesh.cell_measure(c),
        }
    }

    /// Physical gradients of all basis functions of cell `c` at a
    /// reference point.
    pub fn phys_gradients(&self, c: usize, ref_pt: [f64; 2]) -> Vec<[f64; 2]> {
        let (_, ref_grads) = shape_values(self.mesh.dim(), self.degree, ref_pt);
        let verts = self.mesh.cell(c);
        match self.mesh.dim() {
            1 => {
                let h = self.mesh.cell_measure(c);
                ref_grads.iter().map(|g| [g[0] / h, 0.0]).collect()
            }
            _ => {
                let p0 = self.mesh.vertex(verts[0]);
                let p1 = self.mesh.vertex(verts[1]);
                let p2 = self.mesh.vertex(verts[2]);
                let (a, b, c2, d) = (p1[0] - p0[0], p2[0] - p0[0], p1[1] - p0[1], p2[1] - p0[1]);
                let det = a * d - b * c2;
                // grad_phys = J^{-T} grad_ref
                ref_grads
                    .iter()
                    .map(|g| {
                        [
                            (d * g[0] - c2 * g[1]) / det,
                            (-b * g[0] + a * g[1]) / det,
                        ]
                    })
                    .collect()
            }
        }
    }
}

/// Nodal Lagrange basis values and reference gradients at a reference
/// point. Values sum to 1 and gradients to 0.
pub fn shape_values(dim: usize, k: usize, ref_pt: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
    let t = ref_pt[0];
    match (dim, k) {
        (1, 1) => (vec![1.0 - t, t], vec![[-1.0, 0.0], [1.0, 0.0]]),
        (1, 2) => (
            vec![(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)],
            vec![[4.0 * t - 3.0, 0.0], [4.0 * t - 1.0, 0.0], [4.0 - 8.0 * t, 0.0]],
        ),
        (2, 1) => {
            let (x, y) = (ref_pt[0], ref_pt[1]);
            (
                vec![1.0 - x - y, x, y],
                vec![[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]],
            )
        }
        (2, 2) => {
            let (x, y) = (ref_pt[0], ref_pt[1]);
            let l = [1.0 - x - y, x, y];
            let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
            let mut vals = Vec::with_capacity(6);
            let mut grads = Vec::with_capacity(6);
            for i in 0..3 {
                vals.push(l[i] * (2.0 * l[i] - 1.0));
                grads.push([
                    (4.0 * l[i] - 1.0) * dl[i][0],
                    (4.0 * l[i] - 1.0) * dl[i][1],
                ]);
            }
            for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                vals.push(4.0 * l[i] * l[j]);
                grads.push([
                    4.0 * (l[j] * dl[i][0] + l[i] * dl[j][0]),
                    4.0 * (l[j] * dl[i][1] + l[i] * dl[j][1]),
                ]);
            }
            (vals, grads)
        }
        _ => panic!("unsupported (dim, k) = ({dim}, {k})"),
    }
}

impl FeFunction {
    pub fn new(space: Arc<FeSpace>, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), space.dof_count, "coefficient length mismatch");
        FeFunction { space, coeffs }
    }

    pub fn zero(space: Arc<FeSpace>) -> Self {
        let n = space.dof_count;
        FeFunction::new(space, vec![0.0; n])
    }

    /// Value at a reference point of cell `c`.
    pub fn eval(&self, c: usize, ref_pt: [f64; 2]) -> f64 {
        let (vals, _) = shape_values(self.space.mesh.dim(), self.space.degree, ref_pt);
        self.space
            .cell_dofs(c)
            .iter()
            .zip(&vals)
            .map(|(&d, v)| self.coeffs[d] * v)
            .sum()
    }

    /// Physical gradient at a reference point of cell `c`.
    pub fn eval_grad(&self, c: usize, ref_pt: [f64; 2]) -> [f64; 2] {
        let grads = self.space.phys_gradients(c, ref_pt);
        let mut g = [0.0, 0.0];
        for (&d, gr) in self.space.cell_dofs(c).iter().zip(&grads) {
            g[0] += self.coeffs[d] * gr[0];
            g[1] += self.coeffs[d] * gr[1];
        }
        g
    }
}

/// Nodal interpolation: coefficients are `f` evaluated at the DOF
/// coordinates.
pub fn interpolate(space: &Arc<FeSpace>, f: impl Fn([f64; 2]) -> f64) -> FeFunction {
    let coeffs = space.dof_coords.iter().map(|&p| f(p)).collect();
    FeFunction::new(space.clone(), coeffs)
}

/// Discrete-harmonic (Ritz) projection: returns the field with the given
/// boundary coefficients whose stiffness inner product against every
/// interior basis function matches that of `grad_v`.
///
/// `bc_values` is aligned with `space.boundary_dofs`.
pub fn ritz_project(
    space: &Arc<FeSpace>,
    grad_v: impl Fn([f64; 2]) -> [f64; 2],
    bc_values: &[f64],
) -> Result<FeFunction> {
    if bc_values.len() != space.boundary_dofs.len() {
        return Err(Error::invalid("one boundary value required per boundary DOF"));
    }
    let stiffness = crate::assembly::assemble_stiffness(space);
    let rule = crate::quadrature::high_order_rule(space.mesh.dim());

    // rhs[i] = integral grad(v) . grad(phi_i)
    let mut rhs = vec![0.0; space.dof_count];
    for c in 0..space.mesh.num_cells() {
        let detj = space.jacobian_det(c);
        let dofs = space.cell_dofs(c);
        for (pt, w) in rule.points.iter().zip(&rule.weights) {
            let grads = space.phys_gradients(c, *pt);
            let gv = grad_v(space.phys_point(c, *pt));
            for (&d, g) in dofs.iter().zip(&grads) {
                rhs[d] += w * detj * (gv[0] * g[0] + gv[1] * g[1]);
            }
        }
    }
    solve_interior_poisson(space, &stiffness, &rhs, bc_values)
}

/// Ritz projection of a discrete function (same stiffness orthogonality,
/// gradient taken from `v` itself).
pub fn ritz_project_discrete(v: &FeFunction, bc_values: &[f64]) -> Result<FeFunction> {
    let space = &v.space;
    if bc_values.len() != space.boundary_dofs.len() {
        return Err(Error::invalid("one boundary value required per boundary DOF"));
    }
    let stiffness = crate::assembly::assemble_stiffness(space);
    let rhs = stiffness.matvec(&v.coeffs);
    solve_interior_poisson(space, &stiffness, &rhs, bc_values)
}

fn solve_interior_poisson(
    space: &Arc<FeSpace>,
    stiffness: &crate::assembly::SparseMatrix,
    rhs: &[f64],
    bc_values: &[f64],
) -> Result<FeFunction> {
    let interior = space.interior_dofs();
    let mut pos = vec![usize::MAX; space.dof_count];
    for (p, &d) in interior.iter().enumerate() {
        pos[d] = p;
    }
    let mut bc_full = vec![0.0; space.dof_count];
    for (&d, &v) in space.boundary_dofs.iter().zip(bc_values) {
        bc_full[d] = v;
    }
    // Interior block system; boundary columns move to the right-hand side.
    let mut triplets = Vec::new();
    let mut b = vec![0.0; interior.len()];
    for (p, &d) in interior.iter().enumerate() {
        b[p] = rhs[d];
        for (j, v) in stiffness.row(d) {
            if pos[j] != usize::MAX {
                triplets.push((p, pos[j], v));
            } else {
                b[p] -= v * bc_full[j];
            }
        }
    }
    let a = crate::assembly::SparseMatrix::from_triplets(interior.len(), interior.len(), &triplets);
    let x = crate::solver::lu_solve(&a, &b)?;
    let mut coeffs = bc_full;
    for (p, &d) in interior.iter().enumerate() {
        coeffs[d] = x[p];
    }
    Ok(FeFunction::new(space.clone(), coeffs))
}
