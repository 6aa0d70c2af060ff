//! Assembly of the discrete saddle-point system.
//!
//! The mixed weak form couples the auxiliary variable `w` and the primal
//! variable `u`:
//!
//! ```text
//!   a(w, psi) + b(u, psi) = f(psi)   for all psi in the full space,
//!   b(w, phi)             = S(phi)   for all interior phi,
//! ```
//!
//! with `a(w, psi) = ∫ |w|^{q-2} w psi`, `b(u, psi) = ∫ grad u . grad psi`,
//! the Neumann functional `f(psi) = ∫_boundary (grad g . n) psi`, and the
//! source functional `S(phi) = -∫ f phi`. Dirichlet values of `u` are
//! imposed strongly; `w` carries no essential conditions.
//!
//! The semilinear term is regularised as
//! `s_eps(w) = (w^2 + eps^2)^{(q-2)/2} w`, which recovers `|w|^{q-2} w`
//! at `eps = 0` and has a bounded derivative for `eps > 0`.

use std::sync::Arc;

use crate::quadrature::{high_order_rule, quad_rule, QuadratureRule};
use crate::space::{shape_values, FeFunction, FeSpace, ScalarFn, VectorFn};
use crate::{Error, Result};

/// How the Dirichlet trace of the boundary datum is realised on the
/// discrete space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryProjection {
    /// Nodal interpolation of g on boundary DOFs (default).
    #[default]
    Interpolate,
    /// Trace of the Ritz projection of g, with interpolated boundary values.
    Ritz,
}

/// Data of one p-Bilaplacian problem: the exponent, the boundary datum
/// with its first two derivatives, an optional source, and the current
/// regularisation parameter.
#[derive(Clone)]
pub struct ProblemSpec {
    pub p: f64,
    /// Conjugate exponent, `1/p + 1/q = 1`.
    pub q: f64,
    pub g_value: ScalarFn,
    pub g_gradient: VectorFn,
    pub g_laplacian: ScalarFn,
    pub source_f: Option<ScalarFn>,
    pub epsilon: f64,
    pub boundary_projection: BoundaryProjection,
}

impl ProblemSpec {
    pub fn new(
        p: f64,
        g_value: ScalarFn,
        g_gradient: VectorFn,
        g_laplacian: ScalarFn,
        source_f: Option<ScalarFn>,
    ) -> Result<Self> {
        if !(p >= 2.0) {
            return Err(Error::invalid(format!("exponent p must be >= 2, got {p}")));
        }
        Ok(ProblemSpec {
            p,
            q: p / (p - 1.0),
            g_value,
            g_gradient,
            g_laplacian,
            source_f,
            epsilon: 0.0,
            boundary_projection: BoundaryProjection::default(),
        })
    }

    /// Same problem with a different exponent.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        let mut s = self.clone();
        if !(p >= 2.0) {
            return Err(Error::invalid(format!("exponent p must be >= 2, got {p}")));
        }
        s.p = p;
        s.q = p / (p - 1.0);
        Ok(s)
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        let mut s = self.clone();
        s.epsilon = epsilon;
        s
    }
}

impl std::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("p", &self.p)
            .field("q", &self.q)
            .field("epsilon", &self.epsilon)
            .field("has_source", &self.source_f.is_some())
            .field("boundary_projection", &self.boundary_projection)
            .finish()
    }
}

/// Regularised nonlinearity `s_eps(w) = (w^2 + eps^2)^{(q-2)/2} w`.
pub fn s_eps(w: f64, q: f64, eps: f64) -> f64 {
    if q == 2.0 {
        return w;
    }
    let a = w.abs();
    if eps == 0.0 || a > 1e150 {
        // Direct power form; also avoids overflow of w^2 for huge w where
        // eps^2 is negligible anyway.
        if a == 0.0 {
            0.0
        } else {
            w.signum() * a.powf(q - 1.0)
        }
    } else {
        (w * w + eps * eps).powf((q - 2.0) / 2.0) * w
    }
}

/// Derivative of [`s_eps`] with respect to `w`. Positive for `q` in (1, 2]
/// whenever `eps > 0` or `w != 0`.
pub fn s_eps_prime(w: f64, q: f64, eps: f64) -> f64 {
    if q == 2.0 {
        return 1.0;
    }
    let a = w.abs();
    if eps == 0.0 || a > 1e150 {
        if a == 0.0 {
            // Unbounded at the origin for q < 2; callers use eps > 0 there.
            f64::INFINITY
        } else {
            (q - 1.0) * a.powf(q - 2.0)
        }
    } else {
        let t = w * w + eps * eps;
        t.powf((q - 2.0) / 2.0) * (1.0 + (q - 2.0) * w * w / t)
    }
}

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, _, _) in triplets {
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![0.0; triplets.len()];
        let mut next = counts.clone();
        for &(r, c, v) in triplets {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }
        // Sort each row and merge duplicates.
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        for r in 0..n_rows {
            let lo = counts[r];
            let hi = counts[r + 1];
            let mut entries: Vec<(usize, f64)> =
                cols[lo..hi].iter().copied().zip(vals[lo..hi].iter().copied()).collect();
            entries.sort_by_key(|e| e.0);
            for (c, v) in entries {
                if let Some(last) = col_idx.last() {
                    if *last == c && col_idx.len() > row_ptr[r] {
                        *values.last_mut().unwrap() += v;
                        continue;
                    }
                }
                col_idx.push(c);
                values.push(v);
            }
            row_ptr[r + 1] = col_idx.len();
        }
        SparseMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Iterate the (column, value) pairs of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        self.col_idx[lo..hi].iter().copied().zip(self.values[lo..hi].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut y = vec![0.0; self.n_rows];
        for r in 0..self.n_rows {
            let mut s = 0.0;
            for (c, v) in self.row(r) {
                s += v * x[c];
            }
            y[r] = s;
        }
        y
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                d[r][c] = v;
            }
        }
        d
    }

    /// Infinity operator norm (max absolute row sum).
    pub fn inf_norm(&self) -> f64 {
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(_, v)| v.abs()).sum())
            .fold(0.0f64, f64::max)
    }

    /// Largest absolute entry of `A - A^T`; 0 for exactly symmetric
    /// assembly.
    pub fn asymmetry(&self) -> f64 {
        let d = self.to_dense();
        let mut m: f64 = 0.0;
        for r in 0..self.n_rows {
            for c in 0..self.n_cols {
                m = m.max((d[r][c] - d[c][r]).abs());
            }
        }
        m
    }
}

fn basis_table(space: &FeSpace, rule: &QuadratureRule) -> Vec<Vec<f64>> {
    rule.points
        .iter()
        .map(|&pt| shape_values(space.mesh.dim(), space.degree, pt).0)
        .collect()
}

/// Stiffness matrix `B[i][j] = ∫ grad(phi_j) . grad(phi_i)` over all DOFs.
/// No boundary conditions are applied here.
pub fn assemble_stiffness(space: &Arc<FeSpace>) -> SparseMatrix {
    let dim = space.mesh.dim();
    let rule = quad_rule(dim, 2 * space.degree).expect("supported degree");
    let n = space.dof_count;
    let dpc = space.dofs_per_cell();
    let mut triplets = Vec::with_capacity(space.mesh.num_cells() * dpc * dpc);
    for c in 0..space.mesh.num_cells() {
        let detj = space.jacobian_det(c);
        let dofs = space.cell_dofs(c);
        let mut local = vec![0.0; dpc * dpc];
        for (pt, w) in rule.points.iter().zip(&rule.weights) {
            let grads = space.phys_gradients(c, *pt);
            for i in 0..dpc {
                for j in 0..=i {
                    local[i * dpc + j] +=
                        w * detj * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                }
            }
        }
        // Mirror the lower triangle so the global matrix is symmetric
        // entry by entry.
        for i in 0..dpc {
            for j in 0..i {
                local[j * dpc + i] = local[i * dpc + j];
            }
        }
        for i in 0..dpc {
            for j in 0..dpc {
                triplets.push((dofs[i], dofs[j], local[i * dpc + j]));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &triplets)
}

/// Residual of the semilinear form: `r[i] = ∫ s_eps(w_h) phi_i`.
pub fn assemble_a_residual(w: &FeFunction, spec: &ProblemSpec) -> Vec<f64> {
    let space = &w.space;
    let rule = high_order_rule(space.mesh.dim());
    let basis = basis_table(space, &rule);
    let mut r = vec![0.0; space.dof_count];
    for c in 0..space.mesh.num_cells() {
        let detj = space.jacobian_det(c);
        let dofs = space.cell_dofs(c);
        for (k, wq) in rule.weights.iter().enumerate() {
            let vals = &basis[k];
            let wh: f64 = dofs.iter().zip(vals).map(|(&d, v)| w.coeffs[d] * v).sum();
            let s = s_eps(wh, spec.q, spec.epsilon) * wq * detj;
            for (&d, v) in dofs.iter().zip(vals) {
                r[d] += s * v;
            }
        }
    }
    r
}

/// Newton linearisation of the semilinear form:
/// `J[i][j] = ∫ s_eps'(w_h) phi_j phi_i`. Symmetric, and positive
/// semidefinite for q in (1, 2].
pub fn assemble_a_jacobian(w: &FeFunction, spec: &ProblemSpec) -> SparseMatrix {
    let space = &w.space;
    let rule = high_order_rule(space.mesh.dim());
    let basis = basis_table(space, &rule);
    let n = space.dof_count;
    let dpc = space.dofs_per_cell();
    let mut triplets = Vec::with_capacity(space.mesh.num_cells() * dpc * dpc);
    for c in 0..space.mesh.num_cells() {
        let detj = space.jacobian_det(c);
        let dofs = space.cell_dofs(c);
        let mut local = vec![0.0; dpc * dpc];
        for (k, wq) in rule.weights.iter().enumerate() {
            let vals = &basis[k];
            let wh: f64 = dofs.iter().zip(vals).map(|(&d, v)| w.coeffs[d] * v).sum();
            let sp = s_eps_prime(wh, spec.q, spec.epsilon) * wq * detj;
            for i in 0..dpc {
                for j in 0..=i {
                    local[i * dpc + j] += sp * vals[i] * vals[j];
                }
            }
        }
        for i in 0..dpc {
            for j in 0..i {
                local[j * dpc + i] = local[i * dpc + j];
            }
        }
        for i in 0..dpc {
            for j in 0..dpc {
                triplets.push((dofs[i], dofs[j], local[i * dpc + j]));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &triplets)
}

/// Neumann boundary functional `F[i] = ∫_boundary (grad g . n) phi_i`.
/// In 1d this is the point evaluation `g'(b) phi_i(b) - g'(a) phi_i(a)`.
pub fn assemble_neumann_rhs(space: &Arc<FeSpace>, spec: &ProblemSpec) -> Vec<f64> {
    let dim = space.mesh.dim();
    let mut f = vec![0.0; space.dof_count];
    match dim {
        1 => {
            for facet in space.mesh.boundary_facets() {
                let dofs = space.cell_dofs(facet.cell);
                let ref_pt = [facet.local_facet as f64, 0.0];
                let (vals, _) = shape_values(1, space.degree, ref_pt);
                let x = space.mesh.vertex(facet.vertices[0]);
                let gn = (spec.g_gradient)(x)[0] * facet.normal[0];
                for (&d, v) in dofs.iter().zip(&vals) {
                    f[d] += gn * v;
                }
            }
        }
        _ => {
            let rule = high_order_rule(1);
            // Reference coordinates of the triangle's local vertices.
            let ref_verts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
            for facet in space.mesh.boundary_facets() {
                let dofs = space.cell_dofs(facet.cell);
                let a = ref_verts[facet.local_facet];
                let b = ref_verts[(facet.local_facet + 1) % 3];
                let pa = space.mesh.vertex(facet.vertices[0]);
                let pb = space.mesh.vertex(facet.vertices[1]);
                let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
                for (pt, wq) in rule.points.iter().zip(&rule.weights) {
                    let t = pt[0];
                    let ref_pt = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
                    let (vals, _) = shape_values(2, space.degree, ref_pt);
                    let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                    let g = (spec.g_gradient)(x);
                    let gn = (g[0] * facet.normal[0] + g[1] * facet.normal[1]) * wq * len;
                    for (&d, v) in dofs.iter().zip(&vals) {
                        f[d] += gn * v;
                    }
                }
            }
        }
    }
    f
}

/// Source functional `S[i] = -∫ f phi_i` (the sign comes from testing
/// `Δw = f` against functions vanishing on the boundary).
pub fn assemble_source_rhs(space: &Arc<FeSpace>, spec: &ProblemSpec) -> Vec<f64> {
    let mut s = vec![0.0; space.dof_count];
    let Some(source) = &spec.source_f else {
        return s;
    };
    let rule = high_order_rule(space.mesh.dim());
    let basis = basis_table(space, &rule);
    for c in 0..space.mesh.num_cells() {
        let detj = space.jacobian_det(c);
        let dofs = space.cell_dofs(c);
        for (k, wq) in rule.weights.iter().enumerate() {
            let x = space.phys_point(c, rule.points[k]);
            let fv = -source(x) * wq * detj;
            for (&d, v) in dofs.iter().zip(&basis[k]) {
                s[d] += fv * v;
            }
        }
    }
    s
}

/// Precomputed pieces of the saddle system that do not change across
/// Newton iterations: stiffness, Neumann and source vectors, and the
/// interior-DOF numbering for the primal unknowns.
pub struct SaddleAssembler {
    pub space: Arc<FeSpace>,
    pub spec: ProblemSpec,
    pub stiffness: SparseMatrix,
    pub neumann: Vec<f64>,
    pub source: Vec<f64>,
    pub interior: Vec<usize>,
    interior_pos: Vec<usize>,
}

impl SaddleAssembler {
    pub fn new(space: Arc<FeSpace>, spec: ProblemSpec) -> Self {
        let stiffness = assemble_stiffness(&space);
        let neumann = assemble_neumann_rhs(&space, &spec);
        let source = assemble_source_rhs(&space, &spec);
        let interior = space.interior_dofs();
        let mut interior_pos = vec![usize::MAX; space.dof_count];
        for (p, &d) in interior.iter().enumerate() {
            interior_pos[d] = p;
        }
        SaddleAssembler {
            space,
            spec,
            stiffness,
            neumann,
            source,
            interior,
            interior_pos,
        }
    }

    /// Total unknowns: all w DOFs plus interior u DOFs.
    pub fn system_dim(&self) -> usize {
        self.space.dof_count + self.interior.len()
    }

    /// Residual of both block equations at `(u, w)`; `u` carries its
    /// fixed boundary coefficients.
    pub fn residual(&self, u: &FeFunction, w: &FeFunction, eps: f64) -> Vec<f64> {
        let n = self.space.dof_count;
        let spec = self.spec.with_epsilon(eps);
        let mut r = vec![0.0; self.system_dim()];
        let a_res = assemble_a_residual(w, &spec);
        let bu = self.stiffness.matvec(&u.coeffs);
        for i in 0..n {
            r[i] = a_res[i] + bu[i] - self.neumann[i];
        }
        let bw = self.stiffness.matvec(&w.coeffs);
        for (p, &d) in self.interior.iter().enumerate() {
            r[n + p] = bw[d] - self.source[d];
        }
        r
    }

    /// Newton matrix at the current `w` iterate: blocks
    /// `[J_a, B_int; B_int^T, 0]` over (w, interior u) unknowns.
    pub fn newton_matrix(&self, w: &FeFunction, eps: f64) -> SparseMatrix {
        let n = self.space.dof_count;
        let dim = self.system_dim();
        let spec = self.spec.with_epsilon(eps);
        let ja = assemble_a_jacobian(w, &spec);
        let mut triplets = Vec::with_capacity(ja.nnz() + 2 * self.stiffness.nnz());
        for i in 0..n {
            for (j, v) in ja.row(i) {
                triplets.push((i, j, v));
            }
            for (j, v) in self.stiffness.row(i) {
                // b(u, psi): columns of interior u unknowns.
                if self.interior_pos[j] != usize::MAX {
                    triplets.push((i, n + self.interior_pos[j], v));
                }
            }
        }
        for (p, &d) in self.interior.iter().enumerate() {
            for (j, v) in self.stiffness.row(d) {
                triplets.push((n + p, j, v));
            }
        }
        SparseMatrix::from_triplets(dim, dim, &triplets)
    }

    /// Newton matrix and right-hand side (negated residual) at `(u, w)`.
    pub fn newton_system(
        &self,
        u: &FeFunction,
        w: &FeFunction,
        eps: f64,
    ) -> (SparseMatrix, Vec<f64>) {
        let mat = self.newton_matrix(w, eps);
        let rhs = self.residual(u, w, eps).iter().map(|r| -r).collect();
        (mat, rhs)
    }
}

/// One-shot assembly of the Newton matrix and negated residual for the
/// current iterate.
pub fn assemble_saddle_system(
    u: &FeFunction,
    w: &FeFunction,
    spec: &ProblemSpec,
    space: &Arc<FeSpace>,
) -> (SparseMatrix, Vec<f64>) {
    let asm = SaddleAssembler::new(space.clone(), spec.clone());
    asm.newton_system(u, w, spec.epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{criss_cross_mesh, unit_interval_mesh};
    use crate::space::{build_space, interpolate};

    fn zero_spec(p: f64) -> ProblemSpec {
        ProblemSpec::new(
            p,
            Arc::new(|_| 0.0),
            Arc::new(|_| [0.0, 0.0]),
            Arc::new(|_| 0.0),
            None,
        )
        .unwrap()
    }

    fn space_1d(n: usize, k: usize) -> Arc<FeSpace> {
        Arc::new(build_space(unit_interval_mesh(n, 0.0, 1.0).unwrap(), k).unwrap())
    }

    #[test]
    fn conjugate_exponent_identity() {
        for p in [2.0, 3.0, 4.0, 42.0] {
            let s = zero_spec(p);
            assert!((1.0 / s.p + 1.0 / s.q - 1.0).abs() < 1e-15);
            assert!(s.q > 1.0 && s.q <= 2.0);
        }
        assert!(ProblemSpec::new(
            1.5,
            Arc::new(|_| 0.0),
            Arc::new(|_| [0.0, 0.0]),
            Arc::new(|_| 0.0),
            None
        )
        .is_err());
    }

    #[test]
    fn stiffness_1d_stencil() {
        // Uniform h: interior row is (-1/h, 2/h, -1/h).
        let s = space_1d(4, 1);
        let b = assemble_stiffness(&s);
        let h = 0.25;
        let dense = b.to_dense();
        for i in 1..4 {
            assert!((dense[i][i] - 2.0 / h).abs() < 1e-12);
            assert!((dense[i][i - 1] + 1.0 / h).abs() < 1e-12);
            assert!((dense[i][i + 1] + 1.0 / h).abs() < 1e-12);
        }
    }

    #[test]
    fn stiffness_rows_sum_to_zero_and_symmetric() {
        let mesh = criss_cross_mesh(2, 2, (-1.0, -1.0, 1.0, 1.0)).unwrap();
        let s = Arc::new(build_space(mesh, 2).unwrap());
        let b = assemble_stiffness(&s);
        for i in 0..b.n_rows {
            let sum: f64 = b.row(i).map(|(_, v)| v).sum();
            assert!(sum.abs() < 1e-12, "row {i} sums to {sum}");
        }
        assert_eq!(b.asymmetry(), 0.0);
    }

    #[test]
    fn a_residual_is_mass_action_at_p2() {
        let s = space_1d(4, 1);
        let spec = zero_spec(2.0);
        let w = interpolate(&s, |p| 0.3 + p[0]);
        let r = assemble_a_residual(&w, &spec);
        // q = 2: the residual is the mass matrix times the coefficients,
        // and the jacobian IS the mass matrix.
        let m = assemble_a_jacobian(&w, &spec);
        let mv = m.matvec(&w.coeffs);
        for (a, b) in r.iter().zip(&mv) {
            assert!((a - b).abs() < 1e-13);
        }
        let w0 = interpolate(&s, |_| 0.0);
        for v in assemble_a_residual(&w0, &zero_spec(7.0)) {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn a_residual_constant_field_dense_quadrature_oracle() {
        // Single element, w = c: r[i] = |c|^{q-2} c * ∫ phi_i. Oracle by
        // very fine midpoint quadrature of s(c) * phi_i on the element.
        let s = space_1d(1, 2);
        let c = 0.7;
        let q = 4.0 / 3.0; // p = 4
        let spec = zero_spec(4.0);
        let w = interpolate(&s, |_| c);
        let r = assemble_a_residual(&w, &spec);
        let sc = c.abs().powf(q - 2.0) * c;
        let nq = 20_000;
        for local in 0..3 {
            let mut oracle = 0.0;
            for k in 0..nq {
                let t = (k as f64 + 0.5) / nq as f64;
                let (vals, _) = shape_values(1, 2, [t, 0.0]);
                oracle += sc * vals[local] / nq as f64;
            }
            let dof = s.cell_dofs(0)[local];
            assert!(
                (r[dof] - oracle).abs() < 1e-9,
                "dof {dof}: {} vs oracle {oracle}",
                r[dof]
            );
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let s = space_1d(8, 1);
        let spec = zero_spec(3.0).with_epsilon(1e-2);
        // Deterministic pseudo-random coefficients.
        let mut state = 42u64;
        let mut rnd = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let w = FeFunction::new(s.clone(), (0..s.dof_count).map(|_| rnd()).collect());
        let delta: Vec<f64> = (0..s.dof_count).map(|_| rnd()).collect();
        let j = assemble_a_jacobian(&w, &spec);
        let jd = j.matvec(&delta);
        let r0 = assemble_a_residual(&w, &spec);
        let mut last = f64::INFINITY;
        for t in [1e-4, 1e-5, 1e-6] {
            let wt = FeFunction::new(
                s.clone(),
                w.coeffs.iter().zip(&delta).map(|(a, d)| a + t * d).collect(),
            );
            let rt = assemble_a_residual(&wt, &spec);
            let err = rt
                .iter()
                .zip(&r0)
                .zip(&jd)
                .map(|((rt, r0), jd)| ((rt - r0) / t - jd).abs())
                .fold(0.0f64, f64::max);
            assert!(err < last, "directional derivative error must decay with t");
            last = err;
        }
        let scale = jd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(last <= 1e-3 * scale);
    }

    #[test]
    fn jacobian_nonnegative_eigenvalues_tiny_mesh() {
        let s = space_1d(2, 1);
        let spec = zero_spec(4.0).with_epsilon(1e-3);
        let w = interpolate(&s, |p| p[0] - 0.3);
        let j = assemble_a_jacobian(&w, &spec).to_dense();
        let eig = symmetric_eigenvalues(&j);
        for e in eig {
            assert!(e >= -1e-12, "eigenvalue {e} negative");
        }
    }

    /// Jacobi rotation eigenvalue iteration, test-only oracle.
    fn symmetric_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
        let n = a.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        for _ in 0..100 {
            let mut off = 0.0;
            let (mut p, mut q) = (0, 1);
            for i in 0..n {
                for j in (i + 1)..n {
                    if m[i][j].abs() > off {
                        off = m[i][j].abs();
                        p = i;
                        q = j;
                    }
                }
            }
            if off < 1e-14 {
                break;
            }
            let theta = 0.5 * (2.0 * m[p][q]).atan2(m[p][p] - m[q][q]);
            let (c, s) = (theta.cos(), theta.sin());
            for k in 0..n {
                let (mpk, mqk) = (m[p][k], m[q][k]);
                m[p][k] = c * mpk + s * mqk;
                m[q][k] = -s * mpk + c * mqk;
            }
            for k in 0..n {
                let (mkp, mkq) = (m[k][p], m[k][q]);
                m[k][p] = c * mkp + s * mkq;
                m[k][q] = -s * mkp + c * mkq;
            }
        }
        (0..n).map(|i| m[i][i]).collect()
    }

    #[test]
    fn neumann_rhs_1d_identity_datum() {
        let spec = ProblemSpec::new(
            2.0,
            Arc::new(|p: [f64; 2]| p[0]),
            Arc::new(|_| [1.0, 0.0]),
            Arc::new(|_| 0.0),
            None,
        )
        .unwrap();
        let s = space_1d(4, 1);
        let f = assemble_neumann_rhs(&s, &spec);
        for (d, v) in f.iter().enumerate() {
            let x = s.dof_coords[d][0];
            if x == 0.0 {
                assert!((v + 1.0).abs() < 1e-14);
            } else if x == 1.0 {
                assert!((v - 1.0).abs() < 1e-14);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn neumann_rhs_zero_flux() {
        let spec = zero_spec(2.0);
        let mesh = criss_cross_mesh(2, 2, (0.0, 0.0, 1.0, 1.0)).unwrap();
        let s = Arc::new(build_space(mesh, 1).unwrap());
        for v in assemble_neumann_rhs(&s, &spec) {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn neumann_rhs_divergence_identity_2d() {
        // g = x on the unit square: sum_i F[i] = ∫ grad g . n ds = 0.
        let spec = ProblemSpec::new(
            2.0,
            Arc::new(|p: [f64; 2]| p[0]),
            Arc::new(|_| [1.0, 0.0]),
            Arc::new(|_| 0.0),
            None,
        )
        .unwrap();
        let mesh = criss_cross_mesh(3, 3, (0.0, 0.0, 1.0, 1.0)).unwrap();
        let s = Arc::new(build_space(mesh, 2).unwrap());
        let f = assemble_neumann_rhs(&s, &spec);
        let total: f64 = f.iter().sum();
        assert!(total.abs() < 1e-13);
        // Analytic oracle for the one nonzero contribution pattern: the
        // x = 1 edge contributes +1 * length 1, the x = 0 edge -1.
        let right: f64 = f
            .iter()
            .enumerate()
            .filter(|(d, _)| s.dof_coords[*d][0] == 1.0)
            .map(|(_, v)| v)
            .sum();
        assert!((right - 1.0).abs() < 1e-12);
    }

    #[test]
    fn source_rhs_hat_integrals() {
        let spec = ProblemSpec::new(
            2.0,
            Arc::new(|_| 0.0),
            Arc::new(|_| [0.0, 0.0]),
            Arc::new(|_| 0.0),
            Some(Arc::new(|_| 1.0)),
        )
        .unwrap();
        let s = space_1d(4, 1);
        let rhs = assemble_source_rhs(&s, &spec);
        let h = 0.25;
        for (d, v) in rhs.iter().enumerate() {
            let x = s.dof_coords[d][0];
            let expect = if x == 0.0 || x == 1.0 { -h / 2.0 } else { -h };
            assert!((v - expect).abs() < 1e-14);
        }
        // Partition of unity: -sum S[i] = ∫ f = |domain|.
        let total: f64 = rhs.iter().sum();
        assert!((total + 1.0).abs() < 1e-14);
        // Absent source gives the zero vector.
        let none = zero_spec(2.0);
        assert!(assemble_source_rhs(&s, &none).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn saddle_system_dimensions() {
        let mesh = criss_cross_mesh(2, 2, (-1.0, -1.0, 1.0, 1.0)).unwrap();
        let s = Arc::new(build_space(mesh, 1).unwrap());
        let asm = SaddleAssembler::new(s.clone(), zero_spec(2.0));
        assert_eq!(asm.system_dim(), s.dof_count + s.interior_dofs().len());
        let u = FeFunction::zero(s.clone());
        let w = FeFunction::zero(s.clone());
        let (mat, rhs) = asm.newton_system(&u, &w, 1e-2);
        assert_eq!(mat.n_rows, asm.system_dim());
        assert_eq!(mat.n_cols, asm.system_dim());
        assert_eq!(rhs.len(), asm.system_dim());
        // Saddle matrix is symmetric: J_a and B are, and the off-diagonal
        // blocks are transposes.
        assert!(mat.asymmetry() < 1e-14);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

        #[test]
        fn triplet_assembly_sums_duplicates(
            triplets in proptest::collection::vec((0usize..6, 0usize..6, -5.0f64..5.0), 1..40),
            x in proptest::collection::vec(-2.0f64..2.0, 6),
        ) {
            let m = SparseMatrix::from_triplets(6, 6, &triplets);
            // Column indices sorted and unique per row.
            for r in 0..6 {
                let cols: Vec<usize> = m.row(r).map(|(c, _)| c).collect();
                for w in cols.windows(2) {
                    proptest::prop_assert!(w[0] < w[1]);
                }
            }
            // Matvec equals the naive triplet accumulation.
            let mut naive = vec![0.0; 6];
            for &(r, c, v) in &triplets {
                naive[r] += v * x[c];
            }
            let got = m.matvec(&x);
            for (a, b) in got.iter().zip(&naive) {
                proptest::prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn duality_identity_for_sampled_fields() {
        // || |v|^{p-1} ||_{L^q} = ||v||_{L^p}^{p-1} via the high-order rule.
        let mesh = criss_cross_mesh(3, 3, (-1.0, -1.0, 1.0, 1.0)).unwrap();
        let s = Arc::new(build_space(mesh, 2).unwrap());
        let v = interpolate(&s, |p| (1.3 * p[0]).sin() + 0.4 * p[1]);
        for p in [2.0, 3.0, 7.5] {
            let q = p / (p - 1.0);
            let rule = high_order_rule(2);
            let mut int_pow_q = 0.0;
            let mut int_pow_p = 0.0;
            for c in 0..s.mesh.num_cells() {
                let detj = s.jacobian_det(c);
                for (pt, wq) in rule.points.iter().zip(&rule.weights) {
                    let val = v.eval(c, *pt).abs();
                    int_pow_q += wq * detj * val.powf(p - 1.0).powf(q);
                    int_pow_p += wq * detj * val.powf(p);
                }
            }
            let lhs = int_pow_q.powf(1.0 / q);
            let rhs = int_pow_p.powf(1.0 / p).powf(p - 1.0);
            assert!(
                (lhs - rhs).abs() <= 1e-10 * rhs,
                "p = {p}: {lhs} vs {rhs}"
            );
        }
    }
}
