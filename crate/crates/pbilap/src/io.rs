//! File output: VTK legacy unstructured grids, CSV tables, gnuplot
//! columns, and MatrixMarket dumps.
//!
//! Floats are written with 17 significant digits so CSV round-trips
//! reproduce the doubles exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::analysis::EocTable;
use crate::assembly::SparseMatrix;
use crate::mesh::Mesh;
use crate::solver::SolveReport;
use crate::space::FeFunction;
use crate::Result;

/// `{:.16e}` keeps 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a mesh with named vertex scalar fields as VTK legacy ASCII
/// (UNSTRUCTURED_GRID, cell type 3 for segments, 5 for triangles).
pub fn write_vtk(path: &Path, mesh: &Mesh, fields: &[(&str, &[f64])]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# vtk DataFile Version 2.0")?;
    writeln!(out, "pbilap field output")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.num_vertices())?;
    for i in 0..mesh.num_vertices() {
        let [x, y] = mesh.vertex(i);
        writeln!(out, "{} {} 0.0", fmt_f64(x), fmt_f64(y))?;
    }
    let vpc = mesh.verts_per_cell();
    writeln!(out, "CELLS {} {}", mesh.num_cells(), mesh.num_cells() * (vpc + 1))?;
    for c in 0..mesh.num_cells() {
        let verts = mesh.cell(c);
        write!(out, "{vpc}")?;
        for v in verts {
            write!(out, " {v}")?;
        }
        writeln!(out)?;
    }
    writeln!(out, "CELL_TYPES {}", mesh.num_cells())?;
    let ctype = if mesh.dim() == 1 { 3 } else { 5 };
    for _ in 0..mesh.num_cells() {
        writeln!(out, "{ctype}")?;
    }
    if !fields.is_empty() {
        writeln!(out, "POINT_DATA {}", mesh.num_vertices())?;
        for (name, values) in fields {
            assert_eq!(values.len(), mesh.num_vertices(), "field {name} length");
            writeln!(out, "SCALARS {name} double 1")?;
            writeln!(out, "LOOKUP_TABLE default")?;
            for v in *values {
                writeln!(out, "{}", fmt_f64(*v))?;
            }
        }
    }
    Ok(())
}

/// Values of a discrete function at the mesh vertices (the leading DOFs
/// by construction; quadratic midpoint DOFs are simply dropped).
pub fn vertex_values(f: &FeFunction) -> Vec<f64> {
    f.coeffs[..f.space.mesh.num_vertices()].to_vec()
}

/// CSV export of a discrete function: DOF coordinates then the value.
pub fn write_fefunction_csv(path: &Path, f: &FeFunction) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    let dim = f.space.mesh.dim();
    if dim == 1 {
        writeln!(out, "x,value")?;
    } else {
        writeln!(out, "x,y,value")?;
    }
    for (i, &c) in f.coeffs.iter().enumerate() {
        let [x, y] = f.space.dof_coords[i];
        if dim == 1 {
            writeln!(out, "{},{}", fmt_f64(x), fmt_f64(c))?;
        } else {
            writeln!(out, "{},{},{}", fmt_f64(x), fmt_f64(y), fmt_f64(c))?;
        }
    }
    Ok(())
}

/// Gnuplot-ready whitespace-separated columns.
pub fn write_columns(path: &Path, header: &str, rows: &[Vec<f64>]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# {header}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn write_eoc_csv(path: &Path, table: &EocTable) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "case,p,q,k,h_max,dofs,err_w_lq,err_gradu_lp,eoc_w,eoc_u")?;
    for row in &table.rows {
        let fmt_opt = |o: Option<f64>| o.map(fmt_f64).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            table.case,
            fmt_f64(table.p),
            fmt_f64(table.q),
            table.k,
            fmt_f64(row.h_max),
            row.dofs,
            fmt_f64(row.err_w_lq),
            fmt_f64(row.err_gradu_lp),
            fmt_opt(row.eoc_w),
            fmt_opt(row.eoc_u),
        )?;
    }
    Ok(())
}

pub const REPORT_HEADER: &str = "p,q,k,h_max,dofs,newton_iters_total,residual,converged,wall_s";

/// One solve-report CSV row.
#[allow(clippy::too_many_arguments)]
pub fn report_row(p: f64, q: f64, k: usize, h_max: f64, dofs: usize, report: &SolveReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        fmt_f64(p),
        fmt_f64(q),
        k,
        fmt_f64(h_max),
        dofs,
        report.total_iters(),
        fmt_f64(report.final_residual),
        report.converged,
        fmt_f64(report.wall_s),
    )
}

pub fn write_report_csv(path: &Path, rows: &[String]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{REPORT_HEADER}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// Generic CSV writer with a fixed header.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// MatrixMarket coordinate format dump, for debugging assembled systems.
pub fn write_matrix_market(path: &Path, m: &SparseMatrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", m.n_rows, m.n_cols, m.nnz())?;
    for r in 0..m.n_rows {
        for (c, v) in m.row(r) {
            writeln!(out, "{} {} {}", r + 1, c + 1, fmt_f64(v))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{criss_cross_mesh, unit_interval_mesh};
    use crate::space::{build_space, interpolate};
    use std::sync::Arc;

    #[test]
    fn vtk_structure_2d() {
        let dir = std::env::temp_dir().join("pbilap_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let mesh = criss_cross_mesh(1, 1, (0.0, 0.0, 1.0, 1.0)).unwrap();
        let space = Arc::new(build_space(mesh.clone(), 1).unwrap());
        let f = interpolate(&space, |p| p[0] + p[1]);
        let path = dir.join("mesh.vtk");
        write_vtk(&path, &mesh, &[("u", &vertex_values(&f))]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 2.0"));
        assert!(text.contains("DATASET UNSTRUCTURED_GRID"));
        assert!(text.contains("POINTS 5 double"));
        assert!(text.contains("CELLS 4 16"));
        assert!(text.contains("CELL_TYPES 4"));
        assert!(text.contains("\n5\n"));
        assert!(text.contains("SCALARS u double 1"));
    }

    #[test]
    fn vtk_segments_use_line_cells() {
        let dir = std::env::temp_dir().join("pbilap_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let mesh = unit_interval_mesh(3, 0.0, 1.0).unwrap();
        let path = dir.join("line.vtk");
        write_vtk(&path, &mesh, &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("CELL_TYPES 3"));
        assert!(text.contains("\n3\n"));
    }

    #[test]
    fn csv_roundtrips_doubles() {
        let v = std::f64::consts::PI * 1e-7;
        let s = fmt_f64(v);
        let back: f64 = s.parse().unwrap();
        assert_eq!(v, back);
    }

    #[test]
    fn matrix_market_dump() {
        let dir = std::env::temp_dir().join("pbilap_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let m = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.5), (1, 0, -2.0)]);
        let path = dir.join("mat.mtx");
        write_matrix_market(&path, &m).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real general"));
        assert!(text.contains("2 2 2"));
    }
}
