//! Density fields as VTK legacy (version 3.0) ASCII files.
//!
//! Tensor-product grids are written as `STRUCTURED_POINTS` — the implicit
//! cell ordering (x fastest, then y, then z) matches the element numbering
//! of the grid builder, so densities are dumped in element order.
//! Triangulations carry explicit geometry as `UNSTRUCTURED_GRID`. A small
//! reader for the same subset backs the round-trip tests.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Result, TopoError};
use crate::mesh::{ElementType, Mesh};

/// VTK cell type codes for the element kinds we write.
fn cell_type_code(et: ElementType) -> u32 {
    match et {
        ElementType::Tri3 => 5,
        ElementType::Quad4 => 9,
        ElementType::Hex8 => 12,
    }
}

/// Render a density field on `mesh` as a legacy-format VTK string.
pub fn density_vtk_string(mesh: &Mesh, density: &[f64], title: &str) -> Result<String> {
    if density.len() != mesh.n_elements() {
        return Err(TopoError::InvalidArgument(format!(
            "density has {} entries for {} elements",
            density.len(),
            mesh.n_elements()
        )));
    }
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\n");
    out.push_str(title);
    out.push('\n');
    out.push_str("ASCII\n");

    if mesh.is_uniform_grid() {
        let axis = |v: &[f64], i: usize, pad: f64| v.get(i).copied().unwrap_or(pad);
        let cells = |i: usize| mesh.cells.get(i).copied().unwrap_or(0);
        out.push_str("DATASET STRUCTURED_POINTS\n");
        let _ = writeln!(
            out,
            "DIMENSIONS {} {} {}",
            cells(0) + 1,
            cells(1) + 1,
            cells(2) + 1
        );
        let _ = writeln!(
            out,
            "ORIGIN {} {} {}",
            axis(&mesh.origin, 0, 0.0),
            axis(&mesh.origin, 1, 0.0),
            axis(&mesh.origin, 2, 0.0)
        );
        let _ = writeln!(
            out,
            "SPACING {} {} {}",
            axis(&mesh.spacing, 0, 1.0),
            axis(&mesh.spacing, 1, 1.0),
            axis(&mesh.spacing, 2, 1.0)
        );
    } else {
        out.push_str("DATASET UNSTRUCTURED_GRID\n");
        let _ = writeln!(out, "POINTS {} double", mesh.n_nodes());
        for i in 0..mesh.n_nodes() {
            let p = mesh.node(i);
            let z = p.get(2).copied().unwrap_or(0.0);
            let _ = writeln!(out, "{} {} {}", p[0], p[1], z);
        }
        let npe = mesh.nodes_per_element();
        let _ = writeln!(
            out,
            "CELLS {} {}",
            mesh.n_elements(),
            mesh.n_elements() * (npe + 1)
        );
        for e in 0..mesh.n_elements() {
            let _ = write!(out, "{npe}");
            for &node in mesh.element(e) {
                let _ = write!(out, " {node}");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "CELL_TYPES {}", mesh.n_elements());
        let code = cell_type_code(mesh.element_type);
        for _ in 0..mesh.n_elements() {
            let _ = writeln!(out, "{code}");
        }
    }

    let _ = writeln!(out, "CELL_DATA {}", density.len());
    out.push_str("SCALARS density float 1\n");
    out.push_str("LOOKUP_TABLE default\n");
    for &v in density {
        let _ = writeln!(out, "{v:.8e}");
    }
    Ok(out)
}

/// Write the field to `path`.
pub fn write_density_vtk(path: &Path, mesh: &Mesh, density: &[f64], title: &str) -> Result<()> {
    let text = density_vtk_string(mesh, density, title)?;
    fs::write(path, text).map_err(|e| {
        TopoError::Io(format!("cannot write {}: {e}", path.display()))
    })
}

/// Density field recovered from a VTK file.
#[derive(Debug, Clone)]
pub struct VtkDensityField {
    /// `STRUCTURED_POINTS` or `UNSTRUCTURED_GRID`.
    pub dataset: String,
    pub n_cells: usize,
    pub density: Vec<f64>,
}

/// Parse the subset of the legacy format this crate writes: header checks,
/// dataset detection, then the `CELL_DATA`/`SCALARS density` block.
pub fn read_density_vtk(path: &Path) -> Result<VtkDensityField> {
    let text = fs::read_to_string(path)
        .map_err(|e| TopoError::Io(format!("cannot read {}: {e}", path.display())))?;
    let bad = |msg: &str| TopoError::Io(format!("{}: {msg}", path.display()));

    let mut lines = text.lines();
    let version = lines.next().ok_or_else(|| bad("empty file"))?;
    if !version.starts_with("# vtk DataFile Version") {
        return Err(bad("missing VTK version header"));
    }
    lines.next().ok_or_else(|| bad("missing title"))?;
    match lines.next() {
        Some("ASCII") => {}
        _ => return Err(bad("expected ASCII encoding")),
    }
    let dataset = lines
        .next()
        .and_then(|l| l.strip_prefix("DATASET "))
        .ok_or_else(|| bad("missing DATASET line"))?
        .to_string();

    let rest: Vec<&str> = lines.collect();
    let cell_data_at = rest
        .iter()
        .position(|l| l.starts_with("CELL_DATA "))
        .ok_or_else(|| bad("missing CELL_DATA section"))?;
    let n_cells: usize = rest[cell_data_at]["CELL_DATA ".len()..]
        .trim()
        .parse()
        .map_err(|_| bad("unreadable CELL_DATA count"))?;
    if rest.get(cell_data_at + 1).copied() != Some("SCALARS density float 1") {
        return Err(bad("expected 'SCALARS density float 1' after CELL_DATA"));
    }
    if rest.get(cell_data_at + 2).copied() != Some("LOOKUP_TABLE default") {
        return Err(bad("expected 'LOOKUP_TABLE default'"));
    }
    let mut density = Vec::with_capacity(n_cells);
    for line in &rest[cell_data_at + 3..] {
        for token in line.split_ascii_whitespace() {
            let v: f64 = token
                .parse()
                .map_err(|_| bad(&format!("bad density value '{token}'")))?;
            density.push(v);
        }
    }
    if density.len() != n_cells {
        return Err(bad(&format!(
            "expected {n_cells} density values, found {}",
            density.len()
        )));
    }
    Ok(VtkDensityField {
        dataset,
        n_cells,
        density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform_grid, triangulate_box};

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|e| (e as f64 + 0.5) / n as f64).collect()
    }

    #[test]
    fn structured_points_header_matches_the_grid() {
        let mesh = build_uniform_grid(2, &[4, 3], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let text = density_vtk_string(&mesh, &ramp(12), "t").unwrap();
        assert!(text.contains("DATASET STRUCTURED_POINTS"));
        assert!(text.contains("DIMENSIONS 5 4 1"));
        assert!(text.contains("SPACING 1 1 1"));
        assert!(text.contains("CELL_DATA 12"));

        let mesh3 = build_uniform_grid(3, &[3, 2, 2], &[0.5, 1.0, 2.0], &[0.0, 0.0, 0.0]).unwrap();
        let text3 = density_vtk_string(&mesh3, &ramp(12), "t").unwrap();
        assert!(text3.contains("DIMENSIONS 4 3 3"));
        assert!(text3.contains("SPACING 0.5 1 2"));
    }

    #[test]
    fn triangulations_carry_explicit_cells() {
        let mesh = triangulate_box(3, 2, &[0.0, 3.0, 0.0, 2.0]).unwrap();
        let text = density_vtk_string(&mesh, &ramp(12), "t").unwrap();
        assert!(text.contains("DATASET UNSTRUCTURED_GRID"));
        assert!(text.contains("POINTS 12 double"));
        assert!(text.contains("CELLS 12 48"));
        assert!(text.contains("\n5\n")); // VTK_TRIANGLE
    }

    #[test]
    fn writer_and_reader_round_trip_both_dataset_kinds() {
        let dir = std::env::temp_dir().join("topopt_vtk_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let meshes = [
            build_uniform_grid(2, &[5, 4], &[1.0, 1.0], &[0.0, 0.0]).unwrap(),
            build_uniform_grid(3, &[3, 2, 2], &[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]).unwrap(),
            triangulate_box(4, 3, &[0.0, 4.0, 0.0, 3.0]).unwrap(),
        ];
        for (i, mesh) in meshes.iter().enumerate() {
            let density = ramp(mesh.n_elements());
            let path = dir.join(format!("field_{i}.vtk"));
            write_density_vtk(&path, mesh, &density, "round trip").unwrap();
            let field = read_density_vtk(&path).unwrap();
            assert_eq!(field.n_cells, mesh.n_elements());
            let expect = if mesh.is_uniform_grid() {
                "STRUCTURED_POINTS"
            } else {
                "UNSTRUCTURED_GRID"
            };
            assert_eq!(field.dataset, expect);
            for (a, b) in field.density.iter().zip(&density) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn reader_rejects_foreign_files() {
        let dir = std::env::temp_dir().join("topopt_vtk_roundtrip");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("not_a_field.vtk");
        std::fs::write(&path, "just text\n").unwrap();
        assert!(read_density_vtk(&path).is_err());
        assert!(read_density_vtk(&dir.join("missing.vtk")).is_err());
    }

    #[test]
    fn density_length_must_match_the_mesh() {
        let mesh = build_uniform_grid(2, &[2, 2], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert!(density_vtk_string(&mesh, &[0.5; 3], "t").is_err());
    }
}
