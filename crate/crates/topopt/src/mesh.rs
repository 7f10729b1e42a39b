//! Structured meshes for density-based optimization.
//!
//! Two constructions are provided: uniform quadrilateral/hexahedral grids
//! and a uniform triangulation of a rectangular box (each grid cell split
//! along its (low,low)→(high,high) diagonal). Nodes are numbered
//! lexicographically with the x index varying fastest, elements likewise.
//! Densities live on elements; displacement degrees of freedom live on
//! nodes, interleaved node-major: `dof = node * dim + axis`.

use crate::error::{Result, TopoError};

/// Supported element kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    /// 4-node bilinear quadrilateral (2D).
    Quad4,
    /// 3-node constant-strain triangle (2D).
    Tri3,
    /// 8-node trilinear hexahedron (3D).
    Hex8,
}

impl ElementType {
    pub fn nodes_per_element(self) -> usize {
        match self {
            ElementType::Quad4 => 4,
            ElementType::Tri3 => 3,
            ElementType::Hex8 => 8,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ElementType::Quad4 | ElementType::Tri3 => 2,
            ElementType::Hex8 => 3,
        }
    }
}

/// A fixed mesh: geometry and connectivity never change after construction.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub dim: usize,
    pub element_type: ElementType,
    /// Node coordinates, node-major, stride `dim`.
    coords: Vec<f64>,
    /// Connectivity, element-major, stride `nodes_per_element`.
    elements: Vec<u32>,
    /// Per-axis cell size of the generating grid.
    pub spacing: Vec<f64>,
    /// Coordinates of the grid corner with the smallest coordinates.
    pub origin: Vec<f64>,
    /// Generating-grid resolution per axis (cells, not nodes).
    pub cells: Vec<usize>,
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len() / self.element_type.nodes_per_element()
    }

    pub fn nodes_per_element(&self) -> usize {
        self.element_type.nodes_per_element()
    }

    /// Coordinates of node `i` (length `dim`).
    pub fn node(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Node indices of element `e`.
    pub fn element(&self, e: usize) -> &[u32] {
        let npe = self.nodes_per_element();
        &self.elements[e * npe..(e + 1) * npe]
    }

    /// True for the tensor-product grids (quad/hex), false for triangulations.
    pub fn is_uniform_grid(&self) -> bool {
        matches!(self.element_type, ElementType::Quad4 | ElementType::Hex8)
    }

    /// Axis-aligned bounding box as (min, max) per axis.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.origin.clone();
        let mut hi = self.origin.clone();
        for (axis, h) in hi.iter_mut().enumerate() {
            *h += self.spacing[axis] * self.cells[axis] as f64;
        }
        // Guard against accumulated construction error by scanning nodes.
        for i in 0..self.n_nodes() {
            for (axis, &x) in self.node(i).iter().enumerate() {
                lo[axis] = lo[axis].min(x);
                hi[axis] = hi[axis].max(x);
            }
        }
        (lo, hi)
    }

    /// Measure (area/volume) of the generating box.
    pub fn box_measure(&self) -> f64 {
        self.cells
            .iter()
            .zip(&self.spacing)
            .map(|(&c, &h)| c as f64 * h)
            .product()
    }
}

/// Build a uniform quad (dim = 2) or hex (dim = 3) grid.
///
/// `cells` holds the element counts per axis, `spacing` the element size per
/// axis, and `origin` the minimum corner. Element node orderings are
/// counter-clockwise (2D) / right-handed with the bottom face first (3D), so
/// every element has positive measure.
pub fn build_uniform_grid(
    dim: usize,
    cells: &[usize],
    spacing: &[f64],
    origin: &[f64],
) -> Result<Mesh> {
    if dim != 2 && dim != 3 {
        return Err(TopoError::InvalidArgument(format!(
            "grid dimension must be 2 or 3, got {dim}"
        )));
    }
    if cells.len() != dim || spacing.len() != dim || origin.len() != dim {
        return Err(TopoError::InvalidArgument(format!(
            "cells/spacing/origin must each have {dim} entries"
        )));
    }
    if cells.iter().any(|&c| c == 0) {
        return Err(TopoError::InvalidArgument(
            "cell count must be positive along every axis".into(),
        ));
    }
    if spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
        return Err(TopoError::InvalidArgument(
            "spacing must be positive and finite along every axis".into(),
        ));
    }

    let nodes_per_axis: Vec<usize> = cells.iter().map(|&c| c + 1).collect();
    let n_nodes: usize = nodes_per_axis.iter().product();
    let mut coords = Vec::with_capacity(n_nodes * dim);
    if dim == 2 {
        for j in 0..nodes_per_axis[1] {
            for i in 0..nodes_per_axis[0] {
                coords.push(origin[0] + spacing[0] * i as f64);
                coords.push(origin[1] + spacing[1] * j as f64);
            }
        }
    } else {
        for k in 0..nodes_per_axis[2] {
            for j in 0..nodes_per_axis[1] {
                for i in 0..nodes_per_axis[0] {
                    coords.push(origin[0] + spacing[0] * i as f64);
                    coords.push(origin[1] + spacing[1] * j as f64);
                    coords.push(origin[2] + spacing[2] * k as f64);
                }
            }
        }
    }

    let node_index_2d = |i: usize, j: usize| (j * nodes_per_axis[0] + i) as u32;
    let mut elements = Vec::new();
    if dim == 2 {
        elements.reserve(cells[0] * cells[1] * 4);
        for j in 0..cells[1] {
            for i in 0..cells[0] {
                elements.extend_from_slice(&[
                    node_index_2d(i, j),
                    node_index_2d(i + 1, j),
                    node_index_2d(i + 1, j + 1),
                    node_index_2d(i, j + 1),
                ]);
            }
        }
    } else {
        let nxy = nodes_per_axis[0] * nodes_per_axis[1];
        let node_index_3d =
            |i: usize, j: usize, k: usize| (k * nxy + j * nodes_per_axis[0] + i) as u32;
        elements.reserve(cells[0] * cells[1] * cells[2] * 8);
        for k in 0..cells[2] {
            for j in 0..cells[1] {
                for i in 0..cells[0] {
                    elements.extend_from_slice(&[
                        node_index_3d(i, j, k),
                        node_index_3d(i + 1, j, k),
                        node_index_3d(i + 1, j + 1, k),
                        node_index_3d(i, j + 1, k),
                        node_index_3d(i, j, k + 1),
                        node_index_3d(i + 1, j, k + 1),
                        node_index_3d(i + 1, j + 1, k + 1),
                        node_index_3d(i, j + 1, k + 1),
                    ]);
                }
            }
        }
    }

    Ok(Mesh {
        dim,
        element_type: if dim == 2 {
            ElementType::Quad4
        } else {
            ElementType::Hex8
        },
        coords,
        elements,
        spacing: spacing.to_vec(),
        origin: origin.to_vec(),
        cells: cells.to_vec(),
    })
}

/// Triangulate the box `[xmin, xmax] x [ymin, ymax]` into `2 * cells_x *
/// cells_y` triangles by splitting every grid cell along its
/// (low,low)→(high,high) diagonal. Both triangles of a cell are numbered
/// consecutively (lower-right first), counter-clockwise.
pub fn triangulate_box(cells_x: usize, cells_y: usize, box_: &[f64; 4]) -> Result<Mesh> {
    let [xmin, xmax, ymin, ymax] = *box_;
    if cells_x == 0 || cells_y == 0 {
        return Err(TopoError::InvalidArgument(
            "cell count must be positive along every axis".into(),
        ));
    }
    if !(xmax > xmin) || !(ymax > ymin) {
        return Err(TopoError::InvalidArgument(format!(
            "degenerate box [{xmin}, {xmax}] x [{ymin}, {ymax}]"
        )));
    }
    let spacing = [(xmax - xmin) / cells_x as f64, (ymax - ymin) / cells_y as f64];
    let grid = build_uniform_grid(2, &[cells_x, cells_y], &spacing, &[xmin, ymin])?;

    let nx1 = (cells_x + 1) as u32;
    let node = |i: u32, j: u32| j * nx1 + i;
    let mut elements = Vec::with_capacity(cells_x * cells_y * 6);
    for j in 0..cells_y as u32 {
        for i in 0..cells_x as u32 {
            let (a, b, c, d) = (
                node(i, j),
                node(i + 1, j),
                node(i + 1, j + 1),
                node(i, j + 1),
            );
            // Diagonal a→c: lower-right triangle (a, b, c), upper-left (a, c, d).
            elements.extend_from_slice(&[a, b, c]);
            elements.extend_from_slice(&[a, c, d]);
        }
    }

    Ok(Mesh {
        dim: 2,
        element_type: ElementType::Tri3,
        coords: grid.coords,
        elements,
        spacing: spacing.to_vec(),
        origin: vec![xmin, ymin],
        cells: vec![cells_x, cells_y],
    })
}

/// Per-element centroids (flat, stride `dim`) and exact measures.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    pub centroids: Vec<f64>,
    pub volumes: Vec<f64>,
}

/// Compute element centroids (vertex averages) and exact polytope measures:
/// shoelace area for quads/triangles, trilinear-map volume for hexahedra.
pub fn element_geometry(mesh: &Mesh) -> ElementGeometry {
    let dim = mesh.dim;
    let npe = mesh.nodes_per_element();
    let ne = mesh.n_elements();
    let mut centroids = vec![0.0; ne * dim];
    let mut volumes = vec![0.0; ne];

    for e in 0..ne {
        let conn = mesh.element(e);
        let cent = &mut centroids[e * dim..(e + 1) * dim];
        for &n in conn {
            for (axis, c) in cent.iter_mut().enumerate() {
                *c += mesh.node(n as usize)[axis];
            }
        }
        for c in cent.iter_mut() {
            *c /= npe as f64;
        }

        volumes[e] = match mesh.element_type {
            ElementType::Quad4 | ElementType::Tri3 => {
                // Signed shoelace area; positive for counter-clockwise ordering.
                let mut area2 = 0.0;
                for a in 0..npe {
                    let p = mesh.node(conn[a] as usize);
                    let q = mesh.node(conn[(a + 1) % npe] as usize);
                    area2 += p[0] * q[1] - q[0] * p[1];
                }
                0.5 * area2
            }
            ElementType::Hex8 => hex_volume(mesh, conn),
        };
    }

    ElementGeometry { centroids, volumes }
}

/// Volume of a trilinear hexahedron via 2x2x2 Gauss integration of det J,
/// which is exact for trilinear geometry maps.
fn hex_volume(mesh: &Mesh, conn: &[u32]) -> f64 {
    const G: f64 = 0.577_350_269_189_625_8; // 1/sqrt(3)
    // Natural coordinates of the 8 corners (bottom face CCW, then top face).
    const XI: [f64; 8] = [-1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0];
    const ETA: [f64; 8] = [-1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0];
    const ZETA: [f64; 8] = [-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0];

    let mut vol = 0.0;
    for &gz in &[-G, G] {
        for &gy in &[-G, G] {
            for &gx in &[-G, G] {
                let mut jac = [[0.0f64; 3]; 3];
                for (a, &n) in conn.iter().enumerate() {
                    let dxi = 0.125 * XI[a] * (1.0 + ETA[a] * gy) * (1.0 + ZETA[a] * gz);
                    let deta = 0.125 * ETA[a] * (1.0 + XI[a] * gx) * (1.0 + ZETA[a] * gz);
                    let dzeta = 0.125 * ZETA[a] * (1.0 + XI[a] * gx) * (1.0 + ETA[a] * gy);
                    let p = mesh.node(n as usize);
                    for axis in 0..3 {
                        jac[0][axis] += dxi * p[axis];
                        jac[1][axis] += deta * p[axis];
                        jac[2][axis] += dzeta * p[axis];
                    }
                }
                let det = jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1])
                    - jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0])
                    + jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0]);
                vol += det;
            }
        }
    }
    vol
}

/// Map from elements to their global displacement dof lists.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub dofs_per_node: usize,
    pub n_dofs: usize,
    /// Element-major dof lists, stride `nodes_per_element * dofs_per_node`.
    cell_to_dof: Vec<u32>,
    stride: usize,
}

impl DofMap {
    /// Global dofs of element `e`, node-major (all dofs of node 0, then node 1, ...).
    pub fn element_dofs(&self, e: usize) -> &[u32] {
        &self.cell_to_dof[e * self.stride..(e + 1) * self.stride]
    }

    pub fn stride(&self) -> usize {
        self.stride
    }
}

/// Build the node-major interleaved dof map: `dof = node * dim + axis`.
pub fn build_dof_map(mesh: &Mesh) -> DofMap {
    let dim = mesh.dim;
    let stride = mesh.nodes_per_element() * dim;
    let ne = mesh.n_elements();
    let mut cell_to_dof = Vec::with_capacity(ne * stride);
    for e in 0..ne {
        for &n in mesh.element(e) {
            for axis in 0..dim {
                cell_to_dof.push(n * dim as u32 + axis as u32);
            }
        }
    }
    DofMap {
        dofs_per_node: dim,
        n_dofs: mesh.n_nodes() * dim,
        cell_to_dof,
        stride,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn benchmark_grid_counts() {
        let mesh = build_uniform_grid(2, &[160, 100], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(mesh.n_elements(), 16_000);
        assert_eq!(mesh.n_nodes(), 16_261);
        let dofs = build_dof_map(&mesh);
        assert_eq!(dofs.n_dofs, 32_522);
    }

    #[test]
    fn hex_grid_counts() {
        let mesh = build_uniform_grid(3, &[60, 20, 4], &[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(mesh.n_elements(), 4_800);
        assert_eq!(mesh.n_nodes(), 6_405);
        assert_eq!(build_dof_map(&mesh).n_dofs, 19_215);
    }

    #[test]
    fn node_numbering_is_lexicographic_x_fastest() {
        let mesh = build_uniform_grid(2, &[3, 2], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(mesh.node(0), &[0.0, 0.0]);
        assert_eq!(mesh.node(1), &[1.0, 0.0]);
        assert_eq!(mesh.node(4), &[0.0, 1.0]);
        // First element: CCW corner loop of cell (0, 0).
        assert_eq!(mesh.element(0), &[0, 1, 5, 4]);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_uniform_grid(2, &[0, 4], &[1.0, 1.0], &[0.0, 0.0]).is_err());
        assert!(build_uniform_grid(2, &[2, 4], &[1.0, -1.0], &[0.0, 0.0]).is_err());
        assert!(build_uniform_grid(4, &[2, 4, 1, 1], &[1.0; 4], &[0.0; 4]).is_err());
        assert!(triangulate_box(0, 1, &[0.0, 1.0, 0.0, 1.0]).is_err());
        assert!(triangulate_box(2, 2, &[0.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn triangulation_splits_each_cell_in_two() {
        let mesh = triangulate_box(2, 1, &[0.0, 2.0, 0.0, 1.0]).unwrap();
        assert_eq!(mesh.n_elements(), 4);
        assert_eq!(mesh.n_nodes(), 6);
        let geo = element_geometry(&mesh);
        for &v in &geo.volumes {
            assert_relative_eq!(v, 0.5, max_relative = 1e-14);
        }
        // Cell 0 diagonal runs node 0 -> node 4 ((0,0) -> (1,1)).
        assert_eq!(mesh.element(0), &[0, 1, 4]);
        assert_eq!(mesh.element(1), &[0, 4, 3]);
    }

    #[test]
    fn element_geometry_matches_hand_values() {
        let mesh = triangulate_box(1, 1, &[0.0, 1.0, 0.0, 1.0]).unwrap();
        let geo = element_geometry(&mesh);
        // Upper-left triangle (0,0), (1,1), (0,1): centroid (1/3, 2/3).
        assert_relative_eq!(geo.centroids[2], 1.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(geo.centroids[3], 2.0 / 3.0, max_relative = 1e-14);
        assert_relative_eq!(geo.volumes[1], 0.5, max_relative = 1e-14);
    }

    #[test]
    fn volumes_positive_and_sum_to_box_measure() {
        for mesh in [
            build_uniform_grid(2, &[7, 5], &[0.25, 0.5], &[1.0, -2.0]).unwrap(),
            build_uniform_grid(3, &[3, 4, 5], &[0.5, 1.0, 0.25], &[0.0, 0.0, 0.0]).unwrap(),
            triangulate_box(6, 4, &[0.0, 3.0, 0.0, 1.0]).unwrap(),
        ] {
            let geo = element_geometry(&mesh);
            assert!(geo.volumes.iter().all(|&v| v > 0.0));
            let total: f64 = geo.volumes.iter().sum();
            assert_relative_eq!(total, mesh.box_measure(), max_relative = 1e-12);
            let (lo, hi) = mesh.bounding_box();
            for e in 0..mesh.n_elements() {
                for axis in 0..mesh.dim {
                    let c = geo.centroids[e * mesh.dim + axis];
                    assert!(c > lo[axis] && c < hi[axis]);
                }
            }
        }
    }

    #[test]
    fn dof_map_is_interleaved_and_bijective() {
        let mesh = build_uniform_grid(2, &[4, 3], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let dofs = build_dof_map(&mesh);
        // Element 4 = cell (0, 1); its first node is node 5, so slot 1 holds
        // the y dof of node 5: dof = 5 * 2 + 1 = 11.
        assert_eq!(dofs.element_dofs(4)[1], 11);
        let mut seen = vec![false; dofs.n_dofs];
        for e in 0..mesh.n_elements() {
            for (slot, &d) in dofs.element_dofs(e).iter().enumerate() {
                let node = mesh.element(e)[slot / 2] as usize;
                let axis = slot % 2;
                assert_eq!(d as usize, node * 2 + axis);
                seen[d as usize] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "every dof touched by some element");
    }
}
