//! Canonical benchmark load cases.
//!
//! A problem pins supports and point loads to mesh nodes by coordinate:
//! each pin selects the nodes whose coordinate on one axis equals a target
//! value (up to roundoff), so the same definition applies to any mesh that
//! spans the expected bounding box — quad or tri, coarse or fine.
//!
//! * `cantilever2d` — left edge clamped, unit downward load at the bottom
//!   right corner;
//! * `mbb2d` — symmetric half of a simply supported beam: roller symmetry
//!   plane on the left edge, vertical support at the bottom right corner,
//!   downward load at the top left corner;
//! * `cantilever3d` — left face clamped, line of downward loads along the
//!   bottom right edge (one unit per node).

use crate::error::{Result, TopoError};
use crate::mesh::Mesh;

/// Tolerance for matching node coordinates against pinned values.
const PIN_EPS: f64 = 1e-12;

fn coord_close(x: f64, v: f64) -> bool {
    (x - v).abs() <= PIN_EPS * 1.0f64.max(v.abs())
}

/// Selects nodes by requiring fixed values on a subset of axes.
#[derive(Debug, Clone)]
struct NodeMask {
    /// `(axis, value)` pairs that must all hold.
    pins: Vec<(usize, f64)>,
}

impl NodeMask {
    fn matches(&self, x: &[f64]) -> bool {
        self.pins.iter().all(|&(axis, v)| coord_close(x[axis], v))
    }

    fn describe(&self) -> String {
        let names = ["x", "y", "z"];
        self.pins
            .iter()
            .map(|&(axis, v)| format!("{} = {v}", names[axis]))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

#[derive(Debug, Clone)]
struct Constraint {
    mask: NodeMask,
    /// Which displacement components are fixed at the matching nodes.
    axes: Vec<usize>,
}

#[derive(Debug, Clone)]
struct PointLoad {
    mask: NodeMask,
    axis: usize,
    /// Force applied to every matching node.
    value: f64,
}

/// A load case: a bounding box the mesh must span, plus coordinate-pinned
/// supports and loads.
#[derive(Debug, Clone)]
pub struct ProblemDefinition {
    name: &'static str,
    dim: usize,
    /// `[xmin, xmax, ymin, ymax(, zmin, zmax)]`.
    bbox: Vec<f64>,
    constraints: Vec<Constraint>,
    loads: Vec<PointLoad>,
}

impl ProblemDefinition {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Check that the mesh has the dimension and bounding box this problem
    /// was defined for.
    pub fn check_box(&self, mesh: &Mesh) -> Result<()> {
        if mesh.dim != self.dim {
            return Err(TopoError::Configuration(format!(
                "problem '{}' is {}-dimensional but the mesh is {}-dimensional",
                self.name,
                self.dim,
                mesh.dim
            )));
        }
        let (lo, hi) = mesh.bounding_box();
        for axis in 0..self.dim {
            for (have, want) in [
                (lo[axis], self.bbox[2 * axis]),
                (hi[axis], self.bbox[2 * axis + 1]),
            ] {
                if !coord_close(have, want) {
                    return Err(TopoError::Configuration(format!(
                        "problem '{}' expects axis {axis} to span \
                         [{}, {}] but the mesh spans [{}, {}]",
                        self.name,
                        self.bbox[2 * axis],
                        self.bbox[2 * axis + 1],
                        lo[axis],
                        hi[axis]
                    )));
                }
            }
        }
        Ok(())
    }

    fn matching_nodes(&self, mesh: &Mesh, mask: &NodeMask) -> Result<Vec<usize>> {
        let nodes: Vec<usize> = (0..mesh.n_nodes())
            .filter(|&n| mask.matches(mesh.node(n)))
            .collect();
        if nodes.is_empty() {
            return Err(TopoError::Configuration(format!(
                "problem '{}': no mesh node matches {}",
                self.name,
                mask.describe()
            )));
        }
        Ok(nodes)
    }

    /// Global indices of all constrained degrees of freedom, sorted and
    /// deduplicated.
    pub fn fixed_dofs(&self, mesh: &Mesh) -> Result<Vec<usize>> {
        let dim = mesh.dim;
        let mut dofs = Vec::new();
        for constraint in &self.constraints {
            for node in self.matching_nodes(mesh, &constraint.mask)? {
                for &axis in &constraint.axes {
                    dofs.push(node * dim + axis);
                }
            }
        }
        dofs.sort_unstable();
        dofs.dedup();
        Ok(dofs)
    }

    /// `(dof, force)` pairs with coincident contributions accumulated,
    /// sorted by dof.
    pub fn loaded_dofs(&self, mesh: &Mesh) -> Result<Vec<(usize, f64)>> {
        let dim = mesh.dim;
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for load in &self.loads {
            for node in self.matching_nodes(mesh, &load.mask)? {
                entries.push((node * dim + load.axis, load.value));
            }
        }
        entries.sort_unstable_by_key(|&(d, _)| d);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (d, v) in entries {
            match merged.last_mut() {
                Some(last) if last.0 == d => last.1 += v,
                _ => merged.push((d, v)),
            }
        }
        Ok(merged)
    }
}

/// Left edge fully clamped; point load in y at the bottom right corner.
pub fn cantilever_2d(bbox: &[f64; 4], load: f64) -> Result<ProblemDefinition> {
    check_bbox(bbox)?;
    let [xmin, xmax, _ymin, _ymax] = *bbox;
    Ok(ProblemDefinition {
        name: "cantilever2d",
        dim: 2,
        bbox: bbox.to_vec(),
        constraints: vec![Constraint {
            mask: NodeMask {
                pins: vec![(0, xmin)],
            },
            axes: vec![0, 1],
        }],
        loads: vec![PointLoad {
            mask: NodeMask {
                pins: vec![(0, xmax), (1, bbox[2])],
            },
            axis: 1,
            value: load,
        }],
    })
}

/// Symmetric half of a simply supported beam: the left edge is the symmetry
/// plane (x fixed), the bottom right corner rests on a roller (y fixed), and
/// the load acts in y at the top left corner.
pub fn mbb_2d(bbox: &[f64; 4], load: f64) -> Result<ProblemDefinition> {
    check_bbox(bbox)?;
    let [xmin, xmax, ymin, ymax] = *bbox;
    Ok(ProblemDefinition {
        name: "mbb2d",
        dim: 2,
        bbox: bbox.to_vec(),
        constraints: vec![
            Constraint {
                mask: NodeMask {
                    pins: vec![(0, xmin)],
                },
                axes: vec![0],
            },
            Constraint {
                mask: NodeMask {
                    pins: vec![(0, xmax), (1, ymin)],
                },
                axes: vec![1],
            },
        ],
        loads: vec![PointLoad {
            mask: NodeMask {
                pins: vec![(0, xmin), (1, ymax)],
            },
            axis: 1,
            value: load,
        }],
    })
}

/// Left face fully clamped; a load in y on every node of the bottom right
/// edge (x = xmax, y = ymin, all z).
pub fn cantilever_3d(bbox: &[f64; 6], load: f64) -> Result<ProblemDefinition> {
    for pair in bbox.chunks_exact(2) {
        if !(pair[0] < pair[1]) {
            return Err(TopoError::InvalidArgument(format!(
                "degenerate bounding box: [{}, {}]",
                pair[0], pair[1]
            )));
        }
    }
    let xmin = bbox[0];
    let xmax = bbox[1];
    let ymin = bbox[2];
    Ok(ProblemDefinition {
        name: "cantilever3d",
        dim: 3,
        bbox: bbox.to_vec(),
        constraints: vec![Constraint {
            mask: NodeMask {
                pins: vec![(0, xmin)],
            },
            axes: vec![0, 1, 2],
        }],
        loads: vec![PointLoad {
            mask: NodeMask {
                pins: vec![(0, xmax), (1, ymin)],
            },
            axis: 1,
            value: load,
        }],
    })
}

/// Look up a problem by its configuration name.
pub fn by_name(name: &str, bbox: &[f64], load: f64) -> Result<ProblemDefinition> {
    let want = |n: usize| -> Result<()> {
        if bbox.len() != n {
            return Err(TopoError::Configuration(format!(
                "problem '{name}' needs a bounding box of {n} entries, got {}",
                bbox.len()
            )));
        }
        Ok(())
    };
    match name {
        "cantilever2d" => {
            want(4)?;
            cantilever_2d(&[bbox[0], bbox[1], bbox[2], bbox[3]], load)
        }
        "mbb2d" => {
            want(4)?;
            mbb_2d(&[bbox[0], bbox[1], bbox[2], bbox[3]], load)
        }
        "cantilever3d" => {
            want(6)?;
            cantilever_3d(
                &[bbox[0], bbox[1], bbox[2], bbox[3], bbox[4], bbox[5]],
                load,
            )
        }
        other => Err(TopoError::Configuration(format!(
            "unknown problem '{other}' (expected cantilever2d, mbb2d, or cantilever3d)"
        ))),
    }
}

fn check_bbox(bbox: &[f64; 4]) -> Result<()> {
    if !(bbox[0] < bbox[1]) || !(bbox[2] < bbox[3]) {
        return Err(TopoError::InvalidArgument(format!(
            "degenerate bounding box: {bbox:?}"
        )));
    }
    Ok(())
}
