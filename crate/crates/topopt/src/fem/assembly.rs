//! Global stiffness assembly and boundary-condition elimination.
//!
//! The global matrix is `K(rho) = sum_e E(rho_e) * K_e^0`, so only the
//! scalar element moduli change between optimization iterations. Three
//! assembly strategies trade generality for speed:
//!
//! * `Standard` — recompute every element matrix by Gauss quadrature on
//!   every call (the traditional route; serves as the timing baseline),
//! * `Fast` — compute the unit matrices by quadrature once on the first
//!   call, cache them, and only rescale afterwards,
//! * `Symbolic` — like `Fast`, but the cached matrices come from the
//!   closed-form expressions instead of quadrature.
//!
//! All three produce identical matrices up to roundoff. Scatter positions
//! into the compressed-row value array are precomputed per element, so
//! repeat assemblies are pure gather/scale/add passes.

use crate::error::{Result, TopoError};
use crate::fem::element::{
    hex8_k0_quadrature, quad4_k0_quadrature, tri3_k0_quadrature, tri3_vertices, K0Path, K0Set,
};
use crate::fem::sparse::{CsrMatrix, CsrPattern};
use crate::material::{check_densities, d_plane_stress, d_solid, SimpMaterial};
use crate::mesh::{DofMap, ElementType, Mesh};
use crate::problems::ProblemDefinition;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssemblyMethod {
    Standard,
    Fast,
    Symbolic,
}

impl AssemblyMethod {
    pub fn parse(name: &str) -> Result<AssemblyMethod> {
        match name {
            "standard" => Ok(AssemblyMethod::Standard),
            "fast" => Ok(AssemblyMethod::Fast),
            "symbolic" => Ok(AssemblyMethod::Symbolic),
            other => Err(TopoError::Configuration(format!(
                "unknown assembly method '{other}' (expected standard, fast, or symbolic)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AssemblyMethod::Standard => "standard",
            AssemblyMethod::Fast => "fast",
            AssemblyMethod::Symbolic => "symbolic",
        }
    }
}

/// Reusable assembler bound to one mesh/dof-map pair.
pub struct Assembler {
    method: AssemblyMethod,
    pattern: Arc<CsrPattern>,
    /// Element-major scatter: value-array index of each local (row, col) pair.
    scatter: Vec<u32>,
    n_elements: usize,
    elem_dofs: usize,
    cache: Option<K0Set>,
    quadrature_evals: u64,
}

impl Assembler {
    /// Build the sparsity pattern and scatter table for `mesh`.
    pub fn new(mesh: &Mesh, dofs: &DofMap, method: AssemblyMethod) -> Assembler {
        let pattern = Arc::new(CsrPattern::from_dof_map(dofs, mesh.n_elements()));
        let elem_dofs = dofs.stride();
        let mut scatter = Vec::with_capacity(mesh.n_elements() * elem_dofs * elem_dofs);
        for e in 0..mesh.n_elements() {
            let ed = dofs.element_dofs(e);
            for &r in ed {
                for &c in ed {
                    let k = pattern
                        .value_index(r as usize, c as usize)
                        .expect("element dof pair must be in the pattern");
                    scatter.push(k as u32);
                }
            }
        }
        Assembler {
            method,
            pattern,
            scatter,
            n_elements: mesh.n_elements(),
            elem_dofs,
            cache: None,
            quadrature_evals: 0,
        }
    }

    pub fn method(&self) -> AssemblyMethod {
        self.method
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    /// Number of element matrices computed by Gauss quadrature so far.
    /// Repeat `Fast` calls and all `Symbolic` calls leave it unchanged.
    pub fn quadrature_evals(&self) -> u64 {
        self.quadrature_evals
    }

    /// Assemble `K(rho)`. Densities are validated against [0, 1].
    pub fn assemble(
        &mut self,
        mesh: &Mesh,
        mat: &SimpMaterial,
        rho: &[f64],
    ) -> Result<CsrMatrix> {
        if mesh.n_elements() != self.n_elements {
            return Err(TopoError::InvalidArgument(
                "assembler was built for a different mesh".into(),
            ));
        }
        if rho.len() != self.n_elements {
            return Err(TopoError::InvalidArgument(format!(
                "density vector length {} does not match element count {}",
                rho.len(),
                self.n_elements
            )));
        }
        check_densities(rho)?;

        let mut k = CsrMatrix::zeros(self.pattern.clone());
        match self.method {
            AssemblyMethod::Standard => {
                for e in 0..self.n_elements {
                    let k0 = self.quadrature_element(mesh, mat, e);
                    self.quadrature_evals += 1;
                    self.scatter_element(&mut k, e, mat.modulus_unchecked(rho[e]), &k0);
                }
            }
            AssemblyMethod::Fast => {
                if self.cache.is_none() {
                    let set = match mesh.element_type {
                        ElementType::Tri3 => {
                            let d = d_plane_stress(mat.nu);
                            let per: Vec<_> = (0..self.n_elements)
                                .map(|e| {
                                    self.quadrature_evals += 1;
                                    tri3_k0_quadrature(&tri3_vertices(mesh, e), &d)
                                })
                                .collect();
                            K0Set::PerElement(per)
                        }
                        _ => {
                            self.quadrature_evals += 1;
                            K0Set::compute(mesh, mat, K0Path::Quadrature)?
                        }
                    };
                    self.cache = Some(set);
                }
                self.scatter_cached(&mut k, mat, rho);
            }
            AssemblyMethod::Symbolic => {
                if self.cache.is_none() {
                    self.cache = Some(K0Set::compute(mesh, mat, K0Path::ClosedForm)?);
                }
                self.scatter_cached(&mut k, mat, rho);
            }
        }
        Ok(k)
    }

    fn scatter_cached(&self, k: &mut CsrMatrix, mat: &SimpMaterial, rho: &[f64]) {
        let cache = self.cache.as_ref().expect("cache populated above");
        for e in 0..self.n_elements {
            self.scatter_element(k, e, mat.modulus_unchecked(rho[e]), cache.k0(e));
        }
    }

    #[inline]
    fn scatter_element(&self, k: &mut CsrMatrix, e: usize, modulus: f64, k0: &nalgebra::DMatrix<f64>) {
        let nd = self.elem_dofs;
        let idx = &self.scatter[e * nd * nd..(e + 1) * nd * nd];
        let mut slot = 0;
        for a in 0..nd {
            for b in 0..nd {
                k.values[idx[slot] as usize] += modulus * k0[(a, b)];
                slot += 1;
            }
        }
    }

    fn quadrature_element(
        &self,
        mesh: &Mesh,
        mat: &SimpMaterial,
        e: usize,
    ) -> nalgebra::DMatrix<f64> {
        match mesh.element_type {
            ElementType::Quad4 => {
                let conn = mesh.element(e);
                let mut xy = [[0.0; 2]; 4];
                for (a, &n) in conn.iter().enumerate() {
                    let p = mesh.node(n as usize);
                    xy[a] = [p[0], p[1]];
                }
                quad4_k0_quadrature(&xy, &d_plane_stress(mat.nu))
            }
            ElementType::Tri3 => {
                tri3_k0_quadrature(&tri3_vertices(mesh, e), &d_plane_stress(mat.nu))
            }
            ElementType::Hex8 => {
                let conn = mesh.element(e);
                let mut xyz = [[0.0; 3]; 8];
                for (a, &n) in conn.iter().enumerate() {
                    let p = mesh.node(n as usize);
                    xyz[a] = [p[0], p[1], p[2]];
                }
                hex8_k0_quadrature(&xyz, &d_solid(mat.nu))
            }
        }
    }
}

/// Nodal load vector of a problem definition on a given mesh.
pub fn assemble_load(problem: &ProblemDefinition, mesh: &Mesh, dofs: &DofMap) -> Result<Vec<f64>> {
    problem.check_box(mesh)?;
    let mut f = vec![0.0; dofs.n_dofs];
    for (dof, value) in problem.loaded_dofs(mesh)? {
        f[dof] = value;
    }
    Ok(f)
}

/// A reduced linear system ready to solve.
#[derive(Debug, Clone)]
pub struct SparseSystem {
    pub k: CsrMatrix,
    pub f: Vec<f64>,
    /// Sorted, deduplicated list of eliminated dofs.
    pub fixed_dofs: Vec<usize>,
}

/// Eliminate fixed dofs symmetrically: zero the row and column, put a unit
/// pivot on the diagonal, and zero the load entry. The reduced matrix stays
/// symmetric positive definite when the free structure is supported.
pub fn apply_dirichlet(
    k: CsrMatrix,
    f: Vec<f64>,
    fixed_dofs: Vec<usize>,
) -> Result<SparseSystem> {
    let n = k.n_rows();
    let mut fixed = fixed_dofs;
    fixed.sort_unstable();
    fixed.dedup();
    if let Some(&worst) = fixed.last() {
        if worst >= n {
            return Err(TopoError::InvalidArgument(format!(
                "fixed dof {worst} out of range for {n} dofs"
            )));
        }
    }
    if f.len() != n {
        return Err(TopoError::InvalidArgument(format!(
            "load vector length {} does not match {} dofs",
            f.len(),
            n
        )));
    }

    let mut k = k;
    let mut f = f;
    let pattern = k.pattern.clone();
    for &d in &fixed {
        // Row d: zero everything, unit diagonal.
        let (lo, hi) = (pattern.row_ptr[d], pattern.row_ptr[d + 1]);
        for idx in lo..hi {
            k.values[idx] = if pattern.col_idx[idx] as usize == d {
                1.0
            } else {
                0.0
            };
        }
        // Column d: the pattern is symmetric, so the rows holding column d
        // are exactly the columns of row d.
        for idx in lo..hi {
            let r = pattern.col_idx[idx] as usize;
            if r != d {
                if let Some(kidx) = pattern.value_index(r, d) {
                    k.values[kidx] = 0.0;
                }
            }
        }
        f[d] = 0.0;
    }

    Ok(SparseSystem {
        k,
        f,
        fixed_dofs: fixed,
    })
}
