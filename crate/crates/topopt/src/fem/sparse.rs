//! Compressed-row sparse matrices.
//!
//! Stiffness matrices and filter weight matrices share this storage. The
//! sparsity pattern of a stiffness matrix is fixed by the mesh, so it is
//! built once, shared behind an `Arc`, and reused by every assembly.

use crate::mesh::DofMap;
use std::sync::Arc;

/// Immutable sparsity pattern: sorted column indices per row.
#[derive(Debug, Clone)]
pub struct CsrPattern {
    pub n_rows: usize,
    pub n_cols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<u32>,
}

impl CsrPattern {
    /// Structural union of the element dof blocks: entry (i, j) exists iff
    /// some element carries both dofs. Symmetric by construction.
    pub fn from_dof_map(dofs: &DofMap, n_elements: usize) -> CsrPattern {
        let n = dofs.n_dofs;
        let mut rows: Vec<Vec<u32>> = vec![Vec::new(); n];
        for e in 0..n_elements {
            let ed = dofs.element_dofs(e);
            for &r in ed {
                rows[r as usize].extend_from_slice(ed);
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0usize);
        let mut col_idx = Vec::new();
        for row in &mut rows {
            row.sort_unstable();
            row.dedup();
            col_idx.extend_from_slice(row);
            row_ptr.push(col_idx.len());
        }
        CsrPattern {
            n_rows: n,
            n_cols: n,
            row_ptr,
            col_idx,
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Columns of row `r`.
    pub fn row_cols(&self, r: usize) -> &[u32] {
        &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]]
    }

    /// Index into the value array for entry (row, col), if present.
    pub fn value_index(&self, row: usize, col: usize) -> Option<usize> {
        let cols = self.row_cols(row);
        cols.binary_search(&(col as u32))
            .ok()
            .map(|k| self.row_ptr[row] + k)
    }
}

/// Sparse matrix in compressed-row layout with a shared pattern.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub pattern: Arc<CsrPattern>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<CsrPattern>) -> CsrMatrix {
        let nnz = pattern.nnz();
        CsrMatrix {
            pattern,
            values: vec![0.0; nnz],
        }
    }

    /// Build from per-row (column, value) lists; each row must be sorted by
    /// column with no duplicates.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(u32, f64)>>) -> CsrMatrix {
        let n_rows = rows.len();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        row_ptr.push(0usize);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for (c, v) in row {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            pattern: Arc::new(CsrPattern {
                n_rows,
                n_cols,
                row_ptr,
                col_idx,
            }),
            values,
        }
    }

    /// Build from a dense row-major table, dropping exact zeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> CsrMatrix {
        let n_cols = rows.first().map_or(0, |r| r.len());
        let lists = rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j as u32, v))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(n_cols, lists)
    }

    pub fn n_rows(&self) -> usize {
        self.pattern.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.pattern.n_cols
    }

    /// y = A x.
    pub fn spmv(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols());
        debug_assert_eq!(y.len(), self.n_rows());
        let p = &self.pattern;
        for (r, yr) in y.iter_mut().enumerate() {
            let lo = p.row_ptr[r];
            let hi = p.row_ptr[r + 1];
            let mut sum = 0.0;
            for (v, &c) in self.values[lo..hi].iter().zip(&p.col_idx[lo..hi]) {
                sum += v * x[c as usize];
            }
            *yr = sum;
        }
    }

    /// Allocating convenience form of [`CsrMatrix::spmv`].
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows()];
        self.spmv(x, &mut y);
        y
    }

    /// Diagonal entries (zero where the diagonal is not in the pattern).
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows())
            .map(|r| {
                self.pattern
                    .value_index(r, r)
                    .map_or(0.0, |k| self.values[k])
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Value of entry (row, col); zero if absent from the pattern.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern
            .value_index(row, col)
            .map_or(0.0, |k| self.values[k])
    }
}

/// Euclidean norm.
pub fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Dot product, accumulated in four independent partial sums so the loop
/// is not serialized on a single floating-point dependency chain.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (mut s0, mut s1, mut s2, mut s3) = (0.0, 0.0, 0.0, 0.0);
    let quads = n / 4 * 4;
    for (qa, qb) in a[..quads].chunks_exact(4).zip(b[..quads].chunks_exact(4)) {
        s0 += qa[0] * qb[0];
        s1 += qa[1] * qb[1];
        s2 += qa[2] * qb[2];
        s3 += qa[3] * qb[3];
    }
    let mut s = (s0 + s1) + (s2 + s3);
    for i in quads..n {
        s += a[i] * b[i];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_dof_map, build_uniform_grid};

    #[test]
    fn pattern_is_symmetric_and_covers_element_blocks() {
        let mesh = build_uniform_grid(2, &[3, 2], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let dofs = build_dof_map(&mesh);
        let p = CsrPattern::from_dof_map(&dofs, mesh.n_elements());
        assert_eq!(p.n_rows, dofs.n_dofs);
        for r in 0..p.n_rows {
            for &c in p.row_cols(r) {
                assert!(
                    p.value_index(c as usize, r).is_some(),
                    "pattern must be symmetric"
                );
            }
            assert!(p.value_index(r, r).is_some(), "diagonal present");
        }
    }

    #[test]
    fn spmv_matches_dense_product() {
        let dense = vec![
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ];
        let a = CsrMatrix::from_dense(&dense);
        let x = [1.0, 2.0, 3.0];
        let y = a.mul_vec(&x);
        assert_eq!(y, vec![0.0, 0.0, 4.0]);
        assert_eq!(a.diagonal(), vec![2.0, 2.0, 2.0]);
        assert_eq!(a.get(0, 2), 0.0);
        assert_eq!(a.get(1, 0), -1.0);
    }
}
