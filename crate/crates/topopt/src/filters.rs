//! Design-field regularization.
//!
//! All filters share one neighborhood operator built from element centroids:
//! elements closer than the radius `rmin` are coupled with the linearly
//! decaying weight `w(i, j) = rmin - dist(i, j)`. Three uses of it are
//! supported:
//!
//! * **sensitivity** filtering smooths the compliance gradient in place,
//!   `dc_i <- sum_j w(i,j) rho_j dc_j / (max(gamma, rho_i) sum_j w(i,j))`,
//!   leaving densities and the volume gradient untouched;
//! * **density** filtering maps the design field to a physical field,
//!   `rho~_i = sum_j w(i,j) v_j rho_j / sum_j w(i,j) v_j`, with gradients
//!   pulled back through the transpose of the same linear map;
//! * **heaviside** projection sharpens the density-filtered field with the
//!   smoothed step `rho- = 1 - exp(-beta rho~) + rho~ exp(-beta)`, whose
//!   steepness `beta` is raised gradually from 1 to 512 by the outer loop
//!   (continuation), since starting steep would defeat the regularization.
//!
//! The neighborhood search buckets centroids on a uniform grid of cell side
//! `rmin`, so construction is linear in the number of elements for meshes
//! with bounded neighbor counts.

use std::collections::HashMap;

use crate::error::{Result, TopoError};
use crate::fem::sparse::CsrMatrix;
use crate::mesh::{element_geometry, Mesh};

/// Density floor in the sensitivity-filter denominator.
const GAMMA: f64 = 1e-3;
/// First projection steepness of the continuation schedule.
pub const BETA_INITIAL: f64 = 1.0;
/// Final projection steepness; reaching it ends the continuation.
pub const BETA_MAX: f64 = 512.0;

/// Linearly decaying filter weight; zero at and beyond the radius.
pub(crate) fn filter_weight(rmin: f64, ci: &[f64], cj: &[f64]) -> f64 {
    let mut d2 = 0.0;
    for (a, b) in ci.iter().zip(cj) {
        let d = a - b;
        d2 += d * d;
    }
    let dist = d2.sqrt();
    if dist < rmin {
        rmin - dist
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    None,
    Sensitivity,
    Density,
    Heaviside,
}

impl FilterKind {
    pub fn parse(name: &str) -> Result<FilterKind> {
        match name {
            "none" => Ok(FilterKind::None),
            "sensitivity" => Ok(FilterKind::Sensitivity),
            "density" => Ok(FilterKind::Density),
            "heaviside" => Ok(FilterKind::Heaviside),
            other => Err(TopoError::Configuration(format!(
                "unknown filter '{other}' (expected none, sensitivity, density, or heaviside)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::None => "none",
            FilterKind::Sensitivity => "sensitivity",
            FilterKind::Density => "density",
            FilterKind::Heaviside => "heaviside",
        }
    }
}

/// The assembled neighborhood operator plus per-kind state.
#[derive(Debug, Clone)]
pub struct FilterOperator {
    kind: FilterKind,
    /// Symmetric weight matrix `H`, one row per element, self included.
    h: CsrMatrix,
    /// `sum_j H_ij` per row.
    row_sum: Vec<f64>,
    /// `sum_j H_ij v_j` per row.
    hv_row_sum: Vec<f64>,
    volumes: Vec<f64>,
    beta: f64,
    beta_max: f64,
}

impl FilterOperator {
    /// Build the operator for a mesh. `rmin` is ignored for `None` but must
    /// be positive for the real filters.
    pub fn build(mesh: &Mesh, kind: FilterKind, rmin: f64) -> Result<FilterOperator> {
        let geometry = element_geometry(mesh);
        if kind == FilterKind::None {
            // Identity neighborhoods keep the code paths uniform.
            let n = mesh.n_elements();
            let rows: Vec<Vec<(u32, f64)>> = (0..n).map(|i| vec![(i as u32, 1.0)]).collect();
            let h = CsrMatrix::from_rows(n, rows);
            let hv_row_sum = geometry.volumes.clone();
            return Ok(FilterOperator {
                kind,
                h,
                row_sum: vec![1.0; n],
                hv_row_sum,
                volumes: geometry.volumes,
                beta: BETA_INITIAL,
                beta_max: BETA_MAX,
            });
        }
        if !(rmin > 0.0) || !rmin.is_finite() {
            return Err(TopoError::InvalidArgument(format!(
                "filter radius must be positive and finite, got {rmin}"
            )));
        }
        let h = neighborhood_matrix(&geometry.centroids, mesh.dim, rmin);
        let n = mesh.n_elements();
        let mut row_sum = vec![0.0; n];
        let mut hv_row_sum = vec![0.0; n];
        for i in 0..n {
            let (lo, hi) = (h.pattern.row_ptr[i], h.pattern.row_ptr[i + 1]);
            for idx in lo..hi {
                let j = h.pattern.col_idx[idx] as usize;
                row_sum[i] += h.values[idx];
                hv_row_sum[i] += h.values[idx] * geometry.volumes[j];
            }
        }
        Ok(FilterOperator {
            kind,
            h,
            row_sum,
            hv_row_sum,
            volumes: geometry.volumes,
            beta: BETA_INITIAL,
            beta_max: BETA_MAX,
        })
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn n_elements(&self) -> usize {
        self.volumes.len()
    }

    /// Current projection steepness (meaningful for `Heaviside` only).
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Override the projection continuation schedule (defaults are
    /// [`BETA_INITIAL`] and [`BETA_MAX`]).
    pub fn set_projection(&mut self, beta0: f64, beta_max: f64) -> Result<()> {
        if !(beta0 > 0.0) || !(beta_max >= beta0) || !beta_max.is_finite() {
            return Err(TopoError::InvalidArgument(format!(
                "projection steepness must satisfy 0 < beta0 <= beta_max, \
                 got beta0 = {beta0}, beta_max = {beta_max}"
            )));
        }
        self.beta = beta0;
        self.beta_max = beta_max;
        Ok(())
    }

    /// Double the projection steepness, saturating at the configured cap.
    /// Returns `false` when the maximum had already been reached.
    pub fn raise_beta(&mut self) -> bool {
        if self.kind != FilterKind::Heaviside || self.beta >= self.beta_max {
            return false;
        }
        self.beta = (self.beta * 2.0).min(self.beta_max);
        true
    }

    /// The weight matrix, exposed for verification against a brute-force
    /// construction.
    pub fn weights(&self) -> &CsrMatrix {
        &self.h
    }

    /// Map design densities to the physical densities the analysis sees.
    pub fn physical(&self, design: &[f64]) -> Result<Vec<f64>> {
        self.check_len(design)?;
        Ok(match self.kind {
            FilterKind::None | FilterKind::Sensitivity => design.to_vec(),
            FilterKind::Density => self.density_forward(design),
            FilterKind::Heaviside => {
                let tilde = self.density_forward(design);
                tilde.iter().map(|&t| self.project(t)).collect()
            }
        })
    }

    /// Pull the objective gradient back from physical to design densities.
    ///
    /// For the sensitivity filter this is the classical gradient smoothing
    /// (`design` supplies the densities it weights by); for the density and
    /// projection filters it is the exact chain rule.
    pub fn objective_gradient(&self, design: &[f64], dc_physical: &[f64]) -> Result<Vec<f64>> {
        self.check_len(design)?;
        self.check_len(dc_physical)?;
        Ok(match self.kind {
            FilterKind::None => dc_physical.to_vec(),
            FilterKind::Sensitivity => self.smooth_sensitivities(design, dc_physical),
            FilterKind::Density => self.density_backward(dc_physical),
            FilterKind::Heaviside => self.projection_backward(design, dc_physical),
        })
    }

    /// Pull the volume-constraint gradient back to design densities. The
    /// sensitivity filter leaves it untouched.
    pub fn constraint_gradient(&self, design: &[f64], dg_physical: &[f64]) -> Result<Vec<f64>> {
        self.check_len(design)?;
        self.check_len(dg_physical)?;
        Ok(match self.kind {
            FilterKind::None | FilterKind::Sensitivity => dg_physical.to_vec(),
            FilterKind::Density => self.density_backward(dg_physical),
            FilterKind::Heaviside => self.projection_backward(design, dg_physical),
        })
    }

    /// `rho~ = H (v .* rho) ./ (H v)`.
    fn density_forward(&self, rho: &[f64]) -> Vec<f64> {
        let weighted: Vec<f64> = rho.iter().zip(&self.volumes).map(|(&r, &v)| r * v).collect();
        let mut out = self.h.mul_vec(&weighted);
        for (o, &s) in out.iter_mut().zip(&self.hv_row_sum) {
            *o /= s;
        }
        out
    }

    /// Transpose of the density-filter Jacobian applied to `g`.
    fn density_backward(&self, g: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = g.iter().zip(&self.hv_row_sum).map(|(&gi, &s)| gi / s).collect();
        // H is symmetric, so multiplying by H is multiplying by H^T.
        let mut out = self.h.mul_vec(&scaled);
        for (o, &v) in out.iter_mut().zip(&self.volumes) {
            *o *= v;
        }
        out
    }

    /// Smoothed step `1 - exp(-beta t) + t exp(-beta)`; fixes 0 and 1.
    fn project(&self, t: f64) -> f64 {
        1.0 - (-self.beta * t).exp() + t * (-self.beta).exp()
    }

    /// Derivative of [`Self::project`] with respect to its argument.
    fn project_derivative(&self, t: f64) -> f64 {
        self.beta * (-self.beta * t).exp() + (-self.beta).exp()
    }

    fn projection_backward(&self, design: &[f64], g: &[f64]) -> Vec<f64> {
        let tilde = self.density_forward(design);
        let scaled: Vec<f64> = g
            .iter()
            .zip(&tilde)
            .map(|(&gi, &t)| gi * self.project_derivative(t))
            .collect();
        self.density_backward(&scaled)
    }

    fn smooth_sensitivities(&self, rho: &[f64], dc: &[f64]) -> Vec<f64> {
        let weighted: Vec<f64> = rho.iter().zip(dc).map(|(&r, &d)| r * d).collect();
        let mut out = self.h.mul_vec(&weighted);
        for (i, o) in out.iter_mut().enumerate() {
            *o /= GAMMA.max(rho[i]) * self.row_sum[i];
        }
        out
    }

    fn check_len(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.volumes.len() {
            return Err(TopoError::InvalidArgument(format!(
                "field has {} entries but the filter was built for {} elements",
                field.len(),
                self.volumes.len()
            )));
        }
        Ok(())
    }
}

/// Assemble the weight matrix by bucketing centroids on a grid of cell side
/// `rmin`, so each element only checks the 3^dim surrounding buckets.
fn neighborhood_matrix(centroids: &[f64], dim: usize, rmin: f64) -> CsrMatrix {
    let n = centroids.len() / dim;
    let centroid = |e: usize| &centroids[e * dim..(e + 1) * dim];

    let mut lo = vec![f64::INFINITY; dim];
    for e in 0..n {
        for (axis, &c) in centroid(e).iter().enumerate() {
            lo[axis] = lo[axis].min(c);
        }
    }
    let key_of = |e: usize| -> [i64; 3] {
        let mut key = [0i64; 3];
        for (axis, &c) in centroid(e).iter().enumerate() {
            key[axis] = ((c - lo[axis]) / rmin).floor() as i64;
        }
        key
    };

    let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    for e in 0..n {
        buckets.entry(key_of(e)).or_default().push(e as u32);
    }

    let mut rows: Vec<Vec<(u32, f64)>> = Vec::with_capacity(n);
    let steps: &[i64] = &[-1, 0, 1];
    for i in 0..n {
        let ci = centroid(i);
        let key = key_of(i);
        let mut row: Vec<(u32, f64)> = Vec::new();
        let mut visit = |probe: [i64; 3]| {
            if let Some(members) = buckets.get(&probe) {
                for &j in members {
                    let w = filter_weight(rmin, ci, centroid(j as usize));
                    if w > 0.0 {
                        row.push((j, w));
                    }
                }
            }
        };
        if dim == 2 {
            for &dx in steps {
                for &dy in steps {
                    visit([key[0] + dx, key[1] + dy, 0]);
                }
            }
        } else {
            for &dx in steps {
                for &dy in steps {
                    for &dz in steps {
                        visit([key[0] + dx, key[1] + dy, key[2] + dz]);
                    }
                }
            }
        }
        row.sort_unstable_by_key(|&(j, _)| j);
        rows.push(row);
    }
    CsrMatrix::from_rows(n, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_uniform_grid, triangulate_box};

    fn grid(nx: usize, ny: usize) -> Mesh {
        build_uniform_grid(2, &[nx, ny], &[1.0, 1.0], &[0.0, 0.0]).unwrap()
    }

    #[test]
    fn center_element_of_a_3x3_grid_sees_all_nine_neighbors() {
        let mesh = grid(3, 3);
        let filter = FilterOperator::build(&mesh, FilterKind::Density, 1.5).unwrap();
        let h = filter.weights();
        let row: Vec<_> = h.pattern.row_cols(4).to_vec();
        assert_eq!(row, vec![0, 1, 2, 3, 4, 5, 6, 7, 8]);
        assert_eq!(h.get(4, 4), 1.5);
        assert_eq!(h.get(4, 1), 0.5);
        let diag_w = 1.5 - std::f64::consts::SQRT_2;
        assert!((h.get(4, 0) - diag_w).abs() < 1e-15);
        // Corner element: self, two edge neighbors, one diagonal.
        assert_eq!(h.pattern.row_cols(0).len(), 4);
    }

    #[test]
    fn bucketed_construction_equals_brute_force_exactly() {
        let quad = grid(7, 5);
        let tri = triangulate_box(5, 4, &[0.0, 5.0, 0.0, 4.0]).unwrap();
        let hex = build_uniform_grid(3, &[4, 3, 3], &[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]).unwrap();
        for (mesh, rmin) in [(&quad, 2.1), (&tri, 1.3), (&hex, 1.8)] {
            let fast = FilterOperator::build(mesh, FilterKind::Density, rmin).unwrap();
            let slow = crate::verify::brute_force_filter_weights(mesh, rmin);
            assert_eq!(fast.weights().pattern.col_idx, slow.pattern.col_idx);
            assert_eq!(fast.weights().pattern.row_ptr, slow.pattern.row_ptr);
            // Same weight expression on both paths: bitwise equality.
            assert_eq!(fast.weights().values, slow.values);
        }
    }

    #[test]
    fn sensitivity_filter_matches_hand_computation() {
        let mesh = grid(2, 1);
        let filter = FilterOperator::build(&mesh, FilterKind::Sensitivity, 1.5).unwrap();
        // H = [[1.5, 0.5], [0.5, 1.5]], row sums 2.
        let rho = [0.5, 0.25];
        let dc = [-1.0, -1.0];
        let out = filter.objective_gradient(&rho, &dc).unwrap();
        assert!((out[0] - (-0.875)).abs() < 1e-15);
        assert!((out[1] - (-1.25)).abs() < 1e-15);
        // Physical densities and the volume gradient pass through untouched.
        assert_eq!(filter.physical(&rho).unwrap(), rho.to_vec());
        assert_eq!(
            filter.constraint_gradient(&rho, &[1.0, 1.0]).unwrap(),
            vec![1.0, 1.0]
        );
    }

    #[test]
    fn sensitivity_filter_floors_the_density_denominator() {
        let mesh = grid(2, 1);
        let filter = FilterOperator::build(&mesh, FilterKind::Sensitivity, 1.5).unwrap();
        let out = filter.objective_gradient(&[0.0, 0.5], &[-1.0, 0.0]).unwrap();
        // Denominator uses max(gamma, rho) = 1e-3, not zero.
        assert!((out[0] - (1.5 * 0.0 * -1.0) / (1e-3 * 2.0)).abs() < 1e-12);
        assert!(out[0].is_finite());
    }

    #[test]
    fn density_filter_matches_hand_computation_and_preserves_constants() {
        let mesh = grid(2, 1);
        let filter = FilterOperator::build(&mesh, FilterKind::Density, 1.5).unwrap();
        let tilde = filter.physical(&[0.5, 0.25]).unwrap();
        assert!((tilde[0] - 0.4375).abs() < 1e-15);
        assert!((tilde[1] - 0.3125).abs() < 1e-15);
        // A constant field is a fixed point.
        let constant = filter.physical(&[0.5, 0.5]).unwrap();
        assert_eq!(constant, vec![0.5, 0.5]);
    }

    #[test]
    fn density_backward_is_the_transpose_of_forward() {
        let mesh = grid(6, 4);
        let filter = FilterOperator::build(&mesh, FilterKind::Density, 2.0).unwrap();
        let n = mesh.n_elements();
        // Deterministic pseudo-random vectors.
        let x: Vec<f64> = (0..n).map(|i| ((i * 37 + 11) % 97) as f64 / 97.0).collect();
        let g: Vec<f64> = (0..n).map(|i| ((i * 53 + 29) % 89) as f64 / 89.0 - 0.5).collect();
        // The map is linear, so J x = forward(x).
        let jx = filter.density_forward(&x);
        let jtg = filter.objective_gradient(&x, &g).unwrap();
        let lhs: f64 = g.iter().zip(&jx).map(|(a, b)| a * b).sum();
        let rhs: f64 = jtg.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn projection_matches_hand_values() {
        let mesh = grid(2, 1);
        let mut filter = FilterOperator::build(&mesh, FilterKind::Heaviside, 1.5).unwrap();
        assert_eq!(filter.beta(), 1.0);
        // At beta = 1 and rho~ = 0.5 (constant field stays 0.5):
        let out = filter.physical(&[0.5, 0.5]).unwrap();
        assert!((out[0] - 0.5774090608730877).abs() < 1e-15);
        // Endpoints are fixed for every beta.
        for _ in 0..12 {
            assert!((filter.project(0.0)).abs() < 1e-15);
            assert!((filter.project(1.0) - 1.0).abs() < 1e-15);
            filter.raise_beta();
        }
        // Derivative at rho~ = 0 and beta = 1: beta + exp(-beta).
        let mut fresh = FilterOperator::build(&mesh, FilterKind::Heaviside, 1.5).unwrap();
        assert!((fresh.project_derivative(0.0) - 1.3678794411714423).abs() < 1e-15);
        assert!(fresh.raise_beta());
    }

    #[test]
    fn projection_gradient_matches_finite_differences() {
        let mesh = grid(5, 3);
        let mut filter = FilterOperator::build(&mesh, FilterKind::Heaviside, 1.6).unwrap();
        filter.raise_beta();
        filter.raise_beta();
        filter.raise_beta(); // beta = 8
        assert_eq!(filter.beta(), 8.0);
        let n = mesh.n_elements();
        let rho: Vec<f64> = (0..n).map(|i| 0.2 + 0.6 * ((i * 31 + 7) % 61) as f64 / 61.0).collect();
        let w: Vec<f64> = (0..n).map(|i| ((i * 17 + 3) % 23) as f64 / 23.0 - 0.4).collect();
        // phi(rho) = w . physical(rho); gradient via the backward chain.
        let grad = filter.constraint_gradient(&rho, &w).unwrap();
        let h = 1e-6;
        for e in [0usize, 3, 7, n - 1] {
            let mut plus = rho.clone();
            plus[e] += h;
            let mut minus = rho.clone();
            minus[e] -= h;
            let phi = |r: &[f64]| -> f64 {
                filter
                    .physical(r)
                    .unwrap()
                    .iter()
                    .zip(&w)
                    .map(|(a, b)| a * b)
                    .sum()
            };
            let fd = (phi(&plus) - phi(&minus)) / (2.0 * h);
            assert!(
                (grad[e] - fd).abs() <= 1e-6 * fd.abs().max(1.0),
                "element {e}: analytic {} vs fd {fd}",
                grad[e]
            );
        }
    }

    #[test]
    fn beta_continuation_doubles_to_the_cap() {
        let mesh = grid(2, 1);
        let mut filter = FilterOperator::build(&mesh, FilterKind::Heaviside, 1.5).unwrap();
        let mut seen = vec![filter.beta()];
        while filter.raise_beta() {
            seen.push(filter.beta());
        }
        assert_eq!(
            seen,
            vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 128.0, 256.0, 512.0]
        );
        assert!(!filter.raise_beta());
        // Non-projection filters never raise beta.
        let mut density = FilterOperator::build(&mesh, FilterKind::Density, 1.5).unwrap();
        assert!(!density.raise_beta());
    }

    #[test]
    fn none_filter_is_the_identity_everywhere() {
        let mesh = grid(3, 2);
        let filter = FilterOperator::build(&mesh, FilterKind::None, 0.0).unwrap();
        let rho = vec![0.1, 0.9, 0.5, 0.3, 0.7, 0.2];
        assert_eq!(filter.physical(&rho).unwrap(), rho);
        assert_eq!(filter.objective_gradient(&rho, &rho).unwrap(), rho);
        assert_eq!(filter.constraint_gradient(&rho, &rho).unwrap(), rho);
    }

    #[test]
    fn build_rejects_bad_radii_and_lengths() {
        let mesh = grid(3, 2);
        assert!(FilterOperator::build(&mesh, FilterKind::Density, 0.0).is_err());
        assert!(FilterOperator::build(&mesh, FilterKind::Density, -1.0).is_err());
        assert!(FilterOperator::build(&mesh, FilterKind::Density, f64::NAN).is_err());
        let filter = FilterOperator::build(&mesh, FilterKind::Density, 1.5).unwrap();
        assert!(filter.physical(&[0.5; 4]).is_err());
    }

    #[test]
    fn parse_accepts_the_documented_names() {
        assert_eq!(FilterKind::parse("none").unwrap(), FilterKind::None);
        assert_eq!(
            FilterKind::parse("sensitivity").unwrap(),
            FilterKind::Sensitivity
        );
        assert_eq!(FilterKind::parse("density").unwrap(), FilterKind::Density);
        assert_eq!(
            FilterKind::parse("heaviside").unwrap(),
            FilterKind::Heaviside
        );
        assert!(FilterKind::parse("blur").is_err());
        assert_eq!(FilterKind::Heaviside.name(), "heaviside");
    }
}
