//! Unit-modulus element stiffness matrices.
//!
//! Every element matrix is computed for `E = 1`; assembly scales it by the
//! interpolated modulus of the owning element. Two independent routes exist
//! for each element type and must agree to machine precision:
//!
//! * a numerical route — Gauss quadrature of `B^T D B det(J)` through the
//!   full isoparametric machinery (2x2 points per axis for quads/hexes,
//!   one point for triangles), and
//! * a closed-form route — the same integrals carried out analytically.
//!   For axis-aligned rectangles and boxes the integrands are polynomial,
//!   so the reference-cell integrals reduce to short products of the
//!   corner sign tables; for triangles the constant strain field gives
//!   `K = A * B^T D B` directly from the edge coefficients.

use crate::error::{Result, TopoError};
use crate::material::{d_plane_stress, d_solid, SimpMaterial, StressModel};
use crate::mesh::{ElementType, Mesh};
use nalgebra::DMatrix;

/// Natural coordinates of the quad corners, counter-clockwise from (-1, -1).
const QXI: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
const QETA: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];

/// Natural coordinates of the hex corners: bottom face CCW, then top face.
const HXI: [f64; 8] = [-1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0];
const HETA: [f64; 8] = [-1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0];
const HZETA: [f64; 8] = [-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0, 1.0];

/// Gauss point abscissa for two-point rules: 1/sqrt(3).
const GAUSS: f64 = 0.577_350_269_189_625_8;

/// A unit-modulus element stiffness matrix.
#[derive(Debug, Clone)]
pub struct ElementStiffness {
    pub k0: DMatrix<f64>,
}

/// Which computational route produced a stiffness matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum K0Path {
    Quadrature,
    ClosedForm,
}

fn check_model(etype: ElementType, mat: &SimpMaterial) -> Result<()> {
    let want = if etype.dim() == 3 {
        StressModel::Solid3d
    } else {
        StressModel::PlaneStress
    };
    if mat.model != want {
        return Err(TopoError::InvalidArgument(format!(
            "stress model {:?} does not match element dimension {}",
            mat.model,
            etype.dim()
        )));
    }
    Ok(())
}

/// Unit element stiffness via the quadrature route, for the congruent
/// elements of a uniform grid. Triangles carry per-element geometry and are
/// rejected here; use [`tri3_k0_quadrature`] with explicit vertices instead.
pub fn unit_element_stiffness(
    etype: ElementType,
    mat: &SimpMaterial,
    spacing: &[f64],
) -> Result<ElementStiffness> {
    grid_stiffness(etype, mat, spacing, K0Path::Quadrature)
}

/// Closed-form counterpart of [`unit_element_stiffness`].
pub fn unit_element_stiffness_closed(
    etype: ElementType,
    mat: &SimpMaterial,
    spacing: &[f64],
) -> Result<ElementStiffness> {
    grid_stiffness(etype, mat, spacing, K0Path::ClosedForm)
}

fn grid_stiffness(
    etype: ElementType,
    mat: &SimpMaterial,
    spacing: &[f64],
    path: K0Path,
) -> Result<ElementStiffness> {
    check_model(etype, mat)?;
    if spacing.len() != etype.dim() || spacing.iter().any(|&h| !(h > 0.0)) {
        return Err(TopoError::InvalidArgument(format!(
            "spacing must hold {} positive entries",
            etype.dim()
        )));
    }
    let k0 = match (etype, path) {
        (ElementType::Quad4, K0Path::Quadrature) => {
            let (hx, hy) = (spacing[0], spacing[1]);
            let xy = [[0.0, 0.0], [hx, 0.0], [hx, hy], [0.0, hy]];
            quad4_k0_quadrature(&xy, &d_plane_stress(mat.nu))
        }
        (ElementType::Quad4, K0Path::ClosedForm) => {
            quad4_k0_closed(spacing[0], spacing[1], mat.nu)
        }
        (ElementType::Hex8, K0Path::Quadrature) => {
            let (hx, hy, hz) = (spacing[0], spacing[1], spacing[2]);
            let xyz = [
                [0.0, 0.0, 0.0],
                [hx, 0.0, 0.0],
                [hx, hy, 0.0],
                [0.0, hy, 0.0],
                [0.0, 0.0, hz],
                [hx, 0.0, hz],
                [hx, hy, hz],
                [0.0, hy, hz],
            ];
            hex8_k0_quadrature(&xyz, &d_solid(mat.nu))
        }
        (ElementType::Hex8, K0Path::ClosedForm) => {
            hex8_k0_closed(spacing[0], spacing[1], spacing[2], mat.nu)
        }
        (ElementType::Tri3, _) => {
            return Err(TopoError::InvalidArgument(
                "triangles have per-element geometry; pass vertices explicitly".into(),
            ))
        }
    };
    Ok(ElementStiffness { k0 })
}

/// Accumulate `k += B^T D B * scale` for a 2D element from nodal shape
/// gradients `nx = dN/dx`, `ny = dN/dy`.
fn accumulate_btdb_2d(k: &mut DMatrix<f64>, nx: &[f64], ny: &[f64], d: &[[f64; 3]; 3], scale: f64) {
    let n = nx.len();
    // Strain rows: xx, yy, xy. Node a contributes columns (2a, 2a+1).
    for i in 0..n {
        let bi = [[nx[i], 0.0], [0.0, ny[i]], [ny[i], nx[i]]];
        for j in 0..n {
            let bj = [[nx[j], 0.0], [0.0, ny[j]], [ny[j], nx[j]]];
            for a in 0..2 {
                for b in 0..2 {
                    let mut sum = 0.0;
                    for r in 0..3 {
                        let mut db = 0.0;
                        for s in 0..3 {
                            db += d[r][s] * bj[s][b];
                        }
                        sum += bi[r][a] * db;
                    }
                    k[(2 * i + a, 2 * j + b)] += sum * scale;
                }
            }
        }
    }
}

/// Quad4 stiffness by 2x2 Gauss quadrature over the bilinear map of the
/// given vertices (counter-clockwise).
pub fn quad4_k0_quadrature(xy: &[[f64; 2]; 4], d: &[[f64; 3]; 3]) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(8, 8);
    for &geta in &[-GAUSS, GAUSS] {
        for &gxi in &[-GAUSS, GAUSS] {
            let mut dxi = [0.0; 4];
            let mut deta = [0.0; 4];
            for a in 0..4 {
                dxi[a] = 0.25 * QXI[a] * (1.0 + QETA[a] * geta);
                deta[a] = 0.25 * QETA[a] * (1.0 + QXI[a] * gxi);
            }
            let mut jac = [[0.0; 2]; 2];
            for a in 0..4 {
                jac[0][0] += dxi[a] * xy[a][0];
                jac[0][1] += dxi[a] * xy[a][1];
                jac[1][0] += deta[a] * xy[a][0];
                jac[1][1] += deta[a] * xy[a][1];
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            let mut nx = [0.0; 4];
            let mut ny = [0.0; 4];
            for a in 0..4 {
                nx[a] = (jac[1][1] * dxi[a] - jac[0][1] * deta[a]) / det;
                ny[a] = (-jac[1][0] * dxi[a] + jac[0][0] * deta[a]) / det;
            }
            accumulate_btdb_2d(&mut k, &nx, &ny, d, det);
        }
    }
    k
}

/// Quad4 stiffness of an axis-aligned `hx` by `hy` rectangle in plane
/// stress, from the analytically integrated reference-cell polynomials:
///
/// ```text
/// ∫ N_i,ξ N_j,ξ = (ξ_i ξ_j / 4)(1 + η_i η_j / 3)
/// ∫ N_i,η N_j,η = (η_i η_j / 4)(1 + ξ_i ξ_j / 3)
/// ∫ N_i,ξ N_j,η = ξ_i η_j / 4
/// ```
pub fn quad4_k0_closed(hx: f64, hy: f64, nu: f64) -> DMatrix<f64> {
    let f = 1.0 / (1.0 - nu * nu);
    let g = (1.0 - nu) / 2.0;
    let mut k = DMatrix::zeros(8, 8);
    for i in 0..4 {
        for j in 0..4 {
            let ixx = QXI[i] * QXI[j] / 4.0 * (1.0 + QETA[i] * QETA[j] / 3.0);
            let iyy = QETA[i] * QETA[j] / 4.0 * (1.0 + QXI[i] * QXI[j] / 3.0);
            let ixy = QXI[i] * QETA[j] / 4.0;
            let iyx = QETA[i] * QXI[j] / 4.0;
            k[(2 * i, 2 * j)] = f * ((hy / hx) * ixx + g * (hx / hy) * iyy);
            k[(2 * i, 2 * j + 1)] = f * (nu * ixy + g * iyx);
            k[(2 * i + 1, 2 * j)] = f * (nu * iyx + g * ixy);
            k[(2 * i + 1, 2 * j + 1)] = f * ((hx / hy) * iyy + g * (hy / hx) * ixx);
        }
    }
    k
}

/// Constant-strain triangle stiffness by one-point Gauss quadrature through
/// the isoparametric map (exact: the integrand is constant).
pub fn tri3_k0_quadrature(xy: &[[f64; 2]; 3], d: &[[f64; 3]; 3]) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(6, 6);
    // N = (1 - xi - eta, xi, eta); constant natural gradients.
    let dxi = [-1.0, 1.0, 0.0];
    let deta = [-1.0, 0.0, 1.0];
    let mut jac = [[0.0; 2]; 2];
    for a in 0..3 {
        jac[0][0] += dxi[a] * xy[a][0];
        jac[0][1] += dxi[a] * xy[a][1];
        jac[1][0] += deta[a] * xy[a][0];
        jac[1][1] += deta[a] * xy[a][1];
    }
    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
    let mut nx = [0.0; 3];
    let mut ny = [0.0; 3];
    for a in 0..3 {
        nx[a] = (jac[1][1] * dxi[a] - jac[0][1] * deta[a]) / det;
        ny[a] = (-jac[1][0] * dxi[a] + jac[0][0] * deta[a]) / det;
    }
    // Single point at the centroid, weight 1/2.
    accumulate_btdb_2d(&mut k, &nx, &ny, d, det * 0.5);
    k
}

/// Constant-strain triangle stiffness from the edge coefficients
/// `b_i = y_j - y_k`, `c_i = x_k - x_j`: `K = A B^T D B` with
/// `N_i,x = b_i / 2A`, `N_i,y = c_i / 2A`.
pub fn tri3_k0_closed(xy: &[[f64; 2]; 3], nu: f64) -> DMatrix<f64> {
    let d = d_plane_stress(nu);
    let area2 = (xy[1][0] - xy[0][0]) * (xy[2][1] - xy[0][1])
        - (xy[2][0] - xy[0][0]) * (xy[1][1] - xy[0][1]);
    let mut nx = [0.0; 3];
    let mut ny = [0.0; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        nx[i] = (xy[j][1] - xy[k][1]) / area2;
        ny[i] = (xy[k][0] - xy[j][0]) / area2;
    }
    let mut k = DMatrix::zeros(6, 6);
    accumulate_btdb_2d(&mut k, &nx, &ny, &d, area2 * 0.5);
    k
}

/// Hex8 stiffness by 2x2x2 Gauss quadrature over the trilinear map of the
/// given vertices (bottom face CCW, then top face).
pub fn hex8_k0_quadrature(xyz: &[[f64; 3]; 8], d: &[[f64; 6]; 6]) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(24, 24);
    for &gz in &[-GAUSS, GAUSS] {
        for &gy in &[-GAUSS, GAUSS] {
            for &gx in &[-GAUSS, GAUSS] {
                let mut dn = [[0.0f64; 8]; 3]; // natural gradients per node
                for a in 0..8 {
                    dn[0][a] = 0.125 * HXI[a] * (1.0 + HETA[a] * gy) * (1.0 + HZETA[a] * gz);
                    dn[1][a] = 0.125 * HETA[a] * (1.0 + HXI[a] * gx) * (1.0 + HZETA[a] * gz);
                    dn[2][a] = 0.125 * HZETA[a] * (1.0 + HXI[a] * gx) * (1.0 + HETA[a] * gy);
                }
                let mut jac = [[0.0f64; 3]; 3];
                for a in 0..8 {
                    for r in 0..3 {
                        for c in 0..3 {
                            jac[r][c] += dn[r][a] * xyz[a][c];
                        }
                    }
                }
                let det = jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1])
                    - jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0])
                    + jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0]);
                let inv = [
                    [
                        (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1]) / det,
                        (jac[0][2] * jac[2][1] - jac[0][1] * jac[2][2]) / det,
                        (jac[0][1] * jac[1][2] - jac[0][2] * jac[1][1]) / det,
                    ],
                    [
                        (jac[1][2] * jac[2][0] - jac[1][0] * jac[2][2]) / det,
                        (jac[0][0] * jac[2][2] - jac[0][2] * jac[2][0]) / det,
                        (jac[0][2] * jac[1][0] - jac[0][0] * jac[1][2]) / det,
                    ],
                    [
                        (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0]) / det,
                        (jac[0][1] * jac[2][0] - jac[0][0] * jac[2][1]) / det,
                        (jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0]) / det,
                    ],
                ];
                let mut grad = [[0.0f64; 8]; 3]; // physical gradients nx, ny, nz
                for a in 0..8 {
                    for r in 0..3 {
                        grad[r][a] = inv[r][0] * dn[0][a] + inv[r][1] * dn[1][a] + inv[r][2] * dn[2][a];
                    }
                }
                accumulate_btdb_3d(&mut k, &grad, d, det);
            }
        }
    }
    k
}

/// Accumulate `k += B^T D B * scale` for a 3D element from physical shape
/// gradients. Voigt strain order: xx, yy, zz, yz, xz, xy.
fn accumulate_btdb_3d(k: &mut DMatrix<f64>, grad: &[[f64; 8]; 3], d: &[[f64; 6]; 6], scale: f64) {
    let mut b = [[0.0f64; 24]; 6];
    for a in 0..8 {
        let (nx, ny, nz) = (grad[0][a], grad[1][a], grad[2][a]);
        b[0][3 * a] = nx;
        b[1][3 * a + 1] = ny;
        b[2][3 * a + 2] = nz;
        b[3][3 * a + 1] = nz;
        b[3][3 * a + 2] = ny;
        b[4][3 * a] = nz;
        b[4][3 * a + 2] = nx;
        b[5][3 * a] = ny;
        b[5][3 * a + 1] = nx;
    }
    let mut db = [[0.0f64; 24]; 6];
    for r in 0..6 {
        for c in 0..24 {
            let mut sum = 0.0;
            for s in 0..6 {
                sum += d[r][s] * b[s][c];
            }
            db[r][c] = sum;
        }
    }
    for i in 0..24 {
        for j in 0..24 {
            let mut sum = 0.0;
            for r in 0..6 {
                sum += b[r][i] * db[r][j];
            }
            k[(i, j)] += sum * scale;
        }
    }
}

/// Hex8 stiffness of an axis-aligned `hx` x `hy` x `hz` box from the
/// analytically integrated reference-cell polynomials, e.g.
///
/// ```text
/// ∫ N_i,ξ N_j,ξ = (ξ_i ξ_j / 8)(1 + η_i η_j / 3)(1 + ζ_i ζ_j / 3)
/// ∫ N_i,ξ N_j,η = (ξ_i η_j / 8)(1 + ζ_i ζ_j / 3)
/// ```
///
/// combined with the isotropic Lame constants.
pub fn hex8_k0_closed(hx: f64, hy: f64, hz: f64, nu: f64) -> DMatrix<f64> {
    let lambda = nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = 1.0 / (2.0 * (1.0 + nu));
    let lp2m = lambda + 2.0 * mu;

    // Physical scale factors in front of each reference integral.
    let sxx = hy * hz / (2.0 * hx);
    let syy = hx * hz / (2.0 * hy);
    let szz = hx * hy / (2.0 * hz);
    let sxy = hz / 2.0;
    let sxz = hy / 2.0;
    let syz = hx / 2.0;

    let mut k = DMatrix::zeros(24, 24);
    for i in 0..8 {
        for j in 0..8 {
            let rxx = HXI[i] * HXI[j] / 8.0
                * (1.0 + HETA[i] * HETA[j] / 3.0)
                * (1.0 + HZETA[i] * HZETA[j] / 3.0);
            let ryy = HETA[i] * HETA[j] / 8.0
                * (1.0 + HXI[i] * HXI[j] / 3.0)
                * (1.0 + HZETA[i] * HZETA[j] / 3.0);
            let rzz = HZETA[i] * HZETA[j] / 8.0
                * (1.0 + HXI[i] * HXI[j] / 3.0)
                * (1.0 + HETA[i] * HETA[j] / 3.0);
            let rxy = HXI[i] * HETA[j] / 8.0 * (1.0 + HZETA[i] * HZETA[j] / 3.0);
            let ryx = HETA[i] * HXI[j] / 8.0 * (1.0 + HZETA[i] * HZETA[j] / 3.0);
            let rxz = HXI[i] * HZETA[j] / 8.0 * (1.0 + HETA[i] * HETA[j] / 3.0);
            let rzx = HZETA[i] * HXI[j] / 8.0 * (1.0 + HETA[i] * HETA[j] / 3.0);
            let ryz = HETA[i] * HZETA[j] / 8.0 * (1.0 + HXI[i] * HXI[j] / 3.0);
            let rzy = HZETA[i] * HETA[j] / 8.0 * (1.0 + HXI[i] * HXI[j] / 3.0);

            k[(3 * i, 3 * j)] = lp2m * sxx * rxx + mu * (syy * ryy + szz * rzz);
            k[(3 * i + 1, 3 * j + 1)] = lp2m * syy * ryy + mu * (sxx * rxx + szz * rzz);
            k[(3 * i + 2, 3 * j + 2)] = lp2m * szz * rzz + mu * (sxx * rxx + syy * ryy);
            k[(3 * i, 3 * j + 1)] = lambda * sxy * rxy + mu * sxy * ryx;
            k[(3 * i + 1, 3 * j)] = lambda * sxy * ryx + mu * sxy * rxy;
            k[(3 * i, 3 * j + 2)] = lambda * sxz * rxz + mu * sxz * rzx;
            k[(3 * i + 2, 3 * j)] = lambda * sxz * rzx + mu * sxz * rxz;
            k[(3 * i + 1, 3 * j + 2)] = lambda * syz * ryz + mu * syz * rzy;
            k[(3 * i + 2, 3 * j + 1)] = lambda * syz * rzy + mu * syz * ryz;
        }
    }
    k
}

/// Per-mesh collection of unit stiffness matrices: a single shared matrix
/// for the congruent elements of uniform grids, one matrix per element for
/// triangulations.
#[derive(Debug, Clone)]
pub enum K0Set {
    Shared(DMatrix<f64>),
    PerElement(Vec<DMatrix<f64>>),
}

impl K0Set {
    pub fn compute(mesh: &Mesh, mat: &SimpMaterial, path: K0Path) -> Result<K0Set> {
        check_model(mesh.element_type, mat)?;
        match mesh.element_type {
            ElementType::Quad4 | ElementType::Hex8 => {
                let es = grid_stiffness(mesh.element_type, mat, &mesh.spacing, path)?;
                Ok(K0Set::Shared(es.k0))
            }
            ElementType::Tri3 => {
                let d = d_plane_stress(mat.nu);
                let mut all = Vec::with_capacity(mesh.n_elements());
                for e in 0..mesh.n_elements() {
                    all.push(tri3_k0_for_element(mesh, e, &d, mat.nu, path));
                }
                Ok(K0Set::PerElement(all))
            }
        }
    }

    #[inline]
    pub fn k0(&self, e: usize) -> &DMatrix<f64> {
        match self {
            K0Set::Shared(k) => k,
            K0Set::PerElement(v) => &v[e],
        }
    }
}

pub(crate) fn tri3_vertices(mesh: &Mesh, e: usize) -> [[f64; 2]; 3] {
    let conn = mesh.element(e);
    let mut xy = [[0.0; 2]; 3];
    for (a, &n) in conn.iter().enumerate() {
        let p = mesh.node(n as usize);
        xy[a] = [p[0], p[1]];
    }
    xy
}

fn tri3_k0_for_element(
    mesh: &Mesh,
    e: usize,
    d: &[[f64; 3]; 3],
    nu: f64,
    path: K0Path,
) -> DMatrix<f64> {
    let xy = tri3_vertices(mesh, e);
    match path {
        K0Path::Quadrature => tri3_k0_quadrature(&xy, d),
        K0Path::ClosedForm => tri3_k0_closed(&xy, nu),
    }
}
