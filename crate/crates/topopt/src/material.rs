//! Penalized density-to-stiffness interpolation and elasticity matrices.
//!
//! The elastic modulus of an element with density `rho` in [0, 1] is
//!
//! ```text
//! E(rho) = E_min + rho^p * (E_0 - E_min)
//! ```
//!
//! with a small positive floor `E_min` that keeps the assembled stiffness
//! matrix nonsingular when densities reach zero. The derivative used by the
//! compliance sensitivities is `p * rho^(p-1) * (E_0 - E_min)`.

use crate::error::{Result, TopoError};
use nalgebra::DMatrix;

/// Stress assumption selecting the elasticity matrix shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StressModel {
    /// 2D plane stress (3x3 matrix in Voigt order xx, yy, xy).
    PlaneStress,
    /// 3D isotropic solid (6x6 matrix in Voigt order xx, yy, zz, yz, xz, xy).
    Solid3d,
}

/// Material description shared by every element of a model.
#[derive(Debug, Clone, Copy)]
pub struct SimpMaterial {
    /// Solid modulus `E_0`.
    pub e0: f64,
    /// Void floor `E_min` (default `1e-9 * e0`).
    pub e_min: f64,
    /// Penalization exponent `p >= 1`.
    pub penal: f64,
    /// Poisson ratio in [0, 0.5).
    pub nu: f64,
    pub model: StressModel,
}

impl SimpMaterial {
    pub fn new(e0: f64, e_min: f64, penal: f64, nu: f64, model: StressModel) -> Result<Self> {
        if !(e0 > 0.0) || !e0.is_finite() {
            return Err(TopoError::InvalidArgument(format!(
                "solid modulus must be positive, got {e0}"
            )));
        }
        if !(e_min > 0.0) || e_min >= e0 {
            return Err(TopoError::InvalidArgument(format!(
                "void modulus must satisfy 0 < e_min < e0, got {e_min}"
            )));
        }
        if !(penal >= 1.0) || !penal.is_finite() {
            return Err(TopoError::InvalidArgument(format!(
                "penalization exponent must be >= 1, got {penal}"
            )));
        }
        if !(0.0..0.5).contains(&nu) {
            return Err(TopoError::InvalidArgument(format!(
                "Poisson ratio must lie in [0, 0.5), got {nu}"
            )));
        }
        Ok(SimpMaterial {
            e0,
            e_min,
            penal,
            nu,
            model,
        })
    }

    /// Unit-modulus default: `E_0 = 1`, `E_min = 1e-9`, `p = 3`, `nu = 0.3`.
    pub fn default_for_dim(dim: usize) -> Self {
        let model = if dim == 3 {
            StressModel::Solid3d
        } else {
            StressModel::PlaneStress
        };
        SimpMaterial {
            e0: 1.0,
            e_min: 1e-9,
            penal: 3.0,
            nu: 0.3,
            model,
        }
    }

    /// Same material with a different penalization exponent.
    pub fn with_penal(mut self, penal: f64) -> Result<Self> {
        if !(penal >= 1.0) || !penal.is_finite() {
            return Err(TopoError::InvalidArgument(format!(
                "penalization exponent must be >= 1, got {penal}"
            )));
        }
        self.penal = penal;
        Ok(self)
    }

    /// Interpolated modulus `E(rho)`. Fails if `rho` is outside [0, 1].
    pub fn modulus(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        Ok(self.modulus_unchecked(rho))
    }

    /// Derivative `dE/drho`. Fails if `rho` is outside [0, 1].
    pub fn modulus_derivative(&self, rho: f64) -> Result<f64> {
        check_density(rho)?;
        Ok(self.modulus_derivative_unchecked(rho))
    }

    #[inline]
    pub(crate) fn modulus_unchecked(&self, rho: f64) -> f64 {
        self.e_min + rho.powf(self.penal) * (self.e0 - self.e_min)
    }

    #[inline]
    pub(crate) fn modulus_derivative_unchecked(&self, rho: f64) -> f64 {
        self.penal * rho.powf(self.penal - 1.0) * (self.e0 - self.e_min)
    }

    /// Vector form of [`SimpMaterial::modulus`]; validates every entry first.
    pub fn moduli(&self, rho: &[f64]) -> Result<Vec<f64>> {
        check_densities(rho)?;
        Ok(rho.iter().map(|&r| self.modulus_unchecked(r)).collect())
    }

    /// Unit-modulus elasticity matrix for the configured stress model.
    pub fn elasticity_matrix(&self) -> DMatrix<f64> {
        match self.model {
            StressModel::PlaneStress => {
                let d = d_plane_stress(self.nu);
                DMatrix::from_fn(3, 3, |i, j| d[i][j])
            }
            StressModel::Solid3d => {
                let d = d_solid(self.nu);
                DMatrix::from_fn(6, 6, |i, j| d[i][j])
            }
        }
    }
}

/// Plane-stress elasticity matrix for `E = 1` (Voigt order xx, yy, xy).
pub(crate) fn d_plane_stress(nu: f64) -> [[f64; 3]; 3] {
    let f = 1.0 / (1.0 - nu * nu);
    [
        [f, f * nu, 0.0],
        [f * nu, f, 0.0],
        [0.0, 0.0, f * (1.0 - nu) / 2.0],
    ]
}

/// Isotropic 3D elasticity matrix for `E = 1` from the Lame constants
/// (Voigt order xx, yy, zz, yz, xz, xy).
pub(crate) fn d_solid(nu: f64) -> [[f64; 6]; 6] {
    let lambda = nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = 1.0 / (2.0 * (1.0 + nu));
    let mut d = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            d[i][j] = lambda;
        }
        d[i][i] = lambda + 2.0 * mu;
        d[i + 3][i + 3] = mu;
    }
    d
}

pub(crate) fn check_density(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) || !rho.is_finite() {
        return Err(TopoError::Domain(format!(
            "density {rho} outside the admissible interval [0, 1]"
        )));
    }
    Ok(())
}

pub(crate) fn check_densities(rho: &[f64]) -> Result<()> {
    for (e, &r) in rho.iter().enumerate() {
        if !(0.0..=1.0).contains(&r) || !r.is_finite() {
            return Err(TopoError::Domain(format!(
                "density {r} of element {e} outside the admissible interval [0, 1]"
            )));
        }
    }
    Ok(())
}
