//! Compliance and volume responses and their density sensitivities.
//!
//! With the stiffness scaling `K = sum_e E(rho_e) k0_e` and the state
//! equation `K u = f`, the compliance `c = f . u` is self-adjoint: its
//! derivative with respect to a physical density reduces to
//! `dc/drho_e = -E'(rho_e) u_e . k0_e u_e`, needing no extra solve. The
//! volume fraction is linear, `vf = sum_e v_e rho_e / sum_e v_e`, with the
//! constant gradient `v_e / V`.

use crate::error::Result;
use crate::fem::element::K0Set;
use crate::material::SimpMaterial;
use crate::mesh::DofMap;

/// External work `f . u`, the structural compliance.
pub fn compliance(f: &[f64], u: &[f64]) -> f64 {
    f.iter().zip(u).map(|(&a, &b)| a * b).sum()
}

/// `dc/drho_e = -E'(rho_e) u_e . k0_e u_e` for every element.
pub fn compliance_sensitivity(
    dofs: &DofMap,
    k0: &K0Set,
    mat: &SimpMaterial,
    rho_physical: &[f64],
    u: &[f64],
) -> Result<Vec<f64>> {
    crate::material::check_densities(rho_physical)?;
    let n = rho_physical.len();
    let stride = dofs.stride();
    let mut ue = vec![0.0; stride];
    let mut dc = vec![0.0; n];
    for e in 0..n {
        let ke = k0.k0(e);
        for (slot, &d) in ue.iter_mut().zip(dofs.element_dofs(e)) {
            *slot = u[d as usize];
        }
        let mut quad = 0.0;
        for a in 0..stride {
            let ua = ue[a];
            if ua == 0.0 {
                continue;
            }
            let mut row = 0.0;
            for b in 0..stride {
                row += ke[(a, b)] * ue[b];
            }
            quad += ua * row;
        }
        dc[e] = -mat.modulus_derivative_unchecked(rho_physical[e]) * quad;
    }
    Ok(dc)
}

/// Volume of material divided by the volume of the design domain.
pub fn volume_fraction(volumes: &[f64], rho: &[f64]) -> f64 {
    let total: f64 = volumes.iter().sum();
    let filled: f64 = volumes.iter().zip(rho).map(|(&v, &r)| v * r).sum();
    filled / total
}

/// Gradient of [`volume_fraction`] with respect to the densities.
pub fn volume_sensitivity(volumes: &[f64]) -> Vec<f64> {
    let total: f64 = volumes.iter().sum();
    volumes.iter().map(|&v| v / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::{apply_dirichlet, assemble_load, Assembler, AssemblyMethod};
    use crate::fem::element::K0Path;
    use crate::fem::solve::{solve, SolveMethod};
    use crate::mesh::{build_dof_map, build_uniform_grid, element_geometry, Mesh};
    use crate::problems;

    fn analyze(mesh: &Mesh, rho: &[f64]) -> (f64, Vec<f64>) {
        let dofs = build_dof_map(mesh);
        let mat = SimpMaterial::default_for_dim(mesh.dim);
        let mut asm = Assembler::new(mesh, &dofs, AssemblyMethod::Symbolic);
        let k = asm.assemble(mesh, &mat, rho).unwrap();
        let (lo, hi) = mesh.bounding_box();
        let problem =
            problems::cantilever_2d(&[lo[0], hi[0], lo[1], hi[1]], -1.0).unwrap();
        let f = assemble_load(&problem, mesh, &dofs).unwrap();
        let sys = apply_dirichlet(k, f, problem.fixed_dofs(mesh).unwrap()).unwrap();
        let u = solve(&sys, SolveMethod::Direct).unwrap();
        (compliance(&sys.f, &u), u)
    }

    #[test]
    fn compliance_is_positive_and_grows_as_material_is_removed() {
        let mesh = build_uniform_grid(2, &[6, 4], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let (c_dense, _) = analyze(&mesh, &vec![1.0; 24]);
        let (c_sparse, _) = analyze(&mesh, &vec![0.3; 24]);
        assert!(c_dense > 0.0);
        assert!(c_sparse > c_dense);
    }

    #[test]
    fn sensitivities_match_central_finite_differences() {
        let mesh = build_uniform_grid(2, &[4, 3], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let dofs = build_dof_map(&mesh);
        let mat = SimpMaterial::default_for_dim(2);
        let k0 = K0Set::compute(&mesh, &mat, K0Path::Quadrature).unwrap();
        let n = mesh.n_elements();
        let rho: Vec<f64> = (0..n).map(|e| 0.3 + 0.5 * ((e * 13 + 5) % 17) as f64 / 17.0).collect();

        let (_, u) = analyze(&mesh, &rho);
        let dc = compliance_sensitivity(&dofs, &k0, &mat, &rho, &u).unwrap();

        let h = 1e-6;
        for e in [0usize, 5, n - 1] {
            let mut plus = rho.clone();
            plus[e] += h;
            let mut minus = rho.clone();
            minus[e] -= h;
            let fd = (analyze(&mesh, &plus).0 - analyze(&mesh, &minus).0) / (2.0 * h);
            let denom = fd.abs().max(1e-12);
            assert!(
                ((dc[e] - fd) / denom).abs() < 1e-5,
                "element {e}: analytic {} vs fd {fd}",
                dc[e]
            );
        }
        // Stiffening any element can only lower compliance.
        assert!(dc.iter().all(|&d| d <= 0.0));
    }

    #[test]
    fn volume_fraction_and_gradient_hand_values() {
        let mesh = build_uniform_grid(2, &[2, 1], &[2.0, 1.0], &[0.0, 0.0]).unwrap();
        let geometry = element_geometry(&mesh);
        let vf = volume_fraction(&geometry.volumes, &[1.0, 0.5]);
        assert!((vf - 0.75).abs() < 1e-15);
        let dg = volume_sensitivity(&geometry.volumes);
        assert!((dg.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((dg[0] - 0.5).abs() < 1e-15);
    }
}
