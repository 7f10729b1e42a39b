//! Independent correctness oracles.
//!
//! Everything in this module recomputes a quantity the production code
//! already provides, but by a deliberately different route: compliance
//! gradients by finite differences instead of the adjoint identity, filter
//! weights by an all-pairs scan instead of spatial hashing, and the
//! optimality-criteria multiplier by a dense logarithmic sweep instead of
//! bisection. The `gradcheck` command and several test suites compare the
//! two routes against each other.

use crate::error::{Result, TopoError};
use crate::fem::assembly::{apply_dirichlet, assemble_load, Assembler, AssemblyMethod};
use crate::fem::element::{K0Path, K0Set};
use crate::fem::solve::{solve, SolveMethod};
use crate::fem::sparse::CsrMatrix;
use crate::filters::{filter_weight, FilterKind, FilterOperator};
use crate::material::SimpMaterial;
use crate::mesh::{build_dof_map, element_geometry, Mesh};
use crate::optimize::objective::compliance_sensitivity;
use crate::optimize::oc::OcOptions;
use crate::optimize::compliance;
use crate::problems::ProblemDefinition;

/// Step used by the `gradcheck` command unless overridden.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Finite-difference gradient of `f` at `x`, with every probe point kept
/// inside the box [0, 1]: central differences in the interior, one-sided
/// at the bounds.
pub fn fd_gradient(
    f: &mut dyn FnMut(&[f64]) -> Result<f64>,
    x: &[f64],
    h: f64,
) -> Result<Vec<f64>> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(TopoError::InvalidArgument(format!(
            "finite-difference step must be positive and finite, got {h}"
        )));
    }
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for e in 0..x.len() {
        let hi = (x[e] + h).min(1.0);
        let lo = (x[e] - h).max(0.0);
        probe[e] = hi;
        let f_hi = f(&probe)?;
        probe[e] = lo;
        let f_lo = f(&probe)?;
        probe[e] = x[e];
        grad[e] = (f_hi - f_lo) / (hi - lo);
    }
    Ok(grad)
}

/// All-pairs construction of the filter weight matrix, `O(n^2)`. The
/// production operator builds the same matrix with a spatial hash; the two
/// must agree entry for entry.
pub fn brute_force_filter_weights(mesh: &Mesh, rmin: f64) -> CsrMatrix {
    let geometry = element_geometry(mesh);
    let dim = mesh.dim;
    let n = mesh.n_elements();
    let c = |e: usize| &geometry.centroids[e * dim..(e + 1) * dim];
    let rows: Vec<Vec<(u32, f64)>> = (0..n)
        .map(|i| {
            (0..n)
                .filter_map(|j| {
                    let w = filter_weight(rmin, c(i), c(j));
                    (w > 0.0).then_some((j as u32, w))
                })
                .collect()
        })
        .collect();
    CsrMatrix::from_rows(n, rows)
}

/// Inputs for [`check_sensitivity_chain`].
pub struct GradCheckConfig<'a> {
    pub mesh: &'a Mesh,
    pub problem: &'a ProblemDefinition,
    pub material: &'a SimpMaterial,
    pub filter_kind: FilterKind,
    /// Filter radius; ignored when the filter is `None`.
    pub rmin: f64,
    /// Projection steepness to test at (Heaviside filter only).
    pub projection_beta: f64,
    /// Finite-difference step.
    pub h: f64,
    /// Fault-injection hook: the analytic gradient is multiplied by this
    /// before the comparison. 1.0 checks the real code; anything else must
    /// make the check fail, which proves the comparison has teeth.
    pub corrupt_scale: f64,
}

/// Outcome of a gradient cross-check.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    /// Largest relative disagreement over all checked elements.
    pub max_rel_err: f64,
    /// Element where it occurred.
    pub worst_element: usize,
    /// Step that was used.
    pub h: f64,
    /// Number of elements checked.
    pub n_checked: usize,
}

/// Compare the adjoint compliance gradient, pulled back through the active
/// filter, against finite differences of the full
/// design-to-compliance map on a deterministic non-uniform density field.
pub fn check_sensitivity_chain(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    if cfg.filter_kind == FilterKind::Sensitivity {
        return Err(TopoError::InvalidArgument(
            "gradcheck needs a filter that transforms densities (none, density, \
             or heaviside); sensitivity smoothing modifies the gradient itself \
             and is not the derivative of any objective"
            .into(),
        ));
    }
    let mesh = cfg.mesh;
    cfg.problem.check_box(mesh)?;
    let n = mesh.n_elements();

    let mut filter = FilterOperator::build(mesh, cfg.filter_kind, cfg.rmin)?;
    if cfg.filter_kind == FilterKind::Heaviside {
        filter.set_projection(cfg.projection_beta, cfg.projection_beta)?;
    }
    let dofs = build_dof_map(mesh);
    let load = assemble_load(cfg.problem, mesh, &dofs)?;
    let fixed = cfg.problem.fixed_dofs(mesh)?;
    let mut assembler = Assembler::new(mesh, &dofs, AssemblyMethod::Fast);
    let k0 = K0Set::compute(mesh, cfg.material, K0Path::Quadrature)?;

    // A deterministic, spatially rough field well inside (0, 1): uniform
    // fields hide errors behind symmetry, and interior points keep the
    // differences central.
    let mut state = 0x9E37_79B9_7F4A_7C15u64;
    let design: Vec<f64> = (0..n)
        .map(|_| {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            0.25 + 0.5 * (state >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect();

    // Adjoint route.
    let physical = filter.physical(&design)?;
    let k = assembler.assemble(mesh, cfg.material, &physical)?;
    let system = apply_dirichlet(k, load.clone(), fixed.clone())?;
    let u = solve(&system, SolveMethod::Direct)?;
    let dc_physical = compliance_sensitivity(&dofs, &k0, cfg.material, &physical, &u)?;
    let mut analytic = filter.objective_gradient(&design, &dc_physical)?;
    for g in &mut analytic {
        *g *= cfg.corrupt_scale;
    }

    // Finite-difference route through the entire pipeline.
    let mut objective = |rho: &[f64]| -> Result<f64> {
        let physical = filter.physical(rho)?;
        let k = assembler.assemble(mesh, cfg.material, &physical)?;
        let system = apply_dirichlet(k, load.clone(), fixed.clone())?;
        let u = solve(&system, SolveMethod::Direct)?;
        Ok(compliance(&system.f, &u))
    };
    let fd = fd_gradient(&mut objective, &design, cfg.h)?;

    let gmax = analytic
        .iter()
        .chain(&fd)
        .fold(0.0f64, |m, &v| m.max(v.abs()));
    let floor = (1e-12 * gmax).max(f64::MIN_POSITIVE);
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst_element: 0,
        h: cfg.h,
        n_checked: n,
    };
    for e in 0..n {
        let denom = analytic[e].abs().max(fd[e].abs()).max(floor);
        let rel = (analytic[e] - fd[e]).abs() / denom;
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_element = e;
        }
    }
    Ok(report)
}

/// Locate the optimality-criteria multiplier by a dense logarithmic sweep
/// followed by interval refinement — an independent check of the bisection
/// in the production update. Returns the multiplier on the raw sensitivity
/// scale.
pub fn oc_lambda_sweep(
    rho: &[f64],
    dc: &[f64],
    dg: &[f64],
    target_vf: f64,
    physical_vf: &mut dyn FnMut(&[f64]) -> Result<f64>,
    opts: &OcOptions,
) -> Result<f64> {
    let n = rho.len();
    if dc.len() != n || dg.len() != n || n == 0 {
        return Err(TopoError::InvalidArgument(
            "multiplier sweep needs equal-length, nonempty inputs".into(),
        ));
    }
    let mut candidate = vec![0.0; n];
    let mut vf_at = |lambda: f64, candidate: &mut Vec<f64>| -> Result<f64> {
        for e in 0..n {
            let ratio = (-dc[e] / (lambda * dg[e])).max(0.0);
            candidate[e] = (rho[e] * ratio.powf(opts.eta))
                .clamp(rho[e] - opts.move_limit, rho[e] + opts.move_limit)
                .clamp(0.0, 1.0);
        }
        physical_vf(candidate)
    };

    // The candidate volume is nonincreasing in lambda; scan a wide
    // logarithmic grid for the crossing.
    let scale = dc.iter().map(|d| d.abs()).sum::<f64>() / n as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(TopoError::InvalidArgument(
            "sensitivities must be finite and not all zero".into(),
        ));
    }
    let (exp_lo, exp_hi) = (-12.0, 12.0);
    let steps = 240;
    let mut prev = scale * 10f64.powf(exp_lo);
    if vf_at(prev, &mut candidate)? < target_vf {
        return Err(TopoError::Optimizer(
            "volume target exceeds what the move limits allow".into(),
        ));
    }
    let mut bracket = None;
    for s in 1..=steps {
        let lambda = scale * 10f64.powf(exp_lo + (exp_hi - exp_lo) * s as f64 / steps as f64);
        if vf_at(lambda, &mut candidate)? < target_vf {
            bracket = Some((prev, lambda));
            break;
        }
        prev = lambda;
    }
    let (mut lo, mut hi) = bracket.ok_or_else(|| {
        TopoError::Optimizer("volume target not bracketed by the multiplier sweep".into())
    })?;
    // Refine on the exponent; 60 halvings are far below f64 resolution.
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if vf_at(mid, &mut candidate)? > target_vf {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo * hi).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_grid;
    use crate::optimize::oc::oc_update;
    use crate::problems::cantilever_2d;

    #[test]
    fn fd_gradient_matches_a_quadratic_exactly_in_the_interior() {
        let mut f = |x: &[f64]| Ok(x.iter().map(|v| v * v).sum::<f64>());
        let x = vec![0.5, 0.25, 0.75];
        let g = fd_gradient(&mut f, &x, 1e-6).unwrap();
        for (gi, xi) in g.iter().zip(&x) {
            assert!((gi - 2.0 * xi).abs() < 1e-9);
        }
    }

    #[test]
    fn fd_gradient_switches_to_one_sided_steps_at_the_bounds() {
        let mut f = |x: &[f64]| Ok(x.iter().map(|v| v * v).sum::<f64>());
        let x = vec![0.0, 1.0];
        let h = 1e-6;
        let g = fd_gradient(&mut f, &x, h).unwrap();
        // One-sided differences of x^2 are off by exactly h, far above the
        // rounding noise of the difference quotient itself.
        assert!((g[0] - h).abs() < 1e-9);
        assert!((g[1] - (2.0 - h)).abs() < 1e-9);
        assert!(fd_gradient(&mut f, &x, 0.0).is_err());
    }

    fn check_config<'a>(
        mesh: &'a Mesh,
        problem: &'a ProblemDefinition,
        material: &'a SimpMaterial,
        kind: FilterKind,
    ) -> GradCheckConfig<'a> {
        GradCheckConfig {
            mesh,
            problem,
            material,
            filter_kind: kind,
            rmin: 1.6,
            projection_beta: 8.0,
            h: DEFAULT_FD_STEP,
            corrupt_scale: 1.0,
        }
    }

    #[test]
    fn adjoint_gradient_survives_the_cross_check_for_every_density_filter() {
        let bbox = [0.0, 6.0, 0.0, 4.0];
        let mesh = build_uniform_grid(2, &[6, 4], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let problem = cantilever_2d(&bbox, -1.0).unwrap();
        let material = SimpMaterial::default_for_dim(2);

        for kind in [FilterKind::None, FilterKind::Density] {
            let report =
                check_sensitivity_chain(&check_config(&mesh, &problem, &material, kind)).unwrap();
            assert!(
                report.max_rel_err < 1e-5,
                "{}: {}",
                kind.name(),
                report.max_rel_err
            );
            assert_eq!(report.n_checked, 24);
        }
        let report = check_sensitivity_chain(&check_config(
            &mesh,
            &problem,
            &material,
            FilterKind::Heaviside,
        ))
        .unwrap();
        assert!(report.max_rel_err < 1e-4, "{}", report.max_rel_err);
    }

    #[test]
    fn corrupted_gradients_are_caught() {
        let bbox = [0.0, 5.0, 0.0, 3.0];
        let mesh = build_uniform_grid(2, &[5, 3], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let problem = cantilever_2d(&bbox, -1.0).unwrap();
        let material = SimpMaterial::default_for_dim(2);
        let mut cfg = check_config(&mesh, &problem, &material, FilterKind::None);
        cfg.corrupt_scale = 1.01;
        let report = check_sensitivity_chain(&cfg).unwrap();
        assert!(report.max_rel_err > 5e-3, "{}", report.max_rel_err);
    }

    #[test]
    fn sensitivity_smoothing_is_rejected_because_it_has_no_objective() {
        let bbox = [0.0, 4.0, 0.0, 3.0];
        let mesh = build_uniform_grid(2, &[4, 3], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let problem = cantilever_2d(&bbox, -1.0).unwrap();
        let material = SimpMaterial::default_for_dim(2);
        let cfg = check_config(&mesh, &problem, &material, FilterKind::Sensitivity);
        assert!(check_sensitivity_chain(&cfg).is_err());
    }

    #[test]
    fn multiplier_sweep_agrees_with_the_production_bisection() {
        let mut state = 12345u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut mean_vf = |rho: &[f64]| Ok(rho.iter().sum::<f64>() / rho.len() as f64);
        let opts = OcOptions::default();
        for &target in &[0.3, 0.5] {
            let n = 40;
            let rho: Vec<f64> = (0..n).map(|_| 0.2 + 0.6 * next()).collect();
            let dc: Vec<f64> = (0..n).map(|_| -(0.1 + 2.0 * next())).collect();
            let dg: Vec<f64> = (0..n).map(|_| 0.5 + next()).collect();
            let swept =
                oc_lambda_sweep(&rho, &dc, &dg, target, &mut mean_vf, &opts).unwrap();
            let bisected = oc_update(&rho, &dc, &dg, target, &mut mean_vf, &opts)
                .unwrap()
                .lambda;
            let rel = (swept - bisected).abs() / swept;
            assert!(rel < 1e-3, "target {target}: sweep {swept}, bisection {bisected}");
        }
    }

    #[test]
    fn sweep_reports_unreachable_targets() {
        let mut mean_vf = |rho: &[f64]| Ok(rho.iter().sum::<f64>() / rho.len() as f64);
        let opts = OcOptions::default();
        // Even lambda -> 0 cannot push the mean of [0.1, 0.1] + 0.2 to 0.9.
        let err = oc_lambda_sweep(
            &[0.1, 0.1],
            &[-1.0, -1.0],
            &[1.0, 1.0],
            0.9,
            &mut mean_vf,
            &opts,
        );
        assert!(err.is_err());
    }
}
