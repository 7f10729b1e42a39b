//! The outer optimization loop.
//!
//! Each iteration maps the design field to physical densities through the
//! active filter, assembles and solves the equilibrium equations, evaluates
//! compliance and its sensitivities, pulls the gradients back to design
//! space, and lets the chosen update rule propose the next design. The loop
//! stops when the largest design change drops below the tolerance or the
//! iteration budget runs out. With the projection filter the steepness
//! `beta` doubles every `continuation_interval` iterations (or as soon as
//! the step stalls), and each increase restarts the convergence test so the
//! run cannot stop on a design the sharper projection would still change.

use std::time::Instant;

use crate::error::{Result, TopoError};
use crate::fem::assembly::{apply_dirichlet, assemble_load, Assembler, AssemblyMethod};
use crate::fem::element::{K0Path, K0Set};
use crate::fem::solve::{solve, solve_cg_from, SolveMethod};
use crate::filters::{FilterKind, FilterOperator};
use crate::material::SimpMaterial;
use crate::mesh::{build_dof_map, element_geometry, Mesh};
use crate::optimize::mma::{MmaOptions, MmaState};
use crate::optimize::objective::{
    compliance, compliance_sensitivity, volume_fraction, volume_sensitivity,
};
use crate::optimize::oc::{oc_update, OcOptions};
use crate::problems::ProblemDefinition;

/// Which update rule drives the outer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Oc,
    Mma,
}

impl OptimizerKind {
    pub fn parse(s: &str) -> Result<OptimizerKind> {
        match s {
            "oc" => Ok(OptimizerKind::Oc),
            "mma" => Ok(OptimizerKind::Mma),
            other => Err(TopoError::InvalidArgument(format!(
                "unknown optimizer '{other}' (expected oc or mma)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Oc => "oc",
            OptimizerKind::Mma => "mma",
        }
    }
}

/// Everything the loop needs besides mesh, problem, material, and filter.
#[derive(Debug, Clone)]
pub struct DriverSettings {
    /// Volume-fraction upper bound.
    pub target_vf: f64,
    pub optimizer: OptimizerKind,
    pub max_iterations: usize,
    /// Stop when the infinity norm of the design change drops below this.
    pub tolerance: f64,
    pub assembly: AssemblyMethod,
    pub solver: SolveMethod,
    /// Uniform starting density; defaults to the volume-fraction target.
    pub initial_density: Option<f64>,
    /// Iterations between forced projection-steepness increases.
    pub continuation_interval: usize,
    pub oc: OcOptions,
    pub mma: MmaOptions,
}

impl DriverSettings {
    pub fn new(target_vf: f64) -> DriverSettings {
        DriverSettings {
            target_vf,
            optimizer: OptimizerKind::Oc,
            max_iterations: 200,
            tolerance: 0.01,
            assembly: AssemblyMethod::Fast,
            solver: SolveMethod::Cg,
            initial_density: None,
            continuation_interval: 50,
            oc: OcOptions::default(),
            mma: MmaOptions::default(),
        }
    }
}

/// One row of the convergence history.
#[derive(Debug, Clone, Copy)]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Compliance of the design analyzed this iteration.
    pub compliance: f64,
    /// Volume fraction of the physical densities analyzed this iteration.
    pub volume_fraction: f64,
    /// Infinity norm of the design update this iteration produced.
    pub change: f64,
    /// Wall-clock seconds since the start of the run.
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    /// Final design densities (after the last update).
    pub design: Vec<f64>,
    /// Physical densities of the final design.
    pub physical: Vec<f64>,
    /// Compliance of the last analyzed design.
    pub compliance: f64,
    /// Volume fraction of the final physical densities.
    pub volume_fraction: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

/// Called after each iteration with the record and the physical densities
/// that were analyzed.
pub type Observer<'a> = &'a mut dyn FnMut(&IterationRecord, &[f64]);

pub fn run_optimization(
    mesh: &Mesh,
    problem: &ProblemDefinition,
    material: &SimpMaterial,
    filter: &mut FilterOperator,
    settings: &DriverSettings,
    mut observer: Option<Observer<'_>>,
) -> Result<OptimizationResult> {
    if !(settings.target_vf > 0.0 && settings.target_vf < 1.0) {
        return Err(TopoError::InvalidArgument(format!(
            "volume fraction target must lie in (0, 1), got {}",
            settings.target_vf
        )));
    }
    if settings.max_iterations == 0 {
        return Err(TopoError::InvalidArgument(
            "iteration budget must be at least 1".into(),
        ));
    }
    if !(settings.tolerance >= 0.0) {
        return Err(TopoError::InvalidArgument(format!(
            "tolerance must be nonnegative, got {}",
            settings.tolerance
        )));
    }
    let x0 = settings.initial_density.unwrap_or(settings.target_vf);
    if !(0.0..=1.0).contains(&x0) {
        return Err(TopoError::InvalidArgument(format!(
            "initial density must lie in [0, 1], got {x0}"
        )));
    }
    problem.check_box(mesh)?;
    let n = mesh.n_elements();
    if filter.n_elements() != n {
        return Err(TopoError::InvalidArgument(
            "filter was built for a different mesh".into(),
        ));
    }

    // Everything that does not depend on the densities is computed once.
    let dofs = build_dof_map(mesh);
    let f = assemble_load(problem, mesh, &dofs)?;
    let fixed = problem.fixed_dofs(mesh)?;
    let mut assembler = Assembler::new(mesh, &dofs, settings.assembly);
    let k0 = K0Set::compute(mesh, material, K0Path::Quadrature)?;
    let geometry = element_geometry(mesh);
    let dg_physical = volume_sensitivity(&geometry.volumes);

    let mut design = vec![x0; n];
    let mut mma_state = match settings.optimizer {
        OptimizerKind::Mma => Some(MmaState::new(n, 1, settings.mma)?),
        OptimizerKind::Oc => None,
    };
    let bounds = (vec![0.0; n], vec![1.0; n]);

    let start = Instant::now();
    let mut history: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    let mut since_bump = 0usize;
    // The displacement field changes little between design updates, so the
    // previous solution warm-starts the iterative solver.
    let mut warm: Vec<f64> = Vec::new();

    for it in 1..=settings.max_iterations {
        let (new_design, physical, c, vf) = (|| -> Result<(Vec<f64>, Vec<f64>, f64, f64)> {
            let physical = filter.physical(&design)?;
            let k = assembler.assemble(mesh, material, &physical)?;
            let system = apply_dirichlet(k, f.clone(), fixed.clone())?;
            let u = match settings.solver {
                SolveMethod::Cg => {
                    let guess = (warm.len() == system.f.len()).then_some(warm.as_slice());
                    let (u, _stats) = solve_cg_from(&system, guess)?;
                    u
                }
                SolveMethod::Direct => solve(&system, settings.solver)?,
            };
            warm.clone_from(&u);
            let c = compliance(&system.f, &u);
            let vf = volume_fraction(&geometry.volumes, &physical);

            let dc_physical = compliance_sensitivity(&dofs, &k0, material, &physical, &u)?;
            let dc = filter.objective_gradient(&design, &dc_physical)?;
            let dg = filter.constraint_gradient(&design, &dg_physical)?;

            let new_design = match settings.optimizer {
                OptimizerKind::Oc => {
                    let mut physical_vf = |candidate: &[f64]| -> Result<f64> {
                        let p = filter.physical(candidate)?;
                        Ok(volume_fraction(&geometry.volumes, &p))
                    };
                    oc_update(
                        &design,
                        &dc,
                        &dg,
                        settings.target_vf,
                        &mut physical_vf,
                        &settings.oc,
                    )?
                    .rho
                }
                OptimizerKind::Mma => {
                    let state = mma_state.as_mut().expect("state built above");
                    state
                        .update(
                            &design,
                            &bounds.0,
                            &bounds.1,
                            &dc,
                            &[vf - settings.target_vf],
                            &dg,
                        )?
                        .x
                }
            };
            Ok((new_design, physical, c, vf))
        })()
        .map_err(|e| e.at_iteration(it))?;

        let change = new_design
            .iter()
            .zip(&design)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        design = new_design;

        let record = IterationRecord {
            iteration: it,
            compliance: c,
            volume_fraction: vf,
            change,
            seconds: start.elapsed().as_secs_f64(),
        };
        history.push(record);
        if let Some(obs) = observer.as_deref_mut() {
            obs(&record, &physical);
        }

        since_bump += 1;
        if filter.kind() == FilterKind::Heaviside
            && (since_bump >= settings.continuation_interval || change <= settings.tolerance)
            && filter.raise_beta()
        {
            // The sharper projection invalidates the stall test: keep going.
            since_bump = 0;
            continue;
        }
        if change <= settings.tolerance {
            converged = true;
            break;
        }
    }

    let physical = filter.physical(&design)?;
    let volume_fraction = volume_fraction(&geometry.volumes, &physical);
    let last = history.last().expect("at least one iteration ran");
    Ok(OptimizationResult {
        compliance: last.compliance,
        volume_fraction,
        iterations: history.len(),
        converged,
        design,
        physical,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_grid;
    use crate::problems::cantilever_2d;

    fn small_setup(
        nx: usize,
        ny: usize,
        kind: FilterKind,
        rmin: f64,
    ) -> (Mesh, ProblemDefinition, SimpMaterial, FilterOperator) {
        let bbox = [0.0, nx as f64, 0.0, ny as f64];
        let mesh = build_uniform_grid(2, &[nx, ny], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let problem = cantilever_2d(&bbox, -1.0).unwrap();
        let material = SimpMaterial::default_for_dim(2);
        let filter = FilterOperator::build(&mesh, kind, rmin).unwrap();
        (mesh, problem, material, filter)
    }

    #[test]
    fn oc_run_tracks_the_volume_target_and_reduces_compliance() {
        let (mesh, problem, material, mut filter) =
            small_setup(16, 10, FilterKind::Sensitivity, 1.8);
        let mut settings = DriverSettings::new(0.4);
        settings.max_iterations = 40;
        settings.solver = SolveMethod::Direct;
        let result =
            run_optimization(&mesh, &problem, &material, &mut filter, &settings, None).unwrap();

        assert!(!result.history.is_empty());
        for record in &result.history {
            assert!(record.compliance.is_finite() && record.compliance > 0.0);
            if record.iteration > 10 {
                assert!(
                    (record.volume_fraction - 0.4).abs() <= 0.01,
                    "iteration {}: vf = {}",
                    record.iteration,
                    record.volume_fraction
                );
            }
        }
        assert!((result.volume_fraction - 0.4).abs() <= 0.01);
        // The optimized design must beat the uniform starting field.
        let first = result.history.first().unwrap().compliance;
        assert!(result.compliance < first);
        // Records carry monotone timestamps and 1-based iteration numbers.
        for (i, r) in result.history.iter().enumerate() {
            assert_eq!(r.iteration, i + 1);
            if i > 0 {
                assert!(r.seconds >= result.history[i - 1].seconds);
            }
        }
    }

    #[test]
    fn mma_and_oc_land_on_comparable_designs() {
        let (mesh, problem, material, mut filter) =
            small_setup(12, 8, FilterKind::Sensitivity, 1.6);
        let mut settings = DriverSettings::new(0.5);
        settings.max_iterations = 60;
        settings.solver = SolveMethod::Direct;
        let oc =
            run_optimization(&mesh, &problem, &material, &mut filter, &settings, None).unwrap();

        settings.optimizer = OptimizerKind::Mma;
        let mut filter2 = FilterOperator::build(&mesh, FilterKind::Sensitivity, 1.6).unwrap();
        let mma =
            run_optimization(&mesh, &problem, &material, &mut filter2, &settings, None).unwrap();

        assert!((mma.volume_fraction - 0.5).abs() <= 0.02);
        let rel = (mma.compliance - oc.compliance).abs() / oc.compliance;
        assert!(rel < 0.15, "oc = {}, mma = {}", oc.compliance, mma.compliance);
    }

    #[test]
    fn projection_continuation_restarts_the_convergence_test() {
        let (mesh, problem, material, mut filter) =
            small_setup(10, 6, FilterKind::Heaviside, 1.5);
        let mut settings = DriverSettings::new(0.5);
        settings.solver = SolveMethod::Direct;
        // An enormous tolerance stalls every step; without the restart rule
        // the run would stop after one iteration at beta = 1.
        settings.tolerance = 1.0;
        settings.max_iterations = 50;
        let result =
            run_optimization(&mesh, &problem, &material, &mut filter, &settings, None).unwrap();
        // Nine doublings reach the cap, then the tenth iteration converges.
        assert_eq!(result.iterations, 10);
        assert!(result.converged);
        assert_eq!(filter.beta(), 512.0);
    }

    #[test]
    fn observer_sees_every_analyzed_field() {
        let (mesh, problem, material, mut filter) = small_setup(8, 5, FilterKind::None, 0.0);
        let mut settings = DriverSettings::new(0.45);
        settings.max_iterations = 7;
        settings.tolerance = 0.0;
        settings.solver = SolveMethod::Direct;
        let mut calls = 0usize;
        let mut observer = |record: &IterationRecord, physical: &[f64]| {
            calls += 1;
            assert_eq!(record.iteration, calls);
            assert_eq!(physical.len(), mesh.n_elements());
        };
        let result = run_optimization(
            &mesh,
            &problem,
            &material,
            &mut filter,
            &settings,
            Some(&mut observer),
        )
        .unwrap();
        assert_eq!(calls, 7);
        assert_eq!(result.iterations, 7);
        assert!(!result.converged);
    }

    #[test]
    fn bad_settings_are_rejected_up_front() {
        let (mesh, problem, material, mut filter) = small_setup(4, 3, FilterKind::None, 0.0);
        for bad_vf in [0.0, 1.0, -0.2, f64::NAN] {
            let settings = DriverSettings::new(bad_vf);
            assert!(run_optimization(
                &mesh,
                &problem,
                &material,
                &mut filter,
                &settings,
                None
            )
            .is_err());
        }
        let mut settings = DriverSettings::new(0.5);
        settings.initial_density = Some(1.5);
        assert!(
            run_optimization(&mesh, &problem, &material, &mut filter, &settings, None).is_err()
        );
    }
}
