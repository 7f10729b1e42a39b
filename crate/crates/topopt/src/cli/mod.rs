//! Batch front end: parse a run configuration, drive the optimization, and
//! leave results on disk — a convergence history (`history.csv`), a
//! human-readable `summary.txt` with the full config echoed for
//! provenance, and density fields as VTK files. Two further subcommands
//! cross-check gradients against finite differences and benchmark the
//! assembly strategies.
//!
//! Exit codes: 0 success (run converged / check passed), 1 invalid
//! configuration or arguments, 2 stopped at the iteration cap (or a failed
//! gradient check), 3 solver or optimizer breakdown.

pub mod config;
pub mod vtk;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, TopoError};
use crate::fem::assembly::{Assembler, AssemblyMethod};
use crate::filters::{FilterKind, FilterOperator};
use crate::material::SimpMaterial;
use crate::mesh::{build_dof_map, build_uniform_grid, triangulate_box, Mesh};
use crate::optimize::{
    run_optimization, DriverSettings, IterationRecord, MmaOptions, OcOptions, OptimizationResult,
};
use crate::problems::{by_name, ProblemDefinition};
use crate::verify::{check_sensitivity_chain, GradCheckConfig};

pub use config::{MeshKind, RunConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_STOPPED: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;

/// Map an error to the process exit code its category calls for.
pub fn exit_code_for(err: &TopoError) -> u8 {
    match err {
        TopoError::SolverDivergence { .. } | TopoError::NotSpd(_) | TopoError::Optimizer(_) => {
            EXIT_SOLVER
        }
        TopoError::AtIteration { source, .. } => exit_code_for(source),
        _ => EXIT_CONFIG,
    }
}

/// Validate `TOPO_THREADS` and return the requested cap (`None` = unset or
/// 0, meaning "all cores"). The engine currently runs a single worker
/// thread, which satisfies any cap.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var("TOPO_THREADS") {
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(std::env::VarError::NotUnicode(_)) => Err(TopoError::Configuration(
            "TOPO_THREADS: value is not valid UTF-8".into(),
        )),
        Ok(raw) => {
            let cap: usize = raw.trim().parse().map_err(|_| {
                TopoError::Configuration(format!(
                    "TOPO_THREADS: expected a nonnegative integer, got '{raw}'"
                ))
            })?;
            Ok((cap > 0).then_some(cap))
        }
    }
}

/// Build the unit-spacing mesh for `cells` and the named benchmark problem
/// on its bounding box.
pub fn build_problem_mesh(
    problem_name: &str,
    cells: &[usize],
    kind: MeshKind,
) -> Result<(Mesh, ProblemDefinition)> {
    let dim = cells.len();
    let mut bbox = Vec::with_capacity(2 * dim);
    for &c in cells {
        bbox.push(0.0);
        bbox.push(c as f64);
    }
    let mesh = match kind {
        MeshKind::Tri => {
            if dim != 2 {
                return Err(TopoError::Configuration(
                    "mesh: tri meshes are 2D; use 2 cell counts".into(),
                ));
            }
            triangulate_box(cells[0], cells[1], &[0.0, bbox[1], 0.0, bbox[3]])?
        }
        MeshKind::Quad => build_uniform_grid(dim, cells, &vec![1.0; dim], &vec![0.0; dim])?,
    };
    let problem = by_name(problem_name, &bbox, -1.0)?;
    problem.check_box(&mesh)?;
    Ok((mesh, problem))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)
        .map_err(|e| TopoError::Io(format!("cannot write {}: {e}", path.display())))
}

/// `history.csv`: one row per iteration, LF line endings, shortest exact
/// decimal representation so identical runs produce identical bytes.
fn history_csv(history: &[IterationRecord]) -> String {
    let mut s = String::from("iter,compliance,volume_fraction,max_change,seconds\n");
    for r in history {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.iteration, r.compliance, r.volume_fraction, r.change, r.seconds
        );
    }
    s
}

fn summary_text(
    cfg: &RunConfig,
    mesh: &Mesh,
    result: &OptimizationResult,
    elapsed: f64,
    threads: Option<usize>,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "topology optimization summary");
    let _ = writeln!(s, "=============================");
    let _ = writeln!(
        s,
        "problem: {} ({} {} elements, {}D)",
        cfg.problem,
        mesh.n_elements(),
        cfg.mesh.name(),
        mesh.dim
    );
    let _ = writeln!(s, "final compliance: {:.4}", result.compliance);
    let _ = writeln!(s, "volume fraction: {:.4}", result.volume_fraction);
    let _ = writeln!(
        s,
        "iterations: {} ({})",
        result.iterations,
        if result.converged {
            "converged"
        } else {
            "stopped at iteration cap"
        }
    );
    let _ = writeln!(s, "wall time: {elapsed:.2} s");
    let _ = writeln!(
        s,
        "threads: 1{}",
        match threads {
            Some(cap) => format!(" (TOPO_THREADS cap {cap})"),
            None => String::new(),
        }
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "[config]");
    s.push_str(&cfg.echo());
    s
}

/// `run` subcommand: returns the exit code on success-with-outputs paths,
/// errors otherwise.
pub fn cmd_run(config_path: &Path, overrides: &[String]) -> Result<u8> {
    let threads = thread_cap()?;
    let text = fs::read_to_string(config_path)
        .map_err(|e| TopoError::Io(format!("cannot read {}: {e}", config_path.display())))?;
    let cfg = RunConfig::from_text(&text, overrides)?;
    run_with_config(&cfg, threads)
}

pub fn run_with_config(cfg: &RunConfig, threads: Option<usize>) -> Result<u8> {
    let (mesh, problem) = build_problem_mesh(&cfg.problem, &cfg.cells, cfg.mesh)?;
    let material = SimpMaterial::default_for_dim(mesh.dim).with_penal(cfg.penal)?;
    let mut filter = FilterOperator::build(&mesh, cfg.filter, cfg.rmin)?;
    if cfg.filter == FilterKind::Heaviside {
        filter.set_projection(cfg.beta0, cfg.beta_max)?;
    }
    let settings = DriverSettings {
        target_vf: cfg.volfrac,
        optimizer: cfg.optimizer,
        max_iterations: cfg.max_iter,
        tolerance: cfg.tol,
        assembly: cfg.assembly,
        solver: cfg.solver,
        initial_density: Some(cfg.initial_density),
        continuation_interval: cfg.continuation_iter,
        oc: OcOptions::default(),
        mma: MmaOptions::default(),
    };
    fs::create_dir_all(&cfg.output_dir).map_err(|e| {
        TopoError::Io(format!(
            "cannot create output_dir {}: {e}",
            cfg.output_dir.display()
        ))
    })?;

    println!(
        "{}: {} {} elements, filter {}, optimizer {}, solver {}",
        cfg.problem,
        mesh.n_elements(),
        cfg.mesh.name(),
        cfg.filter.name(),
        cfg.optimizer.name(),
        cfg.solver.name()
    );
    let t0 = Instant::now();
    let mut snapshots: Vec<(usize, Vec<f64>)> = Vec::new();
    let mut observer = |record: &IterationRecord, physical: &[f64]| {
        println!(
            "iter {:4}  c = {:14.6}  vf = {:.4}  change = {:.4}",
            record.iteration, record.compliance, record.volume_fraction, record.change
        );
        if cfg.snapshot_every > 0 && record.iteration % cfg.snapshot_every == 0 {
            snapshots.push((record.iteration, physical.to_vec()));
        }
    };
    let result = run_optimization(
        &mesh,
        &problem,
        &material,
        &mut filter,
        &settings,
        Some(&mut observer),
    )?;
    let elapsed = t0.elapsed().as_secs_f64();

    write_text(
        &cfg.output_dir.join("history.csv"),
        &history_csv(&result.history),
    )?;
    for (iter, field) in &snapshots {
        vtk::write_density_vtk(
            &cfg.output_dir.join(format!("density_iter_{iter}.vtk")),
            &mesh,
            field,
            &format!("physical density at iteration {iter}"),
        )?;
    }
    vtk::write_density_vtk(
        &cfg.output_dir.join("density_final.vtk"),
        &mesh,
        &result.physical,
        "final physical density",
    )?;
    write_text(
        &cfg.output_dir.join("summary.txt"),
        &summary_text(cfg, &mesh, &result, elapsed, threads),
    )?;

    println!(
        "done: c = {:.4}, vf = {:.4}, {} iterations ({}), {:.2} s",
        result.compliance,
        result.volume_fraction,
        result.iterations,
        if result.converged {
            "converged"
        } else {
            "iteration cap"
        },
        elapsed
    );
    println!("outputs in {}", cfg.output_dir.display());
    Ok(if result.converged {
        EXIT_OK
    } else {
        EXIT_STOPPED
    })
}

/// Threshold the `gradcheck` verdict uses for a filter kind.
pub fn gradcheck_threshold(kind: FilterKind) -> f64 {
    if kind == FilterKind::Heaviside {
        1e-4
    } else {
        1e-5
    }
}

/// `gradcheck` subcommand.
pub fn cmd_gradcheck(
    problem: &str,
    cells_spec: &str,
    filter: &str,
    rmin: f64,
    h: f64,
    corrupt_scale: f64,
) -> Result<u8> {
    thread_cap()?;
    let cells = config::parse_cells(cells_spec)?;
    let kind = FilterKind::parse(filter)?;
    let (mesh, problem) = build_problem_mesh(problem, &cells, MeshKind::Quad)?;
    let material = SimpMaterial::default_for_dim(mesh.dim);
    let report = check_sensitivity_chain(&GradCheckConfig {
        mesh: &mesh,
        problem: &problem,
        material: &material,
        filter_kind: kind,
        rmin,
        projection_beta: 8.0,
        h,
        corrupt_scale,
    })?;
    let threshold = gradcheck_threshold(kind);
    let pass = report.max_rel_err < threshold;
    println!(
        "gradient check: {} elements, filter {}, h = {:.1e}",
        report.n_checked,
        kind.name(),
        report.h
    );
    println!(
        "max relative error = {:.3e} at element {}",
        report.max_rel_err, report.worst_element
    );
    println!(
        "threshold {:.0e}: {}",
        threshold,
        if pass { "PASS" } else { "FAIL" }
    );
    Ok(if pass { EXIT_OK } else { EXIT_STOPPED })
}

/// One row of the assembly benchmark.
#[derive(Debug, Clone, Copy)]
pub struct BenchRow {
    pub method: AssemblyMethod,
    pub first_seconds: f64,
    pub avg_seconds: f64,
    pub quadrature_evals: u64,
}

/// Time `iters` assemblies per method on identical seeded random densities,
/// after confirming all three methods produce the same matrix to a relative
/// 1e-12.
pub fn bench_assembly(mesh: &Mesh, material: &SimpMaterial, iters: usize) -> Result<Vec<BenchRow>> {
    if iters == 0 {
        return Err(TopoError::InvalidArgument(
            "need at least one benchmark iteration".into(),
        ));
    }
    let dofs = build_dof_map(mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(0x7079_7065_7365_7421);
    let fields: Vec<Vec<f64>> = (0..iters)
        .map(|_| (0..mesh.n_elements()).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let methods = [
        AssemblyMethod::Standard,
        AssemblyMethod::Fast,
        AssemblyMethod::Symbolic,
    ];

    // Agreement gate on throwaway assemblers so the timed runs below still
    // start from cold caches.
    let reference = Assembler::new(mesh, &dofs, methods[0]).assemble(mesh, material, &fields[0])?;
    let scale = reference.max_abs();
    for &method in &methods[1..] {
        let k = Assembler::new(mesh, &dofs, method).assemble(mesh, material, &fields[0])?;
        let mut worst = 0.0f64;
        for (a, b) in k.values.iter().zip(&reference.values) {
            worst = worst.max((a - b).abs());
        }
        if worst > 1e-12 * scale {
            return Err(TopoError::Domain(format!(
                "{} assembly deviates from standard by {:.3e} (relative {:.3e})",
                method.name(),
                worst,
                worst / scale
            )));
        }
    }

    let mut rows = Vec::new();
    for &method in &methods {
        let mut assembler = Assembler::new(mesh, &dofs, method);
        let mut total = 0.0;
        let mut first = 0.0;
        for (i, field) in fields.iter().enumerate() {
            let t = Instant::now();
            let k = assembler.assemble(mesh, material, field)?;
            let dt = t.elapsed().as_secs_f64();
            std::hint::black_box(&k);
            total += dt;
            if i == 0 {
                first = dt;
            }
        }
        rows.push(BenchRow {
            method,
            first_seconds: first,
            avg_seconds: total / iters as f64,
            quadrature_evals: assembler.quadrature_evals(),
        });
    }
    Ok(rows)
}

/// `bench-assembly` subcommand: prints a table and writes the same rows as
/// CSV.
pub fn cmd_bench_assembly(
    problem: &str,
    cells_spec: &str,
    iters: usize,
    csv_path: &Path,
) -> Result<u8> {
    thread_cap()?;
    let cells = config::parse_cells(cells_spec)?;
    let (mesh, _problem) = build_problem_mesh(problem, &cells, MeshKind::Quad)?;
    let material = SimpMaterial::default_for_dim(mesh.dim);
    let rows = bench_assembly(&mesh, &material, iters)?;

    println!(
        "assembly benchmark: {} elements, {} assemblies per method",
        mesh.n_elements(),
        iters
    );
    println!("cross-method agreement <= 1e-12 confirmed");
    println!(
        "{:<10} {:>12} {:>12} {:>10} {:>18}",
        "method", "first [s]", "avg [s]", "vs std", "quadrature evals"
    );
    let standard_avg = rows[0].avg_seconds;
    let mut csv = String::from("method,first_seconds,avg_seconds,avg_vs_standard,quadrature_evals\n");
    for row in &rows {
        let ratio = row.avg_seconds / standard_avg;
        println!(
            "{:<10} {:>12.6} {:>12.6} {:>10.3} {:>18}",
            row.method.name(),
            row.first_seconds,
            row.avg_seconds,
            ratio,
            row.quadrature_evals
        );
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            row.method.name(),
            row.first_seconds,
            row.avg_seconds,
            ratio,
            row.quadrature_evals
        );
    }
    write_text(csv_path, &csv)?;
    println!("csv written to {}", csv_path.display());
    Ok(EXIT_OK)
}

/// A `PathBuf` helper for callers outside the crate (tests).
pub fn output_file(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_categories() {
        assert_eq!(
            exit_code_for(&TopoError::Configuration("volfrac: bad".into())),
            EXIT_CONFIG
        );
        assert_eq!(
            exit_code_for(&TopoError::InvalidArgument("x".into())),
            EXIT_CONFIG
        );
        assert_eq!(exit_code_for(&TopoError::Io("x".into())), EXIT_CONFIG);
        assert_eq!(
            exit_code_for(&TopoError::SolverDivergence {
                residual: 1.0,
                iterations: 10
            }),
            EXIT_SOLVER
        );
        assert_eq!(exit_code_for(&TopoError::NotSpd("x".into())), EXIT_SOLVER);
        assert_eq!(
            exit_code_for(
                &TopoError::Optimizer("stalled".into()).at_iteration(7)
            ),
            EXIT_SOLVER
        );
    }

    #[test]
    fn problem_mesh_builder_wires_name_cells_and_kind_together() {
        let (mesh, problem) = build_problem_mesh("mbb2d", &[6, 2], MeshKind::Quad).unwrap();
        assert_eq!(mesh.n_elements(), 12);
        assert_eq!(problem.name(), "mbb2d");
        let (tri, _) = build_problem_mesh("mbb2d", &[6, 2], MeshKind::Tri).unwrap();
        assert_eq!(tri.n_elements(), 24);
        assert!(build_problem_mesh("cantilever3d", &[4, 2], MeshKind::Quad).is_err());
        assert!(build_problem_mesh("nosuch", &[4, 2], MeshKind::Quad).is_err());
        assert!(build_problem_mesh("mbb2d", &[4, 2, 2], MeshKind::Tri).is_err());
    }

    #[test]
    fn benchmark_reports_cached_methods_as_faster_and_counts_quadrature() {
        let mesh = build_uniform_grid(2, &[12, 8], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        let material = SimpMaterial::default_for_dim(2);
        let rows = bench_assembly(&mesh, &material, 6).unwrap();
        assert_eq!(rows.len(), 3);
        // Standard requadratures every element of every call; fast shares
        // one quadrature matrix across the uniform grid; symbolic never
        // integrates numerically.
        assert_eq!(rows[0].quadrature_evals, 6 * 96);
        assert_eq!(rows[1].quadrature_evals, 1);
        assert_eq!(rows[2].quadrature_evals, 0);
    }

    #[test]
    fn history_csv_uses_the_exact_contract_header() {
        let rows = vec![IterationRecord {
            iteration: 1,
            compliance: 10.5,
            volume_fraction: 0.4,
            change: 0.2,
            seconds: 0.125,
        }];
        let text = history_csv(&rows);
        assert_eq!(
            text,
            "iter,compliance,volume_fraction,max_change,seconds\n1,10.5,0.4,0.2,0.125\n"
        );
    }
}
