//! Run configuration: a flat `key = value` file with dotted keys for
//! nesting, overridable from the command line with `--set key=value`.
//!
//! Unknown keys are rejected so typos surface as errors instead of
//! silently falling back to defaults. Blank lines and lines starting with
//! `#` are ignored.

use std::path::PathBuf;

use crate::error::{Result, TopoError};
use crate::fem::assembly::AssemblyMethod;
use crate::fem::solve::SolveMethod;
use crate::filters::{FilterKind, BETA_INITIAL, BETA_MAX};
use crate::optimize::OptimizerKind;

/// Grid element flavor for 2D domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Quad,
    Tri,
}

impl MeshKind {
    pub fn parse(name: &str) -> Result<MeshKind> {
        match name {
            "quad" => Ok(MeshKind::Quad),
            "tri" => Ok(MeshKind::Tri),
            other => Err(TopoError::Configuration(format!(
                "unknown mesh kind '{other}' (expected quad or tri)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MeshKind::Quad => "quad",
            MeshKind::Tri => "tri",
        }
    }
}

/// A fully resolved optimization run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: String,
    pub cells: Vec<usize>,
    pub mesh: MeshKind,
    pub volfrac: f64,
    pub penal: f64,
    /// Filter radius; required for every filter except `none`.
    pub rmin: f64,
    pub filter: FilterKind,
    pub beta0: f64,
    pub beta_max: f64,
    pub continuation_iter: usize,
    pub optimizer: OptimizerKind,
    pub max_iter: usize,
    pub tol: f64,
    pub solver: SolveMethod,
    pub assembly: AssemblyMethod,
    pub initial_density: f64,
    pub output_dir: PathBuf,
    pub snapshot_every: usize,
}

/// Parse the phase: raw key/value pairs before type checking.
fn split_pairs(text: &str, source: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(TopoError::Configuration(format!(
                "{source} line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(TopoError::Configuration(format!(
                "{source} line {}: empty key or value in '{line}'",
                lineno + 1
            )));
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value.parse::<f64>().map_err(|_| {
        TopoError::Configuration(format!("{key}: expected a number, got '{value}'"))
    })
}

fn parse_usize(key: &str, value: &str) -> Result<usize> {
    value.parse::<usize>().map_err(|_| {
        TopoError::Configuration(format!(
            "{key}: expected a nonnegative integer, got '{value}'"
        ))
    })
}

/// `"160x100"` or `"60x20x4"` → per-axis cell counts.
pub fn parse_cells(value: &str) -> Result<Vec<usize>> {
    let counts: Vec<usize> = value
        .split('x')
        .map(|part| {
            part.parse::<usize>().ok().filter(|&c| c > 0).ok_or_else(|| {
                TopoError::Configuration(format!(
                    "cells: expected positive counts like 160x100 or 60x20x4, got '{value}'"
                ))
            })
        })
        .collect::<Result<_>>()?;
    if counts.len() != 2 && counts.len() != 3 {
        return Err(TopoError::Configuration(format!(
            "cells: expected 2 or 3 axes, got {} in '{value}'",
            counts.len()
        )));
    }
    Ok(counts)
}

impl RunConfig {
    /// Build a config from file text plus `--set key=value` overrides.
    pub fn from_text(text: &str, overrides: &[String]) -> Result<RunConfig> {
        let mut pairs = split_pairs(text, "config")?;
        for (i, item) in overrides.iter().enumerate() {
            let mut extra = split_pairs(item, "override")?;
            if extra.len() != 1 {
                return Err(TopoError::Configuration(format!(
                    "--set #{}: expected exactly one key=value, got '{item}'",
                    i + 1
                )));
            }
            pairs.append(&mut extra);
        }

        let mut problem: Option<String> = None;
        let mut cells: Option<Vec<usize>> = None;
        let mut mesh = MeshKind::Quad;
        let mut volfrac: Option<f64> = None;
        let mut penal = 3.0;
        let mut rmin: Option<f64> = None;
        let mut filter = FilterKind::Sensitivity;
        let mut beta0 = BETA_INITIAL;
        let mut beta_max = BETA_MAX;
        let mut continuation_iter = 50usize;
        let mut optimizer = OptimizerKind::Oc;
        let mut max_iter = 200usize;
        let mut tol = 0.01;
        let mut solver = SolveMethod::Cg;
        let mut assembly = AssemblyMethod::Fast;
        let mut initial_density: Option<f64> = None;
        let mut output_dir = PathBuf::from("out");
        let mut snapshot_every = 0usize;

        // Later assignments win, so overrides replace file keys.
        for (key, value) in &pairs {
            match key.as_str() {
                "problem" => problem = Some(value.clone()),
                "cells" => cells = Some(parse_cells(value)?),
                "mesh" => mesh = MeshKind::parse(value)?,
                "volfrac" => volfrac = Some(parse_f64(key, value)?),
                "penal" => penal = parse_f64(key, value)?,
                "rmin" => rmin = Some(parse_f64(key, value)?),
                "filter" => filter = FilterKind::parse(value)?,
                "heaviside.beta0" => beta0 = parse_f64(key, value)?,
                "heaviside.beta_max" => beta_max = parse_f64(key, value)?,
                "heaviside.continuation_iter" => continuation_iter = parse_usize(key, value)?,
                "optimizer" => optimizer = OptimizerKind::parse(value)?,
                "max_iter" => max_iter = parse_usize(key, value)?,
                "tol" => tol = parse_f64(key, value)?,
                "solver" => solver = SolveMethod::parse(value)?,
                "assembly" => assembly = AssemblyMethod::parse(value)?,
                "initial_density" => initial_density = Some(parse_f64(key, value)?),
                "output_dir" => output_dir = PathBuf::from(value),
                "snapshot_every" => snapshot_every = parse_usize(key, value)?,
                other => {
                    return Err(TopoError::Configuration(format!(
                        "unknown key '{other}'"
                    )));
                }
            }
        }

        let problem = problem
            .ok_or_else(|| TopoError::Configuration("problem: required key missing".into()))?;
        let cells = cells
            .ok_or_else(|| TopoError::Configuration("cells: required key missing".into()))?;
        let volfrac = volfrac
            .ok_or_else(|| TopoError::Configuration("volfrac: required key missing".into()))?;
        if !(volfrac > 0.0 && volfrac < 1.0) {
            return Err(TopoError::Configuration(format!(
                "volfrac: must lie strictly inside (0, 1), got {volfrac}"
            )));
        }
        if !(penal >= 1.0) || !penal.is_finite() {
            return Err(TopoError::Configuration(format!(
                "penal: must be >= 1, got {penal}"
            )));
        }
        let rmin = match (filter, rmin) {
            (FilterKind::None, r) => r.unwrap_or(0.0),
            (_, Some(r)) if r > 0.0 && r.is_finite() => r,
            (_, Some(r)) => {
                return Err(TopoError::Configuration(format!(
                    "rmin: must be positive and finite, got {r}"
                )));
            }
            (_, None) => {
                return Err(TopoError::Configuration(format!(
                    "rmin: required when filter = {}",
                    filter.name()
                )));
            }
        };
        if !(beta0 > 0.0) || !(beta_max >= beta0) || !beta_max.is_finite() {
            return Err(TopoError::Configuration(format!(
                "heaviside.beta0/beta_max: need 0 < beta0 <= beta_max, \
                 got {beta0} and {beta_max}"
            )));
        }
        if continuation_iter == 0 {
            return Err(TopoError::Configuration(
                "heaviside.continuation_iter: must be at least 1".into(),
            ));
        }
        if max_iter == 0 {
            return Err(TopoError::Configuration(
                "max_iter: must be at least 1".into(),
            ));
        }
        // tol = 0 is allowed: the run then always stops on the iteration
        // cap, which is a supported way to request a fixed-length run.
        if !(tol >= 0.0) || !tol.is_finite() {
            return Err(TopoError::Configuration(format!(
                "tol: must be a nonnegative number, got {tol}"
            )));
        }
        let initial_density = initial_density.unwrap_or(volfrac);
        if !(0.0..=1.0).contains(&initial_density) {
            return Err(TopoError::Configuration(format!(
                "initial_density: must lie in [0, 1], got {initial_density}"
            )));
        }
        if mesh == MeshKind::Tri && cells.len() != 2 {
            return Err(TopoError::Configuration(
                "mesh: tri meshes are 2D; use 2 cell counts".into(),
            ));
        }

        Ok(RunConfig {
            problem,
            cells,
            mesh,
            volfrac,
            penal,
            rmin,
            filter,
            beta0,
            beta_max,
            continuation_iter,
            optimizer,
            max_iter,
            tol,
            solver,
            assembly,
            initial_density,
            output_dir,
            snapshot_every,
        })
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    /// Canonical echo of every effective setting, one `key = value` line
    /// each, written into the summary for provenance.
    pub fn echo(&self) -> String {
        let cells = self
            .cells
            .iter()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join("x");
        let mut s = String::new();
        s.push_str(&format!("problem = {}\n", self.problem));
        s.push_str(&format!("cells = {cells}\n"));
        s.push_str(&format!("mesh = {}\n", self.mesh.name()));
        s.push_str(&format!("volfrac = {}\n", self.volfrac));
        s.push_str(&format!("penal = {}\n", self.penal));
        s.push_str(&format!("rmin = {}\n", self.rmin));
        s.push_str(&format!("filter = {}\n", self.filter.name()));
        s.push_str(&format!("heaviside.beta0 = {}\n", self.beta0));
        s.push_str(&format!("heaviside.beta_max = {}\n", self.beta_max));
        s.push_str(&format!(
            "heaviside.continuation_iter = {}\n",
            self.continuation_iter
        ));
        s.push_str(&format!("optimizer = {}\n", self.optimizer.name()));
        s.push_str(&format!("max_iter = {}\n", self.max_iter));
        s.push_str(&format!("tol = {}\n", self.tol));
        s.push_str(&format!("solver = {}\n", self.solver.name()));
        s.push_str(&format!("assembly = {}\n", self.assembly.name()));
        s.push_str(&format!("initial_density = {}\n", self.initial_density));
        s.push_str(&format!("output_dir = {}\n", self.output_dir.display()));
        s.push_str(&format!("snapshot_every = {}\n", self.snapshot_every));
        s
    }
}
