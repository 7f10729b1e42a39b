//! Optimality-criteria update for the volume-constrained compliance problem.
//!
//! Each element moves according to the fixed-point rule
//! `rho <- clip(rho * B^eta)` with `B = -dc / (lambda dg)`, where the
//! Lagrange multiplier `lambda` is bisected until the *physical* volume
//! fraction of the candidate design meets the target. The clip keeps every
//! density inside `[rho - m, rho + m] ∩ [0, 1]` for the move limit `m`.
//! A target the move box cannot reach from either side yields the nearest
//! limit design with the missed flag set instead of an error.
//!
//! Sensitivities are normalized by their mean magnitude before the update,
//! so scaling the objective by any positive constant leaves the step
//! unchanged; the reported multiplier is mapped back to the caller's
//! scale.

use crate::error::{Result, TopoError};

#[derive(Debug, Clone, Copy)]
pub struct OcOptions {
    /// Maximum density change per element and update.
    pub move_limit: f64,
    /// Damping exponent applied to the update ratio.
    pub eta: f64,
    /// Upper end of the (normalized) multiplier bracket.
    pub lambda_max: f64,
    /// Relative bracket width at which the bisection stops.
    pub rtol: f64,
}

impl Default for OcOptions {
    fn default() -> Self {
        OcOptions {
            move_limit: 0.2,
            eta: 0.5,
            lambda_max: 1e9,
            rtol: 1e-3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OcOutcome {
    /// Updated design densities.
    pub rho: Vec<f64>,
    /// Lagrange multiplier on the caller's sensitivity scale.
    pub lambda: f64,
    /// Physical volume fraction achieved by the returned design.
    pub achieved_vf: f64,
    /// Set when the move-limited step cannot reach the target volume;
    /// expected while the design ramps from a far-off start.
    pub target_missed: bool,
    /// Number of bisection steps taken.
    pub bisections: usize,
}

/// One optimality-criteria step.
///
/// `physical_vf` must evaluate the volume fraction of a *candidate design*
/// after any density filtering, since the constraint lives on the physical
/// field.
pub fn oc_update(
    rho: &[f64],
    dc: &[f64],
    dg: &[f64],
    target_vf: f64,
    physical_vf: &mut dyn FnMut(&[f64]) -> Result<f64>,
    opts: &OcOptions,
) -> Result<OcOutcome> {
    let n = rho.len();
    if dc.len() != n || dg.len() != n {
        return Err(TopoError::InvalidArgument(format!(
            "mismatched field lengths: rho {n}, dc {}, dg {}",
            dc.len(),
            dg.len()
        )));
    }
    if !(target_vf > 0.0 && target_vf < 1.0) {
        return Err(TopoError::InvalidArgument(format!(
            "target volume fraction must lie in (0, 1), got {target_vf}"
        )));
    }
    if !(opts.move_limit > 0.0 && opts.move_limit <= 1.0) || !(opts.eta > 0.0) {
        return Err(TopoError::InvalidArgument(format!(
            "move limit {} and damping {} must be positive (move limit at most 1)",
            opts.move_limit, opts.eta
        )));
    }
    if dg.iter().any(|&g| !(g > 0.0)) {
        return Err(TopoError::Optimizer(
            "volume gradient must be strictly positive".into(),
        ));
    }
    let scale = dc.iter().map(|d| d.abs()).sum::<f64>() / n as f64;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(TopoError::Optimizer(format!(
            "degenerate compliance sensitivities (mean magnitude {scale})"
        )));
    }

    // Per-element move box and normalized drive -dc / scale.
    let lo: Vec<f64> = rho.iter().map(|&r| (r - opts.move_limit).max(0.0)).collect();
    let hi: Vec<f64> = rho.iter().map(|&r| (r + opts.move_limit).min(1.0)).collect();
    let drive: Vec<f64> = dc.iter().map(|&d| (-d / scale).max(0.0)).collect();

    let mut candidate = vec![0.0; n];
    let fill = |lambda: f64, out: &mut Vec<f64>| {
        for e in 0..n {
            let ratio = drive[e] / (lambda * dg[e]);
            let stepped = rho[e] * ratio.powf(opts.eta);
            out[e] = stepped.clamp(lo[e], hi[e]);
        }
    };

    // As lambda -> 0 every driven element rides to its upper move corner
    // (undriven ones drop to the lower). If even that candidate cannot
    // fill the target volume, the constraint is inactive for this step
    // and no positive multiplier brackets it; return the limit design
    // rather than bisecting an untightenable bracket.
    let limit: Vec<f64> = (0..n)
        .map(|e| if drive[e] > 0.0 { hi[e] } else { lo[e] })
        .collect();
    let limit_vf = physical_vf(&limit)?;
    if limit_vf <= target_vf {
        return Ok(OcOutcome {
            rho: limit,
            lambda: 0.0,
            achieved_vf: limit_vf,
            target_missed: (limit_vf - target_vf).abs() > 0.01,
            bisections: 0,
        });
    }

    let mut l1 = 0.0f64;
    let mut l2 = opts.lambda_max;
    let mut bisections = 0usize;
    while (l2 - l1) / (l2 + l1) > opts.rtol {
        let mid = 0.5 * (l1 + l2);
        fill(mid, &mut candidate);
        if physical_vf(&candidate)? > target_vf {
            l1 = mid;
        } else {
            l2 = mid;
        }
        bisections += 1;
        if bisections > 200 {
            return Err(TopoError::Optimizer(format!(
                "volume bisection failed to tighten ({l1}, {l2})"
            )));
        }
    }
    let lambda_hat = 0.5 * (l1 + l2);
    fill(lambda_hat, &mut candidate);
    let achieved_vf = physical_vf(&candidate)?;

    Ok(OcOutcome {
        rho: candidate,
        lambda: scale * lambda_hat,
        achieved_vf,
        target_missed: (achieved_vf - target_vf).abs() > 0.01,
        bisections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Identity filter: the physical volume fraction is the plain mean.
    fn mean_vf(rho: &[f64]) -> Result<f64> {
        Ok(rho.iter().sum::<f64>() / rho.len() as f64)
    }

    #[test]
    fn two_element_problem_matches_the_analytic_fixed_point() {
        // With rho = [1/2, 1/2], dc = [-4, -1], dg = [1/2, 1/2] and a
        // target of 1/2, each candidate is rho_e sqrt(-dc_e / (lambda
        // dg_e)); the volume constraint pins lambda = 4.5 and the step
        // lands on [2/3, 1/3], inside the default move box.
        let opts = OcOptions::default();
        let out = oc_update(
            &[0.5, 0.5],
            &[-4.0, -1.0],
            &[0.5, 0.5],
            0.5,
            &mut mean_vf,
            &opts,
        )
        .unwrap();
        assert!((out.rho[0] - 2.0 / 3.0).abs() < 5e-3);
        assert!((out.rho[1] - 1.0 / 3.0).abs() < 5e-3);
        assert!((out.lambda - 4.5).abs() < 0.05);
        assert!((out.achieved_vf - 0.5).abs() < 5e-3);
        assert!(!out.target_missed);
    }

    #[test]
    fn update_respects_move_limits_and_bounds() {
        let rho = vec![0.05, 0.5, 0.95, 0.4];
        let dc = vec![-8.0, -0.01, -3.0, -0.2];
        let dg = vec![1.0, 1.0, 1.0, 1.0];
        let opts = OcOptions::default();
        let out = oc_update(&rho, &dc, &dg, 0.4, &mut mean_vf, &opts).unwrap();
        for (e, (&new, &old)) in out.rho.iter().zip(&rho).enumerate() {
            assert!((new - old).abs() <= opts.move_limit + 1e-15, "element {e}");
            assert!((0.0..=1.0).contains(&new));
        }
    }

    #[test]
    fn update_is_invariant_to_sensitivity_scaling() {
        let rho = vec![0.3, 0.6, 0.8, 0.2, 0.5];
        let dc = vec![-1.7, -0.3, -2.9, -0.05, -1.1];
        let dg = vec![0.2; 5];
        let opts = OcOptions::default();
        let base = oc_update(&rho, &dc, &dg, 0.45, &mut mean_vf, &opts).unwrap();
        let scaled_dc: Vec<f64> = dc.iter().map(|d| d * 3.7e4).collect();
        let scaled = oc_update(&rho, &scaled_dc, &dg, 0.45, &mut mean_vf, &opts).unwrap();
        for (a, b) in base.rho.iter().zip(&scaled.rho) {
            assert!((a - b).abs() <= 1e-10);
        }
        // The multiplier tracks the caller's scale.
        assert!((scaled.lambda / base.lambda - 3.7e4).abs() / 3.7e4 < 1e-9);
    }

    #[test]
    fn target_above_the_move_box_returns_the_upper_limit_design() {
        // From a nearly void design no multiplier can fill a 0.78 volume
        // fraction; the step rides every element to its move corner.
        let out = oc_update(
            &[0.02; 4],
            &[-1.0, -2.0, -0.5, -3.0],
            &[0.25; 4],
            0.78,
            &mut mean_vf,
            &OcOptions::default(),
        )
        .unwrap();
        assert!(out.target_missed);
        assert_eq!(out.lambda, 0.0);
        assert_eq!(out.bisections, 0);
        for &r in &out.rho {
            assert!((r - 0.22).abs() < 1e-15);
        }
    }

    #[test]
    fn unreachable_target_sets_the_missed_flag() {
        let out = oc_update(
            &[1.0, 1.0, 1.0],
            &[-1.0, -2.0, -3.0],
            &[1.0, 1.0, 1.0],
            0.4,
            &mut mean_vf,
            &OcOptions {
                move_limit: 0.1,
                ..OcOptions::default()
            },
        )
        .unwrap();
        // The best the box allows is a volume fraction of 0.9.
        assert!(out.target_missed);
        assert!((out.achieved_vf - 0.9).abs() < 1e-12);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let mut vf = mean_vf;
        let opts = OcOptions::default();
        assert!(oc_update(&[0.5], &[-1.0, -1.0], &[1.0], 0.5, &mut vf, &opts).is_err());
        assert!(oc_update(&[0.5], &[-1.0], &[0.0], 0.5, &mut vf, &opts).is_err());
        assert!(oc_update(&[0.5], &[-1.0], &[1.0], 1.5, &mut vf, &opts).is_err());
        assert!(oc_update(&[0.5], &[0.0], &[1.0], 0.5, &mut vf, &opts).is_err());
    }
}
