//! Method of moving asymptotes.
//!
//! Each step builds a separable convex approximation of the objective and
//! constraints around the current iterate,
//!
//! ```text
//! f~(x) = sum_j  p_j / (U_j - x_j) + q_j / (x_j - L_j) + r
//! ```
//!
//! with per-variable asymptotes `L < x < U` that widen while the iterate
//! moves monotonically and shrink when it oscillates. The subproblem —
//! minimize `f~0 + a0 z + sum_i (c_i y_i + d_i y_i^2 / 2)` subject to
//! `f~i - a_i z - y_i <= b_i` inside move bounds `alfa <= x <= beta` — is
//! solved with a primal–dual interior-point iteration driven to a KKT
//! residual below `0.9 * eps` for a decreasing sequence of barrier values
//! `eps`, following Svanberg's 2007 reference formulation.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, TopoError};

/// A subproblem solve must finish with a KKT infinity-norm residual at or
/// below this, or the update is rejected as unconverged.
const KKT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy)]
pub struct MmaOptions {
    /// Hard per-step move bound as a fraction of the variable range.
    pub move_limit: f64,
    /// Initial asymptote distance as a fraction of the variable range.
    pub asyinit: f64,
    /// Asymptote widening factor on monotone progress.
    pub asyincr: f64,
    /// Asymptote shrinking factor on oscillation.
    pub asydecr: f64,
    /// Fraction of the asymptote gap kept between bounds and asymptotes.
    pub albefa: f64,
    /// Floor for the approximation curvatures.
    pub raa0: f64,
    /// Final interior-point barrier value; the last continuation stage
    /// drives the KKT residual to `0.9 * epsimin`.
    pub epsimin: f64,
    /// Objective weight of the auxiliary variable `z`.
    pub a0: f64,
    /// Constraint weight of `z` (one shared value for all constraints).
    pub a: f64,
    /// Linear penalty on the constraint slack variables `y`.
    pub c: f64,
    /// Quadratic penalty on the constraint slack variables `y`.
    pub d: f64,
    /// Newton-step budget per barrier stage.
    pub max_newton: usize,
}

impl Default for MmaOptions {
    fn default() -> Self {
        MmaOptions {
            move_limit: 0.5,
            asyinit: 0.5,
            asyincr: 1.2,
            asydecr: 0.7,
            albefa: 0.1,
            raa0: 1e-5,
            epsimin: 1e-9,
            a0: 1.0,
            a: 0.0,
            c: 1e4,
            d: 0.0,
            max_newton: 200,
        }
    }
}

/// Result of one accepted MMA step.
#[derive(Debug, Clone)]
pub struct MmaStep {
    /// New design variables, strictly inside `[alfa, beta]`.
    pub x: Vec<f64>,
    /// Constraint slack variables.
    pub y: Vec<f64>,
    /// Auxiliary objective variable.
    pub z: f64,
    /// Constraint multipliers.
    pub lambda: Vec<f64>,
    /// Subproblem KKT residual (infinity norm) at acceptance.
    pub kkt_residual: f64,
    /// Lower move bounds used for this step.
    pub alfa: Vec<f64>,
    /// Upper move bounds used for this step.
    pub beta: Vec<f64>,
}

/// Iteration memory: the two previous iterates and the asymptotes.
#[derive(Debug, Clone)]
pub struct MmaState {
    n: usize,
    m: usize,
    opts: MmaOptions,
    iter: usize,
    xold1: Vec<f64>,
    xold2: Vec<f64>,
    low: Vec<f64>,
    upp: Vec<f64>,
}

impl MmaState {
    pub fn new(n: usize, m: usize, opts: MmaOptions) -> Result<MmaState> {
        if n == 0 || m == 0 {
            return Err(TopoError::InvalidArgument(
                "MMA needs at least one variable and one constraint".into(),
            ));
        }
        if !(opts.c > 0.0) || !(opts.move_limit > 0.0) {
            return Err(TopoError::InvalidArgument(format!(
                "MMA penalty c = {} and move limit {} must be positive",
                opts.c, opts.move_limit
            )));
        }
        Ok(MmaState {
            n,
            m,
            opts,
            iter: 0,
            xold1: vec![0.0; n],
            xold2: vec![0.0; n],
            low: vec![0.0; n],
            upp: vec![0.0; n],
        })
    }

    /// Current asymptotes `(low, upp)`.
    pub fn asymptotes(&self) -> (&[f64], &[f64]) {
        (&self.low, &self.upp)
    }

    /// One MMA step. `dfdx` is row-major with one row per constraint.
    pub fn update(
        &mut self,
        x: &[f64],
        xmin: &[f64],
        xmax: &[f64],
        df0dx: &[f64],
        fval: &[f64],
        dfdx: &[f64],
    ) -> Result<MmaStep> {
        let n = self.n;
        let m = self.m;
        if x.len() != n || xmin.len() != n || xmax.len() != n || df0dx.len() != n {
            return Err(TopoError::InvalidArgument(format!(
                "variable-sized inputs must have length {n}"
            )));
        }
        if fval.len() != m || dfdx.len() != m * n {
            return Err(TopoError::InvalidArgument(format!(
                "expected {m} constraint values and a {m}x{n} gradient"
            )));
        }
        let o = self.opts;
        self.iter += 1;

        // Asymptote update: fixed fractions on the first two iterations,
        // then widen or shrink per variable by the sign of the last two
        // moves.
        if self.iter < 3 {
            for j in 0..n {
                let range = xmax[j] - xmin[j];
                self.low[j] = x[j] - o.asyinit * range;
                self.upp[j] = x[j] + o.asyinit * range;
            }
        } else {
            for j in 0..n {
                let osc = (x[j] - self.xold1[j]) * (self.xold1[j] - self.xold2[j]);
                let factor = if osc > 0.0 {
                    o.asyincr
                } else if osc < 0.0 {
                    o.asydecr
                } else {
                    1.0
                };
                let range = xmax[j] - xmin[j];
                let low = x[j] - factor * (self.xold1[j] - self.low[j]);
                let upp = x[j] + factor * (self.upp[j] - self.xold1[j]);
                self.low[j] = low.clamp(x[j] - 10.0 * range, x[j] - 0.01 * range);
                self.upp[j] = upp.clamp(x[j] + 0.01 * range, x[j] + 10.0 * range);
            }
        }

        // Move bounds inside the asymptotes.
        let mut alfa = vec![0.0; n];
        let mut beta = vec![0.0; n];
        for j in 0..n {
            let range = xmax[j] - xmin[j];
            alfa[j] = xmin[j]
                .max(self.low[j] + o.albefa * (x[j] - self.low[j]))
                .max(x[j] - o.move_limit * range);
            beta[j] = xmax[j]
                .min(self.upp[j] - o.albefa * (self.upp[j] - x[j]))
                .min(x[j] + o.move_limit * range);
        }

        // Separable approximation coefficients.
        let mut p0 = vec![0.0; n];
        let mut q0 = vec![0.0; n];
        let mut pc = vec![0.0; m * n];
        let mut qc = vec![0.0; m * n];
        let mut b = vec![0.0; m];
        for j in 0..n {
            let ux1 = self.upp[j] - x[j];
            let xl1 = x[j] - self.low[j];
            let (ux2, xl2) = (ux1 * ux1, xl1 * xl1);
            let xmami = (xmax[j] - xmin[j]).max(1e-5);

            let dpos = df0dx[j].max(0.0);
            let dneg = (-df0dx[j]).max(0.0);
            let stab = 0.001 * (dpos + dneg) + o.raa0 / xmami;
            p0[j] = (dpos + stab) * ux2;
            q0[j] = (dneg + stab) * xl2;

            for i in 0..m {
                let g = dfdx[i * n + j];
                let gpos = g.max(0.0);
                let gneg = (-g).max(0.0);
                let gstab = 0.001 * (gpos + gneg) + o.raa0 / xmami;
                let p = (gpos + gstab) * ux2;
                let q = (gneg + gstab) * xl2;
                pc[i * n + j] = p;
                qc[i * n + j] = q;
                b[i] += p / ux1 + q / xl1;
            }
        }
        for i in 0..m {
            b[i] -= fval[i];
        }

        self.xold2.copy_from_slice(&self.xold1);
        self.xold1.copy_from_slice(x);

        let sub = Subproblem {
            n,
            m,
            low: &self.low,
            upp: &self.upp,
            alfa: &alfa,
            beta: &beta,
            p0: &p0,
            q0: &q0,
            pc: &pc,
            qc: &qc,
            b: &b,
            opts: &o,
        };
        let (x_new, y, z, lam, kkt_residual) = sub.solve()?;
        Ok(MmaStep {
            x: x_new,
            y,
            z,
            lambda: lam,
            kkt_residual,
            alfa,
            beta,
        })
    }
}

/// The convex separable subproblem in the form solved by the primal–dual
/// interior-point iteration.
struct Subproblem<'a> {
    n: usize,
    m: usize,
    low: &'a [f64],
    upp: &'a [f64],
    alfa: &'a [f64],
    beta: &'a [f64],
    p0: &'a [f64],
    q0: &'a [f64],
    pc: &'a [f64],
    qc: &'a [f64],
    b: &'a [f64],
    opts: &'a MmaOptions,
}

/// Full primal–dual state of the interior-point iteration.
#[derive(Clone)]
struct IpState {
    x: Vec<f64>,
    y: Vec<f64>,
    z: f64,
    lam: Vec<f64>,
    xsi: Vec<f64>,
    eta: Vec<f64>,
    mu: Vec<f64>,
    zet: f64,
    s: Vec<f64>,
}

impl<'a> Subproblem<'a> {
    fn solve(&self) -> Result<(Vec<f64>, Vec<f64>, f64, Vec<f64>, f64)> {
        let (n, m, o) = (self.n, self.m, self.opts);
        let mut w = IpState {
            x: (0..n).map(|j| 0.5 * (self.alfa[j] + self.beta[j])).collect(),
            y: vec![1.0; m],
            z: 1.0,
            lam: vec![1.0; m],
            xsi: (0..n)
                .map(|j| (1.0 / (0.5 * (self.beta[j] - self.alfa[j]))).max(1.0))
                .collect(),
            eta: (0..n)
                .map(|j| (1.0 / (0.5 * (self.beta[j] - self.alfa[j]))).max(1.0))
                .collect(),
            mu: vec![(0.5 * o.c).max(1.0); m],
            zet: 1.0,
            s: vec![1.0; m],
        };

        // Barrier continuation: each stage runs Newton's method toward a
        // KKT residual of 0.9·epsi, but is allowed to hand a stubborn
        // point to the next (tighter) stage, which alters the central
        // path and usually unsticks it. Only the final result is judged.
        let mut epsi = 1.0;
        let mut residual = f64::INFINITY;
        // The 0.9 slack keeps the `epsimin` stage itself inside the loop
        // no matter how the repeated `* 0.1` rounds.
        while epsi > 0.9 * o.epsimin {
            let (mut norm, mut max) = self.residuals(&w, epsi);
            let mut newton = 0;
            while max > 0.9 * epsi && newton < o.max_newton {
                newton += 1;
                let (norm_new, max_new) = self.newton_step(&mut w, epsi, norm)?;
                norm = norm_new;
                max = max_new;
            }
            residual = max;
            epsi *= 0.1;
        }
        if residual > KKT_TOL {
            return Err(TopoError::Optimizer(format!(
                "interior-point iteration exhausted its {} Newton steps per \
                 barrier stage with KKT residual {residual:.3e}",
                o.max_newton
            )));
        }
        Ok((w.x, w.y, w.z, w.lam, residual))
    }

    /// `plam = p0 + P' lam`, `qlam = q0 + Q' lam` for the current `lam`.
    fn plam_qlam(&self, lam: &[f64], j: usize) -> (f64, f64) {
        let mut p = self.p0[j];
        let mut q = self.q0[j];
        for i in 0..self.m {
            p += self.pc[i * self.n + j] * lam[i];
            q += self.qc[i * self.n + j] * lam[i];
        }
        (p, q)
    }

    /// Constraint values of the approximation: `g_i = sum_j P/ux + Q/xl`.
    fn gvec(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.m];
        for j in 0..self.n {
            let ux1 = self.upp[j] - x[j];
            let xl1 = x[j] - self.low[j];
            for i in 0..self.m {
                g[i] += self.pc[i * self.n + j] / ux1 + self.qc[i * self.n + j] / xl1;
            }
        }
        g
    }

    /// Norm and infinity norm of the full KKT residual at barrier `epsi`.
    fn residuals(&self, w: &IpState, epsi: f64) -> (f64, f64) {
        let (n, m, o) = (self.n, self.m, self.opts);
        let mut sq = 0.0f64;
        let mut mx = 0.0f64;
        let mut push = |r: f64| {
            sq += r * r;
            mx = mx.max(r.abs());
        };

        for j in 0..n {
            let ux1 = self.upp[j] - w.x[j];
            let xl1 = w.x[j] - self.low[j];
            let (plam, qlam) = self.plam_qlam(&w.lam, j);
            let dpsidx = plam / (ux1 * ux1) - qlam / (xl1 * xl1);
            push(dpsidx - w.xsi[j] + w.eta[j]);
        }
        for i in 0..m {
            push(o.c + o.d * w.y[i] - w.mu[i] - w.lam[i]);
        }
        {
            let asum: f64 = w.lam.iter().map(|&l| o.a * l).sum();
            push(o.a0 - w.zet - asum);
        }
        let g = self.gvec(&w.x);
        for i in 0..m {
            push(g[i] - o.a * w.z - w.y[i] + w.s[i] - self.b[i]);
        }
        for j in 0..n {
            push(w.xsi[j] * (w.x[j] - self.alfa[j]) - epsi);
            push(w.eta[j] * (self.beta[j] - w.x[j]) - epsi);
        }
        for i in 0..m {
            push(w.mu[i] * w.y[i] - epsi);
        }
        push(w.zet * w.z - epsi);
        for i in 0..m {
            push(w.lam[i] * w.s[i] - epsi);
        }
        (sq.sqrt(), mx)
    }

    /// One damped Newton step on the perturbed KKT system; returns the new
    /// residual norms after the line search.
    fn newton_step(&self, w: &mut IpState, epsi: f64, residunorm: f64) -> Result<(f64, f64)> {
        let (n, m, o) = (self.n, self.m, self.opts);

        let mut delx = vec![0.0; n];
        let mut diagx = vec![0.0; n];
        // gg is the constraint Jacobian of the approximation, row-major m×n.
        let mut gg = vec![0.0; m * n];
        for j in 0..n {
            let ux1 = self.upp[j] - w.x[j];
            let xl1 = w.x[j] - self.low[j];
            let (ux2, xl2) = (ux1 * ux1, xl1 * xl1);
            let (plam, qlam) = self.plam_qlam(&w.lam, j);
            delx[j] = plam / ux2 - qlam / xl2 - epsi / (w.x[j] - self.alfa[j])
                + epsi / (self.beta[j] - w.x[j]);
            diagx[j] = 2.0 * (plam / (ux2 * ux1) + qlam / (xl2 * xl1))
                + w.xsi[j] / (w.x[j] - self.alfa[j])
                + w.eta[j] / (self.beta[j] - w.x[j]);
            for i in 0..m {
                gg[i * n + j] = self.pc[i * n + j] / ux2 - self.qc[i * n + j] / xl2;
            }
        }

        let gvec = self.gvec(&w.x);
        let mut dely = vec![0.0; m];
        let mut dellam = vec![0.0; m];
        let mut diagy = vec![0.0; m];
        let mut diaglamyi = vec![0.0; m];
        for i in 0..m {
            dely[i] = o.c + o.d * w.y[i] - w.lam[i] - epsi / w.y[i];
            dellam[i] = gvec[i] - o.a * w.z - w.y[i] - self.b[i] + epsi / w.lam[i];
            diagy[i] = o.d + w.mu[i] / w.y[i];
            diaglamyi[i] = w.s[i] / w.lam[i] + 1.0 / diagy[i];
        }
        let delz = o.a0 - w.lam.iter().map(|&l| o.a * l).sum::<f64>() - epsi / w.z;

        let mut dx = vec![0.0; n];
        let mut dlam = vec![0.0; m];
        let dz;
        if m < n {
            // Eliminate x; solve the (m+1)-sized system in (lam, z).
            let mut aa = DMatrix::<f64>::zeros(m + 1, m + 1);
            let mut bb = DVector::<f64>::zeros(m + 1);
            for i in 0..m {
                let mut blam = dellam[i] + dely[i] / diagy[i];
                for j in 0..n {
                    blam -= gg[i * n + j] * delx[j] / diagx[j];
                }
                bb[i] = blam;
                for k in 0..m {
                    let mut dot = 0.0;
                    for j in 0..n {
                        dot += gg[i * n + j] * gg[k * n + j] / diagx[j];
                    }
                    aa[(i, k)] = dot + if i == k { diaglamyi[i] } else { 0.0 };
                }
                aa[(i, m)] = o.a;
                aa[(m, i)] = o.a;
            }
            aa[(m, m)] = -w.zet / w.z;
            bb[m] = delz;
            let sol = aa
                .lu()
                .solve(&bb)
                .ok_or_else(|| TopoError::Optimizer("singular interior-point system".into()))?;
            for i in 0..m {
                dlam[i] = sol[i];
            }
            dz = sol[m];
            for j in 0..n {
                let mut glam = 0.0;
                for i in 0..m {
                    glam += gg[i * n + j] * dlam[i];
                }
                dx[j] = -delx[j] / diagx[j] - glam / diagx[j];
            }
        } else {
            // Few variables: solve the (n+1)-sized system in (x, z).
            let mut aa = DMatrix::<f64>::zeros(n + 1, n + 1);
            let mut bb = DVector::<f64>::zeros(n + 1);
            let mut azz = w.zet / w.z;
            let mut bz = delz;
            for i in 0..m {
                azz += o.a * o.a / diaglamyi[i];
                bz -= o.a * (dellam[i] + dely[i] / diagy[i]) / diaglamyi[i];
            }
            for j in 0..n {
                let mut bx = delx[j];
                let mut axz = 0.0;
                for i in 0..m {
                    let dli = (dellam[i] + dely[i] / diagy[i]) / diaglamyi[i];
                    bx += gg[i * n + j] * dli;
                    axz -= gg[i * n + j] * o.a / diaglamyi[i];
                }
                bb[j] = -bx;
                aa[(j, n)] = axz;
                aa[(n, j)] = axz;
                for k in 0..n {
                    let mut dot = 0.0;
                    for i in 0..m {
                        dot += gg[i * n + j] * gg[i * n + k] / diaglamyi[i];
                    }
                    aa[(j, k)] = dot + if j == k { diagx[j] } else { 0.0 };
                }
            }
            aa[(n, n)] = azz;
            bb[n] = -bz;
            let sol = aa
                .lu()
                .solve(&bb)
                .ok_or_else(|| TopoError::Optimizer("singular interior-point system".into()))?;
            for j in 0..n {
                dx[j] = sol[j];
            }
            dz = sol[n];
            for i in 0..m {
                let mut gdx = 0.0;
                for j in 0..n {
                    gdx += gg[i * n + j] * dx[j];
                }
                dlam[i] = gdx / diaglamyi[i] - dz * o.a / diaglamyi[i]
                    + (dellam[i] + dely[i] / diagy[i]) / diaglamyi[i];
            }
        }

        let mut dy = vec![0.0; m];
        let mut dmu = vec![0.0; m];
        let mut ds = vec![0.0; m];
        for i in 0..m {
            dy[i] = -dely[i] / diagy[i] + dlam[i] / diagy[i];
            dmu[i] = -w.mu[i] + epsi / w.y[i] - w.mu[i] * dy[i] / w.y[i];
            ds[i] = -w.s[i] + epsi / w.lam[i] - w.s[i] * dlam[i] / w.lam[i];
        }
        let mut dxsi = vec![0.0; n];
        let mut deta = vec![0.0; n];
        for j in 0..n {
            dxsi[j] = -w.xsi[j] + epsi / (w.x[j] - self.alfa[j])
                - w.xsi[j] * dx[j] / (w.x[j] - self.alfa[j]);
            deta[j] = -w.eta[j] + epsi / (self.beta[j] - w.x[j])
                + w.eta[j] * dx[j] / (self.beta[j] - w.x[j]);
        }
        let dzet = -w.zet + epsi / w.z - w.zet * dz / w.z;

        // Fractional-to-boundary step bound.
        let mut stminv = 1.0f64;
        for i in 0..m {
            stminv = stminv
                .max(-1.01 * dy[i] / w.y[i])
                .max(-1.01 * dlam[i] / w.lam[i])
                .max(-1.01 * dmu[i] / w.mu[i])
                .max(-1.01 * ds[i] / w.s[i]);
        }
        stminv = stminv.max(-1.01 * dz / w.z).max(-1.01 * dzet / w.zet);
        for j in 0..n {
            stminv = stminv
                .max(-1.01 * dxsi[j] / w.xsi[j])
                .max(-1.01 * deta[j] / w.eta[j])
                .max(-1.01 * dx[j] / (w.x[j] - self.alfa[j]))
                .max(1.01 * dx[j] / (self.beta[j] - w.x[j]));
        }
        let mut steg = 1.0 / stminv;

        // Backtracking until the residual norm does not increase.
        let old = w.clone();
        let mut result = (2.0 * residunorm, f64::INFINITY);
        let mut tries = 0;
        while result.0 > residunorm && tries < 50 {
            tries += 1;
            for j in 0..n {
                w.x[j] = old.x[j] + steg * dx[j];
                w.xsi[j] = old.xsi[j] + steg * dxsi[j];
                w.eta[j] = old.eta[j] + steg * deta[j];
            }
            for i in 0..m {
                w.y[i] = old.y[i] + steg * dy[i];
                w.lam[i] = old.lam[i] + steg * dlam[i];
                w.mu[i] = old.mu[i] + steg * dmu[i];
                w.s[i] = old.s[i] + steg * ds[i];
            }
            w.z = old.z + steg * dz;
            w.zet = old.zet + steg * dzet;
            result = self.residuals(w, epsi);
            steg *= 0.5;
        }
        Ok(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// min x^2 subject to 0.5 - x <= 0 on [0, 1]: optimum at x = 0.5.
    #[test]
    fn scalar_toy_problem_converges_to_the_constrained_optimum() {
        let mut state = MmaState::new(1, 1, MmaOptions::default()).unwrap();
        let mut x = vec![1.0];
        for _ in 0..30 {
            let step = state
                .update(
                    &x,
                    &[0.0],
                    &[1.0],
                    &[2.0 * x[0]],
                    &[0.5 - x[0]],
                    &[-1.0],
                )
                .unwrap();
            assert!(step.kkt_residual <= 1e-7);
            assert!(step.x[0] >= step.alfa[0] && step.x[0] <= step.beta[0]);
            x = step.x;
        }
        assert!((x[0] - 0.5).abs() <= 1e-4, "x = {}", x[0]);
    }

    /// min sum (x - 0.6)^2 subject to mean(x) <= 0.4: optimum at x = 0.4.
    #[test]
    fn vector_toy_problem_exercises_the_elimination_branch() {
        let n = 3;
        let mut state = MmaState::new(n, 1, MmaOptions::default()).unwrap();
        let mut x = vec![0.8, 0.1, 0.5];
        for _ in 0..40 {
            let df0: Vec<f64> = x.iter().map(|&v| 2.0 * (v - 0.6)).collect();
            let mean = x.iter().sum::<f64>() / n as f64;
            let dfdx = vec![1.0 / n as f64; n];
            let step = state
                .update(&x, &[0.0; 3], &[1.0; 3], &df0, &[mean - 0.4], &dfdx)
                .unwrap();
            assert!(step.kkt_residual <= 1e-7);
            x = step.x;
        }
        for &v in &x {
            assert!((v - 0.4).abs() <= 1e-3, "x = {x:?}");
        }
    }

    #[test]
    fn first_step_uses_the_initial_asymptote_fractions() {
        let mut state = MmaState::new(2, 1, MmaOptions::default()).unwrap();
        let x = vec![0.4, 0.7];
        state
            .update(&x, &[0.0; 2], &[1.0; 2], &[1.0, -1.0], &[0.0], &[1.0, 1.0])
            .unwrap();
        let (low, upp) = state.asymptotes();
        assert_eq!(low, &[0.4 - 0.5, 0.7 - 0.5]);
        assert_eq!(upp, &[0.4 + 0.5, 0.7 + 0.5]);
    }

    #[test]
    fn outputs_stay_strictly_inside_the_asymptotes() {
        let mut state = MmaState::new(4, 1, MmaOptions::default()).unwrap();
        let mut x = vec![0.2, 0.9, 0.5, 0.05];
        for k in 0..10 {
            // An adversarial oscillating gradient.
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let df0: Vec<f64> = x.iter().map(|&v| sign * (1.0 + v)).collect();
            let mean = x.iter().sum::<f64>() / 4.0;
            let step = state
                .update(&x, &[0.0; 4], &[1.0; 4], &df0, &[mean - 0.5], &[0.25; 4])
                .unwrap();
            let (low, upp) = state.asymptotes();
            for j in 0..4 {
                assert!(low[j] < step.alfa[j]);
                assert!(step.beta[j] < upp[j]);
                assert!(step.x[j] >= step.alfa[j] && step.x[j] <= step.beta[j]);
            }
            x = step.x;
        }
    }

    #[test]
    fn constructor_and_update_reject_bad_shapes() {
        assert!(MmaState::new(0, 1, MmaOptions::default()).is_err());
        let mut state = MmaState::new(2, 1, MmaOptions::default()).unwrap();
        assert!(state
            .update(&[0.5], &[0.0; 2], &[1.0; 2], &[0.0; 2], &[0.0], &[0.0; 2])
            .is_err());
        assert!(state
            .update(
                &[0.5; 2],
                &[0.0; 2],
                &[1.0; 2],
                &[0.0; 2],
                &[0.0],
                &[0.0; 3]
            )
            .is_err());
    }
}
