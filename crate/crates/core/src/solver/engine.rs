//! Generic log-barrier machinery over linear inequality rows.
//!
//! Minimizes a smooth objective subject to `A y <= b` by centering
//! `phi_t(y) = f(y) + (1/t) * sum_i -ln(b_i - a_i y)` with damped Newton
//! steps (gradient fallback when the Hessian is not positive definite) and
//! growing `t` until the barrier gap `rows/t` meets the outer tolerance.
//! Every accepted iterate is strictly feasible.

use crate::linalg::{cholesky_solve, dot, norm2, Matrix};

use super::continuous::BarrierSettings;

/// What a constraint row means, for multiplier extraction and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RowKind {
    /// `(Kx)_r >= d_r - mu_r`, stored as `-Kx <= -(d - mu)`.
    DemandLower(usize),
    /// `(Kx)_r <= d_r + g_r`.
    WasteUpper(usize),
    /// `x_i >= lo_i` (free-variable index).
    VarLower(usize),
    /// `x_i <= hi_i` (free-variable index).
    VarUpper(usize),
    /// Auxiliary nonnegativity in the deviation split (`u_i >= 0`, `v_i >= 0`).
    AuxNonNeg,
    /// `sum(u + v) <= delta` budget row of the deviation split.
    DeviationBudget,
    /// Phase-one auxiliary rows.
    Auxiliary,
}

/// Linear inequality system `a y <= b` with row annotations.
#[derive(Debug, Clone)]
pub(crate) struct Rows {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub kinds: Vec<RowKind>,
}

impl Rows {
    pub fn from_parts(rows: Vec<(Vec<f64>, f64, RowKind)>, dim: usize) -> Self {
        let mut b = Vec::with_capacity(rows.len());
        let mut kinds = Vec::with_capacity(rows.len());
        let mut coeff = Vec::with_capacity(rows.len());
        for (a, bi, kind) in rows {
            assert_eq!(a.len(), dim);
            coeff.push(a);
            b.push(bi);
            kinds.push(kind);
        }
        Rows {
            a: Matrix::from_rows(&coeff),
            b,
            kinds,
        }
    }

    pub fn len(&self) -> usize {
        self.b.len()
    }

    pub fn slacks(&self, y: &[f64]) -> Vec<f64> {
        let ay = self.a.mul_vec(y);
        self.b.iter().zip(&ay).map(|(b, v)| b - v).collect()
    }

    /// Largest violation `a_i y - b_i` and its row index (0 for empty rows).
    pub fn max_violation(&self, y: &[f64]) -> (f64, usize) {
        let mut worst = f64::NEG_INFINITY;
        let mut idx = 0;
        if self.len() == 0 {
            return (f64::NEG_INFINITY, 0);
        }
        let ay = self.a.mul_vec(y);
        for (i, (v, b)) in ay.iter().zip(&self.b).enumerate() {
            let viol = v - b;
            if viol > worst {
                worst = viol;
                idx = i;
            }
        }
        (worst, idx)
    }

    pub fn strictly_feasible(&self, y: &[f64], margin: f64) -> bool {
        self.len() == 0 || self.max_violation(y).0 < -margin
    }
}

/// Smooth objective for the barrier engine.
pub(crate) trait SmoothObjective {
    fn eval(&self, y: &[f64]) -> f64;
    fn grad(&self, y: &[f64]) -> Vec<f64>;
    fn hess(&self, y: &[f64]) -> Matrix;
}

/// Linear objective `coeffs . y`, used by the phase-one subproblem.
pub(crate) struct LinearObjective {
    pub coeffs: Vec<f64>,
}

impl SmoothObjective for LinearObjective {
    fn eval(&self, y: &[f64]) -> f64 {
        dot(&self.coeffs, y)
    }
    fn grad(&self, _y: &[f64]) -> Vec<f64> {
        self.coeffs.clone()
    }
    fn hess(&self, _y: &[f64]) -> Matrix {
        Matrix::zeros(self.coeffs.len(), self.coeffs.len())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct BarrierOutcome {
    pub y: Vec<f64>,
    pub t_final: f64,
    /// `1 / (t_final * slack_i)` per row.
    pub row_multipliers: Vec<f64>,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    /// Final centering reached the inner tolerance and the barrier gap met
    /// the outer tolerance.
    pub converged: bool,
    pub trace: Vec<f64>,
}

pub(crate) struct BarrierRun<'a> {
    pub obj: &'a dyn SmoothObjective,
    pub rows: &'a Rows,
    pub settings: &'a BarrierSettings,
    pub want_trace: bool,
    /// Checked after each accepted step; returning true ends the run.
    pub stop_early: Option<&'a dyn Fn(&[f64]) -> bool>,
}

/// Runs the outer barrier loop from the strictly feasible `y0`.
pub(crate) fn barrier_minimize(run: &BarrierRun<'_>, y0: Vec<f64>) -> BarrierOutcome {
    let s = run.settings;
    let rows = run.rows;
    let m_ineq = rows.len() as f64;
    debug_assert!(
        rows.strictly_feasible(&y0, 0.0),
        "barrier start must be strictly feasible"
    );

    let mut y = y0;
    let mut t = s.t_initial;
    let mut outer = 0usize;
    let mut inner_total = 0usize;
    let mut centered = false;
    let mut trace = Vec::new();

    let phi = |y: &[f64], t: f64| -> f64 {
        let mut v = run.obj.eval(y);
        for slack in rows.slacks(y) {
            if slack <= 0.0 {
                return f64::INFINITY;
            }
            v -= slack.ln() / t;
        }
        v
    };

    'outer: for outer_idx in 0..s.max_outer_iters {
        outer = outer_idx + 1;
        centered = false;
        for _ in 0..s.max_inner_iters {
            let slacks = rows.slacks(&y);
            let mut grad = run.obj.grad(&y);
            let weights: Vec<f64> = slacks.iter().map(|sl| 1.0 / (t * sl)).collect();
            for (g, v) in grad.iter_mut().zip(rows.a.tr_mul_vec(&weights)) {
                *g += v;
            }
            if norm2(&grad) <= s.inner_tolerance {
                centered = true;
                break;
            }

            let mut hess = run.obj.hess(&y);
            let hw: Vec<f64> = slacks.iter().map(|sl| 1.0 / (t * sl * sl)).collect();
            hess.add_tr_diag_mul(&rows.a, &hw, 1.0);

            let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
            // Indefinite curvature (alpha > 0 regime): damp the Hessian with
            // an escalating ridge; the direction degrades continuously
            // toward the gradient as the ridge grows and stays a descent
            // direction throughout.
            let dim = y.len();
            let mut dir = match cholesky_solve(&hess, &neg_grad) {
                Some(d) => d,
                None => {
                    let diag_scale = (0..dim).fold(1.0f64, |m, i| m.max(hess.get(i, i).abs()));
                    let mut ridge = 1e-10 * diag_scale;
                    let mut damped_dir = None;
                    for _ in 0..30 {
                        let mut damped = hess.clone();
                        for i in 0..dim {
                            damped.add_at(i, i, ridge);
                        }
                        if let Some(d) = cholesky_solve(&damped, &neg_grad) {
                            damped_dir = Some(d);
                            break;
                        }
                        ridge *= 10.0;
                    }
                    damped_dir.unwrap_or_else(|| neg_grad.clone())
                }
            };
            let mut dd = dot(&grad, &dir);
            if dd >= 0.0 {
                dir = neg_grad.clone();
                dd = -dot(&grad, &grad);
            }
            if dd >= -1e-300 {
                centered = true;
                break;
            }

            // Largest step keeping strict feasibility.
            let a_dir = rows.a.mul_vec(&dir);
            let mut alpha = 1.0f64;
            for (ad, sl) in a_dir.iter().zip(&slacks) {
                if *ad > 0.0 {
                    alpha = alpha.min(0.99 * sl / ad);
                }
            }

            let phi0 = phi(&y, t);
            let noise = 8.0 * f64::EPSILON * (1.0 + phi0.abs());
            if -dd <= noise {
                // The predicted decrease is below representable precision;
                // take the capped step if it does not raise the barrier
                // objective beyond rounding noise, and call the centering
                // done either way.
                let trial: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
                if phi(&trial, t) <= phi0 + noise {
                    y = trial;
                    inner_total += 1;
                }
                centered = true;
                break;
            }
            let mut accepted = false;
            while alpha >= 1e-16 {
                let trial: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + alpha * d).collect();
                if phi(&trial, t) <= phi0 + s.armijo_c * alpha * dd {
                    y = trial;
                    accepted = true;
                    break;
                }
                alpha *= s.backtrack_factor;
            }
            if !accepted {
                // Line search stalled at machine precision; treat the point
                // as centered for this t.
                centered = true;
                break;
            }
            inner_total += 1;
            if run.want_trace {
                trace.push(run.obj.eval(&y));
            }
            if let Some(stop) = run.stop_early {
                if stop(&y) {
                    let slacks = rows.slacks(&y);
                    return BarrierOutcome {
                        row_multipliers: slacks.iter().map(|sl| 1.0 / (t * sl)).collect(),
                        y,
                        t_final: t,
                        outer_iterations: outer,
                        inner_iterations: inner_total,
                        converged: true,
                        trace,
                    };
                }
            }
        }

        if m_ineq / t <= s.outer_tolerance {
            break 'outer;
        }
        t *= s.t_growth;
    }

    let gap_ok = m_ineq == 0.0 || m_ineq / t <= s.outer_tolerance;
    let slacks = rows.slacks(&y);
    BarrierOutcome {
        row_multipliers: slacks.iter().map(|sl| 1.0 / (t * sl)).collect(),
        y,
        t_final: t,
        outer_iterations: outer,
        inner_iterations: inner_total,
        converged: centered && gap_ok,
        trace,
    }
}

#[derive(Debug, Clone)]
pub(crate) enum PhaseOneResult {
    /// A strictly feasible point for the relaxed rows (kept rows remain
    /// strictly satisfied throughout).
    Feasible { y: Vec<f64>, iterations: usize },
    /// The closed set may be nonempty but the strict interior is (numerically)
    /// empty; `min_violation` is within tolerance of zero.
    EmptyInterior {
        min_violation: f64,
        worst_row: usize,
        iterations: usize,
    },
    /// Provably no feasible point: minimized max-violation stays positive.
    Infeasible {
        min_violation: f64,
        worst_row: usize,
    },
}

/// Finds a strictly feasible point for `relaxed` (while keeping `kept`
/// strictly satisfied) by minimizing the max violation through an
/// auxiliary-slack barrier problem. `y0` must strictly satisfy `kept`.
pub(crate) fn phase_one_search(
    relaxed: &Rows,
    kept: &Rows,
    y0: &[f64],
    settings: &BarrierSettings,
) -> PhaseOneResult {
    let dim = y0.len();
    let scale = relaxed.b.iter().fold(1.0f64, |m, b| m.max(b.abs()));
    let feasible_margin = 1e-6 * scale;
    let empty_interior_tol = 10.0 * settings.outer_tolerance * scale;

    debug_assert!(
        kept.strictly_feasible(y0, 0.0),
        "phase one start violates kept rows"
    );

    let (viol0, _) = relaxed.max_violation(y0);
    if relaxed.len() == 0 || viol0 < -feasible_margin {
        return PhaseOneResult::Feasible {
            y: y0.to_vec(),
            iterations: 0,
        };
    }

    // Augment with the slack variable s: relaxed rows become a y - s <= b.
    let mut aug = Vec::with_capacity(relaxed.len() + kept.len());
    for i in 0..relaxed.len() {
        let mut row = relaxed.a.row(i).to_vec();
        row.push(-1.0);
        aug.push((row, relaxed.b[i], RowKind::Auxiliary));
    }
    for i in 0..kept.len() {
        let mut row = kept.a.row(i).to_vec();
        row.push(0.0);
        aug.push((row, kept.b[i], kept.kinds[i]));
    }
    let aug_rows = Rows::from_parts(aug, dim + 1);

    let mut coeffs = vec![0.0; dim + 1];
    coeffs[dim] = 1.0;
    let obj = LinearObjective { coeffs };

    let mut y0_aug = y0.to_vec();
    y0_aug.push(viol0.max(0.0) + 1.0);

    let stop =
        |y_aug: &[f64]| -> bool { relaxed.max_violation(&y_aug[..dim]).0 < -feasible_margin };
    let run = BarrierRun {
        obj: &obj,
        rows: &aug_rows,
        settings,
        want_trace: false,
        stop_early: Some(&stop),
    };
    let outcome = barrier_minimize(&run, y0_aug);
    let y_final: Vec<f64> = outcome.y[..dim].to_vec();
    let (viol, worst) = relaxed.max_violation(&y_final);
    let iterations = outcome.inner_iterations;

    if viol < 0.0 {
        PhaseOneResult::Feasible {
            y: y_final,
            iterations,
        }
    } else if viol <= empty_interior_tol {
        PhaseOneResult::EmptyInterior {
            min_violation: viol,
            worst_row: worst,
            iterations,
        }
    } else {
        PhaseOneResult::Infeasible {
            min_violation: viol,
            worst_row: worst,
        }
    }
}
