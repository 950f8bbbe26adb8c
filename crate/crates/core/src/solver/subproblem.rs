//! Box-restricted reductions of the allocation problem.
//!
//! Both solvers funnel through this layer. A `SubProblem` fixes the
//! variables whose box bounds coincide, substitutes their contribution into
//! demand and provider totals, and exposes the reduced smooth objective
//! plus its linear constraint rows. The consolidation term can be swapped
//! for its secant (chord) so branch-and-bound nodes get convex
//! underestimators, and the `l1` deviation bound is realized by the
//! standard `x - x_current = u - v` split in a lifted variable space.

use crate::error::{Error, InfeasibilityReport, Result};
use crate::linalg::{dot, norm1, Matrix};
use crate::model::AllocationProblem;

use super::continuous::BarrierSettings;
use super::engine::{
    barrier_minimize, phase_one_search, BarrierOutcome, BarrierRun, PhaseOneResult, RowKind, Rows,
    SmoothObjective,
};

/// How the provider-consolidation term enters the subproblem objective.
#[derive(Debug, Clone)]
pub(crate) enum ConsolidationForm {
    /// The exact term `alpha * sum_j (1 - exp(-beta1 z_j))`.
    Exact,
    /// Per-provider chords over the box's attainable `z_j` range; the chord
    /// of a concave function lies below it, so minimizing the secant form
    /// yields a valid lower bound.
    Secant { slope: Vec<f64>, intercept: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum SubMode {
    /// Hard `d - mu <= Kx <= d + g` rows.
    Barrier,
    /// Waste rows dropped into a mirrored quadratic penalty (empty strict
    /// interior fallback).
    Penalty,
    /// Both constraint families soft; only the box remains hard. Reached
    /// when even the penalty-mode interior is empty.
    PenaltyBoth,
}

#[derive(Debug)]
pub(crate) enum SubBuild<'a> {
    /// All variables fixed by the box; the composed full-length point.
    Point(Vec<f64>),
    Sub(SubProblem<'a>),
    /// The box (or deviation budget) admits no point at all.
    Infeasible(InfeasibilityReport),
}

#[derive(Debug, Clone)]
struct Deviation {
    cur_free: Vec<f64>,
    budget: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct SubProblem<'a> {
    problem: &'a AllocationProblem,
    /// Free catalog indices, ascending.
    pub free: Vec<usize>,
    /// Full-length vector holding the fixed values (free slots are zero).
    x_fixed_full: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    kf: Matrix,
    ef: Matrix,
    cf: Vec<f64>,
    /// `(d - mu) - K x_fixed` per resource.
    d_lower: Vec<f64>,
    /// `(d + g) - K x_fixed` per resource.
    d_upper: Vec<f64>,
    /// `d - K x_fixed` per resource (shortage hinge argument).
    d_short: Vec<f64>,
    z_fix: Vec<f64>,
    cost_fix: f64,
    consolidation: ConsolidationForm,
    deviation: Option<Deviation>,
}

impl<'a> SubProblem<'a> {
    /// Reduces `problem` to the box `[lo, hi]` (full-length, whole-valued
    /// bounds). With `secant = true` the consolidation term is replaced by
    /// its chord over the box.
    pub fn build(
        problem: &'a AllocationProblem,
        lo_full: &[f64],
        hi_full: &[f64],
        secant: bool,
    ) -> SubBuild<'a> {
        let n = problem.n();
        assert_eq!(lo_full.len(), n);
        assert_eq!(hi_full.len(), n);
        for i in 0..n {
            if lo_full[i] > hi_full[i] {
                return SubBuild::Infeasible(InfeasibilityReport {
                    most_violated: format!("empty box for instance {i}"),
                    min_violation: lo_full[i] - hi_full[i],
                    empty_interior: false,
                });
            }
        }

        let lo = lo_full.to_vec();
        let mut hi = hi_full.to_vec();

        // Tighten: a resource already at its waste cap forces every variable
        // that provides it down to its lower bound. Valid for the continuous
        // set because K >= 0.
        let k = problem.k();
        loop {
            let mut k_lo = vec![0.0; problem.m()];
            for r in 0..problem.m() {
                for i in 0..n {
                    k_lo[r] += k.get(r, i) * lo[i];
                }
            }
            let mut changed = false;
            for r in 0..problem.m() {
                let slack = problem.demand()[r] + problem.waste()[r] - k_lo[r];
                if slack < -1e-9 {
                    return SubBuild::Infeasible(InfeasibilityReport {
                        most_violated: format!(
                            "waste cap on resource {:?} exceeded by box lower bounds",
                            problem.catalog().schema.names[r]
                        ),
                        min_violation: -slack,
                        empty_interior: false,
                    });
                }
                if slack <= 1e-9 {
                    for i in 0..n {
                        if k.get(r, i) > 0.0 && hi[i] > lo[i] {
                            hi[i] = lo[i];
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let free: Vec<usize> = (0..n).filter(|&i| lo[i] < hi[i]).collect();
        let mut x_fixed_full = vec![0.0; n];
        for i in 0..n {
            if lo[i] >= hi[i] {
                x_fixed_full[i] = lo[i];
            }
        }

        // Deviation budget remaining after the fixed coordinates spend theirs.
        let deviation = match (problem.current(), problem.max_deviation()) {
            (Some(cur), Some(dmax)) => {
                let spent: f64 = (0..n)
                    .filter(|i| !free.contains(i))
                    .map(|i| (x_fixed_full[i] - cur.counts[i]).abs())
                    .sum();
                let budget = dmax - spent;
                if budget < -1e-12 {
                    return SubBuild::Infeasible(InfeasibilityReport {
                        most_violated: "l1 deviation budget exhausted by fixed variables".into(),
                        min_violation: -budget,
                        empty_interior: false,
                    });
                }
                Some((cur, budget))
            }
            _ => None,
        };

        if let Some((cur, budget)) = &deviation {
            if *budget <= 1e-12 {
                // Free coordinates are pinned to the current allocation.
                let mut x = x_fixed_full.clone();
                for &i in &free {
                    let v = cur.counts[i];
                    if v < lo[i] - 1e-9 || v > hi[i] + 1e-9 {
                        return SubBuild::Infeasible(InfeasibilityReport {
                            most_violated: format!(
                                "current count for instance {i} lies outside the node box"
                            ),
                            min_violation: (v - hi[i]).max(lo[i] - v),
                            empty_interior: false,
                        });
                    }
                    x[i] = v;
                }
                return SubBuild::Point(x);
            }
        }

        if free.is_empty() {
            return SubBuild::Point(x_fixed_full);
        }

        let m = problem.m();
        let p = problem.p();
        let nf = free.len();
        let mut kf = Matrix::zeros(m, nf);
        let mut ef = Matrix::zeros(p, nf);
        let mut cf = vec![0.0; nf];
        for (col, &i) in free.iter().enumerate() {
            for r in 0..m {
                kf.set(r, col, k.get(r, i));
            }
            for j in 0..p {
                ef.set(j, col, problem.e().get(j, i));
            }
            cf[col] = problem.cost()[i];
        }
        let k_fix = k.mul_vec(&x_fixed_full);
        let z_fix = problem.e().mul_vec(&x_fixed_full);
        let cost_fix = dot(problem.cost(), &x_fixed_full);
        let d_lower: Vec<f64> = (0..m)
            .map(|r| problem.demand()[r] - problem.uncertainty()[r] - k_fix[r])
            .collect();
        let d_upper: Vec<f64> = (0..m)
            .map(|r| problem.demand()[r] + problem.waste()[r] - k_fix[r])
            .collect();
        let d_short: Vec<f64> = (0..m).map(|r| problem.demand()[r] - k_fix[r]).collect();

        // A positive lower requirement no free column can serve is a
        // constant-infeasible row (it would otherwise vanish from the
        // barrier as an all-zero row).
        for r in 0..m {
            if d_lower[r] > 1e-12 && (0..nf).all(|c| kf.get(r, c) == 0.0) {
                return SubBuild::Infeasible(InfeasibilityReport {
                    most_violated: format!(
                        "resource {:?} demand cannot be covered by the admissible instances",
                        problem.catalog().schema.names[r]
                    ),
                    min_violation: d_lower[r],
                    empty_interior: false,
                });
            }
        }

        let params = problem.params();
        let consolidation = if secant {
            let z_lo = problem.e().mul_vec(&lo);
            let z_hi = problem.e().mul_vec(&hi);
            let h = |z: f64| params.alpha * (1.0 - (-params.beta1 * z).exp());
            let mut slope = vec![0.0; p];
            let mut intercept = 0.0;
            for j in 0..p {
                let (a, b) = (z_lo[j], z_hi[j]);
                let s = if b - a > 1e-12 {
                    (h(b) - h(a)) / (b - a)
                } else {
                    0.0
                };
                slope[j] = s;
                intercept += h(a) - s * a;
            }
            ConsolidationForm::Secant { slope, intercept }
        } else {
            ConsolidationForm::Exact
        };

        let lo_free: Vec<f64> = free.iter().map(|&i| lo[i]).collect();
        let hi_free: Vec<f64> = free.iter().map(|&i| hi[i]).collect();
        let deviation = deviation.map(|(cur, budget)| Deviation {
            cur_free: free.iter().map(|&i| cur.counts[i]).collect(),
            budget,
        });

        SubBuild::Sub(SubProblem {
            problem,
            free,
            x_fixed_full,
            lo: lo_free,
            hi: hi_free,
            kf,
            ef,
            cf,
            d_lower,
            d_upper,
            d_short,
            z_fix,
            cost_fix,
            consolidation,
            deviation,
        })
    }

    pub fn num_free(&self) -> usize {
        self.free.len()
    }

    /// Composes a full-length allocation from free-space counts.
    pub fn compose(&self, x_free: &[f64]) -> Vec<f64> {
        let mut x = self.x_fixed_full.clone();
        for (col, &i) in self.free.iter().enumerate() {
            x[i] = x_free[col];
        }
        x
    }

    fn z(&self, x_free: &[f64]) -> Vec<f64> {
        let mut z = self.ef.mul_vec(x_free);
        for (zj, fixed) in z.iter_mut().zip(&self.z_fix) {
            *zj += fixed;
        }
        z
    }

    /// Objective value in free space (includes the fixed-variable offsets,
    /// so values are comparable across nodes and to full evaluations).
    fn value(&self, x_free: &[f64], mode: SubMode) -> f64 {
        let params = self.problem.params();
        let z = self.z(x_free);
        let kxf = self.kf.mul_vec(x_free);
        let mut v = self.cost_fix + dot(&self.cf, x_free);
        match &self.consolidation {
            ConsolidationForm::Exact => {
                for zj in &z {
                    v += params.alpha * (1.0 - (-params.beta1 * zj).exp());
                }
            }
            ConsolidationForm::Secant { slope, intercept } => {
                v += intercept;
                for (zj, s) in z.iter().zip(slope) {
                    v += s * zj;
                }
            }
        }
        for zj in &z {
            v -= params.gamma * (1.0 + params.beta2 * zj).ln();
        }
        for (ds, kv) in self.d_short.iter().zip(&kxf) {
            let gap = ds - kv;
            if gap > 0.0 {
                v += params.beta3 * gap * gap;
            }
        }
        if mode != SubMode::Barrier {
            for (du, kv) in self.d_upper.iter().zip(&kxf) {
                let over = kv - du;
                if over > 0.0 {
                    v += params.beta3 * over * over;
                }
            }
        }
        if mode == SubMode::PenaltyBoth {
            for (dl, kv) in self.d_lower.iter().zip(&kxf) {
                let under = dl - kv;
                if under > 0.0 {
                    v += params.beta3 * under * under;
                }
            }
        }
        v
    }

    fn grad(&self, x_free: &[f64], mode: SubMode) -> Vec<f64> {
        let params = self.problem.params();
        let z = self.z(x_free);
        let kxf = self.kf.mul_vec(x_free);
        let mut g = self.cf.clone();
        match &self.consolidation {
            ConsolidationForm::Exact => {
                let w: Vec<f64> = z
                    .iter()
                    .map(|zj| params.alpha * params.beta1 * (-params.beta1 * zj).exp())
                    .collect();
                for (gi, v) in g.iter_mut().zip(self.ef.tr_mul_vec(&w)) {
                    *gi += v;
                }
            }
            ConsolidationForm::Secant { slope, .. } => {
                for (gi, v) in g.iter_mut().zip(self.ef.tr_mul_vec(slope)) {
                    *gi += v;
                }
            }
        }
        let w: Vec<f64> = z
            .iter()
            .map(|zj| params.gamma * params.beta2 / (1.0 + params.beta2 * zj))
            .collect();
        for (gi, v) in g.iter_mut().zip(self.ef.tr_mul_vec(&w)) {
            *gi -= v;
        }
        let w: Vec<f64> = self
            .d_short
            .iter()
            .zip(&kxf)
            .map(|(ds, kv)| if ds > kv { ds - kv } else { 0.0 })
            .collect();
        for (gi, v) in g.iter_mut().zip(self.kf.tr_mul_vec(&w)) {
            *gi -= 2.0 * params.beta3 * v;
        }
        if mode != SubMode::Barrier {
            let w: Vec<f64> = self
                .d_upper
                .iter()
                .zip(&kxf)
                .map(|(du, kv)| if kv > du { kv - du } else { 0.0 })
                .collect();
            for (gi, v) in g.iter_mut().zip(self.kf.tr_mul_vec(&w)) {
                *gi += 2.0 * params.beta3 * v;
            }
        }
        if mode == SubMode::PenaltyBoth {
            let w: Vec<f64> = self
                .d_lower
                .iter()
                .zip(&kxf)
                .map(|(dl, kv)| if dl > kv { dl - kv } else { 0.0 })
                .collect();
            for (gi, v) in g.iter_mut().zip(self.kf.tr_mul_vec(&w)) {
                *gi -= 2.0 * params.beta3 * v;
            }
        }
        g
    }

    fn hess(&self, x_free: &[f64], mode: SubMode) -> Matrix {
        let params = self.problem.params();
        let nf = self.num_free();
        let z = self.z(x_free);
        let kxf = self.kf.mul_vec(x_free);
        let mut h = Matrix::zeros(nf, nf);
        if let ConsolidationForm::Exact = self.consolidation {
            let w: Vec<f64> = z
                .iter()
                .map(|zj| -params.alpha * params.beta1 * params.beta1 * (-params.beta1 * zj).exp())
                .collect();
            h.add_tr_diag_mul(&self.ef, &w, 1.0);
        }
        let w: Vec<f64> = z
            .iter()
            .map(|zj| {
                let den = 1.0 + params.beta2 * zj;
                params.gamma * params.beta2 * params.beta2 / (den * den)
            })
            .collect();
        h.add_tr_diag_mul(&self.ef, &w, 1.0);
        let w: Vec<f64> = self
            .d_short
            .iter()
            .zip(&kxf)
            .map(|(ds, kv)| if ds > kv { 1.0 } else { 0.0 })
            .collect();
        h.add_tr_diag_mul(&self.kf, &w, 2.0 * params.beta3);
        if mode != SubMode::Barrier {
            let w: Vec<f64> = self
                .d_upper
                .iter()
                .zip(&kxf)
                .map(|(du, kv)| if kv > du { 1.0 } else { 0.0 })
                .collect();
            h.add_tr_diag_mul(&self.kf, &w, 2.0 * params.beta3);
        }
        if mode == SubMode::PenaltyBoth {
            let w: Vec<f64> = self
                .d_lower
                .iter()
                .zip(&kxf)
                .map(|(dl, kv)| if dl > kv { 1.0 } else { 0.0 })
                .collect();
            h.add_tr_diag_mul(&self.kf, &w, 2.0 * params.beta3);
        }
        h
    }

    /// Constraint rows in free space for the given mode. Zero rows are
    /// dropped after their constant feasibility is checked by `build`.
    fn plain_rows(&self, mode: SubMode) -> Rows {
        let nf = self.num_free();
        let mut rows = Vec::new();
        if mode == SubMode::Barrier || mode == SubMode::Penalty {
            for r in 0..self.problem.m() {
                if self.d_lower[r] > 0.0 {
                    let coeff: Vec<f64> = (0..nf).map(|c| -self.kf.get(r, c)).collect();
                    if coeff.iter().any(|v| *v != 0.0) {
                        rows.push((coeff, -self.d_lower[r], RowKind::DemandLower(r)));
                    }
                }
            }
        }
        if mode == SubMode::Barrier {
            for r in 0..self.problem.m() {
                let coeff: Vec<f64> = (0..nf).map(|c| self.kf.get(r, c)).collect();
                if coeff.iter().any(|v| *v != 0.0) {
                    rows.push((coeff, self.d_upper[r], RowKind::WasteUpper(r)));
                }
            }
        }
        for c in 0..nf {
            let mut coeff = vec![0.0; nf];
            coeff[c] = -1.0;
            rows.push((coeff, -self.lo[c], RowKind::VarLower(c)));
        }
        for c in 0..nf {
            let mut coeff = vec![0.0; nf];
            coeff[c] = 1.0;
            rows.push((coeff, self.hi[c], RowKind::VarUpper(c)));
        }
        Rows::from_parts(rows, nf)
    }

    /// Whether some resource makes the strict interior of the hard-waste
    /// rows provably empty (`mu_r + g_r = 0` with an active lower row).
    fn must_use_penalty(&self) -> bool {
        (0..self.problem.m()).any(|r| {
            self.d_lower[r] > 0.0 && self.problem.uncertainty()[r] + self.problem.waste()[r] <= 0.0
        })
    }

    /// Box midpoint (clamped near the lower corner for very wide boxes);
    /// strictly inside the box whenever every free width is positive.
    pub fn box_midpoint(&self) -> Vec<f64> {
        (0..self.num_free())
            .map(|i| self.lo[i] + 0.5 * (self.hi[i] - self.lo[i]).min(2.0))
            .collect()
    }

    /// (kept, relaxed) row split for a hard-constraint phase-one run.
    pub fn plain_rows_for_phase_one(&self) -> (Rows, Rows) {
        split_rows(&self.plain_rows(SubMode::Barrier), self.num_free())
    }

    pub fn describe_row(&self, kind: RowKind) -> String {
        let names = &self.problem.catalog().schema.names;
        match kind {
            RowKind::DemandLower(r) => {
                format!("resource {:?} demand lower bound (Kx >= d - mu)", names[r])
            }
            RowKind::WasteUpper(r) => {
                format!("resource {:?} waste upper bound (Kx <= d + g)", names[r])
            }
            RowKind::VarLower(c) => format!("count lower bound for instance {}", self.free[c]),
            RowKind::VarUpper(c) => format!("count upper bound for instance {}", self.free[c]),
            RowKind::AuxNonNeg => "deviation split nonnegativity".into(),
            RowKind::DeviationBudget => "l1 deviation budget".into(),
            RowKind::Auxiliary => "auxiliary".into(),
        }
    }
}

enum Space {
    Plain,
    /// Variables are `(u, v)` with `x = cur + u - v`.
    Lifted {
        cur: Vec<f64>,
        budget: f64,
    },
}

struct ModeObjective<'a, 'b> {
    sub: &'b SubProblem<'a>,
    mode: SubMode,
}

impl SmoothObjective for ModeObjective<'_, '_> {
    fn eval(&self, y: &[f64]) -> f64 {
        self.sub.value(y, self.mode)
    }
    fn grad(&self, y: &[f64]) -> Vec<f64> {
        self.sub.grad(y, self.mode)
    }
    fn hess(&self, y: &[f64]) -> Matrix {
        self.sub.hess(y, self.mode)
    }
}

struct LiftedObjective<'a, 'b> {
    inner: ModeObjective<'a, 'b>,
    cur: Vec<f64>,
}

impl LiftedObjective<'_, '_> {
    fn x(&self, y: &[f64]) -> Vec<f64> {
        let nf = self.cur.len();
        (0..nf).map(|i| self.cur[i] + y[i] - y[nf + i]).collect()
    }
}

impl SmoothObjective for LiftedObjective<'_, '_> {
    fn eval(&self, y: &[f64]) -> f64 {
        self.inner.eval(&self.x(y))
    }
    fn grad(&self, y: &[f64]) -> Vec<f64> {
        let g = self.inner.grad(&self.x(y));
        let mut out = Vec::with_capacity(2 * g.len());
        out.extend_from_slice(&g);
        out.extend(g.iter().map(|v| -v));
        out
    }
    fn hess(&self, y: &[f64]) -> Matrix {
        let h = self.inner.hess(&self.x(y));
        let nf = self.cur.len();
        let mut big = Matrix::zeros(2 * nf, 2 * nf);
        for i in 0..nf {
            for j in 0..nf {
                let v = h.get(i, j);
                big.set(i, j, v);
                big.set(i, nf + j, -v);
                big.set(nf + i, j, -v);
                big.set(nf + i, nf + j, v);
            }
        }
        big
    }
}

fn lift_rows(plain: &Rows, cur: &[f64], budget: f64, nf: usize) -> Rows {
    let mut rows = Vec::with_capacity(plain.len() + 2 * nf + 1);
    for i in 0..plain.len() {
        let a = plain.a.row(i);
        let mut coeff = Vec::with_capacity(2 * nf);
        coeff.extend_from_slice(a);
        coeff.extend(a.iter().map(|v| -v));
        rows.push((coeff, plain.b[i] - dot(a, cur), plain.kinds[i]));
    }
    for i in 0..2 * nf {
        let mut coeff = vec![0.0; 2 * nf];
        coeff[i] = -1.0;
        rows.push((coeff, 0.0, RowKind::AuxNonNeg));
    }
    rows.push((vec![1.0; 2 * nf], budget, RowKind::DeviationBudget));
    Rows::from_parts(rows, 2 * nf)
}

/// Result of a barrier solve over a subproblem, mapped back to free space.
#[derive(Debug, Clone)]
pub(crate) struct SubSolution {
    pub x_free: Vec<f64>,
    /// Objective value (with fixed offsets), excluding barrier terms.
    pub value: f64,
    pub row_multipliers: Vec<(RowKind, f64)>,
    pub mode: SubMode,
    pub converged: bool,
    pub phase_one_iterations: usize,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub t_final: f64,
    pub num_rows: usize,
    pub trace: Vec<f64>,
}

/// A subproblem with its mode decided and a strictly feasible start found.
pub(crate) struct PreparedSub<'a, 'b> {
    sub: &'b SubProblem<'a>,
    pub mode: SubMode,
    space: Space,
    rows: Rows,
    plain_rows: Rows,
    y_start: Vec<f64>,
    pub phase_one_iterations: usize,
}

/// Runs the mode cascade and phase one, producing a ready-to-solve state.
///
/// Errors with a certified [`InfeasibilityReport`] when even the softest
/// mode has no strictly feasible start (only possible for an empty box,
/// which `build` already rejects, so in practice this reports the hard
/// infeasibility found by phase one).
pub(crate) fn prepare<'a, 'b>(
    sub: &'b SubProblem<'a>,
    settings: &BarrierSettings,
) -> Result<PreparedSub<'a, 'b>> {
    let nf = sub.num_free();
    let mut mode = if sub.must_use_penalty() {
        SubMode::Penalty
    } else {
        SubMode::Barrier
    };
    let mut phase_one_total = 0usize;

    loop {
        let plain = sub.plain_rows(mode);
        match &sub.deviation {
            None => {
                // Midpoint of the box strictly satisfies the kept rows.
                let y0 = sub.box_midpoint();
                let (kept, relaxed) = split_rows(&plain, nf);
                match phase_one_search(&relaxed, &kept, &y0, settings) {
                    PhaseOneResult::Feasible { y, iterations } => {
                        return Ok(PreparedSub {
                            sub,
                            mode,
                            space: Space::Plain,
                            rows: plain.clone(),
                            plain_rows: plain,
                            y_start: y,
                            phase_one_iterations: phase_one_total + iterations,
                        });
                    }
                    PhaseOneResult::EmptyInterior { iterations, .. } => {
                        phase_one_total += iterations;
                        match mode {
                            SubMode::Barrier => mode = SubMode::Penalty,
                            SubMode::Penalty => mode = SubMode::PenaltyBoth,
                            SubMode::PenaltyBoth => unreachable!("box rows have interior"),
                        }
                    }
                    PhaseOneResult::Infeasible {
                        min_violation,
                        worst_row,
                        ..
                    } => {
                        return Err(Error::Infeasible(InfeasibilityReport {
                            most_violated: sub.describe_row(relaxed.kinds[worst_row]),
                            min_violation,
                            empty_interior: false,
                        }));
                    }
                }
            }
            Some(dev) => {
                let rows = lift_rows(&plain, &dev.cur_free, dev.budget, nf);
                // Start at u = v = small positive; every row except the aux
                // nonnegativity and budget may be violated, so relax them all.
                let eps = (dev.budget / (4.0 * nf as f64)).min(0.25);
                let y0 = vec![eps; 2 * nf];
                let (kept, relaxed) = split_lifted_rows(&rows, 2 * nf);
                match phase_one_search(&relaxed, &kept, &y0, settings) {
                    PhaseOneResult::Feasible { y, iterations } => {
                        return Ok(PreparedSub {
                            sub,
                            mode,
                            space: Space::Lifted {
                                cur: dev.cur_free.clone(),
                                budget: dev.budget,
                            },
                            rows,
                            plain_rows: plain,
                            y_start: y,
                            phase_one_iterations: phase_one_total + iterations,
                        });
                    }
                    PhaseOneResult::EmptyInterior { iterations, .. } => {
                        phase_one_total += iterations;
                        match mode {
                            SubMode::Barrier => mode = SubMode::Penalty,
                            SubMode::Penalty => mode = SubMode::PenaltyBoth,
                            SubMode::PenaltyBoth => {
                                // The l1 ball around the current point has a
                                // thin but nonempty interior; treat as
                                // infeasible-for-the-barrier.
                                return Err(Error::Infeasible(InfeasibilityReport {
                                    most_violated: "l1 deviation ball interior".into(),
                                    min_violation: 0.0,
                                    empty_interior: true,
                                }));
                            }
                        }
                    }
                    PhaseOneResult::Infeasible {
                        min_violation,
                        worst_row,
                        ..
                    } => {
                        return Err(Error::Infeasible(InfeasibilityReport {
                            most_violated: sub.describe_row(relaxed.kinds[worst_row]),
                            min_violation,
                            empty_interior: false,
                        }));
                    }
                }
            }
        }
    }
}

/// Box rows stay kept (the midpoint start satisfies them); demand and waste
/// rows are relaxed in phase one.
fn split_rows(plain: &Rows, dim: usize) -> (Rows, Rows) {
    let mut kept = Vec::new();
    let mut relaxed = Vec::new();
    for i in 0..plain.len() {
        let entry = (plain.a.row(i).to_vec(), plain.b[i], plain.kinds[i]);
        match plain.kinds[i] {
            RowKind::VarLower(_) | RowKind::VarUpper(_) => kept.push(entry),
            _ => relaxed.push(entry),
        }
    }
    (Rows::from_parts(kept, dim), Rows::from_parts(relaxed, dim))
}

/// In the lifted space only the `u, v >= 0` rows are satisfied at the
/// canonical start; everything else is relaxed.
fn split_lifted_rows(rows: &Rows, dim: usize) -> (Rows, Rows) {
    let mut kept = Vec::new();
    let mut relaxed = Vec::new();
    for i in 0..rows.len() {
        let entry = (rows.a.row(i).to_vec(), rows.b[i], rows.kinds[i]);
        match rows.kinds[i] {
            RowKind::AuxNonNeg => kept.push(entry),
            _ => relaxed.push(entry),
        }
    }
    (Rows::from_parts(kept, dim), Rows::from_parts(relaxed, dim))
}

impl PreparedSub<'_, '_> {
    /// The phase-one point in free (x) space.
    pub fn canonical_x_free(&self) -> Vec<f64> {
        self.x_from_y(&self.y_start)
    }

    fn x_from_y(&self, y: &[f64]) -> Vec<f64> {
        match &self.space {
            Space::Plain => y.to_vec(),
            Space::Lifted { cur, .. } => {
                let nf = cur.len();
                (0..nf).map(|i| cur[i] + y[i] - y[nf + i]).collect()
            }
        }
    }

    /// Strict feasibility of an x-space point for the active rows (and the
    /// open deviation ball when lifted).
    pub fn strictly_feasible_x(&self, x_free: &[f64]) -> bool {
        if !self.plain_rows.strictly_feasible(x_free, 0.0) {
            return false;
        }
        match &self.space {
            Space::Plain => true,
            Space::Lifted { cur, budget } => {
                let dist: f64 = x_free.iter().zip(cur).map(|(a, b)| (a - b).abs()).sum();
                dist < *budget
            }
        }
    }

    fn y_from_x(&self, x_free: &[f64]) -> Option<Vec<f64>> {
        match &self.space {
            Space::Plain => Some(x_free.to_vec()),
            Space::Lifted { cur, budget } => {
                let nf = cur.len();
                let delta: Vec<f64> = (0..nf).map(|i| x_free[i] - cur[i]).collect();
                let room = budget - norm1(&delta);
                if room <= 0.0 {
                    return None;
                }
                let eps = (room / (4.0 * nf as f64)).min(1e-3);
                let mut y = vec![0.0; 2 * nf];
                for i in 0..nf {
                    y[i] = delta[i].max(0.0) + eps;
                    y[nf + i] = (-delta[i]).max(0.0) + eps;
                }
                Some(y)
            }
        }
    }

    /// Barrier solve from the phase-one start.
    pub fn solve(&self, settings: &BarrierSettings, want_trace: bool) -> SubSolution {
        self.run_barrier(self.y_start.clone(), settings, want_trace)
    }

    /// Barrier solve from a caller-provided strictly feasible x point.
    /// Returns `None` when the point is not strictly feasible.
    pub fn solve_from(
        &self,
        x_free: &[f64],
        settings: &BarrierSettings,
        want_trace: bool,
    ) -> Option<SubSolution> {
        if !self.strictly_feasible_x(x_free) {
            return None;
        }
        let y0 = self.y_from_x(x_free)?;
        if !self.rows.strictly_feasible(&y0, 0.0) {
            return None;
        }
        Some(self.run_barrier(y0, settings, want_trace))
    }

    fn run_barrier(
        &self,
        y0: Vec<f64>,
        settings: &BarrierSettings,
        want_trace: bool,
    ) -> SubSolution {
        let outcome = match &self.space {
            Space::Plain => {
                let obj = ModeObjective {
                    sub: self.sub,
                    mode: self.mode,
                };
                let run = BarrierRun {
                    obj: &obj,
                    rows: &self.rows,
                    settings,
                    want_trace,
                    stop_early: None,
                };
                barrier_minimize(&run, y0)
            }
            Space::Lifted { cur, .. } => {
                let obj = LiftedObjective {
                    inner: ModeObjective {
                        sub: self.sub,
                        mode: self.mode,
                    },
                    cur: cur.clone(),
                };
                let run = BarrierRun {
                    obj: &obj,
                    rows: &self.rows,
                    settings,
                    want_trace,
                    stop_early: None,
                };
                barrier_minimize(&run, y0)
            }
        };
        self.finish(outcome)
    }

    fn finish(&self, outcome: BarrierOutcome) -> SubSolution {
        let x_free = self.x_from_y(&outcome.y);
        let value = self.sub.value(&x_free, self.mode);
        let row_multipliers = self
            .rows
            .kinds
            .iter()
            .zip(&outcome.row_multipliers)
            .map(|(k, m)| (*k, *m))
            .collect();
        SubSolution {
            x_free,
            value,
            row_multipliers,
            mode: self.mode,
            converged: outcome.converged,
            phase_one_iterations: self.phase_one_iterations,
            outer_iterations: outcome.outer_iterations,
            inner_iterations: outcome.inner_iterations,
            t_final: outcome.t_final,
            num_rows: self.rows.len(),
            trace: outcome.trace,
        }
    }
}
