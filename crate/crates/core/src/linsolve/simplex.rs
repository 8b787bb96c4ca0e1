//! Bounded-variable revised simplex with an explicit basis inverse.
//!
//! Phase 1 starts from the all-slack point and drives artificial columns to
//! zero; phase 2 minimizes the true objective. Dantzig pricing switches to
//! Bland's rule once a run of degenerate pivots trips the counter, and the
//! inverse is refactorized periodically and before the optimality claim.

use super::{LinearProgram, LpSolution, LpStatus, Sense};
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Loc {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Free variable resting at zero.
    FreeZero,
}

struct Tableau {
    /// Row count.
    m: usize,
    /// Columns of the augmented system (structurals, slacks, artificials).
    cols: Vec<Vec<(usize, f64)>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    loc: Vec<Loc>,
    /// Basic variable of each row.
    basis: Vec<usize>,
    /// Basis inverse, column-major: entry (r, c) at `binv[c * m + r]`.
    binv: Vec<f64>,
    rhs: Vec<f64>,
    pivots: usize,
    degenerate_run: usize,
    bland: bool,
}

const DEGENERACY_TRIP: usize = 60;
const REFACTOR_EVERY: usize = 128;

enum StepOutcome {
    Optimal,
    Unbounded,
    Stalled,
    Pivoted,
}

impl Tableau {
    fn new(lp: &LinearProgram) -> Tableau {
        let n = lp.n_vars;
        let m = lp.rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                if a != 0.0 {
                    cols[j].push((i, a));
                }
            }
        }
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut x = vec![0.0; n];
        let mut loc = vec![Loc::FreeZero; n];
        for j in 0..n {
            debug_assert!(lower[j] <= upper[j], "variable {j} has crossed bounds");
            if lower[j].is_finite() {
                x[j] = lower[j];
                loc[j] = Loc::AtLower;
            } else if upper[j].is_finite() {
                x[j] = upper[j];
                loc[j] = Loc::AtUpper;
            } else {
                x[j] = 0.0;
                loc[j] = Loc::FreeZero;
            }
        }

        // Slack per row; bounds encode the sense.
        for (i, row) in lp.rows.iter().enumerate() {
            cols.push(vec![(i, 1.0)]);
            let (lo, hi) = match row.sense {
                Sense::Le => (0.0, f64::INFINITY),
                Sense::Ge => (f64::NEG_INFINITY, 0.0),
                Sense::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
            x.push(0.0);
            loc.push(Loc::AtLower);
        }

        // Residual of each row at the initial nonbasic point decides whether
        // the slack can start basic or an artificial is needed.
        let rhs: Vec<f64> = lp.rows.iter().map(|r| r.rhs).collect();
        let mut residual = rhs.clone();
        for j in 0..n {
            if x[j] != 0.0 {
                for &(i, a) in &cols[j] {
                    residual[i] -= a * x[j];
                }
            }
        }
        let mut basis = vec![usize::MAX; m];
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            let slack = n + i;
            let r = residual[i];
            if r >= lower[slack] - tol::FEASIBILITY && r <= upper[slack] + tol::FEASIBILITY {
                x[slack] = r;
                loc[slack] = Loc::Basic(i);
                basis[i] = slack;
                binv[i * m + i] = 1.0;
            } else {
                // Slack pinned at its nearest bound, artificial takes the rest.
                let pin = if r < lower[slack] { lower[slack] } else { upper[slack] };
                x[slack] = pin;
                loc[slack] = if pin == lower[slack] { Loc::AtLower } else { Loc::AtUpper };
                let leftover = r - pin;
                let sigma = if leftover >= 0.0 { 1.0 } else { -1.0 };
                let art = cols.len();
                cols.push(vec![(i, sigma)]);
                lower.push(0.0);
                upper.push(f64::INFINITY);
                x.push(leftover.abs());
                loc.push(Loc::Basic(i));
                basis[i] = art;
                binv[i * m + i] = sigma;
            }
        }

        Tableau {
            m,
            cols,
            lower,
            upper,
            x,
            loc,
            basis,
            binv,
            rhs,
            pivots: 0,
            degenerate_run: 0,
            bland: false,
        }
    }

    fn n_total(&self) -> usize {
        self.cols.len()
    }

    /// y = c_B^T B^{-1} for the given cost vector.
    fn btran(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        let cb: Vec<f64> = self.basis.iter().map(|&j| cost[j]).collect();
        for k in 0..m {
            let col = &self.binv[k * m..(k + 1) * m];
            let mut acc = 0.0;
            for i in 0..m {
                acc += cb[i] * col[i];
            }
            y[k] = acc;
        }
        y
    }

    /// w = B^{-1} A_j.
    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut w = vec![0.0; m];
        for &(r, a) in &self.cols[j] {
            let col = &self.binv[r * m..(r + 1) * m];
            for i in 0..m {
                w[i] += a * col[i];
            }
        }
        w
    }

    fn reduced_cost(&self, y: &[f64], j: usize, cost: &[f64]) -> f64 {
        let mut d = cost[j];
        for &(i, a) in &self.cols[j] {
            d -= y[i] * a;
        }
        d
    }

    /// Pick the entering variable; returns (index, direction).
    fn price(&self, y: &[f64], cost: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n_total() {
            match self.loc[j] {
                Loc::Basic(_) => continue,
                _ => {}
            }
            if self.lower[j] == self.upper[j] {
                continue; // fixed, can never move
            }
            let d = self.reduced_cost(y, j, cost);
            let (viol, sigma) = match self.loc[j] {
                Loc::AtLower => (-d, 1.0),
                Loc::AtUpper => (d, -1.0),
                Loc::FreeZero => (d.abs(), if d > 0.0 { -1.0 } else { 1.0 }),
                Loc::Basic(_) => unreachable!(),
            };
            if viol > tol::OPTIMALITY {
                if self.bland {
                    return Some((j, sigma));
                }
                match best {
                    Some((_, _, v)) if v >= viol => {}
                    _ => best = Some((j, sigma, viol)),
                }
            }
        }
        best.map(|(j, sigma, _)| (j, sigma))
    }

    /// Single simplex step with the given cost vector.
    fn step(&mut self, cost: &[f64]) -> StepOutcome {
        let y = self.btran(cost);
        let Some((enter, sigma)) = self.price(&y, cost) else {
            return StepOutcome::Optimal;
        };
        let w = self.ftran(enter);

        // Ratio test: how far can the entering variable move?
        let own_span = self.upper[enter] - self.lower[enter];
        let mut t_min = if own_span.is_finite() { own_span } else { f64::INFINITY };
        let mut blockers: Vec<(usize, f64)> = Vec::new(); // (row, |pivot|)
        for i in 0..self.m {
            let wi = w[i];
            if wi.abs() <= tol::PIVOT {
                continue;
            }
            let basic = self.basis[i];
            let v = self.x[basic];
            let rate = sigma * wi; // basic value moves at -rate
            let t = if rate > 0.0 {
                let lo = self.lower[basic];
                if lo.is_finite() {
                    (v - lo) / rate
                } else {
                    continue;
                }
            } else {
                let hi = self.upper[basic];
                if hi.is_finite() {
                    (v - hi) / rate
                } else {
                    continue;
                }
            };
            let t = t.max(0.0);
            if t < t_min - 1e-10 {
                t_min = t;
                blockers.clear();
                blockers.push((i, wi.abs()));
            } else if t <= t_min + 1e-10 {
                blockers.push((i, wi.abs()));
            }
        }

        if t_min.is_infinite() {
            return StepOutcome::Unbounded;
        }

        if blockers.is_empty() {
            // Bound flip: the entering variable runs to its other bound.
            let t = own_span;
            self.apply_move(enter, sigma, t, &w);
            self.loc[enter] = match self.loc[enter] {
                Loc::AtLower => Loc::AtUpper,
                Loc::AtUpper => Loc::AtLower,
                other => other,
            };
            self.x[enter] = if sigma > 0.0 { self.upper[enter] } else { self.lower[enter] };
            self.after_pivot(t);
            return StepOutcome::Pivoted;
        }

        // Leaving row: Bland wants the lowest variable index, otherwise the
        // largest pivot magnitude for stability (ties to the lowest index).
        let &(row, _) = if self.bland {
            blockers
                .iter()
                .min_by_key(|(i, _)| self.basis[*i])
                .expect("nonempty")
        } else {
            blockers
                .iter()
                .max_by(|(i1, p1), (i2, p2)| {
                    p1.partial_cmp(p2)
                        .unwrap()
                        .then(self.basis[*i2].cmp(&self.basis[*i1]))
                })
                .expect("nonempty")
        };

        let t = t_min;
        let leave = self.basis[row];
        let rate = sigma * w[row];
        self.apply_move(enter, sigma, t, &w);

        // Snap the leaving variable onto the bound that blocked.
        let leave_bound = if rate > 0.0 { self.lower[leave] } else { self.upper[leave] };
        self.x[leave] = leave_bound;
        self.loc[leave] = if rate > 0.0 { Loc::AtLower } else { Loc::AtUpper };
        self.loc[enter] = Loc::Basic(row);
        self.basis[row] = enter;
        self.update_binv(row, &w);
        self.after_pivot(t);
        StepOutcome::Pivoted
    }

    /// Move the entering variable by `t * sigma` and update basic values.
    fn apply_move(&mut self, enter: usize, sigma: f64, t: f64, w: &[f64]) {
        if t == 0.0 {
            return;
        }
        self.x[enter] += sigma * t;
        for i in 0..self.m {
            if w[i] != 0.0 {
                let basic = self.basis[i];
                self.x[basic] -= sigma * t * w[i];
            }
        }
    }

    fn after_pivot(&mut self, t: f64) {
        self.pivots += 1;
        if t <= 1e-12 {
            self.degenerate_run += 1;
            if self.degenerate_run >= DEGENERACY_TRIP {
                self.bland = true;
            }
        } else {
            self.degenerate_run = 0;
        }
        if self.pivots % REFACTOR_EVERY == 0 {
            self.refactorize();
        }
    }

    /// Rank-one update of the explicit inverse after `basis[row]` changed.
    fn update_binv(&mut self, row: usize, w: &[f64]) {
        let m = self.m;
        let p = w[row];
        debug_assert!(p.abs() > tol::PIVOT);
        for c in 0..m {
            let col = &mut self.binv[c * m..(c + 1) * m];
            let pivot_entry = col[row] / p;
            if pivot_entry != 0.0 {
                for i in 0..m {
                    if i != row {
                        col[i] -= w[i] * pivot_entry;
                    }
                }
            }
            col[row] = pivot_entry;
        }
    }

    /// Recompute the inverse and basic values from scratch.
    /// Returns false when the basis matrix is numerically singular.
    fn refactorize(&mut self) -> bool {
        let m = self.m;
        if m == 0 {
            return true;
        }
        // Build B column-major, then Gauss-Jordan with partial pivoting on
        // an augmented [B | I].
        let mut b = vec![0.0; m * m];
        for (r, &j) in self.basis.iter().enumerate() {
            for &(i, a) in &self.cols[j] {
                b[r * m + i] = a;
            }
        }
        let mut inv = vec![0.0; m * m];
        for i in 0..m {
            inv[i * m + i] = 1.0;
        }
        for k in 0..m {
            let mut piv_row = k;
            let mut piv_val = b[k * m + k].abs();
            for r in (k + 1)..m {
                let v = b[k * m + r].abs();
                if v > piv_val {
                    piv_val = v;
                    piv_row = r;
                }
            }
            if piv_val <= 1e-12 {
                return false;
            }
            if piv_row != k {
                for c in 0..m {
                    b.swap(c * m + k, c * m + piv_row);
                    inv.swap(c * m + k, c * m + piv_row);
                }
            }
            let diag = b[k * m + k];
            for c in 0..m {
                b[c * m + k] /= diag;
                inv[c * m + k] /= diag;
            }
            for r in 0..m {
                if r == k {
                    continue;
                }
                let factor = b[k * m + r];
                if factor != 0.0 {
                    for c in 0..m {
                        b[c * m + r] -= factor * b[c * m + k];
                        inv[c * m + r] -= factor * inv[c * m + k];
                    }
                }
            }
        }
        self.binv = inv;
        self.recompute_basics();
        true
    }

    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut v = self.rhs.clone();
        for j in 0..self.n_total() {
            if matches!(self.loc[j], Loc::Basic(_)) || self.x[j] == 0.0 {
                continue;
            }
            for &(i, a) in &self.cols[j] {
                v[i] -= a * self.x[j];
            }
        }
        for r in 0..m {
            let col_dot = |i: usize| -> f64 {
                let mut acc = 0.0;
                for c in 0..m {
                    acc += self.binv[c * m + i] * v[c];
                }
                acc
            };
            self.x[self.basis[r]] = col_dot(r);
        }
    }

    /// Run the simplex loop with the given cost vector until optimal.
    fn optimize(&mut self, cost: &[f64], budget: usize) -> StepOutcome {
        loop {
            if self.pivots >= budget {
                return StepOutcome::Stalled;
            }
            match self.step(cost) {
                StepOutcome::Pivoted => continue,
                done => return done,
            }
        }
    }

    fn objective_of(&self, cost: &[f64]) -> f64 {
        (0..self.n_total()).map(|j| cost[j] * self.x[j]).sum()
    }
}

/// Solve a linear program and return primal values, row duals, and reduced
/// costs. A pivot-budget overrun reports [`LpStatus::Stalled`] rather than a
/// wrong answer.
pub fn solve_lp(lp: &LinearProgram) -> LpSolution {
    let n = lp.n_vars;
    let m = lp.rows.len();
    debug_assert!(lp.objective.len() == n && lp.lower.len() == n && lp.upper.len() == n);
    for j in 0..n {
        if lp.lower[j] > lp.upper[j] {
            return failed(LpStatus::Infeasible, n, m, 0);
        }
    }

    let mut tab = Tableau::new(lp);
    let budget = 200 * (n + m) + 20_000;

    // Phase 1: drive artificials out.
    let n_art = tab.n_total() - n - m;
    if n_art > 0 || tab.basis.iter().any(|&j| j >= n + m) {
        let mut phase1_cost = vec![0.0; tab.n_total()];
        for j in (n + m)..tab.n_total() {
            phase1_cost[j] = 1.0;
        }
        match tab.optimize(&phase1_cost, budget) {
            StepOutcome::Optimal => {}
            StepOutcome::Stalled => return failed(LpStatus::Stalled, n, m, tab.pivots),
            // Phase-1 objective is bounded below by zero; treat anything
            // else as a numerical failure.
            _ => return failed(LpStatus::Stalled, n, m, tab.pivots),
        }
        let rhs_scale = 1.0 + tab.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if tab.objective_of(&phase1_cost) > tol::FEASIBILITY * rhs_scale {
            return failed(LpStatus::Infeasible, n, m, tab.pivots);
        }
        // Pin artificials to zero for phase 2.
        for j in (n + m)..tab.n_total() {
            tab.upper[j] = 0.0;
            tab.lower[j] = 0.0;
            if !matches!(tab.loc[j], Loc::Basic(_)) {
                tab.x[j] = 0.0;
                tab.loc[j] = Loc::AtLower;
            }
        }
    }

    let mut cost = vec![0.0; tab.n_total()];
    cost[..n].copy_from_slice(&lp.objective);
    let outcome = tab.optimize(&cost, budget);
    match outcome {
        StepOutcome::Optimal => {}
        StepOutcome::Unbounded => return failed(LpStatus::Unbounded, n, m, tab.pivots),
        _ => return failed(LpStatus::Stalled, n, m, tab.pivots),
    }

    // Verification pass on a fresh factorization; one Bland restart on a
    // residual failure before giving up.
    for attempt in 0..2 {
        if !tab.refactorize() {
            return failed(LpStatus::Stalled, n, m, tab.pivots);
        }
        if attempt > 0 || verify(&tab, lp).is_err() {
            tab.bland = true;
            match tab.optimize(&cost, tab.pivots + budget) {
                StepOutcome::Optimal => {}
                StepOutcome::Unbounded => return failed(LpStatus::Unbounded, n, m, tab.pivots),
                _ => return failed(LpStatus::Stalled, n, m, tab.pivots),
            }
        }
        if verify(&tab, lp).is_ok() {
            break;
        }
        if attempt == 1 {
            return failed(LpStatus::Stalled, n, m, tab.pivots);
        }
    }

    let y = tab.btran(&cost);
    let reduced_costs: Vec<f64> = (0..n).map(|j| tab.reduced_cost(&y, j, &cost)).collect();
    LpSolution {
        status: LpStatus::Optimal,
        objective: tab.objective_of(&cost),
        primal: tab.x[..n].to_vec(),
        duals: y,
        reduced_costs,
        pivots: tab.pivots,
    }
}

fn verify(tab: &Tableau, lp: &LinearProgram) -> Result<(), ()> {
    let x = &tab.x[..lp.n_vars];
    if lp.infeasibility(x) > tol::FEASIBILITY * 10.0 {
        return Err(());
    }
    // Strong duality: c'x == y'b + sum of reduced costs times resting values.
    let mut cost = vec![0.0; tab.n_total()];
    cost[..lp.n_vars].copy_from_slice(&lp.objective);
    let y = tab.btran(&cost);
    let primal: f64 = tab.objective_of(&cost);
    let mut dual: f64 = y.iter().zip(&tab.rhs).map(|(yi, bi)| yi * bi).sum();
    for j in 0..tab.n_total() {
        if !matches!(tab.loc[j], Loc::Basic(_)) && tab.x[j] != 0.0 {
            dual += tab.reduced_cost(&y, j, &cost) * tab.x[j];
        }
    }
    if (primal - dual).abs() > 1e-6 * (1.0 + primal.abs()) {
        return Err(());
    }
    Ok(())
}

fn failed(status: LpStatus, n: usize, m: usize, pivots: usize) -> LpSolution {
    LpSolution {
        status,
        objective: f64::NAN,
        primal: vec![0.0; n],
        duals: vec![0.0; m],
        reduced_costs: vec![0.0; n],
        pivots,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bounded_lp(
        objective: Vec<f64>,
        rows: Vec<(Vec<(usize, f64)>, Sense, f64)>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> LinearProgram {
        let mut lp = LinearProgram::new(objective.len());
        lp.objective = objective;
        lp.lower = lower;
        lp.upper = upper;
        for (coeffs, sense, rhs) in rows {
            lp.push_row(coeffs, sense, rhs);
        }
        lp
    }

    #[test]
    fn single_ge_row_dual_is_positive_one() {
        // min x s.t. x >= 3, 0 <= x <= 10
        let lp = bounded_lp(
            vec![1.0],
            vec![(vec![(0, 1.0)], Sense::Ge, 3.0)],
            vec![0.0],
            vec![10.0],
        );
        let sol = solve_lp(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert!((sol.primal[0] - 3.0).abs() < 1e-9);
        assert!((sol.duals[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_le_row_dual_is_negative_one() {
        // min -x-y s.t. x+y <= 1, x,y >= 0
        let lp = bounded_lp(
            vec![-1.0, -1.0],
            vec![(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.0)],
            vec![0.0, 0.0],
            vec![f64::INFINITY, f64::INFINITY],
        );
        let sol = solve_lp(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 1.0).abs() < 1e-9);
        assert!((sol.duals[0] + 1.0).abs() < 1e-9, "dual {}", sol.duals[0]);
    }

    #[test]
    fn equality_row_is_honored() {
        // min x + 2y s.t. x + y = 4, y <= 3
        let lp = bounded_lp(
            vec![1.0, 2.0],
            vec![(vec![(0, 1.0), (1, 1.0)], Sense::Eq, 4.0)],
            vec![0.0, 0.0],
            vec![f64::INFINITY, 3.0],
        );
        let sol = solve_lp(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 4.0).abs() < 1e-9);
        assert!((sol.primal[0] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_detected() {
        // x <= 1 and x >= 2
        let lp = bounded_lp(
            vec![1.0],
            vec![
                (vec![(0, 1.0)], Sense::Le, 1.0),
                (vec![(0, 1.0)], Sense::Ge, 2.0),
            ],
            vec![0.0],
            vec![10.0],
        );
        assert_eq!(solve_lp(&lp).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        // min -x, x >= 0 unbounded above
        let lp = bounded_lp(vec![-1.0], vec![], vec![0.0], vec![f64::INFINITY]);
        assert_eq!(solve_lp(&lp).status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_bounds_and_upper_resting() {
        // min x with x in [-5, -1]
        let lp = bounded_lp(vec![1.0], vec![], vec![-5.0], vec![-1.0]);
        let sol = solve_lp(&lp);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[0] + 5.0).abs() < 1e-9);
    }

    #[test]
    fn resolve_is_bit_for_bit_deterministic() {
        let lp = bounded_lp(
            vec![-3.0, -5.0, 1.0],
            vec![
                (vec![(0, 1.0), (1, 2.0), (2, -1.0)], Sense::Le, 7.0),
                (vec![(0, 3.0), (1, -1.0)], Sense::Ge, -2.5),
                (vec![(1, 1.0), (2, 1.0)], Sense::Eq, 3.0),
            ],
            vec![0.0, 0.0, -2.0],
            vec![4.0, 4.0, 5.0],
        );
        let a = solve_lp(&lp);
        let b = solve_lp(&lp);
        assert_eq!(a.status, b.status);
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        for (u, v) in a.primal.iter().zip(&b.primal) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
        for (u, v) in a.duals.iter().zip(&b.duals) {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }
}
