//! Dense two-phase simplex for `A x = b, x >= 0`.
//!
//! Rows are equilibrated before solving. Phase 1 minimizes the sum of
//! artificial variables; a positive optimum proves infeasibility and its
//! duals give a Farkas certificate `y` with `A^T y <= 0` and `b^T y > 0`.
//! Entering and leaving variables follow Bland's rule, so degenerate problems
//! terminate.

use crate::error::{Error, Result};

/// Reduced costs above `-REDUCED_COST_TOL` count as optimal.
const REDUCED_COST_TOL: f64 = 1e-10;
/// Smallest pivot magnitude accepted in the ratio test.
const PIVOT_TOL: f64 = 1e-10;
/// Phase-1 optimum at or below this value means feasible.
const FEASIBILITY_TOL: f64 = 1e-9;
/// Refined basic values this negative are rejected in favor of the tableau.
const REFINE_NEG_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 200_000;
/// Pivots between recomputations of the tableau from the original rows.
const REINVERT_EVERY: usize = 32;
/// Largest acceptable `|A x - b|` on an equilibrated row of the final point.
const RESIDUAL_TOL: f64 = 1e-7;

/// Result of [`solve`].
#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    /// A basic feasible solution; `objective` is set when one was supplied.
    Feasible { x: Vec<f64>, objective: Option<f64> },
    /// No nonnegative solution exists. `certificate` satisfies
    /// `A^T y <= 0` and `b^T y > 0` up to round-off.
    Infeasible { certificate: Vec<f64> },
    /// Feasible, but the objective is unbounded below.
    Unbounded,
}

struct Tableau {
    /// `rows x (cols + 1)`; the last column is the right-hand side.
    t: Vec<Vec<f64>>,
    /// Reduced-cost row, same width as `t`; last entry is minus the objective.
    cost: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
    /// Columns allowed to enter the basis.
    eligible: Vec<bool>,
    /// Equilibrated rows `[A | I | b]` matching `t` row for row.
    orig: Vec<Vec<f64>>,
    /// Cost vector of the current phase.
    cost_vec: Vec<f64>,
    /// Index into the caller's constraints for each tableau row.
    row_ids: Vec<usize>,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.t[r][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let width = self.cols + 1;
        let p = self.t[r][c];
        for k in 0..width {
            self.t[r][k] /= p;
        }
        let pivot_row = self.t[r].clone();
        for (rr, row) in self.t.iter_mut().enumerate() {
            if rr == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for k in 0..width {
                    row[k] -= f * pivot_row[k];
                }
                row[c] = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Run simplex iterations on the current cost row. Returns false if unbounded.
    fn optimize(&mut self, pivots: &mut usize) -> Result<bool> {
        loop {
            let entering =
                (0..self.cols).find(|&c| self.eligible[c] && self.cost[c] < -REDUCED_COST_TOL);
            let Some(c) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][c];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            let tie = (ratio - lratio).abs() <= 1e-12 * (1.0 + lratio.abs());
                            if ratio < lratio && !tie || tie && self.basis[r] < self.basis[lr] {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, c);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::Solver("pivot limit exceeded".into()));
            }
            if (*pivots).is_multiple_of(REINVERT_EVERY) {
                self.reinvert();
            }
        }
    }

    /// Rebuild `B^-1 [A | I | b]` for the current basis by Gauss-Jordan
    /// elimination with partial pivoting. Leaves the tableau untouched if the
    /// basis matrix is numerically singular.
    fn reinvert(&mut self) {
        let m = self.orig.len();
        let width = self.cols + 1;
        let mut mat = self.orig.clone();
        let mut order: Vec<usize> = (0..m).collect();
        for k in 0..m {
            let c = self.basis[k];
            let Some(piv) = (k..m).max_by(|&x, &y| mat[x][c].abs().total_cmp(&mat[y][c].abs()))
            else {
                return;
            };
            if mat[piv][c].abs() < 1e-12 {
                return;
            }
            mat.swap(k, piv);
            order.swap(k, piv);
            let p = mat[k][c];
            for v in mat[k].iter_mut() {
                *v /= p;
            }
            let pivot_row = mat[k].clone();
            for (r, row) in mat.iter_mut().enumerate() {
                if r != k {
                    let f = row[c];
                    if f != 0.0 {
                        for idx in 0..width {
                            row[idx] -= f * pivot_row[idx];
                        }
                        row[c] = 0.0;
                    }
                }
            }
        }
        // Row k of `mat` is now the row with basic variable `basis[k]`, so
        // the original rows are permuted along with it.
        self.orig = order.iter().map(|&r| self.orig[r].clone()).collect();
        self.row_ids = order.iter().map(|&r| self.row_ids[r]).collect();
        self.t = mat;
        let cost = self.cost_vec.clone();
        self.set_cost(&cost);
    }

    fn set_cost(&mut self, c: &[f64]) {
        self.cost_vec = c.to_vec();
        self.cost = c.to_vec();
        self.cost.push(0.0);
        for r in 0..self.t.len() {
            let cb = c[self.basis[r]];
            if cb != 0.0 {
                for k in 0..=self.cols {
                    self.cost[k] -= cb * self.t[r][k];
                }
            }
        }
    }
}

/// Solve `min c^T x` (or only find a feasible point when `objective` is
/// `None`) subject to `A x = b`, `x >= 0`.
pub fn solve(a: &[Vec<f64>], b: &[f64], objective: Option<&[f64]>) -> Result<LpOutcome> {
    let m = a.len();
    if b.len() != m {
        return Err(Error::Validation(
            "constraint matrix and rhs disagree".into(),
        ));
    }
    let n = a.first().map_or(0, |r| r.len());
    if a.iter().any(|r| r.len() != n) {
        return Err(Error::Validation("ragged constraint matrix".into()));
    }
    if let Some(c) = objective {
        if c.len() != n {
            return Err(Error::Validation("objective length mismatch".into()));
        }
    }
    if a.iter().flatten().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite LP data".into()));
    }

    // Row equilibration: scale each row by its largest coefficient and flip it
    // so the right-hand side is nonnegative. Keep the factors to map duals back.
    let mut factor = vec![0.0; m];
    let mut rows: Vec<usize> = Vec::with_capacity(m);
    for r in 0..m {
        let scale = a[r].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if scale == 0.0 {
            if b[r].abs() > FEASIBILITY_TOL {
                let mut y = vec![0.0; m];
                y[r] = b[r].signum();
                return Ok(LpOutcome::Infeasible { certificate: y });
            }
            continue;
        }
        let sign = if b[r] < 0.0 { -1.0 } else { 1.0 };
        factor[r] = sign / scale;
        rows.push(r);
    }

    let mr = rows.len();
    let cols = n + mr;
    let mut t = Vec::with_capacity(mr);
    for (k, &r) in rows.iter().enumerate() {
        let mut row = vec![0.0; cols + 1];
        for j in 0..n {
            row[j] = a[r][j] * factor[r];
        }
        row[n + k] = 1.0;
        row[cols] = b[r] * factor[r];
        t.push(row);
    }
    let mut tab = Tableau {
        orig: t.clone(),
        t,
        cost: Vec::new(),
        basis: (n..cols).collect(),
        cols,
        eligible: vec![true; cols],
        cost_vec: Vec::new(),
        row_ids: rows.clone(),
    };

    let mut phase1 = vec![0.0; cols];
    for c in phase1.iter_mut().skip(n) {
        *c = 1.0;
    }
    tab.set_cost(&phase1);
    let mut pivots = 0;
    tab.optimize(&mut pivots)?;
    tab.reinvert();
    tab.optimize(&mut pivots)?;
    let infeasibility = -tab.cost[cols];

    if infeasibility > FEASIBILITY_TOL {
        // Duals of the phase-1 problem: y_k = 1 - reduced cost of artificial k.
        let mut y = vec![0.0; m];
        for (k, &r) in rows.iter().enumerate() {
            y[r] = (1.0 - tab.cost[n + k]) * factor[r];
        }
        let norm = y.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if norm > 0.0 {
            for v in &mut y {
                *v /= norm;
            }
        }
        return Ok(LpOutcome::Infeasible { certificate: y });
    }

    // Drive remaining artificials out of the basis; rows where that is
    // impossible are linear combinations of the others and are dropped.
    let mut r = 0;
    while r < tab.t.len() {
        if tab.basis[r] >= n {
            let best = (0..n).max_by(|&x, &y| tab.t[r][x].abs().total_cmp(&tab.t[r][y].abs()));
            match best {
                Some(c) if tab.t[r][c].abs() > 1e-9 => {
                    tab.pivot(r, c);
                    r += 1;
                }
                _ => {
                    tab.t.remove(r);
                    tab.basis.remove(r);
                    tab.orig.remove(r);
                    tab.row_ids.remove(r);
                }
            }
        } else {
            r += 1;
        }
    }
    for c in n..cols {
        tab.eligible[c] = false;
    }
    tab.reinvert();

    let mut objective_value = None;
    if let Some(c) = objective {
        let mut full = c.to_vec();
        full.resize(cols, 0.0);
        tab.set_cost(&full);
        if !tab.optimize(&mut pivots)? {
            return Ok(LpOutcome::Unbounded);
        }
    }

    let mut x = vec![0.0; n];
    for (k, &bv) in tab.basis.iter().enumerate() {
        x[bv] = tab.rhs(k);
    }
    if let Some(refined) = refine(a, b, &tab.row_ids, &tab.basis, n) {
        x = refined;
    }
    for v in &mut x {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let worst = (0..m)
        .filter(|&r| factor[r] != 0.0)
        .map(|r| ((a[r].iter().zip(&x).map(|(p, v)| p * v).sum::<f64>() - b[r]) * factor[r]).abs())
        .fold(0.0f64, f64::max);
    if worst > RESIDUAL_TOL {
        return Err(Error::Solver(format!(
            "solution residual {worst:.3e} after refinement"
        )));
    }
    if let Some(c) = objective {
        objective_value = Some(c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum());
    }
    Ok(LpOutcome::Feasible {
        x,
        objective: objective_value,
    })
}

/// Recompute the basic solution from the original data to shed tableau drift.
fn refine(
    a: &[Vec<f64>],
    b: &[f64],
    rows: &[usize],
    basis: &[usize],
    n: usize,
) -> Option<Vec<f64>> {
    let k = basis.len();
    let mut mat: Vec<Vec<f64>> = rows
        .iter()
        .map(|&r| {
            let scale = a[r].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let mut row: Vec<f64> = basis.iter().map(|&c| a[r][c] / scale).collect();
            row.push(b[r] / scale);
            row
        })
        .collect();
    let xb = gaussian_solve(&mut mat, k)?;
    if xb.iter().any(|v| *v < -REFINE_NEG_TOL || !v.is_finite()) {
        return None;
    }
    let mut x = vec![0.0; n];
    for (idx, &c) in basis.iter().enumerate() {
        x[c] = xb[idx];
    }
    Some(x)
}

/// Solve a `k x k` augmented system with partial pivoting.
fn gaussian_solve(mat: &mut [Vec<f64>], k: usize) -> Option<Vec<f64>> {
    for col in 0..k {
        let piv = (col..k).max_by(|&i, &j| mat[i][col].abs().total_cmp(&mat[j][col].abs()))?;
        if mat[piv][col].abs() < 1e-14 {
            return None;
        }
        mat.swap(col, piv);
        for r in col + 1..k {
            let f = mat[r][col] / mat[col][col];
            if f != 0.0 {
                let (top, bottom) = mat.split_at_mut(r);
                for (v, pv) in bottom[0][col..=k].iter_mut().zip(&top[col][col..=k]) {
                    *v -= f * pv;
                }
            }
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let mut s = mat[r][k];
        for c in r + 1..k {
            s -= mat[r][c] * x[c];
        }
        x[r] = s / mat[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &[Vec<f64>], b: &[f64], x: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(row, bi)| (row.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() - bi).abs())
            .fold(0.0, f64::max)
    }

    fn check_certificate(a: &[Vec<f64>], b: &[f64], y: &[f64]) {
        let n = a[0].len();
        for j in 0..n {
            let s: f64 = (0..a.len()).map(|r| a[r][j] * y[r]).sum();
            assert!(s <= 1e-9, "A^T y component {j} = {s}");
        }
        let by: f64 = b.iter().zip(y).map(|(p, q)| p * q).sum();
        assert!(by > 1e-9, "b^T y = {by}");
    }

    #[test]
    fn finds_feasible_point() {
        let a = vec![vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]];
        let b = vec![1.0, 1.5];
        match solve(&a, &b, None).unwrap() {
            LpOutcome::Feasible { x, .. } => {
                assert!(residual(&a, &b, &x) < 1e-12);
                assert!(x.iter().all(|v| *v >= 0.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn detects_infeasibility_with_certificate() {
        // x1 + x2 = 1 and x1 + x2 = 2 cannot both hold.
        let a = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let b = vec![1.0, 4.0];
        match solve(&a, &b, None).unwrap() {
            LpOutcome::Infeasible { certificate } => check_certificate(&a, &b, &certificate),
            other => panic!("unexpected {other:?}"),
        }
        // Negative rhs with nonnegative coefficients.
        let a = vec![vec![1.0, 3.0]];
        let b = vec![-1.0];
        match solve(&a, &b, None).unwrap() {
            LpOutcome::Infeasible { certificate } => check_certificate(&a, &b, &certificate),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn handles_redundant_rows() {
        let a = vec![
            vec![1.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 1.0],
            vec![1.0, 1.0, 1.0, 1.0],
        ];
        let b = vec![0.4, 0.6, 1.0];
        match solve(&a, &b, None).unwrap() {
            LpOutcome::Feasible { x, .. } => assert!(residual(&a, &b, &x) < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn optimizes_objective() {
        // min -x1 - 2 x2 s.t. x1 + x2 + s = 4, x2 + t = 3
        let a = vec![vec![1.0, 1.0, 1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0]];
        let b = vec![4.0, 3.0];
        let c = vec![-1.0, -2.0, 0.0, 0.0];
        match solve(&a, &b, Some(&c)).unwrap() {
            LpOutcome::Feasible { x, objective } => {
                assert!((objective.unwrap() + 7.0).abs() < 1e-12);
                assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        let a = vec![vec![1.0, -1.0]];
        let b = vec![0.0];
        let c = vec![-1.0, 0.0];
        assert_eq!(solve(&a, &b, Some(&c)).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's example, which cycles under the largest-coefficient rule.
        let a = vec![
            vec![0.25, -8.0, -1.0, 9.0, 1.0, 0.0, 0.0],
            vec![0.5, -12.0, -0.5, 3.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
        ];
        let b = vec![0.0, 0.0, 1.0];
        let c = vec![-0.75, 20.0, -0.5, 6.0, 0.0, 0.0, 0.0];
        match solve(&a, &b, Some(&c)).unwrap() {
            LpOutcome::Feasible { objective, .. } => {
                assert!((objective.unwrap() + 1.25).abs() < 1e-9)
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
