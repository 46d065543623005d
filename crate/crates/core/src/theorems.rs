//! Fluctuation identities and bounds satisfied by feasible transfer matrices.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{
    self, CompensatedSum, GRID_TOL, NORMALIZATION_TOL, STRUCTURAL_TOL, SUPPORT_THRESHOLD,
};
use crate::transfer::{
    entropy_gap, mean_work, verify_conditions, TransferMatrix, WorkDistribution, WorkGrid,
};

pub const SECOND_LAW_TOL: f64 = 1e-10;
pub const MEAN_BOUND_TOL: f64 = 1e-9;
pub const MOMENT_TOL: f64 = 1e-9;
pub const THIRD_LAW_TOL: f64 = 1e-9;
pub const JARZYNSKI_TOL: f64 = 1e-10;
pub const CONVERSE_TOL: f64 = 1e-12;
pub const CROOKS_TOL: f64 = 1e-10;

/// How `lhs` is compared against `rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Relation {
    #[default]
    Equal,
    /// `lhs <= rhs`
    AtMost,
    /// `lhs >= rhs`
    AtLeast,
}

/// Outcome of one identity or bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs - rhs|` for equalities; the amount of violation (zero when
    /// satisfied) for inequalities.
    pub residual: f64,
    pub pass: bool,
    pub tolerance: f64,
    #[serde(skip)]
    pub relation: Relation,
}

impl TheoremReport {
    pub fn new(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        relation: Relation,
        tolerance: f64,
    ) -> Self {
        let mut r = Self {
            name: name.into(),
            lhs,
            rhs,
            residual: 0.0,
            pass: false,
            tolerance,
            relation,
        };
        r.evaluate();
        r
    }

    fn evaluate(&mut self) {
        self.residual = match self.relation {
            Relation::Equal => (self.lhs - self.rhs).abs(),
            Relation::AtMost => (self.lhs - self.rhs).max(0.0),
            Relation::AtLeast => (self.rhs - self.lhs).max(0.0),
        };
        self.pass = self.residual.is_finite() && self.residual <= self.tolerance;
    }

    /// Re-judge the report at a different tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self.evaluate();
        self
    }
}

/// `<2^(w - log q_j + log p_i)> = 1`, summed in the cancelled form
/// `sum P(i,w|j) 2^w p_i`.
pub fn second_law_equality(t: &TransferMatrix) -> TheoremReport {
    let lhs = numeric::sum(
        t.entries()
            .map(|(i, k, _, v)| v * t.grid().get(k).exp2() * t.p().get(i)),
    );
    TheoremReport::new("second_law", lhs, 1.0, Relation::Equal, SECOND_LAW_TOL)
}

/// `<w> <= S(p) - S(q)`.
pub fn mean_work_bound(t: &TransferMatrix) -> TheoremReport {
    TheoremReport::new(
        "mean_work_bound",
        mean_work(t),
        entropy_gap(t),
        Relation::AtMost,
        MEAN_BOUND_TOL,
    )
}

/// Truncated exponential series of the second law for odd order `m`:
/// `sum_{k=1}^m (ln 2)^k / k! <X^k> <= 0` with `X = w - log q_j + log p_i`.
pub fn moment_inequalities(t: &TransferMatrix, m: u32) -> Result<TheoremReport> {
    if m == 0 || m.is_multiple_of(2) {
        return Err(Error::Domain(format!(
            "moment order must be odd and positive, got {m}"
        )));
    }
    let mut moments = vec![CompensatedSum::new(); m as usize];
    for (i, k, j, v) in t.entries() {
        let weight = v * t.q().get(j);
        if weight <= 0.0 {
            continue;
        }
        let pi = t.p().get(i);
        if pi <= 0.0 {
            return Err(Error::Domain(format!(
                "mass on row {i} where the initial coefficient is zero"
            )));
        }
        let x = t.grid().get(k) - t.q().get(j).log2() + pi.log2();
        let mut power = 1.0;
        for acc in moments.iter_mut() {
            power *= x;
            acc.add(weight * power);
        }
    }
    let ln2 = std::f64::consts::LN_2;
    let mut coef = 1.0;
    let mut series = CompensatedSum::new();
    for (k, acc) in moments.iter().enumerate() {
        coef *= ln2 / (k + 1) as f64;
        series.add(coef * acc.value());
    }
    Ok(TheoremReport::new(
        format!("moment_M{m}"),
        series.value(),
        0.0,
        Relation::AtMost,
        MOMENT_TOL,
    ))
}

/// `sum_{w in support} 2^w >= q_min / (d' p_min)` over supports.
pub fn third_law_bound(t: &TransferMatrix) -> TheoremReport {
    let lhs = numeric::sum(
        t.active_grid_indices()
            .into_iter()
            .map(|k| t.grid().get(k).exp2()),
    );
    let d_prime = t.q().support_size() as f64;
    let rhs = t.q().min_support_value() / (d_prime * t.p().min_support_value());
    TheoremReport::new("third_law", lhs, rhs, Relation::AtLeast, THIRD_LAW_TOL)
}

/// `<2^w> = d / d'` for a maximally entangled target of dimension `d'`;
/// `d` is the support size of the initial vector.
pub fn jarzynski(t: &TransferMatrix) -> Result<TheoremReport> {
    if !t.q().is_uniform(NORMALIZATION_TOL) {
        return Err(Error::Precondition(
            "final vector is not maximally entangled".into(),
        ));
    }
    let lhs = numeric::sum(
        t.entries()
            .map(|(_, k, j, v)| v * t.q().get(j) * t.grid().get(k).exp2()),
    );
    let rhs = t.p().support_size() as f64 / t.d_out() as f64;
    Ok(TheoremReport::new(
        "jarzynski",
        lhs,
        rhs,
        Relation::Equal,
        JARZYNSKI_TOL,
    ))
}

/// `P(w >= log2(d/d') + x) <= 2^-x`.
pub fn strong_converse_tail(
    w: &WorkDistribution,
    d: usize,
    d_prime: usize,
    x: f64,
) -> TheoremReport {
    let threshold = (d as f64 / d_prime as f64).log2() + x;
    let lhs = numeric::sum(
        w.points()
            .iter()
            .filter(|(wv, _)| *wv >= threshold - GRID_TOL)
            .map(|p| p.1),
    );
    TheoremReport::new(
        format!("strong_converse_x{x}"),
        lhs,
        (-x).exp2(),
        Relation::AtMost,
        CONVERSE_TOL,
    )
}

/// `P_rev(j, -w | i) = 2^w P(i, w | j)` on the negated grid, with the roles
/// of the initial and final vectors exchanged.
pub fn reverse_matrix(t: &TransferMatrix) -> Result<TransferMatrix> {
    let report = verify_conditions(t, STRUCTURAL_TOL);
    if !report.pass {
        return Err(Error::Precondition(format!(
            "matrix fails its conditions (residuals {:e}, {:e}, {:e})",
            report.c1_residual, report.c2_residual, report.c3_residual
        )));
    }
    let g = t.grid().len();
    let grid: WorkGrid = t.grid().negated();
    let entries: Vec<_> = t
        .entries()
        .map(|(i, k, j, v)| (j, g - 1 - k, i, v * t.grid().get(k).exp2()))
        .collect();
    TransferMatrix::new(t.q().clone(), t.p().clone(), grid, &entries)
}

/// One row of the Crooks ratio table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrooksPoint {
    pub w: f64,
    /// Work value in the reverse protocol, `-w`.
    pub w_reverse: f64,
    pub p_forward: f64,
    pub p_reverse: f64,
    pub ratio: f64,
    pub expected: f64,
    pub residual: f64,
    pub pass: bool,
}

/// Ratio table plus the Jarzynski value recovered from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrooksReport {
    /// Dimension of the forward target.
    pub d: usize,
    /// Dimension of the reverse target (the forward initial index).
    pub d_prime: usize,
    pub points: Vec<CrooksPoint>,
    /// `sum_w P(w) 2^w` rebuilt from the reverse distribution, against
    /// `d'/d` (with `d'` counted on the support of the initial vector).
    pub consistency: TheoremReport,
    pub pass: bool,
}

impl CrooksReport {
    /// CSV `w,w_reverse,p_forward,p_reverse,ratio,expected`.
    pub fn to_csv(&self) -> String {
        let f = numeric::format_csv_float;
        let mut out = String::from("w,w_reverse,p_forward,p_reverse,ratio,expected\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                f(p.w),
                f(p.w_reverse),
                f(p.p_forward),
                f(p.p_reverse),
                f(p.ratio),
                f(p.expected)
            );
        }
        out
    }

    pub fn reports(&self) -> Vec<TheoremReport> {
        let mut out: Vec<TheoremReport> = self
            .points
            .iter()
            .map(|p| {
                TheoremReport::new(
                    format!("crooks_w{}", p.w),
                    p.ratio,
                    p.expected,
                    Relation::Equal,
                    CROOKS_TOL,
                )
            })
            .collect();
        out.push(self.consistency.clone());
        out
    }
}

/// `P(w) / P_rev(-w) = 2^-w d'/d` with `P(w) = sum P(i,w|j)/d` and
/// `P_rev(-w) = sum P_rev(j,-w|i)/d'`. Here `d` is the forward target
/// dimension (the target must be maximally entangled) and `d'` the number of
/// initial indices, whose uniform vector is the reverse target.
pub fn crooks_check(t: &TransferMatrix) -> Result<CrooksReport> {
    if !t.q().is_uniform(NORMALIZATION_TOL) {
        return Err(Error::Precondition(
            "forward target is not maximally entangled".into(),
        ));
    }
    let rev = reverse_matrix(t)?;
    let d = t.d_out();
    let d_prime = t.d();
    let g = t.grid().len();
    let mut points = Vec::new();
    let mut rebuilt = CompensatedSum::new();
    for k in 0..g {
        let w = t.grid().get(k);
        let kr = g - 1 - k;
        let mut fwd = CompensatedSum::new();
        let mut bwd = CompensatedSum::new();
        for i in 0..d_prime {
            for j in 0..d {
                fwd.add(t.get(i, k, j));
                bwd.add(rev.get(j, kr, i));
            }
        }
        let p_forward = fwd.value() / d as f64;
        let p_reverse = bwd.value() / d_prime as f64;
        if p_reverse <= SUPPORT_THRESHOLD {
            continue;
        }
        let ratio = p_forward / p_reverse;
        let expected = (-w).exp2() * d_prime as f64 / d as f64;
        let residual = (ratio - expected).abs();
        rebuilt.add(ratio * p_reverse * w.exp2());
        points.push(CrooksPoint {
            w,
            w_reverse: -w,
            p_forward,
            p_reverse,
            ratio,
            expected,
            residual,
            pass: residual <= CROOKS_TOL,
        });
    }
    let consistency = TheoremReport::new(
        "crooks_jarzynski_consistency",
        rebuilt.value(),
        t.p().support_size() as f64 / d as f64,
        Relation::Equal,
        CROOKS_TOL,
    );
    let pass = consistency.pass && points.iter().all(|p| p.pass);
    Ok(CrooksReport {
        d,
        d_prime,
        points,
        consistency,
        pass,
    })
}

/// Every applicable check on one matrix: conditions-derived identities, and
/// the maximally-entangled-target results when their preconditions hold.
pub fn full_suite(t: &TransferMatrix) -> Result<Vec<TheoremReport>> {
    let mut out = vec![second_law_equality(t), mean_work_bound(t)];
    for m in [1, 3, 5] {
        out.push(moment_inequalities(t, m)?);
    }
    out.push(third_law_bound(t));
    if t.q().is_uniform(NORMALIZATION_TOL) {
        out.push(jarzynski(t)?);
        let w = crate::transfer::work_marginal(t);
        for x in [0.0, 0.5, 1.0, 2.0] {
            out.push(strong_converse_tail(&w, t.p().support_size(), t.d_out(), x));
        }
        out.extend(crooks_check(t)?.reports());
    }
    Ok(out)
}
