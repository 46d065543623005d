//! Conditional distributions `P(i, w | j)` and their feasibility conditions.
//!
//! For each final index `j`, `P(., . | j)` is a distribution over an initial
//! index `i` and a work value `w` taken from a finite [`WorkGrid`]. A
//! transformation `p -> q` with battery assistance exists iff some `P`
//! satisfies
//!
//! * C1: `sum_{i,w} P(i,w|j) = 1` for every `j`,
//! * C2: `sum_{j,w} P(i,w|j) 2^w = 1` for every `i`,
//! * C3: `sum_{j,w} P(i,w|j) q_j = p_i` for every `i`.
//!
//! Indices with zero coefficient are handled as follows: C1 is vacuous for a
//! column with `q_j = 0` and C2 is vacuous for a row with `p_i = 0`. Their
//! entries still take part in the remaining sums, so a zero-padded target
//! acts as spare local dimension.

use std::fmt::Write as _;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{
    self, CompensatedSum, GRID_TOL, NORMALIZATION_TOL, STRUCTURAL_TOL, SUPPORT_THRESHOLD,
};
use crate::schmidt::{entanglement_entropy, SchmidtVector};
use crate::simplex::{self, LpOutcome};

/// Sorted, deduplicated work values in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WorkGrid {
    values: Vec<f64>,
}

impl WorkGrid {
    /// Sort and merge values closer than the grid tolerance.
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("work values must be finite".into()));
        }
        values.sort_by(f64::total_cmp);
        let mut out: Vec<f64> = Vec::with_capacity(values.len());
        for v in values {
            match out.last() {
                Some(&last) if (v - last).abs() <= GRID_TOL => {}
                _ => out.push(v),
            }
        }
        if out.is_empty() {
            return Err(Error::EmptyGrid);
        }
        Ok(Self { values: out })
    }

    /// Accept values only if already strictly increasing and separated,
    /// so external indices into them stay valid.
    pub fn from_sorted(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("work values must be finite".into()));
        }
        if values.windows(2).any(|w| w[1] - w[0] <= GRID_TOL) {
            return Err(Error::Validation(
                "grid must be strictly increasing with gaps above 1e-12".into(),
            ));
        }
        Ok(Self { values })
    }

    /// All pairwise values `log2 q_j - log2 p_i` over the supports.
    pub fn canonical(p: &SchmidtVector, q: &SchmidtVector) -> Result<Self> {
        let mut values = Vec::new();
        for i in p.support() {
            for j in q.support() {
                values.push(q.get(j).log2() - p.get(i).log2());
            }
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Index of the grid point within tolerance of `w`.
    pub fn index_of(&self, w: f64) -> Option<usize> {
        let pos = self.values.partition_point(|&v| v < w - GRID_TOL);
        (pos < self.values.len() && (self.values[pos] - w).abs() <= GRID_TOL).then_some(pos)
    }

    pub fn union(&self, other: &WorkGrid) -> WorkGrid {
        let mut v = self.values.clone();
        v.extend_from_slice(&other.values);
        WorkGrid::new(v).expect("union of non-empty grids")
    }

    /// The grid `{-w}` in increasing order; index `k` maps to `len - 1 - k`.
    pub fn negated(&self) -> WorkGrid {
        WorkGrid {
            values: self.values.iter().rev().map(|w| -w).collect(),
        }
    }
}

impl TryFrom<Vec<f64>> for WorkGrid {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::from_sorted(values)
    }
}

impl From<WorkGrid> for Vec<f64> {
    fn from(g: WorkGrid) -> Self {
        g.values
    }
}

/// `P(i, w_k | j)` stored densely over `(i, k, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TransferJson", into = "TransferJson")]
pub struct TransferMatrix {
    p: SchmidtVector,
    q: SchmidtVector,
    grid: WorkGrid,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TransferJson {
    p: SchmidtVector,
    q: SchmidtVector,
    grid: WorkGrid,
    entries: Vec<(usize, usize, usize, f64)>,
}

impl TryFrom<TransferJson> for TransferMatrix {
    type Error = Error;

    fn try_from(raw: TransferJson) -> Result<Self> {
        TransferMatrix::new(raw.p, raw.q, raw.grid, &raw.entries)
    }
}

impl From<TransferMatrix> for TransferJson {
    fn from(t: TransferMatrix) -> Self {
        let entries = t.entries().collect();
        TransferJson {
            p: t.p,
            q: t.q,
            grid: t.grid,
            entries,
        }
    }
}

impl TransferMatrix {
    /// Build from sparse `(i, k, j, value)` entries. Repeated positions add.
    /// Column normalization (C1) must hold to 1e-9 on the support of `q`.
    pub fn new(
        p: SchmidtVector,
        q: SchmidtVector,
        grid: WorkGrid,
        entries: &[(usize, usize, usize, f64)],
    ) -> Result<Self> {
        let (d, g, dp) = (p.len(), grid.len(), q.len());
        let mut data = vec![0.0; d * g * dp];
        for &(i, k, j, v) in entries {
            if i >= d || k >= g || j >= dp {
                return Err(Error::Validation(format!(
                    "entry ({i}, {k}, {j}) outside dimensions ({d}, {g}, {dp})"
                )));
            }
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Validation(format!(
                    "entry ({i}, {k}, {j}) has invalid value {v}"
                )));
            }
            data[(i * g + k) * dp + j] += v;
        }
        let t = Self { p, q, grid, data };
        let c1 = t.c1_residual();
        if c1 > STRUCTURAL_TOL {
            return Err(Error::Validation(format!(
                "column normalization violated by {c1:e}"
            )));
        }
        Ok(t)
    }

    pub fn p(&self) -> &SchmidtVector {
        &self.p
    }

    pub fn q(&self) -> &SchmidtVector {
        &self.q
    }

    pub fn grid(&self) -> &WorkGrid {
        &self.grid
    }

    /// Number of initial indices `i`.
    pub fn d(&self) -> usize {
        self.p.len()
    }

    /// Number of final indices `j`.
    pub fn d_out(&self) -> usize {
        self.q.len()
    }

    pub fn get(&self, i: usize, k: usize, j: usize) -> f64 {
        self.data[(i * self.grid.len() + k) * self.d_out() + j]
    }

    /// Nonzero entries as `(i, k, j, value)` in index order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        let (g, dp) = (self.grid.len(), self.d_out());
        self.data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(move |(idx, &v)| {
                let j = idx % dp;
                let k = (idx / dp) % g;
                let i = idx / (dp * g);
                (i, k, j, v)
            })
    }

    /// Grid indices carrying an entry above the support threshold.
    pub fn active_grid_indices(&self) -> Vec<usize> {
        let mut active = vec![false; self.grid.len()];
        for (_, k, _, v) in self.entries() {
            if v > SUPPORT_THRESHOLD {
                active[k] = true;
            }
        }
        (0..self.grid.len()).filter(|&k| active[k]).collect()
    }

    fn c1_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for j in self.q.support() {
            let mut s = CompensatedSum::new();
            for i in 0..self.d() {
                for k in 0..self.grid.len() {
                    s.add(self.get(i, k, j));
                }
            }
            worst = worst.max((s.value() - 1.0).abs());
        }
        worst
    }

    fn c2_residual(&self) -> f64 {
        let exp: Vec<f64> = self.grid.values.iter().map(|w| w.exp2()).collect();
        let mut worst = 0.0f64;
        for i in self.p.support() {
            let mut s = CompensatedSum::new();
            for (k, e) in exp.iter().enumerate() {
                for j in 0..self.d_out() {
                    s.add(self.get(i, k, j) * e);
                }
            }
            worst = worst.max((s.value() - 1.0).abs());
        }
        worst
    }

    fn c3_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.d() {
            let mut s = CompensatedSum::new();
            for k in 0..self.grid.len() {
                for j in 0..self.d_out() {
                    s.add(self.get(i, k, j) * self.q.get(j));
                }
            }
            worst = worst.max((s.value() - self.p.get(i)).abs());
        }
        worst
    }

    /// Entry-wise copy with every work value shifted by `delta`.
    pub fn with_shifted_grid(&self, delta: f64) -> Result<Self> {
        let grid = WorkGrid::from_sorted(self.grid.values.iter().map(|w| w + delta).collect())?;
        Ok(Self {
            grid,
            ..self.clone()
        })
    }

    /// Copy with the grid extended by `extra`; entries are re-indexed.
    pub fn on_grid(&self, grid: &WorkGrid) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, k, j, v) in self.entries() {
            let nk = grid.index_of(self.grid.get(k)).ok_or_else(|| {
                Error::Validation(format!("work value {} missing from grid", self.grid.get(k)))
            })?;
            entries.push((i, nk, j, v));
        }
        Self::new(self.p.clone(), self.q.clone(), grid.clone(), &entries)
    }
}

/// Residuals of the three feasibility conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub c1_residual: f64,
    pub c2_residual: f64,
    pub c3_residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Max-norm residuals of C1, C2 and C3.
pub fn verify_conditions(t: &TransferMatrix, tol: f64) -> ConditionReport {
    let c1 = t.c1_residual();
    let c2 = t.c2_residual();
    let c3 = t.c3_residual();
    ConditionReport {
        c1_residual: c1,
        c2_residual: c2,
        c3_residual: c3,
        tolerance: tol,
        pass: c1 <= tol && c2 <= tol && c3 <= tol,
    }
}

/// The reversible witness `P(i, log q_j - log p_i | j) = p_i`.
pub fn canonical_reversible(p: &SchmidtVector, q: &SchmidtVector) -> Result<TransferMatrix> {
    if !p.has_full_support() {
        return Err(Error::Domain("initial vector has zero entries".into()));
    }
    if !q.has_full_support() {
        return Err(Error::Domain("final vector has zero entries".into()));
    }
    let grid = WorkGrid::canonical(p, q)?;
    let mut entries = Vec::with_capacity(p.len() * q.len());
    for i in 0..p.len() {
        for j in 0..q.len() {
            let w = q.get(j).log2() - p.get(i).log2();
            let k = grid.index_of(w).expect("canonical value lies on its grid");
            entries.push((i, k, j, p.get(i)));
        }
    }
    TransferMatrix::new(p.clone(), q.clone(), grid, &entries)
}

/// Extra linear requirements for [`feasibility_lp`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityOptions {
    /// Require `sum P(i,w|j) q_j w` to equal this value.
    #[serde(default)]
    pub mean_w_target: Option<f64>,
    /// Replace C2 by `sum_{j,w} P(i,w|j) 2^w <= 1`.
    #[serde(default)]
    pub relax_c2: bool,
}

/// Dual values proving infeasibility, one per labeled constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarkasCertificate {
    pub labels: Vec<String>,
    pub duals: Vec<f64>,
    /// `max_x (A^T y)_x`, nonpositive up to round-off.
    pub max_dual_slack: f64,
    /// `b^T y`, strictly positive.
    pub rhs_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityResult {
    pub feasible: bool,
    pub witness: Option<TransferMatrix>,
    pub certificate: Option<FarkasCertificate>,
}

struct LpSystem {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    labels: Vec<String>,
    /// Number of `P` variables; any further columns are C2 slacks.
    n_p: usize,
}

fn build_system(
    p: &SchmidtVector,
    q: &SchmidtVector,
    grid: &WorkGrid,
    opts: &FeasibilityOptions,
) -> LpSystem {
    let (d, g, dp) = (p.len(), grid.len(), q.len());
    let n_p = d * g * dp;
    let var = |i: usize, k: usize, j: usize| (i * g + k) * dp + j;
    let p_support = p.support();
    let n_slack = if opts.relax_c2 { p_support.len() } else { 0 };
    let width = n_p + n_slack;
    let mut a = Vec::new();
    let mut b = Vec::new();
    let mut labels = Vec::new();

    for j in q.support() {
        let mut row = vec![0.0; width];
        for i in 0..d {
            for k in 0..g {
                row[var(i, k, j)] = 1.0;
            }
        }
        a.push(row);
        b.push(1.0);
        labels.push(format!("C1[j={j}]"));
    }
    for (s, &i) in p_support.iter().enumerate() {
        let mut row = vec![0.0; width];
        for k in 0..g {
            let e = grid.get(k).exp2();
            for j in 0..dp {
                row[var(i, k, j)] = e;
            }
        }
        if opts.relax_c2 {
            row[n_p + s] = 1.0;
        }
        a.push(row);
        b.push(1.0);
        labels.push(format!("C2[i={i}]"));
    }
    for i in 0..d {
        let mut row = vec![0.0; width];
        for k in 0..g {
            for j in 0..dp {
                row[var(i, k, j)] = q.get(j);
            }
        }
        a.push(row);
        b.push(p.get(i));
        labels.push(format!("C3[i={i}]"));
    }
    if let Some(target) = opts.mean_w_target {
        let mut row = vec![0.0; width];
        for i in 0..d {
            for k in 0..g {
                for j in 0..dp {
                    row[var(i, k, j)] = q.get(j) * grid.get(k);
                }
            }
        }
        a.push(row);
        b.push(target);
        labels.push("mean_work".into());
    }
    LpSystem { a, b, labels, n_p }
}

/// Decide whether some `P` on `grid` satisfies C1-C3 (and the options).
pub fn feasibility_lp(
    p: &SchmidtVector,
    q: &SchmidtVector,
    grid: &WorkGrid,
    opts: &FeasibilityOptions,
) -> Result<FeasibilityResult> {
    if let Some(t) = opts.mean_w_target {
        if !t.is_finite() {
            return Err(Error::Validation("mean work target must be finite".into()));
        }
    }
    let sys = build_system(p, q, grid, opts);
    match simplex::solve(&sys.a, &sys.b, None)? {
        LpOutcome::Feasible { x, .. } => {
            let (g, dp) = (grid.len(), q.len());
            let entries: Vec<_> = x[..sys.n_p]
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > 0.0)
                .map(|(idx, &v)| (idx / (dp * g), (idx / dp) % g, idx % dp, v))
                .collect();
            let witness = TransferMatrix::new(p.clone(), q.clone(), grid.clone(), &entries)?;
            Ok(FeasibilityResult {
                feasible: true,
                witness: Some(witness),
                certificate: None,
            })
        }
        LpOutcome::Infeasible { certificate } => {
            let width = sys.a.first().map_or(0, |r| r.len());
            let max_dual_slack = (0..width)
                .map(|c| numeric::sum(sys.a.iter().zip(&certificate).map(|(row, y)| row[c] * y)))
                .fold(f64::NEG_INFINITY, f64::max);
            let rhs_value = numeric::sum(sys.b.iter().zip(&certificate).map(|(b, y)| b * y));
            Ok(FeasibilityResult {
                feasible: false,
                witness: None,
                certificate: Some(FarkasCertificate {
                    labels: sys.labels,
                    duals: certificate,
                    max_dual_slack,
                    rhs_value,
                }),
            })
        }
        LpOutcome::Unbounded => Err(Error::Solver(
            "feasibility problem reported unbounded".into(),
        )),
    }
}

/// Probabilities over the points of a work grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkDistribution {
    points: Vec<(f64, f64)>,
}

impl WorkDistribution {
    /// Validated distribution; points are sorted by `w`.
    pub fn new(mut points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyGrid);
        }
        for &(w, pr) in &points {
            if !w.is_finite() || !pr.is_finite() || pr < 0.0 {
                return Err(Error::Validation(format!("invalid point ({w}, {pr})")));
            }
        }
        let total = numeric::sum(points.iter().map(|x| x.1));
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Validation(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self { points })
    }

    /// Unchecked construction for marginals of already-validated data.
    pub(crate) fn from_points(points: Vec<(f64, f64)>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn total(&self) -> f64 {
        numeric::sum(self.points.iter().map(|x| x.1))
    }

    pub fn mean(&self) -> f64 {
        numeric::sum(self.points.iter().map(|(w, pr)| w * pr))
    }

    /// `sum_w P(w) 2^w`.
    pub fn mean_exp2(&self) -> f64 {
        numeric::sum(self.points.iter().map(|(w, pr)| w.exp2() * pr))
    }

    /// Probability at `w` (within grid tolerance).
    pub fn prob_at(&self, w: f64) -> f64 {
        numeric::sum(
            self.points
                .iter()
                .filter(|(x, _)| (x - w).abs() <= GRID_TOL)
                .map(|x| x.1),
        )
    }

    /// CSV with header `w,prob`, sorted by `w`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("w,prob\n");
        for (w, pr) in &self.points {
            let _ = writeln!(
                out,
                "{},{}",
                numeric::format_csv_float(*w),
                numeric::format_csv_float(*pr)
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        match lines.next().map(str::trim) {
            Some("w,prob") => {}
            _ => return Err(Error::Validation("expected header `w,prob`".into())),
        }
        let mut points = Vec::new();
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Validation(format!("bad CSV row {}", n + 2)))
            };
            let w = parse(parts.next())?;
            let pr = parse(parts.next())?;
            points.push((w, pr));
        }
        Self::new(points)
    }
}

/// `P(w) = sum_{i,j} P(i,w|j) q_j` for every grid point.
pub fn work_marginal(t: &TransferMatrix) -> WorkDistribution {
    let points = (0..t.grid().len())
        .map(|k| {
            let mut s = CompensatedSum::new();
            for i in 0..t.d() {
                for j in 0..t.d_out() {
                    s.add(t.get(i, k, j) * t.q().get(j));
                }
            }
            (t.grid().get(k), s.value())
        })
        .collect();
    WorkDistribution::from_points(points)
}

/// Expected work `sum_w w P(w)`.
pub fn mean_work(t: &TransferMatrix) -> f64 {
    work_marginal(t).mean()
}

/// `S(p) - S(q)`, the largest achievable mean work.
pub fn entropy_gap(t: &TransferMatrix) -> f64 {
    entanglement_entropy(t.p()) - entanglement_entropy(t.q())
}

/// Joint probabilities `P(i, j, w) = P(i,w|j) q_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointDistribution {
    /// `(i, j, w, probability)` with positive probability.
    pub entries: Vec<(usize, usize, f64, f64)>,
}

impl JointDistribution {
    pub fn total(&self) -> f64 {
        numeric::sum(self.entries.iter().map(|e| e.3))
    }
}

pub fn joint_distribution(t: &TransferMatrix) -> JointDistribution {
    let entries = t
        .entries()
        .filter(|&(_, _, j, _)| t.q().get(j) > 0.0)
        .map(|(i, k, j, v)| (i, j, t.grid().get(k), v * t.q().get(j)))
        .collect();
    JointDistribution { entries }
}

/// Samples drawn per independently seeded block.
pub const SAMPLE_BLOCK: u64 = 1 << 16;

/// Counts of sampled `(i, j, w)` outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalTable {
    pub count: u64,
    pub seed: u64,
    grid: WorkGrid,
    d: usize,
    d_out: usize,
    counts: Vec<u64>,
}

impl EmpiricalTable {
    pub fn frequency(&self, i: usize, k: usize, j: usize) -> f64 {
        self.counts[(i * self.grid.len() + k) * self.d_out + j] as f64 / self.count as f64
    }

    /// Empirical `P(w)` per grid point.
    pub fn work_frequencies(&self) -> WorkDistribution {
        let g = self.grid.len();
        let mut per_k = vec![0u64; g];
        for (idx, &c) in self.counts.iter().enumerate() {
            per_k[(idx / self.d_out) % g] += c;
        }
        WorkDistribution::from_points(
            (0..g)
                .map(|k| (self.grid.get(k), per_k[k] as f64 / self.count as f64))
                .collect(),
        )
    }

    /// Sample mean of `2^w` and its standard error.
    pub fn mean_exp2_work(&self) -> (f64, f64) {
        let dist = self.work_frequencies();
        let mean = dist.mean_exp2();
        let second = numeric::sum(dist.points().iter().map(|(w, pr)| (2.0 * w).exp2() * pr));
        let var = (second - mean * mean).max(0.0);
        let n = self.count as f64;
        let stderr = if self.count > 1 {
            (var * n / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        (mean, stderr)
    }

    /// CSV `i,j,w,count,freq` over observed outcomes in index order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,w,count,freq\n");
        let g = self.grid.len();
        for i in 0..self.d {
            for j in 0..self.d_out {
                for k in 0..g {
                    let c = self.counts[(i * g + k) * self.d_out + j];
                    if c > 0 {
                        let _ = writeln!(
                            out,
                            "{i},{j},{},{c},{}",
                            numeric::format_csv_float(self.grid.get(k)),
                            numeric::format_csv_float(c as f64 / self.count as f64)
                        );
                    }
                }
            }
        }
        out
    }
}

/// Derive an independent seed for `block` from the user seed (SplitMix64).
fn block_seed(seed: u64, block: u64) -> u64 {
    let mut z = seed ^ block.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw `j ~ q`, then `(i, w) ~ P(., . | j)`, `count` times.
///
/// Blocks of [`SAMPLE_BLOCK`] draws use seeds derived from `(seed, block)`,
/// so the result does not depend on how many threads run.
pub fn sample_joint(t: &TransferMatrix, count: u64, seed: u64) -> Result<EmpiricalTable> {
    if count == 0 {
        return Err(Error::Validation("count must be positive".into()));
    }
    let report = verify_conditions(t, STRUCTURAL_TOL);
    if !report.pass {
        return Err(Error::Precondition(format!(
            "transfer matrix fails its conditions (residuals {:e}, {:e}, {:e})",
            report.c1_residual, report.c2_residual, report.c3_residual
        )));
    }
    let (d, g, dp) = (t.d(), t.grid().len(), t.d_out());
    let column_pick = WeightedIndex::new(t.q().coeffs())
        .map_err(|e| Error::Validation(format!("cannot sample final index: {e}")))?;
    let mut conditionals: Vec<Option<(Vec<usize>, WeightedIndex<f64>)>> = Vec::with_capacity(dp);
    for j in 0..dp {
        if t.q().get(j) <= 0.0 {
            conditionals.push(None);
            continue;
        }
        let mut cells = Vec::new();
        let mut weights = Vec::new();
        for i in 0..d {
            for k in 0..g {
                let v = t.get(i, k, j);
                if v > 0.0 {
                    cells.push((i * g + k) * dp + j);
                    weights.push(v);
                }
            }
        }
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::Validation(format!("column {j} cannot be sampled: {e}")))?;
        conditionals.push(Some((cells, dist)));
    }

    let blocks = count.div_ceil(SAMPLE_BLOCK);
    let counts = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let n = SAMPLE_BLOCK.min(count - b * SAMPLE_BLOCK);
            let mut rng = ChaCha8Rng::seed_from_u64(block_seed(seed, b));
            let mut local = vec![0u64; d * g * dp];
            for _ in 0..n {
                let j = column_pick.sample(&mut rng);
                let (cells, dist) = conditionals[j].as_ref().expect("sampled column has mass");
                local[cells[dist.sample(&mut rng)]] += 1;
            }
            local
        })
        .reduce(
            || vec![0u64; d * g * dp],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    Ok(EmpiricalTable {
        count,
        seed,
        grid: t.grid().clone(),
        d,
        d_out: dp,
        counts,
    })
}
