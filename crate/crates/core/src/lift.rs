//! Finite-battery lift of a transfer matrix to a doubly stochastic matrix.
//!
//! Work values are quantized to battery steps `a_w`, giving the block matrix
//! `P(i,x|j,x') = sum_w P(i,w|j) [x' - x = a_w]`. Dividing by the level
//! multiplicity `xi_x` yields a sub-stochastic `R` acting on individual
//! Schmidt terms `(i, x, z)` with `z` ranging over the `xi_x` terms of level
//! `x`. Each row's deficit is spread evenly over the columns outside the
//! window, which completes `R` to a doubly stochastic matrix mapping the
//! final Schmidt coefficients onto the initial ones.
//!
//! Matrices are kept in block form; entrywise enumeration happens only when
//! the dimension is at most [`MATERIALIZE_LIMIT`].

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::battery::{fidelity_bound, quantize_work, BatteryConfig};
use crate::error::{Error, Result};
use crate::numeric::{self, CompensatedSum, STRUCTURAL_TOL};
use crate::transfer::{verify_conditions, TransferMatrix};

/// Largest square dimension enumerated entry by entry.
pub const MATERIALIZE_LIMIT: u64 = 10_000;

fn fingerprint(t: &TransferMatrix, cfg: &BatteryConfig) -> u64 {
    let mut h = DefaultHasher::new();
    cfg.hash(&mut h);
    for v in t
        .p()
        .coeffs()
        .iter()
        .chain(t.q().coeffs())
        .chain(t.grid().values())
    {
        v.to_bits().hash(&mut h);
    }
    for (i, k, j, v) in t.entries() {
        (i, k, j, v.to_bits()).hash(&mut h);
    }
    h.finish()
}

fn exact(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite value")
}

fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A transfer matrix quantized onto the levels of a battery.
#[derive(Debug, Clone)]
pub struct LiftedTransfer {
    base: TransferMatrix,
    cfg: BatteryConfig,
    /// `(a, block)` sorted by shift; `block[i * d_out + j] = sum_{w: a_w = a} P(i,w|j)`.
    shifts: Vec<(i64, Vec<f64>)>,
    /// Quantized shift for each grid point.
    work_shift: Vec<i64>,
    fingerprint: u64,
}

/// Quantize `t` onto `cfg`. Requires C1-C3 to hold at 1e-9 and every
/// quantized shift to fit inside the window margin.
pub fn lift(t: &TransferMatrix, cfg: &BatteryConfig) -> Result<LiftedTransfer> {
    let report = verify_conditions(t, STRUCTURAL_TOL);
    if !report.pass {
        return Err(Error::Precondition(format!(
            "base matrix fails its conditions (residuals {:e}, {:e}, {:e})",
            report.c1_residual, report.c2_residual, report.c3_residual
        )));
    }
    let work_shift: Vec<i64> = t
        .grid()
        .values()
        .iter()
        .map(|&w| quantize_work(cfg.u(), w))
        .collect();
    let active = t.active_grid_indices();
    let a_max = active
        .iter()
        .map(|&k| work_shift[k].unsigned_abs())
        .max()
        .unwrap_or(0);
    if a_max > cfg.margin() as u64 {
        return Err(Error::BatteryTooSmall {
            lo: cfg.window_lo(),
            hi: cfg.window_hi(),
            a_max: a_max.min(u32::MAX as u64) as u32,
            n: cfg.n(),
        });
    }
    let (d, dp) = (t.d(), t.d_out());
    let mut shifts: Vec<(i64, Vec<f64>)> = Vec::new();
    for &k in &active {
        let a = work_shift[k];
        let pos = match shifts.binary_search_by_key(&a, |s| s.0) {
            Ok(pos) => pos,
            Err(pos) => {
                shifts.insert(pos, (a, vec![0.0; d * dp]));
                pos
            }
        };
        for i in 0..d {
            for j in 0..dp {
                shifts[pos].1[i * dp + j] += t.get(i, k, j);
            }
        }
    }
    Ok(LiftedTransfer {
        base: t.clone(),
        cfg: *cfg,
        shifts,
        work_shift,
        fingerprint: fingerprint(t, cfg),
    })
}

impl LiftedTransfer {
    pub fn base(&self) -> &TransferMatrix {
        &self.base
    }

    pub fn cfg(&self) -> &BatteryConfig {
        &self.cfg
    }

    /// Quantized shift `a_w` of grid point `k`.
    pub fn work_shift(&self, k: usize) -> i64 {
        self.work_shift[k]
    }

    /// Distinct shifts carrying weight, in increasing order.
    pub fn shifts(&self) -> impl Iterator<Item = i64> + '_ {
        self.shifts.iter().map(|s| s.0)
    }

    /// Largest `|a_w|` over grid points carrying weight.
    pub fn a_max(&self) -> u32 {
        self.shifts
            .iter()
            .map(|s| s.0.unsigned_abs() as u32)
            .max()
            .unwrap_or(0)
    }

    fn block(&self, i: usize, s: i64, j: usize) -> f64 {
        match self.shifts.binary_search_by_key(&s, |b| b.0) {
            Ok(pos) => self.shifts[pos].1[i * self.base.d_out() + j],
            Err(_) => 0.0,
        }
    }

    /// `P(i,x|j,x')`; zero when either level is outside `0..=n`.
    pub fn entry(&self, i: usize, x: i64, j: usize, xp: i64) -> f64 {
        let n = self.cfg.n() as i64;
        if x < 0 || xp < 0 || x > n || xp > n {
            return 0.0;
        }
        self.block(i, xp - x, j)
    }

    /// Max over `j` in the support of `q` and window levels `x'` of
    /// `|sum_{i,x} P(i,x|j,x') - 1|`.
    pub fn stochastic_residual(&self) -> f64 {
        let n = self.cfg.n() as i64;
        let mut worst = 0.0f64;
        for j in self.base.q().support() {
            for xp in self.cfg.window() {
                let xp = xp as i64;
                let s: f64 = numeric::sum(
                    (0..self.base.d())
                        .flat_map(|i| (0..=n).map(move |x| (i, x)))
                        .map(|(i, x)| self.entry(i, x, j, xp)),
                );
                worst = worst.max((s - 1.0).abs());
            }
        }
        worst
    }

    /// Max over rows `i` of `sum_{j,x'} P(i,x|j,x') (u/(u-1))^(x'-x)`, which
    /// does not depend on `x` away from the battery edges.
    pub fn gibbs_row_max(&self) -> f64 {
        let ratio = self.cfg.u() as f64 / (self.cfg.u() as f64 - 1.0);
        let dp = self.base.d_out();
        (0..self.base.d())
            .map(|i| {
                numeric::sum(self.shifts.iter().flat_map(|(a, block)| {
                    (0..dp).map(move |j| block[i * dp + j] * ratio.powi(*a as i32))
                }))
            })
            .fold(0.0, f64::max)
    }
}

/// Perturbations used as negative controls for the explicit check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    None,
    /// Add to every fill entry.
    Fill(f64),
    /// Add to every nonzero entry inside the window columns.
    Block(f64),
}

/// The completed doubly stochastic matrix, in block form.
#[derive(Debug, Clone)]
pub struct CompletedBistochastic {
    lifted: LiftedTransfer,
    /// Square dimension in Schmidt-index blocks: `max(d, d_out)`.
    dim: usize,
    xi: Vec<BigUint>,
    /// `sum_x xi_x`.
    m_total: BigUint,
    /// Columns outside the window, `dim * m_total - |supp q| * sum_window xi`.
    fill_count: BigUint,
    /// Row deficit `r_{i,x}` for `i < dim`, indexed `i * (n+1) + x`.
    deficits: Vec<BigRational>,
}

/// Exact aggregate row and column sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub row_max_residual: f64,
    pub col_max_residual: f64,
    /// All sums equal 1 in exact arithmetic.
    pub exact: bool,
}

/// Entrywise sums of the materialized matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplicitReport {
    pub row_max_residual: f64,
    pub col_max_residual: f64,
    pub mapping_residual: f64,
}

/// Combined verification of a completion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub row_max_residual: f64,
    pub col_max_residual: f64,
    pub mapping_residual: f64,
    pub materialized: bool,
}

/// Spread each row's deficit over the columns outside the window.
pub fn complete(l: &LiftedTransfer) -> Result<CompletedBistochastic> {
    let cfg = &l.cfg;
    let base = &l.base;
    let n = cfg.n() as i64;
    let dim = base.d().max(base.d_out());
    let xi = cfg.multiplicities();
    let m_total: BigUint = xi.iter().sum();
    let window_xi: BigUint = cfg.window().map(|x| xi[x as usize].clone()).sum();
    let support_q = base.q().support();
    let window_cols = BigUint::from(support_q.len()) * &window_xi;
    let fill_count = BigUint::from(dim) * &m_total - window_cols;

    let xi_r: Vec<BigRational> = xi
        .iter()
        .map(|v| BigRational::from_integer(BigInt::from(v.clone())))
        .collect();
    let mut deficits = Vec::with_capacity(dim * (n as usize + 1));
    for i in 0..dim {
        for x in 0..=n {
            let mut r = BigRational::zero();
            if i < base.d() {
                for (s, block) in &l.shifts {
                    let xp = x + s;
                    if !cfg.in_window(xp) {
                        continue;
                    }
                    let weight: BigRational = support_q
                        .iter()
                        .map(|&j| exact(block[i * base.d_out() + j]))
                        .sum();
                    if !weight.is_zero() {
                        r += weight * &xi_r[xp as usize] / &xi_r[x as usize];
                    }
                }
            }
            deficits.push(r);
        }
    }
    if fill_count.is_zero() && deficits.iter().any(|r| !r.is_one()) {
        return Err(Error::Domain(
            "no columns outside the window to absorb row deficits".into(),
        ));
    }
    Ok(CompletedBistochastic {
        lifted: l.clone(),
        dim,
        xi,
        m_total,
        fill_count,
        deficits,
    })
}

impl CompletedBistochastic {
    pub fn lifted(&self) -> &LiftedTransfer {
        &self.lifted
    }

    /// Total number of battery Schmidt terms, `M_T`.
    pub fn m_total(&self) -> &BigUint {
        &self.m_total
    }

    /// Number of battery columns outside the window, `M_T - sum_window xi`.
    pub fn m_outside(&self) -> BigUint {
        let window: BigUint = self
            .lifted
            .cfg
            .window()
            .map(|x| self.xi[x as usize].clone())
            .sum();
        &self.m_total - window
    }

    /// Number of fill columns.
    pub fn fill_count(&self) -> &BigUint {
        &self.fill_count
    }

    /// Square dimension `max(d, d_out) * M_T`.
    pub fn dimension(&self) -> BigUint {
        BigUint::from(self.dim) * &self.m_total
    }

    pub fn is_materializable(&self) -> bool {
        self.dimension() <= BigUint::from(MATERIALIZE_LIMIT)
    }

    /// Exact row deficit sum `r_{i,x}` of level-`x` rows.
    pub fn deficit(&self, i: usize, x: u32) -> &BigRational {
        &self.deficits[i * (self.lifted.cfg.n() as usize + 1) + x as usize]
    }

    /// Fill value `(1 - r_{i,x}) / F` as an exact rational.
    pub fn fill_value(&self, i: usize, x: u32) -> BigRational {
        if self.fill_count.is_zero() {
            return BigRational::zero();
        }
        (BigRational::one() - self.deficit(i, x))
            / BigRational::from_integer(BigInt::from(self.fill_count.clone()))
    }

    /// Row and column sums from the block structure in exact arithmetic.
    pub fn aggregate_report(&self) -> AggregateReport {
        let cfg = &self.lifted.cfg;
        let base = &self.lifted.base;
        let n = cfg.n() as i64;
        let one = BigRational::one();
        let f = BigRational::from_integer(BigInt::from(self.fill_count.clone()));
        let mut row_worst = BigRational::zero();
        let mut fill_col = BigRational::zero();
        for i in 0..self.dim {
            for x in 0..=cfg.n() {
                let fill = self.fill_value(i, x);
                let row = self.deficit(i, x) + &fill * &f;
                row_worst = row_worst.max((row - &one).abs());
                fill_col +=
                    fill * BigRational::from_integer(BigInt::from(self.xi[x as usize].clone()));
            }
        }
        let mut col_worst = if self.fill_count.is_zero() {
            BigRational::zero()
        } else {
            (fill_col - &one).abs()
        };
        for j in base.q().support() {
            for xp in cfg.window() {
                let mut s = BigRational::zero();
                for i in 0..base.d() {
                    for (a, block) in &self.lifted.shifts {
                        let x = xp as i64 - a;
                        if (0..=n).contains(&x) {
                            s += exact(block[i * base.d_out() + j]);
                        }
                    }
                }
                col_worst = col_worst.max((s - &one).abs());
            }
        }
        AggregateReport {
            row_max_residual: rational_to_f64(&row_worst),
            col_max_residual: rational_to_f64(&col_worst),
            exact: row_worst.is_zero() && col_worst.is_zero(),
        }
    }

    /// Enumerate the matrix entry by entry and check row sums, column sums
    /// and the Schmidt mapping in floating point.
    pub fn explicit_check(
        &self,
        b: &BoundaryStates,
        perturbation: Perturbation,
    ) -> Result<ExplicitReport> {
        self.check_provenance(b)?;
        if !self.is_materializable() {
            return Err(Error::Domain(format!(
                "dimension {} exceeds the materialization limit {MATERIALIZE_LIMIT}",
                self.dimension()
            )));
        }
        let layout = Layout::new(self);
        let size = layout.labels.len();
        let mut col_sums = vec![CompensatedSum::new(); size];
        let mut row_worst = 0.0f64;
        let mut map_worst = 0.0f64;
        let phi: Vec<f64> = layout
            .labels
            .iter()
            .map(|&(j, xp)| b.phi_schmidt(j, xp))
            .collect();
        let mut row = vec![0.0; size];
        for &(i, x) in &layout.labels {
            self.fill_row(&layout, i, x, perturbation, &mut row);
            let mut rs = CompensatedSum::new();
            let mut ms = CompensatedSum::new();
            for (c, &v) in row.iter().enumerate() {
                rs.add(v);
                col_sums[c].add(v);
                if phi[c] != 0.0 {
                    ms.add(v * phi[c]);
                }
            }
            row_worst = row_worst.max((rs.value() - 1.0).abs());
            map_worst = map_worst.max((ms.value() - b.psi_schmidt(i, x)).abs());
        }
        let col_worst = col_sums
            .iter()
            .map(|s| (s.value() - 1.0).abs())
            .fold(0.0, f64::max);
        Ok(ExplicitReport {
            row_max_residual: row_worst,
            col_max_residual: col_worst,
            mapping_residual: map_worst,
        })
    }

    /// One materialized row `(i, x, .)` in the column order of `layout`.
    fn fill_row(
        &self,
        layout: &Layout,
        i: usize,
        x: u32,
        perturbation: Perturbation,
        row: &mut [f64],
    ) {
        let base = &self.lifted.base;
        let fill = rational_to_f64(&self.fill_value(i, x));
        let xi_x = layout.xi[x as usize];
        for (c, &(j, xp)) in layout.labels.iter().enumerate() {
            let inside =
                j < base.d_out() && base.q().in_support(j) && self.lifted.cfg.in_window(xp as i64);
            row[c] = if inside {
                let v = if i < base.d() {
                    self.lifted.entry(i, x as i64, j, xp as i64) / xi_x
                } else {
                    0.0
                };
                match perturbation {
                    Perturbation::Block(delta) if v != 0.0 => v + delta,
                    _ => v,
                }
            } else {
                match perturbation {
                    Perturbation::Fill(delta) => fill + delta,
                    _ => fill,
                }
            };
        }
    }

    /// Dense CSV of the materialized matrix with `(i,x,z)` labels.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        if !self.is_materializable() {
            return Err(Error::Domain(format!(
                "dimension {} exceeds the materialization limit {MATERIALIZE_LIMIT}",
                self.dimension()
            )));
        }
        let io = |e: std::io::Error| Error::Validation(format!("write failed: {e}"));
        let layout = Layout::new(self);
        let mut header = String::from("label");
        for (idx, &(j, xp)) in layout.labels.iter().enumerate() {
            header.push_str(&format!(",\"({j},{xp},{})\"", layout.z[idx]));
        }
        writeln!(out, "{header}").map_err(io)?;
        let mut row = vec![0.0; layout.labels.len()];
        for (idx, &(i, x)) in layout.labels.iter().enumerate() {
            self.fill_row(&layout, i, x, Perturbation::None, &mut row);
            let mut line = format!("\"({i},{x},{})\"", layout.z[idx]);
            for v in &row {
                line.push(',');
                line.push_str(&numeric::format_csv_float(*v));
            }
            writeln!(out, "{line}").map_err(io)?;
        }
        Ok(())
    }

    fn check_provenance(&self, b: &BoundaryStates) -> Result<()> {
        if self.lifted.fingerprint != b.fingerprint {
            return Err(Error::Validation(
                "boundary states and completion come from different lifts".into(),
            ));
        }
        Ok(())
    }
}

/// Row/column order of the materialized matrix: `(index, level)` per
/// Schmidt term, with `z` its position within the level.
struct Layout {
    labels: Vec<(usize, u32)>,
    z: Vec<u64>,
    xi: Vec<f64>,
}

impl Layout {
    fn new(c: &CompletedBistochastic) -> Self {
        let mut labels = Vec::new();
        let mut z = Vec::new();
        for idx in 0..c.dim {
            for (x, m) in c.xi.iter().enumerate() {
                let m = m.to_u64().expect("materializable multiplicity");
                for zz in 0..m {
                    labels.push((idx, x as u32));
                    z.push(zz);
                }
            }
        }
        let xi = c.xi.iter().map(|v| v.to_f64().expect("finite")).collect();
        Self { labels, z, xi }
    }
}

/// Schmidt data of the initial and final system-plus-battery states.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryStates {
    cfg: BatteryConfig,
    p: Vec<f64>,
    /// `psi_N(i, x)` indexed `i * (n+1) + x`.
    psi: Vec<f64>,
    /// `phi_N(j, x')` indexed `j * (n+1) + x'`.
    phi: Vec<f64>,
    xi: Vec<f64>,
    fingerprint: u64,
}

/// Level-resolved Schmidt weights of the states connected by the lift.
pub fn boundary_states(l: &LiftedTransfer) -> BoundaryStates {
    let cfg = &l.cfg;
    let base = &l.base;
    let levels = cfg.n() as usize + 1;
    let width = cfg.big_n() as f64 + 1.0;
    let (d, dp) = (base.d(), base.d_out());
    let mut psi = vec![0.0; d * levels];
    for i in 0..d {
        for x in 0..levels {
            psi[i * levels + x] = numeric::sum(
                l.shifts
                    .iter()
                    .filter(|(a, _)| cfg.in_window(x as i64 + a))
                    .map(|(_, block)| {
                        let p_is =
                            numeric::sum((0..dp).map(|j| block[i * dp + j] * base.q().get(j)));
                        p_is / width
                    }),
            );
        }
    }
    let mut phi = vec![0.0; dp * levels];
    for j in 0..dp {
        for x in cfg.window() {
            phi[j * levels + x as usize] = base.q().get(j) / width;
        }
    }
    BoundaryStates {
        cfg: *cfg,
        p: base.p().coeffs().to_vec(),
        psi,
        phi,
        xi: cfg
            .multiplicities()
            .iter()
            .map(|v| v.to_f64().expect("finite"))
            .collect(),
        fingerprint: l.fingerprint,
    }
}

impl BoundaryStates {
    fn levels(&self) -> usize {
        self.cfg.n() as usize + 1
    }

    /// Total weight of level `x` of index `i` in the initial state.
    pub fn psi(&self, i: usize, x: u32) -> f64 {
        self.psi
            .get(i * self.levels() + x as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// Total weight of level `x'` of index `j` in the final state.
    pub fn phi(&self, j: usize, x: u32) -> f64 {
        self.phi
            .get(j * self.levels() + x as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// Squared Schmidt coefficient of one term `(i, z)` with `z` in level `x`.
    pub fn psi_schmidt(&self, i: usize, x: u32) -> f64 {
        self.psi(i, x) / self.xi[x as usize]
    }

    pub fn phi_schmidt(&self, j: usize, x: u32) -> f64 {
        self.phi(j, x) / self.xi[x as usize]
    }

    pub fn psi_total(&self) -> f64 {
        numeric::sum(self.psi.iter().copied())
    }

    pub fn phi_total(&self) -> f64 {
        numeric::sum(self.phi.iter().copied())
    }

    pub fn cfg(&self) -> &BatteryConfig {
        &self.cfg
    }
}

/// Max over Schmidt terms `(i, z)` of `|(R~ phi)(i,z) - psi(i,z)|`.
///
/// Uses the materialized matrix when it is small enough and the block
/// formula otherwise.
pub fn verify_schmidt_mapping(c: &CompletedBistochastic, b: &BoundaryStates) -> Result<f64> {
    c.check_provenance(b)?;
    if c.is_materializable() {
        return Ok(c.explicit_check(b, Perturbation::None)?.mapping_residual);
    }
    let l = &c.lifted;
    let base = &l.base;
    let n = l.cfg.n();
    let mut worst = 0.0f64;
    for i in 0..base.d() {
        for x in 0..=n {
            let mut s = CompensatedSum::new();
            for j in base.q().support() {
                for xp in l.cfg.window() {
                    let v = l.entry(i, x as i64, j, xp as i64);
                    if v != 0.0 {
                        // xi_{x'} identical terms of weight phi/xi_{x'} each.
                        s.add(v / b.xi[x as usize] * b.phi(j, xp));
                    }
                }
            }
            worst = worst.max((s.value() - b.psi_schmidt(i, x)).abs());
        }
    }
    Ok(worst)
}

/// Row/column sums and mapping residual, explicit when small enough.
pub fn verification_report(c: &CompletedBistochastic, b: &BoundaryStates) -> Result<LiftReport> {
    c.check_provenance(b)?;
    if c.is_materializable() {
        let e = c.explicit_check(b, Perturbation::None)?;
        Ok(LiftReport {
            row_max_residual: e.row_max_residual,
            col_max_residual: e.col_max_residual,
            mapping_residual: e.mapping_residual,
            materialized: true,
        })
    } else {
        let agg = c.aggregate_report();
        Ok(LiftReport {
            row_max_residual: agg.row_max_residual,
            col_max_residual: agg.col_max_residual,
            mapping_residual: verify_schmidt_mapping(c, b)?,
            materialized: false,
        })
    }
}

/// Overlap of the lifted initial state with `p` times a uniform battery over
/// all `n + 1` levels, with its guaranteed lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub overlap: f64,
    pub bound: f64,
}

/// `sum_{i,x} sqrt(p_i / (n+1) * psi_N(i,x))`.
///
/// The bound is `(N+1)/(N+1+2m)` with `m = (n-N)/2` the window margin,
/// which is at least the largest quantized shift.
pub fn product_overlap(b: &BoundaryStates) -> OverlapReport {
    let levels = b.levels();
    let overlap = numeric::sum(b.p.iter().enumerate().flat_map(|(i, &pi)| {
        (0..levels).map(move |x| (pi / levels as f64 * b.psi[i * levels + x]).sqrt())
    }));
    OverlapReport {
        overlap,
        bound: fidelity_bound(b.cfg.big_n(), b.cfg.margin()),
    }
}
