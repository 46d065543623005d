//! Concentration, dilution, conversion rates and ensemble targets.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, SUPPORT_THRESHOLD};
use crate::schmidt::{
    ensemble_average, entanglement_entropy, majorizes, EnsembleMember, PureEnsemble, SchmidtVector,
};
use crate::transfer::{
    canonical_reversible, feasibility_lp, FeasibilityOptions, TransferMatrix, WorkDistribution,
    WorkGrid,
};

/// Binomials are exact up to this many copies; beyond it, log-space.
pub const EXACT_BINOMIAL_LIMIT: u32 = 64;

/// Largest battery-free dilution source, `2^m` Schmidt terms.
pub const MAX_DILUTION_EBITS: u32 = 20;

/// `n` copies of `sqrt(p)|00> + sqrt(1-p)|11>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct ConcentrationSpec {
    n_copies: u32,
    p: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    n: u32,
    p: f64,
}

impl TryFrom<RawSpec> for ConcentrationSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        ConcentrationSpec::new(raw.n, raw.p)
    }
}

impl From<ConcentrationSpec> for RawSpec {
    fn from(s: ConcentrationSpec) -> Self {
        RawSpec {
            n: s.n_copies,
            p: s.p,
        }
    }
}

impl ConcentrationSpec {
    pub fn new(n_copies: u32, p: f64) -> Result<Self> {
        if n_copies == 0 {
            return Err(Error::Validation(
                "number of copies must be positive".into(),
            ));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Validation(format!("p must lie in (0, 1), got {p}")));
        }
        Ok(Self { n_copies, p })
    }

    pub fn n_copies(&self) -> u32 {
        self.n_copies
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// `C(n, t)` for every `t`.
fn binomial_row(n: u32) -> Vec<BigUint> {
    let mut row = vec![BigUint::one()];
    for t in 0..n {
        let next = &row[t as usize] * BigUint::from(n - t) / BigUint::from(t + 1);
        row.push(next);
    }
    row
}

fn ln_binomial(n: u32, t: u32) -> f64 {
    let t = t.min(n - t);
    numeric::sum((0..t).map(|k| ((n - k) as f64).ln() - ((k + 1) as f64).ln()))
}

/// Exact outcome table: distinct `C(n,t)` with their total probability, in
/// increasing order of the binomial.
pub fn concentration_exact(n: u32, p: &BigRational) -> Result<Vec<(BigUint, BigRational)>> {
    if n == 0 {
        return Err(Error::Validation(
            "number of copies must be positive".into(),
        ));
    }
    if *p <= BigRational::zero() || *p >= BigRational::one() {
        return Err(Error::Validation("p must lie in (0, 1)".into()));
    }
    let q = BigRational::one() - p;
    let mut out: Vec<(BigUint, BigRational)> = Vec::new();
    for (t, c) in binomial_row(n).into_iter().enumerate() {
        let t = t as i32;
        let prob = BigRational::from_integer(BigInt::from(c.clone()))
            * num_traits::pow::pow(p.clone(), (n as i32 - t) as usize)
            * num_traits::pow::pow(q.clone(), t as usize);
        match out.iter_mut().find(|(b, _)| *b == c) {
            Some(entry) => entry.1 += prob,
            None => out.push((c, prob)),
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Work distribution of measuring the type class: `w = log2 C(n,t)` with
/// probability `C(n,t) p^(n-t) (1-p)^t`, merged over equal binomials.
pub fn concentration_distribution(spec: &ConcentrationSpec) -> WorkDistribution {
    let n = spec.n_copies;
    let (lp, lq) = (spec.p.ln(), (1.0 - spec.p).ln());
    let mut points: Vec<(f64, f64)> = Vec::new();
    if n <= EXACT_BINOMIAL_LIMIT {
        let p = BigRational::from_float(spec.p).expect("finite p");
        for (c, prob) in concentration_exact(n, &p).expect("validated spec") {
            let w = c.to_f64().expect("finite binomial").log2();
            points.push((w, prob.to_f64().expect("probability in range")));
        }
    } else {
        for t in 0..=n / 2 {
            let lc = ln_binomial(n, t);
            let mut prob = (lc + (n - t) as f64 * lp + t as f64 * lq).exp();
            if t != n - t {
                prob += (lc + t as f64 * lp + (n - t) as f64 * lq).exp();
            }
            points.push((lc / std::f64::consts::LN_2, prob));
        }
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    WorkDistribution::from_points(points)
}

/// Mean yield `sum_t P(t) log2 C(n,t)`.
pub fn concentration_mean(spec: &ConcentrationSpec) -> f64 {
    concentration_distribution(spec).mean()
}

/// The ensemble of maximally entangled outcomes, one member per type class.
pub fn concentration_ensemble(spec: &ConcentrationSpec) -> Result<PureEnsemble> {
    let n = spec.n_copies;
    if n > 24 {
        return Err(Error::Domain(format!(
            "ensemble members of dimension C({n}, t) are too large to list"
        )));
    }
    let p = BigRational::from_float(spec.p).expect("finite p");
    // Type classes t and n - t give the same maximally entangled outcome and
    // are merged by the exact table.
    let members = concentration_exact(n, &p)?
        .into_iter()
        .map(|(c, prob)| -> Result<EnsembleMember> {
            let dim = c.to_usize().expect("small binomial");
            let weight = prob.to_f64().expect("probability in range");
            Ok(EnsembleMember {
                weight,
                coeffs: SchmidtVector::uniform(dim)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // Renormalize away the rounding of exact weights to floats.
    let total = numeric::sum(members.iter().map(|m| m.weight));
    PureEnsemble::new(
        members
            .into_iter()
            .map(|m| EnsembleMember {
                weight: m.weight / total,
                coeffs: m.coeffs,
            })
            .collect(),
    )
}

/// Schmidt vector of `n` copies of `(p, 1-p)`, in binary-string order.
pub fn product_state(spec: &ConcentrationSpec) -> Result<SchmidtVector> {
    let n = spec.n_copies;
    if n > 20 {
        return Err(Error::Domain(format!(
            "2^{n} coefficients are too many to list"
        )));
    }
    let coeffs: Vec<f64> = (0u32..1 << n)
        .map(|s| {
            let ones = s.count_ones() as i32;
            spec.p.powi(n as i32 - ones) * (1.0 - spec.p).powi(ones)
        })
        .collect();
    SchmidtVector::normalized(&coeffs)
}

/// Reversible dilution from `m` ebits into `target`.
pub fn dilution_canonical(target: &SchmidtVector, m_ebits: u32) -> Result<TransferMatrix> {
    if m_ebits > MAX_DILUTION_EBITS {
        return Err(Error::Domain(format!(
            "m = {m_ebits} exceeds the supported maximum {MAX_DILUTION_EBITS}"
        )));
    }
    let dim = 1usize << m_ebits;
    if dim < target.support_size() {
        return Err(Error::Domain(format!(
            "2^{m_ebits} = {dim} terms cannot dilute into Schmidt rank {}",
            target.support_size()
        )));
    }
    canonical_reversible(&SchmidtVector::uniform(dim)?, target)
}

/// Asymptotic copy ratio `S(psi) / S(phi)`.
pub fn conversion_rate(psi: &SchmidtVector, phi: &SchmidtVector) -> Result<f64> {
    let s_psi = entanglement_entropy(psi);
    let s_phi = entanglement_entropy(phi);
    if s_phi <= SUPPORT_THRESHOLD {
        return Err(Error::Domain("target has zero entanglement".into()));
    }
    if s_psi <= SUPPORT_THRESHOLD {
        return Err(Error::Domain("source has zero entanglement".into()));
    }
    Ok(s_psi / s_phi)
}

/// Reduction of an ensemble target to its average state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReduction {
    pub average: SchmidtVector,
    /// Battery-free test: the average majorizes the initial vector.
    pub feasible_via_average: bool,
    /// Battery-assisted test on the supplied grid, if one was given.
    pub lp_feasible: Option<bool>,
}

pub fn ensemble_reduce(
    e: &PureEnsemble,
    p: &SchmidtVector,
    grid: Option<&WorkGrid>,
) -> Result<EnsembleReduction> {
    let average = ensemble_average(e);
    let feasible_via_average = majorizes(&average, p);
    let lp_feasible = match grid {
        Some(g) => Some(feasibility_lp(p, &average, g, &FeasibilityOptions::default())?.feasible),
        None => None,
    };
    Ok(EnsembleReduction {
        average,
        feasible_via_average,
        lp_feasible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theorems::{mean_work_bound, reverse_matrix};
    use crate::transfer::{mean_work, verify_conditions};

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn concentration_examples() {
        let d = concentration_distribution(&ConcentrationSpec::new(1, 0.3).unwrap());
        assert_eq!(d.points(), &[(0.0, 1.0)]);
        let d = concentration_distribution(&ConcentrationSpec::new(2, 0.5).unwrap());
        assert_eq!(d.points(), &[(0.0, 0.5), (1.0, 0.5)]);

        let exact = concentration_exact(3, &rat(1, 3)).unwrap();
        assert_eq!(exact.len(), 2);
        assert_eq!(exact[0], (BigUint::from(1u32), rat(9, 27)));
        assert_eq!(exact[1], (BigUint::from(3u32), rat(18, 27)));
    }

    #[test]
    fn concentration_sums_exactly() {
        for n in 1..=20 {
            for p in [rat(1, 3), rat(1, 2), rat(2, 7)] {
                let total: BigRational = concentration_exact(n, &p)
                    .unwrap()
                    .into_iter()
                    .map(|x| x.1)
                    .sum();
                assert!(total.is_one());
            }
        }
    }

    #[test]
    fn concentration_means() {
        assert_eq!(
            concentration_mean(&ConcentrationSpec::new(1, 0.5).unwrap()),
            0.0
        );
        assert_eq!(
            concentration_mean(&ConcentrationSpec::new(2, 0.5).unwrap()),
            0.5
        );
        let m12 = concentration_mean(&ConcentrationSpec::new(12, 0.5).unwrap());
        // Exact oracle: sum_t C(12,t)/4096 * log2 C(12,t).
        let row = binomial_row(12);
        let oracle: f64 = row
            .iter()
            .map(|c| {
                let c = c.to_f64().unwrap();
                c / 4096.0 * c.log2()
            })
            .sum();
        assert!((m12 - oracle).abs() < 1e-12);
        assert!(m12 < 12.0);
    }

    #[test]
    fn log_space_matches_exact_path() {
        let spec = ConcentrationSpec::new(80, 0.3).unwrap();
        let d = concentration_distribution(&spec);
        assert!((d.total() - 1.0).abs() < 1e-12);
        let h = -(0.3f64 * 0.3f64.log2() + 0.7 * 0.7f64.log2());
        assert!(d.mean() < 80.0 * h);
    }

    #[test]
    fn dilution_examples() {
        let t = dilution_canonical(&SchmidtVector::uniform(4).unwrap(), 2).unwrap();
        assert_eq!(t.grid().values(), &[0.0]);
        let target = SchmidtVector::new(vec![0.75, 0.25]).unwrap();
        let t = dilution_canonical(&target, 1).unwrap();
        assert!((t.grid().get(0) + 1.0).abs() < 1e-15);
        assert!((t.grid().get(1) - 1.5f64.log2()).abs() < 1e-15);
        let expected = 1.0 - entanglement_entropy(&target);
        assert!((mean_work(&t) - expected).abs() < 1e-12);
        assert!(verify_conditions(&t, 1e-12).pass);
        assert!(mean_work_bound(&t).residual == 0.0 || mean_work_bound(&t).pass);
        let rev = reverse_matrix(&t).unwrap();
        assert!((mean_work(&rev) + expected).abs() < 1e-12);
        for (k, w) in rev.grid().values().iter().enumerate() {
            assert_eq!(*w, -t.grid().get(t.grid().len() - 1 - k));
        }
        assert!(dilution_canonical(&SchmidtVector::uniform(3).unwrap(), 1).is_err());
        assert!(dilution_canonical(&target, 40).is_err());
    }

    #[test]
    fn conversion_examples() {
        let half = SchmidtVector::uniform(2).unwrap();
        assert_eq!(conversion_rate(&half, &half).unwrap(), 1.0);
        let p = SchmidtVector::new(vec![0.5, 0.25, 0.125, 0.125]).unwrap();
        assert!((conversion_rate(&p, &half).unwrap() - 1.75).abs() < 1e-12);
        let product = SchmidtVector::new(vec![1.0, 0.0]).unwrap();
        assert!(conversion_rate(&half, &product).is_err());

        // Bisection oracle for the coefficient with one half ebit.
        let (mut lo, mut hi) = (1e-9f64, 0.5f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let h = -(mid * mid.log2() + (1.0 - mid) * (1.0 - mid).log2());
            if h < 0.5 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((lo - 0.110028).abs() < 1e-6);
        let psi = SchmidtVector::new(vec![lo, 1.0 - lo]).unwrap();
        assert!((conversion_rate(&psi, &half).unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn ensemble_reduction() {
        let phi = SchmidtVector::new(vec![0.6, 0.4]).unwrap();
        let single = PureEnsemble::new(vec![EnsembleMember {
            weight: 1.0,
            coeffs: phi.clone(),
        }])
        .unwrap();
        let p = SchmidtVector::uniform(2).unwrap();
        let r = ensemble_reduce(&single, &p, None).unwrap();
        assert_eq!(r.average, phi);
        assert_eq!(r.feasible_via_average, majorizes(&phi, &p));

        let spec = ConcentrationSpec::new(2, 0.5).unwrap();
        let e = concentration_ensemble(&spec).unwrap();
        let initial = product_state(&spec).unwrap();
        assert_eq!(initial.coeffs(), &[0.25; 4]);
        let grid = WorkGrid::new(vec![-1.0, 0.0, 1.0]).unwrap();
        let r = ensemble_reduce(&e, &initial, Some(&grid)).unwrap();
        assert!((r.average.get(0) - 0.75).abs() < 1e-15);
        assert!((r.average.get(1) - 0.25).abs() < 1e-15);
        assert!(r.feasible_via_average);
        assert_eq!(r.lp_feasible, Some(true));

        let mut members = e.members().to_vec();
        members.reverse();
        let permuted = PureEnsemble::new(members).unwrap();
        assert_eq!(ensemble_average(&permuted), r.average);
    }
}
