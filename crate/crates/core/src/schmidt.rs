//! Squared Schmidt coefficients and the operations defined on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, NORMALIZATION_TOL, PARTIAL_SUM_TOL, SUPPORT_THRESHOLD};

/// A probability vector of squared Schmidt coefficients.
///
/// Entries keep the caller's order so that indices `i`, `j` stay meaningful;
/// sorted views are produced on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SchmidtVector {
    coeffs: Vec<f64>,
}

impl SchmidtVector {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Validation("Schmidt vector is empty".into()));
        }
        for (idx, &c) in coeffs.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::Validation(format!("entry {idx} is not finite")));
            }
            if c < 0.0 {
                return Err(Error::Validation(format!("entry {idx} is negative ({c})")));
            }
        }
        let total = numeric::sum(coeffs.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Validation(format!(
                "entries sum to {total}, expected 1"
            )));
        }
        Ok(Self { coeffs })
    }

    /// Divide nonnegative weights by their sum.
    pub fn normalized(weights: &[f64]) -> Result<Self> {
        let total = numeric::sum(weights.iter().copied());
        if !total.is_finite() || total <= 0.0 {
            return Err(Error::Validation(
                "weights must have a positive finite sum".into(),
            ));
        }
        Self::new(weights.iter().map(|w| w / total).collect())
    }

    /// The maximally entangled vector of dimension `d`.
    pub fn uniform(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Validation("dimension must be positive".into()));
        }
        Self::new(vec![1.0 / d as f64; d])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.coeffs.get(index).copied().unwrap_or(0.0)
    }

    /// Whether entry `index` is above the support threshold.
    pub fn in_support(&self, index: usize) -> bool {
        self.get(index) > SUPPORT_THRESHOLD
    }

    /// Indices of entries above the support threshold.
    pub fn support(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.in_support(i)).collect()
    }

    pub fn support_size(&self) -> usize {
        self.coeffs
            .iter()
            .filter(|&&c| c > SUPPORT_THRESHOLD)
            .count()
    }

    pub fn has_full_support(&self) -> bool {
        self.support_size() == self.len()
    }

    /// Smallest entry on the support.
    pub fn min_support_value(&self) -> f64 {
        self.coeffs
            .iter()
            .copied()
            .filter(|&c| c > SUPPORT_THRESHOLD)
            .fold(f64::INFINITY, f64::min)
    }

    /// Entries sorted non-increasing.
    pub fn sorted_desc(&self) -> Vec<f64> {
        let mut v = self.coeffs.clone();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    /// Copy zero-padded to `len` entries. Never truncates.
    pub fn padded(&self, len: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        if coeffs.len() < len {
            coeffs.resize(len, 0.0);
        }
        Self { coeffs }
    }

    /// Whether every entry equals `1/len` within `tol`.
    pub fn is_uniform(&self, tol: f64) -> bool {
        let target = 1.0 / self.len() as f64;
        self.coeffs.iter().all(|c| (c - target).abs() <= tol)
    }
}

impl TryFrom<Vec<f64>> for SchmidtVector {
    type Error = Error;

    fn try_from(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs)
    }
}

impl From<SchmidtVector> for Vec<f64> {
    fn from(v: SchmidtVector) -> Self {
        v.coeffs
    }
}

/// One weighted member of a pure-state ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub weight: f64,
    pub coeffs: SchmidtVector,
}

/// A probability distribution over pure states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<EnsembleMember>", into = "Vec<EnsembleMember>")]
pub struct PureEnsemble {
    members: Vec<EnsembleMember>,
}

impl PureEnsemble {
    pub fn new(members: Vec<EnsembleMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Validation("ensemble is empty".into()));
        }
        for (idx, m) in members.iter().enumerate() {
            if !m.weight.is_finite() || m.weight < 0.0 {
                return Err(Error::Validation(format!(
                    "member {idx} has invalid weight {}",
                    m.weight
                )));
            }
        }
        let total = numeric::sum(members.iter().map(|m| m.weight));
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Validation(format!(
                "ensemble weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { members })
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }
}

impl TryFrom<Vec<EnsembleMember>> for PureEnsemble {
    type Error = Error;

    fn try_from(members: Vec<EnsembleMember>) -> Result<Self> {
        Self::new(members)
    }
}

impl From<PureEnsemble> for Vec<EnsembleMember> {
    fn from(e: PureEnsemble) -> Self {
        e.members
    }
}

/// Shannon entropy of the coefficients in bits, with `0 log 0 = 0`.
pub fn entanglement_entropy(v: &SchmidtVector) -> f64 {
    let h = numeric::sum(
        v.coeffs
            .iter()
            .filter(|&&c| c > 0.0)
            .map(|&c| -c * c.log2()),
    );
    h.max(0.0)
}

/// Nielsen's order: true when `q` majorizes `p`.
pub fn majorizes(q: &SchmidtVector, p: &SchmidtVector) -> bool {
    let len = q.len().max(p.len());
    let qs = q.padded(len).sorted_desc();
    let ps = p.padded(len).sorted_desc();
    let mut acc_q = numeric::CompensatedSum::new();
    let mut acc_p = numeric::CompensatedSum::new();
    for k in 0..len {
        acc_q.add(qs[k]);
        acc_p.add(ps[k]);
        if acc_q.value() < acc_p.value() - PARTIAL_SUM_TOL {
            return false;
        }
    }
    true
}

/// `log2 max_i p_i / q_i` over the support of `p`.
pub fn renyi_inf_divergence(p: &SchmidtVector, q: &SchmidtVector) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for i in p.support() {
        let qi = q.get(i);
        if qi <= SUPPORT_THRESHOLD {
            return Err(Error::SupportViolation {
                index: i,
                p_value: p.get(i),
            });
        }
        best = best.max(p.get(i) / qi);
    }
    Ok(best.log2())
}

/// Weighted average of the members, aligned on a common zero-padded index set.
pub fn ensemble_average(e: &PureEnsemble) -> SchmidtVector {
    let len = e.members.iter().map(|m| m.coeffs.len()).max().unwrap_or(0);
    let coeffs: Vec<f64> = (0..len)
        .map(|k| numeric::sum(e.members.iter().map(|m| m.weight * m.coeffs.get(k))))
        .collect();
    // Each member is normalized and the weights are normalized, so the
    // average is normalized to the same tolerance; renormalize away round-off.
    SchmidtVector::normalized(&coeffs).expect("average of a valid ensemble is valid")
}
