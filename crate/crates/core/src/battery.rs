//! Entanglement battery combinatorics.
//!
//! A battery of `n` subsystems with fineness `u` has levels `x = 0..=n`. Level
//! `x` is a maximally entangled state of Schmidt rank `xi_x = u^x (u-1)^(n-x)`,
//! so consecutive levels differ by `log2(u/(u-1))` ebits.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, NORMALIZATION_TOL};

/// Slack applied toward inclusion when quantizing work values.
const QUANTIZE_SLACK: f64 = 1e-12;

/// Battery size `n`, fineness `u` and superposition width `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawConfig", into = "RawConfig")]
pub struct BatteryConfig {
    u: u32,
    n: u32,
    big_n: u32,
}

#[derive(Serialize, Deserialize)]
struct RawConfig {
    u: u32,
    n: u32,
    #[serde(rename = "N")]
    big_n: u32,
}

impl TryFrom<RawConfig> for BatteryConfig {
    type Error = Error;

    fn try_from(raw: RawConfig) -> Result<Self> {
        Self::new(raw.u, raw.n, raw.big_n)
    }
}

impl From<BatteryConfig> for RawConfig {
    fn from(c: BatteryConfig) -> Self {
        RawConfig {
            u: c.u,
            n: c.n,
            big_n: c.big_n,
        }
    }
}

impl BatteryConfig {
    pub fn new(u: u32, n: u32, big_n: u32) -> Result<Self> {
        if u < 2 {
            return Err(Error::Validation(format!("u must be at least 2, got {u}")));
        }
        if n < 1 {
            return Err(Error::Validation("n must be at least 1".into()));
        }
        if big_n > n {
            return Err(Error::Validation(format!("N = {big_n} exceeds n = {n}")));
        }
        if !(n - big_n).is_multiple_of(2) {
            return Err(Error::Parity { n, big_n });
        }
        Ok(Self { u, n, big_n })
    }

    /// The smallest battery whose window tolerates shifts up to `a_max`.
    pub fn for_width(u: u32, big_n: u32, a_max: u32) -> Result<Self> {
        Self::new(u, big_n + 2 * a_max, big_n)
    }

    pub fn u(&self) -> u32 {
        self.u
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn big_n(&self) -> u32 {
        self.big_n
    }

    pub fn delta_w(&self) -> f64 {
        delta_w(self.u)
    }

    pub fn window_lo(&self) -> u32 {
        (self.n - self.big_n) / 2
    }

    pub fn window_hi(&self) -> u32 {
        (self.n + self.big_n) / 2
    }

    /// Levels populated by the uniform battery state.
    pub fn window(&self) -> RangeInclusive<u32> {
        self.window_lo()..=self.window_hi()
    }

    pub fn in_window(&self, x: i64) -> bool {
        x >= self.window_lo() as i64 && x <= self.window_hi() as i64
    }

    /// Largest shift the window can absorb without leaving `0..=n`.
    pub fn margin(&self) -> u32 {
        self.window_lo()
    }

    /// Schmidt rank of level `x`.
    pub fn multiplicity(&self, x: u32) -> Result<BigUint> {
        if x > self.n {
            return Err(Error::Domain(format!(
                "level {x} outside battery range 0..={}",
                self.n
            )));
        }
        Ok(BigUint::from(self.u).pow(x) * BigUint::from(self.u - 1).pow(self.n - x))
    }

    /// `xi_x` for every level, indexed by `x`.
    pub fn multiplicities(&self) -> Vec<BigUint> {
        (0..=self.n)
            .map(|x| self.multiplicity(x).expect("level in range"))
            .collect()
    }

    /// Total Schmidt rank over all levels.
    pub fn total_multiplicity(&self) -> BigUint {
        self.multiplicities().into_iter().sum()
    }

    /// Total Schmidt rank over the window levels.
    pub fn window_multiplicity(&self) -> BigUint {
        self.window()
            .map(|x| self.multiplicity(x).expect("level in range"))
            .sum()
    }
}

/// Entanglement carried by one battery step, `log2(u/(u-1))`.
pub fn delta_w(u: u32) -> f64 {
    let u = u as f64;
    u.log2() - (u - 1.0).log2()
}

/// `a * delta_w` evaluated as a compensated difference of logs.
fn scaled_step(u: u32, a: i64) -> f64 {
    let a = a as f64;
    let uf = u as f64;
    numeric::sum([a * uf.log2(), -a * (uf - 1.0).log2()])
}

/// Greatest integer `a` with `a * delta_w <= w`, ties resolved toward inclusion.
pub fn quantize_work(u: u32, w: f64) -> i64 {
    assert!(u >= 2, "battery fineness must be at least 2");
    let step = delta_w(u);
    let bound = w + QUANTIZE_SLACK;
    let mut a = (bound / step).floor() as i64;
    while scaled_step(u, a + 1) <= bound {
        a += 1;
    }
    while scaled_step(u, a) > bound {
        a -= 1;
    }
    a
}

/// Probability amplitudes-squared `alpha_x` of a battery state over levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<u32, f64>", into = "BTreeMap<u32, f64>")]
pub struct BatteryAmplitudes {
    alpha: BTreeMap<u32, f64>,
}

impl BatteryAmplitudes {
    pub fn new(alpha: BTreeMap<u32, f64>) -> Result<Self> {
        for (&x, &a) in &alpha {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::Validation(format!("alpha_{x} = {a} is invalid")));
            }
        }
        let total = numeric::sum(alpha.values().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Validation(format!(
                "amplitudes sum to {total}, expected 1"
            )));
        }
        Ok(Self { alpha })
    }

    /// `width` consecutive levels starting at `start`, each with weight `1/width`.
    pub fn boxcar(start: u32, width: u32) -> Result<Self> {
        if width == 0 {
            return Err(Error::Validation("boxcar width must be positive".into()));
        }
        let value = 1.0 / width as f64;
        Self::new((start..start + width).map(|x| (x, value)).collect())
    }

    /// The uniform superposition over the window of `cfg`.
    pub fn uniform(cfg: &BatteryConfig) -> Self {
        Self::boxcar(cfg.window_lo(), cfg.big_n() + 1).expect("window is non-empty")
    }

    pub fn get(&self, x: i64) -> f64 {
        u32::try_from(x)
            .ok()
            .and_then(|x| self.alpha.get(&x).copied())
            .unwrap_or(0.0)
    }

    pub fn levels(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.alpha.iter().map(|(&x, &a)| (x, a))
    }
}

impl TryFrom<BTreeMap<u32, f64>> for BatteryAmplitudes {
    type Error = Error;

    fn try_from(alpha: BTreeMap<u32, f64>) -> Result<Self> {
        Self::new(alpha)
    }
}

impl From<BatteryAmplitudes> for BTreeMap<u32, f64> {
    fn from(a: BatteryAmplitudes) -> Self {
        a.alpha
    }
}

/// `sum_x |alpha_x - alpha_{x+y}|`, with levels outside the map counted as 0.
pub fn uniformity_cost(alpha: &BatteryAmplitudes, y: u32) -> f64 {
    if y == 0 {
        return 0.0;
    }
    let y = y as i64;
    let mut xs: Vec<i64> = alpha
        .alpha
        .keys()
        .flat_map(|&x| [x as i64, x as i64 - y])
        .collect();
    xs.sort_unstable();
    xs.dedup();
    numeric::sum(
        xs.into_iter()
            .map(|x| (alpha.get(x) - alpha.get(x + y)).abs()),
    )
}

/// Smallest width `N` with `N >= 1/sqrt(2 epsilon)`.
pub fn min_width_for_error(epsilon: f64) -> Result<u32> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    let v = 1.0 / (2.0 * epsilon).sqrt();
    let rounded = v.round();
    // 1/sqrt(2 * 0.02) lands a hair above 5 in floating point.
    let n = if (v - rounded).abs() < 1e-9 {
        rounded
    } else {
        v.ceil()
    };
    Ok(n as u32)
}

/// Lower bound `(N+1)/(N+1+2 a_max)` on the final-state fidelity.
pub fn fidelity_bound(big_n: u32, a_max: u32) -> f64 {
    let n1 = big_n as f64 + 1.0;
    n1 / (n1 + 2.0 * a_max as f64)
}

/// Smallest `(N, n)` whose fidelity bound reaches `fidelity` for shifts up to
/// `a_max`, with `n = N + 2 a_max`.
pub fn min_battery_for_fidelity(fidelity: f64, a_max: u32) -> Result<(u32, u32)> {
    if !(fidelity > 0.0 && fidelity <= 1.0) {
        return Err(Error::Domain(format!(
            "fidelity must lie in (0, 1], got {fidelity}"
        )));
    }
    if a_max == 0 {
        return Ok((0, 0));
    }
    if fidelity == 1.0 {
        return Err(Error::Domain(
            "fidelity 1 is unreachable with nonzero fluctuations".into(),
        ));
    }
    // (N+1)(1-f) >= 2 a f, solved then nudged past floating error.
    let estimate = 2.0 * a_max as f64 * fidelity / (1.0 - fidelity) - 1.0;
    if estimate > u32::MAX as f64 / 2.0 {
        return Err(Error::Domain("required battery is too large".into()));
    }
    let mut big_n = estimate.max(0.0).floor() as u32;
    while big_n > 0 && fidelity_bound(big_n - 1, a_max) >= fidelity {
        big_n -= 1;
    }
    while fidelity_bound(big_n, a_max) < fidelity {
        big_n += 1;
    }
    Ok((big_n, big_n + 2 * a_max))
}
