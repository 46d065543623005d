//! Shared tolerances and compensated summation.

/// Maximum deviation of a probability vector's sum from 1.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Entries at or below this value are treated as structurally zero.
pub const SUPPORT_THRESHOLD: f64 = 1e-15;

/// Two work values closer than this are the same grid point.
pub const GRID_TOL: f64 = 1e-12;

/// Tolerance on the partial sums compared by the majorization test.
pub const PARTIAL_SUM_TOL: f64 = 1e-12;

/// Column-normalization tolerance a `TransferMatrix` must meet to be
/// constructed at all. LP witnesses are accurate to about this level.
pub const STRUCTURAL_TOL: f64 = 1e-9;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of an iterator of floats.
pub fn sum(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

/// Format a float with 17 significant digits for CSV output. Negative zero
/// prints as zero.
pub fn format_csv_float(value: f64) -> String {
    let value = if value == 0.0 { 0.0 } else { value };
    format!("{value:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut values = vec![1.0];
        values.extend(std::iter::repeat_n(1e-16, 10_000));
        let naive: f64 = values.iter().sum();
        assert_eq!(naive, 1.0);
        assert!((sum(values) - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn csv_float_has_seventeen_digits() {
        assert_eq!(format_csv_float(0.5), "5.0000000000000000e-1");
        assert_eq!(format_csv_float(-1.0), "-1.0000000000000000e0");
        assert_eq!(format_csv_float(-0.0), "0.0000000000000000e0");
    }
}
