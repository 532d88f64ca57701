//! Small descriptive-statistics helpers shared across modules.

/// Mean and population standard deviation. Empty input yields `(NaN, NaN)`.
pub fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (n, sum) = values.clone().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Inclusive linear-interpolation percentile of sorted data (`q` in `[0, 100]`).
pub fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_matches_linear_interpolation() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile_sorted(&v, 0.0), 1.0);
        assert_eq!(percentile_sorted(&v, 100.0), 5.0);
        assert_eq!(percentile_sorted(&v, 50.0), 3.0);
        assert!((percentile_sorted(&v, 5.0) - 1.2).abs() < 1e-12);
        assert_eq!(percentile_sorted(&[0.0, 0.0, 0.0, 0.4], 5.0), 0.0);
    }

    #[test]
    fn mean_std_basics() {
        let (m, s) = mean_std([0.0, 1.0, 0.0, 1.0].into_iter());
        assert_eq!((m, s), (0.5, 0.5));
        assert!(mean_std(std::iter::empty()).0.is_nan());
    }
}
