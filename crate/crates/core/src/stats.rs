//! Small descriptive-statistics helpers shared by the workload and metrics
//! modules.

/// One-based nearest rank `ceil(q * n)`, clamped to `[1, n]`.
///
/// A tiny slack absorbs binary rounding of products such as `0.999 * 1000`.
pub fn nearest_rank(q: f64, n: usize) -> usize {
    debug_assert!(n > 0);
    let raw = (q * n as f64 - 1e-9).ceil();
    (raw.max(1.0) as usize).min(n)
}

/// Nearest-rank quantile of an already ascending-sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    sorted[nearest_rank(q, sorted.len()) - 1]
}

/// Ascending copy of `values`, using the IEEE total order.
pub fn sorted(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Population coefficient of variation (standard deviation over mean).
pub fn population_cov(values: &[f64]) -> f64 {
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    var.sqrt() / m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_hand_values() {
        assert_eq!(nearest_rank(0.5, 10), 5);
        assert_eq!(nearest_rank(0.99, 100), 99);
        assert_eq!(nearest_rank(0.999, 1000), 999);
        assert_eq!(nearest_rank(1.0, 7), 7);
        assert_eq!(nearest_rank(0.01, 7), 1);
        assert_eq!(nearest_rank(0.25, 5), 2);
        assert_eq!(nearest_rank(0.75, 5), 4);
    }

    #[test]
    fn cov_of_two_points() {
        assert!((population_cov(&[1.0, 3.0]) - 0.5).abs() < 1e-15);
        assert_eq!(population_cov(&[2.0, 2.0, 2.0]), 0.0);
    }
}
