//! Small numerical helpers shared across modules.

/// Recursive pairwise sum. The association order depends only on the slice
/// length, so sums over aligned dyadic blocks compose bitwise.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let mid = n.next_power_of_two() / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Sample mean and unbiased standard deviation, `None` on fewer than two values.
pub fn mean_sd(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = pairwise_sum(values) / n as f64;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    Some((mean, (pairwise_sum(&sq) / (n - 1) as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_blocks_compose() {
        let v: Vec<f64> = (0..64).map(|i| (i as f64 * 0.37).sin() * 1e3 + 0.1).collect();
        let blocks: Vec<f64> = v.chunks(8).map(pairwise_sum).collect();
        assert_eq!(pairwise_sum(&blocks).to_bits(), pairwise_sum(&v).to_bits());
    }

    #[test]
    fn mean_and_deviation() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!(mean_sd(&[1.0]).is_none());
    }
}
