//! Nearest-rank quantiles.

/// 1-based nearest rank `⌈k·n⌉`, clamped to `[1, n]`.
///
/// `k·n` is snapped to the nearest integer when it lies within floating-point
/// noise of one, so `0.95 × 100` selects rank 95 rather than 96.
pub fn nearest_rank(k: f64, n: usize) -> usize {
    if n == 0 {
        return 0;
    }
    let x = k * n as f64;
    let snapped = x.round();
    let rank = if (x - snapped).abs() <= 1e-9 * snapped.abs().max(1.0) {
        snapped
    } else {
        x.ceil()
    };
    (rank.max(1.0) as usize).min(n)
}

/// The `k`-quantile of an ascending slice under the nearest-rank rule.
pub fn nearest_rank_value<T: Copy>(sorted: &[T], k: f64) -> Option<T> {
    if sorted.is_empty() {
        return None;
    }
    Some(sorted[nearest_rank(k, sorted.len()) - 1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks() {
        assert_eq!(nearest_rank(0.95, 100), 95);
        assert_eq!(nearest_rank(0.3, 10), 3);
        assert_eq!(nearest_rank(0.6, 10), 6);
        assert_eq!(nearest_rank(0.9, 10), 9);
        assert_eq!(nearest_rank(0.0, 10), 1);
        assert_eq!(nearest_rank(0.31, 10), 4);
        assert_eq!(nearest_rank(1.0, 10), 10);
        assert_eq!(nearest_rank(0.5, 0), 0);
        // fig. 3 group sizes of 117/117/117/39 over 390 positive out-degrees
        assert_eq!(nearest_rank(0.3, 390), 117);
        assert_eq!(nearest_rank(0.6, 390), 234);
        assert_eq!(nearest_rank(0.9, 390), 351);
    }

    #[test]
    fn values() {
        let v: Vec<u32> = (1..=10).map(|x| x * 10).collect();
        assert_eq!(nearest_rank_value(&v, 0.3), Some(30));
        assert_eq!(nearest_rank_value(&v, 0.6), Some(60));
        assert_eq!(nearest_rank_value(&v, 0.9), Some(90));
        assert_eq!(nearest_rank_value::<u32>(&[], 0.5), None);
    }
}
