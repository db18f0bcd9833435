//! Pairwise (cascade) summation.
//!
//! The reduction tree depends only on the input length, so results are
//! bit-reproducible regardless of how callers schedule the work.

const BLOCK: usize = 64;

/// Pairwise sum of a slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `term(i)` for `i` in `0..n`, with `N` simultaneous lanes.
pub fn pairwise_map<const N: usize>(n: usize, term: &impl Fn(usize) -> [f64; N]) -> [f64; N] {
    fn rec<const N: usize>(lo: usize, hi: usize, term: &impl Fn(usize) -> [f64; N]) -> [f64; N] {
        if hi - lo <= BLOCK {
            let mut acc = [0.0; N];
            for idx in lo..hi {
                let t = term(idx);
                for (a, b) in acc.iter_mut().zip(t) {
                    *a += b;
                }
            }
            return acc;
        }
        let mid = lo + (hi - lo) / 2;
        let mut left = rec(lo, mid, term);
        let right = rec(mid, hi, term);
        for (a, b) in left.iter_mut().zip(right) {
            *a += b;
        }
        left
    }
    rec(0, n, term)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_on_small_inputs() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 45.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn beats_naive_accumulation_on_long_inputs() {
        let n = 1 << 22;
        let xs = vec![0.1_f64; n];
        let exact = 0.1 * n as f64;
        let naive: f64 = xs.iter().sum();
        let cascade = pairwise_sum(&xs);
        assert!((cascade - exact).abs() <= (naive - exact).abs());
        assert!((cascade - exact).abs() / exact < 1e-13);
    }

    #[test]
    fn lanes_are_independent() {
        let s = pairwise_map(1000, &|i| [1.0, i as f64]);
        assert_eq!(s, [1000.0, 499500.0]);
    }
}
