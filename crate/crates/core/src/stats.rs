//! Order-deterministic summary statistics.

/// Pairwise (cascade) summation; the result depends only on slice order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator), two-pass.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    (pairwise_sum(&dev) / (xs.len() - 1) as f64).sqrt()
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    (mean(xs), std_dev(xs))
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_phase(phi: f64) -> f64 {
    use std::f64::consts::PI;
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// SplitMix64 finaliser, used to derive independent seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn summary_statistics() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(mean(&xs), 50.5);
        assert!((std_dev(&xs) - 29.011_491_975_882_016).abs() < 1e-12);
        assert!(std_dev(&[1.0]).is_nan());
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_phase(0.1 - 4.0 * PI) - 0.1).abs() < 1e-14);
    }

    #[test]
    fn seeds_differ() {
        assert_ne!(mix_seed(7, 0), mix_seed(7, 1));
        assert_eq!(mix_seed(7, 3), mix_seed(7, 3));
    }
}
