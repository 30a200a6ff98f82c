//! Shared statistical helpers: moments, interpolated quantiles and the
//! distribution tails used for Wald and likelihood-ratio p-values.

use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (divisor n−1); undefined for fewer than two values.
pub fn sample_sd(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (n - 1) as f64).sqrt())
}

/// Linear-interpolation quantile on sorted data: the quantile at probability
/// `p` sits at fractional rank `(n−1)·p` between order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty slice");
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Two-sided normal p-value for a z statistic, computed through the stable
/// upper tail (no `1 − Φ` cancellation).
pub fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// Upper-tail probability of a chi-square distribution with `df` degrees of
/// freedom. By convention `df = 0` gives 1 for a zero statistic.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if df == 0 {
        return if x <= 0.0 { 1.0 } else { 0.0 };
    }
    if x <= 0.0 {
        return 1.0;
    }
    gamma_ur(df as f64 / 2.0, x / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_match_hand_values() {
        // hand evaluation of the interpolated rule on (1,2,3,4)
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((quantile_sorted(&xs, 0.25) - 1.75).abs() < 1e-12);
        assert!((quantile_sorted(&xs, 0.5) - 2.5).abs() < 1e-12);
        assert!((quantile_sorted(&xs, 0.75) - 3.25).abs() < 1e-12);
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
    }

    #[test]
    fn sd_uses_n_minus_one() {
        assert!(sample_sd(&[1.0]).is_none());
        let sd = sample_sd(&[1.0, 2.0, 3.0]).unwrap();
        assert!((sd - 1.0).abs() < 1e-12);
    }

    #[test]
    fn normal_tail_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-12);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-9);
        assert!((normal_two_sided_p(1.959963984540054) - 0.05).abs() < 1e-9);
    }

    #[test]
    fn chi_square_reference_values() {
        // 0.95 quantiles of chi-square(1) and chi-square(2)
        assert!((chi_square_sf(3.841458820694124, 1) - 0.05).abs() < 1e-9);
        assert!((chi_square_sf(5.991464547107979, 2) - 0.05).abs() < 1e-9);
        assert_eq!(chi_square_sf(0.0, 0), 1.0);
        assert_eq!(chi_square_sf(0.0, 3), 1.0);
    }
}
