//! Small descriptive-statistics helpers shared across modules.

use statrs::distribution::ContinuousCDF;

use crate::rng::std_normal;

/// z such that `P(|Z| <= z) = level`; exactly `1.959964` at 0.95.
pub fn z_quantile(level: f64) -> f64 {
    if level == 0.95 {
        1.959964
    } else {
        std_normal().inverse_cdf(0.5 + level / 2.0)
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample variance with divisor `n - 1`.
pub fn sample_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Population variance with divisor `n`.
pub fn population_variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Moment skewness `m3 / m2^(3/2)`; zero for constant input.
pub fn skewness(x: &[f64]) -> f64 {
    let m = mean(x);
    let n = x.len() as f64;
    let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
    if m2 > 0.0 {
        m3 / m2.powf(1.5)
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        assert_eq!(z_quantile(0.95), 1.959964);
        assert!((z_quantile(0.9) - 1.6448536269514722).abs() < 1e-9);
        assert!((z_quantile(0.99) - 2.5758293035489004).abs() < 1e-9);
    }

    #[test]
    fn moments() {
        assert_eq!(sample_variance(&[-1.0, 1.0]), 2.0);
        assert_eq!(population_variance(&[0.0, 2.0]), 1.0);
        assert_eq!(skewness(&[1.0, 1.0]), 0.0);
        assert!(skewness(&[0.0, 0.0, 0.0, 10.0]) > 0.0);
    }
}
