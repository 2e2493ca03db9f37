//! Sample statistics for Monte-Carlo batches.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Mean and unbiased sample variance (0 for a single sample).
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, ss / (n - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p_value: f64,
}

/// Welch's two-sample t-test from summary statistics.
pub fn welch(mean_a: f64, var_a: f64, n_a: usize, mean_b: f64, var_b: f64, n_b: usize) -> TTest {
    let (qa, qb) = (var_a / n_a as f64, var_b / n_b as f64);
    let se2 = qa + qb;
    if se2 == 0.0 {
        let p = if mean_a == mean_b { 1.0 } else { 0.0 };
        let t = if mean_a == mean_b { 0.0 } else { f64::INFINITY.copysign(mean_a - mean_b) };
        return TTest { t, df: f64::INFINITY, p_value: p };
    }
    let t = (mean_a - mean_b) / se2.sqrt();
    let mut den = 0.0;
    if n_a > 1 {
        den += qa * qa / (n_a - 1) as f64;
    }
    if n_b > 1 {
        den += qb * qb / (n_b - 1) as f64;
    }
    let df = if den > 0.0 { se2 * se2 / den } else { f64::INFINITY };
    let p_value = match StudentsT::new(0.0, 1.0, df.min(1e9)) {
        Ok(d) => 2.0 * (1.0 - d.cdf(t.abs())),
        Err(_) => f64::NAN,
    };
    TTest { t, df, p_value }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_variance() {
        let (m, v) = mean_var(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((v - 5.0 / 3.0).abs() < 1e-12);
        assert_eq!(mean_var(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn welch_reference_values() {
        // equal variances and sizes: df = 2(n-1)
        let r = welch(1.0, 4.0, 10, 0.0, 4.0, 10);
        assert!((r.t - 1.0 / (0.8f64).sqrt()).abs() < 1e-12);
        assert!((r.df - 18.0).abs() < 1e-9);
        // two-sided p of t = 1.118 with 18 df
        assert!((r.p_value - 0.2783).abs() < 1e-3);
        assert_eq!(welch(1.0, 0.0, 5, 1.0, 0.0, 5).p_value, 1.0);
    }
}
