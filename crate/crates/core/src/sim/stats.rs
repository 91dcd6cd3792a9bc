//! Batch means and the one-sample Kolmogorov-Smirnov test.

/// Point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Whether `target` lies within `k` standard errors.
    pub fn covers(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.stderr
    }
}

/// Sample mean and the standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> Estimate {
    let n = xs.len();
    if n == 0 {
        return Estimate { value: f64::NAN, stderr: f64::NAN };
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Estimate { value: mean, stderr: f64::NAN };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Estimate { value: mean, stderr: (var / n as f64).sqrt() }
}

/// Ratio estimate `sum num / sum den` with the standard error of the batch
/// ratios `num_b / den_b`.
pub fn ratio_batches(num: &[f64], den: &[f64]) -> Estimate {
    let total: f64 = den.iter().sum();
    let value = num.iter().sum::<f64>() / total;
    let ratios: Vec<f64> = num.iter().zip(den).filter(|(_, &d)| d > 0.0).map(|(n, d)| n / d).collect();
    Estimate { value, stderr: mean_stderr(&ratios).stderr }
}

/// `P(K > x)` for the limiting Kolmogorov distribution.
pub fn kolmogorov_survival(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
        let mut s = 0.0;
        for k in 0..50 {
            let m = (2 * k + 1) as f64;
            s += y.powf(m * m);
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * x * x).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

impl KsResult {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value > significance
    }
}

/// Evenly spaced deterministic subsample of at most `cap` points.
pub fn thin(samples: &[f64], cap: usize) -> Vec<f64> {
    if samples.len() <= cap {
        return samples.to_vec();
    }
    (0..cap).map(|i| samples[i * samples.len() / cap]).collect()
}

/// One-sample KS test. `cdf` maps sorted sample points to model CDF values.
pub fn ks_test<F>(samples: &[f64], cdf: F) -> KsResult
where
    F: FnOnce(&[f64]) -> Vec<f64>,
{
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    let f = cdf(&xs);
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &fi) in f.iter().enumerate() {
        d = d.max((i + 1) as f64 / nf - fi).max(fi - i as f64 / nf);
    }
    let sq = nf.sqrt();
    let p_value = kolmogorov_survival((sq + 0.12 + 0.11 / sq) * d);
    KsResult { statistic: d, p_value, n }
}

/// Empirical CDF as `(t, P)` pairs, one per sample.
pub fn empirical_cdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn kolmogorov_branches_agree() {
        // both series are exact; compare near the switch point
        let x = 1.18f64;
        let lo = {
            let y = (-std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
            1.0 - (2.0 * std::f64::consts::PI).sqrt() / x
                * (0..50).map(|k| y.powi((2 * k + 1) * (2 * k + 1))).sum::<f64>()
        };
        assert_relative_eq!(lo, kolmogorov_survival(x), max_relative = 1e-10);
        assert_relative_eq!(kolmogorov_survival(1.3580986), 0.05, max_relative = 1e-5);
        assert_relative_eq!(kolmogorov_survival(1.6276236), 0.01, max_relative = 1e-5);
    }

    #[test]
    fn ks_accepts_uniform_grid() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let r = ks_test(&xs, |s| s.to_vec());
        assert!(r.statistic < 1e-3 + 1e-12);
        assert!(r.passes(0.01));
        let shifted: Vec<f64> = xs.iter().map(|x| x * x).collect();
        assert!(!ks_test(&shifted, |s| s.to_vec()).passes(0.01));
    }

    #[test]
    fn ratio_estimate() {
        let e = ratio_batches(&[1.0, 3.0], &[2.0, 2.0]);
        assert_eq!(e.value, 1.0);
        assert_relative_eq!(e.stderr, 0.5);
    }
}
