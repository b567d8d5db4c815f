//! Small descriptive and goodness-of-fit statistics used by the harness.

use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    covariance(x, x)
}

/// Unbiased sample covariance.
pub fn covariance(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "covariance of unequal samples");
    if x.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = (mean(x), mean(y));
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    covariance(x, y) / (variance(x) * variance(y)).sqrt()
}

/// Standard error of the sample mean.
pub fn standard_error(x: &[f64]) -> f64 {
    (variance(x) / x.len() as f64).sqrt()
}

pub fn rmse(x: &[f64], truth: f64) -> f64 {
    (x.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Standard error of an unbiased sample covariance entry, from the fourth
/// moment estimate `Var[(x-mx)(y-my)] / n`.
pub fn covariance_standard_error(x: &[f64], y: &[f64]) -> f64 {
    let (mx, my) = (mean(x), mean(y));
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    standard_error(&prods)
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF, with the
/// Stephens small-sample correction to the asymptotic p-value.
pub fn ks_test(sample: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        let f = cdf(*v);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    TestResult {
        statistic: d,
        p_value: kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d),
    }
}

/// KS test of `sample` against `N(mu, sd^2)`.
pub fn ks_normal(sample: &[f64], mu: f64, sd: f64) -> TestResult {
    let dist = Normal::new(mu, sd).expect("valid normal parameters");
    ks_test(sample, |v| dist.cdf(v))
}

/// Anderson–Darling normality test with mean and variance estimated from the
/// sample (Stephens' case 4, D'Agostino–Stephens p-value approximation).
pub fn anderson_darling_normal(sample: &[f64]) -> TestResult {
    let n = sample.len();
    assert!(n >= 8, "Anderson-Darling needs at least 8 observations");
    let (mu, sd) = (mean(sample), variance(sample).sqrt());
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let mut z: Vec<f64> = sample.iter().map(|v| (v - mu) / sd).collect();
    z.sort_by(f64::total_cmp);
    let nf = n as f64;
    let mut s = 0.0;
    for i in 0..n {
        let lo = std.cdf(z[i]).clamp(1e-300, 1.0 - 1e-16);
        let hi = std.cdf(z[n - 1 - i]).clamp(1e-300, 1.0 - 1e-16);
        s += (2 * i + 1) as f64 * (lo.ln() + (1.0 - hi).ln());
    }
    let a2 = -nf - s / nf;
    let a = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let p = if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    TestResult {
        statistic: a2,
        p_value: p.clamp(0.0, 1.0),
    }
}

/// `(p_i, sample quantile, normal quantile)` rows for a QQ plot against the
/// standard normal after standardizing with the sample moments.
pub fn qq_normal(sample: &[f64]) -> Vec<(f64, f64, f64)> {
    let (mu, sd) = (mean(sample), variance(sample).sqrt());
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter()
        .enumerate()
        .map(|(i, v)| {
            let p = (i as f64 + 0.5) / n;
            (p, (v - mu) / sd, std.inverse_cdf(p))
        })
        .collect()
}
