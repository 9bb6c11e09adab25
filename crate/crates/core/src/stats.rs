//! Goodness-of-fit and Monte Carlo summaries.
//!
//! All distributional checks go through CDFs (Kolmogorov–Smirnov), never
//! through raw moments: the laws under test are heavy-tailed and most have
//! no mean.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest sample accepted by the asymptotic KS p-value.
pub const KS_MIN_SAMPLES: usize = 35;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample contains a NaN")]
    NaN,
    #[error("bad histogram range [{lo}, {hi}]")]
    BadRange { lo: f64, hi: f64 },
    #[error("histogram needs at least one bin")]
    NoBins,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub n: usize,
    /// Second sample size for two-sample tests.
    pub n2: Option<usize>,
    pub p_value: f64,
}

impl KsReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.p_value > threshold
    }

    /// Sample size entering the asymptotic series.
    pub fn effective_n(&self) -> f64 {
        match self.n2 {
            None => self.n as f64,
            Some(n2) => (self.n * n2) as f64 / (self.n + n2) as f64,
        }
    }
}

/// Kolmogorov survival function `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} e^{−2k²λ²}`.
///
/// For small `λ` the equivalent theta-function form
/// `1 − √(2π)/λ Σ_{k≥1} e^{−(2k−1)²π²/(8λ²)}` converges much faster.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        let a = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let mut s = 0.0;
        for k in 1..=20 {
            let odd = (2 * k - 1) as f64;
            let t = (a * odd * odd).exp();
            s += t;
            if t < 1e-17 * s {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let a = -2.0 * lambda * lambda;
        let mut s = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let kf = k as f64;
            let t = (a * kf * kf).exp();
            s += sign * t;
            sign = -sign;
            if t < 1e-17 * s.abs() {
                break;
            }
        }
        2.0 * s
    };
    q.clamp(0.0, 1.0)
}

/// Asymptotic p-value for statistic `d` at effective sample size `n`, with
/// the `√n + 0.12 + 0.11/√n` small-sample correction.
pub fn ks_p_value(d: f64, n: f64) -> f64 {
    let sn = n.sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

fn sorted_copy(data: &[f64]) -> Result<Vec<f64>, StatsError> {
    if data.iter().any(|x| x.is_nan()) {
        return Err(StatsError::NaN);
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

fn check_size(n: usize) -> Result<(), StatsError> {
    if n < KS_MIN_SAMPLES {
        Err(StatsError::TooFewSamples { needed: KS_MIN_SAMPLES, got: n })
    } else {
        Ok(())
    }
}

/// One-sample KS test of `data` (any order) against a model CDF.
pub fn ks_one_sample(data: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsReport, StatsError> {
    check_size(data.len())?;
    let xs = sorted_copy(data)?;
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    let d = d.clamp(0.0, 1.0);
    Ok(KsReport {
        statistic: d,
        n: xs.len(),
        n2: None,
        p_value: ks_p_value(d, n),
    })
}

/// Two-sample KS test; `D` is taken over the merged grid so ties between
/// samples are handled exactly.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsReport, StatsError> {
    check_size(a.len())?;
    check_size(b.len())?;
    let xa = sorted_copy(a)?;
    let xb = sorted_copy(b)?;
    let (na, nb) = (xa.len(), xb.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = xa[i].min(xb[j]);
        while i < na && xa[i] <= x {
            i += 1;
        }
        while j < nb && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    Ok(KsReport {
        statistic: d,
        n: na,
        n2: Some(nb),
        p_value: ks_p_value(d, ne),
    })
}

/// Per-test threshold for a family of `tests` checks at overall level `alpha`.
pub fn bonferroni(alpha: f64, tests: usize) -> f64 {
    alpha / tests.max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl McEstimate {
    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.stderr
    }
}

/// Sample mean with standard error `s/√n` (`s` the unbiased sample sd).
pub fn mc_mean(values: &[f64]) -> Result<McEstimate, StatsError> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: n });
    }
    // Welford keeps the variance accurate for large offsets.
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    let var = m2 / (n - 1) as f64;
    Ok(McEstimate {
        mean,
        stderr: (var / n as f64).sqrt(),
        n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    /// `count / (total · width)`, so densities integrate to the in-range
    /// fraction.
    pub densities: Vec<f64>,
    pub total: usize,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }
}

/// Equal-width histogram on `[lo, hi]`; `hi` itself lands in the last bin.
pub fn histogram(data: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Histogram, StatsError> {
    if bins == 0 {
        return Err(StatsError::NoBins);
    }
    if lo >= hi || !lo.is_finite() || !hi.is_finite() {
        return Err(StatsError::BadRange { lo, hi });
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in data {
        if x >= lo && x <= hi {
            let k = (((x - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
    }
    let total = data.len();
    let densities = counts
        .iter()
        .map(|&c| if total == 0 { 0.0 } else { c as f64 / (total as f64 * width) })
        .collect();
    Ok(Histogram { lo, hi, counts, densities, total })
}
