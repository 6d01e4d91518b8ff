//! Autocorrelation, integrated autocorrelation time and KS statistics.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result, SliceError};

/// Lags above this use the FFT path.
pub const DIRECT_ACF_MAX_LAG: usize = 512;
/// Hard cap on the truncation lag of [`iat`].
pub const IAT_MAX_LAG: usize = 10_000;
pub const MIN_TRACE_LEN: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcfSeries {
    /// `rho[k]` for `k = 0..=max_lag`; `rho[0] = 1`.
    pub rho: Vec<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationRule {
    /// Stop at the first odd lag `K` with `ρ_K + ρ_{K+1} < 0`.
    InitialPositivePair,
}

impl TruncationRule {
    pub fn label(&self) -> &'static str {
        match self {
            TruncationRule::InitialPositivePair => "initial_positive_pair",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IatEstimate {
    pub value: f64,
    pub truncation_lag: usize,
    pub rule: TruncationRule,
}

fn centered(values: &[f64]) -> Result<(Vec<f64>, f64)> {
    let n = values.len();
    if n < MIN_TRACE_LEN {
        return Err(SliceError::InsufficientData {
            needed: MIN_TRACE_LEN,
            got: n,
        });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let c: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let var = c.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if !(var > 0.0) || !var.is_finite() {
        return Err(SliceError::ZeroVariance);
    }
    Ok((c, var))
}

fn autocov_direct(c: &[f64], max_lag: usize) -> Vec<f64> {
    let n = c.len();
    (0..=max_lag)
        .map(|k| {
            c[..n - k]
                .iter()
                .zip(&c[k..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

fn autocov_fft(c: &[f64], max_lag: usize) -> Vec<f64> {
    let n = c.len();
    let m = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = c
        .iter()
        .map(|&v| Complex::new(v, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(m)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(m).process(&mut buf);
    for z in buf.iter_mut() {
        *z = Complex::new(z.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(m).process(&mut buf);
    buf[..=max_lag]
        .iter()
        .map(|z| z.re / (m as f64 * n as f64))
        .collect()
}

/// Autocorrelation with the overall mean and denominator `n`.
///
/// `max_lag` is clamped to `n - 1`. Lags above [`DIRECT_ACF_MAX_LAG`] are
/// computed through an FFT.
pub fn autocorr(trace: impl AsRef<[f64]>, max_lag: usize) -> Result<AcfSeries> {
    let values = trace.as_ref();
    let (c, var) = centered(values)?;
    let max_lag = max_lag.min(values.len() - 1);
    let cov = if max_lag > DIRECT_ACF_MAX_LAG {
        autocov_fft(&c, max_lag)
    } else {
        autocov_direct(&c, max_lag)
    };
    let mut rho: Vec<f64> = cov.iter().map(|g| g / var).collect();
    rho[0] = 1.0;
    Ok(AcfSeries {
        rho,
        n: values.len(),
    })
}

/// Direct-sum autocorrelation regardless of lag; reference for the FFT path.
pub fn autocorr_direct(trace: impl AsRef<[f64]>, max_lag: usize) -> Result<AcfSeries> {
    let values = trace.as_ref();
    let (c, var) = centered(values)?;
    let max_lag = max_lag.min(values.len() - 1);
    let mut rho: Vec<f64> = autocov_direct(&c, max_lag)
        .iter()
        .map(|g| g / var)
        .collect();
    rho[0] = 1.0;
    Ok(AcfSeries {
        rho,
        n: values.len(),
    })
}

/// Integrated autocorrelation time `1 + 2 Σ_{k=1}^{K-1} ρ_k` with
/// initial-positive-pair truncation, `K ≤ min(n/2, 10^4)`.
pub fn iat(trace: impl AsRef<[f64]>) -> Result<IatEstimate> {
    let values = trace.as_ref();
    let k_max = (values.len() / 2).min(IAT_MAX_LAG);
    let acf = autocorr(values, k_max + 1)?;
    let rho = &acf.rho;
    let mut k = 1;
    while k < k_max {
        if rho[k] + rho[k + 1] < 0.0 {
            break;
        }
        k += 2;
    }
    let k = k.min(k_max);
    let value = 1.0 + 2.0 * rho[1..k].iter().sum::<f64>();
    Ok(IatEstimate {
        value: value.max(0.0),
        truncation_lag: k,
        rule: TruncationRule::InitialPositivePair,
    })
}

/// Ceiling `2 / gap` on the integrated autocorrelation time.
pub fn iat_bound_from_gap(gap: f64) -> Result<f64> {
    if !(gap > 0.0 && gap <= 1.0) {
        return domain(format!("gap must lie in (0, 1], got {gap}"));
    }
    Ok(2.0 / gap)
}

/// One-sample Kolmogorov–Smirnov statistic against a continuous CDF.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0, |acc: f64, (i, &x)| {
        let f = cdf(x);
        acc.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.total_cmp(y));
    b.sort_by(|x, y| x.total_cmp(y));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
