//! Chain-quality and posterior summaries computed from stored draws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{PhysicalDraws, SampleSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AcfMode {
    /// Centered autocovariance normalized by its lag-0 value.
    #[default]
    Standard,
    /// `(1/‖x‖) Σ_{k=1+ℓ}^{N-ℓ} (x^k - x̄)(x^{k-ℓ} - x̄)` with the uncentered
    /// norm and shortened upper limit, as sometimes printed.
    PaperLiteral,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autocorrelation {
    pub values: Vec<f64>,
    /// Set when the series has zero variance (standard mode).
    pub constant: bool,
}

pub fn autocorrelation(series: &[f64], max_lag: usize, mode: AcfMode) -> Result<Autocorrelation> {
    let n = series.len();
    if n < 2 {
        return Err(Error::Invalid(format!(
            "autocorrelation needs at least 2 values, got {n}"
        )));
    }
    if max_lag >= n {
        return Err(Error::Invalid(format!(
            "max_lag {max_lag} must be below the series length {n}"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    match mode {
        AcfMode::Standard => {
            let c0: f64 = centered.iter().map(|c| c * c).sum();
            if c0 == 0.0 {
                let mut values = vec![0.0; max_lag + 1];
                values[0] = 1.0;
                return Ok(Autocorrelation {
                    values,
                    constant: true,
                });
            }
            let values = (0..=max_lag)
                .map(|lag| {
                    centered[lag..]
                        .iter()
                        .zip(&centered)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        / c0
                })
                .collect();
            Ok(Autocorrelation {
                values,
                constant: false,
            })
        }
        AcfMode::PaperLiteral => {
            let norm = series.iter().map(|x| x * x).sum::<f64>().sqrt();
            let values = (0..=max_lag)
                .map(|lag| {
                    // 1-based k from 1 + ℓ to N - ℓ.
                    let (start, end) = (lag, n.saturating_sub(lag));
                    if start >= end || norm == 0.0 {
                        return 0.0;
                    }
                    (start..end)
                        .map(|k| centered[k] * centered[k - lag])
                        .sum::<f64>()
                        / norm
                })
                .collect();
            Ok(Autocorrelation {
                values,
                constant: norm == 0.0,
            })
        }
    }
}

/// Quantile of sorted data by linear interpolation between order statistics.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub level: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub mean: Vec<f64>,
}

/// Pointwise quantiles at `(1 - level)/2` and `1 - (1 - level)/2` plus the
/// pointwise mean; `draws` is row-major with `n` columns.
pub fn credible_envelope(draws: &[f64], n: usize, level: f64) -> Result<Envelope> {
    if !(0.0..1.0).contains(&level) {
        return Err(Error::Invalid(format!(
            "level must lie in [0, 1), got {level}"
        )));
    }
    if n == 0 || !draws.len().is_multiple_of(n) {
        return Err(Error::Invalid("draws do not form rows of length n".into()));
    }
    let steps = draws.len() / n;
    if steps < 2 {
        return Err(Error::Invalid(format!(
            "credible envelope needs at least 2 draws, got {steps}"
        )));
    }
    let tail = 0.5 * (1.0 - level);
    let mut env = Envelope {
        level,
        lo: Vec::with_capacity(n),
        hi: Vec::with_capacity(n),
        mean: Vec::with_capacity(n),
    };
    let mut col = vec![0.0; steps];
    for j in 0..n {
        for (i, c) in col.iter_mut().enumerate() {
            *c = draws[i * n + j];
        }
        env.mean.push(col.iter().sum::<f64>() / steps as f64);
        col.sort_by(f64::total_cmp);
        env.lo.push(quantile_sorted(&col, tail));
        env.hi.push(quantile_sorted(&col, 1.0 - tail));
    }
    Ok(env)
}

/// δ = β₁ϑ + √β₁ ϑ, one standard deviation above the gamma mean.
pub fn threshold_delta(beta1: f64, vartheta: f64) -> f64 {
    beta1 * vartheta + beta1.sqrt() * vartheta
}

/// Number of components strictly above `delta`.
pub fn compressibility_count(theta: &[f64], delta: f64) -> usize {
    theta.iter().filter(|&&t| t > delta).count()
}

/// Counts of each value `0..=n` among `counts`.
pub fn count_histogram(counts: &[usize], n: usize) -> Vec<usize> {
    let mut hist = vec![0; n + 1];
    for &c in counts {
        hist[c.min(n)] += 1;
    }
    hist
}

/// Smallest most frequent value.
pub fn histogram_mode(hist: &[usize]) -> usize {
    let mut best = 0;
    for (k, &c) in hist.iter().enumerate() {
        if c > hist[best] {
            best = k;
        }
    }
    best
}

/// Equal-width histogram of `values` over `[lo, hi]`; returns `(edges, counts)`.
pub fn histogram(values: &[f64], bins: usize) -> (Vec<f64>, Vec<usize>) {
    let bins = bins.max(1);
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() || !hi.is_finite() {
        return (vec![0.0, 1.0], vec![0]);
    }
    if hi == lo {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    (edges, counts)
}

/// Settings for [`build_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub max_lag: usize,
    /// 1-based component indices whose autocorrelations are reported.
    pub probes: Vec<usize>,
    pub level: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeAcf {
    pub index: usize,
    pub x: Vec<f64>,
    pub theta: Vec<f64>,
    pub x_literal: Vec<f64>,
    pub theta_literal: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub acceptance_rate: f64,
    pub stored_draws: usize,
    pub excluded_draws: usize,
    pub max_lag: usize,
    pub delta: f64,
    pub probes: Vec<ProbeAcf>,
    pub envelope_z: Envelope,
    pub envelope_x: Envelope,
    pub envelope_theta: Envelope,
    pub compress_counts: Vec<usize>,
    pub compress_histogram: Vec<usize>,
    pub compress_mode: usize,
    pub warnings: Vec<String>,
}

fn kept_rows(data: &[f64], phys: &PhysicalDraws) -> Vec<f64> {
    let n = phys.n;
    (0..phys.len())
        .filter(|&i| !phys.excluded[i])
        .flat_map(|i| data[i * n..(i + 1) * n].iter().copied())
        .collect()
}

/// Summaries of one chain: probe autocorrelations of x and θ, envelopes of
/// z, x and θ, and δ-compressibility of every kept draw.
pub fn build_report(
    set: &SampleSet,
    phys: &PhysicalDraws,
    cfg: &ReportConfig,
) -> Result<DiagnosticsReport> {
    let n = phys.n;
    let kept = phys.excluded.iter().filter(|e| !**e).count();
    if kept < 2 {
        return Err(Error::Invalid(format!(
            "diagnostics need at least 2 usable draws, got {kept}"
        )));
    }
    if let Some(&bad) = cfg.probes.iter().find(|&&p| p == 0 || p > n) {
        return Err(Error::Config(format!("probe index {bad} outside 1..={n}")));
    }
    if !(cfg.delta > 0.0) {
        return Err(Error::Domain {
            what: "delta",
            value: cfg.delta,
        });
    }
    let mut warnings = Vec::new();
    let mut max_lag = cfg.max_lag;
    if max_lag >= kept {
        max_lag = kept - 1;
        warnings.push(format!(
            "max_lag {} truncated to {} for {} usable draws",
            cfg.max_lag, max_lag, kept
        ));
    }
    let probes = cfg
        .probes
        .iter()
        .map(|&p| {
            let x = phys.column(&phys.x, p - 1);
            let theta = phys.column(&phys.theta, p - 1);
            Ok(ProbeAcf {
                index: p,
                x: autocorrelation(&x, max_lag, AcfMode::Standard)?.values,
                theta: autocorrelation(&theta, max_lag, AcfMode::Standard)?.values,
                x_literal: autocorrelation(&x, max_lag, AcfMode::PaperLiteral)?.values,
                theta_literal: autocorrelation(&theta, max_lag, AcfMode::PaperLiteral)?.values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let compress_counts: Vec<usize> = (0..phys.len())
        .filter(|&i| !phys.excluded[i])
        .map(|i| compressibility_count(phys.theta_row(i), cfg.delta))
        .collect();
    let compress_histogram = count_histogram(&compress_counts, n);
    Ok(DiagnosticsReport {
        acceptance_rate: set.acceptance_rate(),
        stored_draws: phys.len(),
        excluded_draws: phys.len() - kept,
        max_lag,
        delta: cfg.delta,
        probes,
        envelope_z: credible_envelope(&kept_rows(&phys.z, phys), n, cfg.level)?,
        envelope_x: credible_envelope(&kept_rows(&phys.x, phys), n, cfg.level)?,
        envelope_theta: credible_envelope(&kept_rows(&phys.theta, phys), n, cfg.level)?,
        compress_mode: histogram_mode(&compress_histogram),
        compress_histogram,
        compress_counts,
        warnings,
    })
}
