//! Variance-time estimation of the Hurst parameter.
//!
//! The load series is aggregated at a geometric grid of levels `a`; for a
//! second-order self-similar process `Var(Y^(a))` decays like `a^beta` with
//! `beta = 2H - 2`, so an OLS line through `(log10 a, log10 Var)` gives
//! `H = 1 + beta / 2`.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::traffic::{aggregate_series, LoadSeries};

#[derive(Debug, Error, PartialEq)]
pub enum SelfSimError {
    #[error("lag {lag} out of range for series of length {len}")]
    LagOutOfRange { lag: usize, len: usize },
    #[error("autocovariance needs lag >= 1, 0 < H <= 1 and sigma^2 > 0")]
    Domain,
    #[error("aggregation level must be at least 1")]
    InvalidLevel,
    #[error("need at least 2 usable variance-time points, got {0}")]
    TooFewPoints(usize),
    #[error("all abscissae are equal; slope is undefined")]
    DegenerateAbscissae,
}

/// Biased (1/n) sample autocovariance at lag `k`.
pub fn sample_autocovariance(values: &[f64], k: usize) -> Result<f64, SelfSimError> {
    let n = values.len();
    if k >= n {
        return Err(SelfSimError::LagOutOfRange { lag: k, len: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let acc: f64 = values
        .iter()
        .zip(&values[k..])
        .map(|(a, b)| (a - mean) * (b - mean))
        .sum();
    Ok(acc / n as f64)
}

/// Autocovariance of an exactly second-order self-similar process:
/// `sigma^2/2 * ((k+1)^2H - 2 k^2H + (k-1)^2H)`.
pub fn exact_ss_autocovariance(k: u64, hurst: f64, sigma2: f64) -> Result<f64, SelfSimError> {
    if k < 1 || !(hurst > 0.0 && hurst <= 1.0) || !(sigma2 > 0.0) {
        return Err(SelfSimError::Domain);
    }
    let e = 2.0 * hurst;
    let k = k as f64;
    Ok(sigma2 / 2.0 * ((k + 1.0).powf(e) - 2.0 * k.powf(e) + (k - 1.0).powf(e)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VarianceTimePoint {
    pub a: usize,
    pub log10_a: f64,
    pub log10_var: f64,
}

/// Points of a variance-time plot, plus the levels dropped for having zero variance.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceTime {
    pub points: Vec<VarianceTimePoint>,
    pub skipped_levels: Vec<usize>,
}

fn biased_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

pub fn variance_time_points(
    series: &LoadSeries,
    a_values: &[usize],
) -> Result<VarianceTime, SelfSimError> {
    let mut points = Vec::with_capacity(a_values.len());
    let mut skipped_levels = Vec::new();
    for &a in a_values {
        let agg = aggregate_series(series, a).map_err(|_| SelfSimError::InvalidLevel)?;
        if agg.len() < 2 {
            skipped_levels.push(a);
            continue;
        }
        let var = biased_variance(&agg.values);
        if var > 0.0 && var.is_finite() {
            points.push(VarianceTimePoint {
                a,
                log10_a: (a as f64).log10(),
                log10_var: var.log10(),
            });
        } else {
            skipped_levels.push(a);
        }
    }
    if points.len() < 2 {
        return Err(SelfSimError::TooFewPoints(points.len()));
    }
    Ok(VarianceTime {
        points,
        skipped_levels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `log10_var` on `log10_a`.
pub fn fit_slope(points: &[VarianceTimePoint]) -> Result<LineFit, SelfSimError> {
    if points.len() < 2 {
        return Err(SelfSimError::TooFewPoints(points.len()));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.log10_a).sum::<f64>() / n;
    let my = points.iter().map(|p| p.log10_var).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.log10_a - mx).powi(2)).sum();
    let sxy: f64 = points
        .iter()
        .map(|p| (p.log10_a - mx) * (p.log10_var - my))
        .sum();
    let syy: f64 = points.iter().map(|p| (p.log10_var - my).powi(2)).sum();
    if sxx <= f64::EPSILON * n {
        return Err(SelfSimError::DegenerateAbscissae);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 {
        (sxy * sxy) / (sxx * syy)
    } else {
        1.0
    };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

#[derive(Debug, Clone, Default)]
pub struct HurstOptions {
    /// Explicit aggregation grid; defaults to powers of two up to `len / 10`.
    pub a_values: Option<Vec<usize>>,
    /// Levels below this are left out of the fit.
    pub min_a: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HurstEstimate {
    /// `1 + beta_hat / 2`, unclamped.
    pub h_hat: f64,
    /// `h_hat` clamped to `[0, 1]`; this is what policy gates compare against.
    pub h_reported: f64,
    pub beta_hat: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<VarianceTimePoint>,
    pub skipped_levels: Vec<usize>,
}

/// Powers of two `1, 2, 4, ..` not exceeding `len / 10`.
pub fn default_levels(len: usize) -> Vec<usize> {
    let cap = len / 10;
    std::iter::successors(Some(1usize), |a| a.checked_mul(2))
        .take_while(|&a| a <= cap)
        .collect()
}

pub fn estimate_hurst(series: &LoadSeries) -> Result<HurstEstimate, SelfSimError> {
    estimate_hurst_with(series, &HurstOptions::default())
}

pub fn estimate_hurst_with(
    series: &LoadSeries,
    opts: &HurstOptions,
) -> Result<HurstEstimate, SelfSimError> {
    let levels: Vec<usize> = opts
        .a_values
        .clone()
        .unwrap_or_else(|| default_levels(series.len()))
        .into_iter()
        .filter(|&a| a >= opts.min_a.max(1))
        .collect();
    let vt = variance_time_points(series, &levels)?;
    let fit = fit_slope(&vt.points)?;
    let h_hat = 1.0 + fit.slope / 2.0;
    Ok(HurstEstimate {
        h_hat,
        h_reported: h_hat.clamp(0.0, 1.0),
        beta_hat: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        points: vt.points,
        skipped_levels: vt.skipped_levels,
    })
}

/// `a,log10_a,log10_var` rows for plotting.
pub fn write_variance_time_csv<W: Write>(
    points: &[VarianceTimePoint],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "a,log10_a,log10_var")?;
    for p in points {
        writeln!(out, "{},{},{}", p.a, p.log10_a, p.log10_var)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pt(x: f64, y: f64) -> VarianceTimePoint {
        VarianceTimePoint {
            a: 10f64.powf(x).round() as usize,
            log10_a: x,
            log10_var: y,
        }
    }

    #[test]
    fn autocovariance_examples() {
        assert_eq!(sample_autocovariance(&[3.0; 8], 2).unwrap(), 0.0);
        let v = sample_autocovariance(&[1.0, 2.0, 3.0], 0).unwrap();
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
        let alt: Vec<f64> = (0..1000)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let g = sample_autocovariance(&alt, 1).unwrap();
        // biased estimator: (n-1)/n of the true value
        assert!((g + 1.0).abs() < 2e-3, "{g}");
        assert_eq!(
            sample_autocovariance(&[1.0], 1),
            Err(SelfSimError::LagOutOfRange { lag: 1, len: 1 })
        );
    }

    #[test]
    fn exact_form_examples() {
        assert_eq!(exact_ss_autocovariance(1, 0.5, 1.0).unwrap(), 0.0);
        assert_eq!(exact_ss_autocovariance(1, 1.0, 1.0).unwrap(), 1.0);
        // 0.5 * (3 sqrt 3 - 4 sqrt 2 + 1)
        let oracle = 0.5 * (3.0 * 3f64.sqrt() - 4.0 * 2f64.sqrt() + 1.0);
        let g = exact_ss_autocovariance(2, 0.75, 1.0).unwrap();
        assert!((g - oracle).abs() < 1e-12, "{g}");
        assert!((g - 0.26965).abs() < 1e-4, "{g}");
        assert!(exact_ss_autocovariance(0, 0.7, 1.0).is_err());
        assert!(exact_ss_autocovariance(1, 0.0, 1.0).is_err());
        assert!(exact_ss_autocovariance(1, 0.7, 0.0).is_err());
    }

    #[test]
    fn exact_form_uncorrelated_at_half() {
        for k in 1..200 {
            assert!(exact_ss_autocovariance(k, 0.5, 2.5).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn exact_form_positive_and_decreasing_for_lrd() {
        for h in [0.55, 0.7, 0.85, 0.95] {
            let mut prev = f64::INFINITY;
            for k in 1..=100 {
                let g = exact_ss_autocovariance(k, h, 1.0).unwrap();
                assert!(g >= 0.0 && g < prev, "H={h} k={k}");
                prev = g;
            }
        }
    }

    #[test]
    fn slope_examples() {
        let half: Vec<_> = (0..5)
            .map(|i| pt(i as f64 * 0.3, -0.5 * i as f64 * 0.3 + 2.0))
            .collect();
        assert!((fit_slope(&half).unwrap().slope + 0.5).abs() < 1e-12);
        let unit: Vec<_> = (0..5).map(|i| pt(i as f64, -(i as f64))).collect();
        let fit = fit_slope(&unit).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        let two = [pt(0.0, 1.0), pt(2.0, 0.0)];
        assert!((fit_slope(&two).unwrap().slope + 0.5).abs() < 1e-12);
        assert_eq!(
            fit_slope(&[pt(1.0, 1.0), pt(1.0, 2.0)]),
            Err(SelfSimError::DegenerateAbscissae)
        );
        assert_eq!(
            fit_slope(&[pt(1.0, 1.0)]),
            Err(SelfSimError::TooFewPoints(1))
        );
    }

    #[test]
    fn variance_time_errors() {
        let constant = LoadSeries::new(1.0, vec![5.0; 1000]);
        assert_eq!(
            variance_time_points(&constant, &[1, 2, 4]),
            Err(SelfSimError::TooFewPoints(0))
        );
        let noisy = LoadSeries::new(1.0, (0..1000).map(|i| (i % 7) as f64).collect());
        assert_eq!(
            variance_time_points(&noisy, &[1]),
            Err(SelfSimError::TooFewPoints(1))
        );
        assert!(estimate_hurst(&constant).is_err());
    }

    #[test]
    fn iid_slope_is_minus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let values: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>()).collect();
        let est = estimate_hurst(&LoadSeries::new(1e-3, values)).unwrap();
        assert!((-1.15..=-0.85).contains(&est.beta_hat), "{}", est.beta_hat);
        assert!((est.h_hat - 0.5).abs() <= 0.05);
        assert_eq!(est.h_hat - 1.0 - est.beta_hat / 2.0, 0.0);
    }

    #[test]
    fn iid_aggregate_variance_scales_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let values: Vec<f64> = (0..100_000).map(|_| rng.gen::<f64>()).collect();
        let s = LoadSeries::new(1.0, values);
        let v1 = biased_variance(&s.values);
        for a in [2usize, 4, 8, 16] {
            let va = biased_variance(&aggregate_series(&s, a).unwrap().values);
            let ratio = va / (v1 / a as f64);
            assert!((ratio - 1.0).abs() < 0.10, "a={a} ratio={ratio}");
        }
    }

    #[test]
    fn min_a_filters_levels() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let values: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
        let opts = HurstOptions {
            a_values: None,
            min_a: 4,
        };
        let est = estimate_hurst_with(&LoadSeries::new(1.0, values), &opts).unwrap();
        assert!(est.points.iter().all(|p| p.a >= 4));
        assert_eq!(default_levels(10_000).last(), Some(&512));
        assert_eq!(default_levels(15), vec![1]);
        assert!(default_levels(9).is_empty());
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_variance_time_csv(&[pt(0.0, 1.5)], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "a,log10_a,log10_var\n1,0,1.5\n"
        );
    }

    proptest! {
        #[test]
        fn slope_ignores_vertical_shift(
            ys in proptest::collection::vec(-5.0f64..5.0, 3..12),
            shift in -100.0f64..100.0,
        ) {
            let pts: Vec<_> = ys.iter().enumerate().map(|(i, &y)| pt(i as f64 * 0.3, y)).collect();
            let shifted: Vec<_> = pts.iter().map(|p| VarianceTimePoint { log10_var: p.log10_var + shift, ..*p }).collect();
            let a = fit_slope(&pts).unwrap().slope;
            let b = fit_slope(&shifted).unwrap().slope;
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
