//! Per-episode assessment metrics computed from force/time series.
//!
//! Four metrics are reported per episode: maximal applied force, time
//! integral of the force modulus, the force amplitude spectrum integrated
//! over the 1-13 Hz band of voluntary motion and physiological tremor, and
//! execution time (successful episodes only). Batch summaries report median,
//! standard deviation, quartiles, and success rate.
//!
//! The spectral estimator is a single-window DFT of the mean-removed episode
//! signal, no tapering, with amplitudes normalized as `2|X_k|/N` and bins
//! included when `f_lo <= f_k <= f_hi`.

use rustfft::{num_complex::Complex, FftPlanner};

use crate::{Error, Result};

/// Uniformly sampled force-modulus series for one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceSeries {
    samples: Vec<(f64, f64)>,
    sample_rate: f64,
}

impl ForceSeries {
    /// Build from `(t seconds, force newtons)` samples.
    ///
    /// Timestamps must increase uniformly at `1/sample_rate` and forces must
    /// be non-negative.
    pub fn new(samples: Vec<(f64, f64)>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) {
            return Err(Error::InvalidInput(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        let dt = 1.0 / sample_rate;
        for (i, &(t, f)) in samples.iter().enumerate() {
            if !t.is_finite() || !f.is_finite() {
                return Err(Error::NonFinite(format!("sample {i} of force series")));
            }
            if f < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "force modulus must be >= 0, got {f} at sample {i}"
                )));
            }
            if i > 0 {
                let gap = t - samples[i - 1].0;
                if gap <= 0.0 || (gap - dt).abs() > 1e-9 * (1.0 + dt) {
                    return Err(Error::InvalidInput(format!(
                        "timestamps must increase uniformly by {dt}, got gap {gap} at sample {i}"
                    )));
                }
            }
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Convenience constructor: values sampled at `i / sample_rate`.
    pub fn from_values(values: &[f64], sample_rate: f64) -> Result<Self> {
        let samples = values
            .iter()
            .enumerate()
            .map(|(i, &f)| (i as f64 / sample_rate, f))
            .collect();
        Self::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|&(_, f)| f).collect()
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// Maximum of the force modulus over the series.
pub fn max_force(series: &ForceSeries) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::InvalidInput("empty force series".into()));
    }
    Ok(series
        .samples
        .iter()
        .map(|&(_, f)| f)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Trapezoidal integral of the force modulus over time, newton-seconds.
pub fn integral_force(series: &ForceSeries) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::InvalidInput(
            "force integral needs at least 2 samples".into(),
        ));
    }
    let mut total = 0.0;
    for w in series.samples.windows(2) {
        let (t0, f0) = w[0];
        let (t1, f1) = w[1];
        total += 0.5 * (f0 + f1) * (t1 - t0);
    }
    Ok(total)
}

/// Sum of amplitude-spectrum values over frequency bins in `[f_lo, f_hi]` Hz.
///
/// The signal is mean-removed before the transform, so the DC bin carries
/// nothing; amplitudes are `2|X_k|/N` at bin frequencies `k * rate / N`.
pub fn force_fft_band(series: &ForceSeries, f_lo: f64, f_hi: f64) -> Result<f64> {
    if !(f_lo > 0.0) || !(f_hi >= f_lo) {
        return Err(Error::InvalidInput(format!(
            "need 0 < f_lo <= f_hi, got [{f_lo}, {f_hi}]"
        )));
    }
    if series.duration() < 1.0 / f_lo {
        return Err(Error::InvalidInput(format!(
            "series duration {:.3} s too short to resolve {f_lo} Hz",
            series.duration()
        )));
    }
    let n = series.len();
    let mean = series.samples.iter().map(|&(_, f)| f).sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series
        .samples
        .iter()
        .map(|&(_, f)| Complex::new(f - mean, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let bin_hz = series.sample_rate / n as f64;
    let mut band = 0.0;
    for (k, x) in buf.iter().enumerate().take(n / 2 + 1).skip(1) {
        let f_k = k as f64 * bin_hz;
        if f_k >= f_lo && f_k <= f_hi {
            band += 2.0 * x.norm() / n as f64;
        }
    }
    Ok(band)
}

/// Metric values for one episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    /// Maximal force modulus, newtons.
    pub f_max: f64,
    /// Integral force, newton-seconds.
    pub f_integral: f64,
    /// Spectral band integral, 1-13 Hz.
    pub f_fft: f64,
    /// Execution time, seconds; present only for successful episodes.
    pub execution_time: Option<f64>,
    pub success: bool,
}

/// Default spectral band, Hz.
pub const FFT_BAND_LO_HZ: f64 = 1.0;
pub const FFT_BAND_HI_HZ: f64 = 13.0;

/// Outcome of one evaluation episode, as consumed by the metrics.
#[derive(Debug, Clone)]
pub struct EpisodeLog {
    pub forces: ForceSeries,
    pub success: bool,
    /// Elapsed simulation time at episode end, seconds.
    pub elapsed_time: f64,
    pub done: bool,
}

/// Execution time of a finished episode; absent when the episode failed.
pub fn execution_time(log: &EpisodeLog) -> Result<Option<f64>> {
    if !log.done {
        return Err(Error::InvalidState(
            "execution time of an unfinished episode".into(),
        ));
    }
    Ok(log.success.then_some(log.elapsed_time))
}

/// All four metrics for one episode.
pub fn episode_metrics(log: &EpisodeLog) -> Result<MetricsReport> {
    Ok(MetricsReport {
        f_max: max_force(&log.forces)?,
        f_integral: integral_force(&log.forces)?,
        f_fft: force_fft_band(&log.forces, FFT_BAND_LO_HZ, FFT_BAND_HI_HZ)?,
        execution_time: execution_time(log)?,
        success: log.success,
    })
}

/// Median, standard deviation, and quartiles of one metric over a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSummary {
    pub median: f64,
    pub std_dev: f64,
    pub q1: f64,
    pub q3: f64,
    /// Number of episodes contributing (successes only for execution time).
    pub count: usize,
}

/// Batch-level report over a set of episodes.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchReport {
    pub f_max: MetricSummary,
    pub f_integral: MetricSummary,
    pub f_fft: MetricSummary,
    /// Absent when no episode succeeded.
    pub execution_time: Option<MetricSummary>,
    pub success_rate: f64,
    pub episodes: usize,
}

/// Median of already-sorted values; even counts average the middle two.
fn median_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Quantile by linear interpolation of order statistics.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Summarize one metric's values (population standard deviation).
pub fn summarize(values: &[f64]) -> Result<MetricSummary> {
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot summarize zero values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite metric values"));
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok(MetricSummary {
        median: median_sorted(&sorted),
        std_dev: var.sqrt(),
        q1: quantile_sorted(&sorted, 0.25),
        q3: quantile_sorted(&sorted, 0.75),
        count: sorted.len(),
    })
}

/// Per-metric summaries plus success rate over a batch of episodes.
pub fn batch_report(episodes: &[MetricsReport]) -> Result<BatchReport> {
    if episodes.is_empty() {
        return Err(Error::InvalidInput("batch report needs >= 1 episode".into()));
    }
    let collect = |f: fn(&MetricsReport) -> f64| episodes.iter().map(f).collect::<Vec<_>>();
    let times: Vec<f64> = episodes.iter().filter_map(|m| m.execution_time).collect();
    let successes = episodes.iter().filter(|m| m.success).count();
    Ok(BatchReport {
        f_max: summarize(&collect(|m| m.f_max))?,
        f_integral: summarize(&collect(|m| m.f_integral))?,
        f_fft: summarize(&collect(|m| m.f_fft))?,
        execution_time: if times.is_empty() {
            None
        } else {
            Some(summarize(&times)?)
        },
        success_rate: successes as f64 / episodes.len() as f64,
        episodes: episodes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent reference: direct summation DFT, amplitude `2|X_k|/N`.
    fn direct_dft_band(values: &[f64], rate: f64, f_lo: f64, f_hi: f64) -> f64 {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let mut band = 0.0;
        for k in 1..=n / 2 {
            let f_k = k as f64 * rate / n as f64;
            if f_k < f_lo || f_k > f_hi {
                continue;
            }
            let mut re = 0.0;
            let mut im = 0.0;
            for (i, &v) in values.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                re += (v - mean) * ang.cos();
                im += (v - mean) * ang.sin();
            }
            band += 2.0 * (re * re + im * im).sqrt() / n as f64;
        }
        band
    }

    #[test]
    fn max_force_trivial_cases() {
        let s = ForceSeries::from_values(&[2.0; 10], 50.0).unwrap();
        assert_eq!(max_force(&s).unwrap(), 2.0);
        let s = ForceSeries::from_values(&[0.0, 1.5, 0.3], 50.0).unwrap();
        assert_eq!(max_force(&s).unwrap(), 1.5);
        assert!(max_force(&ForceSeries::from_values(&[], 50.0).unwrap()).is_err());
    }

    #[test]
    fn max_force_matches_exhaustive_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..50 {
            let values: Vec<f64> = (0..rng.gen_range(1..400))
                .map(|_| rng.gen_range(0.0..5.0))
                .collect();
            let mut best = f64::NEG_INFINITY;
            for &v in &values {
                if v > best {
                    best = v;
                }
            }
            let s = ForceSeries::from_values(&values, 50.0).unwrap();
            assert_eq!(max_force(&s).unwrap(), best);
        }
    }

    #[test]
    fn integral_force_exact_for_constant_and_ramp() {
        let n = 501; // 10 s at 50 Hz, endpoints included
        let s = ForceSeries::from_values(&vec![2.0; n], 50.0).unwrap();
        assert!((integral_force(&s).unwrap() - 20.0).abs() < 1e-12);

        // Linear ramp 0 -> 1 N over 1 s: area 0.5 (trapezoid exact).
        let n = 51;
        let ramp: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let s = ForceSeries::from_values(&ramp, 50.0).unwrap();
        assert!((integral_force(&s).unwrap() - 0.5).abs() < 1e-12);

        assert!(integral_force(&ForceSeries::from_values(&[1.0], 50.0).unwrap()).is_err());
    }

    #[test]
    fn integral_force_matches_oversampled_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(10..300);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
            let s = ForceSeries::from_values(&values, 50.0).unwrap();
            let coarse = integral_force(&s).unwrap();
            // 10x-oversampled trapezoid on the linear interpolant.
            let mut fine = 0.0;
            let dt = 1.0 / 50.0 / 10.0;
            for w in values.windows(2) {
                for j in 0..10 {
                    let a = w[0] + (w[1] - w[0]) * j as f64 / 10.0;
                    let b = w[0] + (w[1] - w[0]) * (j + 1) as f64 / 10.0;
                    fine += 0.5 * (a + b) * dt;
                }
            }
            let tol = 0.01 * fine.abs().max(1e-9);
            assert!((coarse - fine).abs() <= tol, "{coarse} vs {fine}");
        }
    }

    #[test]
    fn constant_signal_has_empty_band() {
        let s = ForceSeries::from_values(&[1.7; 100], 50.0).unwrap();
        // All energy sits at DC, which mean removal cancels to rounding noise.
        assert!(force_fft_band(&s, 1.0, 13.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn bin_aligned_sinusoid_recovers_unit_amplitude() {
        // 5 Hz, amplitude 1, 20 s at 50 Hz: exactly 100 cycles over 1000 bins.
        let rate = 50.0;
        let n = 1000;
        let values: Vec<f64> = (0..n)
            .map(|i| 2.0 + (2.0 * std::f64::consts::PI * 5.0 * i as f64 / rate).sin())
            .collect();
        let s = ForceSeries::from_values(&values, rate).unwrap();
        let band = force_fft_band(&s, 1.0, 13.0).unwrap();
        assert!((band - 1.0).abs() < 1e-6, "band {band}");
    }

    #[test]
    fn fft_band_matches_direct_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..10 {
            let n = rng.gen_range(64..700);
            let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..4.0)).collect();
            let s = ForceSeries::from_values(&values, 50.0).unwrap();
            let fast = force_fft_band(&s, 1.0, 13.0).unwrap();
            let direct = direct_dft_band(&values, 50.0, 1.0, 13.0);
            assert!((fast - direct).abs() < 1e-9, "{fast} vs {direct}");
        }
    }

    #[test]
    fn band_splits_additively_at_bin_boundaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        // Sample count chosen so no bin lands exactly on 7 Hz (avoids
        // double-counting the boundary bin in both sub-bands).
        let values: Vec<f64> = (0..353).map(|_| rng.gen_range(0.0..2.0)).collect();
        let s = ForceSeries::from_values(&values, 50.0).unwrap();
        let whole = force_fft_band(&s, 1.0, 13.0).unwrap();
        let low = force_fft_band(&s, 1.0, 7.0).unwrap();
        let high = force_fft_band(&s, 7.0, 13.0).unwrap();
        assert!((whole - (low + high)).abs() < 1e-9);
    }

    #[test]
    fn parseval_identity_for_mean_removed_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        // Odd length: every positive bin has a mirror, no Nyquist special case.
        let n = 401usize;
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..3.0)).collect();
        let mean = values.iter().sum::<f64>() / n as f64;
        let mut amp_sq = 0.0;
        for k in 1..=n / 2 {
            let mut re = 0.0;
            let mut im = 0.0;
            for (i, &v) in values.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                re += (v - mean) * ang.cos();
                im += (v - mean) * ang.sin();
            }
            let a = 2.0 * (re * re + im * im).sqrt() / n as f64;
            amp_sq += a * a;
        }
        let energy: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let expected = 2.0 / n as f64 * energy;
        assert!(
            (amp_sq - expected).abs() <= 1e-9 * expected.abs().max(1.0),
            "{amp_sq} vs {expected}"
        );
    }

    #[test]
    fn scaling_forces_scales_metrics_linearly() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let values: Vec<f64> = (0..200).map(|_| rng.gen_range(0.0..2.0)).collect();
        let scaled: Vec<f64> = values.iter().map(|v| 3.5 * v).collect();
        let a = ForceSeries::from_values(&values, 50.0).unwrap();
        let b = ForceSeries::from_values(&scaled, 50.0).unwrap();
        assert!((max_force(&b).unwrap() - 3.5 * max_force(&a).unwrap()).abs() < 1e-12);
        assert!((integral_force(&b).unwrap() - 3.5 * integral_force(&a).unwrap()).abs() < 1e-12);
        let fa = force_fft_band(&a, 1.0, 13.0).unwrap();
        let fb = force_fft_band(&b, 1.0, 13.0).unwrap();
        assert!((fb - 3.5 * fa).abs() < 1e-9);
    }

    #[test]
    fn too_short_series_is_rejected_for_fft() {
        let s = ForceSeries::from_values(&[1.0; 30], 50.0).unwrap(); // 0.6 s
        assert!(force_fft_band(&s, 1.0, 13.0).is_err());
    }

    #[test]
    fn execution_time_present_only_on_success() {
        let forces = ForceSeries::from_values(&vec![0.5; 490], 50.0).unwrap();
        let log = EpisodeLog {
            forces: forces.clone(),
            success: true,
            elapsed_time: 9.8,
            done: true,
        };
        assert_eq!(execution_time(&log).unwrap(), Some(9.8));
        let log = EpisodeLog {
            forces,
            success: false,
            elapsed_time: 20.0,
            done: true,
        };
        assert_eq!(execution_time(&log).unwrap(), None);
        let unfinished = EpisodeLog {
            forces: ForceSeries::from_values(&[0.0; 10], 50.0).unwrap(),
            success: false,
            elapsed_time: 0.2,
            done: false,
        };
        assert!(execution_time(&unfinished).is_err());
    }

    #[test]
    fn median_conventions() {
        assert_eq!(median_sorted(&[8.0, 12.0]), 10.0);
        assert_eq!(median_sorted(&[1.0, 2.0, 5.0]), 2.0);
        // Batch median over synthetic values equals the sort-based oracle.
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..50 {
            let mut values: Vec<f64> = (0..rng.gen_range(1..100))
                .map(|_| rng.gen_range(0.0..20.0))
                .collect();
            let summary = summarize(&values).unwrap();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(summary.median, median_sorted(&values));
            assert!(summary.q1 <= summary.median && summary.median <= summary.q3);
        }
    }

    #[test]
    fn single_episode_batch_degenerates() {
        let m = MetricsReport {
            f_max: 1.2,
            f_integral: 4.0,
            f_fft: 7.5,
            execution_time: Some(9.0),
            success: true,
        };
        let report = batch_report(&[m]).unwrap();
        assert_eq!(report.f_max.median, 1.2);
        assert_eq!(report.f_max.std_dev, 0.0);
        assert_eq!(report.f_max.q1, 1.2);
        assert_eq!(report.f_max.q3, 1.2);
        assert_eq!(report.success_rate, 1.0);
    }

    #[test]
    fn success_rate_forty_nine_of_fifty() {
        let mut episodes = Vec::new();
        for i in 0..50 {
            episodes.push(MetricsReport {
                f_max: 1.0,
                f_integral: 5.0,
                f_fft: 2.0,
                execution_time: (i != 0).then_some(10.0),
                success: i != 0,
            });
        }
        let report = batch_report(&episodes).unwrap();
        assert!((report.success_rate - 0.98).abs() < 1e-12);
        assert_eq!(report.execution_time.unwrap().count, 49);
    }

    #[test]
    fn series_constructor_rejects_bad_input() {
        assert!(ForceSeries::new(vec![(0.0, 1.0), (0.5, 1.0)], 50.0).is_err());
        assert!(ForceSeries::from_values(&[-0.1], 50.0).is_err());
        assert!(ForceSeries::from_values(&[1.0], 0.0).is_err());
    }
}
