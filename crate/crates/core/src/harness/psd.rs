//! Power spectra of logical-error-rate traces and the steering filter
//! function `PSD(steered) / PSD(fixed)` in dB.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_TRACE_LEN: usize = 8;

/// One-sided periodogram of the mean-normalized trace, DC excluded.
/// Returns `(frequencies, power)` with frequencies in 1/samples.
pub fn periodogram(trace: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = trace.len();
    if n < MIN_TRACE_LEN {
        return Err(Error::TraceTooShort {
            min: MIN_TRACE_LEN,
            got: n,
        });
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    if !(mean.is_finite() && mean != 0.0) {
        return Err(Error::InvalidArgument(
            "trace mean must be finite and non-zero".into(),
        ));
    }
    let mut buf: Vec<Complex<f64>> = trace.iter().map(|&x| Complex::new(x / mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let freq = (1..=half).map(|k| k as f64 / n as f64).collect();
    let power = buf[1..=half]
        .iter()
        .map(|c| c.norm_sqr() / n as f64)
        .collect();
    Ok((freq, power))
}

/// `points` log-spaced frequencies from `1/len` to Nyquist.
pub fn log_grid(len: usize, points: usize) -> Vec<f64> {
    let (lo, hi) = ((1.0 / len as f64).ln(), 0.5f64.ln());
    if points < 2 {
        return vec![0.5];
    }
    (0..points)
        .map(|i| (lo + (hi - lo) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// Linear interpolation of `ln y` against `ln x`, clamped at both ends.
fn interp_loglog(x: &[f64], y: &[f64], at: f64) -> f64 {
    let floor = f64::MIN_POSITIVE;
    let ly = |i: usize| y[i].max(floor).ln();
    if at <= x[0] {
        return y[0].max(floor);
    }
    if at >= x[x.len() - 1] {
        return y[y.len() - 1].max(floor);
    }
    let j = x.partition_point(|&v| v < at);
    let (x0, x1) = (x[j - 1].ln(), x[j].ln());
    let w = (at.ln() - x0) / (x1 - x0);
    ((1.0 - w) * ly(j - 1) + w * ly(j)).exp()
}

/// Geometric mean of the interpolated periodograms on `grid`.
pub fn average_psd(traces: &[Vec<f64>], grid: &[f64]) -> Result<Vec<f64>> {
    if traces.is_empty() {
        return Err(Error::InvalidArgument(
            "at least one trace is required".into(),
        ));
    }
    let mut acc = vec![0.0; grid.len()];
    for tr in traces {
        let (f, p) = periodogram(tr)?;
        for (a, &g) in acc.iter_mut().zip(grid) {
            *a += interp_loglog(&f, &p, g).ln();
        }
    }
    Ok(acc
        .into_iter()
        .map(|a| (a / traces.len() as f64).exp())
        .collect())
}

/// Gaussian smoothing over grid indices; `width <= 0` returns the input.
pub fn gaussian_smooth(y: &[f64], width: f64) -> Vec<f64> {
    if width <= 0.0 {
        return y.to_vec();
    }
    let reach = (3.0 * width).ceil() as isize;
    (0..y.len() as isize)
        .map(|i| {
            let (mut s, mut w) = (0.0, 0.0);
            for j in (i - reach).max(0)..=(i + reach).min(y.len() as isize - 1) {
                let k = (-0.5 * ((j - i) as f64 / width).powi(2)).exp();
                s += k * y[j as usize];
                w += k;
            }
            s / w
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsdResult {
    pub freq: Vec<f64>,
    pub psd_fixed: Vec<f64>,
    pub psd_steered: Vec<f64>,
    pub filter_db: Vec<f64>,
}

/// Averaged spectra of fixed and steered traces on a shared log grid
/// spanning the shortest trace, and their ratio in dB.
pub fn analyze_psd(
    fixed: &[Vec<f64>],
    steered: &[Vec<f64>],
    points: usize,
    smoothing: f64,
) -> Result<PsdResult> {
    let len = fixed
        .iter()
        .chain(steered)
        .map(Vec::len)
        .min()
        .ok_or_else(|| Error::InvalidArgument("at least one trace is required".into()))?;
    if len < MIN_TRACE_LEN {
        return Err(Error::TraceTooShort {
            min: MIN_TRACE_LEN,
            got: len,
        });
    }
    let freq = log_grid(len, points);
    let psd_fixed = average_psd(fixed, &freq)?;
    let psd_steered = average_psd(steered, &freq)?;
    let raw: Vec<f64> = psd_steered
        .iter()
        .zip(&psd_fixed)
        .map(|(s, f)| 10.0 * (s / f).log10())
        .collect();
    Ok(PsdResult {
        filter_db: gaussian_smooth(&raw, smoothing),
        freq,
        psd_fixed,
        psd_steered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                1.0 + 0.1 * z
            })
            .collect()
    }

    /// Scales every Fourier component below `cut` by `gain`.
    fn attenuate(x: &[f64], cut: f64, gain: f64) -> Vec<f64> {
        let n = x.len();
        let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut planner = FftPlanner::new();
        planner.plan_fft_forward(n).process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            let f = k.min(n - k) as f64 / n as f64;
            if k != 0 && f < cut {
                *c *= gain;
            }
        }
        planner.plan_fft_inverse(n).process(&mut buf);
        buf.iter().map(|c| c.re / n as f64).collect()
    }

    #[test]
    fn parseval_and_short_traces() {
        let x = noise(256, 1);
        let (f, p) = periodogram(&x).unwrap();
        assert_eq!(f.len(), 128);
        assert!((f[127] - 0.5).abs() < 1e-12);
        assert!(p.iter().all(|&v| v >= 0.0));
        assert!(matches!(
            periodogram(&[1.0; 7]),
            Err(Error::TraceTooShort { .. })
        ));
    }

    #[test]
    fn grid_spans_to_nyquist() {
        let g = log_grid(500, 64);
        assert_eq!(g.len(), 64);
        assert!((g[0] - 1.0 / 500.0).abs() < 1e-12 && (g[63] - 0.5).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn identical_traces_give_unit_filter() {
        let tr: Vec<Vec<f64>> = (0..5).map(|s| noise(300, s)).collect();
        let r = analyze_psd(&tr, &tr, 64, 0.0).unwrap();
        assert!(r.filter_db.iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn halved_low_band_reads_minus_six_db() {
        let fixed: Vec<Vec<f64>> = (0..20).map(|s| noise(1024, 100 + s)).collect();
        let steered: Vec<Vec<f64>> = fixed.iter().map(|x| attenuate(x, 0.02, 0.5)).collect();
        let r = analyze_psd(&fixed, &steered, 64, 0.0).unwrap();
        let low: Vec<f64> = r
            .freq
            .iter()
            .zip(&r.filter_db)
            .filter(|(f, _)| **f < 0.015)
            .map(|p| *p.1)
            .collect();
        assert!(!low.is_empty());
        for v in &low {
            assert!((v + 6.0).abs() <= 1.5, "{v}");
        }
        let high: Vec<f64> = r
            .freq
            .iter()
            .zip(&r.filter_db)
            .filter(|(f, _)| **f > 0.03)
            .map(|p| *p.1)
            .collect();
        assert!(high.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn white_noise_filter_is_flat() {
        let fixed: Vec<Vec<f64>> = (0..50).map(|s| noise(512, 1000 + s)).collect();
        let steered: Vec<Vec<f64>> = (0..50).map(|s| noise(512, 2000 + s)).collect();
        let r = analyze_psd(&fixed, &steered, 64, 2.0).unwrap();
        for v in &r.filter_db {
            assert!(v.abs() <= 3.0, "{v}");
        }
    }

    #[test]
    fn smoothing_preserves_constants() {
        let y = vec![2.5; 20];
        assert!(gaussian_smooth(&y, 3.0)
            .iter()
            .all(|v| (v - 2.5).abs() < 1e-12));
    }
}
