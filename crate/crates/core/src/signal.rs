//! Small sample-stream utilities shared by the scene synthesizer, the
//! cancellers and the experiments.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::C64;

pub fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn mean_power(x: &[C64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v.norm_sqr()).sum::<f64>() / x.len() as f64
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(s * re, s * im)
}

pub fn add_noise<R: Rng + ?Sized>(rng: &mut R, x: &mut [C64], variance: f64) {
    if variance <= 0.0 {
        return;
    }
    for v in x.iter_mut() {
        *v += complex_gaussian(rng, variance);
    }
}

/// `y[n] = x[(n - d) mod len]`.
pub fn circular_delay(x: &[C64], delay: usize) -> Vec<C64> {
    let len = x.len();
    if len == 0 {
        return Vec::new();
    }
    let d = delay % len;
    let mut y = Vec::with_capacity(len);
    y.extend_from_slice(&x[len - d..]);
    y.extend_from_slice(&x[..len - d]);
    y
}

/// Band-limited (periodic sinc) interpolation by an integer factor. Samples
/// at multiples of `factor` reproduce the input exactly.
pub fn upsample(x: &[C64], factor: usize) -> Vec<C64> {
    assert!(factor >= 1);
    if factor == 1 || x.is_empty() {
        return x.to_vec();
    }
    let m = x.len();
    let big = m * factor;
    let mut planner = FftPlanner::new();
    let mut spec = x.to_vec();
    planner.plan_fft_forward(m).process(&mut spec);

    let mut out = vec![C64::new(0.0, 0.0); big];
    let half = m / 2;
    if m.is_multiple_of(2) {
        out[..half].copy_from_slice(&spec[..half]);
        out[big - half + 1..].copy_from_slice(&spec[half + 1..]);
        let nyq = spec[half] * 0.5;
        out[half] = nyq;
        out[big - half] = nyq;
    } else {
        out[..=half].copy_from_slice(&spec[..=half]);
        out[big - half..].copy_from_slice(&spec[half + 1..]);
    }
    planner.plan_fft_inverse(big).process(&mut out);
    let scale = 1.0 / m as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

/// Ideal low-pass to the original band followed by decimation; the exact
/// inverse of [`upsample`].
pub fn downsample(x: &[C64], factor: usize) -> Vec<C64> {
    assert!(factor >= 1);
    if factor == 1 || x.is_empty() {
        return x.to_vec();
    }
    let big = x.len();
    assert!(big.is_multiple_of(factor), "length {big} not divisible by {factor}");
    let m = big / factor;
    let mut planner = FftPlanner::new();
    let mut spec = x.to_vec();
    planner.plan_fft_forward(big).process(&mut spec);

    let mut out = vec![C64::new(0.0, 0.0); m];
    let half = m / 2;
    if m.is_multiple_of(2) {
        out[..half].copy_from_slice(&spec[..half]);
        out[half + 1..].copy_from_slice(&spec[big - half + 1..]);
        out[half] = spec[half] + spec[big - half];
    } else {
        out[..=half].copy_from_slice(&spec[..=half]);
        out[half + 1..].copy_from_slice(&spec[big - half..]);
    }
    planner.plan_fft_inverse(m).process(&mut out);
    let scale = 1.0 / big as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    out
}

/// Mean power of the spectral content within `|f| <= bandwidth/2`, scaled so
/// that a signal entirely inside the band returns its [`mean_power`].
pub fn band_power(x: &[C64], sample_rate_hz: f64, bandwidth_hz: f64) -> f64 {
    let n = x.len();
    if n == 0 {
        return 0.0;
    }
    let mut spec = x.to_vec();
    FftPlanner::new().plan_fft_forward(n).process(&mut spec);
    let df = sample_rate_hz / n as f64;
    let edge = 0.5 * bandwidth_hz;
    let total: f64 = spec
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let k = *k as f64;
            let f = if k < n as f64 / 2.0 { k * df } else { (k - n as f64) * df };
            f.abs() <= edge
        })
        .map(|(_, v)| v.norm_sqr())
        .sum();
    total / (n as f64 * n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Stream};

    fn noise(n: usize, seed: u64) -> Vec<C64> {
        let mut rng = rng::stream(seed, Stream::Noise);
        (0..n).map(|_| complex_gaussian(&mut rng, 1.0)).collect()
    }

    #[test]
    fn upsample_keeps_samples_and_downsample_inverts() {
        for &m in &[16usize, 15] {
            let x = noise(m, m as u64);
            let up = upsample(&x, 4);
            for (n, v) in x.iter().enumerate() {
                assert!((up[4 * n] - v).norm() < 1e-12);
            }
            let back = downsample(&up, 4);
            for (a, b) in x.iter().zip(&back) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn circular_delay_wraps() {
        let x: Vec<C64> = (0..5).map(|i| C64::new(i as f64, 0.0)).collect();
        let y = circular_delay(&x, 2);
        let re: Vec<f64> = y.iter().map(|v| v.re).collect();
        assert_eq!(re, vec![3.0, 4.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn band_power_of_in_band_tone() {
        let fs = 100.0;
        let x: Vec<C64> = (0..200)
            .map(|n| C64::from_polar(2.0, 2.0 * std::f64::consts::PI * 10.0 * n as f64 / fs))
            .collect();
        assert!((band_power(&x, fs, 30.0) - 4.0).abs() < 1e-9);
        assert!(band_power(&x, fs, 10.0) < 1e-20);
    }

    #[test]
    fn gaussian_variance() {
        let x = noise(200_000, 1);
        assert!((mean_power(&x) - 1.0).abs() < 0.02);
    }
}
