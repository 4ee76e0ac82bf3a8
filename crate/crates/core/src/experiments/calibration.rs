//! Checks of the processing chain against its closed-form behaviour:
//! coherent integration gain, CFAR false-alarm rate and the benefit of
//! interpolating over unused subcarriers.

use rand::Rng;
use rayon::prelude::*;

use super::{check_pfa, check_trials, median, trial_seed, RadarChain};
use crate::radarproc::{processing_gain_db, ProcessingMode, Window};
use crate::rng::{self, Stream};
use crate::scene::{apply_scene_grid, random_phase, Scene, Target};
use crate::signal::{db, from_db};
use crate::waveform::{generate_tx_grid, MaskPolicy, Numerology};
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessingGainConfig {
    pub numerology: Numerology,
    pub trials: usize,
    pub seed: u64,
    pub snr_db: f64,
    /// On-grid target pixel `(s, r)`.
    pub target_bin: (usize, isize),
    pub noise_variance: f64,
}

impl ProcessingGainConfig {
    pub fn new(numerology: Numerology) -> Self {
        Self {
            numerology,
            trials: 100,
            seed: 0,
            snr_db: -20.0,
            target_bin: (10, 0),
            noise_variance: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProcessingGain {
    pub theoretical_db: f64,
    pub measured_db: f64,
    /// Mean target-pixel power over mean noise-bin power.
    pub output_snr_db: f64,
}

/// Output SNR of an on-grid static target (rectangular window, full mask)
/// relative to the input SNR.
pub fn run_processing_gain(cfg: &ProcessingGainConfig) -> Result<ProcessingGain> {
    check_trials(cfg.trials)?;
    let num = &cfg.numerology;
    let chain = RadarChain::new(num, Window::Rectangular, ProcessingMode::Quotient)?;
    let space = chain.space();
    let (s0, r0) = cfg.target_bin;
    if !space.contains(s0 as isize, r0) {
        return Err(Error::param("target_bin", format!("({s0}, {r0}) outside the search space")));
    }
    let idx = s0 * space.doppler_bins() + (r0 + space.r_max as isize) as usize;

    let per_trial: Vec<(f64, f64)> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(cfg.seed, i);
            let mut rng = rng::stream(seed, Stream::Trial);
            let gain = C64::from_polar((from_db(cfg.snr_db) * cfg.noise_variance).sqrt(), random_phase(&mut rng));
            let tx = generate_tx_grid(num, &MaskPolicy::Full, seed)?;
            let (range_size, doppler_size) = chain.periodogram.transform_sizes();
            let target = Target::new(
                gain,
                s0 as f64 / (range_size as f64 * num.subcarrier_spacing_hz),
                r0 as f64 / (doppler_size as f64 * num.symbol_duration_s()),
            );
            let signal = Scene { targets: vec![target], ..Default::default() };
            let noise = Scene { noise_variance: cfg.noise_variance, ..Default::default() };
            let f_sig = chain.field(&tx, &apply_scene_grid(&tx, &signal, seed)?)?;
            let f_noise = chain.field(&tx, &apply_scene_grid(&tx, &noise, seed)?)?;
            let noise_mean = f_noise.iter().map(|v| v.norm_sqr()).sum::<f64>() / f_noise.len() as f64;
            Ok((f_sig[idx].norm_sqr(), noise_mean))
        })
        .collect::<Result<_>>()?;

    let sig: f64 = per_trial.iter().map(|t| t.0).sum::<f64>() / cfg.trials as f64;
    let noise: f64 = per_trial.iter().map(|t| t.1).sum::<f64>() / cfg.trials as f64;
    let output_snr_db = db(sig / noise);
    Ok(ProcessingGain {
        theoretical_db: processing_gain_db(num),
        measured_db: output_snr_db - cfg.snr_db,
        output_snr_db,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CfarConfig {
    pub numerology: Numerology,
    pub mask: MaskPolicy,
    pub window: Window,
    pub trials: usize,
    pub seed: u64,
    pub pfa_total: f64,
    pub noise_variance: f64,
}

impl CfarConfig {
    pub fn new(numerology: Numerology) -> Self {
        Self {
            numerology,
            mask: MaskPolicy::Full,
            window: Window::Rectangular,
            trials: 1000,
            seed: 0,
            pfa_total: 0.1,
            noise_variance: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CfarCalibration {
    pub threshold: f64,
    pub trials: usize,
    pub false_alarms: usize,
    /// Fraction of noise-only frames with any bin above the threshold.
    pub frame_rate: f64,
    pub bin_exceedances: u64,
    pub bins_tested: u64,
    /// Analytic per-bin exceedance probability.
    pub expected_bin_rate: f64,
}

/// Empirical false-alarm rate of the analytic threshold on noise-only
/// frames.
pub fn run_cfar_calibration(cfg: &CfarConfig) -> Result<CfarCalibration> {
    check_trials(cfg.trials)?;
    check_pfa(cfg.pfa_total)?;
    let num = &cfg.numerology;
    let chain = RadarChain::new(num, cfg.window, ProcessingMode::Quotient)?;
    let threshold = chain.threshold(cfg.noise_variance, cfg.pfa_total)?;
    let space = chain.space();

    let counts: Vec<u64> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(cfg.seed, i);
            let tx = generate_tx_grid(num, &cfg.mask, seed)?;
            let noise = Scene { noise_variance: cfg.noise_variance, ..Default::default() };
            let img = chain.image(&tx, &apply_scene_grid(&tx, &noise, seed)?)?;
            Ok(img.values.iter().filter(|&&v| v > threshold).count() as u64)
        })
        .collect::<Result<_>>()?;

    let false_alarms = counts.iter().filter(|&&c| c > 0).count();
    Ok(CfarCalibration {
        threshold,
        trials: cfg.trials,
        false_alarms,
        frame_rate: false_alarms as f64 / cfg.trials as f64,
        bin_exceedances: counts.iter().sum(),
        bins_tested: (cfg.trials * space.size()) as u64,
        expected_bin_rate: crate::radarproc::per_bin_pfa(cfg.pfa_total, &space),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationConfig {
    pub numerology: Numerology,
    pub density: f64,
    pub trials: usize,
    pub seed: u64,
    pub snr_db: f64,
    pub distance_m: (f64, f64),
    pub velocity_mps: (f64, f64),
    pub noise_variance: f64,
    /// Low-sidelobe windows keep the target's own sidelobes out of the
    /// background estimate.
    pub window: Window,
}

impl InterpolationConfig {
    pub fn new(numerology: Numerology) -> Self {
        Self {
            numerology,
            density: 0.9,
            trials: 20,
            seed: 0,
            snr_db: 20.0,
            distance_m: (20.0, 200.0),
            velocity_mps: (15.0, 40.0),
            noise_variance: 1.0,
            window: Window::Hamming,
        }
    }
}

/// Median over trials of the peak and background changes relative to a
/// full-mask reference (dB).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpolationCheck {
    /// Interpolated peak minus full-mask peak.
    pub interpolated_peak_db: f64,
    /// Zero-filled peak minus full-mask peak.
    pub zero_filled_peak_db: f64,
    /// Zero-filled background minus interpolated background.
    pub floor_rise_db: f64,
    /// Interpolated background minus full-mask background.
    pub interpolated_floor_db: f64,
}

/// Runs each trial three ways on the same data and noise: full mask,
/// random mask with interpolation, random mask with zero-filling. Peak is
/// the global maximum; background is the image median.
pub fn run_interpolation_check(cfg: &InterpolationConfig) -> Result<InterpolationCheck> {
    check_trials(cfg.trials)?;
    let num = &cfg.numerology;
    let full = RadarChain::new(num, cfg.window, ProcessingMode::Quotient)?;
    let mut zero_fill = RadarChain::new(num, cfg.window, ProcessingMode::Quotient)?;
    zero_fill.interpolate = false;
    let policy = MaskPolicy::UniformRandom { density: cfg.density };

    let rows: Vec<[f64; 4]> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(cfg.seed, i);
            let mut rng = rng::stream(seed, Stream::Trial);
            let d = rng.random_range(cfg.distance_m.0..=cfg.distance_m.1);
            let v = rng.random_range(cfg.velocity_mps.0..=cfg.velocity_mps.1);
            let gain = C64::from_polar((from_db(cfg.snr_db) * cfg.noise_variance).sqrt(), random_phase(&mut rng));
            let scene = Scene {
                targets: vec![Target::at_range(gain, d, v, num.carrier_freq_hz)],
                noise_variance: cfg.noise_variance,
                ..Default::default()
            };
            let tx_full = generate_tx_grid(num, &MaskPolicy::Full, seed)?;
            let mask = policy.build(num.active_subcarriers, num.ofdm_symbols, seed)?;
            let tx_masked = tx_full.clone().with_mask(mask.clone())?;
            let rx_full = apply_scene_grid(&tx_full, &scene, seed)?;
            let rx_masked = apply_scene_grid(&tx_masked, &scene, seed)?;

            let summarize = |chain: &RadarChain, tx, rx| -> Result<(f64, f64)> {
                let mut img = chain.image(tx, rx)?;
                let peak = img.argmax().2;
                Ok((peak, median(&mut img.values)))
            };
            let (p_full, f_full) = summarize(&full, &tx_full, &rx_full)?;
            let (p_int, f_int) = summarize(&full, &tx_masked, &rx_masked)?;
            let (p_zero, f_zero) = summarize(&zero_fill, &tx_masked, &rx_masked)?;
            Ok([db(p_int / p_full), db(p_zero / p_full), db(f_zero / f_int), db(f_int / f_full)])
        })
        .collect::<Result<_>>()?;

    let col = |k: usize| median(&mut rows.iter().map(|r| r[k]).collect::<Vec<_>>());
    Ok(InterpolationCheck {
        interpolated_peak_db: col(0),
        zero_filled_peak_db: col(1),
        floor_rise_db: col(2),
        interpolated_floor_db: col(3),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn num() -> Numerology {
        Numerology::custom(30e3, 2.3e-6, 120, 40, 3.5e9).unwrap()
    }

    #[test]
    fn processing_gain_small_grid() {
        let mut cfg = ProcessingGainConfig::new(num());
        cfg.trials = 40;
        cfg.target_bin = (2, 1);
        let g = run_processing_gain(&cfg).unwrap();
        assert!((g.measured_db - g.theoretical_db).abs() < 1.0, "{g:?}");
        cfg.target_bin = (500, 0);
        assert!(run_processing_gain(&cfg).is_err());
    }

    #[test]
    fn cfar_rate_small_grid() {
        let mut cfg = CfarConfig::new(num());
        cfg.trials = 300;
        cfg.pfa_total = 0.5;
        let c = run_cfar_calibration(&cfg).unwrap();
        assert!((c.frame_rate - 0.5).abs() < 0.1, "{c:?}");
    }

    #[test]
    fn interpolation_small_grid() {
        let mut cfg = InterpolationConfig::new(num());
        cfg.trials = 8;
        cfg.velocity_mps = (30.0, 60.0);
        let r = run_interpolation_check(&cfg).unwrap();
        assert!(r.interpolated_peak_db.abs() < 0.5, "{r:?}");
        assert!(r.zero_filled_peak_db < -0.5, "{r:?}");
        assert!(r.floor_rise_db > 3.0, "{r:?}");
    }
}
