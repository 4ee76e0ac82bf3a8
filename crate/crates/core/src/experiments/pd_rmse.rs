use rand::Rng;
use rayon::prelude::*;

use super::{check_pfa, check_trials, combine, trial_seed, RadarChain};
use crate::radarproc::{detect_and_estimate, ProcessingMode, Window};
use crate::rng::{self, Stream};
use crate::scene::{apply_scene_grid, random_phase, Clutter, Scene, Target};
use crate::signal::from_db;
use crate::waveform::{generate_tx_grid, MaskPolicy, Numerology};
use crate::{Error, Result, C64};

/// Single-target detection and estimation sweep over input SNR.
#[derive(Clone, Debug, PartialEq)]
pub struct PdRmseConfig {
    pub numerology: Numerology,
    pub mask: MaskPolicy,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub window: Window,
    pub pfa_total: f64,
    /// Uniform target distance range (m).
    pub distance_m: (f64, f64),
    /// Uniform target velocity range (m/s).
    pub velocity_mps: (f64, f64),
    pub clutter: Option<Clutter>,
    pub noise_variance: f64,
}

impl PdRmseConfig {
    pub fn new(numerology: Numerology) -> Self {
        Self {
            numerology,
            mask: MaskPolicy::UniformRandom { density: 0.9 },
            snr_db: (0..8).map(|i| -45.0 + 5.0 * i as f64).collect(),
            trials: 500,
            seed: 0,
            window: Window::Rectangular,
            pfa_total: 0.1,
            distance_m: (20.0, 200.0),
            velocity_mps: (-40.0, 40.0),
            clutter: Some(Clutter::default()),
            noise_variance: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.numerology.validate()?;
        check_trials(self.trials)?;
        check_pfa(self.pfa_total)?;
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::param("snr_db", "need at least one finite SNR value"));
        }
        let (d0, d1) = self.distance_m;
        if !(d0 >= 0.0 && d1 >= d0 && d1.is_finite()) {
            return Err(Error::param("distance_m", format!("bad range {d0}..{d1}")));
        }
        let (v0, v1) = self.velocity_mps;
        if !(v1 >= v0 && v0.is_finite() && v1.is_finite()) {
            return Err(Error::param("velocity_mps", format!("bad range {v0}..{v1}")));
        }
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::param("noise_variance", "must be positive"));
        }
        Ok(())
    }
}

/// One SNR point of the sweep. RMSE values are taken over successful
/// detections only and are NaN when there are none.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub snr_db: f64,
    pub detection_probability: f64,
    pub distance_rmse_m: f64,
    pub velocity_rmse_mps: f64,
    pub trials_detected: usize,
    pub trials: usize,
}

/// Distance and velocity errors of a successful detection.
type TrialOutcome = Option<(f64, f64)>;

/// Runs `trials` random single-target scenes per SNR point. A trial counts
/// as detected when the thresholded global peak lies within one pixel of the
/// target's true pixel in both axes.
pub fn run_pd_rmse_sweep(cfg: &PdRmseConfig) -> Result<Vec<CurvePoint>> {
    cfg.validate()?;
    let num = &cfg.numerology;
    let chain = RadarChain::new(num, cfg.window, ProcessingMode::Quotient)?;
    let threshold = chain.threshold(cfg.noise_variance, cfg.pfa_total)?;
    let scales: Vec<f64> = cfg.snr_db.iter().map(|s| from_db(*s).sqrt()).collect();

    let outcomes: Vec<Vec<TrialOutcome>> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, &chain, threshold, &scales, trial_seed(cfg.seed, i)))
        .collect::<Result<_>>()?;

    Ok(cfg
        .snr_db
        .iter()
        .enumerate()
        .map(|(j, &snr_db)| {
            let hits: Vec<(f64, f64)> = outcomes.iter().filter_map(|o| o[j]).collect();
            let rmse = |f: fn(&(f64, f64)) -> f64| {
                if hits.is_empty() {
                    f64::NAN
                } else {
                    (hits.iter().map(|h| f(h).powi(2)).sum::<f64>() / hits.len() as f64).sqrt()
                }
            };
            CurvePoint {
                snr_db,
                detection_probability: hits.len() as f64 / cfg.trials as f64,
                distance_rmse_m: rmse(|h| h.0),
                velocity_rmse_mps: rmse(|h| h.1),
                trials_detected: hits.len(),
                trials: cfg.trials,
            }
        })
        .collect())
}

fn run_trial(cfg: &PdRmseConfig, chain: &RadarChain, threshold: f64, scales: &[f64], seed: u64) -> Result<Vec<TrialOutcome>> {
    let num = &cfg.numerology;
    let mut rng = rng::stream(seed, Stream::Trial);
    let distance = rng.random_range(cfg.distance_m.0..=cfg.distance_m.1);
    let velocity = rng.random_range(cfg.velocity_mps.0..=cfg.velocity_mps.1);
    let phase = random_phase(&mut rng);

    let tx = generate_tx_grid(num, &cfg.mask, seed)?;
    // Signal at 0 dB input SNR and noise are processed separately; every
    // processing step up to the squared magnitude is linear, so each SNR
    // point is a scaled sum of the two fields.
    let gain = C64::from_polar(cfg.noise_variance.sqrt(), phase);
    let signal_scene = Scene {
        targets: vec![Target::at_range(gain, distance, velocity, num.carrier_freq_hz)],
        clutter: cfg.clutter.clone(),
        noise_variance: 0.0,
        si: None,
    };
    let noise_scene = Scene {
        noise_variance: cfg.noise_variance,
        ..Default::default()
    };
    let f_sig = chain.field(&tx, &apply_scene_grid(&tx, &signal_scene, seed)?)?;
    let f_noise = chain.field(&tx, &apply_scene_grid(&tx, &noise_scene, seed)?)?;

    let pg = &chain.periodogram;
    let res = pg.resolutions();
    let true_s = (distance / res.distance_per_bin_m).round();
    let true_r = (velocity / res.velocity_per_bin_mps).round();
    Ok(scales
        .iter()
        .map(|&scale| {
            let img = pg.image_from_field(&combine(&f_sig, scale, &f_noise));
            detect_and_estimate(&img, threshold).and_then(|det| {
                let hit = (det.s as f64 - true_s).abs() <= 1.0 && (det.r as f64 - true_r).abs() <= 1.0;
                hit.then_some((det.distance_m - distance, det.velocity_mps - velocity))
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> PdRmseConfig {
        let num = Numerology::custom(30e3, 2.3e-6, 96, 32, 3.5e9).unwrap();
        let mut cfg = PdRmseConfig::new(num);
        cfg.trials = 20;
        cfg.snr_db = vec![-30.0, 10.0];
        cfg.distance_m = (20.0, 200.0);
        cfg.velocity_mps = (-40.0, 40.0);
        cfg
    }

    #[test]
    fn extremes_of_snr() {
        let pts = run_pd_rmse_sweep(&small()).unwrap();
        assert_eq!(pts.len(), 2);
        assert!(pts[0].detection_probability < 0.5);
        assert_eq!(pts[1].detection_probability, 1.0);
        assert!(pts[1].distance_rmse_m.is_finite());
    }

    #[test]
    fn empty_detection_set_reports_nan() {
        let mut cfg = small();
        cfg.snr_db = vec![-80.0];
        let pts = run_pd_rmse_sweep(&cfg).unwrap();
        assert_eq!(pts[0].trials_detected, 0);
        assert!(pts[0].distance_rmse_m.is_nan() && pts[0].velocity_rmse_mps.is_nan());
    }

    #[test]
    fn deterministic_and_validated() {
        let cfg = small();
        let a = format!("{:?}", run_pd_rmse_sweep(&cfg).unwrap());
        assert_eq!(a, format!("{:?}", run_pd_rmse_sweep(&cfg).unwrap()));
        let mut bad = cfg.clone();
        bad.trials = 0;
        assert!(run_pd_rmse_sweep(&bad).is_err());
        bad = cfg;
        bad.snr_db.clear();
        assert!(run_pd_rmse_sweep(&bad).is_err());
    }
}
