//! Detection of a weak static target next to static clutter, with and
//! without the digital canceller behind the RF canceller.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::{check_trials, trial_seed, SiRig};
use crate::scene::{gain_for_snr, Clutter, Target};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RocConfig {
    pub rig: SiRig,
    /// Frames per hypothesis.
    pub trials: usize,
    pub seed: u64,
    pub target_distance_m: f64,
    pub target_snr_db: f64,
    /// Static clutter: strongest path at this distance.
    pub clutter_distance_m: f64,
    pub clutter_snr_db: f64,
    pub clutter: Clutter,
}

impl RocConfig {
    pub fn new() -> Result<Self> {
        Ok(Self {
            rig: SiRig::new()?,
            trials: 100,
            seed: 0,
            target_distance_m: 45.0,
            target_snr_db: -15.0,
            clutter_distance_m: 30.0,
            clutter_snr_db: -20.0,
            clutter: Clutter {
                power_rel_db: -10.0,
                rms_delay_spread_s: 100e-9,
                num_paths: 6,
                anchor: None,
            },
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub pfa: f64,
    pub pd: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocResult {
    /// Target pixel `(s, 0)`.
    pub target_bin: usize,
    pub rf_only_h0: Vec<f64>,
    pub rf_only_h1: Vec<f64>,
    pub cascade_h0: Vec<f64>,
    pub cascade_h1: Vec<f64>,
    pub rf_only: Vec<RocPoint>,
    pub cascade: Vec<RocPoint>,
}

impl RocResult {
    /// Best detection probability at false-alarm rate not above `pfa`.
    pub fn pd_at(curve: &[RocPoint], pfa: f64) -> f64 {
        curve.iter().filter(|p| p.pfa <= pfa).map(|p| p.pd).fold(0.0, f64::max)
    }
}

/// Empirical ROC from statistics under both hypotheses; a detection is
/// `statistic >= threshold`. Starts at `(0, 0)` and ends at `(1, 1)`.
pub fn roc_curve(h0: &[f64], h1: &[f64]) -> Vec<RocPoint> {
    let mut thresholds: Vec<f64> = h0.iter().chain(h1).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let rate = |set: &[f64], t: f64| {
        if set.is_empty() {
            0.0
        } else {
            set.iter().filter(|&&v| v >= t).count() as f64 / set.len() as f64
        }
    };
    let mut curve = vec![RocPoint {
        threshold: f64::INFINITY,
        pfa: 0.0,
        pd: 0.0,
    }];
    curve.extend(thresholds.into_iter().map(|t| RocPoint {
        threshold: t,
        pfa: rate(h0, t),
        pd: rate(h1, t),
    }));
    curve
}

/// Trains both cancellers once on an SI-only frame, then processes fresh
/// frames under H0 (SI + clutter) and H1 (plus target). The statistic is
/// the maximum over the 3x3 block around the target pixel.
pub fn run_roc(cfg: &RocConfig) -> Result<RocResult> {
    check_trials(cfg.trials)?;
    let rig = &cfg.rig;
    rig.validate()?;
    let chain = rig.chain()?;
    let res = chain.periodogram.resolutions();
    let s = (cfg.target_distance_m / res.distance_per_bin_m).round() as isize;
    let space = chain.space();
    if !(space.contains(s - 1, -1) && space.contains(s + 1, 1)) {
        return Err(Error::param("target_distance_m", "3x3 block leaves the search space"));
    }
    let s = s as usize;

    let training = rig.capture(&[], None, cfg.seed)?;
    let (rf, _) = rig.train_rf(&training)?;
    let after_rf = rf.cancel(&training.capture.rx(), &training.capture.pa_out)?;
    let dc = rig.train_digital(&rig.digital, &training, &after_rf)?.canceller;

    let carrier = rig.numerology.carrier_freq_hz;
    let clutter = Clutter {
        anchor: Some(Target::at_range(
            gain_for_snr(cfg.clutter_snr_db, rig.noise_variance, 0.3 * PI),
            cfg.clutter_distance_m,
            0.0,
            carrier,
        )),
        ..cfg.clutter.clone()
    };
    let target = Target::at_range(
        gain_for_snr(cfg.target_snr_db, rig.noise_variance, 1.1 * PI),
        cfg.target_distance_m,
        0.0,
        carrier,
    );

    let stats: Vec<[f64; 2]> = (0..2 * cfg.trials)
        .into_par_iter()
        .map(|i| {
            let targets: &[Target] = if i < cfg.trials { &[] } else { std::slice::from_ref(&target) };
            let cap = rig.capture(targets, Some(clutter.clone()), trial_seed(cfg.seed, i + 1))?;
            let rf_out = rf.cancel(&cap.capture.rx(), &cap.capture.pa_out)?;
            let cascade = rig.digital_residual(&dc, &cap, &rf_out)?;
            let stat = |x: &[_]| -> Result<f64> {
                let img = rig.radar_image(&chain, &cap, x)?;
                Ok(img.max_in_block(s, 0, 1).unwrap_or(0.0))
            };
            Ok([stat(&rf_out)?, stat(&cascade)?])
        })
        .collect::<Result<_>>()?;

    let (h0, h1) = stats.split_at(cfg.trials);
    let col = |set: &[[f64; 2]], k: usize| set.iter().map(|v| v[k]).collect::<Vec<_>>();
    let (rf_only_h0, rf_only_h1) = (col(h0, 0), col(h1, 0));
    let (cascade_h0, cascade_h1) = (col(h0, 1), col(h1, 1));
    Ok(RocResult {
        target_bin: s,
        rf_only: roc_curve(&rf_only_h0, &rf_only_h1),
        cascade: roc_curve(&cascade_h0, &cascade_h1),
        rf_only_h0,
        rf_only_h1,
        cascade_h0,
        cascade_h1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_statistics_give_a_perfect_curve() {
        let c = roc_curve(&[1.0, 2.0], &[3.0, 4.0]);
        assert_eq!(c.first().map(|p| (p.pfa, p.pd)), Some((0.0, 0.0)));
        assert_eq!(c.last().map(|p| (p.pfa, p.pd)), Some((1.0, 1.0)));
        assert_eq!(RocResult::pd_at(&c, 0.0), 1.0);
    }

    #[test]
    fn identical_statistics_lie_on_the_diagonal() {
        let v = [1.0, 2.0, 3.0, 4.0];
        for p in roc_curve(&v, &v) {
            assert_eq!(p.pfa, p.pd);
        }
    }

    #[test]
    fn curve_is_monotone() {
        let c = roc_curve(&[0.3, 0.1, 0.7, 0.2], &[0.5, 0.9, 0.4, 0.8]);
        assert!(c.windows(2).all(|w| w[1].pfa >= w[0].pfa && w[1].pd >= w[0].pd));
    }

    #[test]
    fn block_outside_space_is_rejected() {
        let mut cfg = RocConfig::new().unwrap();
        cfg.target_distance_m = 0.0;
        assert!(run_roc(&cfg).is_err());
    }
}
