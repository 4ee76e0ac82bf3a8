//! Residual self-interference masking of weak, slow targets.

use std::f64::consts::PI;

use super::{check_pfa, median, RadarChain};
use crate::radarproc::{ProcessingMode, RadarImage, Window};
use crate::scene::{apply_scene_grid, gain_for_snr, Scene, SiCoupling, Target};
use crate::signal::db;
use crate::waveform::{generate_tx_grid, MaskPolicy, Numerology};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct MaskingConfig {
    pub numerology: Numerology,
    /// `(distance m, velocity m/s)` per target.
    pub targets: Vec<(f64, f64)>,
    pub target_snr_db: f64,
    /// Residual SI levels above the noise variance (dB).
    pub si_levels_db: Vec<f64>,
    pub si_delay_s: f64,
    pub window: Window,
    pub pfa_total: f64,
    pub noise_variance: f64,
    pub seed: u64,
    /// Range cells skipped on each side of the cell under test.
    pub guard_cells: usize,
    /// Range cells averaged on each side beyond the guard.
    pub training_cells: usize,
}

impl MaskingConfig {
    /// NR40 over 280 symbols, three targets at 0 dB input SNR.
    pub fn new() -> Result<Self> {
        Ok(Self {
            numerology: Numerology::from_name("NR40")?.with_symbols(280)?,
            targets: vec![(60.0, 0.0), (90.0, 12.0), (120.0, -2.0)],
            target_snr_db: 0.0,
            si_levels_db: vec![70.0, 50.0, 30.0],
            si_delay_s: 1e-9,
            window: Window::Rectangular,
            pfa_total: 0.1,
            noise_variance: 1.0,
            seed: 0,
            guard_cells: 3,
            training_cells: 16,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.numerology.validate()?;
        check_pfa(self.pfa_total)?;
        if self.targets.is_empty() {
            return Err(Error::param("targets", "at least one target is required"));
        }
        if self.training_cells == 0 {
            return Err(Error::param("training_cells", "must be >= 1"));
        }
        if !(self.si_delay_s >= 0.0 && self.si_delay_s.is_finite()) {
            return Err(Error::param("si_delay_s", "must be >= 0"));
        }
        if self.noise_variance.is_nan() || self.noise_variance <= 0.0 {
            return Err(Error::param("noise_variance", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetMetrics {
    pub distance_m: f64,
    pub velocity_mps: f64,
    /// Pixel nearest to the true position.
    pub s: usize,
    pub r: isize,
    /// Maximum over the 3x3 block around `(s, r)`.
    pub peak: f64,
    /// Median of the training cells in the peak's Doppler column.
    pub background: f64,
    pub peak_to_background_db: f64,
    /// Global threshold raised by the background-to-noise ratio.
    pub local_threshold: f64,
    pub detected: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskingImage {
    /// `None` for the SI-free reference.
    pub si_db: Option<f64>,
    pub image: RadarImage,
    pub targets: Vec<TargetMetrics>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskingResult {
    pub threshold: f64,
    pub noise_mean: f64,
    pub reference: MaskingImage,
    pub images: Vec<MaskingImage>,
}

/// Same data, targets and noise at every SI level; only the SI changes.
pub fn run_si_masking(cfg: &MaskingConfig) -> Result<MaskingResult> {
    cfg.validate()?;
    let num = &cfg.numerology;
    let chain = RadarChain::new(num, cfg.window, ProcessingMode::Quotient)?;
    let threshold = chain.threshold(cfg.noise_variance, cfg.pfa_total)?;
    let noise_mean = chain.periodogram.noise_mean(cfg.noise_variance);
    let res = chain.periodogram.resolutions();
    let space = chain.space();

    let pixels = cfg
        .targets
        .iter()
        .map(|&(d, v)| {
            let s = (d / res.distance_per_bin_m).round();
            let r = (v / res.velocity_per_bin_mps).round() as isize;
            if s < 0.0 || !space.contains(s as isize, r) {
                return Err(Error::param("targets", format!("({d} m, {v} m/s) outside the search space")));
            }
            Ok((s as usize, r))
        })
        .collect::<Result<Vec<_>>>()?;

    let tx = generate_tx_grid(num, &MaskPolicy::Full, cfg.seed)?;
    let targets: Vec<Target> = cfg
        .targets
        .iter()
        .enumerate()
        .map(|(i, &(d, v))| {
            let phase = 2.0 * PI * (i as f64 * 0.618_033_988_75).fract();
            Target::at_range(gain_for_snr(cfg.target_snr_db, cfg.noise_variance, phase), d, v, num.carrier_freq_hz)
        })
        .collect();

    let base = Scene {
        targets,
        noise_variance: cfg.noise_variance,
        ..Default::default()
    };
    let evaluate = |si_db: Option<f64>| -> Result<MaskingImage> {
        let scene = Scene {
            si: si_db.map(|l| SiCoupling::single(cfg.si_delay_s, l)),
            ..base.clone()
        };
        let image = chain.image(&tx, &apply_scene_grid(&tx, &scene, cfg.seed)?)?;
        let targets = cfg
            .targets
            .iter()
            .zip(&pixels)
            .map(|(&(d, v), &(s, r))| {
                let (ps, pr, peak) = block_peak(&image, s, r);
                let background = column_background(&image, ps, pr, cfg.guard_cells, cfg.training_cells);
                let local_threshold = threshold * (background / noise_mean).max(1.0);
                TargetMetrics {
                    distance_m: d,
                    velocity_mps: v,
                    s,
                    r,
                    peak,
                    background,
                    peak_to_background_db: db(peak / background),
                    local_threshold,
                    detected: peak > local_threshold,
                }
            })
            .collect();
        Ok(MaskingImage { si_db, image, targets })
    };

    Ok(MaskingResult {
        threshold,
        noise_mean,
        reference: evaluate(None)?,
        images: cfg.si_levels_db.iter().map(|&l| evaluate(Some(l))).collect::<Result<_>>()?,
    })
}

/// Strongest pixel in the 3x3 block around `(s, r)`.
fn block_peak(img: &RadarImage, s: usize, r: isize) -> (usize, isize, f64) {
    let mut best = (s, r, f64::NEG_INFINITY);
    for ds in -1..=1isize {
        for dr in -1..=1isize {
            let (ss, rr) = (s as isize + ds, r + dr);
            if let Some(v) = img.try_get(ss, rr) {
                if v > best.2 {
                    best = (ss as usize, rr, v);
                }
            }
        }
    }
    best
}

/// Median of the range cells `guard < |s' - s| <= guard + training` in
/// Doppler column `r`.
fn column_background(img: &RadarImage, s: usize, r: isize, guard: usize, training: usize) -> f64 {
    let mut cells: Vec<f64> = (guard + 1..=guard + training)
        .flat_map(|k| [s.checked_sub(k), Some(s + k)])
        .flatten()
        .filter_map(|ss| img.try_get(ss as isize, r))
        .collect();
    median(&mut cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> MaskingConfig {
        let mut cfg = MaskingConfig::new().unwrap();
        cfg.numerology = Numerology::from_name("NR40").unwrap().with_symbols(64).unwrap();
        cfg.targets = vec![(60.0, 0.0), (90.0, 40.0)];
        cfg
    }

    #[test]
    fn masking_ordering_on_short_frame() {
        let out = run_si_masking(&small()).unwrap();
        assert_eq!(out.images.len(), 3);
        assert!(out.reference.targets.iter().all(|t| t.detected));
        let static_pbr: Vec<f64> = out.images.iter().map(|m| m.targets[0].peak_to_background_db).collect();
        assert!(static_pbr.windows(2).all(|w| w[0] < w[1]), "{static_pbr:?}");
        assert!(!out.images[0].targets[0].detected);
        // moving target sits outside the zero-Doppler column
        assert!(out.images.iter().all(|m| m.targets[1].detected));
    }

    #[test]
    fn zero_level_matches_reference_closely() {
        let mut cfg = small();
        cfg.si_levels_db = vec![-300.0];
        let out = run_si_masking(&cfg).unwrap();
        let scale = out.reference.image.values.iter().cloned().fold(0.0, f64::max);
        for (a, b) in out.images[0].image.values.iter().zip(&out.reference.image.values) {
            assert!((a - b).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn target_outside_space_is_rejected() {
        let mut cfg = small();
        cfg.targets = vec![(5000.0, 0.0)];
        assert!(run_si_masking(&cfg).is_err());
    }
}
