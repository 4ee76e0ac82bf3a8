//! Monte-Carlo harnesses.
//!
//! Every trial derives all of its randomness from `seed + trial_index`, so
//! trials may run in parallel and results are reduced in trial order. The
//! same trial seed is reused at every SNR point of a sweep (common random
//! numbers), which keeps sweep curves smooth.

mod calibration;
mod isolation;
mod masking;
mod pd_rmse;
mod rig;
mod roc;

pub use calibration::{
    run_cfar_calibration, run_interpolation_check, run_processing_gain, CfarCalibration, CfarConfig,
    InterpolationCheck, InterpolationConfig, ProcessingGain, ProcessingGainConfig,
};
pub use isolation::{run_isolation_sweep, IsolationConfig, IsolationPoint};
pub use masking::{run_si_masking, MaskingConfig, MaskingImage, MaskingResult, TargetMetrics};
pub use pd_rmse::{run_pd_rmse_sweep, CurvePoint, PdRmseConfig};
pub use rig::{
    run_canceller_suite, run_echo_preservation, CancellerSuite, DigitalFit, DigitalSettings, EchoPreservation, RfSettings,
    RigCapture, SiRig,
};
pub use roc::{run_roc, roc_curve, RocConfig, RocPoint, RocResult};

use crate::radarproc::{
    interpolate_grid, process_grids, Periodogram, ProcessedGrid, ProcessingMode, RadarImage, SearchSpace, Window,
};
use crate::waveform::{Numerology, ResourceGrid};
use crate::{Error, Result, C64};

/// Per-trial seed.
pub fn trial_seed(base: u64, trial: usize) -> u64 {
    base.wrapping_add(trial as u64)
}

/// Quotient or matched-filter processing, optional interpolation over
/// unused bins, and a planned periodogram, shared across trials.
pub struct RadarChain {
    pub periodogram: Periodogram,
    pub mode: ProcessingMode,
    pub interpolate: bool,
}

impl RadarChain {
    /// `S' = S`, `R' = R` and the default search space.
    pub fn new(numerology: &Numerology, window: Window, mode: ProcessingMode) -> Result<Self> {
        Ok(Self {
            periodogram: Periodogram::with_defaults(numerology, window)?,
            mode,
            interpolate: true,
        })
    }

    pub fn with_transform(
        numerology: &Numerology,
        window: Window,
        mode: ProcessingMode,
        range_size: usize,
        doppler_size: usize,
    ) -> Result<Self> {
        let space = SearchSpace::for_numerology(numerology, range_size, doppler_size);
        Ok(Self {
            periodogram: Periodogram::new(numerology, window, range_size, doppler_size, space)?,
            mode,
            interpolate: true,
        })
    }

    pub fn space(&self) -> SearchSpace {
        self.periodogram.space()
    }

    pub fn processed(&self, tx: &ResourceGrid, rx: &ResourceGrid) -> Result<ProcessedGrid> {
        let g = process_grids(tx, rx, self.mode)?;
        if self.interpolate && !g.mask.is_full() {
            interpolate_grid(&g)
        } else {
            Ok(g)
        }
    }

    pub fn field(&self, tx: &ResourceGrid, rx: &ResourceGrid) -> Result<Vec<C64>> {
        self.periodogram.compute_field(&self.processed(tx, rx)?)
    }

    pub fn image(&self, tx: &ResourceGrid, rx: &ResourceGrid) -> Result<RadarImage> {
        Ok(self.periodogram.image_from_field(&self.field(tx, rx)?))
    }

    /// CFAR threshold for receive noise of per-bin variance `noise_variance`.
    /// The quotient divides by `|X|² = 1` for QPSK, so the variance carries
    /// over unchanged.
    pub fn threshold(&self, noise_variance: f64, pfa_total: f64) -> Result<f64> {
        self.periodogram.threshold(noise_variance, pfa_total)
    }
}

/// `scale * a + b`, element-wise.
pub(crate) fn combine(a: &[C64], scale: f64, b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x * scale + y).collect()
}

pub(crate) fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    Ok(())
}

pub(crate) fn check_pfa(pfa: f64) -> Result<()> {
    if pfa > 0.0 && pfa < 1.0 {
        Ok(())
    } else {
        Err(Error::param("pfa_total", format!("{pfa} not in (0, 1)")))
    }
}

/// Median of a slice (NaN-free input).
pub(crate) fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}
