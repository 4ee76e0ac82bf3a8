//! Time-domain self-interference rig: oversampled capture with PA
//! nonlinearity and a short coupling channel, followed by the RF and digital
//! cancellers and the radar chain.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::RadarChain;
use crate::canceller::{
    estimate_basis_correlation, ls_oracle, Basis, DigitalCanceller, MemoryPolynomial, RfCanceller, TrainingLog,
    UpdateMode,
};
use crate::radarproc::{ProcessingMode, RadarImage, Window};
use crate::scene::{synthesize_time, Capture, Clutter, PaModel, Scene, SiCoupling, SiTap, Target};
use crate::signal::{band_power, db, downsample, mean_power};
use crate::waveform::{generate_tx_grid, MaskPolicy, Numerology, OfdmModem, ResourceGrid, TimeFrame};
use crate::{Error, Result, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct RfSettings {
    pub delays_s: Vec<f64>,
    /// Normalized step; the per-block gradient step is
    /// `step / (block_len * P_pa * taps)`.
    pub step: f64,
    pub block_len: usize,
    pub iterations: usize,
}

impl Default for RfSettings {
    fn default() -> Self {
        Self {
            delays_s: RfCanceller::DEFAULT_DELAYS_S.to_vec(),
            step: 1.0,
            block_len: 1024,
            iterations: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DigitalSettings {
    pub order: usize,
    pub pre: usize,
    pub post: usize,
    pub step: f64,
    pub mode: UpdateMode,
    /// Adaptation block length; `None` uses the whole capture.
    pub block_len: Option<usize>,
    pub iterations: usize,
    /// Regularizer relative to the mean diagonal of the order-normalized
    /// basis correlation.
    pub epsilon_rel: f64,
}

impl Default for DigitalSettings {
    fn default() -> Self {
        Self {
            order: 11,
            pre: 5,
            post: 5,
            step: 1.0,
            mode: UpdateMode::BlockAveraged,
            block_len: None,
            iterations: 1,
            epsilon_rel: 1e-10,
        }
    }
}

impl DigitalSettings {
    pub fn model(&self) -> Result<MemoryPolynomial> {
        MemoryPolynomial::new(self.order, self.pre, self.post)
    }
}

/// Synthetic full-duplex front end.
#[derive(Clone, Debug, PartialEq)]
pub struct SiRig {
    pub numerology: Numerology,
    pub oversample: usize,
    /// SI level at the receiver input (after passive isolation), dB above
    /// the per-bin noise variance.
    pub si_to_noise_db: f64,
    /// Coupling taps; gains are relative and rescaled to `si_to_noise_db`.
    pub si_taps: Vec<SiTap>,
    /// Third-order PA distortion relative to the operating power (dBc);
    /// `None` for a linear PA.
    pub pa_dbc: Option<f64>,
    pub noise_variance: f64,
    pub window: Window,
    pub rf: RfSettings,
    pub digital: DigitalSettings,
}

impl SiRig {
    /// 14-symbol NR40 slot at 4x oversampling, SI 88 dB above the noise
    /// (+20 dBm transmit, 25 dB passive isolation, -93 dBm noise in 40 MHz);
    /// coupling taps at 0, 2 and 5 oversampled samples, the last one a weak
    /// reflection outside the RF canceller's span.
    pub fn new() -> Result<Self> {
        let numerology = Numerology::from_name("NR40")?.with_symbols(14)?;
        let mut rig = Self::for_numerology(numerology, 4)?;
        rig.rf.delays_s = RfCanceller::DEFAULT_DELAYS_S.to_vec();
        Ok(rig)
    }

    /// Same tap layout in oversampled samples for any numerology; RF taps at
    /// 0, 1 and 2 samples.
    pub fn for_numerology(numerology: Numerology, oversample: usize) -> Result<Self> {
        numerology.validate()?;
        if oversample == 0 {
            return Err(Error::param("oversample", "must be >= 1"));
        }
        let ts = 1.0 / (numerology.sample_rate_hz() * oversample as f64);
        Ok(Self {
            numerology,
            oversample,
            si_to_noise_db: 88.0,
            si_taps: vec![
                SiTap { delay_s: 0.0, gain: C64::new(1.0, 0.0) },
                SiTap { delay_s: 2.0 * ts, gain: C64::from_polar(0.3, 0.7) },
                SiTap { delay_s: 5.0 * ts, gain: C64::from_polar(0.2, 2.0) },
            ],
            pa_dbc: Some(-30.0),
            noise_variance: 1.0,
            window: Window::Hamming,
            rf: RfSettings {
                delays_s: vec![0.0, ts, 2.0 * ts],
                ..RfSettings::default()
            },
            digital: DigitalSettings::default(),
        })
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.numerology.sample_rate_hz() * self.oversample as f64
    }

    /// Taps that fall inside the RF canceller's delay span.
    pub fn in_span_taps(&self) -> Vec<SiTap> {
        let fs = self.sample_rate_hz();
        let span = self.rf.delays_s.iter().map(|d| (d * fs).round() as usize).max().unwrap_or(0);
        self.si_taps
            .iter()
            .filter(|t| (t.delay_s * fs).round() as usize <= span)
            .copied()
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.numerology.validate()?;
        if self.oversample == 0 {
            return Err(Error::param("oversample", "must be >= 1"));
        }
        if self.si_taps.is_empty() {
            return Err(Error::param("si_taps", "at least one tap is required"));
        }
        if self.noise_variance.is_nan() || self.noise_variance <= 0.0 {
            return Err(Error::param("noise_variance", "must be positive"));
        }
        if self.rf.block_len == 0 {
            return Err(Error::param("rf.block_len", "must be >= 1"));
        }
        if !(self.rf.step > 0.0 && self.rf.step.is_finite()) {
            return Err(Error::param("rf.step", "must be positive"));
        }
        self.digital.model()?;
        if !(self.digital.step > 0.0 && self.digital.step.is_finite()) {
            return Err(Error::param("digital.step", "must be positive"));
        }
        Ok(())
    }

    pub fn chain(&self) -> Result<RadarChain> {
        RadarChain::new(&self.numerology, self.window, ProcessingMode::Quotient)
    }

    /// One frame of fresh transmit data through the rig.
    pub fn capture(&self, targets: &[Target], clutter: Option<Clutter>, seed: u64) -> Result<RigCapture> {
        let grid = generate_tx_grid(&self.numerology, &MaskPolicy::Full, seed)?;
        let frame = OfdmModem::new(&self.numerology)?.modulate(&grid)?;
        let operating_power = mean_power(&frame.samples);
        let scene = Scene {
            targets: targets.to_vec(),
            clutter,
            noise_variance: self.noise_variance,
            si: Some(SiCoupling {
                taps: self.si_taps.clone(),
                si_to_noise_db: Some(self.si_to_noise_db),
                pa: self.pa_dbc.map(|dbc| PaModel::third_order(dbc, operating_power)),
            }),
        };
        let capture = synthesize_time(&frame, &scene, self.oversample, seed)?;
        let rms = mean_power(&capture.tx).sqrt();
        let tx_unit = capture.tx.iter().map(|v| v / rms).collect();
        Ok(RigCapture {
            grid,
            frame,
            capture,
            tx_unit,
        })
    }

    pub fn rf_canceller(&self, cap: &RigCapture) -> Result<RfCanceller> {
        let taps = self.rf.delays_s.len().max(1) as f64;
        let power = mean_power(&cap.capture.pa_out).max(f64::MIN_POSITIVE);
        let step = self.rf.step / (self.rf.block_len as f64 * power * taps);
        RfCanceller::new(&self.rf.delays_s, self.sample_rate_hz(), step)
    }

    /// Adapts a fresh RF canceller on the capture's receive stream.
    pub fn train_rf(&self, cap: &RigCapture) -> Result<(RfCanceller, TrainingLog)> {
        let mut rf = self.rf_canceller(cap)?;
        let log = rf.train(&cap.capture.rx(), &cap.capture.pa_out, self.rf.block_len, self.rf.iterations)?;
        Ok((rf, log))
    }

    /// Adapts a digital canceller with the given settings to remove
    /// `target` using the capture's transmit samples as reference.
    pub fn train_digital(&self, settings: &DigitalSettings, cap: &RigCapture, target: &[C64]) -> Result<DigitalFit> {
        let model = settings.model()?;
        let basis = Basis::normalized(model, &cap.tx_unit);
        let len = basis.len();
        let mut c = estimate_basis_correlation(&basis, 0..len, 0.0)?;
        let k = c.nrows();
        let mean_diag = (0..k).map(|i| c[(i, i)].re).sum::<f64>() / k as f64;
        let requested = settings.epsilon_rel * mean_diag;
        for i in 0..k {
            c[(i, i)].re += requested;
        }
        let mut canceller = DigitalCanceller::new(model, settings.step, settings.mode)?;
        let epsilon = requested + install_correlation(&mut canceller, c, mean_diag)?;
        let block = settings.block_len.unwrap_or(len).min(len);
        let log = canceller.train(&basis, target, block, settings.iterations)?;
        let normalized_coeffs = canceller.coeffs().to_vec();
        canceller.clear_correlation();
        canceller.set_coeffs(&basis.to_raw_coeffs(&normalized_coeffs))?;
        Ok(DigitalFit {
            canceller,
            log,
            epsilon,
            normalized_coeffs,
        })
    }

    pub fn digital_residual(&self, dc: &DigitalCanceller, cap: &RigCapture, input: &[C64]) -> Result<Vec<C64>> {
        dc.residual(&Basis::new(dc.model(), &cap.tx_unit), input)
    }

    /// Decimates an oversampled receive stream and runs the radar chain.
    pub fn radar_image(&self, chain: &RadarChain, cap: &RigCapture, samples: &[C64]) -> Result<RadarImage> {
        chain.image(&cap.grid, &self.receive_grid(cap, samples)?)
    }

    pub fn receive_grid(&self, cap: &RigCapture, samples: &[C64]) -> Result<ResourceGrid> {
        let frame = TimeFrame {
            samples: downsample(samples, self.oversample),
            ..cap.frame.clone()
        };
        let mut grid = OfdmModem::new(&self.numerology)?.demodulate(&frame)?;
        grid.mask = cap.grid.mask.clone();
        Ok(grid)
    }

    /// Power within the occupied band.
    pub fn passband_power(&self, x: &[C64]) -> f64 {
        let bw = self.numerology.active_subcarriers as f64 * self.numerology.subcarrier_spacing_hz;
        band_power(x, self.sample_rate_hz(), bw)
    }
}

/// Installs `C`, adding diagonal loading until it factors. Returns the
/// loading added.
fn install_correlation(dc: &mut DigitalCanceller, mut c: DMatrix<C64>, mean_diag: f64) -> Result<f64> {
    let k = c.nrows();
    let mut added = 0.0;
    let mut load = 1e-12 * mean_diag.max(f64::MIN_POSITIVE);
    for _ in 0..10 {
        match dc.set_correlation(&c) {
            Ok(()) => return Ok(added),
            Err(Error::Singular) => {
                for i in 0..k {
                    c[(i, i)].re += load;
                }
                added += load;
                load *= 100.0;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Singular)
}

/// Trained digital canceller with its log and the regularizer `ε` that was
/// added to the basis correlation. Training runs on order-normalized basis
/// functions; `canceller` holds the equivalent coefficients for the raw
/// basis so it applies unchanged to later frames.
#[derive(Clone, Debug)]
pub struct DigitalFit {
    pub canceller: DigitalCanceller,
    pub log: TrainingLog,
    pub epsilon: f64,
    pub normalized_coeffs: Vec<C64>,
}

/// Oversampled capture plus the transmit grid and frame it came from.
#[derive(Clone, Debug)]
pub struct RigCapture {
    pub grid: ResourceGrid,
    pub frame: TimeFrame,
    pub capture: Capture,
    /// Digital transmit samples scaled to unit RMS (digital canceller input).
    pub tx_unit: Vec<C64>,
}

/// Results of the canceller checks on one rig.
#[derive(Clone, Debug, PartialEq)]
pub struct CancellerSuite {
    /// SI suppression of the RF canceller on the in-span taps only, within
    /// the occupied band (dB).
    pub rf_suppression_db: f64,
    pub rf_log: TrainingLog,
    /// Cascade (RF then digital) residual over the noise, occupied band (dB).
    pub nonlinear_residual_db: f64,
    pub linear_residual_db: f64,
    /// RF-only residual over the noise (dB).
    pub rf_residual_db: f64,
    /// Relative coefficient distance between the adapted nonlinear canceller
    /// and the least-squares fit on the same data.
    pub adaptive_vs_ls: f64,
    pub digital_log: TrainingLog,
    /// Trained cancellers of the full rig.
    pub rf: RfCanceller,
    pub digital: DigitalCanceller,
}

/// (a) RF convergence on the in-span part of the coupling channel,
/// (b) cascade residual with nonlinear and linear digital cancellers,
/// (d) adapted vs least-squares coefficients.
pub fn run_canceller_suite(rig: &SiRig, seed: u64) -> Result<CancellerSuite> {
    rig.validate()?;
    let in_span = SiRig {
        si_taps: rig.in_span_taps(),
        ..rig.clone()
    };
    let cap = in_span.capture(&[], None, seed)?;
    let (rf, rf_log) = in_span.train_rf(&cap)?;
    let si = &cap.capture.si;
    let left = rf.cancel(si, &cap.capture.pa_out)?;
    let rf_suppression_db = db(in_span.passband_power(si) / in_span.passband_power(&left));

    let cap = rig.capture(&[], None, seed.wrapping_add(1))?;
    let (rf, _) = rig.train_rf(&cap)?;
    let after_rf = rf.cancel(&cap.capture.rx(), &cap.capture.pa_out)?;
    let noise = rig.passband_power(&cap.capture.noise);
    let over_noise = |x: &[C64]| db(rig.passband_power(x) / noise);

    let fit = rig.train_digital(&rig.digital, &cap, &after_rf)?;
    let nonlinear = rig.digital_residual(&fit.canceller, &cap, &after_rf)?;
    let linear_settings = DigitalSettings {
        order: 1,
        ..rig.digital.clone()
    };
    let linear_fit = rig.train_digital(&linear_settings, &cap, &after_rf)?;
    let linear = rig.digital_residual(&linear_fit.canceller, &cap, &after_rf)?;

    let basis = Basis::normalized(fit.canceller.model(), &cap.tx_unit);
    let h_ls = ls_oracle(&basis, &after_rf, 0..basis.len(), fit.epsilon)?;
    let diff: f64 = fit.normalized_coeffs.iter().zip(&h_ls).map(|(a, b)| (a - b).norm_sqr()).sum();
    let norm: f64 = h_ls.iter().map(|v| v.norm_sqr()).sum();

    Ok(CancellerSuite {
        rf_suppression_db,
        rf_log,
        nonlinear_residual_db: over_noise(&nonlinear),
        linear_residual_db: over_noise(&linear),
        rf_residual_db: over_noise(&after_rf),
        adaptive_vs_ls: (diff / norm).sqrt(),
        digital_log: fit.log,
        rf,
        digital: fit.canceller,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EchoPreservation {
    /// Target peak after cancellation over the peak without any SI.
    pub retained_fraction: f64,
    pub delay_samples: usize,
    pub peak_reference: f64,
    pub peak_cancelled: f64,
}

/// Trains both cancellers on an SI-only frame, then processes a new frame
/// containing a target echo and compares its periodogram peak (3x3 block
/// around the true pixel) with the same frame processed without SI.
pub fn run_echo_preservation(rig: &SiRig, distance_m: f64, snr_db: f64, seed: u64) -> Result<EchoPreservation> {
    rig.validate()?;
    let training = rig.capture(&[], None, seed)?;
    let (rf, _) = rig.train_rf(&training)?;
    let after_rf = rf.cancel(&training.capture.rx(), &training.capture.pa_out)?;
    let dc = rig.train_digital(&rig.digital, &training, &after_rf)?.canceller;

    let gain = crate::scene::gain_for_snr(snr_db, rig.noise_variance, 0.25 * PI);
    let target = Target::at_range(gain, distance_m, 0.0, rig.numerology.carrier_freq_hz);
    let cap = rig.capture(&[target], None, seed.wrapping_add(1))?;
    let cancelled = rf.cancel(&cap.capture.rx(), &cap.capture.pa_out)?;
    let cancelled = rig.digital_residual(&dc, &cap, &cancelled)?;
    let reference: Vec<C64> = cap.capture.echoes.iter().zip(&cap.capture.noise).map(|(a, b)| a + b).collect();

    let chain = rig.chain()?;
    let res = chain.periodogram.resolutions();
    let s = (distance_m / res.distance_per_bin_m).round() as usize;
    if !chain.space().contains(s as isize, 0) {
        return Err(Error::param("distance_m", "target outside the search space"));
    }
    let peak = |x: &[C64]| -> Result<f64> {
        let img = rig.radar_image(&chain, &cap, x)?;
        Ok(img.max_in_block(s, 0, 1).unwrap_or(0.0))
    };
    let peak_reference = peak(&reference)?;
    let peak_cancelled = peak(&cancelled)?;
    Ok(EchoPreservation {
        retained_fraction: peak_cancelled / peak_reference,
        delay_samples: (target.delay_s * rig.sample_rate_hz()).round() as usize,
        peak_reference,
        peak_cancelled,
    })
}
