//! Received-signal synthesis: point targets, multipath clutter, thermal noise
//! and the direct self-interference (SI) coupling path.
//!
//! Two routes are provided. [`apply_scene_grid`] evaluates the subcarrier
//! model directly on the resource grid, one phase rotation per OFDM symbol
//! for Doppler. [`synthesize_time`] works on oversampled time-domain samples
//! and also carries the PA nonlinearity; it is what the cancellers consume.
//!
//! Delays in the grid route use the physical baseband frequency of each
//! active row (see [`Numerology::subcarrier_bin`]), which keeps the two routes
//! consistent sample for sample. Delays in the time route are circular, as
//! for a continuously repeated frame; any delay shorter than the cyclic
//! prefix is therefore absorbed exactly.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::rng::{self, Stream};
use crate::signal::{self, complex_gaussian};
use crate::waveform::{Numerology, ResourceGrid, TimeFrame};
use crate::{Error, Result, C64, SPEED_OF_LIGHT};

/// Point reflector: complex gain `b`, round-trip delay and Doppler shift.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Target {
    pub gain: C64,
    pub delay_s: f64,
    pub doppler_hz: f64,
}

impl Target {
    pub fn new(gain: C64, delay_s: f64, doppler_hz: f64) -> Self {
        Self {
            gain,
            delay_s,
            doppler_hz,
        }
    }

    /// `τ = 2d/c`, `f_D = 2 v f_c / c`. Positive velocity means closing.
    pub fn at_range(gain: C64, distance_m: f64, velocity_mps: f64, carrier_hz: f64) -> Self {
        Self {
            gain,
            delay_s: 2.0 * distance_m / SPEED_OF_LIGHT,
            doppler_hz: 2.0 * velocity_mps * carrier_hz / SPEED_OF_LIGHT,
        }
    }

    pub fn distance_m(&self) -> f64 {
        self.delay_s * SPEED_OF_LIGHT / 2.0
    }

    pub fn velocity_mps(&self, carrier_hz: f64) -> f64 {
        self.doppler_hz * SPEED_OF_LIGHT / (2.0 * carrier_hz)
    }

    fn validate(&self) -> Result<()> {
        if !(self.delay_s.is_finite() && self.delay_s >= 0.0) {
            return Err(Error::param("delay_s", format!("{} must be >= 0", self.delay_s)));
        }
        if !(self.gain.re.is_finite() && self.gain.im.is_finite() && self.doppler_hz.is_finite()) {
            return Err(Error::param("gain", "must be finite"));
        }
        Ok(())
    }
}

/// Diffuse multipath around an anchor reflector: `num_paths` paths with
/// exponentially distributed excess delays and complex Gaussian gains whose
/// total power is `power_rel_db` relative to the anchor.
#[derive(Clone, Debug, PartialEq)]
pub struct Clutter {
    pub power_rel_db: f64,
    pub rms_delay_spread_s: f64,
    pub num_paths: usize,
    /// Reflector the clutter is attached to; the first target when `None`.
    pub anchor: Option<Target>,
}

impl Clutter {
    pub fn new(power_rel_db: f64, rms_delay_spread_s: f64, num_paths: usize) -> Self {
        Self {
            power_rel_db,
            rms_delay_spread_s,
            num_paths,
            anchor: None,
        }
    }
}

impl Default for Clutter {
    fn default() -> Self {
        Self::new(-15.0, 100e-9, 8)
    }
}

/// Odd-order memoryless PA model `y = Σ a_p |x|^{p-1} x`, coefficients stored
/// for `p = 1, 3, 5, ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct PaModel {
    pub coeffs: Vec<C64>,
}

impl PaModel {
    pub fn linear() -> Self {
        Self {
            coeffs: vec![C64::new(1.0, 0.0)],
        }
    }

    /// `a_1 = 1` with a compressive third-order term whose output power is
    /// `dbc` below the linear term for complex Gaussian input of the given
    /// mean power (`E|x|^6 = 6 P^3`).
    pub fn third_order(dbc: f64, operating_power: f64) -> Self {
        let a3 = -(signal::from_db(dbc) / 6.0).sqrt() / operating_power;
        Self {
            coeffs: vec![C64::new(1.0, 0.0), C64::new(a3, 0.0)],
        }
    }

    pub fn order(&self) -> usize {
        2 * self.coeffs.len() - 1
    }

    pub fn is_linear(&self) -> bool {
        self.coeffs.iter().skip(1).all(|a| a.norm() == 0.0)
    }

    #[inline]
    pub fn apply_sample(&self, x: C64) -> C64 {
        let m2 = x.norm_sqr();
        let mut env = 1.0;
        let mut acc = C64::new(0.0, 0.0);
        for a in &self.coeffs {
            acc += a * env;
            env *= m2;
        }
        acc * x
    }

    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        x.iter().map(|&v| self.apply_sample(v)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SiTap {
    pub delay_s: f64,
    pub gain: C64,
}

/// Direct TX-to-RX leakage: a short tapped-delay line fed by the PA output.
#[derive(Clone, Debug, PartialEq)]
pub struct SiCoupling {
    pub taps: Vec<SiTap>,
    /// When set, tap gains are rescaled so the SI power per subcarrier is
    /// this many dB above the noise variance. When `None` the gains are used
    /// as given.
    pub si_to_noise_db: Option<f64>,
    pub pa: Option<PaModel>,
}

impl SiCoupling {
    /// Single coupling path at `delay_s`, level set relative to noise.
    pub fn single(delay_s: f64, si_to_noise_db: f64) -> Self {
        Self {
            taps: vec![SiTap {
                delay_s,
                gain: C64::new(1.0, 0.0),
            }],
            si_to_noise_db: Some(si_to_noise_db),
            pa: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.taps.is_empty() {
            return Err(Error::param("si.taps", "at least one tap is required"));
        }
        for t in &self.taps {
            if !(t.delay_s.is_finite() && t.delay_s >= 0.0) {
                return Err(Error::param("si.taps", "delays must be >= 0"));
            }
            if !(t.gain.re.is_finite() && t.gain.im.is_finite()) {
                return Err(Error::param("si.taps", "gains must be finite"));
            }
        }
        Ok(())
    }

    /// Tap gains after level calibration.
    pub fn effective_taps(&self, noise_variance: f64) -> Vec<SiTap> {
        let Some(level_db) = self.si_to_noise_db else {
            return self.taps.clone();
        };
        let raw: f64 = self.taps.iter().map(|t| t.gain.norm_sqr()).sum();
        if raw == 0.0 {
            return self.taps.clone();
        }
        let reference = if noise_variance > 0.0 { noise_variance } else { 1.0 };
        let scale = (signal::from_db(level_db) * reference / raw).sqrt();
        self.taps
            .iter()
            .map(|t| SiTap {
                delay_s: t.delay_s,
                gain: t.gain * scale,
            })
            .collect()
    }
}

/// Everything the receiver sees besides its own transmit grid.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Scene {
    pub targets: Vec<Target>,
    pub clutter: Option<Clutter>,
    /// Noise variance per complex sample on the resource grid.
    pub noise_variance: f64,
    pub si: Option<SiCoupling>,
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::param("noise_variance", "must be >= 0"));
        }
        for t in &self.targets {
            t.validate()?;
        }
        if let Some(c) = &self.clutter {
            if !(c.rms_delay_spread_s.is_finite() && c.rms_delay_spread_s >= 0.0) {
                return Err(Error::param("clutter.rms_delay_spread_s", "must be >= 0"));
            }
        }
        if let Some(si) = &self.si {
            si.validate()?;
        }
        Ok(())
    }

    /// Targets followed by the realized clutter paths. Deterministic in
    /// `seed`, and identical for the grid and time routes.
    pub fn propagation_paths(&self, seed: u64) -> Vec<Target> {
        let mut paths = self.targets.clone();
        if let Some(clutter) = &self.clutter {
            let anchor = clutter.anchor.or_else(|| self.targets.first().copied());
            if let (Some(anchor), true) = (anchor, clutter.num_paths > 0) {
                let mut rng = rng::stream(seed, Stream::Clutter);
                let mut extra: Vec<Target> = Vec::with_capacity(clutter.num_paths);
                let exp = (clutter.rms_delay_spread_s > 0.0)
                    .then(|| Exp::new(1.0 / clutter.rms_delay_spread_s).expect("positive rate"));
                for _ in 0..clutter.num_paths {
                    let excess = exp.as_ref().map_or(0.0, |e| e.sample(&mut rng));
                    extra.push(Target {
                        gain: complex_gaussian(&mut rng, 1.0),
                        delay_s: anchor.delay_s + excess,
                        doppler_hz: anchor.doppler_hz,
                    });
                }
                let raw: f64 = extra.iter().map(|t| t.gain.norm_sqr()).sum();
                let want = signal::from_db(clutter.power_rel_db) * anchor.gain.norm_sqr();
                if raw > 0.0 {
                    let scale = (want / raw).sqrt();
                    extra.iter_mut().for_each(|t| t.gain *= scale);
                }
                paths.extend(extra);
            }
        }
        paths
    }
}

/// Receive grid `Y = X ⊙ H + N` with
/// `H_{p,q} = Σ_k b_k exp(j2π(q T_s f_D,k − k_p τ_k Δf))`, where `k_p` is the
/// baseband bin of row `p`. SI taps enter as zero-Doppler paths. The
/// returned grid carries the transmit mask.
pub fn apply_scene_grid(tx: &ResourceGrid, scene: &Scene, seed: u64) -> Result<ResourceGrid> {
    scene.validate()?;
    let num = &tx.numerology;
    let (s, r) = (num.active_subcarriers, num.ofdm_symbols);
    let mut paths = scene.propagation_paths(seed);
    if let Some(si) = &scene.si {
        paths.extend(
            si.effective_taps(scene.noise_variance)
                .into_iter()
                .map(|t| Target::new(t.gain, t.delay_s, 0.0)),
        );
    }

    let mut channel = vec![C64::new(0.0, 0.0); s * r];
    accumulate_channel(num, &paths, &mut channel);

    let mut rx = ResourceGrid {
        numerology: num.clone(),
        data: tx.data.iter().zip(&channel).map(|(x, h)| x * h).collect(),
        mask: tx.mask.clone(),
    };
    if scene.noise_variance > 0.0 {
        let mut rng = rng::stream(seed, Stream::Noise);
        signal::add_noise(&mut rng, &mut rx.data, scene.noise_variance);
    }
    Ok(rx)
}

/// Adds the separable per-path phasors onto a symbol-major channel grid.
pub(crate) fn accumulate_channel(num: &Numerology, paths: &[Target], channel: &mut [C64]) {
    let (s, r) = (num.active_subcarriers, num.ofdm_symbols);
    let df = num.subcarrier_spacing_hz;
    let ts = num.symbol_duration_s();
    let mut row = vec![C64::new(0.0, 0.0); s];
    for path in paths {
        for (p, v) in row.iter_mut().enumerate() {
            let k = num.subcarrier_bin(p) as f64;
            *v = path.gain * C64::from_polar(1.0, -2.0 * PI * k * path.delay_s * df);
        }
        for q in 0..r {
            let rot = C64::from_polar(1.0, 2.0 * PI * q as f64 * ts * path.doppler_hz);
            for (h, v) in channel[q * s..(q + 1) * s].iter_mut().zip(&row) {
                *h += v * rot;
            }
        }
    }
}

/// Oversampled receiver capture split into its components.
#[derive(Clone, Debug)]
pub struct Capture {
    pub oversample: usize,
    pub sample_rate_hz: f64,
    /// Digital transmit samples at the oversampled rate (PA input).
    pub tx: Vec<C64>,
    pub pa_out: Vec<C64>,
    pub si: Vec<C64>,
    pub echoes: Vec<C64>,
    pub noise: Vec<C64>,
}

impl Capture {
    /// Receiver input: SI + echoes + noise.
    pub fn rx(&self) -> Vec<C64> {
        self.si
            .iter()
            .zip(&self.echoes)
            .zip(&self.noise)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }

    /// Low-pass and decimate an oversampled stream back into a frame shaped
    /// like `template`.
    pub fn to_frame(&self, samples: &[C64], template: &TimeFrame) -> TimeFrame {
        TimeFrame {
            samples: signal::downsample(samples, self.oversample),
            ..template.clone()
        }
    }
}

/// Upsamples `tx` by `oversample`, passes it through the PA, the SI
/// coupling taps and the propagation paths (delays rounded to the
/// oversampled grid, continuous Doppler rotation), and draws receiver noise
/// so that the demodulated per-bin variance equals `scene.noise_variance`.
pub fn synthesize_time(tx: &TimeFrame, scene: &Scene, oversample: usize, seed: u64) -> Result<Capture> {
    scene.validate()?;
    if oversample == 0 {
        return Err(Error::param("oversample", "must be >= 1"));
    }
    let fs = tx.sample_rate_hz * oversample as f64;
    let tx_up = signal::upsample(&tx.samples, oversample);
    let len = tx_up.len();
    let pa_out = match scene.si.as_ref().and_then(|si| si.pa.as_ref()) {
        Some(pa) => pa.apply(&tx_up),
        None => tx_up.clone(),
    };
    let quantize = |delay_s: f64| -> Result<usize> {
        let d = (delay_s * fs).round() as usize;
        if d >= len {
            Err(Error::DelayOutOfRange { delay: d, len })
        } else {
            Ok(d)
        }
    };

    let mut si = vec![C64::new(0.0, 0.0); len];
    if let Some(coupling) = &scene.si {
        for tap in coupling.effective_taps(scene.noise_variance) {
            add_delayed(&mut si, &pa_out, quantize(tap.delay_s)?, tap.gain, 0.0, fs);
        }
    }
    let mut echoes = vec![C64::new(0.0, 0.0); len];
    for path in scene.propagation_paths(seed) {
        add_delayed(&mut echoes, &pa_out, quantize(path.delay_s)?, path.gain, path.doppler_hz, fs);
    }
    let mut noise = vec![C64::new(0.0, 0.0); len];
    if scene.noise_variance > 0.0 {
        let variance = scene.noise_variance * (tx.fft_size * oversample) as f64;
        let mut rng = rng::stream(seed, Stream::Noise);
        signal::add_noise(&mut rng, &mut noise, variance);
    }
    Ok(Capture {
        oversample,
        sample_rate_hz: fs,
        tx: tx_up,
        pa_out,
        si,
        echoes,
        noise,
    })
}

fn add_delayed(acc: &mut [C64], src: &[C64], delay: usize, gain: C64, doppler_hz: f64, fs: f64) {
    let len = src.len();
    let step = C64::from_polar(1.0, 2.0 * PI * doppler_hz / fs);
    let mut rot = gain;
    for (n, out) in acc.iter_mut().enumerate() {
        let idx = (n + len - delay) % len;
        *out += src[idx] * rot;
        if doppler_hz != 0.0 {
            // re-anchor periodically to keep the recursive phasor accurate
            rot = if n % 4096 == 4095 {
                gain * C64::from_polar(1.0, 2.0 * PI * doppler_hz * (n + 1) as f64 / fs)
            } else {
                rot * step
            };
        }
    }
}

/// Time-domain route followed by low-pass decimation back to the base rate.
pub fn apply_scene_time(tx: &TimeFrame, scene: &Scene, oversample: usize, seed: u64) -> Result<TimeFrame> {
    let capture = synthesize_time(tx, scene, oversample, seed)?;
    Ok(capture.to_frame(&capture.rx(), tx))
}

/// Unit-magnitude target gain for a given input SNR (dB) with the given
/// per-bin noise variance and phase.
pub fn gain_for_snr(snr_db: f64, noise_variance: f64, phase: f64) -> C64 {
    C64::from_polar((signal::from_db(snr_db) * noise_variance).sqrt(), phase)
}

/// Uniform random phase helper for trial generation.
pub fn random_phase<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(0.0..2.0 * PI)
}
