//! OFDM numerologies, transmit resource grids and block-wise (I)FFT
//! modulation with cyclic prefix.
//!
//! Grids are stored symbol-major: entry `(p, q)` (active subcarrier row `p`,
//! OFDM symbol `q`) lives at `q * S + p`. The `S` active subcarriers are mapped
//! onto a DC-centered FFT band with the DC bin left unused, see
//! [`Numerology::subcarrier_bin`].

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::rng::{self, Stream};
use crate::{Error, Result, C64};

/// Named numerologies for a 10 ms frame at 3.5 GHz.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Preset {
    Lte20,
    Nr20,
    Nr40,
    Nr100,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Lte20, Preset::Nr20, Preset::Nr40, Preset::Nr100];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Lte20 => "LTE20",
            Preset::Nr20 => "NR20",
            Preset::Nr40 => "NR40",
            Preset::Nr100 => "NR100",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, ' ' | '-' | '_'))
            .collect::<String>()
            .to_ascii_uppercase();
        match key.as_str() {
            "LTE20" => Ok(Preset::Lte20),
            "NR20" => Ok(Preset::Nr20),
            "NR40" => Ok(Preset::Nr40),
            "NR100" => Ok(Preset::Nr100),
            _ => Err(Error::UnknownPreset(s.to_string())),
        }
    }
}

/// OFDM numerology: subcarrier spacing, cyclic prefix, grid size, carrier
/// and FFT size.
#[derive(Clone, Debug, PartialEq)]
pub struct Numerology {
    pub subcarrier_spacing_hz: f64,
    pub cp_length_s: f64,
    pub active_subcarriers: usize,
    pub ofdm_symbols: usize,
    pub carrier_freq_hz: f64,
    pub fft_size: usize,
}

impl Numerology {
    pub const DEFAULT_CARRIER_HZ: f64 = 3.5e9;

    pub fn preset(preset: Preset) -> Self {
        let (df, tcp, s, r) = match preset {
            Preset::Lte20 => (15e3, 4.7e-6, 1200, 140),
            Preset::Nr20 => (15e3, 4.7e-6, 1272, 140),
            Preset::Nr40 => (30e3, 2.3e-6, 1272, 280),
            Preset::Nr100 => (30e3, 2.3e-6, 3276, 280),
        };
        Self {
            subcarrier_spacing_hz: df,
            cp_length_s: tcp,
            active_subcarriers: s,
            ofdm_symbols: r,
            carrier_freq_hz: Self::DEFAULT_CARRIER_HZ,
            fft_size: default_fft_size(s),
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        name.parse().map(Self::preset)
    }

    /// Raw parameters; the FFT size defaults to the smallest power of two
    /// covering `S / 0.9`.
    pub fn custom(
        subcarrier_spacing_hz: f64,
        cp_length_s: f64,
        active_subcarriers: usize,
        ofdm_symbols: usize,
        carrier_freq_hz: f64,
    ) -> Result<Self> {
        let num = Self {
            subcarrier_spacing_hz,
            cp_length_s,
            active_subcarriers,
            ofdm_symbols,
            carrier_freq_hz,
            fft_size: default_fft_size(active_subcarriers),
        };
        num.validate()?;
        Ok(num)
    }

    pub fn with_fft_size(mut self, fft_size: usize) -> Result<Self> {
        self.fft_size = fft_size;
        self.validate()?;
        Ok(self)
    }

    pub fn with_symbols(mut self, ofdm_symbols: usize) -> Result<Self> {
        self.ofdm_symbols = ofdm_symbols;
        self.validate()?;
        Ok(self)
    }

    pub fn with_carrier(mut self, carrier_freq_hz: f64) -> Result<Self> {
        self.carrier_freq_hz = carrier_freq_hz;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive and finite, got {v}")))
            }
        };
        positive("subcarrier_spacing_hz", self.subcarrier_spacing_hz)?;
        positive("carrier_freq_hz", self.carrier_freq_hz)?;
        if !(self.cp_length_s.is_finite() && self.cp_length_s >= 0.0) {
            return Err(Error::param("cp_length_s", "must be non-negative"));
        }
        if self.active_subcarriers == 0 {
            return Err(Error::param("active_subcarriers", "must be at least 1"));
        }
        if self.ofdm_symbols == 0 {
            return Err(Error::param("ofdm_symbols", "must be at least 1"));
        }
        if !self.fft_size.is_power_of_two() {
            return Err(Error::param(
                "fft_size",
                format!("{} is not a power of two", self.fft_size),
            ));
        }
        // Centered band plus the unused DC bin must fit in the FFT.
        let s = self.active_subcarriers;
        if s / 2 > self.fft_size / 2 || s - s / 2 >= self.fft_size / 2 {
            return Err(Error::param(
                "fft_size",
                format!("{} cannot hold {} subcarriers plus DC", self.fft_size, s),
            ));
        }
        Ok(())
    }

    /// Total OFDM symbol duration `1/Δf + T_cp`.
    pub fn symbol_duration_s(&self) -> f64 {
        1.0 / self.subcarrier_spacing_hz + self.cp_length_s
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.fft_size as f64 * self.subcarrier_spacing_hz
    }

    pub fn cp_samples(&self) -> usize {
        (self.cp_length_s * self.sample_rate_hz()).round() as usize
    }

    pub fn samples_per_symbol(&self) -> usize {
        self.fft_size + self.cp_samples()
    }

    pub fn frame_samples(&self) -> usize {
        self.ofdm_symbols * self.samples_per_symbol()
    }

    pub fn grid_len(&self) -> usize {
        self.active_subcarriers * self.ofdm_symbols
    }

    /// Signed baseband FFT bin carrying active row `p`. The lower half of the
    /// band sits at negative bins, the upper half starts at +1 (DC unused).
    pub fn subcarrier_bin(&self, p: usize) -> isize {
        let half = (self.active_subcarriers / 2) as isize;
        let p = p as isize;
        if p < half {
            p - half
        } else {
            p - half + 1
        }
    }

    /// Array index of active row `p` inside an FFT buffer.
    pub fn fft_index(&self, p: usize) -> usize {
        self.subcarrier_bin(p).rem_euclid(self.fft_size as isize) as usize
    }
}

fn default_fft_size(active_subcarriers: usize) -> usize {
    let s = active_subcarriers;
    let mut n = ((s as f64 / 0.9).ceil() as usize).max(2).next_power_of_two();
    while s - s / 2 >= n / 2 {
        n *= 2;
    }
    n
}

/// Boolean `S × R` activity pattern; `true` marks a subcarrier carrying a
/// known symbol.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivityMask {
    subcarriers: usize,
    symbols: usize,
    active: Vec<bool>,
}

impl ActivityMask {
    pub fn full(subcarriers: usize, symbols: usize) -> Self {
        Self {
            subcarriers,
            symbols,
            active: vec![true; subcarriers * symbols],
        }
    }

    /// Builds a mask from symbol-major storage.
    pub fn from_vec(subcarriers: usize, symbols: usize, active: Vec<bool>) -> Result<Self> {
        if active.len() != subcarriers * symbols {
            return Err(Error::DimensionMismatch(format!(
                "mask of {} entries for a {subcarriers}x{symbols} grid",
                active.len()
            )));
        }
        Ok(Self {
            subcarriers,
            symbols,
            active,
        })
    }

    pub fn from_fn(subcarriers: usize, symbols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut active = Vec::with_capacity(subcarriers * symbols);
        for q in 0..symbols {
            for p in 0..subcarriers {
                active.push(f(p, q));
            }
        }
        Self {
            subcarriers,
            symbols,
            active,
        }
    }

    pub fn subcarriers(&self) -> usize {
        self.subcarriers
    }

    pub fn symbols(&self) -> usize {
        self.symbols
    }

    #[inline]
    pub fn is_active(&self, p: usize, q: usize) -> bool {
        self.active[q * self.subcarriers + p]
    }

    pub fn set(&mut self, p: usize, q: usize, active: bool) {
        self.active[q * self.subcarriers + p] = active;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.active
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn active_fraction(&self) -> f64 {
        self.active_count() as f64 / self.active.len().max(1) as f64
    }

    pub fn is_full(&self) -> bool {
        self.active.iter().all(|&a| a)
    }

    pub fn row_active_count(&self, p: usize) -> usize {
        (0..self.symbols).filter(|&q| self.is_active(p, q)).count()
    }

    /// Each row must have at least two active symbols or none at all.
    pub fn validate(&self) -> Result<()> {
        for p in 0..self.subcarriers {
            let n = self.row_active_count(p);
            if n == 1 {
                return Err(Error::InvalidMask(format!(
                    "subcarrier row {p} has a single active symbol"
                )));
            }
        }
        Ok(())
    }
}

/// How the transmit grid's activity mask is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum MaskPolicy {
    Full,
    /// Per OFDM symbol, `round(density * S)` subcarriers are drawn active
    /// uniformly at random.
    UniformRandom { density: f64 },
    Pattern(ActivityMask),
}

impl MaskPolicy {
    pub fn build(&self, subcarriers: usize, symbols: usize, seed: u64) -> Result<ActivityMask> {
        let mask = match self {
            MaskPolicy::Full => ActivityMask::full(subcarriers, symbols),
            MaskPolicy::UniformRandom { density } => {
                if !(*density > 0.0 && *density <= 1.0) {
                    return Err(Error::param("density", format!("{density} not in (0, 1]")));
                }
                let per_symbol = (density * subcarriers as f64).round() as usize;
                let mut rng = rng::stream(seed, Stream::Mask);
                let mut active = vec![false; subcarriers * symbols];
                for q in 0..symbols {
                    let col = &mut active[q * subcarriers..(q + 1) * subcarriers];
                    if per_symbol == subcarriers {
                        col.fill(true);
                    } else {
                        for p in index::sample(&mut rng, subcarriers, per_symbol) {
                            col[p] = true;
                        }
                    }
                }
                // Rows with a single active symbol are legal here; they are
                // rejected later by interpolation if it is requested.
                return ActivityMask::from_vec(subcarriers, symbols, active);
            }
            MaskPolicy::Pattern(mask) => {
                if mask.subcarriers() != subcarriers || mask.symbols() != symbols {
                    return Err(Error::DimensionMismatch(format!(
                        "pattern is {}x{}, grid is {subcarriers}x{symbols}",
                        mask.subcarriers(),
                        mask.symbols()
                    )));
                }
                mask.clone()
            }
        };
        mask.validate()?;
        Ok(mask)
    }
}

/// Frequency-domain grid of transmit (or received) symbols.
#[derive(Clone, Debug, PartialEq)]
pub struct ResourceGrid {
    pub numerology: Numerology,
    pub data: Vec<C64>,
    pub mask: ActivityMask,
}

impl ResourceGrid {
    pub fn zeros(numerology: &Numerology) -> Self {
        let (s, r) = (numerology.active_subcarriers, numerology.ofdm_symbols);
        Self {
            numerology: numerology.clone(),
            data: vec![C64::new(0.0, 0.0); s * r],
            mask: ActivityMask::full(s, r),
        }
    }

    pub fn subcarriers(&self) -> usize {
        self.numerology.active_subcarriers
    }

    pub fn symbols(&self) -> usize {
        self.numerology.ofdm_symbols
    }

    #[inline]
    pub fn get(&self, p: usize, q: usize) -> C64 {
        self.data[q * self.subcarriers() + p]
    }

    #[inline]
    pub fn set(&mut self, p: usize, q: usize, v: C64) {
        let s = self.subcarriers();
        self.data[q * s + p] = v;
    }

    pub fn symbol(&self, q: usize) -> &[C64] {
        let s = self.subcarriers();
        &self.data[q * s..(q + 1) * s]
    }

    /// Replaces the mask and zeroes the entries it marks inactive.
    pub fn with_mask(mut self, mask: ActivityMask) -> Result<Self> {
        if mask.subcarriers() != self.subcarriers() || mask.symbols() != self.symbols() {
            return Err(Error::DimensionMismatch("mask does not match grid".into()));
        }
        for (v, &on) in self.data.iter_mut().zip(mask.as_slice()) {
            if !on {
                *v = C64::new(0.0, 0.0);
            }
        }
        self.mask = mask;
        Ok(self)
    }
}

const QPSK_AMPLITUDE: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Draws a unit-power QPSK transmit grid. Pure function of its arguments.
pub fn generate_tx_grid(num: &Numerology, policy: &MaskPolicy, seed: u64) -> Result<ResourceGrid> {
    num.validate()?;
    let (s, r) = (num.active_subcarriers, num.ofdm_symbols);
    let mask = policy.build(s, r, seed)?;
    let mut rng = rng::stream(seed, Stream::Symbols);
    let mut data = vec![C64::new(0.0, 0.0); s * r];
    let mut bits = 0u64;
    let mut left = 0;
    for (x, &active) in data.iter_mut().zip(mask.as_slice()) {
        if !active {
            continue;
        }
        if left == 0 {
            bits = rng.random();
            left = 32;
        }
        let re = if bits & 1 == 0 { QPSK_AMPLITUDE } else { -QPSK_AMPLITUDE };
        let im = if bits & 2 == 0 { QPSK_AMPLITUDE } else { -QPSK_AMPLITUDE };
        bits >>= 2;
        left -= 1;
        *x = C64::new(re, im);
    }
    Ok(ResourceGrid {
        numerology: num.clone(),
        data,
        mask,
    })
}

/// Time-domain OFDM frame: `R` symbols of `N_cp + N` samples each.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeFrame {
    pub samples: Vec<C64>,
    pub sample_rate_hz: f64,
    pub fft_size: usize,
    pub cp_samples: usize,
    pub symbols: usize,
}

impl TimeFrame {
    pub fn samples_per_symbol(&self) -> usize {
        self.fft_size + self.cp_samples
    }

    /// Start index of symbol `q` including its cyclic prefix.
    pub fn symbol_start(&self, q: usize) -> usize {
        q * self.samples_per_symbol()
    }

    /// Index of the first body sample (after the CP) of symbol `q`.
    pub fn body_start(&self, q: usize) -> usize {
        self.symbol_start(q) + self.cp_samples
    }
}

/// Block-wise IFFT / FFT with a fixed numerology. Reuse across trials to
/// avoid re-planning the transforms.
pub struct OfdmModem {
    numerology: Numerology,
    ifft: Arc<dyn Fft<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl OfdmModem {
    pub fn new(numerology: &Numerology) -> Result<Self> {
        numerology.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            numerology: numerology.clone(),
            ifft: planner.plan_fft_inverse(numerology.fft_size),
            fft: planner.plan_fft_forward(numerology.fft_size),
        })
    }

    pub fn numerology(&self) -> &Numerology {
        &self.numerology
    }

    /// Unnormalized IDFT per symbol (`x[n] = Σ_k X_k e^{+j2πkn/N}`) followed by
    /// cyclic prefix insertion.
    pub fn modulate(&self, grid: &ResourceGrid) -> Result<TimeFrame> {
        let num = &self.numerology;
        check_dims(num, &grid.numerology)?;
        let n = num.fft_size;
        let ncp = num.cp_samples();
        let mut samples = Vec::with_capacity(num.frame_samples());
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for q in 0..num.ofdm_symbols {
            buf.fill(C64::new(0.0, 0.0));
            for (p, &x) in grid.symbol(q).iter().enumerate() {
                buf[num.fft_index(p)] = x;
            }
            self.ifft.process(&mut buf);
            samples.extend_from_slice(&buf[n - ncp..]);
            samples.extend_from_slice(&buf);
        }
        Ok(TimeFrame {
            samples,
            sample_rate_hz: num.sample_rate_hz(),
            fft_size: n,
            cp_samples: ncp,
            symbols: num.ofdm_symbols,
        })
    }

    /// Drops each CP, takes a `1/N`-normalized DFT and extracts the active
    /// band. The returned mask is full; callers copy the TX mask over.
    pub fn demodulate(&self, frame: &TimeFrame) -> Result<ResourceGrid> {
        let num = &self.numerology;
        if frame.samples.len() != num.frame_samples()
            || frame.fft_size != num.fft_size
            || frame.cp_samples != num.cp_samples()
        {
            return Err(Error::DimensionMismatch(format!(
                "frame of {} samples (N={}, N_cp={}) vs numerology expecting {} (N={}, N_cp={})",
                frame.samples.len(),
                frame.fft_size,
                frame.cp_samples,
                num.frame_samples(),
                num.fft_size,
                num.cp_samples()
            )));
        }
        let n = num.fft_size;
        let scale = 1.0 / n as f64;
        let mut grid = ResourceGrid::zeros(num);
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for q in 0..num.ofdm_symbols {
            let start = frame.body_start(q);
            buf.copy_from_slice(&frame.samples[start..start + n]);
            self.fft.process(&mut buf);
            for p in 0..num.active_subcarriers {
                grid.set(p, q, buf[num.fft_index(p)] * scale);
            }
        }
        Ok(grid)
    }
}

fn check_dims(expected: &Numerology, got: &Numerology) -> Result<()> {
    if expected.active_subcarriers != got.active_subcarriers
        || expected.ofdm_symbols != got.ofdm_symbols
        || expected.fft_size != got.fft_size
    {
        return Err(Error::DimensionMismatch(format!(
            "grid {}x{} (N={}) vs modem {}x{} (N={})",
            got.active_subcarriers,
            got.ofdm_symbols,
            got.fft_size,
            expected.active_subcarriers,
            expected.ofdm_symbols,
            expected.fft_size
        )));
    }
    Ok(())
}

pub fn modulate(grid: &ResourceGrid) -> Result<TimeFrame> {
    OfdmModem::new(&grid.numerology)?.modulate(grid)
}

pub fn demodulate(frame: &TimeFrame, num: &Numerology) -> Result<ResourceGrid> {
    OfdmModem::new(num)?.demodulate(frame)
}
