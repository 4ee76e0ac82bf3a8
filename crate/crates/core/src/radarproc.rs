//! Frequency-domain radar processing: element-wise quotient (or matched
//! filter) against the known transmit grid, linear interpolation over
//! unused subcarriers, windowed range-Doppler periodogram over a restricted
//! search space, analytic CFAR threshold and peak-based estimation.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::waveform::{ActivityMask, Numerology, ResourceGrid};
use crate::{Error, Result, C64, SPEED_OF_LIGHT};

const DIVISION_GUARD: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProcessingMode {
    /// `G = Y ⊘ X`
    Quotient,
    /// `G = Y ⊙ X*`
    MatchedFilter,
}

/// Subcarrier-domain processed grid. Inactive positions hold zero until
/// [`interpolate_grid`] fills them.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessedGrid {
    pub numerology: Numerology,
    pub data: Vec<C64>,
    pub mask: ActivityMask,
    pub mode: ProcessingMode,
    pub interpolated: bool,
}

impl ProcessedGrid {
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
}

pub fn process_grids(tx: &ResourceGrid, rx: &ResourceGrid, mode: ProcessingMode) -> Result<ProcessedGrid> {
    if tx.data.len() != rx.data.len() || tx.subcarriers() != rx.subcarriers() {
        return Err(Error::DimensionMismatch(format!(
            "tx grid {}x{} vs rx grid {}x{}",
            tx.subcarriers(),
            tx.symbols(),
            rx.subcarriers(),
            rx.symbols()
        )));
    }
    if tx.mask != rx.mask {
        return Err(Error::InvalidMask("transmit and receive masks differ".into()));
    }
    let s = tx.subcarriers();
    let mut data = vec![C64::new(0.0, 0.0); tx.data.len()];
    for (i, ((g, x), y)) in data.iter_mut().zip(&tx.data).zip(&rx.data).enumerate() {
        if !tx.mask.as_slice()[i] {
            continue;
        }
        *g = match mode {
            ProcessingMode::Quotient => {
                if x.norm() < DIVISION_GUARD {
                    return Err(Error::DivisionGuard { p: i % s, q: i / s });
                }
                y / x
            }
            ProcessingMode::MatchedFilter => y * x.conj(),
        };
    }
    Ok(ProcessedGrid {
        numerology: tx.numerology.clone(),
        data,
        mask: tx.mask.clone(),
        mode,
        interpolated: false,
    })
}

/// Fills unused `(p, q)` by linear interpolation along `q` between the
/// nearest active symbols of the same subcarrier; leading and trailing gaps
/// take the nearest active value. Fully inactive rows stay zero.
pub fn interpolate_grid(g: &ProcessedGrid) -> Result<ProcessedGrid> {
    let (s, r) = (g.subcarriers(), g.symbols());
    let mut out = g.clone();
    out.interpolated = true;
    if g.mask.is_full() {
        return Ok(out);
    }
    let mut active = Vec::with_capacity(r);
    for p in 0..s {
        active.clear();
        active.extend((0..r).filter(|&q| g.mask.is_active(p, q)));
        match active.len() {
            0 => continue,
            1 => return Err(Error::InterpolationRow { row: p, active: 1 }),
            _ => {}
        }
        let first = active[0];
        let last = active[active.len() - 1];
        for q in 0..first {
            out.data[q * s + p] = g.get(p, first);
        }
        for q in last + 1..r {
            out.data[q * s + p] = g.get(p, last);
        }
        for pair in active.windows(2) {
            let (q1, q2) = (pair[0], pair[1]);
            if q2 == q1 + 1 {
                continue;
            }
            let g1 = g.get(p, q1);
            let slope = (g.get(p, q2) - g1) / (q2 - q1) as f64;
            for q in q1 + 1..q2 {
                out.data[q * s + p] = g1 + slope * (q - q1) as f64;
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Window {
    Rectangular,
    Hamming,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hamming if len <= 1 => vec![1.0; len],
            Window::Hamming => (0..len)
                .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / (len - 1) as f64).cos())
                .collect(),
        }
    }

    /// `Σ_{p,q} |w_p w_q|²` over an `S × R` grid.
    pub fn energy(self, subcarriers: usize, symbols: usize) -> f64 {
        let e = |n| self.coefficients(n).iter().map(|w| w * w).sum::<f64>();
        e(subcarriers) * e(symbols)
    }
}

/// Periodogram index set: range bins `0..s_max` and Doppler bins
/// `-r_max..=r_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SearchSpace {
    pub s_max: usize,
    pub r_max: usize,
}

impl SearchSpace {
    pub fn new(s_max: usize, r_max: usize) -> Self {
        Self { s_max, r_max }
    }

    /// Round-trip delay up to the cyclic prefix and Doppler up to ±10 % of
    /// the subcarrier spacing.
    pub fn for_numerology(num: &Numerology, range_size: usize, doppler_size: usize) -> Self {
        const EPS: f64 = 1e-9;
        let s_lim = num.cp_length_s * range_size as f64 * num.subcarrier_spacing_hz;
        let r_lim = 0.1 * num.subcarrier_spacing_hz * doppler_size as f64 * num.symbol_duration_s();
        let s_max = ((s_lim + EPS).floor() as usize + 1).min(range_size);
        let r_max = ((r_lim + EPS).floor() as usize).min(doppler_size.saturating_sub(1) / 2);
        Self { s_max, r_max }
    }

    pub fn doppler_bins(&self) -> usize {
        2 * self.r_max + 1
    }

    pub fn size(&self) -> usize {
        self.s_max * self.doppler_bins()
    }

    pub fn validate(&self, range_size: usize, doppler_size: usize) -> Result<()> {
        if self.s_max == 0 {
            return Err(Error::param("s_max", "search space is empty"));
        }
        if self.s_max > range_size {
            return Err(Error::param("s_max", format!("{} exceeds S' = {range_size}", self.s_max)));
        }
        if self.doppler_bins() > doppler_size {
            return Err(Error::param(
                "r_max",
                format!("2*{}+1 exceeds R' = {doppler_size}", self.r_max),
            ));
        }
        Ok(())
    }

    pub fn contains(&self, s: isize, r: isize) -> bool {
        s >= 0 && (s as usize) < self.s_max && r.unsigned_abs() <= self.r_max
    }
}

/// Range-Doppler power image over a [`SearchSpace`]; row-major with rows
/// indexed by range bin and columns by Doppler bin `-r_max..=r_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadarImage {
    pub values: Vec<f64>,
    pub space: SearchSpace,
    pub range_size: usize,
    pub doppler_size: usize,
    pub distance_per_bin_m: f64,
    pub velocity_per_bin_mps: f64,
}

impl RadarImage {
    pub fn rows(&self) -> usize {
        self.space.s_max
    }

    pub fn cols(&self) -> usize {
        self.space.doppler_bins()
    }

    #[inline]
    pub fn get(&self, s: usize, r: isize) -> f64 {
        self.values[s * self.cols() + (r + self.space.r_max as isize) as usize]
    }

    /// `None` outside the search space.
    pub fn try_get(&self, s: isize, r: isize) -> Option<f64> {
        self.space.contains(s, r).then(|| self.get(s as usize, r))
    }

    pub fn distance_of(&self, s: usize) -> f64 {
        s as f64 * self.distance_per_bin_m
    }

    pub fn velocity_of(&self, r: isize) -> f64 {
        r as f64 * self.velocity_per_bin_mps
    }

    /// Global maximum; ties go to the smallest `s`, then the smallest `r`.
    pub fn argmax(&self) -> (usize, isize, f64) {
        let r_max = self.space.r_max as isize;
        let mut best = (0, -r_max, f64::NEG_INFINITY);
        for s in 0..self.rows() {
            for r in -r_max..=r_max {
                let v = self.get(s, r);
                if v > best.2 {
                    best = (s, r, v);
                }
            }
        }
        best
    }

    pub fn max_in_block(&self, s: usize, r: isize, radius: usize) -> Option<f64> {
        let rad = radius as isize;
        let mut best: Option<f64> = None;
        for ds in -rad..=rad {
            for dr in -rad..=rad {
                let (ss, rr) = (s as isize + ds, r + dr);
                if self.space.contains(ss, rr) {
                    let v = self.get(ss as usize, rr);
                    best = Some(best.map_or(v, |b: f64| b.max(v)));
                }
            }
        }
        best
    }
}

/// Planned 2-D transform for one numerology, window and search space.
pub struct Periodogram {
    numerology: Numerology,
    window: Window,
    range_size: usize,
    doppler_size: usize,
    space: SearchSpace,
    range_ifft: Arc<dyn Fft<f64>>,
    doppler_fft: Arc<dyn Fft<f64>>,
    w_range: Vec<f64>,
    w_doppler: Vec<f64>,
}

impl Periodogram {
    pub fn new(
        numerology: &Numerology,
        window: Window,
        range_size: usize,
        doppler_size: usize,
        space: SearchSpace,
    ) -> Result<Self> {
        let (s, r) = (numerology.active_subcarriers, numerology.ofdm_symbols);
        if range_size < s {
            return Err(Error::TransformTooSmall { size: range_size, dim: s });
        }
        if doppler_size < r {
            return Err(Error::TransformTooSmall { size: doppler_size, dim: r });
        }
        space.validate(range_size, doppler_size)?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            numerology: numerology.clone(),
            window,
            range_size,
            doppler_size,
            space,
            range_ifft: planner.plan_fft_inverse(range_size),
            doppler_fft: planner.plan_fft_forward(doppler_size),
            w_range: window.coefficients(s),
            w_doppler: window.coefficients(r),
        })
    }

    /// `S' = S`, `R' = R` and the default search space.
    pub fn with_defaults(numerology: &Numerology, window: Window) -> Result<Self> {
        let (s, r) = (numerology.active_subcarriers, numerology.ofdm_symbols);
        Self::new(numerology, window, s, r, SearchSpace::for_numerology(numerology, s, r))
    }

    pub fn space(&self) -> SearchSpace {
        self.space
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn transform_sizes(&self) -> (usize, usize) {
        (self.range_size, self.doppler_size)
    }

    pub fn window_energy(&self) -> f64 {
        let e = |w: &[f64]| w.iter().map(|v| v * v).sum::<f64>();
        e(&self.w_range) * e(&self.w_doppler)
    }

    /// Mean of a noise-only image bin for per-bin noise variance `σ̃²`.
    pub fn noise_mean(&self, noise_variance: f64) -> f64 {
        noise_variance * self.window_energy()
    }

    pub fn threshold(&self, noise_variance: f64, pfa_total: f64) -> Result<f64> {
        cfar_threshold(noise_variance, self.window_energy(), &self.space, pfa_total)
    }

    /// `A(s,r) = |Σ_q (Σ_p G W e^{+j2πps/S'}) e^{-j2πqr/R'}|²` on the search
    /// space.
    pub fn compute(&self, g: &ProcessedGrid) -> Result<RadarImage> {
        Ok(self.image_from_field(&self.compute_field(g)?))
    }

    /// The transform before the squared magnitude, laid out like
    /// [`RadarImage::values`]. It is linear in `g`, so fields of separately
    /// processed signal and noise grids may be scaled and summed.
    pub fn compute_field(&self, g: &ProcessedGrid) -> Result<Vec<C64>> {
        let num = &self.numerology;
        let (s, r) = (num.active_subcarriers, num.ofdm_symbols);
        if g.subcarriers() != s || g.symbols() != r {
            return Err(Error::DimensionMismatch(format!(
                "grid {}x{} vs periodogram {}x{}",
                g.subcarriers(),
                g.symbols(),
                s,
                r
            )));
        }
        let s_max = self.space.s_max;
        let (sp, rp) = (self.range_size, self.doppler_size);

        // Range profiles, kept only for s < s_max, stored [s][q].
        let mut profiles = vec![C64::new(0.0, 0.0); s_max * rp];
        let mut col = vec![C64::new(0.0, 0.0); sp];
        let mut scratch = vec![C64::new(0.0, 0.0); self.range_ifft.get_inplace_scratch_len()];
        for q in 0..r {
            let wq = self.w_doppler[q];
            let src = &g.data[q * s..(q + 1) * s];
            for ((c, v), wp) in col.iter_mut().zip(src).zip(&self.w_range) {
                *c = v * (wp * wq);
            }
            col[s..].fill(C64::new(0.0, 0.0));
            self.range_ifft.process_with_scratch(&mut col, &mut scratch);
            for (si, v) in col[..s_max].iter().enumerate() {
                profiles[si * rp + q] = *v;
            }
        }

        let r_max = self.space.r_max as isize;
        let mut field = Vec::with_capacity(self.space.size());
        let mut scratch = vec![C64::new(0.0, 0.0); self.doppler_fft.get_inplace_scratch_len()];
        for row in profiles.chunks_exact_mut(rp) {
            self.doppler_fft.process_with_scratch(row, &mut scratch);
            for rr in -r_max..=r_max {
                field.push(row[rr.rem_euclid(rp as isize) as usize]);
            }
        }
        Ok(field)
    }

    pub fn image_from_field(&self, field: &[C64]) -> RadarImage {
        let res = self.resolutions();
        RadarImage {
            values: field.iter().map(|v| v.norm_sqr()).collect(),
            space: self.space,
            range_size: self.range_size,
            doppler_size: self.doppler_size,
            distance_per_bin_m: res.distance_per_bin_m,
            velocity_per_bin_mps: res.velocity_per_bin_mps,
        }
    }

    pub fn numerology(&self) -> &Numerology {
        &self.numerology
    }

    pub fn resolutions(&self) -> Resolutions {
        resolutions(&self.numerology, self.range_size, self.doppler_size)
    }
}

pub fn periodogram(
    g: &ProcessedGrid,
    window: Window,
    range_size: usize,
    doppler_size: usize,
    space: SearchSpace,
) -> Result<RadarImage> {
    Periodogram::new(&g.numerology, window, range_size, doppler_size, space)?.compute(g)
}

/// Per-bin false-alarm probability for a total rate over `space`.
pub fn per_bin_pfa(pfa_total: f64, space: &SearchSpace) -> f64 {
    // 1 - (1 - P)^(1/n), written to stay accurate for tiny P
    -(((1.0 - pfa_total).ln()) / space.size() as f64).exp_m1()
}

/// Threshold such that the probability of any noise-only bin in `space`
/// exceeding it is `pfa_total`, assuming independent exponential bins of
/// mean `noise_variance * window_energy`.
pub fn cfar_threshold(noise_variance: f64, window_energy: f64, space: &SearchSpace, pfa_total: f64) -> Result<f64> {
    if !(pfa_total > 0.0 && pfa_total < 1.0) {
        return Err(Error::param("pfa_total", format!("{pfa_total} not in (0, 1)")));
    }
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::param("noise_variance", "must be positive"));
    }
    if !(window_energy > 0.0 && window_energy.is_finite()) {
        return Err(Error::param("window", "window has zero energy"));
    }
    if space.size() == 0 {
        return Err(Error::param("space", "search space is empty"));
    }
    let mean = noise_variance * window_energy;
    Ok(-mean * per_bin_pfa(pfa_total, space).ln())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detection {
    pub s: usize,
    pub r: isize,
    pub distance_m: f64,
    pub velocity_mps: f64,
    pub peak: f64,
    pub threshold: f64,
}

/// Single-target detector: the global peak over the search space if it
/// exceeds `threshold`.
pub fn detect_and_estimate(img: &RadarImage, threshold: f64) -> Option<Detection> {
    let (s, r, peak) = img.argmax();
    (peak > threshold).then(|| Detection {
        s,
        r,
        distance_m: img.distance_of(s),
        velocity_mps: img.velocity_of(r),
        peak,
        threshold,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resolutions {
    /// `c / (2 S Δf)`
    pub distance_resolution_m: f64,
    /// `c / (2 R T_s f_c)`
    pub velocity_resolution_mps: f64,
    /// `c T_cp / 2`
    pub max_distance_m: f64,
    /// `0.1 Δf c / (2 f_c)`
    pub max_velocity_mps: f64,
    pub distance_per_bin_m: f64,
    pub velocity_per_bin_mps: f64,
}

pub fn resolutions(num: &Numerology, range_size: usize, doppler_size: usize) -> Resolutions {
    let c = SPEED_OF_LIGHT;
    let df = num.subcarrier_spacing_hz;
    let ts = num.symbol_duration_s();
    let fc = num.carrier_freq_hz;
    Resolutions {
        distance_resolution_m: c / (2.0 * num.active_subcarriers as f64 * df),
        velocity_resolution_mps: c / (2.0 * num.ofdm_symbols as f64 * ts * fc),
        max_distance_m: c * num.cp_length_s / 2.0,
        max_velocity_mps: 0.1 * df * c / (2.0 * fc),
        distance_per_bin_m: c / (2.0 * range_size as f64 * df),
        velocity_per_bin_mps: c / (2.0 * doppler_size as f64 * ts * fc),
    }
}

/// Coherent integration gain `10 log10(R S)` in dB.
pub fn processing_gain_db(num: &Numerology) -> f64 {
    10.0 * ((num.ofdm_symbols * num.active_subcarriers) as f64).log10()
}
