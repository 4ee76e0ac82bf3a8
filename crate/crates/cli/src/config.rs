//! Typed run configuration on top of [`Ini`].
//!
//! Parsing resolves every default, so [`Config::dump`] writes a complete
//! file that parses back to the same value.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ofdm_radar::canceller::UpdateMode;
use ofdm_radar::experiments::{
    CfarConfig, InterpolationConfig, IsolationConfig, MaskingConfig, PdRmseConfig, ProcessingGainConfig, RocConfig,
    SiRig,
};
use ofdm_radar::radarproc::Window;
use ofdm_radar::scene::Clutter;
use ofdm_radar::waveform::{MaskPolicy, Numerology};

use crate::ini::Ini;
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Experiment {
    PdRmse,
    Masking,
    ProcessingGain,
    Cfar,
    Interpolation,
    Cancellers,
    Echo,
    Roc,
    Isolation,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::PdRmse,
        Experiment::Masking,
        Experiment::ProcessingGain,
        Experiment::Cfar,
        Experiment::Interpolation,
        Experiment::Cancellers,
        Experiment::Echo,
        Experiment::Roc,
        Experiment::Isolation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::PdRmse => "pd_rmse",
            Experiment::Masking => "masking",
            Experiment::ProcessingGain => "processing_gain",
            Experiment::Cfar => "cfar",
            Experiment::Interpolation => "interpolation",
            Experiment::Cancellers => "cancellers",
            Experiment::Echo => "echo",
            Experiment::Roc => "roc",
            Experiment::Isolation => "isolation",
        }
    }

    fn uses_rig(self) -> bool {
        matches!(self, Experiment::Cancellers | Experiment::Echo | Experiment::Roc | Experiment::Isolation)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                format!("unknown experiment `{s}` (expected one of {})", names.join(", "))
            })
    }
}

/// Text form of a config value.
pub trait Value: Sized {
    fn parse_value(s: &str) -> Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! display_value {
    ($($t:ty),*) => {$(
        impl Value for $t {
            fn parse_value(s: &str) -> Result<Self, String> {
                s.parse().map_err(|e| format!("`{s}`: {e}"))
            }
            fn render(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

display_value!(f64, usize, u64, bool, String, Experiment);

impl<T: Value> Value for Vec<T> {
    fn parse_value(s: &str) -> Result<Self, String> {
        if s.trim().is_empty() {
            return Ok(Vec::new());
        }
        s.split(',').map(|v| T::parse_value(v.trim())).collect()
    }

    fn render(&self) -> String {
        self.iter().map(Value::render).collect::<Vec<_>>().join(", ")
    }
}

/// `lo, hi`
impl Value for (f64, f64) {
    fn parse_value(s: &str) -> Result<Self, String> {
        match Vec::<f64>::parse_value(s)?.as_slice() {
            [a, b] => Ok((*a, *b)),
            _ => Err(format!("`{s}`: expected two comma-separated numbers")),
        }
    }

    fn render(&self) -> String {
        format!("{}, {}", self.0, self.1)
    }
}

/// `none` or a number.
impl Value for Option<f64> {
    fn parse_value(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("none") {
            Ok(None)
        } else {
            f64::parse_value(s).map(Some)
        }
    }

    fn render(&self) -> String {
        self.map_or_else(|| "none".to_string(), |v| v.to_string())
    }
}

impl Value for Window {
    fn parse_value(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "rectangular" | "rect" => Ok(Window::Rectangular),
            "hamming" => Ok(Window::Hamming),
            _ => Err(format!("unknown window `{s}` (rectangular, hamming)")),
        }
    }

    fn render(&self) -> String {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hamming => "hamming",
        }
        .to_string()
    }
}

impl Value for UpdateMode {
    fn parse_value(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "block" => Ok(UpdateMode::BlockAveraged),
            "sample" => Ok(UpdateMode::SampleWise),
            _ => Err(format!("unknown update mode `{s}` (block, sample)")),
        }
    }

    fn render(&self) -> String {
        match self {
            UpdateMode::BlockAveraged => "block",
            UpdateMode::SampleWise => "sample",
        }
        .to_string()
    }
}

/// Target list `d:v, d:v, ...` in metres and m/s.
#[derive(Clone, Debug, PartialEq)]
pub struct Targets(pub Vec<(f64, f64)>);

impl Value for Targets {
    fn parse_value(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|item| {
                let (d, v) = item
                    .split_once(':')
                    .ok_or_else(|| format!("`{}`: expected distance:velocity", item.trim()))?;
                Ok((f64::parse_value(d.trim())?, f64::parse_value(v.trim())?))
            })
            .collect::<Result<_, String>>()
            .map(Targets)
    }

    fn render(&self) -> String {
        self.0.iter().map(|(d, v)| format!("{d}:{v}")).collect::<Vec<_>>().join(", ")
    }
}

/// Reads one section, tracking which keys were used.
struct Reader {
    section: &'static str,
    entries: BTreeMap<String, String>,
}

impl Reader {
    fn new(ini: &mut Ini, section: &'static str) -> Self {
        Self {
            section,
            entries: ini.take_section(section),
        }
    }

    fn field(&self, key: &str) -> String {
        format!("{}.{key}", self.section)
    }

    fn required<T: Value>(&mut self, key: &str) -> Result<T, CliError> {
        let raw = self
            .entries
            .remove(key)
            .ok_or_else(|| CliError::config(format!("missing field `{}`", self.field(key))))?;
        T::parse_value(&raw).map_err(|e| CliError::config(format!("field `{}`: {e}", self.field(key))))
    }

    fn optional<T: Value>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        match self.entries.contains_key(key) {
            true => self.required(key),
            false => Ok(default),
        }
    }

    fn finish(self) -> Result<(), CliError> {
        match self.entries.keys().next() {
            Some(k) => Err(CliError::config(format!("unknown field `{}`", self.field(k)))),
            None => Ok(()),
        }
    }
}

#[derive(Default)]
struct Writer(Ini);

impl Writer {
    fn put<T: Value>(&mut self, section: &str, key: &str, v: &T) {
        self.0.set(section, key, &v.render());
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSection {
    pub experiment: Experiment,
    pub seed: u64,
    /// Output directory.
    pub out: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadarSection {
    pub numerology: String,
    pub symbols: usize,
    pub carrier_hz: f64,
    pub window: Window,
    pub pfa_total: f64,
    pub noise_variance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdRmseSection {
    pub snr_db: Vec<f64>,
    pub trials: usize,
    /// Fraction of active grid entries; 1 gives the full mask.
    pub mask_density: f64,
    pub distance_m: (f64, f64),
    pub velocity_mps: (f64, f64),
    /// Multipath power relative to the target (dB); `none` disables it.
    pub clutter_power_db: Option<f64>,
    pub clutter_delay_spread_s: f64,
    pub clutter_paths: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskingSection {
    pub targets: Targets,
    pub target_snr_db: f64,
    pub si_levels_db: Vec<f64>,
    pub si_delay_s: f64,
    pub guard_cells: usize,
    pub training_cells: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProcessingGainSection {
    pub trials: usize,
    pub snr_db: f64,
    pub target_s: usize,
    pub target_r: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CfarSection {
    pub trials: usize,
    pub mask_density: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationSection {
    pub trials: usize,
    pub mask_density: f64,
    pub snr_db: f64,
    pub distance_m: (f64, f64),
    pub velocity_mps: (f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CancellerSection {
    pub oversample: usize,
    pub si_to_noise_db: f64,
    pub pa_dbc: Option<f64>,
    pub rf_delays_s: Vec<f64>,
    pub rf_step: f64,
    pub rf_block: usize,
    pub rf_iterations: usize,
    pub order: usize,
    pub pre: usize,
    pub post: usize,
    pub step: f64,
    pub mode: UpdateMode,
    /// 0 adapts over the whole capture.
    pub block: usize,
    pub iterations: usize,
    pub epsilon_rel: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EchoSection {
    pub distance_m: f64,
    pub snr_db: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocSection {
    pub trials: usize,
    pub target_distance_m: f64,
    pub target_snr_db: f64,
    pub clutter_distance_m: f64,
    pub clutter_snr_db: f64,
    pub clutter_power_db: f64,
    pub clutter_delay_spread_s: f64,
    pub clutter_paths: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsolationSection {
    pub taps_each_side: Vec<usize>,
    pub orders: Vec<usize>,
    pub fit_samples: usize,
}

/// Experiment-specific parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum Params {
    PdRmse(PdRmseSection),
    Masking(MaskingSection),
    ProcessingGain(ProcessingGainSection),
    Cfar(CfarSection),
    Interpolation(InterpolationSection),
    Cancellers(CancellerSection),
    Echo(CancellerSection, EchoSection),
    Roc(CancellerSection, RocSection),
    Isolation(CancellerSection, IsolationSection),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub run: RunSection,
    pub radar: RadarSection,
    pub params: Params,
}

fn mask_policy(density: f64) -> MaskPolicy {
    if density >= 1.0 {
        MaskPolicy::Full
    } else {
        MaskPolicy::UniformRandom { density }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        Self::from_ini(Ini::parse(text)?)
    }

    pub fn from_ini(mut ini: Ini) -> Result<Self, CliError> {
        let mut r = Reader::new(&mut ini, "run");
        let run = RunSection {
            experiment: r.required("experiment")?,
            seed: r.optional("seed", 0)?,
            out: r.optional("out", "out".to_string())?,
        };
        r.finish()?;
        let exp = run.experiment;

        let mut r = Reader::new(&mut ini, "radar");
        let numerology: String = r.required("numerology")?;
        let preset = Numerology::from_name(&numerology).map_err(|e| CliError::config(format!("field `radar.numerology`: {e}")))?;
        let default_symbols = if exp.uses_rig() { 14 } else { preset.ofdm_symbols };
        let default_window = match exp {
            Experiment::Interpolation => Window::Hamming,
            e if e.uses_rig() => Window::Hamming,
            _ => Window::Rectangular,
        };
        let radar = RadarSection {
            numerology,
            symbols: r.optional("symbols", default_symbols)?,
            carrier_hz: r.optional("carrier_hz", preset.carrier_freq_hz)?,
            window: r.optional("window", default_window)?,
            pfa_total: r.optional("pfa_total", 0.1)?,
            noise_variance: r.optional("noise_variance", 1.0)?,
        };
        r.finish()?;

        let params = match exp {
            Experiment::PdRmse => {
                let mut r = Reader::new(&mut ini, "pd_rmse");
                let clutter = Clutter::default();
                let p = PdRmseSection {
                    snr_db: r.required("snr_db")?,
                    trials: r.optional("trials", 500)?,
                    mask_density: r.optional("mask_density", 0.9)?,
                    distance_m: r.optional("distance_m", (20.0, 200.0))?,
                    velocity_mps: r.optional("velocity_mps", (-40.0, 40.0))?,
                    clutter_power_db: r.optional("clutter_power_db", Some(clutter.power_rel_db))?,
                    clutter_delay_spread_s: r.optional("clutter_delay_spread_s", clutter.rms_delay_spread_s)?,
                    clutter_paths: r.optional("clutter_paths", clutter.num_paths)?,
                };
                r.finish()?;
                Params::PdRmse(p)
            }
            Experiment::Masking => {
                let d = MaskingConfig::new().map_err(CliError::Core)?;
                let mut r = Reader::new(&mut ini, "masking");
                let p = MaskingSection {
                    targets: r.optional("targets", Targets(d.targets))?,
                    target_snr_db: r.optional("target_snr_db", d.target_snr_db)?,
                    si_levels_db: r.optional("si_levels_db", d.si_levels_db)?,
                    si_delay_s: r.optional("si_delay_s", d.si_delay_s)?,
                    guard_cells: r.optional("guard_cells", d.guard_cells)?,
                    training_cells: r.optional("training_cells", d.training_cells)?,
                };
                r.finish()?;
                Params::Masking(p)
            }
            Experiment::ProcessingGain => {
                let mut r = Reader::new(&mut ini, "processing_gain");
                let p = ProcessingGainSection {
                    trials: r.optional("trials", 100)?,
                    snr_db: r.optional("snr_db", -20.0)?,
                    target_s: r.optional("target_s", 10)?,
                    target_r: r.optional_i64("target_r", 0)?,
                };
                r.finish()?;
                Params::ProcessingGain(p)
            }
            Experiment::Cfar => {
                let mut r = Reader::new(&mut ini, "cfar");
                let p = CfarSection {
                    trials: r.optional("trials", 1000)?,
                    mask_density: r.optional("mask_density", 1.0)?,
                };
                r.finish()?;
                Params::Cfar(p)
            }
            Experiment::Interpolation => {
                let mut r = Reader::new(&mut ini, "interpolation");
                let p = InterpolationSection {
                    trials: r.optional("trials", 20)?,
                    mask_density: r.optional("mask_density", 0.9)?,
                    snr_db: r.optional("snr_db", 20.0)?,
                    distance_m: r.optional("distance_m", (20.0, 200.0))?,
                    velocity_mps: r.optional("velocity_mps", (15.0, 40.0))?,
                };
                r.finish()?;
                Params::Interpolation(p)
            }
            Experiment::Cancellers => Params::Cancellers(read_canceller(&mut ini)?),
            Experiment::Echo => {
                let c = read_canceller(&mut ini)?;
                let mut r = Reader::new(&mut ini, "echo");
                let p = EchoSection {
                    distance_m: r.optional("distance_m", 60.0)?,
                    snr_db: r.optional("snr_db", 0.0)?,
                };
                r.finish()?;
                Params::Echo(c, p)
            }
            Experiment::Roc => {
                let c = read_canceller(&mut ini)?;
                let mut r = Reader::new(&mut ini, "roc");
                let d = RocConfig::new().map_err(CliError::Core)?;
                let p = RocSection {
                    trials: r.optional("trials", d.trials)?,
                    target_distance_m: r.optional("target_distance_m", d.target_distance_m)?,
                    target_snr_db: r.optional("target_snr_db", d.target_snr_db)?,
                    clutter_distance_m: r.optional("clutter_distance_m", d.clutter_distance_m)?,
                    clutter_snr_db: r.optional("clutter_snr_db", d.clutter_snr_db)?,
                    clutter_power_db: r.optional("clutter_power_db", d.clutter.power_rel_db)?,
                    clutter_delay_spread_s: r.optional("clutter_delay_spread_s", d.clutter.rms_delay_spread_s)?,
                    clutter_paths: r.optional("clutter_paths", d.clutter.num_paths)?,
                };
                r.finish()?;
                Params::Roc(c, p)
            }
            Experiment::Isolation => {
                let c = read_canceller(&mut ini)?;
                let mut r = Reader::new(&mut ini, "isolation");
                let d = IsolationConfig::new().map_err(CliError::Core)?;
                let p = IsolationSection {
                    taps_each_side: r.optional("taps_each_side", d.taps_each_side)?,
                    orders: r.optional("orders", d.orders)?,
                    fit_samples: r.optional("fit_samples", d.fit_samples)?,
                };
                r.finish()?;
                Params::Isolation(c, p)
            }
        };
        if let Some(extra) = ini.section_names().next() {
            return Err(CliError::config(format!("section `[{extra}]` is not used by experiment `{exp}`")));
        }
        let cfg = Config { run, radar, params };
        cfg.numerology()?;
        Ok(cfg)
    }

    /// Complete config text; parses back to `self`.
    pub fn dump(&self) -> String {
        let mut w = Writer::default();
        w.put("run", "experiment", &self.run.experiment);
        w.put("run", "seed", &self.run.seed);
        w.put("run", "out", &self.run.out);
        let r = &self.radar;
        w.put("radar", "numerology", &r.numerology);
        w.put("radar", "symbols", &r.symbols);
        w.put("radar", "carrier_hz", &r.carrier_hz);
        w.put("radar", "window", &r.window);
        w.put("radar", "pfa_total", &r.pfa_total);
        w.put("radar", "noise_variance", &r.noise_variance);
        match &self.params {
            Params::PdRmse(p) => {
                let s = "pd_rmse";
                w.put(s, "snr_db", &p.snr_db);
                w.put(s, "trials", &p.trials);
                w.put(s, "mask_density", &p.mask_density);
                w.put(s, "distance_m", &p.distance_m);
                w.put(s, "velocity_mps", &p.velocity_mps);
                w.put(s, "clutter_power_db", &p.clutter_power_db);
                w.put(s, "clutter_delay_spread_s", &p.clutter_delay_spread_s);
                w.put(s, "clutter_paths", &p.clutter_paths);
            }
            Params::Masking(p) => {
                let s = "masking";
                w.put(s, "targets", &p.targets);
                w.put(s, "target_snr_db", &p.target_snr_db);
                w.put(s, "si_levels_db", &p.si_levels_db);
                w.put(s, "si_delay_s", &p.si_delay_s);
                w.put(s, "guard_cells", &p.guard_cells);
                w.put(s, "training_cells", &p.training_cells);
            }
            Params::ProcessingGain(p) => {
                let s = "processing_gain";
                w.put(s, "trials", &p.trials);
                w.put(s, "snr_db", &p.snr_db);
                w.put(s, "target_s", &p.target_s);
                w.0.set(s, "target_r", &p.target_r.to_string());
            }
            Params::Cfar(p) => {
                w.put("cfar", "trials", &p.trials);
                w.put("cfar", "mask_density", &p.mask_density);
            }
            Params::Interpolation(p) => {
                let s = "interpolation";
                w.put(s, "trials", &p.trials);
                w.put(s, "mask_density", &p.mask_density);
                w.put(s, "snr_db", &p.snr_db);
                w.put(s, "distance_m", &p.distance_m);
                w.put(s, "velocity_mps", &p.velocity_mps);
            }
            Params::Cancellers(c) => write_canceller(&mut w, c),
            Params::Echo(c, p) => {
                write_canceller(&mut w, c);
                w.put("echo", "distance_m", &p.distance_m);
                w.put("echo", "snr_db", &p.snr_db);
            }
            Params::Roc(c, p) => {
                write_canceller(&mut w, c);
                let s = "roc";
                w.put(s, "trials", &p.trials);
                w.put(s, "target_distance_m", &p.target_distance_m);
                w.put(s, "target_snr_db", &p.target_snr_db);
                w.put(s, "clutter_distance_m", &p.clutter_distance_m);
                w.put(s, "clutter_snr_db", &p.clutter_snr_db);
                w.put(s, "clutter_power_db", &p.clutter_power_db);
                w.put(s, "clutter_delay_spread_s", &p.clutter_delay_spread_s);
                w.put(s, "clutter_paths", &p.clutter_paths);
            }
            Params::Isolation(c, p) => {
                write_canceller(&mut w, c);
                w.put("isolation", "taps_each_side", &p.taps_each_side);
                w.put("isolation", "orders", &p.orders);
                w.put("isolation", "fit_samples", &p.fit_samples);
            }
        }
        w.0.render()
    }

    pub fn numerology(&self) -> Result<Numerology, CliError> {
        let r = &self.radar;
        Numerology::from_name(&r.numerology)
            .and_then(|n| n.with_symbols(r.symbols))
            .and_then(|n| n.with_carrier(r.carrier_hz))
            .map_err(|e| CliError::config(format!("section `[radar]`: {e}")))
    }

    pub fn pd_rmse(&self, p: &PdRmseSection) -> Result<PdRmseConfig, CliError> {
        let mut cfg = PdRmseConfig::new(self.numerology()?);
        cfg.mask = mask_policy(p.mask_density);
        cfg.snr_db = p.snr_db.clone();
        cfg.trials = p.trials;
        cfg.seed = self.run.seed;
        cfg.window = self.radar.window;
        cfg.pfa_total = self.radar.pfa_total;
        cfg.distance_m = p.distance_m;
        cfg.velocity_mps = p.velocity_mps;
        cfg.clutter = p
            .clutter_power_db
            .map(|db| Clutter::new(db, p.clutter_delay_spread_s, p.clutter_paths));
        cfg.noise_variance = self.radar.noise_variance;
        Ok(cfg)
    }

    pub fn masking(&self, p: &MaskingSection) -> Result<MaskingConfig, CliError> {
        let mut cfg = MaskingConfig::new().map_err(CliError::Core)?;
        cfg.numerology = self.numerology()?;
        cfg.targets = p.targets.0.clone();
        cfg.target_snr_db = p.target_snr_db;
        cfg.si_levels_db = p.si_levels_db.clone();
        cfg.si_delay_s = p.si_delay_s;
        cfg.window = self.radar.window;
        cfg.pfa_total = self.radar.pfa_total;
        cfg.noise_variance = self.radar.noise_variance;
        cfg.seed = self.run.seed;
        cfg.guard_cells = p.guard_cells;
        cfg.training_cells = p.training_cells;
        Ok(cfg)
    }

    pub fn processing_gain(&self, p: &ProcessingGainSection) -> Result<ProcessingGainConfig, CliError> {
        let mut cfg = ProcessingGainConfig::new(self.numerology()?);
        cfg.trials = p.trials;
        cfg.seed = self.run.seed;
        cfg.snr_db = p.snr_db;
        cfg.target_bin = (p.target_s, p.target_r as isize);
        cfg.noise_variance = self.radar.noise_variance;
        Ok(cfg)
    }

    pub fn cfar(&self, p: &CfarSection) -> Result<CfarConfig, CliError> {
        let mut cfg = CfarConfig::new(self.numerology()?);
        cfg.mask = mask_policy(p.mask_density);
        cfg.window = self.radar.window;
        cfg.trials = p.trials;
        cfg.seed = self.run.seed;
        cfg.pfa_total = self.radar.pfa_total;
        cfg.noise_variance = self.radar.noise_variance;
        Ok(cfg)
    }

    pub fn interpolation(&self, p: &InterpolationSection) -> Result<InterpolationConfig, CliError> {
        let mut cfg = InterpolationConfig::new(self.numerology()?);
        cfg.density = p.mask_density;
        cfg.trials = p.trials;
        cfg.seed = self.run.seed;
        cfg.snr_db = p.snr_db;
        cfg.distance_m = p.distance_m;
        cfg.velocity_mps = p.velocity_mps;
        cfg.noise_variance = self.radar.noise_variance;
        cfg.window = self.radar.window;
        Ok(cfg)
    }

    pub fn rig(&self, c: &CancellerSection) -> Result<SiRig, CliError> {
        let mut rig = SiRig::for_numerology(self.numerology()?, c.oversample).map_err(config_error)?;
        rig.si_to_noise_db = c.si_to_noise_db;
        rig.pa_dbc = c.pa_dbc;
        rig.noise_variance = self.radar.noise_variance;
        rig.window = self.radar.window;
        rig.rf.delays_s = c.rf_delays_s.clone();
        rig.rf.step = c.rf_step;
        rig.rf.block_len = c.rf_block;
        rig.rf.iterations = c.rf_iterations;
        let d = &mut rig.digital;
        d.order = c.order;
        d.pre = c.pre;
        d.post = c.post;
        d.step = c.step;
        d.mode = c.mode;
        d.block_len = (c.block > 0).then_some(c.block);
        d.iterations = c.iterations;
        d.epsilon_rel = c.epsilon_rel;
        rig.validate().map_err(config_error)?;
        Ok(rig)
    }

    pub fn roc(&self, c: &CancellerSection, p: &RocSection) -> Result<RocConfig, CliError> {
        let mut cfg = RocConfig::new().map_err(CliError::Core)?;
        cfg.rig = self.rig(c)?;
        cfg.trials = p.trials;
        cfg.seed = self.run.seed;
        cfg.target_distance_m = p.target_distance_m;
        cfg.target_snr_db = p.target_snr_db;
        cfg.clutter_distance_m = p.clutter_distance_m;
        cfg.clutter_snr_db = p.clutter_snr_db;
        cfg.clutter = Clutter::new(p.clutter_power_db, p.clutter_delay_spread_s, p.clutter_paths);
        Ok(cfg)
    }

    pub fn isolation(&self, c: &CancellerSection, p: &IsolationSection) -> Result<IsolationConfig, CliError> {
        let mut cfg = IsolationConfig::new().map_err(CliError::Core)?;
        cfg.rig = self.rig(c)?;
        cfg.taps_each_side = p.taps_each_side.clone();
        cfg.orders = p.orders.clone();
        cfg.fit_samples = p.fit_samples;
        cfg.seed = self.run.seed;
        Ok(cfg)
    }
}

fn config_error(e: ofdm_radar::Error) -> CliError {
    CliError::config(format!("section `[canceller]`: {e}"))
}

impl Reader {
    fn optional_i64(&mut self, key: &str, default: i64) -> Result<i64, CliError> {
        match self.entries.remove(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|e| CliError::config(format!("field `{}`: `{raw}`: {e}", self.field(key)))),
        }
    }
}

fn read_canceller(ini: &mut Ini) -> Result<CancellerSection, CliError> {
    let d = SiRig::new().map_err(CliError::Core)?;
    let mut r = Reader::new(ini, "canceller");
    let c = CancellerSection {
        oversample: r.optional("oversample", d.oversample)?,
        si_to_noise_db: r.optional("si_to_noise_db", d.si_to_noise_db)?,
        pa_dbc: r.optional("pa_dbc", d.pa_dbc)?,
        rf_delays_s: r.optional("rf_delays_s", d.rf.delays_s.clone())?,
        rf_step: r.optional("rf_step", d.rf.step)?,
        rf_block: r.optional("rf_block", d.rf.block_len)?,
        rf_iterations: r.optional("rf_iterations", d.rf.iterations)?,
        order: r.optional("order", d.digital.order)?,
        pre: r.optional("pre", d.digital.pre)?,
        post: r.optional("post", d.digital.post)?,
        step: r.optional("step", d.digital.step)?,
        mode: r.optional("mode", d.digital.mode)?,
        block: r.optional("block", d.digital.block_len.unwrap_or(0))?,
        iterations: r.optional("iterations", d.digital.iterations)?,
        epsilon_rel: r.optional("epsilon_rel", d.digital.epsilon_rel)?,
    };
    r.finish()?;
    Ok(c)
}

fn write_canceller(w: &mut Writer, c: &CancellerSection) {
    let s = "canceller";
    w.put(s, "oversample", &c.oversample);
    w.put(s, "si_to_noise_db", &c.si_to_noise_db);
    w.put(s, "pa_dbc", &c.pa_dbc);
    w.put(s, "rf_delays_s", &c.rf_delays_s);
    w.put(s, "rf_step", &c.rf_step);
    w.put(s, "rf_block", &c.rf_block);
    w.put(s, "rf_iterations", &c.rf_iterations);
    w.put(s, "order", &c.order);
    w.put(s, "pre", &c.pre);
    w.put(s, "post", &c.post);
    w.put(s, "step", &c.step);
    w.put(s, "mode", &c.mode);
    w.put(s, "block", &c.block);
    w.put(s, "iterations", &c.iterations);
    w.put(s, "epsilon_rel", &c.epsilon_rel);
}
