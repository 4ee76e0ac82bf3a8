//! File formats: radar images, axis sidecars, graymaps, CSV tables and
//! canceller state.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ofdm_radar::canceller::{DigitalCanceller, MemoryPolynomial, RfCanceller, UpdateMode};
use ofdm_radar::radarproc::RadarImage;
use ofdm_radar::C64;

use crate::config::Value;
use crate::CliError;

pub const IMAGE_MAGIC: &[u8; 4] = b"OFRD";
const HEADER_LEN: usize = 16;

/// Dynamic range of rendered images below the peak (dB).
pub const RENDER_FLOOR_DB: f64 = -60.0;

/// Decoded radar image file.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageFile {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl ImageFile {
    pub fn from_image(img: &RadarImage) -> Self {
        Self {
            rows: img.rows(),
            cols: img.cols(),
            values: img.values.clone(),
        }
    }

    /// 16-byte little-endian header (magic, rows, cols, reserved) then
    /// row-major `f64` values.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.values.len());
        out.extend_from_slice(IMAGE_MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.cols as u32).to_le_bytes());
        out.extend_from_slice(&0u32.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CliError> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != IMAGE_MAGIC {
            return Err(CliError::Format("not a radar image (bad magic or short header)".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes")) as usize;
        let (rows, cols) = (word(4), word(8));
        let expected = rows
            .checked_mul(cols)
            .and_then(|n| n.checked_mul(8))
            .and_then(|n| n.checked_add(HEADER_LEN));
        if expected != Some(bytes.len()) {
            return Err(CliError::Format(format!(
                "header declares {rows}x{cols} values but the file has {} bytes",
                bytes.len()
            )));
        }
        let values = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Self { rows, cols, values })
    }

    /// 8-bit binary graymap, row 0 at the top, dB-scaled with the floor at
    /// [`RENDER_FLOOR_DB`] below the peak. An all-zero image renders black.
    pub fn to_pgm(&self) -> Vec<u8> {
        let peak = self.values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
        let mut out = format!("P5\n{} {}\n255\n", self.cols, self.rows).into_bytes();
        out.extend(self.values.iter().map(|&v| {
            if peak <= 0.0 || v.is_nan() || v <= 0.0 {
                return 0u8;
            }
            let rel = (10.0 * (v / peak).log10()).max(RENDER_FLOOR_DB);
            (255.0 * (rel - RENDER_FLOOR_DB) / -RENDER_FLOOR_DB).round().clamp(0.0, 255.0) as u8
        }));
        out
    }
}

/// Axis calibration: row `s` is at `s * distance_per_bin_m`, column `c` at
/// `(c - r_max) * velocity_per_bin_mps`.
#[derive(Clone, Debug, PartialEq)]
pub struct Axes {
    pub rows: usize,
    pub cols: usize,
    pub r_max: usize,
    pub distance_per_bin_m: f64,
    pub velocity_per_bin_mps: f64,
}

impl Axes {
    pub fn from_image(img: &RadarImage) -> Self {
        Self {
            rows: img.rows(),
            cols: img.cols(),
            r_max: img.space.r_max,
            distance_per_bin_m: img.distance_per_bin_m,
            velocity_per_bin_mps: img.velocity_per_bin_mps,
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "rows = {}", self.rows);
        let _ = writeln!(s, "cols = {}", self.cols);
        let _ = writeln!(s, "row_axis = distance_m");
        let _ = writeln!(s, "col_axis = velocity_mps");
        let _ = writeln!(s, "r_max = {}", self.r_max);
        let _ = writeln!(s, "distance_per_bin_m = {}", self.distance_per_bin_m);
        let _ = writeln!(s, "velocity_per_bin_mps = {}", self.velocity_per_bin_mps);
        let _ = writeln!(s, "distance_max_m = {}", (self.rows.max(1) - 1) as f64 * self.distance_per_bin_m);
        let _ = writeln!(s, "velocity_min_mps = {}", -(self.r_max as f64) * self.velocity_per_bin_mps);
        let _ = writeln!(s, "velocity_max_mps = {}", self.r_max as f64 * self.velocity_per_bin_mps);
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let kv = key_values(text)?;
        let get = |k: &str| {
            kv.get(k)
                .ok_or_else(|| CliError::Format(format!("axis file lacks `{k}`")))
        };
        let num = |k: &str| -> Result<f64, CliError> {
            get(k)?.parse().map_err(|_| CliError::Format(format!("axis field `{k}` is not a number")))
        };
        let int = |k: &str| -> Result<usize, CliError> {
            get(k)?.parse().map_err(|_| CliError::Format(format!("axis field `{k}` is not an integer")))
        };
        Ok(Self {
            rows: int("rows")?,
            cols: int("cols")?,
            r_max: int("r_max")?,
            distance_per_bin_m: num("distance_per_bin_m")?,
            velocity_per_bin_mps: num("velocity_per_bin_mps")?,
        })
    }
}

fn key_values(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::Format(format!("expected `key = value`, got `{l}`")))
        })
        .collect()
}

/// Comma-separated table with a header row.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.text.push_str(&fields.join(","));
        self.text.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Shortest round-trip float text; non-finite values are written as `NaN`,
/// `inf` or `-inf`.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        v.to_string()
    }
}

fn complex_text(v: C64) -> String {
    format!("{},{}", v.re, v.im)
}

fn parse_complex(s: &str) -> Result<C64, CliError> {
    let bad = || CliError::Format(format!("`{s}` is not an `re,im` pair"));
    let (re, im) = s.split_once(',').ok_or_else(bad)?;
    Ok(C64::new(re.trim().parse().map_err(|_| bad())?, im.trim().parse().map_err(|_| bad())?))
}

/// Saved canceller weights.
#[derive(Clone, Debug, PartialEq)]
pub enum CancellerState {
    Rf(RfCanceller),
    Digital(DigitalCanceller),
}

impl CancellerState {
    pub fn render(&self) -> String {
        let mut s = String::new();
        match self {
            CancellerState::Rf(rf) => {
                let _ = writeln!(s, "kind = rf");
                let _ = writeln!(s, "delays = {}", rf.delays().to_vec().render());
                let _ = writeln!(s, "step = {}", rf.step());
                for (i, w) in rf.weights().iter().enumerate() {
                    let _ = writeln!(s, "c{i} = {}", complex_text(*w));
                }
            }
            CancellerState::Digital(dc) => {
                let m = dc.model();
                let _ = writeln!(s, "kind = digital");
                let _ = writeln!(s, "order = {}", m.order);
                let _ = writeln!(s, "pre = {}", m.pre);
                let _ = writeln!(s, "post = {}", m.post);
                let _ = writeln!(s, "step = {}", dc.step());
                let _ = writeln!(s, "mode = {}", dc.mode().render());
                for (i, h) in dc.coeffs().iter().enumerate() {
                    let _ = writeln!(s, "h{i} = {}", complex_text(*h));
                }
            }
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let kv = key_values(text)?;
        let get = |k: &str| -> Result<&str, CliError> {
            kv.get(k)
                .map(String::as_str)
                .ok_or_else(|| CliError::Format(format!("state file lacks `{k}`")))
        };
        let parse = |k: &str| -> Result<f64, CliError> {
            get(k)?.parse().map_err(|_| CliError::Format(format!("state field `{k}` is not a number")))
        };
        let int = |k: &str| -> Result<usize, CliError> {
            get(k)?.parse().map_err(|_| CliError::Format(format!("state field `{k}` is not an integer")))
        };
        let coeffs = |prefix: &str, n: usize| -> Result<Vec<C64>, CliError> {
            (0..n).map(|i| parse_complex(get(&format!("{prefix}{i}"))?)).collect()
        };
        match get("kind")? {
            "rf" => {
                let delays = Vec::<usize>::parse_value(get("delays")?).map_err(CliError::Format)?;
                let mut rf = RfCanceller::from_samples(delays.clone(), parse("step")?).map_err(CliError::Core)?;
                rf.set_weights(&coeffs("c", delays.len())?).map_err(CliError::Core)?;
                Ok(CancellerState::Rf(rf))
            }
            "digital" => {
                let model = MemoryPolynomial::new(int("order")?, int("pre")?, int("post")?).map_err(CliError::Core)?;
                let mode = UpdateMode::parse_value(get("mode")?).map_err(CliError::Format)?;
                let mut dc = DigitalCanceller::new(model, parse("step")?, mode).map_err(CliError::Core)?;
                dc.set_coeffs(&coeffs("h", model.num_coeffs())?).map_err(CliError::Core)?;
                Ok(CancellerState::Digital(dc))
            }
            other => Err(CliError::Format(format!("unknown canceller kind `{other}`"))),
        }
    }
}
