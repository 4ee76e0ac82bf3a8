//! Front-end for the OFDM radar simulator: configuration files, experiment
//! dispatch and artifact export.

pub mod config;
pub mod export;
pub mod ini;
mod run;

use std::fmt::Write as _;
use std::path::{Component, Path, PathBuf};

use ofdm_radar::radarproc::resolutions;
use ofdm_radar::waveform::{Numerology, Preset};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{Config, Experiment};
pub use export::{Axes, CancellerState, ImageFile};
pub use run::{run_experiment, Manifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] ofdm_radar::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),
}

impl CliError {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for configuration problems, 3 for numerical failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use ofdm_radar::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Diverged { .. } | E::Singular) => 3,
            CliError::Core(_) => 2,
            CliError::Io { .. } | CliError::Format(_) => 1,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files go only directly under `root`; names with directories or parent
/// references are refused.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    written: Vec<(String, String)>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let mut parts = Path::new(name).components();
        if !matches!((parts.next(), parts.next()), (Some(Component::Normal(_)), None)) {
            return Err(CliError::Format(format!("refusing to write `{name}` outside the output directory")));
        }
        let path = self.root.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.written.push((name.to_string(), sha256_hex(bytes)));
        Ok(path)
    }

    /// `(file name, sha256)` in write order.
    pub fn written(&self) -> &[(String, String)] {
        &self.written
    }
}

/// Rows of the resolution and limit table, or all presets when `names` is
/// empty.
pub fn table(names: &[String]) -> Result<String, CliError> {
    let presets: Vec<Preset> = if names.is_empty() {
        Preset::ALL.to_vec()
    } else {
        names.iter().map(|n| n.parse::<Preset>()).collect::<Result<_, _>>()?
    };
    let mut out = format!(
        "{:<8}{:>14}{:>16}{:>14}{:>16}\n",
        "preset", "delta_d_m", "delta_v_mps", "d_max_m", "v_max_mps"
    );
    for p in presets {
        let num = Numerology::preset(p);
        let r = resolutions(&num, num.active_subcarriers, num.ofdm_symbols);
        let _ = writeln!(
            out,
            "{:<8}{:>14.2}{:>16.2}{:>14.1}{:>16}",
            p.name(),
            r.distance_resolution_m,
            r.velocity_resolution_mps,
            r.max_distance_m,
            format!("+-{:.1}", r.max_velocity_mps),
        );
    }
    Ok(out)
}

/// Renders an image file to `<stem>.pgm` plus `<stem>.pgm.axes` in `out`
/// (default: the image's directory). Returns the graymap path.
pub fn render(image: &Path, out: Option<&Path>) -> Result<PathBuf, CliError> {
    let bytes = std::fs::read(image).map_err(|e| CliError::io(image, e))?;
    let img = ImageFile::decode(&bytes)?;
    let stem = image
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| CliError::Format(format!("{}: no usable file name", image.display())))?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => image.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let mut dir = OutDir::create(&dir)?;

    let sidecar = image.with_extension("axes");
    let mut axes_text = match std::fs::read_to_string(&sidecar) {
        Ok(text) => {
            let axes = Axes::parse(&text)?;
            if (axes.rows, axes.cols) != (img.rows, img.cols) {
                return Err(CliError::Format(format!(
                    "{} describes {}x{} but the image is {}x{}",
                    sidecar.display(),
                    axes.rows,
                    axes.cols,
                    img.rows,
                    img.cols
                )));
            }
            axes.render()
        }
        Err(_) => format!("rows = {}\ncols = {}\nrow_axis = index\ncol_axis = index\n", img.rows, img.cols),
    };
    let peak = img.values.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
    let _ = writeln!(axes_text, "floor_db = {}", export::RENDER_FLOOR_DB);
    let _ = writeln!(axes_text, "peak = {peak}");
    let pgm = dir.write(&format!("{stem}.pgm"), &img.to_pgm())?;
    dir.write(&format!("{stem}.pgm.axes"), axes_text.as_bytes())?;
    Ok(pgm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        let all = table(&[]).unwrap();
        assert_eq!(all.lines().count(), 5);
        let two = table(&["LTE20".into(), "NR100".into()]).unwrap();
        assert_eq!(two.lines().count(), 3);
        let nr40 = table(&["NR40".into()]).unwrap();
        let row: Vec<&str> = nr40.lines().nth(1).unwrap().split_whitespace().collect();
        assert_eq!(row[0], "NR40");
        assert_eq!(row[1], "3.93");
        assert_eq!(row[4], "+-128.5");
        assert!(matches!(table(&["NR7".into()]), Err(CliError::Core(_))));
    }

    #[test]
    fn out_dir_refuses_escapes() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutDir::create(tmp.path()).unwrap();
        assert!(out.write("../x.csv", b"").is_err());
        assert!(out.write("sub/x.csv", b"").is_err());
        assert!(out.write("/tmp/x.csv", b"").is_err());
        out.write("ok.csv", b"a").unwrap();
        assert_eq!(out.written().len(), 1);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::config("x").exit_code(), 2);
        let div = ofdm_radar::Error::Diverged { block: 3, growth_db: 30.0 };
        assert_eq!(CliError::Core(div).exit_code(), 3);
        assert_eq!(CliError::Format("x".into()).exit_code(), 1);
    }
}
