//! Experiment dispatch and artifact writing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ofdm_radar::canceller::TrainingLog;
use ofdm_radar::experiments::{
    run_canceller_suite, run_cfar_calibration, run_echo_preservation, run_interpolation_check,
    run_isolation_sweep, run_pd_rmse_sweep, run_processing_gain, run_roc, run_si_masking, MaskingImage, RocPoint,
};
use ofdm_radar::radarproc::RadarImage;

use crate::config::{Config, Params};
use crate::export::{num, Axes, CancellerState, Csv, ImageFile};
use crate::{sha256_hex, CliError, OutDir};

/// Summary of a finished run; also written as `manifest.txt`.
#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub tool: String,
    pub experiment: String,
    pub config_sha256: String,
    pub duration_s: f64,
    /// `(file name, sha256)` for every artifact except the manifest.
    pub artifacts: Vec<(String, String)>,
    pub out_dir: PathBuf,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool = {}", self.tool);
        let _ = writeln!(s, "experiment = {}", self.experiment);
        let _ = writeln!(s, "config_sha256 = {}", self.config_sha256);
        let _ = writeln!(s, "duration_s = {:.3}", self.duration_s);
        for (name, hash) in &self.artifacts {
            let _ = writeln!(s, "artifact = {name} {hash}");
        }
        s
    }
}

/// Runs the configured experiment and writes its artifacts, the resolved
/// config (`config.ini`) and `manifest.txt` into `out` (default: the
/// config's `run.out`).
pub fn run_experiment(cfg: &Config, out: Option<&Path>) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let root = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from(&cfg.run.out));
    let dump = cfg.dump();
    let mut dir = OutDir::create(&root)?;
    dir.write("config.ini", dump.as_bytes())?;

    match &cfg.params {
        Params::PdRmse(p) => {
            let pts = run_pd_rmse_sweep(&cfg.pd_rmse(p)?)?;
            let mut csv = Csv::new(&[
                "snr_db",
                "detection_probability",
                "distance_rmse_m",
                "velocity_rmse_mps",
                "trials_detected",
                "trials",
            ]);
            for p in pts {
                csv.row(&[
                    num(p.snr_db),
                    num(p.detection_probability),
                    num(p.distance_rmse_m),
                    num(p.velocity_rmse_mps),
                    p.trials_detected.to_string(),
                    p.trials.to_string(),
                ]);
            }
            dir.write("pd_rmse.csv", &csv.into_bytes())?;
        }
        Params::Masking(p) => {
            let res = run_si_masking(&cfg.masking(p)?)?;
            let mut csv = Csv::new(&[
                "image",
                "si_db",
                "distance_m",
                "velocity_mps",
                "s",
                "r",
                "peak",
                "background",
                "peak_to_background_db",
                "local_threshold",
                "detected",
            ]);
            let mut images = vec![("masking_reference".to_string(), &res.reference)];
            images.extend(res.images.iter().map(|m| (format!("masking_si{}", num(m.si_db.unwrap_or(f64::NAN))), m)));
            for (name, m) in &images {
                write_image(&mut dir, name, &m.image)?;
                masking_rows(&mut csv, name, m);
            }
            dir.write("masking_metrics.csv", &csv.into_bytes())?;
            let mut summary = Csv::new(&["threshold", "noise_mean"]);
            summary.row(&[num(res.threshold), num(res.noise_mean)]);
            dir.write("masking_threshold.csv", &summary.into_bytes())?;
        }
        Params::ProcessingGain(p) => {
            let g = run_processing_gain(&cfg.processing_gain(p)?)?;
            let mut csv = Csv::new(&["theoretical_db", "measured_db", "output_snr_db"]);
            csv.row(&[num(g.theoretical_db), num(g.measured_db), num(g.output_snr_db)]);
            dir.write("processing_gain.csv", &csv.into_bytes())?;
        }
        Params::Cfar(p) => {
            let c = run_cfar_calibration(&cfg.cfar(p)?)?;
            let mut csv = Csv::new(&[
                "threshold",
                "trials",
                "false_alarms",
                "frame_rate",
                "bin_exceedances",
                "bins_tested",
                "expected_bin_rate",
            ]);
            csv.row(&[
                num(c.threshold),
                c.trials.to_string(),
                c.false_alarms.to_string(),
                num(c.frame_rate),
                c.bin_exceedances.to_string(),
                c.bins_tested.to_string(),
                num(c.expected_bin_rate),
            ]);
            dir.write("cfar.csv", &csv.into_bytes())?;
        }
        Params::Interpolation(p) => {
            let c = run_interpolation_check(&cfg.interpolation(p)?)?;
            let mut csv = Csv::new(&[
                "interpolated_peak_db",
                "zero_filled_peak_db",
                "floor_rise_db",
                "interpolated_floor_db",
            ]);
            csv.row(&[
                num(c.interpolated_peak_db),
                num(c.zero_filled_peak_db),
                num(c.floor_rise_db),
                num(c.interpolated_floor_db),
            ]);
            dir.write("interpolation.csv", &csv.into_bytes())?;
        }
        Params::Cancellers(c) => {
            let s = run_canceller_suite(&cfg.rig(c)?, cfg.run.seed)?;
            let mut csv = Csv::new(&["metric", "value"]);
            for (k, v) in [
                ("rf_suppression_db", s.rf_suppression_db),
                ("rf_residual_db", s.rf_residual_db),
                ("nonlinear_residual_db", s.nonlinear_residual_db),
                ("linear_residual_db", s.linear_residual_db),
                ("adaptive_vs_ls", s.adaptive_vs_ls),
            ] {
                csv.row(&[k.to_string(), num(v)]);
            }
            dir.write("cancellers.csv", &csv.into_bytes())?;
            dir.write("rf_training.csv", &log_csv(&s.rf_log))?;
            dir.write("digital_training.csv", &log_csv(&s.digital_log))?;
            dir.write("rf_state.txt", CancellerState::Rf(s.rf).render().as_bytes())?;
            dir.write("digital_state.txt", CancellerState::Digital(s.digital).render().as_bytes())?;
        }
        Params::Echo(c, p) => {
            let e = run_echo_preservation(&cfg.rig(c)?, p.distance_m, p.snr_db, cfg.run.seed)?;
            let mut csv = Csv::new(&["retained_fraction", "delay_samples", "peak_reference", "peak_cancelled"]);
            csv.row(&[
                num(e.retained_fraction),
                e.delay_samples.to_string(),
                num(e.peak_reference),
                num(e.peak_cancelled),
            ]);
            dir.write("echo.csv", &csv.into_bytes())?;
        }
        Params::Roc(c, p) => {
            let r = run_roc(&cfg.roc(c, p)?)?;
            let mut csv = Csv::new(&["curve", "threshold", "pfa", "pd"]);
            roc_rows(&mut csv, "rf_only", &r.rf_only);
            roc_rows(&mut csv, "cascade", &r.cascade);
            dir.write("roc.csv", &csv.into_bytes())?;
            let mut stats = Csv::new(&["trial", "hypothesis", "rf_only", "cascade"]);
            for (h, rf, cas) in [("H0", &r.rf_only_h0, &r.cascade_h0), ("H1", &r.rf_only_h1, &r.cascade_h1)] {
                for (i, (a, b)) in rf.iter().zip(cas.iter()).enumerate() {
                    stats.row(&[i.to_string(), h.to_string(), num(*a), num(*b)]);
                }
            }
            dir.write("roc_statistics.csv", &stats.into_bytes())?;
        }
        Params::Isolation(c, p) => {
            let pts = run_isolation_sweep(&cfg.isolation(c, p)?)?;
            let mut csv = Csv::new(&["order", "taps_each_side", "total_taps", "residual_db", "digital_isolation_db"]);
            for p in pts {
                csv.row(&[
                    p.order.to_string(),
                    p.taps_each_side.to_string(),
                    (2 * p.taps_each_side + 1).to_string(),
                    num(p.residual_db),
                    num(p.digital_isolation_db),
                ]);
            }
            dir.write("isolation.csv", &csv.into_bytes())?;
        }
    }

    let manifest = Manifest {
        tool: format!("ofdr {}", env!("CARGO_PKG_VERSION")),
        experiment: cfg.run.experiment.to_string(),
        config_sha256: sha256_hex(dump.as_bytes()),
        duration_s: start.elapsed().as_secs_f64(),
        artifacts: dir.written().to_vec(),
        out_dir: dir.root().to_path_buf(),
    };
    dir.write("manifest.txt", manifest.render().as_bytes())?;
    Ok(manifest)
}

fn write_image(dir: &mut OutDir, name: &str, img: &RadarImage) -> Result<(), CliError> {
    dir.write(&format!("{name}.ofrd"), &ImageFile::from_image(img).encode())?;
    dir.write(&format!("{name}.axes"), Axes::from_image(img).render().as_bytes())?;
    Ok(())
}

fn masking_rows(csv: &mut Csv, name: &str, m: &MaskingImage) {
    for t in &m.targets {
        csv.row(&[
            name.to_string(),
            m.si_db.map_or_else(|| "none".to_string(), num),
            num(t.distance_m),
            num(t.velocity_mps),
            t.s.to_string(),
            t.r.to_string(),
            num(t.peak),
            num(t.background),
            num(t.peak_to_background_db),
            num(t.local_threshold),
            t.detected.to_string(),
        ]);
    }
}

fn roc_rows(csv: &mut Csv, curve: &str, points: &[RocPoint]) {
    for p in points {
        csv.row(&[curve.to_string(), num(p.threshold), num(p.pfa), num(p.pd)]);
    }
}

fn log_csv(log: &TrainingLog) -> Vec<u8> {
    let mut csv = Csv::new(&["block", "power"]);
    for (i, p) in log.block_power.iter().enumerate() {
        csv.row(&[i.to_string(), num(*p)]);
    }
    csv.into_bytes()
}
