use std::path::Path;
use std::process::{Command, Output};

use ofdm_radar_cli::{Config, ImageFile};

fn ofdr(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ofdr"))
        .args(args)
        .current_dir(cwd)
        .env_remove("OFRD_THREADS")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_sweep(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("sweep.ini");
    std::fs::write(
        &path,
        "[run]\nexperiment = pd_rmse\nseed = 4\n\n[radar]\nnumerology = NR40\nsymbols = 32\n\n\
         [pd_rmse]\nsnr_db = -30, -20, -10\ntrials = 12\n",
    )
    .unwrap();
    path
}

/// Every file below `dir`, relative.
fn tree(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).unwrap().display().to_string());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn table_defaults_and_selection() {
    let tmp = tempfile::tempdir().unwrap();
    let all = ofdr(&["table"], tmp.path());
    assert!(all.status.success());
    let text = String::from_utf8(all.stdout).unwrap();
    assert_eq!(text.lines().count(), 5);
    for name in ["LTE20", "NR20", "NR40", "NR100"] {
        assert!(text.contains(name));
    }
    let two = ofdr(&["table", "LTE20", "NR100"], tmp.path());
    assert_eq!(String::from_utf8(two.stdout).unwrap().lines().count(), 3);
    let bad = ofdr(&["table", "NR7"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn sweep_writes_csv_and_manifest_inside_out_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_sweep(tmp.path());
    let o = ofdr(&["run", "--config", cfg.to_str().unwrap(), "--out", "results"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));

    let files = tree(tmp.path());
    assert!(files.iter().all(|f| f == "sweep.ini" || f.starts_with("results")), "{files:?}");
    let out = tmp.path().join("results");
    let csv = std::fs::read_to_string(out.join("pd_rmse.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("snr_db,detection_probability,distance_rmse_m,velocity_rmse_mps,trials_detected,trials")
    );
    assert_eq!(lines.count(), 3);

    let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("experiment = pd_rmse"));
    let listed: Vec<&str> = manifest
        .lines()
        .filter_map(|l| l.strip_prefix("artifact = "))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert!(listed.contains(&"pd_rmse.csv") && listed.contains(&"config.ini"));
    for f in listed {
        assert!(out.join(f).is_file(), "{f}");
    }
}

#[test]
fn missing_field_exits_2_with_its_name() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.ini");
    std::fs::write(&path, "[run]\nexperiment = pd_rmse\n[radar]\nnumerology = NR40\n").unwrap();
    let o = ofdr(&["run", "--config", path.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("pd_rmse.snr_db"), "{}", stderr(&o));

    let o = ofdr(&["run", "--config", "nope.ini"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    let o = ofdr(&["run", "masking", "--set", "radar.numerology=NR40", "--set", "masking.bogus=1"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("masking.bogus"));
}

#[test]
fn huge_step_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ofdr(
        &[
            "run",
            "cancellers",
            "--set",
            "radar.numerology=NR40",
            "--set",
            "canceller.rf_step=1e6",
            "--out",
            "d",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("diverged"));
}

#[test]
fn dump_round_trips_through_the_binary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_sweep(tmp.path());
    let o = ofdr(&["dump", "--config", cfg.to_str().unwrap(), "--seed", "9"], tmp.path());
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let parsed = Config::parse(&text).unwrap();
    assert_eq!(parsed.run.seed, 9);
    assert_eq!(parsed.dump(), text);
}

#[test]
fn render_single_peak_and_black_image() {
    let tmp = tempfile::tempdir().unwrap();
    let mut values = vec![1e-3; 20];
    values[13] = 5.0;
    let img = ImageFile { rows: 4, cols: 5, values };
    std::fs::write(tmp.path().join("peak.ofrd"), img.encode()).unwrap();
    std::fs::write(tmp.path().join("zero.ofrd"), ImageFile { rows: 2, cols: 2, values: vec![0.0; 4] }.encode()).unwrap();

    let o = ofdr(&["render", "peak.ofrd", "--out", "png"], tmp.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let pgm = std::fs::read(tmp.path().join("png/peak.pgm")).unwrap();
    let px = &pgm[pgm.len() - 20..];
    let max = *px.iter().max().unwrap();
    assert_eq!(max, 255);
    assert_eq!(px.iter().position(|&v| v == max), Some(13));
    assert!(tmp.path().join("png/peak.pgm.axes").is_file());

    assert!(ofdr(&["render", "zero.ofrd"], tmp.path()).status.success());
    let pgm = std::fs::read(tmp.path().join("zero.pgm")).unwrap();
    assert!(pgm[pgm.len() - 4..].iter().all(|&v| v == 0));

    std::fs::write(tmp.path().join("bad.ofrd"), b"OFRD\x01\0\0\0").unwrap();
    let o = ofdr(&["render", "bad.ofrd"], tmp.path());
    assert!(!o.status.success());
    assert!(!tmp.path().join("bad.pgm").exists());
}

#[test]
fn exported_image_renders_with_axes() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ofdr(
        &[
            "run",
            "masking",
            "--set",
            "radar.numerology=NR40",
            "--set",
            "radar.symbols=32",
            "--set",
            "masking.targets=60:0",
            "--set",
            "masking.si_levels_db=70",
            "--out",
            "m",
        ],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = std::fs::read(tmp.path().join("m/masking_si70.ofrd")).unwrap();
    let img = ImageFile::decode(&bytes).unwrap();
    assert!(ofdr(&["render", "m/masking_si70.ofrd"], tmp.path()).status.success());
    let axes = std::fs::read_to_string(tmp.path().join("m/masking_si70.pgm.axes")).unwrap();
    assert!(axes.contains(&format!("rows = {}", img.rows)));
    assert!(axes.contains("distance_per_bin_m"));
    // SI ridge: the zero-range row holds the strongest pixels
    let pgm = std::fs::read(tmp.path().join("m/masking_si70.pgm")).unwrap();
    let px = &pgm[pgm.len() - img.rows * img.cols..];
    assert!(px[..img.cols].contains(&255));
}

#[test]
fn thread_settings_do_not_change_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_sweep(tmp.path());
    let cfg = cfg.to_str().unwrap();
    assert!(ofdr(&["--threads", "1", "run", "--config", cfg, "--out", "a"], tmp.path()).status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_ofdr"))
        .args(["run", "--config", cfg, "--out", "b"])
        .current_dir(tmp.path())
        .env("OFRD_THREADS", "3")
        .output()
        .unwrap();
    assert!(o.status.success());
    let read = |d: &str| std::fs::read(tmp.path().join(d).join("pd_rmse.csv")).unwrap();
    assert_eq!(read("a"), read("b"));

    let o = Command::new(env!("CARGO_BIN_EXE_ofdr"))
        .args(["run", "--config", cfg, "--out", "c"])
        .current_dir(tmp.path())
        .env("OFRD_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
