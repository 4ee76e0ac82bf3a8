//! Acceptance suite. Each test prints one `PASS` or `FAIL` line for its
//! criterion (written past the test harness capture) and then asserts.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ofdm_radar::experiments::{
    run_canceller_suite, run_cfar_calibration, run_echo_preservation, run_interpolation_check,
    run_isolation_sweep, run_pd_rmse_sweep, run_processing_gain, run_si_masking, CfarConfig, InterpolationConfig,
    IsolationConfig, MaskingConfig, PdRmseConfig, ProcessingGainConfig, SiRig,
};
use ofdm_radar::radarproc::{resolutions, Periodogram, ProcessedGrid, ProcessingMode, SearchSpace, Window};
use ofdm_radar::waveform::{ActivityMask, Numerology, Preset};
use ofdm_radar::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(id: u32, title: &str, ok: bool, detail: &str, start: Instant) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let line = format!(
        "{verdict} criterion {id:>2} ({title}): {detail} [{:.1} s]\n",
        start.elapsed().as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(ok, "criterion {id} failed: {detail}");
}

#[test]
fn criterion_01_resolution_table() {
    let start = Instant::now();
    // (preset, distance resolution, max distance, velocity resolution, max velocity)
    let table = [
        (Preset::Lte20, 8.3, 700.0, 4.2, 64.0),
        (Preset::Nr20, 7.9, 700.0, 4.2, 64.0),
        (Preset::Nr40, 3.9, 350.0, 4.2, 128.0),
        (Preset::Nr100, 1.5, 350.0, 4.2, 128.0),
    ];
    let mut misses = Vec::new();
    for (p, dd, dmax, dv, vmax) in table {
        let num = Numerology::preset(p);
        let r = resolutions(&num, num.active_subcarriers, num.ofdm_symbols);
        for (what, got, want, tol) in [
            ("dd", r.distance_resolution_m, dd, 0.05),
            ("d_max", r.max_distance_m, dmax, 1.0),
            ("dv", r.velocity_resolution_mps, dv, 0.05),
            ("v_max", r.max_velocity_mps, vmax, 1.0),
        ] {
            if (got - want).abs() > tol {
                misses.push(format!("{} {what} {got:.3} vs {want}", p.name()));
            }
        }
    }
    let detail = if misses.is_empty() {
        "all 16 entries within tolerance".to_string()
    } else {
        format!("{} of 16 entries off: {}", misses.len(), misses.join("; "))
    };
    report(1, "resolution table", misses.is_empty() && start.elapsed().as_secs_f64() < 1.0, &detail, start);
}

#[allow(clippy::needless_range_loop)]
fn direct_periodogram(g: &ProcessedGrid, window: Window, sp: usize, rp: usize, space: SearchSpace) -> Vec<f64> {
    let (s, r) = (g.subcarriers(), g.symbols());
    let (wp, wq) = (window.coefficients(s), window.coefficients(r));
    let mut out = Vec::with_capacity(space.size());
    for si in 0..space.s_max {
        for ri in -(space.r_max as isize)..=space.r_max as isize {
            let mut acc = C64::new(0.0, 0.0);
            for q in 0..r {
                for p in 0..s {
                    let phase = 2.0 * PI * ((p * si) as f64 / sp as f64 - (q as f64 * ri as f64) / rp as f64);
                    acc += g.get(p, q) * wp[p] * wq[q] * C64::from_polar(1.0, phase);
                }
            }
            out.push(acc.norm_sqr());
        }
    }
    out
}

#[test]
fn criterion_02_dft_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let cases = 300;
    for _ in 0..cases {
        let (s, r) = (rng.random_range(2..=16), rng.random_range(2..=16));
        let (sp, rp) = (s + rng.random_range(0..8), r + rng.random_range(0..8));
        let window = if rng.random_bool(0.5) { Window::Hamming } else { Window::Rectangular };
        let num = Numerology::custom(30e3, 2.3e-6, s, r, 3.5e9).unwrap();
        let space = SearchSpace::new(rng.random_range(1..=sp), rng.random_range(0..=(rp - 1) / 2));
        let g = ProcessedGrid {
            numerology: num.clone(),
            data: (0..s * r)
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
            mask: ActivityMask::full(s, r),
            mode: ProcessingMode::Quotient,
            interpolated: false,
        };
        let img = Periodogram::new(&num, window, sp, rp, space).unwrap().compute(&g).unwrap();
        let direct = direct_periodogram(&g, window, sp, rp, space);
        let scale = direct.iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
        for (a, b) in img.values.iter().zip(&direct) {
            worst = worst.max((a - b).abs() / scale);
        }
    }
    let ok = worst <= 1e-9 && start.elapsed().as_secs_f64() < 10.0;
    report(2, "DFT oracle", ok, &format!("{cases} random grids, max relative error {worst:.2e}"), start);
}

#[test]
fn criterion_03_processing_gain() {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for name in ["LTE20", "NR40"] {
        let cfg = ProcessingGainConfig::new(Numerology::from_name(name).unwrap());
        let g = run_processing_gain(&cfg).unwrap();
        ok &= (g.measured_db - g.theoretical_db).abs() <= 1.0;
        parts.push(format!("{name} {:.2} dB (expected {:.2})", g.measured_db, g.theoretical_db));
    }
    ok &= start.elapsed().as_secs_f64() < 120.0;
    report(3, "processing gain", ok, &parts.join(", "), start);
}

#[test]
fn criterion_04_cfar_calibration() {
    let start = Instant::now();
    let cfg = CfarConfig::new(Numerology::from_name("NR40").unwrap());
    let c = run_cfar_calibration(&cfg).unwrap();
    let ok = (0.07..=0.13).contains(&c.frame_rate) && start.elapsed().as_secs_f64() < 300.0;
    let detail = format!(
        "NR40, {} frames, frame false-alarm rate {:.3} (target 0.10)",
        c.trials, c.frame_rate
    );
    report(4, "CFAR calibration", ok, &detail, start);
}

#[test]
fn criterion_05_detection_sweep() {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    let mut pd_35 = Vec::new();
    for name in ["NR20", "NR40", "NR100"] {
        let num = Numerology::from_name(name).unwrap();
        let cfg = PdRmseConfig::new(num.clone());
        assert_eq!(cfg.trials, 500);
        let pts = run_pd_rmse_sweep(&cfg).unwrap();
        let at = |snr: f64| pts.iter().find(|p| p.snr_db == snr).unwrap();
        let r = resolutions(&num, num.active_subcarriers, num.ofdm_symbols);
        let hi = at(-10.0);
        let d_floor = r.distance_resolution_m / 12f64.sqrt();
        let v_floor = r.velocity_resolution_mps / 12f64.sqrt();
        let d_ok = (hi.distance_rmse_m / d_floor - 1.0).abs() <= 0.25;
        let v_ok = (hi.velocity_rmse_mps / v_floor - 1.0).abs() <= 0.25;
        ok &= d_ok && v_ok;
        if name == "NR100" {
            ok &= at(-30.0).detection_probability >= 0.9;
        }
        pd_35.push(at(-35.0).detection_probability);
        parts.push(format!(
            "{name}: P_D(-30)={:.3} P_D(-35)={:.3} d_rmse {:.3}/{:.3} v_rmse {:.3}/{:.3}",
            at(-30.0).detection_probability,
            at(-35.0).detection_probability,
            hi.distance_rmse_m,
            d_floor,
            hi.velocity_rmse_mps,
            v_floor
        ));
    }
    // NR100 >= NR40 >= NR20
    ok &= pd_35[2] >= pd_35[1] && pd_35[1] >= pd_35[0];
    report(5, "detection sweep", ok, &parts.join("; "), start);
}

#[test]
fn criterion_06_si_masking() {
    let start = Instant::now();
    let cfg = MaskingConfig::new().unwrap();
    let res = run_si_masking(&cfg).unwrap();
    let level = |db: f64| res.images.iter().find(|m| m.si_db == Some(db)).unwrap();
    // the static target of the three
    let k = cfg.targets.iter().position(|&(_, v)| v == 0.0).unwrap();
    let (d, _) = cfg.targets[k];
    let masked_70 = !level(70.0).targets[k].detected;
    let all_30 = level(30.0).targets.iter().all(|t| t.detected);
    let pbr: Vec<f64> = [30.0, 50.0, 70.0].iter().map(|&l| level(l).targets[k].peak_to_background_db).collect();
    let monotone = pbr[0] > pbr[1] && pbr[1] > pbr[2];
    let ok = masked_70 && all_30 && monotone && start.elapsed().as_secs_f64() < 120.0;
    let detail = format!(
        "static target at {d} m: masked at 70 dB = {masked_70}, all detected at 30 dB = {all_30}, \
         PBR 30/50/70 dB = {:.2}/{:.2}/{:.2} dB",
        pbr[0], pbr[1], pbr[2]
    );
    report(6, "SI masking", ok, &detail, start);
}

#[test]
fn criterion_07_interpolation() {
    let start = Instant::now();
    let cfg = InterpolationConfig::new(Numerology::from_name("NR40").unwrap());
    let c = run_interpolation_check(&cfg).unwrap();
    let ok = c.interpolated_peak_db.abs() <= 0.5 && c.floor_rise_db >= 3.0 && start.elapsed().as_secs_f64() < 120.0;
    let detail = format!(
        "density {}, interpolated peak {:+.2} dB vs full mask, zero-fill floor rise {:.1} dB",
        cfg.density, c.interpolated_peak_db, c.floor_rise_db
    );
    report(7, "interpolation", ok, &detail, start);
}

#[test]
fn criterion_08_canceller_suite() {
    let start = Instant::now();
    let rig = SiRig::new().unwrap();
    let s = run_canceller_suite(&rig, 0).unwrap();
    let a = s.rf_suppression_db >= 50.0;
    let b = s.nonlinear_residual_db <= 3.0 && s.linear_residual_db - s.nonlinear_residual_db >= 15.0;
    let d = s.adaptive_vs_ls <= 1e-3;

    let mut iso = IsolationConfig::new().unwrap();
    iso.rig = rig;
    let pts = run_isolation_sweep(&iso).unwrap();
    let at = |m: usize| {
        pts.iter()
            .find(|p| p.order == 11 && p.taps_each_side == m)
            .unwrap()
            .residual_db
    };
    let base = at(5);
    let beyond = pts
        .iter()
        .filter(|p| p.order == 11 && p.taps_each_side > 5)
        .map(|p| base - p.residual_db)
        .fold(f64::NEG_INFINITY, f64::max);
    let c = beyond <= 1.0;
    let ok = a && b && c && d && start.elapsed().as_secs_f64() < 600.0;
    let detail = format!(
        "(a) RF {:.1} dB; (b) cascade {:+.2} dB over noise, linear {:+.2} dB; \
         (c) best gain beyond 5+5 {:.2} dB; (d) adaptive vs LS {:.1e}",
        s.rf_suppression_db, s.nonlinear_residual_db, s.linear_residual_db, beyond, s.adaptive_vs_ls
    );
    report(8, "canceller suite", ok, &detail, start);
}

#[test]
fn criterion_09_echo_preservation() {
    let start = Instant::now();
    let rig = SiRig::new().unwrap();
    let e = run_echo_preservation(&rig, 60.0, 0.0, 0).unwrap();
    let span = rig.digital.pre.max(rig.digital.post);
    let ok = e.delay_samples > span && e.retained_fraction >= 0.95 && start.elapsed().as_secs_f64() < 120.0;
    let detail = format!(
        "echo at {} samples (canceller span {span}), retained {:.3} of the SI-free peak",
        e.delay_samples, e.retained_fraction
    );
    report(9, "echo preservation", ok, &detail, start);
}

fn ofdr(args: &[&str], cwd: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_ofdr"))
        .args(args)
        .current_dir(cwd)
        .env_remove("OFRD_THREADS")
        .status()
        .expect("binary runs")
        .success()
}

/// Artifact name and bytes, excluding the manifest (it records wall time).
fn artifacts(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.txt")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn criterion_10_determinism() {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let runs: [(&str, &[&str]); 9] = [
        ("pd_rmse", &["pd_rmse.snr_db=-35,-25,-15", "pd_rmse.trials=40"]),
        ("masking", &["radar.symbols=140"]),
        ("processing_gain", &["processing_gain.trials=20"]),
        ("cfar", &["cfar.trials=50"]),
        ("interpolation", &["interpolation.trials=4"]),
        ("cancellers", &["canceller.rf_iterations=4000"]),
        ("echo", &["canceller.rf_iterations=4000"]),
        ("roc", &["roc.trials=8", "canceller.rf_iterations=4000"]),
        ("isolation", &["isolation.taps_each_side=1,5", "canceller.rf_iterations=4000"]),
    ];
    let mut differing = Vec::new();
    let mut files = 0;
    for (exp, sets) in runs {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = format!("{exp}_{rep}");
            let mut args = vec!["run", exp, "--set", "radar.numerology=NR40", "--seed", "11", "--out", &out];
            for s in sets {
                args.extend(["--set", s]);
            }
            assert!(ofdr(&args, tmp.path()), "{exp} failed");
            outputs.push(artifacts(&tmp.path().join(&out)));
        }
        files += outputs[0].len();
        if outputs[0] != outputs[1] {
            differing.push(exp);
        }
    }
    let ok = differing.is_empty();
    let detail = if ok {
        format!("9 experiments run twice, {files} artifacts bitwise identical")
    } else {
        format!("outputs differ for {}", differing.join(", "))
    };
    report(10, "determinism", ok, &detail, start);
}
