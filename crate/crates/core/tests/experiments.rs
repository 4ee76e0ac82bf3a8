use ofdm_radar::experiments::{run_cfar_calibration, run_pd_rmse_sweep, CfarConfig, PdRmseConfig};
use ofdm_radar::waveform::Numerology;

fn small() -> Numerology {
    Numerology::custom(30e3, 2.3e-6, 120, 32, 3.5e9).unwrap()
}

#[test]
fn detection_probability_is_monotone_in_snr() {
    let mut cfg = PdRmseConfig::new(small());
    cfg.trials = 200;
    cfg.snr_db = (0..10).map(|i| -36.0 + 2.0 * i as f64).collect();
    let pts = run_pd_rmse_sweep(&cfg).unwrap();
    for w in pts.windows(2) {
        let p = w[0].detection_probability;
        let se = (p * (1.0 - p) / cfg.trials as f64).sqrt();
        assert!(w[1].detection_probability >= p - 2.0 * se, "{pts:?}");
    }
    assert!(pts[0].detection_probability < pts[pts.len() - 1].detection_probability);
}

#[test]
fn per_bin_exceedance_matches_design_rate() {
    let mut cfg = CfarConfig::new(small());
    cfg.trials = 400;
    cfg.pfa_total = 0.999;
    let out = run_cfar_calibration(&cfg).unwrap();
    let n = out.bins_tested as f64;
    let p = out.expected_bin_rate;
    let expected = n * p;
    let sigma = (n * p * (1.0 - p)).sqrt();
    let got = out.bin_exceedances as f64;
    assert!((got - expected).abs() <= 4.0 * sigma, "got {got}, expected {expected} +- {sigma}");
}

#[test]
fn sweeps_are_bitwise_reproducible() {
    let mut cfg = PdRmseConfig::new(small());
    cfg.trials = 30;
    cfg.snr_db = vec![-30.0, -20.0];
    let a = run_pd_rmse_sweep(&cfg).unwrap();
    let b = run_pd_rmse_sweep(&cfg).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.detection_probability.to_bits(), y.detection_probability.to_bits());
        assert_eq!(x.distance_rmse_m.to_bits(), y.distance_rmse_m.to_bits());
        assert_eq!(x.velocity_rmse_mps.to_bits(), y.velocity_rmse_mps.to_bits());
    }
}
