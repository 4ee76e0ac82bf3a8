use std::f64::consts::PI;

use ofdm_radar::radarproc::{
    detect_and_estimate, interpolate_grid, Periodogram, ProcessedGrid, ProcessingMode, SearchSpace, Window,
};
use ofdm_radar::scene::{apply_scene_grid, apply_scene_time, Scene, Target};
use ofdm_radar::signal::{downsample, upsample};
use ofdm_radar::waveform::{demodulate, generate_tx_grid, modulate, ActivityMask, MaskPolicy, Numerology, ResourceGrid};
use ofdm_radar::C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn num(s: usize, r: usize) -> Numerology {
    Numerology::custom(30e3, 2.3e-6, s, r, 3.5e9).unwrap()
}

fn random_data(len: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn processed(numerology: &Numerology, data: Vec<C64>, mask: ActivityMask) -> ProcessedGrid {
    ProcessedGrid {
        numerology: numerology.clone(),
        data,
        mask,
        mode: ProcessingMode::Quotient,
        interpolated: false,
    }
}

#[allow(clippy::needless_range_loop)]
fn brute_force(g: &ProcessedGrid, window: Window, sp: usize, rp: usize, space: SearchSpace) -> Vec<f64> {
    let (s, r) = (g.subcarriers(), g.symbols());
    let (wp, wq) = (window.coefficients(s), window.coefficients(r));
    let mut out = Vec::new();
    for si in 0..space.s_max {
        for ri in -(space.r_max as isize)..=space.r_max as isize {
            let mut acc = C64::new(0.0, 0.0);
            for q in 0..r {
                let mut inner = C64::new(0.0, 0.0);
                for p in 0..s {
                    let ph = 2.0 * PI * (p * si) as f64 / sp as f64;
                    inner += g.get(p, q) * wp[p] * wq[q] * C64::from_polar(1.0, ph);
                }
                let ph = -2.0 * PI * q as f64 * ri as f64 / rp as f64;
                acc += inner * C64::from_polar(1.0, ph);
            }
            out.push(acc.norm_sqr());
        }
    }
    out
}

fn window_strategy() -> impl Strategy<Value = Window> {
    prop_oneof![Just(Window::Rectangular), Just(Window::Hamming)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn periodogram_matches_direct_sum(
        s in 2usize..=16, r in 2usize..=16, pad_s in 0usize..6, pad_r in 0usize..6,
        window in window_strategy(), seed in any::<u64>(),
    ) {
        let numerology = num(s, r);
        let (sp, rp) = (s + pad_s, r + pad_r);
        let space = SearchSpace::new(sp, (rp - 1) / 2);
        let g = processed(&numerology, random_data(s * r, seed), ActivityMask::full(s, r));
        let img = Periodogram::new(&numerology, window, sp, rp, space).unwrap().compute(&g).unwrap();
        let direct = brute_force(&g, window, sp, rp, space);
        let scale = direct.iter().cloned().fold(0.0, f64::max);
        for (a, b) in img.values.iter().zip(&direct) {
            prop_assert!((a - b).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn modem_round_trip_is_exact(s in 4usize..80, r in 1usize..6, seed in any::<u64>()) {
        let numerology = num(s, r);
        let grid = ResourceGrid {
            numerology: numerology.clone(),
            data: random_data(s * r, seed),
            mask: ActivityMask::full(s, r),
        };
        let back = demodulate(&modulate(&grid).unwrap(), &numerology).unwrap();
        let norm = grid.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in back.data.iter().zip(&grid.data) {
            prop_assert!((a - b).norm() <= 1e-12 * norm);
        }
    }

    #[test]
    fn grid_generation_is_pure(s in 4usize..64, r in 2usize..10, density in 0.5f64..1.0, seed in any::<u64>()) {
        let numerology = num(s, r);
        let policy = MaskPolicy::UniformRandom { density };
        prop_assert_eq!(
            generate_tx_grid(&numerology, &policy, seed).unwrap(),
            generate_tx_grid(&numerology, &policy, seed).unwrap()
        );
    }

    #[test]
    fn interpolation_keeps_active_bins_and_is_exact_on_lines(
        s in 1usize..12, r in 3usize..20, seed in any::<u64>(),
    ) {
        let numerology = num(s.max(2), r);
        let s = numerology.active_subcarriers;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // rows with at least two active symbols
        let mask = loop {
            let bits = (0..s * r).map(|_| rng.random_bool(0.7)).collect();
            let m = ActivityMask::from_vec(s, r, bits).unwrap();
            if (0..s).all(|p| m.row_active_count(p) >= 2) {
                break m;
            }
        };
        let slopes = random_data(2 * s, seed ^ 1);
        let line: Vec<C64> = (0..r)
            .flat_map(|q| (0..s).map(move |p| (p, q)))
            .map(|(p, q)| slopes[2 * p] + slopes[2 * p + 1] * q as f64)
            .collect();
        let data: Vec<C64> = line
            .iter()
            .enumerate()
            .map(|(i, v)| if mask.is_active(i % s, i / s) { *v } else { C64::new(0.0, 0.0) })
            .collect();
        let out = interpolate_grid(&processed(&numerology, data.clone(), mask.clone())).unwrap();
        for p in 0..s {
            let active: Vec<usize> = (0..r).filter(|&q| mask.is_active(p, q)).collect();
            let (first, last) = (active[0], *active.last().unwrap());
            for q in 0..r {
                let v = out.get(p, q);
                prop_assert!(v.re.is_finite() && v.im.is_finite());
                if mask.is_active(p, q) {
                    prop_assert_eq!(v, data[q * s + p]);
                } else if q > first && q < last {
                    prop_assert!((v - line[q * s + p]).norm() < 1e-12 * (1.0 + line[q * s + p].norm()));
                } else {
                    let edge = if q < first { first } else { last };
                    prop_assert_eq!(v, data[edge * s + p]);
                }
            }
        }
    }

    #[test]
    fn full_mask_interpolation_is_identity(s in 2usize..12, r in 1usize..12, seed in any::<u64>()) {
        let numerology = num(s, r);
        let g = processed(&numerology, random_data(s * r, seed), ActivityMask::full(s, r));
        prop_assert_eq!(interpolate_grid(&g).unwrap().data, g.data);
    }

    #[test]
    fn window_swap_keeps_on_grid_argmax(s0 in 0usize..8, r0 in -3isize..=3, phase in 0.0..std::f64::consts::TAU) {
        let numerology = num(64, 16);
        let space = SearchSpace::new(8, 3);
        let tx = generate_tx_grid(&numerology, &MaskPolicy::Full, 1).unwrap();
        let target = Target::new(
            C64::from_polar(1.0, phase),
            s0 as f64 / (64.0 * numerology.subcarrier_spacing_hz),
            r0 as f64 / (16.0 * numerology.symbol_duration_s()),
        );
        let rx = apply_scene_grid(&tx, &Scene { targets: vec![target], ..Default::default() }, 1).unwrap();
        let g = ofdm_radar::radarproc::process_grids(&tx, &rx, ProcessingMode::Quotient).unwrap();
        for window in [Window::Rectangular, Window::Hamming] {
            let img = Periodogram::new(&numerology, window, 64, 16, space).unwrap().compute(&g).unwrap();
            let (s, r, _) = img.argmax();
            prop_assert_eq!((s, r), (s0, r0));
            let det = detect_and_estimate(&img, 0.0).unwrap();
            prop_assert!((det.distance_m - s0 as f64 * img.distance_per_bin_m).abs() < 1e-9);
            prop_assert!((det.velocity_mps - r0 as f64 * img.velocity_per_bin_mps).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_channel_is_linear_in_targets(
        d1 in 0.0f64..200.0, v1 in -30.0f64..30.0, d2 in 0.0f64..200.0, v2 in -30.0f64..30.0, seed in any::<u64>(),
    ) {
        let numerology = num(48, 8);
        let tx = generate_tx_grid(&numerology, &MaskPolicy::Full, seed).unwrap();
        let fc = numerology.carrier_freq_hz;
        let a = Target::at_range(C64::new(0.7, 0.2), d1, v1, fc);
        let b = Target::at_range(C64::new(-0.1, 0.5), d2, v2, fc);
        let run = |targets: Vec<Target>| apply_scene_grid(&tx, &Scene { targets, ..Default::default() }, seed).unwrap().data;
        let both = run(vec![a, b]);
        for ((x, y), z) in run(vec![a]).iter().zip(run(vec![b])).zip(&both) {
            prop_assert!((x + y - z).norm() < 1e-12);
        }
    }

    #[test]
    fn time_and_grid_paths_agree_on_sample_grid(
        d in 0usize..4, oversample in prop::sample::select(vec![1usize, 2, 4]), seed in any::<u64>(),
    ) {
        let numerology = num(100, 3).with_fft_size(256).unwrap();
        let tx = generate_tx_grid(&numerology, &MaskPolicy::Full, seed).unwrap();
        let delay = d as f64 / numerology.sample_rate_hz();
        let scene = Scene { targets: vec![Target::new(C64::new(0.8, -0.3), delay, 0.0)], ..Default::default() };
        let grid = apply_scene_grid(&tx, &scene, seed).unwrap();
        let frame = apply_scene_time(&modulate(&tx).unwrap(), &scene, oversample, seed).unwrap();
        let time = demodulate(&frame, &numerology).unwrap();
        let norm = grid.data.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for (a, b) in time.data.iter().zip(&grid.data) {
            prop_assert!((a - b).norm() <= 1e-9 * norm);
        }
    }

    #[test]
    fn resampling_pair_is_exact(len in 1usize..200, factor in 1usize..6, seed in any::<u64>()) {
        let x = random_data(len, seed);
        let back = downsample(&upsample(&x, factor), factor);
        for (a, b) in back.iter().zip(&x) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn noise_statistics() {
    let numerology = num(256, 64);
    let tx = generate_tx_grid(&numerology, &MaskPolicy::Full, 3).unwrap();
    let sigma2 = 2.5;
    let rx = apply_scene_grid(&tx, &Scene { noise_variance: sigma2, ..Default::default() }, 3).unwrap();
    let n = rx.data.len() as f64;
    for part in [|v: &C64| v.re, |v: &C64| v.im] {
        let vals: Vec<f64> = rx.data.iter().map(part).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let half = sigma2 / 2.0;
        assert!(mean.abs() < 4.0 * half.sqrt() / n.sqrt());
        assert!((var - half).abs() < 5.0 * half * (2.0 / n).sqrt());
    }
}
