use ofdm_radar::canceller::{
    estimate_basis_correlation, ls_oracle, Basis, DigitalCanceller, MemoryPolynomial, RfCanceller, UpdateMode,
};
use ofdm_radar::signal::{circular_delay, complex_gaussian, mean_power};
use ofdm_radar::{Error, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn reference(len: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| complex_gaussian(&mut rng, 1.0)).collect()
}

fn coupled(pa: &[C64], taps: &[(usize, C64)]) -> Vec<C64> {
    let mut rx = vec![C64::new(0.0, 0.0); pa.len()];
    for &(d, g) in taps {
        for (r, v) in rx.iter_mut().zip(circular_delay(pa, d)) {
            *r += g * v;
        }
    }
    rx
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    // Gradient descent on a quadratic with step below 1/λ_max never
    // increases the cost when the block is the whole stationary capture.
    #[test]
    fn rf_whole_block_energy_is_monotone(
        g0 in (-1.0f64..1.0, -1.0f64..1.0), g1 in (-1.0f64..1.0, -1.0f64..1.0), seed in any::<u64>(),
    ) {
        let pa = reference(512, seed);
        let rx = coupled(&pa, &[(0, C64::new(g0.0, g0.1)), (1, C64::new(g1.0, g1.1))]);
        let taps = 3.0;
        let step = 0.5 / (pa.len() as f64 * mean_power(&pa) * taps);
        let mut rf = RfCanceller::from_samples(vec![0, 1, 2], step).unwrap();
        let log = rf.train(&rx, &pa, pa.len(), 60).unwrap();
        for w in log.block_power.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        prop_assert!(log.final_power().unwrap() < 1e-6 * log.initial_power().unwrap().max(1e-300));
    }

    // With the exact correlation of the training block, one self-orthogonalizing
    // step of unit size lands on the least-squares solution.
    #[test]
    fn one_block_step_reaches_least_squares(seed in any::<u64>(), order in prop::sample::select(vec![1usize, 3, 5])) {
        let x = reference(2048, seed);
        let model = MemoryPolynomial::new(order, 1, 2).unwrap();
        let basis = Basis::new(model, &x);
        let truth = reference(model.num_coeffs(), seed ^ 7);
        let mut rx = vec![C64::new(0.0, 0.0); x.len()];
        let mut u = vec![C64::new(0.0, 0.0); basis.len()];
        for (n, r) in rx.iter_mut().enumerate() {
            basis.fill(n, &mut u);
            *r = u.iter().zip(&truth).map(|(a, b)| a * b).sum();
        }
        let mut dc = DigitalCanceller::new(model, 1.0, UpdateMode::BlockAveraged).unwrap();
        dc.set_correlation(&estimate_basis_correlation(&basis, 0..x.len(), 0.0).unwrap()).unwrap();
        dc.train(&basis, &rx, x.len(), 1).unwrap();
        let ls = ls_oracle(&basis, &rx, 0..x.len(), 0.0).unwrap();
        let norm: f64 = ls.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let err: f64 = dc.coeffs().iter().zip(&ls).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(err <= 1e-8 * norm, "relative error {}", err / norm);
        for (a, b) in ls.iter().zip(&truth) {
            prop_assert!((a - b).norm() < 1e-8);
        }
    }
}

#[test]
fn oversized_rf_step_trips_the_guard() {
    let pa = reference(1024, 1);
    let rx = coupled(&pa, &[(0, C64::new(0.5, 0.1))]);
    let mut rf = RfCanceller::from_samples(vec![0, 1], 1.0).unwrap();
    match rf.train(&rx, &pa, 256, 50) {
        Err(Error::Diverged { growth_db, .. }) => assert!(growth_db > 20.0),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn oversized_digital_step_trips_the_guard() {
    let x = reference(2048, 2);
    let model = MemoryPolynomial::new(3, 1, 1).unwrap();
    let basis = Basis::new(model, &x);
    let rx: Vec<C64> = x.iter().map(|v| v * 0.3).collect();
    let mut dc = DigitalCanceller::new(model, 50.0, UpdateMode::BlockAveraged).unwrap();
    assert!(matches!(dc.train(&basis, &rx, 256, 50), Err(Error::Diverged { .. })));
}
