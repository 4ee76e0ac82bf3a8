//! Achievable digital isolation versus memory depth, with linear and
//! nonlinear models fitted by least squares behind the RF canceller.

use rayon::prelude::*;

use super::SiRig;
use crate::canceller::{ls_oracle, Basis, DigitalCanceller, MemoryPolynomial, UpdateMode};
use crate::signal::db;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct IsolationConfig {
    pub rig: SiRig,
    /// Taps on each side of the current sample.
    pub taps_each_side: Vec<usize>,
    /// Polynomial orders to compare (odd).
    pub orders: Vec<usize>,
    /// Samples used for the least-squares fit; the residual is measured over
    /// the whole capture.
    pub fit_samples: usize,
    pub seed: u64,
}

impl IsolationConfig {
    pub fn new() -> Result<Self> {
        Ok(Self {
            rig: SiRig::new()?,
            taps_each_side: vec![0, 1, 2, 3, 5, 7, 10],
            orders: vec![1, 11],
            fit_samples: 32_768,
            seed: 0,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IsolationPoint {
    pub taps_each_side: usize,
    pub order: usize,
    /// Occupied-band residual over the noise (dB).
    pub residual_db: f64,
    /// Isolation added on top of the RF canceller (dB).
    pub digital_isolation_db: f64,
}

pub fn run_isolation_sweep(cfg: &IsolationConfig) -> Result<Vec<IsolationPoint>> {
    let rig = &cfg.rig;
    rig.validate()?;
    if cfg.taps_each_side.is_empty() || cfg.orders.is_empty() {
        return Err(Error::param("taps_each_side", "sweep is empty"));
    }
    let cap = rig.capture(&[], None, cfg.seed)?;
    let (rf, _) = rig.train_rf(&cap)?;
    let after_rf = rf.cancel(&cap.capture.rx(), &cap.capture.pa_out)?;
    let fit = cfg.fit_samples.min(after_rf.len());
    let noise = rig.passband_power(&cap.capture.noise);
    let before = rig.passband_power(&after_rf);

    let grid: Vec<(usize, usize)> = cfg
        .orders
        .iter()
        .flat_map(|&p| cfg.taps_each_side.iter().map(move |&m| (p, m)))
        .collect();
    grid.into_par_iter()
        .map(|(order, m)| {
            let model = MemoryPolynomial::new(order, m, m)?;
            let basis = Basis::new(model, &cap.tx_unit);
            let mut dc = DigitalCanceller::new(model, 1.0, UpdateMode::BlockAveraged)?;
            dc.set_coeffs(&ls_oracle(&basis, &after_rf, 0..fit, 0.0)?)?;
            let residual = rig.passband_power(&dc.residual(&basis, &after_rf)?);
            Ok(IsolationPoint {
                taps_each_side: m,
                order,
                residual_db: db(residual / noise),
                digital_isolation_db: db(before / residual),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waveform::Numerology;

    #[test]
    fn nonlinear_beats_linear_and_memory_helps() {
        let mut cfg = IsolationConfig::new().unwrap();
        cfg.rig = SiRig::for_numerology(Numerology::custom(30e3, 2.3e-6, 120, 4, 3.5e9).unwrap(), 4).unwrap();
        cfg.taps_each_side = vec![0, 5];
        cfg.orders = vec![1, 5];
        cfg.fit_samples = usize::MAX;
        let pts = run_isolation_sweep(&cfg).unwrap();
        let get = |p, m| pts.iter().find(|x| x.order == p && x.taps_each_side == m).unwrap().residual_db;
        assert!(get(5, 5) < get(1, 5) - 3.0, "{pts:?}");
        assert!(get(5, 5) < get(5, 0), "{pts:?}");
    }
}
