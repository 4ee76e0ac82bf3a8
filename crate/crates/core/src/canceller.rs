//! Self-interference cancellers.
//!
//! [`RfCanceller`] is the baseband equivalent of a short tapped delay line
//! driven by the PA output, with one complex weight per tap adapted by a
//! block gradient rule. [`DigitalCanceller`] models the residual with a
//! memory polynomial of the digital transmit samples and adapts its
//! coefficients with a correlation-preconditioned (self-orthogonalizing)
//! LMS update.
//!
//! All streams are treated as one period of a repeating frame, so tap
//! delays wrap around the buffer the same way the time-domain scene
//! synthesizer does.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::signal::{self, mean_power};
use crate::{Error, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Divergence guard: more than this growth over the last
/// [`GUARD_BLOCKS`] blocks aborts adaptation.
pub const GUARD_GROWTH_DB: f64 = 20.0;
pub const GUARD_BLOCKS: usize = 10;

/// Residual power of each training block, measured before that block's
/// update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub block_power: Vec<f64>,
}

impl TrainingLog {
    pub fn initial_power(&self) -> Option<f64> {
        self.block_power.first().copied()
    }

    pub fn final_power(&self) -> Option<f64> {
        self.block_power.last().copied()
    }

    fn push_guarded(&mut self, power: f64) -> Result<()> {
        let block = self.block_power.len();
        self.block_power.push(power);
        if !power.is_finite() {
            return Err(Error::Diverged { block, growth_db: f64::INFINITY });
        }
        let window = &self.block_power[block.saturating_sub(GUARD_BLOCKS)..block];
        let floor = window.iter().copied().fold(f64::INFINITY, f64::min);
        if floor > 0.0 && floor.is_finite() {
            let growth_db = signal::db(power / floor);
            if growth_db > GUARD_GROWTH_DB {
                return Err(Error::Diverged { block, growth_db });
            }
        }
        Ok(())
    }
}

#[inline]
fn delayed(x: &[C64], n: usize, d: usize) -> C64 {
    let len = x.len();
    x[(n + len - d % len) % len]
}

fn check_len(a: &[C64], b: &[C64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "stream lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn check_block(block: &Range<usize>, len: usize) -> Result<()> {
    if block.is_empty() || block.end > len {
        return Err(Error::param(
            "block",
            format!("{}..{} is empty or exceeds {len} samples", block.start, block.end),
        ));
    }
    Ok(())
}

fn check_step(step: f64) -> Result<()> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        Err(Error::param("step", format!("must be positive, got {step}")))
    }
}

/// Multi-tap RF canceller with complex tap weights on the PA output.
#[derive(Clone, Debug, PartialEq)]
pub struct RfCanceller {
    delays: Vec<usize>,
    weights: Vec<C64>,
    step: f64,
}

impl RfCanceller {
    /// Default tap delays in seconds.
    pub const DEFAULT_DELAYS_S: [f64; 3] = [0.0, 4.17e-9, 10e-9];

    /// Quantizes `delays_s` to the sample grid at `sample_rate_hz`; the
    /// quantized delays must be strictly increasing.
    pub fn new(delays_s: &[f64], sample_rate_hz: f64, step: f64) -> Result<Self> {
        if delays_s.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::param("rf.delays", "delays must be finite and >= 0"));
        }
        let delays = delays_s.iter().map(|d| (d * sample_rate_hz).round() as usize).collect();
        Self::from_samples(delays, step)
    }

    pub fn from_samples(delays: Vec<usize>, step: f64) -> Result<Self> {
        if delays.is_empty() {
            return Err(Error::param("rf.delays", "at least one tap is required"));
        }
        if delays.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param(
                "rf.delays",
                format!("quantized delays {delays:?} are not strictly increasing"),
            ));
        }
        check_step(step)?;
        let weights = vec![ZERO; delays.len()];
        Ok(Self { delays, weights, step })
    }

    pub fn delays(&self) -> &[usize] {
        &self.delays
    }

    pub fn weights(&self) -> &[C64] {
        &self.weights
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn set_step(&mut self, step: f64) -> Result<()> {
        check_step(step)?;
        self.step = step;
        Ok(())
    }

    pub fn set_weights(&mut self, weights: &[C64]) -> Result<()> {
        if weights.len() != self.delays.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} taps",
                weights.len(),
                self.delays.len()
            )));
        }
        if weights.iter().any(|w| !(w.re.is_finite() && w.im.is_finite())) {
            return Err(Error::param("rf.weights", "weights must be finite"));
        }
        self.weights = weights.to_vec();
        Ok(())
    }

    fn check_delays(&self, len: usize) -> Result<()> {
        match self.delays.last() {
            Some(&d) if d >= len => Err(Error::DelayOutOfRange { delay: d, len }),
            _ => Ok(()),
        }
    }

    #[inline]
    fn estimate_at(&self, pa_out: &[C64], n: usize) -> C64 {
        self.delays
            .iter()
            .zip(&self.weights)
            .map(|(&d, &c)| c * delayed(pa_out, n, d))
            .sum()
    }

    /// `rx(n) - Σ_l c_l pa_out(n - d_l)`.
    pub fn cancel(&self, rx: &[C64], pa_out: &[C64]) -> Result<Vec<C64>> {
        check_len(rx, pa_out)?;
        self.check_delays(rx.len())?;
        Ok(rx.iter().enumerate().map(|(n, &r)| r - self.estimate_at(pa_out, n)).collect())
    }

    /// One block update `c_l += μ Σ_n pa_obs*(n - d_l) residual(n)` over
    /// `block`. Returns the per-tap increments.
    pub fn adapt(&mut self, pa_obs: &[C64], residual_obs: &[C64], block: Range<usize>) -> Result<Vec<C64>> {
        check_len(pa_obs, residual_obs)?;
        check_block(&block, pa_obs.len())?;
        self.check_delays(pa_obs.len())?;
        let delta: Vec<C64> = self
            .delays
            .iter()
            .map(|&d| {
                let grad: C64 = block.clone().map(|n| delayed(pa_obs, n, d).conj() * residual_obs[n]).sum();
                grad * self.step
            })
            .collect();
        for (c, dc) in self.weights.iter_mut().zip(&delta) {
            *c += dc;
        }
        Ok(delta)
    }

    /// Cycles through consecutive blocks of `block_len` samples for
    /// `iterations` updates, recomputing the residual of each block with the
    /// current weights.
    pub fn train(&mut self, rx: &[C64], pa_out: &[C64], block_len: usize, iterations: usize) -> Result<TrainingLog> {
        check_len(rx, pa_out)?;
        self.check_delays(rx.len())?;
        if block_len == 0 || block_len > rx.len() {
            return Err(Error::param("block_len", format!("must be in 1..={}", rx.len())));
        }
        let blocks = rx.len() / block_len;
        let mut log = TrainingLog::default();
        let mut residual = vec![ZERO; rx.len()];
        for it in 0..iterations {
            let b = it % blocks;
            let range = b * block_len..(b + 1) * block_len;
            for n in range.clone() {
                residual[n] = rx[n] - self.estimate_at(pa_out, n);
            }
            log.push_guarded(mean_power(&residual[range.clone()]))?;
            self.adapt(pa_out, &residual, range)?;
        }
        Ok(log)
    }
}

/// Odd-order memory polynomial
/// `Σ_{p odd ≤ P} Σ_{k=-pre}^{post} h_{p,k} |x(n-k)|^{p-1} x(n-k)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MemoryPolynomial {
    pub order: usize,
    pub pre: usize,
    pub post: usize,
}

impl MemoryPolynomial {
    pub fn new(order: usize, pre: usize, post: usize) -> Result<Self> {
        if order == 0 || order.is_multiple_of(2) {
            return Err(Error::param("order", format!("must be odd and >= 1, got {order}")));
        }
        Ok(Self { order, pre, post })
    }

    /// Number of odd orders `1, 3, ..., P`.
    pub fn orders(&self) -> usize {
        self.order.div_ceil(2)
    }

    pub fn taps(&self) -> usize {
        self.pre + self.post + 1
    }

    pub fn num_coeffs(&self) -> usize {
        self.orders() * self.taps()
    }

    /// Position of `h_{p,k}` for order index `i` (`p = 2i + 1`) and lag `k`.
    pub fn index(&self, order_idx: usize, k: isize) -> usize {
        order_idx * self.taps() + (k + self.pre as isize) as usize
    }
}

/// Precomputed basis streams `φ_p(x)` for one transmit signal.
#[derive(Clone, Debug)]
pub struct Basis {
    model: MemoryPolynomial,
    phi: Vec<Vec<C64>>,
    /// Per-order gain applied to the raw `φ_p` streams.
    gains: Vec<f64>,
}

impl Basis {
    pub fn new(model: MemoryPolynomial, x: &[C64]) -> Self {
        let mut phi = Vec::with_capacity(model.orders());
        phi.push(x.to_vec());
        for i in 1..model.orders() {
            let prev = &phi[i - 1];
            let next = prev.iter().zip(x).map(|(v, xn)| v * xn.norm_sqr()).collect();
            phi.push(next);
        }
        let gains = vec![1.0; phi.len()];
        Self { model, phi, gains }
    }

    /// Like [`Basis::new`] with every order scaled to unit mean power, so a
    /// uniform regularizer `εI` weighs all orders alike. Coefficients then
    /// refer to the scaled functions.
    pub fn normalized(model: MemoryPolynomial, x: &[C64]) -> Self {
        let mut basis = Self::new(model, x);
        for (stream, gain) in basis.phi.iter_mut().zip(&mut basis.gains) {
            let p = signal::mean_power(stream);
            if p > 0.0 {
                *gain = 1.0 / p.sqrt();
                stream.iter_mut().for_each(|v| *v *= *gain);
            }
        }
        basis
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    /// Maps coefficients for this basis onto the unscaled basis of
    /// [`Basis::new`].
    pub fn to_raw_coeffs(&self, h: &[C64]) -> Vec<C64> {
        let taps = self.model.taps();
        h.iter().enumerate().map(|(i, v)| v * self.gains[i / taps]).collect()
    }

    pub fn model(&self) -> MemoryPolynomial {
        self.model
    }

    pub fn len(&self) -> usize {
        self.phi[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stacked basis vector `u(n)`, entry `index(i, k) = φ_{2i+1}(x(n-k))`.
    pub fn fill(&self, n: usize, u: &mut [C64]) {
        let len = self.len();
        let taps = self.model.taps();
        let pre = self.model.pre;
        for (i, stream) in self.phi.iter().enumerate() {
            let row = &mut u[i * taps..(i + 1) * taps];
            for (j, v) in row.iter_mut().enumerate() {
                // lag k = j - pre, sample index n - k
                *v = stream[(n + pre + len * 2 - j) % len];
            }
        }
    }

    fn dot(&self, n: usize, h: &[C64], u: &mut [C64]) -> C64 {
        self.fill(n, u);
        u.iter().zip(h).map(|(a, b)| a * b).sum()
    }
}

/// Sample correlation `C_ij = mean_n u_i*(n) u_j(n)` of the stacked basis
/// vectors, Hermitian-symmetrized, plus `epsilon I`.
pub fn estimate_basis_correlation(basis: &Basis, range: Range<usize>, epsilon: f64) -> Result<DMatrix<C64>> {
    let k = basis.model.num_coeffs();
    let needed = 10 * k;
    if range.len() < needed || range.end > basis.len() {
        return Err(Error::InsufficientSamples { needed, got: range.len().min(basis.len()) });
    }
    let mut c = DMatrix::<C64>::zeros(k, k);
    let mut u = vec![ZERO; k];
    for n in range.clone() {
        basis.fill(n, &mut u);
        for j in 0..k {
            let uj = u[j];
            for i in 0..=j {
                c[(i, j)] += u[i].conj() * uj;
            }
        }
    }
    let scale = 1.0 / range.len() as f64;
    for j in 0..k {
        for i in 0..=j {
            let v = c[(i, j)] * scale;
            c[(i, j)] = v;
            c[(j, i)] = v.conj();
        }
        c[(j, j)] = C64::new(c[(j, j)].re + epsilon, 0.0);
    }
    Ok(c)
}

/// Regularized least-squares memory-polynomial fit of `rx` over `range`:
/// minimizes `mean |rx(n) - u(n)ᵀh|² + epsilon·‖h‖²`, the stationary point
/// of the adaptive rule with `C + εI`. Solved by QR of the column-scaled,
/// ridge-augmented data matrix; falls back to loaded normal equations when
/// that matrix is numerically rank deficient.
pub fn ls_oracle(basis: &Basis, rx: &[C64], range: Range<usize>, epsilon: f64) -> Result<Vec<C64>> {
    if rx.len() != basis.len() {
        return Err(Error::DimensionMismatch(format!(
            "rx has {} samples, basis {}",
            rx.len(),
            basis.len()
        )));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::param("epsilon", "must be >= 0"));
    }
    let k = basis.model.num_coeffs();
    if range.len() < k || range.end > rx.len() {
        return Err(Error::InsufficientSamples { needed: k, got: range.len() });
    }
    let rows = range.len();
    let extra = if epsilon > 0.0 { k } else { 0 };
    let inv_sqrt_n = 1.0 / (rows as f64).sqrt();
    let mut a = DMatrix::<C64>::zeros(rows + extra, k);
    let mut u = vec![ZERO; k];
    for (row, n) in range.clone().enumerate() {
        basis.fill(n, &mut u);
        for (j, v) in u.iter().enumerate() {
            a[(row, j)] = *v * inv_sqrt_n;
        }
    }
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            let norm = a.rows(0, rows).column(j).norm();
            if norm > 0.0 {
                1.0 / norm
            } else {
                1.0
            }
        })
        .collect();
    for (j, s) in scale.iter().enumerate() {
        a.column_mut(j).scale_mut(*s);
        if extra > 0 {
            a[(rows + j, j)] = C64::new(epsilon.sqrt() * s, 0.0);
        }
    }
    let mut b = DVector::<C64>::zeros(rows + extra);
    for (row, n) in range.enumerate() {
        b[row] = rx[n] * inv_sqrt_n;
    }

    let qr = a.clone().qr();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].norm()).fold(0.0, f64::max);
    let well_posed = max_diag > 0.0 && (0..k).all(|i| r[(i, i)].norm() > 1e-12 * max_diag);
    let z = if well_posed {
        let mut qb = b.clone();
        qr.q_tr_mul(&mut qb);
        let top = qb.rows(0, k).into_owned();
        r.solve_upper_triangular(&top).ok_or(Error::Singular)?
    } else {
        regularized_normal_equations(&a, &b)?
    };
    Ok(z.iter().zip(&scale).map(|(v, s)| v * *s).collect())
}

fn regularized_normal_equations(a: &DMatrix<C64>, b: &DVector<C64>) -> Result<DVector<C64>> {
    let mut gram = a.adjoint() * a;
    let rhs = a.adjoint() * b;
    let k = gram.nrows();
    let trace: f64 = (0..k).map(|i| gram[(i, i)].re).sum::<f64>() / k as f64;
    let mut eps = 1e-12 * trace.max(f64::MIN_POSITIVE);
    for _ in 0..8 {
        for i in 0..k {
            gram[(i, i)].re += eps;
        }
        if let Some(chol) = gram.clone().cholesky() {
            return Ok(chol.solve(&rhs));
        }
        eps *= 100.0;
    }
    Err(Error::Singular)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UpdateMode {
    /// `h += μ C⁻¹ u*(n) y(n)` at every sample.
    SampleWise,
    /// `h += μ C⁻¹ mean_n u*(n) y(n)` once per block.
    BlockAveraged,
}

/// Memory-polynomial digital canceller: `y(n) = rx(n) - hᵀ u(n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DigitalCanceller {
    model: MemoryPolynomial,
    coeffs: Vec<C64>,
    step: f64,
    mode: UpdateMode,
    /// `C⁻¹`; `None` means identity (plain LMS).
    preconditioner: Option<DMatrix<C64>>,
}

impl DigitalCanceller {
    pub fn new(model: MemoryPolynomial, step: f64, mode: UpdateMode) -> Result<Self> {
        check_step(step)?;
        Ok(Self {
            model,
            coeffs: vec![ZERO; model.num_coeffs()],
            step,
            mode,
            preconditioner: None,
        })
    }

    /// Installs `C⁻¹` from a Hermitian positive definite correlation matrix.
    pub fn set_correlation(&mut self, c: &DMatrix<C64>) -> Result<()> {
        let k = self.model.num_coeffs();
        if c.nrows() != k || c.ncols() != k {
            return Err(Error::DimensionMismatch(format!(
                "correlation is {}x{}, model has {k} coefficients",
                c.nrows(),
                c.ncols()
            )));
        }
        let chol = c.clone().cholesky().ok_or(Error::Singular)?;
        self.preconditioner = Some(chol.inverse());
        Ok(())
    }

    pub fn clear_correlation(&mut self) {
        self.preconditioner = None;
    }

    pub fn model(&self) -> MemoryPolynomial {
        self.model
    }

    pub fn mode(&self) -> UpdateMode {
        self.mode
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn set_step(&mut self, step: f64) -> Result<()> {
        check_step(step)?;
        self.step = step;
        Ok(())
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn set_coeffs(&mut self, coeffs: &[C64]) -> Result<()> {
        if coeffs.len() != self.model.num_coeffs() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a model of {}",
                coeffs.len(),
                self.model.num_coeffs()
            )));
        }
        if coeffs.iter().any(|h| !(h.re.is_finite() && h.im.is_finite())) {
            return Err(Error::param("digital.coeffs", "coefficients must be finite"));
        }
        self.coeffs = coeffs.to_vec();
        Ok(())
    }

    fn check_basis(&self, basis: &Basis, rx: &[C64]) -> Result<()> {
        if basis.model != self.model {
            return Err(Error::DimensionMismatch("basis built for a different model".into()));
        }
        if basis.len() != rx.len() {
            return Err(Error::DimensionMismatch(format!(
                "rx has {} samples, basis {}",
                rx.len(),
                basis.len()
            )));
        }
        Ok(())
    }

    pub fn residual(&self, basis: &Basis, rx: &[C64]) -> Result<Vec<C64>> {
        self.check_basis(basis, rx)?;
        let mut u = vec![ZERO; self.coeffs.len()];
        Ok(rx.iter().enumerate().map(|(n, r)| r - basis.dot(n, &self.coeffs, &mut u)).collect())
    }

    pub fn cancel(&self, rx: &[C64], tx: &[C64]) -> Result<Vec<C64>> {
        check_len(rx, tx)?;
        self.residual(&Basis::new(self.model, tx), rx)
    }

    fn precondition(&self, g: &mut [C64]) {
        if let Some(cinv) = &self.preconditioner {
            let v = cinv * DVector::from_column_slice(g);
            g.copy_from_slice(v.as_slice());
        }
    }

    /// One adaptation pass over `block`; returns the mean residual power
    /// seen during the pass.
    pub fn adapt(&mut self, basis: &Basis, rx: &[C64], block: Range<usize>) -> Result<f64> {
        self.check_basis(basis, rx)?;
        check_block(&block, rx.len())?;
        let k = self.coeffs.len();
        let mut u = vec![ZERO; k];
        let mut g = vec![ZERO; k];
        let mut power = 0.0;
        let count = block.len() as f64;
        match self.mode {
            UpdateMode::SampleWise => {
                for n in block {
                    let y = rx[n] - basis.dot(n, &self.coeffs, &mut u);
                    power += y.norm_sqr();
                    for (gi, ui) in g.iter_mut().zip(&u) {
                        *gi = ui.conj() * y;
                    }
                    self.precondition(&mut g);
                    for (h, gi) in self.coeffs.iter_mut().zip(&g) {
                        *h += gi * self.step;
                    }
                }
            }
            UpdateMode::BlockAveraged => {
                for n in block {
                    let y = rx[n] - basis.dot(n, &self.coeffs, &mut u);
                    power += y.norm_sqr();
                    for (gi, ui) in g.iter_mut().zip(&u) {
                        *gi += ui.conj() * y;
                    }
                }
                g.iter_mut().for_each(|v| *v /= count);
                self.precondition(&mut g);
                for (h, gi) in self.coeffs.iter_mut().zip(&g) {
                    *h += gi * self.step;
                }
            }
        }
        if self.coeffs.iter().any(|h| !(h.re.is_finite() && h.im.is_finite())) {
            return Ok(f64::INFINITY);
        }
        Ok(power / count)
    }

    /// Cycles through consecutive blocks for `iterations` adaptation passes
    /// under the divergence guard.
    pub fn train(&mut self, basis: &Basis, rx: &[C64], block_len: usize, iterations: usize) -> Result<TrainingLog> {
        self.check_basis(basis, rx)?;
        if block_len == 0 || block_len > rx.len() {
            return Err(Error::param("block_len", format!("must be in 1..={}", rx.len())));
        }
        let blocks = rx.len() / block_len;
        let mut log = TrainingLog::default();
        for it in 0..iterations {
            let b = it % blocks;
            let p = self.adapt(basis, rx, b * block_len..(b + 1) * block_len)?;
            log.push_guarded(p)?;
        }
        Ok(log)
    }
}
