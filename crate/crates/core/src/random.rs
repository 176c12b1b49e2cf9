//! Deterministic random draws. Every `(seed, trial)` pair owns a family of
//! ChaCha20 streams, so a trial's data does not depend on which thread
//! generated it or in what order.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{ChannelSet, Scenario, SymbolFrame, C64};

#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub enum Stream {
    Channels = 0,
    Symbols = 1,
    Noise = 2,
    CsiError = 3,
}

const STREAMS_PER_TRIAL: u64 = 8;

pub fn trial_rng(seed: u64, trial: u64, stream: Stream) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(trial * STREAMS_PER_TRIAL + stream as u64);
    rng
}

/// One `CN(0, 1)` draw.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// i.i.d. `CN(0, 1)` entries, `K × N`.
pub fn gen_channels(scenario: &Scenario, trial: u64) -> ChannelSet {
    let mut rng = trial_rng(scenario.seed, trial, Stream::Channels);
    let (k, n) = (scenario.n_users, scenario.n_tx);
    let mut h = DMatrix::zeros(k, n);
    // row-major fill so the layout does not depend on storage order
    for i in 0..k {
        for j in 0..n {
            h[(i, j)] = complex_normal(&mut rng);
        }
    }
    ChannelSet::new(h)
}

pub fn gen_symbols(scenario: &Scenario, trial: u64) -> SymbolFrame {
    let mut rng = trial_rng(scenario.seed, trial, Stream::Symbols);
    let m = scenario.modulation.order();
    let indices = (0..scenario.n_users).map(|_| rng.random_range(0..m)).collect();
    SymbolFrame::from_indices(&scenario.modulation, indices)
}

/// Channel errors drawn uniformly from the ball `‖e_i‖ ≤ δ_i` in `ℂ^N`.
pub fn gen_csi_error(scenario: &Scenario, trial: u64, delta: &[f64]) -> DMatrix<C64> {
    let mut rng = trial_rng(scenario.seed, trial, Stream::CsiError);
    let (k, n) = (scenario.n_users, scenario.n_tx);
    let mut e = DMatrix::zeros(k, n);
    for i in 0..k {
        let v = uniform_in_ball(&mut rng, n, delta[i]);
        e.row_mut(i).copy_from(&v.transpose());
    }
    e
}

/// Uniform point in the complex ball of radius `r` in `ℂ^n` (real
/// dimension `2n`).
pub fn uniform_in_ball<R: Rng + ?Sized>(rng: &mut R, n: usize, r: f64) -> DVector<C64> {
    let v = uniform_on_sphere(rng, n, 1.0);
    let u: f64 = rng.random();
    v.map(|c| c * (r * u.powf(1.0 / (2 * n) as f64)))
}

/// Uniform point on the complex sphere of radius `r` in `ℂ^n`.
pub fn uniform_on_sphere<R: Rng + ?Sized>(rng: &mut R, n: usize, r: f64) -> DVector<C64> {
    loop {
        let v = DVector::from_fn(n, |_, _| complex_normal(rng));
        let norm = v.norm();
        if norm > 1e-300 {
            return v.map(|c| c * (r / norm));
        }
    }
}
