//! Channels, PSK symbols, phase rotation, real lifting and sector geometry.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

pub type C64 = Complex<f64>;

/// M-ary PSK with phases `2πm/M + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationSpec {
    order: u32,
    offset: f64,
}

impl ModulationSpec {
    /// PSK of order `M` (a power of two, at least 2). QPSK is rotated by
    /// π/4 so its points sit on the diagonals; other orders have no offset.
    pub fn psk(order: u32) -> Result<Self, ModelError> {
        if order < 2 || !order.is_power_of_two() {
            return Err(ModelError::Modulation(format!(
                "PSK order {order} is not a power of two ≥ 2"
            )));
        }
        let offset = if order == 4 { PI / 4.0 } else { 0.0 };
        Ok(Self { order, offset })
    }

    pub fn bpsk() -> Self {
        Self { order: 2, offset: 0.0 }
    }

    pub fn qpsk() -> Self {
        Self {
            order: 4,
            offset: PI / 4.0,
        }
    }

    pub fn psk8() -> Self {
        Self { order: 8, offset: 0.0 }
    }

    /// Parses `bpsk`, `qpsk` or `<M>psk`.
    pub fn parse(name: &str) -> Result<Self, ModelError> {
        match name {
            "bpsk" => Ok(Self::bpsk()),
            "qpsk" => Ok(Self::qpsk()),
            other => other
                .strip_suffix("psk")
                .and_then(|m| m.parse::<u32>().ok())
                .ok_or_else(|| ModelError::Modulation(format!("unsupported modulation \"{other}\"")))
                .and_then(Self::psk),
        }
    }

    pub fn name(&self) -> String {
        match self.order {
            2 => "bpsk".into(),
            4 => "qpsk".into(),
            m => format!("{m}psk"),
        }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Sector half-angle `π/M`.
    pub fn theta(&self) -> f64 {
        PI / self.order as f64
    }

    /// `tan θ`, infinite for BPSK.
    pub fn tan_theta(&self) -> f64 {
        if self.order == 2 {
            f64::INFINITY
        } else {
            self.theta().tan()
        }
    }

    pub fn phase(&self, index: u32) -> f64 {
        2.0 * PI * index as f64 / self.order as f64 + self.offset
    }

    /// Nearest constellation point to `y`.
    pub fn detect(&self, y: C64) -> u32 {
        let step = 2.0 * PI / self.order as f64;
        let k = ((y.arg() - self.offset) / step).round();
        k.rem_euclid(self.order as f64) as u32
    }
}

/// System dimensions and targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub n_tx: usize,
    pub n_users: usize,
    pub n0: f64,
    /// Linear SINR targets, one per user.
    pub gamma: Vec<f64>,
    pub modulation: ModulationSpec,
    pub seed: u64,
}

impl Scenario {
    /// Uniform target `gamma` (linear) for every user.
    pub fn uniform(
        n_tx: usize,
        n_users: usize,
        n0: f64,
        gamma: f64,
        modulation: ModulationSpec,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let s = Self {
            n_tx,
            n_users,
            n0,
            gamma: vec![gamma; n_users],
            modulation,
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.n_tx == 0 || self.n_users == 0 {
            return Err(ModelError::Scenario("need at least one antenna and one user".into()));
        }
        if !(self.n0 > 0.0 && self.n0.is_finite()) {
            return Err(ModelError::Scenario(format!(
                "noise power must be positive, got {}",
                self.n0
            )));
        }
        if self.gamma.len() != self.n_users {
            return Err(ModelError::Scenario(format!(
                "{} SINR targets for {} users",
                self.gamma.len(),
                self.n_users
            )));
        }
        if let Some(g) = self.gamma.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(ModelError::Scenario(format!("SINR target {g} is not positive")));
        }
        Ok(())
    }

    /// `√(Γ_i N0)` per user.
    pub fn thresholds(&self) -> Vec<f64> {
        thresholds(&self.gamma, self.n0)
    }
}

pub(crate) fn thresholds(gamma: &[f64], n0: f64) -> Vec<f64> {
    gamma.iter().map(|g| (g * n0).sqrt()).collect()
}

/// Downlink channels, row `i` is `h_iᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h: DMatrix<C64>,
}

impl ChannelSet {
    pub fn new(h: DMatrix<C64>) -> Self {
        Self { h }
    }

    pub fn n_users(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h.ncols()
    }

    /// `h_i` as a column vector.
    pub fn user(&self, i: usize) -> DVector<C64> {
        self.h.row(i).transpose()
    }

    /// `h_iᵀ v` (no conjugation).
    pub fn apply(&self, i: usize, v: &DVector<C64>) -> C64 {
        self.h.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum()
    }

    pub fn norm_sq(&self, i: usize) -> f64 {
        self.h.row(i).iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn max_norm_sq(&self) -> f64 {
        (0..self.n_users()).map(|i| self.norm_sq(i)).fold(0.0, f64::max)
    }
}

/// One PSK symbol per user, unit amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub indices: Vec<u32>,
    pub phases: Vec<f64>,
}

impl SymbolFrame {
    pub fn from_indices(modulation: &ModulationSpec, indices: Vec<u32>) -> Self {
        let phases = indices.iter().map(|&m| modulation.phase(m)).collect();
        Self { indices, phases }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn symbol(&self, i: usize) -> C64 {
        C64::from_polar(1.0, self.phases[i])
    }
}

/// `h̃_i = h_i e^{j(φ_1 − φ_i)}`, row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedChannels {
    pub h: DMatrix<C64>,
}

impl RotatedChannels {
    pub fn as_channels(&self) -> ChannelSet {
        ChannelSet::new(self.h.clone())
    }

    pub fn n_users(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.h.ncols()
    }

    /// `h̃_iᵀ w`.
    pub fn apply(&self, i: usize, w: &DVector<C64>) -> C64 {
        self.h.row(i).iter().zip(w.iter()).map(|(a, b)| a * b).sum()
    }
}

pub fn rotate_channels(channels: &ChannelSet, symbols: &SymbolFrame) -> RotatedChannels {
    let phi1 = symbols.phases[0];
    let mut h = channels.h.clone();
    for (i, mut row) in h.row_iter_mut().enumerate() {
        if i == 0 {
            continue;
        }
        let rot = C64::from_polar(1.0, phi1 - symbols.phases[i]);
        row *= rot;
    }
    RotatedChannels { h }
}

/// `w ↦ [Re w; −Im w]`, the real coordinates every solver works in.
pub fn to_real(w: &DVector<C64>) -> DVector<f64> {
    let n = w.len();
    DVector::from_fn(2 * n, |k, _| if k < n { w[k].re } else { -w[k - n].im })
}

/// Inverse of [`to_real`].
pub fn from_real(w2: &DVector<f64>) -> DVector<C64> {
    let n = w2.len() / 2;
    DVector::from_fn(n, |k, _| C64::new(w2[k], -w2[n + k]))
}

/// `[0 I; −I 0]` of size `2n`.
pub fn pi_matrix(n: usize) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        p[(k, n + k)] = 1.0;
        p[(n + k, k)] = -1.0;
    }
    p
}

/// Real coefficient vectors `(f, g)` with `Re(aᵀw) = fᵀw₂` and
/// `Im(aᵀw) = gᵀw₂` for `w₂ = to_real(w)`; `g = Π f`.
pub fn lift_row(a: &DVector<C64>) -> (DVector<f64>, DVector<f64>) {
    let n = a.len();
    let f = DVector::from_fn(2 * n, |k, _| if k < n { a[k].re } else { a[k - n].im });
    let g = DVector::from_fn(2 * n, |k, _| if k < n { a[k].im } else { -a[k - n].re });
    (f, g)
}

/// Real-valued data of the relaxed sector problem.
#[derive(Debug, Clone)]
pub struct RealLifting {
    /// Column `i` is `f_i = [Re h̃_i; Im h̃_i]`.
    pub f: DMatrix<f64>,
    /// Column `i` is `g_i = Π f_i`.
    pub g: DMatrix<f64>,
    /// Columns `g_i − f_i tanθ` then `−g_i − f_i tanθ`.
    pub b: DMatrix<f64>,
    /// `√(Γ_i N0) tanθ`, stacked twice.
    pub c: DVector<f64>,
    pub tan_theta: f64,
    /// `√(Γ_i N0)`.
    pub thresholds: Vec<f64>,
    pub n0: f64,
    pub modulation: ModulationSpec,
}

impl RealLifting {
    pub fn n_users(&self) -> usize {
        self.f.ncols()
    }

    pub fn n_tx(&self) -> usize {
        self.f.nrows() / 2
    }

    /// Same channels with new per-user thresholds `√(Γ_i N0)`.
    pub fn with_gamma(&self, gamma: &[f64]) -> Self {
        let thresholds = thresholds(gamma, self.n0);
        let k = self.n_users();
        let c = DVector::from_fn(2 * k, |j, _| thresholds[j % k] * self.tan_theta);
        Self {
            c,
            thresholds,
            ..self.clone()
        }
    }

    /// Per-user sector margins of `w₂`.
    pub fn margins(&self, w2: &DVector<f64>) -> Vec<SectorMargins> {
        (0..self.n_users())
            .map(|i| {
                let z = C64::new(self.f.column(i).dot(w2), self.g.column(i).dot(w2));
                sector_margins(z, self.thresholds[i], &self.modulation)
            })
            .collect()
    }
}

pub fn lift_real(
    rot: &RotatedChannels,
    modulation: &ModulationSpec,
    gamma: &[f64],
    n0: f64,
) -> Result<RealLifting, ModelError> {
    if modulation.order() < 4 {
        return Err(ModelError::Modulation(
            "sector lifting needs M ≥ 4; BPSK uses the half-plane form".into(),
        ));
    }
    let (k, n) = (rot.n_users(), rot.n_tx());
    if gamma.len() != k {
        return Err(ModelError::Dimension(format!("{} targets for {k} users", gamma.len())));
    }
    let t = modulation.tan_theta();
    let mut f = DMatrix::zeros(2 * n, k);
    let mut g = DMatrix::zeros(2 * n, k);
    for i in 0..k {
        let (fi, gi) = lift_row(&rot.h.row(i).transpose());
        f.set_column(i, &fi);
        g.set_column(i, &gi);
    }
    let mut b = DMatrix::zeros(2 * n, 2 * k);
    for i in 0..k {
        b.set_column(i, &(g.column(i) - f.column(i) * t));
        b.set_column(k + i, &(-g.column(i) - f.column(i) * t));
    }
    let thresholds = thresholds(gamma, n0);
    let c = DVector::from_fn(2 * k, |j, _| thresholds[j % k] * t);
    Ok(RealLifting {
        f,
        g,
        b,
        c,
        tan_theta: t,
        thresholds,
        n0,
        modulation: *modulation,
    })
}

/// Position of a noiseless receive point relative to its constructive sector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SectorMargins {
    pub alpha_r: f64,
    pub alpha_i: f64,
    /// `(α_R − √(ΓN0)) tanθ − |α_I|`; for BPSK `α_R − √(ΓN0)`.
    pub slack: f64,
    /// Effective angle from `tanϑ = tanθ (1 − √(ΓN0)/α_R)`; `None` when
    /// `α_R ≤ √(ΓN0)` or for BPSK.
    pub vartheta: Option<f64>,
}

impl SectorMargins {
    pub fn holds(&self, tol: f64) -> bool {
        self.slack >= -tol
    }
}

/// Margins of the receive point `z = h_iᵀ Σ t_k d_k`, rotated by `e^{−jφ_i}`.
pub fn check_constructive(z: C64, phi: f64, gamma: f64, n0: f64, modulation: &ModulationSpec) -> SectorMargins {
    sector_margins(z * C64::from_polar(1.0, -phi), (gamma * n0).sqrt(), modulation)
}

pub(crate) fn sector_margins(alpha: C64, threshold: f64, modulation: &ModulationSpec) -> SectorMargins {
    if modulation.order() == 2 {
        return SectorMargins {
            alpha_r: alpha.re,
            alpha_i: alpha.im,
            slack: alpha.re - threshold,
            vartheta: None,
        };
    }
    let t = modulation.tan_theta();
    let slack = (alpha.re - threshold) * t - alpha.im.abs();
    let vartheta = (alpha.re > threshold).then(|| (t * (1.0 - threshold / alpha.re)).atan());
    SectorMargins {
        alpha_r: alpha.re,
        alpha_i: alpha.im,
        slack,
        vartheta,
    }
}

/// Per-user precoders `t_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub t: Vec<DVector<C64>>,
}

impl PrecoderSet {
    /// `Σ_k ‖t_k‖²`.
    pub fn total_power(&self) -> f64 {
        self.t.iter().map(|t| t.norm_squared()).sum()
    }

    /// `Σ_k t_k d_k`.
    pub fn transmit(&self, symbols: &SymbolFrame) -> DVector<C64> {
        let n = self.t.first().map_or(0, |t| t.len());
        self.t
            .iter()
            .enumerate()
            .fold(DVector::zeros(n), |acc, (k, t)| acc + t * symbols.symbol(k))
    }
}

/// `‖Σ_k t_k e^{j(φ_k − φ_1)}‖²`.
pub fn instantaneous_power(precoders: &PrecoderSet, symbols: &SymbolFrame) -> f64 {
    let phi1 = symbols.phases[0];
    let n = precoders.t.first().map_or(0, |t| t.len());
    precoders
        .t
        .iter()
        .enumerate()
        .fold(DVector::<C64>::zeros(n), |acc, (k, t)| {
            acc + t * C64::from_polar(1.0, symbols.phases[k] - phi1)
        })
        .norm_squared()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detection_round_trips_every_point() {
        for m in [2, 4, 8, 16] {
            let modu = ModulationSpec::psk(m).unwrap();
            for k in 0..m {
                let y = C64::from_polar(0.3, modu.phase(k) + 0.9 * modu.theta());
                assert_eq!(modu.detect(y), k);
            }
        }
    }

    #[test]
    fn parse_names() {
        assert_eq!(ModulationSpec::parse("8psk").unwrap().order(), 8);
        assert_eq!(ModulationSpec::parse("qpsk").unwrap(), ModulationSpec::qpsk());
        let err = ModulationSpec::parse("16qam").unwrap_err().to_string();
        assert!(err.contains("16qam"));
    }

    #[test]
    fn pi_is_orthogonal_and_skew() {
        let p = pi_matrix(3);
        assert_eq!(p.transpose() * &p, DMatrix::identity(6, 6));
        assert_eq!(p.transpose(), -&p);
    }
}
