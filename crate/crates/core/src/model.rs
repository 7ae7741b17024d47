//! Domain types of the IOS-assisted downlink and the quantities measured on
//! them: composite channels, SINR, sum-rate, transmit power and MSE.
//!
//! Users are always indexed in concatenated order, reflected users first and
//! transmitted users after them. Every per-user vector in the crate (SINR,
//! receive scalars, MSE weights, targets) follows that convention.
//!
//! Channels are stored the way they appear in the received-signal model:
//! `g` is the `M × N_t` BS→IOS matrix, `h_d[k]` the BS→user direct channel,
//! `h_r[k]` / `h_t[k]` the IOS→user channels. The received sample of user `k`
//! under precoder `w` is `c_kᴴ w`, where `c_k` is the composite channel
//! returned by [`composite_channel`].

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::Geometry;
use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CVector = DVector<C64>;
pub type CMatrix = DMatrix<C64>;
pub type RVector = DVector<f64>;

/// Tolerance used when checking that phase entries have unit modulus.
pub const UNIT_MODULUS_TOL: f64 = 1e-12;

/// Distance-dependent path-loss exponents per link type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossExponents {
    pub bs_ios: f64,
    pub ios_user: f64,
    pub bs_user: f64,
}

impl Default for PathLossExponents {
    fn default() -> Self {
        Self {
            bs_ios: 2.5,
            ios_user: 2.8,
            bs_user: 3.5,
        }
    }
}

/// Dimensions, noise, targets, budget and geometry of one simulated system.
/// All powers are linear (watts), all targets linear ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_tx: usize,
    pub n_elements: usize,
    pub k_r: usize,
    pub k_t: usize,
    pub noise_r: f64,
    pub noise_t: f64,
    pub sinr_targets_r: Vec<f64>,
    pub sinr_targets_t: Vec<f64>,
    pub power_budget: f64,
    pub geometry: Geometry,
    #[serde(default)]
    pub pathloss_exponents: PathLossExponents,
    pub ref_gain: f64,
    pub seed: u64,
}

impl SystemConfig {
    pub fn n_users(&self) -> usize {
        self.k_r + self.k_t
    }

    /// Concatenated per-user SINR targets.
    pub fn targets(&self) -> Vec<f64> {
        self.sinr_targets_r
            .iter()
            .chain(&self.sinr_targets_t)
            .copied()
            .collect()
    }

    pub fn noise(&self) -> Noise {
        Noise {
            reflect: self.noise_r,
            transmit: self.noise_t,
        }
    }

    /// Copy of this configuration with a different user split; every user
    /// gets `target` as SINR requirement.
    pub fn with_users(&self, k_r: usize, k_t: usize, target: f64) -> Self {
        let mut cfg = self.clone();
        cfg.k_r = k_r;
        cfg.k_t = k_t;
        cfg.sinr_targets_r = vec![target; k_r];
        cfg.sinr_targets_t = vec![target; k_t];
        if let Some(angles) = &cfg.geometry.angles {
            if angles.len() != k_r + k_t {
                cfg.geometry.angles = None;
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_tx == 0 {
            return bad("n_tx must be at least 1".into());
        }
        if self.n_elements == 0 {
            return bad("n_elements must be at least 1".into());
        }
        if self.k_r + self.k_t == 0 {
            return bad("at least one user is required".into());
        }
        if self.sinr_targets_r.len() != self.k_r || self.sinr_targets_t.len() != self.k_t {
            return bad(format!(
                "expected {} reflected and {} transmitted targets, got {} and {}",
                self.k_r,
                self.k_t,
                self.sinr_targets_r.len(),
                self.sinr_targets_t.len()
            ));
        }
        let positive = [
            ("noise_r", self.noise_r),
            ("noise_t", self.noise_t),
            ("power_budget", self.power_budget),
            ("ref_gain", self.ref_gain),
            ("d_bi", self.geometry.d_bi),
            ("d_iu", self.geometry.d_iu),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if let Some(t) = self.targets().iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return bad(format!("SINR targets must be positive, got {t}"));
        }
        if let Some(angles) = &self.geometry.angles {
            if angles.len() != self.n_users() {
                return bad(format!(
                    "geometry lists {} angles for {} users",
                    angles.len(),
                    self.n_users()
                ));
            }
        }
        Ok(())
    }
}

/// Receiver noise powers for the two half-spaces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub reflect: f64,
    pub transmit: f64,
}

impl Noise {
    pub fn uniform(sigma2: f64) -> Self {
        Self {
            reflect: sigma2,
            transmit: sigma2,
        }
    }

    pub fn for_user(&self, k: usize, k_r: usize) -> f64 {
        if k < k_r {
            self.reflect
        } else {
            self.transmit
        }
    }
}

/// Addresses a single user in one of the two half-spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UserId {
    Reflected(usize),
    Transmitted(usize),
}

impl UserId {
    /// Position of this user in the concatenated ordering.
    pub fn index(self, k_r: usize) -> usize {
        match self {
            UserId::Reflected(k) => k,
            UserId::Transmitted(k) => k_r + k,
        }
    }

    pub fn from_index(k: usize, k_r: usize) -> Self {
        if k < k_r {
            UserId::Reflected(k)
        } else {
            UserId::Transmitted(k - k_r)
        }
    }
}

/// One channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// BS→IOS, `M × N_t`.
    pub g: CMatrix,
    /// BS→reflected user, one length-`N_t` vector per reflected user.
    pub h_d: Vec<CVector>,
    /// IOS→reflected user, length `M`.
    pub h_r: Vec<CVector>,
    /// IOS→transmitted user, length `M`.
    pub h_t: Vec<CVector>,
}

impl ChannelSet {
    pub fn n_tx(&self) -> usize {
        self.g.ncols()
    }

    pub fn n_elements(&self) -> usize {
        self.g.nrows()
    }

    pub fn k_r(&self) -> usize {
        self.h_r.len()
    }

    pub fn k_t(&self) -> usize {
        self.h_t.len()
    }

    pub fn n_users(&self) -> usize {
        self.k_r() + self.k_t()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n_tx(), self.n_elements());
        if self.h_d.len() != self.h_r.len() {
            return Err(Error::Dimension(format!(
                "{} direct channels for {} reflected users",
                self.h_d.len(),
                self.h_r.len()
            )));
        }
        for (k, h) in self.h_d.iter().enumerate() {
            if h.len() != n {
                return Err(Error::Dimension(format!(
                    "h_d[{k}] has length {}, expected {n}",
                    h.len()
                )));
            }
        }
        for (name, set) in [("h_r", &self.h_r), ("h_t", &self.h_t)] {
            for (k, h) in set.iter().enumerate() {
                if h.len() != m {
                    return Err(Error::Dimension(format!(
                        "{name}[{k}] has length {}, expected {m}",
                        h.len()
                    )));
                }
            }
        }
        let finite = self.g.iter().all(|z| z.is_finite())
            && self
                .h_d
                .iter()
                .chain(&self.h_r)
                .chain(&self.h_t)
                .all(|v| v.iter().all(|z| z.is_finite()));
        if !finite {
            return Err(Error::Dimension("channel contains non-finite entries".into()));
        }
        Ok(())
    }

    pub fn check_config(&self, cfg: &SystemConfig) -> Result<()> {
        self.validate()?;
        if self.n_tx() != cfg.n_tx
            || self.n_elements() != cfg.n_elements
            || self.k_r() != cfg.k_r
            || self.k_t() != cfg.k_t
        {
            return Err(Error::Dimension(format!(
                "channel is N_t={} M={} K_r={} K_t={}, config is N_t={} M={} K_r={} K_t={}",
                self.n_tx(),
                self.n_elements(),
                self.k_r(),
                self.k_t(),
                cfg.n_tx,
                cfg.n_elements,
                cfg.k_r,
                cfg.k_t
            )));
        }
        Ok(())
    }

    /// The same realization with the transmitted users dropped.
    pub fn reflected_only(&self) -> ChannelSet {
        ChannelSet {
            g: self.g.clone(),
            h_d: self.h_d.clone(),
            h_r: self.h_r.clone(),
            h_t: Vec::new(),
        }
    }

    /// The same realization with the reflected users dropped.
    pub fn transmitted_only(&self) -> ChannelSet {
        ChannelSet {
            g: self.g.clone(),
            h_d: Vec::new(),
            h_r: Vec::new(),
            h_t: self.h_t.clone(),
        }
    }
}

/// IOS control mode. Only the mode tag lives here; the per-mode projections
/// are in [`crate::modes`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlMode {
    Ued,
    Eed,
    Sd,
    TdReflect,
    TdTransmit,
    Irs,
    #[serde(rename = "none")]
    NoIos,
}

impl ControlMode {
    pub fn tag(self) -> &'static str {
        match self {
            ControlMode::Ued => "ued",
            ControlMode::Eed => "eed",
            ControlMode::Sd => "sd",
            ControlMode::TdReflect => "td-reflect",
            ControlMode::TdTransmit => "td-transmit",
            ControlMode::Irs => "irs",
            ControlMode::NoIos => "none",
        }
    }
}

/// Phase and amplitude configuration of the surface.
///
/// Only the reflection amplitude `zeta` is stored; the transmission amplitude
/// is always `sqrt(1 - zeta²)`, so the energy-conservation constraint holds
/// by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct IosState {
    pub phi_r: CVector,
    pub phi_t: CVector,
    pub zeta: RVector,
    pub mode: ControlMode,
}

impl IosState {
    pub fn new(phi_r: CVector, phi_t: CVector, zeta: RVector, mode: ControlMode) -> Result<Self> {
        let s = Self {
            phi_r,
            phi_t,
            zeta,
            mode,
        };
        s.check_invariants()?;
        Ok(s)
    }

    /// All phases at 1 and a common reflection amplitude.
    pub fn uniform(m: usize, zeta: f64, mode: ControlMode) -> Self {
        Self {
            phi_r: CVector::from_element(m, C64::new(1.0, 0.0)),
            phi_t: CVector::from_element(m, C64::new(1.0, 0.0)),
            zeta: RVector::from_element(m, zeta),
            mode,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.zeta.len()
    }

    pub fn eta(&self) -> RVector {
        self.zeta.map(transmit_amplitude)
    }

    /// Reflection coefficients `ζ ⊙ φ_r`.
    pub fn reflect_coeffs(&self) -> CVector {
        self.phi_r.zip_map(&self.zeta, |p, z| p * z)
    }

    /// Transmission coefficients `η ⊙ φ_t`.
    pub fn transmit_coeffs(&self) -> CVector {
        self.phi_t
            .zip_map(&self.zeta, |p, z| p * transmit_amplitude(z))
    }

    pub fn check_invariants(&self) -> Result<()> {
        let m = self.zeta.len();
        if self.phi_r.len() != m || self.phi_t.len() != m {
            return Err(Error::Dimension(format!(
                "phase vectors of length {} / {} for {m} amplitudes",
                self.phi_r.len(),
                self.phi_t.len()
            )));
        }
        check_unit_modulus(&self.phi_r, UNIT_MODULUS_TOL)?;
        check_unit_modulus(&self.phi_t, UNIT_MODULUS_TOL)?;
        if let Some(z) = self.zeta.iter().find(|z| !(0.0..=1.0).contains(*z)) {
            return Err(Error::InvalidConfig(format!("reflection amplitude {z} outside [0, 1]")));
        }
        Ok(())
    }
}

/// `sqrt(1 - ζ²)`, clamped so rounding never produces a NaN.
pub fn transmit_amplitude(zeta: f64) -> f64 {
    (1.0 - zeta * zeta).max(0.0).sqrt()
}

pub(crate) fn check_unit_modulus(phi: &CVector, tol: f64) -> Result<()> {
    for (index, p) in phi.iter().enumerate() {
        let modulus = p.norm();
        if !((modulus - 1.0).abs() <= tol) {
            return Err(Error::OffManifold { index, modulus });
        }
    }
    Ok(())
}

/// Transmit precoders, one column per user.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformers {
    pub w_r: CMatrix,
    pub w_t: CMatrix,
}

impl Beamformers {
    pub fn zeros(n_tx: usize, k_r: usize, k_t: usize) -> Self {
        Self {
            w_r: CMatrix::zeros(n_tx, k_r),
            w_t: CMatrix::zeros(n_tx, k_t),
        }
    }

    /// Splits an `N_t × (K_r + K_t)` matrix into the two precoder blocks.
    pub fn from_stacked(w: &CMatrix, k_r: usize) -> Self {
        let k_t = w.ncols() - k_r;
        Self {
            w_r: w.columns(0, k_r).into_owned(),
            w_t: w.columns(k_r, k_t).into_owned(),
        }
    }

    /// `[W_r, W_t]`.
    pub fn stacked(&self) -> CMatrix {
        let n = self.n_tx();
        let (kr, kt) = (self.w_r.ncols(), self.w_t.ncols());
        let mut w = CMatrix::zeros(n, kr + kt);
        w.columns_mut(0, kr).copy_from(&self.w_r);
        w.columns_mut(kr, kt).copy_from(&self.w_t);
        w
    }

    pub fn n_tx(&self) -> usize {
        self.w_r.nrows().max(self.w_t.nrows())
    }

    pub fn n_users(&self) -> usize {
        self.w_r.ncols() + self.w_t.ncols()
    }

    pub fn column(&self, k: usize) -> CVector {
        let kr = self.w_r.ncols();
        if k < kr {
            self.w_r.column(k).into_owned()
        } else {
            self.w_t.column(k - kr).into_owned()
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w_r.iter().chain(self.w_t.iter()).all(|z| z.is_finite())
    }
}

/// Outcome of a solver run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Infeasible,
}

impl SolveStatus {
    pub fn tag(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max-iters",
            SolveStatus::Infeasible => "infeasible",
        }
    }
}

/// A joint design: precoders plus surface configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub beamformers: Beamformers,
    pub ios: IosState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    /// Objective after initialization and after every outer iteration
    /// (transmit power for power minimization, the WMMSE objective for
    /// sum-rate maximization).
    pub objective_trace: Vec<f64>,
    /// Sum-rate after initialization and after every outer iteration. Empty
    /// for power minimization.
    pub rate_trace: Vec<f64>,
    pub solution: Solution,
    pub status: SolveStatus,
    pub iterations: usize,
}

impl SolveReport {
    /// Reported metric: final transmit power or final sum-rate.
    pub fn final_metric(&self) -> f64 {
        self.rate_trace
            .last()
            .or(self.objective_trace.last())
            .copied()
            .unwrap_or(f64::NAN)
    }

    pub(crate) fn infeasible(solution: Solution) -> Self {
        Self {
            objective_trace: vec![f64::INFINITY],
            rate_trace: Vec::new(),
            solution,
            status: SolveStatus::Infeasible,
            iterations: 0,
        }
    }
}

fn check_dims(channels: &ChannelSet, ios: &IosState) -> Result<()> {
    let m = channels.n_elements();
    if ios.n_elements() != m || ios.phi_r.len() != m || ios.phi_t.len() != m {
        return Err(Error::Dimension(format!(
            "IOS state has {} elements, channel has {m}",
            ios.n_elements()
        )));
    }
    Ok(())
}

fn check_beams(channels: &ChannelSet, w: &Beamformers) -> Result<()> {
    let n = channels.n_tx();
    let ok_r = w.w_r.ncols() == channels.k_r() && (w.w_r.nrows() == n || w.w_r.ncols() == 0);
    let ok_t = w.w_t.ncols() == channels.k_t() && (w.w_t.nrows() == n || w.w_t.ncols() == 0);
    if !(ok_r && ok_t) {
        return Err(Error::Dimension(format!(
            "precoders are {}x{} and {}x{}, expected {n}x{} and {n}x{}",
            w.w_r.nrows(),
            w.w_r.ncols(),
            w.w_t.nrows(),
            w.w_t.ncols(),
            channels.k_r(),
            channels.k_t()
        )));
    }
    Ok(())
}

/// Row `k` holds the entries of the effective row channel `c_kᴴ` (so the
/// received sample is `Σ_n R[k, n] w[n]`). Shape `(K_r + K_t) × N_t`.
pub fn effective_rows(channels: &ChannelSet, ios: &IosState) -> Result<CMatrix> {
    check_dims(channels, ios)?;
    let (kr, kt, n) = (channels.k_r(), channels.k_t(), channels.n_tx());
    let mut rows = CMatrix::zeros(kr + kt, n);
    let with_ios = ios.mode != ControlMode::NoIos;
    let refl = ios.reflect_coeffs();
    let trans = ios.transmit_coeffs();
    for k in 0..kr {
        let mut row = channels.h_d[k].map(|z| z.conj());
        if with_ios {
            let a = channels.h_r[k].zip_map(&refl, |h, p| h.conj() * p);
            row += channels.g.tr_mul(&a);
        }
        rows.row_mut(k).copy_from(&row.transpose());
    }
    if with_ios {
        for k in 0..kt {
            let a = channels.h_t[k].zip_map(&trans, |h, p| h.conj() * p);
            let row = channels.g.tr_mul(&a);
            rows.row_mut(kr + k).copy_from(&row.transpose());
        }
    }
    Ok(rows)
}

/// Composite BS→user channel `c` such that the user receives `cᴴ w`.
///
/// Reflected users see `(h_rᴴ diag(ζ⊙φ_r) G + h_dᴴ)ᴴ`, transmitted users
/// `(h_tᴴ diag(η⊙φ_t) G)ᴴ` (no direct path).
pub fn composite_channel(channels: &ChannelSet, ios: &IosState, user: UserId) -> Result<CVector> {
    let k = match user {
        UserId::Reflected(k) if k < channels.k_r() => k,
        UserId::Transmitted(k) if k < channels.k_t() => channels.k_r() + k,
        _ => {
            return Err(Error::Dimension(format!(
                "user {user:?} out of range (K_r={}, K_t={})",
                channels.k_r(),
                channels.k_t()
            )))
        }
    };
    let rows = effective_rows(channels, ios)?;
    Ok(rows.row(k).adjoint())
}

/// `X[k, j] = c_kᴴ w_j`: the gain of beam `j` at user `k`.
pub fn gain_matrix(channels: &ChannelSet, ios: &IosState, w: &Beamformers) -> Result<CMatrix> {
    check_beams(channels, w)?;
    let rows = effective_rows(channels, ios)?;
    Ok(&rows * w.stacked())
}

pub(crate) fn sinr_from_gains(x: &CMatrix, noise: Noise, k_r: usize) -> Vec<f64> {
    (0..x.nrows())
        .map(|k| {
            let total: f64 = x.row(k).iter().map(|z| z.norm_sqr()).sum();
            let signal = x[(k, k)].norm_sqr();
            signal / (total - signal + noise.for_user(k, k_r))
        })
        .collect()
}

/// Per-user SINR, reflected users first. Interference runs over every other
/// column of `[W_r, W_t]`.
pub fn sinr_all(channels: &ChannelSet, ios: &IosState, w: &Beamformers, noise: Noise) -> Result<Vec<f64>> {
    let x = gain_matrix(channels, ios, w)?;
    Ok(sinr_from_gains(&x, noise, channels.k_r()))
}

/// `Σ_k log2(1 + SINR_k)` in bit/s/Hz.
pub fn sum_rate(channels: &ChannelSet, ios: &IosState, w: &Beamformers, noise: Noise) -> Result<f64> {
    Ok(rate_of(&sinr_all(channels, ios, w, noise)?))
}

pub fn rate_of(sinr: &[f64]) -> f64 {
    sinr.iter().map(|g| (1.0 + g).log2()).sum()
}

/// Squared Frobenius norm of `[W_r, W_t]`.
pub fn total_power(w: &Beamformers) -> f64 {
    w.w_r.norm_squared() + w.w_t.norm_squared()
}

/// Per-user MSE of the estimate `ν_k* y_k` of the user's unit-power symbol.
pub fn mse_all(
    channels: &ChannelSet,
    ios: &IosState,
    w: &Beamformers,
    nu: &CVector,
    noise: Noise,
) -> Result<Vec<f64>> {
    let x = gain_matrix(channels, ios, w)?;
    if nu.len() != x.nrows() {
        return Err(Error::Dimension(format!(
            "{} receive scalars for {} users",
            nu.len(),
            x.nrows()
        )));
    }
    Ok(mse_from_gains(&x, nu, noise, channels.k_r()))
}

pub(crate) fn mse_from_gains(x: &CMatrix, nu: &CVector, noise: Noise, k_r: usize) -> Vec<f64> {
    (0..x.nrows())
        .map(|k| {
            let n2 = nu[k].norm_sqr();
            let total: f64 = x.row(k).iter().map(|z| z.norm_sqr()).sum();
            n2 * total - 2.0 * (nu[k].conj() * x[(k, k)]).re + n2 * noise.for_user(k, k_r) + 1.0
        })
        .collect()
}
