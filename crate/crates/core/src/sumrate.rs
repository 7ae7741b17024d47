//! Sum-rate maximization under a total power budget, through the weighted
//! MMSE reformulation and block coordinate descent over receive scalars,
//! MSE weights, precoders, per-element phases and per-element energy split.
//!
//! The weighted objective is `Σ_k [(μ_k·MSE_k − 1)/ln 2 + 1 − log₂ μ_k]`.
//! Its exact minimizer in `μ_k` is `1/MSE_k`, and at that point it equals
//! `K − Σ_k log₂(1 + γ_k)`, so lowering it raises the sum-rate.

use std::f64::consts::LN_2;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::model::{
    effective_rows, gain_matrix, mse_from_gains, rate_of, sinr_from_gains, total_power, transmit_amplitude,
    Beamformers, CMatrix, CVector, ChannelSet, ControlMode, IosState, Noise, RVector, Solution, SolveReport,
    SolveStatus, SystemConfig, C64,
};
use crate::power_min::{aligned_start, Observer, Plan, Side};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SumRateOptions {
    pub outer_max_iters: usize,
    pub outer_rel_tol: f64,
    /// Relative objective change that ends the element-wise sweeps.
    pub sweep_rel_tol: f64,
    pub max_sweeps: usize,
    /// Relative gap to the budget accepted by the multiplier search.
    pub power_rel_tol: f64,
}

impl Default for SumRateOptions {
    fn default() -> Self {
        Self {
            outer_max_iters: 200,
            outer_rel_tol: 1e-4,
            sweep_rel_tol: 1e-6,
            max_sweeps: 100,
            power_rel_tol: 1e-9,
        }
    }
}

/// Auxiliary variables of the weighted MMSE form.
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseState {
    pub nu: CVector,
    pub mu: RVector,
    pub lagrange_lambda: f64,
}

fn user_noise(channels: &ChannelSet, noise: Noise) -> Vec<f64> {
    (0..channels.n_users())
        .map(|k| noise.for_user(k, channels.k_r()))
        .collect()
}

pub(crate) fn nu_from_gains(x: &CMatrix, sigma2: &[f64]) -> CVector {
    CVector::from_fn(x.nrows(), |k, _| {
        let total: f64 = x.row(k).iter().map(|z| z.norm_sqr()).sum();
        x[(k, k)] / (total + sigma2[k])
    })
}

/// MMSE receive scalars `ν_k = c_kᴴw_k / (Σ_j |c_kᴴw_j|² + σ_k²)`.
pub fn update_nu(channels: &ChannelSet, ios: &IosState, w: &Beamformers, noise: Noise) -> Result<CVector> {
    let x = gain_matrix(channels, ios, w)?;
    Ok(nu_from_gains(&x, &user_noise(channels, noise)))
}

/// MSE weights `μ_k = 1 / MSE_k`.
pub fn update_mu(mse: &[f64]) -> Result<RVector> {
    if let Some(m) = mse.iter().find(|m| !(**m > 0.0)) {
        return Err(Error::NonPositiveMse(*m));
    }
    Ok(RVector::from_iterator(mse.len(), mse.iter().map(|m| 1.0 / m)))
}

/// `Σ_k [(μ_k·MSE_k − 1)/ln 2 + 1 − log₂ μ_k]`.
pub fn wmmse_objective(mse: &[f64], mu: &RVector) -> f64 {
    mse.iter()
        .zip(mu.iter())
        .map(|(m, u)| (u * m - 1.0) / LN_2 + 1.0 - u.log2())
        .sum()
}

/// Precoders minimizing `Σ_k μ_k MSE_k` under `Σ‖w_k‖² ≤ P`.
///
/// Returns the precoders and the power-constraint multiplier. When
/// `H_w = Σ μ_k h̄_k h̄_kᴴ` is singular and the unconstrained solution fits the
/// budget, a ridge of `1e-12·tr(H_w)/N_t` stands in for the zero multiplier.
pub fn update_w(
    channels: &ChannelSet,
    ios: &IosState,
    nu: &CVector,
    mu: &RVector,
    power_budget: f64,
    opts: &SumRateOptions,
) -> Result<(Beamformers, f64)> {
    let rows = effective_rows(channels, ios)?;
    let w = update_w_rows(&rows, nu, mu, power_budget, opts)?;
    Ok((Beamformers::from_stacked(&w.0, channels.k_r()), w.1))
}

pub(crate) fn update_w_rows(
    rows: &CMatrix,
    nu: &CVector,
    mu: &RVector,
    power_budget: f64,
    opts: &SumRateOptions,
) -> Result<(CMatrix, f64)> {
    let (k, n) = rows.shape();
    if nu.len() != k || mu.len() != k {
        return Err(Error::Dimension(format!("{} / {} auxiliaries for {k} users", nu.len(), mu.len())));
    }
    if let Some(m) = mu.iter().find(|m| !(**m > 0.0)) {
        return Err(Error::InvalidConfig(format!("MSE weights must be positive, got {m}")));
    }
    // h̄_k = ν_k c_k
    let hbar: Vec<CVector> = (0..k).map(|i| rows.row(i).adjoint() * nu[i]).collect();
    let mut h_w = CMatrix::zeros(n, n);
    for (h, m) in hbar.iter().zip(mu.iter()) {
        h_w += h * h.adjoint() * C64::new(*m, 0.0);
    }
    let eig = SymmetricEigen::new(h_w.clone());
    let d: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    // rhs in the eigenbasis: Uᴴ μ_k h̄_k
    let proj: Vec<CVector> = hbar
        .iter()
        .zip(mu.iter())
        .map(|(h, m)| eig.eigenvectors.ad_mul(h) * C64::new(*m, 0.0))
        .collect();
    let power = |lambda: f64| -> f64 {
        proj.iter()
            .map(|p| p.iter().zip(&d).map(|(z, di)| z.norm_sqr() / (di + lambda).powi(2)).sum::<f64>())
            .sum()
    };
    let trace: f64 = d.iter().sum();
    let scale = if trace > 0.0 { trace / n as f64 } else { 1.0 };
    let d_min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = if d_min <= 1e-12 * scale { 1e-12 * scale } else { 0.0 };

    let lambda = if power(floor) <= power_budget {
        floor
    } else {
        let mut lo = floor;
        let mut hi = scale.max(1.0);
        while power(hi) > power_budget {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::NonFinite {
                    what: "power multiplier",
                    iteration: 0,
                });
            }
        }
        for _ in 0..400 {
            let p = power(hi);
            if power_budget - p <= opts.power_rel_tol * power_budget {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if power(mid) > power_budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let mut w = CMatrix::zeros(n, k);
    for (i, p) in proj.iter().enumerate() {
        let scaled = CVector::from_fn(n, |j, _| p[j] / (d[j] + lambda));
        w.set_column(i, &(&eig.eigenvectors * scaled));
    }
    let total = w.norm_squared();
    if total > power_budget {
        w *= C64::new((power_budget / total).sqrt(), 0.0);
    }
    Ok((w, lambda))
}

fn side_users(k_r: usize, n_users: usize, side: Side) -> std::ops::Range<usize> {
    match side {
        Side::Reflect => 0..k_r,
        Side::Transmit => k_r..n_users,
    }
}

/// Quadratic `φᴴEφ − 2ℜ{φᴴf}` (up to a constant) of the weighted MSE sum
/// in one side's phases.
pub fn phase_quadratic(
    side: Side,
    channels: &ChannelSet,
    ios: &IosState,
    w: &Beamformers,
    state: &WmmseState,
) -> (CMatrix, CVector) {
    let k_r = channels.k_r();
    let ws = w.stacked();
    let gw = &channels.g * &ws;
    let m = channels.n_elements();
    let n_beams = ws.ncols();
    let amp = match side {
        Side::Reflect => ios.zeta.clone(),
        Side::Transmit => ios.eta(),
    };
    let mut e = CMatrix::zeros(m, m);
    let mut f = CVector::zeros(m);
    for k in side_users(k_r, channels.n_users(), side) {
        let h = match side {
            Side::Reflect => &channels.h_r[k],
            Side::Transmit => &channels.h_t[k - k_r],
        };
        let (nu, mu) = (state.nu[k], state.mu[k]);
        let n2 = nu.norm_sqr();
        for j in 0..n_beams {
            let a = CVector::from_fn(m, |mm, _| h[mm] * amp[mm] * gw[(mm, j)].conj());
            e.gerc(C64::new(mu * n2, 0.0), &a, &a, C64::new(1.0, 0.0));
            if j == k {
                f.axpy(nu * mu, &a, C64::new(1.0, 0.0));
            }
            if side == Side::Reflect {
                let d = channels.h_d[k].dotc(&ws.column(j));
                f.axpy(-d * (mu * n2), &a, C64::new(1.0, 0.0));
            }
        }
    }
    (e, f)
}

/// `φᴴEφ − 2ℜ{φᴴf}`.
pub fn quadratic_value(e: &CMatrix, f: &CVector, phi: &CVector) -> f64 {
    phi.dotc(&(e * phi)).re - 2.0 * phi.dotc(f).re
}

/// Cyclic closed-form element updates
/// `φ_m = (f_m − Σ_{n≠m} E_mn φ_n) / |·|`, repeated until the objective
/// settles. A zero numerator keeps the previous entry.
pub fn phase_sweeps(e: &CMatrix, f: &CVector, phi0: &CVector, opts: &SumRateOptions) -> CVector {
    let mut phi = phi0.clone();
    let mut ep = e * &phi;
    let mut value = quadratic_value(e, f, &phi);
    for _ in 0..opts.max_sweeps {
        for m in 0..phi.len() {
            let t = f[m] - (ep[m] - e[(m, m)] * phi[m]);
            let r = t.norm();
            if !(r > 0.0) || !r.is_finite() {
                continue;
            }
            let new = t / r;
            let delta = new - phi[m];
            if delta == C64::new(0.0, 0.0) {
                continue;
            }
            ep.axpy(delta, &e.column(m), C64::new(1.0, 0.0));
            phi[m] = new;
        }
        let next = quadratic_value(e, f, &phi);
        let change = (value - next).abs();
        value = next;
        if change <= opts.sweep_rel_tol * value.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    phi
}

/// One side's phases after element-wise block minimization.
pub fn update_phase_elementwise(
    side: Side,
    channels: &ChannelSet,
    ios: &IosState,
    w: &Beamformers,
    state: &WmmseState,
    opts: &SumRateOptions,
) -> CVector {
    let phi0 = match side {
        Side::Reflect => &ios.phi_r,
        Side::Transmit => &ios.phi_t,
    };
    if side_users(channels.k_r(), channels.n_users(), side).is_empty() || ios.mode == ControlMode::NoIos {
        return phi0.clone();
    }
    let (e, f) = phase_quadratic(side, channels, ios, w, state);
    phase_sweeps(&e, &f, phi0, opts)
}

/// Quadratic forms of the weighted MSE sum in the amplitudes:
/// `ζᵀH_rζ − 2ℜ{ζᵀϖ_r} + ηᵀH_tη − 2ℜ{ηᵀϖ_t}` up to a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeQuadratic {
    pub h_r: CMatrix,
    pub varpi_r: CVector,
    pub h_t: CMatrix,
    pub varpi_t: CVector,
}

impl AmplitudeQuadratic {
    pub fn value(&self, zeta: &RVector) -> f64 {
        let eta = zeta.map(transmit_amplitude);
        let part = |h: &CMatrix, v: &CVector, x: &RVector| {
            let xc = x.map(|x| C64::new(x, 0.0));
            quadratic_value(h, v, &xc)
        };
        part(&self.h_r, &self.varpi_r, zeta) + part(&self.h_t, &self.varpi_t, &eta)
    }
}

pub fn amplitude_quadratic(
    channels: &ChannelSet,
    ios: &IosState,
    w: &Beamformers,
    state: &WmmseState,
) -> AmplitudeQuadratic {
    let k_r = channels.k_r();
    let ws = w.stacked();
    let gw = &channels.g * &ws;
    let m = channels.n_elements();
    let mut q = AmplitudeQuadratic {
        h_r: CMatrix::zeros(m, m),
        varpi_r: CVector::zeros(m),
        h_t: CMatrix::zeros(m, m),
        varpi_t: CVector::zeros(m),
    };
    for k in 0..channels.n_users() {
        let (h, phi, hm, varpi) = if k < k_r {
            (&channels.h_r[k], &ios.phi_r, &mut q.h_r, &mut q.varpi_r)
        } else {
            (&channels.h_t[k - k_r], &ios.phi_t, &mut q.h_t, &mut q.varpi_t)
        };
        let (nu, mu) = (state.nu[k], state.mu[k]);
        let n2 = nu.norm_sqr();
        for j in 0..ws.ncols() {
            let a = CVector::from_fn(m, |mm, _| h[mm] * (phi[mm] * gw[(mm, j)]).conj());
            hm.gerc(C64::new(mu * n2, 0.0), &a, &a, C64::new(1.0, 0.0));
            if j == k {
                varpi.axpy(nu * mu, &a, C64::new(1.0, 0.0));
            }
            if k < k_r {
                let d = channels.h_d[k].dotc(&ws.column(j));
                varpi.axpy(-d * (mu * n2), &a, C64::new(1.0, 0.0));
            }
        }
    }
    q
}

/// Coefficients of `g(ζ) = δ₁ζ + δ₂√(1−ζ²) + δ₃ζ² + δ₄(1−ζ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementCoefficients {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
}

impl ElementCoefficients {
    pub fn value(&self, z: f64) -> f64 {
        let e = transmit_amplitude(z);
        self.d1 * z + self.d2 * e + self.d3 * z * z + self.d4 * (1.0 - z * z)
    }

    /// Left side of the stationarity condition
    /// `2(δ₃−δ₄)ζ + δ₁ − δ₂ζ/√(1−ζ²)`.
    pub fn derivative(&self, z: f64) -> f64 {
        2.0 * (self.d3 - self.d4) * z + self.d1 - self.d2 * z / transmit_amplitude(z)
    }

    /// Interior stationary points, bracketed by sign changes on a 64-point
    /// grid over `[0, 1 − 1e-8]` and refined by bisection.
    pub fn stationary_points(&self) -> Vec<f64> {
        const POINTS: usize = 64;
        let top = 1.0 - 1e-8;
        let grid: Vec<f64> = (0..=POINTS).map(|i| top * i as f64 / POINTS as f64).collect();
        let mut roots = Vec::new();
        for pair in grid.windows(2) {
            let (mut lo, mut hi) = (pair[0], pair[1]);
            let (flo, fhi) = (self.derivative(lo), self.derivative(hi));
            if flo == 0.0 {
                roots.push(lo);
                continue;
            }
            if flo.signum() == fhi.signum() {
                continue;
            }
            let lo_sign = flo.signum();
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.derivative(mid).signum() == lo_sign {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(0.5 * (lo + hi));
        }
        roots
    }

    /// Minimizer of `g` on `[0, 1]` among the stationary points, the
    /// endpoints, the grid and `current`.
    pub fn minimize(&self, current: f64) -> f64 {
        let mut best = (current, self.value(current));
        let grid = (0..=64).map(|i| i as f64 / 64.0);
        for z in self.stationary_points().into_iter().chain([0.0, 1.0]).chain(grid) {
            let v = self.value(z);
            if v < best.1 {
                best = (z, v);
            }
        }
        best.0
    }
}

/// Cyclic per-element minimization of the amplitude quadratic.
pub fn zeta_sweeps(q: &AmplitudeQuadratic, zeta0: &RVector, opts: &SumRateOptions) -> RVector {
    let m = zeta0.len();
    let re_r = q.h_r.map(|z| z.re);
    let re_t = q.h_t.map(|z| z.re);
    let mut zeta = zeta0.clone();
    let mut eta = zeta.map(transmit_amplitude);
    let mut yr = &re_r * &zeta;
    let mut yt = &re_t * &eta;
    let mut value = q.value(&zeta);
    for _ in 0..opts.max_sweeps {
        for i in 0..m {
            let c = ElementCoefficients {
                d1: 2.0 * (yr[i] - re_r[(i, i)] * zeta[i] - q.varpi_r[i].re),
                d2: 2.0 * (yt[i] - re_t[(i, i)] * eta[i] - q.varpi_t[i].re),
                d3: re_r[(i, i)],
                d4: re_t[(i, i)],
            };
            let z = c.minimize(zeta[i]);
            if z != zeta[i] {
                let e = transmit_amplitude(z);
                yr.axpy(z - zeta[i], &re_r.column(i), 1.0);
                yt.axpy(e - eta[i], &re_t.column(i), 1.0);
                zeta[i] = z;
                eta[i] = e;
            }
        }
        let next = q.value(&zeta);
        let change = (value - next).abs();
        value = next;
        if change <= opts.sweep_rel_tol * value.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }
    zeta
}

pub fn update_zeta_elementwise(
    channels: &ChannelSet,
    ios: &IosState,
    w: &Beamformers,
    state: &WmmseState,
    opts: &SumRateOptions,
) -> RVector {
    if ios.mode == ControlMode::NoIos || channels.n_elements() == 0 {
        return ios.zeta.clone();
    }
    let q = amplitude_quadratic(channels, ios, w, state);
    zeta_sweeps(&q, &ios.zeta, opts)
}

/// Matched filters `c_k/‖c_k‖` scaled to share the budget equally.
pub fn matched_filter_start(channels: &ChannelSet, ios: &IosState, power_budget: f64) -> Result<Beamformers> {
    let rows = effective_rows(channels, ios)?;
    let k = rows.nrows();
    let share = (power_budget / k.max(1) as f64).sqrt();
    let mut w = CMatrix::zeros(channels.n_tx(), k);
    for i in 0..k {
        let c = rows.row(i).adjoint();
        let norm = c.norm();
        if norm > 0.0 {
            w.set_column(i, &(c * C64::new(share / norm, 0.0)));
        }
    }
    Ok(Beamformers::from_stacked(&w, channels.k_r()))
}

/// Weighted-MMSE objective and sum-rate at the optimal auxiliaries.
fn evaluate(channels: &ChannelSet, ios: &IosState, w: &Beamformers, noise: Noise) -> Result<(f64, f64)> {
    let x = gain_matrix(channels, ios, w)?;
    let sinr = sinr_from_gains(&x, noise, channels.k_r());
    let rate = rate_of(&sinr);
    Ok((channels.n_users() as f64 - rate, rate))
}

/// Full joint design from the equal split with aligned phases and matched
/// filters.
pub fn sum_rate_solve(channels: &ChannelSet, cfg: &SystemConfig, opts: &SumRateOptions) -> Result<SolveReport> {
    channels.check_config(cfg)?;
    let ios = aligned_start(
        channels,
        RVector::from_element(channels.n_elements(), std::f64::consts::FRAC_1_SQRT_2),
        ControlMode::Ued,
    );
    let w = matched_filter_start(channels, &ios, cfg.power_budget)?;
    sum_rate_from(
        channels,
        cfg.noise(),
        cfg.power_budget,
        Solution { beamformers: w, ios },
        Plan::FULL,
        opts,
        None,
    )
}

/// Block coordinate descent from a given design.
pub fn sum_rate_from(
    channels: &ChannelSet,
    noise: Noise,
    power_budget: f64,
    init: Solution,
    plan: Plan,
    opts: &SumRateOptions,
    mut observer: Option<Observer<'_>>,
) -> Result<SolveReport> {
    if !(power_budget > 0.0) {
        return Err(Error::InvalidConfig(format!("power budget must be positive, got {power_budget}")));
    }
    init.ios.check_invariants()?;
    let Solution {
        beamformers: mut w,
        mut ios,
    } = init;
    let sigma2 = user_noise(channels, noise);
    let (objective, rate) = evaluate(channels, &ios, &w, noise)?;
    let mut objective_trace = vec![objective];
    let mut rate_trace = vec![rate];
    let mut status = SolveStatus::MaxIters;
    let mut iterations = 0;
    if let Some(obs) = observer.as_mut() {
        obs(0, &Solution {
            beamformers: w.clone(),
            ios: ios.clone(),
        });
    }
    while iterations < opts.outer_max_iters {
        iterations += 1;
        let x = gain_matrix(channels, &ios, &w)?;
        let nu = nu_from_gains(&x, &sigma2);
        let mse = mse_from_gains(&x, &nu, noise, channels.k_r());
        let mu = update_mu(&mse)?;
        let (w_next, lambda) = update_w(channels, &ios, &nu, &mu, power_budget, opts)?;
        w = w_next;
        let state = WmmseState {
            nu,
            mu,
            lagrange_lambda: lambda,
        };
        if plan.optimize_phases {
            ios.phi_r = update_phase_elementwise(Side::Reflect, channels, &ios, &w, &state, opts);
            ios.phi_t = update_phase_elementwise(Side::Transmit, channels, &ios, &w, &state, opts);
        }
        if plan.optimize_zeta {
            ios.zeta = update_zeta_elementwise(channels, &ios, &w, &state, opts);
        }
        let x = gain_matrix(channels, &ios, &w)?;
        let objective = wmmse_objective(&mse_from_gains(&x, &state.nu, noise, channels.k_r()), &state.mu);
        let rate = rate_of(&sinr_from_gains(&x, noise, channels.k_r()));
        if !(objective.is_finite() && rate.is_finite() && w.is_finite()) {
            return Err(Error::NonFinite {
                what: "weighted MSE objective",
                iteration: iterations,
            });
        }
        let prev = *objective_trace.last().expect("trace starts non-empty");
        objective_trace.push(objective);
        rate_trace.push(rate);
        if let Some(obs) = observer.as_mut() {
            obs(iterations, &Solution {
                beamformers: w.clone(),
                ios: ios.clone(),
            });
        }
        if (prev - objective).abs() <= opts.outer_rel_tol * prev.abs().max(1.0) {
            status = SolveStatus::Converged;
            break;
        }
    }
    debug_assert!(total_power(&w) <= power_budget * (1.0 + 1e-12));
    Ok(SolveReport {
        objective_trace,
        rate_trace,
        solution: Solution { beamformers: w, ios },
        status,
        iterations,
    })
}
