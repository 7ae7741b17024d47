//! Total transmit power minimization under per-user SINR targets.
//!
//! The outer loop alternates three blocks: phase design on each side of the
//! surface (a min-max Dinkelbach scheme solved on the circle manifold), the
//! energy split, and the minimum-power precoder for the resulting channels.
//! Each block leaves the current precoder feasible, so the precoder solve can
//! only lower the power.

use nalgebra::linalg::{Cholesky, LU};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::manifold::{normalize_phases, rcg_minimize, AffineSquares, RcgOptions, SmoothedMax};
use crate::model::{
    effective_rows, gain_matrix, sinr_from_gains, total_power, transmit_amplitude, Beamformers, CMatrix,
    CVector, ChannelSet, ControlMode, IosState, Noise, RVector, Solution, SolveReport, SolveStatus,
    SystemConfig, C64,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerMinOptions {
    pub outer_max_iters: usize,
    pub outer_rel_tol: f64,
    /// Relative change of the Dinkelbach parameter that ends a phase design.
    pub dinkelbach_tol: f64,
    pub dinkelbach_max_iters: usize,
    /// Interval length at which the per-element energy-split search stops.
    pub bisection_tol: f64,
    /// Virtual uplink power (watts) above which the precoder problem is
    /// declared infeasible.
    pub feasibility_cap: f64,
    pub fixed_point_tol: f64,
    pub fixed_point_max_iters: usize,
    pub energy_rounds: usize,
    pub init_retries: usize,
    /// When the alternating blocks stop improving, try one coordinate sweep
    /// on the transmit power itself before declaring convergence.
    pub polish_on_stall: bool,
    /// Scan points per coordinate in that sweep.
    pub polish_points: usize,
    pub rcg: RcgOptions,
}

impl Default for PowerMinOptions {
    fn default() -> Self {
        Self {
            outer_max_iters: 100,
            outer_rel_tol: 1e-4,
            dinkelbach_tol: 1e-4,
            dinkelbach_max_iters: 10,
            bisection_tol: 1e-6,
            feasibility_cap: 1e8,
            fixed_point_tol: 1e-13,
            fixed_point_max_iters: 20_000,
            energy_rounds: 10,
            init_retries: 10,
            polish_on_stall: true,
            polish_points: 32,
            rcg: RcgOptions {
                max_iters: 100,
                ..RcgOptions::default()
            },
        }
    }
}

/// Which blocks of the alternating scheme are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plan {
    pub optimize_phases: bool,
    pub optimize_zeta: bool,
}

impl Plan {
    pub const FULL: Plan = Plan {
        optimize_phases: true,
        optimize_zeta: true,
    };
}

/// Callback invoked with the outer iteration index and the current design,
/// once after initialization and after every outer iteration.
pub type Observer<'a> = &'a mut dyn FnMut(usize, &Solution);

/// Side of the surface a phase vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Reflect,
    Transmit,
}

/// Minimum-power precoders for fixed composite rows (`K × N_t`, row `k` is
/// `c_kᴴ`), solved through the virtual uplink. Returns the `N_t × K` matrix.
pub fn solve_tx_rows(rows: &CMatrix, targets: &[f64], noise: &[f64], opts: &PowerMinOptions) -> Result<CMatrix> {
    let (k, n) = rows.shape();
    if targets.len() != k || noise.len() != k {
        return Err(Error::Dimension(format!(
            "{} targets and {} noise powers for {k} users",
            targets.len(),
            noise.len()
        )));
    }
    if k == 0 {
        return Ok(CMatrix::zeros(n, 0));
    }
    let h: Vec<CVector> = (0..k)
        .map(|i| rows.row(i).adjoint() / C64::new(noise[i].sqrt(), 0.0))
        .collect();
    if h.iter().any(|h| !(h.norm() > 0.0)) {
        return Err(Error::Infeasible);
    }
    let covariance = |q: &[f64]| {
        let mut s = CMatrix::identity(n, n);
        for (hj, qj) in h.iter().zip(q) {
            s += hj * hj.adjoint() * C64::new(*qj, 0.0);
        }
        s
    };
    // image of q under the virtual uplink map, plus Σ⁻¹h_k for the Jacobian
    let step = |q: &[f64]| -> Result<(Vec<f64>, Vec<CVector>)> {
        let chol = Cholesky::new(covariance(q)).ok_or(Error::Infeasible)?;
        let s_h: Vec<CVector> = h.iter().map(|hk| chol.solve(hk)).collect();
        let t = (0..k)
            .map(|i| 1.0 / ((1.0 + 1.0 / targets[i]) * h[i].dotc(&s_h[i]).re))
            .collect();
        Ok((t, s_h))
    };
    let residual = |q: &[f64], t: &[f64]| q.iter().zip(t).map(|(a, b)| ((a - b) / b).abs()).fold(0.0, f64::max);
    let mut q = vec![0.0; k];
    let (mut t, mut s_h) = step(&q)?;
    let mut converged = false;
    for _ in 0..opts.fixed_point_max_iters {
        if t.iter().any(|x| !(x.is_finite() && *x <= opts.feasibility_cap)) {
            return Err(Error::Infeasible);
        }
        let r = residual(&q, &t);
        if r <= opts.fixed_point_tol {
            converged = true;
            break;
        }
        // Newton on q − T(q), kept only when it shrinks the residual
        let jac = CMatrix::from_fn(k, k, |i, j| {
            let y = h[i].dotc(&s_h[i]).re;
            let d = t[i] * h[i].dotc(&s_h[j]).norm_sqr() / y;
            C64::new(if i == j { 1.0 - d } else { -d }, 0.0)
        });
        let rhs = CVector::from_fn(k, |i, _| C64::new(t[i] - q[i], 0.0));
        let newton = LU::new(jac).solve(&rhs).map(|d| (0..k).map(|i| q[i] + d[i].re).collect::<Vec<f64>>());
        let mut accepted = false;
        if let Some(qn) = newton {
            if qn.iter().all(|x| *x > 0.0 && x.is_finite() && *x <= opts.feasibility_cap) {
                if let Ok((tn, sn)) = step(&qn) {
                    if residual(&qn, &tn) < r {
                        q = qn;
                        t = tn;
                        s_h = sn;
                        accepted = true;
                    }
                }
            }
        }
        if !accepted {
            q = t;
            (t, s_h) = step(&q)?;
        }
    }
    if !converged {
        return Err(Error::Infeasible);
    }

    let chol = Cholesky::new(covariance(&q)).ok_or(Error::Infeasible)?;
    let u: Vec<CVector> = h
        .iter()
        .map(|hk| {
            let d = chol.solve(hk);
            let norm = d.norm();
            d / C64::new(norm, 0.0)
        })
        .collect();
    let a = CMatrix::from_fn(k, k, |i, j| {
        let g = h[i].dotc(&u[j]).norm_sqr();
        C64::new(if i == j { g / targets[i] } else { -g }, 0.0)
    });
    let ones = CVector::from_element(k, C64::new(1.0, 0.0));
    let p = LU::new(a).solve(&ones).ok_or(Error::Infeasible)?;
    let mut w = CMatrix::zeros(n, k);
    for (i, uk) in u.iter().enumerate() {
        let pk = p[i].re;
        if !(pk > 0.0 && pk.is_finite()) {
            return Err(Error::Infeasible);
        }
        w.set_column(i, &(uk * C64::new(pk.sqrt(), 0.0)));
    }
    Ok(w)
}

fn user_noise(channels: &ChannelSet, noise: Noise) -> Vec<f64> {
    (0..channels.n_users())
        .map(|k| noise.for_user(k, channels.k_r()))
        .collect()
}

/// Minimum-power precoders meeting every target with equality, or
/// [`Error::Infeasible`] when the virtual uplink iteration diverges.
pub fn solve_tx_beamforming(
    channels: &ChannelSet,
    ios: &IosState,
    targets: &[f64],
    noise: Noise,
    opts: &PowerMinOptions,
) -> Result<Beamformers> {
    let rows = effective_rows(channels, ios)?;
    let w = solve_tx_rows(&rows, targets, &user_noise(channels, noise), opts)?;
    Ok(Beamformers::from_stacked(&w, channels.k_r()))
}

fn side_users(channels: &ChannelSet, side: Side) -> std::ops::Range<usize> {
    match side {
        Side::Reflect => 0..channels.k_r(),
        Side::Transmit => channels.k_r()..channels.n_users(),
    }
}

/// Largest `Γ_k / γ_k` over the given users.
fn worst_ratio(x: &CMatrix, targets: &[f64], noise: Noise, k_r: usize, users: std::ops::Range<usize>) -> f64 {
    let sinr = sinr_from_gains(x, noise, k_r);
    users.map(|k| targets[k] / sinr[k]).fold(f64::NEG_INFINITY, f64::max)
}

/// Dinkelbach residuals of one side as functions of that side's phases,
/// divided by `Γ_k σ_k²`:
/// `[Γ_k (Σ_{i≠k} |c_kᴴw_i|² + σ_k²) − λ |c_kᴴw_k|²] / (Γ_k σ_k²)`.
pub fn dinkelbach_terms(
    side: Side,
    channels: &ChannelSet,
    ios: &IosState,
    w: &Beamformers,
    targets: &[f64],
    noise: Noise,
    lambda: f64,
) -> Vec<AffineSquares> {
    let k_r = channels.k_r();
    let ws = w.stacked();
    let gw = &channels.g * &ws;
    let (m, n_beams) = (channels.n_elements(), ws.ncols());
    let amp = match side {
        Side::Reflect => ios.zeta.clone(),
        Side::Transmit => ios.eta(),
    };
    side_users(channels, side)
        .map(|k| {
            let h = match side {
                Side::Reflect => &channels.h_r[k],
                Side::Transmit => &channels.h_t[k - k_r],
            };
            let v = CMatrix::from_fn(m, n_beams, |mm, i| h[mm] * amp[mm] * gw[(mm, i)].conj());
            let offsets = match side {
                Side::Reflect => CVector::from_fn(n_beams, |i, _| channels.h_d[k].dotc(&ws.column(i))),
                Side::Transmit => CVector::zeros(n_beams),
            };
            let sigma2 = noise.for_user(k, k_r);
            let weights = RVector::from_fn(n_beams, |i, _| {
                if i == k {
                    -lambda / (targets[k] * sigma2)
                } else {
                    1.0 / sigma2
                }
            });
            AffineSquares {
                v,
                offsets,
                weights,
                constant: 1.0,
            }
        })
        .collect()
}

fn with_phase(ios: &IosState, side: Side, phi: &CVector) -> IosState {
    let mut s = ios.clone();
    match side {
        Side::Reflect => s.phi_r = phi.clone(),
        Side::Transmit => s.phi_t = phi.clone(),
    }
    s
}

fn design_phase(
    side: Side,
    channels: &ChannelSet,
    ios: &IosState,
    w: &Beamformers,
    targets: &[f64],
    noise: Noise,
    opts: &PowerMinOptions,
) -> Result<CVector> {
    let current = match side {
        Side::Reflect => ios.phi_r.clone(),
        Side::Transmit => ios.phi_t.clone(),
    };
    let users = side_users(channels, side);
    if users.is_empty() || ios.mode == ControlMode::NoIos || channels.n_elements() == 0 {
        return Ok(current);
    }
    let ratio = |phi: &CVector| -> Result<f64> {
        let x = gain_matrix(channels, &with_phase(ios, side, phi), w)?;
        Ok(worst_ratio(&x, targets, noise, channels.k_r(), users.clone()))
    };
    let mut phi = current;
    let mut best = ratio(&phi)?;
    if !best.is_finite() {
        return Ok(phi);
    }
    for _ in 0..opts.dinkelbach_max_iters {
        let lambda = best;
        let terms = dinkelbach_terms(side, channels, ios, w, targets, noise, lambda);
        let obj = SmoothedMax::at(terms, &phi)?;
        let res = rcg_minimize(&obj, &phi, &opts.rcg)?;
        let cand = normalize_phases(&res.phi);
        let r = ratio(&cand)?;
        if !(r < best) {
            break;
        }
        phi = cand;
        best = r;
        if lambda - r <= opts.dinkelbach_tol * lambda {
            break;
        }
    }
    Ok(phi)
}

/// Reflection phases that do not increase the worst `Γ_k / γ_k` among the
/// reflected users.
pub fn design_phase_r(
    channels: &ChannelSet,
    ios: &IosState,
    w: &Beamformers,
    targets: &[f64],
    noise: Noise,
    opts: &PowerMinOptions,
) -> Result<CVector> {
    design_phase(Side::Reflect, channels, ios, w, targets, noise, opts)
}

/// Transmission phases that do not increase the worst `Γ_k / γ_k` among the
/// transmitted users.
pub fn design_phase_t(
    channels: &ChannelSet,
    ios: &IosState,
    w: &Beamformers,
    targets: &[f64],
    noise: Noise,
    opts: &PowerMinOptions,
) -> Result<CVector> {
    design_phase(Side::Transmit, channels, ios, w, targets, noise, opts)
}

/// Per-element view of the received gains as functions of the energy split.
///
/// `x[k][i] = c_kᴴ w_i` is kept current while single amplitudes change:
/// element `m` contributes `ζ_m a[k][i][m]` for reflected users and
/// `η_m a[k][i][m]` for transmitted users.
pub(crate) struct SplitGains {
    pub(crate) k_r: usize,
    pub(crate) a: Vec<Vec<CVector>>,
    pub(crate) x: CMatrix,
}

impl SplitGains {
    pub(crate) fn new(channels: &ChannelSet, ios: &IosState, w: &Beamformers) -> Result<Self> {
        let k_r = channels.k_r();
        let ws = w.stacked();
        let gw = &channels.g * &ws;
        let m = channels.n_elements();
        let a = (0..channels.n_users())
            .map(|k| {
                let (h, phi) = if k < k_r {
                    (&channels.h_r[k], &ios.phi_r)
                } else {
                    (&channels.h_t[k - k_r], &ios.phi_t)
                };
                (0..ws.ncols())
                    .map(|i| CVector::from_fn(m, |mm, _| h[mm].conj() * phi[mm] * gw[(mm, i)]))
                    .collect()
            })
            .collect();
        let x = gain_matrix(channels, ios, w)?;
        Ok(Self { k_r, a, x })
    }

    pub(crate) fn coef(&self, k: usize, z: f64) -> f64 {
        if k < self.k_r {
            z
        } else {
            transmit_amplitude(z)
        }
    }

    /// Gains with element `m` moved from `from` to `to`.
    pub(crate) fn gain_at(&self, k: usize, i: usize, m: usize, from: f64, to: f64) -> C64 {
        self.x[(k, i)] + self.a[k][i][m] * (self.coef(k, to) - self.coef(k, from))
    }

    pub(crate) fn commit(&mut self, m: usize, from: f64, to: f64) {
        for k in 0..self.x.nrows() {
            let d = self.coef(k, to) - self.coef(k, from);
            for i in 0..self.x.ncols() {
                self.x[(k, i)] += self.a[k][i][m] * d;
            }
        }
    }
}

/// Minimizes `f` on `[0, 1]`: a uniform scan followed by golden-section
/// refinement around the best scan point.
pub(crate) fn scan_golden<F: Fn(f64) -> f64>(f: F, points: usize, tol: f64) -> (f64, f64) {
    let mut best = (0.0, f(0.0));
    for j in 1..=points {
        let z = j as f64 / points as f64;
        let v = f(z);
        if v < best.1 {
            best = (z, v);
        }
    }
    let h = 1.0 / points as f64;
    let (mut lo, mut hi) = ((best.0 - h).max(0.0), (best.0 + h).min(1.0));
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - r * (hi - lo);
    let mut d = lo + r * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    while hi - lo > tol {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - r * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + r * (hi - lo);
            fd = f(d);
        }
    }
    for (z, v) in [(c, fc), (d, fd)] {
        if v < best.1 {
            best = (z, v);
        }
    }
    best
}

/// Energy split that does not decrease `min_k γ_k / Γ_k`.
///
/// Alternates the Dinkelbach parameter `κ = max_k Γ_k / γ_k` with cyclic
/// per-element minimization of the largest normalized residual
/// `[Γ_k (I_k + σ_k²) − κ S_k] / (Γ_k σ_k²)`.
pub fn design_energy_division_pm(
    channels: &ChannelSet,
    ios: &IosState,
    w: &Beamformers,
    targets: &[f64],
    noise: Noise,
    opts: &PowerMinOptions,
) -> Result<RVector> {
    let mut zeta = ios.zeta.clone();
    if ios.mode == ControlMode::NoIos || channels.n_elements() == 0 {
        return Ok(zeta);
    }
    let k_r = channels.k_r();
    let n_users = channels.n_users();
    let mut gains = SplitGains::new(channels, ios, w)?;
    let ratio = |x: &CMatrix| worst_ratio(x, targets, noise, k_r, 0..n_users);
    let mut kappa = ratio(&gains.x);
    for _ in 0..opts.energy_rounds {
        if !kappa.is_finite() {
            break;
        }
        for m in 0..zeta.len() {
            let from = zeta[m];
            let worst = |z: f64| {
                (0..n_users)
                    .map(|k| {
                        let sigma2 = noise.for_user(k, k_r);
                        let mut total = 0.0;
                        let mut signal = 0.0;
                        for i in 0..n_users {
                            let p = gains.gain_at(k, i, m, from, z).norm_sqr();
                            total += p;
                            if i == k {
                                signal = p;
                            }
                        }
                        (targets[k] * (total - signal + sigma2) - kappa * signal) / (targets[k] * sigma2)
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            };
            let current = worst(from);
            let (z, v) = scan_golden(worst, 64, opts.bisection_tol);
            if v < current {
                gains.commit(m, from, z);
                zeta[m] = z;
            }
        }
        let next = ratio(&gains.x);
        let done = kappa - next <= opts.dinkelbach_tol * kappa;
        kappa = next.min(kappa);
        if done {
            break;
        }
    }
    Ok(zeta)
}

/// One cyclic sweep over single surface coordinates (each `ζ_m`, each
/// reflection and transmission phase) that minimizes the transmit power with
/// the precoders re-solved for every candidate value. Returns the improved
/// design, or `None` if no coordinate lowers the power.
pub fn polish_power(
    channels: &ChannelSet,
    ios: &IosState,
    targets: &[f64],
    noise: Noise,
    plan: Plan,
    opts: &PowerMinOptions,
) -> Result<Option<(IosState, Beamformers)>> {
    if ios.mode == ControlMode::NoIos {
        return Ok(None);
    }
    let power = |s: &IosState| {
        solve_tx_beamforming(channels, s, targets, noise, opts)
            .map(|w| total_power(&w))
            .unwrap_or(f64::INFINITY)
    };
    let mut cur = ios.clone();
    let mut best = power(&cur);
    if !best.is_finite() {
        return Ok(None);
    }
    let start = best;
    let points = opts.polish_points.max(2);
    let sides: Vec<Side> = [Side::Reflect, Side::Transmit]
        .into_iter()
        .filter(|side| !side_users(channels, *side).is_empty())
        .collect();
    let set_phase = |s: &mut IosState, side: Side, m: usize, u: f64| {
        let p = C64::from_polar(1.0, std::f64::consts::TAU * u);
        match side {
            Side::Reflect => s.phi_r[m] = p,
            Side::Transmit => s.phi_t[m] = p,
        }
    };
    for m in 0..cur.n_elements() {
        if plan.optimize_zeta && plan.optimize_phases {
            // a side whose amplitude is near zero has a meaningless phase, so
            // the split and that phase are searched together
            let coarse = (points / 2).max(2);
            for &side in &sides {
                for i in 0..=coarse {
                    for j in 0..coarse {
                        let mut s = cur.clone();
                        s.zeta[m] = i as f64 / coarse as f64;
                        set_phase(&mut s, side, m, j as f64 / coarse as f64);
                        let v = power(&s);
                        if v < best {
                            cur = s;
                            best = v;
                        }
                    }
                }
            }
        }
        if plan.optimize_zeta {
            let (z, v) = scan_golden(
                |z| {
                    let mut s = cur.clone();
                    s.zeta[m] = z;
                    power(&s)
                },
                points,
                opts.bisection_tol,
            );
            if v < best {
                cur.zeta[m] = z;
                best = v;
            }
        }
        if plan.optimize_phases {
            for &side in &sides {
                let (u, v) = scan_golden(
                    |u| {
                        let mut s = cur.clone();
                        set_phase(&mut s, side, m, u);
                        power(&s)
                    },
                    points,
                    opts.bisection_tol,
                );
                if v < best {
                    set_phase(&mut cur, side, m, u);
                    best = v;
                }
            }
        }
    }
    if !(best < start) {
        return Ok(None);
    }
    let w = solve_tx_beamforming(channels, &cur, targets, noise, opts)?;
    Ok(Some((cur, w)))
}

/// Phases that align every element of one user's cascaded path with its
/// direct path (or with each other when there is none), refined over a few
/// rounds of matched filtering.
fn align_to_user(channels: &ChannelSet, ios: &IosState, side: Side, k: usize) -> CVector {
    let m = channels.n_elements();
    let h = match side {
        Side::Reflect => &channels.h_r[k],
        Side::Transmit => &channels.h_t[k],
    };
    let amp = match side {
        Side::Reflect => ios.zeta.clone(),
        Side::Transmit => ios.eta(),
    };
    let direct = match side {
        Side::Reflect => Some(&channels.h_d[k]),
        Side::Transmit => None,
    };
    let mut phi = CVector::from_element(m, C64::new(1.0, 0.0));
    for _ in 0..4 {
        // composite column c = Gᴴ diag(conj(amp ⊙ φ)) h + h_d
        let a = h.zip_map(&phi.zip_map(&amp, |p, z| p * z), |h, p| h.conj() * p);
        let mut c = channels.g.tr_mul(&a).map(|z| z.conj());
        if let Some(d) = direct {
            c += d;
        }
        let norm = c.norm();
        if !(norm > 0.0) {
            break;
        }
        let w = c / C64::new(norm, 0.0);
        let gw = &channels.g * &w;
        let reference = direct.map(|d| d.dotc(&w)).unwrap_or(C64::new(1.0, 0.0));
        let target = if reference.norm() > 0.0 {
            reference / reference.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        phi = normalize_phases(&CVector::from_fn(m, |mm, _| {
            let t = h[mm].conj() * gw[mm];
            if t.norm() > 0.0 {
                target * (t.conj() / t.norm())
            } else {
                phi[mm]
            }
        }));
    }
    phi
}

/// Starting surface: the given amplitudes, each side's phases aligned to its
/// strongest user.
pub fn aligned_start(channels: &ChannelSet, zeta: RVector, mode: ControlMode) -> IosState {
    let m = channels.n_elements();
    let mut ios = IosState {
        phi_r: CVector::from_element(m, C64::new(1.0, 0.0)),
        phi_t: CVector::from_element(m, C64::new(1.0, 0.0)),
        zeta,
        mode,
    };
    let strongest = |hs: &[CVector]| {
        hs.iter()
            .enumerate()
            .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
            .map(|(k, _)| k)
    };
    if let Some(k) = strongest(&channels.h_r) {
        ios.phi_r = align_to_user(channels, &ios, Side::Reflect, k);
    }
    if let Some(k) = strongest(&channels.h_t) {
        ios.phi_t = align_to_user(channels, &ios, Side::Transmit, k);
    }
    ios
}

pub(crate) fn random_phases(rng: &mut ChaCha20Rng, m: usize) -> CVector {
    CVector::from_fn(m, |_, _| C64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU)))
}

/// Full joint design with per-element energy split, starting from the
/// equal split with aligned phases.
pub fn power_min_solve(channels: &ChannelSet, cfg: &SystemConfig, opts: &PowerMinOptions) -> Result<SolveReport> {
    channels.check_config(cfg)?;
    let m = channels.n_elements();
    let init = aligned_start(
        channels,
        RVector::from_element(m, std::f64::consts::FRAC_1_SQRT_2),
        ControlMode::Ued,
    );
    power_min_from(channels, &cfg.targets(), cfg.noise(), &[init], Plan::FULL, cfg.seed, opts, None)
}

/// Runs the alternating scheme from the first feasible start among `inits`,
/// falling back to random phases (with the first start's amplitudes).
#[allow(clippy::too_many_arguments)]
pub fn power_min_from(
    channels: &ChannelSet,
    targets: &[f64],
    noise: Noise,
    inits: &[IosState],
    plan: Plan,
    seed: u64,
    opts: &PowerMinOptions,
    mut observer: Option<Observer<'_>>,
) -> Result<SolveReport> {
    let first = inits.first().ok_or(Error::Empty("initial surface states"))?;
    let mut start = None;
    for ios in inits {
        ios.check_invariants()?;
        match solve_tx_beamforming(channels, ios, targets, noise, opts) {
            Ok(w) => {
                start = Some((ios.clone(), w));
                break;
            }
            Err(Error::Infeasible) => {}
            Err(e) => return Err(e),
        }
    }
    if start.is_none() && plan.optimize_phases {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        for _ in 0..opts.init_retries {
            let m = first.n_elements();
            let mut ios = first.clone();
            ios.phi_r = random_phases(&mut rng, m);
            ios.phi_t = random_phases(&mut rng, m);
            if let Ok(w) = solve_tx_beamforming(channels, &ios, targets, noise, opts) {
                start = Some((ios, w));
                break;
            }
        }
    }
    let Some((mut ios, mut w)) = start else {
        let k_r = channels.k_r();
        let empty = Beamformers::zeros(channels.n_tx(), k_r, channels.n_users() - k_r);
        return Ok(SolveReport::infeasible(Solution {
            beamformers: empty,
            ios: first.clone(),
        }));
    };

    let mut power = total_power(&w);
    let mut trace = vec![power];
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
        let mut next = ios.clone();
        if plan.optimize_phases {
            next.phi_r = design_phase_r(channels, &next, &w, targets, noise, opts)?;
            next.phi_t = design_phase_t(channels, &next, &w, targets, noise, opts)?;
        }
        if plan.optimize_zeta {
            next.zeta = design_energy_division_pm(channels, &next, &w, targets, noise, opts)?;
        }
        next.check_invariants()?;
        let candidate = match solve_tx_beamforming(channels, &next, targets, noise, opts) {
            Ok(c) => Some(c),
            Err(Error::Infeasible) => None,
            Err(e) => return Err(e),
        };
        let stalled = match candidate {
            Some(c) if total_power(&c) <= power => {
                ios = next;
                w = c;
                false
            }
            // the previous precoder stays feasible for the new surface, since
            // every block leaves the worst target-to-SINR ratio unchanged or lower
            _ => {
                if worst_ratio(
                    &gain_matrix(channels, &next, &w)?,
                    targets,
                    noise,
                    channels.k_r(),
                    0..channels.n_users(),
                ) <= 1.0 + 1e-9
                {
                    ios = next;
                }
                true
            }
        };
        let mut new_power = total_power(&w);
        let mut done = stalled || (power - new_power).abs() <= opts.outer_rel_tol * new_power;
        if done && opts.polish_on_stall && (plan.optimize_phases || plan.optimize_zeta) {
            if let Some((s, c)) = polish_power(channels, &ios, targets, noise, plan, opts)? {
                let p = total_power(&c);
                if p < new_power * (1.0 - opts.outer_rel_tol) {
                    ios = s;
                    w = c;
                    new_power = p;
                    done = false;
                }
            }
        }
        trace.push(new_power);
        if let Some(obs) = observer.as_mut() {
            obs(iterations, &Solution {
                beamformers: w.clone(),
                ios: ios.clone(),
            });
        }
        power = new_power;
        if done {
            status = SolveStatus::Converged;
            break;
        }
    }
    Ok(SolveReport {
        objective_trace: trace,
        rate_trace: Vec::new(),
        solution: Solution { beamformers: w, ios },
        status,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::ManifoldObjective;
    use crate::model::{sinr_all, Noise};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn rand_c(rng: &mut ChaCha8Rng) -> C64 {
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    }

    fn random_channels(rng: &mut ChaCha8Rng, n: usize, m: usize, k_r: usize, k_t: usize) -> ChannelSet {
        ChannelSet {
            g: CMatrix::from_fn(m, n, |_, _| rand_c(rng)),
            h_d: (0..k_r).map(|_| CVector::from_fn(n, |_, _| rand_c(rng) * 0.3)).collect(),
            h_r: (0..k_r).map(|_| CVector::from_fn(m, |_, _| rand_c(rng))).collect(),
            h_t: (0..k_t).map(|_| CVector::from_fn(m, |_, _| rand_c(rng))).collect(),
        }
    }

    fn random_ios(rng: &mut ChaCha8Rng, m: usize) -> IosState {
        IosState {
            phi_r: CVector::from_fn(m, |_, _| C64::from_polar(1.0, rng.gen_range(-PI..PI))),
            phi_t: CVector::from_fn(m, |_, _| C64::from_polar(1.0, rng.gen_range(-PI..PI))),
            zeta: RVector::from_fn(m, |_, _| rng.gen_range(0.0..1.0)),
            mode: ControlMode::Ued,
        }
    }

    fn direct_only(rows: Vec<CVector>) -> ChannelSet {
        let n = rows[0].len();
        ChannelSet {
            g: CMatrix::zeros(0, n),
            h_r: rows.iter().map(|_| CVector::zeros(0)).collect(),
            h_d: rows,
            h_t: vec![],
        }
    }

    #[test]
    fn single_user_closed_form() {
        let h = CVector::from_vec(vec![c(0.3, -0.4), c(1.2, 0.5), c(-0.2, 0.1)]);
        let ch = direct_only(vec![h.clone()]);
        let ios = IosState::uniform(0, 1.0, ControlMode::Ued);
        let (gamma, sigma2) = (7.0, 0.2);
        let w = solve_tx_beamforming(&ch, &ios, &[gamma], Noise::uniform(sigma2), &PowerMinOptions::default())
            .unwrap();
        let expected = gamma * sigma2 / h.norm_squared();
        assert_relative_eq!(total_power(&w), expected, max_relative = 1e-8);
        // matched-filter direction
        let col = w.w_r.column(0).into_owned();
        assert_relative_eq!(col.dotc(&h).norm(), col.norm() * h.norm(), max_relative = 1e-10);
    }

    #[test]
    fn orthogonal_users_decouple() {
        let h1 = CVector::from_vec(vec![c(2.0, 0.0), c(0.0, 0.0)]);
        let h2 = CVector::from_vec(vec![c(0.0, 0.0), c(0.0, 0.5)]);
        let ch = direct_only(vec![h1.clone(), h2.clone()]);
        let ios = IosState::uniform(0, 1.0, ControlMode::Ued);
        let w = solve_tx_beamforming(&ch, &ios, &[3.0, 5.0], Noise::uniform(0.1), &PowerMinOptions::default())
            .unwrap();
        let expected = 3.0 * 0.1 / 4.0 + 5.0 * 0.1 / 0.25;
        assert_relative_eq!(total_power(&w), expected, max_relative = 1e-8);
    }

    #[test]
    fn identical_channels_are_infeasible() {
        let h = CVector::from_vec(vec![c(1.0, 0.2), c(-0.3, 0.8)]);
        let ch = direct_only(vec![h.clone(), h]);
        let ios = IosState::uniform(0, 1.0, ControlMode::Ued);
        let r = solve_tx_beamforming(&ch, &ios, &[100.0, 100.0], Noise::uniform(1.0), &PowerMinOptions::default());
        assert_eq!(r.unwrap_err(), Error::Infeasible);
    }

    #[test]
    fn identical_channels_grid_confirms_infeasibility() {
        // with c₁ = c₂ = e₁ only |w_j[0]|² = g_j matters, so a grid over the
        // two gains covers every beam pair
        let mut best: f64 = 0.0;
        let steps = 40;
        for a in 0..=steps {
            for b in 0..=steps {
                let g1 = 10f64.powf(-2.0 + 6.0 * a as f64 / steps as f64);
                let g2 = 10f64.powf(-2.0 + 6.0 * b as f64 / steps as f64);
                let s1 = g1 / (g2 + 1.0);
                let s2 = g2 / (g1 + 1.0);
                best = best.max(s1.min(s2));
            }
        }
        assert!(best < 1.0, "best min-SINR {best}");
    }

    #[test]
    fn zero_composite_is_infeasible() {
        let ch = ChannelSet {
            g: CMatrix::from_element(2, 2, c(1.0, 0.0)),
            h_d: vec![CVector::from_element(2, c(1.0, 0.0))],
            h_r: vec![CVector::from_element(2, c(1.0, 0.0))],
            h_t: vec![CVector::from_element(2, c(1.0, 0.0))],
        };
        let ios = IosState::uniform(2, 1.0, ControlMode::Ued);
        let r = solve_tx_beamforming(&ch, &ios, &[1.0, 1.0], Noise::uniform(1.0), &PowerMinOptions::default());
        assert_eq!(r.unwrap_err(), Error::Infeasible);
    }

    #[test]
    fn constraints_are_active_at_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let ch = random_channels(&mut rng, 4, 6, 2, 1);
            let ios = random_ios(&mut rng, 6);
            let targets = [2.0, 3.0, 1.5];
            let noise = Noise {
                reflect: 0.1,
                transmit: 0.2,
            };
            let w = solve_tx_beamforming(&ch, &ios, &targets, noise, &PowerMinOptions::default()).unwrap();
            let s = sinr_all(&ch, &ios, &w, noise).unwrap();
            for (s, t) in s.iter().zip(targets) {
                assert_relative_eq!(*s, t, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn quadratic_residual_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = random_channels(&mut rng, 3, 3, 2, 1);
        let ios = random_ios(&mut rng, 3);
        let w = Beamformers {
            w_r: CMatrix::from_fn(3, 2, |_, _| rand_c(&mut rng)),
            w_t: CMatrix::from_fn(3, 1, |_, _| rand_c(&mut rng)),
        };
        let targets = [4.0, 2.5, 3.0];
        let noise = Noise {
            reflect: 0.3,
            transmit: 0.7,
        };
        let lambda = 0.8;
        for side in [Side::Reflect, Side::Transmit] {
            let terms = dinkelbach_terms(side, &ch, &ios, &w, &targets, noise, lambda);
            let phi = match side {
                Side::Reflect => &ios.phi_r,
                Side::Transmit => &ios.phi_t,
            };
            let x = gain_matrix(&ch, &ios, &w).unwrap();
            let users: Vec<usize> = match side {
                Side::Reflect => vec![0, 1],
                Side::Transmit => vec![2],
            };
            assert_eq!(terms.len(), users.len());
            for (t, k) in terms.iter().zip(users) {
                let sigma2 = noise.for_user(k, 2);
                let total: f64 = x.row(k).iter().map(|z| z.norm_sqr()).sum();
                let signal = x[(k, k)].norm_sqr();
                let direct = targets[k] * (total - signal + sigma2) - lambda * signal;
                let via_quadratic = t.value(phi) * targets[k] * sigma2;
                assert_relative_eq!(via_quadratic, direct, max_relative = 1e-10);
                let dense = t.to_dense().value(phi) * targets[k] * sigma2;
                assert_relative_eq!(dense, direct, max_relative = 1e-10);
            }
        }
    }

    fn single_path_instance(side: Side) -> (ChannelSet, IosState, Beamformers) {
        let one = CVector::from_element(1, c(1.0, 0.0));
        let ch = ChannelSet {
            g: CMatrix::from_element(1, 1, c(0.6, -0.8)),
            h_d: match side {
                Side::Reflect => vec![CVector::zeros(1)],
                Side::Transmit => vec![],
            },
            h_r: match side {
                Side::Reflect => vec![CVector::from_element(1, c(-0.2, 0.9))],
                Side::Transmit => vec![],
            },
            h_t: match side {
                Side::Reflect => vec![],
                Side::Transmit => vec![CVector::from_element(1, c(0.1, 0.5))],
            },
        };
        let ios = IosState {
            phi_r: CVector::from_element(1, C64::from_polar(1.0, 2.0)),
            phi_t: CVector::from_element(1, C64::from_polar(1.0, -1.0)),
            zeta: RVector::from_element(1, 0.6),
            mode: ControlMode::Ued,
        };
        let w = match side {
            Side::Reflect => Beamformers {
                w_r: CMatrix::from_columns(&[one]),
                w_t: CMatrix::zeros(1, 0),
            },
            Side::Transmit => Beamformers {
                w_r: CMatrix::zeros(1, 0),
                w_t: CMatrix::from_columns(&[one]),
            },
        };
        (ch, ios, w)
    }

    #[test]
    fn single_element_phase_matches_grid() {
        // with no direct path and one user, every phase gives the same SINR:
        // the grid oracle confirms the design never loses margin
        for side in [Side::Reflect, Side::Transmit] {
            let (ch, ios, w) = single_path_instance(side);
            let noise = Noise::uniform(0.1);
            let targets = [1.0];
            let phi = design_phase(side, &ch, &ios, &w, &targets, noise, &PowerMinOptions::default()).unwrap();
            let sinr_at = |p: C64| {
                let s = with_phase(&ios, side, &CVector::from_element(1, p));
                sinr_all(&ch, &s, &w, noise).unwrap()[0]
            };
            let mut grid_best: f64 = 0.0;
            let n = (2.0 * PI / 1e-3) as usize;
            for i in 0..n {
                grid_best = grid_best.max(sinr_at(C64::from_polar(1.0, i as f64 * 1e-3)));
            }
            assert!(sinr_at(phi[0]) >= grid_best * (1.0 - 1e-9));
        }
    }

    #[test]
    fn single_element_phase_aligns_with_direct_path() {
        let ch = ChannelSet {
            g: CMatrix::from_element(1, 1, c(0.6, -0.8)),
            h_d: vec![CVector::from_element(1, c(0.3, 0.4))],
            h_r: vec![CVector::from_element(1, c(-0.2, 0.9))],
            h_t: vec![],
        };
        let ios = IosState {
            phi_r: CVector::from_element(1, C64::from_polar(1.0, 2.5)),
            phi_t: CVector::from_element(1, c(1.0, 0.0)),
            zeta: RVector::from_element(1, 1.0),
            mode: ControlMode::Ued,
        };
        let w = Beamformers {
            w_r: CMatrix::from_element(1, 1, c(1.0, 0.0)),
            w_t: CMatrix::zeros(1, 0),
        };
        let noise = Noise::uniform(0.1);
        let phi = design_phase_r(&ch, &ios, &w, &[1.0], noise, &PowerMinOptions::default()).unwrap();
        let sinr_at = |p: C64| {
            let s = with_phase(&ios, Side::Reflect, &CVector::from_element(1, p));
            sinr_all(&ch, &s, &w, noise).unwrap()[0]
        };
        let mut grid_best = (0.0, 0.0);
        for i in 0..(2.0 * PI / 1e-3) as usize {
            let th = i as f64 * 1e-3;
            let v = sinr_at(C64::from_polar(1.0, th));
            if v > grid_best.1 {
                grid_best = (th, v);
            }
        }
        let got = sinr_at(phi[0]);
        assert!(got >= grid_best.1 * (1.0 - 1e-6), "design {got} grid {}", grid_best.1);
    }

    #[test]
    fn phase_design_without_users_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ch = random_channels(&mut rng, 2, 3, 0, 1);
        let ios = random_ios(&mut rng, 3);
        let w = Beamformers {
            w_r: CMatrix::zeros(2, 0),
            w_t: CMatrix::from_fn(2, 1, |_, _| rand_c(&mut rng)),
        };
        let opts = PowerMinOptions::default();
        assert_eq!(design_phase_r(&ch, &ios, &w, &[1.0], Noise::uniform(1.0), &opts).unwrap(), ios.phi_r);
        let ch = random_channels(&mut rng, 2, 3, 1, 0);
        let w = Beamformers {
            w_r: CMatrix::from_fn(2, 1, |_, _| rand_c(&mut rng)),
            w_t: CMatrix::zeros(2, 0),
        };
        assert_eq!(design_phase_t(&ch, &ios, &w, &[1.0], Noise::uniform(1.0), &opts).unwrap(), ios.phi_t);
    }

    #[test]
    fn phase_design_keeps_margin() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let opts = PowerMinOptions::default();
        for _ in 0..5 {
            let ch = random_channels(&mut rng, 3, 6, 2, 2);
            let ios = random_ios(&mut rng, 6);
            let targets = [1.0, 2.0, 1.5, 1.0];
            let noise = Noise::uniform(0.05);
            let w = solve_tx_beamforming(&ch, &ios, &targets, noise, &opts).unwrap();
            let before = gain_matrix(&ch, &ios, &w).unwrap();
            let phi_r = design_phase_r(&ch, &ios, &w, &targets, noise, &opts).unwrap();
            let after_ios = with_phase(&ios, Side::Reflect, &phi_r);
            let after = gain_matrix(&ch, &after_ios, &w).unwrap();
            let r0 = worst_ratio(&before, &targets, noise, 2, 0..2);
            let r1 = worst_ratio(&after, &targets, noise, 2, 0..2);
            assert!(r1 <= r0 * (1.0 + 1e-12), "{r1} > {r0}");
            assert!(r1 < 1.0);
        }
    }

    #[test]
    fn energy_split_extremes() {
        let opts = PowerMinOptions::default();
        // one reflected user, no direct path, phases co-aligned: all energy
        // to reflection is optimal
        let g = CMatrix::from_element(3, 1, c(1.0, 0.0));
        let ch = ChannelSet {
            g: g.clone(),
            h_d: vec![CVector::zeros(1)],
            h_r: vec![CVector::from_element(3, c(1.0, 0.0))],
            h_t: vec![],
        };
        let ios = IosState::uniform(3, 0.3, ControlMode::Ued);
        let w = Beamformers {
            w_r: CMatrix::from_element(1, 1, c(1.0, 0.0)),
            w_t: CMatrix::zeros(1, 0),
        };
        let z = design_energy_division_pm(&ch, &ios, &w, &[1.0], Noise::uniform(1.0), &opts).unwrap();
        assert!(z.iter().all(|z| (z - 1.0).abs() < 1e-6), "{z}");

        let ch = ChannelSet {
            g,
            h_d: vec![],
            h_r: vec![],
            h_t: vec![CVector::from_element(3, c(1.0, 0.0))],
        };
        let w = Beamformers {
            w_r: CMatrix::zeros(1, 0),
            w_t: CMatrix::from_element(1, 1, c(1.0, 0.0)),
        };
        let z = design_energy_division_pm(&ch, &ios, &w, &[1.0], Noise::uniform(1.0), &opts).unwrap();
        assert!(z.iter().all(|z| z.abs() < 1e-6), "{z}");
    }

    #[test]
    fn symmetric_split_matches_scan() {
        let ch = ChannelSet {
            g: CMatrix::from_element(1, 1, c(1.0, 0.0)),
            h_d: vec![CVector::zeros(1)],
            h_r: vec![CVector::from_element(1, c(0.8, 0.0))],
            h_t: vec![CVector::from_element(1, c(0.0, 0.8))],
        };
        let ios = IosState::uniform(1, 0.2, ControlMode::Ued);
        let w = Beamformers {
            w_r: CMatrix::from_element(1, 1, c(1.0, 0.0)),
            w_t: CMatrix::from_element(1, 1, c(0.0, 1.0)),
        };
        let noise = Noise::uniform(0.5);
        let targets = [1.0, 1.0];
        let z = design_energy_division_pm(&ch, &ios, &w, &targets, noise, &PowerMinOptions::default()).unwrap();
        let min_sinr = |z: f64| {
            let mut s = ios.clone();
            s.zeta[0] = z;
            sinr_all(&ch, &s, &w, noise).unwrap().into_iter().fold(f64::INFINITY, f64::min)
        };
        let mut scan = (0.0, f64::NEG_INFINITY);
        for i in 0..=10_000 {
            let zz = i as f64 * 1e-4;
            let v = min_sinr(zz);
            if v > scan.1 {
                scan = (zz, v);
            }
        }
        assert_relative_eq!(scan.0, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-4);
        assert_relative_eq!(z[0], std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-5);
    }

    #[test]
    fn energy_split_never_lowers_min_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let opts = PowerMinOptions::default();
        for _ in 0..5 {
            let ch = random_channels(&mut rng, 3, 5, 2, 1);
            let ios = random_ios(&mut rng, 5);
            let targets = [1.0, 2.0, 1.5];
            let noise = Noise::uniform(0.05);
            let w = solve_tx_beamforming(&ch, &ios, &targets, noise, &opts).unwrap();
            let zeta = design_energy_division_pm(&ch, &ios, &w, &targets, noise, &opts).unwrap();
            let mut after = ios.clone();
            after.zeta = zeta;
            after.check_invariants().unwrap();
            let m0 = min_margin(&ch, &ios, &w, &targets, noise);
            let m1 = min_margin(&ch, &after, &w, &targets, noise);
            assert!(m1 >= m0 * (1.0 - 1e-12), "{m1} < {m0}");
        }
    }

    fn min_margin(ch: &ChannelSet, ios: &IosState, w: &Beamformers, targets: &[f64], noise: Noise) -> f64 {
        sinr_all(ch, ios, w, noise)
            .unwrap()
            .iter()
            .zip(targets)
            .map(|(s, t)| s / t)
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn solve_is_monotone_and_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let opts = PowerMinOptions::default();
        for _ in 0..3 {
            let ch = random_channels(&mut rng, 3, 6, 1, 2);
            let targets = [2.0, 2.0, 2.0];
            let noise = Noise::uniform(0.05);
            let init = aligned_start(&ch, RVector::from_element(6, 0.5f64.sqrt()), ControlMode::Ued);
            let rep = power_min_from(&ch, &targets, noise, &[init], Plan::FULL, 1, &opts, None).unwrap();
            assert_ne!(rep.status, SolveStatus::Infeasible);
            assert_eq!(rep.objective_trace.len(), rep.iterations + 1);
            assert!(rep.objective_trace.windows(2).all(|p| p[1] <= p[0] + 1e-9));
            let s = sinr_all(&ch, &rep.solution.ios, &rep.solution.beamformers, noise).unwrap();
            assert!(s.iter().zip(targets).all(|(s, t)| *s >= t * (1.0 - 1e-6)));
            rep.solution.ios.check_invariants().unwrap();
        }
    }

    #[test]
    fn blocked_users_without_surface_are_infeasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let ch = random_channels(&mut rng, 2, 3, 1, 1);
        let ios = IosState::uniform(3, 0.5f64.sqrt(), ControlMode::NoIos);
        let rep = power_min_from(
            &ch,
            &[1.0, 1.0],
            Noise::uniform(1.0),
            &[ios],
            Plan {
                optimize_phases: false,
                optimize_zeta: false,
            },
            0,
            &PowerMinOptions::default(),
            None,
        )
        .unwrap();
        assert_eq!(rep.status, SolveStatus::Infeasible);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn scan_golden_finds_interior_minimum() {
        let (z, v) = scan_golden(|z| (z - 0.3141).powi(2), 64, 1e-9);
        assert_relative_eq!(z, 0.3141, epsilon = 1e-7);
        assert!(v < 1e-12);
    }
}
