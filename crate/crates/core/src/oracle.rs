//! Brute-force reference optima for very small instances.
//!
//! The surface is searched on a coarse full grid, then the best grid points
//! are polished by a compass search down to a step below the nominal grid
//! resolution. Precoders come from the closed-form power solver (power
//! minimization) or from multi-start WMMSE at the fixed surface (sum-rate).

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::model::{total_power, Beamformers, CMatrix, ChannelSet, ControlMode, IosState, Noise, RVector, C64};
use crate::power_min::{solve_tx_beamforming, Plan, PowerMinOptions};
use crate::sumrate::{matched_filter_start, sum_rate_from, SumRateOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleGrid {
    /// Levels per phase on the coarse grid.
    pub phase_levels: usize,
    /// Levels per amplitude on `[0, 1]` on the coarse grid.
    pub zeta_levels: usize,
    /// Coarse points polished by the compass search.
    pub refine_starts: usize,
    /// Compass search stops once steps drop below these.
    pub final_phase_step: f64,
    pub final_zeta_step: f64,
}

impl Default for OracleGrid {
    fn default() -> Self {
        Self {
            phase_levels: 12,
            zeta_levels: 11,
            refine_starts: 8,
            final_phase_step: std::f64::consts::PI / 500.0,
            final_zeta_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub value: f64,
    pub ios: IosState,
    pub evaluations: usize,
}

/// Free coordinates: every reflection phase (the direct path fixes their
/// reference), all transmission phases but the first (a common rotation does
/// not change any SINR), then the amplitudes.
struct Layout {
    m: usize,
    n_r: usize,
    n_t: usize,
}

impl Layout {
    fn new(channels: &ChannelSet) -> Self {
        let m = channels.n_elements();
        Self {
            m,
            n_r: if channels.k_r() > 0 { m } else { 0 },
            n_t: if channels.k_t() > 0 { m.saturating_sub(1) } else { 0 },
        }
    }

    fn dims(&self) -> usize {
        self.n_r + self.n_t + self.m
    }

    fn is_phase(&self, d: usize) -> bool {
        d < self.n_r + self.n_t
    }

    fn state(&self, x: &[f64]) -> IosState {
        let m = self.m;
        let phi_r = crate::model::CVector::from_fn(m, |i, _| {
            C64::from_polar(1.0, if self.n_r > 0 { x[i] } else { 0.0 })
        });
        let phi_t = crate::model::CVector::from_fn(m, |i, _| {
            C64::from_polar(1.0, if self.n_t > 0 && i > 0 { x[self.n_r + i - 1] } else { 0.0 })
        });
        let zeta = RVector::from_fn(m, |i, _| x[self.n_r + self.n_t + i].clamp(0.0, 1.0));
        IosState {
            phi_r,
            phi_t,
            zeta,
            mode: ControlMode::Ued,
        }
    }
}

/// Minimizes `f` over the surface; `f` returns `+∞` where undefined.
fn search<F: Fn(&IosState) -> f64>(channels: &ChannelSet, grid: &OracleGrid, f: F) -> Result<OracleResult> {
    if grid.phase_levels == 0 || grid.zeta_levels < 2 || grid.refine_starts == 0 {
        return Err(Error::InvalidConfig("oracle grid needs at least one phase and two amplitude levels".into()));
    }
    let layout = Layout::new(channels);
    let dims = layout.dims();
    let levels: Vec<usize> = (0..dims)
        .map(|d| if layout.is_phase(d) { grid.phase_levels } else { grid.zeta_levels })
        .collect();
    let value_of = |d: usize, i: usize| {
        if layout.is_phase(d) {
            TAU * i as f64 / grid.phase_levels as f64
        } else {
            i as f64 / (grid.zeta_levels - 1) as f64
        }
    };
    let total: usize = levels.iter().product();
    let mut evaluations = 0;
    let mut best: Vec<(f64, Vec<f64>)> = Vec::new();
    let mut idx = vec![0usize; dims];
    for _ in 0..total {
        let x: Vec<f64> = idx.iter().enumerate().map(|(d, &i)| value_of(d, i)).collect();
        let v = f(&layout.state(&x));
        evaluations += 1;
        if best.len() < grid.refine_starts || v < best[best.len() - 1].0 {
            let pos = best.partition_point(|(b, _)| *b <= v);
            best.insert(pos, (v, x));
            best.truncate(grid.refine_starts);
        }
        for d in 0..dims {
            idx[d] += 1;
            if idx[d] < levels[d] {
                break;
            }
            idx[d] = 0;
        }
    }

    let mut winner: Option<(f64, Vec<f64>)> = None;
    for (mut v, mut x) in best.into_iter().filter(|(v, _)| v.is_finite()) {
        let mut phase_step = TAU / grid.phase_levels as f64 / 2.0;
        let mut zeta_step = 1.0 / (grid.zeta_levels - 1) as f64 / 2.0;
        while phase_step >= grid.final_phase_step || zeta_step >= grid.final_zeta_step {
            let mut moved = false;
            for d in 0..dims {
                let step = if layout.is_phase(d) { phase_step } else { zeta_step };
                for sign in [1.0, -1.0] {
                    let mut y = x.clone();
                    y[d] += sign * step;
                    if !layout.is_phase(d) {
                        y[d] = y[d].clamp(0.0, 1.0);
                    }
                    let fy = f(&layout.state(&y));
                    evaluations += 1;
                    if fy < v {
                        v = fy;
                        x = y;
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                phase_step /= 2.0;
                zeta_step /= 2.0;
            }
        }
        if winner.as_ref().is_none_or(|w| v < w.0) {
            winner = Some((v, x));
        }
    }
    match winner {
        Some((value, x)) => Ok(OracleResult {
            value,
            ios: layout.state(&x),
            evaluations,
        }),
        None => Ok(OracleResult {
            value: f64::INFINITY,
            ios: IosState::uniform(layout.m, std::f64::consts::FRAC_1_SQRT_2, ControlMode::Ued),
            evaluations,
        }),
    }
}

/// Smallest total power over the surface, `+∞` if no grid point is feasible.
pub fn power_min_oracle(
    channels: &ChannelSet,
    targets: &[f64],
    noise: Noise,
    grid: &OracleGrid,
) -> Result<OracleResult> {
    let opts = PowerMinOptions::default();
    search(channels, grid, |ios| {
        solve_tx_beamforming(channels, ios, targets, noise, &opts)
            .map(|w| total_power(&w))
            .unwrap_or(f64::INFINITY)
    })
}

/// Best sum-rate of WMMSE at a fixed surface over several precoder starts:
/// matched filter to all users and to each user alone.
pub fn fixed_surface_rate(channels: &ChannelSet, ios: &IosState, noise: Noise, power_budget: f64) -> Result<f64> {
    let opts = SumRateOptions {
        outer_max_iters: 500,
        outer_rel_tol: 1e-9,
        ..SumRateOptions::default()
    };
    let fixed = Plan {
        optimize_phases: false,
        optimize_zeta: false,
    };
    let all = matched_filter_start(channels, ios, power_budget)?;
    let mut starts = vec![all.clone()];
    let stacked = all.stacked();
    for k in 0..stacked.ncols() {
        let col = stacked.column(k);
        let norm = col.norm();
        if norm > 0.0 {
            let mut w = CMatrix::zeros(stacked.nrows(), stacked.ncols());
            w.set_column(k, &(col * C64::new(power_budget.sqrt() / norm, 0.0)));
            starts.push(Beamformers::from_stacked(&w, channels.k_r()));
        }
    }
    let mut best = f64::NEG_INFINITY;
    for beamformers in starts {
        let init = crate::model::Solution {
            beamformers,
            ios: ios.clone(),
        };
        let rep = sum_rate_from(channels, noise, power_budget, init, fixed, &opts, None)?;
        best = best.max(rep.final_metric());
    }
    Ok(best)
}

/// Largest sum-rate over the surface; `value` holds the rate.
pub fn sum_rate_oracle(
    channels: &ChannelSet,
    noise: Noise,
    power_budget: f64,
    grid: &OracleGrid,
) -> Result<OracleResult> {
    let mut res = search(channels, grid, |ios| {
        fixed_surface_rate(channels, ios, noise, power_budget)
            .map(|r| -r)
            .unwrap_or(f64::INFINITY)
    })?;
    res.value = -res.value;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{rate_of, CVector};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn coarse() -> OracleGrid {
        OracleGrid {
            phase_levels: 6,
            zeta_levels: 5,
            refine_starts: 3,
            ..OracleGrid::default()
        }
    }

    /// One element, one reflected user, no direct path: aligning the cascade
    /// gives the full gain `|g|²|h|²`.
    fn single_element() -> ChannelSet {
        ChannelSet {
            g: CMatrix::from_row_slice(1, 1, &[c(0.6, -0.8)]),
            h_d: vec![CVector::from_element(1, c(0.0, 0.0))],
            h_r: vec![CVector::from_element(1, c(0.0, 2.0))],
            h_t: vec![],
        }
    }

    #[test]
    fn power_oracle_single_path() {
        let ch = single_element();
        let noise = Noise::uniform(0.1);
        let r = power_min_oracle(&ch, &[4.0], noise, &coarse()).unwrap();
        let expected = 4.0 * 0.1 / 4.0;
        assert!((r.value - expected).abs() <= 1e-9 * expected, "{}", r.value);
        assert!((r.ios.zeta[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rate_oracle_single_path() {
        let ch = single_element();
        let noise = Noise::uniform(0.1);
        let r = sum_rate_oracle(&ch, noise, 2.0, &coarse()).unwrap();
        let expected = rate_of(&[2.0 * 4.0 / 0.1]);
        assert!((r.value - expected).abs() <= 1e-6 * expected, "{} vs {expected}", r.value);
    }

    #[test]
    fn direct_path_phase_is_found() {
        // the reflected path must add in phase with the direct one
        let ch = ChannelSet {
            g: CMatrix::from_row_slice(1, 1, &[c(1.0, 0.0)]),
            h_d: vec![CVector::from_element(1, c(0.0, 1.0))],
            h_r: vec![CVector::from_element(1, c(1.0, 0.0))],
            h_t: vec![],
        };
        let r = power_min_oracle(&ch, &[1.0], Noise::uniform(1.0), &coarse()).unwrap();
        // |1 + 1|² combined gain
        assert!((r.value - 0.25).abs() < 1e-5, "{}", r.value);
    }

    #[test]
    fn transmit_reference_phase_is_not_searched() {
        let ch = ChannelSet {
            g: CMatrix::zeros(2, 2),
            h_d: vec![CVector::zeros(2)],
            h_r: vec![CVector::zeros(2)],
            h_t: vec![CVector::zeros(2)],
        };
        let l = Layout::new(&ch);
        assert_eq!(l.dims(), 2 + 1 + 2);
        let s = l.state(&[0.1, 0.2, 0.3, 0.4, 1.5]);
        assert_eq!(s.phi_t[0], c(1.0, 0.0));
        assert_eq!(s.zeta[1], 1.0);
    }

    #[test]
    fn unreachable_user_gives_infinite_power() {
        let ch = ChannelSet {
            g: CMatrix::zeros(1, 1),
            h_d: vec![],
            h_r: vec![],
            h_t: vec![CVector::from_element(1, c(1.0, 0.0))],
        };
        let r = power_min_oracle(&ch, &[1.0], Noise::uniform(1.0), &coarse()).unwrap();
        assert!(r.value.is_infinite());
    }
}
