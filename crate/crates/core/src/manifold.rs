//! Conjugate-gradient descent on the complex circle manifold
//! `{φ ∈ ℂᴹ : |φ_m| = 1}` and the log-sum-exp smoothing used to turn a
//! pointwise maximum into a differentiable objective.
//!
//! Gradients follow the `2 ∂f/∂φ*` convention: for a perturbation `δ` the
//! first-order change of `f` is `ℜ{gᴴδ}`. With it, `φᴴBφ + 2ℜ{φᴴb}` has
//! gradient `2Bφ + 2b`.

use crate::error::{Error, Result};
use crate::model::{check_unit_modulus, CMatrix, CVector, RVector, C64};

/// Tolerance on `|φ_m|` accepted on entry to the optimizer.
const ENTRY_MODULUS_TOL: f64 = 1e-9;

/// Real inner product `ℜ{aᴴb}`.
pub fn real_inner(a: &CVector, b: &CVector) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// `ε log Σ exp(v_k / ε)`, evaluated with the maximum pulled out.
pub fn lse_smooth(values: &[f64], eps: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("lse_smooth values"));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("smoothing temperature must be positive, got {eps}")));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = values.iter().map(|v| ((v - max) / eps).exp()).sum();
    Ok(max + eps * s.ln())
}

/// Softmax weights matching [`lse_smooth`].
fn lse_weights(values: &[f64], eps: f64) -> Vec<f64> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = values.iter().map(|v| ((v - max) / eps).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Temperature rule: one percent of the spread of the smoothed values,
/// never below `1e-6`.
pub fn smoothing_epsilon(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if values.is_empty() { 0.0 } else { max - min };
    (0.01 * spread).max(1e-6)
}

/// Tangent-space projection without the manifold check.
pub(crate) fn project_tangent(g: &CVector, phi: &CVector) -> CVector {
    g.zip_map(phi, |g, p| g - p * (g * p.conj()).re)
}

/// Projects a Euclidean gradient onto the tangent space at `phi`:
/// `g − ℜ{g ⊙ φ*} ⊙ φ`.
pub fn riemannian_grad(euclid_grad: &CVector, phi: &CVector) -> Result<CVector> {
    if euclid_grad.len() != phi.len() {
        return Err(Error::Dimension(format!(
            "gradient of length {} at a point of length {}",
            euclid_grad.len(),
            phi.len()
        )));
    }
    check_unit_modulus(phi, ENTRY_MODULUS_TOL)?;
    Ok(project_tangent(euclid_grad, phi))
}

/// Elementwise `(φ_m + s_m) / |φ_m + s_m|`.
pub fn retract(phi: &CVector, step: &CVector) -> Result<CVector> {
    if step.len() != phi.len() {
        return Err(Error::Dimension(format!(
            "step of length {} at a point of length {}",
            step.len(),
            phi.len()
        )));
    }
    let mut out = phi + step;
    for (m, z) in out.iter_mut().enumerate() {
        let r = z.norm();
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::DegenerateRetraction(m));
        }
        *z /= r;
    }
    Ok(out)
}

/// Projects every entry onto the unit circle; zero entries become 1.
pub fn normalize_phases(v: &CVector) -> CVector {
    v.map(|z| {
        let r = z.norm();
        if r > 0.0 && r.is_finite() {
            z / r
        } else {
            C64::new(1.0, 0.0)
        }
    })
}

/// A smooth real function of a complex vector.
pub trait ManifoldObjective {
    fn value(&self, phi: &CVector) -> f64;

    /// Value and Euclidean gradient `2 ∂f/∂φ*`.
    fn value_and_gradient(&self, phi: &CVector) -> (f64, CVector);
}

/// `φᴴBφ + 2ℜ{φᴴb} + c` with Hermitian `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseQuadratic {
    pub b_mat: CMatrix,
    pub b: CVector,
    pub c: f64,
}

impl ManifoldObjective for DenseQuadratic {
    fn value(&self, phi: &CVector) -> f64 {
        let bp = &self.b_mat * phi;
        phi.dotc(&bp).re + 2.0 * phi.dotc(&self.b).re + self.c
    }

    fn value_and_gradient(&self, phi: &CVector) -> (f64, CVector) {
        let bp = &self.b_mat * phi;
        let v = phi.dotc(&bp).re + 2.0 * phi.dotc(&self.b).re + self.c;
        (v, (bp + &self.b) * C64::new(2.0, 0.0))
    }
}

/// `Σ_i w_i |v_iᴴφ + a_i|² + c`, the low-rank form of a quadratic in `φ`
/// whose columns `v_i` are stored in `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineSquares {
    pub v: CMatrix,
    pub offsets: CVector,
    pub weights: RVector,
    pub constant: f64,
}

impl AffineSquares {
    fn inner(&self, phi: &CVector) -> CVector {
        self.v.ad_mul(phi) + &self.offsets
    }

    /// Equivalent dense quadratic: `B = Σ w v vᴴ`, `b = Σ w v a`,
    /// `c = Σ w |a|² + constant`.
    pub fn to_dense(&self) -> DenseQuadratic {
        let m = self.v.nrows();
        let mut b_mat = CMatrix::zeros(m, m);
        let mut b = CVector::zeros(m);
        let mut c = self.constant;
        for i in 0..self.v.ncols() {
            let col = self.v.column(i);
            let w = self.weights[i];
            b_mat += col * col.adjoint() * C64::new(w, 0.0);
            b += col * (self.offsets[i] * w);
            c += w * self.offsets[i].norm_sqr();
        }
        DenseQuadratic { b_mat, b, c }
    }
}

impl ManifoldObjective for AffineSquares {
    fn value(&self, phi: &CVector) -> f64 {
        let y = self.inner(phi);
        y.iter().zip(self.weights.iter()).map(|(y, w)| w * y.norm_sqr()).sum::<f64>() + self.constant
    }

    fn value_and_gradient(&self, phi: &CVector) -> (f64, CVector) {
        let y = self.inner(phi);
        let v = y.iter().zip(self.weights.iter()).map(|(y, w)| w * y.norm_sqr()).sum::<f64>() + self.constant;
        let wy = y.zip_map(&self.weights, |y, w| y * (2.0 * w));
        (v, &self.v * wy)
    }
}

/// `ε log Σ exp(f_k/ε)` over a family of smooth terms.
#[derive(Debug, Clone)]
pub struct SmoothedMax<T> {
    pub terms: Vec<T>,
    pub epsilon: f64,
}

impl<T: ManifoldObjective> SmoothedMax<T> {
    /// Builds the smoothed objective with the temperature chosen from the
    /// spread of the term values at `phi`.
    pub fn at(terms: Vec<T>, phi: &CVector) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Empty("smoothed terms"));
        }
        let values: Vec<f64> = terms.iter().map(|t| t.value(phi)).collect();
        Ok(Self {
            epsilon: smoothing_epsilon(&values),
            terms,
        })
    }

    pub fn term_values(&self, phi: &CVector) -> Vec<f64> {
        self.terms.iter().map(|t| t.value(phi)).collect()
    }

    /// The unsmoothed maximum.
    pub fn max_value(&self, phi: &CVector) -> f64 {
        self.term_values(phi).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl<T: ManifoldObjective> ManifoldObjective for SmoothedMax<T> {
    fn value(&self, phi: &CVector) -> f64 {
        lse_smooth(&self.term_values(phi), self.epsilon).unwrap_or(f64::NAN)
    }

    fn value_and_gradient(&self, phi: &CVector) -> (f64, CVector) {
        let parts: Vec<(f64, CVector)> = self.terms.iter().map(|t| t.value_and_gradient(phi)).collect();
        let values: Vec<f64> = parts.iter().map(|p| p.0).collect();
        let value = lse_smooth(&values, self.epsilon).unwrap_or(f64::NAN);
        let weights = lse_weights(&values, self.epsilon);
        let mut grad = CVector::zeros(phi.len());
        for ((_, g), w) in parts.iter().zip(weights) {
            if w > 0.0 {
                grad.axpy(C64::new(w, 0.0), g, C64::new(1.0, 0.0));
            }
        }
        (value, grad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmijoOptions {
    /// Trial step along the search direction, divided by its norm.
    pub initial_step: f64,
    pub shrink: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoOptions {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RcgOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub armijo: ArmijoOptions,
    /// Clip the Polak–Ribière coefficient at zero.
    pub pr_plus: bool,
}

impl Default for RcgOptions {
    fn default() -> Self {
        Self {
            max_iters: 200,
            grad_tol: 1e-6,
            armijo: ArmijoOptions::default(),
            pr_plus: true,
        }
    }
}

impl RcgOptions {
    fn validate(&self) -> Result<()> {
        let a = &self.armijo;
        if !(self.grad_tol > 0.0 && a.initial_step > 0.0 && a.sufficient_decrease > 0.0 && a.max_backtracks > 0)
        {
            return Err(Error::InvalidConfig("optimizer options must be positive".into()));
        }
        if !(a.shrink > 0.0 && a.shrink < 1.0) {
            return Err(Error::InvalidConfig(format!("shrink factor {} outside (0, 1)", a.shrink)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RcgStatus {
    GradientTolerance,
    MaxIters,
    /// No step along the current direction satisfied the Armijo condition.
    LineSearchStalled,
}

#[derive(Debug, Clone)]
pub struct RcgResult {
    pub phi: CVector,
    pub value: f64,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub status: RcgStatus,
}

fn ensure_finite(value: f64, grad: &CVector, iteration: usize) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::NonFinite {
            what: "objective",
            iteration,
        });
    }
    if !grad.iter().all(|z| z.is_finite()) {
        return Err(Error::NonFinite {
            what: "gradient",
            iteration,
        });
    }
    Ok(())
}

/// Riemannian conjugate gradient with Polak–Ribière directions, transport by
/// tangent projection and Armijo backtracking.
pub fn rcg_minimize<O: ManifoldObjective + ?Sized>(obj: &O, phi0: &CVector, opts: &RcgOptions) -> Result<RcgResult> {
    opts.validate()?;
    check_unit_modulus(phi0, ENTRY_MODULUS_TOL)?;
    let mut phi = normalize_phases(phi0);
    let (mut f, eg) = obj.value_and_gradient(&phi);
    ensure_finite(f, &eg, 0)?;
    let mut g = project_tangent(&eg, &phi);
    let mut d = -g.clone();
    let mut trace = vec![f];
    let a = &opts.armijo;
    let mut status = RcgStatus::MaxIters;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        let g_norm2 = g.norm_squared();
        if g_norm2.sqrt() < opts.grad_tol {
            status = RcgStatus::GradientTolerance;
            break;
        }
        let mut slope = real_inner(&g, &d);
        if !(slope < 0.0) {
            d = -g.clone();
            slope = -g_norm2;
        }
        let mut t = a.initial_step / d.norm();
        let mut accepted = None;
        for _ in 0..a.max_backtracks {
            let cand = retract(&phi, &(&d * C64::new(t, 0.0)))?;
            let fc = obj.value(&cand);
            if fc.is_finite() && fc <= f + a.sufficient_decrease * t * slope {
                accepted = Some(cand);
                break;
            }
            t *= a.shrink;
        }
        let Some(next) = accepted else {
            status = RcgStatus::LineSearchStalled;
            break;
        };
        iterations += 1;
        let (f_next, eg_next) = obj.value_and_gradient(&next);
        ensure_finite(f_next, &eg_next, iterations)?;
        let g_next = project_tangent(&eg_next, &next);
        let d_moved = project_tangent(&d, &next);
        let g_moved = project_tangent(&g, &next);
        let mut beta = real_inner(&g_next, &(&g_next - &g_moved)) / g_norm2;
        if opts.pr_plus {
            beta = beta.max(0.0);
        }
        d = -&g_next + d_moved * C64::new(beta, 0.0);
        phi = next;
        f = f_next;
        g = g_next;
        trace.push(f);
    }

    Ok(RcgResult {
        phi,
        value: f,
        trace,
        iterations,
        status,
    })
}
