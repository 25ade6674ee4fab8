//! Independent cross-check of the spectral solver: a finite-difference
//! discretization of the same constrained minimization on a uniform radial
//! grid, and first zeros of J_n from the ascending series.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::basis::SpectralBasis;
use crate::error::{Error, Result};
use crate::model::{self, ModelParams};

const GRAD_TOL: f64 = 1e-9;
const MAX_ITER: usize = 50_000;
const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-20;

/// Minimizer of the finite-difference action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdSolution {
    /// n_fd + 1 uniform radii on [0, P].
    pub grid_points: Vec<f64>,
    /// φ at `grid_points`; zero at both ends.
    pub phi_values: Vec<f64>,
    pub omega_sq: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Relative norm of the constrained residual at exit.
    pub residual_norm: f64,
}

impl FdSolution {
    /// (ρ, φ) at the largest grid value of φ.
    pub fn peak(&self) -> (f64, f64) {
        self.grid_points
            .iter()
            .zip(&self.phi_values)
            .fold((0.0, 0.0), |acc, (&r, &f)| if f > acc.1 { (r, f) } else { acc })
    }

    /// 4π Σ h ρ_i φ_i², the trapezoid form of the reduced norm.
    pub fn discrete_norm(&self) -> f64 {
        let h = self.grid_points[1] - self.grid_points[0];
        4.0 * PI * h * self.grid_points.iter().zip(&self.phi_values).map(|(r, f)| r * f * f).sum::<f64>()
    }
}

/// Discrete action on the interior values φ_1..φ_{n−1}:
///   I = ½ Σ ρ_{i+½}(φ_{i+1} − φ_i)²/h + ½N² Σ hφ_i²/ρ_i + Σ hρ_i U(φ_i).
struct FdProblem {
    params: ModelParams,
    h: f64,
    /// ρ_i at interior nodes.
    rho: Vec<f64>,
    /// hρ_i, the trapezoid mass.
    mass: Vec<f64>,
    /// Diagonal and off-diagonal (i, i+1) of the quadratic form.
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl FdProblem {
    fn new(params: &ModelParams, n_fd: usize) -> Self {
        let h = params.p() / n_fd as f64;
        let k = n_fd - 1;
        let rho: Vec<f64> = (1..n_fd).map(|i| i as f64 * h).collect();
        let mass: Vec<f64> = rho.iter().map(|r| h * r).collect();
        let n_sq = params.n_sq();
        let diag = rho.iter().map(|&r| ((r - 0.5 * h) + (r + 0.5 * h)) / h + n_sq * h / r).collect();
        let off = (0..k.saturating_sub(1)).map(|i| -(rho[i] + 0.5 * h) / h).collect();
        Self { params: *params, h, rho, mass, diag, off }
    }

    fn apply_linear(&self, v: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * v[i];
                if i > 0 {
                    s += self.off[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * v[i + 1];
                }
                s
            })
            .collect()
    }

    fn gradient(&self, phi: &[f64]) -> Vec<f64> {
        let mut g = self.apply_linear(phi);
        for (gi, (&f, &m)) in g.iter_mut().zip(phi.iter().zip(&self.mass)) {
            *gi += m * model::potential_derivative(f, &self.params);
        }
        g
    }

    /// I(φ + δ) − I(φ) without forming either value.
    fn difference(&self, phi: &[f64], delta: &[f64]) -> f64 {
        let mid: Vec<f64> = phi.iter().zip(delta).map(|(f, d)| f + 0.5 * d).collect();
        let quad = dot(delta, &self.apply_linear(&mid));
        let (lambda, a, b) = (self.params.lambda(), self.params.a_pot(), self.params.b());
        let mut nl = 0.0;
        for i in 0..phi.len() {
            let x = phi[i];
            let y = x + delta[i];
            let (x2, y2) = (x * x, y * y);
            let d2 = delta[i] * (x + y);
            nl += self.mass[i] * d2 * ((y2 * y2 + x2 * y2 + x2 * x2) - a * (x2 + y2) + b);
        }
        quad + lambda * nl
    }

    fn m_dot(&self, u: &[f64], v: &[f64]) -> f64 {
        u.iter().zip(v).zip(&self.mass).map(|((a, b), m)| a * b * m).sum()
    }

    /// Solves (L + σM)x = r by the Thomas algorithm.
    fn precondition(&self, r: &[f64], shift: f64) -> Vec<f64> {
        let n = r.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 0..n {
            let diag = self.diag[i] + shift * self.mass[i];
            let (lower, prev_c, prev_d) = if i > 0 { (self.off[i - 1], c[i - 1], d[i - 1]) } else { (0.0, 0.0, 0.0) };
            let denom = diag - lower * prev_c;
            c[i] = if i + 1 < n { self.off[i] / denom } else { 0.0 };
            d[i] = (r[i] - lower * prev_d) / denom;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        d
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Minimizes the trapezoid-discretized action subject to
/// 4π Σ hρ_iφ_i² = Q̃₀ on n_fd uniform intervals of [0, P].
///
/// The descent runs in the metric of L + (λb/4π)M, tangent to the
/// constraint surface in the mass inner product, with retraction by
/// rescaling. ω² comes from the discrete Rayleigh identity 4πφᵀ∇I/Q̃₀.
pub fn fd_minimize(params: &ModelParams, q0: f64, n_fd: usize) -> Result<FdSolution> {
    if n_fd < 100 {
        return Err(Error::InvalidConfig(format!("n_fd must be at least 100, got {n_fd}")));
    }
    if !(q0 > 0.0) || !q0.is_finite() {
        return Err(Error::InvalidConfig(format!("q0 must be positive, got {q0}")));
    }
    let prob = FdProblem::new(params, n_fd);
    let p = params.p();
    let n_abs = params.n().unsigned_abs() as i32;
    let target = q0 / (4.0 * PI);
    let shift = params.lambda() * params.b() / (4.0 * PI);

    let mut phi: Vec<f64> = prob
        .rho
        .iter()
        .map(|&r| {
            let s = (r - p / 4.0) / (p / 4.0);
            r.powi(n_abs) * (p - r) * (-s * s).exp()
        })
        .collect();
    let scale = (target / prob.m_dot(&phi, &phi)).sqrt();
    phi.iter_mut().for_each(|f| *f *= scale);

    let mut step: f64 = 1.0;
    let mut prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut retried = false;
    let (converged, residual_norm) = loop {
        let g = prob.gradient(&phi);
        let mphi: Vec<f64> = phi.iter().zip(&prob.mass).map(|(f, m)| f * m).collect();
        let mu = dot(&phi, &g) / dot(&phi, &mphi);
        let r: Vec<f64> = g.iter().zip(&mphi).map(|(gi, mi)| gi - mu * mi).collect();
        let rel = (dot(&r, &r) / dot(&g, &g)).sqrt();
        if rel < GRAD_TOL {
            break (true, rel);
        }
        if iterations >= MAX_ITER {
            break (false, rel);
        }

        // Preconditioned gradient, made M-orthogonal to φ.
        let pg = prob.precondition(&g, shift);
        let pm = prob.precondition(&mphi, shift);
        let nu = prob.m_dot(&phi, &pg) / prob.m_dot(&phi, &pm);
        let z: Vec<f64> = pg.iter().zip(&pm).map(|(a, b)| a - nu * b).collect();
        let mut dir: Vec<f64> = z.iter().map(|x| -x).collect();
        if let Some((r_prev, z_prev, d_prev)) = prev.as_ref() {
            let beta = (dot(&r, &z) - dot(&r, z_prev)) / dot(r_prev, z_prev);
            if beta > 0.0 {
                let cand: Vec<f64> = dir.iter().zip(d_prev).map(|(d, p)| d + beta * p).collect();
                if dot(&cand, &r) < 0.0 {
                    dir = cand;
                }
            }
        }
        let c = prob.m_dot(&phi, &dir) / target;
        dir.iter_mut().zip(&phi).for_each(|(d, f)| *d -= c * f);
        let slope = dot(&r, &dir);
        let dir_sq = prob.m_dot(&dir, &dir);

        let mut eta = (2.0 * step).min(1e6);
        let accepted = loop {
            let t = eta * eta * dir_sq / target;
            let root = (1.0 + t).sqrt();
            let shrink_minus_one = -t / ((1.0 + root) * root);
            let delta: Vec<f64> = phi.iter().zip(&dir).map(|(f, d)| shrink_minus_one * f + eta * d / root).collect();
            if prob.difference(&phi, &delta) <= ARMIJO_C * eta * slope {
                break Some(delta);
            }
            eta *= 0.5;
            if eta < MIN_STEP {
                break None;
            }
        };
        iterations += 1;
        match accepted {
            Some(delta) => {
                phi.iter_mut().zip(&delta).for_each(|(f, d)| *f += d);
                let s = (target / prob.m_dot(&phi, &phi)).sqrt();
                phi.iter_mut().for_each(|f| *f *= s);
                step = eta;
                retried = false;
                prev = Some((r, z, dir));
            }
            None if !retried => {
                retried = true;
                prev = None;
                step = 1.0;
            }
            None => break (false, rel),
        }
    };

    if phi.iter().copied().fold(0.0, |m: f64, f| if f.abs() > m.abs() { f } else { m }) < 0.0 {
        phi.iter_mut().for_each(|f| *f = -*f);
    }
    let g = prob.gradient(&phi);
    let omega_sq = 4.0 * PI * dot(&phi, &g) / q0;
    let mut grid_points: Vec<f64> = (0..=n_fd).map(|i| i as f64 * prob.h).collect();
    grid_points[n_fd] = p;
    let mut phi_values = Vec::with_capacity(n_fd + 1);
    phi_values.push(0.0);
    phi_values.extend_from_slice(&phi);
    phi_values.push(0.0);
    Ok(FdSolution { grid_points, phi_values, omega_sq, converged, iterations, residual_norm })
}

/// max_i |φ_spectral(ρ_i) − φ_fd(ρ_i)| over the fd nodes.
pub fn profile_max_difference(fd: &FdSolution, basis: &SpectralBasis, coeffs: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (&r, &f) in fd.grid_points.iter().zip(&fd.phi_values) {
        worst = worst.max((basis.evaluate(coeffs, r.min(basis.p()))? - f).abs());
    }
    Ok(worst)
}

/// J_n(x) from the ascending series Σ (−1)^k (x/2)^{2k+n} / (k!(k+n)!).
pub fn bessel_j(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=order {
        term *= half / k as f64;
    }
    let mut sum = term;
    let q = -half * half;
    for k in 1..300 {
        term *= q / (k as f64 * (k as f64 + order as f64));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// First positive zero of J_order, bracketed by scanning upward from the
/// order and refined by bisection.
pub fn bessel_first_zero(order: u32) -> Result<f64> {
    if order > 10 {
        return Err(Error::InvalidConfig(format!("Bessel order must be <= 10, got {order}")));
    }
    let mut lo = (order as f64).max(0.5);
    let mut hi = lo;
    let mut f_lo = bessel_j(order, lo);
    loop {
        hi += 0.1;
        let f_hi = bessel_j(order, hi);
        if f_lo * f_hi <= 0.0 {
            break;
        }
        lo = hi;
        f_lo = f_hi;
    }
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        let f_mid = bessel_j(order, mid);
        if f_lo * f_mid <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
            f_lo = f_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Small-amplitude frequency 2λb + (j_{|N|,1}/P)².
pub fn linear_limit_omega_sq(params: &ModelParams) -> Result<f64> {
    let j = bessel_first_zero(params.n().unsigned_abs())?;
    Ok(2.0 * params.lambda() * params.b() + (j / params.p()).powi(2))
}
