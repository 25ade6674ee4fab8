//! Constrained minimization of the discrete action over the sphere
//! Σ a_j² = Q̃₀, with the frequency recovered as the Lagrange multiplier.
//!
//! In the orthonormal basis the constraint is a Euclidean sphere of radius
//! √Q̃₀, so the optimizer works with plain tangent projections and a
//! rescaling retraction. Energy differences in the line search are computed
//! in factored form so the Armijo test stays meaningful once the gradient
//! has dropped to roundoff-level step sizes.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::basis::{sine_series, SpectralBasis};
use crate::error::{Error, Result};
use crate::model::{self, ModelParams};

/// Number of uniform points on [0, P] for φ_max, decay checks and output.
pub const PROFILE_POINTS: usize = 2001;

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MIN_STEP: f64 = 1e-20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialGuess {
    /// ρ^{|N|}(P − ρ)·exp(−((ρ − P/4)/(P/4))²), projected onto the basis.
    RingBump,
    /// Piecewise-linear trapezoid: tρ on [0,1], t on [1,P−1], t(P−ρ) after.
    Trapezoid,
    Custom(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Optimizer {
    /// Riemannian steepest descent.
    ProjectedGradient,
    /// Polak-Ribière+ nonlinear conjugate gradient with projection transport.
    ConjugateGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    pub q0: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub initial_guess: InitialGuess,
    pub restarts: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Precondition the tangent gradient with (K + N²C + σI)⁻¹.
    pub preconditioned: bool,
}

impl SolveConfig {
    pub fn new(q0: f64) -> Self {
        Self {
            q0,
            grad_tol: 1e-8,
            max_iter: 20_000,
            initial_guess: InitialGuess::RingBump,
            restarts: 2,
            seed: 0,
            optimizer: Optimizer::ConjugateGradient,
            preconditioned: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q0 > 0.0) || !self.q0.is_finite() {
            return Err(Error::InvalidConfig(format!("q0 must be positive, got {}", self.q0)));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("grad_tol must be positive, got {}", self.grad_tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VortexSolution {
    pub q0: f64,
    pub n: i32,
    pub coeffs: Vec<f64>,
    pub omega_sq: f64,
    pub residual_error: f64,
    /// Contribution of the first quadrature panel to the residual error.
    pub residual_first_panel: f64,
    pub phi_max: f64,
    /// ρ at which |φ| peaks on the output grid.
    pub peak_radius: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final Riemannian gradient norm.
    pub grad_norm: f64,
    pub f_value: f64,
}

/// Discrete action restricted to a basis, with N² folded into the linear
/// operator L = K + N²C.
pub struct Functional<'a> {
    basis: &'a SpectralBasis,
    params: ModelParams,
    linear: DMatrix<f64>,
    /// w_k ρ_k at every node.
    rho_w: Vec<f64>,
}

impl<'a> Functional<'a> {
    pub fn new(basis: &'a SpectralBasis, params: &ModelParams) -> Self {
        let linear = basis.k_matrix() + basis.c_matrix() * params.n_sq();
        let g = basis.grid();
        let rho_w = g.nodes().iter().zip(g.weights()).map(|(r, w)| r * w).collect();
        Self { basis, params: *params, linear, rho_w }
    }

    fn check(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.basis.m() {
            return Err(Error::DimensionMismatch { expected: self.basis.m(), got: coeffs.len() });
        }
        Ok(())
    }

    fn phi_nodes(&self, coeffs: &[f64]) -> Vec<f64> {
        self.basis.apply_table(&self.basis.tables().psi, coeffs)
    }

    fn quadratic(&self, coeffs: &[f64]) -> f64 {
        let a = DVector::from_column_slice(coeffs);
        0.5 * a.dot(&(&self.linear * &a))
    }

    fn nonlinear(&self, phi: &[f64]) -> f64 {
        let a = self.params.a_pot();
        self.params.lambda()
            * phi
                .iter()
                .zip(&self.rho_w)
                .map(|(&f, &rw)| {
                    let f2 = f * f;
                    rw * f2 * f2 * (f2 - a)
                })
                .sum::<f64>()
    }

    /// F(a) without the constant λbQ̃₀/(4π).
    fn variable_part(&self, coeffs: &[f64]) -> f64 {
        self.quadratic(coeffs) + self.nonlinear(&self.phi_nodes(coeffs))
    }

    /// F(a) = ½aᵀ(K+N²C)a + λbQ̃₀/(4π) + λ∫ρ(φ⁶ − aφ⁴)dρ.
    pub fn value(&self, coeffs: &[f64], q0: f64) -> Result<f64> {
        self.check(coeffs)?;
        Ok(self.variable_part(coeffs) + self.constant(q0))
    }

    /// Cholesky factor of K + N²C + σI, σ = λb/(4π).
    fn preconditioner(&self) -> Cholesky<f64, Dyn> {
        let m = self.basis.m();
        let shift = self.params.lambda() * self.params.b() / (4.0 * PI);
        let p = &self.linear + DMatrix::<f64>::identity(m, m) * shift;
        Cholesky::new(p).expect("K + N²C + σI is positive definite")
    }

    pub fn constant(&self, q0: f64) -> f64 {
        self.params.lambda() * self.params.b() * q0 / (4.0 * PI)
    }

    /// ∇F = (K+N²C)a + λ∫ρ(6φ⁵ − 4aφ³)ψ_k dρ.
    pub fn gradient(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check(coeffs)?;
        Ok(self.gradient_with_phi(coeffs, &self.phi_nodes(coeffs)))
    }

    fn gradient_with_phi(&self, coeffs: &[f64], phi: &[f64]) -> Vec<f64> {
        let m = self.basis.m();
        let a = DVector::from_column_slice(coeffs);
        let mut g: Vec<f64> = (&self.linear * &a).iter().copied().collect();
        let (lambda, a_pot) = (self.params.lambda(), self.params.a_pot());
        let psi = &self.basis.tables().psi;
        for (node, (&f, &rw)) in phi.iter().zip(&self.rho_w).enumerate() {
            let f2 = f * f;
            let s = lambda * rw * f * f2 * (6.0 * f2 - 4.0 * a_pot);
            if s != 0.0 {
                for (gk, p) in g.iter_mut().zip(&psi[node * m..(node + 1) * m]) {
                    *gk += s * p;
                }
            }
        }
        g
    }

    /// F(new) − F(old) in factored form, accurate relative to the difference
    /// itself rather than to F.
    fn difference(&self, old: &[f64], phi_old: &[f64], delta: &[f64]) -> f64 {
        let sum: Vec<f64> = old.iter().zip(delta).map(|(o, d)| 2.0 * o + d).collect();
        let quad = 0.5 * DVector::from_column_slice(delta).dot(&(&self.linear * DVector::from_column_slice(&sum)));
        let dphi = self.basis.apply_table(&self.basis.tables().psi, delta);
        let a = self.params.a_pot();
        let mut nl = 0.0;
        for k in 0..phi_old.len() {
            let x = phi_old[k];
            let y = x + dphi[k];
            let (x2, y2) = (x * x, y * y);
            let d2 = dphi[k] * (x + y);
            let d6 = d2 * (y2 * y2 + x2 * y2 + x2 * x2);
            let d4 = d2 * (x2 + y2);
            nl += self.rho_w[k] * (d6 - a * d4);
        }
        quad + self.params.lambda() * nl
    }
}

/// Free-function form of [`Functional::value`].
pub fn discrete_functional(coeffs: &[f64], basis: &SpectralBasis, params: &ModelParams, q0: f64) -> Result<f64> {
    Functional::new(basis, params).value(coeffs, q0)
}

/// Free-function form of [`Functional::gradient`].
pub fn functional_gradient(coeffs: &[f64], basis: &SpectralBasis, params: &ModelParams) -> Result<Vec<f64>> {
    Functional::new(basis, params).gradient(coeffs)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn project_tangent(v: &[f64], unit: &[f64]) -> Vec<f64> {
    let c = dot(v, unit);
    v.iter().zip(unit).map(|(x, u)| x - c * u).collect()
}

fn rescale(v: &mut [f64], radius: f64) {
    let n = norm(v);
    for x in v.iter_mut() {
        *x *= radius / n;
    }
}

struct DescentOutcome {
    coeffs: Vec<f64>,
    f_var: f64,
    iterations: usize,
    converged: bool,
    grad_norm: f64,
}

/// Per-iteration observer used by tests to check constraint drift and
/// monotone descent.
pub trait IterationObserver {
    fn accepted(&mut self, coeffs: &[f64], f_change: f64);
}

impl IterationObserver for () {
    fn accepted(&mut self, _: &[f64], _: f64) {}
}

fn descend(
    func: &Functional,
    start: &[f64],
    config: &SolveConfig,
    observer: &mut dyn IterationObserver,
) -> DescentOutcome {
    let radius = config.q0.sqrt();
    let precond = config.preconditioned.then(|| func.preconditioner());
    let mut a = start.to_vec();
    rescale(&mut a, radius);
    let mut phi = func.phi_nodes(&a);
    let mut step: f64 = 1.0;
    // (tangent gradient, preconditioned tangent gradient, direction)
    let mut prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut retried = false;
    loop {
        let g = func.gradient_with_phi(&a, &phi);
        let unit: Vec<f64> = a.iter().map(|x| x / radius).collect();
        let gt = project_tangent(&g, &unit);
        let gt_norm = norm(&gt);
        if gt_norm < config.grad_tol * norm(&g).max(1.0) {
            return DescentOutcome {
                f_var: func.variable_part(&a),
                coeffs: a,
                iterations,
                converged: true,
                grad_norm: gt_norm,
            };
        }
        if iterations >= config.max_iter {
            return DescentOutcome {
                f_var: func.variable_part(&a),
                coeffs: a,
                iterations,
                converged: false,
                grad_norm: gt_norm,
            };
        }

        let z = match &precond {
            Some(chol) => preconditioned_tangent(chol, &g, &unit),
            None => gt.clone(),
        };
        let mut dir: Vec<f64> = z.iter().map(|x| -x).collect();
        if let (Optimizer::ConjugateGradient, Some((gt_prev, z_prev, d_prev))) = (config.optimizer, prev.as_ref()) {
            let zp = project_tangent(z_prev, &unit);
            let dp = project_tangent(d_prev, &unit);
            let beta = (dot(&gt, &z) - dot(&gt, &zp)) / dot(gt_prev, z_prev);
            if beta > 0.0 {
                let cand: Vec<f64> = dir.iter().zip(&dp).map(|(d, p)| d + beta * p).collect();
                if dot(&cand, &gt) < -1e-3 * gt_norm * norm(&cand) {
                    dir = cand;
                }
            }
        }
        // P⁻¹ amplifies the normal roundoff in z; project once more so the
        // retraction formula below sees a genuinely tangent direction.
        let dir = project_tangent(&dir, &unit);
        let slope = dot(&gt, &dir);

        let mut eta = (step * 2.0).min(1e6);
        let dir_sq = dot(&dir, &dir);
        let accepted = loop {
            // Retracted step written as a + δ with δ = (s − 1)a + sηd, using
            // |a + ηd|² = r² + η²|d|² for tangent d.
            let t = eta * eta * dir_sq / config.q0;
            let root = (1.0 + t).sqrt();
            let shrink_minus_one = -t / ((1.0 + root) * root);
            let shrink = 1.0 / root;
            let delta: Vec<f64> = a.iter().zip(&dir).map(|(x, d)| shrink_minus_one * x + shrink * eta * d).collect();
            let mut trial: Vec<f64> = a.iter().zip(&delta).map(|(x, dl)| x + dl).collect();
            rescale(&mut trial, radius);
            let change = func.difference(&a, &phi, &delta);
            if change <= ARMIJO_C * eta * slope {
                break Some((trial, change));
            }
            eta *= BACKTRACK;
            if eta < MIN_STEP {
                break None;
            }
        };
        iterations += 1;
        match accepted {
            Some((trial, change)) => {
                step = eta;
                phi = func.phi_nodes(&trial);
                a = trial;
                retried = false;
                observer.accepted(&a, change);
                prev = Some((gt, z, dir));
            }
            None if !retried => {
                // Line search failed along a conjugate direction: restart from
                // the (preconditioned) gradient once before giving up.
                retried = true;
                prev = None;
                step = 1.0;
            }
            None => {
                return DescentOutcome {
                    f_var: func.variable_part(&a),
                    coeffs: a,
                    iterations,
                    converged: false,
                    grad_norm: gt_norm,
                };
            }
        }
    }
}

/// P⁻¹g − μP⁻¹u with μ chosen so the result is tangent at u.
fn preconditioned_tangent(chol: &Cholesky<f64, Dyn>, g: &[f64], unit: &[f64]) -> Vec<f64> {
    let pg = chol.solve(&DVector::from_column_slice(g));
    let pu = chol.solve(&DVector::from_column_slice(unit));
    let mu = dot(unit, pg.as_slice()) / dot(unit, pu.as_slice());
    pg.iter().zip(pu.iter()).map(|(x, y)| x - mu * y).collect()
}

/// Coefficients of the configured starting profile, scaled to the sphere.
pub fn initial_coefficients(basis: &SpectralBasis, params: &ModelParams, config: &SolveConfig) -> Result<Vec<f64>> {
    let p = basis.p();
    let n_abs = params.n().unsigned_abs() as i32;
    let mut coeffs = match &config.initial_guess {
        InitialGuess::RingBump => basis.project(|r| {
            let s = (r - p / 4.0) / (p / 4.0);
            r.powi(n_abs) * (p - r) * (-s * s).exp()
        }),
        InitialGuess::Trapezoid => basis.project(|r| {
            if r < 1.0 {
                r
            } else if r <= p - 1.0 {
                1.0
            } else {
                p - r
            }
        }),
        InitialGuess::Custom(c) => {
            if c.len() != basis.m() {
                return Err(Error::DimensionMismatch { expected: basis.m(), got: c.len() });
            }
            c.clone()
        }
    };
    if !(norm(&coeffs) > 0.0) {
        return Err(Error::InvalidConfig("initial guess has zero norm".into()));
    }
    rescale(&mut coeffs, config.q0.sqrt());
    Ok(coeffs)
}

/// Minimizes F on the sphere of radius √Q̃₀ and post-processes the
/// minimizer (sign, ω², residual, amplitude).
pub fn minimize_on_sphere(basis: &SpectralBasis, params: &ModelParams, config: &SolveConfig) -> Result<VortexSolution> {
    minimize_observed(basis, params, config, &mut ())
}

pub fn minimize_observed(
    basis: &SpectralBasis,
    params: &ModelParams,
    config: &SolveConfig,
    observer: &mut dyn IterationObserver,
) -> Result<VortexSolution> {
    config.validate()?;
    if (basis.p() - params.p()).abs() > 1e-12 * params.p() {
        return Err(Error::InvalidConfig(format!(
            "basis built for P = {} but model has P = {}",
            basis.p(),
            params.p()
        )));
    }
    let func = Functional::new(basis, params);
    let start = initial_coefficients(basis, params, config)?;
    let mut best = descend(&func, &start, config, observer);
    let mut total_iters = best.iterations;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.restarts {
        let scale = 0.01 * norm(&best.coeffs);
        let noise: Vec<f64> = (0..basis.m()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let noise_norm = norm(&noise);
        let perturbed: Vec<f64> = best.coeffs.iter().zip(&noise).map(|(a, z)| a + scale * z / noise_norm).collect();
        let run = descend(&func, &perturbed, config, observer);
        total_iters += run.iterations;
        let better = (run.converged && !best.converged) || (run.converged == best.converged && run.f_var < best.f_var);
        if better {
            best = run;
        }
    }

    let mut coeffs = best.coeffs;
    let profile = sample_profile(basis, &coeffs, PROFILE_POINTS)?;
    let extremum = profile.iter().max_by(|x, y| x.phi.abs().total_cmp(&y.phi.abs())).map(|pt| pt.phi).unwrap_or(0.0);
    if extremum < 0.0 {
        coeffs.iter_mut().for_each(|a| *a = -*a);
    }
    let (phi_max, peak_radius) =
        profile.iter().map(|pt| (pt.phi.abs(), pt.rho)).fold((0.0, 0.0), |acc, x| if x.0 > acc.0 { x } else { acc });

    let omega_sq = recover_omega_sq(&coeffs, basis, params, config.q0)?;
    let residual = residual_breakdown(&coeffs, omega_sq, basis, params)?;
    Ok(VortexSolution {
        q0: config.q0,
        n: params.n(),
        f_value: best.f_var + func.constant(config.q0),
        coeffs,
        omega_sq,
        residual_error: residual.total,
        residual_first_panel: residual.first_panel,
        phi_max,
        peak_radius,
        iterations: total_iters,
        converged: best.converged,
        grad_norm: best.grad_norm,
    })
}

/// ω² = (4π/Q̃₀)(∫ρφ_ρ² + N²∫φ²/ρ + ∫ρφU'(φ)), every integral by quadrature
/// on the nodal values of φ and φ'.
pub fn recover_omega_sq(coeffs: &[f64], basis: &SpectralBasis, params: &ModelParams, q0: f64) -> Result<f64> {
    if !(q0 > 0.0) {
        return Err(Error::InvalidConfig(format!("q0 must be positive, got {q0}")));
    }
    let phi = basis.values_at_nodes(coeffs)?;
    let dphi = basis.apply_table(&basis.tables().dpsi, coeffs);
    let g = basis.grid();
    let n_sq = params.n_sq();
    let mut total = 0.0;
    for k in 0..phi.len() {
        let (rho, w) = (g.nodes()[k], g.weights()[k]);
        let f = phi[k];
        total += w * (rho * dphi[k] * dphi[k] + n_sq * f * f / rho + rho * f * model::potential_derivative(f, params));
    }
    Ok(4.0 * PI / q0 * total)
}

/// ω² from the discrete gradient: (4π/Q̃₀)·a·∇F + 2λb. Agrees with
/// [`recover_omega_sq`] because K and C are assembled on the same grid.
pub fn omega_sq_from_gradient(coeffs: &[f64], basis: &SpectralBasis, params: &ModelParams, q0: f64) -> Result<f64> {
    if !(q0 > 0.0) {
        return Err(Error::InvalidConfig(format!("q0 must be positive, got {q0}")));
    }
    let g = functional_gradient(coeffs, basis, params)?;
    Ok(4.0 * PI / q0 * dot(coeffs, &g) + 2.0 * params.lambda() * params.b())
}

/// Worst relative error ‖∇F − ∇_h F‖/‖∇F‖ over `samples` random points of
/// the Q̃₀ sphere, ∇_h F by central differences with step 1e-5.
pub fn gradient_check(basis: &SpectralBasis, params: &ModelParams, q0: f64, samples: usize, seed: u64) -> Result<f64> {
    let func = Functional::new(basis, params);
    let m = basis.m();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let mut a: Vec<f64> = (0..m).map(|k| rng.gen_range(-1.0..1.0) / (1.0 + k as f64)).collect();
        rescale(&mut a, q0.sqrt());
        let g = func.gradient(&a)?;
        let mut err = 0.0;
        for k in 0..m {
            let mut up = a.clone();
            let mut dn = a.clone();
            up[k] += h;
            dn[k] -= h;
            let fd = (func.variable_part(&up) - func.variable_part(&dn)) / (2.0 * h);
            err += (g[k] - fd).powi(2);
        }
        worst = worst.max(err.sqrt() / norm(&g));
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualBreakdown {
    pub total: f64,
    pub first_panel: f64,
}

/// RE = (1/P)(∫ r² dρ)^{1/2}, r the ODE residual at the quadrature nodes.
pub fn residual_error(coeffs: &[f64], omega_sq: f64, basis: &SpectralBasis, params: &ModelParams) -> Result<f64> {
    Ok(residual_breakdown(coeffs, omega_sq, basis, params)?.total)
}

pub fn residual_breakdown(
    coeffs: &[f64],
    omega_sq: f64,
    basis: &SpectralBasis,
    params: &ModelParams,
) -> Result<ResidualBreakdown> {
    let phi = basis.values_at_nodes(coeffs)?;
    let t = basis.tables();
    let d1 = basis.apply_table(&t.dpsi, coeffs);
    let d2 = basis.apply_table(&t.d2psi, coeffs);
    let g = basis.grid();
    let per_panel = g.order_per_panel();
    let n_sq = params.n_sq();
    let (mut total, mut first) = (0.0, 0.0);
    for k in 0..phi.len() {
        let rho = g.nodes()[k];
        let f = phi[k];
        let r = d2[k] + d1[k] / rho - n_sq * f / (rho * rho) + omega_sq * f - model::potential_derivative(f, params);
        let c = g.weights()[k] * r * r;
        total += c;
        if k < per_panel {
            first += c;
        }
    }
    let p = basis.p();
    Ok(ResidualBreakdown { total: total.sqrt() / p, first_panel: first.sqrt() / p })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub rho: f64,
    pub phi: f64,
    pub phi_rho: f64,
    pub phi_rhorho: f64,
}

/// φ, φ_ρ, φ_ρρ at `points` uniform radii on [0, P], endpoints included.
pub fn sample_profile(basis: &SpectralBasis, coeffs: &[f64], points: usize) -> Result<Vec<ProfilePoint>> {
    if points < 2 {
        return Err(Error::InvalidConfig("profile needs at least two points".into()));
    }
    let sc = basis.sine_coefficients(coeffs)?;
    let p = basis.p();
    Ok((0..points)
        .map(|i| {
            let rho = if i + 1 == points { p } else { p * i as f64 / (points - 1) as f64 };
            let (phi, phi_rho, phi_rhorho) = sine_series(&sc, p, rho);
            ProfilePoint { rho, phi, phi_rho, phi_rhorho }
        })
        .collect())
}

/// Pass/fail of every closed-form bound for one solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremChecks {
    /// ω² > 2λ(b − a²/3) + N²/P².
    pub necessary_frequency: bool,
    /// Whether ω² < 2λb + N²/P², the hypothesis of the amplitude and decay bounds.
    pub below_decay_threshold: bool,
    /// φ_max < √(2a/3); vacuously true when the hypothesis fails.
    pub amplitude_bound: bool,
    /// φ² ≤ (2a/3)e^{−σ(ρ−P₀)} on [P₀, P]; vacuously true when the hypothesis fails.
    pub decay_bound: bool,
    pub decay_p0: f64,
    pub decay_rate: Option<f64>,
    /// Largest φ²/envelope ratio on [P₀, P].
    pub decay_worst_ratio: Option<f64>,
    /// ω² < 2λb implies Q̃₀ > π|N|/(aλ).
    pub norm_threshold: bool,
    /// 2λ(b − a²/4) < ω² < 2λb.
    pub in_existence_window: bool,
}

impl TheoremChecks {
    pub fn all_pass(&self) -> bool {
        self.necessary_frequency && self.amplitude_bound && self.decay_bound && self.norm_threshold
    }
}

/// Evaluates the closed-form bounds on a solution, with the decay check
/// starting at `p0`.
pub fn check_theorems(
    solution: &VortexSolution,
    basis: &SpectralBasis,
    params: &ModelParams,
    p0: f64,
) -> Result<TheoremChecks> {
    let bounds = model::theory_bounds(params);
    let w = solution.omega_sq;
    let hyp = w < 2.0 * params.lambda() * params.b() + params.n_sq() / (params.p() * params.p());
    let profile = sample_profile(basis, &solution.coeffs, PROFILE_POINTS)?;
    let (decay_rate, worst) = if hyp {
        let sigma = model::decay_rate(w, params)?;
        let worst = profile
            .iter()
            .filter(|pt| pt.rho >= p0)
            .map(|pt| pt.phi * pt.phi / model::decay_envelope(pt.rho, p0, sigma, params))
            .fold(0.0, f64::max);
        (Some(sigma), Some(worst))
    } else {
        (None, None)
    };
    Ok(TheoremChecks {
        necessary_frequency: w > bounds.omega_sq_necessary,
        below_decay_threshold: hyp,
        amplitude_bound: !hyp || solution.phi_max < bounds.phi_max_ceiling,
        decay_bound: worst.is_none_or(|r| r <= 1.0),
        decay_p0: p0,
        decay_rate,
        decay_worst_ratio: worst,
        norm_threshold: !(w < bounds.omega_sq_max) || solution.q0 > bounds.q0_threshold,
        in_existence_window: w > bounds.omega_sq_min && w < bounds.omega_sq_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureGrid;
    use approx::assert_relative_eq;

    fn setup(m: usize) -> (SpectralBasis, ModelParams) {
        let grid = QuadratureGrid::with_defaults(20.0).unwrap();
        (SpectralBasis::build(20.0, m, &grid).unwrap(), ModelParams::reference())
    }

    #[test]
    fn zero_coefficients() {
        let (basis, params) = setup(20);
        let zero = vec![0.0; 20];
        let f = discrete_functional(&zero, &basis, &params, 7.0).unwrap();
        assert_eq!(f, 1.1 * 7.0 / (4.0 * PI));
        assert!(functional_gradient(&zero, &basis, &params).unwrap().iter().all(|&g| g == 0.0));
        assert_eq!(residual_error(&zero, 3.3, &basis, &params).unwrap(), 0.0);
        assert!(discrete_functional(&zero[..5], &basis, &params, 1.0).is_err());
        assert!(functional_gradient(&zero[..5], &basis, &params).is_err());
    }

    #[test]
    fn small_norm_single_mode() {
        let (basis, params) = setup(20);
        let q0: f64 = 1e-6;
        let mut a = vec![0.0; 20];
        a[0] = q0.sqrt();
        let f = discrete_functional(&a, &basis, &params, q0).unwrap();
        let l11 = basis.k_matrix()[(0, 0)] + basis.c_matrix()[(0, 0)];
        let expected = 0.5 * q0 * l11 + 1.1 * q0 / (4.0 * PI);
        assert!((f - expected).abs() < 1e-12);
    }

    #[test]
    fn homogeneity_without_quartic() {
        let (basis, params) = setup(10);
        let sextic = params.with_a_pot_unchecked(0.0);
        let a: Vec<f64> = (0..10).map(|i| 0.3 / (i as f64 + 1.0)).collect();
        let func = Functional::new(&basis, &sextic);
        let phi = func.phi_nodes(&a);
        let (q1, n1) = (func.quadratic(&a), func.nonlinear(&phi));
        let a2: Vec<f64> = a.iter().map(|x| 2.0 * x).collect();
        let phi2 = func.phi_nodes(&a2);
        assert_relative_eq!(func.quadratic(&a2), 4.0 * q1, max_relative = 1e-13);
        assert_relative_eq!(func.nonlinear(&phi2), 64.0 * n1, max_relative = 1e-13);
        let total1 = discrete_functional(&a, &basis, &sextic, 1.0).unwrap() - func.constant(1.0);
        let total2 = discrete_functional(&a2, &basis, &sextic, 1.0).unwrap() - func.constant(1.0);
        assert_relative_eq!(total2, 4.0 * q1 + 64.0 * n1, max_relative = 1e-12);
        assert_relative_eq!(total1, q1 + n1, max_relative = 1e-12);
    }

    #[test]
    fn gradient_is_linear_without_coupling() {
        let (basis, params) = setup(15);
        let free = params.with_lambda_unchecked(0.0);
        let a: Vec<f64> = (0..15).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.4).collect();
        let g = functional_gradient(&a, &basis, &free).unwrap();
        let l = basis.k_matrix() + basis.c_matrix();
        let expected = &l * DVector::from_column_slice(&a);
        for (x, y) in g.iter().zip(expected.iter()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn factored_difference_matches_direct() {
        let (basis, params) = setup(20);
        let func = Functional::new(&basis, &params);
        let a: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x + 1e-3 * (i as f64).cos()).collect();
        let delta: Vec<f64> = b.iter().zip(&a).map(|(x, y)| x - y).collect();
        let direct = func.variable_part(&b) - func.variable_part(&a);
        assert_relative_eq!(func.difference(&a, &func.phi_nodes(&a), &delta), direct, max_relative = 1e-8);
    }

    #[test]
    fn sign_invariance() {
        let (basis, params) = setup(20);
        let a: Vec<f64> = (0..20).map(|i| (i as f64 * 0.9).cos()).collect();
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        let fa = discrete_functional(&a, &basis, &params, 1.0).unwrap();
        let fn_ = discrete_functional(&neg, &basis, &params, 1.0).unwrap();
        assert_relative_eq!(fa, fn_, max_relative = 1e-14);
    }

    #[test]
    fn config_validation() {
        let (basis, params) = setup(10);
        assert!(minimize_on_sphere(&basis, &params, &SolveConfig::new(0.0)).is_err());
        let mut c = SolveConfig::new(1.0);
        c.grad_tol = 0.0;
        assert!(minimize_on_sphere(&basis, &params, &c).is_err());
        c = SolveConfig::new(1.0);
        c.initial_guess = InitialGuess::Custom(vec![1.0; 3]);
        assert!(minimize_on_sphere(&basis, &params, &c).is_err());
        assert!(recover_omega_sq(&[0.0; 10], &basis, &params, 0.0).is_err());
    }

    #[test]
    fn nonconvergence_is_reported() {
        let (basis, params) = setup(30);
        let mut c = SolveConfig::new(100.0);
        c.max_iter = 3;
        c.restarts = 0;
        let s = minimize_on_sphere(&basis, &params, &c).unwrap();
        assert!(!s.converged);
        assert!(s.grad_norm > 0.0);
    }

    fn random_sphere_point(rng: &mut ChaCha8Rng, m: usize, q0: f64) -> Vec<f64> {
        // Decaying spectrum keeps φ smooth enough to look like a profile.
        let mut a: Vec<f64> = (0..m).map(|k| rng.gen_range(-1.0..1.0) / (1.0 + k as f64)).collect();
        rescale(&mut a, q0.sqrt());
        a
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (basis, params) = setup(60);
        let func = Functional::new(&basis, &params);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = random_sphere_point(&mut rng, 60, 100.0);
            let g = func.gradient(&a).unwrap();
            let h = 1e-5;
            let fd: Vec<f64> = (0..60)
                .map(|k| {
                    let mut up = a.clone();
                    let mut dn = a.clone();
                    up[k] += h;
                    dn[k] -= h;
                    (func.variable_part(&up) - func.variable_part(&dn)) / (2.0 * h)
                })
                .collect();
            let err: Vec<f64> = g.iter().zip(&fd).map(|(x, y)| x - y).collect();
            assert!(norm(&err) < 1e-4 * norm(&g), "{} vs {}", norm(&err), norm(&g));
        }
    }

    struct Recorder {
        q0: f64,
        worst_drift: f64,
        worst_change: f64,
        steps: usize,
    }

    impl IterationObserver for Recorder {
        fn accepted(&mut self, coeffs: &[f64], f_change: f64) {
            let q = coeffs.iter().map(|x| x * x).sum::<f64>();
            self.worst_drift = self.worst_drift.max((q - self.q0).abs() / self.q0);
            self.worst_change = self.worst_change.max(f_change);
            self.steps += 1;
        }
    }

    #[test]
    fn iterations_stay_on_sphere_and_descend() {
        let (basis, params) = setup(60);
        for &q0 in &[10.0, 100.0] {
            let mut rec = Recorder { q0, worst_drift: 0.0, worst_change: f64::NEG_INFINITY, steps: 0 };
            let s = minimize_observed(&basis, &params, &SolveConfig::new(q0), &mut rec).unwrap();
            assert!(s.converged);
            assert!(rec.steps > 0);
            assert!(rec.worst_drift < 1e-12, "drift {}", rec.worst_drift);
            assert!(rec.worst_change <= 0.0, "F increased by {}", rec.worst_change);
        }
    }

    #[test]
    fn plain_projected_gradient_converges() {
        let (basis, params) = setup(40);
        let mut c = SolveConfig::new(50.0);
        c.optimizer = Optimizer::ProjectedGradient;
        c.preconditioned = false;
        c.restarts = 0;
        let plain = minimize_on_sphere(&basis, &params, &c).unwrap();
        let fast = minimize_on_sphere(&basis, &params, &SolveConfig::new(50.0)).unwrap();
        assert!(plain.converged && fast.converged);
        assert!((plain.omega_sq - fast.omega_sq).abs() < 1e-6);
    }

    #[test]
    fn omega_matches_gradient_identity() {
        let (basis, params) = setup(60);
        for &q0 in &[10.0, 100.0, 500.0] {
            let s = minimize_on_sphere(&basis, &params, &SolveConfig::new(q0)).unwrap();
            let g = functional_gradient(&s.coeffs, &basis, &params).unwrap();
            let via_gradient = 4.0 * PI / q0 * dot(&s.coeffs, &g) + 2.0 * params.lambda() * params.b();
            assert!((s.omega_sq - via_gradient).abs() < 1e-6, "{} vs {via_gradient}", s.omega_sq);
        }
    }

    #[test]
    fn residual_shrinks_with_basis_size() {
        let grid = QuadratureGrid::with_defaults(20.0).unwrap();
        let params = ModelParams::reference();
        let re: Vec<f64> = [30, 60, 90]
            .iter()
            .map(|&m| {
                let basis = SpectralBasis::build(20.0, m, &grid).unwrap();
                minimize_on_sphere(&basis, &params, &SolveConfig::new(100.0)).unwrap().residual_error
            })
            .collect();
        assert!(re[0] > re[1] && re[1] > re[2], "{re:?}");
    }

    #[test]
    fn small_norm_approaches_linear_frequency() {
        let (basis, params) = setup(60);
        let s = minimize_on_sphere(&basis, &params, &SolveConfig::new(0.01)).unwrap();
        let expected = crate::oracle::linear_limit_omega_sq(&params).unwrap();
        assert!(s.converged);
        assert!((s.omega_sq - expected).abs() < 1e-3, "{} vs {expected}", s.omega_sq);
    }

    #[test]
    fn profile_bounds_hold() {
        let (basis, params) = setup(60);
        for n in 1..=3 {
            let p = params.with_n(n).unwrap();
            let s = minimize_on_sphere(&basis, &p, &SolveConfig::new(100.0)).unwrap();
            let prof = sample_profile(&basis, &s.coeffs, PROFILE_POINTS).unwrap();
            let top = prof.iter().map(|pt| pt.phi).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(top, s.phi_max);
            let checks = check_theorems(&s, &basis, &p, 0.75 * p.p()).unwrap();
            assert!(checks.all_pass(), "{checks:?}");
            assert!(checks.in_existence_window);
        }
    }

    #[test]
    fn resolved_profile_is_nonnegative() {
        // At m = 60 the truncated series rings at the 1e-7 level in the
        // exponentially small tail; m = 120 resolves it for these rows.
        let (basis, params) = setup(120);
        for (n, q0) in [(1, 50.0), (1, 100.0), (1, 200.0), (3, 100.0)] {
            let p = params.with_n(n).unwrap();
            let s = minimize_on_sphere(&basis, &p, &SolveConfig::new(q0)).unwrap();
            let prof = sample_profile(&basis, &s.coeffs, PROFILE_POINTS).unwrap();
            let min = prof.iter().map(|pt| pt.phi).fold(f64::INFINITY, f64::min);
            assert!(min >= -1e-8 * s.phi_max, "N={n} q0={q0}: min {min}");
        }
    }

    #[test]
    fn residual_of_zero_field_is_zero() {
        let (basis, params) = setup(20);
        assert_eq!(residual_error(&[0.0; 20], 3.7, &basis, &params).unwrap(), 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::{any, prop_assert, proptest, ProptestConfig};

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn functional_is_even(seed in any::<u64>(), q0 in 0.1f64..500.0) {
                let (basis, params) = setup(20);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random_sphere_point(&mut rng, 20, q0);
                let neg: Vec<f64> = a.iter().map(|x| -x).collect();
                let f = discrete_functional(&a, &basis, &params, q0).unwrap();
                let g = discrete_functional(&neg, &basis, &params, q0).unwrap();
                prop_assert!((f - g).abs() <= 1e-12 * f.abs().max(1.0));
            }

            #[test]
            fn retraction_delta_stays_on_sphere(seed in any::<u64>(), eta in 1e-8f64..10.0) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let q0 = 100.0;
                let a = random_sphere_point(&mut rng, 30, q0);
                let unit: Vec<f64> = a.iter().map(|x| x / q0.sqrt()).collect();
                let raw: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let d = project_tangent(&raw, &unit);
                let t = eta * eta * dot(&d, &d) / q0;
                let root = (1.0 + t).sqrt();
                let moved: Vec<f64> = a
                    .iter()
                    .zip(&d)
                    .map(|(x, di)| x + (-t / ((1.0 + root) * root)) * x + eta * di / root)
                    .collect();
                let q = moved.iter().map(|x| x * x).sum::<f64>();
                prop_assert!((q - q0).abs() < 1e-12 * q0);
            }
        }
    }
}
