//! Physical parameters of the sextic model and the closed-form bounds that
//! every ground-state solution has to respect.
//!
//! The radial profile φ(ρ) of a vortex Φ = φ(ρ)e^{iωt+iNθ} on the disk of
//! radius P satisfies
//!
//! ```text
//! φ'' + φ'/ρ − N²φ/ρ² − U'(φ) + ω²φ = 0,   φ(0) = φ(P) = 0,
//! U(φ) = λ(φ⁶ − aφ⁴ + bφ²).
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coupling constants, winding number and domain radius.
///
/// Construction validates λ, a, b > 0, b > a²/4, |N| ≥ 1 and P > 0; no
/// instance violating them can exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    lambda: f64,
    a_pot: f64,
    b: f64,
    n: i32,
    p: f64,
}

impl ModelParams {
    pub fn new(lambda: f64, a_pot: f64, b: f64, n: i32, p: f64) -> Result<Self> {
        let finite = [lambda, a_pot, b, p].iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("parameters must be finite".into()));
        }
        if lambda <= 0.0 {
            return Err(Error::InvalidParams(format!("lambda > 0 violated (lambda = {lambda})")));
        }
        if a_pot <= 0.0 {
            return Err(Error::InvalidParams(format!("a > 0 violated (a = {a_pot})")));
        }
        if b <= 0.0 {
            return Err(Error::InvalidParams(format!("b > 0 violated (b = {b})")));
        }
        if b <= a_pot * a_pot / 4.0 {
            return Err(Error::InvalidParams(format!("b > a²/4 violated (b = {b}, a²/4 = {})", a_pot * a_pot / 4.0)));
        }
        if n == 0 {
            return Err(Error::InvalidParams("|N| >= 1 violated (N = 0)".into()));
        }
        if p <= 0.0 {
            return Err(Error::InvalidParams(format!("P > 0 violated (P = {p})")));
        }
        Ok(Self { lambda, a_pot, b, n, p })
    }

    /// λ = 1, a = 2, b = 1.1, N = 1, P = 20.
    pub fn reference() -> Self {
        Self { lambda: 1.0, a_pot: 2.0, b: 1.1, n: 1, p: 20.0 }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn a_pot(&self) -> f64 {
        self.a_pot
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> i32 {
        self.n
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// N² as a float.
    pub fn n_sq(&self) -> f64 {
        let n = self.n as f64;
        n * n
    }

    /// Same couplings and radius, different winding number.
    pub fn with_n(&self, n: i32) -> Result<Self> {
        Self::new(self.lambda, self.a_pot, self.b, n, self.p)
    }

    /// Same couplings with λ replaced; used to isolate the quadratic part of
    /// the functional in tests. λ = 0 bypasses validation on purpose.
    #[doc(hidden)]
    pub fn with_lambda_unchecked(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }

    /// Same parameters with a replaced, bypassing validation (test use only).
    #[doc(hidden)]
    pub fn with_a_pot_unchecked(&self, a_pot: f64) -> Self {
        Self { a_pot, ..*self }
    }
}

/// U(φ) = λ(φ⁶ − aφ⁴ + bφ²).
pub fn potential(phi: f64, params: &ModelParams) -> f64 {
    let phi2 = phi * phi;
    params.lambda * phi2 * (phi2 * phi2 - params.a_pot * phi2 + params.b)
}

/// U'(φ) = λ(6φ⁵ − 4aφ³ + 2bφ).
pub fn potential_derivative(phi: f64, params: &ModelParams) -> f64 {
    let phi2 = phi * phi;
    params.lambda * phi * (6.0 * phi2 * phi2 - 4.0 * params.a_pot * phi2 + 2.0 * params.b)
}

/// Closed-form bounds derived from the model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryBounds {
    /// Lower end of the existence window, 2λ(b − a²/4).
    pub omega_sq_min: f64,
    /// Upper end of the existence window (linear limit), 2λb.
    pub omega_sq_max: f64,
    /// Any nontrivial solution has ω² above 2λ(b − a²/3) + N²/P².
    pub omega_sq_necessary: f64,
    /// √(2a/3): |φ| stays below this whenever ω² < 2λb + N²/P².
    pub phi_max_ceiling: f64,
    /// π|N|/(aλ): minimum prescribed norm for ω² < 2λb.
    pub q0_threshold: f64,
    /// Sufficient domain radius for a negative-action test function.
    pub p_star: f64,
    /// Frequency at which `p_star` was evaluated.
    pub p_star_omega_sq: f64,
}

/// Computes every closed-form bound, evaluating P* at the midpoint of the
/// existence window.
pub fn theory_bounds(params: &ModelParams) -> TheoryBounds {
    let omega_sq_min = 2.0 * params.lambda * (params.b - params.a_pot * params.a_pot / 4.0);
    let omega_sq_max = 2.0 * params.lambda * params.b;
    let mid = 0.5 * (omega_sq_min + omega_sq_max);
    theory_bounds_at(params, mid).expect("midpoint lies inside the existence window")
}

/// As [`theory_bounds`] but with P* evaluated at a caller-supplied ω².
///
/// Fails when ω² ≤ 2λ(b − a²/4), where the leading coefficient of the
/// test-function action is not positive and no finite P* exists.
pub fn theory_bounds_at(params: &ModelParams, omega_sq: f64) -> Result<TheoryBounds> {
    let (lambda, a, b) = (params.lambda, params.a_pot, params.b);
    let n_sq = params.n_sq();
    let p_sq = params.p * params.p;
    Ok(TheoryBounds {
        omega_sq_min: 2.0 * lambda * (b - a * a / 4.0),
        omega_sq_max: 2.0 * lambda * b,
        omega_sq_necessary: 2.0 * lambda * (b - a * a / 3.0) + n_sq / p_sq,
        phi_max_ceiling: (2.0 * a / 3.0).sqrt(),
        q0_threshold: std::f64::consts::PI * (params.n.abs() as f64) / (a * lambda),
        p_star: p_star(params, omega_sq)?,
        p_star_omega_sq: omega_sq,
    })
}

/// Coefficients of the bound I(φ₀) ≤ −𝒜P² + ℬP + 𝒞 ln P for the trapezoidal
/// test function of height t, with t² = a/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrapezoidCoefficients {
    pub quadratic: f64,
    pub linear: f64,
    pub log: f64,
}

pub fn trapezoid_coefficients(params: &ModelParams, omega_sq: f64) -> TrapezoidCoefficients {
    let (lambda, a, b) = (params.lambda, params.a_pot, params.b);
    let t2 = a / 2.0;
    let t4 = t2 * t2;
    let t6 = t4 * t2;
    let shifted_b = b - omega_sq / (2.0 * lambda);
    let bracket = t6 - a * t4 + shifted_b * t2;
    TrapezoidCoefficients {
        quadratic: -0.5 * lambda * bracket,
        linear: t2 / 2.0 + lambda * bracket + lambda * (a / 5.0 * t4 - t6 / 7.0 - shifted_b * t2 / 3.0),
        log: params.n_sq() * t2 / 2.0,
    }
}

/// P* = (ℬ + 𝒞)/𝒜 after bounding ln P by P.
pub fn p_star(params: &ModelParams, omega_sq: f64) -> Result<f64> {
    let c = trapezoid_coefficients(params, omega_sq);
    if !(c.quadratic > 0.0) {
        return Err(Error::InvalidParams(format!(
            "P* undefined at omega² = {omega_sq}: quadratic coefficient {} is not positive",
            c.quadratic
        )));
    }
    Ok((c.linear + c.log) / c.quadratic)
}

/// σ = √(N²/P² + 2λb − ω²), the exponential tail rate near ρ = P.
pub fn decay_rate(omega_sq: f64, params: &ModelParams) -> Result<f64> {
    let radicand = params.n_sq() / (params.p * params.p) + 2.0 * params.lambda * params.b - omega_sq;
    if radicand > 0.0 {
        Ok(radicand.sqrt())
    } else {
        Err(Error::DecayOutOfRange { radicand })
    }
}

/// Upper envelope (2a/3)·exp(−σ(ρ − P₀)) for φ² on [P₀, P].
pub fn decay_envelope(rho: f64, p0: f64, sigma: f64, params: &ModelParams) -> f64 {
    2.0 * params.a_pot / 3.0 * (-sigma * (rho - p0)).exp()
}
