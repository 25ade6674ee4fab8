//! Sweeps over the prescribed norm and the winding number.

use serde::{Deserialize, Serialize};

use crate::basis::SpectralBasis;
use crate::error::{Error, Result};
use crate::model::{self, ModelParams};
use crate::oracle;
use crate::solver::{minimize_on_sphere, InitialGuess, SolveConfig, VortexSolution};

/// One table row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub q0: f64,
    pub n: i32,
    pub omega_sq: f64,
    pub phi_max: f64,
    pub residual_error: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl From<&VortexSolution> for SweepRecord {
    fn from(s: &VortexSolution) -> Self {
        Self {
            q0: s.q0,
            n: s.n,
            omega_sq: s.omega_sq,
            phi_max: s.phi_max,
            residual_error: s.residual_error,
            iterations: s.iterations,
            converged: s.converged,
        }
    }
}

fn check_ascending(q0_list: &[f64]) -> Result<()> {
    if q0_list.is_empty() {
        return Err(Error::InvalidConfig("empty q0 list".into()));
    }
    if let Some(&q) = q0_list.iter().find(|q| !(**q > 0.0) || !q.is_finite()) {
        return Err(Error::InvalidConfig(format!("q0 values must be positive, got {q}")));
    }
    if q0_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("q0 list must be strictly ascending".into()));
    }
    Ok(())
}

/// Solves along an ascending list of norms, each solve starting from the
/// previous minimizer scaled by √(q0_new/q0_old). Non-converged rows are
/// kept and flagged; the sweep continues past them.
pub fn sweep_q0_solutions(
    params: &ModelParams,
    basis: &SpectralBasis,
    q0_list: &[f64],
    config: &SolveConfig,
) -> Result<Vec<VortexSolution>> {
    check_ascending(q0_list)?;
    let mut out: Vec<VortexSolution> = Vec::with_capacity(q0_list.len());
    for &q0 in q0_list {
        let mut cfg = config.clone();
        cfg.q0 = q0;
        if let Some(prev) = out.last() {
            let s = (q0 / prev.q0).sqrt();
            cfg.initial_guess = InitialGuess::Custom(prev.coeffs.iter().map(|a| a * s).collect());
        }
        out.push(minimize_on_sphere(basis, params, &cfg)?);
    }
    Ok(out)
}

/// Record form of [`sweep_q0_solutions`].
pub fn sweep_q0(
    params: &ModelParams,
    basis: &SpectralBasis,
    q0_list: &[f64],
    config: &SolveConfig,
) -> Result<Vec<SweepRecord>> {
    Ok(sweep_q0_solutions(params, basis, q0_list, config)?.iter().map(SweepRecord::from).collect())
}

/// Independent solve per norm; same rows as a cold call to the solver.
pub fn sweep_q0_cold(
    params: &ModelParams,
    basis: &SpectralBasis,
    q0_list: &[f64],
    config: &SolveConfig,
) -> Result<Vec<VortexSolution>> {
    check_ascending(q0_list)?;
    q0_list
        .iter()
        .map(|&q0| {
            let mut cfg = config.clone();
            cfg.q0 = q0;
            minimize_on_sphere(basis, params, &cfg)
        })
        .collect()
}

/// One solve per winding number at fixed norm `config.q0`. K and C do not
/// depend on N, so one basis serves every row.
pub fn sweep_n_solutions(
    params: &ModelParams,
    basis: &SpectralBasis,
    n_list: &[i32],
    config: &SolveConfig,
) -> Result<Vec<VortexSolution>> {
    if n_list.is_empty() {
        return Err(Error::InvalidConfig("empty N list".into()));
    }
    n_list
        .iter()
        .map(|&n| {
            let p = params.with_n(n)?;
            minimize_on_sphere(basis, &p, config)
        })
        .collect()
}

pub fn sweep_n(
    params: &ModelParams,
    basis: &SpectralBasis,
    n_list: &[i32],
    config: &SolveConfig,
) -> Result<Vec<SweepRecord>> {
    Ok(sweep_n_solutions(params, basis, n_list, config)?.iter().map(SweepRecord::from).collect())
}

const CROSSING_TOL: f64 = 1e-3;
const BRACKET_LO: f64 = 1e-2;
const BRACKET_CAP: f64 = 1e5;

/// Norm at which ω²(Q̃₀) passes `target`, by bisection in log Q̃₀.
///
/// The target must lie between the lower edge of the existence window and
/// the small-amplitude limit 2λb + (j_{|N|,1}/P)². Every bisection step
/// checks that ω² is still decreasing across the bracket.
pub fn locate_omega_crossing(
    params: &ModelParams,
    basis: &SpectralBasis,
    target: f64,
    config: &SolveConfig,
) -> Result<f64> {
    let lo_bound = model::theory_bounds(params).omega_sq_min;
    let hi_bound = oracle::linear_limit_omega_sq(params)?;
    if !(target > lo_bound && target < hi_bound) {
        return Err(Error::TargetOutOfRange { target, lo: lo_bound, hi: hi_bound });
    }
    let solve = |q0: f64| -> Result<f64> {
        let mut cfg = config.clone();
        cfg.q0 = q0;
        let s = minimize_on_sphere(basis, params, &cfg)?;
        if !s.converged {
            return Err(Error::NotConverged(format!("Q0 = {q0}, gradient norm {:e}", s.grad_norm)));
        }
        Ok(s.omega_sq)
    };
    let monotone = |qa: f64, wa: f64, qb: f64, wb: f64| -> Result<()> {
        if wa < wb {
            return Err(Error::NonMonotone { q0_a: qa, w_a: wa, q0_b: qb, w_b: wb });
        }
        Ok(())
    };

    let (mut q_lo, mut w_lo) = (BRACKET_LO, solve(BRACKET_LO)?);
    if (w_lo - target).abs() < CROSSING_TOL {
        return Ok(q_lo);
    }
    if w_lo < target {
        return Err(Error::TargetOutOfRange { target, lo: lo_bound, hi: w_lo });
    }
    let (mut q_hi, mut w_hi) = (q_lo, w_lo);
    while w_hi > target {
        let q = q_hi * 4.0;
        if q > BRACKET_CAP {
            return Err(Error::TargetOutOfRange { target, lo: w_hi, hi: hi_bound });
        }
        let w = solve(q)?;
        monotone(q_hi, w_hi, q, w)?;
        if (w - target).abs() < CROSSING_TOL {
            return Ok(q);
        }
        if w > target {
            (q_lo, w_lo) = (q, w);
        }
        (q_hi, w_hi) = (q, w);
    }
    for _ in 0..200 {
        let q = (q_lo * q_hi).sqrt();
        let w = solve(q)?;
        monotone(q_lo, w_lo, q, w)?;
        monotone(q, w, q_hi, w_hi)?;
        if (w - target).abs() < CROSSING_TOL {
            return Ok(q);
        }
        if w > target {
            (q_lo, w_lo) = (q, w);
        } else {
            (q_hi, w_hi) = (q, w);
        }
    }
    Err(Error::NotConverged(format!("crossing of ω² = {target} not isolated")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::QuadratureGrid;

    fn basis() -> SpectralBasis {
        let grid = QuadratureGrid::with_defaults(20.0).unwrap();
        SpectralBasis::build(20.0, 60, &grid).unwrap()
    }

    #[test]
    fn rejects_unordered_lists() {
        let b = basis();
        let p = ModelParams::reference();
        let cfg = SolveConfig::new(1.0);
        assert!(sweep_q0(&p, &b, &[10.0, 5.0], &cfg).is_err());
        assert!(sweep_q0(&p, &b, &[10.0, 10.0], &cfg).is_err());
        assert!(sweep_q0(&p, &b, &[], &cfg).is_err());
        assert!(sweep_q0(&p, &b, &[-1.0, 5.0], &cfg).is_err());
        assert!(sweep_n(&p, &b, &[1, 0], &cfg).is_err());
    }

    #[test]
    fn warm_and_cold_agree() {
        let b = basis();
        let p = ModelParams::reference();
        let cfg = SolveConfig::new(1.0);
        let list = [10.0, 50.0, 100.0, 200.0];
        let warm = sweep_q0_solutions(&p, &b, &list, &cfg).unwrap();
        let cold = sweep_q0_cold(&p, &b, &list, &cfg).unwrap();
        for (w, c) in warm.iter().zip(&cold) {
            assert!(w.converged && c.converged);
            assert!((w.omega_sq - c.omega_sq).abs() < 1e-4, "q0 {}: {} vs {}", w.q0, w.omega_sq, c.omega_sq);
        }
    }

    #[test]
    fn n_sweep_trends() {
        let b = basis();
        let sols = sweep_n_solutions(&ModelParams::reference(), &b, &[1, 2, 3], &SolveConfig::new(100.0)).unwrap();
        assert!(sols.windows(2).all(|w| w[0].omega_sq < w[1].omega_sq));
        assert!(sols.windows(2).all(|w| w[0].phi_max > w[1].phi_max));
        assert!(sols.windows(2).all(|w| w[0].peak_radius < w[1].peak_radius));
    }

    #[test]
    fn crossing_below_window_is_rejected() {
        let b = basis();
        let err = locate_omega_crossing(&ModelParams::reference(), &b, 0.15, &SolveConfig::new(1.0)).unwrap_err();
        assert!(matches!(err, Error::TargetOutOfRange { .. }));
        let err = locate_omega_crossing(&ModelParams::reference(), &b, 2.3, &SolveConfig::new(1.0)).unwrap_err();
        assert!(matches!(err, Error::TargetOutOfRange { .. }));
    }

    #[test]
    fn crossing_recovers_table_row() {
        let b = basis();
        let p = ModelParams::reference();
        let cfg = SolveConfig::new(1.0);
        let q = locate_omega_crossing(&p, &b, 0.4287, &cfg).unwrap();
        assert!((q - 100.0).abs() < 5.0, "{q}");
    }

    #[test]
    fn crossing_of_linear_offset() {
        let b = basis();
        let p = ModelParams::reference();
        let cfg = SolveConfig::new(1.0);
        let q = locate_omega_crossing(&p, &b, 2.2, &cfg).unwrap();
        assert!(q > 0.0);
        let mut c = cfg.clone();
        c.q0 = q;
        let s = minimize_on_sphere(&b, &p, &c).unwrap();
        assert!((s.omega_sq - 2.2).abs() < 1e-3);
        assert!(q > model::theory_bounds(&p).q0_threshold);
    }
}
