//! Composite Gauss-Legendre quadrature on (0, P).
//!
//! One grid is shared by every integral in the crate. Gauss nodes never sit
//! on panel endpoints, so integrands carrying 1/ρ or 1/ρ² factors are always
//! evaluated at finite arguments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Panels per grid unless overridden.
pub const DEFAULT_PANELS: usize = 48;
/// Gauss points per panel unless overridden.
pub const DEFAULT_ORDER: usize = 8;

/// Nodes and weights of the Gauss-Legendre rule of the given order on [-1, 1].
///
/// Roots of P_n are polished by Newton iteration from the Chebyshev-like
/// initial guess cos(π(i − 1/4)/(n + 1/2)).
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss grid over uniform panels of [0, P].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: usize,
    order_per_panel: usize,
    p: f64,
}

impl QuadratureGrid {
    pub fn new(p: f64, panels: usize, order_per_panel: usize) -> Result<Self> {
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::InvalidConfig(format!("grid radius must be positive, got {p}")));
        }
        if panels < 1 {
            return Err(Error::InvalidConfig("grid needs at least one panel".into()));
        }
        if order_per_panel < 2 {
            return Err(Error::InvalidConfig(format!("Gauss order per panel must be >= 2, got {order_per_panel}")));
        }
        let (ref_nodes, ref_weights) = gauss_legendre(order_per_panel);
        let width = p / panels as f64;
        let half = 0.5 * width;
        let mut nodes = Vec::with_capacity(panels * order_per_panel);
        let mut weights = Vec::with_capacity(panels * order_per_panel);
        for panel in 0..panels {
            let mid = (panel as f64 + 0.5) * width;
            for (x, w) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
        }
        Ok(Self { nodes, weights, panels, order_per_panel, p })
    }

    /// Default resolution (48 panels × 8 points).
    pub fn with_defaults(p: f64) -> Result<Self> {
        Self::new(p, DEFAULT_PANELS, DEFAULT_ORDER)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn order_per_panel(&self) -> usize {
        self.order_per_panel
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Short string identifying the grid, used to key basis caches.
    pub fn signature(&self) -> String {
        format!("gl-composite:p={:e}:panels={}:order={}", self.p, self.panels, self.order_per_panel)
    }

    /// Σ_k w_k f(ρ_k). A non-finite integrand value is reported with the
    /// offending node.
    pub fn integrate<F: Fn(f64) -> f64>(&self, integrand: F) -> Result<f64> {
        let mut sum = 0.0;
        for (index, (&rho, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let value = integrand(rho);
            if !value.is_finite() {
                return Err(Error::NonFiniteIntegrand { index, rho, value });
            }
            sum += w * value;
        }
        Ok(sum)
    }

    /// Σ_k w_k v_k over precomputed nodal values.
    pub fn integrate_values(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}
