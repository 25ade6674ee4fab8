//! Orthonormal sine basis under the weighted product (u, v) = 4π∫ρuv dρ.
//!
//! Each basis function is stored through its coefficients over the raw
//! sines s_k(ρ) = sin(kπρ/P), so first and second derivatives are analytic.
//! Nodal tables of ψ_j, ψ_j' and ψ_j'' on the shared quadrature grid are
//! kept alongside for the hot loops of the optimizer.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureGrid;

/// Basis size unless overridden.
pub const DEFAULT_BASIS_SIZE: usize = 60;

/// Relative pivot below which Gram-Schmidt is declared broken.
const PIVOT_FLOOR: f64 = 1e-12;

/// Orthonormality residual that triggers one re-orthogonalization sweep.
const REORTHO_TRIGGER: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SpectralBasis {
    m: usize,
    p: f64,
    /// Row j holds the sine coefficients of ψ_j (lower triangular).
    gs: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    centrifugal: DMatrix<f64>,
    grid: QuadratureGrid,
    tables: NodalTables,
}

/// ψ_j, ψ_j', ψ_j'' at every grid node, row-major by node.
#[derive(Debug, Clone)]
pub(crate) struct NodalTables {
    pub(crate) psi: Vec<f64>,
    pub(crate) dpsi: Vec<f64>,
    pub(crate) d2psi: Vec<f64>,
}

fn wavenumber(k: usize, p: f64) -> f64 {
    (k as f64 + 1.0) * PI / p
}

/// Raw sine values sin(kπρ/P), k = 1..=m, into `out`.
fn raw_sines(rho: f64, p: f64, out: &mut [f64]) {
    for (k, v) in out.iter_mut().enumerate() {
        *v = (wavenumber(k, p) * rho).sin();
    }
}

fn weighted_dot(grid: &QuadratureGrid, u: &[f64], v: &[f64]) -> f64 {
    let mut s = 0.0;
    for ((&rho, &w), (x, y)) in grid.nodes().iter().zip(grid.weights()).zip(u.iter().zip(v)) {
        s += w * rho * x * y;
    }
    4.0 * PI * s
}

impl SpectralBasis {
    /// Modified Gram-Schmidt of s_1..s_m in index order, followed by
    /// quadrature assembly of the stiffness and centrifugal matrices.
    pub fn build(p: f64, m: usize, grid: &QuadratureGrid) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidConfig("basis size must be at least 1".into()));
        }
        if (grid.p() - p).abs() > 1e-12 * p {
            return Err(Error::InvalidConfig(format!("grid radius {} does not match domain radius {p}", grid.p())));
        }
        let n_nodes = grid.len();
        // Raw sines at the nodes, one column per mode.
        let mut sines = vec![vec![0.0; n_nodes]; m];
        let mut buf = vec![0.0; m];
        for (i, &rho) in grid.nodes().iter().enumerate() {
            raw_sines(rho, p, &mut buf);
            for k in 0..m {
                sines[k][i] = buf[k];
            }
        }

        let mut gs = DMatrix::<f64>::zeros(m, m);
        let mut psi_vals: Vec<Vec<f64>> = Vec::with_capacity(m);
        for j in 0..m {
            let mut coeffs = vec![0.0; m];
            coeffs[j] = 1.0;
            let mut vals = sines[j].clone();
            let raw_norm = weighted_dot(grid, &vals, &vals).sqrt();
            for i in 0..j {
                let r = weighted_dot(grid, &vals, &psi_vals[i]);
                for (v, q) in vals.iter_mut().zip(&psi_vals[i]) {
                    *v -= r * q;
                }
                for k in 0..=i {
                    coeffs[k] -= r * gs[(i, k)];
                }
            }
            let norm = weighted_dot(grid, &vals, &vals).sqrt();
            let pivot = norm / raw_norm;
            if !(pivot >= PIVOT_FLOOR) {
                return Err(Error::GramSchmidtBreakdown { mode: j + 1, pivot });
            }
            for v in vals.iter_mut() {
                *v /= norm;
            }
            for k in 0..=j {
                gs[(j, k)] = coeffs[k] / norm;
            }
            psi_vals.push(vals);
        }

        if gram_residual(grid, &psi_vals) > REORTHO_TRIGGER {
            reorthogonalize(grid, &mut gs, &mut psi_vals);
        }

        let mut basis = Self::from_gs(p, gs, grid.clone());
        basis.assemble_matrices();
        Ok(basis)
    }

    /// Basis from stored Gram-Schmidt coefficients; matrices left empty.
    fn from_gs(p: f64, gs: DMatrix<f64>, grid: QuadratureGrid) -> Self {
        let m = gs.nrows();
        let tables = nodal_tables(&gs, p, &grid);
        Self { m, p, gs, stiffness: DMatrix::zeros(m, m), centrifugal: DMatrix::zeros(m, m), grid, tables }
    }

    fn assemble_matrices(&mut self) {
        let m = self.m;
        let mut k_mat = DMatrix::<f64>::zeros(m, m);
        let mut c_mat = DMatrix::<f64>::zeros(m, m);
        for (node, (&rho, &w)) in self.grid.nodes().iter().zip(self.grid.weights()).enumerate() {
            let psi = &self.tables.psi[node * m..(node + 1) * m];
            let dpsi = &self.tables.dpsi[node * m..(node + 1) * m];
            let wk = w * rho;
            let wc = w / rho;
            for i in 0..m {
                for j in 0..=i {
                    k_mat[(i, j)] += wk * dpsi[i] * dpsi[j];
                    c_mat[(i, j)] += wc * psi[i] * psi[j];
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                k_mat[(j, i)] = k_mat[(i, j)];
                c_mat[(j, i)] = c_mat[(i, j)];
            }
        }
        self.stiffness = k_mat;
        self.centrifugal = c_mat;
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    /// Lower-triangular G with ψ_j = Σ_k G_jk s_k.
    pub fn gs_matrix(&self) -> &DMatrix<f64> {
        &self.gs
    }

    /// K_ij = ∫ρψ_i'ψ_j' dρ.
    pub fn k_matrix(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    /// C_ij = ∫ψ_iψ_j/ρ dρ.
    pub fn c_matrix(&self) -> &DMatrix<f64> {
        &self.centrifugal
    }

    pub(crate) fn tables(&self) -> &NodalTables {
        &self.tables
    }

    /// max_{i,j} |(ψ_i, ψ_j) − δ_ij| on the basis grid.
    pub fn orthonormality_residual(&self) -> f64 {
        let cols: Vec<Vec<f64>> =
            (0..self.m).map(|j| (0..self.grid.len()).map(|n| self.tables.psi[n * self.m + j]).collect()).collect();
        gram_residual(&self.grid, &cols)
    }

    fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.m {
            return Err(Error::DimensionMismatch { expected: self.m, got: coeffs.len() });
        }
        Ok(())
    }

    /// Sine-series coefficients Gᵀa of the profile Σ a_j ψ_j.
    pub fn sine_coefficients(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs)?;
        let mut out = vec![0.0; self.m];
        for (j, &a) in coeffs.iter().enumerate() {
            for (k, o) in out.iter_mut().enumerate().take(j + 1) {
                *o += a * self.gs[(j, k)];
            }
        }
        Ok(out)
    }

    /// φ(ρ) = Σ a_j ψ_j(ρ) for ρ ∈ [0, P].
    pub fn evaluate(&self, coeffs: &[f64], rho: f64) -> Result<f64> {
        if !(0.0..=self.p).contains(&rho) {
            return Err(Error::OutOfDomain { rho, lo: 0.0, hi: self.p });
        }
        let sc = self.sine_coefficients(coeffs)?;
        Ok(sine_series(&sc, self.p, rho).0)
    }

    /// (φ_ρ, φ_ρρ) for ρ ∈ (0, P).
    pub fn evaluate_derivatives(&self, coeffs: &[f64], rho: f64) -> Result<(f64, f64)> {
        if !(rho > 0.0 && rho < self.p) {
            return Err(Error::OutOfDomain { rho, lo: 0.0, hi: self.p });
        }
        let sc = self.sine_coefficients(coeffs)?;
        let (_, d1, d2) = sine_series(&sc, self.p, rho);
        Ok((d1, d2))
    }

    /// φ at every grid node.
    pub fn values_at_nodes(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(coeffs)?;
        Ok(self.apply_table(&self.tables.psi, coeffs))
    }

    pub(crate) fn apply_table(&self, table: &[f64], coeffs: &[f64]) -> Vec<f64> {
        table.chunks_exact(self.m).map(|row| row.iter().zip(coeffs).map(|(p, a)| p * a).sum()).collect()
    }

    /// Coefficients (f, ψ_j) = 4π∫ρ f ψ_j dρ of an arbitrary function.
    pub fn project(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for (node, (&rho, &w)) in self.grid.nodes().iter().zip(self.grid.weights()).enumerate() {
            let fw = 4.0 * PI * w * rho * f(rho);
            let row = &self.tables.psi[node * self.m..(node + 1) * self.m];
            for (o, p) in out.iter_mut().zip(row) {
                *o += fw * p;
            }
        }
        out
    }

    /// Serializable snapshot of (G, K, C) keyed by radius, size and grid.
    pub fn to_cache(&self) -> BasisCache {
        BasisCache {
            version: BasisCache::VERSION,
            p: self.p,
            m: self.m,
            grid_signature: self.grid.signature(),
            panels: self.grid.panels(),
            order_per_panel: self.grid.order_per_panel(),
            gs: row_major(&self.gs),
            k: row_major(&self.stiffness),
            c: row_major(&self.centrifugal),
        }
    }

    /// Rebuilds a basis from a cache entry, checking it against the expected
    /// key.
    pub fn from_cache(cache: &BasisCache, p: f64, m: usize, grid: &QuadratureGrid) -> Result<Self> {
        if cache.version != BasisCache::VERSION {
            return Err(Error::InvalidConfig(format!(
                "basis cache version {} unsupported (expected {})",
                cache.version,
                BasisCache::VERSION
            )));
        }
        if cache.m != m || cache.p != p || cache.grid_signature != grid.signature() {
            return Err(Error::InvalidConfig("basis cache key does not match request".into()));
        }
        let expect = m * m;
        for (name, v) in [("G", &cache.gs), ("K", &cache.k), ("C", &cache.c)] {
            if v.len() != expect {
                return Err(Error::InvalidConfig(format!(
                    "basis cache matrix {name} has {} entries, expected {expect}",
                    v.len()
                )));
            }
        }
        let gs = DMatrix::from_row_slice(m, m, &cache.gs);
        let mut basis = Self::from_gs(p, gs, grid.clone());
        basis.stiffness = DMatrix::from_row_slice(m, m, &cache.k);
        basis.centrifugal = DMatrix::from_row_slice(m, m, &cache.c);
        Ok(basis)
    }
}

/// On-disk cache of a built basis. Matrices are stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisCache {
    pub version: u32,
    pub p: f64,
    pub m: usize,
    pub grid_signature: String,
    pub panels: usize,
    pub order_per_panel: usize,
    pub gs: Vec<f64>,
    pub k: Vec<f64>,
    pub c: Vec<f64>,
}

impl BasisCache {
    pub const VERSION: u32 = 1;
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// (f, f', f'') of Σ c_k sin(kπρ/P).
pub(crate) fn sine_series(sc: &[f64], p: f64, rho: f64) -> (f64, f64, f64) {
    let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
    for (k, &c) in sc.iter().enumerate() {
        let kw = wavenumber(k, p);
        let (s, co) = (kw * rho).sin_cos();
        f += c * s;
        d1 += c * kw * co;
        d2 -= c * kw * kw * s;
    }
    (f, d1, d2)
}

fn nodal_tables(gs: &DMatrix<f64>, p: f64, grid: &QuadratureGrid) -> NodalTables {
    let m = gs.nrows();
    let n = grid.len();
    let mut psi = vec![0.0; n * m];
    let mut dpsi = vec![0.0; n * m];
    let mut d2psi = vec![0.0; n * m];
    let mut s = vec![0.0; m];
    let mut c = vec![0.0; m];
    for (node, &rho) in grid.nodes().iter().enumerate() {
        for k in 0..m {
            let (sk, ck) = (wavenumber(k, p) * rho).sin_cos();
            s[k] = sk;
            c[k] = ck;
        }
        for j in 0..m {
            let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
            for k in 0..=j {
                let g = gs[(j, k)];
                let kw = wavenumber(k, p);
                v += g * s[k];
                d1 += g * kw * c[k];
                d2 -= g * kw * kw * s[k];
            }
            psi[node * m + j] = v;
            dpsi[node * m + j] = d1;
            d2psi[node * m + j] = d2;
        }
    }
    NodalTables { psi, dpsi, d2psi }
}

fn gram_residual(grid: &QuadratureGrid, cols: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..cols.len() {
        for j in 0..=i {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((weighted_dot(grid, &cols[i], &cols[j]) - target).abs());
        }
    }
    worst
}

fn reorthogonalize(grid: &QuadratureGrid, gs: &mut DMatrix<f64>, cols: &mut [Vec<f64>]) {
    let m = cols.len();
    for j in 0..m {
        for i in 0..j {
            let r = weighted_dot(grid, &cols[j], &cols[i]);
            let (head, tail) = cols.split_at_mut(j);
            for (v, q) in tail[0].iter_mut().zip(&head[i]) {
                *v -= r * q;
            }
            for k in 0..=i {
                let gik = gs[(i, k)];
                gs[(j, k)] -= r * gik;
            }
        }
        let norm = weighted_dot(grid, &cols[j], &cols[j]).sqrt();
        for v in cols[j].iter_mut() {
            *v /= norm;
        }
        for k in 0..=j {
            gs[(j, k)] /= norm;
        }
    }
}
