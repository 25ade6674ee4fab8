//! Command-line front end: configuration, solve and sweep commands, and the
//! CSV/JSON writers.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::basis::{SpectralBasis, DEFAULT_BASIS_SIZE};
use crate::error::{Error, Result};
use crate::model::{self, ModelParams, TheoryBounds};
use crate::oracle;
use crate::quadrature::{QuadratureGrid, DEFAULT_ORDER, DEFAULT_PANELS};
use crate::solver::{self, Optimizer, SolveConfig, TheoremChecks, PROFILE_POINTS};
use crate::sweep::{self, SweepRecord};

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub const TABLE1_Q0: [f64; 6] = [10.0, 50.0, 100.0, 200.0, 500.0, 1000.0];
pub const TABLE2_N: [i32; 5] = [1, 2, 3, 4, 5];
pub const TABLE1_HEADER: &str = "q0,omega_sq,phi_max,residual_error,iterations,converged";
pub const TABLE2_HEADER: &str = "n,omega_sq,phi_max,residual_error,iterations,converged";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Fully resolved run settings. Echoed into every output file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub lambda: f64,
    pub a_pot: f64,
    pub b: f64,
    pub n: i32,
    pub p: f64,
    pub q0: f64,
    pub basis_size: usize,
    pub quad_panels: usize,
    pub quad_order: usize,
    pub grad_tol: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub rng_seed: u64,
    pub optimizer: String,
    pub preconditioned: bool,
    /// Start of the decay check as a fraction of P.
    pub decay_p0_fraction: f64,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelParams::reference();
        Self {
            lambda: m.lambda(),
            a_pot: m.a_pot(),
            b: m.b(),
            n: m.n(),
            p: m.p(),
            q0: 100.0,
            basis_size: DEFAULT_BASIS_SIZE,
            quad_panels: DEFAULT_PANELS,
            quad_order: DEFAULT_ORDER,
            grad_tol: 1e-8,
            max_iter: 20000,
            restarts: 2,
            rng_seed: 0,
            optimizer: "cg".into(),
            preconditioned: true,
            decay_p0_fraction: 0.75,
            output_dir: PathBuf::from("qvortex-out"),
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::InvalidConfig(format!("cannot parse value '{value}' for key '{key}'")))
}

impl RunConfig {
    /// Sets one key. Unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.trim() {
            "lambda" => self.lambda = parse_value(key, value)?,
            "a_pot" | "a" => self.a_pot = parse_value(key, value)?,
            "b" => self.b = parse_value(key, value)?,
            "n" => self.n = parse_value(key, value)?,
            "p" => self.p = parse_value(key, value)?,
            "q0" => self.q0 = parse_value(key, value)?,
            "basis_size" | "m" => self.basis_size = parse_value(key, value)?,
            "quad_panels" | "panels" => self.quad_panels = parse_value(key, value)?,
            "quad_order" | "order" => self.quad_order = parse_value(key, value)?,
            "grad_tol" => self.grad_tol = parse_value(key, value)?,
            "max_iter" => self.max_iter = parse_value(key, value)?,
            "restarts" => self.restarts = parse_value(key, value)?,
            "rng_seed" | "seed" => self.rng_seed = parse_value(key, value)?,
            "optimizer" => self.optimizer = value.trim().to_string(),
            "preconditioned" => self.preconditioned = parse_value(key, value)?,
            "decay_p0_fraction" => self.decay_p0_fraction = parse_value(key, value)?,
            "output_dir" | "out" => self.output_dir = PathBuf::from(value.trim()),
            other => return Err(Error::InvalidConfig(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a `key=value` assignment.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("expected key=value, got '{assignment}'")))?;
        self.set(k, v)
    }

    /// Applies a flat key=value file. Blank lines and lines starting with
    /// '#' are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            self.set_assignment(line).map_err(|e| Error::InvalidConfig(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ModelParams> {
        ModelParams::new(self.lambda, self.a_pot, self.b, self.n, self.p)
    }

    pub fn optimizer(&self) -> Result<Optimizer> {
        match self.optimizer.as_str() {
            "cg" => Ok(Optimizer::ConjugateGradient),
            "pg" => Ok(Optimizer::ProjectedGradient),
            other => Err(Error::InvalidConfig(format!("optimizer must be 'cg' or 'pg', got '{other}'"))),
        }
    }

    pub fn solve_config(&self, q0: f64) -> Result<SolveConfig> {
        let mut c = SolveConfig::new(q0);
        c.grad_tol = self.grad_tol;
        c.max_iter = self.max_iter;
        c.restarts = self.restarts;
        c.seed = self.rng_seed;
        c.optimizer = self.optimizer()?;
        c.preconditioned = self.preconditioned;
        c.validate()?;
        Ok(c)
    }

    /// Checks everything that does not need the basis.
    pub fn validate(&self) -> Result<()> {
        self.model()?;
        self.solve_config(self.q0)?;
        if self.basis_size < 1 {
            return Err(Error::InvalidConfig("basis_size must be >= 1".into()));
        }
        if !(self.decay_p0_fraction >= 0.0 && self.decay_p0_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "decay_p0_fraction must lie in [0, 1), got {}",
                self.decay_p0_fraction
            )));
        }
        QuadratureGrid::new(self.p, self.quad_panels, self.quad_order)?;
        Ok(())
    }

    pub fn grid(&self) -> Result<QuadratureGrid> {
        QuadratureGrid::new(self.p, self.quad_panels, self.quad_order)
    }

    pub fn basis(&self) -> Result<SpectralBasis> {
        SpectralBasis::build(self.p, self.basis_size, &self.grid()?)
    }

    /// `# key=value` header lines in a fixed order, preceded by the version.
    pub fn echo(&self) -> String {
        let mut s = format!("# {VERSION}\n");
        let value = serde_json::to_value(self).expect("config serializes");
        for key in [
            "lambda",
            "a_pot",
            "b",
            "n",
            "p",
            "q0",
            "basis_size",
            "quad_panels",
            "quad_order",
            "grad_tol",
            "max_iter",
            "restarts",
            "rng_seed",
            "optimizer",
            "preconditioned",
            "decay_p0_fraction",
        ] {
            let v = &value[key];
            let text = v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string());
            let _ = writeln!(s, "# {key}={text}");
        }
        s
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Parser, Debug)]
#[command(name = "qvortex", version, about = "Ground-state Q-vortex profiles of a sextic scalar field on a disk")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// Flat key=value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Prescribed reduced norm.
    #[arg(long, global = true)]
    pub q0: Option<f64>,
    /// Winding number.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub n: Option<i32>,
    /// Basis size.
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Override any config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Print the first-panel share of the residual and per-row progress.
    #[arg(short, long, global = true)]
    pub verbose: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one (Q0, N) and write profile.csv, solution.json, bounds.json.
    Solve,
    /// N = 1 sweep over Q0 in {10, 50, 100, 200, 500, 1000}.
    Table1,
    /// Fixed Q0 sweep over the winding number.
    Table2 {
        /// Winding numbers, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, default_values_t = TABLE2_N)]
        ns: Vec<i32>,
    },
    /// ω² against log-spaced Q0.
    Dispersion {
        #[arg(long, default_value_t = 10.0)]
        q0_min: f64,
        #[arg(long, default_value_t = 1000.0)]
        q0_max: f64,
        #[arg(long, default_value_t = 25)]
        points: usize,
    },
    /// Run the invariant suite and print a pass/fail report.
    Verify,
    /// Spectral against finite-difference solutions.
    OracleCompare {
        /// Finite-difference intervals.
        #[arg(long, default_value_t = 2000)]
        n_fd: usize,
    },
}

/// Defaults, then the config file, then --set, then the dedicated flags.
pub fn resolve_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
    }
    for a in &common.set {
        cfg.set_assignment(a)?;
    }
    if let Some(q0) = common.q0 {
        cfg.q0 = q0;
    }
    if let Some(n) = common.n {
        cfg.n = n;
    }
    if let Some(m) = common.m {
        cfg.basis_size = m;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.rng_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Failure of a named stage, mapped to an exit status.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl StageError {
    fn exit_code(&self) -> i32 {
        match self.error {
            Error::InvalidParams(_) | Error::InvalidConfig(_) => EXIT_INVALID_CONFIG,
            Error::NotConverged(_) => EXIT_NOT_CONVERGED,
            Error::Io(_) => EXIT_IO,
            _ => EXIT_CHECK_FAILED,
        }
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError>;
}

impl<T> Stage<T> for Result<T> {
    fn stage(self, stage: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

type CmdResult = std::result::Result<i32, StageError>;

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error [{}]: {}", e.stage, e.error);
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> CmdResult {
    let cfg = resolve_config(&cli.common).stage("config")?;
    let verbose = cli.common.verbose;
    match &cli.command {
        Command::Solve => cmd_solve(&cfg, verbose),
        Command::Table1 => cmd_table1(&cfg, verbose),
        Command::Table2 { ns } => cmd_table2(&cfg, ns, verbose),
        Command::Dispersion { q0_min, q0_max, points } => cmd_dispersion(&cfg, *q0_min, *q0_max, *points, verbose),
        Command::Verify => cmd_verify(&cfg),
        Command::OracleCompare { n_fd } => cmd_oracle_compare(&cfg, &cli.common, *n_fd),
    }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn not_converged(what: &str) -> StageError {
    StageError { stage: "solve", error: Error::NotConverged(what.to_string()) }
}

#[derive(Serialize)]
struct SolutionFile<'a> {
    version: &'static str,
    config: &'a RunConfig,
    q0: f64,
    n: i32,
    omega_sq: f64,
    phi_max: f64,
    peak_radius: f64,
    residual_error: f64,
    residual_first_panel: f64,
    iterations: usize,
    converged: bool,
    grad_norm: f64,
    f_value: f64,
    coeffs: &'a [f64],
}

#[derive(Serialize)]
struct BoundsFile<'a> {
    version: &'static str,
    config: &'a RunConfig,
    omega_sq: f64,
    bounds: TheoryBounds,
    /// P* evaluated at the computed ω² instead of the window midpoint.
    p_star_at_solution: Option<f64>,
    checks: TheoremChecks,
    all_pass: bool,
}

/// Profile CSV: 2001 uniform radii with φ and its first two derivatives.
pub fn profile_csv(cfg: &RunConfig, basis: &SpectralBasis, coeffs: &[f64]) -> Result<String> {
    let mut s = cfg.echo();
    s.push_str("rho,phi,phi_rho,phi_rhorho\n");
    for pt in solver::sample_profile(basis, coeffs, PROFILE_POINTS)? {
        let _ =
            writeln!(s, "{},{},{},{}", fmt_f64(pt.rho), fmt_f64(pt.phi), fmt_f64(pt.phi_rho), fmt_f64(pt.phi_rhorho));
    }
    Ok(s)
}

fn pretty_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| Error::Io(e.to_string()))
}

pub fn cmd_solve(cfg: &RunConfig, verbose: bool) -> CmdResult {
    let params = cfg.model().stage("config")?;
    let sc = cfg.solve_config(cfg.q0).stage("config")?;
    let basis = cfg.basis().stage("basis")?;
    let sol = solver::minimize_on_sphere(&basis, &params, &sc).stage("solve")?;
    let p0 = cfg.decay_p0_fraction * cfg.p;
    let checks = solver::check_theorems(&sol, &basis, &params, p0).stage("bounds")?;
    let bounds = model::theory_bounds(&params);
    let dir = &cfg.output_dir;

    write_file(dir, "profile.csv", &profile_csv(cfg, &basis, &sol.coeffs).stage("output")?).stage("output")?;
    let solution = SolutionFile {
        version: VERSION,
        config: cfg,
        q0: sol.q0,
        n: sol.n,
        omega_sq: sol.omega_sq,
        phi_max: sol.phi_max,
        peak_radius: sol.peak_radius,
        residual_error: sol.residual_error,
        residual_first_panel: sol.residual_first_panel,
        iterations: sol.iterations,
        converged: sol.converged,
        grad_norm: sol.grad_norm,
        f_value: sol.f_value,
        coeffs: &sol.coeffs,
    };
    write_file(dir, "solution.json", &pretty_json(&solution).stage("output")?).stage("output")?;
    let bf = BoundsFile {
        version: VERSION,
        config: cfg,
        omega_sq: sol.omega_sq,
        bounds,
        p_star_at_solution: model::p_star(&params, sol.omega_sq).ok(),
        all_pass: checks.all_pass(),
        checks,
    };
    write_file(dir, "bounds.json", &pretty_json(&bf).stage("output")?).stage("output")?;

    println!(
        "q0={} n={} omega_sq={:.8} phi_max={:.6} residual_error={:.3e} iterations={} converged={}",
        sol.q0, sol.n, sol.omega_sq, sol.phi_max, sol.residual_error, sol.iterations, sol.converged
    );
    if verbose {
        println!(
            "residual first panel={:.3e} peak_radius={:.4} grad_norm={:.3e}",
            sol.residual_first_panel, sol.peak_radius, sol.grad_norm
        );
    }
    if !sol.converged {
        return Err(not_converged(&format!("final Riemannian gradient norm {:e}", sol.grad_norm)));
    }
    Ok(EXIT_OK)
}

fn record_line(first: String, r: &SweepRecord) -> String {
    format!(
        "{first},{},{},{},{},{}\n",
        fmt_f64(r.omega_sq),
        fmt_f64(r.phi_max),
        fmt_f64(r.residual_error),
        r.iterations,
        r.converged
    )
}

fn report_rows(records: &[SweepRecord], verbose: bool) -> CmdResult {
    if verbose {
        for r in records {
            println!(
                "q0={} n={} omega_sq={:.6} phi_max={:.6} residual_error={:.3e} converged={}",
                r.q0, r.n, r.omega_sq, r.phi_max, r.residual_error, r.converged
            );
        }
    }
    let failed: Vec<String> =
        records.iter().filter(|r| !r.converged).map(|r| format!("(q0={}, n={})", r.q0, r.n)).collect();
    if !failed.is_empty() {
        return Err(not_converged(&format!("rows {}", failed.join(" "))));
    }
    Ok(EXIT_OK)
}

/// Table-1 CSV text for the given records.
pub fn table1_csv(cfg: &RunConfig, records: &[SweepRecord]) -> String {
    let mut s = cfg.echo();
    s.push_str(TABLE1_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&record_line(fmt_f64(r.q0), r));
    }
    s
}

pub fn table2_csv(cfg: &RunConfig, records: &[SweepRecord]) -> String {
    let mut s = cfg.echo();
    s.push_str(TABLE2_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&record_line(r.n.to_string(), r));
    }
    s
}

pub fn cmd_table1(cfg: &RunConfig, verbose: bool) -> CmdResult {
    let params = cfg.model().stage("config")?;
    let sc = cfg.solve_config(TABLE1_Q0[0]).stage("config")?;
    let basis = cfg.basis().stage("basis")?;
    let records = sweep::sweep_q0(&params, &basis, &TABLE1_Q0, &sc).stage("solve")?;
    let path = write_file(&cfg.output_dir, "table1.csv", &table1_csv(cfg, &records)).stage("output")?;
    println!("wrote {}", path.display());
    report_rows(&records, verbose)
}

pub fn cmd_table2(cfg: &RunConfig, ns: &[i32], verbose: bool) -> CmdResult {
    if let Some(&bad) = ns.iter().find(|&&n| n == 0) {
        return Err(StageError {
            stage: "config",
            error: Error::InvalidParams(format!("winding number must satisfy |N| >= 1, got {bad}")),
        });
    }
    let params = cfg.model().stage("config")?;
    let sc = cfg.solve_config(cfg.q0).stage("config")?;
    let basis = cfg.basis().stage("basis")?;
    let records = sweep::sweep_n(&params, &basis, ns, &sc).stage("solve")?;
    let path = write_file(&cfg.output_dir, "table2.csv", &table2_csv(cfg, &records)).stage("output")?;
    println!("wrote {}", path.display());
    report_rows(&records, verbose)
}

/// `points` values from q0_min to q0_max, evenly spaced in log Q0, with
/// both endpoints exact.
pub fn log_spaced(q0_min: f64, q0_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(q0_min > 0.0 && q0_min < q0_max && q0_max.is_finite()) {
        return Err(Error::InvalidConfig(format!("need 0 < q0_min < q0_max, got {q0_min}, {q0_max}")));
    }
    if points < 2 {
        return Err(Error::InvalidConfig(format!("dispersion needs at least 2 points, got {points}")));
    }
    let (l0, l1) = (q0_min.ln(), q0_max.ln());
    let mut v: Vec<f64> = (0..points).map(|i| (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp()).collect();
    v[0] = q0_min;
    v[points - 1] = q0_max;
    Ok(v)
}

pub fn cmd_dispersion(cfg: &RunConfig, q0_min: f64, q0_max: f64, points: usize, verbose: bool) -> CmdResult {
    let q0s = log_spaced(q0_min, q0_max, points).stage("config")?;
    let params = cfg.model().stage("config")?;
    let sc = cfg.solve_config(q0_min).stage("config")?;
    let basis = cfg.basis().stage("basis")?;
    // Independent solves, so each row matches `solve` at the same Q0.
    let sols = sweep::sweep_q0_cold(&params, &basis, &q0s, &sc).stage("solve")?;
    let records: Vec<SweepRecord> = sols.iter().map(SweepRecord::from).collect();
    let bounds = model::theory_bounds(&params);

    let mut s = cfg.echo();
    let _ = writeln!(s, "# q0_min={q0_min}\n# q0_max={q0_max}\n# points={points}");
    s.push_str("kind,q0,omega_sq,phi_max,residual_error,iterations,converged\n");
    for r in &records {
        s.push_str(&record_line(format!("solution,{}", fmt_f64(r.q0)), r));
    }
    for (kind, w) in [("omega_sq_min", bounds.omega_sq_min), ("omega_sq_max", bounds.omega_sq_max)] {
        for q in [q0_min, q0_max] {
            let _ = writeln!(s, "{kind},{},{},,,,", fmt_f64(q), fmt_f64(w));
        }
    }
    let path = write_file(&cfg.output_dir, "dispersion.csv", &s).stage("output")?;
    println!("wrote {}", path.display());
    report_rows(&records, verbose)
}

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, pass: bool, detail: String) -> Self {
        Self { name: name.into(), pass, detail }
    }
}

/// Runs the invariant suite for `cfg`. Stops early only when the basis
/// cannot be built.
pub fn verify_report(cfg: &RunConfig) -> Result<Vec<CheckOutcome>> {
    let params = cfg.model()?;
    let mut out = Vec::new();
    let basis = match cfg.basis() {
        Ok(b) => b,
        Err(e @ Error::GramSchmidtBreakdown { .. }) => {
            out.push(CheckOutcome::new("orthonormality", false, e.to_string()));
            return Ok(out);
        }
        Err(e) => return Err(e),
    };
    let orth = basis.orthonormality_residual();
    out.push(CheckOutcome::new("orthonormality", orth < 1e-8, format!("max |(ψi,ψj) − δij| = {orth:.3e}")));

    let k = basis.k_matrix();
    let c = basis.c_matrix();
    let asym = (k - k.transpose()).amax().max((c - c.transpose()).amax());
    let pd = k.clone().cholesky().is_some() && c.clone().cholesky().is_some();
    out.push(CheckOutcome::new(
        "operator_symmetry",
        asym < 1e-12 && pd,
        format!("asymmetry {asym:.3e}, positive definite {pd}"),
    ));

    let grad_err = solver::gradient_check(&basis, &params, cfg.q0, 10, cfg.rng_seed)?;
    out.push(CheckOutcome::new("gradient_fd", grad_err < 1e-4, format!("worst relative error {grad_err:.3e}")));

    let sc = cfg.solve_config(cfg.q0)?;
    let sol = solver::minimize_on_sphere(&basis, &params, &sc)?;
    out.push(CheckOutcome::new(
        "convergence",
        sol.converged,
        format!("q0={} n={} iterations={} gradient {:.3e}", cfg.q0, cfg.n, sol.iterations, sol.grad_norm),
    ));
    let via_grad = solver::omega_sq_from_gradient(&sol.coeffs, &basis, &params, cfg.q0)?;
    out.push(CheckOutcome::new(
        "omega_identity",
        (via_grad - sol.omega_sq).abs() < 1e-6,
        format!("quadrature {:.10} vs gradient {:.10}", sol.omega_sq, via_grad),
    ));

    let bounds = model::theory_bounds(&params);
    let checks = solver::check_theorems(&sol, &basis, &params, cfg.decay_p0_fraction * cfg.p)?;
    out.push(CheckOutcome::new(
        "necessary_frequency",
        checks.necessary_frequency,
        format!("omega_sq {:.6} > {:.6}", sol.omega_sq, bounds.omega_sq_necessary),
    ));
    out.push(CheckOutcome::new(
        "amplitude_bound",
        checks.amplitude_bound,
        format!("phi_max {:.6} < {:.6}", sol.phi_max, bounds.phi_max_ceiling),
    ));
    out.push(CheckOutcome::new(
        "decay_bound",
        checks.decay_bound,
        format!(
            "P0={} sigma={} worst ratio {}",
            checks.decay_p0,
            checks.decay_rate.map_or("n/a".into(), |s| format!("{s:.6}")),
            checks.decay_worst_ratio.map_or("n/a".into(), |r| format!("{r:.3e}"))
        ),
    ));
    out.push(CheckOutcome::new(
        "norm_threshold",
        checks.norm_threshold,
        format!("q0 {} vs pi|N|/(a lambda) = {:.6}", cfg.q0, bounds.q0_threshold),
    ));
    let window_required = cfg.q0 > 10.0 * bounds.q0_threshold;
    out.push(CheckOutcome::new(
        "existence_window",
        checks.in_existence_window || !window_required,
        format!("{:.6} < {:.6} < {:.6}", bounds.omega_sq_min, sol.omega_sq, bounds.omega_sq_max),
    ));

    let ref_params = params.with_n(1)?;
    let ref_sol = if cfg.n == 1 && cfg.q0 == 100.0 {
        sol.clone()
    } else {
        solver::minimize_on_sphere(&basis, &ref_params, &cfg.solve_config(100.0)?)?
    };
    let fd = oracle::fd_minimize(&ref_params, 100.0, 2000)?;
    let dw = (fd.omega_sq - ref_sol.omega_sq).abs();
    let dphi = oracle::profile_max_difference(&fd, &basis, &ref_sol.coeffs)? / ref_sol.phi_max;
    out.push(CheckOutcome::new(
        "oracle_cross_check",
        fd.converged && dw < 0.01 && dphi < 0.02,
        format!("N=1 q0=100: |dω²| = {dw:.3e}, profile difference {dphi:.3e} of phi_max"),
    ));

    let lin = solver::minimize_on_sphere(&basis, &params, &cfg.solve_config(0.01)?)?;
    let expected = oracle::linear_limit_omega_sq(&params)?;
    out.push(CheckOutcome::new(
        "linear_limit",
        lin.converged && (lin.omega_sq - expected).abs() < 1e-3,
        format!("q0=0.01: {:.6} vs 2λb + (j/P)² = {:.6}", lin.omega_sq, expected),
    ));
    Ok(out)
}

pub fn cmd_verify(cfg: &RunConfig) -> CmdResult {
    let report = verify_report(cfg).stage("verify")?;
    for c in &report {
        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let failed: Vec<&str> = report.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        println!("all {} checks passed", report.len());
        Ok(EXIT_OK)
    } else {
        println!("failed: {}", failed.join(", "));
        Ok(EXIT_CHECK_FAILED)
    }
}

pub const ORACLE_HEADER: &str =
    "n,q0,omega_sq_spectral,omega_sq_fd,delta_omega_sq,profile_diff_rel,peak_rho_spectral,peak_rho_fd,fd_converged";

pub fn cmd_oracle_compare(cfg: &RunConfig, common: &CommonArgs, n_fd: usize) -> CmdResult {
    let ns: Vec<i32> = if common.n.is_some() { vec![cfg.n] } else { vec![1, 2] };
    let q0s: Vec<f64> = if common.q0.is_some() { vec![cfg.q0] } else { vec![50.0, 100.0] };
    let base = cfg.model().stage("config")?;
    let basis = cfg.basis().stage("basis")?;
    let mut s = cfg.echo();
    let _ = writeln!(s, "# n_fd={n_fd}");
    s.push_str(ORACLE_HEADER);
    s.push('\n');
    let mut all_ok = true;
    for &n in &ns {
        let params = base.with_n(n).stage("config")?;
        for &q0 in &q0s {
            let sol =
                solver::minimize_on_sphere(&basis, &params, &cfg.solve_config(q0).stage("config")?).stage("solve")?;
            let fd = oracle::fd_minimize(&params, q0, n_fd).stage("oracle")?;
            let dw = (sol.omega_sq - fd.omega_sq).abs();
            let dphi = oracle::profile_max_difference(&fd, &basis, &sol.coeffs).stage("oracle")? / sol.phi_max;
            let ok = sol.converged && fd.converged && dw < 0.01 && dphi < 0.02;
            all_ok &= ok;
            let _ = writeln!(
                s,
                "{n},{},{},{},{},{},{},{},{}",
                fmt_f64(q0),
                fmt_f64(sol.omega_sq),
                fmt_f64(fd.omega_sq),
                fmt_f64(dw),
                fmt_f64(dphi),
                fmt_f64(sol.peak_radius),
                fmt_f64(fd.peak().0),
                fd.converged
            );
            println!(
                "{} N={n} q0={q0}: spectral {:.6} fd {:.6} |dω²| {dw:.2e} profile {dphi:.2e}",
                if ok { "PASS" } else { "FAIL" },
                sol.omega_sq,
                fd.omega_sq
            );
        }
    }
    let path = write_file(&cfg.output_dir, "oracle_compare.csv", &s).stage("output")?;
    println!("wrote {}", path.display());
    Ok(if all_ok { EXIT_OK } else { EXIT_CHECK_FAILED })
}
