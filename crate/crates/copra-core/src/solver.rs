//! Locating the operative positive root of the COPRA characteristic function:
//! spurious-small-root estimation, grid scanning, and a safeguarded Newton
//! iteration.

use serde::Serialize;

use crate::error::{CopraError, Result};
use crate::spectral::{component_eval, copra_derivative, copra_eval, SpectralData};

/// The spurious small root near the origin, from the closed form and from a
/// brute-force cubic solve. The numeric value is the trusted one; the closed
/// form is reported for comparison.
#[derive(Debug, Clone, Serialize)]
pub struct EpsilonEstimate {
    pub c1: f64,
    pub c2: f64,
    pub q: f64,
    pub z: f64,
    pub epsilon_closed: f64,
    pub epsilon_numeric: f64,
    pub discrepancy: f64,
}

/// Tunables for the scan and the Newton iteration.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolverConfig {
    /// Stopping threshold as a fraction of |S| at the Newton start.
    pub rho_rel: f64,
    pub step_tol: f64,
    pub max_iter: usize,
    /// Lower scan bound. Kept well below any operative root; the spurious
    /// small root inside the window is skipped by the bracket rule, not by
    /// the window, because the closed-form epsilon badly overestimates it
    /// for spectra with small singular values.
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points_per_decade: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rho_rel: 1e-9,
            step_tol: 1e-12,
            max_iter: 100,
            grid_lo: 1e-8,
            grid_hi: 1e6,
            grid_points_per_decade: 20,
        }
    }
}

/// Log-grid scan of the characteristic function.
#[derive(Debug, Clone)]
pub struct RootScan {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Bracketing intervals (lo, hi) with a strict sign change across them.
    pub sign_changes: Vec<(f64, f64)>,
    pub argmax_gamma: f64,
    pub argmax_index: usize,
    pub root_count_estimate: usize,
}

/// Outcome of a regularizer selection.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionResult {
    pub gamma_tilde: f64,
    /// The applied regularizer, gamma = N * gamma_tilde.
    pub gamma: f64,
    pub iterations: usize,
    pub converged: bool,
    pub fallback_used: bool,
    pub residual: f64,
    pub bracket: Option<(f64, f64)>,
}

/// Estimate the spurious small root.
///
/// The numeric value is t*^2 where t* is the unique real root of the cubic
/// 2 N C2 t^3 - 4 N C2 t^2 + 4 N C2 t - 4 C1 = 0, found by bisection on
/// (0, 1 + 2 C1 / (N C2)). The closed form is evaluated as published; the two
/// disagree for some (N, C1, C2) and the discrepancy is recorded.
pub fn estimate_epsilon(data: &SpectralData) -> Result<EpsilonEstimate> {
    if data.b_sq.iter().all(|&b| b == 0.0) {
        // The approximant needs energy on positive-sigma modes.
        return Err(CopraError::DegenerateObservation);
    }
    let n = data.cols as f64;
    let mut c1 = 0.0;
    let mut c2 = 0.0;
    for (&s2, &b2) in data.sigma_sq.iter().zip(&data.b_sq) {
        c1 += b2 / s2;
        c2 += b2 / (s2 * s2);
    }
    let q = 108.0 * n * c1 * c2;
    let z = 19.05 * n.powi(3) * c2.powi(3) * (-2.0 * c1 + n * c2);

    let epsilon_closed = closed_form_epsilon(n, c1, c2, q, z);
    let epsilon_numeric = cubic_epsilon(n, c1, c2);
    let discrepancy = (epsilon_closed - epsilon_numeric).abs() / epsilon_numeric;

    Ok(EpsilonEstimate {
        c1,
        c2,
        q,
        z,
        epsilon_closed,
        epsilon_numeric,
        discrepancy,
    })
}

fn closed_form_epsilon(n: f64, c1: f64, c2: f64, q: f64, z: f64) -> f64 {
    let disc = q * q + z * z * z;
    if disc < 0.0 {
        // The published real-arithmetic formula leaves the real axis here.
        return f64::NAN;
    }
    let w = (q + disc.sqrt()).cbrt();
    let cbrt2 = 2f64.cbrt();
    w / (3.0 * cbrt2 * n * n * c2 * c2) - 4.0 * cbrt2 * n * c2 * (-2.0 * c1 + n * c2) / w
}

/// Bisection for the unique positive root of t^3 - 2t^2 + 2t - c = 0 with
/// c = 2 C1 / (N C2); returns epsilon = t^2.
fn cubic_epsilon(n: f64, c1: f64, c2: f64) -> f64 {
    let c = 2.0 * c1 / (n * c2);
    let f = |t: f64| t * t * t - 2.0 * t * t + 2.0 * t - c;
    let mut lo = 0.0;
    let mut hi = 1.0 + c; // f(1 + c) = 1 + c^2 + c^3 > 0
    debug_assert!(f(lo) < 0.0 && f(hi) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    t * t
}

fn log_grid(lo: f64, hi: f64, points_per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let count = ((decades * points_per_decade as f64).ceil() as usize).max(1) + 1;
    let step = decades / (count - 1) as f64;
    (0..count).map(|i| lo * 10f64.powf(step * i as f64)).collect()
}

/// Scan S on a log grid over (grid_lo, grid_hi).
pub fn scan_roots(data: &SpectralData, cfg: &SolverConfig) -> Result<RootScan> {
    let lo = cfg.grid_lo;
    let hi = cfg.grid_hi;
    if hi <= lo {
        return Err(CopraError::InvalidInput(format!(
            "scan window is empty: lo = {lo}, hi = {hi}"
        )));
    }
    let grid = log_grid(lo, hi, cfg.grid_points_per_decade);
    let values: Vec<f64> = grid
        .iter()
        .map(|&g| copra_eval(g, data))
        .collect::<Result<_>>()?;

    let mut sign_changes = Vec::new();
    for i in 0..values.len() - 1 {
        if values[i] * values[i + 1] < 0.0 {
            sign_changes.push((grid[i], grid[i + 1]));
        }
    }
    let argmax_index = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();

    Ok(RootScan {
        argmax_gamma: grid[argmax_index],
        argmax_index,
        root_count_estimate: sign_changes.len(),
        grid,
        values,
        sign_changes,
    })
}

/// Solve for the operative root with a bisection-safeguarded Newton iteration.
///
/// The bracket is the first downward crossing (S > 0 on the left, S < 0 on
/// the right) at or past the scan argmax, which skips the spurious epsilon
/// root. Without such a bracket the scan argmax is returned with
/// `fallback_used = true`.
pub fn newton_solve(data: &SpectralData, cfg: &SolverConfig) -> Result<SelectionResult> {
    if data.is_degenerate_observation() {
        return Err(CopraError::DegenerateObservation);
    }
    let scan = scan_roots(data, cfg)?;
    let n = data.cols as f64;

    let bracket = (scan.argmax_index..scan.values.len() - 1).find(|&i| {
        scan.values[i] > 0.0 && scan.values[i + 1] < 0.0
    });
    let Some(i) = bracket else {
        let residual = scan.values[scan.argmax_index].abs();
        return Ok(SelectionResult {
            gamma_tilde: scan.argmax_gamma,
            gamma: n * scan.argmax_gamma,
            iterations: 0,
            converged: false,
            fallback_used: true,
            residual,
            bracket: None,
        });
    };

    let mut lo = scan.grid[i];
    let mut hi = scan.grid[i + 1];
    let bracket_out = (lo, hi);
    let mut x = lo;
    let rho = cfg.rho_rel * scan.values[i].abs();

    for iter in 1..=cfg.max_iter {
        let f = copra_eval(x, data)?;
        if f.abs() <= rho {
            return Ok(finish(x, n, iter - 1, rho, f.abs(), bracket_out));
        }
        if f > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let fp = copra_derivative(x, data)?;
        let mut next = x - f / fp;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= cfg.step_tol * (1.0 + x) {
            let resid = copra_eval(next, data)?.abs();
            return Ok(finish(next, n, iter, rho, resid, bracket_out));
        }
        x = next;
    }
    Err(CopraError::NonConvergence {
        iterations: cfg.max_iter,
        last_gamma_tilde: x,
        residual: copra_eval(x, data)?.abs(),
    })
}

fn finish(
    gamma_tilde: f64,
    n: f64,
    iterations: usize,
    rho: f64,
    residual: f64,
    bracket: (f64, f64),
) -> SelectionResult {
    SelectionResult {
        gamma_tilde,
        gamma: n * gamma_tilde,
        iterations,
        converged: residual <= rho,
        fallback_used: false,
        residual,
        bracket: Some(bracket),
    }
}

/// Which curve a diagnostic row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticCurve {
    S1,
    NegS1,
    S2,
    NegS2,
}

/// Empirical signs of finite-difference derivatives of orders 0..2, one row
/// per curve. Purely observational; nothing here is asserted.
#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub grid: Vec<f64>,
    pub rows: Vec<(DiagnosticCurve, Vec<[i8; 3]>)>,
}

fn sign_of(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Probe the complete-monotonicity pattern of the two components on a grid.
pub fn monotonicity_diagnostic(data: &SpectralData, grid: &[f64]) -> Result<MonotonicityReport> {
    let curves = [
        DiagnosticCurve::S1,
        DiagnosticCurve::NegS1,
        DiagnosticCurve::S2,
        DiagnosticCurve::NegS2,
    ];
    let eval = |curve: DiagnosticCurve, g: f64| -> Result<f64> {
        let (s1, s2) = component_eval(g, data)?;
        Ok(match curve {
            DiagnosticCurve::S1 => s1,
            DiagnosticCurve::NegS1 => -s1,
            DiagnosticCurve::S2 => s2,
            DiagnosticCurve::NegS2 => -s2,
        })
    };

    let mut rows = Vec::with_capacity(curves.len());
    for curve in curves {
        let mut signs = Vec::with_capacity(grid.len());
        for &g in grid {
            let h = 1e-4 * g;
            let f0 = eval(curve, g)?;
            let fp = eval(curve, g + h)?;
            let fm = eval(curve, g - h)?;
            let d1 = (fp - fm) / (2.0 * h);
            let d2 = (fp - 2.0 * f0 + fm) / (h * h);
            signs.push([sign_of(f0), sign_of(d1), sign_of(d2)]);
        }
        rows.push((curve, signs));
    }
    Ok(MonotonicityReport {
        grid: grid.to_vec(),
        rows,
    })
}
