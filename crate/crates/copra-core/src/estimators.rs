//! Regularized least-squares estimation and the baseline selectors used in
//! the benchmarks. Every estimator goes through the same spectral
//! decomposition so that method comparisons differ only in the regularizer.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{CopraError, Result};
use crate::solver::{newton_solve, SelectionResult, SolverConfig};
use crate::spectral::{decompose, Decomposition};

/// Estimation method tag, carried through trial records and CSV rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    Copra,
    Ls,
    Lmmse,
    Gcv,
    QuasiOpt,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Copra => "copra",
            Method::Ls => "ls",
            Method::Lmmse => "lmmse",
            Method::Gcv => "gcv",
            Method::QuasiOpt => "quasiopt",
        }
    }

    pub fn parse(s: &str) -> Result<Method> {
        match s.trim().to_ascii_lowercase().as_str() {
            "copra" => Ok(Method::Copra),
            "ls" => Ok(Method::Ls),
            "lmmse" => Ok(Method::Lmmse),
            "gcv" => Ok(Method::Gcv),
            "quasiopt" => Ok(Method::QuasiOpt),
            other => Err(CopraError::InvalidInput(format!("unknown method '{other}'"))),
        }
    }
}

/// A signal estimate with the regularizer that produced it.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub x_hat: DVector<Complex64>,
    pub gamma_used: f64,
    pub method_tag: Method,
}

fn project_observation(dec: &Decomposition, y: &DVector<Complex64>) -> Result<DVector<Complex64>> {
    if y.len() != dec.rows {
        return Err(CopraError::DimensionMismatch {
            rows: dec.rows,
            cols: dec.cols,
            obs_len: y.len(),
        });
    }
    Ok(dec.left_basis.adjoint() * y)
}

fn shrinkage_solve(
    dec: &Decomposition,
    y: &DVector<Complex64>,
    gamma: f64,
    tag: Method,
) -> Result<Estimate> {
    let b = project_observation(dec, y)?;
    let r = dec.singular_values.len();
    let mut coeffs = DVector::<Complex64>::zeros(r);
    for i in 0..r {
        let s = dec.singular_values[i];
        coeffs[i] = b[i] * Complex64::new(s / (s * s + gamma), 0.0);
    }
    Ok(Estimate {
        x_hat: &dec.right_basis * coeffs,
        gamma_used: gamma,
        method_tag: tag,
    })
}

/// Regularized least squares over the retained modes:
/// x_hat = V diag(sigma_i / (sigma_i^2 + gamma)) U^H y.
pub fn rls_solve(dec: &Decomposition, y: &DVector<Complex64>, gamma: f64) -> Result<Estimate> {
    if !(gamma >= 0.0) {
        return Err(CopraError::Domain(format!(
            "gamma must be nonnegative, got {gamma}"
        )));
    }
    if gamma == 0.0 && dec.singular_values.len() < dec.rows.min(dec.cols) {
        return Err(CopraError::Singular);
    }
    shrinkage_solve(dec, y, gamma, Method::Copra)
}

/// Minimum-norm least squares via the truncated spectral inverse.
pub fn ls_estimate(dec: &Decomposition, y: &DVector<Complex64>) -> Result<Estimate> {
    let mut est = shrinkage_solve(dec, y, 0.0, Method::Ls)?;
    est.method_tag = Method::Ls;
    Ok(est)
}

/// Oracle linear MMSE for unit-variance white signal: the RLS solution with
/// gamma equal to the true noise variance.
pub fn lmmse_estimate(
    dec: &Decomposition,
    y: &DVector<Complex64>,
    sigma_z_sq: f64,
) -> Result<Estimate> {
    if !(sigma_z_sq > 0.0) {
        return Err(CopraError::Domain(format!(
            "noise variance must be positive, got {sigma_z_sq}"
        )));
    }
    let mut est = shrinkage_solve(dec, y, sigma_z_sq, Method::Lmmse)?;
    est.method_tag = Method::Lmmse;
    Ok(est)
}

/// End-to-end selection: decompose, solve for gamma_tilde, rescale by N, and
/// return the regularized estimate with the solver diagnostics.
pub fn copra_estimate(
    h: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
    cfg: &SolverConfig,
) -> Result<(Estimate, SelectionResult)> {
    let (dec, data) = decompose(h, y, None)?;
    let sel = newton_solve(&data, cfg)?;
    let est = rls_solve(&dec, y, sel.gamma)?;
    Ok((est, sel))
}

/// Default selector grid: 200 log-spaced points on [1e-6, 1e2] * sigma_1^2.
pub fn default_selector_grid(dec: &Decomposition) -> Vec<f64> {
    let s1_sq = dec.singular_values[0] * dec.singular_values[0];
    let lo = 1e-6 * s1_sq;
    let hi = 1e2 * s1_sq;
    let count = 200;
    let step = (hi / lo).log10() / (count - 1) as f64;
    (0..count).map(|i| lo * 10f64.powf(step * i as f64)).collect()
}

fn grid_argmin(grid: &[f64], mut objective: impl FnMut(f64) -> f64) -> Result<f64> {
    if grid.is_empty() {
        return Err(CopraError::InvalidInput("empty selector grid".into()));
    }
    let mut best = grid[0];
    let mut best_val = objective(grid[0]);
    for &g in &grid[1..] {
        let v = objective(g);
        // strict comparison keeps the smallest gamma on ties
        if v < best_val {
            best_val = v;
            best = g;
        }
    }
    Ok(best)
}

/// Generalized cross-validation: grid argmin of
/// [sum gamma^2 b_i^2 / (sigma_i^2 + gamma)^2 + discarded] / [M - sum sigma_i^2 / (sigma_i^2 + gamma)]^2.
pub fn gcv_select(dec: &Decomposition, y: &DVector<Complex64>, grid: &[f64]) -> Result<f64> {
    let b = project_observation(dec, y)?;
    let b_sq: Vec<f64> = b.iter().map(|c| c.norm_sqr()).collect();
    let discarded = (y.norm_squared() - b_sq.iter().sum::<f64>()).max(0.0);
    let m = dec.rows as f64;
    grid_argmin(grid, |gamma| {
        let mut num = discarded;
        let mut trace = 0.0;
        for (i, &b2) in b_sq.iter().enumerate() {
            let s2 = dec.singular_values[i] * dec.singular_values[i];
            let den = s2 + gamma;
            num += gamma * gamma * b2 / (den * den);
            trace += s2 / den;
        }
        let dof = m - trace;
        num / (dof * dof)
    })
}

/// Quasi-optimality: grid argmin of || gamma d x_hat / d gamma ||^2 in
/// spectral form.
pub fn quasiopt_select(dec: &Decomposition, y: &DVector<Complex64>, grid: &[f64]) -> Result<f64> {
    let b = project_observation(dec, y)?;
    let b_sq: Vec<f64> = b.iter().map(|c| c.norm_sqr()).collect();
    grid_argmin(grid, |gamma| {
        let mut q = 0.0;
        for (i, &b2) in b_sq.iter().enumerate() {
            let s = dec.singular_values[i];
            let den = s * s + gamma;
            let term = gamma * s / (den * den);
            q += term * term * b2;
        }
        q
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{complex_from_real, complex_vec_from_real};
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn real_model(seed: u64, m: usize, n: usize) -> (DMatrix<Complex64>, DVector<Complex64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = DMatrix::<f64>::from_fn(m, n, |_, _| rng.sample(StandardNormal));
        let y = DVector::<f64>::from_fn(m, |_, _| rng.sample(StandardNormal));
        (complex_from_real(&h), complex_vec_from_real(&y))
    }

    fn identity_2() -> (Decomposition, DVector<Complex64>) {
        let h = complex_from_real(&DMatrix::identity(2, 2));
        let y = complex_vec_from_real(&DVector::from_vec(vec![3.0, 4.0]));
        let (dec, _) = decompose(&h, &y, None).unwrap();
        (dec, y)
    }

    fn re(v: &DVector<Complex64>) -> Vec<f64> {
        v.iter().map(|c| c.re).collect()
    }

    #[test]
    fn rls_identity_cases() {
        let (dec, y) = identity_2();
        let est = rls_solve(&dec, &y, 0.0).unwrap();
        let xh = re(&est.x_hat);
        assert_relative_eq!(xh[0], 3.0, max_relative = 1e-12);
        assert_relative_eq!(xh[1], 4.0, max_relative = 1e-12);

        let est = rls_solve(&dec, &y, 1.0).unwrap();
        let xh = re(&est.x_hat);
        assert_relative_eq!(xh[0], 1.5, max_relative = 1e-12);
        assert_relative_eq!(xh[1], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn rls_matches_dense_normal_equations() {
        let (h, y) = real_model(21, 10, 10);
        let (dec, _) = decompose(&h, &y, None).unwrap();
        let gamma = 0.7;
        let est = rls_solve(&dec, &y, gamma).unwrap();

        let normal = h.adjoint() * &h
            + DMatrix::<Complex64>::identity(10, 10) * Complex64::new(gamma, 0.0);
        let rhs = h.adjoint() * &y;
        let dense = normal.lu().solve(&rhs).unwrap();
        assert!((est.x_hat - &dense).norm() / dense.norm() < 1e-8);
    }

    #[test]
    fn rls_zero_gamma_rank_deficient_is_singular() {
        let mut hm = DMatrix::<f64>::zeros(3, 3);
        hm[(0, 0)] = 1.0;
        hm[(1, 1)] = 1.0;
        let h = complex_from_real(&hm);
        let y = complex_vec_from_real(&DVector::from_vec(vec![1.0, 1.0, 1.0]));
        let (dec, _) = decompose(&h, &y, None).unwrap();
        assert!(matches!(rls_solve(&dec, &y, 0.0), Err(CopraError::Singular)));
        // LS handles the same case through truncation.
        assert!(ls_estimate(&dec, &y).is_ok());
    }

    #[test]
    fn ls_diagonal_case() {
        let h = complex_from_real(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0])));
        let y = complex_vec_from_real(&DVector::from_vec(vec![2.0, 3.0]));
        let (dec, _) = decompose(&h, &y, None).unwrap();
        let est = ls_estimate(&dec, &y).unwrap();
        let xh = re(&est.x_hat);
        assert_relative_eq!(xh[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(xh[1], 3.0, max_relative = 1e-12);
    }

    #[test]
    fn ls_overdetermined_matches_normal_equations() {
        let (h, y) = real_model(33, 6, 4);
        let (dec, _) = decompose(&h, &y, None).unwrap();
        let est = ls_estimate(&dec, &y).unwrap();
        let normal = h.adjoint() * &h;
        let rhs = h.adjoint() * &y;
        let dense = normal.lu().solve(&rhs).unwrap();
        assert!((est.x_hat - &dense).norm() / dense.norm() < 1e-8);
    }

    #[test]
    fn lmmse_is_rls_at_noise_variance() {
        let (h, y) = real_model(55, 20, 20);
        let (dec, _) = decompose(&h, &y, None).unwrap();
        let est = lmmse_estimate(&dec, &y, 0.37).unwrap();
        let rls = rls_solve(&dec, &y, 0.37).unwrap();
        assert_eq!(est.x_hat, rls.x_hat);

        let (dec2, y2) = identity_2();
        let est = lmmse_estimate(&dec2, &y2, 1.0).unwrap();
        let xh = re(&est.x_hat);
        assert_relative_eq!(xh[0], 1.5, max_relative = 1e-12);

        // vanishing noise approaches LS
        let near_ls = lmmse_estimate(&dec, &y, 1e-12).unwrap();
        let ls = ls_estimate(&dec, &y).unwrap();
        assert!((near_ls.x_hat - &ls.x_hat).norm() / ls.x_hat.norm() < 1e-9);

        assert!(lmmse_estimate(&dec, &y, 0.0).is_err());
    }

    #[test]
    fn shrinkage_is_monotone_in_gamma() {
        let (h, y) = real_model(77, 15, 15);
        let (dec, _) = decompose(&h, &y, None).unwrap();
        let mut prev = f64::INFINITY;
        for gamma in [0.0, 0.1, 1.0, 10.0, 100.0] {
            let norm = rls_solve(&dec, &y, gamma).unwrap().x_hat.norm();
            assert!(norm <= prev + 1e-12);
            prev = norm;
        }
    }

    #[test]
    fn estimator_is_linear_in_y() {
        let (h, y) = real_model(88, 12, 12);
        let (dec, _) = decompose(&h, &y, None).unwrap();
        let base = rls_solve(&dec, &y, 0.5).unwrap();
        let scaled = rls_solve(&dec, &(&y * Complex64::new(5.0, 0.0)), 0.5).unwrap();
        assert!(
            (scaled.x_hat - &base.x_hat * Complex64::new(5.0, 0.0)).norm()
                < 1e-12 * base.x_hat.norm()
        );
    }

    #[test]
    fn copra_beats_ls_on_noisy_instance() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let n = 50;
        let hm = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
        let x = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
        let hx = &hm * &x;
        let sigma_z_sq = hx.norm_squared() / (n as f64 * 10.0); // 10 dB
        let z = DVector::<f64>::from_fn(n, |_, _| {
            let v: f64 = rng.sample(StandardNormal);
            v * sigma_z_sq.sqrt()
        });
        let y = complex_vec_from_real(&(hx + z));
        let h = complex_from_real(&hm);

        let (est, sel) = copra_estimate(&h, &y, &SolverConfig::default()).unwrap();
        assert!(sel.converged);
        let (dec, _) = decompose(&h, &y, None).unwrap();
        let ls = ls_estimate(&dec, &y).unwrap();
        let xc = complex_vec_from_real(&x);
        let nmse_copra = (est.x_hat - &xc).norm_squared() / xc.norm_squared();
        let nmse_ls = (ls.x_hat - &xc).norm_squared() / xc.norm_squared();
        assert!(nmse_copra < nmse_ls);
    }

    #[test]
    fn copra_estimate_scales_with_observation() {
        let (h, y) = real_model(7, 30, 30);
        // give the observation some structure so a root exists
        let cfg = SolverConfig::default();
        if let Ok((base, base_sel)) = copra_estimate(&h, &y, &cfg) {
            let y5 = &y * Complex64::new(5.0, 0.0);
            let (scaled, sel) = copra_estimate(&h, &y5, &cfg).unwrap();
            assert_relative_eq!(sel.gamma, base_sel.gamma, max_relative = 1e-8);
            assert!(
                (scaled.x_hat - &base.x_hat * Complex64::new(5.0, 0.0)).norm()
                    < 1e-6 * base.x_hat.norm()
            );
        }
    }

    #[test]
    fn copra_estimate_zero_observation_errors() {
        let (h, _) = real_model(9, 10, 10);
        let y = DVector::<Complex64>::zeros(10);
        assert!(copra_estimate(&h, &y, &SolverConfig::default()).is_err());
    }

    #[test]
    fn gcv_flat_objective_ties_to_smallest() {
        let (dec, y) = identity_2();
        let grid = vec![0.1, 1.0, 10.0];
        let g = gcv_select(&dec, &y, &grid).unwrap();
        assert_eq!(g, 0.1);
    }

    #[test]
    fn gcv_zero_observation_ties_to_smallest() {
        let (h, _) = real_model(13, 5, 5);
        let y = DVector::<Complex64>::zeros(5);
        let (dec, _) = decompose(&h, &complex_vec_from_real(&DVector::repeat(5, 1.0)), None).unwrap();
        let grid = vec![0.5, 2.0, 8.0];
        assert_eq!(gcv_select(&dec, &y, &grid).unwrap(), 0.5);
        assert_eq!(quasiopt_select(&dec, &y, &grid).unwrap(), 0.5);
        let _ = h;
    }

    #[test]
    fn gcv_refinement_stability() {
        let (h, y) = real_model(31, 30, 30);
        let (dec, _) = decompose(&h, &y, None).unwrap();
        let coarse = default_selector_grid(&dec);
        let fine: Vec<f64> = {
            let s1_sq = dec.singular_values[0] * dec.singular_values[0];
            let lo = 1e-6 * s1_sq;
            let hi = 1e2 * s1_sq;
            let count = 2000;
            let step = (hi / lo).log10() / (count - 1) as f64;
            (0..count).map(|i| lo * 10f64.powf(step * i as f64)).collect()
        };
        let gc = gcv_select(&dec, &y, &coarse).unwrap();
        let gf = gcv_select(&dec, &y, &fine).unwrap();
        // coarse argmin within one coarse grid step of the fine argmin
        let step_ratio = coarse[1] / coarse[0];
        assert!(gc / gf < step_ratio && gf / gc < step_ratio * step_ratio);

        let qc = quasiopt_select(&dec, &y, &coarse).unwrap();
        let qf = quasiopt_select(&dec, &y, &fine).unwrap();
        assert!(qc / qf < step_ratio * step_ratio && qf / qc < step_ratio * step_ratio);
    }

    #[test]
    fn quasiopt_single_mode_endpoint() {
        // Q(gamma) = gamma^2 / (1 + gamma)^4 for a single unit mode: rises to
        // an interior maximum at gamma = 1 and decays, so the grid argmin must
        // be one of the endpoints.
        let h = complex_from_real(&DMatrix::identity(1, 1));
        let y = complex_vec_from_real(&DVector::from_vec(vec![1.0]));
        let (dec, _) = decompose(&h, &y, None).unwrap();
        let grid = vec![0.01, 0.1, 1.0, 10.0, 100.0];
        let g = quasiopt_select(&dec, &y, &grid).unwrap();
        assert!(g == 0.01 || g == 100.0);
    }

    #[test]
    fn selectors_reject_empty_grid() {
        let (dec, y) = identity_2();
        assert!(gcv_select(&dec, &y, &[]).is_err());
        assert!(quasiopt_select(&dec, &y, &[]).is_err());
    }
}
