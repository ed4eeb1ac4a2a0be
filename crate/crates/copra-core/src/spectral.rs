//! Spectral decomposition of the linear model and evaluation of the COPRA
//! characteristic function.
//!
//! Everything downstream of `decompose` works on real spectral energies
//! (squared singular values and projected observation energies), so the
//! characteristic function and its derivative are plain real arithmetic even
//! for complex models.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CopraError, Result};

/// Thin SVD of the model matrix, retained modes only.
///
/// `left_basis` is M×r, `right_basis` is N×r, with r the number of singular
/// values above the rank tolerance, in descending order.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub left_basis: DMatrix<Complex64>,
    pub singular_values: DVector<f64>,
    pub right_basis: DMatrix<Complex64>,
    pub rank_tolerance: f64,
    pub rows: usize,
    pub cols: usize,
}

/// The real-valued inputs to all COPRA-function math: squared singular values
/// and projected observation energies b_i^2 = |u_i^H y|^2.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub sigma_sq: Vec<f64>,
    pub b_sq: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
    /// Observation energy falling outside the retained modes.
    pub discarded_energy: f64,
}

impl SpectralData {
    pub fn rank(&self) -> usize {
        self.sigma_sq.len()
    }

    pub fn total_b_energy(&self) -> f64 {
        self.b_sq.iter().sum()
    }

    /// True when every projected energy vanishes.
    pub fn is_degenerate_observation(&self) -> bool {
        self.b_sq.iter().all(|&b| b == 0.0) && self.discarded_energy == 0.0
    }

    /// Per-mode (sigma^2, b^2) pairs over the full observation basis: the
    /// retained modes followed by the left-null-space energy as a single
    /// zero-sigma mode. The characteristic function sums over all observation
    /// directions, and for tall models the null-space term supplies the
    /// positive mass that locates the operative root.
    fn modes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.sigma_sq
            .iter()
            .copied()
            .zip(self.b_sq.iter().copied())
            .chain((self.discarded_energy > 0.0).then_some((0.0, self.discarded_energy)))
    }
}

/// Deterministic-equivalent scalars entering the general-ratio characteristic
/// function. Caller-supplied for general M/N; the square-case closed form is
/// available via [`delta_square_case`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaPair {
    pub delta: f64,
    pub delta_tilde: f64,
}

fn require_positive(gamma_tilde: f64) -> Result<()> {
    if gamma_tilde > 0.0 && gamma_tilde.is_finite() {
        Ok(())
    } else {
        Err(CopraError::Domain(format!(
            "gamma_tilde must be a finite positive real, got {gamma_tilde}"
        )))
    }
}

/// sqrt(g (g + 4)) evaluated as a product of square roots; stays accurate as
/// g -> 0 where the ratio form g sqrt((g+4)/g) loses digits.
#[inline]
fn stable_root(g: f64) -> f64 {
    g.sqrt() * (g + 4.0).sqrt()
}

/// The two scalar brackets of the square-case characteristic function,
/// rationalized against their conjugates so the large-g tails do not cancel:
///   a = root - g - 4           = -4 (g + 4) / (root + g + 4)
///   b = N ((2+g) root - g(g+4)) = 4 N g (g + 4) / ((2+g) root + g (g+4))
/// `a` multiplies the sigma^2-weighted trace, `b` the plain one.
#[inline]
fn brackets(g: f64, n: f64) -> (f64, f64) {
    let root = stable_root(g);
    let d1 = root + g + 4.0;
    let d2 = (2.0 + g) * root + g * (g + 4.0);
    let a = -4.0 * (g + 4.0) / d1;
    let b = 4.0 * n * g * (g + 4.0) / d2;
    (a, b)
}

/// Decompose the model (H, y) into retained spectral modes.
///
/// `rank_tolerance = None` uses machine-epsilon * max(M, N) * sigma_1.
pub fn decompose(
    h: &DMatrix<Complex64>,
    y: &DVector<Complex64>,
    rank_tolerance: Option<f64>,
) -> Result<(Decomposition, SpectralData)> {
    let (m, n) = h.shape();
    if m == 0 || n == 0 {
        return Err(CopraError::InvalidInput("empty model matrix".into()));
    }
    if y.len() != m {
        return Err(CopraError::DimensionMismatch {
            rows: m,
            cols: n,
            obs_len: y.len(),
        });
    }
    if let Some(t) = rank_tolerance {
        if !(t >= 0.0) {
            return Err(CopraError::InvalidInput(format!(
                "rank_tolerance must be nonnegative, got {t}"
            )));
        }
    }

    let svd = h.clone().svd(true, true);
    let u = svd.u.expect("svd with compute_u");
    let v_t = svd.v_t.expect("svd with compute_v");
    let sv = svd.singular_values;

    // nalgebra does not promise an ordering; sort modes descending ourselves.
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap());

    let sigma_max = sv[order[0]];
    let tol = rank_tolerance.unwrap_or(f64::EPSILON * m.max(n) as f64 * sigma_max);

    let retained: Vec<usize> = order.iter().copied().filter(|&i| sv[i] > tol).collect();
    if retained.is_empty() {
        return Err(CopraError::DegenerateModel);
    }
    let r = retained.len();

    let mut left = DMatrix::<Complex64>::zeros(m, r);
    let mut right = DMatrix::<Complex64>::zeros(n, r);
    let mut singular = DVector::<f64>::zeros(r);
    for (k, &i) in retained.iter().enumerate() {
        left.set_column(k, &u.column(i));
        singular[k] = sv[i];
        for j in 0..n {
            right[(j, k)] = v_t[(i, j)].conj();
        }
    }

    let mut sigma_sq = Vec::with_capacity(r);
    let mut b_sq = Vec::with_capacity(r);
    for k in 0..r {
        sigma_sq.push(singular[k] * singular[k]);
        let proj: Complex64 = left.column(k).iter().zip(y.iter()).map(|(u, y)| u.conj() * y).sum();
        b_sq.push(proj.norm_sqr());
    }
    let captured: f64 = b_sq.iter().sum();
    let total = y.norm_squared();
    // Floating-point residue of a full-rank projection must not masquerade
    // as null-space energy: it would inject a fake zero-sigma mode.
    let mut discarded_energy = (total - captured).max(0.0);
    if discarded_energy <= 1e-8 * total {
        discarded_energy = 0.0;
    }

    let dec = Decomposition {
        left_basis: left,
        singular_values: singular,
        right_basis: right,
        rank_tolerance: tol,
        rows: m,
        cols: n,
    };
    let data = SpectralData {
        sigma_sq,
        b_sq,
        rows: m,
        cols: n,
        discarded_energy,
    };
    Ok((dec, data))
}

/// The square-case characteristic function S(gamma_tilde), per-mode sum form.
///
/// The two bracket terms are combined over a common denominator before
/// summation, so the near-total cancellation between S1 and S2 at large
/// gamma_tilde happens analytically instead of in floating point:
///   sigma^2 a + b = 4 (g+4) [root (Ng - sigma^2 (2+g)) + g (g+4) (N - sigma^2)] / (D1 D2).
pub fn copra_eval(gamma_tilde: f64, data: &SpectralData) -> Result<f64> {
    require_positive(gamma_tilde)?;
    let g = gamma_tilde;
    let n = data.cols as f64;
    let root = stable_root(g);
    let d1 = root + g + 4.0;
    let d2 = (2.0 + g) * root + g * (g + 4.0);
    let mut sum = 0.0;
    for (s2, b2) in data.modes() {
        let den = s2 + n * g;
        let w = b2 / (den * den);
        sum += w * (root * (n * g - s2 * (2.0 + g)) + g * (g + 4.0) * (n - s2));
    }
    Ok(4.0 * (g + 4.0) / (d1 * d2) * sum)
}

/// The two components S1 (sigma^2-weighted, always nonpositive) and S2.
pub fn component_eval(gamma_tilde: f64, data: &SpectralData) -> Result<(f64, f64)> {
    require_positive(gamma_tilde)?;
    let n = data.cols as f64;
    let (br_a, br_b) = brackets(gamma_tilde, n);
    let mut tr_a = 0.0;
    let mut tr_b = 0.0;
    for (s2, b2) in data.modes() {
        let den = s2 + n * gamma_tilde;
        let w = b2 / (den * den);
        tr_a += s2 * w;
        tr_b += w;
    }
    Ok((tr_a * br_a, tr_b * br_b))
}

/// Analytic first derivative of the square-case characteristic function.
pub fn copra_derivative(gamma_tilde: f64, data: &SpectralData) -> Result<f64> {
    require_positive(gamma_tilde)?;
    let g = gamma_tilde;
    let n = data.cols as f64;
    let root = stable_root(g);
    let droot = (g + 2.0) / root;
    let br_a = root - g - 4.0;
    let br_b = n * (2.0 * root + g * root - 4.0 * g - g * g);
    let br_a_d = droot - 1.0;
    // d/dg [2 root + g root - 4g - g^2] with (2 + g) droot = (g+2)^2 / root.
    let br_b_d = n * ((g + 2.0) * (g + 2.0) / root + root - 2.0 * g - 4.0);

    let mut out = 0.0;
    for (s2, b2) in data.modes() {
        let den = s2 + n * g;
        let w = b2 / (den * den);
        let dw = -2.0 * n * b2 / (den * den * den);
        out += (s2 * dw) * br_a + (s2 * w) * br_a_d + dw * br_b + w * br_b_d;
    }
    Ok(out)
}

/// Closed-form deterministic equivalents for the square case:
/// delta = delta_tilde = (g/2)(sqrt((g+4)/g) - 1), the positive root of
/// d^2 + g d - g = 0.
pub fn delta_square_case(gamma_tilde: f64) -> Result<DeltaPair> {
    require_positive(gamma_tilde)?;
    let d = 0.5 * (stable_root(gamma_tilde) - gamma_tilde);
    Ok(DeltaPair {
        delta: d,
        delta_tilde: d,
    })
}

/// General-ratio characteristic function.
///
/// Evaluates the two bracketed polynomials in (gamma_tilde, delta,
/// delta_tilde) against the two trace sums, then rescales by 2/(gamma_tilde^2
/// delta) so that the square-case deltas reproduce [`copra_eval`] exactly.
/// The rescaling is by a positive factor, so the root set is unchanged.
pub fn copra_general_eval(
    gamma_tilde: f64,
    deltas: DeltaPair,
    data: &SpectralData,
) -> Result<f64> {
    require_positive(gamma_tilde)?;
    let DeltaPair { delta, delta_tilde } = deltas;
    if !(delta.is_finite() && delta_tilde.is_finite() && delta >= 0.0 && delta_tilde >= 0.0) {
        return Err(CopraError::Domain(format!(
            "deltas must be finite and nonnegative, got ({delta}, {delta_tilde})"
        )));
    }
    let g = gamma_tilde;
    let n = data.cols as f64;
    let m = data.rows as f64;
    let dd = delta * delta_tilde;

    // bracket on the sigma^2-weighted trace
    let b1 = dd * dd - g * g * delta - g * dd;
    // bracket on the plain trace
    let b2 = n * dd * (g * g - g * dd - delta * delta_tilde * delta_tilde)
        + m * delta_tilde * g * (g - g * delta + delta * delta * delta_tilde);

    let mut tr_a = 0.0;
    let mut tr_b = 0.0;
    for (s2, b2e) in data.modes() {
        let den = s2 + n * g;
        let w = b2e / (den * den);
        tr_a += s2 * w;
        tr_b += w;
    }
    let raw = tr_a * b1 + tr_b * b2;
    if raw == 0.0 {
        // Both brackets carry a delta factor; the zero-deltas (and zero
        // observation) corner is exactly zero before any rescaling.
        return Ok(0.0);
    }
    Ok(raw * 2.0 / (g * g * delta))
}

/// Promote a real matrix to the complex representation used by `decompose`.
pub fn complex_from_real(h: &DMatrix<f64>) -> DMatrix<Complex64> {
    h.map(|v| Complex64::new(v, 0.0))
}

/// Promote a real vector likewise.
pub fn complex_vec_from_real(y: &DVector<f64>) -> DVector<Complex64> {
    y.map(|v| Complex64::new(v, 0.0))
}
