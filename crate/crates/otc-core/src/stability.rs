//! Local stability analysis of the master equations at a steady state.
//!
//! Assembles the analytic Jacobians, computes characteristic-polynomial
//! coefficients and eigenvalue real parts, and applies the Routh-Hurwitz
//! quartic criterion to the segmented two-asset case, where stability is
//! equivalent to `a_k > 0` for all k and `a1 a2 a3 - a3^2 - a1^2 a4 > 0`.

use crate::linalg::{self, LinAlgError, Mat};
use crate::model::{MarketParams, ModelKind, StateDistribution, SteadyState};
use thiserror::Error;

/// Eigenvalue real parts within this band of zero give a `Marginal`
/// verdict instead of being coerced to one side.
pub const MARGINAL_BAND: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum StabilityError {
    #[error("eigenvalue iteration failed: {0}")]
    NoConvergence(LinAlgError),
    #[error("parameters are for a {got:?} market, expected {expected:?}")]
    WrongKind { got: ModelKind, expected: ModelKind },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    AsymptoticallyStable,
    Unstable,
    Marginal,
}

/// Jacobian of the reduced non-segmented system at a distribution, in the
/// coordinates `(x_1, ..., x_K, v)` with `x_i = mu(li,o)` and
/// `v = mu(h,n)`.
pub fn jacobian_nonseg(params: &MarketParams, dist: &StateDistribution) -> Mat {
    assert_eq!(params.kind(), ModelKind::NonSegmented);
    assert_eq!(dist.kind(), ModelKind::NonSegmented);
    let k = params.num_assets();
    let v = dist.mu_hn();
    let lambda = params.lambda();
    let mut j = Mat::zeros(k + 1, k + 1);
    let mut meet_total = 0.0;
    for i in 0..k {
        let xi = dist.mu_lio(i);
        j[(i, i)] = -lambda[i] * v - params.gamma_i(i);
        j[(i, k)] = -lambda[i] * xi;
        j[(k, i)] = -lambda[i] * v;
        meet_total += lambda[i] * xi;
    }
    j[(k, k)] = -meet_total - params.gamma();
    j
}

/// Jacobian of the reduced partially segmented system at a distribution,
/// in the coordinates `(mu(h1,n), ..., mu(hK,n), mu(l1,o), ..., mu(lK,o))`.
pub fn jacobian_seg(params: &MarketParams, dist: &StateDistribution) -> Mat {
    assert_eq!(params.kind(), ModelKind::PartiallySegmented);
    assert_eq!(dist.kind(), ModelKind::PartiallySegmented);
    let k = params.num_assets();
    let lambda = params.lambda();
    let tu = params.tgamma_ui();
    let td = params.tgamma_di();
    let mut j = Mat::zeros(2 * k, 2 * k);
    for i in 0..k {
        let hi = dist.mu_hin(i);
        let li = dist.mu_lio(i);
        for jj in 0..k {
            // mu(l,n) contributes -tgamma_ui through the shared pool.
            j[(i, jj)] = -tu[i];
        }
        j[(i, i)] += -lambda[i] * li - td[i];
        j[(i, k + i)] = -lambda[i] * hi;
        j[(k + i, i)] = -lambda[i] * li;
        j[(k + i, k + i)] = -lambda[i] * hi - params.gamma_i(i);
    }
    j
}

/// Monic characteristic polynomial, coefficients in descending order
/// `[1, a1, ..., an]`.
pub fn char_poly(j: &Mat) -> Vec<f64> {
    linalg::char_poly(j)
}

/// Real parts of all Jacobian eigenvalues.
pub fn eig_real_parts(j: &Mat) -> Result<Vec<f64>, StabilityError> {
    Ok(linalg::eigenvalues(j)
        .map_err(StabilityError::NoConvergence)?
        .into_iter()
        .map(|(re, _)| re)
        .collect())
}

/// Routh-Hurwitz test for a monic quartic `xi^4 + a1 xi^3 + a2 xi^2 +
/// a3 xi + a4`: stable iff all coefficients are positive and the margin
/// `a1 a2 a3 - a3^2 - a1^2 a4` is positive.
pub fn rh_quartic(a1: f64, a2: f64, a3: f64, a4: f64) -> (f64, Verdict) {
    let margin = a1 * a2 * a3 - a3 * a3 - a1 * a1 * a4;
    let coeffs_positive = a1 > 0.0 && a2 > 0.0 && a3 > 0.0 && a4 > 0.0;
    let verdict = if coeffs_positive && margin > 0.0 {
        Verdict::AsymptoticallyStable
    } else if coeffs_positive && margin == 0.0 {
        Verdict::Marginal
    } else {
        Verdict::Unstable
    };
    (margin, verdict)
}

/// Jacobian spectrum summary at a steady state.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub jacobian: Mat,
    /// Monic characteristic polynomial, descending coefficients.
    pub char_poly: Vec<f64>,
    pub eig_real_parts: Vec<f64>,
    /// `(a1, a2, a3, a4)` for the segmented two-asset quartic.
    pub rh_coeffs: Option<(f64, f64, f64, f64)>,
    /// `a1 a2 a3 - a3^2 - a1^2 a4` when the quartic criterion applies.
    pub rh_margin: Option<f64>,
    pub verdict: Verdict,
}

/// Assembles the Jacobian at a steady state and classifies it by the
/// sign of the largest eigenvalue real part; attaches the Routh-Hurwitz
/// data for segmented two-asset instances.
pub fn stability_report(
    params: &MarketParams,
    steady: &SteadyState,
) -> Result<StabilityReport, StabilityError> {
    let jac = match params.kind() {
        ModelKind::NonSegmented => jacobian_nonseg(params, &steady.dist),
        ModelKind::PartiallySegmented => jacobian_seg(params, &steady.dist),
    };
    let poly = char_poly(&jac);
    let re = eig_real_parts(&jac)?;
    let max_re = re.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let verdict = if max_re < -MARGINAL_BAND {
        Verdict::AsymptoticallyStable
    } else if max_re > MARGINAL_BAND {
        Verdict::Unstable
    } else {
        Verdict::Marginal
    };
    let (rh_coeffs, rh_margin) =
        if params.kind() == ModelKind::PartiallySegmented && params.num_assets() == 2 {
            let (a1, a2, a3, a4) = (poly[1], poly[2], poly[3], poly[4]);
            let (margin, _) = rh_quartic(a1, a2, a3, a4);
            (Some((a1, a2, a3, a4)), Some(margin))
        } else {
            (None, None)
        };
    Ok(StabilityReport {
        jacobian: jac,
        char_poly: poly,
        eig_real_parts: re,
        rh_coeffs,
        rh_margin,
        verdict,
    })
}

/// Outcome of a randomized margin audit over segmented two-asset
/// parameter draws.
#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub n_draws: usize,
    pub n_solved: usize,
    /// Draws whose steady-state solve failed; counted, not fatal.
    pub n_solver_failures: usize,
    pub min_margin: f64,
    /// Draw indices with a non-positive coefficient or margin.
    pub violations: Vec<usize>,
}

/// Solves the steady state for each sampled parameter set, evaluates the
/// quartic coefficients and margin, and aggregates failures instead of
/// aborting.
pub fn rh_margin_sweep<F>(mut sampler: F, n_draws: usize, tol: f64) -> SweepSummary
where
    F: FnMut(usize) -> MarketParams,
{
    let mut summary = SweepSummary {
        n_draws,
        n_solved: 0,
        n_solver_failures: 0,
        min_margin: f64::INFINITY,
        violations: Vec::new(),
    };
    for draw in 0..n_draws {
        let params = sampler(draw);
        let steady = match crate::equilibrium::solve_seg_steady_k2(&params, tol) {
            Ok(s) => s,
            Err(_) => {
                summary.n_solver_failures += 1;
                continue;
            }
        };
        summary.n_solved += 1;
        let poly = char_poly(&jacobian_seg(&params, &steady.dist));
        let (a1, a2, a3, a4) = (poly[1], poly[2], poly[3], poly[4]);
        let (margin, verdict) = rh_quartic(a1, a2, a3, a4);
        summary.min_margin = summary.min_margin.min(margin);
        if verdict != Verdict::AsymptoticallyStable {
            summary.violations.push(draw);
        }
    }
    summary
}
