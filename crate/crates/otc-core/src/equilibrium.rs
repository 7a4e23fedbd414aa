//! Steady-state solvers for both market classes.
//!
//! Non-segmented markets reduce to a scalar root problem `F(x) = 0` in
//! `x = mu(h,n)`, bracketed on `[0, 1 - sum m_i]`; partially segmented
//! markets need a K-dimensional fixed point in the `mu(hi,n)`, solved
//! here by an explicit curve intersection for `K = 2` and by a damped
//! fixed-point iteration with a Newton fallback for general `K`.

use crate::dynamics::{self, DynamicsError};
use crate::linalg::{self, Mat};
use crate::model::{
    MarketParams, ModelError, ModelKind, StateDistribution, SteadyMethod, SteadyState,
};
use thiserror::Error;

/// Default convergence tolerance on the master-equation residual.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Bisection runs until the bracket is this wide, then Newton takes over.
const BISECTION_WIDTH: f64 = 1e-6;
const MAX_NEWTON_STEPS: u32 = 200;

#[derive(Debug, Error)]
pub enum EquilibriumError {
    #[error("parameters are for a {got:?} market, expected {expected:?}")]
    WrongKind { got: ModelKind, expected: ModelKind },
    #[error("root bracket invalid: F({lo}) = {f_lo}, F({hi}) = {f_hi}")]
    BracketFailure { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual})")]
    NoConvergence { iterations: u32, residual: f64 },
    #[error("recovered steady state is infeasible: {0}")]
    InfeasibleSolution(String),
    #[error("only K = 2 is supported here (got K = {0})")]
    UnsupportedAssetCount(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    LinAlg(#[from] linalg::LinAlgError),
}

/// Bracket and polish bookkeeping for the scalar root solve.
#[derive(Debug, Clone)]
pub struct RootDiagnostics {
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub newton_polish_steps: u32,
}

/// The steady-state function `F` of the non-segmented class:
/// `F(x) = sum_i gamma_i gamma_di m_i / (lambda_i x + gamma_i)
///         - sum_i gamma_di m_i + gamma_u (1 - sum_i m_i) - gamma x`.
pub fn eval_f(params: &MarketParams, x: f64) -> f64 {
    let mut acc = params.gamma_u() * (1.0 - params.sum_m()) - params.gamma() * x;
    for i in 0..params.num_assets() {
        let gi = params.gamma_i(i);
        let gdm = params.gamma_di()[i] * params.m()[i];
        acc += gi * gdm / (params.lambda()[i] * x + gi) - gdm;
    }
    acc
}

/// Derivative `F'(x)`, strictly below `-gamma` for `x >= 0`.
pub fn eval_f_prime(params: &MarketParams, x: f64) -> f64 {
    let mut acc = -params.gamma();
    for i in 0..params.num_assets() {
        let gi = params.gamma_i(i);
        let li = params.lambda()[i];
        let denom = li * x + gi;
        acc -= gi * params.gamma_di()[i] * params.m()[i] * li / (denom * denom);
    }
    acc
}

/// Solves `F(x) = 0` for `x = mu(h,n)`: bisection to a narrow bracket,
/// then Newton polish.
pub fn solve_nonseg_root(
    params: &MarketParams,
    tol: f64,
) -> Result<(f64, RootDiagnostics), EquilibriumError> {
    if params.kind() != ModelKind::NonSegmented {
        return Err(EquilibriumError::WrongKind {
            got: params.kind(),
            expected: ModelKind::NonSegmented,
        });
    }
    let mut lo = 0.0;
    let mut hi = 1.0 - params.sum_m();
    let f_lo = eval_f(params, lo);
    let f_hi = eval_f(params, hi);
    // Guaranteed for valid parameters: F(0) > 0 > F(1 - sum m).
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(EquilibriumError::BracketFailure { lo, hi, f_lo, f_hi });
    }
    let diag_bracket = (lo, hi, f_lo, f_hi);
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if eval_f(params, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    let mut steps = 0u32;
    let mut best = (x, eval_f(params, x).abs());
    while steps < MAX_NEWTON_STEPS {
        let f = eval_f(params, x);
        if f.abs() < best.1 {
            best = (x, f.abs());
        }
        if f.abs() <= tol * 1e-2 {
            break;
        }
        let fp = eval_f_prime(params, x);
        let next = x - f / fp;
        steps += 1;
        if (next - x).abs() <= f64::EPSILON * x.abs() {
            x = next;
            break;
        }
        x = next;
    }
    let f_final = eval_f(params, x);
    if f_final.abs() > best.1 {
        x = best.0;
    }
    if eval_f(params, x).abs() > tol {
        return Err(EquilibriumError::NoConvergence {
            iterations: steps,
            residual: eval_f(params, x).abs(),
        });
    }
    Ok((
        x,
        RootDiagnostics {
            bracket_lo: diag_bracket.0,
            bracket_hi: diag_bracket.1,
            f_lo: diag_bracket.2,
            f_hi: diag_bracket.3,
            newton_polish_steps: steps,
        },
    ))
}

/// Recovers the remaining coordinates from `mu(h.,n)` via the owner
/// balance identity `mu(li,o) = gamma_di m_i / (lambda_i mu + gamma_i)`.
fn lio_from_hn(params: &MarketParams, hn_for_asset: impl Fn(usize) -> f64) -> Vec<f64> {
    (0..params.num_assets())
        .map(|i| {
            let gi = params.gamma_i(i);
            params.gamma_di()[i] * params.m()[i] / (params.lambda()[i] * hn_for_asset(i) + gi)
        })
        .collect()
}

/// Steady state of a non-segmented market.
pub fn solve_nonseg_steady(
    params: &MarketParams,
    tol: f64,
) -> Result<SteadyState, EquilibriumError> {
    let (x, diag) = solve_nonseg_root(params, tol)?;
    let lio = lio_from_hn(params, |_| x);
    let dist = StateDistribution::new(params, vec![x], lio)?;
    let residual = dynamics::residual_inf_norm(params, &dist)?;
    if residual > tol {
        return Err(EquilibriumError::NoConvergence {
            iterations: diag.newton_polish_steps,
            residual,
        });
    }
    Ok(SteadyState {
        dist,
        residual_inf_norm: residual,
        iterations: diag.newton_polish_steps,
        method: SteadyMethod::BisectionNewton,
    })
}

/// First steady-state curve of the segmented two-asset system:
/// `mu(h2,n)` as an explicit function of `mu(h1,n)`.
pub fn seg_k2_curve1(params: &MarketParams, x: f64) -> f64 {
    seg_k2_curve(params, 0, x)
}

/// Second curve: `mu(h1,n)` as an explicit function of `mu(h2,n)`.
pub fn seg_k2_curve2(params: &MarketParams, y: f64) -> f64 {
    seg_k2_curve(params, 1, y)
}

fn seg_k2_curve(params: &MarketParams, own: usize, arg: f64) -> f64 {
    let tu = params.tgamma_ui()[own];
    let ti = params.tgamma_i(own);
    let gi = params.gamma_i(own);
    let gdm = params.gamma_di()[own] * params.m()[own];
    let free = 1.0 - params.sum_m();
    -(ti / tu) * arg + gi * gdm / (tu * (params.lambda()[own] * arg + gi)) + free - gdm / tu
}

fn seg_k2_curve_deriv(params: &MarketParams, own: usize, arg: f64) -> f64 {
    let tu = params.tgamma_ui()[own];
    let ti = params.tgamma_i(own);
    let gi = params.gamma_i(own);
    let li = params.lambda()[own];
    let denom = li * arg + gi;
    -(ti / tu) - gi * params.gamma_di()[own] * params.m()[own] * li / (tu * denom * denom)
}

/// Steady state of a partially segmented two-asset market by
/// intersecting the two explicit curves: bisection on
/// `g(x) = x - curve2(curve1(x))`, then Newton polish.
pub fn solve_seg_steady_k2(
    params: &MarketParams,
    tol: f64,
) -> Result<SteadyState, EquilibriumError> {
    if params.kind() != ModelKind::PartiallySegmented {
        return Err(EquilibriumError::WrongKind {
            got: params.kind(),
            expected: ModelKind::PartiallySegmented,
        });
    }
    if params.num_assets() != 2 {
        return Err(EquilibriumError::UnsupportedAssetCount(params.num_assets()));
    }
    let free = 1.0 - params.sum_m();

    // curve1 is strictly decreasing with curve1(0) = free > 0 and
    // curve1(free) < 0, so it crosses zero at some x_max < free. The
    // composition is only meaningful while curve1 stays in [0, free],
    // which pins the search interval to [0, x_max].
    let (mut a, mut b) = (0.0, free);
    debug_assert!(seg_k2_curve1(params, 0.0) > 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if seg_k2_curve1(params, mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
        if b - a <= f64::EPSILON * free {
            break;
        }
    }
    let x_max = a;

    // g(0) = -curve2(free) > 0 and g(x_max) = x_max - free < 0.
    let g = |x: f64| x - seg_k2_curve2(params, seg_k2_curve1(params, x));
    let (mut lo, mut hi) = (0.0, x_max);
    let (g_lo, g_hi) = (g(lo), g(hi));
    if !(g_lo >= 0.0 && g_hi <= 0.0) {
        return Err(EquilibriumError::BracketFailure {
            lo,
            hi,
            f_lo: g_lo,
            f_hi: g_hi,
        });
    }
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x = 0.5 * (lo + hi);
    let mut steps = 0u32;
    let mut best = (x, g(x).abs());
    while steps < MAX_NEWTON_STEPS {
        let gx = g(x);
        if gx.abs() < best.1 {
            best = (x, gx.abs());
        }
        if gx.abs() <= tol * 1e-3 {
            break;
        }
        let y = seg_k2_curve1(params, x);
        let gp = 1.0 - seg_k2_curve_deriv(params, 1, y) * seg_k2_curve_deriv(params, 0, x);
        let next = x - gx / gp;
        steps += 1;
        if !next.is_finite() || (next - x).abs() <= f64::EPSILON * x.abs() {
            if next.is_finite() {
                x = next;
            }
            break;
        }
        x = next.clamp(0.0, x_max);
    }
    if g(x).abs() > best.1 {
        x = best.0;
    }

    let y = seg_k2_curve1(params, x);
    let mut hn = vec![x, y];
    steps += newton_finish(params, &mut hn, free)?;
    let lio = lio_from_hn(params, |i| hn[i]);
    let ln = free - hn[0] - hn[1];
    if ln < -crate::model::FEASIBILITY_TOL {
        return Err(EquilibriumError::InfeasibleSolution(format!(
            "mu(l,n) = {ln}"
        )));
    }
    let dist = StateDistribution::new(params, hn, lio)?;
    let residual = dynamics::residual_inf_norm(params, &dist)?;
    if residual > tol {
        return Err(EquilibriumError::NoConvergence {
            iterations: steps,
            residual,
        });
    }
    Ok(SteadyState {
        dist,
        residual_inf_norm: residual,
        iterations: steps,
        method: SteadyMethod::CurveIntersection,
    })
}

/// Damping weight of the general-K fixed-point iteration.
const FIXED_POINT_DAMPING: f64 = 0.5;
/// Window over which a < 10% decrease of the update norm counts as a stall.
const STALL_WINDOW: u32 = 20;

/// The fixed-point map of the segmented steady-state system: each
/// `mu(hi,n)` expressed through the others.
fn seg_fixed_point_map(params: &MarketParams, x: &[f64]) -> Vec<f64> {
    let k = params.num_assets();
    let free = 1.0 - params.sum_m();
    let sum_x: f64 = x.iter().sum();
    (0..k)
        .map(|i| {
            let tu = params.tgamma_ui()[i];
            let ti = params.tgamma_i(i);
            let gi = params.gamma_i(i);
            let gdm = params.gamma_di()[i] * params.m()[i];
            let others = sum_x - x[i];
            -(tu / ti) * others + gi * gdm / (ti * (params.lambda()[i] * x[i] + gi))
                - gdm / ti
                + (tu / ti) * free
        })
        .collect()
}

/// A few Newton steps on `R(x) = x - T(x)` in the full `mu(hi,n)` block,
/// polishing a near-solution to the round-off floor.
fn newton_finish(
    params: &MarketParams,
    x: &mut [f64],
    free: f64,
) -> Result<u32, EquilibriumError> {
    let mut steps = 0;
    for _ in 0..5 {
        let t = seg_fixed_point_map(params, x);
        let residual: Vec<f64> = x.iter().zip(&t).map(|(xi, ti)| xi - ti).collect();
        if residual.iter().all(|r| r.abs() < f64::EPSILON) {
            break;
        }
        let jac = seg_residual_jacobian(params, x);
        let step = linalg::solve(&jac, &residual)?;
        for (xi, s) in x.iter_mut().zip(&step) {
            *xi = (*xi - s).clamp(0.0, free);
        }
        steps += 1;
    }
    Ok(steps)
}

/// Jacobian of `R(x) = x - T(x)` for the Newton fallback.
fn seg_residual_jacobian(params: &MarketParams, x: &[f64]) -> Mat {
    let k = params.num_assets();
    let mut j = Mat::zeros(k, k);
    for i in 0..k {
        let tu = params.tgamma_ui()[i];
        let ti = params.tgamma_i(i);
        let gi = params.gamma_i(i);
        let li = params.lambda()[i];
        let denom = li * x[i] + gi;
        let t_ii = -gi * params.gamma_di()[i] * params.m()[i] * li / (ti * denom * denom);
        for jj in 0..k {
            let t_ij = if jj == i { t_ii } else { -tu / ti };
            j[(i, jj)] = if jj == i { 1.0 - t_ij } else { -t_ij };
        }
    }
    j
}

/// Steady state of a partially segmented market for any K: damped
/// fixed-point iteration with coordinate projection, switching to Newton
/// on the fixed-point residual if progress stalls.
pub fn solve_seg_steady_general(
    params: &MarketParams,
    tol: f64,
    max_iter: u32,
) -> Result<SteadyState, EquilibriumError> {
    if params.kind() != ModelKind::PartiallySegmented {
        return Err(EquilibriumError::WrongKind {
            got: params.kind(),
            expected: ModelKind::PartiallySegmented,
        });
    }
    let k = params.num_assets();
    let free = 1.0 - params.sum_m();
    let mut x = vec![free / (k as f64 + 1.0); k];
    let mut update = f64::INFINITY;
    let mut window_start_update = f64::INFINITY;
    let mut iterations = 0u32;
    let mut use_newton = false;

    while iterations < max_iter {
        iterations += 1;
        if use_newton {
            let t = seg_fixed_point_map(params, &x);
            let residual: Vec<f64> = x.iter().zip(&t).map(|(xi, ti)| xi - ti).collect();
            let jac = seg_residual_jacobian(params, &x);
            let step = linalg::solve(&jac, &residual)?;
            update = 0.0;
            for i in 0..k {
                let next = (x[i] - step[i]).clamp(0.0, free);
                update = update.max((next - x[i]).abs());
                x[i] = next;
            }
        } else {
            let t = seg_fixed_point_map(params, &x);
            update = 0.0;
            for i in 0..k {
                let proposed = (1.0 - FIXED_POINT_DAMPING) * x[i] + FIXED_POINT_DAMPING * t[i];
                let next = proposed.clamp(0.0, free);
                update = update.max((next - x[i]).abs());
                x[i] = next;
            }
            if iterations % STALL_WINDOW == 0 {
                if update > 0.9 * window_start_update {
                    use_newton = true;
                }
                window_start_update = update;
            }
        }
        if update < tol {
            break;
        }
    }
    if update >= tol {
        return Err(EquilibriumError::NoConvergence {
            iterations,
            residual: update,
        });
    }
    // The damped iteration converges linearly, so an update below tol can
    // still leave an O(tol / (1 - rate)) error that the lambda-scaled
    // master residual amplifies. A short Newton finish removes it.
    iterations += newton_finish(params, &mut x, free)?;

    let lio = lio_from_hn(params, |i| x[i]);
    let ln = free - x.iter().sum::<f64>();
    if ln < -crate::model::FEASIBILITY_TOL {
        return Err(EquilibriumError::InfeasibleSolution(format!(
            "mu(l,n) = {ln}"
        )));
    }
    let dist = StateDistribution::new(params, x, lio)?;
    let residual = dynamics::residual_inf_norm(params, &dist)?;
    if residual > tol {
        return Err(EquilibriumError::NoConvergence {
            iterations,
            residual,
        });
    }
    Ok(SteadyState {
        dist,
        residual_inf_norm: residual,
        iterations,
        method: SteadyMethod::DampedFixedPoint,
    })
}

/// Kind-dispatching steady-state solver used by the front end. Segmented
/// markets with two assets use the curve intersection; other K fall back
/// to the damped fixed point.
pub fn solve_steady(params: &MarketParams, tol: f64) -> Result<SteadyState, EquilibriumError> {
    match params.kind() {
        ModelKind::NonSegmented => solve_nonseg_steady(params, tol),
        ModelKind::PartiallySegmented => {
            if params.num_assets() == 2 {
                solve_seg_steady_k2(params, tol)
            } else {
                solve_seg_steady_general(params, tol, 100_000)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_params, ParamSpec};

    fn table1_nonseg() -> MarketParams {
        make_params(
            ModelKind::NonSegmented,
            ParamSpec {
                lambda: vec![1250.0, 1250.0],
                gamma_u: Some(5.0),
                gamma_d: Some(0.5),
                gamma_ui: vec![5.0, 5.0],
                gamma_di: vec![0.5, 0.5],
                m: vec![0.4, 0.4],
                r: 0.05,
                delta_h: vec![1.0, 1.0],
                delta_d: vec![2.5, 2.5],
                q: 0.5,
                ..Default::default()
            },
        )
        .unwrap()
    }

    fn table1_seg() -> MarketParams {
        make_params(
            ModelKind::PartiallySegmented,
            ParamSpec {
                lambda: vec![1250.0, 1250.0],
                tgamma_ui: Some(vec![5.0, 5.0]),
                tgamma_di: Some(vec![0.5, 0.5]),
                gamma_ui: vec![5.0, 5.0],
                gamma_di: vec![0.5, 0.5],
                m: vec![0.4, 0.4],
                r: 0.05,
                delta_h: vec![1.0, 1.0],
                delta_d: vec![2.5, 2.5],
                q: 0.5,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn f_at_zero_is_entry_mass() {
        let p = table1_nonseg();
        assert!((eval_f(&p, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn f_at_free_mass_is_negative_below_bound() {
        let p = table1_nonseg();
        let free = 1.0 - p.sum_m();
        let f = eval_f(&p, free);
        assert!(f < -p.gamma_d() * free, "F({free}) = {f}");
    }

    #[test]
    fn nonseg_steady_matches_table1() {
        let p = table1_nonseg();
        let steady = solve_nonseg_steady(&p, DEFAULT_TOL).unwrap();
        let d = &steady.dist;
        assert!((d.mu_hn() - 0.11184374537443759).abs() < 1e-10);
        assert!((d.mu_lio(0) - 0.0013764181417642498).abs() < 1e-12);
        assert!((d.mu_hio(0) - 0.39862358185823575).abs() < 1e-12);
        assert!((d.mu_ln() - 0.08815625462556241).abs() < 1e-10);
        assert!(steady.residual_inf_norm < 1e-12);
    }

    #[test]
    fn seg_k2_steady_matches_table1() {
        let p = table1_seg();
        let steady = solve_seg_steady_k2(&p, DEFAULT_TOL).unwrap();
        let d = &steady.dist;
        assert!((d.mu_hin(0) - 0.07721733553669732).abs() < 1e-10);
        assert!((d.mu_hin(1) - 0.07721733553669732).abs() < 1e-10);
        assert!((d.mu_lio(0) - 0.0019603678427857982).abs() < 1e-12);
        assert!((d.mu_ln() - 0.045565328926605354).abs() < 1e-10);
        assert!(steady.residual_inf_norm < 1e-12);
    }

    #[test]
    fn seg_k2_symmetric_solution_is_symmetric() {
        let p = table1_seg();
        let steady = solve_seg_steady_k2(&p, DEFAULT_TOL).unwrap();
        assert!((steady.dist.mu_hin(0) - steady.dist.mu_hin(1)).abs() < 1e-12);
    }

    #[test]
    fn general_k_agrees_with_k2() {
        let p = table1_seg();
        let a = solve_seg_steady_k2(&p, DEFAULT_TOL).unwrap();
        let b = solve_seg_steady_general(&p, DEFAULT_TOL, 100_000).unwrap();
        assert!(a.dist.sup_distance(&b.dist) < 1e-10);
    }

    #[test]
    fn k3_symmetric_assets_equal() {
        let m = 0.8 / 3.0;
        let p = make_params(
            ModelKind::PartiallySegmented,
            ParamSpec {
                lambda: vec![1250.0; 3],
                tgamma_ui: Some(vec![5.0; 3]),
                tgamma_di: Some(vec![0.5; 3]),
                gamma_ui: vec![5.0; 3],
                gamma_di: vec![0.5; 3],
                m: vec![m; 3],
                r: 0.05,
                delta_h: vec![1.0; 3],
                delta_d: vec![2.5; 3],
                q: 0.5,
                ..Default::default()
            },
        )
        .unwrap();
        let steady = solve_seg_steady_general(&p, DEFAULT_TOL, 100_000).unwrap();
        let x0 = steady.dist.mu_hin(0);
        assert!((steady.dist.mu_hin(1) - x0).abs() < 1e-12);
        assert!((steady.dist.mu_hin(2) - x0).abs() < 1e-12);
    }
}
