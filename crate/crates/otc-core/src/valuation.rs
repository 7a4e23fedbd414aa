//! Reservation-value systems, equilibrium prices and intrinsic values.
//!
//! At a steady state the intrinsic values solve a linear system
//! `M Delta = delta` in the reservation coordinates `Delta^0`, `Delta^e`
//! (one per asset when segmented), `Delta^h_i` and `Delta^l_i`. Prices
//! are the bargaining-weighted combination
//! `P_i = (1-q) Delta^l_i + q Delta^h_i`. The module also evaluates the
//! value ODE right-hand sides, used both as a steady-state residual check
//! and for transient backward integration along a distribution flow.

use crate::dynamics::{DynamicsError, Trajectory};
use crate::linalg::{self, Mat};
use crate::model::{MarketParams, ModelError, ModelKind, StateDistribution, SteadyState};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ValuationError {
    #[error("value system is singular: {0}")]
    SingularMatrix(linalg::LinAlgError),
    #[error("distribution kind {dist:?} does not match parameter kind {params:?}")]
    KindMismatch { dist: ModelKind, params: ModelKind },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Reservation-value coordinates of the equilibrium linear system.
#[derive(Debug, Clone)]
pub struct DeltaVector {
    pub kind: ModelKind,
    /// `Delta^0 = V(l,n)`.
    pub delta0: f64,
    /// `Delta^e` (length 1) or `Delta^e_i` (length K).
    pub delta_e: Vec<f64>,
    /// Buyer reservation values `Delta^h_i`.
    pub delta_h: Vec<f64>,
    /// Seller reservation values `Delta^l_i`.
    pub delta_l: Vec<f64>,
}

impl DeltaVector {
    fn from_flat(kind: ModelKind, k: usize, x: &[f64]) -> Self {
        let ne = match kind {
            ModelKind::NonSegmented => 1,
            ModelKind::PartiallySegmented => k,
        };
        DeltaVector {
            kind,
            delta0: x[0],
            delta_e: x[1..1 + ne].to_vec(),
            delta_h: x[1 + ne..1 + ne + k].to_vec(),
            delta_l: x[1 + ne + k..1 + ne + 2 * k].to_vec(),
        }
    }

    /// Assets whose seller reservation value exceeds the buyer's, which
    /// would put the negotiated price outside the bargaining range.
    pub fn inverted_spreads(&self) -> Vec<usize> {
        self.delta_h
            .iter()
            .zip(&self.delta_l)
            .enumerate()
            .filter(|(_, (h, l))| l > h)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Intrinsic values per state, in the same block layout as
/// [`crate::model::FullDistribution`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValueMap {
    pub kind: ModelKind,
    pub ln: f64,
    /// `V(h,n)` (length 1) or `V(hi,n)` (length K).
    pub hn: Vec<f64>,
    pub hio: Vec<f64>,
    pub lio: Vec<f64>,
}

impl ValueMap {
    pub fn zeros(kind: ModelKind, k: usize) -> Self {
        let nh = match kind {
            ModelKind::NonSegmented => 1,
            ModelKind::PartiallySegmented => k,
        };
        ValueMap {
            kind,
            ln: 0.0,
            hn: vec![0.0; nh],
            hio: vec![0.0; k],
            lio: vec![0.0; k],
        }
    }

    /// Values implied by a reservation-value solution.
    pub fn from_deltas(deltas: &DeltaVector) -> Self {
        let k = deltas.delta_h.len();
        match deltas.kind {
            ModelKind::NonSegmented => {
                let hn = deltas.delta0 + deltas.delta_e[0];
                ValueMap {
                    kind: deltas.kind,
                    ln: deltas.delta0,
                    hn: vec![hn],
                    hio: (0..k).map(|i| hn + deltas.delta_h[i]).collect(),
                    lio: (0..k).map(|i| deltas.delta0 + deltas.delta_l[i]).collect(),
                }
            }
            ModelKind::PartiallySegmented => {
                let hn: Vec<f64> = (0..k).map(|i| deltas.delta0 + deltas.delta_e[i]).collect();
                ValueMap {
                    kind: deltas.kind,
                    ln: deltas.delta0,
                    hio: (0..k).map(|i| hn[i] + deltas.delta_h[i]).collect(),
                    lio: (0..k).map(|i| deltas.delta0 + deltas.delta_l[i]).collect(),
                    hn,
                }
            }
        }
    }

    /// Buyer/seller reservation spreads implied by the values, and the
    /// prices they negotiate at bargaining power `q`.
    pub fn prices(&self, q: f64) -> Vec<f64> {
        let k = self.lio.len();
        (0..k)
            .map(|i| {
                let hn = match self.kind {
                    ModelKind::NonSegmented => self.hn[0],
                    ModelKind::PartiallySegmented => self.hn[i],
                };
                let dh = self.hio[i] - hn;
                let dl = self.lio[i] - self.ln;
                (1.0 - q) * dl + q * dh
            })
            .collect()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.ln];
        v.extend_from_slice(&self.hn);
        v.extend_from_slice(&self.hio);
        v.extend_from_slice(&self.lio);
        v
    }

    pub fn sup_norm(&self) -> f64 {
        self.to_vec().iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &ValueMap) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    fn axpy(&mut self, scale: f64, other: &ValueMap) {
        self.ln += scale * other.ln;
        for (a, b) in self.hn.iter_mut().zip(&other.hn) {
            *a += scale * b;
        }
        for (a, b) in self.hio.iter_mut().zip(&other.hio) {
            *a += scale * b;
        }
        for (a, b) in self.lio.iter_mut().zip(&other.lio) {
            *a += scale * b;
        }
    }
}

/// Trade-flow coefficient `M_i = lambda_i mu(li,o) (1-q)` shared by both
/// matrix builders.
fn trade_coeff(params: &MarketParams, dist: &StateDistribution, i: usize) -> f64 {
    params.lambda()[i] * dist.mu_lio(i) * (1.0 - params.q())
}

/// Assembles the `(2K+2)` reservation-value system of a non-segmented
/// market at the given distribution. Row order: `Delta^0`, `Delta^e`,
/// the `Delta^h_i` block, the `Delta^l_i` block.
pub fn build_matrix_nonseg(params: &MarketParams, dist: &StateDistribution) -> (Mat, Vec<f64>) {
    assert_eq!(params.kind(), ModelKind::NonSegmented);
    assert_eq!(dist.kind(), ModelKind::NonSegmented);
    let k = params.num_assets();
    let n = 2 * k + 2;
    let r = params.r();
    let mut m = Mat::zeros(n, n);
    let mut rhs = vec![0.0; n];

    m[(0, 0)] = r;
    m[(0, 1)] = -params.gamma_u();

    m[(1, 1)] = r + params.gamma();
    for j in 0..k {
        let mj = trade_coeff(params, dist, j);
        m[(1, 2 + j)] = -mj;
        m[(1, 2 + k + j)] = mj;
    }

    for i in 0..k {
        let row = 2 + i;
        let mi = trade_coeff(params, dist, i);
        let psi_di = params.gamma_di()[i] + mi;
        m[(row, 1)] = params.gamma_di()[i] - params.gamma_d();
        for j in 0..k {
            let mj = trade_coeff(params, dist, j);
            if j == i {
                m[(row, 2 + j)] = r + psi_di;
                m[(row, 2 + k + j)] = -psi_di;
            } else {
                m[(row, 2 + j)] = mj;
                m[(row, 2 + k + j)] = -mj;
            }
        }
        rhs[row] = params.delta_h()[i];
    }

    for i in 0..k {
        let row = 2 + k + i;
        let psi_ui = params.gamma_ui()[i] + params.lambda()[i] * dist.mu_hn() * params.q();
        m[(row, 1)] = params.gamma_u() - params.gamma_ui()[i];
        m[(row, 2 + i)] = -psi_ui;
        m[(row, 2 + k + i)] = r + psi_ui;
        rhs[row] = params.delta_h()[i] - params.delta_d()[i];
    }

    (m, rhs)
}

/// Assembles the `(3K+1)` reservation-value system of a partially
/// segmented market. Row order: `Delta^0`, the `Delta^e_i` block, the
/// `Delta^h_i` block, the `Delta^l_i` block.
pub fn build_matrix_seg(params: &MarketParams, dist: &StateDistribution) -> (Mat, Vec<f64>) {
    assert_eq!(params.kind(), ModelKind::PartiallySegmented);
    assert_eq!(dist.kind(), ModelKind::PartiallySegmented);
    let k = params.num_assets();
    let n = 3 * k + 1;
    let r = params.r();
    let tu = params.tgamma_ui();
    let td = params.tgamma_di();
    let mut m = Mat::zeros(n, n);
    let mut rhs = vec![0.0; n];

    m[(0, 0)] = r;
    for j in 0..k {
        m[(0, 1 + j)] = -tu[j];
    }

    for i in 0..k {
        let row = 1 + i;
        let mi = trade_coeff(params, dist, i);
        for j in 0..k {
            m[(row, 1 + j)] = if j == i { r + params.tgamma_i(i) } else { tu[j] };
        }
        m[(row, 1 + k + i)] = -mi;
        m[(row, 1 + 2 * k + i)] = mi;
    }

    for i in 0..k {
        let row = 1 + k + i;
        let mi = trade_coeff(params, dist, i);
        let psi_di = params.gamma_di()[i] + mi;
        m[(row, 1 + i)] = params.gamma_di()[i] - td[i];
        m[(row, 1 + k + i)] = r + psi_di;
        m[(row, 1 + 2 * k + i)] = -psi_di;
        rhs[row] = params.delta_h()[i];
    }

    for i in 0..k {
        let row = 1 + 2 * k + i;
        let psi_ui = params.gamma_ui()[i] + params.lambda()[i] * dist.mu_hin(i) * params.q();
        for j in 0..k {
            m[(row, 1 + j)] = if j == i {
                tu[i] - params.gamma_ui()[i]
            } else {
                tu[j]
            };
        }
        m[(row, 1 + k + i)] = -psi_ui;
        m[(row, 1 + 2 * k + i)] = r + psi_ui;
        rhs[row] = params.delta_h()[i] - params.delta_d()[i];
    }

    (m, rhs)
}

/// Solves the assembled reservation-value system by LU with partial
/// pivoting; also returns a 1-norm condition estimate of the matrix.
pub fn solve_deltas(
    kind: ModelKind,
    k: usize,
    m: &Mat,
    delta: &[f64],
) -> Result<(DeltaVector, f64), ValuationError> {
    let x = linalg::solve(m, delta).map_err(ValuationError::SingularMatrix)?;
    let cond = linalg::condition_one_norm(m).map_err(ValuationError::SingularMatrix)?;
    Ok((DeltaVector::from_flat(kind, k, &x), cond))
}

/// Negotiated price per asset, `P_i = (1-q) Delta^l_i + q Delta^h_i`.
/// The second return lists assets with an inverted spread
/// (`Delta^l_i > Delta^h_i`), reported rather than silently accepted.
pub fn price_from_deltas(deltas: &DeltaVector, q: f64) -> (Vec<f64>, Vec<usize>) {
    let prices = deltas
        .delta_l
        .iter()
        .zip(&deltas.delta_h)
        .map(|(l, h)| (1.0 - q) * l + q * h)
        .collect();
    (prices, deltas.inverted_spreads())
}

/// Reservation values, prices and recovered intrinsic values at a steady
/// state.
#[derive(Debug, Clone)]
pub struct PriceReport {
    pub deltas: DeltaVector,
    pub prices: Vec<f64>,
    pub values: ValueMap,
    pub matrix_condition_estimate: f64,
    /// Sup norm of the steady value ODE right-hand side at the recovered
    /// values; near zero when the solve is consistent.
    pub value_residual: f64,
    pub inverted_spreads: Vec<usize>,
}

/// Full pricing pipeline at a solved steady state.
pub fn price_report(
    params: &MarketParams,
    steady: &SteadyState,
) -> Result<PriceReport, ValuationError> {
    if params.kind() != steady.dist.kind() {
        return Err(ValuationError::KindMismatch {
            dist: steady.dist.kind(),
            params: params.kind(),
        });
    }
    let (m, delta) = match params.kind() {
        ModelKind::NonSegmented => build_matrix_nonseg(params, &steady.dist),
        ModelKind::PartiallySegmented => build_matrix_seg(params, &steady.dist),
    };
    let (deltas, cond) = solve_deltas(params.kind(), params.num_assets(), &m, &delta)?;
    let (prices, inverted) = price_from_deltas(&deltas, params.q());
    let values = ValueMap::from_deltas(&deltas);
    let residual = value_rhs(params, &steady.dist, &values, &prices)?.sup_norm();
    Ok(PriceReport {
        deltas,
        prices,
        values,
        matrix_condition_estimate: cond,
        value_residual: residual,
        inverted_spreads: inverted,
    })
}

/// Right-hand sides of the intrinsic-value ODEs at a distribution,
/// values and price vector. Zero at the equilibrium values.
pub fn value_rhs(
    params: &MarketParams,
    dist: &StateDistribution,
    v: &ValueMap,
    prices: &[f64],
) -> Result<ValueMap, ValuationError> {
    if params.kind() != dist.kind() || params.kind() != v.kind {
        return Err(ValuationError::KindMismatch {
            dist: dist.kind(),
            params: params.kind(),
        });
    }
    if prices.len() != params.num_assets() {
        return Err(ValuationError::InvalidInput(format!(
            "expected {} prices, got {}",
            params.num_assets(),
            prices.len()
        )));
    }
    let k = params.num_assets();
    let r = params.r();
    let lambda = params.lambda();
    let mut out = ValueMap::zeros(params.kind(), k);

    match params.kind() {
        ModelKind::NonSegmented => {
            let gu = params.gamma_u();
            let gd = params.gamma_d();
            out.ln = -gu * v.hn[0] + (gu + r) * v.ln;
            let meet: f64 = (0..k).map(|i| lambda[i] * dist.mu_lio(i)).sum();
            let mut hn_dot = -gd * v.ln + (gd + r + meet) * v.hn[0];
            for i in 0..k {
                hn_dot -= (v.hio[i] - prices[i]) * lambda[i] * dist.mu_lio(i);
            }
            out.hn[0] = hn_dot;
            for i in 0..k {
                let (gui, gdi) = (params.gamma_ui()[i], params.gamma_di()[i]);
                out.hio[i] = (gdi + r) * v.hio[i] - gdi * v.lio[i] - params.delta_h()[i];
                let lam_hn = lambda[i] * dist.mu_hn();
                out.lio[i] = (gui + r + lam_hn) * v.lio[i]
                    - gui * v.hio[i]
                    - lam_hn * (v.ln + prices[i])
                    - (params.delta_h()[i] - params.delta_d()[i]);
            }
        }
        ModelKind::PartiallySegmented => {
            let tu = params.tgamma_ui();
            let td = params.tgamma_di();
            let tu_sum: f64 = tu.iter().sum();
            let mut ln_dot = (r + tu_sum) * v.ln;
            for i in 0..k {
                ln_dot -= tu[i] * v.hn[i];
            }
            out.ln = ln_dot;
            for i in 0..k {
                let lam_lio = lambda[i] * dist.mu_lio(i);
                out.hn[i] = -(v.hio[i] - prices[i]) * lam_lio - td[i] * v.ln
                    + (td[i] + r + lam_lio) * v.hn[i];
                let (gui, gdi) = (params.gamma_ui()[i], params.gamma_di()[i]);
                out.hio[i] = (gdi + r) * v.hio[i] - gdi * v.lio[i] - params.delta_h()[i];
                let lam_hin = lambda[i] * dist.mu_hin(i);
                out.lio[i] = (gui + r + lam_hin) * v.lio[i]
                    - gui * v.hio[i]
                    - lam_hin * (v.ln + prices[i])
                    - (params.delta_h()[i] - params.delta_d()[i]);
            }
        }
    }
    Ok(out)
}

/// Intrinsic values along a distribution trajectory.
#[derive(Debug, Clone)]
pub struct ValueTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<ValueMap>,
    /// Number of integration stages at which a spread was inverted.
    pub inverted_spread_events: usize,
}

/// Integrates the value ODEs backward from a terminal condition along a
/// distribution trajectory, recomputing the transient price at every
/// stage from the instantaneous reservation spreads.
///
/// Each interval between consecutive trajectory samples is covered by
/// `substeps` RK4 steps; the distribution is interpolated at stage times.
/// Returned samples are aligned with `mu_traj.times()`.
pub fn integrate_values_backward(
    params: &MarketParams,
    mu_traj: &Trajectory,
    terminal_v: &ValueMap,
    substeps: usize,
) -> Result<ValueTrajectory, ValuationError> {
    if params.kind() != terminal_v.kind {
        return Err(ValuationError::KindMismatch {
            dist: terminal_v.kind,
            params: params.kind(),
        });
    }
    if mu_traj.times().len() < 2 {
        return Err(ValuationError::InvalidInput(
            "trajectory must cover a time interval".into(),
        ));
    }
    let substeps = substeps.max(1);
    let times = mu_traj.times().to_vec();
    let n = times.len();
    let mut values = vec![terminal_v.clone(); n];
    let mut inverted = 0usize;

    let mut current = terminal_v.clone();
    for idx in (0..n - 1).rev() {
        let (t_lo, t_hi) = (times[idx], times[idx + 1]);
        let h = (t_lo - t_hi) / substeps as f64; // negative step
        let mut t = t_hi;
        for _ in 0..substeps {
            current = rk4_value_step(params, mu_traj, &current, t, h, &mut inverted)?;
            t += h;
        }
        values[idx] = current.clone();
    }

    Ok(ValueTrajectory {
        times,
        values,
        inverted_spread_events: inverted,
    })
}

fn rk4_value_step(
    params: &MarketParams,
    mu_traj: &Trajectory,
    v: &ValueMap,
    t: f64,
    h: f64,
    inverted: &mut usize,
) -> Result<ValueMap, ValuationError> {
    let stage = |v_stage: &ValueMap, t_stage: f64, inv: &mut usize| {
        let dist = mu_traj.interpolate(t_stage);
        let prices = v_stage.prices(params.q());
        let k = params.num_assets();
        for i in 0..k {
            let hn = match params.kind() {
                ModelKind::NonSegmented => v_stage.hn[0],
                ModelKind::PartiallySegmented => v_stage.hn[i],
            };
            if v_stage.lio[i] - v_stage.ln > v_stage.hio[i] - hn {
                *inv += 1;
            }
        }
        value_rhs(params, &dist, v_stage, &prices)
    };

    let k1 = stage(v, t, inverted)?;
    let mut v2 = v.clone();
    v2.axpy(0.5 * h, &k1);
    let k2 = stage(&v2, t + 0.5 * h, inverted)?;
    let mut v3 = v.clone();
    v3.axpy(0.5 * h, &k2);
    let k3 = stage(&v3, t + 0.5 * h, inverted)?;
    let mut v4 = v.clone();
    v4.axpy(h, &k3);
    let k4 = stage(&v4, t + h, inverted)?;

    let mut out = v.clone();
    out.axpy(h / 6.0, &k1);
    out.axpy(h / 3.0, &k2);
    out.axpy(h / 3.0, &k3);
    out.axpy(h / 6.0, &k4);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::{solve_steady, DEFAULT_TOL};
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
    fn table1_nonseg_price() {
        let p = table1_nonseg();
        let steady = solve_steady(&p, DEFAULT_TOL).unwrap();
        let report = price_report(&p, &steady).unwrap();
        assert!((report.prices[0] - 18.545134536733141).abs() < 1e-9);
        assert!((report.prices[1] - report.prices[0]).abs() < 1e-12);
        assert!(report.value_residual < 1e-9);
        assert!(report.inverted_spreads.is_empty());
    }

    #[test]
    fn table1_seg_price() {
        let p = table1_seg();
        let steady = solve_steady(&p, DEFAULT_TOL).unwrap();
        let report = price_report(&p, &steady).unwrap();
        assert!((report.prices[0] - 18.392968996919989).abs() < 1e-9);
        assert!((report.prices[1] - report.prices[0]).abs() < 1e-12);
        assert!(report.value_residual < 1e-9);
    }

    #[test]
    fn price_is_exact_convex_combination() {
        let deltas = DeltaVector {
            kind: ModelKind::NonSegmented,
            delta0: 0.0,
            delta_e: vec![0.0],
            delta_h: vec![12.0],
            delta_l: vec![10.0],
        };
        assert_eq!(price_from_deltas(&deltas, 0.0).0, vec![10.0]);
        assert_eq!(price_from_deltas(&deltas, 1.0).0, vec![12.0]);
        assert_eq!(price_from_deltas(&deltas, 0.5).0, vec![11.0]);
    }

    #[test]
    fn inverted_spread_is_flagged() {
        let deltas = DeltaVector {
            kind: ModelKind::NonSegmented,
            delta0: 0.0,
            delta_e: vec![0.0],
            delta_h: vec![9.0],
            delta_l: vec![10.0],
        };
        let (_, warn) = price_from_deltas(&deltas, 0.5);
        assert_eq!(warn, vec![0]);
    }

    #[test]
    fn homogeneous_system_has_zero_solution() {
        let p = table1_nonseg();
        let steady = solve_steady(&p, DEFAULT_TOL).unwrap();
        let (m, _) = build_matrix_nonseg(&p, &steady.dist);
        let zero = vec![0.0; m.n_rows()];
        let (deltas, _) = solve_deltas(ModelKind::NonSegmented, 2, &m, &zero).unwrap();
        assert!(deltas.delta0.abs() < 1e-14);
        assert!(deltas.delta_h.iter().all(|v| v.abs() < 1e-14));
        assert!(deltas.delta_l.iter().all(|v| v.abs() < 1e-14));
    }

    #[test]
    fn q_one_kills_delta_e() {
        // With q = 1 every trade coefficient M_i vanishes and the
        // Delta^e equation decouples to (r + gamma) Delta^e = 0.
        let spec = ParamSpec {
            lambda: vec![1250.0, 1250.0],
            gamma_u: Some(5.0),
            gamma_d: Some(0.5),
            gamma_ui: vec![5.0, 5.0],
            gamma_di: vec![0.5, 0.5],
            m: vec![0.4, 0.4],
            r: 0.05,
            delta_h: vec![1.0, 1.0],
            delta_d: vec![2.5, 2.5],
            q: 1.0,
            ..Default::default()
        };
        let p = make_params(ModelKind::NonSegmented, spec).unwrap();
        let steady = solve_steady(&p, DEFAULT_TOL).unwrap();
        let report = price_report(&p, &steady).unwrap();
        assert!(report.deltas.delta_e[0].abs() < 1e-14);
        assert!(report.deltas.delta0.abs() < 1e-14);
    }

    #[test]
    fn zero_values_zero_dividends_give_zero_rhs() {
        let spec = ParamSpec {
            lambda: vec![1250.0, 1250.0],
            gamma_u: Some(5.0),
            gamma_d: Some(0.5),
            gamma_ui: vec![5.0, 5.0],
            gamma_di: vec![0.5, 0.5],
            m: vec![0.4, 0.4],
            r: 0.05,
            delta_h: vec![0.0, 0.0],
            delta_d: vec![0.0, 0.0],
            q: 0.5,
            ..Default::default()
        };
        let p = make_params(ModelKind::NonSegmented, spec).unwrap();
        let steady = solve_steady(&p, DEFAULT_TOL).unwrap();
        let v = ValueMap::zeros(ModelKind::NonSegmented, 2);
        let rhs = value_rhs(&p, &steady.dist, &v, &[0.0, 0.0]).unwrap();
        assert_eq!(rhs.sup_norm(), 0.0);
    }

    #[test]
    fn backward_integration_from_steady_is_constant() {
        let p = table1_nonseg();
        let steady = solve_steady(&p, DEFAULT_TOL).unwrap();
        let report = price_report(&p, &steady).unwrap();
        let traj = Trajectory::constant(p.clone(), steady.dist.clone(), 1.0).unwrap();
        let vt = integrate_values_backward(&p, &traj, &report.values, 100).unwrap();
        for v in &vt.values {
            assert!(v.sup_distance(&report.values) < 1e-9);
        }
    }
}
