//! Master-equation right-hand sides and forward integration.
//!
//! The reduced coordinate layout matches [`StateDistribution::reduced_coords`]:
//! the high-type non-owner block first (`mu(h,n)` or `mu(hi,n)`), then the
//! `mu(li,o)` block.

use crate::model::{
    FullDistribution, MarketParams, ModelError, ModelKind, StateDistribution,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("distribution kind {dist:?} does not match parameter kind {params:?}")]
    KindMismatch { dist: ModelKind, params: ModelKind },
    #[error("coordinate `{name}` left the feasible band at t = {t} (value {value})")]
    InfeasibleDuringIntegration { name: String, t: f64, value: f64 },
    #[error("invalid integration setup: {0}")]
    InvalidSetup(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn check_kinds(params: &MarketParams, dist: &StateDistribution) -> Result<(), DynamicsError> {
    if params.kind() != dist.kind() {
        return Err(DynamicsError::KindMismatch {
            dist: dist.kind(),
            params: params.kind(),
        });
    }
    Ok(())
}

/// Time derivatives `(mu'(h,n), mu'(l1,o), ..., mu'(lK,o))` of the reduced
/// non-segmented master system.
pub fn rhs_nonseg(
    params: &MarketParams,
    dist: &StateDistribution,
) -> Result<Vec<f64>, DynamicsError> {
    if params.kind() != ModelKind::NonSegmented {
        return Err(DynamicsError::KindMismatch {
            dist: dist.kind(),
            params: params.kind(),
        });
    }
    check_kinds(params, dist)?;
    let k = params.num_assets();
    let hn = dist.mu_hn();
    let ln = dist.mu_ln();
    let lambda = params.lambda();
    let meet: f64 = (0..k).map(|i| lambda[i] * dist.mu_lio(i)).sum();
    let mut out = Vec::with_capacity(1 + k);
    out.push(-hn * meet + params.gamma_u() * ln - params.gamma_d() * hn);
    for i in 0..k {
        out.push(
            -lambda[i] * hn * dist.mu_lio(i) - params.gamma_ui()[i] * dist.mu_lio(i)
                + params.gamma_di()[i] * dist.mu_hio(i),
        );
    }
    Ok(out)
}

/// Time derivatives `(mu'(h1,n), ..., mu'(hK,n), mu'(l1,o), ..., mu'(lK,o))`
/// of the reduced partially segmented master system.
pub fn rhs_seg(
    params: &MarketParams,
    dist: &StateDistribution,
) -> Result<Vec<f64>, DynamicsError> {
    if params.kind() != ModelKind::PartiallySegmented {
        return Err(DynamicsError::KindMismatch {
            dist: dist.kind(),
            params: params.kind(),
        });
    }
    check_kinds(params, dist)?;
    let k = params.num_assets();
    let ln = dist.mu_ln();
    let lambda = params.lambda();
    let (tu, td) = (params.tgamma_ui(), params.tgamma_di());
    let mut out = Vec::with_capacity(2 * k);
    for i in 0..k {
        out.push(
            -lambda[i] * dist.mu_hin(i) * dist.mu_lio(i) + tu[i] * ln - td[i] * dist.mu_hin(i),
        );
    }
    for i in 0..k {
        out.push(
            -lambda[i] * dist.mu_hin(i) * dist.mu_lio(i) - params.gamma_ui()[i] * dist.mu_lio(i)
                + params.gamma_di()[i] * dist.mu_hio(i),
        );
    }
    Ok(out)
}

/// Kind-dispatching right-hand side on reduced coordinates.
pub fn rhs(params: &MarketParams, dist: &StateDistribution) -> Result<Vec<f64>, DynamicsError> {
    match params.kind() {
        ModelKind::NonSegmented => rhs_nonseg(params, dist),
        ModelKind::PartiallySegmented => rhs_seg(params, dist),
    }
}

/// Derivatives of every state of the full (unreduced) system. The
/// eliminated equations are the exact negations of the retained ones, so
/// the reconstructed derivative vector sums to zero identically.
pub fn full_rhs(
    params: &MarketParams,
    dist: &StateDistribution,
) -> Result<FullDistribution, DynamicsError> {
    let reduced = rhs(params, dist)?;
    let k = params.num_assets();
    let nh = reduced.len() - k;
    let hn = reduced[..nh].to_vec();
    let lio = reduced[nh..].to_vec();
    let ln = -hn.iter().sum::<f64>();
    let hio = lio.iter().map(|v| -v).collect();
    Ok(FullDistribution {
        kind: params.kind(),
        ln,
        hn,
        hio,
        lio,
    })
}

/// Sup norm of the reduced right-hand side; zero at a steady state.
pub fn residual_inf_norm(
    params: &MarketParams,
    dist: &StateDistribution,
) -> Result<f64, DynamicsError> {
    Ok(rhs(params, dist)?
        .iter()
        .fold(0.0, |acc, v| acc.max(v.abs())))
}

/// A forward solution of the master equation sampled on a time grid.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    states: Vec<StateDistribution>,
    params: MarketParams,
}

impl Trajectory {
    /// Builds a trajectory from aligned samples. Times must be strictly
    /// increasing.
    pub fn from_samples(
        params: MarketParams,
        times: Vec<f64>,
        states: Vec<StateDistribution>,
    ) -> Result<Self, DynamicsError> {
        if times.len() != states.len() {
            return Err(DynamicsError::InvalidSetup(
                "times and states must have equal length".into(),
            ));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DynamicsError::InvalidSetup(
                "times must be strictly increasing".into(),
            ));
        }
        Ok(Trajectory {
            times,
            states,
            params,
        })
    }

    /// A trajectory that holds one state over `[0, t_end]`. Useful for
    /// steady-state value integrations.
    pub fn constant(
        params: MarketParams,
        state: StateDistribution,
        t_end: f64,
    ) -> Result<Self, DynamicsError> {
        Trajectory::from_samples(params, vec![0.0, t_end], vec![state.clone(), state])
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[StateDistribution] {
        &self.states
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn last(&self) -> &StateDistribution {
        self.states.last().expect("trajectory is never empty")
    }

    /// State at time `t` by linear interpolation of the reduced
    /// coordinates; clamps to the ends outside the sampled range.
    pub fn interpolate(&self, t: f64) -> StateDistribution {
        if t <= self.times[0] {
            return self.states[0].clone();
        }
        if t >= *self.times.last().unwrap() {
            return self.last().clone();
        }
        let idx = match self
            .times
            .binary_search_by(|probe| probe.total_cmp(&t))
        {
            Ok(i) => return self.states[i].clone(),
            Err(i) => i,
        };
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let w = (t - t0) / (t1 - t0);
        let a = self.states[idx - 1].reduced_coords();
        let b = self.states[idx].reduced_coords();
        let coords: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + w * (y - x)).collect();
        StateDistribution::from_reduced(&self.params, &coords)
            .expect("interpolant of feasible states is feasible")
    }
}

/// Overshoots up to this band past a feasibility bound are treated as
/// integrator round-off and clamped; beyond it the integration aborts.
const ABORT_BAND: f64 = 1e-6;

/// Fixed-step RK4 flow of the master equation.
///
/// Records the initial state, then every `record_every`-th accepted step,
/// and always the final state; the last step is shortened when `t_end` is
/// not a multiple of `dt`. Tiny constraint overshoots are clamped, larger
/// ones abort.
pub fn integrate(
    params: &MarketParams,
    initial: &StateDistribution,
    t_end: f64,
    dt: f64,
    record_every: usize,
) -> Result<Trajectory, DynamicsError> {
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(DynamicsError::InvalidSetup(
            "dt and t_end must be positive".into(),
        ));
    }
    check_kinds(params, initial)?;
    let record_every = record_every.max(1);

    let deriv = |coords: &[f64]| -> Result<Vec<f64>, DynamicsError> {
        let dist = StateDistribution::from_reduced(params, coords)?;
        rhs(params, &dist)
    };

    let mut y = initial.reduced_coords();
    let mut times = vec![0.0];
    let mut states = vec![initial.clone()];

    // Step times come from multiplication, not accumulation, so the
    // number of steps and the sample grid are exact.
    let n_steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    for step in 1..=n_steps {
        let t_prev = (step - 1) as f64 * dt;
        let t_next = if step == n_steps { t_end } else { step as f64 * dt };
        let h = t_next - t_prev;
        let k1 = deriv(&y)?;
        let y2: Vec<f64> = y.iter().zip(&k1).map(|(v, k)| v + 0.5 * h * k).collect();
        let k2 = deriv(&y2)?;
        let y3: Vec<f64> = y.iter().zip(&k2).map(|(v, k)| v + 0.5 * h * k).collect();
        let k3 = deriv(&y3)?;
        let y4: Vec<f64> = y.iter().zip(&k3).map(|(v, k)| v + h * k).collect();
        let k4 = deriv(&y4)?;
        for i in 0..y.len() {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        clamp_feasible(params, &mut y, t_next)?;
        if step == n_steps || step % record_every == 0 {
            times.push(t_next);
            states.push(StateDistribution::from_reduced(params, &y)?);
        }
    }

    Trajectory::from_samples(params.clone(), times, states)
}

/// Clamps reduced coordinates (and the bounds implied by the derived
/// states) back into the feasible set, or errors when the overshoot
/// exceeds the abort band.
fn clamp_feasible(params: &MarketParams, y: &mut [f64], t: f64) -> Result<(), DynamicsError> {
    let k = params.num_assets();
    let nh = y.len() - k;
    let free_mass = 1.0 - params.sum_m();

    let clamp = |value: &mut f64, lo: f64, hi: f64, name: &str| {
        if *value < lo {
            if *value < lo - ABORT_BAND {
                return Err(DynamicsError::InfeasibleDuringIntegration {
                    name: name.to_string(),
                    t,
                    value: *value,
                });
            }
            *value = lo;
        } else if *value > hi {
            if *value > hi + ABORT_BAND {
                return Err(DynamicsError::InfeasibleDuringIntegration {
                    name: name.to_string(),
                    t,
                    value: *value,
                });
            }
            *value = hi;
        }
        Ok(())
    };

    for i in 0..nh {
        clamp(&mut y[i], 0.0, free_mass, &format!("hn[{i}]"))?;
    }
    for i in 0..k {
        clamp(&mut y[nh + i], 0.0, params.m()[i], &format!("lio[{i}]"))?;
    }
    // The hn block shares the non-owner pool; rescale if its sum overshoots.
    let hn_sum: f64 = y[..nh].iter().sum();
    if hn_sum > free_mass {
        if hn_sum > free_mass + ABORT_BAND {
            return Err(DynamicsError::InfeasibleDuringIntegration {
                name: "sum(hn)".to_string(),
                t,
                value: hn_sum,
            });
        }
        let scale = free_mass / hn_sum;
        for v in &mut y[..nh] {
            *v *= scale;
        }
    }
    Ok(())
}
