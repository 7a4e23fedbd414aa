//! Finite-population continuous-time Markov-chain simulator.
//!
//! Simulates the investor-type dynamics exactly at the level of state
//! counts: every transition channel has an aggregate rate equal to the
//! occupancy times the per-agent intensity, with meeting channels coupled
//! through the empirical measure (`lambda_i * count_buyers * count_sellers / N`,
//! the finite-N counterpart of the quadratic mean-field terms). Used to
//! validate the ODE flow through its law-of-large-numbers limit.

use crate::dynamics::Trajectory;
use crate::model::{FullDistribution, MarketParams, ModelKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum McError {
    #[error("inconsistent initial counts: {0}")]
    InconsistentInitialCounts(String),
    #[error("sample grids differ at index {index}: {t_mc} vs {t_ode}")]
    TimeGridMismatch { index: usize, t_mc: f64, t_ode: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Integer occupancy per state, in the block layout of
/// [`FullDistribution`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountVec {
    pub kind: ModelKind,
    pub ln: u64,
    /// `(h,n)` count (length 1) or `(hi,n)` counts (length K).
    pub hn: Vec<u64>,
    pub hio: Vec<u64>,
    pub lio: Vec<u64>,
}

impl CountVec {
    pub fn total(&self) -> u64 {
        self.ln
            + self.hn.iter().sum::<u64>()
            + self.hio.iter().sum::<u64>()
            + self.lio.iter().sum::<u64>()
    }

    /// Empirical measure `counts / N`.
    pub fn empirical(&self) -> FullDistribution {
        let n = self.total() as f64;
        FullDistribution {
            kind: self.kind,
            ln: self.ln as f64 / n,
            hn: self.hn.iter().map(|&c| c as f64 / n).collect(),
            hio: self.hio.iter().map(|&c| c as f64 / n).collect(),
            lio: self.lio.iter().map(|&c| c as f64 / n).collect(),
        }
    }
}

/// Rounds a feasible distribution into a count vector of population `n`:
/// owner totals are `round(n * m_i)`, occupancies are rounded to nearest
/// and the `(l,n)` pool absorbs the remainder so the total is exactly `n`.
pub fn counts_from_distribution(
    params: &MarketParams,
    dist: &crate::model::StateDistribution,
    n: u64,
) -> Result<CountVec, McError> {
    if params.kind() != dist.kind() {
        return Err(McError::InvalidInput("kind mismatch".into()));
    }
    let k = params.num_assets();
    let nf = n as f64;
    let mut owners = Vec::with_capacity(k);
    let mut lio = Vec::with_capacity(k);
    for i in 0..k {
        let oi = (nf * params.m()[i]).round() as u64;
        let li = ((nf * dist.mu_lio(i)).round() as u64).min(oi);
        owners.push(oi);
        lio.push(li);
    }
    let hio: Vec<u64> = owners.iter().zip(&lio).map(|(o, l)| o - l).collect();
    let owned_total: u64 = owners.iter().sum();
    if owned_total > n {
        return Err(McError::InconsistentInitialCounts(format!(
            "owner counts {owned_total} exceed population {n}"
        )));
    }
    let pool = n - owned_total;
    let mut hn: Vec<u64> = dist
        .hn_coords()
        .iter()
        .map(|&v| (nf * v).round() as u64)
        .collect();
    // Trim rounding overflow of the non-owner block, largest entries first.
    let mut hn_total: u64 = hn.iter().sum();
    while hn_total > pool {
        let idx = hn
            .iter()
            .enumerate()
            .max_by_key(|(_, &c)| c)
            .map(|(i, _)| i)
            .unwrap();
        hn[idx] -= 1;
        hn_total -= 1;
    }
    Ok(CountVec {
        kind: params.kind(),
        ln: pool - hn_total,
        hn,
        hio,
        lio,
    })
}

/// One transition channel: an aggregate rate plus a count update.
struct Channel {
    rate: f64,
    apply: fn(&mut CountVec, usize),
    asset: usize,
}

fn channels(params: &MarketParams, counts: &CountVec, out: &mut Vec<Channel>) {
    out.clear();
    let n = counts.total() as f64;
    let k = params.num_assets();
    match params.kind() {
        ModelKind::NonSegmented => {
            for i in 0..k {
                out.push(Channel {
                    rate: params.lambda()[i] * counts.hn[0] as f64 * counts.lio[i] as f64 / n,
                    apply: |c, i| {
                        c.hn[0] -= 1;
                        c.lio[i] -= 1;
                        c.hio[i] += 1;
                        c.ln += 1;
                    },
                    asset: i,
                });
                out.push(Channel {
                    rate: params.gamma_ui()[i] * counts.lio[i] as f64,
                    apply: |c, i| {
                        c.lio[i] -= 1;
                        c.hio[i] += 1;
                    },
                    asset: i,
                });
                out.push(Channel {
                    rate: params.gamma_di()[i] * counts.hio[i] as f64,
                    apply: |c, i| {
                        c.hio[i] -= 1;
                        c.lio[i] += 1;
                    },
                    asset: i,
                });
            }
            out.push(Channel {
                rate: params.gamma_u() * counts.ln as f64,
                apply: |c, _| {
                    c.ln -= 1;
                    c.hn[0] += 1;
                },
                asset: 0,
            });
            out.push(Channel {
                rate: params.gamma_d() * counts.hn[0] as f64,
                apply: |c, _| {
                    c.hn[0] -= 1;
                    c.ln += 1;
                },
                asset: 0,
            });
        }
        ModelKind::PartiallySegmented => {
            for i in 0..k {
                out.push(Channel {
                    rate: params.lambda()[i] * counts.hn[i] as f64 * counts.lio[i] as f64 / n,
                    apply: |c, i| {
                        c.hn[i] -= 1;
                        c.lio[i] -= 1;
                        c.hio[i] += 1;
                        c.ln += 1;
                    },
                    asset: i,
                });
                out.push(Channel {
                    rate: params.gamma_ui()[i] * counts.lio[i] as f64,
                    apply: |c, i| {
                        c.lio[i] -= 1;
                        c.hio[i] += 1;
                    },
                    asset: i,
                });
                out.push(Channel {
                    rate: params.gamma_di()[i] * counts.hio[i] as f64,
                    apply: |c, i| {
                        c.hio[i] -= 1;
                        c.lio[i] += 1;
                    },
                    asset: i,
                });
                out.push(Channel {
                    rate: params.tgamma_ui()[i] * counts.ln as f64,
                    apply: |c, i| {
                        c.ln -= 1;
                        c.hn[i] += 1;
                    },
                    asset: i,
                });
                out.push(Channel {
                    rate: params.tgamma_di()[i] * counts.hn[i] as f64,
                    apply: |c, i| {
                        c.hn[i] -= 1;
                        c.ln += 1;
                    },
                    asset: i,
                });
            }
        }
    }
}

/// Live state of one simulated population: occupancy counts, the clock
/// and the seed its path is reproducible from.
#[derive(Debug, Clone)]
pub struct Population {
    n: u64,
    counts: CountVec,
    time: f64,
    rng_seed: u64,
}

impl Population {
    /// Validates the initial counts (population conserved, per-asset
    /// owner counts equal to `round(N m_i)`) and wraps them.
    pub fn new(
        params: &MarketParams,
        counts: CountVec,
        rng_seed: u64,
    ) -> Result<Self, McError> {
        let n = validate_initial(params, &counts)?;
        Ok(Population {
            n,
            counts,
            time: 0.0,
            rng_seed,
        })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn counts(&self) -> &CountVec {
        &self.counts
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }
}

/// Empirical-measure samples of one simulated population path.
#[derive(Debug, Clone)]
pub struct McTrajectory {
    pub times: Vec<f64>,
    pub measures: Vec<FullDistribution>,
    pub n_events: u64,
}

fn validate_initial(params: &MarketParams, initial: &CountVec) -> Result<u64, McError> {
    if initial.kind != params.kind() {
        return Err(McError::InconsistentInitialCounts(
            "count vector kind does not match parameters".into(),
        ));
    }
    let k = params.num_assets();
    let expect_hn = match params.kind() {
        ModelKind::NonSegmented => 1,
        ModelKind::PartiallySegmented => k,
    };
    if initial.hn.len() != expect_hn || initial.hio.len() != k || initial.lio.len() != k {
        return Err(McError::InconsistentInitialCounts(
            "count vector block lengths do not match K".into(),
        ));
    }
    let n = initial.total();
    if n == 0 {
        return Err(McError::InconsistentInitialCounts("empty population".into()));
    }
    for i in 0..k {
        let owners = initial.hio[i] + initial.lio[i];
        let expected = ((n as f64) * params.m()[i]).round() as u64;
        if owners != expected {
            return Err(McError::InconsistentInitialCounts(format!(
                "asset {} owner count {owners} differs from round(N m_i) = {expected}",
                i + 1
            )));
        }
    }
    Ok(n)
}

/// Exact-event simulation of the population chain, recording the
/// empirical measure on a uniform grid of `n_samples` intervals over
/// `[0, t_end]`. The same seed always reproduces the same event sequence.
pub fn simulate(
    params: &MarketParams,
    initial: &CountVec,
    t_end: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McTrajectory, McError> {
    if !(t_end > 0.0) || n_samples == 0 {
        return Err(McError::InvalidInput(
            "t_end and n_samples must be positive".into(),
        ));
    }
    let mut pop = Population::new(params, initial.clone(), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample_times: Vec<f64> = (0..=n_samples)
        .map(|j| t_end * j as f64 / n_samples as f64)
        .collect();

    let mut times = Vec::with_capacity(sample_times.len());
    let mut measures = Vec::with_capacity(sample_times.len());
    times.push(0.0);
    measures.push(pop.counts.empirical());
    let mut next_sample = 1usize;

    let mut chans: Vec<Channel> = Vec::new();
    let mut n_events = 0u64;

    loop {
        channels(params, &pop.counts, &mut chans);
        let total_rate: f64 = chans.iter().map(|c| c.rate).sum();
        if total_rate <= 0.0 {
            break; // absorbed: state holds until t_end
        }
        let u: f64 = rng.gen();
        let dt = -(1.0 - u).ln() / total_rate;
        let t_next = pop.time + dt;
        while next_sample < sample_times.len() && sample_times[next_sample] < t_next {
            times.push(sample_times[next_sample]);
            measures.push(pop.counts.empirical());
            next_sample += 1;
        }
        if t_next >= t_end {
            break;
        }
        let mut pick = rng.gen::<f64>() * total_rate;
        let mut chosen = chans.len() - 1;
        for (idx, c) in chans.iter().enumerate() {
            pick -= c.rate;
            if pick <= 0.0 {
                chosen = idx;
                break;
            }
        }
        (chans[chosen].apply)(&mut pop.counts, chans[chosen].asset);
        n_events += 1;
        pop.time = t_next;
    }

    while next_sample < sample_times.len() {
        times.push(sample_times[next_sample]);
        measures.push(pop.counts.empirical());
        next_sample += 1;
    }

    Ok(McTrajectory {
        times,
        measures,
        n_events,
    })
}

/// Per-time sup-norm gaps between an empirical trajectory and the ODE
/// solution on the same grid.
#[derive(Debug, Clone)]
pub struct LlnReport {
    pub gaps: Vec<f64>,
    pub max_gap: f64,
}

/// Compares aligned sample grids; errors if the grids differ.
pub fn lln_error(mc: &McTrajectory, ode: &Trajectory) -> Result<LlnReport, McError> {
    if mc.times.len() != ode.times().len() {
        return Err(McError::TimeGridMismatch {
            index: mc.times.len().min(ode.times().len()),
            t_mc: f64::NAN,
            t_ode: f64::NAN,
        });
    }
    let mut gaps = Vec::with_capacity(mc.times.len());
    for (idx, (&tm, &to)) in mc.times.iter().zip(ode.times()).enumerate() {
        if (tm - to).abs() > 1e-9 {
            return Err(McError::TimeGridMismatch {
                index: idx,
                t_mc: tm,
                t_ode: to,
            });
        }
        let ode_full = ode.states()[idx]
            .full_distribution()
            .map_err(|e| McError::InvalidInput(e.to_string()))?;
        gaps.push(mc.measures[idx].sup_distance(&ode_full));
    }
    let max_gap = gaps.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(LlnReport { gaps, max_gap })
}
