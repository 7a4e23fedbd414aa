//! The six front-end commands. Each one takes a parsed config plus the
//! global options and renders a CSV document (schema version in a
//! leading comment line).

use crate::config::RunConfig;
use crate::error::CliError;
use otc_core::dynamics::integrate;
use otc_core::equilibrium::solve_steady;
use otc_core::mcsim::{counts_from_distribution, lln_error, simulate};
use otc_core::stability::{stability_report, Verdict};
use otc_core::valuation::price_report;
use otc_core::{MarketParams, ModelKind, StateDistribution, SteadyState};
use std::fmt::Write as _;

/// Global command options from the command line.
#[derive(Debug, Clone)]
pub struct Options {
    /// Solver tolerance (master-equation residual).
    pub tol: f64,
    /// Round output values to this many decimals (half-even); full
    /// precision when absent.
    pub round: Option<usize>,
    /// Overrides the config seed list with a single seed.
    pub seed: Option<u64>,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            tol: 1e-12,
            round: None,
            seed: None,
        }
    }
}

fn round_half_even(x: f64, digits: usize) -> f64 {
    let scale = 10f64.powi(digits as i32);
    (x * scale).round_ties_even() / scale
}

fn fmt_val(x: f64, opts: &Options) -> String {
    match opts.round {
        Some(d) => format!("{:.*}", d, round_half_even(x, d)),
        None => format!("{x}"),
    }
}

fn kind_label(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::NonSegmented => "non-segmented",
        ModelKind::PartiallySegmented => "partially-segmented",
    }
}

/// Default transient start: every owner low-type, no active buyers.
fn default_initial(params: &MarketParams) -> StateDistribution {
    let nh = match params.kind() {
        ModelKind::NonSegmented => 1,
        ModelKind::PartiallySegmented => params.num_assets(),
    };
    StateDistribution::new(params, vec![0.0; nh], params.m().to_vec())
        .expect("all-low-owner start is feasible")
}

fn solve(params: &MarketParams, opts: &Options) -> Result<SteadyState, CliError> {
    Ok(solve_steady(params, opts.tol)?)
}

/// Steady-state proportions, one row per asset plus a summary row.
pub fn cmd_steady(config: &RunConfig, opts: &Options) -> Result<String, CliError> {
    let kind = config.single_kind()?;
    let params = config.market_params(kind)?;
    let steady = solve(&params, opts)?;
    let full = steady
        .dist
        .full_distribution()
        .map_err(|e| CliError::Numerical(e.to_string()))?;
    let k = params.num_assets();

    let mut out = String::new();
    out.push_str("# otc steady v1\n");
    out.push_str("asset,mu_hi_n,mu_h_n,mu_li_o,mu_hi_o,mu_l_n\n");
    for i in 0..k {
        let (hin, hn) = match kind {
            ModelKind::NonSegmented => (String::new(), fmt_val(full.hn[0], opts)),
            ModelKind::PartiallySegmented => (fmt_val(full.hn[i], opts), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            i + 1,
            hin,
            hn,
            fmt_val(full.lio[i], opts),
            fmt_val(full.hio[i], opts),
            fmt_val(full.ln, opts)
        );
    }
    let hin_sum = match kind {
        ModelKind::NonSegmented => String::new(),
        ModelKind::PartiallySegmented => fmt_val(full.hn.iter().sum::<f64>(), opts),
    };
    let _ = writeln!(
        out,
        "sum,{},,{},{},",
        hin_sum,
        fmt_val(full.lio.iter().sum::<f64>(), opts),
        fmt_val(full.hio.iter().sum::<f64>(), opts),
    );
    Ok(out)
}

/// Reservation values, prices and recovered intrinsic values.
pub fn cmd_price(config: &RunConfig, opts: &Options) -> Result<String, CliError> {
    let kind = config.single_kind()?;
    let params = config.market_params(kind)?;
    let steady = solve(&params, opts)?;
    let report = price_report(&params, &steady)?;
    let k = params.num_assets();

    let mut out = String::new();
    out.push_str("# otc price v1\n");
    if !report.inverted_spreads.is_empty() {
        let assets: Vec<String> = report
            .inverted_spreads
            .iter()
            .map(|i| (i + 1).to_string())
            .collect();
        let _ = writeln!(out, "# warning: inverted spread on assets {}", assets.join(" "));
    }
    out.push_str("asset,delta_l,delta_h,price,v_ln,v_hn,v_hio,v_lio,condition\n");
    for i in 0..k {
        let v_hn = match kind {
            ModelKind::NonSegmented => report.values.hn[0],
            ModelKind::PartiallySegmented => report.values.hn[i],
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            i + 1,
            fmt_val(report.deltas.delta_l[i], opts),
            fmt_val(report.deltas.delta_h[i], opts),
            fmt_val(report.prices[i], opts),
            fmt_val(report.values.ln, opts),
            fmt_val(v_hn, opts),
            fmt_val(report.values.hio[i], opts),
            fmt_val(report.values.lio[i], opts),
            fmt_val(report.matrix_condition_estimate, opts),
        );
    }
    Ok(out)
}

/// Steady states and prices across a grid of common meeting intensities,
/// for every model class the config covers. Per-point failures land in
/// the error column and the sweep continues.
pub fn cmd_sweep(config: &RunConfig, opts: &Options) -> Result<String, CliError> {
    if config.lambda_grid.is_empty() {
        return Err(CliError::Config(
            "sweep needs a non-empty `lambda_grid`".into(),
        ));
    }
    let mut out = String::new();
    out.push_str("# otc sweep v1\n");
    out.push_str("lambda,model,asset,mu_hn,mu_li_o,mu_hi_o,mu_l_n,price,error\n");
    for &lam in &config.lambda_grid {
        for kind in config.kinds() {
            let mut point_config = config.clone();
            point_config.lambda = vec![lam; config.k];
            let row_prefix = format!("{lam},{}", kind_label(kind));
            let result = (|| -> Result<Vec<String>, CliError> {
                let params = point_config.market_params(kind)?;
                let steady = solve(&params, opts)?;
                let report = price_report(&params, &steady)?;
                let full = steady
                    .dist
                    .full_distribution()
                    .map_err(|e| CliError::Numerical(e.to_string()))?;
                let mut rows = Vec::new();
                for i in 0..params.num_assets() {
                    let hn = match kind {
                        ModelKind::NonSegmented => full.hn[0],
                        ModelKind::PartiallySegmented => full.hn[i],
                    };
                    rows.push(format!(
                        "{},{},{},{},{},{},{},",
                        row_prefix,
                        i + 1,
                        fmt_val(hn, opts),
                        fmt_val(full.lio[i], opts),
                        fmt_val(full.hio[i], opts),
                        fmt_val(full.ln, opts),
                        fmt_val(report.prices[i], opts),
                    ));
                }
                Ok(rows)
            })();
            match result {
                Ok(rows) => {
                    for row in rows {
                        let _ = writeln!(out, "{row}");
                    }
                }
                Err(e) => {
                    let msg = e.to_string().replace(',', ";");
                    let _ = writeln!(out, "{row_prefix},,,,,,,{msg}");
                }
            }
        }
    }
    Ok(out)
}

fn state_header(params: &MarketParams) -> String {
    let k = params.num_assets();
    let mut cols = Vec::new();
    match params.kind() {
        ModelKind::NonSegmented => cols.push("mu_h_n".to_string()),
        ModelKind::PartiallySegmented => {
            cols.extend((1..=k).map(|i| format!("mu_h{i}_n")));
        }
    }
    cols.extend((1..=k).map(|i| format!("mu_l{i}_o")));
    cols.extend((1..=k).map(|i| format!("mu_h{i}_o")));
    cols.push("mu_l_n".to_string());
    cols.join(",")
}

fn state_row(full: &otc_core::FullDistribution, opts: &Options) -> String {
    let mut cols = Vec::new();
    cols.extend(full.hn.iter().map(|v| fmt_val(*v, opts)));
    cols.extend(full.lio.iter().map(|v| fmt_val(*v, opts)));
    cols.extend(full.hio.iter().map(|v| fmt_val(*v, opts)));
    cols.push(fmt_val(full.ln, opts));
    cols.join(",")
}

/// Forward integration of the master equation from the all-low-owner
/// start, sampled on a bounded grid.
pub fn cmd_simulate(config: &RunConfig, opts: &Options) -> Result<String, CliError> {
    let kind = config.single_kind()?;
    let params = config.market_params(kind)?;
    let t_end = config
        .t_end
        .ok_or_else(|| CliError::Config("simulate needs `t_end`".into()))?;
    let dt = config.dt.unwrap_or(1e-4);
    let initial = default_initial(&params);
    let n_steps = (t_end / dt).ceil() as usize;
    let record_every = (n_steps / 1000).max(1);
    let traj = integrate(&params, &initial, t_end, dt, record_every)?;

    let mut out = String::new();
    out.push_str("# otc simulate v1\n");
    let _ = writeln!(out, "t,{}", state_header(&params));
    for (t, state) in traj.times().iter().zip(traj.states()) {
        let full = state
            .full_distribution()
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        let _ = writeln!(out, "{},{}", fmt_val(*t, opts), state_row(&full, opts));
    }
    Ok(out)
}

/// Jacobian spectrum, characteristic polynomial and the quartic
/// criterion at the steady state.
pub fn cmd_stability(config: &RunConfig, opts: &Options) -> Result<String, CliError> {
    let kind = config.single_kind()?;
    let params = config.market_params(kind)?;
    let steady = solve(&params, opts)?;
    let report = stability_report(&params, &steady)?;

    let mut out = String::new();
    out.push_str("# otc stability v1\n");
    out.push_str("quantity,index,value\n");
    let _ = writeln!(out, "residual,,{}", fmt_val(steady.residual_inf_norm, opts));
    for (idx, c) in report.char_poly.iter().enumerate() {
        let _ = writeln!(out, "char_poly,{idx},{}", fmt_val(*c, opts));
    }
    let mut re = report.eig_real_parts.clone();
    re.sort_by(|a, b| b.total_cmp(a));
    for (idx, r) in re.iter().enumerate() {
        let _ = writeln!(out, "eig_real,{idx},{}", fmt_val(*r, opts));
    }
    let _ = writeln!(out, "max_re,,{}", fmt_val(re[0], opts));
    if let Some((a1, a2, a3, a4)) = report.rh_coeffs {
        for (idx, a) in [a1, a2, a3, a4].iter().enumerate() {
            let _ = writeln!(out, "rh_a,{},{}", idx + 1, fmt_val(*a, opts));
        }
    }
    if let Some(margin) = report.rh_margin {
        let _ = writeln!(out, "rh_margin,,{}", fmt_val(margin, opts));
    }
    let verdict = match report.verdict {
        Verdict::AsymptoticallyStable => "asymptotically-stable",
        Verdict::Unstable => "unstable",
        Verdict::Marginal => "marginal",
    };
    let _ = writeln!(out, "verdict,,{verdict}");
    Ok(out)
}

/// Number of sample intervals in the agent-simulation output grid.
const MC_SAMPLES: usize = 100;

/// Finite-population simulation runs, one per seed, with the sup-norm
/// gap to the ODE solution on the same grid.
pub fn cmd_mc(config: &RunConfig, opts: &Options) -> Result<String, CliError> {
    let kind = config.single_kind()?;
    let params = config.market_params(kind)?;
    let t_end = config
        .t_end
        .ok_or_else(|| CliError::Config("mc needs `t_end`".into()))?;
    let n = config
        .n_agents
        .ok_or_else(|| CliError::Config("mc needs `N`".into()))?;
    let seeds: Vec<u64> = match opts.seed {
        Some(s) => vec![s],
        None if !config.seeds.is_empty() => config.seeds.clone(),
        None => return Err(CliError::Config("mc needs `seeds` (or --seed)".into())),
    };
    let dt = config.dt.unwrap_or(1e-4);

    let initial_dist = default_initial(&params);
    let initial_counts = counts_from_distribution(&params, &initial_dist, n)?;
    // ODE reference on a grid that matches the simulator's sample times.
    let substeps = (t_end / (dt * MC_SAMPLES as f64)).ceil().max(1.0) as usize;
    let dt_aligned = t_end / (MC_SAMPLES * substeps) as f64;
    let ode = integrate(&params, &initial_dist, t_end, dt_aligned, substeps)?;

    let mut out = String::new();
    out.push_str("# otc mc v1\n");
    let _ = writeln!(out, "seed,t,gap_sup,{}", state_header(&params));
    for &seed in &seeds {
        let mc = simulate(&params, &initial_counts, t_end, MC_SAMPLES, seed)?;
        let report = lln_error(&mc, &ode)?;
        for ((t, measure), gap) in mc.times.iter().zip(&mc.measures).zip(&report.gaps) {
            let _ = writeln!(
                out,
                "{seed},{},{},{}",
                fmt_val(*t, opts),
                fmt_val(*gap, opts),
                state_row(measure, opts)
            );
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_even_rounding() {
        assert_eq!(round_half_even(0.00145, 4), 0.0014); // 0.00145 stores below the tie
        assert_eq!(round_half_even(0.088156, 4), 0.0882);
        assert_eq!(round_half_even(18.54513, 4), 18.5451);
        assert_eq!(round_half_even(2.5, 0), 2.0);
        assert_eq!(round_half_even(3.5, 0), 4.0);
    }
}
