//! Valuation oracles. The central one assembles the displayed
//! reservation-value equations directly, term by term, and checks that
//! the matrix builders produce the same linear action; the rest cover
//! steady-value residuals, the frictionless price limit, and the
//! transient backward flow.

mod common;

use common::*;
use otc_core::dynamics::Trajectory;
use otc_core::equilibrium::{solve_steady, DEFAULT_TOL};
use otc_core::valuation::{
    build_matrix_nonseg, build_matrix_seg, integrate_values_backward, price_report, solve_deltas,
    value_rhs, DeltaVector, ValueMap,
};
use otc_core::{make_params, MarketParams, ModelKind, ParamSpec, StateDistribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Direct evaluation of the four displayed non-segmented reservation
/// equations, written exactly as displayed (left side minus right side),
/// at an arbitrary coordinate vector.
fn intext_residual_nonseg(
    params: &MarketParams,
    dist: &StateDistribution,
    flat: &[f64],
) -> Vec<f64> {
    let k = params.num_assets();
    let r = params.r();
    let q = params.q();
    let (d0, de) = (flat[0], flat[1]);
    let dh = &flat[2..2 + k];
    let dl = &flat[2 + k..2 + 2 * k];
    let trade =
        |j: usize| params.lambda()[j] * dist.mu_lio(j) * (1.0 - q) * (dh[j] - dl[j]);
    let trade_sum: f64 = (0..k).map(trade).sum();
    let mut out = Vec::with_capacity(2 + 2 * k);
    out.push(r * d0 - params.gamma_u() * de);
    out.push(r * de - trade_sum + (params.gamma_u() + params.gamma_d()) * de);
    for i in 0..k {
        let gdi = params.gamma_di()[i];
        out.push(
            r * dh[i] - gdi * (dl[i] - dh[i] - de) + trade_sum - params.gamma_d() * de
                - params.delta_h()[i],
        );
    }
    for i in 0..k {
        let gui = params.gamma_ui()[i];
        let meet = params.lambda()[i] * dist.mu_hn() * q;
        out.push(
            r * dl[i] - meet * (dh[i] - dl[i]) + gui * (dl[i] - dh[i] - de)
                + params.gamma_u() * de
                - (params.delta_h()[i] - params.delta_d()[i]),
        );
    }
    out
}

/// Same for the partially segmented system.
fn intext_residual_seg(
    params: &MarketParams,
    dist: &StateDistribution,
    flat: &[f64],
) -> Vec<f64> {
    let k = params.num_assets();
    let r = params.r();
    let q = params.q();
    let d0 = flat[0];
    let de = &flat[1..1 + k];
    let dh = &flat[1 + k..1 + 2 * k];
    let dl = &flat[1 + 2 * k..1 + 3 * k];
    let tu = params.tgamma_ui();
    let td = params.tgamma_di();
    let entry_sum: f64 = (0..k).map(|j| tu[j] * de[j]).sum();
    let mut out = Vec::with_capacity(1 + 3 * k);
    out.push(r * d0 - entry_sum);
    for i in 0..k {
        let trade = params.lambda()[i] * dist.mu_lio(i) * (1.0 - q) * (dh[i] - dl[i]);
        out.push(r * de[i] - trade + td[i] * de[i] + entry_sum);
    }
    for i in 0..k {
        let gdi = params.gamma_di()[i];
        let trade = params.lambda()[i] * dist.mu_lio(i) * (1.0 - q) * (dh[i] - dl[i]);
        out.push(r * dh[i] - gdi * (dl[i] - dh[i] - de[i]) + trade - td[i] * de[i]
            - params.delta_h()[i]);
    }
    for i in 0..k {
        let gui = params.gamma_ui()[i];
        let meet = params.lambda()[i] * dist.mu_hin(i) * q;
        out.push(
            r * dl[i] - meet * (dh[i] - dl[i]) + gui * (dl[i] - dh[i] - de[i]) + entry_sum
                - (params.delta_h()[i] - params.delta_d()[i]),
        );
    }
    out
}

/// The assembled matrices must agree with the directly-written equations
/// as linear maps, probed at random coordinate vectors.
#[test]
fn matrix_vs_intext_equations() {
    let mut rng = ChaCha8Rng::seed_from_u64(601);
    let ranges = SampleRanges {
        lambda_hi: 2e3,
        ..Default::default()
    };
    for draw in 0..100 {
        let k = [1, 2, 3][draw % 3];
        if draw % 2 == 0 {
            let p = sample_nonseg(&mut rng, k, &ranges);
            let steady = solve_steady(&p, DEFAULT_TOL).unwrap();
            let (m, rhs) = build_matrix_nonseg(&p, &steady.dist);
            let flat: Vec<f64> = (0..2 * k + 2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let via_matrix = m.mul_vec(&flat);
            let direct = intext_residual_nonseg(&p, &steady.dist, &flat);
            for (row, (a, b)) in via_matrix.iter().zip(&direct).enumerate() {
                let resid = (a - rhs[row]) - b;
                assert!(resid.abs() < 1e-12, "row {row}: {a} vs {b}");
            }
        } else {
            let p = sample_seg(&mut rng, k, &ranges);
            let steady = solve_steady(&p, DEFAULT_TOL).unwrap();
            let (m, rhs) = build_matrix_seg(&p, &steady.dist);
            let flat: Vec<f64> = (0..3 * k + 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let via_matrix = m.mul_vec(&flat);
            let direct = intext_residual_seg(&p, &steady.dist, &flat);
            for (row, (a, b)) in via_matrix.iter().zip(&direct).enumerate() {
                let resid = (a - rhs[row]) - b;
                assert!(resid.abs() < 1e-12, "row {row}: {a} vs {b}");
            }
        }
    }
}

/// At the reference steady state, the solved deltas plugged back into
/// the directly-written equations leave no residual.
#[test]
fn reference_deltas_satisfy_intext_equations() {
    let p = reference_nonseg();
    let steady = solve_steady(&p, DEFAULT_TOL).unwrap();
    let (m, rhs) = build_matrix_nonseg(&p, &steady.dist);
    let (deltas, _) = solve_deltas(ModelKind::NonSegmented, 2, &m, &rhs).unwrap();
    let mut flat = vec![deltas.delta0, deltas.delta_e[0]];
    flat.extend_from_slice(&deltas.delta_h);
    flat.extend_from_slice(&deltas.delta_l);
    let resid = intext_residual_nonseg(&p, &steady.dist, &flat);
    for (row, r_val) in resid.iter().enumerate() {
        assert!(r_val.abs() < 1e-12, "row {row}: residual {r_val}");
    }
}

/// Steady values recovered from the delta solve must zero the value ODEs.
#[test]
fn steady_values_zero_the_value_odes() {
    let mut rng = ChaCha8Rng::seed_from_u64(602);
    let ranges = SampleRanges {
        lambda_hi: 2e3,
        ..Default::default()
    };
    for draw in 0..40 {
        let k = [1, 2, 3][draw % 3];
        let p = if draw % 2 == 0 {
            sample_nonseg(&mut rng, k, &ranges)
        } else {
            sample_seg(&mut rng, k, &ranges)
        };
        let steady = solve_steady(&p, DEFAULT_TOL).unwrap();
        let report = price_report(&p, &steady).unwrap();
        assert!(
            report.value_residual < 1e-9,
            "draw {draw}: residual {}",
            report.value_residual
        );
    }
}

/// As meeting frictions vanish the price approaches delta_h / r.
#[test]
fn frictionless_price_limit() {
    let spec = ParamSpec {
        lambda: vec![1e9, 1e9],
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
    };
    let p = make_params(ModelKind::NonSegmented, spec).unwrap();
    let steady = solve_steady(&p, DEFAULT_TOL.max(1e-9)).unwrap();
    let report = price_report(&p, &steady).unwrap();
    assert!((report.prices[0] - 20.0).abs() < 1e-2, "P = {}", report.prices[0]);
}

/// Segmentation cannot raise the symmetric reference price.
#[test]
fn segmented_price_below_nonseg_reference() {
    let pn = reference_nonseg();
    let ps = reference_seg();
    let rn = price_report(&pn, &solve_steady(&pn, DEFAULT_TOL).unwrap()).unwrap();
    let rs = price_report(&ps, &solve_steady(&ps, DEFAULT_TOL).unwrap()).unwrap();
    assert!(rs.prices[0] <= rn.prices[0]);
}

#[test]
fn k1_matched_classes_price_identically() {
    let mut rng = ChaCha8Rng::seed_from_u64(603);
    let ranges = SampleRanges {
        lambda_hi: 2e3,
        ..Default::default()
    };
    for _ in 0..20 {
        let (nonseg, seg) = matched_k1_pair(&mut rng, &ranges);
        let rn = price_report(&nonseg, &solve_steady(&nonseg, DEFAULT_TOL).unwrap()).unwrap();
        let rs = price_report(&seg, &solve_steady(&seg, DEFAULT_TOL).unwrap()).unwrap();
        assert!((rn.prices[0] - rs.prices[0]).abs() < 1e-10);
    }
}

/// Lengthening the horizon of a backward value solve along a trajectory
/// that has already mixed into the steady state must not change V(0):
/// the extra stretch is spent at the fixed point.
#[test]
fn backward_horizon_insensitivity() {
    let p = reference_nonseg();
    let steady = solve_steady(&p, DEFAULT_TOL).unwrap();
    let report = price_report(&p, &steady).unwrap();
    // Distribution path that starts off the steady state and mixes in.
    let start = StateDistribution::new(&p, vec![0.0], p.m().to_vec()).unwrap();
    let run = |t_end: f64| {
        let traj = otc_core::dynamics::integrate(&p, &start, t_end, 1e-3, 10).unwrap();
        let vt = integrate_values_backward(&p, &traj, &report.values, 4).unwrap();
        vt.values[0].clone()
    };
    let v20 = run(20.0);
    let v40 = run(40.0);
    assert!(v20.sup_distance(&v40) < 1e-6);
    // The transient changes V(0) away from the steady values.
    assert!(v20.sup_distance(&report.values) > 1e-4);
}

/// Richardson check of the backward integrator on a one-asset instance
/// with a frozen distribution (exact linear dynamics).
#[test]
fn backward_integration_is_fourth_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(604);
    let ranges = SampleRanges {
        lambda_hi: 100.0,
        ..Default::default()
    };
    let p = sample_nonseg(&mut rng, 1, &ranges);
    let steady = solve_steady(&p, DEFAULT_TOL).unwrap();
    let report = price_report(&p, &steady).unwrap();
    let mut terminal = report.values.clone();
    terminal.lio[0] += 1.0;
    terminal.ln -= 0.5;
    let t_end = 1.0;
    let traj = Trajectory::constant(p.clone(), steady.dist.clone(), t_end).unwrap();
    let run = |substeps: usize| {
        integrate_values_backward(&p, &traj, &terminal, substeps).unwrap().values[0].clone()
    };
    let reference = run(3200);
    let coarse = run(100);
    let fine = run(200);
    let e_coarse = coarse.sup_distance(&reference);
    let e_fine = fine.sup_distance(&reference);
    let ratio = e_coarse / e_fine;
    assert!(
        (12.0..=20.0).contains(&ratio),
        "order ratio {ratio} (errors {e_coarse} / {e_fine})"
    );
}

/// Inverted-spread accounting propagates through the backward flow.
#[test]
fn backward_integration_flags_inverted_spreads() {
    let p = reference_nonseg();
    let steady = solve_steady(&p, DEFAULT_TOL).unwrap();
    let traj = Trajectory::constant(p.clone(), steady.dist.clone(), 0.1).unwrap();
    // Terminal values with sellers above buyers.
    let mut terminal = ValueMap::zeros(ModelKind::NonSegmented, 2);
    terminal.lio = vec![5.0, 5.0];
    let vt = integrate_values_backward(&p, &traj, &terminal, 10).unwrap();
    assert!(vt.inverted_spread_events > 0);
}

#[test]
fn delta_vector_roundtrip_through_values() {
    let p = reference_seg();
    let steady = solve_steady(&p, DEFAULT_TOL).unwrap();
    let report = price_report(&p, &steady).unwrap();
    let v = ValueMap::from_deltas(&report.deltas);
    // Reconstructed prices from values equal the delta-based prices.
    let prices = v.prices(p.q());
    for (a, b) in prices.iter().zip(&report.prices) {
        assert!((a - b).abs() < 1e-12);
    }
    let _ = DeltaVector {
        kind: report.deltas.kind,
        delta0: report.deltas.delta0,
        delta_e: report.deltas.delta_e.clone(),
        delta_h: report.deltas.delta_h.clone(),
        delta_l: report.deltas.delta_l.clone(),
    };
    let rhs = value_rhs(&p, &steady.dist, &v, &prices).unwrap();
    assert!(rhs.sup_norm() < 1e-9);
}
