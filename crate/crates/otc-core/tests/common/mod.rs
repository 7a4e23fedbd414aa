//! Shared helpers for the oracle test suites: parameter samplers, the
//! reference parameter sets, and an independent polynomial root finder.

#![allow(dead_code)]

use otc_core::{make_params, MarketParams, ModelKind, ParamSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.gen_range(lo.ln()..hi.ln())).exp()
}

/// Asset masses with `sum(m) < 1`, bounded away from zero.
pub fn sample_masses(rng: &mut ChaCha8Rng, k: usize, total_hi: f64) -> Vec<f64> {
    let weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let target = rng.gen_range(0.1..total_hi);
    weights.iter().map(|w| w / total * target).collect()
}

pub struct SampleRanges {
    pub rate_lo: f64,
    pub rate_hi: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub mass_hi: f64,
}

impl Default for SampleRanges {
    fn default() -> Self {
        SampleRanges {
            rate_lo: 0.05,
            rate_hi: 50.0,
            lambda_lo: 1.0,
            lambda_hi: 1e4,
            mass_hi: 0.95,
        }
    }
}

pub fn sample_nonseg(rng: &mut ChaCha8Rng, k: usize, ranges: &SampleRanges) -> MarketParams {
    let spec = ParamSpec {
        lambda: (0..k)
            .map(|_| log_uniform(rng, ranges.lambda_lo, ranges.lambda_hi))
            .collect(),
        gamma_u: Some(log_uniform(rng, ranges.rate_lo, ranges.rate_hi)),
        gamma_d: Some(log_uniform(rng, ranges.rate_lo, ranges.rate_hi)),
        gamma_ui: (0..k)
            .map(|_| log_uniform(rng, ranges.rate_lo, ranges.rate_hi))
            .collect(),
        gamma_di: (0..k)
            .map(|_| log_uniform(rng, ranges.rate_lo, ranges.rate_hi))
            .collect(),
        m: sample_masses(rng, k, ranges.mass_hi),
        r: rng.gen_range(0.02..0.2),
        delta_h: (0..k).map(|_| rng.gen_range(0.5..2.0)).collect(),
        delta_d: (0..k).map(|_| rng.gen_range(0.0..5.0)).collect(),
        q: rng.gen_range(0.0..1.0),
        tgamma_ui: None,
        tgamma_di: None,
    };
    make_params(ModelKind::NonSegmented, spec).expect("sampled parameters are valid")
}

/// Non-segmented draw with per-asset owner rates tied to the pooled
/// entry rates (`gamma_ui = gamma_u`, `gamma_di = gamma_d`).
pub fn sample_nonseg_matched(
    rng: &mut ChaCha8Rng,
    k: usize,
    ranges: &SampleRanges,
) -> MarketParams {
    let gu = log_uniform(rng, ranges.rate_lo, ranges.rate_hi);
    let gd = log_uniform(rng, ranges.rate_lo, ranges.rate_hi);
    let spec = ParamSpec {
        lambda: (0..k)
            .map(|_| log_uniform(rng, ranges.lambda_lo, ranges.lambda_hi))
            .collect(),
        gamma_u: Some(gu),
        gamma_d: Some(gd),
        gamma_ui: vec![gu; k],
        gamma_di: vec![gd; k],
        m: sample_masses(rng, k, ranges.mass_hi),
        r: rng.gen_range(0.02..0.2),
        delta_h: (0..k).map(|_| rng.gen_range(0.5..2.0)).collect(),
        delta_d: (0..k).map(|_| rng.gen_range(0.0..5.0)).collect(),
        q: rng.gen_range(0.0..1.0),
        tgamma_ui: None,
        tgamma_di: None,
    };
    make_params(ModelKind::NonSegmented, spec).expect("sampled parameters are valid")
}

pub fn sample_seg(rng: &mut ChaCha8Rng, k: usize, ranges: &SampleRanges) -> MarketParams {
    let spec = ParamSpec {
        lambda: (0..k)
            .map(|_| log_uniform(rng, ranges.lambda_lo, ranges.lambda_hi))
            .collect(),
        tgamma_ui: Some(
            (0..k)
                .map(|_| log_uniform(rng, ranges.rate_lo, ranges.rate_hi))
                .collect(),
        ),
        tgamma_di: Some(
            (0..k)
                .map(|_| log_uniform(rng, ranges.rate_lo, ranges.rate_hi))
                .collect(),
        ),
        gamma_ui: (0..k)
            .map(|_| log_uniform(rng, ranges.rate_lo, ranges.rate_hi))
            .collect(),
        gamma_di: (0..k)
            .map(|_| log_uniform(rng, ranges.rate_lo, ranges.rate_hi))
            .collect(),
        m: sample_masses(rng, k, ranges.mass_hi),
        r: rng.gen_range(0.02..0.2),
        delta_h: (0..k).map(|_| rng.gen_range(0.5..2.0)).collect(),
        delta_d: (0..k).map(|_| rng.gen_range(0.0..5.0)).collect(),
        q: rng.gen_range(0.0..1.0),
        gamma_u: None,
        gamma_d: None,
    };
    make_params(ModelKind::PartiallySegmented, spec).expect("sampled parameters are valid")
}

/// The two-asset reference instance: symmetric assets, owner and entry
/// rates 5 / 0.5, meeting intensity 1250, masses 0.4 each.
pub fn reference_nonseg() -> MarketParams {
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

pub fn reference_seg() -> MarketParams {
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

/// Matched-rate K=1 pair for the model-equivalence checks.
pub fn matched_k1_pair(rng: &mut ChaCha8Rng, ranges: &SampleRanges) -> (MarketParams, MarketParams) {
    let lambda = log_uniform(rng, ranges.lambda_lo, ranges.lambda_hi);
    let gu = log_uniform(rng, ranges.rate_lo, ranges.rate_hi);
    let gd = log_uniform(rng, ranges.rate_lo, ranges.rate_hi);
    let gui = log_uniform(rng, ranges.rate_lo, ranges.rate_hi);
    let gdi = log_uniform(rng, ranges.rate_lo, ranges.rate_hi);
    let m = rng.gen_range(0.1..0.9);
    let r = rng.gen_range(0.02..0.2);
    let dh = rng.gen_range(0.5..2.0);
    let dd = rng.gen_range(0.0..5.0);
    let q = rng.gen_range(0.0..1.0);
    let nonseg = make_params(
        ModelKind::NonSegmented,
        ParamSpec {
            lambda: vec![lambda],
            gamma_u: Some(gu),
            gamma_d: Some(gd),
            gamma_ui: vec![gui],
            gamma_di: vec![gdi],
            m: vec![m],
            r,
            delta_h: vec![dh],
            delta_d: vec![dd],
            q,
            ..Default::default()
        },
    )
    .unwrap();
    let seg = make_params(
        ModelKind::PartiallySegmented,
        ParamSpec {
            lambda: vec![lambda],
            tgamma_ui: Some(vec![gu]),
            tgamma_di: Some(vec![gd]),
            gamma_ui: vec![gui],
            gamma_di: vec![gdi],
            m: vec![m],
            r,
            delta_h: vec![dh],
            delta_d: vec![dd],
            q,
            gamma_u: None,
            gamma_d: None,
        },
    )
    .unwrap();
    (nonseg, seg)
}

// --- complex helpers and an independent polynomial root finder ---

pub type C = (f64, f64);

fn cadd(a: C, b: C) -> C {
    (a.0 + b.0, a.1 + b.1)
}

fn csub(a: C, b: C) -> C {
    (a.0 - b.0, a.1 - b.1)
}

fn cmul(a: C, b: C) -> C {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn cdiv(a: C, b: C) -> C {
    let d = b.0 * b.0 + b.1 * b.1;
    ((a.0 * b.0 + a.1 * b.1) / d, (a.1 * b.0 - a.0 * b.1) / d)
}

fn cabs(a: C) -> f64 {
    a.0.hypot(a.1)
}

fn poly_eval(coeffs: &[f64], z: C) -> C {
    let mut acc = (coeffs[0], 0.0);
    for &c in &coeffs[1..] {
        acc = cadd(cmul(acc, z), (c, 0.0));
    }
    acc
}

/// All roots of a monic real polynomial (descending coefficients,
/// leading 1) by simultaneous Durand-Kerner iteration. Independent of
/// the QR eigenvalue path, so the two can cross-check each other.
pub fn poly_roots(coeffs: &[f64]) -> Vec<C> {
    let n = coeffs.len() - 1;
    if n == 0 {
        return vec![];
    }
    // Initial guesses on a spiral with radius tied to the coefficients.
    let radius = 1.0
        + coeffs[1..]
            .iter()
            .map(|c| c.abs())
            .fold(0.0f64, f64::max);
    let mut z: Vec<C> = (0..n)
        .map(|i| {
            let angle = 2.0 * std::f64::consts::PI * (i as f64) / (n as f64) + 0.25;
            (radius * 0.7 * angle.cos(), radius * 0.7 * angle.sin())
        })
        .collect();
    for _ in 0..500 {
        let mut max_step: f64 = 0.0;
        for i in 0..n {
            let mut denom = (1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom = cmul(denom, csub(z[i], z[j]));
                }
            }
            let step = cdiv(poly_eval(coeffs, z[i]), denom);
            z[i] = csub(z[i], step);
            max_step = max_step.max(cabs(step));
        }
        if max_step < 1e-14 * radius {
            break;
        }
    }
    z
}
