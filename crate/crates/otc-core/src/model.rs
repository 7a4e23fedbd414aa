//! Model classes, parameter sets and investor-state distributions.
//!
//! Two market classes are supported. In a non-segmented market a buyer
//! accepts any asset, so non-owners occupy the pooled states `(l,n)` and
//! `(h,n)`. In a partially segmented market each buyer targets one asset
//! `i` and the high-type non-owner states split into `(hi,n)`. Owners
//! always occupy `(hi,o)` or `(li,o)`.
//!
//! Distributions are stored in reduced coordinates: only the free
//! coordinates of the master system are kept and the constrained states
//! are derived from `mu(hi,o) + mu(li,o) = m_i` and the normalisation, so
//! the constraints cannot drift during integration.

use thiserror::Error;

/// Tolerance on derived coordinates before a distribution is rejected
/// as infeasible. Absorbs integrator round-off.
pub const FEASIBILITY_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("rate parameter `{name}` must be strictly positive (got {value})")]
    NonPositiveRate { name: &'static str, value: f64 },
    #[error("asset masses must satisfy sum(m_i) < 1 (got {sum})")]
    MassOverflow { sum: f64 },
    #[error("field `{name}` does not belong to the {kind:?} parameter family")]
    WrongFamilyField { name: &'static str, kind: ModelKind },
    #[error("field `{name}` is required for the {kind:?} parameter family")]
    MissingFamilyField { name: &'static str, kind: ModelKind },
    #[error("field `{name}` has length {got}, expected {expected}")]
    DimensionMismatch {
        name: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("bargaining power q must lie in [0,1] (got {0})")]
    BargainingPowerOutOfRange(f64),
    #[error("derived state `{state}` is negative beyond tolerance (got {value})")]
    InfeasibleDistribution { state: String, value: f64 },
    #[error("stored coordinate `{name}` must lie in [0,1] (got {value})")]
    CoordinateOutOfRange { name: String, value: f64 },
    #[error("distribution kind {dist:?} does not match parameter kind {params:?}")]
    KindMismatch { dist: ModelKind, params: ModelKind },
}

/// Which of the two market classes a parameter set or distribution
/// describes. Determines the state-space layout everywhere downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    NonSegmented,
    PartiallySegmented,
}

/// Switching rates of investors who own nothing. Pooled rates apply to
/// the non-segmented class, per-asset rates to the partially segmented
/// class; storing them as an enum makes a mixed parameter set
/// unrepresentable after validation.
#[derive(Debug, Clone, PartialEq)]
enum EntryRates {
    /// `(gamma_u, gamma_d)`
    Pooled(f64, f64),
    /// `(tgamma_ui, tgamma_di)`, each of length K
    PerAsset(Vec<f64>, Vec<f64>),
}

/// Raw constructor input for [`make_params`]. Optional fields belong to
/// one family only; supplying a field of the wrong family is an error
/// rather than silently ignored.
#[derive(Debug, Clone, Default)]
pub struct ParamSpec {
    pub lambda: Vec<f64>,
    /// Non-owner up-switch rate (non-segmented family).
    pub gamma_u: Option<f64>,
    /// Non-owner down-switch rate (non-segmented family).
    pub gamma_d: Option<f64>,
    /// Per-asset non-owner up-switch rates (segmented family).
    pub tgamma_ui: Option<Vec<f64>>,
    /// Per-asset non-owner down-switch rates (segmented family).
    pub tgamma_di: Option<Vec<f64>>,
    /// Owner up-switch rates, length K.
    pub gamma_ui: Vec<f64>,
    /// Owner down-switch rates, length K.
    pub gamma_di: Vec<f64>,
    /// Asset masses, length K.
    pub m: Vec<f64>,
    pub r: f64,
    /// Owner dividend flows, length K.
    pub delta_h: Vec<f64>,
    /// Low-type holding-cost flows, length K.
    pub delta_d: Vec<f64>,
    /// Bargaining power of the buyer side, in [0,1].
    pub q: f64,
}

/// Validated parameter set for one model instance.
///
/// Immutable after construction; aggregates such as `gamma = gamma_u +
/// gamma_d` are exposed as accessors rather than stored.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketParams {
    kind: ModelKind,
    k: usize,
    lambda: Vec<f64>,
    entry: EntryRates,
    gamma_ui: Vec<f64>,
    gamma_di: Vec<f64>,
    m: Vec<f64>,
    r: f64,
    delta_h: Vec<f64>,
    delta_d: Vec<f64>,
    q: f64,
}

fn check_positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(ModelError::NonPositiveRate { name, value });
    }
    Ok(())
}

fn check_positive_vec(name: &'static str, values: &[f64]) -> Result<(), ModelError> {
    for &v in values {
        check_positive(name, v)?;
    }
    Ok(())
}

fn check_len(name: &'static str, got: usize, expected: usize) -> Result<(), ModelError> {
    if got != expected {
        return Err(ModelError::DimensionMismatch {
            name,
            got,
            expected,
        });
    }
    Ok(())
}

/// Number of free coordinates of the reduced master system:
/// `1 + K` for a non-segmented market, `2K` for a partially segmented one.
pub fn free_dim(kind: ModelKind, k: usize) -> usize {
    match kind {
        ModelKind::NonSegmented => 1 + k,
        ModelKind::PartiallySegmented => 2 * k,
    }
}

/// Validates a raw parameter set into a [`MarketParams`].
///
/// Rejects non-positive rates, mass sums at or above one, fields of the
/// wrong rate family and mismatched vector lengths.
pub fn make_params(kind: ModelKind, spec: ParamSpec) -> Result<MarketParams, ModelError> {
    make_params_inner(kind, spec, true)
}

/// Like [`make_params`] but skips the strict-positivity checks on rates,
/// so analytic limits (for example `lambda = 0`) can be constructed in
/// oracle computations. Dimension and family checks still apply.
pub fn make_params_unchecked(kind: ModelKind, spec: ParamSpec) -> Result<MarketParams, ModelError> {
    make_params_inner(kind, spec, false)
}

fn make_params_inner(
    kind: ModelKind,
    spec: ParamSpec,
    strict: bool,
) -> Result<MarketParams, ModelError> {
    let k = spec.m.len();
    check_len("lambda", spec.lambda.len(), k)?;
    check_len("gamma_ui", spec.gamma_ui.len(), k)?;
    check_len("gamma_di", spec.gamma_di.len(), k)?;
    check_len("delta_h", spec.delta_h.len(), k)?;
    check_len("delta_d", spec.delta_d.len(), k)?;

    let entry = match kind {
        ModelKind::NonSegmented => {
            if spec.tgamma_ui.is_some() {
                return Err(ModelError::WrongFamilyField {
                    name: "tgamma_ui",
                    kind,
                });
            }
            if spec.tgamma_di.is_some() {
                return Err(ModelError::WrongFamilyField {
                    name: "tgamma_di",
                    kind,
                });
            }
            let gu = spec.gamma_u.ok_or(ModelError::MissingFamilyField {
                name: "gamma_u",
                kind,
            })?;
            let gd = spec.gamma_d.ok_or(ModelError::MissingFamilyField {
                name: "gamma_d",
                kind,
            })?;
            EntryRates::Pooled(gu, gd)
        }
        ModelKind::PartiallySegmented => {
            if spec.gamma_u.is_some() {
                return Err(ModelError::WrongFamilyField {
                    name: "gamma_u",
                    kind,
                });
            }
            if spec.gamma_d.is_some() {
                return Err(ModelError::WrongFamilyField {
                    name: "gamma_d",
                    kind,
                });
            }
            let tu = spec.tgamma_ui.ok_or(ModelError::MissingFamilyField {
                name: "tgamma_ui",
                kind,
            })?;
            let td = spec.tgamma_di.ok_or(ModelError::MissingFamilyField {
                name: "tgamma_di",
                kind,
            })?;
            check_len("tgamma_ui", tu.len(), k)?;
            check_len("tgamma_di", td.len(), k)?;
            EntryRates::PerAsset(tu, td)
        }
    };

    if strict {
        check_positive_vec("lambda", &spec.lambda)?;
        check_positive_vec("gamma_ui", &spec.gamma_ui)?;
        check_positive_vec("gamma_di", &spec.gamma_di)?;
        check_positive("r", spec.r)?;
        match &entry {
            EntryRates::Pooled(gu, gd) => {
                check_positive("gamma_u", *gu)?;
                check_positive("gamma_d", *gd)?;
            }
            EntryRates::PerAsset(tu, td) => {
                check_positive_vec("tgamma_ui", tu)?;
                check_positive_vec("tgamma_di", td)?;
            }
        }
        check_positive_vec("m", &spec.m)?;
    }
    let mass: f64 = spec.m.iter().sum();
    if mass >= 1.0 {
        return Err(ModelError::MassOverflow { sum: mass });
    }
    if !(0.0..=1.0).contains(&spec.q) {
        return Err(ModelError::BargainingPowerOutOfRange(spec.q));
    }

    Ok(MarketParams {
        kind,
        k,
        lambda: spec.lambda,
        entry,
        gamma_ui: spec.gamma_ui,
        gamma_di: spec.gamma_di,
        m: spec.m,
        r: spec.r,
        delta_h: spec.delta_h,
        delta_d: spec.delta_d,
        q: spec.q,
    })
}

impl MarketParams {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Number of assets K.
    pub fn num_assets(&self) -> usize {
        self.k
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn gamma_ui(&self) -> &[f64] {
        &self.gamma_ui
    }

    pub fn gamma_di(&self) -> &[f64] {
        &self.gamma_di
    }

    pub fn m(&self) -> &[f64] {
        &self.m
    }

    pub fn sum_m(&self) -> f64 {
        self.m.iter().sum()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn delta_h(&self) -> &[f64] {
        &self.delta_h
    }

    pub fn delta_d(&self) -> &[f64] {
        &self.delta_d
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// Pooled non-owner up rate. Panics on segmented parameter sets.
    pub fn gamma_u(&self) -> f64 {
        match &self.entry {
            EntryRates::Pooled(gu, _) => *gu,
            EntryRates::PerAsset(..) => panic!("gamma_u is a non-segmented rate"),
        }
    }

    /// Pooled non-owner down rate. Panics on segmented parameter sets.
    pub fn gamma_d(&self) -> f64 {
        match &self.entry {
            EntryRates::Pooled(_, gd) => *gd,
            EntryRates::PerAsset(..) => panic!("gamma_d is a non-segmented rate"),
        }
    }

    /// Per-asset non-owner up rates. Panics on non-segmented sets.
    pub fn tgamma_ui(&self) -> &[f64] {
        match &self.entry {
            EntryRates::PerAsset(tu, _) => tu,
            EntryRates::Pooled(..) => panic!("tgamma_ui is a segmented rate"),
        }
    }

    /// Per-asset non-owner down rates. Panics on non-segmented sets.
    pub fn tgamma_di(&self) -> &[f64] {
        match &self.entry {
            EntryRates::PerAsset(_, td) => td,
            EntryRates::Pooled(..) => panic!("tgamma_di is a segmented rate"),
        }
    }

    /// Aggregate `gamma = gamma_u + gamma_d` (non-segmented).
    pub fn gamma(&self) -> f64 {
        self.gamma_u() + self.gamma_d()
    }

    /// Aggregate owner rate `gamma_i = gamma_ui + gamma_di`.
    pub fn gamma_i(&self, i: usize) -> f64 {
        self.gamma_ui[i] + self.gamma_di[i]
    }

    /// Aggregate non-owner rate `tgamma_i = tgamma_ui + tgamma_di` (segmented).
    pub fn tgamma_i(&self, i: usize) -> f64 {
        self.tgamma_ui()[i] + self.tgamma_di()[i]
    }

    /// Number of free coordinates of this instance's reduced system.
    pub fn free_dim(&self) -> usize {
        free_dim(self.kind, self.k)
    }

    /// Number of states in the full (unreduced) state space:
    /// `2K + 2` non-segmented, `3K + 1` segmented.
    pub fn full_dim(&self) -> usize {
        match self.kind {
            ModelKind::NonSegmented => 2 * self.k + 2,
            ModelKind::PartiallySegmented => 3 * self.k + 1,
        }
    }
}

/// Cross-sectional distribution of investor states in reduced coordinates.
///
/// Stores the high-type non-owner mass (`mu(h,n)` as a single entry, or
/// `mu(hi,n)` per asset) together with the low-type owner masses
/// `mu(li,o)`; the owner complements and `mu(l,n)` follow from the
/// constraints and a copy of the asset masses.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDistribution {
    kind: ModelKind,
    k: usize,
    /// Length 1 (non-segmented) or K (segmented).
    hn: Vec<f64>,
    /// Length K.
    lio: Vec<f64>,
    m: Vec<f64>,
}

impl StateDistribution {
    /// Builds a distribution from reduced coordinates, checking that all
    /// stored entries lie in `[0,1]` and every derived state is
    /// non-negative within [`FEASIBILITY_TOL`].
    pub fn new(
        params: &MarketParams,
        hn: Vec<f64>,
        lio: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let expect_hn = match params.kind {
            ModelKind::NonSegmented => 1,
            ModelKind::PartiallySegmented => params.k,
        };
        check_len("hn", hn.len(), expect_hn)?;
        check_len("lio", lio.len(), params.k)?;
        let dist = StateDistribution {
            kind: params.kind,
            k: params.k,
            hn,
            lio,
            m: params.m.clone(),
        };
        dist.check_feasible()?;
        Ok(dist)
    }

    fn check_feasible(&self) -> Result<(), ModelError> {
        for (idx, &v) in self.hn.iter().enumerate() {
            if !((-FEASIBILITY_TOL..=1.0 + FEASIBILITY_TOL).contains(&v)) {
                return Err(ModelError::CoordinateOutOfRange {
                    name: format!("hn[{idx}]"),
                    value: v,
                });
            }
        }
        for (idx, &v) in self.lio.iter().enumerate() {
            if !((-FEASIBILITY_TOL..=1.0 + FEASIBILITY_TOL).contains(&v)) {
                return Err(ModelError::CoordinateOutOfRange {
                    name: format!("lio[{idx}]"),
                    value: v,
                });
            }
        }
        for i in 0..self.k {
            let hio = self.mu_hio(i);
            if hio < -FEASIBILITY_TOL {
                return Err(ModelError::InfeasibleDistribution {
                    state: format!("mu(h{},o)", i + 1),
                    value: hio,
                });
            }
        }
        let ln = self.mu_ln();
        if ln < -FEASIBILITY_TOL {
            return Err(ModelError::InfeasibleDistribution {
                state: "mu(l,n)".to_string(),
                value: ln,
            });
        }
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn num_assets(&self) -> usize {
        self.k
    }

    /// Pooled `mu(h,n)`. Panics on segmented distributions.
    pub fn mu_hn(&self) -> f64 {
        assert_eq!(self.kind, ModelKind::NonSegmented);
        self.hn[0]
    }

    /// `mu(hi,n)` for asset `i`. Panics on non-segmented distributions.
    pub fn mu_hin(&self, i: usize) -> f64 {
        assert_eq!(self.kind, ModelKind::PartiallySegmented);
        self.hn[i]
    }

    /// Raw high-type non-owner block (length 1 or K).
    pub fn hn_coords(&self) -> &[f64] {
        &self.hn
    }

    pub fn mu_lio(&self, i: usize) -> f64 {
        self.lio[i]
    }

    pub fn lio_coords(&self) -> &[f64] {
        &self.lio
    }

    /// Derived `mu(hi,o) = m_i - mu(li,o)`.
    pub fn mu_hio(&self, i: usize) -> f64 {
        self.m[i] - self.lio[i]
    }

    /// Derived `mu(l,n)` from the normalisation constraint.
    pub fn mu_ln(&self) -> f64 {
        let hn_total: f64 = self.hn.iter().sum();
        1.0 - self.m.iter().sum::<f64>() - hn_total
    }

    /// The reduced coordinate vector in solver order: the `hn` block
    /// followed by the `lio` block.
    pub fn reduced_coords(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.hn.len() + self.lio.len());
        out.extend_from_slice(&self.hn);
        out.extend_from_slice(&self.lio);
        out
    }

    /// Rebuilds a distribution from a reduced coordinate vector laid out
    /// as in [`Self::reduced_coords`].
    pub fn from_reduced(params: &MarketParams, coords: &[f64]) -> Result<Self, ModelError> {
        let nh = match params.kind {
            ModelKind::NonSegmented => 1,
            ModelKind::PartiallySegmented => params.k,
        };
        check_len("reduced", coords.len(), nh + params.k)?;
        Self::new(params, coords[..nh].to_vec(), coords[nh..].to_vec())
    }

    /// Sup-norm distance between the reduced coordinates of two
    /// distributions of the same kind.
    pub fn sup_distance(&self, other: &StateDistribution) -> f64 {
        let a = self.reduced_coords();
        let b = other.reduced_coords();
        a.iter()
            .zip(&b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Emits every state probability of the full (unreduced) state
    /// space. Errors if a derived coordinate is negative beyond
    /// [`FEASIBILITY_TOL`].
    pub fn full_distribution(&self) -> Result<FullDistribution, ModelError> {
        self.check_feasible()?;
        Ok(FullDistribution {
            kind: self.kind,
            ln: self.mu_ln(),
            hn: self.hn.clone(),
            hio: (0..self.k).map(|i| self.mu_hio(i)).collect(),
            lio: self.lio.clone(),
        })
    }

    /// Inverse of [`Self::full_distribution`]: keeps the free coordinates
    /// and drops the derived ones.
    pub fn from_full(params: &MarketParams, full: &FullDistribution) -> Result<Self, ModelError> {
        if full.kind != params.kind {
            return Err(ModelError::KindMismatch {
                dist: full.kind,
                params: params.kind,
            });
        }
        Self::new(params, full.hn.clone(), full.lio.clone())
    }
}

/// All state probabilities of a model instance, in the natural layout:
/// `ln`, the high-type non-owner block, owners high then low per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct FullDistribution {
    pub kind: ModelKind,
    pub ln: f64,
    /// `mu(h,n)` (length 1) or `mu(hi,n)` (length K).
    pub hn: Vec<f64>,
    pub hio: Vec<f64>,
    pub lio: Vec<f64>,
}

impl FullDistribution {
    pub fn sum(&self) -> f64 {
        self.ln
            + self.hn.iter().sum::<f64>()
            + self.hio.iter().sum::<f64>()
            + self.lio.iter().sum::<f64>()
    }

    /// Flat vector of all state probabilities, `ln` first, then `hn`,
    /// `hio`, `lio` blocks.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.ln];
        v.extend_from_slice(&self.hn);
        v.extend_from_slice(&self.hio);
        v.extend_from_slice(&self.lio);
        v
    }

    /// Sup-norm distance across all states.
    pub fn sup_distance(&self, other: &FullDistribution) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// How a steady state was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyMethod {
    BisectionNewton,
    CurveIntersection,
    DampedFixedPoint,
}

/// A converged steady state together with solver diagnostics.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub dist: StateDistribution,
    /// Sup norm of the master-equation right-hand side at `dist`.
    pub residual_inf_norm: f64,
    pub iterations: u32,
    pub method: SteadyMethod,
}
