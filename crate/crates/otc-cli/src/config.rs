//! Flat key=value run configuration.
//!
//! One key per line, `#` comments, vectors as bracketed comma lists
//! (`lambda = [1250, 1250]`). Emitting and re-parsing a config
//! reproduces it exactly.

use crate::error::CliError;
use otc_core::{make_params, MarketParams, ModelKind, ParamSpec};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Which model class(es) a run addresses. `Both` is only meaningful for
/// the sweep command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    NonSegmented,
    PartiallySegmented,
    Both,
}

impl ModelChoice {
    fn as_str(&self) -> &'static str {
        match self {
            ModelChoice::NonSegmented => "non-segmented",
            ModelChoice::PartiallySegmented => "partially-segmented",
            ModelChoice::Both => "both",
        }
    }
}

/// Parsed run configuration: a parameter set plus command options.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelChoice,
    pub k: usize,
    pub lambda: Vec<f64>,
    pub gamma_u: Option<f64>,
    pub gamma_d: Option<f64>,
    pub gamma_ui: Vec<f64>,
    pub gamma_di: Vec<f64>,
    pub tgamma_ui: Option<Vec<f64>>,
    pub tgamma_di: Option<Vec<f64>>,
    pub m: Vec<f64>,
    pub r: f64,
    pub delta_h: Vec<f64>,
    pub delta_d: Vec<f64>,
    pub q: f64,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub n_agents: Option<u64>,
    pub seeds: Vec<u64>,
    pub lambda_grid: Vec<f64>,
}

fn parse_f64(key: &str, raw: &str) -> Result<f64, CliError> {
    raw.parse::<f64>()
        .map_err(|_| CliError::Config(format!("key `{key}`: cannot parse `{raw}` as a number")))
}

fn parse_vec_f64(key: &str, raw: &str) -> Result<Vec<f64>, CliError> {
    let inner = raw
        .strip_prefix('[')
        .and_then(|s| s.strip_suffix(']'))
        .ok_or_else(|| {
            CliError::Config(format!("key `{key}`: expected a bracketed list, got `{raw}`"))
        })?;
    if inner.trim().is_empty() {
        return Ok(vec![]);
    }
    inner
        .split(',')
        .map(|tok| parse_f64(key, tok.trim()))
        .collect()
}

fn parse_vec_u64(key: &str, raw: &str) -> Result<Vec<u64>, CliError> {
    parse_vec_f64(key, raw)?
        .into_iter()
        .map(|v| {
            if v.fract() == 0.0 && v >= 0.0 {
                Ok(v as u64)
            } else {
                Err(CliError::Config(format!(
                    "key `{key}`: expected non-negative integers"
                )))
            }
        })
        .collect()
}

fn fmt_vec(values: &[f64]) -> String {
    let inner: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
    format!("[{}]", inner.join(", "))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        let mut fields: BTreeMap<String, String> = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim().to_string();
            if fields.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("duplicate key `{key}`")));
            }
        }

        let mut take = |key: &str| fields.remove(key);
        let model_raw = take("model")
            .ok_or_else(|| CliError::Config("missing required key `model`".into()))?;
        let model = match model_raw.as_str() {
            "non-segmented" | "nonseg" | "non_segmented" => ModelChoice::NonSegmented,
            "partially-segmented" | "seg" | "partially_segmented" => {
                ModelChoice::PartiallySegmented
            }
            "both" => ModelChoice::Both,
            other => {
                return Err(CliError::Config(format!(
                    "model must be non-segmented, partially-segmented or both (got `{other}`)"
                )))
            }
        };

        let mut require = |key: &'static str| -> Result<String, CliError> {
            take(key).ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
        };

        let k_raw = require("K")?;
        let k = k_raw
            .parse::<usize>()
            .map_err(|_| CliError::Config(format!("K must be a positive integer, got `{k_raw}`")))?;
        let lambda = parse_vec_f64("lambda", &require("lambda")?)?;
        let gamma_ui = parse_vec_f64("gamma_ui", &require("gamma_ui")?)?;
        let gamma_di = parse_vec_f64("gamma_di", &require("gamma_di")?)?;
        let m = parse_vec_f64("m", &require("m")?)?;
        let r = parse_f64("r", &require("r")?)?;
        let delta_h = parse_vec_f64("delta_h", &require("delta_h")?)?;
        let delta_d = parse_vec_f64("delta_d", &require("delta_d")?)?;
        let q = parse_f64("q", &require("q")?)?;

        let gamma_u = take("gamma_u").map(|v| parse_f64("gamma_u", &v)).transpose()?;
        let gamma_d = take("gamma_d").map(|v| parse_f64("gamma_d", &v)).transpose()?;
        let tgamma_ui = take("tgamma_ui")
            .map(|v| parse_vec_f64("tgamma_ui", &v))
            .transpose()?;
        let tgamma_di = take("tgamma_di")
            .map(|v| parse_vec_f64("tgamma_di", &v))
            .transpose()?;
        let t_end = take("t_end").map(|v| parse_f64("t_end", &v)).transpose()?;
        let dt = take("dt").map(|v| parse_f64("dt", &v)).transpose()?;
        let n_agents = take("N")
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| CliError::Config(format!("N must be a positive integer, got `{v}`")))
            })
            .transpose()?;
        let seeds = match take("seeds") {
            Some(v) => parse_vec_u64("seeds", &v)?,
            None => vec![],
        };
        let lambda_grid = match take("lambda_grid") {
            Some(v) => parse_vec_f64("lambda_grid", &v)?,
            None => vec![],
        };

        if let Some(unknown) = fields.keys().next() {
            return Err(CliError::Config(format!("unknown key `{unknown}`")));
        }

        let check_len = |name: &str, len: usize| -> Result<(), CliError> {
            if len != k {
                Err(CliError::Config(format!(
                    "`{name}` has length {len}, expected K = {k}"
                )))
            } else {
                Ok(())
            }
        };
        check_len("lambda", lambda.len())?;
        check_len("gamma_ui", gamma_ui.len())?;
        check_len("gamma_di", gamma_di.len())?;
        check_len("m", m.len())?;
        check_len("delta_h", delta_h.len())?;
        check_len("delta_d", delta_d.len())?;
        if let Some(v) = &tgamma_ui {
            check_len("tgamma_ui", v.len())?;
        }
        if let Some(v) = &tgamma_di {
            check_len("tgamma_di", v.len())?;
        }

        Ok(RunConfig {
            model,
            k,
            lambda,
            gamma_u,
            gamma_d,
            gamma_ui,
            gamma_di,
            tgamma_ui,
            tgamma_di,
            m,
            r,
            delta_h,
            delta_d,
            q,
            t_end,
            dt,
            n_agents,
            seeds,
            lambda_grid,
        })
    }

    /// Canonical text form; `parse(emit(c)) == c`.
    pub fn emit(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "model = {}", self.model.as_str());
        let _ = writeln!(out, "K = {}", self.k);
        let _ = writeln!(out, "lambda = {}", fmt_vec(&self.lambda));
        if let Some(v) = self.gamma_u {
            let _ = writeln!(out, "gamma_u = {v}");
        }
        if let Some(v) = self.gamma_d {
            let _ = writeln!(out, "gamma_d = {v}");
        }
        let _ = writeln!(out, "gamma_ui = {}", fmt_vec(&self.gamma_ui));
        let _ = writeln!(out, "gamma_di = {}", fmt_vec(&self.gamma_di));
        if let Some(v) = &self.tgamma_ui {
            let _ = writeln!(out, "tgamma_ui = {}", fmt_vec(v));
        }
        if let Some(v) = &self.tgamma_di {
            let _ = writeln!(out, "tgamma_di = {}", fmt_vec(v));
        }
        let _ = writeln!(out, "m = {}", fmt_vec(&self.m));
        let _ = writeln!(out, "r = {}", self.r);
        let _ = writeln!(out, "delta_h = {}", fmt_vec(&self.delta_h));
        let _ = writeln!(out, "delta_d = {}", fmt_vec(&self.delta_d));
        let _ = writeln!(out, "q = {}", self.q);
        if let Some(v) = self.t_end {
            let _ = writeln!(out, "t_end = {v}");
        }
        if let Some(v) = self.dt {
            let _ = writeln!(out, "dt = {v}");
        }
        if let Some(v) = self.n_agents {
            let _ = writeln!(out, "N = {v}");
        }
        if !self.seeds.is_empty() {
            let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
            let _ = writeln!(out, "seeds = [{}]", seeds.join(", "));
        }
        if !self.lambda_grid.is_empty() {
            let _ = writeln!(out, "lambda_grid = {}", fmt_vec(&self.lambda_grid));
        }
        out
    }

    /// Builds the validated parameter set for one model class, keeping
    /// only that class's rate family.
    pub fn market_params(&self, kind: ModelKind) -> Result<MarketParams, CliError> {
        let spec = match kind {
            ModelKind::NonSegmented => ParamSpec {
                lambda: self.lambda.clone(),
                gamma_u: self.gamma_u,
                gamma_d: self.gamma_d,
                gamma_ui: self.gamma_ui.clone(),
                gamma_di: self.gamma_di.clone(),
                tgamma_ui: if self.model == ModelChoice::Both {
                    None
                } else {
                    self.tgamma_ui.clone()
                },
                tgamma_di: if self.model == ModelChoice::Both {
                    None
                } else {
                    self.tgamma_di.clone()
                },
                m: self.m.clone(),
                r: self.r,
                delta_h: self.delta_h.clone(),
                delta_d: self.delta_d.clone(),
                q: self.q,
            },
            ModelKind::PartiallySegmented => ParamSpec {
                lambda: self.lambda.clone(),
                gamma_u: if self.model == ModelChoice::Both {
                    None
                } else {
                    self.gamma_u
                },
                gamma_d: if self.model == ModelChoice::Both {
                    None
                } else {
                    self.gamma_d
                },
                gamma_ui: self.gamma_ui.clone(),
                gamma_di: self.gamma_di.clone(),
                tgamma_ui: self.tgamma_ui.clone(),
                tgamma_di: self.tgamma_di.clone(),
                m: self.m.clone(),
                r: self.r,
                delta_h: self.delta_h.clone(),
                delta_d: self.delta_d.clone(),
                q: self.q,
            },
        };
        make_params(kind, spec).map_err(|e| CliError::Config(e.to_string()))
    }

    /// The model kinds this config addresses, in output order.
    pub fn kinds(&self) -> Vec<ModelKind> {
        match self.model {
            ModelChoice::NonSegmented => vec![ModelKind::NonSegmented],
            ModelChoice::PartiallySegmented => vec![ModelKind::PartiallySegmented],
            ModelChoice::Both => vec![ModelKind::NonSegmented, ModelKind::PartiallySegmented],
        }
    }

    /// The single kind of a non-`both` config.
    pub fn single_kind(&self) -> Result<ModelKind, CliError> {
        match self.model {
            ModelChoice::NonSegmented => Ok(ModelKind::NonSegmented),
            ModelChoice::PartiallySegmented => Ok(ModelKind::PartiallySegmented),
            ModelChoice::Both => Err(CliError::Config(
                "this command needs a single model (non-segmented or partially-segmented)".into(),
            )),
        }
    }
}
