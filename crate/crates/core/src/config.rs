//! Run configuration: a flat TOML document, validated and resolved with
//! every default made explicit.
//!
//! ```toml
//! mode = "scan"
//! lambda0 = 1.0
//! s = 1
//! eta_range = "0:40:17"
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::critical::{default_half_width, DEFAULT_NODES, WINDOW_INTERVALS};
use crate::flow::{FlowConfig, Stepper};
use crate::model::{DissipationSpec, ModelParams, Regime};
use crate::oracle;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot parse configuration: {0}")]
    Parse(String),
    #[error("{key}: {reason}")]
    Invalid { key: String, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Flow,
    Scan,
    Fit,
    Spectra,
    Oracle,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Flow => "flow",
            Mode::Scan => "scan",
            Mode::Fit => "fit",
            Mode::Spectra => "spectra",
            Mode::Oracle => "oracle",
        }
    }
}

/// The document as written; every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub mode: Option<Mode>,
    pub lambda0: Option<f64>,
    pub lambda0_list: Option<Vec<f64>>,
    pub s: Option<i64>,
    pub s_list: Option<Vec<i64>>,
    pub eta: Option<f64>,
    pub eta_list: Option<Vec<f64>>,
    /// `"A:B:N"`, N evenly spaced values from A to B inclusive.
    pub eta_range: Option<String>,
    pub lambda_uv: Option<f64>,
    pub lambda_ir: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub freeze_tol: Option<f64>,
    pub max_steps: Option<usize>,
    pub rk4_dt: Option<f64>,
    pub q_max: Option<f64>,
    pub n: Option<usize>,
    pub snapshots_per_decade: Option<usize>,
    pub refine: Option<bool>,
    pub critical: Option<bool>,
    pub window_intervals: Option<usize>,
    /// Read eta values in units of lambda0.
    pub eta_per_lambda0: Option<bool>,
    pub scan_csv: Option<PathBuf>,
    pub e_min: Option<f64>,
    pub e_max: Option<f64>,
    pub e_points: Option<usize>,
    pub oracle_q_max: Option<f64>,
    pub oracle_n: Option<usize>,
    pub levels: Option<usize>,
    pub compare_flow: Option<bool>,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }
}

/// Grid used for one coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub lambda0: f64,
    pub q_max: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanSpec {
    pub etas: Vec<f64>,
    /// Bisect towards the localization onset after the grid.
    pub refine: bool,
    /// Use the onset-normalized two-pass protocol; `etas` is then the coarse pass.
    pub critical: bool,
    pub window_intervals: usize,
    /// `etas` are multiples of lambda0.
    pub per_lambda0: bool,
}

impl ScanSpec {
    /// The eta grid for one coupling.
    pub fn etas_for(&self, lambda0: f64) -> Vec<f64> {
        if self.per_lambda0 {
            self.etas.iter().map(|e| e * lambda0).collect()
        } else {
            self.etas.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectraSpec {
    pub e_min: f64,
    pub e_max: f64,
    pub e_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleSpec {
    /// One per coupling; the default is `12 / sqrt(min(1, 4 lambda0))`.
    pub q_max: Vec<f64>,
    pub n: usize,
    pub levels: usize,
    pub compare_flow: bool,
}

/// Fully resolved configuration. Serializing it gives the manifest record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub lambda0s: Vec<f64>,
    pub s_values: Vec<i64>,
    pub eta: f64,
    pub flow: FlowConfig,
    pub grids: Vec<GridSpec>,
    pub snapshots_per_decade: usize,
    pub scan: ScanSpec,
    pub scan_csv: Option<PathBuf>,
    pub spectra: SpectraSpec,
    pub oracle: OracleSpec,
    pub output: PathBuf,
    pub threads: usize,
}

impl RunConfig {
    pub fn model(&self, i: usize) -> ModelParams {
        ModelParams::new(self.lambda0s[i]).expect("validated")
    }
}

/// Parses `"A:B:N"`.
pub fn parse_eta_range(text: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = text.split(':').collect();
    let bad = || invalid("eta_range", format!("expected A:B:N, got {text:?}"));
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !(a.is_finite() && b.is_finite()) || (n > 1 && !(b > a)) {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    Ok((0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect())
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(key, format!("must be finite and > 0, got {v}")))
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    resolve(RawConfig::from_toml(text)?)
}

/// Applies defaults and validates.
pub fn resolve(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let mode = raw.mode.ok_or_else(|| invalid("mode", "missing (flow | scan | fit | spectra | oracle)"))?;

    let lambda0s = match (&raw.lambda0_list, raw.lambda0) {
        (Some(list), _) if !list.is_empty() => list.clone(),
        (Some(_), _) => return Err(invalid("lambda0_list", "must not be empty")),
        (None, Some(l)) => vec![l],
        (None, None) if mode == Mode::Spectra || mode == Mode::Fit => vec![1.0],
        (None, None) => return Err(invalid("lambda0", "missing")),
    };
    for l in &lambda0s {
        ModelParams::new(*l).map_err(|e| invalid("lambda0", e.to_string()))?;
    }

    let s_values = match (&raw.s_list, raw.s) {
        (Some(list), _) if !list.is_empty() => list.clone(),
        (Some(_), _) => return Err(invalid("s_list", "must not be empty")),
        (None, Some(s)) => vec![s],
        (None, None) => vec![1],
    };
    for s in &s_values {
        crate::model::dissipation_sign(*s).map_err(|_| invalid("s", format!("s must be odd and >= 1, got {s}")))?;
    }

    let eta = raw.eta.unwrap_or(0.0);
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(invalid("eta", format!("must be finite and >= 0, got {eta}")));
    }

    let default_uv = if s_values.iter().all(|&s| s == 1) {
        1e4
    } else {
        1e2
    };
    let mut flow = FlowConfig::with_uv(positive("lambda_uv", raw.lambda_uv.unwrap_or(default_uv))?);
    if let Some(v) = raw.lambda_ir {
        flow.lambda_ir = positive("lambda_ir", v)?;
    }
    if let Some(v) = raw.rel_tol {
        flow.rel_tol = positive("rel_tol", v)?;
    }
    if let Some(v) = raw.abs_tol {
        flow.abs_tol = positive("abs_tol", v)?;
    }
    if let Some(v) = raw.freeze_tol {
        flow.freeze_tol = positive("freeze_tol", v)?;
    }
    if let Some(v) = raw.max_steps {
        flow.max_steps = v;
    }
    if let Some(dt) = raw.rk4_dt {
        flow.stepper = Stepper::Rk4 { dt: positive("rk4_dt", dt)? };
    }
    flow.validate().map_err(|e| invalid("lambda_uv", e.to_string()))?;

    // The propagator must be normal at the initial cutoff for a single flow point.
    if matches!(mode, Mode::Flow | Mode::Scan) && raw.eta_list.is_none() && raw.eta_range.is_none() {
        for &s in &s_values {
            let spec = DissipationSpec::new(s, eta).map_err(|e| invalid("eta", e.to_string()))?;
            if spec.regime() == Regime::Singular && !(1.0 + spec.propagator_shift(flow.lambda_uv) > 0.0) {
                let bound = flow.lambda_uv.powi(-(s as i32 - 2));
                return Err(invalid(
                    "eta",
                    format!(
                        "s = {s} has a hard cutoff: need eta < 1/lambda_uv^(s-2) = {bound} \
                         (lambda_uv = {}), got eta = {eta}",
                        flow.lambda_uv
                    ),
                ));
            }
        }
    }

    let n = raw.n.unwrap_or(DEFAULT_NODES);
    if n < crate::grid::MIN_NODES || n % 2 == 0 {
        return Err(invalid("n", format!("must be odd and >= {}, got {n}", crate::grid::MIN_NODES)));
    }
    let mut grids = Vec::with_capacity(lambda0s.len());
    for &l in &lambda0s {
        let p = ModelParams::new(l).expect("checked above");
        let q_max = match raw.q_max {
            Some(q) => positive("q_max", q)?,
            None => default_half_width(&p),
        };
        let required = 3.0 * p.well_position();
        if q_max < required {
            return Err(invalid(
                "q_max",
                format!("{q_max} does not hold the wells of lambda0 = {l} (need >= {required})"),
            ));
        }
        grids.push(GridSpec { lambda0: l, q_max, n });
    }

    let etas = match (&raw.eta_list, &raw.eta_range) {
        (Some(_), Some(_)) => return Err(invalid("eta_list", "give either eta_list or eta_range, not both")),
        (Some(list), None) => list.clone(),
        (None, Some(r)) => parse_eta_range(r)?,
        (None, None) => vec![eta],
    };
    if etas.is_empty()
        || !etas.iter().all(|e| e.is_finite() && *e >= 0.0)
        || !etas.windows(2).all(|w| w[0] < w[1])
    {
        return Err(invalid("eta_list", "values must be >= 0 and strictly ascending"));
    }
    let critical = raw.critical.unwrap_or(false);
    let window_intervals = raw.window_intervals.unwrap_or(WINDOW_INTERVALS);
    if critical && (etas.len() < 2 || window_intervals < 2) {
        return Err(invalid("critical", "needs an eta grid with at least two values and window_intervals >= 2"));
    }
    let scan = ScanSpec {
        etas,
        refine: raw.refine.unwrap_or(mode == Mode::Scan),
        critical,
        window_intervals,
        per_lambda0: raw.eta_per_lambda0.unwrap_or(false),
    };

    if mode == Mode::Fit && raw.scan_csv.is_none() {
        return Err(invalid("scan_csv", "fit mode needs the path of a scan table"));
    }

    let spectra = SpectraSpec {
        e_min: positive("e_min", raw.e_min.unwrap_or(1e-3))?,
        e_max: positive("e_max", raw.e_max.unwrap_or(1e3))?,
        e_points: raw.e_points.unwrap_or(121),
    };
    if !(spectra.e_max > spectra.e_min) || spectra.e_points < 2 {
        return Err(invalid("e_max", "need e_max > e_min and e_points >= 2"));
    }

    let oracle_q_max = lambda0s
        .iter()
        .map(|&l| match raw.oracle_q_max {
            Some(q) => positive("oracle_q_max", q),
            None => Ok(oracle::default_half_width(&ModelParams::new(l).expect("checked above"))),
        })
        .collect::<Result<Vec<_>, _>>()?;
    let oracle_n = raw.oracle_n.unwrap_or(oracle::DEFAULT_NODES);
    if oracle_n < 5 || oracle_n % 2 == 0 {
        return Err(invalid("oracle_n", format!("must be odd and >= 5, got {oracle_n}")));
    }
    let levels = raw.levels.unwrap_or(2);
    if levels < 2 {
        return Err(invalid("levels", "the gap needs at least two levels"));
    }

    Ok(RunConfig {
        mode,
        lambda0s,
        s_values,
        eta,
        flow,
        grids,
        snapshots_per_decade: raw.snapshots_per_decade.unwrap_or(1),
        scan,
        scan_csv: raw.scan_csv,
        spectra,
        oracle: OracleSpec {
            q_max: oracle_q_max,
            n: oracle_n,
            levels,
            compare_flow: raw.compare_flow.unwrap_or(false),
        },
        output: raw.output.unwrap_or_else(|| PathBuf::from("out")),
        threads: raw.threads.unwrap_or(0),
    })
}
