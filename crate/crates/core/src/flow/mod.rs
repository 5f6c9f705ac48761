//! Local-potential Wegner-Houghton flow with a dissipative propagator.
//!
//! With `t = ln(Lambda0 / Lambda)` every grid node obeys
//!
//! ```text
//! dV/dt = Lambda / (2 pi) * ln(1 + sigma eta Lambda^(s-2) + V''(q) / Lambda^2)
//! ```
//!
//! and the whole grid is advanced as one method-of-lines system.

pub mod integrator;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{second_derivatives, PotentialGrid};
use crate::model::{DissipationSpec, Regime};
use integrator::{Accepted, Control, Limits, Method, OdeSystem, Outcome, Stats};

/// Log arguments at or below this value stop the flow as singular.
pub const A_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FlowError {
    #[error("flow log argument {argument:e} at or below the floor")]
    SingularArgument { argument: f64 },
    #[error(
        "theory is not normal at the initial cutoff: 1 + sigma*eta*Lambda0^(s-2) = {argument} \
         (s = {s}, eta = {eta}, Lambda0 = {lambda_uv}); the hard cutoff requires eta < Lambda0^(2-s)"
    )]
    InvalidInitialCutoff {
        s: i64,
        eta: f64,
        lambda_uv: f64,
        argument: f64,
    },
    #[error("invalid flow configuration: {0}")]
    InvalidConfig(String),
}

/// How the flow is stepped in `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stepper {
    /// Dormand-Prince 5(4) with PI control, using `rel_tol` and `abs_tol`.
    Adaptive,
    /// Fixed-step RK4 with step `dt` in `t`; for determinism audits.
    Rk4 { dt: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub lambda_uv: f64,
    pub lambda_ir: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub freeze_tol: f64,
    pub stepper: Stepper,
    pub max_steps: usize,
}

impl FlowConfig {
    pub const DEFAULT_LAMBDA_IR: f64 = 1e-4;
    pub const DEFAULT_FREEZE_TOL: f64 = 1e-10;
    pub const DEFAULT_REL_TOL: f64 = 1e-13;
    pub const DEFAULT_ABS_TOL: f64 = 1e-15;
    pub const DEFAULT_MAX_STEPS: usize = 200_000;

    /// Defaults for everything except the initial cutoff.
    pub fn with_uv(lambda_uv: f64) -> Self {
        Self {
            lambda_uv,
            lambda_ir: Self::DEFAULT_LAMBDA_IR,
            rel_tol: Self::DEFAULT_REL_TOL,
            abs_tol: Self::DEFAULT_ABS_TOL,
            freeze_tol: Self::DEFAULT_FREEZE_TOL,
            stepper: Stepper::Adaptive,
            max_steps: Self::DEFAULT_MAX_STEPS,
        }
    }

    /// `Lambda0 = 10^4`, used for Ohmic scans.
    pub fn ohmic_default() -> Self {
        Self::with_uv(1e4)
    }

    /// `Lambda0 = 100`, used when comparing exponents.
    pub fn comparison_default() -> Self {
        Self::with_uv(1e2)
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        let bad = |m: &str| Err(FlowError::InvalidConfig(m.to_string()));
        if !(self.lambda_ir > 0.0 && self.lambda_uv > self.lambda_ir && self.lambda_uv.is_finite())
        {
            return bad("need lambda_uv > lambda_ir > 0");
        }
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.freeze_tol > 0.0) {
            return bad("tolerances must be > 0");
        }
        if let Stepper::Rk4 { dt } = self.stepper {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad("rk4 step must be > 0");
            }
        }
        if self.max_steps == 0 {
            return bad("max_steps must be > 0");
        }
        Ok(())
    }

    pub fn t_end(&self) -> f64 {
        (self.lambda_uv / self.lambda_ir).ln()
    }

    pub fn scale_at(&self, t: f64) -> f64 {
        self.lambda_uv * (-t).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FlowStatus {
    Converged,
    Singular,
    MaxSteps,
}

impl FlowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            FlowStatus::Converged => "CONVERGED",
            FlowStatus::Singular => "SINGULAR",
            FlowStatus::MaxSteps => "MAX_STEPS",
        }
    }
}

/// Where the log argument first reached the floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub lambda: f64,
    pub node: usize,
    pub q: f64,
    pub argument: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    /// The potential at the last accepted scale; `V_eff` when converged.
    pub final_grid: PotentialGrid,
    /// Scale at which the flow froze, or `lambda_ir` if it ran to the end.
    pub freeze_scale: f64,
    /// Last scale reached.
    pub final_scale: f64,
    pub status: FlowStatus,
    pub singular: Option<SingularPoint>,
    /// Smallest log argument seen over accepted states.
    pub min_argument: f64,
    pub stats: Stats,
    pub lambda_uv: f64,
}

/// Potential snapshot taken at a requested checkpoint scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub lambda: f64,
    pub grid: PotentialGrid,
}

impl Snapshot {
    pub fn potential_at_origin(&self) -> f64 {
        self.grid.values()[self.grid.center()]
    }

    pub fn curvature_at_origin(&self) -> f64 {
        self.grid.curvature_at_origin()
    }
}

/// Right-hand side of the flow for a single node, as `dV/dt` with `t = ln(Lambda0/Lambda)`.
pub fn flow_rhs(curvature: f64, lambda: f64, spec: &DissipationSpec) -> Result<f64, FlowError> {
    let x = spec.propagator_shift(lambda) + curvature / (lambda * lambda);
    let argument = 1.0 + x;
    if !(argument > A_FLOOR) {
        return Err(FlowError::SingularArgument { argument });
    }
    Ok(lambda / (2.0 * PI) * x.ln_1p())
}

/// Checks that the propagator is normal at `Lambda0` before flowing.
pub fn check_initial_cutoff(spec: &DissipationSpec, lambda_uv: f64) -> Result<(), FlowError> {
    let argument = 1.0 + spec.propagator_shift(lambda_uv);
    if spec.regime() == Regime::Singular && !(argument > 0.0) {
        return Err(FlowError::InvalidInitialCutoff {
            s: spec.s(),
            eta: spec.eta(),
            lambda_uv,
            argument,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct NodeSingularity {
    lambda: f64,
    node: usize,
    argument: f64,
}

struct FlowSystem<'a> {
    spec: &'a DissipationSpec,
    lambda_uv: f64,
    h: f64,
    curv: Vec<f64>,
}

impl FlowSystem<'_> {
    fn min_argument(&mut self, t: f64, v: &[f64]) -> f64 {
        let lambda = self.lambda_uv * (-t).exp();
        second_derivatives(v, self.h, &mut self.curv);
        let shift = 1.0 + self.spec.propagator_shift(lambda);
        let inv_l2 = 1.0 / (lambda * lambda);
        self.curv
            .iter()
            .fold(f64::INFINITY, |m, c| m.min(shift + c * inv_l2))
    }
}

impl OdeSystem for FlowSystem<'_> {
    type Error = NodeSingularity;

    fn rhs(&mut self, t: f64, v: &[f64], dv: &mut [f64]) -> Result<(), NodeSingularity> {
        let lambda = self.lambda_uv * (-t).exp();
        second_derivatives(v, self.h, &mut self.curv);
        let shift = self.spec.propagator_shift(lambda);
        let inv_l2 = 1.0 / (lambda * lambda);
        let pref = lambda / (2.0 * PI);
        let mut worst: Option<NodeSingularity> = None;
        for (i, (d, c)) in dv.iter_mut().zip(&self.curv).enumerate() {
            let x = shift + c * inv_l2;
            let argument = 1.0 + x;
            if !(argument > A_FLOOR) {
                // NaN sorts as the worst possible argument.
                if worst.is_none_or(|w| !(argument >= w.argument)) {
                    worst = Some(NodeSingularity {
                        lambda,
                        node: i,
                        argument,
                    });
                }
                continue;
            }
            *d = pref * x.ln_1p();
        }
        match worst {
            Some(w) => Err(w),
            None => Ok(()),
        }
    }
}

/// Flows `grid` from `cfg.lambda_uv` towards `cfg.lambda_ir`.
pub fn integrate_flow(
    grid: &PotentialGrid,
    spec: &DissipationSpec,
    cfg: &FlowConfig,
) -> Result<FlowResult, FlowError> {
    integrate_flow_with_snapshots(grid, spec, cfg, &[]).map(|(r, _)| r)
}

/// As [`integrate_flow`], also recording the potential at each scale in
/// `scales` (any order; scales outside `[lambda_ir, lambda_uv)` are dropped).
pub fn integrate_flow_with_snapshots(
    grid: &PotentialGrid,
    spec: &DissipationSpec,
    cfg: &FlowConfig,
    scales: &[f64],
) -> Result<(FlowResult, Vec<Snapshot>), FlowError> {
    cfg.validate()?;
    check_initial_cutoff(spec, cfg.lambda_uv)?;

    let t_end = cfg.t_end();
    let mut checkpoints: Vec<f64> = scales
        .iter()
        .filter(|&&l| l >= cfg.lambda_ir && l < cfg.lambda_uv)
        .map(|&l| (cfg.lambda_uv / l).ln().min(t_end))
        .collect();
    checkpoints.sort_by(f64::total_cmp);
    checkpoints.dedup();

    let mut sys = FlowSystem {
        spec,
        lambda_uv: cfg.lambda_uv,
        h: grid.spacing(),
        curv: vec![0.0; grid.len()],
    };
    let method = match cfg.stepper {
        Stepper::Adaptive => Method::Adaptive {
            rel_tol: cfg.rel_tol,
            abs_tol: cfg.abs_tol,
        },
        Stepper::Rk4 { dt } => Method::FixedRk4 { dt },
    };
    let limits = Limits {
        max_steps: cfg.max_steps,
        min_dt: 1e-14 * t_end,
    };

    let mut v = grid.values().to_vec();
    let mut snapshots = Vec::with_capacity(checkpoints.len());
    let mut freeze_t = None;
    let mut min_arg = f64::INFINITY;
    let mut arg_probe = FlowSystem {
        spec,
        lambda_uv: cfg.lambda_uv,
        h: grid.spacing(),
        curv: vec![0.0; grid.len()],
    };
    min_arg = min_arg.min(arg_probe.min_argument(0.0, &v));

    let (outcome, stats) = integrator::integrate(
        &mut sys,
        0.0,
        t_end,
        &mut v,
        method,
        limits,
        &checkpoints,
        |a: &Accepted<'_>| {
            min_arg = min_arg.min(arg_probe.min_argument(a.t, a.y));
            if a.checkpoint.is_some() {
                snapshots.push(Snapshot {
                    lambda: cfg.scale_at(a.t),
                    grid: grid.with_values_unchecked(a.y.to_vec()),
                });
            }
            let scale = a.y.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1e-300);
            let rate = a.dydt.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            if rate / scale < cfg.freeze_tol {
                freeze_t = Some(a.t);
                return Control::Stop;
            }
            Control::Continue
        },
    );

    let final_grid = grid.with_values_unchecked(v);
    let (status, final_t, singular) = match outcome {
        Outcome::Finished => (FlowStatus::Converged, t_end, None),
        Outcome::Stopped { t } => (FlowStatus::Converged, t, None),
        Outcome::MaxSteps { t } => (FlowStatus::MaxSteps, t, None),
        Outcome::Failed { t, error } => (
            FlowStatus::Singular,
            t,
            Some(SingularPoint {
                lambda: error.lambda,
                node: error.node,
                q: final_grid.q(error.node),
                argument: error.argument,
            }),
        ),
    };
    let final_scale = cfg.scale_at(final_t);
    let freeze_scale = match (status, freeze_t) {
        (_, Some(t)) => cfg.scale_at(t),
        (FlowStatus::Converged, None) => cfg.lambda_ir,
        _ => final_scale,
    };

    Ok((
        FlowResult {
            final_grid,
            freeze_scale,
            final_scale,
            status,
            singular,
            min_argument: min_arg,
            stats,
            lambda_uv: cfg.lambda_uv,
        },
        snapshots,
    ))
}

/// Log-spaced scales from `hi` down to `lo`, `per_decade` per factor of ten.
pub fn log_scales(hi: f64, lo: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let n = (decades * per_decade as f64).round().max(1.0) as usize;
    (0..=n)
        .map(|k| hi * 10f64.powf(-(k as f64) * decades / n as f64))
        .collect()
}
