//! Susceptibility scans in `eta` and the critical power-law fit
//! `chi = C (eta_c - eta)^(-gamma)`.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::flow::{integrate_flow, FlowConfig, FlowError, FlowResult, FlowStatus};
use crate::grid::{GridError, PotentialGrid};
use crate::model::{DissipationSpec, ModelError, ModelParams};
use crate::observables::{observe, refined_curvature};

/// Window points need `chi >= WINDOW_CHI_RATIO * chi(eta = 0)`.
pub const WINDOW_CHI_RATIO: f64 = 10.0;
/// Refinement stops once the status flips within this fraction of `eta_c`.
pub const REFINE_REL_WIDTH: f64 = 1e-3;
pub const MIN_FIT_POINTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriticalError {
    #[error("eta values must be finite, >= 0 and strictly ascending")]
    BadEtaList,
    #[error("fit window has {0} points, need at least {MIN_FIT_POINTS}")]
    TooFewPoints(usize),
    #[error("power-law fit diverged: {0}")]
    FitDiverged(String),
    #[error("no localization onset up to eta = {0}")]
    NoOnset(f64),
    #[error("reference run at eta = 0 failed: {0}")]
    Reference(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// The undamped problem shared by every point of a scan.
#[derive(Debug, Clone, PartialEq)]
pub struct Setup {
    pub params: ModelParams,
    pub grid: PotentialGrid,
    pub flow: FlowConfig,
}

impl Setup {
    pub fn new(params: ModelParams, q_max: f64, n: usize, flow: FlowConfig) -> Result<Self, GridError> {
        let grid = PotentialGrid::init_from_bare(&params, q_max, n)?;
        Ok(Self { params, grid, flow })
    }

    /// `q_max = max(4, 3 / sqrt(4 lambda0))`, 801 nodes.
    pub fn with_default_grid(params: ModelParams, flow: FlowConfig) -> Result<Self, GridError> {
        Self::new(params, default_half_width(&params), DEFAULT_NODES, flow)
    }
}

pub const DEFAULT_NODES: usize = 801;

pub fn default_half_width(p: &ModelParams) -> f64 {
    4f64.max(3.0 * p.well_position())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PointStatus {
    /// Symmetric phase: unique minimum at the origin with positive curvature.
    Converged,
    /// The flow finished but the minimum is a mirror pair.
    Localized,
    Singular,
    MaxSteps,
    InvalidInitialCutoff,
}

impl PointStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointStatus::Converged => "CONVERGED",
            PointStatus::Localized => "LOCALIZED",
            PointStatus::Singular => "SINGULAR",
            PointStatus::MaxSteps => "MAX_STEPS",
            PointStatus::InvalidInitialCutoff => "INVALID_INITIAL_CUTOFF",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanPoint {
    pub eta: f64,
    pub status: PointStatus,
    /// Curvature at the minimum of the final grid, when there is one.
    pub m_eff_sq: Option<f64>,
    /// Independent seven-point curvature at the node nearest the minimum.
    pub m_eff_sq_check: Option<f64>,
    pub chi: Option<f64>,
    pub q_mean: Option<f64>,
    pub e0: Option<f64>,
}

/// One flow plus observables at `(setup, s, eta)`.
pub fn evaluate_point(setup: &Setup, s: i64, eta: f64) -> Result<ScanPoint, ModelError> {
    let spec = DissipationSpec::new(s, eta)?;
    match integrate_flow(&setup.grid, &spec, &setup.flow) {
        Ok(r) => Ok(classify_flow(&spec, &r)),
        Err(FlowError::InvalidInitialCutoff { .. }) => Ok(ScanPoint::rejected(eta)),
        Err(e) => unreachable!("flow configuration was validated: {e}"),
    }
}

/// Observables and status of a finished flow.
pub fn classify_flow(spec: &DissipationSpec, result: &FlowResult) -> ScanPoint {
    let mut point = ScanPoint::rejected(spec.eta());
    let obs = observe(&result.final_grid, spec).ok();
    if let Some(o) = obs {
        point.m_eff_sq = Some(o.m_eff_sq);
        let g = &result.final_grid;
        let node = (o.q_mean / g.spacing()).round() as isize + g.center() as isize;
        point.m_eff_sq_check = Some(refined_curvature(g, node.max(0) as usize));
        point.q_mean = Some(o.q_mean);
        point.e0 = Some(o.e0);
    }
    point.status = match result.status {
        FlowStatus::Singular => PointStatus::Singular,
        FlowStatus::MaxSteps => PointStatus::MaxSteps,
        FlowStatus::Converged => match obs {
            Some(o) if !o.degenerate && o.chi.is_some() => {
                point.chi = o.chi;
                PointStatus::Converged
            }
            _ => PointStatus::Localized,
        },
    };
    point
}

impl ScanPoint {
    /// A point whose flow could not start.
    pub fn rejected(eta: f64) -> Self {
        ScanPoint {
            eta,
            status: PointStatus::InvalidInitialCutoff,
            m_eff_sq: None,
            m_eff_sq_check: None,
            chi: None,
            q_mean: None,
            e0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub lambda0: f64,
    pub s: i64,
    /// Sorted by `eta`.
    pub points: Vec<ScanPoint>,
    /// `chi` of the undamped run, the reference for the window threshold.
    pub chi0: f64,
}

fn check_etas(etas: &[f64]) -> Result<(), CriticalError> {
    let ok = etas.iter().all(|e| e.is_finite() && *e >= 0.0) && etas.windows(2).all(|w| w[0] < w[1]);
    if ok {
        Ok(())
    } else {
        Err(CriticalError::BadEtaList)
    }
}

fn run_points(setup: &Setup, s: i64, etas: &[f64]) -> Result<Vec<ScanPoint>, ModelError> {
    etas.par_iter().map(|&eta| evaluate_point(setup, s, eta)).collect()
}

/// Evaluates every `eta` (in parallel on the current rayon pool). Per-point
/// failures are recorded as statuses; the output does not depend on
/// completion order.
pub fn scan_eta(setup: &Setup, s: i64, etas: &[f64]) -> Result<ScanResult, CriticalError> {
    check_etas(etas)?;
    let mut points = run_points(setup, s, etas)?;
    points.sort_by(|a, b| a.eta.total_cmp(&b.eta));
    let chi0 = match points.first() {
        Some(p) if p.eta == 0.0 => p.chi,
        _ => evaluate_point(setup, s, 0.0)?.chi,
    }
    .ok_or_else(|| CriticalError::Reference("no symmetric-phase susceptibility".into()))?;
    Ok(ScanResult {
        lambda0: setup.params.lambda0,
        s,
        points,
        chi0,
    })
}

impl ScanResult {
    /// First point that is not in the symmetric phase, if any.
    pub fn onset(&self) -> Option<&ScanPoint> {
        self.points.iter().find(|p| p.status != PointStatus::Converged)
    }

    /// Symmetric points below the onset with `chi >= 10 chi0`, as `(eta, chi)`.
    pub fn window(&self) -> Vec<(f64, f64)> {
        let stop = self.onset().map_or(f64::INFINITY, |p| p.eta);
        self.points
            .iter()
            .filter(|p| p.eta < stop && p.status == PointStatus::Converged)
            .filter_map(|p| p.chi.map(|c| (p.eta, c)))
            .filter(|&(_, c)| c >= WINDOW_CHI_RATIO * self.chi0)
            .collect()
    }

    /// `m_eff` over the symmetric points below the onset.
    pub fn masses(&self) -> Vec<(f64, f64)> {
        let stop = self.onset().map_or(f64::INFINITY, |p| p.eta);
        self.points
            .iter()
            .filter(|p| p.eta < stop && p.status == PointStatus::Converged)
            .filter_map(|p| p.m_eff_sq.map(|m| (p.eta, m.sqrt())))
            .collect()
    }

    fn insert(&mut self, p: ScanPoint) {
        let at = self.points.partition_point(|q| q.eta < p.eta);
        self.points.insert(at, p);
    }
}

/// Bisects between the last symmetric point and the onset until the status
/// flips within `rel_width * eta_onset`. Returns the number of points added.
pub fn refine_onset(setup: &Setup, scan: &mut ScanResult, rel_width: f64) -> Result<usize, CriticalError> {
    let mut added = 0;
    loop {
        let Some(k) = scan.points.iter().position(|p| p.status != PointStatus::Converged) else {
            return Ok(added);
        };
        if k == 0 {
            return Ok(added);
        }
        let (lo, hi) = (scan.points[k - 1].eta, scan.points[k].eta);
        if hi - lo < rel_width * hi {
            return Ok(added);
        }
        let mid = 0.5 * (lo + hi);
        let p = evaluate_point(setup, scan.s, mid)?;
        scan.insert(p);
        added += 1;
    }
}

/// Intervals of the onset-normalized grid used by [`critical_scan`].
pub const WINDOW_INTERVALS: usize = 16;

/// Two-pass scan that samples every coupling alike relative to its own onset.
///
/// A coarse uniform grid over `[0, eta_max]` plus bisection locates the
/// first non-symmetric `eta`. The returned scan is a fresh uniform grid of
/// `intervals` steps ending at that point, refined again towards the onset.
pub fn critical_scan(
    setup: &Setup,
    s: i64,
    eta_max: f64,
    coarse_points: usize,
    intervals: usize,
) -> Result<ScanResult, CriticalError> {
    if !(eta_max > 0.0) || coarse_points < 2 || intervals < 2 {
        return Err(CriticalError::BadEtaList);
    }
    let coarse: Vec<f64> = (0..coarse_points)
        .map(|k| eta_max * k as f64 / (coarse_points - 1) as f64)
        .collect();
    let mut first = scan_eta(setup, s, &coarse)?;
    refine_onset(setup, &mut first, REFINE_REL_WIDTH)?;
    let onset = first.onset().map(|p| p.eta).ok_or(CriticalError::NoOnset(eta_max))?;
    let etas: Vec<f64> = (0..=intervals)
        .map(|k| onset * k as f64 / intervals as f64)
        .collect();
    let mut scan = scan_eta(setup, s, &etas)?;
    refine_onset(setup, &mut scan, REFINE_REL_WIDTH)?;
    Ok(scan)
}

/// `eta_c = 2 pi lambda0` from the dilute instanton gas.
pub fn instanton_critical(lambda0: f64) -> f64 {
    2.0 * PI * lambda0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalFit {
    pub c: f64,
    pub eta_c: f64,
    pub gamma: f64,
    /// Sum of squared residuals of `ln chi`.
    pub sse: f64,
    pub n_points: usize,
    /// Coefficient of determination of the log-log regression.
    pub r_squared: f64,
}

struct Line {
    intercept: f64,
    slope: f64,
    sse: f64,
    sst: f64,
}

fn regress(x: &[f64], y: &[f64]) -> Line {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    Line {
        intercept,
        slope,
        sse,
        sst: syy,
    }
}

/// Profile fit over a window of `(eta, chi)` points.
///
/// For each trial `eta_c`, `ln chi` is regressed on `ln(eta_c - eta)`. The
/// residual sum is minimized over `eta_c` in `(eta_max, eta_max + 10 span]`:
/// a log-spaced sweep of `eta_c - eta_max` brackets the minimum, then golden
/// section polishes it.
pub fn fit_window(window: &[(f64, f64)]) -> Result<CriticalFit, CriticalError> {
    if window.len() < MIN_FIT_POINTS {
        return Err(CriticalError::TooFewPoints(window.len()));
    }
    if window.iter().any(|&(e, c)| !(e.is_finite() && c > 0.0 && c.is_finite())) {
        return Err(CriticalError::FitDiverged("non-positive or non-finite chi".into()));
    }
    let etas: Vec<f64> = window.iter().map(|p| p.0).collect();
    let ln_chi: Vec<f64> = window.iter().map(|p| p.1.ln()).collect();
    let eta_max = etas.iter().fold(f64::NEG_INFINITY, |m, &e| m.max(e));
    let eta_min = etas.iter().fold(f64::INFINITY, |m, &e| m.min(e));
    let span = eta_max - eta_min;
    if !(span > 0.0) {
        return Err(CriticalError::FitDiverged("window has no extent in eta".into()));
    }

    let mut x = vec![0.0; etas.len()];
    let mut profile = |u: f64| {
        let eta_c = eta_max + span * u.exp();
        for (xi, e) in x.iter_mut().zip(&etas) {
            *xi = (eta_c - e).ln();
        }
        regress(&x, &ln_chi)
    };

    // u = ln((eta_c - eta_max) / span) over (ln 1e-9, ln 10].
    let (u_lo, u_hi) = (1e-9f64.ln(), 10f64.ln());
    const SWEEP: usize = 400;
    let us: Vec<f64> = (0..=SWEEP)
        .map(|k| u_lo + (u_hi - u_lo) * k as f64 / SWEEP as f64)
        .collect();
    let sses: Vec<f64> = us.iter().map(|&u| profile(u).sse).collect();
    let (kbest, &best) = sses
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("sweep is not empty");
    let worst = sses.iter().fold(0.0f64, |m, &s| m.max(s));
    if worst - best <= 1e-12 * worst + 1e-300 {
        return Err(CriticalError::FitDiverged("residual profile is flat".into()));
    }
    if kbest == 0 || kbest == SWEEP {
        return Err(CriticalError::FitDiverged(format!(
            "no interior minimum (best eta_c at the {} end of the search range)",
            if kbest == 0 { "lower" } else { "upper" }
        )));
    }

    let (mut a, mut b) = (us[kbest - 1], us[kbest + 1]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = profile(c).sse;
    let mut fd = profile(d).sse;
    while b - a > 1e-14 * (1.0 + a.abs()) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = profile(c).sse;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = profile(d).sse;
        }
    }
    let u = 0.5 * (a + b);
    let line = profile(u);
    let gamma = -line.slope;
    if !(gamma > 0.0) {
        return Err(CriticalError::FitDiverged(format!("gamma = {gamma} is not positive")));
    }
    Ok(CriticalFit {
        c: line.intercept.exp(),
        eta_c: eta_max + span * u.exp(),
        gamma,
        sse: line.sse,
        n_points: etas.len(),
        r_squared: if line.sst > 0.0 { 1.0 - line.sse / line.sst } else { 1.0 },
    })
}

/// Fits the window of a scan.
pub fn fit_power_law(scan: &ScanResult) -> Result<CriticalFit, CriticalError> {
    fit_window(&scan.window())
}
